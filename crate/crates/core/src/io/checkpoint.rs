use std::collections::BTreeMap;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::ModelKind;
use crate::fom::{EulerParams, Source};
use crate::pipeline::{Network, Normalizer, Task, TrainConfig, TrainedModel};
use crate::rom::{DmdModel, PodBasis};
use crate::{Error, Result};

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArchInfo {
    /// `seq2seq` or `vae`.
    pub architecture: String,
    pub layers: usize,
    /// Widths of the vector-field network.
    pub widths: Vec<usize>,
    pub activation: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GammaParams {
    pub omega: f64,
    pub epsilon: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct XiParam {
    pub chi: f64,
}

/// JSON checkpoint. Floats are written in shortest round-trip form, so a
/// load/save cycle reproduces the file byte for byte.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckpointFile {
    pub version: u32,
    pub model_kind: ModelKind,
    pub task: Task,
    pub arch: ArchInfo,
    pub gamma_params: GammaParams,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub xi_param: Option<XiParam>,
    pub config: TrainConfig,
    pub normalizer: Normalizer,
    /// Network parameter blocks other than `omega`/`chi`, by name.
    pub parameters: BTreeMap<String, Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub pod_basis: Option<PodBasis>,
}

impl CheckpointFile {
    pub fn from_model(model: &TrainedModel, pod_basis: Option<PodBasis>) -> Self {
        let ode = model.network.ode();
        let parameters = model
            .network
            .block_names()
            .into_iter()
            .zip(model.network.blocks())
            .filter(|(name, _)| *name != "omega" && *name != "chi")
            .map(|(name, values)| (name.to_string(), values.to_vec()))
            .collect();
        Self {
            version: CHECKPOINT_VERSION,
            model_kind: ode.kind,
            task: model.config.task,
            arch: ArchInfo {
                architecture: match model.network {
                    Network::Seq2Seq(_) => "seq2seq",
                    Network::Vae(_) => "vae",
                }
                .into(),
                layers: ode.net.n_layers(),
                widths: ode.net.widths().to_vec(),
                activation: "tanh".into(),
            },
            gamma_params: GammaParams { omega: ode.omega, epsilon: ode.epsilon },
            xi_param: (ode.kind == ModelKind::Ghbnode).then_some(XiParam { chi: ode.chi }),
            config: model.config.clone(),
            normalizer: model.normalizer.clone(),
            parameters,
            pod_basis,
        }
    }

    /// Rebuilds the network from the stored configuration and parameters.
    pub fn to_model(&self) -> Result<TrainedModel> {
        let bad = |detail: String| Error::Format { offset: 0, detail };
        if self.version != CHECKPOINT_VERSION {
            return Err(bad(format!("unsupported checkpoint version {}", self.version)));
        }
        if self.config.model != self.model_kind || self.config.task != self.task {
            return Err(bad("model kind or task disagrees with the stored config".into()));
        }
        let mut network = Network::new(&self.config, &mut ChaCha8Rng::seed_from_u64(0))?;
        if network.ode().net.widths() != self.arch.widths.as_slice() {
            return Err(bad(format!("vector-field widths {:?} do not match the config", self.arch.widths)));
        }
        let names = network.block_names();
        let chi = self.xi_param.map_or(network.ode().chi, |x| x.chi);
        for (name, block) in names.iter().zip(network.blocks_mut()) {
            let values: &[f64] = match *name {
                "omega" => std::slice::from_ref(&self.gamma_params.omega),
                "chi" => std::slice::from_ref(&chi),
                _ => self.parameters.get(*name).ok_or_else(|| bad(format!("missing parameter block '{name}'")))?,
            };
            if values.len() != block.len() {
                return Err(bad(format!("block '{name}' has {} values, the architecture needs {}", values.len(), block.len())));
            }
            if values.iter().any(|v| !v.is_finite()) {
                return Err(bad(format!("block '{name}' holds non-finite values")));
            }
            block.copy_from_slice(values);
        }
        if let Some(extra) = self.parameters.keys().find(|k| !names.contains(&k.as_str())) {
            return Err(bad(format!("unknown parameter block '{extra}'")));
        }
        match &mut network {
            Network::Seq2Seq(m) => m.ode.epsilon = self.gamma_params.epsilon,
            Network::Vae(m) => m.ode.epsilon = self.gamma_params.epsilon,
        }
        if self.normalizer.width() != self.config.r {
            return Err(bad("normalizer width differs from r".into()));
        }
        Ok(TrainedModel { config: self.config.clone(), network, normalizer: self.normalizer.clone() })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Format { offset: e.column(), detail: format!("checkpoint line {}: {e}", e.line()) })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// Output of a reduction: a POD basis or a DMD model, with provenance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ReductionFile {
    Pod {
        version: u32,
        source: Source,
        #[serde(skip_serializing_if = "Option::is_none", default)]
        params: Option<EulerParams>,
        times: Vec<f64>,
        basis: PodBasis,
    },
    Dmd {
        version: u32,
        source: Source,
        model: DmdModel,
    },
}

impl ReductionFile {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Format { offset: e.column(), detail: format!("reduction line {}: {e}", e.line()) })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn pod(&self) -> Option<&PodBasis> {
        match self {
            ReductionFile::Pod { basis, .. } => Some(basis),
            ReductionFile::Dmd { .. } => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::Profile;
    use crate::rom::pod_fit_matrix;
    use crate::numkit::DenseMatrix;

    fn model(task: Task, kind: ModelKind) -> TrainedModel {
        let config = TrainConfig { r: 3, latent: 2, hidden: 4, layers: 3, rnn_units: 3, ..TrainConfig::preset(task, kind, Profile::Desk) };
        let mut network = Network::new(&config, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        for b in network.blocks_mut() {
            b.iter_mut().enumerate().for_each(|(i, v)| *v += 0.1 / (i as f64 + 3.0));
        }
        TrainedModel { config, network, normalizer: Normalizer { mean: vec![0.1, 0.2, 1.0 / 3.0], std: vec![1.0, 2.0, 0.7] } }
    }

    #[test]
    fn checkpoints_round_trip_exactly() {
        for (task, kind) in [(Task::KppSeq, ModelKind::Ghbnode), (Task::VksSteadyVae, ModelKind::Hbnode), (Task::EulerParamSeq, ModelKind::Node)] {
            let m = model(task, kind);
            let y = DenseMatrix::from_fn(5, 4, |i, j| ((i * 7 + j * 3) % 5) as f64 / 3.0);
            let ck = CheckpointFile::from_model(&m, Some(pod_fit_matrix(&y, 2).unwrap()));
            let json = ck.to_json().unwrap();
            let back = CheckpointFile::from_json(&json).unwrap();
            assert_eq!(back, ck);
            assert_eq!(back.to_json().unwrap(), json);
            assert_eq!(back.to_model().unwrap(), m);
            assert_eq!(ck.xi_param.is_some(), kind == ModelKind::Ghbnode);
        }
    }

    #[test]
    fn rejects_mismatched_blocks() {
        let mut ck = CheckpointFile::from_model(&model(Task::KppSeq, ModelKind::Hbnode), None);
        ck.parameters.get_mut("readout").unwrap().pop();
        assert!(matches!(ck.to_model(), Err(Error::Format { .. })));
        let mut ck = CheckpointFile::from_model(&model(Task::KppSeq, ModelKind::Hbnode), None);
        ck.model_kind = ModelKind::Node;
        assert!(ck.to_model().is_err());
        assert!(CheckpointFile::from_json("{\"version\": 1").is_err());
    }
}
