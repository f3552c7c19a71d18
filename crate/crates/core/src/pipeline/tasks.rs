use std::ops::Range;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::{Task, TrainConfig};
use super::normalize::Normalizer;
use super::windows::{make_windows_in, per_series_windows, WindowDataset};
use crate::numkit::DenseMatrix;
use crate::{Error, Result};

/// Steady-phase intervals of the vortex-street task: inputs from row 100,
/// validation labels up to row 200.
pub const VKS_STEADY_TRAIN: Range<usize> = 100..176;
pub const VKS_STEADY_VAL: Range<usize> = 175..201;
/// Transient-to-steady intervals of the vortex-street task.
pub const VKS_FULL_TRAIN: Range<usize> = 0..81;
pub const VKS_FULL_VAL: Range<usize> = 80..121;

/// Normalized windows ready for training, with the scaling that produced them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PreparedData {
    pub dataset: WindowDataset,
    pub normalizer: Normalizer,
}

/// Rows used and the train/validation split for a KPP coefficient series:
/// the first 4/5 of the snapshots, split 4:1 (1000 of 1250, split at 800).
pub fn kpp_split(n_t: usize) -> (usize, usize) {
    let used = n_t * 4 / 5;
    (used, used * 4 / 5)
}

/// Shuffled ensemble order; the last `ceil(M/10)` members are held out.
pub fn ensemble_validation(m: usize, seed: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..m).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_val = m.div_ceil(10);
    let mut val = order[m - n_val..].to_vec();
    val.sort_unstable();
    val
}

fn leading_modes(c: &DenseMatrix, r: usize) -> Result<DenseMatrix> {
    if c.cols() < r {
        return Err(Error::Config(format!("{r} modes requested, coefficients have {}", c.cols())));
    }
    Ok(c.col_range(0, r))
}

fn normalized(mut ds: WindowDataset, normalizer: Normalizer) -> PreparedData {
    for w in ds.train.iter_mut().chain(ds.val.iter_mut()) {
        w.inputs = normalizer.apply(&w.inputs);
        w.labels = normalizer.apply(&w.labels);
    }
    PreparedData { dataset: ds, normalizer }
}

fn ranged(c: &DenseMatrix, cfg: &TrainConfig, train: Range<usize>, val: Range<usize>) -> Result<PreparedData> {
    if c.rows() < val.end.max(train.end) {
        return Err(Error::InsufficientData(format!(
            "{} needs {} snapshots, got {}",
            cfg.task,
            val.end.max(train.end),
            c.rows()
        )));
    }
    let ds = make_windows_in(c, cfg.seq_in, cfg.seq_out, 1, train.clone(), val)?;
    let normalizer = Normalizer::fit(&[&c.row_range(train.start, train.end)])?;
    Ok(normalized(ds, normalizer))
}

/// Builds the task's windows from POD coefficients (`N_t × r'`, `r' ≥ r`):
/// one series for the single-trajectory tasks, one per ensemble member for
/// the parametric Euler task. Normalization statistics come from the
/// training rows only.
pub fn prepare(series: &[DenseMatrix], cfg: &TrainConfig, shuffle_seed: u64) -> Result<PreparedData> {
    cfg.validate()?;
    if series.is_empty() {
        return Err(Error::InsufficientData("no coefficient series".into()));
    }
    let series: Vec<DenseMatrix> = series.iter().map(|c| leading_modes(c, cfg.r)).collect::<Result<_>>()?;
    if cfg.task != Task::EulerParamSeq && series.len() != 1 {
        return Err(Error::Config(format!("{} trains on a single coefficient series", cfg.task)));
    }
    let c = &series[0];
    match cfg.task {
        Task::KppSeq => {
            let (used, split) = kpp_split(c.rows());
            ranged(c, cfg, 0..split, split..used)
        }
        Task::VksSteadyVae => ranged(c, cfg, VKS_STEADY_TRAIN, VKS_STEADY_VAL),
        Task::VksFullSeq => ranged(c, cfg, VKS_FULL_TRAIN, VKS_FULL_VAL),
        Task::EulerParamSeq => {
            let val = ensemble_validation(series.len(), shuffle_seed);
            if val.len() == series.len() {
                return Err(Error::InsufficientData("the ensemble is too small to hold out validation members".into()));
            }
            let ds = per_series_windows(&series, cfg.seq_in, cfg.seq_out, &val)?;
            let len = cfg.seq_in + cfg.seq_out;
            let train_rows: Vec<DenseMatrix> =
                (0..series.len()).filter(|k| !val.contains(k)).map(|k| series[k].row_range(0, len)).collect();
            let normalizer = Normalizer::fit(&train_rows.iter().collect::<Vec<_>>())?;
            Ok(normalized(ds, normalizer))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::ModelKind;
    use crate::pipeline::config::Profile;

    fn series(n: usize, r: usize) -> DenseMatrix {
        DenseMatrix::from_fn(n, r, |i, j| ((i + 1) * (j + 2)) as f64)
    }

    #[test]
    fn kpp_paper_split_matches_the_protocol() {
        assert_eq!(kpp_split(1250), (1000, 800));
        assert_eq!(kpp_split(300), (240, 192));
        let cfg = TrainConfig::preset(Task::KppSeq, ModelKind::Node, Profile::Paper);
        let p = prepare(&[series(1250, 8)], &cfg, 0).unwrap();
        // 1-based times: labels 5..=800 for training, 805..=1000 for validation
        let t = |w: &super::super::windows::Window| w.label_rows().start + 1;
        assert_eq!(p.dataset.train.first().map(t), Some(5));
        assert_eq!(p.dataset.train.last().map(t), Some(800));
        assert_eq!(p.dataset.val.first().map(t), Some(805));
        assert_eq!(p.dataset.val.last().map(t), Some(1000));
    }

    #[test]
    fn vks_intervals() {
        let cfg = TrainConfig::preset(Task::VksSteadyVae, ModelKind::Node, Profile::Desk);
        let p = prepare(&[series(400, 8)], &cfg, 0).unwrap();
        assert_eq!(p.dataset.train.len(), 75);
        assert_eq!(p.dataset.val.len(), 25);
        assert_eq!(p.dataset.train[0].start, 100);
        assert_eq!(p.dataset.val.last().unwrap().label_rows(), 200..201);
        let cfg = TrainConfig::preset(Task::VksFullSeq, ModelKind::Node, Profile::Desk);
        let p = prepare(&[series(400, 8)], &cfg, 0).unwrap();
        assert_eq!(p.dataset.train.last().unwrap().label_rows(), 80..81);
        assert_eq!(p.dataset.val[0].start, 80);
        assert_eq!(p.dataset.val.last().unwrap().label_rows(), 120..121);
    }

    #[test]
    fn euler_holds_out_whole_members() {
        let cfg = TrainConfig::preset(Task::EulerParamSeq, ModelKind::Ghbnode, Profile::Desk);
        let ens: Vec<_> = (0..20).map(|_| series(180, 8)).collect();
        let p = prepare(&ens, &cfg, 7).unwrap();
        let val = ensemble_validation(20, 7);
        assert_eq!(val.len(), 2);
        assert_eq!(p.dataset.train.len(), 18);
        assert!(p.dataset.val.iter().all(|w| val.contains(&w.series)));
        assert!(p.dataset.train.iter().all(|w| !val.contains(&w.series)));
        assert_eq!(p.dataset.train[0].labels.rows(), 30);
        assert_eq!(ensemble_validation(100, 0).len(), 10);
    }

    #[test]
    fn truncates_to_r_and_rejects_short_input() {
        let cfg = TrainConfig::preset(Task::KppSeq, ModelKind::Node, Profile::Desk);
        let p = prepare(&[series(300, 12)], &cfg, 0).unwrap();
        assert_eq!(p.dataset.width(), 8);
        assert!(prepare(&[series(300, 4)], &cfg, 0).is_err());
        let cfg = TrainConfig::preset(Task::VksSteadyVae, ModelKind::Node, Profile::Desk);
        assert!(matches!(prepare(&[series(150, 8)], &cfg, 0), Err(Error::InsufficientData(_))));
    }
}
