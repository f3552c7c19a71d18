use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use clap::Args;
use hbrom::dynamics::ModelKind;
use hbrom::fom::Source;
use hbrom::io::{CheckpointFile, MetricsRow, MetricsWriter, ReductionFile};
use hbrom::numkit::DenseMatrix;
use hbrom::pipeline::{prepare, train_observed, Profile, Task, TrainConfig};
use hbrom::rom::PodBasis;
use serde_json::json;

use crate::{files_with_suffix, require, CliResult, Ctx, Failure};

#[derive(Args)]
pub struct TrainArgs {
    /// kpp, euler, vks-full or vks-steady.
    #[arg(long)]
    task: Task,
    /// node, hbnode or ghbnode.
    #[arg(long)]
    model: ModelKind,
    /// JSON overrides on top of the task preset.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = "desk")]
    profile: Profile,
    #[arg(long)]
    epochs: Option<usize>,
    /// POD reduction files (several, or one directory, for the ensemble task).
    #[arg(long, num_args = 1..)]
    data: Vec<PathBuf>,
    /// Seed of the held-out ensemble members, kept apart from `--seed` so
    /// that runs with different seeds share one split.
    #[arg(long, default_value_t = 0)]
    split_seed: u64,
    /// Run directory for `metrics.csv`, `run.json` and `checkpoint.json`.
    #[arg(long)]
    out: PathBuf,
}

/// Default reduction artifact a task reads when `--data` is absent.
pub fn default_data(task: Task) -> PathBuf {
    PathBuf::from(match task {
        Task::KppSeq => "kpp.pod.json",
        Task::EulerParamSeq => "euler_pod",
        Task::VksFullSeq | Task::VksSteadyVae => "vks.pod.json",
    })
}

fn source_fits(task: Task, source: Source) -> bool {
    match task {
        Task::KppSeq => source == Source::Kpp,
        Task::EulerParamSeq => source == Source::Euler,
        Task::VksFullSeq | Task::VksSteadyVae => matches!(source, Source::Synthetic | Source::VksImport),
    }
}

/// POD bases backing a task, in file order.
pub fn load_bases(task: Task, paths: &[PathBuf]) -> CliResult<Vec<PodBasis>> {
    let default = [default_data(task)];
    let paths = if paths.is_empty() { &default[..] } else { paths };
    let mut files = Vec::new();
    for p in paths {
        require(p, "reduction artifact")?;
        if p.is_dir() {
            let found = files_with_suffix(p, ".pod.json")?;
            if found.is_empty() {
                return Err(Failure::Usage(format!("reduction artifact not found: no .pod.json files in {}", p.display())));
            }
            files.extend(found);
        } else {
            files.push(p.clone());
        }
    }
    files
        .iter()
        .map(|p| match ReductionFile::load(p)? {
            ReductionFile::Pod { source, basis, .. } if source_fits(task, source) => Ok(basis),
            ReductionFile::Pod { source, .. } => {
                Err(Failure::Usage(format!("{} holds {} data, task {task} needs another source", p.display(), source.as_str())))
            }
            ReductionFile::Dmd { .. } => Err(Failure::Usage(format!("{} is a DMD model; training needs a POD basis", p.display()))),
        })
        .collect()
}

fn build_config(task: Task, model: ModelKind, args: &TrainArgs, seed: Option<u64>) -> CliResult<TrainConfig> {
    let preset = TrainConfig::preset(task, model, args.profile);
    let mut cfg = match &args.config {
        None => preset,
        Some(path) => {
            require(path, "config file")?;
            let text = std::fs::read_to_string(path).map_err(|e| Failure::Core(e.into()))?;
            let overlay: serde_json::Value =
                serde_json::from_str(&text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
            let serde_json::Value::Object(fields) = overlay else {
                return Err(Failure::Usage(format!("{}: expected a JSON object", path.display())));
            };
            let mut merged = serde_json::to_value(&preset).map_err(|e| Failure::Core(e.into()))?;
            for (k, v) in fields {
                merged[k] = v;
            }
            serde_json::from_value(merged).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?
        }
    };
    // flags take precedence over the config file
    cfg.task = task;
    cfg.model = model;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(e) = args.epochs {
        cfg.epochs = e;
    }
    cfg.validate().map_err(|e| Failure::Usage(e.to_string()))?;
    Ok(cfg)
}

fn write_json(path: &Path, value: &serde_json::Value) -> CliResult<()> {
    std::fs::write(path, serde_json::to_string_pretty(value).map_err(|e| Failure::Core(e.into()))?).map_err(|e| Failure::Core(e.into()))
}

pub fn run(ctx: &Ctx, args: TrainArgs) -> CliResult<()> {
    let cfg = build_config(args.task, args.model, &args, ctx.seed)?;
    let bases = load_bases(cfg.task, &args.data)?;
    let series: Vec<DenseMatrix> = bases.iter().map(|b| b.coeffs.clone()).collect();
    let data = prepare(&series, &cfg, args.split_seed)?;

    std::fs::create_dir_all(&args.out).map_err(|e| Failure::Core(e.into()))?;
    write_json(&args.out.join("run.json"), &json!({ "config": cfg, "split_seed": args.split_seed }))?;
    let metrics_path = args.out.join("metrics.csv");
    let file = File::create(&metrics_path).map_err(|e| Failure::Core(e.into()))?;
    let mut writer = MetricsWriter::new(BufWriter::new(file))?;
    let mut write_err = None;
    log::info!(
        "training {} on {} ({} train / {} val windows), seed {}",
        cfg.model,
        cfg.task,
        data.dataset.train.len(),
        data.dataset.val.len(),
        cfg.seed
    );
    let result = train_observed(&data, &cfg, &mut |rec| {
        // the CSV holds finite rows only; a divergent epoch ends the history
        if write_err.is_none() && rec.is_finite() {
            write_err = writer.push(&MetricsRow::from(rec)).err();
        }
    });
    if let Some(e) = write_err {
        return Err(e.into());
    }
    let run = result?;
    // single-series tasks carry their basis so predictions can be lifted back to fields
    let basis = (bases.len() == 1).then(|| bases.into_iter().next().expect("one basis"));
    CheckpointFile::from_model(&run.model, basis).save(&args.out.join("checkpoint.json"))?;
    let last = run.final_record().expect("at least one epoch");
    if ctx.json {
        println!(
            "{}",
            json!({
                "out": args.out.display().to_string(),
                "epochs": run.records.len(),
                "final_train_mse": last.train_mse,
                "final_val_mse": last.val_mse,
            })
        );
    } else {
        println!(
            "{} {} seed {}: {} epochs, final train {:.6e}, val {:.6e} -> {}",
            cfg.task,
            cfg.model,
            cfg.seed,
            run.records.len(),
            last.train_mse,
            last.val_mse,
            args.out.display()
        );
    }
    Ok(())
}
