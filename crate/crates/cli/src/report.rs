use std::collections::BTreeMap;
use std::fs::File;
use std::path::PathBuf;

use clap::Args;
use hbrom::dynamics::ModelKind;
use hbrom::io::{read_metrics, MetricsRow};
use hbrom::pipeline::TrainConfig;
use serde_json::{json, Value};

use crate::{require, CliResult, Ctx, Failure};

#[derive(Args)]
pub struct ReportArgs {
    /// Run directories written by `train`.
    #[arg(required = true)]
    runs: Vec<PathBuf>,
}

struct Run {
    dir: PathBuf,
    config: TrainConfig,
    rows: Vec<MetricsRow>,
}

fn median(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn load(dir: &PathBuf) -> CliResult<Run> {
    let run_json = dir.join("run.json");
    let metrics = dir.join("metrics.csv");
    require(&run_json, "run description")?;
    require(&metrics, "metrics file")?;
    let text = std::fs::read_to_string(&run_json).map_err(|e| Failure::Core(e.into()))?;
    let v: Value = serde_json::from_str(&text).map_err(|e| Failure::Usage(format!("{}: {e}", run_json.display())))?;
    let config: TrainConfig =
        serde_json::from_value(v["config"].clone()).map_err(|e| Failure::Usage(format!("{}: {e}", run_json.display())))?;
    let rows = read_metrics(File::open(&metrics).map_err(|e| Failure::Core(e.into()))?)?;
    Ok(Run { dir: dir.clone(), config, rows })
}

fn run_summary(run: &Run) -> Value {
    let last = run.rows.last();
    let f = |g: fn(&MetricsRow) -> f64| last.map(g);
    json!({
        "dir": run.dir.display().to_string(),
        "task": run.config.task.as_str(),
        "model": run.config.model.as_str(),
        "seed": run.config.seed,
        "epochs_planned": run.config.epochs,
        "epochs_completed": run.rows.len(),
        "final_train_mse": f(|r| r.train_mse),
        "final_val_mse": f(|r| r.val_mse),
        "total_fwd_nfe": run.rows.iter().map(|r| r.fwd_nfe).sum::<usize>(),
        "total_bwd_nfe": run.rows.iter().map(|r| r.bwd_nfe).sum::<usize>(),
        "median_fwd_nfe_per_epoch": median(run.rows.iter().map(|r| r.fwd_nfe as f64).collect()),
        "mean_adj_norm_t0": run.rows.iter().map(|r| r.adj_norm_t0).sum::<f64>() / run.rows.len().max(1) as f64,
        "mean_adj_norm_tT": run.rows.iter().map(|r| r.adj_norm_t_end).sum::<f64>() / run.rows.len().max(1) as f64,
    })
}

const AGGREGATED: [&str; 7] = [
    "final_train_mse",
    "final_val_mse",
    "total_fwd_nfe",
    "total_bwd_nfe",
    "median_fwd_nfe_per_epoch",
    "mean_adj_norm_t0",
    "mean_adj_norm_tT",
];

/// Medians across seeds per model kind, plus head-to-head comparisons of
/// the momentum models against the first-order baseline.
fn summarize(runs: &[Run]) -> Value {
    let per_run: Vec<Value> = runs.iter().map(run_summary).collect();
    let mut by_model: BTreeMap<&str, Vec<&Value>> = BTreeMap::new();
    for v in &per_run {
        by_model.entry(v["model"].as_str().unwrap_or("")).or_default().push(v);
    }
    let mut models = serde_json::Map::new();
    for (kind, vs) in &by_model {
        let mut m = serde_json::Map::new();
        m.insert("runs".into(), json!(vs.len()));
        for key in AGGREGATED {
            let xs: Vec<f64> = vs.iter().filter_map(|v| v[key].as_f64()).collect();
            m.insert(format!("median_{key}"), json!(median(xs)));
        }
        // ‖a(0)‖ / ‖a(T)‖: how much of the terminal sensitivity survives back to t = 0
        let ratios: Vec<f64> = vs
            .iter()
            .filter_map(|v| Some(v["mean_adj_norm_t0"].as_f64()? / v["mean_adj_norm_tT"].as_f64()?))
            .collect();
        m.insert("median_adj_norm_ratio".into(), json!(median(ratios)));
        models.insert(kind.to_string(), Value::Object(m));
    }
    let mut out = serde_json::Map::new();
    out.insert("runs".into(), Value::Array(per_run.clone()));
    let node = ModelKind::Node.as_str();
    for kind in [ModelKind::Hbnode, ModelKind::Ghbnode].map(ModelKind::as_str) {
        let (Some(a), Some(b)) = (models.get(kind), models.get(node)) else { continue };
        let get = |v: &Value, k: &str| v[k].as_f64().unwrap_or(f64::NAN);
        out.insert(format!("{kind}_val_mse_lower"), json!(get(a, "median_final_val_mse") < get(b, "median_final_val_mse")));
        out.insert(
            format!("{kind}_fwd_nfe_not_higher"),
            json!(get(a, "median_median_fwd_nfe_per_epoch") <= get(b, "median_median_fwd_nfe_per_epoch")),
        );
        out.insert(
            format!("{kind}_adj_norm_ratio_higher"),
            json!(get(a, "median_adj_norm_ratio") > get(b, "median_adj_norm_ratio")),
        );
    }
    out.insert("models".into(), Value::Object(models));
    Value::Object(out)
}

fn print_table(summary: &Value) {
    println!(
        "{:<9} {:>4} {:>14} {:>14} {:>10} {:>12} {:>12} {:>12}",
        "model", "runs", "train_mse", "val_mse", "fwd_nfe/ep", "fwd_total", "bwd_total", "adj_ratio"
    );
    for (kind, m) in summary["models"].as_object().into_iter().flatten() {
        let g = |k: &str| m[k].as_f64().unwrap_or(f64::NAN);
        println!(
            "{:<9} {:>4} {:>14.6e} {:>14.6e} {:>10.1} {:>12.0} {:>12.0} {:>12.4e}",
            kind,
            m["runs"].as_u64().unwrap_or(0),
            g("median_final_train_mse"),
            g("median_final_val_mse"),
            g("median_median_fwd_nfe_per_epoch"),
            g("median_total_fwd_nfe"),
            g("median_total_bwd_nfe"),
            g("median_adj_norm_ratio"),
        );
    }
    for (k, v) in summary.as_object().into_iter().flatten() {
        if v.is_boolean() {
            println!("{k}: {v}");
        }
    }
}

pub fn run(ctx: &Ctx, args: ReportArgs) -> CliResult<()> {
    let runs: Vec<Run> = args.runs.iter().map(load).collect::<CliResult<_>>()?;
    let summary = summarize(&runs);
    if ctx.json {
        println!("{summary}");
    } else {
        print_table(&summary);
    }
    Ok(())
}
