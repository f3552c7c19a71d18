use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use hbrom::fom::SnapshotSet;
use hbrom::io::{load_snapshots, ReductionFile};
use hbrom::rom::{center_snapshots, dmd_fit, pod_from_snapshots, relative_info, LiftFn, LiftSpec};
use serde_json::json;

use crate::{create_parent, files_with_suffix, require, CliResult, Ctx, Failure};

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Pod,
    Dmd,
}

#[derive(Args)]
pub struct ReduceArgs {
    #[arg(value_enum)]
    method: Method,
    /// Snapshot file, or a directory of `.snap` files reduced one by one.
    input: PathBuf,
    /// Reduction file, or a directory when the input is one.
    output: PathBuf,
    #[arg(long)]
    rank: usize,
    /// Comma-separated DMD lifts added to the identity: cos, sin, sq, cube.
    #[arg(long, value_delimiter = ',')]
    lift: Vec<LiftFn>,
}

const REPORT_MAX_RANK: usize = 32;

fn lift_spec(extra: &[LiftFn]) -> CliResult<LiftSpec> {
    let mut fns = vec![LiftFn::Identity];
    fns.extend(extra.iter().copied().filter(|&f| f != LiftFn::Identity));
    LiftSpec::new(fns).map_err(|e| Failure::Usage(e.to_string()))
}

fn info_table(weights: &[f64]) -> CliResult<Vec<(usize, f64)>> {
    (1..=weights.len().min(REPORT_MAX_RANK)).map(|r| Ok((r, relative_info(weights, r)?))).collect()
}

/// Reduces one snapshot set; returns the artifact and a JSON report.
fn reduce_one(s: &SnapshotSet, args: &ReduceArgs, spec: &LiftSpec) -> CliResult<(ReductionFile, serde_json::Value)> {
    match args.method {
        Method::Pod => {
            let basis = pod_from_snapshots(s, args.rank)?;
            let table = info_table(&basis.eigenvalues)?;
            let report = json!({
                "kind": "pod",
                "rank": args.rank,
                "nt": s.n_t(),
                "ndof": s.n_dof(),
                "info_at_rank": basis.relative_info(args.rank)?,
                "info": table.iter().map(|(r, i)| json!({"r": r, "info": i})).collect::<Vec<_>>(),
            });
            let file = ReductionFile::Pod { version: 1, source: s.source, params: s.params, times: s.times().to_vec(), basis };
            Ok((file, report))
        }
        Method::Dmd => {
            let (fluct, mean) = center_snapshots(s)?;
            let model = dmd_fit(&fluct, args.rank, spec)?.with_mean(mean)?;
            let sq: Vec<f64> = model.singular_values.iter().map(|v| v * v).collect();
            let table = info_table(&sq)?;
            let mut moduli: Vec<f64> = model.eigenvalues.iter().map(|l| l.norm()).collect();
            moduli.sort_by(|a, b| b.total_cmp(a));
            let report = json!({
                "kind": "dmd",
                "rank": args.rank,
                "lift": spec.fns().iter().map(|f| f.name()).collect::<Vec<_>>(),
                "nt": s.n_t(),
                "ndof": s.n_dof(),
                "info_at_rank": model.relative_info(args.rank)?,
                "info": table.iter().map(|(r, i)| json!({"r": r, "info": i})).collect::<Vec<_>>(),
                "eigenvalue_moduli": moduli,
                "fit_residual": model.fit_residual,
            });
            Ok((ReductionFile::Dmd { version: 1, source: s.source, model }, report))
        }
    }
}

fn print_report(path: &Path, report: &serde_json::Value) {
    println!("{}: {} rank {}  (nt={}, ndof={})", path.display(), report["kind"].as_str().unwrap_or(""), report["rank"], report["nt"], report["ndof"]);
    println!("{:>4}  {:>12}", "r", "I(r)");
    for row in report["info"].as_array().into_iter().flatten() {
        println!("{:>4}  {:>12.8}", row["r"].as_u64().unwrap_or(0), row["info"].as_f64().unwrap_or(f64::NAN));
    }
    if let Some(m) = report["eigenvalue_moduli"].as_array() {
        let text: Vec<String> = m.iter().map(|v| format!("{:.6}", v.as_f64().unwrap_or(f64::NAN))).collect();
        println!("|lambda|: {}", text.join(" "));
    }
}

pub fn run(ctx: &Ctx, args: ReduceArgs) -> CliResult<()> {
    require(&args.input, "snapshot input")?;
    let spec = lift_spec(&args.lift)?;
    if matches!(args.method, Method::Pod) && !args.lift.is_empty() {
        return Err(Failure::Usage("--lift applies to dmd only".into()));
    }
    let jobs: Vec<(PathBuf, PathBuf)> = if args.input.is_dir() {
        let inputs = files_with_suffix(&args.input, ".snap")?;
        if inputs.is_empty() {
            return Err(Failure::Usage(format!("no .snap files in {}", args.input.display())));
        }
        let ext = match args.method {
            Method::Pod => "pod.json",
            Method::Dmd => "dmd.json",
        };
        inputs
            .into_iter()
            .map(|p| {
                let stem = p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
                let out = args.output.join(format!("{stem}.{ext}"));
                (p, out)
            })
            .collect()
    } else {
        vec![(args.input.clone(), args.output.clone())]
    };
    let mut reports = Vec::with_capacity(jobs.len());
    for (input, output) in &jobs {
        let s = load_snapshots(input)?;
        let (file, mut report) = reduce_one(&s, &args, &spec)?;
        create_parent(output)?;
        file.save(output)?;
        report["input"] = json!(input.display().to_string());
        report["output"] = json!(output.display().to_string());
        if !ctx.json {
            print_report(input, &report);
        }
        reports.push(report);
    }
    let mean_info = reports.iter().filter_map(|r| r["info_at_rank"].as_f64()).sum::<f64>() / reports.len() as f64;
    if ctx.json {
        let out = if reports.len() == 1 {
            reports.pop().expect("one report")
        } else {
            json!({"members": reports, "mean_info_at_rank": mean_info})
        };
        println!("{out}");
    } else if reports.len() > 1 {
        println!("mean I({}) over {} members: {:.8}", args.rank, reports.len(), mean_info);
    }
    Ok(())
}
