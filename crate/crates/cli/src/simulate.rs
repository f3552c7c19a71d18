use std::path::PathBuf;

use clap::{Args, Subcommand};
use hbrom::fom::{euler_simulate, kpp_simulate, synthetic_vks, EulerConfig, EulerParams, KppConfig, SnapshotSet, SyntheticVksConfig};
use hbrom::io::save_snapshots;
use hbrom::pipeline::Profile;
use rayon::prelude::*;
use serde_json::json;

use crate::{create_parent, CliResult, Ctx, Failure};

#[derive(Args)]
pub struct SimulateArgs {
    #[command(subcommand)]
    system: System,
}

#[derive(Subcommand)]
enum System {
    /// 2D KPP rotating wave (WENO-5 / local Lax–Friedrichs).
    Kpp(Common),
    /// 1D shock–entropy interaction (HLL), one trajectory or the full ensemble.
    Euler(EulerArgs),
    /// Synthetic vortex-street surrogate.
    SyntheticVks(Common),
}

#[derive(Args)]
struct Common {
    /// `desk` (fast) or `paper` resolution.
    #[arg(long, default_value = "desk")]
    profile: Profile,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EulerArgs {
    #[command(flatten)]
    common: Common,
    /// Velocity amplitude of the initial shock, in [2, 3].
    #[arg(long, required_unless_present = "ensemble")]
    eta_u: Option<f64>,
    /// Density amplitude of the entropy wave, in [3, 4].
    #[arg(long, required_unless_present = "ensemble")]
    eta_rho: Option<f64>,
    /// Simulate the whole parameter grid into the `--out` directory.
    #[arg(long, conflicts_with_all = ["eta_u", "eta_rho"])]
    ensemble: bool,
    /// Worker threads for the ensemble.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

fn summary(ctx: &Ctx, path: &std::path::Path, s: &SnapshotSet) -> serde_json::Value {
    let v = json!({
        "path": path.display().to_string(),
        "source": s.source.as_str(),
        "nt": s.n_t(),
        "ndof": s.n_dof(),
        "params": s.params.map(|p| json!({"eta_u": p.eta_u, "eta_rho": p.eta_rho})),
    });
    if !ctx.json {
        println!("{}  source={} nt={} ndof={}", path.display(), s.source.as_str(), s.n_t(), s.n_dof());
    }
    v
}

fn write(ctx: &Ctx, path: &PathBuf, s: &SnapshotSet) -> CliResult<()> {
    create_parent(path)?;
    save_snapshots(path, s)?;
    let v = summary(ctx, path, s);
    if ctx.json {
        println!("{v}");
    }
    Ok(())
}

fn euler_config(profile: Profile) -> EulerConfig {
    match profile {
        Profile::Desk => EulerConfig::desk(),
        Profile::Paper => EulerConfig::default(),
    }
}

/// Parameter grid of the ensemble: 4×5 at desk scale, 10×10 at paper scale.
pub fn ensemble_params(profile: Profile) -> Vec<EulerParams> {
    match profile {
        Profile::Desk => EulerParams::grid(4, 5),
        Profile::Paper => EulerParams::grid(10, 10),
    }
}

pub fn run(ctx: &Ctx, args: SimulateArgs) -> CliResult<()> {
    match args.system {
        System::Kpp(c) => {
            let cfg = match c.profile {
                Profile::Desk => KppConfig::desk(),
                Profile::Paper => KppConfig::default(),
            };
            write(ctx, &c.out, &kpp_simulate(&cfg)?)
        }
        System::SyntheticVks(c) => write(ctx, &c.out, &synthetic_vks(&SyntheticVksConfig::default())?),
        System::Euler(e) => {
            let cfg = euler_config(e.common.profile);
            if !e.ensemble {
                let (u, rho) = (e.eta_u.expect("required by clap"), e.eta_rho.expect("required by clap"));
                let params = EulerParams::new(u, rho).map_err(|err| Failure::Usage(err.to_string()))?;
                return write(ctx, &e.common.out, &euler_simulate(&params, &cfg)?);
            }
            if e.jobs == 0 {
                return Err(Failure::Usage("--jobs must be at least 1".into()));
            }
            let params = ensemble_params(e.common.profile);
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(e.jobs)
                .build()
                .map_err(|err| Failure::Usage(format!("thread pool: {err}")))?;
            let sets: Vec<SnapshotSet> =
                pool.install(|| params.par_iter().map(|p| euler_simulate(p, &cfg)).collect::<hbrom::Result<_>>())?;
            std::fs::create_dir_all(&e.common.out).map_err(|err| Failure::Core(err.into()))?;
            let mut rows = Vec::with_capacity(sets.len());
            for (k, s) in sets.iter().enumerate() {
                let path = e.common.out.join(format!("member_{k:03}.snap"));
                save_snapshots(&path, s)?;
                rows.push(summary(ctx, &path, s));
            }
            if ctx.json {
                println!("{}", serde_json::Value::Array(rows));
            }
            Ok(())
        }
    }
}
