use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;

use clap::Args;
use hbrom::io::{write_coefficients_csv, CheckpointFile};
use hbrom::numkit::DenseMatrix;
use hbrom::pipeline::{prepare, rollout, Task};
use hbrom::rom::pod_reconstruct;
use serde_json::json;

use crate::train::load_bases;
use crate::{create_parent, require, CliResult, Ctx, Failure};

#[derive(Args)]
pub struct PredictArgs {
    checkpoint: PathBuf,
    /// Number of coefficient rows to predict.
    #[arg(long)]
    horizon: usize,
    /// Coefficient CSV (`t, alpha_1 … alpha_r`).
    #[arg(long)]
    out: PathBuf,
    /// Also write the reconstructed fields (one row of `ndof` values per step).
    #[arg(long)]
    reconstruct: Option<PathBuf>,
    /// Expected task; refuses checkpoints trained for another one.
    #[arg(long)]
    task: Option<Task>,
    /// POD reduction files; defaults to the basis embedded in the checkpoint.
    #[arg(long, num_args = 1..)]
    data: Vec<PathBuf>,
    /// First row of the seed window (default: the first validation window).
    #[arg(long)]
    start: Option<usize>,
    /// Ensemble member holding the seed window, with `--start`.
    #[arg(long, default_value_t = 0)]
    member: usize,
    /// Ensemble hold-out seed used at training time.
    #[arg(long, default_value_t = 0)]
    split_seed: u64,
}

pub fn run(ctx: &Ctx, args: PredictArgs) -> CliResult<()> {
    require(&args.checkpoint, "checkpoint")?;
    let ck = CheckpointFile::load(&args.checkpoint)?;
    if let Some(task) = args.task {
        if task != ck.task {
            return Err(Failure::Usage(format!("checkpoint {} was trained for {}, not {task}", args.checkpoint.display(), ck.task)));
        }
    }
    let model = ck.to_model()?;
    let (seq_in, r) = (model.config.seq_in, model.config.r);
    let bases = if !args.data.is_empty() {
        load_bases(ck.task, &args.data)?
    } else {
        match &ck.pod_basis {
            Some(b) => vec![b.clone()],
            None => return Err(Failure::Usage("checkpoint embeds no POD basis; pass --data".into())),
        }
    };
    if let Some(b) = bases.iter().find(|b| b.r < r) {
        return Err(Failure::Usage(format!("reduction has {} modes, the checkpoint needs {r}", b.r)));
    }
    let series: Vec<DenseMatrix> = bases.iter().map(|b| b.coeffs.clone()).collect();
    let (member, start) = match args.start {
        Some(s) => (args.member, s),
        None => {
            let data = prepare(&series, &model.config, args.split_seed)?;
            let w = data.dataset.val.first().ok_or_else(|| Failure::Usage("no validation window to seed from".into()))?;
            (w.series, w.start)
        }
    };
    let coeffs = series.get(member).ok_or_else(|| Failure::Usage(format!("member {member} out of range ({} series)", series.len())))?;
    if start + seq_in > coeffs.rows() {
        return Err(Failure::Usage(format!("seed window {start}..{} exceeds {} snapshots", start + seq_in, coeffs.rows())));
    }
    let seed_window = coeffs.row_range(start, start + seq_in).col_range(0, r);
    let pred = if args.horizon == 0 { DenseMatrix::zeros(0, r) } else { rollout(&model, &seed_window, args.horizon)? };
    // t is the snapshot index the prediction stands for
    let t: Vec<f64> = (0..args.horizon).map(|k| (start + seq_in + k) as f64).collect();

    create_parent(&args.out)?;
    let file = File::create(&args.out).map_err(|e| Failure::Core(e.into()))?;
    write_coefficients_csv(BufWriter::new(file), "alpha", Some(&t), &pred)?;

    if let Some(path) = &args.reconstruct {
        let basis = &bases[member];
        let mut full = DenseMatrix::zeros(pred.rows(), basis.r);
        for i in 0..pred.rows() {
            full.row_mut(i)[..r].copy_from_slice(pred.row(i));
        }
        let fields = pod_reconstruct(basis, &full)?;
        create_parent(path)?;
        let file = File::create(path).map_err(|e| Failure::Core(e.into()))?;
        write_coefficients_csv(BufWriter::new(file), "u", None, &fields)?;
    }
    if ctx.json {
        println!("{}", json!({"rows": args.horizon, "member": member, "seed_start": start, "out": args.out.display().to_string()}));
    } else {
        println!("{} rows from seed window {start}..{} -> {}", args.horizon, start + seq_in, args.out.display());
    }
    Ok(())
}
