//! On-disk formats: binary snapshot files, JSON checkpoints and reduction
//! artifacts, and CSV metrics/prediction tables.

mod checkpoint;
mod metrics;
mod snapshot_file;

pub use checkpoint::{ArchInfo, CheckpointFile, GammaParams, ReductionFile, XiParam, CHECKPOINT_VERSION};
pub use metrics::{read_metrics, write_coefficients_csv, write_metrics, MetricsRow, MetricsWriter, METRICS_HEADER};
pub use snapshot_file::{decode_snapshots, encode_snapshots, load_snapshots, save_snapshots, SNAPSHOT_MAGIC, SNAPSHOT_VERSION};
