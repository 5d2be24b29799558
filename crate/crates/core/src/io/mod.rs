//! Configuration, initial data, snapshots and run orchestration.

pub mod config;
pub mod initial;
pub mod run;
pub mod snapshot;

pub use config::{parse_config, BumpShape, RunConfig};
pub use initial::make_initial_data;
pub use run::{resume, run, snapshot_name, RunOutcome, CSV_HEADER, CSV_NAME, LATEST_SNAPSHOT};
pub use snapshot::{read_snapshot, write_snapshot, RunMeta, Snapshot};
