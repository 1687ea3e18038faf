//! Run orchestration, evaluation summaries and plot-data export.

mod analysis;
mod config;
mod run;
mod summary;

pub use analysis::{
    converging, poincare_section, replay, replay_header, touchdowns, write_phase_plane_csv, write_poincare_csv, write_replay_csv,
    PoincarePoint,
};
pub use config::{EnvSettings, RunConfig, SimSettings, StageKind};
pub use run::{read_manifest, sha256_hex, train, ArtifactEntry, Manifest, SeedReport, TrainReport, CONFIG_ECHO, FAILED, MANIFEST};
pub use summary::{compare, eval_to_dir, evaluate, relative_delta, Aggregate, EpisodeMetrics, ExperimentSummary, LoadedPolicy, MeanStd, SUMMARY_FILE};
