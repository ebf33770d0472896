//! Batch Bayesian skill-rating engine for massive ranked competitions.
//!
//! Each round, every participant's posterior is updated in two solver
//! phases: first a performance estimate is inferred from the standings, then
//! the estimate is absorbed into the player's belief. Between rounds, skill
//! drift widens the belief without moving the published rating. Three
//! variants share the pipeline: a pure-Gaussian one, a memoryless logistic
//! one, and the full logistic one whose heavy tails bound how far any single
//! round can move a rating.
//!
//! The `evaluation` module scores prediction accuracy and runs the
//! train/test hyperparameter search; `data` supplies ingestion, synthetic
//! data generation from the latent-skill model, and checkpointing.

pub mod data;
pub mod distributions;
pub mod drift;
pub mod engine;
pub mod evaluation;
pub mod numerics;
pub mod player_state;
pub mod system;

pub use data::{
    generate_synthetic, load_checkpoint, parse_contests, save_checkpoint, ContestRecord,
    Participation, SyntheticConfig, SyntheticDataset,
};
pub use drift::{diffuse, diffuse_gaussian, DriftParams};
pub use engine::{
    estimate_performance, robust_average_weights, subsample_opponents, update_belief,
    RoundView, SubsampleMode, Variant, ViewEntry,
};
pub use evaluation::{
    evaluate, grid_search, GridSearchOutcome, MetricReport, MetricSelector, ParamGrid,
};
pub use player_state::{PerformanceFactor, PlayerState, RatingSummary};
pub use system::{
    process_round, rating_summary, ContestStandings, PlayerMap, RoundReport, SystemError,
    SystemParams,
};
