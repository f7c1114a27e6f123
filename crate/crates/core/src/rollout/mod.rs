//! Episodes, rewards, rollout collection and reward-filtered datasets.

pub mod collect;
pub mod dataset;
pub mod episode;
pub mod phase;
pub mod policy;
pub mod trajectory;

pub use collect::{collect, episode_seed, load_entries, CollectConfig, CollectReport, EpisodeFailure, RolloutStore, DEFAULT_ROLLOUTS};
pub use dataset::{accepted, build_dataset, render_dataset, training_record, write_dataset, DatasetOptions, DATASET_SCHEMA};
pub use episode::{rescore, run_episode, score, EpisodeError, DEFAULT_MAX_STEPS};
pub use phase::{run_phase_loop, PhaseConfig, PhaseOutcome, PhaseReport};
pub use policy::*;
pub use trajectory::*;
