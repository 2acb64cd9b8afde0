//! Dataset ingestion, episode runs, scoring and fixture generation.

pub mod audit;
pub mod config;
pub mod episode;
pub mod eval;
pub mod fixtures;
pub mod load;

pub use audit::{exposures, Exposure};
pub use config::{EngineConfig, Settings};
pub use episode::{run_episode, run_episode_with, AgentTrace, EpisodeTrace, PrivateTrace, TraceLine};
pub use eval::{evaluate, EvalReport};
pub use fixtures::{generate_fixture, TEMPLATES};
pub use load::{load_dataset, parse_dataset};
