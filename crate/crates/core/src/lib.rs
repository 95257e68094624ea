//! Multi-agent collision avoidance with a slack-relaxed velocity-obstacle
//! cone barrier for guidance and a hard braking-distance barrier for safety,
//! plus sampling baselines and a circle-swap benchmark.

pub mod baselines;
pub mod config;
pub mod controller;
pub mod dynamics;
pub mod error;
pub mod qp;
pub mod report;
pub mod safety;
pub mod sim;
pub mod vec2;
pub mod vo;

pub use config::{ControllerKind, Dynamics, ScenarioConfig};
pub use error::{ConfigError, GeometryError};
pub use sim::{aggregate, run_episode, AggregateStats, EpisodeResult};
pub use vec2::Vec2;
