//! Planar simulator for spatially progressing object state changes
//! (spreading, mashing, slicing), with affordance-map perception, dense
//! progress rewards, greedy and random controllers, a soft actor-critic
//! learner, and experiment orchestration.
//!
//! The crate is organised bottom-up:
//!
//! - [`grid`]: cell grids, labels, coordinates and the binary grid format.
//! - [`world`]: ground-truth object geometry and tool primitives.
//! - [`perception`]: actionable/transformed maps built from ground truth
//!   through region partitioning, region classification and tracking.
//! - [`reward`]: the progress reward, success reward, coverage metric and
//!   the goal-distance proxy reward.
//! - [`policy`]: greedy, object-mask greedy and random controllers.
//! - [`learn`]: observation encoding, MLPs, Adam, replay and SAC.
//! - [`harness`]: configuration, episode runners, evaluation matrix,
//!   efficiency ablation, CSV logs and PPM rendering.

pub mod env;
pub mod error;
pub mod grid;
pub mod harness;
pub mod learn;
pub mod perception;
pub mod policy;
pub mod reward;
pub mod rng;
pub mod world;

pub use error::{Error, Result};
pub use grid::{CellState, Grid, GridSpec, Vec2};
pub use perception::{NoiseModel, PerceptionState, SpocMap};
pub use policy::{Controller, GreedyConfig, Observation};
pub use reward::{CoverageReport, RewardBreakdown, RewardWeights};
pub use world::{Action, ObjectSpec, Shape, TaskKind, ToolConfig, WorldState};
