//! Experiment orchestration: configuration, episode rollouts, the
//! evaluation matrix, the efficiency ablation, training runs and frame
//! rendering.

pub mod catalogue;
pub mod config;
pub mod efficiency;
pub mod episode;
pub mod experiment;
pub mod matrix;
pub mod render;
