//! Shared fixtures for the benchmarks.

use osc_core::harness::catalogue::seen_object;
use osc_core::perception::{NoiseModel, PerceptionState};
use osc_core::policy::Observation;
use osc_core::world::{Action, EnvConfig, TaskKind, ToolConfig, WorldState};
use osc_core::GridSpec;

pub fn env(task: TaskKind) -> EnvConfig {
    let grid = GridSpec::default();
    EnvConfig {
        grid,
        task,
        object: seen_object(task, &grid).spec,
        tool: ToolConfig::default(),
    }
}

/// A world a few strokes into an episode, so maps carry both labels.
pub fn worked_world(task: TaskKind) -> WorldState {
    let mut w = WorldState::reset(&env(task), 1).expect("catalogue object spawns");
    for k in 0..6 {
        let s = if k % 2 == 0 { 1.0 } else { -1.0 };
        w.apply_primitive(Action::new(12.0 * s, 8.0));
    }
    w
}

pub fn observation(task: TaskKind) -> Observation {
    let w = worked_world(task);
    let noise = NoiseModel::none();
    let map = PerceptionState::new(&noise, 0).observe(&w, &noise);
    Observation::first(map, w.ee_pos)
}
