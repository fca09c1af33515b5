use osc_core::grid::{CellState, Grid, GridSpec, Vec2};
use osc_core::harness::catalogue::seen_object;
use osc_core::learn::{checkpoint, SacAgent, SacConfig, Transition};
use osc_core::perception::{partition_regions, NoiseModel, PerceptionState, SpocMap};
use osc_core::reward::{goal_distance, goaldist_reward, GOALDIST_POOL};
use osc_core::world::{Action, EnvConfig, TaskKind, ToolConfig, WorldState};
use proptest::prelude::*;

fn env(task: TaskKind) -> EnvConfig {
    let grid = GridSpec::default();
    EnvConfig {
        grid,
        task,
        object: seen_object(task, &grid).spec,
        tool: ToolConfig::default(),
    }
}

fn task() -> impl Strategy<Value = TaskKind> {
    prop::sample::select(TaskKind::ALL.to_vec())
}

fn actions(n: usize) -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((-40.0..40.0f64, -40.0..40.0f64), 1..n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn transformed_only_grows_and_background_is_fixed(task in task(), seed in 0u64..1000, acts in actions(60)) {
        let mut w = WorldState::reset(&env(task), seed).unwrap();
        let object = w.grid.object_cells();
        for (dx, dy) in acts {
            let before = w.grid.clone();
            w.apply_primitive(Action::new(dx, dy));
            for i in 0..before.cells().len() {
                if before.get(i) == CellState::Transformed {
                    prop_assert_eq!(w.grid.get(i), CellState::Transformed);
                }
            }
            prop_assert_eq!(w.grid.object_cells(), object.clone());
        }
    }

    #[test]
    fn changes_stay_inside_the_footprint(task in task(), seed in 0u64..1000, acts in actions(30)) {
        let mut w = WorldState::reset(&env(task), seed).unwrap();
        for (dx, dy) in acts {
            let before = w.grid.clone();
            let out = w.apply_primitive(Action::new(dx, dy));
            let mut changed = 0;
            for i in 0..before.cells().len() {
                if before.get(i) != w.grid.get(i) {
                    prop_assert!(out.footprint.contains(&i), "cell {} changed outside the footprint", i);
                    prop_assert_eq!(before.get(i), CellState::Actionable);
                    changed += 1;
                }
            }
            prop_assert_eq!(changed, out.cells_transformed);
        }
    }

    #[test]
    fn actions_are_clamped_and_ee_stays_in_bounds(task in task(), acts in actions(30)) {
        let mut w = WorldState::reset(&env(task), 0).unwrap();
        let a_max = w.a_max();
        let spec = *w.spec();
        for (dx, dy) in acts {
            let prev = w.ee_pos;
            let out = w.apply_primitive(Action::new(dx, dy));
            prop_assert!((out.new_ee.x - prev.x).abs() <= a_max + 1e-9);
            prop_assert!((out.new_ee.y - prev.y).abs() <= a_max + 1e-9);
            prop_assert!(spec.contains(out.new_ee));
        }
    }

    #[test]
    fn same_seed_same_trajectory(task in task(), seed in 0u64..1000, acts in actions(20)) {
        let noise = NoiseModel::default();
        let run = || {
            let mut w = WorldState::reset(&env(task), seed).unwrap();
            let mut p = PerceptionState::new(&noise, seed);
            let mut maps = Vec::new();
            for &(dx, dy) in &acts {
                w.apply_primitive(Action::new(dx, dy));
                maps.push(p.observe(&w, &noise).grid.to_bytes());
            }
            (w.grid, w.ee_pos, maps)
        };
        prop_assert_eq!(run(), run());
    }

    #[test]
    fn farthest_point_seeds_match_brute_force(
        cells in prop::collection::btree_set(0usize..400, 1..60),
        k in 1usize..10,
    ) {
        let spec = GridSpec::new(20, 20, 1.0).unwrap();
        let cells: Vec<usize> = cells.into_iter().collect();
        let k = k.min(cells.len());
        let p = partition_regions(&spec, &cells, k).unwrap();
        let d2 = |a: usize, b: usize| spec.cell_center(a).dist2(spec.cell_center(b));
        for j in 1..k {
            let near = |c: usize| p.seeds[..j].iter().map(|&s| d2(c, s)).fold(f64::INFINITY, f64::min);
            let best = cells.iter().map(|&c| near(c)).fold(0.0, f64::max);
            prop_assert_eq!(near(p.seeds[j]), best);
        }
        for &c in &cells {
            let r = p.region_id(c).unwrap();
            let nearest = p.seeds.iter().map(|&s| d2(c, s)).fold(f64::INFINITY, f64::min);
            prop_assert_eq!(d2(c, p.seeds[r]), nearest);
        }
    }

    #[test]
    fn goaldist_rewards_telescope(task in task(), seed in 0u64..1000, acts in actions(25)) {
        let mut w = WorldState::reset(&env(task), seed).unwrap();
        let noise = NoiseModel::boundary_flips(0.05);
        let mut p = PerceptionState::new(&noise, seed);
        let first = p.observe(&w, &noise);
        let (mut prev, mut prev_ee) = (first.clone(), w.ee_pos);
        let mut sum = 0.0;
        for (dx, dy) in acts {
            w.apply_primitive(Action::new(dx, dy));
            let cur = p.observe(&w, &noise);
            sum += goaldist_reward(&prev, prev_ee, &cur, w.ee_pos);
            prev = cur;
            prev_ee = w.ee_pos;
        }
        let d0 = goal_distance(&first.grid, home(&first), GOALDIST_POOL);
        let dt = goal_distance(&prev.grid, prev_ee, GOALDIST_POOL);
        prop_assert!((sum - (d0 - dt)).abs() < 1e-9, "sum {} vs {}", sum, d0 - dt);
    }

    #[test]
    fn grid_bytes_round_trip(w in 8usize..40, h in 8usize..40, fill in prop::collection::vec(0u8..3, 1600)) {
        let spec = GridSpec::new(w, h, 1.5).unwrap();
        let cells = (0..w * h).map(|i| CellState::from_byte(fill[i]).unwrap()).collect();
        let g = Grid::from_cells(spec, cells).unwrap();
        let bytes = g.to_bytes();
        prop_assert_eq!(&bytes[..4], b"OSCG");
        prop_assert_eq!(Grid::from_bytes(&bytes, 1.5).unwrap(), g);
        prop_assert!(Grid::from_bytes(&bytes[..bytes.len() - 1], 1.5).is_err());
    }

    #[test]
    fn transitions_round_trip(
        obs in prop::collection::vec(-10.0f32..10.0, 0..40),
        a in (-1.0f32..1.0, -1.0f32..1.0),
        reward in -5.0f64..5.0,
        done: bool,
    ) {
        let t = Transition {
            next_obs: obs.iter().map(|v| v * 0.5).collect(),
            obs,
            action: [a.0, a.1],
            pre_squash: [a.0 * 2.0, a.1 * 3.0],
            reward,
            done,
        };
        prop_assert_eq!(Transition::from_bytes(&t.to_bytes()).unwrap(), t);
    }
}

/// The first frame is observed with the end-effector at its reset position.
fn home(map: &SpocMap) -> Vec2 {
    osc_core::world::home_position(map.spec())
}

#[test]
fn checkpoint_round_trip_preserves_actions() {
    let cfg = SacConfig {
        hidden: vec![16, 16],
        pool: 4,
        ..SacConfig::default()
    };
    let dim = osc_core::learn::feature_dim(cfg.pool);
    let agent = SacAgent::new(cfg.clone(), dim, 9).unwrap();
    let bytes = checkpoint::to_bytes(&agent);
    let back = checkpoint::from_bytes(&bytes, &cfg, dim).unwrap();
    assert_eq!(checkpoint::to_bytes(&back), bytes);
    let feats: Vec<f32> = (0..dim).map(|i| (i % 7) as f32 / 7.0).collect();
    let mut r1 = osc_core::rng::rng_from(1, 0);
    let mut r2 = osc_core::rng::rng_from(1, 0);
    let a = agent.act(&feats, &mut r1, true).unwrap();
    let b = back.act(&feats, &mut r2, true).unwrap();
    assert_eq!((a.mean, a.log_std), (b.mean, b.log_std));
    // a layout mismatch is rejected
    let other = SacConfig {
        hidden: vec![8, 8],
        ..cfg
    };
    assert!(checkpoint::from_bytes(&bytes, &other, dim).is_err());
}
