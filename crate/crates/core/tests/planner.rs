mod common;

use common::{bfs, bfs_from_start, r, small_level, Oracle};
use mechanic_forge::astar::{plan, step_bound, StateKey};
use mechanic_forge::rule::{neighbors, Rule};
use mechanic_forge::sim::{reset, rollout, step, Action, LevelSpec, StepEvent};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const BUDGET: u64 = 2_000_000;

fn golden_steps(rule: &str) -> u64 {
    let level = LevelSpec::default_level();
    let rule = r(rule);
    let p = plan(&level, Some(&rule), BUDGET).unwrap();
    assert!(p.reached, "{rule} should be solvable");
    let outcomes = rollout(&level, Some(&rule), &p.path).unwrap();
    assert_eq!(outcomes.last().unwrap().event, StepEvent::ReachedGoal);
    assert_eq!(outcomes.len() as u64, p.steps_to_goal);
    p.steps_to_goal
}

#[test]
fn jump_force_rule_golden_path() {
    assert_eq!(golden_steps("jumpforce < 11 add 10"), 40);
}

#[test]
fn vertical_teleport_rule_golden_path() {
    assert_eq!(golden_steps("position.y > 12 add 7"), 36);
}

#[test]
fn speed_rule_golden_path() {
    assert_eq!(golden_steps("speed < 10 add 8"), 14);
}

#[test]
fn vertical_teleport_path_relocates_over_the_obstacle() {
    let level = LevelSpec::default_level();
    let rule = r("position.y > 12 add 7");
    let p = plan(&level, Some(&rule), BUDGET).unwrap();
    let outcomes = rollout(&level, Some(&rule), &p.path).unwrap();
    let first_trigger = outcomes.iter().position(|o| o.rule_triggered()).unwrap();
    let jumps_before_first_trigger = p.path[..first_trigger].iter().filter(|a| **a == Action::Jump).count();
    let lifts: Vec<f64> = outcomes
        .iter()
        .filter(|o| o.rule_triggered())
        .map(|o| o.rule.unwrap().new_value - o.rule.unwrap().old_value)
        .collect();
    assert!(lifts.iter().all(|d| (*d - 7.0).abs() < 1e-9));
    assert!(jumps_before_first_trigger >= 1, "the condition needs height first");
}

fn oracle_variants() -> Vec<Rule> {
    let bases = [r("jumpforce < 10 add 1"), r("position.y < 3 add 4"), r("speed < 10 add 8"), r("position.x < 5 add 4")];
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    (0..20).map(|i| neighbors(&bases[i % bases.len()], &mut rng, 1)[0]).collect()
}

#[test]
fn planner_matches_breadth_first_oracle() {
    let level = small_level();
    let mut solved = 0;
    for rule in oracle_variants() {
        let p = plan(&level, Some(&rule), BUDGET).unwrap();
        match bfs_from_start(&level, Some(&rule), 500, 3_000_000) {
            Oracle::Reached(n) => {
                assert!(p.reached, "{rule}: oracle reaches the goal in {n}");
                assert_eq!(p.steps_to_goal, n as u64, "{rule}");
                solved += 1;
            }
            Oracle::Unreachable => assert!(!p.reached, "{rule}: oracle says unreachable"),
            Oracle::NotWithin(d) => panic!("{rule}: oracle depth {d} too small"),
        }
    }
    assert!(solved >= 12, "only {solved} variants solvable");
}

#[test]
fn small_level_needs_a_rule() {
    let level = small_level();
    assert_eq!(bfs_from_start(&level, None, 500, 3_000_000), Oracle::Unreachable);
    assert!(!plan(&level, None, BUDGET).unwrap().reached);
}

#[test]
fn heuristic_never_overestimates() {
    let level = small_level();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut checked = 0;
    for rule in oracle_variants() {
        let bound = step_bound(&level, Some(&rule));
        let h = |s: &mechanic_forge::sim::WorldState| s.goal_distance(&level) / bound;

        // exact remaining steps along an optimal path
        if let Ok(p) = plan(&level, Some(&rule), BUDGET) {
            let mut s = reset(&level);
            for (k, a) in p.path.iter().enumerate() {
                assert!(h(&s) <= (p.path.len() - k) as f64 + 1e-9, "{rule} at step {k}");
                s = step(&level, &s, *a, Some(&rule)).unwrap().next_state;
                checked += 1;
            }
        }

        // random reachable states: no goal may exist closer than h
        for _ in 0..60 {
            let mut s = reset(&level);
            let len = rng.random_range(0..25);
            for _ in 0..len {
                let next = step(&level, &s, Action::ALL[rng.random_range(0..Action::COUNT)], Some(&rule)).unwrap().next_state;
                if next.is_terminal() {
                    break;
                }
                s = next;
            }
            let hs = h(&s);
            let depth = (hs.ceil() as usize).saturating_sub(1);
            if depth > 0 {
                assert!(!matches!(bfs(&level, s, Some(&rule), depth, 3_000_000), Oracle::Reached(_)), "{rule}: h={hs} overestimates");
            }
            checked += 1;
        }
    }
    assert!(checked > 1000);
}

#[test]
fn plan_from_state_keys_are_unique_along_path() {
    let level = LevelSpec::default_level();
    let rule = r("speed < 10 add 8");
    let p = plan(&level, Some(&rule), BUDGET).unwrap();
    let outcomes = rollout(&level, Some(&rule), &p.path).unwrap();
    let mut keys: Vec<StateKey> = outcomes.iter().map(|o| StateKey::of(&o.next_state)).collect();
    keys.push(StateKey::of(&reset(&level)));
    let n = keys.len();
    keys.sort_by_key(|k| format!("{k:?}"));
    keys.dedup();
    assert_eq!(keys.len(), n, "an optimal path never revisits a state");
}
