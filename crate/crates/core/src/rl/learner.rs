//! Tabular learners keyed by packed observations.

use rustc_hash::FxHashMap as HashMap;

use rand::Rng;

use crate::sim::Action;

const N: usize = Action::COUNT;

/// One environment transition as seen by a learner.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub state: u64,
    pub action: Action,
    pub reward: f64,
    pub next_state: u64,
    /// goal or death; timeouts are not terminal and still bootstrap
    pub terminal: bool,
}

/// Index of the largest value, ties broken uniformly at random.
fn argmax_random<R: Rng + ?Sized>(values: &[f64; N], rng: &mut R) -> usize {
    let best = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let ties = values.iter().filter(|&&v| v == best).count();
    let mut pick = if ties > 1 { rng.random_range(0..ties) } else { 0 };
    for (i, &v) in values.iter().enumerate() {
        if v == best {
            if pick == 0 {
                return i;
            }
            pick -= 1;
        }
    }
    unreachable!("a maximum always exists")
}

/// One-step tabular Q-learning with ε-greedy action selection.
#[derive(Debug, Clone, Default)]
pub struct QTable {
    values: HashMap<u64, [f64; N]>,
    pub alpha: f64,
    pub gamma: f64,
    /// value of every entry before its first update
    pub initial: f64,
}

impl QTable {
    pub fn new(alpha: f64, gamma: f64) -> Self {
        Self::with_initial(alpha, gamma, 0.0)
    }

    pub fn with_initial(alpha: f64, gamma: f64, initial: f64) -> Self {
        Self { values: HashMap::default(), alpha, gamma, initial }
    }

    pub fn q(&self, state: u64) -> [f64; N] {
        self.values.get(&state).copied().unwrap_or([self.initial; N])
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn select<R: Rng + ?Sized>(&self, state: u64, epsilon: f64, rng: &mut R) -> Action {
        let i = if rng.random_bool(epsilon.clamp(0.0, 1.0)) {
            rng.random_range(0..N)
        } else {
            argmax_random(&self.q(state), rng)
        };
        Action::ALL[i]
    }

    /// Bellman target for a transition under the current table.
    pub fn target(&self, t: &Transition) -> f64 {
        if t.terminal {
            t.reward
        } else {
            let next = self.q(t.next_state);
            t.reward + self.gamma * next.iter().copied().fold(f64::NEG_INFINITY, f64::max)
        }
    }

    pub fn update(&mut self, t: &Transition) {
        let target = self.target(t);
        let initial = self.initial;
        let entry = self.values.entry(t.state).or_insert([initial; N]);
        let q = &mut entry[t.action.index()];
        *q += self.alpha * (target - *q);
    }
}

fn softmax(prefs: &[f64; N]) -> [f64; N] {
    let max = prefs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out = prefs.map(|p| (p - max).exp());
    let sum: f64 = out.iter().sum();
    for p in &mut out {
        *p /= sum;
    }
    out
}

/// Tabular softmax actor with a state-value critic, updated from n-step
/// returns over segments of at most `horizon` steps, with an entropy bonus.
#[derive(Debug, Clone)]
pub struct ActorCritic {
    prefs: HashMap<u64, [f64; N]>,
    values: HashMap<u64, f64>,
    pub actor_rate: f64,
    pub critic_rate: f64,
    pub gamma: f64,
    pub horizon: usize,
    pub entropy_beta: f64,
}

impl ActorCritic {
    pub fn new(actor_rate: f64, critic_rate: f64, gamma: f64, horizon: usize, entropy_beta: f64) -> Self {
        Self { prefs: HashMap::default(), values: HashMap::default(), actor_rate, critic_rate, gamma, horizon: horizon.max(1), entropy_beta }
    }

    pub fn policy(&self, state: u64) -> [f64; N] {
        softmax(&self.prefs.get(&state).copied().unwrap_or([0.0; N]))
    }

    pub fn value(&self, state: u64) -> f64 {
        self.values.get(&state).copied().unwrap_or(0.0)
    }

    pub fn select<R: Rng + ?Sized>(&self, state: u64, rng: &mut R) -> Action {
        let pi = self.policy(state);
        let mut u: f64 = rng.random();
        for (i, p) in pi.iter().enumerate() {
            if u < *p {
                return Action::ALL[i];
            }
            u -= p;
        }
        Action::ALL[N - 1]
    }

    /// Applies one segment of consecutive transitions from a single agent.
    pub fn update_segment(&mut self, segment: &[Transition]) {
        let Some(last) = segment.last() else { return };
        let mut ret = if last.terminal { 0.0 } else { self.value(last.next_state) };
        for t in segment.iter().rev() {
            ret = t.reward + self.gamma * ret;
            let advantage = ret - self.value(t.state);
            *self.values.entry(t.state).or_insert(0.0) += self.critic_rate * advantage;

            let pi = self.policy(t.state);
            let entropy: f64 = -pi.iter().filter(|p| **p > 0.0).map(|p| p * p.ln()).sum::<f64>();
            let prefs = self.prefs.entry(t.state).or_insert([0.0; N]);
            for (b, p) in pi.iter().enumerate() {
                let chosen = if b == t.action.index() { 1.0 } else { 0.0 };
                let policy_grad = advantage * (chosen - p);
                let entropy_grad = if *p > 0.0 { -p * (p.ln() + entropy) } else { 0.0 };
                prefs[b] += self.actor_rate * (policy_grad + self.entropy_beta * entropy_grad);
            }
        }
    }
}
