//! Multi-agent deep Q-learning: state abstraction, discrete joint actions,
//! replay memory, epsilon-greedy selection and the learner update.
//!
//! In shared mode every UAV feeds one replay buffer and one evaluation /
//! target network pair. The abstraction puts the acting UAV's own block
//! first so one network can serve any agent.

use crate::error::Result;
use crate::mobility::{Area, MoveAction};
use crate::neural::{Adam, AdamConfig, Mlp, Scratch};
use crate::noma::LinkMatrix;
use crate::rng::SimRng;
use rand::Rng;
use serde::{Deserialize, Serialize};

/// dB window mapped onto [0, 1] for gain inputs.
pub const GAIN_DB_FLOOR: f64 = -130.0;
pub const GAIN_DB_SPAN: f64 = 60.0;

pub const EPSILON_START: f64 = 0.9;

#[derive(Debug, Clone, PartialEq)]
pub enum PowerChoice {
    /// Fraction of the UAV budget per user slot; slot `i` is the `i`-th
    /// strongest member of the cluster as observed when acting.
    Gears(Vec<f64>),
    /// Budget split evenly over the current cluster.
    EqualSplit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct JointAction {
    pub movement: MoveAction,
    pub power: PowerChoice,
}

/// Enumerates movement x power choices. Index layout is
/// `move_index * power_choices + power_index`.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionCatalog {
    moves: Vec<MoveAction>,
    powers: Vec<PowerChoice>,
    mask: Vec<bool>,
}

impl ActionCatalog {
    /// One gear per user slot, every combination enumerated with the first
    /// slot varying slowest. Combinations above the budget are masked.
    pub fn with_gears(gear_levels: &[f64], slots: usize) -> Self {
        let mut powers = vec![Vec::new()];
        for _ in 0..slots {
            powers = powers
                .into_iter()
                .flat_map(|prefix: Vec<f64>| {
                    gear_levels.iter().map(move |&g| {
                        let mut next = prefix.clone();
                        next.push(g);
                        next
                    })
                })
                .collect();
        }
        Self::build(
            MoveAction::ALL.to_vec(),
            powers.into_iter().map(PowerChoice::Gears).collect(),
        )
    }

    pub fn equal_split() -> Self {
        Self::build(MoveAction::ALL.to_vec(), vec![PowerChoice::EqualSplit])
    }

    fn build(moves: Vec<MoveAction>, powers: Vec<PowerChoice>) -> Self {
        let mask = moves
            .iter()
            .flat_map(|_| powers.iter().map(power_within_budget))
            .collect();
        Self {
            moves,
            powers,
            mask,
        }
    }

    /// Same catalog without vertical moves.
    pub fn restrict_2d(&self) -> Self {
        Self::build(
            self.moves.iter().copied().filter(|m| !m.is_vertical()).collect(),
            self.powers.clone(),
        )
    }

    pub fn len(&self) -> usize {
        self.moves.len() * self.powers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn power_choices(&self) -> usize {
        self.powers.len()
    }

    pub fn moves(&self) -> &[MoveAction] {
        &self.moves
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn decode(&self, index: usize) -> JointAction {
        JointAction {
            movement: self.moves[index / self.powers.len()],
            power: self.powers[index % self.powers.len()].clone(),
        }
    }

    pub fn index_of(&self, movement: MoveAction, power_index: usize) -> Option<usize> {
        let m = self.moves.iter().position(|&x| x == movement)?;
        Some(m * self.powers.len() + power_index)
    }
}

fn power_within_budget(p: &PowerChoice) -> bool {
    match p {
        PowerChoice::Gears(g) => g.iter().sum::<f64>() <= 1.0 + 1e-12,
        PowerChoice::EqualSplit => true,
    }
}

/// Everything the abstraction needs from a world snapshot.
#[derive(Debug, Clone, Copy)]
pub struct StateView<'a> {
    pub area: &'a Area,
    /// `(x, y, h)` per UAV.
    pub uav_positions: &'a [[f64; 3]],
    pub gains: &'a LinkMatrix,
    /// Serving UAV of each user.
    pub serving: &'a [usize],
    /// User slots reserved per cluster.
    pub slots: usize,
}

pub fn state_len(uavs: usize, slots: usize) -> usize {
    3 * uavs + slots * uavs
}

pub fn scale_gain(gain: f64) -> f64 {
    if gain <= 0.0 {
        return 0.0;
    }
    ((10.0 * gain.log10() - GAIN_DB_FLOOR) / GAIN_DB_SPAN).clamp(0.0, 1.0)
}

fn scale_position(area: &Area, p: &[f64; 3]) -> [f64; 3] {
    let norm = |v: f64, lo: f64, hi: f64| {
        if hi > lo {
            ((v - lo) / (hi - lo)).clamp(0.0, 1.0)
        } else {
            0.0
        }
    };
    [
        norm(p[0], area.x_min, area.x_max),
        norm(p[1], area.y_min, area.y_max),
        norm(p[2], area.h_min, area.h_max),
    ]
}

/// Members of `uav`'s cluster, strongest observed gain first (ties to the
/// lower user id).
pub fn members_by_gain(gains: &LinkMatrix, serving: &[usize], uav: usize) -> Vec<usize> {
    let mut members: Vec<usize> = (0..serving.len()).filter(|&k| serving[k] == uav).collect();
    members.sort_by(|&a, &b| gains.get(uav, b).total_cmp(&gains.get(uav, a)).then(a.cmp(&b)));
    members
}

/// Layout: `[own xyz | other UAVs xyz by id | own gains | other clusters'
/// gains by (UAV id, descending gain)]`, each user block zero-filled to
/// `slots` entries.
pub fn abstract_state(view: &StateView<'_>, agent: usize) -> Vec<f64> {
    let uavs = view.uav_positions.len();
    let mut s = Vec::with_capacity(state_len(uavs, view.slots));
    let order: Vec<usize> = std::iter::once(agent)
        .chain((0..uavs).filter(|&u| u != agent))
        .collect();
    for &u in &order {
        s.extend(scale_position(view.area, &view.uav_positions[u]));
    }
    for &u in &order {
        let members = members_by_gain(view.gains, view.serving, u);
        for slot in 0..view.slots {
            s.push(members.get(slot).map_or(0.0, |&k| scale_gain(view.gains.get(u, k))));
        }
    }
    s
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: usize,
    pub reward: f64,
    pub next_state: Vec<f64>,
}

/// Fixed-capacity ring buffer with uniform sampling.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    items: Vec<Transition>,
    capacity: usize,
    head: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0);
        Self {
            items: Vec::with_capacity(capacity.min(1 << 16)),
            capacity,
            head: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn push(&mut self, t: Transition) {
        if self.items.len() < self.capacity {
            self.items.push(t);
        } else {
            self.items[self.head] = t;
        }
        self.head = (self.head + 1) % self.capacity;
    }

    pub fn get(&self, index: usize) -> &Transition {
        &self.items[index]
    }

    /// Indices drawn uniformly with replacement.
    pub fn sample_indices<R: Rng + ?Sized>(&self, batch: usize, rng: &mut R) -> Vec<usize> {
        (0..batch).map(|_| rng.random_range(0..self.items.len())).collect()
    }
}

/// Linear decay from 0.9 at the first episode to 0 at the last.
pub fn epsilon_for_episode(episode: usize, total: usize) -> f64 {
    if total <= 1 {
        return EPSILON_START;
    }
    (EPSILON_START * (1.0 - episode as f64 / (total - 1) as f64)).clamp(0.0, EPSILON_START)
}

/// Highest-valued unmasked action, ties to the lowest index.
pub fn greedy_action(q: &[f64], mask: &[bool]) -> usize {
    let mut best: Option<usize> = None;
    for (i, &v) in q.iter().enumerate() {
        if mask[i] && best.is_none_or(|b| v > q[b]) {
            best = Some(i);
        }
    }
    best.expect("at least one unmasked action")
}

pub fn select_action<R: Rng + ?Sized>(q: &[f64], epsilon: f64, mask: &[bool], rng: &mut R) -> usize {
    if rng.random::<f64>() < epsilon {
        let allowed: Vec<usize> = (0..mask.len()).filter(|&i| mask[i]).collect();
        allowed[rng.random_range(0..allowed.len())]
    } else {
        greedy_action(q, mask)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LearnerConfig {
    pub hidden: usize,
    pub learning_rate: f64,
    pub discount: f64,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    pub target_sync: u64,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        Self {
            hidden: 40,
            learning_rate: 1e-3,
            discount: 0.9,
            batch_size: 32,
            buffer_capacity: 20_000,
            target_sync: 200,
        }
    }
}

/// Evaluation network, target network, optimizer and replay memory.
#[derive(Debug, Clone)]
pub struct QLearner {
    pub eval: Mlp,
    pub target: Mlp,
    pub buffer: ReplayBuffer,
    adam: Adam,
    config: LearnerConfig,
    updates: u64,
    grad: Vec<f64>,
    scratch: Scratch,
    target_scratch: Scratch,
}

impl QLearner {
    pub fn new(inputs: usize, outputs: usize, config: LearnerConfig, rng: &mut SimRng) -> Self {
        let eval = Mlp::new(inputs, config.hidden, outputs, rng);
        Self::from_network(eval, config)
    }

    pub fn from_network(eval: Mlp, config: LearnerConfig) -> Self {
        let n = eval.params().len();
        Self {
            target: eval.clone(),
            eval,
            buffer: ReplayBuffer::new(config.buffer_capacity),
            adam: Adam::new(
                AdamConfig {
                    lr: config.learning_rate,
                    ..AdamConfig::default()
                },
                n,
            ),
            config,
            updates: 0,
            grad: vec![0.0; n],
            scratch: Scratch::default(),
            target_scratch: Scratch::default(),
        }
    }

    pub fn config(&self) -> &LearnerConfig {
        &self.config
    }

    pub fn updates(&self) -> u64 {
        self.updates
    }

    pub fn q_values(&mut self, state: &[f64]) -> &[f64] {
        self.eval.forward_into(state, &mut self.scratch)
    }

    /// One Adam step on a uniformly sampled batch. Returns the mean squared
    /// TD error, or `None` while the buffer holds fewer than one batch.
    pub fn train_step(&mut self, mask: &[bool], rng: &mut SimRng) -> Option<f64> {
        let batch = self.config.batch_size;
        if self.buffer.len() < batch {
            return None;
        }
        let indices = self.buffer.sample_indices(batch, rng);
        self.grad.iter_mut().for_each(|g| *g = 0.0);
        let scale = 1.0 / batch as f64;
        let mut loss = 0.0;
        for i in indices {
            let t = self.buffer.get(i);
            let next_q = self.target.forward_into(&t.next_state, &mut self.target_scratch);
            let best = next_q[greedy_action(next_q, mask)];
            let y = t.reward + self.config.discount * best;
            loss += self
                .eval
                .accumulate_gradient(&t.state, t.action, y, scale, &mut self.grad, &mut self.scratch);
        }
        self.adam.step(self.eval.params_mut(), &self.grad);
        self.updates += 1;
        if self.updates.is_multiple_of(self.config.target_sync) {
            self.target.copy_from(&self.eval);
        }
        Some(loss * scale)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sharing {
    /// One network pair and one buffer for all agents.
    Mdqn,
    /// A private network pair and buffer per agent.
    Independent,
}

/// The learners behind a group of agents.
#[derive(Debug, Clone)]
pub struct AgentPool {
    pub sharing: Sharing,
    pub learners: Vec<QLearner>,
}

impl AgentPool {
    pub fn new(
        sharing: Sharing,
        agents: usize,
        inputs: usize,
        outputs: usize,
        config: LearnerConfig,
        rng: &mut SimRng,
    ) -> Self {
        let count = match sharing {
            Sharing::Mdqn => 1,
            Sharing::Independent => agents,
        };
        let learners = (0..count)
            .map(|_| QLearner::new(inputs, outputs, config, rng))
            .collect();
        Self { sharing, learners }
    }

    pub fn learner_index(&self, agent: usize) -> usize {
        match self.sharing {
            Sharing::Mdqn => 0,
            Sharing::Independent => agent,
        }
    }

    pub fn learner_mut(&mut self, agent: usize) -> &mut QLearner {
        let i = self.learner_index(agent);
        &mut self.learners[i]
    }

    pub fn learner(&self, agent: usize) -> &QLearner {
        &self.learners[self.learner_index(agent)]
    }

    pub fn networks(&self) -> Vec<Mlp> {
        self.learners.iter().map(|l| l.eval.clone()).collect()
    }

    pub fn check_inputs(&self, state: &[f64]) -> Result<()> {
        let expected = self.learners[0].eval.sizes()[0];
        if state.len() != expected {
            return Err(crate::error::Error::Dimension {
                expected,
                got: state.len(),
            });
        }
        Ok(())
    }
}
