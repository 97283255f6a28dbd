//! Episode orchestration: training runs, greedy evaluation, fixed-policy
//! baselines.

use crate::agent::{
    epsilon_for_episode, greedy_action, select_action, state_len, ActionCatalog, AgentPool, Sharing,
    Transition,
};
use crate::baselines::{BaselineKind, CircularPolicy, Setup};
use crate::config::{EnvConfig, TrainerConfig};
use crate::env::{ConstraintAudit, SlotLog, World};
use crate::error::{Error, Result};
use crate::neural::{Mlp, Scratch};
use crate::parallel;
use crate::rng::{SeedTree, SimRng, Stream};
use rand::Rng;

/// Seed-tree branch for evaluation episodes, kept apart from the training
/// episodes `child(0..episodes)`.
pub const EVAL_BRANCH: u64 = 1 << 40;

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeMetrics {
    pub episode: usize,
    /// Sum of per-slot sum rates over slots `0..=T`.
    pub throughput_bits: f64,
    /// Fraction of user-slots below the QoS rate.
    pub violation_rate: f64,
    pub epsilon: f64,
    pub mean_reward: f64,
    pub mean_loss: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct EpisodeRecord {
    pub metrics: EpisodeMetrics,
    pub slots: Vec<SlotLog>,
    pub audit: ConstraintAudit,
}

impl EpisodeRecord {
    pub fn sum_rates(&self) -> Vec<f64> {
        self.slots.iter().map(|s| s.sum_rate).collect()
    }
}

fn finish(episode: usize, epsilon: f64, slots: Vec<SlotLog>, losses: &[f64], world: &World) -> EpisodeRecord {
    let throughput_bits = slots.iter().map(|s| s.sum_rate).sum();
    let user_slots = (slots.len() * world.users.len()).max(1);
    let violation_rate = slots.iter().map(|s| s.qos_violations).sum::<usize>() as f64 / user_slots as f64;
    let rewards: Vec<f64> = slots.iter().flat_map(|s| s.rewards.iter().copied()).collect();
    EpisodeRecord {
        metrics: EpisodeMetrics {
            episode,
            throughput_bits,
            violation_rate,
            epsilon,
            mean_reward: crate::metrics::mean(&rewards),
            mean_loss: (!losses.is_empty()).then(|| crate::metrics::mean(losses)),
        },
        slots,
        audit: *world.audit(),
    }
}

/// Learners plus the streams that persist across a training run.
#[derive(Debug, Clone)]
pub struct Trainer {
    pub env: EnvConfig,
    pub setup: Setup,
    pub catalog: ActionCatalog,
    pub pool: AgentPool,
    tree: SeedTree,
    policy_rng: SimRng,
    sampling_rng: SimRng,
    step: u64,
    /// `(global slot, mean loss over the updates in that slot)`.
    pub loss: Vec<(u64, f64)>,
}

impl Trainer {
    pub fn new(env: &EnvConfig, trainer: &TrainerConfig, setup: Setup, seed: u64) -> Result<Self> {
        env.validate()?;
        trainer.validate()?;
        let tree = SeedTree::new(seed);
        let catalog = setup.catalog.build(env);
        let inputs = state_len(env.uav_count, env.cap());
        let pool = AgentPool::new(
            trainer.sharing,
            env.uav_count,
            inputs,
            catalog.len(),
            trainer.learner(),
            &mut tree.rng(Stream::Init),
        );
        Ok(Self {
            env: env.clone(),
            setup,
            catalog,
            pool,
            tree,
            policy_rng: tree.rng(Stream::Policy),
            sampling_rng: tree.rng(Stream::Sampling),
            step: 0,
            loss: Vec::new(),
        })
    }

    /// Global slot counter across episodes.
    pub fn steps(&self) -> u64 {
        self.step
    }

    /// Plays one episode. Every agent acts on its own observation, then
    /// each stores its transition and, when `learn` is set, takes one
    /// training step on its learner.
    pub fn run_episode(&mut self, episode: usize, epsilon: f64, learn: bool) -> Result<EpisodeRecord> {
        let mut world = World::reset(&self.env, self.setup.mode, &self.tree.child(episode as u64))?;
        let mask = self.catalog.mask().to_vec();
        let agents = world.uavs.len();
        let mut slots = Vec::with_capacity(self.env.slots + 1);
        let mut episode_losses = Vec::new();
        let mut states = world.observe_all();
        while !world.is_done() {
            let mut chosen = Vec::with_capacity(agents);
            for (u, state) in states.iter().enumerate() {
                let q = self.pool.learner_mut(u).q_values(state);
                chosen.push(select_action(q, epsilon, &mask, &mut self.policy_rng));
            }
            let actions: Vec<_> = chosen.iter().map(|&a| self.catalog.decode(a)).collect();
            let out = world.step(&actions)?;
            let next = world.observe_all();
            let mut slot_losses = Vec::new();
            for u in 0..agents {
                let learner = self.pool.learner_mut(u);
                learner.buffer.push(Transition {
                    state: std::mem::take(&mut states[u]),
                    action: chosen[u],
                    reward: out.rewards[u],
                    next_state: next[u].clone(),
                });
                if learn {
                    if let Some(l) = learner.train_step(&mask, &mut self.sampling_rng) {
                        slot_losses.push(l);
                    }
                }
            }
            if !slot_losses.is_empty() {
                let l = crate::metrics::mean(&slot_losses);
                self.loss.push((self.step, l));
                episode_losses.push(l);
            }
            let mut log = out.log;
            log.actions = chosen;
            slots.push(log);
            states = next;
            self.step += 1;
        }
        Ok(finish(episode, epsilon, slots, &episode_losses, &world))
    }

    pub fn networks(&self) -> Vec<Mlp> {
        self.pool.networks()
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub episodes: Vec<EpisodeMetrics>,
    pub loss: Vec<(u64, f64)>,
    pub networks: Vec<Mlp>,
    pub sharing: Sharing,
    pub audit: ConstraintAudit,
}

/// Full training run with the linearly decaying exploration schedule.
pub fn train(env: &EnvConfig, trainer: &TrainerConfig, setup: Setup, seed: u64) -> Result<TrainOutcome> {
    let mut t = Trainer::new(env, trainer, setup, seed)?;
    let mut episodes = Vec::with_capacity(trainer.episodes);
    let mut audit = ConstraintAudit::default();
    for e in 0..trainer.episodes {
        let record = t.run_episode(e, epsilon_for_episode(e, trainer.episodes), true)?;
        audit.merge(&record.audit);
        episodes.push(record.metrics);
    }
    Ok(TrainOutcome {
        episodes,
        networks: t.networks(),
        loss: std::mem::take(&mut t.loss),
        sharing: trainer.sharing,
        audit,
    })
}

/// Who picks the actions in an evaluation episode.
#[derive(Debug, Clone)]
pub enum Controller {
    /// Greedy actions from trained networks: one shared network, or one
    /// per agent in UAV id order.
    Greedy(Vec<Mlp>),
    Circular,
    Random,
}

impl Controller {
    pub fn for_baseline(kind: BaselineKind, networks: Vec<Mlp>) -> Controller {
        match kind {
            BaselineKind::Circular => Controller::Circular,
            BaselineKind::Random => Controller::Random,
            _ => Controller::Greedy(networks),
        }
    }

    fn check(&self, env: &EnvConfig, catalog: &ActionCatalog) -> Result<()> {
        let Controller::Greedy(nets) = self else {
            return Ok(());
        };
        if nets.len() != 1 && nets.len() != env.uav_count {
            return Err(Error::Checkpoint(format!(
                "{} networks for {} UAVs; expected 1 or {}",
                nets.len(),
                env.uav_count,
                env.uav_count
            )));
        }
        let [inputs, _, outputs] = nets[0].sizes();
        let want_in = state_len(env.uav_count, env.cap());
        if inputs != want_in {
            return Err(Error::Dimension { expected: want_in, got: inputs });
        }
        if outputs != catalog.len() {
            return Err(Error::Dimension { expected: catalog.len(), got: outputs });
        }
        for n in nets {
            if n.sizes() != nets[0].sizes() {
                return Err(Error::Checkpoint("networks differ in shape".into()));
            }
        }
        Ok(())
    }
}

/// One episode with a fixed controller and no learning.
pub fn play_episode(
    env: &EnvConfig,
    setup: Setup,
    controller: &Controller,
    seeds: &SeedTree,
    episode: usize,
) -> Result<EpisodeRecord> {
    let catalog = setup.catalog.build(env);
    controller.check(env, &catalog)?;
    let mut world = World::reset(env, setup.mode, seeds)?;
    let mut rng = seeds.rng(Stream::Policy);
    let mut circular = CircularPolicy::for_config(env);
    let mut scratch = Scratch::default();
    let mask = catalog.mask();
    let mut slots = Vec::with_capacity(env.slots + 1);
    while !world.is_done() {
        let (actions, chosen) = match controller {
            Controller::Greedy(nets) => {
                let chosen: Vec<usize> = (0..world.uavs.len())
                    .map(|u| {
                        let net = &nets[if nets.len() == 1 { 0 } else { u }];
                        greedy_action(net.forward_into(&world.observe(u), &mut scratch), mask)
                    })
                    .collect();
                (chosen.iter().map(|&a| catalog.decode(a)).collect(), chosen)
            }
            Controller::Random => {
                let allowed: Vec<usize> = (0..catalog.len()).filter(|&i| mask[i]).collect();
                let chosen: Vec<usize> = (0..world.uavs.len())
                    .map(|_| allowed[rng.random_range(0..allowed.len())])
                    .collect();
                (chosen.iter().map(|&a| catalog.decode(a)).collect(), chosen)
            }
            Controller::Circular => {
                let actions: Vec<_> = circular.actions(&world);
                let chosen = actions
                    .iter()
                    .map(|a| catalog.index_of(a.movement, 0).unwrap_or(usize::MAX))
                    .collect();
                (actions, chosen)
            }
        };
        let mut log = world.step(&actions)?.log;
        log.actions = chosen;
        slots.push(log);
    }
    Ok(finish(episode, 0.0, slots, &[], &world))
}

/// `episodes` evaluation episodes under seed `seed`, run in parallel.
/// Episode `e` uses the same world for every controller and setup.
pub fn evaluate(
    env: &EnvConfig,
    setup: Setup,
    controller: &Controller,
    seed: u64,
    episodes: usize,
) -> Result<Vec<EpisodeRecord>> {
    let branch = SeedTree::new(seed).child(EVAL_BRANCH);
    parallel::map_indices(episodes, |e| {
        play_episode(env, setup, controller, &branch.child(e as u64), e)
    })
    .into_iter()
    .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::EnvConfig;

    fn small() -> (EnvConfig, TrainerConfig) {
        let env = EnvConfig {
            slots: 20,
            recluster_period: 10,
            ..EnvConfig::default()
        };
        let trainer = TrainerConfig {
            episodes: 3,
            batch_size: 8,
            ..TrainerConfig::default()
        };
        (env, trainer)
    }

    #[test]
    fn mdqn_buffer_gets_one_transition_per_agent_per_slot() {
        let (env, tc) = small();
        let mut t = Trainer::new(&env, &tc, Setup::default(), 1).unwrap();
        t.run_episode(0, 0.9, false).unwrap();
        assert_eq!(t.pool.learners.len(), 1);
        assert_eq!(t.pool.learners[0].buffer.len(), 3 * 21);
        assert_eq!(t.pool.learners[0].updates(), 0);
    }

    #[test]
    fn independent_buffers_are_private() {
        let (env, mut tc) = small();
        tc.sharing = Sharing::Independent;
        let mut t = Trainer::new(&env, &tc, Setup::default(), 1).unwrap();
        t.run_episode(0, 0.5, true).unwrap();
        assert_eq!(t.pool.learners.len(), 3);
        for l in &t.pool.learners {
            assert_eq!(l.buffer.len(), 21);
            assert_eq!(l.updates(), 21 - 7);
        }
    }

    #[test]
    fn single_uav_modes_coincide() {
        let env = EnvConfig {
            uav_count: 1,
            user_count: 2,
            slots: 30,
            recluster_period: 10,
            ..EnvConfig::default()
        };
        let mut tc = TrainerConfig { episodes: 3, batch_size: 8, ..TrainerConfig::default() };
        let a = train(&env, &tc, Setup::default(), 5).unwrap();
        tc.sharing = Sharing::Independent;
        let b = train(&env, &tc, Setup::default(), 5).unwrap();
        assert_eq!(a.loss, b.loss);
        assert_eq!(a.episodes, b.episodes);
        assert_eq!(a.networks, b.networks);
    }

    #[test]
    fn zero_horizon_throughput_is_slot_zero() {
        let env = EnvConfig { slots: 0, recluster_period: 1, ..EnvConfig::default() };
        let r = play_episode(&env, Setup::default(), &Controller::Random, &SeedTree::new(2), 0).unwrap();
        assert_eq!(r.slots.len(), 1);
        assert_eq!(r.metrics.throughput_bits, r.slots[0].sum_rate);
    }

    #[test]
    fn random_smoke_episode() {
        let (env, tc) = small();
        let mut t = Trainer::new(&env, &tc, Setup::default(), 3).unwrap();
        let r = t.run_episode(0, 1.0, false).unwrap();
        assert_eq!(r.slots.len(), 21);
        assert_eq!(r.audit.total(), 0);
        assert!(t.loss.is_empty());
    }

    #[test]
    fn greedy_evaluation_is_deterministic() {
        let (env, tc) = small();
        let out = train(&env, &tc, Setup::default(), 9).unwrap();
        let c = Controller::Greedy(out.networks);
        let a = evaluate(&env, Setup::default(), &c, 4, 3).unwrap();
        let b = evaluate(&env, Setup::default(), &c, 4, 3).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.slots, y.slots);
            assert_eq!(x.metrics, y.metrics);
        }
    }

    #[test]
    fn mismatched_networks_are_rejected() {
        let (env, _) = small();
        let bad = Controller::Greedy(vec![Mlp::zeros(4, 5, 6)]);
        assert!(matches!(
            evaluate(&env, Setup::default(), &bad, 1, 1),
            Err(Error::Dimension { .. })
        ));
    }
}
