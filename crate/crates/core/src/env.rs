//! The episodic environment: per-slot world advance, constraint handling,
//! QoS-penalised rewards.
//!
//! One call to [`World::step`] performs, in order: UAV moves, user moves,
//! scheduled re-clustering, fading redraw and gain update, decoding-order
//! update, rate computation with the chosen powers, rewards, and penalty
//! updates.

use crate::agent::{abstract_state, members_by_gain, JointAction, PowerChoice, StateView};
use crate::channel::{self, ChannelParams};
use crate::clustering::{self, ClusterAssignment, Point};
use crate::config::{EnvConfig, MobilityMix, RewardScope};
use crate::error::Result;
use crate::mobility::{self, Area, Mobility, UavState, UserState};
use crate::noma::{self, Access, DecodingOrder, Downlink, LinkMatrix, RateReport};
use crate::rng::{SeedTree, SimRng, Stream};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecodingMode {
    /// Order by equivalent gain, recomputed every slot.
    Dynamic,
    /// Order by raw gain at each re-clustering slot, then frozen.
    Static,
}

/// Environment-side switches used by the ablations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EnvMode {
    pub access: Access,
    pub decoding: DecodingMode,
    /// When false, users are clustered once at slot 0 only.
    pub recluster: bool,
}

impl Default for EnvMode {
    fn default() -> Self {
        Self {
            access: Access::Noma,
            decoding: DecodingMode::Dynamic,
            recluster: true,
        }
    }
}

/// Adaptive QoS penalty exponent of one agent.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PenaltyState {
    pub lambda: u32,
    pub lambda_max: u32,
    pub window: usize,
    pub clean_streak: usize,
    pub violations: usize,
}

impl PenaltyState {
    pub fn new(lambda_max: u32, window: usize) -> Self {
        Self {
            lambda: 0,
            lambda_max,
            window,
            clean_streak: 0,
            violations: 0,
        }
    }

    /// Reward `rate / 2^lambda` with the current exponent, then the
    /// exponent update: +1 on a violating slot (capped), -1 after `window`
    /// consecutive clean slots (floored at 0).
    pub fn apply(self, rate_mbps: f64, violated: bool) -> (f64, PenaltyState) {
        let reward = rate_mbps / 2f64.powi(self.lambda as i32);
        let mut next = self;
        if violated {
            next.lambda = (next.lambda + 1).min(next.lambda_max);
            next.clean_streak = 0;
            next.violations += 1;
        } else {
            next.clean_streak += 1;
            if next.clean_streak >= next.window {
                next.lambda = next.lambda.saturating_sub(1);
                next.clean_streak = 0;
            }
        }
        (reward, next)
    }
}

/// Hard-constraint violation counters.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct ConstraintAudit {
    pub slots: usize,
    pub bounds: usize,
    pub unique_serving: usize,
    pub power_budget: usize,
    pub sic_order: usize,
}

impl ConstraintAudit {
    pub fn total(&self) -> usize {
        self.bounds + self.unique_serving + self.power_budget + self.sic_order
    }

    pub fn merge(&mut self, other: &ConstraintAudit) {
        self.slots += other.slots;
        self.bounds += other.bounds;
        self.unique_serving += other.unique_serving;
        self.power_budget += other.power_budget;
        self.sic_order += other.sic_order;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SlotLog {
    pub slot: usize,
    pub per_user_rate: Vec<f64>,
    pub sum_rate: f64,
    pub uav_positions: Vec<[f64; 3]>,
    /// Action indices, filled in by the controller driving the episode.
    pub actions: Vec<usize>,
    pub rewards: Vec<f64>,
    /// Penalty exponents used for this slot's rewards.
    pub lambdas: Vec<u32>,
    /// Users below the QoS rate in this slot.
    pub qos_violations: usize,
    pub serving: Vec<usize>,
    /// Power allocated to each user by its serving UAV.
    pub user_powers: Vec<f64>,
    /// Total radiated power of each UAV.
    pub radiated: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub rewards: Vec<f64>,
    pub report: RateReport,
    pub log: SlotLog,
}

#[derive(Debug, Clone)]
pub struct World {
    config: EnvConfig,
    area: Area,
    channel: ChannelParams,
    sigma2: f64,
    mode: EnvMode,
    pub users: Vec<UserState>,
    pub uavs: Vec<UavState>,
    pub assignment: ClusterAssignment,
    /// Gains of the most recent slot (or of the reset snapshot), which are
    /// also the agents' observation.
    pub gains: LinkMatrix,
    static_orders: Vec<DecodingOrder>,
    penalties: Vec<PenaltyState>,
    slot: usize,
    mobility_rng: SimRng,
    fading_rng: SimRng,
    cluster_rng: SimRng,
    audit: ConstraintAudit,
}

fn initial_users(config: &EnvConfig, area: &Area, rng: &mut SimRng) -> Vec<UserState> {
    (0..config.user_count)
        .map(|id| {
            let x = rng.random_range(area.x_min..=area.x_max);
            let y = rng.random_range(area.y_min..=area.y_max);
            let heading = rng.random::<f64>() * TAU;
            let directional = match config.mobility {
                MobilityMix::RandomRoam => false,
                MobilityMix::Directional => true,
                MobilityMix::Mixed => id % 2 == 1,
            };
            let model = if directional {
                Mobility::DirectionalWalk { heading }
            } else {
                Mobility::RandomRoam
            };
            UserState { id, x, y, model }
        })
        .collect()
}

/// UAVs evenly spaced along the area boundary at the initial height.
fn initial_uavs(config: &EnvConfig, area: &Area) -> Vec<UavState> {
    let perimeter = 2.0 * (area.width() + area.depth());
    let n = config.uav_count as f64;
    (0..config.uav_count)
        .map(|id| {
            let (x, y) = area.boundary_point(perimeter * (id as f64 + 0.5) / n);
            UavState {
                id,
                x,
                y,
                h: config.initial_height,
                speed: config.uav_speed,
            }
        })
        .collect()
}

impl World {
    pub fn reset(config: &EnvConfig, mode: EnvMode, seeds: &SeedTree) -> Result<World> {
        config.validate()?;
        let area = config.area();
        let users = initial_users(config, &area, &mut seeds.rng(Stream::Placement));
        let uavs = initial_uavs(config, &area);
        let mut world = World {
            config: config.clone(),
            area,
            channel: config.channel(),
            sigma2: config.sigma2(),
            mode,
            users,
            uavs,
            assignment: ClusterAssignment {
                labels: Vec::new(),
                centroids: Vec::new(),
                epoch: 0,
                lloyd_objective: Vec::new(),
            },
            gains: LinkMatrix::zeros(config.uav_count, config.user_count),
            static_orders: vec![DecodingOrder::default(); config.uav_count],
            penalties: vec![PenaltyState::new(config.lambda_max, config.penalty_window); config.uav_count],
            slot: 0,
            mobility_rng: seeds.rng(Stream::Mobility),
            fading_rng: seeds.rng(Stream::Fading),
            cluster_rng: seeds.rng(Stream::Cluster),
            audit: ConstraintAudit::default(),
        };
        world.recluster(0)?;
        world.gains = world.draw_gains()?;
        Ok(world)
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    pub fn area(&self) -> &Area {
        &self.area
    }

    pub fn mode(&self) -> EnvMode {
        self.mode
    }

    /// Index of the next slot to be played.
    pub fn slot(&self) -> usize {
        self.slot
    }

    pub fn is_done(&self) -> bool {
        self.slot > self.config.slots
    }

    pub fn audit(&self) -> &ConstraintAudit {
        &self.audit
    }

    pub fn penalties(&self) -> &[PenaltyState] {
        &self.penalties
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    pub fn uav_positions(&self) -> Vec<[f64; 3]> {
        self.uavs.iter().map(|u| [u.x, u.y, u.h]).collect()
    }

    pub fn observe(&self, agent: usize) -> Vec<f64> {
        let positions = self.uav_positions();
        abstract_state(
            &StateView {
                area: &self.area,
                uav_positions: &positions,
                gains: &self.gains,
                serving: &self.assignment.labels,
                slots: self.config.cap(),
            },
            agent,
        )
    }

    /// Observation of every agent, in UAV id order.
    pub fn observe_all(&self) -> Vec<Vec<f64>> {
        (0..self.uavs.len()).map(|u| self.observe(u)).collect()
    }

    fn recluster(&mut self, slot: usize) -> Result<()> {
        let points: Vec<Point> = self.users.iter().map(|u| [u.x, u.y]).collect();
        let raw = clustering::kmeans_capped(
            &points,
            self.config.uav_count,
            self.config.cap(),
            &mut self.cluster_rng,
        )?;
        let uav_xy: Vec<Point> = self.uavs.iter().map(|u| [u.x, u.y]).collect();
        let map = clustering::associate(&uav_xy, &raw.centroids);
        let mut assignment = clustering::relabel_by_uav(raw, &map);
        assignment.epoch = slot;
        self.assignment = assignment;
        Ok(())
    }

    fn draw_gains(&mut self) -> Result<LinkMatrix> {
        let mut gains = LinkMatrix::zeros(self.uavs.len(), self.users.len());
        for (u, uav) in self.uavs.iter().enumerate() {
            for (k, user) in self.users.iter().enumerate() {
                let h = channel::draw_fading(self.channel.fading, &mut self.fading_rng);
                let link = channel::evaluate_link(uav, user, self.channel.fc_ghz, h)?;
                gains.set(u, k, link.gain_linear);
            }
        }
        Ok(gains)
    }

    pub fn members(&self, uav: usize) -> Vec<usize> {
        self.assignment.members(uav)
    }

    /// Power matrix for the chosen actions. Gear slot `i` goes to the
    /// `i`-th strongest cluster member under `observed` gains.
    fn allocate(&self, actions: &[JointAction], observed: &LinkMatrix) -> LinkMatrix {
        let budget = self.config.tx_power;
        let mut powers = LinkMatrix::zeros(self.uavs.len(), self.users.len());
        for (u, action) in actions.iter().enumerate() {
            let members = members_by_gain(observed, &self.assignment.labels, u);
            match &action.power {
                PowerChoice::Gears(gears) => {
                    for (&k, &g) in members.iter().zip(gears) {
                        powers.set(u, k, g * budget);
                    }
                }
                PowerChoice::EqualSplit => {
                    for &k in &members {
                        powers.set(u, k, budget / members.len() as f64);
                    }
                }
            }
        }
        powers
    }

    pub fn step(&mut self, actions: &[JointAction]) -> Result<StepOutcome> {
        assert_eq!(actions.len(), self.uavs.len(), "one action per UAV");
        let slot = self.slot;
        let dt = self.config.slot_seconds;
        for (uav, action) in self.uavs.iter_mut().zip(actions) {
            *uav = mobility::move_uav(uav, action.movement, &self.area, dt);
        }
        for user in self.users.iter_mut() {
            *user = mobility::step_user(user, &self.area, self.config.user_max_speed, dt, &mut self.mobility_rng);
        }
        let reclustered = if slot == 0 || self.mode.recluster {
            clustering::recluster_due(slot, self.config.recluster_period)
        } else {
            false
        };
        if reclustered {
            self.recluster(slot)?;
        }

        let observed = std::mem::replace(&mut self.gains, LinkMatrix::zeros(0, 0));
        let gains = self.draw_gains()?;
        let powers = self.allocate(actions, &observed);
        let radiated = match self.mode.access {
            Access::Noma => powers.row_sums(),
            Access::Oma => (0..self.uavs.len())
                .map(|u| {
                    if self.assignment.labels.contains(&u) {
                        self.config.tx_power
                    } else {
                        0.0
                    }
                })
                .collect(),
        };
        let link = Downlink {
            gains: &gains,
            powers: &powers,
            radiated: &radiated,
            sigma2: self.sigma2,
            bandwidth: self.config.bandwidth_hz,
        };
        let clusters: Vec<Vec<usize>> = (0..self.uavs.len()).map(|u| self.members(u)).collect();
        let dynamic: Vec<DecodingOrder> = clusters
            .iter()
            .enumerate()
            .map(|(u, c)| noma::decoding_order(c, |k| link.equivalent_gain(k, u)))
            .collect();
        let orders = match self.mode.decoding {
            DecodingMode::Dynamic => dynamic,
            DecodingMode::Static => {
                if reclustered {
                    self.static_orders = clusters
                        .iter()
                        .enumerate()
                        .map(|(u, c)| noma::decoding_order(c, |k| gains.get(u, k)))
                        .collect();
                }
                self.static_orders.clone()
            }
        };
        let report = match self.mode.access {
            Access::Noma => link.noma_rates(&orders),
            Access::Oma => link.oma_rates(&clusters),
        };
        self.audit_slot(&link, &orders);

        let qos = self.config.qos_rate;
        let below: Vec<bool> = report.per_user_rate.iter().map(|&r| r < qos).collect();
        let lambdas: Vec<u32> = self.penalties.iter().map(|p| p.lambda).collect();
        let mut rewards = Vec::with_capacity(self.uavs.len());
        for u in 0..self.uavs.len() {
            let rate = match self.config.reward {
                RewardScope::OwnCluster => report.per_uav_rate[u],
                RewardScope::Global => report.sum_rate,
            };
            let violated = clusters[u].iter().any(|&k| below[k]);
            let (r, next) = self.penalties[u].apply(rate / 1e6, violated);
            self.penalties[u] = next;
            rewards.push(r);
        }

        let log = SlotLog {
            slot,
            per_user_rate: report.per_user_rate.clone(),
            sum_rate: report.sum_rate,
            uav_positions: self.uav_positions(),
            actions: Vec::new(),
            rewards: rewards.clone(),
            lambdas,
            qos_violations: below.iter().filter(|&&b| b).count(),
            serving: self.assignment.labels.clone(),
            user_powers: (0..self.users.len())
                .map(|k| powers.get(self.assignment.labels[k], k))
                .collect(),
            radiated,
        };
        self.gains = gains;
        self.slot += 1;
        Ok(StepOutcome {
            rewards,
            report,
            log,
        })
    }

    fn audit_slot(&mut self, link: &Downlink<'_>, orders: &[DecodingOrder]) {
        let a = &mut self.audit;
        a.slots += 1;
        a.bounds += self
            .uavs
            .iter()
            .filter(|u| !self.area.contains(u.x, u.y, u.h))
            .count();
        for k in 0..self.users.len() {
            let serving = (0..self.uavs.len())
                .filter(|&u| self.assignment.serves(u, k))
                .count();
            if serving != 1 {
                a.unique_serving += 1;
            }
        }
        let budget = self.config.tx_power * (1.0 + 1e-12);
        a.power_budget += link.radiated.iter().filter(|&&p| p > budget).count();
        if self.mode.access == Access::Noma {
            for (u, order) in orders.iter().enumerate() {
                if !noma::order_is_sic_valid(order, |k| link.equivalent_gain(k, u)) {
                    a.sic_order += 1;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::Fading;
    use crate::mobility::MoveAction;

    fn hover_all(n: usize, power: PowerChoice) -> Vec<JointAction> {
        vec![
            JointAction {
                movement: MoveAction::Hover,
                power,
            };
            n
        ]
    }

    #[test]
    fn penalty_rule() {
        let p = PenaltyState::new(8, 20);
        assert_eq!(p.apply(10.0, false).0, 10.0);
        let two = PenaltyState { lambda: 2, ..p };
        assert_eq!(two.apply(10.0, false).0, 2.5);
        let mut s = p;
        for _ in 0..3 {
            s = s.apply(5.0, true).1;
        }
        assert_eq!(s.lambda, 3);
        for _ in 0..20 {
            s = s.apply(5.0, true).1;
        }
        assert_eq!(s.lambda, 8);
        for _ in 0..19 {
            s = s.apply(5.0, false).1;
        }
        assert_eq!(s.lambda, 8);
        s = s.apply(5.0, false).1;
        assert_eq!(s.lambda, 7);
        for lambda in 0..8 {
            let a = PenaltyState { lambda, ..p }.apply(6.0, false).0;
            let b = PenaltyState { lambda: lambda + 1, ..p }.apply(6.0, false).0;
            assert_eq!(a, 2.0 * b);
        }
    }

    #[test]
    fn reset_places_everything() {
        let cfg = EnvConfig::default();
        let w = World::reset(&cfg, EnvMode::default(), &SeedTree::new(3)).unwrap();
        assert!(w.uavs.iter().all(|u| u.h == 100.0));
        assert!(w.users.iter().all(|u| w.area().contains_ground(u.x, u.y)));
        let w2 = World::reset(&cfg, EnvMode::default(), &SeedTree::new(3)).unwrap();
        assert_eq!(w.users, w2.users);
        assert_eq!(w.uavs, w2.uavs);
        assert_eq!(w.gains, w2.gains);
        assert_eq!(w.assignment, w2.assignment);
        assert!(w.assignment.sizes().iter().all(|&s| s <= cfg.cap()));
    }

    #[test]
    fn stationary_world_has_constant_rates() {
        let cfg = EnvConfig {
            fading: Fading::None,
            user_max_speed: 0.0,
            ..EnvConfig::default()
        };
        let mut w = World::reset(&cfg, EnvMode::default(), &SeedTree::new(8)).unwrap();
        let acts = hover_all(3, PowerChoice::Gears(vec![0.3, 0.2]));
        let first = w.step(&acts).unwrap().report;
        for _ in 0..10 {
            assert_eq!(w.step(&acts).unwrap().report, first);
        }
    }

    #[test]
    fn serving_changes_only_at_recluster_slots() {
        let cfg = EnvConfig {
            mobility: MobilityMix::Directional,
            user_max_speed: 20.0,
            recluster_period: 10,
            slots: 60,
            ..EnvConfig::default()
        };
        let mut w = World::reset(&cfg, EnvMode::default(), &SeedTree::new(5)).unwrap();
        let acts = hover_all(3, PowerChoice::EqualSplit);
        let mut last = w.step(&acts).unwrap().log.serving;
        let mut changed_at = Vec::new();
        while !w.is_done() {
            let log = w.step(&acts).unwrap().log;
            if log.serving != last {
                changed_at.push(log.slot);
            }
            last = log.serving;
        }
        assert!(!changed_at.is_empty());
        assert!(changed_at.iter().all(|s| s % 10 == 0), "{changed_at:?}");
    }

    /// Recomputes a slot's rates from the world's own gains through a
    /// separate call sequence.
    #[test]
    fn slot_rates_match_direct_composition() {
        let cfg = EnvConfig::default();
        let mut w = World::reset(&cfg, EnvMode::default(), &SeedTree::new(21)).unwrap();
        let acts = vec![
            JointAction { movement: MoveAction::Left, power: PowerChoice::Gears(vec![0.1, 0.4]) },
            JointAction { movement: MoveAction::Up, power: PowerChoice::Gears(vec![0.2, 0.2]) },
            JointAction { movement: MoveAction::Hover, power: PowerChoice::Gears(vec![0.4, 0.3]) },
        ];
        for _ in 0..5 {
            let observed = w.gains.clone();
            let out = w.step(&acts).unwrap();
            let gains = &w.gains;
            let mut powers = LinkMatrix::zeros(3, 6);
            for u in 0..3 {
                let PowerChoice::Gears(g) = &acts[u].power else { unreachable!() };
                let mut m = w.members(u);
                m.sort_by(|&a, &b| observed.get(u, b).partial_cmp(&observed.get(u, a)).unwrap().then(a.cmp(&b)));
                for (i, &k) in m.iter().enumerate() {
                    powers.set(u, k, g[i] * cfg.tx_power);
                }
            }
            let sigma2 = 10f64.powf((-174.0 + 60.0 - 30.0) / 10.0);
            let mut expect = 0.0;
            for u in 0..3 {
                let tot = |s: usize| (0..6).map(|j| powers.get(s, j)).sum::<f64>();
                let inter = |k: usize| (0..3).filter(|&s| s != u).map(|s| gains.get(s, k) * tot(s)).sum::<f64>();
                let mut m = w.members(u);
                m.sort_by(|&a, &b| {
                    let ga = gains.get(u, a) / (inter(a) + sigma2);
                    let gb = gains.get(u, b) / (inter(b) + sigma2);
                    ga.partial_cmp(&gb).unwrap().then(a.cmp(&b))
                });
                for (i, &k) in m.iter().enumerate() {
                    let intra: f64 = m[i + 1..].iter().map(|&j| gains.get(u, k) * powers.get(u, j)).sum();
                    let sinr = gains.get(u, k) * powers.get(u, k) / (intra + inter(k) + sigma2);
                    expect += 1e6 * (1.0 + sinr).log2();
                }
            }
            let rel = (out.report.sum_rate - expect).abs() / expect;
            assert!(rel < 1e-12, "rel {rel}");
        }
    }

    #[test]
    fn no_recluster_matches_until_first_scheduled_recluster() {
        let cfg = EnvConfig {
            mobility: MobilityMix::Directional,
            recluster_period: 25,
            slots: 80,
            ..EnvConfig::default()
        };
        let off = EnvMode { recluster: false, ..EnvMode::default() };
        let mut a = World::reset(&cfg, EnvMode::default(), &SeedTree::new(9)).unwrap();
        let mut b = World::reset(&cfg, off, &SeedTree::new(9)).unwrap();
        let acts = hover_all(3, PowerChoice::Gears(vec![0.2, 0.3]));
        for slot in 0..25 {
            let la = a.step(&acts).unwrap().log;
            let lb = b.step(&acts).unwrap().log;
            assert_eq!(la, lb, "slot {slot}");
        }
    }

    #[test]
    fn static_decoding_equals_dynamic_in_static_channel() {
        let cfg = EnvConfig {
            fading: Fading::None,
            user_max_speed: 0.0,
            ..EnvConfig::default()
        };
        let st = EnvMode { decoding: DecodingMode::Static, ..EnvMode::default() };
        let mut a = World::reset(&cfg, EnvMode::default(), &SeedTree::new(2)).unwrap();
        let mut b = World::reset(&cfg, st, &SeedTree::new(2)).unwrap();
        let acts = hover_all(3, PowerChoice::Gears(vec![0.4, 0.1]));
        for _ in 0..30 {
            assert_eq!(a.step(&acts).unwrap().report, b.step(&acts).unwrap().report);
        }
    }

    #[test]
    fn oma_mode_radiates_full_budget() {
        let cfg = EnvConfig::default();
        let oma = EnvMode { access: Access::Oma, ..EnvMode::default() };
        let mut w = World::reset(&cfg, oma, &SeedTree::new(4)).unwrap();
        let log = w.step(&hover_all(3, PowerChoice::Gears(vec![0.1, 0.1]))).unwrap().log;
        assert!(log.radiated.iter().all(|&p| p == cfg.tx_power));
        assert_eq!(w.audit().total(), 0);
    }

    #[test]
    fn audit_stays_clean_under_random_play() {
        let cfg = EnvConfig { slots: 100, ..EnvConfig::default() };
        let catalog = crate::agent::ActionCatalog::with_gears(&cfg.gears, cfg.cap());
        let mut rng = SeedTree::new(1).rng(Stream::Policy);
        let mut w = World::reset(&cfg, EnvMode::default(), &SeedTree::new(1)).unwrap();
        while !w.is_done() {
            let acts: Vec<JointAction> = (0..3)
                .map(|_| catalog.decode(rng.random_range(0..catalog.len())))
                .collect();
            w.step(&acts).unwrap();
        }
        assert_eq!(w.audit().slots, 101);
        assert_eq!(w.audit().total(), 0, "{:?}", w.audit());
    }
}
