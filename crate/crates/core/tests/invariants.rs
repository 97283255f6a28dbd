use proptest::prelude::*;
use rand::Rng;
use uav_noma::agent::{state_len, JointAction, PowerChoice, Sharing};
use uav_noma::baselines::{BaselineKind, Setup};
use uav_noma::config::{EnvConfig, MobilityMix, TrainerConfig};
use uav_noma::env::{SlotLog, World};
use uav_noma::experiment::{evaluate, play_episode, train, Controller};
use uav_noma::mobility::MoveAction;
use uav_noma::rng::{SeedTree, Stream};

const HORIZONTAL: [MoveAction; 5] = [
    MoveAction::Hover,
    MoveAction::Right,
    MoveAction::Left,
    MoveAction::Forward,
    MoveAction::Backward,
];

/// Drives one episode with a scripted horizontal movement sequence; the
/// power half of each action comes from `power`.
fn scripted(cfg: &EnvConfig, setup: Setup, seed: u64, power: impl Fn(usize) -> PowerChoice) -> Vec<SlotLog> {
    let tree = SeedTree::new(seed);
    let mut world = World::reset(cfg, setup.mode, &tree).unwrap();
    let mut script = SeedTree::new(seed ^ 0xfeed).rng(Stream::Policy);
    let mut logs = Vec::new();
    while !world.is_done() {
        let actions: Vec<JointAction> = (0..cfg.uav_count)
            .map(|u| JointAction {
                movement: HORIZONTAL[script.random_range(0..HORIZONTAL.len())],
                power: power(u),
            })
            .collect();
        logs.push(world.step(&actions).unwrap().log);
    }
    logs
}

fn gears() -> PowerChoice {
    PowerChoice::Gears(vec![0.4, 0.3])
}

fn short_env() -> EnvConfig {
    EnvConfig {
        slots: 120,
        recluster_period: 40,
        ..EnvConfig::default()
    }
}

#[test]
fn ablations_differ_only_on_their_axis() {
    let cfg = short_env();
    let full = scripted(&cfg, Setup::default(), 5, |_| gears());
    let tr = cfg.recluster_period;

    let same_geometry = |other: &[SlotLog], name: &str| {
        for (a, b) in full.iter().zip(other).take(tr) {
            assert_eq!(a.uav_positions, b.uav_positions, "{name} slot {}", a.slot);
            assert_eq!(a.serving, b.serving, "{name} slot {}", a.slot);
        }
    };

    let stat = scripted(&cfg, BaselineKind::StaticDecoding.setup(), 5, |_| gears());
    same_geometry(&stat, "static");
    for (a, b) in full.iter().zip(&stat).take(tr) {
        assert_eq!(a.user_powers, b.user_powers);
    }

    let eq = scripted(&cfg, BaselineKind::EqualPower.setup(), 5, |_| PowerChoice::EqualSplit);
    same_geometry(&eq, "equal-power");

    let oma = scripted(&cfg, BaselineKind::Oma.setup(), 5, |_| PowerChoice::EqualSplit);
    same_geometry(&oma, "oma");

    let flat = scripted(&cfg, BaselineKind::Mdqn2D.setup(), 5, |_| gears());
    same_geometry(&flat, "2d");
    for (a, b) in full.iter().zip(&flat).take(tr) {
        assert_eq!(a.per_user_rate, b.per_user_rate);
    }

    let frozen = scripted(&cfg, BaselineKind::NoRecluster.setup(), 5, |_| gears());
    assert_eq!(&full[..tr], &frozen[..tr]);
}

#[test]
fn equal_power_splits_the_budget_exactly() {
    let cfg = short_env();
    for log in scripted(&cfg, BaselineKind::EqualPower.setup(), 8, |_| PowerChoice::EqualSplit) {
        for (k, &p) in log.user_powers.iter().enumerate() {
            let size = log.serving.iter().filter(|&&s| s == log.serving[k]).count();
            assert_eq!(p, cfg.tx_power / size as f64);
        }
    }
}

#[test]
fn two_d_play_never_changes_altitude() {
    let cfg = short_env();
    let setup = BaselineKind::Mdqn2D.setup();
    for rec in evaluate(&cfg, setup, &Controller::Random, 3, 3).unwrap() {
        for s in &rec.slots {
            assert!(s.uav_positions.iter().all(|p| p[2] == cfg.initial_height));
        }
        assert_eq!(rec.audit.total(), 0);
    }
}

fn tiny_trainer(sharing: Sharing) -> TrainerConfig {
    TrainerConfig {
        episodes: 3,
        sharing,
        batch_size: 8,
        ..TrainerConfig::default()
    }
}

#[test]
fn trained_two_d_policy_keeps_altitude() {
    let cfg = EnvConfig {
        slots: 30,
        recluster_period: 10,
        ..EnvConfig::default()
    };
    let setup = BaselineKind::Mdqn2D.setup();
    let out = train(&cfg, &tiny_trainer(Sharing::Mdqn), setup, 2).unwrap();
    assert_eq!(out.audit.total(), 0);
    let rec = evaluate(&cfg, setup, &Controller::Greedy(out.networks), 2, 2).unwrap();
    for r in rec {
        assert!(r.slots.iter().all(|s| s.uav_positions.iter().all(|p| p[2] == 100.0)));
    }
}

#[test]
fn sharing_modes_produce_expected_networks() {
    let cfg = EnvConfig {
        slots: 10,
        recluster_period: 5,
        ..EnvConfig::default()
    };
    let shared = train(&cfg, &tiny_trainer(Sharing::Mdqn), Setup::default(), 1).unwrap();
    assert_eq!(shared.networks.len(), 1);
    let own = train(&cfg, &tiny_trainer(Sharing::Independent), Setup::default(), 1).unwrap();
    assert_eq!(own.networks.len(), cfg.uav_count);
    assert_ne!(own.networks[0], own.networks[1]);
    let again = train(&cfg, &tiny_trainer(Sharing::Mdqn), Setup::default(), 1).unwrap();
    assert_eq!(shared.loss, again.loss);
    assert_eq!(shared.networks, again.networks);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn random_play_respects_hard_constraints(
        seed in any::<u64>(),
        uavs in 1usize..5,
        per in 1usize..4,
        directional in any::<bool>(),
    ) {
        let cfg = EnvConfig {
            uav_count: uavs,
            user_count: uavs * per,
            slots: 40,
            recluster_period: 10,
            mobility: if directional { MobilityMix::Directional } else { MobilityMix::RandomRoam },
            ..EnvConfig::default()
        };
        for kind in [BaselineKind::Random, BaselineKind::Oma, BaselineKind::StaticDecoding] {
            let rec = play_episode(&cfg, kind.setup(), &Controller::Random, &SeedTree::new(seed), 0).unwrap();
            let a = rec.audit;
            let sic = if kind == BaselineKind::StaticDecoding { 0 } else { a.sic_order };
            prop_assert_eq!(a.bounds + a.unique_serving + a.power_budget + sic, 0);
            prop_assert_eq!(rec.audit.slots, cfg.slots + 1);
            for s in &rec.slots {
                prop_assert!(s.radiated.iter().all(|&p| p <= cfg.tx_power * (1.0 + 1e-12)));
                prop_assert!(s.lambdas.iter().all(|&l| l <= cfg.lambda_max));
            }
        }
    }

    #[test]
    fn observations_stay_in_unit_interval(seed in any::<u64>(), steps in 0usize..60) {
        let cfg = EnvConfig { slots: 60, recluster_period: 15, ..EnvConfig::default() };
        let mut world = World::reset(&cfg, Setup::default().mode, &SeedTree::new(seed)).unwrap();
        let mut rng = SeedTree::new(seed).rng(Stream::Policy);
        for _ in 0..steps {
            let acts: Vec<JointAction> = (0..cfg.uav_count)
                .map(|_| JointAction {
                    movement: MoveAction::ALL[rng.random_range(0..7)],
                    power: PowerChoice::EqualSplit,
                })
                .collect();
            world.step(&acts).unwrap();
        }
        for obs in world.observe_all() {
            prop_assert_eq!(obs.len(), state_len(cfg.uav_count, cfg.cap()));
            prop_assert!(obs.iter().all(|x| (0.0..=1.0).contains(x)), "{:?}", obs);
        }
    }
}
