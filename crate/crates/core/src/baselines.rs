//! Reference policies and single-axis ablations of the full method.

use crate::agent::{ActionCatalog, JointAction, PowerChoice};
use crate::config::EnvConfig;
use crate::env::{DecodingMode, EnvMode, World};
use crate::mobility::{self, MoveAction};
use crate::noma::Access;
use serde::{Deserialize, Serialize};

/// Action space offered to the learners.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CatalogKind {
    /// Seven moves times every gear combination.
    Gears,
    /// Gears without up/down.
    Gears2D,
    /// Seven moves, equal power split.
    EqualSplit,
}

impl CatalogKind {
    pub fn build(self, env: &EnvConfig) -> ActionCatalog {
        match self {
            CatalogKind::Gears => ActionCatalog::with_gears(&env.gears, env.cap()),
            CatalogKind::Gears2D => ActionCatalog::with_gears(&env.gears, env.cap()).restrict_2d(),
            CatalogKind::EqualSplit => ActionCatalog::equal_split(),
        }
    }
}

/// Everything that distinguishes one experimental arm from another.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Setup {
    pub mode: EnvMode,
    pub catalog: CatalogKind,
}

impl Default for Setup {
    fn default() -> Self {
        Self {
            mode: EnvMode::default(),
            catalog: CatalogKind::Gears,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BaselineKind {
    Circular,
    #[serde(rename = "2d")]
    Mdqn2D,
    Oma,
    EqualPower,
    StaticDecoding,
    NoRecluster,
    /// Uniformly random unmasked actions; stands in for a "chaotic"
    /// deployment.
    Random,
}

impl BaselineKind {
    pub const ALL: [BaselineKind; 7] = [
        BaselineKind::Circular,
        BaselineKind::Mdqn2D,
        BaselineKind::Oma,
        BaselineKind::EqualPower,
        BaselineKind::StaticDecoding,
        BaselineKind::NoRecluster,
        BaselineKind::Random,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BaselineKind::Circular => "circular",
            BaselineKind::Mdqn2D => "2d",
            BaselineKind::Oma => "oma",
            BaselineKind::EqualPower => "equal-power",
            BaselineKind::StaticDecoding => "static-decoding",
            BaselineKind::NoRecluster => "no-recluster",
            BaselineKind::Random => "random",
        }
    }

    pub fn parse(name: &str) -> Option<BaselineKind> {
        Self::ALL.into_iter().find(|k| k.name() == name)
    }

    /// Whether the baseline trains learners or runs a fixed policy.
    pub fn is_learned(self) -> bool {
        !matches!(self, BaselineKind::Circular | BaselineKind::Random)
    }

    pub fn setup(self) -> Setup {
        let full = Setup::default();
        match self {
            BaselineKind::Circular => Setup {
                catalog: CatalogKind::EqualSplit,
                ..full
            },
            BaselineKind::Mdqn2D => Setup {
                catalog: CatalogKind::Gears2D,
                ..full
            },
            // Time shares use the full budget, so the gear choice carries no
            // meaning and only the movement is learned.
            BaselineKind::Oma => Setup {
                mode: EnvMode {
                    access: Access::Oma,
                    ..full.mode
                },
                catalog: CatalogKind::EqualSplit,
            },
            BaselineKind::EqualPower => Setup {
                catalog: CatalogKind::EqualSplit,
                ..full
            },
            BaselineKind::StaticDecoding => Setup {
                mode: EnvMode {
                    decoding: DecodingMode::Static,
                    ..full.mode
                },
                ..full
            },
            BaselineKind::NoRecluster => Setup {
                mode: EnvMode {
                    recluster: false,
                    ..full.mode
                },
                ..full
            },
            BaselineKind::Random => full,
        }
    }
}

pub const DEFAULT_CIRCLE_RADIUS: f64 = 50.0;
const MAX_WAYPOINT_ADVANCES: usize = 4;

/// Flies each UAV around its cluster centroid at constant altitude with an
/// equal power split.
#[derive(Debug, Clone, PartialEq)]
pub struct CircularPolicy {
    pub radius: f64,
    pub angular_step: f64,
    phase: Vec<Option<f64>>,
}

impl CircularPolicy {
    pub fn new(uavs: usize, radius: f64, angular_step: f64) -> Self {
        Self {
            radius,
            angular_step,
            phase: vec![None; uavs],
        }
    }

    /// One move step of arc per waypoint.
    pub fn for_config(env: &EnvConfig) -> Self {
        let step = env.uav_speed * env.slot_seconds / DEFAULT_CIRCLE_RADIUS;
        Self::new(env.uav_count, DEFAULT_CIRCLE_RADIUS, step)
    }

    pub fn phase(&self, uav: usize) -> Option<f64> {
        self.phase[uav]
    }

    fn waypoint(&self, center: [f64; 2], phase: f64) -> [f64; 2] {
        [
            center[0] + self.radius * phase.cos(),
            center[1] + self.radius * phase.sin(),
        ]
    }

    /// Movement toward the current waypoint for one UAV; the waypoint
    /// advances whenever hovering is already the best choice.
    pub fn movement(&mut self, world: &World, uav: usize) -> MoveAction {
        let state = &world.uavs[uav];
        let center = world.assignment.centroids[uav];
        let phase = self.phase[uav]
            .get_or_insert_with(|| (state.y - center[1]).atan2(state.x - center[0]));
        let dt = world.config().slot_seconds;
        let mut choice = MoveAction::Hover;
        for _ in 0..MAX_WAYPOINT_ADVANCES {
            let w = [center[0] + self.radius * phase.cos(), center[1] + self.radius * phase.sin()];
            let mut best = (MoveAction::Hover, f64::INFINITY);
            for action in MoveAction::ALL.into_iter().filter(|a| !a.is_vertical()) {
                let next = mobility::move_uav(state, action, world.area(), dt);
                let d = (next.x - w[0]).hypot(next.y - w[1]);
                if d < best.1 {
                    best = (action, d);
                }
            }
            choice = best.0;
            if choice != MoveAction::Hover {
                break;
            }
            *phase += self.angular_step;
        }
        choice
    }

    pub fn actions(&mut self, world: &World) -> Vec<JointAction> {
        (0..world.uavs.len())
            .map(|u| JointAction {
                movement: self.movement(world, u),
                power: PowerChoice::EqualSplit,
            })
            .collect()
    }

    /// Waypoint the UAV is currently heading for.
    pub fn current_waypoint(&self, world: &World, uav: usize) -> Option<[f64; 2]> {
        self.phase[uav].map(|p| self.waypoint(world.assignment.centroids[uav], p))
    }
}
