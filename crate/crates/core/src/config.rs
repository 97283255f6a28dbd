//! Scenario and trainer configuration.
//!
//! Files are `key = value` lines grouped under `[env]` and `[trainer]`
//! (TOML syntax). Every key is optional and defaults to the values below;
//! unknown keys are rejected.

use crate::agent::{LearnerConfig, Sharing};
use crate::channel::{self, ChannelParams, Fading, MIN_MODEL_ALTITUDE};
use crate::error::{Error, Result};
use crate::mobility::Area;
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MobilityMix {
    RandomRoam,
    Directional,
    /// Even user ids roam, odd ids walk directionally.
    Mixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardScope {
    /// Each agent is rewarded with its own cluster's sum rate.
    OwnCluster,
    /// Every agent receives the network sum rate.
    Global,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnvConfig {
    pub uav_count: usize,
    pub user_count: usize,
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub h_min: f64,
    pub h_max: f64,
    pub initial_height: f64,
    /// Slot duration in seconds.
    pub slot_seconds: f64,
    /// Last slot index `T`; an episode covers slots `0..=T`.
    pub slots: usize,
    /// Re-clustering period `T_r` in slots.
    pub recluster_period: usize,
    pub uav_speed: f64,
    pub user_max_speed: f64,
    pub mobility: MobilityMix,
    /// Per-UAV transmit budget in watts.
    pub tx_power: f64,
    pub bandwidth_hz: f64,
    pub carrier_ghz: f64,
    pub noise_psd_dbm_hz: f64,
    pub fading: Fading,
    /// Minimum per-user rate in bit/s.
    pub qos_rate: f64,
    /// Power gears as fractions of `tx_power`.
    pub gears: Vec<f64>,
    /// Users per cluster; 0 means `ceil(user_count / uav_count)`.
    pub cluster_cap: usize,
    pub lambda_max: u32,
    /// Violation-free slots before the penalty exponent steps down.
    pub penalty_window: usize,
    pub reward: RewardScope,
}

impl Default for EnvConfig {
    fn default() -> Self {
        let area = Area::default();
        Self {
            uav_count: 3,
            user_count: 6,
            x_min: area.x_min,
            x_max: area.x_max,
            y_min: area.y_min,
            y_max: area.y_max,
            h_min: area.h_min,
            h_max: area.h_max,
            initial_height: 100.0,
            slot_seconds: 0.5,
            slots: 200,
            recluster_period: 50,
            uav_speed: 10.0,
            user_max_speed: 2.0,
            mobility: MobilityMix::RandomRoam,
            tx_power: 0.5,
            bandwidth_hz: 1e6,
            carrier_ghz: 2.0,
            noise_psd_dbm_hz: -174.0,
            fading: Fading::Rayleigh,
            qos_rate: 1e5,
            gears: vec![0.1, 0.2, 0.3, 0.4],
            cluster_cap: 0,
            lambda_max: 8,
            penalty_window: 20,
            reward: RewardScope::OwnCluster,
        }
    }
}

impl EnvConfig {
    pub fn area(&self) -> Area {
        Area {
            x_min: self.x_min,
            x_max: self.x_max,
            y_min: self.y_min,
            y_max: self.y_max,
            h_min: self.h_min,
            h_max: self.h_max,
        }
    }

    pub fn channel(&self) -> ChannelParams {
        ChannelParams {
            fc_ghz: self.carrier_ghz,
            noise_dbm: channel::noise_dbm(self.noise_psd_dbm_hz, self.bandwidth_hz),
            fading: self.fading,
        }
    }

    pub fn sigma2(&self) -> f64 {
        self.channel().noise_watts()
    }

    pub fn cap(&self) -> usize {
        if self.cluster_cap == 0 {
            self.user_count.div_ceil(self.uav_count.max(1))
        } else {
            self.cluster_cap
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.uav_count == 0 {
            return fail("uav_count must be at least 1".into());
        }
        if self.user_count == 0 {
            return fail("user_count must be at least 1".into());
        }
        if !(self.x_min < self.x_max && self.y_min < self.y_max) {
            return fail("area bounds must satisfy x_min < x_max and y_min < y_max".into());
        }
        if !(self.h_min <= self.h_max) {
            return fail(format!("h_min {} exceeds h_max {}", self.h_min, self.h_max));
        }
        if self.h_min < MIN_MODEL_ALTITUDE {
            return fail(format!("h_min {} below the {MIN_MODEL_ALTITUDE} m model floor", self.h_min));
        }
        if !(self.h_min..=self.h_max).contains(&self.initial_height) {
            return fail(format!("initial_height {} outside [h_min, h_max]", self.initial_height));
        }
        if !(self.slot_seconds > 0.0) {
            return fail("slot_seconds must be positive".into());
        }
        if self.recluster_period == 0 {
            return fail("recluster_period must be at least 1".into());
        }
        if self.recluster_period > self.slots.max(1) {
            return fail(format!(
                "recluster_period {} exceeds slots {}",
                self.recluster_period, self.slots
            ));
        }
        if !(self.uav_speed >= 0.0 && self.user_max_speed >= 0.0) {
            return fail("speeds must be non-negative".into());
        }
        if !(self.tx_power > 0.0 && self.bandwidth_hz > 0.0 && self.carrier_ghz > 0.0) {
            return fail("tx_power, bandwidth_hz and carrier_ghz must be positive".into());
        }
        if !(self.qos_rate >= 0.0) {
            return fail("qos_rate must be non-negative".into());
        }
        if self.gears.is_empty() || self.gears.iter().any(|&g| !(g > 0.0 && g <= 1.0)) {
            return fail("gears must be a non-empty list of fractions in (0, 1]".into());
        }
        if self.cap().saturating_mul(self.uav_count) < self.user_count {
            return fail(format!(
                "cluster_cap {} too small for {} users over {} UAVs",
                self.cap(),
                self.user_count,
                self.uav_count
            ));
        }
        if self.penalty_window == 0 {
            return fail("penalty_window must be at least 1".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainerConfig {
    pub episodes: usize,
    pub sharing: Sharing,
    pub hidden: usize,
    pub learning_rate: f64,
    pub discount: f64,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    pub target_sync: u64,
    pub seed: u64,
}

impl Default for TrainerConfig {
    fn default() -> Self {
        let l = LearnerConfig::default();
        Self {
            episodes: 300,
            sharing: Sharing::Mdqn,
            hidden: l.hidden,
            learning_rate: l.learning_rate,
            discount: l.discount,
            batch_size: l.batch_size,
            buffer_capacity: l.buffer_capacity,
            target_sync: l.target_sync,
            seed: 0,
        }
    }
}

impl TrainerConfig {
    pub fn learner(&self) -> LearnerConfig {
        LearnerConfig {
            hidden: self.hidden,
            learning_rate: self.learning_rate,
            discount: self.discount,
            batch_size: self.batch_size,
            buffer_capacity: self.buffer_capacity,
            target_sync: self.target_sync,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: &str| Err(Error::Config(msg.into()));
        if self.episodes == 0 {
            return fail("episodes must be at least 1");
        }
        if self.hidden == 0 {
            return fail("hidden must be at least 1");
        }
        if !(self.learning_rate > 0.0) {
            return fail("learning_rate must be positive");
        }
        if !(0.0..1.0).contains(&self.discount) {
            return fail("discount must lie in [0, 1)");
        }
        if self.batch_size == 0 || self.buffer_capacity < self.batch_size {
            return fail("need 1 <= batch_size <= buffer_capacity");
        }
        if self.target_sync == 0 {
            return fail("target_sync must be at least 1");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    pub env: EnvConfig,
    pub trainer: TrainerConfig,
}

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Config = toml::from_str(text).map_err(|e| Error::ConfigParse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            Error::Io(std::io::Error::new(
                e.kind(),
                format!("cannot read config {}: {e}", path.display()),
            ))
        })?;
        Self::parse(&text)
    }

    pub fn dump(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.env.validate()?;
        self.trainer.validate()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn empty_file_is_default() {
        assert_eq!(Config::parse("").unwrap(), Config::default());
    }

    #[test]
    fn parses_keys() {
        let c = Config::parse("[env]\nuav_count = 3\nuser_count = 9\nfading = \"none\"\n[trainer]\nsharing = \"independent\"\n").unwrap();
        assert_eq!(c.env.uav_count, 3);
        assert_eq!(c.env.user_count, 9);
        assert_eq!(c.env.fading, Fading::None);
        assert_eq!(c.trainer.sharing, Sharing::Independent);
    }

    #[test]
    fn distinct_errors() {
        let unknown = Config::parse("[env]\nwarp_drive = 1\n").unwrap_err().to_string();
        assert!(unknown.contains("warp_drive"), "{unknown}");
        let malformed = Config::parse("[env]\nuav_count = 3\nuser_count ==\n").unwrap_err().to_string();
        assert!(malformed.contains("line 3"), "{malformed}");
        let constraint = Config::parse("[env]\nslots = 10\nrecluster_period = 20\n").unwrap_err();
        assert!(matches!(constraint, Error::Config(_)));
        assert!(constraint.to_string().contains("recluster_period"));
        let missing = Config::load(Path::new("/definitely/not/here.toml")).unwrap_err();
        assert!(matches!(missing, Error::Io(_)));
        assert!(matches!(Config::parse("[env]\nh_min = 5.0\n"), Err(Error::Config(_))));
    }

    proptest! {
        #[test]
        fn dump_parse_round_trip(
            uavs in 1usize..5,
            per in 1usize..4,
            slots in 1usize..400,
            period_frac in 0.01f64..1.0,
            power in 0.01f64..5.0,
            gears in prop::collection::vec(0.01f64..1.0, 1..5),
            sharing in prop_oneof![Just(Sharing::Mdqn), Just(Sharing::Independent)],
            lr in 1e-6f64..1e-1,
            seed in 0..=i64::MAX as u64,
        ) {
            let mut c = Config::default();
            c.env.uav_count = uavs;
            c.env.user_count = uavs * per;
            c.env.slots = slots;
            c.env.recluster_period = ((slots as f64 * period_frac) as usize).max(1);
            c.env.tx_power = power;
            c.env.gears = gears;
            c.trainer.sharing = sharing;
            c.trainer.learning_rate = lr;
            c.trainer.seed = seed;
            let back = Config::parse(&c.dump()).unwrap();
            prop_assert_eq!(back, c);
        }
    }
}
