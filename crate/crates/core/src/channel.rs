//! Air-to-ground propagation: LoS/NLoS path loss, LoS probability,
//! mean path loss and faded linear gain.
//!
//! The mean loss mixes the two branches in dB, weighted by the LoS
//! probability, rather than averaging linear power.

use crate::error::{Error, Result};
use crate::mobility::{UavState, UserState};
use rand::Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

/// Lowest altitude accepted by the propagation model.
pub const MIN_MODEL_ALTITUDE: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fading {
    /// Exponentially distributed power gain with unit mean.
    Rayleigh,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelParams {
    pub fc_ghz: f64,
    pub noise_dbm: f64,
    pub fading: Fading,
}

impl Default for ChannelParams {
    fn default() -> Self {
        Self {
            fc_ghz: 2.0,
            noise_dbm: noise_dbm(-174.0, 1e6),
            fading: Fading::Rayleigh,
        }
    }
}

impl ChannelParams {
    pub fn noise_watts(&self) -> f64 {
        dbm_to_watts(self.noise_dbm)
    }
}

/// Thermal noise power over `bandwidth_hz` for a given spectral density.
pub fn noise_dbm(psd_dbm_hz: f64, bandwidth_hz: f64) -> f64 {
    psd_dbm_hz + 10.0 * bandwidth_hz.log10()
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelSample {
    pub d3: f64,
    pub p_los: f64,
    pub loss_los_db: f64,
    pub loss_nlos_db: f64,
    pub loss_mean_db: f64,
    pub gain_linear: f64,
}

pub fn distance3d(uav: &UavState, user: &UserState) -> f64 {
    (uav.h * uav.h + (uav.x - user.x).powi(2) + (uav.y - user.y).powi(2)).sqrt()
}

fn check_geometry(h: f64, d3: f64) -> Result<()> {
    if !(h >= MIN_MODEL_ALTITUDE) {
        return Err(Error::Geometry(format!(
            "altitude {h} m below model minimum {MIN_MODEL_ALTITUDE} m"
        )));
    }
    // d3 = sqrt(h^2 + r^2) can land one ulp under h when r = 0.
    if !(d3 >= h * (1.0 - 1e-12)) {
        return Err(Error::Geometry(format!(
            "3-D distance {d3} m shorter than altitude {h} m"
        )));
    }
    Ok(())
}

/// Returns `(loss_los_db, loss_nlos_db)`.
pub fn path_loss_db(h: f64, d3: f64, fc_ghz: f64) -> Result<(f64, f64)> {
    check_geometry(h, d3)?;
    if !(fc_ghz > 0.0) {
        return Err(Error::Geometry(format!("carrier frequency {fc_ghz} GHz")));
    }
    let lh = h.log10();
    let ld = d3.log10();
    let lf = 20.0 * fc_ghz.log10();
    let los = 30.9 + (22.25 - 0.5 * lh) * ld + lf;
    let nlos = 32.4 + (43.2 - 7.6 * lh) * ld + lf;
    Ok((los, los.max(nlos)))
}

/// Returns `(d0, p1)` for altitude `h`.
pub fn los_params(h: f64) -> (f64, f64) {
    let lh = h.log10();
    ((294.05 * lh - 432.94).max(18.0), 233.98 * lh - 0.95)
}

pub fn p_los(h: f64, d3: f64) -> Result<f64> {
    check_geometry(h, d3)?;
    let (d0, p1) = los_params(h);
    if p1 <= 0.0 {
        return Err(Error::Geometry(format!("altitude {h} m gives p1 = {p1}")));
    }
    let r = (d3 * d3 - h * h).max(0.0).sqrt();
    if r <= d0 {
        return Ok(1.0);
    }
    Ok((d0 / r + (-r / p1 + d0 / p1).exp()).clamp(0.0, 1.0))
}

pub fn mean_path_loss_db(p_los: f64, loss_los_db: f64, loss_nlos_db: f64) -> f64 {
    p_los * loss_los_db + (1.0 - p_los) * loss_nlos_db
}

pub fn channel_gain(loss_mean_db: f64, fading: f64) -> f64 {
    fading * 10f64.powf(-loss_mean_db / 10.0)
}

pub fn draw_fading<R: Rng + ?Sized>(fading: Fading, rng: &mut R) -> f64 {
    match fading {
        Fading::Rayleigh => rng.sample(Exp1),
        Fading::None => 1.0,
    }
}

/// Full link evaluation for one UAV-user pair with a given fading draw.
pub fn evaluate_link(
    uav: &UavState,
    user: &UserState,
    fc_ghz: f64,
    fading: f64,
) -> Result<ChannelSample> {
    let d3 = distance3d(uav, user);
    let (loss_los_db, loss_nlos_db) = path_loss_db(uav.h, d3, fc_ghz)?;
    let p = p_los(uav.h, d3)?;
    let loss_mean_db = mean_path_loss_db(p, loss_los_db, loss_nlos_db);
    Ok(ChannelSample {
        d3,
        p_los: p,
        loss_los_db,
        loss_nlos_db,
        loss_mean_db,
        gain_linear: channel_gain(loss_mean_db, fading),
    })
}
