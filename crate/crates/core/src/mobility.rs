//! Ground-user mobility and UAV kinematics inside a bounded service volume.

use rand::Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

/// Axis-aligned service volume. Users live on the ground plane, UAVs fly
/// between `h_min` and `h_max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Area {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub h_min: f64,
    pub h_max: f64,
}

impl Default for Area {
    fn default() -> Self {
        Self {
            x_min: -200.0,
            x_max: 200.0,
            y_min: -200.0,
            y_max: 200.0,
            h_min: 50.0,
            h_max: 150.0,
        }
    }
}

impl Area {
    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn depth(&self) -> f64 {
        self.y_max - self.y_min
    }

    pub fn clip_ground(&self, x: f64, y: f64) -> (f64, f64) {
        (x.clamp(self.x_min, self.x_max), y.clamp(self.y_min, self.y_max))
    }

    pub fn contains_ground(&self, x: f64, y: f64) -> bool {
        (self.x_min..=self.x_max).contains(&x) && (self.y_min..=self.y_max).contains(&y)
    }

    pub fn contains(&self, x: f64, y: f64, h: f64) -> bool {
        self.contains_ground(x, y) && (self.h_min..=self.h_max).contains(&h)
    }

    /// Point at arc length `s` along the boundary, walking counter-clockwise
    /// from the `(x_min, y_min)` corner.
    pub fn boundary_point(&self, s: f64) -> (f64, f64) {
        let (w, d) = (self.width(), self.depth());
        let s = s.rem_euclid(2.0 * (w + d));
        if s <= w {
            (self.x_min + s, self.y_min)
        } else if s <= w + d {
            (self.x_max, self.y_min + (s - w))
        } else if s <= 2.0 * w + d {
            (self.x_max - (s - w - d), self.y_max)
        } else {
            (self.x_min, self.y_max - (s - 2.0 * w - d))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Mobility {
    /// Uniform heading and uniform speed, redrawn every slot.
    RandomRoam,
    /// Fixed drift of 4/5 of the top speed along `heading` plus a random
    /// component of at most 1/5 of the top speed.
    DirectionalWalk { heading: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UserState {
    pub id: usize,
    pub x: f64,
    pub y: f64,
    pub model: Mobility,
}

/// Displacement of a directional walker over one slot given its random
/// component (angle in radians, speed in m/s).
pub fn directional_displacement(
    heading: f64,
    v_max: f64,
    random_angle: f64,
    random_speed: f64,
    dt: f64,
) -> (f64, f64) {
    let drift = 0.8 * v_max;
    (
        (drift * heading.cos() + random_speed * random_angle.cos()) * dt,
        (drift * heading.sin() + random_speed * random_angle.sin()) * dt,
    )
}

pub fn step_user<R: Rng + ?Sized>(
    user: &UserState,
    area: &Area,
    v_max: f64,
    dt: f64,
    rng: &mut R,
) -> UserState {
    debug_assert!(dt > 0.0);
    // Both models draw exactly two numbers per slot.
    let angle = rng.random::<f64>() * TAU;
    let u = rng.random::<f64>();
    let (dx, dy) = match user.model {
        Mobility::RandomRoam => {
            let speed = u * v_max;
            (speed * angle.cos() * dt, speed * angle.sin() * dt)
        }
        Mobility::DirectionalWalk { heading } => {
            directional_displacement(heading, v_max, angle, u * 0.2 * v_max, dt)
        }
    };
    let (x, y) = area.clip_ground(user.x + dx, user.y + dy);
    UserState { x, y, ..*user }
}

/// The seven flight actions. Left/right move along x, forward/backward
/// along y, up/down along altitude.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MoveAction {
    Left,
    Right,
    Forward,
    Backward,
    Up,
    Down,
    Hover,
}

impl MoveAction {
    pub const ALL: [MoveAction; 7] = [
        MoveAction::Left,
        MoveAction::Right,
        MoveAction::Forward,
        MoveAction::Backward,
        MoveAction::Up,
        MoveAction::Down,
        MoveAction::Hover,
    ];

    pub fn is_vertical(self) -> bool {
        matches!(self, MoveAction::Up | MoveAction::Down)
    }

    /// Unit displacement along (x, y, h).
    pub fn direction(self) -> (f64, f64, f64) {
        match self {
            MoveAction::Left => (-1.0, 0.0, 0.0),
            MoveAction::Right => (1.0, 0.0, 0.0),
            MoveAction::Forward => (0.0, 1.0, 0.0),
            MoveAction::Backward => (0.0, -1.0, 0.0),
            MoveAction::Up => (0.0, 0.0, 1.0),
            MoveAction::Down => (0.0, 0.0, -1.0),
            MoveAction::Hover => (0.0, 0.0, 0.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UavState {
    pub id: usize,
    pub x: f64,
    pub y: f64,
    pub h: f64,
    /// Fixed cruise speed in m/s.
    pub speed: f64,
}

pub fn move_uav(uav: &UavState, action: MoveAction, area: &Area, dt: f64) -> UavState {
    let step = uav.speed * dt;
    let (dx, dy, dh) = action.direction();
    let (x, y) = area.clip_ground(uav.x + dx * step, uav.y + dy * step);
    let h = (uav.h + dh * step).clamp(area.h_min, area.h_max);
    UavState { x, y, h, ..*uav }
}
