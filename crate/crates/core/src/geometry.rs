//! Probe pose arithmetic and the action algebra of the scanning MDP.
//!
//! Actions carry a raw componentwise quaternion difference. Applying an
//! action adds that difference to the current orientation and renormalizes,
//! so `apply_action(f, action_between(f, g)) == g` for unit orientations.

use std::ops::{Add, Sub};

use crate::error::{Error, Result};

/// Inputs with norm at or below this are rejected by [`quat_normalize`].
pub const DEGENERATE_NORM: f64 = 1e-12;

/// Quaternion stored as `(w, x, y, z)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quaternion {
    pub w: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Quaternion {
    pub const IDENTITY: Self = Self { w: 1.0, x: 0.0, y: 0.0, z: 0.0 };

    pub const fn new(w: f64, x: f64, y: f64, z: f64) -> Self {
        Self { w, x, y, z }
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        Self::new(a[0], a[1], a[2], a[3])
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.w, self.x, self.y, self.z]
    }

    /// Unit quaternion for a rotation of `angle` radians about `axis`.
    pub fn from_axis_angle(axis: [f64; 3], angle: f64) -> Result<Self> {
        let n = norm3(axis);
        if n <= DEGENERATE_NORM {
            return Err(Error::DegenerateQuaternion { norm: n });
        }
        let (s, c) = (angle / 2.0).sin_cos();
        Ok(Self::new(c, s * axis[0] / n, s * axis[1] / n, s * axis[2] / n))
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn dot(self, o: Self) -> f64 {
        self.w * o.w + self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn scale(self, s: f64) -> Self {
        Self::new(self.w * s, self.x * s, self.y * s, self.z * s)
    }

    pub fn is_unit(self) -> bool {
        (self.norm() - 1.0).abs() <= 1e-9
    }

    /// Rotates `v` by this (assumed unit) quaternion.
    pub fn rotate(self, v: [f64; 3]) -> [f64; 3] {
        let Self { w, x, y, z } = self;
        [
            (1.0 - 2.0 * (y * y + z * z)) * v[0] + 2.0 * (x * y - w * z) * v[1] + 2.0 * (x * z + w * y) * v[2],
            2.0 * (x * y + w * z) * v[0] + (1.0 - 2.0 * (x * x + z * z)) * v[1] + 2.0 * (y * z - w * x) * v[2],
            2.0 * (x * z - w * y) * v[0] + 2.0 * (y * z + w * x) * v[1] + (1.0 - 2.0 * (x * x + y * y)) * v[2],
        ]
    }

    /// Angle in radians between the rotated `+z` axis and the world `+z` axis.
    pub fn tilt(self) -> f64 {
        let axis = self.rotate([0.0, 0.0, 1.0]);
        axis[2].clamp(-1.0, 1.0).acos()
    }

    /// Rotation vector (axis times angle) of the swing that tips world `+z`
    /// onto the probe axis. Always horizontal.
    pub fn tilt_vector(self) -> [f64; 3] {
        let a = self.rotate([0.0, 0.0, 1.0]);
        // e_z x a
        let c = [-a[1], a[0], 0.0];
        let s = norm3(c);
        if s <= DEGENERATE_NORM {
            return [0.0; 3];
        }
        let angle = s.atan2(a[2]);
        [c[0] / s * angle, c[1] / s * angle, 0.0]
    }
}

impl Add for Quaternion {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.w + o.w, self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for Quaternion {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::new(self.w - o.w, self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

/// Scales `q` to unit length.
pub fn quat_normalize(q: Quaternion) -> Result<Quaternion> {
    let n = q.norm();
    if !(n > DEGENERATE_NORM) {
        return Err(Error::DegenerateQuaternion { norm: n });
    }
    Ok(q.scale(1.0 / n))
}

pub fn norm3(v: [f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

/// Axis-aligned bounding box for probe positions, in meters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Workspace {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl Workspace {
    pub fn centered(center: [f64; 3], half_extent: f64) -> Self {
        Self {
            min: center.map(|c| c - half_extent),
            max: center.map(|c| c + half_extent),
        }
    }

    pub fn clamp(&self, p: [f64; 3]) -> [f64; 3] {
        [
            p[0].clamp(self.min[0], self.max[0]),
            p[1].clamp(self.min[1], self.max[1]),
            p[2].clamp(self.min[2], self.max[2]),
        ]
    }

    pub fn contains(&self, p: [f64; 3]) -> bool {
        (0..3).all(|i| p[i] >= self.min[i] && p[i] <= self.max[i])
    }
}

/// Probe position (meters) and unit orientation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeFrame {
    pub position: [f64; 3],
    pub orientation: Quaternion,
}

impl ProbeFrame {
    pub fn new(position: [f64; 3], orientation: Quaternion) -> Self {
        Self { position, orientation }
    }
}

/// Position step `dp` and raw quaternion component difference `d_o`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Action {
    pub dp: [f64; 3],
    pub d_o: [f64; 4],
}

impl Action {
    pub const ZERO: Self = Self { dp: [0.0; 3], d_o: [0.0; 4] };

    pub fn to_array(self) -> [f64; 7] {
        let mut a = [0.0; 7];
        a[..3].copy_from_slice(&self.dp);
        a[3..].copy_from_slice(&self.d_o);
        a
    }

    pub fn from_slice(a: &[f64]) -> Self {
        Self {
            dp: [a[0], a[1], a[2]],
            d_o: [a[3], a[4], a[5], a[6]],
        }
    }

    pub fn is_zero(&self) -> bool {
        self.to_array().iter().all(|&v| v == 0.0)
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }

    /// Rescales `dp` so its norm does not exceed `cap`; `d_o` is left alone.
    pub fn capped(mut self, cap: f64) -> Self {
        let n = norm3(self.dp);
        if n > cap {
            let s = cap / n;
            self.dp = self.dp.map(|v| v * s);
        }
        self
    }
}

/// Action carrying `prev` onto `next`.
pub fn action_between(prev: &ProbeFrame, next: &ProbeFrame) -> Action {
    let dq = next.orientation - prev.orientation;
    Action {
        dp: [
            next.position[0] - prev.position[0],
            next.position[1] - prev.position[1],
            next.position[2] - prev.position[2],
        ],
        d_o: dq.to_array(),
    }
}

/// Deterministic frame transition: translate, clamp into `workspace`,
/// add the quaternion difference and renormalize.
pub fn apply_action(frame: &ProbeFrame, a: &Action, workspace: &Workspace) -> Result<ProbeFrame> {
    let moved = [
        frame.position[0] + a.dp[0],
        frame.position[1] + a.dp[1],
        frame.position[2] + a.dp[2],
    ];
    let raw = frame.orientation + Quaternion::from_array(a.d_o);
    let orientation = if a.d_o == [0.0; 4] && frame.orientation.is_unit() {
        frame.orientation
    } else {
        quat_normalize(raw)?
    };
    Ok(ProbeFrame {
        position: workspace.clamp(moved),
        orientation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ws() -> Workspace {
        Workspace { min: [-1.0; 3], max: [1.0; 3] }
    }

    #[test]
    fn normalize_examples() {
        let q = quat_normalize(Quaternion::new(2.0, 0.0, 0.0, 0.0)).unwrap();
        assert_eq!(q, Quaternion::IDENTITY);
        let q = quat_normalize(Quaternion::new(1.0, 1.0, 1.0, 1.0)).unwrap();
        assert_eq!(q, Quaternion::new(0.5, 0.5, 0.5, 0.5));
        assert!(matches!(
            quat_normalize(Quaternion::new(0.0, 0.0, 0.0, 0.0)),
            Err(Error::DegenerateQuaternion { .. })
        ));
        assert!(quat_normalize(Quaternion::new(1e-13, 0.0, 0.0, 0.0)).is_err());
    }

    #[test]
    fn action_between_examples() {
        let a = ProbeFrame::new([0.0; 3], Quaternion::IDENTITY);
        let b = ProbeFrame::new([1.0, 2.0, 3.0], Quaternion::IDENTITY);
        let act = action_between(&a, &b);
        assert_eq!(act.dp, [1.0, 2.0, 3.0]);
        assert_eq!(act.d_o, [0.0; 4]);
        assert!(action_between(&b, &b).is_zero());

        let c = ProbeFrame::new([0.0; 3], Quaternion::new(0.9239, 0.3827, 0.0, 0.0));
        let act = action_between(&a, &c);
        assert!((act.d_o[0] + 0.0761).abs() < 1e-12);
        assert!((act.d_o[1] - 0.3827).abs() < 1e-12);
        assert_eq!(&act.d_o[2..], &[0.0, 0.0]);
    }

    #[test]
    fn apply_zero_action_is_identity() {
        let q = quat_normalize(Quaternion::new(0.9, 0.1, -0.2, 0.05)).unwrap();
        let f = ProbeFrame::new([0.1, -0.3, 0.2], q);
        assert_eq!(apply_action(&f, &Action::ZERO, &ws()).unwrap(), f);
    }

    #[test]
    fn apply_action_clamps_to_box() {
        let f = ProbeFrame::new([0.9, 0.0, 0.0], Quaternion::IDENTITY);
        let a = Action { dp: [0.5, 0.0, 0.0], d_o: [0.0; 4] };
        let g = apply_action(&f, &a, &ws()).unwrap();
        assert_eq!(g.position, [1.0, 0.0, 0.0]);
    }

    #[test]
    fn apply_action_rejects_cancelling_orientation() {
        let f = ProbeFrame::new([0.0; 3], Quaternion::IDENTITY);
        let a = Action { dp: [0.0; 3], d_o: [-1.0, 0.0, 0.0, 0.0] };
        assert!(matches!(apply_action(&f, &a, &ws()), Err(Error::DegenerateQuaternion { .. })));
    }

    #[test]
    fn tilt_about_x() {
        let q = Quaternion::from_axis_angle([1.0, 0.0, 0.0], 10f64.to_radians()).unwrap();
        assert!((q.tilt() - 10f64.to_radians()).abs() < 1e-12);
        let v = q.tilt_vector();
        assert!((v[0] - 10f64.to_radians()).abs() < 1e-12);
        assert!(v[1].abs() < 1e-15);
        // yaw alone is not tilt
        let yaw = Quaternion::from_axis_angle([0.0, 0.0, 1.0], 0.7).unwrap();
        assert!(yaw.tilt() < 1e-7);
    }

    #[test]
    fn capped_limits_translation_only() {
        let a = Action { dp: [0.03, 0.04, 0.0], d_o: [0.1, 0.0, 0.0, 0.0] }.capped(0.01);
        assert!((norm3(a.dp) - 0.01).abs() < 1e-15);
        assert_eq!(a.d_o[0], 0.1);
    }
}
