//! Synthetic phantom standing in for the robot, probe and kidney phantom.
//!
//! Everything observable is a pure function of `(Phantom, SimConfig, ProbeFrame)`:
//! the rendered image, the contact wrench and the ground-truth label. The
//! transition function only depends on the current frame and the action.

mod demo;
mod oracle;
mod render;

use rand::Rng;

use crate::error::{Error, Result};
use crate::geometry::{apply_action, norm3, Action, ProbeFrame, Quaternion, Workspace};

pub use demo::{record_demonstration, DemoStep, Demonstration, Truncation};
pub use oracle::Oracle;
pub use render::{Image, BACKGROUND, TARGET_INTENSITY};

/// Tissue block with an embedded ellipsoidal target.
#[derive(Debug, Clone, PartialEq)]
pub struct Phantom {
    /// Height of the skin surface (meters); tissue occupies `z < surface_height`.
    pub surface_height: f64,
    pub target_center: [f64; 3],
    /// Ellipsoid semi-axes (meters).
    pub target_radii: [f64; 3],
    /// Contact spring constant (N/m).
    pub stiffness: f64,
    pub speckle_seed: u64,
}

impl Default for Phantom {
    fn default() -> Self {
        Self {
            surface_height: 0.0,
            target_center: [0.0, 0.0, -0.03],
            target_radii: [0.008, 0.006, 0.01],
            stiffness: 200.0,
            speckle_seed: 17,
        }
    }
}

impl Phantom {
    pub fn validate(&self) -> Result<()> {
        if !(self.target_center[2] < self.surface_height) {
            return Err(Error::InvalidConfig("target must lie below the surface".into()));
        }
        if self.target_radii.iter().any(|&r| !(r > 0.0)) || !(self.stiffness > 0.0) {
            return Err(Error::InvalidConfig("target radii and stiffness must be positive".into()));
        }
        Ok(())
    }

    pub fn penetration(&self, frame: &ProbeFrame) -> f64 {
        self.surface_height - frame.position[2]
    }
}

/// Environment constants that are not properties of the tissue.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub image_height: usize,
    pub image_width: usize,
    /// Half-width of the imaged area at the target plane (meters).
    pub fov_half_width: f64,
    /// Lateral tolerance for an acceptable state (meters).
    pub tau_pos: f64,
    /// Tilt tolerance for an acceptable state (radians).
    pub tau_ang: f64,
    /// Half-extent of the workspace box around the target center (meters).
    pub workspace_half_extent: f64,
    /// Per-step cap on the commanded translation (meters).
    pub step_cap: f64,
    /// Penetration the scripted guide regulates toward (meters).
    pub nominal_penetration: f64,
    /// Probe lever arm converting tilt into contact torque (meters).
    pub torque_lever: f64,
    /// Start annulus radii (meters).
    pub start_r_in: f64,
    pub start_r_out: f64,
    /// Start penetration range (meters).
    pub start_penetration: [f64; 2],
    /// Largest start tilt (radians).
    pub start_max_tilt: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            image_height: 64,
            image_width: 64,
            fov_half_width: 0.04,
            tau_pos: 0.005,
            tau_ang: 5f64.to_radians(),
            workspace_half_extent: 0.15,
            step_cap: 0.01,
            nominal_penetration: 0.005,
            torque_lever: 0.02,
            start_r_in: 0.01,
            start_r_out: 0.03,
            start_penetration: [0.003, 0.008],
            start_max_tilt: 10f64.to_radians(),
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if self.image_height < 8 || self.image_width < 8 {
            return bad("image must be at least 8x8");
        }
        if !(self.fov_half_width > 0.0 && self.tau_pos > 0.0 && self.tau_ang > 0.0) {
            return bad("field of view and tolerances must be positive");
        }
        if !(self.step_cap > 0.0 && self.workspace_half_extent > 0.0) {
            return bad("step cap and workspace must be positive");
        }
        if !(0.0 <= self.start_r_in && self.start_r_in <= self.start_r_out) {
            return bad("start annulus needs 0 <= r_in <= r_out");
        }
        if !(0.0 < self.start_penetration[0] && self.start_penetration[0] <= self.start_penetration[1]) {
            return bad("start penetration range must be positive and ordered");
        }
        if !(self.start_max_tilt >= 0.0) {
            return bad("start tilt bound must be non-negative");
        }
        Ok(())
    }

    /// Pixels per meter in the image plane.
    pub fn pixels_per_meter(&self) -> f64 {
        self.image_width as f64 / (2.0 * self.fov_half_width)
    }
}

/// Contact force (N) and torque (N·m) on the probe.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Wrench {
    pub force: [f64; 3],
    pub torque: [f64; 3],
}

impl Wrench {
    pub fn to_array(self) -> [f64; 6] {
        let f = self.force;
        let t = self.torque;
        [f[0], f[1], f[2], t[0], t[1], t[2]]
    }

    pub fn from_slice(a: &[f64]) -> Self {
        Self {
            force: [a[0], a[1], a[2]],
            torque: [a[3], a[4], a[5]],
        }
    }
}

/// Policy input. `position` is recorded alongside but must never reach the network.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub image: Image,
    pub position: [f64; 3],
    pub orientation: Quaternion,
    pub wrench: Wrench,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimState {
    pub frame: ProbeFrame,
    pub step_index: usize,
}

impl SimState {
    pub fn new(frame: ProbeFrame) -> Self {
        Self { frame, step_index: 0 }
    }
}

/// Immutable phantom plus environment constants.
#[derive(Debug, Clone, PartialEq)]
pub struct Simulator {
    pub phantom: Phantom,
    pub config: SimConfig,
}

impl Default for Simulator {
    fn default() -> Self {
        Self::new(Phantom::default(), SimConfig::default()).expect("default simulator is valid")
    }
}

impl Simulator {
    pub fn new(phantom: Phantom, config: SimConfig) -> Result<Self> {
        phantom.validate()?;
        config.validate()?;
        Ok(Self { phantom, config })
    }

    pub fn workspace(&self) -> Workspace {
        Workspace::centered(self.phantom.target_center, self.config.workspace_half_extent)
    }

    /// Spring contact: normal force `stiffness * penetration` along `+z`,
    /// torque `lever * |F| * tilt_vector`.
    pub fn contact_wrench(&self, frame: &ProbeFrame) -> Wrench {
        let pen = self.phantom.penetration(frame);
        if pen <= 0.0 {
            return Wrench::default();
        }
        let fn_ = self.phantom.stiffness * pen;
        let tv = frame.orientation.tilt_vector();
        let k = self.config.torque_lever * fn_;
        Wrench {
            force: [0.0, 0.0, fn_],
            torque: [k * tv[0], k * tv[1], k * tv[2]],
        }
    }

    /// Horizontal distance between the probe tip and the target center.
    pub fn lateral_offset(&self, frame: &ProbeFrame) -> f64 {
        let c = self.phantom.target_center;
        (frame.position[0] - c[0]).hypot(frame.position[1] - c[1])
    }

    /// 1 iff centered within `tau_pos`, upright within `tau_ang` and in contact.
    pub fn ground_truth_label(&self, frame: &ProbeFrame) -> u8 {
        let centered = self.lateral_offset(frame) < self.config.tau_pos;
        let upright = frame.orientation.tilt() < self.config.tau_ang;
        let contact = self.phantom.penetration(frame) > 0.0;
        u8::from(centered && upright && contact)
    }

    pub fn render_image(&self, frame: &ProbeFrame) -> Image {
        render::render(self, frame)
    }

    pub fn observe(&self, frame: &ProbeFrame) -> Observation {
        Observation {
            image: self.render_image(frame),
            position: frame.position,
            orientation: frame.orientation,
            wrench: self.contact_wrench(frame),
        }
    }

    /// Draws a start frame in the annulus around the target: radius uniform in
    /// `[r_in, r_out]`, uniform bearing, penetration uniform in the start range,
    /// and a tilt of uniform magnitude up to `start_max_tilt` about a random
    /// horizontal axis.
    pub fn sample_start<R: Rng + ?Sized>(&self, rng: &mut R) -> ProbeFrame {
        let cfg = &self.config;
        let c = self.phantom.target_center;
        let r = if cfg.start_r_out > cfg.start_r_in {
            rng.gen_range(cfg.start_r_in..=cfg.start_r_out)
        } else {
            cfg.start_r_in
        };
        let bearing = rng.gen_range(0.0..std::f64::consts::TAU);
        let [p_lo, p_hi] = cfg.start_penetration;
        let pen = if p_hi > p_lo { rng.gen_range(p_lo..=p_hi) } else { p_lo };
        let tilt_axis = rng.gen_range(0.0..std::f64::consts::TAU);
        let tilt = rng.gen_range(0.0..=1.0) * cfg.start_max_tilt;
        let orientation = Quaternion::from_axis_angle([tilt_axis.cos(), tilt_axis.sin(), 0.0], tilt)
            .expect("horizontal unit axis");
        let position = [
            c[0] + r * bearing.cos(),
            c[1] + r * bearing.sin(),
            self.phantom.surface_height - pen,
        ];
        ProbeFrame::new(self.workspace().clamp(position), orientation)
    }

    /// Transition `f_p`: caps the translation, applies the action within the
    /// workspace and observes the new frame.
    pub fn step(&self, state: &SimState, a: &Action) -> Result<(SimState, Observation)> {
        let next = self.transition(&state.frame, a)?;
        let obs = self.observe(&next);
        Ok((SimState { frame: next, step_index: state.step_index + 1 }, obs))
    }

    /// Frame part of [`Simulator::step`], without rendering.
    pub fn transition(&self, frame: &ProbeFrame, a: &Action) -> Result<ProbeFrame> {
        let capped = a.capped(self.config.step_cap);
        apply_action(frame, &capped, &self.workspace())
    }

    /// Distance between the probe tip and the pose the guide steers toward.
    pub fn distance_to_goal(&self, frame: &ProbeFrame) -> f64 {
        let g = self.goal_position();
        norm3([
            frame.position[0] - g[0],
            frame.position[1] - g[1],
            frame.position[2] - g[2],
        ])
    }

    /// Centered over the target at nominal penetration.
    pub fn goal_position(&self) -> [f64; 3] {
        let c = self.phantom.target_center;
        [c[0], c[1], self.phantom.surface_height - self.config.nominal_penetration]
    }
}
