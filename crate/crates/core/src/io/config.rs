use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::guided::{EvalCriteria, GuidanceConfig};
use crate::nn::OptimizerKind;
use crate::policy::ArchConfig;
use crate::sim::{Oracle, Phantom, SimConfig, Truncation};
use crate::train::TrainConfig;

/// Evaluation rollouts: episode `e` starts from `seed + e`.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalConfig {
    pub episodes: usize,
    pub max_steps: usize,
    pub seed: u64,
    pub criteria: EvalCriteria,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self { episodes: 50, max_steps: 40, seed: 5000, criteria: EvalCriteria::default() }
    }
}

/// Everything one pipeline run needs. Stage seeds derive from `seed`.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub out_dir: PathBuf,
    pub episodes: usize,
    pub truncation: Truncation,
    pub demo_max_steps: usize,
    pub phantom: Phantom,
    pub sim: SimConfig,
    pub oracle: Oracle,
    pub arch: ArchConfig,
    pub bc: TrainConfig,
    /// Defaults to 200 epochs; the classifier is still improving at 50.
    pub quality: TrainConfig,
    pub guidance: GuidanceConfig,
    pub eval: EvalConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            out_dir: PathBuf::from("runs"),
            episodes: 100,
            truncation: Truncation::Truncated,
            demo_max_steps: 200,
            phantom: Phantom::default(),
            sim: SimConfig::default(),
            oracle: Oracle::default(),
            arch: ArchConfig::default(),
            bc: TrainConfig::default(),
            quality: TrainConfig { epochs: 200, ..TrainConfig::default() },
            guidance: GuidanceConfig::default(),
            eval: EvalConfig::default(),
        }
    }
}

trait Value: Sized {
    fn show(&self) -> String;
    fn read(s: &str) -> Option<Self>;
}

macro_rules! from_str_value {
    ($($t:ty),*) => {$(
        impl Value for $t {
            fn show(&self) -> String {
                self.to_string()
            }
            fn read(s: &str) -> Option<Self> {
                s.parse().ok()
            }
        }
    )*};
}
from_str_value!(f64, usize, u64, bool);

impl<const N: usize> Value for [f64; N] {
    fn show(&self) -> String {
        self.iter().map(f64::to_string).collect::<Vec<_>>().join(", ")
    }
    fn read(s: &str) -> Option<Self> {
        let parts: Vec<f64> = s.split(',').map(|p| p.trim().parse().ok()).collect::<Option<_>>()?;
        parts.try_into().ok()
    }
}

impl Value for OptimizerKind {
    fn show(&self) -> String {
        self.as_str().to_string()
    }
    fn read(s: &str) -> Option<Self> {
        OptimizerKind::parse(s)
    }
}

impl Value for Truncation {
    fn show(&self) -> String {
        match self {
            Truncation::Truncated => "truncated".into(),
            Truncation::Hold(n) => format!("hold:{n}"),
        }
    }
    fn read(s: &str) -> Option<Self> {
        match s {
            "truncated" => Some(Truncation::Truncated),
            _ => s.strip_prefix("hold:")?.parse().ok().map(Truncation::Hold),
        }
    }
}

impl Value for PathBuf {
    fn show(&self) -> String {
        self.to_string_lossy().into_owned()
    }
    fn read(s: &str) -> Option<Self> {
        Some(PathBuf::from(s))
    }
}

// One table drives both directions, so every key written is a key accepted.
macro_rules! run_config_keys {
    ($m:ident) => {
        $m! {
            "seed" => seed,
            "out_dir" => out_dir,
            "episodes" => episodes,
            "demo.truncation" => truncation,
            "demo.max_steps" => demo_max_steps,
            "phantom.surface_height" => phantom.surface_height,
            "phantom.target_center" => phantom.target_center,
            "phantom.target_radii" => phantom.target_radii,
            "phantom.stiffness" => phantom.stiffness,
            "phantom.speckle_seed" => phantom.speckle_seed,
            "sim.image_height" => sim.image_height,
            "sim.image_width" => sim.image_width,
            "sim.fov_half_width" => sim.fov_half_width,
            "sim.tau_pos" => sim.tau_pos,
            "sim.tau_ang" => sim.tau_ang,
            "sim.workspace_half_extent" => sim.workspace_half_extent,
            "sim.step_cap" => sim.step_cap,
            "sim.nominal_penetration" => sim.nominal_penetration,
            "sim.torque_lever" => sim.torque_lever,
            "sim.start_r_in" => sim.start_r_in,
            "sim.start_r_out" => sim.start_r_out,
            "sim.start_penetration" => sim.start_penetration,
            "sim.start_max_tilt" => sim.start_max_tilt,
            "oracle.k_pos" => oracle.k_pos,
            "oracle.k_ori" => oracle.k_ori,
            "oracle.pos_cap" => oracle.pos_cap,
            "oracle.ori_cap" => oracle.ori_cap,
            "arch.image_height" => arch.image_height,
            "arch.image_width" => arch.image_width,
            "arch.conv1_channels" => arch.conv1_channels,
            "arch.conv2_channels" => arch.conv2_channels,
            "arch.kernel" => arch.kernel,
            "arch.stride" => arch.stride,
            "arch.feature_dim" => arch.feature_dim,
            "arch.encoder_hidden" => arch.encoder_hidden,
            "arch.action_hidden" => arch.action_hidden,
            "arch.quality_hidden" => arch.quality_hidden,
            "bc.learning_rate" => bc.learning_rate,
            "bc.epochs" => bc.epochs,
            "bc.batch_size" => bc.batch_size,
            "bc.split_ratio" => bc.split_ratio,
            "bc.optimizer" => bc.optimizer,
            "quality.learning_rate" => quality.learning_rate,
            "quality.epochs" => quality.epochs,
            "quality.batch_size" => quality.batch_size,
            "quality.split_ratio" => quality.split_ratio,
            "quality.optimizer" => quality.optimizer,
            "quality.class_weighted" => quality.class_weighted,
            "guidance.reward_threshold" => guidance.reward_threshold,
            "guidance.epochs" => guidance.epochs,
            "guidance.rollouts_per_epoch" => guidance.rollouts_per_epoch,
            "guidance.max_steps" => guidance.max_steps,
            "guidance.learning_rate" => guidance.learning_rate,
            "guidance.optimizer" => guidance.optimizer,
            "guidance.batch_size" => guidance.batch_size,
            "guidance.updates_per_epoch" => guidance.updates_per_epoch,
            "guidance.buffer_capacity" => guidance.buffer_capacity,
            "guidance.train_front" => guidance.train_front,
            "eval.episodes" => eval.episodes,
            "eval.max_steps" => eval.max_steps,
            "eval.seed" => eval.seed,
            "eval.window" => eval.criteria.window,
            "eval.high" => eval.criteria.high,
            "eval.low" => eval.criteria.low,
        }
    };
}

macro_rules! emit {
    ($($key:literal => $($f:ident).+,)*) => {
        fn pairs(&self) -> Vec<(&'static str, String)> {
            vec![$(($key, Value::show(&self.$($f).+)),)*]
        }

        fn set(&mut self, key: &str, value: &str) -> Result<()> {
            match key {
                $($key => {
                    self.$($f).+ = Value::read(value)
                        .ok_or_else(|| Error::InvalidConfig(format!("bad value for {key}: {value:?}")))?;
                })*
                _ => return Err(Error::InvalidConfig(format!("unknown key {key:?}"))),
            }
            Ok(())
        }
    };
}

impl RunConfig {
    run_config_keys!(emit);

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (k, v) in self.pairs() {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }

    /// Starts from the defaults and applies every `key = value` line.
    /// Blank lines and `#` comments are ignored.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::InvalidConfig(format!("line {}: expected key = value", n + 1)))?;
            cfg.set(k.trim(), v.trim())?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path).map_err(|e| super::with_path(e, path))?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| super::with_path(e, path))?;
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.phantom.validate()?;
        self.sim.validate()?;
        self.arch.validate()?;
        self.bc.validate()?;
        self.quality.validate()?;
        self.guidance.validate()?;
        if (self.sim.image_height, self.sim.image_width) != (self.arch.image_height, self.arch.image_width) {
            return Err(Error::InvalidConfig("simulator and network image sizes differ".into()));
        }
        let o = &self.oracle;
        if !(o.k_pos > 0.0 && o.k_pos <= 1.0 && o.k_ori > 0.0 && o.k_ori <= 1.0 && o.pos_cap > 0.0 && o.ori_cap > 0.0) {
            return Err(Error::InvalidConfig("oracle gains must lie in (0, 1] and caps must be positive".into()));
        }
        if self.demo_max_steps == 0 || self.eval.max_steps == 0 || self.eval.criteria.window == 0 {
            return Err(Error::InvalidConfig("step budgets and the success window must be positive".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_round_trip_is_lossless() {
        let mut c = RunConfig::default();
        c.bc.learning_rate = 0.1 + 0.2;
        c.guidance.reward_threshold = f64::NEG_INFINITY;
        c.truncation = Truncation::Hold(7);
        c.phantom.target_center = [1e-17, -0.0, 3.0];
        c.quality.optimizer = OptimizerKind::Adam;
        let back = RunConfig::parse(&c.to_text()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.to_text(), c.to_text());
    }

    #[test]
    fn unknown_keys_and_bad_values_are_rejected() {
        assert!(matches!(RunConfig::parse("nope = 1"), Err(Error::InvalidConfig(_))));
        assert!(matches!(RunConfig::parse("bc.epochs = many"), Err(Error::InvalidConfig(_))));
        assert!(matches!(RunConfig::parse("just words"), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn comments_and_partial_files_fall_back_to_defaults() {
        let c = RunConfig::parse("# desk run\n\nepisodes = 12\n").unwrap();
        assert_eq!(c, RunConfig { episodes: 12, ..RunConfig::default() });
    }

    #[test]
    fn defaults_validate() {
        RunConfig::default().validate().unwrap();
        let mut c = RunConfig::default();
        c.sim.image_height = 32;
        assert!(c.validate().is_err());
    }
}
