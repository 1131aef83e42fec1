//! Stage wiring shared by the command line and the test suites. Every stage
//! is a pure function of its inputs and the run configuration.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::guided::{post_optimize, rollout_eval, ConfidenceSource, EvalSummary, GuidanceReport};
use crate::io::RunConfig;
use crate::policy::PolicyParams;
use crate::sim::{record_demonstration, Simulator};
use crate::train::{split_dataset, train_bc, train_quality, Dataset, TrainConfig, TrainReport};

pub fn simulator(cfg: &RunConfig) -> Result<Simulator> {
    Simulator::new(cfg.phantom.clone(), cfg.sim.clone())
}

/// Episode `e` is recorded from the generator seeded with `seed + e`.
pub fn generate_dataset(cfg: &RunConfig) -> Result<Dataset> {
    let sim = simulator(cfg)?;
    let demos = (0..cfg.episodes as u64)
        .map(|e| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(e));
            record_demonstration(&sim, &cfg.oracle, &mut rng, cfg.truncation, cfg.demo_max_steps)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Dataset::from_demonstrations(&demos))
}

fn seeded(t: &TrainConfig, seed: u64) -> TrainConfig {
    TrainConfig { seed, ..*t }
}

/// Splits `data`, initializes a fresh policy and clones the demonstrated actions.
pub fn behavior_cloning(cfg: &RunConfig, data: &Dataset) -> Result<(PolicyParams, TrainReport, Dataset)> {
    let bc = seeded(&cfg.bc, cfg.seed);
    let (train, val) = split_dataset(data, bc.split_ratio, bc.seed)?;
    let params = PolicyParams::init(cfg.arch, cfg.seed)?;
    let (params, report) = train_bc(params, &train, &val, &bc)?;
    Ok((params, report, val))
}

pub fn quality(cfg: &RunConfig, params: PolicyParams, data: &Dataset) -> Result<(PolicyParams, TrainReport)> {
    train_quality(params, data, &seeded(&cfg.quality, cfg.seed))
}

pub fn post_optimization(cfg: &RunConfig, params: PolicyParams) -> Result<(PolicyParams, GuidanceReport)> {
    post_optimize(params, &simulator(cfg)?, &cfg.oracle, &cfg.guidance, cfg.seed)
}

/// Rolls the policy on the configured evaluation seeds, scoring with its own quality head.
pub fn evaluate(cfg: &RunConfig, params: &PolicyParams) -> Result<EvalSummary> {
    let e = &cfg.eval;
    rollout_eval(params, &ConfidenceSource::Learned(params), &simulator(cfg)?, e.episodes, e.max_steps, e.seed, &e.criteria)
}

/// The scripted guide on the evaluation seeds, scored by `confidence`.
pub fn evaluate_oracle(cfg: &RunConfig, confidence: &ConfidenceSource<'_>) -> Result<EvalSummary> {
    let e = &cfg.eval;
    rollout_eval(&cfg.oracle, confidence, &simulator(cfg)?, e.episodes, e.max_steps, e.seed, &e.criteria)
}
