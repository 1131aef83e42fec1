//! Stage two: guided post-optimization and evaluation rollouts.
//!
//! The learned policy is rolled out unchanged. Whenever its action does not
//! raise the predicted state quality by at least the threshold, the scripted
//! guide is asked for an alternative and the higher-reward candidate is
//! stored as a regression target. The front network and action head are then
//! fine-tuned on the stored pairs.

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geometry::{action_between, Action, ProbeFrame, Quaternion};
use crate::nn::{Optimizer, OptimizerKind};
use crate::policy::{PolicyInput, PolicyParams};
use crate::sim::{Observation, Oracle, SimState, Simulator, Wrench};
use crate::train::{action_step, param_checksum};

/// Rewards closer than this are treated as tied.
pub const TIE_TOLERANCE: f64 = 1e-12;

/// `q(f_p(s, a)) - q(s)`, with the transition evaluated hypothetically.
pub fn reward(params: &PolicyParams, sim: &Simulator, state: &SimState, a: &Action) -> Result<f64> {
    let now = params.quality(&sim.observe(&state.frame))?.value();
    reward_from(params, sim, state, a, now)
}

fn reward_from(params: &PolicyParams, sim: &Simulator, state: &SimState, a: &Action, q_now: f64) -> Result<f64> {
    let next = sim.transition(&state.frame, a)?;
    Ok(params.quality(&sim.observe(&next))?.value() - q_now)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Chosen {
    Model,
    Guide,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Selection {
    pub action: Action,
    pub chosen: Chosen,
    pub model_reward: f64,
    pub guide_reward: f64,
}

impl Selection {
    pub fn chosen_reward(&self) -> f64 {
        match self.chosen {
            Chosen::Model => self.model_reward,
            Chosen::Guide => self.guide_reward,
        }
    }
}

/// Picks the higher-reward action between the policy's own and `guide_action`.
/// Ties go to the policy.
pub fn select_target_action(params: &PolicyParams, sim: &Simulator, state: &SimState, guide_action: &Action) -> Result<Selection> {
    let obs = sim.observe(&state.frame);
    let (model_action, q) = params.act_and_quality(&obs)?;
    select_between(params, sim, state, model_action, *guide_action, q.value())
}

fn select_between(
    params: &PolicyParams,
    sim: &Simulator,
    state: &SimState,
    model_action: Action,
    guide_action: Action,
    q_now: f64,
) -> Result<Selection> {
    let model_reward = reward_from(params, sim, state, &model_action, q_now)?;
    let guide_reward = if guide_action == model_action {
        model_reward
    } else {
        reward_from(params, sim, state, &guide_action, q_now)?
    };
    let chosen = if guide_reward - model_reward > TIE_TOLERANCE { Chosen::Guide } else { Chosen::Model };
    let action = match chosen {
        Chosen::Model => model_action,
        Chosen::Guide => guide_action,
    };
    Ok(Selection { action, chosen, model_reward, guide_reward })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GuidanceConfig {
    /// Guidance is requested when the policy's reward falls below this.
    pub reward_threshold: f64,
    pub epochs: usize,
    pub rollouts_per_epoch: usize,
    pub max_steps: usize,
    pub learning_rate: f64,
    pub optimizer: OptimizerKind,
    pub batch_size: usize,
    /// Minibatch updates after each epoch's rollouts (fewer when the buffer is small).
    pub updates_per_epoch: usize,
    pub buffer_capacity: usize,
    /// Also fine-tune the front network. Off keeps the quality head's
    /// input features, and therefore the reward, fixed.
    pub train_front: bool,
}

impl Default for GuidanceConfig {
    fn default() -> Self {
        Self {
            reward_threshold: 0.0,
            epochs: 200,
            rollouts_per_epoch: 4,
            max_steps: 40,
            learning_rate: 0.001,
            optimizer: OptimizerKind::Sgd,
            batch_size: 32,
            updates_per_epoch: 4,
            buffer_capacity: 4096,
            train_front: false,
        }
    }
}

impl GuidanceConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.max_steps == 0 {
            return Err(Error::InvalidConfig("guidance needs epochs >= 1 and max_steps >= 1".into()));
        }
        if self.batch_size == 0 || self.buffer_capacity == 0 {
            return Err(Error::InvalidConfig("batch size and buffer capacity must be positive".into()));
        }
        if self.reward_threshold.is_nan() || !(self.learning_rate >= 0.0) {
            return Err(Error::InvalidConfig("invalid threshold or learning rate".into()));
        }
        Ok(())
    }
}

/// Relabeled pair with the rewards seen when it was inserted.
#[derive(Debug, Clone)]
pub struct Relabel {
    pub input: PolicyInput,
    pub target: Action,
    pub chosen: Chosen,
    pub stored_reward: f64,
    pub model_reward: f64,
}

/// Bounded FIFO of relabeled pairs.
#[derive(Debug, Clone)]
pub struct AggregationBuffer {
    capacity: usize,
    items: VecDeque<Relabel>,
}

impl AggregationBuffer {
    pub fn new(capacity: usize) -> Self {
        Self { capacity, items: VecDeque::with_capacity(capacity.min(1 << 16)) }
    }

    pub fn push(&mut self, r: Relabel) {
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back(r);
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn iter(&self) -> impl Iterator<Item = &Relabel> {
        self.items.iter()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GuidanceEpoch {
    pub epoch: usize,
    pub steps: usize,
    pub guidance_requests: usize,
    pub guide_chosen: usize,
    pub buffer_len: usize,
    pub updates: usize,
    /// Mean minibatch loss of this epoch's updates (0 without updates).
    pub train_loss: f64,
    /// Mean of q over rollout steps.
    pub mean_confidence: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GuidanceReport {
    pub epochs: Vec<GuidanceEpoch>,
    pub checksum: u32,
    /// Every insertion satisfied `stored_reward >= model_reward`.
    pub selection_invariant_held: bool,
}

/// Seed of rollout `index` in `epoch` derived from the master seed.
fn rollout_seed(seed: u64, epoch: usize, index: usize) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add((epoch as u64) << 20)
        .wrapping_add(index as u64)
}

/// One rollout of the policy's own actions.
#[derive(Debug, Clone)]
pub struct GuidedEpisode {
    /// Start frame followed by the frame after every step.
    pub frames: Vec<ProbeFrame>,
    /// Pairs relabeled where the policy's reward fell below the threshold.
    pub relabels: Vec<Relabel>,
    /// Sum of q over the steps taken.
    pub confidence_sum: f64,
}

/// Rolls the policy from `start` for `cfg.max_steps` steps. With `probe`
/// set, rewards are evaluated on hypothetical transitions and low-reward
/// steps are relabeled; the executed actions are the policy's either way.
pub fn guided_rollout(
    params: &PolicyParams,
    sim: &Simulator,
    guide: &Oracle,
    cfg: &GuidanceConfig,
    start: ProbeFrame,
    probe: bool,
) -> Result<GuidedEpisode> {
    let mut state = SimState::new(start);
    let mut ep = GuidedEpisode { frames: vec![start], relabels: Vec::new(), confidence_sum: 0.0 };
    for _ in 0..cfg.max_steps {
        let obs = sim.observe(&state.frame);
        let (model_action, q) = params.act_and_quality(&obs)?;
        ep.confidence_sum += q.value();
        if probe {
            let model_reward = reward_from(params, sim, &state, &model_action, q.value())?;
            if model_reward < cfg.reward_threshold {
                let guide_action = guide.action(sim, &state);
                let sel = select_between(params, sim, &state, model_action, guide_action, q.value())?;
                let next = sim.transition(&state.frame, &sel.action)?;
                ep.relabels.push(Relabel {
                    input: params.input(&obs)?,
                    target: action_between(&state.frame, &next),
                    chosen: sel.chosen,
                    stored_reward: sel.chosen_reward(),
                    model_reward: sel.model_reward,
                });
            }
        }
        state = sim.step(&state, &model_action)?.0;
        ep.frames.push(state.frame);
    }
    Ok(ep)
}

/// Guided post-optimization. Requires a trained quality head.
pub fn post_optimize(
    mut params: PolicyParams,
    sim: &Simulator,
    guide: &Oracle,
    cfg: &GuidanceConfig,
    seed: u64,
) -> Result<(PolicyParams, GuidanceReport)> {
    cfg.validate()?;
    if !params.stages.quality_trained {
        return Err(Error::ConfigMismatch("post-optimization needs a trained quality head".into()));
    }
    let mut buffer = AggregationBuffer::new(cfg.buffer_capacity);
    let mut opt = Optimizer::new(cfg.optimizer, cfg.learning_rate);
    let mut batch_rng = ChaCha8Rng::seed_from_u64(seed ^ 0xB0B);
    let mut epochs = Vec::with_capacity(cfg.epochs);
    let mut invariant = true;

    for epoch in 1..=cfg.epochs {
        let mut log = GuidanceEpoch {
            epoch,
            steps: 0,
            guidance_requests: 0,
            guide_chosen: 0,
            buffer_len: 0,
            updates: 0,
            train_loss: 0.0,
            mean_confidence: 0.0,
        };
        let mut q_sum = 0.0;
        for r in 0..cfg.rollouts_per_epoch {
            let mut rng = ChaCha8Rng::seed_from_u64(rollout_seed(seed, epoch, r));
            let ep = guided_rollout(&params, sim, guide, cfg, sim.sample_start(&mut rng), true)?;
            log.steps += ep.frames.len() - 1;
            log.guidance_requests += ep.relabels.len();
            q_sum += ep.confidence_sum;
            for rl in ep.relabels {
                if rl.chosen == Chosen::Guide {
                    log.guide_chosen += 1;
                }
                invariant &= rl.stored_reward >= rl.model_reward - TIE_TOLERANCE;
                buffer.push(rl);
            }
        }
        log.mean_confidence = if log.steps > 0 { q_sum / log.steps as f64 } else { 0.0 };
        log.buffer_len = buffer.len();

        if !buffer.is_empty() {
            let updates = cfg.updates_per_epoch.min(buffer.len().div_ceil(cfg.batch_size));
            let mut loss_sum = 0.0;
            for _ in 0..updates {
                let n = cfg.batch_size.min(buffer.len());
                let picks: Vec<usize> = (0..n).map(|_| batch_rng.gen_range(0..buffer.len())).collect();
                let targets: Vec<Vec<f64>> =
                    picks.iter().map(|&i| params.norm.action.apply(&buffer.items[i].target.to_array())).collect();
                let inputs: Vec<&PolicyInput> = picks.iter().map(|&i| &buffer.items[i].input).collect();
                let ts: Vec<&[f64]> = targets.iter().map(Vec::as_slice).collect();
                let l = action_step(&mut params, &mut opt, &inputs, &ts, cfg.train_front)?;
                if !l.is_finite() {
                    return Err(Error::DivergenceDetected { epoch, loss: l });
                }
                loss_sum += l;
            }
            log.updates = updates;
            log.train_loss = if updates > 0 { loss_sum / updates as f64 } else { 0.0 };
        }
        epochs.push(log);
    }
    let checksum = param_checksum(&params);
    Ok((params, GuidanceReport { epochs, checksum, selection_invariant_held: invariant }))
}

/// Anything that maps an observed state to an action.
pub trait Policy {
    fn act(&self, sim: &Simulator, state: &SimState, obs: &Observation) -> Result<Action>;
}

impl Policy for PolicyParams {
    fn act(&self, _sim: &Simulator, _state: &SimState, obs: &Observation) -> Result<Action> {
        self.predict_action(obs)
    }
}

impl Policy for Oracle {
    fn act(&self, sim: &Simulator, state: &SimState, _obs: &Observation) -> Result<Action> {
        Ok(self.action(sim, state))
    }
}

/// Never moves.
pub struct StillPolicy;

impl Policy for StillPolicy {
    fn act(&self, _: &Simulator, _: &SimState, _: &Observation) -> Result<Action> {
        Ok(Action::ZERO)
    }
}

/// Source of the confidence recorded during evaluation.
pub enum ConfidenceSource<'a> {
    Learned(&'a PolicyParams),
    /// Uses the ground-truth label as a 0/1 confidence.
    GroundTruth,
}

impl ConfidenceSource<'_> {
    fn confidence(&self, sim: &Simulator, frame: &ProbeFrame, obs: &Observation) -> Result<f64> {
        match self {
            ConfidenceSource::Learned(p) => Ok(p.quality(obs)?.value()),
            ConfidenceSource::GroundTruth => Ok(f64::from(sim.ground_truth_label(frame))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalCriteria {
    pub window: usize,
    pub high: f64,
    pub low: f64,
}

impl Default for EvalCriteria {
    fn default() -> Self {
        Self { window: 10, high: 0.8, low: 0.2 }
    }
}

/// One evaluation step. Images are not kept; they are a pure function of the frame.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceStep {
    pub position: [f64; 3],
    pub orientation: Quaternion,
    pub wrench: Wrench,
    pub action: Action,
    pub confidence: f64,
    pub label: u8,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeTrace {
    pub steps: Vec<TraceStep>,
    pub final_offset: f64,
    pub success: bool,
    pub overshoot: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalSummary {
    pub episodes: Vec<EpisodeTrace>,
    pub success_rate: f64,
    pub overshoot_rate: f64,
    pub mean_final_offset: f64,
}

/// Label 1 and confidence at or above `high` over the last `window` steps.
pub fn is_success(steps: &[TraceStep], c: &EvalCriteria) -> bool {
    steps.len() >= c.window
        && steps[steps.len() - c.window..].iter().all(|s| s.label == 1 && s.confidence >= c.high)
}

/// Confidence rose above `high` and later fell below `low`.
pub fn is_overshoot(steps: &[TraceStep], c: &EvalCriteria) -> bool {
    match steps.iter().position(|s| s.confidence > c.high) {
        Some(i) => steps[i + 1..].iter().any(|s| s.confidence < c.low),
        None => false,
    }
}

/// Rolls `policy` without guidance from `n_episodes` starts (episode `e` uses
/// `seed + e`) for exactly `max_steps` steps each.
pub fn rollout_eval<P: Policy + ?Sized>(
    policy: &P,
    confidence: &ConfidenceSource<'_>,
    sim: &Simulator,
    n_episodes: usize,
    max_steps: usize,
    seed: u64,
    criteria: &EvalCriteria,
) -> Result<EvalSummary> {
    let mut episodes = Vec::with_capacity(n_episodes);
    for e in 0..n_episodes {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(e as u64));
        let mut state = SimState::new(sim.sample_start(&mut rng));
        let mut steps = Vec::with_capacity(max_steps);
        for _ in 0..max_steps {
            let obs = sim.observe(&state.frame);
            let action = policy.act(sim, &state, &obs)?;
            steps.push(TraceStep {
                position: state.frame.position,
                orientation: state.frame.orientation,
                wrench: obs.wrench,
                action,
                confidence: confidence.confidence(sim, &state.frame, &obs)?,
                label: sim.ground_truth_label(&state.frame),
            });
            state = sim.step(&state, &action)?.0;
        }
        let final_offset = steps
            .last()
            .map(|s| sim.lateral_offset(&ProbeFrame::new(s.position, s.orientation)))
            .unwrap_or_else(|| sim.lateral_offset(&state.frame));
        episodes.push(EpisodeTrace {
            success: is_success(&steps, criteria),
            overshoot: is_overshoot(&steps, criteria),
            final_offset,
            steps,
        });
    }
    let n = n_episodes.max(1) as f64;
    Ok(EvalSummary {
        success_rate: episodes.iter().filter(|e| e.success).count() as f64 / n,
        overshoot_rate: episodes.iter().filter(|e| e.overshoot).count() as f64 / n,
        mean_final_offset: episodes.iter().map(|e| e.final_offset).sum::<f64>() / n,
        episodes,
    })
}
