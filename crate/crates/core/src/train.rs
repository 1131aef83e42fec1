//! Stage one: behavior cloning of the action head and front network, then
//! the state-quality classifier on top of the frozen front.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geometry::Action;
use crate::nn::{Optimizer, OptimizerKind, ParamGroup};
use crate::policy::{Normalization, PolicyGrads, PolicyInput, PolicyParams, Standardizer, ACTION_DIM, POSE_DIM, WRENCH_DIM};
use crate::sim::{Demonstration, Observation};

#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub episode_id: u32,
    pub step: u32,
    pub observation: Observation,
    pub action: Action,
    pub label: u8,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    pub records: Vec<Record>,
}

impl Dataset {
    pub fn from_demonstrations(demos: &[Demonstration]) -> Self {
        let records = demos
            .iter()
            .enumerate()
            .flat_map(|(e, d)| {
                d.steps.iter().enumerate().map(move |(s, st)| Record {
                    episode_id: e as u32,
                    step: s as u32,
                    observation: st.observation.clone(),
                    action: st.action,
                    label: st.label,
                })
            })
            .collect();
        Self { records }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn episode_count(&self) -> usize {
        let mut ids: Vec<u32> = self.records.iter().map(|r| r.episode_id).collect();
        ids.sort_unstable();
        ids.dedup();
        ids.len()
    }

    /// `(label 0, label 1)` counts.
    pub fn label_counts(&self) -> (usize, usize) {
        let pos = self.records.iter().filter(|r| r.label == 1).count();
        (self.len() - pos, pos)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub split_ratio: f64,
    pub seed: u64,
    pub optimizer: OptimizerKind,
    /// Inverse-frequency class weights for the quality loss.
    pub class_weighted: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.001,
            epochs: 50,
            batch_size: 32,
            split_ratio: 0.8,
            seed: 0,
            optimizer: OptimizerKind::Sgd,
            class_weighted: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidConfig("learning rate must be finite and non-negative".into()));
        }
        if !(self.split_ratio > 0.0 && self.split_ratio < 1.0) {
            return Err(Error::InvalidConfig("split ratio must lie in (0, 1)".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch size must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRow {
    /// 0 is the evaluation before the first update.
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub train_accuracy: Option<f64>,
    pub val_accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub rows: Vec<EpochRow>,
    /// CRC-32 over all parameter tensors after training.
    pub checksum: u32,
}

impl TrainReport {
    pub fn last(&self) -> &EpochRow {
        self.rows.last().expect("report has the epoch-0 row")
    }
}

/// CRC-32 of every parameter in declaration order, little-endian.
pub fn param_checksum(p: &PolicyParams) -> u32 {
    let mut h = crc32fast::Hasher::new();
    for g in p.groups() {
        for t in &g.tensors {
            for v in &t.data {
                h.update(&v.to_le_bytes());
            }
        }
    }
    h.finalize()
}

/// Episode-aware split. Episodes are shuffled with `seed` and laid end to
/// end; the first `floor(ratio * N)` records go to training, so at most the
/// one episode at the cut straddles both sides.
pub fn split_dataset(d: &Dataset, ratio: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if d.len() < 2 {
        return Err(Error::EmptyDataset);
    }
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::InvalidConfig("split ratio must lie in (0, 1)".into()));
    }
    let mut episodes: Vec<u32> = d.records.iter().map(|r| r.episode_id).collect();
    episodes.sort_unstable();
    episodes.dedup();
    episodes.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut order: Vec<&Record> = Vec::with_capacity(d.len());
    // records of an episode keep their original order
    let mut by_episode: std::collections::BTreeMap<u32, Vec<&Record>> = Default::default();
    for r in &d.records {
        by_episode.entry(r.episode_id).or_default().push(r);
    }
    for e in episodes {
        order.extend(by_episode.remove(&e).unwrap_or_default());
    }
    let n_train = (ratio * d.len() as f64).floor() as usize;
    let train = Dataset { records: order[..n_train].iter().map(|r| (*r).clone()).collect() };
    let val = Dataset { records: order[n_train..].iter().map(|r| (*r).clone()).collect() };
    Ok((train, val))
}

/// Fits input and action scaling on `train`.
pub fn fit_normalization(train: &Dataset) -> Normalization {
    let poses: Vec<[f64; POSE_DIM]> = train.records.iter().map(|r| r.observation.orientation.to_array()).collect();
    let wrenches: Vec<[f64; WRENCH_DIM]> = train.records.iter().map(|r| r.observation.wrench.to_array()).collect();
    let actions: Vec<[f64; ACTION_DIM]> = train.records.iter().map(|r| r.action.to_array()).collect();
    Normalization {
        pose: Standardizer::fit(POSE_DIM, poses.iter().map(|a| a.as_slice())),
        wrench: Standardizer::fit(WRENCH_DIM, wrenches.iter().map(|a| a.as_slice())),
        action: Standardizer::fit(ACTION_DIM, actions.iter().map(|a| a.as_slice())),
    }
}

/// Standardized inputs and targets, prepared once per dataset.
pub(crate) struct Prepared {
    pub inputs: Vec<PolicyInput>,
    pub targets: Vec<Vec<f64>>,
}

pub(crate) fn prepare(params: &PolicyParams, d: &Dataset) -> Result<Prepared> {
    let inputs = d.records.iter().map(|r| params.input(&r.observation)).collect::<Result<Vec<_>>>()?;
    let targets = d.records.iter().map(|r| params.norm.action.apply(&r.action.to_array())).collect();
    Ok(Prepared { inputs, targets })
}

/// Mean action loss over a prepared set, evaluated on fixed parameters.
pub(crate) fn action_loss(params: &PolicyParams, data: &Prepared) -> Result<f64> {
    if data.inputs.is_empty() {
        return Ok(0.0);
    }
    let mut total = 0.0;
    for (x, t) in data.inputs.iter().zip(&data.targets) {
        let f = params.encode_input(x)?;
        let out = params.action_head_output(&f)?;
        total += out.iter().zip(t).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / ACTION_DIM as f64;
    }
    Ok(total / data.inputs.len() as f64)
}

/// Mean validation action loss of `params` on `d`, using the stored scaling.
pub fn evaluate_action_loss(params: &PolicyParams, d: &Dataset) -> Result<f64> {
    action_loss(params, &prepare(params, d)?)
}

/// One minibatch update of the action head toward `targets`, and of the
/// front network too when `train_front` is set.
pub(crate) fn action_step(
    params: &mut PolicyParams,
    opt: &mut Optimizer,
    inputs: &[&PolicyInput],
    targets: &[&[f64]],
    train_front: bool,
) -> Result<f64> {
    let mut grads: PolicyGrads = params.zero_grads();
    let mut loss = 0.0;
    for (x, t) in inputs.iter().zip(targets) {
        let (l, g) = params.action_loss_grads(x, t)?;
        loss += l;
        grads.add(&g);
    }
    // the update follows the summed per-sample gradient, not the mean
    let n = inputs.len() as f64;
    let PolicyGrads { image_encoder, pose_encoder, force_encoder, action_head, .. } = grads;
    let [img, pose, force, act, _] = params.networks_mut();
    if train_front {
        let mut groups: [&mut ParamGroup; 4] = [&mut img.params, &mut pose.params, &mut force.params, &mut act.params];
        opt.step(&mut groups, &[image_encoder, pose_encoder, force_encoder, action_head])?;
    } else {
        opt.step(&mut [&mut act.params], &[action_head])?;
    }
    Ok(loss / n)
}

/// Behavior cloning of the front network and action head with MSE on
/// standardized 7-d action targets. The quality head is not touched.
pub fn train_bc(mut params: PolicyParams, train: &Dataset, val: &Dataset, cfg: &TrainConfig) -> Result<(PolicyParams, TrainReport)> {
    cfg.validate()?;
    if train.is_empty() || val.is_empty() {
        return Err(Error::EmptyDataset);
    }
    params.norm = fit_normalization(train);
    let tr = prepare(&params, train)?;
    let va = prepare(&params, val)?;
    let mut opt = Optimizer::new(cfg.optimizer, cfg.learning_rate);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut rows = vec![EpochRow {
        epoch: 0,
        train_loss: action_loss(&params, &tr)?,
        val_loss: action_loss(&params, &va)?,
        train_accuracy: None,
        val_accuracy: None,
    }];
    let mut order: Vec<usize> = (0..tr.inputs.len()).collect();
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut sum = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let xs: Vec<&PolicyInput> = batch.iter().map(|&i| &tr.inputs[i]).collect();
            let ts: Vec<&[f64]> = batch.iter().map(|&i| tr.targets[i].as_slice()).collect();
            sum += action_step(&mut params, &mut opt, &xs, &ts, true)? * batch.len() as f64;
        }
        let train_loss = sum / order.len() as f64;
        if !train_loss.is_finite() {
            return Err(Error::DivergenceDetected { epoch, loss: train_loss });
        }
        let val_loss = action_loss(&params, &va)?;
        if !val_loss.is_finite() {
            return Err(Error::DivergenceDetected { epoch, loss: val_loss });
        }
        rows.push(EpochRow { epoch, train_loss, val_loss, train_accuracy: None, val_accuracy: None });
    }
    params.stages.bc_trained = true;
    let checksum = param_checksum(&params);
    Ok((params, TrainReport { rows, checksum }))
}

struct QualitySet {
    features: Vec<Vec<f64>>,
    labels: Vec<u8>,
}

fn quality_set(params: &PolicyParams, d: &Dataset) -> Result<QualitySet> {
    let features = d.records.iter().map(|r| params.encode(&r.observation)).collect::<Result<Vec<_>>>()?;
    Ok(QualitySet { features, labels: d.records.iter().map(|r| r.label).collect() })
}

/// `(mean unweighted cross-entropy, accuracy at 0.5)`.
fn quality_metrics(params: &PolicyParams, s: &QualitySet) -> Result<(f64, f64)> {
    if s.features.is_empty() {
        return Ok((0.0, 0.0));
    }
    let mut loss = 0.0;
    let mut correct = 0usize;
    for (f, &y) in s.features.iter().zip(&s.labels) {
        let (l, q, _) = params.quality_loss_grads(f, y, 1.0)?;
        loss += l;
        if u8::from(q >= 0.5) == y {
            correct += 1;
        }
    }
    let n = s.features.len() as f64;
    Ok((loss / n, correct as f64 / n))
}

/// Trains the quality head with cross-entropy on features of the frozen
/// front network. `labeled` is split with the configured ratio and seed.
pub fn train_quality(mut params: PolicyParams, labeled: &Dataset, cfg: &TrainConfig) -> Result<(PolicyParams, TrainReport)> {
    cfg.validate()?;
    let (neg, pos) = labeled.label_counts();
    if labeled.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if neg == 0 || pos == 0 {
        return Err(Error::SingleClassDataset);
    }
    let (train, val) = split_dataset(labeled, cfg.split_ratio, cfg.seed)?;
    let tr = quality_set(&params, &train)?;
    let va = quality_set(&params, &val)?;
    let weights = if cfg.class_weighted {
        let n = tr.labels.len() as f64;
        let n1 = tr.labels.iter().filter(|&&l| l == 1).count().max(1) as f64;
        let n0 = (n - n1).max(1.0);
        [n / (2.0 * n0), n / (2.0 * n1)]
    } else {
        [1.0, 1.0]
    };

    let mut opt = Optimizer::new(cfg.optimizer, cfg.learning_rate);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5151);
    let row = |params: &PolicyParams, epoch: usize| -> Result<EpochRow> {
        let (tl, ta) = quality_metrics(params, &tr)?;
        let (vl, vacc) = quality_metrics(params, &va)?;
        Ok(EpochRow { epoch, train_loss: tl, val_loss: vl, train_accuracy: Some(ta), val_accuracy: Some(vacc) })
    };
    let mut rows = vec![row(&params, 0)?];
    let mut order: Vec<usize> = (0..tr.features.len()).collect();
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(cfg.batch_size) {
            let mut grads = params.quality_head.params.zeros_like();
            for &i in batch {
                let y = tr.labels[i];
                let (_, _, g) = params.quality_loss_grads(&tr.features[i], y, weights[usize::from(y)])?;
                crate::nn::accumulate(&mut grads, &g);
            }
            opt.step(&mut [&mut params.quality_head.params], &[grads])?;
        }
        let r = row(&params, epoch)?;
        if !r.train_loss.is_finite() {
            return Err(Error::DivergenceDetected { epoch, loss: r.train_loss });
        }
        rows.push(r);
    }
    params.stages.quality_trained = true;
    let checksum = param_checksum(&params);
    Ok((params, TrainReport { rows, checksum }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{ProbeFrame, Quaternion};
    use crate::sim::Simulator;

    fn toy(n_episodes: u32, per: u32) -> Dataset {
        let sim = Simulator::default();
        let mut records = Vec::new();
        for e in 0..n_episodes {
            for s in 0..per {
                let f = ProbeFrame::new([0.001 * s as f64, 0.002 * e as f64, -0.004], Quaternion::IDENTITY);
                records.push(Record {
                    episode_id: e,
                    step: s,
                    observation: sim.observe(&f),
                    action: Action::ZERO,
                    label: u8::from(s == 0),
                });
            }
        }
        Dataset { records }
    }

    #[test]
    fn split_sizes() {
        let d = toy(10, 1);
        let (a, b) = split_dataset(&d, 0.8, 0).unwrap();
        assert_eq!((a.len(), b.len()), (8, 2));
        let n = 21221usize;
        assert_eq!(((0.8 * n as f64).floor() as usize, n - (0.8 * n as f64).floor() as usize), (16976, 4245));
    }

    #[test]
    fn split_is_seeded_and_episode_aware() {
        let d = toy(10, 3);
        let (a1, b1) = split_dataset(&d, 0.5, 1).unwrap();
        let (a2, b2) = split_dataset(&d, 0.5, 1).unwrap();
        assert_eq!((a1.clone(), b1.clone()), (a2, b2));
        let (a3, _) = split_dataset(&d, 0.5, 2).unwrap();
        assert_eq!(a3.len(), a1.len());
        assert_ne!(a3, a1);
        let straddling = (0..10u32)
            .filter(|e| a1.records.iter().any(|r| r.episode_id == *e) && b1.records.iter().any(|r| r.episode_id == *e))
            .count();
        assert!(straddling <= 1);
        assert_eq!(a1.len() + b1.len(), d.len());
    }

    #[test]
    fn split_rejects_tiny() {
        let d = toy(1, 1);
        assert!(matches!(split_dataset(&d, 0.8, 0), Err(Error::EmptyDataset)));
    }

    #[test]
    fn quality_needs_both_classes() {
        let mut d = toy(4, 2);
        d.records.iter_mut().for_each(|r| r.label = 0);
        let p = PolicyParams::init(crate::policy::ArchConfig::default(), 0).unwrap();
        assert!(matches!(train_quality(p, &d, &TrainConfig::default()), Err(Error::SingleClassDataset)));
    }
}
