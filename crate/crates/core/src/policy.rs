//! Multi-modal scanning policy: image, pose and force encoders feeding an
//! action head and a state-quality head.
//!
//! The probe position recorded in an [`Observation`] is never read here.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geometry::Action;
use crate::nn::{cross_entropy, mse_loss, softmax, LayerSpec, Network, ParamGroup, Tensor};
use crate::sim::Observation;

pub const POSE_DIM: usize = 4;
pub const WRENCH_DIM: usize = 6;
pub const ACTION_DIM: usize = 7;

/// Network widths. The three encoders share `feature_dim`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ArchConfig {
    pub image_height: usize,
    pub image_width: usize,
    pub conv1_channels: usize,
    pub conv2_channels: usize,
    pub kernel: usize,
    pub stride: usize,
    pub feature_dim: usize,
    /// Hidden width of the pose and force encoders.
    pub encoder_hidden: usize,
    pub action_hidden: usize,
    pub quality_hidden: usize,
}

impl Default for ArchConfig {
    fn default() -> Self {
        Self {
            image_height: 64,
            image_width: 64,
            conv1_channels: 8,
            conv2_channels: 16,
            kernel: 3,
            stride: 2,
            feature_dim: 32,
            encoder_hidden: 32,
            action_hidden: 64,
            quality_hidden: 32,
        }
    }
}

impl ArchConfig {
    /// Full-size variant: 224x224 images and 128-d features per modality.
    pub fn full_scale() -> Self {
        Self {
            image_height: 224,
            image_width: 224,
            feature_dim: 128,
            encoder_hidden: 128,
            action_hidden: 256,
            quality_hidden: 128,
            ..Self::default()
        }
    }

    pub fn concat_dim(&self) -> usize {
        3 * self.feature_dim
    }

    fn conv_dims(&self) -> Result<((usize, usize), (usize, usize))> {
        let out = |h: usize, w: usize| -> Result<(usize, usize)> {
            if h < self.kernel || w < self.kernel {
                return Err(Error::InvalidConfig(format!("image {h}x{w} too small for the conv stack")));
            }
            Ok(((h - self.kernel) / self.stride + 1, (w - self.kernel) / self.stride + 1))
        };
        let c1 = out(self.image_height, self.image_width)?;
        let c2 = out(c1.0, c1.1)?;
        Ok((c1, c2))
    }

    pub fn validate(&self) -> Result<()> {
        let sizes = [
            self.conv1_channels,
            self.conv2_channels,
            self.kernel,
            self.stride,
            self.feature_dim,
            self.encoder_hidden,
            self.action_hidden,
            self.quality_hidden,
        ];
        if sizes.contains(&0) {
            return Err(Error::InvalidConfig("architecture sizes must be positive".into()));
        }
        self.conv_dims().map(|_| ())
    }

    fn image_layers(&self) -> Result<Vec<LayerSpec>> {
        let ((h1, w1), (h2, w2)) = self.conv_dims()?;
        Ok(vec![
            LayerSpec::Conv2d {
                in_channels: 1,
                out_channels: self.conv1_channels,
                kernel: self.kernel,
                stride: self.stride,
                in_h: self.image_height,
                in_w: self.image_width,
            },
            LayerSpec::Relu,
            LayerSpec::Conv2d {
                in_channels: self.conv1_channels,
                out_channels: self.conv2_channels,
                kernel: self.kernel,
                stride: self.stride,
                in_h: h1,
                in_w: w1,
            },
            LayerSpec::Relu,
            LayerSpec::Flatten,
            LayerSpec::Dense { inputs: self.conv2_channels * h2 * w2, outputs: self.feature_dim },
            LayerSpec::Relu,
        ])
    }

    fn mlp(&self, inputs: usize, hidden: usize, outputs: usize, final_relu: bool) -> Vec<LayerSpec> {
        let mut l = vec![
            LayerSpec::Dense { inputs, outputs: hidden },
            LayerSpec::Relu,
            LayerSpec::Dense { inputs: hidden, outputs },
        ];
        if final_relu {
            l.push(LayerSpec::Relu);
        }
        l
    }
}

/// Per-dimension mean and standard deviation used to standardize inputs and
/// regression targets. Dimensions with negligible spread keep unit scale.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    pub fn identity(dim: usize) -> Self {
        Self { mean: vec![0.0; dim], std: vec![1.0; dim] }
    }

    pub fn fit<'a, I: IntoIterator<Item = &'a [f64]>>(dim: usize, rows: I) -> Self {
        let mut n = 0usize;
        let mut sum = vec![0.0; dim];
        let mut sq = vec![0.0; dim];
        for r in rows {
            n += 1;
            for i in 0..dim {
                sum[i] += r[i];
                sq[i] += r[i] * r[i];
            }
        }
        if n == 0 {
            return Self::identity(dim);
        }
        let nf = n as f64;
        let mean: Vec<f64> = sum.iter().map(|s| s / nf).collect();
        let raw: Vec<f64> = (0..dim)
            .map(|i| (sq[i] / nf - mean[i] * mean[i]).max(0.0).sqrt())
            .collect();
        // constant dimensions borrow the typical scale of their siblings
        let live: Vec<f64> = raw.iter().copied().filter(|&s| s > 1e-9).collect();
        let fallback = if live.is_empty() {
            1.0
        } else {
            live.iter().sum::<f64>() / live.len() as f64
        };
        let std = raw
            .into_iter()
            .map(|s| if s > 1e-9 { s } else { fallback })
            .collect();
        Self { mean, std }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(self.mean.iter().zip(&self.std)).map(|(v, (m, s))| (v - m) / s).collect()
    }

    pub fn invert(&self, z: &[f64]) -> Vec<f64> {
        z.iter().zip(self.mean.iter().zip(&self.std)).map(|(v, (m, s))| v * s + m).collect()
    }
}

/// Input and target scaling fitted on the training split.
#[derive(Debug, Clone, PartialEq)]
pub struct Normalization {
    pub pose: Standardizer,
    pub wrench: Standardizer,
    pub action: Standardizer,
}

impl Default for Normalization {
    fn default() -> Self {
        Self {
            pose: Standardizer::identity(POSE_DIM),
            wrench: Standardizer::identity(WRENCH_DIM),
            action: Standardizer::identity(ACTION_DIM),
        }
    }
}

/// Training stages a parameter set has been through.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Stages {
    pub bc_trained: bool,
    pub quality_trained: bool,
}

/// Which parameter groups a trainer may update.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Part {
    Front,
    ActionHead,
    QualityHead,
}

/// All trainable weights plus the scaling they were trained with.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyParams {
    pub arch: ArchConfig,
    pub image_encoder: Network,
    pub pose_encoder: Network,
    pub force_encoder: Network,
    pub action_head: Network,
    pub quality_head: Network,
    pub norm: Normalization,
    pub stages: Stages,
}

/// Probability that the state is acceptable.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Confidence(pub f64);

impl Confidence {
    pub fn value(self) -> f64 {
        self.0
    }
}

/// Standardized network inputs for one observation.
#[derive(Debug, Clone)]
pub struct PolicyInput {
    pub image: Tensor,
    pub pose: Tensor,
    pub wrench: Tensor,
}

/// Gradients for every network, aligned with their parameter groups.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyGrads {
    pub image_encoder: Vec<Tensor>,
    pub pose_encoder: Vec<Tensor>,
    pub force_encoder: Vec<Tensor>,
    pub action_head: Vec<Tensor>,
    pub quality_head: Vec<Tensor>,
}

impl PolicyGrads {
    pub fn add(&mut self, o: &PolicyGrads) {
        crate::nn::accumulate(&mut self.image_encoder, &o.image_encoder);
        crate::nn::accumulate(&mut self.pose_encoder, &o.pose_encoder);
        crate::nn::accumulate(&mut self.force_encoder, &o.force_encoder);
        crate::nn::accumulate(&mut self.action_head, &o.action_head);
        crate::nn::accumulate(&mut self.quality_head, &o.quality_head);
    }

    pub fn scale(&mut self, s: f64) {
        for t in self.all_mut() {
            t.scale(s);
        }
    }

    fn all_mut(&mut self) -> impl Iterator<Item = &mut Tensor> {
        self.image_encoder
            .iter_mut()
            .chain(self.pose_encoder.iter_mut())
            .chain(self.force_encoder.iter_mut())
            .chain(self.action_head.iter_mut())
            .chain(self.quality_head.iter_mut())
    }
}

impl PolicyParams {
    pub fn init(arch: ArchConfig, seed: u64) -> Result<Self> {
        arch.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = arch.feature_dim;
        let image_encoder = Network::new(
            "front.image",
            &[1, arch.image_height, arch.image_width],
            arch.image_layers()?,
            &mut rng,
        )?;
        let pose_encoder = Network::new("front.pose", &[POSE_DIM], arch.mlp(POSE_DIM, arch.encoder_hidden, f, true), &mut rng)?;
        let force_encoder =
            Network::new("front.force", &[WRENCH_DIM], arch.mlp(WRENCH_DIM, arch.encoder_hidden, f, true), &mut rng)?;
        let action_head = Network::new(
            "action_head",
            &[arch.concat_dim()],
            arch.mlp(arch.concat_dim(), arch.action_hidden, ACTION_DIM, false),
            &mut rng,
        )?;
        let quality_head = Network::new(
            "quality_head",
            &[arch.concat_dim()],
            arch.mlp(arch.concat_dim(), arch.quality_hidden, 2, false),
            &mut rng,
        )?;
        Ok(Self {
            arch,
            image_encoder,
            pose_encoder,
            force_encoder,
            action_head,
            quality_head,
            norm: Normalization::default(),
            stages: Stages::default(),
        })
    }

    pub fn networks(&self) -> [&Network; 5] {
        [&self.image_encoder, &self.pose_encoder, &self.force_encoder, &self.action_head, &self.quality_head]
    }

    pub fn networks_mut(&mut self) -> [&mut Network; 5] {
        [
            &mut self.image_encoder,
            &mut self.pose_encoder,
            &mut self.force_encoder,
            &mut self.action_head,
            &mut self.quality_head,
        ]
    }

    /// Every parameter group in declaration order.
    pub fn groups(&self) -> impl Iterator<Item = &ParamGroup> {
        self.networks().into_iter().map(|n| &n.params)
    }

    pub fn param_count(&self) -> usize {
        self.groups().map(ParamGroup::param_count).sum()
    }

    pub fn part_of(network_index: usize) -> Part {
        match network_index {
            0..=2 => Part::Front,
            3 => Part::ActionHead,
            _ => Part::QualityHead,
        }
    }

    pub fn zero_grads(&self) -> PolicyGrads {
        PolicyGrads {
            image_encoder: self.image_encoder.params.zeros_like(),
            pose_encoder: self.pose_encoder.params.zeros_like(),
            force_encoder: self.force_encoder.params.zeros_like(),
            action_head: self.action_head.params.zeros_like(),
            quality_head: self.quality_head.params.zeros_like(),
        }
    }

    pub fn input(&self, obs: &Observation) -> Result<PolicyInput> {
        let img = &obs.image;
        if img.height != self.arch.image_height || img.width != self.arch.image_width {
            return Err(Error::ShapeMismatch(format!(
                "policy expects {}x{} images, got {}x{}",
                self.arch.image_height, self.arch.image_width, img.height, img.width
            )));
        }
        Ok(PolicyInput {
            image: Tensor {
                shape: vec![1, img.height, img.width],
                data: img.pixels.iter().map(|&p| f64::from(p)).collect(),
            },
            pose: Tensor::vector(self.norm.pose.apply(&obs.orientation.to_array())),
            wrench: Tensor::vector(self.norm.wrench.apply(&obs.wrench.to_array())),
        })
    }

    /// Concatenated (image, pose, force) feature vector.
    pub fn encode(&self, obs: &Observation) -> Result<Vec<f64>> {
        self.encode_input(&self.input(obs)?)
    }

    pub fn encode_input(&self, x: &PolicyInput) -> Result<Vec<f64>> {
        let mut f = self.image_encoder.infer(&x.image)?.data;
        f.extend(self.pose_encoder.infer(&x.pose)?.data);
        f.extend(self.force_encoder.infer(&x.wrench)?.data);
        Ok(f)
    }

    /// Action head output in standardized target units.
    pub fn action_head_output(&self, features: &[f64]) -> Result<Vec<f64>> {
        Ok(self.action_head.infer(&Tensor::vector(features.to_vec()))?.data)
    }

    pub fn predict_action(&self, obs: &Observation) -> Result<Action> {
        let z = self.action_head_output(&self.encode(obs)?)?;
        Ok(Action::from_slice(&self.norm.action.invert(&z)))
    }

    /// `[p(label 0), p(label 1)]`.
    pub fn quality_probs_from_features(&self, features: &[f64]) -> Result<[f64; 2]> {
        let logits = self.quality_head.infer(&Tensor::vector(features.to_vec()))?;
        let p = softmax(&logits.data);
        Ok([p[0], p[1]])
    }

    pub fn quality(&self, obs: &Observation) -> Result<Confidence> {
        let p = self.quality_probs_from_features(&self.encode(obs)?)?;
        Ok(Confidence(p[1]))
    }

    /// Both outputs from a single front pass.
    pub fn act_and_quality(&self, obs: &Observation) -> Result<(Action, Confidence)> {
        let f = self.encode(obs)?;
        let z = self.action_head_output(&f)?;
        let q = self.quality_probs_from_features(&f)?[1];
        Ok((Action::from_slice(&self.norm.action.invert(&z)), Confidence(q)))
    }

    /// MSE between the action head and `target` (standardized units), with
    /// gradients for the front and action head. The quality head gradient is zero.
    pub fn action_loss_grads(&self, x: &PolicyInput, target: &[f64]) -> Result<(f64, PolicyGrads)> {
        let (fi, ci) = self.image_encoder.forward(&x.image)?;
        let (fp, cp) = self.pose_encoder.forward(&x.pose)?;
        let (ff, cf) = self.force_encoder.forward(&x.wrench)?;
        let mut feat = fi.data.clone();
        feat.extend(&fp.data);
        feat.extend(&ff.data);
        let (out, ca) = self.action_head.forward(&Tensor::vector(feat))?;
        let (loss, g) = mse_loss(&out, &Tensor::vector(target.to_vec()))?;
        let (gfeat, ga) = self.action_head.backward(&ca, &g, true);
        let gfeat = gfeat.expect("requested").data;
        let f = self.arch.feature_dim;
        let (_, gi) = self.image_encoder.backward(&ci, &Tensor::vector(gfeat[..f].to_vec()), false);
        let (_, gp) = self.pose_encoder.backward(&cp, &Tensor::vector(gfeat[f..2 * f].to_vec()), false);
        let (_, gf) = self.force_encoder.backward(&cf, &Tensor::vector(gfeat[2 * f..].to_vec()), false);
        Ok((
            loss,
            PolicyGrads {
                image_encoder: gi,
                pose_encoder: gp,
                force_encoder: gf,
                action_head: ga,
                quality_head: self.quality_head.params.zeros_like(),
            },
        ))
    }

    /// Weighted cross-entropy of the quality head on precomputed features.
    /// Returns `(loss, p(label 1), quality head gradients)`.
    pub fn quality_loss_grads(&self, features: &[f64], label: u8, weight: f64) -> Result<(f64, f64, Vec<Tensor>)> {
        let (logits, cache) = self.quality_head.forward(&Tensor::vector(features.to_vec()))?;
        let (loss, g) = cross_entropy(&logits, usize::from(label), weight);
        let (_, grads) = self.quality_head.backward(&cache, &g, false);
        Ok((loss, softmax(&logits.data)[1], grads))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{ProbeFrame, Quaternion};
    use crate::sim::Simulator;

    fn obs() -> Observation {
        let sim = Simulator::default();
        let q = Quaternion::from_axis_angle([1.0, 0.0, 0.0], 0.05).unwrap();
        sim.observe(&ProbeFrame::new([0.006, -0.002, -0.004], q))
    }

    #[test]
    fn init_is_deterministic() {
        let a = PolicyParams::init(ArchConfig::default(), 0).unwrap();
        let b = PolicyParams::init(ArchConfig::default(), 0).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.arch.concat_dim(), 96);
        assert_eq!(ArchConfig::full_scale().concat_dim(), 384);
    }

    #[test]
    fn invalid_arch_rejected() {
        let arch = ArchConfig { image_height: 2, ..ArchConfig::default() };
        assert!(matches!(PolicyParams::init(arch, 0), Err(Error::InvalidConfig(_))));
        let arch = ArchConfig { feature_dim: 0, ..ArchConfig::default() };
        assert!(PolicyParams::init(arch, 0).is_err());
    }

    #[test]
    fn encode_has_three_blocks() {
        let p = PolicyParams::init(ArchConfig::default(), 1).unwrap();
        assert_eq!(p.encode(&obs()).unwrap().len(), 96);
    }

    #[test]
    fn position_is_ignored() {
        let p = PolicyParams::init(ArchConfig::default(), 2).unwrap();
        let a = obs();
        let mut b = a.clone();
        b.position = [1.0, -5.0, 3.0];
        assert_eq!(p.encode(&a).unwrap(), p.encode(&b).unwrap());
        assert_eq!(p.predict_action(&a).unwrap(), p.predict_action(&b).unwrap());
        assert_eq!(p.quality(&a).unwrap(), p.quality(&b).unwrap());
    }

    #[test]
    fn quality_is_a_probability() {
        let p = PolicyParams::init(ArchConfig::default(), 3).unwrap();
        let f = p.encode(&obs()).unwrap();
        let [p0, p1] = p.quality_probs_from_features(&f).unwrap();
        assert!((0.0..=1.0).contains(&p1));
        assert!((p0 + p1 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn wrong_image_size_is_shape_mismatch() {
        let arch = ArchConfig { image_height: 32, image_width: 32, ..ArchConfig::default() };
        let p = PolicyParams::init(arch, 0).unwrap();
        assert!(matches!(p.encode(&obs()), Err(Error::ShapeMismatch(_))));
    }

    #[test]
    fn standardizer_round_trip() {
        let rows = [vec![1.0, 5.0, 2.0], vec![3.0, 5.0, -2.0]];
        let s = Standardizer::fit(3, rows.iter().map(Vec::as_slice));
        assert_eq!(s.mean, vec![2.0, 5.0, 0.0]);
        assert_eq!(s.std, vec![1.0, 1.5, 2.0]);
        let z = s.apply(&[4.0, 8.0, 1.0]);
        assert_eq!(z, vec![2.0, 2.0, 0.5]);
        assert_eq!(s.invert(&z), vec![4.0, 8.0, 1.0]);
    }
}
