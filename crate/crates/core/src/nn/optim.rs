use super::{ParamGroup, Tensor};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OptimizerKind {
    /// `theta <- theta - lr * grad`.
    #[default]
    Sgd,
    Adam,
}

impl OptimizerKind {
    pub fn as_str(self) -> &'static str {
        match self {
            OptimizerKind::Sgd => "sgd",
            OptimizerKind::Adam => "adam",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "sgd" => Some(OptimizerKind::Sgd),
            "adam" => Some(OptimizerKind::Adam),
            _ => None,
        }
    }
}

/// Plain gradient descent on a trainable group. Frozen groups are left untouched.
pub fn sgd_step(group: &mut ParamGroup, grads: &[Tensor], lr: f64) -> Result<()> {
    check_aligned(group, grads)?;
    if !group.trainable {
        return Ok(());
    }
    for (t, g) in group.tensors.iter_mut().zip(grads) {
        for (p, d) in t.data.iter_mut().zip(&g.data) {
            *p -= lr * d;
        }
    }
    Ok(())
}

fn check_aligned(group: &ParamGroup, grads: &[Tensor]) -> Result<()> {
    if grads.len() != group.tensors.len() || group.tensors.iter().zip(grads).any(|(t, g)| t.shape != g.shape) {
        return Err(Error::ShapeMismatch(format!("gradients do not align with group {}", group.name)));
    }
    Ok(())
}

/// Optimizer with per-group state, keyed by group position.
#[derive(Debug, Clone)]
pub struct Optimizer {
    pub kind: OptimizerKind,
    pub lr: f64,
    step: u64,
    moments: Vec<Option<(Vec<Tensor>, Vec<Tensor>)>>,
}

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const EPS: f64 = 1e-8;

impl Optimizer {
    pub fn new(kind: OptimizerKind, lr: f64) -> Self {
        Self { kind, lr, step: 0, moments: Vec::new() }
    }

    /// Applies one update to `groups` (frozen ones are skipped). `grads[i]` belongs to `groups[i]`.
    pub fn step(&mut self, groups: &mut [&mut ParamGroup], grads: &[Vec<Tensor>]) -> Result<()> {
        if groups.len() != grads.len() {
            return Err(Error::ShapeMismatch("one gradient set per group".into()));
        }
        match self.kind {
            OptimizerKind::Sgd => {
                for (g, d) in groups.iter_mut().zip(grads) {
                    sgd_step(g, d, self.lr)?;
                }
            }
            OptimizerKind::Adam => {
                self.step += 1;
                if self.moments.len() < groups.len() {
                    self.moments.resize(groups.len(), None);
                }
                let c1 = 1.0 - BETA1.powi(self.step as i32);
                let c2 = 1.0 - BETA2.powi(self.step as i32);
                for (i, (group, gs)) in groups.iter_mut().zip(grads).enumerate() {
                    check_aligned(group, gs)?;
                    if !group.trainable {
                        continue;
                    }
                    let (m, v) = self.moments[i].get_or_insert_with(|| (group.zeros_like(), group.zeros_like()));
                    for (k, t) in group.tensors.iter_mut().enumerate() {
                        for j in 0..t.data.len() {
                            let g = gs[k].data[j];
                            let mj = &mut m[k].data[j];
                            let vj = &mut v[k].data[j];
                            *mj = BETA1 * *mj + (1.0 - BETA1) * g;
                            *vj = BETA2 * *vj + (1.0 - BETA2) * g * g;
                            t.data[j] -= self.lr * (*mj / c1) / ((*vj / c2).sqrt() + EPS);
                        }
                    }
                }
            }
        }
        Ok(())
    }
}
