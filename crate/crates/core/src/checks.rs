//! Finite-difference verification of every layer kind and of the policy
//! composites, shared by the `gradcheck` subcommand and the test suites.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::nn::{cross_entropy, grad_check, mse_loss, LayerSpec, Network, Tensor};
use crate::policy::{ArchConfig, PolicyInput, PolicyParams, ACTION_DIM};

/// Required bound on the max relative error.
pub const GRAD_TOLERANCE: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheck {
    pub name: &'static str,
    pub max_rel_error: f64,
    pub tolerance: f64,
}

impl GradCheck {
    pub fn passed(&self) -> bool {
        self.max_rel_error < self.tolerance
    }
}

#[derive(Clone, Copy)]
enum Head {
    /// Fixed random projection of the output.
    Projection,
    Mse,
    CrossEntropy(usize),
}

fn random_tensor(shape: &[usize], rng: &mut ChaCha8Rng, keep_off_zero: bool) -> Tensor {
    let n = shape.iter().product();
    let data = (0..n)
        .map(|_| {
            let v: f64 = rng.gen_range(-1.0..1.0);
            if keep_off_zero && v.abs() < 0.05 {
                v.signum() * 0.05 + v
            } else {
                v
            }
        })
        .collect();
    Tensor { shape: shape.to_vec(), data }
}

/// Loss and analytic gradients `[input, params...]` of `net` under `head`.
fn net_loss(net: &Network, x: &Tensor, head: Head, aux: &Tensor) -> (f64, Vec<Tensor>) {
    let (y, cache) = net.forward(x).expect("shapes fixed by construction");
    let (loss, gy) = match head {
        Head::Projection => {
            let l = y.data.iter().zip(&aux.data).map(|(a, b)| a * b).sum();
            (l, Tensor { shape: y.shape.clone(), data: aux.data.clone() })
        }
        Head::Mse => mse_loss(&y, aux).expect("shapes fixed by construction"),
        Head::CrossEntropy(label) => cross_entropy(&y, label, 1.0),
    };
    let (gx, gp) = net.backward(&cache, &gy, true);
    let mut grads = vec![gx.expect("requested")];
    grads.extend(gp);
    (loss, grads)
}

fn check_network(name: &'static str, tolerance: f64, net: Network, x: Tensor, head: Head, aux: Tensor, fault: bool) -> GradCheck {
    let (_, mut analytic) = net_loss(&net, &x, head, &aux);
    if fault {
        flip(&mut analytic);
    }
    let mut point = vec![x];
    point.extend(net.params.tensors.iter().cloned());
    let mut probe = net.clone();
    let max_rel_error = grad_check(&point, &analytic, |p| {
        probe.params.tensors.clone_from_slice(&p[1..]);
        net_loss(&probe, &p[0], head, &aux).0
    });
    GradCheck { name, max_rel_error, tolerance }
}

fn flip(grads: &mut [Tensor]) {
    for t in grads {
        t.scale(-1.0);
    }
}

fn single(spec: LayerSpec, input: &[usize], seed: u64) -> (Network, Tensor, Tensor) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let net = Network::new(spec.kind(), input, vec![spec], &mut rng).expect("valid layer");
    let x = random_tensor(input, &mut rng, true);
    let aux = random_tensor(&[net.output_len()], &mut rng, false);
    (net, x, aux)
}

fn reshape_aux(aux: Tensor, net: &Network, x: &Tensor) -> Tensor {
    let shape = net.infer(x).expect("valid").shape;
    Tensor { shape, data: aux.data }
}

fn layer_checks(fault: bool) -> Vec<GradCheck> {
    let mut out = Vec::new();
    let specs: [(LayerSpec, Vec<usize>); 5] = [
        (LayerSpec::Dense { inputs: 5, outputs: 4 }, vec![5]),
        (
            LayerSpec::Conv2d { in_channels: 2, out_channels: 3, kernel: 3, stride: 2, in_h: 7, in_w: 6 },
            vec![2, 7, 6],
        ),
        (LayerSpec::Relu, vec![3, 4]),
        (LayerSpec::Flatten, vec![2, 3, 2]),
        (LayerSpec::Softmax, vec![5]),
    ];
    for (i, (spec, shape)) in specs.into_iter().enumerate() {
        let (net, x, aux) = single(spec, &shape, 10 + i as u64);
        let aux = reshape_aux(aux, &net, &x);
        out.push(check_network(spec.kind(), GRAD_TOLERANCE, net, x, Head::Projection, aux, fault));
    }
    out
}

fn composite_checks(fault: bool) -> Vec<GradCheck> {
    let mut out = Vec::new();

    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let net = Network::new("linear", &[6], vec![LayerSpec::Dense { inputs: 6, outputs: 3 }], &mut rng).unwrap();
    let x = random_tensor(&[6], &mut rng, false);
    let t = random_tensor(&[3], &mut rng, false);
    out.push(check_network("linear+mse", 1e-9, net, x, Head::Mse, t, fault));

    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let layers = vec![
        LayerSpec::Dense { inputs: 6, outputs: 8 },
        LayerSpec::Relu,
        LayerSpec::Dense { inputs: 8, outputs: 3 },
    ];
    let net = Network::new("mlp", &[6], layers, &mut rng).unwrap();
    let x = random_tensor(&[6], &mut rng, false);
    let t = random_tensor(&[3], &mut rng, false);
    out.push(check_network("relu-mlp+mse", GRAD_TOLERANCE, net, x, Head::Mse, t, fault));

    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let layers = vec![
        LayerSpec::Conv2d { in_channels: 1, out_channels: 3, kernel: 3, stride: 1, in_h: 6, in_w: 6 },
        LayerSpec::Relu,
        LayerSpec::Flatten,
        LayerSpec::Dense { inputs: 48, outputs: 2 },
    ];
    let net = Network::new("convnet", &[1, 6, 6], layers, &mut rng).unwrap();
    let x = random_tensor(&[1, 6, 6], &mut rng, false);
    out.push(check_network("conv+dense+cross-entropy", GRAD_TOLERANCE, net, x, Head::CrossEntropy(1), Tensor::zeros(&[0]), fault));

    out.extend(policy_checks(fault));
    out
}

/// Compact architecture with the same topology as the desk default.
pub fn tiny_arch() -> ArchConfig {
    ArchConfig {
        image_height: 9,
        image_width: 9,
        conv1_channels: 2,
        conv2_channels: 3,
        kernel: 3,
        stride: 2,
        feature_dim: 4,
        encoder_hidden: 5,
        action_hidden: 6,
        quality_hidden: 5,
    }
}

fn tiny_input(arch: &ArchConfig, rng: &mut ChaCha8Rng) -> PolicyInput {
    PolicyInput {
        image: Tensor {
            shape: vec![1, arch.image_height, arch.image_width],
            data: (0..arch.image_height * arch.image_width).map(|_| rng.gen_range(0.0..1.0)).collect(),
        },
        pose: random_tensor(&[4], rng, false),
        wrench: random_tensor(&[6], rng, false),
    }
}

fn flatten_params(p: &PolicyParams) -> Vec<Tensor> {
    p.groups().flat_map(|g| g.tensors.iter().cloned()).collect()
}

fn load_params(p: &mut PolicyParams, flat: &[Tensor]) {
    let mut it = flat.iter();
    for net in p.networks_mut() {
        for t in net.params.tensors.iter_mut() {
            *t = it.next().expect("aligned").clone();
        }
    }
}

fn policy_checks(fault: bool) -> Vec<GradCheck> {
    let arch = tiny_arch();
    let params = PolicyParams::init(arch, 5).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let x = tiny_input(&arch, &mut rng);
    let target: Vec<f64> = (0..ACTION_DIM).map(|_| rng.gen_range(-1.0..1.0)).collect();

    let (_, g) = params.action_loss_grads(&x, &target).unwrap();
    let mut analytic: Vec<Tensor> = [g.image_encoder, g.pose_encoder, g.force_encoder, g.action_head, g.quality_head]
        .into_iter()
        .flatten()
        .collect();
    if fault {
        flip(&mut analytic);
    }
    let mut probe = params.clone();
    let action = grad_check(&flatten_params(&params), &analytic, |flat| {
        load_params(&mut probe, flat);
        probe.action_loss_grads(&x, &target).unwrap().0
    });

    let features = params.encode_input(&x).unwrap();
    let (_, _, mut gq) = params.quality_loss_grads(&features, 1, 1.0).unwrap();
    if fault {
        flip(&mut gq);
    }
    let mut probe = params.clone();
    let quality = grad_check(&params.quality_head.params.tensors, &gq, |t| {
        probe.quality_head.params.tensors.clone_from_slice(t);
        probe.quality_loss_grads(&features, 1, 1.0).unwrap().0
    });

    vec![
        GradCheck { name: "policy:encode+action-head+mse", max_rel_error: action, tolerance: GRAD_TOLERANCE },
        GradCheck { name: "policy:quality-head+cross-entropy", max_rel_error: quality, tolerance: GRAD_TOLERANCE },
    ]
}

/// Runs every check. `inject_fault` negates analytic gradients so the
/// checks must fail; it exists to test the harness itself.
pub fn run_all(inject_fault: bool) -> Vec<GradCheck> {
    let mut v = layer_checks(inject_fault);
    v.extend(composite_checks(inject_fault));
    v
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_checks_pass() {
        for c in run_all(false) {
            assert!(c.passed(), "{} : {:e}", c.name, c.max_rel_error);
        }
    }

    #[test]
    fn fault_is_detected() {
        assert!(run_all(true).iter().all(|c| !c.passed()));
    }

    #[test]
    fn each_layer_kind_listed_once() {
        let names: Vec<_> = run_all(false).into_iter().map(|c| c.name).collect();
        for kind in ["dense", "conv2d", "relu", "flatten", "softmax"] {
            assert_eq!(names.iter().filter(|n| **n == kind).count(), 1, "{kind}");
        }
    }
}
