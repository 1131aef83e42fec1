use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use usskill::nn::{cross_entropy, grad_check, mse_loss, sgd_step, softmax, LayerSpec, Network, ParamGroup, Tensor};

fn vec_of(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-10.0..10.0f64, n)
}

proptest! {
    #[test]
    fn mse_is_symmetric_and_zero_only_on_equal(a in vec_of(5), b in vec_of(5)) {
        let (ta, tb) = (Tensor::vector(a.clone()), Tensor::vector(b.clone()));
        let (l1, _) = mse_loss(&ta, &tb).unwrap();
        let (l2, _) = mse_loss(&tb, &ta).unwrap();
        prop_assert_eq!(l1, l2);
        prop_assert!(l1 >= 0.0);
        prop_assert_eq!(l1 == 0.0, a == b);
        prop_assert_eq!(mse_loss(&ta, &ta).unwrap().0, 0.0);
    }

    #[test]
    fn softmax_is_a_distribution(logits in prop::collection::vec(-500.0..500.0f64, 1..8)) {
        let p = softmax(&logits);
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(p.iter().all(|&x| (0.0..=1.0).contains(&x)));
    }

    #[test]
    fn cross_entropy_is_nonnegative_and_gradient_sums_to_zero(logits in vec_of(2), label in 0usize..2, w in 0.1..5.0f64) {
        let (l, g) = cross_entropy(&Tensor::vector(logits), label, w);
        prop_assert!(l >= 0.0);
        prop_assert!(g.data.iter().sum::<f64>().abs() < 1e-12);
    }

    #[test]
    fn zero_gradient_step_is_a_no_op(vals in vec_of(6), lr in 0.0..1.0f64) {
        let mut g = ParamGroup { name: "g".into(), tensors: vec![Tensor::new(vec![2, 3], vals).unwrap()], trainable: true };
        let before = g.clone();
        let zeros = g.zeros_like();
        sgd_step(&mut g, &zeros, lr).unwrap();
        prop_assert_eq!(g, before);
    }

    #[test]
    fn random_mlps_pass_gradient_checks(seed in 0u64..1000, hidden in 1usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let net = Network::new(
            "mlp",
            &[3],
            vec![
                LayerSpec::Dense { inputs: 3, outputs: hidden },
                LayerSpec::Relu,
                LayerSpec::Dense { inputs: hidden, outputs: 2 },
            ],
            &mut rng,
        )
        .unwrap();
        let x = Tensor::vector(vec![0.3, -0.7, 1.1]);
        let target = Tensor::vector(vec![0.5, -0.25]);
        let (y, cache) = net.forward(&x).unwrap();
        let (_, gy) = mse_loss(&y, &target).unwrap();
        let (_, grads) = net.backward(&cache, &gy, false);
        let err = grad_check(&net.params.tensors, &grads, |point| {
            let mut n = net.clone();
            n.params.tensors = point.to_vec();
            mse_loss(&n.infer(&x).unwrap(), &target).unwrap().0
        });
        prop_assert!(err < 1e-4, "relative error {err}");
    }
}

#[test]
fn mse_example_from_the_definition() {
    let (l, g) = mse_loss(&Tensor::vector(vec![1.0, 2.0]), &Tensor::vector(vec![0.0, 0.0])).unwrap();
    assert_eq!(l, 2.5);
    assert_eq!(g.data, vec![1.0, 2.0]);
}

#[test]
fn mismatched_shapes_are_rejected() {
    assert!(mse_loss(&Tensor::vector(vec![1.0]), &Tensor::vector(vec![1.0, 2.0])).is_err());
    assert!(Tensor::new(vec![2, 2], vec![0.0; 3]).is_err());
}
