use rand::Rng;

use super::{LayerSpec, ParamGroup, Tensor};
use crate::error::{Error, Result};

/// Sequential stack of layers owning one parameter group.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub layers: Vec<LayerSpec>,
    pub params: ParamGroup,
    input_shape: Vec<usize>,
    output_shape: Vec<usize>,
    /// Index of each layer's first tensor in `params.tensors`.
    offsets: Vec<usize>,
}

/// Activations recorded by [`Network::forward`]: the input followed by every layer output.
#[derive(Debug, Clone)]
pub struct Cache {
    pub activations: Vec<Tensor>,
}

impl Cache {
    pub fn output(&self) -> &Tensor {
        self.activations.last().expect("cache holds at least the input")
    }
}

impl Network {
    /// Builds the stack and draws fan-in scaled uniform weights; biases start at zero.
    pub fn new<R: Rng + ?Sized>(name: &str, input_shape: &[usize], layers: Vec<LayerSpec>, rng: &mut R) -> Result<Self> {
        let mut shape = input_shape.to_vec();
        let mut tensors = Vec::new();
        let mut offsets = Vec::with_capacity(layers.len());
        for layer in &layers {
            layer.validate()?;
            shape = layer.output_shape(&shape)?;
            offsets.push(tensors.len());
            let shapes = layer.param_shapes();
            if let [w_shape, b_shape] = shapes.as_slice() {
                let bound = (6.0 / layer.fan_in() as f64).sqrt();
                let n: usize = w_shape.iter().product();
                let w = (0..n).map(|_| rng.gen_range(-bound..bound)).collect();
                tensors.push(Tensor::new(w_shape.clone(), w)?);
                tensors.push(Tensor::zeros(b_shape));
            }
        }
        if layers.is_empty() {
            return Err(Error::InvalidConfig(format!("network {name} has no layers")));
        }
        Ok(Self {
            layers,
            params: ParamGroup { name: name.to_string(), tensors, trainable: true },
            input_shape: input_shape.to_vec(),
            output_shape: shape,
            offsets,
        })
    }

    pub fn name(&self) -> &str {
        &self.params.name
    }

    pub fn input_shape(&self) -> &[usize] {
        &self.input_shape
    }

    pub fn output_len(&self) -> usize {
        self.output_shape.iter().product()
    }

    pub fn param_count(&self) -> usize {
        self.params.param_count()
    }

    fn layer_params(&self, i: usize) -> &[Tensor] {
        let n = self.layers[i].param_shapes().len();
        &self.params.tensors[self.offsets[i]..self.offsets[i] + n]
    }

    pub fn forward(&self, x: &Tensor) -> Result<(Tensor, Cache)> {
        if x.shape != self.input_shape {
            return Err(Error::ShapeMismatch(format!(
                "{} expects input {:?}, got {:?}",
                self.name(),
                self.input_shape,
                x.shape
            )));
        }
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        activations.push(x.clone());
        for (i, layer) in self.layers.iter().enumerate() {
            let y = layer.forward(self.layer_params(i), activations.last().unwrap())?;
            activations.push(y);
        }
        let out = activations.last().unwrap().clone();
        Ok((out, Cache { activations }))
    }

    /// Output only, without keeping intermediate activations.
    pub fn infer(&self, x: &Tensor) -> Result<Tensor> {
        if x.shape != self.input_shape {
            return Err(Error::ShapeMismatch(format!(
                "{} expects input {:?}, got {:?}",
                self.name(),
                self.input_shape,
                x.shape
            )));
        }
        let mut cur = x.clone();
        for (i, layer) in self.layers.iter().enumerate() {
            cur = layer.forward(self.layer_params(i), &cur)?;
        }
        Ok(cur)
    }

    /// Backpropagates `gy` through the cached pass. Returns the input gradient
    /// (when asked for) and gradients aligned with `params.tensors`.
    pub fn backward(&self, cache: &Cache, gy: &Tensor, want_input_grad: bool) -> (Option<Tensor>, Vec<Tensor>) {
        let mut grads: Vec<Option<Tensor>> = vec![None; self.params.tensors.len()];
        let mut g = gy.clone();
        let mut gx = None;
        for i in (0..self.layers.len()).rev() {
            let need = i > 0 || want_input_grad;
            let (gin, pg) = self.layers[i].backward(
                self.layer_params(i),
                &cache.activations[i],
                &cache.activations[i + 1],
                &g,
                need,
            );
            for (k, t) in pg.into_iter().enumerate() {
                grads[self.offsets[i] + k] = Some(t);
            }
            match gin {
                Some(t) if i > 0 => g = t,
                other => gx = other,
            }
        }
        (gx, grads.into_iter().map(|t| t.expect("every tensor receives a gradient")).collect())
    }
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    #[test]
    fn init_is_seeded() {
        let layers = vec![LayerSpec::Dense { inputs: 4, outputs: 3 }, LayerSpec::Relu];
        let a = Network::new("a", &[4], layers.clone(), &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        let b = Network::new("a", &[4], layers.clone(), &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        let c = Network::new("a", &[4], layers, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_eq!(a.param_count(), 15);
    }

    #[test]
    fn rejects_inconsistent_stack() {
        let layers = vec![LayerSpec::Dense { inputs: 4, outputs: 3 }, LayerSpec::Dense { inputs: 5, outputs: 1 }];
        assert!(Network::new("bad", &[4], layers, &mut ChaCha8Rng::seed_from_u64(0)).is_err());
    }

    #[test]
    fn infer_matches_forward() {
        let layers = vec![
            LayerSpec::Conv2d { in_channels: 1, out_channels: 2, kernel: 3, stride: 2, in_h: 7, in_w: 7 },
            LayerSpec::Relu,
            LayerSpec::Flatten,
            LayerSpec::Dense { inputs: 18, outputs: 2 },
        ];
        let net = Network::new("n", &[1, 7, 7], layers, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        let x = Tensor::new(vec![1, 7, 7], (0..49).map(|i| (i as f64 * 0.37).sin()).collect()).unwrap();
        assert_eq!(net.forward(&x).unwrap().0, net.infer(&x).unwrap());
    }
}
