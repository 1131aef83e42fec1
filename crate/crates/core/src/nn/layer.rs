use super::Tensor;
use crate::error::{Error, Result};

/// One stage of a sequential network.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerSpec {
    /// `y = W x + b`, `W: [outputs, inputs]`.
    Dense { inputs: usize, outputs: usize },
    /// Valid (unpadded) convolution over `[in_channels, in_h, in_w]` input.
    Conv2d {
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        stride: usize,
        in_h: usize,
        in_w: usize,
    },
    Relu,
    Flatten,
    Softmax,
}

impl LayerSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            LayerSpec::Dense { .. } => "dense",
            LayerSpec::Conv2d { .. } => "conv2d",
            LayerSpec::Relu => "relu",
            LayerSpec::Flatten => "flatten",
            LayerSpec::Softmax => "softmax",
        }
    }

    pub fn conv_out_dims(&self) -> Option<(usize, usize)> {
        match *self {
            LayerSpec::Conv2d { kernel, stride, in_h, in_w, .. } => {
                Some(((in_h - kernel) / stride + 1, (in_w - kernel) / stride + 1))
            }
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            LayerSpec::Dense { inputs, outputs } if inputs == 0 || outputs == 0 => {
                Err(Error::InvalidConfig("dense layer sizes must be positive".into()))
            }
            LayerSpec::Conv2d { in_channels, out_channels, kernel, stride, in_h, in_w } => {
                if in_channels == 0 || out_channels == 0 || kernel == 0 || stride == 0 {
                    return Err(Error::InvalidConfig("conv sizes must be positive".into()));
                }
                if kernel > in_h || kernel > in_w {
                    return Err(Error::InvalidConfig(format!(
                        "kernel {kernel} larger than input {in_h}x{in_w}"
                    )));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// Shapes of the weight and bias tensors, empty for parameter-free layers.
    pub fn param_shapes(&self) -> Vec<Vec<usize>> {
        match *self {
            LayerSpec::Dense { inputs, outputs } => vec![vec![outputs, inputs], vec![outputs]],
            LayerSpec::Conv2d { in_channels, out_channels, kernel, .. } => {
                vec![vec![out_channels, in_channels, kernel, kernel], vec![out_channels]]
            }
            _ => Vec::new(),
        }
    }

    pub fn fan_in(&self) -> usize {
        match *self {
            LayerSpec::Dense { inputs, .. } => inputs,
            LayerSpec::Conv2d { in_channels, kernel, .. } => in_channels * kernel * kernel,
            _ => 0,
        }
    }

    /// Shape this layer produces from `input`.
    pub fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        let n: usize = input.iter().product();
        match *self {
            LayerSpec::Dense { inputs, outputs } => {
                if n != inputs {
                    return Err(Error::ShapeMismatch(format!("dense expects {inputs} inputs, got {input:?}")));
                }
                Ok(vec![outputs])
            }
            LayerSpec::Conv2d { in_channels, out_channels, in_h, in_w, .. } => {
                if input != [in_channels, in_h, in_w] {
                    return Err(Error::ShapeMismatch(format!(
                        "conv expects [{in_channels}, {in_h}, {in_w}], got {input:?}"
                    )));
                }
                let (oh, ow) = self.conv_out_dims().unwrap();
                Ok(vec![out_channels, oh, ow])
            }
            LayerSpec::Relu => Ok(input.to_vec()),
            LayerSpec::Flatten | LayerSpec::Softmax => Ok(vec![n]),
        }
    }

    pub fn forward(&self, params: &[Tensor], x: &Tensor) -> Result<Tensor> {
        let shape = self.output_shape(&x.shape)?;
        let data = match *self {
            LayerSpec::Dense { inputs, outputs } => {
                let (w, b) = (&params[0].data, &params[1].data);
                (0..outputs)
                    .map(|o| {
                        let row = &w[o * inputs..(o + 1) * inputs];
                        b[o] + row.iter().zip(&x.data).map(|(a, c)| a * c).sum::<f64>()
                    })
                    .collect()
            }
            LayerSpec::Conv2d { .. } => conv_forward(self, params, &x.data),
            LayerSpec::Relu => x.data.iter().map(|&v| v.max(0.0)).collect(),
            LayerSpec::Flatten => x.data.clone(),
            LayerSpec::Softmax => super::softmax(&x.data),
        };
        Ok(Tensor { shape, data })
    }

    /// Returns `(grad_input, param_grads)`. `grad_input` is `None` when not requested.
    pub fn backward(
        &self,
        params: &[Tensor],
        x: &Tensor,
        y: &Tensor,
        gy: &Tensor,
        want_input_grad: bool,
    ) -> (Option<Tensor>, Vec<Tensor>) {
        match *self {
            LayerSpec::Dense { inputs, outputs } => {
                let w = &params[0].data;
                let mut gw = vec![0.0; inputs * outputs];
                for o in 0..outputs {
                    let g = gy.data[o];
                    if g != 0.0 {
                        for (d, xi) in gw[o * inputs..(o + 1) * inputs].iter_mut().zip(&x.data) {
                            *d = g * xi;
                        }
                    }
                }
                let gx = want_input_grad.then(|| {
                    let mut gx = vec![0.0; inputs];
                    for o in 0..outputs {
                        let g = gy.data[o];
                        if g != 0.0 {
                            for (d, wi) in gx.iter_mut().zip(&w[o * inputs..(o + 1) * inputs]) {
                                *d += g * wi;
                            }
                        }
                    }
                    Tensor { shape: x.shape.clone(), data: gx }
                });
                let grads = vec![
                    Tensor { shape: vec![outputs, inputs], data: gw },
                    Tensor { shape: vec![outputs], data: gy.data.clone() },
                ];
                (gx, grads)
            }
            LayerSpec::Conv2d { .. } => {
                let (gx, gw, gb) = conv_backward(self, params, &x.data, &gy.data, want_input_grad);
                let shapes = self.param_shapes();
                let gx = gx.map(|d| Tensor { shape: x.shape.clone(), data: d });
                (
                    gx,
                    vec![
                        Tensor { shape: shapes[0].clone(), data: gw },
                        Tensor { shape: shapes[1].clone(), data: gb },
                    ],
                )
            }
            LayerSpec::Relu => {
                let gx = want_input_grad.then(|| Tensor {
                    shape: x.shape.clone(),
                    data: x.data.iter().zip(&gy.data).map(|(&v, &g)| if v > 0.0 { g } else { 0.0 }).collect(),
                });
                (gx, Vec::new())
            }
            LayerSpec::Flatten => {
                let gx = want_input_grad.then(|| Tensor { shape: x.shape.clone(), data: gy.data.clone() });
                (gx, Vec::new())
            }
            LayerSpec::Softmax => {
                let gx = want_input_grad.then(|| {
                    let dot: f64 = y.data.iter().zip(&gy.data).map(|(a, b)| a * b).sum();
                    Tensor {
                        shape: x.shape.clone(),
                        data: y.data.iter().zip(&gy.data).map(|(&s, &g)| s * (g - dot)).collect(),
                    }
                });
                (gx, Vec::new())
            }
        }
    }
}

fn conv_forward(spec: &LayerSpec, params: &[Tensor], x: &[f64]) -> Vec<f64> {
    let LayerSpec::Conv2d { in_channels, out_channels, kernel, stride, in_h, in_w } = *spec else {
        unreachable!()
    };
    let (oh, ow) = spec.conv_out_dims().unwrap();
    let (w, b) = (&params[0].data, &params[1].data);
    let mut out = vec![0.0; out_channels * oh * ow];
    for oc in 0..out_channels {
        let plane = &mut out[oc * oh * ow..(oc + 1) * oh * ow];
        plane.iter_mut().for_each(|v| *v = b[oc]);
        for ic in 0..in_channels {
            let src = &x[ic * in_h * in_w..(ic + 1) * in_h * in_w];
            for ki in 0..kernel {
                for kj in 0..kernel {
                    let wv = w[((oc * in_channels + ic) * kernel + ki) * kernel + kj];
                    for oy in 0..oh {
                        let row = &src[(oy * stride + ki) * in_w + kj..];
                        let dst = &mut plane[oy * ow..(oy + 1) * ow];
                        for (ox, d) in dst.iter_mut().enumerate() {
                            *d += wv * row[ox * stride];
                        }
                    }
                }
            }
        }
    }
    out
}

#[allow(clippy::type_complexity)]
fn conv_backward(
    spec: &LayerSpec,
    params: &[Tensor],
    x: &[f64],
    gy: &[f64],
    want_input_grad: bool,
) -> (Option<Vec<f64>>, Vec<f64>, Vec<f64>) {
    let LayerSpec::Conv2d { in_channels, out_channels, kernel, stride, in_h, in_w } = *spec else {
        unreachable!()
    };
    let (oh, ow) = spec.conv_out_dims().unwrap();
    let w = &params[0].data;
    let mut gw = vec![0.0; w.len()];
    let mut gb = vec![0.0; out_channels];
    let mut gx = want_input_grad.then(|| vec![0.0; x.len()]);
    for oc in 0..out_channels {
        let g = &gy[oc * oh * ow..(oc + 1) * oh * ow];
        gb[oc] = g.iter().sum();
        for ic in 0..in_channels {
            let src = &x[ic * in_h * in_w..(ic + 1) * in_h * in_w];
            for ki in 0..kernel {
                for kj in 0..kernel {
                    let widx = ((oc * in_channels + ic) * kernel + ki) * kernel + kj;
                    let mut acc = 0.0;
                    for oy in 0..oh {
                        let row = &src[(oy * stride + ki) * in_w + kj..];
                        let grow = &g[oy * ow..(oy + 1) * ow];
                        for (ox, gv) in grow.iter().enumerate() {
                            acc += gv * row[ox * stride];
                        }
                    }
                    gw[widx] = acc;
                    if let Some(gx) = gx.as_mut() {
                        let wv = w[widx];
                        let dst = &mut gx[ic * in_h * in_w..(ic + 1) * in_h * in_w];
                        for oy in 0..oh {
                            let base = (oy * stride + ki) * in_w + kj;
                            let grow = &g[oy * ow..(oy + 1) * ow];
                            for (ox, gv) in grow.iter().enumerate() {
                                dst[base + ox * stride] += wv * gv;
                            }
                        }
                    }
                }
            }
        }
    }
    (gx, gw, gb)
}
