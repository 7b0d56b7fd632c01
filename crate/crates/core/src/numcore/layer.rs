use alloc::format;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Activation, Tensor};
use crate::{rng, Error, Result};

/// Dot product with four interleaved partial sums, combined in a fixed order.
#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for i in 0..4 {
            acc[i] += x[i] * y[i];
        }
    }
    let mut tail = 0.0;
    for (x, y) in ra.iter().zip(rb) {
        tail += x * y;
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayerKind {
    Dense,
    /// Single-input-channel valid convolution with stride 1. Output is laid
    /// out channel-major: `channels` blocks of `input_width - kernel_size + 1`.
    Conv1d { kernel_size: usize, channels: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub kind: LayerKind,
    pub input_width: usize,
    pub output_width: usize,
    pub activation: Activation,
}

impl LayerSpec {
    pub fn dense(input_width: usize, output_width: usize, activation: Activation) -> Result<Self> {
        let spec = LayerSpec {
            kind: LayerKind::Dense,
            input_width,
            output_width,
            activation,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn conv1d(
        input_width: usize,
        kernel_size: usize,
        channels: usize,
        activation: Activation,
    ) -> Result<Self> {
        if kernel_size == 0 || kernel_size > input_width {
            return Err(Error::arg(format!(
                "conv1d kernel_size {kernel_size} must be in 1..={input_width}"
            )));
        }
        let spec = LayerSpec {
            kind: LayerKind::Conv1d {
                kernel_size,
                channels,
            },
            input_width,
            output_width: channels * (input_width - kernel_size + 1),
            activation,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_width == 0 || self.output_width == 0 {
            return Err(Error::arg("layer widths must be positive"));
        }
        if let LayerKind::Conv1d {
            kernel_size,
            channels,
        } = self.kind
        {
            if kernel_size == 0 || kernel_size > self.input_width || channels == 0 {
                return Err(Error::arg(format!(
                    "conv1d kernel_size {kernel_size} / channels {channels} invalid for width {}",
                    self.input_width
                )));
            }
            let expect = channels * (self.input_width - kernel_size + 1);
            if expect != self.output_width {
                return Err(Error::dim("conv1d output_width", expect, self.output_width));
            }
        }
        Ok(())
    }

    pub fn weight_shape(&self) -> [usize; 2] {
        match self.kind {
            LayerKind::Dense => [self.output_width, self.input_width],
            LayerKind::Conv1d {
                kernel_size,
                channels,
            } => [channels, kernel_size],
        }
    }

    pub fn bias_len(&self) -> usize {
        match self.kind {
            LayerKind::Dense => self.output_width,
            LayerKind::Conv1d { channels, .. } => channels,
        }
    }
}

/// A layer spec together with its parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub spec: LayerSpec,
    pub weight: Tensor,
    pub bias: Tensor,
}

impl Layer {
    /// Weights uniform in `[-scale, scale]`, zero biases.
    pub fn init<R: Rng + ?Sized>(spec: LayerSpec, scale: f64, rng: &mut R) -> Result<Self> {
        spec.validate()?;
        let [r, c] = spec.weight_shape();
        let mut weight = Tensor::zeros(&[r, c]);
        for w in weight.data_mut() {
            *w = rng::uniform(rng, -scale, scale);
        }
        Ok(Layer {
            spec,
            weight,
            bias: Tensor::zeros(&[spec.bias_len()]),
        })
    }

    pub fn from_parts(spec: LayerSpec, weight: Tensor, bias: Tensor) -> Result<Self> {
        spec.validate()?;
        let [r, c] = spec.weight_shape();
        if weight.shape() != [r, c] {
            return Err(Error::dim("layer weight", r * c, weight.len()));
        }
        if bias.shape() != [spec.bias_len()] {
            return Err(Error::dim("layer bias", spec.bias_len(), bias.len()));
        }
        Ok(Layer { spec, weight, bias })
    }

    pub fn zeroed(spec: LayerSpec) -> Result<Self> {
        let [r, c] = spec.weight_shape();
        Self::from_parts(spec, Tensor::zeros(&[r, c]), Tensor::zeros(&[spec.bias_len()]))
    }

    /// Affine part of the layer: `[batch x input_width] -> [batch x output_width]`.
    pub(crate) fn affine(&self, input: &Tensor) -> Tensor {
        let batch = input.rows();
        let out_w = self.spec.output_width;
        let mut out = Tensor::zeros(&[batch, out_w]);
        let w = self.weight.data();
        let b = self.bias.data();
        match self.spec.kind {
            LayerKind::Dense => {
                let in_w = self.spec.input_width;
                for n in 0..batch {
                    let x = input.row(n);
                    let z = out.row_mut(n);
                    for (o, zo) in z.iter_mut().enumerate() {
                        let wrow = &w[o * in_w..(o + 1) * in_w];
                        *zo = b[o] + dot(wrow, x);
                    }
                }
            }
            LayerKind::Conv1d {
                kernel_size,
                channels,
            } => {
                let positions = self.spec.input_width - kernel_size + 1;
                for n in 0..batch {
                    let x = input.row(n);
                    let z = out.row_mut(n);
                    for c in 0..channels {
                        let k = &w[c * kernel_size..(c + 1) * kernel_size];
                        for p in 0..positions {
                            z[c * positions + p] = b[c]
                                + k.iter()
                                    .zip(&x[p..p + kernel_size])
                                    .map(|(a, v)| a * v)
                                    .sum::<f64>();
                        }
                    }
                }
            }
        }
        out
    }

    /// Given the layer input and the gradient w.r.t. the pre-activation,
    /// returns `(d weight, d bias, d input)`.
    pub(crate) fn affine_backward(&self, input: &Tensor, dz: &Tensor) -> (Tensor, Tensor, Tensor) {
        let batch = input.rows();
        let in_w = self.spec.input_width;
        let [wr, wc] = self.spec.weight_shape();
        let mut dw = Tensor::zeros(&[wr, wc]);
        let mut db = Tensor::zeros(&[self.spec.bias_len()]);
        let mut dx = Tensor::zeros(&[batch, in_w]);
        let w = self.weight.data();
        match self.spec.kind {
            LayerKind::Dense => {
                for n in 0..batch {
                    let x = input.row(n);
                    let g = dz.row(n);
                    let dxr = dx.row_mut(n);
                    for (o, &go) in g.iter().enumerate() {
                        if go == 0.0 {
                            continue;
                        }
                        db.data_mut()[o] += go;
                        let dwr = &mut dw.data_mut()[o * in_w..(o + 1) * in_w];
                        for (d, xv) in dwr.iter_mut().zip(x) {
                            *d += go * xv;
                        }
                        let wrow = &w[o * in_w..(o + 1) * in_w];
                        for (d, wv) in dxr.iter_mut().zip(wrow) {
                            *d += go * wv;
                        }
                    }
                }
            }
            LayerKind::Conv1d {
                kernel_size,
                channels,
            } => {
                let positions = in_w - kernel_size + 1;
                for n in 0..batch {
                    let x = input.row(n);
                    let g = dz.row(n);
                    let dxr = dx.row_mut(n);
                    for c in 0..channels {
                        for p in 0..positions {
                            let go = g[c * positions + p];
                            if go == 0.0 {
                                continue;
                            }
                            db.data_mut()[c] += go;
                            for t in 0..kernel_size {
                                dw.data_mut()[c * kernel_size + t] += go * x[p + t];
                                dxr[p + t] += go * w[c * kernel_size + t];
                            }
                        }
                    }
                }
            }
        }
        (dw, db, dx)
    }

    pub fn param_count(&self) -> usize {
        self.weight.len() + self.bias.len()
    }
}
