use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Layer, LayerKind, LayerSpec, Tensor};
use crate::{Error, Result};

/// A feed-forward stack of layers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    layers: Vec<Layer>,
}

/// Activations recorded by [`Network::forward_tape`], consumed by
/// [`Network::backward`].
#[derive(Debug, Clone)]
pub struct Tape {
    inputs: Vec<Tensor>,
    pre: Vec<Tensor>,
}

impl Tape {
    pub fn batch(&self) -> usize {
        self.inputs.first().map_or(0, Tensor::rows)
    }
}

/// Parameter gradients, one tensor per parameter tensor in
/// [`Network::params`] order.
#[derive(Debug, Clone, PartialEq)]
pub struct Grads(pub Vec<Tensor>);

impl Grads {
    pub fn zeros_like(params: &[&Tensor]) -> Self {
        Grads(params.iter().map(|p| Tensor::zeros(p.shape())).collect())
    }

    /// Tensors filled with `-0.0`, the exact additive identity under IEEE
    /// addition (`-0.0 + x == x` bitwise for every `x`, including `+0.0`).
    pub fn additive_identity_like(params: &[&Tensor]) -> Self {
        Grads(params.iter().map(|p| Tensor::filled(p.shape(), -0.0)).collect())
    }

    pub fn accumulate(&mut self, other: &Grads) -> Result<()> {
        if self.0.len() != other.0.len() {
            return Err(Error::dim("gradient accumulate", self.0.len(), other.0.len()));
        }
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            a.add_assign(b)?;
        }
        Ok(())
    }

    pub fn extend(&mut self, other: Grads) {
        self.0.extend(other.0);
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0, |m, t| m.max(t.max_abs()))
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|t| t.data().iter().all(|&x| x == 0.0))
    }
}

fn describe(index: usize, spec: &LayerSpec) -> String {
    let kind = match spec.kind {
        LayerKind::Dense => "dense",
        LayerKind::Conv1d { .. } => "conv1d",
    };
    format!(
        "layer {index} ({kind} {}->{})",
        spec.input_width, spec.output_width
    )
}

impl Network {
    pub fn new(layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::arg("network needs at least one layer"));
        }
        for (i, pair) in layers.windows(2).enumerate() {
            if pair[0].spec.output_width != pair[1].spec.input_width {
                return Err(Error::dim(
                    describe(i + 1, &pair[1].spec),
                    pair[0].spec.output_width,
                    pair[1].spec.input_width,
                ));
            }
        }
        Ok(Network { layers })
    }

    pub fn init<R: Rng + ?Sized>(specs: &[LayerSpec], scale: f64, rng: &mut R) -> Result<Self> {
        let layers = specs
            .iter()
            .map(|&s| Layer::init(s, scale, rng))
            .collect::<Result<Vec<_>>>()?;
        Self::new(layers)
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn input_width(&self) -> usize {
        self.layers[0].spec.input_width
    }

    pub fn output_width(&self) -> usize {
        self.layers[self.layers.len() - 1].spec.output_width
    }

    pub fn specs(&self) -> Vec<LayerSpec> {
        self.layers.iter().map(|l| l.spec).collect()
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(Layer::param_count).sum()
    }

    /// Parameter tensors in `(weight, bias)` order per layer.
    pub fn params(&self) -> Vec<&Tensor> {
        self.layers
            .iter()
            .flat_map(|l| [&l.weight, &l.bias])
            .collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        self.layers
            .iter_mut()
            .flat_map(|l| [&mut l.weight, &mut l.bias])
            .collect()
    }

    fn check_input(&self, input: &Tensor) -> Result<()> {
        let spec = &self.layers[0].spec;
        if input.shape().len() != 2 || input.cols() != spec.input_width {
            return Err(Error::dim(describe(0, spec), spec.input_width, input.cols()));
        }
        Ok(())
    }

    pub fn forward(&self, input: &Tensor) -> Result<Tensor> {
        self.check_input(input)?;
        let mut x = input.clone();
        for layer in &self.layers {
            let mut z = layer.affine(&x);
            let act = layer.spec.activation;
            for v in z.data_mut() {
                *v = act.apply(*v);
            }
            x = z;
        }
        Ok(x)
    }

    /// Forward pass that records what [`Network::backward`] needs.
    pub fn forward_tape(&self, input: &Tensor) -> Result<(Tensor, Tape)> {
        self.check_input(input)?;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut x = input.clone();
        for layer in &self.layers {
            let z = layer.affine(&x);
            let act = layer.spec.activation;
            let mut y = z.clone();
            for v in y.data_mut() {
                *v = act.apply(*v);
            }
            inputs.push(x);
            pre.push(z);
            x = y;
        }
        Ok((x, Tape { inputs, pre }))
    }

    /// Reverse-mode pass. Returns the parameter gradients and the gradient
    /// with respect to the network input.
    pub fn backward(&self, tape: &Tape, upstream: &Tensor) -> Result<(Grads, Tensor)> {
        if tape.pre.len() != self.layers.len() {
            return Err(Error::State(format!(
                "tape records {} layers, network has {}",
                tape.pre.len(),
                self.layers.len()
            )));
        }
        for (i, (layer, z)) in self.layers.iter().zip(&tape.pre).enumerate() {
            if z.cols() != layer.spec.output_width || tape.inputs[i].cols() != layer.spec.input_width {
                return Err(Error::State(format!(
                    "tape does not match {}",
                    describe(i, &layer.spec)
                )));
            }
        }
        let batch = tape.batch();
        let out_w = self.output_width();
        if upstream.shape() != [batch, out_w] {
            return Err(Error::dim("upstream gradient", batch * out_w, upstream.len()));
        }

        let mut grads = Vec::with_capacity(2 * self.layers.len());
        let mut g = upstream.clone();
        for (i, layer) in self.layers.iter().enumerate().rev() {
            let act = layer.spec.activation;
            let mut dz = g;
            for (d, &z) in dz.data_mut().iter_mut().zip(tape.pre[i].data()) {
                *d *= act.grad(z);
            }
            let (dw, db, dx) = layer.affine_backward(&tape.inputs[i], &dz);
            grads.push(db);
            grads.push(dw);
            g = dx;
        }
        grads.reverse();
        Ok((Grads(grads), g))
    }
}
