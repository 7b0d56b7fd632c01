//! The three agent kinds: a multi-head generator with a shared trunk, one
//! realism critic per head, and re-identification discriminators that
//! predict the sensitive column from the remaining ones.

use alloc::format;
use alloc::vec::Vec;
use core::ops::Range;

use serde::{Deserialize, Serialize};

use crate::numcore::{Activation, Grads, LayerSpec, Network, Tape, Tensor};
use crate::rng;
use crate::{Error, Result};

/// Architecture block of the run configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkConfig {
    pub noise_dim: usize,
    pub trunk_widths: Vec<usize>,
    pub head_widths: Vec<usize>,
    pub hidden_activation: Activation,
    pub conv_kernel: usize,
    pub conv_channels: usize,
    pub critic_hidden: Vec<usize>,
    pub init_scale: f64,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        NetworkConfig {
            noise_dim: 32,
            trunk_widths: alloc::vec![64, 128],
            head_widths: alloc::vec![64],
            hidden_activation: Activation::Symlog,
            conv_kernel: 3,
            conv_channels: 8,
            critic_hidden: alloc::vec![64],
            init_scale: 0.05,
        }
    }
}

fn dense_stack(
    input: usize,
    widths: &[usize],
    hidden: Activation,
    out: Option<(usize, Activation)>,
) -> Result<Vec<LayerSpec>> {
    let mut specs = Vec::new();
    let mut w = input;
    for &h in widths {
        specs.push(LayerSpec::dense(w, h, hidden)?);
        w = h;
    }
    if let Some((o, act)) = out {
        specs.push(LayerSpec::dense(w, o, act)?);
    }
    Ok(specs)
}

/// Generator: `noise -> trunk -> head_h -> [0, 1]^out_features` per head.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Generator {
    trunk: Network,
    heads: Vec<Network>,
}

/// Activations of one generator forward pass.
#[derive(Debug, Clone)]
pub struct GeneratorTape {
    trunk: Tape,
    heads: Vec<Tape>,
    pub outputs: Vec<Tensor>,
}

impl Generator {
    pub fn build(n_heads: usize, out_features: usize, cfg: &NetworkConfig, seed: u64) -> Result<Self> {
        if n_heads == 0 {
            return Err(Error::arg("generator needs at least one head"));
        }
        if cfg.noise_dim == 0 || out_features == 0 || cfg.trunk_widths.is_empty() {
            return Err(Error::arg("noise_dim, out_features and trunk widths must be positive"));
        }
        let trunk_specs = dense_stack(cfg.noise_dim, &cfg.trunk_widths, cfg.hidden_activation, None)?;
        let trunk_out = *cfg.trunk_widths.last().expect("non-empty");
        let trunk = Network::init(&trunk_specs, cfg.init_scale, &mut rng::seeded(rng::derive_seed(seed, 0)))?;
        let head_specs = dense_stack(
            trunk_out,
            &cfg.head_widths,
            cfg.hidden_activation,
            Some((out_features, Activation::ClampedSymlog)),
        )?;
        let heads = (0..n_heads)
            .map(|h| {
                let mut r = rng::seeded(rng::derive_seed(seed, 1 + h as u64));
                Network::init(&head_specs, cfg.init_scale, &mut r)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Generator { trunk, heads })
    }

    pub fn from_parts(trunk: Network, heads: Vec<Network>) -> Result<Self> {
        if heads.is_empty() {
            return Err(Error::arg("generator needs at least one head"));
        }
        let out = heads[0].output_width();
        for (h, head) in heads.iter().enumerate() {
            if head.input_width() != trunk.output_width() {
                return Err(Error::dim(format!("head {h} input"), trunk.output_width(), head.input_width()));
            }
            if head.output_width() != out {
                return Err(Error::dim(format!("head {h} output"), out, head.output_width()));
            }
        }
        Ok(Generator { trunk, heads })
    }

    pub fn trunk(&self) -> &Network {
        &self.trunk
    }

    pub fn heads(&self) -> &[Network] {
        &self.heads
    }

    pub fn heads_mut(&mut self) -> &mut [Network] {
        &mut self.heads
    }

    pub fn n_heads(&self) -> usize {
        self.heads.len()
    }

    pub fn noise_dim(&self) -> usize {
        self.trunk.input_width()
    }

    pub fn out_features(&self) -> usize {
        self.heads[0].output_width()
    }

    /// Trunk parameters first, then each head's in order.
    pub fn params(&self) -> Vec<&Tensor> {
        let mut p = self.trunk.params();
        for h in &self.heads {
            p.extend(h.params());
        }
        p
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        let mut p = self.trunk.params_mut();
        for h in &mut self.heads {
            p.extend(h.params_mut());
        }
        p
    }

    /// Indices into [`Generator::params`] belonging to head `h`.
    pub fn head_param_range(&self, h: usize) -> Range<usize> {
        let per_head = 2 * self.heads[0].layers().len();
        let start = 2 * self.trunk.layers().len() + h * per_head;
        start..start + per_head
    }

    pub fn trunk_param_range(&self) -> Range<usize> {
        0..2 * self.trunk.layers().len()
    }

    fn check_noise(&self, noise: &Tensor) -> Result<()> {
        if noise.shape().len() != 2 || noise.cols() != self.noise_dim() {
            return Err(Error::dim("generator noise", self.noise_dim(), noise.cols()));
        }
        Ok(())
    }

    /// One synthetic batch per head.
    pub fn generate(&self, noise: &Tensor) -> Result<Vec<Tensor>> {
        self.check_noise(noise)?;
        let hidden = self.trunk.forward(noise)?;
        self.heads.iter().map(|h| h.forward(&hidden)).collect()
    }

    pub fn generate_head(&self, head: usize, noise: &Tensor) -> Result<Tensor> {
        self.check_noise(noise)?;
        let net = self
            .heads
            .get(head)
            .ok_or_else(|| Error::arg(format!("no generator head {head}")))?;
        net.forward(&self.trunk.forward(noise)?)
    }

    pub fn forward_tape(&self, noise: &Tensor) -> Result<GeneratorTape> {
        self.check_noise(noise)?;
        let (hidden, trunk) = self.trunk.forward_tape(noise)?;
        let mut heads = Vec::with_capacity(self.heads.len());
        let mut outputs = Vec::with_capacity(self.heads.len());
        for h in &self.heads {
            let (y, t) = h.forward_tape(&hidden)?;
            heads.push(t);
            outputs.push(y);
        }
        Ok(GeneratorTape { trunk, heads, outputs })
    }

    /// Gradients for all generator parameters given an upstream gradient per
    /// head output (`None` for heads that receive no loss).
    pub fn backward(&self, tape: &GeneratorTape, upstream: &[Option<Tensor>]) -> Result<Grads> {
        if upstream.len() != self.heads.len() || tape.heads.len() != self.heads.len() {
            return Err(Error::State(format!(
                "expected {} head gradients / tapes",
                self.heads.len()
            )));
        }
        let batch = tape.trunk.batch();
        let mut trunk_up = Tensor::zeros(&[batch, self.trunk.output_width()]);
        let mut head_grads = Vec::with_capacity(self.heads.len());
        for (h, (net, up)) in self.heads.iter().zip(upstream).enumerate() {
            match up {
                Some(g) => {
                    let (grads, dx) = net.backward(&tape.heads[h], g)?;
                    trunk_up.add_assign(&dx)?;
                    head_grads.push(grads);
                }
                None => head_grads.push(Grads::zeros_like(&net.params())),
            }
        }
        let (mut all, _) = self.trunk.backward(&tape.trunk, &trunk_up)?;
        for g in head_grads {
            all.extend(g);
        }
        Ok(all)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiscriminatorRole {
    Realism,
    Reid,
}

impl DiscriminatorRole {
    pub fn name(self) -> &'static str {
        match self {
            DiscriminatorRole::Realism => "critic",
            DiscriminatorRole::Reid => "reid",
        }
    }
}

/// A realism critic (unbounded score, higher means more real) or a
/// re-identification network (prediction of the sensitive value in `[0, 1]`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Discriminator {
    role: DiscriminatorRole,
    head_index: usize,
    net: Network,
}

fn discriminator_specs(input: usize, cfg: &NetworkConfig, out_act: Activation) -> Result<Vec<LayerSpec>> {
    let mut specs = Vec::new();
    let kernel = cfg.conv_kernel.min(input);
    let conv = LayerSpec::conv1d(input, kernel, cfg.conv_channels, cfg.hidden_activation)?;
    specs.push(conv);
    specs.extend(dense_stack(
        conv.output_width,
        &cfg.critic_hidden,
        cfg.hidden_activation,
        Some((1, out_act)),
    )?);
    Ok(specs)
}

impl Discriminator {
    /// Critic over full rows of `features` columns.
    pub fn critic(features: usize, head_index: usize, cfg: &NetworkConfig, seed: u64) -> Result<Self> {
        let specs = discriminator_specs(features, cfg, Activation::Linear)?;
        Ok(Discriminator {
            role: DiscriminatorRole::Realism,
            head_index,
            net: Network::init(&specs, cfg.init_scale, &mut rng::seeded(seed))?,
        })
    }

    /// Re-identification net over rows of `features` columns with the
    /// sensitive column removed (input width `features - 1`).
    pub fn reid(features: usize, head_index: usize, cfg: &NetworkConfig, seed: u64) -> Result<Self> {
        if features < 2 {
            return Err(Error::arg("re-identification needs at least one non-sensitive feature"));
        }
        let specs = discriminator_specs(features - 1, cfg, Activation::ClampedLinear)?;
        Ok(Discriminator {
            role: DiscriminatorRole::Reid,
            head_index,
            net: Network::init(&specs, cfg.init_scale, &mut rng::seeded(seed))?,
        })
    }

    pub fn from_parts(role: DiscriminatorRole, head_index: usize, net: Network) -> Result<Self> {
        if net.output_width() != 1 {
            return Err(Error::dim("discriminator output", 1, net.output_width()));
        }
        Ok(Discriminator { role, head_index, net })
    }

    pub fn role(&self) -> DiscriminatorRole {
        self.role
    }

    pub fn head_index(&self) -> usize {
        self.head_index
    }

    pub fn network(&self) -> &Network {
        &self.net
    }

    pub fn network_mut(&mut self) -> &mut Network {
        &mut self.net
    }

    pub fn name(&self) -> alloc::string::String {
        format!("{}_{}", self.role.name(), self.head_index)
    }

    fn expect_role(&self, role: DiscriminatorRole) -> Result<()> {
        if self.role != role {
            return Err(Error::arg(format!(
                "expected a {} discriminator, got {}",
                role.name(),
                self.role.name()
            )));
        }
        Ok(())
    }

    fn check_width(&self, batch: &Tensor) -> Result<()> {
        if batch.shape().len() != 2 || batch.cols() != self.net.input_width() {
            let context = match self.role {
                DiscriminatorRole::Realism => "critic input",
                DiscriminatorRole::Reid => "reid input (sensitive column must be removed)",
            };
            return Err(Error::dim(context, self.net.input_width(), batch.cols()));
        }
        Ok(())
    }

    /// `[batch x 1]` realism scores.
    pub fn realism_score(&self, batch: &Tensor) -> Result<Tensor> {
        self.expect_role(DiscriminatorRole::Realism)?;
        self.check_width(batch)?;
        self.net.forward(batch)
    }

    /// `[batch x 1]` predicted sensitive values from non-sensitive columns.
    pub fn reid_predict(&self, batch_nonsensitive: &Tensor) -> Result<Tensor> {
        self.expect_role(DiscriminatorRole::Reid)?;
        self.check_width(batch_nonsensitive)?;
        self.net.forward(batch_nonsensitive)
    }

    pub fn forward_tape(&self, batch: &Tensor) -> Result<(Tensor, Tape)> {
        self.check_width(batch)?;
        self.net.forward_tape(batch)
    }

    pub fn backward(&self, tape: &Tape, upstream: &Tensor) -> Result<(Grads, Tensor)> {
        self.net.backward(tape, upstream)
    }

    pub fn params(&self) -> Vec<&Tensor> {
        self.net.params()
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        self.net.params_mut()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numcore::{clip_weights, Optimizer, OptimizerKind};
    use alloc::vec;

    fn zeroed(mut g: Generator) -> Generator {
        for p in g.params_mut() {
            p.data_mut().fill(0.0);
        }
        g
    }

    fn normal_noise(batch: usize, dim: usize, seed: u64) -> Tensor {
        let mut r = rng::seeded(seed);
        Tensor::matrix(batch, dim, (0..batch * dim).map(|_| rng::standard_normal(&mut r)).collect()).unwrap()
    }

    #[test]
    fn five_heads_fourteen_features() {
        let cfg = NetworkConfig::default();
        let g = Generator::build(5, 14, &cfg, 1).unwrap();
        assert_eq!(g.n_heads(), 5);
        assert!(g.heads().iter().all(|h| h.output_width() == 14));
        assert!(Generator::build(0, 14, &cfg, 1).is_err());
        let single = Generator::build(1, 14, &cfg, 1).unwrap();
        assert_eq!(single.n_heads(), 1);
    }

    #[test]
    fn same_seed_same_params() {
        let cfg = NetworkConfig::default();
        assert_eq!(Generator::build(3, 6, &cfg, 9).unwrap(), Generator::build(3, 6, &cfg, 9).unwrap());
        assert_ne!(Generator::build(3, 6, &cfg, 9).unwrap(), Generator::build(3, 6, &cfg, 10).unwrap());
    }

    #[test]
    fn output_shapes_and_range() {
        let cfg = NetworkConfig::default();
        let g = Generator::build(3, 5, &cfg, 2).unwrap();
        let out = g.generate(&normal_noise(4, 32, 0)).unwrap();
        assert_eq!(out.len(), 3);
        for t in &out {
            assert_eq!(t.shape(), &[4, 5]);
            assert!(t.data().iter().all(|v| (0.0..=1.0).contains(v)));
        }
        assert!(g.generate(&normal_noise(4, 31, 0)).is_err());
    }

    #[test]
    fn zero_generator_outputs_half() {
        let g = zeroed(Generator::build(2, 4, &NetworkConfig::default(), 2).unwrap());
        for t in g.generate(&normal_noise(3, 32, 1)).unwrap() {
            assert!(t.data().iter().all(|&v| v == 0.5));
        }
    }

    #[test]
    fn outputs_bounded_for_large_weights() {
        let mut g = Generator::build(2, 4, &NetworkConfig::default(), 2).unwrap();
        for p in g.params_mut() {
            for v in p.data_mut() {
                *v *= 400.0;
            }
        }
        for t in g.generate(&normal_noise(16, 32, 1)).unwrap() {
            assert!(t.data().iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }

    #[test]
    fn perturbing_one_head_changes_only_it() {
        let g = Generator::build(3, 4, &NetworkConfig::default(), 5).unwrap();
        let noise = normal_noise(6, 32, 3);
        let before = g.generate(&noise).unwrap();
        let mut g2 = g.clone();
        for p in g2.heads_mut()[2].params_mut() {
            for v in p.data_mut() {
                *v += 0.01;
            }
        }
        let after = g2.generate(&noise).unwrap();
        assert_eq!(before[0], after[0]);
        assert_eq!(before[1], after[1]);
        assert_ne!(before[2], after[2]);
    }

    #[test]
    fn head_loss_gradient_isolated() {
        let g = Generator::build(3, 4, &NetworkConfig::default(), 5).unwrap();
        let tape = g.forward_tape(&normal_noise(8, 32, 3)).unwrap();
        let up = Tensor::filled(&[8, 4], 1.0);
        let grads = g.backward(&tape, &[None, Some(up), None]).unwrap();
        for h in [0, 2] {
            for i in g.head_param_range(h) {
                assert!(grads.0[i].data().iter().all(|&v| v == 0.0));
            }
        }
        assert!(g.head_param_range(1).any(|i| grads.0[i].max_abs() > 0.0));
        assert!(g.trunk_param_range().any(|i| grads.0[i].max_abs() > 0.0));
    }

    #[test]
    fn discriminator_contracts() {
        let cfg = NetworkConfig::default();
        let critic = Discriminator::critic(14, 0, &cfg, 1).unwrap();
        let reid = Discriminator::reid(14, 0, &cfg, 2).unwrap();
        let batch = Tensor::filled(&[5, 14], 0.3);
        assert_eq!(critic.realism_score(&batch).unwrap().shape(), &[5, 1]);
        assert!(critic.reid_predict(&batch).is_err());
        assert!(matches!(reid.reid_predict(&batch), Err(Error::Dimension { .. })));
        let ns = batch.without_column(13);
        let p = reid.reid_predict(&ns).unwrap();
        assert!(p.data().iter().all(|v| (0.0..=1.0).contains(v)));
        assert_eq!(critic.realism_score(&batch).unwrap(), critic.realism_score(&batch).unwrap());
    }

    #[test]
    fn zero_weight_discriminators() {
        let cfg = NetworkConfig::default();
        let mut critic = Discriminator::critic(6, 0, &cfg, 1).unwrap();
        let mut reid = Discriminator::reid(6, 0, &cfg, 1).unwrap();
        for p in critic.params_mut().into_iter().chain(reid.params_mut()) {
            p.data_mut().fill(0.0);
        }
        let x = normal_noise(4, 6, 1);
        assert!(critic.realism_score(&x).unwrap().data().iter().all(|&v| v == 0.0));
        assert!(reid.reid_predict(&x.without_column(5)).unwrap().data().iter().all(|&v| v == 0.5));
    }

    #[test]
    fn random_critic_is_translation_sensitive() {
        let cfg = NetworkConfig::default();
        for seed in 0..10 {
            let critic = Discriminator::critic(6, 0, &cfg, seed).unwrap();
            let a = critic.realism_score(&Tensor::filled(&[1, 6], 0.2)).unwrap();
            let b = critic.realism_score(&Tensor::filled(&[1, 6], 0.7)).unwrap();
            assert_ne!(a, b);
        }
    }

    #[test]
    fn critic_learns_two_point_problem() {
        let cfg = NetworkConfig::default();
        let mut critic = Discriminator::critic(1, 0, &cfg, 3).unwrap();
        let mut opt = Optimizer::new(OptimizerKind::Rmsprop, 0.0002, &critic.params()).unwrap();
        let real = Tensor::filled(&[8, 1], 0.8);
        let fake = Tensor::filled(&[8, 1], 0.2);
        for _ in 0..200 {
            // loss = mean(fake) - mean(real)
            let (_, tr) = critic.forward_tape(&real).unwrap();
            let (_, tf) = critic.forward_tape(&fake).unwrap();
            let (mut g, _) = critic.backward(&tr, &Tensor::filled(&[8, 1], -1.0 / 8.0)).unwrap();
            let (gf, _) = critic.backward(&tf, &Tensor::filled(&[8, 1], 1.0 / 8.0)).unwrap();
            g.accumulate(&gf).unwrap();
            opt.step(&mut critic.params_mut(), &g).unwrap();
            clip_weights(&mut critic.params_mut(), 0.05).unwrap();
        }
        let mean = |t: Tensor| t.data().iter().sum::<f64>() / t.len() as f64;
        assert!(mean(critic.realism_score(&real).unwrap()) > mean(critic.realism_score(&fake).unwrap()));
    }

    #[test]
    fn reid_learns_copy_column() {
        let cfg = NetworkConfig::default();
        let mut r = rng::seeded(4);
        let make = |r: &mut rng::ChaCha8Rng, n: usize| {
            let mut rows = vec![];
            for _ in 0..n {
                let mut row: Vec<f64> = (0..13).map(|_| rng::uniform(r, 0.0, 1.0)).collect();
                row.push(row[3]);
                rows.push(row);
            }
            Tensor::from_rows(&rows).unwrap()
        };
        let train = make(&mut r, 400);
        let test = make(&mut r, 200);
        let mut reid = Discriminator::reid(14, 0, &cfg, 8).unwrap();
        let mut opt = Optimizer::new(OptimizerKind::Adam, 0.002, &reid.params()).unwrap();
        for step in 0..500 {
            let idx: Vec<usize> = (0..64).map(|i| (step * 64 + i) % 400).collect();
            let batch = train.select_rows(&idx);
            let (pred, tape) = reid.forward_tape(&batch.without_column(13)).unwrap();
            let target = batch.column(13);
            let up: Vec<f64> = pred
                .data()
                .iter()
                .zip(&target)
                .map(|(p, t)| 2.0 * (p - t) / 64.0)
                .collect();
            let (g, _) = reid.backward(&tape, &Tensor::matrix(64, 1, up).unwrap()).unwrap();
            opt.step(&mut reid.params_mut(), &g).unwrap();
        }
        let pred = reid.reid_predict(&test.without_column(13)).unwrap();
        let mae = pred.data().iter().zip(test.column(13)).map(|(p, t)| (p - t).abs()).sum::<f64>() / 200.0;
        assert!(mae < 0.05, "held-out MAE {mae}");
    }
}
