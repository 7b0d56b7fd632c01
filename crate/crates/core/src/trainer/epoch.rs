//! Agent bundle, training state and the epoch loop.
//!
//! Randomness for one epoch is drawn from `TrainingState::rng` in this order:
//! for each head `h`, for each critic step, `batch_size` row indices into
//! partition `h` and then `batch_size * noise_dim` noise values (row major);
//! then one batch of row indices per re-identification update; then
//! `batch_size * noise_dim` noise values for the generator step.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::config::{DiscriminatorObjective, GateScope, ReidSharing, TrainConfig};
use super::gate::{em_gate, global_em};
use super::losses::{
    combined_losses, critic_loss, critic_loss_grads, generator_realism_grad, generator_realism_loss,
    reid_adversarial_grads, reid_adversarial_loss, reid_fit_grad, reid_fit_loss, CombinedLossBreakdown,
};
use crate::datapipe::{kmeans, partition, select_k_elbow, ClusteringResult, Dataset};
use crate::evaluator::mean_feature_em;
use crate::networks::{Discriminator, Generator, NetworkConfig};
use crate::numcore::{clip_weights, Grads, Optimizer, Tensor};
use crate::rng::{self, ChaCha8Rng};
use crate::{Error, Result};

const STREAM_GENERATOR: u64 = 1;
const STREAM_CLUSTER: u64 = 2;
const STREAM_TRAIN: u64 = 3;
const STREAM_CRITIC: u64 = 1000;
const STREAM_REID: u64 = 2000;

/// Generator plus one critic per head and the re-identification nets
/// (one per head, or a single shared one; none for single-column data).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Agents {
    pub generator: Generator,
    pub critics: Vec<Discriminator>,
    pub reids: Vec<Discriminator>,
}

impl Agents {
    pub fn build(n_heads: usize, features: usize, sharing: ReidSharing, cfg: &NetworkConfig, seed: u64) -> Result<Self> {
        let generator = Generator::build(n_heads, features, cfg, rng::derive_seed(seed, STREAM_GENERATOR))?;
        let critics = (0..n_heads)
            .map(|h| Discriminator::critic(features, h, cfg, rng::derive_seed(seed, STREAM_CRITIC + h as u64)))
            .collect::<Result<Vec<_>>>()?;
        let n_reid = match sharing {
            _ if features < 2 => 0,
            ReidSharing::PerHead => n_heads,
            ReidSharing::Shared => 1,
        };
        let reids = (0..n_reid)
            .map(|h| Discriminator::reid(features, h, cfg, rng::derive_seed(seed, STREAM_REID + h as u64)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Agents {
            generator,
            critics,
            reids,
        })
    }

    pub fn n_heads(&self) -> usize {
        self.generator.n_heads()
    }

    pub fn sharing(&self) -> ReidSharing {
        if self.reids.len() == 1 && self.n_heads() > 1 {
            ReidSharing::Shared
        } else {
            ReidSharing::PerHead
        }
    }

    /// Index into `reids` of the net watching head `h`.
    pub fn reid_for(&self, h: usize) -> usize {
        if self.reids.len() == 1 {
            0
        } else {
            h
        }
    }

    /// Critics, then re-identification nets.
    pub fn discriminators(&self) -> impl Iterator<Item = &Discriminator> {
        self.critics.iter().chain(self.reids.iter())
    }
}

/// Normalized training rows split by cluster.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainData {
    pub partitions: Vec<Tensor>,
    pub sensitive_index: usize,
}

impl TrainData {
    pub fn new(partitions: Vec<Tensor>, sensitive_index: usize) -> Result<Self> {
        let first = partitions.first().ok_or(Error::Empty("training partitions"))?;
        let cols = first.cols();
        for (h, p) in partitions.iter().enumerate() {
            if p.shape().len() != 2 || p.rows() == 0 {
                return Err(Error::arg(format!("partition {h} is empty")));
            }
            if p.cols() != cols {
                return Err(Error::dim(format!("partition {h} columns"), cols, p.cols()));
            }
        }
        if sensitive_index >= cols {
            return Err(Error::arg("sensitive index out of range"));
        }
        Ok(TrainData {
            partitions,
            sensitive_index,
        })
    }

    pub fn n_features(&self) -> usize {
        self.partitions[0].cols()
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.partitions.iter().map(Tensor::rows).collect()
    }

    /// Row `i` of the concatenation of all partitions.
    fn global_row(&self, mut i: usize) -> &[f64] {
        for p in &self.partitions {
            if i < p.rows() {
                return p.row(i);
            }
            i -= p.rows();
        }
        unreachable!("row index within total")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentOptimizers {
    pub generator: Optimizer,
    pub critics: Vec<Optimizer>,
    pub reids: Vec<Optimizer>,
}

impl AgentOptimizers {
    pub fn new(agents: &Agents, cfg: &TrainConfig) -> Result<Self> {
        let lr = cfg.learning_rate;
        Ok(AgentOptimizers {
            generator: Optimizer::new(cfg.generator_optimizer, lr, &agents.generator.params())?,
            critics: agents
                .critics
                .iter()
                .map(|c| Optimizer::new(cfg.critic_optimizer, lr, &c.params()))
                .collect::<Result<_>>()?,
            reids: agents
                .reids
                .iter()
                .map(|r| Optimizer::new(cfg.reid_optimizer, lr, &r.params()))
                .collect::<Result<_>>()?,
        })
    }
}

/// Losses and gate status recorded after one epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Loss of the last critic step, per head.
    pub critic_losses: Vec<f64>,
    /// Fit loss per re-identification net; `None` when it did not train.
    pub reid_losses: Vec<Option<f64>>,
    pub generator_loss: f64,
    pub generator_realism: Vec<f64>,
    pub generator_reid: Vec<Option<f64>>,
    pub per_head_em: Vec<f64>,
    pub reid_active: Vec<bool>,
    /// Combined losses over the discriminators that trained this epoch,
    /// critics first.
    pub combined: Vec<CombinedLossBreakdown>,
}

#[derive(Debug, Clone)]
pub struct TrainingState {
    pub epoch: usize,
    pub per_head_em: Vec<f64>,
    pub reid_active: Vec<bool>,
    pub seed: u64,
    pub rng: ChaCha8Rng,
    pub optimizers: AgentOptimizers,
    pub history: Vec<EpochRecord>,
}

impl TrainingState {
    pub fn new(agents: &Agents, cfg: &TrainConfig) -> Result<Self> {
        let k = agents.n_heads();
        Ok(TrainingState {
            epoch: 0,
            per_head_em: vec![f64::NAN; k],
            reid_active: vec![false; k],
            seed: cfg.seed,
            rng: rng::seeded(rng::derive_seed(cfg.seed, STREAM_TRAIN)),
            optimizers: AgentOptimizers::new(agents, cfg)?,
            history: Vec::new(),
        })
    }
}

fn noise_batch(rng: &mut ChaCha8Rng, rows: usize, dim: usize) -> Tensor {
    let data = (0..rows * dim).map(|_| rng::standard_normal(rng)).collect();
    Tensor::matrix(rows, dim, data).expect("noise shape")
}

fn sample_indices(rng: &mut ChaCha8Rng, n: usize, batch: usize) -> Vec<usize> {
    (0..batch).map(|_| rng.gen_range(0..n)).collect()
}

fn column_matrix(m: &Tensor, j: usize) -> Tensor {
    Tensor::matrix(m.rows(), 1, m.column(j)).expect("column shape")
}

/// Gradient of the other discriminators' summed losses with respect to one
/// discriminator's parameters. Those losses are functions of their own
/// parameters and the generator only, so this is the additive identity.
fn lambda_gradient(params: &[&Tensor]) -> Grads {
    Grads::additive_identity_like(params)
}

fn check_finite(what: &str, v: f64, epoch: usize) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFinite(format!("{what} at epoch {epoch}")))
    }
}

/// One critic update on head `h`; returns the loss and the batches used.
fn critic_step(
    h: usize,
    agents: &mut Agents,
    opt: &mut Optimizer,
    data: &TrainData,
    rng: &mut ChaCha8Rng,
    cfg: &TrainConfig,
) -> Result<(f64, Tensor, Tensor)> {
    let part = &data.partitions[h];
    let idx = sample_indices(rng, part.rows(), cfg.batch_size);
    let real = part.select_rows(&idx);
    let noise = noise_batch(rng, cfg.batch_size, agents.generator.noise_dim());
    let fake = agents.generator.generate_head(h, &noise)?;

    let critic = &mut agents.critics[h];
    let (score_real, tape_real) = critic.forward_tape(&real)?;
    let (score_fake, tape_fake) = critic.forward_tape(&fake)?;
    let loss = critic_loss(&score_real, &score_fake)?;
    let (up_real, up_fake) = critic_loss_grads(&score_real, &score_fake);
    let (mut grads, _) = critic.backward(&tape_real, &up_real)?;
    let (g_fake, _) = critic.backward(&tape_fake, &up_fake)?;
    grads.accumulate(&g_fake)?;
    if cfg.discriminator_objective == DiscriminatorObjective::Combined {
        grads.accumulate(&lambda_gradient(&critic.params()))?;
    }
    opt.step(&mut critic.params_mut(), &grads)?;
    clip_weights(&mut critic.params_mut(), cfg.clip)?;
    Ok((loss, real, fake))
}

fn reid_step(
    r: usize,
    rows: &Tensor,
    agents: &mut Agents,
    opt: &mut Optimizer,
    sensitive: usize,
    cfg: &TrainConfig,
) -> Result<f64> {
    let net = &mut agents.reids[r];
    let x = rows.without_column(sensitive);
    let y = column_matrix(rows, sensitive);
    let (pred, tape) = net.forward_tape(&x)?;
    let loss = reid_fit_loss(&y, &pred)?;
    let up = reid_fit_grad(&y, &pred)?;
    let (mut grads, _) = net.backward(&tape, &up)?;
    if cfg.discriminator_objective == DiscriminatorObjective::Combined {
        grads.accumulate(&lambda_gradient(&net.params()))?;
    }
    opt.step(&mut net.params_mut(), &grads)?;
    Ok(loss)
}

/// Value and per-head output gradients of the generator objective
/// `sum_h [-mean critic_h(fake_h) + w_reid * reid_adv_h]`, where the
/// re-identification term is present only for active heads.
pub(crate) struct GeneratorObjective {
    pub total: f64,
    pub realism: Vec<f64>,
    pub reid: Vec<Option<f64>>,
    pub upstream: Vec<Option<Tensor>>,
}

pub(crate) fn generator_objective(
    agents: &Agents,
    outputs: &[Tensor],
    reid_active: &[bool],
    sensitive: usize,
    w_reid: f64,
    with_grads: bool,
) -> Result<GeneratorObjective> {
    let k = agents.n_heads();
    let mut out = GeneratorObjective {
        total: 0.0,
        realism: Vec::with_capacity(k),
        reid: Vec::with_capacity(k),
        upstream: Vec::with_capacity(k),
    };
    for (h, fake) in outputs.iter().enumerate() {
        let critic = &agents.critics[h];
        let (score, tape) = critic.forward_tape(fake)?;
        let realism = generator_realism_loss(&score)?;
        out.total += realism;
        out.realism.push(realism);
        let mut up = if with_grads {
            Some(critic.backward(&tape, &generator_realism_grad(&score))?.1)
        } else {
            None
        };
        if reid_active[h] {
            let net = &agents.reids[agents.reid_for(h)];
            let x = fake.without_column(sensitive);
            let y_true = column_matrix(fake, sensitive);
            let (y_pred, tape) = net.forward_tape(&x)?;
            let adv = reid_adversarial_loss(&y_true, &y_pred)?;
            out.total += w_reid * adv;
            out.reid.push(Some(adv));
            if let Some(up) = up.as_mut() {
                let (mut g_true, mut g_pred) = reid_adversarial_grads(&y_true, &y_pred)?;
                g_true.data_mut().iter_mut().for_each(|g| *g *= w_reid);
                g_pred.data_mut().iter_mut().for_each(|g| *g *= w_reid);
                let (_, dx) = net.backward(&tape, &g_pred)?;
                let cols = fake.cols();
                for i in 0..fake.rows() {
                    let row = up.row_mut(i);
                    let mut src = 0;
                    for (j, slot) in row.iter_mut().enumerate().take(cols) {
                        if j == sensitive {
                            *slot += g_true.data()[i];
                        } else {
                            *slot += dx.row(i)[src];
                            src += 1;
                        }
                    }
                }
            }
        } else {
            out.reid.push(None);
        }
        out.upstream.push(up);
    }
    Ok(out)
}

/// One epoch: critic updates per head, the gate, re-identification fits and
/// one generator update. Returns the record appended to `state.history`.
pub fn train_epoch(
    state: &mut TrainingState,
    data: &TrainData,
    agents: &mut Agents,
    cfg: &TrainConfig,
) -> Result<EpochRecord> {
    let k = agents.n_heads();
    if data.partitions.len() != k {
        return Err(Error::dim("training partitions", k, data.partitions.len()));
    }
    if data.n_features() != agents.generator.out_features() {
        return Err(Error::dim("training columns", agents.generator.out_features(), data.n_features()));
    }
    let epoch = state.epoch;
    let s = data.sensitive_index;

    let mut critic_losses = Vec::with_capacity(k);
    let mut em = Vec::with_capacity(k);
    for h in 0..k {
        let mut last = None;
        for _ in 0..cfg.n_critic {
            last = Some(critic_step(h, agents, &mut state.optimizers.critics[h], data, &mut state.rng, cfg)?);
        }
        let (loss, real, fake) = last.expect("n_critic >= 1");
        critic_losses.push(check_finite("critic loss", loss, epoch)?);
        em.push(mean_feature_em(&real, &fake, 0)?.mean);
    }
    state.per_head_em = em;

    if cfg.reid_enabled && !agents.reids.is_empty() {
        state.reid_active = match cfg.gate_scope {
            GateScope::PerHead => em_gate(&state.per_head_em, &state.reid_active, cfg.em_gate),
            GateScope::Global => {
                let g = global_em(&state.per_head_em, &data.sizes());
                em_gate(&vec![g; k], &state.reid_active, cfg.em_gate)
            }
        };
    }

    let mut reid_losses = vec![None; agents.reids.len()];
    for (r, slot) in reid_losses.iter_mut().enumerate() {
        let trains = match agents.sharing() {
            ReidSharing::PerHead => state.reid_active[r],
            ReidSharing::Shared => state.reid_active.iter().any(|&a| a),
        };
        if !trains {
            continue;
        }
        let rows = match agents.sharing() {
            ReidSharing::PerHead => {
                let part = &data.partitions[r];
                part.select_rows(&sample_indices(&mut state.rng, part.rows(), cfg.batch_size))
            }
            ReidSharing::Shared => {
                let total: usize = data.sizes().iter().sum();
                let idx = sample_indices(&mut state.rng, total, cfg.batch_size);
                let mut flat = Vec::with_capacity(idx.len() * data.n_features());
                for i in idx {
                    flat.extend_from_slice(data.global_row(i));
                }
                Tensor::matrix(cfg.batch_size, data.n_features(), flat)?
            }
        };
        let loss = reid_step(r, &rows, agents, &mut state.optimizers.reids[r], s, cfg)?;
        *slot = Some(check_finite("reid loss", loss, epoch)?);
    }

    let noise = noise_batch(&mut state.rng, cfg.batch_size, agents.generator.noise_dim());
    let tape = agents.generator.forward_tape(&noise)?;
    let obj = generator_objective(agents, &tape.outputs, &state.reid_active, s, cfg.w_reid, true)?;
    let grads = agents.generator.backward(&tape, &obj.upstream)?;
    state.optimizers.generator.step(&mut agents.generator.params_mut(), &grads)?;
    check_finite("generator loss", obj.total, epoch)?;

    let own: Vec<f64> = critic_losses
        .iter()
        .copied()
        .chain(reid_losses.iter().flatten().copied())
        .collect();
    let record = EpochRecord {
        epoch,
        critic_losses,
        reid_losses,
        generator_loss: obj.total,
        generator_realism: obj.realism,
        generator_reid: obj.reid,
        per_head_em: state.per_head_em.clone(),
        reid_active: state.reid_active.clone(),
        combined: combined_losses(&own),
    };
    state.history.push(record.clone());
    state.epoch += 1;
    Ok(record)
}

/// Draws `n` synthetic rows, choosing each row's head with probability
/// proportional to `weights` (cluster sizes).
pub fn sample_synthetic(generator: &Generator, weights: &[usize], n: usize, seed: u64) -> Result<Tensor> {
    if weights.len() != generator.n_heads() {
        return Err(Error::dim("head weights", generator.n_heads(), weights.len()));
    }
    let total: usize = weights.iter().sum();
    if total == 0 {
        return Err(Error::arg("head weights sum to zero"));
    }
    let mut r = rng::seeded(seed);
    let heads: Vec<usize> = (0..n)
        .map(|_| {
            let mut u = r.gen_range(0..total);
            weights
                .iter()
                .position(|&w| {
                    if u < w {
                        true
                    } else {
                        u -= w;
                        false
                    }
                })
                .expect("draw below total")
        })
        .collect();
    let d = generator.out_features();
    let mut out = vec![0.0; n * d];
    for h in 0..generator.n_heads() {
        let rows: Vec<usize> = (0..n).filter(|&i| heads[i] == h).collect();
        if rows.is_empty() {
            continue;
        }
        let noise = noise_batch(&mut r, rows.len(), generator.noise_dim());
        let fake = generator.generate_head(h, &noise)?;
        for (j, &i) in rows.iter().enumerate() {
            out[i * d..(i + 1) * d].copy_from_slice(fake.row(j));
        }
    }
    Tensor::matrix(n, d, out)
}

/// A full training run: clustering, agents, optimizer state and history.
#[derive(Debug, Clone)]
pub struct Trainer {
    pub config: TrainConfig,
    pub clustering: ClusteringResult,
    pub data: TrainData,
    pub agents: Agents,
    pub state: TrainingState,
}

impl Trainer {
    /// `dataset` must already be normalized.
    pub fn new(dataset: &Dataset, config: TrainConfig) -> Result<Self> {
        config.validate()?;
        if !dataset.is_normalized() {
            return Err(Error::State(String::from("training data must be normalized")));
        }
        let seed = rng::derive_seed(config.seed, STREAM_CLUSTER);
        let clustering = match config.n_heads {
            Some(k) => kmeans(dataset.matrix(), k, seed)?,
            None => select_k_elbow(dataset.matrix(), config.k_max, config.elbow_threshold, seed)?,
        };
        let parts = partition(dataset, &clustering)?;
        let data = TrainData::new(
            parts.into_iter().map(|p| p.dataset.matrix().clone()).collect(),
            dataset.sensitive_index(),
        )?;
        let agents = Agents::build(
            clustering.k,
            dataset.n_features(),
            config.reid_sharing,
            &config.network,
            config.seed,
        )?;
        let state = TrainingState::new(&agents, &config)?;
        Ok(Trainer {
            config,
            clustering,
            data,
            agents,
            state,
        })
    }

    pub fn train_epoch(&mut self) -> Result<EpochRecord> {
        train_epoch(&mut self.state, &self.data, &mut self.agents, &self.config)
    }

    /// Runs the configured number of epochs, calling `on_epoch` after each.
    pub fn run(&mut self, mut on_epoch: impl FnMut(&EpochRecord)) -> Result<()> {
        while self.state.epoch < self.config.epochs {
            let rec = self.train_epoch()?;
            on_epoch(&rec);
        }
        Ok(())
    }

    pub fn sample(&self, n: usize, seed: u64) -> Result<Tensor> {
        sample_synthetic(&self.agents.generator, &self.data.sizes(), n, seed)
    }
}
