//! Numeric check of the equilibrium condition: no bounded perturbation of
//! one agent's parameters, others held fixed, should improve that agent's
//! cost by more than a slack `epsilon`.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::config::TrainConfig;
use super::epoch::{generator_objective, Agents, TrainData};
use super::losses::{combined_loss, critic_loss, reid_fit_loss};
use crate::numcore::Tensor;
use crate::rng::{self, ChaCha8Rng};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumProbeConfig {
    /// Max-norm radius of each perturbation.
    pub gamma: f64,
    pub epsilon: f64,
    pub trials: usize,
    pub seed: u64,
    /// Rows per head in the fixed evaluation batches.
    pub batch_size: usize,
}

impl Default for EquilibriumProbeConfig {
    fn default() -> Self {
        EquilibriumProbeConfig {
            gamma: 0.01,
            epsilon: 1e-3,
            trials: 64,
            seed: 0,
            batch_size: 256,
        }
    }
}

impl EquilibriumProbeConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(Error::arg(format!("probe gamma must be positive, got {}", self.gamma)));
        }
        if !(self.epsilon >= 0.0) {
            return Err(Error::arg("probe epsilon must be non-negative"));
        }
        if self.trials == 0 || self.batch_size == 0 {
            return Err(Error::arg("probe trials and batch size must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentRole {
    Minimizer,
    Maximizer,
}

/// A game as seen by the probe. Each agent owns a parameter list and has a
/// scalar cost it minimizes or maximizes.
pub trait Game {
    fn n_agents(&self) -> usize;
    fn agent_name(&self, agent: usize) -> String;
    fn role(&self, agent: usize) -> AgentRole;
    fn params(&self, agent: usize) -> Vec<Tensor>;
    fn set_params(&mut self, agent: usize, params: &[Tensor]) -> Result<()>;
    fn cost(&self, agent: usize) -> Result<f64>;

    /// Maps perturbed parameters back onto the agent's feasible set.
    fn project(&self, _agent: usize, _params: &mut [Tensor]) {}
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentProbe {
    pub name: String,
    pub role: AgentRole,
    pub base_cost: f64,
    /// `perturbed_cost - base_cost` per trial.
    pub deltas: Vec<f64>,
    pub passes: usize,
    pub pass_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    pub config: EquilibriumProbeConfig,
    pub agents: Vec<AgentProbe>,
}

impl ProbeReport {
    pub fn min_pass_fraction(&self) -> f64 {
        self.agents.iter().map(|a| a.pass_fraction).fold(1.0, f64::min)
    }
}

fn perturb(params: &[Tensor], gamma: f64, rng: &mut ChaCha8Rng) -> Vec<Tensor> {
    params
        .iter()
        .map(|p| {
            let mut q = p.clone();
            q.data_mut().iter_mut().for_each(|v| *v += rng::uniform(rng, -gamma, gamma));
            q
        })
        .collect()
}

/// Perturbs each agent in turn, `cfg.trials` times, and records whether the
/// unperturbed point is at least as good within `cfg.epsilon`.
pub fn equilibrium_probe<G: Game>(game: &mut G, cfg: &EquilibriumProbeConfig) -> Result<ProbeReport> {
    cfg.validate()?;
    let mut agents = Vec::with_capacity(game.n_agents());
    for a in 0..game.n_agents() {
        let role = game.role(a);
        let original = game.params(a);
        let base = game.cost(a)?;
        let mut rng = rng::seeded(rng::derive_seed(cfg.seed, a as u64));
        let mut deltas = Vec::with_capacity(cfg.trials);
        let mut passes = 0;
        for _ in 0..cfg.trials {
            let mut trial = perturb(&original, cfg.gamma, &mut rng);
            game.project(a, &mut trial);
            game.set_params(a, &trial)?;
            let cost = game.cost(a);
            game.set_params(a, &original)?;
            let delta = cost? - base;
            let pass = match role {
                AgentRole::Minimizer => base <= base + delta + cfg.epsilon,
                AgentRole::Maximizer => base >= base + delta - cfg.epsilon,
            };
            passes += pass as usize;
            deltas.push(delta);
        }
        agents.push(AgentProbe {
            name: game.agent_name(a),
            role,
            base_cost: base,
            deltas,
            passes,
            pass_fraction: passes as f64 / cfg.trials as f64,
        });
    }
    Ok(ProbeReport { config: *cfg, agents })
}

/// `min_x max_y x*y`, with its saddle at the origin.
#[derive(Debug, Clone, PartialEq)]
pub struct BilinearGame {
    pub x: f64,
    pub y: f64,
}

impl Game for BilinearGame {
    fn n_agents(&self) -> usize {
        2
    }

    fn agent_name(&self, agent: usize) -> String {
        String::from(if agent == 0 { "x" } else { "y" })
    }

    fn role(&self, agent: usize) -> AgentRole {
        if agent == 0 {
            AgentRole::Minimizer
        } else {
            AgentRole::Maximizer
        }
    }

    fn params(&self, agent: usize) -> Vec<Tensor> {
        let v = if agent == 0 { self.x } else { self.y };
        vec![Tensor::filled(&[1], v)]
    }

    fn set_params(&mut self, agent: usize, params: &[Tensor]) -> Result<()> {
        let v = params
            .first()
            .and_then(|t| t.data().first().copied())
            .ok_or(Error::Empty("bilinear parameter"))?;
        if agent == 0 {
            self.x = v;
        } else {
            self.y = v;
        }
        Ok(())
    }

    fn cost(&self, _agent: usize) -> Result<f64> {
        Ok(self.x * self.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Slot {
    Generator,
    Critic(usize),
    Reid(usize),
}

/// The trained system as a game. Every discriminator maximizes the negated
/// combined loss `-(own + sum of the other discriminators)`; the generator
/// minimizes its objective with the re-identification term of every head;
/// the gate schedules training only and plays no part here. Critic
/// perturbations are projected back into the weight-clip box. All costs use
/// fixed evaluation batches, so every trial sees the same rows and noise.
pub struct HydraGame {
    agents: Agents,
    slots: Vec<Slot>,
    all_heads: Vec<bool>,
    sensitive: usize,
    w_reid: f64,
    clip: f64,
    real: Vec<Tensor>,
    reid_rows: Vec<Tensor>,
    noise: Tensor,
}

impl HydraGame {
    pub fn new(
        agents: &Agents,
        data: &TrainData,
        train: &TrainConfig,
        probe: &EquilibriumProbeConfig,
    ) -> Result<Self> {
        probe.validate()?;
        let k = agents.n_heads();
        if data.partitions.len() != k {
            return Err(Error::dim("probe heads", k, data.partitions.len()));
        }
        let mut r = rng::seeded(rng::derive_seed(probe.seed, 0xE0));
        let draw = |m: &Tensor, r: &mut ChaCha8Rng| {
            use rand::Rng;
            let idx: Vec<usize> = (0..probe.batch_size).map(|_| r.gen_range(0..m.rows())).collect();
            m.select_rows(&idx)
        };
        let real: Vec<Tensor> = data.partitions.iter().map(|p| draw(p, &mut r)).collect();
        let reid_rows = if agents.reids.len() == 1 && k > 1 {
            let mut all = Vec::new();
            for p in &data.partitions {
                all.extend_from_slice(p.data());
            }
            let total = Tensor::matrix(all.len() / data.n_features(), data.n_features(), all)?;
            vec![draw(&total, &mut r)]
        } else {
            real.clone()
        };
        let noise_dim = agents.generator.noise_dim();
        let noise = Tensor::matrix(
            probe.batch_size,
            noise_dim,
            (0..probe.batch_size * noise_dim).map(|_| rng::standard_normal(&mut r)).collect(),
        )?;
        let mut slots = vec![Slot::Generator];
        slots.extend((0..k).map(Slot::Critic));
        slots.extend((0..agents.reids.len()).map(Slot::Reid));
        Ok(HydraGame {
            agents: agents.clone(),
            slots,
            all_heads: vec![!agents.reids.is_empty(); k],
            sensitive: data.sensitive_index,
            w_reid: train.w_reid,
            clip: train.clip,
            real,
            reid_rows,
            noise,
        })
    }

    fn own_loss(&self, slot: Slot, fakes: &[Tensor]) -> Result<f64> {
        match slot {
            Slot::Critic(h) => {
                let c = &self.agents.critics[h];
                critic_loss(&c.realism_score(&self.real[h])?, &c.realism_score(&fakes[h])?)
            }
            Slot::Reid(i) => {
                let rows = &self.reid_rows[i];
                let y = Tensor::matrix(rows.rows(), 1, rows.column(self.sensitive))?;
                let pred = self.agents.reids[i].reid_predict(&rows.without_column(self.sensitive))?;
                reid_fit_loss(&y, &pred)
            }
            Slot::Generator => unreachable!("generator has no discriminator loss"),
        }
    }
}

impl Game for HydraGame {
    fn n_agents(&self) -> usize {
        self.slots.len()
    }

    fn agent_name(&self, agent: usize) -> String {
        match self.slots[agent] {
            Slot::Generator => String::from("generator"),
            Slot::Critic(h) => self.agents.critics[h].name(),
            Slot::Reid(i) => self.agents.reids[i].name(),
        }
    }

    fn role(&self, agent: usize) -> AgentRole {
        match self.slots[agent] {
            Slot::Generator => AgentRole::Minimizer,
            _ => AgentRole::Maximizer,
        }
    }

    fn params(&self, agent: usize) -> Vec<Tensor> {
        let p = match self.slots[agent] {
            Slot::Generator => self.agents.generator.params(),
            Slot::Critic(h) => self.agents.critics[h].params(),
            Slot::Reid(i) => self.agents.reids[i].params(),
        };
        p.into_iter().cloned().collect()
    }

    fn set_params(&mut self, agent: usize, params: &[Tensor]) -> Result<()> {
        let mut dst = match self.slots[agent] {
            Slot::Generator => self.agents.generator.params_mut(),
            Slot::Critic(h) => self.agents.critics[h].params_mut(),
            Slot::Reid(i) => self.agents.reids[i].params_mut(),
        };
        if dst.len() != params.len() {
            return Err(Error::dim("probe parameters", dst.len(), params.len()));
        }
        for (d, s) in dst.iter_mut().zip(params) {
            if !d.same_shape(s) {
                return Err(Error::State(String::from("probe parameter shape changed")));
            }
            d.data_mut().copy_from_slice(s.data());
        }
        Ok(())
    }

    fn project(&self, agent: usize, params: &mut [Tensor]) {
        if let Slot::Critic(_) = self.slots[agent] {
            for p in params {
                p.data_mut().iter_mut().for_each(|v| *v = v.clamp(-self.clip, self.clip));
            }
        }
    }

    fn cost(&self, agent: usize) -> Result<f64> {
        let fakes = self.agents.generator.generate(&self.noise)?;
        let slot = self.slots[agent];
        if slot == Slot::Generator {
            let obj = generator_objective(&self.agents, &fakes, &self.all_heads, self.sensitive, self.w_reid, false)?;
            return Ok(obj.total);
        }
        let own = self.own_loss(slot, &fakes)?;
        let others = self
            .slots
            .iter()
            .filter(|&&s| s != slot && s != Slot::Generator)
            .map(|&s| self.own_loss(s, &fakes))
            .collect::<Result<Vec<_>>>()?;
        Ok(-combined_loss(own, &others).total)
    }
}
