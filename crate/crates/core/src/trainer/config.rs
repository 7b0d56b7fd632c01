use serde::{Deserialize, Serialize};

use crate::datapipe::{DEFAULT_ELBOW_THRESHOLD, DEFAULT_K_MAX};
use crate::networks::NetworkConfig;
use crate::numcore::OptimizerKind;
use crate::{Error, Result};

/// Which EM estimate drives the re-identification gate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GateScope {
    /// Each head's EM against its own cluster.
    PerHead,
    /// Cluster-size-weighted mean of the per-head EMs; all heads switch together.
    Global,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReidSharing {
    /// One re-identification net per head, trained on that head's cluster.
    PerHead,
    /// A single net trained on all rows and used against every active head.
    Shared,
}

/// How a discriminator's update objective is formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiscriminatorObjective {
    /// Its own loss only.
    Own,
    /// Its own loss plus the sum of every other discriminator's loss.
    Combined,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub clip: f64,
    pub n_critic: usize,
    pub batch_size: usize,
    pub epochs: usize,
    pub w_reid: f64,
    pub em_gate: f64,
    pub gate_scope: GateScope,
    pub reid_sharing: ReidSharing,
    /// `false` keeps every re-identification net switched off regardless of EM.
    pub reid_enabled: bool,
    pub discriminator_objective: DiscriminatorObjective,
    pub critic_optimizer: OptimizerKind,
    pub generator_optimizer: OptimizerKind,
    pub reid_optimizer: OptimizerKind,
    /// Fixed head count; `None` selects it with the elbow rule.
    pub n_heads: Option<usize>,
    pub k_max: usize,
    pub elbow_threshold: f64,
    pub network: NetworkConfig,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.0002,
            clip: 0.05,
            n_critic: 5,
            batch_size: 64,
            epochs: 2000,
            w_reid: 1.0,
            em_gate: 0.3,
            gate_scope: GateScope::PerHead,
            reid_sharing: ReidSharing::PerHead,
            reid_enabled: true,
            discriminator_objective: DiscriminatorObjective::Own,
            critic_optimizer: OptimizerKind::Rmsprop,
            generator_optimizer: OptimizerKind::Rmsprop,
            reid_optimizer: OptimizerKind::Rmsprop,
            n_heads: None,
            k_max: DEFAULT_K_MAX,
            elbow_threshold: DEFAULT_ELBOW_THRESHOLD,
            network: NetworkConfig::default(),
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::arg(alloc::format!("{name} must be positive, got {v}")))
            }
        };
        positive("learning_rate", self.learning_rate)?;
        positive("clip", self.clip)?;
        positive("em_gate", self.em_gate)?;
        if !(self.w_reid >= 0.0 && self.w_reid.is_finite()) {
            return Err(Error::arg("w_reid must be non-negative"));
        }
        if self.n_critic == 0 || self.batch_size == 0 {
            return Err(Error::arg("n_critic and batch_size must be positive"));
        }
        if self.n_heads == Some(0) || self.k_max == 0 {
            return Err(Error::arg("head count must be positive"));
        }
        if self.network.noise_dim == 0 {
            return Err(Error::arg("noise_dim must be positive"));
        }
        Ok(())
    }
}
