//! Adversarial training of the generator against per-head critics and
//! re-identification nets, and the equilibrium perturbation probe.

mod config;
mod epoch;
mod gate;
mod losses;
mod probe;

pub use config::{DiscriminatorObjective, GateScope, ReidSharing, TrainConfig};
pub use epoch::{
    sample_synthetic, train_epoch, AgentOptimizers, Agents, EpochRecord, TrainData, Trainer, TrainingState,
};
pub use gate::{em_gate, global_em};
pub use losses::{
    combined_loss, combined_losses, critic_loss, critic_loss_grads, generator_realism_grad,
    generator_realism_loss, reid_adversarial_grads, reid_adversarial_loss, reid_fit_grad, reid_fit_loss,
    CombinedLossBreakdown, REID_TARGET_DEVIATION,
};
pub use probe::{
    equilibrium_probe, AgentProbe, AgentRole, BilinearGame, EquilibriumProbeConfig, Game, HydraGame,
    ProbeReport,
};
