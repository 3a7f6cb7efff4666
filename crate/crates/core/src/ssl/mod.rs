//! Self-supervised objective and the graph augmentations it contrasts.

mod augment;
mod objective;

pub use augment::{corrupt, Augmentation, AugmentationPreset};
pub use objective::{
    dgi_loss, dgi_loss_on, discriminate, discriminate_on, discriminator_logits_on, feae_loss,
    objective_on, readout, readout_on, recon_losses, recon_losses_on, reconstruct, reconstruct_on,
    LossBreakdown, ObjectiveSettings, ObjectiveVars, Reduction, SslMode, SslParams, SslVars,
};
