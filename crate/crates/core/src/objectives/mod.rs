//! Loss and gradient estimators: soft-label contrastive VI, the ELBO, and
//! self-normalized importance-sampled forward KL with and without its
//! control variate.

mod estimators;
mod spec;

pub use estimators::{
    classifier_logits, compute_labels, draw_contrast_set, elbo_loss_grad, loss_grad,
    lv_snis_fkl_grad, lv_snis_fkl_on_set, normalization_term_grad_identity_check,
    snis_fkl_loss_grad, snis_fkl_on_set, softcvi_loss_grad, softcvi_on_set, ContrastSet, Diagnostics, LossGrad,
};
pub use spec::{EstimatorKind, NegativeKind, NegativeSpec, ObjectiveSpec};
