use serde::{Deserialize, Serialize};

use super::spec::{EstimatorKind, NegativeKind, NegativeSpec, ObjectiveSpec};
use crate::distributions::VariationalFamily;
use crate::error::{Error, Result};
use crate::models::ModelTask;
use crate::numeric::autodiff::constants;
use crate::numeric::reduce::{effective_sample_size, entropy};
use crate::numeric::{log_sum_exp, log_sum_exp_real, softmax, ParamVector, Real, RngKey, SampleMatrix, Tape, Var};

/// Per-evaluation diagnostics. Fields that do not apply to an estimator
/// are `None`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub label_entropy: Option<f64>,
    pub max_label: Option<f64>,
    /// Effective sample size of the labels or weights.
    pub ess: Option<f64>,
    /// Largest |z_k| among the label log-ratios.
    pub max_abs_z: Option<f64>,
    /// Set when the negative is the improper flat density.
    pub flat_negative: bool,
}

#[derive(Clone, Debug)]
pub struct LossGrad {
    pub loss: f64,
    pub grad: Vec<f64>,
    pub diagnostics: Diagnostics,
}

/// K draws from the proposal `q_φ` with their (constant) log-joints.
#[derive(Clone, Debug)]
pub struct ContrastSet {
    pub theta: SampleMatrix,
    pub log_joint: Vec<f64>,
    /// `log π(θ_k)`, the proposal density; π is `q_φ` at draw time.
    pub log_proposal: Vec<f64>,
}

impl ContrastSet {
    pub fn k(&self) -> usize {
        self.theta.n_rows()
    }

    /// Assembles a set from explicit draws.
    pub fn from_parts(task: &ModelTask, theta: SampleMatrix, log_proposal: Vec<f64>) -> Self {
        let log_joint = theta.rows().map(|t| task.log_joint(t)).collect();
        ContrastSet {
            theta,
            log_joint,
            log_proposal,
        }
    }
}

pub fn draw_contrast_set(
    task: &ModelTask,
    family: &VariationalFamily,
    phi: &ParamVector,
    key: RngKey,
    k: usize,
) -> Result<ContrastSet> {
    let (theta, log_proposal) = family.sample_with_log_prob(phi, key, k)?;
    Ok(ContrastSet::from_parts(task, theta, log_proposal))
}

/// `log p⁻_base(θ_k)`: the proposal for proposal-power negatives, the joint
/// for joint-power negatives.
fn negative_base<'a>(set: &'a ContrastSet, log_proposal: &'a [f64], neg: &NegativeSpec) -> &'a [f64] {
    match neg.kind {
        NegativeKind::ProposalPower => log_proposal,
        NegativeKind::JointPower => &set.log_joint,
    }
}

fn log_ratios(log_joint: &[f64], base: &[f64], alpha: f64) -> Vec<f64> {
    log_joint
        .iter()
        .zip(base)
        .map(|(&lp, &b)| if alpha == 0.0 { lp } else { lp - alpha * b })
        .collect()
}

fn labels_from(z: &[f64], set: &ContrastSet) -> Result<Vec<f64>> {
    softmax(z).map_err(|_| Error::DegenerateLabels {
        k: set.k(),
        theta: set.theta.rows().map(<[f64]>::to_vec).collect(),
    })
}

/// Soft labels `y = softmax(z)`, `z_k = log p(θ_k, x_obs) - α log p⁻_base(θ_k)`.
pub fn compute_labels(set: &ContrastSet, neg: &NegativeSpec) -> Result<Vec<f64>> {
    let z = log_ratios(&set.log_joint, negative_base(set, &set.log_proposal, neg), neg.alpha);
    labels_from(&z, set)
}

/// Classifier logits `ẑ_k = log q_φ(θ_k) - α log p⁻_base(θ_k)`.
pub fn classifier_logits(
    family: &VariationalFamily,
    phi: &ParamVector,
    set: &ContrastSet,
    neg: &NegativeSpec,
) -> Vec<f64> {
    let lq: Vec<f64> = set.theta.rows().map(|t| family.log_prob(phi, t)).collect();
    log_ratios(&lq, negative_base(set, &set.log_proposal, neg), neg.alpha)
}

/// `log q_φ(θ_k)` for every draw, recorded on `tape`.
fn tape_log_q<'t>(family: &VariationalFamily, phi: &[Var<'t>], set: &ContrastSet) -> Vec<Var<'t>> {
    set.theta
        .rows()
        .map(|t| family.log_prob_real(phi, &constants::<Var<'t>>(t)))
        .collect()
}

fn check_grad(family: &VariationalFamily, grad: &[f64]) -> Result<()> {
    match grad.iter().position(|g| !g.is_finite()) {
        None => Ok(()),
        Some(i) => Err(Error::NonFiniteGradient {
            block: family.layout().block_of(i).map_or("?".into(), |b| b.name.clone()),
        }),
    }
}

fn weight_diagnostics(w: &[f64], z: &[f64]) -> Diagnostics {
    Diagnostics {
        label_entropy: Some(entropy(w)),
        max_label: Some(w.iter().copied().fold(0.0, f64::max)),
        ess: Some(effective_sample_size(w)),
        max_abs_z: Some(z.iter().map(|v| v.abs()).fold(0.0, f64::max)),
        flat_negative: false,
    }
}

/// Soft-label cross-entropy on a given contrast set. The proposal and the
/// negative are evaluated as constants; only the `log q_φ(θ_k)` factors of
/// the logits carry gradient.
pub fn softcvi_on_set(
    family: &VariationalFamily,
    phi: &ParamVector,
    set: &ContrastSet,
    neg: &NegativeSpec,
) -> Result<LossGrad> {
    neg.validate()?;
    let tape = Tape::new();
    let p = tape.vars(phi.values());
    let lq = tape_log_q(family, &p, set);
    let lq_val: Vec<f64> = lq.iter().map(|v| v.value()).collect();
    // proposal π = q_φ with the gradient stopped, evaluated at the same points
    let base = negative_base(set, &lq_val, neg);
    let z = log_ratios(&set.log_joint, base, neg.alpha);
    let y = labels_from(&z, set)?;
    let zhat = log_ratios(&lq_val, base, neg.alpha);
    let yhat = softmax(&zhat)?;
    let lse = log_sum_exp(&zhat)?;
    let loss: f64 = -y
        .iter()
        .zip(&zhat)
        .filter(|(yk, _)| **yk > 0.0)
        .map(|(yk, zk)| yk * (zk - lse))
        .sum::<f64>();
    let seeds: Vec<_> = lq.iter().zip(yhat.iter().zip(&y)).map(|(&v, (a, b))| (v, a - b)).collect();
    let grad = tape.gradient(&seeds, &p);
    check_grad(family, &grad)?;
    let mut diagnostics = weight_diagnostics(&y, &z);
    diagnostics.flat_negative = neg.is_flat() && neg.kind == NegativeKind::ProposalPower;
    Ok(LossGrad {
        loss,
        grad,
        diagnostics,
    })
}

pub fn softcvi_loss_grad(
    task: &ModelTask,
    family: &VariationalFamily,
    phi: &ParamVector,
    key: RngKey,
    spec: &ObjectiveSpec,
) -> Result<LossGrad> {
    let set = draw_contrast_set(task, family, phi, key, spec.k)?;
    softcvi_on_set(family, phi, &set, &spec.negative)
}

/// Pathwise (reparameterized) negative ELBO,
/// `(1/K) Σ [log q_φ(θ_k) - log p(θ_k, x_obs)]` with `θ_k = T_φ(ε_k)`.
pub fn elbo_loss_grad(
    task: &ModelTask,
    family: &VariationalFamily,
    phi: &ParamVector,
    key: RngKey,
    k: usize,
) -> Result<LossGrad> {
    if k == 0 {
        return Err(Error::config("objective.k", "K must be at least 1"));
    }
    // validates φ
    family.sample(phi, key, 0)?;
    let tape = Tape::new();
    let p = tape.vars(phi.values());
    let mut terms = Vec::with_capacity(k);
    for i in 0..k {
        let eps = family.noise(key.fold_in(i as u64));
        let (theta, lq) = family.transform_with_log_prob_real(&p, &eps);
        let lp = task.log_joint_real(&theta);
        terms.push(lq - lp);
    }
    let loss = terms.iter().map(|t| t.value()).sum::<f64>() / k as f64;
    if !loss.is_finite() {
        // the trainer substitutes its own step index
        return Err(Error::Diverged {
            step: 0,
            reason: "non-finite ELBO estimate at a reparameterized draw".into(),
        });
    }
    let seeds: Vec<_> = terms.iter().map(|&t| (t, 1.0 / k as f64)).collect();
    let grad = tape.gradient(&seeds, &p);
    check_grad(family, &grad)?;
    Ok(LossGrad {
        loss,
        grad,
        diagnostics: Diagnostics::default(),
    })
}

struct Snis<'t> {
    tape: &'t Tape,
    p: Vec<Var<'t>>,
    lq: Vec<Var<'t>>,
    w: Vec<f64>,
    loss: f64,
    diagnostics: Diagnostics,
}

fn snis_parts<'t>(
    tape: &'t Tape,
    family: &VariationalFamily,
    phi: &ParamVector,
    set: &ContrastSet,
) -> Result<Snis<'t>> {
    let p = tape.vars(phi.values());
    let lq = tape_log_q(family, &p, set);
    let z: Vec<f64> = set.log_joint.iter().zip(&lq).map(|(lp, q)| lp - q.value()).collect();
    let w = labels_from(&z, set)?;
    let loss = w
        .iter()
        .zip(&z)
        .filter(|(wk, _)| **wk > 0.0)
        .map(|(wk, zk)| wk * zk)
        .sum();
    let diagnostics = weight_diagnostics(&w, &z);
    Ok(Snis {
        tape,
        p,
        lq,
        w,
        loss,
        diagnostics,
    })
}

/// Self-normalized forward KL, `Σ w̃_k [log p(θ_k, x_obs) - log q_φ(θ_k)]`,
/// with the proposal and weights held constant.
pub fn snis_fkl_on_set(family: &VariationalFamily, phi: &ParamVector, set: &ContrastSet) -> Result<LossGrad> {
    let tape = Tape::new();
    let s = snis_parts(&tape, family, phi, set)?;
    let seeds: Vec<_> = s.lq.iter().zip(&s.w).map(|(&v, &w)| (v, -w)).collect();
    let grad = s.tape.gradient(&seeds, &s.p);
    check_grad(family, &grad)?;
    Ok(LossGrad {
        loss: s.loss,
        grad,
        diagnostics: s.diagnostics,
    })
}

pub fn snis_fkl_loss_grad(
    task: &ModelTask,
    family: &VariationalFamily,
    phi: &ParamVector,
    key: RngKey,
    k: usize,
) -> Result<LossGrad> {
    let set = draw_contrast_set(task, family, phi, key, k)?;
    snis_fkl_on_set(family, phi, &set)
}

/// SNIS-fKL gradient plus the mean score `(1/K) Σ ∇ log q_φ(θ_k)` on the
/// same draws. The loss reported is the SNIS-fKL loss.
pub fn lv_snis_fkl_on_set(family: &VariationalFamily, phi: &ParamVector, set: &ContrastSet) -> Result<LossGrad> {
    let tape = Tape::new();
    let s = snis_parts(&tape, family, phi, set)?;
    let k = set.k() as f64;
    let snis_seeds: Vec<_> = s.lq.iter().zip(&s.w).map(|(&v, &w)| (v, -w)).collect();
    let score_seeds: Vec<_> = s.lq.iter().map(|&v| (v, 1.0 / k)).collect();
    let g_snis = s.tape.gradient(&snis_seeds, &s.p);
    let g_score = s.tape.gradient(&score_seeds, &s.p);
    let grad: Vec<f64> = g_snis.iter().zip(&g_score).map(|(a, b)| a + b).collect();
    check_grad(family, &grad)?;
    Ok(LossGrad {
        loss: s.loss,
        grad,
        diagnostics: s.diagnostics,
    })
}

pub fn lv_snis_fkl_grad(
    task: &ModelTask,
    family: &VariationalFamily,
    phi: &ParamVector,
    key: RngKey,
    k: usize,
) -> Result<LossGrad> {
    let set = draw_contrast_set(task, family, phi, key, k)?;
    lv_snis_fkl_on_set(family, phi, &set)
}

/// Dispatches on `spec.kind`.
pub fn loss_grad(
    task: &ModelTask,
    family: &VariationalFamily,
    phi: &ParamVector,
    key: RngKey,
    spec: &ObjectiveSpec,
) -> Result<LossGrad> {
    spec.validate()?;
    match spec.kind {
        EstimatorKind::Softcvi => softcvi_loss_grad(task, family, phi, key, spec),
        EstimatorKind::Elbo => elbo_loss_grad(task, family, phi, key, spec.k),
        EstimatorKind::SnisFkl => snis_fkl_loss_grad(task, family, phi, key, spec.k),
        EstimatorKind::LvSnisFkl => lv_snis_fkl_grad(task, family, phi, key, spec.k),
    }
}

/// Checks `∇_φ log Σ_k q_φ(θ_k)/p⁻(θ_k) = (1/K) Σ_k ∇_φ log q_φ(θ_k)` when
/// `p⁻ = q_φ` value-wise with its gradient stopped. Returns whether the two
/// sides agree within 1e-10 (relative to their scale) and the largest
/// discrepancy.
pub fn normalization_term_grad_identity_check(
    family: &VariationalFamily,
    phi: &ParamVector,
    theta_set: &SampleMatrix,
) -> Result<(bool, f64)> {
    let tape = Tape::new();
    let p = tape.vars(phi.values());
    let lq: Vec<Var> = theta_set
        .rows()
        .map(|t| family.log_prob_real(&p, &constants::<Var>(t)))
        .collect();
    let shifted: Vec<Var> = lq.iter().map(|&v| v - v.value()).collect();
    let lhs_node = log_sum_exp_real(&shifted)?;
    let lhs = tape.gradient(&[(lhs_node, 1.0)], &p);
    let k = lq.len() as f64;
    let seeds: Vec<_> = lq.iter().map(|&v| (v, 1.0 / k)).collect();
    let rhs = tape.gradient(&seeds, &p);
    let scale = rhs.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let diff = lhs.iter().zip(&rhs).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    Ok((diff <= 1e-10 * scale, diff))
}
