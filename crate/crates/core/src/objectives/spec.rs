use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimatorKind {
    Softcvi,
    Elbo,
    SnisFkl,
    LvSnisFkl,
}

impl EstimatorKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            EstimatorKind::Softcvi => "softcvi",
            EstimatorKind::Elbo => "elbo",
            EstimatorKind::SnisFkl => "snis-fkl",
            EstimatorKind::LvSnisFkl => "lv-snis-fkl",
        }
    }

    /// Whether the estimator forms labels or self-normalized weights.
    pub fn needs_contrast(&self) -> bool {
        !matches!(self, EstimatorKind::Elbo)
    }
}

impl std::str::FromStr for EstimatorKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "softcvi" => Ok(EstimatorKind::Softcvi),
            "elbo" => Ok(EstimatorKind::Elbo),
            "snis-fkl" => Ok(EstimatorKind::SnisFkl),
            "lv-snis-fkl" => Ok(EstimatorKind::LvSnisFkl),
            other => Err(Error::config("objective.kind", format!("unknown estimator `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NegativeKind {
    /// `p⁻ = π^α` with π the (stop-gradient) proposal.
    ProposalPower,
    /// `p⁻ = p(θ, x_obs)^α`.
    JointPower,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NegativeSpec {
    pub kind: NegativeKind,
    pub alpha: f64,
}

impl Default for NegativeSpec {
    fn default() -> Self {
        NegativeSpec {
            kind: NegativeKind::ProposalPower,
            alpha: 0.75,
        }
    }
}

impl NegativeSpec {
    pub fn proposal(alpha: f64) -> Self {
        NegativeSpec {
            kind: NegativeKind::ProposalPower,
            alpha,
        }
    }

    pub fn joint(alpha: f64) -> Self {
        NegativeSpec {
            kind: NegativeKind::JointPower,
            alpha,
        }
    }

    /// `α = 0` with a proposal negative is an improper flat negative.
    pub fn is_flat(&self) -> bool {
        self.alpha == 0.0
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::config("objective.negative.alpha", "must lie in [0, 1]"));
        }
        Ok(())
    }
}

fn default_k() -> usize {
    8
}

/// Estimator choice, number of samples per step and negative distribution.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectiveSpec {
    pub kind: EstimatorKind,
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default)]
    pub negative: NegativeSpec,
}

impl ObjectiveSpec {
    pub fn softcvi(k: usize, negative: NegativeSpec) -> Self {
        ObjectiveSpec {
            kind: EstimatorKind::Softcvi,
            k,
            negative,
        }
    }

    pub fn of(kind: EstimatorKind, k: usize) -> Self {
        ObjectiveSpec {
            kind,
            k,
            negative: NegativeSpec::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::config("objective.k", "K must be at least 1"));
        }
        if self.kind.needs_contrast() && self.k < 2 {
            return Err(Error::config(
                "objective.k",
                format!("{} forms labels or weights and needs K ≥ 2", self.kind.as_str()),
            ));
        }
        self.negative.validate()
    }

    /// Short label, e.g. `softcvi(alpha=0.75)` or `snis-fkl`.
    pub fn label(&self) -> String {
        match self.kind {
            EstimatorKind::Softcvi => {
                let neg = match self.negative.kind {
                    NegativeKind::ProposalPower => "",
                    NegativeKind::JointPower => ", negative=joint",
                };
                format!("softcvi(alpha={}{neg})", self.negative.alpha)
            }
            k => k.as_str().to_string(),
        }
    }
}
