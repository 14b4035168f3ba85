//! Prior families for the regression coefficients: a fixed standard-normal
//! prior and two normal-inverse-gamma hierarchies with a shared or
//! per-coefficient variance hyperparameter updated by a Gibbs step.
//!
//! The conditional prior is `p(θ|τ) ∝ exp(−½θᵀQθ)` with diagonal precision
//! `Q(τ)`; `log_density` carries the `½·ln|Q|` normalizer so cached
//! log-targets stay comparable across Gibbs updates of τ.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Prior family tag.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PriorFamily {
    /// θ ~ N(0, I); no hyperparameters.
    Normal,
    /// θ|τ ~ N(0, τI), τ ~ InvGamma(ν₁, ν₂) with a single common τ.
    NigHomo,
    /// θⱼ|τⱼ ~ N(0, τⱼ), τⱼ ~ InvGamma(ν₁, ν₂) independently.
    NigHetero,
}

impl PriorFamily {
    pub fn label(&self) -> &'static str {
        match self {
            PriorFamily::Normal => "normal",
            PriorFamily::NigHomo => "nig-homo",
            PriorFamily::NigHetero => "nig-hetero",
        }
    }
}

impl std::str::FromStr for PriorFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "normal" => Ok(PriorFamily::Normal),
            "nig-homo" => Ok(PriorFamily::NigHomo),
            "nig-hetero" => Ok(PriorFamily::NigHetero),
            other => Err(Error::InvalidArgument(format!(
                "unknown prior {other:?} (expected normal|nig-homo|nig-hetero)"
            ))),
        }
    }
}

fn default_nu1() -> f64 {
    2.0
}

fn default_nu2() -> f64 {
    1.0
}

/// Prior family plus the inverse-gamma shape ν₁ and rate ν₂ (ignored by the
/// Normal family). Defaults ν₁ = 2, ν₂ = 1 keep the NIG priors moderately
/// informative.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct PriorSpec {
    pub family: PriorFamily,
    #[serde(default = "default_nu1")]
    pub nu1: f64,
    #[serde(default = "default_nu2")]
    pub nu2: f64,
}

impl PriorSpec {
    pub fn normal() -> Self {
        Self {
            family: PriorFamily::Normal,
            nu1: default_nu1(),
            nu2: default_nu2(),
        }
    }

    pub fn with_family(family: PriorFamily) -> Self {
        Self {
            family,
            nu1: default_nu1(),
            nu2: default_nu2(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.nu1 > 0.0 && self.nu2 > 0.0 {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!(
                "inverse-gamma hyperparameters must be positive, got nu1={}, nu2={}",
                self.nu1, self.nu2
            )))
        }
    }
}

/// Spec plus the current hyperparameter vector τ (empty for Normal, length 1
/// for NIG-homo, length k for NIG-hetero). A small value type: updates
/// produce new values, one instance per chain.
#[derive(Clone, Debug)]
pub struct PriorState {
    spec: PriorSpec,
    tau: DVector<f64>,
}

impl PriorState {
    /// Deterministic initialization: τ at the prior mean ν₂/(ν₁−1) when
    /// ν₁ > 1, else 1.
    pub fn init(spec: PriorSpec, k: usize) -> Result<Self> {
        spec.validate()?;
        let tau0 = if spec.nu1 > 1.0 {
            spec.nu2 / (spec.nu1 - 1.0)
        } else {
            1.0
        };
        let tau = match spec.family {
            PriorFamily::Normal => DVector::zeros(0),
            PriorFamily::NigHomo => DVector::from_element(1, tau0),
            PriorFamily::NigHetero => DVector::from_element(k, tau0),
        };
        Ok(Self { spec, tau })
    }

    /// Builds a state with explicit τ, checking length and positivity.
    pub fn with_tau(spec: PriorSpec, tau: DVector<f64>) -> Result<Self> {
        spec.validate()?;
        let want = match spec.family {
            PriorFamily::Normal => 0,
            PriorFamily::NigHomo => 1,
            PriorFamily::NigHetero => tau.len(),
        };
        if tau.len() != want || tau.iter().any(|&t| !(t > 0.0)) {
            return Err(Error::InvalidArgument(
                "tau must match the prior family and be strictly positive".into(),
            ));
        }
        Ok(Self { spec, tau })
    }

    pub fn spec(&self) -> &PriorSpec {
        &self.spec
    }

    pub fn tau(&self) -> &DVector<f64> {
        &self.tau
    }

    /// Unnormalized log-density `−½θᵀQθ + ½ln|Q|` (additive constants that
    /// depend on neither θ nor τ are dropped).
    pub fn log_density(&self, theta: &DVector<f64>) -> f64 {
        match self.spec.family {
            PriorFamily::Normal => -0.5 * theta.norm_squared(),
            PriorFamily::NigHomo => {
                let tau = self.tau[0];
                let k = theta.len() as f64;
                -0.5 * theta.norm_squared() / tau - 0.5 * k * tau.ln()
            }
            PriorFamily::NigHetero => {
                let mut acc = 0.0;
                for (t, th) in self.tau.iter().zip(theta.iter()) {
                    acc += -0.5 * th * th / t - 0.5 * t.ln();
                }
                acc
            }
        }
    }

    /// Diagonal of the precision matrix Q(τ).
    pub fn precision_diag(&self, k: usize) -> DVector<f64> {
        match self.spec.family {
            PriorFamily::Normal => DVector::from_element(k, 1.0),
            PriorFamily::NigHomo => DVector::from_element(k, 1.0 / self.tau[0]),
            PriorFamily::NigHetero => self.tau.map(|t| 1.0 / t),
        }
    }

    /// Precision matrix Q(τ) as a dense diagonal matrix.
    pub fn precision(&self, k: usize) -> DMatrix<f64> {
        DMatrix::from_diagonal(&self.precision_diag(k))
    }

    /// Conjugate Gibbs update of τ given θ. The Normal family has no
    /// hyperparameters and returns the state unchanged.
    pub fn gibbs_update<R: Rng + ?Sized>(&self, theta: &DVector<f64>, rng: &mut R) -> PriorState {
        match self.spec.family {
            PriorFamily::Normal => self.clone(),
            PriorFamily::NigHomo => {
                let shape = self.spec.nu1 + theta.len() as f64 / 2.0;
                let rate = self.spec.nu2 + 0.5 * theta.norm_squared();
                let tau = DVector::from_element(1, draw_inv_gamma(shape, rate, rng));
                PriorState {
                    spec: self.spec,
                    tau,
                }
            }
            PriorFamily::NigHetero => {
                let shape = self.spec.nu1 + 0.5;
                let tau = DVector::from_fn(theta.len(), |j, _| {
                    draw_inv_gamma(shape, self.spec.nu2 + 0.5 * theta[j] * theta[j], rng)
                });
                PriorState {
                    spec: self.spec,
                    tau,
                }
            }
        }
    }
}

/// Draw from InvGamma(shape a, rate b) with density ∝ x^{−a−1}·e^{−b/x}:
/// the reciprocal of a Gamma(a, rate b) draw.
fn draw_inv_gamma<R: Rng + ?Sized>(shape: f64, rate: f64, rng: &mut R) -> f64 {
    let gamma = Gamma::new(shape, 1.0 / rate).expect("positive shape and rate");
    loop {
        let g = gamma.sample(rng);
        if g > 0.0 && g.is_finite() {
            return 1.0 / g;
        }
    }
}
