//! Conjugate posterior families for the VB-HMM: Dirichlet over the prior and
//! each transition row, Normal-Wishart over each emission `(μ, Λ = Σ⁻¹)`.

use crate::hmm::{GaussianEmission, Hmm, HmmError};
use crate::linalg::{Point2, SymMat2};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::{digamma, ln_gamma};
use std::f64::consts::PI;

const D: f64 = 2.0;

/// Normal-Wishart density: `Λ ~ W(W, ν)`, `μ | Λ ~ N(m, (βΛ)⁻¹)`.
///
/// The scale is stored inverted (`W⁻¹`), which is the quantity the
/// conjugate update accumulates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalWishart {
    pub mean: Point2,
    pub beta: f64,
    pub scale_inv: SymMat2,
    pub dof: f64,
}

/// Weighted sufficient statistics of one state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightedMoments {
    pub count: f64,
    pub mean: Point2,
    /// `Σ_i w_i (x_i − mean)(x_i − mean)ᵀ` (not normalized).
    pub scatter: SymMat2,
}

impl WeightedMoments {
    pub const EMPTY: WeightedMoments = WeightedMoments {
        count: 0.0,
        mean: Point2::ZERO,
        scatter: SymMat2 { xx: 0.0, xy: 0.0, yy: 0.0 },
    };

    /// Two-pass weighted moments.
    pub fn from_weighted<'a>(points: impl Iterator<Item = (&'a Point2, f64)> + Clone) -> Self {
        let (count, sum) = points
            .clone()
            .fold((0.0, Point2::ZERO), |(c, s), (p, w)| (c + w, s + w * *p));
        if count <= 0.0 {
            return WeightedMoments::EMPTY;
        }
        let mean = (1.0 / count) * sum;
        let scatter = points.fold(SymMat2::new(0.0, 0.0, 0.0), |acc, (p, w)| acc + (*p - mean).outer().scale(w));
        WeightedMoments { count, mean, scatter }
    }
}

/// `ln Γ_2(a)`.
fn ln_mvgamma2(a: f64) -> f64 {
    0.5 * PI.ln() + ln_gamma(a) + ln_gamma(a - 0.5)
}

/// `ψ_2(a) = ψ(a) + ψ(a − ½)`.
fn mvdigamma2(a: f64) -> f64 {
    digamma(a) + digamma(a - 0.5)
}

impl NormalWishart {
    /// Conjugate update of this prior with weighted data moments.
    pub fn update(&self, m: &WeightedMoments) -> NormalWishart {
        let beta = self.beta + m.count;
        let dof = self.dof + m.count;
        if m.count <= 0.0 {
            return NormalWishart { beta, dof, ..*self };
        }
        let mean = (1.0 / beta) * (self.beta * self.mean + m.count * m.mean);
        let d = m.mean - self.mean;
        let scale_inv = self.scale_inv + m.scatter + d.outer().scale(self.beta * m.count / beta);
        NormalWishart {
            mean,
            beta,
            scale_inv,
            dof,
        }
    }

    pub fn scale(&self) -> SymMat2 {
        self.scale_inv.inverse().expect("Wishart scale is positive definite")
    }

    pub fn ln_det_scale(&self) -> f64 {
        -self.scale_inv.det().ln()
    }

    /// `E[ln |Λ|]`.
    pub fn expected_ln_det_precision(&self) -> f64 {
        mvdigamma2(0.5 * self.dof) + D * 2f64.ln() + self.ln_det_scale()
    }

    /// Mean of the precision, `E[Λ] = ν W`.
    pub fn expected_precision(&self) -> SymMat2 {
        self.scale().scale(self.dof)
    }

    /// Point covariance reported for the state: `E[Λ]⁻¹ = W⁻¹ / ν`.
    pub fn expected_covariance(&self) -> SymMat2 {
        self.scale_inv.scale(1.0 / self.dof)
    }

    /// `KL(self ‖ prior)`.
    pub fn kl(&self, prior: &NormalWishart) -> f64 {
        let w = self.scale();
        let wishart = 0.5 * prior.dof * (prior.ln_det_scale() - self.ln_det_scale())
            + 0.5 * self.dof * (prior.scale_inv.trace_product(&w) - D)
            + ln_mvgamma2(0.5 * prior.dof)
            - ln_mvgamma2(0.5 * self.dof)
            + 0.5 * (self.dof - prior.dof) * mvdigamma2(0.5 * self.dof);
        let dm = self.mean - prior.mean;
        let gauss = 0.5
            * (D * prior.beta / self.beta - D + D * (self.beta / prior.beta).ln()
                + prior.beta * self.dof * w.quad(&dm));
        wishart + gauss
    }
}

/// `KL(Dir(post) ‖ Dir(prior))`.
pub fn dirichlet_kl(post: &[f64], prior: &[f64]) -> f64 {
    let (sp, s0): (f64, f64) = (post.iter().sum(), prior.iter().sum());
    let dg = digamma(sp);
    let mut kl = ln_gamma(sp) - ln_gamma(s0);
    for (&a, &a0) in post.iter().zip(prior) {
        kl += ln_gamma(a0) - ln_gamma(a) + (a - a0) * (digamma(a) - dg);
    }
    kl
}

/// `E[ln p_k]` under `Dir(conc)`.
pub fn dirichlet_expected_log(conc: &[f64]) -> Vec<f64> {
    let dg = digamma(conc.iter().sum());
    conc.iter().map(|&a| digamma(a) - dg).collect()
}

fn normalized(v: &[f64]) -> Vec<f64> {
    let s: f64 = v.iter().sum();
    v.iter().map(|x| x / s).collect()
}

/// Full variational posterior over HMM parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Posterior {
    pub prior_conc: Vec<f64>,
    pub trans_conc: Vec<Vec<f64>>,
    pub emissions: Vec<NormalWishart>,
}

impl Posterior {
    pub fn k(&self) -> usize {
        self.emissions.len()
    }

    /// Posterior-mean parameters: normalized Dirichlet means for the prior
    /// and transition rows, `m_k` for the means, and `E[Λ_k]⁻¹` for the
    /// covariances.
    pub fn point_estimate(&self) -> Result<Hmm, HmmError> {
        let emissions = self
            .emissions
            .iter()
            .enumerate()
            .map(|(state, nw)| {
                GaussianEmission::new(nw.mean, nw.expected_covariance()).map_err(|source| HmmError::Emission { state, source })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Hmm::new(
            normalized(&self.prior_conc),
            self.trans_conc.iter().map(|r| normalized(r)).collect(),
            emissions,
        )
    }

    /// Restrict to a subset of states (in the given order).
    pub fn restricted(&self, keep: &[usize]) -> Posterior {
        Posterior {
            prior_conc: keep.iter().map(|&j| self.prior_conc[j]).collect(),
            trans_conc: keep
                .iter()
                .map(|&j| keep.iter().map(|&k| self.trans_conc[j][k]).collect())
                .collect(),
            emissions: keep.iter().map(|&j| self.emissions[j]).collect(),
        }
    }

    pub fn translated(&self, offset: Point2) -> Posterior {
        let mut p = self.clone();
        for e in &mut p.emissions {
            e.mean = e.mean + offset;
        }
        p
    }
}
