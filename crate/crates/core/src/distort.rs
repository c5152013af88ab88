//! Known perturbations of an HMM's parameters, for translating error
//! metrics into parameter-space deviations.

use crate::hmm::{Hmm, HmmError};
use crate::linalg::{Point2, SymMat2};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

/// Redraws allowed when a random probability shift leaves the simplex.
pub const MAX_SIMPLEX_ATTEMPTS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistortionKind {
    /// Move ROI means by `α` pixels.
    RoiMean,
    /// Raise covariance eigenvalues to the power `1 ± β`.
    RoiCov,
    /// Shift prior mass by a density-scale L1 of `δ`.
    Prior,
    /// Shift each transition row by a density-scale L1 of `ε`.
    Transition,
}

impl DistortionKind {
    pub const ALL: [DistortionKind; 4] = [
        DistortionKind::RoiMean,
        DistortionKind::RoiCov,
        DistortionKind::Prior,
        DistortionKind::Transition,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DistortionKind::RoiMean => "roi_mean",
            DistortionKind::RoiCov => "roi_cov",
            DistortionKind::Prior => "prior",
            DistortionKind::Transition => "transition",
        }
    }
}

impl std::fmt::Display for DistortionKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for DistortionKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        DistortionKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown distortion kind '{s}'"))
    }
}

/// Which ROIs (or transition rows) a distortion touches.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistortionScope {
    #[default]
    All,
    /// One state, chosen uniformly at random. Ignored by the prior kind.
    Single,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistortionSpec {
    pub kind: DistortionKind,
    pub parameter: f64,
    #[serde(default)]
    pub scope: DistortionScope,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DistortError {
    #[error("distortion parameter must be finite and nonnegative, got {0}")]
    BadParameter(f64),
    #[error("{kind} distortion of {parameter} is infeasible: {reason}")]
    Infeasible {
        kind: DistortionKind,
        parameter: f64,
        reason: String,
    },
    #[error("distorted model is invalid: {0}")]
    Invalid(#[from] HmmError),
}

fn check_parameter(p: f64) -> Result<(), DistortError> {
    if p.is_finite() && p >= 0.0 {
        Ok(())
    } else {
        Err(DistortError::BadParameter(p))
    }
}

fn chosen_states<R: Rng + ?Sized>(k: usize, scope: DistortionScope, rng: &mut R) -> Vec<usize> {
    match scope {
        DistortionScope::All => (0..k).collect(),
        DistortionScope::Single => vec![rng.random_range(0..k)],
    }
}

/// Move each ROI mean by exactly `alpha` along an independent uniformly
/// random direction.
pub fn distort_mean<R: Rng + ?Sized>(h: &Hmm, alpha: f64, rng: &mut R) -> Result<Hmm, DistortError> {
    distort_mean_scoped(h, alpha, DistortionScope::All, rng)
}

pub fn distort_mean_scoped<R: Rng + ?Sized>(h: &Hmm, alpha: f64, scope: DistortionScope, rng: &mut R) -> Result<Hmm, DistortError> {
    check_parameter(alpha)?;
    let states = chosen_states(h.k(), scope, rng);
    let shifts: Vec<(usize, Point2)> = states
        .into_iter()
        .map(|j| {
            let theta = rng.random_range(0.0..TAU);
            (j, Point2::new(alpha * theta.cos(), alpha * theta.sin()))
        })
        .collect();
    if alpha == 0.0 {
        return Ok(h.clone());
    }
    let mut em = h.emissions().to_vec();
    for (j, d) in shifts {
        em[j] = em[j]
            .with_mean(em[j].mean() + d)
            .map_err(|source| HmmError::Emission { state: j, source })?;
    }
    Ok(h.with_emissions(em)?)
}

/// Per ROI, draw `r = ±1` and replace `Σ = V Λ Vᵀ` by `V Λ^(1 + βr) Vᵀ`.
pub fn distort_cov<R: Rng + ?Sized>(h: &Hmm, beta: f64, rng: &mut R) -> Result<Hmm, DistortError> {
    distort_cov_scoped(h, beta, DistortionScope::All, rng)
}

pub fn distort_cov_scoped<R: Rng + ?Sized>(h: &Hmm, beta: f64, scope: DistortionScope, rng: &mut R) -> Result<Hmm, DistortError> {
    check_parameter(beta)?;
    let states = chosen_states(h.k(), scope, rng);
    let signs: Vec<f64> = states.iter().map(|_| if rng.random_bool(0.5) { 1.0 } else { -1.0 }).collect();
    if beta == 0.0 {
        return Ok(h.clone());
    }
    let mut em = h.emissions().to_vec();
    for (&j, &r) in states.iter().zip(&signs) {
        em[j] = em[j]
            .with_cov(powered_cov(&em[j].cov(), 1.0 + beta * r))
            .map_err(|source| HmmError::Emission { state: j, source })?;
    }
    Ok(h.with_emissions(em)?)
}

fn powered_cov(cov: &SymMat2, exponent: f64) -> SymMat2 {
    let e = cov.eigen();
    SymMat2::from_eigen(e.values.map(|l| l.powf(exponent)), e.vectors)
}

/// Shift probability mass so that `½ Σ |p̃ − p| = delta` exactly, along a
/// random zero-sum direction, redrawing until `p̃` stays on the simplex.
pub fn shift_on_simplex<R: Rng + ?Sized>(
    p: &[f64],
    delta: f64,
    kind: DistortionKind,
    rng: &mut R,
) -> Result<Vec<f64>, DistortError> {
    check_parameter(delta)?;
    if delta == 0.0 {
        return Ok(p.to_vec());
    }
    let infeasible = |reason: String| DistortError::Infeasible {
        kind,
        parameter: delta,
        reason,
    };
    if p.len() < 2 {
        return Err(infeasible("a single state has no mass to shift".into()));
    }
    let min = p.iter().copied().fold(f64::INFINITY, f64::min);
    if delta > 1.0 - min {
        return Err(infeasible(format!("largest achievable shift is {}", 1.0 - min)));
    }
    let n = p.len() as f64;
    for _ in 0..MAX_SIMPLEX_ATTEMPTS {
        let mut r: Vec<f64> = p.iter().map(|_| StandardNormal.sample(rng)).collect();
        let mean = r.iter().sum::<f64>() / n;
        r.iter_mut().for_each(|x| *x -= mean);
        let size: f64 = r.iter().map(|x| x.abs()).sum();
        if !(size > 0.0) {
            continue;
        }
        let scale = 2.0 * delta / size;
        let q: Vec<f64> = p.iter().zip(&r).map(|(a, b)| a + scale * b).collect();
        if q.iter().all(|&x| (0.0..=1.0).contains(&x)) {
            return Ok(q);
        }
    }
    Err(infeasible(format!("no valid draw in {MAX_SIMPLEX_ATTEMPTS} attempts")))
}

pub fn distort_prior<R: Rng + ?Sized>(h: &Hmm, delta: f64, rng: &mut R) -> Result<Hmm, DistortError> {
    let prior = shift_on_simplex(h.prior(), delta, DistortionKind::Prior, rng)?;
    Ok(h.with_prior(prior)?)
}

/// Shift every transition row independently by `eps`.
pub fn distort_trans<R: Rng + ?Sized>(h: &Hmm, eps: f64, rng: &mut R) -> Result<Hmm, DistortError> {
    distort_trans_scoped(h, eps, DistortionScope::All, rng)
}

pub fn distort_trans_scoped<R: Rng + ?Sized>(h: &Hmm, eps: f64, scope: DistortionScope, rng: &mut R) -> Result<Hmm, DistortError> {
    let states = chosen_states(h.k(), scope, rng);
    let mut rows = h.transition_rows();
    for j in states {
        rows[j] = shift_on_simplex(&rows[j], eps, DistortionKind::Transition, rng)?;
    }
    if eps == 0.0 {
        return Ok(h.clone());
    }
    Ok(h.with_transition(rows)?)
}

/// Apply a distortion described by a spec.
pub fn apply<R: Rng + ?Sized>(h: &Hmm, spec: &DistortionSpec, rng: &mut R) -> Result<Hmm, DistortError> {
    match spec.kind {
        DistortionKind::RoiMean => distort_mean_scoped(h, spec.parameter, spec.scope, rng),
        DistortionKind::RoiCov => distort_cov_scoped(h, spec.parameter, spec.scope, rng),
        DistortionKind::Prior => distort_prior(h, spec.parameter, rng),
        DistortionKind::Transition => distort_trans_scoped(h, spec.parameter, spec.scope, rng),
    }
}
