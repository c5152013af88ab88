//! HMM estimation by variational Bayesian EM, with the number of states
//! chosen by maximizing the variational lower bound (free energy).

mod fit;
mod posterior;

pub use fit::{vbem_fit, FitData, NonFiniteFreeEnergy, VbFit};
pub use posterior::{dirichlet_expected_log, dirichlet_kl, NormalWishart, Posterior, WeightedMoments};

use crate::hmm::{FixationSequence, Hmm, HmmError, MIN_EIGEN_RATIO};
use crate::linalg::{Point2, SymMat2};
use crate::rng::RngStream;
use serde::{Deserialize, Serialize};

/// Search and convergence settings for [`learn_hmm`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LearnConfig {
    pub k_min: usize,
    pub k_max: usize,
    /// VBEM runs per candidate state count.
    pub restarts: usize,
    pub max_iters: usize,
    /// Relative free-energy improvement below which a run has converged.
    pub free_energy_tol: f64,
    /// States explaining fewer expected fixations than this are dropped.
    pub prune_count_threshold: f64,
}

impl Default for LearnConfig {
    fn default() -> Self {
        LearnConfig {
            k_min: 1,
            k_max: 8,
            restarts: 5,
            max_iters: 200,
            free_energy_tol: 1e-6,
            prune_count_threshold: 1.0,
        }
    }
}

impl LearnConfig {
    pub fn validate(&self) -> Result<(), LearnError> {
        let bad = |m: &str| Err(LearnError::Config(m.to_string()));
        if self.k_min < 1 || self.k_min > self.k_max {
            return bad("need 1 <= k_min <= k_max");
        }
        if self.restarts < 1 || self.max_iters < 1 {
            return bad("restarts and max_iters must be at least 1");
        }
        if !(self.free_energy_tol > 0.0) || !(self.prune_count_threshold >= 0.0) {
            return bad("tolerances must be positive");
        }
        Ok(())
    }
}

/// Prior hyperparameters. `nw_mean` and `nw_scale` default to data-derived
/// values when absent: the grand mean of all fixations, and the inverse of
/// `(data covariance / K)` respectively.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VbHyperparams {
    pub dirichlet_prior_conc: f64,
    pub dirichlet_trans_conc: f64,
    pub nw_mean: Option<Point2>,
    pub nw_beta: f64,
    /// Wishart scale `W₀` on the precision (pixels⁻²).
    pub nw_scale: Option<SymMat2>,
    pub nw_dof: f64,
}

impl Default for VbHyperparams {
    fn default() -> Self {
        VbHyperparams {
            dirichlet_prior_conc: 1.0,
            dirichlet_trans_conc: 1.0,
            nw_mean: None,
            nw_beta: 1.0,
            nw_scale: None,
            nw_dof: 3.0,
        }
    }
}

/// Concrete prior for one state count.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResolvedPrior {
    pub prior_conc: f64,
    pub trans_conc: f64,
    pub emission: NormalWishart,
}

impl VbHyperparams {
    pub fn validate(&self) -> Result<(), LearnError> {
        let bad = |m: &str| Err(LearnError::Config(m.to_string()));
        if !(self.dirichlet_prior_conc > 0.0) || !(self.dirichlet_trans_conc > 0.0) {
            return bad("Dirichlet concentrations must be positive");
        }
        if !(self.nw_beta > 0.0) {
            return bad("nw_beta must be positive");
        }
        if !(self.nw_dof > 1.0) {
            return bad("nw_dof must exceed D - 1 = 1");
        }
        if let Some(s) = self.nw_scale {
            if !well_conditioned(&s) {
                return bad("nw_scale must be symmetric positive definite");
            }
        }
        if let Some(m) = self.nw_mean {
            if !m.is_finite() {
                return bad("nw_mean must be finite");
            }
        }
        Ok(())
    }

    /// Fill in data-derived defaults for a `k`-state fit.
    pub fn resolve(&self, data: &FitData, k: usize) -> Result<ResolvedPrior, LearnError> {
        let mean = self.nw_mean.unwrap_or(data.offset());
        let scale_inv = match self.nw_scale {
            Some(w) => w.inverse().ok_or_else(|| LearnError::Config("nw_scale is singular".into()))?,
            None => {
                let cov = data_covariance(data)?;
                cov.scale(1.0 / k as f64)
            }
        };
        Ok(ResolvedPrior {
            prior_conc: self.dirichlet_prior_conc,
            trans_conc: self.dirichlet_trans_conc,
            emission: NormalWishart {
                mean,
                beta: self.nw_beta,
                scale_inv,
                dof: self.nw_dof,
            },
        })
    }
}

fn well_conditioned(m: &SymMat2) -> bool {
    if !m.is_finite() || !(m.det() > 0.0) || !(m.trace() > 0.0) {
        return false;
    }
    let [max, min] = m.eigen().values;
    min >= MIN_EIGEN_RATIO * max
}

/// Pooled covariance of all fixations. A single fixation carries no spread
/// information, so it falls back to a unit (1 px²) isotropic covariance.
fn data_covariance(data: &FitData) -> Result<SymMat2, LearnError> {
    let n = data.num_points();
    if n == 1 {
        return Ok(SymMat2::IDENTITY);
    }
    let cov = data.moments().scatter.scale(1.0 / n as f64);
    if !well_conditioned(&cov) {
        return Err(LearnError::DegenerateData { points: n });
    }
    Ok(cov)
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LearnError {
    #[error("no training data")]
    EmptyData,
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("degenerate data: the {points} fixations have a singular covariance")]
    DegenerateData { points: usize },
    #[error("every VBEM run produced a non-finite free energy")]
    AllRunsFailed,
    #[error("point estimate is not a valid HMM: {0}")]
    Estimate(#[from] HmmError),
}

/// Outcome of the search at one candidate state count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KCandidate {
    pub k: usize,
    /// Best free energy over restarts (`None` if every restart failed).
    pub free_energy: Option<f64>,
    pub restart_free_energies: Vec<Option<f64>>,
    /// Iterations of the best restart.
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnResult {
    pub estimated: Hmm,
    /// Number of states after pruning; equals `estimated.k()`.
    pub k_hat: usize,
    /// State count of the winning fit before pruning.
    pub k_selected: usize,
    pub free_energy: f64,
    pub per_k_free_energy: Vec<KCandidate>,
    pub iterations_used: usize,
    /// Expected fixations per reported state.
    pub occupancy: Vec<f64>,
}

/// Estimate an HMM from fixation sequences.
///
/// For each `K` in `[k_min, k_max]`, runs `restarts` VBEM fits from
/// independent initializations and keeps the best; the `K` with the highest
/// free energy wins. Low-occupancy states are then pruned and the point
/// estimate renormalized.
pub fn learn_hmm(
    data: &[FixationSequence],
    cfg: &LearnConfig,
    hp: &VbHyperparams,
    rng: &RngStream,
) -> Result<LearnResult, LearnError> {
    cfg.validate()?;
    hp.validate()?;
    if data.is_empty() {
        return Err(LearnError::EmptyData);
    }
    let fit_data = FitData::new(data);

    let mut best: Option<(VbFit, usize)> = None;
    let mut per_k = Vec::new();
    for k in cfg.k_min..=cfg.k_max {
        let prior = hp.resolve(&fit_data, k)?;
        let mut cand: Option<VbFit> = None;
        let mut restart_free_energies = Vec::with_capacity(cfg.restarts);
        for r in 0..cfg.restarts {
            let mut stream = rng.child(((k as u64) << 32) | r as u64);
            match vbem_fit(&fit_data, k, &prior, cfg.max_iters, cfg.free_energy_tol, &mut stream) {
                Ok(fit) => {
                    restart_free_energies.push(Some(fit.free_energy()));
                    if cand.as_ref().is_none_or(|c| fit.free_energy() > c.free_energy()) {
                        cand = Some(fit);
                    }
                }
                Err(_) => restart_free_energies.push(None),
            }
        }
        per_k.push(KCandidate {
            k,
            free_energy: cand.as_ref().map(VbFit::free_energy),
            restart_free_energies,
            iterations: cand.as_ref().map_or(0, VbFit::iterations),
        });
        if let Some(c) = cand {
            if best.as_ref().is_none_or(|(b, _)| c.free_energy() > b.free_energy()) {
                best = Some((c, k));
            }
        }
    }
    let (fit, k_selected) = best.ok_or(LearnError::AllRunsFailed)?;

    let mut keep: Vec<usize> = (0..k_selected)
        .filter(|&j| fit.occupancy[j] >= cfg.prune_count_threshold)
        .collect();
    if keep.is_empty() {
        let top = (0..k_selected)
            .max_by(|&a, &b| fit.occupancy[a].total_cmp(&fit.occupancy[b]))
            .expect("k >= 1");
        keep.push(top);
    }
    let estimated = fit.posterior.restricted(&keep).point_estimate()?;
    Ok(LearnResult {
        k_hat: estimated.k(),
        k_selected,
        free_energy: fit.free_energy(),
        per_k_free_energy: per_k,
        iterations_used: fit.iterations(),
        occupancy: keep.iter().map(|&j| fit.occupancy[j]).collect(),
        estimated,
    })
}
