//! Dissimilarity measures between a true and an estimated HMM.

mod kld;
mod matching;
mod overlap;

pub use kld::{kld_rate_hmm, KldEstimate};
pub use matching::{augment_states, match_rois, match_states, AugmentationPlan, AugmentedModel, Permutation, RoiMatch, StateMatch};
pub use overlap::{grid_overlap, histogram_intersection, l1_gaussian};

use crate::hmm::Hmm;
use crate::numeric::fmt_sig9;
use rand::Rng;
use serde::{Deserialize, Serialize};

/// KLD rate at or below which two models are read as the same strategy.
pub const SAME_STRATEGY_KLD: f64 = 0.05;
/// ROI L1 at or below which ROIs count as well matched (90% overlap).
pub const MATCHED_ROI_L1: f64 = 0.10;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DissimError {
    #[error("vectors have different lengths ({left} and {right})")]
    LengthMismatch { left: usize, right: usize },
    #[error("cannot duplicate state {state}: the model has {states} states")]
    InvalidSource { state: usize, states: usize },
    #[error("new state index must be {expected}, found {found}")]
    InvalidNewState { found: usize, expected: usize },
}

/// `Σ_j |u_j − v_j|`. Unhalved, unlike the density distance
/// [`l1_gaussian`].
pub fn l1_discrete(u: &[f64], v: &[f64]) -> Result<f64, DissimError> {
    if u.len() != v.len() {
        return Err(DissimError::LengthMismatch {
            left: u.len(),
            right: v.len(),
        });
    }
    Ok(u.iter().zip(v).map(|(a, b)| (a - b).abs()).sum())
}

/// Every metric between two HMMs. ROI matching and state matching are
/// optimized separately and may pick different correspondences.
///
/// `l_prior` and `l_trans` use the unhalved vector L1, so a prior shifted by
/// a density-scale distance δ scores `2δ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DissimReport {
    pub k_true: usize,
    pub k_est: usize,
    pub d_hmm: f64,
    pub d_hmm_stderr: f64,
    pub l_roi: f64,
    pub l_trans: f64,
    pub l_prior: f64,
    pub roi_permutation: Permutation,
    pub roi_augmentation: Option<AugmentationPlan>,
    pub state_permutation: Permutation,
    pub state_augmentation: Option<AugmentationPlan>,
    /// `d_hmm <= 0.05`.
    pub same_strategy: bool,
    /// `l_roi <= 0.10`.
    pub rois_matched: bool,
}

impl DissimReport {
    pub const CSV_HEADER: &'static str = "k_true,k_est,d_hmm,mc_stderr,l_roi,l_trans,l_prior";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            self.k_true,
            self.k_est,
            fmt_sig9(self.d_hmm),
            fmt_sig9(self.d_hmm_stderr),
            fmt_sig9(self.l_roi),
            fmt_sig9(self.l_trans),
            fmt_sig9(self.l_prior)
        )
    }
}

/// Run all comparisons. `t` and `s` are the length and number of the
/// sequences sampled for the KLD rate.
pub fn compare<R: Rng + ?Sized>(true_h: &Hmm, est_h: &Hmm, t: usize, s: usize, rng: &mut R) -> DissimReport {
    let kld = kld_rate_hmm(true_h, est_h, t, s, rng);
    let roi = match_rois(true_h, est_h);
    let st = match_states(true_h, est_h);
    DissimReport {
        k_true: true_h.k(),
        k_est: est_h.k(),
        d_hmm: kld.rate,
        d_hmm_stderr: kld.stderr,
        same_strategy: kld.rate <= SAME_STRATEGY_KLD,
        rois_matched: roi.l_roi <= MATCHED_ROI_L1,
        l_roi: roi.l_roi,
        l_trans: st.l_trans,
        l_prior: st.l_prior,
        roi_permutation: roi.permutation,
        roi_augmentation: roi.augmentation,
        state_permutation: st.permutation,
        state_augmentation: st.augmentation,
    }
}
