use crate::hmm::{log_likelihood, sample_path, Hmm};
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Monte-Carlo estimate of the per-fixation KL divergence rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KldEstimate {
    /// Nats per fixation. Not clamped: noise can make it slightly negative.
    pub rate: f64,
    pub stderr: f64,
}

/// `D(true ‖ est) / t`, estimated from `s` length-`t` sequences drawn from
/// `true_h`.
pub fn kld_rate_hmm<R: Rng + ?Sized>(true_h: &Hmm, est_h: &Hmm, t: usize, s: usize, rng: &mut R) -> KldEstimate {
    assert!(t >= 1 && s >= 2, "need t >= 1 and s >= 2");
    let terms: Vec<f64> = (0..s)
        .map(|_| {
            let (_, x) = sample_path(true_h, t, rng);
            log_likelihood(true_h, &x) - log_likelihood(est_h, &x)
        })
        .collect();
    let n = s as f64;
    let mean = terms.iter().sum::<f64>() / n;
    let var = terms.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    let t = t as f64;
    KldEstimate {
        rate: mean / t,
        stderr: (var / n).sqrt() / t,
    }
}
