use super::{FixationSequence, Hmm};
use crate::linalg::Point2;
use crate::numeric::log_sum_exp;

/// `ln p(x)` for a whole sequence by the forward recursion in log space.
pub fn log_likelihood(h: &Hmm, s: &FixationSequence) -> f64 {
    let k = h.k();
    let log_trans: Vec<f64> = (0..k)
        .flat_map(|j| h.transition_row(j).iter().map(|a| a.ln()))
        .collect();
    let points = s.points();
    let mut alpha: Vec<f64> = (0..k)
        .map(|j| h.prior()[j].ln() + h.emission(j).log_pdf(&points[0]))
        .collect();
    let mut next = vec![0.0; k];
    let mut terms = vec![0.0; k];
    for x in &points[1..] {
        for (to, slot) in next.iter_mut().enumerate() {
            for (from, term) in terms.iter_mut().enumerate() {
                *term = alpha[from] + log_trans[from * k + to];
            }
            *slot = log_sum_exp(&terms) + h.emission(to).log_pdf(x);
        }
        std::mem::swap(&mut alpha, &mut next);
    }
    log_sum_exp(&alpha)
}

/// Log-density of the first fixation: `ln Σ_j π_j N(p; μ_j, Σ_j)`.
pub fn initial_observation_logdensity(h: &Hmm, p: &Point2) -> f64 {
    let terms: Vec<f64> = h
        .prior()
        .iter()
        .zip(h.emissions())
        .map(|(pi, e)| pi.ln() + e.log_pdf(p))
        .collect();
    log_sum_exp(&terms)
}
