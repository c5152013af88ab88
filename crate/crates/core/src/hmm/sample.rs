use super::{FixationSequence, Hmm};
use crate::linalg::Point2;
use rand::Rng;
use rand_distr::StandardNormal;

fn categorical<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    // Rounding can leave the cumulative sum just below 1.
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(probs.len() - 1)
}

/// Ancestral sampling of one length-`t` sequence, returning the hidden
/// state path alongside the fixations.
pub fn sample_path<R: Rng + ?Sized>(h: &Hmm, t: usize, rng: &mut R) -> (Vec<usize>, FixationSequence) {
    assert!(t >= 1, "sequence length must be at least 1");
    let mut states = Vec::with_capacity(t);
    let mut points = Vec::with_capacity(t);
    let mut z = categorical(h.prior(), rng);
    for step in 0..t {
        if step > 0 {
            z = categorical(h.transition_row(z), rng);
        }
        let e = Point2::new(rng.sample(StandardNormal), rng.sample(StandardNormal));
        states.push(z);
        points.push(h.emission(z).transform_standard(e));
    }
    let seq = FixationSequence::new(points).expect("finite draws from a valid HMM");
    (states, seq)
}

/// Draw `n` independent length-`t` sequences.
pub fn sample_sequences<R: Rng + ?Sized>(h: &Hmm, n: usize, t: usize, rng: &mut R) -> Vec<FixationSequence> {
    (0..n).map(|_| sample_path(h, t, rng).1).collect()
}
