//! Simulation lab for Gaussian-emission hidden Markov models of eye
//! fixation sequences.
//!
//! The crate samples fixation sequences from ground-truth HMMs, re-estimates
//! HMMs by variational Bayesian EM, and measures estimation error with a
//! Monte-Carlo KL-divergence rate and permutation-matched L1 distances. Known
//! parameter distortions calibrate those metrics against parameter error.

pub mod data;
pub mod dissim;
pub mod distort;
pub mod hmm;
pub mod linalg;
pub mod numeric;
pub mod plot;
pub mod rng;
pub mod sim;
pub mod vb;

pub use hmm::{FixationSequence, GaussianEmission, Hmm, HmmError, HmmSpec};
pub use linalg::{Point2, SymMat2};
pub use rng::RngStream;
