//! Gaussian-emission HMM: data model, validation, sampling and exact
//! sequence likelihoods.

mod emission;
mod forward;
mod sample;
mod sequence;

pub use emission::{gaussian_logpdf, EmissionError, EmissionSpec, GaussianEmission, MIN_EIGEN_RATIO};
pub use forward::{initial_observation_logdensity, log_likelihood};
pub use sample::{sample_path, sample_sequences};
pub use sequence::{FixationSequence, SequenceError};

use serde::{Deserialize, Serialize};
use std::path::Path;

/// Tolerance on the sum of a probability vector.
pub const SIMPLEX_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum HmmError {
    #[error("HMM must have at least one state")]
    NoStates,
    #[error("state count mismatch: {what} has {found} entries, expected {expected}")]
    StateCount {
        what: &'static str,
        found: usize,
        expected: usize,
    },
    #[error("prior entry {index} is invalid ({value})")]
    InvalidPrior { index: usize, value: f64 },
    #[error("prior sums to {sum}")]
    PriorSum { sum: f64 },
    #[error("transition entry ({row}, {col}) is invalid ({value})")]
    InvalidTransition { row: usize, col: usize, value: f64 },
    #[error("transition row {row} sums to {sum}")]
    RowSum { row: usize, sum: f64 },
    #[error("emission {state}: {source}")]
    Emission {
        state: usize,
        #[source]
        source: EmissionError,
    },
}

/// Plain serialized form of an HMM.
///
/// `{"prior": [..], "transition": [[..], ..], "emissions": [{"mean": [x, y],
/// "cov": [[a, b], [b, c]]}, ..]}` with the transition matrix row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HmmSpec {
    pub prior: Vec<f64>,
    pub transition: Vec<Vec<f64>>,
    pub emissions: Vec<EmissionSpec>,
}

/// Check every HMM invariant, naming the first one violated.
pub fn validate_hmm(spec: &HmmSpec) -> Result<(), HmmError> {
    Hmm::try_from(spec.clone()).map(|_| ())
}

/// A validated HMM with `K` states and 2D Gaussian emissions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "HmmSpec", into = "HmmSpec")]
pub struct Hmm {
    prior: Vec<f64>,
    /// Row-major `K × K`.
    transition: Vec<f64>,
    emissions: Vec<GaussianEmission>,
}

fn check_simplex(
    v: &[f64],
    bad_entry: impl Fn(usize, f64) -> HmmError,
    bad_sum: impl Fn(f64) -> HmmError,
) -> Result<(), HmmError> {
    for (i, &p) in v.iter().enumerate() {
        if !p.is_finite() || p < 0.0 || p > 1.0 + SIMPLEX_TOL {
            return Err(bad_entry(i, p));
        }
    }
    let sum: f64 = v.iter().sum();
    if (sum - 1.0).abs() > SIMPLEX_TOL {
        return Err(bad_sum(sum));
    }
    Ok(())
}

impl Hmm {
    pub fn new(
        prior: Vec<f64>,
        transition: Vec<Vec<f64>>,
        emissions: Vec<GaussianEmission>,
    ) -> Result<Self, HmmError> {
        let k = emissions.len();
        if k == 0 {
            return Err(HmmError::NoStates);
        }
        if prior.len() != k {
            return Err(HmmError::StateCount {
                what: "prior",
                found: prior.len(),
                expected: k,
            });
        }
        if transition.len() != k {
            return Err(HmmError::StateCount {
                what: "transition matrix",
                found: transition.len(),
                expected: k,
            });
        }
        check_simplex(
            &prior,
            |index, value| HmmError::InvalidPrior { index, value },
            |sum| HmmError::PriorSum { sum },
        )?;
        for (row, r) in transition.iter().enumerate() {
            if r.len() != k {
                return Err(HmmError::StateCount {
                    what: "transition row",
                    found: r.len(),
                    expected: k,
                });
            }
            check_simplex(
                r,
                |col, value| HmmError::InvalidTransition { row, col, value },
                |sum| HmmError::RowSum { row, sum },
            )?;
        }
        Ok(Hmm {
            prior,
            transition: transition.into_iter().flatten().collect(),
            emissions,
        })
    }

    pub fn k(&self) -> usize {
        self.emissions.len()
    }

    pub fn prior(&self) -> &[f64] {
        &self.prior
    }

    pub fn transition(&self, from: usize, to: usize) -> f64 {
        self.transition[from * self.k() + to]
    }

    pub fn transition_row(&self, from: usize) -> &[f64] {
        let k = self.k();
        &self.transition[from * k..(from + 1) * k]
    }

    pub fn transition_rows(&self) -> Vec<Vec<f64>> {
        (0..self.k()).map(|j| self.transition_row(j).to_vec()).collect()
    }

    pub fn emissions(&self) -> &[GaussianEmission] {
        &self.emissions
    }

    pub fn emission(&self, state: usize) -> &GaussianEmission {
        &self.emissions[state]
    }

    /// Relabel states: state `i` of the result is state `order[i]` of `self`.
    ///
    /// Panics if `order` is not a permutation of `0..K`.
    pub fn permuted(&self, order: &[usize]) -> Hmm {
        let k = self.k();
        assert_eq!(order.len(), k, "permutation length");
        let mut seen = vec![false; k];
        for &o in order {
            assert!(o < k && !seen[o], "not a permutation: {order:?}");
            seen[o] = true;
        }
        let prior = order.iter().map(|&o| self.prior[o]).collect();
        let transition = order
            .iter()
            .flat_map(|&r| order.iter().map(move |&c| (r, c)))
            .map(|(r, c)| self.transition(r, c))
            .collect();
        let emissions = order.iter().map(|&o| self.emissions[o].clone()).collect();
        Hmm {
            prior,
            transition,
            emissions,
        }
    }

    pub fn with_prior(&self, prior: Vec<f64>) -> Result<Hmm, HmmError> {
        Hmm::new(prior, self.transition_rows(), self.emissions.clone())
    }

    pub fn with_transition(&self, transition: Vec<Vec<f64>>) -> Result<Hmm, HmmError> {
        Hmm::new(self.prior.clone(), transition, self.emissions.clone())
    }

    pub fn with_emissions(&self, emissions: Vec<GaussianEmission>) -> Result<Hmm, HmmError> {
        Hmm::new(self.prior.clone(), self.transition_rows(), emissions)
    }

    pub fn to_spec(&self) -> HmmSpec {
        HmmSpec::from(self.clone())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("HMM serializes")
    }

    pub fn from_json(s: &str) -> Result<Hmm, serde_json::Error> {
        serde_json::from_str(s)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Hmm, LoadError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| LoadError::Io(path.display().to_string(), e))?;
        let spec: HmmSpec = serde_json::from_str(&text).map_err(|e| LoadError::Parse(path.display().to_string(), e))?;
        Hmm::try_from(spec).map_err(|e| LoadError::Invalid(path.display().to_string(), e))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> std::io::Result<()> {
        let mut text = self.to_json();
        text.push('\n');
        std::fs::write(path, text)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum LoadError {
    #[error("{0}: {1}")]
    Io(String, #[source] std::io::Error),
    #[error("{0}: malformed HMM JSON: {1}")]
    Parse(String, #[source] serde_json::Error),
    #[error("{0}: invalid HMM: {1}")]
    Invalid(String, #[source] HmmError),
}

impl TryFrom<HmmSpec> for Hmm {
    type Error = HmmError;

    fn try_from(spec: HmmSpec) -> Result<Self, Self::Error> {
        let emissions = spec
            .emissions
            .into_iter()
            .enumerate()
            .map(|(state, e)| GaussianEmission::try_from(e).map_err(|source| HmmError::Emission { state, source }))
            .collect::<Result<Vec<_>, _>>()?;
        Hmm::new(spec.prior, spec.transition, emissions)
    }
}

impl From<Hmm> for HmmSpec {
    fn from(h: Hmm) -> Self {
        let transition = h.transition_rows();
        HmmSpec {
            prior: h.prior,
            transition,
            emissions: h.emissions.into_iter().map(EmissionSpec::from).collect(),
        }
    }
}
