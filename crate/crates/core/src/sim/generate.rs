//! Random ground-truth HMMs with face-viewing scale and geometry.

use crate::hmm::{GaussianEmission, Hmm};
use crate::linalg::{Point2, SymMat2};
use rand::Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use super::SimError;

/// Draws per mean before the layout is discarded and started over.
const PLACEMENT_ATTEMPTS: usize = 200;
/// Layouts tried before giving up.
const LAYOUT_ATTEMPTS: usize = 500;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorSpec {
    /// Number of models to generate.
    pub count: usize,
    /// State counts to draw from, uniformly.
    pub states: Vec<usize>,
    /// Image size in pixels, `[width, height]`.
    pub frame: [f64; 2],
    /// Size of the centered region that contains every ROI mean.
    pub region: [f64; 2],
    /// Range of per-axis ROI standard deviations in pixels.
    pub std_range: [f64; 2],
    /// Symmetric Dirichlet concentration for the prior and transition rows.
    pub dirichlet_conc: f64,
    /// Minimum distance between ROI means in pixels.
    pub min_separation: Option<f64>,
}

impl Default for GeneratorSpec {
    fn default() -> Self {
        GeneratorSpec {
            count: 10,
            states: vec![2, 3, 4],
            frame: [512.0, 384.0],
            region: [300.0, 350.0],
            std_range: [20.0, 60.0],
            dirichlet_conc: 2.0,
            min_separation: None,
        }
    }
}

impl GeneratorSpec {
    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: &str| Err(SimError::Config(format!("generator: {m}")));
        if self.count == 0 {
            return bad("count must be at least 1");
        }
        if self.states.is_empty() || self.states.contains(&0) {
            return bad("states must be a nonempty list of positive counts");
        }
        if !(self.region[0] > 0.0 && self.region[1] > 0.0)
            || self.region[0] > self.frame[0]
            || self.region[1] > self.frame[1]
        {
            return bad("region must be positive and fit inside the frame");
        }
        if !(self.std_range[0] > 0.0 && self.std_range[0] <= self.std_range[1]) {
            return bad("std_range must satisfy 0 < low <= high");
        }
        if !(self.dirichlet_conc > 0.0) {
            return bad("dirichlet_conc must be positive");
        }
        if self.min_separation.is_some_and(|d| !(d >= 0.0)) {
            return bad("min_separation must be nonnegative");
        }
        Ok(())
    }

    /// `(x0, y0, x1, y1)` of the mean region.
    pub fn region_bounds(&self) -> (f64, f64, f64, f64) {
        let x0 = 0.5 * (self.frame[0] - self.region[0]);
        let y0 = 0.5 * (self.frame[1] - self.region[1]);
        (x0, y0, x0 + self.region[0], y0 + self.region[1])
    }
}

fn dirichlet<R: Rng + ?Sized>(k: usize, conc: f64, rng: &mut R) -> Vec<f64> {
    let g = Gamma::new(conc, 1.0).expect("positive concentration");
    loop {
        let v: Vec<f64> = (0..k).map(|_| g.sample(rng)).collect();
        let s: f64 = v.iter().sum();
        if s > 0.0 {
            return v.into_iter().map(|x| x / s).collect();
        }
    }
}

/// Draw one ground-truth model.
pub fn generate_ground_truth<R: Rng + ?Sized>(spec: &GeneratorSpec, rng: &mut R) -> Result<Hmm, SimError> {
    spec.validate()?;
    let k = spec.states[rng.random_range(0..spec.states.len())];
    let (x0, y0, x1, y1) = spec.region_bounds();
    let sep = spec.min_separation.unwrap_or(0.0);

    let mut means: Vec<Point2> = Vec::with_capacity(k);
    let mut layouts = 0;
    let mut attempts = 0;
    while means.len() < k {
        if attempts == PLACEMENT_ATTEMPTS {
            layouts += 1;
            if layouts == LAYOUT_ATTEMPTS {
                return Err(SimError::Config(format!(
                    "generator: cannot place {k} means {sep} px apart in the region"
                )));
            }
            means.clear();
            attempts = 0;
        }
        attempts += 1;
        let p = Point2::new(rng.random_range(x0..=x1), rng.random_range(y0..=y1));
        if means.iter().all(|m| (*m - p).norm() >= sep) {
            means.push(p);
            attempts = 0;
        }
    }

    let [lo, hi] = spec.std_range;
    let emissions = means
        .into_iter()
        .map(|m| {
            let s1: f64 = rng.random_range(lo..=hi);
            let s2: f64 = rng.random_range(lo..=hi);
            let angle: f64 = rng.random_range(0.0..std::f64::consts::PI);
            let v1 = Point2::new(angle.cos(), angle.sin());
            let v2 = Point2::new(-angle.sin(), angle.cos());
            let cov = SymMat2::from_eigen([s1 * s1, s2 * s2], [v1, v2]);
            GaussianEmission::new(m, cov).expect("variances are bounded away from zero")
        })
        .collect();
    let prior = dirichlet(k, spec.dirichlet_conc, rng);
    let rows = (0..k).map(|_| dirichlet(k, spec.dirichlet_conc, rng)).collect();
    Ok(Hmm::new(prior, rows, emissions)?)
}

pub fn generate_ground_truths<R: Rng + ?Sized>(spec: &GeneratorSpec, rng: &mut R) -> Result<Vec<Hmm>, SimError> {
    (0..spec.count).map(|_| generate_ground_truth(spec, rng)).collect()
}
