use crate::linalg::{Point2, SymMat2};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Smallest admissible eigenvalue ratio `λ_min / λ_max` of a covariance.
pub const MIN_EIGEN_RATIO: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EmissionError {
    #[error("mean is not finite")]
    NonFiniteMean,
    #[error("covariance is not symmetric ({0} vs {1})")]
    Asymmetric(f64, f64),
    #[error("covariance is not finite")]
    NonFiniteCovariance,
    #[error("covariance is not positive definite (determinant {det}, trace {trace})")]
    NotPositiveDefinite { det: f64, trace: f64 },
    #[error("covariance is ill-conditioned (eigenvalues {min} and {max})")]
    IllConditioned { min: f64, max: f64 },
}

/// A 2D Gaussian ROI: mean in pixels, covariance in pixels².
///
/// The precision, Cholesky factor and log normalizer are cached at
/// construction; equality and serialization only look at `mean` and `cov`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "EmissionSpec", into = "EmissionSpec")]
pub struct GaussianEmission {
    mean: Point2,
    cov: SymMat2,
    precision: SymMat2,
    chol: (f64, f64, f64),
    log_norm: f64,
}

/// Serialized form of an emission: `{"mean": [x, y], "cov": [[a, b], [b, c]]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmissionSpec {
    pub mean: [f64; 2],
    pub cov: [[f64; 2]; 2],
}

impl GaussianEmission {
    pub fn new(mean: Point2, cov: SymMat2) -> Result<Self, EmissionError> {
        if !mean.is_finite() {
            return Err(EmissionError::NonFiniteMean);
        }
        check_covariance(&cov)?;
        let precision = cov.inverse().ok_or(EmissionError::NotPositiveDefinite {
            det: cov.det(),
            trace: cov.trace(),
        })?;
        let chol = cov.cholesky().ok_or(EmissionError::NotPositiveDefinite {
            det: cov.det(),
            trace: cov.trace(),
        })?;
        let log_norm = -(2.0 * PI).ln() - 0.5 * cov.det().ln();
        Ok(GaussianEmission {
            mean,
            cov,
            precision,
            chol,
            log_norm,
        })
    }

    pub fn mean(&self) -> Point2 {
        self.mean
    }

    pub fn cov(&self) -> SymMat2 {
        self.cov
    }

    pub fn precision(&self) -> SymMat2 {
        self.precision
    }

    /// Lower Cholesky factor `(l11, l21, l22)` of the covariance.
    pub fn cholesky(&self) -> (f64, f64, f64) {
        self.chol
    }

    /// `-(D/2) ln 2π - ½ ln|Σ|` with `D = 2`.
    pub fn log_normalizer(&self) -> f64 {
        self.log_norm
    }

    pub fn log_pdf(&self, p: &Point2) -> f64 {
        let d = *p - self.mean;
        self.log_norm - 0.5 * self.precision.quad(&d)
    }

    /// Map a standard-normal pair to a draw from this Gaussian.
    pub fn transform_standard(&self, z: Point2) -> Point2 {
        let (l11, l21, l22) = self.chol;
        Point2::new(self.mean.x + l11 * z.x, self.mean.y + l21 * z.x + l22 * z.y)
    }

    pub fn with_mean(&self, mean: Point2) -> Result<Self, EmissionError> {
        GaussianEmission::new(mean, self.cov)
    }

    pub fn with_cov(&self, cov: SymMat2) -> Result<Self, EmissionError> {
        GaussianEmission::new(self.mean, cov)
    }
}

/// Log-density of `g` at `p` (nats).
pub fn gaussian_logpdf(g: &GaussianEmission, p: &Point2) -> f64 {
    g.log_pdf(p)
}

fn check_covariance(cov: &SymMat2) -> Result<(), EmissionError> {
    if !cov.is_finite() {
        return Err(EmissionError::NonFiniteCovariance);
    }
    let (det, trace) = (cov.det(), cov.trace());
    if !(det > 0.0) || !(trace > 0.0) {
        return Err(EmissionError::NotPositiveDefinite { det, trace });
    }
    let e = cov.eigen();
    let [max, min] = e.values;
    if !(min >= MIN_EIGEN_RATIO * max) {
        return Err(EmissionError::IllConditioned { min, max });
    }
    Ok(())
}

impl PartialEq for GaussianEmission {
    fn eq(&self, other: &Self) -> bool {
        self.mean == other.mean && self.cov == other.cov
    }
}

impl TryFrom<EmissionSpec> for GaussianEmission {
    type Error = EmissionError;

    fn try_from(spec: EmissionSpec) -> Result<Self, Self::Error> {
        let cov = SymMat2::try_from(spec.cov).map_err(|e| EmissionError::Asymmetric(e.0, e.1))?;
        GaussianEmission::new(spec.mean.into(), cov)
    }
}

impl From<GaussianEmission> for EmissionSpec {
    fn from(g: GaussianEmission) -> Self {
        EmissionSpec {
            mean: g.mean.into(),
            cov: g.cov.into(),
        }
    }
}
