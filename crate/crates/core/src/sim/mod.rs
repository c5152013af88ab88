//! Seeded simulation sweeps: estimation error over `(N, T)` and metric
//! calibration against known distortions.

mod generate;
mod summary;
mod sweep;

pub use generate::{generate_ground_truth, generate_ground_truths, GeneratorSpec};
pub use summary::{
    aggregate, equivalent_distortion, write_summary, CalibrationCurve, Equivalent, SummaryRow, Table, SUMMARY_HEADER,
};
pub use sweep::{
    run_calibration_sweep, run_estimation_sweep, write_csv, CalibrationRecord, CsvRecord, Metrics, TrialRecord,
};

use crate::distort::{DistortionKind, DistortionScope};
use crate::hmm::{Hmm, HmmError, LoadError};
use crate::rng::{derive_seed, RngStream};
use crate::vb::{LearnConfig, LearnError, VbHyperparams};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

/// Seed-path tags separating the independent uses of the master seed.
pub(crate) const TAG_GROUND_TRUTH: u64 = 0;
pub(crate) const TAG_ESTIMATION: u64 = 1;
pub(crate) const TAG_CALIBRATION: u64 = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum GroundTruths {
    /// HMM JSON files; relative paths resolve against the config's directory.
    Files(Vec<PathBuf>),
    Synthetic(GeneratorSpec),
}

impl Default for GroundTruths {
    fn default() -> Self {
        GroundTruths::Synthetic(GeneratorSpec::default())
    }
}

/// How each trial picks its ground truth.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroundTruthSelection {
    /// Uniformly at random, with replacement.
    #[default]
    Uniform,
    /// Trial `i` uses ground truth `i mod count`.
    RoundRobin,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub ground_truths: GroundTruths,
    pub n_grid: Vec<usize>,
    pub t_grid: Vec<usize>,
    pub trials: usize,
    pub distortion_grids: BTreeMap<DistortionKind, Vec<f64>>,
    pub distortion_scope: DistortionScope,
    pub learn: LearnConfig,
    pub hp: VbHyperparams,
    /// Sequences sampled per KLD-rate estimate.
    pub kld_samples: usize,
    /// Sequence length for the KLD rate in the estimation sweep; defaults to
    /// each cell's `T`.
    pub kld_length: Option<usize>,
    /// Sequence length for the KLD rate in the calibration sweep.
    pub calibration_length: usize,
    pub master_seed: u64,
    pub gt_selection: GroundTruthSelection,
    /// Fill the `wall_ms` column. Off by default so outputs are
    /// byte-reproducible.
    pub record_timing: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        let distortion_grids = BTreeMap::from([
            (DistortionKind::RoiMean, vec![0.0, 2.0, 5.0, 10.0]),
            (DistortionKind::RoiCov, vec![0.0, 0.05, 0.1, 0.2]),
            (DistortionKind::Prior, vec![0.0, 0.05, 0.1, 0.2]),
            (DistortionKind::Transition, vec![0.0, 0.05, 0.1, 0.2]),
        ]);
        SimConfig {
            ground_truths: GroundTruths::default(),
            n_grid: vec![5, 10, 25, 50],
            t_grid: vec![5, 10, 25],
            trials: 50,
            distortion_grids,
            distortion_scope: DistortionScope::All,
            learn: LearnConfig::default(),
            hp: VbHyperparams::default(),
            kld_samples: 2000,
            kld_length: None,
            calibration_length: 10,
            master_seed: 0,
            gt_selection: GroundTruthSelection::Uniform,
            record_timing: false,
        }
    }
}

impl SimConfig {
    pub fn from_json(text: &str) -> Result<SimConfig, SimError> {
        let cfg: SimConfig = serde_json::from_str(text).map_err(SimError::Parse)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: &str| Err(SimError::Config(m.to_string()));
        if self.n_grid.is_empty() || self.t_grid.is_empty() {
            return bad("n_grid and t_grid must be nonempty");
        }
        if self.n_grid.contains(&0) || self.t_grid.contains(&0) {
            return bad("grid values must be at least 1");
        }
        if self.trials == 0 {
            return bad("trials must be at least 1");
        }
        if self.kld_samples < 2 {
            return bad("kld_samples must be at least 2");
        }
        if self.calibration_length == 0 || self.kld_length == Some(0) {
            return bad("KLD sequence lengths must be at least 1");
        }
        for (kind, grid) in &self.distortion_grids {
            if grid.is_empty() || grid.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
                return Err(SimError::Config(format!(
                    "distortion grid for {kind} must be nonempty, finite and nonnegative"
                )));
            }
        }
        match &self.ground_truths {
            GroundTruths::Files(f) if f.is_empty() => return bad("ground_truths.files is empty"),
            GroundTruths::Synthetic(g) => g.validate()?,
            _ => {}
        }
        self.learn.validate()?;
        self.hp.validate()?;
        Ok(())
    }

    /// Load or generate the ground-truth models.
    pub fn resolve_ground_truths(&self, base_dir: &Path) -> Result<Vec<Hmm>, SimError> {
        match &self.ground_truths {
            GroundTruths::Files(files) => files
                .iter()
                .map(|f| Hmm::load(base_dir.join(f)).map_err(SimError::GroundTruth))
                .collect(),
            GroundTruths::Synthetic(spec) => {
                let mut rng = RngStream::new(derive_seed(self.master_seed, &[TAG_GROUND_TRUTH]), 0);
                generate_ground_truths(spec, &mut rng)
            }
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("malformed configuration: {0}")]
    Parse(#[source] serde_json::Error),
    #[error(transparent)]
    GroundTruth(LoadError),
    #[error("generated model is invalid: {0}")]
    Hmm(#[from] HmmError),
    #[error(transparent)]
    Learn(#[from] LearnError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("no records to aggregate")]
    NoRecords,
    #[error("at least one group key is required")]
    NoGroupKeys,
    #[error("column '{0}' not found")]
    UnknownColumn(String),
    #[error("calibration curve for {metric} vs {kind} has no usable points")]
    EmptyCurve { kind: String, metric: String },
    #[error("calibration curve is not strictly increasing between parameters {0:?}")]
    NonMonotone(Vec<(f64, f64)>),
}
