use super::{GroundTruthSelection, SimConfig, SimError, TAG_CALIBRATION, TAG_ESTIMATION};
use crate::dissim::{compare, DissimReport};
use crate::distort::{apply, DistortionKind, DistortionSpec};
use crate::hmm::{sample_sequences, Hmm};
use crate::numeric::fmt_sig9;
use crate::rng::{derive_seed, RngStream};
use crate::vb::learn_hmm;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::time::Instant;

/// A record type that serializes to one CSV row.
pub trait CsvRecord {
    const HEADER: &'static [&'static str];
    fn fields(&self) -> Vec<String>;
}

/// Write records with a header row, comma separated, LF line endings.
pub fn write_csv<W: Write, R: CsvRecord>(out: W, records: &[R]) -> Result<(), SimError> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    w.write_record(R::HEADER)?;
    for r in records {
        w.write_record(r.fields())?;
    }
    w.flush()?;
    Ok(())
}

fn opt_f64(v: Option<f64>) -> String {
    v.map(fmt_sig9).unwrap_or_default()
}

/// Metrics shared by both record kinds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub d_hmm: f64,
    pub mc_stderr: f64,
    pub l_roi: f64,
    pub l_trans: f64,
    pub l_prior: f64,
}

impl From<&DissimReport> for Metrics {
    fn from(r: &DissimReport) -> Self {
        Metrics {
            d_hmm: r.d_hmm,
            mc_stderr: r.d_hmm_stderr,
            l_roi: r.l_roi,
            l_trans: r.l_trans,
            l_prior: r.l_prior,
        }
    }
}

fn metric_fields(m: Option<&Metrics>) -> [String; 5] {
    [
        opt_f64(m.map(|m| m.d_hmm)),
        opt_f64(m.map(|m| m.mc_stderr)),
        opt_f64(m.map(|m| m.l_roi)),
        opt_f64(m.map(|m| m.l_trans)),
        opt_f64(m.map(|m| m.l_prior)),
    ]
}

/// One trial of the estimation sweep. A failed fit keeps its identity
/// fields and leaves the metrics empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial_id: usize,
    pub gt_id: usize,
    pub n: usize,
    pub t: usize,
    pub seed: u64,
    pub k_true: usize,
    pub k_hat: Option<usize>,
    pub metrics: Option<Metrics>,
    pub failure: Option<String>,
    pub wall_ms: Option<f64>,
}

impl CsvRecord for TrialRecord {
    const HEADER: &'static [&'static str] = &[
        "trial_id", "gt_id", "N", "T", "seed", "k_true", "k_hat", "d_hmm", "mc_stderr", "l_roi", "l_trans", "l_prior",
        "failed", "wall_ms",
    ];

    fn fields(&self) -> Vec<String> {
        let mut f = vec![
            self.trial_id.to_string(),
            self.gt_id.to_string(),
            self.n.to_string(),
            self.t.to_string(),
            self.seed.to_string(),
            self.k_true.to_string(),
            self.k_hat.map(|k| k.to_string()).unwrap_or_default(),
        ];
        f.extend(metric_fields(self.metrics.as_ref()));
        f.push(if self.failure.is_some() { "1" } else { "0" }.into());
        f.push(opt_f64(self.wall_ms));
        f
    }
}

/// One trial of the calibration sweep at one distortion parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationRecord {
    pub trial_id: usize,
    pub gt_id: usize,
    pub kind: DistortionKind,
    pub parameter: f64,
    pub seed: u64,
    pub metrics: Option<Metrics>,
    /// Why the distortion could not be constructed.
    pub skipped: Option<String>,
}

impl CsvRecord for CalibrationRecord {
    const HEADER: &'static [&'static str] = &[
        "trial_id", "gt_id", "kind", "parameter", "seed", "d_hmm", "mc_stderr", "l_roi", "l_trans", "l_prior", "skipped",
    ];

    fn fields(&self) -> Vec<String> {
        let mut f = vec![
            self.trial_id.to_string(),
            self.gt_id.to_string(),
            self.kind.name().to_string(),
            fmt_sig9(self.parameter),
            self.seed.to_string(),
        ];
        f.extend(metric_fields(self.metrics.as_ref()));
        f.push(if self.skipped.is_some() { "1" } else { "0" }.into());
        f
    }
}

fn pick_ground_truth(selection: GroundTruthSelection, count: usize, trial: usize, seed: u64) -> usize {
    match selection {
        GroundTruthSelection::Uniform => RngStream::new(seed, 0).random_range(0..count),
        GroundTruthSelection::RoundRobin => trial % count,
    }
}

fn check_inputs(cfg: &SimConfig, truths: &[Hmm]) -> Result<(), SimError> {
    cfg.validate()?;
    if truths.is_empty() {
        return Err(SimError::Config("no ground-truth models".into()));
    }
    Ok(())
}

/// For every `(N, T)` cell and trial: pick a ground truth, sample `N`
/// sequences of length `T`, learn an HMM and compare it with the truth.
///
/// Each trial's randomness derives from `(master_seed, N, T, trial)`, so
/// the records do not depend on scheduling. Records come back in grid
/// order (`n_grid`, then `t_grid`, then trial).
pub fn run_estimation_sweep(cfg: &SimConfig, truths: &[Hmm]) -> Result<Vec<TrialRecord>, SimError> {
    check_inputs(cfg, truths)?;
    let mut work = Vec::new();
    for &n in &cfg.n_grid {
        for &t in &cfg.t_grid {
            for trial in 0..cfg.trials {
                work.push((n, t, trial));
            }
        }
    }
    Ok(work
        .into_par_iter()
        .map(|(n, t, trial)| estimation_trial(cfg, truths, n, t, trial))
        .collect())
}

fn estimation_trial(cfg: &SimConfig, truths: &[Hmm], n: usize, t: usize, trial: usize) -> TrialRecord {
    let start = Instant::now();
    let seed = derive_seed(cfg.master_seed, &[TAG_ESTIMATION, n as u64, t as u64, trial as u64]);
    let gt_id = pick_ground_truth(cfg.gt_selection, truths.len(), trial, seed);
    let truth = &truths[gt_id];
    let data = sample_sequences(truth, n, t, &mut RngStream::new(seed, 1));
    let (k_hat, metrics, failure) = match learn_hmm(&data, &cfg.learn, &cfg.hp, &RngStream::new(seed, 2)) {
        Ok(fit) => {
            let len = cfg.kld_length.unwrap_or(t);
            let report = compare(truth, &fit.estimated, len, cfg.kld_samples, &mut RngStream::new(seed, 3));
            (Some(fit.k_hat), Some(Metrics::from(&report)), None)
        }
        Err(e) => (None, None, Some(e.to_string())),
    };
    TrialRecord {
        trial_id: trial,
        gt_id,
        n,
        t,
        seed,
        k_true: truth.k(),
        k_hat,
        metrics,
        failure,
        wall_ms: cfg.record_timing.then(|| start.elapsed().as_secs_f64() * 1e3),
    }
}

/// For every distortion kind, parameter and trial: distort a ground truth
/// and compare it with the original. No learning is involved.
///
/// A trial's seed depends on `(kind, trial)` but not on the parameter, so
/// every parameter of a kind sees the same ground truths and random
/// directions.
pub fn run_calibration_sweep(cfg: &SimConfig, truths: &[Hmm]) -> Result<Vec<CalibrationRecord>, SimError> {
    check_inputs(cfg, truths)?;
    if cfg.distortion_grids.is_empty() {
        return Err(SimError::Config("distortion_grids is empty".into()));
    }
    let mut work = Vec::new();
    for (&kind, grid) in &cfg.distortion_grids {
        for &parameter in grid {
            for trial in 0..cfg.trials {
                work.push((kind, parameter, trial));
            }
        }
    }
    Ok(work
        .into_par_iter()
        .map(|(kind, parameter, trial)| calibration_trial(cfg, truths, kind, parameter, trial))
        .collect())
}

fn calibration_trial(cfg: &SimConfig, truths: &[Hmm], kind: DistortionKind, parameter: f64, trial: usize) -> CalibrationRecord {
    let seed = derive_seed(cfg.master_seed, &[TAG_CALIBRATION, kind as u64, trial as u64]);
    let gt_id = pick_ground_truth(cfg.gt_selection, truths.len(), trial, seed);
    let truth = &truths[gt_id];
    let spec = DistortionSpec {
        kind,
        parameter,
        scope: cfg.distortion_scope,
    };
    let (metrics, skipped) = match apply(truth, &spec, &mut RngStream::new(seed, 1)) {
        Ok(noisy) => {
            let report = compare(truth, &noisy, cfg.calibration_length, cfg.kld_samples, &mut RngStream::new(seed, 2));
            (Some(Metrics::from(&report)), None)
        }
        Err(e) => (None, Some(e.to_string())),
    };
    CalibrationRecord {
        trial_id: trial,
        gt_id,
        kind,
        parameter,
        seed,
        metrics,
        skipped,
    }
}
