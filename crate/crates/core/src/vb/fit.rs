//! Variational Bayesian EM for a fixed state count.

use super::posterior::{dirichlet_expected_log, dirichlet_kl, NormalWishart, Posterior, WeightedMoments};
use super::ResolvedPrior;
use crate::hmm::FixationSequence;
use crate::linalg::Point2;
use rand::Rng;
use rand_distr::StandardNormal;
use std::f64::consts::PI;

/// Pooled, canonically ordered and centered training data.
///
/// Sequences are sorted by a total order on their contents, so the fit does
/// not depend on the order in which sequences were supplied.
#[derive(Debug, Clone)]
pub struct FitData {
    points: Vec<Point2>,
    bounds: Vec<(usize, usize)>,
    offset: Point2,
}

impl FitData {
    pub fn new(data: &[FixationSequence]) -> FitData {
        let mut seqs: Vec<&FixationSequence> = data.iter().collect();
        seqs.sort_by(|a, b| {
            a.len().cmp(&b.len()).then_with(|| {
                a.points()
                    .iter()
                    .zip(b.points())
                    .map(|(p, q)| p.total_cmp(q))
                    .find(|o| o.is_ne())
                    .unwrap_or(std::cmp::Ordering::Equal)
            })
        });
        let n: usize = seqs.iter().map(|s| s.len()).sum();
        let sum = seqs
            .iter()
            .flat_map(|s| s.points())
            .fold(Point2::ZERO, |acc, p| acc + *p);
        let offset = (1.0 / n as f64) * sum;
        let mut points = Vec::with_capacity(n);
        let mut bounds = Vec::with_capacity(seqs.len());
        for s in seqs {
            bounds.push((points.len(), s.len()));
            points.extend(s.points().iter().map(|p| *p - offset));
        }
        FitData { points, bounds, offset }
    }

    /// Grand mean of the original data; the stored points are centered on it.
    pub fn offset(&self) -> Point2 {
        self.offset
    }

    pub fn num_points(&self) -> usize {
        self.points.len()
    }

    pub fn num_sequences(&self) -> usize {
        self.bounds.len()
    }

    /// Centered points.
    pub fn points(&self) -> &[Point2] {
        &self.points
    }

    pub(crate) fn moments(&self) -> WeightedMoments {
        WeightedMoments::from_weighted(self.points.iter().map(|p| (p, 1.0)))
    }
}

/// Expected sufficient statistics from one E-step (or an initialization).
#[derive(Debug, Clone)]
pub(crate) struct Responsibilities {
    k: usize,
    /// `γ_t(k)` for every pooled point, row-major `num_points × K`.
    gamma: Vec<f64>,
    /// Σ over sequences of `γ_1(k)`.
    init: Vec<f64>,
    /// Σ over sequences and steps of `ξ_t(j, k)`, row-major `K × K`.
    trans: Vec<f64>,
}

impl Responsibilities {
    fn from_labels(data: &FitData, labels: &[usize], k: usize) -> Self {
        let mut gamma = vec![0.0; labels.len() * k];
        for (i, &l) in labels.iter().enumerate() {
            gamma[i * k + l] = 1.0;
        }
        let mut init = vec![0.0; k];
        let mut trans = vec![0.0; k * k];
        for &(start, len) in &data.bounds {
            init[labels[start]] += 1.0;
            for t in start + 1..start + len {
                trans[labels[t - 1] * k + labels[t]] += 1.0;
            }
        }
        Responsibilities { k, gamma, init, trans }
    }

    pub(crate) fn occupancy(&self) -> Vec<f64> {
        let mut occ = vec![0.0; self.k];
        for row in self.gamma.chunks_exact(self.k) {
            for (o, g) in occ.iter_mut().zip(row) {
                *o += g;
            }
        }
        occ
    }
}

fn m_step(data: &FitData, resp: &Responsibilities, prior: &ResolvedPrior) -> Posterior {
    let k = resp.k;
    let prior_conc = resp.init.iter().map(|c| prior.prior_conc + c).collect();
    let trans_conc = resp
        .trans
        .chunks_exact(k)
        .map(|row| row.iter().map(|c| prior.trans_conc + c).collect())
        .collect();
    let emissions = (0..k)
        .map(|j| {
            let weighted = data.points.iter().zip(resp.gamma.chunks_exact(k)).map(move |(p, g)| (p, g[j]));
            prior.emission.update(&WeightedMoments::from_weighted(weighted))
        })
        .collect();
    Posterior {
        prior_conc,
        trans_conc,
        emissions,
    }
}

/// Per-state quantities needed for `ln ρ_k(x) = E[ln N(x | μ_k, Λ_k⁻¹)]`.
struct EmissionExpectation {
    mean: Point2,
    scale: crate::linalg::SymMat2,
    dof: f64,
    constant: f64,
}

impl EmissionExpectation {
    fn new(nw: &NormalWishart) -> Self {
        // ½E[ln|Λ|] − ln 2π − ½·D/β with D = 2.
        let constant = 0.5 * nw.expected_ln_det_precision() - (2.0 * PI).ln() - 1.0 / nw.beta;
        EmissionExpectation {
            mean: nw.mean,
            scale: nw.scale(),
            dof: nw.dof,
            constant,
        }
    }

    fn log_rho(&self, x: &Point2) -> f64 {
        self.constant - 0.5 * self.dof * self.scale.quad(&(*x - self.mean))
    }
}

/// Forward-backward under the sub-normalized expected parameters, in
/// per-step scaled linear space. Returns responsibilities and `Σ_n ln Z_n`.
fn e_step(data: &FitData, post: &Posterior) -> (Responsibilities, f64) {
    let k = post.k();
    let pi: Vec<f64> = dirichlet_expected_log(&post.prior_conc).into_iter().map(f64::exp).collect();
    let a: Vec<f64> = post
        .trans_conc
        .iter()
        .flat_map(|row| dirichlet_expected_log(row).into_iter().map(f64::exp))
        .collect();
    let emis: Vec<EmissionExpectation> = post.emissions.iter().map(EmissionExpectation::new).collect();

    let mut gamma = vec![0.0; data.points.len() * k];
    let mut init = vec![0.0; k];
    let mut trans = vec![0.0; k * k];
    let mut log_z = 0.0;

    let max_len = data.bounds.iter().map(|b| b.1).max().unwrap_or(0);
    let mut b = vec![0.0; max_len * k];
    let mut alpha = vec![0.0; max_len * k];
    let mut beta = vec![0.0; max_len * k];
    let mut scale = vec![0.0; max_len];
    let mut tmp = vec![0.0; k];

    for &(start, len) in &data.bounds {
        let pts = &data.points[start..start + len];
        for (t, x) in pts.iter().enumerate() {
            let row = &mut b[t * k..(t + 1) * k];
            for (r, e) in row.iter_mut().zip(&emis) {
                *r = e.log_rho(x);
            }
            let c = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            for r in row.iter_mut() {
                *r = (*r - c).exp();
            }
            log_z += c;
        }

        for j in 0..k {
            alpha[j] = pi[j] * b[j];
        }
        for t in 0..len {
            if t > 0 {
                let (prev, cur) = alpha.split_at_mut(t * k);
                let prev = &prev[(t - 1) * k..];
                for (to, slot) in cur[..k].iter_mut().enumerate() {
                    let s: f64 = (0..k).map(|from| prev[from] * a[from * k + to]).sum();
                    *slot = s * b[t * k + to];
                }
            }
            let s: f64 = alpha[t * k..(t + 1) * k].iter().sum();
            scale[t] = s;
            log_z += s.ln();
            for v in &mut alpha[t * k..(t + 1) * k] {
                *v /= s;
            }
        }

        for v in &mut beta[(len - 1) * k..len * k] {
            *v = 1.0;
        }
        for t in (0..len - 1).rev() {
            for (to, slot) in tmp.iter_mut().enumerate() {
                *slot = b[(t + 1) * k + to] * beta[(t + 1) * k + to];
            }
            for from in 0..k {
                let s: f64 = (0..k).map(|to| a[from * k + to] * tmp[to]).sum();
                beta[t * k + from] = s / scale[t + 1];
            }
        }

        for t in 0..len {
            let g = &mut gamma[(start + t) * k..(start + t + 1) * k];
            let mut s = 0.0;
            for j in 0..k {
                g[j] = alpha[t * k + j] * beta[t * k + j];
                s += g[j];
            }
            for v in g.iter_mut() {
                *v /= s;
            }
            if t == 0 {
                for (i, v) in init.iter_mut().zip(g.iter()) {
                    *i += v;
                }
            } else {
                for to in 0..k {
                    tmp[to] = b[t * k + to] * beta[t * k + to] / scale[t];
                }
                for from in 0..k {
                    let af = alpha[(t - 1) * k + from];
                    for to in 0..k {
                        trans[from * k + to] += af * a[from * k + to] * tmp[to];
                    }
                }
            }
        }
    }
    (Responsibilities { k, gamma, init, trans }, log_z)
}

fn kl_total(post: &Posterior, prior: &ResolvedPrior) -> f64 {
    let k = post.k();
    let pc = vec![prior.prior_conc; k];
    let tc = vec![prior.trans_conc; k];
    dirichlet_kl(&post.prior_conc, &pc)
        + post.trans_conc.iter().map(|r| dirichlet_kl(r, &tc)).sum::<f64>()
        + post.emissions.iter().map(|e| e.kl(&prior.emission)).sum::<f64>()
}

/// k-means++ seeding plus a few Lloyd iterations over all pooled points.
fn kmeans_labels<R: Rng + ?Sized>(data: &FitData, k: usize, rng: &mut R) -> Vec<usize> {
    let pts = &data.points;
    let n = pts.len();
    let spread = {
        let m = data.moments();
        (m.scatter.trace() / (2.0 * n as f64)).sqrt().max(1e-6)
    };
    let mut centers: Vec<Point2> = Vec::with_capacity(k);
    centers.push(pts[rng.random_range(0..n)]);
    let mut d2: Vec<f64> = pts.iter().map(|p| (*p - centers[0]).dot(&(*p - centers[0]))).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let idx = if total > 0.0 {
            let mut u = rng.random::<f64>() * total;
            let mut pick = n - 1;
            for (i, &d) in d2.iter().enumerate() {
                if u < d {
                    pick = i;
                    break;
                }
                u -= d;
            }
            pick
        } else {
            rng.random_range(0..n)
        };
        let c = pts[idx];
        centers.push(c);
        for (d, p) in d2.iter_mut().zip(pts) {
            *d = d.min((*p - c).dot(&(*p - c)));
        }
    }
    for c in &mut centers {
        let j = Point2::new(rng.sample(StandardNormal), rng.sample(StandardNormal));
        *c = *c + (0.01 * spread) * j;
    }

    let nearest = |p: &Point2, centers: &[Point2]| {
        let mut best = (f64::INFINITY, 0);
        for (j, c) in centers.iter().enumerate() {
            let d = (*p - *c).dot(&(*p - *c));
            if d < best.0 {
                best = (d, j);
            }
        }
        best.1
    };
    let mut labels: Vec<usize> = pts.iter().map(|p| nearest(p, &centers)).collect();
    for _ in 0..10 {
        let mut sums = vec![Point2::ZERO; k];
        let mut counts = vec![0usize; k];
        for (p, &l) in pts.iter().zip(&labels) {
            sums[l] = sums[l] + *p;
            counts[l] += 1;
        }
        for j in 0..k {
            if counts[j] > 0 {
                centers[j] = (1.0 / counts[j] as f64) * sums[j];
            }
        }
        let next: Vec<usize> = pts.iter().map(|p| nearest(p, &centers)).collect();
        if next == labels {
            break;
        }
        labels = next;
    }
    labels
}

/// One VBEM run at a fixed state count.
#[derive(Debug, Clone)]
pub struct VbFit {
    /// Posterior in the original (uncentered) coordinates.
    pub posterior: Posterior,
    /// Free energy after every E-step.
    pub trace: Vec<f64>,
    /// Expected number of fixations explained by each state.
    pub occupancy: Vec<f64>,
}

impl VbFit {
    pub fn free_energy(&self) -> f64 {
        *self.trace.last().expect("at least one iteration")
    }

    pub fn iterations(&self) -> usize {
        self.trace.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
#[error("free energy became non-finite at iteration {iteration}")]
pub struct NonFiniteFreeEnergy {
    pub iteration: usize,
}

/// Run VBEM with `k` states from a k-means initialization drawn from `rng`.
///
/// Stops when the relative free-energy improvement drops below `tol` or
/// after `max_iters` E-steps.
pub fn vbem_fit<R: Rng + ?Sized>(
    data: &FitData,
    k: usize,
    prior: &ResolvedPrior,
    max_iters: usize,
    tol: f64,
    rng: &mut R,
) -> Result<VbFit, NonFiniteFreeEnergy> {
    assert!(k >= 1, "state count must be positive");
    let labels = kmeans_labels(data, k, rng);
    let centered_prior = ResolvedPrior {
        emission: NormalWishart {
            mean: prior.emission.mean - data.offset,
            ..prior.emission
        },
        ..*prior
    };
    let mut resp = Responsibilities::from_labels(data, &labels, k);
    let mut post = m_step(data, &resp, &centered_prior);
    let mut trace: Vec<f64> = Vec::new();
    loop {
        let (r, log_z) = e_step(data, &post);
        let f = log_z - kl_total(&post, &centered_prior);
        if !f.is_finite() {
            return Err(NonFiniteFreeEnergy { iteration: trace.len() + 1 });
        }
        resp = r;
        let converged = trace.last().is_some_and(|&prev| (f - prev) < tol * prev.abs());
        trace.push(f);
        if converged || trace.len() >= max_iters {
            break;
        }
        post = m_step(data, &resp, &centered_prior);
    }
    Ok(VbFit {
        posterior: post.translated(data.offset),
        trace,
        occupancy: resp.occupancy(),
    })
}
