//! L1 distance (ψ, halved) and histogram intersection between 2D Gaussians.
//!
//! `ψ(p, q) = ½∫|p − q| = P_p(p > q) − P_q(p > q)`. Each probability is an
//! integral of a Gaussian over a region bounded by a conic. Working in the
//! whitened coordinates of the Gaussian being integrated, every horizontal
//! slice of that region is a union of at most two intervals with closed-form
//! endpoints, so the inner integral is exact (via `erfc`) and only the outer
//! one-dimensional integral is numerical.

use crate::hmm::GaussianEmission;
use crate::linalg::{Point2, SymMat2};
use statrs::function::erf::erfc;
use std::f64::consts::FRAC_1_SQRT_2;

/// Half-width of the outer integration range, in standard deviations.
const SLICE_RANGE: f64 = 8.0;
/// Simpson intervals per segment of the outer integral (even).
const SEGMENT_INTERVALS: usize = 400;

/// Real roots of `a x² + b x + c` (none when degenerate or complex).
fn real_roots(a: f64, b: f64, c: f64) -> Vec<f64> {
    if a == 0.0 {
        return if b != 0.0 { vec![-c / b] } else { Vec::new() };
    }
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return Vec::new();
    }
    let q = -0.5 * (b + b.signum() * disc.sqrt());
    if q == 0.0 {
        return vec![0.0];
    }
    vec![q / a, c / q]
}

fn std_normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x * FRAC_1_SQRT_2)
}

fn std_normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() * 0.398_942_280_401_432_7
}

/// `P(A u² + B u + C > 0)` for `u ~ N(0, 1)`.
fn quadratic_positive_mass(a: f64, b: f64, c: f64) -> f64 {
    if a == 0.0 {
        if b == 0.0 {
            return if c > 0.0 { 1.0 } else { 0.0 };
        }
        // b u + c > 0  ⇔  u > −c/b (b > 0) or u < −c/b (b < 0).
        return std_normal_cdf(if b > 0.0 { c / b } else { -c / b });
    }
    let disc = b * b - 4.0 * a * c;
    if !(disc > 0.0) {
        return if a > 0.0 { 1.0 } else { 0.0 };
    }
    let q = -0.5 * (b + b.signum() * disc.sqrt());
    let (mut r1, mut r2) = if q != 0.0 { (q / a, c / q) } else { (-(disc.sqrt()) / (2.0 * a), disc.sqrt() / (2.0 * a)) };
    if r1 > r2 {
        std::mem::swap(&mut r1, &mut r2);
    }
    if a > 0.0 {
        std_normal_cdf(r1) + std_normal_cdf(-r2)
    } else if r1 > 0.0 {
        std_normal_cdf(-r1) - std_normal_cdf(-r2)
    } else {
        std_normal_cdf(r2) - std_normal_cdf(r1)
    }
}

/// Quadratic form of `(x − μ)ᵀ P (x − μ)` in the whitened coordinates
/// `x = base_mean + L u`: returns `(M, w, c)` with the form equal to
/// `uᵀMu + 2wᵀu + c`.
fn whitened_form(l: (f64, f64, f64), base_mean: Point2, g: &GaussianEmission) -> (SymMat2, Point2, f64) {
    let (l11, l21, l22) = l;
    let p = g.precision();
    // Columns of L.
    let c1 = Point2::new(l11, l21);
    let c2 = Point2::new(0.0, l22);
    let pc1 = p.mul_vec(&c1);
    let pc2 = p.mul_vec(&c2);
    let m = SymMat2::new(c1.dot(&pc1), c1.dot(&pc2), c2.dot(&pc2));
    let d = base_mean - g.mean();
    let pd = p.mul_vec(&d);
    (m, Point2::new(c1.dot(&pd), c2.dot(&pd)), d.dot(&pd))
}

/// `P_{x ~ base}(ln a(x) − ln b(x) > 0)`.
fn mass_where_first_dominates(base: &GaussianEmission, a: &GaussianEmission, b: &GaussianEmission) -> f64 {
    let l = base.cholesky();
    let (ma, wa, ca) = whitened_form(l, base.mean(), a);
    let (mb, wb, cb) = whitened_form(l, base.mean(), b);
    // g(u) = 2(ln a − ln b) = uᵀGu + 2wᵀu + c.
    let g = mb - ma;
    let w = Point2::new(wb.x - wa.x, wb.y - wa.y);
    let c = 2.0 * (a.log_normalizer() - b.log_normalizer()) + cb - ca;

    let slice = |u1: f64| {
        let qa = g.yy;
        let qb = 2.0 * (g.xy * u1 + w.y);
        let qc = g.xx * u1 * u1 + 2.0 * w.x * u1 + c;
        quadratic_positive_mass(qa, qb, qc)
    };

    // The slice mass has square-root kinks where the slice discriminant
    // vanishes and a jump where the slice becomes linear or constant; split there.
    let mut cuts = vec![-SLICE_RANGE, SLICE_RANGE];
    let (da, db, dc) = (g.xy * g.xy - g.yy * g.xx, 2.0 * (g.xy * w.y - g.yy * w.x), w.y * w.y - g.yy * c);
    cuts.extend(real_roots(da, db, dc));
    if g.xy != 0.0 {
        cuts.push(-w.y / g.xy);
    }
    // Where the slice is (nearly) flat in u2 its sign flips with the
    // constant term.
    cuts.extend(real_roots(g.xx, 2.0 * w.x, c));
    cuts.retain(|u| u.abs() <= SLICE_RANGE);
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();

    let mut num = 0.0;
    let mut den = 0.0;
    for seg in cuts.windows(2) {
        let (a, b) = (seg[0], seg[1]);
        if b - a <= 0.0 {
            continue;
        }
        // u = a + (b − a)(1 − cos θ)/2 clusters nodes at both ends, which
        // smooths the kinks.
        let h = std::f64::consts::PI / SEGMENT_INTERVALS as f64;
        for i in 0..=SEGMENT_INTERVALS {
            let theta = h * i as f64;
            let u1 = a + 0.5 * (b - a) * (1.0 - theta.cos());
            let jac = 0.5 * (b - a) * theta.sin();
            let simpson = if i == 0 || i == SEGMENT_INTERVALS {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            let weight = simpson * jac * std_normal_pdf(u1);
            num += weight * slice(u1);
            den += weight;
        }
    }
    num / den
}

fn canonical_order(a: &GaussianEmission, b: &GaussianEmission) -> bool {
    let key = |g: &GaussianEmission| {
        let (m, c) = (g.mean(), g.cov());
        [m.x, m.y, c.xx, c.xy, c.yy]
    };
    let (ka, kb) = (key(a), key(b));
    for (x, y) in ka.iter().zip(&kb) {
        match x.total_cmp(y) {
            std::cmp::Ordering::Less => return true,
            std::cmp::Ordering::Greater => return false,
            std::cmp::Ordering::Equal => {}
        }
    }
    true
}

/// `ψ(g1, g2) = ½∫|N(·; g1) − N(·; g2)|`, in `[0, 1]`.
pub fn l1_gaussian(g1: &GaussianEmission, g2: &GaussianEmission) -> f64 {
    if g1 == g2 {
        return 0.0;
    }
    // Fixed argument order keeps the result exactly symmetric.
    let (p, q) = if canonical_order(g1, g2) { (g1, g2) } else { (g2, g1) };
    (mass_where_first_dominates(p, p, q) - mass_where_first_dominates(q, p, q)).clamp(0.0, 1.0)
}

/// `∫ min(p, q) = 1 − ψ(p, q)`.
pub fn histogram_intersection(g1: &GaussianEmission, g2: &GaussianEmission) -> f64 {
    1.0 - l1_gaussian(g1, g2)
}

/// Midpoint-rule integral of `min(p, q)` over the axis-aligned box spanning
/// both means ± 5 per-axis standard deviations, `nodes × nodes` cells.
///
/// A plain reference integrator: adequate when the two Gaussians have
/// comparable scale and moderate separation, used to cross-check
/// [`histogram_intersection`].
pub fn grid_overlap(g1: &GaussianEmission, g2: &GaussianEmission, nodes: usize) -> f64 {
    let bounds = |g: &GaussianEmission| {
        let (m, c) = (g.mean(), g.cov());
        let (sx, sy) = (c.xx.sqrt(), c.yy.sqrt());
        (m.x - 5.0 * sx, m.x + 5.0 * sx, m.y - 5.0 * sy, m.y + 5.0 * sy)
    };
    let (a, b) = (bounds(g1), bounds(g2));
    let (x0, x1) = (a.0.min(b.0), a.1.max(b.1));
    let (y0, y1) = (a.2.min(b.2), a.3.max(b.3));
    let (hx, hy) = ((x1 - x0) / nodes as f64, (y1 - y0) / nodes as f64);
    let mut total = 0.0;
    for i in 0..nodes {
        let x = x0 + (i as f64 + 0.5) * hx;
        let mut row = 0.0;
        for j in 0..nodes {
            let p = Point2::new(x, y0 + (j as f64 + 0.5) * hy);
            row += g1.log_pdf(&p).min(g2.log_pdf(&p)).exp();
        }
        total += row;
    }
    total * hx * hy
}
