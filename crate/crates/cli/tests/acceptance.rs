//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use gazehmm::dissim::{
    augment_states, histogram_intersection, kld_rate_hmm, l1_gaussian, match_rois, match_states, AugmentedModel,
};
use gazehmm::distort::{apply, DistortionKind, DistortionScope, DistortionSpec};
use gazehmm::hmm::{log_likelihood, sample_sequences};
use gazehmm::sim::{
    aggregate, equivalent_distortion, generate_ground_truths, run_calibration_sweep, run_estimation_sweep, Equivalent,
    GeneratorSpec, GroundTruths, SimConfig, SummaryRow, Table, TrialRecord,
};
use gazehmm::{FixationSequence, GaussianEmission, Hmm, Point2, RngStream, SymMat2};
use rand::seq::SliceRandom;
use rand::Rng;
use statrs::distribution::{ContinuousCDF, Normal};
use std::collections::BTreeMap;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

type Verdict = Result<String, String>;

fn check(ok: bool, detail: String) -> Verdict {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn within_budget(elapsed: Duration, budget_s: f64, verdict: Verdict) -> Verdict {
    let s = elapsed.as_secs_f64();
    match verdict {
        Ok(d) if s < budget_s => Ok(format!("{d}; {s:.1} s < {budget_s} s")),
        Ok(d) => Err(format!("{d}; runtime {s:.1} s exceeds {budget_s} s")),
        Err(d) => Err(d),
    }
}

fn simplex(k: usize, rng: &mut RngStream) -> Vec<f64> {
    let v: Vec<f64> = (0..k).map(|_| rng.random_range(0.05..1.0)).collect();
    let s: f64 = v.iter().sum();
    v.into_iter().map(|x| x / s).collect()
}

fn random_cov(rng: &mut RngStream, lo: f64, hi: f64) -> SymMat2 {
    let a: f64 = rng.random_range(lo..hi);
    let c: f64 = rng.random_range(lo..hi);
    let rho: f64 = rng.random_range(-0.8..0.8);
    SymMat2::new(a, rho * (a * c).sqrt(), c)
}

fn random_emission(rng: &mut RngStream, spread: f64) -> GaussianEmission {
    let mean = Point2::new(rng.random_range(-spread..spread), rng.random_range(-spread..spread));
    GaussianEmission::new(mean, random_cov(rng, 0.5, 3.0)).unwrap()
}

fn random_hmm(k: usize, rng: &mut RngStream) -> Hmm {
    let prior = simplex(k, rng);
    let rows = (0..k).map(|_| simplex(k, rng)).collect();
    let em = (0..k).map(|_| random_emission(rng, 4.0)).collect();
    Hmm::new(prior, rows, em).unwrap()
}

/// Gaussian log density from the explicit 2x2 inverse and determinant.
fn log_density(mean: Point2, cov: SymMat2, p: Point2) -> f64 {
    let det = cov.xx * cov.yy - cov.xy * cov.xy;
    let (dx, dy) = (p.x - mean.x, p.y - mean.y);
    let q = (cov.yy * dx * dx - 2.0 * cov.xy * dx * dy + cov.xx * dy * dy) / det;
    -0.5 * q - 0.5 * det.ln() - (2.0 * std::f64::consts::PI).ln()
}

fn sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

fn criterion_1() -> Verdict {
    let start = Instant::now();
    let mut rng = RngStream::new(101, 0);
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let k = rng.random_range(1..=3);
        let t = rng.random_range(1..=5);
        let h = random_hmm(k, &mut rng);
        let points: Vec<Point2> = (0..t)
            .map(|_| Point2::new(rng.random_range(-6.0..6.0), rng.random_range(-6.0..6.0)))
            .collect();
        let seq = FixationSequence::new(points.clone()).unwrap();
        let mut terms = Vec::new();
        for code in 0..k.pow(t as u32) {
            let path: Vec<usize> = (0..t).map(|i| (code / k.pow(i as u32)) % k).collect();
            let mut lp = h.prior()[path[0]].ln();
            for i in 0..t {
                if i > 0 {
                    lp += h.transition(path[i - 1], path[i]).ln();
                }
                let e = h.emission(path[i]);
                lp += log_density(e.mean(), e.cov(), points[i]);
            }
            terms.push(lp);
        }
        let want = sum_exp(&terms);
        let got = log_likelihood(&h, &seq);
        worst = worst.max((got - want).abs() / want.abs().max(f64::MIN_POSITIVE));
    }
    within_budget(
        start.elapsed(),
        5.0,
        check(worst <= 1e-10, format!("200 pairs, max relative error {worst:.2e} (tol 1e-10)")),
    )
}

fn gaussian_kl(m0: Point2, s0: SymMat2, m1: Point2, s1: SymMat2) -> f64 {
    let det0 = s0.xx * s0.yy - s0.xy * s0.xy;
    let det1 = s1.xx * s1.yy - s1.xy * s1.xy;
    let (ixx, ixy, iyy) = (s1.yy / det1, -s1.xy / det1, s1.xx / det1);
    let trace = ixx * s0.xx + 2.0 * ixy * s0.xy + iyy * s0.yy;
    let (dx, dy) = (m1.x - m0.x, m1.y - m0.y);
    let maha = ixx * dx * dx + 2.0 * ixy * dx * dy + iyy * dy * dy;
    0.5 * (trace + maha - 2.0 + (det1 / det0).ln())
}

fn single_state(e: GaussianEmission) -> Hmm {
    Hmm::new(vec![1.0], vec![vec![1.0]], vec![e]).unwrap()
}

fn criterion_2() -> Verdict {
    let start = Instant::now();
    let mut rng = RngStream::new(202, 0);
    let mut worst: f64 = 0.0;
    let mut misses = Vec::new();
    for i in 0..20 {
        let a = random_emission(&mut rng, 1.0);
        let b = random_emission(&mut rng, 1.0);
        let want = gaussian_kl(a.mean(), a.cov(), b.mean(), b.cov());
        let est = kld_rate_hmm(&single_state(a), &single_state(b), 10, 5000, &mut rng.child(i));
        let z = (est.rate - want).abs() / est.stderr;
        worst = worst.max(z);
        if z > 3.0 {
            misses.push(format!("pair {i}: {:.4} vs {want:.4} ({z:.2} SE)", est.rate));
        }
    }
    let detail = if misses.is_empty() {
        format!("20 pairs within 3 SE, max |z| {worst:.2}")
    } else {
        format!("outside 3 SE: {}", misses.join("; "))
    };
    within_budget(start.elapsed(), 30.0, check(misses.is_empty(), detail))
}

/// Midpoint-rule integral of min(p, q) over a box covering both densities.
fn grid_min_integral(a: &GaussianEmission, b: &GaussianEmission, nodes: usize) -> f64 {
    let (ma, ca, mb, cb) = (a.mean(), a.cov(), b.mean(), b.cov());
    let sx = ca.xx.max(cb.xx).sqrt();
    let sy = ca.yy.max(cb.yy).sqrt();
    let (x0, x1) = (ma.x.min(mb.x) - 7.0 * sx, ma.x.max(mb.x) + 7.0 * sx);
    let (y0, y1) = (ma.y.min(mb.y) - 7.0 * sy, ma.y.max(mb.y) + 7.0 * sy);
    let (hx, hy) = ((x1 - x0) / nodes as f64, (y1 - y0) / nodes as f64);
    let mut total = 0.0;
    for i in 0..nodes {
        for j in 0..nodes {
            let p = Point2::new(x0 + (i as f64 + 0.5) * hx, y0 + (j as f64 + 0.5) * hy);
            total += log_density(ma, ca, p).min(log_density(mb, cb, p)).exp();
        }
    }
    total * hx * hy
}

fn criterion_3() -> Verdict {
    let mut rng = RngStream::new(303, 0);
    let phi = Normal::standard();
    let (mut worst_l1, mut worst_hi): (f64, f64) = (0.0, 0.0);
    for _ in 0..50 {
        let cov = random_cov(&mut rng, 0.5, 3.0);
        let m1 = Point2::new(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0));
        let m2 = Point2::new(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0));
        let (a, b) = (GaussianEmission::new(m1, cov).unwrap(), GaussianEmission::new(m2, cov).unwrap());
        let det = cov.xx * cov.yy - cov.xy * cov.xy;
        let (dx, dy) = (m1.x - m2.x, m1.y - m2.y);
        let d = ((cov.yy * dx * dx - 2.0 * cov.xy * dx * dy + cov.xx * dy * dy) / det).sqrt();
        worst_l1 = worst_l1.max((l1_gaussian(&a, &b) - (1.0 - 2.0 * phi.cdf(-d / 2.0))).abs());
        worst_hi = worst_hi.max((histogram_intersection(&a, &b) - grid_min_integral(&a, &b, 500)).abs());
        let c = GaussianEmission::new(m2, random_cov(&mut rng, 0.5, 3.0)).unwrap();
        worst_hi = worst_hi.max((histogram_intersection(&a, &c) - grid_min_integral(&a, &c, 500)).abs());
    }
    check(
        worst_l1 <= 1e-3 && worst_hi <= 2e-3,
        format!("50 equal-covariance pairs, max |l1 - (1 - 2 Phi(-d/2))| {worst_l1:.1e} (tol 1e-3); 100 pairs (50 unequal covariance), max |HI - grid min-integral| {worst_hi:.1e} (tol 2e-3)"),
    )
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            out.push(q);
        }
    }
    out
}

fn roi_cost(t: &Hmm, e: &Hmm, p: &[usize]) -> f64 {
    (0..p.len()).map(|j| l1_gaussian(t.emission(j), e.emission(p[j]))).sum::<f64>() / p.len() as f64
}

fn state_cost(t: &Hmm, e: &Hmm, p: &[usize]) -> (f64, f64) {
    let n = p.len();
    let mut trans = 0.0;
    for i in 0..n {
        for j in 0..n {
            trans += (t.transition(i, j) - e.transition(p[i], p[j])).abs();
        }
    }
    let prior = (0..n).map(|j| (t.prior()[j] - e.prior()[p[j]]).abs()).sum();
    (trans / n as f64, prior)
}

/// Every way to pad the smaller model to the larger one's size.
fn padded_pairs(t: &Hmm, e: &Hmm) -> Vec<(Hmm, Hmm)> {
    let (kt, ke) = (t.k(), e.k());
    if kt == ke {
        return vec![(t.clone(), e.clone())];
    }
    let (small, m) = (kt.min(ke), kt.abs_diff(ke));
    let mut out = Vec::new();
    for code in 0..small.pow(m as u32) {
        let sources: Vec<usize> = (0..m).map(|i| (code / small.pow(i as u32)) % small).collect();
        let dups: Vec<(usize, usize)> = sources.iter().enumerate().map(|(i, &s)| (s, small + i)).collect();
        if kt < ke {
            out.push((augment_states(t, &dups).unwrap(), e.clone()));
        } else {
            out.push((t.clone(), augment_states(e, &dups).unwrap()));
        }
    }
    out
}

fn pad_by_plan(t: &Hmm, e: &Hmm, plan: &Option<gazehmm::dissim::AugmentationPlan>) -> (Hmm, Hmm) {
    match plan {
        None => (t.clone(), e.clone()),
        Some(p) if p.target == AugmentedModel::True => (augment_states(t, &p.duplications).unwrap(), e.clone()),
        Some(p) => (t.clone(), augment_states(e, &p.duplications).unwrap()),
    }
}

fn criterion_4() -> Verdict {
    let mut rng = RngStream::new(404, 0);
    let mut failures = Vec::new();
    for i in 0..100 {
        let k = rng.random_range(1..=6);
        let h = random_hmm(k, &mut rng);
        let mut order: Vec<usize> = (0..k).collect();
        order.shuffle(&mut rng);
        let copy = h.permuted(&order);
        let r = match_rois(&h, &copy);
        let s = match_states(&h, &copy);
        let exact = r.l_roi == 0.0 && s.l_trans == 0.0 && s.l_prior == 0.0;
        let recovered = r.permutation.is_bijection()
            && copy.permuted(&r.permutation.mapping) == h
            && copy.permuted(&s.permutation.mapping) == h;
        if !(exact && recovered) {
            failures.push(format!("copy {i} (K={k})"));
        }
    }

    let mut cases = 0;
    for kt in 1..=4usize {
        for ke in 1..=4usize {
            if kt.abs_diff(ke) > 1 {
                continue;
            }
            for rep in 0..10 {
                cases += 1;
                let t = random_hmm(kt, &mut rng);
                let e = random_hmm(ke, &mut rng);
                let n = kt.max(ke);
                let (mut best_roi, mut best_state) = (f64::INFINITY, (f64::INFINITY, 0.0, 0.0));
                for (pt, pe) in padded_pairs(&t, &e) {
                    for p in permutations(n) {
                        best_roi = best_roi.min(roi_cost(&pt, &pe, &p));
                        let (tr, pr) = state_cost(&pt, &pe, &p);
                        if tr * n as f64 + pr < best_state.0 {
                            best_state = (tr * n as f64 + pr, tr, pr);
                        }
                    }
                }
                let r = match_rois(&t, &e);
                let s = match_states(&t, &e);
                let (rt, re) = pad_by_plan(&t, &e, &r.augmentation);
                let (st, se) = pad_by_plan(&t, &e, &s.augmentation);
                let chosen_roi = roi_cost(&rt, &re, &r.permutation.mapping);
                let (ctr, cpr) = state_cost(&st, &se, &s.permutation.mapping);
                let close = |a: f64, b: f64| (a - b).abs() <= 1e-12;
                let ok = close(r.l_roi, best_roi)
                    && close(chosen_roi, best_roi)
                    && close(s.l_trans, best_state.1)
                    && close(s.l_prior, best_state.2)
                    && close(ctr * n as f64 + cpr, best_state.0);
                if !ok {
                    failures.push(format!("oracle K={kt} vs {ke} rep {rep}"));
                }
            }
        }
    }
    check(
        failures.is_empty(),
        if failures.is_empty() {
            format!("100 permuted copies exact and recovered; {cases} exhaustive cases (K <= 4, |K - K^| <= 1) equal to the oracle")
        } else {
            format!("failed: {}", failures.join(", "))
        },
    )
}

fn criterion_5() -> Verdict {
    let mut rng = RngStream::new(505, 0);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let k = rng.random_range(1..=5);
        let h = random_hmm(k, &mut rng);
        let extra = rng.random_range(1..=3);
        let dups: Vec<(usize, usize)> = (0..extra).map(|i| (rng.random_range(0..k + i), k + i)).collect();
        let aug = augment_states(&h, &dups).unwrap();
        for _ in 0..100 {
            let t = rng.random_range(1..=20);
            let seq = sample_sequences(&h, 1, t, &mut rng).remove(0);
            worst = worst.max((log_likelihood(&h, &seq) - log_likelihood(&aug, &seq)).abs());
        }
    }
    check(worst < 1e-9, format!("20 HMMs x 100 sequences, max |delta log-likelihood| {worst:.1e} (tol 1e-9)"))
}

fn eigenvalues(c: SymMat2) -> [f64; 2] {
    let half = 0.5 * (c.xx + c.yy);
    let r = (0.25 * (c.xx - c.yy).powi(2) + c.xy * c.xy).sqrt();
    [half - r, half + r]
}

fn half_l1(a: &[f64], b: &[f64]) -> f64 {
    0.5 * a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>()
}

fn criterion_6() -> Verdict {
    let truths = generate_ground_truths(
        &GeneratorSpec {
            count: 100,
            ..GeneratorSpec::default()
        },
        &mut RngStream::new(606, 0),
    )
    .unwrap();
    let mut rng = RngStream::new(606, 1);
    let mut worst = [0f64; 4];
    let mut identity = true;
    for h in &truths {
        let k = h.k();
        for kind in DistortionKind::ALL {
            let zero = DistortionSpec { kind, parameter: 0.0, scope: DistortionScope::All };
            identity &= apply(h, &zero, &mut rng).unwrap() == *h;
        }
        let alpha = rng.random_range(0.0..20.0);
        let spec = |kind, parameter| DistortionSpec { kind, parameter, scope: DistortionScope::All };
        let m = apply(h, &spec(DistortionKind::RoiMean, alpha), &mut rng).unwrap();
        for j in 0..k {
            worst[0] = worst[0].max(((m.emission(j).mean() - h.emission(j).mean()).norm() - alpha).abs());
        }
        let beta = rng.random_range(0.0..0.5);
        let c = apply(h, &spec(DistortionKind::RoiCov, beta), &mut rng).unwrap();
        for j in 0..k {
            let before = eigenvalues(h.emission(j).cov());
            let after = eigenvalues(c.emission(j).cov());
            let err = |exp: f64| {
                (0..2)
                    .map(|i| (after[i] - before[i].powf(exp)).abs() / before[i].powf(exp))
                    .fold(0.0, f64::max)
            };
            worst[1] = worst[1].max(err(1.0 + beta).min(err(1.0 - beta)));
        }
        let min_prior = h.prior().iter().copied().fold(1.0, f64::min);
        let delta = rng.random_range(0.0..0.5) * (1.0 - min_prior);
        let p = apply(h, &spec(DistortionKind::Prior, delta), &mut rng).unwrap();
        worst[2] = worst[2].max((half_l1(h.prior(), p.prior()) - delta).abs());
        let min_row = (0..k)
            .map(|j| 1.0 - h.transition_row(j).iter().copied().fold(1.0, f64::min))
            .fold(1.0, f64::min);
        let eps = rng.random_range(0.0..0.5) * min_row;
        let a = apply(h, &spec(DistortionKind::Transition, eps), &mut rng).unwrap();
        for j in 0..k {
            worst[3] = worst[3].max((half_l1(h.transition_row(j), a.transition_row(j)) - eps).abs());
        }
    }
    check(
        identity && worst.iter().all(|w| *w <= 1e-12),
        format!(
            "100 truths; max errors alpha {:.1e}, beta (relative eigenvalue) {:.1e}, delta {:.1e}, eps {:.1e} (tol 1e-12); zero parameter identity: {identity}",
            worst[0], worst[1], worst[2], worst[3]
        ),
    )
}

fn well_separated(count: usize) -> GroundTruths {
    GroundTruths::Synthetic(GeneratorSpec {
        count,
        states: vec![3],
        std_range: [15.0, 25.0],
        min_separation: Some(250.0),
        ..GeneratorSpec::default()
    })
}

fn criterion_7() -> Verdict {
    let start = Instant::now();
    let cfg = SimConfig {
        ground_truths: well_separated(1),
        n_grid: vec![100],
        t_grid: vec![25],
        trials: 50,
        master_seed: 7,
        ..SimConfig::default()
    };
    let truths = cfg.resolve_ground_truths(Path::new(".")).unwrap();
    let records = run_estimation_sweep(&cfg, &truths).unwrap();
    let hits = records.iter().filter(|r| r.k_hat == Some(3)).count();
    let l_roi: Vec<f64> = records.iter().filter_map(|r| r.metrics.as_ref()).map(|m| m.l_roi).collect();
    let mean_l_roi = l_roi.iter().sum::<f64>() / l_roi.len().max(1) as f64;
    let rate = hits as f64 / records.len() as f64;
    within_budget(
        start.elapsed(),
        600.0,
        check(
            rate >= 0.8 && !l_roi.is_empty() && mean_l_roi <= 0.10,
            format!("k_hat = 3 in {hits}/50 trials ({:.0}%, need 80%); mean l_roi {mean_l_roi:.4} over {} fits (need <= 0.10)", rate * 100.0, l_roi.len()),
        ),
    )
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn cell_medians(records: &[TrialRecord]) -> BTreeMap<(usize, usize), f64> {
    let mut cells: BTreeMap<(usize, usize), Vec<f64>> = BTreeMap::new();
    for r in records {
        if let Some(m) = &r.metrics {
            cells.entry((r.n, r.t)).or_default().push(m.d_hmm);
        }
    }
    cells.into_iter().map(|(k, v)| (k, median(v))).collect()
}

fn criterion_8() -> Verdict {
    let start = Instant::now();
    let cfg = SimConfig {
        ground_truths: well_separated(10),
        master_seed: 8,
        ..SimConfig::default()
    };
    let truths = cfg.resolve_ground_truths(Path::new(".")).unwrap();
    let records = run_estimation_sweep(&cfg, &truths).unwrap();
    let med = cell_medians(&records);
    let mut problems = Vec::new();
    for &t in &cfg.t_grid {
        let col: Vec<f64> = cfg.n_grid.iter().map(|&n| med[&(n, t)]).collect();
        let violations = col.windows(2).filter(|w| w[1] > w[0]).count();
        if violations > 1 {
            problems.push(format!("T={t}: {violations} increases in N {col:.4?}"));
        }
    }
    for &n in &cfg.n_grid {
        let row: Vec<f64> = cfg.t_grid.iter().map(|&t| med[&(n, t)]).collect();
        if row.windows(2).any(|w| w[1] > w[0]) {
            problems.push(format!("N={n}: increases in T {row:.4?}"));
        }
    }
    let pooled = |keep: &dyn Fn(usize) -> bool| {
        median(
            records
                .iter()
                .filter(|r| keep(r.n * r.t))
                .filter_map(|r| r.metrics.as_ref().map(|m| m.d_hmm))
                .collect(),
        )
    };
    let (large, small) = (pooled(&|nt| nt >= 250), pooled(&|nt| nt <= 50));
    if small < 2.0 * large {
        problems.push(format!("median at N*T <= 50 ({small:.4}) is not 2x the median at N*T >= 250 ({large:.4})"));
    }
    let threshold = med.iter().filter(|(_, m)| **m <= 0.05).map(|((n, t), _)| n * t).min();
    match threshold {
        Some(nt) if (100..=1000).contains(&nt) => {}
        other => problems.push(format!("smallest N*T with median d_hmm <= 0.05 is {other:?}, outside [100, 1000]")),
    }
    let failed = records.iter().filter(|r| r.failure.is_some()).count();
    let detail = format!(
        "{} trials ({failed} failed); median d_hmm at N*T <= 50: {small:.4}, at N*T >= 250: {large:.4}; smallest N*T reaching 0.05: {}",
        records.len(),
        threshold.map_or("none".into(), |v| v.to_string())
    );
    let verdict = if problems.is_empty() {
        Ok(detail)
    } else {
        Err(format!("{detail}; {}", problems.join("; ")))
    };
    within_budget(start.elapsed(), 1800.0, verdict)
}

fn matched_metric(kind: DistortionKind) -> &'static str {
    match kind {
        DistortionKind::RoiMean | DistortionKind::RoiCov => "l_roi",
        DistortionKind::Prior => "l_prior",
        DistortionKind::Transition => "l_trans",
    }
}

fn criterion_9() -> Verdict {
    let cfg = SimConfig {
        trials: 200,
        master_seed: 9,
        ..SimConfig::default()
    };
    let truths = cfg.resolve_ground_truths(Path::new(".")).unwrap();
    let records = run_calibration_sweep(&cfg, &truths).unwrap();
    let rows = aggregate(&Table::from_records(&records), &["kind", "parameter"], &["l_roi", "l_trans", "l_prior"]).unwrap();
    let mut problems = Vec::new();
    let mut curves = Vec::new();
    for (&kind, grid) in &cfg.distortion_grids {
        let metric = matched_metric(kind);
        let points: Vec<&SummaryRow> = rows
            .iter()
            .filter(|r| r.key("kind") == Some(kind.name()) && r.metric == metric)
            .collect();
        let means: Vec<f64> = points.iter().map(|r| r.mean.unwrap_or(f64::NAN)).collect();
        let counts: Vec<usize> = points.iter().map(|r| r.count - r.failures).collect();
        if grid.len() != 4 || points.len() != 4 || counts.iter().any(|c| *c < 200) {
            problems.push(format!("{kind}: grid {grid:?}, usable trials {counts:?}"));
        }
        if !means.windows(2).all(|w| w[1] > w[0]) {
            problems.push(format!("{kind}: mean {metric} not strictly increasing {means:.4?}"));
        }
        for (p, m) in grid.iter().zip(&means) {
            match equivalent_distortion(&rows, kind.name(), metric, *m) {
                Ok(Equivalent::Parameter(q)) if q == *p => {}
                other => problems.push(format!("{kind}: {metric} {m} inverts to {other:?}, expected {p}")),
            }
        }
        curves.push(format!("{kind} {metric} {means:.4?}"));
    }
    let anchor = match equivalent_distortion(&rows, "roi_mean", "l_roi", 0.10) {
        Ok(Equivalent::Parameter(px)) => format!("{px:.1} px"),
        other => format!("{other:?}"),
    };
    let detail = format!("200 trials/point; {}; l_roi 0.10 inverts to a mean shift of {anchor}", curves.join(", "));
    if problems.is_empty() {
        Ok(detail)
    } else {
        Err(format!("{detail}; {}", problems.join("; ")))
    }
}

fn criterion_10() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(
        d.join("cfg.json"),
        r#"{"n_grid": [5, 10], "t_grid": [5, 10], "trials": 6, "kld_samples": 300, "master_seed": 10}"#,
    )
    .unwrap();
    let run = |threads: &str, name: &str| {
        let status = Command::new(env!("CARGO_BIN_EXE_gazehmm"))
            .current_dir(d)
            .args(["--config", "cfg.json", "--threads", threads, "simulate", "--out", name])
            .output()
            .unwrap()
            .status;
        assert!(status.success(), "simulate --threads {threads} failed");
        let records = std::fs::read(d.join(name)).unwrap();
        let summary = std::fs::read(d.join(name.replace(".csv", ".summary.csv"))).unwrap();
        (records, summary)
    };
    let a = run("1", "one.csv");
    let b = run("1", "again.csv");
    let c = run("3", "three.csv");
    check(
        a == b && a == c && !a.0.is_empty(),
        format!(
            "records ({} bytes) and summary ({} bytes) identical across two --threads 1 runs and a --threads 3 run: {}",
            a.0.len(),
            a.1.len(),
            a == b && a == c
        ),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Verdict); 10] = [
        ("forward-algorithm oracle", criterion_1),
        ("KLD closed-form oracle", criterion_2),
        ("L1 integrator oracle", criterion_3),
        ("matching exactness", criterion_4),
        ("augmentation functional identity", criterion_5),
        ("distortion exactness", criterion_6),
        ("VB recovery", criterion_7),
        ("estimation-error trend", criterion_8),
        ("calibration monotonicity", criterion_9),
        ("reproducibility across thread counts", criterion_10),
    ];
    let mut passed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let verdict = std::panic::catch_unwind(run).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        match verdict {
            Ok(d) => {
                passed += 1;
                println!("PASS criterion {}: {name}: {d} [{secs:.1} s]", i + 1);
            }
            Err(d) => println!("FAIL criterion {}: {name}: {d} [{secs:.1} s]", i + 1),
        }
    }
    println!("acceptance: {passed}/{} criteria passed", criteria.len());
    if passed != criteria.len() {
        std::process::exit(1);
    }
}
