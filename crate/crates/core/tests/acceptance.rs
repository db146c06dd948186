//! Acceptance criteria 1–9. Each test prints one `criterion N: PASS|FAIL`
//! line on stdout (bypassing the capture) and then asserts.

use std::io::Write;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use uninorm::boxnorms::{
    box_norm, box_norm_ell, cut_norm, lift_to_tensor, multi_box_correlation, TensorFunction,
};
use uninorm::decompose::{dense_model, DenseModelOptions};
use uninorm::dualsearch::best_dual;
use uninorm::harness::{self, report_to_csv, ExperimentId, Grid, ReportFormat};
use uninorm::interval::{
    build_cutoff, cutoff_fourier_bound, default_modulus, find_modulus, interval_norm, next_prime,
    transfer_kvn, CutoffOptions, IntervalFunction, TransferOptions,
};
use uninorm::pseudorandom::{generate_majorant, MajorantKind, MajorantSpec};
use uninorm::search::{SearchMode, SearchOptions};
use uninorm::uniformity::{
    additive_cut_norm, cube_marginal, gowers_norm, gowers_norm_direct, gowers_norm_recursive,
    gowers_norm_u2_fourier, moment_estimate, weak_norm,
};
use uninorm::{Budget, Error, FiniteAbelianGroup, GroupFunction};

fn report(criterion: u32, passed: bool, elapsed: Duration, detail: &str) {
    let verdict = if passed { "PASS" } else { "FAIL" };
    let line = format!(
        "criterion {criterion}: {verdict} ({:.1} s) {detail}\n",
        elapsed.as_secs_f64()
    );
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(line.as_bytes());
    let _ = out.flush();
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn z(n: usize) -> FiniteAbelianGroup {
    FiniteAbelianGroup::cyclic(n).unwrap()
}

fn random_fn(g: &FiniteAbelianGroup, rng: &mut ChaCha8Rng) -> GroupFunction {
    GroupFunction::from_fn(g, |_| rng.random_range(-1.0..=1.0)).unwrap()
}

fn random_tensor(n: usize, s: usize, rng: &mut ChaCha8Rng) -> TensorFunction {
    TensorFunction::from_fn(n, s, |_| rng.random_range(-1.0..=1.0)).unwrap()
}

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1e-300)
}

#[test]
fn criterion_1_lift_identity() {
    let start = Instant::now();
    let mut worst = 0.0f64;
    let mut failures = 0;
    let mut count = 0;
    for n in [4usize, 5, 6, 8] {
        for s in [2usize, 3] {
            for seed in 0..100u64 {
                let f = random_fn(&z(n), &mut rng(seed * 1000 + n as u64 * 10 + s as u64));
                let u = gowers_norm(&f, s).unwrap().value;
                let b = box_norm(&lift_to_tensor(&f, s, &Budget::default()).unwrap()).unwrap().value;
                let rel = (u - b).abs() / u.abs().max(b.abs()).max(1e-300);
                worst = worst.max(rel);
                count += 1;
                if !rel_close(u, b, 1e-9) {
                    failures += 1;
                }
            }
        }
    }
    let elapsed = start.elapsed();
    let passed = failures == 0 && elapsed <= Duration::from_secs(60);
    report(1, passed, elapsed, &format!("{count} cases, {failures} violations, worst relative gap {worst:.2e}"));
    assert!(passed);
}

#[test]
fn criterion_2_method_agreement() {
    let start = Instant::now();
    let mut failures = Vec::new();
    let sizes = [5usize, 16, 97, 256, 1024];
    for seed in 0..100u64 {
        let n = sizes[seed as usize % sizes.len()];
        let f = random_fn(&z(n), &mut rng(200 + seed));
        let rec = gowers_norm_recursive(&f, 2).unwrap().value;
        let fou = gowers_norm_u2_fourier(&f).unwrap().value;
        if !rel_close(rec, fou, 1e-9) {
            failures.push(format!("N={n} seed {seed}: recursive {rec} vs Fourier {fou}"));
        }
    }
    for seed in 0..100u64 {
        let n = 2 + seed as usize % 7;
        let s = 2 + seed as usize % 2;
        let f = random_fn(&z(n), &mut rng(400 + seed));
        let dir = gowers_norm_direct(&f, s, &Budget::default()).unwrap().value;
        let rec = gowers_norm_recursive(&f, s).unwrap().value;
        if !rel_close(dir, rec, 1e-9) {
            failures.push(format!("N={n} s={s} seed {seed}: direct {dir} vs recursive {rec}"));
        }
        if s == 2 {
            let fou = gowers_norm_u2_fourier(&f).unwrap().value;
            if !rel_close(dir, fou, 1e-9) {
                failures.push(format!("N={n} seed {seed}: direct {dir} vs Fourier {fou}"));
            }
        }
    }
    let elapsed = start.elapsed();
    let passed = failures.is_empty() && elapsed <= Duration::from_secs(60);
    report(
        2,
        passed,
        elapsed,
        &format!("200 functions, {} disagreements {}", failures.len(), failures.first().map_or("", |s| s)),
    );
    assert!(passed);
}

/// Counts instances and violations for one inequality family.
struct Tally {
    name: &'static str,
    checked: usize,
    violations: Vec<String>,
}

impl Tally {
    fn new(name: &'static str) -> Self {
        Tally { name, checked: 0, violations: Vec::new() }
    }

    fn le(&mut self, lhs: f64, rhs: f64, slack: f64, ctx: impl FnOnce() -> String) {
        self.checked += 1;
        if lhs.is_nan() || rhs.is_nan() || lhs > rhs + slack {
            self.violations.push(format!("{}: {lhs:e} > {rhs:e}", ctx()));
        }
    }
}

/// `I` of the two-family cube correlation, by summing over `(x, h_1, h_2)`.
fn two_family_correlation(g: &GroupFunction, fams: [&[GroupFunction]; 2], s: usize) -> f64 {
    let grp = g.group();
    let n = grp.order();
    let mut total = 0.0;
    let mut idx = vec![0usize; 1 + 2 * s];
    loop {
        let x = idx[0];
        let mut p = g.values()[x];
        for (k, fam) in fams.iter().enumerate() {
            let h = &idx[1 + k * s..1 + (k + 1) * s];
            for mask in 1..(1usize << s) {
                let mut y = x;
                for (i, &hi) in h.iter().enumerate() {
                    if (mask >> i) & 1 == 1 {
                        y = grp.add(y, hi).unwrap();
                    }
                }
                p *= fam[mask - 1].values()[y];
            }
        }
        total += p;
        let mut i = idx.len();
        loop {
            if i == 0 {
                return total / (n as f64).powi(idx.len() as i32);
            }
            i -= 1;
            idx[i] += 1;
            if idx[i] < n {
                break;
            }
            idx[i] = 0;
        }
    }
}

/// `I = E_{y,z_1,z_2} G(y) ∏_k ∏_{ω≠1^s} G^{(k)}_ω(π_ω(y, z_k))` on `V^2`.
fn two_family_box_correlation(g: &TensorFunction, fams: [&[TensorFunction]; 2]) -> f64 {
    let n = g.vertex_count();
    let mut total = 0.0;
    for y0 in 0..n {
        for y1 in 0..n {
            let mut p = g.get(&[y0, y1]).unwrap();
            for fam in fams {
                let mut m = 0.0;
                for z0 in 0..n {
                    for z1 in 0..n {
                        // Bit i of the mask selects the second column at coordinate i.
                        let mut q = 1.0;
                        for mask in 1..4usize {
                            let a = if mask & 1 == 1 { z0 } else { y0 };
                            let b = if mask & 2 == 2 { z1 } else { y1 };
                            q *= fam[mask - 1].get(&[a, b]).unwrap();
                        }
                        m += q;
                    }
                }
                p *= m / (n * n) as f64;
            }
            total += p;
        }
    }
    total / (n * n) as f64
}

#[test]
fn criterion_3_inequality_suite() {
    let start = Instant::now();
    let budget = Budget::default();
    let opts = SearchOptions::default();
    let slack = 1e-9;
    let mut tallies = Vec::new();

    let mut weak_le = Tally::new("weak below gowers");
    let mut weak_rev = Tally::new("bounded reverse (weak)");
    let mut cube_gcs = Tally::new("cube Gowers-Cauchy-Schwarz");
    let mut fact_group = Tally::new("two-family group correlation");
    for seed in 0..200u64 {
        let n = 2 + seed as usize % 5;
        let mut r = rng(3000 + seed);
        let g = z(n);
        let f = random_fn(&g, &mut r);
        let w = weak_norm(&f, 2, SearchMode::Exhaustive, &opts, &budget).unwrap();
        assert!(w.exact);
        let u = gowers_norm(&f, 2).unwrap().value;
        weak_le.le(w.lower_bound, u, slack, || format!("N={n} seed {seed}"));
        weak_rev.le(u, w.lower_bound.powf(0.25), slack, || format!("N={n} seed {seed}"));

        let fs: Vec<GroupFunction> = (0..3).map(|_| random_fn(&g, &mut r)).collect();
        let corr = f.inner(&cube_marginal(&fs).unwrap()).unwrap();
        let mut all = vec![f.clone()];
        all.extend(fs.iter().cloned());
        let prod: f64 = all.iter().map(|h| gowers_norm(h, 2).unwrap().value).product();
        cube_gcs.le(corr.abs(), prod, slack, || format!("N={n} seed {seed}"));

        let m = 2 + seed as usize % 4;
        let gm = z(m);
        let g0 = random_fn(&gm, &mut r);
        let fam1: Vec<GroupFunction> = (0..3).map(|_| random_fn(&gm, &mut r)).collect();
        let fam2: Vec<GroupFunction> = (0..3).map(|_| random_fn(&gm, &mut r)).collect();
        let i = two_family_correlation(&g0, [&fam1, &fam2], 2);
        let rhs: f64 = std::iter::once(&g0)
            .chain(&fam1)
            .chain(&fam2)
            .map(|h| gowers_norm(h, 4).unwrap().value)
            .product();
        fact_group.le(i.abs(), rhs, slack, || format!("N={m} seed {seed}"));
    }
    tallies.extend([weak_le, weak_rev, cube_gcs, fact_group]);

    let mut cut_le = Tally::new("cut below box");
    let mut cut_rev = Tally::new("bounded reverse (cut)");
    let mut gcs2 = Tally::new("box Gowers-Cauchy-Schwarz l=2");
    let mut gcs4 = Tally::new("box Gowers-Cauchy-Schwarz l=4");
    let mut mono = Tally::new("box l-monotone");
    let mut tri = Tally::new("box triangle l=2,4");
    let mut hom = Tally::new("box homogeneity l=2,4");
    let mut bounded = Tally::new("box l=4 bounded case");
    let mut fact_box = Tally::new("two-family box correlation");
    for seed in 0..200u64 {
        let v = 1 + seed as usize % 6;
        let mut r = rng(5000 + seed);
        let f = random_tensor(v, 2, &mut r);
        let ctx = || format!("|V|={v} seed {seed}");
        let cut = cut_norm(&f, SearchMode::Exhaustive, &opts, &budget).unwrap();
        assert!(cut.exact);
        let b2 = box_norm(&f).unwrap().value;
        let b4 = box_norm_ell(&f, 4).unwrap().value;
        cut_le.le(cut.lower_bound, b2, slack, ctx);
        cut_rev.le(b2, cut.lower_bound.powf(0.25), slack, ctx);
        mono.le(b2, b4, 1e-12, ctx);
        bounded.le(b4, b2.powf(1.0 / 16.0), slack, ctx);

        let g = random_tensor(v, 2, &mut r);
        let c: f64 = r.random_range(-3.0..3.0);
        for ell in [2usize, 4] {
            let nf = box_norm_ell(&f, ell).unwrap().value;
            let ng = box_norm_ell(&g, ell).unwrap().value;
            let sum = box_norm_ell(&f.add(&g).unwrap(), ell).unwrap().value;
            tri.le(sum, nf + ng, 1e-10, ctx);
            let scaled = box_norm_ell(&f.scale(c).unwrap(), ell).unwrap().value;
            hom.le((scaled - c.abs() * nf).abs(), 0.0, 1e-10, ctx);
        }

        for (ell, tally) in [(2usize, &mut gcs2), (4, &mut gcs4)] {
            let fs: Vec<TensorFunction> = (0..ell * ell).map(|_| random_tensor(v, 2, &mut r)).collect();
            let lhs = multi_box_correlation(&fs, ell).unwrap().abs();
            let rhs: f64 = fs.iter().map(|t| box_norm_ell(t, ell).unwrap().value).product();
            tally.le(lhs, rhs, slack, ctx);
        }

        let w = 1 + seed as usize % 3;
        let g0 = random_tensor(w, 2, &mut r);
        let fam1: Vec<TensorFunction> = (0..3).map(|_| random_tensor(w, 2, &mut r)).collect();
        let fam2: Vec<TensorFunction> = (0..3).map(|_| random_tensor(w, 2, &mut r)).collect();
        let i = two_family_box_correlation(&g0, [&fam1, &fam2]);
        let rhs: f64 = std::iter::once(&g0)
            .chain(&fam1)
            .chain(&fam2)
            .map(|t| box_norm_ell(t, 4).unwrap().value)
            .product();
        fact_box.le(i.abs(), rhs, slack, || format!("|V|={w} seed {seed}"));
    }
    tallies.extend([cut_le, cut_rev, gcs2, gcs4, mono, tri, hom, bounded, fact_box]);

    let elapsed = start.elapsed();
    let failed: Vec<&Tally> = tallies.iter().filter(|t| !t.violations.is_empty() || t.checked < 200).collect();
    let passed = failed.is_empty() && elapsed <= Duration::from_secs(300);
    let summary: Vec<String> = tallies
        .iter()
        .map(|t| format!("{} {}/{}", t.name, t.checked - t.violations.len(), t.checked))
        .collect();
    report(3, passed, elapsed, &summary.join("; "));
    for t in failed {
        eprintln!("{}: {:?}", t.name, t.violations.first());
    }
    assert!(passed);
}

#[test]
fn criterion_4_alternating_matches_exhaustive() {
    let start = Instant::now();
    let budget = Budget::default();
    let groups = [z(1), z(2), z(3), z(4), FiniteAbelianGroup::new(vec![2, 2]).unwrap()];
    let mut worst = f64::INFINITY;
    let mut failures = Vec::new();
    let mut count = 0;
    let mut check = |what: String, exh: f64, alt: f64| {
        count += 1;
        if exh > 0.0 {
            worst = worst.min(alt / exh);
        }
        if alt < 0.99 * exh - 1e-12 || alt > exh + 1e-9 {
            failures.push(format!("{what}: alternating {alt} vs exhaustive {exh}"));
        }
    };
    for seed in 0..50u64 {
        let opts = SearchOptions { restarts: 32, seed, ..SearchOptions::default() };
        let mut r = rng(7000 + seed);
        for g in &groups {
            let f = random_fn(g, &mut r);
            let ex = weak_norm(&f, 2, SearchMode::Exhaustive, &opts, &budget).unwrap().lower_bound;
            let al = weak_norm(&f, 2, SearchMode::Alternating, &opts, &budget).unwrap().lower_bound;
            check(format!("weak |Z|={} seed {seed}", g.order()), ex, al);
            let ex = additive_cut_norm(&f, 2, SearchMode::Exhaustive, &opts, &budget).unwrap().lower_bound;
            let al = additive_cut_norm(&f, 2, SearchMode::Alternating, &opts, &budget).unwrap().lower_bound;
            check(format!("additive cut |Z|={} seed {seed}", g.order()), ex, al);
        }
        for v in [1usize, 2] {
            let t = random_tensor(v, 2, &mut r);
            let ex = cut_norm(&t, SearchMode::Exhaustive, &opts, &budget).unwrap().lower_bound;
            let al = cut_norm(&t, SearchMode::Alternating, &opts, &budget).unwrap().lower_bound;
            check(format!("cut |V|={v} seed {seed}"), ex, al);
        }
    }
    let elapsed = start.elapsed();
    let passed = failures.is_empty() && elapsed <= Duration::from_secs(120);
    report(
        4,
        passed,
        elapsed,
        &format!("{count} instances, {} below 0.99x, worst ratio {worst:.4}", failures.len()),
    );
    assert!(passed, "{failures:?}");
}

#[test]
fn criterion_5_dense_model_contract() {
    let start = Instant::now();
    let g8 = z(8);
    let eps = 0.05;
    let budget = Budget::default();
    let exhaustive = SearchOptions::default();
    let opts = DenseModelOptions {
        mode: Some(SearchMode::Exhaustive),
        ..DenseModelOptions::default()
    };
    let mut ok = 0;
    let mut lines = Vec::new();
    for seed in 0..20u64 {
        let nu = generate_majorant(&MajorantSpec::new(MajorantKind::SparseSet { delta: 0.5 }, seed), &g8)
            .unwrap()
            .nu;
        let g = nu.clone();
        let res = dense_model(&g, &nu, 2, eps, &opts).unwrap();
        let in_range = res.model.values().iter().all(|&v| (0.0..=1.0).contains(&v));
        let (_, gap) = best_dual(&g.sub(&res.model).unwrap(), 2, SearchMode::Exhaustive, &exhaustive, &budget)
            .unwrap();
        // Weak duality: for every w ∈ [0,1], ⟨g − w, D⟩ ≥ ⟨g, D⟩ − E[D_+].
        let mut certificate = f64::NEG_INFINITY;
        for target in [res.model.clone(), GroupFunction::constant(&g8, 1.0).unwrap(), nu.map(|v| v.min(1.0)).unwrap()] {
            let (d, _) = best_dual(&g.sub(&target).unwrap(), 2, SearchMode::Exhaustive, &exhaustive, &budget)
                .unwrap();
            let pos = d.realized.map(|v| v.max(0.0)).unwrap().average();
            certificate = certificate.max(g.inner(&d.realized).unwrap() - pos);
        }
        let good = res.converged && in_range && gap <= eps + 1e-9;
        if good {
            ok += 1;
        }
        lines.push(format!(
            "seed {seed}: converged={} iterations={} t_max={} gap={gap:.4} lower bound on any model's gap={certificate:.4}",
            res.converged,
            res.iterations.len(),
            res.t_max
        ));
    }
    let elapsed = start.elapsed();
    let passed = ok == 20 && elapsed <= Duration::from_secs(300);
    report(5, passed, elapsed, &format!("{ok}/20 pairs met the contract"));
    for l in &lines {
        let _ = writeln!(std::io::stdout(), "  {l}");
    }
    assert!(passed);
}

fn median(mut v: Vec<f64>) -> f64 {
    harness::median(&mut v).unwrap()
}

#[test]
fn criterion_6_moment_trend() {
    let start = Instant::now();
    let g = z(16);
    let evens: Vec<usize> = (0..16).step_by(2).collect();
    let levels = [0.4, 0.2, 0.1];
    let mut passed = true;
    let mut detail = Vec::new();
    for k in [1u32, 2] {
        let medians: Vec<f64> = levels
            .iter()
            .map(|&eps| {
                median(
                    (0..16u64)
                        .map(|seed| {
                            let kind = MajorantKind::Interpolated { delta: 0.5, epsilon: eps };
                            let nu = generate_majorant(&MajorantSpec::new(kind, seed), &g).unwrap().nu;
                            moment_estimate(&nu, 2, &evens, k).unwrap()
                        })
                        .collect(),
                )
            })
            .collect();
        let strict = medians.windows(2).all(|w| w[1] < w[0]);
        passed &= strict;
        detail.push(format!("k={k} medians {:?}", medians.iter().map(|m| format!("{m:.3e}")).collect::<Vec<_>>()));
    }
    let elapsed = start.elapsed();
    passed &= elapsed <= Duration::from_secs(300);
    report(6, passed, elapsed, &detail.join("; "));
    assert!(passed);
}

#[test]
fn criterion_7_transfer_trends() {
    let start = Instant::now();
    let grid = Grid {
        n: vec![8],
        seeds: 16,
        ..Grid::default()
    };
    let weak = harness::verify_prop21(&grid).unwrap();
    let cut = harness::verify_prop31_and_cor34(&Grid { n: vec![8, 16], ..grid.clone() }).unwrap();
    let mut passed = true;
    let mut detail = Vec::new();
    for r in [&weak, &cut] {
        let skipped = r.cells.iter().filter(|c| c.reason.is_some()).count();
        passed &= skipped == 0;
        for a in &r.assertions {
            passed &= a.passed && a.checked > 0;
            detail.push(format!("{} {} {}", r.experiment, a.name, if a.passed { "ok" } else { "failed" }));
            if !a.passed {
                eprintln!("{} {}: {}", r.experiment, a.name, a.detail);
            }
        }
    }
    let elapsed = start.elapsed();
    passed &= elapsed <= Duration::from_secs(600);
    report(7, passed, elapsed, &detail.join("; "));
    assert!(passed);
}

#[test]
fn criterion_8_interval_machinery() {
    let start = Instant::now();
    let mut failures = Vec::new();

    for case in 0..50u64 {
        let n = 4 + case as usize % 20;
        let s = if case % 5 == 4 { 3 } else { 2 };
        let mut r = rng(9000 + case);
        let f = IntervalFunction::from_fn(n, |_| r.random_range(-1.0..=1.0)).unwrap();
        let m1 = default_modulus(n);
        let m2 = next_prime(3 * m1 as u64) as usize;
        let a = interval_norm(&f, s, m1).unwrap().value;
        let b = interval_norm(&f, s, m2).unwrap().value;
        if !rel_close(a, b, 1e-9) {
            failures.push(format!("N={n} s={s}: {a} at {m1} vs {b} at {m2}"));
        }
    }

    let override_opts = CutoffOptions { alpha: Some(0.125), widen: false };
    let mut profiles = 0;
    let mut transfers = 0;
    let mut worst_ratio = 0.0f64;
    for n in [16usize, 32, 64] {
        for eps in [1.0, 0.5] {
            match build_cutoff(n, 20.0, eps, 2, &CutoffOptions::default()) {
                Err(Error::TooSmall { .. }) => {}
                other => failures.push(format!("strict constants at N={n}: expected TooSmall, got {other:?}")),
            }
            let p = build_cutoff(n, 20.0, eps, 2, &override_opts).unwrap();
            profiles += 1;
            let (l, two_l) = (p.l as i64, 2 * p.big_l as i64);
            for x in -p.half_width()..=p.half_width() {
                let v = p.at(x);
                let want = if (1..=two_l).contains(&x) {
                    1.0
                } else if (-l + 1..1).contains(&x) {
                    (x + l - 1) as f64 / l as f64
                } else if (two_l + 1..=two_l + l).contains(&x) {
                    (two_l + l - x) as f64 / l as f64
                } else {
                    0.0
                };
                if !(0.0..=1.0).contains(&v) || (v - want).abs() > 1e-15 {
                    failures.push(format!("φ({x}) = {v}, expected {want} (N={n})"));
                }
            }
            match cutoff_fourier_bound(&p) {
                Ok((l1, bound)) if l1 <= bound => {}
                other => failures.push(format!("Fourier bound at N={n}: {other:?}")),
            }

            let modulus = find_modulus(n, 20.0, false).unwrap();
            let nu = generate_majorant(
                &MajorantSpec::new(MajorantKind::SparseSet { delta: 0.5 }, n as u64),
                &z(modulus),
            )
            .unwrap()
            .nu;
            let signs = {
                let mut r = rng(n as u64 + 11);
                (0..n).map(|_| if r.random::<bool>() { 1.0 } else { -1.0 }).collect::<Vec<f64>>()
            };
            // `from_fn` runs over 1..=N, which are also the codes of [N] in Z_N'.
            let f = IntervalFunction::from_fn(n, |k| nu.values()[k] * signs[k - 1]).unwrap();
            let opts = TransferOptions { cutoff: override_opts, ..Default::default() };
            match transfer_kvn(&f, &nu, 2, 20.0, eps, &opts) {
                Ok(t) => {
                    transfers += 1;
                    worst_ratio = worst_ratio.max(t.measured_residual / t.assembled_bound);
                    if t.identity_error > 1e-12 {
                        failures.push(format!("identity error {} at N={n}", t.identity_error));
                    }
                    if t.measured_residual > t.assembled_bound + 1e-9 {
                        failures.push(format!("residual above bound at N={n}"));
                    }
                }
                Err(e) => failures.push(format!("transfer at N={n}, ε={eps}: {e}")),
            }
        }
    }
    let elapsed = start.elapsed();
    let passed = failures.is_empty() && elapsed <= Duration::from_secs(600);
    report(
        8,
        passed,
        elapsed,
        &format!(
            "50 modulus pairs, {profiles} profiles, {transfers} transfers (max residual/bound {worst_ratio:.3}), {} failures",
            failures.len()
        ),
    );
    assert!(passed, "{failures:?}");
}

#[test]
fn criterion_9_reproducible_csv() {
    let start = Instant::now();
    let grid = Grid {
        n: vec![4, 8],
        seeds: 4,
        ..Grid::default()
    };
    let dir = tempfile::tempdir().unwrap();
    let mut identical = 0;
    for id in [ExperimentId::Prop21, ExperimentId::Prop23, ExperimentId::Prop31, ExperimentId::Appendix] {
        let paths: Vec<_> = (0..2)
            .map(|k| {
                let path = dir.path().join(format!("{id}-{k}.csv"));
                let r = id.run(&grid).unwrap();
                harness::emit_report(&r, ReportFormat::Csv, &path).unwrap();
                path
            })
            .collect();
        let a = std::fs::read(&paths[0]).unwrap();
        let b = std::fs::read(&paths[1]).unwrap();
        if a == b && !a.is_empty() {
            identical += 1;
        }
    }
    let default_a = report_to_csv(&harness::verify_prop21(&Grid::default()).unwrap()).unwrap();
    let default_b = report_to_csv(&harness::verify_prop21(&Grid::default()).unwrap()).unwrap();
    let elapsed = start.elapsed();
    let passed = identical == 4 && default_a == default_b;
    report(9, passed, elapsed, &format!("{identical}/4 experiments byte-identical, default prop21 grid identical: {}", default_a == default_b));
    assert!(passed);
}
