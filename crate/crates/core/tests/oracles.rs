//! Literal enumeration oracles, written straight from the definitions and
//! independent of the library's kernels.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use uninorm::boxnorms::{
    box_norm_ell, cut_norm, cut_objective, lift_to_tensor, DualFamily, TensorFunction,
};
use uninorm::decompose::{kvn_group, kvn_tensor, DenseModelOptions};
use uninorm::dualsearch::best_dual;
use uninorm::interval::{interval_norm, IntervalFunction};
use uninorm::pseudorandom::{certify, generate_majorant, MajorantKind, MajorantSpec};
use uninorm::search::{SearchMode, SearchOptions};
use uninorm::uniformity::{
    cube_marginal, gowers_norm, moment_estimate, weak_norm, weak_objective,
};
use uninorm::{Budget, Error, FiniteAbelianGroup, GroupFunction};

fn z(n: usize) -> FiniteAbelianGroup {
    FiniteAbelianGroup::cyclic(n).unwrap()
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_vec(len: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..len).map(|_| rng.random_range(-1.0..=1.0)).collect()
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}

/// Odometer over `digits` base `n`; false once it wraps.
fn step(digits: &mut [usize], n: usize) -> bool {
    for d in digits.iter_mut().rev() {
        *d += 1;
        if *d < n {
            return true;
        }
        *d = 0;
    }
    false
}

fn dot(omega: usize, h: &[usize]) -> usize {
    h.iter().enumerate().filter(|(i, _)| (omega >> i) & 1 == 1).map(|(_, &v)| v).sum()
}

/// `E_{x,h} ∏_ω f_ω(x + ω·h)` on `Z_n`, with `fs[ω]` for every `ω ∈ {0,1}^s`.
fn cube_average(fs: &[Vec<f64>], n: usize, s: usize) -> f64 {
    let mut total = 0.0;
    let mut xh = vec![0usize; s + 1];
    loop {
        let (x, h) = (xh[0], &xh[1..]);
        total += (0..1usize << s).map(|w| fs[w][(x + dot(w, h)) % n]).product::<f64>();
        if !step(&mut xh, n) {
            break;
        }
    }
    total / (n as f64).powi(s as i32 + 1)
}

fn gowers_oracle(f: &[f64], s: usize) -> f64 {
    let fs = vec![f.to_vec(); 1 << s];
    cube_average(&fs, f.len(), s).max(0.0).powf(1.0 / (1 << s) as f64)
}

fn box_oracle(t: &TensorFunction, ell: usize) -> f64 {
    let (n, s) = (t.vertex_count(), t.arity());
    let mut x = vec![0usize; s * ell];
    let mut total = 0.0;
    loop {
        let mut prod = 1.0;
        let mut j = vec![0usize; s];
        loop {
            let idx: Vec<usize> = (0..s).map(|i| x[i * ell + j[i]]).collect();
            prod *= t.get(&idx).unwrap();
            if !step(&mut j, ell) {
                break;
            }
        }
        total += prod;
        if !step(&mut x, n) {
            break;
        }
    }
    let avg = total / (n as f64).powi((s * ell) as i32);
    avg.max(0.0).powf(1.0 / (ell as f64).powi(s as i32))
}

/// Cut objective with the family given as `members[mask-1]` over all masks.
fn cut_objective_oracle(t: &TensorFunction, members: &[TensorFunction]) -> f64 {
    let (n, s) = (t.vertex_count(), t.arity());
    let mut yz = vec![0usize; 2 * s];
    let mut total = 0.0;
    loop {
        let (y, zz) = yz.split_at(s);
        let mut prod = t.get(y).unwrap();
        for (k, h) in members.iter().enumerate() {
            let mask = k + 1;
            let idx: Vec<usize> = (0..s).map(|i| if (mask >> i) & 1 == 1 { zz[i] } else { y[i] }).collect();
            prod *= h.get(&idx).unwrap();
        }
        total += prod;
        if !step(&mut yz, n) {
            break;
        }
    }
    total / (n as f64).powi(2 * s as i32)
}

fn signs_from(bits: u64, offset: usize, len: usize) -> Vec<f64> {
    (0..len).map(|i| if (bits >> (offset + i)) & 1 == 1 { -1.0 } else { 1.0 }).collect()
}

#[test]
fn gowers_matches_enumeration() {
    for (n, s) in [(5usize, 2usize), (6, 2), (7, 2), (4, 3), (5, 3), (3, 4)] {
        for seed in 0..5 {
            let v = random_vec(n, &mut rng(seed + 10 * n as u64));
            let f = GroupFunction::new(z(n), v.clone()).unwrap();
            let lib = gowers_norm(&f, s).unwrap().value;
            let oracle = gowers_oracle(&v, s);
            assert!(close(lib, oracle, 1e-10), "N={n} s={s}: {lib} vs {oracle}");
        }
    }
}

#[test]
fn box_norm_matches_enumeration() {
    for (n, s, ell) in [(3usize, 2usize, 2usize), (3, 2, 4), (2, 3, 2), (4, 2, 2), (2, 2, 6)] {
        for seed in 0..4 {
            let t = TensorFunction::new(n, s, random_vec(n.pow(s as u32), &mut rng(seed))).unwrap();
            let lib = box_norm_ell(&t, ell).unwrap().value;
            let oracle = box_oracle(&t, ell);
            assert!(close(lib, oracle, 1e-10), "|V|={n} s={s} ell={ell}: {lib} vs {oracle}");
        }
    }
    // indicator of {0} on a 3-vertex square, ell = 4
    let t = TensorFunction::from_fn(3, 2, |i| if i == [0, 0] { 1.0 } else { 0.0 }).unwrap();
    let oracle = box_oracle(&t, 4);
    assert!(close(box_norm_ell(&t, 4).unwrap().value, oracle, 1e-12));
    assert!(close(oracle, 1.0 / 3f64.sqrt(), 1e-12));
}

#[test]
fn lift_is_sum_of_coordinates() {
    let n = 5;
    let v = random_vec(n, &mut rng(3));
    let f = GroupFunction::new(z(n), v.clone()).unwrap();
    let t = lift_to_tensor(&f, 3, &Budget::default()).unwrap();
    let mut idx = vec![0usize; 3];
    loop {
        assert_eq!(t.get(&idx).unwrap(), v[idx.iter().sum::<usize>() % n]);
        if !step(&mut idx, n) {
            break;
        }
    }
}

#[test]
fn cut_objective_matches_enumeration_on_general_families() {
    let (n, s) = (3usize, 2usize);
    for seed in 0..10 {
        let mut r = rng(100 + seed);
        let t = TensorFunction::new(n, s, random_vec(n * n, &mut r)).unwrap();
        let members: Vec<TensorFunction> =
            (0..3).map(|_| TensorFunction::new(n, s, random_vec(n * n, &mut r)).unwrap()).collect();
        let family = DualFamily::new(s, members.clone()).unwrap();
        let lib = cut_objective(&t, &family).unwrap();
        assert!(close(lib, cut_objective_oracle(&t, &members), 1e-12));
    }
}

#[test]
fn cut_norm_matches_full_family_enumeration() {
    // |V| = 2, s = 2: three members of four entries each, 2^12 families.
    let (n, s) = (2usize, 2usize);
    for seed in 0..6 {
        let t = TensorFunction::new(n, s, random_vec(4, &mut rng(200 + seed))).unwrap();
        let mut best = f64::NEG_INFINITY;
        for bits in 0..1u64 << 12 {
            let members: Vec<TensorFunction> = (0..3)
                .map(|k| TensorFunction::new(n, s, signs_from(bits, 4 * k, 4)).unwrap())
                .collect();
            best = best.max(cut_objective_oracle(&t, &members));
        }
        let est = cut_norm(&t, SearchMode::Exhaustive, &SearchOptions::default(), &Budget::default()).unwrap();
        assert!(est.exact);
        assert!(close(est.lower_bound, best, 1e-12), "seed {seed}: {} vs {best}", est.lower_bound);
    }
}

fn weak_oracle(f: &[f64], s: usize) -> f64 {
    let n = f.len();
    let members = (1usize << s) - 1;
    let mut best = f64::NEG_INFINITY;
    for bits in 0..1u64 << (members * n) {
        let mut fs = vec![f.to_vec()];
        fs.extend((0..members).map(|k| signs_from(bits, k * n, n)));
        best = best.max(cube_average(&fs, n, s));
    }
    best
}

#[test]
fn weak_norm_matches_brute_force() {
    for (n, s) in [(3usize, 2usize), (4, 2), (2, 3)] {
        for seed in 0..3 {
            let v = random_vec(n, &mut rng(300 + seed + n as u64));
            let f = GroupFunction::new(z(n), v.clone()).unwrap();
            let est = weak_norm(&f, s, SearchMode::Exhaustive, &SearchOptions::default(), &Budget::default()).unwrap();
            let oracle = weak_oracle(&v, s);
            assert!(est.exact);
            assert!(close(est.lower_bound, oracle, 1e-12), "N={n} s={s}: {} vs {oracle}", est.lower_bound);
            let again = weak_objective(&f, &est.witness).unwrap();
            assert!(close(again, est.lower_bound, 1e-12));
        }
    }
}

#[test]
fn cube_marginal_matches_enumeration() {
    let (n, s) = (5usize, 2usize);
    let mut r = rng(11);
    let fs: Vec<Vec<f64>> = (0..3).map(|_| random_vec(n, &mut r)).collect();
    let funcs: Vec<GroupFunction> = fs.iter().map(|v| GroupFunction::new(z(n), v.clone()).unwrap()).collect();
    let lib = cube_marginal(&funcs).unwrap();
    for x in 0..n {
        let mut h = vec![0usize; s];
        let mut acc = 0.0;
        loop {
            acc += (1..4usize).map(|w| fs[w - 1][(x + dot(w, &h)) % n]).product::<f64>();
            if !step(&mut h, n) {
                break;
            }
        }
        assert!(close(lib.values()[x], acc / (n * n) as f64, 1e-12));
    }
}

#[test]
fn moment_estimate_matches_enumeration() {
    let g = z(8);
    let nu = generate_majorant(&MajorantSpec::new(MajorantKind::Perturbed { epsilon: 0.3 }, 5), &g)
        .unwrap()
        .nu;
    let v = nu.values().to_vec();
    let set = [0usize, 3, 5];
    for k in [1u32, 2] {
        let mut acc = 0.0;
        for &x in &set {
            let mut h = vec![0usize; 2];
            let mut m = 0.0;
            loop {
                m += (1..4usize).map(|w| v[(x + dot(w, &h)) % 8]).product::<f64>();
                if !step(&mut h, 8) {
                    break;
                }
            }
            acc += (m / 64.0).powi(k as i32);
        }
        let oracle = (acc / 8.0 - 3.0 / 8.0).abs();
        assert!(close(moment_estimate(&nu, 2, &set, k).unwrap(), oracle, 1e-12));
    }
}

#[test]
fn sparse_majorant_example() {
    let nu = generate_majorant(&MajorantSpec::new(MajorantKind::SparseSet { delta: 0.5 }, 7), &z(32))
        .unwrap();
    assert_eq!(nu.clip_count, 0);
    let support = nu.nu.values().iter().filter(|&&v| v > 0.0).count();
    assert_eq!(support, 16);
    assert!(nu.nu.values().iter().all(|&v| v == 0.0 || v == 2.0));
    assert!(close(nu.nu.average(), 1.0, 1e-15));
}

#[test]
fn certificate_matches_enumeration() {
    let nu = generate_majorant(&MajorantSpec::new(MajorantKind::SparseSet { delta: 0.5 }, 7), &z(8))
        .unwrap()
        .nu;
    let diff: Vec<f64> = nu.values().iter().map(|v| v - 1.0).collect();
    let cert = certify(&nu, 2, None, &Budget::default()).unwrap();
    assert!(close(cert.deviation("u2s_dev").unwrap(), gowers_oracle(&diff, 4), 1e-10));
    assert!(close(cert.deviation("us_dev").unwrap(), gowers_oracle(&diff, 2), 1e-10));

    let big = generate_majorant(&MajorantSpec::new(MajorantKind::SparseSet { delta: 0.5 }, 7), &z(16))
        .unwrap()
        .nu;
    let a = certify(&big, 2, None, &Budget::default()).unwrap();
    let b = certify(&big, 2, None, &Budget::default()).unwrap();
    assert_eq!(a.deviation("u2s_dev"), b.deviation("u2s_dev"));
}

#[test]
fn interval_norm_matches_enumeration() {
    let n = 8;
    let alt: Vec<f64> = (1..=n).map(|k| if k % 2 == 0 { 1.0 } else { -1.0 }).collect();
    let f = IntervalFunction::new(alt.clone()).unwrap();
    for n_prime in [17usize, 19] {
        let mut ext = vec![0.0; n_prime];
        let mut ind = vec![0.0; n_prime];
        for k in 1..=n {
            ext[k] = alt[k - 1];
            ind[k] = 1.0;
        }
        let oracle = gowers_oracle(&ext, 2) / gowers_oracle(&ind, 2);
        let lib = interval_norm(&f, 2, n_prime).unwrap().value;
        assert!(close(lib, oracle, 1e-10), "N'={n_prime}: {lib} vs {oracle}");
    }
    assert!(interval_norm(&f, 2, 16).is_err());
}

#[test]
fn kvn_group_example_is_certified_exhaustively() {
    let g = z(8);
    let nu = generate_majorant(&MajorantSpec::new(MajorantKind::SparseSet { delta: 0.5 }, 7), &g)
        .unwrap()
        .nu;
    let mut r = rng(7);
    let f = GroupFunction::from_fn(&g, |x| {
        let v = nu.values()[x];
        let b = if v > 0.0 { r.random_range(-1.0..=1.0) } else { 1.0 };
        v - 1.0 + b
    })
    .unwrap();
    let opts = DenseModelOptions { mode: Some(SearchMode::Exhaustive), ..Default::default() };
    let res = kvn_group(&f, &nu, 2, 0.05, &opts).unwrap();
    assert!(res.model.values().iter().all(|v| (-1.0..=1.0).contains(v)));
    let residual = f.sub(&res.model).unwrap();
    let (_, check) =
        best_dual(&residual, 2, SearchMode::Exhaustive, &SearchOptions::default(), &Budget::default()).unwrap();
    assert!(close(check, res.residual_cut, 1e-9));
    assert!(res.residual_cut <= 0.1, "residual cut {}", res.residual_cut);
}

#[test]
fn kvn_tensor_example_needs_a_dominating_majorant() {
    let (n, s) = (3usize, 2usize);
    let mut support = vec![0.0; n * n];
    for i in [0usize, 4, 5, 7] {
        support[i] = 1.0;
    }
    let delta = 4.0 / 9.0;
    let nu = TensorFunction::new(n, s, support.iter().map(|v| v / delta).collect()).unwrap();
    let f = nu.map(|v| v - 1.0).unwrap();
    let opts = DenseModelOptions { mode: Some(SearchMode::Exhaustive), ..Default::default() };
    // F = ν − 1 equals −1 off the support, where ν vanishes.
    assert!(matches!(kvn_tensor(&f, &nu, 0.05, &opts), Err(Error::PreconditionViolation(_))));

    let major = nu.map(|v| v + 1.0).unwrap();
    let res = kvn_tensor(&f, &major, 0.05, &opts).unwrap();
    assert!(res.residual_cut_exact);
    assert!(res.residual_cut <= 0.1, "residual cut {}", res.residual_cut);
    assert!(res.model.values().iter().all(|v| (-1.0..=1.0).contains(v)));
}

#[test]
fn weak_witness_is_a_cube_family() {
    let f = GroupFunction::new(z(4), vec![0.5, -0.25, 1.0, 0.0]).unwrap();
    let est = weak_norm(&f, 2, SearchMode::Exhaustive, &SearchOptions::default(), &Budget::default()).unwrap();
    assert_eq!(est.witness.members().len(), 3);
    assert!(est.witness.members().iter().all(|m| m.values().iter().all(|v| v.abs() == 1.0)));
}
