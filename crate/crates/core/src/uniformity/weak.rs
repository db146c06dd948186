//! The weak uniformity norm `w^s(Z)`: supremum of
//! `E_{x,h} f(x) ∏_{ω≠0} h_ω(x + ω·h)` over `[-1,1]`-valued families.
//!
//! The objective is affine in each `h_ω`, so ±1 families suffice and the
//! optimal last member is the sign of its marginal. For a member `ω*` that
//! marginal is the cube marginal of the re-indexed family `ν ↦ f_{ν⊕ω*}`
//! (with `f_0 = f`), obtained by substituting `x ↦ x + ω*·h` and negating the
//! coordinates of `h` inside `ω*`.

use serde::{Deserialize, Serialize};

use super::{advance, cube_offsets, marginal_values};
use crate::budget::Budget;
use crate::error::{Error, Result};
use crate::groups::{Adder, FiniteAbelianGroup, GroupFunction};
use crate::numeric::pairwise_sum;
use crate::search::{gray_flip_bit, sign, SearchMode, SearchOptions, SearchStats};

/// Best witness found by a weak or cut norm search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeakNormEstimate<W> {
    /// Objective value attained by `witness`.
    pub lower_bound: f64,
    pub witness: W,
    /// True iff produced by exhaustive ±1 search, so `lower_bound` is the supremum.
    pub exact: bool,
    pub stats: SearchStats,
}

/// A family `⟨h_ω : ω ∈ {0,1}^s∖{0^s}⟩`; `members[ω-1] = h_ω` in mask order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CubeFamily {
    arity: usize,
    members: Vec<GroupFunction>,
}

impl CubeFamily {
    pub fn new(arity: usize, members: Vec<GroupFunction>) -> Result<Self> {
        if arity < 1 || members.len() + 1 != 1 << arity {
            return Err(Error::input(format!(
                "a family of arity {arity} needs {} members, got {}",
                (1usize << arity).saturating_sub(1),
                members.len()
            )));
        }
        for m in &members[1..] {
            members[0].same_group(m)?;
        }
        if members.iter().any(|m| m.sup_norm() > 1.0) {
            return Err(Error::input("family members must take values in [-1, 1]"));
        }
        Ok(CubeFamily { arity, members })
    }

    /// The all-ones family.
    pub fn ones(group: &FiniteAbelianGroup, arity: usize) -> Result<Self> {
        let one = GroupFunction::constant(group, 1.0)?;
        CubeFamily::new(arity, vec![one; (1 << arity) - 1])
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn members(&self) -> &[GroupFunction] {
        &self.members
    }

    /// `h_ω` for the nonzero mask `omega`.
    pub fn member(&self, omega: usize) -> Option<&GroupFunction> {
        omega.checked_sub(1).and_then(|i| self.members.get(i))
    }
}

/// `E_{x,h} f(x) ∏_{ω≠0} h_ω(x + ω·h)`.
pub fn weak_objective(f: &GroupFunction, family: &CubeFamily) -> Result<f64> {
    f.same_group(&family.members[0])?;
    let mut fs = Vec::with_capacity(family.members.len() + 1);
    fs.push(f.clone());
    fs.extend(family.members.iter().cloned());
    super::cube_correlation(&fs)
}

/// Cube arithmetic on one group with the family stored densely:
/// `fs[0] = f`, `fs[ω] = h_ω`.
struct Cube {
    s: usize,
    n: usize,
    group: FiniteAbelianGroup,
    add: Adder,
    neg: Vec<usize>,
}

impl Cube {
    fn new(group: &FiniteAbelianGroup, s: usize) -> Self {
        Cube {
            s,
            n: group.order(),
            add: group.adder(),
            neg: group.elements().map(|a| group.neg_unchecked(a)).collect(),
            group: group.clone(),
        }
    }

    /// Marginal of member `star`: `y ↦ E_h ∏_{ν≠0} fs[ν⊕star](y + ν·h)`.
    fn marginal(&self, fs: &[Vec<f64>], star: usize) -> Vec<f64> {
        let refs: Vec<&[f64]> = (1..fs.len()).map(|v| fs[v ^ star].as_slice()).collect();
        marginal_values(&self.group, self.s, &refs)
    }

    /// Adds to `m` the change of the marginal of `star` when `fs[member][p]`
    /// moves by `delta`. Only the terms with `y + ν·h = p` (`ν = member⊕star`)
    /// change, so one coordinate of `h` is solved for.
    fn update(
        &self,
        fs: &[Vec<f64>],
        star: usize,
        member: usize,
        p: usize,
        delta: f64,
        m: &mut [f64],
    ) {
        let nu = member ^ star;
        debug_assert!(nu != 0);
        let i0 = nu.trailing_zeros() as usize;
        let weight = delta / (self.n as f64).powi(self.s as i32);
        let mut h = vec![0usize; self.s];
        let mut free = vec![0usize; self.s - 1];
        let mut offsets = vec![0usize; 1 << self.s];
        for (y, my) in m.iter_mut().enumerate() {
            let target = self.add.add(p, self.neg[y]);
            let mut acc = 0.0;
            free.iter_mut().for_each(|d| *d = 0);
            loop {
                let mut rest = target;
                let mut j = 0;
                for (i, hi) in h.iter_mut().enumerate() {
                    if i == i0 {
                        continue;
                    }
                    *hi = free[j];
                    j += 1;
                    if (nu >> i) & 1 == 1 {
                        rest = self.add.add(rest, self.neg[*hi]);
                    }
                }
                h[i0] = rest;
                cube_offsets(&self.add, &h, &mut offsets);
                let mut prod = 1.0;
                for v in 1..fs.len() {
                    if v != nu {
                        prod *= fs[v ^ star][self.add.add(y, offsets[v])];
                    }
                }
                acc += prod;
                if !advance(&mut free, self.n) {
                    break;
                }
            }
            *my += weight * acc;
        }
    }
}

fn abs_mean(m: &[f64]) -> f64 {
    m.iter().map(|v| v.abs()).sum::<f64>() / m.len() as f64
}

fn family_from(group: &FiniteAbelianGroup, s: usize, fs: &[Vec<f64>]) -> Result<CubeFamily> {
    let members = fs[1..]
        .iter()
        .map(|v| GroupFunction::new(group.clone(), v.clone()))
        .collect::<Result<Vec<_>>>()?;
    CubeFamily::new(s, members)
}

/// `‖f‖_{w^s(Z)}`: exact by exhaustive ±1 enumeration, or a lower bound by
/// alternating maximization with random restarts.
pub fn weak_norm(
    f: &GroupFunction,
    s: usize,
    mode: SearchMode,
    opts: &SearchOptions,
    budget: &Budget,
) -> Result<WeakNormEstimate<CubeFamily>> {
    super::check_order(s)?;
    match mode {
        SearchMode::Exhaustive => weak_exhaustive(f, s, budget),
        SearchMode::Alternating => weak_alternating(f, s, opts, budget),
    }
}

const RECOMPUTE_EVERY: u64 = 1024;

fn weak_exhaustive(
    f: &GroupFunction,
    s: usize,
    budget: &Budget,
) -> Result<WeakNormEstimate<CubeFamily>> {
    let group = f.group();
    let n = group.order();
    let members = (1usize << s) - 1;
    budget.check_bits("exhaustive weak norm", (n * members) as f64)?;
    let cube = Cube::new(group, s);
    let star = members;

    // The last member is solved analytically; the first entry of member 1 is
    // pinned to +1 since negating a whole member leaves E|M| unchanged.
    let free_bits = (members - 1) * n - 1;
    let mut fs: Vec<Vec<f64>> = vec![vec![1.0; n]; members + 1];
    fs[0] = f.values().to_vec();
    let mut m = cube.marginal(&fs, star);
    let mut best = abs_mean(&m);
    let mut best_code = 0u64;
    let mut evaluations = 1u64;
    for k in 1..(1u64 << free_bits) {
        let b = gray_flip_bit(k) as usize + 1;
        let member = 1 + b / n;
        let p = b % n;
        let delta = -2.0 * fs[member][p];
        if k % RECOMPUTE_EVERY == 0 {
            fs[member][p] = -fs[member][p];
            m = cube.marginal(&fs, star);
        } else {
            cube.update(&fs, star, member, p, delta, &mut m);
            fs[member][p] = -fs[member][p];
        }
        evaluations += 1;
        let value = abs_mean(&m);
        if value > best {
            best = value;
            best_code = k ^ (k >> 1);
        }
    }

    for (b, slot) in (1..=free_bits).map(|b| (b, (best_code >> (b - 1)) & 1)) {
        fs[1 + b / n][b % n] = if slot == 1 { -1.0 } else { 1.0 };
    }
    fs[1][0] = 1.0;
    let m = cube.marginal(&fs, star);
    fs[star] = m.iter().map(|&v| sign(v)).collect();
    let witness = family_from(group, s, &fs)?;
    Ok(WeakNormEstimate {
        lower_bound: weak_objective(f, &witness)?,
        witness,
        exact: true,
        stats: SearchStats {
            evaluations,
            sweeps: 0,
            sweep_cap_hit: false,
        },
    })
}

fn weak_alternating(
    f: &GroupFunction,
    s: usize,
    opts: &SearchOptions,
    budget: &Budget,
) -> Result<WeakNormEstimate<CubeFamily>> {
    let group = f.group();
    let n = group.order();
    let members = (1usize << s) - 1;
    budget.check_cost(
        "alternating weak norm sweep",
        crate::numeric::powf_usize(n, s + 1) * members as f64,
    )?;
    let cube = Cube::new(group, s);
    let mut best: Option<(f64, Vec<Vec<f64>>)> = None;
    let mut stats = SearchStats {
        evaluations: 0,
        sweeps: 0,
        sweep_cap_hit: false,
    };
    // Member 1 is updated first, so only the other members make up a start.
    let start_bits = (members - 1) * n;
    for restart in 0..opts.restart_count(start_bits) {
        let start = opts.restart_signs(restart, start_bits);
        let mut fs: Vec<Vec<f64>> = Vec::with_capacity(members + 1);
        fs.push(f.values().to_vec());
        fs.push(vec![1.0; n]);
        fs.extend(start.chunks(n).map(<[f64]>::to_vec));
        let mut previous = f64::NEG_INFINITY;
        let mut value = 0.0;
        let mut sweeps = 0;
        loop {
            for star in 1..=members {
                let m = cube.marginal(&fs, star);
                value = pairwise_sum(&m.iter().map(|v| v.abs()).collect::<Vec<_>>()) / n as f64;
                fs[star] = m.iter().map(|&v| sign(v)).collect();
                stats.evaluations += 1;
            }
            sweeps += 1;
            if value - previous < opts.tolerance {
                break;
            }
            if sweeps >= opts.max_sweeps {
                stats.sweep_cap_hit = true;
                break;
            }
            previous = value;
        }
        stats.sweeps += sweeps as u64;
        if best.as_ref().is_none_or(|(b, _)| value > *b) {
            best = Some((value, fs));
        }
    }
    let (_, fs) = best.expect("at least one restart");
    let witness = family_from(group, s, &fs)?;
    Ok(WeakNormEstimate {
        lower_bound: weak_objective(f, &witness)?,
        witness,
        exact: false,
        stats,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn z(n: usize) -> FiniteAbelianGroup {
        FiniteAbelianGroup::cyclic(n).unwrap()
    }

    /// Plain enumeration of every ±1 family, objective by literal cube sums.
    fn oracle_weak(f: &GroupFunction, s: usize) -> f64 {
        let g = f.group();
        let n = g.order();
        let members = (1usize << s) - 1;
        let bits = n * members;
        let mut best = f64::NEG_INFINITY;
        for code in 0u64..(1u64 << bits) {
            let h = |w: usize, x: usize| {
                if (code >> ((w - 1) * n + x)) & 1 == 1 {
                    -1.0
                } else {
                    1.0
                }
            };
            let mut total = 0.0;
            let mut idx = vec![0usize; s + 1];
            loop {
                let x = idx[0];
                let mut p = f.values()[x];
                for w in 1..=members {
                    let mut pt = x;
                    for i in 0..s {
                        if (w >> i) & 1 == 1 {
                            pt = g.add(pt, idx[1 + i]).unwrap();
                        }
                    }
                    p *= h(w, pt);
                }
                total += p;
                if !advance(&mut idx, n) {
                    break;
                }
            }
            best = best.max(total / (n as f64).powi(s as i32 + 1));
        }
        best
    }

    #[test]
    fn constant_one_and_zero() {
        let opts = SearchOptions::default();
        let b = Budget::default();
        let one = GroupFunction::constant(&z(4), 1.0).unwrap();
        for mode in [SearchMode::Exhaustive, SearchMode::Alternating] {
            let r = weak_norm(&one, 2, mode, &opts, &b).unwrap();
            assert!((r.lower_bound - 1.0).abs() < 1e-12);
            assert!(r
                .witness
                .members()
                .iter()
                .all(|m| m.values().iter().all(|&v| v == 1.0)));
            let zero = GroupFunction::zeros(&z(4));
            assert_eq!(weak_norm(&zero, 2, mode, &opts, &b).unwrap().lower_bound, 0.0);
        }
    }

    #[test]
    fn centered_point_mass_on_z4() {
        let f = GroupFunction::from_fn(&z(4), |x| if x == 0 { 0.75 } else { -0.25 }).unwrap();
        let want = oracle_weak(&f, 2);
        let exact = weak_norm(&f, 2, SearchMode::Exhaustive, &Default::default(), &Budget::default())
            .unwrap();
        assert!(exact.exact);
        assert!((exact.lower_bound - want).abs() < 1e-12);
        let alt = weak_norm(&f, 2, SearchMode::Alternating, &Default::default(), &Budget::default())
            .unwrap();
        assert!(!alt.exact);
        assert!((alt.lower_bound - want).abs() < 1e-12);
    }

    #[test]
    fn exhaustive_matches_oracle_on_random_functions() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for n in [2usize, 3, 4] {
            let f = GroupFunction::from_fn(&z(n), |_| rng.random_range(-1.0..1.0)).unwrap();
            let got = weak_norm(&f, 2, SearchMode::Exhaustive, &Default::default(), &Budget::default())
                .unwrap();
            assert!((got.lower_bound - oracle_weak(&f, 2)).abs() < 1e-12, "n = {n}");
        }
        let f = GroupFunction::from_fn(&z(2), |_| rng.random_range(-1.0..1.0)).unwrap();
        let got = weak_norm(&f, 3, SearchMode::Exhaustive, &Default::default(), &Budget::default())
            .unwrap();
        assert!((got.lower_bound - oracle_weak(&f, 3)).abs() < 1e-12);
    }

    #[test]
    fn incremental_updates_track_full_recompute() {
        let g = z(8);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let f = GroupFunction::from_fn(&g, |_| rng.random_range(-1.0..1.0)).unwrap();
        let exact = weak_norm(&f, 2, SearchMode::Exhaustive, &Default::default(), &Budget::default())
            .unwrap();
        let again = weak_objective(&f, &exact.witness).unwrap();
        assert!((exact.lower_bound - again).abs() < 1e-12);
        let alt = weak_norm(&f, 2, SearchMode::Alternating, &Default::default(), &Budget::default())
            .unwrap();
        assert!(alt.lower_bound <= exact.lower_bound + 1e-12);
    }

    #[test]
    fn exhaustive_gate_rejects_large_groups() {
        let f = GroupFunction::zeros(&z(9));
        let r = weak_norm(&f, 2, SearchMode::Exhaustive, &Default::default(), &Budget::default());
        assert!(matches!(r, Err(Error::BudgetExceeded { .. })));
    }

    #[test]
    fn family_validation() {
        let g = z(3);
        let big = GroupFunction::constant(&g, 2.0).unwrap();
        let one = GroupFunction::constant(&g, 1.0).unwrap();
        assert!(CubeFamily::new(2, vec![one.clone(), one.clone(), big]).is_err());
        assert!(CubeFamily::new(2, vec![one.clone(), one]).is_err());
    }
}
