//! Shared knobs for witness searches (weak norm, cut norms, dual oracle).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SearchMode {
    /// Exact supremum over ±1-valued families.
    Exhaustive,
    /// Coordinate ascent from random ±1 starts; a certified lower bound.
    Alternating,
}

impl std::str::FromStr for SearchMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "exhaustive" => Ok(SearchMode::Exhaustive),
            "alternating" => Ok(SearchMode::Alternating),
            other => Err(format!("unknown search mode `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchOptions {
    pub restarts: usize,
    pub seed: u64,
    /// A sweep that improves the objective by less than this ends a restart.
    pub tolerance: f64,
    pub max_sweeps: usize,
}

impl Default for SearchOptions {
    fn default() -> Self {
        SearchOptions {
            restarts: 32,
            seed: 7,
            tolerance: 1e-12,
            max_sweeps: 1000,
        }
    }
}

impl SearchOptions {
    pub(crate) fn restart_rng(&self, restart: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(restart as u64);
        rng
    }

    fn covers(&self, bits: usize) -> bool {
        bits < 20 && (1usize << bits) <= self.restarts.max(1)
    }

    /// Number of restarts for a start made of `bits` signs.
    pub(crate) fn restart_count(&self, bits: usize) -> usize {
        if self.covers(bits) {
            1 << bits
        } else {
            self.restarts.max(1)
        }
    }

    /// Starting signs of one restart. Small start spaces are enumerated
    /// without replacement, larger ones sampled.
    pub(crate) fn restart_signs(&self, restart: usize, bits: usize) -> Vec<f64> {
        if self.covers(bits) {
            (0..bits)
                .map(|b| if (restart >> b) & 1 == 1 { -1.0 } else { 1.0 })
                .collect()
        } else {
            random_signs(&mut self.restart_rng(restart), bits)
        }
    }
}

/// Sign with ties broken toward +1.
#[inline]
pub(crate) fn sign(x: f64) -> f64 {
    if x < 0.0 {
        -1.0
    } else {
        1.0
    }
}

pub(crate) fn random_signs(rng: &mut impl Rng, len: usize) -> Vec<f64> {
    (0..len)
        .map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 })
        .collect()
}

/// Position of the bit that flips between Gray codes `k-1` and `k`.
#[inline]
pub(crate) fn gray_flip_bit(k: u64) -> u32 {
    k.trailing_zeros()
}

/// Outcome of one restart: the objective reached and the number of sweeps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchStats {
    pub evaluations: u64,
    pub sweeps: u64,
    /// True when some restart stopped because it hit `max_sweeps`.
    pub sweep_cap_hit: bool,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_start_spaces_are_enumerated() {
        let opts = SearchOptions::default();
        assert_eq!(opts.restart_count(3), 8);
        assert_eq!(opts.restart_count(5), 32);
        assert_eq!(opts.restart_count(6), 32);
        let mut seen: Vec<Vec<i8>> = (0..8)
            .map(|k| opts.restart_signs(k, 3).iter().map(|&v| v as i8).collect())
            .collect();
        seen.sort();
        seen.dedup();
        assert_eq!(seen.len(), 8);
        assert_eq!(opts.restart_signs(0, 40).len(), 40);
    }

    #[test]
    fn gray_sequence_visits_every_code_once() {
        let bits = 5;
        let mut code = 0u64;
        let mut seen = vec![false; 1 << bits];
        seen[0] = true;
        for k in 1..(1u64 << bits) {
            code ^= 1 << gray_flip_bit(k);
            assert!(!seen[code as usize]);
            seen[code as usize] = true;
        }
        assert!(seen.iter().all(|&s| s));
    }

    #[test]
    fn sign_ties_go_positive() {
        assert_eq!(sign(0.0), 1.0);
        assert_eq!(sign(-0.0), 1.0);
        assert_eq!(sign(-1e-300), -1.0);
    }

    #[test]
    fn restart_streams_are_reproducible_and_distinct() {
        let opts = SearchOptions::default();
        let a: Vec<f64> = random_signs(&mut opts.restart_rng(3), 16);
        let b: Vec<f64> = random_signs(&mut opts.restart_rng(3), 16);
        let c: Vec<f64> = random_signs(&mut opts.restart_rng(4), 16);
        assert_eq!(a, b);
        assert_ne!(a, c);
    }
}
