use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Shared computation limits for every enumeration and exhaustive search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Budget {
    /// Maximum number of elementary multiply-adds for a single norm evaluation.
    pub max_cost: f64,
    /// Maximum number of free ±1 sign bits in an exhaustive witness search.
    pub max_sign_bits: u32,
}

impl Default for Budget {
    fn default() -> Self {
        Budget {
            max_cost: 1e9,
            max_sign_bits: 24,
        }
    }
}

impl Budget {
    pub fn unlimited() -> Self {
        Budget {
            max_cost: f64::INFINITY,
            max_sign_bits: u32::MAX,
        }
    }

    pub(crate) fn check_cost(&self, what: &'static str, required: f64) -> Result<()> {
        if required <= self.max_cost {
            Ok(())
        } else {
            Err(Error::BudgetExceeded {
                what,
                required,
                budget: self.max_cost,
            })
        }
    }

    pub(crate) fn check_bits(&self, what: &'static str, bits: f64) -> Result<()> {
        if bits <= f64::from(self.max_sign_bits) {
            Ok(())
        } else {
            Err(Error::BudgetExceeded {
                what,
                required: bits.exp2(),
                budget: f64::from(self.max_sign_bits).exp2(),
            })
        }
    }
}
