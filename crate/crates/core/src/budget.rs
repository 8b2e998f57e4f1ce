//! Caps on exhaustive enumeration.
//!
//! Every routine that walks all admissible words of some length asks a
//! [`Budget`] first, so oversized requests fail before anything is allocated.

use crate::error::{Error, Result};

/// Environment variable overriding the default word-count cap.
pub const BUDGET_ENV: &str = "ERGOPT_BUDGET";

/// Default cap on the number of enumerated words (2^25).
pub const DEFAULT_MAX_WORDS: u128 = 1 << 25;

/// Default cap on the total number of metric-table entries in the
/// adapted-metric recursion.
pub const DEFAULT_MAX_TABLE: u128 = 10_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Budget {
    pub max_words: u128,
    pub max_table: u128,
}

impl Default for Budget {
    fn default() -> Self {
        Budget { max_words: DEFAULT_MAX_WORDS, max_table: DEFAULT_MAX_TABLE }
    }
}

impl Budget {
    /// Default budget, with the word cap overridden by `ERGOPT_BUDGET` when set.
    pub fn from_env() -> Self {
        let mut b = Budget::default();
        if let Some(v) = std::env::var(BUDGET_ENV).ok().and_then(|s| s.trim().parse::<u128>().ok()) {
            b.max_words = v;
            b.max_table = b.max_table.max(v);
        }
        b
    }

    pub fn unlimited() -> Self {
        Budget { max_words: u128::MAX, max_table: u128::MAX }
    }

    pub fn check_words(&self, requested: u128) -> Result<()> {
        if requested > self.max_words {
            return Err(Error::Budget { requested, limit: self.max_words });
        }
        Ok(())
    }

    pub fn check_table(&self, requested: u128) -> Result<()> {
        if requested > self.max_table {
            return Err(Error::Budget { requested, limit: self.max_table });
        }
        Ok(())
    }
}
