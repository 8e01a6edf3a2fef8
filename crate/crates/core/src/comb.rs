//! Lexicographic combination unranking.
//!
//! Workers compute their conditioning sets directly from a rank `t`, so the
//! full enumeration of `C(n, l)` subsets never has to be materialised. The
//! unranking walks the rank identity
//!
//! ```text
//! t = sum_{c=0}^{l-1} sum_{k=O[c-1]+1}^{O[c]-1} C(n - k, l - (c + 1)),   O[-1] = 0
//! ```
//!
//! one element at a time: element `c` is advanced while the running sum stays
//! at or below `t`, and the last overshooting term is taken back.

use std::sync::OnceLock;

use thiserror::Error;

/// Largest `n` covered by the precomputed binomial table.
pub const TABLE_MAX: usize = 64;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CombError {
    #[error("binomial coefficient C({n}, {k}) overflows u64")]
    Overflow { n: usize, k: usize },
    #[error("rank {t} out of range for C({n}, {ell}) = {total}")]
    RankOutOfRange { n: usize, ell: usize, t: u64, total: u64 },
    #[error("invalid subset size {ell} for universe of {n}")]
    InvalidSize { n: usize, ell: usize },
    #[error("excluded position {p} outside row of length {len}")]
    ExcludedOutOfRange { p: usize, len: usize },
}

fn table() -> &'static [[u64; TABLE_MAX + 1]; TABLE_MAX + 1] {
    static TABLE: OnceLock<[[u64; TABLE_MAX + 1]; TABLE_MAX + 1]> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut t = [[0u64; TABLE_MAX + 1]; TABLE_MAX + 1];
        for n in 0..=TABLE_MAX {
            t[n][0] = 1;
            for k in 1..=n {
                // C(64, k) <= C(64, 32) < 2^63, so plain addition cannot overflow.
                t[n][k] = t[n - 1][k - 1] + if k < n { t[n - 1][k] } else { 0 };
            }
        }
        t
    })
}

/// Exact binomial coefficient. Returns 0 when `k > n`.
///
/// Uses the shared Pascal table for `n <= 64` and an overflow-checked
/// multiplicative product above that, since rows of the compacted adjacency
/// can be much longer than 64 at low levels.
pub fn binomial(n: usize, k: usize) -> Result<u64, CombError> {
    if k > n {
        return Ok(0);
    }
    if n <= TABLE_MAX {
        return Ok(table()[n][k]);
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // acc * (n - i) / (i + 1) stays integral at every step.
        acc = acc * (n - i) as u128 / (i + 1) as u128;
        if acc > u64::MAX as u128 {
            return Err(CombError::Overflow { n, k });
        }
    }
    Ok(acc as u64)
}

fn check_rank(n: usize, ell: usize, t: u64) -> Result<(), CombError> {
    if ell == 0 || ell > n {
        return Err(CombError::InvalidSize { n, ell });
    }
    let total = binomial(n, ell)?;
    if t >= total {
        return Err(CombError::RankOutOfRange { n, ell, t, total });
    }
    Ok(())
}

/// The `t`-th `ell`-combination of `{1..=n}` in lexicographic order,
/// 1-based and strictly ascending.
pub fn unrank(n: usize, ell: usize, t: u64) -> Result<Vec<usize>, CombError> {
    check_rank(n, ell, t)?;
    let mut out = vec![0usize; ell];
    unrank_into(n, ell, t, &mut out)?;
    Ok(out)
}

/// Allocation-free variant of [`unrank`]; `out.len()` must equal `ell` and the
/// rank must already be known to be in range.
pub(crate) fn unrank_into(n: usize, ell: usize, t: u64, out: &mut [usize]) -> Result<(), CombError> {
    debug_assert_eq!(out.len(), ell);
    let mut sum: u64 = 0;
    let mut prev = 0usize;
    for c in 0..ell {
        let mut cur = prev;
        let mut term;
        loop {
            cur += 1;
            term = binomial(n - cur, ell - (c + 1))?;
            sum += term;
            if sum > t {
                break;
            }
        }
        sum -= term;
        out[c] = cur;
        prev = cur;
    }
    Ok(())
}

/// [`unrank`] shifted to 0-based positions into a compacted row of length `n_row`.
pub fn unrank_for_set_shared(n_row: usize, ell: usize, t: u64) -> Result<Vec<usize>, CombError> {
    let mut out = unrank(n_row, ell, t)?;
    for v in &mut out {
        *v -= 1;
    }
    Ok(out)
}

/// 0-based positions of the `t`-th `ell`-subset of a row of length
/// `n_row_minus_one + 1` that avoids position `p`.
pub fn unrank_excluding(n_row_minus_one: usize, ell: usize, t: u64, p: usize) -> Result<Vec<usize>, CombError> {
    if p > n_row_minus_one {
        return Err(CombError::ExcludedOutOfRange { p, len: n_row_minus_one + 1 });
    }
    let mut out = unrank_for_set_shared(n_row_minus_one, ell, t)?;
    for v in &mut out {
        if *v >= p {
            *v += 1;
        }
    }
    Ok(out)
}

/// Fills `out` with 0-based positions, skipping position `p` when given.
/// Hot-path helper for the skeleton strategies; the caller guarantees
/// `t < C(n, out.len())`.
pub(crate) fn positions_into(n: usize, t: u64, skip: Option<usize>, out: &mut [usize]) -> Result<(), CombError> {
    let ell = out.len();
    unrank_into(n, ell, t, out)?;
    for v in out.iter_mut() {
        *v -= 1;
        if let Some(p) = skip {
            if *v >= p {
                *v += 1;
            }
        }
    }
    Ok(())
}

/// Evaluates the rank identity for a 1-based ascending combination,
/// recovering its lexicographic rank.
pub fn rank(n: usize, combination: &[usize]) -> Result<u64, CombError> {
    let ell = combination.len();
    let mut t = 0u64;
    let mut prev = 0usize;
    for (c, &cur) in combination.iter().enumerate() {
        for k in prev + 1..cur {
            t += binomial(n - k, ell - (c + 1))?;
        }
        prev = cur;
    }
    Ok(t)
}
