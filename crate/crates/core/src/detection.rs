//! Single-sample threshold detection on per-bit arrival increments, plus the
//! genie-aided threshold line search.

use crate::error::{McError, Result};

/// Validates a cumulative-count vector for L bits: length L+1, leading 0
/// (the prepended R(0)), nondecreasing.
fn check_counts(counts: &[u64], n_bits: usize) -> Result<()> {
    if counts.len() != n_bits + 1 {
        return Err(McError::Integrity(format!(
            "expected {} cumulative counts (R(0) plus one per bit), got {}",
            n_bits + 1,
            counts.len()
        )));
    }
    if counts[0] != 0 {
        return Err(McError::Integrity(format!(
            "counts must start at R(0) = 0, got {}",
            counts[0]
        )));
    }
    if counts.windows(2).any(|w| w[1] < w[0]) {
        return Err(McError::Integrity("cumulative counts must be nondecreasing".into()));
    }
    Ok(())
}

/// Threshold decisions: b̂_i = 1 iff D_i = R(t_i) − R(t_{i−1}) >= ξ.
/// `counts` has length L+1 with counts[0] = R(0) = 0.
pub fn detect(counts: &[u64], threshold: u64) -> Result<Vec<u8>> {
    if counts.len() < 2 {
        return Err(McError::EmptyInput("need at least one bit interval".into()));
    }
    check_counts(counts, counts.len() - 1)?;
    Ok(counts
        .windows(2)
        .map(|w| u8::from(w[1] - w[0] >= threshold))
        .collect())
}

/// Per-bit increment histograms split by the true bit; the sufficient
/// statistic for the threshold line search (and for pooling it across
/// sequences).
#[derive(Debug, Clone, Default)]
pub struct IncrementHistograms {
    /// h0[d] = number of 0-bit decisions whose increment was d.
    pub h0: Vec<u64>,
    /// h1[d] = number of 1-bit decisions whose increment was d.
    pub h1: Vec<u64>,
}

impl IncrementHistograms {
    pub fn from_realizations(true_bits: &[u8], realizations: &[Vec<u64>]) -> Result<IncrementHistograms> {
        if true_bits.is_empty() {
            return Err(McError::EmptyInput("true_bits is empty".into()));
        }
        if true_bits.iter().any(|&b| b > 1) {
            return Err(McError::Validation("bits must be 0 or 1".into()));
        }
        if realizations.is_empty() {
            return Err(McError::EmptyInput("need at least one realization".into()));
        }
        let l = true_bits.len();
        let mut hist = IncrementHistograms::default();
        for counts in realizations {
            check_counts(counts, l)?;
            for (i, w) in counts.windows(2).enumerate() {
                let d = (w[1] - w[0]) as usize;
                let h = if true_bits[i] == 1 { &mut hist.h1 } else { &mut hist.h0 };
                if h.len() <= d {
                    h.resize(d + 1, 0);
                }
                h[d] += 1;
            }
        }
        Ok(hist)
    }

    pub fn merge(&mut self, other: &IncrementHistograms) {
        if self.h0.len() < other.h0.len() {
            self.h0.resize(other.h0.len(), 0);
        }
        if self.h1.len() < other.h1.len() {
            self.h1.resize(other.h1.len(), 0);
        }
        for (a, b) in self.h0.iter_mut().zip(&other.h0) {
            *a += b;
        }
        for (a, b) in self.h1.iter_mut().zip(&other.h1) {
            *a += b;
        }
    }

    pub fn decisions(&self) -> u64 {
        self.h0.iter().sum::<u64>() + self.h1.iter().sum::<u64>()
    }

    /// Decision errors at threshold ξ: 1-bits with D < ξ plus 0-bits with D >= ξ.
    pub fn errors_at(&self, xi: u64) -> u64 {
        let miss: u64 = self.h1.iter().take(xi as usize).sum();
        let false_alarm: u64 = self.h0.iter().skip(xi as usize).sum();
        miss + false_alarm
    }

    /// The error-minimizing integer threshold over ξ ∈ [0, max increment + 1]
    /// and its error count; ties break toward the smallest ξ.
    pub fn best_threshold(&self) -> (u64, u64) {
        let max_inc = self.h0.len().max(self.h1.len()) as u64; // exclusive scan end
        let total0: u64 = self.h0.iter().sum();
        // ξ = 0 decides all ones: every true 0-bit errs.
        let mut best_xi = 0u64;
        let mut best_err = total0;
        let mut cum0 = 0u64;
        let mut cum1 = 0u64;
        for xi in 1..=max_inc {
            cum0 += self.h0.get((xi - 1) as usize).copied().unwrap_or(0);
            cum1 += self.h1.get((xi - 1) as usize).copied().unwrap_or(0);
            let err = cum1 + (total0 - cum0);
            if err < best_err {
                best_err = err;
                best_xi = xi;
            }
        }
        (best_xi, best_err)
    }
}

/// Exhaustive genie-aided line search over integer thresholds: returns the
/// ξ minimizing the mean bit-error fraction across realizations (ties toward
/// the smallest ξ) and that BER.
pub fn optimize_threshold(true_bits: &[u8], realizations: &[Vec<u64>]) -> Result<(u64, f64)> {
    let hist = IncrementHistograms::from_realizations(true_bits, realizations)?;
    let (xi, errs) = hist.best_threshold();
    Ok((xi, errs as f64 / hist.decisions() as f64))
}
