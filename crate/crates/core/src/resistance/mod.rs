//! Exact analytics for birth-and-death chains parameterized by edge
//! resistances: transition laws, gambler's-ruin hitting probabilities,
//! cutpoint probabilities and the dyadic-block quantities built from them.

mod law;
mod profile;
mod tails;

pub use law::ChainLaw;
pub use profile::{ProfileSpec, ResistanceProfile};
pub use tails::{Bounded, Enclosure, TailTable, DEFAULT_SUMMATION_CUTOFF};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sum::NeumaierSum;

/// Result of comparing `sum_{k=m}^{M} p_k` with `1 - t(M+1)/t(m)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DivergenceAudit {
    pub partial_sum: f64,
    pub lower_bound: f64,
    pub holds: bool,
}

/// Relative slack allowed when checking `partial_sum >= lower_bound`.
pub const DIVERGENCE_SLACK: f64 = 1e-9;

/// Levels `(2^m, 2^(m+1)]` of dyadic block `m`.
pub fn dyadic_block(m: u32) -> std::ops::RangeInclusive<usize> {
    (1usize << m) + 1..=1usize << (m + 1)
}

fn check_block(m: u32) -> Result<()> {
    if m == 0 || m > 40 {
        return Err(Error::InvalidArguments(format!("block index m = {m} must be in 1..=40")));
    }
    Ok(())
}

impl TailTable {
    /// Probability that the chain started at `k` reaches `n` before 1:
    /// `sum_{j<k} r(j) / sum_{j<n} r(j)`.
    pub fn hit_before(&self, k: usize, n: usize) -> Result<f64> {
        if k == 0 || k > n {
            return Err(Error::OutOfRange(format!("need 1 <= k <= n, got k = {k}, n = {n}")));
        }
        if k == n {
            return Ok(1.0);
        }
        let num = self.prefix(k)?;
        let den = self.prefix(n)?;
        Ok(num / den)
    }

    /// `p_k = r(k) / t(k)`, the probability that level `k` is a cutpoint.
    pub fn cutpoint_probability(&self, k: usize) -> Result<Bounded> {
        self.check_level(k)?;
        let r = self.r_slice()[k];
        let t = self.tails()[k];
        let h = self.tail_half_width(k);
        Ok(Bounded { value: r / t, abs_err: r * h / (t * (t - h)) })
    }

    /// `Q_k(j) = r(j) / (t(j) - t(k+1))`: the probability that a walk from
    /// `j+1` visits `k+1` before `j`, which is also the conditional
    /// probability that `j` is a cutpoint given that `k` is.
    pub fn conditional_cut_probability(&self, j: usize, k: usize) -> Result<Bounded> {
        if j == 0 || j >= k {
            return Err(Error::InvalidArguments(format!("need 1 <= j < k, got j = {j}, k = {k}")));
        }
        self.check_level(k)?;
        let r = self.r_slice()[j];
        let tails = self.tails();
        let d = tails[j] - tails[k + 1];
        let e = self.rounding_err(j) + self.rounding_err(k + 1);
        Ok(Bounded { value: r / d, abs_err: r * e / (d * (d - e)) })
    }

    /// `t(n) / t(k)`: the probability that a walk at `n` ever returns to `k`.
    pub fn return_probability(&self, n: usize, k: usize) -> Result<Bounded> {
        if k == 0 || k > n {
            return Err(Error::InvalidArguments(format!("need 1 <= k <= n, got k = {k}, n = {n}")));
        }
        if k == n {
            return Ok(Bounded { value: 1.0, abs_err: 0.0 });
        }
        let tn = self.tail(n)?;
        let tk = self.tail(k)?;
        let value = self.tails()[n] / self.tails()[k];
        let lo = tn.lo / tk.hi;
        let hi = tn.hi / tk.lo;
        Ok(Bounded { value, abs_err: (hi - value).max(value - lo) })
    }

    /// `b_m = min_{k in (2^m, 2^(m+1)]} sum_{i=1}^{2^(m-1)} Q_k(k - i)`.
    pub fn block_minimum_b(&self, m: u32) -> Result<f64> {
        check_block(m)?;
        let block = dyadic_block(m);
        self.check_level(*block.end())?;
        let window = 1usize << (m - 1);
        let r = self.r_slice();
        let t = self.tails();
        let b = block
            .into_par_iter()
            .map(|k| {
                let far = t[k + 1];
                let mut acc = NeumaierSum::new();
                for i in 1..=window {
                    let j = k - i;
                    acc.add(r[j] / (t[j] - far));
                }
                acc.value()
            })
            .reduce(|| f64::INFINITY, f64::min);
        Ok(b)
    }

    /// `sum_{j = 2^(m-1)+1}^{2^(m+1)} p_j`, the expected number of cutpoints
    /// in `(2^(m-1), 2^(m+1)]`.
    pub fn block_p_sum(&self, m: u32) -> Result<f64> {
        check_block(m)?;
        let hi = 1usize << (m + 1);
        self.check_level(hi)?;
        let lo = (1usize << (m - 1)) + 1;
        Ok(self.p_sum(lo, hi))
    }

    fn p_sum(&self, lo: usize, hi: usize) -> f64 {
        let r = &self.r_slice()[lo..=hi];
        let t = &self.tails()[lo..=hi];
        r.iter().zip(t).map(|(r, t)| r / t).collect::<NeumaierSum>().value()
    }

    /// Compares `sum_{k=m}^{M} p_k` with the lower bound `1 - t(M+1)/t(m)`
    /// that follows from `p_k >= r(k)/t(m)`.
    pub fn divergence_audit(&self, m: usize, big_m: usize) -> Result<DivergenceAudit> {
        if m == 0 || m > big_m {
            return Err(Error::InvalidArguments(format!("need 1 <= m <= M, got m = {m}, M = {big_m}")));
        }
        self.check_level(big_m)?;
        let partial_sum = self.p_sum(m, big_m);
        let lower_bound = 1.0 - self.tails()[big_m + 1] / self.tails()[m];
        let holds = partial_sum >= lower_bound - DIVERGENCE_SLACK * lower_bound.abs();
        Ok(DivergenceAudit { partial_sum, lower_bound, holds })
    }
}
