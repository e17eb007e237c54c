use serde::{Deserialize, Serialize};

use super::profile::ResistanceProfile;
use crate::error::{Error, Result};
use crate::sum::NeumaierSum;

/// Default number of terms summed directly before the integral bracket
/// takes over for canonical profiles.
pub const DEFAULT_SUMMATION_CUTOFF: usize = 10_000_000;

/// Relative bound on the rounding error of a stored tail midpoint: term
/// evaluation (a few ulps each) plus compensated accumulation.
const ROUNDING_REL: f64 = 16.0 * f64::EPSILON;

/// A closed interval `[lo, hi]` that contains a tail sum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Enclosure {
    pub lo: f64,
    pub hi: f64,
}

impl Enclosure {
    pub fn mid(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn half_width(&self) -> f64 {
        0.5 * (self.hi - self.lo)
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }
}

/// A midpoint value together with a worst-case absolute error bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounded {
    pub value: f64,
    pub abs_err: f64,
}

/// Prefix sums and certified tail sums `t(k) = sum_{j >= k} r(j)` of a
/// profile, for `1 <= k <= k_max + 1`.
///
/// Tails are accumulated backwards (smallest terms first) with compensated
/// summation up to `summation_cutoff`. For canonical profiles the remainder
/// `sum_{j > M} r(j)` is bracketed by
/// `int_{M+1}^inf f <= remainder <= int_M^inf f`, `f(x) = 1/(x (ln x)^beta)`,
/// with the closed form `(ln x)^(1-beta) / (beta-1)`.
#[derive(Debug, Clone)]
pub struct TailTable {
    profile: ResistanceProfile,
    k_max: usize,
    summation_cutoff: usize,
    r: Vec<f64>,
    prefix: Vec<f64>,
    tail_mid: Vec<f64>,
    remainder_half_width: f64,
}

impl TailTable {
    /// Builds a table using the default summation cutoff.
    pub fn new(profile: &ResistanceProfile, k_max: usize) -> Result<Self> {
        Self::with_cutoff(profile, k_max, DEFAULT_SUMMATION_CUTOFF)
    }

    /// Builds a table; for canonical profiles the cutoff is raised to at
    /// least `k_max + 1`. Explicit profiles always sum to their own cutoff.
    pub fn with_cutoff(profile: &ResistanceProfile, k_max: usize, summation_cutoff: usize) -> Result<Self> {
        if k_max == 0 {
            return Err(Error::InvalidArguments("k_max must be at least 1".into()));
        }
        match profile.cutoff() {
            Some(c) => {
                if k_max > c {
                    return Err(Error::OutOfRange(format!("k_max {k_max} exceeds explicit cutoff {c}")));
                }
                Ok(Self::build(profile, k_max, c, 0.0, 0.0))
            }
            None => {
                let beta = profile.beta().expect("canonical profile");
                if !profile.is_transient() {
                    return Err(Error::DivergentTail(format!(
                        "sum of 1/(k (ln k)^beta) diverges for beta = {beta} <= 1"
                    )));
                }
                let m = summation_cutoff.max(k_max + 1).max(2);
                let integral_from = |x: f64| x.ln().powf(1.0 - beta) / (beta - 1.0);
                let rem_lo = integral_from((m + 1) as f64);
                let rem_hi = integral_from(m as f64);
                Ok(Self::build(profile, k_max, m, rem_lo, rem_hi))
            }
        }
    }

    fn build(profile: &ResistanceProfile, k_max: usize, cutoff: usize, rem_lo: f64, rem_hi: f64) -> Self {
        let len = k_max + 2;
        let mut r = vec![0.0; len];
        for (k, slot) in r.iter_mut().enumerate().skip(1) {
            if k <= cutoff {
                *slot = profile.r_unchecked(k);
            }
        }

        let mut prefix = vec![0.0; len];
        let mut acc = NeumaierSum::new();
        for k in 1..len {
            prefix[k] = acc.value();
            acc.add(r[k]);
        }

        let mut tail = vec![0.0; len];
        let mut acc = NeumaierSum::new();
        for j in (1..=cutoff).rev() {
            let rj = if j < len { r[j] } else { profile.r_unchecked(j) };
            acc.add(rj);
            if j < len {
                tail[j] = acc.value();
            }
        }
        if cutoff + 1 < len {
            tail[cutoff + 1] = 0.0;
        }
        let rem_mid = 0.5 * (rem_lo + rem_hi);
        for t in tail.iter_mut().skip(1) {
            *t += rem_mid;
        }

        Self {
            profile: profile.clone(),
            k_max,
            summation_cutoff: cutoff,
            r,
            prefix,
            tail_mid: tail,
            remainder_half_width: 0.5 * (rem_hi - rem_lo),
        }
    }

    pub fn profile(&self) -> &ResistanceProfile {
        &self.profile
    }

    /// Largest `k` for which `r(k)`, `t(k)` and `t(k+1)` are all available.
    pub fn k_max(&self) -> usize {
        self.k_max
    }

    pub fn summation_cutoff(&self) -> usize {
        self.summation_cutoff
    }

    fn check_tail_index(&self, k: usize) -> Result<()> {
        if k == 0 || k > self.k_max + 1 {
            return Err(Error::OutOfRange(format!("tail index {k} outside 1..={}", self.k_max + 1)));
        }
        Ok(())
    }

    pub(crate) fn check_level(&self, k: usize) -> Result<()> {
        if k == 0 || k > self.k_max {
            return Err(Error::OutOfRange(format!("level {k} outside 1..={}", self.k_max)));
        }
        Ok(())
    }

    pub fn r(&self, k: usize) -> Result<f64> {
        self.check_level(k)?;
        Ok(self.r[k])
    }

    /// `sum_{j < k} r(j)` for `1 <= k <= k_max + 1`.
    pub fn prefix(&self, k: usize) -> Result<f64> {
        self.check_tail_index(k)?;
        Ok(self.prefix[k])
    }

    pub fn tail(&self, k: usize) -> Result<Enclosure> {
        self.check_tail_index(k)?;
        let mid = self.tail_mid[k];
        let half = self.tail_half_width(k);
        Ok(Enclosure { lo: mid - half, hi: mid + half })
    }

    pub fn tail_mid(&self, k: usize) -> Result<f64> {
        self.check_tail_index(k)?;
        Ok(self.tail_mid[k])
    }

    #[inline]
    pub(crate) fn tail_half_width(&self, k: usize) -> f64 {
        self.remainder_half_width + self.rounding_err(k)
    }

    /// Rounding error of the stored midpoint of `t(k)`; excludes the
    /// remainder bracket, which cancels in differences of tails.
    #[inline]
    pub(crate) fn rounding_err(&self, k: usize) -> f64 {
        ROUNDING_REL * self.tail_mid[k]
    }

    #[inline]
    pub(crate) fn r_slice(&self) -> &[f64] {
        &self.r
    }

    /// Tail midpoints indexed by level; entry 0 is unused.
    #[inline]
    pub(crate) fn tails(&self) -> &[f64] {
        &self.tail_mid
    }
}
