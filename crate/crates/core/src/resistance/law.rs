use super::profile::ResistanceProfile;
use crate::error::{Error, Result};

/// Transition law of the birth-and-death chain driven by a resistance
/// profile: from `k >= 2` the walk steps up with probability
/// `r(k-1) / (r(k-1) + r(k))` and down otherwise; from 1 it always steps to 2.
///
/// For explicit profiles the top state `cutoff + 1` is absorbing.
#[derive(Debug, Clone)]
pub struct ChainLaw {
    profile: ResistanceProfile,
    // up_cache[k] = up(k) for 1 <= k < up_cache.len()
    up_cache: Vec<f64>,
}

impl ChainLaw {
    pub fn new(profile: &ResistanceProfile) -> Self {
        Self::with_cached_levels(profile, 4096)
    }

    /// Precomputes `up(k)` for `k <= levels` so simulation avoids
    /// transcendental calls on the hot path.
    pub fn with_cached_levels(profile: &ResistanceProfile, levels: usize) -> Self {
        let top = match profile.max_state() {
            Some(s) => levels.min(s - 1),
            None => levels,
        };
        let mut up_cache = vec![0.0; top + 1];
        for (k, slot) in up_cache.iter_mut().enumerate().skip(1) {
            *slot = up_raw(profile, k);
        }
        Self { profile: profile.clone(), up_cache }
    }

    pub fn profile(&self) -> &ResistanceProfile {
        &self.profile
    }

    pub fn max_state(&self) -> Option<usize> {
        self.profile.max_state()
    }

    fn check_state(&self, k: usize) -> Result<()> {
        if k == 0 {
            return Err(Error::OutOfRange("states start at 1".into()));
        }
        if let Some(top) = self.max_state() {
            if k >= top {
                return Err(Error::OutOfRange(format!("state {k} is absorbing or beyond the top state {top}")));
            }
        }
        Ok(())
    }

    pub fn up(&self, k: usize) -> Result<f64> {
        self.check_state(k)?;
        Ok(self.up_unchecked(k))
    }

    pub fn down(&self, k: usize) -> Result<f64> {
        self.check_state(k)?;
        Ok(self.down_unchecked(k))
    }

    #[inline]
    pub(crate) fn up_unchecked(&self, k: usize) -> f64 {
        match self.up_cache.get(k) {
            Some(&p) => p,
            None => up_raw(&self.profile, k),
        }
    }

    #[inline]
    pub(crate) fn down_unchecked(&self, k: usize) -> f64 {
        if k == 1 {
            return 0.0;
        }
        let a = self.profile.r_unchecked(k - 1);
        let b = self.profile.r_unchecked(k);
        b / (a + b)
    }

    /// Whether a one-step transition `x -> y` has positive probability.
    pub fn transition_positive(&self, x: usize, y: usize) -> bool {
        if x == 0 || y == 0 || self.check_state(x).is_err() {
            return false;
        }
        if let Some(top) = self.max_state() {
            if y > top {
                return false;
            }
        }
        y == x + 1 || (x >= 2 && y + 1 == x)
    }
}

fn up_raw(profile: &ResistanceProfile, k: usize) -> f64 {
    if k == 1 {
        return 1.0;
    }
    let a = profile.r_unchecked(k - 1);
    let b = profile.r_unchecked(k);
    a / (a + b)
}
