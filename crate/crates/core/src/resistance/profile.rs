use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How a [`ResistanceProfile`] should be built.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileSpec {
    /// `r(k) = 1 / (k (ln k)^beta)` for `k >= 2`, and `r(1) = r(2)`.
    Canonical { beta: f64 },
    /// `r(k) = values[k - 1]` for `1 <= k <= values.len()`.
    Explicit { values: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq)]
enum Kind {
    Canonical { beta: f64 },
    Explicit { values: Arc<[f64]> },
}

/// Edge resistances `r(k) > 0` of the edges `{k, k+1}` of a birth-and-death
/// chain on the positive integers.
///
/// An explicit profile with `c` values describes the finite network on
/// `{1, ..., c+1}`; state `c+1` plays the role of the point at infinity, so
/// "tail" quantities are finite sums ending at `r(c)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ResistanceProfile {
    kind: Kind,
}

impl ResistanceProfile {
    pub fn new(spec: ProfileSpec) -> Result<Self> {
        match spec {
            ProfileSpec::Canonical { beta } => Self::canonical(beta),
            ProfileSpec::Explicit { values } => Self::explicit(values),
        }
    }

    pub fn canonical(beta: f64) -> Result<Self> {
        if !(beta.is_finite() && beta > 0.0) {
            return Err(Error::InvalidProfile(format!("beta must be a positive finite number, got {beta}")));
        }
        Ok(Self { kind: Kind::Canonical { beta } })
    }

    pub fn explicit(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidProfile("explicit profile needs at least one resistance".into()));
        }
        if let Some((i, v)) = values.iter().enumerate().find(|(_, v)| !(v.is_finite() && **v > 0.0)) {
            return Err(Error::InvalidProfile(format!("resistance r({}) = {v} is not positive", i + 1)));
        }
        Ok(Self { kind: Kind::Explicit { values: values.into() } })
    }

    /// Explicit profile `r(k) = ratio^k`, `k = 1..=len`.
    pub fn geometric(ratio: f64, len: usize) -> Result<Self> {
        Self::explicit((1..=len).map(|k| ratio.powi(k as i32)).collect())
    }

    /// Explicit profile with `r(k) = 1`, `k = 1..=len`.
    pub fn uniform(len: usize) -> Result<Self> {
        Self::explicit(vec![1.0; len])
    }

    pub fn spec(&self) -> ProfileSpec {
        match &self.kind {
            Kind::Canonical { beta } => ProfileSpec::Canonical { beta: *beta },
            Kind::Explicit { values } => ProfileSpec::Explicit { values: values.to_vec() },
        }
    }

    pub fn is_canonical(&self) -> bool {
        matches!(self.kind, Kind::Canonical { .. })
    }

    pub fn beta(&self) -> Option<f64> {
        match self.kind {
            Kind::Canonical { beta } => Some(beta),
            Kind::Explicit { .. } => None,
        }
    }

    /// Largest index with a materialized value; `None` for canonical profiles.
    pub fn cutoff(&self) -> Option<usize> {
        match &self.kind {
            Kind::Canonical { .. } => None,
            Kind::Explicit { values } => Some(values.len()),
        }
    }

    /// Largest state of the chain, if the state space is finite.
    pub fn max_state(&self) -> Option<usize> {
        self.cutoff().map(|c| c + 1)
    }

    /// Whether `sum r(k)` converges. Explicit profiles are finite sums.
    pub fn is_transient(&self) -> bool {
        match self.kind {
            Kind::Canonical { beta } => beta > 1.0,
            Kind::Explicit { .. } => true,
        }
    }

    pub fn r(&self, k: usize) -> Result<f64> {
        if k == 0 {
            return Err(Error::OutOfRange("resistances are indexed from 1".into()));
        }
        match &self.kind {
            Kind::Canonical { beta } => Ok(canonical_r(*beta, k)),
            Kind::Explicit { values } => values
                .get(k - 1)
                .copied()
                .ok_or_else(|| Error::OutOfRange(format!("r({k}) beyond explicit cutoff {}", values.len()))),
        }
    }

    /// `r(k)` without range checks; `k` must be in `1..=cutoff`.
    #[inline]
    pub(crate) fn r_unchecked(&self, k: usize) -> f64 {
        match &self.kind {
            Kind::Canonical { beta } => canonical_r(*beta, k),
            Kind::Explicit { values } => values[k - 1],
        }
    }
}

#[inline]
pub(crate) fn canonical_r(beta: f64, k: usize) -> f64 {
    let k = k.max(2) as f64;
    1.0 / (k * k.ln().powf(beta))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_value_at_four() {
        let p = ResistanceProfile::canonical(2.0).unwrap();
        let expected = 1.0 / (4.0 * 4f64.ln().powi(2));
        assert!((p.r(4).unwrap() - expected).abs() < 1e-15);
        // 0.1300854..., which rounds to 0.13009 at five places
        assert!((p.r(4).unwrap() - 0.13009).abs() < 1e-5);
    }

    #[test]
    fn canonical_defining_identity() {
        let p = ResistanceProfile::canonical(2.5).unwrap();
        for k in [2usize, 3, 10, 1000, 1 << 20] {
            let kf = k as f64;
            let prod = p.r(k).unwrap() * kf * kf.ln().powf(2.5);
            assert!((prod - 1.0).abs() < 4.0 * f64::EPSILON, "k={k}: {prod}");
        }
        assert_eq!(p.r(1).unwrap(), p.r(2).unwrap());
    }

    #[test]
    fn explicit_lookup_and_cutoff() {
        let p = ResistanceProfile::explicit(vec![1.0, 2.0, 4.0, 8.0]).unwrap();
        assert_eq!(p.r(3).unwrap(), 4.0);
        assert_eq!(p.cutoff(), Some(4));
        assert!(matches!(p.r(5), Err(Error::OutOfRange(_))));
    }

    #[test]
    fn transience_flag() {
        assert!(!ResistanceProfile::canonical(0.5).unwrap().is_transient());
        assert!(!ResistanceProfile::canonical(1.0).unwrap().is_transient());
        assert!(ResistanceProfile::canonical(1.5).unwrap().is_transient());
    }

    #[test]
    fn rejects_bad_profiles() {
        assert!(matches!(ResistanceProfile::canonical(0.0), Err(Error::InvalidProfile(_))));
        assert!(matches!(ResistanceProfile::canonical(-1.0), Err(Error::InvalidProfile(_))));
        assert!(matches!(ResistanceProfile::explicit(vec![]), Err(Error::InvalidProfile(_))));
        assert!(matches!(ResistanceProfile::explicit(vec![1.0, 0.0]), Err(Error::InvalidProfile(_))));
        assert!(matches!(ResistanceProfile::explicit(vec![1.0, -2.0]), Err(Error::InvalidProfile(_))));
    }
}
