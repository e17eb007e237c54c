//! Replicate tallies, estimate reports and chi-square tests.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};

/// Sum and sum of squares of integer observations. Merging is exact, so a
/// tally does not depend on how replicates were split or scheduled.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tally {
    pub n: u64,
    pub sum: u128,
    pub sum_sq: u128,
}

impl Tally {
    pub fn push(&mut self, x: u64) {
        self.n += 1;
        self.sum += x as u128;
        self.sum_sq += (x as u128) * (x as u128);
    }

    pub fn merge(self, other: Self) -> Self {
        Self { n: self.n + other.n, sum: self.sum + other.sum, sum_sq: self.sum_sq + other.sum_sq }
    }

    pub fn mean(&self) -> f64 {
        if self.n == 0 {
            return f64::NAN;
        }
        self.sum as f64 / self.n as f64
    }

    /// Sample standard deviation over `sqrt(n)`; `None` for fewer than two
    /// observations.
    pub fn standard_error(&self) -> Option<f64> {
        if self.n < 2 {
            return None;
        }
        let n = self.n as f64;
        // exact integer numerator: n * sum_sq - sum^2
        let num = self.n as u128 * self.sum_sq - self.sum * self.sum;
        let var = num as f64 / (n * (n - 1.0));
        Some((var / n).sqrt())
    }
}

impl FromIterator<u64> for Tally {
    fn from_iter<I: IntoIterator<Item = u64>>(iter: I) -> Self {
        let mut t = Tally::default();
        for x in iter {
            t.push(x);
        }
        t
    }
}

/// A Monte Carlo estimate with its standard error and, when an exact value
/// is known, the z-score against it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub name: String,
    pub estimate: f64,
    pub se: f64,
    pub reps: u64,
    pub seed: u64,
    pub target: Option<f64>,
    pub z: Option<f64>,
    /// Set when fewer than two replicates make the standard error
    /// undefined; `se` is then reported as 0.
    pub se_degenerate: bool,
}

impl EstimateReport {
    pub fn from_tally(name: impl Into<String>, tally: &Tally, seed: u64, target: Option<f64>) -> Self {
        let se = tally.standard_error();
        let estimate = tally.mean();
        let se_degenerate = se.is_none();
        let se = se.unwrap_or(0.0);
        Self {
            name: name.into(),
            estimate,
            se,
            reps: tally.n,
            seed,
            target,
            z: target.map(|t| z_score(estimate, t, se)),
            se_degenerate,
        }
    }

    /// `|z| <= limit`; false when there is no target.
    pub fn within(&self, limit: f64) -> bool {
        self.z.is_some_and(|z| z.abs() <= limit)
    }

    /// Normal-approximation interval `estimate ± z se`.
    pub fn interval(&self, z: f64) -> (f64, f64) {
        (self.estimate - z * self.se, self.estimate + z * self.se)
    }
}

fn z_score(estimate: f64, target: f64, se: f64) -> f64 {
    let diff = estimate - target;
    if se > 0.0 {
        diff / se
    } else if diff == 0.0 {
        0.0
    } else {
        diff.signum() * f64::INFINITY
    }
}

/// Pearson chi-square test outcome.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChiSquareTest {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

/// Minimum expected count per cell; smaller cells are pooled.
pub const MIN_EXPECTED: f64 = 5.0;

/// Goodness of fit of `observed` to cell probabilities `probs` (which must
/// sum to 1; put any leftover mass in a final cell). Cells with expected
/// count below [`MIN_EXPECTED`] are pooled into one.
pub fn chi_square_gof(observed: &[u64], probs: &[f64]) -> Result<ChiSquareTest> {
    if observed.len() != probs.len() {
        return Err(Error::InvalidArguments("observed and probability vectors differ in length".into()));
    }
    let total: u64 = observed.iter().sum();
    if total == 0 {
        return Err(Error::InsufficientData("no observations".into()));
    }
    let mass: f64 = probs.iter().sum();
    if (mass - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArguments(format!("cell probabilities sum to {mass}")));
    }
    let n = total as f64;
    let mut cells = Vec::new();
    let (mut pool_o, mut pool_e) = (0.0, 0.0);
    for (&o, &p) in observed.iter().zip(probs) {
        let e = p * n;
        if e < MIN_EXPECTED {
            pool_o += o as f64;
            pool_e += e;
        } else {
            cells.push((o as f64, e));
        }
    }
    if pool_e > 0.0 || pool_o > 0.0 {
        cells.push((pool_o, pool_e));
    }
    let statistic: f64 = cells
        .iter()
        .map(|&(o, e)| {
            if e > 0.0 {
                (o - e) * (o - e) / e
            } else if o > 0.0 {
                f64::INFINITY
            } else {
                0.0
            }
        })
        .sum();
    finish(statistic, cells.len().saturating_sub(1))
}

/// Two-sample homogeneity test on paired cell counts. Cells whose pooled
/// expected count is below [`MIN_EXPECTED`] in either sample are merged.
pub fn chi_square_homogeneity(a: &[u64], b: &[u64]) -> Result<ChiSquareTest> {
    if a.len() != b.len() {
        return Err(Error::InvalidArguments("samples have different numbers of cells".into()));
    }
    let (na, nb) = (a.iter().sum::<u64>() as f64, b.iter().sum::<u64>() as f64);
    if na == 0.0 || nb == 0.0 {
        return Err(Error::InsufficientData("empty sample".into()));
    }
    let frac_a = na / (na + nb);
    let mut cells = Vec::new();
    let (mut pool_a, mut pool_b) = (0u64, 0u64);
    for (&x, &y) in a.iter().zip(b) {
        let c = (x + y) as f64;
        if c * frac_a.min(1.0 - frac_a) < MIN_EXPECTED {
            pool_a += x;
            pool_b += y;
        } else {
            cells.push((x, y));
        }
    }
    if pool_a + pool_b > 0 {
        cells.push((pool_a, pool_b));
    }
    let mut statistic = 0.0;
    for &(x, y) in &cells {
        let c = (x + y) as f64;
        let (ea, eb) = (c * frac_a, c * (1.0 - frac_a));
        statistic += (x as f64 - ea).powi(2) / ea + (y as f64 - eb).powi(2) / eb;
    }
    finish(statistic, cells.len().saturating_sub(1))
}

fn finish(statistic: f64, dof: usize) -> Result<ChiSquareTest> {
    if dof == 0 {
        return Ok(ChiSquareTest { statistic, dof, p_value: 1.0 });
    }
    let dist = ChiSquared::new(dof as f64).map_err(|e| Error::NumericFailure(e.to_string()))?;
    Ok(ChiSquareTest { statistic, dof, p_value: dist.sf(statistic) })
}
