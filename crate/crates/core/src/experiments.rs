//! Seeded Monte Carlo estimators checked against the exact formulas.
//!
//! Replicate `i` always draws from stream `i` of the master seed, and
//! per-replicate results are integer tallies merged exactly, so every
//! reported number is independent of the thread count.

use std::ops::Range;

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::resistance::{dyadic_block, ChainLaw, TailTable};
use crate::rng::{derive_seed, StreamKey};
use crate::stats::{EstimateReport, Tally};
use crate::trajectory::{
    exact_cutpoint_pattern, ladder_cutpoint_pattern, step, CutpointReport, ExactPatternOptions, State,
};

/// Default largest `K` a block census may request.
pub const DEFAULT_K_LIMIT: usize = 1 << 22;

/// Half-width, in standard errors, of the inequality audit's tolerance.
pub const AUDIT_Z: f64 = 4.0;

/// Below this many replicates the inequality audit is inconclusive.
pub const AUDIT_MIN_REPS: u64 = 100;

/// Allowed increase of `a_m` over `a_(m-1)`, in combined standard errors,
/// before the summability table flags a trend violation.
pub const TREND_Z: f64 = 2.0;

/// How cutpoint patterns of the infinite walk are sampled.
#[derive(Debug, Clone, Copy, Default)]
pub enum Sampler {
    /// Independent excursion minima, `O(K log K)` per sample.
    #[default]
    Ladder,
    /// Step-by-step regeneration sampler.
    StepLevel(ExactPatternOptions),
}

#[derive(Debug, Clone, Copy)]
pub struct ExperimentOptions {
    /// Worker threads; `None` uses the global pool. Never affects results.
    pub threads: Option<usize>,
    pub sampler: Sampler,
    pub k_limit: usize,
}

impl Default for ExperimentOptions {
    fn default() -> Self {
        Self { threads: None, sampler: Sampler::Ladder, k_limit: DEFAULT_K_LIMIT }
    }
}

/// Per-replicate results that combine associatively.
pub trait Merge: Send + Sized {
    fn identity() -> Self;
    fn merge(self, other: Self) -> Self;
}

impl Merge for Tally {
    fn identity() -> Self {
        Tally::default()
    }

    fn merge(self, other: Self) -> Self {
        Tally::merge(self, other)
    }
}

impl Merge for Vec<Tally> {
    fn identity() -> Self {
        Vec::new()
    }

    fn merge(self, other: Self) -> Self {
        if self.is_empty() {
            return other;
        }
        if other.is_empty() {
            return self;
        }
        self.into_iter().zip(other).map(|(a, b)| a.merge(b)).collect()
    }
}

/// Runs `f` on `threads` workers (or the global pool).
pub fn with_threads<R: Send>(threads: Option<usize>, f: impl FnOnce() -> R + Send) -> Result<R> {
    match threads {
        None => Ok(f()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::InvalidArguments(format!("thread pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

/// Evaluates replicates `range` of `seed` in parallel and merges them.
pub fn run_replicates<T, F>(seed: u64, range: Range<u64>, threads: Option<usize>, f: F) -> Result<T>
where
    T: Merge,
    F: Fn(StreamKey) -> Result<T> + Sync + Send,
{
    with_threads(threads, || {
        range.into_par_iter().map(|i| f(StreamKey::new(seed, i))).try_reduce(T::identity, |a, b| Ok(a.merge(b)))
    })?
}

fn check_reps(reps: u64) -> Result<()> {
    if reps == 0 {
        return Err(Error::InvalidArguments("reps must be at least 1".into()));
    }
    Ok(())
}

fn top_state(law: &ChainLaw) -> Option<State> {
    law.max_state().map(|s| s as State)
}

/// One escape trial: from `k + 1`, does the walk avoid `k` forever?
///
/// Walks until it hits `k` or `N = 4k` (capped at the top state), then
/// decides the return from `N` by a Bernoulli draw with probability
/// `t(N)/t(k)`.
pub fn escape_trial(law: &ChainLaw, table: &TailTable, k: usize, key: StreamKey) -> Result<bool> {
    let mut n = 4 * k;
    if let Some(top) = law.max_state() {
        n = n.min(top);
    }
    if n <= k {
        return Err(Error::OutOfRange(format!("level {k} has no room above it")));
    }
    let back = table.return_probability(n, k)?.value;
    let mut rng = key.rng();
    let (k, n) = (k as State, n as State);
    let mut x = k + 1;
    while x != k && x != n {
        x = step(law, x, &mut rng);
    }
    if x == k {
        return Ok(false);
    }
    Ok(rng.random::<f64>() >= back)
}

/// Estimates the probability that a walk from `k + 1` never returns to
/// `k`; the target is `p_k`.
pub fn mc_escape(
    law: &ChainLaw,
    table: &TailTable,
    k: usize,
    reps: u64,
    seed: u64,
    threads: Option<usize>,
) -> Result<EstimateReport> {
    check_reps(reps)?;
    let target = table.cutpoint_probability(k)?.value;
    let tally =
        run_replicates(seed, 0..reps, threads, |key| Ok(Tally::from_iter([escape_trial(law, table, k, key)? as u64])))?;
    Ok(EstimateReport::from_tally(format!("escape k={k}"), &tally, seed, Some(target)))
}

/// Whether a walk from `start` reaches `hi` before `lo`.
fn reaches_first(law: &ChainLaw, start: State, lo: State, hi: State, key: StreamKey) -> bool {
    let mut rng = key.rng();
    let mut x = start;
    while x != lo && x != hi {
        x = step(law, x, &mut rng);
    }
    x == hi
}

/// Estimates the frequency with which a walk from `j + 1` visits `k + 1`
/// before `j`; the target is `Q_k(j)`.
pub fn mc_conditional(
    law: &ChainLaw,
    table: &TailTable,
    j: usize,
    k: usize,
    reps: u64,
    seed: u64,
    threads: Option<usize>,
) -> Result<EstimateReport> {
    check_reps(reps)?;
    let target = table.conditional_cut_probability(j, k)?.value;
    if top_state(law).is_some_and(|top| k as State + 1 > top) {
        return Err(Error::OutOfRange(format!("level {} is beyond the state space", k + 1)));
    }
    let (lo, hi) = (j as State, k as State + 1);
    let tally = run_replicates(seed, 0..reps, threads, |key| {
        Ok(Tally::from_iter([reaches_first(law, lo + 1, lo, hi, key) as u64]))
    })?;
    Ok(EstimateReport::from_tally(format!("conditional j={j} k={k}"), &tally, seed, Some(target)))
}

/// Estimates the probability that a walk from `k` reaches `n` before 1.
pub fn mc_hit_before(
    law: &ChainLaw,
    table: &TailTable,
    k: usize,
    n: usize,
    reps: u64,
    seed: u64,
    threads: Option<usize>,
) -> Result<EstimateReport> {
    check_reps(reps)?;
    let target = table.hit_before(k, n)?;
    if top_state(law).is_some_and(|top| n as State > top) {
        return Err(Error::OutOfRange(format!("level {n} is beyond the state space")));
    }
    let tally = run_replicates(seed, 0..reps, threads, |key| {
        Ok(Tally::from_iter([reaches_first(law, k as State, 1, n as State, key) as u64]))
    })?;
    Ok(EstimateReport::from_tally(format!("hit_before k={k} n={n}"), &tally, seed, Some(target)))
}

/// Draws one cutpoint pattern on `1..=k_max` with the chosen sampler.
pub fn sample_pattern(
    law: &ChainLaw,
    table: &TailTable,
    k_max: usize,
    key: StreamKey,
    sampler: Sampler,
) -> Result<CutpointReport> {
    match sampler {
        Sampler::Ladder => ladder_cutpoint_pattern(table, k_max, &mut key.rng()),
        Sampler::StepLevel(opts) => {
            let report = exact_cutpoint_pattern(law, table, k_max, key, opts)?;
            if report.truncated {
                return Err(Error::NumericFailure(format!("pattern sample {key:?} hit the step cap")));
            }
            Ok(report)
        }
    }
}

/// Marginal and conditional cutpoint frequencies from one batch of
/// patterns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternCensus {
    pub k_max: usize,
    /// `P[k cut]` for each requested level, with target `p_k`.
    pub marginals: Vec<EstimateReport>,
    /// `P[j cut | k cut]` for each requested pair, with target `Q_k(j)`.
    pub conditionals: Vec<EstimateReport>,
}

pub fn pattern_census(
    law: &ChainLaw,
    table: &TailTable,
    levels: &[usize],
    pairs: &[(usize, usize)],
    reps: u64,
    seed: u64,
    opts: ExperimentOptions,
) -> Result<PatternCensus> {
    check_reps(reps)?;
    let k_max = levels.iter().copied().chain(pairs.iter().map(|p| p.1)).max().unwrap_or(1);
    if k_max > opts.k_limit {
        return Err(Error::OutOfRange(format!("K = {k_max} exceeds the limit {}", opts.k_limit)));
    }
    let mut targets = Vec::new();
    for &k in levels {
        targets.push(table.cutpoint_probability(k)?.value);
    }
    for &(j, k) in pairs {
        targets.push(table.conditional_cut_probability(j, k)?.value);
    }
    let tallies: Vec<Tally> = run_replicates(seed, 0..reps, opts.threads, |key| {
        let pat = sample_pattern(law, table, k_max, key, opts.sampler)?;
        let mut out = vec![Tally::default(); levels.len() + pairs.len()];
        for (t, &k) in out.iter_mut().zip(levels) {
            t.push(pat.is_cut(k) as u64);
        }
        for (t, &(j, k)) in out[levels.len()..].iter_mut().zip(pairs) {
            if pat.is_cut(k) {
                t.push(pat.is_cut(j) as u64);
            }
        }
        Ok(out)
    })?;
    let (m_tallies, c_tallies) = tallies.split_at(levels.len());
    let marginals = levels
        .iter()
        .zip(m_tallies)
        .zip(&targets)
        .map(|((k, t), &target)| EstimateReport::from_tally(format!("cut k={k}"), t, seed, Some(target)))
        .collect();
    let conditionals = pairs
        .iter()
        .zip(c_tallies)
        .zip(&targets[levels.len()..])
        .map(|((&(j, k), t), &target)| {
            EstimateReport::from_tally(format!("cut j={j} given k={k}"), t, seed, Some(target))
        })
        .collect();
    Ok(PatternCensus { k_max, marginals, conditionals })
}

/// Block statistics of one cutpoint pattern.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockStats {
    pub m: u32,
    /// `A_{m,m+1}`: cutpoints in `(2^m, 2^(m+1)]`.
    pub count_block: u64,
    /// `A_{m-1,m+1}`: cutpoints in `(2^(m-1), 2^(m+1)]`.
    pub count_wide: u64,
    /// Largest cutpoint in `(2^m, 2^(m+1)]`, if any.
    pub ell: Option<usize>,
    /// No cutpoint anywhere in `[1, 2^(m+1)]`.
    pub no_cut: bool,
}

impl BlockStats {
    pub fn from_pattern(pat: &CutpointReport, m: u32) -> Self {
        let block = dyadic_block(m);
        let (lo, hi) = (*block.start() - 1, *block.end());
        let ell = pat.cut_levels().take_while(|&k| k <= hi).filter(|&k| k > lo).last();
        Self {
            m,
            count_block: pat.count_in(lo, hi) as u64,
            count_wide: pat.count_in(lo / 2, hi) as u64,
            ell,
            no_cut: pat.count_in(0, hi) == 0,
        }
    }

    pub fn a_indicator(&self) -> bool {
        self.count_block > 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct BlockTally {
    a: Tally,
    wide: Tally,
    none: Tally,
    ell: Tally,
    ell_min: u64,
    ell_max: u64,
}

impl Merge for BlockTally {
    fn identity() -> Self {
        Self {
            a: Tally::default(),
            wide: Tally::default(),
            none: Tally::default(),
            ell: Tally::default(),
            ell_min: u64::MAX,
            ell_max: 0,
        }
    }

    fn merge(self, o: Self) -> Self {
        Self {
            a: self.a.merge(o.a),
            wide: self.wide.merge(o.wide),
            none: self.none.merge(o.none),
            ell: self.ell.merge(o.ell),
            ell_min: self.ell_min.min(o.ell_min),
            ell_max: self.ell_max.max(o.ell_max),
        }
    }
}

/// Summary of the dyadic block `m` over many patterns on `[1, 2^(m+1)]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockCensus {
    pub m: u32,
    pub k_max: usize,
    pub reps: u64,
    pub seed: u64,
    /// Estimate of `a_m = P[A_{m,m+1} > 0]`.
    pub a_hat: EstimateReport,
    /// Estimate of `E[A_{m-1,m+1}]` against `block_p_sum(m)`.
    pub mean_wide: EstimateReport,
    /// Estimate of `P[no cutpoint in [1, 2^(m+1)]]`.
    pub no_cut: EstimateReport,
    /// Replicates on which `ell_m` was defined, with its range and mean.
    pub ell_defined: u64,
    pub ell_min: Option<usize>,
    pub ell_max: Option<usize>,
    pub ell_mean: Option<f64>,
}

pub fn block_census(
    law: &ChainLaw,
    table: &TailTable,
    m: u32,
    reps: u64,
    seed: u64,
    opts: ExperimentOptions,
) -> Result<BlockCensus> {
    check_reps(reps)?;
    if !(1..=40).contains(&m) {
        return Err(Error::InvalidArguments(format!("block index m = {m} must be in 1..=40")));
    }
    let k_max = 1usize << (m + 1);
    if k_max > opts.k_limit {
        return Err(Error::OutOfRange(format!("K = 2^{} = {k_max} exceeds the limit {}", m + 1, opts.k_limit)));
    }
    let target = table.block_p_sum(m)?;
    let t: BlockTally = run_replicates(seed, 0..reps, opts.threads, |key| {
        let pat = sample_pattern(law, table, k_max, key, opts.sampler)?;
        let s = BlockStats::from_pattern(&pat, m);
        let mut out = BlockTally::identity();
        out.a.push(s.a_indicator() as u64);
        out.wide.push(s.count_wide);
        out.none.push(s.no_cut as u64);
        if let Some(l) = s.ell {
            out.ell.push(l as u64);
            out.ell_min = l as u64;
            out.ell_max = l as u64;
        }
        Ok(out)
    })?;
    let defined = t.ell.n > 0;
    Ok(BlockCensus {
        m,
        k_max,
        reps,
        seed,
        a_hat: EstimateReport::from_tally(format!("a m={m}"), &t.a, seed, None),
        mean_wide: EstimateReport::from_tally(format!("mean A m={m}"), &t.wide, seed, Some(target)),
        no_cut: EstimateReport::from_tally(format!("no cutpoint up to {k_max}"), &t.none, seed, None),
        ell_defined: t.ell.n,
        ell_min: defined.then_some(t.ell_min as usize),
        ell_max: defined.then_some(t.ell_max as usize),
        ell_mean: defined.then(|| t.ell.mean()),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
            Verdict::Inconclusive => "inconclusive",
        })
    }
}

/// Checks `block_p_sum(m) >= a_m b_m` with `a_m` estimated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditRecord {
    pub m: u32,
    pub lhs: f64,
    pub b_m: f64,
    pub a_hat: EstimateReport,
    pub rhs: f64,
    /// `lhs - (a_hat - 4 se) b_m`; nonnegative on a pass.
    pub margin: f64,
    pub verdict: Verdict,
}

pub fn audit_from_census(table: &TailTable, census: &BlockCensus) -> Result<AuditRecord> {
    let m = census.m;
    let lhs = table.block_p_sum(m)?;
    let b_m = table.block_minimum_b(m)?;
    let a = census.a_hat.clone();
    let rhs = a.estimate * b_m;
    let margin = lhs - (a.estimate - AUDIT_Z * a.se) * b_m;
    let verdict = if a.reps < AUDIT_MIN_REPS || a.se_degenerate {
        Verdict::Inconclusive
    } else if margin >= 0.0 {
        Verdict::Pass
    } else {
        Verdict::Fail
    };
    Ok(AuditRecord { m, lhs, b_m, a_hat: a, rhs, margin, verdict })
}

pub fn inequality_audit(
    law: &ChainLaw,
    table: &TailTable,
    m: u32,
    reps: u64,
    seed: u64,
    opts: ExperimentOptions,
) -> Result<AuditRecord> {
    let census = block_census(law, table, m, reps, seed, opts)?;
    audit_from_census(table, &census)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummabilityRow {
    pub m: u32,
    pub a_hat: f64,
    pub se: f64,
    /// `a_hat * m^2`.
    pub scaled: f64,
    /// `a_hat` exceeds the previous row's by more than [`TREND_Z`]
    /// combined standard errors.
    pub trend_violation: bool,
}

/// Seed used for block `m` inside a summability run.
pub fn block_seed(seed: u64, m: u32) -> u64 {
    derive_seed(seed, m as u64)
}

pub fn summability_from_censuses(censuses: &[BlockCensus]) -> Vec<SummabilityRow> {
    let mut rows: Vec<SummabilityRow> = Vec::with_capacity(censuses.len());
    for c in censuses {
        let (a, se) = (c.a_hat.estimate, c.a_hat.se);
        let trend_violation = rows.last().is_some_and(|prev| a > prev.a_hat + TREND_Z * prev.se.hypot(se));
        rows.push(SummabilityRow { m: c.m, a_hat: a, se, scaled: a * (c.m as f64).powi(2), trend_violation });
    }
    rows
}

/// Block censuses for each `m` (block `m` uses [`block_seed`]) and the
/// resulting `a_m m^2` table. An empty range gives an empty table.
pub fn summability_table(
    law: &ChainLaw,
    table: &TailTable,
    ms: Range<u32>,
    reps: u64,
    seed: u64,
    opts: ExperimentOptions,
) -> Result<(Vec<BlockCensus>, Vec<SummabilityRow>)> {
    let censuses =
        ms.map(|m| block_census(law, table, m, reps, block_seed(seed, m), opts)).collect::<Result<Vec<_>>>()?;
    let rows = summability_from_censuses(&censuses);
    Ok((censuses, rows))
}
