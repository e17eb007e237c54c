//! Unbiased samplers for the cutpoint indicators of the infinite walk.

use rand::Rng as _;

use super::detect::{CutpointMethod, CutpointReport};
use super::{step, Space, State, StopRule, Trajectory, DEFAULT_HORIZON_CAP};
use crate::error::{Error, Result};
use crate::resistance::{ChainLaw, TailTable};
use crate::rng::{Rng, StreamKey};

const ROW_RENORMALIZE: f64 = 1e-9;
const ROW_FAIL: f64 = 1e-6;
const H_RATIO_MAX_REL_WIDTH: f64 = 1e-6;

/// Samples the walk from `from` until it first visits `target`, conditioned
/// on ever visiting `target`.
///
/// Uses the h-transform with `h(x) = t(x)/t(target)`:
/// `p'(x, y) = p(x, y) h(y) / h(x)`. The walk may climb above `from`; it
/// fails with `OutOfRange` if it leaves the levels covered by `table`.
pub fn conditioned_descent(
    law: &ChainLaw,
    table: &TailTable,
    from: State,
    target: State,
    key: StreamKey,
) -> Result<Trajectory> {
    let mut rng = key.rng();
    let states = descend(law, table, from, target, &mut rng, DEFAULT_HORIZON_CAP, |_| {})?;
    let censored_early = *states.last().expect("non-empty") != target;
    Ok(Trajectory {
        space: Space::Line,
        start: from,
        states,
        stop_rule: StopRule::Absorb(target),
        seed: Some(key),
        censored_early,
    })
}

/// Conditioned one-step law `(up, down)` from `x` toward `target`.
pub(crate) fn conditioned_row(law: &ChainLaw, table: &TailTable, x: State) -> Result<(f64, f64)> {
    let k = x as usize;
    let t = table.tails();
    if k + 1 >= t.len() {
        return Err(Error::OutOfRange(format!("conditioned walk reached level {k} beyond the tail table")));
    }
    let tx = t[k];
    if table.tail_half_width(k) > H_RATIO_MAX_REL_WIDTH * tx {
        return Err(Error::NumericFailure(format!("tail enclosure at level {k} too wide for stable h ratios")));
    }
    let up = law.up_unchecked(k) * t[k + 1] / tx;
    let down = law.down_unchecked(k) * t[k - 1] / tx;
    let s = up + down;
    let dev = (s - 1.0).abs();
    if dev > ROW_FAIL {
        return Err(Error::NumericFailure(format!("conditioned row at level {k} sums to {s}")));
    }
    if dev > ROW_RENORMALIZE {
        return Ok((up / s, down / s));
    }
    Ok((up, down))
}

fn descend(
    law: &ChainLaw,
    table: &TailTable,
    from: State,
    target: State,
    rng: &mut Rng,
    horizon: u64,
    mut on_step: impl FnMut(State),
) -> Result<Vec<State>> {
    if target == 0 || target >= from {
        return Err(Error::InvalidArguments(format!("need 1 <= K < N, got K = {target}, N = {from}")));
    }
    let mut x = from;
    let mut states = vec![x];
    let mut steps = 0u64;
    while x != target && steps < horizon {
        let (up, _) = conditioned_row(law, table, x)?;
        let u: f64 = rng.random();
        x = if u < up { x + 1 } else { x - 1 };
        steps += 1;
        states.push(x);
        on_step(x);
    }
    Ok(states)
}

#[derive(Debug, Clone, Copy)]
pub struct ExactPatternOptions {
    /// Censor level `N`; defaults to `4K` (capped at an explicit profile's
    /// top state).
    pub censor_level: Option<usize>,
    /// Simulate each conditioned descent step by step. When false the walk
    /// is moved straight to level `K`: the descent never visits levels below
    /// `K` and visits `K` only at its end, so indicators are unaffected.
    pub simulate_descent: bool,
    pub horizon_cap: u64,
}

impl Default for ExactPatternOptions {
    fn default() -> Self {
        Self { censor_level: None, simulate_descent: false, horizon_cap: DEFAULT_HORIZON_CAP }
    }
}

/// Unbiased sample of the infinite walk's cutpoint indicators on `1..=K`.
///
/// Runs from 1 to the first passage of `N`. With probability `t(N)/t(K)`
/// the walk would come back to `K`: the return leg is drawn from the
/// conditioned law, `K` is spoiled, and the unconditioned walk resumes from
/// `K` until it reaches `N` again. Otherwise the indicators are final.
/// Level `k` is spoiled by any visit after the first passage of `k + 1`.
pub fn exact_cutpoint_pattern(
    law: &ChainLaw,
    table: &TailTable,
    k_max: usize,
    key: StreamKey,
    opts: ExactPatternOptions,
) -> Result<CutpointReport> {
    if k_max == 0 {
        return Err(Error::InvalidArguments("K must be at least 1".into()));
    }
    let mut n = opts.censor_level.unwrap_or(4 * k_max);
    if let Some(top) = law.max_state() {
        n = n.min(top);
    }
    if n <= k_max {
        return Err(Error::InvalidArguments(format!("censor level {n} must exceed K = {k_max}")));
    }
    let return_prob = table.return_probability(n, k_max)?.value;
    let n = n as State;
    let k_top = k_max as State;

    let mut rng = key.rng();
    let mut first_passage = vec![None; k_max];
    let mut spoiled = vec![false; k_max];
    let mut highest: State = 1;
    let mut time = 0u64;
    let mut x: State = 1;
    first_passage[0] = Some(0);
    let mut truncated = false;

    loop {
        // unconditioned leg up to the next visit to N
        while x != n {
            if time >= opts.horizon_cap {
                truncated = true;
                break;
            }
            x = step(law, x, &mut rng);
            time += 1;
            if x <= k_top {
                let i = x as usize - 1;
                if first_passage[i].is_none() {
                    first_passage[i] = Some(time);
                }
                if highest > x {
                    spoiled[i] = true;
                }
            }
            highest = highest.max(x);
        }
        if truncated {
            break;
        }

        let u: f64 = rng.random();
        if u >= return_prob {
            break;
        }
        if opts.simulate_descent {
            let remaining = opts.horizon_cap.saturating_sub(time);
            let path = descend(law, table, n, k_top, &mut rng, remaining, |_| {})?;
            time += (path.len() - 1) as u64;
            if *path.last().expect("non-empty") != k_top {
                truncated = true;
                break;
            }
        }
        x = k_top;
        spoiled[k_max - 1] = true;
    }

    Ok(CutpointReport::from_spoiled(
        k_max,
        CutpointMethod::ExactPattern,
        spoiled,
        first_passage,
        vec![0.0; k_max],
        truncated,
    ))
}

/// Unbiased sample of the cutpoint indicators on `1..=K` in `O(K log K)`.
///
/// Let `D_n` be the lowest level visited between the first visits to `n`
/// and `n + 1`, and `Z` the lowest level visited after the first visit to
/// `K + 1`. By the strong Markov property these are independent, with
/// `P[D_n <= j] = r(n) / (t(j) - t(n+1))` (ruin on `[j, n+1]` from `n`) and
/// `P[Z <= j] = t(K+1) / t(j)`. Level `k` is a cutpoint iff
/// `min(D_{k+1}, ..., D_K, Z) > k`.
pub fn ladder_cutpoint_pattern(table: &TailTable, k_max: usize, rng: &mut Rng) -> Result<CutpointReport> {
    if k_max == 0 {
        return Err(Error::InvalidArguments("K must be at least 1".into()));
    }
    table.check_level(k_max)?;
    let t = table.tails();
    let r = table.r_slice();

    let t_far = t[k_max + 1];
    let u = uniform_open_closed(rng);
    // smallest j in [1, K+1] with u t(j) <= t(K+1)
    let mut suffix_min = first_index(1, k_max + 1, |j| u * t[j] <= t_far);

    let mut spoiled = vec![false; k_max];
    for k in (1..=k_max).rev() {
        spoiled[k - 1] = suffix_min <= k;
        if k == 1 {
            break;
        }
        if suffix_min <= 1 {
            continue;
        }
        let u = uniform_open_closed(rng);
        let t_next = t[k + 1];
        let hits = |j: usize| u * (t[j] - t_next) <= r[k];
        if suffix_min > k {
            suffix_min = first_index(1, k, hits);
        } else if hits(suffix_min - 1) {
            // only a draw of D_k below the current minimum changes anything
            suffix_min = first_index(1, suffix_min - 1, hits);
        }
    }

    Ok(CutpointReport::from_spoiled(k_max, CutpointMethod::Ladder, spoiled, vec![None; k_max], vec![0.0; k_max], false))
}

#[inline]
fn uniform_open_closed(rng: &mut Rng) -> f64 {
    1.0 - rng.random::<f64>()
}

/// Smallest `j` in `[lo, hi]` with `pred(j)`, for a predicate that is
/// monotone false-then-true; returns `hi` if only `hi` qualifies.
#[inline]
fn first_index(lo: usize, hi: usize, pred: impl Fn(usize) -> bool) -> usize {
    let (mut a, mut b) = (lo, hi);
    while a < b {
        let mid = a + (b - a) / 2;
        if pred(mid) {
            b = mid;
        } else {
            a = mid + 1;
        }
    }
    a
}
