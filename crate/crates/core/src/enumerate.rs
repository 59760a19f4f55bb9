//! Exact enumeration of pairs `(a, b)` by height, the restricted cone set
//! (coprime pairs with `1/2 < a^n / b^m < 2`), dyadic class counts and the
//! per-point solution search.

use crate::arith::{coprime_upto, ArithTables, MAX_TABLE_LIMIT};
use crate::error::{Error, Result};
use crate::forms::{
    serialize_height, ApproxFunction, CheckpointAccumulator, Exponents, Height, HeightLevels,
    SumKind, SumSeries,
};
use crate::num::{gcd, iroot};
use rayon::prelude::*;
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct FormPair {
    pub a: u64,
    pub b: u64,
    #[serde(serialize_with = "serialize_height")]
    pub h: Height,
    pub restricted: bool,
}

/// `gcd(a, b) = 1` and `2 a^n > b^m`, `a^n < 2 b^m`, all in integers.
pub fn in_cone(an: u128, bm: u128) -> bool {
    an.checked_mul(2).map_or(true, |x| x > bm) && bm.checked_mul(2).map_or(true, |x| an < x)
}

pub fn is_restricted(a: u64, b: u64, e: &Exponents) -> Result<bool> {
    Ok(gcd(a, b) == 1 && in_cone(e.pow_a(a)?, e.pow_b(b)?))
}

#[derive(Debug, Clone, Copy)]
struct LevelCursor {
    h: Height,
    /// `a` with `a^n = h`, if any.
    a_root: Option<u64>,
    /// `b` with `b^m = h`, if any.
    b_root: Option<u64>,
    /// Largest `a` with `a^n < h`.
    a_below: u64,
    /// Largest `b` with `b^m <= h`.
    b_count: u64,
    phase: u8,
    idx: u64,
    end: u64,
}

/// Streams every pair with `h_{a,b} <= H` in ascending `(h, a, b)` order.
#[derive(Debug, Clone)]
pub struct PairsByHeight {
    e: Exponents,
    levels: HeightLevels,
    restricted_only: bool,
    cursor: Option<LevelCursor>,
}

pub fn pairs_by_height(e: &Exponents, limit: Height, restricted_only: bool) -> Result<PairsByHeight> {
    Ok(PairsByHeight {
        e: *e,
        levels: HeightLevels::new(e, limit)?,
        restricted_only,
        cursor: None,
    })
}

impl PairsByHeight {
    fn start_phase(&self, cur: &mut LevelCursor, phase: u8) {
        cur.phase = phase;
        match phase {
            // pairs (a, b_root) with a^n < h
            0 => {
                cur.idx = 1;
                cur.end = if cur.b_root.is_some() { cur.a_below } else { 0 };
                if self.restricted_only && cur.end > 0 {
                    // cone: 2 a^n > h
                    cur.idx = iroot(cur.h / 2, self.e.n()) + 1;
                }
            }
            // pairs (a_root, b) with b^m <= h
            _ => {
                cur.idx = 1;
                cur.end = if cur.a_root.is_some() { cur.b_count } else { 0 };
                if self.restricted_only && cur.end > 0 {
                    cur.idx = iroot(cur.h / 2, self.e.m()) + 1;
                }
            }
        }
    }
}

impl Iterator for PairsByHeight {
    type Item = FormPair;

    fn next(&mut self) -> Option<FormPair> {
        loop {
            if self.cursor.is_none() {
                let lvl = self.levels.next()?;
                let a_root = (self.e.pow_a(lvl.a_count).ok()? == lvl.h).then_some(lvl.a_count);
                let b_root = (self.e.pow_b(lvl.b_count).ok()? == lvl.h).then_some(lvl.b_count);
                let a_below = if a_root.is_some() { lvl.a_count - 1 } else { lvl.a_count };
                let mut cur = LevelCursor {
                    h: lvl.h,
                    a_root,
                    b_root,
                    a_below,
                    b_count: lvl.b_count,
                    phase: 0,
                    idx: 0,
                    end: 0,
                };
                self.start_phase(&mut cur, 0);
                self.cursor = Some(cur);
            }
            let mut cur = self.cursor.take().expect("cursor set");
            while cur.idx > cur.end {
                if cur.phase == 0 {
                    self.start_phase(&mut cur, 1);
                } else {
                    break;
                }
            }
            if cur.idx > cur.end {
                continue;
            }
            let (a, b) = if cur.phase == 0 {
                (cur.idx, cur.b_root.expect("phase 0 needs b root"))
            } else {
                (cur.a_root.expect("phase 1 needs a root"), cur.idx)
            };
            cur.idx += 1;
            let h = cur.h;
            self.cursor = Some(cur);
            let restricted = gcd(a, b) == 1
                && in_cone(self.e.pow_a(a).ok()?, self.e.pow_b(b).ok()?);
            if self.restricted_only && !restricted {
                continue;
            }
            return Some(FormPair { a, b, h, restricted });
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct DyadicCounts {
    pub t: u32,
    pub alpha: u64,
    pub beta: u64,
}

/// Number of `x` in `[lo, hi]` coprime to the product of `primes`.
fn coprime_in(lo: u64, hi: u64, primes: &[u64]) -> u64 {
    if hi < lo {
        return 0;
    }
    coprime_upto(hi, primes) - coprime_upto(lo - 1, primes)
}

struct PrimeSource(Option<ArithTables>);

impl PrimeSource {
    fn new(limit: u64) -> Result<Self> {
        if limit as u128 <= MAX_TABLE_LIMIT as u128 {
            Ok(Self(Some(ArithTables::build(limit.max(2) as usize)?)))
        } else {
            Ok(Self(None))
        }
    }

    fn primes(&self, x: u64) -> Vec<u64> {
        match &self.0 {
            Some(t) => t.distinct_primes(x),
            None => crate::arith::distinct_primes_trial(x),
        }
    }
}

/// Restricted partners of `a` on the side `a^n > b^m`: the `b` with
/// `a^n / 2 < b^m < a^n` coprime to `a`.
fn lower_partners(an: u128, m: u32, primes: &[u64]) -> u64 {
    let lo = iroot(an / 2, m) + 1;
    let hi = iroot(an - 1, m);
    coprime_in(lo, hi, primes)
}

/// `alpha_t = #A_t` and `beta_t = #B_t`, where `A_t` holds restricted pairs with
/// `a^n > b^m` and `2^t <= a < 2^(t+1)`, and `B_t` is the mirror image.
pub fn dyadic_counts(e: &Exponents, t: u32) -> Result<DyadicCounts> {
    if t >= 62 {
        return Err(Error::range(format!("t = {t} too large")));
    }
    let lo = 1u64 << t;
    let hi = (1u64 << (t + 1)) - 1;
    e.pow_a(hi + 1)?;
    e.pow_b(hi + 1)?;
    let primes = PrimeSource::new(hi)?;
    let count = |x_pow: &(dyn Fn(u64) -> u128 + Sync), other_exp: u32| -> u64 {
        (lo..=hi)
            .into_par_iter()
            .map(|x| lower_partners(x_pow(x), other_exp, &primes.primes(x)))
            .sum()
    };
    let alpha = count(&|a| e.pow_a(a).expect("checked"), e.m());
    let beta = count(&|b| e.pow_b(b).expect("checked"), e.n());
    Ok(DyadicCounts { t, alpha, beta })
}

/// Restricted analogue of [`crate::forms::lebesgue_sum_partial`]: the sum runs
/// over the cone set only.
pub fn restricted_lebesgue_sum_partial(
    e: &Exponents,
    psi: &ApproxFunction,
    limit: Height,
) -> Result<SumSeries> {
    if limit == 0 {
        return Err(Error::invalid("height bound H must be at least 1"));
    }
    let a_max = iroot(limit, e.n());
    let b_max = iroot(limit, e.m());
    e.pow_a(a_max + 1)?;
    e.pow_b(b_max + 1)?;
    let primes = PrimeSource::new(a_max.max(b_max))?;
    // (height, number of restricted pairs attaining it on one side)
    let mut items: Vec<(Height, u64)> = Vec::with_capacity((a_max + b_max) as usize);
    items.push((1, 1));
    let side = |x_max: u64, pow: &(dyn Fn(u64) -> u128 + Sync), other: u32| -> Vec<(Height, u64)> {
        (2..=x_max)
            .into_par_iter()
            .map(|x| {
                let h = pow(x);
                (h, lower_partners(h, other, &primes.primes(x)))
            })
            .filter(|&(_, c)| c > 0)
            .collect()
    };
    items.extend(side(a_max, &|a| e.pow_a(a).expect("checked"), e.m()));
    items.extend(side(b_max, &|b| e.pow_b(b).expect("checked"), e.n()));
    items.sort_unstable();

    let p = e.p() as f64;
    let mut acc = CheckpointAccumulator::new(limit);
    for (h, count) in items {
        let hf = h as f64;
        acc.add(h, count as f64 * psi.value(h)? * hf.powf(-(1.0 - 1.0 / p)));
    }
    Ok(acc.finish(SumKind::Lebesgue))
}

/// Restricted over full Lebesgue partial sums at each dyadic checkpoint.
pub fn restricted_sum_ratio(
    e: &Exponents,
    psi: &ApproxFunction,
    limit: Height,
) -> Result<Vec<(Height, f64)>> {
    let full = crate::forms::lebesgue_sum_partial(e, psi, limit)?;
    let restricted = restricted_lebesgue_sum_partial(e, psi, limit)?;
    Ok(full
        .heights
        .iter()
        .zip(full.partial_sums.iter().zip(&restricted.partial_sums))
        .map(|(&h, (&f, &r))| (h, r / f))
        .collect())
}

fn candidate_residual(target: f64, c: u64, p: u32) -> f64 {
    match crate::num::checked_pow(c, p) {
        Some(v) => (target - v as f64).abs(),
        None => f64::INFINITY,
    }
}

/// `argmin_{c >= 0} |target - c^p|` with ties going to the smaller `c`.
pub fn nearest_power_residual(target: f64, p: u32) -> Result<(u64, f64)> {
    nearest_power_residual_in(target, p, 0, u64::MAX)
}

/// As [`nearest_power_residual`], with `c` restricted to `[c_min, c_max]`.
pub fn nearest_power_residual_in(target: f64, p: u32, c_min: u64, c_max: u64) -> Result<(u64, f64)> {
    if !(target >= 0.0) || !target.is_finite() {
        return Err(Error::invalid(format!("target must be finite and >= 0, got {target}")));
    }
    if p == 0 {
        return Err(Error::invalid("p must be positive"));
    }
    if c_min > c_max {
        return Err(Error::invalid("empty c range"));
    }
    let root = target.powf(1.0 / p as f64);
    let f = if root >= u64::MAX as f64 { u64::MAX - 2 } else { root.floor() as u64 };
    let mut best: Option<(u64, f64)> = None;
    for c in [f.saturating_sub(1), f, f + 1, f + 2] {
        let c = c.clamp(c_min, c_max);
        let r = candidate_residual(target, c, p);
        match best {
            Some((bc, br)) if r > br || (r == br && c >= bc) => {}
            _ => best = Some((c, r)),
        }
    }
    Ok(best.expect("four candidates"))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolutionRecord {
    pub a: u64,
    pub b: u64,
    pub c: u64,
    #[serde(serialize_with = "serialize_height")]
    pub h: Height,
    pub residual: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct SearchOptions {
    pub restricted_only: bool,
    /// Drop the `c = 0` line, which dominates near the origin.
    pub exclude_zero_c: bool,
}

fn check_point(x: f64, y: f64) -> Result<()> {
    if !(0.0..1.0).contains(&x) || !(0.0..1.0).contains(&y) {
        return Err(Error::invalid(format!("point ({x}, {y}) outside [0,1)^2")));
    }
    Ok(())
}

/// Visits every pair up to `H` and reports the best `c` when it beats `psi(h)`.
fn scan_point<F>(
    x: f64,
    y: f64,
    e: &Exponents,
    psi: &ApproxFunction,
    limit: Height,
    opts: &SearchOptions,
    mut visit: F,
) -> Result<()>
where
    F: FnMut(&FormPair, Option<SolutionRecord>),
{
    check_point(x, y)?;
    let c_min = u64::from(opts.exclude_zero_c);
    let mut cached: Option<(Height, f64)> = None;
    for pair in pairs_by_height(e, limit, opts.restricted_only)? {
        let bound = match cached {
            Some((h, v)) if h == pair.h => v,
            _ => {
                let v = psi.value(pair.h)?;
                cached = Some((pair.h, v));
                v
            }
        };
        let target = e.pow_a(pair.a)? as f64 * x + e.pow_b(pair.b)? as f64 * y;
        let (c, residual) = nearest_power_residual_in(target, e.p(), c_min, u64::MAX)?;
        let rec = (residual < bound).then_some(SolutionRecord {
            a: pair.a,
            b: pair.b,
            c,
            h: pair.h,
            residual,
            bound,
        });
        visit(&pair, rec);
    }
    Ok(())
}

/// All pairs `(a, b)` with `h <= H` admitting `c` with `|a^n x + b^m y - c^p| < psi(h)`,
/// each reported with its best `c`.
pub fn find_solutions(
    x: f64,
    y: f64,
    e: &Exponents,
    psi: &ApproxFunction,
    limit: Height,
    opts: &SearchOptions,
) -> Result<Vec<SolutionRecord>> {
    let mut out = Vec::new();
    scan_point(x, y, e, psi, limit, opts, |_, rec| out.extend(rec))?;
    Ok(out)
}

/// Cumulative number of pairs with a solution, sampled at each checkpoint.
pub fn hit_profile(
    x: f64,
    y: f64,
    e: &Exponents,
    psi: &ApproxFunction,
    checkpoints: &[Height],
    opts: &SearchOptions,
) -> Result<Vec<(Height, u64)>> {
    if checkpoints.is_empty() || checkpoints.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid("checkpoints must be non-empty and strictly increasing"));
    }
    let limit = *checkpoints.last().expect("non-empty");
    let mut out = Vec::with_capacity(checkpoints.len());
    let mut hits = 0u64;
    let mut next = 0usize;
    scan_point(x, y, e, psi, limit, opts, |pair, rec| {
        while pair.h > checkpoints[next] {
            out.push((checkpoints[next], hits));
            next += 1;
        }
        hits += u64::from(rec.is_some());
    })?;
    while out.len() < checkpoints.len() {
        out.push((checkpoints[out.len()], hits));
    }
    Ok(out)
}

/// [`hit_profile`] for many points, in input order.
pub fn hit_profiles(
    points: &[(f64, f64)],
    e: &Exponents,
    psi: &ApproxFunction,
    checkpoints: &[Height],
    opts: &SearchOptions,
) -> Result<Vec<Vec<(Height, u64)>>> {
    points
        .par_iter()
        .map(|&(x, y)| hit_profile(x, y, e, psi, checkpoints, opts))
        .collect()
}
