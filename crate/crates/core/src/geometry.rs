//! Strips around the resonant lines `a^n x + b^m y = c^p`, discs inside
//! `[eps, 1]^2`, their exact intersection areas, angle regimes between pairs
//! of line families and Monte Carlo quasi-independence diagnostics.

use crate::enumerate::{nearest_power_residual, pairs_by_height, FormPair};
use crate::error::{Error, Result};
use crate::forms::{ApproxFunction, Exponents, Height};
use crate::num::{checked_pow, CompensatedSum};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::PI;

/// Strata per side of the ball's bounding square.
pub const STRATA_PER_SIDE: usize = 16;
pub const MIN_SAMPLES: u64 = 10_000;
/// Most restricted pairs accepted by [`quasi_independence_ratio`].
pub const MAX_QI_PAIRS: usize = 1_000_000;

/// Open disc with centre `(x0, y0)` and radius `r`, lying in `[eps, 1]^2` with `r < eps`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Ball {
    pub x0: f64,
    pub y0: f64,
    pub r: f64,
    pub eps: f64,
}

impl Ball {
    pub fn new(x0: f64, y0: f64, r: f64, eps: f64) -> Result<Self> {
        if !(eps > 0.0 && eps < 1.0) {
            return Err(Error::invalid(format!("margin eps = {eps} outside (0, 1)")));
        }
        if !(r > 0.0 && r < eps) {
            return Err(Error::invalid(format!("radius r = {r} must satisfy 0 < r < eps = {eps}")));
        }
        for (name, c) in [("x0", x0), ("y0", y0)] {
            // small slack so balls touching the boundary survive rounding
            if !(c - r >= eps - 1e-12 && c + r <= 1.0 + 1e-12) {
                return Err(Error::invalid(format!(
                    "{name} = {c} with r = {r} leaves [{eps}, 1]"
                )));
            }
        }
        Ok(Self { x0, y0, r, eps })
    }

    pub fn area(&self) -> f64 {
        PI * self.r * self.r
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        let (dx, dy) = (x - self.x0, y - self.y0);
        dx * dx + dy * dy < self.r * self.r
    }

    pub fn half(&self) -> Self {
        Self { r: self.r / 2.0, ..*self }
    }
}

/// Normal vector `(a^n, b^m)` of the lines attached to a pair.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Normal {
    an: f64,
    bm: f64,
    norm: f64,
}

impl Normal {
    fn of(pair: &FormPair, e: &Exponents) -> Result<Self> {
        let an = e.pow_a(pair.a)? as f64;
        let bm = e.pow_b(pair.b)? as f64;
        Ok(Self {
            an,
            bm,
            norm: an.hypot(bm),
        })
    }

    /// Form value at the ball centre.
    fn center_value(&self, ball: &Ball) -> f64 {
        self.an * ball.x0 + self.bm * ball.y0
    }

    /// `target - (a^n x0 + b^m y0)` with the products fused to limit cancellation.
    fn offset(&self, ball: &Ball, target: f64) -> f64 {
        -self.bm.mul_add(ball.y0, self.an.mul_add(ball.x0, -target))
    }
}

/// `{(x, y) : |a^n x + b^m y - c^p| < w}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Strip {
    pub pair: FormPair,
    pub c: u64,
    pub w: f64,
    #[serde(skip)]
    normal: (f64, f64, f64),
    #[serde(skip)]
    level: f64,
}

impl Strip {
    pub fn new(pair: &FormPair, e: &Exponents, c: u64, w: f64) -> Result<Self> {
        if !(w >= 0.0) || !w.is_finite() {
            return Err(Error::invalid(format!("strip width {w} must be finite and >= 0")));
        }
        let n = Normal::of(pair, e)?;
        let level = e.pow_c(c)? as f64;
        Ok(Self {
            pair: *pair,
            c,
            w,
            normal: (n.an, n.bm, n.norm),
            level,
        })
    }

    fn normal(&self) -> Normal {
        Normal {
            an: self.normal.0,
            bm: self.normal.1,
            norm: self.normal.2,
        }
    }

    /// Euclidean half-width `w / |(a^n, b^m)|`.
    pub fn half_width(&self) -> f64 {
        self.w / self.normal.2
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        (self.normal.0 * x + self.normal.1 * y - self.level).abs() < self.w
    }
}

/// Area of the part of a radius-`r` disc beyond signed distance `u` from its centre.
fn cap_area(r: f64, u: f64) -> f64 {
    if u >= r {
        0.0
    } else if u <= -r {
        PI * r * r
    } else {
        r * r * (u / r).acos() - u * (r * r - u * u).sqrt()
    }
}

/// Area of the disc between signed distances `lo < hi` from its centre.
fn band_area(r: f64, lo: f64, hi: f64) -> f64 {
    let lo = lo.max(-r);
    let hi = hi.min(r);
    if hi <= lo {
        return 0.0;
    }
    let width = hi - lo;
    let edge = r - lo.abs().max(hi.abs());
    if width < 1e-3 * r && edge > 10.0 * width {
        // thin band well inside the disc: three-point Gauss-Legendre of the chord
        let mid = 0.5 * (lo + hi);
        let half = 0.5 * width;
        let chord = |u: f64| 2.0 * (r * r - u * u).sqrt();
        let k = (0.6f64).sqrt() * half;
        return half * (5.0 * chord(mid - k) + 8.0 * chord(mid) + 5.0 * chord(mid + k)) / 9.0;
    }
    cap_area(r, lo) - cap_area(r, hi)
}

/// Area of `{c1 - w < a^n x + b^m y < c2 + w} ∩ B` for levels `c1 <= c2`.
fn form_band_area(n: &Normal, ball: &Ball, first: f64, last: f64, w: f64) -> f64 {
    let lo_u = (n.offset(ball, first) - w) / n.norm;
    let hi_u = (n.offset(ball, last) + w) / n.norm;
    band_area(ball.r, lo_u, hi_u)
}

/// Exact area of the strip intersected with the disc.
pub fn strip_ball_measure(strip: &Strip, ball: &Ball) -> f64 {
    let n = strip.normal();
    let off = n.offset(ball, strip.level);
    band_area(ball.r, (off - strip.w) / n.norm, (off + strip.w) / n.norm)
}

/// Smallest `c >= 0` with `c^p > x`.
fn first_power_above(x: f64, p: u32) -> u64 {
    if x < 0.0 {
        return 0;
    }
    let pow = |c: u64| checked_pow(c, p).map_or(f64::INFINITY, |v| v as f64);
    let mut c = x.powf(1.0 / p as f64).floor() as u64;
    while c > 0 && pow(c - 1) > x {
        c -= 1;
    }
    while pow(c) <= x {
        c += 1;
    }
    c
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CRange {
    /// Smallest and largest `c` whose central line meets the ball.
    pub c_lo: Option<u64>,
    pub c_hi: Option<u64>,
    pub count: u64,
    /// `c` whose line misses the ball by at most `2 psi(h) / |(a^n, b^m)|`.
    pub near_miss: Vec<u64>,
}

/// The `c` whose central line `a^n x + b^m y = c^p` meets the ball, plus the near misses.
pub fn c_range(pair: &FormPair, e: &Exponents, ball: &Ball, w: f64) -> Result<CRange> {
    let n = Normal::of(pair, e)?;
    let v = n.center_value(ball);
    let reach = ball.r * n.norm;
    let p = e.p();
    let c_lo = first_power_above(v - reach, p);
    // smallest c with c^p >= v + reach
    let c_end = first_power_above((v + reach).next_down(), p);
    let count = c_end - c_lo;
    let mut near_miss: Vec<u64> = (first_power_above(v - reach - 2.0 * w, p)..c_lo).collect();
    let mut c = c_end;
    while (e.pow_c(c)? as f64) <= v + reach + 2.0 * w {
        near_miss.push(c);
        c += 1;
    }
    let nonempty = count > 0;
    Ok(CRange {
        c_lo: nonempty.then_some(c_lo),
        c_hi: nonempty.then_some(c_end - 1),
        count,
        near_miss,
    })
}

/// Length of the real interval of `c` with `c^p` inside `(V - r|v|, V + r|v|)`.
pub fn c_interval_length(pair: &FormPair, e: &Exponents, ball: &Ball) -> Result<f64> {
    let n = Normal::of(pair, e)?;
    let v = n.center_value(ball);
    let reach = ball.r * n.norm;
    let inv = 1.0 / e.p() as f64;
    Ok((v + reach).powf(inv) - (v - reach).max(0.0).powf(inv))
}

/// `(eps^(1/p) h^(1/p) / 2, 3 h^(1/p))`, the window holding every relevant `c`.
pub fn cbounds_window(h: Height, p: u32, eps: f64) -> (f64, f64) {
    let root = (h as f64).powf(1.0 / p as f64);
    (eps.powf(1.0 / p as f64) / 2.0 * root, 3.0 * root)
}

/// Distance between the central lines for `c` and `c + 1`.
pub fn adjacent_spacing(pair: &FormPair, e: &Exponents, c: u64) -> Result<f64> {
    let n = Normal::of(pair, e)?;
    let gap = e.pow_c(c + 1)? - e.pow_c(c)?;
    Ok(gap as f64 / n.norm)
}

/// Runs of levels `(first, last)` whose strips `(c^p - w, c^p + w)` chain into one
/// interval and can meet the ball.
fn union_intervals(n: &Normal, p: u32, ball: &Ball, w: f64) -> Vec<(f64, f64)> {
    let v = n.center_value(ball);
    let reach = ball.r * n.norm;
    let mut out: Vec<(f64, f64)> = Vec::new();
    let mut c = first_power_above(v - reach - w, p);
    loop {
        let level = match checked_pow(c, p) {
            Some(x) => x as f64,
            None => break,
        };
        if level - w >= v + reach {
            break;
        }
        match out.last_mut() {
            Some(last) if level - w < last.1 + w => last.1 = level,
            _ => out.push((level, level)),
        }
        c += 1;
    }
    out
}

/// Area of `B ∩ ⋃_c {|a^n x + b^m y - c^p| < psi(h)}`, exact even when strips overlap.
pub fn strip_union_ball_measure(
    pair: &FormPair,
    e: &Exponents,
    psi: &ApproxFunction,
    ball: &Ball,
) -> Result<f64> {
    let w = psi.value(pair.h)?;
    Ok(StripUnion::new(pair, e, w)?.ball_measure(ball))
}

/// The union over `c >= 0` of the strips of one pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StripUnion {
    pub pair: FormPair,
    p: u32,
    w: f64,
    normal: Normal,
}

impl StripUnion {
    pub fn new(pair: &FormPair, e: &Exponents, w: f64) -> Result<Self> {
        if !(w > 0.0) || !w.is_finite() {
            return Err(Error::invalid(format!("strip width {w} must be positive")));
        }
        Ok(Self {
            pair: *pair,
            p: e.p(),
            w,
            normal: Normal::of(pair, e)?,
        })
    }

    pub fn width(&self) -> f64 {
        self.w
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        let v = self.normal.an * x + self.normal.bm * y;
        match self.p {
            1 => (v - v.round()).abs() < self.w,
            _ => v >= 0.0 && nearest_power_residual(v, self.p).map_or(false, |(_, r)| r < self.w),
        }
    }

    pub fn ball_measure(&self, ball: &Ball) -> f64 {
        union_intervals(&self.normal, self.p, ball, self.w)
            .into_iter()
            .map(|(first, last)| form_band_area(&self.normal, ball, first, last, self.w))
            .collect::<CompensatedSum>()
            .value()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AngleRegime {
    Large,
    Medium,
    Small,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AngleInfo {
    pub sin_alpha: f64,
    pub regime: AngleRegime,
    /// `1 / (r h1^(1/p))`.
    pub large_threshold: f64,
    /// `1 / (r^(1 + k/M) h1^(k/(pN)) h2^(1/p))`.
    pub medium_threshold: f64,
}

/// Angle between the line families of two pairs, from the exact determinant.
pub fn angle_between(pair1: &FormPair, pair2: &FormPair, e: &Exponents, r: f64) -> Result<AngleInfo> {
    if pair1.a == pair2.a && pair1.b == pair2.b {
        return Err(Error::invalid("angle between a pair and itself"));
    }
    if !(r > 0.0) {
        return Err(Error::invalid("radius must be positive"));
    }
    let (p1, p2) = if pair1.h <= pair2.h { (pair1, pair2) } else { (pair2, pair1) };
    let to_i = |v: u128| i128::try_from(v).map_err(|_| Error::range("power exceeds i128"));
    let (a1, b1) = (to_i(e.pow_a(p1.a)?)?, to_i(e.pow_b(p1.b)?)?);
    let (a2, b2) = (to_i(e.pow_a(p2.a)?)?, to_i(e.pow_b(p2.b)?)?);
    let det = a1
        .checked_mul(b2)
        .zip(a2.checked_mul(b1))
        .map(|(x, y)| x - y)
        .ok_or_else(|| Error::range("determinant overflows i128"))?;
    if det == 0 {
        return Err(if p1.restricted && p2.restricted {
            Error::Internal(format!("parallel restricted pairs {p1:?} and {p2:?}"))
        } else {
            Error::invalid("pairs give parallel lines")
        });
    }
    let (a1, b1, a2, b2) = (a1 as f64, b1 as f64, a2 as f64, b2 as f64);
    let sin_alpha = (det.unsigned_abs() as f64 / (a1.hypot(b1) * a2.hypot(b2))).min(1.0);
    let p = e.p() as f64;
    let k = e.gcd() as f64;
    let (h1, h2) = (p1.h as f64, p2.h as f64);
    let large_threshold = 1.0 / (r * h1.powf(1.0 / p));
    let medium_threshold = 1.0
        / (r.powf(1.0 + k / e.min_exp() as f64)
            * h1.powf(k / (p * e.max_exp() as f64))
            * h2.powf(1.0 / p));
    let regime = if sin_alpha >= large_threshold {
        AngleRegime::Large
    } else if sin_alpha >= medium_threshold {
        AngleRegime::Medium
    } else {
        AngleRegime::Small
    };
    Ok(AngleInfo {
        sin_alpha,
        regime,
        large_threshold,
        medium_threshold,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McEstimate {
    pub estimate: f64,
    pub ci95: f64,
    pub samples: u64,
}

/// Seed for the `index`-th independent estimate drawn from a master seed.
pub fn derived_seed(master: u64, index: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(index);
    rng.next_u64()
}

/// Stratified Monte Carlo estimate of `∫_B f` over a 16 x 16 grid of the ball's
/// bounding square. Each stratum draws from its own ChaCha stream, so the result
/// does not depend on scheduling. With `indicator` set, `f` must be 0/1 and the
/// variance uses the smoothed proportion `(k+1)/(n+2)`.
pub fn stratified_integral<F>(ball: &Ball, samples: u64, seed: u64, indicator: bool, f: F) -> Result<McEstimate>
where
    F: Fn(f64, f64) -> f64 + Sync,
{
    if samples < MIN_SAMPLES {
        return Err(Error::invalid(format!(
            "need at least {MIN_SAMPLES} samples, got {samples}"
        )));
    }
    let strata = (STRATA_PER_SIDE * STRATA_PER_SIDE) as u64;
    let side = 2.0 * ball.r / STRATA_PER_SIDE as f64;
    let cell = side * side;
    let parts: Vec<(f64, f64)> = (0..strata)
        .into_par_iter()
        .map(|s| {
            let n_s = samples / strata + u64::from(s < samples % strata);
            let (i, j) = ((s as usize) % STRATA_PER_SIDE, (s as usize) / STRATA_PER_SIDE);
            let (x_lo, y_lo) = (ball.x0 - ball.r + i as f64 * side, ball.y0 - ball.r + j as f64 * side);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(s);
            let mut sum = 0.0;
            let mut sum_sq = 0.0;
            for _ in 0..n_s {
                let x = x_lo + rng.gen::<f64>() * side;
                let y = y_lo + rng.gen::<f64>() * side;
                let v = if ball.contains(x, y) { f(x, y) } else { 0.0 };
                sum += v;
                sum_sq += v * v;
            }
            let nf = n_s as f64;
            let mean = sum / nf;
            let var_mean = if indicator {
                let pt = (sum + 1.0) / (nf + 2.0);
                pt * (1.0 - pt) / nf
            } else {
                ((sum_sq - sum * mean) / (nf - 1.0)).max(0.0) / nf
            };
            (cell * mean, cell * cell * var_mean)
        })
        .collect();
    let estimate: CompensatedSum = parts.iter().map(|p| p.0).collect();
    let variance: f64 = parts.iter().map(|p| p.1).sum();
    Ok(McEstimate {
        estimate: estimate.value(),
        ci95: 1.96 * variance.sqrt(),
        samples,
    })
}

/// Monte Carlo estimate of `|U1 ∩ U2 ∩ B|`.
pub fn pair_intersection_measure(
    u1: &StripUnion,
    u2: &StripUnion,
    ball: &Ball,
    samples: u64,
    seed: u64,
) -> Result<McEstimate> {
    stratified_integral(ball, samples, seed, true, |x, y| {
        f64::from(u8::from(u1.contains(x, y) && u2.contains(x, y)))
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuasiIndependence {
    #[serde(serialize_with = "crate::forms::serialize_height")]
    pub h_max: Height,
    /// Restricted pairs whose strips meet the ball.
    pub pairs: usize,
    /// `sum |U ∩ B|` over those pairs.
    pub single_sum: f64,
    /// Estimate of `sum_{i != j} |U_i ∩ U_j ∩ B|`.
    pub pair_sum: f64,
    pub pair_sum_ci95: f64,
    /// `|B| pair_sum / single_sum^2`.
    pub ratio: f64,
    pub ratio_ci95: f64,
}

/// Restricted pairs up to `H` whose strip union meets the ball, with their exact areas.
pub fn meeting_unions(
    e: &Exponents,
    psi: &ApproxFunction,
    ball: &Ball,
    limit: Height,
) -> Result<Vec<(StripUnion, f64)>> {
    let mut pairs = Vec::new();
    for pair in pairs_by_height(e, limit, true)? {
        if pairs.len() >= MAX_QI_PAIRS {
            return Err(Error::Resource(format!(
                "more than {MAX_QI_PAIRS} restricted pairs below H = {limit}"
            )));
        }
        pairs.push(pair);
    }
    let mut out = Vec::with_capacity(pairs.len());
    for pair in pairs {
        let u = StripUnion::new(&pair, e, psi.value(pair.h)?)?;
        let m = u.ball_measure(ball);
        if m > 0.0 {
            out.push((u, m));
        }
    }
    Ok(out)
}

/// `|B| sum_{i != j} |U_i ∩ U_j ∩ B| / (sum_i |U_i ∩ B|)^2` over restricted pairs with `h <= H`.
///
/// The pair sum is estimated through `sum_{i != j} 1_{U_i} 1_{U_j} = N (N - 1)`,
/// where `N(x)` counts the unions containing `x`, so one stratified sample of `N`
/// covers every ordered pair at once. Single measures are exact.
pub fn quasi_independence_ratio(
    e: &Exponents,
    psi: &ApproxFunction,
    ball: &Ball,
    limit: Height,
    samples: u64,
    seed: u64,
) -> Result<QuasiIndependence> {
    let unions = meeting_unions(e, psi, ball, limit)?;
    let single_sum: f64 = unions.iter().map(|u| u.1).collect::<CompensatedSum>().value();
    if single_sum == 0.0 {
        return Err(Error::UndefinedRatio(format!(
            "no strip with h <= {limit} meets the ball"
        )));
    }
    let pair_mc = if unions.len() < 2 {
        McEstimate {
            estimate: 0.0,
            ci95: 0.0,
            samples,
        }
    } else {
        stratified_integral(ball, samples, seed, false, |x, y| {
            let n = unions.iter().filter(|u| u.0.contains(x, y)).count() as f64;
            n * (n - 1.0)
        })?
    };
    let scale = ball.area() / (single_sum * single_sum);
    Ok(QuasiIndependence {
        h_max: limit,
        pairs: unions.len(),
        single_sum,
        pair_sum: pair_mc.estimate,
        pair_sum_ci95: pair_mc.ci95,
        ratio: scale * pair_mc.estimate,
        ratio_ci95: scale * pair_mc.ci95,
    })
}
