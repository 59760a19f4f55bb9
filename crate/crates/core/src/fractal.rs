//! Box counting of truncated strip covers and the critical exponent at which
//! the Hausdorff volume sums switch from growing to saturating.

use crate::error::{Error, Result};
use crate::forms::{
    dimension_formula, hausdorff_sum_partial, regime_classify, ApproxFunction, DimensionFunction,
    Exponents, Height, HeightLevels,
};
use crate::num::{checked_pow, iroot, ls_slope};
use rayon::prelude::*;
use serde::Serialize;

/// Largest bitmap materialised by [`truncated_cover`], in bits.
pub const MAX_BITMAP_BITS: u64 = 1 << 32;
/// Largest resolution accepted by the counting routines.
pub const MAX_RESOLUTION: u32 = 24;
/// Most strips rasterised at one scale.
pub const MAX_STRIPS: usize = 50_000_000;
/// Bisection tolerance on `s`.
pub const S_TOLERANCE: f64 = 0.01;

/// One strip `|A x + B y - C| < w`.
#[derive(Debug, Clone, Copy)]
struct RasterStrip {
    a: f64,
    b: f64,
    c: f64,
    w: f64,
}

impl RasterStrip {
    /// Rows `k` whose closed box in column `i` meets the open strip, as `[lo, hi)`.
    fn rows(&self, i: u64, delta: f64, side: u64) -> Option<(u64, u64)> {
        let x0 = i as f64 * delta;
        let x1 = x0 + delta;
        let y_min = (self.c - self.w - self.a * x1) / self.b;
        let y_max = (self.c + self.w - self.a * x0) / self.b;
        // (k + 1) delta > y_min and k delta < y_max
        let lo = (y_min / delta).floor().max(0.0);
        let hi = ((y_max / delta).ceil()).min(side as f64);
        if hi <= lo {
            return None;
        }
        Some((lo as u64, hi as u64))
    }

    /// Columns whose closed box can meet the strip within `0 <= y <= 1`.
    fn columns(&self, delta: f64, side: u64) -> (u64, u64) {
        let x_lo = (self.c - self.w - self.b) / self.a;
        let x_hi = (self.c + self.w) / self.a;
        let lo = (x_lo / delta).floor().max(0.0) as u64;
        let hi = ((x_hi / delta).ceil().max(0.0) as u64).min(side);
        (lo.min(side), hi)
    }
}

/// Strips of every pair with `h_lo < h <= h_hi` that meet the unit square.
fn band_strips(e: &Exponents, psi: &ApproxFunction, h_lo: Height, h_hi: Height) -> Result<Vec<RasterStrip>> {
    let mut out = Vec::new();
    if h_hi <= h_lo {
        return Ok(out);
    }
    for level in HeightLevels::new(e, h_hi)? {
        if level.h <= h_lo {
            continue;
        }
        let w = psi.value(level.h)?;
        // pairs of this height: (a_root, b) for b^m <= h, and (a, b_root) for a^n < h
        let a_root = (e.pow_a(level.a_count)? == level.h).then_some(level.a_count);
        let b_root = (e.pow_b(level.b_count)? == level.h).then_some(level.b_count);
        let mut pairs: Vec<(u64, u64)> = Vec::new();
        if let Some(b0) = b_root {
            let a_below = if a_root.is_some() { level.a_count - 1 } else { level.a_count };
            pairs.extend((1..=a_below).map(|a| (a, b0)));
        }
        if let Some(a0) = a_root {
            pairs.extend((1..=level.b_count).map(|b| (a0, b)));
        }
        for (a, b) in pairs {
            let (af, bf) = (e.pow_a(a)? as f64, e.pow_b(b)? as f64);
            let c_max = iroot(e.pow_a(a)? + e.pow_b(b)? + w.ceil() as u128, e.p()) + 1;
            for c in 0..=c_max {
                let cf = checked_pow(c, e.p()).ok_or_else(|| Error::range("c^p overflows"))? as f64;
                if cf - w >= af + bf || cf + w <= 0.0 {
                    continue;
                }
                out.push(RasterStrip { a: af, b: bf, c: cf, w });
                if out.len() > MAX_STRIPS {
                    return Err(Error::Resource(format!(
                        "more than {MAX_STRIPS} strips in height band ({h_lo}, {h_hi}]"
                    )));
                }
            }
        }
    }
    Ok(out)
}

/// Sets bits `[lo, hi)` of a row bitset.
fn set_range(words: &mut [u64], lo: u64, hi: u64) {
    let (mut lo, hi) = (lo, hi);
    while lo < hi {
        let word = (lo / 64) as usize;
        let bit = lo % 64;
        let span = (64 - bit).min(hi - lo);
        let mask = if span == 64 { u64::MAX } else { ((1u64 << span) - 1) << bit };
        words[word] |= mask;
        lo += span;
    }
}

/// Occupied boxes per column, as a row bitset handed to `visit(column, rows)`.
fn rasterize<T, F>(strips: &[RasterStrip], j: u32, visit: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64, &[u64]) -> T + Sync,
{
    let side = 1u64 << j;
    let delta = 1.0 / side as f64;
    let words = side.div_ceil(64) as usize;
    let spans: Vec<(u64, u64)> = strips.iter().map(|s| s.columns(delta, side)).collect();
    (0..side)
        .into_par_iter()
        .map_init(
            || vec![0u64; words],
            |rows, i| {
                rows.fill(0);
                for (s, &(c_lo, c_hi)) in strips.iter().zip(&spans) {
                    if i >= c_lo && i < c_hi {
                        if let Some((lo, hi)) = s.rows(i, delta, side) {
                            set_range(rows, lo, hi);
                        }
                    }
                }
                visit(i, rows)
            },
        )
        .collect()
}

fn check_resolution(j: u32) -> Result<()> {
    if j > MAX_RESOLUTION {
        return Err(Error::Resource(format!("resolution 2^-{j} finer than 2^-{MAX_RESOLUTION}")));
    }
    Ok(())
}

/// Occupied dyadic boxes at scale `2^-j`, row-major with `y` as the row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoverBitmap {
    pub j: u32,
    bits: Vec<u64>,
}

impl CoverBitmap {
    fn empty(j: u32) -> Self {
        let cells = 1u64 << (2 * j);
        Self {
            j,
            bits: vec![0; cells.div_ceil(64) as usize],
        }
    }

    pub fn side(&self) -> u64 {
        1 << self.j
    }

    pub fn get(&self, col: u64, row: u64) -> bool {
        let idx = row * self.side() + col;
        self.bits[(idx / 64) as usize] >> (idx % 64) & 1 == 1
    }

    fn set(&mut self, col: u64, row: u64) {
        let idx = row * self.side() + col;
        self.bits[(idx / 64) as usize] |= 1 << (idx % 64);
    }

    pub fn count(&self) -> u64 {
        self.bits.iter().map(|w| w.count_ones() as u64).sum()
    }

    pub fn occupancy(&self) -> f64 {
        self.count() as f64 / (self.side() * self.side()) as f64
    }

    /// True when every box occupied here is occupied in `other`.
    pub fn is_subset_of(&self, other: &Self) -> bool {
        self.j == other.j && self.bits.iter().zip(&other.bits).all(|(a, b)| a & !b == 0)
    }

    fn or_with(&mut self, other: &Self) {
        for (a, b) in self.bits.iter_mut().zip(&other.bits) {
            *a |= b;
        }
    }
}

/// Boxes at scale `2^-j` meeting some strip of a pair with `H/2 < h <= H`.
/// A box is marked when its closed square meets the open strip.
pub fn truncated_cover(e: &Exponents, psi: &ApproxFunction, limit: Height, j: u32) -> Result<CoverBitmap> {
    cover_band(e, psi, limit / 2, limit, j)
}

/// [`truncated_cover`] for an arbitrary height band `(h_lo, h_hi]`.
pub fn cover_band(e: &Exponents, psi: &ApproxFunction, h_lo: Height, h_hi: Height, j: u32) -> Result<CoverBitmap> {
    if 1u64.checked_shl(2 * j).map_or(true, |cells| cells > MAX_BITMAP_BITS) {
        return Err(Error::Resource(format!("bitmap at scale 2^-{j} exceeds 2^32 bits")));
    }
    let strips = band_strips(e, psi, h_lo, h_hi)?;
    let chunk_cols = 64u64.min(1 << j);
    let chunks = (1u64 << j) / chunk_cols;
    // per-worker bitmaps over column chunks, merged by OR
    let strips = &strips;
    let parts: Vec<CoverBitmap> = (0..chunks)
        .into_par_iter()
        .fold(
            || CoverBitmap::empty(j),
            |mut bm, chunk| {
                let side = 1u64 << j;
                let delta = 1.0 / side as f64;
                for i in chunk * chunk_cols..(chunk + 1) * chunk_cols {
                    for s in strips.iter() {
                        let (c_lo, c_hi) = s.columns(delta, side);
                        if i < c_lo || i >= c_hi {
                            continue;
                        }
                        if let Some((lo, hi)) = s.rows(i, delta, side) {
                            for k in lo..hi {
                                bm.set(i, k);
                            }
                        }
                    }
                }
                bm
            },
        )
        .collect();
    let mut out = CoverBitmap::empty(j);
    for p in &parts {
        out.or_with(p);
    }
    Ok(out)
}

/// Number of occupied boxes at scale `2^-j` for the band `(h_lo, h_hi]`, without a bitmap.
pub fn count_band(e: &Exponents, psi: &ApproxFunction, h_lo: Height, h_hi: Height, j: u32) -> Result<u64> {
    check_resolution(j)?;
    let strips = band_strips(e, psi, h_lo, h_hi)?;
    let per_col = rasterize(&strips, j, |_, rows| rows.iter().map(|w| w.count_ones() as u64).sum::<u64>());
    Ok(per_col.into_iter().sum())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoxCountReport {
    pub tau: f64,
    /// Scales `j` with a non-empty height band.
    pub scales: Vec<u32>,
    pub resolutions: Vec<f64>,
    /// Height band `(lo, hi]` used at each scale.
    pub bands: Vec<(u64, u64)>,
    pub counts: Vec<u64>,
    pub slope: f64,
    /// First and last scale of the least-squares window.
    pub window: (u32, u32),
    pub formula: f64,
    pub in_hypothesis: bool,
}

/// Height band whose strip widths `psi(h)/h = h^-(tau+1)` fall in `(2^-(j+1), 2^-j]`.
pub fn matched_band(tau: f64, j: u32) -> (Height, Height) {
    let edge = |t: f64| 2f64.powf(t / (tau + 1.0));
    // h >= 2^(j/(tau+1)) and h < 2^((j+1)/(tau+1))
    let lo = edge(j as f64).ceil() as Height;
    let hi_excl = edge(j as f64 + 1.0);
    let hi = if hi_excl.fract() == 0.0 { hi_excl as Height - 1 } else { hi_excl.floor() as Height };
    (lo.saturating_sub(1), hi)
}

/// Box-counting dimension of the natural cover of `W` for `psi(r) = r^-tau`.
///
/// At scale `2^-j` the cover consists of the strips whose width `psi(h)/h` is
/// comparable to `2^-j`. The slope of `ln N` against `j ln 2` is fitted over the
/// non-empty scales after dropping the two coarsest and the finest.
pub fn estimate_dimension(e: &Exponents, tau: f64, j_max: u32) -> Result<BoxCountReport> {
    let psi = ApproxFunction::power_law(tau)?;
    check_resolution(j_max)?;
    let mut scales = Vec::new();
    let mut bands = Vec::new();
    let mut counts = Vec::new();
    for j in 0..=j_max {
        let (lo, hi) = matched_band(tau, j);
        if hi <= lo {
            continue;
        }
        let n = count_band(e, &psi, lo, hi, j)?;
        if n == 0 {
            continue;
        }
        scales.push(j);
        bands.push((lo as u64, hi as u64));
        counts.push(n);
    }
    if scales.len() < 6 {
        return Err(Error::invalid(format!(
            "only {} non-empty scales up to 2^-{j_max}; the fit needs at least 3 after trimming",
            scales.len()
        )));
    }
    let fit = &scales[2..scales.len() - 1];
    let points: Vec<(f64, f64)> = (2..scales.len() - 1)
        .map(|k| (scales[k] as f64 * std::f64::consts::LN_2, (counts[k] as f64).ln()))
        .collect();
    let slope = ls_slope(&points).clamp(0.0, 2.0);
    let regime = regime_classify(e);
    Ok(BoxCountReport {
        tau,
        resolutions: scales.iter().map(|&j| 2f64.powi(-(j as i32))).collect(),
        window: (fit[0], *fit.last().expect("non-empty")),
        scales,
        bands,
        counts,
        slope,
        formula: dimension_formula(e, tau)?,
        in_hypothesis: regime.hausdorff_applicable && tau > 1.0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SeriesTrend {
    Growing,
    Saturating,
}

/// Growth rate of the last two dyadic blocks against the two before them, in
/// powers of two per block.
pub fn block_growth(blocks: &[f64]) -> Result<f64> {
    if blocks.len() < 4 {
        return Err(Error::invalid("need at least four dyadic blocks"));
    }
    let n = blocks.len();
    let recent = blocks[n - 1] + blocks[n - 2];
    let earlier = blocks[n - 3] + blocks[n - 4];
    if !(earlier > 0.0) {
        return Err(Error::Internal("empty dyadic blocks".into()));
    }
    Ok((recent / earlier).log2() / 2.0)
}

/// Sign of the block growth of the Hausdorff sum with exponent `s`.
pub fn hausdorff_trend(e: &Exponents, psi: &ApproxFunction, s: f64, h_max: Height) -> Result<(SeriesTrend, f64)> {
    let series = hausdorff_sum_partial(e, psi, &DimensionFunction::new(s)?, h_max)?;
    let g = block_growth(&series.dyadic_blocks())?;
    let trend = if g < 0.0 { SeriesTrend::Saturating } else { SeriesTrend::Growing };
    Ok((trend, g))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriticalExponent {
    pub s_star: f64,
    pub formula: f64,
    /// Bracketing interval at termination.
    pub bracket: (f64, f64),
    pub evaluations: u32,
    #[serde(serialize_with = "crate::forms::serialize_height")]
    pub h_max: Height,
}

/// Transition point in `s` of the Hausdorff sums for `psi(r) = r^-tau`, by bisection.
pub fn critical_exponent_from_sums(e: &Exponents, psi: &ApproxFunction, h_max: Height) -> Result<CriticalExponent> {
    let tau = psi.power_law_exponent().ok_or_else(|| {
        Error::Unsupported("critical exponent is only computed for power-law psi".into())
    })?;
    if h_max < 16 {
        return Err(Error::invalid("H_max must be at least 16"));
    }
    let formula = dimension_formula(e, tau)?;
    let mut evaluations = 1;
    if hausdorff_trend(e, psi, 2.0, h_max)?.0 == SeriesTrend::Growing {
        return Ok(CriticalExponent {
            s_star: 2.0,
            formula,
            bracket: (2.0, 2.0),
            evaluations,
            h_max,
        });
    }
    // the sum at s -> 1 is sum h^(1/p) over all pairs, which always grows
    let (mut lo, mut hi) = (1.0, 2.0);
    while hi - lo > S_TOLERANCE {
        let mid = 0.5 * (lo + hi);
        evaluations += 1;
        match hausdorff_trend(e, psi, mid, h_max)?.0 {
            SeriesTrend::Growing => lo = mid,
            SeriesTrend::Saturating => hi = mid,
        }
    }
    Ok(CriticalExponent {
        s_star: 0.5 * (lo + hi),
        formula,
        bracket: (lo, hi),
        evaluations,
        h_max,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ex(n: u32, m: u32, p: u32) -> Exponents {
        Exponents::new(n, m, p).unwrap()
    }

    fn const_psi(v: f64, h_max: u64) -> ApproxFunction {
        ApproxFunction::tabulated(vec![(1, v), (h_max, v)]).unwrap()
    }

    /// Box `(i, k)` meets the strip iff the form's range over the closed box
    /// overlaps `(C - w, C + w)`, checked from the four corners.
    fn box_meets(s: &RasterStrip, i: u64, k: u64, delta: f64) -> bool {
        let corners = [(i, k), (i + 1, k), (i, k + 1), (i + 1, k + 1)]
            .map(|(x, y)| s.a * x as f64 * delta + s.b * y as f64 * delta);
        let lo = corners.iter().cloned().fold(f64::MAX, f64::min);
        let hi = corners.iter().cloned().fold(f64::MIN, f64::max);
        lo < s.c + s.w && hi > s.c - s.w
    }

    #[test]
    fn rasterisation_matches_corner_oracle() {
        let e = ex(1, 1, 1);
        let psi = ApproxFunction::power_law(1.0).unwrap();
        let j = 5;
        let bm = cover_band(&e, &psi, 2, 6, j).unwrap();
        let strips = band_strips(&e, &psi, 2, 6).unwrap();
        let delta = 1.0 / 32.0;
        for i in 0..32 {
            for k in 0..32 {
                let want = strips.iter().any(|s| box_meets(s, i, k, delta));
                assert_eq!(bm.get(i, k), want, "box ({i}, {k})");
            }
        }
        assert_eq!(count_band(&e, &psi, 2, 6, j).unwrap(), bm.count());
    }

    #[test]
    fn cover_examples() {
        let e = ex(1, 1, 1);
        // squares skip the band (1, 3]
        let psi = ApproxFunction::power_law(1.0).unwrap();
        assert_eq!(truncated_cover(&ex(2, 2, 1), &psi, 3, 4).unwrap().count(), 0);
        let wide = const_psi(0.4, 2);
        let bm = truncated_cover(&e, &wide, 2, 3).unwrap();
        assert!(bm.occupancy() > 0.5, "{}", bm.occupancy());
        assert!(matches!(truncated_cover(&e, &wide, 2, 17), Err(Error::Resource(_))));
    }

    #[test]
    fn cover_monotone_in_psi() {
        let e = ex(2, 2, 2);
        let thin = const_psi(0.01, 400);
        let thick = const_psi(0.05, 400);
        for j in [4, 6, 8] {
            let a = truncated_cover(&e, &thin, 400, j).unwrap();
            let b = truncated_cover(&e, &thick, 400, j).unwrap();
            assert!(a.is_subset_of(&b));
        }
    }

    #[test]
    fn cover_deterministic_across_pools() {
        let e = ex(1, 1, 1);
        let psi = ApproxFunction::power_law(2.0).unwrap();
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let many = rayon::ThreadPoolBuilder::new().num_threads(8).build().unwrap();
        let a = one.install(|| truncated_cover(&e, &psi, 64, 9).unwrap());
        let b = many.install(|| truncated_cover(&e, &psi, 64, 9).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn matched_band_brackets_widths() {
        for tau in [1.5, 2.0, 3.0] {
            for j in 0..30 {
                let (lo, hi) = matched_band(tau, j);
                for h in lo + 1..=hi {
                    let width = (h as f64).powf(-(tau + 1.0));
                    assert!(width <= 2f64.powi(-(j as i32)) * (1.0 + 1e-12));
                    assert!(width > 2f64.powi(-(j as i32 + 1)) * (1.0 - 1e-12));
                }
            }
        }
    }

    #[test]
    fn box_dimension_tracks_formula() {
        let e = ex(1, 1, 1);
        let r = estimate_dimension(&e, 3.0, 12).unwrap();
        assert!((r.slope - 1.75).abs() <= 0.2, "{r:?}");
        assert!(r.in_hypothesis);
        assert!(r.counts.windows(2).all(|w| w[0] <= w[1]));
        let r = estimate_dimension(&e, 1.0, 10).unwrap();
        assert!((r.slope - 2.0).abs() <= 0.1, "{r:?}");
        assert!(estimate_dimension(&e, 50.0, 12).is_err());
    }

    #[test]
    fn box_slope_agrees_with_sum_exponent() {
        for (e, tau, j_max) in [
            (ex(1, 1, 1), 1.5, 12),
            (ex(1, 1, 1), 2.0, 12),
            (ex(1, 1, 1), 3.0, 14),
            (ex(2, 2, 2), 1.5, 16),
            (ex(2, 2, 2), 2.0, 16),
            (ex(2, 2, 2), 3.0, 20),
        ] {
            let slope = estimate_dimension(&e, tau, j_max).unwrap().slope;
            let psi = ApproxFunction::power_law(tau).unwrap();
            let s = critical_exponent_from_sums(&e, &psi, 1 << 18).unwrap().s_star;
            assert!((slope - s).abs() <= 0.25, "{e:?} tau={tau}: slope {slope}, s* {s}");
        }
    }

    #[test]
    fn critical_exponent_examples() {
        let psi = ApproxFunction::power_law(2.0).unwrap();
        let c = critical_exponent_from_sums(&ex(2, 2, 2), &psi, 1 << 20).unwrap();
        assert!((c.s_star - 1.5).abs() <= 0.05, "{c:?}");
        let c = critical_exponent_from_sums(&ex(1, 1, 1), &psi, 1 << 16).unwrap();
        assert!(c.s_star >= 1.95, "{c:?}");
        let table = ApproxFunction::tabulated(vec![(1, 1.0)]).unwrap();
        assert!(matches!(
            critical_exponent_from_sums(&ex(1, 1, 1), &table, 1 << 10),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn trend_at_two_matches_lebesgue_classifier() {
        for (e, tau) in [(ex(1, 1, 1), 1.5), (ex(1, 1, 1), 3.0), (ex(2, 2, 2), 0.3), (ex(2, 2, 2), 1.0)] {
            let psi = ApproxFunction::power_law(tau).unwrap();
            let (trend, _) = hausdorff_trend(&e, &psi, 2.0, 1 << 18).unwrap();
            let (class, _) = crate::forms::convergence_classify_power_law(&e, tau).unwrap();
            assert_eq!(trend == SeriesTrend::Growing, class == crate::forms::SumClass::Divergent);
        }
    }

    #[test]
    fn critical_exponent_monotone_in_tau() {
        let e = ex(2, 2, 2);
        let mut prev = f64::INFINITY;
        for tau in [0.5, 1.0, 1.5, 2.0, 3.0, 5.0] {
            let psi = ApproxFunction::power_law(tau).unwrap();
            let s = critical_exponent_from_sums(&e, &psi, 1 << 16).unwrap().s_star;
            assert!(s <= prev + S_TOLERANCE, "tau={tau}: {s} after {prev}");
            prev = s;
        }
    }
}
