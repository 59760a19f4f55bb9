//! Resonance scan for the wave-type operator `d^p/dt^p - d^n/dx1^n - d^m/dx2^m` on a
//! torus with periods `(alpha, beta, gamma)`: small values of `|a^n u + b^m v - c^p|`.

use crate::enumerate::nearest_power_residual_in;
use crate::error::{Error, Result};
use crate::forms::Exponents;
use num_integer::Roots;
use num_rational::Ratio;
use num_traits::{CheckedAdd, CheckedDiv, CheckedMul, CheckedSub, Signed, Zero};
use rayon::prelude::*;
use serde::ser::SerializeStruct;
use serde::{Serialize, Serializer};
use std::cmp::Ordering;

pub type Rational = Ratio<i128>;

/// Upper bound on the number of `(a, b)` pairs one scan may visit.
pub const MAX_SCAN_PAIRS: u64 = 1 << 34;

fn overflow(what: &str) -> Error {
    Error::range(format!("{what} overflows 128-bit rational arithmetic"))
}

fn to_f64(r: &Rational) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

fn rational_pow(r: &Rational, k: u32) -> Result<Rational> {
    let mut acc = Rational::from_integer(1);
    for _ in 0..k {
        acc = acc.checked_mul(r).ok_or_else(|| overflow("power"))?;
    }
    Ok(acc)
}

fn exact_sqrt(q: &Rational) -> Option<Rational> {
    if q.is_negative() {
        return None;
    }
    let (n, d) = (*q.numer(), *q.denom());
    let (rn, rd) = (n.sqrt(), d.sqrt());
    (rn * rn == n && rd * rd == d).then(|| Rational::new(rn, rd))
}

/// Parses `"3"`, `"-1.25"` or `"7/4"` as an exact rational.
pub fn parse_rational(s: &str) -> Result<Rational> {
    let s = s.trim();
    let bad = || Error::invalid(format!("cannot parse '{s}' as a rational number"));
    if let Some((num, den)) = s.split_once('/') {
        let num: i128 = num.trim().parse().map_err(|_| bad())?;
        let den: i128 = den.trim().parse().map_err(|_| bad())?;
        if den == 0 {
            return Err(Error::invalid(format!("zero denominator in '{s}'")));
        }
        return Ok(Rational::new(num, den));
    }
    let (neg, body) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s.strip_prefix('+').unwrap_or(s)),
    };
    let (int, frac) = body.split_once('.').unwrap_or((body, ""));
    if int.is_empty() && frac.is_empty() || !int.chars().chain(frac.chars()).all(|c| c.is_ascii_digit()) {
        return Err(bad());
    }
    let digits = format!("{int}{frac}");
    let num: i128 = digits.parse().map_err(|_| Error::range(format!("'{s}' has too many digits")))?;
    let den = 10i128
        .checked_pow(frac.len() as u32)
        .ok_or_else(|| Error::range(format!("'{s}' has too many decimals")))?;
    let r = Rational::new(num, den);
    Ok(if neg { -r } else { r })
}

/// A positive real kept through its square, so square roots of rationals stay exact.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Period {
    square: Rational,
}

impl Period {
    /// `"1.5"`, `"3/2"` or `"sqrt:2"`.
    pub fn parse(s: &str) -> Result<Self> {
        let square = match s.trim().strip_prefix("sqrt:") {
            Some(rest) => parse_rational(rest)?,
            None => {
                let r = parse_rational(s)?;
                if !r.is_positive() {
                    return Err(Error::invalid(format!("'{s}' must be positive")));
                }
                r.checked_mul(&r).ok_or_else(|| overflow("square"))?
            }
        };
        Self::from_square(square)
    }

    pub fn from_square(square: Rational) -> Result<Self> {
        if !square.is_positive() {
            return Err(Error::invalid("periods and ratios must be positive"));
        }
        Ok(Self { square })
    }

    pub fn rational(r: Rational) -> Result<Self> {
        if !r.is_positive() {
            return Err(Error::invalid("periods and ratios must be positive"));
        }
        Self::from_square(r.checked_mul(&r).ok_or_else(|| overflow("square"))?)
    }

    pub fn value(&self) -> f64 {
        to_f64(&self.square).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Coefficient {
    Exact(Rational),
    Real(f64),
}

impl Coefficient {
    fn from_period(p: &Period) -> Self {
        match exact_sqrt(&p.square) {
            Some(r) => Coefficient::Exact(r),
            None => Coefficient::Real(p.value()),
        }
    }

    pub fn value(&self) -> f64 {
        match self {
            Coefficient::Exact(r) => to_f64(r),
            Coefficient::Real(x) => *x,
        }
    }

    pub fn exact(&self) -> Option<Rational> {
        match self {
            Coefficient::Exact(r) => Some(*r),
            Coefficient::Real(_) => None,
        }
    }
}

impl Serialize for Coefficient {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("Coefficient", 2)?;
        st.serialize_field("value", &self.value())?;
        st.serialize_field("exact", &self.exact().map(|r| r.to_string()))?;
        st.end()
    }
}

/// Exponents and the two ratios `u`, `v` of the resonance condition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WaveOperatorSpec {
    pub exponents: Exponents,
    pub u: Coefficient,
    pub v: Coefficient,
}

impl WaveOperatorSpec {
    /// `u = gamma^p / alpha^n`, `v = gamma^p / beta^m`.
    pub fn from_periods(e: Exponents, alpha: Period, beta: Period, gamma: Period) -> Result<Self> {
        let g = rational_pow(&gamma.square, e.p())?;
        let ratio = |x: &Period, k: u32| -> Result<Period> {
            let d = rational_pow(&x.square, k)?;
            Period::from_square(g.checked_div(&d).ok_or_else(|| overflow("ratio"))?)
        };
        Ok(Self::from_ratios(e, ratio(&alpha, e.n())?, ratio(&beta, e.m())?))
    }

    /// The classical operator with `n = m = p = 2`.
    pub fn classical(alpha: Period, beta: Period, gamma: Period) -> Result<Self> {
        Self::from_periods(Exponents::new(2, 2, 2)?, alpha, beta, gamma)
    }

    pub fn from_ratios(e: Exponents, u: Period, v: Period) -> Self {
        Self {
            exponents: e,
            u: Coefficient::from_period(&u),
            v: Coefficient::from_period(&v),
        }
    }

    pub fn is_exact(&self) -> bool {
        self.u.exact().is_some() && self.v.exact().is_some()
    }
}

fn signed_pow(x: i64, k: u32) -> Result<i128> {
    (x as i128).checked_pow(k).ok_or_else(|| Error::range(format!("{x}^{k} overflows")))
}

fn exact_form(spec: &WaveOperatorSpec, an: i128, bm: i128) -> Option<Result<Rational>> {
    let (u, v) = (spec.u.exact()?, spec.v.exact()?);
    let s = u
        .checked_mul(&Rational::from_integer(an))
        .and_then(|x| v.checked_mul(&Rational::from_integer(bm)).and_then(|y| x.checked_add(&y)));
    Some(s.ok_or_else(|| overflow("a^n u + b^m v")))
}

fn exact_residual_of(s: &Rational, cp: i128) -> Result<Rational> {
    s.checked_sub(&Rational::from_integer(cp))
        .map(|r| r.abs())
        .ok_or_else(|| overflow("residual"))
}

fn real_residual_of(spec: &WaveOperatorSpec, an: i128, bm: i128, cp: i128) -> f64 {
    let x = (an as f64).mul_add(spec.u.value(), bm as f64 * spec.v.value());
    (x - cp as f64).abs()
}

fn check_pair(a: i64, b: i64) -> Result<()> {
    if a == 0 && b == 0 {
        return Err(Error::invalid("(a, b) must not be (0, 0)"));
    }
    Ok(())
}

/// `|a^n u + b^m v - c^p|` in exact arithmetic when both ratios are rational.
pub fn resonance_residual_exact(spec: &WaveOperatorSpec, a: i64, b: i64, c: i64) -> Result<Option<Rational>> {
    check_pair(a, b)?;
    let e = &spec.exponents;
    let (an, bm, cp) = (signed_pow(a, e.n())?, signed_pow(b, e.m())?, signed_pow(c, e.p())?);
    match exact_form(spec, an, bm) {
        Some(s) => Ok(Some(exact_residual_of(&s?, cp)?)),
        None => Ok(None),
    }
}

/// `|a^n u + b^m v - c^p|`.
pub fn resonance_residual(spec: &WaveOperatorSpec, a: i64, b: i64, c: i64) -> Result<f64> {
    if let Some(r) = resonance_residual_exact(spec, a, b, c)? {
        return Ok(to_f64(&r));
    }
    let e = &spec.exponents;
    let (an, bm, cp) = (signed_pow(a, e.n())?, signed_pow(b, e.m())?, signed_pow(c, e.p())?);
    Ok(real_residual_of(spec, an, bm, cp))
}

fn serialize_exact<S: Serializer>(r: &Option<Rational>, s: S) -> std::result::Result<S::Ok, S::Error> {
    r.map(|r| r.to_string()).serialize(s)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Resonance {
    pub a: i64,
    pub b: i64,
    pub c: i64,
    pub residual: f64,
    /// Exact residual as `num/den`, for rational ratios.
    #[serde(serialize_with = "serialize_exact")]
    pub exact: Option<Rational>,
}

impl Resonance {
    fn key(&self) -> (i64, i64, i64) {
        (self.a, self.b, self.c)
    }

    fn cmp_residual(&self, other: &Self) -> Ordering {
        match (&self.exact, &other.exact) {
            (Some(x), Some(y)) => x.cmp(y),
            _ => self.residual.total_cmp(&other.residual),
        }
    }

    /// Smaller residual first, then the lexicographically smaller triple.
    fn better_than(&self, other: &Self) -> bool {
        self.cmp_residual(other).then(self.key().cmp(&other.key())) == Ordering::Less
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TauHits {
    pub tau: f64,
    /// Pairs with residual below `max(|a|,|b|)^-tau`.
    pub count: u64,
    /// The same count restricted to `max(|a|,|b|)` in `(H/2, H]`.
    pub top_band: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ObstructionReport {
    #[serde(rename = "H")]
    pub h: u64,
    pub spec: WaveOperatorSpec,
    pub best: Resonance,
    /// Rounding bound on `best.residual` when a ratio is irrational.
    pub error_bar: Option<f64>,
    pub hits: Vec<TauHits>,
    pub exact_resonance: bool,
    pub pairs_scanned: u64,
}

fn axis(h: u64, k: u32) -> Vec<i64> {
    let h = h as i64;
    let mut out: Vec<i64> = if k % 2 == 1 { (-h..=-1).collect() } else { Vec::new() };
    out.extend(1..=h);
    out
}

/// Best `c` for a fixed `(a, b)`: `c` in `[0, H]`, or `[-H, H]` for odd `p`.
fn best_c(spec: &WaveOperatorSpec, a: i64, b: i64, an: i128, bm: i128, h: u64) -> Result<Resonance> {
    let p = spec.exponents.p();
    let target = (an as f64).mul_add(spec.u.value(), bm as f64 * spec.v.value());
    let c0 = if target >= 0.0 {
        nearest_power_residual_in(target, p, 0, h)?.0 as i64
    } else if p % 2 == 1 {
        -(nearest_power_residual_in(-target, p, 0, h)?.0 as i64)
    } else {
        0
    };
    let (c_lo, c_hi) = if p % 2 == 1 { (-(h as i64), h as i64) } else { (0, h as i64) };
    let mut best: Option<Resonance> = None;
    match exact_form(spec, an, bm) {
        Some(s) => {
            let s = s?;
            for c in (c0 - 1).max(c_lo)..=(c0 + 1).min(c_hi) {
                let r = exact_residual_of(&s, signed_pow(c, p)?)?;
                let cand = Resonance { a, b, c, residual: to_f64(&r), exact: Some(r) };
                if best.map_or(true, |bst| cand.better_than(&bst)) {
                    best = Some(cand);
                }
            }
        }
        None => {
            let residual = real_residual_of(spec, an, bm, signed_pow(c0, p)?);
            best = Some(Resonance { a, b, c: c0, residual, exact: None });
        }
    }
    best.ok_or_else(|| Error::Internal("no admissible c".into()))
}

struct RowScan {
    best: Option<Resonance>,
    hits: Vec<(u64, u64)>,
}

fn scan_row(spec: &WaveOperatorSpec, a: i64, bs: &[i64], h: u64, taus: &[f64]) -> Result<RowScan> {
    let e = &spec.exponents;
    let an = signed_pow(a, e.n())?;
    let mut row = RowScan { best: None, hits: vec![(0, 0); taus.len()] };
    for &b in bs {
        let r = best_c(spec, a, b, an, signed_pow(b, e.m())?, h)?;
        let top = a.unsigned_abs().max(b.unsigned_abs());
        for (slot, &tau) in row.hits.iter_mut().zip(taus) {
            if r.residual < (top as f64).powf(-tau) {
                slot.0 += 1;
                if 2 * top > h {
                    slot.1 += 1;
                }
            }
        }
        if row.best.map_or(true, |bst| r.better_than(&bst)) {
            row.best = Some(r);
        }
    }
    Ok(row)
}

/// Exhaustive scan of `a, b` in `[1, H]` (both signs for odd exponents) with the
/// nearest admissible `c`, reporting the minimum residual and hit counts per `tau`.
pub fn scan_obstruction(spec: &WaveOperatorSpec, h: u64, taus: &[f64]) -> Result<ObstructionReport> {
    if h == 0 {
        return Err(Error::invalid("H must be at least 1"));
    }
    if taus.is_empty() {
        return Err(Error::invalid("the tau grid must not be empty"));
    }
    if let Some(t) = taus.iter().find(|t| !(**t > 1.0) || !t.is_finite()) {
        return Err(Error::invalid(format!("tau must be finite and > 1, got {t}")));
    }
    let e = &spec.exponents;
    let (xs, ys) = (axis(h, e.n()), axis(h, e.m()));
    let pairs = xs.len() as u64 * ys.len() as u64;
    if pairs > MAX_SCAN_PAIRS {
        return Err(Error::Resource(format!("{pairs} pairs exceed the scan limit {MAX_SCAN_PAIRS}")));
    }
    let rows: Vec<RowScan> = xs
        .par_iter()
        .map(|&a| scan_row(spec, a, &ys, h, taus))
        .collect::<Result<_>>()?;
    let mut best: Option<Resonance> = None;
    let mut hits = vec![(0u64, 0u64); taus.len()];
    for row in rows {
        for (acc, x) in hits.iter_mut().zip(&row.hits) {
            acc.0 += x.0;
            acc.1 += x.1;
        }
        if let Some(r) = row.best {
            if best.map_or(true, |bst| r.better_than(&bst)) {
                best = Some(r);
            }
        }
    }
    let best = best.ok_or_else(|| Error::Internal("empty scan".into()))?;
    let error_bar = (!spec.is_exact()).then(|| {
        let mag = |x: i64, k: u32, w: f64| (x.unsigned_abs() as f64).powi(k as i32) * w;
        4.0 * f64::EPSILON
            * (mag(best.a, e.n(), spec.u.value()) + mag(best.b, e.m(), spec.v.value()) + mag(best.c, e.p(), 1.0))
    });
    Ok(ObstructionReport {
        h,
        spec: *spec,
        exact_resonance: best.exact.map_or(false, |r| r.is_zero()),
        best,
        error_bar,
        hits: taus
            .iter()
            .zip(hits)
            .map(|(&tau, (count, top_band))| TauHits { tau, count, top_band })
            .collect(),
        pairs_scanned: pairs,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum AdvisoryStatus {
    ObstructionPresent,
    NearResonances,
    NoObstructionDetected,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolubilityAdvisory {
    pub status: AdvisoryStatus,
    pub tau: f64,
    #[serde(rename = "H")]
    pub h: u64,
    pub hits: u64,
    pub top_band_hits: u64,
    pub exact_resonance: bool,
    pub best: Resonance,
    /// Exponent above which almost every `(u, v)` admits only finitely many hits.
    pub measure_zero_threshold: f64,
    pub text: String,
    pub caveat: String,
    pub measure_zero_note: String,
}

/// Finite-scan reading of the resonance condition at a single `tau`.
pub fn solubility_advisory(spec: &WaveOperatorSpec, h: u64, tau: f64) -> Result<SolubilityAdvisory> {
    let report = scan_obstruction(spec, h, &[tau])?;
    let hits = report.hits[0];
    let best = report.best;
    let (status, text) = if report.exact_resonance {
        (
            AdvisoryStatus::ObstructionPresent,
            format!(
                "obstruction present: exact resonance a^n u + b^m v = c^p at (a, b, c) = ({}, {}, {})",
                best.a, best.b, best.c
            ),
        )
    } else if hits.top_band > 0 {
        (
            AdvisoryStatus::NearResonances,
            format!(
                "{} near-resonances with residual < max(|a|,|b|)^-{tau} for max(|a|,|b|) in ({}, {h}]",
                hits.top_band,
                h / 2
            ),
        )
    } else {
        (AdvisoryStatus::NoObstructionDetected, format!("no obstruction detected up to H = {h}"))
    };
    let e = &spec.exponents;
    let threshold = (e.max_exp() as f64 * (e.reciprocal_sum() - 1.0)).max(0.0);
    Ok(SolubilityAdvisory {
        status,
        tau,
        h,
        hits: hits.count,
        top_band_hits: hits.top_band,
        exact_resonance: report.exact_resonance,
        best,
        measure_zero_threshold: threshold,
        text,
        caveat: format!(
            "finite scan up to H = {h}: a heuristic indication only, never a proof of solubility or of an obstruction"
        ),
        measure_zero_note: format!(
            "for almost every pair of ratios (u, v) the inequality |a^n u + b^m v - c^p| < max(|a|,|b|)^-tau \
             has only finitely many solutions for every tau > {threshold}, because the corresponding volume sum converges"
        ),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn per(s: &str) -> Period {
        Period::parse(s).unwrap()
    }

    fn ratios(n: u32, m: u32, p: u32, u: &str, v: &str) -> WaveOperatorSpec {
        WaveOperatorSpec::from_ratios(Exponents::new(n, m, p).unwrap(), per(u), per(v))
    }

    #[test]
    fn parsing() {
        assert_eq!(parse_rational("1.5").unwrap(), Rational::new(3, 2));
        assert_eq!(parse_rational("-0.25").unwrap(), Rational::new(-1, 4));
        assert_eq!(parse_rational("6/4").unwrap(), Rational::new(3, 2));
        assert!(parse_rational("1e3").is_err());
        assert!(parse_rational("1/0").is_err());
        assert!(Period::parse("-1").is_err());
        assert!(Period::parse("sqrt:0").is_err());
        assert_eq!(Coefficient::from_period(&per("sqrt:9/4")), Coefficient::Exact(Rational::new(3, 2)));
        assert!(matches!(Coefficient::from_period(&per("sqrt:2")), Coefficient::Real(_)));
    }

    #[test]
    fn residual_examples() {
        let one = per("1");
        let classical = WaveOperatorSpec::classical(one, one, one).unwrap();
        assert_eq!(resonance_residual_exact(&classical, 3, 4, 5).unwrap(), Some(Rational::zero()));
        assert_eq!(resonance_residual(&ratios(2, 2, 2, "2", "2"), 1, 1, 2).unwrap(), 0.0);
        let surd = ratios(2, 2, 2, "sqrt:2", "sqrt:2");
        let r = resonance_residual(&surd, 6, 3, 8).unwrap();
        assert!((r - (64.0 - 45.0 * 2f64.sqrt())).abs() < 1e-12);
        assert!((r - 0.3604).abs() < 1e-4);
        assert!(resonance_residual(&surd, 0, 0, 1).is_err());
    }

    #[test]
    fn periods_scale_covariantly() {
        let base = WaveOperatorSpec::classical(per("3"), per("1.5"), per("1")).unwrap();
        let scaled = WaveOperatorSpec::classical(per("3"), per("1.5"), per("2")).unwrap();
        let four = Rational::from_integer(4);
        assert_eq!(scaled.u.exact().unwrap(), base.u.exact().unwrap() * four);
        assert_eq!(scaled.v.exact().unwrap(), base.v.exact().unwrap() * four);
        let common = WaveOperatorSpec::classical(per("6"), per("3"), per("2")).unwrap();
        assert_eq!(common.u, base.u);
        assert_eq!(common.v, base.v);
        let surd = WaveOperatorSpec::classical(per("1"), per("1"), per("sqrt:2")).unwrap();
        assert_eq!(surd.u, Coefficient::Exact(Rational::from_integer(2)));
    }

    #[test]
    fn scan_examples() {
        let one = per("1");
        let r = scan_obstruction(&WaveOperatorSpec::classical(one, one, one).unwrap(), 5, &[2.0]).unwrap();
        assert!(r.exact_resonance);
        assert_eq!((r.best.a, r.best.b, r.best.c), (3, 4, 5));
        assert_eq!(r.error_bar, None);

        let surd = ratios(2, 2, 2, "sqrt:2", "sqrt:2");
        let r = scan_obstruction(&surd, 10, &[2.0, 3.0]).unwrap();
        assert!((r.best.residual - 0.3604).abs() <= 1e-3, "{r:?}");
        let mut ab = [r.best.a, r.best.b];
        ab.sort();
        assert_eq!((ab, r.best.c), ([3, 6], 8));
        assert!(!r.exact_resonance);
        assert!(r.error_bar.unwrap() < 1e-10);
        assert!(r.hits[0].count >= r.hits[1].count);
    }

    fn oracle(spec: &WaveOperatorSpec, h: u64) -> (i64, i64, i64, Rational) {
        let e = spec.exponents;
        let cs: Vec<i64> = if e.p() % 2 == 1 { (-(h as i64)..=h as i64).collect() } else { (0..=h as i64).collect() };
        let mut best: Option<(Rational, (i64, i64, i64))> = None;
        for &a in &axis(h, e.n()) {
            for &b in &axis(h, e.m()) {
                for &c in &cs {
                    let r = resonance_residual_exact(spec, a, b, c).unwrap().unwrap();
                    if best.map_or(true, |(br, bk)| (r, (a, b, c)) < (br, bk)) {
                        best = Some((r, (a, b, c)));
                    }
                }
            }
        }
        let (r, (a, b, c)) = best.unwrap();
        (a, b, c, r)
    }

    #[test]
    fn scan_matches_triple_loop_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for k in 0..10 {
            let (n, m, p) = if k < 6 { (2, 2, 2) } else { (rng.gen_range(1..=3), rng.gen_range(1..=3), rng.gen_range(1..=3)) };
            let mut q = || Rational::new(rng.gen_range(1..=40), rng.gen_range(1..=12));
            let spec = WaveOperatorSpec::from_ratios(
                Exponents::new(n, m, p).unwrap(),
                Period::rational(q()).unwrap(),
                Period::rational(q()).unwrap(),
            );
            let h = if k < 6 { 50 } else { 12 };
            let r = scan_obstruction(&spec, h, &[1.5]).unwrap();
            let (a, b, c, res) = oracle(&spec, h);
            assert_eq!(r.best.exact, Some(res), "{spec:?}");
            assert_eq!((r.best.a, r.best.b, r.best.c), (a, b, c), "{spec:?}");
        }
    }

    #[test]
    fn scan_is_thread_count_invariant() {
        let spec = ratios(2, 2, 2, "sqrt:3", "1.25");
        let run = |t| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(t)
                .build()
                .unwrap()
                .install(|| scan_obstruction(&spec, 200, &[1.5, 2.0, 3.0]).unwrap())
        };
        assert_eq!(run(1), run(8));
    }

    #[test]
    fn scan_validates() {
        let spec = ratios(2, 2, 2, "1", "1");
        assert!(scan_obstruction(&spec, 0, &[2.0]).is_err());
        assert!(scan_obstruction(&spec, 5, &[]).is_err());
        assert!(scan_obstruction(&spec, 5, &[1.0]).is_err());
    }

    #[test]
    fn advisory_examples() {
        let one = per("1");
        let a = solubility_advisory(&WaveOperatorSpec::classical(one, one, one).unwrap(), 20, 2.0).unwrap();
        assert_eq!(a.status, AdvisoryStatus::ObstructionPresent);
        assert_eq!(a.measure_zero_threshold, 1.0);

        let surd = ratios(2, 2, 2, "sqrt:2", "sqrt:2");
        let a = solubility_advisory(&surd, 1000, 3.0).unwrap();
        let r = scan_obstruction(&surd, 1000, &[3.0]).unwrap();
        assert_eq!(a.hits, r.hits[0].count);
        assert_eq!(a.top_band_hits, r.hits[0].top_band);
        assert_ne!(a.status, AdvisoryStatus::ObstructionPresent);
        assert!(a.caveat.contains("never a proof"));
        assert!(a.measure_zero_note.contains("tau > 1"));
    }
}
