//! Exponent triples, approximating functions and the closed-form criteria:
//! regime classification, the Lebesgue and Hausdorff volume sums, the lower
//! order of `psi`, the dimension formula and the delta window.

use crate::error::{Error, Result};
use crate::num::{checked_pow, gcd, CompensatedSum};
use serde::{Deserialize, Serialize, Serializer};
use std::path::Path;

/// Exact height `max(a^n, b^m)`.
pub type Height = u128;

/// Largest exponent accepted for any of `n`, `m`, `p`.
pub const MAX_EXPONENT: u32 = 64;

/// Serialises integers above 2^53 as decimal strings so JSON consumers never
/// see a rounded value.
pub fn serialize_height<S: Serializer>(h: &Height, s: S) -> std::result::Result<S::Ok, S::Error> {
    if *h <= (1u128 << 53) {
        s.serialize_u64(*h as u64)
    } else {
        s.serialize_str(&h.to_string())
    }
}

pub fn serialize_heights<S: Serializer>(hs: &[Height], s: S) -> std::result::Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    struct H(Height);
    impl Serialize for H {
        fn serialize<S2: Serializer>(&self, s: S2) -> std::result::Result<S2::Ok, S2::Error> {
            serialize_height(&self.0, s)
        }
    }
    let mut seq = s.serialize_seq(Some(hs.len()))?;
    for h in hs {
        seq.serialize_element(&H(*h))?;
    }
    seq.end()
}

/// The triple `(n, m, p)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Exponents {
    n: u32,
    m: u32,
    p: u32,
}

impl Exponents {
    pub fn new(n: u32, m: u32, p: u32) -> Result<Self> {
        for (name, v) in [("n", n), ("m", m), ("p", p)] {
            if v == 0 || v > MAX_EXPONENT {
                return Err(Error::invalid(format!(
                    "exponent {name} = {v} outside 1..={MAX_EXPONENT}"
                )));
            }
        }
        Ok(Self { n, m, p })
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn m(&self) -> u32 {
        self.m
    }

    pub fn p(&self) -> u32 {
        self.p
    }

    /// `k = gcd(n, m)`.
    pub fn gcd(&self) -> u32 {
        gcd(self.n as u64, self.m as u64) as u32
    }

    /// `N = max(n, m)`.
    pub fn max_exp(&self) -> u32 {
        self.n.max(self.m)
    }

    /// `M = min(n, m)`.
    pub fn min_exp(&self) -> u32 {
        self.n.min(self.m)
    }

    /// `1/n + 1/m + 1/p`.
    pub fn reciprocal_sum(&self) -> f64 {
        1.0 / self.n as f64 + 1.0 / self.m as f64 + 1.0 / self.p as f64
    }

    pub fn pow_a(&self, a: u64) -> Result<u128> {
        checked_pow(a, self.n).ok_or_else(|| Error::range(format!("{a}^{} overflows", self.n)))
    }

    pub fn pow_b(&self, b: u64) -> Result<u128> {
        checked_pow(b, self.m).ok_or_else(|| Error::range(format!("{b}^{} overflows", self.m)))
    }

    pub fn pow_c(&self, c: u64) -> Result<u128> {
        checked_pow(c, self.p).ok_or_else(|| Error::range(format!("{c}^{} overflows", self.p)))
    }

    pub fn height(&self, a: u64, b: u64) -> Result<Height> {
        height(a, b, self)
    }
}

impl std::fmt::Display for Exponents {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({},{},{})", self.n, self.m, self.p)
    }
}

/// `h_{a,b} = max(a^n, b^m)`, computed exactly.
pub fn height(a: u64, b: u64, e: &Exponents) -> Result<Height> {
    if a == 0 || b == 0 {
        return Err(Error::invalid("a and b must be positive"));
    }
    Ok(e.pow_a(a)?.max(e.pow_b(b)?))
}

/// Monotone table of `psi` values; lookups use the value at the largest
/// tabulated height not exceeding the query.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TabulatedPsi {
    heights: Vec<u64>,
    values: Vec<f64>,
}

impl TabulatedPsi {
    pub fn new(rows: Vec<(u64, f64)>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::invalid("psi table is empty"));
        }
        if rows[0].0 != 1 {
            return Err(Error::invalid("psi table must start at height 1"));
        }
        for w in rows.windows(2) {
            if w[1].0 <= w[0].0 {
                return Err(Error::invalid(format!(
                    "psi table heights not strictly increasing at {}",
                    w[1].0
                )));
            }
            if w[1].1 > w[0].1 {
                return Err(Error::invalid(format!(
                    "psi table increases at height {}",
                    w[1].0
                )));
            }
        }
        if let Some(&(h, v)) = rows.iter().find(|r| !(r.1 > 0.0) || !r.1.is_finite()) {
            return Err(Error::invalid(format!("psi({h}) = {v} is not strictly positive")));
        }
        let (heights, values) = rows.into_iter().unzip();
        Ok(Self { heights, values })
    }

    /// Reads a two-column CSV `height,psi` (an optional header row is skipped).
    pub fn from_csv_path(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_csv_reader(file)
    }

    pub fn from_csv_reader<R: std::io::Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let mut rows = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| Error::invalid(format!("psi table row {}: {e}", i + 1)))?;
            if rec.len() != 2 {
                return Err(Error::invalid(format!(
                    "psi table row {} has {} columns, expected 2",
                    i + 1,
                    rec.len()
                )));
            }
            let h = rec[0].parse::<u64>();
            let v = rec[1].parse::<f64>();
            match (h, v) {
                (Ok(h), Ok(v)) => rows.push((h, v)),
                _ if i == 0 => continue,
                _ => {
                    return Err(Error::invalid(format!(
                        "psi table row {} is not numeric",
                        i + 1
                    )))
                }
            }
        }
        Self::new(rows)
    }

    pub fn max_height(&self) -> u64 {
        *self.heights.last().expect("non-empty")
    }

    pub fn len(&self) -> usize {
        self.heights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heights.is_empty()
    }

    pub fn value(&self, h: Height) -> Result<f64> {
        if h > self.max_height() as u128 {
            return Err(Error::TruncatedDomain(format!(
                "psi({h}) requested but table ends at {}",
                self.max_height()
            )));
        }
        let idx = self.heights.partition_point(|&x| (x as u128) <= h);
        Ok(self.values[idx.max(1) - 1])
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(
            self.heights
                .iter()
                .zip(&self.values)
                .map(|(&h, &v)| (h, v * factor))
                .collect(),
        )
    }
}

/// A positive, non-increasing approximating function `psi`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ApproxFunction {
    /// `psi(r) = r^-tau`.
    PowerLaw { tau: f64 },
    /// `psi(r) = min(r^-tau, r^-cap)`.
    PowerLawCapped { tau: f64, cap: f64 },
    Tabulated(TabulatedPsi),
}

impl ApproxFunction {
    pub fn power_law(tau: f64) -> Result<Self> {
        if !(tau > 0.0) || !tau.is_finite() {
            return Err(Error::invalid(format!("tau must be positive and finite, got {tau}")));
        }
        Ok(Self::PowerLaw { tau })
    }

    /// `psi_0(q) = min(q^-tau, q^-(1/p + 1/N))`.
    pub fn power_law_capped(tau: f64, e: &Exponents) -> Result<Self> {
        Self::power_law(tau)?;
        Ok(Self::PowerLawCapped {
            tau,
            cap: 1.0 / e.p() as f64 + 1.0 / e.max_exp() as f64,
        })
    }

    pub fn tabulated(rows: Vec<(u64, f64)>) -> Result<Self> {
        Ok(Self::Tabulated(TabulatedPsi::new(rows)?))
    }

    pub fn value(&self, h: Height) -> Result<f64> {
        match self {
            Self::PowerLaw { tau } => Ok((h as f64).powf(-tau)),
            Self::PowerLawCapped { tau, cap } => Ok((h as f64).powf(-tau.max(*cap))),
            Self::Tabulated(t) => t.value(h),
        }
    }

    /// `tau` when `psi` is a pure power law.
    pub fn power_law_exponent(&self) -> Option<f64> {
        match self {
            Self::PowerLaw { tau } => Some(*tau),
            _ => None,
        }
    }
}

/// `f(r) = r^s`, with companion `g(r) = r^(s-1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DimensionFunction {
    s: f64,
}

impl DimensionFunction {
    pub fn new(s: f64) -> Result<Self> {
        if !(s > 0.0 && s <= 2.0) {
            return Err(Error::invalid(format!("s must lie in (0, 2], got {s}")));
        }
        Ok(Self { s })
    }

    pub fn s(&self) -> f64 {
        self.s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SumKind {
    Lebesgue,
    Hausdorff { s: f64 },
}

/// Partial sums of a volume sum sampled at dyadic heights.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SumSeries {
    pub kind: SumKind,
    #[serde(serialize_with = "serialize_heights")]
    pub heights: Vec<Height>,
    pub partial_sums: Vec<f64>,
    /// Sum of the terms with height in `(heights[i-1], heights[i]]`, accumulated
    /// separately so that tiny late blocks are not lost against the total.
    pub blocks: Vec<f64>,
}

impl SumSeries {
    pub fn total(&self) -> f64 {
        *self.partial_sums.last().unwrap_or(&0.0)
    }

    pub fn block_increments(&self) -> &[f64] {
        &self.blocks
    }

    /// Last block relative to the running total.
    pub fn last_block_fraction(&self) -> f64 {
        match self.blocks.last() {
            Some(&d) if self.total() > 0.0 => d / self.total(),
            _ => 0.0,
        }
    }

    /// Blocks ending at powers of two only.
    pub fn dyadic_blocks(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.blocks.len());
        let mut pending = 0.0;
        for (h, b) in self.heights.iter().zip(&self.blocks) {
            pending += b;
            if h.is_power_of_two() {
                out.push(pending);
                pending = 0.0;
            }
        }
        out
    }
}

/// Accumulates terms in ascending height order and records partial sums and
/// block sums at each checkpoint.
pub(crate) struct CheckpointAccumulator {
    checkpoints: Vec<Height>,
    next: usize,
    total: CompensatedSum,
    block: CompensatedSum,
    partial_sums: Vec<f64>,
    blocks: Vec<f64>,
}

impl CheckpointAccumulator {
    pub(crate) fn new(limit: Height) -> Self {
        let checkpoints = dyadic_checkpoints(limit);
        let n = checkpoints.len();
        Self {
            checkpoints,
            next: 0,
            total: CompensatedSum::new(),
            block: CompensatedSum::new(),
            partial_sums: Vec::with_capacity(n),
            blocks: Vec::with_capacity(n),
        }
    }

    fn close_block(&mut self) {
        self.partial_sums.push(self.total.value());
        self.blocks.push(self.block.value());
        self.block = CompensatedSum::new();
        self.next += 1;
    }

    pub(crate) fn add(&mut self, h: Height, value: f64) {
        while h > self.checkpoints[self.next] {
            self.close_block();
        }
        self.total.add(value);
        self.block.add(value);
    }

    pub(crate) fn finish(mut self, kind: SumKind) -> SumSeries {
        while self.partial_sums.len() < self.checkpoints.len() {
            self.close_block();
        }
        SumSeries {
            kind,
            heights: self.checkpoints,
            partial_sums: self.partial_sums,
            blocks: self.blocks,
        }
    }
}

/// Distinct heights `h <= H` in ascending order with the number of pairs
/// `(a, b)` whose height is exactly `h`.
#[derive(Debug, Clone)]
pub struct HeightLevels {
    e: Exponents,
    limit: Height,
    next_a: u64,
    next_b: u64,
    prev_pairs: u128,
}

impl HeightLevels {
    pub fn new(e: &Exponents, limit: Height) -> Result<Self> {
        if limit == 0 {
            return Err(Error::invalid("height bound H must be at least 1"));
        }
        // guard the powers needed to step one past the bound
        e.pow_a(crate::num::iroot(limit, e.n()) + 1)?;
        e.pow_b(crate::num::iroot(limit, e.m()) + 1)?;
        Ok(Self {
            e: *e,
            limit,
            next_a: 1,
            next_b: 1,
            prev_pairs: 0,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HeightLevel {
    pub h: Height,
    /// Number of pairs with `h_{a,b} = h`.
    pub multiplicity: u128,
    /// `#{a : a^n <= h}`.
    pub a_count: u64,
    /// `#{b : b^m <= h}`.
    pub b_count: u64,
}

impl Iterator for HeightLevels {
    type Item = HeightLevel;

    fn next(&mut self) -> Option<HeightLevel> {
        let pa = self.e.pow_a(self.next_a).ok()?;
        let pb = self.e.pow_b(self.next_b).ok()?;
        let h = pa.min(pb);
        if h > self.limit {
            return None;
        }
        if pa == h {
            self.next_a += 1;
        }
        if pb == h {
            self.next_b += 1;
        }
        let a_count = self.next_a - 1;
        let b_count = self.next_b - 1;
        let pairs = a_count as u128 * b_count as u128;
        let multiplicity = pairs - self.prev_pairs;
        self.prev_pairs = pairs;
        Some(HeightLevel {
            h,
            multiplicity,
            a_count,
            b_count,
        })
    }
}

/// Dyadic checkpoints `1, 2, 4, ..., <= H`, with `H` appended when it is not a power of two.
pub fn dyadic_checkpoints(limit: Height) -> Vec<Height> {
    let mut out = Vec::new();
    let mut c: Height = 1;
    while c <= limit {
        out.push(c);
        match c.checked_mul(2) {
            Some(n) => c = n,
            None => break,
        }
    }
    if out.last() != Some(&limit) {
        out.push(limit);
    }
    out
}

fn accumulate_levels<F>(e: &Exponents, limit: Height, kind: SumKind, mut term: F) -> Result<SumSeries>
where
    F: FnMut(Height) -> Result<f64>,
{
    let mut acc = CheckpointAccumulator::new(limit);
    for level in HeightLevels::new(e, limit)? {
        acc.add(level.h, level.multiplicity as f64 * term(level.h)?);
    }
    Ok(acc.finish(kind))
}

fn lebesgue_term(psi_h: f64, h: f64, p: f64) -> f64 {
    psi_h * h.powf(-(1.0 - 1.0 / p))
}

fn hausdorff_term(psi_h: f64, h: f64, p: f64, s: f64) -> f64 {
    (psi_h / h).powf(s - 1.0) * h.powf(1.0 / p)
}

/// Partial sums of `sum psi(h)/h^(1-1/p)` over all pairs with `h_{a,b} <= H`.
///
/// Pairs sharing a height contribute identical terms, so each height level is
/// added once with its multiplicity, in ascending height order.
pub fn lebesgue_sum_partial(e: &Exponents, psi: &ApproxFunction, limit: Height) -> Result<SumSeries> {
    let p = e.p() as f64;
    accumulate_levels(e, limit, SumKind::Lebesgue, |h| {
        Ok(lebesgue_term(psi.value(h)?, h as f64, p))
    })
}

/// Partial sums of `sum g(psi(h)/h) h^(1/p)` with `g(r) = r^(s-1)`.
pub fn hausdorff_sum_partial(
    e: &Exponents,
    psi: &ApproxFunction,
    dim_fn: &DimensionFunction,
    limit: Height,
) -> Result<SumSeries> {
    let s = dim_fn.s();
    if s <= 1.0 {
        return Err(Error::invalid(format!(
            "Hausdorff sums need s in (1, 2], got {s}"
        )));
    }
    let p = e.p() as f64;
    let kind = SumKind::Hausdorff { s };
    if s == 2.0 {
        // g(r) = r: identical to the Lebesgue sum term by term
        let mut series = lebesgue_sum_partial(e, psi, limit)?;
        series.kind = kind;
        return Ok(series);
    }
    accumulate_levels(e, limit, kind, |h| {
        Ok(hausdorff_term(psi.value(h)?, h as f64, p, s))
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SumClass {
    Convergent,
    Divergent,
    NotPowerLaw,
}

/// Which theorems apply to `(n, m, p)` and whether the set is null for every `psi`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Regime {
    /// Lebesgue zero-one law applies: `n = m = 1` or `gcd(n, m) >= 2`.
    pub theorem_applicable: bool,
    /// Hausdorff criterion applies: `n = m = p = 1` or `gcd(n, m) >= 2`.
    pub hausdorff_applicable: bool,
    pub always_null: bool,
}

pub fn regime_classify(e: &Exponents) -> Regime {
    let (n, m, p) = (e.n() as i64, e.m() as i64, e.p() as i64);
    let k = e.gcd();
    let unit = n == 1 && m == 1;
    let theorem_applicable = unit || k >= 2;
    let hausdorff_applicable = (unit && p == 1) || k >= 2;
    let nm = n * m;
    let denom = nm - n - m;
    // p > nm/(nm - n - m), cross-multiplied in integers
    let beyond_pbound = denom > 0 && p * denom > nm;
    let always_null = theorem_applicable
        && ((unit && p > 1) || (k >= 2 && !(n == 2 && m == 2) && beyond_pbound));
    Regime {
        theorem_applicable,
        hausdorff_applicable,
        always_null,
    }
}

/// Closed-form classification of the volume sum for `psi(r) = r^-tau`.
///
/// Dyadic blocks behave like `2^(j (1/n + 1/m + 1/p - 1 - tau))`, so the sum
/// diverges exactly when `tau <= 1/n + 1/m + 1/p - 1` (equality is the harmonic case).
pub fn convergence_classify_power_law(e: &Exponents, tau: f64) -> Result<(SumClass, f64)> {
    if !(tau > 0.0) || !tau.is_finite() {
        return Err(Error::invalid(format!("tau must be positive and finite, got {tau}")));
    }
    let threshold = e.reciprocal_sum() - 1.0;
    let class = if tau <= threshold {
        SumClass::Divergent
    } else {
        SumClass::Convergent
    };
    Ok((class, threshold))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LowerOrder {
    pub value: f64,
    /// True when computed from a finite table window rather than in closed form.
    pub estimate: bool,
}

/// `lambda_psi = liminf -log psi(2^r) / (r log 2)`.
pub fn lower_order(psi: &ApproxFunction, r_max: u32) -> Result<LowerOrder> {
    if r_max < 8 {
        return Err(Error::invalid(format!("r_max must be at least 8, got {r_max}")));
    }
    match psi {
        ApproxFunction::PowerLaw { tau } => Ok(LowerOrder {
            value: *tau,
            estimate: false,
        }),
        ApproxFunction::PowerLawCapped { tau, cap } => Ok(LowerOrder {
            value: tau.max(*cap),
            estimate: false,
        }),
        ApproxFunction::Tabulated(t) => {
            if r_max >= 64 || (t.max_height() as u128) < (1u128 << r_max) {
                return Err(Error::TruncatedDomain(format!(
                    "table ends at {} but 2^{r_max} is needed",
                    t.max_height()
                )));
            }
            let window = r_max.div_ceil(4);
            let mut best = f64::INFINITY;
            for r in (r_max + 1 - window)..=r_max {
                let v = t.value(1u128 << r)?;
                best = best.min(-v.log2() / r as f64);
            }
            Ok(LowerOrder {
                value: best,
                estimate: true,
            })
        }
    }
}

/// `1 + min(1, (1/n + 1/m + 1/p) / (lambda + 1))`.
pub fn dimension_formula(e: &Exponents, lambda: f64) -> Result<f64> {
    if lambda.is_nan() || lambda < 0.0 {
        return Err(Error::invalid(format!("lambda must be >= 0, got {lambda}")));
    }
    if lambda.is_infinite() {
        return Err(Error::Hypothesis(
            "dimension formula is only stated for finite lower order".into(),
        ));
    }
    Ok(1.0 + (e.reciprocal_sum() / (lambda + 1.0)).min(1.0))
}

/// Upper end of the admissible `delta` range,
/// `k (1 + 1/p + 1/N + k/(2pN) - 1/M) - 2`.
pub fn delta_window(e: &Exponents) -> Result<f64> {
    let regime = regime_classify(e);
    if !regime.theorem_applicable || regime.always_null {
        return Err(Error::Hypothesis(format!(
            "delta window is only positive for applicable, non-null triples; {e} is not"
        )));
    }
    let k = e.gcd() as f64;
    let p = e.p() as f64;
    let big = e.max_exp() as f64;
    let small = e.min_exp() as f64;
    Ok(k * (1.0 + 1.0 / p + 1.0 / big + k / (2.0 * p * big) - 1.0 / small) - 2.0)
}

/// Everything the closed-form criteria say about `(e, psi)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegimeReport {
    pub exponents: Exponents,
    pub theorem_applicable: bool,
    pub hausdorff_applicable: bool,
    pub always_null: bool,
    /// Measure verdict: `convergent` whenever the triple is always null.
    pub classification: SumClass,
    /// Classification of the volume sum itself.
    pub sum_classification: SumClass,
    pub threshold_tau: f64,
    pub lower_order: Option<LowerOrder>,
    pub dimension: Option<f64>,
    pub dimension_in_hypothesis: bool,
}

pub fn regime_report(e: &Exponents, psi: &ApproxFunction, r_max: u32) -> Result<RegimeReport> {
    let regime = regime_classify(e);
    let threshold_tau = e.reciprocal_sum() - 1.0;
    let sum_classification = match psi.power_law_exponent() {
        Some(tau) => convergence_classify_power_law(e, tau)?.0,
        None => SumClass::NotPowerLaw,
    };
    let classification = if regime.always_null {
        SumClass::Convergent
    } else {
        sum_classification
    };
    let lower = lower_order(psi, r_max).ok();
    let dimension = match lower {
        Some(l) => Some(dimension_formula(e, l.value)?),
        None => None,
    };
    Ok(RegimeReport {
        exponents: *e,
        theorem_applicable: regime.theorem_applicable,
        hausdorff_applicable: regime.hausdorff_applicable,
        always_null: regime.always_null,
        classification,
        sum_classification,
        threshold_tau,
        lower_order: lower,
        dimension,
        dimension_in_hypothesis: regime.hausdorff_applicable && dimension.is_some(),
    })
}
