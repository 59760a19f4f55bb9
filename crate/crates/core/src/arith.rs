//! Sieved multiplicative functions and the coprime-counting / summatory
//! identities used when counting restricted pairs.
//!
//! `divisor_count` is the number-of-divisors function `d(q)`.

use crate::error::{Error, Result};
use crate::num::CompensatedSum;
use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::PI;

/// `zeta(2) = pi^2 / 6`.
pub const ZETA_2: f64 = PI * PI / 6.0;

/// Largest table the sieve will build (~1.7 GB of tables).
pub const MAX_TABLE_LIMIT: usize = 1 << 27;

/// Möbius, totient and divisor-count tables for `1..=limit`.
#[derive(Debug, Clone)]
pub struct ArithTables {
    limit: usize,
    mobius: Vec<i8>,
    totient: Vec<u32>,
    divisor_count: Vec<u32>,
    smallest_prime: Vec<u32>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoprimeCount {
    pub gamma: u64,
    /// `gamma - (phi(t)/t) Q`; bounded by `d(t)` in absolute value.
    pub epsilon: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SummatoryValue<T> {
    pub sum: T,
    pub main_term: f64,
}

impl ArithTables {
    /// Linear sieve computing `mu`, `phi`, `d` and the smallest prime factor in one pass.
    pub fn build(limit: usize) -> Result<Self> {
        if limit == 0 {
            return Err(Error::invalid("table limit must be at least 1"));
        }
        if limit > MAX_TABLE_LIMIT {
            return Err(Error::Resource(format!(
                "table limit {limit} exceeds {MAX_TABLE_LIMIT}"
            )));
        }
        let len = limit + 1;
        let mut mobius = vec![0i8; len];
        let mut totient = vec![0u32; len];
        let mut divisor_count = vec![0u32; len];
        let mut smallest_prime = vec![0u32; len];
        // exponent of the smallest prime in q
        let mut spf_exp = vec![0u8; len];
        let mut primes: Vec<u32> = Vec::new();

        mobius[1] = 1;
        totient[1] = 1;
        divisor_count[1] = 1;
        smallest_prime[1] = 1;
        for i in 2..len {
            if smallest_prime[i] == 0 {
                smallest_prime[i] = i as u32;
                primes.push(i as u32);
                mobius[i] = -1;
                totient[i] = i as u32 - 1;
                divisor_count[i] = 2;
                spf_exp[i] = 1;
            }
            let spf_i = smallest_prime[i];
            for &p in &primes {
                let q = i * p as usize;
                if p > spf_i || q >= len {
                    break;
                }
                smallest_prime[q] = p;
                if p == spf_i {
                    mobius[q] = 0;
                    totient[q] = totient[i] * p;
                    let e = spf_exp[i] as u32;
                    divisor_count[q] = divisor_count[i] / (e + 1) * (e + 2);
                    spf_exp[q] = spf_exp[i] + 1;
                } else {
                    mobius[q] = -mobius[i];
                    totient[q] = totient[i] * (p - 1);
                    divisor_count[q] = divisor_count[i] * 2;
                    spf_exp[q] = 1;
                }
            }
        }
        Ok(Self {
            limit,
            mobius,
            totient,
            divisor_count,
            smallest_prime,
        })
    }

    pub fn limit(&self) -> usize {
        self.limit
    }

    pub fn mobius(&self, q: usize) -> i8 {
        self.mobius[q]
    }

    pub fn totient(&self, q: usize) -> u64 {
        self.totient[q] as u64
    }

    pub fn divisor_count(&self, q: usize) -> u64 {
        self.divisor_count[q] as u64
    }

    pub fn smallest_prime(&self, q: usize) -> u64 {
        self.smallest_prime[q] as u64
    }

    fn check_index(&self, q: u64, what: &str) -> Result<usize> {
        if q == 0 || q as usize > self.limit {
            return Err(Error::invalid(format!(
                "{what} = {q} outside table range 1..={}",
                self.limit
            )));
        }
        Ok(q as usize)
    }

    /// Distinct prime factors of `t`, using the sieve when `t` is in range.
    pub fn distinct_primes(&self, t: u64) -> Vec<u64> {
        if t == 0 || t as usize > self.limit {
            return distinct_primes_trial(t);
        }
        let mut t = t as usize;
        let mut out = Vec::new();
        while t > 1 {
            let p = self.smallest_prime[t] as usize;
            out.push(p as u64);
            while t % p == 0 {
                t /= p;
            }
        }
        out
    }

    /// `gamma_t(Q) = #{q <= Q : gcd(t, q) = 1}` via the Möbius identity.
    pub fn coprime_count(&self, t: u64, q: u64) -> Result<CoprimeCount> {
        if t == 0 {
            return Err(Error::invalid("t must be positive"));
        }
        Ok(coprime_count_with_primes(q, &self.distinct_primes(t)))
    }

    /// `sum_{q <= Q} q^(z-1) phi(q)` together with `Q^(z+1) / ((z+1) zeta(2))`.
    pub fn totient_power_sum(&self, z: f64, q_max: u64) -> Result<SummatoryValue<f64>> {
        if !(z > 0.0) || !z.is_finite() {
            return Err(Error::invalid(format!("z must be positive, got {z}")));
        }
        let q_max = self.check_index(q_max, "Q")? as u64;
        let main_term = (q_max as f64).powf(z + 1.0) / ((z + 1.0) * ZETA_2);
        if z.fract() == 0.0 && z <= 8.0 {
            if let Some(exact) = self.totient_power_sum_exact(z as u32, q_max) {
                return Ok(SummatoryValue {
                    sum: exact as f64,
                    main_term,
                });
            }
        }
        let mut acc = CompensatedSum::new();
        for q in 1..=q_max as usize {
            acc.add((q as f64).powf(z - 1.0) * self.totient[q] as f64);
        }
        Ok(SummatoryValue {
            sum: acc.value(),
            main_term,
        })
    }

    fn totient_power_sum_exact(&self, z: u32, q_max: u64) -> Option<u128> {
        let mut acc: u128 = 0;
        for q in 1..=q_max {
            let term = (q as u128)
                .checked_pow(z - 1)?
                .checked_mul(self.totient[q as usize] as u128)?;
            acc = acc.checked_add(term)?;
        }
        Some(acc)
    }

    /// `(sum mu(e)/e, sum mu(e)/e^2)` over `e <= Q`.
    pub fn mobius_weighted_sums(&self, q_max: u64) -> Result<(f64, f64)> {
        let q_max = self.check_index(q_max, "Q")?;
        let mut s1 = CompensatedSum::new();
        let mut s2 = CompensatedSum::new();
        for e in 1..=q_max {
            let mu = self.mobius[e];
            if mu != 0 {
                let ef = e as f64;
                s1.add(mu as f64 / ef);
                s2.add(mu as f64 / (ef * ef));
            }
        }
        Ok((s1.value(), s2.value()))
    }
}

/// Trial-division factorisation into distinct primes.
pub fn distinct_primes_trial(mut t: u64) -> Vec<u64> {
    let mut out = Vec::new();
    let mut p = 2u64;
    while p * p <= t {
        if t % p == 0 {
            out.push(p);
            while t % p == 0 {
                t /= p;
            }
        }
        p += if p == 2 { 1 } else { 2 };
    }
    if t > 1 {
        out.push(t);
    }
    out
}

/// `gamma_t(Q)` for any `t >= 1`, factoring by trial division.
pub fn coprime_count(t: u64, q: u64) -> Result<CoprimeCount> {
    if t == 0 {
        return Err(Error::invalid("t must be positive"));
    }
    Ok(coprime_count_with_primes(q, &distinct_primes_trial(t)))
}

fn coprime_count_with_primes(q: u64, primes: &[u64]) -> CoprimeCount {
    let gamma = coprime_upto(q, primes);
    let mut phi_over_t = 1.0;
    for &p in primes {
        phi_over_t *= 1.0 - 1.0 / p as f64;
    }
    CoprimeCount {
        gamma,
        epsilon: gamma as f64 - phi_over_t * q as f64,
    }
}

/// `#{1 <= q <= Q : q shares no prime with primes}` as `sum_{e | rad} mu(e) floor(Q/e)`.
pub fn coprime_upto(q: u64, primes: &[u64]) -> u64 {
    let mut total: i128 = 0;
    let k = primes.len();
    for mask in 0u32..(1u32 << k) {
        let mut e: u128 = 1;
        let mut overflow = false;
        for (i, &p) in primes.iter().enumerate() {
            if mask & (1 << i) != 0 {
                e *= p as u128;
                if e > q as u128 {
                    overflow = true;
                    break;
                }
            }
        }
        if overflow {
            continue;
        }
        let term = (q as u128 / e) as i128;
        if mask.count_ones() % 2 == 0 {
            total += term;
        } else {
            total -= term;
        }
    }
    total as u64
}

/// `sum_{q <= Q} d(q)` by the hyperbola method, with main term `Q ln Q`.
pub fn divisor_summatory(q_max: u64) -> Result<SummatoryValue<u64>> {
    if q_max == 0 {
        return Err(Error::invalid("Q must be positive"));
    }
    let r = crate::num::iroot(q_max as u128, 2);
    let mut acc: u128 = 0;
    for i in 1..=r {
        acc += (q_max / i) as u128;
    }
    let sum = 2 * acc - (r as u128) * (r as u128);
    let sum = u64::try_from(sum).map_err(|_| Error::range("divisor summatory overflow"))?;
    let qf = q_max as f64;
    Ok(SummatoryValue {
        sum,
        main_term: qf * qf.ln(),
    })
}

/// Worst value over `1 <= t <= t_max` of `|(gamma)_t / t!| (t+1)^(1+gamma) / e^((gamma+1)^2)`,
/// where `(gamma)_t` is the falling factorial. The bound being checked says this is at most 1.
pub fn pochhammer_bound_check(gamma: f64, t_max: u64) -> Result<f64> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::invalid(format!("gamma must lie in (0,1), got {gamma}")));
    }
    if t_max == 0 {
        return Err(Error::invalid("t_max must be at least 1"));
    }
    let log_bound_const = (gamma + 1.0) * (gamma + 1.0);
    let mut log_term = 0.0f64;
    let mut worst = f64::NEG_INFINITY;
    for t in 1..=t_max {
        let s = t as f64;
        log_term += (gamma + 1.0 - s).abs().ln() - s.ln();
        let log_ratio = log_term + (1.0 + gamma) * (s + 1.0).ln() - log_bound_const;
        worst = worst.max(log_ratio);
    }
    Ok(worst.exp())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InvariantCheck {
    pub name: &'static str,
    pub cases: u64,
    pub violations: u64,
    /// Largest observed value of the checked quantity, normalised so that 1 is the bound.
    pub worst: f64,
}

impl InvariantCheck {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

#[derive(Default)]
struct Tally {
    cases: u64,
    violations: u64,
    worst: f64,
}

impl Tally {
    fn record(&mut self, normalised: f64) {
        self.cases += 1;
        self.worst = self.worst.max(normalised);
        if !(normalised <= 1.0) {
            self.violations += 1;
        }
    }

    fn flag(&mut self, ok: bool) {
        self.record(if ok { 0.0 } else { f64::INFINITY });
    }

    fn finish(self, name: &'static str) -> InvariantCheck {
        InvariantCheck {
            name,
            cases: self.cases,
            violations: self.violations,
            worst: self.worst,
        }
    }
}

/// `|epsilon_t(Q)| <= d(t)` for every `t <= t_max`, `Q <= q_max`; `worst` is the largest `|epsilon| / d(t)`.
pub fn coprime_error_check(t_max: u64, q_max: u64) -> InvariantCheck {
    let rows: Vec<Tally> = (1..=t_max)
        .into_par_iter()
        .map(|t| {
            let primes = distinct_primes_trial(t);
            let d = divisor_count_trial(t) as f64;
            let mut tally = Tally::default();
            for q in 0..=q_max {
                tally.record(coprime_count_with_primes(q, &primes).epsilon.abs() / d);
            }
            tally
        })
        .collect();
    let mut all = Tally::default();
    for r in rows {
        all.cases += r.cases;
        all.violations += r.violations;
        all.worst = all.worst.max(r.worst);
    }
    all.finish("coprime_count_error")
}

fn divisor_count_trial(mut t: u64) -> u64 {
    let mut d = 1;
    for p in distinct_primes_trial(t) {
        let mut k = 0;
        while t % p == 0 {
            t /= p;
            k += 1;
        }
        d *= k + 1;
    }
    d
}

/// `|sum - main_term| / Q^z` at `Q = 10^k`, `k = 2..`, up to the table limit.
pub fn totient_power_scaled_errors(tables: &ArithTables, z: f64) -> Result<Vec<(u64, f64)>> {
    let mut out = Vec::new();
    let mut q = 100u64;
    while q as usize <= tables.limit() {
        let v = tables.totient_power_sum(z, q)?;
        out.push((q, (v.sum - v.main_term).abs() / (q as f64).powf(z)));
        q *= 10;
    }
    Ok(out)
}

/// The scaled totient-power error at every decade stays within `4 C`, where `C` is the
/// largest scaled error over `Q <= 100`.
pub fn totient_power_check(tables: &ArithTables, zs: &[f64]) -> Result<InvariantCheck> {
    let mut tally = Tally::default();
    for &z in zs {
        let mut c = 0.0f64;
        for q in 1..=100u64.min(tables.limit() as u64) {
            let v = tables.totient_power_sum(z, q)?;
            c = c.max((v.sum - v.main_term).abs() / (q as f64).powf(z));
        }
        for (_, scaled) in totient_power_scaled_errors(tables, z)? {
            tally.record(scaled / (4.0 * c));
        }
    }
    Ok(tally.finish("totient_power_sum_error"))
}

/// Every invariant of the sieve tables and summatory identities at the given table size.
pub fn invariant_suite(limit: usize) -> Result<Vec<InvariantCheck>> {
    let tables = ArithTables::build(limit)?;
    let n = tables.limit();
    let mut checks = Vec::new();

    let mut base = Tally::default();
    base.flag(tables.mobius(1) == 1 && tables.totient(1) == 1 && tables.divisor_count(1) == 1);
    for q in 2..=n {
        base.flag(tables.totient(q) < q as u64 && tables.divisor_count(q) >= 2);
    }
    checks.push(base.finish("base_values"));

    let mut mult = Tally::default();
    let cap = n.min(100_000);
    for u in 2..=cap {
        for v in 2..=cap / u {
            if crate::num::gcd(u as u64, v as u64) == 1 {
                let uv = u * v;
                mult.flag(
                    tables.totient(uv) == tables.totient(u) * tables.totient(v)
                        && tables.mobius(uv) == tables.mobius(u) * tables.mobius(v)
                        && tables.divisor_count(uv) == tables.divisor_count(u) * tables.divisor_count(v),
                );
            }
        }
    }
    checks.push(mult.finish("multiplicativity"));

    let mut divisor_sums = vec![0i32; n + 1];
    for e in 1..=n {
        let mu = tables.mobius(e) as i32;
        if mu != 0 {
            for q in (e..=n).step_by(e) {
                divisor_sums[q] += mu;
            }
        }
    }
    let mut identity = Tally::default();
    for (q, &s) in divisor_sums.iter().enumerate().skip(1) {
        identity.flag(s == i32::from(q == 1));
    }
    checks.push(identity.finish("mobius_identity"));

    let mut oracle = Tally::default();
    for q in 1..=n.min(1000) {
        let primes = distinct_primes_trial(q as u64);
        let d = divisor_count_trial(q as u64);
        let squarefree = primes.iter().product::<u64>() == q as u64;
        let mu = if squarefree { 1 - 2 * (primes.len() as i8 % 2) } else { 0 };
        let phi = primes.iter().fold(q as u64, |acc, p| acc / p * (p - 1));
        oracle.flag(tables.mobius(q) == mu && tables.totient(q) == phi && tables.divisor_count(q) == d);
    }
    checks.push(oracle.finish("trial_division_oracle"));

    checks.push(coprime_error_check(200, 10_000));

    let mut hyperbola = Tally::default();
    let mut running = 0u64;
    for q in 1..=n.min(10_000) {
        running += tables.divisor_count(q);
        let qf = q as f64;
        hyperbola.record((running as f64 - qf * qf.ln()).abs() / (2.0 * qf));
    }
    checks.push(hyperbola.finish("divisor_summatory_error"));

    checks.push(totient_power_check(&tables, &[0.5, 1.0, 2.0, 3.5])?);

    let mut mobius_sums = Tally::default();
    let mut q = 10u64;
    while q as usize <= n {
        let (s1, s2) = tables.mobius_weighted_sums(q)?;
        mobius_sums.record(s1.abs());
        mobius_sums.record((s2 - 1.0 / ZETA_2).abs() * q as f64);
        q *= 10;
    }
    checks.push(mobius_sums.finish("mobius_weighted_sums"));

    let mut poch = Tally::default();
    for k in 1..=9 {
        poch.record(pochhammer_bound_check(k as f64 / 10.0, 10_000)?);
    }
    checks.push(poch.finish("pochhammer_bound"));
    Ok(checks)
}
