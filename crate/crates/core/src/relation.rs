//! Integer-relation detection by lattice reduction.
//!
//! Reals are evaluated in binary fixed point to a requested precision and
//! the lattice spanned by rows `(e_i, 2^bits * x_i)` is LLL-reduced with
//! exact rational Gram-Schmidt data. A short reduced vector exposes a
//! relation; a lower bound on all Gram-Schmidt norms rules out relations
//! with coefficients up to a bound.

use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{Scalar, Surd};

/// A real number that can be evaluated to arbitrary binary precision
/// (except `Float`, which carries only double precision).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Real {
    Exact { value: Scalar },
    /// `base^(1/degree)`.
    Root { base: u64, degree: u32 },
    Recip { of: Box<Real> },
    Pi,
    E,
    Float { value: f64 },
}

impl fmt::Display for Real {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Real::Exact { value } => write!(f, "{value}"),
            Real::Root { base, degree } => write!(f, "{base}^(1/{degree})"),
            Real::Recip { of } => write!(f, "1/({of})"),
            Real::Pi => write!(f, "pi"),
            Real::E => write!(f, "e"),
            Real::Float { value } => write!(f, "~{value}"),
        }
    }
}

/// Bits of precision available from an `f64`.
const FLOAT_BITS: u32 = 48;

fn atan_inv(n: u64, bits: u32) -> BigInt {
    // arctan(1/n) * 2^bits by its Taylor series
    let one = BigInt::one() << bits;
    let n2 = BigInt::from(n * n);
    let mut power = &one / BigInt::from(n);
    let mut sum = power.clone();
    let mut k = 1u64;
    loop {
        power = &power / &n2;
        if power.is_zero() {
            break;
        }
        let term = &power / BigInt::from(2 * k + 1);
        if k % 2 == 1 {
            sum -= term;
        } else {
            sum += term;
        }
        k += 1;
    }
    sum
}

impl Real {
    pub fn exact(s: Scalar) -> Real {
        match s {
            Scalar::Float { value, .. } => Real::Float { value },
            s => Real::Exact { value: s },
        }
    }

    pub fn recip(self) -> Real {
        match self {
            Real::Recip { of } => *of,
            Real::Exact { value } if value.recip().is_some() => Real::Exact { value: value.recip().unwrap() },
            other => Real::Recip { of: Box::new(other) },
        }
    }

    /// Parses `n^(1/k)`, `cbrt(n)`, `pi`, `e`, `1/pi`, `1/e`, or any scalar expression.
    pub fn parse(s: &str) -> Result<Real> {
        let t: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        if let Some(rest) = t.strip_prefix("1/") {
            if let Some(inner) = Real::parse_named(rest.trim_start_matches('(').trim_end_matches(')')) {
                return Ok(inner.recip());
            }
        }
        if let Some(r) = Real::parse_named(&t) {
            return Ok(r);
        }
        Ok(Real::exact(Scalar::parse(s)?))
    }

    fn parse_named(t: &str) -> Option<Real> {
        match t {
            "pi" => return Some(Real::Pi),
            "e" => return Some(Real::E),
            _ => {}
        }
        if let Some(inner) = t.strip_prefix("cbrt(").and_then(|r| r.strip_suffix(')')) {
            return Some(Real::Root { base: inner.parse().ok()?, degree: 3 });
        }
        let (base, exp) = t.split_once("^(1/")?;
        let degree: u32 = exp.strip_suffix(')')?.parse().ok()?;
        let base: u64 = base.parse().ok()?;
        if degree < 2 || base == 0 {
            return None;
        }
        Some(Real::Root { base, degree })
    }

    /// Precision cap in bits, if any.
    pub fn precision_limit(&self) -> Option<u32> {
        match self {
            Real::Float { .. } => Some(FLOAT_BITS),
            Real::Exact { value } if !value.is_exact() => Some(FLOAT_BITS),
            Real::Recip { of } => of.precision_limit(),
            _ => None,
        }
    }

    pub fn is_exact_rational(&self) -> bool {
        matches!(self, Real::Exact { value } if value.is_rational())
    }

    pub fn is_exact(&self) -> bool {
        matches!(self, Real::Exact { value } if value.is_exact())
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            Real::Exact { value } => value.to_f64(),
            Real::Root { base, degree } => (*base as f64).powf(1.0 / *degree as f64),
            Real::Recip { of } => 1.0 / of.to_f64(),
            Real::Pi => std::f64::consts::PI,
            Real::E => std::f64::consts::E,
            Real::Float { value } => *value,
        }
    }

    /// Value as a scalar: exact where possible, else floating.
    pub fn to_scalar(&self) -> Scalar {
        match self {
            Real::Exact { value } => value.clone(),
            Real::Root { base, degree: 2 } => Scalar::sqrt_int(*base),
            Real::Recip { of } if of.is_exact() => {
                of.to_scalar().recip().unwrap_or_else(|| Scalar::float(f64::INFINITY))
            }
            other => Scalar::float(other.to_f64()),
        }
    }

    /// `value * 2^bits`, within a few units.
    pub fn fixed(&self, bits: u32) -> BigInt {
        match self {
            Real::Exact { value: Scalar::Exact(s) } => s.to_fixed(bits),
            Real::Exact { value } => float_fixed(value.to_f64(), bits),
            Real::Float { value } => float_fixed(*value, bits),
            Real::Root { base, degree } => {
                (BigInt::from(*base) << (bits as usize * *degree as usize)).nth_root(*degree)
            }
            Real::Recip { of } => {
                let x = of.fixed(bits + 8);
                (BigInt::one() << (2 * bits as usize + 8)) / x
            }
            Real::Pi => {
                // Machin: pi = 16 atan(1/5) - 4 atan(1/239)
                let g = bits + 16;
                (BigInt::from(16) * atan_inv(5, g) - BigInt::from(4) * atan_inv(239, g)) >> 16usize
            }
            Real::E => {
                let g = bits + 16;
                let mut term = BigInt::one() << g;
                let mut sum = term.clone();
                let mut k = 1u64;
                while !term.is_zero() {
                    term /= BigInt::from(k);
                    sum += &term;
                    k += 1;
                }
                sum >> 16usize
            }
        }
    }
}

fn float_fixed(v: f64, bits: u32) -> BigInt {
    let (m, e) = {
        let bits64 = v.to_bits();
        let sign = if bits64 >> 63 == 0 { 1i64 } else { -1 };
        let exp = ((bits64 >> 52) & 0x7ff) as i64;
        let mant = if exp == 0 { (bits64 & 0xfffffffffffff) << 1 } else { (bits64 & 0xfffffffffffff) | 0x10000000000000 };
        (BigInt::from(sign) * BigInt::from(mant), exp - 1075)
    };
    let shift = e + bits as i64;
    if shift >= 0 {
        m << shift as usize
    } else {
        m >> (-shift) as usize
    }
}

/// Outcome of a bounded relation search.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum RelationSearch {
    /// Integer coefficients `m` with `sum m_i x_i = 0` (to working precision).
    Found { coefficients: Vec<i64>, bits: u32 },
    /// No relation with max coefficient at most `bound` exists (certified at
    /// `bits` of precision when every input is exact or named).
    Excluded { bound: u64, bits: u32, heuristic: bool },
    /// Precision too low to decide.
    Inconclusive { bound: u64, bits: u32 },
}

type Rat = BigRational;

fn dot(a: &[BigInt], b: &[BigInt]) -> BigInt {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Integral LLL (delta = 3/4) of linearly independent integer rows.
///
/// Returns the reduced rows and the Gram determinants `d_0 = 1, d_1, ..., d_n`;
/// the squared Gram-Schmidt norms are `d_i / d_{i-1}`.
pub fn lll(rows: Vec<Vec<BigInt>>) -> (Vec<Vec<BigInt>>, Vec<BigInt>) {
    let n = rows.len();
    // 1-based working arrays
    let mut b: Vec<Vec<BigInt>> = std::iter::once(Vec::new()).chain(rows).collect();
    let mut d = vec![BigInt::zero(); n + 1];
    let mut lam = vec![vec![BigInt::zero(); n + 1]; n + 1];
    d[0] = BigInt::one();
    if n == 0 {
        return (Vec::new(), d);
    }
    d[1] = dot(&b[1], &b[1]);
    let mut k = 2;
    let mut kmax = 1;

    fn redi(b: &mut [Vec<BigInt>], d: &[BigInt], lam: &mut [Vec<BigInt>], k: usize, l: usize) {
        let two_l: BigInt = &lam[k][l] * 2;
        if two_l.abs() <= d[l] {
            return;
        }
        // q = round(lam / d)
        let q = num_integer::Integer::div_floor(&(&two_l + &d[l]), &(&d[l] * 2));
        let bl = b[l].clone();
        for (x, y) in b[k].iter_mut().zip(&bl) {
            *x -= &q * y;
        }
        lam[k][l] = &lam[k][l] - &q * &d[l];
        for i in 1..l {
            let v = &lam[k][i] - &q * &lam[l][i];
            lam[k][i] = v;
        }
    }

    while k <= n {
        if k > kmax {
            kmax = k;
            for j in 1..=k {
                let mut u = dot(&b[k], &b[j]);
                for i in 1..j {
                    u = (&d[i] * &u - &lam[k][i] * &lam[j][i]) / &d[i - 1];
                }
                if j < k {
                    lam[k][j] = u;
                } else {
                    d[k] = u;
                }
            }
        }
        loop {
            redi(&mut b, &d, &mut lam, k, k - 1);
            let lhs: BigInt = &d[k] * &d[k - 2] * 4;
            let rhs: BigInt = &d[k - 1] * &d[k - 1] * 3 - &lam[k][k - 1] * &lam[k][k - 1] * 4;
            if lhs < rhs {
                b.swap(k, k - 1);
                for j in 1..k - 1 {
                    let t = lam[k][j].clone();
                    lam[k][j] = lam[k - 1][j].clone();
                    lam[k - 1][j] = t;
                }
                let l = lam[k][k - 1].clone();
                let bb = (&d[k - 2] * &d[k] + &l * &l) / &d[k - 1];
                for i in k + 1..=kmax {
                    let t = lam[i][k].clone();
                    lam[i][k] = (&d[k] * &lam[i][k - 1] - &l * &t) / &d[k - 1];
                    lam[i][k - 1] = (&bb * &t + &l * &lam[i][k]) / &d[k];
                }
                d[k - 1] = bb;
                if k > 2 {
                    k -= 1;
                }
            } else {
                for l in (1..k - 1).rev() {
                    redi(&mut b, &d, &mut lam, k, l);
                }
                k += 1;
                break;
            }
        }
    }
    b.remove(0);
    (b, d)
}

/// Searches integer relations among the vectors `values` (each of the same
/// dimension) with coefficients bounded by `bound`.
pub fn find_vector_relation(values: &[Vec<Real>], bound: u64) -> RelationSearch {
    let k = values.len();
    let dim = values.first().map_or(0, Vec::len);
    let limit = values.iter().flatten().filter_map(Real::precision_limit).min();
    let heuristic = limit.is_some();
    let bound_bits = 64 - bound.max(1).leading_zeros();
    let mut bits = (k as u32 + 1) * (bound_bits + 2) + 2 * (k * k) as u32 + 32;
    if let Some(l) = limit {
        bits = bits.min(l);
    }
    loop {
        let outcome = search_at(values, k, dim, bound, bits, heuristic);
        match (&outcome, limit) {
            (RelationSearch::Found { coefficients, .. }, _) => {
                // confirm at higher precision unless capped
                if limit.is_some() || confirm(values, coefficients, bits * 2) {
                    return outcome;
                }
            }
            (RelationSearch::Excluded { .. }, _) => return outcome,
            (RelationSearch::Inconclusive { .. }, Some(_)) => return outcome,
            (RelationSearch::Inconclusive { .. }, None) => {}
        }
        if bits > 4096 {
            return RelationSearch::Inconclusive { bound, bits };
        }
        bits *= 2;
    }
}

fn confirm(values: &[Vec<Real>], m: &[i64], bits: u32) -> bool {
    let dim = values.first().map_or(0, Vec::len);
    let total: u64 = m.iter().map(|x| x.unsigned_abs()).sum::<u64>() + 1;
    (0..dim).all(|c| {
        let s: BigInt = values.iter().zip(m).map(|(v, &mi)| v[c].fixed(bits) * BigInt::from(mi)).sum();
        s.abs() <= BigInt::from(4 * total)
    })
}

fn search_at(values: &[Vec<Real>], k: usize, dim: usize, bound: u64, bits: u32, heuristic: bool) -> RelationSearch {
    let fixed: Vec<Vec<BigInt>> = values.iter().map(|v| v.iter().map(|x| x.fixed(bits)).collect()).collect();
    // precision-capped inputs carry rounding noise far above one unit
    let noise: u64 = if heuristic { 1 << 8 } else { 4 };
    let rows: Vec<Vec<BigInt>> = (0..k)
        .map(|i| {
            let mut r: Vec<BigInt> = (0..k).map(|j| if i == j { BigInt::one() } else { BigInt::zero() }).collect();
            r.extend(fixed[i].iter().cloned());
            r
        })
        .collect();
    let (reduced, d) = lll(rows);
    for row in &reduced {
        let coeffs = &row[..k];
        let resid = &row[k..];
        let max = coeffs.iter().map(|c| c.abs()).max().unwrap_or_default();
        if max.is_zero() || max > BigInt::from(bound) {
            continue;
        }
        let total: BigInt = coeffs.iter().map(|c| c.abs()).sum::<BigInt>() + 1;
        if resid.iter().all(|r| r.abs() <= &total * BigInt::from(noise)) {
            let coefficients: Vec<i64> = coeffs.iter().map(|c| c.to_i64().unwrap_or(i64::MAX)).collect();
            return RelationSearch::Found { coefficients, bits };
        }
    }
    let min = (1..d.len())
        .map(|i| Rat::new(d[i].clone(), d[i - 1].clone()))
        .reduce(|a, b| if a < b { a } else { b })
        .unwrap_or_else(Rat::zero);
    let b = BigInt::from(bound);
    let kk = BigInt::from(k as u64);
    let resid = &kk * &b * BigInt::from(noise);
    let need = &kk * &b * &b + BigInt::from(dim as u64) * &resid * &resid;
    if min > Rat::from_integer(need) {
        RelationSearch::Excluded { bound, bits, heuristic }
    } else {
        RelationSearch::Inconclusive { bound, bits }
    }
}

/// Scalar relation search among `values`.
pub fn find_relation(values: &[Real], bound: u64) -> RelationSearch {
    let v: Vec<Vec<Real>> = values.iter().map(|x| vec![x.clone()]).collect();
    find_vector_relation(&v, bound)
}

/// `{1} ∪ {sqrt r}` spanning the rational span of the exact entries.
pub fn rational_span_basis<'a, I: IntoIterator<Item = &'a Scalar>>(entries: I) -> Result<Vec<Real>> {
    let mut exact: Vec<&Surd> = Vec::new();
    for e in entries {
        match e.as_exact() {
            Some(s) => exact.push(s),
            None => return Err(Error::Unsupported("floating entries in a rational span basis".into())),
        }
    }
    let basis = crate::linalg::radical_basis(exact.iter().copied());
    Ok(basis.into_iter().map(|r| Real::exact(Scalar::sqrt_int(r))).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bits_value(r: &Real, bits: u32) -> f64 {
        r.fixed(bits).to_f64().unwrap() / 2f64.powi(bits as i32)
    }

    #[test]
    fn named_constants_evaluate() {
        assert!((bits_value(&Real::Pi, 60) - std::f64::consts::PI).abs() < 1e-15);
        assert!((bits_value(&Real::E, 60) - std::f64::consts::E).abs() < 1e-15);
        let c = Real::Root { base: 2, degree: 3 };
        assert!((bits_value(&c, 60) - 2f64.cbrt()).abs() < 1e-15);
        assert!((bits_value(&c.clone().recip(), 60) - 1.0 / 2f64.cbrt()).abs() < 1e-15);
        assert_eq!(Real::parse("2^(1/3)").unwrap(), c);
        assert_eq!(Real::parse("1/pi").unwrap(), Real::Recip { of: Box::new(Real::Pi) });
    }

    #[test]
    fn sqrt2_relation_found() {
        // 2 * (1/sqrt 2) - sqrt 2 = 0
        let s2 = Real::exact(Scalar::sqrt_int(2));
        let vals = vec![Real::exact(Scalar::one()), Real::exact(Scalar::sqrt_int(5)), s2.clone(), s2.recip()];
        match find_relation(&vals, 1_000_000) {
            RelationSearch::Found { coefficients, .. } => {
                assert_eq!(coefficients[0], 0);
                assert_eq!(coefficients[1], 0);
                assert_eq!(coefficients[3], -2 * coefficients[2]);
                assert_ne!(coefficients[2], 0);
            }
            other => panic!("expected relation, got {other:?}"),
        }
    }

    #[test]
    fn cube_root_of_two_excluded() {
        let c = Real::Root { base: 2, degree: 3 };
        let vals = vec![Real::exact(Scalar::one()), Real::exact(Scalar::sqrt_int(5)), c.clone(), c.recip()];
        match find_relation(&vals, 1_000_000) {
            RelationSearch::Excluded { heuristic, .. } => assert!(!heuristic),
            other => panic!("expected exclusion, got {other:?}"),
        }
    }

    #[test]
    fn golden_relation() {
        // tau^2 = tau + 1
        let t = Real::exact(Scalar::tau());
        let vals = vec![Real::exact(Scalar::one()), t, Real::exact(&Scalar::tau() * &Scalar::tau())];
        match find_relation(&vals, 100) {
            RelationSearch::Found { coefficients, .. } => {
                let c = coefficients;
                assert!(c == vec![1, 1, -1] || c == vec![-1, -1, 1]);
            }
            other => panic!("{other:?}"),
        }
    }
}
