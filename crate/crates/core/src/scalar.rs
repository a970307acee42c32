//! Exact and floating scalars.
//!
//! Exact values live in the multi-quadratic field generated over the
//! rationals by square roots of positive integers: every value is a finite
//! sum `c_1 sqrt(r_1) + ... + c_k sqrt(r_k)` with rational `c_i` and distinct
//! square-free radicands `r_i` (radicand `1` is the rational part). Square
//! roots of distinct square-free integers are linearly independent over the
//! rationals, so this representation is canonical and structural equality is
//! value equality.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Default equality tolerance for floating scalars.
pub const DEFAULT_TOLERANCE: f64 = 1e-9;

/// Exact element of a multi-quadratic number field.
#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct Surd {
    terms: BTreeMap<u64, BigRational>,
}

fn is_square_free(mut n: u64) -> bool {
    let mut p = 2u64;
    while p * p <= n {
        if n % (p * p) == 0 {
            return false;
        }
        if n % p == 0 {
            n /= p;
        }
        p += 1;
    }
    true
}

/// Splits `n` into `k^2 * r` with `r` square-free.
fn square_free_split(mut n: u64) -> (u64, u64) {
    let mut k = 1u64;
    let mut r = 1u64;
    let mut p = 2u64;
    while p * p <= n {
        let mut e = 0;
        while n % p == 0 {
            n /= p;
            e += 1;
        }
        k *= p.pow(e / 2);
        if e % 2 == 1 {
            r *= p;
        }
        p += 1;
    }
    (k, r * n)
}

fn largest_prime_factor(mut n: u64) -> u64 {
    let mut best = 1;
    let mut p = 2u64;
    while p * p <= n {
        while n % p == 0 {
            best = p;
            n /= p;
        }
        p += 1;
    }
    if n > 1 {
        n
    } else {
        best
    }
}

pub(crate) fn rat(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

pub(crate) fn parse_rational(s: &str) -> Result<BigRational> {
    let s = s.trim();
    let bad = || Error::Parse(format!("invalid rational `{s}`"));
    if let Some((n, d)) = s.split_once('/') {
        let n: BigInt = n.trim().parse().map_err(|_| bad())?;
        let d: BigInt = d.trim().parse().map_err(|_| bad())?;
        if d.is_zero() {
            return Err(bad());
        }
        Ok(BigRational::new(n, d))
    } else {
        Ok(BigRational::from_integer(s.parse().map_err(|_| bad())?))
    }
}

pub(crate) fn fmt_rational(q: &BigRational) -> String {
    if q.denom().is_one() {
        q.numer().to_string()
    } else {
        format!("{}/{}", q.numer(), q.denom())
    }
}

fn rational_to_f64(q: &BigRational) -> f64 {
    q.to_f64().unwrap_or_else(|| {
        // ratios whose parts overflow f64 individually
        let shift = q.numer().bits().max(q.denom().bits()) as i64 - 60;
        if shift <= 0 {
            return f64::NAN;
        }
        let n = (q.numer() >> shift as usize).to_f64().unwrap_or(f64::NAN);
        let d = (q.denom() >> shift as usize).to_f64().unwrap_or(f64::NAN);
        n / d
    })
}

impl Surd {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn one() -> Self {
        Self::from_rational(BigRational::one())
    }

    pub fn from_integer(n: i64) -> Self {
        Self::from_rational(BigRational::from_integer(n.into()))
    }

    pub fn from_rational(q: BigRational) -> Self {
        let mut terms = BTreeMap::new();
        if !q.is_zero() {
            terms.insert(1, q);
        }
        Surd { terms }
    }

    /// `sqrt(n)` for a non-negative integer.
    pub fn sqrt_int(n: u64) -> Self {
        if n == 0 {
            return Self::zero();
        }
        let (k, r) = square_free_split(n);
        let mut terms = BTreeMap::new();
        terms.insert(r, BigRational::from_integer(k.into()));
        Surd { terms }
    }

    /// Exact square root of a non-negative rational whose numerator and
    /// denominator fit in 64 bits.
    pub fn sqrt_rational(q: &BigRational) -> Option<Self> {
        if q.is_negative() {
            return None;
        }
        let n = q.numer().to_u64()?;
        let d = q.denom().to_u64()?;
        let nd = n.checked_mul(d)?;
        Some(&Self::sqrt_int(nd) * &Self::from_rational(BigRational::new(1.into(), d.into())))
    }

    /// `(1 + sqrt 5) / 2`.
    pub fn golden() -> Self {
        let half = rat(1, 2);
        let mut terms = BTreeMap::new();
        terms.insert(1, half.clone());
        terms.insert(5, half);
        Surd { terms }
    }

    /// Sum of `coeff * sqrt(radicand)` terms; radicands need not be square-free.
    pub fn from_terms<I: IntoIterator<Item = (u64, BigRational)>>(it: I) -> Self {
        let mut out = Surd::zero();
        for (r, c) in it {
            out = &out + &(&Surd::sqrt_int(r) * &Surd::from_rational(c));
        }
        out
    }

    pub fn terms(&self) -> impl Iterator<Item = (u64, &BigRational)> {
        self.terms.iter().map(|(r, c)| (*r, c))
    }

    /// Coefficient of `sqrt(radicand)`.
    pub fn coefficient(&self, radicand: u64) -> BigRational {
        self.terms.get(&radicand).cloned().unwrap_or_else(BigRational::zero)
    }

    pub fn radicands(&self) -> impl Iterator<Item = u64> + '_ {
        self.terms.keys().copied()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_rational(&self) -> bool {
        self.terms.keys().all(|&r| r == 1)
    }

    pub fn to_rational(&self) -> Option<BigRational> {
        if self.is_rational() {
            Some(self.coefficient(1))
        } else {
            None
        }
    }

    pub fn to_f64(&self) -> f64 {
        self.terms
            .iter()
            .map(|(r, c)| rational_to_f64(c) * (*r as f64).sqrt())
            .sum()
    }

    fn insert(&mut self, r: u64, c: BigRational) {
        if c.is_zero() {
            return;
        }
        let slot = self.terms.entry(r).or_insert_with(BigRational::zero);
        *slot += c;
        if slot.is_zero() {
            self.terms.remove(&r);
        }
    }

    pub fn scale(&self, q: &BigRational) -> Surd {
        if q.is_zero() {
            return Surd::zero();
        }
        Surd {
            terms: self.terms.iter().map(|(r, c)| (*r, c * q)).collect(),
        }
    }

    /// Galois automorphism sending `sqrt(p) -> -sqrt(p)` for a prime `p`.
    pub fn conjugate(&self, p: u64) -> Surd {
        Surd {
            terms: self
                .terms
                .iter()
                .map(|(r, c)| (*r, if r % p == 0 { -c.clone() } else { c.clone() }))
                .collect(),
        }
    }

    /// Rigorous enclosure `[lo, hi]` of the value using `bits` of precision
    /// for each square root.
    pub fn enclosure(&self, bits: u32) -> (BigRational, BigRational) {
        let scale = BigInt::one() << bits;
        let mut lo = BigRational::zero();
        let mut hi = BigRational::zero();
        for (r, c) in &self.terms {
            if *r == 1 {
                lo += c;
                hi += c;
                continue;
            }
            let s = (BigInt::from(*r) << (2 * bits)).sqrt();
            let a = BigRational::new(s.clone(), scale.clone());
            let b = BigRational::new(s + 1, scale.clone());
            if c.is_positive() {
                lo += c * &a;
                hi += c * &b;
            } else {
                lo += c * &b;
                hi += c * &a;
            }
        }
        (lo, hi)
    }

    /// Exact sign.
    pub fn signum(&self) -> Ordering {
        if self.terms.is_empty() {
            return Ordering::Equal;
        }
        if let Some(q) = self.to_rational() {
            return q.cmp(&BigRational::zero());
        }
        let approx = self.to_f64();
        let mag: f64 = self
            .terms
            .iter()
            .map(|(r, c)| rational_to_f64(c).abs() * (*r as f64).sqrt())
            .sum();
        if approx.is_finite() && mag.is_finite() && approx.abs() > mag * 1e-12 {
            return approx.partial_cmp(&0.0).unwrap_or(Ordering::Equal);
        }
        let mut bits = 96;
        loop {
            let (lo, hi) = self.enclosure(bits);
            if lo.is_positive() {
                return Ordering::Greater;
            }
            if hi.is_negative() {
                return Ordering::Less;
            }
            bits *= 2;
        }
    }

    /// Multiplicative inverse; `None` for zero.
    pub fn inv(&self) -> Option<Surd> {
        if self.is_zero() {
            return None;
        }
        if let Some(q) = self.to_rational() {
            return Some(Surd::from_rational(q.recip()));
        }
        // Rationalise one prime at a time: x = u + v sqrt(p), 1/x = (u - v sqrt(p)) / (u^2 - p v^2).
        let p = self
            .terms
            .keys()
            .map(|&r| largest_prime_factor(r))
            .max()
            .unwrap_or(1);
        let conj = self.conjugate(p);
        let norm = self * &conj;
        Some(&norm.inv()? * &conj)
    }

    /// Largest integer not exceeding the value.
    pub fn floor(&self) -> BigInt {
        if let Some(q) = self.to_rational() {
            return q.floor().to_integer();
        }
        let (lo, _) = self.enclosure(64);
        let mut k = lo.floor().to_integer();
        // `lo` is within 2^-60 of the value; at most a couple of corrections.
        loop {
            let below = (self - &Surd::from_rational(BigRational::from_integer(k.clone()))).signum();
            if below == Ordering::Less {
                k -= 1;
                continue;
            }
            let above =
                (self - &Surd::from_rational(BigRational::from_integer(k.clone() + 1))).signum();
            if above != Ordering::Less {
                k += 1;
                continue;
            }
            return k;
        }
    }

    /// Value times `2^bits`, rounded to nearest with absolute error at most
    /// `1 + sum |c_i|`.
    pub fn to_fixed(&self, bits: u32) -> BigInt {
        let (lo, hi) = self.enclosure(bits + 2);
        let mid = (lo + hi) / BigRational::from_integer(2.into());
        (mid * BigRational::from_integer(BigInt::one() << bits)).round().to_integer()
    }
}

impl fmt::Display for Surd {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for (r, c) in &self.terms {
            let neg = c.is_negative();
            let mag = c.abs();
            if first {
                if neg {
                    write!(f, "-")?;
                }
            } else {
                write!(f, " {} ", if neg { "-" } else { "+" })?;
            }
            first = false;
            match (*r, mag.is_one()) {
                (1, _) => write!(f, "{}", fmt_rational(&mag))?,
                (r, true) => write!(f, "sqrt({r})")?,
                (r, false) => write!(f, "{}*sqrt({r})", fmt_rational(&mag))?,
            }
        }
        Ok(())
    }
}

impl fmt::Debug for Surd {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Surd({self})")
    }
}

impl Add for &Surd {
    type Output = Surd;
    fn add(self, rhs: &Surd) -> Surd {
        let mut out = self.clone();
        for (r, c) in &rhs.terms {
            out.insert(*r, c.clone());
        }
        out
    }
}

impl Sub for &Surd {
    type Output = Surd;
    fn sub(self, rhs: &Surd) -> Surd {
        let mut out = self.clone();
        for (r, c) in &rhs.terms {
            out.insert(*r, -c.clone());
        }
        out
    }
}

impl Neg for &Surd {
    type Output = Surd;
    fn neg(self) -> Surd {
        Surd {
            terms: self.terms.iter().map(|(r, c)| (*r, -c.clone())).collect(),
        }
    }
}

impl Mul for &Surd {
    type Output = Surd;
    fn mul(self, rhs: &Surd) -> Surd {
        let mut out = Surd::zero();
        for (r1, c1) in &self.terms {
            for (r2, c2) in &rhs.terms {
                // both square-free: r1 r2 = g^2 (r1/g)(r2/g)
                let g = r1.gcd(r2);
                let r = (r1 / g) * (r2 / g);
                out.insert(r, c1 * c2 * BigRational::from_integer(g.into()));
            }
        }
        out
    }
}

/// Exact or floating scalar.
#[derive(Clone)]
pub enum Scalar {
    Exact(Surd),
    /// Floating value compared with tolerance `tol`.
    Float { value: f64, tol: f64 },
}

impl fmt::Debug for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scalar::Exact(s) => write!(f, "{s}"),
            Scalar::Float { value, .. } => write!(f, "~{value}"),
        }
    }
}

impl fmt::Display for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

impl Default for Scalar {
    fn default() -> Self {
        Scalar::zero()
    }
}

impl From<i64> for Scalar {
    fn from(n: i64) -> Self {
        Scalar::int(n)
    }
}

impl From<Surd> for Scalar {
    fn from(s: Surd) -> Self {
        Scalar::Exact(s)
    }
}

impl From<BigRational> for Scalar {
    fn from(q: BigRational) -> Self {
        Scalar::Exact(Surd::from_rational(q))
    }
}

impl Scalar {
    pub fn zero() -> Self {
        Scalar::Exact(Surd::zero())
    }

    pub fn one() -> Self {
        Scalar::Exact(Surd::one())
    }

    pub fn int(n: i64) -> Self {
        Scalar::Exact(Surd::from_integer(n))
    }

    pub fn ratio(n: i64, d: i64) -> Self {
        Scalar::Exact(Surd::from_rational(rat(n, d)))
    }

    pub fn sqrt_int(n: u64) -> Self {
        Scalar::Exact(Surd::sqrt_int(n))
    }

    pub fn float(value: f64) -> Self {
        Scalar::Float { value, tol: DEFAULT_TOLERANCE }
    }

    /// Golden mean `(1 + sqrt 5)/2`.
    pub fn tau() -> Self {
        Scalar::Exact(Surd::golden())
    }

    /// Galois conjugate `(1 - sqrt 5)/2` of the golden mean.
    pub fn tau_conj() -> Self {
        Scalar::Exact(Surd::golden().conjugate(5))
    }

    pub fn is_exact(&self) -> bool {
        matches!(self, Scalar::Exact(_))
    }

    pub fn as_exact(&self) -> Option<&Surd> {
        match self {
            Scalar::Exact(s) => Some(s),
            Scalar::Float { .. } => None,
        }
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            Scalar::Exact(s) => s.to_f64(),
            Scalar::Float { value, .. } => *value,
        }
    }

    pub fn tolerance(&self) -> f64 {
        match self {
            Scalar::Exact(_) => 0.0,
            Scalar::Float { tol, .. } => *tol,
        }
    }

    fn combine(&self, other: &Scalar, value: f64) -> Scalar {
        Scalar::Float { value, tol: self.tolerance().max(other.tolerance()).max(DEFAULT_TOLERANCE) }
    }

    /// Sign; floating values within tolerance of zero report `Equal`.
    pub fn signum(&self) -> Ordering {
        match self {
            Scalar::Exact(s) => s.signum(),
            Scalar::Float { value, tol } => {
                if value.abs() <= *tol {
                    Ordering::Equal
                } else if *value > 0.0 {
                    Ordering::Greater
                } else {
                    Ordering::Less
                }
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        self.signum() == Ordering::Equal
    }

    pub fn is_rational(&self) -> bool {
        matches!(self, Scalar::Exact(s) if s.is_rational())
    }

    pub fn to_rational(&self) -> Option<BigRational> {
        self.as_exact().and_then(Surd::to_rational)
    }

    /// Comparison, exact when both sides are exact.
    pub fn cmp_to(&self, other: &Scalar) -> Ordering {
        if let (Scalar::Exact(a), Scalar::Exact(b)) = (self, other) {
            if a == b {
                return Ordering::Equal;
            }
            let (fa, fb) = (a.to_f64(), b.to_f64());
            let scale = fa.abs().max(fb.abs()).max(1.0);
            if (fa - fb).abs() > scale * 1e-12 {
                return fa.partial_cmp(&fb).unwrap_or(Ordering::Equal);
            }
        }
        (self - other).signum()
    }

    pub fn min_of<'a>(&'a self, other: &'a Scalar) -> &'a Scalar {
        if self.cmp_to(other) == Ordering::Greater {
            other
        } else {
            self
        }
    }

    pub fn max_of<'a>(&'a self, other: &'a Scalar) -> &'a Scalar {
        if self.cmp_to(other) == Ordering::Less {
            other
        } else {
            self
        }
    }

    pub fn abs(&self) -> Scalar {
        if self.signum() == Ordering::Less {
            -self
        } else {
            self.clone()
        }
    }

    pub fn checked_div(&self, rhs: &Scalar) -> Option<Scalar> {
        match (self, rhs) {
            (Scalar::Exact(a), Scalar::Exact(b)) => Some(Scalar::Exact(a * &b.inv()?)),
            _ => {
                if rhs.to_f64() == 0.0 {
                    None
                } else {
                    Some(self.combine(rhs, self.to_f64() / rhs.to_f64()))
                }
            }
        }
    }

    pub fn recip(&self) -> Option<Scalar> {
        Scalar::one().checked_div(self)
    }

    pub fn floor(&self) -> i64 {
        match self {
            Scalar::Exact(s) => s.floor().to_i64().expect("floor out of i64 range"),
            Scalar::Float { value, .. } => value.floor() as i64,
        }
    }

    /// Reduction modulo 1 into `[0, 1)`.
    pub fn frac(&self) -> Scalar {
        match self {
            Scalar::Exact(_) => self - &Scalar::int(self.floor()),
            Scalar::Float { value, tol } => {
                let mut f = value.rem_euclid(1.0);
                if f >= 1.0 || 1.0 - f <= *tol {
                    f = 0.0;
                }
                Scalar::Float { value: f, tol: *tol }
            }
        }
    }

    pub fn pow_int(&self, k: u32) -> Scalar {
        (0..k).fold(Scalar::one(), |acc, _| &acc * self)
    }

    pub fn mul_int(&self, k: i64) -> Scalar {
        self * &Scalar::int(k)
    }

    /// Parse an expression such as `1/2 + sqrt(5)/2`, `tau/3`, `2^(1/3)` or `1/pi`.
    pub fn parse(s: &str) -> Result<Scalar> {
        expr::parse(s)
    }
}

impl PartialEq for Scalar {
    fn eq(&self, other: &Scalar) -> bool {
        match (self, other) {
            (Scalar::Exact(a), Scalar::Exact(b)) => a == b,
            _ => (self - other).is_zero(),
        }
    }
}

macro_rules! scalar_binop {
    ($tr:ident, $m:ident, $op:tt) => {
        impl $tr for &Scalar {
            type Output = Scalar;
            fn $m(self, rhs: &Scalar) -> Scalar {
                match (self, rhs) {
                    (Scalar::Exact(a), Scalar::Exact(b)) => Scalar::Exact(a $op b),
                    _ => self.combine(rhs, self.to_f64() $op rhs.to_f64()),
                }
            }
        }
        impl $tr for Scalar {
            type Output = Scalar;
            fn $m(self, rhs: Scalar) -> Scalar {
                &self $op &rhs
            }
        }
        impl $tr<&Scalar> for Scalar {
            type Output = Scalar;
            fn $m(self, rhs: &Scalar) -> Scalar {
                &self $op rhs
            }
        }
    };
}

scalar_binop!(Add, add, +);
scalar_binop!(Sub, sub, -);
scalar_binop!(Mul, mul, *);

impl Div for &Scalar {
    type Output = Scalar;
    fn div(self, rhs: &Scalar) -> Scalar {
        self.checked_div(rhs).expect("division by zero")
    }
}

impl Div for Scalar {
    type Output = Scalar;
    fn div(self, rhs: Scalar) -> Scalar {
        &self / &rhs
    }
}

impl Neg for &Scalar {
    type Output = Scalar;
    fn neg(self) -> Scalar {
        match self {
            Scalar::Exact(a) => Scalar::Exact(-a),
            Scalar::Float { value, tol } => Scalar::Float { value: -value, tol: *tol },
        }
    }
}

impl Neg for Scalar {
    type Output = Scalar;
    fn neg(self) -> Scalar {
        -&self
    }
}

#[derive(Serialize, Deserialize)]
struct SurdTerm {
    radicand: u64,
    coeff: String,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
enum ScalarRepr {
    Rat {
        value: String,
    },
    Quad {
        rational: String,
        surds: Vec<SurdTerm>,
    },
    Float {
        value: f64,
        #[serde(default = "default_tol")]
        tol: f64,
    },
}

fn default_tol() -> f64 {
    DEFAULT_TOLERANCE
}

#[derive(Deserialize)]
#[serde(untagged)]
enum ScalarInput {
    Tagged(ScalarRepr),
    Int(i64),
    Number(f64),
    Expr(String),
}

impl Serialize for Scalar {
    fn serialize<S: Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        let repr = match self {
            Scalar::Exact(s) if s.is_rational() => ScalarRepr::Rat { value: fmt_rational(&s.coefficient(1)) },
            Scalar::Exact(s) => ScalarRepr::Quad {
                rational: fmt_rational(&s.coefficient(1)),
                surds: s
                    .terms()
                    .filter(|(r, _)| *r != 1)
                    .map(|(radicand, c)| SurdTerm { radicand, coeff: fmt_rational(c) })
                    .collect(),
            },
            Scalar::Float { value, tol } => ScalarRepr::Float { value: *value, tol: *tol },
        };
        repr.serialize(ser)
    }
}

impl<'de> Deserialize<'de> for Scalar {
    fn deserialize<D: Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let input = ScalarInput::deserialize(de)?;
        match input {
            ScalarInput::Tagged(ScalarRepr::Rat { value }) => {
                parse_rational(&value).map(Scalar::from).map_err(D::Error::custom)
            }
            ScalarInput::Tagged(ScalarRepr::Quad { rational, surds }) => {
                let mut terms = vec![(1, parse_rational(&rational).map_err(D::Error::custom)?)];
                for t in surds {
                    if t.radicand == 0 || !is_square_free(t.radicand) {
                        return Err(D::Error::custom(format!("radicand {} is not square-free", t.radicand)));
                    }
                    terms.push((t.radicand, parse_rational(&t.coeff).map_err(D::Error::custom)?));
                }
                Ok(Scalar::Exact(Surd::from_terms(terms)))
            }
            ScalarInput::Tagged(ScalarRepr::Float { value, tol }) => {
                if !(tol > 0.0) || !value.is_finite() {
                    return Err(D::Error::custom("float scalar needs finite value and positive tol"));
                }
                Ok(Scalar::Float { value, tol })
            }
            ScalarInput::Int(n) => Ok(Scalar::int(n)),
            ScalarInput::Number(v) => Ok(Scalar::float(v)),
            ScalarInput::Expr(s) => Scalar::parse(&s).map_err(D::Error::custom),
        }
    }
}

mod expr {
    //! Small recursive-descent parser for scalar expressions.
    use super::*;

    struct Parser<'a> {
        src: &'a [u8],
        pos: usize,
        text: &'a str,
    }

    pub(super) fn parse(s: &str) -> Result<Scalar> {
        let mut p = Parser { src: s.as_bytes(), pos: 0, text: s };
        let v = p.expr()?;
        p.skip_ws();
        if p.pos != p.src.len() {
            return Err(p.err("trailing input"));
        }
        Ok(v)
    }

    impl<'a> Parser<'a> {
        fn err(&self, what: &str) -> Error {
            Error::Parse(format!("{what} at offset {} in `{}`", self.pos, self.text))
        }

        fn skip_ws(&mut self) {
            while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
                self.pos += 1;
            }
        }

        fn peek(&mut self) -> Option<u8> {
            self.skip_ws();
            self.src.get(self.pos).copied()
        }

        fn eat(&mut self, c: u8) -> bool {
            if self.peek() == Some(c) {
                self.pos += 1;
                true
            } else {
                false
            }
        }

        fn expr(&mut self) -> Result<Scalar> {
            let mut acc = self.term()?;
            loop {
                if self.eat(b'+') {
                    acc = &acc + &self.term()?;
                } else if self.eat(b'-') {
                    acc = &acc - &self.term()?;
                } else {
                    return Ok(acc);
                }
            }
        }

        fn term(&mut self) -> Result<Scalar> {
            let mut acc = self.unary()?;
            loop {
                if self.eat(b'*') {
                    acc = &acc * &self.unary()?;
                } else if self.eat(b'/') {
                    let d = self.unary()?;
                    acc = acc.checked_div(&d).ok_or_else(|| self.err("division by zero"))?;
                } else {
                    return Ok(acc);
                }
            }
        }

        fn unary(&mut self) -> Result<Scalar> {
            if self.eat(b'-') {
                return Ok(-self.unary()?);
            }
            if self.eat(b'+') {
                return self.unary();
            }
            let base = self.atom()?;
            if self.eat(b'^') {
                let exp = self.unary()?;
                return self.power(base, exp);
            }
            Ok(base)
        }

        fn power(&self, base: Scalar, exp: Scalar) -> Result<Scalar> {
            let Some(q) = exp.to_rational() else {
                return Ok(Scalar::float(base.to_f64().powf(exp.to_f64())));
            };
            let n = q.numer().to_i64().ok_or_else(|| self.err("exponent too large"))?;
            let d = q.denom().to_i64().ok_or_else(|| self.err("exponent too large"))?;
            let mut acc = if d == 1 {
                base.clone()
            } else if d == 2 {
                sqrt(&base).ok_or_else(|| self.err("square root of a negative number"))?
            } else {
                Scalar::float(base.to_f64().powf(1.0 / d as f64))
            };
            let root = acc.clone();
            acc = Scalar::one();
            for _ in 0..n.unsigned_abs() {
                acc = &acc * &root;
            }
            if n < 0 {
                acc = acc.recip().ok_or_else(|| self.err("zero to a negative power"))?;
            }
            Ok(acc)
        }

        fn atom(&mut self) -> Result<Scalar> {
            match self.peek() {
                Some(b'(') => {
                    self.pos += 1;
                    let v = self.expr()?;
                    if !self.eat(b')') {
                        return Err(self.err("expected `)`"));
                    }
                    Ok(v)
                }
                Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
                Some(c) if c.is_ascii_alphabetic() => self.ident(),
                _ => Err(self.err("expected a number, constant or `(`")),
            }
        }

        fn number(&mut self) -> Result<Scalar> {
            let start = self.pos;
            while self.pos < self.src.len()
                && (self.src[self.pos].is_ascii_digit() || self.src[self.pos] == b'.')
            {
                self.pos += 1;
            }
            let mant_end = self.pos;
            let mut exp10 = 0i32;
            if self.pos < self.src.len() && matches!(self.src[self.pos], b'e' | b'E') {
                let save = self.pos;
                self.pos += 1;
                let neg = self.src.get(self.pos) == Some(&b'-');
                if neg || self.src.get(self.pos) == Some(&b'+') {
                    self.pos += 1;
                }
                let es = self.pos;
                while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                    self.pos += 1;
                }
                if es == self.pos {
                    self.pos = save;
                } else {
                    exp10 = self.text[es..self.pos].parse().map_err(|_| self.err("bad exponent"))?;
                    if neg {
                        exp10 = -exp10;
                    }
                }
            }
            let lit = &self.text[start..mant_end];
            let (int, frac) = lit.split_once('.').unwrap_or((lit, ""));
            let digits = format!("{int}{frac}");
            if digits.is_empty() {
                return Err(self.err("bad number"));
            }
            let mantissa: BigInt = digits.parse().map_err(|_| self.err("bad number"))?;
            let e = exp10 - frac.len() as i32;
            let ten = BigInt::from(10);
            let q = if e >= 0 {
                BigRational::from_integer(mantissa * num_traits::pow(ten, e as usize))
            } else {
                BigRational::new(mantissa, num_traits::pow(ten, (-e) as usize))
            };
            Ok(Scalar::from(q))
        }

        fn ident(&mut self) -> Result<Scalar> {
            let start = self.pos;
            while self.pos < self.src.len()
                && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_' || self.src[self.pos] == b'\'')
            {
                self.pos += 1;
            }
            let name = &self.text[start..self.pos];
            let func = |p: &mut Self| -> Result<Scalar> {
                if !p.eat(b'(') {
                    return Err(p.err("expected `(`"));
                }
                let v = p.expr()?;
                if !p.eat(b')') {
                    return Err(p.err("expected `)`"));
                }
                Ok(v)
            };
            match name {
                "tau" | "phi" => Ok(Scalar::tau()),
                "taup" | "tau'" | "tauc" => Ok(Scalar::tau_conj()),
                "pi" => Ok(Scalar::float(std::f64::consts::PI)),
                "e" => Ok(Scalar::float(std::f64::consts::E)),
                "sqrt" => {
                    let v = func(self)?;
                    sqrt(&v).ok_or_else(|| self.err("square root of a negative number"))
                }
                "cbrt" => {
                    let v = func(self)?;
                    Ok(Scalar::float(v.to_f64().cbrt()))
                }
                "float" => {
                    let v = func(self)?;
                    Ok(Scalar::float(v.to_f64()))
                }
                _ => Err(self.err(&format!("unknown identifier `{name}`"))),
            }
        }
    }

    fn sqrt(v: &Scalar) -> Option<Scalar> {
        if v.signum() == Ordering::Less {
            return None;
        }
        if let Some(q) = v.to_rational() {
            if let Some(s) = Surd::sqrt_rational(&q) {
                return Some(Scalar::Exact(s));
            }
        }
        Some(Scalar::float(v.to_f64().sqrt()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn golden_identities() {
        let t = Surd::golden();
        let tp = t.conjugate(5);
        assert_eq!(&t * &t, &t + &Surd::one());
        assert_eq!(&t - &tp, Surd::sqrt_int(5));
        assert_eq!(&t * &tp, Surd::from_integer(-1));
    }

    #[test]
    fn square_free_reduction() {
        assert_eq!(Surd::sqrt_int(12), &Surd::from_integer(2) * &Surd::sqrt_int(3));
        assert_eq!(&Surd::sqrt_int(6) * &Surd::sqrt_int(10), &Surd::from_integer(2) * &Surd::sqrt_int(15));
        assert_eq!(&Surd::sqrt_int(2) * &Surd::sqrt_int(2), Surd::from_integer(2));
    }

    #[test]
    fn inverse_multiquadratic() {
        let x = &(&Surd::sqrt_int(2) + &Surd::sqrt_int(5)) + &Surd::from_integer(1);
        let y = x.inv().unwrap();
        assert_eq!(&x * &y, Surd::one());
        assert!(Surd::zero().inv().is_none());
    }

    #[test]
    fn sign_of_tiny_difference() {
        // 5741/4059 approximates sqrt 2 from above to ~4e-8
        let d = &Surd::sqrt_int(2) - &Surd::from_rational(rat(5741, 4059));
        assert_eq!(d.signum(), Ordering::Less);
        // a difference far below f64 resolution
        let big = BigInt::from(10).pow(40);
        let s = (BigInt::from(2) * &big * &big).sqrt();
        let q = BigRational::new(s, big);
        let d = &Surd::sqrt_int(2) - &Surd::from_rational(q);
        assert_eq!(d.signum(), Ordering::Greater);
    }

    #[test]
    fn floor_and_frac() {
        let t = Scalar::tau();
        assert_eq!(t.floor(), 1);
        assert_eq!(Scalar::tau_conj().floor(), -1);
        assert_eq!((&t * &Scalar::int(100)).floor(), 161);
        let f = Scalar::tau_conj().frac();
        assert_eq!(f, &Scalar::tau_conj() + &Scalar::int(1));
    }

    #[test]
    fn parse_expressions() {
        assert_eq!(Scalar::parse("1/2 + sqrt(5)/2").unwrap(), Scalar::tau());
        assert_eq!(Scalar::parse("tau/3*3").unwrap(), Scalar::tau());
        assert_eq!(Scalar::parse("-0.25").unwrap(), Scalar::ratio(-1, 4));
        assert_eq!(Scalar::parse("1e-3").unwrap(), Scalar::ratio(1, 1000));
        assert_eq!(Scalar::parse("2^(1/2)").unwrap(), Scalar::sqrt_int(2));
        assert_eq!(Scalar::parse("sqrt(1/2)*2").unwrap(), Scalar::sqrt_int(2));
        assert_eq!(Scalar::parse("tau'").unwrap(), Scalar::tau_conj());
        let c = Scalar::parse("2^(1/3)").unwrap();
        assert!(!c.is_exact());
        assert!((c.to_f64() - 2f64.cbrt()).abs() < 1e-15);
        assert!(Scalar::parse("1/0").is_err());
        assert!(Scalar::parse("foo").is_err());
        assert!(Scalar::parse("1 +").is_err());
    }

    #[test]
    fn json_forms() {
        let t = Scalar::tau();
        let j = serde_json::to_string(&t).unwrap();
        assert_eq!(j, r#"{"type":"quad","rational":"1/2","surds":[{"radicand":5,"coeff":"1/2"}]}"#);
        let back: Scalar = serde_json::from_str(&j).unwrap();
        assert_eq!(back, t);
        let r: Scalar = serde_json::from_str(r#"{"type":"rat","value":"-3/2"}"#).unwrap();
        assert_eq!(r, Scalar::ratio(-3, 2));
        let e: Scalar = serde_json::from_str(r#""tau/3""#).unwrap();
        assert_eq!(e, Scalar::tau().checked_div(&Scalar::int(3)).unwrap());
        assert!(serde_json::from_str::<Scalar>(r#"{"type":"quad","rational":"0","surds":[{"radicand":8,"coeff":"1"}]}"#).is_err());
    }

    #[test]
    fn float_tolerance() {
        let a = Scalar::float(0.1);
        let b = &Scalar::ratio(1, 10) + &Scalar::float(1e-12);
        assert_eq!(a, b);
        assert!(Scalar::float(1e-10).is_zero());
        assert!(!Scalar::float(1e-6).is_zero());
    }
}
