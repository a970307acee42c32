//! Internal spaces: finite products of concrete locally compact abelian
//! groups, their elements and group law.
//!
//! Supported factors are `ℝ^m`, `ℤ^k`, `ℤ/q`, tori `ℝ^d / Dℤ^d` and a single
//! level of twisted cyclic extension `(H × ℤ_m, ⊕)` with carry `b★`:
//!
//! ```text
//! (h1, r1) ⊕ (h2, r2) = (h1 + h2,      r1 + r2)      if r1 + r2 < m
//!                     = (h1 + h2 + b★, r1 + r2 - m)  otherwise
//! ```
//!
//! Torus points are stored by fundamental coordinates `u ∈ [0,1)^d`, the
//! point being `D u`.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Factor {
    Real { dim: usize },
    IntegerRank { rank: usize },
    FiniteCyclic { q: u64 },
    /// `ℝ^dim` modulo the lattice spanned by the columns of `basis`.
    Torus { dim: usize, basis: Matrix },
    Twisted { base: Descriptor, m: u64, b_star: HPoint },
}

/// Ordered list of factors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Descriptor {
    pub factors: Vec<Factor>,
}

/// Coordinates of one factor.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Coord {
    Real(Vec<Scalar>),
    Integer(Vec<i64>),
    Cyclic(u64),
    /// Fundamental coordinates in `[0,1)`.
    Torus(Vec<Scalar>),
    Twisted { base: HPoint, r: u64 },
}

/// Element of an internal space, one coordinate block per factor.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct HPoint(pub Vec<Coord>);

impl fmt::Display for HPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .0
            .iter()
            .map(|c| match c {
                Coord::Real(v) | Coord::Torus(v) => {
                    let s: Vec<String> = v.iter().map(|x| x.to_string()).collect();
                    if v.len() == 1 {
                        s[0].clone()
                    } else {
                        format!("({})", s.join(", "))
                    }
                }
                Coord::Integer(v) => format!("{v:?}"),
                Coord::Cyclic(r) => format!("{r}"),
                Coord::Twisted { base, r } => format!("({base}; {r})"),
            })
            .collect();
        write!(f, "{}", parts.join(" × "))
    }
}

impl HPoint {
    /// Point of the one-dimensional real space.
    pub fn real(x: Scalar) -> HPoint {
        HPoint(vec![Coord::Real(vec![x])])
    }

    /// Sole real coordinate of a point of `ℝ`, if that is its shape.
    pub fn as_real(&self) -> Option<&Scalar> {
        match self.0.as_slice() {
            [Coord::Real(v)] if v.len() == 1 => Some(&v[0]),
            _ => None,
        }
    }

    pub fn is_exact(&self) -> bool {
        self.0.iter().all(|c| match c {
            Coord::Real(v) | Coord::Torus(v) => v.iter().all(Scalar::is_exact),
            Coord::Twisted { base, .. } => base.is_exact(),
            _ => true,
        })
    }

    /// Flat `f64` view of the continuous coordinates, for sorting and
    /// nearest-neighbour prefilters.
    pub fn approx(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for c in &self.0 {
            match c {
                Coord::Real(v) | Coord::Torus(v) => out.extend(v.iter().map(Scalar::to_f64)),
                Coord::Integer(v) => out.extend(v.iter().map(|&x| x as f64)),
                Coord::Cyclic(r) => out.push(*r as f64),
                Coord::Twisted { base, r } => {
                    out.push(*r as f64);
                    out.extend(base.approx());
                }
            }
        }
        out
    }
}

fn mismatch(what: &str) -> Error {
    Error::DescriptorMismatch(what.to_string())
}

fn reduce_unit(x: &Scalar) -> Scalar {
    x.frac()
}

impl Descriptor {
    pub fn new(factors: Vec<Factor>) -> Result<Descriptor> {
        let d = Descriptor { factors };
        d.validate()?;
        Ok(d)
    }

    /// `ℝ^dim`.
    pub fn real(dim: usize) -> Descriptor {
        Descriptor { factors: vec![Factor::Real { dim }] }
    }

    pub fn validate(&self) -> Result<()> {
        self.validate_at(0)
    }

    fn validate_at(&self, depth: usize) -> Result<()> {
        for f in &self.factors {
            match f {
                Factor::Real { .. } | Factor::IntegerRank { .. } => {}
                Factor::FiniteCyclic { q } => {
                    if *q < 2 {
                        return Err(Error::InvalidDescriptor(format!("cyclic order {q} < 2")));
                    }
                }
                Factor::Torus { dim, basis } => {
                    if basis.len() != *dim || basis.iter().any(|r| r.len() != *dim) {
                        return Err(Error::InvalidDescriptor("torus basis must be dim × dim".into()));
                    }
                    if linalg::det(basis).is_zero() {
                        return Err(Error::InvalidDescriptor("torus basis is singular".into()));
                    }
                }
                Factor::Twisted { base, m, b_star } => {
                    if depth > 0 {
                        return Err(Error::InvalidDescriptor("twist of a twist is not supported".into()));
                    }
                    if *m < 1 {
                        return Err(Error::InvalidDescriptor("twist order m must be at least 1".into()));
                    }
                    base.validate_at(depth + 1)?;
                    base.check(b_star)?;
                }
            }
        }
        Ok(())
    }

    /// Shape check of `x` against this descriptor (canonical ranges included).
    pub fn check(&self, x: &HPoint) -> Result<()> {
        if x.0.len() != self.factors.len() {
            return Err(mismatch("factor count"));
        }
        for (f, c) in self.factors.iter().zip(&x.0) {
            match (f, c) {
                (Factor::Real { dim }, Coord::Real(v)) if v.len() == *dim => {}
                (Factor::IntegerRank { rank }, Coord::Integer(v)) if v.len() == *rank => {}
                (Factor::FiniteCyclic { q }, Coord::Cyclic(r)) => {
                    if r >= q {
                        return Err(mismatch("residue out of range"));
                    }
                }
                (Factor::Torus { dim, .. }, Coord::Torus(u)) if u.len() == *dim => {
                    if u.iter().any(|t| t.signum() == Ordering::Less || t.cmp_to(&Scalar::one()) != Ordering::Less) {
                        return Err(mismatch("torus coordinate outside [0,1)"));
                    }
                }
                (Factor::Twisted { base, m, .. }, Coord::Twisted { base: b, r }) => {
                    if r >= m {
                        return Err(mismatch("twist residue out of range"));
                    }
                    base.check(b)?;
                }
                _ => return Err(mismatch("factor kind or dimension")),
            }
        }
        Ok(())
    }

    pub fn zero(&self) -> HPoint {
        HPoint(
            self.factors
                .iter()
                .map(|f| match f {
                    Factor::Real { dim } => Coord::Real(vec![Scalar::zero(); *dim]),
                    Factor::IntegerRank { rank } => Coord::Integer(vec![0; *rank]),
                    Factor::FiniteCyclic { .. } => Coord::Cyclic(0),
                    Factor::Torus { dim, .. } => Coord::Torus(vec![Scalar::zero(); *dim]),
                    Factor::Twisted { base, .. } => Coord::Twisted { base: base.zero(), r: 0 },
                })
                .collect(),
        )
    }

    /// Group law `x ⊕ y`.
    pub fn add(&self, x: &HPoint, y: &HPoint) -> Result<HPoint> {
        if x.0.len() != self.factors.len() || y.0.len() != self.factors.len() {
            return Err(mismatch("factor count"));
        }
        let mut out = Vec::with_capacity(self.factors.len());
        for ((f, a), b) in self.factors.iter().zip(&x.0).zip(&y.0) {
            out.push(match (f, a, b) {
                (Factor::Real { dim }, Coord::Real(u), Coord::Real(v)) if u.len() == *dim && v.len() == *dim => {
                    Coord::Real(u.iter().zip(v).map(|(p, q)| p + q).collect())
                }
                (Factor::IntegerRank { rank }, Coord::Integer(u), Coord::Integer(v))
                    if u.len() == *rank && v.len() == *rank =>
                {
                    Coord::Integer(u.iter().zip(v).map(|(p, q)| p + q).collect())
                }
                (Factor::FiniteCyclic { q }, Coord::Cyclic(r), Coord::Cyclic(s)) => Coord::Cyclic((r + s) % q),
                (Factor::Torus { dim, .. }, Coord::Torus(u), Coord::Torus(v)) if u.len() == *dim && v.len() == *dim => {
                    Coord::Torus(u.iter().zip(v).map(|(p, q)| reduce_unit(&(p + q))).collect())
                }
                (Factor::Twisted { base, m, b_star }, Coord::Twisted { base: h1, r: r1 }, Coord::Twisted { base: h2, r: r2 }) => {
                    let s = r1 + r2;
                    let h = base.add(h1, h2)?;
                    if s < *m {
                        Coord::Twisted { base: h, r: s }
                    } else {
                        Coord::Twisted { base: base.add(&h, b_star)?, r: s - m }
                    }
                }
                _ => return Err(mismatch("factor kind or dimension")),
            });
        }
        Ok(HPoint(out))
    }

    pub fn negate(&self, x: &HPoint) -> Result<HPoint> {
        self.scale(-1, x)
    }

    pub fn sub(&self, x: &HPoint, y: &HPoint) -> Result<HPoint> {
        self.add(x, &self.negate(y)?)
    }

    /// `k`-fold sum of `x` (negative `k` sums the inverse).
    pub fn scale(&self, k: i64, x: &HPoint) -> Result<HPoint> {
        if x.0.len() != self.factors.len() {
            return Err(mismatch("factor count"));
        }
        let mut out = Vec::with_capacity(self.factors.len());
        for (f, c) in self.factors.iter().zip(&x.0) {
            out.push(match (f, c) {
                (Factor::Real { .. }, Coord::Real(v)) => Coord::Real(v.iter().map(|t| t.mul_int(k)).collect()),
                (Factor::IntegerRank { .. }, Coord::Integer(v)) => Coord::Integer(v.iter().map(|t| t * k).collect()),
                (Factor::FiniteCyclic { q }, Coord::Cyclic(r)) => {
                    Coord::Cyclic(((*r as i128 * k as i128).rem_euclid(*q as i128)) as u64)
                }
                (Factor::Torus { .. }, Coord::Torus(v)) => {
                    Coord::Torus(v.iter().map(|t| reduce_unit(&t.mul_int(k))).collect())
                }
                (Factor::Twisted { base, m, b_star }, Coord::Twisted { base: h, r }) => {
                    // sum of k copies: residue k r mod m, carries floor(k r / m)
                    let kr = *r as i128 * k as i128;
                    let m = *m as i128;
                    let carries = kr.div_euclid(m) as i64;
                    let h = base.add(&base.scale(k, h)?, &base.scale(carries, b_star)?)?;
                    Coord::Twisted { base: h, r: kr.rem_euclid(m) as u64 }
                }
                _ => return Err(mismatch("factor kind or dimension")),
            });
        }
        Ok(HPoint(out))
    }

    /// Canonical representative: residues reduced, torus coordinates in `[0,1)`.
    pub fn reduce(&self, x: &HPoint) -> Result<HPoint> {
        // adding zero runs every factor through its reduction
        self.add(x, &self.zero())
    }

    /// Canonical point from unreduced data (residues and torus coordinates
    /// taken modulo their periods).
    pub fn canonical(&self, x: HPoint) -> Result<HPoint> {
        if x.0.len() != self.factors.len() {
            return Err(mismatch("factor count"));
        }
        let mut out = Vec::new();
        for (f, c) in self.factors.iter().zip(x.0) {
            out.push(match (f, c) {
                (Factor::FiniteCyclic { q }, Coord::Cyclic(r)) => Coord::Cyclic(r % q),
                (Factor::Torus { .. }, Coord::Torus(v)) => Coord::Torus(v.iter().map(reduce_unit).collect()),
                (Factor::Twisted { base, m, b_star }, Coord::Twisted { base: h, r }) => {
                    let carries = (r / m) as i64;
                    let h = base.add(&base.canonical(h)?, &base.scale(carries, b_star)?)?;
                    Coord::Twisted { base: h, r: r % m }
                }
                (_, c) => c,
            });
        }
        let p = HPoint(out);
        self.check(&p)?;
        Ok(p)
    }

    /// Number of linear coordinates: real dimensions plus integer ranks,
    /// including those of a twisted base.
    pub fn linear_dim(&self) -> usize {
        self.factors
            .iter()
            .map(|f| match f {
                Factor::Real { dim } => *dim,
                Factor::IntegerRank { rank } => *rank,
                Factor::Twisted { base, .. } => base.linear_dim(),
                _ => 0,
            })
            .sum()
    }

    /// Homomorphism to `ℝ^linear_dim`: real and integer coordinates, with a
    /// twisted point `(h, r)` sent to `lin(h) + (r/m) lin(b★)`.
    pub fn linearize(&self, x: &HPoint) -> Vec<Scalar> {
        let mut out = Vec::with_capacity(self.linear_dim());
        for (f, c) in self.factors.iter().zip(&x.0) {
            match (f, c) {
                (Factor::Real { .. }, Coord::Real(v)) => out.extend(v.iter().cloned()),
                (Factor::IntegerRank { .. }, Coord::Integer(v)) => out.extend(v.iter().map(|&t| Scalar::int(t))),
                (Factor::Twisted { base, m, b_star }, Coord::Twisted { base: h, r }) => {
                    let frac = Scalar::ratio(*r as i64, *m as i64);
                    let lb = base.linearize(b_star);
                    for (a, b) in base.linearize(h).iter().zip(&lb) {
                        out.push(a + &(&frac * b));
                    }
                }
                _ => {}
            }
        }
        out
    }

    /// Haar mass of the compact part: `∏ q · ∏ |det D| · ∏ m` (twisted bases
    /// included).
    pub fn compact_mass(&self) -> Scalar {
        let mut acc = Scalar::one();
        for f in &self.factors {
            match f {
                Factor::FiniteCyclic { q } => acc = &acc * &Scalar::int(*q as i64),
                Factor::Torus { basis, .. } => acc = &acc * &linalg::det(basis).abs(),
                Factor::Twisted { base, m, .. } => {
                    acc = &acc * &base.compact_mass();
                    acc = &acc * &Scalar::int(*m as i64);
                }
                _ => {}
            }
        }
        acc
    }

    /// Torus point with fundamental coordinates `D^{-1} x mod 1`.
    pub fn torus_coords(basis: &Matrix, x: &[Scalar]) -> Result<Vec<Scalar>> {
        let inv = linalg::inverse(basis).ok_or_else(|| Error::InvalidDescriptor("torus basis is singular".into()))?;
        Ok(linalg::mat_vec(&inv, x).iter().map(reduce_unit).collect())
    }

    pub fn has_twist(&self) -> bool {
        self.factors.iter().any(|f| matches!(f, Factor::Twisted { .. }))
    }

    pub fn has_torus(&self) -> bool {
        self.factors.iter().any(|f| match f {
            Factor::Torus { .. } => true,
            Factor::Twisted { base, .. } => base.has_torus(),
            _ => false,
        })
    }

    /// `self × other`.
    pub fn product(&self, other: &Descriptor) -> Descriptor {
        let mut factors = self.factors.clone();
        factors.extend(other.factors.iter().cloned());
        Descriptor { factors }
    }
}

impl fmt::Display for Descriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .factors
            .iter()
            .map(|x| match x {
                Factor::Real { dim: 1 } => "R".to_string(),
                Factor::Real { dim } => format!("R^{dim}"),
                Factor::IntegerRank { rank: 1 } => "Z".to_string(),
                Factor::IntegerRank { rank } => format!("Z^{rank}"),
                Factor::FiniteCyclic { q } => format!("Z/{q}"),
                Factor::Torus { dim, .. } => format!("T^{dim}"),
                Factor::Twisted { base, m, b_star } => format!("({base} ⋊ Z_{m}; b★={b_star})"),
            })
            .collect();
        if parts.is_empty() {
            write!(f, "0")
        } else {
            write!(f, "{}", parts.join(" × "))
        }
    }
}

/// Haar measure of a window region, under the normalization: Lebesgue on
/// real factors, counting on discrete ones, total mass `|det D|` on tori.
pub fn haar_measure(h: &Descriptor, region: &crate::window::Window) -> Result<Scalar> {
    region.measure(h)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn twisted(m: u64) -> Descriptor {
        Descriptor::new(vec![Factor::Twisted {
            base: Descriptor::real(1),
            m,
            b_star: HPoint::real(Scalar::tau_conj()),
        }])
        .unwrap()
    }

    fn tp(h: Scalar, r: u64) -> HPoint {
        HPoint(vec![Coord::Twisted { base: HPoint::real(h), r }])
    }

    #[test]
    fn twisted_carry() {
        let h = twisted(3);
        let (a, b) = (Scalar::ratio(1, 2), Scalar::ratio(1, 3));
        let s = h.add(&tp(a.clone(), 2), &tp(b.clone(), 2)).unwrap();
        assert_eq!(s, tp(&(&a + &b) + &Scalar::tau_conj(), 1));
        // m = 1: residues sum to 0 < m, so the base group is recovered
        let h1 = twisted(1);
        let s = h1.add(&tp(a.clone(), 0), &tp(b.clone(), 0)).unwrap();
        assert_eq!(s, tp(&a + &b, 0));
    }

    #[test]
    fn twisted_inverse() {
        let h = twisted(3);
        let x = tp(Scalar::int(2), 2);
        let n = h.negate(&x).unwrap();
        assert_eq!(n, tp(&Scalar::int(-2) - &Scalar::tau_conj(), 1));
        assert_eq!(h.add(&x, &n).unwrap(), h.zero());
    }

    #[test]
    fn scale_matches_repeated_addition() {
        let h = twisted(3);
        let x = tp(Scalar::ratio(1, 7), 2);
        let mut acc = h.zero();
        for k in 0..7 {
            assert_eq!(h.scale(k, &x).unwrap(), acc);
            acc = h.add(&acc, &x).unwrap();
        }
        let mut acc = h.zero();
        for k in 0..7 {
            assert_eq!(h.scale(-k, &x).unwrap(), acc);
            acc = h.sub(&acc, &x).unwrap();
        }
    }

    #[test]
    fn cyclic_and_torus() {
        let h = Descriptor::new(vec![
            Factor::FiniteCyclic { q: 5 },
            Factor::Torus { dim: 1, basis: vec![vec![Scalar::int(2)]] },
        ])
        .unwrap();
        let x = HPoint(vec![Coord::Cyclic(2), Coord::Torus(vec![Scalar::ratio(3, 4)])]);
        assert_eq!(h.negate(&x).unwrap(), HPoint(vec![Coord::Cyclic(3), Coord::Torus(vec![Scalar::ratio(1, 4)])]));
        let y = h.add(&x, &x).unwrap();
        assert_eq!(y, HPoint(vec![Coord::Cyclic(4), Coord::Torus(vec![Scalar::ratio(1, 2)])]));
        assert_eq!(h.compact_mass(), Scalar::int(10));
        assert_eq!(h.reduce(&y).unwrap(), y);
    }

    #[test]
    fn linearize_is_additive() {
        let h = twisted(3);
        let x = tp(Scalar::ratio(1, 2), 2);
        let y = tp(Scalar::ratio(1, 3), 2);
        let s = h.add(&x, &y).unwrap();
        let lx = h.linearize(&x);
        let ly = h.linearize(&y);
        assert_eq!(h.linearize(&s), vec![&lx[0] + &ly[0]]);
    }

    #[test]
    fn validation() {
        assert!(Descriptor::new(vec![Factor::FiniteCyclic { q: 1 }]).is_err());
        assert!(Descriptor::new(vec![Factor::Torus { dim: 1, basis: vec![vec![Scalar::zero()]] }]).is_err());
        let inner = Factor::Twisted { base: Descriptor::real(1), m: 2, b_star: HPoint::real(Scalar::one()) };
        let nested = Descriptor { factors: vec![inner.clone()] };
        let outer = Factor::Twisted {
            base: nested.clone(),
            m: 2,
            b_star: nested.zero(),
        };
        assert!(Descriptor::new(vec![outer]).is_err());
        assert!(twisted(3).add(&tp(Scalar::one(), 0), &HPoint::real(Scalar::one())).is_err());
    }

    #[test]
    fn json_roundtrip() {
        let h = twisted(3);
        let s = serde_json::to_string(&h).unwrap();
        let back: Descriptor = serde_json::from_str(&s).unwrap();
        assert_eq!(back, h);
        let x = tp(Scalar::tau(), 1);
        let back: HPoint = serde_json::from_str(&serde_json::to_string(&x).unwrap()).unwrap();
        assert_eq!(back, x);
    }
}
