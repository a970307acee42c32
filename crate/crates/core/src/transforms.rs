//! Scheme constructions with certified relations between old and new
//! projection sets:
//!
//! * translation schemes `H × ℤ` (incommensurate shift) and `(H × ℤ_m, ⊕)`
//!   (commensurate shift, minimal `m` with `m a ∈ L`), where
//!   `n a + Λ_W = Λ′_{lift(W, n)}`;
//! * torus extensions `H × ℝ^d/Dℤ^d` for a generic diagonal `D`, making the
//!   star map injective without changing any projection set;
//! * window augmentation `W′ = U ∪ Γ★` for almost model sets, on a declared
//!   truncation box.

use std::cmp::Ordering;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{annihilator_projection, verify_equality, verify_inclusion};
use crate::error::{Error, Result};
use crate::hull::{fmt_point, AlmostModelSetWitness};
use crate::linalg::{self, Matrix};
use crate::relation::{self, Real, RelationSearch};
use crate::scalar::Scalar;
use crate::scheme::{Commensurability, CutProjectScheme, DirectBox, Generator};
use crate::space::{Coord, Descriptor, Factor, HPoint};
use crate::window::{Properties, Region, TorusRegion, Window};

/// Half-width of the default verification box `[-20, 20]^d`.
pub const DEFAULT_CHECK_RADIUS: i64 = 20;

pub fn default_box(d: usize) -> DirectBox {
    DirectBox::cube(d, &Scalar::int(DEFAULT_CHECK_RADIUS))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransformKind {
    Translation,
    QuotientTranslation,
    InjectiveExtension,
    WindowAugmentation,
}

/// One patch equality checked for a certificate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PatchCheck {
    #[serde(rename = "box")]
    pub bbox: DirectBox,
    pub window: Window,
    /// Multiple of the shift (translation certificates only).
    #[serde(default)]
    pub n: i64,
    pub lhs: usize,
    pub rhs: usize,
    pub equal: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub witness: Option<Vec<Scalar>>,
}

/// How windows of the input scheme become windows of the output scheme.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum LiftRule {
    /// `W ↦ W × {n}`, taken modulo `J = ⟨(b★, -m)⟩` when `m` is present.
    Translation { a: Vec<Scalar>, m: Option<u64>, b: HPoint },
    /// `W ↦ W × 𝕂`.
    TorusProduct { constants: Vec<Real> },
    /// `W ↦ U ∪ Γ★`, complete on the truncation box.
    Augmentation { witness: Box<AlmostModelSetWitness>, window: Window },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InjectivityCheck {
    /// `φ` checked injective on `|n_i| ≤ radius`.
    pub radius: i64,
    pub kernel: Option<Vec<i64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransformCertificate {
    pub kind: TransformKind,
    pub input: String,
    pub output: String,
    pub lift: LiftRule,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generic: Option<GenericCertificate>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub injectivity: Option<InjectivityCheck>,
    pub checks: Vec<PatchCheck>,
}

impl TransformCertificate {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.equal)
            && self.generic.as_ref().is_none_or(|g| g.passed)
            && self.injectivity.as_ref().is_none_or(|i| i.kernel.is_none())
    }

    /// Recomputes every listed check against the given schemes.
    pub fn reverify(&self, input: &CutProjectScheme, output: &CutProjectScheme) -> Result<Vec<PatchCheck>> {
        if input.id() != self.input || output.id() != self.output {
            return Err(Error::InvalidScheme(format!(
                "certificate is for schemes {} -> {}, got {} -> {}",
                self.input,
                self.output,
                input.id(),
                output.id()
            )));
        }
        self.checks
            .par_iter()
            .map(|c| match &self.lift {
                LiftRule::Translation { a, .. } => check_translation(input, output, a, &c.window, c.n, &c.bbox),
                LiftRule::TorusProduct { .. } => check_extension(input, output, &c.window, &c.bbox),
                LiftRule::Augmentation { witness, window } => check_augmentation(output, witness, window, &c.bbox),
            })
            .collect()
    }
}

/// Shape of a translation scheme's internal space.
enum Shape<'a> {
    /// `H × ℤ`; holds the factor count of `H`.
    Integer(usize),
    Twisted { base: &'a Descriptor, m: u64, b_star: &'a HPoint },
}

fn shape(h: &Descriptor) -> Result<Shape<'_>> {
    match h.factors.as_slice() {
        [Factor::Twisted { base, m, b_star }] => Ok(Shape::Twisted { base, m: *m, b_star }),
        [.., Factor::IntegerRank { rank: 1 }] => Ok(Shape::Integer(h.factors.len() - 1)),
        _ => Err(Error::NotTranslationExtension),
    }
}

/// The class of `(x, n) ∈ H × ℤ` in the internal space of a translation
/// scheme.
pub fn lift_point(x: &HPoint, n: i64, scheme: &CutProjectScheme) -> Result<HPoint> {
    match shape(scheme.internal())? {
        Shape::Integer(k) => {
            if x.0.len() != k {
                return Err(Error::DescriptorMismatch("point does not match the base space".into()));
            }
            let mut v = x.0.clone();
            v.push(Coord::Integer(vec![n]));
            Ok(HPoint(v))
        }
        Shape::Twisted { base, m, b_star } => {
            let m = m as i64;
            // (x, n) + J = (x + s b★, r) for n = r + s m
            let (s, r) = (n.div_euclid(m), n.rem_euclid(m));
            let h = base.add(x, &base.scale(s, b_star)?)?;
            Ok(HPoint(vec![Coord::Twisted { base: h, r: r as u64 }]))
        }
    }
}

/// `W × {n}`, or `(W × {n}) + J` in the twisted case.
pub fn lift_window(w: &Window, n: i64, scheme: &CutProjectScheme) -> Result<Window> {
    if let Window::Augmented { open, points, certified } = w {
        return Ok(Window::Augmented {
            open: Box::new(lift_window(open, n, scheme)?),
            points: points.iter().map(|p| lift_point(p, n, scheme)).collect::<Result<_>>()?,
            certified: certified.clone(),
        });
    }
    match shape(scheme.internal())? {
        Shape::Integer(_) => w.times(Region::Integer([vec![n]].into())),
        Shape::Twisted { base, m, b_star } => {
            let m = m as i64;
            let (s, r) = (n.div_euclid(m), n.rem_euclid(m));
            let shifted = w.translate(base, &base.scale(s, b_star)?)?;
            Ok(Window::Product(vec![Region::Twisted([(r as u64, shifted)].into())]))
        }
    }
}

/// Translation scheme of a shift `a`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Translation {
    pub scheme: CutProjectScheme,
    pub a: Vec<Scalar>,
    /// `(a, b) ∈ 𝓛′`.
    pub b: HPoint,
    /// Minimal `m` with `m a ∈ L`; absent for an incommensurate shift.
    pub m: Option<u64>,
    /// New lattice coordinates of the old generators.
    pub embed: Vec<Vec<i64>>,
    /// New lattice coordinates of `(a, b)`.
    pub a_coords: Vec<i64>,
    pub certificate: TransformCertificate,
}

fn to_i64(x: &BigInt) -> Result<i64> {
    x.to_i64().ok_or_else(|| Error::Unsupported("lattice coordinate overflows i64".into()))
}

/// Rational `c` with `c · basis = v`, required integral.
fn integer_coords(basis: &[Vec<BigInt>], v: &[BigInt]) -> Result<Vec<i64>> {
    let r = basis.len();
    let a: Vec<Vec<BigRational>> =
        (0..r).map(|j| (0..r).map(|i| BigRational::from_integer(basis[i][j].clone())).collect()).collect();
    let b: Vec<BigRational> = v.iter().cloned().map(BigRational::from_integer).collect();
    let c = linalg::solve_rational(&a, &b).ok_or_else(|| Error::InvalidScheme("lattice basis is singular".into()))?;
    c.iter()
        .map(|x| {
            if x.is_integer() {
                to_i64(&x.to_integer())
            } else {
                Err(Error::InvalidScheme("vector is not in the lattice".into()))
            }
        })
        .collect()
}

/// Translation scheme `(ℝ^d, H′, 𝓛′)` of the shift `a`, with patch checks
/// `a + Λ_W = Λ′_{lift(W, 1)}` on the default box for each given window.
///
/// Commensurability is decided up to `bound`; an undecided float shift is an
/// error, never treated as incommensurate.
pub fn translate_cps(scheme: &CutProjectScheme, a: &[Scalar], bound: u64, windows: &[Window]) -> Result<Translation> {
    let d = scheme.d();
    let r = scheme.rank();
    let h = scheme.internal();
    let comm = scheme.is_commensurate(a, bound)?;
    let (out, m, embed, a_coords, b) = match comm {
        Commensurability::Incommensurate { .. } => {
            let h2 = h.product(&Descriptor { factors: vec![Factor::IntegerRank { rank: 1 }] });
            let with = |x: &HPoint, k: i64| {
                let mut v = x.0.clone();
                v.push(Coord::Integer(vec![k]));
                HPoint(v)
            };
            let mut gens: Vec<Generator> =
                scheme.generators().iter().map(|g| Generator { g: g.g.clone(), h: with(&g.h, 0) }).collect();
            gens.push(Generator { g: a.to_vec(), h: with(&h.zero(), 1) });
            let out = CutProjectScheme::new(d, h2, gens)?;
            let embed: Vec<Vec<i64>> = (0..r).map(|i| (0..=r).map(|j| i64::from(i == j)).collect()).collect();
            let a_coords: Vec<i64> = (0..=r).map(|j| i64::from(j == r)).collect();
            let b = with(&h.zero(), 1);
            (out, None, embed, a_coords, b)
        }
        Commensurability::Commensurate { m, coords, .. } => {
            if h.has_twist() {
                return Err(Error::Unsupported("commensurate translation of a twisted scheme".into()));
            }
            let b_star = scheme.star(&coords);
            let h2 = Descriptor::new(vec![Factor::Twisted { base: h.clone(), m, b_star }])?;
            let tw = |x: &HPoint, k: u64| HPoint(vec![Coord::Twisted { base: x.clone(), r: k }]);
            // 𝓛′ ≅ ℤ^r + ℤ (n_b / m); scaled by m its generators are m e_i and n_b
            let mut rows: Vec<Vec<BigInt>> = (0..r)
                .map(|i| (0..r).map(|j| if i == j { BigInt::from(m) } else { BigInt::zero() }).collect())
                .collect();
            let nb: Vec<BigInt> = coords.iter().map(|&x| BigInt::from(x)).collect();
            rows.push(nb.clone());
            let (basis, transform) = linalg::hermite_basis(&rows);
            if basis.len() != r {
                return Err(Error::InvalidScheme("translation lattice has the wrong rank".into()));
            }
            let unit = h2.canonical(tw(&h.zero(), 1))?;
            let mut gens = Vec::with_capacity(r);
            for u in &transform {
                let u: Vec<i64> = u.iter().map(to_i64).collect::<Result<_>>()?;
                let mut g = a.iter().map(|x| x.mul_int(u[r])).collect::<Vec<_>>();
                let mut hh = h2.scale(u[r], &unit)?;
                for (i, gen) in scheme.generators().iter().enumerate() {
                    if u[i] == 0 {
                        continue;
                    }
                    for (x, y) in g.iter_mut().zip(&gen.g) {
                        *x = &*x + &y.mul_int(u[i]);
                    }
                    hh = h2.add(&hh, &h2.scale(u[i], &tw(&gen.h, 0))?)?;
                }
                gens.push(Generator { g, h: hh });
            }
            let out = CutProjectScheme::new(d, h2, gens)?;
            let embed: Vec<Vec<i64>> = (0..r)
                .map(|i| {
                    let v: Vec<BigInt> =
                        (0..r).map(|j| if i == j { BigInt::from(m) } else { BigInt::zero() }).collect();
                    integer_coords(&basis, &v)
                })
                .collect::<Result<_>>()?;
            let a_coords = integer_coords(&basis, &nb)?;
            (out, Some(m), embed, a_coords, unit)
        }
    };
    let kind = if m.is_some() { TransformKind::QuotientTranslation } else { TransformKind::Translation };
    let bx = default_box(d);
    let checks = windows
        .par_iter()
        .flat_map_iter(|w| (-2..=2).map(move |n| (w, n)))
        .map(|(w, n)| check_translation(scheme, &out, a, w, n, &bx))
        .collect::<Result<Vec<_>>>()?;
    let certificate = TransformCertificate {
        kind,
        input: scheme.id().to_string(),
        output: out.id().to_string(),
        lift: LiftRule::Translation { a: a.to_vec(), m, b: b.clone() },
        generic: None,
        injectivity: None,
        checks,
    };
    Ok(Translation { scheme: out, a: a.to_vec(), b, m, embed, a_coords, certificate })
}

/// `n a + Λ_W = Λ′_{lift(W, n)}` on `b`.
pub fn check_translation(
    input: &CutProjectScheme,
    output: &CutProjectScheme,
    a: &[Scalar],
    w: &Window,
    n: i64,
    b: &DirectBox,
) -> Result<PatchCheck> {
    let na: Vec<Scalar> = a.iter().map(|x| x.mul_int(n)).collect();
    let neg: Vec<Scalar> = na.iter().map(|x| -x).collect();
    let mut lhs = input.project_points(&b.translate(&neg), w)?.translate(&na);
    lhs.bbox = b.clone();
    let rhs = output.project_points(b, &lift_window(w, n, output)?)?;
    let c = verify_equality(&lhs, &rhs)?;
    Ok(PatchCheck { bbox: b.clone(), window: w.clone(), n, lhs: lhs.len(), rhs: rhs.len(), equal: c.holds, witness: c.witness })
}

/// Flags of `W` and of `lift(W, n)` agree.
pub fn lift_preserves_properties(
    input: &CutProjectScheme,
    t: &Translation,
    w: &Window,
    n: i64,
) -> Result<(Properties, Properties)> {
    let p = w.check_properties(input.internal())?;
    let q = lift_window(w, n, &t.scheme)?.check_properties(t.scheme.internal())?;
    Ok((p, q))
}

/// Checks of `𝓛′ ∩ (G × H) = 𝓛` and `(a, b) ∈ 𝓛′`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StructuralReport {
    pub generators_ok: bool,
    pub a_in_lattice: bool,
    /// Random elements of `𝓛` found in `𝓛′`.
    pub lifted: usize,
    /// Random elements of `𝓛′ ∩ (G × H)` found in `𝓛`.
    pub restricted: usize,
    pub failures: Vec<String>,
    pub passed: bool,
}

/// Component in `H` of a point of the translation scheme lying in `H × {0}`.
fn base_part(x: &HPoint, out: &CutProjectScheme) -> Result<Option<HPoint>> {
    Ok(match shape(out.internal())? {
        Shape::Integer(k) => match x.0.get(k) {
            Some(Coord::Integer(v)) if v == &[0] => Some(HPoint(x.0[..k].to_vec())),
            _ => None,
        },
        Shape::Twisted { .. } => match x.0.as_slice() {
            [Coord::Twisted { base, r: 0 }] => Some(base.clone()),
            _ => None,
        },
    })
}

/// Residue index `k` of a point of the translation scheme: `x - k (a, b)`
/// lies in `H × {0}`.
fn residue(x: &HPoint, out: &CutProjectScheme) -> Result<i64> {
    Ok(match shape(out.internal())? {
        Shape::Integer(k) => match x.0.get(k) {
            Some(Coord::Integer(v)) => v[0],
            _ => return Err(Error::DescriptorMismatch("not a translation point".into())),
        },
        Shape::Twisted { .. } => match x.0.as_slice() {
            [Coord::Twisted { r, .. }] => *r as i64,
            _ => return Err(Error::DescriptorMismatch("not a translation point".into())),
        },
    })
}

pub fn structural_check(
    input: &CutProjectScheme,
    t: &Translation,
    samples: usize,
    seed: u64,
) -> Result<StructuralReport> {
    let out = &t.scheme;
    let mut failures = Vec::new();
    let mut generators_ok = true;
    for (i, g) in input.generators().iter().enumerate() {
        let lifted = lift_point(&g.h, 0, out)?;
        if out.coordinates_of(&g.g, &lifted) != Some(t.embed[i].clone()) {
            generators_ok = false;
            failures.push(format!("generator {i} is not in the new lattice at its embedded coordinates"));
        }
    }
    let a_in_lattice = out.coordinates_of(&t.a, &t.b).is_some();
    if !a_in_lattice {
        failures.push("(a, b) is not a lattice point".into());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let r = input.rank();
    let r2 = out.rank();
    let mut lifted = 0;
    let mut restricted = 0;
    for _ in 0..samples {
        let n: Vec<i64> = (0..r).map(|_| rng.gen_range(-50..=50)).collect();
        let (g, h) = (input.point(&n), input.star(&n));
        if out.coordinates_of(&g, &lift_point(&h, 0, out)?).is_some() {
            lifted += 1;
        } else {
            failures.push(format!("old lattice point {n:?} missing from the new lattice"));
        }
        let n2: Vec<i64> = (0..r2).map(|_| rng.gen_range(-50..=50)).collect();
        let k = residue(&out.star(&n2), out)?;
        let n3: Vec<i64> = n2.iter().zip(&t.a_coords).map(|(x, y)| x - k * y).collect();
        let (g3, h3) = (out.point(&n3), out.star(&n3));
        match base_part(&h3, out)? {
            Some(hb) if input.coordinates_of(&g3, &hb).is_some() => restricted += 1,
            Some(_) => failures.push(format!("new lattice point {n3:?} in G × H is not an old lattice point")),
            None => failures.push(format!("removing the residue of {n2:?} left {n3:?} outside G × H")),
        }
    }
    let passed = failures.is_empty();
    Ok(StructuralReport { generators_ok, a_in_lattice, lifted, restricted, failures, passed })
}

/// How candidate constants for a generic lattice are produced.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "strategy", rename_all = "snake_case")]
pub enum GenericStrategy {
    /// `2^(1/3), 3^(1/3), 5^(1/3), 7^(1/3), 2^(1/5), 3^(1/5), π, e` in turn.
    NamedConstants,
    /// Odd-degree real roots of seeded random integers.
    RandomReals { seed: u64 },
    Given { constants: Vec<Real> },
}

/// Bounded relation search certifying `D ∩ ℚspan(A) = {0}` and
/// `D° ∩ ℚspan(A) = {0}` for `D = diag(c)ℤ^d`. A pass is evidence, not a
/// proof: only relations with coefficients up to `bound` are excluded.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenericCertificate {
    pub constants: Vec<Real>,
    /// Basis of `ℚspan(A ∪ {1})` used in the search.
    pub span_basis: Vec<Real>,
    pub bound: u64,
    pub outcome: Option<RelationSearch>,
    pub heuristic: bool,
    pub passed: bool,
    /// Relation found, as text.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub relation: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenericLattice {
    pub constants: Vec<Real>,
    pub basis: Matrix,
    pub certificate: GenericCertificate,
}

fn span_basis(a: &[Vec<Scalar>]) -> Result<Vec<Real>> {
    let entries: Vec<&Scalar> = a.iter().flatten().collect();
    let exact: Vec<&Scalar> = entries.iter().copied().filter(|x| x.is_exact()).collect();
    let mut basis = relation::rational_span_basis(exact)?;
    if !basis.iter().any(Real::is_exact_rational) {
        basis.insert(0, Real::exact(Scalar::one()));
    }
    let mut floats: Vec<Real> = Vec::new();
    for x in entries.iter().filter(|x| !x.is_exact() && !x.is_zero()) {
        if !floats.iter().any(|f| (f.to_f64() - x.to_f64()).abs() <= 1e-12 * x.to_f64().abs().max(1.0)) {
            floats.push(Real::exact((*x).clone()));
        }
    }
    // drop floating entries already in the span of the others
    for f in floats {
        let mut trial = basis.clone();
        trial.push(f.clone());
        match relation::find_relation(&trial, 1000) {
            RelationSearch::Found { ref coefficients, .. } if coefficients.last() != Some(&0) => {}
            _ => basis.push(f),
        }
    }
    Ok(basis)
}

fn relation_text(coefficients: &[i64], labels: &[String]) -> String {
    let terms: Vec<String> = coefficients
        .iter()
        .zip(labels)
        .filter(|(c, _)| **c != 0)
        .map(|(c, l)| format!("{c}*({l})"))
        .collect();
    format!("{} = 0", terms.join(" + "))
}

/// Runs the relation search for the constants `c` against the points `a`.
pub fn certify_constants(a: &[Vec<Scalar>], constants: &[Real], bound: u64) -> Result<GenericCertificate> {
    let basis = span_basis(a)?;
    let mut cert = GenericCertificate {
        constants: constants.to_vec(),
        span_basis: basis.clone(),
        bound,
        outcome: None,
        heuristic: true,
        passed: false,
        relation: None,
    };
    if let Some(c) = constants.iter().find(|c| c.is_exact_rational()) {
        cert.relation = Some(format!("{c} is rational"));
        return Ok(cert);
    }
    let mut values = basis.clone();
    values.extend(constants.iter().cloned());
    values.extend(constants.iter().cloned().map(Real::recip));
    let labels: Vec<String> = values.iter().map(|v| v.to_string()).collect();
    let outcome = relation::find_relation(&values, bound);
    if let RelationSearch::Found { coefficients, .. } = &outcome {
        cert.relation = Some(relation_text(coefficients, &labels));
    }
    cert.passed = matches!(outcome, RelationSearch::Excluded { .. });
    cert.outcome = Some(outcome);
    Ok(cert)
}

fn named_ladder() -> Vec<Real> {
    vec![
        Real::Root { base: 2, degree: 3 },
        Real::Root { base: 3, degree: 3 },
        Real::Root { base: 5, degree: 3 },
        Real::Root { base: 7, degree: 3 },
        Real::Root { base: 2, degree: 5 },
        Real::Root { base: 3, degree: 5 },
        Real::Pi,
        Real::E,
    ]
}

const RANDOM_ATTEMPTS: usize = 16;

/// Picks `D = diag(c_1..c_d)` whose entries and inverses avoid rational
/// relations with the coordinates of `a` (bounded search).
pub fn choose_generic_lattice(
    a: &[Vec<Scalar>],
    d: usize,
    strategy: &GenericStrategy,
    bound: u64,
) -> Result<GenericLattice> {
    let candidates: Vec<Vec<Real>> = match strategy {
        GenericStrategy::NamedConstants => {
            let l = named_ladder();
            (0..l.len()).map(|j| (0..d).map(|i| l[(j + i) % l.len()].clone()).collect()).collect()
        }
        GenericStrategy::RandomReals { seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            (0..RANDOM_ATTEMPTS)
                .map(|_| {
                    (0..d)
                        .map(|_| Real::Root { base: rng.gen_range(2..1000), degree: [3, 5, 7][rng.gen_range(0..3)] })
                        .collect()
                })
                .collect()
        }
        GenericStrategy::Given { constants } => {
            if constants.len() != d {
                return Err(Error::BoxMismatch(format!("{} constants for dimension {d}", constants.len())));
            }
            vec![constants.clone()]
        }
    };
    let mut last = None;
    for cs in candidates {
        let cert = certify_constants(a, &cs, bound)?;
        if cert.passed {
            let basis = (0..d)
                .map(|i| (0..d).map(|j| if i == j { cs[i].to_scalar() } else { Scalar::zero() }).collect())
                .collect();
            return Ok(GenericLattice { constants: cs, basis, certificate: cert });
        }
        last = Some(cert);
    }
    let last = last.expect("at least one candidate");
    Err(Error::CertificationFailed {
        reason: format!("no candidate lattice passed the relation search at bound {bound}"),
        witness: last.relation.or_else(|| Some(format!("search outcome {:?}", last.outcome))),
    })
}

/// Extension options; `windows` are checked on every box in `boxes`.
#[derive(Clone, Debug, PartialEq)]
pub struct ExtendOptions {
    pub relation_bound: u64,
    /// Injectivity radius; by default the largest radius up to 200 keeping
    /// the kernel scan near `2·10^7` candidates.
    pub injectivity_radius: Option<i64>,
    pub boxes: Vec<DirectBox>,
    pub windows: Vec<Window>,
}

impl ExtendOptions {
    pub fn new(d: usize) -> ExtendOptions {
        ExtendOptions { relation_bound: 1_000_000, injectivity_radius: None, boxes: vec![default_box(d)], windows: Vec::new() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Extension {
    pub scheme: CutProjectScheme,
    pub lattice: GenericLattice,
    pub certificate: TransformCertificate,
}

/// Points whose rational span the torus lattice must avoid: generator
/// direct parts and the direct projection of the annihilator.
pub fn generic_data(scheme: &CutProjectScheme) -> Vec<Vec<Scalar>> {
    let mut a: Vec<Vec<Scalar>> = scheme.generators().iter().map(|g| g.g.clone()).collect();
    if let Ok(p) = annihilator_projection(scheme, 2 * scheme.rank()) {
        a.extend(p);
    }
    a
}

/// `H′ = H × ℝ^d/Dℤ^d` with star `n ↦ (star(n), ι(n).G mod D)`.
pub fn extend_injective(scheme: &CutProjectScheme, constants: &[Real], opts: &ExtendOptions) -> Result<Extension> {
    let d = scheme.d();
    let lattice = choose_generic_lattice(
        &generic_data(scheme),
        d,
        &GenericStrategy::Given { constants: constants.to_vec() },
        opts.relation_bound,
    )?;
    let basis = lattice.basis.clone();
    let h2 = scheme.internal().product(&Descriptor { factors: vec![Factor::Torus { dim: d, basis: basis.clone() }] });
    let gens = scheme
        .generators()
        .iter()
        .map(|g| {
            let mut h = g.h.0.clone();
            h.push(Coord::Torus(Descriptor::torus_coords(&basis, &g.g)?));
            Ok(Generator { g: g.g.clone(), h: HPoint(h) })
        })
        .collect::<Result<Vec<_>>>()?;
    let out = CutProjectScheme::new(d, h2, gens)?;
    let r = out.rank() as i32;
    let radius = opts.injectivity_radius.unwrap_or_else(|| {
        let mut n = 200i64;
        while n > 1 && ((4 * n + 1) as f64).powi(r) > 2e7 {
            n -= 1;
        }
        n
    });
    if let Some(kernel) = star_kernel(&out, 2 * radius) {
        return Err(Error::NotInjective { kernel });
    }
    let pairs: Vec<(&DirectBox, &Window)> = opts.boxes.iter().flat_map(|b| opts.windows.iter().map(move |w| (b, w))).collect();
    let checks = pairs
        .par_iter()
        .map(|(b, w)| check_extension(scheme, &out, w, b))
        .collect::<Result<Vec<_>>>()?;
    let certificate = TransformCertificate {
        kind: TransformKind::InjectiveExtension,
        input: scheme.id().to_string(),
        output: out.id().to_string(),
        lift: LiftRule::TorusProduct { constants: lattice.constants.clone() },
        generic: Some(lattice.certificate.clone()),
        injectivity: Some(InjectivityCheck { radius, kernel: None }),
        checks,
    };
    Ok(Extension { scheme: out, lattice, certificate })
}

/// `Λ_W = Λ′_{W × 𝕂}` on `b`.
pub fn check_extension(input: &CutProjectScheme, output: &CutProjectScheme, w: &Window, b: &DirectBox) -> Result<PatchCheck> {
    let lhs = input.project_points(b, w)?;
    let rhs = output.project_points(b, &w.times(Region::Torus(TorusRegion::Full))?)?;
    let c = verify_equality(&lhs, &rhs)?;
    Ok(PatchCheck { bbox: b.clone(), window: w.clone(), n: 0, lhs: lhs.len(), rhs: rhs.len(), equal: c.holds, witness: c.witness })
}

/// Per-generator floating data for the kernel prefilter.
struct Signature {
    linear: Vec<Vec<f64>>,
    torus: Vec<Vec<f64>>,
    cyclic: Vec<Vec<u64>>,
    orders: Vec<u64>,
}

fn signature(scheme: &CutProjectScheme) -> Signature {
    let r = scheme.rank();
    let h = scheme.internal();
    let mut orders = Vec::new();
    collect_orders(h, &mut orders);
    let mut sig = Signature { linear: Vec::new(), torus: Vec::new(), cyclic: Vec::new(), orders };
    for i in 0..r {
        let e: Vec<i64> = (0..r).map(|j| i64::from(i == j)).collect();
        sig.linear.push(scheme.star_approx(&e));
        let (mut t, mut c) = (Vec::new(), Vec::new());
        collect_compact(&scheme.generators()[i].h, &mut t, &mut c);
        sig.torus.push(t);
        sig.cyclic.push(c);
    }
    sig
}

fn collect_orders(h: &Descriptor, out: &mut Vec<u64>) {
    for f in &h.factors {
        match f {
            Factor::FiniteCyclic { q } => out.push(*q),
            Factor::Twisted { base, m, .. } => {
                out.push(*m);
                collect_orders(base, out);
            }
            _ => {}
        }
    }
}

fn collect_compact(x: &HPoint, torus: &mut Vec<f64>, cyclic: &mut Vec<u64>) {
    for c in &x.0 {
        match c {
            Coord::Torus(v) => torus.extend(v.iter().map(Scalar::to_f64)),
            Coord::Cyclic(r) => cyclic.push(*r),
            Coord::Twisted { base, r } => {
                cyclic.push(*r);
                collect_compact(base, torus, cyclic);
            }
            _ => {}
        }
    }
}

/// Nonzero `k` with `|k_i| ≤ radius` and `star(k) = 0`, if any: a floating
/// prefilter followed by an exact check.
pub fn star_kernel(scheme: &CutProjectScheme, radius: i64) -> Option<Vec<i64>> {
    let r = scheme.rank();
    let sig = signature(scheme);
    let zero = scheme.internal().zero();
    let scale: f64 = sig.linear.iter().flatten().map(|x| x.abs()).fold(1.0, f64::max) * radius as f64 * r as f64;
    let near_zero = |k: &[i64]| -> bool {
        let l = sig.linear.first().map_or(0, Vec::len);
        for j in 0..l {
            let s: f64 = k.iter().zip(&sig.linear).map(|(&a, v)| a as f64 * v[j]).sum();
            if s.abs() > 1e-9 * scale {
                return false;
            }
        }
        let t = sig.torus.first().map_or(0, Vec::len);
        for j in 0..t {
            let s: f64 = k.iter().zip(&sig.torus).map(|(&a, v)| a as f64 * v[j]).sum();
            if (s - s.round()).abs() > 1e-9 * scale {
                return false;
            }
        }
        // cyclic parts of twisted points carry into the base, which the
        // exact check settles; plain cyclic residues must vanish
        let _ = &sig.orders;
        true
    };
    (-radius..=radius).into_par_iter().find_map_first(|k0| {
        let mut k = vec![-radius; r];
        k[0] = k0;
        if r == 1 {
            k[0] = k0;
        }
        loop {
            if k.iter().any(|&x| x != 0) && near_zero(&k) && scheme.star(&k) == zero {
                return Some(k.clone());
            }
            let mut p = 1;
            while p < r {
                k[p] += 1;
                if k[p] <= radius {
                    break;
                }
                k[p] = -radius;
                p += 1;
            }
            if p >= r {
                return None;
            }
        }
    })
}

/// `W′ = U ∪ {star(n) : ι(n).G ∈ Γ ∩ T}` on the truncation box `T`.
///
/// Requires the star map to separate the points of `Λ_W ∩ T`; the returned
/// window refuses enumeration outside `T`.
pub fn almost_to_model(scheme: &CutProjectScheme, witness: &AlmostModelSetWitness, truncation: &DirectBox) -> Result<Window> {
    witness.verify(scheme, truncation)?;
    let h = scheme.internal();
    let upper = scheme.project_points(truncation, &witness.compact)?;
    let coords = upper.coords.clone().unwrap_or_default();
    let stars: Vec<HPoint> = coords.par_iter().map(|n| scheme.star(n)).collect();
    let approx: Vec<Vec<f64>> = stars.iter().map(HPoint::approx).collect();
    let mut idx: Vec<usize> = (0..stars.len()).collect();
    idx.sort_by(|&i, &j| approx[i].partial_cmp(&approx[j]).unwrap_or(Ordering::Equal));
    for (p, &i) in idx.iter().enumerate() {
        for &j in &idx[p + 1..] {
            let gap = approx[j].first().zip(approx[i].first()).map_or(0.0, |(a, b)| a - b);
            if gap > 1e-7 {
                break;
            }
            if stars[i] == stars[j] {
                let kernel = coords[i].iter().zip(&coords[j]).map(|(a, b)| a - b).collect();
                return Err(Error::NotInjective { kernel });
            }
        }
    }
    let gamma = witness.gamma_patch(scheme, truncation)?;
    let pts: Vec<HPoint> = gamma.coords.unwrap_or_default().iter().map(|n| scheme.star(n)).collect();
    Window::augmented(h, witness.open.clone(), pts, Some(truncation.clone()))
}

/// `Λ_{W′} ∩ B = Γ ∩ B`.
pub fn check_augmentation(
    scheme: &CutProjectScheme,
    witness: &AlmostModelSetWitness,
    window: &Window,
    b: &DirectBox,
) -> Result<PatchCheck> {
    let lhs = scheme.project_points(b, window)?;
    let rhs = witness.gamma_patch(scheme, b)?;
    let c = verify_equality(&lhs, &rhs)?;
    Ok(PatchCheck { bbox: b.clone(), window: window.clone(), n: 0, lhs: lhs.len(), rhs: rhs.len(), equal: c.holds, witness: c.witness })
}

/// The inclusions `U ⊆ (W′)° ⊆ W′ ⊆ cl(W′) ⊆ W̄`.
pub fn augmentation_chain(h: &Descriptor, witness: &AlmostModelSetWitness, w2: &Window) -> Result<[bool; 4]> {
    let int = w2.interior(h)?;
    let cl = w2.closure(h)?;
    Ok([
        witness.open.is_subset(&int, h)?,
        int.is_subset(w2, h)?,
        w2.is_subset(&cl, h)?,
        cl.is_subset(&witness.compact.closure(h)?, h)?,
    ])
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Augmentation {
    pub window: Window,
    pub chain: [bool; 4],
    pub certificate: TransformCertificate,
}

/// [`almost_to_model`] with its certificate: patch equality on the
/// truncation box and the inclusion chain.
pub fn augment(scheme: &CutProjectScheme, witness: &AlmostModelSetWitness, truncation: &DirectBox) -> Result<Augmentation> {
    let window = almost_to_model(scheme, witness, truncation)?;
    let chain = augmentation_chain(scheme.internal(), witness, &window)?;
    let check = check_augmentation(scheme, witness, &window, truncation)?;
    if !check.equal {
        return Err(Error::CertificationFailed {
            reason: "augmented window does not reproduce Γ".into(),
            witness: check.witness.as_deref().map(fmt_point),
        });
    }
    let certificate = TransformCertificate {
        kind: TransformKind::WindowAugmentation,
        input: scheme.id().to_string(),
        output: scheme.id().to_string(),
        lift: LiftRule::Augmentation { witness: Box::new(witness.clone()), window: window.clone() },
        generic: None,
        injectivity: None,
        checks: vec![check],
    };
    Ok(Augmentation { window, chain, certificate })
}

/// `Λ_{W°} ⊆ Λ_W ⊆ Λ_{W̄}` on `b`, a quick sanity relation used by callers
/// that only have a window.
pub fn sandwich_on(scheme: &CutProjectScheme, w: &Window, b: &DirectBox) -> Result<bool> {
    let h = scheme.internal();
    let lo = scheme.project_points(b, &w.interior(h)?)?;
    let mid = scheme.project_points(b, w)?;
    let hi = scheme.project_points(b, &w.closure(h)?)?;
    Ok(verify_inclusion(&lo, &mid)?.holds && verify_inclusion(&mid, &hi)?.holds)
}
