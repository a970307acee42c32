//! Cut-and-project schemes as data.
//!
//! The lattice is `ℤ^r` with generator columns `(g_i, h_i) ∈ ℝ^d × H`. The
//! real-coordinate matrix `M` stacks the direct coordinates and the linear
//! coordinates of `H` (see [`Descriptor::linearize`]); the supported family
//! has `M` square and nonsingular, which makes `n ↦ (g, h)` injective and
//! gives covolume `|det M| · (compact mass of H)`.

use std::cmp::Ordering;
use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};
use crate::relation::{self, Real, RelationSearch};
use crate::scalar::{Scalar, Surd};
use crate::space::{Descriptor, HPoint};
use crate::window::{Interval, Window};

/// Default cap on enumerated integer-coordinate candidates.
pub const DEFAULT_CANDIDATE_LIMIT: u128 = 200_000_000;

/// Closed axis-parallel box in `ℝ^d`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DirectBox {
    pub lo: Vec<Scalar>,
    pub hi: Vec<Scalar>,
}

impl fmt::Display for DirectBox {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.lo.iter().zip(&self.hi).map(|(a, b)| format!("[{a}, {b}]")).collect();
        write!(f, "{}", parts.join(" × "))
    }
}

impl DirectBox {
    pub fn new(lo: Vec<Scalar>, hi: Vec<Scalar>) -> Result<DirectBox> {
        if lo.len() != hi.len() || lo.is_empty() {
            return Err(Error::BoxMismatch("box bounds must have equal, positive length".into()));
        }
        if lo.iter().zip(&hi).any(|(a, b)| a.cmp_to(b) == Ordering::Greater) {
            return Err(Error::BoxMismatch("box lower bound exceeds upper bound".into()));
        }
        Ok(DirectBox { lo, hi })
    }

    /// `[lo, hi]` in `ℝ`.
    pub fn interval(lo: Scalar, hi: Scalar) -> DirectBox {
        DirectBox { lo: vec![lo], hi: vec![hi] }
    }

    /// `[-n, n]^d`.
    pub fn cube(d: usize, n: &Scalar) -> DirectBox {
        DirectBox { lo: vec![-n; d], hi: vec![n.clone(); d] }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn contains(&self, x: &[Scalar]) -> bool {
        x.len() == self.dim()
            && x.iter().zip(self.lo.iter().zip(&self.hi)).all(|(v, (a, b))| {
                v.cmp_to(a) != Ordering::Less && v.cmp_to(b) != Ordering::Greater
            })
    }

    pub fn contains_box(&self, other: &DirectBox) -> bool {
        other.dim() == self.dim() && self.contains(&other.lo) && self.contains(&other.hi)
    }

    pub fn translate(&self, v: &[Scalar]) -> DirectBox {
        DirectBox {
            lo: self.lo.iter().zip(v).map(|(a, b)| a + b).collect(),
            hi: self.hi.iter().zip(v).map(|(a, b)| a + b).collect(),
        }
    }

    /// Box grown by `r` on every side.
    pub fn expand(&self, r: &Scalar) -> DirectBox {
        DirectBox {
            lo: self.lo.iter().map(|a| a - r).collect(),
            hi: self.hi.iter().map(|a| a + r).collect(),
        }
    }

    pub fn volume(&self) -> Scalar {
        self.lo.iter().zip(&self.hi).fold(Scalar::one(), |acc, (a, b)| &acc * &(b - a))
    }

    /// Parses `lo:hi` per axis, comma separated (`-20:20`, `-5:5,0:10`), or
    /// a closed interval `[lo, hi]`.
    pub fn parse(s: &str) -> Result<DirectBox> {
        let t = s.trim();
        if t.starts_with('[') {
            let i = Interval::parse(t)?;
            return DirectBox::new(vec![i.lo], vec![i.hi]);
        }
        let mut lo = Vec::new();
        let mut hi = Vec::new();
        for part in t.split(',') {
            let (a, b) = part
                .split_once(':')
                .ok_or_else(|| Error::Parse(format!("box axis `{part}` is not of the form lo:hi")))?;
            lo.push(Scalar::parse(a)?);
            hi.push(Scalar::parse(b)?);
        }
        DirectBox::new(lo, hi)
    }
}

/// Van Hove sequence `A_n = [-n, n]^d`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AveragingSequence {
    pub d: usize,
}

impl AveragingSequence {
    pub fn new(d: usize) -> AveragingSequence {
        AveragingSequence { d }
    }

    pub fn at(&self, n: u64) -> DirectBox {
        DirectBox::cube(self.d, &Scalar::int(n as i64))
    }

    pub fn volume(&self, n: u64) -> Scalar {
        Scalar::int(2 * n as i64).pow_int(self.d as u32)
    }
}

/// Lattice generator column `(g, h)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Generator {
    pub g: Vec<Scalar>,
    pub h: HPoint,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct SchemeData {
    d: usize,
    internal: Descriptor,
    generators: Vec<Generator>,
}

/// Cut-and-project scheme `(ℝ^d, H, 𝓛)`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(try_from = "SchemeData", into = "SchemeData")]
pub struct CutProjectScheme {
    d: usize,
    internal: Descriptor,
    generators: Vec<Generator>,
    matrix: Matrix,
    inverse: Matrix,
    inverse_f64: Vec<Vec<f64>>,
    matrix_f64: Vec<Vec<f64>>,
    covolume: Scalar,
    dense: bool,
    direct_kernel: Option<Vec<i64>>,
    id: String,
}

impl PartialEq for CutProjectScheme {
    fn eq(&self, other: &Self) -> bool {
        self.d == other.d && self.internal == other.internal && self.generators == other.generators
    }
}

impl TryFrom<SchemeData> for CutProjectScheme {
    type Error = Error;
    fn try_from(s: SchemeData) -> Result<Self> {
        CutProjectScheme::new(s.d, s.internal, s.generators)
    }
}

impl From<CutProjectScheme> for SchemeData {
    fn from(s: CutProjectScheme) -> Self {
        SchemeData { d: s.d, internal: s.internal, generators: s.generators }
    }
}

/// Answer of [`CutProjectScheme::is_commensurate`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Commensurability {
    /// `m a = ι(coords).G` with `m` minimal.
    Commensurate { m: u64, coords: Vec<i64>, heuristic: bool },
    /// No `m ≤ bound` exists.
    Incommensurate { bound: u64, heuristic: bool },
}

/// Finite point set in `ℝ^d`, sorted, with its box.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Patch {
    pub scheme: String,
    #[serde(rename = "box")]
    pub bbox: DirectBox,
    pub points: Vec<Vec<Scalar>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coords: Option<Vec<Vec<i64>>>,
}

pub(crate) fn cmp_points(a: &[Scalar], b: &[Scalar]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.cmp_to(y) {
            Ordering::Equal => {}
            o => return o,
        }
    }
    a.len().cmp(&b.len())
}

impl Patch {
    /// Sorted patch; rejects points outside the box and duplicates.
    pub fn new(
        scheme: impl Into<String>,
        bbox: DirectBox,
        points: Vec<Vec<Scalar>>,
        coords: Option<Vec<Vec<i64>>>,
    ) -> Result<Patch> {
        if let Some(c) = &coords {
            if c.len() != points.len() {
                return Err(Error::InvalidScheme("one lattice coordinate vector per point".into()));
            }
        }
        let mut idx: Vec<usize> = (0..points.len()).collect();
        idx.sort_by(|&i, &j| cmp_points(&points[i], &points[j]));
        for w in idx.windows(2) {
            if cmp_points(&points[w[0]], &points[w[1]]) == Ordering::Equal {
                return Err(Error::InvalidScheme("patch points must be distinct".into()));
            }
        }
        if let Some(p) = points.iter().find(|p| !bbox.contains(p)) {
            return Err(Error::BoxMismatch(format!("point {p:?} outside the patch box")));
        }
        let sorted: Vec<Vec<Scalar>> = idx.iter().map(|&i| points[i].clone()).collect();
        let coords = coords.map(|c| idx.iter().map(|&i| c[i].clone()).collect());
        Ok(Patch { scheme: scheme.into(), bbox, points: sorted, coords })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn contains(&self, x: &[Scalar]) -> bool {
        self.points.binary_search_by(|p| cmp_points(p, x)).is_ok()
    }

    /// `v + patch` on the box `v + B`.
    pub fn translate(&self, v: &[Scalar]) -> Patch {
        Patch {
            scheme: self.scheme.clone(),
            bbox: self.bbox.translate(v),
            points: self.points.iter().map(|p| p.iter().zip(v).map(|(a, b)| a + b).collect()).collect(),
            coords: None,
        }
    }

    /// Points inside `b`.
    pub fn restrict(&self, b: &DirectBox) -> Patch {
        let keep: Vec<usize> = (0..self.len()).filter(|&i| b.contains(&self.points[i])).collect();
        Patch {
            scheme: self.scheme.clone(),
            bbox: b.clone(),
            points: keep.iter().map(|&i| self.points[i].clone()).collect(),
            coords: self.coords.as_ref().map(|c| keep.iter().map(|&i| c[i].clone()).collect()),
        }
    }

    pub fn approx(&self) -> Vec<Vec<f64>> {
        self.points.iter().map(|p| p.iter().map(Scalar::to_f64).collect()).collect()
    }

    /// CSV with float columns `x1..xd`, exact columns and lattice
    /// coordinates when known.
    pub fn to_csv(&self) -> Result<String> {
        let d = self.bbox.dim();
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header: Vec<String> = (1..=d).map(|i| format!("x{i}")).collect();
        header.extend((1..=d).map(|i| format!("exact{i}")));
        if let Some(c) = self.coords.as_ref().and_then(|c| c.first()) {
            header.extend((1..=c.len()).map(|i| format!("n{i}")));
        }
        let io = |e: csv::Error| Error::Io(std::io::Error::other(e));
        w.write_record(&header).map_err(io)?;
        for (k, p) in self.points.iter().enumerate() {
            let mut row: Vec<String> = p.iter().map(|x| format!("{}", x.to_f64() + 0.0)).collect();
            row.extend(p.iter().map(|x| x.to_string()));
            if let Some(c) = &self.coords {
                row.extend(c[k].iter().map(|n| n.to_string()));
            }
            w.write_record(&row).map_err(io)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

fn f64_interval_mul(c: f64, lo: f64, hi: f64) -> (f64, f64) {
    let (a, b) = (c * lo, c * hi);
    (a.min(b), a.max(b))
}

fn gcd_u64(a: u64, b: u64) -> u64 {
    a.gcd(&b)
}

impl CutProjectScheme {
    pub fn new(d: usize, internal: Descriptor, generators: Vec<Generator>) -> Result<CutProjectScheme> {
        internal.validate()?;
        let r = generators.len();
        if d == 0 {
            return Err(Error::InvalidScheme("direct dimension must be positive".into()));
        }
        for (i, g) in generators.iter().enumerate() {
            if g.g.len() != d {
                return Err(Error::InvalidScheme(format!("generator {i} has direct dimension {}", g.g.len())));
            }
            internal.check(&g.h).map_err(|e| Error::InvalidScheme(format!("generator {i}: {e}")))?;
        }
        let l = internal.linear_dim();
        if d + l != r {
            return Err(Error::InvalidScheme(format!(
                "lattice rank {r} must equal direct dimension {d} plus linear internal dimension {l}"
            )));
        }
        let lin: Vec<Vec<Scalar>> = generators.iter().map(|g| internal.linearize(&g.h)).collect();
        let mut matrix: Matrix = Vec::with_capacity(r);
        for k in 0..d {
            matrix.push(generators.iter().map(|g| g.g[k].clone()).collect());
        }
        for k in 0..l {
            matrix.push(lin.iter().map(|v| v[k].clone()).collect());
        }
        let det = linalg::det(&matrix);
        if det.is_zero() {
            return Err(Error::InvalidScheme("lattice embedding is degenerate (det M = 0)".into()));
        }
        let inverse = linalg::inverse(&matrix).ok_or_else(|| Error::InvalidScheme("M is singular".into()))?;
        let covolume = &det.abs() * &internal.compact_mass();
        let mut s = CutProjectScheme {
            d,
            inverse_f64: linalg::to_f64(&inverse),
            matrix_f64: linalg::to_f64(&matrix),
            internal,
            generators,
            matrix,
            inverse,
            covolume,
            dense: false,
            direct_kernel: None,
            id: String::new(),
        };
        s.direct_kernel = s.direct_kernel_vector();
        s.dense = s.probe_density();
        let data = SchemeData { d: s.d, internal: s.internal.clone(), generators: s.generators.clone() };
        let digest = Sha256::digest(serde_json::to_vec(&data)?);
        s.id = digest.iter().take(6).map(|b| format!("{b:02x}")).collect();
        Ok(s)
    }

    /// Kernel vector of `n ↦ ι(n).G` if the direct projection is not
    /// injective on the lattice.
    fn direct_kernel_vector(&self) -> Option<Vec<i64>> {
        let exact: Option<Vec<Vec<&Surd>>> = (0..self.d)
            .map(|k| self.generators.iter().map(|g| g.g[k].as_exact()).collect())
            .collect();
        match exact {
            Some(rows) => {
                let basis = linalg::radical_basis(rows.iter().flatten().copied());
                let mut q = Vec::new();
                for row in &rows {
                    for &rad in &basis {
                        q.push(row.iter().map(|s| s.coefficient(rad)).collect());
                    }
                }
                if linalg::rational_rank(&q) == self.rank() {
                    return None;
                }
                linalg::rational_kernel(&q, self.rank()).first().map(|v| integer_direction(v))
            }
            None => {
                let vals: Vec<Vec<Real>> =
                    self.generators.iter().map(|g| g.g.iter().cloned().map(Real::exact).collect()).collect();
                match relation::find_vector_relation(&vals, 1000) {
                    RelationSearch::Found { coefficients, .. } => Some(coefficients),
                    _ => None,
                }
            }
        }
    }

    /// Whether `n ↦ ι(n).G` is injective. Schemes without this property
    /// still support lattice-level queries (density, stars) but refuse to
    /// project points.
    pub fn is_direct_injective(&self) -> bool {
        self.direct_kernel.is_none()
    }

    /// Heuristic check that linearized stars come within 1/4 of every point
    /// of a grid on `[-1,1]^L`.
    fn probe_density(&self) -> bool {
        let l = self.internal.linear_dim();
        if l == 0 {
            return true;
        }
        let r = self.rank();
        let lin: Vec<Vec<f64>> = self
            .generators
            .iter()
            .map(|g| self.internal.linearize(&g.h).iter().map(Scalar::to_f64).collect())
            .collect();
        let n = ((20_000f64).powf(1.0 / r as f64) / 2.0).floor().max(1.0) as i64;
        let mut stars: Vec<Vec<f64>> = Vec::new();
        let mut idx = vec![-n; r];
        loop {
            let mut s = vec![0.0; l];
            for (i, &k) in idx.iter().enumerate() {
                for (j, v) in s.iter_mut().enumerate() {
                    *v += k as f64 * lin[i][j];
                }
            }
            if s.iter().all(|x| x.abs() <= 1.5) {
                stars.push(s);
            }
            let mut p = 0;
            loop {
                if p == r {
                    break;
                }
                idx[p] += 1;
                if idx[p] <= n {
                    break;
                }
                idx[p] = -n;
                p += 1;
            }
            if p == r {
                break;
            }
        }
        let steps = 9usize;
        let total = steps.pow(l as u32);
        (0..total).all(|mut c| {
            let pt: Vec<f64> = (0..l)
                .map(|_| {
                    let k = c % steps;
                    c /= steps;
                    -1.0 + 0.25 * k as f64
                })
                .collect();
            stars.iter().any(|s| s.iter().zip(&pt).all(|(a, b)| (a - b).abs() <= 0.25))
        })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn rank(&self) -> usize {
        self.generators.len()
    }

    pub fn internal(&self) -> &Descriptor {
        &self.internal
    }

    pub fn generators(&self) -> &[Generator] {
        &self.generators
    }

    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    pub fn inverse(&self) -> &Matrix {
        &self.inverse
    }

    pub fn covolume(&self) -> &Scalar {
        &self.covolume
    }

    /// Heuristic denseness of `π^H(𝓛)` recorded at construction.
    pub fn looks_dense(&self) -> bool {
        self.dense
    }

    /// Short content hash identifying the scheme.
    pub fn id(&self) -> &str {
        &self.id
    }

    /// `dens(𝓛) = 1 / covolume`.
    pub fn dens_lattice(&self) -> Scalar {
        self.covolume.recip().expect("covolume is nonzero")
    }

    pub fn is_exact(&self) -> bool {
        self.generators.iter().all(|g| g.g.iter().all(Scalar::is_exact) && g.h.is_exact())
    }

    /// Direct part `ι(n).G = Σ n_i g_i`.
    pub fn point(&self, n: &[i64]) -> Vec<Scalar> {
        let mut out = vec![Scalar::zero(); self.d];
        for (g, &k) in self.generators.iter().zip(n) {
            if k == 0 {
                continue;
            }
            for (o, x) in out.iter_mut().zip(&g.g) {
                *o = &*o + &x.mul_int(k);
            }
        }
        out
    }

    /// Star map `n ↦ Σ n_i h_i` in `H`.
    pub fn star(&self, n: &[i64]) -> HPoint {
        let h = &self.internal;
        let mut acc = h.zero();
        for (g, &k) in self.generators.iter().zip(n) {
            if k != 0 {
                let term = h.scale(k, &g.h).expect("generator matches descriptor");
                acc = h.add(&acc, &term).expect("generator matches descriptor");
            }
        }
        acc
    }

    /// Lattice coordinates `n` with `ι(n) = (g, h)`, if `(g, h)` lies on the
    /// lattice.
    pub fn coordinates_of(&self, g: &[Scalar], h: &HPoint) -> Option<Vec<i64>> {
        if g.len() != self.d || self.internal.check(h).is_err() {
            return None;
        }
        let mut v = g.to_vec();
        v.extend(self.internal.linearize(h));
        let x = linalg::mat_vec(&self.inverse, &v);
        let n: Vec<i64> = x
            .iter()
            .map(|s| {
                let k = s.to_f64().round();
                (k.abs() < 9e15 && Scalar::int(k as i64) == *s).then_some(k as i64)
            })
            .collect::<Option<_>>()?;
        (self.point(&n).as_slice() == g && self.star(&n) == *h).then_some(n)
    }

    /// Floating linearized star.
    pub fn star_approx(&self, n: &[i64]) -> Vec<f64> {
        let l = self.internal.linear_dim();
        (0..l)
            .map(|j| n.iter().enumerate().map(|(i, &k)| k as f64 * self.matrix_f64[self.d + j][i]).sum())
            .collect()
    }

    pub fn point_approx(&self, n: &[i64]) -> Vec<f64> {
        (0..self.d).map(|j| n.iter().enumerate().map(|(i, &k)| k as f64 * self.matrix_f64[j][i]).sum()).collect()
    }

    /// `Λ_W ∩ B` with lattice coordinates.
    pub fn project_points(&self, b: &DirectBox, w: &Window) -> Result<Patch> {
        self.project_points_limited(b, w, DEFAULT_CANDIDATE_LIMIT)
    }

    /// Integer coordinate box containing every `n` with `ι(n).G ∈ B` and
    /// linearized star in `bounds`, derived through `M^{-1}`.
    fn coordinate_box(&self, rows: &[(f64, f64)]) -> Vec<(i64, i64)> {
        (0..self.rank())
            .map(|j| {
                let (mut lo, mut hi) = (0.0, 0.0);
                for (k, &(a, b)) in rows.iter().enumerate() {
                    let (p, q) = f64_interval_mul(self.inverse_f64[j][k], a, b);
                    lo += p;
                    hi += q;
                }
                let pad = 1e-7 * (1.0 + lo.abs().max(hi.abs()));
                ((lo - pad).floor() as i64, (hi + pad).ceil() as i64)
            })
            .collect()
    }

    fn row_bounds(&self, b: &DirectBox, w: &Window) -> Result<Option<Vec<(f64, f64)>>> {
        let Some(wb) = w.linear_bounds(&self.internal)? else { return Ok(None) };
        let mut rows: Vec<(f64, f64)> = b.lo.iter().zip(&b.hi).map(|(a, c)| (a.to_f64(), c.to_f64())).collect();
        rows.extend(wb);
        let tol = self.matrix.iter().flatten().map(Scalar::tolerance).fold(0.0, f64::max);
        Ok(Some(
            rows.into_iter()
                .map(|(a, c)| {
                    let pad = 1e-9 * (1.0 + a.abs().max(c.abs())) + 4.0 * tol;
                    (a - pad, c + pad)
                })
                .collect(),
        ))
    }

    /// Enumeration with an explicit cap on the number of candidates.
    pub fn project_points_limited(&self, b: &DirectBox, w: &Window, limit: u128) -> Result<Patch> {
        if b.dim() != self.d {
            return Err(Error::BoxMismatch(format!("box has dimension {}, scheme {}", b.dim(), self.d)));
        }
        if let Some(kernel) = &self.direct_kernel {
            return Err(Error::NotInjective { kernel: kernel.clone() });
        }
        if let Some(c) = w.certified_box() {
            if !c.contains_box(b) {
                return Err(Error::OutOfCertifiedRange(format!("box {b} not inside certified box {c}")));
            }
        }
        let Some(rows) = self.row_bounds(b, w)? else {
            return Patch::new(self.id.clone(), b.clone(), Vec::new(), Some(Vec::new()));
        };
        let r = self.rank();
        let cbox = self.coordinate_box(&rows);
        if cbox.iter().any(|(lo, hi)| lo > hi) {
            return Patch::new(self.id.clone(), b.clone(), Vec::new(), Some(Vec::new()));
        }
        // iterate all but the widest coordinate; solve the widest per row
        let last = (0..r).max_by_key(|&j| cbox[j].1 - cbox[j].0).expect("rank is positive");
        let outer: Vec<usize> = (0..r).filter(|&j| j != last).collect();
        let count: u128 = outer.iter().map(|&j| (cbox[j].1 - cbox[j].0 + 1) as u128).product();
        if count > limit {
            return Err(Error::EnumerationOverflow { candidates: count, limit });
        }
        let first_range: Vec<i64> = match outer.first() {
            Some(&j) => (cbox[j].0..=cbox[j].1).collect(),
            None => vec![0],
        };
        let found: Vec<(Vec<i64>, Vec<Scalar>)> = first_range
            .par_iter()
            .flat_map_iter(|&v0| {
                let mut local = Vec::new();
                let mut n = vec![0i64; r];
                if let Some(&j) = outer.first() {
                    n[j] = v0;
                }
                let rest = &outer[outer.len().min(1)..];
                for &j in rest {
                    n[j] = cbox[j].0;
                }
                loop {
                    self.scan_last(&mut n, last, &cbox, &rows, b, w, &mut local);
                    // odometer over the remaining outer coordinates
                    let mut p = 0;
                    while p < rest.len() {
                        let j = rest[p];
                        n[j] += 1;
                        if n[j] <= cbox[j].1 {
                            break;
                        }
                        n[j] = cbox[j].0;
                        p += 1;
                    }
                    if p == rest.len() {
                        break;
                    }
                }
                local.into_iter()
            })
            .collect();
        let (coords, points): (Vec<Vec<i64>>, Vec<Vec<Scalar>>) = found.into_iter().unzip();
        Patch::new(self.id.clone(), b.clone(), points, Some(coords))
    }

    #[allow(clippy::too_many_arguments)]
    fn scan_last(
        &self,
        n: &mut [i64],
        last: usize,
        cbox: &[(i64, i64)],
        rows: &[(f64, f64)],
        b: &DirectBox,
        w: &Window,
        out: &mut Vec<(Vec<i64>, Vec<Scalar>)>,
    ) {
        let (mut lo, mut hi) = (cbox[last].0 as f64, cbox[last].1 as f64);
        for (i, &(a, c)) in rows.iter().enumerate() {
            let partial: f64 = (0..n.len()).filter(|&j| j != last).map(|j| self.matrix_f64[i][j] * n[j] as f64).sum();
            let coef = self.matrix_f64[i][last];
            if coef.abs() < 1e-300 {
                if partial < a || partial > c {
                    return;
                }
                continue;
            }
            let (p, q) = f64_interval_mul(1.0 / coef, a - partial, c - partial);
            let pad = 1e-9 * (1.0 + p.abs().max(q.abs()));
            lo = lo.max(p - pad);
            hi = hi.min(q + pad);
        }
        if lo > hi {
            return;
        }
        for v in lo.ceil() as i64..=hi.floor() as i64 {
            n[last] = v;
            let x = self.point(n);
            if !b.contains(&x) {
                continue;
            }
            if w.contains(&self.star(n)) {
                out.push((n.to_vec(), x));
            }
        }
    }

    /// Minimal `m ≤ bound` with `m a ∈ π^G(𝓛)`.
    ///
    /// Exact inputs are decided by rational linear algebra over the radical
    /// basis; floating inputs go through a bounded relation search and the
    /// answer is tagged heuristic.
    pub fn is_commensurate(&self, a: &[Scalar], bound: u64) -> Result<Commensurability> {
        if a.len() != self.d {
            return Err(Error::BoxMismatch("shift has the wrong dimension".into()));
        }
        if a.iter().all(Scalar::is_zero) {
            return Err(Error::ZeroVector);
        }
        let exact_g: Option<Vec<Vec<&Surd>>> = (0..self.d)
            .map(|k| self.generators.iter().map(|g| g.g[k].as_exact()).collect())
            .collect();
        let exact_a: Option<Vec<&Surd>> = a.iter().map(Scalar::as_exact).collect();
        if let (Some(rows), Some(av)) = (exact_g, exact_a) {
            let basis = linalg::radical_basis(rows.iter().flatten().copied().chain(av.iter().copied()));
            let mut q = Vec::new();
            let mut rhs = Vec::new();
            for (row, x) in rows.iter().zip(&av) {
                for &rad in &basis {
                    q.push(row.iter().map(|s| s.coefficient(rad)).collect());
                    rhs.push(x.coefficient(rad));
                }
            }
            let Some(sol) = linalg::solve_rational(&q, &rhs) else {
                return Ok(Commensurability::Incommensurate { bound, heuristic: false });
            };
            let m = sol.iter().fold(BigInt::one(), |acc, x| acc.lcm(x.denom()));
            if m > BigInt::from(bound) {
                return Ok(Commensurability::Incommensurate { bound, heuristic: false });
            }
            let coords: Option<Vec<i64>> = sol.iter().map(|x| (x * &num_rational::BigRational::from_integer(m.clone())).to_integer().to_i64()).collect();
            let coords = coords.ok_or_else(|| Error::Unsupported("lattice coordinates exceed i64".into()))?;
            return Ok(Commensurability::Commensurate { m: m.to_u64().expect("m ≤ bound"), coords, heuristic: false });
        }
        let mut vals: Vec<Vec<Real>> = vec![a.iter().cloned().map(Real::exact).collect()];
        vals.extend(self.generators.iter().map(|g| g.g.iter().cloned().map(Real::exact).collect()));
        match relation::find_vector_relation(&vals, bound) {
            RelationSearch::Found { coefficients, .. } if coefficients[0] != 0 => {
                let sign = coefficients[0].signum();
                let mut m = coefficients[0].unsigned_abs();
                let mut coords: Vec<i64> = coefficients[1..].iter().map(|c| -c * sign).collect();
                let g = coords.iter().fold(m, |acc, c| gcd_u64(acc, c.unsigned_abs()));
                if g > 1 {
                    m /= g;
                    coords.iter_mut().for_each(|c| *c /= g as i64);
                }
                Ok(Commensurability::Commensurate { m, coords, heuristic: true })
            }
            RelationSearch::Excluded { .. } => Ok(Commensurability::Incommensurate { bound, heuristic: true }),
            _ => Err(Error::CommensurabilityUnknown { bound }),
        }
    }

    /// Fibonacci scheme: `ℤ[τ]` by its Minkowski embedding, generators
    /// `(1, 1)` and `(τ, τ')`.
    pub fn fibonacci() -> CutProjectScheme {
        CutProjectScheme::new(
            1,
            Descriptor::real(1),
            vec![
                Generator { g: vec![Scalar::one()], h: HPoint::real(Scalar::one()) },
                Generator { g: vec![Scalar::tau()], h: HPoint::real(Scalar::tau_conj()) },
            ],
        )
        .expect("Fibonacci scheme is valid")
    }

    /// `ℤ²` in `ℝ × ℝ` by the identity.
    pub fn square_lattice() -> CutProjectScheme {
        CutProjectScheme::new(
            1,
            Descriptor::real(1),
            vec![
                Generator { g: vec![Scalar::one()], h: HPoint::real(Scalar::zero()) },
                Generator { g: vec![Scalar::zero()], h: HPoint::real(Scalar::one()) },
            ],
        )
        .expect("square lattice is valid")
    }

    /// `ℤ^d ⊂ ℝ^d` with trivial internal space.
    pub fn periodic(d: usize) -> CutProjectScheme {
        let gens = (0..d)
            .map(|i| Generator {
                g: (0..d).map(|j| if i == j { Scalar::one() } else { Scalar::zero() }).collect(),
                h: HPoint(Vec::new()),
            })
            .collect();
        CutProjectScheme::new(d, Descriptor { factors: Vec::new() }, gens).expect("periodic lattice is valid")
    }
}

/// Primitive integer vector along a rational direction.
fn integer_direction(v: &[BigRational]) -> Vec<i64> {
    let l = v.iter().fold(BigInt::one(), |acc, x| acc.lcm(x.denom()));
    let ints: Vec<BigInt> = v.iter().map(|x| (x * BigRational::from_integer(l.clone())).to_integer()).collect();
    let g = ints.iter().fold(BigInt::zero(), |acc, x| acc.gcd(x));
    let g = if g.is_zero() { BigInt::one() } else { g };
    ints.iter().map(|x| (x / &g).to_i64().unwrap_or(i64::MAX)).collect()
}

/// Window of the Fibonacci model set: `(-1, τ-1]`.
pub fn fibonacci_window() -> Window {
    Window::interval(Interval::new(Scalar::int(-1), &Scalar::tau() - &Scalar::one(), false, true))
}

/// Whole trivial internal space.
pub fn trivial_window() -> Window {
    Window::Product(Vec::new())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fibonacci_constants() {
        let s = CutProjectScheme::fibonacci();
        assert_eq!(linalg::det(s.matrix()).abs(), Scalar::sqrt_int(5));
        assert_eq!(s.dens_lattice(), Scalar::sqrt_int(5).recip().unwrap());
        assert!(s.looks_dense());
        assert_eq!(s.star(&[0, 1]), HPoint::real(Scalar::tau_conj()));
        assert_eq!(s.star(&[0, 0]), HPoint::real(Scalar::zero()));
        let t2 = &Scalar::tau_conj() * &Scalar::tau_conj();
        assert_eq!(s.star(&[1, 1]), HPoint::real(t2));
    }

    #[test]
    fn other_presets() {
        let z2 = CutProjectScheme::square_lattice();
        assert_eq!(z2.dens_lattice(), Scalar::one());
        assert!(!z2.looks_dense());
        let scaled = CutProjectScheme::new(
            1,
            Descriptor::real(1),
            vec![
                Generator { g: vec![Scalar::int(2)], h: HPoint::real(Scalar::zero()) },
                Generator { g: vec![Scalar::zero()], h: HPoint::real(Scalar::one()) },
            ],
        )
        .unwrap();
        assert_eq!(scaled.dens_lattice(), Scalar::ratio(1, 2));
        // direct projection of (0,1) is 0
        assert!(!scaled.is_direct_injective());
        let err = scaled.project_points(&DirectBox::interval(Scalar::zero(), Scalar::one()), &Window::empty());
        assert!(matches!(err, Err(Error::NotInjective { ref kernel }) if kernel == &vec![0, 1]));
        assert!(CutProjectScheme::fibonacci().is_direct_injective());
        let p = CutProjectScheme::periodic(1);
        assert_eq!(p.dens_lattice(), Scalar::one());
    }

    #[test]
    fn enumeration_small_box() {
        let s = CutProjectScheme::fibonacci();
        let tau2 = &Scalar::tau() * &Scalar::tau();
        let p = s.project_points(&DirectBox::interval(Scalar::zero(), tau2.clone()), &fibonacci_window()).unwrap();
        assert_eq!(p.points, vec![vec![Scalar::zero()], vec![Scalar::tau()], vec![tau2]]);
        let e = s.project_points(&DirectBox::interval(Scalar::int(-5), Scalar::int(5)), &Window::empty()).unwrap();
        assert!(e.is_empty());
    }

    #[test]
    fn commensurability() {
        let s = CutProjectScheme::fibonacci();
        let a = Scalar::tau().checked_div(&Scalar::int(3)).unwrap();
        assert_eq!(
            s.is_commensurate(&[a], 100).unwrap(),
            Commensurability::Commensurate { m: 3, coords: vec![0, 1], heuristic: false }
        );
        assert_eq!(
            s.is_commensurate(&[Scalar::int(5)], 100).unwrap(),
            Commensurability::Commensurate { m: 1, coords: vec![5, 0], heuristic: false }
        );
        assert_eq!(
            s.is_commensurate(&[Scalar::sqrt_int(2)], 1_000_000).unwrap(),
            Commensurability::Incommensurate { bound: 1_000_000, heuristic: false }
        );
        assert!(matches!(s.is_commensurate(&[Scalar::zero()], 10), Err(Error::ZeroVector)));
    }

    #[test]
    fn float_commensurability_is_heuristic() {
        let s = CutProjectScheme::fibonacci();
        let a = Scalar::float(Scalar::tau().to_f64() / 3.0);
        match s.is_commensurate(&[a], 20).unwrap() {
            Commensurability::Commensurate { m, coords, heuristic } => {
                assert_eq!((m, coords, heuristic), (3, vec![0, 1], true));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn scheme_json_roundtrip() {
        let s = CutProjectScheme::fibonacci();
        let j = serde_json::to_string(&s).unwrap();
        let back: CutProjectScheme = serde_json::from_str(&j).unwrap();
        assert_eq!(back, s);
        assert_eq!(back.id(), s.id());
    }

    #[test]
    fn box_parsing() {
        assert_eq!(DirectBox::parse("-20:20").unwrap(), DirectBox::interval(Scalar::int(-20), Scalar::int(20)));
        assert_eq!(DirectBox::parse("[0, tau]").unwrap(), DirectBox::interval(Scalar::zero(), Scalar::tau()));
        assert_eq!(DirectBox::parse("0:1,2:3").unwrap().dim(), 2);
        assert!(DirectBox::parse("3:1").is_err());
    }

    #[test]
    fn patch_csv() {
        let s = CutProjectScheme::fibonacci();
        let p = s.project_points(&DirectBox::interval(Scalar::zero(), Scalar::int(2)), &fibonacci_window()).unwrap();
        let csv = p.to_csv().unwrap();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("x1,exact1,n1,n2"));
        assert_eq!(lines.count(), p.len());
    }
}
