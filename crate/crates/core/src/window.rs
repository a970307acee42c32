//! Windows in internal space.
//!
//! A window is a finite union of products of per-factor regions, optionally
//! augmented by finitely many isolated points. Topological queries
//! (interior, closure, measure, set comparison) run on an exact cell
//! decomposition: every continuous axis is cut at all endpoints that occur,
//! and a cell belongs to a set iff its representative point does.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::scalar::Scalar;
use crate::scheme::DirectBox;
use crate::space::{Coord, Descriptor, Factor, HPoint};

/// Interval with independently open or closed ends.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Interval {
    pub lo: Scalar,
    pub hi: Scalar,
    pub lo_closed: bool,
    pub hi_closed: bool,
}

impl Interval {
    pub fn new(lo: Scalar, hi: Scalar, lo_closed: bool, hi_closed: bool) -> Interval {
        Interval { lo, hi, lo_closed, hi_closed }
    }

    pub fn closed(lo: Scalar, hi: Scalar) -> Interval {
        Interval::new(lo, hi, true, true)
    }

    pub fn open(lo: Scalar, hi: Scalar) -> Interval {
        Interval::new(lo, hi, false, false)
    }

    /// `[lo, hi)`.
    pub fn half_open(lo: Scalar, hi: Scalar) -> Interval {
        Interval::new(lo, hi, true, false)
    }

    pub fn point(x: Scalar) -> Interval {
        Interval::closed(x.clone(), x)
    }

    pub fn is_empty(&self) -> bool {
        match self.lo.cmp_to(&self.hi) {
            Ordering::Greater => true,
            Ordering::Equal => !(self.lo_closed && self.hi_closed),
            Ordering::Less => false,
        }
    }

    pub fn contains(&self, x: &Scalar) -> bool {
        let lo_ok = match x.cmp_to(&self.lo) {
            Ordering::Greater => true,
            Ordering::Equal => self.lo_closed,
            Ordering::Less => false,
        };
        lo_ok
            && match x.cmp_to(&self.hi) {
                Ordering::Less => true,
                Ordering::Equal => self.hi_closed,
                Ordering::Greater => false,
            }
    }

    pub fn length(&self) -> Scalar {
        if self.is_empty() {
            Scalar::zero()
        } else {
            &self.hi - &self.lo
        }
    }

    pub fn translate(&self, t: &Scalar) -> Interval {
        Interval::new(&self.lo + t, &self.hi + t, self.lo_closed, self.hi_closed)
    }

    /// Parses `[a, b)`, `(a, b]`, `[a, b]`, `(a, b)` with scalar expressions.
    pub fn parse(s: &str) -> Result<Interval> {
        let t = s.trim();
        let bad = || Error::Parse(format!("invalid interval `{s}`"));
        let lo_closed = match t.chars().next() {
            Some('[') => true,
            Some('(') => false,
            _ => return Err(bad()),
        };
        let hi_closed = match t.chars().last() {
            Some(']') => true,
            Some(')') => false,
            _ => return Err(bad()),
        };
        let inner = &t[1..t.len() - 1];
        let (a, b) = split_top_comma(inner).ok_or_else(bad)?;
        Ok(Interval::new(Scalar::parse(a)?, Scalar::parse(b)?, lo_closed, hi_closed))
    }
}

fn split_top_comma(s: &str) -> Option<(&str, &str)> {
    let mut depth = 0i32;
    for (i, c) in s.char_indices() {
        match c {
            '(' => depth += 1,
            ')' => depth -= 1,
            ',' if depth == 0 => return Some((&s[..i], &s[i + 1..])),
            _ => {}
        }
    }
    None
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}{}, {}{}",
            if self.lo_closed { '[' } else { '(' },
            self.lo,
            self.hi,
            if self.hi_closed { ']' } else { ')' }
        )
    }
}

impl<'de> Deserialize<'de> for Interval {
    fn deserialize<D: Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Data {
            lo: Scalar,
            hi: Scalar,
            lo_closed: bool,
            hi_closed: bool,
        }
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Input {
            Data(Data),
            Text(String),
        }
        match Input::deserialize(de)? {
            Input::Data(d) => Ok(Interval::new(d.lo, d.hi, d.lo_closed, d.hi_closed)),
            Input::Text(s) => Interval::parse(&s).map_err(serde::de::Error::custom),
        }
    }
}

/// Finite union of intervals, kept sorted, disjoint and merged.
#[derive(Clone, Debug, PartialEq, Default, Serialize)]
#[serde(transparent)]
pub struct IntervalSet(Vec<Interval>);

impl<'de> Deserialize<'de> for IntervalSet {
    fn deserialize<D: Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        Ok(IntervalSet::new(Vec::<Interval>::deserialize(de)?))
    }
}

impl fmt::Display for IntervalSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return write!(f, "∅");
        }
        let parts: Vec<String> = self.0.iter().map(|i| i.to_string()).collect();
        write!(f, "{}", parts.join(" ∪ "))
    }
}

impl IntervalSet {
    pub fn new(mut pieces: Vec<Interval>) -> IntervalSet {
        pieces.retain(|i| !i.is_empty());
        pieces.sort_by(|a, b| a.lo.cmp_to(&b.lo).then_with(|| b.lo_closed.cmp(&a.lo_closed)));
        let mut out: Vec<Interval> = Vec::with_capacity(pieces.len());
        for p in pieces {
            if let Some(cur) = out.last_mut() {
                let touch = match p.lo.cmp_to(&cur.hi) {
                    Ordering::Less => true,
                    Ordering::Equal => cur.hi_closed || p.lo_closed,
                    Ordering::Greater => false,
                };
                if touch {
                    match p.hi.cmp_to(&cur.hi) {
                        Ordering::Greater => {
                            cur.hi = p.hi;
                            cur.hi_closed = p.hi_closed;
                        }
                        Ordering::Equal => cur.hi_closed |= p.hi_closed,
                        Ordering::Less => {}
                    }
                    continue;
                }
            }
            out.push(p);
        }
        IntervalSet(out)
    }

    pub fn single(i: Interval) -> IntervalSet {
        IntervalSet::new(vec![i])
    }

    pub fn empty() -> IntervalSet {
        IntervalSet(Vec::new())
    }

    /// Finite set of points.
    pub fn points(xs: Vec<Scalar>) -> IntervalSet {
        IntervalSet::new(xs.into_iter().map(Interval::point).collect())
    }

    pub fn intervals(&self) -> &[Interval] {
        &self.0
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, x: &Scalar) -> bool {
        self.0.iter().any(|i| i.contains(x))
    }

    pub fn measure(&self) -> Scalar {
        self.0.iter().fold(Scalar::zero(), |acc, i| &acc + &i.length())
    }

    pub fn translate(&self, t: &Scalar) -> IntervalSet {
        IntervalSet(self.0.iter().map(|i| i.translate(t)).collect())
    }

    /// Translate on the circle `ℝ/ℤ`, pieces kept inside `[0,1)`.
    pub fn translate_circle(&self, t: &Scalar) -> IntervalSet {
        let one = Scalar::one();
        let mut out = Vec::new();
        for i in &self.0 {
            let mut j = i.translate(t);
            let k = Scalar::int(j.lo.floor());
            j = j.translate(&-&k);
            match j.hi.cmp_to(&one) {
                Ordering::Less => out.push(j),
                Ordering::Equal => {
                    if j.hi_closed {
                        out.push(Interval::point(Scalar::zero()));
                    }
                    out.push(Interval::new(j.lo, one.clone(), j.lo_closed, false));
                }
                Ordering::Greater => {
                    let rest = &j.hi - &one;
                    if rest.cmp_to(&j.lo) != Ordering::Less {
                        // wraps all the way round
                        out.push(Interval::half_open(Scalar::zero(), one.clone()));
                    } else {
                        out.push(Interval::new(Scalar::zero(), rest, true, j.hi_closed));
                        out.push(Interval::new(j.lo, one.clone(), j.lo_closed, false));
                    }
                }
            }
        }
        IntervalSet::new(out)
    }

    pub fn bounds(&self) -> Option<(Scalar, Scalar)> {
        Some((self.0.first()?.lo.clone(), self.0.last()?.hi.clone()))
    }

    pub fn union(&self, other: &IntervalSet) -> IntervalSet {
        IntervalSet::new(self.0.iter().chain(&other.0).cloned().collect())
    }
}

/// Region of a torus factor in fundamental coordinates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TorusRegion {
    Full,
    /// Product of per-coordinate subsets of `[0,1)`.
    Product(Vec<IntervalSet>),
}

/// Region of one factor.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Region {
    /// Product of per-coordinate interval sets.
    Real(Vec<IntervalSet>),
    Integer(BTreeSet<Vec<i64>>),
    Cyclic(BTreeSet<u64>),
    Torus(TorusRegion),
    /// Residue to base window.
    Twisted(BTreeMap<u64, Window>),
}

/// A window in internal space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Window {
    Product(Vec<Region>),
    Union(Vec<Vec<Region>>),
    /// Open part plus finitely many isolated points. `certified` is the
    /// direct-space box on which the point list is complete; enumeration
    /// outside it is refused.
    Augmented {
        open: Box<Window>,
        points: Vec<HPoint>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        certified: Option<DirectBox>,
    },
}

/// Regularity flags of a window.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Properties {
    pub precompact: bool,
    pub has_interior: bool,
    pub topologically_regular: bool,
    pub measure_regular: bool,
    pub measurable: bool,
}

impl fmt::Display for Window {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn region(r: &Region) -> String {
            match r {
                Region::Real(v) => v.iter().map(|s| s.to_string()).collect::<Vec<_>>().join(" × "),
                Region::Integer(s) => format!("{s:?}"),
                Region::Cyclic(s) => format!("{s:?}"),
                Region::Torus(TorusRegion::Full) => "𝕂".to_string(),
                Region::Torus(TorusRegion::Product(v)) => {
                    v.iter().map(|s| s.to_string()).collect::<Vec<_>>().join(" × ")
                }
                Region::Twisted(m) => {
                    let parts: Vec<String> = m.iter().map(|(r, w)| format!("{r}: {w}")).collect();
                    format!("{{{}}}", parts.join("; "))
                }
            }
        }
        fn product(p: &[Region]) -> String {
            p.iter().map(region).collect::<Vec<_>>().join(" × ")
        }
        match self {
            Window::Product(p) => write!(f, "{}", product(p)),
            Window::Union(ps) if ps.is_empty() => write!(f, "∅"),
            Window::Union(ps) => write!(f, "{}", ps.iter().map(|p| product(p)).collect::<Vec<_>>().join(" ∪ ")),
            Window::Augmented { open, points, .. } => {
                let pts: Vec<String> = points.iter().map(|p| p.to_string()).collect();
                write!(f, "{open} ∪ {{{}}}", pts.join(", "))
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Axis {
    Line,
    Circle,
}

#[derive(Clone, Debug)]
struct FlatBox {
    cont: Vec<Interval>,
    disc: Vec<i64>,
}

fn layout(h: &Descriptor, axes: &mut Vec<Axis>) {
    for f in &h.factors {
        match f {
            Factor::Real { dim } => axes.extend(std::iter::repeat(Axis::Line).take(*dim)),
            Factor::Torus { dim, .. } => axes.extend(std::iter::repeat(Axis::Circle).take(*dim)),
            Factor::Twisted { base, .. } => layout(base, axes),
            _ => {}
        }
    }
}

fn torus_scale(h: &Descriptor) -> Scalar {
    let mut acc = Scalar::one();
    for f in &h.factors {
        match f {
            Factor::Torus { basis, .. } => acc = &acc * &linalg::det(basis).abs(),
            Factor::Twisted { base, .. } => acc = &acc * &torus_scale(base),
            _ => {}
        }
    }
    acc
}

fn cartesian(acc: Vec<FlatBox>, pieces: &[FlatBox]) -> Vec<FlatBox> {
    let mut out = Vec::with_capacity(acc.len() * pieces.len());
    for a in &acc {
        for p in pieces {
            let mut cont = a.cont.clone();
            cont.extend(p.cont.iter().cloned());
            let mut disc = a.disc.clone();
            disc.extend(p.disc.iter().cloned());
            out.push(FlatBox { cont, disc });
        }
    }
    out
}

fn interval_product(sets: &[IntervalSet]) -> Vec<FlatBox> {
    let mut acc = vec![FlatBox { cont: Vec::new(), disc: Vec::new() }];
    for s in sets {
        let pieces: Vec<FlatBox> =
            s.0.iter().map(|i| FlatBox { cont: vec![i.clone()], disc: Vec::new() }).collect();
        acc = cartesian(acc, &pieces);
    }
    acc
}

fn region_mismatch(what: &str) -> Error {
    Error::InvalidRegion(what.to_string())
}

fn flatten_product(h: &Descriptor, regions: &[Region]) -> Result<Vec<FlatBox>> {
    if regions.len() != h.factors.len() {
        return Err(region_mismatch("region count differs from factor count"));
    }
    let mut acc = vec![FlatBox { cont: Vec::new(), disc: Vec::new() }];
    for (f, r) in h.factors.iter().zip(regions) {
        let pieces: Vec<FlatBox> = match (f, r) {
            (Factor::Real { dim }, Region::Real(sets)) if sets.len() == *dim => interval_product(sets),
            (Factor::IntegerRank { rank }, Region::Integer(s)) => {
                if s.iter().any(|v| v.len() != *rank) {
                    return Err(region_mismatch("integer vector of wrong rank"));
                }
                s.iter().map(|v| FlatBox { cont: Vec::new(), disc: v.clone() }).collect()
            }
            (Factor::FiniteCyclic { q }, Region::Cyclic(s)) => {
                if s.iter().any(|r| r >= q) {
                    return Err(region_mismatch("residue out of range"));
                }
                s.iter().map(|&r| FlatBox { cont: Vec::new(), disc: vec![r as i64] }).collect()
            }
            (Factor::Torus { dim, .. }, Region::Torus(TorusRegion::Full)) => {
                let full = IntervalSet::single(Interval::half_open(Scalar::zero(), Scalar::one()));
                interval_product(&vec![full; *dim])
            }
            (Factor::Torus { dim, .. }, Region::Torus(TorusRegion::Product(sets))) if sets.len() == *dim => {
                interval_product(sets)
            }
            (Factor::Twisted { base, m, .. }, Region::Twisted(map)) => {
                let mut out = Vec::new();
                for (r, w) in map {
                    if r >= m {
                        return Err(region_mismatch("twist residue out of range"));
                    }
                    for b in w.flatten(base)? {
                        let mut disc = vec![*r as i64];
                        disc.extend(b.disc);
                        out.push(FlatBox { cont: b.cont, disc });
                    }
                }
                out
            }
            _ => return Err(region_mismatch("region kind or dimension does not match the factor")),
        };
        acc = cartesian(acc, &pieces);
        if acc.is_empty() {
            break;
        }
    }
    Ok(acc)
}

fn flatten_point(h: &Descriptor, x: &HPoint) -> Result<FlatBox> {
    h.check(x)?;
    let mut b = FlatBox { cont: Vec::new(), disc: Vec::new() };
    for (f, c) in h.factors.iter().zip(&x.0) {
        match (f, c) {
            (_, Coord::Real(v)) | (_, Coord::Torus(v)) => b.cont.extend(v.iter().cloned().map(Interval::point)),
            (_, Coord::Integer(v)) => b.disc.extend(v.iter().copied()),
            (_, Coord::Cyclic(r)) => b.disc.push(*r as i64),
            (Factor::Twisted { base, .. }, Coord::Twisted { base: p, r }) => {
                let inner = flatten_point(base, p)?;
                b.disc.push(*r as i64);
                b.disc.extend(inner.disc);
                b.cont.extend(inner.cont);
            }
            _ => return Err(region_mismatch("point does not match descriptor")),
        }
    }
    Ok(b)
}

fn unflatten(h: &Descriptor, b: &FlatBox, ci: &mut usize, di: &mut usize) -> Vec<Region> {
    let mut out = Vec::new();
    for f in &h.factors {
        out.push(match f {
            Factor::Real { dim } => {
                let v = (0..*dim).map(|k| IntervalSet::single(b.cont[*ci + k].clone())).collect();
                *ci += dim;
                Region::Real(v)
            }
            Factor::IntegerRank { rank } => {
                let v = b.disc[*di..*di + rank].to_vec();
                *di += rank;
                Region::Integer(BTreeSet::from([v]))
            }
            Factor::FiniteCyclic { .. } => {
                let r = b.disc[*di] as u64;
                *di += 1;
                Region::Cyclic(BTreeSet::from([r]))
            }
            Factor::Torus { dim, .. } => {
                let v = (0..*dim).map(|k| IntervalSet::single(b.cont[*ci + k].clone())).collect();
                *ci += dim;
                Region::Torus(TorusRegion::Product(v))
            }
            Factor::Twisted { base, .. } => {
                let r = b.disc[*di] as u64;
                *di += 1;
                let inner = unflatten(base, b, ci, di);
                Region::Twisted(BTreeMap::from([(r, Window::Product(inner))]))
            }
        });
    }
    out
}

/// Cell decomposition shared by one or more flattened sets.
struct Cells {
    axes: Vec<Axis>,
    cuts: Vec<Vec<Scalar>>,
    discs: Vec<Vec<i64>>,
    sizes: Vec<usize>,
}

fn circle_contains(i: &Interval, x: &Scalar) -> bool {
    i.contains(x) || (x.is_zero() && i.contains(&Scalar::one()))
}

impl Cells {
    fn new(axes: Vec<Axis>, sets: &[&[FlatBox]]) -> Cells {
        let k = axes.len();
        let mut cuts: Vec<Vec<Scalar>> = vec![Vec::new(); k];
        let mut discs: BTreeSet<Vec<i64>> = BTreeSet::new();
        for set in sets {
            for b in set.iter() {
                discs.insert(b.disc.clone());
                for (j, i) in b.cont.iter().enumerate() {
                    cuts[j].push(i.lo.clone());
                    cuts[j].push(i.hi.clone());
                }
            }
        }
        for (j, c) in cuts.iter_mut().enumerate() {
            if axes[j] == Axis::Circle {
                c.push(Scalar::zero());
                for x in c.iter_mut() {
                    if x.cmp_to(&Scalar::one()) == Ordering::Equal {
                        *x = Scalar::zero();
                    }
                }
            }
            c.sort_by(|a, b| a.cmp_to(b));
            c.dedup_by(|a, b| a.cmp_to(b) == Ordering::Equal);
        }
        let sizes = (0..k)
            .map(|j| match axes[j] {
                Axis::Line => 2 * cuts[j].len() + 1,
                Axis::Circle => 2 * cuts[j].len(),
            })
            .collect();
        Cells { axes, cuts, discs: discs.into_iter().collect(), sizes }
    }

    fn per_tuple(&self) -> usize {
        self.sizes.iter().product()
    }

    fn total(&self) -> usize {
        self.per_tuple() * self.discs.len()
    }

    fn index_of(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.sizes).fold(0, |acc, (i, s)| acc * s + i)
    }

    fn decode(&self, mut flat: usize) -> (usize, Vec<usize>) {
        let per = self.per_tuple();
        let t = flat / per;
        flat %= per;
        let mut idx = vec![0; self.sizes.len()];
        for j in (0..self.sizes.len()).rev() {
            idx[j] = flat % self.sizes[j];
            flat /= self.sizes[j];
        }
        (t, idx)
    }

    fn is_point(&self, j: usize, i: usize) -> bool {
        match self.axes[j] {
            Axis::Line => i % 2 == 1,
            Axis::Circle => i % 2 == 0,
        }
    }

    /// Bounded open cell `(a, b)` or point `[a, a]`; `None` for unbounded cells.
    fn interval(&self, j: usize, i: usize) -> Option<Interval> {
        let c = &self.cuts[j];
        match self.axes[j] {
            Axis::Line => {
                if i % 2 == 1 {
                    Some(Interval::point(c[i / 2].clone()))
                } else if i == 0 || i == 2 * c.len() {
                    None
                } else {
                    Some(Interval::open(c[i / 2 - 1].clone(), c[i / 2].clone()))
                }
            }
            Axis::Circle => {
                if i % 2 == 0 {
                    Some(Interval::point(c[i / 2].clone()))
                } else {
                    let a = c[i / 2].clone();
                    let b = c.get(i / 2 + 1).cloned().unwrap_or_else(Scalar::one);
                    Some(Interval::open(a, b))
                }
            }
        }
    }

    fn rep(&self, j: usize, i: usize) -> Scalar {
        match self.interval(j, i) {
            Some(iv) if iv.lo == iv.hi => iv.lo,
            Some(iv) => &(&iv.lo + &iv.hi) * &Scalar::ratio(1, 2),
            None => {
                let c = &self.cuts[j];
                match (c.first(), c.last()) {
                    (Some(f), _) if i == 0 => f - &Scalar::one(),
                    (_, Some(l)) => l + &Scalar::one(),
                    _ => Scalar::zero(),
                }
            }
        }
    }

    fn membership(&self, set: &[FlatBox]) -> Vec<bool> {
        let per = self.per_tuple();
        let mut out = vec![false; self.total()];
        let mut by_tuple: HashMap<&[i64], Vec<&FlatBox>> = HashMap::new();
        for b in set {
            by_tuple.entry(b.disc.as_slice()).or_default().push(b);
        }
        // representatives per axis, computed once
        let reps: Vec<Vec<Scalar>> =
            (0..self.sizes.len()).map(|j| (0..self.sizes[j]).map(|i| self.rep(j, i)).collect()).collect();
        for (t, tuple) in self.discs.iter().enumerate() {
            let Some(boxes) = by_tuple.get(tuple.as_slice()) else { continue };
            for c in 0..per {
                let (_, idx) = self.decode(c);
                out[t * per + c] = boxes.iter().any(|b| {
                    b.cont.iter().enumerate().all(|(j, iv)| {
                        let x = &reps[j][idx[j]];
                        match self.axes[j] {
                            Axis::Line => iv.contains(x),
                            Axis::Circle => circle_contains(iv, x),
                        }
                    })
                });
            }
        }
        out
    }

    fn neighbours(&self, flat: usize) -> Vec<usize> {
        let (t, idx) = self.decode(flat);
        let mut acc: Vec<Vec<usize>> = vec![Vec::new()];
        for j in 0..idx.len() {
            let i = idx[j];
            let opts: Vec<usize> = if self.is_point(j, i) {
                let n = self.sizes[j];
                match self.axes[j] {
                    Axis::Line => vec![i - 1, i, i + 1],
                    Axis::Circle => vec![(i + n - 1) % n, i, (i + 1) % n],
                }
            } else {
                vec![i]
            };
            acc = acc
                .into_iter()
                .flat_map(|v| {
                    opts.iter().map(move |&o| {
                        let mut w = v.clone();
                        w.push(o);
                        w
                    })
                })
                .collect();
        }
        let per = self.per_tuple();
        acc.into_iter().map(|v| t * per + self.index_of(&v)).collect()
    }

    fn interior(&self, s: &[bool]) -> Vec<bool> {
        (0..s.len()).map(|c| s[c] && self.neighbours(c).into_iter().all(|n| s[n])).collect()
    }

    fn closure(&self, s: &[bool]) -> Vec<bool> {
        (0..s.len()).map(|c| s[c] || self.neighbours(c).into_iter().any(|n| s[n])).collect()
    }

    fn measure(&self, s: &[bool]) -> Scalar {
        let mut acc = Scalar::zero();
        for (c, &inside) in s.iter().enumerate() {
            if !inside {
                continue;
            }
            let (_, idx) = self.decode(c);
            let mut vol = Scalar::one();
            let mut full = true;
            for (j, &i) in idx.iter().enumerate() {
                match self.interval(j, i) {
                    Some(iv) if !self.is_point(j, i) => vol = &vol * &iv.length(),
                    _ => {
                        full = false;
                        break;
                    }
                }
            }
            if full {
                acc = &acc + &vol;
            }
        }
        acc
    }

    /// Cells of `s` as flat boxes, merged along the last continuous axis.
    fn boxes(&self, s: &[bool]) -> Vec<FlatBox> {
        let k = self.sizes.len();
        let mut groups: BTreeMap<(usize, Vec<usize>), Vec<Interval>> = BTreeMap::new();
        for (c, &inside) in s.iter().enumerate() {
            if !inside {
                continue;
            }
            let (t, idx) = self.decode(c);
            let key = (t, idx[..k.saturating_sub(1)].to_vec());
            let last = if k == 0 {
                None
            } else {
                Some(self.interval(k - 1, idx[k - 1]).expect("bounded set has bounded cells"))
            };
            groups.entry(key).or_default().extend(last);
        }
        let mut out = Vec::new();
        for ((t, prefix), last) in groups {
            let mut cont: Vec<Interval> = prefix
                .iter()
                .enumerate()
                .map(|(j, &i)| self.interval(j, i).expect("bounded set has bounded cells"))
                .collect();
            let disc = self.discs[t].clone();
            if k == 0 {
                out.push(FlatBox { cont, disc });
                continue;
            }
            for iv in IntervalSet::new(last).0 {
                cont.push(iv);
                out.push(FlatBox { cont: cont.clone(), disc: disc.clone() });
                cont.pop();
            }
        }
        out
    }
}

fn product_contains(regions: &[Region], x: &HPoint) -> bool {
    regions.len() == x.0.len()
        && regions.iter().zip(&x.0).all(|(r, c)| match (r, c) {
            (Region::Real(sets), Coord::Real(v)) => sets.len() == v.len() && sets.iter().zip(v).all(|(s, t)| s.contains(t)),
            (Region::Integer(s), Coord::Integer(v)) => s.contains(v),
            (Region::Cyclic(s), Coord::Cyclic(r)) => s.contains(r),
            (Region::Torus(TorusRegion::Full), Coord::Torus(_)) => true,
            (Region::Torus(TorusRegion::Product(sets)), Coord::Torus(v)) => {
                sets.len() == v.len()
                    && sets.iter().zip(v).all(|(s, t)| s.0.iter().any(|i| circle_contains(i, t)))
            }
            (Region::Twisted(map), Coord::Twisted { base, r }) => map.get(r).is_some_and(|w| w.contains(base)),
            _ => false,
        })
}

type Bounds = Vec<(f64, f64)>;

fn merge_bounds(a: Option<Bounds>, b: Option<Bounds>) -> Option<Bounds> {
    match (a, b) {
        (None, x) | (x, None) => x,
        (Some(a), Some(b)) => Some(a.iter().zip(&b).map(|(p, q)| (p.0.min(q.0), p.1.max(q.1))).collect()),
    }
}

fn product_bounds(h: &Descriptor, regions: &[Region]) -> Result<Option<Bounds>> {
    let mut out = Vec::new();
    for (f, r) in h.factors.iter().zip(regions) {
        match (f, r) {
            (Factor::Real { .. }, Region::Real(sets)) => {
                for s in sets {
                    let Some((lo, hi)) = s.bounds() else { return Ok(None) };
                    out.push((lo.to_f64(), hi.to_f64()));
                }
            }
            (Factor::IntegerRank { rank }, Region::Integer(s)) => {
                if s.is_empty() {
                    return Ok(None);
                }
                for k in 0..*rank {
                    let lo = s.iter().map(|v| v[k]).min().unwrap_or(0) as f64;
                    let hi = s.iter().map(|v| v[k]).max().unwrap_or(0) as f64;
                    out.push((lo, hi));
                }
            }
            (Factor::FiniteCyclic { .. }, Region::Cyclic(s)) => {
                if s.is_empty() {
                    return Ok(None);
                }
            }
            (Factor::Torus { .. }, Region::Torus(t)) => {
                if let TorusRegion::Product(sets) = t {
                    if sets.iter().any(IntervalSet::is_empty) {
                        return Ok(None);
                    }
                }
            }
            (Factor::Twisted { base, m, b_star }, Region::Twisted(map)) => {
                let lb: Vec<f64> = base.linearize(b_star).iter().map(Scalar::to_f64).collect();
                let mut acc: Option<Bounds> = None;
                for (r, w) in map {
                    if let Some(b) = w.linear_bounds(base)? {
                        let frac = *r as f64 / *m as f64;
                        let shifted = b.iter().zip(&lb).map(|(p, l)| (p.0 + frac * l, p.1 + frac * l)).collect();
                        acc = merge_bounds(acc, Some(shifted));
                    }
                }
                match acc {
                    Some(b) => out.extend(b),
                    None => return Ok(None),
                }
            }
            _ => return Err(region_mismatch("region kind does not match the factor")),
        }
    }
    Ok(Some(out))
}

fn translate_product(h: &Descriptor, regions: &[Region], t: &HPoint) -> Result<Vec<Region>> {
    h.check(t)?;
    if regions.len() != h.factors.len() {
        return Err(region_mismatch("region count differs from factor count"));
    }
    let mut out = Vec::new();
    for ((f, r), c) in h.factors.iter().zip(regions).zip(&t.0) {
        out.push(match (f, r, c) {
            (_, Region::Real(sets), Coord::Real(v)) => Region::Real(sets.iter().zip(v).map(|(s, x)| s.translate(x)).collect()),
            (_, Region::Integer(s), Coord::Integer(v)) => {
                Region::Integer(s.iter().map(|w| w.iter().zip(v).map(|(a, b)| a + b).collect()).collect())
            }
            (Factor::FiniteCyclic { q }, Region::Cyclic(s), Coord::Cyclic(k)) => {
                Region::Cyclic(s.iter().map(|r| (r + k) % q).collect())
            }
            (_, Region::Torus(TorusRegion::Full), Coord::Torus(_)) => Region::Torus(TorusRegion::Full),
            (_, Region::Torus(TorusRegion::Product(sets)), Coord::Torus(v)) => {
                Region::Torus(TorusRegion::Product(sets.iter().zip(v).map(|(s, x)| s.translate_circle(x)).collect()))
            }
            (Factor::Twisted { base, m, b_star }, Region::Twisted(map), Coord::Twisted { base: ht, r: rt }) => {
                let carried = base.add(ht, b_star)?;
                let mut next = BTreeMap::new();
                for (r, w) in map {
                    let s = r + rt;
                    if s < *m {
                        next.insert(s, w.translate(base, ht)?);
                    } else {
                        next.insert(s - m, w.translate(base, &carried)?);
                    }
                }
                Region::Twisted(next)
            }
            _ => return Err(region_mismatch("region kind does not match the factor")),
        });
    }
    Ok(out)
}

impl Window {
    /// Window `I` in `ℝ`.
    pub fn interval(i: Interval) -> Window {
        Window::Product(vec![Region::Real(vec![IntervalSet::single(i)])])
    }

    /// Finite union of intervals in `ℝ`.
    pub fn interval_set(s: IntervalSet) -> Window {
        Window::Product(vec![Region::Real(vec![s])])
    }

    pub fn empty() -> Window {
        Window::Union(Vec::new())
    }

    /// Window `W × R` over `H × H₂`, when `self` is a product window.
    pub fn times(&self, r: Region) -> Result<Window> {
        match self {
            Window::Product(p) => {
                let mut p = p.clone();
                p.push(r);
                Ok(Window::Product(p))
            }
            Window::Union(ps) => Ok(Window::Union(
                ps.iter()
                    .map(|p| {
                        let mut p = p.clone();
                        p.push(r.clone());
                        p
                    })
                    .collect(),
            )),
            Window::Augmented { .. } => Err(Error::Unsupported("product of an augmented window".into())),
        }
    }

    /// Augmented window `open ∪ points`, with points inside `open` pruned.
    pub fn augmented(h: &Descriptor, open: Window, points: Vec<HPoint>, certified: Option<DirectBox>) -> Result<Window> {
        if !open.is_open(h)? {
            return Err(Error::InvalidWindow("open part of an augmented window is not open".into()));
        }
        let mut kept: Vec<HPoint> = Vec::new();
        for p in points {
            h.check(&p)?;
            if !open.contains(&p) && !kept.contains(&p) {
                kept.push(p);
            }
        }
        kept.sort_by(|a, b| {
            a.approx().partial_cmp(&b.approx()).unwrap_or(Ordering::Equal)
        });
        Ok(Window::Augmented { open: Box::new(open), points: kept, certified })
    }

    pub fn contains(&self, x: &HPoint) -> bool {
        match self {
            Window::Product(p) => product_contains(p, x),
            Window::Union(ps) => ps.iter().any(|p| product_contains(p, x)),
            Window::Augmented { open, points, .. } => open.contains(x) || points.contains(x),
        }
    }

    /// Direct-space box on which an augmented window is complete.
    pub fn certified_box(&self) -> Option<&DirectBox> {
        match self {
            Window::Augmented { certified, .. } => certified.as_ref(),
            _ => None,
        }
    }

    fn flatten(&self, h: &Descriptor) -> Result<Vec<FlatBox>> {
        match self {
            Window::Product(p) => flatten_product(h, p),
            Window::Union(ps) => {
                let mut out = Vec::new();
                for p in ps {
                    out.extend(flatten_product(h, p)?);
                }
                Ok(out)
            }
            Window::Augmented { open, points, .. } => {
                let mut out = open.flatten(h)?;
                for p in points {
                    out.push(flatten_point(h, p)?);
                }
                Ok(out)
            }
        }
    }

    fn axes(h: &Descriptor) -> Vec<Axis> {
        let mut a = Vec::new();
        layout(h, &mut a);
        a
    }

    fn from_boxes(h: &Descriptor, boxes: Vec<FlatBox>) -> Window {
        let mut products: Vec<Vec<Region>> = boxes
            .iter()
            .map(|b| {
                let (mut ci, mut di) = (0, 0);
                unflatten(h, b, &mut ci, &mut di)
            })
            .collect();
        // a single real axis merges into one interval set
        if h.factors.len() == 1 && matches!(h.factors[0], Factor::Real { dim: 1 }) {
            let pieces: Vec<Interval> = boxes.into_iter().map(|b| b.cont[0].clone()).collect();
            return Window::interval_set(IntervalSet::new(pieces));
        }
        if products.len() == 1 {
            Window::Product(products.pop().expect("one product"))
        } else {
            Window::Union(products)
        }
    }

    fn cells_of(h: &Descriptor, sets: &[&Window]) -> Result<(Cells, Vec<Vec<bool>>)> {
        let flat: Vec<Vec<FlatBox>> = sets.iter().map(|w| w.flatten(h)).collect::<Result<_>>()?;
        let refs: Vec<&[FlatBox]> = flat.iter().map(Vec::as_slice).collect();
        let cells = Cells::new(Window::axes(h), &refs);
        let member = flat.iter().map(|f| cells.membership(f)).collect();
        Ok((cells, member))
    }

    pub fn interior(&self, h: &Descriptor) -> Result<Window> {
        let (c, m) = Window::cells_of(h, &[self])?;
        Ok(Window::from_boxes(h, c.boxes(&c.interior(&m[0]))))
    }

    pub fn closure(&self, h: &Descriptor) -> Result<Window> {
        let (c, m) = Window::cells_of(h, &[self])?;
        Ok(Window::from_boxes(h, c.boxes(&c.closure(&m[0]))))
    }

    /// Haar measure (Lebesgue × counting × torus mass `|det D|`).
    pub fn measure(&self, h: &Descriptor) -> Result<Scalar> {
        let (c, m) = Window::cells_of(h, &[self])?;
        Ok(&c.measure(&m[0]) * &torus_scale(h))
    }

    pub fn boundary_measure(&self, h: &Descriptor) -> Result<Scalar> {
        let (c, m) = Window::cells_of(h, &[self])?;
        let cl = c.measure(&c.closure(&m[0]));
        let int = c.measure(&c.interior(&m[0]));
        Ok(&(&cl - &int) * &torus_scale(h))
    }

    pub fn is_empty(&self, h: &Descriptor) -> Result<bool> {
        Ok(self.flatten(h)?.is_empty())
    }

    pub fn is_open(&self, h: &Descriptor) -> Result<bool> {
        let (c, m) = Window::cells_of(h, &[self])?;
        Ok(c.interior(&m[0]) == m[0])
    }

    pub fn is_closed(&self, h: &Descriptor) -> Result<bool> {
        let (c, m) = Window::cells_of(h, &[self])?;
        Ok(c.closure(&m[0]) == m[0])
    }

    /// Set equality.
    pub fn same_set(&self, other: &Window, h: &Descriptor) -> Result<bool> {
        let (_, m) = Window::cells_of(h, &[self, other])?;
        Ok(m[0] == m[1])
    }

    /// `self ∖ other`.
    pub fn difference(&self, other: &Window, h: &Descriptor) -> Result<Window> {
        let (c, m) = Window::cells_of(h, &[self, other])?;
        let mask: Vec<bool> = m[0].iter().zip(&m[1]).map(|(a, b)| *a && !*b).collect();
        Ok(Window::from_boxes(h, c.boxes(&mask)))
    }

    /// Set inclusion `self ⊆ other`.
    pub fn is_subset(&self, other: &Window, h: &Descriptor) -> Result<bool> {
        let (_, m) = Window::cells_of(h, &[self, other])?;
        Ok(m[0].iter().zip(&m[1]).all(|(a, b)| !a || *b))
    }

    pub fn check_properties(&self, h: &Descriptor) -> Result<Properties> {
        let (c, m) = Window::cells_of(h, &[self])?;
        let s = &m[0];
        let int = c.interior(s);
        let cl = c.closure(s);
        let cl_int = c.closure(&int);
        Ok(Properties {
            precompact: true,
            has_interior: int.iter().any(|&b| b),
            topologically_regular: cl_int == cl,
            measure_regular: c.measure(&cl) == c.measure(&int),
            measurable: true,
        })
    }

    /// `t + W`.
    pub fn translate(&self, h: &Descriptor, t: &HPoint) -> Result<Window> {
        match self {
            Window::Product(p) => Ok(Window::Product(translate_product(h, p, t)?)),
            Window::Union(ps) => Ok(Window::Union(
                ps.iter().map(|p| translate_product(h, p, t)).collect::<Result<_>>()?,
            )),
            Window::Augmented { open, points, certified } => Ok(Window::Augmented {
                open: Box::new(open.translate(h, t)?),
                points: points.iter().map(|p| h.add(p, t)).collect::<Result<_>>()?,
                certified: certified.clone(),
            }),
        }
    }

    /// Bounding box of the linearized coordinates (see
    /// [`Descriptor::linearize`]); `None` for an empty window.
    pub fn linear_bounds(&self, h: &Descriptor) -> Result<Option<Vec<(f64, f64)>>> {
        match self {
            Window::Product(p) => {
                if p.len() != h.factors.len() {
                    return Err(region_mismatch("region count differs from factor count"));
                }
                product_bounds(h, p)
            }
            Window::Union(ps) => {
                let mut acc = None;
                for p in ps {
                    acc = merge_bounds(acc, product_bounds(h, p)?);
                }
                Ok(acc)
            }
            Window::Augmented { open, points, .. } => {
                let mut acc = open.linear_bounds(h)?;
                for p in points {
                    let l: Vec<(f64, f64)> = h.linearize(p).iter().map(|x| (x.to_f64(), x.to_f64())).collect();
                    acc = merge_bounds(acc, Some(l));
                }
                Ok(acc)
            }
        }
    }

    /// Parses interval notation for windows in `ℝ`: `[a, b)`, unions
    /// `[a, b) u (c, d]`, finite sets `{a, b}` and `empty`.
    pub fn parse_real(s: &str) -> Result<Window> {
        let t = s.trim();
        if t == "empty" || t == "∅" {
            return Ok(Window::interval_set(IntervalSet::empty()));
        }
        let mut pieces = Vec::new();
        for part in t.split(" u ").flat_map(|p| p.split('∪')) {
            let p = part.trim();
            if let Some(inner) = p.strip_prefix('{').and_then(|x| x.strip_suffix('}')) {
                let mut rest = inner;
                while !rest.trim().is_empty() {
                    let (a, b) = split_top_comma(rest).unwrap_or((rest, ""));
                    pieces.push(Interval::point(Scalar::parse(a)?));
                    rest = b;
                }
            } else {
                pieces.push(Interval::parse(p)?);
            }
        }
        Ok(Window::interval_set(IntervalSet::new(pieces)))
    }
}
