//! Quantitative checks on projection sets: densities, Fourier–Bohr
//! coefficients, the annihilator of the lattice, equidistribution on a torus
//! factor, patch comparison and repetitivity.
//!
//! Averages are taken along `A_n = [-n, n]^d`.

use std::cmp::Ordering;
use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::scalar::Scalar;
use crate::scheme::{cmp_points, AveragingSequence, CutProjectScheme, DirectBox, Patch};
use crate::space::{Coord, Factor};
use crate::window::{Region, TorusRegion, Window};

/// Constant `C` of the boundary correction `δ(n) = C d / n`.
pub const DENSITY_CORRECTION: f64 = 2.0;

/// Default bound on `|a_χ|` for nontrivial characters.
pub const FB_TOLERANCE: f64 = 0.05;

/// Empirical densities along `A_n` with the bounds
/// `dens(𝓛) m_H(W°) ≤ dens ≤ dens(𝓛) m_H(W̄)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityReport {
    pub n: Vec<u64>,
    pub counts: Vec<usize>,
    pub density: Vec<f64>,
    pub lower: Scalar,
    pub upper: Scalar,
    pub correction: f64,
    pub within: Vec<bool>,
}

impl DensityReport {
    /// `δ(n)` for the dimension of the report.
    pub fn slack(&self, n: u64, d: usize) -> f64 {
        self.correction * d as f64 / n as f64
    }

    pub fn sandwich_holds(&self) -> bool {
        self.within.iter().all(|&b| b)
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let io = |e: csv::Error| Error::Io(std::io::Error::other(e));
        w.write_record(["n", "count", "density", "lower", "upper", "within"]).map_err(io)?;
        let (lo, hi) = (self.lower.to_f64(), self.upper.to_f64());
        for i in 0..self.n.len() {
            w.write_record([
                self.n[i].to_string(),
                self.counts[i].to_string(),
                format!("{:.12}", self.density[i]),
                format!("{lo:.12}"),
                format!("{hi:.12}"),
                self.within[i].to_string(),
            ])
            .map_err(io)?;
        }
        String::from_utf8(w.into_inner().map_err(|e| Error::Io(e.into_error()))?)
            .map_err(|e| Error::Parse(e.to_string()))
    }
}

pub fn empirical_density(scheme: &CutProjectScheme, w: &Window, n_list: &[u64]) -> Result<DensityReport> {
    let h = scheme.internal();
    let dens = scheme.dens_lattice();
    let lower = &dens * &w.interior(h)?.measure(h)?;
    let upper = &dens * &w.closure(h)?.measure(h)?;
    let mut ns = n_list.to_vec();
    ns.sort_unstable();
    ns.dedup();
    let Some(&top) = ns.last() else {
        return Ok(DensityReport {
            n: Vec::new(),
            counts: Vec::new(),
            density: Vec::new(),
            lower,
            upper,
            correction: DENSITY_CORRECTION,
            within: Vec::new(),
        });
    };
    let seq = AveragingSequence::new(scheme.d());
    let patch = scheme.project_points(&seq.at(top), w)?;
    let d = scheme.d();
    let (lo, hi) = (lower.to_f64(), upper.to_f64());
    let mut report = DensityReport {
        n: ns.clone(),
        counts: Vec::new(),
        density: Vec::new(),
        lower: lower.clone(),
        upper: upper.clone(),
        correction: DENSITY_CORRECTION,
        within: Vec::new(),
    };
    for &n in &ns {
        let b = seq.at(n);
        let count = patch.points.iter().filter(|p| b.contains(p)).count();
        let rho = count as f64 / seq.volume(n).to_f64();
        let delta = report.slack(n, d);
        report.counts.push(count);
        report.density.push(rho);
        report.within.push(lo - delta <= rho && rho <= hi + delta);
    }
    Ok(report)
}

/// Complex number, only as needed for character sums.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Complex {
    pub re: f64,
    pub im: f64,
}

impl Complex {
    pub fn abs(&self) -> f64 {
        self.re.hypot(self.im)
    }
}

/// Character `x ↦ exp(2πi⟨χ, x⟩)` of `ℝ^d`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CharacterRd {
    pub chi: Vec<Scalar>,
}

impl CharacterRd {
    pub fn zero(d: usize) -> CharacterRd {
        CharacterRd { chi: vec![Scalar::zero(); d] }
    }
}

/// `(1/vol) Σ exp(-2πi⟨χ, x⟩)` over the given points.
fn character_sum(points: &[Vec<f64>], chi: &[f64], vol: f64) -> Complex {
    let (re, im) = points
        .iter()
        .map(|x| {
            let phase: f64 = x.iter().zip(chi).map(|(a, b)| a * b).sum::<f64>().rem_euclid(1.0);
            let (s, c) = (2.0 * PI * phase).sin_cos();
            (c, -s)
        })
        .fold((0.0, 0.0), |(a, b), (c, s)| (a + c, b + s));
    Complex { re: re / vol, im: im / vol }
}

/// Fourier–Bohr estimate `(1/(2n)^d) Σ_{x ∈ Λ_W ∩ A_n} exp(-2πi⟨χ,x⟩)`.
pub fn fourier_bohr(scheme: &CutProjectScheme, w: &Window, chi: &CharacterRd, n: u64) -> Result<Complex> {
    if chi.chi.len() != scheme.d() {
        return Err(Error::BoxMismatch("character has the wrong dimension".into()));
    }
    let seq = AveragingSequence::new(scheme.d());
    let patch = scheme.project_points(&seq.at(n), w)?;
    let chi: Vec<f64> = chi.chi.iter().map(Scalar::to_f64).collect();
    Ok(character_sum(&patch.approx(), &chi, seq.volume(n).to_f64()))
}

/// Character of `ℝ^d × H` for `H` built from real, integer and cyclic
/// factors: the pairing with `(g, h)` is `⟨direct, g⟩ + ⟨linear, lin(h)⟩ +
/// Σ cyclic_j · r_j`, where `r_j` are the cyclic residues of `h`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Character {
    pub direct: Vec<Scalar>,
    pub linear: Vec<Scalar>,
    pub cyclic: Vec<Scalar>,
}

fn base_family_only(scheme: &CutProjectScheme) -> Result<()> {
    for f in &scheme.internal().factors {
        if matches!(f, Factor::Torus { .. } | Factor::Twisted { .. }) {
            return Err(Error::Unsupported("annihilator of a scheme with torus or twisted factors".into()));
        }
    }
    Ok(())
}

fn cyclic_residues(scheme: &CutProjectScheme, i: usize) -> Vec<u64> {
    scheme.generators()[i]
        .h
        .0
        .iter()
        .filter_map(|c| match c {
            Coord::Cyclic(r) => Some(*r),
            _ => None,
        })
        .collect()
}

/// Generating set of the annihilator `𝓛°`.
pub fn annihilator(scheme: &CutProjectScheme) -> Result<Vec<Character>> {
    base_family_only(scheme)?;
    let d = scheme.d();
    let r = scheme.rank();
    let inv = scheme.inverse();
    let mut out: Vec<Character> = (0..r)
        .map(|j| Character {
            direct: inv[j][..d].to_vec(),
            linear: inv[j][d..].to_vec(),
            cyclic: Vec::new(),
        })
        .collect();
    let orders: Vec<u64> = scheme
        .internal()
        .factors
        .iter()
        .filter_map(|f| match f {
            Factor::FiniteCyclic { q } => Some(*q),
            _ => None,
        })
        .collect();
    for c in &mut out {
        c.cyclic = vec![Scalar::zero(); orders.len()];
    }
    let residues: Vec<Vec<u64>> = (0..r).map(|i| cyclic_residues(scheme, i)).collect();
    for (j, &q) in orders.iter().enumerate() {
        // χ = -M^{-T} c / q on the linear part, 1/q on factor j
        let qs = Scalar::int(q as i64);
        let mut full = vec![Scalar::zero(); r];
        for (i, res) in residues.iter().enumerate() {
            if res[j] == 0 {
                continue;
            }
            let c = Scalar::int(res[j] as i64);
            for (k, x) in full.iter_mut().enumerate() {
                *x = &*x - &(&inv[i][k] * &c);
            }
        }
        let full: Vec<Scalar> = full.iter().map(|x| x.checked_div(&qs).expect("q is nonzero")).collect();
        let mut cyclic = vec![Scalar::zero(); orders.len()];
        cyclic[j] = Scalar::ratio(1, q as i64);
        out.push(Character { direct: full[..d].to_vec(), linear: full[d..].to_vec(), cyclic });
    }
    Ok(out)
}

/// `χ(ι(e_i))` as a real number (an integer iff `χ` annihilates `e_i`).
pub fn character_pairing(scheme: &CutProjectScheme, chi: &Character, i: usize) -> Scalar {
    let g = &scheme.generators()[i];
    let lin = scheme.internal().linearize(&g.h);
    let mut acc = Scalar::zero();
    for (a, b) in chi.direct.iter().zip(&g.g) {
        acc = &acc + &(a * b);
    }
    for (a, b) in chi.linear.iter().zip(&lin) {
        acc = &acc + &(a * b);
    }
    for (a, r) in chi.cyclic.iter().zip(cyclic_residues(scheme, i)) {
        acc = &acc + &a.mul_int(r as i64);
    }
    acc
}

/// Direct components of elements of `𝓛°`, generators first, then small
/// integer combinations of them, truncated to `count`.
pub fn annihilator_projection(scheme: &CutProjectScheme, count: usize) -> Result<Vec<Vec<Scalar>>> {
    let base: Vec<Vec<Scalar>> = annihilator(scheme)?.into_iter().map(|c| c.direct).collect();
    let mut out: Vec<Vec<Scalar>> = Vec::new();
    let push = |v: Vec<Scalar>, out: &mut Vec<Vec<Scalar>>| {
        if out.len() < count && !out.iter().any(|u| cmp_points(u, &v) == Ordering::Equal) {
            out.push(v);
        }
    };
    for v in &base {
        push(v.clone(), &mut out);
    }
    let k = base.len();
    let d = scheme.d();
    let mut radius = 1i64;
    while out.len() < count && k > 0 && radius <= 8 {
        let mut c = vec![-radius; k];
        loop {
            if c.iter().map(|x| x.abs()).max() == Some(radius) {
                let mut v = vec![Scalar::zero(); d];
                for (ci, b) in c.iter().zip(&base) {
                    for (x, y) in v.iter_mut().zip(b) {
                        *x = &*x + &y.mul_int(*ci);
                    }
                }
                if !v.iter().all(Scalar::is_zero) {
                    push(v, &mut out);
                }
            }
            let mut p = 0;
            while p < k {
                c[p] += 1;
                if c[p] <= radius {
                    break;
                }
                c[p] = -radius;
                p += 1;
            }
            if p == k || out.len() >= count {
                break;
            }
        }
        radius += 1;
    }
    Ok(out)
}

/// Outcome of a check that can lack evidence either way.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EquidistributionReport {
    pub n: u64,
    pub points: usize,
    /// Largest `|a_χ|` over `χ ∈ D° ∖ {0}`, `|χ| ≤ chi_bound`.
    pub max_fb: f64,
    pub max_fb_at: Option<Vec<f64>>,
    pub characters: usize,
    pub fb_tolerance: f64,
    pub cells: usize,
    pub cells_hit: usize,
    /// `max_cell |count/N - 1/cells|`.
    pub discrepancy: f64,
    pub verdict: Verdict,
}

/// Resolution of the coverage grid on the torus, per axis.
pub const GRID: usize = 8;

/// Sampling below this many expected points per grid cell is reported as
/// inconclusive rather than failed.
const MIN_EXPECTED_PER_CELL: f64 = 8.0;

/// Torus basis of the last torus factor.
fn torus_basis(scheme: &CutProjectScheme) -> Result<(usize, linalg::Matrix)> {
    scheme
        .internal()
        .factors
        .iter()
        .rev()
        .find_map(|f| match f {
            Factor::Torus { dim, basis } => Some((*dim, basis.clone())),
            _ => None,
        })
        .ok_or_else(|| Error::Unsupported("scheme has no torus factor".into()))
}

/// Fourier–Bohr and grid-coverage statistics of `ψ(Λ_U ∩ A_n)` on the torus
/// factor `ℝ^d / Dℤ^d` of an extended scheme. `u` is a window in the base
/// internal space (the torus factor is appended as a full factor).
pub fn equidistribution_check(scheme: &CutProjectScheme, u: &Window, chi_bound: f64, n: u64) -> Result<EquidistributionReport> {
    let (dim, basis) = torus_basis(scheme)?;
    let d = scheme.d();
    if dim != d {
        return Err(Error::Unsupported("torus factor dimension differs from the direct dimension".into()));
    }
    let lifted = u.times(Region::Torus(TorusRegion::Full))?;
    let seq = AveragingSequence::new(d);
    let patch = scheme.project_points(&seq.at(n), &lifted)?;
    let pts = patch.approx();
    let vol = seq.volume(n).to_f64();
    let dinv = linalg::to_f64(&linalg::inverse(&basis).ok_or_else(|| Error::InvalidDescriptor("singular torus basis".into()))?);

    // D° = D^{-T} ℤ^d
    let kmax: Vec<i64> = {
        let b = linalg::to_f64(&basis);
        (0..d).map(|i| (chi_bound * b.iter().map(|row| row[i].abs()).sum::<f64>()).ceil() as i64 + 1).collect()
    };
    let mut chars: Vec<Vec<f64>> = Vec::new();
    let mut k: Vec<i64> = kmax.iter().map(|m| -m).collect();
    loop {
        if k.iter().any(|&x| x != 0) {
            let chi: Vec<f64> = (0..d).map(|i| (0..d).map(|j| dinv[j][i] * k[j] as f64).sum()).collect();
            if chi.iter().map(|x| x * x).sum::<f64>().sqrt() <= chi_bound {
                chars.push(chi);
            }
        }
        let mut p = 0;
        while p < d {
            k[p] += 1;
            if k[p] <= kmax[p] {
                break;
            }
            k[p] = -kmax[p];
            p += 1;
        }
        if p == d {
            break;
        }
    }
    let sums: Vec<(f64, &Vec<f64>)> = chars.par_iter().map(|c| (character_sum(&pts, c, vol).abs(), c)).collect();
    let (max_fb, max_fb_at) = sums
        .iter()
        .fold((0.0f64, None), |(m, at), (v, c)| if *v > m { (*v, Some((*c).clone())) } else { (m, at) });

    let cells = GRID.pow(d as u32);
    let mut counts = vec![0usize; cells];
    for x in &pts {
        let mut idx = 0;
        for row in dinv.iter() {
            let u: f64 = row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>().rem_euclid(1.0);
            idx = idx * GRID + ((u * GRID as f64) as usize).min(GRID - 1);
        }
        counts[idx] += 1;
    }
    let total = pts.len();
    let cells_hit = counts.iter().filter(|&&c| c > 0).count();
    let discrepancy = if total == 0 {
        1.0
    } else {
        counts.iter().map(|&c| (c as f64 / total as f64 - 1.0 / cells as f64).abs()).fold(0.0, f64::max)
    };
    let ok = cells_hit == cells && max_fb < FB_TOLERANCE;
    let verdict = if ok {
        Verdict::Pass
    } else if total == 0 {
        Verdict::Fail
    } else if (total as f64) / (cells as f64) < MIN_EXPECTED_PER_CELL {
        Verdict::Inconclusive
    } else {
        Verdict::Fail
    };
    Ok(EquidistributionReport {
        n,
        points: total,
        max_fb,
        max_fb_at,
        characters: chars.len(),
        fb_tolerance: FB_TOLERANCE,
        cells,
        cells_hit,
        discrepancy,
        verdict,
    })
}

/// Result of a set comparison; `witness` is the first offending point in
/// sorted order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub holds: bool,
    pub witness: Option<Vec<Scalar>>,
}

fn same_box(a: &Patch, b: &Patch) -> Result<()> {
    if a.bbox != b.bbox {
        return Err(Error::BoxMismatch(format!("{} vs {}", a.bbox, b.bbox)));
    }
    Ok(())
}

/// Merge walk over two sorted point lists: first point of `a` missing from
/// `b` and first point of `b` missing from `a`.
fn first_misses(a: &[Vec<Scalar>], b: &[Vec<Scalar>]) -> (Option<usize>, Option<usize>) {
    let (mut i, mut j) = (0, 0);
    let (mut miss_a, mut miss_b) = (None, None);
    while i < a.len() && j < b.len() && (miss_a.is_none() || miss_b.is_none()) {
        match cmp_points(&a[i], &b[j]) {
            Ordering::Equal => {
                i += 1;
                j += 1;
            }
            Ordering::Less => {
                miss_a.get_or_insert(i);
                i += 1;
            }
            Ordering::Greater => {
                miss_b.get_or_insert(j);
                j += 1;
            }
        }
    }
    if i < a.len() {
        miss_a.get_or_insert(i);
    }
    if j < b.len() {
        miss_b.get_or_insert(j);
    }
    (miss_a, miss_b)
}

/// `a ⊆ b` on a common box.
pub fn verify_inclusion(a: &Patch, b: &Patch) -> Result<Comparison> {
    same_box(a, b)?;
    let (miss, _) = first_misses(&a.points, &b.points);
    Ok(Comparison { holds: miss.is_none(), witness: miss.map(|i| a.points[i].clone()) })
}

/// `a = b` on a common box.
pub fn verify_equality(a: &Patch, b: &Patch) -> Result<Comparison> {
    same_box(a, b)?;
    let (ma, mb) = first_misses(&a.points, &b.points);
    let witness = match (ma, mb) {
        (None, None) => None,
        (Some(i), None) => Some(a.points[i].clone()),
        (None, Some(j)) => Some(b.points[j].clone()),
        (Some(i), Some(j)) => {
            if cmp_points(&a.points[i], &b.points[j]) != Ordering::Greater {
                Some(a.points[i].clone())
            } else {
                Some(b.points[j].clone())
            }
        }
    };
    Ok(Comparison { holds: witness.is_none(), witness })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RepetitivityReport {
    pub passed: bool,
    /// Points of the pattern `Λ ∩ K`.
    pub pattern: usize,
    /// Return vectors found within reach of the probe box.
    pub returns: Vec<Vec<Scalar>>,
    /// Centre of a ball (sup norm) of the given radius with no return vector.
    pub witness: Option<Vec<Scalar>>,
}

/// Checks that every closed sup-norm ball of radius `r` centred in `probe`
/// contains a return vector `t` of the pattern on `K`, i.e.
/// `(Λ - t) ∩ K = Λ ∩ K`.
pub fn repetitivity_check<F>(source: F, k: &DirectBox, r: &Scalar, probe: &DirectBox) -> Result<RepetitivityReport>
where
    F: Fn(&DirectBox) -> Result<Patch>,
{
    let d = k.dim();
    if probe.dim() != d {
        return Err(Error::BoxMismatch("probe and pattern boxes differ in dimension".into()));
    }
    if r.signum() != Ordering::Greater {
        return Err(Error::BoxMismatch("radius must be positive".into()));
    }
    let reach = probe.expand(r);
    let big = DirectBox::new(
        (0..d).map(|i| &k.lo[i] + &reach.lo[i]).collect(),
        (0..d).map(|i| &k.hi[i] + &reach.hi[i]).collect(),
    )?;
    let all = source(&big)?;
    let pattern = all.restrict(k);
    let Some(q0) = pattern.points.first().cloned() else {
        return Err(Error::Unsupported("the pattern box contains no points".into()));
    };
    let mut returns: Vec<Vec<Scalar>> = all
        .points
        .par_iter()
        .filter_map(|p| {
            let t: Vec<Scalar> = p.iter().zip(&q0).map(|(a, b)| a - b).collect();
            if !reach.contains(&t) {
                return None;
            }
            let shifted = k.translate(&t);
            let count = all.points.iter().filter(|x| shifted.contains(x)).count();
            let matches = count == pattern.len()
                && pattern.points.iter().all(|x| {
                    let y: Vec<Scalar> = x.iter().zip(&t).map(|(a, b)| a + b).collect();
                    all.contains(&y)
                });
            matches.then_some(t)
        })
        .collect();
    returns.sort_by(|a, b| cmp_points(a, b));
    let witness = if d == 1 { uncovered_1d(&returns, r, probe) } else { uncovered_grid(&returns, r, probe) };
    Ok(RepetitivityReport { passed: witness.is_none(), pattern: pattern.len(), returns, witness })
}

fn uncovered_1d(returns: &[Vec<Scalar>], r: &Scalar, probe: &DirectBox) -> Option<Vec<Scalar>> {
    let (lo, hi) = (&probe.lo[0], &probe.hi[0]);
    let two_r = r.mul_int(2);
    let Some(first) = returns.first() else { return Some(vec![lo.clone()]) };
    if first[0].cmp_to(&(lo + r)) == Ordering::Greater {
        return Some(vec![lo.clone()]);
    }
    for w in returns.windows(2) {
        let gap = &w[1][0] - &w[0][0];
        if gap.cmp_to(&two_r) == Ordering::Greater {
            let mid = (&w[0][0] + &w[1][0]).checked_div(&Scalar::int(2)).expect("2 is nonzero");
            if mid.cmp_to(lo) != Ordering::Less && mid.cmp_to(hi) != Ordering::Greater {
                return Some(vec![mid]);
            }
        }
    }
    let last = returns.last().expect("nonempty");
    if last[0].cmp_to(&(hi - r)) == Ordering::Less {
        return Some(vec![hi.clone()]);
    }
    None
}

fn sup_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Grid version for `d ≥ 2`: each grid point must have a return vector
/// within `r - δ/2`, which covers its whole grid cell.
fn uncovered_grid(returns: &[Vec<Scalar>], r: &Scalar, probe: &DirectBox) -> Option<Vec<Scalar>> {
    let t: Vec<Vec<f64>> = returns.iter().map(|v| v.iter().map(Scalar::to_f64).collect()).collect();
    let rf = r.to_f64();
    let lo: Vec<f64> = probe.lo.iter().map(Scalar::to_f64).collect();
    let hi: Vec<f64> = probe.hi.iter().map(Scalar::to_f64).collect();
    let delta = rf / 4.0;
    let steps: Vec<usize> = lo.iter().zip(&hi).map(|(a, b)| ((b - a) / delta).ceil() as usize + 1).collect();
    let mut idx = vec![0usize; lo.len()];
    loop {
        let c: Vec<f64> = (0..lo.len()).map(|i| (lo[i] + idx[i] as f64 * delta).min(hi[i])).collect();
        if !t.iter().any(|v| sup_dist(v, &c) <= rf - delta / 2.0) {
            return Some(c.into_iter().map(Scalar::float).collect());
        }
        let mut p = 0;
        while p < idx.len() {
            idx[p] += 1;
            if idx[p] < steps[p] {
                break;
            }
            idx[p] = 0;
            p += 1;
        }
        if p == idx.len() {
            return None;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scheme::fibonacci_window;
    use crate::window::Interval;

    #[test]
    fn annihilator_of_square_lattice() {
        let s = CutProjectScheme::square_lattice();
        let p = annihilator_projection(&s, 2).unwrap();
        assert!(p.contains(&vec![Scalar::one()]));
    }

    #[test]
    fn fibonacci_annihilator_congruences() {
        let s = CutProjectScheme::fibonacci();
        let chars = annihilator(&s).unwrap();
        for c in &chars {
            for i in 0..s.rank() {
                let v = character_pairing(&s, c, i);
                assert!(v.is_rational() && v.to_rational().unwrap().is_integer());
            }
        }
        // direct parts lie in (1/√5) ℤ[τ]
        let r5 = Scalar::sqrt_int(5);
        for c in &chars {
            let scaled = &c.direct[0] * &r5;
            let conj = Scalar::Exact(scaled.as_exact().unwrap().conjugate(5));
            let n = s.coordinates_of(&[scaled.clone()], &crate::space::HPoint::real(conj));
            assert!(n.is_some(), "{scaled}");
        }
    }

    #[test]
    fn trivial_character_is_density() {
        let s = CutProjectScheme::fibonacci();
        let w = fibonacci_window();
        let rep = empirical_density(&s, &w, &[40]).unwrap();
        let fb = fourier_bohr(&s, &w, &CharacterRd::zero(1), 40).unwrap();
        assert_eq!(fb.re, rep.density[0]);
        assert_eq!(fb.im, 0.0);
    }

    #[test]
    fn periodic_resonance() {
        let s = CutProjectScheme::periodic(1);
        let fb = fourier_bohr(&s, &Window::Product(Vec::new()), &CharacterRd { chi: vec![Scalar::one()] }, 50).unwrap();
        // 101 points over a window of length 100
        assert!((fb.re - 1.01).abs() < 1e-9 && fb.im.abs() < 1e-9);
    }

    #[test]
    fn empty_window_density() {
        let s = CutProjectScheme::fibonacci();
        let rep = empirical_density(&s, &Window::empty(), &[10, 20]).unwrap();
        assert!(rep.density.iter().all(|&x| x == 0.0));
        let reg = empirical_density(&s, &fibonacci_window(), &[10]).unwrap();
        assert_eq!(reg.lower, reg.upper);
    }

    #[test]
    fn comparison_witnesses() {
        let s = CutProjectScheme::fibonacci();
        let b = DirectBox::interval(Scalar::int(0), Scalar::int(10));
        let p = s.project_points(&b, &fibonacci_window()).unwrap();
        assert!(verify_equality(&p, &p).unwrap().holds);
        let mut q = p.clone();
        q.points[2] = vec![&q.points[2][0] + &Scalar::ratio(1, 1000)];
        let c = verify_equality(&p, &q).unwrap();
        assert!(!c.holds);
        let w = c.witness.unwrap();
        assert!(w == p.points[2] || w == q.points[2]);
        let other = s.project_points(&DirectBox::interval(Scalar::int(0), Scalar::int(5)), &fibonacci_window()).unwrap();
        assert!(verify_equality(&p, &other).is_err());
        let wi = Window::interval(Interval::open(Scalar::int(-1), &Scalar::tau() - &Scalar::one()));
        let inner = s.project_points(&b, &wi).unwrap();
        assert!(verify_inclusion(&inner, &p).unwrap().holds);
    }

    #[test]
    fn periodic_repetitivity() {
        let s = CutProjectScheme::periodic(1);
        let src = |b: &DirectBox| s.project_points(b, &Window::Product(Vec::new()));
        let k = DirectBox::interval(Scalar::zero(), Scalar::int(2));
        let rep = repetitivity_check(src, &k, &Scalar::int(2), &DirectBox::interval(Scalar::int(-10), Scalar::int(10))).unwrap();
        assert!(rep.passed);
    }
}
