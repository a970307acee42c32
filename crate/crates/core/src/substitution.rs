//! One-dimensional substitution tilings as an independent source of point
//! sets, and recovery of an interval window from such a point set.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::scheme::{CutProjectScheme, DirectBox, Patch};
use crate::window::{Interval, Window};

/// Seed word `left|right`; the origin sits between the two halves.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Seed {
    pub left: String,
    pub right: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubstitutionSystem {
    pub alphabet: Vec<char>,
    pub rules: BTreeMap<char, String>,
    /// Tile lengths, supplied exactly.
    pub lengths: BTreeMap<char, Scalar>,
    pub seed: Seed,
}

impl SubstitutionSystem {
    pub fn new(
        alphabet: Vec<char>,
        rules: BTreeMap<char, String>,
        lengths: BTreeMap<char, Scalar>,
        seed: Seed,
    ) -> Result<SubstitutionSystem> {
        let s = SubstitutionSystem { alphabet, rules, lengths, seed };
        s.validate()?;
        Ok(s)
    }

    /// `a ↦ ab, b ↦ a` with tile lengths `τ` and `1`, seed `a|a`.
    pub fn fibonacci() -> SubstitutionSystem {
        SubstitutionSystem::new(
            vec!['a', 'b'],
            [('a', "ab".to_string()), ('b', "a".to_string())].into(),
            [('a', Scalar::tau()), ('b', Scalar::one())].into(),
            Seed { left: "a".into(), right: "a".into() },
        )
        .expect("Fibonacci substitution is valid")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidScheme(m));
        if self.alphabet.is_empty() {
            return bad("empty alphabet".into());
        }
        for c in &self.alphabet {
            match self.rules.get(c) {
                None => return bad(format!("no rule for letter {c}")),
                Some(w) if w.is_empty() => return bad(format!("rule for {c} is empty")),
                Some(w) => {
                    if let Some(x) = w.chars().find(|x| !self.alphabet.contains(x)) {
                        return bad(format!("rule for {c} uses unknown letter {x}"));
                    }
                }
            }
            match self.lengths.get(c) {
                Some(l) if l.signum() == Ordering::Greater => {}
                _ => return bad(format!("tile length of {c} must be positive")),
            }
        }
        if self.seed.left.is_empty() || self.seed.right.is_empty() {
            return bad("seed halves must be nonempty".into());
        }
        if let Some(x) = self.seed.left.chars().chain(self.seed.right.chars()).find(|x| !self.alphabet.contains(x)) {
            return bad(format!("seed uses unknown letter {x}"));
        }
        if !self.is_primitive() {
            return bad("substitution is not primitive".into());
        }
        let left = self.apply(&self.apply(&self.seed.left));
        let right = self.apply(&self.apply(&self.seed.right));
        if !left.ends_with(&self.seed.left) || !right.starts_with(&self.seed.right) {
            return bad("seed is not a fixed-point seed of the squared substitution".into());
        }
        Ok(())
    }

    /// `M[i][j]` = occurrences of letter `i` in the image of letter `j`.
    pub fn incidence(&self) -> Vec<Vec<u64>> {
        let k = self.alphabet.len();
        let mut m = vec![vec![0u64; k]; k];
        for (j, c) in self.alphabet.iter().enumerate() {
            for x in self.rules[c].chars() {
                let i = self.alphabet.iter().position(|a| *a == x).expect("validated letter");
                m[i][j] += 1;
            }
        }
        m
    }

    /// Some power `M^p`, `p ≤ k² - 2k + 2`, is strictly positive.
    pub fn is_primitive(&self) -> bool {
        let m: Vec<Vec<bool>> = self.incidence().iter().map(|r| r.iter().map(|&x| x > 0).collect()).collect();
        let k = m.len();
        let mut p = m.clone();
        for _ in 0..(k * k).saturating_sub(2 * k) + 2 {
            if p.iter().flatten().all(|&x| x) {
                return true;
            }
            p = (0..k).map(|i| (0..k).map(|j| (0..k).any(|l| p[i][l] && m[l][j])).collect()).collect();
        }
        false
    }

    pub fn apply(&self, w: &str) -> String {
        w.chars().map(|c| self.rules[&c].as_str()).collect()
    }

    fn length_of(&self, w: &str) -> Scalar {
        let mut counts: BTreeMap<char, i64> = BTreeMap::new();
        for c in w.chars() {
            *counts.entry(c).or_default() += 1;
        }
        counts.iter().fold(Scalar::zero(), |acc, (c, n)| &acc + &self.lengths[c].mul_int(*n))
    }

    /// Word halves after `iterations` squared-substitution steps.
    pub fn word(&self, iterations: usize) -> (String, String) {
        let (mut l, mut r) = (self.seed.left.clone(), self.seed.right.clone());
        for _ in 0..iterations {
            l = self.apply(&self.apply(&l));
            r = self.apply(&self.apply(&r));
        }
        (l, r)
    }

    fn endpoints(&self, iterations: usize, b: &DirectBox) -> Result<Vec<Scalar>> {
        if b.dim() != 1 {
            return Err(Error::BoxMismatch("substitution tilings are one-dimensional".into()));
        }
        let (lo, hi) = (&b.lo[0], &b.hi[0]);
        let (l, r) = self.word(iterations);
        // right endpoints up to hi need one tile reaching past hi
        let covered = self.length_of(&r).cmp_to(hi) == Ordering::Greater
            && (-&self.length_of(&l)).cmp_to(lo) != Ordering::Greater;
        if !covered {
            return Err(Error::NotCovered { iterations });
        }
        let mut out = Vec::new();
        let mut x = Scalar::zero();
        for c in r.chars() {
            if x.cmp_to(hi) == Ordering::Greater {
                break;
            }
            if x.cmp_to(lo) != Ordering::Less {
                out.push(x.clone());
            }
            x = &x + &self.lengths[&c];
        }
        let mut x = Scalar::zero();
        for c in l.chars().rev() {
            x = &x - &self.lengths[&c];
            if x.cmp_to(lo) == Ordering::Less {
                break;
            }
            if x.cmp_to(hi) != Ordering::Greater {
                out.push(x.clone());
            }
        }
        Ok(out)
    }

    /// Left tile endpoints of the fixed point inside `b`, after checking that
    /// one more squared step leaves them unchanged.
    pub fn fixed_point_patch(&self, iterations: usize, b: &DirectBox) -> Result<Patch> {
        let pts = self.endpoints(iterations, b)?;
        let next = self.endpoints(iterations + 1, b)?;
        let patch = Patch::new("substitution", b.clone(), pts.into_iter().map(|x| vec![x]).collect(), None)?;
        let check = Patch::new("substitution", b.clone(), next.into_iter().map(|x| vec![x]).collect(), None)?;
        if patch.points != check.points {
            return Err(Error::CertificationFailed {
                reason: format!("fixed point not stable at {iterations} iterations"),
                witness: None,
            });
        }
        Ok(patch)
    }

    /// Smallest number of squared steps covering `b`.
    pub fn iterations_for(&self, b: &DirectBox) -> Result<usize> {
        for k in 0..64 {
            match self.endpoints(k, b) {
                Ok(_) => return Ok(k),
                Err(Error::NotCovered { .. }) => {}
                Err(e) => return Err(e),
            }
        }
        Err(Error::NotCovered { iterations: 64 })
    }
}

/// An interval window reproducing a point set, with endpoints given as
/// lattice stars `star(lo)`, `star(hi)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindowFit {
    pub window: Window,
    pub lo: Vec<i64>,
    pub hi: Vec<i64>,
}

/// All intervals with endpoints in `{star(n) : |n_i| ≤ height}` whose
/// projection set on the patch box equals `patch`, in a fixed order
/// (endpoint coordinates, then closedness).
pub fn fit_interval_window(scheme: &CutProjectScheme, patch: &Patch, height: i64) -> Result<Vec<WindowFit>> {
    let h = scheme.internal();
    if scheme.d() != 1 || h.linear_dim() != 1 || h.factors.len() != 1 {
        return Err(Error::Unsupported("window fitting needs G = H = R".into()));
    }
    let r = scheme.rank();
    let mut cands: Vec<(Vec<i64>, Scalar)> = Vec::new();
    let mut n = vec![-height; r];
    loop {
        let s = scheme.star(&n).as_real().cloned().expect("real internal space");
        if !cands.iter().any(|(_, t)| t.cmp_to(&s) == Ordering::Equal) {
            cands.push((n.clone(), s));
        }
        let mut p = 0;
        while p < r {
            n[p] += 1;
            if n[p] <= height {
                break;
            }
            n[p] = -height;
            p += 1;
        }
        if p == r {
            break;
        }
    }
    // stars of lattice points in the box, growing the search window until
    // every patch point is found
    let reach = cands.iter().map(|(_, s)| s.abs()).fold(Scalar::one(), |a, b| a.max_of(&b).clone());
    let mut radius = &reach + &Scalar::one();
    let (inside, outside) = loop {
        let w = Window::interval(Interval::closed(-&radius, radius.clone()));
        let all = scheme.project_points(&patch.bbox, &w)?;
        let coords = all.coords.clone().unwrap_or_default();
        let mut inside = Vec::new();
        let mut outside = Vec::new();
        for (p, c) in all.points.iter().zip(&coords) {
            let s = scheme.star(c).as_real().cloned().expect("real internal space");
            if patch.contains(p) {
                inside.push(s);
            } else {
                outside.push(s);
            }
        }
        if inside.len() == patch.len() {
            break (inside, outside);
        }
        if radius.to_f64() > 1e6 {
            return Err(Error::Exhausted("patch points are not lattice points of the scheme".into()));
        }
        radius = radius.mul_int(2);
    };
    let smin = inside.iter().min_by(|a, b| a.cmp_to(b)).cloned();
    let smax = inside.iter().max_by(|a, b| a.cmp_to(b)).cloned();
    let (Some(smin), Some(smax)) = (smin, smax) else {
        return Err(Error::Unsupported("cannot fit a window to an empty patch".into()));
    };
    let mut fits = Vec::new();
    for (nlo, lo) in &cands {
        for lo_closed in [true, false] {
            let ok_lo = match lo.cmp_to(&smin) {
                Ordering::Less => true,
                Ordering::Equal => lo_closed,
                Ordering::Greater => false,
            };
            if !ok_lo {
                continue;
            }
            for (nhi, hi) in &cands {
                for hi_closed in [true, false] {
                    let ok_hi = match hi.cmp_to(&smax) {
                        Ordering::Greater => true,
                        Ordering::Equal => hi_closed,
                        Ordering::Less => false,
                    };
                    if !ok_hi {
                        continue;
                    }
                    let iv = Interval::new(lo.clone(), hi.clone(), lo_closed, hi_closed);
                    if outside.iter().any(|s| iv.contains(s)) {
                        continue;
                    }
                    fits.push(WindowFit { window: Window::interval(iv), lo: nlo.clone(), hi: nhi.clone() });
                }
            }
        }
    }
    for f in &fits {
        let got = scheme.project_points(&patch.bbox, &f.window)?;
        if got.points != patch.points {
            return Err(Error::CertificationFailed {
                reason: "fitted window does not reproduce the patch".into(),
                witness: Some(f.window.to_string()),
            });
        }
    }
    Ok(fits)
}

/// The fit whose endpoint coordinates have the smallest sup-norm.
pub fn simplest_fit(fits: &[WindowFit]) -> Option<&WindowFit> {
    let height = |f: &WindowFit| f.lo.iter().chain(&f.hi).map(|x| x.abs()).max().unwrap_or(0);
    fits.iter().min_by_key(|f| height(f))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scheme::fibonacci_window;

    fn iv(lo: Scalar, hi: Scalar) -> DirectBox {
        DirectBox::interval(lo, hi)
    }

    #[test]
    fn fibonacci_first_endpoints() {
        let s = SubstitutionSystem::fibonacci();
        let tau2 = &Scalar::tau() + &Scalar::one();
        let p = s.fixed_point_patch(1, &iv(Scalar::zero(), tau2.clone())).unwrap();
        assert_eq!(p.points, vec![vec![Scalar::zero()], vec![Scalar::tau()], vec![tau2]]);
        let p = s.fixed_point_patch(0, &iv(Scalar::zero(), Scalar::zero())).unwrap();
        assert_eq!(p.points, vec![vec![Scalar::zero()]]);
        assert!(matches!(
            s.fixed_point_patch(2, &iv(Scalar::zero(), Scalar::int(1000))),
            Err(Error::NotCovered { iterations: 2 })
        ));
    }

    #[test]
    fn gaps_are_tile_lengths() {
        let s = SubstitutionSystem::fibonacci();
        let b = iv(Scalar::int(-50), Scalar::int(50));
        let p = s.fixed_point_patch(s.iterations_for(&b).unwrap(), &b).unwrap();
        for w in p.points.windows(2) {
            let g = &w[1][0] - &w[0][0];
            assert!(g == Scalar::one() || g == Scalar::tau(), "gap {g}");
        }
    }

    #[test]
    fn validation() {
        let mut s = SubstitutionSystem::fibonacci();
        s.rules.insert('b', "b".into());
        assert!(s.validate().is_err());
        let mut s = SubstitutionSystem::fibonacci();
        s.seed = Seed { left: "a".into(), right: "b".into() };
        assert!(s.validate().is_err());
        assert!(SubstitutionSystem::fibonacci().is_primitive());
    }

    #[test]
    fn recovers_fibonacci_window() {
        let s = SubstitutionSystem::fibonacci();
        let scheme = CutProjectScheme::fibonacci();
        let b = iv(Scalar::int(-40), Scalar::int(40));
        let p = s.fixed_point_patch(s.iterations_for(&b).unwrap(), &b).unwrap();
        let fits = fit_interval_window(&scheme, &p, 2).unwrap();
        assert!(fits.iter().any(|f| f.window == fibonacci_window()), "{fits:?}");
        assert_eq!(simplest_fit(&fits).unwrap().window, fibonacci_window());
    }
}
