//! Shifted projection sets, almost model set witnesses, limits of translated
//! configurations and generic shifts.
//!
//! Nets are replaced by sequences of lattice points whose stars approach a
//! target from above in every linear coordinate; a limit patch is declared
//! stable once two successive patches agree on the observation box.

use std::cmp::Ordering;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::analysis::{verify_equality, verify_inclusion};
use crate::error::{Error, Result};
use crate::relation::Real;
use crate::scalar::Scalar;
use crate::scheme::{cmp_points, Commensurability, CutProjectScheme, DirectBox, Patch};
use crate::space::{Coord, Descriptor, Factor, HPoint};
use crate::transforms::{almost_to_model, lift_window, translate_cps};
use crate::window::{Interval, IntervalSet, Region, Window};

/// Shift `x = (s, t) ∈ ℝ^d × H`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShiftParameter {
    pub s: Vec<Scalar>,
    pub t: HPoint,
}

impl ShiftParameter {
    pub fn zero(scheme: &CutProjectScheme) -> ShiftParameter {
        ShiftParameter { s: vec![Scalar::zero(); scheme.d()], t: scheme.internal().zero() }
    }
}

/// Membership rule for `Γ`, defined on the whole lattice.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GammaRule {
    /// `Γ = Λ_V`.
    Projection { window: Window },
    /// `Γ = (Λ_V ∖ remove) ∪ add`, listed by lattice coordinates.
    Modified {
        window: Window,
        #[serde(default)]
        add: Vec<Vec<i64>>,
        #[serde(default)]
        remove: Vec<Vec<i64>>,
    },
}

impl GammaRule {
    fn window(&self) -> &Window {
        match self {
            GammaRule::Projection { window } | GammaRule::Modified { window, .. } => window,
        }
    }

    /// `Γ ∩ B` with lattice coordinates.
    pub fn patch(&self, scheme: &CutProjectScheme, b: &DirectBox) -> Result<Patch> {
        let base = scheme.project_points(b, self.window())?;
        let GammaRule::Modified { add, remove, .. } = self else { return Ok(base) };
        let coords = base.coords.clone().unwrap_or_default();
        let mut pts: Vec<(Vec<i64>, Vec<Scalar>)> =
            coords.into_iter().zip(base.points).filter(|(n, _)| !remove.contains(n)).collect();
        for n in add {
            if n.len() != scheme.rank() {
                return Err(Error::InvalidScheme("added point has the wrong number of lattice coordinates".into()));
            }
            let x = scheme.point(n);
            if b.contains(&x) && !pts.iter().any(|(m, _)| m == n) && !remove.contains(n) {
                pts.push((n.clone(), x));
            }
        }
        let (coords, points): (Vec<_>, Vec<_>) = pts.into_iter().unzip();
        Patch::new(scheme.id(), b.clone(), points, Some(coords))
    }

    /// The rule for `Γ` seen from the internal shift `t`: windows become
    /// `-t + V`, listed lattice points are kept.
    pub fn shifted(&self, h: &Descriptor, t: &HPoint) -> Result<GammaRule> {
        let nt = h.negate(t)?;
        Ok(match self {
            GammaRule::Projection { window } => GammaRule::Projection { window: window.translate(h, &nt)? },
            GammaRule::Modified { window, add, remove } => GammaRule::Modified {
                window: window.translate(h, &nt)?,
                add: add.clone(),
                remove: remove.clone(),
            },
        })
    }
}

/// `(U, W, Γ)` with `U` open, `W` closed and `Λ_U ⊆ Γ ⊆ Λ_W` verified on
/// `truncation`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlmostModelSetWitness {
    pub open: Window,
    pub compact: Window,
    pub gamma: GammaRule,
    pub truncation: DirectBox,
}

impl AlmostModelSetWitness {
    pub fn new(
        scheme: &CutProjectScheme,
        open: Window,
        compact: Window,
        gamma: GammaRule,
        truncation: DirectBox,
    ) -> Result<AlmostModelSetWitness> {
        let w = AlmostModelSetWitness { open, compact, gamma, truncation };
        w.verify(scheme, &w.truncation.clone())?;
        Ok(w)
    }

    /// Re-checks the defining inclusions on `b`.
    pub fn verify(&self, scheme: &CutProjectScheme, b: &DirectBox) -> Result<()> {
        let h = scheme.internal();
        if !self.open.is_open(h)? {
            return Err(Error::WitnessViolated("U is not open".into()));
        }
        if !self.compact.is_closed(h)? {
            return Err(Error::WitnessViolated("W is not closed".into()));
        }
        let lower = scheme.project_points(b, &self.open)?;
        let gamma = self.gamma.patch(scheme, b)?;
        let upper = scheme.project_points(b, &self.compact)?;
        let c = verify_inclusion(&lower, &gamma)?;
        if let Some(x) = c.witness {
            return Err(Error::WitnessViolated(format!("point {} of Λ_U is missing from Γ", fmt_point(&x))));
        }
        let c = verify_inclusion(&gamma, &upper)?;
        if let Some(x) = c.witness {
            return Err(Error::WitnessViolated(format!("point {} of Γ lies outside Λ_W", fmt_point(&x))));
        }
        Ok(())
    }

    pub fn gamma_patch(&self, scheme: &CutProjectScheme, b: &DirectBox) -> Result<Patch> {
        self.gamma.patch(scheme, b)
    }
}

pub(crate) fn fmt_point(x: &[Scalar]) -> String {
    let v: Vec<String> = x.iter().map(|s| s.to_string()).collect();
    format!("({})", v.join(", "))
}

/// `Λ_W(x) ∩ B = s + Λ_{-t+W} ∩ (B - s)`.
pub fn shifted_projection(scheme: &CutProjectScheme, w: &Window, x: &ShiftParameter, b: &DirectBox) -> Result<Patch> {
    let h = scheme.internal();
    let ws = w.translate(h, &h.negate(&x.t)?)?;
    let neg: Vec<Scalar> = x.s.iter().map(|v| -v).collect();
    let p = scheme.project_points(&b.translate(&neg), &ws)?;
    let mut out = p.translate(&x.s);
    out.bbox = b.clone();
    Ok(out)
}

/// Only real, integer and cyclic factors can be approached coordinatewise.
fn approachable(h: &Descriptor) -> Result<()> {
    for f in &h.factors {
        if matches!(f, Factor::Torus { .. } | Factor::Twisted { .. }) {
            return Err(Error::Unsupported("star approach in torus or twisted factors".into()));
        }
    }
    Ok(())
}

/// Window `t + [0, ε)^L` on the real coordinates, `{t}` on discrete ones.
fn upper_cell(h: &Descriptor, t: &HPoint, eps: &Scalar) -> Result<Window> {
    let mut regions = Vec::new();
    for (f, c) in h.factors.iter().zip(&t.0) {
        regions.push(match (f, c) {
            (Factor::Real { .. }, Coord::Real(v)) => Region::Real(
                v.iter().map(|x| IntervalSet::single(Interval::half_open(x.clone(), x + eps))).collect(),
            ),
            (Factor::IntegerRank { .. }, Coord::Integer(v)) => Region::Integer([v.clone()].into()),
            (Factor::FiniteCyclic { .. }, Coord::Cyclic(r)) => Region::Cyclic([*r].into()),
            _ => return Err(Error::DescriptorMismatch("target does not match the internal space".into())),
        });
    }
    Ok(Window::Product(regions))
}

/// Largest half-width of the search box for star approach.
const APPROACH_RADIUS_LIMIT: i64 = 1 << 22;

/// Lattice coordinates whose star lies in `t + [0, ε)^L`, the one with the
/// smallest direct part; `None` once the search radius limit is reached.
fn approach_step(scheme: &CutProjectScheme, t: &HPoint, eps: &Scalar) -> Result<Option<Vec<i64>>> {
    let w = upper_cell(scheme.internal(), t, eps)?;
    let l = scheme.internal().linear_dim().max(1) as i32;
    let guess = (1.0 / (scheme.dens_lattice().to_f64() * eps.to_f64().powi(l))).max(4.0);
    let mut radius = guess.min(APPROACH_RADIUS_LIMIT as f64) as i64;
    loop {
        let b = DirectBox::cube(scheme.d(), &Scalar::int(radius));
        let p = scheme.project_points(&b, &w)?;
        if let Some(coords) = &p.coords {
            let best = p
                .points
                .iter()
                .zip(coords)
                .min_by(|(a, _), (b, _)| {
                    let na = a.iter().map(|x| x.to_f64().abs()).fold(0.0, f64::max);
                    let nb = b.iter().map(|x| x.to_f64().abs()).fold(0.0, f64::max);
                    na.partial_cmp(&nb).unwrap_or(Ordering::Equal).then_with(|| cmp_points(a, b))
                })
                .map(|(_, n)| n.clone());
            if best.is_some() {
                return Ok(best);
            }
        }
        if radius >= APPROACH_RADIUS_LIMIT {
            return Ok(None);
        }
        radius = (radius * 2).min(APPROACH_RADIUS_LIMIT);
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LimitPatchReport {
    pub target: HPoint,
    /// Lattice coordinates `n_k` of the approaching sequence.
    pub sequence: Vec<Vec<i64>>,
    /// Largest linear coordinate of `star(n_k) - t`.
    pub distances: Vec<f64>,
    pub stabilized: bool,
    /// Stable `Γ′ ∩ K`.
    pub patch: Option<Patch>,
    pub lower_ok: bool,
    pub upper_ok: bool,
    pub witness: Option<Vec<Scalar>>,
    /// Points of `Λ_{W+t} ∩ K` outside `Λ_{U+t}`: their stars sit on `t + (W ∖ U)`.
    pub boundary_points: Vec<Vec<Scalar>>,
    pub passed: bool,
}

/// Builds `Γ′ = lim (s_k + Γ) ∩ K` along lattice points `s_k` with
/// `s_k★ → t` and checks `Λ_{U+t} ∩ K ⊆ Γ′ ⊆ Λ_{W+t} ∩ K`.
///
/// The sequence runs until its stars are within `tol` of `t` and two
/// successive patches agree.
pub fn limit_patch_check(
    scheme: &CutProjectScheme,
    witness: &AlmostModelSetWitness,
    target: &HPoint,
    k: &DirectBox,
    tol: f64,
) -> Result<LimitPatchReport> {
    let h = scheme.internal();
    approachable(h)?;
    h.check(target)?;
    let tlin: Vec<f64> = h.linearize(target).iter().map(Scalar::to_f64).collect();
    let mut sequence = Vec::new();
    let mut distances = Vec::new();
    let mut previous: Option<Patch> = None;
    let mut stable: Option<Patch> = None;
    for step in 1..=48u32 {
        let eps = Scalar::ratio(1, 1i64 << step.min(62));
        let Some(n) = approach_step(scheme, target, &eps)? else {
            return Err(Error::Exhausted(format!(
                "no lattice star within {} of the target inside radius {APPROACH_RADIUS_LIMIT}",
                eps.to_f64()
            )));
        };
        let s = scheme.point(&n);
        let dist = scheme
            .star_approx(&n)
            .iter()
            .zip(&tlin)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        let neg: Vec<Scalar> = s.iter().map(|v| -v).collect();
        let mut p = witness.gamma_patch(scheme, &k.translate(&neg))?.translate(&s);
        p.bbox = k.clone();
        sequence.push(n);
        distances.push(dist);
        let agrees = previous.as_ref().is_some_and(|q| q.points == p.points);
        if agrees && eps.to_f64() <= tol {
            stable = Some(p);
            break;
        }
        previous = Some(p);
    }
    let lower = scheme.project_points(k, &witness.open.translate(h, target)?)?;
    let upper = scheme.project_points(k, &witness.compact.translate(h, target)?)?;
    let boundary_points: Vec<Vec<Scalar>> = upper.points.iter().filter(|x| !lower.contains(x)).cloned().collect();
    let (mut lower_ok, mut upper_ok, mut wit) = (false, false, None);
    if let Some(p) = &stable {
        let lo = verify_inclusion(&lower, p)?;
        let up = verify_inclusion(p, &upper)?;
        lower_ok = lo.holds;
        upper_ok = up.holds;
        wit = lo.witness.or(up.witness);
    }
    Ok(LimitPatchReport {
        target: target.clone(),
        sequence,
        distances,
        stabilized: stable.is_some(),
        passed: stable.is_some() && lower_ok && upper_ok,
        patch: stable,
        lower_ok,
        upper_ok,
        witness: wit,
        boundary_points,
    })
}

/// Lattice coordinates `n` with `|n_i| ≤ bound` and `star(n) ∈ t + S`.
pub fn shift_collision(scheme: &CutProjectScheme, s: &Window, t: &HPoint, bound: i64) -> Result<Option<Vec<i64>>> {
    let h = scheme.internal();
    if s.is_empty(h)? {
        return Ok(None);
    }
    let ts = s.translate(h, t)?;
    let reach: Vec<Scalar> = (0..scheme.d())
        .map(|k| {
            let sum: f64 = scheme.generators().iter().map(|g| g.g[k].to_f64().abs()).sum();
            Scalar::int((sum * bound as f64).ceil() as i64 + 1)
        })
        .collect();
    let b = DirectBox::new(reach.iter().map(|r| -r).collect(), reach)?;
    let p = scheme.project_points(&b, &ts)?;
    Ok(p.coords.unwrap_or_default().into_iter().find(|n| n.iter().all(|x| x.abs() <= bound)))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenericShift {
    pub t: HPoint,
    /// 0-based index of the accepted candidate.
    pub attempt: usize,
    pub bound: i64,
    /// Rejected candidates with their colliding lattice coordinates.
    pub rejected: Vec<(HPoint, Vec<i64>)>,
}

/// Irrational ladder tried before random sampling.
fn ladder() -> Vec<Scalar> {
    vec![
        Real::Pi.recip().to_scalar(),
        Real::E.recip().to_scalar(),
        Scalar::sqrt_int(3).checked_div(&Scalar::int(7)).expect("7 is nonzero"),
    ]
}

/// Internal point with every linear coordinate filled from `vals`.
fn fill_point(h: &Descriptor, vals: &mut impl Iterator<Item = Scalar>) -> Result<HPoint> {
    let mut out = Vec::new();
    for f in &h.factors {
        out.push(match f {
            Factor::Real { dim } => Coord::Real((0..*dim).map(|_| vals.next().expect("endless")).collect()),
            Factor::IntegerRank { rank } => Coord::Integer(vec![0; *rank]),
            Factor::FiniteCyclic { .. } => Coord::Cyclic(0),
            _ => return Err(Error::Unsupported("generic shifts in torus or twisted factors".into())),
        });
    }
    Ok(HPoint(out))
}

/// First shift `t` (ladder, then seeded random rationals) with
/// `star(n) ∉ t + (W ∖ U)` for all `|n_i| ≤ bound`.
pub fn generic_shift(
    scheme: &CutProjectScheme,
    u: &Window,
    w: &Window,
    bound: i64,
    attempts: usize,
    seed: u64,
) -> Result<GenericShift> {
    let h = scheme.internal();
    let boundary = w.difference(u, h)?;
    if boundary.is_empty(h)? {
        return Ok(GenericShift { t: h.zero(), attempt: 0, bound, rejected: Vec::new() });
    }
    let l = ladder();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rejected = Vec::new();
    for attempt in 0..attempts {
        let t = if attempt < l.len() {
            let mut it = (0..).map(|i| l[(attempt + i) % l.len()].clone());
            fill_point(h, &mut it)?
        } else {
            let mut it = std::iter::repeat_with(|| Scalar::ratio(rng.gen_range(1..1_000_000), 1_000_003));
            fill_point(h, &mut it)?
        };
        match shift_collision(scheme, &boundary, &t, bound)? {
            None => return Ok(GenericShift { t, attempt, bound, rejected }),
            Some(n) => rejected.push((t, n)),
        }
    }
    Err(Error::Exhausted(format!("no generic shift among {attempts} candidates at bound {bound}")))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassificationReport {
    pub shift: ShiftParameter,
    pub lower_ok: bool,
    pub upper_ok: bool,
    pub witness: Option<Vec<Scalar>>,
    /// Id of the scheme in which the window was rebuilt.
    pub rebuilt_in: Option<String>,
    /// `Λ_{W′} ∩ K = Γ′ ∩ K` for the rebuilt window.
    pub rebuilt_equal: Option<bool>,
    pub passed: bool,
}

/// Checks on `K` that `Γ′ = s + Γ(-t)` (or the supplied configuration) sits
/// between `Λ_U(x)` and `Λ_W(x)`, then rebuilds a window for it in the
/// translation scheme of `s` and confirms `Λ_{W′} ∩ K = Γ′ ∩ K`.
pub fn hull_classification_check(
    scheme: &CutProjectScheme,
    witness: &AlmostModelSetWitness,
    x: &ShiftParameter,
    k: &DirectBox,
    configuration: Option<&Patch>,
) -> Result<ClassificationReport> {
    let h = scheme.internal();
    let gamma_x = match configuration {
        Some(p) => {
            if p.bbox != *k {
                return Err(Error::BoxMismatch("configuration box differs from K".into()));
            }
            p.clone()
        }
        None => {
            let rule = witness.gamma.shifted(h, &x.t)?;
            let neg: Vec<Scalar> = x.s.iter().map(|v| -v).collect();
            let mut p = rule.patch(scheme, &k.translate(&neg))?.translate(&x.s);
            p.bbox = k.clone();
            p
        }
    };
    let lower = shifted_projection(scheme, &witness.open, x, k)?;
    let upper = shifted_projection(scheme, &witness.compact, x, k)?;
    let lo = verify_inclusion(&lower, &gamma_x)?;
    let up = verify_inclusion(&gamma_x, &upper)?;
    let mut report = ClassificationReport {
        shift: x.clone(),
        lower_ok: lo.holds,
        upper_ok: up.holds,
        witness: lo.witness.or(up.witness),
        rebuilt_in: None,
        rebuilt_equal: None,
        passed: false,
    };
    if !(report.lower_ok && report.upper_ok) {
        return Ok(report);
    }

    // the translation scheme of s carries s + Λ_V as Λ′_{lift(V, 1)}
    let nt = h.negate(&x.t)?;
    let (u0, w0) = (witness.open.translate(h, &nt)?, witness.compact.translate(h, &nt)?);
    let translated = if x.s.iter().all(Scalar::is_zero) {
        None
    } else {
        match scheme.is_commensurate(&x.s, 1)? {
            Commensurability::Commensurate { m: 1, .. } => None,
            _ => Some(translate_cps(scheme, &x.s, 1_000_000, &[])?),
        }
    };
    let (target, u1, w1) = match &translated {
        Some(tr) => (&tr.scheme, lift_window(&u0, 1, &tr.scheme)?, lift_window(&w0, 1, &tr.scheme)?),
        None => {
            // s ∈ L: s + Λ_V = Λ_{s★ + V}
            let sh = if x.s.iter().all(Scalar::is_zero) {
                h.zero()
            } else {
                let Commensurability::Commensurate { coords, .. } = scheme.is_commensurate(&x.s, 1)? else {
                    unreachable!("checked above")
                };
                scheme.star(&coords)
            };
            (scheme, u0.translate(h, &sh)?, w0.translate(h, &sh)?)
        }
    };
    let upper_t = target.project_points(k, &w1)?;
    if !verify_equality(&upper_t, &upper)?.holds {
        return Err(Error::CertificationFailed {
            reason: "translation scheme does not reproduce the shifted upper set".into(),
            witness: verify_equality(&upper_t, &upper)?.witness.map(|p| fmt_point(&p)),
        });
    }
    let lower_t = target.project_points(k, &u1)?;
    let coords = upper_t.coords.clone().unwrap_or_default();
    let add: Vec<Vec<i64>> = upper_t
        .points
        .iter()
        .zip(&coords)
        .filter(|(p, _)| gamma_x.contains(p) && !lower_t.contains(p))
        .map(|(_, n)| n.clone())
        .collect();
    let rule = GammaRule::Modified { window: u1.clone(), add, remove: Vec::new() };
    let wit = AlmostModelSetWitness::new(target, u1, w1, rule, k.clone())?;
    let rebuilt = almost_to_model(target, &wit, k)?;
    let p = target.project_points(k, &rebuilt)?;
    let eq = verify_equality(&p, &gamma_x)?;
    report.rebuilt_in = Some(target.id().to_string());
    report.rebuilt_equal = Some(eq.holds);
    if report.witness.is_none() {
        report.witness = eq.witness;
    }
    report.passed = eq.holds;
    Ok(report)
}
