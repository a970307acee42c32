use std::sync::OnceLock;

use proptest::prelude::*;

use cutproject::analysis::{
    annihilator, character_pairing, empirical_density, fourier_bohr, verify_equality, verify_inclusion, CharacterRd,
};
use cutproject::hull::{shifted_projection, AlmostModelSetWitness, GammaRule, ShiftParameter};
use cutproject::relation::Real;
use cutproject::scheme::fibonacci_window;
use cutproject::substitution::SubstitutionSystem;
use cutproject::transforms::{
    augment, check_extension, check_translation, extend_injective, translate_cps, ExtendOptions, Extension,
    Translation,
};
use cutproject::{
    Coord, CutProjectScheme, Descriptor, DirectBox, Factor, Generator, HPoint, Interval, IntervalSet, Patch, Scalar,
    Window,
};

fn surd() -> impl Strategy<Value = Scalar> {
    (-30i64..=30, -30i64..=30, 1i64..=6).prop_map(|(p, q, d)| {
        let x = &Scalar::int(p) + &(&Scalar::int(q) * &Scalar::sqrt_int(5));
        x.checked_div(&Scalar::int(d)).unwrap()
    })
}

fn small_surd() -> impl Strategy<Value = Scalar> {
    surd().prop_map(|x| x.checked_div(&Scalar::int(12)).unwrap())
}

fn interval() -> impl Strategy<Value = Interval> {
    (small_surd(), 1i64..=30, any::<bool>(), any::<bool>()).prop_map(|(lo, len, a, b)| {
        let hi = &lo + &Scalar::ratio(len, 10);
        Interval::new(lo, hi, a, b)
    })
}

fn real_window() -> impl Strategy<Value = Window> {
    prop::collection::vec(
        prop_oneof![3 => interval(), 1 => small_surd().prop_map(Interval::point)],
        1..=3,
    )
    .prop_map(|v| Window::interval_set(IntervalSet::new(v)))
}

fn r1() -> Descriptor {
    Descriptor::real(1)
}

fn span(lo: i64, hi: i64) -> DirectBox {
    DirectBox::interval(Scalar::int(lo), Scalar::int(hi))
}

fn twisted(m: u64, b: Scalar) -> Descriptor {
    Descriptor::new(vec![Factor::Twisted { base: r1(), m, b_star: HPoint::real(b) }]).unwrap()
}

fn tw(h: Scalar, r: u64) -> HPoint {
    HPoint(vec![Coord::Twisted { base: HPoint::real(h), r }])
}

fn twisted_case() -> impl Strategy<Value = (u64, Scalar, [(Scalar, u64); 3])> {
    prop_oneof![Just(1u64), Just(2), Just(3), Just(5)].prop_flat_map(|m| {
        (Just(m), surd(), [(surd(), 0..m), (surd(), 0..m), (surd(), 0..m)])
    })
}

/// `(1, 1)` and `(x, x′)` for an irrational `x ∈ ℚ(√5)`.
fn quadratic_scheme() -> impl Strategy<Value = CutProjectScheme> {
    (-3i64..=3, prop_oneof![Just(-2i64), Just(-1), Just(1), Just(2)], 1i64..=3).prop_map(|(p, q, d)| {
        let x = (&Scalar::int(p) + &(&Scalar::int(q) * &Scalar::sqrt_int(5))).checked_div(&Scalar::int(d)).unwrap();
        let xc = (&Scalar::int(p) - &(&Scalar::int(q) * &Scalar::sqrt_int(5))).checked_div(&Scalar::int(d)).unwrap();
        CutProjectScheme::new(
            1,
            r1(),
            vec![
                Generator { g: vec![Scalar::one()], h: HPoint::real(Scalar::one()) },
                Generator { g: vec![x], h: HPoint::real(xc) },
            ],
        )
        .unwrap()
    })
}

fn real_of(p: &HPoint) -> Scalar {
    p.as_real().cloned().unwrap()
}

fn incommensurate() -> &'static Translation {
    static T: OnceLock<Translation> = OnceLock::new();
    T.get_or_init(|| translate_cps(&CutProjectScheme::fibonacci(), &[Scalar::sqrt_int(2)], 1_000_000, &[]).unwrap())
}

fn commensurate() -> &'static Translation {
    static T: OnceLock<Translation> = OnceLock::new();
    T.get_or_init(|| {
        let a = Scalar::tau().checked_div(&Scalar::int(3)).unwrap();
        translate_cps(&CutProjectScheme::fibonacci(), &[a], 1_000_000, &[]).unwrap()
    })
}

fn extension() -> &'static Extension {
    static E: OnceLock<Extension> = OnceLock::new();
    E.get_or_init(|| {
        let mut opts = ExtendOptions::new(1);
        opts.injectivity_radius = Some(20);
        extend_injective(&CutProjectScheme::fibonacci(), &[Real::Root { base: 2, degree: 3 }], &opts).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn twisted_group_axioms((m, b, [x, y, z]) in twisted_case()) {
        let h = twisted(m, b.clone());
        let (px, py, pz) = (tw(x.0.clone(), x.1), tw(y.0.clone(), y.1), tw(z.0.clone(), z.1));
        let xy = h.add(&px, &py).unwrap();
        prop_assert_eq!(h.add(&xy, &pz).unwrap(), h.add(&px, &h.add(&py, &pz).unwrap()).unwrap());
        prop_assert_eq!(&xy, &h.add(&py, &px).unwrap());
        prop_assert_eq!(h.add(&px, &h.zero()).unwrap(), px.clone());
        prop_assert_eq!(h.add(&px, &h.negate(&px).unwrap()).unwrap(), h.zero());
        let n = x.1 + y.1;
        prop_assert_eq!(xy, tw(&(&x.0 + &y.0) + &b.mul_int((n / m) as i64), n % m));
    }
}

proptest! {
    #[test]
    fn base_embeds_homomorphically(m in 2u64..=5, b in surd(), x in surd(), y in surd()) {
        let h = twisted(m, b);
        let s = h.add(&tw(x.clone(), 0), &tw(y.clone(), 0)).unwrap();
        prop_assert_eq!(s, tw(&x + &y, 0));
        prop_assert_eq!(tw(x.clone(), 0) == tw(y.clone(), 0), x == y);
    }

    #[test]
    fn reduction_is_idempotent((m, b, [x, _, _]) in twisted_case(), k in -7i64..=7) {
        let h = twisted(m, b);
        let p = h.scale(k, &tw(x.0, x.1)).unwrap();
        let once = h.reduce(&p).unwrap();
        prop_assert_eq!(h.reduce(&once).unwrap(), once.clone());
        prop_assert_eq!(h.canonical(once.clone()).unwrap(), once);
    }

    #[test]
    fn measure_is_translation_invariant(w in real_window(), t in surd()) {
        let h = r1();
        let moved = w.translate(&h, &HPoint::real(t)).unwrap();
        prop_assert_eq!(moved.measure(&h).unwrap(), w.measure(&h).unwrap());
        prop_assert_eq!(moved.boundary_measure(&h).unwrap(), w.boundary_measure(&h).unwrap());
        prop_assert_eq!(moved.check_properties(&h).unwrap(), w.check_properties(&h).unwrap());
    }

    #[test]
    fn interior_measure_closure_order(w in real_window()) {
        let h = r1();
        let (a, b, c) = (
            w.interior(&h).unwrap().measure(&h).unwrap(),
            w.measure(&h).unwrap(),
            w.closure(&h).unwrap().measure(&h).unwrap(),
        );
        prop_assert!(a.cmp_to(&b).is_le() && b.cmp_to(&c).is_le());
        prop_assert!(w.interior(&h).unwrap().is_subset(&w, &h).unwrap());
        prop_assert!(w.is_subset(&w.closure(&h).unwrap(), &h).unwrap());
    }

    #[test]
    fn enumeration_matches_brute_force(s in quadratic_scheme(), w in real_window(), lo in -12i64..=0, len in 1i64..=12) {
        let b = span(lo, lo + len);
        let got = s.project_points(&b, &w).unwrap();
        // n = M⁻¹ (x, h) with |x|, |h| bounded by the box and the window hull
        let m: Vec<Vec<f64>> = vec![
            s.generators().iter().map(|g| g.g[0].to_f64()).collect(),
            s.generators().iter().map(|g| real_of(&g.h).to_f64()).collect(),
        ];
        let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
        let inv_norm = (m[0][0].abs() + m[0][1].abs() + m[1][0].abs() + m[1][1].abs()) / det.abs();
        let reach = (lo.abs().max((lo + len).abs()) as f64).max(4.0);
        let n_max = (inv_norm * reach).ceil() as i64 + 2;
        let mut brute: Vec<Vec<Scalar>> = Vec::new();
        for a in -n_max..=n_max {
            for c in -n_max..=n_max {
                let n = [a, c];
                let x = s.point(&n);
                if b.contains(&x) && w.contains(&s.star(&n)) {
                    brute.push(x);
                }
            }
        }
        let brute = Patch::new("brute", b.clone(), brute, None).unwrap();
        prop_assert_eq!(got.points, brute.points);
    }

    #[test]
    fn enumeration_is_monotone(w in real_window(), extra in interval()) {
        let s = CutProjectScheme::fibonacci();
        let b = span(-15, 15);
        let mut pieces: Vec<Interval> = match &w {
            Window::Product(r) => match r.as_slice() {
                [cutproject::Region::Real(v)] => v[0].intervals().to_vec(),
                _ => unreachable!(),
            },
            _ => unreachable!(),
        };
        pieces.push(extra);
        let bigger = Window::interval_set(IntervalSet::new(pieces));
        let small = s.project_points(&b, &w).unwrap();
        let large = s.project_points(&b, &bigger).unwrap();
        prop_assert!(verify_inclusion(&small, &large).unwrap().holds);
    }

    #[test]
    fn lattice_translation_covariance(w in real_window(), n0 in [-6i64..=6, -6i64..=6]) {
        let s = CutProjectScheme::fibonacci();
        let h = r1();
        let b = span(-10, 10);
        let g = s.point(&n0);
        let lhs = s.project_points(&b.translate(&g), &w.translate(&h, &s.star(&n0)).unwrap()).unwrap();
        let rhs = s.project_points(&b, &w).unwrap().translate(&g);
        prop_assert_eq!(lhs.points, rhs.points);
    }

    #[test]
    fn density_sandwich(w in real_window()) {
        let s = CutProjectScheme::fibonacci();
        let r = empirical_density(&s, &w, &[50, 100, 200]).unwrap();
        prop_assert!(r.sandwich_holds(), "{:?}", r);
    }

    #[test]
    fn fb_at_zero_is_density(w in real_window(), n in 20u64..=300) {
        let s = CutProjectScheme::fibonacci();
        let a = fourier_bohr(&s, &w, &CharacterRd::zero(1), n).unwrap();
        let r = empirical_density(&s, &w, &[n]).unwrap();
        prop_assert_eq!(a.re, r.density[0]);
        prop_assert_eq!(a.im, 0.0);
    }

    #[test]
    fn annihilator_congruences(s in quadratic_scheme()) {
        for chi in annihilator(&s).unwrap() {
            for i in 0..s.rank() {
                let v = character_pairing(&s, &chi, i);
                prop_assert!(v.is_rational() && v.to_rational().unwrap().is_integer(), "pairing {}", v);
            }
        }
    }

    #[test]
    fn comparison_orders(keep in prop::collection::vec(any::<bool>(), 40), keep2 in prop::collection::vec(any::<bool>(), 40)) {
        let s = CutProjectScheme::fibonacci();
        let b = span(-15, 15);
        let full = s.project_points(&b, &fibonacci_window()).unwrap();
        let sub = |mask: &[bool]| {
            let pts = full.points.iter().zip(mask.iter().cycle()).filter(|(_, k)| **k).map(|(p, _)| p.clone()).collect();
            Patch::new("sub", b.clone(), pts, None).unwrap()
        };
        let (a, c) = (sub(&keep), sub(&keep2));
        let both: Vec<bool> = keep.iter().zip(&keep2).map(|(x, y)| *x && *y).collect();
        let ac = sub(&both);
        prop_assert!(verify_equality(&a, &a).unwrap().holds);
        prop_assert_eq!(verify_equality(&a, &c).unwrap().holds, verify_equality(&c, &a).unwrap().holds);
        prop_assert!(verify_inclusion(&ac, &a).unwrap().holds && verify_inclusion(&a, &full).unwrap().holds);
        prop_assert!(verify_inclusion(&ac, &full).unwrap().holds);
        let anti = verify_inclusion(&a, &c).unwrap().holds && verify_inclusion(&c, &a).unwrap().holds;
        prop_assert_eq!(anti, verify_equality(&a, &c).unwrap().holds);
    }

    #[test]
    fn shifted_projection_is_lattice_invariant(w in real_window(), s0 in small_surd(), t0 in small_surd(), n in [-5i64..=5, -5i64..=5]) {
        let s = CutProjectScheme::fibonacci();
        let h = r1();
        let b = span(-10, 10);
        let x = ShiftParameter { s: vec![s0.clone()], t: HPoint::real(t0.clone()) };
        let g = s.point(&n);
        let y = ShiftParameter { s: vec![&s0 + &g[0]], t: h.add(&x.t, &s.star(&n)).unwrap() };
        prop_assert_eq!(shifted_projection(&s, &w, &x, &b).unwrap().points, shifted_projection(&s, &w, &y, &b).unwrap().points);
        let lower = shifted_projection(&s, &w.interior(&h).unwrap(), &x, &b).unwrap();
        let upper = shifted_projection(&s, &w.closure(&h).unwrap(), &x, &b).unwrap();
        prop_assert!(verify_inclusion(&lower, &upper).unwrap().holds);
    }

    #[test]
    fn translation_identity(w in real_window(), n in -5i64..=5, twisted in any::<bool>()) {
        let s = CutProjectScheme::fibonacci();
        let t = if twisted { commensurate() } else { incommensurate() };
        let c = check_translation(&s, &t.scheme, &t.a, &w, n, &span(-12, 12)).unwrap();
        prop_assert!(c.equal, "{:?}", c.witness);
    }

    #[test]
    fn extension_preserves_patches(w in real_window()) {
        let s = CutProjectScheme::fibonacci();
        let c = check_extension(&s, &extension().scheme, &w, &span(-12, 12)).unwrap();
        prop_assert!(c.equal, "{:?}", c.witness);
    }

    #[test]
    fn augmentation_chain(na in [-3i64..=3, -3i64..=3], len in [0i64..=3, 1i64..=3], pick in prop::collection::vec(any::<bool>(), 8)) {
        let s = CutProjectScheme::fibonacci();
        let h = r1();
        let a = real_of(&s.star(&na));
        let nb = [na[0] + len[0], na[1] + len[1]];
        let b = real_of(&s.star(&nb));
        prop_assume!(a.cmp_to(&b).is_lt());
        let u = Window::interval(Interval::open(a.clone(), b.clone()));
        let w = Window::interval(Interval::closed(a, b));
        let bx = span(-25, 25);
        let lower = s.project_points(&bx, &u).unwrap();
        let upper = s.project_points(&bx, &w).unwrap();
        let coords = upper.coords.clone().unwrap();
        let add: Vec<Vec<i64>> = upper.points.iter().zip(&coords)
            .filter(|(p, _)| !lower.contains(p))
            .zip(pick.iter().cycle())
            .filter(|(_, k)| **k)
            .map(|((_, n), _)| n.clone())
            .collect();
        let rule = GammaRule::Modified { window: u.clone(), add, remove: vec![] };
        let wit = AlmostModelSetWitness::new(&s, u, w, rule, bx.clone()).unwrap();
        let aug = augment(&s, &wit, &bx).unwrap();
        prop_assert_eq!(aug.chain, [true; 4]);
        prop_assert!(aug.certificate.passed());
        prop_assert!(aug.window.measure(&h).is_ok());
    }

    #[test]
    fn substitution_stable_with_tile_gaps(lo in -80i64..=0, len in 0i64..=80) {
        let sub = SubstitutionSystem::fibonacci();
        let b = span(lo, lo + len);
        let k = sub.iterations_for(&b).unwrap();
        let p = sub.fixed_point_patch(k, &b).unwrap();
        let q = sub.fixed_point_patch(k + 1, &b).unwrap();
        prop_assert_eq!(&p.points, &q.points);
        for w in p.points.windows(2) {
            let g = &w[1][0] - &w[0][0];
            prop_assert!(g == Scalar::one() || g == Scalar::tau());
        }
    }

    #[test]
    fn json_round_trips(w in real_window(), x in surd()) {
        let back: Window = serde_json::from_str(&serde_json::to_string(&w).unwrap()).unwrap();
        prop_assert_eq!(back, w);
        let y: Scalar = serde_json::from_str(&serde_json::to_string(&x).unwrap()).unwrap();
        prop_assert_eq!(y, x);
    }
}
