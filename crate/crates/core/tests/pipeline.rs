use cutproject::hull::{hull_classification_check, shifted_projection, AlmostModelSetWitness, GammaRule, ShiftParameter};
use cutproject::scheme::fibonacci_window;
use cutproject::{CutProjectScheme, DirectBox, HPoint, Interval, Patch, Scalar, Window};

fn witness(s: &CutProjectScheme) -> AlmostModelSetWitness {
    let top = &Scalar::tau() - &Scalar::one();
    let u = Window::interval(Interval::open(Scalar::int(-1), top.clone()));
    let w = Window::interval(Interval::closed(Scalar::int(-1), top));
    AlmostModelSetWitness::new(s, u.clone(), w, GammaRule::Projection { window: u }, DirectBox::parse("[-60,60]").unwrap())
        .unwrap()
}

#[test]
fn classification_rebuilds_window_in_translated_scheme() {
    let s = CutProjectScheme::fibonacci();
    let wit = witness(&s);
    let k = DirectBox::parse("[-20,20]").unwrap();
    for (a, t) in [
        (Scalar::sqrt_int(2), Scalar::zero()),
        (Scalar::tau().checked_div(&Scalar::int(3)).unwrap(), Scalar::ratio(1, 7)),
        (Scalar::tau(), Scalar::ratio(-2, 5)),
    ] {
        let x = ShiftParameter { s: vec![a], t: HPoint::real(t) };
        let rep = hull_classification_check(&s, &wit, &x, &k, None).unwrap();
        assert!(rep.passed, "{rep:?}");
        assert_eq!(rep.rebuilt_equal, Some(true));
    }
}

#[test]
fn corrupted_configuration_is_rejected() {
    let s = CutProjectScheme::fibonacci();
    let wit = witness(&s);
    let k = DirectBox::parse("[-20,20]").unwrap();
    let x = ShiftParameter { s: vec![Scalar::sqrt_int(2)], t: HPoint::real(Scalar::zero()) };
    let good = shifted_projection(&s, &fibonacci_window(), &x, &k).unwrap();

    let mut extra = good.points.clone();
    extra.push(vec![Scalar::ratio(1, 3)]);
    let bad = Patch::new("corrupt", k.clone(), extra, None).unwrap();
    let rep = hull_classification_check(&s, &wit, &x, &k, Some(&bad)).unwrap();
    assert!(!rep.passed && !rep.upper_ok);
    assert_eq!(rep.witness, Some(vec![Scalar::ratio(1, 3)]));

    let lower = shifted_projection(&s, &wit.open, &x, &k).unwrap();
    let missing = lower.points[lower.points.len() / 2].clone();
    let fewer = good.points.iter().filter(|p| **p != missing).cloned().collect();
    let bad = Patch::new("corrupt", k.clone(), fewer, None).unwrap();
    let rep = hull_classification_check(&s, &wit, &x, &k, Some(&bad)).unwrap();
    assert!(!rep.passed && !rep.lower_ok);
    assert_eq!(rep.witness, Some(missing));
}
