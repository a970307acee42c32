//! Acceptance suite: ten end-to-end criteria, one PASS/FAIL line each.
//! Runs under `cargo test --test acceptance`; exits nonzero if any fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use cutproject::analysis::{empirical_density, equidistribution_check, repetitivity_check};
use cutproject::hull::{generic_shift, limit_patch_check, shift_collision, AlmostModelSetWitness, GammaRule};
use cutproject::scheme::fibonacci_window;
use cutproject::substitution::{fit_interval_window, simplest_fit, SubstitutionSystem};
use cutproject::transforms::{
    augment, check_translation, extend_injective, lift_preserves_properties, structural_check, translate_cps,
    ExtendOptions,
};
use cutproject::{Coord, CutProjectScheme, Descriptor, DirectBox, Factor, HPoint, Interval, IntervalSet, Scalar, Window};
use cutproject::relation::Real;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn e<E: std::fmt::Display>(x: E) -> String {
    x.to_string()
}

fn span(lo: i64, hi: i64) -> DirectBox {
    DirectBox::interval(Scalar::int(lo), Scalar::int(hi))
}

fn tau_m1() -> Scalar {
    &Scalar::tau() - &Scalar::one()
}

fn open_w() -> Window {
    Window::interval(Interval::open(Scalar::int(-1), tau_m1()))
}

fn closed_w() -> Window {
    Window::interval(Interval::closed(Scalar::int(-1), tau_m1()))
}

fn c1_oracle_equivalence() -> Outcome {
    let start = Instant::now();
    let sub = SubstitutionSystem::fibonacci();
    let s = CutProjectScheme::fibonacci();
    let b = span(-200, 200);
    let oracle = sub.fixed_point_patch(sub.iterations_for(&b).map_err(e)?, &b).map_err(e)?;
    let fits = fit_interval_window(&s, &oracle, 2).map_err(e)?;
    let fit = simplest_fit(&fits).ok_or("no interval window reproduces the oracle")?;
    ensure(fit.window == fibonacci_window(), || format!("derived window {} differs from the preset", fit.window))?;
    let cps = s.project_points(&b, &fit.window).map_err(e)?;
    let elapsed = start.elapsed();
    ensure(cps.points == oracle.points, || "oracle and projection patches differ".into())?;
    ensure(elapsed < Duration::from_secs(10), || format!("took {elapsed:?}"))?;
    Ok(format!("{} points on [-200,200], window {}, {:.2?}", oracle.len(), fit.window, elapsed))
}

fn c2_translation_incommensurate() -> Outcome {
    let s = CutProjectScheme::fibonacci();
    let w = fibonacci_window();
    let a = vec![Scalar::sqrt_int(2)];
    let t = translate_cps(&s, &a, 1_000_000, &[w.clone()]).map_err(e)?;
    ensure(t.m.is_none(), || "√2 reported commensurate".into())?;
    ensure(t.scheme.internal().factors.last() == Some(&Factor::IntegerRank { rank: 1 }), || {
        format!("internal space is {}", t.scheme.internal())
    })?;
    let b = span(-20, 20);
    let mut sizes = Vec::new();
    for n in -3..=3 {
        let c = check_translation(&s, &t.scheme, &a, &w, n, &b).map_err(e)?;
        ensure(c.equal, || format!("n = {n}: patches differ at {:?}", c.witness))?;
        sizes.push(c.lhs);
    }
    Ok(format!("H' = {}, n = -3..3 equal, patch sizes {sizes:?}", t.scheme.internal()))
}

fn twisted_space(m: u64, b_star: Scalar) -> Descriptor {
    Descriptor::new(vec![Factor::Twisted { base: Descriptor::real(1), m, b_star: HPoint::real(b_star) }]).unwrap()
}

fn tw(h: Scalar, r: u64) -> HPoint {
    HPoint(vec![Coord::Twisted { base: HPoint::real(h), r }])
}

fn random_surd(rng: &mut ChaCha8Rng) -> Scalar {
    let p = Scalar::ratio(rng.gen_range(-50..=50), rng.gen_range(1..=7));
    let q = Scalar::ratio(rng.gen_range(-50..=50), rng.gen_range(1..=7));
    &p + &(&q * &Scalar::sqrt_int(5))
}

/// Group axioms of `(ℝ × ℤ_m, ⊕)` and agreement with `(ℝ × ℤ) / ⟨(b★, -m)⟩`.
fn twisted_axioms(m: u64, cases: usize, seed: u64) -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let b_star = random_surd(&mut rng);
    let h = twisted_space(m, b_star.clone());
    let zero = h.zero();
    for i in 0..cases {
        let pick = |rng: &mut ChaCha8Rng| (random_surd(rng), rng.gen_range(0..m));
        let (x, y, z) = (pick(&mut rng), pick(&mut rng), pick(&mut rng));
        let (px, py, pz) = (tw(x.0.clone(), x.1), tw(y.0.clone(), y.1), tw(z.0.clone(), z.1));
        let xy = h.add(&px, &py).map_err(e)?;
        let lhs = h.add(&xy, &pz).map_err(e)?;
        let rhs = h.add(&px, &h.add(&py, &pz).map_err(e)?).map_err(e)?;
        ensure(lhs == rhs, || format!("case {i}: associativity fails for m = {m}"))?;
        ensure(xy == h.add(&py, &px).map_err(e)?, || format!("case {i}: commutativity fails"))?;
        ensure(h.add(&px, &zero).map_err(e)? == px, || format!("case {i}: identity fails"))?;
        ensure(h.add(&px, &h.negate(&px).map_err(e)?).map_err(e)? == zero, || format!("case {i}: inverse fails"))?;
        // quotient oracle: (x + y, r1 + r2) with r1 + r2 = r + s m becomes (x + y + s b★, r)
        let n = x.1 + y.1;
        let (s, r) = (n / m, n % m);
        let expect = tw(&(&x.0 + &y.0) + &b_star.mul_int(s as i64), r);
        ensure(xy == expect, || format!("case {i}: sum disagrees with the quotient group"))?;
    }
    Ok(())
}

fn c3_translation_commensurate() -> Outcome {
    let s = CutProjectScheme::fibonacci();
    let w = fibonacci_window();
    let a = vec![Scalar::tau().checked_div(&Scalar::int(3)).unwrap()];
    let t = translate_cps(&s, &a, 1_000_000, &[w.clone()]).map_err(e)?;
    ensure(t.m == Some(3), || format!("m = {:?}", t.m))?;
    let b_star = match t.scheme.internal().factors.as_slice() {
        [Factor::Twisted { b_star, .. }] => b_star.clone(),
        _ => return Err(format!("internal space is {}", t.scheme.internal())),
    };
    // b = m a = τ, so b★ = τ′
    ensure(b_star == HPoint::real(Scalar::tau_conj()), || format!("b★ = {b_star}"))?;
    let b = span(-20, 20);
    for n in -3..=3 {
        let c = check_translation(&s, &t.scheme, &a, &w, n, &b).map_err(e)?;
        ensure(c.equal, || format!("n = {n}: patches differ at {:?}", c.witness))?;
    }
    for (k, m) in [1u64, 2, 3, 5].into_iter().enumerate() {
        twisted_axioms(m, 10_000, 100 + k as u64)?;
    }
    Ok("m = 3, b★ = τ′, n = -3..3 equal; 4 × 10^4 group-axiom cases".into())
}

fn random_window(rng: &mut ChaCha8Rng) -> Window {
    let pieces = rng.gen_range(1..=3);
    let mut v = Vec::new();
    for _ in 0..pieces {
        let lo = random_surd(rng).checked_div(&Scalar::int(20)).unwrap();
        if rng.gen_bool(0.2) {
            v.push(Interval::point(lo));
            continue;
        }
        let len = Scalar::ratio(rng.gen_range(1..=40), 10);
        v.push(Interval::new(lo.clone(), &lo + &len, rng.gen_bool(0.5), rng.gen_bool(0.5)));
    }
    Window::interval_set(IntervalSet::new(v))
}

fn c4_structural() -> Outcome {
    let s = CutProjectScheme::fibonacci();
    let shifts = [vec![Scalar::sqrt_int(2)], vec![Scalar::tau().checked_div(&Scalar::int(3)).unwrap()]];
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for a in &shifts {
        let t = translate_cps(&s, a, 1_000_000, &[]).map_err(e)?;
        let r = structural_check(&s, &t, 1000, 41).map_err(e)?;
        ensure(r.generators_ok, || "an old generator is missing from 𝓛′".into())?;
        ensure(r.a_in_lattice, || "(a, b) ∉ 𝓛′".into())?;
        ensure(r.passed && r.lifted == 1000 && r.restricted == 1000, || format!("{:?}", r.failures.first()))?;
        for i in 0..50 {
            let w = random_window(&mut rng);
            let n = rng.gen_range(-3..=3);
            let (p, q) = lift_preserves_properties(&s, &t, &w, n).map_err(e)?;
            ensure(p == q, || format!("window {i} ({w}): flags {p:?} vs lifted {q:?}"))?;
        }
    }
    Ok("both shifts: generators, (a,b), 10^3 + 10^3 samples; 2 × 50 windows keep their flags".into())
}

fn extended_fibonacci(radius: i64) -> Result<cutproject::transforms::Extension, String> {
    let s = CutProjectScheme::fibonacci();
    let mut opts = ExtendOptions::new(1);
    opts.injectivity_radius = Some(radius);
    opts.windows = vec![fibonacci_window(), open_w(), closed_w()];
    extend_injective(&s, &[Real::Root { base: 2, degree: 3 }], &opts).map_err(e)
}

fn c5_injective_extension() -> Outcome {
    let ext = extended_fibonacci(200)?;
    let cert = &ext.certificate;
    let generic = cert.generic.as_ref().ok_or("no genericity certificate")?;
    ensure(generic.passed, || format!("relation search: {:?}", generic.relation))?;
    let inj = cert.injectivity.as_ref().ok_or("no injectivity record")?;
    ensure(inj.radius == 200 && inj.kernel.is_none(), || format!("{inj:?}"))?;
    ensure(cert.checks.iter().all(|c| c.equal), || "a patch differs after extension".into())?;
    let sizes: Vec<usize> = cert.checks.iter().map(|c| c.lhs).collect();
    Ok(format!("D = diag(2^(1/3)) certified, injective on |n_i| ≤ 200, patches equal {sizes:?}"))
}

fn c6_equidistribution() -> Outcome {
    let ext = extended_fibonacci(20)?;
    let r = equidistribution_check(&ext.scheme, &open_w(), 3.0, 2000).map_err(e)?;
    ensure(r.max_fb < 0.05, || format!("max |a_χ| = {:.4} at {:?}", r.max_fb, r.max_fb_at))?;
    ensure(r.cells_hit == r.cells, || format!("{} of {} cells hit", r.cells_hit, r.cells))?;
    Ok(format!(
        "{} points, {} characters, max |a_χ| = {:.4}, {}/{} cells",
        r.points, r.characters, r.max_fb, r.cells_hit, r.cells
    ))
}

fn c7_density() -> Outcome {
    let s = CutProjectScheme::fibonacci();
    let ns: Vec<u64> = (1..=20).map(|k| 50 * k).collect();
    let r = empirical_density(&s, &fibonacci_window(), &ns).map_err(e)?;
    let sqrt5 = 5f64.sqrt();
    let expect = (1.0 + sqrt5) / 2.0 / sqrt5;
    let last = *r.density.last().unwrap();
    ensure((last - expect).abs() < 1e-3, || format!("density {last} vs {expect}"))?;
    ensure(r.sandwich_holds(), || format!("sandwich fails at n = {:?}", r.n.iter().zip(&r.within).find(|x| !x.1)))?;
    Ok(format!("dens(1000) = {last:.6}, τ/√5 = {expect:.6}, |err| = {:.1e}", (last - expect).abs()))
}

fn c8_almost_to_model() -> Outcome {
    let s = CutProjectScheme::fibonacci();
    let b = span(-50, 50);
    let rules = [
        ("Γ = Λ_U", GammaRule::Projection { window: open_w() }),
        ("Γ = Λ_W", GammaRule::Projection { window: closed_w() }),
        // keep the endpoint τ-1 (n = (0,-1)), drop -1
        ("mixed", GammaRule::Modified { window: open_w(), add: vec![vec![0, -1]], remove: vec![] }),
    ];
    let mut out = Vec::new();
    for (name, rule) in rules {
        let wit = AlmostModelSetWitness::new(&s, open_w(), closed_w(), rule, b.clone()).map_err(e)?;
        let aug = augment(&s, &wit, &b).map_err(e)?;
        let lhs = s.project_points(&b, &aug.window).map_err(e)?;
        let gamma = wit.gamma_patch(&s, &b).map_err(e)?;
        ensure(lhs.points == gamma.points, || format!("{name}: Λ_W′ ∩ B ≠ Γ ∩ B"))?;
        ensure(aug.chain == [true; 4], || format!("{name}: inclusion chain {:?}", aug.chain))?;
        out.push(format!("{name} ({} pts)", gamma.len()));
    }
    Ok(out.join(", "))
}

fn c9_hull() -> Outcome {
    let s = CutProjectScheme::fibonacci();
    let k = span(-10, 10);
    let wit = AlmostModelSetWitness::new(
        &s,
        open_w(),
        closed_w(),
        GammaRule::Projection { window: fibonacci_window() },
        span(-60, 60),
    )
    .map_err(e)?;
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for i in 0..10 {
        let t = HPoint::real(Scalar::ratio(rng.gen_range(-1_000_000..1_000_000), 1_000_003));
        let r = limit_patch_check(&s, &wit, &t, &k, 1e-6).map_err(e)?;
        ensure(r.stabilized, || format!("target {i} ({t}) did not stabilize"))?;
        ensure(r.lower_ok && r.upper_ok, || format!("target {i} ({t}): witness {:?}", r.witness))?;
    }
    let g = generic_shift(&s, &open_w(), &closed_w(), 500, 64, 9).map_err(e)?;
    let h = s.internal();
    let lower = s.project_points(&k, &open_w().translate(h, &g.t).map_err(e)?).map_err(e)?;
    let upper = s.project_points(&k, &closed_w().translate(h, &g.t).map_err(e)?).map_err(e)?;
    ensure(lower.points == upper.points, || format!("Λ_(t+U) ≠ Λ_(t+W) for t = {}", g.t))?;
    let boundary = closed_w().difference(&open_w(), h).map_err(e)?;
    ensure(shift_collision(&s, &boundary, &g.t, 1000).map_err(e)?.is_none(), || "collision at doubled bound".into())?;
    Ok(format!("10 targets stable with both inclusions; generic t = {} (attempt {})", g.t, g.attempt))
}

fn c10_repetitivity() -> Outcome {
    let s = CutProjectScheme::fibonacci();
    let w = fibonacci_window();
    let k = span(0, 5);
    let r = Scalar::int(20);
    let probe = span(-100, 100);
    let good = repetitivity_check(|b: &DirectBox| s.project_points(b, &w), &k, &r, &probe).map_err(e)?;
    ensure(good.passed, || format!("uncovered ball at {:?}", good.witness))?;
    let gone = vec![Scalar::tau()];
    let corrupted = |b: &DirectBox| {
        let mut p = s.project_points(b, &w)?;
        p.points.retain(|x| *x != gone);
        p.coords = None;
        Ok(p)
    };
    let bad = repetitivity_check(corrupted, &k, &r, &probe).map_err(e)?;
    ensure(!bad.passed && bad.witness.is_some(), || "corrupted patch passed".into())?;
    Ok(format!(
        "{} returns for a {}-point pattern; corrupted patch fails at {:?}",
        good.returns.len(),
        good.pattern,
        bad.witness.unwrap().iter().map(|x| x.to_string()).collect::<Vec<_>>()
    ))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("1 Fibonacci oracle equivalence", c1_oracle_equivalence),
        ("2 translation, incommensurate", c2_translation_incommensurate),
        ("3 translation, commensurate", c3_translation_commensurate),
        ("4 structural checks", c4_structural),
        ("5 injective extension", c5_injective_extension),
        ("6 equidistribution", c6_equidistribution),
        ("7 density formula", c7_density),
        ("8 almost-to-model round trip", c8_almost_to_model),
        ("9 hull lemma", c9_hull),
        ("10 repetitivity", c10_repetitivity),
    ];
    let mut failed = 0;
    for (name, f) in criteria {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            Err(p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())
        });
        let t = start.elapsed();
        match outcome {
            Ok(detail) => println!("PASS criterion {name} [{t:.2?}]: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL criterion {name} [{t:.2?}]: {why}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", 10 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
