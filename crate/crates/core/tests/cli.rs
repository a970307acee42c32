use std::path::Path;
use std::process::{Command, Output};

use cutproject::hull::{AlmostModelSetWitness, GammaRule};
use cutproject::scheme::fibonacci_window;
use cutproject::{CutProjectScheme, Descriptor, DirectBox, Factor, Interval, Scalar, Window};
use serde_json::Value;

fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cutproject")).args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn generate_matches_library() {
    let o = cli(&["generate", "--scheme", "fibonacci", "--window", "(-1, tau-1]", "--box", "[-20,20]"]);
    assert_eq!(code(&o), 0);
    let s = CutProjectScheme::fibonacci();
    let patch = s.project_points(&DirectBox::parse("[-20,20]").unwrap(), &fibonacci_window()).unwrap();
    assert_eq!(stdout(&o), patch.to_csv().unwrap());

    let o = cli(&["generate", "--scheme", "fibonacci", "--window", "fibonacci", "--box", "[-20,20]", "--format", "json"]);
    assert_eq!(code(&o), 0);
    let back: cutproject::Patch = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(back.points, patch.points);
}

#[test]
fn outputs_are_deterministic() {
    let args = ["generate", "--scheme", "fibonacci", "--window", "fibonacci", "--box", "[-50,50]", "--mode", "float"];
    assert_eq!(cli(&args).stdout, cli(&args).stdout);
    let args = ["transform", "translate", "--scheme", "fibonacci", "--shift", "sqrt(2)"];
    assert_eq!(cli(&args).stdout, cli(&args).stdout);
}

#[test]
fn empty_window_is_not_an_error() {
    let o = cli(&["generate", "--scheme", "fibonacci", "--window", "(0,0)", "--box", "[-5,5]"]);
    assert_eq!(code(&o), 0);
    assert_eq!(stdout(&o).lines().count(), 1);
}

#[test]
fn input_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{ not json").unwrap();
    assert_eq!(code(&cli(&["generate", "--scheme", p(&bad), "--window", "fibonacci", "--box", "[0,1]"])), 2);
    assert_eq!(code(&cli(&["generate", "--scheme", "fibonacci", "--window", "fibonacci", "--box", "[1,0"])), 2);
    assert_eq!(code(&cli(&["no-such-command"])), 2);
    assert_eq!(code(&cli(&["--help"])), 0);
}

#[test]
fn translate_then_verify_theorem() {
    let dir = tempfile::tempdir().unwrap();
    let (out, cert) = (dir.path().join("t.json"), dir.path().join("c.json"));
    let o = cli(&[
        "transform", "translate", "--scheme", "fibonacci", "--shift", "sqrt(2)", "--window", "fibonacci",
        "--window", "[0, 1/2]", "--out", p(&out), "--certificate", p(&cert),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let t: CutProjectScheme = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(t.rank(), 3);
    let h = Descriptor::new(vec![Factor::Real { dim: 1 }, Factor::IntegerRank { rank: 1 }]).unwrap();
    assert_eq!(t.internal(), &h);
    let c: Value = serde_json::from_str(&std::fs::read_to_string(&cert).unwrap()).unwrap();
    assert_eq!(c["checks"].as_array().unwrap().len(), 2 * 5);
    let o = cli(&["verify", "theorem", "--certificate", p(&cert), "--scheme", "fibonacci", "--target", p(&out)]);
    assert_eq!(code(&o), 0);
    assert_eq!(json(&o)["passed"], Value::Bool(true));

    // re-verifying against the wrong target fails
    let o = cli(&["verify", "theorem", "--certificate", p(&cert), "--scheme", "fibonacci", "--target", "fibonacci"]);
    assert_ne!(code(&o), 0);
}

#[test]
fn commensurate_translate_uses_twisted_factor() {
    let o = cli(&["transform", "translate", "--scheme", "fibonacci", "--shift", "tau/3"]);
    assert_eq!(code(&o), 0);
    let t: CutProjectScheme = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(t.rank(), 2);
    assert!(matches!(t.internal().factors[0], Factor::Twisted { m: 3, .. }));
}

#[test]
fn extend_rejects_dependent_constant() {
    let o = cli(&["transform", "extend", "--scheme", "fibonacci", "--constants", "sqrt(2)", "--radius", "5"]);
    assert_eq!(code(&o), 4);
    assert!(String::from_utf8_lossy(&o.stderr).contains("witness"));

    let o = cli(&["transform", "extend", "--scheme", "fibonacci", "--constants", "2^(1/3)", "--radius", "10"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let e: CutProjectScheme = serde_json::from_slice(&o.stdout).unwrap();
    assert!(matches!(e.internal().factors.last(), Some(Factor::Torus { dim: 1, .. })));
}

#[test]
fn augment_with_witness_file() {
    let dir = tempfile::tempdir().unwrap();
    let s = CutProjectScheme::fibonacci();
    let u = Window::interval(Interval::open(Scalar::int(-1), &Scalar::tau() - &Scalar::one()));
    let w = Window::interval(Interval::closed(Scalar::int(-1), &Scalar::tau() - &Scalar::one()));
    let bx = DirectBox::parse("[-30,30]").unwrap();
    let wit = AlmostModelSetWitness::new(&s, u.clone(), w, GammaRule::Projection { window: u }, bx).unwrap();
    let path = dir.path().join("w.json");
    std::fs::write(&path, serde_json::to_string(&wit).unwrap()).unwrap();
    let cert = dir.path().join("c.json");
    let o = cli(&["transform", "augment", "--scheme", "fibonacci", "--witness", p(&path), "--certificate", p(&cert)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let c: Value = serde_json::from_str(&std::fs::read_to_string(&cert).unwrap()).unwrap();
    assert_eq!(c["kind"], "window_augmentation");
    assert!(c["checks"].as_array().unwrap().iter().all(|k| k["equal"] == Value::Bool(true)));
}

#[test]
fn density_and_fourier_bohr() {
    let o = cli(&["verify", "density", "--scheme", "fibonacci", "--window", "fibonacci", "--n", "100,1000"]);
    assert_eq!(code(&o), 0);
    let v = json(&o);
    assert!(v["error"].as_f64().unwrap() < 1e-3);
    assert_eq!(v["report"]["counts"][1], 1447);

    let o = cli(&["verify", "fb", "--scheme", "fibonacci", "--window", "fibonacci", "--chi", "0", "--n", "500"]);
    assert_eq!(code(&o), 0);
    let v = json(&o);
    assert_eq!(v["re"], v["density"]);

    let o = cli(&[
        "verify", "fb", "--scheme", "fibonacci", "--window", "fibonacci", "--chi", "0", "--n", "500", "--expect", "0.2",
    ]);
    assert_eq!(code(&o), 1);
}

#[test]
fn oracle_and_preset() {
    let o = cli(&["oracle", "--box", "[-30,30]"]);
    assert_eq!(code(&o), 0);
    let g = cli(&["generate", "--scheme", "fibonacci", "--window", "fibonacci", "--box", "[-30,30]"]);
    let xs = |s: String| s.lines().skip(1).map(|l| l.split(',').nth(1).unwrap().to_string()).collect::<Vec<_>>();
    assert_eq!(xs(stdout(&o)), xs(stdout(&g)));

    let o = cli(&["preset", "periodic", "--dim", "2"]);
    assert_eq!(code(&o), 0);
    let s: CutProjectScheme = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(s, CutProjectScheme::periodic(2));
}

#[test]
fn hull_commands() {
    let wit = concat!(env!("CARGO_MANIFEST_DIR"), "/../../data/fibonacci-witness.json");
    let base = ["verify", "hull", "--scheme", "fibonacci", "--witness", wit];
    for extra in [
        &["--box", "[-10,10]", "--target", "1/7"][..],
        &["--box", "[-20,20]", "--shift", "sqrt(2);0"],
        &["--box", "[-10,10]", "--generic"],
    ] {
        let o = cli(&[&base[..], extra].concat());
        assert_eq!(code(&o), 0, "{extra:?}: {}", String::from_utf8_lossy(&o.stderr));
        assert_eq!(json(&o)["passed"], Value::Bool(true));
    }
    let o = cli(&[&base[..], &["--box", "[-10,10]", "--target", "1/7", "--tol", "1e-12"]].concat());
    assert_eq!(code(&o), 3);
}
