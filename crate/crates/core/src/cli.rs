//! Command-line front end. `run` parses arguments, executes one command and
//! returns the process exit code:
//!
//! | code | meaning |
//! |------|---------|
//! | 0 | success, all checks passed |
//! | 1 | a verification check failed |
//! | 2 | invalid input |
//! | 3 | resource limit (enumeration bound, substitution coverage, search exhausted) |
//! | 4 | certification failed |

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use crate::analysis::{self, CharacterRd, Verdict};
use crate::error::{Error, Result};
use crate::hull::{self, AlmostModelSetWitness, ShiftParameter};
use crate::relation::Real;
use crate::scalar::Scalar;
use crate::scheme::{fibonacci_window, CutProjectScheme, DirectBox, Patch};
use crate::space::HPoint;
use crate::substitution::SubstitutionSystem;
use crate::transforms::{self, ExtendOptions, TransformCertificate};
use crate::window::Window;

#[derive(Parser, Debug)]
#[command(name = "cutproject", version, about = "Exact cut-and-project schemes and model-set checks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Write a preset scheme file (fibonacci, square, periodic).
    Preset {
        name: String,
        /// Dimension of the periodic preset.
        #[arg(long, default_value_t = 1)]
        dim: usize,
        #[command(flatten)]
        io: Output,
    },
    /// Enumerate the model-set patch Λ_W ∩ B.
    Generate {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        io: Output,
    },
    /// Fibonacci substitution fixed point on a box.
    Oracle {
        #[arg(long = "box")]
        bbox: String,
        /// Squared-substitution steps; smallest covering count by default.
        #[arg(long)]
        iterations: Option<usize>,
        #[arg(long, value_enum, default_value_t = Mode::Exact)]
        mode: Mode,
        #[command(flatten)]
        io: Output,
    },
    /// Build a new scheme with a certificate.
    #[command(subcommand)]
    Transform(Transform),
    /// Run a verification suite and write a JSON report.
    #[command(subcommand)]
    Verify(Verify),
}

#[derive(Subcommand, Debug)]
pub enum Transform {
    /// Translation scheme of a shift `a`.
    Translate {
        #[arg(long)]
        scheme: String,
        /// Shift vector, comma separated.
        #[arg(long)]
        shift: String,
        /// Windows to check, repeatable.
        #[arg(long)]
        window: Vec<String>,
        #[arg(long, default_value_t = 1_000_000)]
        bound: u64,
        #[arg(long)]
        certificate: Option<PathBuf>,
        #[command(flatten)]
        io: Output,
    },
    /// Torus extension with injective star map.
    Extend {
        #[arg(long)]
        scheme: String,
        /// Diagonal constants, comma separated (e.g. `2^(1/3)`).
        #[arg(long)]
        constants: String,
        #[arg(long)]
        window: Vec<String>,
        #[arg(long, default_value_t = 1_000_000)]
        bound: u64,
        /// Injectivity radius.
        #[arg(long)]
        radius: Option<i64>,
        #[arg(long)]
        certificate: Option<PathBuf>,
        #[command(flatten)]
        io: Output,
    },
    /// Window `U ∪ Γ★` for an almost model set witness.
    Augment {
        #[arg(long)]
        scheme: String,
        #[arg(long)]
        witness: PathBuf,
        /// Truncation box; the witness's own truncation by default.
        #[arg(long = "box")]
        bbox: Option<String>,
        #[arg(long)]
        certificate: Option<PathBuf>,
        #[command(flatten)]
        io: Output,
    },
}

#[derive(Subcommand, Debug)]
pub enum Verify {
    /// Empirical density along A_n against dens(𝓛)·m_H(W).
    Density {
        #[arg(long)]
        scheme: String,
        #[arg(long)]
        window: String,
        /// Comma separated n values.
        #[arg(long, default_value = "50,100,150,200,250,300,350,400,450,500,550,600,650,700,750,800,850,900,950,1000")]
        n: String,
        #[arg(long, default_value_t = 1e-3)]
        tol: f64,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
        #[command(flatten)]
        io: Output,
    },
    /// One Fourier–Bohr coefficient a_χ along A_n.
    Fb {
        #[arg(long)]
        scheme: String,
        #[arg(long)]
        window: String,
        /// Character frequency, comma separated.
        #[arg(long)]
        chi: String,
        #[arg(long, default_value_t = 2000)]
        n: u64,
        /// Expected |a_χ|; the density for χ = 0 and 0 otherwise by default.
        #[arg(long)]
        expect: Option<f64>,
        #[arg(long, default_value_t = analysis::FB_TOLERANCE)]
        tol: f64,
        #[command(flatten)]
        io: Output,
    },
    /// Equidistribution of ψ(Λ_U) on the torus factor of an extended scheme.
    Equidist {
        #[arg(long)]
        scheme: String,
        #[arg(long)]
        window: String,
        #[arg(long, default_value_t = 2000)]
        n: u64,
        /// Largest |χ| over D°.
        #[arg(long, default_value_t = 3.0)]
        bound: f64,
        #[arg(long, default_value_t = analysis::FB_TOLERANCE)]
        tol: f64,
        #[command(flatten)]
        io: Output,
    },
    /// Limit patches of translates of an almost model set.
    Hull {
        #[arg(long)]
        scheme: String,
        #[arg(long)]
        witness: PathBuf,
        #[arg(long = "box")]
        bbox: String,
        /// Internal target t (real internal spaces).
        #[arg(long, conflicts_with = "shift")]
        target: Option<String>,
        /// Shift `s;t` for the classification check.
        #[arg(long)]
        shift: Option<String>,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        /// Search a generic shift t (seeded) and check Λ_{t+U} ∩ K = Λ_{t+W} ∩ K.
        #[arg(long, conflicts_with_all = ["target", "shift"])]
        generic: bool,
        /// Coordinate bound for the generic-shift avoidance check.
        #[arg(long, default_value_t = 500)]
        bound: i64,
        #[command(flatten)]
        io: Output,
    },
    /// Repetitivity of a model-set patch.
    Repetitivity {
        #[arg(long)]
        scheme: String,
        #[arg(long)]
        window: String,
        /// Pattern box K.
        #[arg(long)]
        pattern: String,
        #[arg(long)]
        radius: String,
        /// Probe box.
        #[arg(long = "box")]
        bbox: String,
        #[command(flatten)]
        io: Output,
    },
    /// Re-verify a transform certificate.
    Theorem {
        #[arg(long)]
        certificate: PathBuf,
        /// Input scheme of the certificate.
        #[arg(long)]
        scheme: String,
        /// Output scheme of the certificate.
        #[arg(long)]
        target: String,
        #[command(flatten)]
        io: Output,
    },
}

#[derive(Args, Debug)]
pub struct Common {
    #[arg(long)]
    pub scheme: String,
    /// Window: a JSON file or interval notation such as `(-1, tau-1]`.
    #[arg(long)]
    pub window: Option<String>,
    #[arg(long = "box")]
    pub bbox: String,
    #[arg(long, value_enum, default_value_t = Mode::Exact)]
    pub mode: Mode,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Args, Debug)]
pub struct Output {
    /// Output file; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Seed for sampling.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Exact,
    Float,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::WitnessViolated(_) => 1,
        Error::EnumerationOverflow { .. } | Error::NotCovered { .. } | Error::Exhausted(_) => 3,
        Error::CertificationFailed { .. } | Error::CommensurabilityUnknown { .. } | Error::NotInjective { .. } => 4,
        _ => 2,
    }
}

/// Caps rayon's global pool by `CUTPROJECT_THREADS`.
pub fn configure_threads() {
    if let Some(n) = std::env::var("CUTPROJECT_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        // the global pool can only be built once per process
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
}

pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    configure_threads();
    match execute(cli.command) {
        Ok(true) => 0,
        Ok(false) => 1,
        Err(e) => {
            eprintln!("error: {e}");
            if let Error::CertificationFailed { witness: Some(w), .. } = &e {
                eprintln!("witness: {w}");
            }
            exit_code(&e)
        }
    }
}

pub fn load_scheme(spec: &str) -> Result<CutProjectScheme> {
    let path = Path::new(spec);
    if path.exists() {
        return Ok(serde_json::from_str(&fs::read_to_string(path)?)?);
    }
    match spec {
        "fibonacci" => Ok(CutProjectScheme::fibonacci()),
        "square" => Ok(CutProjectScheme::square_lattice()),
        _ => match spec.strip_prefix("periodic:").map(str::parse::<usize>) {
            Some(Ok(d)) if d > 0 => Ok(CutProjectScheme::periodic(d)),
            _ => Err(Error::Parse(format!("no scheme file or preset `{spec}`"))),
        },
    }
}

pub fn load_window(spec: &str) -> Result<Window> {
    let path = Path::new(spec);
    if path.exists() {
        return Ok(serde_json::from_str(&fs::read_to_string(path)?)?);
    }
    if spec == "fibonacci" {
        return Ok(fibonacci_window());
    }
    Window::parse_real(spec)
}

fn load_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

fn parse_vector(s: &str) -> Result<Vec<Scalar>> {
    split_top(s).iter().map(|x| Scalar::parse(x)).collect()
}

/// Splits on commas outside brackets.
fn split_top(s: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut depth = 0i32;
    let mut cur = String::new();
    for c in s.chars() {
        match c {
            '(' | '[' | '{' => depth += 1,
            ')' | ']' | '}' => depth -= 1,
            ',' if depth == 0 => {
                out.push(cur.trim().to_string());
                cur.clear();
                continue;
            }
            _ => {}
        }
        cur.push(c);
    }
    if !cur.trim().is_empty() {
        out.push(cur.trim().to_string());
    }
    out
}

fn parse_point(scheme: &CutProjectScheme, s: &str) -> Result<HPoint> {
    let t = s.trim();
    if t.starts_with('[') || t.starts_with('{') {
        let p: HPoint = serde_json::from_str(t)?;
        scheme.internal().check(&p)?;
        return Ok(p);
    }
    if scheme.internal().linear_dim() == 1 && scheme.internal().factors.len() == 1 {
        return Ok(HPoint::real(Scalar::parse(t)?));
    }
    Err(Error::Parse("internal points other than real ones must be given as JSON".into()))
}

fn emit(out: &Option<PathBuf>, body: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, body)?,
        None => {
            let mut s = std::io::stdout().lock();
            s.write_all(body.as_bytes())?;
        }
    }
    Ok(())
}

fn to_json<T: Serialize>(x: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(x)?;
    s.push('\n');
    Ok(s)
}

fn patch_body(p: &Patch, mode: Mode, format: Format) -> Result<String> {
    match (mode, format) {
        (Mode::Exact, Format::Csv) => p.to_csv(),
        (Mode::Exact, Format::Json) => to_json(p),
        (Mode::Float, Format::Json) => to_json(&json!({ "scheme": p.scheme, "box": p.bbox, "points": p.approx() })),
        (Mode::Float, Format::Csv) => {
            let mut w = csv::Writer::from_writer(Vec::new());
            let io = |e: csv::Error| Error::Io(std::io::Error::other(e));
            w.write_record((1..=p.bbox.dim()).map(|i| format!("x{i}"))).map_err(io)?;
            for x in p.approx() {
                w.write_record(x.iter().map(|v| format!("{}", v + 0.0))).map_err(io)?;
            }
            String::from_utf8(w.into_inner().map_err(|e| Error::Io(e.into_error()))?)
                .map_err(|e| Error::Parse(e.to_string()))
        }
    }
}

fn write_certificate(path: &Option<PathBuf>, out: &Option<PathBuf>, cert: &TransformCertificate) -> Result<()> {
    let target = path.clone().or_else(|| out.as_ref().map(|o| o.with_extension("cert.json")));
    let body = to_json(cert)?;
    match target {
        Some(p) => fs::write(p, body)?,
        None => eprint!("{body}"),
    }
    Ok(())
}

fn execute(cmd: Command) -> Result<bool> {
    match cmd {
        Command::Preset { name, dim, io } => {
            let s = match name.as_str() {
                "fibonacci" => CutProjectScheme::fibonacci(),
                "square" => CutProjectScheme::square_lattice(),
                "periodic" => CutProjectScheme::periodic(dim),
                _ => return Err(Error::Parse(format!("unknown preset `{name}`"))),
            };
            emit(&io.out, &to_json(&s)?)?;
            Ok(true)
        }
        Command::Generate { common, io } => {
            let scheme = load_scheme(&common.scheme)?;
            let w = match &common.window {
                Some(w) => load_window(w)?,
                None => return Err(Error::Parse("--window is required".into())),
            };
            let b = DirectBox::parse(&common.bbox)?;
            let p = scheme.project_points(&b, &w)?;
            emit(&io.out, &patch_body(&p, common.mode, common.format)?)?;
            Ok(true)
        }
        Command::Oracle { bbox, iterations, mode, io } => {
            let b = DirectBox::parse(&bbox)?;
            let s = SubstitutionSystem::fibonacci();
            let k = match iterations {
                Some(k) => k,
                None => s.iterations_for(&b)?,
            };
            let p = s.fixed_point_patch(k, &b)?;
            emit(&io.out, &patch_body(&p, mode, Format::Csv)?)?;
            Ok(true)
        }
        Command::Transform(t) => transform(t),
        Command::Verify(v) => verify(v),
    }
}

fn transform(t: Transform) -> Result<bool> {
    match t {
        Transform::Translate { scheme, shift, window, bound, certificate, io } => {
            let s = load_scheme(&scheme)?;
            let a = parse_vector(&shift)?;
            let ws = window.iter().map(|w| load_window(w)).collect::<Result<Vec<_>>>()?;
            let tr = transforms::translate_cps(&s, &a, bound, &ws)?;
            emit(&io.out, &to_json(&tr.scheme)?)?;
            write_certificate(&certificate, &io.out, &tr.certificate)?;
            Ok(tr.certificate.passed())
        }
        Transform::Extend { scheme, constants, window, bound, radius, certificate, io } => {
            let s = load_scheme(&scheme)?;
            let cs = split_top(&constants).iter().map(|c| Real::parse(c)).collect::<Result<Vec<_>>>()?;
            let mut opts = ExtendOptions::new(s.d());
            opts.relation_bound = bound;
            opts.injectivity_radius = radius;
            opts.windows = window.iter().map(|w| load_window(w)).collect::<Result<Vec<_>>>()?;
            let e = transforms::extend_injective(&s, &cs, &opts)?;
            emit(&io.out, &to_json(&e.scheme)?)?;
            write_certificate(&certificate, &io.out, &e.certificate)?;
            Ok(e.certificate.passed())
        }
        Transform::Augment { scheme, witness, bbox, certificate, io } => {
            let s = load_scheme(&scheme)?;
            let wit: AlmostModelSetWitness = load_json(&witness)?;
            let b = match bbox {
                Some(b) => DirectBox::parse(&b)?,
                None => wit.truncation.clone(),
            };
            let a = transforms::augment(&s, &wit, &b)?;
            emit(&io.out, &to_json(&a.window)?)?;
            write_certificate(&certificate, &io.out, &a.certificate)?;
            Ok(a.certificate.passed() && a.chain.iter().all(|&x| x))
        }
    }
}

fn verify(v: Verify) -> Result<bool> {
    match v {
        Verify::Density { scheme, window, n, tol, format, io } => {
            let s = load_scheme(&scheme)?;
            let w = load_window(&window)?;
            let ns = n
                .split(',')
                .map(|x| x.trim().parse::<u64>().map_err(|e| Error::Parse(format!("n `{x}`: {e}"))))
                .collect::<Result<Vec<_>>>()?;
            let rep = analysis::empirical_density(&s, &w, &ns)?;
            // distance of the last density from [lower, upper]
            let last = rep.density.last().copied().unwrap_or(0.0);
            let err = (rep.lower.to_f64() - last).max(last - rep.upper.to_f64()).max(0.0);
            let passed = rep.sandwich_holds() && err < tol;
            let body = match format {
                Format::Csv => rep.to_csv()?,
                Format::Json => to_json(&json!({ "report": rep, "error": err, "tol": tol, "passed": passed }))?,
            };
            emit(&io.out, &body)?;
            Ok(passed)
        }
        Verify::Fb { scheme, window, chi, n, expect, tol, io } => {
            let s = load_scheme(&scheme)?;
            let w = load_window(&window)?;
            let chi = CharacterRd { chi: parse_vector(&chi)? };
            if chi.chi.len() != s.d() {
                return Err(Error::BoxMismatch("character dimension differs from the scheme".into()));
            }
            let a = analysis::fourier_bohr(&s, &w, &chi, n)?;
            let density = analysis::fourier_bohr(&s, &w, &CharacterRd::zero(s.d()), n)?.re;
            let expected = expect.unwrap_or(if chi.chi.iter().all(Scalar::is_zero) { density } else { 0.0 });
            let passed = (a.abs() - expected).abs() < tol;
            let body = json!({ "n": n, "chi": chi.chi, "re": a.re, "im": a.im, "abs": a.abs(), "density": density, "expected": expected, "tol": tol, "passed": passed });
            emit(&io.out, &to_json(&body)?)?;
            Ok(passed)
        }
        Verify::Equidist { scheme, window, n, bound, tol, io } => {
            let s = load_scheme(&scheme)?;
            let w = load_window(&window)?;
            let rep = analysis::equidistribution_check(&s, &w, bound, n)?;
            let passed = rep.verdict != Verdict::Inconclusive && rep.max_fb < tol && rep.cells_hit == rep.cells;
            emit(&io.out, &to_json(&json!({ "report": rep, "tol": tol, "passed": passed }))?)?;
            Ok(passed)
        }
        Verify::Hull { scheme, witness, bbox, target, shift, tol, generic, bound, io } => {
            let s = load_scheme(&scheme)?;
            let wit: AlmostModelSetWitness = load_json(&witness)?;
            let k = DirectBox::parse(&bbox)?;
            if generic {
                let h = s.internal();
                let g = hull::generic_shift(&s, &wit.open, &wit.compact, bound, 64, io.seed)?;
                let lower = s.project_points(&k, &wit.open.translate(h, &g.t)?)?;
                let upper = s.project_points(&k, &wit.compact.translate(h, &g.t)?)?;
                let c = analysis::verify_equality(&lower, &upper)?;
                let body = json!({ "shift": g, "lower": lower.len(), "upper": upper.len(), "witness": c.witness, "passed": c.holds });
                emit(&io.out, &to_json(&body)?)?;
                Ok(c.holds)
            } else if let Some(shift) = shift {
                let (sv, tv) = shift
                    .split_once(';')
                    .ok_or_else(|| Error::Parse("shift must read `s;t`".into()))?;
                let x = ShiftParameter { s: parse_vector(sv)?, t: parse_point(&s, tv)? };
                let rep = hull::hull_classification_check(&s, &wit, &x, &k, None)?;
                emit(&io.out, &to_json(&rep)?)?;
                Ok(rep.passed)
            } else {
                let t = match target {
                    Some(t) => parse_point(&s, &t)?,
                    None => s.internal().zero(),
                };
                let rep = hull::limit_patch_check(&s, &wit, &t, &k, tol)?;
                emit(&io.out, &to_json(&rep)?)?;
                Ok(rep.passed)
            }
        }
        Verify::Repetitivity { scheme, window, pattern, radius, bbox, io } => {
            let s = load_scheme(&scheme)?;
            let w = load_window(&window)?;
            let k = DirectBox::parse(&pattern)?;
            let r = Scalar::parse(&radius)?;
            let probe = DirectBox::parse(&bbox)?;
            let rep = analysis::repetitivity_check(|b: &DirectBox| s.project_points(b, &w), &k, &r, &probe)?;
            emit(&io.out, &to_json(&rep)?)?;
            Ok(rep.passed)
        }
        Verify::Theorem { certificate, scheme, target, io } => {
            let cert: TransformCertificate = load_json(&certificate)?;
            let input = load_scheme(&scheme)?;
            let output = load_scheme(&target)?;
            let checks = cert.reverify(&input, &output)?;
            let passed = checks.iter().all(|c| c.equal) && cert.passed();
            emit(&io.out, &to_json(&json!({ "kind": cert.kind, "checks": checks, "passed": passed }))?)?;
            Ok(passed)
        }
    }
}
