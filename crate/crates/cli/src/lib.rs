//! Command-line surface for `dense-egyptian`.
//!
//! Every command writes one JSON value to stdout. Exit codes:
//!
//! | code | meaning |
//! |------|---------|
//! | 0 | success |
//! | 1 | a certificate did not verify |
//! | 2 | infeasible mass (`x` too small for `r`) |
//! | 3 | unsupported denominator |
//! | 4 | elimination failed |
//! | 5 | odd-expansion precondition failed |
//! | 6 | bound exceeded |
//! | 7 | any other pipeline failure |
//! | 64 | usage error or malformed input |

pub mod document;

use std::ffi::OsString;
use std::io::Write;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use dense_egyptian::breusch::{expand_odd, greedy_expand};
use dense_egyptian::construct::{construct_dense, ConstructionOptions, LambdaMode};
use dense_egyptian::dickman;
use dense_egyptian::modular::EliminationMode;
use dense_egyptian::smooth::{reciprocal_sum, SmoothFamily, SmoothParams};
use dense_egyptian::verify::check_with_eta;
use dense_egyptian::{Error, ExactRational};

pub use document::CertificateDocument;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VERIFY_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 64;
pub const EXIT_OTHER: i32 = 7;

#[derive(Debug, Parser)]
#[command(name = "dense-egyptian", version, about = "Dense Egyptian-fraction representations with certificates")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build a dense representation of r with denominators up to x.
    Construct(ConstructArgs),
    /// Re-check a certificate document.
    Verify {
        file: std::path::PathBuf,
    },
    /// Dickman's function, the density constant, and smooth-number estimates.
    Rho(RhoArgs),
    /// Census of a smooth family.
    SieveStats(SieveArgs),
    /// Standalone greedy or odd expansion of a fraction.
    Expand {
        #[arg(long, value_parser = ["greedy", "odd"])]
        mode: String,
        #[arg(long)]
        r: String,
    },
}

#[derive(Debug, Args)]
struct ConstructArgs {
    #[arg(long)]
    r: String,
    #[arg(long)]
    x: u64,
    #[arg(long, default_value_t = 0.05)]
    eta: f64,
    #[arg(long)]
    k: Option<u32>,
    #[arg(long, default_value_t = 0.1)]
    epsilon: f64,
    #[arg(long)]
    delta: Option<String>,
    /// Elimination mode for both stages (default: strict, then opportunistic).
    #[arg(long, value_parser = ["strict", "opportunistic"])]
    mode: Option<String>,
    #[arg(long, value_parser = ["formula", "adaptive"], default_value = "adaptive")]
    lambda: String,
    #[arg(long)]
    y_prime: Option<u64>,
    #[arg(long)]
    x_prime: Option<u64>,
    #[arg(long)]
    y_doubleprime: Option<u64>,
    #[arg(long)]
    out: Option<std::path::PathBuf>,
    /// Accepted for interface stability; the construction uses no randomness.
    #[arg(long)]
    seedless: bool,
}

#[derive(Debug, Args)]
#[group(id = "what", required = true, multiple = true)]
struct RhoArgs {
    #[arg(long, group = "what")]
    u: Option<f64>,
    #[arg(long = "c-of-r", group = "what")]
    c_of_r: Option<f64>,
    /// With --y: main-term estimates for the family up to x.
    #[arg(long, group = "what", requires = "y")]
    x: Option<f64>,
    #[arg(long)]
    y: Option<f64>,
    #[arg(long, default_value_t = 2)]
    k: u32,
    #[arg(long)]
    lambda: Option<f64>,
}

#[derive(Debug, Args)]
struct SieveArgs {
    #[arg(long)]
    x: u64,
    #[arg(long)]
    y: u64,
    #[arg(long)]
    w: u64,
    #[arg(long, default_value = "0")]
    lambda: String,
    #[arg(long, default_value_t = 2)]
    k: u32,
}

/// A failure with its exit code and JSON body.
struct Failure {
    code: i32,
    body: Value,
}

fn usage(msg: impl Into<String>) -> Failure {
    Failure {
        code: EXIT_USAGE,
        body: json!({"error": {"code": "usage", "message": msg.into()}}),
    }
}

fn parse_rational(flag: &str, s: &str) -> Result<ExactRational, Failure> {
    s.parse()
        .map_err(|e: Error| usage(format!("--{flag}: cannot parse {s:?}: {e}")))
}

/// Exit code, offending parameter and remedy for a pipeline error.
fn classify(e: &Error) -> (i32, Option<&'static str>, Option<&'static str>) {
    match e {
        Error::InfeasibleMass { .. } => (2, Some("x"), Some("increase x or decrease r")),
        Error::UnsupportedDenominator { .. } => (
            3,
            Some("r"),
            Some("use a denominator that is k-free with prime factors at most w, or pass a larger --k"),
        ),
        Error::EliminationFailed { .. } => (
            4,
            Some("mode"),
            Some("retry with --mode opportunistic, a larger x, or a different --y-prime"),
        ),
        Error::BreuschPreconditionFailed { .. } => (5, Some("delta"), Some("increase x or decrease delta")),
        Error::BoundExceeded { .. } => (6, Some("x_prime"), Some("increase x or pass a smaller --x-prime")),
        Error::RemainderNonPositive { .. } => (EXIT_OTHER, Some("delta"), Some("adjust delta or lambda mode")),
        Error::Domain(_) | Error::Parameter(_) => (EXIT_USAGE, None, None),
        _ => (EXIT_OTHER, None, None),
    }
}

fn pipeline_failure(e: Error) -> Failure {
    let (code, param, suggestion) = classify(&e);
    Failure {
        code,
        body: json!({"error": {
            "code": e.code(),
            "message": e.to_string(),
            "failing_parameter": param,
            "suggestion": suggestion,
        }}),
    }
}

fn construct(a: &ConstructArgs, out: &mut dyn Write) -> Result<i32, Failure> {
    let r = parse_rational("r", &a.r)?;
    if !r.is_positive() {
        return Err(usage("--r must be positive"));
    }
    if a.x < 3 {
        return Err(usage("--x must be at least 3"));
    }
    let delta = a.delta.as_deref().map(|d| parse_rational("delta", d)).transpose()?;
    let mut opts = ConstructionOptions {
        k: a.k,
        epsilon: a.epsilon,
        delta,
        lambda_mode: a.lambda.parse::<LambdaMode>().map_err(|e| usage(e.to_string()))?,
        y_prime: a.y_prime,
        x_prime: a.x_prime,
        y_doubleprime: a.y_doubleprime,
        ..ConstructionOptions::default()
    };
    if let Some(m) = &a.mode {
        let mode: EliminationMode = m.parse().map_err(|e: Error| usage(e.to_string()))?;
        opts.stage_one_mode = mode;
        opts.stage_two_mode = mode;
    }
    let rep = construct_dense(&r, a.x, a.eta, &opts).map_err(pipeline_failure)?;
    let doc = CertificateDocument::from_representation(&rep);
    let text = doc.encode();
    match &a.out {
        Some(path) => {
            std::fs::write(path, &text).map_err(|e| usage(format!("cannot write {}: {e}", path.display())))?;
            let summary = json!({
                "out": path.display().to_string(),
                "passed": doc.certificate.passed,
                "size": doc.certificate.size,
                "density_approx": doc.certificate.density_approx,
            });
            writeln!(out, "{summary}").ok();
        }
        None => {
            out.write_all(text.as_bytes()).ok();
        }
    }
    Ok(EXIT_OK)
}

fn verify(path: &std::path::Path, out: &mut dyn Write) -> Result<i32, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| usage(format!("cannot read {}: {e}", path.display())))?;
    let doc = CertificateDocument::decode(&text).map_err(|e| usage(format!("malformed document: {e}")))?;
    let r = parse_rational("r", &doc.r)?;
    let parts = doc.decode_parts().map_err(|e| usage(format!("malformed document: {e}")))?;
    let disjoint = parts.union().is_ok();
    let all: Vec<u64> = parts.lists().iter().flat_map(|l| l.iter().copied()).collect();
    let cert = check_with_eta(&r, &all, doc.x, doc.parameters.eta);
    let fields = document::CertificateFields::from(&cert);
    let ok = cert.passed() && disjoint;
    let report = json!({
        "certificate": fields,
        "parts_disjoint": disjoint,
        "matches_document": fields == doc.certificate,
    });
    writeln!(out, "{report}").ok();
    Ok(if ok { EXIT_OK } else { EXIT_VERIFY_FAILED })
}

fn rho_cmd(a: &RhoArgs, out: &mut dyn Write) -> Result<i32, Failure> {
    let mut obj = serde_json::Map::new();
    if let Some(u) = a.u {
        let v = dickman::rho(u).map_err(|e| usage(e.to_string()))?;
        obj.insert("rho".into(), json!(v));
    }
    if let Some(r) = a.c_of_r {
        let c = dickman::c_of_r(r).map_err(|e| usage(e.to_string()))?;
        obj.insert("c_of_r".into(), json!(c));
        obj.insert("upper_bound".into(), json!(dickman::density_upper_bound(r)));
    }
    if let (Some(x), Some(y)) = (a.x, a.y) {
        if a.k < 2 {
            return Err(usage("--k must be at least 2"));
        }
        let psi = dickman::psi_estimate(x, y, a.k).map_err(|e| usage(e.to_string()))?;
        let psi0 = dickman::psi0_estimate(x, y, a.k).map_err(|e| usage(e.to_string()))?;
        obj.insert("psi_estimate".into(), json!(psi));
        obj.insert("psi0_estimate".into(), json!(psi0));
        if let Some(l) = a.lambda {
            let s = dickman::recip_sum_estimate(x, y, a.k, l).map_err(|e| usage(e.to_string()))?;
            obj.insert("recip_sum_estimate".into(), json!(s));
        }
    }
    writeln!(out, "{}", Value::Object(obj)).ok();
    Ok(EXIT_OK)
}

fn sieve_stats(a: &SieveArgs, out: &mut dyn Write) -> Result<i32, Failure> {
    let lambda = parse_rational("lambda", &a.lambda)?;
    let params = SmoothParams::new(a.x, a.y, a.w, &lambda, a.k).map_err(|e| usage(e.to_string()))?;
    let cutoff = params.cutoff;
    let family = SmoothFamily::build(params).map_err(pipeline_failure)?;
    let recip = reciprocal_sum(family.members(), &family.modulus()).map_err(pipeline_failure)?;
    let estimate = if a.x >= 3 && a.y >= 2 {
        dickman::psi_estimate(a.x as f64, a.y as f64, a.k).ok()
    } else {
        None
    };
    let count = family.len();
    let report = json!({
        "params": {"x": a.x, "y": a.y, "w": a.w, "k": a.k, "lambda": lambda.to_string(), "cutoff": cutoff},
        "count": count,
        "count_a0": family.count_a0(),
        "recip_sum": document::ExactValue::from(&recip),
        "estimate": estimate,
        "ratio": estimate.map(|e| count as f64 / e),
    });
    writeln!(out, "{report}").ok();
    Ok(EXIT_OK)
}

fn expand(mode: &str, r: &str, out: &mut dyn Write) -> Result<i32, Failure> {
    let q = parse_rational("r", r)?;
    let report = match mode {
        "greedy" => {
            let terms = greedy_expand(&q).map_err(|e| usage(e.to_string()))?;
            let nums: Vec<Value> = terms
                .iter()
                .map(|t| Value::Number(t.to_string().parse().expect("integer literal")))
                .collect();
            json!({"terms": nums})
        }
        _ => {
            let e = expand_odd(&q).map_err(pipeline_failure)?;
            json!({
                "terms": e.terms,
                "max_bound_used": e.max_bound_used,
                "reference_bound": e.reference_bound,
                "within_reference_bound": e.within_reference_bound(),
            })
        }
    };
    writeln!(out, "{report}").ok();
    Ok(EXIT_OK)
}

/// Runs the CLI on `args` (program name first), writing JSON to `out` and
/// diagnostics to stderr. Returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let result = match &cli.command {
        Command::Construct(a) => construct(a, out),
        Command::Verify { file } => verify(file, out),
        Command::Rho(a) => rho_cmd(a, out),
        Command::SieveStats(a) => sieve_stats(a, out),
        Command::Expand { mode, r } => expand(mode, r, out),
    };
    match result {
        Ok(code) => code,
        Err(f) => {
            writeln!(out, "{}", f.body).ok();
            f.code
        }
    }
}
