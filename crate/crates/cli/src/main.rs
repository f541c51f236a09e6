//! Batch audits over geodesic model files.
//!
//! Every subcommand loads exact data, computes exactly, and renders the
//! result either as a plain text table (the default) or as a structured JSON
//! report (`--format structured`). Structured values are always exact
//! strings, so a report can be parsed back without loss; `--approx` switches
//! the table rendering, and only the table rendering, to decimals.
//!
//! Exit codes follow one convention across all subcommands: 0 for a clean
//! pass, 1 for a certified violation or a failed verification, 2 for input
//! that could not be used (unreadable files, bad parameters, exhausted scan
//! budgets).
//!
//! The environment variable `GEODEX_SCAN_BUDGET` caps the largest `N`
//! examined by `jump find`, `jump dual`, and `multiplicity`.

use std::env;
use std::error::Error;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use num_rational::BigRational;
use num_traits::ToPrimitive;
use serde_json::{json, Value};

use geodex_core::exact_scalar::ExactScalar;
use geodex_core::jump::{self, SearchParams};
use geodex_core::katok::{katok_system_closed_form, KatokParameters};
use geodex_core::loop_homology::{
    average_betti, betti, betti_table, morse_audit, resonance_check, MorseViolationKind,
    ResonanceVerdict,
};
use geodex_core::model::{self, SCHEMA_VERSION};
use geodex_core::multiplicity::{multiplicity_verdict_with, MultiplicityVerdict};

type Fallible<T> = Result<T, Box<dyn Error>>;

#[derive(Parser)]
#[command(name = "geodex", version, about = "Exact index audits for closed-geodesic models")]
struct Cli {
    /// Output format
    #[arg(long, value_enum, default_value_t = Format::Table, global = true)]
    format: Format,
    /// Render table values as decimals instead of exact expressions
    #[arg(long, global = true)]
    approx: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Table,
    Structured,
}

#[derive(Subcommand)]
enum Command {
    /// Index and nullity of the m-th iterate of every geodesic
    Iterate {
        model: PathBuf,
        /// Iterate shift, at least 1
        #[arg(long)]
        m: i64,
    },
    /// Mean index of every geodesic
    MeanIndex { model: PathBuf },
    /// Nullity of the m-th iterate of every geodesic
    Nullity {
        model: PathBuf,
        /// Iterate shift, at least 1
        #[arg(long)]
        m: i64,
    },
    /// Equivariant Betti numbers of the quotient loop space
    Betti {
        /// Half-dimension parameter of S^(2n+1)
        #[arg(long)]
        n: u32,
        /// Largest degree listed
        #[arg(long)]
        max: i64,
    },
    /// Morse type numbers against the Betti numbers, degree by degree
    MorseAudit {
        model: PathBuf,
        /// Largest degree audited
        #[arg(long, default_value_t = 100)]
        cap: i64,
    },
    /// The resonance identity, decided exactly
    Resonance { model: PathBuf },
    /// Common-index-jump certificates: search, verification, duals
    #[command(subcommand)]
    Jump(JumpCommand),
    /// Weighted-circle model generators
    #[command(subcommand)]
    Katok(KatokCommand),
    /// Replay the multiplicity counting argument on a model file
    Multiplicity { model: PathBuf },
}

#[derive(Subcommand)]
enum JumpCommand {
    /// Scan for certificates and verify each hit
    Find {
        model: PathBuf,
        /// Window half-width, a rational strictly between 0 and 1/2
        #[arg(long, default_value = "1/100")]
        epsilon: String,
        /// Stop after this many certificates
        #[arg(long, default_value_t = 1)]
        limit: usize,
        /// Every reported N is a multiple of this
        #[arg(long, default_value_t = 1)]
        m0: u64,
        /// Identity horizon; computed from the models when omitted
        #[arg(long)]
        mbar: Option<u64>,
        /// Partition the scan range across threads
        #[arg(long)]
        parallel: bool,
        /// Write the first certificate to this path
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-check a stored certificate against a model file
    Verify { model: PathBuf, certificate: PathBuf },
    /// Find the window-complementary partner of a stored certificate
    Dual {
        model: PathBuf,
        certificate: PathBuf,
        /// Write the dual certificate to this path
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum KatokCommand {
    /// Build the closed-form system for (n, alpha, weights)
    Gen {
        /// Half-dimension parameter of S^(2n+1)
        #[arg(long)]
        n: u32,
        /// Perturbation strength, an irrational quadratic in (0, 1), e.g. "1/4*sqrt(2)"
        #[arg(long)]
        alpha: String,
        /// Comma-separated rotation weights; defaults to 1,2,...,n+1
        #[arg(long, value_delimiter = ',')]
        weights: Option<Vec<u64>>,
        /// Write the model file to this path
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// What a handler hands back: both renderings plus the exit code, so the
/// format choice stays out of the handlers.
struct Rendered {
    exit: u8,
    table: String,
    json: Value,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(rendered) => {
            match cli.format {
                Format::Table => print!("{}", rendered.table),
                Format::Structured => match serde_json::to_string_pretty(&rendered.json) {
                    Ok(text) => println!("{text}"),
                    Err(e) => {
                        eprintln!("error: {e}");
                        return ExitCode::from(2);
                    }
                },
            }
            ExitCode::from(rendered.exit)
        }
        Err(e) => {
            eprintln!("error: {e}");
            // Wrappers often echo their source in the message; only print a
            // cause that adds something.
            let mut prev = e.to_string();
            let mut cause = e.source();
            while let Some(c) = cause {
                let msg = c.to_string();
                if !prev.contains(&msg) {
                    eprintln!("  caused by: {msg}");
                }
                prev = msg;
                cause = c.source();
            }
            ExitCode::from(2)
        }
    }
}

fn run(cli: &Cli) -> Fallible<Rendered> {
    let approx = cli.approx;
    match &cli.command {
        Command::Iterate { model, m } => cmd_iterate(model, *m),
        Command::MeanIndex { model } => cmd_mean_index(model, approx),
        Command::Nullity { model, m } => cmd_nullity(model, *m),
        Command::Betti { n, max } => cmd_betti(*n, *max, approx),
        Command::MorseAudit { model, cap } => cmd_morse_audit(model, *cap),
        Command::Resonance { model } => cmd_resonance(model, approx),
        Command::Jump(sub) => match sub {
            JumpCommand::Find { model, epsilon, limit, m0, mbar, parallel, out } => {
                cmd_jump_find(model, epsilon, *limit, *m0, *mbar, *parallel, out.as_deref(), approx)
            }
            JumpCommand::Verify { model, certificate } => cmd_jump_verify(model, certificate),
            JumpCommand::Dual { model, certificate, out } => {
                cmd_jump_dual(model, certificate, out.as_deref(), approx)
            }
        },
        Command::Katok(KatokCommand::Gen { n, alpha, weights, out }) => {
            cmd_katok_gen(*n, alpha, weights.clone(), out.as_deref(), approx)
        }
        Command::Multiplicity { model } => cmd_multiplicity(model),
    }
}

// ---- rendering helpers ----

fn pad_row(cells: &[String], widths: &[usize]) -> String {
    let mut line = String::new();
    for (i, cell) in cells.iter().enumerate() {
        if i > 0 {
            line.push_str("  ");
        }
        line.push_str(cell);
        if i + 1 < cells.len() {
            for _ in cell.len()..widths[i] {
                line.push(' ');
            }
        }
    }
    line
}

fn render(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for row in rows {
        for (i, cell) in row.iter().enumerate() {
            widths[i] = widths[i].max(cell.len());
        }
    }
    let head: Vec<String> = header.iter().map(|h| h.to_string()).collect();
    let mut out = pad_row(&head, &widths);
    out.push('\n');
    for row in rows {
        out.push_str(&pad_row(row, &widths));
        out.push('\n');
    }
    out
}

fn show_scalar(x: &ExactScalar, approx: bool) -> String {
    if approx {
        format!("{:.6}", x.to_f64())
    } else {
        x.to_string()
    }
}

fn show_ratio(q: &BigRational, approx: bool) -> String {
    if approx {
        format!("{:.6}", q.to_f64().unwrap_or(f64::NAN))
    } else {
        q.to_string()
    }
}

fn join<T: ToString>(items: &[T]) -> String {
    items.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

/// Scan budget for the searching subcommands, overridable via
/// `GEODEX_SCAN_BUDGET`. An unparsable override is a usage error.
fn scan_budget() -> Fallible<u64> {
    match env::var("GEODEX_SCAN_BUDGET") {
        Ok(raw) => raw
            .trim()
            .parse::<u64>()
            .map_err(|e| format!("GEODEX_SCAN_BUDGET {raw:?}: {e}").into()),
        Err(env::VarError::NotPresent) => Ok(jump::DEFAULT_SCAN_BUDGET),
        Err(e) => Err(e.into()),
    }
}

fn require_positive_shift(m: i64) -> Fallible<()> {
    if m < 1 {
        return Err(format!("iterate shift must be at least 1, got {m}").into());
    }
    Ok(())
}

// ---- subcommands ----

fn cmd_iterate(path: &PathBuf, m: i64) -> Fallible<Rendered> {
    require_positive_shift(m)?;
    let s = model::load_system(path)?;
    let mut rows = Vec::new();
    let mut entries = Vec::new();
    for g in &s.geodesics {
        let index = g.index_of_iterate(m);
        let nullity = g.nullity_of_iterate(m);
        rows.push(vec![g.label.clone(), index.to_string(), nullity.to_string()]);
        entries.push(json!({ "label": g.label, "index": index, "nullity": nullity }));
    }
    Ok(Rendered {
        exit: 0,
        table: render(&["geodesic", "index", "nullity"], &rows),
        json: json!({
            "schema_version": SCHEMA_VERSION,
            "command": "iterate",
            "m": m,
            "rows": entries,
        }),
    })
}

fn cmd_mean_index(path: &PathBuf, approx: bool) -> Fallible<Rendered> {
    let s = model::load_system(path)?;
    let mut rows = Vec::new();
    let mut entries = Vec::new();
    for g in &s.geodesics {
        // A single-field model gets the compact scalar form; mixed radicands
        // fall back to the field-sum rendering.
        let (shown, exact) = match g.mean_index() {
            Ok(x) => (show_scalar(&x, approx), x.to_string()),
            Err(_) => {
                let sum = g.mean_index_sum();
                let shown = if approx {
                    format!("{:.6}", sum.to_f64())
                } else {
                    sum.to_string()
                };
                (shown, sum.to_string())
            }
        };
        rows.push(vec![g.label.clone(), shown]);
        entries.push(json!({ "label": g.label, "mean_index": exact }));
    }
    Ok(Rendered {
        exit: 0,
        table: render(&["geodesic", "mean index"], &rows),
        json: json!({
            "schema_version": SCHEMA_VERSION,
            "command": "mean_index",
            "rows": entries,
        }),
    })
}

fn cmd_nullity(path: &PathBuf, m: i64) -> Fallible<Rendered> {
    require_positive_shift(m)?;
    let s = model::load_system(path)?;
    let mut rows = Vec::new();
    let mut entries = Vec::new();
    for g in &s.geodesics {
        let nullity = g.nullity_of_iterate(m);
        rows.push(vec![g.label.clone(), nullity.to_string()]);
        entries.push(json!({ "label": g.label, "nullity": nullity }));
    }
    Ok(Rendered {
        exit: 0,
        table: render(&["geodesic", "nullity"], &rows),
        json: json!({
            "schema_version": SCHEMA_VERSION,
            "command": "nullity",
            "m": m,
            "rows": entries,
        }),
    })
}

fn cmd_betti(n: u32, max: i64, approx: bool) -> Fallible<Rendered> {
    if n < 1 {
        return Err("n must be at least 1".into());
    }
    if max < 0 {
        return Err(format!("max degree must be nonnegative, got {max}").into());
    }
    let values = betti_table(n, max);
    let avg = average_betti(n);
    let table = format!(
        "degrees 0..={max} for n={n}\n{}\naverage = {}\n",
        join(&values),
        show_ratio(&avg, approx),
    );
    Ok(Rendered {
        exit: 0,
        table,
        json: json!({
            "schema_version": SCHEMA_VERSION,
            "command": "betti",
            "n": n,
            "max": max,
            "values": values,
            "average": avg.to_string(),
        }),
    })
}

fn cmd_morse_audit(path: &PathBuf, cap: i64) -> Fallible<Rendered> {
    if cap < 0 {
        return Err(format!("cap must be nonnegative, got {cap}").into());
    }
    let s = model::load_system(path)?;
    let report = morse_audit(&s, cap)?;
    let mut rows = Vec::new();
    for p in 0..=cap {
        let m_p = report.table.counts[p as usize];
        let b_p = betti(s.n, p);
        if m_p == 0 && b_p == 0 {
            continue;
        }
        rows.push(vec![p.to_string(), m_p.to_string(), b_p.to_string()]);
    }
    let mut table = render(&["degree", "morse", "betti"], &rows);
    table.push_str("(degrees where both counts vanish are omitted)\n");
    for v in &report.violations {
        let line = match v.kind {
            MorseViolationKind::Pointwise => {
                format!("M_{}={} < beta_{}={}", v.degree, v.morse, v.degree, v.betti)
            }
            MorseViolationKind::EvenEquality => format!(
                "M_{}={} != beta_{}={} (even system needs equality)",
                v.degree, v.morse, v.degree, v.betti
            ),
            MorseViolationKind::Alternating => format!(
                "alternating sum through degree {} is {}, needs >= 0",
                v.degree, v.morse
            ),
        };
        table.push_str(&line);
        table.push('\n');
    }
    if report.ok() {
        table.push_str(&format!("audit: clean through degree {cap}\n"));
    } else {
        table.push_str(&format!("audit: {} violation(s)\n", report.violations.len()));
    }
    Ok(Rendered {
        exit: if report.ok() { 0 } else { 1 },
        table,
        json: json!({
            "schema_version": SCHEMA_VERSION,
            "command": "morse_audit",
            "report": serde_json::to_value(&report)?,
        }),
    })
}

fn cmd_resonance(path: &PathBuf, approx: bool) -> Fallible<Rendered> {
    let s = model::load_system(path)?;
    let report = resonance_check(&s)?;
    let mut rows = Vec::new();
    let mut entries = Vec::new();
    for (label, chi_hat, ihat) in &report.terms {
        rows.push(vec![
            label.clone(),
            show_ratio(chi_hat, approx),
            show_scalar(ihat, approx),
        ]);
        entries.push(json!({
            "label": label,
            "chi_hat": chi_hat.to_string(),
            "mean_index": ihat.to_string(),
        }));
    }
    let mut table = render(&["geodesic", "chi-hat", "mean index"], &rows);
    let exit = match report.verdict {
        ResonanceVerdict::Holds => {
            // Equality is certified exactly, so one value stands for both sides.
            table.push_str(&format!("LHS = {} = RHS\n", report.rhs));
            0
        }
        ResonanceVerdict::Fails => {
            table.push_str(&format!("LHS = {} != RHS = {}\n", report.lhs, report.rhs));
            1
        }
        ResonanceVerdict::Inconclusive => {
            return Err("resonance comparison did not certify either way".into());
        }
    };
    Ok(Rendered {
        exit,
        table,
        json: json!({
            "schema_version": SCHEMA_VERSION,
            "command": "resonance",
            "verdict": serde_json::to_value(report.verdict)?,
            "lhs": report.lhs.to_string(),
            "rhs": report.rhs.to_string(),
            "terms": entries,
        }),
    })
}

#[allow(clippy::too_many_arguments)]
fn cmd_jump_find(
    path: &PathBuf,
    epsilon: &str,
    limit: usize,
    m0: u64,
    mbar: Option<u64>,
    parallel: bool,
    out: Option<&std::path::Path>,
    approx: bool,
) -> Fallible<Rendered> {
    let s = model::load_system(path)?;
    let eps: BigRational = epsilon
        .parse()
        .map_err(|e| format!("--epsilon {epsilon:?}: {e}"))?;
    let mbar = match mbar {
        Some(v) => v,
        None => jump::mbar_of(&s.geodesics)?,
    };
    let mut params = SearchParams::new(mbar, m0, eps, limit);
    params.budget = scan_budget()?;
    params.parallel = parallel;
    let certs = jump::find_certificates(&s.geodesics, &params)?;
    let first = &certs[0];
    let mut table = format!(
        "mbar={} M0={} Mbar={} epsilon={} delta={} budget={}\n",
        first.mbar,
        first.m0,
        first.mbar_spectral,
        show_scalar(&first.epsilon, approx),
        show_scalar(&first.delta, approx),
        params.budget,
    );
    let mut rows = Vec::new();
    for cert in &certs {
        let status = if cert.verification.pass {
            format!("ok ({} checks)", cert.verification.rows.len())
        } else {
            "FAIL".to_string()
        };
        rows.push(vec![
            cert.n_value.to_string(),
            join(&cert.m),
            join(&cert.chi),
            status,
        ]);
    }
    table.push_str(&render(&["N", "m_k", "chi_k", "verification"], &rows));
    if let Some(out_path) = out {
        model::save_certificate(out_path, first)?;
        table.push_str(&format!("wrote {}\n", out_path.display()));
    }
    let all_pass = certs.iter().all(|c| c.verification.pass);
    Ok(Rendered {
        exit: if all_pass { 0 } else { 1 },
        table,
        json: json!({
            "schema_version": SCHEMA_VERSION,
            "command": "jump_find",
            "budget": params.budget,
            "certificates": serde_json::to_value(&certs)?,
        }),
    })
}

fn cmd_jump_verify(model_path: &PathBuf, cert_path: &PathBuf) -> Fallible<Rendered> {
    let s = model::load_system(model_path)?;
    let cert = model::load_certificate(cert_path)?;
    let record = jump::verify_certificate(&s.geodesics, &cert)?;
    let rows: Vec<Vec<String>> = record
        .rows
        .iter()
        .map(|r| {
            vec![
                r.label.clone(),
                r.equation.clone(),
                r.m.to_string(),
                r.lhs.clone(),
                r.rhs.clone(),
                if r.pass { "ok".into() } else { "FAIL".into() },
            ]
        })
        .collect();
    let mut table = render(&["geodesic", "check", "m", "lhs", "rhs", "status"], &rows);
    if record.pass {
        table.push_str(&format!("verification: pass ({} checks)\n", record.rows.len()));
    } else {
        table.push_str(&format!(
            "verification: FAIL ({} of {} checks)\n",
            record.failures().count(),
            record.rows.len(),
        ));
    }
    Ok(Rendered {
        exit: if record.pass { 0 } else { 1 },
        table,
        json: json!({
            "schema_version": SCHEMA_VERSION,
            "command": "jump_verify",
            "pass": record.pass,
            "rows": serde_json::to_value(&record.rows)?,
        }),
    })
}

fn cmd_jump_dual(
    model_path: &PathBuf,
    cert_path: &PathBuf,
    out: Option<&std::path::Path>,
    approx: bool,
) -> Fallible<Rendered> {
    let s = model::load_system(model_path)?;
    let cert = model::load_certificate(cert_path)?;
    let eps = cert
        .epsilon
        .as_ratio()
        .cloned()
        .ok_or("certificate epsilon is not rational")?;
    let mut params = SearchParams::new(cert.mbar, cert.m0, eps, 1);
    params.budget = scan_budget()?;
    let dual = jump::dual_certificate(&s.geodesics, &cert, &params)?;
    let rows = vec![vec![
        dual.n_value.to_string(),
        join(&dual.m),
        join(&dual.chi),
        if dual.verification.pass {
            format!("ok ({} checks)", dual.verification.rows.len())
        } else {
            "FAIL".to_string()
        },
    ]];
    let mut table = format!(
        "dual of N={} with delta={}\n",
        cert.n_value,
        show_scalar(&dual.delta, approx),
    );
    table.push_str(&render(&["N", "m_k", "chi_k", "verification"], &rows));
    if let Some(out_path) = out {
        model::save_certificate(out_path, &dual)?;
        table.push_str(&format!("wrote {}\n", out_path.display()));
    }
    Ok(Rendered {
        exit: if dual.verification.pass { 0 } else { 1 },
        table,
        json: json!({
            "schema_version": SCHEMA_VERSION,
            "command": "jump_dual",
            "paired_with": cert.n_value,
            "certificate": serde_json::to_value(&dual)?,
        }),
    })
}

fn cmd_katok_gen(
    n: u32,
    alpha: &str,
    weights: Option<Vec<u64>>,
    out: Option<&std::path::Path>,
    approx: bool,
) -> Fallible<Rendered> {
    let alpha: ExactScalar = alpha
        .parse()
        .map_err(|e| format!("--alpha {alpha:?}: {e}"))?;
    let weights = weights.unwrap_or_else(|| (1..=u64::from(n) + 1).collect());
    let params = KatokParameters::new(n, alpha, weights);
    let system = katok_system_closed_form(&params)?;
    let mut rows = Vec::new();
    for g in &system.geodesics {
        let ihat = g.mean_index().map_err(|e| e.to_string())?;
        rows.push(vec![
            g.label.clone(),
            g.initial_index.to_string(),
            show_scalar(&ihat, approx),
        ]);
    }
    let mut table = format!(
        "n={} alpha={} weights={}\n",
        params.n,
        params.alpha,
        join(&params.weights),
    );
    table.push_str(&render(&["geodesic", "initial index", "mean index"], &rows));
    if let Some(out_path) = out {
        model::save_system(out_path, &system)?;
        table.push_str(&format!("wrote {}\n", out_path.display()));
    }
    Ok(Rendered {
        exit: 0,
        // The structured form is a loadable model file, not a report.
        table,
        json: json!({
            "schema_version": SCHEMA_VERSION,
            "system": serde_json::to_value(&system)?,
        }),
    })
}

fn cmd_multiplicity(path: &PathBuf) -> Fallible<Rendered> {
    let s = model::load_system(path)?;
    let report = multiplicity_verdict_with(&s, scan_budget()?)?;
    let mut table = format!(
        "above-center even={} odd={}; below-center even={} odd={}\n",
        report.n_plus_e, report.n_plus_o, report.n_minus_e, report.n_minus_o,
    );
    let list = |labels: &[String]| {
        if labels.is_empty() {
            "(none)".to_string()
        } else {
            labels.join(", ")
        }
    };
    table.push_str(&format!(
        "step 1 witnesses: {}\n",
        list(&report.nonhyperbolic_labels)
    ));
    table.push_str(&format!("step 2 labels: {}\n", list(&report.step2_labels)));
    let exit = match &report.verdict {
        MultiplicityVerdict::Consistent { total } => {
            table.push_str(&format!(
                "verdict: consistent, at least {total} distinct closed geodesics\n"
            ));
            0
        }
        MultiplicityVerdict::Violated { details } => {
            table.push_str(&format!("verdict: violated, {details}\n"));
            1
        }
    };
    Ok(Rendered {
        exit,
        table,
        json: json!({
            "schema_version": SCHEMA_VERSION,
            "command": "multiplicity",
            "report": serde_json::to_value(&report)?,
        }),
    })
}
