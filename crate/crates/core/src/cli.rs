//! Command-line front end.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::evaluator::{evaluator_names, find_evaluator, Evaluation, KEvaluator, Method};
use crate::oracle::{find_identity, identity_registry, k_oracle, VerificationRecord};
use crate::quadrature::QuadratureSpec;
use crate::series::{k_mcdonald, TruncationPolicy};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_NUMERIC: i32 = 2;

pub const CSV_HEADER: [&str; 7] = [
    "s",
    "z",
    "method",
    "terms",
    "value",
    "converged",
    "rel_err_vs_oracle",
];

#[derive(Parser, Debug)]
#[command(
    name = "mcdonald",
    version,
    about = "Series and quadrature evaluation of K_s(z)"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Evaluate K_s(z) at one point.
    Eval(EvalArgs),
    /// Evaluate a grid of points and write it to a file.
    Table(TableArgs),
    /// Map where the canonical series converges.
    Converge(ConvergeArgs),
    /// Check the integral identities and audit the V_k^(-1/2) series.
    Verify(VerifyArgs),
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[arg(long, allow_hyphen_values = true)]
    s: f64,
    #[arg(long, allow_hyphen_values = true)]
    z: f64,
    #[arg(long, default_value = "rearranged")]
    method: String,
    #[arg(long)]
    max_terms: Option<usize>,
    #[arg(long, conflicts_with = "csv")]
    json: bool,
    #[arg(long)]
    csv: bool,
    /// Add the relative error against the quadrature oracle.
    #[arg(long)]
    with_oracle: bool,
}

#[derive(Args, Debug)]
struct TableArgs {
    #[arg(long, allow_hyphen_values = true)]
    s_list: String,
    #[arg(long, allow_hyphen_values = true)]
    z_list: String,
    #[arg(long, default_value = "rearranged")]
    methods: String,
    #[arg(long)]
    with_oracle: bool,
    #[arg(long)]
    max_terms: Option<usize>,
    #[arg(long)]
    out: PathBuf,
    /// Write JSON instead of CSV.
    #[arg(long)]
    json: bool,
}

#[derive(Args, Debug)]
struct ConvergeArgs {
    #[arg(long, allow_hyphen_values = true)]
    s_range: String,
    #[arg(long, allow_hyphen_values = true)]
    z_range: String,
    #[arg(long)]
    max_terms: Option<usize>,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    #[arg(long, default_value = "all")]
    identity: String,
    /// Tolerance for the non-anchor rows.
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    json: bool,
}

/// One evaluated grid point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputRow {
    pub s: f64,
    pub z: f64,
    pub method: Method,
    pub terms: usize,
    pub value: f64,
    pub converged: bool,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub rel_err_vs_oracle: Option<f64>,
}

impl OutputRow {
    fn csv_fields(&self) -> [String; 7] {
        [
            fmt_real(self.s),
            fmt_real(self.z),
            self.method.to_string(),
            self.terms.to_string(),
            fmt_real(self.value),
            self.converged.to_string(),
            self.rel_err_vs_oracle.map(fmt_real).unwrap_or_default(),
        ]
    }
}

/// Seventeen significant digits, enough to round-trip any double.
pub fn fmt_real(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        x.to_string()
    }
}

/// Parses rows written by `table`.
pub fn parse_csv_rows(text: &str) -> Result<Vec<OutputRow>, String> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let headers = reader.headers().map_err(|e| e.to_string())?.clone();
    if headers.iter().collect::<Vec<_>>() != CSV_HEADER {
        return Err(format!("unexpected header {headers:?}"));
    }
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| e.to_string())?;
        let real = |i: usize| {
            rec[i]
                .parse::<f64>()
                .map_err(|e| format!("{}: {e}", &rec[i]))
        };
        let method = serde_json::from_value(serde_json::Value::String(rec[2].to_string()))
            .map_err(|e| e.to_string())?;
        rows.push(OutputRow {
            s: real(0)?,
            z: real(1)?,
            method,
            terms: rec[3].parse().map_err(|e| format!("{e}"))?,
            value: real(4)?,
            converged: rec[5].parse().map_err(|e| format!("{e}"))?,
            rel_err_vs_oracle: if rec[6].is_empty() {
                None
            } else {
                Some(real(6)?)
            },
        });
    }
    Ok(rows)
}

fn write_csv<W: Write>(rows: &[OutputRow], w: W) -> csv::Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(CSV_HEADER)?;
    for r in rows {
        wr.write_record(r.csv_fields())?;
    }
    wr.flush()?;
    Ok(())
}

fn parse_list(text: &str, what: &str) -> Result<Vec<f64>, String> {
    let values: Result<Vec<f64>, _> = text
        .split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse::<f64>()
                .map_err(|e| format!("{what}: cannot parse '{t}': {e}"))
        })
        .collect();
    let values = values?;
    if values.is_empty() {
        return Err(format!("{what} is empty"));
    }
    if let Some(v) = values.iter().find(|v| !v.is_finite()) {
        return Err(format!("{what}: value {v} is not finite"));
    }
    Ok(values)
}

/// `lo:hi:step`, inclusive of `hi` up to rounding.
pub fn parse_range(text: &str, what: &str) -> Result<Vec<f64>, String> {
    let parts: Vec<&str> = text.split(':').collect();
    if parts.len() != 3 {
        return Err(format!("{what}: expected lo:hi:step, got '{text}'"));
    }
    let num = |t: &str| {
        t.trim()
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| format!("{what}: cannot parse '{t}'"))
    };
    let (lo, hi, step) = (num(parts[0])?, num(parts[1])?, num(parts[2])?);
    if !(step > 0.0) {
        return Err(format!("{what}: step must be positive, got {step}"));
    }
    if hi < lo {
        return Err(format!(
            "{what}: upper bound {hi} is below lower bound {lo}"
        ));
    }
    let n = ((hi - lo) / step + 1e-9).floor() as usize;
    if n > 1_000_000 {
        return Err(format!("{what}: range has too many points"));
    }
    Ok((0..=n).map(|i| lo + i as f64 * step).collect())
}

fn check_z_values(zs: &[f64]) -> Result<(), String> {
    match zs.iter().find(|&&z| !(z > 0.0)) {
        Some(z) => Err(format!("z values must be positive, got {z}")),
        None => Ok(()),
    }
}

fn policy_with(max_terms: Option<usize>) -> Result<TruncationPolicy, String> {
    let mut p = TruncationPolicy::default();
    if let Some(n) = max_terms {
        if n == 0 {
            return Err("--max-terms must be positive".into());
        }
        p.max_terms = n;
    }
    Ok(p)
}

fn exit_code_for(e: &Error) -> i32 {
    match e {
        Error::Domain(_) | Error::Pole { .. } => EXIT_USAGE,
        Error::ToleranceNotMet { .. } | Error::SeriesDiverged { .. } => EXIT_NUMERIC,
    }
}

fn relative_error(value: f64, reference: f64) -> f64 {
    (value - reference).abs() / reference.abs()
}

fn resolve_evaluators(names: &str) -> Result<Vec<Box<dyn KEvaluator>>, String> {
    names
        .split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|n| {
            find_evaluator(n).ok_or_else(|| {
                format!(
                    "unknown method '{n}' (expected one of {})",
                    evaluator_names().join(", ")
                )
            })
        })
        .collect::<Result<Vec<_>, _>>()
        .and_then(|v| {
            if v.is_empty() {
                Err("no methods given".to_string())
            } else {
                Ok(v)
            }
        })
}

/// Runs the CLI on `args` (including the program name) and returns the exit
/// code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            if e.use_stderr() {
                let _ = write!(err, "{text}");
            } else {
                let _ = write!(out, "{text}");
            }
            return code;
        }
    };
    let result = match cli.command {
        Command::Eval(a) => cmd_eval(a, out),
        Command::Table(a) => cmd_table(a, out, err),
        Command::Converge(a) => cmd_converge(a, out),
        Command::Verify(a) => cmd_verify(a, out),
    };
    match result {
        Ok(code) => code,
        Err((code, msg)) => {
            let _ = writeln!(err, "error: {msg}");
            code
        }
    }
}

type CmdResult = Result<i32, (i32, String)>;

fn usage(msg: impl Into<String>) -> (i32, String) {
    (EXIT_USAGE, msg.into())
}

fn io_failure(e: impl std::fmt::Display) -> (i32, String) {
    (EXIT_USAGE, format!("write failed: {e}"))
}

fn cmd_eval(a: EvalArgs, out: &mut dyn Write) -> CmdResult {
    if !a.s.is_finite() {
        return Err(usage(format!("order must be finite, got {}", a.s)));
    }
    check_z_values(&[a.z]).map_err(usage)?;
    let policy = policy_with(a.max_terms).map_err(usage)?;
    let ev = resolve_evaluators(&a.method).map_err(usage)?;
    if ev.len() != 1 {
        return Err(usage("eval takes exactly one method"));
    }
    let ev = &ev[0];
    let r: Evaluation = ev
        .evaluate(a.s, a.z, policy)
        .map_err(|e| (exit_code_for(&e), e.to_string()))?;
    let rel_err = if a.with_oracle {
        let o = k_oracle(a.s, a.z, &QuadratureSpec::default())
            .map_err(|e| (exit_code_for(&e), format!("oracle: {e}")))?;
        Some(relative_error(r.value, o))
    } else {
        None
    };
    let row = OutputRow {
        s: a.s,
        z: a.z,
        method: ev.method(),
        terms: r.terms,
        value: r.value,
        converged: r.converged,
        rel_err_vs_oracle: rel_err,
    };
    if a.json {
        let text = serde_json::to_string(&row).map_err(io_failure)?;
        writeln!(out, "{text}").map_err(io_failure)?;
    } else {
        write_csv(std::slice::from_ref(&row), &mut *out).map_err(io_failure)?;
    }
    if r.diverging {
        return Err((
            EXIT_NUMERIC,
            format!(
                "series diverging after {} terms; value is the last partial sum",
                r.terms
            ),
        ));
    }
    Ok(EXIT_OK)
}

fn cmd_table(a: TableArgs, out: &mut dyn Write, err: &mut dyn Write) -> CmdResult {
    let ss = parse_list(&a.s_list, "--s-list").map_err(usage)?;
    let zs = parse_list(&a.z_list, "--z-list").map_err(usage)?;
    check_z_values(&zs).map_err(usage)?;
    let evaluators = resolve_evaluators(&a.methods).map_err(usage)?;
    let policy = policy_with(a.max_terms).map_err(usage)?;
    let points: Vec<(f64, f64)> = ss
        .iter()
        .flat_map(|&s| zs.iter().map(move |&z| (s, z)))
        .collect();
    let q = QuadratureSpec::default();
    let per_point: Vec<(Vec<OutputRow>, Vec<String>)> = points
        .par_iter()
        .map(|&(s, z)| {
            let mut notes = Vec::new();
            let oracle = if a.with_oracle {
                match k_oracle(s, z, &q) {
                    Ok(v) => Some(v),
                    Err(e) => {
                        notes.push(format!("s={s} z={z} oracle: {e}"));
                        Some(f64::NAN)
                    }
                }
            } else {
                None
            };
            let rows = evaluators
                .iter()
                .map(|ev| {
                    let r = ev.evaluate(s, z, policy).unwrap_or_else(|e| {
                        notes.push(format!("s={s} z={z} {}: {e}", ev.method()));
                        Evaluation {
                            value: f64::NAN,
                            terms: 0,
                            converged: false,
                            diverging: false,
                        }
                    });
                    OutputRow {
                        s,
                        z,
                        method: ev.method(),
                        terms: r.terms,
                        value: r.value,
                        converged: r.converged,
                        rel_err_vs_oracle: oracle.map(|o| relative_error(r.value, o)),
                    }
                })
                .collect();
            (rows, notes)
        })
        .collect();
    let mut rows = Vec::with_capacity(points.len() * evaluators.len());
    for (r, notes) in per_point {
        rows.extend(r);
        for n in notes {
            let _ = writeln!(err, "warning: {n}");
        }
    }
    let file = std::fs::File::create(&a.out)
        .map_err(|e| usage(format!("cannot write {}: {e}", a.out.display())))?;
    let mut file = std::io::BufWriter::new(file);
    if a.json {
        serde_json::to_writer_pretty(&mut file, &rows).map_err(io_failure)?;
        writeln!(file).map_err(io_failure)?;
    } else {
        write_csv(&rows, &mut file).map_err(io_failure)?;
    }
    file.flush().map_err(io_failure)?;
    writeln!(out, "wrote {} rows to {}", rows.len(), a.out.display()).map_err(io_failure)?;
    Ok(EXIT_OK)
}

fn cmd_converge(a: ConvergeArgs, out: &mut dyn Write) -> CmdResult {
    let ss = parse_range(&a.s_range, "--s-range").map_err(usage)?;
    let zs = parse_range(&a.z_range, "--z-range").map_err(usage)?;
    check_z_values(&zs).map_err(usage)?;
    let policy = policy_with(a.max_terms).map_err(usage)?;
    let points: Vec<(f64, f64)> = ss
        .iter()
        .flat_map(|&s| zs.iter().map(move |&z| (s, z)))
        .collect();
    let results: Vec<_> = points
        .par_iter()
        .map(|&(s, z)| k_mcdonald(s, z, policy))
        .collect();
    let w = |out: &mut dyn Write, line: String| writeln!(out, "{line}").map_err(io_failure);
    w(
        out,
        format!(
            "{:>12} {:>12}  {:<13} {:>6} {:>12}",
            "s", "z", "status", "terms", "last_term"
        ),
    )?;
    let mut converged = 0;
    for (&(s, z), r) in points.iter().zip(&results) {
        let line = match r {
            Ok(a) => {
                let status = if a.converged {
                    converged += 1;
                    "converged"
                } else if a.diverging {
                    "diverging"
                } else {
                    "not-converged"
                };
                format!(
                    "{s:>12.6} {z:>12.6}  {status:<13} {:>6} {:>12.3e}",
                    a.terms_used, a.last_term_abs
                )
            }
            Err(e) => format!("{s:>12.6} {z:>12.6}  error: {e}"),
        };
        w(out, line)?;
    }
    let total = points.len();
    w(
        out,
        format!(
            "converged {converged}/{total} points ({:.1}%) within {} terms",
            100.0 * converged as f64 / total as f64,
            policy.max_terms
        ),
    )?;
    for &s in &ss {
        let ok: Vec<f64> = points
            .iter()
            .zip(&results)
            .filter(|((ps, _), r)| *ps == s && matches!(r, Ok(a) if a.converged))
            .map(|((_, z), _)| *z)
            .collect();
        let region = match (ok.first(), ok.last()) {
            (Some(lo), Some(hi)) => {
                format!("{}/{} z values, z in [{lo}, {hi}]", ok.len(), zs.len())
            }
            _ => "none".to_string(),
        };
        w(out, format!("s = {s}: {region}"))?;
    }
    Ok(EXIT_OK)
}

fn format_record(r: &VerificationRecord) -> String {
    let params: Vec<String> = r.params.iter().map(|(k, v)| format!("{k}={v}")).collect();
    let verdict = match (r.asserted, r.pass) {
        (true, true) => "PASS",
        (true, false) => "FAIL",
        (false, true) => "info: within tol",
        (false, false) => "info: outside tol",
    };
    let mut line = format!(
        "{:<8} {:<28} lhs={:<24} rhs={:<24} rel_dev={:.3e} tol={:.0e}  {verdict}",
        r.identity_id.as_str(),
        params.join(" "),
        fmt_real(r.lhs),
        fmt_real(r.rhs),
        r.rel_dev,
        r.tol
    );
    if !r.label.is_empty() {
        line.push_str(&format!("  [{}]", r.label));
    }
    line
}

fn cmd_verify(a: VerifyArgs, out: &mut dyn Write) -> CmdResult {
    if let Some(t) = a.tol {
        if !(t > 0.0) {
            return Err(usage(format!("--tol must be positive, got {t}")));
        }
    }
    let checks = if a.identity == "all" {
        identity_registry()
    } else {
        vec![find_identity(&a.identity).ok_or_else(|| {
            usage(format!(
                "unknown identity '{}' (expected m4a, m4b, m5a, m5b, m10 or all)",
                a.identity
            ))
        })?]
    };
    let records: Vec<VerificationRecord> = checks.iter().flat_map(|c| c.run(a.tol)).collect();
    if a.json {
        let text = serde_json::to_string_pretty(&records).map_err(io_failure)?;
        writeln!(out, "{text}").map_err(io_failure)?;
    } else {
        for r in &records {
            writeln!(out, "{}", format_record(r)).map_err(io_failure)?;
        }
    }
    let failures = records.iter().filter(|r| r.is_failure()).count();
    if failures > 0 {
        return Err((EXIT_NUMERIC, format!("{failures} asserted check(s) failed")));
    }
    Ok(EXIT_OK)
}
