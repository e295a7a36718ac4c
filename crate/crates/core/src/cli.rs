//! Instance files, CSV traces and the `solve` command.
//!
//! Instance files are line based. `#` starts a comment that runs to the end
//! of the line; blank lines are ignored. Recognized keys:
//!
//! ```text
//! name <text>                 optional, defaults to "instance"
//! xvars <N>                   number of decision variables x1..xN
//! yvars <M>                   number of index variables y1..yM
//! xdom <i> <lo> <hi>          bounds of x<i>, one line per variable
//! ydom <j> <lo> <hi>          bounds of y<j>, one line per variable
//! objective <expr>            f, over x variables only
//! constraint <expr>           g, over x and y variables
//! ```

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use thiserror::Error;

use crate::domain::{BoxRegion, Interval};
use crate::expr::{parse, Expr};
use crate::globalopt::OptConfig;
use crate::oracles::{AffineMap, AlphaConfig, AlphaOracle, ExactOracle, LlpOracle, OracleOutcome, ScriptedOracle};
use crate::sip::{builtin_counterexample, run_lower_bounding, SipConfig, SipInstance, SolveReport, SolveStatus};

pub const EXIT_DEFINITIVE: i32 = 0;
pub const EXIT_MAX_ITER: i32 = 2;
pub const EXIT_FAILURE: i32 = 3;
pub const EXIT_USAGE: i32 = 64;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{}{message}", line.map(|l| format!("line {l}: ")).unwrap_or_default())]
pub struct InstanceError {
    pub line: Option<usize>,
    pub message: String,
}

impl InstanceError {
    fn at(line: usize, message: impl Into<String>) -> Self {
        Self {
            line: Some(line),
            message: message.into(),
        }
    }

    fn global(message: impl Into<String>) -> Self {
        Self {
            line: None,
            message: message.into(),
        }
    }
}

#[derive(Debug, Error)]
#[error("cannot write trace to {}: {source}", path.display())]
pub struct TraceError {
    pub path: PathBuf,
    #[source]
    pub source: std::io::Error,
}

/// A keyed value together with the line it came from.
struct Entry<T> {
    line: usize,
    value: T,
}

fn set_once<T>(slot: &mut Option<Entry<T>>, key: &str, line: usize, value: T) -> Result<(), InstanceError> {
    if let Some(prev) = slot {
        return Err(InstanceError::at(
            line,
            format!("duplicate `{key}` (first given on line {})", prev.line),
        ));
    }
    *slot = Some(Entry { line, value });
    Ok(())
}

fn parse_count(key: &str, rest: &str, line: usize) -> Result<usize, InstanceError> {
    let n: usize = rest
        .trim()
        .parse()
        .map_err(|_| InstanceError::at(line, format!("`{key}` expects a positive integer, got `{rest}`")))?;
    if n == 0 {
        return Err(InstanceError::at(line, format!("`{key}` must be at least 1")));
    }
    Ok(n)
}

fn parse_bound(key: &str, rest: &str, line: usize) -> Result<(usize, Interval), InstanceError> {
    let fields: Vec<&str> = rest.split_whitespace().collect();
    let [idx, lo, hi] = fields[..] else {
        return Err(InstanceError::at(line, format!("`{key}` expects `<index> <lo> <hi>`")));
    };
    let idx: usize = idx
        .parse()
        .map_err(|_| InstanceError::at(line, format!("bad variable index `{idx}`")))?;
    let num = |s: &str| -> Result<f64, InstanceError> {
        match s.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            _ => Err(InstanceError::at(line, format!("bad bound `{s}`"))),
        }
    };
    let (lo, hi) = (num(lo)?, num(hi)?);
    let iv = Interval::new(lo, hi)
        .map_err(|_| InstanceError::at(line, format!("empty interval [{lo}, {hi}]")))?;
    Ok((idx, iv))
}

fn collect_box(
    prefix: &str,
    count: usize,
    bounds: Vec<Entry<(usize, Interval)>>,
) -> Result<BoxRegion, InstanceError> {
    let mut dims: Vec<Option<Interval>> = vec![None; count];
    for Entry { line, value: (idx, iv) } in bounds {
        if idx == 0 || idx > count {
            return Err(InstanceError::at(
                line,
                format!("{prefix}{idx} is not declared ({prefix}vars is {count})"),
            ));
        }
        if dims[idx - 1].is_some() {
            return Err(InstanceError::at(line, format!("duplicate bounds for {prefix}{idx}")));
        }
        dims[idx - 1] = Some(iv);
    }
    let dims = dims
        .into_iter()
        .enumerate()
        .map(|(i, d)| d.ok_or_else(|| InstanceError::global(format!("missing `{prefix}dom` for {prefix}{}", i + 1))))
        .collect::<Result<Vec<_>, _>>()?;
    BoxRegion::new(dims).map_err(|e| InstanceError::global(e.to_string()))
}

pub fn load_instance(text: &str) -> Result<SipInstance, InstanceError> {
    let mut name = None;
    let mut xvars = None;
    let mut yvars = None;
    let mut objective: Option<Entry<Expr>> = None;
    let mut constraint: Option<Entry<Expr>> = None;
    let mut xdom = Vec::new();
    let mut ydom = Vec::new();

    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, rest) = content
            .split_once(char::is_whitespace)
            .map(|(k, r)| (k, r.trim()))
            .unwrap_or((content, ""));
        match key {
            "name" => set_once(&mut name, key, line, rest.to_string())?,
            "xvars" => set_once(&mut xvars, key, line, parse_count(key, rest, line)?)?,
            "yvars" => set_once(&mut yvars, key, line, parse_count(key, rest, line)?)?,
            "xdom" => xdom.push(Entry {
                line,
                value: parse_bound(key, rest, line)?,
            }),
            "ydom" => ydom.push(Entry {
                line,
                value: parse_bound(key, rest, line)?,
            }),
            "objective" | "constraint" => {
                let e = parse(rest).map_err(|e| InstanceError::at(line, format!("in `{key}`: {e}")))?;
                let slot = if key == "objective" {
                    &mut objective
                } else {
                    &mut constraint
                };
                set_once(slot, key, line, e)?;
            }
            other => return Err(InstanceError::at(line, format!("unknown key `{other}`"))),
        }
    }

    let missing = |key: &str| InstanceError::global(format!("missing required key `{key}`"));
    let xvars = xvars.ok_or_else(|| missing("xvars"))?.value;
    let yvars = yvars.ok_or_else(|| missing("yvars"))?.value;
    let objective = objective.ok_or_else(|| missing("objective"))?;
    let constraint = constraint.ok_or_else(|| missing("constraint"))?;
    let x_box = collect_box("x", xvars, xdom)?;
    let y_box = collect_box("y", yvars, ydom)?;

    use crate::expr::VarKind;
    for (label, e) in [("objective", &objective), ("constraint", &constraint)] {
        for (kind, prefix, count) in [(VarKind::X, "x", xvars), (VarKind::Y, "y", yvars)] {
            let top = e.value.max_index(kind);
            if top > count {
                return Err(InstanceError::at(
                    e.line,
                    format!("{label} uses undeclared variable {prefix}{top} ({prefix}vars is {count})"),
                ));
            }
        }
    }
    if objective.value.max_index(VarKind::Y) > 0 {
        return Err(InstanceError::at(objective.line, "objective must not use y variables"));
    }

    let name = name.map(|n| n.value).unwrap_or_else(|| "instance".to_string());
    SipInstance::new(name, objective.value, constraint.value, x_box, y_box)
        .map_err(|e| InstanceError::global(e.to_string()))
}

/// Serializes an instance in the format read by [`load_instance`].
pub fn to_file_text(inst: &SipInstance) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "name {}", inst.name());
    let _ = writeln!(out, "xvars {}", inst.x_box().dim());
    let _ = writeln!(out, "yvars {}", inst.y_box().dim());
    for (i, iv) in inst.x_box().dims().iter().enumerate() {
        let _ = writeln!(out, "xdom {} {} {}", i + 1, iv.lo(), iv.hi());
    }
    for (j, iv) in inst.y_box().dims().iter().enumerate() {
        let _ = writeln!(out, "ydom {} {} {}", j + 1, iv.lo(), iv.hi());
    }
    let _ = writeln!(out, "objective {}", inst.objective());
    let _ = writeln!(out, "constraint {}", inst.constraint());
    out
}

/// Formats with 17 significant digits, dropping trailing zeros, in the
/// manner of C's `%.17g`. Infinities print as `inf` / `-inf`.
pub fn format_g17(v: f64) -> String {
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return "0".into();
    }
    let sci = format!("{v:.16e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    let trim = |s: &str| -> String {
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s.to_string()
        }
    };
    if !(-5..17).contains(&exp) {
        format!("{}e{exp}", trim(mantissa))
    } else {
        trim(&format!("{:.*}", (16 - exp) as usize, v))
    }
}

fn opt_num(v: Option<f64>) -> String {
    v.map(format_g17).unwrap_or_default()
}

/// Renders the per-iteration trace as CSV.
///
/// Columns: `k, f_lbd, incumbent_value, x1..xN, oracle_status, y1..yM,
/// g_value, g_star_estimate`. `oracle_status` is `feasible`, `violation`,
/// or `lbd-infeasible` for an iteration whose lower bounding problem had no
/// feasible point.
pub fn write_trace(report: &SolveReport, inst: &SipInstance) -> String {
    let (nx, ny) = (inst.x_box().dim(), inst.y_box().dim());
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["k".to_string(), "f_lbd".into(), "incumbent_value".into()];
    header.extend((1..=nx).map(|i| format!("x{i}")));
    header.push("oracle_status".into());
    header.extend((1..=ny).map(|j| format!("y{j}")));
    header.push("g_value".into());
    header.push("g_star_estimate".into());
    w.write_record(&header).expect("in-memory write");

    for rec in &report.iterations {
        let mut row = vec![
            rec.k.to_string(),
            format_g17(rec.f_lbd),
            opt_num(rec.incumbent_value),
        ];
        match &rec.x_bar {
            Some(x) => row.extend(x.iter().map(|&v| format_g17(v))),
            None => row.extend(std::iter::repeat_n(String::new(), nx)),
        }
        match &rec.oracle {
            Some(OracleOutcome::Violation {
                y,
                g_value,
                g_star_estimate,
            }) => {
                row.push("violation".into());
                row.extend(y.iter().map(|&v| format_g17(v)));
                row.push(format_g17(*g_value));
                row.push(opt_num(*g_star_estimate));
            }
            Some(OracleOutcome::Feasible { certified_max }) => {
                row.push("feasible".into());
                row.extend(std::iter::repeat_n(String::new(), ny));
                row.push(String::new());
                row.push(format_g17(*certified_max));
            }
            None => {
                row.push("lbd-infeasible".into());
                row.extend(std::iter::repeat_n(String::new(), ny + 2));
            }
        }
        w.write_record(&row).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 csv")
}

pub fn write_trace_file(report: &SolveReport, inst: &SipInstance, path: &Path) -> Result<(), TraceError> {
    std::fs::write(path, write_trace(report, inst)).map_err(|source| TraceError {
        path: path.to_path_buf(),
        source,
    })
}

pub fn exit_code(status: SolveStatus) -> i32 {
    match status {
        SolveStatus::ConvergedOptimal | SolveStatus::InfeasibleSip => EXIT_DEFINITIVE,
        SolveStatus::MaxIterReached => EXIT_MAX_ITER,
        SolveStatus::SubsolverFailure => EXIT_FAILURE,
    }
}

#[derive(Debug, Parser)]
#[command(name = "siplb", version, about = "Lower bounds for semi-infinite programs by discretization")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the lower bounding procedure on an instance.
    Solve(SolveArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Builtin {
    Cex,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum OracleKind {
    Exact,
    Alpha,
    Scripted,
}

#[derive(Debug, clap::Args)]
struct SolveArgs {
    /// Instance file to solve.
    #[arg(long, conflicts_with = "builtin", required_unless_present = "builtin")]
    instance: Option<PathBuf>,
    /// Built-in instance to solve.
    #[arg(long, value_enum)]
    builtin: Option<Builtin>,
    #[arg(long, value_enum, default_value = "exact")]
    oracle: OracleKind,
    /// Fraction of the lower-level optimum the alpha oracle must reach, in (0, 1).
    #[arg(long)]
    alpha: Option<f64>,
    /// Scripted oracle map: row-major dim(Y) x dim(X) matrix entries, then the
    /// dim(Y) offset, comma separated. Defaults to the identity when dims match.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    map: Option<Vec<f64>>,
    /// Certified lower-level maximum at or below this counts as feasible [default: 1e-6]
    #[arg(long)]
    eps_feas: Option<f64>,
    /// Relative optimality tolerance of the global solves [default: 1e-6]
    #[arg(long)]
    eps_obj: Option<f64>,
    /// Iteration limit [default: 100]
    #[arg(long)]
    max_iter: Option<usize>,
    /// Write the per-iteration CSV trace here.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Print only the summary.
    #[arg(long)]
    quiet: bool,
}

/// Runs the command line with `args` (including the program name) and
/// returns the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => EXIT_USAGE,
            };
            let text = e.render().to_string();
            let _ = if code == 0 { out.write_all(text.as_bytes()) } else { err.write_all(text.as_bytes()) };
            return code;
        }
    };
    match cli.command {
        Command::Solve(args) => cmd_solve(args, out, err),
    }
}

fn usage(err: &mut dyn Write, msg: &str) -> i32 {
    let _ = writeln!(err, "error: {msg}");
    EXIT_USAGE
}

fn cmd_solve(args: SolveArgs, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let inst = match (&args.instance, args.builtin) {
        (_, Some(Builtin::Cex)) => builtin_counterexample(),
        (Some(path), None) => {
            let text = match std::fs::read_to_string(path) {
                Ok(t) => t,
                Err(e) => {
                    let _ = writeln!(err, "error: cannot read {}: {e}", path.display());
                    return EXIT_FAILURE;
                }
            };
            match load_instance(&text) {
                Ok(i) => i,
                Err(e) => {
                    let _ = writeln!(err, "error: {}: {e}", path.display());
                    return EXIT_FAILURE;
                }
            }
        }
        (None, None) => return usage(err, "one of --instance or --builtin is required"),
    };

    let oracle: Box<dyn LlpOracle> = match args.oracle {
        OracleKind::Exact => Box::new(ExactOracle),
        OracleKind::Alpha => {
            let Some(alpha) = args.alpha else {
                return usage(err, "--oracle alpha requires --alpha <value>");
            };
            match AlphaConfig::new(alpha) {
                Ok(c) => Box::new(AlphaOracle::new(c)),
                Err(e) => return usage(err, &e.to_string()),
            }
        }
        OracleKind::Scripted => {
            let (rows, cols) = (inst.y_box().dim(), inst.x_box().dim());
            let map = match &args.map {
                Some(entries) => AffineMap::from_flat(rows, cols, entries),
                None if rows == cols => Ok(AffineMap::identity(rows)),
                None => return usage(err, "--oracle scripted needs --map when dim(X) != dim(Y)"),
            };
            match map {
                Ok(m) => Box::new(ScriptedOracle::new(m)),
                Err(e) => return usage(err, &e.to_string()),
            }
        }
    };
    if args.alpha.is_some() && !matches!(args.oracle, OracleKind::Alpha) {
        return usage(err, "--alpha only applies to --oracle alpha");
    }
    if args.map.is_some() && !matches!(args.oracle, OracleKind::Scripted) {
        return usage(err, "--map only applies to --oracle scripted");
    }

    let defaults = SipConfig::default();
    let cfg = SipConfig {
        eps_feas: args.eps_feas.unwrap_or(defaults.eps_feas),
        max_iter: args.max_iter.unwrap_or(defaults.max_iter),
        opt: OptConfig {
            eps_obj: args.eps_obj.unwrap_or(defaults.opt.eps_obj),
            ..defaults.opt
        },
        ..defaults
    };
    if let Err(e) = cfg.validate() {
        return usage(err, &e.to_string());
    }

    let report = match run_lower_bounding(&inst, oracle.as_ref(), &cfg) {
        Ok(r) => r,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return EXIT_FAILURE;
        }
    };

    if !args.quiet {
        for rec in &report.iterations {
            let x = rec.x_bar.as_ref().map(|p| p.to_string()).unwrap_or_else(|| "-".into());
            let detail = match &rec.oracle {
                Some(OracleOutcome::Violation { y, g_value, .. }) => format!("violation y = {y}, g = {g_value}"),
                Some(OracleOutcome::Feasible { certified_max }) => {
                    format!("feasible, max g <= {}", format_g17(*certified_max))
                }
                None => "lower bounding problem infeasible".into(),
            };
            let _ = writeln!(out, "k = {:>3}  f_lbd = {:<24}  x = {x}  {detail}", rec.k, format_g17(rec.f_lbd));
        }
    }
    let _ = writeln!(out, "instance: {}", inst.name());
    let _ = writeln!(out, "oracle: {}", oracle.name());
    let _ = writeln!(out, "status: {}", report.status);
    let _ = writeln!(out, "iterations: {}", report.iterations.len());
    let _ = writeln!(out, "final lower bound: {}", format_g17(report.final_lower_bound));
    if let Some(p) = &report.optimal_point {
        let _ = writeln!(out, "optimal point: {p}");
    }
    if let Some(d) = &report.diagnostic {
        let _ = writeln!(out, "diagnostic: {d}");
    }

    if let Some(path) = &args.trace {
        if let Err(e) = write_trace_file(&report, &inst, path) {
            let _ = writeln!(err, "error: {e}");
            return EXIT_FAILURE;
        }
    }
    exit_code(report.status)
}
