//! `sumrules`: command-line driver for exact and hybrid spectral sum rules on Sᵈ.

use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde_json::{Map, Value};

use sphere_sumrules::density::DensitySpec;
use sphere_sumrules::greens::{green_spectral_regularized, GreenOrder, Regularization};
use sphere_sumrules::rayleigh_ritz::spectrum;
use sphere_sumrules::sumrules::{closed_form_reference, sum_rule, sum_rule_shifted, DEFAULT_ELL_CUT};
use sphere_sumrules::validate::run_suite;
use sphere_sumrules::weyl::{delta, fit_delta, hybrid_sum_rule, DeltaFit};
use sphere_sumrules::Error;

#[derive(Parser)]
#[command(name = "sumrules", version, about = "Spectral sum rules for the weighted Laplacian on the d-sphere")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Exact sum rules from the coefficient-space engine, with closed-form references.
    Exact(ExactArgs),
    /// Rayleigh–Ritz partial sums plus a Weyl tail, compared with the exact value.
    Hybrid(HybridArgs),
    /// Scan of the uniform-sphere Weyl tail discrepancy over ℓ_max.
    Delta(DeltaArgs),
    /// Truncated Rayleigh–Ritz spectrum.
    Spectrum(SpectrumArgs),
    /// Tabulate an iterated Green's function against the angle.
    Green(GreenArgs),
    /// Run the cross-module invariant suite.
    Validate(ValidateArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Args)]
struct Output {
    /// Write to this file instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
}

#[derive(Args)]
struct DensityArgs {
    /// Coefficient of Y_{1,0}: a value or an inclusive range start:stop[:step].
    #[arg(long, conflicts_with = "coeffs", allow_hyphen_values = true)]
    kappa: Option<String>,
    /// JSON list of {ell, m, re, im} density coefficients.
    #[arg(long)]
    coeffs: Option<PathBuf>,
}

#[derive(Args)]
struct ExactArgs {
    #[arg(long)]
    d: usize,
    #[arg(long)]
    p: usize,
    #[command(flatten)]
    density: DensityArgs,
    #[arg(long, default_value_t = DEFAULT_ELL_CUT)]
    ell_cut: usize,
    /// Comma-separated shifts; switches to the shifted trace Z(γ) and its renormalized part.
    #[arg(long, value_delimiter = ',')]
    gamma: Vec<f64>,
    #[command(flatten)]
    output: Output,
}

#[derive(Args)]
struct HybridArgs {
    #[arg(long)]
    d: usize,
    #[arg(long)]
    p: usize,
    #[command(flatten)]
    density: DensityArgs,
    #[arg(long)]
    lmax: usize,
    /// Fraction of the basis size kept from the Rayleigh–Ritz spectrum.
    #[arg(long, default_value_t = 0.5)]
    retain: f64,
    /// Cutoff of the exact engine used for the comparison column.
    #[arg(long, default_value_t = DEFAULT_ELL_CUT)]
    ell_cut: usize,
    #[command(flatten)]
    output: Output,
}

#[derive(Args)]
struct DeltaArgs {
    #[arg(long)]
    d: usize,
    #[arg(long)]
    s: usize,
    /// ℓ_max values: a value or an inclusive range start:stop[:step].
    #[arg(long)]
    lmax: String,
    /// Fit a/(1 + bℓ²)^c to the scan.
    #[arg(long)]
    fit: bool,
    #[command(flatten)]
    output: Output,
}

#[derive(Args)]
struct SpectrumArgs {
    #[arg(long)]
    d: usize,
    #[command(flatten)]
    density: DensityArgs,
    #[arg(long)]
    lmax: usize,
    #[command(flatten)]
    output: Output,
}

#[derive(Args)]
struct GreenArgs {
    #[arg(long)]
    d: usize,
    /// Iteration order; the spectral weight is 1/λ^{q+1}.
    #[arg(long, alias = "p")]
    q: usize,
    /// Angles in radians: a value or an inclusive range start:stop[:step].
    #[arg(long)]
    theta: String,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long, default_value_t = 100_000)]
    ell_cut: usize,
    /// Abel-regularize series that do not converge absolutely.
    #[arg(long)]
    abel: bool,
    #[command(flatten)]
    output: Output,
}

#[derive(Args)]
struct ValidateArgs {
    #[arg(long)]
    module: Option<String>,
    /// Override every per-check tolerance.
    #[arg(long)]
    tolerance: Option<f64>,
    #[command(flatten)]
    output: Output,
}

/// Failure of a run, mapped to the process exit code.
enum Failure {
    Input(String),
    Numerical(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_numerical() {
            Failure::Numerical(e.to_string())
        } else {
            Failure::Input(e.to_string())
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Input(e.to_string())
    }
}

type Run<T> = std::result::Result<T, Failure>;

#[derive(Clone)]
enum Cell {
    Int(u128),
    Float(f64),
    Text(String),
    Flag(bool),
    Empty,
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            Cell::Float(v) => format!("{v:.16e}"),
            Cell::Text(s) => s.clone(),
            Cell::Flag(b) => b.to_string(),
            Cell::Empty => String::new(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Int(v) => Value::from(*v as u64),
            Cell::Float(v) => serde_json::Number::from_f64(*v).map_or(Value::Null, Value::Number),
            Cell::Text(s) => Value::from(s.as_str()),
            Cell::Flag(b) => Value::from(*b),
            Cell::Empty => Value::Null,
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as u128)
    }
}

impl From<u128> for Cell {
    fn from(v: u128) -> Self {
        Cell::Int(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<Option<f64>> for Cell {
    fn from(v: Option<f64>) -> Self {
        v.map_or(Cell::Empty, Cell::Float)
    }
}

struct Table {
    headers: Vec<&'static str>,
    rows: Vec<Vec<Cell>>,
}

impl Table {
    fn render(&self, format: Format, extra: Option<(&str, Value)>) -> String {
        match format {
            Format::Csv => {
                let mut w = csv::Writer::from_writer(Vec::new());
                w.write_record(&self.headers).expect("in-memory write");
                for row in &self.rows {
                    w.write_record(row.iter().map(Cell::csv)).expect("in-memory write");
                }
                String::from_utf8(w.into_inner().expect("in-memory flush")).expect("fields are UTF-8")
            }
            Format::Json => {
                let rows: Vec<Value> = self
                    .rows
                    .iter()
                    .map(|row| {
                        let obj: Map<String, Value> =
                            self.headers.iter().zip(row).map(|(h, c)| (h.to_string(), c.json())).collect();
                        Value::Object(obj)
                    })
                    .collect();
                let doc = match extra {
                    Some((key, value)) => {
                        let mut obj = Map::new();
                        obj.insert("rows".into(), Value::Array(rows));
                        obj.insert(key.into(), value);
                        Value::Object(obj)
                    }
                    None => Value::Array(rows),
                };
                let mut s = serde_json::to_string_pretty(&doc).expect("plain data serializes");
                s.push('\n');
                s
            }
        }
    }
}

fn emit(output: &Output, text: &str) -> Run<()> {
    match &output.out {
        Some(path) => fs::write(path, text)?,
        None => io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(())
}

/// Inclusive `start:stop[:step]` grid; a bare number is a single point.
fn parse_range(text: &str, default_step: f64) -> Run<Vec<f64>> {
    let bad = || Failure::Input(format!("malformed range '{text}'; expected start:stop[:step] or a number"));
    let parts: Vec<f64> = text
        .split(':')
        .map(|t| t.trim().parse::<f64>().map_err(|_| bad()))
        .collect::<Run<_>>()?;
    let (start, stop, step) = match parts.as_slice() {
        [v] => return Ok(vec![*v]),
        [a, b] => (*a, *b, default_step),
        [a, b, c] => (*a, *b, *c),
        _ => return Err(bad()),
    };
    if !(step > 0.0) || !start.is_finite() || !stop.is_finite() || stop < start {
        return Err(Failure::Input(format!("range '{text}' needs start <= stop and a positive step")));
    }
    let n = ((stop - start) / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|i| start + i as f64 * step).collect())
}

fn parse_int_range(text: &str) -> Run<Vec<usize>> {
    parse_range(text, 1.0)?
        .into_iter()
        .map(|v| {
            if v >= 0.0 && v.fract() == 0.0 {
                Ok(v as usize)
            } else {
                Err(Failure::Input(format!("'{text}' must contain non-negative integers only")))
            }
        })
        .collect()
}

/// One density per sweep point, paired with its κ when it has one.
fn densities(d: usize, args: &DensityArgs) -> Run<Vec<(Option<f64>, DensitySpec)>> {
    match (&args.kappa, &args.coeffs) {
        (Some(k), None) => parse_range(k, 0.1)?
            .into_iter()
            .map(|k| Ok((Some(k), DensitySpec::linear(d, k)?)))
            .collect(),
        (None, Some(path)) => {
            let text = fs::read_to_string(path)
                .map_err(|e| Failure::Input(format!("cannot read {}: {e}", path.display())))?;
            Ok(vec![(None, DensitySpec::from_json(d, &text)?)])
        }
        (None, None) => Ok(vec![(Some(0.0), DensitySpec::uniform(d)?)]),
        (Some(_), Some(_)) => Err(Failure::Input("--kappa and --coeffs are mutually exclusive".into())),
    }
}

/// Evaluate sweep points on the worker pool, keeping sweep order.
fn sweep<T: Sync, R: Send>(points: &[T], f: impl Fn(&T) -> Run<R> + Sync + Send) -> Run<Vec<R>> {
    points.par_iter().map(f).collect::<Vec<_>>().into_iter().collect()
}

fn reference(d: usize, p: usize, kappa: Option<f64>) -> Option<f64> {
    kappa.and_then(|k| closed_form_reference(d, p, k).ok())
}

fn cmd_exact(args: &ExactArgs) -> Run<()> {
    let points = densities(args.d, &args.density)?;
    let table = if args.gamma.is_empty() {
        let rows = sweep(&points, |(kappa, rho)| {
            let r = sum_rule(args.d, args.p, rho, args.ell_cut)?;
            let reference = reference(args.d, args.p, *kappa);
            Ok(vec![
                args.d.into(),
                args.p.into(),
                (*kappa).into(),
                r.value.into(),
                reference.into(),
                reference.map(|c| (r.value - c).abs()).into(),
                r.trunc_error.into(),
                r.provenance.to_string().as_str().into(),
                r.ell_cut.into(),
            ])
        })?;
        Table {
            headers: vec!["d", "p", "kappa", "value", "reference", "abs_diff", "trunc_error", "provenance", "ell_cut"],
            rows,
        }
    } else {
        let grid: Vec<_> = points.iter().flat_map(|pt| args.gamma.iter().map(move |&g| (pt, g))).collect();
        let rows = sweep(&grid, |((kappa, rho), gamma)| {
            let r = sum_rule_shifted(args.d, args.p, rho, *gamma, args.ell_cut)?;
            let reference = reference(args.d, args.p, *kappa);
            Ok(vec![
                args.d.into(),
                args.p.into(),
                (*kappa).into(),
                r.gamma.into(),
                r.z.into(),
                r.z_renorm.into(),
                reference.into(),
                reference.map(|c| (r.z_renorm - c).abs()).into(),
                r.trunc_error.into(),
                "exact-engine".into(),
                args.ell_cut.into(),
            ])
        })?;
        Table {
            headers: vec![
                "d", "p", "kappa", "gamma", "z", "z_renorm", "reference", "abs_diff", "trunc_error", "provenance",
                "ell_cut",
            ],
            rows,
        }
    };
    emit(&args.output, &table.render(args.output.format, None))
}

fn cmd_hybrid(args: &HybridArgs) -> Run<()> {
    let points = densities(args.d, &args.density)?;
    let rows = sweep(&points, |(kappa, rho)| {
        let h = hybrid_sum_rule(args.d, args.p, rho, args.lmax, args.retain)?;
        let e = sum_rule(args.d, args.p, rho, args.ell_cut)?;
        Ok(vec![
            args.d.into(),
            args.p.into(),
            (*kappa).into(),
            h.value.into(),
            e.value.into(),
            (h.value - e.value).into(),
            args.lmax.into(),
            args.retain.into(),
            e.ell_cut.into(),
            h.provenance.to_string().as_str().into(),
        ])
    })?;
    let table = Table {
        headers: vec!["d", "p", "kappa", "hybrid", "exact", "difference", "ell_max", "retain", "ell_cut", "provenance"],
        rows,
    };
    emit(&args.output, &table.render(args.output.format, None))
}

fn fit_json(fit: &DeltaFit) -> Value {
    serde_json::json!({
        "a": fit.a,
        "b": fit.b,
        "c": fit.c,
        "residual": fit.residual,
        "n_samples": fit.n_samples,
        "iterations": fit.iterations,
        "condition": fit.condition,
        "max_correlation": fit.max_correlation,
        "ill_conditioned": fit.ill_conditioned,
    })
}

fn cmd_delta(args: &DeltaArgs) -> Run<()> {
    let ells = parse_int_range(&args.lmax)?;
    let samples = sweep(&ells, |&l| Ok(delta(args.d, l, args.s)?))?;
    let fit = if args.fit { Some(fit_delta(&samples)?) } else { None };
    let rows = samples
        .iter()
        .map(|s| {
            vec![
                s.d.into(),
                s.s.into(),
                s.ell_max.into(),
                s.delta.into(),
                fit.as_ref().map(|f| f.eval(s.ell_max as f64)).into(),
                s.exact_tail.into(),
                s.weyl_tail.into(),
            ]
        })
        .collect();
    let table = Table { headers: vec!["d", "s", "ell_max", "delta", "fit_value", "exact_tail", "weyl_tail"], rows };
    let report = fit.as_ref().map(fit_json);
    match args.output.format {
        Format::Json => emit(&args.output, &table.render(Format::Json, report.map(|r| ("fit", r)))),
        Format::Csv => {
            emit(&args.output, &table.render(Format::Csv, None))?;
            if let Some(r) = report {
                eprintln!("fit: {r}");
            }
            Ok(())
        }
    }
}

fn cmd_spectrum(args: &SpectrumArgs) -> Run<()> {
    let points = densities(args.d, &args.density)?;
    let [(_, rho)] = points.as_slice() else {
        return Err(Failure::Input("spectrum takes a single kappa value, not a range".into()));
    };
    let spec = spectrum(args.d, args.lmax, rho)?;
    let rows = spec
        .levels
        .iter()
        .enumerate()
        .map(|(n, l)| {
            vec![
                n.into(),
                l.value.into(),
                l.multiplicity.into(),
                l.block.into(),
                Cell::Flag(n == spec.zero_mode),
                spec.ell_max.into(),
                "rayleigh-ritz".into(),
            ]
        })
        .collect();
    let table = Table {
        headers: vec!["n", "E_n", "multiplicity", "block_m2", "zero_mode", "ell_max", "provenance"],
        rows,
    };
    emit(&args.output, &table.render(args.output.format, None))
}

fn cmd_green(args: &GreenArgs) -> Run<()> {
    let order = GreenOrder::new(args.d, args.q, args.gamma)?;
    let thetas = parse_range(&args.theta, 0.1)?;
    if let Some(t) = thetas.iter().find(|t| !(0.0..=std::f64::consts::PI).contains(*t)) {
        return Err(Failure::Input(format!("angle {t} lies outside [0, pi]")));
    }
    let reg = if args.abel { Regularization::Abel } else { Regularization::None };
    let rows = sweep(&thetas, |&t| {
        let g = green_spectral_regularized(&order, t.cos(), args.ell_cut, reg)?;
        Ok(vec![
            t.into(),
            g.value.into(),
            g.tail_bound.into(),
            args.ell_cut.into(),
            if args.abel { "abel" } else { "spectral" }.into(),
        ])
    })?;
    let table = Table { headers: vec!["theta", "value", "tail_bound", "ell_cut", "provenance"], rows };
    emit(&args.output, &table.render(args.output.format, None))
}

/// Returns whether every invariant passed.
fn cmd_validate(args: &ValidateArgs) -> Run<bool> {
    let outcomes = run_suite(args.module.as_deref(), args.tolerance)?;
    let rows = outcomes
        .iter()
        .map(|o| {
            vec![
                o.module.into(),
                o.name.into(),
                o.residual.into(),
                o.tolerance.into(),
                Cell::Flag(o.passed),
                o.error.as_deref().map_or(Cell::Empty, Cell::from),
            ]
        })
        .collect();
    let table = Table { headers: vec!["module", "check", "residual", "tolerance", "passed", "error"], rows };
    emit(&args.output, &table.render(args.output.format, None))?;
    Ok(outcomes.iter().all(|o| o.passed))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match &cli.command {
        Command::Exact(a) => cmd_exact(a),
        Command::Hybrid(a) => cmd_hybrid(a),
        Command::Delta(a) => cmd_delta(a),
        Command::Spectrum(a) => cmd_spectrum(a),
        Command::Green(a) => cmd_green(a),
        Command::Validate(a) => match cmd_validate(a) {
            Ok(true) => Ok(()),
            Ok(false) => Err(Failure::Input("one or more invariants failed".into())),
            Err(e) => Err(e),
        },
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Numerical(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
