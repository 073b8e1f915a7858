use std::fs;
use std::io::{self, Read, Write};
use std::process::ExitCode;

use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use lsgeom::charts::extract_chart;
use lsgeom::hankel::{analyze_system, mcmillan_degree};
use lsgeom::io::{self as jio, SystemInput};
use lsgeom::lsys::{distance, inner_product, norm, InnerProductMethod, Representation};
use lsgeom::metric::{metric_tensor, DerivativeMode, Parametrization, Quadrature};
use lsgeom::stochastic::StochasticMode;
use lsgeom::structure::{is_irreducible, noninvariance_demo};
use lsgeom::verify::{run_suite, Status, VerifyConfig, GROUPS};
use lsgeom::{Error, System};

const SCHEMA: &str = "\
INPUT SCHEMA (JSON, via --input PATH, --input - for stdin, or inline):
  arma    {\"kind\":\"arma\",\"A\":POLY,\"B\":POLY}
          POLY = {\"rows\":m,\"cols\":r,\"coeffs\":[C0,C1,...]}, C_k multiplies z^-k
  ss      {\"kind\":\"ss\",\"A\":MAT,\"B\":MAT,\"C\":MAT,\"D\":MAT}   (D optional, defaults to I)
  markov  {\"kind\":\"markov\",\"terms\":[H0,H1,...],\"decay_bound\":x}
  chart   {\"kind\":\"chart\",\"indices\":[n1,...],\"alpha\":[{\"i\":1,\"j\":1,\"k\":1,\"v\":x},...],\"K\":MAT}
  MAT is a row-major array of rows. Any system may add \"R\":MAT and \"r_coords\":bool
  (noise covariance, default I; append R's upper triangle to the coordinates).
  inner-product expects {\"left\":SYSTEM,\"right\":SYSTEM}.

EXIT CODES: 0 success, 1 verification failure, 2 input error, 3 numerical error.";

#[derive(Parser)]
#[command(name = "lsgeom", version, about = "Structural invariants and metric tensors of linear systems", after_help = SCHEMA)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// Input file, `-` for stdin, or inline JSON.
    #[arg(long, global = true)]
    input: Option<String>,
    /// Output file (stdout when absent).
    #[arg(long, global = true)]
    output: Option<String>,
    /// Initial quadrature node count (power of two, at most 65536).
    #[arg(long, global = true)]
    nodes: Option<usize>,
    /// Rank tolerance for `analyze`, quadrature tolerance for tensors.
    #[arg(long, global = true)]
    tol: Option<f64>,
    #[arg(long, global = true, default_value_t = 7)]
    seed: u64,
}

#[derive(Subcommand)]
enum Command {
    /// Stability, Markov head, Kronecker indices, McMillan degree, irreducibility.
    Analyze,
    /// Riemannian metric tensor of a system.
    Tensor(TensorArgs),
    /// Closed-form verification suite.
    VerifyPaper(VerifyArgs),
    /// Same transfer function as ARMA(0,q) and ARMA(q,0).
    DemoNoninvariance(DemoArgs),
    /// Time- and frequency-domain inner products of two systems.
    InnerProduct,
}

#[derive(Clone, Copy, ValueEnum)]
enum ParamKind {
    ArmaFull,
    SsChart,
    ArmaChart,
    SsEntries,
}

#[derive(Args)]
#[command(group(ArgGroup::new("kind").args(["det", "stoch"])))]
struct TensorArgs {
    #[arg(long, value_enum)]
    param: Option<ParamKind>,
    /// Deterministic tensor (default).
    #[arg(long)]
    det: bool,
    /// Stochastic tensor using the input's noise covariance.
    #[arg(long)]
    stoch: bool,
    /// analytic | numeric | one_sided_U | two_sided_T (repeatable).
    #[arg(long)]
    mode: Vec<String>,
}

#[derive(Args)]
struct VerifyArgs {
    /// Evaluate closed forms on an n×n grid in (−0.9, 0.9)².
    #[arg(long)]
    grid: Option<usize>,
    /// Run only these groups (repeatable).
    #[arg(long)]
    row: Vec<String>,
}

#[derive(Args)]
struct DemoArgs {
    /// Degree of the unimodular transfer function (default: 1, 2 and 3).
    #[arg(long)]
    q: Option<usize>,
}

enum Failure {
    Verify(String),
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

fn input_error(msg: impl Into<String>) -> Failure {
    Failure::Lib(Error::Input(msg.into()))
}

fn read_input(arg: &Option<String>) -> Result<String, Failure> {
    match arg.as_deref() {
        None | Some("-") => {
            let mut s = String::new();
            io::stdin().read_to_string(&mut s).map_err(|e| input_error(format!("cannot read stdin: {e}")))?;
            Ok(s)
        }
        Some(t) if t.trim_start().starts_with('{') => Ok(t.to_string()),
        Some(path) => fs::read_to_string(path).map_err(|e| input_error(format!("cannot read {path}: {e}"))),
    }
}

fn quadrature(c: &Common) -> Result<Quadrature<f64>, Failure> {
    let mut q = Quadrature::default();
    if let Some(n) = c.nodes {
        if !n.is_power_of_two() || n > q.max_nodes {
            return Err(input_error(format!("--nodes must be a power of two at most {}, got {n}", q.max_nodes)));
        }
        q.initial_nodes = n;
    }
    if let Some(t) = c.tol {
        if !(t > 0.0 && t < 1.0) {
            return Err(input_error(format!("--tol must lie in (0, 1), got {t}")));
        }
        q.rel_tol = t;
    }
    Ok(q)
}

fn emit(c: &Common, text: &str) -> Result<(), Failure> {
    match &c.output {
        Some(path) => fs::write(path, format!("{text}\n")).map_err(|e| input_error(format!("cannot write {path}: {e}"))),
        None => {
            let mut out = io::stdout().lock();
            writeln!(out, "{text}").map_err(|e| input_error(format!("cannot write stdout: {e}")))
        }
    }
}

fn emit_json(c: &Common, v: &Value) -> Result<(), Failure> {
    emit(c, &jio::to_json_string(v)?)
}

fn kind_name(s: &System) -> &'static str {
    match s.representation() {
        Representation::Arma { .. } => "arma",
        Representation::StateSpace { .. } => "ss",
        Representation::Markov { .. } => "markov",
    }
}

fn cmd_analyze(c: &Common) -> Result<(), Failure> {
    let inp = jio::parse_system(&read_input(&c.input)?)?;
    let s = &inp.system;
    if let Some(t) = c.tol {
        if t.is_nan() || t <= 0.0 {
            return Err(input_error("--tol must be positive"));
        }
    }
    let stab = s.is_stable()?;
    let head: Vec<Value> = s.markov_terms(6)?.iter().map(|h| json!(jio::matrix_to_json(h))).collect();
    // structure needs a convergent Hankel matrix; unstable systems get nulls
    let (hankel, degree, irreducibility) = if stab.stable {
        let h = analyze_system(s, c.tol)?;
        let irr = match s.as_arma() {
            Some((a, b)) => serde_json::to_value(is_irreducible(a, b, c.tol)?).unwrap_or(Value::Null),
            None => Value::Null,
        };
        (json!(jio::hankel_to_json(&h)), json!(mcmillan_degree(s, c.tol)?), irr)
    } else {
        (Value::Null, Value::Null, Value::Null)
    };
    emit_json(
        c,
        &json!({
            "kind": kind_name(s),
            "outputs": s.outputs(),
            "inputs": s.inputs(),
            "stability": { "stable": stab.stable, "radius": stab.radius, "marginal": stab.marginal },
            "markov_head": head,
            "hankel": hankel,
            "mcmillan_degree": degree,
            "irreducibility": irreducibility,
        }),
    )
}

fn parametrization(inp: &SystemInput, kind: Option<ParamKind>) -> Result<Parametrization<f64>, Failure> {
    let s = &inp.system;
    let kind = kind.unwrap_or(match (&inp.chart, s.representation()) {
        (Some(_), _) => ParamKind::SsChart,
        (None, Representation::Arma { .. }) => ParamKind::ArmaFull,
        (None, Representation::StateSpace { .. }) => ParamKind::SsEntries,
        (None, Representation::Markov { .. }) => ParamKind::SsChart,
    });
    let coords = || -> Result<_, Failure> {
        match &inp.chart {
            Some(c) => Ok(c.clone()),
            None => {
                let chart = lsgeom::charts::ChartId::new(analyze_system(s, None)?.indices)?;
                Ok(extract_chart(s, &chart, None)?)
            }
        }
    };
    Ok(match kind {
        ParamKind::ArmaFull => Parametrization::arma_full(s, None)?,
        ParamKind::SsEntries => Parametrization::ss_entries(s)?,
        ParamKind::SsChart => Parametrization::SsChart(coords()?),
        ParamKind::ArmaChart => Parametrization::ArmaChart(coords()?),
    })
}

fn cmd_tensor(c: &Common, t: &TensorArgs) -> Result<(), Failure> {
    let inp = jio::parse_system(&read_input(&c.input)?)?;
    let quad = quadrature(c)?;
    let mut derivative = DerivativeMode::Analytic;
    let mut smode = StochasticMode::TwoSidedT;
    let mut saw_stochastic_mode = false;
    for m in &t.mode {
        match m.as_str() {
            "analytic" => derivative = DerivativeMode::Analytic,
            "numeric" => derivative = DerivativeMode::Numeric,
            "one_sided_U" => (smode, saw_stochastic_mode) = (StochasticMode::OneSidedU, true),
            "two_sided_T" => (smode, saw_stochastic_mode) = (StochasticMode::TwoSidedT, true),
            other => return Err(input_error(format!("unknown --mode {other}"))),
        }
    }
    let stochastic = t.stoch || (saw_stochastic_mode && !t.det);
    let param = parametrization(&inp, t.param)?;
    let g = if stochastic {
        inp.stochastic()?.metric_tensor(&param, smode, derivative, &quad)?
    } else {
        metric_tensor(&param, derivative, &quad)?
    };
    emit_json(c, &serde_json::to_value(jio::tensor_to_json(&g)).unwrap_or(Value::Null))
}

fn cmd_verify(c: &Common, v: &VerifyArgs) -> Result<(), Failure> {
    if let Some(n) = v.grid {
        if n == 0 || n > 64 {
            return Err(input_error("--grid must lie in 1..=64"));
        }
    }
    for r in &v.row {
        if !GROUPS.iter().any(|g| g.eq_ignore_ascii_case(r)) {
            return Err(input_error(format!("unknown row {r}; known rows: {}", GROUPS.join(", "))));
        }
    }
    let cfg = VerifyConfig {
        grid: v.grid,
        rows: (!v.row.is_empty()).then(|| v.row.clone()),
        quadrature: quadrature(c)?,
        seed: c.seed,
    };
    let rep = run_suite(&cfg)?;
    let mut table = String::new();
    for r in &rep.rows {
        let status = match r.status {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Typo => "TYPO",
        };
        table.push_str(&format!(
            "{status}  {:<46} expected {:>22.15e}  computed {:>22.15e}  tol {:.0e}  err {:.2e}",
            r.name, r.expected, r.computed, r.tolerance, r.error
        ));
        if let Some(x) = r.corrected {
            table.push_str(&format!("  corrected {x:.15e}"));
        }
        table.push('\n');
    }
    table.push_str(&format!("{} passed, {} typo, {} failed", rep.passed, rep.typos, rep.failed));
    match &c.output {
        Some(_) => {
            emit_json(c, &serde_json::to_value(&rep).unwrap_or(Value::Null))?;
            println!("{table}");
        }
        None => println!("{table}"),
    }
    if rep.ok {
        Ok(())
    } else {
        let first = rep.rows.iter().find(|r| r.status == Status::Fail).map(|r| r.name.clone()).unwrap_or_default();
        Err(Failure::Verify(first))
    }
}

fn cmd_demo(c: &Common, d: &DemoArgs) -> Result<(), Failure> {
    let qs: Vec<usize> = match d.q {
        Some(0) => return Err(input_error("--q must be at least 1")),
        Some(q) => vec![q],
        None => vec![1, 2, 3],
    };
    let reports = qs
        .into_iter()
        .map(|q| Ok(serde_json::to_value(noninvariance_demo::<f64>(q, c.seed)?).unwrap_or(Value::Null)))
        .collect::<Result<Vec<_>, Failure>>()?;
    emit_json(c, &json!({ "seed": c.seed, "reports": reports }))
}

fn cmd_inner_product(c: &Common) -> Result<(), Failure> {
    let (left, right) = jio::parse_pair(&read_input(&c.input)?)?;
    let quad = quadrature(c)?;
    let time = inner_product(&left, &right, InnerProductMethod::Time, &quad)?;
    let freq = inner_product(&left, &right, InnerProductMethod::Frequency, &quad)?;
    emit_json(
        c,
        &json!({
            "time": time,
            "frequency": freq,
            "difference": (time - freq).abs(),
            "norm_left": norm(&left, InnerProductMethod::Frequency, &quad)?,
            "norm_right": norm(&right, InnerProductMethod::Frequency, &quad)?,
            "distance": distance(&left, &right, InnerProductMethod::Frequency, &quad)?,
        }),
    )
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let c = &cli.common;
    let res = match &cli.command {
        Command::Analyze => cmd_analyze(c),
        Command::Tensor(t) => cmd_tensor(c, t),
        Command::VerifyPaper(v) => cmd_verify(c, v),
        Command::DemoNoninvariance(d) => cmd_demo(c, d),
        Command::InnerProduct => cmd_inner_product(c),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Verify(row)) => {
            eprintln!("verification failed: {row}");
            ExitCode::from(1)
        }
        Err(Failure::Lib(e)) if e.is_input_error() => {
            eprintln!("{e}");
            ExitCode::from(2)
        }
        Err(Failure::Lib(e)) => {
            eprintln!("{e}");
            ExitCode::from(3)
        }
    }
}
