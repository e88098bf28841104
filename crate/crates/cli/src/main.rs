//! Command-line front end: classify models, dump harmonic sequences, solve
//! Poisson equations, build duals, run the diffusion criteria, query the
//! eigenvalue oracle, and replay the built-in example gallery.
//!
//! Exit codes: 0 = analysis completed (Inconclusive included), 2 = bad
//! input, 3 = internal consistency failure, 4 = required convergence not
//! reached.

use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use specdisc::continuous::criteria::{
    criteria_halfline, criteria_wholeline, ContinuousOptions, HarmonicFn,
};
use specdisc::continuous::picard::{picard_solve, PicardOptions, PicardSolution};
use specdisc::continuous::{ContinuousError, DiffusionModelFile, Domain};
use specdisc::criteria::{classify, FitOptions, Mode};
use specdisc::duality::{dual_model, duality_identities_check, similarity_check};
use specdisc::expr::Expr;
use specdisc::gallery;
use specdisc::harmonic;
use specdisc::model::{DiscreteModel, DiscreteModelFile};
use specdisc::oracle::{self, Boundary};
use specdisc::single_birth::{poisson_solve, LowerTriModel, LowerTriModelFile, SingleBirthError};

#[derive(Parser)]
#[command(
    name = "specdisc",
    about = "discrete-spectrum criteria for 1D operators",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// write output here instead of stdout
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    /// reserved; all numerics are deterministic
    #[arg(long, global = true, hide = true)]
    seed: Option<u64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Min,
    Max,
    Both,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Mode {
        match m {
            ModeArg::Min => Mode::Min,
            ModeArg::Max => Mode::Max,
            ModeArg::Both => Mode::Both,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Json,
    Csv,
}

#[derive(Clone, Copy, ValueEnum)]
enum BoundaryArg {
    /// Dirichlet past the truncation (minimal form)
    Min,
    /// free boundary at the truncation (maximal form)
    Max,
}

#[derive(Subcommand)]
enum Command {
    /// Classify a discrete model by the three-way criterion
    Analyze(AnalyzeArgs),
    /// Emit n, r_n, log h_n and the fixed-point bound as CSV
    Harmonic(HarmonicArgs),
    /// Solve the Poisson equation on a lower-triangle model
    Poisson(PoissonArgs),
    /// Emit the dual model and the duality identity report
    Dual(DualArgs),
    /// Run the half-line or whole-line diffusion criteria
    Continuous(ContinuousArgs),
    /// Truncated-matrix eigenvalue oracle
    Oracle(OracleArgs),
    /// Run the built-in example gallery against its expected verdicts
    Examples(ExamplesArgs),
}

#[derive(Args)]
struct AnalyzeArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long, value_enum, default_value = "min")]
    mode: ModeArg,
    #[arg(long, default_value_t = 100_000)]
    n_max: usize,
    /// slope threshold separating vanishing from flat products
    #[arg(long, default_value_t = 0.05)]
    delta: f64,
    #[arg(long, value_enum, default_value = "json")]
    format: FormatArg,
}

#[derive(Args)]
struct HarmonicArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long, default_value_t = 1000)]
    n_max: usize,
}

#[derive(Args)]
struct PoissonArgs {
    #[arg(long)]
    model: PathBuf,
    /// right-hand side: expression in n, or @file with a JSON array
    #[arg(long, default_value = "0")]
    f: String,
    #[arg(long, default_value_t = 1.0)]
    g0: f64,
    #[arg(long, default_value_t = 100)]
    n_max: usize,
}

#[derive(Args)]
struct DualArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long, default_value_t = 10_000)]
    n_max: usize,
    /// truncation size for the matrix similarity check
    #[arg(long, default_value_t = 50)]
    similarity_n: usize,
}

#[derive(Args)]
struct ContinuousArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long, value_enum, default_value = "min")]
    mode: ModeArg,
    #[arg(long, default_value_t = 50.0)]
    x_max: f64,
    /// harmonic function: an expression in x, "1", or "picard"
    #[arg(long, default_value = "picard")]
    h: String,
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    #[arg(long, default_value_t = 300)]
    max_iter: usize,
    #[arg(long, default_value_t = 1.0)]
    gamma0: f64,
    #[arg(long, default_value_t = 0.0)]
    gamma1: f64,
    /// Picard interval half-width (defaults to 2.2 * x_max)
    #[arg(long)]
    picard_span: Option<f64>,
}

#[derive(Args)]
struct OracleArgs {
    #[arg(long)]
    model: PathBuf,
    /// comma-separated truncation sizes
    #[arg(long, default_value = "100,200,400")]
    truncations: String,
    #[arg(long, default_value_t = 10)]
    num_eigs: usize,
    #[arg(long, value_enum, default_value = "min")]
    boundary: BoundaryArg,
    /// also count eigenvalues below this level per truncation
    #[arg(long)]
    lambda: Option<f64>,
}

#[derive(Args)]
struct ExamplesArgs {
    /// run everything (default)
    #[arg(long, default_value_t = true)]
    all: bool,
    /// run only entries whose name contains this substring
    #[arg(long)]
    name: Option<String>,
}

enum CliError {
    Input(String),
    Internal(String),
    NonConvergence(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Input(_) => 2,
            CliError::Internal(_) => 3,
            CliError::NonConvergence(_) => 4,
        }
    }
    fn message(&self) -> &str {
        match self {
            CliError::Input(m) | CliError::Internal(m) | CliError::NonConvergence(m) => m,
        }
    }
}

fn input<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Input(e.to_string())
}

fn continuous_err(e: ContinuousError) -> CliError {
    match e {
        ContinuousError::NonConverged { .. } => CliError::NonConvergence(e.to_string()),
        ContinuousError::Quad(specdisc::continuous::quad::QuadError::NonConvergent { .. }) => {
            CliError::NonConvergence(e.to_string())
        }
        other => CliError::Input(other.to_string()),
    }
}

fn read_discrete(path: &PathBuf) -> Result<DiscreteModel, CliError> {
    let text = fs::read_to_string(path).map_err(input)?;
    let file = DiscreteModelFile::from_json(&text).map_err(input)?;
    let model = file.to_model().map_err(input)?;
    let report = model.validate(200);
    if !report.is_valid() {
        let v = &report.violations[0];
        return Err(CliError::Input(format!(
            "model invalid at {}[{}]: {}",
            v.field, v.index, v.message
        )));
    }
    Ok(model)
}

fn emit(out: &Option<PathBuf>, body: &str) -> Result<(), CliError> {
    match out {
        Some(path) => fs::write(path, body).map_err(|e| CliError::Internal(e.to_string())),
        None => {
            if body.ends_with('\n') {
                print!("{body}");
            } else {
                println!("{body}");
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}

fn run(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Analyze(args) => cmd_analyze(cli, args),
        Command::Harmonic(args) => cmd_harmonic(cli, args),
        Command::Poisson(args) => cmd_poisson(cli, args),
        Command::Dual(args) => cmd_dual(cli, args),
        Command::Continuous(args) => cmd_continuous(cli, args),
        Command::Oracle(args) => cmd_oracle(cli, args),
        Command::Examples(args) => cmd_examples(cli, args),
    }
}

fn cmd_analyze(cli: &Cli, args: &AnalyzeArgs) -> Result<(), CliError> {
    let model = read_discrete(&args.model)?;
    let opts = FitOptions {
        delta: args.delta,
        ..Default::default()
    };
    let report = classify(&model, args.mode.into(), args.n_max, &opts)
        .map_err(|e| CliError::Internal(e.to_string()))?;
    let body = match args.format {
        FormatArg::Json => serde_json::to_string_pretty(&report).unwrap(),
        FormatArg::Csv => {
            let mut s = String::from("n,log_s,s\n");
            if let Some(side) = report.min_side.as_ref().or(report.max_side.as_ref()) {
                for p in &side.trace {
                    writeln!(s, "{},{:.12e},{:.12e}", p.n, p.log_s, p.s).unwrap();
                }
            }
            s
        }
    };
    emit(&cli.output, &body)
}

fn cmd_harmonic(cli: &Cli, args: &HarmonicArgs) -> Result<(), CliError> {
    let model = read_discrete(&args.model)?;
    let seq =
        harmonic::compute(&model, args.n_max).map_err(|e| CliError::Internal(e.to_string()))?;
    let mut s = String::from("n,r_n,log_h_n,bound_b01,bound_applicable\n");
    for n in 0..=args.n_max {
        let fp = harmonic::r_fixed_point_bound(&model, n)
            .map_err(|e| CliError::Internal(e.to_string()))?;
        writeln!(
            s,
            "{},{:.15e},{:.15e},{},{}",
            n,
            seq.r[n],
            seq.log_h[n],
            fp.value.map_or(String::new(), |v| format!("{v:.15e}")),
            fp.applicable
        )
        .unwrap();
    }
    emit(&cli.output, &s)
}

fn cmd_poisson(cli: &Cli, args: &PoissonArgs) -> Result<(), CliError> {
    let text = fs::read_to_string(&args.model).map_err(input)?;
    let kind: serde_json::Value = serde_json::from_str(&text).map_err(input)?;
    let model: LowerTriModel = match kind.get("kind").and_then(|k| k.as_str()) {
        Some("lower") => LowerTriModelFile::from_json(&text)
            .and_then(|f| f.to_model())
            .map_err(input)?,
        Some("discrete") => {
            let m = read_discrete(&args.model)?;
            LowerTriModel::from_discrete(&m, args.n_max + 1).map_err(input)?
        }
        other => {
            return Err(CliError::Input(format!(
                "unsupported model kind {other:?} for poisson"
            )))
        }
    };
    let n_max = args.n_max.min(model.len().saturating_sub(1));
    let f_vals: Vec<f64> = if let Some(path) = args.f.strip_prefix('@') {
        let text = fs::read_to_string(path).map_err(input)?;
        serde_json::from_str(&text).map_err(input)?
    } else {
        let expr = Expr::parse(&args.f).map_err(input)?;
        (0..n_max).map(|k| expr.eval(k as f64)).collect()
    };
    let g = poisson_solve(&model, &f_vals, args.g0, n_max).map_err(|e| match e {
        SingleBirthError::ResidualCheck { .. } => CliError::Internal(e.to_string()),
        other => CliError::Input(other.to_string()),
    })?;
    let mut s = String::from("n,g_n\n");
    for (n, v) in g.iter().enumerate() {
        writeln!(s, "{n},{v:.15e}").unwrap();
    }
    emit(&cli.output, &s)
}

fn cmd_dual(cli: &Cli, args: &DualArgs) -> Result<(), CliError> {
    let model = read_discrete(&args.model)?;
    let pair = dual_model(&model, 200).map_err(input)?;
    let identities = duality_identities_check(&pair, args.n_max)
        .map_err(|e| CliError::Internal(e.to_string()))?;
    let similarity =
        similarity_check(&pair, args.similarity_n).map_err(|e| CliError::Internal(e.to_string()))?;
    let n_emit = 64usize;
    let collect = |f: &dyn Fn(usize) -> Result<f64, specdisc::model::ModelError>| {
        (0..n_emit)
            .map(f)
            .collect::<Result<Vec<f64>, _>>()
            .map_err(|e| CliError::Internal(e.to_string()))
    };
    let a_star = collect(&|i| pair.dual.a(i))?;
    let b_star = collect(&|i| pair.dual.b(i))?;
    let body = serde_json::to_string_pretty(&serde_json::json!({
        "dual": {
            "kind": "discrete",
            "a": a_star,
            "b": b_star,
            "c": "0",
            "extension": "error",
            "note": format!("first {n_emit} dual rates; a*_0 = {}", pair.a_star_0),
        },
        "identities": identities,
        "similarity": similarity,
    }))
    .unwrap();
    emit(&cli.output, &body)
}

fn cmd_continuous(cli: &Cli, args: &ContinuousArgs) -> Result<(), CliError> {
    let text = fs::read_to_string(&args.model).map_err(input)?;
    let file = DiffusionModelFile::from_json(&text).map_err(input)?;
    let model = file.to_model().map_err(input)?;
    let span = args.picard_span.unwrap_or(2.2 * args.x_max);
    let interval = match model.domain {
        Domain::HalfLine => (0.0, span),
        Domain::WholeLine => (-span, span),
    };
    model.validate(interval, 400).map_err(input)?;
    let opts = ContinuousOptions::default();
    let mut sol: Option<PicardSolution> = None;
    let mut h_expr: Option<Expr> = None;
    if args.h == "picard" {
        let popts = PicardOptions {
            tol: args.tol,
            max_iter: args.max_iter,
            n_cells: 600,
        };
        sol = Some(
            picard_solve(&model, args.gamma0, args.gamma1, interval, &popts)
                .map_err(continuous_err)?,
        );
    } else if args.h != "1" {
        h_expr = Some(Expr::parse(&args.h).map_err(input)?);
    }
    let hf = match (&sol, &h_expr) {
        (Some(s), _) => HarmonicFn::Picard(s),
        (None, Some(e)) => HarmonicFn::Expr(e),
        (None, None) => HarmonicFn::One,
    };
    let report = match model.domain {
        Domain::HalfLine => criteria_halfline(&model, &hf, args.mode.into(), args.x_max, &opts),
        Domain::WholeLine => criteria_wholeline(&model, &hf, args.mode.into(), args.x_max, &opts),
    }
    .map_err(continuous_err)?;
    let mut body = serde_json::to_value(&report).unwrap();
    if let Some(s) = &sol {
        body["picard"] = serde_json::json!({
            "iterations_used": s.iterations_used,
            "sup_norm_gap": s.sup_norm_gap,
            "monotone_nondecreasing": s.monotone_nondecreasing,
            "h_sign_changes": s.sign_changes(),
        });
    }
    emit(&cli.output, &serde_json::to_string_pretty(&body).unwrap())
}

fn cmd_oracle(cli: &Cli, args: &OracleArgs) -> Result<(), CliError> {
    let model = read_discrete(&args.model)?;
    let sizes: Vec<usize> = args
        .truncations
        .split(',')
        .map(|t| t.trim().parse::<usize>().map_err(input))
        .collect::<Result<_, _>>()?;
    let boundary = match args.boundary {
        BoundaryArg::Min => Boundary::DirichletAtN,
        BoundaryArg::Max => Boundary::FreeAtN,
    };
    let mut s = String::from("N,k,lambda_k\n");
    for &n in &sizes {
        let t = oracle::truncate_symmetric(&model, n, boundary)
            .map_err(|e| CliError::Internal(e.to_string()))?;
        for (k, e) in oracle::low_eigs(&t, args.num_eigs).iter().enumerate() {
            writeln!(s, "{n},{k},{e:.12e}").unwrap();
        }
    }
    if let Some(lambda) = args.lambda {
        let g = oracle::eig_count_growth(&model, lambda, &sizes, boundary)
            .map_err(|e| CliError::Internal(e.to_string()))?;
        writeln!(s, "\nN,count_below_{lambda}").unwrap();
        for (n, c) in &g.counts {
            writeln!(s, "{n},{c}").unwrap();
        }
        writeln!(s, "stabilized,{}", g.stabilized).unwrap();
    }
    emit(&cli.output, &s)
}

fn cmd_examples(cli: &Cli, args: &ExamplesArgs) -> Result<(), CliError> {
    let mut s = String::new();
    writeln!(
        s,
        "{:<18} {:<46} {:<26} {:<14} result",
        "name", "description", "expected", "got"
    )
    .unwrap();
    let mut failures = 0;
    for entry in gallery::gallery() {
        if let Some(filter) = &args.name {
            if !entry.name.contains(filter.as_str()) {
                continue;
            }
        }
        match gallery::run_entry(&entry) {
            Ok(out) => {
                let expected = out
                    .expected
                    .iter()
                    .map(|v| format!("{v:?}"))
                    .collect::<Vec<_>>()
                    .join("|");
                writeln!(
                    s,
                    "{:<18} {:<46} {:<26} {:<14} {}",
                    out.name,
                    out.description,
                    expected,
                    format!("{:?}", out.got),
                    if out.pass { "pass" } else { "FAIL" }
                )
                .unwrap();
                if !out.pass {
                    failures += 1;
                }
            }
            Err(e) => {
                writeln!(s, "{:<18} error: {e}", entry.name).unwrap();
                failures += 1;
            }
        }
    }
    emit(&cli.output, &s)?;
    if failures > 0 {
        return Err(CliError::Internal(format!(
            "{failures} gallery entries disagreed with their expected verdicts"
        )));
    }
    Ok(())
}
