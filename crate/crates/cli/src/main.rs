//! `aqec`: precision bounds, optimal codes and oracle checks for noisy
//! Hamiltonian parameter estimation.

mod output;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use aqec_core::bound::solve_bound;
use aqec_core::code::CodeDocument;
use aqec_core::dephasing::{build_dephasing_model, dephasing_effective, DephasingSpec};
use aqec_core::linalg::CMatrix;
use aqec_core::model::NoiseModel;
use aqec_core::oracle::{default_dt, product_code_trotter, run_all};
use aqec_core::pipeline::{eta_sweep, run_biased, run_pipeline, PipelineOptions};
use aqec_core::Error;
use clap::{Parser, Subcommand};
use serde_json::json;

use output::{render, Field, Format, Row, Table};

#[derive(Debug, Parser)]
#[command(name = "aqec", version, about = "Standard-quantum-limit bounds and optimal approximate QEC codes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Tolerance of the bound solver.
    #[arg(long, global = true, default_value_t = 1e-8)]
    tol_sdp: f64,
    /// Relative rank cutoff.
    #[arg(long, global = true, default_value_t = 1e-9)]
    tol_rank: f64,
    /// Code perturbation strength.
    #[arg(long, global = true, default_value_t = 1e-3)]
    epsilon: f64,
    /// Support regularization; automatic when omitted.
    #[arg(long, global = true)]
    delta: Option<f64>,
    /// Noise bias ratio; overrides the model's value.
    #[arg(long, global = true)]
    eta: Option<f64>,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Where to write the command's document (dual data, code or report).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Minimal `4‖α‖` bound and its dual data.
    Bound { model: PathBuf },
    /// Full pipeline: bound, optimal code, recovery and effective channel.
    Code { model: PathBuf },
    /// Runs every brute-force oracle on the pipeline output.
    Verify { model: PathBuf },
    /// Leading-order bound for a biased model and an η sweep.
    Biased { model: PathBuf },
    /// Correlated-dephasing closed form, product code and pipeline check.
    Dephasing { spec: PathBuf },
}

#[derive(Debug)]
enum Failure {
    Core(Error),
    Io(String),
    OracleFailed(usize),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Core(Error::HlAchievable { .. }) => 2,
            Failure::Core(
                Error::Parse(_)
                | Error::Validation(_)
                | Error::Shape(_)
                | Error::Symmetry { .. }
                | Error::Size(_)
                | Error::Parameter(_)
                | Error::ZeroSignal
                | Error::StrongSpanViolation { .. },
            )
            | Failure::Io(_) => 3,
            Failure::Core(
                Error::Solver { .. } | Error::Infeasible { .. } | Error::Numeric(_) | Error::Spectrum { .. },
            ) => 4,
            Failure::Core(Error::Domain { .. }) | Failure::OracleFailed(_) => 1,
        }
    }

    fn message(&self) -> String {
        match self {
            Failure::Core(e) => e.to_string(),
            Failure::Io(m) => m.clone(),
            Failure::OracleFailed(n) => format!("{n} oracle check(s) failed"),
        }
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Io(format!("cannot read {}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|e| Failure::Io(format!("cannot write {}: {e}", path.display())))
}

fn load_model(path: &Path, eta: Option<f64>) -> Result<NoiseModel, Failure> {
    let model = NoiseModel::from_json(&read(path)?)?;
    match (eta, model.bias().cloned()) {
        (Some(eta), Some(b)) => Ok(model.make_biased(&b.strong, &b.weak, eta)?),
        (Some(_), None) => Err(Failure::Core(Error::Validation("--eta needs a model with a bias partition".into()))),
        (None, _) => Ok(model),
    }
}

fn options(cli: &Cli) -> PipelineOptions {
    PipelineOptions { tol_sdp: cli.tol_sdp, tol_rank: cli.tol_rank, epsilon: cli.epsilon, delta: cli.delta }
}

fn json_matrix(m: &CMatrix) -> serde_json::Value {
    json!((0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect::<Vec<_>>())
        .collect::<Vec<_>>())
}

fn run(cli: &Cli) -> Result<Vec<Table>, Failure> {
    if !(cli.tol_sdp > 0.0 && cli.tol_rank > 0.0) {
        return Err(Failure::Core(Error::Parameter("tolerances must be positive".into())));
    }
    match &cli.command {
        Command::Bound { model } => {
            let model = load_model(model, cli.eta)?;
            let dual = solve_bound(&model, cli.tol_sdp)?;
            if let Some(out) = &cli.out {
                let doc = json!({
                    "value": dual.value,
                    "h": dual.h,
                    "hvec": dual.hvec.iter().map(|z| [z.re, z.im]).collect::<Vec<_>>(),
                    "hfrak": json_matrix(&dual.hfrak),
                    "alpha": json_matrix(&dual.alpha),
                });
                write(out, &format!("{doc}\n"))?;
            }
            Ok(vec![Table::single(vec![
                ("bound", Field::Num(dual.value)),
                ("h", Field::Num(dual.h)),
                ("gap", Field::Num(dual.gap)),
                ("beta_residual", Field::Num(dual.beta_residual)),
                ("reduced_precision", Field::Bool(dual.reduced_precision)),
            ])])
        }
        Command::Code { model } => {
            let model = load_model(model, cli.eta)?;
            let r = run_pipeline(&model, &options(cli))?;
            if let Some(out) = &cli.out {
                let doc = serde_json::to_string(&CodeDocument::from(&r.code)).expect("code document serializes");
                write(out, &format!("{doc}\n"))?;
            }
            let s = r.summary();
            Ok(vec![Table::single(vec![
                ("bound", Field::Num(s.bound)),
                ("qfi", Field::Num(s.qfi_normalized)),
                ("gamma", Field::Num(s.gamma)),
                ("gamma_perturbative", Field::Num(s.gamma_perturbative)),
                ("signal", Field::Num(s.signal)),
                ("duality_gap", Field::Num(s.duality_gap)),
                ("epsilon", Field::Num(s.epsilon)),
                ("delta", Field::Num(s.delta)),
                ("reduced_precision", Field::Bool(s.reduced_precision)),
            ])])
        }
        Command::Verify { model } => {
            let model = load_model(model, cli.eta)?;
            let reports = run_all(&model, &options(cli), cli.seed)?;
            let failed = reports.iter().filter(|r| !r.passed).count();
            if let Some(out) = &cli.out {
                let lines: String = reports.iter().map(|r| r.to_json_line() + "\n").collect();
                write(out, &lines)?;
            }
            let rows: Vec<Row> = reports
                .into_iter()
                .map(|r| {
                    vec![
                        ("name", Field::Text(r.name)),
                        ("measured", Field::Num(r.measured)),
                        ("expected", Field::Num(r.expected)),
                        ("tolerance", Field::Num(r.tolerance)),
                        ("passed", Field::Bool(r.passed)),
                        ("samples", Field::Int(r.samples)),
                        ("seed", Field::Int(r.seed)),
                    ]
                })
                .collect();
            let tables = vec![Table { rows }];
            if failed > 0 {
                print!("{}", render(&tables, cli.format));
                return Err(Failure::OracleFailed(failed));
            }
            Ok(tables)
        }
        Command::Biased { model } => {
            let model = load_model(model, cli.eta)?;
            let r = run_biased(&model, &options(cli))?;
            let eta = model.bias().map_or(1.0, |b| b.eta);
            let etas: Vec<f64> = [1e-1, 1e-2, 1e-3].into_iter().filter(|&e| e <= eta.max(1e-1)).collect();
            let sweep = eta_sweep(&model, &etas, cli.tol_sdp)?;
            let summary = Table::single(vec![
                ("eta", Field::Num(eta)),
                ("bound_bar", Field::Num(r.bound_bar)),
                ("asymptotic", Field::Num(r.asymptotic)),
                ("qfi_bar", Field::Num(r.qfi_bar)),
                ("constraints_ok", Field::Bool(r.constraints_ok)),
                ("kl_residual", Field::Num(r.kl_residual)),
            ]);
            let rows = sweep
                .into_iter()
                .map(|p| {
                    vec![
                        ("sweep_eta", Field::Num(p.eta)),
                        ("bound_full", Field::Num(p.bound_full)),
                        ("eta_times_full", Field::Num(p.eta_times_full)),
                        ("ratio_to_bar", Field::Num(p.ratio)),
                    ]
                })
                .collect();
            Ok(vec![summary, Table { rows }])
        }
        Command::Dephasing { spec } => {
            let spec = DephasingSpec::from_json(&read(spec)?)?;
            let report = dephasing_effective(&spec)?;
            let model = build_dephasing_model(&spec)?;
            let r = run_pipeline(&model, &options(cli))?;
            if let Some(out) = &cli.out {
                let doc = serde_json::to_string(&CodeDocument::from(&r.code)).expect("code document serializes");
                write(out, &format!("{doc}\n"))?;
            }
            let trotter = product_code_trotter(&spec, default_dt(&model, 0.0))?;
            let closed = report.closed_form;
            Ok(vec![Table::single(vec![
                ("closed_form", Field::Num(closed)),
                ("product_code_qfi", Field::Num(report.effective.qfi_normalized)),
                ("product_code_gamma", Field::Num(report.effective.gamma)),
                ("product_code_signal", Field::Num(report.effective.signal)),
                ("product_code_trotter_gamma", Field::Num(trotter.rate_extrapolated)),
                (
                    "trotter_rel_error",
                    Field::Num((trotter.rate_extrapolated - report.effective.gamma).abs() / report.effective.gamma),
                ),
                ("bound", Field::Num(r.dual.value)),
                ("pipeline_qfi", Field::Num(r.effective.qfi_normalized)),
                ("pipeline_rel_error", Field::Num((r.effective.qfi_normalized - closed).abs() / closed)),
                ("bound_rel_error", Field::Num((r.dual.value - closed).abs() / closed)),
            ])])
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(tables) => {
            print!("{}", render(&tables, cli.format));
            ExitCode::SUCCESS
        }
        Err(f) => {
            eprintln!("aqec: {}", f.message());
            ExitCode::from(f.exit_code())
        }
    }
}
