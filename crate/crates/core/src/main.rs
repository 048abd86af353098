use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;

use subwave::io_cli::{
    bench_assembly, converge_in_delta, converge_in_f, export_modes, prepare_out, write_bench, write_convergence_delta,
    write_convergence_f, write_json, DeltaSpec, ModeOutput, RunConfig,
};
use subwave::solver::{run_pipeline, SolverReport, Stage};
use subwave::Error;

#[derive(Parser, Debug)]
#[command(name = "subwave", version, about = "Subwavelength resonances of 2D high-contrast resonator systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Override the truncation F.
    #[arg(long)]
    f: Option<usize>,
    /// Override the contrast δ (single value).
    #[arg(long)]
    delta: Option<f64>,
    /// Stop the pipeline after this stage.
    #[arg(long, value_enum, default_value_t = StageArg::Refined)]
    stage: StageArg,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum StageArg {
    Seed,
    Effective,
    Refined,
}

impl From<StageArg> for Stage {
    fn from(s: StageArg) -> Self {
        match s {
            StageArg::Seed => Stage::Seed,
            StageArg::Effective => Stage::Effective,
            StageArg::Refined => Stage::Refined,
        }
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Seeds, effective stage, refinement and filtering; writes resonances.json.
    Resonances(Common),
    /// Errors against a reference truncation; writes convergence_f.csv.
    ConvergeF {
        #[command(flatten)]
        common: Common,
        /// Reference truncation (default from the config, else 6).
        #[arg(long)]
        f_ref: Option<usize>,
    },
    /// Seed and effective errors over the δ sweep; writes convergence_delta.csv.
    ConvergeDelta(Common),
    /// Near-field grids of accepted branches plus manifest.json.
    Modes {
        #[command(flatten)]
        common: Common,
        /// Branch index into the accepted list (repeatable; default all).
        #[arg(long)]
        branch: Vec<usize>,
    },
    /// Runtime of the effective path against full refinement; writes bench.csv.
    BenchAssembly(Common),
}

enum Failure {
    Config(Error),
    Solver(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) | Error::Parameter(_) | Error::InvalidArgument(_) => Failure::Config(e),
            other => Failure::Solver(other),
        }
    }
}

/// Exit status of a run: 0 all branches accepted, 3 some missing, 4 none.
fn outcome(reports: &[SolverReport]) -> u8 {
    if reports.iter().any(|r| r.accepted.is_empty()) {
        4
    } else if reports.iter().any(|r| r.accepted.len() < r.n) {
        3
    } else {
        0
    }
}

fn load(common: &Common) -> Result<RunConfig, Failure> {
    let mut config = RunConfig::load(&common.config)?;
    if let Some(f) = common.f {
        config.f = f;
    }
    if let Some(d) = common.delta {
        config.delta = DeltaSpec::Value(d);
    }
    config.validate()?;
    if let Some(k) = common.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build_global()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    }
    prepare_out(&common.out)?;
    Ok(config)
}

fn summarize(report: &SolverReport) {
    info!(
        "δ = {:.3e}: {} accepted, {} spurious, {} duplicate",
        report.delta,
        report.accepted.len(),
        report.spurious.len(),
        report.duplicate.len()
    );
    for (k, b) in report.accepted.iter().enumerate() {
        println!(
            "{k:>3}  {:<11}  ω = {:+.12e} {:+.12e}i  σ = {}",
            format!("{:?}", b.branch_class).to_lowercase(),
            b.omega.re,
            b.omega.im,
            b.sigma_min.map_or("-".to_string(), |s| format!("{s:.2e}"))
        );
    }
}

fn run(cli: Cli) -> Result<u8, Failure> {
    match cli.command {
        Command::Resonances(common) => {
            let config = load(&common)?;
            let settings = config.settings();
            let mut reports = Vec::new();
            for d in config.deltas()? {
                let system = config.system(d)?;
                let report = run_pipeline(&system, &settings, common.stage.into())?;
                summarize(&report);
                if let (Some(modes), true) = (&config.outputs.modes, reports.is_empty()) {
                    export_modes(&report, &system, modes, &common.out)?;
                }
                reports.push(report);
            }
            write_json(&common.out.join("resonances.json"), &reports)?;
            Ok(outcome(&reports))
        }
        Command::ConvergeF { common, f_ref } => {
            let config = load(&common)?;
            let f_ref = f_ref
                .or(config.outputs.convergence.as_ref().map(|c| c.f_ref))
                .unwrap_or(6);
            let system = config.system(config.deltas()?[0])?;
            let f_values: Vec<usize> = (0..f_ref).collect();
            let table = converge_in_f(&system, &f_values, f_ref, &config.settings())?;
            write_convergence_f(&common.out.join("convergence_f.csv"), &table)?;
            for (f, e) in &table.rows {
                println!("F = {f}: max error {:.3e}", e.iter().cloned().fold(0.0, f64::max));
            }
            Ok(0)
        }
        Command::ConvergeDelta(common) => {
            let config = load(&common)?;
            let system = config.system(config.deltas()?[0])?;
            let table = converge_in_delta(&system, &config.deltas()?, &config.settings())?;
            write_convergence_delta(&common.out.join("convergence_delta.csv"), &table)?;
            println!("{}", serde_json::to_string(&table.slopes).expect("plain numbers"));
            Ok(0)
        }
        Command::Modes { common, branch } => {
            let config = load(&common)?;
            let system = config.system(config.deltas()?[0])?;
            let report = run_pipeline(&system, &config.settings(), common.stage.into())?;
            summarize(&report);
            let mut selection: ModeOutput = config.outputs.modes.clone().unwrap_or_default();
            if !branch.is_empty() {
                selection.branches = Some(branch);
            }
            let manifest = export_modes(&report, &system, &selection, &common.out)?;
            println!("wrote {} field grids", manifest.len());
            Ok(outcome(std::slice::from_ref(&report)))
        }
        Command::BenchAssembly(common) => {
            let config = load(&common)?;
            let bench = config.outputs.bench.clone().unwrap_or_default();
            let rows = bench_assembly(&bench, config.deltas()?[0], &config.settings())?;
            write_bench(&common.out.join("bench.csv"), &rows)?;
            for r in &rows {
                println!("N = {:>3}: effective {:.3e} s, full {:.3e} s", r.n, r.effective, r.full);
            }
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(Failure::Config(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(Failure::Solver(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(4)
        }
    }
}
