use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use budgetci::harness::{
    read_csv, run_experiment, write_csv, write_svg, ConfigFile, ExperimentConfig, Procedure,
};
use budgetci::oracle::{
    conformal_grid_example, conformal_grid_suite, ehm_grid_suite, exchangeability_suite,
    iid_bracket_suites, independent_and_ordering_suites, SuiteReport, SUITE_MAX_BUDGET,
};
use budgetci::Error;

#[derive(Parser)]
#[command(
    name = "budgetci",
    version,
    about = "Coverage experiments for fixed-budget resampling inference"
)]
struct Cli {
    /// Master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output path (CSV, or SVG for `plot`); stdout when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// JSON config; command-line flags override its keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Use the full-size presets (setting 2: d=100, m=1000; setting 4: N=10⁴, burn-in 2000).
    #[arg(long, global = true)]
    paper_scale: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Nonparametric bootstrap intervals (settings 1–3).
    Bootstrap(ExperimentArgs),
    /// Subsampling intervals (settings 1–3).
    Subsample(ExperimentArgs),
    /// Online multiplier-bootstrap intervals for averaged SGD (setting 4).
    Sgd(ExperimentArgs),
    /// Permutation independence test under the null.
    Permutation(ExperimentArgs),
    /// Sign-flip randomization test under a symmetric null.
    Randomization(ExperimentArgs),
    /// Split and modified conformal prediction sets.
    Conformal(ExperimentArgs),
    /// Run the exact oracle suites and report pass/fail per bound.
    Verify {
        /// Random instances per budget.
        #[arg(long, default_value_t = 60)]
        per_budget: usize,
    },
    /// Render a CSV produced by another subcommand as SVG.
    Plot { input: PathBuf },
}

#[derive(Args)]
struct ExperimentArgs {
    #[arg(long)]
    setting: Option<u8>,
    #[arg(long, value_delimiter = ',')]
    methods: Option<Vec<String>>,
    #[arg(long, value_delimiter = ',')]
    budgets: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    alphas: Option<Vec<f64>>,
    /// Budgets `⌈c/α⌉ − 1` per factor `c`, replacing `--budgets`.
    #[arg(long, value_delimiter = ',')]
    budget_factors: Option<Vec<u32>>,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    n_total: Option<usize>,
    #[arg(long)]
    burn_in: Option<usize>,
    #[arg(long)]
    coordinate: Option<usize>,
    /// Also render the table as SVG at this path.
    #[arg(long)]
    svg: Option<PathBuf>,
}

enum Failure {
    Error(Error),
    Verification,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Error(e)
    }
}

fn overrides(cli: &Cli, a: &ExperimentArgs) -> ConfigFile {
    ConfigFile {
        seed: cli.seed,
        threads: cli.threads,
        out: cli.out.as_ref().map(|p| p.display().to_string()),
        paper_scale: cli.paper_scale.then_some(true),
        setting: a.setting,
        methods: a.methods.clone(),
        budgets: a.budgets.clone(),
        alphas: a.alphas.clone(),
        budget_factors: a.budget_factors.clone(),
        reps: a.reps,
        m: a.m,
        d: a.d,
        k: a.k,
        n_total: a.n_total,
        burn_in: a.burn_in,
        coordinate: a.coordinate,
    }
}

fn experiment(cli: &Cli, procedure: Procedure, args: &ExperimentArgs) -> Result<(), Failure> {
    let file = match &cli.config {
        Some(p) => ConfigFile::load(p)?,
        None => ConfigFile::default(),
    };
    let merged = file.merged(overrides(cli, args));
    let cfg = ExperimentConfig::resolve(procedure, &merged)?;
    let table = run_experiment(&cfg)?;
    for s in &table.skipped {
        eprintln!(
            "skipped {} B={} α={}: {}",
            s.method, s.budget, s.alpha, s.reason
        );
    }
    match merged.out.as_deref() {
        Some(path) => write_csv(&table, std::fs::File::create(path).map_err(Error::from)?)?,
        None => write_csv(&table, std::io::stdout().lock())?,
    }
    if let Some(svg) = &args.svg {
        write_svg(&table, svg)?;
    }
    Ok(())
}

fn print_report(r: &SuiteReport) -> bool {
    let status = if r.passed() { "PASS" } else { "FAIL" };
    println!(
        "{status} {:<28} instances={:<6} checks={:<7} violations={:<4} worst_margin={:.3e}",
        r.name, r.instances, r.checks, r.violations, r.worst_margin
    );
    if let Some(v) = &r.first_violation {
        println!("     first violation: {v}");
    }
    r.passed()
}

fn verify(seed: u64, per_budget: usize) -> Result<(), Failure> {
    let mut reports: Vec<SuiteReport> = iid_bracket_suites(seed, per_budget)?.into();
    let (t2, t3) = independent_and_ordering_suites(seed, per_budget)?;
    reports.extend([t2, t3, exchangeability_suite(seed, per_budget)?]);
    let (tv, ord) = ehm_grid_suite(SUITE_MAX_BUDGET)?;
    reports.extend([tv, ord, conformal_grid_suite(10_000)?]);
    let mut ok = true;
    for r in &reports {
        ok &= print_report(r);
    }
    let ex = conformal_grid_example(100, 0.1)?;
    println!(
        "info conformal grid m=100 α=0.1: coverage {} bound {}",
        ex.coverage, ex.bound
    );
    if ok {
        Ok(())
    } else {
        Err(Failure::Verification)
    }
}

fn plot(input: &Path, out: Option<&Path>) -> Result<(), Failure> {
    let table = read_csv(input)?;
    match out {
        Some(p) => write_svg(&table, p)?,
        None => {
            let svg = budgetci::harness::render_svg(&table)?;
            std::io::stdout()
                .write_all(svg.as_bytes())
                .map_err(Error::from)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Bootstrap(a) => experiment(&cli, Procedure::Bootstrap, a),
        Command::Subsample(a) => experiment(&cli, Procedure::Subsample, a),
        Command::Sgd(a) => experiment(&cli, Procedure::Sgd, a),
        Command::Permutation(a) => experiment(&cli, Procedure::Permutation, a),
        Command::Randomization(a) => experiment(&cli, Procedure::Randomization, a),
        Command::Conformal(a) => experiment(&cli, Procedure::Conformal, a),
        Command::Verify { per_budget } => verify(cli.seed.unwrap_or(7), *per_budget),
        Command::Plot { input } => plot(input, cli.out.as_deref()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Verification) => ExitCode::from(3),
        Err(Failure::Error(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(if matches!(e, Error::Config { .. }) {
                2
            } else {
                1
            })
        }
    }
}
