//! `augreg` command-line interface.
//!
//! Exit codes: 0 on success, 2 for invalid input (usage, data, spec, plan),
//! 3 when a model fit or the resampling fails.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use augreg::io::{self, LoadOptions, ReportDocument, SummaryDocument};
use augreg::resample::{GroupCount, ResamplePlan};
use augreg::simulate::{run_replications, Scenario, ScenarioSpec};
use augreg::{AnalysisSpec, Error};

/// Refits above which `simulate` warns before starting.
const REFIT_BUDGET: usize = 2_000_000;

#[derive(Parser)]
#[command(name = "augreg", version, about = "Augmented regression estimates from a validation subsample")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit the augmented estimator to a CSV file.
    Fit(FitArgs),
    /// Run a replicated simulation study.
    Simulate(SimulateArgs),
    /// Render a saved JSON report or simulation summary as text tables.
    Report(ReportArgs),
    /// Write one simulated dataset and its analysis spec.
    Generate(GenerateArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Jackknife,
    Bootstrap,
}

#[derive(Clone, Copy, Default, ValueEnum)]
enum Format {
    #[default]
    Json,
    Csv,
}

#[derive(Args)]
struct PlanArgs {
    /// Resampling method; defaults to the spec's plan (fit) or the jackknife.
    #[arg(long, value_enum)]
    method: Option<Method>,
    /// Number of jackknife groups (default: delete-one up to 2000 units, else 500).
    #[arg(long)]
    groups: Option<usize>,
    /// Number of bootstrap replicates.
    #[arg(long = "boot-B", default_value_t = 200)]
    boot_b: usize,
    /// Seed for bootstrap draws and simulated data.
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Worker threads; results do not depend on it.
    #[arg(long, env = "AUGREG_THREADS")]
    threads: Option<usize>,
}

impl PlanArgs {
    fn plan(&self, fallback: &ResamplePlan) -> ResamplePlan {
        let groups = self.groups.map_or(GroupCount::Auto, GroupCount::Fixed);
        match self.method {
            Some(Method::Jackknife) => ResamplePlan::jackknife(groups),
            Some(Method::Bootstrap) => ResamplePlan::bootstrap(self.boot_b, self.seed),
            None if self.groups.is_some() => ResamplePlan::jackknife(groups),
            None => fallback.clone(),
        }
    }
}

#[derive(Args)]
struct FitArgs {
    #[arg(long)]
    data: PathBuf,
    /// Analysis spec (JSON, see schema/analysis-spec.schema.json).
    #[arg(long)]
    spec: PathBuf,
    #[command(flatten)]
    plan: PlanArgs,
    #[arg(long)]
    alpha: Option<f64>,
    /// Output file; standard output if omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t)]
    format: Format,
    /// Reject reference values on non-validated rows instead of ignoring them.
    #[arg(long)]
    strict: bool,
}

#[derive(Args)]
struct SimulateArgs {
    /// example1, example2, example3 or example4.
    #[arg(long, required_unless_present = "params")]
    scenario: Option<String>,
    /// Scenario with explicit parameters (JSON, e.g. `{"name": "example1", "p_x1": 0.3}`).
    #[arg(long, conflicts_with = "scenario")]
    params: Option<PathBuf>,
    #[arg(long, default_value_t = 200)]
    reps: usize,
    #[arg(long = "n-full", default_value_t = 4000)]
    n_full: usize,
    #[arg(long = "n-val", default_value_t = 400)]
    n_val: usize,
    #[command(flatten)]
    plan: PlanArgs,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t)]
    format: Format,
    /// Also write every replicate's estimates to this CSV file.
    #[arg(long = "dump-replicates")]
    dump_replicates: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    /// JSON written by `fit` or `simulate`.
    input: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long)]
    scenario: String,
    #[arg(long = "n-full", default_value_t = 4000)]
    n_full: usize,
    #[arg(long = "n-val", default_value_t = 400)]
    n_val: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Which replicate's dataset of the seeded run to write.
    #[arg(long, default_value_t = 0)]
    replicate: usize,
    /// Data CSV.
    #[arg(long)]
    out: PathBuf,
    /// Analysis spec JSON for the data.
    #[arg(long = "spec-out")]
    spec_out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Fit(a) => fit(a),
        Command::Simulate(a) => simulate(a),
        Command::Report(a) => report(a),
        Command::Generate(a) => generate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            ExitCode::from(if e.is_fit_failure() { 3 } else { 2 })
        }
    }
}

fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T, Error> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        if n == 0 {
            return Err(Error::InvalidPlan("--threads must be at least 1".into()));
        }
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::InvalidPlan(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>, Error> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(std::io::stdout().lock())),
    })
}

fn write_json<T: serde::Serialize>(value: &T, out: &mut dyn Write) -> Result<(), Error> {
    serde_json::to_writer_pretty(&mut *out, value)?;
    writeln!(out)?;
    Ok(())
}

fn fit(args: FitArgs) -> Result<(), Error> {
    let mut spec = AnalysisSpec::from_json(&std::fs::read_to_string(&args.spec)?)?;
    spec.resample = args.plan.plan(&spec.resample);
    if let Some(alpha) = args.alpha {
        spec.alpha = alpha;
    }
    spec.validate()?;
    let loaded = io::load_csv(&args.data, &spec, LoadOptions { strict: args.strict })?;
    for w in &loaded.warnings {
        eprintln!("warning: {w}");
    }
    let analysis = with_threads(args.plan.threads, || augreg::pipeline::analyze(&loaded.data, &spec))??;
    let doc = ReportDocument::new(&analysis, &spec, Some(loaded.sha256));
    let mut out = output(args.out.as_deref())?;
    match args.format {
        Format::Json => write_json(&doc, &mut out)?,
        Format::Csv => doc.write_csv(&mut out)?,
    }
    out.flush()?;
    Ok(())
}

fn simulate(args: SimulateArgs) -> Result<(), Error> {
    let scenario = match (&args.scenario, &args.params) {
        (_, Some(path)) => serde_json::from_str(&std::fs::read_to_string(path)?)?,
        (Some(name), None) => Scenario::by_name(name)?,
        (None, None) => unreachable!("clap requires one of --scenario and --params"),
    };
    let plan = args.plan.plan(&ResamplePlan::default());
    let refits = args.reps.saturating_mul(plan.refits(args.n_full));
    if refits > REFIT_BUDGET {
        eprintln!(
            "warning: about {refits} refits of each model ({} replicates x {} resamples); \
             this may take a long time",
            args.reps,
            plan.refits(args.n_full)
        );
    }
    let spec = ScenarioSpec {
        scenario,
        n_full: args.n_full,
        n_val: args.n_val,
        seed: args.plan.seed,
    };
    let run = with_threads(args.plan.threads, || {
        run_replications(&spec, args.reps, &plan, args.alpha)
    })??;
    if run.summary.failures > 0 {
        eprintln!("warning: {} replicates failed", run.summary.failures);
    }
    if let Some(path) = &args.dump_replicates {
        let mut f = BufWriter::new(File::create(path)?);
        io::write_replicates_csv(&run.records, &mut f)?;
        f.flush()?;
    }
    let mut out = output(args.out.as_deref())?;
    match args.format {
        Format::Json => write_json(&SummaryDocument::new(run.summary), &mut out)?,
        Format::Csv => io::write_summary_csv(&run.summary, &mut out)?,
    }
    out.flush()?;
    Ok(())
}

fn report(args: ReportArgs) -> Result<(), Error> {
    let text = std::fs::read_to_string(&args.input)?;
    let value: serde_json::Value = serde_json::from_str(&text)?;
    let rendered = if value.get("beta_aug").is_some() {
        io::render_report(&serde_json::from_value::<ReportDocument>(value)?)
    } else if value.get("rows").is_some() {
        io::render_summary(&serde_json::from_value::<SummaryDocument>(value)?)
    } else {
        return Err(Error::InvalidData(format!(
            "{} is neither a fit report nor a simulation summary",
            args.input.display()
        )));
    };
    let mut out = output(args.out.as_deref())?;
    out.write_all(rendered.as_bytes())?;
    out.flush()?;
    Ok(())
}

fn generate(args: GenerateArgs) -> Result<(), Error> {
    let spec = ScenarioSpec {
        scenario: Scenario::by_name(&args.scenario)?,
        n_full: args.n_full,
        n_val: args.n_val,
        seed: args.seed,
    };
    let data = spec.dataset(args.replicate)?;
    let mut f = BufWriter::new(File::create(&args.out)?);
    io::write_csv(&data, &mut f)?;
    f.flush()?;
    let analysis = spec.scenario.generator().analysis_spec();
    let mut f = BufWriter::new(File::create(&args.spec_out)?);
    write_json(&analysis, &mut f)?;
    f.flush()?;
    Ok(())
}
