//! Command-line front end: simulate datasets, run the benchmark grid,
//! analyze user-supplied tables, or dump selection frequencies.
//!
//! Exit codes: 0 success, 1 invalid input, 2 runtime failure. Every source
//! of randomness is seeded through `--seed`; there is no wall-clock fallback.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ipflasso::harness::emit::write_summary_json;
use ipflasso::harness::ingest::{ingest_table, ClinicalSchema};
use ipflasso::harness::{
    analyze, run_benchmark_with, selection_profile, BenchConfig, RunSeeds, SelectorKind,
    ThresholdKind,
};
use ipflasso::simgen::{named_design, sample, DesignId, Setting};
use ipflasso::{Error, Result};

#[derive(Parser)]
#[command(
    name = "ipflasso",
    version,
    about = "Multi-modality variable selection with control of expected false positives"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a simulated dataset and write it as CSV plus a truth sidecar.
    Simulate(SimulateArgs),
    /// Run the benchmark grid and write score rows and a boxplot-ready summary.
    Bench(BenchArgs),
    /// Run one selection procedure on a user-supplied table.
    Analyze(AnalyzeArgs),
    /// Estimate selection frequencies only, without thresholding.
    Stabsel(StabselArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// Design name (A through I).
    #[arg(long)]
    design: String,
    /// Covariance setting: independent or correlated.
    #[arg(long, default_value = "independent")]
    setting: String,
    /// Sample size.
    #[arg(long, default_value_t = 100)]
    n: usize,
    /// Signal strength of active features.
    #[arg(long, default_value_t = 1.0)]
    beta: f64,
    /// Random seed (required; no wall-clock seeding).
    #[arg(long)]
    seed: Option<u64>,
    /// Output CSV path.
    #[arg(long)]
    out: PathBuf,
    /// Truth sidecar JSON path.
    #[arg(long)]
    truth: PathBuf,
}

#[derive(Args)]
struct BenchArgs {
    /// Benchmark config JSON; every field optional.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Results CSV path (written incrementally).
    #[arg(long)]
    out: PathBuf,
    /// Summary JSON path.
    #[arg(long)]
    summary: PathBuf,
    /// Replicates per design × setting cell (overrides config).
    #[arg(long)]
    reps: Option<usize>,
    /// Master seed (overrides config; required one way or the other).
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (overrides config; 0 = all cores).
    #[arg(long)]
    jobs: Option<usize>,
    /// Suppress per-replicate progress lines.
    #[arg(long, default_value_t = false)]
    quiet: bool,
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Input CSV with header.
    #[arg(long)]
    data: PathBuf,
    /// Column schema JSON.
    #[arg(long)]
    schema: PathBuf,
    /// Base selector: lasso or ipf.
    #[arg(long)]
    selector: String,
    /// Threshold: a number in (0,1] or "optimal".
    #[arg(long)]
    threshold: String,
    /// Target bound on expected false positives (optimal threshold).
    #[arg(long, default_value_t = 2.0)]
    v_target: f64,
    /// Elastic-Net mixing parameter.
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    /// Complementary pairs.
    #[arg(long, default_value_t = 50)]
    b_pairs: usize,
    /// Random seed (required).
    #[arg(long)]
    seed: Option<u64>,
    /// Report JSON path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct StabselArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    schema: PathBuf,
    #[arg(long)]
    selector: String,
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    #[arg(long, default_value_t = 50)]
    b_pairs: usize,
    #[arg(long)]
    seed: Option<u64>,
    /// Frequency report JSON path.
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Simulate(args) => cmd_simulate(args),
        Command::Bench(args) => cmd_bench(args),
        Command::Analyze(args) => cmd_analyze(args),
        Command::Stabsel(args) => cmd_stabsel(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_invalid_input() {
                ExitCode::from(1)
            } else {
                ExitCode::from(2)
            }
        }
    }
}

fn require_seed(seed: Option<u64>) -> Result<u64> {
    seed.ok_or_else(|| Error::invalid("--seed is required (no wall-clock seeding)"))
}

fn open_input(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            Error::invalid(format!("cannot open {}: not found", path.display()))
        } else {
            Error::Io(e)
        }
    })
}

fn create_output(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

fn cmd_simulate(args: SimulateArgs) -> Result<()> {
    let seed = require_seed(args.seed)?;
    let design_id: DesignId = args.design.parse()?;
    let setting: Setting = args.setting.parse()?;
    let design = named_design(design_id)
        .with_setting(setting)
        .with_n(args.n)
        .with_beta(args.beta);
    let sim = sample(&design, seed)?;

    let mut w = create_output(&args.out)?;
    let names = sim.dataset.feature_names().expect("simulated names");
    write!(w, "y")?;
    for name in names {
        write!(w, ",{name}")?;
    }
    writeln!(w)?;
    let x = sim.dataset.x();
    let y = sim.dataset.y();
    for i in 0..sim.dataset.n() {
        write!(w, "{}", y[i] as u8)?;
        for j in 0..sim.dataset.p() {
            write!(w, ",{}", x[[i, j]])?;
        }
        writeln!(w)?;
    }
    w.flush()?;

    #[derive(serde::Serialize)]
    struct TruthSidecar<'a> {
        design: String,
        setting: String,
        seed: u64,
        n: usize,
        p1: usize,
        p2: usize,
        b1: usize,
        b2: usize,
        beta: f64,
        truth: &'a [usize],
    }
    let sidecar = TruthSidecar {
        design: design_id.to_string(),
        setting: setting.to_string(),
        seed,
        n: design.n,
        p1: design.p1,
        p2: design.p2,
        b1: design.b1,
        b2: design.b2,
        beta: design.beta,
        truth: &sim.truth,
    };
    let mut tw = create_output(&args.truth)?;
    serde_json::to_writer_pretty(&mut tw, &sidecar)?;
    tw.flush()?;
    eprintln!(
        "wrote {} ({} x {}) and {}",
        args.out.display(),
        sim.dataset.n(),
        sim.dataset.p(),
        args.truth.display()
    );
    Ok(())
}

fn cmd_bench(args: BenchArgs) -> Result<()> {
    let mut cfg: BenchConfig = match &args.config {
        Some(path) => serde_json::from_reader(open_input(path)?)?,
        None => BenchConfig::default(),
    };
    if let Some(reps) = args.reps {
        cfg.replicates = reps;
    }
    if let Some(seed) = args.seed {
        cfg.master_seed = Some(seed);
    }
    if let Some(jobs) = args.jobs {
        cfg.parallelism = jobs;
    }
    if cfg.master_seed.is_none() {
        return Err(Error::invalid(
            "a seed is required: pass --seed or set master_seed in the config",
        ));
    }

    let total = cfg.designs.len() * cfg.settings.len() * cfg.replicates;
    let mut done = 0usize;
    let mut csv_writer = csv::Writer::from_writer(create_output(&args.out)?);
    let rows = run_benchmark_with(&cfg, |batch| {
        for row in batch {
            csv_writer.serialize(row)?;
        }
        csv_writer.flush()?;
        done += 1;
        if !args.quiet {
            if let Some(first) = batch.first() {
                eprintln!(
                    "[{done}/{total}] design {} {} replicate {}",
                    first.design, first.setting, first.replicate
                );
            }
        }
        Ok(())
    })?;
    drop(csv_writer);

    let mut sw = create_output(&args.summary)?;
    write_summary_json(&mut sw, &rows)?;
    sw.flush()?;
    eprintln!(
        "wrote {} rows to {} and summary to {}",
        rows.len(),
        args.out.display(),
        args.summary.display()
    );
    Ok(())
}

fn load_dataset(data: &Path, schema: &Path) -> Result<ipflasso::Dataset> {
    let schema = ClinicalSchema::from_json(open_input(schema)?)?;
    let report = ingest_table(open_input(data)?, &schema)?;
    if report.rows_dropped > 0 {
        eprintln!(
            "dropped {} of {} rows with missing values",
            report.rows_dropped, report.rows_read
        );
    }
    Ok(report.dataset)
}

fn cmd_analyze(args: AnalyzeArgs) -> Result<()> {
    let seed = require_seed(args.seed)?;
    let selector: SelectorKind = args.selector.parse()?;
    let threshold: ThresholdKind = args.threshold.parse()?;
    let dataset = load_dataset(&args.data, &args.schema)?;

    let report = analyze(
        &dataset,
        selector,
        threshold,
        args.v_target,
        args.alpha,
        args.b_pairs,
        seed,
    )?;

    let mut w = create_output(&args.out)?;
    serde_json::to_writer_pretty(&mut w, &report)?;
    w.flush()?;
    if report.selected.is_empty() {
        eprintln!(
            "{}: no variables reach threshold {:.2} (bound {:.3})",
            report.procedure, report.threshold, report.bound_e_v
        );
    } else {
        eprintln!(
            "{}: selected {} variable(s) at threshold {:.2} (bound {:.3})",
            report.procedure,
            report.selected.len(),
            report.threshold,
            report.bound_e_v
        );
        for v in &report.selected {
            eprintln!("  {} (frequency {:.2})", v.name, v.frequency);
        }
    }
    eprintln!("wrote {}", args.out.display());
    Ok(())
}

fn cmd_stabsel(args: StabselArgs) -> Result<()> {
    let seed = require_seed(args.seed)?;
    let selector: SelectorKind = args.selector.parse()?;
    let dataset = load_dataset(&args.data, &args.schema)?;

    let cfg = BenchConfig {
        alpha: args.alpha,
        b_pairs: args.b_pairs,
        master_seed: Some(seed),
        ..BenchConfig::default()
    };
    let seeds = RunSeeds::derive(seed, &[]);
    let (tuned, profile, non_clean) = selection_profile(&dataset, selector, &cfg, seeds)?;

    #[derive(serde::Serialize)]
    struct FrequencyEntry {
        index: usize,
        name: String,
        frequency: f64,
    }
    #[derive(serde::Serialize)]
    struct FrequencyReport {
        selector: String,
        alpha: f64,
        b_pairs: usize,
        n: usize,
        p: usize,
        chosen_factors: Vec<f64>,
        best_lambda: f64,
        cv_error: f64,
        q_avg: f64,
        non_clean_fits: usize,
        /// Features ever selected, most frequent first.
        frequencies: Vec<FrequencyEntry>,
    }

    let names = dataset.feature_names();
    let mut entries: Vec<FrequencyEntry> = profile
        .freq()
        .iter()
        .enumerate()
        .filter(|&(_, &f)| f > 0.0)
        .map(|(j, &f)| FrequencyEntry {
            index: j,
            name: names
                .map(|n| n[j].clone())
                .unwrap_or_else(|| format!("feature_{j}")),
            frequency: f,
        })
        .collect();
    entries.sort_by(|a, b| b.frequency.partial_cmp(&a.frequency).unwrap().then(a.index.cmp(&b.index)));

    let report = FrequencyReport {
        selector: selector.to_string(),
        alpha: args.alpha,
        b_pairs: args.b_pairs,
        n: dataset.n(),
        p: dataset.p(),
        chosen_factors: tuned.best_factors.clone(),
        best_lambda: tuned.best_lambda,
        cv_error: tuned.cv_error,
        q_avg: profile.q_avg(),
        non_clean_fits: non_clean,
        frequencies: entries,
    };
    let mut w = create_output(&args.out)?;
    serde_json::to_writer_pretty(&mut w, &report)?;
    w.flush()?;
    eprintln!(
        "{} of {} features ever selected (q_avg {:.2}); wrote {}",
        report.frequencies.len(),
        report.p,
        report.q_avg,
        args.out.display()
    );
    Ok(())
}
