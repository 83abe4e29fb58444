use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use modesn::data::{write_series_csv, MackeyGlass};
use modesn::harness::{
    emit_report, load_task, neuronal_partitioning, param_sweep, render_report, run_experiment,
    run_pso_search, write, ExperimentConfig, ReportFormat, ResultRecord, TrainedModel,
};
use modesn::pso::PsoCheckpoint;

#[derive(Parser)]
#[command(
    name = "modesn",
    version,
    about = "Modular deep echo state network experiments"
)]
struct Cli {
    /// Worker threads for parallel evaluation.
    #[arg(long, global = true, env = "MODESN_WORKERS")]
    workers: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct RunArgs {
    /// Experiment config (TOML).
    #[arg(long, short)]
    config: PathBuf,
    /// Output directory; overrides the config.
    #[arg(long, short)]
    out: Option<PathBuf>,
    /// Base seed; overrides the config.
    #[arg(long)]
    seed: Option<u64>,
}

impl RunArgs {
    fn load(&self) -> Result<(ExperimentConfig, PathBuf)> {
        let mut cfg = ExperimentConfig::load(&self.config)?;
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(o) = &self.out {
            cfg.output_dir = o.clone();
        }
        let out = cfg.output_dir.clone();
        std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
        std::fs::write(out.join("config.toml"), cfg.to_toml()?)
            .with_context(|| format!("writing config echo to {}", out.display()))?;
        Ok((cfg, out))
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
    Markdown,
}

#[derive(Clone, Copy, ValueEnum)]
enum EvalSplit {
    Val,
    Test,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a benchmark series.
    Generate {
        #[command(subcommand)]
        what: Generate,
    },
    /// Train and test a fixed-topology config over its seeds.
    Train(RunArgs),
    /// Score a saved model on the config's data.
    Evaluate {
        #[command(flatten)]
        run: RunArgs,
        /// Model written by `train`.
        #[arg(long)]
        model: PathBuf,
        #[arg(long, value_enum, default_value = "test")]
        split: EvalSplit,
    },
    /// Particle swarm search on validation scores.
    PsoSearch {
        #[command(flatten)]
        run: RunArgs,
        /// Continue from a checkpoint written by an earlier search.
        #[arg(long)]
        resume: Option<PathBuf>,
        /// Use 100 iterations and 50 particles.
        #[arg(long)]
        full: bool,
    },
    /// Neuronal partitioning table for a neuron budget.
    Partition(RunArgs),
    /// Hyperparameter sweep grid.
    Sweep(RunArgs),
    /// Comparison table from record.json files.
    Report {
        records: Vec<PathBuf>,
        #[arg(long, value_enum, default_value = "markdown")]
        format: Format,
        /// Output file; prints to stdout when omitted.
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum Generate {
    /// Mackey-Glass series as a single-column CSV.
    Mackey {
        #[arg(long, default_value_t = 10_000)]
        steps: usize,
        #[arg(long, short)]
        out: PathBuf,
        #[arg(long, default_value_t = 0.1)]
        dt: f64,
        #[arg(long, default_value_t = 17.0)]
        tau: f64,
        #[arg(long, default_value_t = 0.2)]
        beta: f64,
        #[arg(long, default_value_t = 0.1)]
        gamma: f64,
        #[arg(long, default_value_t = 10.0)]
        n: f64,
        #[arg(long, default_value_t = 1.2)]
        history: f64,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    if let Some(n) = cli.workers {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!("error: workers: {e}");
            return ExitCode::from(2);
        }
    }
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Generate {
            what:
                Generate::Mackey {
                    steps,
                    out,
                    dt,
                    tau,
                    beta,
                    gamma,
                    n,
                    history,
                },
        } => {
            let mg = MackeyGlass {
                tau,
                beta,
                gamma,
                n,
                dt,
                history,
            };
            let series = mg.generate(steps)?;
            write_series_csv(&out, &series)?;
            println!("wrote {} samples to {}", series.len(), out.display());
        }
        Command::Train(args) => {
            let (cfg, out) = args.load()?;
            let run = run_experiment(&cfg, Some(&out))?;
            print_record(&run.record);
            println!("outputs in {}", out.display());
        }
        Command::Evaluate { run, model, split } => {
            let (cfg, _) = run.load()?;
            let text = std::fs::read_to_string(&model)
                .with_context(|| format!("reading {}", model.display()))?;
            let model: TrainedModel = serde_json::from_str(&text).context("parsing model")?;
            let task = load_task(&cfg).context("load data")?;
            let data = match split {
                EvalSplit::Val => &task.val,
                EvalSplit::Test => task.test(),
            };
            let report = model.evaluate(data)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
        }
        Command::PsoSearch { run, resume, full } => {
            let (mut cfg, out) = run.load()?;
            let mut pso = cfg.pso.clone().unwrap_or_default();
            if full {
                pso.iterations = 100;
                pso.particles = 50;
            }
            cfg.pso = Some(pso);
            let checkpoint = match resume {
                Some(p) => Some(read_json::<PsoCheckpoint>(&p)?),
                None => None,
            };
            let (summary, hp, topo) = run_pso_search(&cfg, &out, checkpoint)?;
            write::json(&out.join("best_hyper.json"), &hp)?;
            println!("best validation score {}", summary.best_score);
            println!("topology {}x{}", topo.breadth, topo.depth);
            for (k, v) in &summary.assignment {
                println!("  {k} = {v}");
            }
        }
        Command::Partition(args) => {
            let (cfg, out) = args.load()?;
            let task = load_task(&cfg).context("load data")?;
            let table = neuronal_partitioning(&cfg, &task).context("partition")?;
            table.write_csv(&out.join("partition.csv"))?;
            write::json(&out.join("partition.json"), &table)?;
            println!(
                "{} cells trained, {} skipped; table in {}",
                table.rows.len(),
                table.skipped.len(),
                out.join("partition.csv").display()
            );
        }
        Command::Sweep(args) => {
            let (cfg, out) = args.load()?;
            let task = load_task(&cfg).context("load data")?;
            let result = param_sweep(&cfg, &task).context("sweep")?;
            result.write_csv(&out.join("sweep.csv"))?;
            write::json(&out.join("sweep.json"), &result)?;
            match result.pearson {
                Some(r) => println!("pearson(lambda_max, nrmse) = {r:.4}"),
                None => println!("pearson undefined (fewer than two complete cells)"),
            }
            if let Some(v) = result.argmin_value() {
                println!("lowest NRMSE at {} = {v}", result.parameter.name());
            }
        }
        Command::Report {
            records,
            format,
            out,
        } => {
            if records.is_empty() {
                bail!("report: no record files given");
            }
            let recs = records
                .iter()
                .map(|p| read_json::<ResultRecord>(p))
                .collect::<Result<Vec<_>>>()?;
            let format = match format {
                Format::Csv => ReportFormat::Csv,
                Format::Json => ReportFormat::Json,
                Format::Markdown => ReportFormat::Markdown,
            };
            match out {
                Some(out) => {
                    emit_report(&recs, format, &out).context("report")?;
                    println!("wrote {}", out.display());
                }
                None => print!("{}", render_report(&recs, format).context("report")?),
            }
        }
    }
    Ok(())
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn print_record(r: &ResultRecord) {
    println!(
        "{}x{} reservoirs of {} neurons, {} repetitions, {:.1}s",
        r.topology.breadth,
        r.topology.depth,
        r.hyper.neurons,
        r.repetitions.len(),
        r.wall_clock_seconds
    );
    for s in &r.summary {
        println!("  {:<14} {:.6} ± {:.6}", s.metric, s.mean, s.ci95);
    }
}
