use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;

use plasmode::harness::{self, MSpec, ModelName, Pipeline, PipelineConfig, PipelineError, CONFIG_SCHEMA};
use plasmode::mselect::MSelectionConfig;
use plasmode::{dataio, EvaluationReport};

#[derive(Parser)]
#[command(
    name = "plasmode",
    version,
    about = "Statistical plasmode data generation and model comparison"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Load the input table, subset columns and split train/test.
    Ingest(StudyArgs),
    /// Choose the resampling size m on the training rows.
    SelectM(StudyArgs),
    /// Derive the true effects and generate the plasmode outcomes.
    Generate(StudyArgs),
    /// Fit the evaluation models on every replicate and score them.
    Evaluate(StudyArgs),
    /// Redraw the SVG figures of a finished run.
    Report(StudyArgs),
    /// All stages in order.
    Run(StudyArgs),
    /// Write a synthetic Gaussian dataset (for trying the pipeline).
    Synth(SynthArgs),
}

#[derive(Args, Clone, Default)]
struct StudyArgs {
    /// JSON configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    input: Option<PathBuf>,
    /// Outcome column of the input table.
    #[arg(long)]
    outcome: Option<String>,
    /// The first input column holds row identifiers.
    #[arg(long)]
    id_column: bool,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Master seed of the resampling plan.
    #[arg(long)]
    seed: Option<u64>,
    /// Resampling size: an integer or "auto".
    #[arg(long)]
    m: Option<String>,
    #[arg(long = "n-replicates", short = 'N')]
    n_replicates: Option<usize>,
    /// with_replacement | without_replacement | sample_split
    #[arg(long)]
    scheme: Option<String>,
    /// Comma-separated subset of ridge_cv, lmm_reml, lasso_cv.
    #[arg(long, value_delimiter = ',')]
    models: Option<Vec<String>>,
    #[arg(long)]
    q: Option<f64>,
    /// Statistic draws per candidate m.
    #[arg(long = "B")]
    draws: Option<usize>,
    /// lw_cov_norm | sample_cov_norm | column_mean_norm
    #[arg(long)]
    statistic: Option<String>,
    /// wasserstein1 | kolmogorov_smirnov
    #[arg(long)]
    distance: Option<String>,
    #[arg(long = "m-floor")]
    m_floor: Option<usize>,
    /// Also persist every replicate under plasmodes/ and indices/.
    #[arg(long)]
    write_plasmodes: bool,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 300)]
    n: usize,
    #[arg(long, default_value_t = 10)]
    p: usize,
    /// Residual standard deviation of the outcome.
    #[arg(long, default_value_t = 1.0)]
    noise: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output CSV (first column row_id, outcome column "y").
    #[arg(long)]
    output: PathBuf,
}

fn enum_value<T: DeserializeOwned>(what: &str, s: &str) -> Result<T, PipelineError> {
    serde_json::from_value(serde_json::Value::String(s.to_string()))
        .map_err(|_| PipelineError::Config(format!("unknown {what} '{s}'")))
}

impl StudyArgs {
    fn mselect_flags(&self) -> bool {
        self.q.is_some()
            || self.draws.is_some()
            || self.statistic.is_some()
            || self.distance.is_some()
            || self.m_floor.is_some()
    }

    fn config(&self) -> Result<PipelineConfig, PipelineError> {
        let mut cfg = match (&self.config, &self.input, &self.outcome) {
            (Some(path), _, _) => PipelineConfig::load(path)?,
            (None, Some(input), Some(outcome)) => PipelineConfig::new(input, outcome),
            (None, None, _) => return Err(PipelineError::Config("no input: pass --config or --input".into())),
            (None, Some(_), None) => return Err(PipelineError::Config("--input needs --outcome".into())),
        };
        if let Some(p) = &self.input {
            cfg.input.path = p.clone();
        }
        if let Some(o) = &self.outcome {
            cfg.input.outcome_column = o.clone();
        }
        if self.id_column {
            cfg.input.id_column = true;
        }
        if let Some(o) = &self.out {
            cfg.output.dir = o.clone();
        }
        if self.write_plasmodes {
            cfg.output.write_plasmodes = true;
        }
        if let Some(s) = self.seed {
            cfg.resampling.master_seed = s;
        }
        if let Some(n) = self.n_replicates {
            cfg.resampling.n_replicates = n;
        }
        if let Some(s) = &self.scheme {
            cfg.resampling.scheme = enum_value("scheme", s)?;
        }
        if let Some(m) = &self.m {
            cfg.resampling.m = if m == "auto" {
                MSpec::Auto
            } else {
                MSpec::Fixed(
                    m.parse()
                        .map_err(|_| PipelineError::Config(format!("--m must be an integer or auto, got '{m}'")))?,
                )
            };
        }
        if let Some(models) = &self.models {
            cfg.evaluation.models = models
                .iter()
                .map(|s| ModelName::parse(s).ok_or_else(|| PipelineError::Config(format!("unknown model '{s}'"))))
                .collect::<Result<_, _>>()?;
        }
        if self.mselect_flags() && cfg.mselect.is_none() {
            cfg.mselect = Some(MSelectionConfig::default());
        }
        if let Some(ms) = cfg.mselect.as_mut() {
            if let Some(q) = self.q {
                ms.q = q;
            }
            if let Some(b) = self.draws {
                ms.draws = b;
            }
            if let Some(s) = &self.statistic {
                ms.statistic = enum_value("statistic", s)?;
            }
            if let Some(d) = &self.distance {
                ms.distance = enum_value("distance", d)?;
            }
            if let Some(f) = self.m_floor {
                ms.m_floor = Some(f);
            }
        }
        Ok(cfg)
    }
}

fn print_report(report: &EvaluationReport) {
    println!(
        "{:<10} {:>14} {:>14} {:>10} {:>10}",
        "model", "MAB", "MSEP", "stable@MAB", "stable@MSEP"
    );
    for m in &report.summary.models {
        let at = |k: Option<usize>| k.map_or("-".to_string(), |k| k.to_string());
        println!(
            "{:<10} {:>14.6e} {:>14.6e} {:>10} {:>10}",
            m.model.as_str(),
            m.mab_hat,
            m.msep_hat,
            at(m.converged_at_mab),
            at(m.converged_at_msep)
        );
    }
}

fn execute(command: Command) -> Result<(), PipelineError> {
    let study = |args: &StudyArgs| args.config().and_then(Pipeline::new);
    match command {
        Command::Ingest(a) => study(&a)?.ingest(),
        Command::SelectM(a) => {
            let r = study(&a)?.select_m()?;
            println!(
                "m* = {} (candidates {}..{})",
                r.m_star,
                r.candidates[0],
                r.candidates[r.candidates.len() - 1]
            );
            Ok(())
        }
        Command::Generate(a) => study(&a)?.generate(),
        Command::Evaluate(a) => study(&a)?.evaluate().map(|r| print_report(&r)),
        Command::Report(a) => match (&a.config, &a.input, &a.out) {
            (None, None, Some(out)) => harness::report_dir(out),
            (None, None, None) => Err(PipelineError::Config(
                "report needs --out <run dir> or a configuration".into(),
            )),
            _ => study(&a)?.report(),
        },
        Command::Run(a) => study(&a)?.run().map(|r| print_report(&r)),
        Command::Synth(s) => {
            let ds = harness::synthetic_dataset(s.n, s.p, s.noise, s.seed)
                .map_err(|e| PipelineError::Config(e.to_string()))?;
            dataio::write_csv(&ds, &s.output).map_err(|e| PipelineError::Stage {
                stage: harness::Stage::Ingest,
                replicate: None,
                message: e.to_string(),
                completed: Vec::new(),
            })
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let info = matches!(
                e.kind(),
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion
            );
            let _ = e.print();
            if info {
                return ExitCode::SUCCESS;
            }
            eprintln!("\n{CONFIG_SCHEMA}");
            return ExitCode::from(1);
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_validation() {
                eprintln!("\n{CONFIG_SCHEMA}");
                ExitCode::from(1)
            } else {
                ExitCode::from(2)
            }
        }
    }
}
