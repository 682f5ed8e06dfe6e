use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use chartloop_core::compose::ComposeOptions;
use chartloop_core::gateway::Gateway;
use chartloop_core::palette::PaletteTable;
use chartloop_core::pipeline::{
    compose_many, evaluate_charts, grade_files, qa_many, read_all, report, write_jsonl, ChartRecord, Pipeline,
    PipelineConfig, PipelineError, RunOptions,
};
use chartloop_core::render::render_svg;
use chartloop_core::seed::{load_seeds, synthesize_catalog};

/// Synthetic chart corpora with evaluator-driven refinement.
///
/// Exit codes: 0 ok, 1 I/O failure, 2 configuration error, 3 evaluator
/// transport failure, 4 integrity error.
#[derive(Parser)]
#[command(name = "chartloop", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Chart seed catalogs.
    #[command(subcommand)]
    Seed(SeedCommand),
    /// Compose charts from a seed file into a specs file.
    Compose(ComposeArgs),
    /// Render every chart of a specs file to SVG.
    Render(RenderArgs),
    /// Generate QA pairs for every chart of a specs file.
    Qa(QaArgs),
    /// Score charts with the configured evaluator without refining them.
    Evaluate(EvaluateArgs),
    /// Staged corpus runs.
    #[command(subcommand)]
    Stage(StageCommand),
    /// Grade answers against QA pairs.
    Grade(GradeArgs),
    /// Summarize a corpus directory.
    Report(ReportArgs),
}

#[derive(Subcommand)]
enum SeedCommand {
    /// Synthesize a seed catalog from the built-in domains.
    Synth {
        #[arg(long)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        master_seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct ComposeArgs {
    #[arg(long)]
    seeds: PathBuf,
    /// Number of charts; defaults to one per seed.
    #[arg(long)]
    count: Option<usize>,
    #[arg(long, default_value_t = 0)]
    master_seed: u64,
    #[arg(long)]
    palettes: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RenderArgs {
    #[arg(long)]
    specs: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Also write PNG rasters.
    #[arg(long)]
    png: bool,
}

#[derive(Args)]
struct QaArgs {
    #[arg(long)]
    specs: PathBuf,
    #[arg(long, default_value_t = 8)]
    per_chart: usize,
    #[arg(long, default_value_t = 0.2)]
    vcot_ratio: f64,
    #[arg(long, default_value_t = 0)]
    master_seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    specs: PathBuf,
    /// Pipeline config supplying the evaluator, seed, prior and thresholds.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    transcripts: Option<PathBuf>,
}

#[derive(Subcommand)]
enum StageCommand {
    /// Run all configured stages, or continue an interrupted run.
    Run {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        resume: bool,
        /// Checkpoint and stop after this many charts.
        #[arg(long)]
        stop_after: Option<usize>,
    },
}

#[derive(Args)]
struct GradeArgs {
    #[arg(long)]
    qa: PathBuf,
    #[arg(long)]
    answers: PathBuf,
    #[arg(long)]
    report: PathBuf,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    answers: Option<PathBuf>,
    /// Print JSON instead of tables.
    #[arg(long)]
    json: bool,
}

// Output goes through these so a closed pipe (`| head`) is not a panic.
macro_rules! say {
    ($($t:tt)*) => {{
        use std::io::Write as _;
        let _ = writeln!(std::io::stdout(), $($t)*);
    }};
}

macro_rules! emit {
    ($($t:tt)*) => {{
        use std::io::Write as _;
        let _ = write!(std::io::stdout(), $($t)*);
    }};
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn config_or_default(path: Option<&Path>) -> Result<PipelineConfig, PipelineError> {
    match path {
        Some(p) => PipelineConfig::load(p),
        None => Ok(PipelineConfig::default()),
    }
}

fn run(cli: Cli) -> Result<(), PipelineError> {
    match cli.command {
        Command::Seed(SeedCommand::Synth { count, master_seed, out }) => {
            let catalog = synthesize_catalog(master_seed, count);
            fs::write(&out, catalog.to_jsonl()).map_err(io(&out))?;
            say!("wrote {} seeds to {}", catalog.len(), out.display());
        }
        Command::Compose(a) => {
            let catalog = load_seeds(&a.seeds).map_err(|e| PipelineError::Config(e.to_string()))?;
            for r in &catalog.rejected {
                log::warn!("seed line {} rejected: {}", r.line, r.reasons.join("; "));
            }
            if catalog.is_empty() {
                return Err(PipelineError::Config(format!("{} has no valid seeds", a.seeds.display())));
            }
            let palettes = match &a.palettes {
                Some(p) => PaletteTable::load(p).map_err(|e| PipelineError::Config(e.to_string()))?,
                None => PaletteTable::builtin(),
            };
            let count = a.count.unwrap_or(catalog.len());
            let charts = compose_many(&catalog, &palettes, a.master_seed, count, &ComposeOptions::default());
            write_jsonl(&a.out, &charts)?;
            say!("composed {} of {count} charts into {}", charts.len(), a.out.display());
        }
        Command::Render(a) => {
            let charts: Vec<ChartRecord> = read_all(&a.specs)?;
            fs::create_dir_all(&a.out).map_err(io(&a.out))?;
            for c in &charts {
                let svg = render_svg(&c.spec).map_err(|e| PipelineError::Integrity(format!("{}: {e}", c.spec.chart_id)))?;
                let path = a.out.join(format!("{}.svg", c.spec.chart_id));
                fs::write(&path, &svg).map_err(io(&path))?;
                if a.png {
                    write_png(&a.out, &c.spec.chart_id, &svg)?;
                }
            }
            say!("rendered {} charts into {}", charts.len(), a.out.display());
        }
        Command::Qa(a) => {
            if !(0.0..=1.0).contains(&a.vcot_ratio) {
                return Err(PipelineError::Config(format!("vcot ratio {} outside [0, 1]", a.vcot_ratio)));
            }
            let charts: Vec<ChartRecord> = read_all(&a.specs)?;
            let qa = qa_many(&charts, a.master_seed, a.per_chart, a.vcot_ratio);
            write_jsonl(&a.out, &qa)?;
            say!("wrote {} QA pairs to {}", qa.len(), a.out.display());
        }
        Command::Evaluate(a) => {
            let cfg = config_or_default(a.config.as_deref())?;
            let charts: Vec<ChartRecord> = read_all(&a.specs)?;
            let gateway = Gateway::new(cfg.evaluator.clone())?;
            let (logs, transcripts) = evaluate_charts(&charts, &gateway, cfg.master_seed, cfg.prior, cfg.thresholds)?;
            write_jsonl(&a.out, &logs)?;
            if let Some(t) = &a.transcripts {
                write_jsonl(t, &transcripts)?;
            }
            let passed = logs.iter().filter(|l| l.score.identity_pass).count();
            say!("evaluated {} charts, {passed} passed identity checks", logs.len());
        }
        Command::Stage(StageCommand::Run {
            config,
            corpus,
            resume,
            stop_after,
        }) => {
            let mut pipeline = if resume {
                let cfg = config.as_deref().map(PipelineConfig::load).transpose()?;
                Pipeline::resume(&corpus, cfg)?
            } else {
                Pipeline::create(config_or_default(config.as_deref())?, &corpus)?
            };
            let state = pipeline.run(RunOptions { stop_after })?;
            if state.complete {
                say!("run complete in {}", corpus.display());
            } else {
                say!(
                    "checkpointed at stage {} chart {}; continue with --resume",
                    state.stage_k, state.next_index
                );
            }
            emit!("{}", report(&corpus, None)?);
        }
        Command::Grade(a) => {
            let outcome = grade_files(&a.qa, &a.answers)?;
            fs::create_dir_all(&a.report).map_err(io(&a.report))?;
            write_jsonl(&a.report.join("grades.jsonl"), &outcome.records)?;
            let path = a.report.join("report.json");
            let json = serde_json::to_string_pretty(&outcome.report).expect("report serializes");
            fs::write(&path, json).map_err(io(&path))?;
            if outcome.missing_answers > 0 {
                log::warn!("{} questions had no answer and were graded incorrect", outcome.missing_answers);
            }
            say!("{}", outcome.report);
        }
        Command::Report(a) => {
            let r = report(&a.corpus, a.answers.as_deref())?;
            if a.json {
                say!("{}", serde_json::to_string_pretty(&r).expect("report serializes"));
            } else {
                emit!("{r}");
            }
        }
    }
    Ok(())
}

#[cfg(feature = "raster")]
fn write_png(dir: &Path, chart_id: &str, svg: &[u8]) -> Result<(), PipelineError> {
    let png = chartloop_core::render::rasterize_png(svg).map_err(|e| PipelineError::Integrity(e.to_string()))?;
    let path = dir.join(format!("{chart_id}.png"));
    fs::write(&path, png).map_err(io(&path))
}

#[cfg(not(feature = "raster"))]
fn write_png(_: &Path, _: &str, _: &[u8]) -> Result<(), PipelineError> {
    Err(PipelineError::Config("built without PNG support".into()))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
