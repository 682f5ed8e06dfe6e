//! Staged generate, evaluate, refine and QA loop over an on-disk corpus.
//!
//! Layout of a corpus directory:
//!
//! ```text
//! charts/<chart_id>.svg   (and .png when enabled)
//! specs.jsonl             one CorpusRecord per retained chart
//! qa.jsonl                one QaRecord per question
//! eval_log.jsonl          one EvalLogRecord per evaluated chart
//! transcripts.jsonl       remote evaluator exchanges
//! stage_state.json        checkpoint, replaced atomically after every chunk
//! manifest.json           config and its hash
//! ```
//!
//! Every per-chart decision draws from a seed split off the master seed by
//! stage and chart index, so chunking and thread count never change output.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::answer::normalize_answer;
use crate::chart::{ChartSpec, GroundTruth, TickBranch};
use crate::compose::{chart_id_for, compose_chart, ComposeOptions, DEFAULT_CANVAS};
use crate::eval::{
    apply_action, build_battery, normalize_battery_answers, score_chart, select_action, ActionContext, ActionKind,
    EvalBattery, EvalScore, Thresholds, DEFAULT_PRIOR,
};
use crate::gateway::{AskItem, ChartRequest, EvaluatorBinding, Gateway, GatewayError, ImageFormat, Transcript};
use crate::grade::{aggregate, grade, GradeRecord, Report};
use crate::palette::PaletteTable;
use crate::qa::{generate_qa_batch_with_quota, vcot_quota, QaForm, QaPair, DEFAULT_VCOT_RATIO};
use crate::render::render_svg;
use crate::rng::{rng_from_seed, split_seed};
use crate::seed::{load_seeds, synthesize_catalog, ChartSeed, ChartType, SeedCatalog};

pub const SPECS_FILE: &str = "specs.jsonl";
pub const QA_FILE: &str = "qa.jsonl";
pub const EVAL_LOG_FILE: &str = "eval_log.jsonl";
pub const TRANSCRIPTS_FILE: &str = "transcripts.jsonl";
pub const STATE_FILE: &str = "stage_state.json";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const CHARTS_DIR: &str = "charts";
const APPEND_FILES: [&str; 4] = [SPECS_FILE, QA_FILE, EVAL_LOG_FILE, TRANSCRIPTS_FILE];
const COMPOSE_ATTEMPTS: u64 = 8;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error("integrity: {0}")]
    Integrity(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl PipelineError {
    /// Process exit code: 2 config, 3 transport, 4 integrity, 1 other I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config(_) | PipelineError::Gateway(GatewayError::Config(_)) => 2,
            PipelineError::Gateway(GatewayError::Transport { .. } | GatewayError::Protocol { .. }) => 3,
            PipelineError::Gateway(GatewayError::Oracle { .. }) | PipelineError::Integrity(_) => 4,
            PipelineError::Io { .. } => 1,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io {
        path: path.display().to_string(),
        source,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum SeedSource {
    Synth { count: usize },
    File { path: PathBuf },
}

/// Where a chart's previous score comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PreviousScore {
    /// Score the same battery with the previous evaluator when one is bound;
    /// otherwise behave like `Carry`.
    #[default]
    Dual,
    /// Use the previous stage's mean scores, and the prior in stage 1.
    Carry,
}

fn d_stages() -> u32 {
    3
}
fn d_charts() -> usize {
    500
}
fn d_qa() -> usize {
    8
}
fn d_vcot() -> f64 {
    DEFAULT_VCOT_RATIO
}
fn d_prior() -> f64 {
    DEFAULT_PRIOR
}
fn d_seeds() -> SeedSource {
    SeedSource::Synth { count: 200 }
}
fn d_canvas() -> [u32; 2] {
    DEFAULT_CANVAS
}
fn d_chunk() -> usize {
    50
}
fn d_eval() -> EvaluatorBinding {
    EvaluatorBinding::Oracle
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default = "d_stages")]
    pub stages: u32,
    #[serde(default = "d_charts")]
    pub charts_per_stage: usize,
    #[serde(default = "d_qa")]
    pub qa_per_chart: usize,
    #[serde(default = "d_vcot")]
    pub vcot_ratio: f64,
    #[serde(default)]
    pub thresholds: Thresholds,
    #[serde(default = "d_prior")]
    pub prior: f64,
    #[serde(default)]
    pub previous_score: PreviousScore,
    #[serde(default = "d_eval")]
    pub evaluator: EvaluatorBinding,
    #[serde(default)]
    pub previous_evaluator: Option<EvaluatorBinding>,
    #[serde(default = "d_seeds")]
    pub seeds: SeedSource,
    #[serde(default)]
    pub palettes: Option<PathBuf>,
    #[serde(default = "d_canvas")]
    pub canvas: [u32; 2],
    #[serde(default = "d_chunk")]
    pub chunk_size: usize,
    #[serde(default)]
    pub write_png: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("all fields default")
    }
}

impl PipelineConfig {
    /// Read TOML, or JSON when the file ends in `.json`.
    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        let cfg: PipelineConfig = if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text).map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?
        } else {
            toml::from_str(&text).map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |m: String| Err(PipelineError::Config(m));
        if self.stages == 0 {
            return bad("stages must be at least 1".into());
        }
        if self.chunk_size == 0 {
            return bad("chunk_size must be at least 1".into());
        }
        if !(0.0..=1.0).contains(&self.vcot_ratio) {
            return bad(format!("vcot_ratio {} outside [0, 1]", self.vcot_ratio));
        }
        if !(0.0..=1.0).contains(&self.prior) {
            return bad(format!("prior {} outside [0, 1]", self.prior));
        }
        for t in [self.thresholds.tau_up, self.thresholds.tau_down] {
            if !(t > 0.0 && t <= 1.0) {
                return bad(format!("threshold {t} outside (0, 1]"));
            }
        }
        if let SeedSource::Synth { count: 0 } = self.seeds {
            return bad("seed count must be at least 1".into());
        }
        self.evaluator.validate()?;
        if let Some(p) = &self.previous_evaluator {
            p.validate()?;
        }
        if self.write_png && !cfg!(feature = "raster") {
            return bad("write_png needs the raster feature".into());
        }
        Ok(())
    }

    /// Hash of the config plus the bytes of any seed or palette file it names.
    pub fn hash(&self) -> Result<String, PipelineError> {
        let mut h = Sha256::new();
        h.update(serde_json::to_vec(self).expect("config serializes"));
        if let SeedSource::File { path } = &self.seeds {
            h.update(fs::read(path).map_err(io_err(path))?);
        }
        if let Some(path) = &self.palettes {
            h.update(fs::read(path).map_err(io_err(path))?);
        }
        Ok(hex::encode(h.finalize()))
    }

    pub fn catalog(&self) -> Result<SeedCatalog, PipelineError> {
        let catalog = match &self.seeds {
            SeedSource::Synth { count } => synthesize_catalog(self.master_seed, *count),
            SeedSource::File { path } => load_seeds(path).map_err(|e| PipelineError::Config(e.to_string()))?,
        };
        if catalog.is_empty() {
            return Err(PipelineError::Config("no valid seeds".into()));
        }
        Ok(catalog)
    }

    pub fn palette_table(&self) -> Result<PaletteTable, PipelineError> {
        match &self.palettes {
            None => Ok(PaletteTable::builtin()),
            Some(p) => PaletteTable::load(p).map_err(|e| PipelineError::Config(e.to_string())),
        }
    }

    fn uses_dual(&self) -> bool {
        self.previous_score == PreviousScore::Dual && self.previous_evaluator.is_some()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StageCounters {
    pub generated: usize,
    pub retained: usize,
    pub dropped: usize,
    pub compose_failures: usize,
    pub action_errors: usize,
    pub actions: BTreeMap<String, usize>,
    pub qa_pairs: usize,
    pub vcot_pairs: usize,
    /// Sums over identity-passing charts, for carried previous scores.
    pub e_value_sum: f64,
    pub e_visual_sum: f64,
    pub scored: usize,
}

impl StageCounters {
    pub fn mean_scores(&self) -> Option<(f64, f64)> {
        (self.scored > 0).then(|| (self.e_value_sum / self.scored as f64, self.e_visual_sum / self.scored as f64))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageState {
    /// Stage in progress, or the last stage once `complete`.
    pub stage_k: u32,
    /// Charts of `stage_k` already written.
    pub next_index: usize,
    pub master_seed: u64,
    pub prior: f64,
    pub evaluator: EvaluatorBinding,
    pub previous_evaluator: Option<EvaluatorBinding>,
    pub config_hash: String,
    pub stages: Vec<StageCounters>,
    /// Byte length of every append-only file at this checkpoint.
    pub files: BTreeMap<String, u64>,
    pub complete: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub config_hash: String,
    pub config: PipelineConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub seed_id: String,
    pub chart_index: usize,
    pub compose_seed: u64,
    pub battery_seed: u64,
    pub action_seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub refine_seed: Option<u64>,
    pub qa_seed: u64,
    pub n_vcot: usize,
    pub actions: Vec<ActionKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent_chart_id: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusRecord {
    pub chart_id: String,
    pub stage_k: u32,
    pub spec: ChartSpec,
    pub ground_truth: GroundTruth,
    pub svg_path: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub png_path: Option<String>,
    pub qa_ids: Vec<String>,
    pub provenance: Provenance,
}

/// Minimal line shape shared by corpus records and standalone compose output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChartRecord {
    pub spec: ChartSpec,
    pub ground_truth: GroundTruth,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QaRecord {
    pub stage_k: u32,
    pub chart_type: ChartType,
    #[serde(flatten)]
    pub pair: QaPair,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreviousRecord {
    pub source: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub answers: Option<Vec<String>>,
    pub e_value: f64,
    pub e_visual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalLogRecord {
    pub stage_k: u32,
    pub chart_index: usize,
    pub chart_id: String,
    pub seed_id: String,
    pub battery: EvalBattery,
    pub answers: Vec<String>,
    pub score: EvalScore,
    pub previous: PreviousRecord,
    pub delta_value: f64,
    pub delta_visual: f64,
    pub action: ActionKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub action_error: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_chart_id: Option<String>,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    /// Stop (with a checkpoint) after this many charts in this invocation.
    pub stop_after: Option<usize>,
}

/// Everything one chart index contributes to the corpus.
struct ChartOutcome {
    log: Option<EvalLogRecord>,
    retained: Option<Retained>,
    transcripts: Vec<Transcript>,
    compose_failed: bool,
}

struct Retained {
    record: CorpusRecord,
    svg: Vec<u8>,
    png: Option<Vec<u8>>,
    qa: Vec<QaRecord>,
}

struct Candidate {
    index: usize,
    seed: ChartSeed,
    compose_seed: u64,
    spec: ChartSpec,
    gt: GroundTruth,
    battery: EvalBattery,
    battery_seed: u64,
    image: Option<Vec<u8>>,
}

fn stream(name: &str, k: u32) -> String {
    format!("{name}/stage{k}")
}

/// Compose a chart for `(stage, index)`, retrying with fresh seeds on capacity errors.
pub fn compose_indexed(
    master: u64,
    k: u32,
    index: usize,
    catalog: &SeedCatalog,
    palettes: &PaletteTable,
    options: &ComposeOptions,
) -> Option<(ChartSeed, u64, ChartSpec, GroundTruth)> {
    let pick = split_seed(master, &stream("pick", k), index as u64);
    let seed = &catalog.seeds[(pick % catalog.len() as u64) as usize];
    for attempt in 0..COMPOSE_ATTEMPTS {
        let compose_seed = split_seed(master, &format!("compose/stage{k}/try{attempt}"), index as u64);
        match compose_chart(seed, palettes, compose_seed, options) {
            Ok((spec, gt)) => return Some((seed.clone(), compose_seed, spec, gt)),
            Err(e) => log::debug!("compose {} attempt {attempt}: {e}", seed.seed_id),
        }
    }
    None
}

pub fn image_for(binding: &EvaluatorBinding, svg: &[u8]) -> Result<Option<Vec<u8>>, PipelineError> {
    match binding {
        EvaluatorBinding::Remote(r) => match r.image_format {
            ImageFormat::Svg => Ok(Some(svg.to_vec())),
            ImageFormat::Png => raster(svg).map(Some),
        },
        _ => Ok(None),
    }
}

#[cfg(feature = "raster")]
fn raster(svg: &[u8]) -> Result<Vec<u8>, PipelineError> {
    crate::render::rasterize_png(svg).map_err(|e| PipelineError::Integrity(e.to_string()))
}

#[cfg(not(feature = "raster"))]
fn raster(_: &[u8]) -> Result<Vec<u8>, PipelineError> {
    Err(PipelineError::Config("PNG images need the raster feature".into()))
}

pub fn ask_items(battery: &EvalBattery) -> Vec<AskItem> {
    battery
        .items
        .iter()
        .map(|i| AskItem {
            item_id: i.item_id.clone(),
            question: i.question.clone(),
            answer_kind: i.answer_kind,
            probe: i.probe.clone(),
        })
        .collect()
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), PipelineError> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes).map_err(io_err(&tmp))?;
    fs::rename(&tmp, path).map_err(io_err(path))
}

fn to_line<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string(v).expect("record serializes");
    s.push('\n');
    s
}

/// A corpus run bound to a directory.
pub struct Pipeline {
    pub config: PipelineConfig,
    pub dir: PathBuf,
    pub state: StageState,
    catalog: SeedCatalog,
    palettes: PaletteTable,
    current: Gateway,
    previous: Option<Gateway>,
}

impl Pipeline {
    /// Start a fresh run. Refuses a directory that already holds a checkpoint.
    pub fn create(config: PipelineConfig, dir: &Path) -> Result<Pipeline, PipelineError> {
        config.validate()?;
        if dir.join(STATE_FILE).exists() {
            return Err(PipelineError::Integrity(format!(
                "{} already holds a run; resume it or pick another directory",
                dir.display()
            )));
        }
        fs::create_dir_all(dir.join(CHARTS_DIR)).map_err(io_err(dir))?;
        let hash = config.hash()?;
        let manifest = Manifest {
            tool: "chartloop".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            config_hash: hash.clone(),
            config: config.clone(),
        };
        write_atomic(
            &dir.join(MANIFEST_FILE),
            serde_json::to_string_pretty(&manifest).expect("manifest serializes").as_bytes(),
        )?;
        for f in APPEND_FILES {
            File::create(dir.join(f)).map_err(io_err(&dir.join(f)))?;
        }
        let state = StageState {
            stage_k: 1,
            next_index: 0,
            master_seed: config.master_seed,
            prior: config.prior,
            evaluator: config.evaluator.clone(),
            previous_evaluator: config.previous_evaluator.clone(),
            config_hash: hash,
            stages: vec![StageCounters::default()],
            files: APPEND_FILES.iter().map(|f| (f.to_string(), 0)).collect(),
            complete: false,
        };
        let p = Pipeline::bind(config, dir, state)?;
        p.checkpoint()?;
        Ok(p)
    }

    /// Reopen a run from its checkpoint. With `config`, its hash must match the manifest.
    pub fn resume(dir: &Path, config: Option<PipelineConfig>) -> Result<Pipeline, PipelineError> {
        let state_path = dir.join(STATE_FILE);
        let manifest_path = dir.join(MANIFEST_FILE);
        if !state_path.exists() || !manifest_path.exists() {
            return Err(PipelineError::Integrity(format!("{} has no checkpoint", dir.display())));
        }
        let state: StageState = serde_json::from_slice(&fs::read(&state_path).map_err(io_err(&state_path))?)
            .map_err(|e| PipelineError::Integrity(format!("{STATE_FILE}: {e}")))?;
        let manifest: Manifest = serde_json::from_slice(&fs::read(&manifest_path).map_err(io_err(&manifest_path))?)
            .map_err(|e| PipelineError::Integrity(format!("{MANIFEST_FILE}: {e}")))?;
        if manifest.config.hash()? != manifest.config_hash || manifest.config_hash != state.config_hash {
            return Err(PipelineError::Integrity(format!("{MANIFEST_FILE} and {STATE_FILE} disagree")));
        }
        let config = config.unwrap_or(manifest.config);
        config.validate()?;
        let hash = config.hash()?;
        if hash != manifest.config_hash {
            return Err(PipelineError::Config(format!(
                "config hash {hash} does not match the corpus ({})",
                manifest.config_hash
            )));
        }
        for (name, len) in &state.files {
            let path = dir.join(name);
            let f = OpenOptions::new().write(true).open(&path).map_err(|_| {
                PipelineError::Integrity(format!("{name} is missing"))
            })?;
            let actual = f.metadata().map_err(io_err(&path))?.len();
            if actual < *len {
                return Err(PipelineError::Integrity(format!("{name} is shorter than its checkpoint")));
            }
            // Drop anything written after the checkpoint.
            f.set_len(*len).map_err(io_err(&path))?;
        }
        verify_tail(dir, &state)?;
        Pipeline::bind(config, dir, state)
    }

    fn bind(config: PipelineConfig, dir: &Path, state: StageState) -> Result<Pipeline, PipelineError> {
        let catalog = config.catalog()?;
        let palettes = config.palette_table()?;
        let current = Gateway::new(config.evaluator.clone())?;
        let previous = match (&config.previous_evaluator, config.previous_score) {
            (Some(b), PreviousScore::Dual) => Some(Gateway::new(b.clone())?),
            _ => None,
        };
        Ok(Pipeline {
            config,
            dir: dir.to_path_buf(),
            state,
            catalog,
            palettes,
            current,
            previous,
        })
    }

    fn checkpoint(&self) -> Result<(), PipelineError> {
        let bytes = serde_json::to_string_pretty(&self.state).expect("state serializes");
        write_atomic(&self.dir.join(STATE_FILE), bytes.as_bytes())
    }

    /// Run stages until done or until `opts.stop_after` charts were processed.
    pub fn run(&mut self, opts: RunOptions) -> Result<&StageState, PipelineError> {
        let mut budget = opts.stop_after.unwrap_or(usize::MAX);
        while !self.state.complete && budget > 0 {
            budget -= self.run_stage_bounded(budget)?;
        }
        Ok(&self.state)
    }

    /// Finish the stage in progress.
    pub fn run_stage(&mut self) -> Result<&StageState, PipelineError> {
        self.run_stage_bounded(usize::MAX)?;
        Ok(&self.state)
    }

    fn previous_means(&self, k: u32) -> (f64, f64) {
        if k <= 1 {
            return (self.config.prior, self.config.prior);
        }
        self.state.stages[(k - 2) as usize]
            .mean_scores()
            .unwrap_or((self.config.prior, self.config.prior))
    }

    fn run_stage_bounded(&mut self, budget: usize) -> Result<usize, PipelineError> {
        let k = self.state.stage_k;
        let mut done = 0;
        while self.state.next_index < self.config.charts_per_stage && done < budget {
            let start = self.state.next_index;
            let end = (start + self.config.chunk_size)
                .min(self.config.charts_per_stage)
                .min(start.saturating_add(budget - done));
            let outcomes = self.process_chunk(k, start..end)?;
            self.write_chunk(k, outcomes)?;
            self.state.next_index = end;
            done += end - start;
            self.checkpoint()?;
        }
        if self.state.next_index >= self.config.charts_per_stage {
            if k >= self.config.stages {
                self.state.complete = true;
            } else {
                self.state.stage_k += 1;
                self.state.next_index = 0;
                self.state.stages.push(StageCounters::default());
            }
            self.checkpoint()?;
        }
        Ok(done.max(1))
    }

    fn process_chunk(&self, k: u32, range: std::ops::Range<usize>) -> Result<Vec<ChartOutcome>, PipelineError> {
        let cfg = &self.config;
        let master = cfg.master_seed;
        let options = ComposeOptions { canvas: cfg.canvas };
        let candidates: Vec<Result<Option<Candidate>, PipelineError>> = range
            .clone()
            .into_par_iter()
            .map(|i| {
                let Some((seed, compose_seed, spec, gt)) =
                    compose_indexed(master, k, i, &self.catalog, &self.palettes, &options)
                else {
                    return Ok(None);
                };
                let battery_seed = split_seed(master, &stream("battery", k), i as u64);
                let battery = build_battery(&gt, &spec, &mut rng_from_seed(battery_seed))
                    .map_err(|e| PipelineError::Integrity(format!("{}: {e}", gt.chart_id)))?;
                let svg = render_svg(&spec).map_err(|e| PipelineError::Integrity(format!("{}: {e}", gt.chart_id)))?;
                let image = if cfg.evaluator.is_remote() {
                    image_for(&cfg.evaluator, &svg)?
                } else if let Some(p) = cfg.previous_evaluator.as_ref().filter(|_| cfg.uses_dual()) {
                    image_for(p, &svg)?
                } else {
                    None
                };
                Ok(Some(Candidate {
                    index: i,
                    seed,
                    compose_seed,
                    spec,
                    gt,
                    battery,
                    battery_seed,
                    image,
                }))
            })
            .collect();
        let mut slots: Vec<Option<Candidate>> = Vec::with_capacity(candidates.len());
        for c in candidates {
            slots.push(c?);
        }
        let live: Vec<&Candidate> = slots.iter().flatten().collect();
        let requests: Vec<ChartRequest> = live
            .iter()
            .map(|c| ChartRequest {
                spec: &c.spec,
                gt: &c.gt,
                image: c.image.as_deref(),
                items: ask_items(&c.battery),
            })
            .collect();
        let mut current = Vec::with_capacity(live.len());
        for r in self.current.ask_many(&requests) {
            current.push(r?);
        }
        let mut previous = vec![None; live.len()];
        if let Some(gw) = &self.previous {
            for (slot, r) in previous.iter_mut().zip(gw.ask_many(&requests)) {
                *slot = Some(r?);
            }
        }
        let carried = self.previous_means(k);
        let mut answered = current.into_iter().zip(previous);
        let mut outcomes: Vec<Result<ChartOutcome, PipelineError>> = Vec::with_capacity(slots.len());
        let jobs: Vec<_> = slots
            .into_iter()
            .map(|slot| slot.map(|c| (c, answered.next().expect("answer per live chart"))))
            .collect();
        jobs.into_par_iter()
            .map(|job| match job {
                None => Ok(ChartOutcome {
                    log: None,
                    retained: None,
                    transcripts: Vec::new(),
                    compose_failed: true,
                }),
                Some((c, (cur, prev))) => self.refine(k, c, cur, prev, carried),
            })
            .collect_into_vec(&mut outcomes);
        outcomes.into_iter().collect()
    }

    fn refine(
        &self,
        k: u32,
        c: Candidate,
        cur: crate::gateway::ChartAnswers,
        prev: Option<crate::gateway::ChartAnswers>,
        carried: (f64, f64),
    ) -> Result<ChartOutcome, PipelineError> {
        let cfg = &self.config;
        let master = cfg.master_seed;
        let i = c.index as u64;
        let score = score_chart(&c.battery, &normalize_battery_answers(&c.battery, &cur.answers), k)
            .map_err(|e| PipelineError::Integrity(e.to_string()))?;
        let mut transcripts = cur.transcripts;
        let previous = match prev {
            Some(p) => {
                let s = score_chart(&c.battery, &normalize_battery_answers(&c.battery, &p.answers), k)
                    .map_err(|e| PipelineError::Integrity(e.to_string()))?;
                transcripts.extend(p.transcripts);
                PreviousRecord {
                    source: "previous_evaluator".into(),
                    answers: Some(p.answers),
                    e_value: s.e_value,
                    e_visual: s.e_visual,
                }
            }
            None => PreviousRecord {
                source: if k == 1 { "prior" } else { "carried" }.into(),
                answers: None,
                e_value: carried.0,
                e_visual: carried.1,
            },
        };
        let action_seed = split_seed(master, &stream("action", k), i);
        let action = select_action(
            &score,
            previous.e_value,
            previous.e_visual,
            cfg.thresholds,
            c.spec.chart_type,
            &mut rng_from_seed(action_seed),
        );
        let refine_seed = split_seed(master, &stream("refine", k), i);
        let ctx = ActionContext {
            seed: &c.seed,
            palettes: &self.palettes,
        };
        let new_id = chart_id_for(&c.seed.seed_id, refine_seed);
        let mut action_error = None;
        let (out, applied) = match apply_action(&c.spec, &c.gt, action, &ctx, &new_id, &mut rng_from_seed(refine_seed)) {
            Ok(Some(pair)) => (Some(pair), action != ActionKind::None),
            Ok(None) => (None, false),
            Err(e) => {
                // Keep the unrefined chart when an action cannot be carried out.
                action_error = Some(e.to_string());
                (Some((c.spec.clone(), c.gt.clone())), false)
            }
        };
        let mut log = EvalLogRecord {
            stage_k: k,
            chart_index: c.index,
            chart_id: c.gt.chart_id.clone(),
            seed_id: c.seed.seed_id.clone(),
            battery: c.battery,
            answers: cur.answers,
            delta_value: round9(score.e_value - previous.e_value),
            delta_visual: round9(score.e_visual - previous.e_visual),
            score,
            previous,
            action,
            action_error,
            output_chart_id: None,
        };
        let retained = match out {
            None => None,
            Some((spec, gt)) => {
                let global = u64::from(k - 1) * cfg.charts_per_stage as u64 + i;
                let n_vcot = vcot_quota(global, cfg.qa_per_chart, cfg.vcot_ratio);
                let qa_seed = split_seed(master, &stream("qa", k), i);
                let batch =
                    generate_qa_batch_with_quota(&gt, &spec, cfg.qa_per_chart, n_vcot, &mut rng_from_seed(qa_seed));
                let svg = render_svg(&spec).map_err(|e| PipelineError::Integrity(format!("{}: {e}", spec.chart_id)))?;
                let png = if cfg.write_png { Some(raster(&svg)?) } else { None };
                log.output_chart_id = Some(spec.chart_id.clone());
                let record = CorpusRecord {
                    chart_id: spec.chart_id.clone(),
                    stage_k: k,
                    svg_path: format!("{CHARTS_DIR}/{}.svg", spec.chart_id),
                    png_path: png.as_ref().map(|_| format!("{CHARTS_DIR}/{}.png", spec.chart_id)),
                    qa_ids: batch.pairs.iter().map(|p| p.qa_id.clone()).collect(),
                    provenance: Provenance {
                        seed_id: c.seed.seed_id.clone(),
                        chart_index: c.index,
                        compose_seed: c.compose_seed,
                        battery_seed: c.battery_seed,
                        action_seed,
                        refine_seed: applied.then_some(refine_seed),
                        qa_seed,
                        n_vcot,
                        actions: if applied { vec![action] } else { Vec::new() },
                        parent_chart_id: applied.then(|| c.gt.chart_id.clone()),
                    },
                    spec,
                    ground_truth: gt,
                };
                let qa = batch
                    .pairs
                    .into_iter()
                    .map(|pair| QaRecord {
                        stage_k: k,
                        chart_type: record.spec.chart_type,
                        pair,
                    })
                    .collect();
                Some(Retained { record, svg, png, qa })
            }
        };
        Ok(ChartOutcome {
            log: Some(log),
            retained,
            transcripts,
            compose_failed: false,
        })
    }

    fn write_chunk(&mut self, k: u32, outcomes: Vec<ChartOutcome>) -> Result<(), PipelineError> {
        let mut buf: BTreeMap<&str, String> = APPEND_FILES.iter().map(|f| (*f, String::new())).collect();
        debug_assert_eq!(self.state.stages.len(), k as usize);
        let counters = self.state.stages.last_mut().expect("stage counters");
        for o in outcomes {
            if o.compose_failed {
                counters.compose_failures += 1;
                continue;
            }
            counters.generated += 1;
            for t in &o.transcripts {
                buf.get_mut(TRANSCRIPTS_FILE).unwrap().push_str(&to_line(t));
            }
            let log = o.log.expect("evaluated chart has a log");
            *counters.actions.entry(log.action.as_str().to_string()).or_default() += 1;
            if log.action_error.is_some() {
                counters.action_errors += 1;
            }
            if log.score.identity_pass {
                counters.scored += 1;
                counters.e_value_sum += log.score.e_value;
                counters.e_visual_sum += log.score.e_visual;
            }
            buf.get_mut(EVAL_LOG_FILE).unwrap().push_str(&to_line(&log));
            match o.retained {
                None => counters.dropped += 1,
                Some(r) => {
                    counters.retained += 1;
                    let charts = self.dir.join(CHARTS_DIR);
                    let svg_path = self.dir.join(&r.record.svg_path);
                    fs::write(&svg_path, &r.svg).map_err(io_err(&svg_path))?;
                    if let Some(png) = &r.png {
                        let p = charts.join(format!("{}.png", r.record.chart_id));
                        fs::write(&p, png).map_err(io_err(&p))?;
                    }
                    for q in &r.qa {
                        counters.qa_pairs += 1;
                        counters.vcot_pairs += usize::from(q.pair.form == QaForm::Vcot);
                        buf.get_mut(QA_FILE).unwrap().push_str(&to_line(q));
                    }
                    buf.get_mut(SPECS_FILE).unwrap().push_str(&to_line(&r.record));
                }
            }
        }
        for (name, text) in buf {
            let path = self.dir.join(name);
            let mut f = OpenOptions::new().append(true).open(&path).map_err(io_err(&path))?;
            f.write_all(text.as_bytes()).map_err(io_err(&path))?;
            f.sync_data().map_err(io_err(&path))?;
            let len = f.metadata().map_err(io_err(&path))?.len();
            self.state.files.insert(name.to_string(), len);
        }
        Ok(())
    }
}

fn round9(x: f64) -> f64 {
    (x * 1e9).round() / 1e9
}

/// Every line kept by the checkpoint must parse, and every retained chart's SVG must exist.
fn verify_tail(dir: &Path, state: &StageState) -> Result<(), PipelineError> {
    for rec in read_jsonl::<CorpusRecord>(&dir.join(SPECS_FILE))? {
        let rec = rec?;
        if !dir.join(&rec.svg_path).exists() {
            return Err(PipelineError::Integrity(format!("{}: missing {}", rec.chart_id, rec.svg_path)));
        }
    }
    for name in [QA_FILE, EVAL_LOG_FILE, TRANSCRIPTS_FILE] {
        for line in read_jsonl::<serde_json::Value>(&dir.join(name))? {
            line?;
        }
    }
    let counted: usize = state.stages.iter().map(|s| s.retained).sum();
    let lines = read_jsonl::<serde_json::Value>(&dir.join(SPECS_FILE))?.count();
    if counted != lines {
        return Err(PipelineError::Integrity(format!(
            "{SPECS_FILE} holds {lines} records but the checkpoint counts {counted}"
        )));
    }
    Ok(())
}

/// Lazily parse a line-delimited file. Parse failures name the offending record.
pub fn read_jsonl<T: for<'de> Deserialize<'de>>(
    path: &Path,
) -> Result<impl Iterator<Item = Result<T, PipelineError>>, PipelineError> {
    let file = File::open(path).map_err(io_err(path))?;
    let name = path.display().to_string();
    Ok(BufReader::new(file)
        .lines()
        .enumerate()
        .filter(|(_, l)| l.as_ref().map(|l| !l.trim().is_empty()).unwrap_or(true))
        .map(move |(n, line)| {
            let line = line.map_err(|source| PipelineError::Io {
                path: name.clone(),
                source,
            })?;
            serde_json::from_str(&line).map_err(|e| {
                let id = serde_json::from_str::<serde_json::Value>(&line)
                    .ok()
                    .and_then(|v| {
                        ["chart_id", "qa_id", "item_id"]
                            .iter()
                            .find_map(|k| v.get(*k).and_then(|s| s.as_str()).map(str::to_string))
                    })
                    .unwrap_or_else(|| format!("line {}", n + 1));
                PipelineError::Integrity(format!("{name}: record {id}: {e}"))
            })
        }))
}

pub fn read_all<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>, PipelineError> {
    read_jsonl(path)?.collect()
}

pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<(), PipelineError> {
    let text: String = items.iter().map(to_line).collect();
    fs::write(path, text).map_err(io_err(path))
}

/// Rebuild a corpus record's spec, SVG and QA pairs from its provenance alone.
pub fn replay(
    record: &CorpusRecord,
    config: &PipelineConfig,
    catalog: &SeedCatalog,
    palettes: &PaletteTable,
) -> Result<(ChartSpec, Vec<u8>, Vec<QaPair>), PipelineError> {
    let p = &record.provenance;
    let seed = catalog
        .get(&p.seed_id)
        .ok_or_else(|| PipelineError::Integrity(format!("{}: unknown seed {}", record.chart_id, p.seed_id)))?;
    let options = ComposeOptions { canvas: config.canvas };
    let (mut spec, mut gt) = compose_chart(seed, palettes, p.compose_seed, &options)
        .map_err(|e| PipelineError::Integrity(format!("{}: {e}", record.chart_id)))?;
    for action in &p.actions {
        let refine_seed = p
            .refine_seed
            .ok_or_else(|| PipelineError::Integrity(format!("{}: action without seed", record.chart_id)))?;
        let ctx = ActionContext { seed, palettes };
        let id = chart_id_for(&seed.seed_id, refine_seed);
        let (s, g) = apply_action(&spec, &gt, *action, &ctx, &id, &mut rng_from_seed(refine_seed))
            .map_err(|e| PipelineError::Integrity(e.to_string()))?
            .ok_or_else(|| PipelineError::Integrity(format!("{}: replayed a drop", record.chart_id)))?;
        spec = s;
        gt = g;
    }
    let svg = render_svg(&spec).map_err(|e| PipelineError::Integrity(e.to_string()))?;
    let qa = generate_qa_batch_with_quota(&gt, &spec, config.qa_per_chart, p.n_vcot, &mut rng_from_seed(p.qa_seed));
    Ok((spec, svg, qa.pairs))
}

/// One line of an answers file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnswerLine {
    pub qa_id: String,
    pub answer: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradeOutcome {
    pub records: Vec<GradeRecord>,
    pub report: Report,
    pub missing_answers: usize,
}

/// Grade predictions against QA records. Missing answers count as incorrect.
pub fn grade_files(qa_path: &Path, answers_path: &Path) -> Result<GradeOutcome, PipelineError> {
    let answers: BTreeMap<String, String> = read_all::<AnswerLine>(answers_path)?
        .into_iter()
        .map(|a| (a.qa_id, a.answer))
        .collect();
    let mut missing = 0;
    let mut records = Vec::new();
    for q in read_all::<QaRecord>(qa_path)? {
        let raw = answers.get(&q.pair.qa_id).cloned().unwrap_or_else(|| {
            missing += 1;
            String::new()
        });
        let predicted = normalize_answer(&raw, q.pair.answer_kind);
        let correct = grade(&predicted, &q.pair.gold, q.pair.tolerance);
        records.push(GradeRecord {
            qa_id: q.pair.qa_id,
            chart_id: q.pair.chart_id,
            predicted,
            gold: q.pair.gold,
            tolerance: q.pair.tolerance,
            correct,
            chart_type: q.chart_type,
            retrieval_class: q.pair.retrieval_class,
        });
    }
    let report = aggregate(&records);
    Ok(GradeOutcome {
        records,
        report,
        missing_answers: missing,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageReport {
    pub stage_k: u32,
    #[serde(flatten)]
    pub counters: StageCounters,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub complete: bool,
    pub stages: Vec<StageReport>,
    pub family_coverage: BTreeMap<String, usize>,
    pub qa_total: usize,
    pub vcot_fraction: f64,
    /// Continuous-axis charts only.
    pub tick_branches: BTreeMap<String, usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grading: Option<Report>,
}

pub fn report(dir: &Path, answers: Option<&Path>) -> Result<RunReport, PipelineError> {
    let state_path = dir.join(STATE_FILE);
    let state: StageState = serde_json::from_slice(&fs::read(&state_path).map_err(io_err(&state_path))?)
        .map_err(|e| PipelineError::Integrity(format!("{STATE_FILE}: {e}")))?;
    let mut family_coverage: BTreeMap<String, usize> =
        crate::qa::families().into_iter().map(|f| (f.as_str(), 0)).collect();
    let mut qa_total = 0;
    let mut vcot = 0;
    for q in read_jsonl::<QaRecord>(&dir.join(QA_FILE))? {
        let q = q?;
        qa_total += 1;
        vcot += usize::from(q.pair.form == QaForm::Vcot);
        *family_coverage.entry(q.pair.family.as_str()).or_default() += 1;
    }
    let mut tick_branches = BTreeMap::new();
    for rec in read_jsonl::<ChartRecord>(&dir.join(SPECS_FILE))? {
        let rec = rec?;
        if rec.spec.tick_branch != TickBranch::NotApplicable {
            let name = serde_json::to_value(rec.spec.tick_branch).expect("branch serializes");
            *tick_branches.entry(name.as_str().unwrap_or_default().to_string()).or_default() += 1;
        }
    }
    let grading = match answers {
        Some(a) => Some(grade_files(&dir.join(QA_FILE), a)?.report),
        None => None,
    };
    Ok(RunReport {
        complete: state.complete,
        stages: state
            .stages
            .into_iter()
            .enumerate()
            .map(|(i, counters)| StageReport {
                stage_k: i as u32 + 1,
                counters,
            })
            .collect(),
        family_coverage,
        qa_total,
        vcot_fraction: if qa_total == 0 { 0.0 } else { vcot as f64 / qa_total as f64 },
        tick_branches,
        grading,
    })
}

impl fmt::Display for RunReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "run complete: {}", self.complete)?;
        writeln!(
            f,
            "{:<6} {:>9} {:>9} {:>8} {:>9} {:>9}",
            "stage", "generated", "retained", "dropped", "qa pairs", "failures"
        )?;
        for s in &self.stages {
            let c = &s.counters;
            writeln!(
                f,
                "{:<6} {:>9} {:>9} {:>8} {:>9} {:>9}",
                s.stage_k,
                c.generated,
                c.retained,
                c.dropped,
                c.qa_pairs,
                c.compose_failures + c.action_errors
            )?;
        }
        writeln!(f, "\nactions")?;
        for s in &self.stages {
            let parts: Vec<String> = s.counters.actions.iter().map(|(a, n)| format!("{a}={n}")).collect();
            writeln!(f, "  stage {}: {}", s.stage_k, parts.join(" "))?;
        }
        writeln!(f, "\nvCoT fraction: {:.4} of {} pairs", self.vcot_fraction, self.qa_total)?;
        let ticks: usize = self.tick_branches.values().sum();
        writeln!(f, "tick omission over {ticks} continuous-axis charts")?;
        for (b, n) in &self.tick_branches {
            writeln!(f, "  {b:<18} {n:>6} {:.3}", *n as f64 / ticks.max(1) as f64)?;
        }
        writeln!(f, "\nfamily coverage")?;
        for (fam, n) in &self.family_coverage {
            writeln!(f, "  {fam:<28} {n:>6}")?;
        }
        if let Some(g) = &self.grading {
            writeln!(f, "\ngrading\n{g}")?;
        }
        Ok(())
    }
}

/// Evaluate standalone charts without refining them.
pub fn evaluate_charts(
    charts: &[ChartRecord],
    gateway: &Gateway,
    master_seed: u64,
    prior: f64,
    thresholds: Thresholds,
) -> Result<(Vec<EvalLogRecord>, Vec<Transcript>), PipelineError> {
    let prepared: Vec<(EvalBattery, Option<Vec<u8>>, u64)> = charts
        .par_iter()
        .enumerate()
        .map(|(i, c)| {
            let battery_seed = split_seed(master_seed, "battery/standalone", i as u64);
            let battery = build_battery(&c.ground_truth, &c.spec, &mut rng_from_seed(battery_seed))
                .map_err(|e| PipelineError::Integrity(format!("{}: {e}", c.spec.chart_id)))?;
            let svg = render_svg(&c.spec).map_err(|e| PipelineError::Integrity(e.to_string()))?;
            Ok((battery, image_for(gateway.binding(), &svg)?, battery_seed))
        })
        .collect::<Result<_, PipelineError>>()?;
    let requests: Vec<ChartRequest> = charts
        .iter()
        .zip(&prepared)
        .map(|(c, (b, img, _))| ChartRequest {
            spec: &c.spec,
            gt: &c.ground_truth,
            image: img.as_deref(),
            items: ask_items(b),
        })
        .collect();
    let answers = gateway.ask_many(&requests);
    drop(requests);
    let mut logs = Vec::new();
    let mut transcripts = Vec::new();
    for (i, ((c, (battery, _, _)), ans)) in charts.iter().zip(prepared).zip(answers).enumerate() {
        let ans = ans?;
        let score = score_chart(&battery, &normalize_battery_answers(&battery, &ans.answers), 1)
            .map_err(|e| PipelineError::Integrity(e.to_string()))?;
        let action = select_action(
            &score,
            prior,
            prior,
            thresholds,
            c.spec.chart_type,
            &mut rng_from_seed(split_seed(master_seed, "action/standalone", i as u64)),
        );
        transcripts.extend(ans.transcripts);
        logs.push(EvalLogRecord {
            stage_k: 1,
            chart_index: i,
            chart_id: c.spec.chart_id.clone(),
            seed_id: c.spec.seed_id.clone(),
            battery,
            answers: ans.answers,
            delta_value: round9(score.e_value - prior),
            delta_visual: round9(score.e_visual - prior),
            score,
            previous: PreviousRecord {
                source: "prior".into(),
                answers: None,
                e_value: prior,
                e_visual: prior,
            },
            action,
            action_error: None,
            output_chart_id: None,
        });
    }
    Ok((logs, transcripts))
}

/// Compose `count` standalone charts, cycling through the catalog.
pub fn compose_many(
    catalog: &SeedCatalog,
    palettes: &PaletteTable,
    master_seed: u64,
    count: usize,
    options: &ComposeOptions,
) -> Vec<ChartRecord> {
    (0..count)
        .into_par_iter()
        .filter_map(|i| {
            compose_indexed(master_seed, 0, i, catalog, palettes, options)
                .map(|(_, _, spec, ground_truth)| ChartRecord { spec, ground_truth })
        })
        .collect()
}

/// Sample QA pairs for standalone charts at a running vCoT ratio.
pub fn qa_many(charts: &[ChartRecord], master_seed: u64, per_chart: usize, vcot_ratio: f64) -> Vec<QaRecord> {
    charts
        .par_iter()
        .enumerate()
        .flat_map_iter(|(i, c)| {
            let n_vcot = vcot_quota(i as u64, per_chart, vcot_ratio);
            let mut rng = rng_from_seed(split_seed(master_seed, "qa/standalone", i as u64));
            generate_qa_batch_with_quota(&c.ground_truth, &c.spec, per_chart, n_vcot, &mut rng)
                .pairs
                .into_iter()
                .map(|pair| QaRecord {
                    stage_k: 0,
                    chart_type: c.spec.chart_type,
                    pair,
                })
                .collect::<Vec<_>>()
        })
        .collect()
}
