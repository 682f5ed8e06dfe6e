//! Evaluator bindings: a remote chat-completion model, a ground-truth oracle,
//! and a seeded noisy oracle.

use std::num::NonZeroU32;
use std::sync::atomic::{AtomicU32, Ordering};
use std::sync::Arc;
use std::time::Duration;

use backon::{ExponentialBuilder, Retryable};
use base64::Engine;
use governor::{DefaultDirectRateLimiter, Quota, RateLimiter};
use rand::seq::IndexedRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use thiserror::Error;
use tokio::sync::Semaphore;

use crate::answer::{Answer, AnswerKind};
use crate::chart::{ChartSpec, GroundTruth};
use crate::color::ColorName;
use crate::eval::{title_is_clear, Probe};
use crate::qa::derive_answer;
use crate::rng::{rng_from_seed, split_seed};

pub const DEFAULT_PROMPT: &str = "You will play as a chart reading expert. You should ONLY give the answer STRING or NUMBER, without any units. You should Not Give Any Explanation.";
pub const DEFAULT_TOKEN_ENV: &str = "CHARTLOOP_API_TOKEN";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum EvaluatorBinding {
    Remote(RemoteBinding),
    Oracle,
    NoisyOracle(NoisyBinding),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImageFormat {
    #[default]
    Png,
    Svg,
}

impl ImageFormat {
    pub fn mime(self) -> &'static str {
        match self {
            ImageFormat::Png => "image/png",
            ImageFormat::Svg => "image/svg+xml",
        }
    }
}

fn default_token_env() -> String {
    DEFAULT_TOKEN_ENV.into()
}
fn default_concurrency() -> usize {
    8
}
fn default_retry_budget() -> u32 {
    4
}
fn default_backoff_base() -> u64 {
    200
}
fn default_backoff_max() -> u64 {
    5000
}
fn default_timeout() -> u64 {
    30
}
fn default_prompt() -> String {
    DEFAULT_PROMPT.into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemoteBinding {
    pub endpoint_url: String,
    pub model: String,
    #[serde(default = "default_token_env")]
    pub token_env: String,
    #[serde(default = "default_concurrency")]
    pub max_concurrent: usize,
    /// Token-bucket refill rate; unlimited when absent.
    #[serde(default)]
    pub requests_per_second: Option<u32>,
    #[serde(default)]
    pub burst: Option<u32>,
    /// Extra attempts allowed per item after the first.
    #[serde(default = "default_retry_budget")]
    pub retry_budget: u32,
    #[serde(default = "default_backoff_base")]
    pub backoff_base_ms: u64,
    #[serde(default = "default_backoff_max")]
    pub backoff_max_ms: u64,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
    #[serde(default)]
    pub temperature: f64,
    #[serde(default = "default_prompt")]
    pub prompt: String,
    #[serde(default)]
    pub image_format: ImageFormat,
}

impl RemoteBinding {
    pub fn new(endpoint_url: &str, model: &str) -> Self {
        RemoteBinding {
            endpoint_url: endpoint_url.into(),
            model: model.into(),
            token_env: default_token_env(),
            max_concurrent: default_concurrency(),
            requests_per_second: None,
            burst: None,
            retry_budget: default_retry_budget(),
            backoff_base_ms: default_backoff_base(),
            backoff_max_ms: default_backoff_max(),
            timeout_secs: default_timeout(),
            temperature: 0.0,
            prompt: default_prompt(),
            image_format: ImageFormat::Png,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseScope {
    #[default]
    All,
    Identity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoisyBinding {
    pub error_rate: f64,
    pub seed: u64,
    #[serde(default)]
    pub scope: NoiseScope,
}

impl EvaluatorBinding {
    pub fn validate(&self) -> Result<(), GatewayError> {
        match self {
            EvaluatorBinding::Remote(r) => {
                if r.endpoint_url.trim().is_empty() {
                    return Err(GatewayError::Config("remote binding needs endpoint_url".into()));
                }
                if r.model.trim().is_empty() {
                    return Err(GatewayError::Config("remote binding needs a model name".into()));
                }
                if r.max_concurrent == 0 {
                    return Err(GatewayError::Config("max_concurrent must be at least 1".into()));
                }
                if r.requests_per_second == Some(0) {
                    return Err(GatewayError::Config("requests_per_second must be positive".into()));
                }
                Ok(())
            }
            EvaluatorBinding::Oracle => Ok(()),
            EvaluatorBinding::NoisyOracle(n) => {
                if (0.0..=1.0).contains(&n.error_rate) {
                    Ok(())
                } else {
                    Err(GatewayError::Config(format!("error_rate {} outside [0, 1]", n.error_rate)))
                }
            }
        }
    }

    pub fn is_remote(&self) -> bool {
        matches!(self, EvaluatorBinding::Remote(_))
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GatewayError {
    #[error("evaluator configuration: {0}")]
    Config(String),
    #[error("transport failure on {item_id}: {message}")]
    Transport { item_id: String, message: String },
    #[error("malformed response for {item_id}: {message}")]
    Protocol { item_id: String, message: String },
    #[error("oracle cannot answer {item_id}: {message}")]
    Oracle { item_id: String, message: String },
}

/// One question put to an evaluator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AskItem {
    pub item_id: String,
    pub question: String,
    pub answer_kind: AnswerKind,
    pub probe: Probe,
}

/// All questions about one chart, with the rendered image for remote models.
#[derive(Debug, Clone)]
pub struct ChartRequest<'a> {
    pub spec: &'a ChartSpec,
    pub gt: &'a GroundTruth,
    pub image: Option<&'a [u8]>,
    pub items: Vec<AskItem>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transcript {
    pub chart_id: String,
    pub item_id: String,
    pub model: String,
    pub question: String,
    pub image_sha256: String,
    pub attempts: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub http_status: Option<u16>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub response_body: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub answer: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Raw answers aligned with the request items.
#[derive(Debug, Clone, PartialEq)]
pub struct ChartAnswers {
    pub answers: Vec<String>,
    pub transcripts: Vec<Transcript>,
}

/// Gold answer straight from ground truth. Ambiguous lookups are errors.
pub fn oracle_gold(spec: &ChartSpec, gt: &GroundTruth, probe: &Probe) -> Result<Answer, String> {
    let yes = |b: bool| Answer::Text(if b { "yes" } else { "no" }.into());
    match probe {
        Probe::IsChartType { chart_type } => Ok(yes(*chart_type == gt.chart_type)),
        Probe::IsTitleClear => title_is_clear(spec).map(yes).map_err(|e| e.to_string()),
        Probe::Template { family, bindings } => derive_answer(*family, bindings, gt).map_err(|e| e.to_string()),
    }
}

pub fn oracle_answer(spec: &ChartSpec, gt: &GroundTruth, probe: &Probe) -> Result<String, String> {
    oracle_gold(spec, gt, probe).map(|a| a.render(gt.precision))
}

fn bump(v: f64) -> f64 {
    v + v.abs().max(1.0)
}

/// An answer that grades incorrect against `gold` under either tolerance.
pub fn wrong_answer(gold: &Answer, kind: AnswerKind, gt: &GroundTruth, rng: &mut impl Rng) -> String {
    match gold {
        Answer::Number(v) => Answer::Number(bump(*v)).render(gt.precision),
        Answer::Count(n) => (n + 1).to_string(),
        Answer::List(vs) => {
            let mut vs = vs.clone();
            match vs.first_mut() {
                Some(v) => *v = bump(*v),
                None => vs.push(1.0),
            }
            Answer::List(vs).render(gt.precision)
        }
        Answer::Text(t) => {
            let t = t.to_lowercase();
            match kind {
                AnswerKind::YesNo => if t == "yes" { "no" } else { "yes" }.into(),
                AnswerKind::ColorName => {
                    let others: Vec<&ColorName> = ColorName::ALL.iter().filter(|c| c.as_str() != t).collect();
                    others.choose(rng).map(|c| c.as_str().to_string()).unwrap_or_default()
                }
                _ => {
                    let mut pool: Vec<&str> = gt.x_labels.iter().map(String::as_str).collect();
                    pool.extend(gt.series_labels());
                    pool.retain(|l| l.to_lowercase() != t);
                    pool.choose(rng).map(|s| s.to_string()).unwrap_or_else(|| "unknown".into())
                }
            }
        }
    }
}

fn ask_oracle(req: &ChartRequest, noise: Option<&NoisyBinding>) -> Result<Vec<String>, GatewayError> {
    req.items
        .iter()
        .map(|item| {
            let gold = oracle_gold(req.spec, req.gt, &item.probe).map_err(|message| GatewayError::Oracle {
                item_id: item.item_id.clone(),
                message,
            })?;
            let Some(noise) = noise else {
                return Ok(gold.render(req.gt.precision));
            };
            let in_scope = match noise.scope {
                NoiseScope::All => true,
                NoiseScope::Identity => item.probe.is_identity(),
            };
            let stream = format!("noisy/{}/{}", req.gt.chart_id, item.item_id);
            let mut rng = rng_from_seed(split_seed(noise.seed, &stream, 0));
            let flip = rng.random::<f64>() < noise.error_rate;
            Ok(if in_scope && flip {
                wrong_answer(&gold, item.answer_kind, req.gt, &mut rng)
            } else {
                gold.render(req.gt.precision)
            })
        })
        .collect()
}

/// A bound evaluator ready to answer.
pub struct Gateway {
    binding: EvaluatorBinding,
    remote: Option<RemoteClient>,
}

struct RemoteClient {
    runtime: tokio::runtime::Runtime,
    http: reqwest::Client,
    token: String,
    limiter: Option<Arc<DefaultDirectRateLimiter>>,
}

impl Gateway {
    pub fn new(binding: EvaluatorBinding) -> Result<Gateway, GatewayError> {
        binding.validate()?;
        let remote = match &binding {
            EvaluatorBinding::Remote(r) => {
                let token = std::env::var(&r.token_env)
                    .map_err(|_| GatewayError::Config(format!("environment variable {} is not set", r.token_env)))?;
                let http = reqwest::Client::builder()
                    .timeout(Duration::from_secs(r.timeout_secs))
                    .build()
                    .map_err(|e| GatewayError::Config(e.to_string()))?;
                let runtime = tokio::runtime::Builder::new_multi_thread()
                    .worker_threads(2)
                    .enable_all()
                    .build()
                    .map_err(|e| GatewayError::Config(e.to_string()))?;
                let limiter = r.requests_per_second.map(|rps| {
                    let rps = NonZeroU32::new(rps).expect("validated");
                    let burst = r.burst.and_then(NonZeroU32::new).unwrap_or(rps);
                    Arc::new(RateLimiter::direct(Quota::per_second(rps).allow_burst(burst)))
                });
                Some(RemoteClient {
                    runtime,
                    http,
                    token,
                    limiter,
                })
            }
            _ => None,
        };
        Ok(Gateway { binding, remote })
    }

    pub fn binding(&self) -> &EvaluatorBinding {
        &self.binding
    }

    pub fn ask(&self, req: &ChartRequest) -> Result<ChartAnswers, GatewayError> {
        self.ask_many(std::slice::from_ref(req)).pop().expect("one request")
    }

    /// Answer several charts; remote items from all charts share the concurrency limit.
    /// Results are in request order whatever the completion order.
    pub fn ask_many(&self, reqs: &[ChartRequest]) -> Vec<Result<ChartAnswers, GatewayError>> {
        match &self.binding {
            EvaluatorBinding::Oracle => reqs.par_iter().map(|r| oracle_batch(r, None)).collect(),
            EvaluatorBinding::NoisyOracle(n) => reqs.par_iter().map(|r| oracle_batch(r, Some(n))).collect(),
            EvaluatorBinding::Remote(cfg) => {
                let client = self.remote.as_ref().expect("remote client built with binding");
                client.runtime.block_on(ask_remote(cfg, client, reqs))
            }
        }
    }
}

fn oracle_batch(req: &ChartRequest, noise: Option<&NoisyBinding>) -> Result<ChartAnswers, GatewayError> {
    Ok(ChartAnswers {
        answers: ask_oracle(req, noise)?,
        transcripts: Vec::new(),
    })
}

#[derive(Debug)]
enum CallError {
    Transient { status: Option<u16>, body: Option<String>, message: String },
    Fatal { status: Option<u16>, body: Option<String>, message: String },
    Protocol { status: u16, body: String, message: String },
}

impl CallError {
    fn is_transient(&self) -> bool {
        matches!(self, CallError::Transient { .. })
    }
}

/// Text of `choices[0].message.content`, which may be a string or a list of text parts.
pub fn extract_content(body: &Value) -> Option<String> {
    let content = body.get("choices")?.get(0)?.get("message")?.get("content")?;
    match content {
        Value::String(s) => Some(s.clone()),
        Value::Array(parts) => {
            let texts: Vec<&str> = parts
                .iter()
                .filter_map(|p| p.get("text").and_then(Value::as_str))
                .collect();
            (!texts.is_empty()).then(|| texts.concat())
        }
        _ => None,
    }
}

pub fn request_body(cfg: &RemoteBinding, image: &[u8], question: &str) -> Value {
    let data = base64::engine::general_purpose::STANDARD.encode(image);
    json!({
        "model": cfg.model,
        "temperature": cfg.temperature,
        "messages": [
            {"role": "system", "content": cfg.prompt},
            {"role": "user", "content": [
                {"type": "image_url", "image_url": {"url": format!("data:{};base64,{}", cfg.image_format.mime(), data)}},
                {"type": "text", "text": question}
            ]}
        ]
    })
}

async fn call_once(
    http: &reqwest::Client,
    cfg: &RemoteBinding,
    token: &str,
    limiter: Option<&DefaultDirectRateLimiter>,
    body: &Value,
) -> Result<(u16, String, String), CallError> {
    if let Some(l) = limiter {
        l.until_ready().await;
    }
    let resp = http
        .post(&cfg.endpoint_url)
        .bearer_auth(token)
        .json(body)
        .send()
        .await
        .map_err(|e| {
            let message = e.to_string();
            if e.is_timeout() || e.is_connect() || e.is_request() {
                CallError::Transient { status: None, body: None, message }
            } else {
                CallError::Fatal { status: None, body: None, message }
            }
        })?;
    let status = resp.status();
    let text = resp.text().await.map_err(|e| CallError::Transient {
        status: Some(status.as_u16()),
        body: None,
        message: e.to_string(),
    })?;
    if status.as_u16() == 429 || status.is_server_error() {
        return Err(CallError::Transient {
            status: Some(status.as_u16()),
            body: Some(text),
            message: format!("HTTP {status}"),
        });
    }
    if !status.is_success() {
        return Err(CallError::Fatal {
            status: Some(status.as_u16()),
            body: Some(text),
            message: format!("HTTP {status}"),
        });
    }
    let parsed: Result<Value, _> = serde_json::from_str(&text);
    match parsed.ok().as_ref().and_then(extract_content) {
        Some(answer) => Ok((status.as_u16(), text, answer)),
        None => Err(CallError::Protocol {
            status: status.as_u16(),
            message: "no choices[0].message.content".into(),
            body: text,
        }),
    }
}

struct Job {
    chart: usize,
    item: usize,
    chart_id: String,
    item_id: String,
    question: String,
    image: Arc<Vec<u8>>,
    image_sha256: String,
}

async fn ask_remote(
    cfg: &RemoteBinding,
    client: &RemoteClient,
    reqs: &[ChartRequest<'_>],
) -> Vec<Result<ChartAnswers, GatewayError>> {
    let mut results: Vec<Result<ChartAnswers, GatewayError>> = Vec::with_capacity(reqs.len());
    let mut jobs = Vec::new();
    for (c, req) in reqs.iter().enumerate() {
        match req.image.filter(|i| !i.is_empty()) {
            None => results.push(Err(GatewayError::Config(format!(
                "remote evaluation of {} needs a rendered image",
                req.gt.chart_id
            )))),
            Some(image) => {
                let image = Arc::new(image.to_vec());
                let image_sha256 = hex::encode(Sha256::digest(image.as_slice()));
                for (i, item) in req.items.iter().enumerate() {
                    jobs.push(Job {
                        chart: c,
                        item: i,
                        chart_id: req.gt.chart_id.clone(),
                        item_id: item.item_id.clone(),
                        question: item.question.clone(),
                        image: image.clone(),
                        image_sha256: image_sha256.clone(),
                    });
                }
                results.push(Ok(ChartAnswers {
                    answers: vec![String::new(); req.items.len()],
                    transcripts: Vec::with_capacity(req.items.len()),
                }));
            }
        }
    }
    let semaphore = Arc::new(Semaphore::new(cfg.max_concurrent));
    let cfg = Arc::new(cfg.clone());
    let mut set = tokio::task::JoinSet::new();
    for job in jobs {
        let semaphore = semaphore.clone();
        let cfg = cfg.clone();
        let http = client.http.clone();
        let token = client.token.clone();
        let limiter = client.limiter.clone();
        set.spawn(async move {
            let _permit = semaphore.acquire_owned().await.expect("semaphore open");
            let body = request_body(&cfg, &job.image, &job.question);
            let attempts = AtomicU32::new(0);
            let backoff = ExponentialBuilder::default()
                .with_min_delay(Duration::from_millis(cfg.backoff_base_ms))
                .with_max_delay(Duration::from_millis(cfg.backoff_max_ms))
                .with_max_times(cfg.retry_budget as usize)
                .with_jitter();
            let outcome = (|| {
                attempts.fetch_add(1, Ordering::SeqCst);
                call_once(&http, &cfg, &token, limiter.as_deref(), &body)
            })
            .retry(backoff)
            .sleep(tokio::time::sleep)
            .when(CallError::is_transient)
            .notify(|e, wait| log::debug!("retrying {} in {wait:?}: {e:?}", job.item_id))
            .await;
            (job, attempts.load(Ordering::SeqCst), outcome)
        });
    }
    let mut done = Vec::new();
    while let Some(joined) = set.join_next().await {
        done.push(joined.expect("evaluator task panicked"));
    }
    done.sort_by_key(|(job, _, _)| (job.chart, job.item));
    let mut failures: Vec<Option<GatewayError>> = vec![None; reqs.len()];
    for (job, attempts, outcome) in done {
        let mut t = Transcript {
            chart_id: job.chart_id,
            item_id: job.item_id.clone(),
            model: cfg.model.clone(),
            question: job.question,
            image_sha256: job.image_sha256,
            attempts,
            http_status: None,
            response_body: None,
            answer: None,
            error: None,
        };
        let err = match outcome {
            Ok((status, body, answer)) => {
                t.http_status = Some(status);
                t.response_body = Some(body);
                if let Ok(r) = &mut results[job.chart] {
                    r.answers[job.item] = answer.clone();
                }
                t.answer = Some(answer);
                None
            }
            Err(CallError::Protocol { status, body, message }) => {
                t.http_status = Some(status);
                t.response_body = Some(body);
                t.error = Some(message.clone());
                Some(GatewayError::Protocol {
                    item_id: job.item_id,
                    message,
                })
            }
            Err(CallError::Transient { status, body, message } | CallError::Fatal { status, body, message }) => {
                t.http_status = status;
                t.response_body = body;
                t.error = Some(message.clone());
                Some(GatewayError::Transport {
                    item_id: job.item_id,
                    message: format!("{message} after {attempts} attempts"),
                })
            }
        };
        if let Ok(r) = &mut results[job.chart] {
            r.transcripts.push(t);
        }
        if let Some(e) = err {
            failures[job.chart].get_or_insert(e);
        }
    }
    for (r, f) in results.iter_mut().zip(failures) {
        if let Some(e) = f {
            *r = Err(e);
        }
    }
    results
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::answer::{normalize_answer, Tolerance};
    use crate::compose::{compose_chart, ComposeOptions};
    use crate::eval::build_battery;
    use crate::grade::grade;
    use crate::palette::PaletteTable;
    use crate::qa::{generate_qa_batch, Family};
    use crate::rng::split_rng;
    use crate::seed::{synthesize_catalog, ChartType};

    fn charts(n: usize) -> Vec<(ChartSpec, GroundTruth)> {
        let catalog = synthesize_catalog(41, n);
        let palettes = PaletteTable::builtin();
        catalog
            .seeds
            .iter()
            .enumerate()
            .map(|(i, s)| compose_chart(s, &palettes, i as u64, &ComposeOptions::default()).unwrap())
            .collect()
    }

    #[test]
    fn remote_binding_needs_endpoint() {
        let mut r = RemoteBinding::new("", "m");
        assert!(EvaluatorBinding::Remote(r.clone()).validate().is_err());
        r.endpoint_url = "http://localhost:1".into();
        assert!(EvaluatorBinding::Remote(r).validate().is_ok());
        assert!(EvaluatorBinding::NoisyOracle(NoisyBinding {
            error_rate: 1.5,
            seed: 0,
            scope: NoiseScope::All
        })
        .validate()
        .is_err());
    }

    #[test]
    fn binding_config_round_trip() {
        let b: EvaluatorBinding =
            serde_json::from_str(r#"{"kind":"remote","endpoint_url":"http://x/v1/chat/completions","model":"m"}"#)
                .unwrap();
        let EvaluatorBinding::Remote(r) = &b else { panic!() };
        assert_eq!((r.timeout_secs, r.temperature, r.prompt.as_str()), (30, 0.0, DEFAULT_PROMPT));
        let n: EvaluatorBinding = serde_json::from_str(r#"{"kind":"noisy-oracle","error_rate":0.1,"seed":3}"#).unwrap();
        assert!(matches!(n, EvaluatorBinding::NoisyOracle(_)));
    }

    #[test]
    fn oracle_answers_grade_correct() {
        let gw = Gateway::new(EvaluatorBinding::Oracle).unwrap();
        for (i, (spec, gt)) in charts(40).iter().enumerate() {
            let battery = build_battery(gt, spec, &mut split_rng(1, "b", i as u64)).unwrap();
            let qa = generate_qa_batch(gt, spec, 8, 0.2, &mut split_rng(1, "q", i as u64));
            let mut items: Vec<AskItem> = battery
                .items
                .iter()
                .map(|it| AskItem {
                    item_id: it.item_id.clone(),
                    question: it.question.clone(),
                    answer_kind: it.answer_kind,
                    probe: it.probe.clone(),
                })
                .collect();
            let mut golds: Vec<(Answer, Tolerance)> = battery.items.iter().map(|i| (i.gold.clone(), i.tolerance)).collect();
            for p in &qa.pairs {
                items.push(AskItem {
                    item_id: p.qa_id.clone(),
                    question: p.question.clone(),
                    answer_kind: p.answer_kind,
                    probe: Probe::Template {
                        family: p.family,
                        bindings: p.bindings.clone(),
                    },
                });
                golds.push((p.gold.clone(), p.tolerance));
            }
            let req = ChartRequest { spec, gt, image: None, items: items.clone() };
            let out = gw.ask(&req).unwrap();
            for ((raw, item), (gold, _)) in out.answers.iter().zip(&items).zip(&golds) {
                assert!(grade(&normalize_answer(raw, item.answer_kind), gold, Tolerance::Strict), "{raw} vs {gold:?}");
            }
        }
    }

    #[test]
    fn oracle_identity_on_pie() {
        let (spec, gt) = charts(10).into_iter().find(|(s, _)| s.chart_type == ChartType::Pie).unwrap();
        let probe = Probe::IsChartType {
            chart_type: ChartType::Pie,
        };
        assert_eq!(oracle_answer(&spec, &gt, &probe).unwrap(), "yes");
        let probe = Probe::IsChartType {
            chart_type: ChartType::Bar,
        };
        assert_eq!(oracle_answer(&spec, &gt, &probe).unwrap(), "no");
    }

    #[test]
    fn oracle_refuses_ambiguous_inverse_lookup() {
        let (mut spec, _) = charts(10).into_iter().find(|(s, _)| s.chart_type == ChartType::Bar).unwrap();
        let label = spec.series[0].label.clone();
        let row = spec.values.get_mut(&label).unwrap();
        row[1] = row[0];
        let v = row[0];
        let gt = GroundTruth::from_spec(&spec);
        let mut bindings = crate::qa::Bindings::new();
        bindings.insert("legend_label".into(), label);
        bindings.insert("value".into(), crate::chart::format_value(v, gt.precision));
        let probe = Probe::Template {
            family: Family::LabelForValue,
            bindings,
        };
        assert!(oracle_answer(&spec, &gt, &probe).is_err());
    }

    #[test]
    fn noisy_oracle_rate_is_binomial() {
        let noisy = NoisyBinding {
            error_rate: 0.3,
            seed: 9,
            scope: NoiseScope::All,
        };
        let (spec, gt) = charts(5).into_iter().find(|(s, _)| s.chart_type == ChartType::Line).unwrap();
        let n = 10_000;
        let items: Vec<AskItem> = (0..n)
            .map(|i| AskItem {
                item_id: format!("i{i}"),
                question: String::new(),
                answer_kind: AnswerKind::YesNo,
                probe: Probe::IsChartType {
                    chart_type: ChartType::Line,
                },
            })
            .collect();
        let req = ChartRequest { spec: &spec, gt: &gt, image: None, items };
        let answers = ask_oracle(&req, Some(&noisy)).unwrap();
        let wrong = answers.iter().filter(|a| *a == "no").count() as f64;
        let (r, nf) = (0.3, n as f64);
        assert!((wrong - r * nf).abs() <= 3.0 * (r * (1.0 - r) * nf).sqrt(), "{wrong}");
    }

    #[test]
    fn wrong_answers_are_wrong() {
        let (_, gt) = charts(5).into_iter().next().unwrap();
        let mut rng = split_rng(0, "w", 0);
        let cases = [
            (Answer::Number(0.0), AnswerKind::Number),
            (Answer::Number(-3.5), AnswerKind::Number),
            (Answer::Number(1000.0), AnswerKind::Number),
            (Answer::Count(2), AnswerKind::Count),
            (Answer::List(vec![1.0, 2.0]), AnswerKind::OrderedNumberList),
            (Answer::Text("blue".into()), AnswerKind::ColorName),
            (Answer::Text("yes".into()), AnswerKind::YesNo),
            (Answer::Text(gt.x_labels[0].clone()), AnswerKind::LabelText),
        ];
        for (gold, kind) in cases {
            let w = wrong_answer(&gold, kind, &gt, &mut rng);
            for t in [Tolerance::Strict, Tolerance::Flex] {
                assert!(!grade(&normalize_answer(&w, kind), &gold, t), "{w} vs {gold:?}");
            }
        }
    }

    #[test]
    fn content_extraction() {
        let b = json!({"choices":[{"message":{"content":" 42 "}}]});
        assert_eq!(extract_content(&b).unwrap(), " 42 ");
        let b = json!({"choices":[{"message":{"content":[{"type":"text","text":"4"},{"type":"text","text":"2"}]}}]});
        assert_eq!(extract_content(&b).unwrap(), "42");
        assert!(extract_content(&json!({"error":"x"})).is_none());
    }

    #[test]
    fn request_carries_image_and_prompt() {
        let cfg = RemoteBinding::new("http://x", "m");
        let body = request_body(&cfg, b"png", "What?");
        assert_eq!(body["temperature"], 0.0);
        assert_eq!(body["messages"][0]["content"], DEFAULT_PROMPT);
        assert_eq!(body["messages"][1]["content"][0]["image_url"]["url"], "data:image/png;base64,cG5n");
        assert_eq!(body["messages"][1]["content"][1]["text"], "What?");
    }
}
