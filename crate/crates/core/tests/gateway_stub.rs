mod common;

use std::sync::atomic::Ordering;
use std::time::{Duration, Instant};

use chartloop_core::answer::AnswerKind;
use chartloop_core::chart::{ChartSpec, GroundTruth};
use chartloop_core::eval::Probe;
use chartloop_core::gateway::{AskItem, ChartRequest, EvaluatorBinding, Gateway, GatewayError, RemoteBinding};
use common::stub::{Stub, StubConfig};

const IMAGE: &[u8] = b"\x89PNG not really";

fn binding(stub: &Stub, env: &str) -> RemoteBinding {
    std::env::set_var(env, "secret-token");
    let mut b = RemoteBinding::new(&stub.url, "stub-model");
    b.token_env = env.into();
    b.backoff_base_ms = 2;
    b.backoff_max_ms = 20;
    b
}

fn items(prefix: &str, n: usize) -> Vec<AskItem> {
    (0..n)
        .map(|i| AskItem {
            item_id: format!("{prefix}-e{i:02}"),
            question: format!("{prefix} question {i}"),
            answer_kind: AnswerKind::LabelText,
            probe: Probe::IsTitleClear,
        })
        .collect()
}

fn requests<'a>(charts: &'a [(chartloop_core::seed::ChartSeed, ChartSpec, GroundTruth)], per: usize, prefix: &str) -> Vec<ChartRequest<'a>> {
    charts
        .iter()
        .enumerate()
        .map(|(c, (_, spec, gt))| ChartRequest {
            spec,
            gt,
            image: Some(IMAGE),
            items: items(&format!("{prefix}{c}"), per),
        })
        .collect()
}

#[test]
fn transient_failures_are_retried_and_answers_stay_aligned() {
    let stub = Stub::start(StubConfig {
        fail_mod: 5,
        ..Default::default()
    });
    let gw = Gateway::new(EvaluatorBinding::Remote(binding(&stub, "STUB_TOKEN_RETRY"))).unwrap();
    let charts = common::charts(1, 4);
    let reqs = requests(&charts, 50, "c");
    let out = gw.ask_many(&reqs);
    let mut attempts = 0;
    for (req, res) in reqs.iter().zip(out) {
        let res = res.unwrap();
        assert_eq!(res.answers.len(), req.items.len());
        assert_eq!(res.transcripts.len(), req.items.len());
        for ((item, answer), t) in req.items.iter().zip(&res.answers).zip(&res.transcripts) {
            assert_eq!(answer, &format!("a:{}", item.question));
            assert_eq!(t.item_id, item.item_id);
            assert_eq!(t.answer.as_deref(), Some(answer.as_str()));
            assert_eq!(t.http_status, Some(200));
            assert_eq!(t.chart_id, req.gt.chart_id);
            attempts += t.attempts as usize;
        }
    }
    let injected = stub.stats.injected.load(Ordering::SeqCst);
    assert!(injected > 10, "only {injected} faults injected");
    assert_eq!(attempts, 200 + injected);
    assert_eq!(stub.stats.requests.load(Ordering::SeqCst), attempts);
}

#[test]
fn bearer_token_and_request_shape() {
    let stub = Stub::start(StubConfig::default());
    let gw = Gateway::new(EvaluatorBinding::Remote(binding(&stub, "STUB_TOKEN_AUTH"))).unwrap();
    let charts = common::charts(2, 1);
    gw.ask(&requests(&charts, 3, "auth")[0]).unwrap();
    let auth = stub.stats.auth.lock().unwrap().clone();
    assert_eq!(auth, vec!["Bearer secret-token"; 3]);
}

#[test]
fn missing_token_is_a_configuration_error() {
    let stub = Stub::start(StubConfig::default());
    let mut b = binding(&stub, "STUB_TOKEN_PRESENT");
    b.token_env = "STUB_TOKEN_DEFINITELY_UNSET".into();
    assert!(matches!(Gateway::new(EvaluatorBinding::Remote(b)), Err(GatewayError::Config(_))));
}

#[test]
fn client_errors_fail_the_chart_without_retrying() {
    let stub = Stub::start(StubConfig::default());
    let gw = Gateway::new(EvaluatorBinding::Remote(binding(&stub, "STUB_TOKEN_FATAL"))).unwrap();
    let charts = common::charts(3, 2);
    let mut reqs = requests(&charts, 3, "ok");
    reqs[0].items[1].question = "FATAL please".into();
    let out = gw.ask_many(&reqs);
    match &out[0] {
        Err(GatewayError::Transport { item_id, .. }) => assert_eq!(item_id, &reqs[0].items[1].item_id),
        other => panic!("expected transport error, got {other:?}"),
    }
    assert!(out[1].is_ok());
    assert_eq!(stub.stats.requests.load(Ordering::SeqCst), 6);
}

#[test]
fn malformed_bodies_are_protocol_errors() {
    let stub = Stub::start(StubConfig::default());
    let gw = Gateway::new(EvaluatorBinding::Remote(binding(&stub, "STUB_TOKEN_PROTO"))).unwrap();
    let charts = common::charts(4, 1);
    let mut reqs = requests(&charts, 2, "p");
    reqs[0].items[0].question = "MALFORMED reply".into();
    assert!(matches!(gw.ask(&reqs[0]), Err(GatewayError::Protocol { .. })));
}

#[test]
fn retry_budget_bounds_attempts() {
    let stub = Stub::start(StubConfig {
        fail_mod: 1,
        fail_attempts: u32::MAX,
        ..Default::default()
    });
    let mut b = binding(&stub, "STUB_TOKEN_BUDGET");
    b.retry_budget = 2;
    let gw = Gateway::new(EvaluatorBinding::Remote(b)).unwrap();
    let charts = common::charts(5, 1);
    let reqs = requests(&charts, 1, "b");
    assert!(matches!(gw.ask(&reqs[0]), Err(GatewayError::Transport { .. })));
    assert_eq!(stub.stats.requests.load(Ordering::SeqCst), 3);
}

#[test]
fn concurrency_is_capped() {
    let stub = Stub::start(StubConfig {
        delay: Duration::from_millis(40),
        ..Default::default()
    });
    let mut b = binding(&stub, "STUB_TOKEN_CONC");
    b.max_concurrent = 3;
    let gw = Gateway::new(EvaluatorBinding::Remote(b)).unwrap();
    let charts = common::charts(6, 3);
    for r in gw.ask_many(&requests(&charts, 8, "k")) {
        r.unwrap();
    }
    let peak = stub.stats.max_in_flight.load(Ordering::SeqCst);
    assert!((2..=3).contains(&peak), "peak concurrency {peak}");
}

#[test]
fn request_rate_is_limited() {
    let stub = Stub::start(StubConfig::default());
    let mut b = binding(&stub, "STUB_TOKEN_RATE");
    b.requests_per_second = Some(20);
    b.burst = Some(1);
    let gw = Gateway::new(EvaluatorBinding::Remote(b)).unwrap();
    let charts = common::charts(7, 1);
    let start = Instant::now();
    gw.ask(&requests(&charts, 21, "r")[0]).unwrap();
    assert!(start.elapsed() >= Duration::from_millis(900), "{:?}", start.elapsed());
    let arrivals = stub.stats.arrivals.lock().unwrap().clone();
    let span = *arrivals.iter().max().unwrap() - *arrivals.iter().min().unwrap();
    assert!(span >= Duration::from_millis(900), "{span:?}");
}

#[test]
fn remote_requests_need_an_image() {
    let stub = Stub::start(StubConfig::default());
    let gw = Gateway::new(EvaluatorBinding::Remote(binding(&stub, "STUB_TOKEN_IMG"))).unwrap();
    let charts = common::charts(8, 1);
    let mut reqs = requests(&charts, 1, "i");
    reqs[0].image = None;
    assert!(matches!(gw.ask(&reqs[0]), Err(GatewayError::Config(_))));
    assert_eq!(stub.stats.requests.load(Ordering::SeqCst), 0);
}
