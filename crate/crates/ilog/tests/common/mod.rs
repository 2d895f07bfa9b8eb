#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use ilog::cli::{default_model, generated_profiles};
use ilog::config::{RoleKind, ServiceConfig, TokenEntry};
use ilog::experiment::EventBatch;
use ilog::service::AppState;
use ilog::store::FileStore;
use ilog::zones::TzDatabase;
use ilog_core::context::{LifeSequence, ParticipantId, ParticipantProfile};
use ilog_core::plan::check_document;
use ilog_core::schedule::compile;
use ilog_core::sim::{run_simulation, GroundTruthSpec, LogRecord, SimConfig};
use reqwest::blocking::{Client, RequestBuilder, Response};
use serde_json::Value;

pub const RESEARCHER: &str = "tok-researcher";
pub const PLATFORM: &str = "tok-platform";

pub fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

pub fn study_text() -> String {
    std::fs::read_to_string(data("study.ilogcal")).unwrap()
}

pub fn token(pid: &str) -> String {
    format!("tok-{pid}")
}

pub fn config(participants: &[ParticipantProfile]) -> ServiceConfig {
    let mut tokens = vec![
        TokenEntry { token: RESEARCHER.into(), principal: "lead".into(), role: RoleKind::Researcher, participant: None },
        TokenEntry { token: PLATFORM.into(), principal: "scheduler".into(), role: RoleKind::Platform, participant: None },
    ];
    for p in participants {
        tokens.push(TokenEntry {
            token: token(p.id.as_str()),
            principal: p.id.as_str().into(),
            role: RoleKind::Participant,
            participant: Some(p.id.clone()),
        });
    }
    ServiceConfig { tokens, poll_timeout_ms: 5_000 }
}

pub fn write_config(dir: &Path, config: &ServiceConfig) -> PathBuf {
    let path = dir.join("service.toml");
    std::fs::write(&path, toml::to_string(config).unwrap()).unwrap();
    path
}

/// The study plan simulated for `n` participants, in record order.
pub fn study_log(n: usize, seed: u64) -> (Vec<ParticipantProfile>, Vec<LogRecord>) {
    let profiles = generated_profiles(n, "UTC");
    let plan = check_document(&study_text()).plan;
    let timeline = compile(&plan, &profiles).unwrap();
    let (start, end) = plan.window().unwrap();
    let spec = GroundTruthSpec::from_timeline(&timeline);
    let ground: BTreeMap<ParticipantId, LifeSequence> =
        profiles.iter().map(|p| (p.id.clone(), spec.generate(&p.id, start, end, seed))).collect();
    let log = run_simulation(&timeline, &profiles, &ground, &default_model(seed), &SimConfig::default(), &TzDatabase).unwrap();
    (profiles, log)
}

pub fn batches(log: &[LogRecord], size: usize, prefix: &str) -> Vec<EventBatch> {
    log.chunks(size)
        .enumerate()
        .map(|(i, c)| EventBatch { batch_id: format!("{prefix}-{i:04}"), records: c.to_vec() })
        .collect()
}

/// An in-process service on an ephemeral port.
pub struct Server {
    pub base: String,
    pub client: Client,
    runtime: Option<tokio::runtime::Runtime>,
}

impl Server {
    pub fn start(dir: &Path, config: &ServiceConfig) -> Server {
        let runtime = tokio::runtime::Builder::new_multi_thread().worker_threads(4).enable_all().build().unwrap();
        let store = FileStore::open(dir).unwrap();
        let state = Arc::new(AppState::new(Arc::new(store), config).unwrap());
        let listener = runtime.block_on(tokio::net::TcpListener::bind("127.0.0.1:0")).unwrap();
        let base = format!("http://{}", listener.local_addr().unwrap());
        runtime.spawn(ilog::service::serve(listener, state, std::future::pending()));
        Server { base, client: client(), runtime: Some(runtime) }
    }

    pub fn url(&self, path: &str) -> String {
        format!("{}{path}", self.base)
    }

    pub fn get(&self, tok: &str, path: &str) -> RequestBuilder {
        self.client.get(self.url(path)).bearer_auth(tok)
    }

    pub fn put(&self, tok: &str, path: &str) -> RequestBuilder {
        self.client.put(self.url(path)).bearer_auth(tok)
    }

    pub fn post(&self, tok: &str, path: &str) -> RequestBuilder {
        self.client.post(self.url(path)).bearer_auth(tok)
    }
}

impl Drop for Server {
    fn drop(&mut self) {
        if let Some(rt) = self.runtime.take() {
            rt.shutdown_background();
        }
    }
}

pub fn client() -> Client {
    Client::builder().timeout(std::time::Duration::from_secs(120)).build().unwrap()
}

/// Status and JSON body.
pub fn json(r: RequestBuilder) -> (u16, Value) {
    let resp: Response = r.send().unwrap();
    let status = resp.status().as_u16();
    let text = resp.text().unwrap();
    (status, serde_json::from_str(&text).unwrap_or(Value::String(text)))
}

/// Creates experiment `id` with the study plan and `profiles`.
pub fn setup(server: &Server, id: &str, profiles: &[ParticipantProfile]) {
    let (s, body) = json(server.put(RESEARCHER, &format!("/experiments/{id}/participants")).json(profiles));
    assert_eq!(s, 200, "{body}");
    let (s, body) = json(server.put(RESEARCHER, &format!("/experiments/{id}/plan")).body(study_text()));
    assert_eq!(s, 200, "{body}");
}

pub fn ingest(server: &Server, tok: &str, id: &str, batch: &EventBatch) -> (u16, Value) {
    json(server.post(tok, &format!("/experiments/{id}/events")).json(batch))
}
