//! Session registry, persistence and the synchronous operations behind each endpoint.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use ivispar_core::engine::{
    AgentRequest, EngineConfig, EpisodeLog, LogLine, PromptTemplates, Session, SessionStatus, TextStates,
};
use ivispar_core::generator::{Dataset, Episode};
use ivispar_core::observation::{Modality, Observation, ObservationRole};
use ivispar_core::{ActionClass, BoardSpec};
use serde::{Deserialize, Serialize};

use crate::error::{ApiError, ServiceError};

pub const DEFAULT_IDLE_TIMEOUT: Duration = Duration::from_secs(30 * 60);

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    /// Holds `datasets/*.json`, `sessions/` and `assets/`.
    pub data_dir: PathBuf,
    pub idle_timeout: Duration,
    /// Step cap, context window and rendering; the modality comes from each request.
    pub engine: EngineConfig,
    pub templates: PromptTemplates,
}

impl ServiceConfig {
    pub fn new(data_dir: impl Into<PathBuf>) -> Self {
        ServiceConfig {
            data_dir: data_dir.into(),
            idle_timeout: DEFAULT_IDLE_TIMEOUT,
            engine: EngineConfig::default(),
            templates: PromptTemplates::default(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
pub struct CreateSession {
    pub dataset_id: String,
    pub episode_id: String,
    pub modality: String,
    #[serde(default = "default_agent_kind")]
    pub agent_kind: String,
}

fn default_agent_kind() -> String {
    "agent".to_string()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionHandle {
    pub session_id: String,
    pub dataset_id: String,
    pub episode_id: String,
    pub modality: Modality,
    pub agent_kind: String,
    /// Seconds since the Unix epoch.
    pub created_at: u64,
    pub status: SessionStatus,
    pub step: u32,
    pub step_cap: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageRef {
    pub role: ObservationRole,
    pub hash: String,
    pub url: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObservationView {
    pub session_id: String,
    pub step: u32,
    pub step_cap: u32,
    pub status: SessionStatus,
    pub modality: Modality,
    pub system_text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text_states: Option<TextStates>,
    /// Goal, past (oldest first), then active. Empty for text sessions.
    pub images: Vec<ImageRef>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct SubmitAction {
    pub raw_text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionResult {
    pub session_id: String,
    pub step: u32,
    pub action_class: ActionClass,
    pub status: SessionStatus,
    pub parsed_action: Option<String>,
    pub parse_error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EpisodeSummary {
    pub id: String,
    pub board: BoardSpec,
    pub geoms: usize,
    pub optimal_length: u32,
    pub interference: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetView {
    pub dataset_id: String,
    pub format: String,
    pub digest: String,
    pub episodes: Vec<EpisodeSummary>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct IndexEntry {
    session_id: String,
    dataset_id: String,
    episode_id: String,
    modality: Modality,
    agent_kind: String,
    created_at: u64,
}

struct LoadedDataset {
    digest: String,
    dataset: Dataset,
    episodes: HashMap<String, Arc<Episode>>,
}

struct Slot {
    session: Session,
    meta: IndexEntry,
    log: File,
    last_access: Instant,
}

impl Slot {
    fn handle(&self) -> SessionHandle {
        SessionHandle {
            session_id: self.meta.session_id.clone(),
            dataset_id: self.meta.dataset_id.clone(),
            episode_id: self.meta.episode_id.clone(),
            modality: self.meta.modality,
            agent_kind: self.meta.agent_kind.clone(),
            created_at: self.meta.created_at,
            status: self.session.status(),
            step: self.session.step_count(),
            step_cap: self.session.config().step_cap,
        }
    }

    fn append(&mut self, line: &LogLine) -> std::io::Result<()> {
        self.log.write_all(line.to_line().as_bytes())?;
        self.log.sync_data()
    }
}

struct Inner {
    config: ServiceConfig,
    templates: Arc<PromptTemplates>,
    datasets: BTreeMap<String, LoadedDataset>,
    sessions: RwLock<HashMap<String, Arc<Mutex<Slot>>>>,
    expired: RwLock<HashSet<String>>,
    index: Mutex<File>,
}

/// Shared service state; cheap to clone.
#[derive(Clone)]
pub struct AppState {
    inner: Arc<Inner>,
}

fn now_unix() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

fn is_hash(s: &str) -> bool {
    s.len() == 64 && s.bytes().all(|b| b.is_ascii_hexdigit() && !b.is_ascii_uppercase())
}

impl AppState {
    /// Loads every dataset under `data_dir/datasets` and reloads persisted sessions.
    pub fn open(config: ServiceConfig) -> Result<Self, ServiceError> {
        let dir = &config.data_dir;
        for sub in ["datasets", "sessions", "assets"] {
            fs::create_dir_all(dir.join(sub)).map_err(|e| ServiceError::io(dir.join(sub), e))?;
        }
        let datasets = load_datasets(&dir.join("datasets"))?;
        let index_path = dir.join("sessions").join("index.jsonl");
        let index = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&index_path)
            .map_err(|e| ServiceError::io(&index_path, e))?;
        let state = AppState {
            inner: Arc::new(Inner {
                templates: Arc::new(config.templates.clone()),
                config,
                datasets,
                sessions: RwLock::default(),
                expired: RwLock::default(),
                index: Mutex::new(index),
            }),
        };
        state.reload_sessions(&index_path)?;
        Ok(state)
    }

    pub fn config(&self) -> &ServiceConfig {
        &self.inner.config
    }

    fn sessions_dir(&self) -> PathBuf {
        self.inner.config.data_dir.join("sessions")
    }

    fn log_path(&self, id: &str) -> PathBuf {
        self.sessions_dir().join(format!("{id}.jsonl"))
    }

    fn episode(&self, dataset_id: &str, episode_id: &str) -> Result<(&LoadedDataset, Arc<Episode>), ApiError> {
        let ds = self
            .inner
            .datasets
            .get(dataset_id)
            .ok_or_else(|| ApiError::NotFound(format!("dataset `{dataset_id}`")))?;
        let ep = ds
            .episodes
            .get(episode_id)
            .cloned()
            .ok_or_else(|| ApiError::NotFound(format!("episode `{episode_id}` in dataset `{dataset_id}`")))?;
        Ok((ds, ep))
    }

    fn engine_config(&self, modality: Modality) -> EngineConfig {
        let mut cfg = self.inner.config.engine.clone();
        cfg.render.modality = modality;
        cfg
    }

    fn reload_sessions(&self, index_path: &Path) -> Result<(), ServiceError> {
        let text = fs::read_to_string(index_path).map_err(|e| ServiceError::io(index_path, e))?;
        let mut sessions = self.inner.sessions.write().expect("session map lock");
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            let meta: IndexEntry = match serde_json::from_str(line) {
                Ok(m) => m,
                Err(e) => {
                    tracing::warn!("skipping unreadable index line: {e}");
                    continue;
                }
            };
            match self.restore(meta.clone()) {
                Ok(slot) => {
                    sessions.insert(meta.session_id.clone(), Arc::new(Mutex::new(slot)));
                }
                Err(e) => tracing::warn!(session = meta.session_id, "not restored: {e}"),
            }
        }
        tracing::info!(count = sessions.len(), "sessions restored");
        Ok(())
    }

    /// Rebuilds a session by re-applying its logged replies.
    fn restore(&self, meta: IndexEntry) -> Result<Slot, String> {
        let path = self.log_path(&meta.session_id);
        let log = EpisodeLog::read(&path).map_err(|e| e.to_string())?;
        let (_, episode) = self.episode(&meta.dataset_id, &meta.episode_id).map_err(|e| e.to_string())?;
        let mut config = self.engine_config(meta.modality);
        config.step_cap = log.header.step_cap;
        config.context_window = log.header.context_window;
        let mut session = Session::new(meta.session_id.clone(), episode, config, self.inner.templates.clone())
            .map_err(|e| e.to_string())?;
        for logged in &log.steps {
            let got = session.step(&logged.raw_reply).map_err(|e| e.to_string())?;
            if got.action_class != logged.action_class || got.status != logged.status {
                return Err(format!("replay diverged at step {}", logged.step));
            }
        }
        if let Some(end) = &log.end {
            if end.status == SessionStatus::TransportError {
                session.abort(end.error.clone().unwrap_or_default());
            }
        }
        let file = OpenOptions::new().append(true).open(&path).map_err(|e| e.to_string())?;
        Ok(Slot { session, meta, log: file, last_access: Instant::now() })
    }

    fn slot(&self, id: &str) -> Result<Arc<Mutex<Slot>>, ApiError> {
        if let Some(slot) = self.inner.sessions.read().expect("session map lock").get(id) {
            return Ok(slot.clone());
        }
        if self.inner.expired.read().expect("expired lock").contains(id) {
            return Err(ApiError::Expired(id.to_string()));
        }
        Err(ApiError::NotFound(format!("session `{id}`")))
    }

    pub fn create_session(&self, req: CreateSession) -> Result<SessionHandle, ApiError> {
        let modality: Modality = req.modality.parse().map_err(ApiError::BadRequest)?;
        if modality == Modality::Vision3d {
            return Err(ApiError::Unsupported(format!("modality {modality} is not supported; use text or vision2d")));
        }
        let (ds, episode) = self.episode(&req.dataset_id, &req.episode_id)?;
        let id = uuid::Uuid::new_v4().simple().to_string();
        let session = Session::new(id.clone(), episode, self.engine_config(modality), self.inner.templates.clone())
            .map_err(|e| ApiError::BadRequest(e.to_string()))?;
        let meta = IndexEntry {
            session_id: id.clone(),
            dataset_id: req.dataset_id,
            episode_id: req.episode_id,
            modality,
            agent_kind: req.agent_kind,
            created_at: now_unix(),
        };
        let path = self.log_path(&id);
        let log = OpenOptions::new().create_new(true).append(true).open(&path).map_err(ApiError::internal)?;
        let mut slot = Slot { session, meta, log, last_access: Instant::now() };
        let mut header = EpisodeLog::header_for(&slot.session, &slot.meta.agent_kind);
        header.dataset_digest = Some(ds.digest.clone());
        slot.append(&LogLine::Header(header)).map_err(ApiError::internal)?;
        if let Some(end) = EpisodeLog::end_for(&slot.session) {
            slot.append(&LogLine::End(end)).map_err(ApiError::internal)?;
        }
        {
            let mut index = self.inner.index.lock().expect("index lock");
            let mut line = serde_json::to_string(&slot.meta).map_err(ApiError::internal)?;
            line.push('\n');
            index.write_all(line.as_bytes()).and_then(|_| index.sync_data()).map_err(ApiError::internal)?;
        }
        let handle = slot.handle();
        self.inner.sessions.write().expect("session map lock").insert(id, Arc::new(Mutex::new(slot)));
        Ok(handle)
    }

    pub fn session_handle(&self, id: &str) -> Result<SessionHandle, ApiError> {
        let slot = self.slot(id)?;
        let slot = slot.lock().expect("session lock");
        Ok(slot.handle())
    }

    pub fn observation(&self, id: &str) -> Result<ObservationView, ApiError> {
        let slot = self.slot(id)?;
        let mut slot = slot.lock().expect("session lock");
        slot.last_access = Instant::now();
        let status = slot.session.status();
        if status.is_terminal() {
            return Err(ApiError::Conflict(status));
        }
        let bundle = slot.session.build_prompt().map_err(ApiError::internal)?;
        let mut images = Vec::new();
        for (role, obs) in &bundle.observations {
            if let Observation::Image { png, hash } = obs {
                self.store_asset(hash, png)?;
                images.push(ImageRef { role: *role, hash: hash.clone(), url: format!("/v1/assets/{hash}.png") });
            }
        }
        let request = AgentRequest::from_bundle(id, slot.session.step_count(), &bundle);
        Ok(ObservationView {
            session_id: id.to_string(),
            step: slot.session.step_count(),
            step_cap: slot.session.config().step_cap,
            status,
            modality: bundle.modality,
            system_text: bundle.system_text,
            text_states: request.text_states,
            images,
        })
    }

    fn store_asset(&self, hash: &str, png: &[u8]) -> Result<(), ApiError> {
        let path = self.inner.config.data_dir.join("assets").join(format!("{hash}.png"));
        if path.exists() {
            return Ok(());
        }
        let tmp = path.with_extension(format!("tmp-{}", uuid::Uuid::new_v4().simple()));
        fs::write(&tmp, png).and_then(|_| fs::rename(&tmp, &path)).map_err(ApiError::internal)
    }

    pub fn submit_action(&self, id: &str, raw_text: &str) -> Result<ActionResult, ApiError> {
        let slot = self.slot(id)?;
        let mut slot = slot.lock().expect("session lock");
        slot.last_access = Instant::now();
        let status = slot.session.status();
        if status.is_terminal() {
            return Err(ApiError::Conflict(status));
        }
        let record = slot.session.step(raw_text).map_err(ApiError::internal)?.clone();
        slot.append(&LogLine::Step(record.clone())).map_err(ApiError::internal)?;
        if let Some(end) = EpisodeLog::end_for(&slot.session) {
            slot.append(&LogLine::End(end)).map_err(ApiError::internal)?;
        }
        Ok(ActionResult {
            session_id: id.to_string(),
            step: record.step,
            action_class: record.action_class,
            status: record.status,
            parsed_action: record.parsed_action,
            parse_error: record.parse_error.map(|e| e.to_string()),
        })
    }

    /// The session's log as stored on disk.
    pub fn log_text(&self, id: &str) -> Result<String, ApiError> {
        let known = self.inner.sessions.read().expect("session map lock").contains_key(id)
            || self.inner.expired.read().expect("expired lock").contains(id);
        if !known {
            return Err(ApiError::NotFound(format!("session `{id}`")));
        }
        fs::read_to_string(self.log_path(id)).map_err(ApiError::internal)
    }

    pub fn datasets(&self) -> Vec<DatasetView> {
        self.inner
            .datasets
            .iter()
            .map(|(id, ds)| DatasetView {
                dataset_id: id.clone(),
                format: ds.dataset.format.clone(),
                digest: ds.digest.clone(),
                episodes: ds
                    .dataset
                    .episodes
                    .iter()
                    .map(|e| EpisodeSummary {
                        id: e.id.clone(),
                        board: e.spec.board,
                        geoms: e.num_geoms(),
                        optimal_length: e.optimal_length,
                        interference: e.spec.interference,
                    })
                    .collect(),
            })
            .collect()
    }

    pub fn asset(&self, hash: &str) -> Result<Vec<u8>, ApiError> {
        if !is_hash(hash) {
            return Err(ApiError::NotFound(format!("asset `{hash}`")));
        }
        fs::read(self.inner.config.data_dir.join("assets").join(format!("{hash}.png")))
            .map_err(|_| ApiError::NotFound(format!("asset `{hash}`")))
    }

    /// Drops sessions idle for longer than the configured timeout.
    pub fn evict_idle(&self, now: Instant) -> usize {
        let timeout = self.inner.config.idle_timeout;
        let mut sessions = self.inner.sessions.write().expect("session map lock");
        let stale: Vec<String> = sessions
            .iter()
            .filter(|(_, slot)| {
                slot.lock().map_or(false, |s| now.saturating_duration_since(s.last_access) > timeout)
            })
            .map(|(id, _)| id.clone())
            .collect();
        let mut expired = self.inner.expired.write().expect("expired lock");
        for id in &stale {
            sessions.remove(id);
            expired.insert(id.clone());
        }
        if !stale.is_empty() {
            tracing::info!(count = stale.len(), "expired idle sessions");
        }
        stale.len()
    }

    pub fn session_count(&self) -> usize {
        self.inner.sessions.read().expect("session map lock").len()
    }
}

fn load_datasets(dir: &Path) -> Result<BTreeMap<String, LoadedDataset>, ServiceError> {
    let mut out = BTreeMap::new();
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| ServiceError::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    for path in paths {
        let id = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default().to_string();
        let dataset = Dataset::load(&path).map_err(|source| ServiceError::Dataset { path: path.clone(), source })?;
        let episodes = dataset.episodes.iter().map(|e| (e.id.clone(), Arc::new(e.clone()))).collect();
        out.insert(id, LoadedDataset { digest: dataset.digest(), dataset, episodes });
    }
    Ok(out)
}
