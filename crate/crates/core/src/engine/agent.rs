//! Agent wire schema, built-in agents and the episode driver.
//!
//! Every agent receives the same [`AgentRequest`] and answers with raw text,
//! whether it lives in-process, behind a subprocess pipe or behind HTTP.

use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};
use std::sync::Arc;

use base64::Engine as _;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::log::EpisodeLog;
use super::prompt::{PromptBundle, PromptTemplates};
use super::session::{EngineConfig, Session};
use super::EngineError;
use crate::generator::Episode;
use crate::observation::{Modality, Observation, ObservationRole};
use crate::puzzle::Configuration;
use crate::search::random_agent_step;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("agent transport failed: {0}")]
pub struct TransportError(pub String);

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TextStates {
    pub active: String,
    pub goal: String,
    /// Oldest first.
    pub past: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentImage {
    pub role: ObservationRole,
    /// SHA-256 of the PNG bytes.
    pub hash: String,
    pub png_base64: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentRequest {
    pub session_id: String,
    /// Number of actions already taken.
    pub step: u32,
    pub system_text: String,
    pub modality: Modality,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text_states: Option<TextStates>,
    /// Goal, past (oldest first), then active.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub images: Option<Vec<AgentImage>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentResponse {
    pub raw_text: String,
}

impl AgentRequest {
    pub fn from_bundle(session_id: &str, step: u32, bundle: &PromptBundle) -> Self {
        let (text_states, images) = match bundle.modality {
            Modality::Text => {
                let mut states = TextStates { active: String::new(), goal: String::new(), past: Vec::new() };
                for (role, obs) in &bundle.observations {
                    if let Observation::Text(t) = obs {
                        match role {
                            ObservationRole::Active => states.active = t.clone(),
                            ObservationRole::Goal => states.goal = t.clone(),
                            ObservationRole::Past => states.past.push(t.clone()),
                        }
                    }
                }
                (Some(states), None)
            }
            _ => {
                let images = bundle
                    .observations
                    .iter()
                    .filter_map(|(role, obs)| match obs {
                        Observation::Image { png, hash } => Some(AgentImage {
                            role: *role,
                            hash: hash.clone(),
                            png_base64: base64::engine::general_purpose::STANDARD.encode(png),
                        }),
                        Observation::Text(_) => None,
                    })
                    .collect();
                (None, Some(images))
            }
        };
        AgentRequest {
            session_id: session_id.to_string(),
            step,
            system_text: bundle.system_text.clone(),
            modality: bundle.modality,
            text_states,
            images,
        }
    }
}

pub trait Agent {
    /// Label recorded in logs and used to group results.
    fn name(&self) -> String;
    fn respond(&mut self, request: &AgentRequest) -> Result<String, TransportError>;
}

/// Replays the episode's stored optimal actions.
#[derive(Debug, Clone)]
pub struct OptimalAgent {
    actions: Vec<String>,
}

impl OptimalAgent {
    pub fn new(episode: &Episode) -> Self {
        OptimalAgent { actions: episode.optimal_actions.iter().map(|a| format!("action: {a}")).collect() }
    }
}

impl Agent for OptimalAgent {
    fn name(&self) -> String {
        "optimal".into()
    }

    fn respond(&mut self, request: &AgentRequest) -> Result<String, TransportError> {
        self.actions
            .get(request.step as usize)
            .cloned()
            .ok_or_else(|| TransportError(format!("optimal path exhausted at step {}", request.step)))
    }
}

/// Uniform choice among legal moves of its own tracked state.
#[derive(Debug, Clone)]
pub struct RandomAgent {
    state: Configuration,
    rng: ChaCha8Rng,
}

impl RandomAgent {
    pub fn new(episode: &Episode, seed: u64) -> Self {
        RandomAgent { state: episode.start.clone(), rng: ChaCha8Rng::seed_from_u64(seed) }
    }
}

impl Agent for RandomAgent {
    fn name(&self) -> String {
        "random".into()
    }

    fn respond(&mut self, _request: &AgentRequest) -> Result<String, TransportError> {
        let cmd = random_agent_step(&self.state, &mut self.rng).map_err(|e| TransportError(e.to_string()))?;
        self.state = self.state.try_move(&cmd).expect("legal move");
        Ok(format!("action: {cmd}"))
    }
}

/// Fixed replies, one per step.
#[derive(Debug, Clone)]
pub struct ScriptedAgent {
    name: String,
    replies: Vec<String>,
}

impl ScriptedAgent {
    pub fn new(name: impl Into<String>, replies: Vec<String>) -> Self {
        ScriptedAgent { name: name.into(), replies }
    }

    /// Reads a script file: a JSON array of replies, a JSON object mapping
    /// episode ids to arrays, or plain text with one reply per line.
    /// Returns the replies for `episode_id`.
    pub fn parse_script(contents: &str, episode_id: &str) -> Result<Vec<String>, String> {
        match serde_json::from_str::<serde_json::Value>(contents) {
            Ok(serde_json::Value::Array(_)) => serde_json::from_str(contents).map_err(|e| e.to_string()),
            Ok(serde_json::Value::Object(map)) => match map.get(episode_id) {
                Some(v) => serde_json::from_value(v.clone()).map_err(|e| e.to_string()),
                None => Ok(Vec::new()),
            },
            _ => Ok(contents.lines().map(str::to_string).collect()),
        }
    }
}

impl Agent for ScriptedAgent {
    fn name(&self) -> String {
        self.name.clone()
    }

    fn respond(&mut self, request: &AgentRequest) -> Result<String, TransportError> {
        self.replies
            .get(request.step as usize)
            .cloned()
            .ok_or_else(|| TransportError(format!("script exhausted at step {}", request.step)))
    }
}

/// A subprocess speaking JSON lines: one [`AgentRequest`] per line on stdin,
/// one [`AgentResponse`] (or a bare text line) per line on stdout.
pub struct StdioAgent {
    name: String,
    child: Child,
    stdin: Option<ChildStdin>,
    stdout: BufReader<ChildStdout>,
}

impl StdioAgent {
    pub fn spawn(command: &str) -> Result<Self, TransportError> {
        let mut child = Command::new("sh")
            .arg("-c")
            .arg(command)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| TransportError(format!("cannot spawn `{command}`: {e}")))?;
        let stdin = child.stdin.take();
        let stdout = BufReader::new(child.stdout.take().expect("piped stdout"));
        Ok(StdioAgent { name: format!("stdio:{command}"), child, stdin, stdout })
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }
}

impl Agent for StdioAgent {
    fn name(&self) -> String {
        self.name.clone()
    }

    fn respond(&mut self, request: &AgentRequest) -> Result<String, TransportError> {
        let stdin = self.stdin.as_mut().ok_or_else(|| TransportError("stdin closed".into()))?;
        let mut line = serde_json::to_string(request).map_err(|e| TransportError(e.to_string()))?;
        line.push('\n');
        stdin
            .write_all(line.as_bytes())
            .and_then(|_| stdin.flush())
            .map_err(|e| TransportError(format!("write to agent: {e}")))?;
        let mut reply = String::new();
        let n = self
            .stdout
            .read_line(&mut reply)
            .map_err(|e| TransportError(format!("read from agent: {e}")))?;
        if n == 0 {
            return Err(TransportError("agent closed its output".into()));
        }
        let reply = reply.trim_end_matches(['\n', '\r']);
        Ok(match serde_json::from_str::<AgentResponse>(reply) {
            Ok(r) => r.raw_text,
            Err(_) => reply.to_string(),
        })
    }
}

impl Drop for StdioAgent {
    fn drop(&mut self) {
        drop(self.stdin.take());
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

/// Drives `session` with `agent` until it ends.
pub fn drive(session: &mut Session, agent: &mut dyn Agent) -> Result<(), EngineError> {
    while !session.status().is_terminal() {
        let bundle = session.build_prompt()?;
        let request = AgentRequest::from_bundle(session.id(), session.step_count(), &bundle);
        match agent.respond(&request) {
            Ok(raw) => {
                session.step_prompted(&bundle, &raw)?;
            }
            Err(e) => {
                tracing::warn!(session = session.id(), "{e}");
                session.abort(e.0);
            }
        }
    }
    Ok(())
}

/// Plays one episode from start to a terminal status and returns its log.
pub fn run_episode(
    episode: Arc<Episode>,
    agent: &mut dyn Agent,
    config: &EngineConfig,
    templates: Arc<PromptTemplates>,
) -> Result<EpisodeLog, EngineError> {
    let name = agent.name();
    let id = format!("{}/{}/{}", episode.id, name, config.modality());
    let mut session = Session::new(id, episode, config.clone(), templates)?;
    drive(&mut session, agent)?;
    Ok(EpisodeLog::from_session(&session, &name))
}
