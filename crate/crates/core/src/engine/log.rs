//! Line-delimited episode logs: a header, one line per step, an end line.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::prompt::PromptTemplates;
use super::session::{EngineConfig, Session, SessionStatus, StepRecord};
use crate::generator::{ComplexitySpec, Episode};
use crate::observation::Modality;

pub const LOG_FORMAT: &str = "ivispar-log/1";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogHeader {
    pub format: String,
    pub session: String,
    pub episode: String,
    #[serde(default)]
    pub dataset_digest: Option<String>,
    pub agent: String,
    pub modality: Modality,
    pub step_cap: u32,
    pub context_window: usize,
    pub d0: u32,
    pub spec: ComplexitySpec,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogEnd {
    pub status: SessionStatus,
    pub steps: u32,
    pub final_distance: u32,
    #[serde(default)]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LogLine {
    Header(LogHeader),
    Step(StepRecord),
    End(LogEnd),
}

impl LogLine {
    pub fn to_line(&self) -> String {
        let mut s = serde_json::to_string(self).expect("log lines always serialize");
        s.push('\n');
        s
    }
}

#[derive(Debug, Error)]
pub enum LogError {
    #[error("line {line}: {source}")]
    Json { line: usize, source: serde_json::Error },
    #[error("log has no header line")]
    MissingHeader,
    #[error("unsupported log format `{0}` (expected {LOG_FORMAT})")]
    Version(String),
    #[error("line {line}: {reason}")]
    Corrupt { line: usize, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EpisodeLog {
    pub header: LogHeader,
    pub steps: Vec<StepRecord>,
    /// Absent while a session is still running or when the log was cut off.
    pub end: Option<LogEnd>,
}

impl EpisodeLog {
    pub fn header_for(session: &Session, agent: &str) -> LogHeader {
        LogHeader {
            format: LOG_FORMAT.to_string(),
            session: session.id().to_string(),
            episode: session.episode().id.clone(),
            dataset_digest: None,
            agent: agent.to_string(),
            modality: session.config().modality(),
            step_cap: session.config().step_cap,
            context_window: session.config().context_window,
            d0: session.d0(),
            spec: session.episode().spec.clone(),
        }
    }

    pub fn end_for(session: &Session) -> Option<LogEnd> {
        session.status().is_terminal().then(|| LogEnd {
            status: session.status(),
            steps: session.step_count(),
            final_distance: session.distance(),
            error: session.error().map(str::to_string),
        })
    }

    pub fn from_session(session: &Session, agent: &str) -> Self {
        EpisodeLog {
            header: Self::header_for(session, agent),
            steps: session.records().to_vec(),
            end: Self::end_for(session),
        }
    }

    pub fn status(&self) -> SessionStatus {
        match (&self.end, self.steps.last()) {
            (Some(end), _) => end.status,
            (None, Some(last)) => last.status,
            (None, None) => SessionStatus::Running,
        }
    }

    /// Transport failures and unfinished runs are excluded from scoring by default.
    pub fn is_scored(&self) -> bool {
        matches!(self.status(), SessionStatus::Solved | SessionStatus::StepLimit)
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = LogLine::Header(self.header.clone()).to_line();
        for s in &self.steps {
            out.push_str(&LogLine::Step(s.clone()).to_line());
        }
        if let Some(end) = &self.end {
            out.push_str(&LogLine::End(end.clone()).to_line());
        }
        out
    }

    /// Parses one log and checks its internal consistency.
    pub fn from_jsonl(text: &str) -> Result<Self, LogError> {
        let mut header = None;
        let mut steps: Vec<StepRecord> = Vec::new();
        let mut end = None;
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            if raw.trim().is_empty() {
                continue;
            }
            let corrupt = |reason: String| LogError::Corrupt { line, reason };
            let parsed: LogLine = serde_json::from_str(raw).map_err(|source| LogError::Json { line, source })?;
            if end.is_some() {
                return Err(corrupt("content after the end line".into()));
            }
            match parsed {
                LogLine::Header(h) => {
                    if header.is_some() {
                        return Err(corrupt("second header".into()));
                    }
                    if h.format != LOG_FORMAT {
                        return Err(LogError::Version(h.format));
                    }
                    header = Some(h);
                }
                LogLine::Step(s) => {
                    let h = header.as_ref().ok_or(LogError::MissingHeader)?;
                    let expected = steps.len() as u32 + 1;
                    if s.step != expected {
                        return Err(corrupt(format!("step {} where {expected} was expected", s.step)));
                    }
                    if s.step > h.step_cap {
                        return Err(corrupt(format!("step {} exceeds the cap {}", s.step, h.step_cap)));
                    }
                    let prev_d = steps.last().map_or(h.d0, |p| p.d_after);
                    if s.d_before != prev_d {
                        return Err(corrupt(format!("d_before {} does not continue from {prev_d}", s.d_before)));
                    }
                    if steps.last().is_some_and(|p| p.status.is_terminal()) {
                        return Err(corrupt("step after a terminal status".into()));
                    }
                    steps.push(s);
                }
                LogLine::End(e) => {
                    if header.is_none() {
                        return Err(LogError::MissingHeader);
                    }
                    if e.steps as usize != steps.len() {
                        return Err(corrupt(format!("end reports {} steps but {} were logged", e.steps, steps.len())));
                    }
                    end = Some(e);
                }
            }
        }
        Ok(EpisodeLog { header: header.ok_or(LogError::MissingHeader)?, steps, end })
    }

    pub fn read(path: &std::path::Path) -> Result<Self, LogError> {
        Self::from_jsonl(&std::fs::read_to_string(path)?)
    }

    /// Reads a file holding several concatenated logs.
    pub fn read_many(text: &str) -> Result<Vec<Self>, LogError> {
        let mut chunks: Vec<String> = Vec::new();
        for line in text.lines() {
            if line.contains("\"kind\":\"header\"") || chunks.is_empty() {
                chunks.push(String::new());
            }
            let chunk = chunks.last_mut().expect("pushed above");
            chunk.push_str(line);
            chunk.push('\n');
        }
        chunks.iter().filter(|c| !c.trim().is_empty()).map(|c| Self::from_jsonl(c)).collect()
    }

    /// Re-simulates the logged replies against `episode` and checks that
    /// every classification, distance and status comes out identical.
    pub fn replay(&self, episode: Arc<Episode>, templates: Arc<PromptTemplates>) -> Result<(), ReplayMismatch> {
        let mismatch = |step: u32, what: String| ReplayMismatch { step, what };
        if episode.id != self.header.episode {
            return Err(mismatch(0, format!("log is for episode {} not {}", self.header.episode, episode.id)));
        }
        let mut config = EngineConfig::with_modality(Modality::Text);
        config.step_cap = self.header.step_cap;
        config.context_window = self.header.context_window;
        let mut session =
            Session::new(self.header.session.clone(), episode, config, templates).map_err(|e| mismatch(0, e.to_string()))?;
        if session.d0() != self.header.d0 {
            return Err(mismatch(0, format!("d0 {} vs logged {}", session.d0(), self.header.d0)));
        }
        for logged in &self.steps {
            let got = session.step(&logged.raw_reply).map_err(|e| mismatch(logged.step, e.to_string()))?;
            let fields = [
                ("parsed_action", format!("{:?}", got.parsed_action), format!("{:?}", logged.parsed_action)),
                ("action_class", format!("{:?}", got.action_class), format!("{:?}", logged.action_class)),
                ("d_before", got.d_before.to_string(), logged.d_before.to_string()),
                ("d_after", got.d_after.to_string(), logged.d_after.to_string()),
                ("status", got.status.to_string(), logged.status.to_string()),
            ];
            for (name, a, b) in fields {
                if a != b {
                    return Err(mismatch(logged.step, format!("{name}: replay {a} vs logged {b}")));
                }
            }
        }
        if let Some(end) = &self.end {
            if end.status != SessionStatus::TransportError && end.status != session.status() {
                return Err(mismatch(end.steps, format!("final status: replay {} vs logged {}", session.status(), end.status)));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("replay diverged at step {step}: {what}")]
pub struct ReplayMismatch {
    pub step: u32,
    pub what: String,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::agent::{run_episode, RandomAgent, ScriptedAgent};
    use crate::generator::generate_episode;
    use crate::puzzle::BoardSpec;

    fn episode(seed: u64) -> Arc<Episode> {
        let spec = ComplexitySpec::new(BoardSpec::new(4, 4).unwrap(), 4, 5, 0);
        Arc::new(generate_episode(&spec, seed).unwrap())
    }

    fn random_log(seed: u64) -> (Arc<Episode>, EpisodeLog) {
        let ep = episode(seed);
        let log = run_episode(ep.clone(), &mut RandomAgent::new(&ep, seed), &EngineConfig::default(), Arc::default()).unwrap();
        (ep, log)
    }

    #[test]
    fn jsonl_round_trip() {
        let (_, log) = random_log(1);
        let text = log.to_jsonl();
        assert!(text.starts_with("{\"kind\":\"header\",\"format\":\"ivispar-log/1\""));
        assert_eq!(text.lines().count(), log.steps.len() + 2);
        assert_eq!(EpisodeLog::from_jsonl(&text).unwrap(), log);
    }

    #[test]
    fn replay_reproduces_random_and_scripted_logs() {
        for seed in 0..20 {
            let (ep, log) = random_log(seed);
            log.replay(ep, Arc::default()).unwrap();
        }
        let ep = episode(99);
        let replies = vec!["action: move red cube up".to_string(), "nonsense".into(), "action: move blue sphere left".into()];
        let log = run_episode(ep.clone(), &mut ScriptedAgent::new("s", replies), &EngineConfig::default(), Arc::default()).unwrap();
        log.replay(ep, Arc::default()).unwrap();
    }

    #[test]
    fn tampered_log_fails_replay() {
        let (ep, mut log) = random_log(5);
        log.steps[0].action_class = crate::puzzle::ActionClass::OutOfBounds;
        let err = log.replay(ep, Arc::default()).unwrap_err();
        assert_eq!(err.step, 1);
    }

    #[test]
    fn corrupt_logs_are_rejected() {
        let (_, log) = random_log(2);
        let text = log.to_jsonl();
        let lines: Vec<&str> = text.lines().collect();
        assert!(matches!(EpisodeLog::from_jsonl(&lines[1..].join("\n")), Err(LogError::MissingHeader)));
        let skipped = [lines[0], lines[2]].join("\n");
        assert!(matches!(EpisodeLog::from_jsonl(&skipped), Err(LogError::Corrupt { .. })));
        assert!(matches!(EpisodeLog::from_jsonl("{not json"), Err(LogError::Json { line: 1, .. })));
        let old = text.replacen("ivispar-log/1", "ivispar-log/0", 1);
        assert!(matches!(EpisodeLog::from_jsonl(&old), Err(LogError::Version(_))));
    }

    #[test]
    fn many_logs_in_one_file() {
        let text: String = (0..3).map(|s| random_log(s).1.to_jsonl()).collect();
        assert_eq!(EpisodeLog::read_many(&text).unwrap().len(), 3);
    }
}
