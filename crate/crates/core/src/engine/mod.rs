//! The action-perception loop: prompts, reply parsing, sessions, agents and logs.

pub mod agent;
pub mod log;
pub mod prompt;
pub mod reply;
pub mod session;

use thiserror::Error;

use crate::observation::{Modality, RenderError};
use crate::puzzle::PuzzleError;
use crate::search::SearchError;

pub use agent::{
    run_episode, Agent, AgentImage, AgentRequest, AgentResponse, OptimalAgent, RandomAgent, ScriptedAgent, StdioAgent,
    TextStates, TransportError,
};
pub use log::{EpisodeLog, LogEnd, LogError, LogHeader, LogLine, ReplayMismatch, LOG_FORMAT};
pub use prompt::{PromptBundle, PromptTemplates};
pub use reply::{parse_action_reply, ActionParseFailure};
pub use session::{EngineConfig, HistoryEntry, Session, SessionStatus, StepRecord};

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("template `{0}` not found")]
    MissingTemplate(String),
    #[error("template placeholder `{{{0}}}` has no value")]
    UnfilledPlaceholder(String),
    #[error("unsupported modality {0}: only text and vision2d sessions can run")]
    UnsupportedModality(Modality),
    #[error("session is {0} and accepts no further actions")]
    Terminal(SessionStatus),
    #[error("invalid engine config: {0}")]
    Config(String),
    #[error(transparent)]
    Render(#[from] RenderError),
    #[error(transparent)]
    Search(#[from] SearchError),
    #[error(transparent)]
    Puzzle(#[from] PuzzleError),
}
