//! One agent's play-through of one episode.

use std::collections::VecDeque;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::prompt::{expand, vocabulary_vars, PromptBundle, PromptTemplates};
use super::reply::{parse_action_reply, ActionParseFailure};
use super::EngineError;
use crate::generator::Episode;
use crate::observation::{observe, Modality, Observation, ObservationRole, RenderOptions};
use crate::puzzle::{apply_move, is_goal, ActionClass, Configuration, MoveCommand};
use crate::search::DistanceCache;

pub const DEFAULT_STEP_CAP: u32 = 20;
pub const DEFAULT_CONTEXT_WINDOW: usize = 2;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct EngineConfig {
    pub step_cap: u32,
    /// Number of past steps shown to the agent.
    pub context_window: usize,
    /// Rendering settings; `render.modality` selects the session modality.
    pub render: RenderOptions,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            step_cap: DEFAULT_STEP_CAP,
            context_window: DEFAULT_CONTEXT_WINDOW,
            render: RenderOptions::text(),
        }
    }
}

impl EngineConfig {
    pub fn with_modality(modality: Modality) -> Self {
        let mut cfg = EngineConfig::default();
        cfg.render.modality = modality;
        cfg
    }

    pub fn modality(&self) -> Modality {
        self.render.modality
    }

    pub fn validate(&self) -> Result<(), EngineError> {
        if self.step_cap == 0 {
            return Err(EngineError::Config("step_cap must be at least 1".into()));
        }
        if self.modality() == Modality::Vision3d {
            return Err(EngineError::UnsupportedModality(Modality::Vision3d));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionStatus {
    Running,
    Solved,
    StepLimit,
    /// The agent could not be reached; the log is truncated.
    TransportError,
}

impl SessionStatus {
    pub fn is_terminal(self) -> bool {
        self != SessionStatus::Running
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SessionStatus::Running => "running",
            SessionStatus::Solved => "solved",
            SessionStatus::StepLimit => "step_limit",
            SessionStatus::TransportError => "transport_error",
        }
    }
}

impl fmt::Display for SessionStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A past step kept in the context window.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HistoryEntry {
    /// Configuration the agent saw before acting.
    pub state: Configuration,
    pub raw_reply: String,
    pub action: Result<MoveCommand, ActionParseFailure>,
    pub class: ActionClass,
}

/// One log line per step.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepRecord {
    /// 1-based action number.
    pub step: u32,
    pub prompt_hash: String,
    pub image_refs: Vec<String>,
    pub raw_reply: String,
    pub parsed_action: Option<String>,
    pub parse_error: Option<ActionParseFailure>,
    pub action_class: ActionClass,
    pub d_before: u32,
    pub d_after: u32,
    pub status: SessionStatus,
}

#[derive(Debug, Clone)]
pub struct Session {
    id: String,
    episode: Arc<Episode>,
    config: EngineConfig,
    templates: Arc<PromptTemplates>,
    cache: Option<Arc<DistanceCache>>,
    current: Configuration,
    step: u32,
    d0: u32,
    d: u32,
    history: VecDeque<HistoryEntry>,
    status: SessionStatus,
    records: Vec<StepRecord>,
    error: Option<String>,
}

impl Session {
    pub fn new(
        id: impl Into<String>,
        episode: Arc<Episode>,
        config: EngineConfig,
        templates: Arc<PromptTemplates>,
    ) -> Result<Self, EngineError> {
        Self::with_cache(id, episode, config, templates, None)
    }

    /// Like [`Session::new`] with a private distance cache instead of the global one.
    pub fn with_cache(
        id: impl Into<String>,
        episode: Arc<Episode>,
        config: EngineConfig,
        templates: Arc<PromptTemplates>,
        cache: Option<Arc<DistanceCache>>,
    ) -> Result<Self, EngineError> {
        config.validate()?;
        let current = episode.start.clone();
        let d0 = match cache.as_deref() {
            Some(c) => c,
            None => DistanceCache::global(),
        }
        .distance(&current, &episode.goal)?;
        let status = if is_goal(&current, &episode.goal)? {
            SessionStatus::Solved
        } else {
            SessionStatus::Running
        };
        Ok(Session {
            id: id.into(),
            episode,
            config,
            templates,
            cache,
            current,
            step: 0,
            d0,
            d: d0,
            history: VecDeque::new(),
            status,
            records: Vec::new(),
            error: None,
        })
    }

    fn oracle(&self) -> &DistanceCache {
        match self.cache.as_deref() {
            Some(c) => c,
            None => DistanceCache::global(),
        }
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn episode(&self) -> &Episode {
        &self.episode
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    pub fn current(&self) -> &Configuration {
        &self.current
    }

    pub fn step_count(&self) -> u32 {
        self.step
    }

    pub fn status(&self) -> SessionStatus {
        self.status
    }

    pub fn d0(&self) -> u32 {
        self.d0
    }

    /// Remaining shortest-path distance to the goal.
    pub fn distance(&self) -> u32 {
        self.d
    }

    pub fn history(&self) -> impl Iterator<Item = &HistoryEntry> {
        self.history.iter()
    }

    pub fn records(&self) -> &[StepRecord] {
        &self.records
    }

    pub fn error(&self) -> Option<&str> {
        self.error.as_deref()
    }

    pub fn build_prompt(&self) -> Result<PromptBundle, EngineError> {
        if self.status.is_terminal() {
            return Err(EngineError::Terminal(self.status));
        }
        let modality = self.config.modality();
        let opts = &self.config.render;
        let mut observations = Vec::with_capacity(self.history.len() + 2);
        observations.push((ObservationRole::Goal, observe(&self.episode.goal, ObservationRole::Goal, opts)?));
        for entry in &self.history {
            observations.push((ObservationRole::Past, observe(&entry.state, ObservationRole::Past, opts)?));
        }
        observations.push((ObservationRole::Active, observe(&self.current, ObservationRole::Active, opts)?));

        let spec = &self.episode.spec;
        let mut vars = vocabulary_vars(spec.board, &spec.colors, &spec.shapes);
        vars.insert("visual_input_heading", "Visual Input:".to_string());
        let text_of = |obs: &Observation| match obs {
            Observation::Text(t) => t.clone(),
            Observation::Image { .. } => String::new(),
        };
        match modality {
            Modality::Text => {
                vars.insert("text_snippet_goal", text_of(&observations[0].1));
                vars.insert("text_snippet_active", text_of(&observations[observations.len() - 1].1));
            }
            _ => {
                vars.insert("text_snippet_goal", "<image: goal>".to_string());
                vars.insert("text_snippet_active", "<image: active>".to_string());
            }
        }
        vars.insert("text_snippet_past", self.past_snippet(modality));

        let mut system_text = expand(&self.templates.interactive, &vars)?;
        if modality == Modality::Vision2d {
            system_text.push_str("\n\n");
            system_text.push_str(&expand(&self.templates.vision, &vars)?);
        }
        Ok(PromptBundle { system_text, observations, modality })
    }

    /// Past states with the action taken from each, oldest first. Only
    /// whether the board changed is reported, never distances.
    fn past_snippet(&self, modality: Modality) -> String {
        if self.history.is_empty() {
            return "none".to_string();
        }
        let n = self.history.len();
        self.history
            .iter()
            .enumerate()
            .map(|(i, e)| {
                let state = match modality {
                    Modality::Text => format!("state {}", e.state.to_text()),
                    _ => format!("<image: past {}>", i + 1),
                };
                let action = match &e.action {
                    Ok(cmd) => format!("your action {cmd}"),
                    Err(reason) => format!("your reply had no valid action ({reason})"),
                };
                let outcome = if e.class.changes_state() {
                    "the board changed"
                } else {
                    "invalid, no object moved"
                };
                format!("[{} of {n}] {state}; {action}; {outcome}", i + 1)
            })
            .collect::<Vec<_>>()
            .join(" | ")
    }

    /// Applies one raw agent reply.
    pub fn step(&mut self, raw_reply: &str) -> Result<&StepRecord, EngineError> {
        let bundle = self.build_prompt()?;
        self.step_prompted(&bundle, raw_reply)
    }

    /// Like [`Session::step`] with the bundle the agent was shown.
    pub(crate) fn step_prompted(&mut self, bundle: &PromptBundle, raw_reply: &str) -> Result<&StepRecord, EngineError> {
        if self.status.is_terminal() {
            return Err(EngineError::Terminal(self.status));
        }
        let oracle = self.oracle();
        let action = parse_action_reply(raw_reply);
        let (next, class, d_after) = match &action {
            Ok(cmd) => {
                let out = apply_move(&self.current, cmd, &self.episode.goal, oracle)?;
                (out.config, out.class, out.d_after)
            }
            Err(_) => (self.current.clone(), ActionClass::IllegalCommand, self.d),
        };
        let d_before = self.d;
        let before = std::mem::replace(&mut self.current, next);
        self.d = d_after;
        self.step += 1;

        if self.config.context_window > 0 {
            if self.history.len() == self.config.context_window {
                self.history.pop_front();
            }
            self.history.push_back(HistoryEntry {
                state: before,
                raw_reply: raw_reply.to_string(),
                action: action.clone(),
                class,
            });
        }

        self.status = if is_goal(&self.current, &self.episode.goal)? {
            SessionStatus::Solved
        } else if self.step >= self.config.step_cap {
            SessionStatus::StepLimit
        } else {
            SessionStatus::Running
        };

        self.records.push(StepRecord {
            step: self.step,
            prompt_hash: bundle.hash(),
            image_refs: bundle.image_refs(),
            raw_reply: raw_reply.to_string(),
            parsed_action: action.as_ref().ok().map(|c| c.to_string()),
            parse_error: action.err(),
            action_class: class,
            d_before,
            d_after,
            status: self.status,
        });
        Ok(self.records.last().expect("just pushed"))
    }

    /// Ends the session after the agent became unreachable.
    pub fn abort(&mut self, reason: impl Into<String>) {
        if !self.status.is_terminal() {
            self.status = SessionStatus::TransportError;
        }
        self.error = Some(reason.into());
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generator::{generate_episode, ComplexitySpec};
    use crate::puzzle::BoardSpec;

    fn episode(geoms: usize, length: u32, seed: u64) -> Arc<Episode> {
        let spec = ComplexitySpec::new(BoardSpec::new(4, 4).unwrap(), geoms, length, 0);
        Arc::new(generate_episode(&spec, seed).unwrap())
    }

    fn session(ep: Arc<Episode>, modality: Modality) -> Session {
        Session::new("s", ep, EngineConfig::with_modality(modality), Arc::default()).unwrap()
    }

    #[test]
    fn optimal_replay_solves_at_optimal_length() {
        let ep = episode(5, 6, 1);
        let mut s = session(ep.clone(), Modality::Text);
        for cmd in &ep.optimal_actions {
            let rec = s.step(&format!("thinking...\naction: {cmd}")).unwrap();
            assert_eq!(rec.action_class, ActionClass::Effective);
        }
        assert_eq!(s.status(), SessionStatus::Solved);
        assert_eq!(s.step_count(), ep.optimal_length);
        assert!(is_goal(s.current(), &ep.goal).unwrap());
        assert!(matches!(s.step("action: move red cube up"), Err(EngineError::Terminal(SessionStatus::Solved))));
    }

    #[test]
    fn twenty_noops_hit_the_step_cap() {
        let mut s = session(episode(3, 4, 2), Modality::Text);
        for _ in 0..20 {
            assert_eq!(s.step("I pass.").unwrap().action_class, ActionClass::IllegalCommand);
        }
        assert_eq!(s.status(), SessionStatus::StepLimit);
        assert_eq!(s.records().len(), 20);
        assert!(s.records().iter().all(|r| r.action_class == ActionClass::IllegalCommand));
        assert!(matches!(s.build_prompt(), Err(EngineError::Terminal(SessionStatus::StepLimit))));
    }

    #[test]
    fn one_detour_costs_two_steps() {
        let ep = episode(4, 5, 3);
        let mut s = session(ep.clone(), Modality::Text);
        let detour = s
            .current()
            .legal_moves()
            .into_iter()
            .find(|m| {
                let next = s.current().try_move(m).unwrap();
                DistanceCache::global().distance(&next, &ep.goal).unwrap() == ep.optimal_length + 1
            })
            .expect("some legal move increases the distance");
        assert_eq!(s.step(&format!("action: {detour}")).unwrap().action_class, ActionClass::Ineffective);
        assert_eq!(s.step(&format!("action: {}", detour.inverse())).unwrap().action_class, ActionClass::Effective);
        for cmd in &ep.optimal_actions {
            s.step(&format!("action: {cmd}")).unwrap();
        }
        assert_eq!(s.status(), SessionStatus::Solved);
        assert_eq!(s.step_count(), ep.optimal_length + 2);
    }

    #[test]
    fn context_window_holds_two_past_states() {
        let ep = episode(4, 6, 4);
        let mut s = session(ep, Modality::Text);
        assert_eq!(s.build_prompt().unwrap().past_count(), 0);
        s.step("nothing").unwrap();
        assert_eq!(s.build_prompt().unwrap().past_count(), 1);
        for _ in 0..4 {
            s.step("nothing").unwrap();
            assert_eq!(s.build_prompt().unwrap().past_count(), 2);
            assert!(s.history().count() <= 2);
        }
    }

    #[test]
    fn text_bundles_have_no_images_and_full_substitution() {
        let ep = episode(4, 6, 5);
        let mut s = session(ep.clone(), Modality::Text);
        s.step(&format!("action: {}", ep.optimal_actions[0])).unwrap();
        let b = s.build_prompt().unwrap();
        assert_eq!(b.image_count(), 0);
        assert!(!b.system_text.contains("{text_snippet"));
        assert!(b.system_text.contains(&format!("Goal: {};", ep.goal.to_text())));
        assert!(b.system_text.contains(&format!("Current: {};", s.current().to_text())));
        assert!(b.system_text.contains("Colors: red, green, blue, yellow"));
    }

    #[test]
    fn vision_bundles_attach_goal_past_active_images() {
        let ep = episode(4, 6, 6);
        let mut s = session(ep, Modality::Vision2d);
        let b = s.build_prompt().unwrap();
        assert_eq!(b.image_count(), 2);
        assert!(b.system_text.contains("## Analyze the Images"));
        s.step("nothing").unwrap();
        s.step("nothing").unwrap();
        s.step("nothing").unwrap();
        let b = s.build_prompt().unwrap();
        let roles: Vec<_> = b.observations.iter().map(|(r, _)| *r).collect();
        assert_eq!(
            roles,
            vec![ObservationRole::Goal, ObservationRole::Past, ObservationRole::Past, ObservationRole::Active]
        );
        assert_eq!(s.records()[2].image_refs.len(), 4);
    }

    #[test]
    fn prompts_never_leak_solution_or_distances() {
        let ep = episode(6, 9, 7);
        let mut s = session(ep.clone(), Modality::Text);
        let replies = ["action: move red cube up", "hmm", "action: move blue sphere left"];
        for r in replies {
            let b = s.build_prompt().unwrap();
            for cmd in &ep.optimal_actions {
                let leaked = b.system_text.contains(&cmd.to_string()) && !replies.iter().any(|r| r.contains(&cmd.to_string()));
                assert!(!leaked, "prompt contains optimal action {cmd}");
            }
            assert!(!b.system_text.contains("optimal"));
            assert!(!b.system_text.contains("distance"));
            s.step(r).unwrap();
        }
    }

    #[test]
    fn vision3d_is_rejected() {
        let ep = episode(2, 2, 8);
        let err = Session::new("s", ep, EngineConfig::with_modality(Modality::Vision3d), Arc::default()).unwrap_err();
        assert!(matches!(err, EngineError::UnsupportedModality(Modality::Vision3d)));
    }

    #[test]
    fn solved_status_matches_goal_test() {
        let ep = episode(3, 3, 9);
        let mut s = session(ep.clone(), Modality::Text);
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(9);
        while !s.status().is_terminal() {
            let cmd = crate::search::random_agent_step(s.current(), &mut rng).unwrap();
            s.step(&format!("action: {cmd}")).unwrap();
            assert_eq!(s.status() == SessionStatus::Solved, is_goal(s.current(), &ep.goal).unwrap());
        }
        assert!(s.step_count() <= DEFAULT_STEP_CAP);
    }
}
