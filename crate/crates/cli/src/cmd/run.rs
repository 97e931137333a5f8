use std::path::{Path, PathBuf};
use std::sync::Arc;

use ivispar_core::engine::{
    run_episode, Agent, AgentRequest, EngineConfig, EpisodeLog, OptimalAgent, RandomAgent, ScriptedAgent,
    SessionStatus, StdioAgent, TransportError,
};
use ivispar_core::generator::{episode_seed, Episode};
use ivispar_core::observation::Modality;
use ivispar_core::parallel;

use super::{load_dataset, load_templates, write_file};
use crate::{Context, Failure};

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Dataset file. Default DATA_DIR/datasets/paper.json.
    #[arg(long, short)]
    pub dataset: Option<PathBuf>,
    /// optimal, random, scripted:<file> or stdio:<command>.
    #[arg(long, short)]
    pub agent: Option<String>,
    /// Model name recorded in the logs. Defaults to the agent kind (script file stem for scripted).
    #[arg(long)]
    pub name: Option<String>,
    /// text or vision2d.
    #[arg(long, short)]
    pub modality: Option<String>,
    /// Maximum actions per episode. Default 20.
    #[arg(long)]
    pub step_cap: Option<u32>,
    /// Past steps shown in each prompt. Default 2.
    #[arg(long)]
    pub context_window: Option<usize>,
    /// Seed for the random agent; each episode derives its own stream from it. Default 0.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Only run episodes whose id contains this text. Repeatable.
    #[arg(long = "episode", value_name = "TEXT")]
    pub episodes: Vec<String>,
    /// Worker threads, 0 for one per core. Output does not depend on it.
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Directory with the prompt template files. Default: built-in templates.
    #[arg(long)]
    pub templates: Option<PathBuf>,
    /// Log directory, one `<episode>.jsonl` per episode. Default DATA_DIR/logs/<dataset>/<name>-<modality>.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AgentKind {
    Optimal,
    Random,
    Scripted(PathBuf),
    Stdio(String),
}

impl std::str::FromStr for AgentKind {
    type Err = Failure;

    fn from_str(s: &str) -> Result<Self, Failure> {
        match s.split_once(':') {
            None if s == "optimal" => Ok(AgentKind::Optimal),
            None if s == "random" => Ok(AgentKind::Random),
            Some(("scripted", file)) if !file.is_empty() => Ok(AgentKind::Scripted(PathBuf::from(file))),
            Some(("stdio", cmd)) if !cmd.trim().is_empty() => Ok(AgentKind::Stdio(cmd.to_string())),
            _ => Err(Failure::usage(format!(
                "unknown agent `{s}` (expected optimal, random, scripted:<file> or stdio:<command>)"
            ))),
        }
    }
}

impl AgentKind {
    fn default_name(&self) -> String {
        match self {
            AgentKind::Optimal => "optimal".into(),
            AgentKind::Random => "random".into(),
            AgentKind::Scripted(path) => path.file_stem().map_or("scripted".into(), |s| s.to_string_lossy().into()),
            AgentKind::Stdio(_) => "stdio".into(),
        }
    }
}

/// Stands in for an agent that could not be started, so the episode still gets a log.
struct Unreachable {
    name: String,
    reason: String,
}

impl Agent for Unreachable {
    fn name(&self) -> String {
        self.name.clone()
    }

    fn respond(&mut self, _: &AgentRequest) -> Result<String, TransportError> {
        Err(TransportError(self.reason.clone()))
    }
}

struct Named<A: Agent>(A, String);

impl<A: Agent> Agent for Named<A> {
    fn name(&self) -> String {
        self.1.clone()
    }

    fn respond(&mut self, request: &AgentRequest) -> Result<String, TransportError> {
        self.0.respond(request)
    }
}

fn build_agent(kind: &AgentKind, name: &str, episode: &Episode, seed: u64, script: Option<&str>) -> Box<dyn Agent> {
    let name = name.to_string();
    match kind {
        AgentKind::Optimal => Box::new(Named(OptimalAgent::new(episode), name)),
        AgentKind::Random => Box::new(Named(RandomAgent::new(episode, seed), name)),
        AgentKind::Scripted(_) => match ScriptedAgent::parse_script(script.unwrap_or_default(), &episode.id) {
            Ok(replies) => Box::new(ScriptedAgent::new(name, replies)),
            Err(reason) => Box::new(Unreachable { name, reason: format!("bad script: {reason}") }),
        },
        AgentKind::Stdio(cmd) => match StdioAgent::spawn(cmd) {
            Ok(agent) => Box::new(agent.with_name(name)),
            Err(e) => Box::new(Unreachable { name, reason: e.0 }),
        },
    }
}

fn log_file_name(episode_id: &str) -> String {
    let safe: String = episode_id
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || "-_.".contains(c) { c } else { '_' })
        .collect();
    format!("{safe}.jsonl")
}

pub fn run(ctx: &Context, args: Args) -> Result<(), Failure> {
    let cfg = &ctx.config.run;
    let dataset_path = args.dataset.clone().unwrap_or_else(|| ctx.datasets_dir().join("paper.json"));
    let dataset = load_dataset(&dataset_path)?;
    let digest = dataset.digest();

    let kind: AgentKind = args.agent.as_deref().or(cfg.agent.as_deref()).unwrap_or("optimal").parse()?;
    let name = args.name.clone().unwrap_or_else(|| kind.default_name());
    let modality: Modality = args
        .modality
        .as_deref()
        .or(cfg.modality.as_deref())
        .unwrap_or("text")
        .parse()
        .map_err(Failure::usage)?;
    let mut config = EngineConfig::with_modality(modality);
    if let Some(cap) = args.step_cap.or(cfg.step_cap) {
        config.step_cap = cap;
    }
    if let Some(window) = args.context_window.or(cfg.context_window) {
        config.context_window = window;
    }
    config.validate().map_err(|e| Failure::usage(e.to_string()))?;
    let seed = args.seed.or(cfg.seed).unwrap_or(0);
    let jobs = args.jobs.or(cfg.jobs).unwrap_or(0);
    let templates = Arc::new(load_templates(args.templates.as_deref())?);
    let script = match &kind {
        AgentKind::Scripted(path) => Some(std::fs::read_to_string(path).map_err(|e| Failure::io(path, e))?),
        _ => None,
    };

    let episodes: Vec<(usize, Arc<Episode>)> = dataset
        .episodes
        .iter()
        .enumerate()
        .filter(|(_, e)| args.episodes.is_empty() || args.episodes.iter().any(|f| e.id.contains(f.as_str())))
        .map(|(i, e)| (i, Arc::new(e.clone())))
        .collect();
    if episodes.is_empty() {
        return Err(Failure::usage("no episodes selected"));
    }

    let output = args.output.clone().unwrap_or_else(|| {
        let stem = dataset_path.file_stem().map_or("dataset".into(), |s| s.to_string_lossy().into_owned());
        ctx.logs_dir().join(stem).join(format!("{name}-{modality}"))
    });

    let results = parallel::map(jobs, &episodes, |(index, episode)| {
        let mut agent = build_agent(&kind, &name, episode, episode_seed(seed, *index, 0), script.as_deref());
        run_episode(episode.clone(), agent.as_mut(), &config, templates.clone()).map(|mut log| {
            log.header.dataset_digest = Some(digest.clone());
            log
        })
    });

    let mut solved = 0;
    let mut transport = Vec::new();
    for ((_, episode), result) in episodes.iter().zip(results) {
        let log: EpisodeLog = result.map_err(|e| Failure::usage(format!("{}: {e}", episode.id)))?;
        write_file(&output.join(log_file_name(&episode.id)), log.to_jsonl())?;
        match log.status() {
            SessionStatus::Solved => solved += 1,
            SessionStatus::TransportError => transport.push(episode.id.clone()),
            _ => {}
        }
    }
    eprintln!("{solved}/{} solved; logs in {}", episodes.len(), output.display());
    report_transport(&transport, &output)
}

fn report_transport(failed: &[String], output: &Path) -> Result<(), Failure> {
    if failed.is_empty() {
        return Ok(());
    }
    Err(Failure::transport(format!(
        "agent transport failed in {} episode(s), e.g. {}; truncated logs kept in {}",
        failed.len(),
        failed[0],
        output.display()
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn agent_kinds() {
        assert_eq!("optimal".parse::<AgentKind>().unwrap(), AgentKind::Optimal);
        assert_eq!("random".parse::<AgentKind>().unwrap(), AgentKind::Random);
        assert_eq!("scripted:a/b.json".parse::<AgentKind>().unwrap(), AgentKind::Scripted("a/b.json".into()));
        assert_eq!("stdio:python3 agent.py --x".parse::<AgentKind>().unwrap(), AgentKind::Stdio("python3 agent.py --x".into()));
        for bad in ["human", "scripted:", "stdio: ", "Optimal", ""] {
            assert!(bad.parse::<AgentKind>().is_err(), "{bad}");
        }
    }

    #[test]
    fn script_stem_names_the_model() {
        assert_eq!(AgentKind::Scripted("runs/claude-2d.json".into()).default_name(), "claude-2d");
    }

    #[test]
    fn file_names_are_path_safe() {
        assert_eq!(log_file_name("4x4-g02-l03-i0-1"), "4x4-g02-l03-i0-1.jsonl");
        assert_eq!(log_file_name("a/b c"), "a_b_c.jsonl");
    }
}
