//! Metrics over episode logs: success rate, regret, action classes, and
//! board-state inference scores, plus CSV tables of each.

pub mod aux;
pub mod hungarian;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::EpisodeLog;
use crate::generator::Dataset;
use crate::observation::{parse_text_state, Modality};
use crate::puzzle::ActionClass;

pub use aux::{classify_format_error, parse_prediction, score_auxiliary, AuxContext, AuxReport, FormatTag};

/// z for a two-sided 95% normal interval.
pub const Z95: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("corrupt log for {episode} at step {step}: {reason}")]
    CorruptLog { episode: String, step: u32, reason: String },
    #[error("logs come from different datasets: {0:?}")]
    MixedDatasets(Vec<String>),
    #[error("episode `{0}` is not in the dataset")]
    UnknownEpisode(String),
    #[error("auxiliary record for {episode}: {reason}")]
    BadAuxRecord { episode: String, reason: String },
}

/// Regret per step: `R(t) = d_t - max(d_0 - t, 0)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegretSeries {
    pub per_step: Vec<u32>,
    /// Distance to the goal at the final state.
    pub final_remaining: u32,
}

impl RegretSeries {
    pub fn mean(&self) -> Option<f64> {
        (!self.per_step.is_empty()).then(|| self.per_step.iter().map(|&r| r as f64).sum::<f64>() / self.per_step.len() as f64)
    }
}

pub fn regret_series(log: &EpisodeLog) -> Result<RegretSeries, EvalError> {
    let d0 = log.header.d0;
    let corrupt = |step: u32, reason: String| EvalError::CorruptLog { episode: log.header.episode.clone(), step, reason };
    let mut d_prev = d0;
    let mut per_step = Vec::with_capacity(log.steps.len());
    for (i, s) in log.steps.iter().enumerate() {
        let t = i as u32 + 1;
        if s.step != t {
            return Err(corrupt(s.step, format!("expected step {t}")));
        }
        if s.d_before != d_prev {
            return Err(corrupt(t, format!("d_before {} does not follow {d_prev}", s.d_before)));
        }
        let legal = s.action_class.changes_state();
        if (legal && s.d_after.abs_diff(s.d_before) != 1) || (!legal && s.d_after != s.d_before) {
            return Err(corrupt(t, format!("{:?} cannot take d from {} to {}", s.action_class, s.d_before, s.d_after)));
        }
        if (s.action_class == ActionClass::Effective) != (s.d_after + 1 == s.d_before) {
            return Err(corrupt(t, format!("class {:?} disagrees with the distance change", s.action_class)));
        }
        let bracket = d0.saturating_sub(t);
        let r = s
            .d_after
            .checked_sub(bracket)
            .ok_or_else(|| corrupt(t, format!("d = {} is below the optimal bound {bracket}", s.d_after)))?;
        per_step.push(r);
        d_prev = s.d_after;
    }
    Ok(RegretSeries { per_step, final_remaining: d_prev })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionStats {
    pub effective: u32,
    pub ineffective: u32,
    pub occupied_destination: u32,
    pub out_of_bounds: u32,
    pub illegal: u32,
}

impl ActionStats {
    pub fn from_log(log: &EpisodeLog) -> Self {
        let mut s = ActionStats::default();
        for step in &log.steps {
            *s.slot(step.action_class) += 1;
        }
        s
    }

    fn slot(&mut self, class: ActionClass) -> &mut u32 {
        match class {
            ActionClass::Effective => &mut self.effective,
            ActionClass::Ineffective => &mut self.ineffective,
            ActionClass::OccupiedDestination => &mut self.occupied_destination,
            ActionClass::OutOfBounds => &mut self.out_of_bounds,
            ActionClass::IllegalCommand => &mut self.illegal,
        }
    }

    pub fn get(&self, class: ActionClass) -> u32 {
        let mut copy = *self;
        *copy.slot(class)
    }

    pub fn total(&self) -> u32 {
        ActionClass::ALL.iter().map(|&c| self.get(c)).sum()
    }
}

/// Everything scored about one log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeMetrics {
    pub model: String,
    pub modality: Modality,
    pub episode: String,
    pub cell: CellKey,
    pub solved: bool,
    pub steps: u32,
    pub regret: RegretSeries,
    pub actions: ActionStats,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CellKey {
    pub geoms: usize,
    pub length: u32,
    pub interference: u32,
}

pub fn episode_metrics(log: &EpisodeLog) -> Result<EpisodeMetrics, EvalError> {
    let spec = &log.header.spec;
    Ok(EpisodeMetrics {
        model: log.header.agent.clone(),
        modality: log.header.modality,
        episode: log.header.episode.clone(),
        cell: CellKey { geoms: spec.num_geoms, length: spec.target_length, interference: spec.interference },
        solved: log.status() == crate::engine::SessionStatus::Solved,
        steps: log.steps.len() as u32,
        regret: regret_series(log)?,
        actions: ActionStats::from_log(log),
    })
}

/// Which header fields split the logs into groups.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Grouping {
    pub model: bool,
    pub modality: bool,
    pub cell: bool,
}

impl Grouping {
    pub const MODEL_MODALITY: Grouping = Grouping { model: true, modality: true, cell: false };
    pub const FULL: Grouping = Grouping { model: true, modality: true, cell: true };
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GroupKey {
    pub model: Option<String>,
    pub modality: Option<Modality>,
    pub cell: Option<CellKey>,
}

impl GroupKey {
    fn of(m: &EpisodeMetrics, g: Grouping) -> Self {
        GroupKey {
            model: g.model.then(|| m.model.clone()),
            modality: g.modality.then_some(m.modality),
            cell: g.cell.then_some(m.cell),
        }
    }
}

/// Sample mean with a normal-approximation 95% interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanCi {
    pub n: usize,
    pub mean: f64,
    pub lo: f64,
    pub hi: f64,
}

impl MeanCi {
    pub fn of(xs: &[f64]) -> Self {
        let n = xs.len();
        if n == 0 {
            return MeanCi { n, mean: f64::NAN, lo: f64::NAN, hi: f64::NAN };
        }
        let mean = xs.iter().sum::<f64>() / n as f64;
        let half = if n > 1 {
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            Z95 * (var / n as f64).sqrt()
        } else {
            0.0
        };
        MeanCi { n, mean, lo: mean - half, hi: mean + half }
    }
}

/// Binomial proportion in percent with a normal-approximation (Wald) 95% interval, clamped to [0, 100].
pub fn success_rate_ci(solved: usize, total: usize) -> (f64, f64, f64) {
    if total == 0 {
        return (f64::NAN, f64::NAN, f64::NAN);
    }
    let p = solved as f64 / total as f64;
    let half = Z95 * (p * (1.0 - p) / total as f64).sqrt();
    (100.0 * p, 100.0 * (p - half).max(0.0), 100.0 * (p + half).min(1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub key: GroupKey,
    pub episodes: usize,
    pub solved: usize,
    /// Percent.
    pub success_rate: f64,
    pub success_lo: f64,
    pub success_hi: f64,
    /// R(t) pooled over every step of every episode.
    pub step_regret: MeanCi,
    /// Per-episode mean of R(t), averaged over episodes.
    pub episode_regret: MeanCi,
    /// Distance left at the final state, averaged over episodes.
    pub final_remaining: MeanCi,
    /// Mean count per episode, in [`ActionClass::ALL`] order.
    pub actions_per_episode: [f64; 5],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub grouping: Grouping,
    pub groups: Vec<GroupSummary>,
    /// Logs left out because the agent transport failed or the run never ended.
    pub unscored: usize,
}

/// Groups and summarizes scored logs.
pub fn aggregate(logs: &[EpisodeLog], grouping: Grouping) -> Result<Summary, EvalError> {
    let digests: BTreeSet<&str> = logs.iter().filter_map(|l| l.header.dataset_digest.as_deref()).collect();
    if digests.len() > 1 {
        return Err(EvalError::MixedDatasets(digests.into_iter().map(str::to_string).collect()));
    }
    let mut groups: BTreeMap<GroupKey, Vec<EpisodeMetrics>> = BTreeMap::new();
    let mut unscored_keys = BTreeSet::new();
    let mut unscored = 0;
    for log in logs {
        let m = episode_metrics(log)?;
        if log.is_scored() {
            groups.entry(GroupKey::of(&m, grouping)).or_default().push(m);
        } else {
            unscored += 1;
            unscored_keys.insert(GroupKey::of(&m, grouping));
        }
    }
    for key in unscored_keys.iter().filter(|k| !groups.contains_key(*k)) {
        tracing::warn!(?key, "group has no scored logs; omitted");
    }
    let groups = groups.into_iter().map(|(key, ms)| summarize(key, &ms)).collect();
    Ok(Summary { grouping, groups, unscored })
}

fn summarize(key: GroupKey, ms: &[EpisodeMetrics]) -> GroupSummary {
    let solved = ms.iter().filter(|m| m.solved).count();
    let (success_rate, success_lo, success_hi) = success_rate_ci(solved, ms.len());
    let pooled: Vec<f64> = ms.iter().flat_map(|m| m.regret.per_step.iter().map(|&r| r as f64)).collect();
    let per_episode: Vec<f64> = ms.iter().map(|m| m.regret.mean().unwrap_or(0.0)).collect();
    let finals: Vec<f64> = ms.iter().map(|m| m.regret.final_remaining as f64).collect();
    let mut actions_per_episode = [0.0; 5];
    for (slot, &class) in actions_per_episode.iter_mut().zip(ActionClass::ALL.iter()) {
        *slot = ms.iter().map(|m| m.actions.get(class) as f64).sum::<f64>() / ms.len() as f64;
    }
    GroupSummary {
        key,
        episodes: ms.len(),
        solved,
        success_rate,
        success_lo,
        success_hi,
        step_regret: MeanCi::of(&pooled),
        episode_regret: MeanCi::of(&per_episode),
        final_remaining: MeanCi::of(&finals),
        actions_per_episode,
    }
}

/// One board-state inference reply to score.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuxRecord {
    pub model: String,
    pub modality: Modality,
    pub episode: String,
    /// Text of the shown configuration; defaults to the episode's start state.
    #[serde(default)]
    pub state: Option<String>,
    pub raw_reply: String,
}

pub fn score_aux_records(dataset: &Dataset, records: &[AuxRecord]) -> Result<Vec<AuxReport>, EvalError> {
    records
        .iter()
        .map(|r| {
            let ep = dataset.episode(&r.episode).ok_or_else(|| EvalError::UnknownEpisode(r.episode.clone()))?;
            let truth = match &r.state {
                Some(text) => parse_text_state(text, ep.spec.board)
                    .map_err(|e| EvalError::BadAuxRecord { episode: r.episode.clone(), reason: e.to_string() })?,
                None => ep.start.clone(),
            };
            let ctx = AuxContext::new(ep.spec.board, &ep.spec.colors, &ep.spec.shapes);
            Ok(score_auxiliary(&truth, &r.raw_reply, &ctx))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuxSummary {
    pub model: String,
    pub modality: Modality,
    pub replies: usize,
    /// Correct geoms over true geoms, percent.
    pub accuracy: f64,
    pub correct: f64,
    pub missed: f64,
    pub hallucinated: f64,
    pub coord_errors: f64,
    pub color_errors: f64,
    pub shape_errors: f64,
    pub format_errors: f64,
    pub format_breakdown: BTreeMap<FormatTag, u32>,
    pub repairable_inversions: u32,
}

pub fn aggregate_aux(records: &[AuxRecord], reports: &[AuxReport]) -> Vec<AuxSummary> {
    let mut groups: BTreeMap<(String, Modality), Vec<&AuxReport>> = BTreeMap::new();
    for (rec, rep) in records.iter().zip(reports) {
        groups.entry((rec.model.clone(), rec.modality)).or_default().push(rep);
    }
    groups
        .into_iter()
        .map(|((model, modality), reps)| {
            let n = reps.len() as f64;
            let mean = |f: fn(&AuxReport) -> u32| reps.iter().map(|r| f(r) as f64).sum::<f64>() / n;
            let correct: u32 = reps.iter().map(|r| r.correct).sum();
            let truth: u32 = reps.iter().map(|r| r.true_count).sum();
            let mut format_breakdown = BTreeMap::new();
            for r in &reps {
                for (&tag, &c) in &r.format_breakdown {
                    *format_breakdown.entry(tag).or_insert(0) += c;
                }
            }
            AuxSummary {
                model,
                modality,
                replies: reps.len(),
                accuracy: if truth == 0 { f64::NAN } else { 100.0 * correct as f64 / truth as f64 },
                correct: mean(|r| r.correct),
                missed: mean(|r| r.missed),
                hallucinated: mean(|r| r.hallucinated),
                coord_errors: mean(|r| r.coord_errors),
                color_errors: mean(|r| r.color_errors),
                shape_errors: mean(|r| r.shape_errors),
                format_errors: mean(|r| r.format_errors),
                format_breakdown,
                repairable_inversions: reps.iter().map(|r| r.repairable_inversions).sum(),
            }
        })
        .collect()
}

const TABLE_HEADER: &str = "model,metric,avg,vision3d,vision2d,text\n";
const TABLE_MODALITIES: [Modality; 3] = [Modality::Vision3d, Modality::Vision2d, Modality::Text];

fn fmt2(x: f64) -> String {
    if x.is_nan() {
        "--".to_string()
    } else {
        format!("{x:.2}")
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Writes one `model,metric,avg,3d,2d,text` row; `avg` is the mean over modalities with a value.
fn pivot_row(out: &mut String, model: &str, metric: &str, by_modality: &BTreeMap<Modality, f64>) {
    let present: Vec<f64> = TABLE_MODALITIES.iter().filter_map(|m| by_modality.get(m)).copied().filter(|x| !x.is_nan()).collect();
    let avg = if present.is_empty() { f64::NAN } else { present.iter().sum::<f64>() / present.len() as f64 };
    let cells: Vec<String> = TABLE_MODALITIES.iter().map(|m| fmt2(by_modality.get(m).copied().unwrap_or(f64::NAN))).collect();
    let _ = writeln!(out, "{},{metric},{},{}", csv_field(model), fmt2(avg), cells.join(","));
}

fn by_model(summary: &Summary) -> BTreeMap<String, BTreeMap<Modality, &GroupSummary>> {
    let mut map: BTreeMap<String, BTreeMap<Modality, &GroupSummary>> = BTreeMap::new();
    for g in &summary.groups {
        if let (Some(model), Some(modality), None) = (&g.key.model, g.key.modality, &g.key.cell) {
            map.entry(model.clone()).or_default().insert(modality, g);
        }
    }
    map
}

/// Completion rate, the three deviation candidates and board-state accuracy per model.
/// `summary` must be grouped by model and modality.
pub fn metrics_table_csv(summary: &Summary, aux: &[AuxSummary]) -> String {
    let mut out = TABLE_HEADER.to_string();
    let mut models: BTreeSet<String> = by_model(summary).into_keys().collect();
    models.extend(aux.iter().map(|a| a.model.clone()));
    let play = by_model(summary);
    for model in models {
        let empty = BTreeMap::new();
        let groups = play.get(&model).unwrap_or(&empty);
        let row = |f: &dyn Fn(&GroupSummary) -> f64| groups.iter().map(|(&m, g)| (m, f(g))).collect::<BTreeMap<_, _>>();
        pivot_row(&mut out, &model, "completed_episodes", &row(&|g| g.success_rate));
        pivot_row(&mut out, &model, "step_regret_mean", &row(&|g| g.step_regret.mean));
        pivot_row(&mut out, &model, "episode_regret_mean", &row(&|g| g.episode_regret.mean));
        pivot_row(&mut out, &model, "final_remaining_mean", &row(&|g| g.final_remaining.mean));
        let acc: BTreeMap<Modality, f64> = aux.iter().filter(|a| a.model == model).map(|a| (a.modality, a.accuracy)).collect();
        pivot_row(&mut out, &model, "board_state_inference", &acc);
    }
    out
}

/// Mean EM/IM/OD/OB/IC counts per episode per model.
pub fn action_table_csv(summary: &Summary) -> String {
    let mut out = TABLE_HEADER.to_string();
    for (model, groups) in by_model(summary) {
        for (i, class) in ActionClass::ALL.iter().enumerate() {
            let row = groups.iter().map(|(&m, g)| (m, g.actions_per_episode[i])).collect();
            pivot_row(&mut out, &model, class.code(), &row);
        }
    }
    out
}

/// Mean auxiliary error counts per reply per model.
pub fn aux_table_csv(aux: &[AuxSummary]) -> String {
    let mut out = TABLE_HEADER.to_string();
    let models: BTreeSet<&str> = aux.iter().map(|a| a.model.as_str()).collect();
    let metrics: [(&str, fn(&AuxSummary) -> f64); 7] = [
        ("correct", |a| a.correct),
        ("missed", |a| a.missed),
        ("hallucinated", |a| a.hallucinated),
        ("coord_errors", |a| a.coord_errors),
        ("color_errors", |a| a.color_errors),
        ("shape_errors", |a| a.shape_errors),
        ("format_errors", |a| a.format_errors),
    ];
    for model in models {
        for (name, f) in metrics {
            let row = aux.iter().filter(|a| a.model == model).map(|a| (a.modality, f(a))).collect();
            pivot_row(&mut out, model, name, &row);
        }
    }
    out
}

/// Every group with its intervals, one row per group.
pub fn summary_csv(summary: &Summary) -> String {
    let mut out = String::from(
        "model,modality,geoms,length,interference,episodes,solved,success_rate,success_lo,success_hi,\
         step_regret_mean,step_regret_lo,step_regret_hi,episode_regret_mean,episode_regret_lo,episode_regret_hi,\
         final_remaining_mean,final_remaining_lo,final_remaining_hi,em,im,od,ob,ic\n",
    );
    for g in &summary.groups {
        let opt = |s: Option<String>| s.unwrap_or_else(|| "*".into());
        let cell = g.key.cell;
        let mut fields = vec![
            csv_field(&opt(g.key.model.clone())),
            opt(g.key.modality.map(|m| m.to_string())),
            opt(cell.map(|c| c.geoms.to_string())),
            opt(cell.map(|c| c.length.to_string())),
            opt(cell.map(|c| c.interference.to_string())),
            g.episodes.to_string(),
            g.solved.to_string(),
        ];
        for x in [g.success_rate, g.success_lo, g.success_hi] {
            fields.push(fmt2(x));
        }
        for ci in [g.step_regret, g.episode_regret, g.final_remaining] {
            fields.extend([fmt2(ci.mean), fmt2(ci.lo), fmt2(ci.hi)]);
        }
        fields.extend(g.actions_per_episode.iter().map(|&x| fmt2(x)));
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

/// Long-format geoms x length matrix for heatmaps. `summary` must be grouped by cell.
pub fn complexity_matrix_csv(summary: &Summary) -> String {
    let mut out = String::from("model,modality,geoms,length,episodes,success_rate,mean_final_remaining,mean_step_regret\n");
    for g in &summary.groups {
        let Some(cell) = g.key.cell else { continue };
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            csv_field(g.key.model.as_deref().unwrap_or("*")),
            g.key.modality.map_or("*".to_string(), |m| m.to_string()),
            cell.geoms,
            cell.length,
            g.episodes,
            fmt2(g.success_rate),
            fmt2(g.final_remaining.mean),
            fmt2(g.step_regret.mean),
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{run_episode, EngineConfig, OptimalAgent, ScriptedAgent, SessionStatus};
    use crate::generator::{generate_episode, ComplexitySpec, Episode};
    use crate::puzzle::BoardSpec;
    use crate::search::DistanceCache;
    use std::sync::Arc;

    fn episode(geoms: usize, length: u32, seed: u64) -> Arc<Episode> {
        let spec = ComplexitySpec::new(BoardSpec::new(4, 4).unwrap(), geoms, length, 0);
        Arc::new(generate_episode(&spec, seed).unwrap())
    }

    fn optimal_log(ep: &Arc<Episode>) -> EpisodeLog {
        run_episode(ep.clone(), &mut OptimalAgent::new(ep), &EngineConfig::default(), Arc::default()).unwrap()
    }

    #[test]
    fn optimal_regret_is_zero() {
        for seed in 0..10 {
            let ep = episode(5, 2 + seed as u32, seed);
            let r = regret_series(&optimal_log(&ep)).unwrap();
            assert!(r.per_step.iter().all(|&x| x == 0));
            assert_eq!(r.final_remaining, 0);
        }
    }

    #[test]
    fn one_ineffective_move_from_four() {
        let ep = episode(3, 4, 21);
        let detour = ep
            .start
            .legal_moves()
            .into_iter()
            .find(|m| DistanceCache::global().distance(&ep.start.try_move(m).unwrap(), &ep.goal).unwrap() == 5)
            .unwrap();
        let replies = vec![format!("action: {detour}")];
        let log = run_episode(ep, &mut ScriptedAgent::new("s", replies), &EngineConfig::default(), Arc::default()).unwrap();
        let r = regret_series(&log).unwrap();
        assert_eq!(r.per_step[0], 2);
    }

    #[test]
    fn unsolved_at_the_cap_keeps_full_distance() {
        let ep = episode(6, 10, 22);
        let log = run_episode(ep, &mut ScriptedAgent::new("idle", vec!["pass".into(); 20]), &EngineConfig::default(), Arc::default())
            .unwrap();
        let r = regret_series(&log).unwrap();
        assert_eq!(r.per_step.len(), 20);
        assert_eq!(r.final_remaining, 10);
        assert_eq!(r.per_step[19], 10);
        assert_eq!(r.per_step[0], 1);
    }

    #[test]
    fn corrupt_distance_chain_is_an_error() {
        let ep = episode(4, 5, 23);
        let mut log = optimal_log(&ep);
        log.steps[1].d_before += 3;
        assert!(matches!(regret_series(&log), Err(EvalError::CorruptLog { step: 2, .. })));
        let mut log = optimal_log(&ep);
        log.steps[0].action_class = ActionClass::Ineffective;
        assert!(regret_series(&log).is_err());
    }

    #[test]
    fn action_stats_sum_to_steps() {
        let ep = episode(4, 5, 24);
        let replies = ["nope", "action: move red cube up", "action: move red cube left", "x"].map(String::from).to_vec();
        let log = run_episode(ep, &mut ScriptedAgent::new("s", replies), &EngineConfig::default(), Arc::default()).unwrap();
        assert_eq!(ActionStats::from_log(&log).total() as usize, log.steps.len());
    }

    fn synthetic_logs(solved: usize, total: usize) -> Vec<EpisodeLog> {
        let ep = episode(3, 3, 25);
        let good = optimal_log(&ep);
        let bad = run_episode(ep, &mut ScriptedAgent::new("m", vec!["?".into(); 20]), &EngineConfig::default(), Arc::default()).unwrap();
        (0..total)
            .map(|i| {
                let mut l = if i < solved { good.clone() } else { bad.clone() };
                l.header.agent = "m".into();
                l
            })
            .collect()
    }

    #[test]
    fn success_rate_is_exact_ratio() {
        let s = aggregate(&synthetic_logs(269, 300), Grouping::MODEL_MODALITY).unwrap();
        assert_eq!(s.groups.len(), 1);
        let g = &s.groups[0];
        assert_eq!((g.solved, g.episodes), (269, 300));
        assert_eq!(format!("{:.2}", g.success_rate), "89.67");
        assert!(g.success_lo < g.success_rate && g.success_rate < g.success_hi);
    }

    #[test]
    fn all_optimal_means_full_success_and_no_deviation() {
        let logs: Vec<_> = (0..6).map(|s| optimal_log(&episode(3 + s, 4, s as u64))).collect();
        let s = aggregate(&logs, Grouping::default()).unwrap();
        let g = &s.groups[0];
        assert_eq!(g.success_rate, 100.0);
        assert_eq!((g.step_regret.mean, g.episode_regret.mean, g.final_remaining.mean), (0.0, 0.0, 0.0));
    }

    #[test]
    fn unscored_and_mixed_inputs() {
        let ep = episode(3, 3, 26);
        let cut = run_episode(ep.clone(), &mut ScriptedAgent::new("m", vec!["?".into(); 2]), &EngineConfig::default(), Arc::default())
            .unwrap();
        assert_eq!(cut.status(), SessionStatus::TransportError);
        let s = aggregate(&[cut.clone(), optimal_log(&ep)], Grouping::MODEL_MODALITY).unwrap();
        assert_eq!(s.unscored, 1);
        assert_eq!(s.groups.len(), 1);

        let mut a = optimal_log(&ep);
        let mut b = a.clone();
        a.header.dataset_digest = Some("aa".into());
        b.header.dataset_digest = Some("bb".into());
        assert!(matches!(aggregate(&[a, b], Grouping::default()), Err(EvalError::MixedDatasets(_))));
    }

    #[test]
    fn table_layouts() {
        let mut logs = synthetic_logs(2, 3);
        let mut vision = logs.clone();
        for l in vision.iter_mut() {
            l.header.modality = Modality::Vision2d;
        }
        logs.append(&mut vision);
        let s = aggregate(&logs, Grouping::MODEL_MODALITY).unwrap();
        let metrics = metrics_table_csv(&s, &[]);
        let lines: Vec<&str> = metrics.lines().collect();
        assert_eq!(lines[0], "model,metric,avg,vision3d,vision2d,text");
        assert_eq!(lines[1], "m,completed_episodes,66.67,--,66.67,66.67");
        assert!(lines.iter().any(|l| l.starts_with("m,board_state_inference,--")));
        let actions = action_table_csv(&s);
        assert_eq!(actions.lines().nth(1).unwrap().split(',').nth(1), Some("EM"));
        assert_eq!(actions.lines().count(), 6);

        let cells = aggregate(&logs, Grouping::FULL).unwrap();
        let matrix = complexity_matrix_csv(&cells);
        assert!(matrix.lines().nth(1).unwrap().starts_with("m,text,3,3,3,66.67"));
        assert_eq!(summary_csv(&s).lines().count(), 3);
    }

    #[test]
    fn wald_interval_values() {
        let (p, lo, hi) = success_rate_ci(50, 100);
        assert_eq!(p, 50.0);
        assert!((hi - 59.80).abs() < 0.01 && (lo - 40.20).abs() < 0.01);
        let (p, lo, hi) = success_rate_ci(10, 10);
        assert_eq!((p, lo, hi), (100.0, 100.0, 100.0));
    }
}
