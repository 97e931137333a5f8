//! Procedural episode generation with exact complexity targets.
//!
//! A goal placement is sampled uniformly, then a start configuration is
//! reached by a random walk backwards from the goal. For interference 0 the
//! walk only takes moves that push a geom one cell further from its goal
//! cell, so the walk length equals the Manhattan sum and, reversed, is an
//! optimal plan. Every candidate is re-checked with A* before acceptance.

use std::collections::BTreeMap;
use std::fmt;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::observation::parse_text_state;
use crate::parallel::{self, Jobs};
use crate::puzzle::{BoardSpec, Color, Configuration, Coord, Geom, MoveCommand, Shape};
use crate::search::{astar, sum_manhattan, SearchError};

pub const DATASET_FORMAT: &str = "ivispar-dataset/1";
pub const ENGINE_VERSION: &str = env!("CARGO_PKG_VERSION");
pub const DEFAULT_MAX_ATTEMPTS: u32 = 10_000;

/// Golden-ratio stride between per-attempt seeds.
const ATTEMPT_STRIDE: u64 = 0x9E37_79B9_7F4A_7C15;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GenerateError {
    #[error("invalid complexity spec: {0}")]
    InvalidSpec(String),
    #[error("generation exhausted: {constraint}")]
    Infeasible { constraint: String },
    #[error("generation exhausted after {attempts} attempts; most frequent violation: {constraint}")]
    Exhausted { attempts: u32, constraint: String },
    #[error("cell {cell} ({spec}): {source}")]
    Cell { cell: usize, spec: String, source: Box<GenerateError> },
    #[error(transparent)]
    Search(#[from] SearchError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComplexitySpec {
    pub board: BoardSpec,
    pub num_geoms: usize,
    /// Optimal path length in moves.
    pub target_length: u32,
    /// A* length minus the Manhattan sum.
    pub interference: u32,
    pub colors: Vec<Color>,
    pub shapes: Vec<Shape>,
}

impl ComplexitySpec {
    /// Spec over the default 4 colors × 4 shapes pool.
    pub fn new(board: BoardSpec, num_geoms: usize, target_length: u32, interference: u32) -> Self {
        ComplexitySpec {
            board,
            num_geoms,
            target_length,
            interference,
            colors: Color::DEFAULT_POOL.to_vec(),
            shapes: Shape::DEFAULT_POOL.to_vec(),
        }
    }

    pub fn validate(&self) -> Result<(), GenerateError> {
        self.board.validate().map_err(|e| GenerateError::InvalidSpec(e.to_string()))?;
        if self.num_geoms >= self.board.cell_count() {
            return Err(GenerateError::InvalidSpec(format!(
                "{} geoms leave no free cell on a {} board",
                self.num_geoms, self.board
            )));
        }
        let pool = self.pool().len();
        if self.num_geoms > pool {
            return Err(GenerateError::InvalidSpec(format!(
                "{} geoms requested but the color x shape pool has {pool} distinct pairs",
                self.num_geoms
            )));
        }
        Ok(())
    }

    /// Distinct `(color, shape)` pairs, sorted.
    pub fn pool(&self) -> Vec<Geom> {
        let mut pool: Vec<Geom> = self
            .colors
            .iter()
            .flat_map(|&c| self.shapes.iter().map(move |&s| Geom::new(c, s)))
            .collect();
        pool.sort();
        pool.dedup();
        pool
    }
}

impl fmt::Display for ComplexitySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} board, {} geoms, length {}, interference {}",
            self.board, self.num_geoms, self.target_length, self.interference
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Episode {
    pub id: String,
    pub spec: ComplexitySpec,
    pub start: Configuration,
    pub goal: Configuration,
    pub optimal_length: u32,
    pub optimal_actions: Vec<MoveCommand>,
    pub seed: u64,
}

#[derive(Serialize, Deserialize)]
struct EpisodeRecord {
    id: String,
    spec: ComplexitySpec,
    start: String,
    goal: String,
    optimal_length: u32,
    optimal_actions: Vec<String>,
    seed: u64,
}

impl Serialize for Episode {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        EpisodeRecord {
            id: self.id.clone(),
            spec: self.spec.clone(),
            start: self.start.to_text(),
            goal: self.goal.to_text(),
            optimal_length: self.optimal_length,
            optimal_actions: self.optimal_actions.iter().map(|a| a.to_string()).collect(),
            seed: self.seed,
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Episode {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        use serde::de::Error;
        let r = EpisodeRecord::deserialize(deserializer)?;
        let board = r.spec.board;
        let start = parse_text_state(&r.start, board).map_err(D::Error::custom)?;
        let goal = parse_text_state(&r.goal, board).map_err(D::Error::custom)?;
        if !start.same_geoms(&goal) {
            return Err(D::Error::custom(format!("episode {}: start and goal geoms differ", r.id)));
        }
        let optimal_actions = r
            .optimal_actions
            .iter()
            .map(|a| a.parse::<MoveCommand>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(D::Error::custom)?;
        Ok(Episode {
            id: r.id,
            spec: r.spec,
            start,
            goal,
            optimal_length: r.optimal_length,
            optimal_actions,
            seed: r.seed,
        })
    }
}

impl Episode {
    /// Recomputes optimal length and interference from scratch.
    pub fn revalidate(&self) -> Result<(), String> {
        let result = astar(&self.start, &self.goal).map_err(|e| format!("{}: {e}", self.id))?;
        let manhattan = sum_manhattan(&self.start, &self.goal).map_err(|e| format!("{}: {e}", self.id))?;
        if result.length != self.optimal_length || result.length != self.spec.target_length {
            return Err(format!(
                "{}: A* length {} but stored {} (target {})",
                self.id, result.length, self.optimal_length, self.spec.target_length
            ));
        }
        if result.length - manhattan != self.spec.interference {
            return Err(format!(
                "{}: interference {} but spec says {}",
                self.id,
                result.length - manhattan,
                self.spec.interference
            ));
        }
        let mut cur = self.start.clone();
        for cmd in &self.optimal_actions {
            cur = cur.try_move(cmd).map_err(|c| format!("{}: stored action {cmd} is {c:?}", self.id))?;
        }
        if cur != self.goal || self.optimal_actions.len() as u32 != self.optimal_length {
            return Err(format!("{}: stored actions do not reach the goal optimally", self.id));
        }
        Ok(())
    }

    pub fn num_geoms(&self) -> usize {
        self.start.len()
    }
}

/// SplitMix64 finalizer.
pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Seed for the `k`-th episode of grid cell `cell`:
/// `splitmix64(master + splitmix64(cell << 32 | k))`.
pub fn episode_seed(master_seed: u64, cell: usize, k: usize) -> u64 {
    splitmix64(master_seed.wrapping_add(splitmix64(((cell as u64) << 32) | k as u64)))
}

pub fn generate_episode(spec: &ComplexitySpec, seed: u64) -> Result<Episode, GenerateError> {
    generate_episode_with(spec, seed, DEFAULT_MAX_ATTEMPTS)
}

pub fn generate_episode_with(spec: &ComplexitySpec, seed: u64, max_attempts: u32) -> Result<Episode, GenerateError> {
    spec.validate()?;
    if spec.interference % 2 == 1 {
        // every move changes the Manhattan sum by exactly one, so optimal
        // length and Manhattan sum always share parity
        return Err(GenerateError::Infeasible {
            constraint: format!("interference {} is odd; optimal length and Manhattan sum share parity", spec.interference),
        });
    }
    if spec.interference > spec.target_length {
        return Err(GenerateError::Infeasible {
            constraint: format!("interference {} exceeds target length {}", spec.interference, spec.target_length),
        });
    }
    if spec.interference > 0 && spec.num_geoms < 2 {
        return Err(GenerateError::Infeasible {
            constraint: "a single geom never interferes with itself".into(),
        });
    }

    let pool = spec.pool();
    let mut violations: BTreeMap<&'static str, u32> = BTreeMap::new();
    for attempt in 0..max_attempts {
        let attempt_seed = seed.wrapping_add((attempt as u64).wrapping_mul(ATTEMPT_STRIDE));
        let mut rng = ChaCha8Rng::seed_from_u64(attempt_seed);
        let mut geoms = pool.clone();
        geoms.shuffle(&mut rng);
        geoms.truncate(spec.num_geoms);
        let mut cells: Vec<Coord> = spec.board.cells_reading_order().collect();
        cells.shuffle(&mut rng);
        let goal = Configuration::new(spec.board, geoms.into_iter().zip(cells))
            .expect("sampled placement is injective with a free cell");

        let start = if spec.interference == 0 {
            match outward_walk(&goal, spec.target_length, &mut rng) {
                Some(s) => s,
                None => {
                    *violations.entry("no outward move left; target length exceeds the reachable Manhattan spread").or_default() += 1;
                    continue;
                }
            }
        } else {
            let extra = 2 * rng.random_range(0..=spec.interference + 2);
            random_walk(&goal, spec.target_length + extra, &mut rng)
        };

        let manhattan = sum_manhattan(&start, &goal).expect("same geoms");
        if manhattan + spec.interference != spec.target_length {
            *violations.entry("Manhattan sum does not equal target length minus interference").or_default() += 1;
            continue;
        }
        let result = astar(&start, &goal)?;
        if result.length != spec.target_length {
            *violations.entry("A* optimal length differs from target length").or_default() += 1;
            continue;
        }
        return Ok(Episode {
            id: format!(
                "{}-g{:02}-l{:02}-i{}-s{seed:016x}",
                spec.board, spec.num_geoms, spec.target_length, spec.interference
            ),
            spec: spec.clone(),
            start,
            goal,
            optimal_length: result.length,
            optimal_actions: result.actions,
            seed,
        });
    }
    let constraint = violations
        .iter()
        .max_by_key(|&(_, &n)| n)
        .map(|(c, _)| c.to_string())
        .unwrap_or_else(|| "no attempts were made".into());
    Err(GenerateError::Exhausted { attempts: max_attempts, constraint })
}

/// Walks `steps` moves, each pushing one geom a cell further from its goal cell.
fn outward_walk(goal: &Configuration, steps: u32, rng: &mut ChaCha8Rng) -> Option<Configuration> {
    let mut cur = goal.clone();
    for _ in 0..steps {
        let outward: Vec<MoveCommand> = cur
            .legal_moves()
            .into_iter()
            .filter(|m| {
                let here = cur.position(m.geom()).unwrap();
                let target = goal.position(m.geom()).unwrap();
                let next = here.step(m.direction, &cur.board()).unwrap();
                next.manhattan(target) > here.manhattan(target)
            })
            .collect();
        if outward.is_empty() {
            return None;
        }
        let pick = outward[rng.random_range(0..outward.len())];
        cur = cur.try_move(&pick).ok()?;
    }
    Some(cur)
}

fn random_walk(goal: &Configuration, steps: u32, rng: &mut ChaCha8Rng) -> Configuration {
    let mut cur = goal.clone();
    for _ in 0..steps {
        let moves = cur.legal_moves();
        if moves.is_empty() {
            break;
        }
        cur = cur.try_move(&moves[rng.random_range(0..moves.len())]).expect("legal move");
    }
    cur
}

/// The default experiment grid: 4×4 board, 2–11 geoms × lengths 2–11, interference 0.
pub fn paper_grid() -> Vec<ComplexitySpec> {
    let board = BoardSpec::new(4, 4).unwrap();
    (2..=11)
        .flat_map(|g| (2..=11).map(move |l| ComplexitySpec::new(board, g, l, 0)))
        .collect()
}

pub const PAPER_EPISODES_PER_CELL: usize = 3;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dataset {
    pub format: String,
    pub engine_version: String,
    pub master_seed: u64,
    pub episodes_per_cell: usize,
    pub grid: Vec<ComplexitySpec>,
    pub episodes: Vec<Episode>,
}

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("unsupported dataset format `{found}`, expected `{DATASET_FORMAT}`")]
    Version { found: String },
    #[error("malformed dataset: {0}")]
    Json(#[from] serde_json::Error),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

impl Dataset {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = serde_json::to_vec_pretty(self).expect("dataset serializes");
        out.push(b'\n');
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, DatasetError> {
        let probe: serde_json::Value = serde_json::from_slice(bytes)?;
        let found = probe.get("format").and_then(|f| f.as_str()).unwrap_or("").to_string();
        if found != DATASET_FORMAT {
            return Err(DatasetError::Version { found });
        }
        Ok(serde_json::from_value(probe)?)
    }

    pub fn load(path: &std::path::Path) -> Result<Self, DatasetError> {
        Self::from_bytes(&std::fs::read(path)?)
    }

    /// SHA-256 over the canonical serialized bytes.
    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(self.to_bytes()))
    }

    pub fn episode(&self, id: &str) -> Option<&Episode> {
        self.episodes.iter().find(|e| e.id == id)
    }
}

/// Generates `episodes_per_cell` episodes for every grid cell, in grid order.
pub fn generate_dataset(
    grid: &[ComplexitySpec],
    episodes_per_cell: usize,
    master_seed: u64,
    jobs: Jobs,
) -> Result<Dataset, GenerateError> {
    let tasks: Vec<(usize, usize)> = (0..grid.len())
        .flat_map(|cell| (0..episodes_per_cell).map(move |k| (cell, k)))
        .collect();
    let results = parallel::map(jobs, &tasks, |&(cell, k)| {
        let spec = &grid[cell];
        generate_episode(spec, episode_seed(master_seed, cell, k))
            .map(|mut ep| {
                ep.id = format!(
                    "{}-g{:02}-l{:02}-i{}-{k}",
                    spec.board, spec.num_geoms, spec.target_length, spec.interference
                );
                ep
            })
            .map_err(|e| GenerateError::Cell { cell, spec: spec.to_string(), source: Box::new(e) })
    });
    let episodes = results.into_iter().collect::<Result<Vec<_>, _>>()?;
    Ok(Dataset {
        format: DATASET_FORMAT.to_string(),
        engine_version: ENGINE_VERSION.to_string(),
        master_seed,
        episodes_per_cell,
        grid: grid.to_vec(),
        episodes,
    })
}
