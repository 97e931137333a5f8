//! Shortest paths between configurations.
//!
//! [`astar`] is the production solver; [`bfs_oracle`] is an independent
//! exhaustive check for small state spaces.

use std::cmp::Reverse;
use std::collections::hash_map::Entry;
use std::collections::{BinaryHeap, HashMap};
use std::num::NonZeroUsize;
use std::sync::{Mutex, OnceLock};

use rand::Rng;
use thiserror::Error;

use crate::puzzle::{Configuration, Direction, DistanceOracle, MoveCommand, PuzzleError};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SearchError {
    #[error(transparent)]
    Puzzle(#[from] PuzzleError),
    #[error("goal configuration is unreachable from the start configuration")]
    NoPath,
    #[error("state space too large for the exhaustive oracle ({cells} cells, {geoms} geoms; limit {max_cells} cells, {max_geoms} geoms)")]
    GuardExceeded { cells: usize, geoms: usize, max_cells: usize, max_geoms: usize },
    #[error("no legal move changes the configuration")]
    NoLegalMove,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SearchResult {
    pub length: u32,
    pub actions: Vec<MoveCommand>,
    /// Nodes popped from the open set.
    pub expanded: usize,
}

/// Sum over geoms of the Manhattan distance to their goal cells.
pub fn sum_manhattan(start: &Configuration, goal: &Configuration) -> Result<u32, PuzzleError> {
    start.check_compatible(goal)?;
    Ok(start
        .entries()
        .iter()
        .zip(goal.entries())
        .map(|(&(_, a), &(_, b))| a.manhattan(b))
        .sum())
}

struct Node {
    key: Box<[u8]>,
    g: u32,
    parent: u32,
    via: (u8, Direction),
    closed: bool,
}

/// Min-f, then max-g, then smallest key.
type OpenEntry = (Reverse<u32>, u32, Reverse<Box<[u8]>>, u32);

/// A* over single-geom moves with the sum-of-Manhattan heuristic.
///
/// Ties on f are broken towards deeper nodes and then the lexicographically
/// smallest cell encoding, so results are reproducible.
pub fn astar(start: &Configuration, goal: &Configuration) -> Result<SearchResult, SearchError> {
    start.check_compatible(goal)?;
    let board = start.board();
    let cells = board.cell_count();
    let cols = board.cols as usize;
    let n = start.len();

    // dist_to_goal[i * cells + cell]
    let goal_key = goal.encode();
    let mut dist_to_goal = vec![0u32; n * cells];
    for (i, &gc) in goal_key.iter().enumerate() {
        let gc = board.coord(gc as usize);
        for cell in 0..cells {
            dist_to_goal[i * cells + cell] = board.coord(cell).manhattan(gc);
        }
    }
    let h = |key: &[u8]| -> u32 {
        key.iter().enumerate().map(|(i, &c)| dist_to_goal[i * cells + c as usize]).sum()
    };

    let start_key: Box<[u8]> = start.encode().into();
    let goal_key: Box<[u8]> = goal_key.into();
    let mut nodes = vec![Node { key: start_key.clone(), g: 0, parent: u32::MAX, via: (0, Direction::Up), closed: false }];
    let mut index: HashMap<Box<[u8]>, u32> = HashMap::new();
    index.insert(start_key.clone(), 0);
    let mut open: BinaryHeap<OpenEntry> = BinaryHeap::new();
    open.push((Reverse(h(&start_key)), 0, Reverse(start_key), 0));

    let mut occ = vec![false; cells];
    let mut expanded = 0usize;
    while let Some((_, g, _, idx)) = open.pop() {
        let node = &mut nodes[idx as usize];
        if node.closed || g > node.g {
            continue;
        }
        node.closed = true;
        expanded += 1;
        if node.key == goal_key {
            return Ok(reconstruct(start, &nodes, idx, expanded));
        }
        let key = node.key.clone();
        let h_parent = h(&key);
        occ.iter_mut().for_each(|o| *o = false);
        for &c in key.iter() {
            occ[c as usize] = true;
        }
        for i in 0..n {
            let cell = key[i] as usize;
            let (col, row) = ((cell % cols) as i32, (cell / cols) as i32);
            for dir in Direction::ORDER {
                let (dc, dr) = dir.delta();
                if !board.contains(col + dc, row + dr) {
                    continue;
                }
                let target = ((row + dr) as usize) * cols + (col + dc) as usize;
                if occ[target] {
                    continue;
                }
                let mut child = key.clone();
                child[i] = target as u8;
                let tentative = g + 1;
                let h_child = h(&child);
                debug_assert!(h_parent <= 1 + h_child, "heuristic inconsistent");
                let child_idx = match index.entry(child.clone()) {
                    Entry::Occupied(e) => {
                        let ci = *e.get();
                        let existing = &mut nodes[ci as usize];
                        if existing.closed || tentative >= existing.g {
                            continue;
                        }
                        existing.g = tentative;
                        existing.parent = idx;
                        existing.via = (i as u8, dir);
                        ci
                    }
                    Entry::Vacant(e) => {
                        let ci = nodes.len() as u32;
                        e.insert(ci);
                        nodes.push(Node { key: child.clone(), g: tentative, parent: idx, via: (i as u8, dir), closed: false });
                        ci
                    }
                };
                open.push((Reverse(tentative + h_child), tentative, Reverse(child), child_idx));
            }
        }
    }
    Err(SearchError::NoPath)
}

fn reconstruct(start: &Configuration, nodes: &[Node], mut idx: u32, expanded: usize) -> SearchResult {
    let geoms: Vec<_> = start.geoms().collect();
    let mut actions = Vec::new();
    while nodes[idx as usize].parent != u32::MAX {
        let node = &nodes[idx as usize];
        let g = geoms[node.via.0 as usize];
        actions.push(MoveCommand::new(g.color, g.shape, node.via.1));
        idx = node.parent;
    }
    actions.reverse();
    SearchResult { length: actions.len() as u32, actions, expanded }
}

/// A* length without keeping the action list around.
pub fn astar_length(start: &Configuration, goal: &Configuration) -> Result<u32, SearchError> {
    astar(start, goal).map(|r| r.length)
}

/// Size guard for [`bfs_oracle`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BfsLimits {
    pub max_cells: usize,
    pub max_geoms: usize,
}

impl Default for BfsLimits {
    fn default() -> Self {
        BfsLimits { max_cells: 16, max_geoms: 6 }
    }
}

/// Exact optimal length by breadth-first search over the full state graph.
///
/// States are packed as base-`cells` numbers into a dense visited bitmap,
/// so the guard keeps memory bounded (16 cells and 6 geoms is 2 MiB).
pub fn bfs_oracle(start: &Configuration, goal: &Configuration, limits: BfsLimits) -> Result<u32, SearchError> {
    start.check_compatible(goal)?;
    let board = start.board();
    let cells = board.cell_count();
    let n = start.len();
    if cells > limits.max_cells || n > limits.max_geoms {
        return Err(SearchError::GuardExceeded { cells, geoms: n, max_cells: limits.max_cells, max_geoms: limits.max_geoms });
    }
    let pack = |key: &[u8]| -> u64 { key.iter().rev().fold(0u64, |acc, &c| acc * cells as u64 + c as u64) };
    let unpack = |mut code: u64, out: &mut [u8]| {
        for slot in out.iter_mut() {
            *slot = (code % cells as u64) as u8;
            code /= cells as u64;
        }
    };
    let total = (cells as u64).pow(n as u32) as usize;
    let mut visited = vec![0u64; total.div_ceil(64)];
    let mut mark = |code: u64| -> bool {
        let (w, b) = ((code / 64) as usize, code % 64);
        let fresh = visited[w] & (1 << b) == 0;
        visited[w] |= 1 << b;
        fresh
    };

    let target = pack(&goal.encode());
    let origin = pack(&start.encode());
    if origin == target {
        return Ok(0);
    }
    mark(origin);
    let mut frontier = vec![origin];
    let mut next = Vec::new();
    let mut key = vec![0u8; n];
    let mut occ = vec![false; cells];
    let mut depth = 0u32;
    while !frontier.is_empty() {
        depth += 1;
        for &code in &frontier {
            unpack(code, &mut key);
            occ.iter_mut().for_each(|o| *o = false);
            for &c in &key {
                occ[c as usize] = true;
            }
            for i in 0..n {
                let here = board.coord(key[i] as usize);
                for dir in Direction::ORDER {
                    let Some(to) = here.step(dir, &board) else { continue };
                    let to = board.index(to);
                    if occ[to] {
                        continue;
                    }
                    let saved = key[i];
                    key[i] = to as u8;
                    let child = pack(&key);
                    key[i] = saved;
                    if child == target {
                        return Ok(depth);
                    }
                    if mark(child) {
                        next.push(child);
                    }
                }
            }
        }
        std::mem::swap(&mut frontier, &mut next);
        next.clear();
    }
    Err(SearchError::NoPath)
}

/// Default capacity of the distance memo.
pub const DEFAULT_CACHE_ENTRIES: usize = 1 << 20;

/// Thread-safe bounded LRU memo of A* distances.
pub struct DistanceCache {
    inner: Mutex<lru::LruCache<Vec<u8>, u32>>,
}

impl std::fmt::Debug for DistanceCache {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DistanceCache").field("len", &self.len()).finish()
    }
}

impl DistanceCache {
    pub fn new(capacity: usize) -> Self {
        let cap = NonZeroUsize::new(capacity.max(1)).unwrap();
        DistanceCache { inner: Mutex::new(lru::LruCache::new(cap)) }
    }

    /// Process-wide cache with [`DEFAULT_CACHE_ENTRIES`] slots.
    pub fn global() -> &'static DistanceCache {
        static CACHE: OnceLock<DistanceCache> = OnceLock::new();
        CACHE.get_or_init(|| DistanceCache::new(DEFAULT_CACHE_ENTRIES))
    }

    fn key(from: &Configuration, goal: &Configuration) -> Vec<u8> {
        let board = from.board();
        let mut key = Vec::with_capacity(3 + 3 * from.len());
        key.extend([board.cols, board.rows, from.len() as u8]);
        for g in from.geoms() {
            key.push(g.color as u8);
            key.push(g.shape as u8);
        }
        key.extend(from.encode());
        key.extend(goal.encode());
        key
    }

    pub fn distance(&self, from: &Configuration, goal: &Configuration) -> Result<u32, SearchError> {
        from.check_compatible(goal)?;
        let key = Self::key(from, goal);
        if let Some(&d) = self.inner.lock().unwrap().get(&key) {
            return Ok(d);
        }
        // Solve outside the lock; concurrent misses compute the same value.
        let d = astar_length(from, goal)?;
        self.inner.lock().unwrap().put(key, d);
        Ok(d)
    }

    pub fn len(&self) -> usize {
        self.inner.lock().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl DistanceOracle for DistanceCache {
    fn distance(&self, from: &Configuration, goal: &Configuration) -> Result<u32, SearchError> {
        DistanceCache::distance(self, from, goal)
    }
}

/// Memoized shortest-path length using the global cache.
pub fn distance(cfg: &Configuration, goal: &Configuration) -> Result<u32, SearchError> {
    DistanceCache::global().distance(cfg, goal)
}

/// Uniform choice among the moves that change the configuration.
pub fn random_agent_step<R: Rng + ?Sized>(cfg: &Configuration, rng: &mut R) -> Result<MoveCommand, SearchError> {
    let moves = cfg.legal_moves();
    if moves.is_empty() {
        return Err(SearchError::NoLegalMove);
    }
    Ok(moves[rng.random_range(0..moves.len())])
}
