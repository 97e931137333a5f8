//! Sliding geom puzzle benchmark engine.
//!
//! Modules build on each other bottom-up: [`puzzle`] holds the state
//! machine, [`search`] computes optimal paths, [`generator`] builds episode
//! datasets, [`observation`] renders states, [`engine`] runs the
//! agent loop and [`evaluator`] scores the resulting logs.

pub mod engine;
pub mod evaluator;
pub mod generator;
pub mod observation;
pub mod parallel;
pub mod puzzle;
pub mod search;

pub use puzzle::{
    apply_move, is_goal, ActionClass, BoardSpec, Color, Configuration, Coord, Direction, DistanceOracle, Geom,
    MoveCommand, MoveOutcome, Palette, PuzzleError, Shape,
};
pub use search::{astar, bfs_oracle, distance, random_agent_step, sum_manhattan, BfsLimits, DistanceCache, SearchError, SearchResult};
