//! Sliding geom puzzle state machine.
//!
//! A board is a `cols × rows` grid. Geoms are identified by their
//! `(color, shape)` pair and a [`Configuration`] places each geom on a
//! distinct cell. Coordinates use chess-style labels: columns `a..` from
//! left to right, rows `1..` from bottom to top.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::search::SearchError;

/// Largest supported column count (one letter per column).
pub const MAX_COLS: u8 = 26;
/// Largest supported cell count; cell indices fit in a `u8`.
pub const MAX_CELLS: usize = 255;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PuzzleError {
    #[error("invalid board {cols}x{rows}: need 2 <= cols <= 26, rows >= 2 and at most 255 cells")]
    InvalidBoard { cols: u8, rows: u8 },
    #[error("coordinate {0} is outside the board")]
    OutOfBounds(String),
    #[error("malformed coordinate label `{0}`")]
    BadLabel(String),
    #[error("two geoms share cell {0}")]
    DuplicateCell(String),
    #[error("geom {0} is placed twice")]
    DuplicateGeom(Geom),
    #[error("configuration fills every cell; at least one free cell is required")]
    NoFreeCell,
    #[error("configurations differ in board or geom set")]
    GeomSetMismatch,
    #[error("unknown color `{0}`")]
    UnknownColor(String),
    #[error("unknown shape `{0}`")]
    UnknownShape(String),
    #[error("unknown direction `{0}`")]
    UnknownDirection(String),
    #[error("malformed move command `{0}`")]
    BadCommand(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BoardSpec {
    pub cols: u8,
    pub rows: u8,
}

impl BoardSpec {
    pub fn new(cols: u8, rows: u8) -> Result<Self, PuzzleError> {
        let board = BoardSpec { cols, rows };
        board.validate()?;
        Ok(board)
    }

    pub fn validate(&self) -> Result<(), PuzzleError> {
        let ok = (2..=MAX_COLS).contains(&self.cols)
            && self.rows >= 2
            && self.cell_count() <= MAX_CELLS;
        if ok {
            Ok(())
        } else {
            Err(PuzzleError::InvalidBoard { cols: self.cols, rows: self.rows })
        }
    }

    pub fn cell_count(&self) -> usize {
        self.cols as usize * self.rows as usize
    }

    pub fn contains(&self, col: i32, row: i32) -> bool {
        col >= 0 && row >= 0 && col < self.cols as i32 && row < self.rows as i32
    }

    /// Row-major index counted from the bottom-left cell.
    pub fn index(&self, c: Coord) -> usize {
        c.row as usize * self.cols as usize + c.col as usize
    }

    pub fn coord(&self, index: usize) -> Coord {
        let cols = self.cols as usize;
        Coord { col: (index % cols) as u8, row: (index / cols) as u8 }
    }

    /// All cells in reading order: top row first, left to right.
    pub fn cells_reading_order(&self) -> impl Iterator<Item = Coord> + '_ {
        (0..self.rows)
            .rev()
            .flat_map(move |row| (0..self.cols).map(move |col| Coord { col, row }))
    }

    pub fn parse_label(&self, label: &str) -> Result<Coord, PuzzleError> {
        let c: Coord = label.parse()?;
        if c.col < self.cols && c.row < self.rows {
            Ok(c)
        } else {
            Err(PuzzleError::OutOfBounds(label.to_string()))
        }
    }
}

impl fmt::Display for BoardSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.cols, self.rows)
    }
}

impl FromStr for BoardSpec {
    type Err = PuzzleError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || PuzzleError::InvalidBoard { cols: 0, rows: 0 };
        let (c, r) = s.trim().split_once(['x', 'X']).ok_or_else(bad)?;
        let cols = c.trim().parse().map_err(|_| bad())?;
        let rows = r.trim().parse().map_err(|_| bad())?;
        BoardSpec::new(cols, rows)
    }
}

macro_rules! named_enum {
    ($(#[$meta:meta])* $name:ident, $err:ident { $($variant:ident => $text:literal),+ $(,)? }) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
        #[serde(rename_all = "lowercase")]
        pub enum $name {
            $($variant),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn as_str(self) -> &'static str {
                match self {
                    $($name::$variant => $text),+
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $name {
            type Err = PuzzleError;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                let lower = s.trim().to_ascii_lowercase();
                $name::ALL
                    .iter()
                    .copied()
                    .find(|v| v.as_str() == lower)
                    .ok_or_else(|| PuzzleError::$err(s.to_string()))
            }
        }

        impl PartialOrd for $name {
            fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
                Some(self.cmp(other))
            }
        }

        // Names, not declaration order, define the ordering.
        impl Ord for $name {
            fn cmp(&self, other: &Self) -> std::cmp::Ordering {
                self.as_str().cmp(other.as_str())
            }
        }
    };
}

named_enum!(
    /// Geom colors. RGB values come from a [`Palette`].
    Color, UnknownColor {
        Red => "red",
        Green => "green",
        Blue => "blue",
        Yellow => "yellow",
        Orange => "orange",
        Purple => "purple",
        Cyan => "cyan",
        Magenta => "magenta",
    }
);

named_enum!(
    Shape, UnknownShape {
        Cube => "cube",
        Pyramid => "pyramid",
        Sphere => "sphere",
        Cylinder => "cylinder",
        Cone => "cone",
        Prism => "prism",
    }
);

named_enum!(
    Direction, UnknownDirection {
        Up => "up",
        Down => "down",
        Left => "left",
        Right => "right",
    }
);

impl Color {
    /// Colors used by the default experiment pool.
    pub const DEFAULT_POOL: &'static [Color] = &[Color::Red, Color::Green, Color::Blue, Color::Yellow];

    pub fn default_rgb(self) -> [u8; 3] {
        match self {
            Color::Red => [255, 0, 0],
            Color::Green => [0, 255, 0],
            Color::Blue => [0, 0, 255],
            Color::Yellow => [255, 255, 0],
            Color::Orange => [255, 165, 0],
            Color::Purple => [128, 0, 128],
            Color::Cyan => [0, 255, 255],
            Color::Magenta => [255, 0, 255],
        }
    }
}

impl Shape {
    /// Shapes used by the default experiment pool.
    pub const DEFAULT_POOL: &'static [Shape] = &[Shape::Sphere, Shape::Pyramid, Shape::Cube, Shape::Cylinder];
}

impl Direction {
    /// Successor order used by search and the random agent.
    pub const ORDER: [Direction; 4] = [Direction::Up, Direction::Down, Direction::Left, Direction::Right];

    /// Unit step in `(col, row)` space; rows grow upwards.
    pub fn delta(self) -> (i32, i32) {
        match self {
            Direction::Up => (0, 1),
            Direction::Down => (0, -1),
            Direction::Left => (-1, 0),
            Direction::Right => (1, 0),
        }
    }

    pub fn inverse(self) -> Direction {
        match self {
            Direction::Up => Direction::Down,
            Direction::Down => Direction::Up,
            Direction::Left => Direction::Right,
            Direction::Right => Direction::Left,
        }
    }
}

/// Color name to RGB mapping. Defaults cover every [`Color`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Palette(pub BTreeMap<Color, [u8; 3]>);

impl Default for Palette {
    fn default() -> Self {
        Palette(Color::ALL.iter().map(|&c| (c, c.default_rgb())).collect())
    }
}

impl Palette {
    pub fn rgb(&self, color: Color) -> Option<[u8; 3]> {
        self.0.get(&color).copied()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Geom {
    pub color: Color,
    pub shape: Shape,
}

impl Geom {
    pub fn new(color: Color, shape: Shape) -> Self {
        Geom { color, shape }
    }
}

impl fmt::Display for Geom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.color, self.shape)
    }
}

/// 0-based cell coordinate, origin bottom-left.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Coord {
    pub col: u8,
    pub row: u8,
}

impl Coord {
    pub fn new(col: u8, row: u8) -> Self {
        Coord { col, row }
    }

    pub fn label(&self) -> String {
        self.to_string()
    }

    pub fn manhattan(&self, other: Coord) -> u32 {
        (self.col as i32 - other.col as i32).unsigned_abs()
            + (self.row as i32 - other.row as i32).unsigned_abs()
    }

    pub fn step(&self, dir: Direction, board: &BoardSpec) -> Option<Coord> {
        let (dc, dr) = dir.delta();
        let (col, row) = (self.col as i32 + dc, self.row as i32 + dr);
        board.contains(col, row).then(|| Coord::new(col as u8, row as u8))
    }
}

impl fmt::Display for Coord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", (b'a' + self.col) as char, self.row as u32 + 1)
    }
}

impl FromStr for Coord {
    type Err = PuzzleError;

    /// Parses a label such as `b3`. Bounds are checked by [`BoardSpec::parse_label`].
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || PuzzleError::BadLabel(s.to_string());
        let lower = s.trim().to_ascii_lowercase();
        let mut chars = lower.chars();
        let letter = chars.next().filter(|c| c.is_ascii_lowercase()).ok_or_else(bad)?;
        let digits = chars.as_str();
        if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) || digits.starts_with('0') {
            return Err(bad());
        }
        let row: u32 = digits.parse().map_err(|_| bad())?;
        if row > 255 {
            return Err(bad());
        }
        Ok(Coord::new(letter as u8 - b'a', (row - 1) as u8))
    }
}

/// Injective placement of geoms on a board, kept sorted by geom.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Configuration {
    board: BoardSpec,
    entries: Vec<(Geom, Coord)>,
}

impl Configuration {
    pub fn new(board: BoardSpec, placement: impl IntoIterator<Item = (Geom, Coord)>) -> Result<Self, PuzzleError> {
        board.validate()?;
        let mut entries: Vec<(Geom, Coord)> = placement.into_iter().collect();
        entries.sort_by_key(|&(g, _)| g);
        for pair in entries.windows(2) {
            if pair[0].0 == pair[1].0 {
                return Err(PuzzleError::DuplicateGeom(pair[0].0));
            }
        }
        let mut seen = vec![false; board.cell_count()];
        for &(_, c) in &entries {
            if c.col >= board.cols || c.row >= board.rows {
                return Err(PuzzleError::OutOfBounds(c.label()));
            }
            let idx = board.index(c);
            if std::mem::replace(&mut seen[idx], true) {
                return Err(PuzzleError::DuplicateCell(c.label()));
            }
        }
        if entries.len() >= board.cell_count() {
            return Err(PuzzleError::NoFreeCell);
        }
        Ok(Configuration { board, entries })
    }

    pub fn empty(board: BoardSpec) -> Self {
        Configuration { board, entries: Vec::new() }
    }

    pub fn board(&self) -> BoardSpec {
        self.board
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// `(geom, coord)` pairs sorted by geom.
    pub fn entries(&self) -> &[(Geom, Coord)] {
        &self.entries
    }

    pub fn geoms(&self) -> impl Iterator<Item = Geom> + '_ {
        self.entries.iter().map(|&(g, _)| g)
    }

    pub fn position(&self, geom: Geom) -> Option<Coord> {
        self.entries
            .binary_search_by_key(&geom, |&(g, _)| g)
            .ok()
            .map(|i| self.entries[i].1)
    }

    pub fn occupant(&self, cell: Coord) -> Option<Geom> {
        self.entries.iter().find(|&&(_, c)| c == cell).map(|&(g, _)| g)
    }

    pub fn occupancy(&self) -> Vec<bool> {
        let mut occ = vec![false; self.board.cell_count()];
        for &(_, c) in &self.entries {
            occ[self.board.index(c)] = true;
        }
        occ
    }

    /// Free cells in reading order.
    pub fn free_cells(&self) -> Vec<Coord> {
        let occ = self.occupancy();
        self.board
            .cells_reading_order()
            .filter(|&c| !occ[self.board.index(c)])
            .collect()
    }

    pub fn same_geoms(&self, other: &Configuration) -> bool {
        self.board == other.board
            && self.entries.len() == other.entries.len()
            && self.geoms().eq(other.geoms())
    }

    pub fn check_compatible(&self, other: &Configuration) -> Result<(), PuzzleError> {
        if self.same_geoms(other) {
            Ok(())
        } else {
            Err(PuzzleError::GeomSetMismatch)
        }
    }

    /// Cell indices in geom order. Used as a compact canonical key.
    pub fn encode(&self) -> Vec<u8> {
        self.entries.iter().map(|&(_, c)| self.board.index(c) as u8).collect()
    }

    /// Rebuilds a configuration with the same geoms from an [`encode`](Self::encode) key.
    pub fn with_encoding(&self, key: &[u8]) -> Configuration {
        debug_assert_eq!(key.len(), self.entries.len());
        let entries = self
            .entries
            .iter()
            .zip(key)
            .map(|(&(g, _), &idx)| (g, self.board.coord(idx as usize)))
            .collect();
        Configuration { board: self.board, entries }
    }

    /// Moves one geom without classification.
    pub fn try_move(&self, cmd: &MoveCommand) -> Result<Configuration, ActionClass> {
        let geom = cmd.geom();
        let i = self
            .entries
            .binary_search_by_key(&geom, |&(g, _)| g)
            .map_err(|_| ActionClass::IllegalCommand)?;
        let target = self.entries[i]
            .1
            .step(cmd.direction, &self.board)
            .ok_or(ActionClass::OutOfBounds)?;
        if self.entries.iter().any(|&(_, c)| c == target) {
            return Err(ActionClass::OccupiedDestination);
        }
        let mut next = self.clone();
        next.entries[i].1 = target;
        Ok(next)
    }

    /// Every `(geom, direction)` pair that changes the state, in successor order.
    pub fn legal_moves(&self) -> Vec<MoveCommand> {
        let occ = self.occupancy();
        let mut moves = Vec::new();
        for &(g, c) in &self.entries {
            for dir in Direction::ORDER {
                if let Some(t) = c.step(dir, &self.board) {
                    if !occ[self.board.index(t)] {
                        moves.push(MoveCommand::new(g.color, g.shape, dir));
                    }
                }
            }
        }
        moves
    }

    /// Canonical text form: `label color shape` entries in reading order, `, ` separated.
    pub fn to_text(&self) -> String {
        let mut by_cell: Vec<(Coord, Geom)> = self.entries.iter().map(|&(g, c)| (c, g)).collect();
        // top row first, then left to right
        by_cell.sort_by_key(|&(c, _)| (std::cmp::Reverse(c.row), c.col));
        by_cell
            .iter()
            .map(|(c, g)| format!("{c} {g}"))
            .collect::<Vec<_>>()
            .join(", ")
    }
}

impl fmt::Display for Configuration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MoveCommand {
    pub color: Color,
    pub shape: Shape,
    pub direction: Direction,
}

impl MoveCommand {
    pub fn new(color: Color, shape: Shape, direction: Direction) -> Self {
        MoveCommand { color, shape, direction }
    }

    pub fn geom(&self) -> Geom {
        Geom::new(self.color, self.shape)
    }

    pub fn inverse(&self) -> MoveCommand {
        MoveCommand { direction: self.direction.inverse(), ..*self }
    }
}

impl fmt::Display for MoveCommand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "move {} {} {}", self.color, self.shape, self.direction)
    }
}

impl FromStr for MoveCommand {
    type Err = PuzzleError;

    /// Strict `move <color> <shape> <direction>` grammar.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let words: Vec<&str> = s.split_whitespace().collect();
        match words.as_slice() {
            [verb, color, shape, dir] if verb.eq_ignore_ascii_case("move") => Ok(MoveCommand::new(
                color.parse()?,
                shape.parse()?,
                dir.parse()?,
            )),
            _ => Err(PuzzleError::BadCommand(s.to_string())),
        }
    }
}

/// Outcome class of one attempted action.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionClass {
    Effective,
    Ineffective,
    OccupiedDestination,
    OutOfBounds,
    IllegalCommand,
}

impl ActionClass {
    pub const ALL: [ActionClass; 5] = [
        ActionClass::Effective,
        ActionClass::Ineffective,
        ActionClass::OccupiedDestination,
        ActionClass::OutOfBounds,
        ActionClass::IllegalCommand,
    ];

    pub fn changes_state(self) -> bool {
        matches!(self, ActionClass::Effective | ActionClass::Ineffective)
    }

    /// Short table code (EM, IM, OD, OB, IC).
    pub fn code(self) -> &'static str {
        match self {
            ActionClass::Effective => "EM",
            ActionClass::Ineffective => "IM",
            ActionClass::OccupiedDestination => "OD",
            ActionClass::OutOfBounds => "OB",
            ActionClass::IllegalCommand => "IC",
        }
    }
}

/// Shortest-path length between two configurations with the same geoms.
pub trait DistanceOracle {
    fn distance(&self, from: &Configuration, goal: &Configuration) -> Result<u32, SearchError>;
}

impl<F> DistanceOracle for F
where
    F: Fn(&Configuration, &Configuration) -> Result<u32, SearchError>,
{
    fn distance(&self, from: &Configuration, goal: &Configuration) -> Result<u32, SearchError> {
        self(from, goal)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MoveOutcome {
    pub config: Configuration,
    pub class: ActionClass,
    pub d_before: u32,
    pub d_after: u32,
}

/// Validates and applies `cmd`, classifying it against the remaining distance to `goal`.
///
/// Rejected actions return the input configuration unchanged. A legal move is
/// `Effective` when the distance drops by one and `Ineffective` otherwise.
pub fn apply_move<O: DistanceOracle + ?Sized>(
    cfg: &Configuration,
    cmd: &MoveCommand,
    goal: &Configuration,
    oracle: &O,
) -> Result<MoveOutcome, SearchError> {
    cfg.check_compatible(goal)?;
    let d_before = oracle.distance(cfg, goal)?;
    match cfg.try_move(cmd) {
        Ok(next) => {
            let d_after = oracle.distance(&next, goal)?;
            let class = if d_after + 1 == d_before {
                ActionClass::Effective
            } else {
                ActionClass::Ineffective
            };
            Ok(MoveOutcome { config: next, class, d_before, d_after })
        }
        Err(class) => Ok(MoveOutcome { config: cfg.clone(), class, d_before, d_after: d_before }),
    }
}

pub fn is_goal(cfg: &Configuration, goal: &Configuration) -> Result<bool, PuzzleError> {
    cfg.check_compatible(goal)?;
    Ok(cfg.entries == goal.entries)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::search::{astar_length, bfs_oracle, BfsLimits};

    fn board4() -> BoardSpec {
        BoardSpec::new(4, 4).unwrap()
    }

    fn cfg(board: BoardSpec, items: &[(&str, &str, &str)]) -> Configuration {
        Configuration::new(
            board,
            items.iter().map(|(l, c, s)| {
                (Geom::new(c.parse().unwrap(), s.parse().unwrap()), board.parse_label(l).unwrap())
            }),
        )
        .unwrap()
    }

    fn astar_oracle(a: &Configuration, b: &Configuration) -> Result<u32, SearchError> {
        astar_length(a, b)
    }

    #[test]
    fn labels_round_trip_and_orientation() {
        let b = board4();
        assert_eq!(Coord::new(0, 0).label(), "a1");
        assert_eq!(Coord::new(3, 3).label(), "d4");
        assert_eq!(b.parse_label("c2").unwrap(), Coord::new(2, 1));
        assert!(matches!(b.parse_label("f4"), Err(PuzzleError::OutOfBounds(_))));
        assert!(matches!(b.parse_label("a5"), Err(PuzzleError::OutOfBounds(_))));
        assert!("a0".parse::<Coord>().is_err());
        assert!("4a".parse::<Coord>().is_err());
        for c in b.cells_reading_order() {
            assert_eq!(b.parse_label(&c.label()).unwrap(), c);
        }
    }

    #[test]
    fn board_limits() {
        assert!(BoardSpec::new(1, 4).is_err());
        assert!(BoardSpec::new(4, 1).is_err());
        assert!(BoardSpec::new(27, 2).is_err());
        assert_eq!("4x3".parse::<BoardSpec>().unwrap(), BoardSpec { cols: 4, rows: 3 });
        assert_eq!(board4().cell_count(), 16);
    }

    #[test]
    fn configuration_invariants_rejected() {
        let b = board4();
        let g = Geom::new(Color::Red, Shape::Cube);
        let h = Geom::new(Color::Blue, Shape::Cube);
        assert_eq!(
            Configuration::new(b, [(g, Coord::new(0, 0)), (h, Coord::new(0, 0))]),
            Err(PuzzleError::DuplicateCell("a1".into()))
        );
        assert_eq!(
            Configuration::new(b, [(g, Coord::new(0, 0)), (g, Coord::new(1, 0))]),
            Err(PuzzleError::DuplicateGeom(g))
        );
        assert!(matches!(Configuration::new(b, [(g, Coord::new(4, 0))]), Err(PuzzleError::OutOfBounds(_))));
        let small = BoardSpec::new(2, 2).unwrap();
        let full: Vec<_> = [Color::Red, Color::Green, Color::Blue, Color::Yellow]
            .iter()
            .zip(small.cells_reading_order())
            .map(|(&c, cell)| (Geom::new(c, Shape::Cube), cell))
            .collect();
        assert_eq!(Configuration::new(small, full), Err(PuzzleError::NoFreeCell));
    }

    #[test]
    fn single_legal_step() {
        let b = board4();
        let start = cfg(b, &[("b2", "blue", "sphere")]);
        let goal = cfg(b, &[("c2", "blue", "sphere")]);
        let cmd: MoveCommand = "move blue sphere right".parse().unwrap();
        let out = apply_move(&start, &cmd, &goal, &astar_oracle).unwrap();
        assert_eq!(out.config.position(cmd.geom()), Some(b.parse_label("c2").unwrap()));
        assert_eq!(out.class, ActionClass::Effective);
        assert!(is_goal(&out.config, &goal).unwrap());
    }

    #[test]
    fn boundary_move_is_out_of_bounds() {
        let b = board4();
        let start = cfg(b, &[("a1", "red", "cube")]);
        let goal = cfg(b, &[("b1", "red", "cube")]);
        let cmd: MoveCommand = "move red cube left".parse().unwrap();
        let out = apply_move(&start, &cmd, &goal, &astar_oracle).unwrap();
        assert_eq!(out.class, ActionClass::OutOfBounds);
        assert_eq!(out.config, start);
    }

    #[test]
    fn occupied_destination_and_absent_geom() {
        let b = board4();
        let start = cfg(b, &[("a1", "red", "cube"), ("b1", "green", "sphere")]);
        let goal = cfg(b, &[("a2", "red", "cube"), ("b1", "green", "sphere")]);
        let onto = MoveCommand::new(Color::Red, Shape::Cube, Direction::Right);
        let out = apply_move(&start, &onto, &goal, &astar_oracle).unwrap();
        assert_eq!(out.class, ActionClass::OccupiedDestination);
        assert_eq!(out.config, start);

        let absent = MoveCommand::new(Color::Yellow, Shape::Cone, Direction::Up);
        let out = apply_move(&start, &absent, &goal, &astar_oracle).unwrap();
        assert_eq!(out.class, ActionClass::IllegalCommand);
        assert_eq!(out.config, start);
    }

    #[test]
    fn mismatched_geom_sets_are_a_contract_error() {
        let b = board4();
        let start = cfg(b, &[("a1", "red", "cube")]);
        let goal = cfg(b, &[("a1", "blue", "cube")]);
        let cmd = MoveCommand::new(Color::Red, Shape::Cube, Direction::Up);
        assert!(matches!(
            apply_move(&start, &cmd, &goal, &astar_oracle),
            Err(SearchError::Puzzle(PuzzleError::GeomSetMismatch))
        ));
        assert!(is_goal(&start, &goal).is_err());
    }

    #[test]
    fn lateral_move_is_ineffective() {
        // red cube must go a1 -> a3; moving it right leaves d at 3, then back.
        let b = board4();
        let start = cfg(b, &[("a1", "red", "cube")]);
        let goal = cfg(b, &[("a3", "red", "cube")]);
        let cmd = MoveCommand::new(Color::Red, Shape::Cube, Direction::Right);
        let out = apply_move(&start, &cmd, &goal, &astar_oracle).unwrap();
        assert_eq!(out.class, ActionClass::Ineffective);
        assert_eq!((out.d_before, out.d_after), (2, 3));
    }

    #[test]
    fn goal_test() {
        let b = board4();
        let a = cfg(b, &[("a1", "red", "cube"), ("d4", "green", "cone")]);
        assert!(is_goal(&a, &a).unwrap());
        let moved = a.try_move(&MoveCommand::new(Color::Red, Shape::Cube, Direction::Up)).unwrap();
        assert!(!is_goal(&moved, &a).unwrap());
    }

    #[test]
    fn free_cell_counts() {
        let b = board4();
        assert_eq!(Configuration::empty(b).free_cells().len(), 16);
        let small = BoardSpec::new(2, 2).unwrap();
        let two = cfg(small, &[("a1", "red", "cube"), ("b2", "blue", "cube")]);
        let free = two.free_cells();
        assert_eq!(free.len(), 2);
        assert!(free.iter().all(|&c| two.occupant(c).is_none()));
        let ten: Vec<_> = Color::DEFAULT_POOL
            .iter()
            .flat_map(|&c| Shape::DEFAULT_POOL.iter().map(move |&s| Geom::new(c, s)))
            .take(10)
            .zip(b.cells_reading_order())
            .collect();
        assert_eq!(Configuration::new(b, ten).unwrap().free_cells().len(), 6);
    }

    #[test]
    fn canonical_text_form() {
        let b = board4();
        let c = cfg(b, &[("d1", "blue", "cylinder"), ("a3", "green", "sphere"), ("c3", "red", "pyramid")]);
        assert_eq!(c.to_text(), "a3 green sphere, c3 red pyramid, d1 blue cylinder");
        assert_eq!(Configuration::empty(b).to_text(), "");
    }

    #[test]
    fn command_grammar() {
        let cmd: MoveCommand = "move green cube down".parse().unwrap();
        assert_eq!(cmd, MoveCommand::new(Color::Green, Shape::Cube, Direction::Down));
        assert_eq!(cmd.to_string(), "move green cube down");
        assert!("move green cube".parse::<MoveCommand>().is_err());
        assert!(matches!("move black cube up".parse::<MoveCommand>(), Err(PuzzleError::UnknownColor(_))));
        assert_eq!(Direction::Up.delta(), (0, 1));
        assert_eq!(Direction::Left.delta(), (-1, 0));
    }

    #[test]
    fn names_order_geoms() {
        let mut geoms = vec![
            Geom::new(Color::Yellow, Shape::Cube),
            Geom::new(Color::Blue, Shape::Sphere),
            Geom::new(Color::Blue, Shape::Cone),
            Geom::new(Color::Green, Shape::Cube),
        ];
        geoms.sort();
        let names: Vec<String> = geoms.iter().map(|g| g.to_string()).collect();
        assert_eq!(names, ["blue cone", "blue sphere", "green cube", "yellow cube"]);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;
        use rand::{seq::SliceRandom, SeedableRng};
        use rand_chacha::ChaCha8Rng;

        fn random_cfg(seed: u64, cols: u8, rows: u8, n: usize) -> Configuration {
            let board = BoardSpec::new(cols, rows).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut pool: Vec<Geom> = Color::ALL
                .iter()
                .flat_map(|&c| Shape::ALL.iter().map(move |&s| Geom::new(c, s)))
                .collect();
            pool.shuffle(&mut rng);
            let mut cells: Vec<Coord> = board.cells_reading_order().collect();
            cells.shuffle(&mut rng);
            let n = n.min(board.cell_count() - 1);
            Configuration::new(board, pool.into_iter().zip(cells).take(n)).unwrap()
        }

        proptest! {
            #[test]
            fn moves_conserve_geoms_and_injectivity(
                seed in any::<u64>(),
                cols in 2u8..6, rows in 2u8..6, n in 0usize..10,
                script in proptest::collection::vec((0usize..64, 0usize..4), 0..40),
            ) {
                let mut c = random_cfg(seed, cols, rows, n);
                let geoms: Vec<Geom> = c.geoms().collect();
                for (gi, di) in script {
                    if geoms.is_empty() { break; }
                    let g = geoms[gi % geoms.len()];
                    let cmd = MoveCommand::new(g.color, g.shape, Direction::ORDER[di]);
                    match c.try_move(&cmd) {
                        Ok(next) => {
                            // reversibility
                            prop_assert_eq!(next.try_move(&cmd.inverse()).unwrap(), c.clone());
                            c = next;
                        }
                        Err(class) => prop_assert!(!class.changes_state()),
                    }
                    prop_assert_eq!(c.geoms().collect::<Vec<_>>(), geoms.clone());
                    let rebuilt = Configuration::new(c.board(), c.entries().iter().copied());
                    prop_assert!(rebuilt.is_ok());
                }
            }

            #[test]
            fn rejected_moves_leave_state_untouched(seed in any::<u64>(), n in 1usize..15, gi in 0usize..16, di in 0usize..4) {
                let c = random_cfg(seed, 4, 4, n);
                let geoms: Vec<Geom> = c.geoms().collect();
                let g = geoms[gi % geoms.len()];
                let cmd = MoveCommand::new(g.color, g.shape, Direction::ORDER[di]);
                let out = apply_move(&c, &cmd, &c, &|_: &Configuration, _: &Configuration| Ok(0)).unwrap();
                if !out.class.changes_state() {
                    prop_assert_eq!(out.config.entries(), c.entries());
                }
            }

            #[test]
            fn classification_matches_bfs(seed in any::<u64>(), n in 1usize..4, gi in 0usize..4, di in 0usize..4) {
                let start = random_cfg(seed, 3, 3, n);
                let goal = random_cfg(seed.wrapping_add(1), 3, 3, n);
                let goal = start.with_encoding(&goal.encode());
                let geoms: Vec<Geom> = start.geoms().collect();
                let g = geoms[gi % geoms.len()];
                let cmd = MoveCommand::new(g.color, g.shape, Direction::ORDER[di]);
                let bfs = |a: &Configuration, b: &Configuration| bfs_oracle(a, b, BfsLimits::default());
                let out = apply_move(&start, &cmd, &goal, &bfs).unwrap();
                if out.class.changes_state() {
                    let diff = out.d_after as i64 - out.d_before as i64;
                    prop_assert!(diff.abs() <= 1);
                    prop_assert_eq!(out.class == ActionClass::Effective, diff == -1);
                }
            }
        }
    }
}
