//! Text and 2D image views of a configuration.

mod font;
mod render;

use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::puzzle::{BoardSpec, Color, Configuration, Coord, Geom, PuzzleError, Shape};

pub use render::{render_2d, render_raster, Glyph, GlyphTable, Raster, RenderError, RenderOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ObservationRole {
    Past,
    Active,
    Goal,
}

impl ObservationRole {
    pub fn label(self) -> &'static str {
        match self {
            ObservationRole::Past => "past",
            ObservationRole::Active => "active",
            ObservationRole::Goal => "goal",
        }
    }

    /// Background tint: grey, blue, green.
    pub fn tint(self) -> [u8; 3] {
        match self {
            ObservationRole::Past => [190, 190, 190],
            ObservationRole::Active => [140, 170, 245],
            ObservationRole::Goal => [140, 220, 140],
        }
    }
}

impl fmt::Display for ObservationRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modality {
    Text,
    Vision2d,
    /// Declared for completeness; sessions reject it.
    Vision3d,
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Modality::Text => "text",
            Modality::Vision2d => "vision2d",
            Modality::Vision3d => "vision3d",
        })
    }
}

impl std::str::FromStr for Modality {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "text" => Ok(Modality::Text),
            "vision2d" | "2d" => Ok(Modality::Vision2d),
            "vision3d" | "3d" => Ok(Modality::Vision3d),
            other => Err(format!("unknown modality `{other}` (expected text, vision2d or vision3d)")),
        }
    }
}

/// One rendered view of a configuration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Observation {
    Text(String),
    Image { png: Vec<u8>, hash: String },
}

impl Observation {
    pub fn image(png: Vec<u8>) -> Self {
        let hash = content_hash(&png);
        Observation::Image { png, hash }
    }

    pub fn content_hash(&self) -> String {
        match self {
            Observation::Text(t) => content_hash(t.as_bytes()),
            Observation::Image { hash, .. } => hash.clone(),
        }
    }
}

pub fn content_hash(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Renders `cfg` in the modality selected by `opts`.
pub fn observe(cfg: &Configuration, role: ObservationRole, opts: &RenderOptions) -> Result<Observation, RenderError> {
    match opts.modality {
        Modality::Text => Ok(Observation::Text(render_text(cfg))),
        Modality::Vision2d => render_2d(cfg, role, opts).map(Observation::image),
        Modality::Vision3d => Err(RenderError::UnsupportedModality(Modality::Vision3d)),
    }
}

/// Canonical text listing, top row first.
pub fn render_text(cfg: &Configuration) -> String {
    cfg.to_text()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TextErrorCode {
    /// Entry is not `<label> <color> <shape>`.
    Format,
    BadLabel,
    OutOfRange,
    UnknownColor,
    UnknownShape,
    DuplicateCoord,
    DuplicateGeom,
    NoFreeCell,
}

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
#[error("{code:?} in entry {index} `{entry}`")]
pub struct TextParseError {
    pub code: TextErrorCode,
    pub index: usize,
    pub entry: String,
}

/// Parses a `, `-separated list of `<label> <color> <shape>` entries in any order.
pub fn parse_text_state(s: &str, board: BoardSpec) -> Result<Configuration, TextParseError> {
    let trimmed = s.trim();
    if trimmed.is_empty() {
        return Ok(Configuration::empty(board));
    }
    let mut placement: Vec<(Geom, Coord)> = Vec::new();
    for (index, raw) in trimmed.split(',').enumerate() {
        let entry = raw.trim();
        let fail = |code| TextParseError { code, index, entry: entry.to_string() };
        let (coord, geom) = parse_entry(entry, board).map_err(fail)?;
        if placement.iter().any(|&(_, c)| c == coord) {
            return Err(fail(TextErrorCode::DuplicateCoord));
        }
        if placement.iter().any(|&(g, _)| g == geom) {
            return Err(fail(TextErrorCode::DuplicateGeom));
        }
        placement.push((geom, coord));
    }
    Configuration::new(board, placement).map_err(|e| TextParseError {
        code: match e {
            PuzzleError::NoFreeCell => TextErrorCode::NoFreeCell,
            _ => TextErrorCode::Format,
        },
        index: 0,
        entry: trimmed.to_string(),
    })
}

/// Strict single-entry parse shared with the auxiliary scorer.
pub fn parse_entry(entry: &str, board: BoardSpec) -> Result<(Coord, Geom), TextErrorCode> {
    let words: Vec<&str> = entry.split_whitespace().collect();
    let [label, color, shape] = words.as_slice() else {
        return Err(TextErrorCode::Format);
    };
    let coord: Coord = label.parse().map_err(|_| TextErrorCode::BadLabel)?;
    if coord.col >= board.cols || coord.row >= board.rows {
        return Err(TextErrorCode::OutOfRange);
    }
    let color: Color = color.parse().map_err(|_| TextErrorCode::UnknownColor)?;
    let shape: Shape = shape.parse().map_err(|_| TextErrorCode::UnknownShape)?;
    Ok((coord, Geom::new(color, shape)))
}
