//! Instruction templates and per-step prompt bundles.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::EngineError;
use crate::observation::{Modality, Observation, ObservationRole};
use crate::puzzle::{BoardSpec, Color, Shape};

const INTERACTIVE: &str = include_str!("../../templates/interactive.txt");
const VISION: &str = include_str!("../../templates/vision.txt");
const AUXILIARY: &str = include_str!("../../templates/auxiliary.txt");

/// Template set. Placeholders use `{name}` syntax.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptTemplates {
    /// Core game instructions, shared by every modality.
    pub interactive: String,
    /// Image-reading instructions appended for vision sessions.
    pub vision: String,
    /// Board-state inference task.
    pub auxiliary: String,
}

impl Default for PromptTemplates {
    fn default() -> Self {
        PromptTemplates {
            interactive: INTERACTIVE.to_string(),
            vision: VISION.to_string(),
            auxiliary: AUXILIARY.to_string(),
        }
    }
}

impl PromptTemplates {
    /// Loads overrides from a directory holding `interactive.txt`, `vision.txt`, `auxiliary.txt`.
    pub fn from_dir(dir: &std::path::Path) -> Result<Self, EngineError> {
        let read = |name: &str| {
            std::fs::read_to_string(dir.join(name)).map_err(|_| EngineError::MissingTemplate(dir.join(name).display().to_string()))
        };
        Ok(PromptTemplates {
            interactive: read("interactive.txt")?,
            vision: read("vision.txt")?,
            auxiliary: read("auxiliary.txt")?,
        })
    }

    /// Auxiliary-task instructions for a board and vocabulary.
    pub fn auxiliary_prompt(&self, board: BoardSpec, colors: &[Color], shapes: &[Shape]) -> Result<String, EngineError> {
        let mut vars = vocabulary_vars(board, colors, shapes);
        vars.insert("first_col", "a".into());
        vars.insert("last_col", ((b'a' + board.cols - 1) as char).to_string());
        vars.insert("last_row", board.rows.to_string());
        expand(&self.auxiliary, &vars)
    }
}

pub(crate) fn vocabulary_vars(board: BoardSpec, colors: &[Color], shapes: &[Shape]) -> BTreeMap<&'static str, String> {
    let join = |xs: Vec<&str>| xs.join(", ");
    let mut vars = BTreeMap::new();
    vars.insert("grid", board.to_string());
    vars.insert("colors", join(colors.iter().map(|c| c.as_str()).collect()));
    vars.insert("shapes", join(shapes.iter().map(|s| s.as_str()).collect()));
    vars
}

/// Substitutes every `{name}`; an unknown placeholder is an error.
pub fn expand(template: &str, vars: &BTreeMap<&'static str, String>) -> Result<String, EngineError> {
    let mut out = String::with_capacity(template.len() + 256);
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let after = &rest[open + 1..];
        match after.find('}') {
            Some(close) if is_placeholder(&after[..close]) => {
                let name = &after[..close];
                let value = vars.get(name).ok_or_else(|| EngineError::UnfilledPlaceholder(name.to_string()))?;
                out.push_str(value);
                rest = &after[close + 1..];
            }
            _ => {
                out.push('{');
                rest = after;
            }
        }
    }
    out.push_str(rest);
    Ok(out)
}

fn is_placeholder(s: &str) -> bool {
    !s.is_empty() && s.bytes().all(|b| b.is_ascii_lowercase() || b == b'_')
}

/// Everything an agent sees at one step.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptBundle {
    pub system_text: String,
    /// Goal first, then past states oldest to newest, then the active state.
    pub observations: Vec<(ObservationRole, Observation)>,
    pub modality: Modality,
}

impl PromptBundle {
    pub fn past_count(&self) -> usize {
        self.observations.iter().filter(|(r, _)| *r == ObservationRole::Past).count()
    }

    pub fn image_count(&self) -> usize {
        self.observations.iter().filter(|(_, o)| matches!(o, Observation::Image { .. })).count()
    }

    /// Content hashes of attached images, in bundle order.
    pub fn image_refs(&self) -> Vec<String> {
        self.observations
            .iter()
            .filter_map(|(_, o)| match o {
                Observation::Image { hash, .. } => Some(hash.clone()),
                Observation::Text(_) => None,
            })
            .collect()
    }

    /// SHA-256 over the instruction text and each observation's content hash.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.system_text.as_bytes());
        for (role, obs) in &self.observations {
            h.update(b"\n");
            h.update(role.label().as_bytes());
            h.update(b":");
            h.update(obs.content_hash().as_bytes());
        }
        hex::encode(h.finalize())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn expands_known_placeholders() {
        let mut vars = BTreeMap::new();
        vars.insert("name", "world".to_string());
        assert_eq!(expand("hello {name}!", &vars).unwrap(), "hello world!");
        assert_eq!(expand("json {\"a\": 1} stays", &vars).unwrap(), "json {\"a\": 1} stays");
        assert!(matches!(expand("{missing}", &vars), Err(EngineError::UnfilledPlaceholder(_))));
    }

    #[test]
    fn default_templates_expand_fully() {
        let t = PromptTemplates::default();
        let board = BoardSpec::new(4, 4).unwrap();
        let aux = t.auxiliary_prompt(board, Color::DEFAULT_POOL, Shape::DEFAULT_POOL).unwrap();
        assert!(aux.contains("Columns a-d run from left to right"));
        assert!(aux.contains("Solution: a3 green sphere"));
        assert!(!aux.contains('{'));
    }

    #[test]
    fn missing_template_dir() {
        assert!(matches!(
            PromptTemplates::from_dir(std::path::Path::new("/nonexistent/templates")),
            Err(EngineError::MissingTemplate(_))
        ));
    }
}
