//! Extracts the final `action: move <color> <shape> <direction>` line from a reply.
//!
//! Tolerated: any case, surrounding whitespace, markdown emphasis or
//! backticks around the keyword or command, and trailing `description:`
//! lines or code fences after the action. Everything else after the command
//! counts as trailing garbage.

use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::puzzle::{Color, Direction, MoveCommand, Shape};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Error)]
#[serde(tag = "reason", content = "detail", rename_all = "snake_case")]
pub enum ActionParseFailure {
    #[error("no action line")]
    NoActionLine,
    #[error("malformed action `{0}`")]
    Malformed(String),
    #[error("unknown color `{0}`")]
    UnknownColor(String),
    #[error("unknown shape `{0}`")]
    UnknownShape(String),
    #[error("unknown direction `{0}`")]
    UnknownDirection(String),
    #[error("trailing characters after the action: `{0}`")]
    TrailingGarbage(String),
}

fn action_line() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?i)^\s*(?:[*_`>#-]+\s*)*action\s*[*_`]*\s*:\s*(.*)$").unwrap())
}

fn allowed_trailer() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?i)^\s*(?:[*_`]+\s*)*(?:description\s*[*_`]*\s*:.*|`{3,}\s*)$").unwrap())
}

pub fn parse_action_reply(raw: &str) -> Result<MoveCommand, ActionParseFailure> {
    let lines: Vec<&str> = raw.lines().collect();
    let (idx, rest) = lines
        .iter()
        .enumerate()
        .rev()
        .find_map(|(i, line)| action_line().captures(line).map(|c| (i, c.get(1).unwrap().as_str())))
        .ok_or(ActionParseFailure::NoActionLine)?;

    if let Some(extra) = lines[idx + 1..]
        .iter()
        .find(|l| !l.trim().is_empty() && !allowed_trailer().is_match(l))
    {
        return Err(ActionParseFailure::TrailingGarbage(extra.trim().to_string()));
    }

    let command = rest.trim_matches(|c: char| c.is_whitespace() || "`*_".contains(c));
    let words: Vec<&str> = command.split_whitespace().collect();
    if words.len() < 4 || !words[0].eq_ignore_ascii_case("move") {
        return Err(ActionParseFailure::Malformed(command.to_string()));
    }
    let color: Color = words[1].parse().map_err(|_| ActionParseFailure::UnknownColor(words[1].to_string()))?;
    let shape: Shape = words[2].parse().map_err(|_| ActionParseFailure::UnknownShape(words[2].to_string()))?;
    let direction: Direction = words[3]
        .parse()
        .map_err(|_| ActionParseFailure::UnknownDirection(words[3].to_string()))?;
    if words.len() > 4 {
        return Err(ActionParseFailure::TrailingGarbage(words[4..].join(" ")));
    }
    Ok(MoveCommand::new(color, shape, direction))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ok(raw: &str) -> MoveCommand {
        parse_action_reply(raw).unwrap()
    }

    #[test]
    fn plain_action() {
        assert_eq!(ok("action: move green cube down"), MoveCommand::new(Color::Green, Shape::Cube, Direction::Down));
    }

    #[test]
    fn reasoning_then_action() {
        let reply = "To reach the goal state I need to compare the current active state with the goal state.\n\
                     Moving the blue cube rightward will help clear the blocked pathway.\n\
                     action: move blue cube right";
        assert_eq!(ok(reply), MoveCommand::new(Color::Blue, Shape::Cube, Direction::Right));
    }

    #[test]
    fn last_action_line_wins() {
        let reply = "action: move red cube up\nOn second thought...\naction: move red cube left\n";
        assert_eq!(ok(reply).direction, Direction::Left);
    }

    #[test]
    fn case_markdown_and_description_trailer() {
        assert_eq!(ok("  ACTION: Move Blue Sphere RIGHT  ").color, Color::Blue);
        assert_eq!(ok("**Action:** `move red pyramid up`").shape, Shape::Pyramid);
        assert_eq!(ok("action: move red cube up\ndescription: a2 red cube").direction, Direction::Up);
        assert_eq!(ok("```\naction: move red cube up\n```").direction, Direction::Up);
    }

    #[test]
    fn failures() {
        assert_eq!(parse_action_reply("I am not sure."), Err(ActionParseFailure::NoActionLine));
        assert_eq!(parse_action_reply(""), Err(ActionParseFailure::NoActionLine));
        assert!(matches!(parse_action_reply("action: move black cube up"), Err(ActionParseFailure::UnknownColor(_))));
        assert!(matches!(parse_action_reply("action: move red block up"), Err(ActionParseFailure::UnknownShape(_))));
        assert!(matches!(parse_action_reply("action: move red cube north"), Err(ActionParseFailure::UnknownDirection(_))));
        assert!(matches!(parse_action_reply("action: move red cube up now"), Err(ActionParseFailure::TrailingGarbage(_))));
        assert!(matches!(parse_action_reply("action: move red cube up\nthanks!"), Err(ActionParseFailure::TrailingGarbage(_))));
        assert!(matches!(parse_action_reply("**Action:** Move the blue cube right"), Err(ActionParseFailure::UnknownColor(_))));
        assert!(matches!(parse_action_reply("action: b2 to b3"), Err(ActionParseFailure::Malformed(_))));
        assert!(matches!(parse_action_reply("action: move red cube"), Err(ActionParseFailure::Malformed(_))));
    }

    proptest! {
        #[test]
        fn never_panics(s in "\\PC{0,200}") {
            let _ = parse_action_reply(&s);
        }

        #[test]
        fn rendered_commands_parse_back(ci in 0usize..8, si in 0usize..6, di in 0usize..4, prose in "[a-z ,.]{0,80}") {
            let cmd = MoveCommand::new(Color::ALL[ci], Shape::ALL[si], Direction::ORDER[di]);
            let reply = format!("{prose}\naction: {cmd}");
            prop_assert_eq!(parse_action_reply(&reply), Ok(cmd));
        }
    }
}
