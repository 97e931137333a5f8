//! Board-state inference scoring.
//!
//! A reply is matched against the true configuration as an assignment
//! problem. A true and a predicted geom may pair only if they share color or
//! shape. Entries that are not a valid `<coord> <color> <shape>` triple are
//! format errors and get a taxonomy tag.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::hungarian::min_cost_assignment;
use crate::puzzle::{BoardSpec, Color, Configuration, Coord, Geom, Shape};

/// Format-error taxonomy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FormatTag {
    /// Empty-cell mention such as `c3 blank`.
    E1,
    /// Missing color or shape.
    E2,
    /// Color or shape outside the vocabulary.
    E3,
    /// Shape before color.
    E4,
    /// Several colors, shapes or coordinates for one object.
    E5,
    /// Coordinate off the board.
    E6,
    /// Not a list entry at all.
    E7,
    /// No `Solution:` prefix in the reply.
    E8,
}

impl FormatTag {
    pub const ALL: [FormatTag; 8] = [
        FormatTag::E1,
        FormatTag::E2,
        FormatTag::E3,
        FormatTag::E4,
        FormatTag::E5,
        FormatTag::E6,
        FormatTag::E7,
        FormatTag::E8,
    ];
}

impl fmt::Display for FormatTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

/// Board and vocabulary the prediction is judged against.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AuxContext {
    pub board: BoardSpec,
    pub colors: Vec<Color>,
    pub shapes: Vec<Shape>,
}

impl AuxContext {
    pub fn new(board: BoardSpec, colors: &[Color], shapes: &[Shape]) -> Self {
        AuxContext { board, colors: colors.to_vec(), shapes: shapes.to_vec() }
    }

    /// Default four-by-four vocabulary on `board`.
    pub fn default_for(board: BoardSpec) -> Self {
        Self::new(board, Color::DEFAULT_POOL, Shape::DEFAULT_POOL)
    }

    fn color(&self, tok: &str) -> Option<Color> {
        tok.parse().ok().filter(|c| self.colors.contains(c))
    }

    fn shape(&self, tok: &str) -> Option<Shape> {
        tok.parse().ok().filter(|s| self.shapes.contains(s))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuxReport {
    pub true_count: u32,
    pub predicted_entries: u32,
    pub correct: u32,
    /// Matched pairs with at least one wrong attribute.
    pub mismatched: u32,
    pub missed: u32,
    pub hallucinated: u32,
    pub coord_errors: u32,
    pub color_errors: u32,
    pub shape_errors: u32,
    pub format_errors: u32,
    pub format_breakdown: BTreeMap<FormatTag, u32>,
    /// E4 entries that would be valid with color and shape swapped back.
    pub repairable_inversions: u32,
    pub solution_found: bool,
}

impl AuxReport {
    /// Both count identities; true on every report this module produces.
    pub fn is_consistent(&self) -> bool {
        self.correct + self.mismatched + self.missed == self.true_count
            && self.correct + self.mismatched + self.hallucinated + self.format_errors == self.predicted_entries
            && self.format_breakdown.values().sum::<u32>() == self.format_errors
    }
}

fn coord_token() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^[a-z][0-9]{1,2}$").unwrap())
}

fn solution_prefix() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?im)^[\s*_#>`]*solution\s*[*_`]*\s*:").unwrap())
}

const EMPTY_WORDS: &[&str] = &["empty", "blank", "none", "nothing", "vacant", "unoccupied", "free"];
const MULTI_MARKERS: &[&str] = &["and", "&", "/", "multicoloured", "multicolored", "multicolour", "multicolor"];

fn tokens(entry: &str) -> Vec<String> {
    entry
        .to_lowercase()
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '&' || c == '/' { c } else { ' ' })
        .collect::<String>()
        .split_whitespace()
        .map(str::to_string)
        .collect()
}

fn parse_coord(tok: &str) -> Option<Coord> {
    coord_token().is_match(tok).then(|| tok.parse().ok()).flatten()
}

fn in_board(c: Coord, board: BoardSpec) -> bool {
    c.col < board.cols && c.row < board.rows
}

/// Parses one entry as a valid geom triple under `ctx`.
pub fn parse_prediction(entry: &str, ctx: &AuxContext) -> Option<(Coord, Geom)> {
    let t = tokens(entry);
    let [c, color, shape] = t.as_slice() else { return None };
    let coord = parse_coord(c).filter(|&c| in_board(c, ctx.board))?;
    Some((coord, Geom::new(ctx.color(color)?, ctx.shape(shape)?)))
}

/// Tags an entry that fails [`parse_prediction`]; `None` for a valid entry.
///
/// Rules apply in order E1..E7 to entries that start with a coordinate and
/// have at most five tokens; anything else is E7.
pub fn classify_format_error(entry: &str, ctx: &AuxContext) -> Option<FormatTag> {
    if parse_prediction(entry, ctx).is_some() {
        return None;
    }
    let t = tokens(entry);
    if t.is_empty() || t.len() > 5 || parse_coord(&t[0]).is_none() {
        return Some(FormatTag::E7);
    }
    let coords = t.iter().filter(|x| parse_coord(x).is_some()).count();
    let colors = t.iter().filter(|x| ctx.color(x).is_some()).count();
    let shapes = t.iter().filter(|x| ctx.shape(x).is_some()).count();
    let others: Vec<&str> = t
        .iter()
        .map(String::as_str)
        .filter(|x| parse_coord(x).is_none() && ctx.color(x).is_none() && ctx.shape(x).is_none())
        .collect();
    let has_marker = others.iter().any(|x| MULTI_MARKERS.contains(x));

    let mentions_empty =
        others.iter().any(|x| EMPTY_WORDS.contains(x)) || (others.contains(&"no") && others.iter().any(|x| x.starts_with("object")));
    if colors == 0 && shapes == 0 && mentions_empty {
        return Some(FormatTag::E1);
    }
    if coords == 1 && colors + shapes == 1 && others.iter().all(|x| *x == "none") {
        return Some(FormatTag::E2);
    }
    if t.len() == 3 && coords == 1 && !has_marker && colors + shapes < 2 {
        return Some(FormatTag::E3);
    }
    if t.len() == 3 && ctx.shape(&t[1]).is_some() && ctx.color(&t[2]).is_some() {
        return Some(FormatTag::E4);
    }
    if colors > 1 || shapes > 1 || coords > 1 || has_marker {
        return Some(FormatTag::E5);
    }
    if t.len() == 3 && ctx.color(&t[1]).is_some() && ctx.shape(&t[2]).is_some() {
        return Some(FormatTag::E6);
    }
    Some(FormatTag::E7)
}

/// Comma- or newline-separated pieces after the final `Solution:` marker.
/// Without a marker the whole reply is split and the flag is false.
fn solution_entries(reply: &str) -> (bool, Vec<String>) {
    let split = |s: &str| -> Vec<String> {
        s.split([',', '\n'])
            .map(|p| p.trim().trim_end_matches('.').trim().to_string())
            .filter(|p| !p.is_empty() && !p.chars().all(|c| "`*_".contains(c)))
            .collect()
    };
    match solution_prefix().find_iter(reply).last() {
        Some(m) => (true, split(&reply[m.end()..])),
        None => (false, split(reply)),
    }
}

// Assignment cost weights, most significant first: number of matches,
// mismatched attributes, imperfect pairs, then the kind of each mismatch.
const W_UNMATCHED: i128 = 1 << 44;
const W_FORBIDDEN: i128 = 1 << 60;
const W_ATTR: i128 = 1 << 32;
const W_IMPERFECT: i128 = 1 << 24;
const W_COORD: i128 = 1;
const W_COLOR: i128 = 1 << 8;
const W_SHAPE: i128 = 1 << 16;

/// Scores a board-state reply against `truth`.
pub fn score_auxiliary(truth: &Configuration, reply: &str, ctx: &AuxContext) -> AuxReport {
    let (solution_found, entries) = solution_entries(reply);
    let mut report = AuxReport {
        true_count: truth.len() as u32,
        predicted_entries: entries.len() as u32,
        solution_found,
        ..Default::default()
    };
    let mut predicted: Vec<(Coord, Geom)> = Vec::new();
    for entry in &entries {
        let tag = if !solution_found {
            Some(FormatTag::E8)
        } else {
            match parse_prediction(entry, ctx) {
                Some(p) => {
                    predicted.push(p);
                    None
                }
                None => classify_format_error(entry, ctx),
            }
        };
        if let Some(tag) = tag {
            report.format_errors += 1;
            *report.format_breakdown.entry(tag).or_default() += 1;
            if tag == FormatTag::E4 {
                let t = tokens(entry);
                if parse_prediction(&format!("{} {} {}", t[0], t[2], t[1]), ctx).is_some() {
                    report.repairable_inversions += 1;
                }
            }
        }
    }

    let truth: Vec<(Coord, Geom)> = truth.entries().iter().map(|&(g, c)| (c, g)).collect();
    let (n, k) = (truth.len(), predicted.len());
    let size = n + k;
    let mut cost = vec![vec![0i128; size]; size];
    for (i, row) in cost.iter_mut().enumerate() {
        for (j, cell) in row.iter_mut().enumerate() {
            *cell = match (i < n, j < k) {
                (true, true) => pair_cost(truth[i], predicted[j]).unwrap_or(W_FORBIDDEN),
                (true, false) | (false, true) => W_UNMATCHED,
                (false, false) => 0,
            };
        }
    }
    let assignment = min_cost_assignment(&cost);
    let mut matched_pred = 0;
    for (i, &j) in assignment.iter().enumerate().take(n) {
        if j >= k {
            report.missed += 1;
            continue;
        }
        let ((tc, tg), (pc, pg)) = (truth[i], predicted[j]);
        debug_assert!(pair_cost(truth[i], predicted[j]).is_some());
        matched_pred += 1;
        let (dc, dcol, dsh) = (tc != pc, tg.color != pg.color, tg.shape != pg.shape);
        report.coord_errors += dc as u32;
        report.color_errors += dcol as u32;
        report.shape_errors += dsh as u32;
        if dc || dcol || dsh {
            report.mismatched += 1;
        } else {
            report.correct += 1;
        }
    }
    report.hallucinated = (k - matched_pred) as u32;
    report
}

fn pair_cost((tc, tg): (Coord, Geom), (pc, pg): (Coord, Geom)) -> Option<i128> {
    let dcol = tg.color != pg.color;
    let dsh = tg.shape != pg.shape;
    if dcol && dsh {
        return None;
    }
    let dc = tc != pc;
    let attrs = dc as i128 + dcol as i128 + dsh as i128;
    Some(W_ATTR * attrs + W_IMPERFECT * (attrs > 0) as i128 + W_COORD * dc as i128 + W_COLOR * dcol as i128 + W_SHAPE * dsh as i128)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::observation::parse_text_state;
    use proptest::prelude::*;
    use rand::seq::SliceRandom;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn board4() -> BoardSpec {
        BoardSpec::new(4, 4).unwrap()
    }

    fn ctx() -> AuxContext {
        AuxContext::default_for(board4())
    }

    fn truth(s: &str) -> Configuration {
        parse_text_state(s, board4()).unwrap()
    }

    #[test]
    fn identity_is_all_correct() {
        let r = score_auxiliary(&truth("a3 green sphere"), "Solution: a3 green sphere", &ctx());
        assert_eq!((r.correct, r.missed, r.hallucinated, r.format_errors), (1, 0, 0, 0));
        assert!(r.is_consistent());
    }

    #[test]
    fn displaced_geom_is_a_coord_error() {
        let r = score_auxiliary(&truth("a3 green sphere"), "Solution: a4 green sphere", &ctx());
        assert_eq!((r.correct, r.mismatched, r.coord_errors), (0, 1, 1));
    }

    #[test]
    fn disjoint_attributes_are_missed_and_hallucinated() {
        let r = score_auxiliary(&truth("a3 green sphere"), "Solution: a3 red cube", &ctx());
        assert_eq!((r.correct, r.missed, r.hallucinated, r.coord_errors), (0, 1, 1, 0));
    }

    #[test]
    fn missing_prefix_makes_every_piece_e8() {
        let r = score_auxiliary(&truth("a3 green sphere, b1 red cube"), "a3 green sphere, b1 red cube", &ctx());
        assert!(!r.solution_found);
        assert_eq!((r.format_errors, r.missed, r.correct), (2, 2, 0));
        assert_eq!(r.format_breakdown[&FormatTag::E8], 2);
        assert!(r.is_consistent());
    }

    #[test]
    fn taxonomy_examples() {
        let tag = |s: &str| classify_format_error(s, &ctx());
        for (entry, expected) in [
            ("a4 empty", FormatTag::E1),
            ("c3 blank", FormatTag::E1),
            ("b1 no object", FormatTag::E1),
            ("a1 none none", FormatTag::E1),
            ("c1 none pyramid", FormatTag::E2),
            ("b2 sphere", FormatTag::E2),
            ("b2 black cone", FormatTag::E3),
            ("b3 red block", FormatTag::E3),
            ("b4 cylinder yellow", FormatTag::E4),
            ("d4 blue and red cube", FormatTag::E5),
            ("d1 multicoloured cube", FormatTag::E5),
            ("a2 a3 green pyramid", FormatTag::E5),
            ("f4 yellow pyramid", FormatTag::E6),
            ("c5 green pyramid", FormatTag::E6),
            ("d2 blue cylinder summary a4 yellow cylinder b4 blue sphere", FormatTag::E7),
            ("d3 green sphere https user images githubusercontent com f45e3211ecb93a6b429446.png", FormatTag::E7),
            ("obj in objectsitems if obj none output", FormatTag::E7),
            ("yellow objectshape must be exactly one of cube", FormatTag::E7),
            ("we will create the solution", FormatTag::E7),
        ] {
            assert_eq!(tag(entry), Some(expected), "{entry}");
        }
        assert_eq!(tag("a3 green sphere"), None);
        assert_eq!(tag("A3 Green Sphere"), None);
    }

    #[test]
    fn inversion_is_counted_and_repairable() {
        let r = score_auxiliary(&truth("b4 yellow cylinder"), "Solution: b4 cylinder yellow", &ctx());
        assert_eq!(r.format_breakdown[&FormatTag::E4], 1);
        assert_eq!(r.repairable_inversions, 1);
        assert_eq!(r.missed, 1);
        assert!(r.is_consistent());
    }

    #[test]
    fn matching_prefers_the_closer_pair() {
        let t = truth("a1 red cube, d4 red sphere");
        let r = score_auxiliary(&t, "Solution: d4 red cube", &ctx());
        // Either pairing costs one attribute; the tie goes to the coordinate error.
        assert_eq!((r.mismatched, r.missed, r.coord_errors, r.shape_errors), (1, 1, 1, 0));
    }

    fn cfg_from_seed(seed: u64) -> Configuration {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut pool: Vec<Geom> =
            Color::DEFAULT_POOL.iter().flat_map(|&c| Shape::DEFAULT_POOL.iter().map(move |&s| Geom::new(c, s))).collect();
        pool.shuffle(&mut rng);
        let mut cells: Vec<Coord> = board4().cells_reading_order().collect();
        cells.shuffle(&mut rng);
        let n = rng.random_range(1..=11);
        Configuration::new(board4(), pool.into_iter().zip(cells).take(n)).unwrap()
    }

    fn mutate(text: &str, seed: u64) -> Vec<String> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = ["a4 empty", "b2 sphere", "b3 red block", "b4 cylinder yellow", "d4 blue and red cube", "f4 yellow pyramid", "we will"];
        let mut entries: Vec<String> = text.split(", ").map(str::to_string).collect();
        for e in entries.iter_mut() {
            match rng.random_range(0..6) {
                0 => *e = noise[rng.random_range(0..noise.len())].to_string(),
                1 => *e = format!("{}{} {}", (b'a' + rng.random_range(0..4)) as char, rng.random_range(1..5), e.split_once(' ').unwrap().1),
                2 => *e = e.replace("red", "blue"),
                _ => {}
            }
        }
        if rng.random_bool(0.3) {
            entries.pop();
        }
        if rng.random_bool(0.3) {
            entries.push("c2 green cube".into());
        }
        entries
    }

    #[test]
    fn render_as_solution_is_perfect() {
        for seed in 0..300 {
            let c = cfg_from_seed(seed);
            let r = score_auxiliary(&c, &format!("Solution: {}", c.to_text()), &ctx());
            assert_eq!(r.correct as usize, c.len());
            assert_eq!(r.mismatched + r.missed + r.hallucinated + r.format_errors, 0);
        }
    }

    proptest! {
        #[test]
        fn conservation_and_permutation_invariance(seed in any::<u64>()) {
            let c = cfg_from_seed(seed);
            let mut entries = mutate(&c.to_text(), seed);
            let r = score_auxiliary(&c, &format!("Solution: {}", entries.join(", ")), &ctx());
            prop_assert!(r.is_consistent(), "{:?}", r);
            entries.shuffle(&mut ChaCha8Rng::seed_from_u64(seed ^ 1));
            let shuffled = score_auxiliary(&c, &format!("Solution: {}", entries.join(", ")), &ctx());
            prop_assert_eq!(r, shuffled);
        }

        #[test]
        fn scorer_is_total(s in "\\PC{0,120}") {
            let r = score_auxiliary(&truth("a3 green sphere, b1 red cube"), &s, &ctx());
            prop_assert!(r.is_consistent());
        }
    }
}
