//! Parsing LLM answers in the bracket-list format
//! `["name": "direction", ...]`, one list per two-frame group.

use crate::direction::Direction;
use crate::motion_plan::{CharacterPlan, MotionPlan, BACKGROUND_NAME};
use crate::warp::CAMERA_BACKGROUND_NAME;

use super::{character_name, PlannerError};

const OPEN_QUOTES: [char; 4] = ['"', '“', '”', '`'];

fn closing_for(open: char) -> &'static [char] {
    match open {
        '`' => &['"', '”', '\'', '`'],
        _ => &['"', '”', '“'],
    }
}

struct Entry {
    name: String,
    direction: Direction,
}

struct Scanner<'a> {
    text: &'a str,
    pos: usize,
}

impl<'a> Scanner<'a> {
    fn peek(&self) -> Option<char> {
        self.text[self.pos..].chars().next()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += c.len_utf8();
        Some(c)
    }

    fn skip_ws(&mut self) {
        while self.peek().is_some_and(char::is_whitespace) {
            self.bump();
        }
    }

    fn error(&self, message: impl Into<String>) -> PlannerError {
        PlannerError::Parse {
            offset: self.pos,
            message: message.into(),
        }
    }

    /// A quoted string (any of the accepted quote styles, LaTeX double
    /// backticks included) or a bare token running up to `stops`.
    fn token(&mut self, stops: &[char]) -> Result<(String, usize), PlannerError> {
        self.skip_ws();
        let start = self.pos;
        match self.peek() {
            Some(q) if OPEN_QUOTES.contains(&q) => {
                self.bump();
                if q == '`' && self.peek() == Some('`') {
                    self.bump();
                }
                let body_start = self.pos;
                let closers = closing_for(q);
                while let Some(c) = self.peek() {
                    if closers.contains(&c) {
                        let body = self.text[body_start..self.pos].to_string();
                        self.bump();
                        if c == '\'' && self.peek() == Some('\'') {
                            self.bump();
                        }
                        return Ok((body, start));
                    }
                    if c == '\n' {
                        break;
                    }
                    self.bump();
                }
                Err(PlannerError::Parse {
                    offset: start,
                    message: "unterminated string".into(),
                })
            }
            Some(_) => {
                while let Some(c) = self.peek() {
                    if stops.contains(&c) || c == '\n' {
                        break;
                    }
                    self.bump();
                }
                let body = self.text[start..self.pos].trim().to_string();
                if body.is_empty() {
                    return Err(self.error("expected a name or direction"));
                }
                Ok((body, start))
            }
            None => Err(self.error("unexpected end of text")),
        }
    }

    fn expect(&mut self, want: char, what: &str) -> Result<(), PlannerError> {
        self.skip_ws();
        match self.peek() {
            Some(c) if c == want => {
                self.bump();
                Ok(())
            }
            _ => Err(self.error(format!("expected {what}"))),
        }
    }

    /// Parses one list; the opening `[` has been consumed.
    fn group(&mut self) -> Result<Vec<Entry>, PlannerError> {
        let mut entries: Vec<Entry> = Vec::new();
        loop {
            self.skip_ws();
            if self.peek() == Some(']') {
                self.bump();
                return Ok(entries);
            }
            let (raw_name, name_offset) = self.token(&[':', ',', ']'])?;
            self.expect(':', "`:` after a name")?;
            let (raw_dir, dir_offset) = self.token(&[',', ']'])?;
            let direction = Direction::fuzzy_parse(&raw_dir).map_err(|e| PlannerError::vocabulary(e, dir_offset))?;
            let name = raw_name.trim().to_string();
            if name.is_empty() {
                return Err(PlannerError::Parse {
                    offset: name_offset,
                    message: "empty character name".into(),
                });
            }
            if entries.iter().any(|e| character_name(&e.name) == character_name(&name)) {
                return Err(PlannerError::DuplicateEntry {
                    name,
                    offset: name_offset,
                });
            }
            entries.push(Entry {
                name,
                direction,
            });
            self.skip_ws();
            match self.peek() {
                Some(',') => {
                    self.bump();
                }
                Some(']') => {}
                _ => return Err(self.error("expected `,` or `]`")),
            }
        }
    }
}

/// Parses an answer into a plan for `frame_count` frames.
///
/// Accepts either the plan JSON document or one or more bracket lists with
/// chatter between them. Each list covers two transitions; the sequence is
/// cut to `F − 1` and a short answer repeats its last list. Characters
/// missing from a list are motionless there, characters that never move are
/// dropped, and order follows first appearance.
pub fn parse_motion_plan(text: &str, frame_count: usize) -> Result<MotionPlan, PlannerError> {
    if frame_count < 2 {
        return Err(crate::motion_plan::PlanError::TooFewFrames(frame_count).into());
    }
    let trimmed = text.trim_start();
    if trimmed.starts_with('{') {
        let offset = text.len() - trimmed.len();
        let plan = MotionPlan::from_json(trimmed).map_err(|e| PlannerError::Parse {
            offset,
            message: e.to_string(),
        })?;
        if plan.frame_count() != frame_count {
            return Err(PlannerError::Parse {
                offset,
                message: format!("plan covers {} frames, expected {frame_count}", plan.frame_count()),
            });
        }
        return Ok(plan.fold_motionless());
    }

    let mut scanner = Scanner { text, pos: 0 };
    let mut groups: Vec<Vec<Entry>> = Vec::new();
    while let Some(c) = scanner.bump() {
        if c == '[' {
            groups.push(scanner.group()?);
        }
    }
    if groups.is_empty() {
        return Err(PlannerError::Parse {
            offset: 0,
            message: "no bracketed list found".into(),
        });
    }

    // (display phrase, name) in first-appearance order.
    let mut order: Vec<(String, String)> = Vec::new();
    for entry in groups.iter().flatten() {
        let name = canonical_name(&entry.name);
        if !order.iter().any(|(_, n)| *n == name) {
            order.push((entry.name.clone(), name));
        }
    }

    let transitions = frame_count - 1;
    let mut characters = Vec::new();
    for (phrase, name) in order {
        let per_group: Vec<Direction> = groups
            .iter()
            .map(|g| {
                g.iter()
                    .find(|e| canonical_name(&e.name) == name)
                    .map_or(Direction::Motionless, |e| e.direction)
            })
            .collect();
        let mut directions: Vec<Direction> = per_group.iter().flat_map(|&d| [d, d]).collect();
        let last = *directions.last().expect("at least one group");
        directions.resize(transitions, last);
        characters.push(CharacterPlan::new(name, phrase.trim(), directions));
    }
    let characters: Vec<_> = characters.into_iter().filter(|c| !c.is_motionless()).collect();
    Ok(MotionPlan::new(frame_count, characters)?)
}

/// `background` is implicit in a plan, so a moving background from an LLM
/// answer becomes the camera layer.
fn canonical_name(raw: &str) -> String {
    let name = character_name(raw);
    if name == BACKGROUND_NAME {
        CAMERA_BACKGROUND_NAME.to_string()
    } else {
        name
    }
}

/// Renders a plan in the bracket-list answer format, one list per two
/// transitions. Exact inverse of [`parse_motion_plan`] for plans whose
/// directions come in equal pairs.
pub fn format_motion_plan(plan: &MotionPlan) -> String {
    let transitions = plan.transitions();
    let groups = transitions.div_ceil(2);
    let mut out = String::new();
    for g in 0..groups {
        let entries: Vec<String> = plan
            .characters()
            .iter()
            .map(|c| format!("\"{}\": \"{}\"", c.phrase, c.directions[2 * g].phrase()))
            .collect();
        out.push('[');
        out.push_str(&entries.join(", "));
        out.push_str("]\n");
    }
    out
}

/// Object names from an answer to the moving-objects command: a bracket or
/// comma list, or one per line with optional bullets or numbering.
pub fn parse_object_list(text: &str) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    let body = text.replace(['[', ']'], "\n");
    for line in body.lines() {
        let line = line.trim();
        if line.is_empty() || line.ends_with(':') {
            continue;
        }
        for part in line.split([',', ';']) {
            let mut item = part.trim();
            item = item.trim_start_matches(|c: char| c.is_ascii_digit() || matches!(c, '-' | '*' | '.' | ')' | '•'));
            item = item.split(':').next().unwrap_or("");
            let item = item
                .trim()
                .trim_matches(|c: char| matches!(c, '"' | '\'' | '“' | '”' | '`' | '.'))
                .trim()
                .to_lowercase();
            let item = ["the ", "an ", "a "]
                .iter()
                .find_map(|a| item.strip_prefix(a))
                .unwrap_or(&item)
                .trim();
            // Sentences are chatter, not object names.
            if item.is_empty() || item.split_whitespace().count() > 4 {
                continue;
            }
            if !out.iter().any(|o| o == item) {
                out.push(item.to_string());
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use Direction::*;

    #[test]
    fn four_groups_expand_and_fold() {
        let text = "[\"airplane\": \"down\", \"runway\": \"motionless\"]\n".repeat(4);
        let plan = parse_motion_plan(&text, 8).unwrap();
        assert_eq!(plan.characters().len(), 1);
        assert_eq!(plan.characters()[0].name, "airplane");
        assert_eq!(plan.characters()[0].directions, vec![Down; 7]);
    }

    #[test]
    fn single_group_two_frames() {
        let plan = parse_motion_plan("[\"man\": \"right down\"]", 2).unwrap();
        assert_eq!(plan.character("man").unwrap().directions, vec![RightDown]);
    }

    #[test]
    fn unknown_direction_is_named() {
        let text = "[\"man\": \"sideways\"]";
        assert_eq!(
            parse_motion_plan(text, 8).unwrap_err(),
            PlannerError::Vocabulary {
                token: "sideways".into(),
                offset: 8
            }
        );
    }

    #[test]
    fn short_answers_repeat_the_last_group() {
        let plan = parse_motion_plan("[\"cat\": \"left\"] then [\"cat\": \"Up\"]", 8).unwrap();
        assert_eq!(plan.characters()[0].directions, vec![Left, Left, Up, Up, Up, Up, Up]);
    }

    #[test]
    fn missing_characters_are_motionless_in_that_group() {
        let text = "[\"cat\": \"left\", \"dog\": \"right\"]\n[\"dog\": \"right\"]";
        let plan = parse_motion_plan(text, 5).unwrap();
        assert_eq!(plan.character("cat").unwrap().directions, vec![Left, Left, Motionless, Motionless]);
        assert_eq!(plan.characters()[1].name, "dog");
    }

    #[test]
    fn quote_styles_and_bare_words() {
        let text = "Sure! [“hot air balloon”: “Right-Up”, ``bird'': ``left\"]";
        let plan = parse_motion_plan(text, 3).unwrap();
        assert_eq!(plan.characters()[0].name, "hot_air_balloon");
        assert_eq!(plan.characters()[0].phrase, "hot air balloon");
        assert_eq!(plan.characters()[0].directions, vec![RightUp, RightUp]);
        assert_eq!(plan.character("bird").unwrap().directions, vec![Left, Left]);
        let bare = parse_motion_plan("[fish: down left]", 2).unwrap();
        assert_eq!(bare.character("fish").unwrap().directions, vec![LeftDown]);
    }

    #[test]
    fn moving_background_becomes_camera_layer() {
        let plan = parse_motion_plan("[\"background\": \"left\"]", 2).unwrap();
        assert_eq!(plan.characters()[0].name, CAMERA_BACKGROUND_NAME);
    }

    #[test]
    fn malformed_answers() {
        assert!(matches!(parse_motion_plan("no lists here", 8), Err(PlannerError::Parse { offset: 0, .. })));
        assert!(matches!(
            parse_motion_plan("[\"cat\" \"left\"]", 8),
            Err(PlannerError::Parse { offset: 7, .. })
        ));
        assert!(matches!(
            parse_motion_plan("[\"cat: \"left\"]", 8),
            Err(PlannerError::Parse { .. }) | Err(PlannerError::Vocabulary { .. })
        ));
        assert!(matches!(
            parse_motion_plan("[\"cat\": \"left\"", 8),
            Err(PlannerError::Parse { .. })
        ));
        assert_eq!(
            parse_motion_plan("[\"cat\": \"left\", \"Cat\": \"up\"]", 8).unwrap_err(),
            PlannerError::DuplicateEntry {
                name: "Cat".into(),
                offset: 16
            }
        );
        assert!(matches!(parse_motion_plan("[\"cat\": \"left\"]", 1), Err(PlannerError::Plan(_))));
    }

    #[test]
    fn json_documents_are_accepted() {
        let plan = MotionPlan::new(3, vec![CharacterPlan::new("man", "a man", vec![Up, Left])]).unwrap();
        assert_eq!(parse_motion_plan(&plan.to_json(), 3).unwrap(), plan);
        assert!(matches!(parse_motion_plan(&plan.to_json(), 4), Err(PlannerError::Parse { .. })));
    }

    #[test]
    fn object_lists() {
        assert_eq!(parse_object_list("[\"airplane\", \"runway\"]"), vec!["airplane", "runway"]);
        assert_eq!(
            parse_object_list("Moving objects:\n1. The airplane\n2. Its wheels"),
            vec!["airplane", "its wheels"]
        );
        assert_eq!(parse_object_list("- a horse: running"), vec!["horse"]);
    }

    fn arb_plan() -> impl Strategy<Value = MotionPlan> {
        (2usize..12, 1usize..4).prop_flat_map(|(frames, chars)| {
            let groups = (frames - 1).div_ceil(2);
            proptest::collection::vec(
                proptest::collection::vec(proptest::sample::select(Direction::ALL.to_vec()), groups),
                chars,
            )
            .prop_map(move |all| {
                let characters = all
                    .into_iter()
                    .enumerate()
                    .map(|(i, groups)| {
                        let mut dirs: Vec<Direction> = groups.iter().flat_map(|&d| [d, d]).collect();
                        dirs.truncate(frames - 1);
                        CharacterPlan::new(format!("thing_{i}"), format!("thing {i}"), dirs)
                    })
                    .filter(|c| !c.is_motionless())
                    .collect();
                MotionPlan::new(frames, characters).unwrap()
            })
        })
    }

    proptest! {
        #[test]
        fn bracket_round_trip(plan in arb_plan()) {
            let text = format_motion_plan(&plan);
            prop_assert_eq!(parse_motion_plan(&text, plan.frame_count()).unwrap(), plan);
        }

        #[test]
        fn json_round_trip(plan in arb_plan()) {
            prop_assert_eq!(parse_motion_plan(&plan.to_json(), plan.frame_count()).unwrap(), plan);
        }

        #[test]
        fn parsed_directions_are_labels(word in "[a-zA-Z -]{0,12}") {
            let text = format!("[\"x\": \"{word}\"]");
            if let Ok(plan) = parse_motion_plan(&text, 3) {
                for c in plan.characters() {
                    for d in &c.directions {
                        prop_assert!(Direction::ALL.contains(d));
                    }
                }
            }
        }
    }
}
