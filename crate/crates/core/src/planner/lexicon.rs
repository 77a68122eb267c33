//! Offline plan compiler: verb lexicon plus explicit direction words.

use std::collections::BTreeMap;

use serde::Deserialize;

use crate::direction::Direction;
use crate::motion_plan::{CharacterPlan, MotionPlan};

use super::{character_name, PlannerError};

const DEFAULT_LEXICON: &str = include_str!("default_lexicon.json");

/// Motion attached to a verb phrase.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LexiconEntry {
    Constant(Direction),
    /// First direction for the first half of the video, second for the rest.
    TwoStage(Direction, Direction),
}

impl LexiconEntry {
    /// First stage gets `⌊(F − 1) / 2⌋` transitions.
    fn expand(self, transitions: usize) -> Vec<Direction> {
        match self {
            LexiconEntry::Constant(d) => vec![d; transitions],
            LexiconEntry::TwoStage(a, b) => {
                let first = transitions / 2;
                let mut out = vec![a; first];
                out.resize(transitions, b);
                out
            }
        }
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RawEntry {
    One(String),
    Many(Vec<String>),
}

/// Verb phrase table. Phrases are matched on whole lower-case words,
/// longest first.
#[derive(Debug, Clone, PartialEq)]
pub struct Lexicon {
    entries: Vec<(Vec<String>, LexiconEntry)>,
}

impl Default for Lexicon {
    fn default() -> Self {
        Lexicon::from_json(DEFAULT_LEXICON).expect("shipped lexicon is valid")
    }
}

impl Lexicon {
    /// Parses a JSON object mapping phrases to a direction label or a list
    /// of one or two labels.
    pub fn from_json(text: &str) -> Result<Lexicon, PlannerError> {
        let raw: BTreeMap<String, RawEntry> =
            serde_json::from_str(text).map_err(|e| PlannerError::Lexicon(e.to_string()))?;
        if raw.is_empty() {
            return Err(PlannerError::EmptyLexicon);
        }
        let parse = |phrase: &str, label: &str| {
            Direction::fuzzy_parse(label).map_err(|_| PlannerError::Lexicon(format!("`{phrase}`: unknown direction `{label}`")))
        };
        let mut entries = Vec::with_capacity(raw.len());
        for (phrase, value) in raw {
            let entry = match &value {
                RawEntry::One(d) => LexiconEntry::Constant(parse(&phrase, d)?),
                RawEntry::Many(list) => match list.as_slice() {
                    [d] => LexiconEntry::Constant(parse(&phrase, d)?),
                    [a, b] => LexiconEntry::TwoStage(parse(&phrase, a)?, parse(&phrase, b)?),
                    _ => {
                        return Err(PlannerError::Lexicon(format!(
                            "`{phrase}`: expected one or two directions, got {}",
                            list.len()
                        )))
                    }
                },
            };
            let words = words(&phrase);
            if words.is_empty() {
                return Err(PlannerError::Lexicon("empty phrase".into()));
            }
            entries.push((words, entry));
        }
        // Longest phrase first; ties keep the map's alphabetical order.
        entries.sort_by(|a, b| b.0.len().cmp(&a.0.len()));
        Ok(Lexicon { entries })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Longest entry matching at `words[at..]`, with its word count.
    fn match_at(&self, words: &[String], at: usize) -> Option<(usize, LexiconEntry)> {
        self.entries
            .iter()
            .find(|(phrase, _)| words[at..].starts_with(phrase))
            .map(|(phrase, e)| (phrase.len(), *e))
    }
}

/// A fallback plan and anything the caller should surface.
#[derive(Debug, Clone, PartialEq)]
pub struct FallbackPlan {
    pub plan: MotionPlan,
    pub warnings: Vec<String>,
}

fn words(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(str::to_string)
        .collect()
}

const STOP: &[&str] = &[
    "a", "an", "the", "and", "with", "of", "on", "in", "at", "to", "over", "under", "into", "onto", "from", "by",
    "while", "as", "its", "his", "her", "their", "this", "that", "across", "through", "towards", "toward", "then",
];
const AUX: &[&str] = &[
    "is", "are", "was", "were", "be", "been", "being", "am", "slowly", "quickly", "gently", "steadily", "fast", "also",
    "just", "now",
];
const FILLER: &[&str] = &["to", "the", "towards", "toward", "its", "his", "her", "their"];
const MOTION_VERBS: &[&str] = &[
    "move", "moves", "go", "goes", "fly", "flies", "run", "runs", "walk", "walks", "drive", "drives", "swim", "swims",
    "roll", "rolls", "slide", "slides", "sail", "sails", "drift", "drifts", "float", "floats", "head", "heads",
    "travel", "travels", "pan", "pans", "glide", "glides", "crawl", "crawls", "turn", "turns",
];

fn axis_word(w: &str) -> Option<&'static str> {
    match w {
        "left" | "leftward" | "leftwards" => Some("left"),
        "right" | "rightward" | "rightwards" => Some("right"),
        "up" | "upward" | "upwards" | "upstairs" => Some("up"),
        "down" | "downward" | "downwards" | "downstairs" => Some("down"),
        _ => None,
    }
}

fn is_verb(w: &str) -> bool {
    (w.len() > 4 && w.ends_with("ing")) || MOTION_VERBS.contains(&w)
}

/// Direction spelled out at `words[at..]` (`right`, `left and down`), with
/// its word count.
fn direction_span(words: &[String], at: usize) -> Option<(usize, Direction)> {
    let first = axis_word(&words[at])?;
    let mut len = 1;
    let mut parts = vec![first];
    let next = |i: usize| words.get(i).and_then(|w| axis_word(w));
    if let Some(second) = next(at + 1) {
        parts.push(second);
        len = 2;
    } else if words.get(at + 1).is_some_and(|w| w == "and") {
        if let Some(second) = next(at + 2) {
            parts.push(second);
            len = 3;
        }
    }
    let direction = Direction::fuzzy_parse(&parts.join(" "))
        .or_else(|_| Direction::fuzzy_parse(first))
        .ok()?;
    Some((len, direction))
}

/// Noun phrase ending right before `end`, after skipping auxiliaries and,
/// when `skip_verbs`, fillers and the verb itself.
fn subject_before(words: &[String], end: usize, skip_verbs: bool) -> Option<Vec<String>> {
    let mut i = end;
    while i > 0 {
        let w = words[i - 1].as_str();
        let skippable = AUX.contains(&w) || (skip_verbs && (FILLER.contains(&w) || is_verb(w)));
        if !skippable {
            break;
        }
        i -= 1;
    }
    let stop = i;
    while i > 0 && stop - i < 3 {
        let w = words[i - 1].as_str();
        if STOP.contains(&w) || AUX.contains(&w) || is_verb(w) || axis_word(w).is_some() {
            break;
        }
        i -= 1;
    }
    (i < stop).then(|| words[i..stop].to_vec())
}

/// Whether a direction span at `at` follows a motion verb, so positional
/// phrases like "on the left" do not count.
fn follows_verb(words: &[String], at: usize) -> bool {
    let mut i = at;
    while i > 0 && FILLER.contains(&words[i - 1].as_str()) {
        i -= 1;
    }
    i > 0 && is_verb(&words[i - 1])
}

/// Compiles a plan without an LLM. Each lexicon verb, or motion verb
/// followed by direction words, gives the noun phrase before it a constant
/// or two-stage direction list; the first cue per noun phrase wins.
pub fn fallback_plan(user_prompt: &str, frame_count: usize, lexicon: &Lexicon) -> Result<FallbackPlan, PlannerError> {
    if lexicon.is_empty() {
        return Err(PlannerError::EmptyLexicon);
    }
    if frame_count < 2 {
        return Err(crate::motion_plan::PlanError::TooFewFrames(frame_count).into());
    }
    let transitions = frame_count - 1;
    let words = words(user_prompt);
    let mut characters: Vec<CharacterPlan> = Vec::new();
    let mut at = 0;
    while at < words.len() {
        let cue = if let Some((len, entry)) = lexicon.match_at(&words, at) {
            Some((len, entry, subject_before(&words, at, false)))
        } else if let Some((len, d)) = direction_span(&words, at).filter(|_| follows_verb(&words, at)) {
            Some((len, LexiconEntry::Constant(d), subject_before(&words, at, true)))
        } else {
            None
        };
        match cue {
            Some((len, entry, subject)) => {
                if let Some(subject) = subject {
                    let phrase = subject.join(" ");
                    let name = character_name(&phrase);
                    if !characters.iter().any(|c| c.name == name) {
                        characters.push(CharacterPlan::new(name, phrase, entry.expand(transitions)));
                    }
                }
                at += len;
            }
            None => at += 1,
        }
    }
    let mut warnings = Vec::new();
    if characters.is_empty() {
        warnings.push("no motion cue found in the prompt; using a motionless plan".to_string());
        let noun = words
            .iter()
            .find(|w| !STOP.contains(&w.as_str()) && !AUX.contains(&w.as_str()))
            .cloned()
            .unwrap_or_else(|| "subject".to_string());
        characters.push(CharacterPlan::new(character_name(&noun), noun, vec![Direction::Motionless; transitions]));
    }
    Ok(FallbackPlan {
        plan: MotionPlan::new(frame_count, characters)?,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use Direction::*;

    fn plan(prompt: &str, frames: usize) -> FallbackPlan {
        fallback_plan(prompt, frames, &Lexicon::default()).unwrap()
    }

    #[test]
    fn airplane_lands() {
        let p = plan("airplane landing on the runway", 8);
        assert!(p.warnings.is_empty());
        assert_eq!(p.plan.characters().len(), 1);
        assert_eq!(p.plan.character("airplane").unwrap().directions, vec![Down; 7]);
        let p = plan("An airplane is landing on the runway.", 8);
        assert_eq!(p.plan.character("airplane").unwrap().directions, vec![Down; 7]);
    }

    #[test]
    fn horse_jumps_in_two_stages() {
        let p = plan("a horse jumping over an obstacle", 8);
        let want = [vec![Up; 3], vec![Down; 4]].concat();
        assert_eq!(p.plan.character("horse").unwrap().directions, want);
    }

    #[test]
    fn standing_man_is_motionless_with_warning() {
        let p = plan("a man standing", 8);
        assert_eq!(p.warnings.len(), 1);
        assert!(p.plan.characters()[0].is_motionless());
        assert_eq!(p.plan.characters()[0].name, "man");
    }

    #[test]
    fn explicit_directions() {
        let p = plan("a red square moving right and a blue circle moving to the left", 4);
        assert_eq!(p.plan.character("red_square").unwrap().directions, vec![Right; 3]);
        assert_eq!(p.plan.character("red_square").unwrap().phrase, "red square");
        assert_eq!(p.plan.character("blue_circle").unwrap().directions, vec![Left; 3]);
        let p = plan("a man skiing right down the slope", 3);
        assert_eq!(p.plan.character("man").unwrap().directions, vec![RightDown; 2]);
        let p = plan("a cat on the left sleeps", 3);
        assert_eq!(p.warnings.len(), 1);
    }

    #[test]
    fn deterministic() {
        let lex = Lexicon::default();
        let a = fallback_plan("the sun rising over the sea", 8, &lex).unwrap();
        let b = fallback_plan("the sun rising over the sea", 8, &lex).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.plan.character("sun").unwrap().directions, vec![Up; 7]);
    }

    #[test]
    fn lexicon_validation() {
        assert_eq!(Lexicon::from_json("{}"), Err(PlannerError::EmptyLexicon));
        assert!(matches!(Lexicon::from_json("{\"go\": \"sideways\"}"), Err(PlannerError::Lexicon(_))));
        assert!(matches!(
            Lexicon::from_json("{\"go\": [\"up\", \"down\", \"up\"]}"),
            Err(PlannerError::Lexicon(_))
        ));
        let custom = Lexicon::from_json("{\"zooming\": \"right\"}").unwrap();
        let p = fallback_plan("a car zooming past", 3, &custom).unwrap();
        assert_eq!(p.plan.character("car").unwrap().directions, vec![Right; 2]);
    }
}
