//! Prompt to motion plan: LLM templates, answer parsing, a lexicon fallback
//! and first-frame heading hints.

mod heading;
mod lexicon;
mod parse;
mod prompt;
mod provider;
mod skeleton;

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::direction::{Direction, UnknownDirection};
use crate::motion_plan::PlanError;
use crate::skeleton::SkeletonError;

pub use heading::{resolve_heading, HeadingError, HeadingProvider, ShapeHeadingProvider, StubHeadingProvider};
pub use lexicon::{fallback_plan, FallbackPlan, Lexicon, LexiconEntry};
pub use parse::{format_motion_plan, parse_motion_plan, parse_object_list};
pub use prompt::{build_prompt, DIRECTION_VOCABULARY};
pub use provider::{moving_objects, plan_with_llm, transcript_key, HttpProvider, LlmPlan, LlmProvider, ProviderError, ReplayProvider};
pub use skeleton::{fallback_skeleton_plan, format_skeleton_plan, parse_skeleton_plan, skeleton_with_llm};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlannerError {
    #[error("user prompt is empty")]
    EmptyPrompt,
    #[error("unknown prompt kind `{0}` (expected moving_objects, directions or skeleton)")]
    UnknownKind(String),
    #[error("heading hint for `{0}` must not be motionless")]
    MotionlessHeading(String),
    #[error("parse error at byte {offset}: {message}")]
    Parse { offset: usize, message: String },
    #[error("direction `{token}` at byte {offset} is not in the vocabulary")]
    Vocabulary { token: String, offset: usize },
    #[error("character `{name}` listed twice in one group at byte {offset}")]
    DuplicateEntry { name: String, offset: usize },
    #[error("unknown skeleton node `{node}` on line {line}")]
    Schema { node: String, line: usize },
    #[error("frame {frame} on line {line} is outside 1..={max}")]
    FrameRange { frame: usize, line: usize, max: usize },
    #[error("lexicon is empty")]
    EmptyLexicon,
    #[error("invalid lexicon: {0}")]
    Lexicon(String),
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error(transparent)]
    Skeleton(#[from] SkeletonError),
    #[error(transparent)]
    Provider(#[from] ProviderError),
}

impl PlannerError {
    pub(crate) fn vocabulary(err: UnknownDirection, offset: usize) -> PlannerError {
        PlannerError::Vocabulary { token: err.0, offset }
    }
}

/// Which of the LLM commands to render.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PromptKind {
    MovingObjects,
    Directions,
    Skeleton,
}

impl FromStr for PromptKind {
    type Err = PlannerError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_lowercase().replace('-', "_").as_str() {
            "moving_objects" => Ok(PromptKind::MovingObjects),
            "directions" => Ok(PromptKind::Directions),
            "skeleton" => Ok(PromptKind::Skeleton),
            _ => Err(PlannerError::UnknownKind(s.to_string())),
        }
    }
}

impl fmt::Display for PromptKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PromptKind::MovingObjects => "moving_objects",
            PromptKind::Directions => "directions",
            PromptKind::Skeleton => "skeleton",
        })
    }
}

/// Which way a character faces in the first frame.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HeadingHint {
    character: String,
    heading: Direction,
}

impl HeadingHint {
    pub fn new(character: impl Into<String>, heading: Direction) -> Result<Self, PlannerError> {
        let character = character.into();
        if heading.is_motionless() {
            return Err(PlannerError::MotionlessHeading(character));
        }
        Ok(HeadingHint { character, heading })
    }

    pub fn character(&self) -> &str {
        &self.character
    }

    pub fn heading(&self) -> Direction {
        self.heading
    }
}

/// Character identifier for a free-text phrase: lower case, words joined by
/// `_`.
pub fn character_name(phrase: &str) -> String {
    phrase
        .split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join("_")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kinds_parse() {
        assert_eq!("moving_objects".parse::<PromptKind>().unwrap(), PromptKind::MovingObjects);
        assert_eq!("Directions".parse::<PromptKind>().unwrap(), PromptKind::Directions);
        assert!(matches!("captions".parse::<PromptKind>(), Err(PlannerError::UnknownKind(_))));
    }

    #[test]
    fn heading_rejects_motionless() {
        assert!(HeadingHint::new("airplane", Direction::Motionless).is_err());
        assert_eq!(HeadingHint::new("airplane", Direction::Left).unwrap().heading(), Direction::Left);
    }

    #[test]
    fn names_from_phrases() {
        assert_eq!(character_name("Left Hand"), "left_hand");
        assert_eq!(character_name("  hot-air balloon "), "hot_air_balloon");
    }
}
