//! Per-character, per-frame directional intent.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::direction::{direction_to_delta, Delta, Direction};

/// Name reserved for the implicit motionless background layer.
pub const BACKGROUND_NAME: &str = "background";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PlanError {
    #[error("frame count must be at least 2, got {0}")]
    TooFewFrames(usize),
    #[error("character `{name}` has {got} directions, expected {expected}")]
    WrongLength {
        name: String,
        got: usize,
        expected: usize,
    },
    #[error("duplicate character name `{0}`")]
    DuplicateName(String),
    #[error("`{BACKGROUND_NAME}` is implicit and cannot be listed as a character")]
    ExplicitBackground,
    #[error("character name must not be empty")]
    EmptyName,
    #[error("character `{0}` not found in plan")]
    UnknownCharacter(String),
}

/// One moving character: a name, the phrase used to segment it, and one
/// direction per frame transition.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CharacterPlan {
    pub name: String,
    pub phrase: String,
    pub directions: Vec<Direction>,
}

impl CharacterPlan {
    pub fn new(name: impl Into<String>, phrase: impl Into<String>, directions: Vec<Direction>) -> Self {
        CharacterPlan {
            name: name.into(),
            phrase: phrase.into(),
            directions,
        }
    }

    pub fn is_motionless(&self) -> bool {
        self.directions.iter().all(|d| d.is_motionless())
    }

    /// Delta applied when moving into frame `k` (`1 ≤ k < F`).
    pub fn delta_into(&self, k: usize, sigma: u32) -> Delta {
        direction_to_delta(self.directions[k - 1], sigma)
    }
}

/// A validated motion plan. The background is never listed; it is the
/// implicit last, motionless layer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MotionPlan {
    frame_count: usize,
    characters: Vec<CharacterPlan>,
}

#[derive(Deserialize)]
struct RawPlan {
    frame_count: usize,
    characters: Vec<CharacterPlan>,
}

impl<'de> Deserialize<'de> for MotionPlan {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = RawPlan::deserialize(deserializer)?;
        MotionPlan::new(raw.frame_count, raw.characters).map_err(serde::de::Error::custom)
    }
}

impl MotionPlan {
    pub fn new(frame_count: usize, characters: Vec<CharacterPlan>) -> Result<Self, PlanError> {
        if frame_count < 2 {
            return Err(PlanError::TooFewFrames(frame_count));
        }
        let mut seen = HashSet::new();
        for c in &characters {
            if c.name.trim().is_empty() {
                return Err(PlanError::EmptyName);
            }
            if c.name == BACKGROUND_NAME {
                return Err(PlanError::ExplicitBackground);
            }
            if !seen.insert(c.name.as_str()) {
                return Err(PlanError::DuplicateName(c.name.clone()));
            }
            if c.directions.len() != frame_count - 1 {
                return Err(PlanError::WrongLength {
                    name: c.name.clone(),
                    got: c.directions.len(),
                    expected: frame_count - 1,
                });
            }
        }
        Ok(MotionPlan {
            frame_count,
            characters,
        })
    }

    /// Plan with no moving characters.
    pub fn still(frame_count: usize) -> Result<Self, PlanError> {
        MotionPlan::new(frame_count, Vec::new())
    }

    pub fn frame_count(&self) -> usize {
        self.frame_count
    }

    pub fn transitions(&self) -> usize {
        self.frame_count - 1
    }

    pub fn characters(&self) -> &[CharacterPlan] {
        &self.characters
    }

    pub fn character(&self, name: &str) -> Option<&CharacterPlan> {
        self.characters.iter().find(|c| c.name == name)
    }

    pub fn into_characters(self) -> Vec<CharacterPlan> {
        self.characters
    }

    /// Drops characters that never move; they belong to the background.
    pub fn fold_motionless(self) -> MotionPlan {
        let frame_count = self.frame_count;
        let characters = self
            .characters
            .into_iter()
            .filter(|c| !c.is_motionless())
            .collect();
        MotionPlan {
            frame_count,
            characters,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plan serialises")
    }

    pub fn from_json(text: &str) -> Result<MotionPlan, serde_json::Error> {
        serde_json::from_str(text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use Direction::*;

    #[test]
    fn rejects_wrong_direction_count() {
        let err = MotionPlan::new(8, vec![CharacterPlan::new("man", "man", vec![Right; 8])]).unwrap_err();
        assert_eq!(
            err,
            PlanError::WrongLength {
                name: "man".into(),
                got: 8,
                expected: 7
            }
        );
        assert!(MotionPlan::new(8, vec![CharacterPlan::new("man", "man", vec![Right; 6])]).is_err());
        assert!(MotionPlan::new(8, vec![CharacterPlan::new("man", "man", vec![Right; 7])]).is_ok());
    }

    #[test]
    fn rejects_duplicates_background_and_short_videos() {
        let a = CharacterPlan::new("cat", "cat", vec![Left]);
        assert_eq!(
            MotionPlan::new(2, vec![a.clone(), a.clone()]).unwrap_err(),
            PlanError::DuplicateName("cat".into())
        );
        let bg = CharacterPlan::new(BACKGROUND_NAME, "scene", vec![Left]);
        assert_eq!(MotionPlan::new(2, vec![bg]).unwrap_err(), PlanError::ExplicitBackground);
        assert_eq!(MotionPlan::new(1, vec![]).unwrap_err(), PlanError::TooFewFrames(1));
    }

    #[test]
    fn json_schema_matches_document_shape() {
        let plan = MotionPlan::new(
            3,
            vec![CharacterPlan::new("man", "a man", vec![RightDown, Right])],
        )
        .unwrap();
        let value: serde_json::Value = serde_json::from_str(&plan.to_json()).unwrap();
        assert_eq!(
            value,
            serde_json::json!({
                "frame_count": 3,
                "characters": [{"name": "man", "phrase": "a man", "directions": ["right_down", "right"]}]
            })
        );
        assert_eq!(MotionPlan::from_json(&plan.to_json()).unwrap(), plan);
    }

    #[test]
    fn deserialisation_validates() {
        let bad = r#"{"frame_count": 4, "characters": [{"name": "x", "phrase": "x", "directions": ["up"]}]}"#;
        assert!(MotionPlan::from_json(bad).is_err());
    }

    #[test]
    fn fold_drops_static_characters() {
        let plan = MotionPlan::new(
            3,
            vec![
                CharacterPlan::new("plane", "plane", vec![Down, Down]),
                CharacterPlan::new("runway", "runway", vec![Motionless, Motionless]),
            ],
        )
        .unwrap()
        .fold_motionless();
        assert_eq!(plan.characters().len(), 1);
        assert_eq!(plan.characters()[0].name, "plane");
    }
}
