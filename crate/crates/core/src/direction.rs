//! The nine-label direction vocabulary and its lattice offsets.
//!
//! Coordinates are raster-ordered: `x` grows rightward and `y` grows
//! downward, so "up" is a negative `dy`. Diagonals move a full step on both
//! axes; nothing is normalised, which keeps every warp grid-aligned.

use std::fmt;
use std::ops::{Add, Mul, Neg};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A per-frame motion label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Motionless,
    Left,
    Right,
    Up,
    Down,
    LeftUp,
    LeftDown,
    RightUp,
    RightDown,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown direction `{0}`")]
pub struct UnknownDirection(pub String);

impl Direction {
    pub const ALL: [Direction; 9] = [
        Direction::Motionless,
        Direction::Left,
        Direction::Right,
        Direction::Up,
        Direction::Down,
        Direction::LeftDown,
        Direction::LeftUp,
        Direction::RightDown,
        Direction::RightUp,
    ];

    /// The eight moving labels.
    pub const MOVING: [Direction; 8] = [
        Direction::Left,
        Direction::Right,
        Direction::Up,
        Direction::Down,
        Direction::LeftDown,
        Direction::LeftUp,
        Direction::RightDown,
        Direction::RightUp,
    ];

    /// Canonical machine label, as used in plan JSON (`right_down`).
    pub fn label(self) -> &'static str {
        match self {
            Direction::Motionless => "motionless",
            Direction::Left => "left",
            Direction::Right => "right",
            Direction::Up => "up",
            Direction::Down => "down",
            Direction::LeftUp => "left_up",
            Direction::LeftDown => "left_down",
            Direction::RightUp => "right_up",
            Direction::RightDown => "right_down",
        }
    }

    /// Human phrasing used inside LLM prompts (`right down`).
    pub fn phrase(self) -> &'static str {
        match self {
            Direction::LeftUp => "left up",
            Direction::LeftDown => "left down",
            Direction::RightUp => "right up",
            Direction::RightDown => "right down",
            other => other.label(),
        }
    }

    pub fn is_motionless(self) -> bool {
        self == Direction::Motionless
    }

    pub fn opposite(self) -> Direction {
        match self {
            Direction::Motionless => Direction::Motionless,
            Direction::Left => Direction::Right,
            Direction::Right => Direction::Left,
            Direction::Up => Direction::Down,
            Direction::Down => Direction::Up,
            Direction::LeftUp => Direction::RightDown,
            Direction::LeftDown => Direction::RightUp,
            Direction::RightUp => Direction::LeftDown,
            Direction::RightDown => Direction::LeftUp,
        }
    }

    /// Unit lattice step `(sx, sy)` with components in `{-1, 0, 1}`.
    pub fn unit(self) -> (i32, i32) {
        match self {
            Direction::Motionless => (0, 0),
            Direction::Left => (-1, 0),
            Direction::Right => (1, 0),
            Direction::Up => (0, -1),
            Direction::Down => (0, 1),
            Direction::LeftUp => (-1, -1),
            Direction::LeftDown => (-1, 1),
            Direction::RightUp => (1, -1),
            Direction::RightDown => (1, 1),
        }
    }

    fn from_unit(sx: i32, sy: i32) -> Direction {
        match (sx.signum(), sy.signum()) {
            (0, 0) => Direction::Motionless,
            (-1, 0) => Direction::Left,
            (1, 0) => Direction::Right,
            (0, -1) => Direction::Up,
            (0, 1) => Direction::Down,
            (-1, -1) => Direction::LeftUp,
            (-1, 1) => Direction::LeftDown,
            (1, -1) => Direction::RightUp,
            _ => Direction::RightDown,
        }
    }

    /// Tolerant matching for free-form LLM output.
    ///
    /// Case, surrounding quotes and separators (space, `-`, `_`) are
    /// ignored, and diagonal components may come in either order
    /// (`"Down Right"` is `right_down`). Anything that does not reduce to one
    /// of the nine labels is rejected; no label is ever guessed.
    pub fn fuzzy_parse(token: &str) -> Result<Direction, UnknownDirection> {
        let cleaned: String = token
            .trim()
            .trim_matches(|c: char| matches!(c, '"' | '\'' | '“' | '”' | '‘' | '’' | '`' | '.'))
            .to_lowercase();
        let words: Vec<&str> = cleaned
            .split(|c: char| c.is_whitespace() || c == '-' || c == '_')
            .filter(|w| !w.is_empty())
            .collect();
        let mut sx = 0;
        let mut sy = 0;
        match words.as_slice() {
            ["motionless"] => return Ok(Direction::Motionless),
            [one] => apply_axis(one, &mut sx, &mut sy).ok_or_else(|| unknown(token))?,
            [a, b] => {
                apply_axis(a, &mut sx, &mut sy).ok_or_else(|| unknown(token))?;
                apply_axis(b, &mut sx, &mut sy).ok_or_else(|| unknown(token))?;
                // "left right" or "up up" are not directions.
                if sx == 0 || sy == 0 {
                    return Err(unknown(token));
                }
            }
            _ => return Err(unknown(token)),
        }
        Ok(Direction::from_unit(sx, sy))
    }
}

fn unknown(token: &str) -> UnknownDirection {
    UnknownDirection(token.trim().to_string())
}

fn apply_axis(word: &str, sx: &mut i32, sy: &mut i32) -> Option<()> {
    let (slot, value) = match word {
        "left" => (&mut *sx, -1),
        "right" => (&mut *sx, 1),
        "up" => (&mut *sy, -1),
        "down" => (&mut *sy, 1),
        _ => return None,
    };
    if *slot != 0 {
        return None;
    }
    *slot = value;
    Some(())
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Strict parsing: only the nine canonical labels are accepted.
impl FromStr for Direction {
    type Err = UnknownDirection;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Direction::ALL
            .into_iter()
            .find(|d| d.label() == s)
            .ok_or_else(|| UnknownDirection(s.to_string()))
    }
}

/// A signed translation in grid cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct Delta {
    pub dx: i32,
    pub dy: i32,
}

impl Delta {
    pub const ZERO: Delta = Delta { dx: 0, dy: 0 };

    pub fn new(dx: i32, dy: i32) -> Self {
        Delta { dx, dy }
    }

    pub fn is_zero(self) -> bool {
        self == Delta::ZERO
    }

    /// True when the shift keeps at least one cell of a `width`×`height` grid.
    pub fn fits(self, width: usize, height: usize) -> bool {
        (self.dx.unsigned_abs() as usize) < width && (self.dy.unsigned_abs() as usize) < height
    }
}

impl Neg for Delta {
    type Output = Delta;
    fn neg(self) -> Delta {
        Delta::new(-self.dx, -self.dy)
    }
}

impl Add for Delta {
    type Output = Delta;
    fn add(self, rhs: Delta) -> Delta {
        Delta::new(self.dx + rhs.dx, self.dy + rhs.dy)
    }
}

impl Mul<i32> for Delta {
    type Output = Delta;
    fn mul(self, k: i32) -> Delta {
        Delta::new(self.dx * k, self.dy * k)
    }
}

/// Lattice offset for one frame of motion at `sigma` cells per frame.
pub fn direction_to_delta(direction: Direction, sigma: u32) -> Delta {
    let (sx, sy) = direction.unit();
    let s = sigma as i32;
    Delta::new(sx * s, sy * s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn delta_examples() {
        assert_eq!(direction_to_delta(Direction::Motionless, 4), Delta::new(0, 0));
        assert_eq!(direction_to_delta(Direction::Right, 4), Delta::new(4, 0));
        assert_eq!(direction_to_delta(Direction::LeftDown, 4), Delta::new(-4, 4));
        assert_eq!(direction_to_delta(Direction::Up, 2), Delta::new(0, -2));
    }

    #[test]
    fn strict_parse_accepts_exactly_nine_labels() {
        for d in Direction::ALL {
            assert_eq!(d.label().parse::<Direction>().unwrap(), d);
        }
        assert!("sideways".parse::<Direction>().is_err());
        assert!("right down".parse::<Direction>().is_err());
        assert!("Right".parse::<Direction>().is_err());
    }

    #[test]
    fn fuzzy_parse_normalises_case_and_separators() {
        assert_eq!(Direction::fuzzy_parse("right down").unwrap(), Direction::RightDown);
        assert_eq!(Direction::fuzzy_parse(" Down-Right ").unwrap(), Direction::RightDown);
        assert_eq!(Direction::fuzzy_parse("\"LEFT_UP\"").unwrap(), Direction::LeftUp);
        assert_eq!(Direction::fuzzy_parse("Motionless").unwrap(), Direction::Motionless);
        assert_eq!(Direction::fuzzy_parse("up").unwrap(), Direction::Up);
    }

    #[test]
    fn fuzzy_parse_never_invents_labels() {
        for bad in ["sideways", "left right", "up up", "", "right down left", "upward", "still"] {
            let err = Direction::fuzzy_parse(bad).unwrap_err();
            assert_eq!(err.0, bad.trim());
        }
    }

    #[test]
    fn serde_uses_snake_labels() {
        let json = serde_json::to_string(&Direction::RightDown).unwrap();
        assert_eq!(json, "\"right_down\"");
        let back: Direction = serde_json::from_str("\"left_up\"").unwrap();
        assert_eq!(back, Direction::LeftUp);
        assert!(serde_json::from_str::<Direction>("\"sideways\"").is_err());
    }

    fn any_direction() -> impl Strategy<Value = Direction> {
        prop::sample::select(Direction::ALL.to_vec())
    }

    proptest! {
        #[test]
        fn opposite_negates_delta(d in any_direction(), sigma in 1u32..64) {
            prop_assert_eq!(direction_to_delta(d, sigma), -direction_to_delta(d.opposite(), sigma));
            prop_assert_eq!(d.opposite().opposite(), d);
        }

        #[test]
        fn phrase_and_label_both_fuzzy_parse(d in any_direction()) {
            prop_assert_eq!(Direction::fuzzy_parse(d.phrase()).unwrap(), d);
            prop_assert_eq!(Direction::fuzzy_parse(d.label()).unwrap(), d);
        }
    }
}
