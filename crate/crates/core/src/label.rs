//! The eighteen game-result classes.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

pub const NUM_CLASSES: usize = 18;

pub const MAX_DEPTH: u8 = 16;

const NAMES: [&str; NUM_CLASSES] = [
    "draw", "zero", "one", "two", "three", "four", "five", "six", "seven", "eight", "nine", "ten", "eleven", "twelve",
    "thirteen", "fourteen", "fifteen", "sixteen",
];

/// Game-theoretic value of a position for White.
#[derive(Copy, Clone, PartialEq, Eq, Hash, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", content = "depth", rename_all = "lowercase")]
pub enum GameValue {
    Draw,
    /// Number of white moves still needed to mate, `0..=16`.
    Win(u8),
}

/// Class index in the fixed order `draw, zero, one, ..., sixteen`.
#[derive(Copy, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct ClassLabel(u8);

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LabelError {
    #[error("unknown class label {0:?}")]
    Unknown(String),
    #[error("class index {0} out of range")]
    Index(usize),
    #[error("win depth {0} exceeds {MAX_DEPTH}")]
    Depth(u8),
}

impl ClassLabel {
    pub const DRAW: ClassLabel = ClassLabel(0);

    pub fn from_index(index: usize) -> Result<Self, LabelError> {
        if index < NUM_CLASSES {
            Ok(ClassLabel(index as u8))
        } else {
            Err(LabelError::Index(index))
        }
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn name(self) -> &'static str {
        NAMES[self.0 as usize]
    }

    pub fn all() -> impl Iterator<Item = ClassLabel> {
        (0..NUM_CLASSES as u8).map(ClassLabel)
    }

    pub fn from_value(value: GameValue) -> Result<Self, LabelError> {
        match value {
            GameValue::Draw => Ok(ClassLabel::DRAW),
            GameValue::Win(d) if d <= MAX_DEPTH => Ok(ClassLabel(d + 1)),
            GameValue::Win(d) => Err(LabelError::Depth(d)),
        }
    }

    pub fn value(self) -> GameValue {
        match self.0 {
            0 => GameValue::Draw,
            n => GameValue::Win(n - 1),
        }
    }
}

pub fn class_names() -> &'static [&'static str; NUM_CLASSES] {
    &NAMES
}

impl fmt::Display for ClassLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ClassLabel {
    type Err = LabelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        NAMES
            .iter()
            .position(|n| *n == s)
            .map(|i| ClassLabel(i as u8))
            .ok_or_else(|| LabelError::Unknown(s.to_string()))
    }
}

impl Serialize for ClassLabel {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for ClassLabel {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn label_value_bijection() {
        for label in ClassLabel::all() {
            assert_eq!(ClassLabel::from_value(label.value()).unwrap(), label);
            assert_eq!(label.name().parse::<ClassLabel>().unwrap(), label);
        }
        assert_eq!(ClassLabel::from_value(GameValue::Win(1)).unwrap().name(), "one");
        assert_eq!(ClassLabel::from_value(GameValue::Win(16)).unwrap().name(), "sixteen");
        assert!(ClassLabel::from_value(GameValue::Win(17)).is_err());
        assert!("seventeen".parse::<ClassLabel>().is_err());
    }
}
