//! The extended label grammar.
//!
//! ```text
//! label    := class | class "." onset | class "." onset "." position "." duration
//! class    := [A-Za-z][A-Za-z0-9_]*
//! onset    := rational
//! duration := rational
//! position := "-"? digits
//! rational := "-"? digits ( "/" digits )?
//! ```
//!
//! Rationals never contain `.`, so splitting on `.` is unambiguous. Three
//! fields are not a valid arity.

use std::fmt;
use std::str::FromStr;

use super::rational::Rational;
use crate::error::{Error, Result};

/// Timing and staff placement carried by a label, beyond the class name.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Musical {
    None,
    Onset(Rational),
    Note {
        onset: Rational,
        rel_position: i64,
        duration: Rational,
    },
}

/// A parsed label: class name plus optional onset, relative staff position and
/// duration. The position and duration always come together, and only after
/// an onset.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Label {
    class_name: String,
    musical: Musical,
}

pub fn is_valid_class_name(name: &str) -> bool {
    let mut bytes = name.bytes();
    matches!(bytes.next(), Some(b) if b.is_ascii_alphabetic()) && bytes.all(|b| b.is_ascii_alphanumeric() || b == b'_')
}

fn check_class(name: &str) -> Result<()> {
    if is_valid_class_name(name) {
        Ok(())
    } else {
        Err(Error::MalformedLabel {
            label: name.to_string(),
            reason: "class name must match [A-Za-z][A-Za-z0-9_]*".into(),
        })
    }
}

impl Label {
    pub fn bare(class_name: impl Into<String>) -> Result<Self> {
        Self::new(class_name, Musical::None)
    }

    pub fn with_onset(class_name: impl Into<String>, onset: Rational) -> Result<Self> {
        Self::new(class_name, Musical::Onset(onset))
    }

    pub fn note(class_name: impl Into<String>, onset: Rational, rel_position: i64, duration: Rational) -> Result<Self> {
        Self::new(
            class_name,
            Musical::Note {
                onset,
                rel_position,
                duration,
            },
        )
    }

    pub fn new(class_name: impl Into<String>, musical: Musical) -> Result<Self> {
        let class_name = class_name.into();
        check_class(&class_name)?;
        Ok(Self { class_name, musical })
    }

    pub fn class_name(&self) -> &str {
        &self.class_name
    }

    pub fn musical(&self) -> Musical {
        self.musical
    }

    pub fn onset(&self) -> Option<Rational> {
        match self.musical {
            Musical::None => None,
            Musical::Onset(o) | Musical::Note { onset: o, .. } => Some(o),
        }
    }

    pub fn rel_position(&self) -> Option<i64> {
        match self.musical {
            Musical::Note { rel_position, .. } => Some(rel_position),
            _ => None,
        }
    }

    pub fn duration(&self) -> Option<Rational> {
        match self.musical {
            Musical::Note { duration, .. } => Some(duration),
            _ => None,
        }
    }

    /// Same class, no onset/position/duration.
    pub fn to_bare(&self) -> Label {
        Label {
            class_name: self.class_name.clone(),
            musical: Musical::None,
        }
    }
}

/// Parses a label string; see the module docs for the grammar.
pub fn parse_label(s: &str) -> Result<Label> {
    let malformed = |reason: String| Error::MalformedLabel {
        label: s.to_string(),
        reason,
    };
    let fields: Vec<&str> = s.split('.').collect();
    let class = fields[0];
    if !is_valid_class_name(class) {
        return Err(malformed("class name must match [A-Za-z][A-Za-z0-9_]*".into()));
    }
    let rational = |f: &str, what: &str| -> Result<Rational> {
        f.parse::<Rational>().map_err(|e| malformed(format!("bad {what}: {e}")))
    };
    let musical = match fields.len() {
        1 => Musical::None,
        2 => Musical::Onset(rational(fields[1], "onset")?),
        4 => {
            let onset = rational(fields[1], "onset")?;
            let pos = fields[2];
            let digits = pos.strip_prefix('-').unwrap_or(pos);
            if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
                return Err(malformed(format!("bad relative position {pos:?}")));
            }
            let rel_position = pos
                .parse::<i64>()
                .map_err(|_| malformed(format!("relative position {pos:?} out of range")))?;
            let duration = rational(fields[3], "duration")?;
            Musical::Note {
                onset,
                rel_position,
                duration,
            }
        }
        n => return Err(malformed(format!("{n} fields; expected 1, 2 or 4"))),
    };
    Ok(Label {
        class_name: class.to_string(),
        musical,
    })
}

/// Canonical text form: rationals in lowest terms, integers without `/1`.
pub fn serialize_label(label: &Label) -> String {
    label.to_string()
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.class_name)?;
        match self.musical {
            Musical::None => Ok(()),
            Musical::Onset(o) => write!(f, ".{o}"),
            Musical::Note {
                onset,
                rel_position,
                duration,
            } => write!(f, ".{onset}.{rel_position}.{duration}"),
        }
    }
}

impl FromStr for Label {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        parse_label(s)
    }
}
