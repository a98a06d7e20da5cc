//! Scripted conversations for the dialog simulator.
//!
//! One directive per line: `U: text` is a user turn, `S: text` an expected
//! system line, `@today YYYY-MM-DD` fixes the reference date. The `S:` lines
//! after a turn, joined with newlines, must equal that turn's reply exactly.
//! A turn with no `S:` lines is not checked. Blank lines and `#` comments
//! are ignored.

use chrono::NaiveDate;
use flightstat::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Turn {
    /// None for the greeting.
    pub user: Option<String>,
    pub expected: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Script {
    pub today: Option<NaiveDate>,
    pub turns: Vec<Turn>,
}

pub fn parse_script(text: &str) -> Result<Script> {
    let mut today = None;
    let mut turns = vec![Turn {
        user: None,
        expected: Vec::new(),
    }];
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim_end();
        let trimmed = line.trim_start();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let bad = || Error::Argument(format!("script line {}: cannot read {line:?}", i + 1));
        if let Some(date) = trimmed.strip_prefix("@today") {
            today = Some(NaiveDate::parse_from_str(date.trim(), "%Y-%m-%d").map_err(|_| bad())?);
        } else if let Some(user) = trimmed.strip_prefix("U:") {
            turns.push(Turn {
                user: Some(user.trim().to_string()),
                expected: Vec::new(),
            });
        } else if let Some(system) = trimmed.strip_prefix("S:") {
            let system = system.strip_prefix(' ').unwrap_or(system);
            turns
                .last_mut()
                .expect("greeting turn")
                .expected
                .push(system.to_string());
        } else {
            return Err(bad());
        }
    }
    Ok(Script { today, turns })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_turns_and_expectations() {
        let s = parse_script("# demo\n@today 2026-10-01\nS: Hi\nS:  indented\n\nU: add a flight\nS: Where?\nU: Boston\n").unwrap();
        assert_eq!(s.today, NaiveDate::from_ymd_opt(2026, 10, 1));
        assert_eq!(s.turns.len(), 3);
        assert_eq!(s.turns[0].expected, ["Hi", " indented"]);
        assert_eq!(s.turns[1].user.as_deref(), Some("add a flight"));
        assert!(s.turns[2].expected.is_empty());
    }

    #[test]
    fn rejects_unknown_directives() {
        assert!(parse_script("X: what").is_err());
        assert!(parse_script("@today someday").is_err());
    }
}
