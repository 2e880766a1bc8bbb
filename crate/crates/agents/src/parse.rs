//! Extraction of messages and decisions from raw completions.
//!
//! Agents reason before they answer, and the reasoning often quotes the
//! expected format, so both extractors take the *last* match.

use std::sync::OnceLock;

use dilemma_core::Choice;
use regex::Regex;

use crate::error::AgentError;

/// Contents of the last well-formed `<…>` pair, trimmed.
pub fn extract_bracketed_message(raw: &str) -> Result<String, AgentError> {
    // A well-formed pair is a '>' preceded by a '<' with no other bracket in
    // between; scanning from the end finds the last one.
    let close = raw
        .char_indices()
        .rev()
        .filter(|&(_, c)| c == '>')
        .find_map(|(end, _)| {
            let before = &raw[..end];
            let open = before.rfind(['<', '>'])?;
            (before.as_bytes()[open] == b'<').then_some((open, end))
        });
    match close {
        Some((open, end)) => Ok(raw[open + 1..end].trim().to_string()),
        None => Err(AgentError::NoBracketedMessage),
    }
}

fn decision_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        // Group 1: bracketed/quoted token (any case). Group 2: bare token.
        Regex::new(
            r#"(?i)I\s+DECIDE\s+TO\s+CHOOSE\s*(?:[\[\(\{"'“‘*]+\s*([AB])\s*[\]\)\}"'”’*]|([AB]))"#,
        )
        .expect("static regex")
    })
}

/// The choice in the last "I DECIDE TO CHOOSE …" sentence.
///
/// The phrase is matched case-insensitively. A bracketed token may be either
/// case; a bare token must be a standalone letter, and a bare lowercase `a`
/// is only accepted at the end of the text or before punctuation so that
/// "I decide to choose a strategy" is not read as a decision.
pub fn extract_decision(raw: &str) -> Result<Choice, AgentError> {
    let mut found = None;
    for caps in decision_regex().captures_iter(raw) {
        if let Some(tok) = caps.get(1) {
            found = Some(tok.as_str());
            continue;
        }
        let tok = caps.get(2).expect("one alternative matched");
        let next = raw[tok.end()..].chars().next();
        let standalone = next.map_or(true, |c| !c.is_alphanumeric());
        let accepted = match tok.as_str() {
            "A" | "B" => standalone,
            _ => next.map_or(true, |c| c.is_ascii_punctuation() || "。，！".contains(c)),
        };
        if accepted {
            found = Some(tok.as_str());
        }
    }
    match found {
        Some(t) if t.eq_ignore_ascii_case("a") => Ok(Choice::A),
        Some(_) => Ok(Choice::B),
        None => Err(AgentError::NoDecisionFound),
    }
}

/// The surface forms a well-behaved agent produces for a decision.
pub fn format_decision(choice: Choice, bracketed: bool) -> String {
    if bracketed {
        format!("I DECIDE TO CHOOSE [{choice}]")
    } else {
        format!("I DECIDE TO CHOOSE {choice}")
    }
}
