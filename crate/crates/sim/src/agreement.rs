//! Rule-based agreement detection for simulated conversations.
//!
//! A message proposes mutual cooperation when it names option A and never
//! names option B. Two agents agree when each sent at least one such
//! message.

use std::sync::OnceLock;

use regex::Regex;

fn option_token(letter: char) -> &'static Regex {
    static A: OnceLock<Regex> = OnceLock::new();
    static B: OnceLock<Regex> = OnceLock::new();
    let cell = if letter == 'A' { &A } else { &B };
    // Standalone capital letter: not glued to other Latin letters or
    // digits, so "AI" or "B2B" do not count. CJK text around it is fine.
    cell.get_or_init(|| Regex::new(&format!(r"(?:^|[^A-Za-z0-9]){letter}(?:$|[^A-Za-z0-9])")).unwrap())
}

pub fn proposes_mutual_a(message: &str) -> bool {
    option_token('A').is_match(message) && !option_token('B').is_match(message)
}

/// Both sides proposed mutual A in at least one of their messages.
pub fn detect_agreement<S: AsRef<str>>(messages_a: &[S], messages_b: &[S]) -> bool {
    let any = |ms: &[S]| ms.iter().any(|m| proposes_mutual_a(m.as_ref()));
    any(messages_a) && any(messages_b)
}
