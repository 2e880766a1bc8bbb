//! Comprehension quiz gating the first round.

use dilemma_core::PayoffMatrix;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuizItem {
    pub question: String,
    #[serde(default)]
    pub options: Vec<String>,
    pub answer: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuizOutcome {
    Pass,
    Retake,
}

/// Pass only when every item is answered correctly (surrounding whitespace
/// and letter case are ignored). There is no attempt limit.
pub fn quiz_gate(answers: &[String], key: &[QuizItem]) -> QuizOutcome {
    let correct = answers.len() == key.len()
        && answers
            .iter()
            .zip(key)
            .all(|(a, item)| a.trim().eq_ignore_ascii_case(item.answer.trim()));
    if correct {
        QuizOutcome::Pass
    } else {
        QuizOutcome::Retake
    }
}

pub fn default_quiz(payoff: &PayoffMatrix) -> Vec<QuizItem> {
    let mut points: Vec<String> = [payoff.sucker(), payoff.mutual_defect(), payoff.mutual_coop(), payoff.temptation()]
        .iter()
        .map(|p| p.to_string())
        .collect();
    points.dedup();
    let item = |question: &str, answer: i64| QuizItem {
        question: question.into(),
        options: points.clone(),
        answer: answer.to_string(),
    };
    vec![
        item(
            "You choose A and your associate chooses A. How many points do you earn?",
            payoff.mutual_coop(),
        ),
        item(
            "You choose A and your associate chooses B. How many points do you earn?",
            payoff.sucker(),
        ),
        item(
            "You choose B and your associate chooses A. How many points do you earn?",
            payoff.temptation(),
        ),
        QuizItem {
            question: "Can you be paired with the same associate in two different rounds?".into(),
            options: vec!["Yes".into(), "No".into()],
            answer: "No".into(),
        },
    ]
}
