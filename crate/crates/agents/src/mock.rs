//! Offline backends: deterministic persona policies and a scripted queue.

use std::collections::VecDeque;
use std::sync::Mutex;
use std::time::Duration;

use dilemma_core::Choice;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::backend::{Backend, CompletionRequest};
use crate::error::TransportError;
use crate::parse::format_decision;
use crate::persona::Persona;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    FirstMessage,
    SecondMessage,
    Decision,
}

impl Phase {
    /// Recognises the pipeline stage from a rendered user prompt.
    pub fn detect(prompt: &str) -> Option<Phase> {
        if prompt.contains("The communication stage is over") {
            Some(Phase::Decision)
        } else if prompt.contains("send your second message") {
            Some(Phase::SecondMessage)
        } else if prompt.contains("send your first message") {
            Some(Phase::FirstMessage)
        } else {
            None
        }
    }
}

/// What a scripted policy may condition on.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct MockContext {
    /// The agent chose A and its associate chose B in the previous round.
    pub exploited_last_round: bool,
}

impl MockContext {
    /// Reads the context back out of a decision prompt: the last history
    /// line describes the previous round.
    pub fn from_decision_prompt(prompt: &str) -> MockContext {
        let last = prompt.lines().filter(|l| l.starts_with("In round ")).last();
        MockContext {
            exploited_last_round: last
                .is_some_and(|l| l.contains("you choose A, your associate chooses B")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MockConfig {
    pub seed: u64,
    /// Probability that the selfish policy chooses B.
    pub selfish_defect_prob: f64,
    /// Probability that the fair policy breaks an agreement without having
    /// been exploited in the previous round.
    #[serde(default = "default_fair_breach")]
    pub fair_breach_prob: f64,
    /// Artificial per-call delay.
    #[serde(default, with = "opt_millis")]
    pub latency: Option<Duration>,
}

impl Default for MockConfig {
    fn default() -> Self {
        MockConfig {
            seed: 0,
            selfish_defect_prob: 1.0,
            fair_breach_prob: default_fair_breach(),
            latency: None,
        }
    }
}

fn default_fair_breach() -> f64 {
    0.1
}

mod opt_millis {
    use serde::{Deserialize, Deserializer, Serializer};
    use std::time::Duration;

    pub fn serialize<S: Serializer>(v: &Option<Duration>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(d) => s.serialize_some(&(d.as_millis() as u64)),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Duration>, D::Error> {
        Ok(Option::<u64>::deserialize(d)?.map(Duration::from_millis))
    }
}

const PROPOSALS: [&str; 4] = [
    "我们都选A吧，这样双方都能得到70分。",
    "你好！一起选A好吗？互相信任，双赢。",
    "我建议我们都选A，合作对大家都好。",
    "咱们都选A吧，各拿70分最划算。",
];

const CONFIRMATIONS: [&str; 3] = [
    "好的，那我们说定了，都选A。",
    "同意，我会选A，希望你也是。",
    "没问题，就这么办，一起选A。",
];

/// One scripted completion. Every persona proposes mutual A; they differ in
/// what they then decide.
pub fn mock_policy_step(
    persona: Persona,
    phase: Phase,
    context: MockContext,
    config: &MockConfig,
    rng: &mut impl Rng,
) -> String {
    match phase {
        Phase::FirstMessage => {
            let text = PROPOSALS[rng.random_range(0..PROPOSALS.len())];
            format!(
                "STEP 1: If I choose B and my associate chooses A, I get 80 and they get 10.\n\
                 STEP 2: If we both choose A, we both get 70.\n\
                 STEP 3: As a {} human, the ideal pair is (A, A).\n\
                 STEP 4: <{text}>",
                persona.prompt_name()
            )
        }
        Phase::SecondMessage => {
            let text = CONFIRMATIONS[rng.random_range(0..CONFIRMATIONS.len())];
            format!("<{text}>")
        }
        Phase::Decision => {
            let choice = match persona {
                Persona::Cooperative => Choice::A,
                Persona::Selfish => {
                    if rng.random_bool(config.selfish_defect_prob.clamp(0.0, 1.0)) {
                        Choice::B
                    } else {
                        Choice::A
                    }
                }
                Persona::Fair => {
                    // Retaliates after being exploited, and now and then
                    // defects anyway.
                    if context.exploited_last_round
                        || rng.random_bool(config.fair_breach_prob.clamp(0.0, 1.0))
                    {
                        Choice::B
                    } else {
                        Choice::A
                    }
                }
            };
            let bracketed = rng.random_bool(0.5);
            format!(
                "STEP 1: Choosing B raises my payoff if my associate picks A.\n\
                 STEP 2: Choosing A gives both of us 70 if my associate also picks A.\n\
                 STEP 3: I meet a new associate each round.\n\
                 STEP 4: We agreed on A.\n\
                 STEP 5: {}.",
                format_decision(choice, bracketed)
            )
        }
    }
}

/// 64-bit FNV-1a.
fn fnv1a(parts: &[&[u8]]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for part in parts {
        for &byte in *part {
            hash ^= u64::from(byte);
            hash = hash.wrapping_mul(0x0100_0000_01b3);
        }
        // Separator so ("ab","c") and ("a","bc") differ.
        hash ^= 0xff;
        hash = hash.wrapping_mul(0x0100_0000_01b3);
    }
    hash
}

/// A backend that answers with [`mock_policy_step`]. The output is a pure
/// function of the configured seed and the request text.
#[derive(Clone, Debug)]
pub struct MockBackend {
    id: String,
    config: MockConfig,
}

impl MockBackend {
    pub fn new(config: MockConfig) -> Self {
        MockBackend {
            id: format!("mock-{}", config.seed),
            config,
        }
    }

    pub fn config(&self) -> &MockConfig {
        &self.config
    }
}

impl Backend for MockBackend {
    fn id(&self) -> &str {
        &self.id
    }

    fn send(&self, request: &CompletionRequest) -> Result<String, TransportError> {
        if let Some(latency) = self.config.latency {
            std::thread::sleep(latency);
        }
        let persona = Persona::detect(&request.system)
            .ok_or_else(|| TransportError::Malformed("mock: no persona in system prompt".into()))?;
        let phase = Phase::detect(&request.prompt)
            .ok_or_else(|| TransportError::Malformed("mock: unrecognised prompt".into()))?;
        let context = match phase {
            Phase::Decision => MockContext::from_decision_prompt(&request.prompt),
            _ => MockContext::default(),
        };
        let seed = fnv1a(&[
            &self.config.seed.to_le_bytes(),
            request.system.as_bytes(),
            request.prompt.as_bytes(),
            request.caller.as_deref().unwrap_or("").as_bytes(),
        ]);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Ok(mock_policy_step(persona, phase, context, &self.config, &mut rng))
    }
}

/// Replays a fixed queue of outcomes, then fails. Useful for exercising
/// retry and fallback paths.
#[derive(Debug)]
pub struct ScriptedBackend {
    id: String,
    queue: Mutex<VecDeque<Result<String, TransportError>>>,
}

impl ScriptedBackend {
    pub fn new(outcomes: impl IntoIterator<Item = Result<String, TransportError>>) -> Self {
        ScriptedBackend {
            id: "scripted".into(),
            queue: Mutex::new(outcomes.into_iter().collect()),
        }
    }

    pub fn texts<S: Into<String>>(texts: impl IntoIterator<Item = S>) -> Self {
        ScriptedBackend::new(texts.into_iter().map(|t| Ok(t.into())))
    }

    pub fn remaining(&self) -> usize {
        self.queue.lock().expect("queue lock").len()
    }
}

impl Backend for ScriptedBackend {
    fn id(&self) -> &str {
        &self.id
    }

    fn send(&self, _: &CompletionRequest) -> Result<String, TransportError> {
        self.queue
            .lock()
            .expect("queue lock")
            .pop_front()
            .unwrap_or_else(|| Err(TransportError::Io("script exhausted".into())))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parse::{extract_bracketed_message, extract_decision};

    fn step(persona: Persona, phase: Phase, exploited: bool) -> String {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        mock_policy_step(
            persona,
            phase,
            MockContext {
                exploited_last_round: exploited,
            },
            &MockConfig {
                fair_breach_prob: 0.0,
                ..MockConfig::default()
            },
            &mut rng,
        )
    }

    #[test]
    fn scripted_decisions() {
        for exploited in [false, true] {
            assert_eq!(
                extract_decision(&step(Persona::Cooperative, Phase::Decision, exploited)),
                Ok(Choice::A)
            );
            assert_eq!(
                extract_decision(&step(Persona::Selfish, Phase::Decision, exploited)),
                Ok(Choice::B)
            );
        }
        assert_eq!(
            extract_decision(&step(Persona::Fair, Phase::Decision, true)),
            Ok(Choice::B)
        );
        assert_eq!(
            extract_decision(&step(Persona::Fair, Phase::Decision, false)),
            Ok(Choice::A)
        );
    }

    #[test]
    fn messages_parse_and_propose_a() {
        for p in Persona::ALL {
            for phase in [Phase::FirstMessage, Phase::SecondMessage] {
                let msg = extract_bracketed_message(&step(p, phase, false)).unwrap();
                assert!(msg.contains('A'));
            }
        }
    }

    #[test]
    fn context_from_history_lines() {
        let prompt = "In round 1: you choose A, your associate chooses B, you get 10, your associate gets 80.\n\
                      In round 2: you choose B, your associate chooses B, you get 40, your associate gets 40.\n";
        assert!(!MockContext::from_decision_prompt(prompt).exploited_last_round);
        let prompt = "In round 2: you choose A, your associate chooses B, you get 10, your associate gets 80.\n";
        assert!(MockContext::from_decision_prompt(prompt).exploited_last_round);
        assert!(!MockContext::from_decision_prompt("").exploited_last_round);
    }

    #[test]
    fn mock_backend_is_deterministic() {
        let sys = "You are a FAIR-MINDED human";
        let req = CompletionRequest::new(sys, "Now you can send your first message in Chinese.");
        let a = MockBackend::new(MockConfig {
            seed: 7,
            ..MockConfig::default()
        });
        let b = a.clone();
        assert_eq!(a.send(&req).unwrap(), b.send(&req).unwrap());
        let outputs: std::collections::HashSet<_> = (0..20)
            .map(|s| {
                MockBackend::new(MockConfig {
                    seed: s,
                    ..MockConfig::default()
                })
                .send(&req)
                .unwrap()
            })
            .collect();
        assert!(outputs.len() > 1, "seed should matter");
    }

    #[test]
    fn scripted_backend_drains() {
        let b = ScriptedBackend::texts(["x"]);
        let req = CompletionRequest::new("", "");
        assert_eq!(b.send(&req).unwrap(), "x");
        assert!(b.send(&req).is_err());
        assert_eq!(b.remaining(), 0);
    }
}
