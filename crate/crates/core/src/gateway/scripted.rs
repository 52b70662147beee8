//! Rule-driven chat backend for tests and fixture generation: the first
//! rule whose `requires` substrings all appear in the prompt (and whose
//! `forbids` do not) answers. A rule may carry a sequence of responses
//! consumed one per match, which lets loop tests script multi-round
//! behaviour; the last response repeats once the sequence is exhausted.

use std::sync::Mutex;

use super::{ChatBackend, GatewayError};

#[derive(Debug, Clone)]
pub struct ScriptedRule {
    pub requires: Vec<String>,
    pub forbids: Vec<String>,
    pub responses: Vec<String>,
}

impl ScriptedRule {
    pub fn new<S: Into<String>>(requires: Vec<S>, response: impl Into<String>) -> Self {
        Self {
            requires: requires.into_iter().map(Into::into).collect(),
            forbids: Vec::new(),
            responses: vec![response.into()],
        }
    }

    pub fn with_forbids<S: Into<String>>(mut self, forbids: Vec<S>) -> Self {
        self.forbids = forbids.into_iter().map(Into::into).collect();
        self
    }

    pub fn with_sequence<S: Into<String>>(mut self, responses: Vec<S>) -> Self {
        self.responses = responses.into_iter().map(Into::into).collect();
        self
    }

    fn matches(&self, prompt: &str) -> bool {
        self.requires.iter().all(|r| prompt.contains(r.as_str()))
            && !self.forbids.iter().any(|f| prompt.contains(f.as_str()))
    }
}

pub struct ScriptedChat {
    rules: Vec<ScriptedRule>,
    counters: Mutex<Vec<usize>>,
}

impl ScriptedChat {
    pub fn new(rules: Vec<ScriptedRule>) -> Self {
        let counters = Mutex::new(vec![0; rules.len()]);
        Self { rules, counters }
    }
}

impl ChatBackend for ScriptedChat {
    fn complete(&self, prompt: &str) -> Result<String, GatewayError> {
        for (i, rule) in self.rules.iter().enumerate() {
            if rule.matches(prompt) {
                let mut counters = self.counters.lock().unwrap();
                let k = counters[i].min(rule.responses.len() - 1);
                counters[i] += 1;
                return Ok(rule.responses[k].clone());
            }
        }
        let head: String = prompt.chars().take(120).collect();
        Err(GatewayError::ProtocolViolation(format!(
            "no scripted rule matched prompt starting: {head:?}"
        )))
    }

    fn deterministic(&self) -> bool {
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_matching_rule_wins() {
        let chat = ScriptedChat::new(vec![
            ScriptedRule::new(vec!["alpha"], "first").with_forbids(vec!["beta"]),
            ScriptedRule::new(vec!["alpha"], "second"),
        ]);
        assert_eq!(chat.complete("alpha only").unwrap(), "first");
        assert_eq!(chat.complete("alpha and beta").unwrap(), "second");
    }

    #[test]
    fn sequences_advance_per_match_and_repeat_the_last() {
        let chat = ScriptedChat::new(vec![
            ScriptedRule::new(vec!["q"], "").with_sequence(vec!["one", "two"]),
        ]);
        assert_eq!(chat.complete("q").unwrap(), "one");
        assert_eq!(chat.complete("q").unwrap(), "two");
        assert_eq!(chat.complete("q").unwrap(), "two");
    }

    #[test]
    fn unmatched_prompt_is_an_error() {
        let chat = ScriptedChat::new(vec![]);
        assert!(chat.complete("anything").is_err());
    }
}
