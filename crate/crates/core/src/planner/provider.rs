//! LLM access: transcript replay for tests and offline runs, and an HTTP
//! chat-completion client.

use std::collections::HashMap;
use std::path::Path;
use std::sync::Mutex;
use std::time::Duration;

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::motion_plan::MotionPlan;

use super::parse::{parse_motion_plan, parse_object_list};
use super::prompt::build_prompt;
use super::{HeadingHint, PlannerError, PromptKind};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProviderError {
    #[error("no recorded response for request {key}")]
    Missing { key: String },
    #[error("transcript line {line}: {message}")]
    Transcript { line: usize, message: String },
    #[error("cannot read transcript {path}: {cause}")]
    Io { path: String, cause: String },
    #[error("LLM endpoint {endpoint} unreachable: {cause}")]
    Unreachable { endpoint: String, cause: String },
    #[error("LLM endpoint {endpoint} answered {status}")]
    Status { endpoint: String, status: u16 },
    #[error("LLM endpoint {endpoint} sent a malformed reply: {detail}")]
    Protocol { endpoint: String, detail: String },
}

pub trait LlmProvider: Send + Sync {
    fn complete(&self, prompt: &str) -> Result<String, ProviderError>;
}

/// Hex SHA-256 of the rendered prompt; the key of a transcript entry.
pub fn transcript_key(prompt: &str) -> String {
    hex::encode(Sha256::digest(prompt.as_bytes()))
}

const REQUEST_MARK: &str = "=== request ";
const RESPONSE_MARK: &str = "=== response";

/// Canned answers keyed by prompt hash.
///
/// ```text
/// === request <sha256 of prompt>
/// <prompt, optional; checked against the hash when present>
/// === response
/// <answer>
/// ```
///
/// A key may repeat; successive calls with that prompt walk through its
/// answers and then keep returning the last one.
#[derive(Debug, Default)]
pub struct ReplayProvider {
    responses: HashMap<String, Vec<String>>,
    cursors: Mutex<HashMap<String, usize>>,
}

impl ReplayProvider {
    pub fn parse(text: &str) -> Result<ReplayProvider, ProviderError> {
        enum State {
            Outside,
            Request { key: String, line: usize, body: Vec<String> },
            Response { key: String, body: Vec<String> },
        }
        fn finish(responses: &mut HashMap<String, Vec<String>>, key: String, body: Vec<String>) {
            let mut text = body.join("\n");
            while text.ends_with('\n') {
                text.pop();
            }
            responses.entry(key).or_default().push(text);
        }

        let mut responses: HashMap<String, Vec<String>> = HashMap::new();
        let mut state = State::Outside;
        for (i, line) in text.lines().enumerate() {
            let line_no = i + 1;
            if let Some(key) = line.strip_prefix(REQUEST_MARK) {
                if let State::Request { line, .. } = state {
                    return Err(ProviderError::Transcript {
                        line,
                        message: "request without response".into(),
                    });
                }
                if let State::Response { key, body } = std::mem::replace(&mut state, State::Outside) {
                    finish(&mut responses, key, body);
                }
                let key = key.trim().to_lowercase();
                if key.len() != 64 || !key.chars().all(|c| c.is_ascii_hexdigit()) {
                    return Err(ProviderError::Transcript {
                        line: line_no,
                        message: format!("`{key}` is not a SHA-256 hex digest"),
                    });
                }
                state = State::Request {
                    key,
                    line: line_no,
                    body: Vec::new(),
                };
            } else if line.trim_end() == RESPONSE_MARK {
                state = match state {
                    State::Request { key, line, body } => {
                        let prompt = body.join("\n");
                        if !prompt.is_empty() && transcript_key(&prompt) != key {
                            return Err(ProviderError::Transcript {
                                line,
                                message: "recorded prompt does not match its key".into(),
                            });
                        }
                        State::Response { key, body: Vec::new() }
                    }
                    _ => {
                        return Err(ProviderError::Transcript {
                            line: line_no,
                            message: "response without request".into(),
                        })
                    }
                };
            } else {
                match &mut state {
                    State::Outside => {
                        if !line.trim().is_empty() {
                            return Err(ProviderError::Transcript {
                                line: line_no,
                                message: "text outside any entry".into(),
                            });
                        }
                    }
                    State::Request { body, .. } | State::Response { body, .. } => body.push(line.to_string()),
                }
            }
        }
        match state {
            State::Request { line, .. } => {
                return Err(ProviderError::Transcript {
                    line,
                    message: "request without response".into(),
                })
            }
            State::Response { key, body } => finish(&mut responses, key, body),
            State::Outside => {}
        }
        Ok(ReplayProvider {
            responses,
            cursors: Mutex::new(HashMap::new()),
        })
    }

    pub fn load(path: &Path) -> Result<ReplayProvider, ProviderError> {
        let text = std::fs::read_to_string(path).map_err(|e| ProviderError::Io {
            path: path.display().to_string(),
            cause: e.to_string(),
        })?;
        ReplayProvider::parse(&text)
    }

    /// One transcript entry in the format [`ReplayProvider::parse`] reads.
    pub fn render_entry(prompt: &str, response: &str) -> String {
        format!("{REQUEST_MARK}{}\n{prompt}\n{RESPONSE_MARK}\n{response}\n", transcript_key(prompt))
    }

    pub fn len(&self) -> usize {
        self.responses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.responses.is_empty()
    }
}

impl LlmProvider for ReplayProvider {
    fn complete(&self, prompt: &str) -> Result<String, ProviderError> {
        let key = transcript_key(prompt);
        let answers = self.responses.get(&key).ok_or(ProviderError::Missing { key: key.clone() })?;
        let mut cursors = self.cursors.lock().expect("cursor lock");
        let cursor = cursors.entry(key).or_insert(0);
        let answer = answers[(*cursor).min(answers.len() - 1)].clone();
        *cursor += 1;
        Ok(answer)
    }
}

/// OpenAI-style chat completion at temperature 0. The API key, if any, is
/// read from the environment variable named by `api_key_env` at call time.
#[derive(Debug, Clone)]
pub struct HttpProvider {
    pub endpoint: String,
    pub model: String,
    pub api_key_env: String,
    pub timeout: Duration,
}

impl HttpProvider {
    pub fn new(endpoint: impl Into<String>, model: impl Into<String>) -> Self {
        HttpProvider {
            endpoint: endpoint.into(),
            model: model.into(),
            api_key_env: "MOTIONZERO_LLM_API_KEY".into(),
            timeout: Duration::from_secs(60),
        }
    }
}

impl LlmProvider for HttpProvider {
    fn complete(&self, prompt: &str) -> Result<String, ProviderError> {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(self.timeout))
            .http_status_as_error(false)
            .build()
            .into();
        let body = serde_json::json!({
            "model": self.model,
            "temperature": 0,
            "messages": [{"role": "user", "content": prompt}],
        });
        let mut request = agent.post(&self.endpoint);
        if let Ok(key) = std::env::var(&self.api_key_env) {
            request = request.header("Authorization", format!("Bearer {key}"));
        }
        let mut response = request.send_json(&body).map_err(|e| ProviderError::Unreachable {
            endpoint: self.endpoint.clone(),
            cause: e.to_string(),
        })?;
        let status = response.status().as_u16();
        if status != 200 {
            return Err(ProviderError::Status {
                endpoint: self.endpoint.clone(),
                status,
            });
        }
        let protocol = |detail: String| ProviderError::Protocol {
            endpoint: self.endpoint.clone(),
            detail,
        };
        let value: serde_json::Value = response.body_mut().read_json().map_err(|e| protocol(e.to_string()))?;
        value["choices"][0]["message"]["content"]
            .as_str()
            .map(str::to_string)
            .ok_or_else(|| protocol("missing choices[0].message.content".into()))
    }
}

/// A plan obtained from an LLM, with the exchange that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct LlmPlan {
    pub plan: MotionPlan,
    pub request: String,
    pub response: String,
    pub attempts: usize,
}

/// Sends the directions command up to `1 + retries` times; the first answer
/// that parses wins. Provider failures end the loop at once.
pub fn plan_with_llm(
    provider: &dyn LlmProvider,
    user_prompt: &str,
    frame_count: usize,
    heading: Option<&HeadingHint>,
    retries: usize,
) -> Result<LlmPlan, PlannerError> {
    let request = build_prompt(PromptKind::Directions, user_prompt, heading, frame_count)?;
    let mut last_err = None;
    for attempt in 1..=retries + 1 {
        let response = provider.complete(&request)?;
        match parse_motion_plan(&response, frame_count) {
            Ok(plan) => {
                return Ok(LlmPlan {
                    plan,
                    request,
                    response,
                    attempts: attempt,
                })
            }
            Err(e) => last_err = Some(e),
        }
    }
    Err(last_err.expect("at least one attempt"))
}

/// Sends the moving-objects command and returns the object names.
pub fn moving_objects(provider: &dyn LlmProvider, user_prompt: &str) -> Result<Vec<String>, PlannerError> {
    let request = build_prompt(PromptKind::MovingObjects, user_prompt, None, 2)?;
    Ok(parse_object_list(&provider.complete(&request)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::direction::Direction;

    const AIRPLANE: &str = "An airplane is landing on the runway.";

    #[test]
    fn key_is_sha256_hex() {
        assert_eq!(
            transcript_key(""),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
    }

    #[test]
    fn replay_round_trip() {
        let prompt = build_prompt(PromptKind::Directions, AIRPLANE, None, 8).unwrap();
        let text = ReplayProvider::render_entry(&prompt, "[\"airplane\": \"down\"]");
        let replay = ReplayProvider::parse(&text).unwrap();
        assert_eq!(replay.complete(&prompt).unwrap(), "[\"airplane\": \"down\"]");
        assert!(matches!(replay.complete("other"), Err(ProviderError::Missing { .. })));
    }

    #[test]
    fn first_parseable_answer_wins() {
        let prompt = build_prompt(PromptKind::Directions, AIRPLANE, None, 8).unwrap();
        let text = ReplayProvider::render_entry(&prompt, "I think it goes down.")
            + &ReplayProvider::render_entry(&prompt, "[\"airplane\": \"down\"]");
        let replay = ReplayProvider::parse(&text).unwrap();
        let got = plan_with_llm(&replay, AIRPLANE, 8, None, 2).unwrap();
        assert_eq!(got.attempts, 2);
        assert_eq!(got.plan.character("airplane").unwrap().directions, vec![Direction::Down; 7]);

        let replay = ReplayProvider::parse(&ReplayProvider::render_entry(&prompt, "nothing")).unwrap();
        assert!(matches!(plan_with_llm(&replay, AIRPLANE, 8, None, 2), Err(PlannerError::Parse { .. })));
    }

    #[test]
    fn malformed_transcripts() {
        let key = transcript_key("x");
        assert!(matches!(
            ReplayProvider::parse("hello"),
            Err(ProviderError::Transcript { line: 1, .. })
        ));
        assert!(matches!(
            ReplayProvider::parse("=== request abc\n=== response\nx"),
            Err(ProviderError::Transcript { line: 1, .. })
        ));
        assert!(matches!(
            ReplayProvider::parse(&format!("=== request {key}\ny\n=== response\nz")),
            Err(ProviderError::Transcript { .. })
        ));
        assert!(matches!(
            ReplayProvider::parse(&format!("=== request {key}\n")),
            Err(ProviderError::Transcript { .. })
        ));
        let ok = ReplayProvider::parse(&format!("=== request {key}\n=== response\nanswer\n\n")).unwrap();
        assert_eq!(ok.complete("x").unwrap(), "answer");
    }

    #[test]
    fn objects_command() {
        let prompt = build_prompt(PromptKind::MovingObjects, AIRPLANE, None, 2).unwrap();
        let replay = ReplayProvider::parse(&ReplayProvider::render_entry(&prompt, "[\"airplane\"]")).unwrap();
        assert_eq!(moving_objects(&replay, AIRPLANE).unwrap(), vec!["airplane"]);
    }

    #[test]
    fn http_provider_unreachable() {
        let p = HttpProvider {
            timeout: Duration::from_secs(2),
            ..HttpProvider::new("http://127.0.0.1:9/v1/chat/completions", "m")
        };
        assert!(matches!(p.complete("hi"), Err(ProviderError::Unreachable { .. })));
    }
}
