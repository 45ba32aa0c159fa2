//! Completion backends. The scripted backend is the default for tests and
//! offline runs; the HTTP backend talks to a chat-completions-style endpoint
//! and is never required for the test suite.

use std::collections::BTreeMap;
use std::collections::BTreeSet;
use std::time::Duration;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::prompt::estimate_tokens;

/// One sampling request; `n` asks for that many independent completions.
#[derive(Debug, Clone, PartialEq)]
pub struct CompletionRequest {
    pub prompt: String,
    pub temperature: f64,
    pub top_p: f64,
    pub n: usize,
    pub max_tokens: usize,
    pub stop: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompletionResponse {
    pub texts: Vec<String>,
    pub prompt_tokens: usize,
    pub completion_tokens: usize,
}

#[derive(Debug, Error)]
pub enum BackendError {
    #[error("rate limited, retries exhausted after {attempts} attempts")]
    RateLimited { attempts: usize },
    #[error("server error {status}, retries exhausted after {attempts} attempts")]
    ServerError { status: u16, attempts: usize },
    #[error("http status {status}: {detail}")]
    Status { status: u16, detail: String },
    #[error("transport failure: {detail}")]
    Transport { detail: String },
    #[error("malformed response: {detail}")]
    Malformed { detail: String },
    #[error("script error: {detail}")]
    Script { detail: String },
}

pub trait CompletionBackend {
    fn complete(&mut self, req: &CompletionRequest) -> Result<CompletionResponse, BackendError>;
}

/// The last `-- ` line of a prompt names what the model must produce: the
/// target task description for synthesis, the anonymous name for AutoDoc.
pub fn prompt_target(prompt: &str) -> &str {
    prompt
        .lines()
        .rev()
        .find_map(|line| line.strip_prefix("-- "))
        .unwrap_or(prompt)
}

#[derive(Debug, Clone)]
enum ScriptedBehavior {
    /// (pattern, completions): the longest pattern contained in the prompt
    /// target wins, so `fn_10` is not shadowed by `fn_1`.
    Script(Vec<(String, Vec<String>)>),
    Constant(String),
    /// Each call reseeds from (seed, call index), so a resumed run replays
    /// the same stream once `calls` is restored.
    Garbage { seed: u64 },
}

const GARBAGE_POOL: &[&str] = &[
    "((",
    ")",
    "(lambda",
    "forty two, give or take",
    "(lambda (mystery_op $0))",
    "(lambda ($0 $0))",
    "(lambda $1)",
    "",
];

/// Deterministic stand-in for a live model.
#[derive(Debug, Clone)]
pub struct ScriptedBackend {
    behavior: ScriptedBehavior,
    fail_calls: BTreeSet<usize>,
    /// Number of `complete` invocations so far, including injected failures.
    pub calls: usize,
    /// Every request seen, in order; handy for cascade and budget assertions.
    pub requests: Vec<CompletionRequest>,
}

impl ScriptedBackend {
    fn with_behavior(behavior: ScriptedBehavior) -> Self {
        ScriptedBackend {
            behavior,
            fail_calls: BTreeSet::new(),
            calls: 0,
            requests: Vec::new(),
        }
    }

    pub fn from_script(entries: Vec<(String, Vec<String>)>) -> Self {
        Self::with_behavior(ScriptedBehavior::Script(entries))
    }

    /// Script that answers each description with its ground-truth program.
    pub fn oracle<I, A, B>(pairs: I) -> Self
    where
        I: IntoIterator<Item = (A, B)>,
        A: Into<String>,
        B: Into<String>,
    {
        let entries = pairs
            .into_iter()
            .map(|(pattern, text)| (pattern.into(), vec![text.into()]))
            .collect();
        Self::from_script(entries)
    }

    pub fn constant(text: impl Into<String>) -> Self {
        Self::with_behavior(ScriptedBehavior::Constant(text.into()))
    }

    pub fn garbage(seed: u64) -> Self {
        Self::with_behavior(ScriptedBehavior::Garbage { seed })
    }

    /// JSON object mapping pattern → list of completion texts.
    pub fn from_script_json(text: &str) -> Result<Self, BackendError> {
        let map: BTreeMap<String, Vec<String>> =
            serde_json::from_str(text).map_err(|e| BackendError::Script {
                detail: e.to_string(),
            })?;
        Ok(Self::from_script(map.into_iter().collect()))
    }

    /// Marks 0-based call indices that fail with a simulated rate limit.
    pub fn failing_calls(mut self, calls: impl IntoIterator<Item = usize>) -> Self {
        self.fail_calls.extend(calls);
        self
    }
}

impl CompletionBackend for ScriptedBackend {
    fn complete(&mut self, req: &CompletionRequest) -> Result<CompletionResponse, BackendError> {
        let call = self.calls;
        self.calls += 1;
        self.requests.push(req.clone());
        if self.fail_calls.contains(&call) {
            return Err(BackendError::RateLimited { attempts: 1 });
        }
        let texts = match &mut self.behavior {
            ScriptedBehavior::Script(entries) => {
                let target = prompt_target(&req.prompt);
                let best = entries
                    .iter()
                    .filter(|(pat, _)| target.contains(pat.as_str()))
                    .max_by_key(|(pat, _)| pat.len());
                match best {
                    Some((_, completions)) => completions.clone(),
                    None => Vec::new(),
                }
            }
            ScriptedBehavior::Constant(text) => vec![text.clone(); req.n],
            ScriptedBehavior::Garbage { seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(
                    seed.wrapping_add((call as u64 + 1).wrapping_mul(0x9e37_79b9_7f4a_7c15)),
                );
                (0..req.n)
                    .map(|_| GARBAGE_POOL[rng.gen_range(0..GARBAGE_POOL.len())].to_owned())
                    .collect()
            }
        };
        let completion_tokens = texts.iter().map(|t| estimate_tokens(t)).sum();
        Ok(CompletionResponse {
            texts,
            prompt_tokens: estimate_tokens(&req.prompt),
            completion_tokens,
        })
    }
}

/// Whether the request carries a chat `messages` array or a bare `prompt`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PayloadStyle {
    Chat,
    Prompt,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HttpConfig {
    pub endpoint: String,
    pub model: String,
    /// Environment variable holding the bearer token; unset means no auth
    /// header, which local test servers accept.
    pub api_key_env: String,
    pub timeout_secs: f64,
    /// Extra attempts after the first on 429/5xx/transport errors.
    pub max_retries: usize,
    pub initial_backoff_ms: u64,
    pub payload_style: PayloadStyle,
}

impl Default for HttpConfig {
    fn default() -> Self {
        HttpConfig {
            endpoint: "http://localhost:8000/v1/chat/completions".into(),
            model: "local-model".into(),
            api_key_env: "LLM_API_KEY".into(),
            timeout_secs: 60.0,
            max_retries: 3,
            initial_backoff_ms: 250,
            payload_style: PayloadStyle::Chat,
        }
    }
}

pub struct HttpBackend {
    cfg: HttpConfig,
    client: reqwest::blocking::Client,
}

#[derive(Deserialize)]
struct ApiResponse {
    choices: Vec<ApiChoice>,
    #[serde(default)]
    usage: Option<ApiUsage>,
}

#[derive(Deserialize)]
struct ApiChoice {
    #[serde(default)]
    text: Option<String>,
    #[serde(default)]
    message: Option<ApiMessage>,
}

#[derive(Deserialize)]
struct ApiMessage {
    content: String,
}

#[derive(Deserialize)]
struct ApiUsage {
    #[serde(default)]
    prompt_tokens: Option<usize>,
    #[serde(default)]
    completion_tokens: Option<usize>,
}

impl HttpBackend {
    pub fn new(cfg: HttpConfig) -> Result<Self, BackendError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs_f64(cfg.timeout_secs))
            .build()
            .map_err(|e| BackendError::Transport {
                detail: e.to_string(),
            })?;
        Ok(HttpBackend { cfg, client })
    }

    fn body(&self, req: &CompletionRequest) -> serde_json::Value {
        let mut body = serde_json::json!({
            "model": self.cfg.model,
            "temperature": req.temperature,
            "top_p": req.top_p,
            "n": req.n,
            "max_tokens": req.max_tokens,
        });
        match self.cfg.payload_style {
            PayloadStyle::Chat => {
                body["messages"] =
                    serde_json::json!([{ "role": "user", "content": req.prompt }]);
            }
            PayloadStyle::Prompt => {
                body["prompt"] = serde_json::json!(req.prompt);
            }
        }
        if let Some(stop) = &req.stop {
            body["stop"] = serde_json::json!([stop]);
        }
        body
    }

    fn parse_response(req: &CompletionRequest, text: &str) -> Result<CompletionResponse, BackendError> {
        let parsed: ApiResponse =
            serde_json::from_str(text).map_err(|e| BackendError::Malformed {
                detail: e.to_string(),
            })?;
        let mut texts = Vec::with_capacity(parsed.choices.len());
        for choice in parsed.choices {
            match (choice.message, choice.text) {
                (Some(message), _) => texts.push(message.content),
                (None, Some(text)) => texts.push(text),
                (None, None) => {
                    return Err(BackendError::Malformed {
                        detail: "choice carries neither text nor message.content".into(),
                    })
                }
            }
        }
        let usage = parsed.usage.unwrap_or(ApiUsage {
            prompt_tokens: None,
            completion_tokens: None,
        });
        Ok(CompletionResponse {
            prompt_tokens: usage
                .prompt_tokens
                .unwrap_or_else(|| estimate_tokens(&req.prompt)),
            completion_tokens: usage
                .completion_tokens
                .unwrap_or_else(|| texts.iter().map(|t| estimate_tokens(t)).sum()),
            texts,
        })
    }
}

impl CompletionBackend for HttpBackend {
    fn complete(&mut self, req: &CompletionRequest) -> Result<CompletionResponse, BackendError> {
        let body = self.body(req);
        let token = std::env::var(&self.cfg.api_key_env).ok();
        let mut backoff = Duration::from_millis(self.cfg.initial_backoff_ms);
        let attempts = self.cfg.max_retries + 1;
        let mut last_retryable: Option<BackendError> = None;

        for attempt in 0..attempts {
            if attempt > 0 {
                std::thread::sleep(backoff);
                backoff *= 2;
            }
            let mut request = self.client.post(&self.cfg.endpoint).json(&body);
            if let Some(token) = &token {
                request = request.bearer_auth(token);
            }
            match request.send() {
                Err(e) => {
                    last_retryable = Some(BackendError::Transport {
                        detail: e.to_string(),
                    });
                }
                Ok(resp) => {
                    let status = resp.status();
                    if status.as_u16() == 429 {
                        last_retryable = Some(BackendError::RateLimited {
                            attempts: attempt + 1,
                        });
                    } else if status.is_server_error() {
                        last_retryable = Some(BackendError::ServerError {
                            status: status.as_u16(),
                            attempts: attempt + 1,
                        });
                    } else if !status.is_success() {
                        return Err(BackendError::Status {
                            status: status.as_u16(),
                            detail: resp.text().unwrap_or_default(),
                        });
                    } else {
                        let text = resp.text().map_err(|e| BackendError::Transport {
                            detail: e.to_string(),
                        })?;
                        return Self::parse_response(req, &text);
                    }
                }
            }
        }
        Err(last_retryable.unwrap_or(BackendError::RateLimited { attempts }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn req(prompt: &str, n: usize) -> CompletionRequest {
        CompletionRequest {
            prompt: prompt.into(),
            temperature: 0.9,
            top_p: 1.0,
            n,
            max_tokens: 64,
            stop: Some("\n\n".into()),
        }
    }

    #[test]
    fn target_is_the_last_marker_line() {
        assert_eq!(prompt_target("header\n\n-- first\nprog\n\n-- second"), "second");
        assert_eq!(prompt_target("no markers here"), "no markers here");
    }

    #[test]
    fn script_matches_longest_pattern() {
        let mut backend = ScriptedBackend::from_script(vec![
            ("fn_1".into(), vec!["short".into()]),
            ("fn_10".into(), vec!["long".into()]),
        ]);
        let resp = backend.complete(&req("stuff\n-- fn_10", 4)).unwrap();
        assert_eq!(resp.texts, vec!["long".to_owned()]);
        let resp = backend.complete(&req("stuff\n-- fn_1", 4)).unwrap();
        assert_eq!(resp.texts, vec!["short".to_owned()]);
        let resp = backend.complete(&req("stuff\n-- fn_7", 4)).unwrap();
        assert!(resp.texts.is_empty());
    }

    #[test]
    fn constant_repeats_for_each_completion() {
        let mut backend = ScriptedBackend::constant("(lambda $0)");
        let resp = backend.complete(&req("-- anything", 3)).unwrap();
        assert_eq!(resp.texts, vec!["(lambda $0)".to_owned(); 3]);
        assert_eq!(resp.completion_tokens, 3 * estimate_tokens("(lambda $0)"));
    }

    #[test]
    fn garbage_is_deterministic_per_seed() {
        let run = |seed| {
            let mut backend = ScriptedBackend::garbage(seed);
            backend.complete(&req("-- x", 6)).unwrap().texts
        };
        assert_eq!(run(3), run(3));
        assert_ne!(run(3), run(4));
    }

    #[test]
    fn garbage_replays_from_the_call_counter() {
        let mut full = ScriptedBackend::garbage(11);
        full.complete(&req("-- a", 4)).unwrap();
        let second = full.complete(&req("-- b", 4)).unwrap().texts;

        let mut resumed = ScriptedBackend::garbage(11);
        resumed.calls = 1;
        assert_eq!(resumed.complete(&req("-- b", 4)).unwrap().texts, second);
    }

    #[test]
    fn injected_failures_hit_exact_calls() {
        let mut backend = ScriptedBackend::constant("x").failing_calls([1]);
        assert!(backend.complete(&req("-- a", 1)).is_ok());
        assert!(matches!(
            backend.complete(&req("-- b", 1)),
            Err(BackendError::RateLimited { .. })
        ));
        assert!(backend.complete(&req("-- c", 1)).is_ok());
        assert_eq!(backend.calls, 3);
        assert_eq!(backend.requests.len(), 3);
    }

    #[test]
    fn script_loads_from_json() {
        let backend =
            ScriptedBackend::from_script_json(r#"{"double every vowel": ["(lambda $0)"]}"#);
        let mut backend = backend.unwrap();
        let resp = backend.complete(&req("-- double every vowel", 1)).unwrap();
        assert_eq!(resp.texts, vec!["(lambda $0)".to_owned()]);
        assert!(ScriptedBackend::from_script_json("not json").is_err());
    }

    #[test]
    fn http_response_parsing_accepts_both_shapes() {
        let r = req("p", 1);
        let chat = r#"{"choices":[{"message":{"content":"(lambda $0)"}}],"usage":{"prompt_tokens":10,"completion_tokens":4}}"#;
        let parsed = HttpBackend::parse_response(&r, chat).unwrap();
        assert_eq!(parsed.texts, vec!["(lambda $0)".to_owned()]);
        assert_eq!(parsed.prompt_tokens, 10);
        assert_eq!(parsed.completion_tokens, 4);

        let completions = r#"{"choices":[{"text":"(lambda $0)"},{"text":"(lambda (regex_tail $0))"}]}"#;
        let parsed = HttpBackend::parse_response(&r, completions).unwrap();
        assert_eq!(parsed.texts.len(), 2);
        assert_eq!(parsed.prompt_tokens, estimate_tokens("p"));

        assert!(HttpBackend::parse_response(&r, r#"{"choices":[{}]}"#).is_err());
        assert!(HttpBackend::parse_response(&r, "nope").is_err());
    }
}
