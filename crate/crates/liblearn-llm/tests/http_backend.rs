//! Exercises the HTTP backend against a local single-threaded server:
//! payload shape, bearer auth, retry/backoff on 429 and 5xx, and immediate
//! failure on other statuses.

use std::io::{Read, Write};
use std::net::TcpListener;
use std::thread;

use liblearn_llm::{
    BackendError, CompletionBackend, CompletionRequest, HttpBackend, HttpConfig, PayloadStyle,
};

fn find(haystack: &[u8], needle: &[u8]) -> Option<usize> {
    haystack.windows(needle.len()).position(|w| w == needle)
}

/// Serves the scripted (status, body) responses in order, one connection
/// each, and returns the raw request texts for inspection.
fn serve(responses: Vec<(u16, String)>) -> (String, thread::JoinHandle<Vec<String>>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    let handle = thread::spawn(move || {
        let mut seen = Vec::new();
        for (status, body) in responses {
            let (mut stream, _) = listener.accept().unwrap();
            let mut buf = Vec::new();
            let mut chunk = [0u8; 4096];
            loop {
                if let Some(pos) = find(&buf, b"\r\n\r\n") {
                    let headers = String::from_utf8_lossy(&buf[..pos]).to_ascii_lowercase();
                    let content_length = headers
                        .lines()
                        .find_map(|l| l.strip_prefix("content-length:"))
                        .and_then(|v| v.trim().parse::<usize>().ok())
                        .unwrap_or(0);
                    if buf.len() >= pos + 4 + content_length {
                        break;
                    }
                }
                let n = stream.read(&mut chunk).unwrap();
                if n == 0 {
                    break;
                }
                buf.extend_from_slice(&chunk[..n]);
            }
            seen.push(String::from_utf8_lossy(&buf).into_owned());
            let reason = match status {
                200 => "OK",
                401 => "Unauthorized",
                429 => "Too Many Requests",
                500 => "Internal Server Error",
                _ => "Other",
            };
            let response = format!(
                "HTTP/1.1 {status} {reason}\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{body}",
                body.len()
            );
            stream.write_all(response.as_bytes()).unwrap();
        }
        seen
    });
    (format!("http://{addr}/v1/chat/completions"), handle)
}

fn config(endpoint: String) -> HttpConfig {
    HttpConfig {
        endpoint,
        api_key_env: "LIBLEARN_TEST_KEY".into(),
        timeout_secs: 5.0,
        max_retries: 2,
        initial_backoff_ms: 1,
        ..HttpConfig::default()
    }
}

fn request() -> CompletionRequest {
    CompletionRequest {
        prompt: "header\n\n-- add two".into(),
        temperature: 0.9,
        top_p: 1.0,
        n: 2,
        max_tokens: 32,
        stop: Some("\n\n".into()),
    }
}

#[test]
fn chat_payload_and_bearer_token_round_trip() {
    std::env::set_var("LIBLEARN_TEST_KEY", "secret-token");
    let body = r#"{"choices":[{"message":{"content":"(lambda $0)"}}],"usage":{"prompt_tokens":9,"completion_tokens":5}}"#;
    let (endpoint, server) = serve(vec![(200, body.into())]);
    let mut backend = HttpBackend::new(config(endpoint)).unwrap();

    let resp = backend.complete(&request()).unwrap();
    assert_eq!(resp.texts, vec!["(lambda $0)".to_owned()]);
    assert_eq!(resp.prompt_tokens, 9);
    assert_eq!(resp.completion_tokens, 5);

    let seen = server.join().unwrap();
    assert_eq!(seen.len(), 1);
    let raw = seen[0].to_ascii_lowercase();
    assert!(raw.contains("authorization: bearer secret-token"));
    assert!(seen[0].contains("\"messages\""));
    assert!(seen[0].contains("\"stop\":[\"\\n\\n\"]"));
    assert!(seen[0].contains("\"n\":2"));
}

#[test]
fn prompt_payload_style_and_text_choices() {
    let body = r#"{"choices":[{"text":"(lambda $0)"},{"text":"(lambda (+ $0 1))"}]}"#;
    let (endpoint, server) = serve(vec![(200, body.into())]);
    let mut cfg = config(endpoint);
    cfg.payload_style = PayloadStyle::Prompt;
    let mut backend = HttpBackend::new(cfg).unwrap();

    let resp = backend.complete(&request()).unwrap();
    assert_eq!(resp.texts.len(), 2);

    let seen = server.join().unwrap();
    assert!(seen[0].contains("\"prompt\""));
    assert!(!seen[0].contains("\"messages\""));
}

#[test]
fn rate_limit_then_success_is_retried() {
    let body = r#"{"choices":[{"message":{"content":"(lambda $0)"}}]}"#;
    let (endpoint, server) = serve(vec![(429, String::new()), (200, body.into())]);
    let mut backend = HttpBackend::new(config(endpoint)).unwrap();

    let resp = backend.complete(&request()).unwrap();
    assert_eq!(resp.texts, vec!["(lambda $0)".to_owned()]);
    assert_eq!(server.join().unwrap().len(), 2);
}

#[test]
fn server_errors_exhaust_retries() {
    let (endpoint, server) = serve(vec![
        (500, "{}".into()),
        (500, "{}".into()),
        (500, "{}".into()),
    ]);
    let mut backend = HttpBackend::new(config(endpoint)).unwrap();

    let err = backend.complete(&request()).unwrap_err();
    assert!(matches!(
        err,
        BackendError::ServerError {
            status: 500,
            attempts: 3
        }
    ));
    assert_eq!(server.join().unwrap().len(), 3);
}

#[test]
fn non_retryable_status_fails_immediately() {
    let (endpoint, server) = serve(vec![(401, "denied".into())]);
    let mut backend = HttpBackend::new(config(endpoint)).unwrap();

    let err = backend.complete(&request()).unwrap_err();
    assert!(matches!(err, BackendError::Status { status: 401, .. }));
    assert_eq!(server.join().unwrap().len(), 1);
}

#[test]
fn malformed_success_body_is_an_error() {
    let (endpoint, server) = serve(vec![(200, "not json".into())]);
    let mut backend = HttpBackend::new(config(endpoint)).unwrap();

    let err = backend.complete(&request()).unwrap_err();
    assert!(matches!(err, BackendError::Malformed { .. }));
    server.join().unwrap();
}
