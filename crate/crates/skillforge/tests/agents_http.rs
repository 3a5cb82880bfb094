//! HTTP chat-backend contract tests against a local stub server.
//!
//! A bare `TcpListener` plays the endpoint so the wire format, the
//! bearer-credential handling, and the retry policy are exercised over a
//! real socket without any network dependency.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::mpsc;
use std::thread;

use skillforge::agents::{
    AgentError, ChatBackend, ChatMessage, ChatRequest, HttpChatBackend,
};

/// One recorded request: headers + parsed JSON body.
struct Seen {
    authorization: Option<String>,
    body: serde_json::Value,
}

fn read_request(stream: &mut TcpStream) -> Seen {
    let mut reader = BufReader::new(stream.try_clone().expect("clone stream"));
    let mut line = String::new();
    reader.read_line(&mut line).expect("request line");
    let mut authorization = None;
    let mut content_length = 0usize;
    loop {
        let mut header = String::new();
        reader.read_line(&mut header).expect("header line");
        let header = header.trim_end();
        if header.is_empty() {
            break;
        }
        let lower = header.to_ascii_lowercase();
        if let Some(rest) = lower.strip_prefix("authorization:") {
            authorization = Some(rest.trim().to_owned());
        }
        if let Some(rest) = lower.strip_prefix("content-length:") {
            content_length = rest.trim().parse().expect("content length");
        }
    }
    let mut body = vec![0u8; content_length];
    reader.read_exact(&mut body).expect("body");
    Seen {
        authorization,
        body: serde_json::from_slice(&body).expect("json body"),
    }
}

fn respond(stream: &mut TcpStream, status: &str, body: &str) {
    let response = format!(
        "HTTP/1.1 {status}\r\ncontent-type: application/json\r\n\
         content-length: {}\r\nconnection: close\r\n\r\n{body}",
        body.len()
    );
    stream.write_all(response.as_bytes()).expect("write response");
    stream.flush().expect("flush");
}

/// Spawn a stub server that answers each incoming request with the next
/// scripted `(status, body)` pair, reporting what it saw on a channel.
fn stub_server(replies: Vec<(&'static str, String)>) -> (String, mpsc::Receiver<Seen>) {
    let listener = TcpListener::bind("127.0.0.1:0").expect("bind");
    let addr = listener.local_addr().expect("addr");
    let (tx, rx) = mpsc::channel();
    thread::spawn(move || {
        for (status, body) in replies {
            let (mut stream, _) = listener.accept().expect("accept");
            let seen = read_request(&mut stream);
            tx.send(seen).ok();
            respond(&mut stream, status, &body);
        }
    });
    (format!("http://{addr}/v1/complete"), rx)
}

fn request() -> ChatRequest {
    ChatRequest {
        system: "be terse".to_owned(),
        messages: vec![ChatMessage::user("how many units shipped?")],
        max_tokens: 128,
    }
}

const CREDENTIAL_VAR: &str = "SKILLFORGE_TEST_CREDENTIAL";

#[test]
fn posts_wire_format_and_sends_bearer_credential() {
    let ok = r#"{"content": "812 units", "usage": {"input_tokens": 9, "output_tokens": 3}}"#;
    let (url, rx) = stub_server(vec![("200 OK", ok.to_owned())]);

    std::env::set_var(CREDENTIAL_VAR, "sk-test-123");
    let backend = HttpChatBackend::new(url, "answerer-large", Some(CREDENTIAL_VAR.to_owned()));
    let response = backend.complete(&request()).expect("success");
    assert_eq!(response.content, "812 units");
    assert_eq!(response.usage.input_tokens, 9);
    assert_eq!(response.usage.output_tokens, 3);

    let seen = rx.recv().expect("request observed");
    assert_eq!(seen.authorization.as_deref(), Some("bearer sk-test-123"));
    assert_eq!(seen.body["model"], "answerer-large");
    assert_eq!(seen.body["system"], "be terse");
    assert_eq!(seen.body["max_tokens"], 128);
    assert_eq!(seen.body["messages"][0]["role"], "user");
    assert_eq!(seen.body["messages"][0]["content"], "how many units shipped?");
}

#[test]
fn retries_server_errors_then_succeeds() {
    let ok = r#"{"content": "fine now"}"#;
    let (url, rx) = stub_server(vec![
        ("500 Internal Server Error", "{}".to_owned()),
        ("429 Too Many Requests", "{}".to_owned()),
        ("200 OK", ok.to_owned()),
    ]);
    let backend = HttpChatBackend::new(url, "m", None);
    let response = backend.complete(&request()).expect("third attempt succeeds");
    assert_eq!(response.content, "fine now");
    assert_eq!(rx.iter().take(3).count(), 3, "exactly three attempts made");
}

#[test]
fn client_errors_are_fatal_without_retry() {
    let (url, rx) = stub_server(vec![(
        "400 Bad Request",
        r#"{"error": "bad model"}"#.to_owned(),
    )]);
    let backend = HttpChatBackend::new(url, "m", None);
    let err = backend.complete(&request()).expect_err("4xx is fatal");
    match err {
        AgentError::Backend { attempts, message } => {
            assert_eq!(attempts, 1);
            assert!(message.contains("400"), "message was {message:?}");
        }
        other => panic!("unexpected error {other:?}"),
    }
    assert_eq!(rx.iter().take(1).count(), 1, "no retry after a client error");
}

#[test]
fn exhausted_retries_report_attempt_count() {
    let (url, _rx) = stub_server(vec![
        ("503 Service Unavailable", "{}".to_owned()),
        ("503 Service Unavailable", "{}".to_owned()),
        ("503 Service Unavailable", "{}".to_owned()),
    ]);
    let backend = HttpChatBackend::new(url, "m", None);
    match backend.complete(&request()) {
        Err(AgentError::Backend { attempts, message }) => {
            assert_eq!(attempts, 3);
            assert!(message.contains("503"), "message was {message:?}");
        }
        other => panic!("unexpected outcome {other:?}"),
    }
}

#[test]
fn missing_credential_env_var_fails_before_any_request() {
    std::env::remove_var("SKILLFORGE_TEST_MISSING_CREDENTIAL");
    let backend = HttpChatBackend::new(
        "http://127.0.0.1:1/unreachable",
        "m",
        Some("SKILLFORGE_TEST_MISSING_CREDENTIAL".to_owned()),
    );
    assert!(matches!(
        backend.complete(&request()),
        Err(AgentError::MissingCredential(var)) if var == "SKILLFORGE_TEST_MISSING_CREDENTIAL"
    ));
}

#[test]
fn empty_content_is_rejected() {
    let (url, _rx) = stub_server(vec![("200 OK", r#"{"content": ""}"#.to_owned())]);
    let backend = HttpChatBackend::new(url, "m", None);
    assert!(matches!(
        backend.complete(&request()),
        Err(AgentError::Backend { .. })
    ));
}
