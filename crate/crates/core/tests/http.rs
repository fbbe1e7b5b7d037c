//! HttpBackend against a throwaway local server.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::path::Path;
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Duration;

use ctr_nli::corpus::{load_corpus, load_split, Label};
use ctr_nli::inference::{
    batch_predict, Backend, BackendError, BatchOptions, GenerationCache, GenerationParams, HttpBackend, LabelLexicon,
    WireFormat,
};
use ctr_nli::prompt::{compose, PartLibrary};
use serde_json::Value;

type Responder = dyn Fn(usize, &Value) -> (u16, String) + Send + Sync;

/// Serves each connection with `respond(request_number, body)` and records bodies.
struct Stub {
    url: String,
    bodies: Arc<Mutex<Vec<Value>>>,
}

fn stub(respond: Box<Responder>) -> Stub {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/generate", listener.local_addr().unwrap());
    let bodies = Arc::new(Mutex::new(Vec::new()));
    let seen = Arc::clone(&bodies);
    thread::spawn(move || {
        for stream in listener.incoming() {
            let Ok(mut stream) = stream else { continue };
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut length = 0usize;
            loop {
                let mut line = String::new();
                if reader.read_line(&mut line).unwrap_or(0) == 0 {
                    break;
                }
                let line = line.trim_end();
                if line.is_empty() {
                    break;
                }
                if let Some((k, v)) = line.split_once(':') {
                    if k.eq_ignore_ascii_case("content-length") {
                        length = v.trim().parse().unwrap();
                    }
                }
            }
            let mut body = vec![0; length];
            reader.read_exact(&mut body).unwrap();
            let body: Value = serde_json::from_slice(&body).unwrap_or(Value::Null);
            let n = {
                let mut b = seen.lock().unwrap();
                b.push(body.clone());
                b.len() - 1
            };
            let (status, payload) = respond(n, &body);
            let reply = format!(
                "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{payload}",
                payload.len()
            );
            let _ = stream.write_all(reply.as_bytes());
        }
    });
    Stub { url, bodies }
}

fn params() -> GenerationParams {
    GenerationParams {
        seed: Some(11),
        ..GenerationParams::default()
    }
}

fn backend(url: &str, wire: WireFormat) -> HttpBackend {
    HttpBackend::new(url, Duration::from_secs(5), wire)
}

#[test]
fn completion_stub_echoes_no() {
    let s = stub(Box::new(|_, _| (200, r#"{"text": "No"}"#.into())));
    let out = backend(&s.url, WireFormat::Completion).generate("Is it?", &params()).unwrap();
    assert_eq!(out, "No");
    let body = s.bodies.lock().unwrap()[0].clone();
    assert_eq!(body["prompt"], "Is it?");
    assert_eq!(body["seed"], 11);
    assert_eq!(body["top_k"], params().top_k);
    assert_eq!(body["max_new_tokens"], params().max_new_tokens);
    assert_eq!(body["sample"], params().sample);
}

#[test]
fn chat_wire_uses_message_envelope() {
    let s = stub(Box::new(|_, _| (200, r#"{"message": {"role": "assistant", "content": "Yes"}}"#.into())));
    let out = backend(&s.url, WireFormat::Chat).generate("Q", &params()).unwrap();
    assert_eq!(out, "Yes");
    let body = s.bodies.lock().unwrap()[0].clone();
    assert_eq!(body["messages"][0]["content"], "Q");
    assert_eq!(body["messages"][0]["role"], "user");
}

#[test]
fn nonconforming_payload_is_bad_response() {
    let s = stub(Box::new(|_, _| (200, r#"{"output": "Yes"}"#.into())));
    let err = backend(&s.url, WireFormat::Completion).generate("Q", &params()).unwrap_err();
    assert!(matches!(err, BackendError::BadResponse(_)), "{err:?}");
    assert!(!err.is_retryable());
}

#[test]
fn closed_port_is_unreachable() {
    let port = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let err = backend(&format!("http://127.0.0.1:{port}/"), WireFormat::Completion)
        .generate("Q", &params())
        .unwrap_err();
    assert!(matches!(err, BackendError::Unreachable(_)), "{err:?}");
    assert!(err.is_retryable());
}

#[test]
fn batch_over_http_retries_server_errors() {
    let fx = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures");
    let corpus = load_corpus(fx.join("corpus")).unwrap();
    let split = load_split(fx.join("split.json"), &corpus).unwrap();
    // Every third request fails once with a 503.
    let s = stub(Box::new(|n, _| {
        if n % 3 == 0 {
            (503, "{}".into())
        } else {
            (200, r#"{"text": " No."}"#.into())
        }
    }));
    let skeleton = compose("t4.c1.s5.o4".parse().unwrap(), &PartLibrary::default_library()).unwrap();
    let opts = BatchOptions {
        max_in_flight: 1,
        retries: 2,
        backoff: Duration::from_millis(1),
        ..BatchOptions::default()
    };
    let out = batch_predict(
        &split,
        &skeleton,
        &corpus,
        &backend(&s.url, WireFormat::Completion),
        &params(),
        &LabelLexicon::default(),
        &GenerationCache::in_memory(),
        &opts,
    )
    .unwrap();
    let prov = out.predictions.provenance.as_ref().unwrap();
    assert!(prov.failures.is_empty());
    assert!(prov.backend.starts_with("http:completion:"));
    assert_eq!(out.predictions.len(), 20);
    assert!(out.predictions.iter().all(|(_, l)| l == Label::Contradiction));
    assert!(out.backend_calls >= 20);
}
