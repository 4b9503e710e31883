use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Duration;

use molgraph::instructgen::{generate_dataset, BackendError, GenerateConfig, GenerationBackend, HttpBackend, MoleculeContext};

struct Seen {
    auth: Vec<Option<String>>,
    prompts: Vec<String>,
}

/// Serves `statuses` in order, then 200 for every further request.
fn serve(statuses: Vec<u16>, completion: &'static str) -> (String, Arc<Mutex<Seen>>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    let seen = Arc::new(Mutex::new(Seen { auth: Vec::new(), prompts: Vec::new() }));
    let log = seen.clone();
    thread::spawn(move || {
        let mut statuses = statuses.into_iter();
        for stream in listener.incoming() {
            let mut stream = stream.unwrap();
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let (mut len, mut auth) = (0, None);
            loop {
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                let line = line.trim_end();
                if line.is_empty() {
                    break;
                }
                if let Some((k, v)) = line.split_once(':') {
                    match k.to_ascii_lowercase().as_str() {
                        "content-length" => len = v.trim().parse().unwrap(),
                        "authorization" => auth = Some(v.trim().to_string()),
                        _ => {}
                    }
                }
            }
            let mut body = vec![0; len];
            reader.read_exact(&mut body).unwrap();
            let prompt: serde_json::Value = serde_json::from_slice(&body).unwrap();
            {
                let mut s = log.lock().unwrap();
                s.auth.push(auth);
                s.prompts.push(prompt["prompt"].as_str().unwrap().to_string());
            }
            let status = statuses.next().unwrap_or(200);
            let payload = if status == 200 { serde_json::json!({ "completion": completion }).to_string() } else { "busy".into() };
            write!(
                stream,
                "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{payload}",
                payload.len()
            )
            .unwrap();
        }
    });
    (format!("http://{addr}/complete"), seen)
}

const REPLY: &str = "Question:\nIs it an alcohol?\n===\nAnswer:\nYes.";

#[test]
fn sends_prompt_and_token() {
    let (url, seen) = serve(vec![], REPLY);
    let backend = HttpBackend::new(url, Some("sekret".into()), Duration::from_secs(5));
    assert_eq!(backend.complete("hello").unwrap(), REPLY);
    let s = seen.lock().unwrap();
    assert_eq!(s.auth, vec![Some("Bearer sekret".to_string())]);
    assert_eq!(s.prompts, vec!["hello".to_string()]);
}

#[test]
fn status_classes() {
    let (url, _) = serve(vec![429, 401], REPLY);
    let backend = HttpBackend::new(url, None, Duration::from_secs(5));
    assert_eq!(backend.complete("a"), Err(BackendError::RateLimited));
    match backend.complete("b") {
        Err(e @ BackendError::Status { status: 401, .. }) => assert!(!e.is_retryable()),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn generation_retries_rate_limits() {
    let (url, seen) = serve(vec![429, 429], REPLY);
    let backend = HttpBackend::new(url, None, Duration::from_secs(5));
    let contexts = vec![MoleculeContext { smiles: "CCO".into(), caption: "Ethanol.".into(), iupac: None }];
    let config = GenerateConfig { concurrency: 1, backoff_base_ms: 1, ..Default::default() };
    let out = generate_dataset(&contexts, &backend, &config).unwrap();
    assert_eq!(out.stats.retries, 2);
    assert_eq!(out.stats.kept, 1);
    assert_eq!(out.records[0].conversation[0].answer, "Yes.");
    assert_eq!(seen.lock().unwrap().auth, vec![None; 4]);
}
