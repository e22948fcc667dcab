//! Minimal scripted HTTP server on a loopback port. Each accepted
//! connection consumes the next reply in the script; the last reply repeats
//! once the script is exhausted.

// each test binary compiles this module separately and uses a subset of it
#![allow(dead_code)]

use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

pub enum Reply {
    Json(u16, String),
    /// Close the connection without writing a response.
    Drop,
}

pub struct MockServer {
    url: String,
    hits: Arc<AtomicUsize>,
    bodies: Arc<Mutex<Vec<String>>>,
}

impl MockServer {
    pub fn start(script: Vec<Reply>) -> MockServer {
        assert!(!script.is_empty(), "script must not be empty");
        let listener = TcpListener::bind("127.0.0.1:0").expect("bind loopback");
        let url = format!("http://{}", listener.local_addr().unwrap());
        let hits = Arc::new(AtomicUsize::new(0));
        let bodies = Arc::new(Mutex::new(Vec::new()));
        let worker_hits = Arc::clone(&hits);
        let worker_bodies = Arc::clone(&bodies);
        std::thread::spawn(move || {
            let mut served = 0usize;
            for stream in listener.incoming() {
                let Ok(stream) = stream else { break };
                worker_hits.fetch_add(1, Ordering::SeqCst);
                let reply = &script[served.min(script.len() - 1)];
                served += 1;
                serve_one(stream, reply, &worker_bodies);
            }
        });
        MockServer { url, hits, bodies }
    }

    pub fn url(&self) -> String {
        self.url.clone()
    }

    pub fn hits(&self) -> usize {
        self.hits.load(Ordering::SeqCst)
    }

    pub fn request_bodies(&self) -> Vec<String> {
        self.bodies.lock().unwrap().clone()
    }
}

fn serve_one(stream: TcpStream, reply: &Reply, bodies: &Mutex<Vec<String>>) {
    let mut reader = BufReader::new(stream);
    let mut request_line = String::new();
    if reader.read_line(&mut request_line).is_err() {
        return;
    }
    let mut content_length = 0usize;
    loop {
        let mut header = String::new();
        match reader.read_line(&mut header) {
            Ok(0) | Err(_) => return,
            Ok(_) => {}
        }
        if header == "\r\n" || header == "\n" {
            break;
        }
        if let Some(rest) = header.to_ascii_lowercase().strip_prefix("content-length:") {
            content_length = rest.trim().parse().unwrap_or(0);
        }
    }
    let mut body = vec![0u8; content_length];
    if reader.read_exact(&mut body).is_err() {
        return;
    }
    bodies
        .lock()
        .unwrap()
        .push(String::from_utf8_lossy(&body).into_owned());
    let mut stream = reader.into_inner();
    match reply {
        Reply::Drop => {}
        Reply::Json(status, text) => {
            let response = format!(
                "HTTP/1.1 {status} mock\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{text}",
                text.len()
            );
            let _ = stream.write_all(response.as_bytes());
        }
    }
}

/// OpenAI-shaped success body whose completion content is `content`.
pub fn openai_body(content: &str) -> String {
    serde_json::json!({
        "choices": [{"message": {"content": content}}]
    })
    .to_string()
}
