//! Minimal HTTP server replaying canned replies, one per connection.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Duration;

#[derive(Clone)]
pub enum Reply {
    Status(u16, String),
    /// Accept the request and never answer.
    Hang,
}

pub fn ok_completion(text: &str) -> Reply {
    let body = serde_json::json!({"choices": [{"message": {"role": "assistant", "content": text}}]});
    Reply::Status(200, body.to_string())
}

pub struct Stub {
    pub url: String,
    /// Request bodies in arrival order.
    pub bodies: Arc<Mutex<Vec<String>>>,
}

impl Stub {
    /// Serves `replies` in order; the last one repeats once they run out.
    pub fn start(replies: Vec<Reply>) -> Stub {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let url = format!("http://{}", listener.local_addr().unwrap());
        let bodies = Arc::new(Mutex::new(Vec::new()));
        let seen = bodies.clone();
        thread::spawn(move || {
            let mut n = 0usize;
            for conn in listener.incoming() {
                let Ok(mut conn) = conn else { continue };
                let mut reader = BufReader::new(conn.try_clone().unwrap());
                let mut len = 0usize;
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
                            len = v.trim().parse().unwrap_or(0);
                        }
                    }
                }
                let mut body = vec![0u8; len];
                let _ = reader.read_exact(&mut body);
                seen.lock().unwrap().push(String::from_utf8_lossy(&body).into_owned());
                let reply = replies[n.min(replies.len() - 1)].clone();
                n += 1;
                match reply {
                    Reply::Status(code, text) => {
                        let head = format!(
                            "HTTP/1.1 {code} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n",
                            text.len()
                        );
                        let _ = conn.write_all(head.as_bytes());
                        let _ = conn.write_all(text.as_bytes());
                    }
                    Reply::Hang => {
                        thread::spawn(move || {
                            thread::sleep(Duration::from_secs(5));
                            drop(conn);
                        });
                    }
                }
            }
        });
        Stub { url, bodies }
    }

    pub fn hits(&self) -> usize {
        self.bodies.lock().unwrap().len()
    }
}

/// A local address with nothing listening on it.
pub fn dead_url() -> String {
    let l = TcpListener::bind("127.0.0.1:0").unwrap();
    format!("http://{}", l.local_addr().unwrap())
}
