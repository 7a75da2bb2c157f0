//! Pluggable timestamp-authority client.
//!
//! The authority anchors Merkle roots on some medium linear in time (a
//! public ledger in production). Two implementations ship here: an
//! in-process [`MockAuthority`] with configurable confirmation delay and
//! failure rate, and [`HttpAuthority`], a minimal HTTP/1.1 JSON client
//! for the same protocol. [`serve_loopback`] exposes a `MockAuthority`
//! over a loopback socket so the wire exchange can be tested end to end.
//!
//! Wire protocol (JSON over POST):
//!
//! ```text
//! POST /submit  {"merkle_root": "<hex64>"}
//!   -> {"submission_id": "...", "status": "pending"}
//! POST /status  {"submission_id": "..."}
//!   -> {"status": "pending" | "confirmed" | "failed",
//!       "anchor_ref": "...",     (confirmed only)
//!       "confirmed_at": 1700000000}
//! ```

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Read, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AuthorityError {
    #[error("authority unreachable: {0}")]
    Unreachable(String),
    #[error("authority protocol error: {0}")]
    Protocol(String),
    #[error("unknown submission id {0}")]
    UnknownSubmission(String),
}

/// Submission lifecycle at the authority.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SubmissionStatus {
    Pending,
    Confirmed,
    Failed,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SubmitResponse {
    pub submission_id: String,
    pub status: SubmissionStatus,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StatusResponse {
    pub status: SubmissionStatus,
    /// Block/transaction reference, present once confirmed.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub anchor_ref: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub confirmed_at: Option<u64>,
}

/// Client-side contract for a timestamp authority.
pub trait TimestampAuthority: Send {
    /// Submit a Merkle root for anchoring.
    fn submit(&self, merkle_root: &[u8; 32]) -> Result<SubmitResponse, AuthorityError>;
    /// Query the status of an earlier submission.
    fn status(&self, submission_id: &str) -> Result<StatusResponse, AuthorityError>;
}

// ---------------------------------------------------------------------------
// Mock authority
// ---------------------------------------------------------------------------

/// Behaviour knobs for the mock.
#[derive(Debug, Clone)]
pub struct MockConfig {
    /// Number of status polls a submission stays pending before it
    /// confirms. `u32::MAX` means it never confirms.
    pub confirmation_delay_cycles: u32,
    /// Probability in [0,1] that a submission ends up failed instead of
    /// confirmed.
    pub failure_rate: f64,
    /// Seed for the failure draw, so runs are reproducible.
    pub seed: u64,
}

impl Default for MockConfig {
    fn default() -> Self {
        MockConfig {
            confirmation_delay_cycles: 2,
            failure_rate: 0.0,
            seed: 1,
        }
    }
}

struct MockSubmission {
    root_hex: String,
    polls_seen: u32,
    fails: bool,
}

struct MockState {
    submissions: HashMap<String, MockSubmission>,
    next_id: u64,
    rng_state: u64,
}

/// In-process authority: confirms each submission after a configurable
/// number of status polls, optionally failing a fraction of them.
#[derive(Clone)]
pub struct MockAuthority {
    config: MockConfig,
    state: Arc<Mutex<MockState>>,
    offline: Arc<AtomicBool>,
}

impl MockAuthority {
    pub fn new(config: MockConfig) -> Self {
        let seed = config.seed;
        MockAuthority {
            config,
            state: Arc::new(Mutex::new(MockState {
                submissions: HashMap::new(),
                next_id: 1,
                rng_state: seed.max(1),
            })),
            offline: Arc::new(AtomicBool::new(false)),
        }
    }

    /// Simulate the authority being unreachable.
    pub fn set_offline(&self, offline: bool) {
        self.offline.store(offline, Ordering::SeqCst);
    }

    fn draw_failure(state: &mut MockState, rate: f64) -> bool {
        if rate <= 0.0 {
            return false;
        }
        // xorshift64*; good enough for a test fixture.
        let mut x = state.rng_state;
        x ^= x >> 12;
        x ^= x << 25;
        x ^= x >> 27;
        state.rng_state = x;
        let unit = (x.wrapping_mul(0x2545F4914F6CDD1D) >> 11) as f64 / (1u64 << 53) as f64;
        unit < rate
    }
}

impl TimestampAuthority for MockAuthority {
    fn submit(&self, merkle_root: &[u8; 32]) -> Result<SubmitResponse, AuthorityError> {
        if self.offline.load(Ordering::SeqCst) {
            return Err(AuthorityError::Unreachable("mock authority offline".into()));
        }
        let mut state = self.state.lock().unwrap();
        let fails = Self::draw_failure(&mut state, self.config.failure_rate);
        let id = format!("mock-{:06}", state.next_id);
        state.next_id += 1;
        state.submissions.insert(
            id.clone(),
            MockSubmission {
                root_hex: hex::encode(merkle_root),
                polls_seen: 0,
                fails,
            },
        );
        Ok(SubmitResponse {
            submission_id: id,
            status: SubmissionStatus::Pending,
        })
    }

    fn status(&self, submission_id: &str) -> Result<StatusResponse, AuthorityError> {
        if self.offline.load(Ordering::SeqCst) {
            return Err(AuthorityError::Unreachable("mock authority offline".into()));
        }
        let mut state = self.state.lock().unwrap();
        let delay = self.config.confirmation_delay_cycles;
        let sub = state
            .submissions
            .get_mut(submission_id)
            .ok_or_else(|| AuthorityError::UnknownSubmission(submission_id.to_string()))?;
        sub.polls_seen = sub.polls_seen.saturating_add(1);
        if sub.polls_seen < delay || delay == u32::MAX {
            return Ok(StatusResponse {
                status: SubmissionStatus::Pending,
                anchor_ref: None,
                confirmed_at: None,
            });
        }
        if sub.fails {
            return Ok(StatusResponse {
                status: SubmissionStatus::Failed,
                anchor_ref: None,
                confirmed_at: None,
            });
        }
        Ok(StatusResponse {
            status: SubmissionStatus::Confirmed,
            anchor_ref: Some(format!("mock-block/{}/{}", submission_id, &sub.root_hex[..16])),
            confirmed_at: Some(crate::provider::now_epoch()),
        })
    }
}

// ---------------------------------------------------------------------------
// Loopback HTTP exchange
// ---------------------------------------------------------------------------

#[derive(Deserialize)]
struct SubmitRequest {
    merkle_root: String,
}

#[derive(Deserialize)]
struct StatusRequest {
    submission_id: String,
}

/// HTTP/1.1 JSON client for the authority protocol.
pub struct HttpAuthority {
    /// `host:port` of the authority endpoint.
    addr: String,
    timeout: Duration,
}

impl HttpAuthority {
    pub fn new(addr: impl Into<String>) -> Self {
        HttpAuthority {
            addr: addr.into(),
            timeout: Duration::from_secs(5),
        }
    }

    fn post(&self, path: &str, body: &str) -> Result<String, AuthorityError> {
        let unreachable = |e: std::io::Error| AuthorityError::Unreachable(e.to_string());
        let mut stream = TcpStream::connect(&self.addr).map_err(unreachable)?;
        stream.set_read_timeout(Some(self.timeout)).map_err(unreachable)?;
        stream.set_write_timeout(Some(self.timeout)).map_err(unreachable)?;

        let request = format!(
            "POST {path} HTTP/1.1\r\nHost: {}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
            self.addr,
            body.len(),
        );
        stream.write_all(request.as_bytes()).map_err(unreachable)?;

        let mut reader = BufReader::new(stream);
        let mut status_line = String::new();
        reader.read_line(&mut status_line).map_err(unreachable)?;
        let code = status_line
            .split_whitespace()
            .nth(1)
            .and_then(|c| c.parse::<u16>().ok())
            .ok_or_else(|| AuthorityError::Protocol(format!("bad status line {status_line:?}")))?;

        let mut content_length = 0usize;
        loop {
            let mut line = String::new();
            reader.read_line(&mut line).map_err(unreachable)?;
            let line = line.trim_end();
            if line.is_empty() {
                break;
            }
            if let Some(value) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                content_length = value.trim().parse().unwrap_or(0);
            }
        }
        let mut body = vec![0u8; content_length];
        reader.read_exact(&mut body).map_err(unreachable)?;
        let body = String::from_utf8(body)
            .map_err(|e| AuthorityError::Protocol(format!("non-UTF-8 body: {e}")))?;

        if code != 200 {
            return Err(AuthorityError::Protocol(format!("HTTP {code}: {body}")));
        }
        Ok(body)
    }
}

impl TimestampAuthority for HttpAuthority {
    fn submit(&self, merkle_root: &[u8; 32]) -> Result<SubmitResponse, AuthorityError> {
        let body = serde_json::json!({ "merkle_root": hex::encode(merkle_root) }).to_string();
        let response = self.post("/submit", &body)?;
        serde_json::from_str(&response)
            .map_err(|e| AuthorityError::Protocol(format!("bad submit response: {e}")))
    }

    fn status(&self, submission_id: &str) -> Result<StatusResponse, AuthorityError> {
        let body = serde_json::json!({ "submission_id": submission_id }).to_string();
        let response = self.post("/status", &body)?;
        serde_json::from_str(&response)
            .map_err(|e| AuthorityError::Protocol(format!("bad status response: {e}")))
    }
}

/// Handle for a loopback authority server; the listener thread stops when
/// this is dropped.
pub struct LoopbackServer {
    pub addr: SocketAddr,
    stop: Arc<AtomicBool>,
    handle: Option<std::thread::JoinHandle<()>>,
}

impl Drop for LoopbackServer {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        // Nudge the accept loop so it observes the stop flag.
        let _ = TcpStream::connect(self.addr);
        if let Some(handle) = self.handle.take() {
            let _ = handle.join();
        }
    }
}

/// Serve a mock authority over a loopback socket, one request per
/// connection, using the documented JSON exchange.
pub fn serve_loopback(mock: MockAuthority) -> std::io::Result<LoopbackServer> {
    let listener = TcpListener::bind("127.0.0.1:0")?;
    let addr = listener.local_addr()?;
    let stop = Arc::new(AtomicBool::new(false));
    let stop_flag = Arc::clone(&stop);

    let handle = std::thread::spawn(move || {
        for stream in listener.incoming() {
            if stop_flag.load(Ordering::SeqCst) {
                break;
            }
            let Ok(stream) = stream else { continue };
            let _ = handle_connection(stream, &mock);
        }
    });

    Ok(LoopbackServer {
        addr,
        stop,
        handle: Some(handle),
    })
}

fn http_response(stream: &mut TcpStream, code: u16, reason: &str, body: &str) -> std::io::Result<()> {
    let response = format!(
        "HTTP/1.1 {code} {reason}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
        body.len(),
    );
    stream.write_all(response.as_bytes())
}

fn handle_connection(stream: TcpStream, mock: &MockAuthority) -> std::io::Result<()> {
    stream.set_read_timeout(Some(Duration::from_secs(5)))?;
    let mut reader = BufReader::new(stream);

    let mut request_line = String::new();
    reader.read_line(&mut request_line)?;
    let mut parts = request_line.split_whitespace();
    let method = parts.next().unwrap_or("");
    let path = parts.next().unwrap_or("");

    let mut content_length = 0usize;
    loop {
        let mut line = String::new();
        reader.read_line(&mut line)?;
        let line = line.trim_end();
        if line.is_empty() {
            break;
        }
        if let Some(value) = line.to_ascii_lowercase().strip_prefix("content-length:") {
            content_length = value.trim().parse().unwrap_or(0);
        }
    }
    let mut body = vec![0u8; content_length];
    reader.read_exact(&mut body)?;
    let mut stream = reader.into_inner();

    if method != "POST" {
        return http_response(&mut stream, 405, "Method Not Allowed", "{\"error\":\"POST only\"}");
    }

    let result = match path {
        "/submit" => serde_json::from_slice::<SubmitRequest>(&body)
            .map_err(|e| format!("bad request: {e}"))
            .and_then(|req| {
                let root: [u8; 32] = hex::decode(&req.merkle_root)
                    .ok()
                    .and_then(|v| v.try_into().ok())
                    .ok_or_else(|| "merkle_root must be 64 hex chars".to_string())?;
                mock.submit(&root)
                    .map(|r| serde_json::to_string(&r).unwrap())
                    .map_err(|e| e.to_string())
            }),
        "/status" => serde_json::from_slice::<StatusRequest>(&body)
            .map_err(|e| format!("bad request: {e}"))
            .and_then(|req| {
                mock.status(&req.submission_id)
                    .map(|r| serde_json::to_string(&r).unwrap())
                    .map_err(|e| e.to_string())
            }),
        _ => Err(format!("no such endpoint {path}")),
    };

    match result {
        Ok(body) => http_response(&mut stream, 200, "OK", &body),
        Err(msg) => {
            let body = serde_json::json!({ "error": msg }).to_string();
            http_response(&mut stream, 400, "Bad Request", &body)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mock_confirms_after_delay() {
        let mock = MockAuthority::new(MockConfig {
            confirmation_delay_cycles: 2,
            ..Default::default()
        });
        let sub = mock.submit(&[1u8; 32]).unwrap();
        assert_eq!(sub.status, SubmissionStatus::Pending);

        let first = mock.status(&sub.submission_id).unwrap();
        assert_eq!(first.status, SubmissionStatus::Pending);
        let second = mock.status(&sub.submission_id).unwrap();
        assert_eq!(second.status, SubmissionStatus::Confirmed);
        assert!(second.anchor_ref.is_some());
        assert!(second.confirmed_at.is_some());
    }

    #[test]
    fn mock_offline_is_unreachable() {
        let mock = MockAuthority::new(MockConfig::default());
        mock.set_offline(true);
        assert!(matches!(
            mock.submit(&[0u8; 32]),
            Err(AuthorityError::Unreachable(_))
        ));
        mock.set_offline(false);
        assert!(mock.submit(&[0u8; 32]).is_ok());
    }

    #[test]
    fn mock_failure_rate_one_always_fails() {
        let mock = MockAuthority::new(MockConfig {
            confirmation_delay_cycles: 1,
            failure_rate: 1.0,
            seed: 7,
        });
        let sub = mock.submit(&[2u8; 32]).unwrap();
        let status = mock.status(&sub.submission_id).unwrap();
        assert_eq!(status.status, SubmissionStatus::Failed);
    }

    #[test]
    fn loopback_exchange_roundtrip() {
        let mock = MockAuthority::new(MockConfig {
            confirmation_delay_cycles: 1,
            ..Default::default()
        });
        let server = serve_loopback(mock).unwrap();
        let client = HttpAuthority::new(server.addr.to_string());

        let sub = client.submit(&[3u8; 32]).unwrap();
        assert_eq!(sub.status, SubmissionStatus::Pending);
        let status = client.status(&sub.submission_id).unwrap();
        assert_eq!(status.status, SubmissionStatus::Confirmed);
        assert!(status.anchor_ref.is_some());

        assert!(matches!(
            client.status("no-such-id"),
            Err(AuthorityError::Protocol(_))
        ));
    }

    #[test]
    fn client_reports_unreachable_endpoint() {
        // Port 1 on loopback is essentially never listening.
        let client = HttpAuthority::new("127.0.0.1:1");
        assert!(matches!(
            client.submit(&[0u8; 32]),
            Err(AuthorityError::Unreachable(_))
        ));
    }
}
