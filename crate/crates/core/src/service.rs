//! Loopback HTTP server speaking the model, critic and refiner wire
//! protocol, for tests and local experiments.
//!
//! Routes: `GET /v1/vocab`, `POST /v1/next`, `POST /v1/critic`,
//! `POST /v1/refine`. Requests are validated; bad ones get status 400.

use std::net::SocketAddr;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::Duration;

use serde::Serialize;
use tiny_http::{Header, Method, Response, Server};

use crate::debugger::{CriticRequest, CriticResponse, RefineRequest, RefineResponse};
use crate::model::{LanguageModel, NextRequest, NextResponse, VocabResponse, VOCAB_VERSION};

/// How the mock answers each route.
pub struct MockBehavior {
    /// Serves this model's vocabulary and distributions.
    pub model: Option<Arc<dyn LanguageModel>>,
    /// Returned verbatim from `/v1/next` instead of the model's output.
    pub fixed_probs: Option<Vec<f64>>,
    /// Returned from `/v1/critic`; the default accepts with `p_correct = 1`.
    pub critic: CriticResponse,
    /// Returned from `/v1/refine`; `None` echoes the request program.
    pub refined_program: Option<String>,
    /// Sleep before answering any request.
    pub delay: Duration,
}

impl Default for MockBehavior {
    fn default() -> Self {
        MockBehavior {
            model: None,
            fixed_probs: None,
            critic: CriticResponse {
                p_correct: 1.0,
                marked_program: None,
            },
            refined_program: None,
            delay: Duration::ZERO,
        }
    }
}

/// A running mock server; stops when dropped.
pub struct MockServer {
    addr: SocketAddr,
    server: Arc<Server>,
    stop: Arc<AtomicBool>,
    requests: Arc<AtomicUsize>,
    workers: Vec<JoinHandle<()>>,
}

impl MockServer {
    /// Binds `addr` (use port 0 for an ephemeral port) and starts serving.
    pub fn start(addr: &str, behavior: MockBehavior) -> std::io::Result<MockServer> {
        let server = Server::http(addr).map_err(std::io::Error::other)?;
        let bound = server
            .server_addr()
            .to_ip()
            .ok_or_else(|| std::io::Error::other("server is not bound to an IP address"))?;
        let server = Arc::new(server);
        let behavior = Arc::new(behavior);
        let stop = Arc::new(AtomicBool::new(false));
        let requests = Arc::new(AtomicUsize::new(0));
        let workers = (0..4)
            .map(|_| {
                let (server, behavior, stop, requests) =
                    (server.clone(), behavior.clone(), stop.clone(), requests.clone());
                std::thread::spawn(move || {
                    while !stop.load(Ordering::Relaxed) {
                        match server.recv_timeout(Duration::from_millis(50)) {
                            Ok(Some(req)) => {
                                requests.fetch_add(1, Ordering::Relaxed);
                                handle(req, &behavior);
                            }
                            Ok(None) => {}
                            Err(e) => {
                                log::warn!("mock server receive failed: {e}");
                                break;
                            }
                        }
                    }
                })
            })
            .collect();
        Ok(MockServer {
            addr: bound,
            server,
            stop,
            requests,
            workers,
        })
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }

    /// Requests received so far.
    pub fn request_count(&self) -> usize {
        self.requests.load(Ordering::Relaxed)
    }

    /// Blocks until the server is stopped from another thread or the
    /// process exits.
    pub fn wait(mut self) {
        for w in self.workers.drain(..) {
            let _ = w.join();
        }
    }
}

impl Drop for MockServer {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::Relaxed);
        self.server.unblock();
        for w in self.workers.drain(..) {
            let _ = w.join();
        }
    }
}

fn json_response<T: Serialize>(status: u16, body: &T) -> Response<std::io::Cursor<Vec<u8>>> {
    let header = Header::from_bytes("Content-Type", "application/json").expect("static header is valid");
    Response::from_string(serde_json::to_string(body).expect("responses serialize"))
        .with_status_code(status)
        .with_header(header)
}

#[derive(Serialize)]
struct ErrorBody {
    error: String,
}

fn bad_request(msg: impl Into<String>) -> Response<std::io::Cursor<Vec<u8>>> {
    json_response(400, &ErrorBody { error: msg.into() })
}

fn handle(mut req: tiny_http::Request, behavior: &MockBehavior) {
    if !behavior.delay.is_zero() {
        std::thread::sleep(behavior.delay);
    }
    let mut body = String::new();
    if let Err(e) = req.as_reader().read_to_string(&mut body) {
        let _ = req.respond(bad_request(format!("unreadable body: {e}")));
        return;
    }
    let resp = route(req.method(), req.url(), &body, behavior);
    if let Err(e) = req.respond(resp) {
        log::debug!("client went away: {e}");
    }
}

fn route(method: &Method, url: &str, body: &str, b: &MockBehavior) -> Response<std::io::Cursor<Vec<u8>>> {
    match (method, url) {
        (Method::Get, "/v1/vocab") => match &b.model {
            Some(m) => json_response(
                200,
                &VocabResponse {
                    version: VOCAB_VERSION,
                    tokens: m.vocab().tokens().to_vec(),
                },
            ),
            None => json_response(404, &ErrorBody { error: "no model configured".into() }),
        },
        (Method::Post, "/v1/next") => {
            let req: NextRequest = match serde_json::from_str(body) {
                Ok(r) => r,
                Err(e) => return bad_request(e.to_string()),
            };
            if let Some(p) = &b.fixed_probs {
                return json_response(200, &NextResponse { probs: p.clone() });
            }
            let Some(m) = &b.model else {
                return json_response(404, &ErrorBody { error: "no model configured".into() });
            };
            if let Some(bad) = req.context.iter().find(|&&id| id as usize >= m.vocab().len()) {
                return bad_request(format!("token id {bad} out of range"));
            }
            match m.next_distribution(&req.context) {
                Ok(d) => json_response(200, &NextResponse { probs: d.probs().to_vec() }),
                Err(e) => json_response(500, &ErrorBody { error: e.to_string() }),
            }
        }
        (Method::Post, "/v1/critic") => match serde_json::from_str::<CriticRequest>(body) {
            Ok(_) => json_response(200, &b.critic),
            Err(e) => bad_request(e.to_string()),
        },
        (Method::Post, "/v1/refine") => match serde_json::from_str::<RefineRequest>(body) {
            Ok(r) => json_response(
                200,
                &RefineResponse {
                    program: b.refined_program.clone().unwrap_or(r.program),
                },
            ),
            Err(e) => bad_request(e.to_string()),
        },
        _ => json_response(404, &ErrorBody { error: format!("no route for {method} {url}") }),
    }
}
