//! Loopback HTTP service speaking the wire protocol from fixtures.
//!
//! Answers come from a [`ScriptedBackend`], so a run against the stub should
//! reproduce an in-process scripted run exactly. Faults can be injected at a
//! given tick, where the tick of a request is its window end divided by the
//! fixture's chunk size (rounded up).

use std::net::SocketAddr;
use std::sync::Arc;
use std::thread::{self, JoinHandle};
use std::time::Duration;

use tiny_http::{Header, Method, Request, Response, Server};

use super::wire::{WireRequest, WireResponse, TRANSCRIBE_PATH, TRANSLATE_PATH};
use super::{BackendError, ScriptedBackend};

/// Token the stub substitutes for the first committed word on a retraction fault.
pub const RETRACTED_TOKEN: &str = "<retracted>";

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct FaultPlan {
    /// Sleep this long before answering.
    pub delay_ms: u64,
    /// Restrict the delay to one tick; every request is delayed when unset.
    pub delay_on_tick: Option<u32>,
    /// Answer HTTP 500 for requests at this tick.
    pub fail_on_tick: Option<u32>,
    /// Rewrite the committed prefix of translate answers at this tick.
    pub retract_on_tick: Option<u32>,
}

pub struct StubServer {
    server: Arc<Server>,
    addr: SocketAddr,
    workers: Vec<JoinHandle<()>>,
}

#[derive(Debug, thiserror::Error)]
#[error("cannot bind stub server to {addr}: {message}")]
pub struct BindError {
    pub addr: String,
    pub message: String,
}

impl StubServer {
    /// Binds `addr` (use port 0 for an ephemeral port) and starts serving.
    pub fn start(
        addr: &str,
        backend: ScriptedBackend,
        faults: FaultPlan,
        workers: usize,
    ) -> Result<StubServer, BindError> {
        let server = Server::http(addr).map_err(|e| BindError {
            addr: addr.to_string(),
            message: e.to_string(),
        })?;
        let bound = server
            .server_addr()
            .to_ip()
            .expect("stub server binds TCP sockets");
        let server = Arc::new(server);
        let handler = Arc::new(Handler { backend, faults });
        let workers = (0..workers.max(1))
            .map(|_| {
                let server = Arc::clone(&server);
                let handler = Arc::clone(&handler);
                thread::spawn(move || {
                    while let Ok(request) = server.recv() {
                        handler.handle(request);
                    }
                })
            })
            .collect();
        Ok(StubServer {
            server,
            addr: bound,
            workers,
        })
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn base_url(&self) -> String {
        format!("http://{}", self.addr)
    }

    /// Blocks until the process is killed.
    pub fn join(mut self) {
        for worker in self.workers.drain(..) {
            let _ = worker.join();
        }
    }
}

impl Drop for StubServer {
    fn drop(&mut self) {
        for _ in 0..self.workers.len() {
            self.server.unblock();
        }
        for worker in self.workers.drain(..) {
            let _ = worker.join();
        }
    }
}

struct Handler {
    backend: ScriptedBackend,
    faults: FaultPlan,
}

impl Handler {
    fn handle(&self, mut request: Request) {
        let (status, body) = self.answer(&mut request);
        let header = Header::from_bytes("Content-Type", "application/json").expect("static header");
        let response = Response::from_string(body)
            .with_status_code(status)
            .with_header(header);
        if let Err(e) = request.respond(response) {
            log::debug!("stub: client went away: {e}");
        }
    }

    fn answer(&self, request: &mut Request) -> (u16, String) {
        if *request.method() != Method::Post {
            return (405, error_body("only POST is supported"));
        }
        let path = request.url().to_string();
        let mut raw = String::new();
        if let Err(e) = request.as_reader().read_to_string(&mut raw) {
            return (400, error_body(&format!("unreadable body: {e}")));
        }
        let wire: WireRequest = match serde_json::from_str(&raw) {
            Ok(w) => w,
            Err(e) => return (400, error_body(&format!("bad request JSON: {e}"))),
        };
        let Some(fixture) = self.backend.fixture(&wire.source_id) else {
            return (404, error_body(&format!("unknown source `{}`", wire.source_id)));
        };
        let tick = wire.window_ms[1].div_ceil(fixture.chunk_ms as u64) as u32;

        let delay_here = self.faults.delay_on_tick.is_none_or(|t| t == tick);
        if self.faults.delay_ms > 0 && delay_here {
            thread::sleep(Duration::from_millis(self.faults.delay_ms));
        }
        if self.faults.fail_on_tick == Some(tick) {
            return (500, error_body(&format!("injected failure at tick {tick}")));
        }

        let window = (wire.window_ms[0], wire.window_ms[1]);
        let result = match path.as_str() {
            TRANSCRIBE_PATH => self
                .backend
                .transcribe_window(&wire.source_id, window)
                .map(|t| WireResponse {
                    text: Some(t.text),
                    words: None,
                }),
            TRANSLATE_PATH => {
                let committed = wire.committed_words();
                self.backend
                    .continuation(
                        &wire.request_id,
                        &wire.source_id,
                        window,
                        &committed,
                        wire.max_words,
                    )
                    .map(|continuation| {
                        let mut words = committed;
                        if self.faults.retract_on_tick == Some(tick) {
                            if let Some(first) = words.first_mut() {
                                *first = RETRACTED_TOKEN.to_string();
                            }
                        }
                        words.extend(continuation);
                        WireResponse {
                            text: None,
                            words: Some(words),
                        }
                    })
            }
            other => return (404, error_body(&format!("no route for {other}"))),
        };
        match result {
            Ok(body) => (200, serde_json::to_string(&body).expect("response serializes")),
            Err(BackendError::UnknownSource { source_id }) => {
                (404, error_body(&format!("unknown source `{source_id}`")))
            }
            Err(e) => (422, error_body(&e.to_string())),
        }
    }
}

fn error_body(message: &str) -> String {
    serde_json::json!({ "error": message }).to_string()
}
