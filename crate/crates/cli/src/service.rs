//! HTTP front end. Every route calls the same operation as its CLI
//! counterpart and returns that operation's JSON body.
//!
//! | route | CLI |
//! |---|---|
//! | `GET /healthz` | |
//! | `GET /envs` | `env list` |
//! | `POST /envs` (register request) | `env register` |
//! | `GET /envs/{id}` | `env status` |
//! | `POST /envs/{id}/start\|reset[?seed=]\|stop\|health` | `env ...` |
//! | `DELETE /envs/{id}` | `env remove` |
//! | `POST /judge/eval` (`{"spec", "answer"\|"probe"}`) | `judge eval` |
//! | `POST /tasks/validate?env=` (task file) | `task validate` |
//! | `POST /tasks/revalidate?env=` (task file) | `task revalidate` |
//! | `POST /tasks/stats` (task file) | `task stats` |
//! | `POST /collect` (collect request) | `collect` |
//! | `POST /dataset/build` | `dataset build` |
//! | `POST /loop` | `loop` |

use std::io;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::Duration;

use serde_json::Value;
use tiny_http::{Header, Method, Request, Response, Server};

use crate::ops::{embedded_text, parse_body, JudgeTarget, OpError, Ops, Reply};

pub struct ServiceHandle {
    port: u16,
    stop: Arc<AtomicBool>,
    worker: Option<JoinHandle<()>>,
}

impl ServiceHandle {
    pub fn port(&self) -> u16 {
        self.port
    }

    pub fn stop_flag(&self) -> Arc<AtomicBool> {
        Arc::clone(&self.stop)
    }

    /// Block until the stop flag is raised and shutdown finished.
    pub fn wait(mut self) {
        if let Some(w) = self.worker.take() {
            let _ = w.join();
        }
    }

    /// Stop accepting requests and stop every running environment.
    pub fn shutdown(self) {
        self.stop.store(true, Ordering::SeqCst);
        self.wait();
    }
}

/// Bind and serve on a background thread, one thread per request.
pub fn start(ops: Arc<Ops>, host: &str, port: u16) -> io::Result<ServiceHandle> {
    let server = Server::http((host, port)).map_err(|e| io::Error::new(io::ErrorKind::AddrInUse, e.to_string()))?;
    let port = server.server_addr().to_ip().map(|a| a.port()).unwrap_or(port);
    let stop = Arc::new(AtomicBool::new(false));
    let flag = Arc::clone(&stop);
    let worker = std::thread::Builder::new().name("service".into()).spawn(move || {
        let mut inflight = Vec::new();
        while !flag.load(Ordering::SeqCst) {
            match server.recv_timeout(Duration::from_millis(100)) {
                Ok(Some(req)) => {
                    let ops = Arc::clone(&ops);
                    inflight.push(std::thread::spawn(move || handle(&ops, req)));
                    inflight.retain(|h: &JoinHandle<()>| !h.is_finished());
                }
                Ok(None) => {}
                Err(e) => {
                    tracing::error!(error = %e, "accept failed");
                    break;
                }
            }
        }
        for h in inflight {
            let _ = h.join();
        }
        for (id, r) in ops.lifecycle().stop_all() {
            match r {
                Ok(_) => tracing::info!(env_id = %id, "stopped on shutdown"),
                Err(e) => tracing::warn!(env_id = %id, error = %e, "stop on shutdown failed"),
            }
        }
    })?;
    Ok(ServiceHandle {
        port,
        stop,
        worker: Some(worker),
    })
}

fn json_header() -> Header {
    Header::from_bytes("Content-Type", "application/json").expect("static header")
}

fn query_param(query: &str, name: &str) -> Option<String> {
    url::form_urlencoded::parse(query.as_bytes())
        .find(|(k, _)| k == name)
        .map(|(_, v)| v.into_owned())
}

fn required(query: &str, name: &str) -> Result<String, OpError> {
    query_param(query, name).ok_or_else(|| OpError::BadRequest(format!("missing query parameter `{name}`")))
}

fn judge_request(body: &str) -> Result<(String, JudgeTarget), OpError> {
    let v: Value = parse_body(body)?;
    let spec = v.get("spec").ok_or_else(|| OpError::BadRequest("missing `spec`".into()))?;
    let target = match (v.get("answer"), v.get("probe")) {
        (Some(Value::String(a)), None) => JudgeTarget::Answer(a.clone()),
        (None, Some(p)) => JudgeTarget::Probe(embedded_text(p)),
        _ => return Err(OpError::BadRequest("give exactly one of `answer` (string) or `probe`".into())),
    };
    Ok((embedded_text(spec), target))
}

pub fn route(ops: &Ops, method: &Method, path: &str, query: &str, body: &str) -> Result<Reply, OpError> {
    let segments: Vec<&str> = path.trim_matches('/').split('/').collect();
    match (method, segments.as_slice()) {
        (Method::Get, ["healthz"]) => Ok(Reply {
            body: "{\"status\":\"ok\"}".into(),
            summary: String::new(),
        }),
        (Method::Get, ["envs"]) => ops.env_list(),
        (Method::Post, ["envs"]) => ops.env_register(&parse_body(body)?),
        (Method::Get, ["envs", id]) => ops.env_status(id),
        (Method::Delete, ["envs", id]) => ops.env_remove(id),
        (Method::Post, ["envs", id, "start"]) => ops.env_start(id),
        (Method::Post, ["envs", id, "reset"]) => {
            let seed = match query_param(query, "seed") {
                Some(s) => Some(s.parse().map_err(|_| OpError::BadRequest(format!("bad seed `{s}`")))?),
                None => None,
            };
            ops.env_reset(id, seed)
        }
        (Method::Post, ["envs", id, "stop"]) => ops.env_stop(id),
        (Method::Post, ["envs", id, "health"]) => ops.env_health(id),
        (Method::Post, ["judge", "eval"]) => {
            let (spec, target) = judge_request(body)?;
            ops.judge_eval(&spec, &target)
        }
        (Method::Post, ["tasks", "validate"]) => ops.task_validate(body, &required(query, "env")?),
        (Method::Post, ["tasks", "revalidate"]) => Ok(ops.task_revalidate(body, &required(query, "env")?)?.0),
        (Method::Post, ["tasks", "stats"]) => ops.task_stats(body),
        (Method::Post, ["collect"]) => ops.collect(&parse_body(body)?),
        (Method::Post, ["dataset", "build"]) => ops.dataset_build(&parse_body(body)?),
        (Method::Post, ["loop"]) => ops.run_loop(&parse_body(body)?),
        _ => Err(OpError::NoRoute(format!("no route for {method} {path}"))),
    }
}

fn handle(ops: &Ops, mut req: Request) {
    let mut body = String::new();
    let result = match req.as_reader().read_to_string(&mut body) {
        Ok(_) => {
            let url = req.url().to_string();
            let (path, query) = url.split_once('?').unwrap_or((url.as_str(), ""));
            route(ops, req.method(), path, query, &body)
        }
        Err(e) => Err(OpError::BadRequest(format!("unreadable body: {e}"))),
    };
    let (status, text) = match result {
        Ok(r) => (200, r.body),
        Err(e) => (e.http_status(), e.to_json()),
    };
    let resp = Response::from_string(text).with_status_code(status).with_header(json_header());
    if let Err(e) = req.respond(resp) {
        tracing::warn!(error = %e, "failed to send response");
    }
}
