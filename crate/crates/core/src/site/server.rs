//! HTTP face of the reference site.
//!
//! | route | body |
//! |---|---|
//! | `GET /healthz` | `ok` |
//! | `GET /sdk?call=<name>&args=<json object>` | `{"result": text}` or `{"error": ...}` (422) |
//! | `GET /state` | table dump (see [`crate::canonical`]) |
//! | `POST /episode` | fresh session, snapshot of `/` |
//! | `POST /action` | `BrowserAction` in, `StepOutcome` out; invalid element is 422 |
//! | `POST /reset[?seed=<n>]` | `{"state_hash": hex}` |
//! | `GET <any site route>` | navigate, return snapshot (404 status on not-found pages) |

use std::collections::BTreeMap;
use std::io;
use std::sync::Arc;
use std::thread::JoinHandle;

use serde_json::{json, Value};
use tiny_http::{Header, Method, Request, Response, Server};

use super::{BrowserAction, SdkCall, SharedSite};

pub struct SiteServer {
    port: u16,
    server: Arc<Server>,
    worker: Option<JoinHandle<()>>,
}

impl SiteServer {
    /// Bind `127.0.0.1:port` and serve requests on a background thread.
    pub fn bind(site: SharedSite, port: u16) -> io::Result<Self> {
        let server = Server::http(("127.0.0.1", port))
            .map_err(|e| io::Error::new(io::ErrorKind::AddrInUse, e.to_string()))?;
        let port = server
            .server_addr()
            .to_ip()
            .map(|a| a.port())
            .unwrap_or(port);
        let server = Arc::new(server);
        let worker = {
            let server = Arc::clone(&server);
            std::thread::Builder::new()
                .name(format!("site-{port}"))
                .spawn(move || {
                    for req in server.incoming_requests() {
                        handle(&site, req);
                    }
                })?
        };
        Ok(Self {
            port,
            server,
            worker: Some(worker),
        })
    }

    pub fn port(&self) -> u16 {
        self.port
    }

    pub fn shutdown(mut self) {
        self.stop();
    }

    fn stop(&mut self) {
        self.server.unblock();
        if let Some(w) = self.worker.take() {
            let _ = w.join();
        }
    }
}

impl Drop for SiteServer {
    fn drop(&mut self) {
        self.stop();
    }
}

fn reply(req: Request, status: u16, body: String) {
    let header = Header::from_bytes("Content-Type", "application/json; charset=utf-8")
        .expect("static header");
    let _ = req.respond(Response::from_string(body).with_status_code(status).with_header(header));
}

fn handle(site: &SharedSite, mut req: Request) {
    let raw_url = req.url().to_string();
    let (path, query) = raw_url.split_once('?').unwrap_or((raw_url.as_str(), ""));
    let params: BTreeMap<String, String> = url::form_urlencoded::parse(query.as_bytes())
        .into_owned()
        .collect();
    let mut body = String::new();
    if req.as_reader().read_to_string(&mut body).is_err() {
        return reply(req, 400, json!({"error": "unreadable body"}).to_string());
    }
    let method = req.method().clone();
    let mut site = match site.lock() {
        Ok(g) => g,
        Err(poisoned) => poisoned.into_inner(),
    };

    match (method, path) {
        (Method::Get, "/healthz") => reply(req, 200, "\"ok\"".into()),
        (Method::Get, "/sdk") => {
            let Some(name) = params.get("call") else {
                return reply(req, 400, json!({"error": "missing `call`"}).to_string());
            };
            let args: BTreeMap<String, String> = match params.get("args") {
                None => BTreeMap::new(),
                Some(raw) => match serde_json::from_str::<BTreeMap<String, Value>>(raw) {
                    Ok(map) => map
                        .into_iter()
                        .map(|(k, v)| (k, crate::judge::stringify(&v)))
                        .collect(),
                    Err(e) => {
                        return reply(req, 400, json!({"error": format!("bad args: {e}")}).to_string())
                    }
                },
            };
            let call = SdkCall {
                name: name.clone(),
                args,
                bind_as: None,
            };
            match site.sdk(&call) {
                Ok(result) => reply(req, 200, json!({ "result": result }).to_string()),
                Err(e) => reply(req, 422, json!({ "error": e }).to_string()),
            }
        }
        (Method::Get, "/state") => {
            let dump = serde_json::to_string(&site.dump()).expect("dump serializes");
            reply(req, 200, dump)
        }
        (Method::Post, "/episode") => {
            let snap = site.begin_episode();
            reply(req, 200, snap.to_json())
        }
        (Method::Post, "/action") => match serde_json::from_str::<BrowserAction>(&body) {
            Ok(action) => match site.act(&action) {
                Ok(outcome) => reply(req, 200, serde_json::to_string(&outcome).expect("outcome")),
                Err(e) => reply(req, 422, json!({ "error": e }).to_string()),
            },
            Err(e) => reply(req, 400, json!({"error": format!("bad action: {e}")}).to_string()),
        },
        (Method::Post, "/reset") => {
            match params.get("seed").map(|s| s.parse::<u64>()) {
                Some(Ok(seed)) => site.reseed(seed),
                Some(Err(_)) => {
                    return reply(req, 400, json!({"error": "seed must be an integer"}).to_string())
                }
                None => site.reset(),
            }
            reply(req, 200, json!({ "state_hash": site.state_hash() }).to_string())
        }
        (Method::Get, _) => {
            let snap = site.navigate(&raw_url);
            let status = if snap.is_not_found() { 404 } else { 200 };
            reply(req, status, snap.to_json())
        }
        _ => reply(req, 405, json!({"error": "method not allowed"}).to_string()),
    }
}
