use std::fs;
use std::os::unix::fs::PermissionsExt;
use std::path::Path;
use std::sync::Arc;
use std::time::Duration;

use webenv_core::canonical::StateDump;
use webenv_core::env::Environment;
use webenv_core::lifecycle::process::probe;
use webenv_core::lifecycle::{EnvState, EnvironmentManifest, Lifecycle, LifecycleConfig, ManagedEnv};

const SERVER: &str = r#"
import json, sys
from http.server import BaseHTTPRequestHandler, HTTPServer

class H(BaseHTTPRequestHandler):
    def log_message(self, *a):
        pass

    def reply(self, code, body):
        data = body.encode()
        self.send_response(code)
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    def do_GET(self):
        if self.path == "/healthz":
            self.reply(200, "ok")
        elif self.path == "/state":
            self.reply(200, open("db.json").read())
        else:
            self.reply(404, "")

    def do_POST(self):
        if self.path == "/mutate":
            db = json.load(open("db.json"))
            db["items"][str(len(db["items"]) + 1)] = {"note": "added"}
            json.dump(db, open("db.json", "w"))
            self.reply(200, "ok")
        else:
            self.reply(404, "")

HTTPServer(("127.0.0.1", int(sys.argv[1])), H).serve_forever()
"#;

const SEED_DB: &str = r#"python3 -c 'import json,os; json.dump({"items": {"1": {"seed": int(os.environ["WEBENV_SEED"]) + OFFSET}}}, open("db.json", "w"))'"#;

fn free_port() -> u16 {
    std::net::TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port()
}

fn script(path: &Path, body: &str) {
    fs::write(path, format!("#!/bin/sh\nset -e\n{body}\n")).unwrap();
    fs::set_permissions(path, fs::Permissions::from_mode(0o755)).unwrap();
}

/// Code directory with one server per port; `drift` makes the reset script
/// restore a different database than the start script.
fn code_dir(root: &Path, ports: &[u16], drift: bool) {
    fs::create_dir_all(root).unwrap();
    fs::write(root.join("server.py"), SERVER).unwrap();
    fs::write(root.join("ports.json"), serde_json::to_string(ports).unwrap()).unwrap();
    script(
        &root.join("start_servers.sh"),
        &format!(
            "{}\nfor p in $(echo \"$WEBENV_PORTS\" | tr ',' ' '); do python3 server.py \"$p\" & done\nwait",
            SEED_DB.replace("OFFSET", "0")
        ),
    );
    let offset = if drift { "1" } else { "0" };
    script(&root.join("reset_servers.sh"), &SEED_DB.replace("OFFSET", offset));
}

fn manager(dir: &Path) -> Arc<Lifecycle> {
    let mut cfg = LifecycleConfig::new(dir.join("registry.json"));
    cfg.start_timeout = Duration::from_secs(20);
    Arc::new(Lifecycle::open(cfg).unwrap())
}

fn expected_hash(seed: u64) -> String {
    let raw = format!(r#"{{"items": {{"1": {{"seed": {seed}}}}}}}"#);
    serde_json::from_str::<StateDump>(&raw).unwrap().digest()
}

#[test]
fn external_env_full_cycle() {
    let dir = tempfile::tempdir().unwrap();
    let ports = [free_port(), free_port()];
    let code = dir.path().join("site");
    code_dir(&code, &ports, false);
    let lc = manager(dir.path());
    lc.register(EnvironmentManifest::external("ext", &code, 7).unwrap()).unwrap();

    let s = lc.start("ext").unwrap();
    assert_eq!(s.state, EnvState::Healthy);
    assert_eq!(s.state_hash.as_deref(), Some(expected_hash(7).as_str()));
    assert!(ports.iter().all(|&p| probe(p, Duration::from_secs(1))));

    let url = format!("http://127.0.0.1:{}/mutate", ports[0]);
    ureq::post(&url).call().unwrap();
    assert_ne!(lc.state_hash("ext").unwrap(), expected_hash(7));

    let s = lc.reset("ext").unwrap();
    assert_eq!(s.state_hash.as_deref(), Some(expected_hash(7).as_str()));

    // Resets routed through the managed handle are hash-checked too.
    let env = ManagedEnv::new(lc.clone(), "ext").unwrap();
    ureq::post(&url).call().unwrap();
    env.reset().unwrap();
    assert_eq!(env.state().unwrap().digest(), expected_hash(7));

    lc.stop("ext").unwrap();
    assert_eq!(lc.status("ext").unwrap().state, EnvState::Stopped);
    assert!(ports.iter().all(|&p| !probe(p, Duration::from_millis(300))), "servers outlived stop");
    assert!(fs::read_to_string(dir.path().join("logs/ext.log")).is_ok());

    // Restart from stopped is allowed.
    assert_eq!(lc.start("ext").unwrap().state, EnvState::Healthy);
    lc.stop("ext").unwrap();
    assert!(lc.registry_snapshot().logs_legal());
}

#[test]
fn drifting_reset_is_detected() {
    let dir = tempfile::tempdir().unwrap();
    let code = dir.path().join("site");
    code_dir(&code, &[free_port()], true);
    let lc = manager(dir.path());
    lc.register(EnvironmentManifest::external("ext", &code, 3).unwrap()).unwrap();
    lc.start("ext").unwrap();
    let err = lc.reset("ext").unwrap_err();
    assert_eq!(err.kind(), "ResetDrift");
    let status = lc.status("ext").unwrap();
    assert_eq!(status.state, EnvState::Unhealthy);
    assert_eq!(status.state_hash.as_deref(), Some(expected_hash(4).as_str()));
    lc.stop("ext").unwrap();
}

#[test]
fn failing_start_script_reports_exit_code_and_tail() {
    let dir = tempfile::tempdir().unwrap();
    let code = dir.path().join("site");
    code_dir(&code, &[free_port()], false);
    script(&code.join("start_servers.sh"), "echo 'database missing' >&2\nexit 3");
    let lc = manager(dir.path());
    lc.register(EnvironmentManifest::external("ext", &code, 1).unwrap()).unwrap();
    let err = lc.start("ext").unwrap_err();
    assert_eq!(err.kind(), "ScriptExit");
    let msg = err.to_string();
    assert!(msg.contains('3') && msg.contains("database missing"), "{msg}");
    assert_eq!(lc.status("ext").unwrap().state, EnvState::Unhealthy);
}

#[test]
fn silent_start_times_out() {
    let dir = tempfile::tempdir().unwrap();
    let code = dir.path().join("site");
    code_dir(&code, &[free_port()], false);
    script(&code.join("start_servers.sh"), "sleep 30");
    let mut cfg = LifecycleConfig::new(dir.path().join("registry.json"));
    cfg.start_timeout = Duration::from_millis(800);
    let lc = Lifecycle::open(cfg).unwrap();
    lc.register(EnvironmentManifest::external("ext", &code, 1).unwrap()).unwrap();
    let started = std::time::Instant::now();
    assert_eq!(lc.start("ext").unwrap_err().kind(), "StartTimeout");
    assert!(started.elapsed() < Duration::from_secs(10));
    assert_eq!(lc.status("ext").unwrap().state, EnvState::Unhealthy);
}

#[test]
fn missing_script_is_rejected_at_registration() {
    let dir = tempfile::tempdir().unwrap();
    let code = dir.path().join("site");
    code_dir(&code, &[free_port()], false);
    fs::remove_file(code.join("reset_servers.sh")).unwrap();
    let err = EnvironmentManifest::external("ext", &code, 1)
        .and_then(|m| manager(dir.path()).register(m).map(drop))
        .unwrap_err();
    assert_eq!(err.kind(), "MissingScript");
}
