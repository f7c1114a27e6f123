use std::fs::File;
use std::io::{Read, Seek, SeekFrom};
use std::os::unix::process::CommandExt;
use std::path::Path;
use std::process::{Child, Command, ExitStatus, Stdio};
use std::thread;
use std::time::{Duration, Instant};

pub const SEED_VAR: &str = "WEBENV_SEED";
pub const PORTS_VAR: &str = "WEBENV_PORTS";
const TAIL_BYTES: u64 = 2048;

/// Spawn a program as the leader of a new process group, with stdout and
/// stderr appended to `log`.
pub fn spawn_group(mut cmd: Command, log: &Path) -> std::io::Result<Child> {
    if let Some(parent) = log.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let out = File::options().create(true).append(true).open(log)?;
    let err = out.try_clone()?;
    cmd.stdin(Stdio::null())
        .stdout(Stdio::from(out))
        .stderr(Stdio::from(err))
        .process_group(0)
        .spawn()
}

pub fn script_command(script: &Path, code_dir: &Path, seed: u64, ports: &[u16]) -> Command {
    let mut cmd = Command::new(script);
    cmd.current_dir(code_dir)
        .env(SEED_VAR, seed.to_string())
        .env(PORTS_VAR, join_ports(ports));
    cmd
}

pub fn join_ports(ports: &[u16]) -> String {
    ports.iter().map(u16::to_string).collect::<Vec<_>>().join(",")
}

pub fn group_alive(pgid: i32) -> bool {
    // SAFETY: signal 0 only checks for existence.
    unsafe { libc::kill(-pgid, 0) == 0 }
}

fn signal_group(pgid: i32, sig: libc::c_int) {
    // SAFETY: plain syscall; failure (already gone) is fine.
    unsafe {
        libc::kill(-pgid, sig);
    }
}

/// SIGTERM the whole group, then SIGKILL whatever is left after `grace`.
pub fn kill_group(pgid: i32, child: Option<&mut Child>, grace: Duration) {
    if pgid <= 1 {
        return;
    }
    signal_group(pgid, libc::SIGTERM);
    let deadline = Instant::now() + grace;
    let mut child = child;
    loop {
        if let Some(c) = child.as_deref_mut() {
            let _ = c.try_wait();
        }
        if !group_alive(pgid) || Instant::now() >= deadline {
            break;
        }
        thread::sleep(Duration::from_millis(25));
    }
    if group_alive(pgid) {
        signal_group(pgid, libc::SIGKILL);
    }
    if let Some(c) = child {
        let _ = c.wait();
    }
}

pub enum ScriptRun {
    Exited(ExitStatus),
    TimedOut,
}

/// Run a short-lived script in its own group and wait for it.
pub fn run_script(cmd: Command, log: &Path, timeout: Duration) -> std::io::Result<ScriptRun> {
    let mut child = spawn_group(cmd, log)?;
    let pgid = child.id() as i32;
    let deadline = Instant::now() + timeout;
    loop {
        if let Some(status) = child.try_wait()? {
            return Ok(ScriptRun::Exited(status));
        }
        if Instant::now() >= deadline {
            kill_group(pgid, Some(&mut child), Duration::from_secs(1));
            return Ok(ScriptRun::TimedOut);
        }
        thread::sleep(Duration::from_millis(20));
    }
}

/// Last bytes of a log file, lossily decoded.
pub fn log_tail(log: &Path) -> String {
    let Ok(mut f) = File::open(log) else {
        return String::new();
    };
    let len = f.metadata().map(|m| m.len()).unwrap_or(0);
    let _ = f.seek(SeekFrom::Start(len.saturating_sub(TAIL_BYTES)));
    let mut buf = Vec::new();
    let _ = f.read_to_end(&mut buf);
    String::from_utf8_lossy(&buf).trim().to_string()
}

/// Log size, used to slice off only the output of the latest run.
pub fn log_len(log: &Path) -> u64 {
    std::fs::metadata(log).map(|m| m.len()).unwrap_or(0)
}

pub fn log_tail_since(log: &Path, offset: u64) -> String {
    let Ok(mut f) = File::open(log) else {
        return String::new();
    };
    let len = f.metadata().map(|m| m.len()).unwrap_or(0);
    let start = offset.max(len.saturating_sub(TAIL_BYTES));
    let _ = f.seek(SeekFrom::Start(start));
    let mut buf = Vec::new();
    let _ = f.read_to_end(&mut buf);
    String::from_utf8_lossy(&buf).trim().to_string()
}

/// HTTP 200 on `GET /healthz` within `timeout`.
pub fn probe(port: u16, timeout: Duration) -> bool {
    let agent = ureq::AgentBuilder::new()
        .timeout_connect(timeout)
        .timeout(timeout)
        .build();
    matches!(
        agent.get(&format!("http://127.0.0.1:{port}/healthz")).call(),
        Ok(r) if r.status() == 200
    )
}

pub fn probe_all(ports: &[u16], timeout: Duration) -> bool {
    ports.iter().all(|&p| probe(p, timeout))
}

/// Whether a port can currently be bound on loopback.
pub fn port_free(port: u16) -> Result<(), std::io::Error> {
    std::net::TcpListener::bind(("127.0.0.1", port)).map(drop)
}
