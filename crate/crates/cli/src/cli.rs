use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::Ordering;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};

use webenv_core::lifecycle::BuiltinMode;
use webenv_core::site::server::SiteServer;
use webenv_core::site::Site;
use webenv_core::tasks::{parse_tasks, write_tasks};

use crate::config::Config;
use crate::ops::{
    read_text, CollectRequest, DatasetRequest, JudgeTarget, LoopRequest, OpError, Ops, RegisterRequest, Reply,
};
use crate::service;

/// Verifiable web environments: lifecycle, task validation, judging and rollouts.
#[derive(Debug, Parser)]
#[command(name = "webenv", version)]
pub struct Cli {
    /// TOML config file (default: $VERIENV_CONFIG).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Manage environments.
    #[command(subcommand)]
    Env(EnvCommand),
    /// Validate and inspect task files.
    #[command(subcommand)]
    Task(TaskCommand),
    /// Evaluate judges.
    #[command(subcommand)]
    Judge(JudgeCommand),
    /// Run K episodes per task and store scored rollouts.
    Collect(CollectArgs),
    /// Build training datasets from stored rollouts.
    #[command(subcommand)]
    Dataset(DatasetCommand),
    /// Run repeated collect and dataset phases.
    Loop(LoopArgs),
    /// Serve the HTTP API.
    Serve {
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        #[arg(long, default_value_t = 8750)]
        port: u16,
    },
    /// Host the built-in reference site (used for built-in environments).
    #[command(subcommand, hide = true)]
    Reference(ReferenceCommand),
}

#[derive(Debug, Subcommand)]
pub enum EnvCommand {
    /// Register an external code directory or the built-in site.
    Register {
        env_id: String,
        /// Directory holding ports.json and the start/reset scripts.
        #[arg(long, conflicts_with_all = ["builtin", "port"], required_unless_present = "builtin")]
        code_dir: Option<PathBuf>,
        /// Use the built-in reference site.
        #[arg(long, requires = "port")]
        builtin: bool,
        #[arg(long)]
        port: Option<u16>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Launch and wait until healthy.
    Start { env_id: String },
    /// Restore the initial state and verify its hash.
    Reset {
        env_id: String,
        /// Reset with a different seed; checked against the recorded baseline.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Show recorded status without probing.
    Status { env_id: String },
    /// Probe health and update the status.
    Health { env_id: String },
    /// Stop the environment's processes.
    Stop { env_id: String },
    /// Stop if running and forget the environment.
    Remove { env_id: String },
    /// List registered environments.
    List,
}

#[derive(Debug, Subcommand)]
pub enum TaskCommand {
    /// Execute validation plans and instantiate judges.
    Validate {
        file: PathBuf,
        #[arg(long)]
        env: String,
        /// Also write the validated task file here.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Re-run validation plans against current state.
    Revalidate {
        file: PathBuf,
        #[arg(long)]
        env: String,
        /// Write the refreshed task file here.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Difficulty distribution of a task file.
    Stats { file: PathBuf },
}

#[derive(Debug, Subcommand)]
pub enum JudgeCommand {
    Eval {
        /// Judge document (JSON).
        #[arg(long)]
        spec: PathBuf,
        /// Final answer for `rinfo` judges.
        #[arg(long, conflicts_with = "probe", required_unless_present = "probe")]
        answer: Option<String>,
        /// Probe document (JSON) for `rprog` judges.
        #[arg(long)]
        probe: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
pub struct CollectArgs {
    #[arg(long)]
    tasks: PathBuf,
    /// random, oracle or noisy_oracle(p)
    #[arg(long)]
    policy: String,
    #[arg(long)]
    env: String,
    /// Rollouts per task (default from config).
    #[arg(short)]
    k: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    max_steps: Option<usize>,
    /// Rollout store to append to.
    #[arg(long)]
    records: Option<PathBuf>,
    /// Validate tasks against the environment first.
    #[arg(long)]
    validate: bool,
}

#[derive(Debug, Subcommand)]
pub enum DatasetCommand {
    Build {
        #[arg(long)]
        records: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        /// Keep duplicate action sequences.
        #[arg(long)]
        no_dedup: bool,
    },
}

#[derive(Debug, Args)]
pub struct LoopArgs {
    #[arg(long)]
    phases: u32,
    /// Task file ingested at phase i (repeatable).
    #[arg(long, required = true)]
    tasks: Vec<PathBuf>,
    /// Policy of phase i (repeatable; the last one repeats).
    #[arg(long, required = true)]
    policy: Vec<String>,
    #[arg(long)]
    env: String,
    #[arg(short)]
    k: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    max_steps: Option<usize>,
    /// Directory for rollouts.jsonl and dataset.jsonl.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    validate: bool,
    #[arg(long)]
    no_dedup: bool,
}

#[derive(Debug, Subcommand)]
pub enum ReferenceCommand {
    Serve {
        #[arg(long)]
        port: u16,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn init_logging() {
    let filter = tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "warn".into());
    let _ = tracing_subscriber::fmt().with_env_filter(filter).with_writer(std::io::stderr).try_init();
}

/// Built-in environments run as `webenv reference serve` child processes so
/// they outlive a single CLI invocation.
pub fn subprocess_mode() -> BuiltinMode {
    let program = std::env::current_exe().unwrap_or_else(|_| PathBuf::from("webenv"));
    BuiltinMode::Subprocess {
        program,
        args: vec!["reference".into(), "serve".into()],
    }
}

fn write_file(path: &Path, text: &str) -> Result<(), OpError> {
    std::fs::write(path, format!("{text}\n")).map_err(|e| OpError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

fn dispatch(ops: &Ops, command: Command) -> Result<Reply, OpError> {
    let cfg = ops.config().clone();
    let input = |p: &Path| read_text(&cfg.resolve_input(p));
    match command {
        Command::Env(cmd) => match cmd {
            EnvCommand::Register {
                env_id,
                code_dir,
                builtin: _,
                port,
                seed,
            } => ops.env_register(&RegisterRequest {
                env_id,
                code_dir,
                port,
                seed,
            }),
            EnvCommand::Start { env_id } => ops.env_start(&env_id),
            EnvCommand::Reset { env_id, seed } => ops.env_reset(&env_id, seed),
            EnvCommand::Status { env_id } => ops.env_status(&env_id),
            EnvCommand::Health { env_id } => ops.env_health(&env_id),
            EnvCommand::Stop { env_id } => ops.env_stop(&env_id),
            EnvCommand::Remove { env_id } => ops.env_remove(&env_id),
            EnvCommand::List => ops.env_list(),
        },
        Command::Task(cmd) => match cmd {
            TaskCommand::Validate { file, env, output } => {
                let r = ops.task_validate(&input(&file)?, &env)?;
                if let Some(out) = output {
                    write_file(&out, &r.body)?;
                }
                Ok(r)
            }
            TaskCommand::Revalidate { file, env, output } => {
                let (r, fresh) = ops.task_revalidate(&input(&file)?, &env)?;
                if let Some(out) = output {
                    write_tasks(&out, &fresh).map_err(|e| OpError::Io {
                        path: out.clone(),
                        message: e.to_string(),
                    })?;
                }
                Ok(r)
            }
            TaskCommand::Stats { file } => ops.task_stats(&input(&file)?),
        },
        Command::Judge(JudgeCommand::Eval { spec, answer, probe }) => {
            let target = match (answer, probe) {
                (Some(a), None) => JudgeTarget::Answer(a),
                (None, Some(p)) => JudgeTarget::Probe(read_text(&p)?),
                _ => return Err(OpError::Usage("give exactly one of --answer or --probe".into())),
            };
            ops.judge_eval(&read_text(&spec)?, &target)
        }
        Command::Collect(a) => {
            let tasks = parse_tasks(&input(&a.tasks)?).map_err(OpError::Corpus)?;
            ops.collect(&CollectRequest {
                tasks,
                policy: a.policy,
                env: a.env,
                k: a.k,
                seed: a.seed,
                max_steps: a.max_steps,
                records: a.records,
                validate: a.validate,
            })
        }
        Command::Dataset(DatasetCommand::Build {
            records,
            output,
            no_dedup,
        }) => ops.dataset_build(&DatasetRequest {
            records,
            output,
            dedup: !no_dedup,
        }),
        Command::Loop(a) => ops.run_loop(&LoopRequest {
            phases: a.phases,
            tasks: a.tasks,
            policy: a.policy,
            env: a.env,
            k: a.k,
            seed: a.seed,
            max_steps: a.max_steps,
            out: a.out,
            validate: a.validate,
            dedup: !a.no_dedup,
        }),
        Command::Serve { .. } | Command::Reference(_) => unreachable!("handled by run"),
    }
}

fn serve(ops: Ops, host: &str, port: u16) -> i32 {
    let handle = match service::start(Arc::new(ops), host, port) {
        Ok(h) => h,
        Err(e) => {
            eprintln!("cannot bind {host}:{port}: {e}");
            return 1;
        }
    };
    let flag = handle.stop_flag();
    if let Err(e) = ctrlc::set_handler(move || flag.store(true, Ordering::SeqCst)) {
        eprintln!("cannot install signal handler: {e}");
        return 1;
    }
    eprintln!("listening on http://{host}:{}", handle.port());
    handle.wait();
    eprintln!("stopped");
    0
}

fn reference_serve(port: u16, seed: u64) -> i32 {
    match SiteServer::bind(Site::shared(seed), port) {
        Ok(_server) => loop {
            std::thread::park();
        },
        Err(e) => {
            eprintln!("cannot bind port {port}: {e}");
            1
        }
    }
}

/// Parse `argv`, run one command, print JSON to stdout and a summary to
/// stderr. Returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    init_logging();
    if let Command::Reference(ReferenceCommand::Serve { port, seed }) = cli.command {
        return reference_serve(port, seed);
    }
    let config = match Config::load(cli.config.as_deref()) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return 2;
        }
    };
    let ops = match Ops::open(config, subprocess_mode()) {
        Ok(o) => o,
        Err(e) => return report(Err(e)),
    };
    if let Command::Serve { host, port } = &cli.command {
        return serve(ops, host, *port);
    }
    report(dispatch(&ops, cli.command))
}

fn report(result: Result<Reply, OpError>) -> i32 {
    let mut out = std::io::stdout().lock();
    match result {
        Ok(r) => {
            let _ = writeln!(out, "{}", r.body);
            if !r.summary.is_empty() {
                eprintln!("{}", r.summary);
            }
            0
        }
        Err(e) => {
            let _ = writeln!(out, "{}", e.to_json());
            eprintln!("error: {}: {}", e.kind(), e.message());
            e.exit_code()
        }
    }
}
