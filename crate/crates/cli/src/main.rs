//! `czolab`: scenario runner for the Calderón–Zygmund laboratory.
//!
//! Exit codes: 0 success, 1 usage or unknown operation, 2 bad input or
//! unmet precondition, 3 infeasible constants, 4 failed invariant.

mod ops;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use czolab::config::{Config, Scenario};
use czolab::CzError;

#[derive(Parser)]
#[command(name = "czolab", version, about = "Numerical laboratory for Calderón–Zygmund operators on measures")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Clone, Default)]
struct Common {
    /// Scenario file with `key = value` lines.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override or add a config entry.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Write CSV output here instead of stdout.
    #[arg(long)]
    out_csv: Option<PathBuf>,
    /// Write JSON output here instead of stdout.
    #[arg(long)]
    out_json: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the operation named by `op` in a scenario file.
    Run { config: PathBuf },
    /// Evaluate T̄_δ(1) or the regularized potential on points or a grid.
    PotentialField(Common),
    /// Defect of a seeded family of mean-zero test functions.
    ReflectionlessTest(Common),
    /// Simulate the collapse recursion.
    CollapseSim {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        epsilon: Option<f64>,
        #[arg(long)]
        m0: Option<f64>,
        #[arg(long)]
        jmax: Option<usize>,
        /// Constants file (`C1 = ...`, `c4 = ...`, ...).
        #[arg(long)]
        constants: Option<PathBuf>,
    },
    /// Wolff potential at a point.
    Wolff(Common),
    /// Empirical niceness constant.
    Niceness(Common),
    /// Search for an empty ball of proportional radius.
    Porosity(Common),
    /// Run the identity and invariant battery.
    InvariantSuite(Common),
}

enum Failure {
    Usage(String),
    Lab(CzError),
}

impl From<CzError> for Failure {
    fn from(e: CzError) -> Self {
        Failure::Lab(e)
    }
}

fn scenario_from(op: &str, common: &Common, extra: &[(&str, String)]) -> Result<Scenario, Failure> {
    let (mut cfg, base) = match &common.config {
        Some(p) => (Config::read(p)?, p.parent().map(Path::to_path_buf).unwrap_or_default()),
        None => (Config::default(), PathBuf::from(".")),
    };
    cfg.set("op", op)?;
    for kv in &common.set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Failure::Usage(format!("--set expects KEY=VALUE, got `{kv}`")))?;
        cfg.set(k, v)?;
    }
    for (k, v) in extra {
        cfg.set(k, v)?;
    }
    let mut sc = Scenario::from_config(cfg, &base)?;
    if let Some(p) = &common.out_csv {
        sc.output_csv = Some(p.clone());
    }
    if let Some(p) = &common.out_json {
        sc.output_json = Some(p.clone());
    }
    Ok(sc)
}

fn build(cmd: Cmd) -> Result<Scenario, Failure> {
    match cmd {
        Cmd::Run { config } => {
            let sc = Scenario::read(&config)?;
            if !ops::OPERATIONS.contains(&sc.op.as_str()) {
                return Err(Failure::Usage(format!(
                    "unknown operation `{}`; expected one of: {}",
                    sc.op,
                    ops::OPERATIONS.join(", ")
                )));
            }
            Ok(sc)
        }
        Cmd::PotentialField(c) => scenario_from("potential-field", &c, &[]),
        Cmd::ReflectionlessTest(c) => scenario_from("reflectionless-test", &c, &[]),
        Cmd::CollapseSim {
            common,
            epsilon,
            m0,
            jmax,
            constants,
        } => {
            let mut extra = Vec::new();
            if let Some(e) = epsilon {
                extra.push(("op.epsilon", e.to_string()));
            }
            if let Some(m) = m0 {
                extra.push(("op.m0", m.to_string()));
            }
            if let Some(j) = jmax {
                extra.push(("op.jmax", j.to_string()));
            }
            if let Some(c) = constants {
                extra.push(("op.constants", c.to_string_lossy().into_owned()));
            }
            scenario_from("collapse-sim", &common, &extra)
        }
        Cmd::Wolff(c) => scenario_from("wolff", &c, &[]),
        Cmd::Niceness(c) => scenario_from("niceness", &c, &[]),
        Cmd::Porosity(c) => scenario_from("porosity", &c, &[]),
        Cmd::InvariantSuite(c) => scenario_from("invariant-suite", &c, &[]),
    }
}

fn write_out(path: Option<&Path>, text: &str) -> Result<(), Failure> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| Failure::Lab(e.into())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn execute(cmd: Cmd) -> Result<i32, Failure> {
    let sc = build(cmd)?;
    let out = ops::dispatch(&sc)?;
    if let Some(csv) = &out.csv {
        write_out(sc.output_csv.as_deref(), csv)?;
    }
    if let Some(json) = &out.json {
        let mut text = serde_json::to_string_pretty(json).expect("serializable");
        text.push('\n');
        write_out(sc.output_json.as_deref(), &text)?;
    }
    eprintln!("{}", out.summary);
    Ok(out.status)
}

fn configure_threads() -> Result<(), String> {
    let Ok(v) = std::env::var("CZOLAB_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| format!("CZOLAB_THREADS must be a positive integer, got `{v}`"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Err(msg) = configure_threads() {
        eprintln!("error: {msg}");
        return ExitCode::from(1);
    }
    match execute(cli.cmd) {
        Ok(status) => ExitCode::from(status as u8),
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Lab(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                CzError::Infeasible(_) => 3,
                _ => 2,
            })
        }
    }
}
