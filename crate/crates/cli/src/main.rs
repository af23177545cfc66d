mod args;
mod commands;
mod manifest;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::Parser;

use args::Command;
use commands::Run;
use manifest::{Manifest, SCHEMA_VERSION};

const EXIT_VALIDATION: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;
const EXIT_MISMATCH: u8 = 1;

/// Equilibria of the stake-governed tug-of-war and its Brownian Boost limit.
#[derive(Parser, Debug)]
#[command(name = "tlp", version)]
struct Cli {
    /// Directory receiving the output files and the manifest.
    #[arg(long, global = true, default_value = ".")]
    out_dir: PathBuf,
    #[command(subcommand)]
    command: Command,
}

fn file_stem(c: &Command) -> &'static str {
    match c {
        Command::Abmn(_) => "abmn",
        Command::LambdaMax(_) => "lambda-max",
        Command::Margin(_) => "margin",
        Command::Ode(_) => "ode",
        Command::Simulate(a) => match a.mode {
            args::SimMode::Tlp => "simulate-tlp",
            args::SimMode::Sde => "simulate-sde",
            args::SimMode::ScaledCheck => "simulate-scaled-check",
        },
        Command::Run(_) | Command::Replay(_) => "replay",
    }
}

fn execute(c: &Command) -> tlp_core::Result<Run> {
    match c {
        Command::Abmn(a) => commands::abmn(a),
        Command::LambdaMax(a) => commands::lambda(a),
        Command::Margin(a) => commands::margin(a),
        Command::Ode(a) => commands::ode(a),
        Command::Simulate(a) => commands::simulate(a),
        Command::Run(_) | Command::Replay(_) => unreachable!("file-driven commands are dispatched separately"),
    }
}

fn core_failure(e: tlp_core::Error) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(if e.is_validation() { EXIT_VALIDATION } else { EXIT_NUMERICAL })
}

fn io_failure(what: &str, path: &Path, e: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: cannot {what} {}: {e}", path.display());
    ExitCode::from(EXIT_VALIDATION)
}

fn write_outputs(dir: &Path, command: Command, run: &Run) -> Result<(), ExitCode> {
    std::fs::create_dir_all(dir).map_err(|e| io_failure("create", dir, e))?;
    for (name, bytes) in &run.outputs {
        let path = dir.join(name);
        std::fs::write(&path, bytes).map_err(|e| io_failure("write", &path, e))?;
    }
    let stem = file_stem(&command);
    let m = Manifest::new(command, &run.outputs);
    let path = dir.join(format!("{stem}.manifest.json"));
    let text = serde_json::to_string_pretty(&m).expect("serialisable") + "\n";
    std::fs::write(&path, text).map_err(|e| io_failure("write", &path, e))?;
    println!("{}", run.message);
    println!("digest {}", m.digest);
    Ok(())
}

fn load_config(path: &Path) -> Result<Command, ExitCode> {
    let text = std::fs::read_to_string(path).map_err(|e| io_failure("read", path, e))?;
    let c: Command = serde_json::from_str(&text).map_err(|e| io_failure("parse", path, e))?;
    match c {
        Command::Run(_) | Command::Replay(_) => Err(io_failure("use", path, "nested file-driven command")),
        c => Ok(c),
    }
}

fn replay(path: &Path) -> ExitCode {
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) => return io_failure("read", path, e),
    };
    let m: Manifest = match serde_json::from_str(&text) {
        Ok(m) => m,
        Err(e) => return io_failure("parse", path, e),
    };
    if m.schema_version != SCHEMA_VERSION {
        eprintln!("error: unsupported schema version {}", m.schema_version);
        return ExitCode::from(EXIT_VALIDATION);
    }
    let run = match execute(&m.command) {
        Ok(r) => r,
        Err(e) => return core_failure(e),
    };
    let fresh = Manifest::new(m.command.clone(), &run.outputs);
    if fresh.digest == m.digest {
        println!("match {}", m.digest);
        return ExitCode::SUCCESS;
    }
    for (old, new) in m.files.iter().zip(&fresh.files) {
        if old != new {
            eprintln!("mismatch in {}: {} vs {}", old.name, old.sha256, new.sha256);
        }
    }
    eprintln!("digest mismatch: recorded {} recomputed {}", m.digest, fresh.digest);
    ExitCode::from(EXIT_MISMATCH)
}

fn configure_threads() -> Result<(), ExitCode> {
    let Ok(v) = std::env::var("TLP_THREADS") else { return Ok(()) };
    match v.trim().parse::<usize>() {
        Ok(n) if n > 0 => {
            rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| {
                eprintln!("error: cannot start {n} threads: {e}");
                ExitCode::from(EXIT_VALIDATION)
            })
        }
        _ => {
            eprintln!("error: TLP_THREADS must be a positive integer, got {v:?}");
            Err(ExitCode::from(EXIT_VALIDATION))
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_VALIDATION } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Err(code) = configure_threads() {
        return code;
    }
    let command = match cli.command {
        Command::Replay(r) => return replay(&r.manifest),
        Command::Run(r) => match load_config(&r.config) {
            Ok(c) => c,
            Err(code) => return code,
        },
        c => c,
    };
    match execute(&command) {
        Ok(run) => match write_outputs(&cli.out_dir, command, &run) {
            Ok(()) => ExitCode::SUCCESS,
            Err(code) => code,
        },
        Err(e) => core_failure(e),
    }
}
