use std::io::{self, BufReader};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use migratekit_core::pipeline::{halted_lanes, Pipeline, Stage};

#[derive(Parser)]
#[command(name = "migratekit", version, about = "Staged C-to-Rust migration driver")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Pipeline configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Working directory holding every artifact of the run.
    #[arg(long)]
    workdir: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Run every stage except review, then write the report.
    Run(Common),
    Split(Common),
    Cprobe(Common),
    Translate(Common),
    Rustprobe(Common),
    Repair(Common),
    Fuse(Common),
    /// Interactive review of conflicts and residue in the fused module.
    Review {
        #[command(flatten)]
        common: Common,
        /// Read commands from this file instead of standard input.
        #[arg(long)]
        script: Option<PathBuf>,
    },
    Report(Common),
}

fn stage_of(cmd: &Command) -> Option<Stage> {
    Some(match cmd {
        Command::Split(_) => Stage::Split,
        Command::Cprobe(_) => Stage::CProbe,
        Command::Translate(_) => Stage::Translate,
        Command::Rustprobe(_) => Stage::RustProbe,
        Command::Repair(_) => Stage::Repair,
        Command::Fuse(_) => Stage::Fuse,
        Command::Report(_) => Stage::Report,
        Command::Run(_) | Command::Review { .. } => return None,
    })
}

fn execute(cli: Cli) -> Result<u8> {
    let common = match &cli.command {
        Command::Run(c)
        | Command::Split(c)
        | Command::Cprobe(c)
        | Command::Translate(c)
        | Command::Rustprobe(c)
        | Command::Repair(c)
        | Command::Fuse(c)
        | Command::Report(c) => c.clone(),
        Command::Review { common, .. } => common.clone(),
    };
    let pipeline = Pipeline::open(&common.config, &common.workdir)
        .with_context(|| format!("cannot open pipeline for {}", common.config.display()))?;

    let halted = match &cli.command {
        Command::Run(_) => {
            let summary = pipeline.run_all()?;
            let m = &summary.report.module;
            println!(
                "module: {} lines, {} safe, {} manually modified",
                m.total_lines, m.sc_count, m.mml_count
            );
            if let Some(csr) = m.csr {
                println!("compilation success rate: {csr}");
            }
            summary.halted
        }
        Command::Review { script, .. } => {
            let summary = match script {
                Some(p) => {
                    let f = std::fs::File::open(p).with_context(|| format!("cannot open {}", p.display()))?;
                    pipeline.review(BufReader::new(f), io::stdout())?
                }
                None => pipeline.review(io::stdin().lock(), io::stdout())?,
            };
            println!(
                "{} accepted, {} rejected, {} open issues",
                summary.accepted,
                summary.rejected,
                summary.open.len()
            );
            Vec::new()
        }
        cmd => {
            let stage = stage_of(cmd).expect("stage command");
            let r = pipeline.run_stage(stage)?;
            println!(
                "{}: {} ran, {} skipped, {} halted",
                stage.name(),
                r.ran.len(),
                r.skipped.len(),
                r.halted.len()
            );
            halted_lanes(&pipeline.state()?)
        }
    };
    for h in &halted {
        eprintln!("halted {} in {}: {}", h.id, h.stage.name(), h.error);
    }
    Ok(if halted.is_empty() { 0 } else { 2 })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match execute(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            // Library errors already spell out their cause; skip repeats.
            let mut msg = e.to_string();
            for cause in e.chain().skip(1) {
                let c = cause.to_string();
                if !msg.ends_with(&c) {
                    msg = format!("{msg}: {c}");
                }
            }
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
