use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use haptikit::analyze::{analyze_dir, write_report};
use haptikit::characterize::{
    export_friction, export_frf, export_stability, run_friction, run_frf, run_stability, CharacterizeConfig,
};
use haptikit::config::SessionConfig;
use haptikit::replay::replay_log;
use haptikit::serve::{bind, output_dir, serve_one};
use haptikit::synthetic::simulate_to_dir;
use haptikit_core::harness::derive_seed;

#[derive(Parser)]
#[command(name = "haptikit", version, about = "Haptic trigger digital twin")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Bench characterization of the simulated device.
    Characterize {
        #[arg(value_enum)]
        test: BenchTest,
        /// JSON with `device`, `stability`, `friction` and `frf` sections.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Chirp repetitions averaged by the FRF test.
        #[arg(long)]
        runs: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "out/characterize")]
        out: PathBuf,
    },
    /// Run whole sessions headlessly.
    Simulate {
        #[arg(long, value_enum, default_value = "synthetic")]
        operator: OperatorKind,
        /// Session config; defaults are built from --participant and --seed.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        participant: u32,
        /// Simulate this many participants starting at --participant.
        #[arg(long, default_value_t = 1)]
        participants: u32,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "out/sessions")]
        out: PathBuf,
    },
    /// Serve one task-runner client over WebSocket.
    Serve {
        #[arg(long, default_value_t = 8765)]
        port: u16,
        #[arg(long)]
        config: PathBuf,
        /// Used when the config has no output_dir.
        #[arg(long, default_value = "out/serve")]
        out: PathBuf,
    },
    /// Recompute a session log and compare every derived record.
    Replay { log: PathBuf },
    /// Statistics over a directory of session logs.
    Analyze {
        #[arg(long)]
        sessions: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum BenchTest {
    Stability,
    Friction,
    Frf,
}

#[derive(Clone, Copy, ValueEnum)]
enum OperatorKind {
    Synthetic,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Characterize { test, config, runs, seed, out } => {
            let mut cfg = match config {
                Some(p) => CharacterizeConfig::load(&p)?,
                None => CharacterizeConfig::default(),
            };
            if let Some(r) = runs {
                cfg.frf.runs = r;
            }
            if let Some(s) = seed {
                cfg.frf.options.seed = s;
            }
            characterize(test, &cfg, &out)?;
        }
        Command::Simulate { operator: OperatorKind::Synthetic, config, participant, participants, seed, out } => {
            let base = config.map(|p| SessionConfig::load(&p)).transpose()?;
            for i in 0..participants {
                let id = participant + i;
                let cfg = match &base {
                    Some(c) if participants == 1 => c.clone(),
                    Some(c) => SessionConfig {
                        seed: derive_seed(c.seed, &["participant", &id.to_string()]),
                        ..c.clone()
                    },
                    None => SessionConfig::for_participant(id, derive_seed(seed, &["participant", &id.to_string()])),
                };
                let dir = if participants == 1 { out.clone() } else { out.join(format!("p{id:02}")) };
                let start = Instant::now();
                let (files, run) = simulate_to_dir(&cfg, &dir)?;
                println!(
                    "participant {id}: {} samples, {:.1} s simulated in {:.2} s -> {}",
                    run.samples_sent,
                    run.duration_ms as f64 / 1000.0,
                    start.elapsed().as_secs_f64(),
                    files.log.display()
                );
            }
        }
        Command::Serve { port, config, out } => {
            let cfg = SessionConfig::load(&config)?;
            let dir = output_dir(&cfg, &out);
            let rt = tokio::runtime::Runtime::new().context("starting runtime")?;
            let outcome = rt.block_on(async {
                let (listener, addr) = bind(port).await?;
                log::info!("listening on ws://{addr}");
                serve_one(listener, cfg, &dir).await
            })?;
            println!(
                "session {} ({} samples accepted) -> {}",
                if outcome.completed { "complete" } else { "ended early" },
                outcome.counters.samples_accepted,
                outcome.files.log.display()
            );
        }
        Command::Replay { log } => {
            let report = replay_log(&log)?;
            println!(
                "{} samples, {} trials checked, {} mismatches{}",
                report.samples_checked,
                report.trials_checked,
                report.mismatches.len(),
                if report.complete { "" } else { " (log incomplete)" }
            );
            for m in &report.mismatches {
                let trial = m.trial_id.map_or_else(|| "-".to_string(), |t| t.to_string());
                let line = m.line.map_or_else(|| "-".to_string(), |l| l.to_string());
                println!("  trial {trial} line {line}: {}", m.what);
            }
            if !report.is_clean() {
                return Ok(ExitCode::from(1));
            }
        }
        Command::Analyze { sessions, out } => {
            let report = analyze_dir(&sessions)?;
            let out = out.unwrap_or_else(|| sessions.clone());
            let text = write_report(&report, &out)?;
            print!("{text}");
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn characterize(test: BenchTest, cfg: &CharacterizeConfig, out: &std::path::Path) -> Result<()> {
    let start = Instant::now();
    match test {
        BenchTest::Stability => {
            let res = run_stability(cfg)?;
            export_stability(&res, out)?;
            println!(
                "max stable K {:.3} mNm/rad = {:.3} N/mm, force {:.2} N",
                res.max_stable_k, res.max_stable_trigger_stiffness, res.max_stable_force
            );
            for w in &res.warnings {
                log::warn!("{w}");
            }
        }
        BenchTest::Friction => {
            let res = run_friction(cfg)?;
            export_friction(&res, out)?;
            println!(
                "breakaway torque min {:.4} max {:.4} mean {:.4} mNm; mean force {:.4} N",
                res.min_torque, res.max_torque, res.mean_torque, res.mean_force
            );
            if !res.no_breakaway.is_empty() {
                bail!("no breakaway at {} positions", res.no_breakaway.len());
            }
        }
        BenchTest::Frf => {
            let res = run_frf(cfg)?;
            export_frf(&res, out)?;
            let j = res.fitted_inertia.map_or_else(|| "n/a".to_string(), |j| format!("{j:.3e}"));
            println!(
                "resonance {:.3} Hz, flat gain {:.4} rad/mNm, fitted J {j} over {} runs",
                res.resonance_hz, res.flat_band_gain, res.runs_averaged
            );
            for w in &res.warnings {
                log::warn!("{w}");
            }
        }
    }
    log::info!("done in {:.2} s; results in {}", start.elapsed().as_secs_f64(), out.display());
    Ok(())
}
