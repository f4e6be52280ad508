use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use retrolink::selftest::run_checks;
use retrolink::{cmd_patterns, cmd_run, cmd_sweep, parse_duration, ConfigOptions, PatternMode, RunOutcome};

/// Two-radio self-phasing link simulator.
#[derive(Parser)]
#[command(name = "retrolink", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON config; missing keys keep their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Master seed override.
    #[arg(long)]
    seed: Option<u64>,
    /// Simulated duration, e.g. 100ns, 5us.
    #[arg(long, value_parser = parse_duration)]
    duration: Option<f64>,
    /// Use the fixed 75 dB element-to-element path loss instead of Friis.
    #[arg(long)]
    paper_pathloss: bool,
}

impl Common {
    fn options(&self) -> ConfigOptions {
        ConfigOptions {
            config: self.config.clone(),
            seed: self.seed,
            duration_s: self.duration,
            paper_pathloss: self.paper_pathloss,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Simulate the link; exit 0 if both radios lock, 2 if not.
    Run(Common),
    /// Run a parameter grid and write sweep.csv.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// FIELD=v1,v2,... (repeat for more axes).
        #[arg(long, required = true)]
        grid: Vec<String>,
    },
    /// Write array-factor tables: static, squint or vanatta.
    Patterns {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "static")]
        mode: String,
    },
    /// Run quick built-in checks.
    Selftest,
}

fn fail(e: anyhow::Error) -> ExitCode {
    eprintln!("error: {e:#}");
    ExitCode::from(1)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match cli.command {
        Command::Run(c) => match cmd_run(&c.options(), &c.out) {
            Ok((outcome, report)) => {
                let us = |t: Option<f64>| t.map_or("none".to_string(), |t| format!("{t:.3} us"));
                println!(
                    "lock A {}, B {}; report {}",
                    us(report.radio_a.lock_time_us),
                    us(report.radio_b.lock_time_us),
                    c.out.join(retrolink::commands::REPORT_FILE).display()
                );
                match outcome {
                    RunOutcome::Locked => ExitCode::SUCCESS,
                    RunOutcome::NotLocked => ExitCode::from(2),
                }
            }
            Err(e) => fail(e),
        },
        Command::Sweep { common, grid } => match cmd_sweep(&common.options(), &grid, &common.out) {
            Ok(n) => {
                println!("{n} rows -> {}", common.out.join(retrolink::commands::SWEEP_FILE).display());
                ExitCode::SUCCESS
            }
            Err(e) => fail(e),
        },
        Command::Patterns { common, mode } => {
            match PatternMode::parse(&mode).and_then(|m| cmd_patterns(&common.options(), m, &common.out)) {
                Ok(path) => {
                    println!("{}", path.display());
                    ExitCode::SUCCESS
                }
                Err(e) => fail(e),
            }
        }
        Command::Selftest => {
            let checks = run_checks();
            for c in &checks {
                println!("{} {:<14} {}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            if checks.iter().all(|c| c.pass) {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
    }
}
