use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use puf_core::fe::{self, FeParams};
use puf_core::simulator::BoardProfile;
use puf_harness::commands;
use puf_harness::{ExperimentConfig, HarnessError, Result};

#[derive(Parser)]
#[command(name = "pufkit", version, about = "SRAM PUF temperature experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Emit simulated readings for every configured profile.
    Simulate(Common),
    /// Aggregate one reference fingerprint per device.
    Enroll(Common),
    /// Reliability, per-temperature noise averages and uniqueness reports.
    Metrics(Common),
    /// Enroll the fuzzy extractor and try to reproduce keys at every temperature.
    FeTrial {
        #[command(flatten)]
        common: Common,
        /// Exit with status 3 if any reproduction fails.
        #[arg(long)]
        strict: bool,
    },
    /// simulate, enroll, metrics and fe-trial in sequence.
    Run {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        strict: bool,
    },
    /// Print locker counts and helper-data sizes for a range of tolerances.
    Sizing {
        #[command(flatten)]
        common: Common,
        /// Comma-separated tolerances.
        #[arg(long, value_delimiter = ',', default_value = "4,5,8")]
        tolerances: Vec<u16>,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Restrict to one built-in profile (f401re or f446re).
    #[arg(long)]
    profile: Option<String>,
    #[arg(long)]
    t: Option<u16>,
    #[arg(long)]
    k: Option<u16>,
    #[arg(long)]
    delta: Option<f64>,
}

impl Common {
    fn load(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::from_file(p)?,
            None => ExperimentConfig::default(),
        };
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(dir) = &self.out_dir {
            cfg.out_dir = dir.clone();
        }
        if let Some(p) = &self.profile {
            let profile: BoardProfile = p.parse().map_err(|e| HarnessError::Config(format!("{e}")))?;
            cfg.profiles = vec![profile];
        }
        if let Some(t) = self.t {
            cfg.fe_t = t;
        }
        if let Some(k) = self.k {
            cfg.fe_k = k;
        }
        if let Some(d) = self.delta {
            cfg.fe_delta = d;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn print_trial(report: &commands::TrialReport) {
    println!(
        "t = {}, k = {}, delta = {}: {} lockers, {} bytes of helper data, {:.1} s",
        report.params.t,
        report.params.k,
        report.params.delta,
        report.locker_count,
        report.helper_bytes,
        report.elapsed.as_secs_f64()
    );
    for r in &report.rows {
        println!(
            "  {:<8} {:>4} °C  {:>5}/{:<5} reproduced ({:.1} %)",
            r.board_type.as_str(),
            r.temp_c,
            r.successes,
            r.attempts,
            100.0 * r.success_rate()
        );
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate(c) => {
            let cfg = c.load()?;
            let sim = commands::cmd_simulate(&cfg)?;
            println!(
                "wrote {} readings to {} ({} enrollment readings)",
                sim.campaign.len(),
                cfg.readings_path().display(),
                sim.enrollment.len()
            );
        }
        Command::Enroll(c) => {
            let cfg = c.load()?;
            let refs = commands::cmd_enroll(&cfg)?;
            println!("enrolled {} references into {}", refs.len(), cfg.references_path().display());
        }
        Command::Metrics(c) => {
            let cfg = c.load()?;
            commands::cmd_metrics(&cfg)?;
            let summary = std::fs::read_to_string(cfg.out_path("summary.csv"))
                .map_err(|e| HarnessError::MissingInput(e.to_string()))?;
            print!("{summary}");
        }
        Command::FeTrial { common, strict } => {
            let cfg = common.load()?;
            print_trial(&commands::cmd_fe_trial(&cfg, strict)?);
        }
        Command::Run { common, strict } => {
            let cfg = common.load()?;
            commands::cmd_simulate(&cfg)?;
            commands::cmd_enroll(&cfg)?;
            commands::cmd_metrics(&cfg)?;
            print_trial(&commands::cmd_fe_trial(&cfg, strict)?);
            println!("reports in {}", cfg.out_dir.display());
        }
        Command::Sizing { common, tolerances } => {
            let cfg = common.load()?;
            println!("t,lockers,helper_bytes,helper_kib");
            for t in tolerances {
                let p = FeParams::with_all(
                    cfg.cell_count as u16,
                    t,
                    cfg.fe_k,
                    cfg.fe_delta,
                    cfg.fe_s,
                    cfg.fe_key_len,
                )?;
                let bytes = fe::helper_size(&p)?;
                println!("{t},{},{bytes},{:.1}", fe::locker_count(&p)?, bytes as f64 / 1024.0);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("pufkit: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
