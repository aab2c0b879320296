use std::error::Error;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use blindvote::ledger::parse_transcript;
use blindvote::scenario::{
    run_attack, run_scenario, verify_transcript, Attack, Expectation, RunReport, ScenarioConfig,
};
use blindvote::{keygen, Tally};
use clap::{Parser, Subcommand};

type Result<T> = std::result::Result<T, Box<dyn Error>>;

/// Runs blind-signature elections on a simulated ledger and audits their transcripts.
#[derive(Debug, Parser)]
#[command(name = "blindvote", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run an election from a config file and check every property.
    Run {
        config: PathBuf,
        /// Directory for transcript.log and report.json.
        #[arg(long, default_value = "blindvote-out")]
        out: PathBuf,
        /// Overrides the seed in the config.
        #[arg(long, env = "BLINDVOTE_SEED")]
        seed: Option<u64>,
    },
    /// Run a named attack against the election in a config file.
    Attack {
        #[arg(value_parser = attack_name)]
        name: String,
        config: PathBuf,
        #[arg(long, default_value = "blindvote-out")]
        out: PathBuf,
        #[arg(long, env = "BLINDVOTE_SEED")]
        seed: Option<u64>,
    },
    /// Replay a transcript and recount it, optionally against a run report.
    Verify {
        transcript: PathBuf,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Recount every election in a transcript off-chain.
    Tally { transcript: PathBuf },
    /// Generate a signing key file.
    Keygen {
        #[arg(long, default_value_t = 2048)]
        bits: u64,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn attack_name(name: &str) -> std::result::Result<String, String> {
    name.parse::<Attack>().map(|a| a.name().to_owned()).map_err(|_| {
        let known: Vec<&str> = Attack::ALL.iter().map(|a| a.name()).collect();
        format!("expected one of {}", known.join(", "))
    })
}

fn main() -> ExitCode {
    match execute(Cli::parse().command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn execute(command: Command) -> Result<bool> {
    match command {
        Command::Run { config, out, seed } => {
            let config = load_config(&config, seed)?;
            let report = run_scenario(&config)?;
            finish_run(&report, &out)
        }
        Command::Attack { name, config, out, seed } => {
            let config = load_config(&config, seed)?;
            let report = run_attack(&name, &config)?;
            finish_run(&report, &out)
        }
        Command::Verify { transcript, report } => {
            let text = read(&transcript)?;
            let expectation = match report {
                Some(path) => {
                    let report: RunReport = serde_json::from_str(&read(&path)?)?;
                    Expectation::from(&report)
                }
                None => Expectation::default(),
            };
            let check = verify_transcript(&text, &expectation);
            for finding in &check.findings {
                println!("divergence: {finding}");
            }
            if check.ok() {
                println!("ok: {} entries replay and recount consistently", text.lines().count());
            }
            Ok(check.ok())
        }
        Command::Tally { transcript } => {
            let text = read(&transcript)?;
            parse_transcript(&text)?;
            let check = verify_transcript(&text, &Expectation::default());
            for (contract, tally) in &check.tallies {
                println!("election {contract}");
                print_tally(tally);
            }
            for finding in &check.findings {
                println!("divergence: {finding}");
            }
            Ok(check.ok())
        }
        Command::Keygen { bits, seed, out } => {
            let key = keygen(bits, seed)?;
            fs::write(&out, key.to_key_file()).map_err(|e| format!("{}: {e}", out.display()))?;
            println!("wrote {}-bit key to {}", key.public().bits(), out.display());
            Ok(true)
        }
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()).into())
}

fn load_config(path: &Path, seed: Option<u64>) -> Result<ScenarioConfig> {
    let mut config = ScenarioConfig::from_toml(&read(path)?)?;
    if let Some(seed) = seed {
        config.seed = seed;
    }
    Ok(config)
}

fn finish_run(report: &RunReport, out: &Path) -> Result<bool> {
    fs::create_dir_all(out).map_err(|e| format!("{}: {e}", out.display()))?;
    let transcript = out.join("transcript.log");
    fs::write(&transcript, &report.transcript)?;
    fs::write(out.join("report.json"), serde_json::to_string_pretty(report)? + "\n")?;

    let mode = if report.sealed { "sealed" } else { "plain" };
    println!("seed {}, {}-bit key, {mode} ballots", report.seed, report.key_bits);
    match &report.tally {
        Some(tally) => print_tally(tally),
        None => println!("no tally"),
    }
    for row in &report.assertions {
        let verdict = serde_json::to_value(row.observed)?;
        let status = if row.pass { "pass" } else { "FAIL" };
        println!(
            "{status} {:<30} {:<13} {}",
            row.property.to_string(),
            verdict.as_str().unwrap_or_default(),
            row.detail
        );
    }
    if let Some(attack) = &report.attack {
        let what = if attack.succeeded { "succeeded" } else { "failed" };
        let expected = if attack.expected_success { "expected to succeed" } else { "expected to fail" };
        println!("attack {} {what} ({expected}, {}): {}", attack.name, attack.property, attack.detail);
    }
    println!("transcript {} ({} entries, head {})", transcript.display(), report.entries, report.head);
    Ok(report.passed())
}

fn print_tally(tally: &Tally) {
    if tally.is_empty() {
        println!("  (no ballots)");
    }
    for (ballot, count) in tally.iter() {
        match std::str::from_utf8(ballot) {
            Ok(text) if !text.is_empty() && text.chars().all(|c| c.is_ascii_graphic() || c == ' ') => {
                println!("  {text:?} {count}")
            }
            _ => println!("  0x{} {count}", blindvote::hexfmt::bytes_to_hex(ballot)),
        }
    }
}
