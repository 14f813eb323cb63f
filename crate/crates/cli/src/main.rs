use std::fs;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use veilcache_cli::commands::{cmd_audit, cmd_rates, cmd_simulate, AuditArgs, RatesArgs, RatesFormat, SimulateArgs};
use veilcache_cli::{CliError, CommonArgs, ExitStatus};

#[derive(Parser)]
#[command(
    name = "veilcache",
    version,
    about = "Demand-private coded caching: simulate, audit, rate tables"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Place, deliver and decode one demand vector
    Simulate {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        args: SimulateArgs,
    },
    /// Exhaustive decodability and privacy audit
    Audit {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        args: AuditArgs,
    },
    /// Memory-rate tables
    Rates {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        args: RatesArgs,
    },
}

fn run(cli: Cli) -> Result<ExitStatus, CliError> {
    match cli.command {
        Command::Simulate { common, args } => {
            let cfg = common.merged()?;
            let summary = cmd_simulate(&cfg, &args)?;
            for u in summary.users.iter().filter(|u| !u.ok) {
                eprintln!(
                    "decode failure: user {} (file {}): {}",
                    u.user,
                    u.file,
                    u.error.as_deref().unwrap_or("recovered symbols differ from the file")
                );
            }
            println!(
                "simulate: {} entries, rate {} ({}), {}; outputs in {}",
                summary.record.len(),
                summary.rate,
                veilcache_core::format_sig6(summary.rate),
                if summary.all_decoded() {
                    "all users decoded"
                } else {
                    "DECODE FAILURE"
                },
                summary.out_dir.display()
            );
            Ok(summary.status())
        }
        Command::Audit { common, args } => {
            let cfg = common.merged()?;
            let summary = cmd_audit(&cfg, &args)?;
            for w in summary.warnings() {
                eprintln!("{w}");
            }
            let privacy = match summary.private() {
                Some(true) => "PASS",
                Some(false) => "FAIL",
                None => "NOT CHECKED",
            };
            println!(
                "audit: decodability {}, privacy {privacy}; outputs in {}",
                if summary.decodable() { "PASS" } else { "FAIL" },
                summary.out_dir.display()
            );
            if let Some(table) = &summary.table {
                print!("{}", table.render_text());
            }
            Ok(summary.status())
        }
        Command::Rates { common, args } => {
            let cfg = common.merged()?;
            let out = cmd_rates(&cfg, &args)?;
            print!("{}", out.body);
            if let Some(note) = &out.footnote {
                eprintln!("note: {note}");
            }
            if let Some(dir) = &cfg.out {
                fs::create_dir_all(dir)?;
                let name = match args.format {
                    RatesFormat::Csv => "rates.csv",
                    RatesFormat::Json => "rates.json",
                };
                fs::write(dir.join(name), &out.body)?;
            }
            Ok(ExitStatus::Success)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(ExitStatus::InputError.code() as u8);
        }
    };
    let status = match run(cli) {
        Ok(status) => status,
        Err(e) => {
            eprintln!("veilcache: {e}");
            e.status()
        }
    };
    ExitCode::from(status.code() as u8)
}
