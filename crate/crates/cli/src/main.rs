use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use rkframe::experiment::{emit_report, run, Command, ExperimentConfig, Format};
use rkframe::Error;

#[derive(Clone, Copy, Debug, ValueEnum)]
enum CommandArg {
    Gram,
    Frame,
    Dual,
    Carleson,
    Lift,
    Babenko,
    Seqgen,
}

impl From<CommandArg> for Command {
    fn from(c: CommandArg) -> Self {
        match c {
            CommandArg::Gram => Command::Gram,
            CommandArg::Frame => Command::Frame,
            CommandArg::Dual => Command::Dual,
            CommandArg::Carleson => Command::Carleson,
            CommandArg::Lift => Command::Lift,
            CommandArg::Babenko => Command::Babenko,
            CommandArg::Seqgen => Command::Seqgen,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum FormatArg {
    Json,
    Csv,
}

/// Reproducing kernels, Grammians and frame constants at finite truncation.
#[derive(Debug, Parser)]
#[command(name = "rkframe", version)]
struct Cli {
    /// Must agree with the `command` field of the config.
    #[arg(value_enum)]
    command: CommandArg,
    /// JSON experiment configuration.
    #[arg(long)]
    config: PathBuf,
    /// Overrides the `seed` field.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; overrides the `output` field (default: current directory).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    format: FormatArg,
    /// Validate the configuration and exit without computing.
    #[arg(long)]
    dry_run: bool,
}

fn load(cli: &Cli) -> Result<ExperimentConfig, Error> {
    let text = std::fs::read_to_string(&cli.config).map_err(|source| Error::Io {
        path: cli.config.display().to_string(),
        source,
    })?;
    let mut cfg = ExperimentConfig::from_json(&text)?;
    let wanted = Command::from(cli.command);
    if cfg.command != wanted {
        return Err(Error::Config(format!(
            "the command line asks for `{}` but the config is for `{}`",
            wanted.name(),
            cfg.command.name()
        )));
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.output = Some(out.display().to_string());
    }
    Ok(cfg)
}

fn execute(cli: &Cli) -> Result<(), Error> {
    let cfg = load(cli)?;
    println!("{}", cfg.to_json());
    cfg.validate()?;
    if cli.dry_run {
        eprintln!("[rkframe] configuration is valid; nothing computed (--dry-run)");
        return Ok(());
    }
    let report = run(&cfg)?;
    for w in &report.warnings {
        eprintln!("[rkframe] warning: {w}");
    }
    let dir = PathBuf::from(cfg.output.as_deref().unwrap_or("."));
    let format = match cli.format {
        FormatArg::Json => Format::Json,
        FormatArg::Csv => Format::Csv,
    };
    for path in emit_report(&report, format, &dir)? {
        eprintln!("[rkframe] wrote {}", path.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("rkframe: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
