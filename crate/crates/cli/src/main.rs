use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use spinmech_cli::{dispatch, read_config, validate, Format, Overrides};

#[derive(Parser)]
#[command(
    name = "spinmech",
    version,
    about = "Spin–mechanical battery, cooling and Otto-engine simulations"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// TOML run configuration
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Worker threads for sweeps
    #[arg(long, global = true)]
    workers: Option<usize>,

    /// Fixed Fock cutoff N (automatic when absent)
    #[arg(long, global = true)]
    fock_cutoff: Option<usize>,

    /// Data file format
    #[arg(long, global = true, value_enum)]
    format: Option<FormatArg>,
}

#[derive(Subcommand, Clone, Copy, PartialEq, Eq)]
enum Command {
    /// Charge, store and discharge the oscillator with spin kicks
    Battery,
    /// Repeated drive-and-reset cooling
    Cool,
    /// Cooling ratio over a (Δ, g) grid
    CoolMap,
    /// Otto cycles to steady state
    Otto,
    /// Otto steady states over stroke times
    OttoSweep,
    /// Oracle and invariant suite
    Validate,
}

impl Command {
    fn protocol(self) -> &'static str {
        match self {
            Command::Battery => "battery",
            Command::Cool => "cool",
            Command::CoolMap => "cool_map",
            Command::Otto => "otto",
            Command::OttoSweep => "otto_sweep",
            Command::Validate => "validate",
        }
    }
}

#[derive(ValueEnum, Clone, Copy)]
enum FormatArg {
    Csv,
    Json,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };

    if cli.command == Command::Validate {
        return match validate(cli.out.as_deref()) {
            Ok((checks, code)) => {
                for c in &checks {
                    println!("{}", c.line());
                }
                ExitCode::from(code)
            }
            Err(e) => {
                eprintln!("{e}");
                ExitCode::from(e.exit_code())
            }
        };
    }

    let Some(path) = &cli.config else {
        eprintln!(
            "configuration error: --config is required for {}",
            cli.command.protocol()
        );
        return ExitCode::from(1);
    };
    let over = Overrides {
        out: cli.out.clone(),
        workers: cli.workers,
        fock_cutoff: cli.fock_cutoff,
        format: cli.format.map(|f| match f {
            FormatArg::Csv => Format::Csv,
            FormatArg::Json => Format::Json,
        }),
    };
    let cfg = match read_config(path, &over) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("configuration error: {e}");
            return ExitCode::from(1);
        }
    };
    if cfg.protocol.name() != cli.command.protocol() {
        eprintln!(
            "configuration error: {} holds a [{}] block but the command is {}",
            path.display(),
            cfg.protocol.name(),
            cli.command.protocol()
        );
        return ExitCode::from(1);
    }

    match dispatch(&cfg) {
        Ok(out) => {
            for f in &out.files {
                println!("wrote {}", cfg.output.path.join(f).display());
            }
            if !out.healthy {
                eprintln!("invariant breach: {}", out.health.detail);
            }
            ExitCode::from(out.exit_code())
        }
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code())
        }
    }
}
