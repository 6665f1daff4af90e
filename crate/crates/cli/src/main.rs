use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use krflow_cli::config::{
    default_out_dir, validate_overrides, validate_raw, ConfigError, Mode, Overrides, RawConfig,
    RawOverrides, RunConfig,
};
use krflow_cli::exec::execute;
use krflow_cli::scenario::registry_names;

/// Geometric-flow laboratory: exact class engine and periodic-grid solver.
#[derive(Parser)]
#[command(name = "krflow", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct CommonArgs {
    /// Output directory (default: $KRFLOW_OUT or the current directory).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override a setting, e.g. `--override N=64` (keys: N, t_end, tolerance).
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Run a flow described by a JSON config file.
    Run {
        /// Config file; may also carry mode/overrides.
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Classify the singularity type of a class path on a geometry.
    Classify {
        #[arg(long)]
        geometry: PathBuf,
        /// Initial class coordinates, e.g. `--class 4,-1`.
        #[arg(long, value_delimiter = ',')]
        class: Vec<String>,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Run the minimal-model iteration for a class path on a geometry.
    Mmp {
        #[arg(long)]
        geometry: PathBuf,
        #[arg(long, value_delimiter = ',')]
        class: Vec<String>,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Run a shipped scenario (or all of them).
    Scenario {
        /// Scenario name from the registry.
        #[arg(long, conflicts_with = "all")]
        name: Option<String>,
        /// Run every scenario in the registry.
        #[arg(long)]
        all: bool,
        /// Worker threads for `--all`.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// List the scenario registry.
    List,
}

fn parse_override_args(args: &[String]) -> Result<RawOverrides, Vec<ConfigError>> {
    let mut raw = RawOverrides::default();
    let mut errors = Vec::new();
    for kv in args {
        match kv.split_once('=') {
            Some(("N", v)) => match v.parse() {
                Ok(n) => raw.n = Some(n),
                Err(_) => errors.push(ConfigError(format!("override N: bad integer `{v}`"))),
            },
            Some(("t_end", v)) => match v.parse() {
                Ok(t) => raw.t_end = Some(t),
                Err(_) => errors.push(ConfigError(format!("override t_end: bad number `{v}`"))),
            },
            Some(("tolerance", v)) => match v.parse() {
                Ok(t) => raw.tolerance = Some(t),
                Err(_) => {
                    errors.push(ConfigError(format!("override tolerance: bad number `{v}`")))
                }
            },
            Some((k, _)) => errors.push(ConfigError(format!(
                "unknown override key `{k}` (expected N, t_end or tolerance)"
            ))),
            None => errors.push(ConfigError(format!("override `{kv}` is not KEY=VALUE"))),
        }
    }
    if errors.is_empty() {
        Ok(raw)
    } else {
        Err(errors)
    }
}

fn merge_overrides(base: Overrides, extra: &RawOverrides) -> Result<Overrides, Vec<ConfigError>> {
    let mut errors = Vec::new();
    let validated = validate_overrides(extra, &mut errors);
    if !errors.is_empty() {
        return Err(errors);
    }
    Ok(Overrides {
        n: validated.n.or(base.n),
        t_end: validated.t_end.or(base.t_end),
        tolerance: validated.tolerance.or(base.tolerance),
    })
}

fn build_config(cli: Cli) -> Result<RunConfig, Vec<ConfigError>> {
    match cli.command {
        Command::Run { config, common } => {
            let text = std::fs::read_to_string(&config).map_err(|e| {
                vec![ConfigError(format!(
                    "cannot read config {}: {e}",
                    config.display()
                ))]
            })?;
            let mut cfg = krflow_cli::parse_config(&text)?;
            let extra = parse_override_args(&common.overrides)?;
            cfg.overrides = merge_overrides(cfg.overrides, &extra)?;
            if let Some(out) = common.out {
                cfg.out = out;
            }
            Ok(cfg)
        }
        Command::Classify {
            geometry,
            class,
            common,
        } => finish_simple(
            RawConfig {
                mode: Some("classify".into()),
                geometry: Some(geometry.display().to_string()),
                class: Some(class),
                ..Default::default()
            },
            common,
        ),
        Command::Mmp {
            geometry,
            class,
            common,
        } => finish_simple(
            RawConfig {
                mode: Some("mmp".into()),
                geometry: Some(geometry.display().to_string()),
                class: Some(class),
                ..Default::default()
            },
            common,
        ),
        Command::Scenario {
            name,
            all,
            jobs,
            common,
        } => {
            let raw = RawConfig {
                mode: Some("scenario".into()),
                name: if all { Some("all".into()) } else { name },
                ..Default::default()
            };
            let mut cfg = finish_simple(raw, common)?;
            cfg.jobs = jobs;
            Ok(cfg)
        }
        Command::List => unreachable!("handled before config building"),
    }
}

fn finish_simple(raw: RawConfig, common: CommonArgs) -> Result<RunConfig, Vec<ConfigError>> {
    let mut cfg = validate_raw(raw)?;
    let extra = parse_override_args(&common.overrides)?;
    cfg.overrides = merge_overrides(cfg.overrides, &extra)?;
    cfg.out = common.out.unwrap_or_else(default_out_dir);
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Command::List = cli.command {
        for name in registry_names() {
            println!("{name}");
        }
        return ExitCode::SUCCESS;
    }
    let config = match build_config(cli) {
        Ok(cfg) => cfg,
        Err(errors) => {
            eprintln!("configuration errors:");
            for e in errors {
                eprintln!("  - {e}");
            }
            return ExitCode::from(1);
        }
    };
    match execute(&config) {
        Ok(report) => {
            for path in &report.written {
                println!("{}", path.display());
            }
            if let Mode::Scenario { .. } | Mode::AllScenarios = config.mode {
                if report.exit_code == 2 {
                    eprintln!("singularity reached; partial trajectory written");
                }
            }
            ExitCode::from(report.exit_code as u8)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
