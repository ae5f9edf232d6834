use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use qtorus_core::catalog::{self, CheckSpec, Params};
use qtorus_core::report::{self, Report};

/// Exact verification of KP-type hierarchy identities and their quantum torus flows.
#[derive(Parser, Debug)]
#[command(name = "verify", version, args_conflicts_with_subcommands = true, subcommand_negates_reqs = true)]
struct Cli {
    #[command(subcommand)]
    command: Option<Command>,
    /// Check to run, e.g. `verify kp.canonical --O 10`.
    #[arg(required = true)]
    check: Option<String>,
    #[command(flatten)]
    opts: RunOpts,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run a single named check (same as passing the name directly).
    Verify {
        check: String,
        #[command(flatten)]
        opts: RunOpts,
    },
    /// List the registered checks.
    List {
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Run a named batch of checks ("paper-all", "quick").
    Suite {
        name: String,
        #[command(flatten)]
        opts: RunOpts,
    },
}

#[derive(Args, Debug, Default)]
struct RunOpts {
    /// Active time horizon.
    #[arg(long = "T", value_name = "n")]
    t: Option<u32>,
    /// Truncation order of the dressing operator.
    #[arg(long = "O", value_name = "n")]
    o: Option<u32>,
    /// Cap on the degree in eps = log q.
    #[arg(long = "D", value_name = "n")]
    d: Option<u32>,
    /// Truncation of the sum over powers of M.
    #[arg(long = "P", value_name = "n")]
    p: Option<u32>,
    /// Comma-separated index tuple, e.g. 1,0,0,1.
    #[arg(long, value_name = "a,b,...", value_delimiter = ',', allow_hyphen_values = true)]
    indices: Option<Vec<i64>>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Configuration file with `key = value` lines; flags take precedence.
    #[arg(long, env = "QTORUS_CONFIG", value_name = "path")]
    config: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
enum Format {
    Text,
    Json,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    #[serde(rename = "T")]
    t: Option<u32>,
    #[serde(rename = "O")]
    o: Option<u32>,
    #[serde(rename = "D")]
    d: Option<u32>,
    #[serde(rename = "P")]
    p: Option<u32>,
    indices: Option<Vec<i64>>,
    format: Option<Format>,
}

fn load_config(path: &Path) -> Result<FileConfig, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    toml::from_str(&text).map_err(|e| format!("invalid config {}: {e}", path.display()))
}

impl RunOpts {
    fn resolve(&self) -> Result<(Params, Format), String> {
        let file = match &self.config {
            Some(p) => load_config(p)?,
            None => FileConfig::default(),
        };
        let flags = Params { t: self.t, o: self.o, d: self.d, p: self.p, indices: self.indices.clone() };
        let from_file = Params { t: file.t, o: file.o, d: file.d, p: file.p, indices: file.indices };
        let format = self.format.or(file.format).unwrap_or(Format::Text);
        Ok((flags.or(&from_file), format))
    }
}

fn emit(reports: &[Report], format: Format) {
    match format {
        Format::Text => print!("{}", report::to_text(reports)),
        Format::Json => println!("{}", report::to_json(reports)),
    }
}

fn exit_for(reports: &[Report]) -> ExitCode {
    if reports.iter().all(Report::passed) {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn list(format: Format) {
    let checks = catalog::list_checks();
    match format {
        Format::Json => println!("{}", serde_json::to_string_pretty(checks).expect("catalog serializes")),
        Format::Text => {
            let width = checks.iter().map(|c| c.name.len()).max().unwrap_or(0);
            for c in checks {
                let mut params = c.params.join(",");
                if c.indices.1 > 0 {
                    params.push_str(&format!(" indices={}", c.indices.0));
                }
                println!("{:<width$}  {:<28}  {}", c.name, params, c.anchor);
            }
            println!();
            println!(
                "defaults: T={} O={} D={} P={}",
                catalog::DEFAULT_T,
                catalog::DEFAULT_O,
                catalog::DEFAULT_D,
                catalog::DEFAULT_P
            );
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let command = match (cli.command, cli.check) {
        (Some(c), _) => c,
        (None, Some(check)) => Command::Verify { check, opts: cli.opts },
        (None, None) => unreachable!("clap requires a check or a subcommand"),
    };
    match command {
        Command::List { format } => {
            list(format);
            ExitCode::SUCCESS
        }
        Command::Verify { check, opts } => {
            let (params, format) = match opts.resolve() {
                Ok(v) => v,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(2);
                }
            };
            let reports = vec![catalog::run_check(&CheckSpec::new(check, params))];
            emit(&reports, format);
            exit_for(&reports)
        }
        Command::Suite { name, opts } => {
            let (params, format) = match opts.resolve() {
                Ok(v) => v,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(2);
                }
            };
            let Some(specs) = catalog::suite(&name) else {
                eprintln!("error: unknown suite {name:?} (known: {})", catalog::SUITES.join(", "));
                return ExitCode::from(2);
            };
            let specs: Vec<CheckSpec> = specs
                .into_iter()
                .map(|s| {
                    // indices are per-check, so a suite only forwards the numeric knobs
                    let p = Params { indices: None, ..params.clone() };
                    CheckSpec::new(s.name, p.or(&s.params))
                })
                .collect();
            let reports = catalog::run_checks(&specs);
            emit(&reports, format);
            exit_for(&reports)
        }
    }
}
