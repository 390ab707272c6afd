use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use hfscatter::cli::{execute, EXIT_USAGE};
use hfscatter::config::{normalize_key, parse_key_values, RunConfig};

/// High-frequency scattering by convex impedance obstacles.
///
/// Commands: density, cross-section, transport-limit, mie-sweep,
/// limit-check, jacobian-check, optimize.
#[derive(Parser, Debug)]
#[command(name = "hfscatter", version, about)]
struct Args {
    /// Command to run; overrides `command` from the config file.
    command: Option<String>,

    /// Flat `key = value` config file.
    #[arg(long, short)]
    config: Option<PathBuf>,

    /// Extra `key=value` overrides, applied after the named flags.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,

    /// Surface kind: sphere, ellipsoid, paraboloid, plane, cone, radial.
    #[arg(long)]
    kind: Option<String>,

    /// Boundary impedance (number, inf, dirichlet, neumann).
    #[arg(long)]
    gamma: Option<String>,

    /// Single size parameter ka.
    #[arg(long)]
    ka: Option<String>,

    /// Size-parameter grid `lo:hi:n` (log-spaced) or a comma list.
    #[arg(long)]
    ka_grid: Option<String>,

    /// Output file (stdout when omitted).
    #[arg(long, short)]
    output: Option<String>,

    /// csv or json.
    #[arg(long)]
    format: Option<String>,

    /// Seed for randomized check points.
    #[arg(long)]
    seed: Option<String>,
}

fn load(args: Args) -> hfscatter::Result<RunConfig> {
    let mut map = match &args.config {
        Some(path) => parse_key_values(&std::fs::read_to_string(path)?)?,
        None => Default::default(),
    };
    let named = [
        ("command", args.command),
        ("kind", args.kind),
        ("gamma", args.gamma),
        ("ka", args.ka),
        ("ka_grid", args.ka_grid),
        ("output", args.output),
        ("format", args.format),
        ("seed", args.seed),
    ];
    for (key, value) in named {
        if let Some(v) = value {
            map.insert(key.to_string(), v);
        }
    }
    for kv in &args.set {
        let Some((k, v)) = kv.split_once('=') else {
            return Err(hfscatter::Error::Parse(format!("--set expects KEY=VALUE, got '{kv}'")));
        };
        let line = format!("{} = {}", normalize_key(k), v.trim());
        map.extend(parse_key_values(&line)?);
    }
    if map.contains_key("ka") && map.contains_key("ka_grid") && args.config.is_none() {
        return Err(hfscatter::Error::Parse("give either ka or ka_grid, not both".into()));
    }
    RunConfig::from_map(&map)
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE as u8 } else { 0 });
        }
    };
    let cfg = match load(args) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("usage error: {e}");
            eprintln!("run `hfscatter --help` for the command list");
            return ExitCode::from(EXIT_USAGE as u8);
        }
    };
    ExitCode::from(execute(&cfg) as u8)
}
