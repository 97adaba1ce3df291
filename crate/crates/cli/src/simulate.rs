//! The `simulate` subcommand: presets, the flat key=value config format,
//! and CSV emission.
//!
//! Config keys: `m`, `q`, `reps`, `seed`, `w`, `xi`, `v` (comma-separated
//! lists), `methods` (comma-separated identifiers), `lambda` (adaptive split
//! point), `b` (bootstrap replicates). Lines starting with `#` are comments.

use crate::CliError;
use clap::Args;
use dirfdr::sim::{run_study, MethodId, SimConfig};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

#[derive(Args)]
pub struct SimulateArgs {
    /// Flat key=value config file overriding the preset
    #[arg(long)]
    config: Option<PathBuf>,
    /// Small preset: m=200, 400 replications, reduced grid
    #[arg(long = "desk-scale")]
    desk_scale: bool,
    /// Restrict to these methods (comma separated)
    #[arg(long)]
    methods: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for replications.csv and aggregate.csv
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

fn parse_f64_list(value: &str, key: &str) -> Result<Vec<f64>, CliError> {
    value
        .split(',')
        .map(|part| {
            part.trim()
                .parse::<f64>()
                .map_err(|_| CliError::input(format!("config key {key}: bad number {part}")))
        })
        .collect()
}

fn parse_methods(value: &str) -> Result<Vec<MethodId>, CliError> {
    value
        .split(',')
        .map(|part| part.trim().parse::<MethodId>().map_err(CliError::from))
        .collect()
}

fn apply_config_file(cfg: &mut SimConfig, path: &PathBuf) -> Result<(), CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::input(format!("cannot read {}: {e}", path.display())))?;
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| CliError::input(format!("line {}: expected key=value", lineno + 1)))?;
        let (key, value) = (key.trim(), value.trim());
        match key {
            "m" => {
                cfg.m = value
                    .parse()
                    .map_err(|_| CliError::input(format!("config key m: bad integer {value}")))?
            }
            "q" => {
                cfg.q = value
                    .parse()
                    .map_err(|_| CliError::input(format!("config key q: bad number {value}")))?
            }
            "reps" => {
                cfg.reps = value
                    .parse()
                    .map_err(|_| CliError::input(format!("config key reps: bad integer {value}")))?
            }
            "seed" => {
                cfg.seed = value
                    .parse()
                    .map_err(|_| CliError::input(format!("config key seed: bad integer {value}")))?
            }
            "w" => cfg.w_grid = parse_f64_list(value, "w")?,
            "xi" => cfg.xi_grid = parse_f64_list(value, "xi")?,
            "v" => cfg.v_grid = parse_f64_list(value, "v")?,
            "methods" => cfg.methods = parse_methods(value)?,
            "lambda" => {
                cfg.storey_lambda = value.parse().map_err(|_| {
                    CliError::input(format!("config key lambda: bad number {value}"))
                })?
            }
            "b" => {
                cfg.bootstrap_reps = value
                    .parse()
                    .map_err(|_| CliError::input(format!("config key b: bad integer {value}")))?
            }
            other => return Err(CliError::input(format!("unknown config key: {other}"))),
        }
    }
    Ok(())
}

pub fn run(args: SimulateArgs) -> Result<(), CliError> {
    let mut cfg = if args.desk_scale { SimConfig::desk_scale() } else { SimConfig::default() };
    if let Some(path) = &args.config {
        apply_config_file(&mut cfg, path)?;
    }
    if let Some(methods) = &args.methods {
        cfg.methods = parse_methods(methods)?;
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    cfg.validate().map_err(CliError::from)?;

    let n_cells = cfg.cells()?.len();
    eprintln!(
        "running {} cells x {} reps at m={} q={} with {} method(s)",
        n_cells,
        cfg.reps,
        cfg.m,
        cfg.q,
        cfg.methods.len()
    );
    let result = run_study(&cfg)?;

    std::fs::create_dir_all(&args.out)?;
    let rep_path = args.out.join("replications.csv");
    let agg_path = args.out.join("aggregate.csv");
    let mut rep_file = BufWriter::new(File::create(&rep_path)?);
    result.write_replications_csv(&mut rep_file)?;
    rep_file.flush()?;
    let mut agg_file = BufWriter::new(File::create(&agg_path)?);
    result.write_aggregate_csv(&mut agg_file)?;
    agg_file.flush()?;

    let n_errors: usize = result.aggregates.iter().map(|a| a.n_errors).sum();
    eprintln!(
        "wrote {} and {} ({} method errors)",
        rep_path.display(),
        agg_path.display(),
        n_errors
    );
    Ok(())
}
