//! The `analyze` and `select-lambda` subcommands.

use crate::input::{parse_lambda_grid, read_analysis_csv, AnalysisInput};
use crate::CliError;
use clap::Args;
use dirfdr::classical::{
    astorey_dir, auto_lambda_detailed, bh_dir, default_lambda_grid, gr_procedure, storey_dir,
    StoreyConfig,
};
use dirfdr::null::two_sided_pvalue;
use dirfdr::oracle::{ash_procedure, lfsr_oracle, SimPrior};
use dirfdr::sim::MethodId;
use dirfdr::zdirect::{zdirect, ZdirectConfig};
use dirfdr::DecisionSet;
use std::path::PathBuf;

#[derive(Args)]
pub struct AnalyzeArgs {
    /// Input CSV with columns id, z and optional family, sigma, nu, alpha, beta
    #[arg(long)]
    input: PathBuf,
    /// One of: bh-dir, gr, storey-dir, astorey-dir, zdirect, ash, lfsr-oracle
    #[arg(long)]
    method: String,
    /// Target directional FDR level
    #[arg(long, default_value_t = 0.1)]
    q: f64,
    /// Split point of the adaptive procedure
    #[arg(long, default_value_t = 0.5)]
    lambda: f64,
    /// Bootstrap replicates for the data-driven split point
    #[arg(long = "B", default_value_t = 1000)]
    bootstrap: usize,
    /// Candidate split points, comma separated (default 0.05,0.10,...,0.95)
    #[arg(long = "lambda-grid")]
    lambda_grid: Option<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Generating prior "w,xi,v" (required by lfsr-oracle)
    #[arg(long)]
    prior: Option<String>,
    /// Output path; stdout when omitted
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_prior(raw: &str) -> Result<SimPrior, CliError> {
    let parts: Vec<&str> = raw.split(',').collect();
    if parts.len() != 3 {
        return Err(CliError::input(format!("--prior expects w,xi,v; got {raw}")));
    }
    let mut vals = [0.0f64; 3];
    for (slot, part) in vals.iter_mut().zip(&parts) {
        *slot = part
            .trim()
            .parse()
            .map_err(|_| CliError::input(format!("bad prior component: {part}")))?;
    }
    Ok(SimPrior::new(vals[0], vals[1], vals[2])?)
}

fn run_procedure(args: &AnalyzeArgs, data: &AnalysisInput) -> Result<DecisionSet, CliError> {
    let method: MethodId = args.method.parse()?;
    let grid = match &args.lambda_grid {
        Some(raw) => parse_lambda_grid(raw)?,
        None => default_lambda_grid(),
    };
    let decisions = match method {
        MethodId::BhDir => bh_dir(&data.sample, args.q)?,
        MethodId::Gr => gr_procedure(&data.sample, args.q)?,
        MethodId::StoreyDir => {
            storey_dir(&data.sample, &StoreyConfig::new(args.lambda, args.q)?)?
        }
        MethodId::AStoreyDir => {
            astorey_dir(&data.sample, args.q, args.bootstrap, &grid, args.seed)?
        }
        MethodId::Zdirect => zdirect(&data.sample, args.q, &ZdirectConfig::default())?,
        MethodId::Ash => ash_procedure(&data.sample, args.q)?,
        MethodId::LfsrOracle => {
            let raw = args
                .prior
                .as_ref()
                .ok_or_else(|| CliError::input("method lfsr-oracle requires --prior w,xi,v"))?;
            lfsr_oracle(&data.sample, &parse_prior(raw)?, args.q)?
        }
    };
    Ok(decisions)
}

pub fn run(args: AnalyzeArgs) -> Result<(), CliError> {
    let data = read_analysis_csv(&args.input)?;
    let decisions = run_procedure(&args, &data)?;

    let mut body = String::from("id,z,p_value,rejected,sign,method,q\n");
    for (i, id) in data.ids.iter().enumerate() {
        let p = two_sided_pvalue(data.sample.z[i], &data.sample.families[i])?;
        let (rejected, sign) = match decisions.sign_of(i) {
            Some(s) => (1, if s > 0 { "+1" } else { "-1" }),
            None => (0, ""),
        };
        body.push_str(&format!(
            "{id},{z},{p},{rejected},{sign},{method},{q}\n",
            z = data.sample.z[i],
            method = args.method,
            q = args.q
        ));
    }
    match &args.out {
        Some(path) => std::fs::write(path, body)?,
        None => crate::print_stdout(&body)?,
    }
    eprintln!("{} of {} rejected", decisions.len(), data.ids.len());
    Ok(())
}

#[derive(Args)]
pub struct SelectLambdaArgs {
    /// Input CSV; same format as `analyze`
    #[arg(long)]
    input: PathBuf,
    #[arg(long = "B", default_value_t = 1000)]
    bootstrap: usize,
    #[arg(long = "lambda-grid")]
    lambda_grid: Option<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

pub fn run_select_lambda(args: SelectLambdaArgs) -> Result<(), CliError> {
    let data = read_analysis_csv(&args.input)?;
    let grid = match &args.lambda_grid {
        Some(raw) => parse_lambda_grid(raw)?,
        None => default_lambda_grid(),
    };
    let pvalues = data.sample.pvalues();
    let (chosen, table) = auto_lambda_detailed(&pvalues, args.bootstrap, &grid, args.seed)?;
    let mut body = format!("lambda_hat = {chosen}\nlambda,mse\n");
    for (lambda, mse) in table {
        body.push_str(&format!("{lambda},{mse}\n"));
    }
    crate::print_stdout(&body)
}
