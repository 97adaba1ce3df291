//! Monte-Carlo study harness: generate data from the mixture prior over a
//! parameter grid, run every requested procedure on the same replication,
//! score directional errors and power, and aggregate.
//!
//! Replications are keyed random streams of `(seed, cell values, rep)`, so
//! results are bit-identical whether replications run serially or in
//! parallel, methods within a replication always see identical data, and
//! extending the replication count leaves existing replications unchanged.

use crate::classical::{
    astorey_dir, bh_dir, default_lambda_grid, gr_procedure, sgn, storey_dir, DecisionSet,
    StoreyConfig, DEFAULT_BOOTSTRAP_REPS,
};
use crate::error::{Error, Result};
use crate::null::ZSample;
use crate::oracle::{ash_procedure, lfsr_oracle, SimPrior};
use crate::rng;
use crate::zdirect::{zdirect, ZdirectConfig};
use rand::RngCore;
use rayon::prelude::*;
use std::fmt;
use std::io::{self, Write};
use std::str::FromStr;

const ROLE_DATA: u64 = 0x6461_7461;
const ROLE_ASTOREY: u64 = 0x6173_746f;

/// The procedures the harness can run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MethodId {
    BhDir,
    Gr,
    StoreyDir,
    AStoreyDir,
    Zdirect,
    Ash,
    LfsrOracle,
}

impl MethodId {
    pub const ALL: [MethodId; 7] = [
        MethodId::BhDir,
        MethodId::Gr,
        MethodId::StoreyDir,
        MethodId::AStoreyDir,
        MethodId::Zdirect,
        MethodId::Ash,
        MethodId::LfsrOracle,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            MethodId::BhDir => "bh-dir",
            MethodId::Gr => "gr",
            MethodId::StoreyDir => "storey-dir",
            MethodId::AStoreyDir => "astorey-dir",
            MethodId::Zdirect => "zdirect",
            MethodId::Ash => "ash",
            MethodId::LfsrOracle => "lfsr-oracle",
        }
    }
}

impl fmt::Display for MethodId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MethodId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        MethodId::ALL
            .iter()
            .find(|m| m.as_str() == s)
            .copied()
            .ok_or_else(|| Error::input(format!("unknown method: {s}")))
    }
}

/// Full study description: design size, target level, parameter grids,
/// methods, seed, and per-method tuning.
#[derive(Debug, Clone)]
pub struct SimConfig {
    pub m: usize,
    pub q: f64,
    pub reps: usize,
    pub seed: u64,
    pub w_grid: Vec<f64>,
    pub xi_grid: Vec<f64>,
    pub v_grid: Vec<f64>,
    pub methods: Vec<MethodId>,
    pub storey_lambda: f64,
    pub bootstrap_reps: usize,
    pub lambda_grid: Vec<f64>,
    pub zdirect: ZdirectConfig,
}

impl Default for SimConfig {
    /// The reference study: m = 1000, q = 0.1, 1000 replications over the
    /// full parameter grid, all seven methods.
    fn default() -> Self {
        SimConfig {
            m: 1000,
            q: 0.1,
            reps: 1000,
            seed: 7,
            w_grid: vec![0.8, 0.5, 0.2, 0.0],
            xi_grid: vec![0.5, 1.0, 1.5, 2.0, 2.5],
            v_grid: vec![0.5, 0.75, 1.0],
            methods: MethodId::ALL.to_vec(),
            storey_lambda: 0.5,
            bootstrap_reps: DEFAULT_BOOTSTRAP_REPS,
            lambda_grid: default_lambda_grid(),
            zdirect: ZdirectConfig::default(),
        }
    }
}

impl SimConfig {
    /// Desk-scale preset: m = 200, 400 replications, a reduced grid. Small
    /// enough for an interactive run, large enough for the level and power
    /// comparisons to resolve.
    pub fn desk_scale() -> Self {
        SimConfig {
            m: 200,
            reps: 400,
            w_grid: vec![0.8, 0.5, 0.2, 0.0],
            xi_grid: vec![1.0, 2.0, 2.5],
            v_grid: vec![0.5, 1.0],
            ..SimConfig::default()
        }
    }

    /// One simulation cell per grid combination, in deterministic order.
    pub fn cells(&self) -> Result<Vec<SimPrior>> {
        let mut cells = Vec::new();
        for &w in &self.w_grid {
            for &xi in &self.xi_grid {
                for &v in &self.v_grid {
                    cells.push(SimPrior::new(w, xi, v)?);
                }
            }
        }
        Ok(cells)
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 || self.reps == 0 {
            return Err(Error::input("m and reps must be positive"));
        }
        if !(self.q > 0.0 && self.q < 1.0) {
            return Err(Error::input(format!("q must lie in (0,1), got {}", self.q)));
        }
        if self.methods.is_empty() {
            return Err(Error::input("at least one method is required"));
        }
        if self.w_grid.is_empty() || self.xi_grid.is_empty() || self.v_grid.is_empty() {
            return Err(Error::input("parameter grids must be nonempty"));
        }
        self.cells().map(|_| ())
    }
}

/// Draw one replication: effects from the prior (exact zeros for the point
/// mass), observations with unit normal noise. The rare exact floating-point
/// zero observation is redrawn so signs stay defined.
pub fn sample_cell<R: RngCore>(prior: &SimPrior, m: usize, rng: &mut R) -> (Vec<f64>, ZSample) {
    let mut thetas = Vec::with_capacity(m);
    let mut z = Vec::with_capacity(m);
    for _ in 0..m {
        let theta = if rng::open_unit(rng) < prior.w {
            0.0
        } else if rng::open_unit(rng) < prior.v {
            prior.xi + rng::standard_normal(rng)
        } else {
            -prior.xi + rng::standard_normal(rng)
        };
        let mut obs = theta + rng::standard_normal(rng);
        while obs == 0.0 {
            obs = theta + rng::standard_normal(rng);
        }
        thetas.push(theta);
        z.push(obs);
    }
    let sample = ZSample::with_standard_normal(z).expect("generated sample is valid");
    (thetas, sample)
}

/// Score a decision set against the true effects: a discovery is false when
/// its declared sign differs from the sign of the effect (any declaration on
/// a zero effect is false). Returns the false discovery proportion
/// (denominator `max(#discoveries, 1)`), the true positive proportion
/// (correct sign declarations over `max(#nonzero effects, 1)`), and the
/// count of true discoveries.
pub fn evaluate(decisions: &DecisionSet, thetas: &[f64]) -> (f64, f64, usize) {
    let n_rejected = decisions.len();
    let mut n_true = 0usize;
    for (i, declared) in decisions.iter() {
        if sgn(thetas[i]) == declared {
            n_true += 1;
        }
    }
    let n_false = n_rejected - n_true;
    let n_nonnull = thetas.iter().filter(|&&t| t != 0.0).count();
    (
        n_false as f64 / n_rejected.max(1) as f64,
        n_true as f64 / n_nonnull.max(1) as f64,
        n_true,
    )
}

/// Per-replication scores of one method.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RepMetrics {
    pub fdp_dir: f64,
    pub tpp: f64,
    pub n_rejected: usize,
}

/// One row of the replication table.
#[derive(Debug, Clone)]
pub struct RepRow {
    pub w: f64,
    pub xi: f64,
    pub v: f64,
    pub method: MethodId,
    pub rep: usize,
    pub outcome: std::result::Result<RepMetrics, String>,
}

/// Aggregated scores of one (cell, method) pair over its replications.
#[derive(Debug, Clone)]
pub struct CellAggregate {
    pub w: f64,
    pub xi: f64,
    pub v: f64,
    pub method: MethodId,
    pub n_reps: usize,
    pub n_errors: usize,
    pub mean_fdr_dir: f64,
    pub se_fdr_dir: f64,
    pub mean_tpr: f64,
    pub se_tpr: f64,
    pub mean_n_rejected: f64,
}

/// Study output: the full replication table plus per-cell aggregates.
#[derive(Debug, Clone)]
pub struct SimResult {
    pub q: f64,
    pub rows: Vec<RepRow>,
    pub aggregates: Vec<CellAggregate>,
}

fn run_method(
    method: MethodId,
    sample: &ZSample,
    cfg: &SimConfig,
    prior: &SimPrior,
    astorey_seed: u64,
) -> Result<DecisionSet> {
    match method {
        MethodId::BhDir => bh_dir(sample, cfg.q),
        MethodId::Gr => gr_procedure(sample, cfg.q),
        MethodId::StoreyDir => storey_dir(sample, &StoreyConfig::new(cfg.storey_lambda, cfg.q)?),
        MethodId::AStoreyDir => {
            astorey_dir(sample, cfg.q, cfg.bootstrap_reps, &cfg.lambda_grid, astorey_seed)
        }
        MethodId::Zdirect => zdirect(sample, cfg.q, &cfg.zdirect),
        MethodId::Ash => ash_procedure(sample, cfg.q),
        MethodId::LfsrOracle => lfsr_oracle(sample, prior, cfg.q),
    }
}

/// Run the whole study. Replications are independent parallel work items;
/// every method within a replication sees the same data, and the output is
/// bit-identical regardless of the worker count.
pub fn run_study(cfg: &SimConfig) -> Result<SimResult> {
    cfg.validate()?;
    let cells = cfg.cells()?;
    let jobs: Vec<(usize, usize)> = (0..cells.len())
        .flat_map(|ci| (0..cfg.reps).map(move |rep| (ci, rep)))
        .collect();

    let per_job: Vec<Vec<RepRow>> = jobs
        .par_iter()
        .map(|&(ci, rep)| {
            let prior = &cells[ci];
            let key = [
                cfg.seed,
                ROLE_DATA,
                prior.w.to_bits(),
                prior.xi.to_bits(),
                prior.v.to_bits(),
                rep as u64,
            ];
            let mut data_rng = rng::stream_rng(&key);
            let (thetas, sample) = sample_cell(prior, cfg.m, &mut data_rng);
            let astorey_seed = rng::derive_seed(&[
                cfg.seed,
                ROLE_ASTOREY,
                prior.w.to_bits(),
                prior.xi.to_bits(),
                prior.v.to_bits(),
                rep as u64,
            ]);
            cfg.methods
                .iter()
                .map(|&method| {
                    let outcome = match run_method(method, &sample, cfg, prior, astorey_seed) {
                        Ok(decisions) => {
                            let (fdp_dir, tpp, _) = evaluate(&decisions, &thetas);
                            Ok(RepMetrics { fdp_dir, tpp, n_rejected: decisions.len() })
                        }
                        Err(e) => Err(e.to_string()),
                    };
                    RepRow { w: prior.w, xi: prior.xi, v: prior.v, method, rep, outcome }
                })
                .collect()
        })
        .collect();

    let rows: Vec<RepRow> = per_job.into_iter().flatten().collect();
    let aggregates = aggregate(cfg, &cells, &rows);
    Ok(SimResult { q: cfg.q, rows, aggregates })
}

fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|&x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

fn aggregate(cfg: &SimConfig, cells: &[SimPrior], rows: &[RepRow]) -> Vec<CellAggregate> {
    let mut out = Vec::with_capacity(cells.len() * cfg.methods.len());
    for prior in cells {
        for &method in &cfg.methods {
            let mut fdps = Vec::new();
            let mut tpps = Vec::new();
            let mut rejs = Vec::new();
            let mut n_errors = 0usize;
            for row in rows {
                if row.method == method && row.w == prior.w && row.xi == prior.xi && row.v == prior.v
                {
                    match &row.outcome {
                        Ok(m) => {
                            fdps.push(m.fdp_dir);
                            tpps.push(m.tpp);
                            rejs.push(m.n_rejected as f64);
                        }
                        Err(_) => n_errors += 1,
                    }
                }
            }
            let (mean_fdr_dir, se_fdr_dir) = mean_and_se(&fdps);
            let (mean_tpr, se_tpr) = mean_and_se(&tpps);
            let (mean_n_rejected, _) = mean_and_se(&rejs);
            out.push(CellAggregate {
                w: prior.w,
                xi: prior.xi,
                v: prior.v,
                method,
                n_reps: fdps.len(),
                n_errors,
                mean_fdr_dir,
                se_fdr_dir,
                mean_tpr,
                se_tpr,
                mean_n_rejected,
            });
        }
    }
    out
}

impl SimResult {
    /// Per-replication scores of one (cell, method), in replication order.
    pub fn rep_metrics(&self, w: f64, xi: f64, v: f64, method: MethodId) -> Vec<RepMetrics> {
        let mut rows: Vec<(usize, RepMetrics)> = self
            .rows
            .iter()
            .filter(|r| r.method == method && r.w == w && r.xi == xi && r.v == v)
            .filter_map(|r| r.outcome.as_ref().ok().map(|m| (r.rep, *m)))
            .collect();
        rows.sort_unstable_by_key(|&(rep, _)| rep);
        rows.into_iter().map(|(_, m)| m).collect()
    }

    pub fn cell_aggregate(&self, w: f64, xi: f64, v: f64, method: MethodId) -> Option<&CellAggregate> {
        self.aggregates
            .iter()
            .find(|a| a.method == method && a.w == w && a.xi == xi && a.v == v)
    }

    /// Replication table as CSV. Error rows leave the score columns empty
    /// and carry the message in the final column.
    pub fn write_replications_csv<W: Write>(&self, out: &mut W) -> io::Result<()> {
        writeln!(out, "w,xi,v,method,rep,fdp_dir,tpp,n_rejected,error")?;
        for r in &self.rows {
            match &r.outcome {
                Ok(m) => writeln!(
                    out,
                    "{},{},{},{},{},{},{},{},",
                    r.w, r.xi, r.v, r.method, r.rep, m.fdp_dir, m.tpp, m.n_rejected
                )?,
                Err(e) => writeln!(
                    out,
                    "{},{},{},{},{},,,,{}",
                    r.w,
                    r.xi,
                    r.v,
                    r.method,
                    r.rep,
                    e.replace([',', '\n'], ";")
                )?,
            }
        }
        Ok(())
    }

    /// Per-cell aggregate table as CSV.
    pub fn write_aggregate_csv<W: Write>(&self, out: &mut W) -> io::Result<()> {
        writeln!(
            out,
            "w,xi,v,method,q,n_reps,n_errors,fdr_dir_mean,fdr_dir_se,tpr_mean,tpr_se,n_rejected_mean"
        )?;
        for a in &self.aggregates {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{}",
                a.w,
                a.xi,
                a.v,
                a.method,
                self.q,
                a.n_reps,
                a.n_errors,
                a.mean_fdr_dir,
                a.se_fdr_dir,
                a.mean_tpr,
                a.se_tpr,
                a.mean_n_rejected
            )?;
        }
        Ok(())
    }
}
