//! Step-up procedures over two-sided p-values with sign declarations:
//! the directional Benjamini-Hochberg procedure, its double-level variant,
//! the adaptive null-proportion procedure, and a bootstrap rule for picking
//! the adaptive procedure's tuning parameter from the data.

use crate::error::{Error, Result};
use crate::null::ZSample;
use crate::rng;
use rand::Rng;

/// Sign of a real number as `-1`, `0`, or `+1`.
pub fn sgn(x: f64) -> i8 {
    ((x > 0.0) as i8) - ((x < 0.0) as i8)
}

/// Rejected indices, each carrying a nonzero sign declaration.
///
/// The two vectors run in parallel: `signs[j]` is the declared sign of
/// `rejected[j]`, and `rejected` is sorted ascending with no duplicates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecisionSet {
    rejected: Vec<usize>,
    signs: Vec<i8>,
}

impl DecisionSet {
    pub fn empty() -> Self {
        DecisionSet { rejected: Vec::new(), signs: Vec::new() }
    }

    pub fn new(mut pairs: Vec<(usize, i8)>) -> Result<Self> {
        pairs.sort_unstable_by_key(|&(i, _)| i);
        let mut rejected = Vec::with_capacity(pairs.len());
        let mut signs = Vec::with_capacity(pairs.len());
        for (i, s) in pairs {
            if s != 1 && s != -1 {
                return Err(Error::input(format!("sign for index {i} must be +1 or -1, got {s}")));
            }
            if rejected.last() == Some(&i) {
                return Err(Error::input(format!("duplicate rejected index {i}")));
            }
            rejected.push(i);
            signs.push(s);
        }
        Ok(DecisionSet { rejected, signs })
    }

    /// Build from a rejection set, declaring each sign as the sign of `z[i]`.
    pub fn from_indices<I: IntoIterator<Item = usize>>(indices: I, z: &[f64]) -> Self {
        let mut rejected: Vec<usize> = indices.into_iter().collect();
        rejected.sort_unstable();
        rejected.dedup();
        let signs = rejected.iter().map(|&i| sgn(z[i])).collect();
        DecisionSet { rejected, signs }
    }

    pub fn len(&self) -> usize {
        self.rejected.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rejected.is_empty()
    }

    pub fn rejected(&self) -> &[usize] {
        &self.rejected
    }

    pub fn contains(&self, index: usize) -> bool {
        self.rejected.binary_search(&index).is_ok()
    }

    pub fn sign_of(&self, index: usize) -> Option<i8> {
        self.rejected.binary_search(&index).ok().map(|j| self.signs[j])
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, i8)> + '_ {
        self.rejected.iter().copied().zip(self.signs.iter().copied())
    }
}

/// Tuning of the adaptive procedure: the null-proportion split point and the
/// target directional FDR level.
#[derive(Debug, Clone, Copy)]
pub struct StoreyConfig {
    pub lambda: f64,
    pub q: f64,
}

impl StoreyConfig {
    pub fn new(lambda: f64, q: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda < 1.0) {
            return Err(Error::input(format!("lambda must lie in (0,1), got {lambda}")));
        }
        if !(q > 0.0 && q < 1.0) {
            return Err(Error::input(format!("q must lie in (0,1), got {q}")));
        }
        Ok(StoreyConfig { lambda, q })
    }
}

/// Indices sorted by (p-value, index); the stable tiebreak keeps every
/// downstream threshold deterministic.
fn sorted_order(pvalues: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..pvalues.len()).collect();
    order.sort_unstable_by(|&a, &b| pvalues[a].total_cmp(&pvalues[b]).then(a.cmp(&b)));
    order
}

/// Step-up rule: the largest p-value `p_(k)` with `p_(k) <= level * k / m`,
/// or `None` when no rank passes.
fn step_up_threshold(pvalues: &[f64], level: f64) -> Option<f64> {
    let m = pvalues.len() as f64;
    let order = sorted_order(pvalues);
    let mut threshold = None;
    for (rank0, &i) in order.iter().enumerate() {
        let k = (rank0 + 1) as f64;
        if pvalues[i] <= level * k / m {
            threshold = Some(pvalues[i]);
        }
    }
    threshold
}

fn reject_at_threshold(sample: &ZSample, pvalues: &[f64], threshold: Option<f64>) -> DecisionSet {
    match threshold {
        None => DecisionSet::empty(),
        Some(t) => DecisionSet::from_indices(
            (0..pvalues.len()).filter(|&i| pvalues[i] <= t),
            &sample.z,
        ),
    }
}

/// Directional Benjamini-Hochberg: step-up at level `q` on the two-sided
/// p-values, declaring the sign of each rejected index as the sign of its
/// z-value.
pub fn bh_dir(sample: &ZSample, q: f64) -> Result<DecisionSet> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::input(format!("q must lie in (0,1), got {q}")));
    }
    let pvalues = sample.pvalues();
    Ok(reject_at_threshold(sample, &pvalues, step_up_threshold(&pvalues, q)))
}

/// The double-level variant: identical to [`bh_dir`] run at level `2q`.
/// Only valid as a level-`q` directional procedure when no effect is zero.
pub fn gr_procedure(sample: &ZSample, q: f64) -> Result<DecisionSet> {
    if !(q > 0.0 && q < 0.5) {
        return Err(Error::input(format!(
            "q must lie in (0, 0.5) so the doubled level stays below one, got {q}"
        )));
    }
    bh_dir(sample, 2.0 * q)
}

/// Null-proportion estimate `(#{p_i > lambda} + 1) / ((1 - lambda) m)`.
///
/// Deliberately uncapped: values above one are meaningful to the adaptive
/// threshold rule and capping would break its conservativeness.
pub fn storey_pi_hat(pvalues: &[f64], lambda: f64) -> f64 {
    assert!(lambda > 0.0 && lambda < 1.0, "lambda out of range: {lambda}");
    let m = pvalues.len() as f64;
    let exceed = pvalues.iter().filter(|&&p| p > lambda).count() as f64;
    (exceed + 1.0) / ((1.0 - lambda) * m)
}

/// Adaptive directional procedure: step-up against the estimated FDR
/// `pi_hat(lambda) * m * t / (#{p_i <= t} v 1)` restricted to thresholds
/// `t <= lambda`. Realized over the sorted p-values, which is exact because
/// the estimate only decreases at p-value jumps.
pub fn storey_dir(sample: &ZSample, cfg: &StoreyConfig) -> Result<DecisionSet> {
    let pvalues = sample.pvalues();
    let m = pvalues.len() as f64;
    let pi_hat = storey_pi_hat(&pvalues, cfg.lambda);
    let order = sorted_order(&pvalues);
    let mut threshold = None;
    for (rank0, &i) in order.iter().enumerate() {
        let p = pvalues[i];
        if p > cfg.lambda {
            break;
        }
        let k = (rank0 + 1) as f64;
        if pi_hat * m * p / k <= cfg.q {
            threshold = Some(p);
        }
    }
    Ok(reject_at_threshold(sample, &pvalues, threshold))
}

pub const DEFAULT_BOOTSTRAP_REPS: usize = 1000;

/// The recommended candidate grid `0.05, 0.10, ..., 0.95`.
pub fn default_lambda_grid() -> Vec<f64> {
    (1..=19).map(|k| k as f64 * 0.05).collect()
}

/// Data-driven choice of the adaptive procedure's split point, with the
/// per-candidate bootstrap mean-squared-error table.
///
/// One resample of the p-values is drawn per bootstrap replicate and every
/// candidate is evaluated on it; the error of a candidate is measured against
/// the smallest estimate over the grid on the original data. Ties go to the
/// smallest candidate. Deterministic given `seed`.
pub fn auto_lambda_detailed(
    pvalues: &[f64],
    bootstrap_reps: usize,
    grid: &[f64],
    seed: u64,
) -> Result<(f64, Vec<(f64, f64)>)> {
    if grid.is_empty() {
        return Err(Error::input("candidate grid must be nonempty"));
    }
    if bootstrap_reps == 0 {
        return Err(Error::input("at least one bootstrap replicate is required"));
    }
    if pvalues.is_empty() {
        return Err(Error::input("p-value vector must be nonempty"));
    }
    for &l in grid {
        if !(l > 0.0 && l < 1.0) {
            return Err(Error::input(format!("grid candidate out of (0,1): {l}")));
        }
    }
    let m = pvalues.len();
    let pi_min = grid
        .iter()
        .map(|&l| storey_pi_hat(pvalues, l))
        .fold(f64::INFINITY, f64::min);

    let mut sq_err = vec![0.0f64; grid.len()];
    let mut resample = vec![0.0f64; m];
    for b in 0..bootstrap_reps {
        let mut r = rng::stream_rng(&[seed, 0x626f_6f74, b as u64]);
        for slot in resample.iter_mut() {
            *slot = pvalues[r.random_range(0..m)];
        }
        resample.sort_unstable_by(f64::total_cmp);
        for (j, &l) in grid.iter().enumerate() {
            let at_most = resample.partition_point(|&p| p <= l);
            let pi_b = ((m - at_most) as f64 + 1.0) / ((1.0 - l) * m as f64);
            sq_err[j] += (pi_b - pi_min) * (pi_b - pi_min);
        }
    }

    let mut table: Vec<(f64, f64)> = grid
        .iter()
        .zip(&sq_err)
        .map(|(&l, &s)| (l, s / bootstrap_reps as f64))
        .collect();
    let mut best = table[0];
    for &(l, mse) in &table[1..] {
        if mse < best.1 || (mse == best.1 && l < best.0) {
            best = (l, mse);
        }
    }
    table.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok((best.0, table))
}

/// [`auto_lambda_detailed`] returning just the selected candidate.
pub fn auto_lambda(pvalues: &[f64], bootstrap_reps: usize, grid: &[f64], seed: u64) -> Result<f64> {
    auto_lambda_detailed(pvalues, bootstrap_reps, grid, seed).map(|(l, _)| l)
}

/// Adaptive procedure with the bootstrap-selected split point. No control
/// guarantee is claimed for the data-driven choice; empirically it tracks the
/// fixed-parameter procedure closely.
pub fn astorey_dir(
    sample: &ZSample,
    q: f64,
    bootstrap_reps: usize,
    grid: &[f64],
    seed: u64,
) -> Result<DecisionSet> {
    let pvalues = sample.pvalues();
    let lambda = auto_lambda(&pvalues, bootstrap_reps, grid, seed)?;
    storey_dir(sample, &StoreyConfig::new(lambda, q)?)
}
