//! Unimodal working prior for effect sizes: a point mass at zero plus
//! uniform slabs `[0, a_k]` and `[-a_k, 0]` over a geometric endpoint grid.
//!
//! The module provides the grid construction, closed-form component
//! likelihoods (for observed values and for masked reflection pairs),
//! penalized maximum-likelihood fitting of the mixing weights over the
//! simplex, and posterior local false sign rates under a fitted model.

use crate::error::{Error, Result};
use crate::normal::{std_normal_cdf, std_normal_pdf};
use crate::null::NullFamily;

/// Positive slab endpoints `a_1 < a_2 < ... < a_K`; the negative endpoints
/// are implied by symmetry as `-a_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct SupportGrid {
    positive_endpoints: Vec<f64>,
}

impl SupportGrid {
    pub fn new(positive_endpoints: Vec<f64>) -> Result<Self> {
        if positive_endpoints.is_empty() {
            return Err(Error::input("support grid needs at least one endpoint"));
        }
        let mut last = 0.0;
        for &a in &positive_endpoints {
            if !(a > last) || !a.is_finite() {
                return Err(Error::input(format!(
                    "endpoints must be finite, positive, strictly increasing; got {a} after {last}"
                )));
            }
            last = a;
        }
        Ok(SupportGrid { positive_endpoints })
    }

    pub fn positive_endpoints(&self) -> &[f64] {
        &self.positive_endpoints
    }

    /// Number of slabs per side.
    pub fn k_max(&self) -> usize {
        self.positive_endpoints.len()
    }

    /// Total component count `2K + 1` (negative slabs, point mass, positive slabs).
    pub fn n_components(&self) -> usize {
        2 * self.k_max() + 1
    }

    /// Signed endpoint of component `k != 0`.
    pub fn endpoint(&self, k: i32) -> f64 {
        let a = self.positive_endpoints[(k.unsigned_abs() as usize) - 1];
        if k < 0 {
            -a
        } else {
            a
        }
    }

    /// Column index of component `k` in a likelihood matrix (`k = -K..=K`).
    pub fn column(&self, k: i32) -> usize {
        (k + self.k_max() as i32) as usize
    }

    /// Component label of column `j`.
    pub fn component(&self, j: usize) -> i32 {
        j as i32 - self.k_max() as i32
    }
}

pub const DEFAULT_GRID_START: f64 = 0.1;

/// Geometric endpoint grid: starts at `a1`, multiplies by `factor`, and tops
/// out at `2 sqrt(max_abs^2 - 1)` (included as the final endpoint). When the
/// data are too small for that cap to exceed `a1`, the grid degenerates to
/// the single endpoint `a1`.
pub fn build_grid(max_abs: f64, a1: f64, factor: f64) -> SupportGrid {
    assert!(a1 > 0.0 && factor > 1.0);
    let excess = max_abs * max_abs - 1.0;
    if excess <= (a1 / 2.0) * (a1 / 2.0) {
        return SupportGrid::new(vec![a1]).expect("singleton grid");
    }
    let top = 2.0 * excess.sqrt();
    let mut endpoints = vec![a1];
    loop {
        let next = endpoints.last().unwrap() * factor;
        if next >= top * (1.0 - 1e-12) {
            break;
        }
        endpoints.push(next);
    }
    if top > endpoints.last().unwrap() * (1.0 + 1e-12) {
        endpoints.push(top);
    }
    SupportGrid::new(endpoints).expect("geometric grid is increasing")
}

/// Dirichlet penalty exponents, one per component.
#[derive(Debug, Clone, PartialEq)]
pub struct PenaltyConfig {
    pub lambda: Vec<f64>,
}

impl PenaltyConfig {
    pub fn new(lambda: Vec<f64>) -> Result<Self> {
        if lambda.iter().any(|&l| !(l > 0.0)) {
            return Err(Error::input("penalty exponents must all be positive"));
        }
        Ok(PenaltyConfig { lambda })
    }

    /// The same exponent on every component.
    pub fn flat(value: f64, n_components: usize) -> Result<Self> {
        PenaltyConfig::new(vec![value; n_components])
    }

    /// Shrinkage default: weight 10 on the point mass, 1 elsewhere.
    pub fn null_favoring(n_components: usize) -> Result<Self> {
        assert!(n_components % 2 == 1, "component count must be odd");
        let mut lambda = vec![1.0; n_components];
        lambda[n_components / 2] = 10.0;
        PenaltyConfig::new(lambda)
    }
}

/// The fitted prior: grid plus mixing weights indexed `-K..=K` by column.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureModel {
    pub grid: SupportGrid,
    pub weights: Vec<f64>,
}

impl MixtureModel {
    pub fn new(grid: SupportGrid, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != grid.n_components() {
            return Err(Error::input(format!(
                "expected {} weights, got {}",
                grid.n_components(),
                weights.len()
            )));
        }
        if weights.iter().any(|&w| !(w >= 0.0)) {
            return Err(Error::input("weights must be nonnegative"));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-10 {
            return Err(Error::input(format!("weights must sum to one, got {total}")));
        }
        Ok(MixtureModel { grid, weights })
    }

    pub fn null_weight(&self) -> f64 {
        self.weights[self.grid.k_max()]
    }
}

fn cdf_diff(hi: f64, lo: f64) -> f64 {
    // Phi(hi) - Phi(lo) for hi >= lo, evaluated on the side away from one so
    // far-tail differences keep full relative precision
    if hi + lo > 0.0 {
        std_normal_cdf(-lo) - std_normal_cdf(-hi)
    } else {
        std_normal_cdf(hi) - std_normal_cdf(lo)
    }
}

fn normal_slab(z_std: f64, a_std: f64) -> f64 {
    // cdf mass of the standardized slab; callers divide by the raw length
    if a_std > 0.0 {
        cdf_diff(z_std, z_std - a_std)
    } else {
        cdf_diff(z_std - a_std, z_std)
    }
}

fn single_component(z: f64, k: i32, grid: &SupportGrid, family: &NullFamily) -> f64 {
    match *family {
        NullFamily::Normal { sigma } => {
            if k == 0 {
                std_normal_pdf(z / sigma) / sigma
            } else {
                // uniform slab on the effect scale: cdf difference over length
                let a = grid.endpoint(k);
                normal_slab(z / sigma, a / sigma) / a.abs()
            }
        }
        NullFamily::NoncentralT { .. } => {
            // everything happens on the normalized score scale
            let x = family.standardized(z);
            if k == 0 {
                std_normal_pdf(x)
            } else {
                let a = grid.endpoint(k);
                normal_slab(x, a) / a.abs()
            }
        }
    }
}

/// Likelihood of mixture component `k` for one coordinate. For a masked
/// coordinate the likelihood is the sum over the reflection pair
/// `{z, z_check}`, which is invariant to which member was observed.
pub fn component_likelihood(
    z: f64,
    z_check: f64,
    masked: bool,
    k: i32,
    grid: &SupportGrid,
    family: &NullFamily,
) -> Result<f64> {
    if k.unsigned_abs() as usize > grid.k_max() {
        return Err(Error::input(format!(
            "component {k} outside grid with K = {}",
            grid.k_max()
        )));
    }
    let mut value = single_component(z, k, grid, family);
    if masked {
        value += single_component(z_check, k, grid, family);
    }
    Ok(value)
}

/// All `2K+1` component likelihoods of one coordinate, in column order.
pub fn likelihood_row(
    z: f64,
    z_check: f64,
    masked: bool,
    grid: &SupportGrid,
    family: &NullFamily,
) -> Vec<f64> {
    let big_k = grid.k_max() as i32;
    (-big_k..=big_k)
        .map(|k| {
            let mut v = single_component(z, k, grid, family);
            if masked {
                v += single_component(z_check, k, grid, family);
            }
            v
        })
        .collect()
}

/// Dense row-major nonnegative likelihood matrix (coordinates x components).
#[derive(Debug, Clone)]
pub struct LikMatrix {
    data: Vec<f64>,
    n_rows: usize,
    n_cols: usize,
}

impl LikMatrix {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::input("likelihood matrix needs at least one row"));
        }
        let n_cols = rows[0].len();
        let mut data = Vec::with_capacity(rows.len() * n_cols);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n_cols {
                return Err(Error::input(format!("row {i} has ragged length")));
            }
            data.extend_from_slice(row);
        }
        Ok(LikMatrix { data, n_rows: rows.len(), n_cols })
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n_cols..(i + 1) * self.n_cols]
    }

    pub fn set_row(&mut self, i: usize, row: &[f64]) {
        assert_eq!(row.len(), self.n_cols);
        self.data[i * self.n_cols..(i + 1) * self.n_cols].copy_from_slice(row);
    }
}

const EM_TOL: f64 = 1e-8;
const EM_MAX_ITERS: usize = 500;
const WEIGHT_FLOOR: f64 = 1e-12;

struct ScaledLik {
    scaled: Vec<f64>,
    n_rows: usize,
    n_cols: usize,
    log_scale_sum: f64,
}

impl ScaledLik {
    fn build(lik: &LikMatrix) -> Result<Self> {
        let (n_rows, n_cols) = (lik.n_rows, lik.n_cols);
        let mut scaled = Vec::with_capacity(lik.data.len());
        let mut log_scale_sum = 0.0;
        for i in 0..n_rows {
            let row = lik.row(i);
            let mut max = 0.0f64;
            for &v in row {
                if !(v >= 0.0) || !v.is_finite() {
                    return Err(Error::input(format!(
                        "likelihood entries must be finite and nonnegative (row {i})"
                    )));
                }
                max = max.max(v);
            }
            if max <= 0.0 {
                return Err(Error::DegenerateLikelihood(format!(
                    "row {i} is identically zero"
                )));
            }
            log_scale_sum += max.ln();
            scaled.extend(row.iter().map(|&v| v / max));
        }
        Ok(ScaledLik { scaled, n_rows, n_cols, log_scale_sum })
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.scaled[i * self.n_cols..(i + 1) * self.n_cols]
    }

    fn objective(&self, weights: &[f64], penalty: &[f64]) -> f64 {
        let mut obj = self.log_scale_sum;
        for i in 0..self.n_rows {
            let row = self.row(i);
            let s: f64 = row.iter().zip(weights).map(|(&l, &w)| l * w).sum();
            obj += s.ln();
        }
        for (&w, &lam) in weights.iter().zip(penalty) {
            if lam != 1.0 {
                obj += (lam - 1.0) * w.max(1e-300).ln();
            }
        }
        obj
    }
}

/// Penalized log-likelihood `sum_i log(sum_k w_k L_ik) + sum_k (lambda_k - 1) log w_k`.
pub fn penalized_objective(lik: &LikMatrix, penalty: &PenaltyConfig, weights: &[f64]) -> Result<f64> {
    if penalty.lambda.len() != lik.n_cols || weights.len() != lik.n_cols {
        return Err(Error::input("penalty/weight length does not match matrix columns"));
    }
    Ok(ScaledLik::build(lik)?.objective(weights, &penalty.lambda))
}

fn em_maximize(scaled: &ScaledLik, penalty: &[f64], init: Vec<f64>) -> Vec<f64> {
    let (m, c) = (scaled.n_rows, scaled.n_cols);
    let mut weights = init;
    let mut best = weights.clone();
    let mut best_obj = f64::NEG_INFINITY;
    let mut prev_obj = f64::NEG_INFINITY;
    let mut acc = vec![0.0f64; c];
    for _ in 0..=EM_MAX_ITERS {
        // one pass yields both the responsibilities and the objective at the
        // current weights
        acc.iter_mut().for_each(|a| *a = 0.0);
        let mut obj = scaled.log_scale_sum;
        for i in 0..m {
            let row = scaled.row(i);
            let mut s = 0.0;
            for k in 0..c {
                s += weights[k] * row[k];
            }
            let inv = 1.0 / s;
            for k in 0..c {
                acc[k] += weights[k] * row[k] * inv;
            }
            obj += s.ln();
        }
        for k in 0..c {
            if penalty[k] != 1.0 {
                obj += (penalty[k] - 1.0) * weights[k].max(1e-300).ln();
            }
        }
        if obj > best_obj {
            best_obj = obj;
            best.copy_from_slice(&weights);
        }
        if obj - prev_obj < EM_TOL {
            break;
        }
        prev_obj = obj;

        let mut total = 0.0;
        for k in 0..c {
            let raw = acc[k] + (penalty[k] - 1.0);
            weights[k] = raw.max(WEIGHT_FLOOR);
            total += weights[k];
        }
        weights.iter_mut().for_each(|w| *w /= total);
    }
    let total: f64 = best.iter().sum();
    best.iter_mut().for_each(|w| *w /= total);
    best
}

/// Maximize the penalized log-likelihood over the weight simplex.
///
/// Multiplicative (EM-style) updates starting from the uniform vector:
/// `w_k <- (sum_i r_ik + lambda_k - 1) / normalizer`, with posterior
/// responsibilities `r_ik`. Penalty exponents below one can drive an update
/// negative; those entries are floored at 1e-12 before renormalizing, and
/// the best iterate seen is returned, so the result always dominates the
/// uniform starting point. Stops once an iteration improves the objective by
/// less than 1e-8, or after 500 iterations.
pub fn fit_weights(lik: &LikMatrix, penalty: &PenaltyConfig) -> Result<Vec<f64>> {
    if penalty.lambda.len() != lik.n_cols {
        return Err(Error::input(format!(
            "penalty has {} exponents for {} components",
            penalty.lambda.len(),
            lik.n_cols
        )));
    }
    let scaled = ScaledLik::build(lik)?;
    let uniform = vec![1.0 / lik.n_cols as f64; lik.n_cols];
    Ok(em_maximize(&scaled, &penalty.lambda, uniform))
}

/// [`fit_weights`] started from a caller-supplied weight vector. Used to
/// warm-start successive refits on slowly changing likelihood matrices.
pub fn fit_weights_from(
    lik: &LikMatrix,
    penalty: &PenaltyConfig,
    init: &[f64],
) -> Result<Vec<f64>> {
    if penalty.lambda.len() != lik.n_cols || init.len() != lik.n_cols {
        return Err(Error::input("penalty/init length does not match matrix columns"));
    }
    let total: f64 = init.iter().sum();
    if init.iter().any(|&w| !(w >= 0.0)) || !(total > 0.0) {
        return Err(Error::input("initial weights must be nonnegative with positive sum"));
    }
    let scaled = ScaledLik::build(lik)?;
    let start: Vec<f64> = init.iter().map(|&w| (w / total).max(WEIGHT_FLOOR)).collect();
    Ok(em_maximize(&scaled, &penalty.lambda, start))
}

/// Posterior mass summary of a model at one observed value: returns
/// `(negative, null, positive)` joint masses (weights times component
/// likelihoods), unnormalized.
fn posterior_masses(z: f64, family: &NullFamily, model: &MixtureModel) -> (f64, f64, f64) {
    let big_k = model.grid.k_max() as i32;
    let mut neg = 0.0;
    let mut pos = 0.0;
    let mut null = 0.0;
    for k in -big_k..=big_k {
        let lik = single_component(z, k, &model.grid, family);
        let w = model.weights[model.grid.column(k)];
        if k < 0 {
            neg += w * lik;
        } else if k > 0 {
            pos += w * lik;
        } else {
            null = w * lik;
        }
    }
    (neg, null, pos)
}

/// Local false sign rate at `z_eval` under the fitted prior: the smaller of
/// the posterior probabilities of a nonpositive and a nonnegative effect.
/// The point mass at zero belongs to both half-lines.
pub fn posterior_lfsr(z_eval: f64, family: &NullFamily, model: &MixtureModel) -> Result<f64> {
    let (neg, null, pos) = posterior_masses(z_eval, family, model);
    let total = neg + null + pos;
    if !(total > 0.0) {
        return Err(Error::DegenerateLikelihood(format!(
            "marginal likelihood vanished at z = {z_eval}"
        )));
    }
    Ok(((neg + null).min(pos + null) / total).min(1.0))
}

/// Strict-sign posterior probabilities `(P(effect < 0 | z), P(effect > 0 | z))`
/// under the fitted prior; the point mass is excluded from both.
pub fn posterior_sign_masses(
    z_eval: f64,
    family: &NullFamily,
    model: &MixtureModel,
) -> Result<(f64, f64)> {
    let (neg, null, pos) = posterior_masses(z_eval, family, model);
    let total = neg + null + pos;
    if !(total > 0.0) {
        return Err(Error::DegenerateLikelihood(format!(
            "marginal likelihood vanished at z = {z_eval}"
        )));
    }
    Ok((neg / total, pos / total))
}
