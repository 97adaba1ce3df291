//! Shared oracles for the acceptance suite. Everything here is independent
//! of the library's computation paths: quadrature instead of closed forms,
//! direct enumeration instead of threshold recursions.

use dirfdr::null::{reflect, NullFamily, ZSample};
use dirfdr::rng;
use rand_chacha::ChaCha8Rng;

/// Adaptive Simpson quadrature with Richardson acceptance.
pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson(a: f64, fa: f64, b: f64, fb: f64, fm: f64) -> f64 {
        (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        fa: f64,
        b: f64,
        fb: f64,
        fm: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = simpson(a, fa, m, fm, flm);
        let right = simpson(m, fm, b, fb, frm);
        if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
            left + right + (left + right - whole) / 15.0
        } else {
            recurse(f, a, fa, m, fm, flm, left, tol / 2.0, depth - 1)
                + recurse(f, m, fm, b, fb, frm, right, tol / 2.0, depth - 1)
        }
    }
    // pre-split so narrow features cannot hide between the initial probes
    let panels = 16;
    let mut total = 0.0;
    for p in 0..panels {
        let lo = a + (b - a) * p as f64 / panels as f64;
        let hi = a + (b - a) * (p + 1) as f64 / panels as f64;
        let flo = f(lo);
        let fhi = f(hi);
        let fm = f(0.5 * (lo + hi));
        let whole = simpson(lo, flo, hi, fhi, fm);
        total += recurse(f, lo, flo, hi, fhi, fm, whole, tol / panels as f64, 40);
    }
    total
}

/// Direct step-up enumeration: the largest rank k (checked from the top)
/// with `p_(k) <= level * k / m`; rejects everything at or below that
/// p-value.
pub fn step_up_oracle(pvalues: &[f64], level: f64) -> Vec<usize> {
    let m = pvalues.len();
    let mut sorted: Vec<f64> = pvalues.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    let mut cutoff = None;
    for k in (1..=m).rev() {
        if sorted[k - 1] <= level * k as f64 / m as f64 {
            cutoff = Some(sorted[k - 1]);
            break;
        }
    }
    match cutoff {
        None => Vec::new(),
        Some(c) => (0..m).filter(|&i| pvalues[i] <= c).collect(),
    }
}

/// Uniform random point on the probability simplex (exponential spacings).
pub fn random_simplex_point(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let mut gaps: Vec<f64> = (0..n).map(|_| -rng::open_unit(rng).ln()).collect();
    let total: f64 = gaps.iter().sum();
    gaps.iter_mut().for_each(|g| *g /= total);
    gaps
}

/// A sample whose two-sided p-values are (up to roundoff) the given vector;
/// all z-values negative standard normal scores.
pub fn sample_with_pvalues(ps: &[f64]) -> ZSample {
    let std = NullFamily::standard_normal();
    let z: Vec<f64> = ps
        .iter()
        .map(|&p| std.quantile((p / 2.0).clamp(1e-300, 0.5 - 1e-12)))
        .collect();
    ZSample::with_standard_normal(z).unwrap()
}

/// A z-value whose probability transform is bitwise the reflection of that
/// of `z`, searched among the neighbors of the quantile; `None` when no
/// double realizes the reflection exactly.
pub fn exact_flip(z: f64, fam: &NullFamily) -> Option<f64> {
    let u = fam.cdf(z);
    let r = reflect(u).ok()?;
    if r <= 0.0 || r >= 1.0 || reflect(r).ok()? != u {
        return None;
    }
    let base = fam.quantile(r);
    let bits = base.to_bits();
    [base, f64::from_bits(bits + 1), f64::from_bits(bits.wrapping_sub(1))]
        .into_iter()
        .find(|&cand| cand.is_finite() && cand != 0.0 && fam.cdf(cand) == r)
}

/// Mean and standard error of a slice.
pub fn mean_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|&x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}
