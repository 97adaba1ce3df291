//! Known symmetric null distributions and the probability transforms shared
//! by every procedure in the crate: two-sided p-values, the probability
//! integral transform `u`, its reflection, and the masking transform that
//! hides which of the two reflected values was observed.

use crate::error::{Error, Result};
use crate::normal::{std_normal_cdf, std_normal_quantile};

/// Largest double strictly below one; cdf outputs are clamped into
/// `[MIN_POSITIVE, U_MAX]` so `u` stays inside the open unit interval.
const U_MAX: f64 = 1.0 - f64::EPSILON / 2.0;

/// A known, symmetric-around-zero null distribution for one z-value.
///
/// Two families are supported: a centered normal with known scale, and a
/// noncentral-t score handled through its normalizing transform
/// `alpha * asinh(beta * z)`, which is treated as a unit-variance normal.
#[derive(Debug, Clone, PartialEq)]
pub enum NullFamily {
    Normal { sigma: f64 },
    NoncentralT { nu: f64, alpha: f64, beta: f64 },
}

impl NullFamily {
    pub fn normal(sigma: f64) -> Result<Self> {
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(Error::input(format!("sigma must be a positive real, got {sigma}")));
        }
        Ok(NullFamily::Normal { sigma })
    }

    pub fn standard_normal() -> Self {
        NullFamily::Normal { sigma: 1.0 }
    }

    /// Noncentral-t family with the normalizing coefficients derived from the
    /// degrees of freedom; see [`laubscher_coefficients`].
    pub fn noncentral_t(nu: f64) -> Result<Self> {
        let (alpha, beta) = laubscher_coefficients(nu)?;
        Ok(NullFamily::NoncentralT { nu, alpha, beta })
    }

    /// Noncentral-t family with caller-supplied transform coefficients.
    pub fn noncentral_t_with(nu: f64, alpha: f64, beta: f64) -> Result<Self> {
        if !(nu >= 4.0) {
            return Err(Error::UnsupportedFamily(format!(
                "noncentral-t requires nu >= 4, got {nu}"
            )));
        }
        if !(alpha > 0.0 && beta > 0.0) {
            return Err(Error::input(format!(
                "transform coefficients must be positive, got alpha={alpha}, beta={beta}"
            )));
        }
        Ok(NullFamily::NoncentralT { nu, alpha, beta })
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            NullFamily::Normal { sigma } => {
                if !(sigma > 0.0) || !sigma.is_finite() {
                    return Err(Error::input(format!("sigma must be positive, got {sigma}")));
                }
            }
            NullFamily::NoncentralT { nu, alpha, beta } => {
                if !(nu >= 4.0) {
                    return Err(Error::UnsupportedFamily(format!(
                        "noncentral-t requires nu >= 4, got {nu}"
                    )));
                }
                if !(alpha > 0.0 && beta > 0.0) {
                    return Err(Error::input("noncentral-t transform coefficients must be positive"));
                }
            }
        }
        Ok(())
    }

    /// Map `z` onto the standard-normal scale of this family.
    pub fn standardized(&self, z: f64) -> f64 {
        match *self {
            NullFamily::Normal { sigma } => z / sigma,
            NullFamily::NoncentralT { alpha, beta, .. } => alpha * (beta * z).asinh(),
        }
    }

    /// Null distribution function, clamped into the open unit interval.
    pub fn cdf(&self, z: f64) -> f64 {
        std_normal_cdf(self.standardized(z)).clamp(f64::MIN_POSITIVE, U_MAX)
    }

    /// Inverse of [`NullFamily::cdf`] for `u` in `(0, 1)`.
    pub fn quantile(&self, u: f64) -> f64 {
        debug_assert!(u > 0.0 && u < 1.0);
        let x = std_normal_quantile(u);
        match *self {
            NullFamily::Normal { sigma } => sigma * x,
            NullFamily::NoncentralT { alpha, beta, .. } => (x / alpha).sinh() / beta,
        }
    }

    /// The value `z` carries on the scale the mixture prior lives on: raw for
    /// the normal family, the normalized score for noncentral-t.
    pub fn prior_scale(&self, z: f64) -> f64 {
        match *self {
            NullFamily::Normal { .. } => z,
            NullFamily::NoncentralT { .. } => self.standardized(z),
        }
    }
}

/// Coefficients `(alpha, beta)` of the variance-stabilizing transform
/// `alpha * asinh(beta * z)` for a noncentral-t score with `nu >= 4` degrees
/// of freedom.
///
/// With `c = sqrt(nu/2) * Gamma((nu-1)/2) / Gamma(nu/2)` (the scale of the
/// score's mean in the noncentrality) and `a = nu/(nu-2)`, the variance of
/// the score is `a + (a - c^2) * delta^2`, so stabilizing to unit variance
/// gives `alpha = c / sqrt(a - c^2)` and `beta = sqrt((a - c^2)/a) / c`. The
/// transform is odd, so the mapped null stays symmetric around zero.
pub fn laubscher_coefficients(nu: f64) -> Result<(f64, f64)> {
    if !(nu >= 4.0) || !nu.is_finite() {
        return Err(Error::UnsupportedFamily(format!(
            "noncentral-t requires nu >= 4, got {nu}"
        )));
    }
    let c = (nu / 2.0).sqrt() * (libm::lgamma((nu - 1.0) / 2.0) - libm::lgamma(nu / 2.0)).exp();
    let a = nu / (nu - 2.0);
    let b = a - c * c;
    debug_assert!(b > 0.0, "variance slope must be positive (nu={nu})");
    Ok((c / b.sqrt(), (b / a).sqrt() / c))
}

/// The normalizing transform itself; errors unless `family` is noncentral-t.
pub fn laubscher_transform(z: f64, family: &NullFamily) -> Result<f64> {
    match *family {
        NullFamily::NoncentralT { alpha, beta, .. } => Ok(alpha * (beta * z).asinh()),
        NullFamily::Normal { .. } => Err(Error::UnsupportedFamily(
            "the normalizing transform applies to the noncentral-t family only".into(),
        )),
    }
}

/// Observed z-values with the null distribution of each coordinate.
#[derive(Debug, Clone)]
pub struct ZSample {
    pub z: Vec<f64>,
    pub families: Vec<NullFamily>,
}

impl ZSample {
    /// Validates lengths, family parameters, finiteness, and rejects exact
    /// zeros: a zero z-value has no sign, so it cannot enter any procedure
    /// that declares the sign of a rejected effect.
    pub fn new(z: Vec<f64>, families: Vec<NullFamily>) -> Result<Self> {
        if z.is_empty() {
            return Err(Error::input("sample must contain at least one z-value"));
        }
        if z.len() != families.len() {
            return Err(Error::input(format!(
                "z and families differ in length: {} vs {}",
                z.len(),
                families.len()
            )));
        }
        for (i, &zi) in z.iter().enumerate() {
            if !zi.is_finite() {
                return Err(Error::input(format!("z[{i}] is not finite: {zi}")));
            }
            if zi == 0.0 {
                return Err(Error::input(format!(
                    "z[{i}] is exactly zero; its sign is undefined"
                )));
            }
        }
        for f in &families {
            f.validate()?;
        }
        Ok(ZSample { z, families })
    }

    /// Convenience constructor for unit-variance normal nulls throughout.
    pub fn with_standard_normal(z: Vec<f64>) -> Result<Self> {
        let families = vec![NullFamily::standard_normal(); z.len()];
        ZSample::new(z, families)
    }

    pub fn len(&self) -> usize {
        self.z.len()
    }

    pub fn is_empty(&self) -> bool {
        self.z.is_empty()
    }

    /// Two-sided p-values of every coordinate.
    pub fn pvalues(&self) -> Vec<f64> {
        self.z
            .iter()
            .zip(&self.families)
            .map(|(&z, f)| 2.0 * f.cdf(-z.abs()))
            .collect()
    }
}

/// Two-sided p-value `2 F0(-|z|)` under the coordinate's null.
pub fn two_sided_pvalue(z: f64, family: &NullFamily) -> Result<f64> {
    if !z.is_finite() {
        return Err(Error::input(format!("z must be finite, got {z}")));
    }
    Ok((2.0 * family.cdf(-z.abs())).min(1.0))
}

/// Probability integral transform `u = F0(z)`, strictly increasing in `z`.
pub fn u_transform(z: f64, family: &NullFamily) -> Result<f64> {
    if !z.is_finite() {
        return Err(Error::input(format!("z must be finite, got {z}")));
    }
    Ok(family.cdf(z))
}

/// Inverse of [`u_transform`].
pub fn inverse_u(u: f64, family: &NullFamily) -> Result<f64> {
    if !(u > 0.0 && u < 1.0) {
        return Err(Error::input(format!("u must lie in (0,1), got {u}")));
    }
    Ok(family.quantile(u))
}

/// Reflection of `u` about the midpoint of its half of the unit interval:
/// `0.5 - u` on `(0, 0.5]` and `1.5 - u` on `(0.5, 1)`. The pair
/// `{u, reflect(u)}` always lives in one half-interval, and applying the
/// reflection twice recovers `u`.
pub fn reflect(u: f64) -> Result<f64> {
    if !(u > 0.0 && u < 1.0) {
        return Err(Error::input(format!("u must lie in (0,1), got {u}")));
    }
    Ok(if u <= 0.5 { 0.5 - u } else { 1.5 - u })
}

/// The masked view of `u`: whichever of `u` and its reflection sits closer
/// to the endpoints of the unit interval. Both members of a reflection pair
/// map to the same masked value, which is what hides the observed one.
pub fn masked_value(u: f64) -> Result<f64> {
    let r = reflect(u)?;
    Ok(if u <= 0.5 { u.min(r) } else { u.max(r) })
}

/// Per-coordinate masking transforms of a sample, computed once up front.
///
/// `u` is the probability integral transform of `z`, `u_check` its
/// reflection, `u_prime` the masked view, and `z_prime`/`z_check` convert
/// `u_prime`/`u_check` back to the z-value scale.
#[derive(Debug, Clone)]
pub struct MaskedValues {
    pub u: Vec<f64>,
    pub u_check: Vec<f64>,
    pub u_prime: Vec<f64>,
    pub z_prime: Vec<f64>,
    pub z_check: Vec<f64>,
}

impl MaskedValues {
    pub fn from_sample(sample: &ZSample) -> Result<Self> {
        let m = sample.len();
        let mut u = Vec::with_capacity(m);
        let mut u_check = Vec::with_capacity(m);
        let mut u_prime = Vec::with_capacity(m);
        let mut z_prime = Vec::with_capacity(m);
        let mut z_check = Vec::with_capacity(m);
        for i in 0..m {
            let fam = &sample.families[i];
            let ui = fam.cdf(sample.z[i]);
            if ui == 0.5 {
                // would reflect onto the boundary of the unit interval
                return Err(Error::input(format!(
                    "z[{i}] is too close to zero to mask"
                )));
            }
            let ci = reflect(ui)?;
            let pi = masked_value(ui)?;
            u.push(ui);
            u_check.push(ci);
            u_prime.push(pi);
            z_prime.push(fam.quantile(pi));
            z_check.push(fam.quantile(ci));
        }
        Ok(MaskedValues { u, u_check, u_prime, z_prime, z_check })
    }
}
