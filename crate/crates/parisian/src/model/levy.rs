//! Excursion Levy measures.
//!
//! For a diffusion started at a level a, the Ito measure of excursions
//! below (resp. above) a induces a measure nu on excursion lifetimes.
//! Each supported family admits a closed-form lifetime density on
//! (0, inf), plus possibly an atom at +inf carried by the final
//! excursion of a transient path. Tail masses and exponential moments
//! are obtained by adaptive quadrature of the density.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::model::{series_tol, spectral_sum, Family, Sign, SPECTRAL_SWITCH};
use crate::numerics::{bilateral_sum, integrate_to_infinity, ToleranceSpec};

const SQRT_2PI: f64 = 2.506_628_274_631_000_5;

/// Lifetime measure of excursions on one side of a level.
#[derive(Debug, Clone, Copy)]
pub struct LevyMeasure {
    family: Family,
    level: f64,
    sign: Sign,
    atom: f64,
}

impl LevyMeasure {
    pub(crate) fn new(family: Family, level: f64, sign: Sign) -> Self {
        let atom = match (family, sign) {
            (Family::Brownian { mu }, Sign::Plus) => (2.0 * mu * level).exp() * (mu.abs() + mu),
            (Family::Brownian { mu }, Sign::Minus) => (2.0 * mu * level).exp() * (mu.abs() - mu),
            (Family::Bessel3 { mu }, Sign::Plus) => {
                ((2.0 * mu * level).exp() - 1.0) / (2.0 * mu)
            }
            (Family::Bessel3 { .. }, Sign::Minus) => 0.0,
            (Family::Reflected, _) => 0.0,
        };
        LevyMeasure {
            family,
            level,
            sign,
            atom,
        }
    }

    pub fn level(&self) -> f64 {
        self.level
    }

    pub fn sign(&self) -> Sign {
        self.sign
    }

    /// Mass of the atom at +inf (zero for recurrent families).
    pub fn atom_at_infinity(&self) -> f64 {
        self.atom
    }

    /// Density of the absolutely continuous part at lifetime t > 0.
    pub fn density(&self, t: f64) -> f64 {
        assert!(t > 0.0, "Levy density needs t > 0, got {t}");
        let base = 1.0 / (SQRT_2PI * t.powf(1.5));
        match (self.family, self.sign) {
            (Family::Brownian { mu }, _) => {
                (2.0 * mu * self.level).exp() * base * (-0.5 * mu * mu * t).exp()
            }
            (Family::Bessel3 { mu }, Sign::Plus) => {
                let s = (mu * self.level).sinh();
                s * s / (mu * mu) * base * (-0.5 * mu * mu * t).exp()
            }
            (Family::Bessel3 { mu }, Sign::Minus) => {
                let a = self.level;
                let s = (mu * a).sinh();
                if t <= SPECTRAL_SWITCH * a * a {
                    let coth = (mu * a).cosh() / s;
                    let sum = bilateral_sum(
                        |n| {
                            let nf = n as f64;
                            (mu * coth * 2.0 * nf * a + 1.0 - 4.0 * nf * nf * a * a / t)
                                * (-2.0 * nf * nf * a * a / t).exp()
                        },
                        &series_tol(),
                    )
                    .expect("Levy density series did not converge");
                    s * s / (mu * mu) * base * (-0.5 * mu * mu * t).exp() * sum
                } else {
                    // Spectral form: the theta terms cancel at large t.
                    PI * PI * s * s / (mu * mu * a * a * a)
                        * spectral_sum(|k| {
                            let n = (k + 1) as f64;
                            n * n
                                * (-0.5 * (mu * mu + n * n * PI * PI / (a * a)) * t).exp()
                        })
                }
            }
            (Family::Reflected, Sign::Plus) => base,
            (Family::Reflected, Sign::Minus) => {
                let a = self.level;
                if t <= SPECTRAL_SWITCH * a * a {
                    let sum = bilateral_sum(
                        |n| {
                            let nf = n as f64;
                            let sign = if (n + 1).rem_euclid(2) == 0 { 1.0 } else { -1.0 };
                            sign * (4.0 * a * a * nf * nf / t - 1.0)
                                * (-2.0 * a * a * nf * nf / t).exp()
                        },
                        &series_tol(),
                    )
                    .expect("Levy density series did not converge");
                    base * sum
                } else {
                    spectral_sum(|k| {
                        let w = (k as f64 + 0.5) * PI / a;
                        w * w * (-0.5 * w * w * t).exp()
                    }) / a
                }
            }
        }
    }

    fn check_cutoff(r: f64, what: &str) -> Result<()> {
        if r > 0.0 && r.is_finite() {
            Ok(())
        } else {
            Err(Error::Domain(format!(
                "{what}: cutoff must be finite and > 0, got {r}"
            )))
        }
    }

    /// nu([r, inf)), the finite-lifetime tail mass; excludes the atom.
    pub fn tail_finite(&self, r: f64, tol: &ToleranceSpec) -> Result<f64> {
        Self::check_cutoff(r, "tail_finite")?;
        integrate_rel(|t| self.density(t), r, tol)
    }

    /// nu([r, inf]), including the atom at +inf.
    pub fn tail(&self, r: f64, tol: &ToleranceSpec) -> Result<f64> {
        Ok(self.tail_finite(r, tol)? + self.atom)
    }

    /// Exponential tail integral of the lifetime measure on [r, inf].
    ///
    /// For lambda > 0 the atom contributes e^{-lambda * inf} = 0 and is
    /// excluded; for lambda = 0 this is the full tail mass including the
    /// atom.
    pub fn exp_tail(&self, lambda: f64, r: f64, tol: &ToleranceSpec) -> Result<f64> {
        Self::check_cutoff(r, "exp_tail")?;
        if lambda < 0.0 {
            return Err(Error::Domain(format!(
                "exp_tail: lambda must be >= 0, got {lambda}"
            )));
        }
        if lambda == 0.0 {
            return self.tail(r, tol);
        }
        integrate_rel(|t| (-lambda * t).exp() * self.density(t), r, tol)
    }

    /// Integral of (1 - e^{-lambda t}) over (0, inf], atom included.
    ///
    /// This equals 1/G_lambda(level, level) by the excursion
    /// decomposition of the Green kernel, which the tests exploit.
    pub fn one_minus_exp_integral(&self, lambda: f64, tol: &ToleranceSpec) -> Result<f64> {
        if !(lambda > 0.0) {
            return Err(Error::Domain(format!(
                "one_minus_exp_integral: lambda must be > 0, got {lambda}"
            )));
        }
        // The integrand behaves like lambda * t^{-1/2} near zero, which
        // the adaptive rule absorbs since Gauss nodes avoid endpoints.
        let ac = integrate_to_infinity(
            |t| (-(-lambda * t).exp_m1()) * self.density(t),
            0.0,
            tol,
        )?;
        Ok(ac + self.atom)
    }
}

/// Semi-infinite integral with relative-accuracy semantics: deep-tail
/// masses can sit far below any fixed absolute tolerance, so a first
/// pass fixes the scale and a second pass (when needed) re-integrates
/// with the absolute floor mapped onto that scale.
fn integrate_rel<F: Fn(f64) -> f64>(f: F, lo: f64, tol: &ToleranceSpec) -> Result<f64> {
    let first = integrate_to_infinity(&f, lo, tol)?;
    let scaled = tol.rel_tol * first.abs();
    if first.abs() > 0.0 && tol.abs_tol > scaled {
        let tighter = ToleranceSpec {
            abs_tol: scaled.max(1e-300),
            ..*tol
        };
        return integrate_to_infinity(&f, lo, &tighter);
    }
    Ok(first)
}
