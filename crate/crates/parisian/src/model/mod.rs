//! Diffusion models: scale and speed data, eigenfunctions of the
//! generator, transition densities with respect to the speed measure,
//! hitting densities and excursion Levy measures.
//!
//! Three families are implemented in closed form:
//!   * Brownian motion with drift mu on the whole line,
//!   * the three-dimensional Bessel process with drift mu > 0 (Brownian
//!     motion with drift conditioned to stay positive) on (0, inf),
//!   * reflected Brownian motion |B| on [0, inf).
//!
//! All evaluations are pure; models are immutable after construction.

mod levy;

pub use levy::LevyMeasure;

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{bilateral_sum, ToleranceSpec};

const SQRT_2PI: f64 = 2.506_628_274_631_000_5;

/// Series truncation used for the image/theta series of the Bessel and
/// reflected families.
pub(crate) fn series_tol() -> ToleranceSpec {
    ToleranceSpec {
        rel_tol: 1e-12,
        abs_tol: 1e-300,
        max_evals: 100_000,
    }
}

/// Sum of f(0) + f(1) + ... for terms that eventually decay
/// monotonically (the spectral series below all decay like
/// e^{-c n^2 t}); stops once three consecutive terms are negligible
/// against the running total.
pub(crate) fn spectral_sum<F: Fn(u64) -> f64>(f: F) -> f64 {
    let mut total = 0.0;
    let mut quiet = 0u32;
    for n in 0..10_000u64 {
        let term = f(n);
        total += term;
        if term.abs() <= f64::EPSILON * total.abs() {
            quiet += 1;
            if quiet >= 3 {
                break;
            }
        } else {
            quiet = 0;
        }
    }
    total
}

/// Theta-series crossover: below this time scale (in units of the
/// domain width squared) the Gaussian image series converges fastest;
/// above it the terms cancel and the spectral series takes over.
pub(crate) const SPECTRAL_SWITCH: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyKind {
    BrownianDrift,
    Bessel3Drift,
    ReflectedBm,
}

/// Construction parameters for the supported families.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ModelParams {
    pub family: FamilyKind,
    /// Drift parameter; ignored by `reflected_bm`, must be > 0 for
    /// `bessel3_drift`.
    #[serde(default)]
    pub mu: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Recurrence {
    Recurrent,
    TransientToSup,
    TransientToInf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Boundary {
    Natural,
    Entrance,
    Reflecting,
}

/// Excursion side relative to a level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sign {
    Plus,
    Minus,
}

#[derive(Debug, Clone, Copy)]
pub(crate) enum Family {
    Brownian { mu: f64 },
    Bessel3 { mu: f64 },
    Reflected,
}

/// Eigenfunction values Phi_{lambda,+/-} and their x-derivatives.
#[derive(Debug, Clone, Copy)]
pub struct Eigen {
    pub phi_plus: f64,
    pub phi_minus: f64,
    pub dphi_plus: f64,
    pub dphi_minus: f64,
}

/// Complex-rate counterpart of [`Eigen`], used by transform inversion.
#[derive(Debug, Clone, Copy)]
pub struct EigenC {
    pub phi_plus: Complex64,
    pub phi_minus: Complex64,
    pub dphi_plus: Complex64,
    pub dphi_minus: Complex64,
}

#[derive(Debug, Clone, Copy)]
pub struct DiffusionModel {
    pub(crate) family: Family,
}

/// Builds the closed-form model for the given family.
pub fn build_model(params: ModelParams) -> Result<DiffusionModel> {
    let family = match params.family {
        FamilyKind::BrownianDrift => {
            if !params.mu.is_finite() {
                return Err(Error::Domain("brownian_drift: mu must be finite".into()));
            }
            Family::Brownian { mu: params.mu }
        }
        FamilyKind::Bessel3Drift => {
            if !(params.mu > 0.0) {
                return Err(Error::Domain(format!(
                    "bessel3_drift requires mu > 0, got {}",
                    params.mu
                )));
            }
            Family::Bessel3 { mu: params.mu }
        }
        FamilyKind::ReflectedBm => Family::Reflected,
    };
    Ok(DiffusionModel { family })
}

impl DiffusionModel {
    pub fn family_kind(&self) -> FamilyKind {
        match self.family {
            Family::Brownian { .. } => FamilyKind::BrownianDrift,
            Family::Bessel3 { .. } => FamilyKind::Bessel3Drift,
            Family::Reflected => FamilyKind::ReflectedBm,
        }
    }

    /// Open interval on which the diffusion lives.
    pub fn interval(&self) -> (f64, f64) {
        match self.family {
            Family::Brownian { .. } => (f64::NEG_INFINITY, f64::INFINITY),
            Family::Bessel3 { .. } | Family::Reflected => (0.0, f64::INFINITY),
        }
    }

    pub fn boundaries(&self) -> (Boundary, Boundary) {
        match self.family {
            Family::Brownian { .. } => (Boundary::Natural, Boundary::Natural),
            Family::Bessel3 { .. } => (Boundary::Entrance, Boundary::Natural),
            Family::Reflected => (Boundary::Reflecting, Boundary::Natural),
        }
    }

    pub fn recurrence(&self) -> Recurrence {
        match self.family {
            Family::Brownian { mu } => {
                if mu == 0.0 {
                    Recurrence::Recurrent
                } else if mu > 0.0 {
                    Recurrence::TransientToSup
                } else {
                    Recurrence::TransientToInf
                }
            }
            Family::Bessel3 { .. } => Recurrence::TransientToSup,
            Family::Reflected => Recurrence::Recurrent,
        }
    }

    pub(crate) fn check_interior(&self, x: f64, what: &str) -> Result<()> {
        let (lo, hi) = self.interval();
        if x > lo && x < hi && x.is_finite() {
            Ok(())
        } else {
            Err(Error::Domain(format!(
                "{what} = {x} outside the interior ({lo}, {hi})"
            )))
        }
    }

    /// Drift coefficient of the generator.
    pub fn drift(&self, x: f64) -> f64 {
        match self.family {
            Family::Brownian { mu } => mu,
            Family::Bessel3 { mu } => mu * (mu * x).cosh() / (mu * x).sinh(),
            Family::Reflected => 0.0,
        }
    }

    /// Diffusion coefficient; sigma = 1 for all supported families.
    pub fn sigma(&self, _x: f64) -> f64 {
        1.0
    }

    /// Scale function, with the normalization fixed per family.
    pub fn scale(&self, x: f64) -> f64 {
        match self.family {
            Family::Brownian { mu } => {
                if mu == 0.0 {
                    x
                } else {
                    (1.0 - (-2.0 * mu * x).exp()) / (2.0 * mu)
                }
            }
            Family::Bessel3 { mu } => mu * (1.0 - 1.0 / (mu * x).tanh()),
            Family::Reflected => x,
        }
    }

    pub fn scale_prime(&self, x: f64) -> f64 {
        match self.family {
            Family::Brownian { mu } => (-2.0 * mu * x).exp(),
            Family::Bessel3 { mu } => {
                let s = (mu * x).sinh();
                mu * mu / (s * s)
            }
            Family::Reflected => 1.0,
        }
    }

    /// Scale function value at sup(I); `None` when it is +infinity.
    pub fn scale_at_sup(&self) -> Option<f64> {
        match self.family {
            Family::Brownian { mu } => {
                if mu > 0.0 {
                    Some(1.0 / (2.0 * mu))
                } else {
                    None
                }
            }
            Family::Bessel3 { .. } => Some(0.0),
            Family::Reflected => None,
        }
    }

    /// Scale function value at inf(I); `None` when it is -infinity.
    pub fn scale_at_inf(&self) -> Option<f64> {
        match self.family {
            Family::Brownian { mu } => {
                if mu < 0.0 {
                    Some(1.0 / (2.0 * mu))
                } else {
                    None
                }
            }
            Family::Bessel3 { .. } => None,
            Family::Reflected => Some(0.0),
        }
    }

    /// Density of the speed measure m(dx) = 2 / (s'(x) sigma^2(x)) dx.
    pub fn speed_density(&self, x: f64) -> f64 {
        2.0 / self.scale_prime(x)
    }

    /// Eigenfunction values and x-derivatives, analytic per family.
    pub fn eigen(&self, lambda: f64, x: f64) -> Result<Eigen> {
        if !(lambda > 0.0) {
            return Err(Error::Domain(format!("eigen: lambda must be > 0, got {lambda}")));
        }
        self.check_interior(x, "x")?;
        Ok(match self.family {
            Family::Brownian { mu } => {
                let th = (2.0 * lambda + mu * mu).sqrt();
                let phi_plus = (-x * (th + mu)).exp();
                let phi_minus = (x * (th - mu)).exp();
                Eigen {
                    phi_plus,
                    phi_minus,
                    dphi_plus: -(th + mu) * phi_plus,
                    dphi_minus: (th - mu) * phi_minus,
                }
            }
            Family::Bessel3 { mu } => {
                let th = (2.0 * lambda + mu * mu).sqrt();
                let s = (mu * x).sinh();
                let c = (mu * x).cosh();
                let e = (-x * th).exp();
                let phi_plus = mu * e / s;
                let phi_minus = mu * (x * th).sinh() / s;
                Eigen {
                    phi_plus,
                    phi_minus,
                    dphi_plus: -mu * e * (th * s + mu * c) / (s * s),
                    dphi_minus: mu * (th * (x * th).cosh() * s - mu * (x * th).sinh() * c)
                        / (s * s),
                }
            }
            Family::Reflected => {
                let th = (2.0 * lambda).sqrt();
                let phi_plus = (-x * th).exp();
                Eigen {
                    phi_plus,
                    phi_minus: (x * th).cosh(),
                    dphi_plus: -th * phi_plus,
                    dphi_minus: th * (x * th).sinh(),
                }
            }
        })
    }

    /// Complex-rate eigenfunctions; the principal square root keeps the
    /// formulas analytic off the negative real axis of 2 lambda + mu^2.
    pub fn eigen_c(&self, lambda: Complex64, x: f64) -> Result<EigenC> {
        self.check_interior(x, "x")?;
        Ok(match self.family {
            Family::Brownian { mu } => {
                let th = (2.0 * lambda + mu * mu).sqrt();
                let phi_plus = (-(th + mu) * x).exp();
                let phi_minus = ((th - mu) * x).exp();
                EigenC {
                    phi_plus,
                    phi_minus,
                    dphi_plus: -(th + mu) * phi_plus,
                    dphi_minus: (th - mu) * phi_minus,
                }
            }
            Family::Bessel3 { mu } => {
                let th = (2.0 * lambda + mu * mu).sqrt();
                let s = (mu * x).sinh();
                let c = (mu * x).cosh();
                let e = (-th * x).exp();
                let xth = th * x;
                EigenC {
                    phi_plus: e * (mu / s),
                    phi_minus: xth.sinh() * (mu / s),
                    dphi_plus: -e * mu * (th * s + mu * c) / (s * s),
                    dphi_minus: mu * (th * xth.cosh() * s - xth.sinh() * (mu * c)) / (s * s),
                }
            }
            Family::Reflected => {
                let th = (2.0 * lambda).sqrt();
                let phi_plus = (-th * x).exp();
                EigenC {
                    phi_plus,
                    phi_minus: (th * x).cosh(),
                    dphi_plus: -th * phi_plus,
                    dphi_minus: th * (th * x).sinh(),
                }
            }
        })
    }

    /// Wronskian (Phi_-' Phi_+ - Phi_- Phi_+') / s', independent of x.
    pub fn wronskian(&self, lambda: f64) -> Result<f64> {
        if !(lambda > 0.0) {
            return Err(Error::Domain("wronskian: lambda must be > 0".into()));
        }
        Ok(match self.family {
            Family::Brownian { mu } => 2.0 * (2.0 * lambda + mu * mu).sqrt(),
            Family::Bessel3 { mu } => (2.0 * lambda + mu * mu).sqrt(),
            Family::Reflected => (2.0 * lambda).sqrt(),
        })
    }

    pub fn wronskian_c(&self, lambda: Complex64) -> Complex64 {
        match self.family {
            Family::Brownian { mu } => (2.0 * lambda + mu * mu).sqrt() * 2.0,
            Family::Bessel3 { mu } => (2.0 * lambda + mu * mu).sqrt(),
            Family::Reflected => (2.0 * lambda).sqrt(),
        }
    }

    /// Transition density p(t; x, z) with respect to the speed measure.
    pub fn transition_density(&self, t: f64, x: f64, z: f64) -> Result<f64> {
        if !(t > 0.0) {
            return Err(Error::Domain(format!("transition_density: t must be > 0, got {t}")));
        }
        self.check_interior(x, "x")?;
        self.check_interior(z, "z")?;
        Ok(match self.family {
            Family::Brownian { mu } => {
                let d = z - x;
                0.5 / (SQRT_2PI * t.sqrt())
                    * (-d * d / (2.0 * t) - mu * (x + z) - 0.5 * mu * mu * t).exp()
            }
            Family::Bessel3 { mu } => {
                0.5 * mu * mu * (-0.5 * mu * mu * t).exp() * (gauss(t, z - x) - gauss(t, z + x))
                    / ((mu * x).sinh() * (mu * z).sinh())
            }
            Family::Reflected => 0.5 * (gauss(t, z - x) + gauss(t, z + x)),
        })
    }

    /// Analytic spatial derivative of the transition density in its first
    /// space argument.
    pub fn transition_density_dx(&self, t: f64, x: f64, z: f64) -> Result<f64> {
        if !(t > 0.0) {
            return Err(Error::Domain(format!("transition_density_dx: t must be > 0, got {t}")));
        }
        self.check_interior(x, "x")?;
        self.check_interior(z, "z")?;
        Ok(match self.family {
            Family::Brownian { mu } => {
                let p = self.transition_density(t, x, z)?;
                p * ((z - x) / t - mu)
            }
            Family::Bessel3 { mu } => {
                let sx = (mu * x).sinh();
                let cx = (mu * x).cosh();
                let sz = (mu * z).sinh();
                let pref = 0.5 * mu * mu * (-0.5 * mu * mu * t).exp() / sz;
                let gm = gauss(t, z - x);
                let gp = gauss(t, z + x);
                pref * ((gm * (z - x) / t + gp * (z + x) / t) / sx
                    - (gm - gp) * mu * cx / (sx * sx))
            }
            Family::Reflected => {
                0.5 * (gauss(t, z - x) * (z - x) / t - gauss(t, z + x) * (z + x) / t)
            }
        })
    }

    /// Density of the first hitting time T_a at time t, started from x != a.
    pub fn hitting_density(&self, x: f64, a: f64, t: f64) -> Result<f64> {
        if !(t > 0.0) {
            return Err(Error::Domain(format!("hitting_density: t must be > 0, got {t}")));
        }
        self.check_interior(x, "x")?;
        self.check_interior(a, "a")?;
        if x == a {
            return Err(Error::Domain("hitting_density: x = a is degenerate".into()));
        }
        let base = 1.0 / (SQRT_2PI * t.powf(1.5));
        Ok(match self.family {
            Family::Brownian { mu } => {
                let d = a - x;
                (a - x).abs() * base * (-(d - mu * t) * (d - mu * t) / (2.0 * t)).exp()
            }
            Family::Bessel3 { mu } => {
                let pref = (mu * a).sinh() / (mu * x).sinh() * (-0.5 * mu * mu * t).exp();
                if x > a {
                    pref * (x - a) * base * (-(x - a) * (x - a) / (2.0 * t)).exp()
                } else {
                    let sum = bilateral_sum(
                        |n| {
                            let y = (2.0 * n as f64 + 1.0) * a - x;
                            y * (-y * y / (2.0 * t)).exp()
                        },
                        &series_tol(),
                    )?;
                    pref * base * sum
                }
            }
            Family::Reflected => {
                if x > a {
                    (x - a) * base * (-(x - a) * (x - a) / (2.0 * t)).exp()
                } else {
                    let sum = bilateral_sum(
                        |n| {
                            let sign = if n.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
                            let y = (2.0 * n as f64 + 1.0) * a + x;
                            sign * y * (-y * y / (2.0 * t)).exp()
                        },
                        &series_tol(),
                    )?;
                    base * sum
                }
            }
        })
    }

    /// Entrance law n_t(z) of the excursion measure at `level`, with
    /// respect to the speed measure: the boundary derivative
    /// -(1/s'(a)) d/dx q_t(x, z) at x = a of the transition density
    /// killed at the level. By the first-passage decomposition this
    /// equals the combination
    /// -(1/s'(a)) d/dx p_t(x, z) + int_0^t (p_t - p_{t-s}) nu(ds)
    ///   + p_t nu[t, inf)
    /// but unlike that form it involves no cancellation between large
    /// terms, so it stays accurate when the excursion tail is tiny. The
    /// killed densities are image series over reflections at the level
    /// (and at the lower boundary where there is one).
    pub fn entrance_density(&self, t: f64, level: f64, sign: Sign, z: f64) -> Result<f64> {
        if !(t > 0.0) {
            return Err(Error::Domain(format!("entrance_density: t must be > 0, got {t}")));
        }
        self.check_interior(level, "level")?;
        self.check_interior(z, "z")?;
        let a = level;
        match sign {
            Sign::Minus if z >= a => {
                return Err(Error::Domain(format!(
                    "entrance_density: z = {z} must lie below the level {a}"
                )))
            }
            Sign::Plus if z <= a => {
                return Err(Error::Domain(format!(
                    "entrance_density: z = {z} must lie above the level {a}"
                )))
            }
            _ => {}
        }
        Ok(match self.family {
            Family::Brownian { mu } => {
                // One image across the level; the drift enters through the
                // Girsanov factor and the scale derivative only.
                (z - a).abs() / t * gauss(t, z - a) * (mu * (a - z) - 0.5 * mu * mu * t).exp()
            }
            Family::Bessel3 { mu } => {
                match sign {
                    Sign::Plus => {
                        (mu * a).sinh() * (-0.5 * mu * mu * t).exp() / ((mu * z).sinh() * t)
                            * (z - a)
                            * gauss(t, z - a)
                    }
                    Sign::Minus if t <= SPECTRAL_SWITCH * a * a => {
                        // Brownian motion killed at 0 and at the level:
                        // images at z - a + 2ak.
                        let pref =
                            (mu * a).sinh() * (-0.5 * mu * mu * t).exp() / ((mu * z).sinh() * t);
                        let sum = bilateral_sum(
                            |n| {
                                let y = z - a + 2.0 * a * n as f64;
                                y * gauss(t, y)
                            },
                            &series_tol(),
                        )?;
                        -pref * sum
                    }
                    Sign::Minus => {
                        // Dirichlet sine series of the same killed kernel.
                        let pref = PI / (a * a) * (mu * a).sinh() * (-0.5 * mu * mu * t).exp()
                            / (mu * z).sinh();
                        pref * spectral_sum(|k| {
                            let n = (k + 1) as f64;
                            let sg = if k % 2 == 0 { 1.0 } else { -1.0 };
                            sg * n
                                * (-0.5 * n * n * PI * PI * t / (a * a)).exp()
                                * (n * PI * z / a).sin()
                        })
                    }
                }
            }
            Family::Reflected => match sign {
                Sign::Plus => (z - a) / t * gauss(t, z - a),
                Sign::Minus if t <= SPECTRAL_SWITCH * a * a => {
                    // Neumann image at 0, Dirichlet image at the level:
                    // period 4a with signed pairs.
                    let sum = bilateral_sum(
                        |n| {
                            let c = 4.0 * a * n as f64;
                            (z - a + c) * gauss(t, z - a + c) - (z + a + c) * gauss(t, z + a + c)
                        },
                        &series_tol(),
                    )?;
                    -sum / t
                }
                Sign::Minus => {
                    // Mixed Neumann/Dirichlet cosine series of the kernel.
                    spectral_sum(|k| {
                        let w = (k as f64 + 0.5) * PI / a;
                        let sg = if k % 2 == 0 { 1.0 } else { -1.0 };
                        sg * w * (-0.5 * w * w * t).exp() * (w * z).cos()
                    }) / a
                }
            },
        })
    }

    /// Excursion Levy measure at `level` for the given side.
    pub fn levy(&self, level: f64, sign: Sign) -> Result<LevyMeasure> {
        self.check_interior(level, "level")?;
        Ok(LevyMeasure::new(self.family, level, sign))
    }

    /// P_x(T_target < infinity), from the scale function.
    pub fn hit_prob(&self, x: f64, target: f64) -> Result<f64> {
        self.check_interior(x, "x")?;
        self.check_interior(target, "target")?;
        Ok(match self.recurrence() {
            Recurrence::Recurrent => 1.0,
            Recurrence::TransientToSup => {
                if x <= target {
                    1.0
                } else {
                    let s_sup = self.scale_at_sup().expect("finite scale at sup");
                    (s_sup - self.scale(x)) / (s_sup - self.scale(target))
                }
            }
            Recurrence::TransientToInf => {
                if x >= target {
                    1.0
                } else {
                    let s_inf = self.scale_at_inf().expect("finite scale at inf");
                    (self.scale(x) - s_inf) / (self.scale(target) - s_inf)
                }
            }
        })
    }

    /// Closed-form limit of 1/G_lambda(a, a) as lambda tends to 0.
    /// Zero for recurrent families (the Green kernel diverges).
    pub fn inv_green_zero(&self, a: f64) -> Result<f64> {
        self.check_interior(a, "a")?;
        Ok(match self.family {
            Family::Brownian { mu } => {
                if mu == 0.0 {
                    0.0
                } else {
                    2.0 * mu.abs() * (2.0 * mu * a).exp()
                }
            }
            Family::Bessel3 { mu } => ((2.0 * mu * a).exp() - 1.0) / (2.0 * mu),
            Family::Reflected => 0.0,
        })
    }
}

pub(crate) fn gauss(t: f64, d: f64) -> f64 {
    (-d * d / (2.0 * t)).exp() / (SQRT_2PI * t.sqrt())
}
