//! Numerical Laplace transform inversion on the fixed Talbot contour.
//!
//! The fixed Talbot method evaluates the Bromwich integral along the
//! deformed contour s(theta) = r theta (cot theta + i), theta in
//! (-pi, pi), with r = 2 M / (5 t) for M nodes. For transforms whose
//! singularities lie on the negative real axis the trapezoidal sum on
//! this contour converges geometrically in M, giving 10 or more correct
//! digits at M = 32 in double precision.

use num_complex::Complex64;

use crate::engine::Engine;
use crate::error::{Error, Result};

/// Inversion request: contour size and output time grid.
#[derive(Debug, Clone)]
pub struct InversionSpec {
    pub node_count: usize,
    pub t_grid: Vec<f64>,
}

impl InversionSpec {
    pub fn new(node_count: usize, t_grid: Vec<f64>) -> Result<Self> {
        if node_count < 8 {
            return Err(Error::Domain(format!(
                "node_count must be at least 8, got {node_count}"
            )));
        }
        if t_grid.is_empty() {
            return Err(Error::Domain("t_grid must not be empty".into()));
        }
        for &t in &t_grid {
            if !(t > 0.0 && t.is_finite()) {
                return Err(Error::Domain(format!(
                    "grid times must be finite and > 0, got {t}"
                )));
            }
        }
        Ok(Self { node_count, t_grid })
    }
}

/// Inverts the transform `f` at time t > 0 with an M-node fixed Talbot
/// contour. Errors from `f` are wrapped with the index of the failing
/// contour node.
pub fn invert<F>(f: F, t: f64, node_count: usize) -> Result<f64>
where
    F: Fn(Complex64) -> Result<Complex64>,
{
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::Domain(format!("invert: t must be finite and > 0, got {t}")));
    }
    let m = node_count;
    let r = 2.0 * m as f64 / (5.0 * t);
    let wrap = |node: usize| {
        move |e: Error| Error::InversionNode {
            node,
            source: Box::new(e),
        }
    };
    // Node 0 sits on the real axis at s = r.
    let mut acc = 0.5 * (r * t).exp() * f(Complex64::new(r, 0.0)).map_err(wrap(0))?.re;
    for k in 1..m {
        let theta = k as f64 * std::f64::consts::PI / m as f64;
        let cot = theta.cos() / theta.sin();
        let s = Complex64::new(r * theta * cot, r * theta);
        let sigma = theta + (theta * cot - 1.0) * cot;
        let fs = f(s).map_err(wrap(k))?;
        acc += ((s * t).exp() * fs * Complex64::new(1.0, sigma)).re;
    }
    Ok(acc * r / m as f64)
}

/// Cumulative distribution recovered on a time grid, with the largest
/// amount by which the raw inversion left [0, 1] before clamping.
#[derive(Debug, Clone)]
pub struct CdfGrid {
    pub points: Vec<(f64, f64)>,
    pub max_excursion: f64,
}

/// Inverts F(s)/s on the grid, where F is the Laplace transform of a
/// probability density on [0, inf). Values are clamped to [0, 1]; the
/// pre-clamp excursion is reported so callers can flag a transform that
/// misbehaves on the contour.
pub fn cdf_on_grid<F>(f: F, spec: &InversionSpec) -> Result<CdfGrid>
where
    F: Fn(Complex64) -> Result<Complex64>,
{
    let mut points = Vec::with_capacity(spec.t_grid.len());
    let mut max_excursion = 0.0f64;
    for &t in &spec.t_grid {
        let raw = invert(|s| Ok(f(s)? / s), t, spec.node_count)?;
        let excursion = (-raw).max(raw - 1.0).max(0.0);
        max_excursion = max_excursion.max(excursion);
        points.push((t, raw.clamp(0.0, 1.0)));
    }
    Ok(CdfGrid {
        points,
        max_excursion,
    })
}

/// Distribution function of the Parisian time kappa_u^{(a,-)} on a grid.
///
/// kappa is at least u by construction, so the inversion runs on the
/// shifted variable kappa - u: grid times at or below u map to 0, and
/// the transform evaluated on the contour is the one analytic left of
/// the imaginary axis.
pub fn kappa_cdf_on_grid(
    engine: &Engine<'_>,
    x: f64,
    a: f64,
    u: f64,
    spec: &InversionSpec,
) -> Result<CdfGrid> {
    let mut points = Vec::with_capacity(spec.t_grid.len());
    let mut max_excursion = 0.0f64;
    for &t in &spec.t_grid {
        if t <= u {
            points.push((t, 0.0));
            continue;
        }
        let raw = invert(
            |s| Ok(engine.kappa_shifted_laplace_c(s, x, a, u)? / s),
            t - u,
            spec.node_count,
        )?;
        let excursion = (-raw).max(raw - 1.0).max(0.0);
        max_excursion = max_excursion.max(excursion);
        points.push((t, raw.clamp(0.0, 1.0)));
    }
    Ok(CdfGrid {
        points,
        max_excursion,
    })
}
