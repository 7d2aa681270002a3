//! Shared numerical kernels: adaptive quadrature, bilateral series
//! summation and special functions. Everything here is pure and reentrant.

mod erf;
mod quadrature;
mod series;

pub use erf::{erfc, erfc_scaled};
pub use quadrature::{
    integrate_bounded, integrate_bounded_c, integrate_to_infinity, QuadValue, ToleranceSpec,
};
pub use series::bilateral_sum;
