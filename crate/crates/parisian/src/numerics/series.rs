//! Bilateral (n over all integers) series summation.

use crate::error::{Error, Result};
use crate::numerics::ToleranceSpec;

/// Sum of `term(n)` over all integers n, summing outward from n = 0 in
/// paired shells {n, -n} so that alternating-sign series keep their
/// cancellation. Stops once three consecutive shells each contribute less
/// than `rel_tol * |partial sum| + abs_tol`.
pub fn bilateral_sum<F: Fn(i64) -> f64>(term: F, tol: &ToleranceSpec) -> Result<f64> {
    let mut sum = term(0);
    let mut evals = 1usize;
    let mut quiet_shells = 0u32;
    let mut n = 1i64;
    loop {
        if evals + 2 > tol.max_evals {
            return Err(Error::Accuracy {
                estimate: sum,
                bound: f64::INFINITY,
                evals,
            });
        }
        let shell = term(n) + term(-n);
        evals += 2;
        sum += shell;
        if shell.abs() <= tol.rel_tol * sum.abs() + tol.abs_tol {
            quiet_shells += 1;
            if quiet_shells >= 3 {
                return Ok(sum);
            }
        } else {
            quiet_shells = 0;
        }
        n += 1;
    }
}
