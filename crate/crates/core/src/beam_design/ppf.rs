//! Phase perturbation function used to widen a beam with phase-only control.

use nalgebra::DVector;
use num_complex::Complex64;
use std::f64::consts::PI;

/// Phase `f(n) = |4πρ x_n^Π|` with `x_n = 0.5/(N−1) + (n − N/2)/(N−1)`. For non-integer
/// exponents the power is taken of `|x_n|`.
pub fn ppf_phase(n_p: usize, rho: f64, pi_exp: f64) -> Vec<f64> {
    assert!(n_p >= 2, "ppf needs at least two elements");
    let m = (n_p - 1) as f64;
    (0..n_p)
        .map(|n| {
            let x = 0.5 / m + (n as f64 - 0.5 * n_p as f64) / m;
            let p = if pi_exp.fract() == 0.0 { x.powi(pi_exp as i32) } else { x.abs().powf(pi_exp) };
            (4.0 * PI * rho * p).abs()
        })
        .collect()
}

pub fn ppf(n_p: usize, rho: f64, pi_exp: f64) -> DVector<Complex64> {
    DVector::from_iterator(n_p, ppf_phase(n_p, rho, pi_exp).into_iter().map(|f| Complex64::from_polar(1.0, f)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn zero_rho_is_flat() {
        assert!(ppf(40, 0.0, 1.0).iter().all(|z| *z == Complex64::new(1.0, 0.0)));
    }

    #[test]
    fn centre_value() {
        let f = ppf_phase(40, 2.0, 1.0);
        assert_abs_diff_eq!(f[20], 8.0 * PI * 0.5 / 39.0, epsilon = 1e-12);
        assert_abs_diff_eq!(f[20], 0.3222, epsilon = 1e-4);
    }

    #[test]
    fn symmetric_about_half_step() {
        // x_n = -x_{N-1-n}, so the phase is mirror symmetric for |.|-type exponents
        let f = ppf_phase(40, 1.5, 1.0);
        for n in 0..40 {
            assert_abs_diff_eq!(f[n], f[39 - n], epsilon = 1e-12);
        }
        let g = ppf_phase(40, 1.5, 1.7);
        assert!(g.iter().all(|v| v.is_finite()));
    }
}
