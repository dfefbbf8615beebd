//! Best separable (outer-product) approximation of the RIS amplitude taper.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeparableProfile {
    /// Taper minimising `D(P ‖ q × q)`, sums to one.
    pub q: DVector<f64>,
    /// Row marginal of the normalised profile.
    pub q_x: DVector<f64>,
    /// Column marginal of the normalised profile.
    pub q_z: DVector<f64>,
    /// Kullback-Leibler divergence `D(P ‖ q × q)` in nats.
    pub kl: f64,
    /// Entropy of `q` in nats.
    pub entropy_q: f64,
    /// Entropy of the normalised profile in nats.
    pub entropy_p: f64,
    /// Separability index `kl / (2 H(q))`.
    pub eta: f64,
}

fn xlogx(x: f64) -> f64 {
    if x > 0.0 {
        x * x.ln()
    } else {
        0.0
    }
}

pub fn separable_approximation(amp_profile: &DMatrix<f64>) -> Result<SeparableProfile> {
    if amp_profile.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
        return Err(Error::invalid("amplitude profile must be finite and nonnegative"));
    }
    let total: f64 = amp_profile.sum();
    if total <= 0.0 {
        return Err(Error::ZeroProfile);
    }
    if amp_profile.nrows() != amp_profile.ncols() {
        return Err(Error::Dimension("amplitude profile must be square".into()));
    }
    let p = amp_profile / total;
    let n = p.nrows();
    let q_x = DVector::from_iterator(n, (0..n).map(|i| p.row(i).sum()));
    let q_z = DVector::from_iterator(n, (0..n).map(|j| p.column(j).sum()));
    let q = (&q_x + &q_z) * 0.5;

    let entropy_p = -p.iter().map(|&v| xlogx(v)).sum::<f64>();
    let entropy_q = -q.iter().map(|&v| xlogx(v)).sum::<f64>();
    let mut kl = 0.0;
    for j in 0..n {
        for i in 0..n {
            let v = p[(i, j)];
            if v > 0.0 {
                kl += v * (v / (q[i] * q[j])).ln();
            }
        }
    }
    let kl = kl.max(0.0);
    let identity = 2.0 * entropy_q - entropy_p;
    debug_assert!((kl - identity.max(0.0)).abs() <= 1e-9 * (1.0 + entropy_p), "kl {kl} vs 2H(q)-H(P) {identity}");
    let eta = if entropy_q > 0.0 { kl / (2.0 * entropy_q) } else { 0.0 };
    Ok(SeparableProfile { q, q_x, q_z, kl, entropy_q, entropy_p, eta })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn uniform_is_separable() {
        let s = separable_approximation(&DMatrix::from_element(4, 4, 3.0)).unwrap();
        assert_abs_diff_eq!(s.kl, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(s.eta, 0.0, epsilon = 1e-15);
        for v in s.q.iter() {
            assert_abs_diff_eq!(*v, 0.25, epsilon = 1e-15);
        }
    }

    #[test]
    fn rank_one_recovers_factor() {
        let q0 = DVector::from_vec(vec![0.1, 0.2, 0.4, 0.2, 0.1]);
        let p = &q0 * q0.transpose();
        let s = separable_approximation(&p).unwrap();
        assert_abs_diff_eq!(s.eta, 0.0, epsilon = 1e-12);
        for (a, b) in s.q.iter().zip(q0.iter()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-15);
        }
    }

    #[test]
    fn rejects_zero_and_negative() {
        assert!(matches!(separable_approximation(&DMatrix::zeros(3, 3)), Err(Error::ZeroProfile)));
        let mut m = DMatrix::from_element(2, 2, 1.0);
        m[(0, 1)] = -1.0;
        assert!(separable_approximation(&m).is_err());
    }

    #[test]
    fn non_separable_profile_has_positive_divergence() {
        let p = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1.0]);
        let s = separable_approximation(&p).unwrap();
        // P = diag(1/2,1/2), q uniform: D = ln 2, H(q) = ln 2
        assert_abs_diff_eq!(s.kl, 2f64.ln(), epsilon = 1e-12);
        assert_abs_diff_eq!(s.eta, 0.5, epsilon = 1e-12);
    }

    proptest! {
        #[test]
        fn divergence_identity(vals in proptest::collection::vec(0.0f64..1.0, 36)) {
            prop_assume!(vals.iter().sum::<f64>() > 1e-3);
            let m = DMatrix::from_vec(6, 6, vals);
            let s = separable_approximation(&m).unwrap();
            prop_assert!((s.kl - (2.0 * s.entropy_q - s.entropy_p)).abs() < 1e-9);
            prop_assert!(s.eta >= 0.0 && s.eta <= 1.0);
            prop_assert!((s.q.sum() - 1.0).abs() < 1e-12);
        }
    }
}
