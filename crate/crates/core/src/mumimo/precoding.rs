//! Zero-forcing under a per-port power cap, SINR and rates.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::effective::EffectiveChannel;
use crate::error::{Error, Result};

/// Condition number above which the plain inverse is replaced by a regularised one.
pub const CONDITION_LIMIT: f64 = 1e12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZfPrecoder {
    pub g: DMatrix<Complex64>,
    /// `1 / max_j ‖row_j(G0)‖`, so that `HG = scale · I` for an exact inverse.
    pub scale: f64,
    pub condition: f64,
    /// Set when the Tikhonov fallback was used.
    pub regularized: bool,
}

/// Largest squared row norm, i.e. the highest per-port power.
pub fn max_port_power(g: &DMatrix<Complex64>) -> f64 {
    g.row_iter().map(|r| r.norm_squared()).fold(0.0, f64::max)
}

fn condition_number(h: &DMatrix<Complex64>) -> f64 {
    let sv = h.clone().singular_values();
    let max = sv.iter().copied().fold(0.0, f64::max);
    let min = sv.iter().copied().fold(f64::INFINITY, f64::min);
    if min > 0.0 {
        max / min
    } else {
        f64::INFINITY
    }
}

/// `G = H⁻¹ / max_j ‖row_j(H⁻¹)‖`: every port at most unit power, the binding port exactly.
pub fn zf_precoder(h: &DMatrix<Complex64>) -> Result<ZfPrecoder> {
    let n = h.nrows();
    if n == 0 || h.ncols() != n {
        return Err(Error::Dimension("ZF needs a nonempty square channel".into()));
    }
    let condition = condition_number(h);
    let (g0, regularized) = match (condition <= CONDITION_LIMIT).then(|| h.clone().try_inverse()).flatten() {
        Some(inv) => (inv, false),
        None => {
            log::warn!("ill-conditioned channel (cond {condition:.3e}), using regularised inverse");
            let hh = h.adjoint() * h;
            let delta = 1e-9 * hh.trace().re.max(f64::MIN_POSITIVE) / n as f64;
            let reg = &hh + DMatrix::<Complex64>::identity(n, n) * Complex64::new(delta, 0.0);
            let inv = reg.try_inverse().ok_or_else(|| Error::invalid("regularised ZF inverse failed"))?;
            (inv * h.adjoint(), true)
        }
    };
    let m = max_port_power(&g0).sqrt();
    if !(m > 0.0 && m.is_finite()) {
        return Err(Error::invalid("ZF precoder has no finite nonzero row"));
    }
    Ok(ZfPrecoder { g: g0 / Complex64::new(m, 0.0), scale: 1.0 / m, condition, regularized })
}

/// SINR of each stream through `hg = H G`: `P |[HG]_ii|² / (N + P Σ_{j≠i} |[HG]_ij|²)`.
pub fn sinr(hg: &DMatrix<Complex64>, p_rf: f64, noise: f64) -> Vec<f64> {
    (0..hg.nrows())
        .map(|i| {
            let s = hg[(i, i)].norm_sqr();
            let intf: f64 = (0..hg.ncols()).filter(|&j| j != i).map(|j| hg[(i, j)].norm_sqr()).sum();
            p_rf * s / (noise + p_rf * intf)
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Precoding {
    /// Identity precoder, one stream per module at full port power.
    None,
    Zf,
}

/// Per-member SINR per subcarrier and rates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrecodedLink {
    pub precoding: Precoding,
    /// `sinr[i][ν]`.
    pub sinr: Vec<Vec<f64>>,
    /// `(1/N_sub) Σ_ν log2(1 + SINR)` per member (bit/s/Hz).
    pub rates: Vec<f64>,
    /// Subcarriers on which the regularised ZF fallback was used.
    pub regularized: usize,
    pub max_condition: f64,
}

/// Rates on the true channel `heff`, with the ZF precoder computed from `estimate` when given.
pub fn sinr_rates(
    heff: &EffectiveChannel,
    precoding: Precoding,
    estimate: Option<&EffectiveChannel>,
    p_rf: f64,
    noise: f64,
) -> Result<PrecodedLink> {
    let n = heff.size();
    let n_sub = heff.n_sub();
    if let Some(e) = estimate {
        if e.size() != n || e.n_sub() != n_sub {
            return Err(Error::Dimension("estimate and channel sizes differ".into()));
        }
    }
    let mut per = vec![vec![0.0; n_sub]; n];
    let mut regularized = 0;
    let mut max_condition: f64 = 0.0;
    for (nu, h) in heff.h.iter().enumerate() {
        let hg = match precoding {
            Precoding::None => h.clone(),
            Precoding::Zf => {
                let basis = estimate.map_or(h, |e| &e.h[nu]);
                let zf = zf_precoder(basis)?;
                regularized += zf.regularized as usize;
                max_condition = max_condition.max(zf.condition);
                h * &zf.g
            }
        };
        for (i, s) in sinr(&hg, p_rf, noise).into_iter().enumerate() {
            per[i][nu] = s;
        }
    }
    let rates = per.iter().map(|s| s.iter().map(|x| (1.0 + x).log2()).sum::<f64>() / n_sub.max(1) as f64).collect();
    Ok(PrecodedLink { precoding, sinr: per, rates, regularized, max_condition })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn identity_and_scaled_identity() {
        let z = zf_precoder(&DMatrix::identity(3, 3)).unwrap();
        assert!((z.g.clone() - DMatrix::<Complex64>::identity(3, 3)).norm() < 1e-15);
        assert_eq!(z.scale, 1.0);
        let h = DMatrix::<Complex64>::identity(3, 3) * c(2.0, 0.0);
        let z = zf_precoder(&h).unwrap();
        assert!((z.g.clone() - DMatrix::<Complex64>::identity(3, 3)).norm() < 1e-15);
        let hg = &h * &z.g;
        assert!((hg[(1, 1)] - c(2.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn unit_snr_gives_one_bit() {
        let e = EffectiveChannel { h: vec![DMatrix::identity(2, 2); 4], include_next: false };
        let l = sinr_rates(&e, Precoding::None, None, 1.0, 1.0).unwrap();
        assert!(l.sinr.iter().flatten().all(|s| (s - 1.0).abs() < 1e-15));
        assert!(l.rates.iter().all(|r| (r - 1.0).abs() < 1e-15));
    }

    #[test]
    fn interference_limited_plateau() {
        let eps = 0.1;
        let h = DMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(eps, 0.0), c(eps, 0.0), c(1.0, 0.0)]);
        for p in [1.0, 1e3, 1e9] {
            let s = sinr(&h, p, 1.0);
            assert!((s[0] - p / (1.0 + eps * eps * p)).abs() <= 1e-12 * s[0]);
        }
        assert!((sinr(&h, 1e12, 1.0)[0] - 1.0 / (eps * eps)).abs() < 1e-6 / (eps * eps));
    }

    #[test]
    fn perfect_csi_zf_rate() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let h: Vec<DMatrix<Complex64>> = (0..3)
            .map(|_| DMatrix::from_fn(3, 3, |i, j| c(if i == j { 2.0 } else { 0.0 } + rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)))
            .collect();
        let e = EffectiveChannel { h: h.clone(), include_next: false };
        let (p, n) = (10.0, 0.5);
        let l = sinr_rates(&e, Precoding::Zf, None, p, n).unwrap();
        for i in 0..3 {
            let mut expect = 0.0;
            for m in &h {
                let z = zf_precoder(m).unwrap();
                let hg = m * &z.g;
                let intf: f64 = (0..3).filter(|&j| j != i).map(|j| hg[(i, j)].norm_sqr()).sum();
                assert!(intf <= 1e-15 * hg[(i, i)].norm_sqr());
                expect += (1.0 + z.scale * z.scale * p / n).log2() / 3.0;
            }
            assert!((l.rates[i] - expect).abs() < 1e-9);
        }
    }

    #[test]
    fn singular_channel_falls_back() {
        let h = DMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(1.0, 0.0)]);
        let z = zf_precoder(&h).unwrap();
        assert!(z.regularized);
        assert!(max_port_power(&z.g) <= 1.0 + 1e-12);
    }

    proptest! {
        #[test]
        fn zf_structure(seed in 0u64..1000, k in 1usize..=8) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let h = DMatrix::from_fn(k, k, |i, j| c(if i == j { 1.5 } else { 0.0 } + rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
            let z = zf_precoder(&h).unwrap();
            let hg = &h * &z.g;
            for i in 0..k {
                for j in 0..k {
                    if i != j {
                        prop_assert!(hg[(i, j)].norm() <= 1e-9 * hg[(i, i)].norm());
                    }
                }
            }
            let powers: Vec<f64> = z.g.row_iter().map(|r| r.norm_squared()).collect();
            prop_assert!(powers.iter().all(|p| *p <= 1.0 + 1e-12));
            prop_assert!(powers.iter().any(|p| (p - 1.0).abs() <= 1e-12));
        }
    }
}
