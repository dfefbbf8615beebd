//! Effective-channel estimation modelled as additive circular Gaussian error.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use super::effective::EffectiveChannel;

/// Per-entry error variance: mean entry power of `H(f_ν)` divided by the pilot SNR.
pub fn estimation_variance(h: &DMatrix<Complex64>, pilot_snr_db: f64) -> f64 {
    if pilot_snr_db == f64::INFINITY {
        return 0.0;
    }
    let mean_power = h.norm_squared() / (h.nrows() * h.ncols()).max(1) as f64;
    mean_power / 10f64.powf(pilot_snr_db / 10.0)
}

/// `Ĥ = H + N` with independent `CN(0, σ²_ν)` entries; an infinite SNR returns `H` unchanged.
pub fn estimate_effective_channel<R: Rng + ?Sized>(heff: &EffectiveChannel, pilot_snr_db: f64, rng: &mut R) -> EffectiveChannel {
    let h = heff
        .h
        .iter()
        .map(|m| {
            let var = estimation_variance(m, pilot_snr_db);
            if var == 0.0 {
                return m.clone();
            }
            let s = (0.5 * var).sqrt();
            m.map(|z| {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                z + Complex64::new(s * re, s * im)
            })
        })
        .collect();
    EffectiveChannel { h, include_next: heff.include_next }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mumimo::precoding::{sinr_rates, Precoding};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn fixed() -> EffectiveChannel {
        let h = DMatrix::from_fn(3, 3, |i, j| Complex64::new(if i == j { 1.0 } else { 0.2 }, 0.1 * (i as f64 - j as f64)));
        EffectiveChannel { h: vec![h; 2], include_next: false }
    }

    #[test]
    fn infinite_snr_is_exact() {
        let e = fixed();
        assert_eq!(estimate_effective_channel(&e, f64::INFINITY, &mut ChaCha8Rng::seed_from_u64(0)), e);
    }

    #[test]
    fn variance_halves_per_three_db() {
        let e = fixed();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let sample_var = |snr: f64, rng: &mut ChaCha8Rng| {
            let mut acc = 0.0;
            let draws = 10_000;
            for _ in 0..draws {
                let est = estimate_effective_channel(&e, snr, rng);
                acc += (&est.h[0] - &e.h[0]).norm_squared() / 9.0;
            }
            acc / draws as f64
        };
        let v10 = sample_var(10.0, &mut rng);
        let v13 = sample_var(10.0 + 10.0 * 2f64.log10(), &mut rng);
        assert!((v10 / v13 - 2.0).abs() < 0.05, "{}", v10 / v13);
    }

    #[test]
    fn residual_interference_grows_as_snr_drops() {
        let e = fixed();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let mut prev = 0.0;
        for snr in [40.0, 30.0, 20.0, 10.0] {
            let mut acc = 0.0;
            for _ in 0..100 {
                let est = estimate_effective_channel(&e, snr, &mut rng);
                let link = sinr_rates(&e, Precoding::Zf, Some(&est), 1e6, 1.0).unwrap();
                // at high transmit power the SINR is 1 / residual interference-to-signal ratio
                acc += link.sinr.iter().flatten().map(|s| 1.0 / s).sum::<f64>();
            }
            assert!(acc > prev);
            prev = acc;
        }
    }
}
