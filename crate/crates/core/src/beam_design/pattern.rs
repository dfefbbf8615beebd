//! Far-field patterns of RIS excitations and flat-top quality metrics.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::io::Write;
use std::path::Path;

use crate::error::Result;
use crate::geometry::{patch_gain, steering_unchecked, Aod};

/// Element gain along a principal cut at sine-angle `β`.
pub fn element_gain_1d(beta: f64) -> f64 {
    if beta.abs() >= 1.0 {
        0.0
    } else {
        4.0 * (1.0 - beta * beta)
    }
}

/// `a(β)^H x` for the ULA steering vector at frequency ratio `λ0/λ`.
pub fn array_factor(x: &[Complex64], beta: f64, ratio: f64) -> Complex64 {
    let step = Complex64::from_polar(1.0, PI * ratio * beta);
    let mut ph = Complex64::new(1.0, 0.0);
    let mut acc = Complex64::new(0.0, 0.0);
    for (n, v) in x.iter().enumerate() {
        if n % 64 == 0 {
            // resynchronise the recurrence to keep rounding bounded
            ph = Complex64::from_polar(1.0, PI * ratio * beta * n as f64);
        }
        acc += ph * v;
        ph *= step;
    }
    acc
}

/// Linear 1D gain `E(β)|a(β)^H x|²` over a grid of sine-angles.
pub fn pattern_1d(x: &[Complex64], betas: &[f64], ratio: f64, include_element: bool) -> Vec<f64> {
    betas
        .iter()
        .map(|&b| {
            let g = array_factor(x, b, ratio).norm_sqr();
            if include_element {
                g * element_gain_1d(b)
            } else {
                g
            }
        })
        .collect()
}

/// `vec(A(φ,θ))^H vec(X)` using separability.
pub fn response_2d(x: &DMatrix<Complex64>, aod: Aod, ratio: f64) -> Complex64 {
    let n = x.nrows();
    let ax = steering_unchecked(n, aod.phi.sin(), ratio);
    let az = steering_unchecked(x.ncols(), aod.theta.sin(), ratio);
    response_2d_with(x, &ax, &az)
}

/// As [`response_2d`] with precomputed steering factors.
pub fn response_2d_with(x: &DMatrix<Complex64>, ax: &DVector<Complex64>, az: &DVector<Complex64>) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for j in 0..x.ncols() {
        let col = x.column(j);
        let mut s = Complex64::new(0.0, 0.0);
        for i in 0..x.nrows() {
            s += ax[i].conj() * col[i];
        }
        acc += s * az[j].conj();
    }
    acc
}

/// Linear 2D gain `E(φ,θ)|vec(A)^H (vec(Ξ) ⊙ u1)|²` at each angle pair.
pub fn pattern_2d(
    xi: &DMatrix<Complex64>,
    u1: &DMatrix<Complex64>,
    aods: &[Aod],
    ratio: f64,
    include_element: bool,
) -> Vec<f64> {
    let x = xi.component_mul(u1);
    aods.iter()
        .map(|a| {
            let g = response_2d(&x, *a, ratio).norm_sqr();
            if include_element {
                g * patch_gain(a.phi, a.theta)
            } else {
                g
            }
        })
        .collect()
}

/// 1D gain in dB of `w ⊙ q` at frequency ratio `λ0/λ`, optionally peak-normalised.
pub fn far_field_pattern_1d(w: &[Complex64], q: &[f64], betas: &[f64], ratio: f64, include_element: bool, normalize: bool) -> Vec<f64> {
    let x: Vec<Complex64> = w.iter().zip(q).map(|(a, b)| a * b).collect();
    gains_db(&pattern_1d(&x, betas, ratio, include_element), normalize)
}

pub fn to_db(g: f64) -> f64 {
    10.0 * g.max(1e-300).log10()
}

/// Gains in dB, optionally normalised so the peak is 0 dB.
pub fn gains_db(g: &[f64], normalize: bool) -> Vec<f64> {
    let peak = if normalize { g.iter().copied().fold(0.0, f64::max) } else { 1.0 };
    g.iter().map(|v| to_db(v / peak)).collect()
}

/// Uniform grid of `n` points over `[lo, hi]` including both ends.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![0.5 * (lo + hi)];
    }
    (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlatTopMetrics {
    /// Max over min in-band gain (dB).
    pub ripple_db: f64,
    /// Highest gain beyond the main-lobe nulls relative to the mean in-band level (dB).
    pub psl_db: f64,
    pub min_gain: f64,
    pub mean_gain: f64,
    /// Width in sine-angle of the contiguous region around the peak within 3 dB of it.
    pub width_3db: f64,
}

impl FlatTopMetrics {
    /// Metrics of a sampled pattern `g` on the ascending grid `betas` for target `[lo, hi]`.
    pub fn evaluate(betas: &[f64], g: &[f64], lo: f64, hi: f64) -> Self {
        let inband: Vec<f64> = betas.iter().zip(g).filter(|(b, _)| **b >= lo && **b <= hi).map(|(_, v)| *v).collect();
        let (min_gain, max_in) = inband.iter().fold((f64::INFINITY, 0.0f64), |(a, b), v| (a.min(*v), b.max(*v)));
        let mean_gain = inband.iter().sum::<f64>() / inband.len().max(1) as f64;

        // walk outward from the band edges down to the first local minimum
        let first_above = betas.iter().position(|b| *b > hi).unwrap_or(betas.len());
        let mut r = first_above.min(betas.len().saturating_sub(1));
        while r + 1 < g.len() && g[r + 1] <= g[r] {
            r += 1;
        }
        let last_below = betas.iter().rposition(|b| *b < lo);
        let mut l = last_below.unwrap_or(0);
        while l > 0 && g[l - 1] <= g[l] {
            l -= 1;
        }
        let side = g[..l].iter().chain(g[(r + 1).min(g.len())..].iter()).copied().fold(0.0, f64::max);

        let (ipk, peak) = g.iter().enumerate().fold((0, f64::NEG_INFINITY), |acc, (i, v)| if *v > acc.1 { (i, *v) } else { acc });
        let mut a = ipk;
        while a > 0 && g[a - 1] >= 0.5 * peak {
            a -= 1;
        }
        let mut b = ipk;
        while b + 1 < g.len() && g[b + 1] >= 0.5 * peak {
            b += 1;
        }
        FlatTopMetrics {
            ripple_db: to_db(max_in / min_gain),
            psl_db: to_db(side / mean_gain),
            min_gain,
            mean_gain,
            width_3db: betas[b] - betas[a],
        }
    }
}

/// Write `angle,gain_db` rows.
pub fn write_pattern_csv(path: &Path, angles: &[f64], gains_db: &[f64]) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "angle,gain_db")?;
    for (a, g) in angles.iter().zip(gains_db) {
        writeln!(f, "{a},{g}")?;
    }
    f.flush()?;
    Ok(())
}
