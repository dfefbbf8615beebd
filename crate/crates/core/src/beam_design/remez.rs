//! Equiripple linear-phase FIR design by the Remez exchange, and the binary phase profile
//! derived from the sign of a lowpass impulse response.
//!
//! Frequencies are normalised so that 1 is the Nyquist frequency. For an array steering
//! vector `exp(−jπ n β)` the normalised frequency coincides with the sine-angle `β`.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub lo: f64,
    pub hi: f64,
    pub desired: f64,
    pub weight: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RemezOptions {
    pub grid_density: usize,
    pub max_iterations: usize,
    /// Stop when `(max|E| − |δ|) / max|E|` falls below this.
    pub tolerance: f64,
}

impl Default for RemezOptions {
    fn default() -> Self {
        RemezOptions { grid_density: 16, max_iterations: 40, tolerance: 1e-6 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RemezDesign {
    pub taps: Vec<f64>,
    /// Weighted equiripple deviation `|δ|`.
    pub ripple: f64,
    pub iterations: usize,
}

struct GridPoint {
    omega: f64,
    desired: f64,
    weight: f64,
    band: usize,
}

/// Barycentric interpolant through `(x_k, c_k)`.
struct Bary {
    x: Vec<f64>,
    c: Vec<f64>,
    w: Vec<f64>,
}

impl Bary {
    fn new(x: Vec<f64>, c: Vec<f64>) -> Self {
        let w = bary_weights(&x);
        Bary { x, c, w }
    }

    fn eval(&self, x: f64) -> f64 {
        let (mut num, mut den) = (0.0, 0.0);
        for k in 0..self.x.len() {
            let d = x - self.x[k];
            if d == 0.0 {
                return self.c[k];
            }
            let t = self.w[k] / d;
            num += t * self.c[k];
            den += t;
        }
        num / den
    }
}

fn bary_weights(x: &[f64]) -> Vec<f64> {
    // scaled products keep the weights in floating point range for long filters
    (0..x.len())
        .map(|k| {
            let mut p = 1.0;
            for (i, xi) in x.iter().enumerate() {
                if i != k {
                    p *= 2.0 * (x[k] - xi);
                }
            }
            1.0 / p
        })
        .collect()
}

/// Equiripple linear-phase (symmetric) FIR filter of `n_taps` taps.
pub fn remez(n_taps: usize, bands: &[Band], opts: &RemezOptions) -> Result<RemezDesign> {
    if n_taps < 2 {
        return Err(Error::invalid("remez needs at least 2 taps"));
    }
    if bands.is_empty() {
        return Err(Error::invalid("remez needs at least one band"));
    }
    let mut prev = 0.0;
    for b in bands {
        if !(b.lo >= prev && b.hi > b.lo && b.hi <= 1.0 && b.weight > 0.0) {
            return Err(Error::invalid(format!("bad band [{}, {}] weight {}", b.lo, b.hi, b.weight)));
        }
        prev = b.hi;
    }
    let odd = n_taps % 2 == 1;
    // number of cosine basis functions
    let n_basis = if odd { (n_taps + 1) / 2 } else { n_taps / 2 };
    let q = |omega: f64| if odd { 1.0 } else { (omega / 2.0).cos() };

    // dense grid
    let total_width: f64 = bands.iter().map(|b| b.hi - b.lo).sum();
    let n_grid = (opts.grid_density * n_basis).max(8 * bands.len());
    let mut grid: Vec<GridPoint> = Vec::new();
    for (bi, b) in bands.iter().enumerate() {
        let mut hi = b.hi;
        if !odd && hi >= 1.0 {
            // type II has a forced zero at Nyquist
            hi = 1.0 - 0.5 / n_grid as f64;
        }
        let m = ((n_grid as f64) * (hi - b.lo) / total_width).ceil().max(2.0) as usize;
        for k in 0..m {
            let nu = b.lo + (hi - b.lo) * k as f64 / (m - 1) as f64;
            let omega = PI * nu;
            let qq = q(omega);
            grid.push(GridPoint { omega, desired: b.desired / qq, weight: b.weight * qq, band: bi });
        }
    }
    if grid.len() < n_basis + 1 {
        return Err(Error::invalid("frequency grid too coarse for the requested length"));
    }

    let r = n_basis + 1;
    let mut ext: Vec<usize> = (0..r).map(|k| k * (grid.len() - 1) / (r - 1)).collect();
    let mut ripple = f64::NAN;

    for it in 1..=opts.max_iterations {
        let x: Vec<f64> = ext.iter().map(|&i| grid[i].omega.cos()).collect();
        let w = bary_weights(&x);
        let (mut num, mut den) = (0.0, 0.0);
        for k in 0..r {
            let s = if k % 2 == 0 { 1.0 } else { -1.0 };
            num += w[k] * grid[ext[k]].desired;
            den += s * w[k] / grid[ext[k]].weight;
        }
        let delta = num / den;
        let c: Vec<f64> = (0..n_basis)
            .map(|k| {
                let s = if k % 2 == 0 { 1.0 } else { -1.0 };
                grid[ext[k]].desired - s * delta / grid[ext[k]].weight
            })
            .collect();
        let p = Bary::new(x[..n_basis].to_vec(), c);
        let err: Vec<f64> = grid.iter().map(|g| g.weight * (g.desired - p.eval(g.omega.cos()))).collect();
        ripple = delta.abs();

        let new_ext = match find_extrema(&err, &grid, r, ripple) {
            Some(e) => e,
            None => break,
        };
        let emax = new_ext.iter().map(|&i| err[i].abs()).fold(0.0, f64::max);
        let converged = (emax - ripple) / emax.max(f64::MIN_POSITIVE) < opts.tolerance;
        let same = new_ext == ext;
        ext = new_ext;
        if converged || same {
            return Ok(RemezDesign { taps: impulse_response(n_taps, &p, odd), ripple, iterations: it });
        }
    }
    Err(Error::RemezNotConverged { iterations: opts.max_iterations, ripple })
}

/// Alternating set of `r` local extrema of the weighted error, or `None` if too few exist.
fn find_extrema(err: &[f64], grid: &[GridPoint], r: usize, delta: f64) -> Option<Vec<usize>> {
    let n = err.len();
    let mut cand: Vec<usize> = Vec::new();
    for i in 0..n {
        let e = err[i];
        if e.abs() < delta * (1.0 - 1e-9) {
            continue;
        }
        let left = i > 0 && grid[i - 1].band == grid[i].band;
        let right = i + 1 < n && grid[i + 1].band == grid[i].band;
        let ge_l = !left || (e > 0.0 && e >= err[i - 1]) || (e < 0.0 && e <= err[i - 1]);
        let ge_r = !right || (e > 0.0 && e >= err[i + 1]) || (e < 0.0 && e <= err[i + 1]);
        if ge_l && ge_r {
            cand.push(i);
        }
    }
    // enforce alternation: among consecutive equal signs keep the largest
    let mut alt: Vec<usize> = Vec::new();
    for i in cand {
        if let Some(&last) = alt.last() {
            if err[last].signum() == err[i].signum() {
                if err[i].abs() > err[last].abs() {
                    *alt.last_mut().unwrap() = i;
                }
                continue;
            }
        }
        alt.push(i);
    }
    while alt.len() > r {
        // dropping an end point preserves alternation
        if err[alt[0]].abs() <= err[*alt.last().unwrap()].abs() {
            alt.remove(0);
        } else {
            alt.pop();
        }
    }
    if alt.len() < r {
        None
    } else {
        Some(alt)
    }
}

fn impulse_response(n_taps: usize, p: &Bary, odd: bool) -> Vec<f64> {
    let n = n_taps as f64;
    let amp: Vec<f64> = (0..n_taps)
        .map(|k| {
            let omega = 2.0 * PI * k as f64 / n;
            let qq = if odd { 1.0 } else { (omega / 2.0).cos() };
            qq * p.eval(omega.cos())
        })
        .collect();
    let centre = 0.5 * (n - 1.0);
    (0..n_taps)
        .map(|m| {
            let s: f64 = amp
                .iter()
                .enumerate()
                .map(|(k, a)| a * (2.0 * PI * k as f64 / n * (m as f64 - centre)).cos())
                .sum();
            s / n
        })
        .collect()
}

/// Lowpass spec for the binary profile.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BinarySpec {
    pub passband_edge: f64,
    pub stopband_edge: f64,
    pub passband_weight: f64,
    pub stopband_weight: f64,
}

impl BinarySpec {
    /// Lowpass whose main lobe spans `±half_width` in sine-angle, with the given transition.
    pub fn for_half_width(half_width: f64, transition: f64) -> Self {
        let fp = (half_width - 0.5 * transition).clamp(0.01, 0.98);
        let fs = (half_width + 0.5 * transition).clamp(fp + 0.01, 0.99);
        BinarySpec { passband_edge: fp, stopband_edge: fs, passband_weight: 1.0, stopband_weight: 1.0 }
    }

    pub fn bands(&self) -> Vec<Band> {
        vec![
            Band { lo: 0.0, hi: self.passband_edge, desired: 1.0, weight: self.passband_weight },
            Band { lo: self.stopband_edge, hi: 1.0, desired: 0.0, weight: self.stopband_weight },
        ]
    }
}

impl Default for BinarySpec {
    fn default() -> Self {
        BinarySpec::for_half_width(0.1, 0.1)
    }
}

/// `±1` profile from the signs of an equiripple lowpass impulse response (zero maps to +1).
pub fn binary_phase_profile(n_p: usize, spec: &BinarySpec, opts: &RemezOptions) -> Result<Vec<f64>> {
    let design = remez(n_p, &spec.bands(), opts)?;
    // symmetrise against rounding so the sign pattern is exactly palindromic
    let h = &design.taps;
    Ok((0..n_p)
        .map(|n| {
            let v = 0.5 * (h[n] + h[n_p - 1 - n]);
            if v >= 0.0 {
                1.0
            } else {
                -1.0
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn amplitude(h: &[f64], nu: f64) -> f64 {
        let c = 0.5 * (h.len() as f64 - 1.0);
        h.iter().enumerate().map(|(n, v)| v * (PI * nu * (n as f64 - c)).cos()).sum()
    }

    #[test]
    fn equiripple_lowpass() {
        let spec = BinarySpec { passband_edge: 0.2, stopband_edge: 0.3, passband_weight: 1.0, stopband_weight: 1.0 };
        for n in [31usize, 32] {
            let d = remez(n, &spec.bands(), &RemezOptions::default()).unwrap();
            for k in 0..n {
                assert_abs_diff_eq!(d.taps[k], d.taps[n - 1 - k], epsilon = 1e-12);
            }
            let mut max_dev: f64 = 0.0;
            for i in 0..=400 {
                let nu = i as f64 / 400.0;
                if nu <= 0.2 {
                    max_dev = max_dev.max((amplitude(&d.taps, nu) - 1.0).abs());
                } else if nu >= 0.3 && !(n % 2 == 0 && nu > 0.99) {
                    max_dev = max_dev.max(amplitude(&d.taps, nu).abs());
                }
            }
            // equiripple: the grid deviation equals δ up to interpolation between grid points
            assert!(max_dev <= d.ripple * 1.02, "n={n} max {max_dev} delta {}", d.ripple);
            assert!(d.ripple < 0.05);
        }
    }

    #[test]
    fn length_seven_matches_sinc_signs() {
        let spec = BinarySpec { passband_edge: 0.31, stopband_edge: 0.41, passband_weight: 1.0, stopband_weight: 1.0 };
        let b = binary_phase_profile(7, &spec, &RemezOptions::default()).unwrap();
        let fc = 0.36;
        let oracle: Vec<f64> = (0..7)
            .map(|n| {
                let m = n as f64 - 3.0;
                let s = if m == 0.0 { fc } else { (PI * fc * m).sin() / (PI * m) };
                if s >= 0.0 {
                    1.0
                } else {
                    -1.0
                }
            })
            .collect();
        assert_eq!(oracle, vec![-1.0, 1.0, 1.0, 1.0, 1.0, 1.0, -1.0]);
        assert_eq!(b, oracle);
    }

    #[test]
    fn default_profile_shape() {
        let b = binary_phase_profile(40, &BinarySpec::default(), &RemezOptions::default()).unwrap();
        let rev: Vec<f64> = b.iter().rev().copied().collect();
        assert_eq!(b, rev);
        assert_eq!(b[19], 1.0);
        // positive centre run flanked by negative blocks
        let s: String = b.iter().map(|v| if *v > 0.0 { '+' } else { '-' }).collect();
        assert_eq!(s, "+---------++++++++++++++++++++---------+");
    }

    #[test]
    fn rejects_bad_bands() {
        let bands = vec![Band { lo: 0.3, hi: 0.2, desired: 1.0, weight: 1.0 }];
        assert!(remez(11, &bands, &RemezOptions::default()).is_err());
    }

    #[test]
    fn reports_non_convergence() {
        let spec = BinarySpec::default();
        let opts = RemezOptions { max_iterations: 1, tolerance: 0.0, ..Default::default() };
        match remez(40, &spec.bands(), &opts) {
            Err(Error::RemezNotConverged { iterations, ripple }) => {
                assert_eq!(iterations, 1);
                assert!(ripple.is_finite());
            }
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }
}
