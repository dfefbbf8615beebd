//! Successive convex approximation for phase-only flat-top beams.
//!
//! The rank-one constraint on `W = w w^H` is handled by the difference-of-norms penalty
//! `‖W‖_* − ‖W‖_2`, linearised at the current iterate through its dominant eigenvector.
//! Because `diag(W) = 1` and `W ⪰ 0`, `‖W‖_* = Tr W = N` is constant, so each convex
//! subproblem reduces to maximising `α + η e^H W e`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use super::pattern::{element_gain_1d, linspace, to_db};
use super::sdp::{principal_eigen, AdmmOptions, MaxMinSdp, SdpIterate};
use crate::error::{Error, Result};

/// Optional upper bound on the pattern away from the main lobe, relative to `α`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SidelobeCeiling {
    /// Ceiling relative to the minimum in-band gain (dB, negative).
    pub level_db: f64,
    /// Gap in sine-angle between each band edge and the constrained region.
    pub guard: f64,
    /// Sidelobe grid points per element over `[−1, 1]`.
    pub grid_factor: usize,
}

impl Default for SidelobeCeiling {
    fn default() -> Self {
        SidelobeCeiling { level_db: -18.0, guard: 0.1, grid_factor: 4 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScaOptions {
    pub max_outer: usize,
    /// Relative change of the subproblem objective that ends the outer loop.
    pub tolerance: f64,
    /// In-band grid density: points per element over the full `[−1, 1]` range.
    pub grid_factor: usize,
    /// `η⁽⁰⁾ = eta_init · α⁽⁰⁾`.
    pub eta_init: f64,
    pub eta_growth: f64,
    /// Penalty stops growing once `λ₂/λ₁` of the iterate falls below this.
    pub rank_gap_tol: f64,
    pub sidelobe: Option<SidelobeCeiling>,
    pub admm: AdmmOptions,
}

impl Default for ScaOptions {
    fn default() -> Self {
        ScaOptions {
            max_outer: 60,
            tolerance: 1e-6,
            grid_factor: 8,
            eta_init: 0.1,
            eta_growth: 1.5,
            rank_gap_tol: 1e-3,
            sidelobe: Some(SidelobeCeiling::default()),
            // short warm-started inner solves; the outer loop carries the ADMM state forward
            admm: AdmmOptions { max_iterations: 100, tolerance: 1e-6, mu0: 1.0 },
        }
    }
}

impl ScaOptions {
    /// Pure max-min formulation without a sidelobe ceiling.
    pub fn max_min_only() -> Self {
        ScaOptions { sidelobe: None, ..Default::default() }
    }
}

/// State of one outer iteration.
#[derive(Clone, Debug)]
pub struct ScaState {
    pub w_mat: DMatrix<Complex64>,
    pub alpha: f64,
    pub penalty: f64,
    pub e_max: DVector<Complex64>,
    pub rank_gap: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScaRecord {
    pub iteration: usize,
    pub alpha: f64,
    pub penalty: f64,
    pub rank_gap: f64,
    /// Minimum in-band gain of the phase vector extracted at this iterate.
    pub min_gain: f64,
    pub accepted: bool,
    pub admm_iterations: usize,
    pub admm_converged: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScaOutcome {
    pub w: DVector<Complex64>,
    pub min_gain_init: f64,
    pub min_gain: f64,
    /// Final `λ₂/λ₁` of the relaxed iterate.
    pub rank_gap: f64,
    pub iterations: usize,
    /// False when no iterate beat the initializer and it was returned unchanged.
    pub improved: bool,
    /// Set when the last subproblem ended with primal infeasibility above `1e-3`.
    pub solver_warning: bool,
    pub history: Vec<ScaRecord>,
}

impl ScaOutcome {
    pub fn improvement_db(&self) -> f64 {
        to_db(self.min_gain / self.min_gain_init)
    }
}

/// Uniform in-band sine-angle grid with spacing at most `2 / (grid_factor · N)`, endpoints included.
pub fn target_grid(n_p: usize, lo: f64, hi: f64, grid_factor: usize) -> Vec<f64> {
    if hi <= lo {
        return vec![lo];
    }
    let intervals = ((hi - lo) * (grid_factor * n_p) as f64 / 2.0).ceil().max(1.0) as usize;
    linspace(lo, hi, intervals + 1)
}

/// `sqrt(E(β)) (a(β) ⊙ q)`, so that the gain of `w` is `|v^H w|²`.
pub fn constraint_vector(q: &[f64], beta: f64) -> DVector<Complex64> {
    let s = element_gain_1d(beta).sqrt();
    DVector::from_iterator(q.len(), q.iter().enumerate().map(|(n, &qn)| Complex64::from_polar(s * qn, -PI * beta * n as f64)))
}

fn gain(v: &DVector<Complex64>, w: &DVector<Complex64>) -> f64 {
    v.dotc(w).norm_sqr()
}

fn min_gain(vs: &[DVector<Complex64>], w: &DVector<Complex64>) -> f64 {
    vs.iter().map(|v| gain(v, w)).fold(f64::INFINITY, f64::min)
}

fn unit_phase(v: &DVector<Complex64>) -> DVector<Complex64> {
    v.map(|z| if z.norm() > 0.0 { z / z.norm() } else { Complex64::new(1.0, 0.0) })
}

/// Flat-top phase design over `[lo, hi]` (sine-angle) for taper `q`, starting from `w_ini`.
pub fn sca_flat_top(q: &[f64], target: (f64, f64), w_ini: &DVector<Complex64>, opts: &ScaOptions) -> Result<ScaOutcome> {
    let n = q.len();
    let (lo, hi) = target;
    if w_ini.len() != n {
        return Err(Error::Dimension("initializer length differs from taper length".into()));
    }
    if !(lo <= hi && lo > -1.0 && hi < 1.0) {
        return Err(Error::invalid(format!("target interval [{lo}, {hi}] must lie inside (-1, 1)")));
    }
    if w_ini.iter().any(|z| (z.norm() - 1.0).abs() > 1e-9) {
        return Err(Error::invalid("initializer must have unit-modulus entries"));
    }
    let betas = target_grid(n, lo, hi, opts.grid_factor);
    let mut inband: Vec<DVector<Complex64>> = betas.iter().map(|&b| constraint_vector(q, b)).collect();
    // normalise so the initializer's mean in-band gain is one
    let mean0 = inband.iter().map(|v| gain(v, w_ini)).sum::<f64>() / inband.len() as f64;
    if !(mean0 > 0.0) {
        return Err(Error::invalid("initializer has zero in-band gain"));
    }
    let scale = 1.0 / mean0.sqrt();
    for v in inband.iter_mut() {
        *v *= Complex64::new(scale, 0.0);
    }
    let (sidelobe, rho) = match &opts.sidelobe {
        Some(c) => {
            let grid = linspace(-1.0, 1.0, c.grid_factor * n + 1);
            let s: Vec<DVector<Complex64>> = grid
                .into_iter()
                .filter(|b| *b < lo - c.guard || *b > hi + c.guard)
                .map(|b| constraint_vector(q, b) * Complex64::new(scale, 0.0))
                .collect();
            (s, 10f64.powf(c.level_db / 10.0))
        }
        None => (Vec::new(), 0.0),
    };
    let sdp = MaxMinSdp::new(n, &inband, &sidelobe, rho)?;

    let g_init = min_gain(&inband, w_ini);
    let mut state = ScaState {
        w_mat: w_ini * w_ini.adjoint(),
        alpha: g_init,
        penalty: opts.eta_init * g_init,
        e_max: w_ini / Complex64::new((n as f64).sqrt(), 0.0),
        rank_gap: 0.0,
    };
    let mut best = w_ini.clone();
    let mut best_gain = g_init;
    let mut history = Vec::new();
    let mut warm: Option<SdpIterate> = None;
    let mut prev_obj = f64::NAN;
    let mut solver_warning = false;
    let mut iterations = 0;
    let mut rank_gap = f64::NAN;

    for i in 0..opts.max_outer {
        iterations = i + 1;
        let (_, e) = principal_eigen(&state.w_mat);
        state.e_max = e;
        let sol = sdp.solve(&state.e_max, state.penalty, warm.take(), &opts.admm);
        solver_warning = sol.primal_residual > 1e-3;
        let (vals, v1) = principal_eigen(&sol.w);
        rank_gap = if vals[0] > 0.0 { vals.get(1).copied().unwrap_or(0.0).max(0.0) / vals[0] } else { 1.0 };
        let w = unit_phase(&v1);
        let g = min_gain(&inband, &w);
        let accepted = g > best_gain;
        if accepted {
            best = w;
            best_gain = g;
        }
        history.push(ScaRecord {
            iteration: i + 1,
            alpha: sol.alpha,
            penalty: state.penalty,
            rank_gap,
            min_gain: g,
            accepted,
            admm_iterations: sol.iterations,
            admm_converged: sol.converged,
        });
        log::debug!("sca {i}: alpha {:.5} min-gain {:.5} rank-gap {:.2e} admm {}", sol.alpha, g, rank_gap, sol.iterations);

        let obj = sol.alpha + state.penalty * state.e_max.dotc(&(&sol.w * &state.e_max)).re;
        let settled = rank_gap < opts.rank_gap_tol;
        state.w_mat = sol.w.clone();
        state.alpha = sol.alpha;
        warm = Some(sol.iterate);
        if settled && prev_obj.is_finite() && ((obj - prev_obj) / obj.abs().max(1e-12)).abs() < opts.tolerance {
            break;
        }
        prev_obj = obj;
        if !settled {
            state.penalty *= opts.eta_growth;
        }
    }
    if best_gain <= g_init {
        log::warn!("flat-top optimisation did not improve the initializer");
    }
    Ok(ScaOutcome {
        w: best,
        min_gain_init: g_init / (scale * scale),
        min_gain: best_gain / (scale * scale),
        rank_gap,
        iterations,
        improved: best_gain > g_init,
        solver_warning,
        history,
    })
}
