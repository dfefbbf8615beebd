//! Max-min gain semidefinite subproblem solved by an alternating direction method on the dual
//! of the standard-form SDP.
//!
//! The subproblem is
//!
//! ```text
//! maximize    α + η e^H W e
//! subject to  ⟨a_b a_b^H, W⟩ ≥ α         for every in-band vector a_b
//!             ⟨s_k s_k^H, W⟩ ≤ ρ α       for every sidelobe vector s_k (optional)
//!             diag(W) = 1,  W ⪰ 0,  α ≥ 0
//! ```
//!
//! It is cast in standard form `min ⟨C, X⟩ s.t. 𝒜(X) = b, X ⪰ 0` with the block-diagonal
//! variable `X = diag(W, α, slacks)`. Each iteration needs one Hermitian eigendecomposition.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdmmOptions {
    pub max_iterations: usize,
    /// Relative primal and dual infeasibility at which to stop.
    pub tolerance: f64,
    pub mu0: f64,
}

impl Default for AdmmOptions {
    fn default() -> Self {
        AdmmOptions { max_iterations: 4000, tolerance: 1e-6, mu0: 1.0 }
    }
}

/// Primal-dual iterate, reusable as a warm start.
#[derive(Clone, Debug)]
pub struct SdpIterate {
    pub w: DMatrix<Complex64>,
    /// `[α, slacks...]`.
    pub z: DVector<f64>,
    pub s_w: DMatrix<Complex64>,
    pub s_z: DVector<f64>,
    pub y: DVector<f64>,
    pub mu: f64,
}

#[derive(Clone, Debug)]
pub struct SdpSolution {
    pub w: DMatrix<Complex64>,
    pub alpha: f64,
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub converged: bool,
    pub iterate: SdpIterate,
}

/// Constraint data of the max-min problem; the Gram operator is factored once.
pub struct MaxMinSdp {
    n: usize,
    /// Real and imaginary parts of the columns `a_b` (in-band) followed by `s_k` (sidelobe).
    vr: DMatrix<f64>,
    vi: DMatrix<f64>,
    n_lo: usize,
    rho: f64,
    chol: Cholesky<f64, Dyn>,
}

impl MaxMinSdp {
    pub fn new(n: usize, inband: &[DVector<Complex64>], sidelobe: &[DVector<Complex64>], rho: f64) -> Result<Self> {
        if inband.is_empty() {
            return Err(Error::invalid("max-min problem needs at least one in-band constraint"));
        }
        if inband.iter().chain(sidelobe).any(|v| v.len() != n) {
            return Err(Error::Dimension("constraint vector length differs from n".into()));
        }
        let n_lo = inband.len();
        let m = inband.len() + sidelobe.len();
        let mut vecs = DMatrix::zeros(n, m);
        for (k, v) in inband.iter().chain(sidelobe).enumerate() {
            vecs.set_column(k, v);
        }
        let gram = gram(n, &vecs, n_lo, rho);
        let chol = Cholesky::new(gram).ok_or_else(|| Error::invalid("constraint Gram matrix is singular"))?;
        Ok(MaxMinSdp { n, vr: vecs.map(|z| z.re), vi: vecs.map(|z| z.im), n_lo, rho, chol })
    }

    fn m(&self) -> usize {
        self.vr.ncols()
    }

    fn n_cons(&self) -> usize {
        self.n + self.m()
    }

    fn row_coeffs(&self, k: usize) -> (f64, f64) {
        row_coeffs(k, self.n_lo, self.rho)
    }

    /// Linear map `𝒜` applied to a block-diagonal matrix.
    fn apply(&self, w: &DMatrix<Complex64>, z: &DVector<f64>) -> DVector<f64> {
        let n = self.n;
        let m = self.m();
        let mut out = DVector::zeros(n + m);
        for i in 0..n {
            out[i] = w[(i, i)].re;
        }
        // complex products through real GEMMs
        let (wr, wi) = (w.map(|c| c.re), w.map(|c| c.im));
        let pr = &wr * &self.vr - &wi * &self.vi;
        let pi = &wr * &self.vi + &wi * &self.vr;
        for k in 0..m {
            let (sk, ak) = self.row_coeffs(k);
            let quad = self.vr.column(k).dot(&pr.column(k)) + self.vi.column(k).dot(&pi.column(k));
            out[n + k] = sk * quad + ak * z[0] - z[1 + k];
        }
        out
    }

    /// Adjoint map `𝒜*`.
    fn adjoint(&self, y: &DVector<f64>) -> (DMatrix<Complex64>, DVector<f64>) {
        let n = self.n;
        let m = self.m();
        let mut sr = self.vr.clone();
        let mut si = self.vi.clone();
        let mut z = DVector::zeros(1 + m);
        for k in 0..m {
            let (sk, ak) = self.row_coeffs(k);
            let c = sk * y[n + k];
            sr.column_mut(k).scale_mut(c);
            si.column_mut(k).scale_mut(c);
            z[0] += ak * y[n + k];
            z[1 + k] = -y[n + k];
        }
        let re = &sr * self.vr.transpose() + &si * self.vi.transpose();
        let im = &si * self.vr.transpose() - &sr * self.vi.transpose();
        let mut w = DMatrix::from_fn(n, n, |i, j| Complex64::new(re[(i, j)], im[(i, j)]));
        for i in 0..n {
            w[(i, i)] += Complex64::new(y[i], 0.0);
        }
        hermitize(&mut w);
        (w, z)
    }

    fn rhs(&self) -> DVector<f64> {
        let mut b = DVector::zeros(self.n_cons());
        for i in 0..self.n {
            b[i] = 1.0;
        }
        b
    }

    /// Solve for penalty `eta` on direction `e`, optionally warm started.
    pub fn solve(&self, e: &DVector<Complex64>, eta: f64, warm: Option<SdpIterate>, opts: &AdmmOptions) -> SdpSolution {
        let n = self.n;
        let m = self.m();
        let c_w: DMatrix<Complex64> = e * e.adjoint() * Complex64::new(-eta, 0.0);
        let mut c_z: DVector<f64> = DVector::zeros(1 + m);
        c_z[0] = -1.0;
        let b = self.rhs();
        let b_norm = b.norm();
        let c_norm = (c_w.norm_squared() + c_z.norm_squared()).sqrt();

        let mut it = warm.unwrap_or_else(|| SdpIterate {
            w: DMatrix::identity(n, n),
            z: DVector::zeros(1 + m),
            s_w: DMatrix::zeros(n, n),
            s_z: DVector::zeros(1 + m),
            y: DVector::zeros(n + m),
            mu: opts.mu0,
        });
        let (mut pinf, mut dinf) = (f64::INFINITY, f64::INFINITY);
        let mut ratio_hist = 0i32;
        let mut iterations = 0;
        for k in 1..=opts.max_iterations {
            iterations = k;
            let mu = it.mu;
            // y = −(𝒜𝒜*)⁻¹ (𝒜(μX + S − C) − μ b)
            let tw = &it.w * Complex64::new(mu, 0.0) + &it.s_w - &c_w;
            let tz = &it.z * mu + &it.s_z - &c_z;
            let rhs = self.apply(&tw, &tz) - &b * mu;
            it.y = -self.chol.solve(&rhs);
            let (aw, az) = self.adjoint(&it.y);
            // V = C − 𝒜*(y) − μX
            let vw = &c_w - &aw - &it.w * Complex64::new(mu, 0.0);
            let vz = &c_z - &az - &it.z * mu;
            let (pos, neg) = split_psd(vw);
            it.s_w = pos;
            it.w = neg * Complex64::new(1.0 / mu, 0.0);
            it.s_z = vz.map(|v| v.max(0.0));
            it.z = vz.map(|v| (-v).max(0.0) / mu);

            if k % 10 == 0 || k == opts.max_iterations {
                let ax = self.apply(&it.w, &it.z);
                pinf = (&ax - &b).norm() / (1.0 + b_norm);
                let dw = &c_w - &aw - &it.s_w;
                let dz = &c_z - &az - &it.s_z;
                dinf = (dw.norm_squared() + dz.norm_squared()).sqrt() / (1.0 + c_norm);
                if pinf < opts.tolerance && dinf < opts.tolerance {
                    break;
                }
                // rebalance the penalty when one residual dominates persistently
                if pinf > 10.0 * dinf {
                    ratio_hist = ratio_hist.max(0) + 1;
                } else if dinf > 10.0 * pinf {
                    ratio_hist = ratio_hist.min(0) - 1;
                } else {
                    ratio_hist = 0;
                }
                if ratio_hist >= 3 {
                    it.mu = (it.mu * 2.0).min(1e4);
                    ratio_hist = 0;
                } else if ratio_hist <= -3 {
                    it.mu = (it.mu * 0.5).max(1e-4);
                    ratio_hist = 0;
                }
            }
        }
        let converged = pinf < opts.tolerance && dinf < opts.tolerance;
        let alpha = it.z[0];
        SdpSolution { w: it.w.clone(), alpha, iterations, primal_residual: pinf, dual_residual: dinf, converged, iterate: it }
    }
}

/// Sign of the rank-one term and coefficient of α in constraint row `n + k`.
fn row_coeffs(k: usize, n_lo: usize, rho: f64) -> (f64, f64) {
    if k < n_lo {
        (1.0, -1.0)
    } else {
        (-1.0, rho)
    }
}

/// Gram matrix `𝒜𝒜*` of the constraint operator.
fn gram(n: usize, vecs: &DMatrix<Complex64>, n_lo: usize, rho: f64) -> DMatrix<f64> {
    let m = vecs.ncols();
    let mut g = DMatrix::zeros(n + m, n + m);
    for i in 0..n {
        g[(i, i)] = 1.0;
    }
    let inner = vecs.adjoint() * vecs;
    for k in 0..m {
        let (sk, ak) = row_coeffs(k, n_lo, rho);
        for i in 0..n {
            let v = sk * vecs[(i, k)].norm_sqr();
            g[(i, n + k)] = v;
            g[(n + k, i)] = v;
        }
        for l in 0..m {
            let (sl, al) = row_coeffs(l, n_lo, rho);
            let mut v = sk * sl * inner[(k, l)].norm_sqr() + ak * al;
            if k == l {
                v += 1.0;
            }
            g[(n + k, n + l)] = v;
        }
    }
    g
}

fn hermitize(w: &mut DMatrix<Complex64>) {
    let n = w.nrows();
    for j in 0..n {
        w[(j, j)].im = 0.0;
        for i in 0..j {
            let v = 0.5 * (w[(i, j)] + w[(j, i)].conj());
            w[(i, j)] = v;
            w[(j, i)] = v.conj();
        }
    }
}

/// `(V₊, −V₋)`: the PSD and negated NSD parts of a Hermitian matrix.
fn split_psd(v: DMatrix<Complex64>) -> (DMatrix<Complex64>, DMatrix<Complex64>) {
    let n = v.nrows();
    let eig = SymmetricEigen::new(v);
    let mut pos = DMatrix::zeros(n, n);
    let mut neg = DMatrix::zeros(n, n);
    for k in 0..n {
        let l = eig.eigenvalues[k];
        let u = eig.eigenvectors.column(k);
        let target = if l > 0.0 { &mut pos } else { &mut neg };
        let s = l.abs();
        if s == 0.0 {
            continue;
        }
        for j in 0..n {
            let uj = u[j].conj() * s;
            for i in 0..n {
                target[(i, j)] += u[i] * uj;
            }
        }
    }
    (pos, neg)
}

/// Eigenvalues (descending) and the dominant eigenvector of a Hermitian matrix.
pub fn principal_eigen(w: &DMatrix<Complex64>) -> (Vec<f64>, DVector<Complex64>) {
    let eig = SymmetricEigen::new(w.clone());
    let mut order: Vec<usize> = (0..w.nrows()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let vals = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    (vals, eig.eigenvectors.column(order[0]).into_owned())
}
