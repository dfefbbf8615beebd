//! von Mises-Fisher sampling on the unit sphere in three dimensions.

use nalgebra::Vector3;
use rand::Rng;
use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Mean resultant length `coth κ − 1/κ` of the 3D vMF distribution.
pub fn mean_resultant_length(kappa: f64) -> f64 {
    if kappa < 1e-4 {
        return kappa / 3.0;
    }
    1.0 / kappa.tanh() - 1.0 / kappa
}

/// Orthonormal pair spanning the plane orthogonal to the unit vector `m`.
fn tangent_basis(m: &Vector3<f64>) -> (Vector3<f64>, Vector3<f64>) {
    let helper = if m.x.abs() < 0.9 { Vector3::x() } else { Vector3::y() };
    let b1 = m.cross(&helper).normalize();
    let b2 = m.cross(&b1);
    (b1, b2)
}

/// Exact vMF draw with mean `m` (unit) and concentration `kappa > 0`.
pub fn sample_vmf<R: Rng + ?Sized>(m: &Vector3<f64>, kappa: f64, rng: &mut R) -> Result<Vector3<f64>> {
    if !(kappa > 0.0) || !kappa.is_finite() {
        return Err(Error::invalid(format!("vMF concentration must be positive, got {kappa}")));
    }
    if (m.norm() - 1.0).abs() > 1e-9 {
        return Err(Error::invalid("vMF mean direction must be a unit vector"));
    }
    // u in (0, 1] keeps the logarithm finite when exp(−2κ) underflows
    let u: f64 = 1.0 - rng.random::<f64>();
    let w = (1.0 + (u + (1.0 - u) * (-2.0 * kappa).exp()).ln() / kappa).clamp(-1.0, 1.0);
    let psi = 2.0 * PI * rng.random::<f64>();
    let (b1, b2) = tangent_basis(m);
    let s = (1.0 - w * w).max(0.0).sqrt();
    Ok((m * w + (b1 * psi.cos() + b2 * psi.sin()) * s).normalize())
}

/// vMF draw restricted to `r · front > 0` by rejection, giving up after `max_draws`.
pub fn sample_vmf_front<R: Rng + ?Sized>(
    m: &Vector3<f64>,
    kappa: f64,
    front: &Vector3<f64>,
    max_draws: usize,
    rng: &mut R,
) -> Result<Vector3<f64>> {
    for _ in 0..max_draws {
        let r = sample_vmf(m, kappa, rng)?;
        if r.dot(front) > 0.0 {
            return Ok(r);
        }
    }
    Err(Error::HemisphereRejection(max_draws))
}

/// Uniform draw on the sphere (the `κ → 0` limit).
pub fn sample_uniform_sphere<R: Rng + ?Sized>(rng: &mut R) -> Vector3<f64> {
    let z: f64 = 2.0 * rng.random::<f64>() - 1.0;
    let psi = 2.0 * PI * rng.random::<f64>();
    let s = (1.0 - z * z).max(0.0).sqrt();
    Vector3::new(s * psi.cos(), s * psi.sin(), z)
}

/// Concentration scaled with the inverse square of range, `κ0 (ρ0/ρ)²`, capped at `kappa_max`.
pub fn kappa_from_range(rho: f64, kappa0: f64, rho0: f64, kappa_max: f64) -> f64 {
    (kappa0 * (rho0 / rho).powi(2)).min(kappa_max)
}
