//! LOS and single-bounce NLOS path terms and their per-module frequency responses.

use nalgebra::{DVector, Vector3};
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::io::Write;
use std::path::Path;

use super::scenario::{ScatterScenario, Scatterer};
use crate::error::{Error, Result};
use crate::geometry::{
    module_phase_offset, patch_gain, point_to_aod, steering_unchecked, Aod, CarrierConfig, ModuleLayout, SectorGeometry,
    SPEED_OF_LIGHT,
};

/// Amplitude law of a single-bounce path.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NlosModel {
    /// Bistatic radar equation `λ0 √σ / ((4π)^{3/2} d1 d2)`.
    #[default]
    Bistatic,
    /// Mirror-like reflection `λ0 / (4π (d1 + d2))`, the free-space amplitude over the unfolded path.
    Specular,
}

/// `|γ|` for hop lengths `d1` (BS to scatterer) and `d2` (scatterer to user).
pub fn nlos_amplitude(model: NlosModel, d1: f64, d2: f64, rcs_m2: f64, lambda0: f64) -> f64 {
    match model {
        NlosModel::Bistatic => lambda0 * rcs_m2.sqrt() / ((4.0 * PI).powf(1.5) * d1 * d2),
        NlosModel::Specular => lambda0 / (4.0 * PI * (d1 + d2)),
    }
}

/// Free-space power gain `(λ0 / 4πd)²`.
pub fn free_space_gain(d: f64, lambda0: f64) -> f64 {
    (lambda0 / (4.0 * PI * d)).powi(2)
}

/// One propagation path leaving the RIS toward `aod`. `gain` already contains the element
/// amplitude `√E`, the path amplitude and any reflection phase.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathTerm {
    pub aod: Aod,
    pub gain: Complex64,
    pub delay: f64,
}

impl PathTerm {
    /// Complex path coefficient at `f`, including the module displacement phase.
    pub fn coefficient(&self, p_l: [f64; 3], f: f64, carrier: &CarrierConfig) -> Complex64 {
        self.gain * Complex64::from_polar(1.0, -2.0 * PI * f * self.delay) * module_phase_offset(self.aod, p_l, f, carrier)
    }

    /// Steering factors `(a(sin φ), a(sin θ))` at `f`.
    pub fn steering(&self, n_p: usize, f: f64, carrier: &CarrierConfig) -> (DVector<Complex64>, DVector<Complex64>) {
        let r = carrier.ratio(f);
        (steering_unchecked(n_p, self.aod.phi.sin(), r), steering_unchecked(n_p, self.aod.theta.sin(), r))
    }

    /// `coefficient · vec(A(φ,θ; f))`, column-major with the azimuth index fastest.
    pub fn vector(&self, n_p: usize, p_l: [f64; 3], f: f64, carrier: &CarrierConfig) -> DVector<Complex64> {
        let c = self.coefficient(p_l, f, carrier);
        let (ax, az) = self.steering(n_p, f, carrier);
        DVector::from_fn(n_p * n_p, |idx, _| c * ax[idx % n_p] * az[idx / n_p])
    }
}

/// LOS geometry of one user.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LosInfo {
    pub aod: Aod,
    pub distance: f64,
    /// Linear free-space power gain `L`.
    pub path_loss: f64,
    pub delay: f64,
}

impl LosInfo {
    pub fn path_loss_db(&self) -> f64 {
        -10.0 * self.path_loss.log10()
    }
}

/// LOS path toward a ground-frame user position.
pub fn los_path(user: [f64; 3], sector: &SectorGeometry, carrier: &CarrierConfig) -> Result<(PathTerm, LosInfo)> {
    let offset = Vector3::from(user) - sector.bs_position();
    let u = point_to_aod(&offset, sector)?;
    let l = free_space_gain(u.distance, carrier.lambda0());
    let delay = u.distance / SPEED_OF_LIGHT;
    let amp = (l * patch_gain(u.aod.phi, u.aod.theta)).sqrt();
    Ok((
        PathTerm { aod: u.aod, gain: Complex64::new(amp, 0.0), delay },
        LosInfo { aod: u.aod, distance: u.distance, path_loss: l, delay },
    ))
}

/// Single-bounce path via `scatterer` with reflection phase `phase` (radians).
pub fn nlos_path(scatterer: &Scatterer, user: [f64; 3], model: NlosModel, phase: f64, carrier: &CarrierConfig) -> Result<PathTerm> {
    let d1 = scatterer.distance;
    let d2 = (Vector3::from(user) - Vector3::from(scatterer.position)).norm();
    if d1 <= 0.0 || d2 <= 0.0 {
        return Err(Error::ZeroDistance);
    }
    let amp = nlos_amplitude(model, d1, d2, scatterer.rcs_m2, carrier.lambda0()) * patch_gain(scatterer.aod.phi, scatterer.aod.theta).sqrt();
    Ok(PathTerm { aod: scatterer.aod, gain: Complex64::from_polar(amp, phase), delay: (d1 + d2) / SPEED_OF_LIGHT })
}

/// LOS channel vector of module `l` at `f`.
pub fn los_channel(
    user: [f64; 3],
    sector: &SectorGeometry,
    layout: &ModuleLayout,
    l: usize,
    f: f64,
    n_p: usize,
    carrier: &CarrierConfig,
) -> Result<DVector<Complex64>> {
    let (p, _) = los_path(user, sector, carrier)?;
    Ok(p.vector(n_p, layout.positions[l], f, carrier))
}

/// NLOS channel vector of module `l` at `f` through one scatterer.
#[allow(clippy::too_many_arguments)]
pub fn nlos_channel(
    scatterer: &Scatterer,
    user: [f64; 3],
    model: NlosModel,
    phase: f64,
    layout: &ModuleLayout,
    l: usize,
    f: f64,
    n_p: usize,
    carrier: &CarrierConfig,
) -> Result<DVector<Complex64>> {
    Ok(nlos_path(scatterer, user, model, phase, carrier)?.vector(n_p, layout.positions[l], f, carrier))
}

/// Paths of one user: LOS first, then one term per scatterer in scenario order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UserChannel {
    pub position: [f64; 3],
    pub los: LosInfo,
    pub paths: Vec<PathTerm>,
}

/// Per-drop channel of every user. Vectors are materialised on demand from the path list.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelRealization {
    pub n_p: usize,
    pub layout: ModuleLayout,
    pub carrier: CarrierConfig,
    pub users: Vec<UserChannel>,
    /// Reflection phase per (scatterer, user), row-major by scatterer.
    pub gamma_phases: Vec<f64>,
    pub n_scatterers: usize,
}

impl ChannelRealization {
    pub fn n_users(&self) -> usize {
        self.users.len()
    }

    /// `g_{k,l}(f)`.
    pub fn vector(&self, k: usize, l: usize, f: f64) -> DVector<Complex64> {
        let p_l = self.layout.positions[l];
        let mut g = DVector::zeros(self.n_p * self.n_p);
        for p in &self.users[k].paths {
            g += p.vector(self.n_p, p_l, f, &self.carrier);
        }
        g
    }

    /// Reflection phase of scatterer `s` toward user `k`.
    pub fn gamma_phase(&self, s: usize, k: usize) -> f64 {
        self.gamma_phases[s * self.users.len() + k]
    }

    /// Binary dump: magic `AMCH`, version, then `K, L, N_sub, N_el` as u64 and the entries as
    /// little-endian (re, im) pairs ordered by user, module, subcarrier, element.
    pub fn write_tensor(&self, path: &Path) -> Result<()> {
        let freqs = self.carrier.subcarriers();
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        out.write_all(b"AMCH")?;
        out.write_all(&1u32.to_le_bytes())?;
        for d in [self.users.len(), self.layout.k(), freqs.len(), self.n_p * self.n_p] {
            out.write_all(&(d as u64).to_le_bytes())?;
        }
        for k in 0..self.users.len() {
            for l in 0..self.layout.k() {
                for &f in &freqs {
                    for z in self.vector(k, l, f).iter() {
                        out.write_all(&z.re.to_le_bytes())?;
                        out.write_all(&z.im.to_le_bytes())?;
                    }
                }
            }
        }
        out.flush()?;
        Ok(())
    }
}

/// Build every user's path list. Reflection phases are drawn once per (scatterer, user)
/// from `rng` in scatterer-major order.
#[allow(clippy::too_many_arguments)]
pub fn assemble_channel<R: Rng + ?Sized>(
    users: &[[f64; 3]],
    scenario: &ScatterScenario,
    layout: &ModuleLayout,
    sector: &SectorGeometry,
    carrier: &CarrierConfig,
    n_p: usize,
    model: NlosModel,
    rng: &mut R,
) -> Result<ChannelRealization> {
    let k = users.len();
    let gamma_phases: Vec<f64> = (0..scenario.scatterers.len() * k).map(|_| 2.0 * PI * rng.random::<f64>()).collect();
    let users = users
        .iter()
        .enumerate()
        .map(|(ki, &u)| {
            let (los, info) = los_path(u, sector, carrier)?;
            let mut paths = Vec::with_capacity(1 + scenario.scatterers.len());
            paths.push(los);
            for (s, sc) in scenario.scatterers.iter().enumerate() {
                paths.push(nlos_path(sc, u, model, gamma_phases[s * k + ki], carrier)?);
            }
            Ok(UserChannel { position: u, los: info, paths })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ChannelRealization {
        n_p,
        layout: layout.clone(),
        carrier: carrier.clone(),
        users,
        gamma_phases,
        n_scatterers: scenario.scatterers.len(),
    })
}
