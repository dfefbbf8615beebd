//! Array geometry, element pattern, steering vectors and the ground/RIS frame transforms.
//!
//! Frames. The ground frame `S1` has X lateral, Y along the sector bisector and Z up, with the
//! base station at `(0, 0, h)`. The RIS frame `S2` shares the X axis and is tilted down by the
//! mechanical downtilt: its boresight `ĵ = (0, cos α, −sin α)` and its vertical axis
//! `ẑ = (0, sin α, cos α)`.
//!
//! Angles. A unit direction `d` with `S2` coordinates `(d_x, d_y, d_z)` has azimuth
//! `φ = atan2(d_x, d_y)` and elevation `θ = asin(d_z)`, so that
//! `d = (cos θ sin φ, cos θ cos φ, sin θ)`. Boresight is `(0, 0)`.
//!
//! Array coordinates are expressed in units of half the carrier wavelength. RIS element
//! `(i, j)` sits at lateral offset `i` along X and vertical offset `j` along Z; flattened
//! vectors use column-major order, index `i + n_p * j`.

use nalgebra::{DMatrix, DVector, Vector3};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, PI};

use crate::error::{Error, Result};

/// Speed of light in vacuum (m/s).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CarrierConfig {
    /// Carrier frequency (Hz).
    pub f0: f64,
    /// Signal bandwidth (Hz).
    pub bandwidth: f64,
    /// Number of OFDM subcarriers simulated.
    pub n_sub: usize,
}

impl Default for CarrierConfig {
    fn default() -> Self {
        CarrierConfig { f0: 100e9, bandwidth: 5e9, n_sub: 64 }
    }
}

impl CarrierConfig {
    pub fn new(f0: f64, bandwidth: f64, n_sub: usize) -> Result<Self> {
        let c = CarrierConfig { f0, bandwidth, n_sub };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.f0 > 0.0 && self.f0.is_finite()) {
            return Err(Error::invalid("carrier frequency must be positive"));
        }
        if !(self.bandwidth >= 0.0 && self.bandwidth < 2.0 * self.f0) {
            return Err(Error::invalid("bandwidth must be in [0, 2 f0)"));
        }
        if self.n_sub == 0 {
            return Err(Error::invalid("n_sub must be at least 1"));
        }
        Ok(())
    }

    pub fn lambda0(&self) -> f64 {
        SPEED_OF_LIGHT / self.f0
    }

    /// Wavelength at baseband offset `f`.
    pub fn lambda(&self, f: f64) -> f64 {
        SPEED_OF_LIGHT / (self.f0 + f)
    }

    /// `λ0 / λ` at baseband offset `f`.
    pub fn ratio(&self, f: f64) -> f64 {
        (self.f0 + f) / self.f0
    }

    /// Baseband subcarrier offsets, uniform over `[−W/2, W/2]` including both endpoints.
    /// A single subcarrier sits at 0.
    pub fn subcarriers(&self) -> Vec<f64> {
        if self.n_sub == 1 {
            return vec![0.0];
        }
        let step = self.bandwidth / (self.n_sub - 1) as f64;
        (0..self.n_sub)
            .map(|k| {
                // mirror the upper half so the grid is exactly symmetric in floating point
                let m = self.n_sub - 1 - k;
                if k <= m {
                    -0.5 * self.bandwidth + k as f64 * step
                } else {
                    0.5 * self.bandwidth - m as f64 * step
                }
            })
            .collect()
    }

    /// True when beam squint over the band is negligible (`W ≤ 0.05 f0`).
    pub fn squint_safe(&self) -> bool {
        self.bandwidth <= 0.05 * self.f0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArrayGeometry {
    /// RIS side length in elements.
    pub n_p: usize,
    /// AMAF side length in elements.
    pub n_a: usize,
    /// Focal distance over RIS aperture.
    pub focal_ratio: f64,
}

impl Default for ArrayGeometry {
    fn default() -> Self {
        ArrayGeometry { n_p: 40, n_a: 2, focal_ratio: 0.2 }
    }
}

impl ArrayGeometry {
    pub fn new(n_p: usize, n_a: usize, focal_ratio: f64) -> Result<Self> {
        let g = ArrayGeometry { n_p, n_a, focal_ratio };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_a == 0 || self.n_p <= self.n_a {
            return Err(Error::invalid("need n_p > n_a >= 1"));
        }
        if !(self.focal_ratio > 0.0 && self.focal_ratio.is_finite()) {
            return Err(Error::invalid("focal ratio must be positive"));
        }
        Ok(())
    }

    /// Element spacing in metres (half the carrier wavelength).
    pub fn spacing(&self, carrier: &CarrierConfig) -> f64 {
        0.5 * carrier.lambda0()
    }

    /// RIS aperture side `D` in half-wavelength units.
    pub fn aperture(&self) -> f64 {
        self.n_p as f64
    }

    /// AMAF to RIS distance `F` in half-wavelength units.
    pub fn focal_distance(&self) -> f64 {
        self.focal_ratio * self.aperture()
    }

    pub fn ris_elements(&self) -> usize {
        self.n_p * self.n_p
    }

    pub fn amaf_elements(&self) -> usize {
        self.n_a * self.n_a
    }

    /// Centred element offsets of an `n × n` square array, column-major.
    pub(crate) fn centred_grid(n: usize) -> Vec<[f64; 2]> {
        let c = 0.5 * (n as f64 - 1.0);
        let mut out = Vec::with_capacity(n * n);
        for j in 0..n {
            for i in 0..n {
                out.push([i as f64 - c, j as f64 - c]);
            }
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SectorGeometry {
    /// Base station height (m).
    pub bs_height: f64,
    /// Mechanical downtilt (rad).
    pub downtilt: f64,
    pub range_min: f64,
    pub range_max: f64,
    pub az_min: f64,
    pub az_max: f64,
}

impl Default for SectorGeometry {
    fn default() -> Self {
        SectorGeometry {
            bs_height: 20.0,
            downtilt: 37.37_f64.to_radians(),
            range_min: 17.0,
            range_max: 100.0,
            az_min: (-60.0_f64).to_radians(),
            az_max: 60.0_f64.to_radians(),
        }
    }
}

impl SectorGeometry {
    pub fn validate(&self) -> Result<()> {
        if !(self.range_min > 0.0 && self.range_min < self.range_max) {
            return Err(Error::invalid("need 0 < range_min < range_max"));
        }
        if !(self.downtilt > 0.0 && self.downtilt < FRAC_PI_2) {
            return Err(Error::invalid("downtilt must lie in (0, pi/2)"));
        }
        if !(self.bs_height > 0.0) {
            return Err(Error::invalid("bs_height must be positive"));
        }
        if !(self.az_min < self.az_max) {
            return Err(Error::invalid("need az_min < az_max"));
        }
        Ok(())
    }

    /// RIS frame axes expressed in the ground frame.
    pub fn axes(&self) -> [Vector3<f64>; 3] {
        let (s, c) = self.downtilt.sin_cos();
        [Vector3::new(1.0, 0.0, 0.0), Vector3::new(0.0, c, -s), Vector3::new(0.0, s, c)]
    }

    pub fn bs_position(&self) -> Vector3<f64> {
        Vector3::new(0.0, 0.0, self.bs_height)
    }

    /// Ground range of the boresight ray's ground intercept.
    pub fn boresight_ground_range(&self) -> f64 {
        self.bs_height / self.downtilt.tan()
    }

    pub fn to_ris_frame(&self, v: &Vector3<f64>) -> Vector3<f64> {
        let [x, y, z] = self.axes();
        Vector3::new(v.dot(&x), v.dot(&y), v.dot(&z))
    }

    pub fn to_ground_frame(&self, v: &Vector3<f64>) -> Vector3<f64> {
        let [x, y, z] = self.axes();
        x * v.x + y * v.y + z * v.z
    }

    /// Whether a ground point (polar) lies inside the sector annulus.
    pub fn contains(&self, ground_range: f64, az: f64) -> bool {
        ground_range >= self.range_min
            && ground_range <= self.range_max
            && az >= self.az_min
            && az <= self.az_max
    }
}

/// Ground point from polar coordinates (range, azimuth from the sector bisector).
pub fn ground_point(ground_range: f64, az: f64) -> [f64; 2] {
    [ground_range * az.sin(), ground_range * az.cos()]
}

/// Angle of departure in the RIS frame.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aod {
    pub phi: f64,
    pub theta: f64,
}

impl Aod {
    pub fn new(phi: f64, theta: f64) -> Self {
        Aod { phi, theta }
    }

    /// Unit plane-wave normal in the RIS frame.
    pub fn unit(&self) -> Vector3<f64> {
        let (sp, cp) = self.phi.sin_cos();
        let (st, ct) = self.theta.sin_cos();
        Vector3::new(ct * sp, ct * cp, st)
    }

    /// Angles of a direction given in the RIS frame (need not be normalised).
    pub fn from_vector(v: &Vector3<f64>) -> Result<Self> {
        let n = v.norm();
        if n == 0.0 {
            return Err(Error::ZeroDistance);
        }
        let u = v / n;
        Ok(Aod { phi: u.x.atan2(u.y), theta: u.z.clamp(-1.0, 1.0).asin() })
    }

    pub fn in_front(&self) -> bool {
        self.phi.abs() < FRAC_PI_2 && self.theta.abs() < FRAC_PI_2
    }
}

/// Angles and slant distance from the BS to a user on the ground.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct UserAod {
    pub aod: Aod,
    pub distance: f64,
}

/// Element power pattern `4 (cos az cos el)²`, zero outside the front hemisphere.
pub fn patch_gain(az: f64, el: f64) -> f64 {
    if az.abs() >= FRAC_PI_2 || el.abs() >= FRAC_PI_2 {
        return 0.0;
    }
    let c = az.cos() * el.cos();
    4.0 * c * c
}

/// Element gain toward a direction given by its RIS-frame unit vector. Equal to
/// `patch_gain` of the corresponding angles, `4 d_y²` on the front side.
pub fn patch_gain_dir(d: &Vector3<f64>) -> f64 {
    let n2 = d.norm_squared();
    if d.y <= 0.0 || n2 == 0.0 {
        return 0.0;
    }
    4.0 * d.y * d.y / n2
}

/// Uniform linear array steering vector `exp(−jπ (λ0/λ) n sin ψ)`, `n = 0..n_p`.
pub fn ula_steering(n_p: usize, sin_psi: f64, f: f64, carrier: &CarrierConfig) -> Result<DVector<Complex64>> {
    if !(sin_psi.abs() <= 1.0) {
        return Err(Error::invalid(format!("|sin psi| = {} exceeds 1", sin_psi.abs())));
    }
    Ok(steering_unchecked(n_p, sin_psi, carrier.ratio(f)))
}

pub(crate) fn steering_unchecked(n_p: usize, sin_psi: f64, ratio: f64) -> DVector<Complex64> {
    let k = -PI * ratio * sin_psi;
    DVector::from_iterator(n_p, (0..n_p).map(|n| Complex64::from_polar(1.0, k * n as f64)))
}

/// Separable planar steering array, entry `(i, j) = a_i(φ0) a_j(θ0)`.
pub fn planar_steering(n_p: usize, aod: Aod, f: f64, carrier: &CarrierConfig) -> DMatrix<Complex64> {
    let r = carrier.ratio(f);
    let ax = steering_unchecked(n_p, aod.phi.sin(), r);
    let az = steering_unchecked(n_p, aod.theta.sin(), r);
    &ax * az.transpose()
}

/// Map a ground point to its angles in the RIS frame and its 3D distance from the BS.
pub fn ground_to_aod(user_xy: [f64; 2], sector: &SectorGeometry) -> Result<UserAod> {
    let v = Vector3::new(user_xy[0], user_xy[1], 0.0) - sector.bs_position();
    point_to_aod(&v, sector)
}

/// Angles and distance of an arbitrary BS-relative ground-frame offset.
pub fn point_to_aod(offset: &Vector3<f64>, sector: &SectorGeometry) -> Result<UserAod> {
    let d = offset.norm();
    if d == 0.0 {
        return Err(Error::ZeroDistance);
    }
    let local = sector.to_ris_frame(offset);
    if local.y <= 0.0 {
        return Err(Error::BehindArray);
    }
    Ok(UserAod { aod: Aod::from_vector(&local)?, distance: d })
}

/// Ground point hit by the ray leaving the RIS at the given angles, if it reaches the ground.
pub fn aod_to_ground(aod: Aod, sector: &SectorGeometry) -> Option<[f64; 2]> {
    let dir = sector.to_ground_frame(&aod.unit());
    if dir.z >= 0.0 {
        return None;
    }
    let t = sector.bs_height / -dir.z;
    Some([t * dir.x, t * dir.y])
}

/// Relative phase of module `p_l` (half-wavelength units, RIS frame) for a plane wave
/// leaving toward `aod`.
pub fn module_phase_offset(aod: Aod, p_l: [f64; 3], f: f64, carrier: &CarrierConfig) -> Complex64 {
    let n = aod.unit();
    let dot = n.x * p_l[0] + n.y * p_l[1] + n.z * p_l[2];
    Complex64::from_polar(1.0, -PI * carrier.ratio(f) * dot)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModuleLayout {
    /// Module centres in the RIS frame, half-wavelength units.
    pub positions: Vec<[f64; 3]>,
}

impl ModuleLayout {
    pub fn new(positions: Vec<[f64; 3]>) -> Result<Self> {
        if positions.is_empty() {
            return Err(Error::invalid("layout needs at least one module"));
        }
        for (a, pa) in positions.iter().enumerate() {
            for pb in &positions[a + 1..] {
                if pa == pb {
                    return Err(Error::invalid("module positions must be distinct"));
                }
            }
        }
        Ok(ModuleLayout { positions })
    }

    pub fn single() -> Self {
        ModuleLayout { positions: vec![[0.0; 3]] }
    }

    /// `k` modules stacked vertically with `gap` half-wavelengths between apertures.
    pub fn stacked(k: usize, n_p: usize, gap: f64) -> Result<Self> {
        if k == 0 {
            return Err(Error::invalid("module count must be at least 1"));
        }
        if !(gap >= 0.0) {
            return Err(Error::invalid("module gap must be nonnegative"));
        }
        let pitch = n_p as f64 + gap;
        Self::new((0..k).map(|l| [0.0, 0.0, l as f64 * pitch]).collect())
    }

    pub fn k(&self) -> usize {
        self.positions.len()
    }

    /// Displacement of module `l` relative to module `j`.
    pub fn offset(&self, l: usize, j: usize) -> [f64; 3] {
        let (a, b) = (self.positions[l], self.positions[j]);
        [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn carrier() -> CarrierConfig {
        CarrierConfig::default()
    }

    #[test]
    fn patch_gain_values() {
        assert_eq!(patch_gain(0.0, 0.0), 4.0);
        assert_eq!(patch_gain(FRAC_PI_2, 0.0), 0.0);
        assert_abs_diff_eq!(patch_gain(PI / 3.0, 0.0), 1.0, epsilon = 1e-12);
        assert_eq!(patch_gain(0.1, -2.0), 0.0);
    }

    #[test]
    fn patch_gain_is_axisymmetric() {
        for &(phi, theta) in &[(0.3, 0.2), (-0.7, 0.4), (1.1, -0.3)] {
            let d = Aod::new(phi, theta).unit();
            assert_abs_diff_eq!(patch_gain(phi, theta), 4.0 * d.y * d.y, epsilon = 1e-12);
            assert_abs_diff_eq!(patch_gain_dir(&(d * 3.0)), patch_gain(phi, theta), epsilon = 1e-12);
        }
    }

    #[test]
    fn steering_small_cases() {
        let c = carrier();
        let a = ula_steering(4, 0.5, 0.0, &c).unwrap();
        let want = [Complex64::new(1.0, 0.0), Complex64::new(0.0, -1.0), Complex64::new(-1.0, 0.0), Complex64::new(0.0, 1.0)];
        for (x, y) in a.iter().zip(want) {
            assert_abs_diff_eq!((x - y).norm(), 0.0, epsilon = 1e-12);
        }
        let ones = ula_steering(40, 0.0, 2.5e9, &c).unwrap();
        assert!(ones.iter().all(|z| *z == Complex64::new(1.0, 0.0)));
        assert!(ula_steering(4, 1.2, 0.0, &c).is_err());
    }

    #[test]
    fn steering_band_edge_matches_scalar_loop() {
        let c = carrier();
        let a = ula_steering(40, 0.2, 2.5e9, &c).unwrap();
        for n in 0..40 {
            let ph = -PI * (102.5 / 100.0) * 0.2 * n as f64;
            let want = Complex64::new(ph.cos(), ph.sin());
            assert_abs_diff_eq!((a[n] - want).norm(), 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn planar_steering_entries() {
        let c = carrier();
        let a = planar_steering(40, Aod::new(0.3, -0.2), 0.0, &c);
        let ax = ula_steering(40, 0.3f64.sin(), 0.0, &c).unwrap();
        let az = ula_steering(40, (-0.2f64).sin(), 0.0, &c).unwrap();
        for j in 0..40 {
            for i in 0..40 {
                assert_abs_diff_eq!((a[(i, j)] - ax[i] * az[j]).norm(), 0.0, epsilon = 1e-12);
            }
        }
        let b = planar_steering(8, Aod::new(0.0, 0.0), 0.0, &c);
        assert!(b.iter().all(|z| (z - Complex64::new(1.0, 0.0)).norm() == 0.0));
        // zero elevation: every column equals a(φ)
        let d = planar_steering(8, Aod::new(0.4, 0.0), 0.0, &c);
        for j in 0..8 {
            assert_eq!(d.column(j), d.column(0));
        }
    }

    #[test]
    fn boresight_intercept() {
        let s = SectorGeometry::default();
        let r = s.boresight_ground_range();
        assert_abs_diff_eq!(r, 26.19, epsilon = 0.01);
        let u = ground_to_aod(ground_point(r, 0.0), &s).unwrap();
        assert_abs_diff_eq!(u.aod.phi, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(u.aod.theta, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn nadir_limit() {
        let s = SectorGeometry::default();
        let u = ground_to_aod([0.0, 1e-6], &s).unwrap();
        assert_abs_diff_eq!(u.aod.theta, -(FRAC_PI_2 - s.downtilt), epsilon = 1e-6);
    }

    #[test]
    fn rotation_matrix_oracle() {
        let s = SectorGeometry::default();
        let (r, az) = (100.0, 60.0f64.to_radians());
        let u = ground_to_aod(ground_point(r, az), &s).unwrap();
        // rotate about X by +α so the tilted boresight maps onto +Y
        let a = s.downtilt;
        let rot = nalgebra::Matrix3::new(1.0, 0.0, 0.0, 0.0, a.cos(), -a.sin(), 0.0, a.sin(), a.cos());
        let v = Vector3::new(r * az.sin(), r * az.cos(), -s.bs_height);
        let w = rot * v;
        let n = w.norm();
        assert_abs_diff_eq!(u.distance, n, epsilon = 1e-9);
        assert_abs_diff_eq!(u.aod.phi, (w.x / n).atan2(w.y / n), epsilon = 1e-12);
        assert_abs_diff_eq!(u.aod.theta, (w.z / n).asin(), epsilon = 1e-12);
    }

    #[test]
    fn behind_plane_rejected() {
        let s = SectorGeometry::default();
        // far behind the BS: ĵ·v < 0
        assert!(matches!(ground_to_aod([0.0, -50.0], &s), Err(Error::BehindArray)));
    }

    #[test]
    fn module_phase() {
        let c = carrier();
        assert_eq!(module_phase_offset(Aod::new(0.3, 0.1), [0.0; 3], 0.0, &c), Complex64::new(1.0, 0.0));
        let z = module_phase_offset(Aod::new(0.0, 0.0), [5.0, 0.0, 42.0], 1e9, &c);
        assert_abs_diff_eq!((z - Complex64::new(1.0, 0.0)).norm(), 0.0, epsilon = 1e-12);
        let z = module_phase_offset(Aod::new(0.3, 0.1), [0.0, 0.0, 42.0], 0.0, &c);
        let ph = -PI * 42.0 * 0.1f64.sin();
        assert_abs_diff_eq!((z - Complex64::from_polar(1.0, ph)).norm(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn subcarrier_grid() {
        let c = carrier();
        let f = c.subcarriers();
        assert_eq!(f.len(), 64);
        assert_eq!(f[0], -2.5e9);
        assert_eq!(f[63], 2.5e9);
        for k in 0..64 {
            assert_eq!(f[k], -f[63 - k]);
        }
        assert!(c.squint_safe());
        assert_eq!(CarrierConfig::new(100e9, 5e9, 1).unwrap().subcarriers(), vec![0.0]);
    }

    #[test]
    fn layouts() {
        let l = ModuleLayout::stacked(3, 40, 1.0).unwrap();
        assert_eq!(l.positions[2], [0.0, 0.0, 82.0]);
        assert_eq!(l.offset(0, 1), [0.0, 0.0, -41.0]);
        assert!(ModuleLayout::new(vec![[0.0; 3], [0.0; 3]]).is_err());
        assert!(ArrayGeometry::new(2, 2, 0.2).is_err());
    }

    proptest! {
        #[test]
        fn steering_unit_modulus(n in 1usize..64, s in -1.0f64..1.0, f in -2.5e9f64..2.5e9) {
            let a = ula_steering(n, s, f, &CarrierConfig::default()).unwrap();
            for z in a.iter() {
                prop_assert!((z.norm() - 1.0).abs() < 1e-12);
            }
        }

        #[test]
        fn ground_roundtrip(r in 17.0f64..100.0, az in -1.0472f64..1.0472) {
            let s = SectorGeometry::default();
            let p = ground_point(r, az);
            let u = ground_to_aod(p, &s).unwrap();
            let q = aod_to_ground(u.aod, &s).unwrap();
            prop_assert!((p[0] - q[0]).abs() < 1e-9 && (p[1] - q[1]).abs() < 1e-9);
        }

        #[test]
        fn planar_is_outer_product(phi in -1.2f64..1.2, theta in -1.2f64..1.2) {
            let c = CarrierConfig::default();
            let a = planar_steering(12, Aod::new(phi, theta), 1e9, &c);
            let x = ula_steering(12, phi.sin(), 1e9, &c).unwrap();
            let z = ula_steering(12, theta.sin(), 1e9, &c).unwrap();
            for j in 0..12 { for i in 0..12 {
                prop_assert!((a[(i, j)] - x[i] * z[j]).norm() < 1e-12);
            }}
        }
    }
}
