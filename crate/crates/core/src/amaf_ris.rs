//! Near-field AMAF to RIS propagation, principal eigenmode feeding and crosstalk.
//!
//! The AMAF of every module sits co-axially in front of its RIS at distance `F`, facing it.
//! RIS element `(i, j)` of module `l` is at `p_l + (x_i, 0, z_j)` and AMAF element `(a, b)` of
//! module `j` at `p_j + (x_a, F, z_b)`, all in half-wavelength units of the RIS frame.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::{patch_gain, ArrayGeometry, CarrierConfig, ModuleLayout};

/// Propagation matrix from the AMAF of module `j` to the RIS of module `l` at offset `f`.
#[derive(Clone, Debug, PartialEq)]
pub struct NearFieldMatrix {
    /// `n_p² × n_a²`, rows in column-major RIS element order.
    pub entries: DMatrix<Complex64>,
    pub l: usize,
    pub j: usize,
    pub f: f64,
}

/// Entries of `T_{l,j}(f)` for a module displacement `offset = p_l − p_j`.
pub fn near_field_entries(
    geom: &ArrayGeometry,
    offset: [f64; 3],
    carrier: &CarrierConfig,
    f: f64,
) -> Result<DMatrix<Complex64>> {
    geom.validate()?;
    let ris = ArrayGeometry::centred_grid(geom.n_p);
    let amaf = ArrayGeometry::centred_grid(geom.n_a);
    let half = 0.5 * carrier.lambda0();
    let lambda = carrier.lambda(f);
    let focal = geom.focal_distance();
    let mut t = DMatrix::zeros(ris.len(), amaf.len());
    for (a, pa) in amaf.iter().enumerate() {
        for (p, pp) in ris.iter().enumerate() {
            // AMAF element to RIS element, in half-wavelength units
            let dx = pp[0] + offset[0] - pa[0];
            let dy = offset[1] - focal;
            let dz = pp[1] + offset[2] - pa[1];
            let d_units = (dx * dx + dy * dy + dz * dz).sqrt();
            if d_units == 0.0 {
                return Err(Error::ZeroDistance);
            }
            // both patches face each other along y; their local boresight component is |dy|
            let az = dx.atan2(dy.abs());
            let el = (dz / d_units).clamp(-1.0, 1.0).asin();
            let g_tx = patch_gain(az, el);
            let g_rx = patch_gain(-az, el);
            let d = d_units * half;
            let amp = lambda / (4.0 * PI * d) * (g_tx * g_rx).sqrt();
            t[(p, a)] = Complex64::from_polar(amp, -2.0 * PI * d / lambda);
        }
    }
    Ok(t)
}

pub fn near_field_matrix(
    geom: &ArrayGeometry,
    layout: &ModuleLayout,
    carrier: &CarrierConfig,
    l: usize,
    j: usize,
    f: f64,
) -> Result<NearFieldMatrix> {
    if l >= layout.k() || j >= layout.k() {
        return Err(Error::invalid(format!("module index out of range ({l}, {j}) for K = {}", layout.k())));
    }
    let entries = near_field_entries(geom, layout.offset(l, j), carrier, f)?;
    Ok(NearFieldMatrix { entries, l, j, f })
}

/// Feeder vector and the RIS illumination it induces.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PemConfiguration {
    pub n_p: usize,
    /// Unit-norm AMAF excitation `v1`.
    pub feeder: DVector<Complex64>,
    /// Singular values of `T(0)`, descending.
    pub singular_values: Vec<f64>,
    /// `u1(0) = T(0) v1`.
    pub ris_profile0: DVector<Complex64>,
    /// `e^{−j∠u1(0)}` as an `n_p × n_p` array.
    pub conj_phase: DMatrix<Complex64>,
    /// `|U1|`, real nonnegative `n_p × n_p`.
    pub amp_profile: DMatrix<f64>,
    /// Set when the two leading singular values coincide within 1e-6 relative.
    pub degenerate: bool,
}

impl PemConfiguration {
    pub fn sigma1(&self) -> f64 {
        self.singular_values[0]
    }

    /// `u1(f) = T(f) v1` for any propagation matrix built on the same geometry.
    pub fn ris_profile(&self, t: &NearFieldMatrix) -> DVector<Complex64> {
        &t.entries * &self.feeder
    }

    /// `u1(f)` reshaped to the RIS grid.
    pub fn ris_array(&self, t: &NearFieldMatrix) -> DMatrix<Complex64> {
        let u = self.ris_profile(t);
        DMatrix::from_column_slice(self.n_p, self.n_p, u.as_slice())
    }
}

/// Principal eigenmode of `T(0)`.
pub fn pem(t0: &NearFieldMatrix, n_p: usize) -> Result<PemConfiguration> {
    let t = &t0.entries;
    if t.nrows() != n_p * n_p {
        return Err(Error::Dimension(format!("T has {} rows, expected {}", t.nrows(), n_p * n_p)));
    }
    let svd = t.clone().svd(false, true);
    let v_t = svd.v_t.ok_or_else(|| Error::Format("SVD did not return V".into()))?;
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let singular_values: Vec<f64> = order.iter().map(|&k| svd.singular_values[k]).collect();
    let top = order[0];
    let mut feeder: DVector<Complex64> = v_t.row(top).transpose().map(|z| z.conj());
    // fix the global phase: first entry real and nonnegative
    let first = feeder[0];
    if first.norm() > 0.0 {
        let rot = Complex64::from_polar(1.0, -first.arg());
        feeder *= rot;
    }
    feeder /= Complex64::new(feeder.norm(), 0.0);
    let degenerate = singular_values.len() > 1
        && (singular_values[0] - singular_values[1]).abs() <= 1e-6 * singular_values[0];
    if degenerate {
        log::warn!("degenerate principal eigenmode: sigma1 = {}, sigma2 = {}", singular_values[0], singular_values[1]);
    }
    let u0 = t * &feeder;
    let conj_phase = DMatrix::from_iterator(n_p, n_p, u0.iter().map(|z| Complex64::from_polar(1.0, -z.arg())));
    let amp_profile = DMatrix::from_iterator(n_p, n_p, u0.iter().map(|z| z.norm()));
    Ok(PemConfiguration { n_p, feeder, singular_values, ris_profile0: u0, conj_phase, amp_profile, degenerate })
}

/// Compute `T(0)` for the reference module and its eigenmode.
pub fn design_pem(geom: &ArrayGeometry, carrier: &CarrierConfig) -> Result<PemConfiguration> {
    let t0 = near_field_matrix(geom, &ModuleLayout::single(), carrier, 0, 0, 0.0)?;
    pem(&t0, geom.n_p)
}

/// RIS illumination `T_{l,j}(f) v1` on a frequency grid for a fixed module displacement,
/// each as an `n_p × n_p` array.
pub fn illumination(
    geom: &ArrayGeometry,
    pem: &PemConfiguration,
    offset: [f64; 3],
    carrier: &CarrierConfig,
    freqs: &[f64],
) -> Result<Vec<DMatrix<Complex64>>> {
    freqs
        .par_iter()
        .map(|&f| {
            let t = near_field_entries(geom, offset, carrier, f)?;
            let u = t * &pem.feeder;
            Ok(DMatrix::from_column_slice(geom.n_p, geom.n_p, u.as_slice()))
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LeakageEntry {
    pub l: usize,
    pub j: usize,
    /// Leakage in dB per frequency of the grid.
    pub per_freq_db: Vec<f64>,
    pub worst_db: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NextReport {
    pub freqs: Vec<f64>,
    pub entries: Vec<LeakageEntry>,
}

impl NextReport {
    pub fn worst_db(&self) -> f64 {
        self.entries.iter().map(|e| e.worst_db).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn within(&self, threshold_db: f64) -> bool {
        self.entries.is_empty() || self.worst_db() <= threshold_db
    }
}

/// Power leaked from each AMAF into every other module's RIS, relative to its own RIS.
pub fn next_report(
    geom: &ArrayGeometry,
    layout: &ModuleLayout,
    carrier: &CarrierConfig,
    pem: &PemConfiguration,
    freqs: &[f64],
) -> Result<NextReport> {
    let mut own = Vec::with_capacity(freqs.len());
    for &f in freqs {
        let t = near_field_entries(geom, [0.0; 3], carrier, f)?;
        own.push((t * &pem.feeder).norm_squared());
    }
    let k = layout.k();
    let pairs: Vec<(usize, usize)> = (0..k).flat_map(|l| (0..k).map(move |j| (l, j))).filter(|(l, j)| l != j).collect();
    let entries = pairs
        .par_iter()
        .map(|&(l, j)| {
            let mut per = Vec::with_capacity(freqs.len());
            for (n, &f) in freqs.iter().enumerate() {
                let t = near_field_entries(geom, layout.offset(l, j), carrier, f)?;
                per.push(10.0 * ((t * &pem.feeder).norm_squared() / own[n]).log10());
            }
            let worst_db = per.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            Ok(LeakageEntry { l, j, per_freq_db: per, worst_db })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(NextReport { freqs: freqs.to_vec(), entries })
}

const CACHE_MAGIC: &[u8; 4] = b"AMRT";
const CACHE_VERSION: u32 = 1;

/// Header identifying a cached propagation matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct CacheKey {
    pub n_p: u32,
    pub n_a: u32,
    pub focal_ratio: f64,
    pub f0: f64,
    pub f: f64,
    pub offset: [f64; 3],
}

impl CacheKey {
    pub fn new(geom: &ArrayGeometry, carrier: &CarrierConfig, offset: [f64; 3], f: f64) -> Self {
        CacheKey { n_p: geom.n_p as u32, n_a: geom.n_a as u32, focal_ratio: geom.focal_ratio, f0: carrier.f0, f, offset }
    }

    fn file_name(&self) -> String {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let mut eat = |b: &[u8]| {
            for x in b {
                h ^= *x as u64;
                h = h.wrapping_mul(0x100_0000_01b3);
            }
        };
        eat(&self.n_p.to_le_bytes());
        eat(&self.n_a.to_le_bytes());
        for v in [self.focal_ratio, self.f0, self.f, self.offset[0], self.offset[1], self.offset[2]] {
            eat(&v.to_le_bytes());
        }
        format!("t_{h:016x}.bin")
    }
}

pub fn write_cache(path: &Path, key: &CacheKey, t: &DMatrix<Complex64>) -> Result<()> {
    let mut buf = Vec::with_capacity(64 + 16 * t.len());
    buf.extend_from_slice(CACHE_MAGIC);
    buf.extend_from_slice(&CACHE_VERSION.to_le_bytes());
    buf.extend_from_slice(&key.n_p.to_le_bytes());
    buf.extend_from_slice(&key.n_a.to_le_bytes());
    for v in [key.focal_ratio, key.f0, key.f, key.offset[0], key.offset[1], key.offset[2]] {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    for z in t.iter() {
        buf.extend_from_slice(&z.re.to_le_bytes());
        buf.extend_from_slice(&z.im.to_le_bytes());
    }
    let mut file = std::fs::File::create(path)?;
    file.write_all(&buf)?;
    Ok(())
}

pub fn read_cache(path: &Path, key: &CacheKey) -> Result<DMatrix<Complex64>> {
    let mut buf = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut buf)?;
    let header = 4 + 4 * 3 + 8 * 6;
    if buf.len() < header || &buf[..4] != CACHE_MAGIC {
        return Err(Error::Format("not a propagation-matrix cache file".into()));
    }
    let u32_at = |o: usize| u32::from_le_bytes(buf[o..o + 4].try_into().unwrap());
    let f64_at = |o: usize| f64::from_le_bytes(buf[o..o + 8].try_into().unwrap());
    if u32_at(4) != CACHE_VERSION {
        return Err(Error::Format(format!("cache version {} unsupported", u32_at(4))));
    }
    let found = CacheKey {
        n_p: u32_at(8),
        n_a: u32_at(12),
        focal_ratio: f64_at(16),
        f0: f64_at(24),
        f: f64_at(32),
        offset: [f64_at(40), f64_at(48), f64_at(56)],
    };
    if &found != key {
        return Err(Error::Format("cache header does not match the requested geometry".into()));
    }
    let rows = (key.n_p * key.n_p) as usize;
    let cols = (key.n_a * key.n_a) as usize;
    if buf.len() != header + 16 * rows * cols {
        return Err(Error::Format("truncated cache file".into()));
    }
    let data = buf[header..]
        .chunks_exact(16)
        .map(|c| Complex64::new(f64::from_le_bytes(c[..8].try_into().unwrap()), f64::from_le_bytes(c[8..].try_into().unwrap())));
    Ok(DMatrix::from_iterator(rows, cols, data))
}

/// Load `T` for the given displacement from `dir`, computing and storing it on a miss.
pub fn cached_entries(
    dir: &Path,
    geom: &ArrayGeometry,
    offset: [f64; 3],
    carrier: &CarrierConfig,
    f: f64,
) -> Result<DMatrix<Complex64>> {
    let key = CacheKey::new(geom, carrier, offset, f);
    let path = dir.join(key.file_name());
    if path.exists() {
        match read_cache(&path, &key) {
            Ok(t) => return Ok(t),
            Err(e) => log::warn!("ignoring cache {}: {e}", path.display()),
        }
    }
    let t = near_field_entries(geom, offset, carrier, f)?;
    std::fs::create_dir_all(dir)?;
    write_cache(&path, &key, &t)?;
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn small() -> (ArrayGeometry, CarrierConfig) {
        (ArrayGeometry::new(8, 2, 0.3).unwrap(), CarrierConfig::default())
    }

    fn rot90(i: usize, j: usize, n: usize) -> (usize, usize) {
        (n - 1 - j, i)
    }

    #[test]
    fn dihedral_symmetry() {
        let (g, c) = small();
        let t = near_field_entries(&g, [0.0; 3], &c, 0.0).unwrap();
        let (np, na) = (g.n_p, g.n_a);
        for ja in 0..na {
            for ia in 0..na {
                let (ra, sa) = rot90(ia, ja, na);
                for jp in 0..np {
                    for ip in 0..np {
                        let (rp, sp) = rot90(ip, jp, np);
                        let x = t[(ip + np * jp, ia + na * ja)];
                        let y = t[(rp + np * sp, ra + na * sa)];
                        assert!((x - y).norm() <= 1e-12 * x.norm());
                        // mirror in x
                        let y = t[(np - 1 - ip + np * jp, na - 1 - ia + na * ja)];
                        assert!((x - y).norm() <= 1e-12 * x.norm());
                    }
                }
            }
        }
    }

    #[test]
    fn doubling_distance_halves_amplitude() {
        let c = CarrierConfig::default();
        // with a single element pair the only change is d -> 2d at fixed angles
        let near = near_field_entries(&ArrayGeometry::new(2, 1, 1.0).unwrap(), [0.0; 3], &c, 0.0).unwrap();
        let far = near_field_entries(&ArrayGeometry::new(2, 1, 2.0).unwrap(), [0.0; 3], &c, 0.0).unwrap();
        for p in 0..4 {
            let d1 = (0.25f64 + 0.25 + 4.0).sqrt();
            let d2 = (0.25f64 + 0.25 + 16.0).sqrt();
            // angles differ here, so strip the element gains before comparing
            let g1 = 4.0 * (2.0 / d1).powi(2);
            let g2 = 4.0 * (4.0 / d2).powi(2);
            assert_relative_eq!(near[(p, 0)].norm() / g1 * d1, far[(p, 0)].norm() / g2 * d2, max_relative = 1e-12);
        }
    }

    #[test]
    fn svd_variational_property() {
        let (g, c) = small();
        let t0 = near_field_matrix(&g, &ModuleLayout::single(), &c, 0, 0, 0.0).unwrap();
        let p = pem(&t0, g.n_p).unwrap();
        assert_relative_eq!(p.feeder.norm(), 1.0, max_relative = 1e-12);
        assert_relative_eq!(p.ris_profile0.norm(), p.sigma1(), max_relative = 1e-9);
        // no basis vector or fixed combination does better
        let m = g.amaf_elements();
        for k in 0..m {
            let mut b = DVector::zeros(m);
            b[k] = Complex64::new(1.0, 0.0);
            assert!((&t0.entries * &b).norm() <= p.sigma1() * (1.0 + 1e-12));
        }
        assert!(p.feeder[0].im.abs() < 1e-14 && p.feeder[0].re >= 0.0);
        let aligned = p.conj_phase.component_mul(&DMatrix::from_column_slice(g.n_p, g.n_p, p.ris_profile0.as_slice()));
        for z in aligned.iter() {
            assert!(z.im.abs() <= 1e-10 * p.sigma1());
            assert!(z.re >= 0.0);
        }
    }

    #[test]
    fn global_phase_invariance() {
        let (g, c) = small();
        let t0 = near_field_matrix(&g, &ModuleLayout::single(), &c, 0, 0, 0.0).unwrap();
        let p = pem(&t0, g.n_p).unwrap();
        let rotated = &t0.entries * (&p.feeder * Complex64::from_polar(1.0, 1.234));
        for (a, b) in rotated.iter().zip(p.amp_profile.iter()) {
            assert_relative_eq!(a.norm(), *b, max_relative = 1e-12);
        }
    }

    #[test]
    fn congruent_modules() {
        let (g, c) = small();
        let layout = ModuleLayout::stacked(3, g.n_p, 1.0).unwrap();
        let a = near_field_matrix(&g, &layout, &c, 0, 0, 1e9).unwrap();
        let b = near_field_matrix(&g, &layout, &c, 2, 2, 1e9).unwrap();
        assert_eq!(a.entries, b.entries);
        assert!(near_field_matrix(&g, &layout, &c, 3, 0, 0.0).is_err());
    }

    #[test]
    fn single_module_report_is_empty() {
        let (g, c) = small();
        let p = design_pem(&g, &c).unwrap();
        let r = next_report(&g, &ModuleLayout::single(), &c, &p, &[0.0]).unwrap();
        assert!(r.entries.is_empty());
        assert!(r.within(-30.0));
    }

    #[test]
    fn cache_roundtrip_and_mismatch() {
        let (g, c) = small();
        let dir = tempfile::tempdir().unwrap();
        let a = cached_entries(dir.path(), &g, [0.0, 0.0, 9.0], &c, 1e9).unwrap();
        let b = cached_entries(dir.path(), &g, [0.0, 0.0, 9.0], &c, 1e9).unwrap();
        assert_eq!(a, b);
        assert_eq!(a, near_field_entries(&g, [0.0, 0.0, 9.0], &c, 1e9).unwrap());
        let key = CacheKey::new(&g, &c, [0.0, 0.0, 9.0], 1e9);
        let path = dir.path().join(key.file_name());
        let other = CacheKey::new(&g, &c, [0.0, 0.0, 9.0], 2e9);
        assert!(matches!(read_cache(&path, &other), Err(Error::Format(_))));
    }
}
