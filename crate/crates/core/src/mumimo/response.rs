//! Per-drop beam responses `g_{k,l}(f_ν)^H diag(vec Ξ_c) T_{l,l}(f_ν) v1` for every user,
//! beam and subcarrier.
//!
//! Scatterer directions are shared by all users, so the beam field is projected once per
//! distinct departure direction and the per-user responses are coefficient-weighted sums.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::amaf_ris::{illumination, PemConfiguration};
use crate::beam_design::BeamCodeword;
use crate::channel::ChannelRealization;
use crate::error::{Error, Result};
use crate::geometry::{steering_unchecked, ArrayGeometry, CarrierConfig, ModuleLayout};
use crate::linalg::SplitMatrix;

/// RIS illumination `T_{l,j}(f_ν) v1` for the zero displacement and, optionally, every
/// displacement occurring in a layout.
#[derive(Clone, Debug)]
pub struct FeedIllumination {
    pub n_p: usize,
    pub freqs: Vec<f64>,
    offsets: Vec<[f64; 3]>,
    maps: Vec<Vec<DMatrix<Complex64>>>,
}

impl FeedIllumination {
    /// Own-module illumination only.
    pub fn own(geom: &ArrayGeometry, pem: &PemConfiguration, carrier: &CarrierConfig) -> Result<Self> {
        let freqs = carrier.subcarriers();
        let maps = vec![illumination(geom, pem, [0.0; 3], carrier, &freqs)?];
        Ok(FeedIllumination { n_p: geom.n_p, freqs, offsets: vec![[0.0; 3]], maps })
    }

    /// Own-module illumination plus every cross-module displacement of `layout`.
    pub fn with_layout(geom: &ArrayGeometry, pem: &PemConfiguration, layout: &ModuleLayout, carrier: &CarrierConfig) -> Result<Self> {
        let mut out = Self::own(geom, pem, carrier)?;
        for l in 0..layout.k() {
            for j in 0..layout.k() {
                let d = layout.offset(l, j);
                if out.index_of(d).is_none() {
                    out.maps.push(illumination(geom, pem, d, carrier, &out.freqs)?);
                    out.offsets.push(d);
                }
            }
        }
        Ok(out)
    }

    fn index_of(&self, offset: [f64; 3]) -> Option<usize> {
        self.offsets.iter().position(|o| o.iter().zip(&offset).all(|(a, b)| (a - b).abs() <= 1e-9))
    }

    pub fn own_maps(&self) -> &[DMatrix<Complex64>] {
        &self.maps[0]
    }

    /// Illumination of the RIS displaced by `offset` from the feeding AMAF.
    pub fn maps(&self, offset: [f64; 3]) -> Option<&[DMatrix<Complex64>]> {
        self.index_of(offset).map(|i| self.maps[i].as_slice())
    }
}

/// Beam fields `Ξ_c ⊙ U1(f_ν)` of a fixed beam list, computed once per run.
#[derive(Clone, Debug)]
pub struct BeamFields {
    pub beam_ids: Vec<usize>,
    pub freqs: Vec<f64>,
    pub n_p: usize,
    fields: Vec<Vec<SplitMatrix>>,
}

impl BeamFields {
    pub fn new(beams: &[&BeamCodeword], illum: &FeedIllumination) -> Result<Self> {
        let n = illum.n_p;
        if beams.iter().any(|b| b.xi.nrows() != n || b.xi.ncols() != n) {
            return Err(Error::Dimension("codeword size differs from the illumination grid".into()));
        }
        let fields = beams
            .iter()
            .map(|b| illum.own_maps().iter().map(|u| SplitMatrix::from_complex(&b.xi.component_mul(u))).collect())
            .collect();
        Ok(BeamFields { beam_ids: beams.iter().map(|b| b.id).collect(), freqs: illum.freqs.clone(), n_p: n, fields })
    }

    pub fn n_beams(&self) -> usize {
        self.beam_ids.len()
    }
}

/// `h[k][c][ν]` with beam `c` radiated from module `module_of_beam[c]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BeamResponses {
    pub n_users: usize,
    pub n_beams: usize,
    pub n_sub: usize,
    pub module_of_beam: Vec<usize>,
    h: Vec<Complex64>,
}

impl BeamResponses {
    pub fn get(&self, k: usize, c: usize, nu: usize) -> Complex64 {
        self.h[(k * self.n_beams + c) * self.n_sub + nu]
    }

    /// Responses of user `k` to beam `c` over all subcarriers.
    pub fn row(&self, k: usize, c: usize) -> &[Complex64] {
        let s = (k * self.n_beams + c) * self.n_sub;
        &self.h[s..s + self.n_sub]
    }
}

/// Project every beam field onto the conjugate steering factors of each departure direction.
/// Row `d` of the result for beam `c` and subcarrier `ν` is `conj(a_x)^T X conj(a_z)`.
fn project(fields: &BeamFields, aods: &[crate::geometry::Aod], carrier: &CarrierConfig) -> Vec<Vec<Vec<Complex64>>> {
    let n = fields.n_p;
    let d = aods.len();
    let mut out = vec![vec![vec![Complex64::new(0.0, 0.0); d]; fields.freqs.len()]; fields.n_beams()];
    for (nu, &f) in fields.freqs.iter().enumerate() {
        let r = carrier.ratio(f);
        let mut axh = DMatrix::zeros(d, n);
        let mut azc = DMatrix::zeros(d, n);
        for (p, a) in aods.iter().enumerate() {
            let ax = steering_unchecked(n, a.phi.sin(), r);
            let az = steering_unchecked(n, a.theta.sin(), r);
            for i in 0..n {
                axh[(p, i)] = ax[i].conj();
                azc[(p, i)] = az[i].conj();
            }
        }
        let axh = SplitMatrix::from_complex(&axh);
        for c in 0..fields.n_beams() {
            let m = axh.mul(&fields.fields[c][nu]);
            for p in 0..d {
                let mut acc = Complex64::new(0.0, 0.0);
                for j in 0..n {
                    acc += m.get(p, j) * azc[(p, j)];
                }
                out[c][nu][p] = acc;
            }
        }
    }
    out
}

/// Responses of every user to every beam on every subcarrier for one drop.
pub fn beam_responses(ch: &ChannelRealization, fields: &BeamFields, module_of_beam: &[usize]) -> Result<BeamResponses> {
    let k = ch.n_users();
    let c = fields.n_beams();
    let s = ch.n_scatterers;
    if module_of_beam.len() != c {
        return Err(Error::Dimension("module_of_beam must have one entry per beam".into()));
    }
    if module_of_beam.iter().any(|&m| m >= ch.layout.k()) {
        return Err(Error::invalid("beam mapped to a module outside the layout"));
    }
    if ch.n_p != fields.n_p || ch.carrier.subcarriers() != fields.freqs {
        return Err(Error::Dimension("channel and beam fields use different grids".into()));
    }
    // distinct directions: one LOS per user, then the shared scatterers
    let mut aods: Vec<_> = ch.users.iter().map(|u| u.paths[0].aod).collect();
    if let Some(u0) = ch.users.first() {
        aods.extend(u0.paths[1..].iter().map(|p| p.aod));
    }
    let proj = project(fields, &aods, &ch.carrier);
    let n_sub = fields.freqs.len();
    let mut h = vec![Complex64::new(0.0, 0.0); k * c * n_sub];
    for (ki, user) in ch.users.iter().enumerate() {
        debug_assert_eq!(user.paths.len(), 1 + s);
        for (ci, &m) in module_of_beam.iter().enumerate() {
            let p_l = ch.layout.positions[m];
            for (nu, &f) in fields.freqs.iter().enumerate() {
                let row = &proj[ci][nu];
                let mut acc = user.paths[0].coefficient(p_l, f, &ch.carrier).conj() * row[ki];
                for (si, p) in user.paths[1..].iter().enumerate() {
                    acc += p.coefficient(p_l, f, &ch.carrier).conj() * row[k + si];
                }
                h[(ki * c + ci) * n_sub + nu] = acc;
            }
        }
    }
    Ok(BeamResponses { n_users: k, n_beams: c, n_sub, module_of_beam: module_of_beam.to_vec(), h })
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::amaf_ris::design_pem;
    use crate::beam_design::compose_codeword;
    use crate::channel::{assemble_channel, generate_scenario, NlosModel, ScenarioSpec};
    use crate::geometry::{ground_point, Aod, SectorGeometry};
    use nalgebra::DVector;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn pencil(id: usize, n: usize, az_deg: f64, el_deg: f64, pem: &PemConfiguration, c: &CarrierConfig) -> BeamCodeword {
        let ones = DVector::from_element(n, Complex64::new(1.0, 0.0));
        let steer = Aod::new(az_deg.to_radians(), el_deg.to_radians());
        BeamCodeword { id, level: 1, parent: None, steer, w_x: ones.clone(), w_z: ones.clone(), xi: compose_codeword(&ones, &ones, steer, pem, c).unwrap() }
    }

    #[test]
    fn matches_explicit_inner_product() {
        let c = CarrierConfig::new(100e9, 5e9, 3).unwrap();
        let geom = ArrayGeometry::new(6, 2, 0.2).unwrap();
        let pem = design_pem(&geom, &c).unwrap();
        let layout = ModuleLayout::stacked(2, 6, 1.0).unwrap();
        let sector = SectorGeometry::default();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let sc = generate_scenario(&ScenarioSpec::scenario2(), &sector, &mut rng).unwrap();
        let users: Vec<[f64; 3]> = [(30.0, 10.0), (70.0, -35.0), (90.0, 45.0)]
            .iter()
            .map(|&(r, a): &(f64, f64)| {
                let p = ground_point(r, a.to_radians());
                [p[0], p[1], 0.0]
            })
            .collect();
        let ch = assemble_channel(&users, &sc, &layout, &sector, &c, 6, NlosModel::Specular, &mut rng).unwrap();
        let beams = [pencil(1, 6, -20.0, 5.0, &pem, &c), pencil(2, 6, 25.0, 15.0, &pem, &c)];
        let refs: Vec<&BeamCodeword> = beams.iter().collect();
        let illum = FeedIllumination::own(&geom, &pem, &c).unwrap();
        let fields = BeamFields::new(&refs, &illum).unwrap();
        let r = beam_responses(&ch, &fields, &[0, 1]).unwrap();
        for k in 0..3 {
            for (ci, b) in beams.iter().enumerate() {
                for (nu, &f) in c.subcarriers().iter().enumerate() {
                    let g = ch.vector(k, ci, f);
                    let x = b.xi.component_mul(&illum.own_maps()[nu]);
                    let explicit: Complex64 = g.iter().zip(x.iter()).map(|(a, b)| a.conj() * b).sum();
                    assert!((explicit - r.get(k, ci, nu)).norm() <= 1e-10 * explicit.norm());
                }
            }
        }
    }
}
