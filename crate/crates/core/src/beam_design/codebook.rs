//! Codeword composition and hierarchical codebooks.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::Path;

use super::ppf::ppf;
use super::remez::{binary_phase_profile, BinarySpec, RemezOptions};
use super::sca::{sca_flat_top, ScaOptions, ScaOutcome};
use crate::amaf_ris::PemConfiguration;
use crate::error::{Error, Result};
use crate::geometry::{planar_steering, Aod, CarrierConfig};

/// How one 1D phase vector of a codeword is designed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ShapeSpec {
    /// Uniform phase (PEM pencil beam in this dimension).
    Pencil,
    /// Signs of an equiripple lowpass with main lobe `±half_width`.
    Binary { half_width: f64 },
    /// Binary profile widened by the phase perturbation function.
    Ppf { binary_half_width: f64, rho: f64, pi_exp: f64 },
    /// `Ppf` initializer refined by the flat-top optimisation over `±half_width`.
    FlatTop { half_width: f64, binary_half_width: f64, rho: f64, pi_exp: f64 },
}

impl ShapeSpec {
    fn key(&self) -> String {
        serde_json::to_string(self).expect("shape spec serialises")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CodewordSpec {
    pub id: usize,
    pub level: usize,
    #[serde(default)]
    pub parent: Option<usize>,
    pub steer_az_deg: f64,
    pub steer_el_deg: f64,
    pub shape_x: ShapeSpec,
    pub shape_z: ShapeSpec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HierarchySpec {
    pub version: u32,
    #[serde(default = "default_transition")]
    pub binary_transition: f64,
    pub codewords: Vec<CodewordSpec>,
}

fn default_transition() -> f64 {
    0.1
}

fn flat(half_width: f64) -> ShapeSpec {
    // initializer widening grows roughly linearly with the requested width
    let rho = (10.0 * half_width - 0.5).max(0.0);
    ShapeSpec::FlatTop { half_width, binary_half_width: 0.1, rho, pi_exp: 1.0 }
}

fn deg_of_sin(s: f64) -> f64 {
    s.asin().to_degrees()
}

impl HierarchySpec {
    /// Three-level nested codebook covering the default ±60°, 17-100 m sector: azimuth
    /// halves, then an inner and an outer column per half, then a near and a far leaf per
    /// column. The near/far split sits lower in the outer columns, where the sector edge
    /// bends towards negative elevation.
    pub fn default_three_level() -> Self {
        let mut cw = Vec::new();
        let mut push = |id: usize, level: usize, parent: Option<usize>, u: f64, v: f64, sx: ShapeSpec, sz: ShapeSpec| {
            cw.push(CodewordSpec { id, level, parent, steer_az_deg: deg_of_sin(u), steer_el_deg: deg_of_sin(v), shape_x: sx, shape_z: sz });
        };
        push(101, 1, None, -0.42, 0.0, flat(0.42), flat(0.42));
        push(102, 1, None, 0.42, 0.0, flat(0.42), flat(0.42));
        push(201, 2, Some(101), -0.63, 0.0, flat(0.21), flat(0.42));
        push(202, 2, Some(101), -0.21, 0.0, flat(0.21), flat(0.42));
        push(203, 2, Some(102), 0.21, 0.0, flat(0.21), flat(0.42));
        push(204, 2, Some(102), 0.63, 0.0, flat(0.21), flat(0.42));
        // leaves, ids 1..=8
        push(1, 3, Some(201), -0.63, -0.20, flat(0.21), flat(0.21));
        push(2, 3, Some(202), -0.21, -0.01, flat(0.21), flat(0.21));
        push(3, 3, Some(203), 0.21, -0.01, flat(0.21), flat(0.21));
        push(4, 3, Some(204), 0.63, -0.20, flat(0.21), flat(0.21));
        push(5, 3, Some(201), -0.63, 0.18, flat(0.21), flat(0.18));
        push(6, 3, Some(204), 0.63, 0.18, flat(0.21), flat(0.18));
        push(7, 3, Some(202), -0.21, 0.32, flat(0.21), flat(0.12));
        push(8, 3, Some(203), 0.21, 0.32, flat(0.21), flat(0.12));
        HierarchySpec { version: 1, binary_transition: 0.1, codewords: cw }
    }

    /// Ids of codewords without children, ascending.
    pub fn leaf_ids(&self) -> Vec<usize> {
        let parents: HashSet<usize> = self.codewords.iter().filter_map(|c| c.parent).collect();
        let mut ids: Vec<usize> = self.codewords.iter().map(|c| c.id).filter(|id| !parents.contains(id)).collect();
        ids.sort_unstable();
        ids
    }

    /// Ids, parents and levels form a forest with levels increasing by one.
    pub fn validate(&self) -> Result<()> {
        let mut by_id: HashMap<usize, &CodewordSpec> = HashMap::new();
        for c in &self.codewords {
            if by_id.insert(c.id, c).is_some() {
                return Err(Error::DuplicateCodeword(c.id));
            }
        }
        for c in &self.codewords {
            match c.parent {
                Some(p) => {
                    let parent = by_id.get(&p).ok_or(Error::UnknownParent { child: c.id, parent: p })?;
                    if parent.level + 1 != c.level {
                        return Err(Error::invalid(format!("codeword {} at level {} has parent at level {}", c.id, c.level, parent.level)));
                    }
                }
                None if c.level != 1 => {
                    return Err(Error::invalid(format!("codeword {} at level {} has no parent", c.id, c.level)));
                }
                None => {}
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BeamCodeword {
    pub id: usize,
    pub level: usize,
    pub parent: Option<usize>,
    pub steer: Aod,
    pub w_x: DVector<Complex64>,
    pub w_z: DVector<Complex64>,
    /// RIS phase-control array `Ξ`.
    pub xi: DMatrix<Complex64>,
}

/// `Ξ = A(φ_c, θ_c; 0) ⊙ (w_x × w_z) ⊙ W̃`.
pub fn compose_codeword(
    w_x: &DVector<Complex64>,
    w_z: &DVector<Complex64>,
    steer: Aod,
    pem: &PemConfiguration,
    carrier: &CarrierConfig,
) -> Result<DMatrix<Complex64>> {
    let n = pem.n_p;
    if w_x.len() != n || w_z.len() != n {
        return Err(Error::Dimension(format!("shaping vectors must have length {n}")));
    }
    let shaping = w_x * w_z.transpose();
    Ok(planar_steering(n, steer, 0.0, carrier).component_mul(&shaping).component_mul(&pem.conj_phase))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShapeReport {
    pub spec: ShapeSpec,
    pub sca: Option<ScaOutcome>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Codebook {
    pub codewords: Vec<BeamCodeword>,
}

impl Codebook {
    pub fn new(codewords: Vec<BeamCodeword>) -> Result<Self> {
        let mut seen = std::collections::HashSet::new();
        for c in &codewords {
            if !seen.insert(c.id) {
                return Err(Error::DuplicateCodeword(c.id));
            }
        }
        for c in &codewords {
            if let Some(p) = c.parent {
                if !seen.contains(&p) {
                    return Err(Error::UnknownParent { child: c.id, parent: p });
                }
            }
        }
        Ok(Codebook { codewords })
    }

    pub fn len(&self) -> usize {
        self.codewords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codewords.is_empty()
    }

    pub fn get(&self, id: usize) -> Option<&BeamCodeword> {
        self.codewords.iter().find(|c| c.id == id)
    }

    pub fn max_level(&self) -> usize {
        self.codewords.iter().map(|c| c.level).max().unwrap_or(0)
    }

    /// Codewords at a level, ordered by id.
    pub fn level(&self, level: usize) -> Vec<&BeamCodeword> {
        let mut v: Vec<&BeamCodeword> = self.codewords.iter().filter(|c| c.level == level).collect();
        v.sort_by_key(|c| c.id);
        v
    }

    /// Codewords without children, ordered by id.
    pub fn leaves(&self) -> Vec<&BeamCodeword> {
        let parents: HashSet<usize> = self.codewords.iter().filter_map(|c| c.parent).collect();
        let mut v: Vec<&BeamCodeword> = self.codewords.iter().filter(|c| !parents.contains(&c.id)).collect();
        v.sort_by_key(|c| c.id);
        v
    }

    /// Codebook restricted to its leaves.
    pub fn leaf_codebook(&self) -> Codebook {
        Codebook { codewords: self.leaves().into_iter().cloned().map(|mut c| { c.parent = None; c }).collect() }
    }

    pub fn children(&self, id: usize) -> Vec<&BeamCodeword> {
        let mut v: Vec<&BeamCodeword> = self.codewords.iter().filter(|c| c.parent == Some(id)).collect();
        v.sort_by_key(|c| c.id);
        v
    }

    /// Whether `id` descends from `ancestor` (or equals it).
    pub fn descends_from(&self, id: usize, ancestor: usize) -> bool {
        let mut cur = Some(id);
        while let Some(c) = cur {
            if c == ancestor {
                return true;
            }
            cur = self.get(c).and_then(|cw| cw.parent);
        }
        false
    }

    pub fn to_file(&self) -> CodebookFile {
        CodebookFile {
            version: CODEBOOK_VERSION,
            codewords: self
                .codewords
                .iter()
                .map(|c| CodewordRecord {
                    id: c.id,
                    level: c.level,
                    parent: c.parent,
                    steer_az_deg: c.steer.phi.to_degrees(),
                    steer_el_deg: c.steer.theta.to_degrees(),
                    phase_x: c.w_x.iter().map(|z| z.arg()).collect(),
                    phase_z: c.w_z.iter().map(|z| z.arg()).collect(),
                })
                .collect(),
        }
    }

    pub fn from_file(file: &CodebookFile, pem: &PemConfiguration, carrier: &CarrierConfig) -> Result<Self> {
        if file.version != CODEBOOK_VERSION {
            return Err(Error::Format(format!("codebook version {} unsupported", file.version)));
        }
        let cws = file
            .codewords
            .iter()
            .map(|r| {
                let w_x = DVector::from_iterator(r.phase_x.len(), r.phase_x.iter().map(|p| Complex64::from_polar(1.0, *p)));
                let w_z = DVector::from_iterator(r.phase_z.len(), r.phase_z.iter().map(|p| Complex64::from_polar(1.0, *p)));
                let steer = Aod::new(r.steer_az_deg.to_radians(), r.steer_el_deg.to_radians());
                let xi = compose_codeword(&w_x, &w_z, steer, pem, carrier)?;
                Ok(BeamCodeword { id: r.id, level: r.level, parent: r.parent, steer, w_x, w_z, xi })
            })
            .collect::<Result<Vec<_>>>()?;
        Codebook::new(cws)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(&self.to_file())?)?;
        Ok(())
    }

    pub fn load(path: &Path, pem: &PemConfiguration, carrier: &CarrierConfig) -> Result<Self> {
        let file: CodebookFile = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        Self::from_file(&file, pem, carrier)
    }
}

pub const CODEBOOK_VERSION: u32 = 1;

/// Serialised codebook: angles in degrees, phases in radians.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CodebookFile {
    pub version: u32,
    pub codewords: Vec<CodewordRecord>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CodewordRecord {
    pub id: usize,
    pub level: usize,
    pub parent: Option<usize>,
    pub steer_az_deg: f64,
    pub steer_el_deg: f64,
    pub phase_x: Vec<f64>,
    pub phase_z: Vec<f64>,
}

/// Design one 1D phase vector for taper `q`.
pub fn design_shape(spec: &ShapeSpec, q: &[f64], transition: f64, sca: &ScaOptions) -> Result<(DVector<Complex64>, Option<ScaOutcome>)> {
    let n = q.len();
    let binary = |hw: f64| -> Result<DVector<Complex64>> {
        let b = binary_phase_profile(n, &BinarySpec::for_half_width(hw, transition), &RemezOptions::default())?;
        Ok(DVector::from_iterator(n, b.into_iter().map(|s| Complex64::new(s, 0.0))))
    };
    match spec {
        ShapeSpec::Pencil => Ok((DVector::from_element(n, Complex64::new(1.0, 0.0)), None)),
        ShapeSpec::Binary { half_width } => Ok((binary(*half_width)?, None)),
        ShapeSpec::Ppf { binary_half_width, rho, pi_exp } => {
            Ok((binary(*binary_half_width)?.component_mul(&ppf(n, *rho, *pi_exp)), None))
        }
        ShapeSpec::FlatTop { half_width, binary_half_width, rho, pi_exp } => {
            let w0 = binary(*binary_half_width)?.component_mul(&ppf(n, *rho, *pi_exp));
            let out = sca_flat_top(q, (-half_width, *half_width), &w0, sca)?;
            Ok((out.w.clone(), Some(out)))
        }
    }
}

/// Build every codeword of `spec`, designing each distinct shape once (in parallel).
pub fn build_codebook(
    spec: &HierarchySpec,
    pem: &PemConfiguration,
    q: &[f64],
    carrier: &CarrierConfig,
    sca: &ScaOptions,
) -> Result<(Codebook, Vec<ShapeReport>)> {
    spec.validate()?;
    let mut unique: BTreeMap<String, ShapeSpec> = BTreeMap::new();
    for c in &spec.codewords {
        unique.insert(c.shape_x.key(), c.shape_x.clone());
        unique.insert(c.shape_z.key(), c.shape_z.clone());
    }
    let designs: Vec<(String, DVector<Complex64>, ShapeReport)> = unique
        .into_par_iter()
        .map(|(k, s)| {
            let (w, out) = design_shape(&s, q, spec.binary_transition, sca)?;
            Ok((k, w, ShapeReport { spec: s, sca: out }))
        })
        .collect::<Result<Vec<_>>>()?;
    let lookup: HashMap<&str, &DVector<Complex64>> = designs.iter().map(|(k, w, _)| (k.as_str(), w)).collect();
    let cws = spec
        .codewords
        .iter()
        .map(|c| {
            let w_x = lookup[c.shape_x.key().as_str()].clone();
            let w_z = lookup[c.shape_z.key().as_str()].clone();
            let steer = Aod::new(c.steer_az_deg.to_radians(), c.steer_el_deg.to_radians());
            let xi = compose_codeword(&w_x, &w_z, steer, pem, carrier)?;
            Ok(BeamCodeword { id: c.id, level: c.level, parent: c.parent, steer, w_x, w_z, xi })
        })
        .collect::<Result<Vec<_>>>()?;
    let reports = designs.into_iter().map(|(_, _, r)| r).collect();
    Ok((Codebook::new(cws)?, reports))
}
