//! Scatterer cluster specifications and geometrically consistent scatterer placement.
//!
//! Cluster mean directions are given either as a ground anchor point (range, azimuth,
//! height) or directly as RIS-frame angles. The built-in scenarios place anchors to
//! approximate a suburban layout (seven street-level clusters) and an urban layout adding
//! four elevated clusters near the cell edge.

use nalgebra::Vector3;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::vmf::{kappa_from_range, sample_vmf_front};
use crate::error::{Error, Result};
use crate::geometry::{ground_point, point_to_aod, Aod, SectorGeometry};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ClusterMean {
    /// Point the mean direction at a ground-referenced location.
    Anchor { ground_range: f64, ground_az_deg: f64, height: f64 },
    /// RIS-frame angles with the range used for the concentration law.
    Direction { az_deg: f64, el_deg: f64, range: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KappaSpec {
    Fixed { kappa: f64 },
    /// Derived from the cluster range through the scenario's concentration law.
    FromRange,
}

/// How concentration scales with cluster range `ρ`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KappaLaw {
    /// `κ0 (ρ0/ρ)²`.
    InverseSquare,
    /// `κ0 (ρ/ρ0)²`: constant physical cluster size, so the angular spread shrinks with range.
    SolidAngle,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterSpec {
    pub mean: ClusterMean,
    pub kappa: KappaSpec,
    pub count: usize,
    /// Scatterer heights are drawn uniformly in this range (m).
    pub height_range: [f64; 2],
    /// Radar cross-section used by the bistatic amplitude model (m²).
    #[serde(default = "default_rcs")]
    pub rcs_m2: f64,
    /// Elevated clusters are exempt from the mean-direction elevation bound.
    #[serde(default)]
    pub elevated: bool,
}

fn default_rcs() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub label: String,
    pub clusters: Vec<ClusterSpec>,
    pub kappa0: f64,
    /// Reference range for `kappa0`; defaults to the slant range of the boresight ground point.
    #[serde(default)]
    pub rho0: Option<f64>,
    pub kappa_max: f64,
    pub kappa_law: KappaLaw,
    /// Bounds on street-level mean directions in the RIS frame (degrees).
    pub max_mean_el_deg: f64,
    pub max_mean_az_deg: f64,
    /// Accepted scatterers lie within this ground range of the BS (beyond `range_max`).
    pub range_margin: f64,
    pub max_placement_attempts: usize,
}

impl ScenarioSpec {
    fn base(label: &str, clusters: Vec<ClusterSpec>) -> Self {
        ScenarioSpec {
            label: label.to_string(),
            clusters,
            kappa0: 390.0,
            rho0: None,
            kappa_max: 4000.0,
            kappa_law: KappaLaw::InverseSquare,
            max_mean_el_deg: 26.0,
            max_mean_az_deg: 60.0,
            range_margin: 25.0,
            max_placement_attempts: 10_000,
        }
    }

    pub fn los() -> Self {
        Self::base("los", Vec::new())
    }

    /// Suburban layout: seven street-level clusters, 15 scatterers, boresight area left clear.
    pub fn scenario1() -> Self {
        let street = |r: f64, az: f64, count: usize| ClusterSpec {
            mean: ClusterMean::Anchor { ground_range: r, ground_az_deg: az, height: 1.5 },
            kappa: KappaSpec::FromRange,
            count,
            height_range: [0.5, 2.5],
            rcs_m2: 1.0,
            elevated: false,
        };
        Self::base(
            "scenario1",
            vec![
                street(30.0, -45.0, 2),
                street(60.0, -30.0, 1),
                street(85.0, -12.0, 2),
                street(45.0, 18.0, 3),
                street(75.0, 38.0, 3),
                street(22.0, 50.0, 2),
                street(95.0, 8.0, 2),
            ],
        )
    }

    /// Urban layout: the suburban clusters, two extra scatterers in the central cluster and
    /// four elevated clusters at about 20 m near the cell edge.
    pub fn scenario2() -> Self {
        let mut s = Self::scenario1();
        s.label = "scenario2".into();
        s.clusters[3].count += 2;
        let elevated = |r: f64, az: f64| ClusterSpec {
            mean: ClusterMean::Anchor { ground_range: r, ground_az_deg: az, height: 20.0 },
            kappa: KappaSpec::FromRange,
            count: 1,
            height_range: [18.0, 22.0],
            rcs_m2: 1.0,
            elevated: true,
        };
        s.clusters.extend([elevated(95.0, -50.0), elevated(100.0, -20.0), elevated(100.0, 25.0), elevated(95.0, 52.0)]);
        s
    }

    pub fn builtin(name: &str) -> Result<Self> {
        match name {
            "los" => Ok(Self::los()),
            "scenario1" => Ok(Self::scenario1()),
            "scenario2" => Ok(Self::scenario2()),
            other => Err(Error::invalid(format!("unknown scenario {other:?}"))),
        }
    }

    pub fn total_scatterers(&self) -> usize {
        self.clusters.iter().map(|c| c.count).sum()
    }

    fn reference_range(&self, sector: &SectorGeometry) -> f64 {
        self.rho0.unwrap_or_else(|| {
            let r = sector.boresight_ground_range();
            (r * r + sector.bs_height * sector.bs_height).sqrt()
        })
    }

    fn kappa_for(&self, range: f64, sector: &SectorGeometry) -> f64 {
        let rho0 = self.reference_range(sector);
        match self.kappa_law {
            KappaLaw::InverseSquare => kappa_from_range(range, self.kappa0, rho0, self.kappa_max),
            KappaLaw::SolidAngle => (self.kappa0 * (range / rho0).powi(2)).min(self.kappa_max),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScattererCluster {
    /// Unit mean direction in the RIS frame.
    pub mean_dir: [f64; 3],
    pub mean_aod: Aod,
    pub kappa: f64,
    pub count: usize,
    pub height_range: [f64; 2],
    pub rcs_m2: f64,
    pub elevated: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scatterer {
    pub cluster: usize,
    /// Unit direction from the BS in the RIS frame.
    pub dir: [f64; 3],
    pub aod: Aod,
    /// Position in the ground frame (m).
    pub position: [f64; 3],
    /// BS to scatterer distance (m).
    pub distance: f64,
    pub rcs_m2: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScatterScenario {
    pub label: String,
    pub clusters: Vec<ScattererCluster>,
    pub scatterers: Vec<Scatterer>,
}

impl ScatterScenario {
    pub fn empty(label: &str) -> Self {
        ScatterScenario { label: label.into(), clusters: Vec::new(), scatterers: Vec::new() }
    }
}

/// Resolve cluster means and concentrations, validating the direction bounds.
pub fn resolve_clusters(spec: &ScenarioSpec, sector: &SectorGeometry) -> Result<Vec<ScattererCluster>> {
    spec.clusters
        .iter()
        .enumerate()
        .map(|(ci, c)| {
            if !(c.height_range[0] <= c.height_range[1] && c.height_range[0] >= 0.0) {
                return Err(Error::invalid(format!("cluster {ci}: bad height range")));
            }
            let (aod, range) = match c.mean {
                ClusterMean::Anchor { ground_range, ground_az_deg, height } => {
                    let p = ground_point(ground_range, ground_az_deg.to_radians());
                    let off = Vector3::new(p[0], p[1], height - sector.bs_height);
                    let u = point_to_aod(&off, sector)?;
                    (u.aod, u.distance)
                }
                ClusterMean::Direction { az_deg, el_deg, range } => (Aod::new(az_deg.to_radians(), el_deg.to_radians()), range),
            };
            if !c.elevated && (aod.theta.to_degrees().abs() > spec.max_mean_el_deg + 1e-9 || aod.phi.to_degrees().abs() > spec.max_mean_az_deg + 1e-9) {
                return Err(Error::invalid(format!(
                    "cluster {ci}: mean direction ({:.1}°, {:.1}°) outside the allowed bounds",
                    aod.phi.to_degrees(),
                    aod.theta.to_degrees()
                )));
            }
            if !aod.in_front() {
                return Err(Error::BehindArray);
            }
            let kappa = match c.kappa {
                KappaSpec::Fixed { kappa } => kappa,
                KappaSpec::FromRange => spec.kappa_for(range, sector),
            };
            let m = aod.unit();
            Ok(ScattererCluster {
                mean_dir: [m.x, m.y, m.z],
                mean_aod: aod,
                kappa,
                count: c.count,
                height_range: c.height_range,
                rcs_m2: c.rcs_m2,
                elevated: c.elevated,
            })
        })
        .collect()
}

/// Draw every cluster's scatterers: vMF direction, uniform height, ray/plane intersection.
pub fn generate_scenario<R: Rng + ?Sized>(spec: &ScenarioSpec, sector: &SectorGeometry, rng: &mut R) -> Result<ScatterScenario> {
    let clusters = resolve_clusters(spec, sector)?;
    let front = Vector3::y();
    let max_ground = sector.range_max + spec.range_margin;
    let mut scatterers = Vec::with_capacity(spec.total_scatterers());
    for (ci, c) in clusters.iter().enumerate() {
        let m = Vector3::from(c.mean_dir);
        for _ in 0..c.count {
            let mut placed = None;
            for _ in 0..spec.max_placement_attempts {
                let r = sample_vmf_front(&m, c.kappa, &front, 1000, rng)?;
                let h = c.height_range[0] + (c.height_range[1] - c.height_range[0]) * rng.random::<f64>();
                let d = sector.to_ground_frame(&r);
                let t = (h - sector.bs_height) / d.z;
                if !(t > 0.0 && t.is_finite()) {
                    continue;
                }
                let pos = sector.bs_position() + d * t;
                let ground = (pos.x * pos.x + pos.y * pos.y).sqrt();
                if ground < 1.0 || ground > max_ground {
                    continue;
                }
                let aod = Aod::from_vector(&r)?;
                placed = Some(Scatterer { cluster: ci, dir: [r.x, r.y, r.z], aod, position: [pos.x, pos.y, pos.z], distance: t, rcs_m2: c.rcs_m2 });
                break;
            }
            scatterers.push(placed.ok_or(Error::Placement { cluster: ci, attempts: spec.max_placement_attempts })?);
        }
    }
    Ok(ScatterScenario { label: spec.label.clone(), clusters, scatterers })
}
