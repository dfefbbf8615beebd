//! Ground map of the RSRP-selected leaf beam under pure LOS.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;

use super::monte_carlo::Prepared;
use crate::channel::{assemble_channel, NlosModel, ScatterScenario};
use crate::error::{Error, Result};
use crate::geometry::{aod_to_ground, CarrierConfig};
use crate::harness::config::SystemConfig;
use crate::mumimo::{beam_responses, rsrp_assign, BeamFields, FeedIllumination};

/// Pixels evaluated per batch.
const CHUNK: usize = 512;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BeamMap {
    pub beam_ids: Vec<usize>,
    /// Ground x of the first pixel centre.
    pub x0: f64,
    /// Ground y of the first pixel centre.
    pub y0: f64,
    pub res: f64,
    pub nx: usize,
    pub ny: usize,
    /// Leaf index per pixel, row-major in y; `None` outside the sector.
    pub cells: Vec<Option<usize>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegionReport {
    pub beam_id: usize,
    pub pixels: usize,
    /// 4-connected components of the beam's region.
    pub components: usize,
    /// Leaf selected at the ground point of the beam's steering direction.
    pub footprint_beam: Option<usize>,
}

impl RegionReport {
    pub fn contiguous(&self) -> bool {
        self.components == 1
    }

    pub fn footprint_ok(&self) -> bool {
        self.footprint_beam == Some(self.beam_id)
    }
}

impl BeamMap {
    pub fn center(&self, ix: usize, iy: usize) -> [f64; 2] {
        [self.x0 + ix as f64 * self.res, self.y0 + iy as f64 * self.res]
    }

    pub fn at(&self, ix: usize, iy: usize) -> Option<usize> {
        self.cells[iy * self.nx + ix]
    }

    /// Pixel containing ground point `p`, if on the grid.
    pub fn pixel_of(&self, p: [f64; 2]) -> Option<(usize, usize)> {
        let fx = ((p[0] - self.x0) / self.res).round();
        let fy = ((p[1] - self.y0) / self.res).round();
        (fx >= 0.0 && fy >= 0.0 && (fx as usize) < self.nx && (fy as usize) < self.ny).then(|| (fx as usize, fy as usize))
    }

    /// Number of 4-connected components of the pixels labelled `beam`.
    pub fn components(&self, beam: usize) -> usize {
        let mut seen = vec![false; self.cells.len()];
        let mut count = 0;
        for start in 0..self.cells.len() {
            if seen[start] || self.cells[start] != Some(beam) {
                continue;
            }
            count += 1;
            seen[start] = true;
            let mut queue = VecDeque::from([start]);
            while let Some(i) = queue.pop_front() {
                let (ix, iy) = (i % self.nx, i / self.nx);
                let mut nb = Vec::with_capacity(4);
                if ix > 0 {
                    nb.push(i - 1);
                }
                if ix + 1 < self.nx {
                    nb.push(i + 1);
                }
                if iy > 0 {
                    nb.push(i - self.nx);
                }
                if iy + 1 < self.ny {
                    nb.push(i + self.nx);
                }
                for j in nb {
                    if !seen[j] && self.cells[j] == Some(beam) {
                        seen[j] = true;
                        queue.push_back(j);
                    }
                }
            }
        }
        count
    }

    /// Pixels labelled differently in `other`, which must share the grid.
    pub fn differing_pixels(&self, other: &BeamMap) -> Result<usize> {
        if (self.nx, self.ny, self.x0, self.y0, self.res) != (other.nx, other.ny, other.x0, other.y0, other.res) {
            return Err(Error::Dimension("beam maps use different grids".into()));
        }
        Ok(self.cells.iter().zip(&other.cells).filter(|(a, b)| a != b).count())
    }

    pub fn regions(&self, prep: &Prepared, sys: &SystemConfig) -> Vec<RegionReport> {
        prep.leaves
            .iter()
            .enumerate()
            .map(|(c, leaf)| {
                let footprint_beam = aod_to_ground(leaf.steer, &sys.sector)
                    .and_then(|p| self.pixel_of(p))
                    .and_then(|(ix, iy)| self.at(ix, iy))
                    .map(|b| self.beam_ids[b]);
                RegionReport {
                    beam_id: leaf.id,
                    pixels: self.cells.iter().filter(|v| **v == Some(c)).count(),
                    components: self.components(c),
                    footprint_beam,
                }
            })
            .collect()
    }

    /// `x,y,beam_id` per in-sector pixel.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("x,y,beam_id\n");
        for iy in 0..self.ny {
            for ix in 0..self.nx {
                if let Some(b) = self.at(ix, iy) {
                    let [x, y] = self.center(ix, iy);
                    s.push_str(&format!("{x:.3},{y:.3},{}\n", self.beam_ids[b]));
                }
            }
        }
        s
    }
}

/// Label every in-sector pixel of a `res`-metre grid with its RSRP-best leaf, evaluated on
/// `n_sub` subcarriers spanning the configured band. Pixels act as users of one drop of
/// `scenario`; reflection phases come from `seed`.
pub fn beam_selection_map(
    sys: &SystemConfig,
    prep: &Prepared,
    scenario: &ScatterScenario,
    model: NlosModel,
    res: f64,
    n_sub: usize,
    seed: u64,
) -> Result<BeamMap> {
    if !(res > 0.0) {
        return Err(Error::invalid("map resolution must be positive"));
    }
    let carrier = CarrierConfig::new(sys.carrier.f0, sys.carrier.bandwidth, n_sub)?;
    let illum = FeedIllumination::own(&sys.array, &prep.pem, &carrier)?;
    let refs: Vec<_> = prep.leaves.iter().collect();
    let fields = BeamFields::new(&refs, &illum)?;

    let s = &sys.sector;
    let x_half = s.range_max * s.az_min.sin().abs().max(s.az_max.sin().abs());
    let nx = (2.0 * x_half / res).ceil() as usize + 1;
    let ny = (s.range_max / res).ceil() as usize + 1;
    let x0 = -((nx - 1) as f64) * res / 2.0;
    let y0 = 0.0;
    let mut map = BeamMap { beam_ids: prep.leaf_ids(), x0, y0, res, nx, ny, cells: vec![None; nx * ny] };

    let inside: Vec<(usize, [f64; 3])> = (0..nx * ny)
        .filter_map(|i| {
            let [x, y] = map.center(i % nx, i / nx);
            s.contains(x.hypot(y), x.atan2(y)).then_some((i, [x, y, sys.user_height]))
        })
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let probe_modules = vec![0; prep.n_beams()];
    for chunk in inside.chunks(CHUNK) {
        let users: Vec<[f64; 3]> = chunk.iter().map(|(_, u)| *u).collect();
        let ch = assemble_channel(&users, scenario, &prep.layout, s, &carrier, sys.array.n_p, model, &mut rng)?;
        let best = rsrp_assign(&beam_responses(&ch, &fields, &probe_modules)?).best;
        for ((i, _), b) in chunk.iter().zip(best) {
            map.cells[*i] = Some(b);
        }
    }
    Ok(map)
}
