//! Wideband RSRP beam assignment and per-slot user-group scheduling.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::response::BeamResponses;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BeamAssignment {
    /// Best beam index per user.
    pub best: Vec<usize>,
    /// `rsrp[k][c]`, linear power summed over subcarriers.
    pub rsrp: Vec<Vec<f64>>,
}

impl BeamAssignment {
    /// Argmax per user over an RSRP table, ties going to the lowest beam index.
    pub fn from_table(rsrp: Vec<Vec<f64>>) -> Self {
        let best = rsrp
            .iter()
            .map(|row| row.iter().enumerate().fold((0, f64::NEG_INFINITY), |acc, (c, &g)| if g > acc.1 { (c, g) } else { acc }).0)
            .collect();
        BeamAssignment { best, rsrp }
    }

    pub fn n_users(&self) -> usize {
        self.best.len()
    }

    /// Users assigned to each of `n_beams` beams, in increasing user order.
    pub fn pools(&self, n_beams: usize) -> Vec<Vec<usize>> {
        let mut pools = vec![Vec::new(); n_beams];
        for (k, &c) in self.best.iter().enumerate() {
            pools[c].push(k);
        }
        pools
    }
}

/// Wideband RSRP `Σ_ν |h_{k,c}(f_ν)|²` over the given subcarrier indices (all when `None`).
pub fn rsrp_table(responses: &BeamResponses, subcarriers: Option<&[usize]>) -> Vec<Vec<f64>> {
    let all: Vec<usize> = (0..responses.n_sub).collect();
    let idx = subcarriers.unwrap_or(&all);
    (0..responses.n_users)
        .map(|k| (0..responses.n_beams).map(|c| idx.iter().map(|&nu| responses.get(k, c, nu).norm_sqr()).sum()).collect())
        .collect()
}

/// Noiseless wideband RSRP assignment.
pub fn rsrp_assign(responses: &BeamResponses) -> BeamAssignment {
    BeamAssignment::from_table(rsrp_table(responses, None))
}

/// Users served together in one slot; member `i` is served by `modules[i]` with `beams[i]`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserGroup {
    pub users: Vec<usize>,
    pub beams: Vec<usize>,
    pub modules: Vec<usize>,
}

impl UserGroup {
    pub fn len(&self) -> usize {
        self.users.len()
    }

    pub fn is_empty(&self) -> bool {
        self.users.is_empty()
    }
}

/// One uniformly drawn user per nonempty beam pool; beam `c` is served by module `c`.
pub fn schedule_group<R: Rng + ?Sized>(pools: &[Vec<usize>], rng: &mut R) -> Result<UserGroup> {
    let mut g = UserGroup { users: Vec::new(), beams: Vec::new(), modules: Vec::new() };
    for (c, pool) in pools.iter().enumerate() {
        if pool.is_empty() {
            continue;
        }
        g.users.push(pool[rng.random_range(0..pool.len())]);
        g.beams.push(c);
        g.modules.push(c);
    }
    if g.is_empty() {
        return Err(Error::EmptyPools);
    }
    Ok(g)
}
