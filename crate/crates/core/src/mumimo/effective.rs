//! Effective baseband channel of a scheduled group.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::assign::UserGroup;
use super::response::{BeamResponses, FeedIllumination};
use crate::beam_design::pattern::response_2d_with;
use crate::beam_design::BeamCodeword;
use crate::channel::ChannelRealization;
use crate::error::{Error, Result};

/// `H(f_ν)` per subcarrier; entry `(i, j)` couples the stream of member `j` to user `i`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EffectiveChannel {
    pub h: Vec<DMatrix<Complex64>>,
    pub include_next: bool,
}

impl EffectiveChannel {
    pub fn size(&self) -> usize {
        self.h.first().map_or(0, |m| m.nrows())
    }

    pub fn n_sub(&self) -> usize {
        self.h.len()
    }
}

/// Block-diagonal form: each module radiates only through its own RIS.
pub fn effective_channel(group: &UserGroup, responses: &BeamResponses) -> Result<EffectiveChannel> {
    for (&c, &m) in group.beams.iter().zip(&group.modules) {
        if responses.module_of_beam.get(c) != Some(&m) {
            return Err(Error::invalid(format!("beam {c} is not tabulated for module {m}")));
        }
    }
    let n = group.len();
    let h = (0..responses.n_sub)
        .map(|nu| DMatrix::from_fn(n, n, |i, j| responses.get(group.users[i], group.beams[j], nu)))
        .collect();
    Ok(EffectiveChannel { h, include_next: false })
}

/// Full form including near-end crosstalk: the AMAF of member `j` also illuminates the RIS
/// of every other active module, which radiates with that module's beam.
pub fn effective_channel_full(
    group: &UserGroup,
    ch: &ChannelRealization,
    beams: &[&BeamCodeword],
    illum: &FeedIllumination,
) -> Result<EffectiveChannel> {
    let n = group.len();
    let np = ch.n_p;
    let freqs = ch.carrier.subcarriers();
    if illum.freqs != freqs || illum.n_p != np {
        return Err(Error::Dimension("illumination grid differs from the channel".into()));
    }
    let mut h = vec![DMatrix::zeros(n, n); freqs.len()];
    for (mi, &l) in group.modules.iter().enumerate() {
        let xi = &beams[group.beams[mi]].xi;
        let p_l = ch.layout.positions[l];
        for (mj, &j) in group.modules.iter().enumerate() {
            let maps = illum
                .maps(ch.layout.offset(l, j))
                .ok_or_else(|| Error::invalid(format!("no illumination for modules ({l}, {j})")))?;
            for (nu, &f) in freqs.iter().enumerate() {
                let x = xi.component_mul(&maps[nu]);
                for (ui, &k) in group.users.iter().enumerate() {
                    let mut acc = Complex64::new(0.0, 0.0);
                    for p in &ch.users[k].paths {
                        let (ax, az) = p.steering(np, f, &ch.carrier);
                        acc += p.coefficient(p_l, f, &ch.carrier).conj() * response_2d_with(&x, &ax, &az);
                    }
                    h[nu][(ui, mj)] += acc;
                }
            }
        }
    }
    Ok(EffectiveChannel { h, include_next: true })
}
