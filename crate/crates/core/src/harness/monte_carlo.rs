//! Monte Carlo drops: user placement, scatterer scenario, beam assignment and per-slot rates.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::config::ExperimentConfig;
use super::metrics::{MetricStore, SlotRecord, UserRecord};
use crate::amaf_ris::{design_pem, PemConfiguration};
use crate::beam_design::{build_codebook, separable_approximation, BeamCodeword, Codebook, SeparableProfile, ShapeReport};
use crate::channel::{assemble_channel, generate_scenario, ChannelRealization};
use crate::error::{Error, Result};
use crate::geometry::{ground_point, ModuleLayout, SectorGeometry};
use crate::mumimo::{
    beam_responses, effective_channel, effective_channel_full, estimate_effective_channel, rsrp_assign, schedule_group, sinr_rates,
    BeamAssignment, BeamFields, FeedIllumination,
};

/// Everything that stays fixed across drops.
#[derive(Clone, Debug)]
pub struct Prepared {
    pub pem: PemConfiguration,
    pub taper: SeparableProfile,
    pub codebook: Codebook,
    pub reports: Vec<ShapeReport>,
    /// Leaf codewords sorted by id; leaf `c` is served by module `c`.
    pub leaves: Vec<BeamCodeword>,
    pub layout: ModuleLayout,
    pub illum: FeedIllumination,
    pub fields: BeamFields,
}

/// PEM feeder and separable taper of the configured array.
pub fn design_feed(cfg: &ExperimentConfig) -> Result<(PemConfiguration, SeparableProfile)> {
    let pem = design_pem(&cfg.system.array, &cfg.system.carrier)?;
    let taper = separable_approximation(&pem.amp_profile)?;
    Ok((pem, taper))
}

impl Prepared {
    /// Design the PEM and the whole codebook from scratch.
    pub fn design(cfg: &ExperimentConfig) -> Result<Self> {
        cfg.validate()?;
        let (pem, taper) = design_feed(cfg)?;
        let q: Vec<f64> = taper.q.iter().copied().collect();
        let (codebook, reports) = build_codebook(&cfg.codebook, &pem, &q, &cfg.system.carrier, &cfg.sca)?;
        Self::assemble(cfg, pem, taper, codebook, reports)
    }

    /// Reuse an already designed codebook.
    pub fn with_codebook(cfg: &ExperimentConfig, codebook: Codebook) -> Result<Self> {
        cfg.validate()?;
        let (pem, taper) = design_feed(cfg)?;
        Self::assemble(cfg, pem, taper, codebook, Vec::new())
    }

    fn assemble(
        cfg: &ExperimentConfig,
        pem: PemConfiguration,
        taper: SeparableProfile,
        codebook: Codebook,
        reports: Vec<ShapeReport>,
    ) -> Result<Self> {
        let n = cfg.system.array.n_p;
        if codebook.codewords.iter().any(|c| c.xi.nrows() != n) {
            return Err(Error::Dimension("codebook was designed for a different array".into()));
        }
        let leaves: Vec<BeamCodeword> = codebook.leaves().into_iter().cloned().collect();
        let layout = cfg.system.layout(leaves.len())?;
        let illum = if cfg.include_next {
            FeedIllumination::with_layout(&cfg.system.array, &pem, &layout, &cfg.system.carrier)?
        } else {
            FeedIllumination::own(&cfg.system.array, &pem, &cfg.system.carrier)?
        };
        let refs: Vec<&BeamCodeword> = leaves.iter().collect();
        let fields = BeamFields::new(&refs, &illum)?;
        Ok(Prepared { pem, taper, codebook, reports, leaves, layout, illum, fields })
    }

    pub fn n_beams(&self) -> usize {
        self.leaves.len()
    }

    pub fn leaf_ids(&self) -> Vec<usize> {
        self.leaves.iter().map(|c| c.id).collect()
    }
}

/// `n` ground users uniform in area over the sector annulus, at height `height`.
pub fn place_users<R: Rng + ?Sized>(n: usize, sector: &SectorGeometry, height: f64, rng: &mut R) -> Vec<[f64; 3]> {
    let (r0, r1) = (sector.range_min.powi(2), sector.range_max.powi(2));
    (0..n)
        .map(|_| {
            let r = (r0 + (r1 - r0) * rng.random::<f64>()).sqrt();
            let az = sector.az_min + (sector.az_max - sector.az_min) * rng.random::<f64>();
            let [x, y] = ground_point(r, az);
            [x, y, height]
        })
        .collect()
}

/// Generator of drop `drop`: one ChaCha stream per drop under a common seed.
pub fn drop_rng(seed: u64, drop: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(drop as u64);
    rng
}

/// Users, scatterers and the resulting channel of one drop.
pub fn drop_channel<R: Rng + ?Sized>(cfg: &ExperimentConfig, prep: &Prepared, rng: &mut R) -> Result<ChannelRealization> {
    let sys = &cfg.system;
    let users = place_users(cfg.users, &sys.sector, sys.user_height, rng);
    let scenario = generate_scenario(&cfg.scenario.resolve()?, &sys.sector, rng)?;
    assemble_channel(&users, &scenario, &prep.layout, &sys.sector, &sys.carrier, sys.array.n_p, cfg.nlos_model, rng)
}

/// Noiseless RSRP beam choice from module 0.
pub fn assign_beams(ch: &ChannelRealization, prep: &Prepared) -> Result<BeamAssignment> {
    let probe = beam_responses(ch, &prep.fields, &vec![0; prep.n_beams()])?;
    Ok(rsrp_assign(&probe))
}

pub fn run_drop(cfg: &ExperimentConfig, prep: &Prepared, drop: usize) -> Result<MetricStore> {
    let mut rng = drop_rng(cfg.seed, drop);
    let ch = drop_channel(cfg, prep, &mut rng)?;
    let assignment = assign_beams(&ch, prep)?;
    let n_beams = prep.n_beams();
    let pools = assignment.pools(n_beams);
    let modules: Vec<usize> = (0..n_beams).collect();
    let data = beam_responses(&ch, &prep.fields, &modules)?;
    let leaf_refs: Vec<&BeamCodeword> = prep.leaves.iter().collect();

    let modes = cfg.precoder.modes();
    let p_rf = cfg.system.p_rf();
    let noise = cfg.system.noise_power();
    let mut store = MetricStore::new(prep.leaf_ids(), modes.clone());
    let mut users: Vec<UserRecord> = (0..cfg.users)
        .map(|k| UserRecord { drop, user: k, beam: assignment.best[k], selections: 0, rate_sum: vec![0.0; modes.len()] })
        .collect();

    for slot in 0..cfg.slots_per_drop {
        let group = schedule_group(&pools, &mut rng)?;
        let heff = if cfg.include_next {
            effective_channel_full(&group, &ch, &leaf_refs, &prep.illum)?
        } else {
            effective_channel(&group, &data)?
        };
        let estimate = cfg.pilot_snr_db.map(|snr| estimate_effective_channel(&heff, snr, &mut rng));
        let mut slot_rates = Vec::with_capacity(modes.len());
        for (m, &mode) in modes.iter().enumerate() {
            let link = sinr_rates(&heff, mode, estimate.as_ref(), p_rf, noise)?;
            store.regularized += link.regularized;
            store.max_condition = store.max_condition.max(link.max_condition);
            for (i, &r) in link.rates.iter().enumerate() {
                store.rates[m][group.beams[i]].push(r);
                users[group.users[i]].rate_sum[m] += r;
            }
            slot_rates.push(link.rates);
        }
        for &k in &group.users {
            users[k].selections += 1;
        }
        store.slots += 1;
        store.scheduled += group.len();
        if cfg.record_slots {
            store.slot_log.push(SlotRecord { drop, slot, users: group.users.clone(), beams: group.beams.clone(), rates: slot_rates });
        }
    }
    store.users = users;
    Ok(store)
}

/// All drops in parallel, merged in drop order so results do not depend on the thread count.
pub fn run_monte_carlo(cfg: &ExperimentConfig, prep: &Prepared) -> Result<MetricStore> {
    cfg.validate()?;
    let per_drop: Vec<MetricStore> = (0..cfg.drops).into_par_iter().map(|d| run_drop(cfg, prep, d)).collect::<Result<_>>()?;
    let mut total = MetricStore::new(prep.leaf_ids(), cfg.precoder.modes());
    for s in per_drop {
        total.merge(s);
    }
    Ok(total)
}
