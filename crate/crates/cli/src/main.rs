use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use amafris::beam_design::pattern::linspace;
use amafris::beam_design::{far_field_pattern_1d, BeamCodeword, Codebook, FlatTopMetrics, ShapeSpec};
use amafris::channel::{assemble_channel, generate_scenario, ScatterScenario, ScenarioSpec};
use amafris::harness::export::mode_name;
use amafris::harness::{
    beam_selection_map, design_feed, drop_rng, link_budget, place_users, run_monte_carlo, write_results, ExperimentConfig, PrecoderMode,
    Prepared, ScenarioChoice,
};
use amafris::mumimo::Precoding;

/// Sine-angle samples used for the exported 1D patterns.
const PATTERN_POINTS: usize = 2001;

#[derive(Parser, Debug)]
#[command(name = "amafris", version, about = "AMAF-RIS beam design and MU-MIMO Monte Carlo runs")]
struct Cli {
    /// Experiment configuration (TOML); defaults are used for missing keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// `los`, `scenario1`, `scenario2` or a scenario file (TOML or JSON).
    #[arg(long, global = true)]
    scenario: Option<String>,
    #[arg(long, global = true, value_parser = ["zf", "none", "both"])]
    precoder: Option<String>,
    /// Previously designed codebook (JSON) to use instead of designing one.
    #[arg(long, global = true)]
    codebook: Option<PathBuf>,
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Design the PEM feeder and the beam codebook; write patterns and shape metrics.
    DesignBeams,
    /// Cell-edge link budget.
    LinkBudget {
        #[arg(long, default_value_t = 0.0)]
        target_snr_db: f64,
    },
    /// RSRP best-beam map over the sector, under LOS and under the chosen scenario.
    BeamMap {
        /// Pixel size (m).
        #[arg(long, default_value_t = 2.0)]
        res: f64,
        #[arg(long, default_value_t = 16)]
        n_sub: usize,
    },
    /// Monte Carlo drops with per-beam rate statistics.
    Run {
        #[arg(long)]
        drops: Option<usize>,
        #[arg(long)]
        slots: Option<usize>,
        #[arg(long)]
        users: Option<usize>,
        /// Also write one line per scheduled user-slot.
        #[arg(long)]
        record_slots: bool,
    },
    /// Users and scatterers of one drop, optionally with its channel tensor.
    ScenarioDump {
        #[arg(long, default_value_t = 0)]
        drop: usize,
        #[arg(long)]
        channel: bool,
    },
}

fn parse_scenario(arg: &str) -> Result<ScenarioChoice> {
    if matches!(arg, "los" | "scenario1" | "scenario2") {
        return Ok(ScenarioChoice::Builtin(arg.into()));
    }
    let path = Path::new(arg);
    let text = fs::read_to_string(path).with_context(|| format!("reading scenario file {arg}"))?;
    let spec: ScenarioSpec = if path.extension().is_some_and(|e| e == "json") {
        serde_json::from_str(&text)?
    } else {
        toml::from_str(&text)?
    };
    Ok(ScenarioChoice::Custom(spec))
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p).with_context(|| format!("loading {}", p.display()))?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(s) = &cli.scenario {
        cfg.scenario = parse_scenario(s)?;
    }
    if let Some(p) = &cli.precoder {
        cfg.precoder = PrecoderMode::parse(p)?;
    }
    if let Command::Run { drops, slots, users, record_slots } = &cli.command {
        cfg.drops = drops.unwrap_or(cfg.drops);
        cfg.slots_per_drop = slots.unwrap_or(cfg.slots_per_drop);
        cfg.users = users.unwrap_or(cfg.users);
        cfg.record_slots |= *record_slots;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn prepare(cli: &Cli, cfg: &ExperimentConfig) -> Result<Prepared> {
    match &cli.codebook {
        Some(path) => {
            let (pem, _) = design_feed(cfg)?;
            let cb = Codebook::load(path, &pem, &cfg.system.carrier).with_context(|| format!("loading codebook {}", path.display()))?;
            Ok(Prepared::with_codebook(cfg, cb)?)
        }
        None => {
            log::info!("designing codebook ({} codewords)", cfg.codebook.codewords.len());
            Ok(Prepared::design(cfg)?)
        }
    }
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(value)?).with_context(|| format!("writing {}", path.display()))
}

fn target_band(spec: &ShapeSpec) -> Option<f64> {
    match spec {
        ShapeSpec::FlatTop { half_width, .. } | ShapeSpec::Binary { half_width } => Some(*half_width),
        _ => None,
    }
}

fn pattern_csv(angles: &[f64], gains: &[f64]) -> String {
    let mut s = String::from("sin_angle,gain_db\n");
    for (a, g) in angles.iter().zip(gains) {
        s.push_str(&format!("{a:.6},{g:.6}\n"));
    }
    s
}

fn design_beams(cli: &Cli, cfg: &ExperimentConfig) -> Result<()> {
    let prep = prepare(cli, cfg)?;
    fs::create_dir_all(&cli.out)?;
    prep.codebook.save(&cli.out.join("codebook.json"))?;
    let sigma = &prep.pem.singular_values;
    write_json(
        &cli.out.join("pem.json"),
        &serde_json::json!({
            "sigma1_sq": sigma[0] * sigma[0],
            "singular_values": sigma,
            "degenerate": prep.pem.degenerate,
            "eta": prep.taper.eta,
            "kl": prep.taper.kl,
            "taper": prep.taper.q.as_slice(),
        }),
    )?;

    // one pattern per distinct 1D shape, taken from the first codeword using it
    let q: Vec<f64> = prep.taper.q.iter().copied().collect();
    let angles = linspace(-1.0, 1.0, PATTERN_POINTS);
    let mut shapes: BTreeMap<String, (ShapeSpec, &BeamCodeword, bool)> = BTreeMap::new();
    for spec in &cfg.codebook.codewords {
        let Some(cw) = prep.codebook.get(spec.id) else { continue };
        for (shape, is_x) in [(&spec.shape_x, true), (&spec.shape_z, false)] {
            shapes.entry(serde_json::to_string(shape)?).or_insert((shape.clone(), cw, is_x));
        }
    }
    let mut rows = String::from("shape,kind,half_width,ripple_db,psl_db,min_gain,width_3db,min_gain_init,sca_min_gain,iterations,solver_warning\n");
    for (i, (shape, cw, is_x)) in shapes.values().enumerate() {
        let w = if *is_x { &cw.w_x } else { &cw.w_z };
        let g = far_field_pattern_1d(w.as_slice(), &q, &angles, 1.0, false, true);
        fs::write(cli.out.join(format!("shape{i}_pattern.csv")), pattern_csv(&angles, &g))?;
        let kind = serde_json::to_value(shape)?.get("kind").and_then(|k| k.as_str().map(String::from)).unwrap_or_default();
        let sca = prep.reports.iter().find(|r| r.spec == *shape).and_then(|r| r.sca.as_ref());
        let (init, fin, it, warn) = sca.map_or((f64::NAN, f64::NAN, 0, false), |o| (o.min_gain_init, o.min_gain, o.iterations, o.solver_warning));
        let metrics = target_band(shape).map(|hw| {
            let lin: Vec<f64> = g.iter().map(|d| 10f64.powf(d / 10.0)).collect();
            (hw, FlatTopMetrics::evaluate(&angles, &lin, -hw, hw))
        });
        match metrics {
            Some((hw, m)) => rows.push_str(&format!(
                "{i},{kind},{hw},{:.4},{:.4},{:.6},{:.4},{init:.6},{fin:.6},{it},{warn}\n",
                m.ripple_db, m.psl_db, m.min_gain, m.width_3db
            )),
            None => rows.push_str(&format!("{i},{kind},,,,,,{init:.6},{fin:.6},{it},{warn}\n")),
        }
    }
    fs::write(cli.out.join("shapes.csv"), rows)?;

    let mut leaves = String::from("beam_id,level,parent,steer_az_deg,steer_el_deg\n");
    for cw in &prep.codebook.codewords {
        leaves.push_str(&format!(
            "{},{},{},{:.6},{:.6}\n",
            cw.id,
            cw.level,
            cw.parent.map(|p| p.to_string()).unwrap_or_default(),
            cw.steer.phi.to_degrees(),
            cw.steer.theta.to_degrees()
        ));
    }
    fs::write(cli.out.join("codewords.csv"), leaves)?;
    println!("codebook: {} codewords, {} leaves; eta {:.5}", prep.codebook.len(), prep.n_beams(), prep.taper.eta);
    Ok(())
}

fn beam_map(cli: &Cli, cfg: &ExperimentConfig, res: f64, n_sub: usize) -> Result<()> {
    let prep = prepare(cli, cfg)?;
    fs::create_dir_all(&cli.out)?;
    let sys = &cfg.system;
    let los = beam_selection_map(sys, &prep, &ScatterScenario::empty("los"), cfg.nlos_model, res, n_sub, cfg.seed)?;
    fs::write(cli.out.join("beam_map_los.csv"), los.to_csv())?;
    let mut report = serde_json::json!({ "los": los.regions(&prep, sys) });
    let spec = cfg.scenario.resolve()?;
    if spec.total_scatterers() > 0 {
        let mut rng = drop_rng(cfg.seed, 0);
        let scenario = generate_scenario(&spec, &sys.sector, &mut rng)?;
        let m = beam_selection_map(sys, &prep, &scenario, cfg.nlos_model, res, n_sub, cfg.seed)?;
        fs::write(cli.out.join(format!("beam_map_{}.csv", spec.label)), m.to_csv())?;
        report["scenario"] = serde_json::json!({
            "label": spec.label,
            "regions": m.regions(&prep, sys),
            "differing_pixels": los.differing_pixels(&m)?,
        });
    }
    write_json(&cli.out.join("beam_map.json"), &report)?;
    for r in los.regions(&prep, sys) {
        println!("beam {}: {} pixels, {} region(s), footprint ok {}", r.beam_id, r.pixels, r.components, r.footprint_ok());
    }
    Ok(())
}

fn run(cli: &Cli, cfg: &ExperimentConfig) -> Result<()> {
    let prep = prepare(cli, cfg)?;
    let store = run_monte_carlo(cfg, &prep)?;
    write_results(&cli.out, cfg, &store)?;
    for &mode in &store.modes {
        println!("{}: mean of per-beam means {:.3} bit/s/Hz", mode_name(mode), store.mean_of_beam_means(mode).unwrap_or(f64::NAN));
    }
    if store.modes.contains(&Precoding::Zf) && store.regularized > 0 {
        log::warn!("{} subcarrier precoders used the regularised fallback", store.regularized);
    }
    Ok(())
}

fn scenario_dump(cli: &Cli, cfg: &ExperimentConfig, drop: usize, channel: bool) -> Result<()> {
    let sys = &cfg.system;
    let mut rng = drop_rng(cfg.seed, drop);
    let users = place_users(cfg.users, &sys.sector, sys.user_height, &mut rng);
    let scenario = generate_scenario(&cfg.scenario.resolve()?, &sys.sector, &mut rng)?;
    fs::create_dir_all(&cli.out)?;
    write_json(&cli.out.join("scenario.json"), &scenario)?;
    let mut s = String::from("user,x,y,z\n");
    for (k, u) in users.iter().enumerate() {
        s.push_str(&format!("{k},{:.6},{:.6},{:.6}\n", u[0], u[1], u[2]));
    }
    fs::write(cli.out.join("users.csv"), s)?;
    if channel {
        let layout = sys.layout(cfg.codebook.leaf_ids().len())?;
        let ch = assemble_channel(&users, &scenario, &layout, &sys.sector, &sys.carrier, sys.array.n_p, cfg.nlos_model, &mut rng)?;
        ch.write_tensor(&cli.out.join("channel.amch"))?;
    }
    println!("{}: {} scatterers in {} clusters, {} users", scenario.label, scenario.scatterers.len(), scenario.clusters.len(), users.len());
    Ok(())
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let cfg = load_config(&cli)?;
    match &cli.command {
        Command::DesignBeams => design_beams(&cli, &cfg),
        Command::LinkBudget { target_snr_db } => {
            let b = link_budget(&cfg.system, *target_snr_db);
            fs::create_dir_all(&cli.out)?;
            fs::write(cli.out.join("link_budget.csv"), b.to_csv())?;
            for l in b.table() {
                println!("{:<16} {:>9.2} {:<4} (reference {:>7.1})", l.name, l.value, l.unit, l.reference);
            }
            Ok(())
        }
        Command::BeamMap { res, n_sub } => beam_map(&cli, &cfg, *res, *n_sub),
        Command::Run { .. } => run(&cli, &cfg),
        Command::ScenarioDump { drop, channel } => {
            if *drop >= cfg.drops {
                bail!("drop {drop} is outside the configured {} drops", cfg.drops);
            }
            scenario_dump(&cli, &cfg, *drop, *channel)
        }
    }
}
