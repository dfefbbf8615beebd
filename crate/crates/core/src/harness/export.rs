//! CSV and JSON output of a Monte Carlo run.

use serde::Serialize;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::config::ExperimentConfig;
use super::metrics::MetricStore;
use crate::error::Result;
use crate::mumimo::Precoding;

pub fn mode_name(m: Precoding) -> &'static str {
    match m {
        Precoding::Zf => "zf",
        Precoding::None => "none",
    }
}

fn percentile(sorted: &[f64], p: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = p * (sorted.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// `beam_id,mode,samples,mean,p10,p50,p90` per leaf and mode.
pub fn per_beam_csv(store: &MetricStore) -> String {
    let mut s = String::from("beam_id,mode,samples,mean,p10,p50,p90\n");
    for (m, &mode) in store.modes.iter().enumerate() {
        for (c, id) in store.beam_ids.iter().enumerate() {
            let mut v = store.rates[m][c].clone();
            v.sort_by(f64::total_cmp);
            let mean = store.beam_mean(mode, c).unwrap_or(f64::NAN);
            let _ = writeln!(
                s,
                "{id},{},{},{mean:.6},{:.6},{:.6},{:.6}",
                mode_name(mode),
                v.len(),
                percentile(&v, 0.1),
                percentile(&v, 0.5),
                percentile(&v, 0.9)
            );
        }
    }
    s
}

pub fn cdf_csv(store: &MetricStore, mode: Precoding, c: usize) -> String {
    let mut s = String::from("rate,cdf\n");
    for (x, f) in store.cdf(mode, c) {
        let _ = writeln!(s, "{x:.6},{f:.6}");
    }
    s
}

/// Mean rate per user over the slots in which it was scheduled.
pub fn user_throughput_csv(store: &MetricStore) -> String {
    let mut s = String::from("drop,user,beam_id,selections");
    for &m in &store.modes {
        let _ = write!(s, ",rate_{}", mode_name(m));
    }
    s.push('\n');
    for u in &store.users {
        let _ = write!(s, "{},{},{},{}", u.drop, u.user, store.beam_ids[u.beam], u.selections);
        for r in &u.rate_sum {
            let mean = if u.selections > 0 { r / u.selections as f64 } else { 0.0 };
            let _ = write!(s, ",{mean:.6}");
        }
        s.push('\n');
    }
    s
}

/// One line per scheduled member of every logged slot.
pub fn slots_csv(store: &MetricStore) -> String {
    let mut s = String::from("drop,slot,user,beam_id");
    for &m in &store.modes {
        let _ = write!(s, ",rate_{}", mode_name(m));
    }
    s.push('\n');
    for r in &store.slot_log {
        for (i, (&u, &b)) in r.users.iter().zip(&r.beams).enumerate() {
            let _ = write!(s, "{},{},{u},{}", r.drop, r.slot, store.beam_ids[b]);
            for rates in &r.rates {
                let _ = write!(s, ",{:.6}", rates[i]);
            }
            s.push('\n');
        }
    }
    s
}

#[derive(Serialize)]
struct Manifest<'a> {
    version: &'a str,
    seed: u64,
    config: &'a ExperimentConfig,
    beam_ids: &'a [usize],
    slots: usize,
    scheduled: usize,
    regularized: usize,
    max_condition: f64,
    files: Vec<String>,
}

/// Write every result file into `dir` and return the file names written.
pub fn write_results(dir: &Path, cfg: &ExperimentConfig, store: &MetricStore) -> Result<Vec<String>> {
    fs::create_dir_all(dir)?;
    let mut files: Vec<(String, String)> = vec![
        ("per_beam.csv".into(), per_beam_csv(store)),
        ("user_throughput.csv".into(), user_throughput_csv(store)),
    ];
    for &mode in &store.modes {
        for (c, id) in store.beam_ids.iter().enumerate() {
            files.push((format!("cdf_{}_beam{id}.csv", mode_name(mode)), cdf_csv(store, mode, c)));
        }
    }
    if !store.slot_log.is_empty() {
        files.push(("slots.csv".into(), slots_csv(store)));
    }
    for (name, body) in &files {
        fs::write(dir.join(name), body)?;
    }
    let mut names: Vec<String> = files.into_iter().map(|(n, _)| n).collect();
    let manifest = Manifest {
        version: env!("CARGO_PKG_VERSION"),
        seed: cfg.seed,
        config: cfg,
        beam_ids: &store.beam_ids,
        slots: store.slots,
        scheduled: store.scheduled,
        regularized: store.regularized,
        max_condition: store.max_condition,
        files: names.clone(),
    };
    fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)?)?;
    names.push("manifest.json".into());
    Ok(names)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::metrics::UserRecord;

    fn store() -> MetricStore {
        let mut m = MetricStore::new(vec![7, 9], vec![Precoding::Zf, Precoding::None]);
        m.rates[0][0] = vec![1.0, 2.0, 3.0];
        m.rates[1][0] = vec![0.5, 1.5, 2.5];
        m.users.push(UserRecord { drop: 0, user: 3, beam: 1, selections: 2, rate_sum: vec![4.0, 2.0] });
        m
    }

    #[test]
    fn percentile_interpolates() {
        assert_eq!(percentile(&[0.0, 10.0], 0.5), 5.0);
        assert_eq!(percentile(&[1.0, 2.0, 3.0], 0.5), 2.0);
        assert!(percentile(&[], 0.5).is_nan());
    }

    #[test]
    fn per_beam_rows() {
        let csv = per_beam_csv(&store());
        assert_eq!(csv.lines().count(), 5);
        assert!(csv.contains("7,zf,3,2.000000,1.200000,2.000000,2.800000"));
        assert!(csv.contains("9,none,0,NaN"));
    }

    #[test]
    fn user_rows_use_beam_ids_and_means() {
        let csv = user_throughput_csv(&store());
        assert_eq!(csv.lines().nth(1).unwrap(), "0,3,9,2,2.000000,1.000000");
    }

    #[test]
    fn writes_manifest_and_files() {
        let dir = tempfile::tempdir().unwrap();
        let names = write_results(dir.path(), &ExperimentConfig::default(), &store()).unwrap();
        assert!(names.contains(&"cdf_zf_beam7.csv".to_string()));
        let m: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
        assert_eq!(m["seed"], 1);
        assert_eq!(m["beam_ids"][1], 9);
        assert!(!dir.path().join("slots.csv").exists());
    }
}
