//! Cell-edge link budget.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use super::config::{watts_to_dbm, SystemConfig, BOLTZMANN};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BudgetLine {
    pub name: String,
    pub unit: String,
    pub value: f64,
    /// Design-table value the computation is checked against.
    pub reference: f64,
}

impl BudgetLine {
    pub fn deviation(&self) -> f64 {
        self.value - self.reference
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinkBudget {
    pub thermal_noise_dbm: f64,
    pub receive_noise_dbm: f64,
    /// Free-space loss to the farthest ground point of the sector.
    pub pl_max_db: f64,
    /// EIRP giving `target_snr_db` at the cell edge.
    pub eirp_dbm: f64,
    pub received_dbm: f64,
    pub snr_db: f64,
}

/// Free-space path loss `20 log10(4π d / λ)` in dB.
pub fn fspl_db(distance: f64, lambda: f64) -> f64 {
    20.0 * (4.0 * PI * distance / lambda).log10()
}

pub fn link_budget(sys: &SystemConfig, target_snr_db: f64) -> LinkBudget {
    let thermal = watts_to_dbm(BOLTZMANN * sys.temperature_k * sys.carrier.bandwidth);
    let receive = thermal + sys.noise_figure_db;
    let dh = sys.sector.bs_height - sys.user_height;
    let d = (sys.sector.range_max.powi(2) + dh * dh).sqrt();
    let pl = fspl_db(d, sys.carrier.lambda0());
    let eirp = receive + pl + target_snr_db;
    let received = eirp - pl;
    LinkBudget { thermal_noise_dbm: thermal, receive_noise_dbm: receive, pl_max_db: pl, eirp_dbm: eirp, received_dbm: received, snr_db: received - receive }
}

impl LinkBudget {
    /// Lines paired with the reference design values of the default system.
    pub fn table(&self) -> Vec<BudgetLine> {
        let line = |name: &str, unit: &str, value: f64, reference: f64| BudgetLine { name: name.into(), unit: unit.into(), value, reference };
        vec![
            line("thermal_noise", "dBm", self.thermal_noise_dbm, -77.0),
            line("receive_noise", "dBm", self.receive_noise_dbm, -72.0),
            line("path_loss_max", "dB", self.pl_max_db, 112.7),
            line("eirp", "dBm", self.eirp_dbm, 40.7),
            line("received_power", "dBm", self.received_dbm, -72.0),
            line("snr", "dB", self.snr_db, 0.0),
        ]
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("quantity,unit,value,reference,deviation\n");
        for l in self.table() {
            s.push_str(&format!("{},{},{:.4},{},{:.4}\n", l.name, l.unit, l.value, l.reference, l.deviation()));
        }
        s
    }
}
