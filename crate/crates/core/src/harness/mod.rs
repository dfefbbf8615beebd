//! Experiment configuration, Monte Carlo driver, link budget, beam maps and result export.

pub mod beam_map;
pub mod config;
pub mod export;
pub mod link_budget;
pub mod metrics;
pub mod monte_carlo;

pub use beam_map::{beam_selection_map, BeamMap, RegionReport};
pub use config::{dbm_to_watts, watts_to_dbm, ExperimentConfig, PrecoderMode, ScenarioChoice, SystemConfig, BOLTZMANN};
pub use export::{write_results, mode_name};
pub use link_budget::{fspl_db, link_budget, BudgetLine, LinkBudget};
pub use metrics::{MetricStore, SlotRecord, UserRecord};
pub use monte_carlo::{assign_beams, design_feed, drop_channel, drop_rng, place_users, run_drop, run_monte_carlo, Prepared};
