//! Clustered multipath channel: vMF scatterer sampling, placement and per-module responses.

pub mod paths;
pub mod scenario;
pub mod vmf;

pub use paths::{
    assemble_channel, free_space_gain, los_channel, los_path, nlos_amplitude, nlos_channel, nlos_path, ChannelRealization, LosInfo,
    NlosModel, PathTerm, UserChannel,
};
pub use scenario::{
    generate_scenario, resolve_clusters, ClusterMean, ClusterSpec, KappaLaw, KappaSpec, ScatterScenario, Scatterer, ScattererCluster,
    ScenarioSpec,
};
pub use vmf::{kappa_from_range, mean_resultant_length, sample_uniform_sphere, sample_vmf, sample_vmf_front};
