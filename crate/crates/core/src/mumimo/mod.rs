//! Multi-user downlink: beam responses, RSRP assignment, scheduling, effective channels,
//! zero-forcing and rates.

pub mod assign;
pub mod effective;
pub mod estimate;
pub mod precoding;
pub mod response;

pub use assign::{rsrp_assign, rsrp_table, schedule_group, BeamAssignment, UserGroup};
pub use effective::{effective_channel, effective_channel_full, EffectiveChannel};
pub use estimate::{estimate_effective_channel, estimation_variance};
pub use precoding::{max_port_power, sinr, sinr_rates, zf_precoder, PrecodedLink, Precoding, ZfPrecoder, CONDITION_LIMIT};
pub use response::{beam_responses, BeamFields, BeamResponses, FeedIllumination};
