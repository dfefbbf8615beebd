//! Phase-only beam synthesis under the fixed eigenmode taper and codebook construction.

pub mod codebook;
pub mod pattern;
pub mod ppf;
pub mod remez;
pub mod sca;
pub mod sdp;
pub mod separable;

pub use codebook::{build_codebook, compose_codeword, BeamCodeword, Codebook, CodewordSpec, HierarchySpec, ShapeReport, ShapeSpec};
pub use pattern::{far_field_pattern_1d, pattern_1d, pattern_2d, FlatTopMetrics};
pub use ppf::ppf;
pub use remez::{binary_phase_profile, remez, BinarySpec, RemezOptions};
pub use sca::{sca_flat_top, ScaOptions, ScaOutcome, ScaState, SidelobeCeiling};
pub use separable::{separable_approximation, SeparableProfile};
