//! Direction nets, partitions of unity on the sphere, multiplier symbols and
//! their Mihlin constants, and the admissible parameter search.

mod mihlin;
mod net;
mod params;
mod profile;
mod symbol;

pub use mihlin::{mihlin_estimate, MihlinEstimate};
pub use net::{
    direction_net, net_quadrature_resolution, net_separation, overlap_count, partition_of_unity, DirectionNet, NetRecord, OverlapResult,
    PartitionOfUnity, MIN_PARTITION_DENOMINATOR,
};
pub use params::{admissible_parameters, search_admissible, AdmissibilityParams, AdmissibilityVerdict};
pub use profile::{smooth_step, BumpProfile, ProfileKind};
pub use symbol::{
    apply_multiplier, directional_symbol, lp_symbols, one, riesz, symbol_from_key, MultiplierSymbol,
};
