//! Asymptotic analysis toolkit for multi-edge-type LDPC code ensembles on
//! the binary-input AWGN channel.
//!
//! The crate provides, in dependency order:
//!
//! * [`grid`] and [`density`]: discretized LLR densities on a uniform grid
//!   and their functionals (entropy, error probability, symmetry);
//! * [`convolve`]: the variable-node and check-node convolution operators
//!   and cached polynomial evaluation;
//! * [`ensemble`]: multi-edge-type ensemble descriptions, socket accounting
//!   and edge-perspective degree distributions;
//! * [`de`]: quantized density evolution, decoding thresholds and traces;
//! * [`gexit`]: generalized EXIT functionals and charts;
//! * [`ga`]: a Gaussian-projection approximation of density evolution;
//! * [`mlcmsd`]: rate allocation for multilevel coding with multistage
//!   decoding of a quantized Gaussian source;
//! * [`units`]: channel parameter conversions and capacity helpers.

pub mod convolve;
pub mod de;
pub mod density;
pub mod ensemble;
pub mod error;
pub mod ga;
pub mod gexit;
pub mod grid;
pub mod mlcmsd;
#[cfg(test)]
pub(crate) mod test_fixtures;
pub mod units;

pub use convolve::{poly_apply_chk, poly_apply_var, ChkMixer, VarMixer};
pub use de::{
    channel_vector, combined_cn_density, combined_vn_density, de_step, find_threshold, run_de,
    run_de_with_channel, ChannelSetting, DeOptions, DeTrace, Snapshot, ThresholdProbe,
    ThresholdResult,
};
pub use density::{
    bi_awgn_density, delta_at, delta_inf, delta_zero, DensityVector, LlrDensity,
};
pub use ga::{discretize, ga_gexit_chart, ga_threshold, project_gaussian, run_ga_de, GaussianMsg};
pub use gexit::{
    chart_from_families, curve_area, curves_cross, family_sweep_chart, gexit_chart, gexit_value,
    per_edge_gexit_chart, ChannelFamily, ChartPoint, GexitChart, GexitCurve,
};
pub use ensemble::{
    parse_ensemble, CheckNodeRow, EdgeFraction, EdgePerspective, EnsembleSpec, SocketBalance,
    SocketReport, VariableNodeRow,
};
pub use error::{Error, Result};
pub use grid::GridSpec;
pub use mlcmsd::{
    efficiency, level_mutual_information, level_rates, quantized_entropy, quantized_mi,
    rate_sweep, snr_to_rho, subset_points, LevelRate, LevelRates, QuantizerSpec, SourceModel,
};
pub use units::{
    asymptotic_efficiency, biawgn_capacity, convert_units, ebn0_db_to_sigma, shannon_sigma,
    sigma_to_ebn0_db, Unit,
};
