//! Gaussian-projected density evolution.
//!
//! The approximation replaces every variable-to-check message density with
//! the symmetric Gaussian matching its mean before the next check-node
//! update; check-node processing stays exact. Symmetric Gaussian LLR
//! densities form a one-parameter family, `N(m, 2m)`, so a single mean per
//! edge type captures the projected state. Check-node outputs are left
//! alone: they are visibly non-Gaussian near threshold and projecting them
//! wrecks the estimate.
//!
//! The projected message is re-discretized onto the working grid with a
//! first-moment-preserving quantizer (per-bin probability mass placed at
//! the bin's conditional mean), so projection followed by discretization
//! returns the same mean to rounding error and the fixed points of the
//! projected recursion are well defined.
//!
//! The mean fed to the quantizer is computed additively (means add under
//! convolution): channel-slot means plus degree-weighted check-output
//! means, mixed by the edge-perspective fractions. Reading the mean off
//! the convolved density instead would cap it below `llr_max` forever,
//! because the grid folds the upper tail into the end bin; the additive
//! mean is the mean of the unclipped update, so late in decoding it grows
//! past `llr_max` and the message saturates to certainty the same way a
//! near-converged exact density does.

use crate::convolve::{ChkMixer, VarMixer};
use crate::de::{
    app_rows, channel_vector, chk_edge_rows, run_loop, var_edge_rows, DeOptions, DeTrace,
    ThresholdResult,
};
use crate::density::{delta_inf, delta_zero, normal_cdf, DensityVector, LlrDensity};
use crate::ensemble::EnsembleSpec;
use crate::error::{Error, Result};
use crate::gexit::{gexit_chart, GexitChart};
use crate::grid::GridSpec;

/// Means below this are a point mass at zero for every practical grid.
const MEAN_FLOOR: f64 = 1e-12;

/// A symmetric Gaussian LLR message: `N(mean, 2 mean)`.
///
/// The variance is implied by the symmetry condition, so the mean is the
/// whole state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianMsg {
    pub mean: f64,
}

/// Projects a density onto the symmetric Gaussian family by matching its
/// first moment.
///
/// The input is expected to be (approximately) symmetric; a negative mean
/// has no symmetric-Gaussian counterpart and is rejected.
pub fn project_gaussian(d: &LlrDensity) -> Result<GaussianMsg> {
    let mean = d.mean();
    if mean < 0.0 {
        return Err(Error::NegativeMean(mean));
    }
    Ok(GaussianMsg { mean })
}

/// Discretizes `N(mean, 2 mean)` onto the grid, preserving the first
/// moment.
///
/// Each bin receives its exact probability mass, deposited at the bin's
/// conditional mean, so the discretized mean equals the continuous mean up
/// to the tail mass folded into the end bins. Means at or beyond the grid
/// edge saturate to the certainty point mass.
pub fn discretize(msg: GaussianMsg, grid: GridSpec) -> LlrDensity {
    let m = msg.mean;
    if m <= MEAN_FLOOR {
        return delta_zero(grid);
    }
    if m >= grid.llr_max {
        return delta_inf(grid);
    }
    let sd = (2.0 * m).sqrt();
    let n = grid.n_bins;
    let w = grid.bin_width();
    let inv_sqrt_2pi = 1.0 / (2.0 * std::f64::consts::PI).sqrt();

    // Standardized interior bin edges, with the outer edges at infinity.
    // cdf[k] and pdf[k] belong to the lower edge of bin k.
    let mut out = delta_zero(grid);
    out.mass_mut().fill(0.0);
    let mut cdf_lo = 0.0;
    let mut pdf_lo = 0.0;
    for k in 0..n {
        let (cdf_hi, pdf_hi) = if k == n - 1 {
            (1.0, 0.0)
        } else {
            let z = (grid.center(k) + 0.5 * w - m) / sd;
            (normal_cdf(z), inv_sqrt_2pi * (-0.5 * z * z).exp())
        };
        let mass = cdf_hi - cdf_lo;
        if mass > 0.0 {
            // E[X | bin] = m + sd (pdf(lo) - pdf(hi)) / mass.
            let cond_mean = m + sd * (pdf_lo - pdf_hi) / mass;
            out.deposit(cond_mean, mass);
        }
        cdf_lo = cdf_hi;
        pdf_lo = pdf_hi;
    }
    out.renormalize();
    out
}

/// Runs the projected recursion at one noise level: exact check-node step,
/// variable-node outputs replaced by their discretized symmetric-Gaussian
/// projections (see the module notes on how the mean is obtained). The
/// posterior that drives the stopping rule is still the exact mixture of
/// the current beliefs, so stopping, trace layout, and snapshot behavior
/// match [`crate::de::run_de`] and the walls are directly comparable.
pub fn run_ga_de(
    spec: &EnsembleSpec,
    sigma: f64,
    grid: GridSpec,
    opts: &DeOptions,
) -> Result<DeTrace> {
    let channel = channel_vector(spec, sigma, grid)?;
    let app = app_rows(spec);
    let chk_rows: Vec<_> =
        (0..spec.n_edge_types).map(|e| chk_edge_rows(spec, e)).collect::<Result<_>>()?;
    let var_rows: Vec<_> =
        (0..spec.n_edge_types).map(|e| var_edge_rows(spec, e)).collect::<Result<_>>()?;
    let channel_means: Vec<f64> = channel.iter().map(LlrDensity::mean).collect();

    run_loop(spec, &channel, opts, &mut |p| {
        let mut chk_mixer = ChkMixer::new(p);
        let mut cn = Vec::with_capacity(spec.n_edge_types);
        for rows in &chk_rows {
            let mut d = chk_mixer.mixture(rows)?;
            d.renormalize();
            cn.push(d);
        }
        let cn_out = DensityVector::new(cn)?;
        let mut posterior = VarMixer::new(&channel, &cn_out)?.mixture(&app)?;
        posterior.renormalize();

        let cn_means: Vec<f64> = cn_out.iter().map(LlrDensity::mean).collect();
        let vn = var_rows
            .iter()
            .map(|rows| {
                let mean = rows
                    .iter()
                    .map(|r| {
                        let from_channel: f64 = r
                            .received
                            .iter()
                            .zip(&channel_means)
                            .map(|(&b, m)| f64::from(b) * m)
                            .sum();
                        let from_checks: f64 = r
                            .degrees
                            .iter()
                            .zip(&cn_means)
                            .map(|(&d, m)| f64::from(d) * m)
                            .sum();
                        r.coeff * (from_channel + from_checks)
                    })
                    .sum();
                discretize(GaussianMsg { mean }, grid)
            })
            .collect();
        Ok((DensityVector::new(vn)?, cn_out, posterior))
    })
}

/// Bisects the projected recursion's convergence threshold. Bracket and
/// tolerance semantics match [`crate::de::find_threshold`].
pub fn ga_threshold(
    spec: &EnsembleSpec,
    grid: GridSpec,
    sigma_lo: f64,
    sigma_hi: f64,
    tol_sigma: f64,
    opts: &DeOptions,
) -> Result<ThresholdResult> {
    crate::de::bisect_threshold(
        |sigma| run_ga_de(spec, sigma, grid, opts),
        sigma_lo,
        sigma_hi,
        tol_sigma,
    )
}

/// Chart of one projected decoding trajectory, built exactly like
/// [`gexit_chart`] but over the projected recursion's snapshots.
pub fn ga_gexit_chart(
    spec: &EnsembleSpec,
    sigma: f64,
    grid: GridSpec,
    opts: &DeOptions,
) -> Result<GexitChart> {
    let opts = DeOptions { snapshot_every: Some(1), ..*opts };
    let trace = run_ga_de(spec, sigma, grid, &opts)?;
    gexit_chart(spec, sigma, &trace)
}
