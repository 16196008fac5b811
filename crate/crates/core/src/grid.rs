//! Uniform log-likelihood-ratio grid shared by all densities in a run.
//!
//! Every density in a computation lives on one `GridSpec`: `n_bins` equally
//! spaced bin centers covering `[-llr_max, +llr_max]`, with an odd bin count
//! so that one center sits exactly at zero. Probability mass that would land
//! outside the covered range is folded into the end bins, never dropped, so
//! the end bins play the role of saturated "certainty" states.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Description of a uniform LLR grid.
///
/// The grid is value-like and cheap to copy; densities carry one by value.
/// Two grids are interchangeable only when both fields match exactly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    /// Magnitude of the largest representable LLR. Bin centers span
    /// `[-llr_max, +llr_max]` inclusive.
    pub llr_max: f64,
    /// Number of bins; always odd so a bin center sits exactly at zero.
    pub n_bins: usize,
}

impl GridSpec {
    /// Builds a grid, rejecting parameters that would break the invariants.
    pub fn new(llr_max: f64, n_bins: usize) -> Result<Self> {
        if !(llr_max.is_finite() && llr_max > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "llr_max must be positive and finite, got {llr_max}"
            )));
        }
        if n_bins < 3 || n_bins.is_multiple_of(2) {
            return Err(Error::InvalidGrid(format!(
                "n_bins must be odd and at least 3, got {n_bins}"
            )));
        }
        Ok(Self { llr_max, n_bins })
    }

    /// Spacing between adjacent bin centers.
    #[inline]
    pub fn bin_width(&self) -> f64 {
        2.0 * self.llr_max / (self.n_bins - 1) as f64
    }

    /// Index of the bin centered exactly at LLR zero.
    #[inline]
    pub fn center_index(&self) -> usize {
        (self.n_bins - 1) / 2
    }

    /// Center of bin `k`.
    #[inline]
    pub fn center(&self, k: usize) -> f64 {
        (k as f64 - self.center_index() as f64) * self.bin_width()
    }

    /// Fractional bin coordinate of LLR `x`; 0.0 maps to the first center.
    #[inline]
    pub fn position(&self, x: f64) -> f64 {
        (x + self.llr_max) / self.bin_width()
    }

    /// Iterator over all bin centers in index order.
    pub fn centers(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n_bins).map(move |k| self.center(k))
    }
}

impl Default for GridSpec {
    /// Default analysis grid: `llr_max = 30`, `n_bins = 4097`
    /// (bin width about 0.0146).
    fn default() -> Self {
        Self { llr_max: 30.0, n_bins: 4097 }
    }
}
