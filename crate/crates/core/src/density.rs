//! Discretized log-likelihood-ratio densities and their functionals.
//!
//! A density assigns probability mass to every bin of a [`GridSpec`]. All
//! message densities handled by this crate are L-densities of binary-input
//! symmetric-output channels: a channel observation is summarized by the LLR
//! `L = ln p(y|0) / p(y|1)` conditioned on the zero codeword, and a density
//! describes the distribution of `L`. Symmetric densities satisfy
//! `f(-x) = exp(-x) f(x)`; that property is checked on demand, never
//! silently enforced.
//!
//! Mass is conserved by construction everywhere: any operation that would
//! move mass outside `[-llr_max, +llr_max]` folds it into the end bins.

use std::io::Write;

use crate::error::{Error, Result};
use crate::grid::GridSpec;

/// Natural log of 2, used to express entropies in bits.
const LN_2: f64 = std::f64::consts::LN_2;

/// Probability mass function over the bins of an LLR grid.
#[derive(Debug, Clone, PartialEq)]
pub struct LlrDensity {
    grid: GridSpec,
    mass: Vec<f64>,
}

impl LlrDensity {
    /// Wraps a raw mass vector, checking only the length against the grid.
    ///
    /// Total-mass and nonnegativity are run invariants maintained by the
    /// constructors and operators, not revalidated on every wrap.
    pub fn from_mass(grid: GridSpec, mass: Vec<f64>) -> Result<Self> {
        if mass.len() != grid.n_bins {
            return Err(Error::MassLength { got: mass.len(), want: grid.n_bins });
        }
        Ok(Self { grid, mass })
    }

    /// All-zero density used as an accumulator.
    pub(crate) fn zeros(grid: GridSpec) -> Self {
        Self { grid, mass: vec![0.0; grid.n_bins] }
    }

    #[inline]
    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    #[inline]
    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    #[inline]
    pub(crate) fn mass_mut(&mut self) -> &mut [f64] {
        &mut self.mass
    }

    /// Sum of all bin masses; 1 within 1e-8 for any probability density
    /// produced by this crate.
    pub fn total_mass(&self) -> f64 {
        self.mass.iter().sum()
    }

    /// Rescales the mass to total exactly 1; no-op on an all-zero density.
    ///
    /// Iterated convolution pipelines must renormalize between iterations:
    /// a relative mass deficit epsilon grows by the product of the reduced
    /// degrees per iteration, so even 1e-12 of floating-point summation
    /// drift compounds to total collapse within tens of iterations.
    pub fn renormalize(&mut self) {
        let total = self.total_mass();
        if total > 0.0 && total != 1.0 {
            for m in &mut self.mass {
                *m /= total;
            }
        }
    }

    /// First moment of the density.
    pub fn mean(&self) -> f64 {
        self.mass
            .iter()
            .enumerate()
            .map(|(k, &m)| m * self.grid.center(k))
            .sum()
    }

    /// Entropy functional `H = sum_k mass_k log2(1 + exp(-x_k))` in bits.
    ///
    /// For the channel density of a binary-input symmetric channel this is
    /// the conditional entropy `H(X|Y)`, so the channel capacity is `1 - H`.
    pub fn entropy(&self) -> f64 {
        self.mass
            .iter()
            .enumerate()
            .map(|(k, &m)| {
                if m == 0.0 {
                    0.0
                } else {
                    m * entropy_kernel(self.grid.center(k))
                }
            })
            .sum()
    }

    /// Hard-decision error probability: all mass at negative LLRs plus half
    /// the mass of the zero bin (ties broken by a fair coin).
    pub fn error_probability(&self) -> f64 {
        let c = self.grid.center_index();
        let below: f64 = self.mass[..c].iter().sum();
        below + 0.5 * self.mass[c]
    }

    /// Largest pairwise violation of the symmetry relation
    /// `f(-x) = exp(-x) f(x)` over the positive half of the grid.
    ///
    /// Returns an absolute mass deviation. Discretization alone leaves a
    /// residue that grows with bin width and density curvature, so callers
    /// compare against a tolerance instead of zero.
    pub fn symmetry_deviation(&self) -> f64 {
        let c = self.grid.center_index();
        let mut worst = 0.0f64;
        for k in c + 1..self.grid.n_bins {
            let x = self.grid.center(k);
            let mirrored = 2 * c - k;
            let dev = (self.mass[mirrored] - (-x).exp() * self.mass[k]).abs();
            worst = worst.max(dev);
        }
        worst
    }

    /// Whether the density passes the symmetry check at tolerance `tol`.
    pub fn is_symmetric(&self, tol: f64) -> bool {
        self.symmetry_deviation() <= tol
    }

    /// Adds `mass` at LLR `x`, splitting it linearly between the two
    /// bracketing bins so the first moment is preserved. Positions outside
    /// the grid fold into the end bins.
    pub(crate) fn deposit(&mut self, x: f64, mass: f64) {
        let n = self.grid.n_bins;
        let u = self.grid.position(x);
        if u <= 0.0 {
            self.mass[0] += mass;
        } else if u >= (n - 1) as f64 {
            self.mass[n - 1] += mass;
        } else {
            let k = u.floor() as usize;
            let w = u - k as f64;
            self.mass[k] += mass * (1.0 - w);
            self.mass[k + 1] += mass * w;
        }
    }

    /// Writes the density dump format: a `llr_bin_center, mass` CSV with one
    /// row per bin, values at 12 significant digits.
    pub fn write_csv<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        writeln!(out, "llr_bin_center,mass")?;
        for (k, &m) in self.mass.iter().enumerate() {
            writeln!(out, "{:.11e},{:.11e}", self.grid.center(k), m)?;
        }
        Ok(())
    }
}

/// An ordered bundle of densities on one common grid, indexed by edge type
/// or by channel slot. This is the message state passed between the two
/// half-iterations of density evolution.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityVector {
    items: Vec<LlrDensity>,
}

impl DensityVector {
    /// Wraps the given densities, requiring at least one and a common grid.
    pub fn new(items: Vec<LlrDensity>) -> Result<Self> {
        let first = items
            .first()
            .ok_or_else(|| Error::InvalidGrid("density vector must not be empty".into()))?;
        let grid = first.grid();
        if items.iter().any(|d| d.grid() != grid) {
            return Err(Error::GridMismatch);
        }
        Ok(Self { items })
    }

    /// Same density replicated `count` times.
    pub fn uniform(density: LlrDensity, count: usize) -> Result<Self> {
        Self::new(vec![density; count])
    }

    #[inline]
    pub fn grid(&self) -> GridSpec {
        self.items[0].grid()
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.items.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    #[inline]
    pub fn get(&self, i: usize) -> &LlrDensity {
        &self.items[i]
    }

    pub fn iter(&self) -> std::slice::Iter<'_, LlrDensity> {
        self.items.iter()
    }
}

/// Point mass at LLR zero: the erasure-like state of total ignorance.
/// Identity of the variable-node convolution and absorbing element of the
/// check-node convolution.
pub fn delta_zero(grid: GridSpec) -> LlrDensity {
    let mut d = LlrDensity::zeros(grid);
    let c = grid.center_index();
    d.mass[c] = 1.0;
    d
}

/// Point mass in the top bin: perfect knowledge, saturated at `+llr_max`.
/// Identity of the check-node convolution.
pub fn delta_inf(grid: GridSpec) -> LlrDensity {
    let mut d = LlrDensity::zeros(grid);
    let n = grid.n_bins;
    d.mass[n - 1] = 1.0;
    d
}

/// Point mass at an arbitrary LLR, split between the bracketing bins so the
/// mean is exact. Mostly useful in tests and for narrow projected messages.
pub fn delta_at(grid: GridSpec, x: f64) -> LlrDensity {
    let mut d = LlrDensity::zeros(grid);
    d.deposit(x, 1.0);
    d
}

/// L-density of the binary-input AWGN channel with noise deviation `sigma`,
/// conditioned on the all-zero codeword: a Gaussian with mean `2/sigma^2`
/// and variance `4/sigma^2`, discretized by integrating over each bin.
///
/// Tail mass beyond the grid folds into the end bins, so the result always
/// sums to 1 up to floating-point rounding.
pub fn bi_awgn_density(sigma: f64, grid: GridSpec) -> Result<LlrDensity> {
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(Error::NonpositiveSigma(sigma));
    }
    let mu = 2.0 / (sigma * sigma);
    let sd = 2.0 / sigma;
    let half = 0.5 * grid.bin_width();
    let n = grid.n_bins;
    let mut mass = vec![0.0; n];
    // Upper-tail CDF differences: adjacent bins share an edge value, so the
    // per-bin masses telescope to exactly the total tail split.
    let mut upper_prev = 1.0f64; // P(L > lower edge of bin 0) with the tail folded in
    for (k, m) in mass.iter_mut().enumerate() {
        let upper = if k + 1 == n {
            0.0 // top bin absorbs the entire remaining tail
        } else {
            let edge = grid.center(k) + half;
            normal_upper_tail((edge - mu) / sd)
        };
        *m = (upper_prev - upper).max(0.0);
        upper_prev = upper;
    }
    LlrDensity::from_mass(grid, mass)
}

/// `P(Z > t)` for standard normal `Z`, accurate in both tails.
#[inline]
pub(crate) fn normal_upper_tail(t: f64) -> f64 {
    0.5 * libm::erfc(t / std::f64::consts::SQRT_2)
}

/// `P(Z <= t)` for standard normal `Z`.
#[inline]
pub(crate) fn normal_cdf(t: f64) -> f64 {
    0.5 * libm::erfc(-t / std::f64::consts::SQRT_2)
}

/// Numerically stable `log2(1 + exp(-x))`.
#[inline]
pub(crate) fn entropy_kernel(x: f64) -> f64 {
    if x >= 0.0 {
        (-x).exp().ln_1p() / LN_2
    } else {
        (-x) / LN_2 + x.exp().ln_1p() / LN_2
    }
}
