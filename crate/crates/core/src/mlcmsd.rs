//! Rate allocation for multilevel coding with multistage decoding over a
//! correlated Gaussian source pair.
//!
//! One party quantizes its normalized observation with a uniform scalar
//! quantizer and labels the bins in natural binary; the other party keeps
//! its observation continuous and serves as decoder side information. Each
//! label bit becomes one decoding level, decoded in index order with every
//! earlier bit available, so the rate budget of level `i` is governed by
//! the conditional pair `H(bit_i | lower bits)` and
//! `I(side info; bit_i | lower bits)`.
//!
//! The conditional mutual informations are computed through subset
//! mixtures: conditioned on the low bits, the quantized value ranges over
//! the bin representatives of one set-partitioning subset, and the side
//! information is a Gaussian mixture over those representatives. Both
//! block-information forms in common use (information carried by the upper
//! label block, or by the low block itself) reduce to differences of the
//! pattern-averaged mixture entropies computed here, because every
//! fully-conditioned density is the same-width Gaussian whose entropy
//! cancels.

use crate::density::normal_cdf;
use crate::error::{Error, Result};
use rayon::prelude::*;

/// Integration window for the mixture-entropy quadrature. Representatives
/// ride at `rho * a_k` with `|a_k|` a couple of source deviations at most,
/// so eight deviations of headroom keep the truncated tail below 1e-7 bits.
const INT_HALF_WIDTH: f64 = 8.0;

/// Composite-trapezoid resolution; one more point makes the step exactly
/// dyadic. Doubling the count must move results by less than 1e-7.
const INT_POINTS: usize = (1 << 14) + 1;

/// Zero-mean jointly Gaussian source pair after per-party normalization to
/// unit variance: the joint law is fully described by the correlation, and
/// either coordinate given the other is `N(rho * x, 1 - rho^2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SourceModel {
    /// Correlation coefficient, strictly inside (-1, 1).
    pub rho: f64,
    /// Both coordinates rescaled to unit variance. Every computation in
    /// this module works in those units.
    pub normalized: bool,
}

impl SourceModel {
    pub fn new(rho: f64) -> Result<Self> {
        if !rho.is_finite() || rho.abs() >= 1.0 {
            return Err(Error::InvalidSource(format!(
                "correlation must lie strictly inside (-1, 1), got {rho}"
            )));
        }
        Ok(Self { rho, normalized: true })
    }

    /// Model of a measured value plus independent Gaussian noise at the
    /// given linear signal-to-noise ratio; see [`snr_to_rho`].
    pub fn from_snr(snr: f64) -> Result<Self> {
        Self::new(snr_to_rho(snr)?)
    }

    /// Mutual information of the unquantized pair, `-1/2 log2(1 - rho^2)`.
    pub fn analytic_mi(&self) -> f64 {
        -0.5 * (1.0 - self.rho * self.rho).log2()
    }

    /// Spread of one coordinate given the exact value of the other.
    fn conditional_sd(&self) -> f64 {
        (1.0 - self.rho * self.rho).sqrt()
    }
}

/// Correlation of `X` with `X + N` when the noise is independent and
/// Gaussian: `rho^2 = snr / (1 + snr)`.
pub fn snr_to_rho(snr: f64) -> Result<f64> {
    if !snr.is_finite() || snr < 0.0 {
        return Err(Error::InvalidSource(format!(
            "signal-to-noise ratio must be finite and nonnegative, got {snr}"
        )));
    }
    Ok((snr / (1.0 + snr)).sqrt())
}

/// Uniform scalar quantizer with `2^bits` bins centered on zero: the
/// `2^bits - 1` interior thresholds sit at `delta * (k - 2^(bits-1))`, the
/// outermost bins are unbounded, and bin `k`'s label is `k` in natural
/// binary. Representatives continue the uniform lattice, so with
/// `bits = 3, delta = 2` they are the odd integers -7 through +7.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantizerSpec {
    /// Label width in bits; the bin count is `2^bits`.
    pub bits: u32,
    /// Interior bin width, in normalized source units.
    pub delta: f64,
}

impl QuantizerSpec {
    pub fn new(bits: u32, delta: f64) -> Result<Self> {
        if bits == 0 || bits > 20 {
            return Err(Error::InvalidQuantizer(format!(
                "label width must lie in 1..=20 bits, got {bits}"
            )));
        }
        if !delta.is_finite() || delta <= 0.0 {
            return Err(Error::InvalidQuantizer(format!(
                "step size must be positive and finite, got {delta}"
            )));
        }
        Ok(Self { bits, delta })
    }

    pub fn n_bins(&self) -> usize {
        1 << self.bits
    }

    /// Lower edge of bin `k`; bin 0 is unbounded below.
    fn lower_edge(&self, k: usize) -> f64 {
        debug_assert!(k > 0 && k < self.n_bins());
        self.delta * (k as f64 - self.n_bins() as f64 / 2.0)
    }

    /// Midpoint representative of bin `k`; the outer bins keep the lattice
    /// spacing so every representative is `delta * (k - 2^(bits-1) + 1/2)`.
    pub fn representative(&self, k: usize) -> f64 {
        self.delta * (k as f64 - self.n_bins() as f64 / 2.0 + 0.5)
    }

    /// Bin index (equals the natural-binary label) of `x`. A value exactly
    /// on a threshold joins the upper bin.
    pub fn quantize(&self, x: f64) -> usize {
        let shifted = x / self.delta + self.n_bins() as f64 / 2.0;
        (shifted.floor().max(0.0) as usize).min(self.n_bins() - 1)
    }

    /// Bin probabilities for the normalized source. Computed as differences
    /// of edge CDF values so the total telescopes to exactly one.
    pub fn bin_probabilities(&self) -> Vec<f64> {
        let n = self.n_bins();
        let mut edges = Vec::with_capacity(n + 1);
        edges.push(0.0);
        for j in 1..n {
            edges.push(normal_cdf(self.lower_edge(j)));
        }
        edges.push(1.0);
        (0..n).map(|k| edges[k + 1] - edges[k]).collect()
    }
}

/// Representatives of the set-partitioning subset selected by fixing the
/// low `n_fixed` label bits to `low_bits`: with three-bit labels on the
/// lattice -7..=+7, fixing bit 0 to zero selects {-7, -3, +1, +5} and
/// fixing the low pair to binary 10 selects {-3, +5}.
pub fn subset_points(q: &QuantizerSpec, low_bits: u32, n_fixed: u32) -> Vec<f64> {
    assert!(n_fixed <= q.bits, "cannot fix more bits than the label holds");
    let mask = (1usize << n_fixed) - 1;
    assert!(low_bits as usize <= mask, "pattern is wider than the fixed bit count");
    (0..q.n_bins())
        .filter(|k| k & mask == low_bits as usize)
        .map(|k| q.representative(k))
        .collect()
}

/// Rate pair of one decoding level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevelRate {
    /// Conditional mutual information carried by this bit, given the bits
    /// decoded before it.
    pub mi: f64,
    /// Conditional entropy of this bit given the bits decoded before it.
    pub entropy: f64,
    /// Compression bound for this level: `entropy - mi`.
    pub source_rate: f64,
    /// Code rate the level's channel code must achieve: `1 - source_rate`.
    pub channel_rate: f64,
}

/// Per-level rate allocation plus its totals.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelRates {
    /// One entry per label bit, lowest (decoded first) at index 0.
    pub levels: Vec<LevelRate>,
    /// Total conditional mutual information over all levels.
    pub sum_mi: f64,
    /// Entropy of the full quantized label.
    pub entropy_total: f64,
    /// Mutual information of the unquantized pair; the quantized total can
    /// only fall short of it.
    pub analytic_mi: f64,
}

/// Differential entropy of a Gaussian mixture with common width `sd`,
/// composite trapezoid over the fixed window.
fn mixture_entropy_n(centers: &[f64], weights: &[f64], sd: f64, n_points: usize) -> Result<f64> {
    let step = 2.0 * INT_HALF_WIDTH / (n_points - 1) as f64;
    let inv_norm = 1.0 / (sd * (2.0 * std::f64::consts::PI).sqrt());
    let mut acc = 0.0;
    for i in 0..n_points {
        let x = -INT_HALF_WIDTH + step * i as f64;
        let mut f = 0.0;
        for (c, w) in centers.iter().zip(weights) {
            let z = (x - c) / sd;
            f += w * inv_norm * (-0.5 * z * z).exp();
        }
        let term = if f > 0.0 { -f * f.log2() } else { 0.0 };
        let scale = if i == 0 || i == n_points - 1 { 0.5 } else { 1.0 };
        acc += scale * term;
    }
    let h = acc * step;
    if !h.is_finite() {
        return Err(Error::IntegrationFailure(format!(
            "mixture entropy is not finite (width {sd:.3e}, {} components)",
            centers.len()
        )));
    }
    Ok(h)
}

/// Expected side-information entropy given the low `t` label bits: each
/// pattern contributes its probability times the differential entropy of
/// the Gaussian mixture over its subset's representatives.
fn pattern_entropy_expectation(
    model: &SourceModel,
    q: &QuantizerSpec,
    t: u32,
    n_points: usize,
) -> Result<f64> {
    let probs = q.bin_probabilities();
    let sd = model.conditional_sd();
    let mask = (1usize << t) - 1;
    let mut acc = 0.0;
    for pattern in 0..=mask {
        let members: Vec<usize> = (0..q.n_bins()).filter(|k| k & mask == pattern).collect();
        let p_pattern: f64 = members.iter().map(|&k| probs[k]).sum();
        if p_pattern <= 0.0 {
            continue;
        }
        let centers: Vec<f64> =
            members.iter().map(|&k| model.rho * q.representative(k)).collect();
        let weights: Vec<f64> = members.iter().map(|&k| probs[k] / p_pattern).collect();
        acc += p_pattern * mixture_entropy_n(&centers, &weights, sd, n_points)?;
    }
    Ok(acc)
}

/// Shannon entropy of a probability vector, in bits.
fn discrete_entropy(p: &[f64]) -> f64 {
    p.iter().map(|&x| if x > 0.0 { -x * x.log2() } else { 0.0 }).sum()
}

/// Marginal probabilities of the low `t` label bits.
fn low_bit_pattern_probs(probs: &[f64], t: u32) -> Vec<f64> {
    let mask = (1usize << t) - 1;
    let mut out = vec![0.0; mask + 1];
    for (k, &p) in probs.iter().enumerate() {
        out[k & mask] += p;
    }
    out
}

/// Conditional mutual information of level `i`: what the side information
/// says about bit `i` once the lower bits are known. Equal to the drop in
/// expected subset-mixture entropy when bit `i` joins the conditioning,
/// since the block forms' common conditional-Gaussian term cancels.
pub fn level_mutual_information(level: u32, model: &SourceModel, q: &QuantizerSpec) -> Result<f64> {
    if level >= q.bits {
        return Err(Error::InvalidQuantizer(format!(
            "level {level} is out of range for a {}-bit label",
            q.bits
        )));
    }
    let before = pattern_entropy_expectation(model, q, level, INT_POINTS)?;
    let after = pattern_entropy_expectation(model, q, level + 1, INT_POINTS)?;
    Ok(before - after)
}

/// Mutual information between the side information and the full quantized
/// label, computed directly: marginal-mixture entropy minus the closed-form
/// entropy of the common-width conditional Gaussian. Serves as the
/// independent check that the per-level informations telescope correctly.
pub fn quantized_mi(model: &SourceModel, q: &QuantizerSpec) -> Result<f64> {
    let h_marginal = pattern_entropy_expectation(model, q, 0, INT_POINTS)?;
    let sd = model.conditional_sd();
    let h_conditional =
        0.5 * (2.0 * std::f64::consts::PI * std::f64::consts::E * sd * sd).log2();
    Ok(h_marginal - h_conditional)
}

/// Exact entropy of the quantized label, in bits.
pub fn quantized_entropy(q: &QuantizerSpec, model: &SourceModel) -> f64 {
    debug_assert!(model.normalized, "bin probabilities assume unit variance");
    discrete_entropy(&q.bin_probabilities())
}

/// Full per-level rate allocation. Level entropies and informations both
/// telescope over the same low-bit block index, so the totals are exact
/// sums of the per-level values.
pub fn level_rates(model: &SourceModel, q: &QuantizerSpec) -> Result<LevelRates> {
    let probs = q.bin_probabilities();
    let m = q.bits as usize;
    let mut expectations = Vec::with_capacity(m + 1);
    for t in 0..=q.bits {
        expectations.push(pattern_entropy_expectation(model, q, t, INT_POINTS)?);
    }
    let block_entropy: Vec<f64> =
        (0..=q.bits).map(|t| discrete_entropy(&low_bit_pattern_probs(&probs, t))).collect();

    let mut levels = Vec::with_capacity(m);
    for i in 0..m {
        let mi = expectations[i] - expectations[i + 1];
        let entropy = block_entropy[i + 1] - block_entropy[i];
        let source_rate = entropy - mi;
        levels.push(LevelRate { mi, entropy, source_rate, channel_rate: 1.0 - source_rate });
    }
    Ok(LevelRates {
        levels,
        sum_mi: expectations[0] - expectations[m],
        entropy_total: block_entropy[m],
        analytic_mi: model.analytic_mi(),
    })
}

/// Reconciliation efficiency: the share of the true mutual information
/// kept after paying the compression overhead,
/// `(H(label) - total source rate) / mi`.
pub fn efficiency(quantized_entropy: f64, source_rate_total: f64, mi: f64) -> Result<f64> {
    if !(mi > 0.0) {
        return Err(Error::NonpositiveInformation(mi));
    }
    Ok((quantized_entropy - source_rate_total) / mi)
}

/// Level rates across a sweep of SNR points (in dB), evaluated in
/// parallel. Each point is an independent pure computation.
pub fn rate_sweep(snr_db: &[f64], q: &QuantizerSpec) -> Result<Vec<(f64, LevelRates)>> {
    snr_db
        .par_iter()
        .map(|&db| {
            let model = SourceModel::from_snr(10f64.powf(db / 10.0))?;
            Ok((db, level_rates(&model, q)?))
        })
        .collect()
}
