//! Generalized EXIT functionals and charts.
//!
//! The central quantity is the generalized EXIT value of a density family
//! derivative `dc` against an incoming density `a`:
//!
//! ```text
//! G(dc, a) = [ sum_z sum_w a(z) dc(w) K(z + w) ] / [ sum_w dc(w) K(w) ]
//! ```
//!
//! with `K(x) = log2(1 + exp(-x))` the entropy kernel. Both sums run over
//! grid positions; the numerator is a linear (unfolded) convolution of the
//! two mass vectors against the kernel evaluated at the extended positions,
//! so the FFT form equals the brute-force double sum to rounding error.
//! The ratio is invariant under reparametrization of the family, which is
//! what lets iteration-indexed and noise-indexed families share one code
//! path.
//!
//! A chart pairs two parametric curves built from a family of density pairs
//! `(c_l, a_l)`:
//!
//! * curve: `x = H(c_l)`, `y = G(dc_l, a_l)`;
//! * dual curve: `x = G(da_l, c_{l-lag})`, `y = H(a_l)`.
//!
//! The dual's partner lag keeps each G-EXIT value paired with the density
//! that actually fed that half-iteration. In a decoding trajectory the
//! check-side aggregate `a_l` is produced from the variable-side state whose
//! posterior aggregate is `c_{l-1}`, so trajectory charts use lag 1; in a
//! noise sweep each family member is a self-consistent fixed point and the
//! lag is 0. Pairing the dual with `c_l` in a trajectory skews it half an
//! iteration ahead and makes the two curves interleave even when the
//! decoding tunnel is open.
//!
//! Trajectory families are also truncated at both ends: the first samples
//! still carry the all-ignorance initial condition, and once the decoder
//! stalls the consecutive densities agree to rounding error, where a family
//! derivative measures nothing but noise.
//!
//! When one family is stationary its derivative vanishes and `G` is
//! undefined; the chart then substitutes the entropy of the other family,
//! painting the degenerate vertical (or horizontal) line the continuous
//! limit calls for.

use serde::Serialize;

use crate::convolve::linear_convolve;
use crate::de::{channel_vector, combined_cn_density, combined_vn_density, DeTrace};
use crate::density::{bi_awgn_density, entropy_kernel, LlrDensity};
use crate::ensemble::EnsembleSpec;
use crate::error::{Error, Result};
use crate::grid::GridSpec;

use std::io::Write;

/// Relative cancellation level below which the G-EXIT denominator is
/// treated as vanishing.
const DENOM_REL_EPS: f64 = 1e-9;

/// Total-variation distance between consecutive sweep fixed points above
/// which intermediate densities are interpolated in.
const SWEEP_JUMP_TV: f64 = 0.05;

/// Interpolation resolution used to bridge a sweep discontinuity.
const SWEEP_BRIDGE_STEPS: usize = 32;

/// Total-variation step below which a trajectory is considered stalled and
/// the remaining family members are dropped. Well above rounding noise,
/// well below any real decoder motion.
const STALL_TV: f64 = 1e-9;

/// Leading trajectory samples dropped before charting; they still carry the
/// all-ignorance initial condition rather than the decoding transfer.
const WARMUP_SAMPLES: usize = 2;

/// Depth the chart curve must fall below its dual before the pair counts
/// as crossed. Grazing contact near the threshold stays a touch; calibrated
/// so the flip sits within a few tenths of a percent of the decoding
/// threshold on a regular single-edge ensemble.
const CROSS_TOL: f64 = 5e-3;

/// The BIAWGN channel family on a fixed grid, exposing the density and its
/// finite-difference derivative with respect to the noise level.
#[derive(Debug, Clone, Copy)]
pub struct ChannelFamily {
    pub grid: GridSpec,
}

impl ChannelFamily {
    pub fn density(&self, sigma: f64) -> Result<LlrDensity> {
        bi_awgn_density(sigma, self.grid)
    }

    /// Central-difference derivative of the channel density in sigma,
    /// returned as a signed measure on the grid. The default step is
    /// `1e-3 * sigma`.
    pub fn derivative(&self, sigma: f64, step: Option<f64>) -> Result<LlrDensity> {
        let h = step.unwrap_or(1e-3 * sigma);
        if h.is_nan() || h <= 0.0 {
            return Err(Error::DegenerateStep(h));
        }
        if sigma - h <= 0.0 {
            return Err(Error::NonpositiveSigma(sigma - h));
        }
        let hi = self.density(sigma + h)?;
        let lo = self.density(sigma - h)?;
        let diff: Vec<f64> = hi
            .mass()
            .iter()
            .zip(lo.mass())
            .map(|(a, b)| (a - b) / (2.0 * h))
            .collect();
        if diff.iter().all(|&v| v == 0.0) {
            return Err(Error::DegenerateStep(h));
        }
        LlrDensity::from_mass(self.grid, diff)
    }
}

/// Generalized EXIT value `G(dc, a)`.
///
/// `dc` is a signed measure (a family derivative); `a` is a density. Errors
/// with [`Error::VanishingDenominator`] when the kernel integral against
/// `dc` cancels to numerical noise, which happens exactly when the family
/// is stationary.
pub fn gexit_value(dc: &LlrDensity, a: &LlrDensity) -> Result<f64> {
    if dc.grid() != a.grid() {
        return Err(Error::GridMismatch);
    }
    let grid = dc.grid();
    let n = grid.n_bins;
    let width = grid.bin_width();

    let mut den = 0.0;
    let mut den_abs = 0.0;
    for (j, &m) in dc.mass().iter().enumerate() {
        let k = entropy_kernel(grid.center(j));
        den += m * k;
        den_abs += m.abs() * k;
    }
    if den.abs() <= DENOM_REL_EPS * den_abs || den_abs == 0.0 {
        return Err(Error::VanishingDenominator(den));
    }

    // Numerator: the unfolded convolution lives on positions
    // (m - (n - 1)) * width for m in 0..2n-1; the kernel is evaluated there
    // analytically, so no mass is folded or clipped.
    let conv = linear_convolve(a.mass(), dc.mass());
    let mut num = 0.0;
    for (m, &v) in conv.iter().enumerate() {
        let u = (m as f64 - (n - 1) as f64) * width;
        num += v * entropy_kernel(u);
    }
    Ok(num / den)
}

/// One chart point, in plot coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChartPoint {
    pub x: f64,
    pub y: f64,
}

/// A labeled polyline, ordered by `x`.
#[derive(Debug, Clone, Serialize)]
pub struct GexitCurve {
    pub label: String,
    pub points: Vec<ChartPoint>,
}

/// A chart: the curve, its dual, and whether the two polylines cross.
#[derive(Debug, Clone, Serialize)]
pub struct GexitChart {
    pub curve: GexitCurve,
    pub dual: GexitCurve,
    pub crossed: bool,
}

impl GexitChart {
    /// Writes both polylines as `h,g,label` rows at 12 significant digits.
    ///
    /// `h` is the abscissa and `g` the ordinate of the shared plot plane;
    /// for the dual curve the abscissa is its G-EXIT value and the ordinate
    /// its entropy, per the parametric construction.
    pub fn write_csv<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        writeln!(out, "h,g,label")?;
        for c in [&self.curve, &self.dual] {
            for p in &c.points {
                writeln!(out, "{:.11e},{:.11e},{}", p.x, p.y, c.label)?;
            }
        }
        Ok(())
    }
}

/// Builds the two curves from families of `(c_l, a_l)` pairs using central
/// differences over the family index; the dual's partner sits `dual_lag`
/// members back.
fn build_chart(cs: &[LlrDensity], az: &[LlrDensity], dual_lag: usize) -> Result<GexitChart> {
    if cs.len() != az.len() {
        return Err(Error::GridMismatch);
    }
    let start = 1.max(dual_lag);
    if cs.len() < start + 2 {
        return Err(Error::TooFewPoints(cs.len()));
    }
    let grid = cs[0].grid();
    let diff = |hi: &LlrDensity, lo: &LlrDensity| -> Result<LlrDensity> {
        let d: Vec<f64> =
            hi.mass().iter().zip(lo.mass()).map(|(a, b)| 0.5 * (a - b)).collect();
        LlrDensity::from_mass(grid, d)
    };

    let mut curve = Vec::with_capacity(cs.len() - start - 1);
    let mut dual = Vec::with_capacity(cs.len() - start - 1);
    for l in start..cs.len() - 1 {
        let dc = diff(&cs[l + 1], &cs[l - 1])?;
        let da = diff(&az[l + 1], &az[l - 1])?;

        let g_c = match gexit_value(&dc, &az[l]) {
            Ok(g) => g,
            Err(Error::VanishingDenominator(_)) => az[l].entropy(),
            Err(e) => return Err(e),
        };
        curve.push(ChartPoint { x: cs[l].entropy(), y: g_c });

        let g_a = match gexit_value(&da, &cs[l - dual_lag]) {
            Ok(g) => g,
            Err(Error::VanishingDenominator(_)) => cs[l - dual_lag].entropy(),
            Err(e) => return Err(e),
        };
        dual.push(ChartPoint { x: g_a, y: az[l].entropy() });
    }
    curve.sort_by(|p, q| p.x.total_cmp(&q.x));
    dual.sort_by(|p, q| p.x.total_cmp(&q.x));

    let curve = GexitCurve { label: "curve".into(), points: curve };
    let dual = GexitCurve { label: "dual-curve".into(), points: dual };
    let crossed = curves_cross(&curve, &dual);
    Ok(GexitChart { curve, dual, crossed })
}

/// Builds a chart from a family of `(c_l, a_l)` density pairs, using
/// central differences over the family index as the measure derivatives.
///
/// The pairs are taken as self-consistent (a noise sweep of fixed points,
/// or an analytic family); for decoding trajectories use [`gexit_chart`],
/// which aligns the dual with the half-iteration phase. Stationary families
/// fall back to the entropy of the partner density, so every interior index
/// yields exactly one point on each curve.
pub fn chart_from_families(cs: &[LlrDensity], az: &[LlrDensity]) -> Result<GexitChart> {
    build_chart(cs, az, 0)
}

/// Chart of one decoding trajectory from a trace recorded with
/// per-iteration snapshots.
///
/// Each snapshot contributes the combined node-perspective densities of its
/// half-iterations; the families are cut after the decoder stalls and the
/// first samples are dropped as warm-up.
pub fn gexit_chart(spec: &EnsembleSpec, sigma: f64, trace: &DeTrace) -> Result<GexitChart> {
    let (cs, az) = trajectory_families(spec, sigma, trace, None)?;
    build_chart(&cs, &az, 1)
}

/// Chart of one decoding trajectory seen by a single edge type: the
/// variable-to-check and check-to-variable message densities on that edge.
pub fn per_edge_gexit_chart(
    spec: &EnsembleSpec,
    sigma: f64,
    trace: &DeTrace,
    edge: usize,
) -> Result<GexitChart> {
    if edge >= spec.n_edge_types {
        return Err(Error::InvalidEnsemble(format!(
            "edge {edge} out of range for {} edge types",
            spec.n_edge_types
        )));
    }
    let (cs, az) = trajectory_families(spec, sigma, trace, Some(edge))?;
    build_chart(&cs, &az, 1)
}

/// Maps trace snapshots to phase-aligned chart families: `a_l` is the
/// check-side density produced within snapshot `l`, `c_l` the variable-side
/// density produced from it. Combined node-perspective densities by
/// default, or the single edge's messages.
fn trajectory_families(
    spec: &EnsembleSpec,
    sigma: f64,
    trace: &DeTrace,
    edge: Option<usize>,
) -> Result<(Vec<LlrDensity>, Vec<LlrDensity>)> {
    let snaps = &trace.snapshots;
    if snaps.is_empty() {
        return Err(Error::EmptyTrace);
    }
    let mut cs = Vec::with_capacity(snaps.len());
    let mut az = Vec::with_capacity(snaps.len());
    match edge {
        Some(i) => {
            // Snapshot l holds the variable-side state entering iteration l
            // and the check-side output computed from it, so the message
            // produced from snapshot l's check side is snapshot l+1's
            // variable side.
            for w in snaps.windows(2) {
                cs.push(w[1].vn.get(i).clone());
                az.push(w[0].cn.get(i).clone());
            }
        }
        None => {
            let grid = snaps[0].vn.get(0).grid();
            let channel = channel_vector(spec, sigma, grid)?;
            for s in snaps {
                cs.push(combined_vn_density(spec, &channel, &s.cn)?);
                az.push(combined_cn_density(spec, &s.vn)?);
            }
        }
    }
    truncate_stalled(&mut cs, &mut az);
    let skip = WARMUP_SAMPLES.min(cs.len().saturating_sub(3));
    cs.drain(..skip);
    az.drain(..skip);
    Ok((cs, az))
}

/// Drops trailing family members once consecutive densities agree to within
/// [`STALL_TV`] in total variation; beyond that point a family derivative
/// measures rounding noise, not decoder motion.
fn truncate_stalled(cs: &mut Vec<LlrDensity>, az: &mut Vec<LlrDensity>) {
    let tv = |a: &LlrDensity, b: &LlrDensity| -> f64 {
        0.5 * a.mass().iter().zip(b.mass()).map(|(x, y)| (x - y).abs()).sum::<f64>()
    };
    for l in 1..cs.len() {
        if tv(&cs[l - 1], &cs[l]) < STALL_TV && tv(&az[l - 1], &az[l]) < STALL_TV {
            cs.truncate(l);
            az.truncate(l);
            return;
        }
    }
}

/// Chart of the fixed-point family over a noise sweep.
///
/// For each `sigma` (any order; sorted internally) DE is run to its
/// terminal state and the combined densities form one family member. A
/// discontinuity between consecutive fixed points (the decoding threshold)
/// is bridged by linear interpolation of the densities, which keeps the
/// family piecewise continuous and the area identities telescoping.
pub fn family_sweep_chart(
    spec: &EnsembleSpec,
    grid: GridSpec,
    sigmas: &[f64],
    opts: &crate::de::DeOptions,
) -> Result<GexitChart> {
    if sigmas.len() < 3 {
        return Err(Error::TooFewPoints(sigmas.len()));
    }
    let mut order: Vec<f64> = sigmas.to_vec();
    order.sort_by(f64::total_cmp);

    let mut cs = Vec::new();
    let mut az = Vec::new();
    for &sigma in &order {
        let channel = channel_vector(spec, sigma, grid)?;
        let trace = crate::de::run_de_with_channel(spec, &channel, opts)?;
        cs.push(combined_vn_density(spec, &channel, &trace.final_cn)?);
        az.push(combined_cn_density(spec, &trace.final_vn)?);
    }

    // Bridge jumps so consecutive family members stay close.
    let tv = |a: &LlrDensity, b: &LlrDensity| -> f64 {
        0.5 * a.mass().iter().zip(b.mass()).map(|(x, y)| (x - y).abs()).sum::<f64>()
    };
    let lerp = |a: &LlrDensity, b: &LlrDensity, t: f64| -> Result<LlrDensity> {
        let m: Vec<f64> = a
            .mass()
            .iter()
            .zip(b.mass())
            .map(|(x, y)| (1.0 - t) * x + t * y)
            .collect();
        LlrDensity::from_mass(grid, m)
    };
    let mut bridged_c = Vec::with_capacity(cs.len());
    let mut bridged_a = Vec::with_capacity(az.len());
    for k in 0..cs.len() {
        if k > 0 && tv(&cs[k - 1], &cs[k]).max(tv(&az[k - 1], &az[k])) > SWEEP_JUMP_TV {
            for s in 1..SWEEP_BRIDGE_STEPS {
                let t = s as f64 / SWEEP_BRIDGE_STEPS as f64;
                bridged_c.push(lerp(&cs[k - 1], &cs[k], t)?);
                bridged_a.push(lerp(&az[k - 1], &az[k], t)?);
            }
        }
        bridged_c.push(cs[k].clone());
        bridged_a.push(az[k].clone());
    }

    chart_from_families(&bridged_c, &bridged_a)
}

/// Signed area under a polyline by the trapezoid rule.
///
/// Points must be ordered by non-decreasing `x`; fewer than two points or a
/// backward step is an error.
pub fn curve_area(curve: &GexitCurve) -> Result<f64> {
    let pts = &curve.points;
    if pts.len() < 2 {
        return Err(Error::TooFewPoints(pts.len()));
    }
    let mut area = 0.0;
    for w in pts.windows(2) {
        if w[1].x < w[0].x - 1e-12 {
            return Err(Error::UnorderedCurve);
        }
        area += 0.5 * (w[1].y + w[0].y) * (w[1].x - w[0].x);
    }
    Ok(area)
}

/// Whether the chart curve and its dual cross, in the chart orientation
/// where an open decoding tunnel keeps `curve` above `dual`.
///
/// Both inputs are read as piecewise-linear graphs over `x` (points sorted
/// by `x`, the convention this module produces). The predicate is true when
/// `curve` falls below `dual` by more than the touch tolerance anywhere in
/// their common abscissa range, and also when the two ranges are disjoint:
/// a trajectory that stalls before the curves share any abscissa has closed
/// the tunnel, it just painted too short a stretch to show the overlap.
/// Grazing contact and tangency stay touches.
pub fn curves_cross(curve: &GexitCurve, dual: &GexitCurve) -> bool {
    if curve.points.is_empty() || dual.points.is_empty() {
        return false;
    }
    let lo = curve.points[0].x.max(dual.points[0].x);
    let hi = curve.points[curve.points.len() - 1].x.min(dual.points[dual.points.len() - 1].x);
    if lo > hi {
        return true;
    }
    // The gap is piecewise linear with breakpoints at the union of both
    // curves' knots, so sampling the knots bounds its minimum exactly.
    let mut xs: Vec<f64> = curve
        .points
        .iter()
        .chain(&dual.points)
        .map(|p| p.x)
        .filter(|&x| (lo..=hi).contains(&x))
        .collect();
    xs.push(lo);
    xs.push(hi);

    let eval = |c: &GexitCurve, x: f64| -> f64 {
        let pts = &c.points;
        let i = pts.partition_point(|p| p.x < x);
        if i == 0 {
            return pts[0].y;
        }
        if i == pts.len() {
            return pts[pts.len() - 1].y;
        }
        let (p, q) = (pts[i - 1], pts[i]);
        if q.x > p.x {
            p.y + (q.y - p.y) * (x - p.x) / (q.x - p.x)
        } else {
            p.y
        }
    };

    xs.iter().any(|&x| eval(curve, x) - eval(dual, x) < -CROSS_TOL)
}
