//! Quantized density evolution for multi-edge-type ensembles.
//!
//! One iteration maps the vector of variable-to-check message densities
//! `P^l` (one per edge type) through the check side and back:
//! `Q^{l+1}_i` mixes check rows under the check-node convolution with the
//! row's degree on edge `i` reduced by one (extrinsic), weighted by the
//! edge-perspective fractions; `P^{l+1}_i` does the same on the variable
//! side under the variable-node convolution, with the row's received
//! channel density mixed in. Iteration starts from `P^0 = delta_zero`.
//!
//! Progress is measured on the node-perspective posterior mixture (full
//! degrees, coefficients normalized): its hard-decision error probability
//! is the quantity driven to the target.

use crate::convolve::{ChkMixer, VarMixer};
use crate::density::{bi_awgn_density, delta_zero, DensityVector, LlrDensity};
use crate::ensemble::{CheckNodeRow, EnsembleSpec, VariableNodeRow};
use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::units::{sigma_to_ebn0_db, Unit};

use std::io::Write;

/// Consecutive iterations with `|pe change| < STAGNATION_EPS` after which a
/// run is declared non-converging early.
const STAGNATION_EPS: f64 = 1e-13;
const STAGNATION_ITERS: usize = 50;

/// One channel operating point; conversions lean on [`crate::units`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelSetting {
    pub sigma: f64,
}

impl ChannelSetting {
    pub fn snr_linear(&self) -> f64 {
        1.0 / (self.sigma * self.sigma)
    }

    pub fn snr_db(&self) -> f64 {
        10.0 * self.snr_linear().log10()
    }

    pub fn ebn0_db(&self, rate: f64) -> Result<f64> {
        sigma_to_ebn0_db(self.sigma, rate)
    }

    pub fn from_ebn0_db(ebn0_db: f64, rate: f64) -> Result<Self> {
        Ok(Self { sigma: crate::units::convert_units(rate, ebn0_db, Unit::EbN0Db, Unit::Sigma)? })
    }
}

/// Stopping rules and instrumentation for a DE run.
#[derive(Debug, Clone, Copy)]
pub struct DeOptions {
    pub max_iter: usize,
    pub target_pe: f64,
    /// Record message vectors every this many iterations (and always the
    /// last); `None` records only the final vectors.
    pub snapshot_every: Option<usize>,
}

impl Default for DeOptions {
    fn default() -> Self {
        Self { max_iter: 2000, target_pe: 1e-10, snapshot_every: None }
    }
}

/// Message vectors captured mid-run: `vn` holds `P^l`, `cn` holds `Q^{l+1}`,
/// the pair that enters the posterior mixtures at index `l`.
#[derive(Debug, Clone)]
pub struct Snapshot {
    pub iteration: usize,
    pub vn: DensityVector,
    pub cn: DensityVector,
}

/// Complete record of one DE run.
#[derive(Debug, Clone)]
pub struct DeTrace {
    /// Full iterations executed until convergence, stagnation, or the cap.
    pub iterations: usize,
    /// Posterior error probability after each iteration.
    pub pe_history: Vec<f64>,
    pub converged: bool,
    pub final_vn: DensityVector,
    pub final_cn: DensityVector,
    pub snapshots: Vec<Snapshot>,
}

impl DeTrace {
    /// Writes the `iteration, pe` CSV with values at 12 significant digits.
    pub fn write_csv<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        writeln!(out, "iteration,pe")?;
        for (l, pe) in self.pe_history.iter().enumerate() {
            writeln!(out, "{},{:.11e}", l, pe)?;
        }
        Ok(())
    }
}

/// Received densities per channel slot: slot 0 is the punctured slot and
/// carries `delta_zero`; every further slot carries the BIAWGN density.
pub fn channel_vector(spec: &EnsembleSpec, sigma: f64, grid: GridSpec) -> Result<DensityVector> {
    let mut slots = Vec::with_capacity(spec.n_channels);
    for s in 0..spec.n_channels {
        if s == 0 {
            slots.push(delta_zero(grid));
        } else {
            slots.push(bi_awgn_density(sigma, grid)?);
        }
    }
    DensityVector::new(slots)
}

/// Extrinsic mixture rows for one edge type on the check side: every check
/// row with sockets on `edge`, weighted by its edge-perspective fraction,
/// with the degree on `edge` reduced by one.
pub(crate) fn chk_edge_rows(spec: &EnsembleSpec, edge: usize) -> Result<Vec<CheckNodeRow>> {
    let total = spec.check_sockets(edge);
    if total <= 0.0 {
        return Err(Error::ZeroSockets { edge, side: "check" });
    }
    Ok(spec
        .check_nodes
        .iter()
        .filter(|r| r.coeff > 0.0 && r.degrees[edge] > 0)
        .map(|r| {
            let mut degrees = r.degrees.clone();
            degrees[edge] -= 1;
            CheckNodeRow { coeff: r.coeff * f64::from(r.degrees[edge]) / total, degrees }
        })
        .collect())
}

/// Variable-side counterpart of [`chk_edge_rows`]; the received channel
/// exponents stay untouched.
pub(crate) fn var_edge_rows(spec: &EnsembleSpec, edge: usize) -> Result<Vec<VariableNodeRow>> {
    let total = spec.variable_sockets(edge);
    if total <= 0.0 {
        return Err(Error::ZeroSockets { edge, side: "variable" });
    }
    Ok(spec
        .variable_nodes
        .iter()
        .filter(|r| r.coeff > 0.0 && r.degrees[edge] > 0)
        .map(|r| {
            let mut degrees = r.degrees.clone();
            degrees[edge] -= 1;
            VariableNodeRow {
                coeff: r.coeff * f64::from(r.degrees[edge]) / total,
                received: r.received.clone(),
                degrees,
            }
        })
        .collect())
}

/// Full-degree variable rows with coefficients normalized to a probability
/// mixture; evaluating them yields the posterior (APP) density.
pub(crate) fn app_rows(spec: &EnsembleSpec) -> Vec<VariableNodeRow> {
    let total = spec.variable_mass();
    spec.variable_nodes
        .iter()
        .map(|r| VariableNodeRow {
            coeff: r.coeff / total,
            received: r.received.clone(),
            degrees: r.degrees.clone(),
        })
        .collect()
}

/// Node-perspective posterior mixture over variable types, given the
/// received densities and the current check-to-variable messages.
pub fn combined_vn_density(
    spec: &EnsembleSpec,
    channel: &DensityVector,
    cn_out: &DensityVector,
) -> Result<LlrDensity> {
    let mut d = VarMixer::new(channel, cn_out)?.mixture(&app_rows(spec))?;
    d.renormalize();
    Ok(d)
}

/// Node-perspective mixture over check types (full degrees, coefficients
/// normalized): the aggregate density produced by the check side.
pub fn combined_cn_density(spec: &EnsembleSpec, vn_msgs: &DensityVector) -> Result<LlrDensity> {
    let total = spec.check_mass();
    let rows: Vec<CheckNodeRow> = spec
        .check_nodes
        .iter()
        .map(|r| CheckNodeRow { coeff: r.coeff / total, degrees: r.degrees.clone() })
        .collect();
    let mut d = ChkMixer::new(vn_msgs).mixture(&rows)?;
    d.renormalize();
    Ok(d)
}

/// One full iteration plus the posterior mixture, sharing every power cache.
/// Message densities are renormalized to unit mass after each mixture (see
/// [`LlrDensity::renormalize`] for why skipping this is fatal).
fn step_full(
    spec: &EnsembleSpec,
    channel: &DensityVector,
    vn_msgs: &DensityVector,
    app: &[VariableNodeRow],
) -> Result<(DensityVector, DensityVector, LlrDensity)> {
    check_shapes(spec, channel, vn_msgs)?;
    let mut chk_mixer = ChkMixer::new(vn_msgs);
    let mut cn = Vec::with_capacity(spec.n_edge_types);
    for edge in 0..spec.n_edge_types {
        let mut d = chk_mixer.mixture(&chk_edge_rows(spec, edge)?)?;
        d.renormalize();
        cn.push(d);
    }
    let cn_out = DensityVector::new(cn)?;

    let mut var_mixer = VarMixer::new(channel, &cn_out)?;
    let mut vn = Vec::with_capacity(spec.n_edge_types);
    for edge in 0..spec.n_edge_types {
        let mut d = var_mixer.mixture(&var_edge_rows(spec, edge)?)?;
        d.renormalize();
        vn.push(d);
    }
    let mut posterior = var_mixer.mixture(app)?;
    posterior.renormalize();
    Ok((DensityVector::new(vn)?, cn_out, posterior))
}

/// One full DE iteration: returns the next variable-to-check vector and the
/// check-to-variable vector it was computed from.
pub fn de_step(
    spec: &EnsembleSpec,
    channel: &DensityVector,
    vn_msgs: &DensityVector,
) -> Result<(DensityVector, DensityVector)> {
    let (vn, cn, _) = step_full(spec, channel, vn_msgs, &app_rows(spec))?;
    Ok((vn, cn))
}

fn check_shapes(
    spec: &EnsembleSpec,
    channel: &DensityVector,
    vn_msgs: &DensityVector,
) -> Result<()> {
    if vn_msgs.len() != spec.n_edge_types || channel.len() != spec.n_channels {
        return Err(Error::InvalidEnsemble(format!(
            "density vectors ({} channel, {} edge) do not match the ensemble ({}, {})",
            channel.len(),
            vn_msgs.len(),
            spec.n_channels,
            spec.n_edge_types
        )));
    }
    if channel.grid() != vn_msgs.grid() {
        return Err(Error::GridMismatch);
    }
    Ok(())
}

/// Runs DE from `P^0 = delta_zero` against an arbitrary received-density
/// vector. [`run_de`] supplies the standard punctured-slot vector; passing a
/// custom one exposes what-if experiments such as undoing puncturing.
pub fn run_de_with_channel(
    spec: &EnsembleSpec,
    channel: &DensityVector,
    opts: &DeOptions,
) -> Result<DeTrace> {
    let app = app_rows(spec);
    run_loop(spec, channel, opts, &mut |p| step_full(spec, channel, p, &app))
}

/// One iteration of a message-passing recursion: maps the current
/// variable-to-check vector to the next one, plus the check-to-variable
/// vector and the posterior density the stopping rule reads.
pub(crate) type StepFn<'a> =
    dyn FnMut(&DensityVector) -> Result<(DensityVector, DensityVector, LlrDensity)> + 'a;

/// The shared iteration loop: initial state, stopping rules, bookkeeping,
/// and snapshots. The recursion itself is supplied by `step`, so the exact
/// and projected variants share identical trace semantics.
pub(crate) fn run_loop(
    spec: &EnsembleSpec,
    channel: &DensityVector,
    opts: &DeOptions,
    step: &mut StepFn<'_>,
) -> Result<DeTrace> {
    let grid = channel.grid();
    let mut p = DensityVector::uniform(delta_zero(grid), spec.n_edge_types)?;
    check_shapes(spec, channel, &p)?;

    let mut pe_history = Vec::new();
    let mut snapshots = Vec::new();
    let mut converged = false;
    let mut flat_count = 0usize;
    let mut iterations = 0usize;
    let mut final_cn: Option<DensityVector> = None;

    let mut last_vn_in: Option<DensityVector> = None;
    for l in 0..opts.max_iter {
        let (vn_next, cn_out, posterior) = step(&p)?;
        let pe = posterior.error_probability();

        if opts.snapshot_every.is_some() {
            last_vn_in = Some(p.clone());
        }
        let take_snapshot = opts
            .snapshot_every
            .map(|k| k > 0 && l % k == 0)
            .unwrap_or(false);
        if take_snapshot {
            snapshots.push(Snapshot { iteration: l, vn: p.clone(), cn: cn_out.clone() });
        }

        let prev = pe_history.last().copied();
        pe_history.push(pe);
        iterations = l + 1;
        final_cn = Some(cn_out);

        if pe <= opts.target_pe {
            converged = true;
            p = vn_next;
            break;
        }
        if let Some(prev) = prev {
            if (prev - pe).abs() < STAGNATION_EPS {
                flat_count += 1;
                if flat_count >= STAGNATION_ITERS {
                    p = vn_next;
                    break;
                }
            } else {
                flat_count = 0;
            }
        }
        p = vn_next;
    }

    let final_cn = match final_cn {
        Some(cn) => cn,
        // max_iter >= 1 is not enforced by type; degrade gracefully.
        None => DensityVector::uniform(delta_zero(grid), spec.n_edge_types)?,
    };
    // Make the last recorded state available to chart consumers even when
    // the snapshot cadence did not land on it.
    if let Some(vn_in) = last_vn_in {
        if snapshots.last().map(|s| s.iteration + 1) != Some(iterations) {
            snapshots.push(Snapshot {
                iteration: iterations - 1,
                vn: vn_in,
                cn: final_cn.clone(),
            });
        }
    }

    Ok(DeTrace {
        iterations,
        pe_history,
        converged,
        final_vn: p,
        final_cn,
        snapshots,
    })
}

/// Runs DE for the ensemble at one noise level on the given grid.
pub fn run_de(
    spec: &EnsembleSpec,
    sigma: f64,
    grid: GridSpec,
    opts: &DeOptions,
) -> Result<DeTrace> {
    let channel = channel_vector(spec, sigma, grid)?;
    run_de_with_channel(spec, &channel, opts)
}

/// One bisection probe: the noise level, whether DE converged there, and
/// how many iterations it took.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdProbe {
    pub sigma: f64,
    pub converged: bool,
    pub iterations: usize,
}

/// Outcome of a threshold search.
#[derive(Debug, Clone)]
pub struct ThresholdResult {
    /// Midpoint of the final bracket.
    pub sigma_star: f64,
    /// Every probe evaluated, in evaluation order.
    pub probes: Vec<ThresholdProbe>,
    /// Iteration count of the last converging probe: the comparable
    /// "iterations at threshold" figure.
    pub iterations_at_threshold: usize,
}

/// Bisects a convergence boundary given a probe runner. Shared by the exact
/// and the Gaussian-approximation searches.
pub(crate) fn bisect_threshold(
    mut probe: impl FnMut(f64) -> Result<DeTrace>,
    sigma_lo: f64,
    sigma_hi: f64,
    tol_sigma: f64,
) -> Result<ThresholdResult> {
    if !(sigma_lo > 0.0 && sigma_hi > sigma_lo) {
        return Err(Error::InvalidBracket(format!(
            "need 0 < lo < hi, got [{sigma_lo}, {sigma_hi}]"
        )));
    }
    if tol_sigma.is_nan() || tol_sigma <= 0.0 {
        return Err(Error::DegenerateStep(tol_sigma));
    }
    let mut probes = Vec::new();
    let mut run = |sigma: f64, probes: &mut Vec<ThresholdProbe>| -> Result<ThresholdProbe> {
        let trace = probe(sigma)?;
        let p = ThresholdProbe { sigma, converged: trace.converged, iterations: trace.iterations };
        probes.push(p);
        Ok(p)
    };

    let at_lo = run(sigma_lo, &mut probes)?;
    let at_hi = run(sigma_hi, &mut probes)?;
    match (at_lo.converged, at_hi.converged) {
        (true, false) => {}
        (true, true) => {
            return Err(Error::InvalidBracket(format!(
                "both ends converge: threshold above {sigma_hi}"
            )))
        }
        (false, false) => {
            return Err(Error::InvalidBracket(format!(
                "both ends fail: threshold below {sigma_lo}"
            )))
        }
        (false, true) => {
            return Err(Error::InvalidBracket(
                "inverted bracket: convergence at the noisier end only".into(),
            ))
        }
    }

    let (mut lo, mut hi) = (sigma_lo, sigma_hi);
    let mut its_at_threshold = at_lo.iterations;
    while (hi - lo) > tol_sigma {
        let mid = 0.5 * (lo + hi);
        let p = run(mid, &mut probes)?;
        if p.converged {
            its_at_threshold = p.iterations;
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(ThresholdResult {
        sigma_star: 0.5 * (lo + hi),
        probes,
        iterations_at_threshold: its_at_threshold,
    })
}

/// Finds the DE decoding threshold by bisection on sigma.
///
/// Requires convergence at `sigma_lo` and failure at `sigma_hi`; returns
/// the midpoint of the final bracket of width `tol_sigma`.
pub fn find_threshold(
    spec: &EnsembleSpec,
    grid: GridSpec,
    sigma_lo: f64,
    sigma_hi: f64,
    tol_sigma: f64,
    opts: &DeOptions,
) -> Result<ThresholdResult> {
    bisect_threshold(|sigma| run_de(spec, sigma, grid, opts), sigma_lo, sigma_hi, tol_sigma)
}
