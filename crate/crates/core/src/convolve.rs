//! Convolution operators for LLR densities and polynomial evaluation.
//!
//! Two products drive every analysis in this crate:
//!
//! * the variable-node convolution, the density of a sum of independent
//!   LLRs, computed here by FFT on the uniform grid and folded back into
//!   range (it matches the direct quadratic form to better than 1e-10);
//! * the check-node convolution, the density of
//!   `2 atanh(tanh(A/2) tanh(B/2))`, computed by exact pairwise combination
//!   of bins with mass split linearly between the two bracketing output
//!   bins. The pairwise rule is exact over the grid, only placement within
//!   one bin width is interpolated.
//!
//! The check-node operator dominates runtime, so the per-pair output bin and
//! interpolation weight are precomputed once per grid and cached. A weight
//! kept in `f32` only moves mass within one bin (position error below
//! 1e-9 LLR), while the split itself stays exactly mass-preserving.

use std::cell::RefCell;
use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use once_cell::sync::Lazy;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::density::{delta_inf, delta_zero, DensityVector, LlrDensity};
use crate::ensemble::{CheckNodeRow, VariableNodeRow};
use crate::error::{Error, Result};
use crate::grid::GridSpec;

/// Masses below this are flushed to exact zero after each operator so that
/// supports stay finite. The discarded total is at most `n_bins * 1e-300`,
/// far below the 1e-8 mass-conservation budget.
const FLUSH_EPS: f64 = 1e-300;

/// Largest grid for which the pairwise check-node table is precomputed.
/// Beyond this the quadratic loop computes positions on the fly.
const CHK_TABLE_MAX_BINS: usize = 8193;

/// Number of cached check-node tables kept alive at once.
const CHK_TABLE_CACHE_SLOTS: usize = 3;

// ---------------------------------------------------------------------------
// Variable-node convolution
// ---------------------------------------------------------------------------

struct FftCtx {
    planner: FftPlanner<f64>,
    plans: HashMap<(usize, bool), Arc<dyn Fft<f64>>>,
}

impl FftCtx {
    fn plan(&mut self, len: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
        self.plans
            .entry((len, inverse))
            .or_insert_with(|| {
                if inverse {
                    self.planner.plan_fft_inverse(len)
                } else {
                    self.planner.plan_fft_forward(len)
                }
            })
            .clone()
    }
}

thread_local! {
    static FFT_CTX: RefCell<FftCtx> = RefCell::new(FftCtx {
        planner: FftPlanner::new(),
        plans: HashMap::new(),
    });
}

/// Linear convolution of two equal-length real sequences (signed values
/// allowed), length `2n - 1`, via one packed complex FFT round trip.
pub(crate) fn linear_convolve(a: &[f64], b: &[f64]) -> Vec<f64> {
    assert_eq!(a.len(), b.len());
    let n = a.len();
    let conv_len = 2 * n - 1;
    let fft_len = conv_len.next_power_of_two();

    let spectrum_product = FFT_CTX.with(|ctx| {
        let mut ctx = ctx.borrow_mut();
        let fwd = ctx.plan(fft_len, false);
        let inv = ctx.plan(fft_len, true);

        // Pack both real inputs into one complex transform.
        let mut buf: Vec<Complex<f64>> = (0..fft_len)
            .map(|k| {
                if k < n {
                    Complex::new(a[k], b[k])
                } else {
                    Complex::new(0.0, 0.0)
                }
            })
            .collect();
        fwd.process(&mut buf);

        // Split the packed spectrum: for x = a + i b,
        // A[k] = (X[k] + conj(X[-k])) / 2 and B[k] = (X[k] - conj(X[-k])) / 2i.
        let mut prod = vec![Complex::new(0.0, 0.0); fft_len];
        for k in 0..fft_len {
            let km = if k == 0 { 0 } else { fft_len - k };
            let xk = buf[k];
            let xm = buf[km].conj();
            let ak = 0.5 * (xk + xm);
            let bk = Complex::new(0.0, -0.5) * (xk - xm);
            prod[k] = ak * bk;
        }
        inv.process(&mut prod);
        prod
    });

    let scale = 1.0 / fft_len as f64;
    spectrum_product.iter().take(conv_len).map(|v| v.re * scale).collect()
}

/// Density of `A + B` for independent LLRs with densities `a` and `b`.
///
/// The linear convolution is computed by a packed complex FFT; sums that
/// land outside the grid fold into the end bins. The result matches the
/// direct quadratic convolution to better than 1e-10 per bin.
pub fn var_convolve(a: &LlrDensity, b: &LlrDensity) -> Result<LlrDensity> {
    if a.grid() != b.grid() {
        return Err(Error::GridMismatch);
    }
    let grid = a.grid();
    let n = grid.n_bins;
    let lin = linear_convolve(a.mass(), b.mass());

    // Fold the linear convolution back onto the grid. Sum index i + j maps
    // to output bin (i + j) - center; out-of-range mass saturates.
    let center = grid.center_index();
    let mut out = vec![0.0f64; n];
    for (j, &m) in lin.iter().enumerate() {
        let k = j.saturating_sub(center).min(n - 1);
        out[k] += m;
    }
    for v in out.iter_mut() {
        // FFT rounding can leave magnitudes around 1e-16 of either sign.
        if *v < FLUSH_EPS {
            *v = 0.0;
        }
    }
    LlrDensity::from_mass(grid, out)
}

// ---------------------------------------------------------------------------
// Check-node convolution
// ---------------------------------------------------------------------------

/// Precomputed output placement for every unordered bin pair `(i, j <= i)`.
/// Entry `tri(i) + j` holds the lower output bin and the fraction of mass
/// that goes to the next-higher bin.
struct ChkTable {
    idx: Vec<u16>,
    frac: Vec<f32>,
}

#[inline]
fn tri(i: usize) -> usize {
    i * (i + 1) / 2
}

/// `tanh(x/2)` per bin center, with the end bins saturated to exactly -1
/// and +1. The end bins hold all mass folded in from beyond the grid, so
/// the check rule treats them as certain messages; this also makes
/// `delta_inf` an exact identity of the operator.
fn tanh_half_grid(grid: GridSpec) -> Vec<f64> {
    let n = grid.n_bins;
    let mut t: Vec<f64> = grid.centers().map(|x| (0.5 * x).tanh()).collect();
    t[0] = -1.0;
    t[n - 1] = 1.0;
    t
}

impl ChkTable {
    fn build(grid: GridSpec) -> Self {
        let n = grid.n_bins;
        let len = tri(n - 1) + n;
        let mut idx = vec![0u16; len];
        let mut frac = vec![0f32; len];
        let tanh_half = tanh_half_grid(grid);

        let compute_row = |i: usize, idx_row: &mut [u16], frac_row: &mut [f32]| {
            let ti = tanh_half[i];
            for j in 0..=i {
                let z = 2.0 * (ti * tanh_half[j]).atanh();
                let u = grid.position(z);
                let (k, w) = if u <= 0.0 {
                    (0usize, 0.0)
                } else if u >= (n - 1) as f64 {
                    (n - 1, 0.0)
                } else {
                    let k = u.floor() as usize;
                    (k, u - k as f64)
                };
                idx_row[j] = k as u16;
                frac_row[j] = w as f32;
            }
        };

        if rayon::current_num_threads() > 1 && n > 2048 {
            // Split the triangle into row blocks of similar pair count.
            let rows: Vec<usize> = (0..n).collect();
            let mut slices: Vec<(usize, &mut [u16], &mut [f32])> = Vec::with_capacity(n);
            {
                let mut idx_rest: &mut [u16] = &mut idx;
                let mut frac_rest: &mut [f32] = &mut frac;
                for &i in &rows {
                    let (ia, ib) = idx_rest.split_at_mut(i + 1);
                    let (fa, fb) = frac_rest.split_at_mut(i + 1);
                    slices.push((i, ia, fa));
                    idx_rest = ib;
                    frac_rest = fb;
                }
            }
            use rayon::prelude::*;
            slices
                .into_par_iter()
                .for_each(|(i, idx_row, frac_row)| compute_row(i, idx_row, frac_row));
        } else {
            for i in 0..n {
                let base = tri(i);
                let (idx_row, frac_row) =
                    (&mut idx[base..base + i + 1], &mut frac[base..base + i + 1]);
                compute_row(i, idx_row, frac_row);
            }
        }
        Self { idx, frac }
    }
}

type GridKey = (u64, usize);
type TableCache = Vec<(GridKey, Arc<ChkTable>)>;

static CHK_TABLES: Lazy<Mutex<TableCache>> =
    Lazy::new(|| Mutex::new(Vec::new()));

fn chk_table(grid: GridSpec) -> Arc<ChkTable> {
    let key: GridKey = (grid.llr_max.to_bits(), grid.n_bins);
    let mut cache = CHK_TABLES.lock().expect("check table cache poisoned");
    if let Some((_, t)) = cache.iter().find(|(k, _)| *k == key) {
        return t.clone();
    }
    let table = Arc::new(ChkTable::build(grid));
    if cache.len() >= CHK_TABLE_CACHE_SLOTS {
        cache.remove(0);
    }
    cache.push((key, table.clone()));
    table
}

/// Index range of the nonzero mass, or `None` for an all-zero vector.
fn support(mass: &[f64]) -> Option<(usize, usize)> {
    let lo = mass.iter().position(|&m| m != 0.0)?;
    let hi = mass.iter().rposition(|&m| m != 0.0)?;
    Some((lo, hi))
}

/// Density of the check-node combination of independent inputs `a` and `b`.
///
/// Every bin pair is combined exactly; the resulting mass `a_i b_j` is split
/// between the two output bins bracketing `2 atanh(tanh(x_i/2) tanh(x_j/2))`
/// in proportion to the distance, which preserves both total mass and the
/// placement up to one bin. `delta_inf` is the identity and `delta_zero`
/// is absorbing by this rule, no special cases required.
pub fn chk_convolve(a: &LlrDensity, b: &LlrDensity) -> Result<LlrDensity> {
    if a.grid() != b.grid() {
        return Err(Error::GridMismatch);
    }
    let grid = a.grid();
    let n = grid.n_bins;
    let (sa, sb) = match (support(a.mass()), support(b.mass())) {
        (Some(sa), Some(sb)) => (sa, sb),
        // A zero operand has nothing to combine; propagate the zero vector.
        _ => return Ok(LlrDensity::zeros(grid)),
    };
    let lo = sa.0.min(sb.0);
    let hi = sa.1.max(sb.1);

    let mut out = if n <= CHK_TABLE_MAX_BINS {
        let table = chk_table(grid);
        if rayon::current_num_threads() > 1 && (hi - lo) > 1024 {
            chk_rows_parallel(a.mass(), b.mass(), lo, hi, n, &table)
        } else {
            let mut out = vec![0.0f64; n + 1];
            chk_rows(a.mass(), b.mass(), lo, hi, &table, &mut out);
            out
        }
    } else {
        // Grid too large to table; compute placements on the fly.
        let tanh_half = tanh_half_grid(grid);
        let mut out = vec![0.0f64; n + 1];
        for i in lo..=hi {
            let (ai, bi, ti) = (a.mass()[i], b.mass()[i], tanh_half[i]);
            #[allow(clippy::needless_range_loop)]
            for j in lo..=i {
                let m = if i == j { ai * bi } else { ai * b.mass()[j] + a.mass()[j] * bi };
                if m == 0.0 {
                    continue;
                }
                let z = 2.0 * (ti * tanh_half[j]).atanh();
                let u = grid.position(z);
                if u <= 0.0 {
                    out[0] += m;
                } else if u >= (n - 1) as f64 {
                    out[n - 1] += m;
                } else {
                    let k = u.floor() as usize;
                    let w = u - k as f64;
                    out[k] += m * (1.0 - w);
                    out[k + 1] += m * w;
                }
            }
        }
        out
    };

    // Slot n exists only so the inner loop never branches on k+1 overflow.
    out[n - 1] += out[n];
    out.truncate(n);
    for v in out.iter_mut() {
        if *v < FLUSH_EPS {
            *v = 0.0;
        }
    }
    LlrDensity::from_mass(grid, out)
}

/// Serial pairwise accumulation over rows `lo..=hi` of the triangle.
fn chk_rows(a: &[f64], b: &[f64], lo: usize, hi: usize, table: &ChkTable, out: &mut [f64]) {
    for i in lo..=hi {
        let (ai, bi) = (a[i], b[i]);
        let base = tri(i);
        if ai != 0.0 || bi != 0.0 {
            for j in lo..i {
                let m = ai * b[j] + a[j] * bi;
                if m == 0.0 {
                    continue;
                }
                let e = base + j;
                let k = table.idx[e] as usize;
                let w = table.frac[e] as f64;
                out[k] += m * (1.0 - w);
                out[k + 1] += m * w;
            }
        }
        let m = ai * bi;
        if m != 0.0 {
            let e = base + i;
            let k = table.idx[e] as usize;
            let w = table.frac[e] as f64;
            out[k] += m * (1.0 - w);
            out[k + 1] += m * w;
        }
    }
}

/// Parallel variant: contiguous row blocks of similar pair count, each
/// accumulating into a private buffer that is then summed.
fn chk_rows_parallel(
    a: &[f64],
    b: &[f64],
    lo: usize,
    hi: usize,
    n: usize,
    table: &ChkTable,
) -> Vec<f64> {
    use rayon::prelude::*;
    let threads = rayon::current_num_threads();
    let total_pairs: usize = tri(hi + 1) - tri(lo);
    let target = total_pairs / threads + 1;
    let mut blocks: Vec<(usize, usize)> = Vec::with_capacity(threads + 1);
    let mut start = lo;
    let mut acc = 0usize;
    for i in lo..=hi {
        acc += i + 1 - lo;
        if acc >= target || i == hi {
            blocks.push((start, i));
            start = i + 1;
            acc = 0;
        }
    }
    blocks
        .into_par_iter()
        .map(|(r0, r1)| {
            let mut out = vec![0.0f64; n + 1];
            chk_rows(a, b, r0, r1, table, &mut out);
            out
        })
        .reduce(
            || vec![0.0f64; n + 1],
            |mut x, y| {
                for (xv, yv) in x.iter_mut().zip(&y) {
                    *xv += yv;
                }
                x
            },
        )
}

// ---------------------------------------------------------------------------
// Polynomial evaluation with shared power and product caches
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, PartialEq)]
enum Mode {
    Var,
    Chk,
}

fn combine(mode: Mode, a: &LlrDensity, b: &LlrDensity) -> Result<LlrDensity> {
    match mode {
        Mode::Var => var_convolve(a, b),
        Mode::Chk => chk_convolve(a, b),
    }
}

/// Memoized powers of one base density under one convolution.
/// Exponentiation is by squaring; every intermediate power is kept because
/// polynomial rows tend to reuse neighbouring exponents.
struct PowerCache {
    base: Arc<LlrDensity>,
    mode: Mode,
    memo: HashMap<u32, Arc<LlrDensity>>,
}

impl PowerCache {
    fn new(base: &LlrDensity, mode: Mode) -> Self {
        Self { base: Arc::new(base.clone()), mode, memo: HashMap::new() }
    }

    fn power(&mut self, e: u32) -> Result<Arc<LlrDensity>> {
        debug_assert!(e >= 1, "zero powers are handled by the row product");
        if e == 1 {
            return Ok(self.base.clone());
        }
        if let Some(p) = self.memo.get(&e) {
            return Ok(p.clone());
        }
        let half = self.power(e / 2)?;
        let mut v = combine(self.mode, &half, &half)?;
        if e % 2 == 1 {
            v = combine(self.mode, &v, &self.base)?;
        }
        let v = Arc::new(v);
        self.memo.insert(e, v.clone());
        Ok(v)
    }
}

/// Evaluates mixtures of variable-node monomials
/// `coeff * prod_j R_j^(b_j) * prod_i Q_i^(d_i)` under the variable-node
/// convolution, sharing powers and whole row products across calls.
///
type ProductCache = HashMap<(Box<[u32]>, Box<[u32]>), Arc<LlrDensity>>;

/// Coefficients are used exactly as given; callers normalize when a
/// probability mixture is wanted.
pub struct VarMixer {
    grid: GridSpec,
    chan: Vec<PowerCache>,
    edge: Vec<PowerCache>,
    products: ProductCache,
}

impl VarMixer {
    pub fn new(channel: &DensityVector, incoming: &DensityVector) -> Result<Self> {
        let grid = channel.grid();
        if incoming.grid() != grid {
            return Err(Error::GridMismatch);
        }
        Ok(Self {
            grid,
            chan: channel.iter().map(|d| PowerCache::new(d, Mode::Var)).collect(),
            edge: incoming.iter().map(|d| PowerCache::new(d, Mode::Var)).collect(),
            products: HashMap::new(),
        })
    }

    /// Density of one monomial row. The empty product is `delta_zero`, the
    /// identity of the variable-node convolution.
    pub fn row_density(&mut self, received: &[u32], degrees: &[u32]) -> Result<Arc<LlrDensity>> {
        if received.len() != self.chan.len() || degrees.len() != self.edge.len() {
            return Err(Error::InvalidEnsemble(
                "row exponent vectors do not match the slot counts".into(),
            ));
        }
        let key = (
            received.to_vec().into_boxed_slice(),
            degrees.to_vec().into_boxed_slice(),
        );
        if let Some(p) = self.products.get(&key) {
            return Ok(p.clone());
        }
        let mut acc: Option<LlrDensity> = None;
        for (cache, &e) in self.chan.iter_mut().zip(received).chain(self.edge.iter_mut().zip(degrees))
        {
            if e == 0 {
                continue;
            }
            let p = cache.power(e)?;
            acc = Some(match acc {
                None => (*p).clone(),
                Some(d) => var_convolve(&d, &p)?,
            });
        }
        let d = Arc::new(acc.unwrap_or_else(|| delta_zero(self.grid)));
        self.products.insert(key, d.clone());
        Ok(d)
    }

    /// Weighted sum of row densities with the rows' own coefficients.
    pub fn mixture(&mut self, rows: &[VariableNodeRow]) -> Result<LlrDensity> {
        let mut out = LlrDensity::zeros(self.grid);
        for row in rows {
            if row.coeff == 0.0 {
                continue;
            }
            let d = self.row_density(&row.received, &row.degrees)?;
            for (o, &m) in out.mass_mut().iter_mut().zip(d.mass()) {
                *o += row.coeff * m;
            }
        }
        Ok(out)
    }
}

/// Check-node counterpart of [`VarMixer`]: monomials `coeff * prod_i P_i^(d_i)`
/// under the check-node convolution. The empty product is `delta_inf`.
pub struct ChkMixer {
    grid: GridSpec,
    edge: Vec<PowerCache>,
    products: HashMap<Box<[u32]>, Arc<LlrDensity>>,
}

impl ChkMixer {
    pub fn new(incoming: &DensityVector) -> Self {
        Self {
            grid: incoming.grid(),
            edge: incoming.iter().map(|d| PowerCache::new(d, Mode::Chk)).collect(),
            products: HashMap::new(),
        }
    }

    pub fn row_density(&mut self, degrees: &[u32]) -> Result<Arc<LlrDensity>> {
        if degrees.len() != self.edge.len() {
            return Err(Error::InvalidEnsemble(
                "row degree vector does not match the edge count".into(),
            ));
        }
        let key = degrees.to_vec().into_boxed_slice();
        if let Some(p) = self.products.get(&key) {
            return Ok(p.clone());
        }
        let mut acc: Option<LlrDensity> = None;
        for (cache, &e) in self.edge.iter_mut().zip(degrees) {
            if e == 0 {
                continue;
            }
            let p = cache.power(e)?;
            acc = Some(match acc {
                None => (*p).clone(),
                Some(d) => chk_convolve(&d, &p)?,
            });
        }
        let d = Arc::new(acc.unwrap_or_else(|| delta_inf(self.grid)));
        self.products.insert(key, d.clone());
        Ok(d)
    }

    pub fn mixture(&mut self, rows: &[CheckNodeRow]) -> Result<LlrDensity> {
        let mut out = LlrDensity::zeros(self.grid);
        for row in rows {
            if row.coeff == 0.0 {
                continue;
            }
            let d = self.row_density(&row.degrees)?;
            for (o, &m) in out.mass_mut().iter_mut().zip(d.mass()) {
                *o += row.coeff * m;
            }
        }
        Ok(out)
    }
}

/// Evaluates a variable-node polynomial given per-slot channel densities and
/// per-edge incoming densities. One-shot wrapper over [`VarMixer`].
pub fn poly_apply_var(
    rows: &[VariableNodeRow],
    channel: &DensityVector,
    incoming: &DensityVector,
) -> Result<LlrDensity> {
    VarMixer::new(channel, incoming)?.mixture(rows)
}

/// Evaluates a check-node polynomial given per-edge incoming densities.
/// One-shot wrapper over [`ChkMixer`].
pub fn poly_apply_chk(rows: &[CheckNodeRow], incoming: &DensityVector) -> Result<LlrDensity> {
    ChkMixer::new(incoming).mixture(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::{bi_awgn_density, delta_at};

    fn small_grid() -> GridSpec {
        GridSpec::new(12.0, 257).unwrap()
    }

    /// Direct quadratic variable-node convolution; the independent reference
    /// for the FFT path. Index sums land exactly on the grid.
    fn naive_var(a: &LlrDensity, b: &LlrDensity) -> LlrDensity {
        let grid = a.grid();
        let n = grid.n_bins;
        let c = grid.center_index();
        let mut out = vec![0.0; n];
        for i in 0..n {
            if a.mass()[i] == 0.0 {
                continue;
            }
            for j in 0..n {
                let m = a.mass()[i] * b.mass()[j];
                if m == 0.0 {
                    continue;
                }
                let k = (i + j).saturating_sub(c).min(n - 1);
                out[k] += m;
            }
        }
        LlrDensity::from_mass(grid, out).unwrap()
    }

    /// Straightforward pairwise check-node reference written without the
    /// table or the triangular traversal. Shares only the end-bin
    /// convention with the implementation: the outermost bins stand for
    /// certainty, so their tanh is exactly +-1.
    fn naive_chk(a: &LlrDensity, b: &LlrDensity) -> LlrDensity {
        let grid = a.grid();
        let n = grid.n_bins;
        let t = |k: usize| -> f64 {
            if k == 0 {
                -1.0
            } else if k == n - 1 {
                1.0
            } else {
                (0.5 * grid.center(k)).tanh()
            }
        };
        let mut out = LlrDensity::zeros(grid);
        for (i, &ma) in a.mass().iter().enumerate() {
            if ma == 0.0 {
                continue;
            }
            for (j, &mb) in b.mass().iter().enumerate() {
                if mb == 0.0 {
                    continue;
                }
                let z = 2.0 * (t(i) * t(j)).atanh();
                out.deposit(z, ma * mb);
            }
        }
        out
    }

    fn max_abs_diff(a: &LlrDensity, b: &LlrDensity) -> f64 {
        a.mass()
            .iter()
            .zip(b.mass())
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    }

    fn tv(a: &LlrDensity, b: &LlrDensity) -> f64 {
        0.5 * a
            .mass()
            .iter()
            .zip(b.mass())
            .map(|(x, y)| (x - y).abs())
            .sum::<f64>()
    }

    #[test]
    fn fft_matches_direct_convolution_to_1e10() {
        let g = small_grid();
        let cases = [
            (bi_awgn_density(1.0, g).unwrap(), bi_awgn_density(2.0, g).unwrap()),
            (bi_awgn_density(0.8, g).unwrap(), delta_at(g, 3.3)),
            (delta_at(g, -4.0), delta_at(g, 11.5)),
        ];
        for (a, b) in &cases {
            let fast = var_convolve(a, b).unwrap();
            let slow = naive_var(a, b);
            assert!(max_abs_diff(&fast, &slow) < 1e-10);
        }
        // Also at the default analysis grid, where the FFT length is largest.
        let g = GridSpec::default();
        let a = bi_awgn_density(2.0, g).unwrap();
        let b = bi_awgn_density(5.94, g).unwrap();
        assert!(max_abs_diff(&var_convolve(&a, &b).unwrap(), &naive_var(&a, &b)) < 1e-10);
    }

    #[test]
    fn var_identities_and_mass() {
        let g = small_grid();
        let a = bi_awgn_density(1.3, g).unwrap();
        let id = var_convolve(&a, &delta_zero(g)).unwrap();
        assert!(tv(&id, &a) < 1e-12, "delta_zero must be the identity");
        let sat = var_convolve(&delta_inf(g), &delta_inf(g)).unwrap();
        assert!((sat.mass()[g.n_bins - 1] - 1.0).abs() < 1e-12, "saturation folds to the top bin");
        assert!((var_convolve(&a, &a).unwrap().total_mass() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn chk_matches_naive_reference() {
        let g = small_grid();
        let a = bi_awgn_density(1.0, g).unwrap();
        let b = bi_awgn_density(2.5, g).unwrap();
        let fast = chk_convolve(&a, &b).unwrap();
        let slow = naive_chk(&a, &b);
        // The table stores interpolation weights in f32, so each pair mass
        // can shift between its two bins by a 6e-8 fraction. Individual
        // pair masses here are below 1e-2, hence the budget.
        assert!(max_abs_diff(&fast, &slow) < 1e-9);
        assert!((fast.total_mass() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn chk_two_point_density_follows_the_four_term_rule() {
        // Two-point symmetric-like density: mass p at +x0, 1-p at -x0.
        let g = small_grid();
        let p = 0.7;
        let x0 = 6.0; // exactly on a grid center: 6.0 / (24/256) is integer
        let mut a = LlrDensity::zeros(g);
        a.deposit(x0, p);
        a.deposit(-x0, 1.0 - p);

        let got = chk_convolve(&a, &a).unwrap();

        // Oracle: enumerate the four sign combinations directly.
        let z = 2.0 * ((0.5 * x0).tanh() * (0.5 * x0).tanh()).atanh();
        let mut want = LlrDensity::zeros(g);
        want.deposit(z, p * p);
        want.deposit(-z, 2.0 * p * (1.0 - p));
        want.deposit(z, (1.0 - p) * (1.0 - p));
        // f32 interpolation weights move order-one pair masses by up to a
        // 6e-8 fraction of a bin.
        assert!(max_abs_diff(&got, &want) < 1e-7);
    }

    #[test]
    fn chk_identities() {
        let g = small_grid();
        let a = bi_awgn_density(0.9, g).unwrap();
        let id = chk_convolve(&a, &delta_inf(g)).unwrap();
        assert!(tv(&id, &a) < 1e-9, "delta_inf must be the identity, tv={}", tv(&id, &a));
        let absorbed = chk_convolve(&a, &delta_zero(g)).unwrap();
        assert!(
            (absorbed.mass()[g.center_index()] - 1.0).abs() < 1e-12,
            "delta_zero must absorb"
        );
    }

    #[test]
    fn table_path_equals_on_the_fly_path() {
        // Compare against the non-tabled loop by going through a grid just
        // over the table limit is too slow here; instead rebuild the on-the-
        // fly arithmetic inline for a mid-size grid.
        let g = GridSpec::new(18.0, 513).unwrap();
        let a = bi_awgn_density(1.1, g).unwrap();
        let b = delta_at(g, 2.71);
        let fast = chk_convolve(&a, &b).unwrap();
        let slow = naive_chk(&a, &b);
        assert!(max_abs_diff(&fast, &slow) < 1e-9);
    }

    #[test]
    fn var_powers_match_repeated_convolution() {
        // sigma = 4 keeps the 7-fold sum 8 standard deviations inside the
        // grid, so folding cannot distinguish the two evaluation orders and
        // the convolution itself is exactly associative.
        let g = small_grid();
        let a = bi_awgn_density(4.0, g).unwrap();
        let mut naive = a.clone();
        for _ in 1..7 {
            naive = var_convolve(&naive, &a).unwrap();
        }
        let mut cache = PowerCache::new(&a, Mode::Var);
        let fast = cache.power(7).unwrap();
        assert!(tv(&fast, &naive) < 1e-10, "tv = {}", tv(&fast, &naive));
    }

    #[test]
    fn chk_powers_match_the_sign_algebra_closed_form() {
        // Mass on the saturated end bins combines without interpolation, so
        // exponentiation must reproduce the closed form exactly: combining k
        // independent certain messages with P(+) = p gives
        // P(+) = (1 + (2p - 1)^k) / 2.
        let g = small_grid();
        let n = g.n_bins;
        let p = 0.8;
        let mut base = LlrDensity::zeros(g);
        base.mass_mut()[n - 1] = p;
        base.mass_mut()[0] = 1.0 - p;

        for k in [2u32, 3, 5, 9] {
            let mut cache = PowerCache::new(&base, Mode::Chk);
            let d = cache.power(k).unwrap();
            let plus = d.mass()[n - 1];
            let want = 0.5 * (1.0 + (2.0 * p - 1.0f64).powi(k as i32));
            assert!((plus - want).abs() < 1e-12, "k={k}: {plus} vs {want}");
            assert!((d.total_mass() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn chk_powers_match_repeated_convolution_up_to_quantization() {
        // The two evaluation orders place pair masses through different
        // intermediate interpolations, so bin-wise mass agrees only to
        // quantization order; the downstream functionals agree much closer.
        let g = GridSpec::new(12.0, 513).unwrap();
        let a = bi_awgn_density(2.0, g).unwrap();
        let mut naive = a.clone();
        for _ in 1..5 {
            naive = chk_convolve(&naive, &a).unwrap();
        }
        let mut cache = PowerCache::new(&a, Mode::Chk);
        let fast = cache.power(5).unwrap();
        assert!(tv(&fast, &naive) < 5e-3, "tv = {}", tv(&fast, &naive));
        let dh = (fast.entropy() - naive.entropy()).abs();
        let dp = (fast.error_probability() - naive.error_probability()).abs();
        assert!(dh < 1e-4, "entropy gap {dh}");
        assert!(dp < 1e-4, "error probability gap {dp}");
    }

    #[test]
    fn high_degree_powers_stay_close_to_naive_for_concentrated_channels() {
        // Mean 2/sigma^2 is small enough at sigma = 5 that degree-60 sums
        // stay inside the grid and folding order cannot matter.
        let g = GridSpec::default();
        let a = bi_awgn_density(5.0, g).unwrap();
        let mut naive = a.clone();
        for _ in 1..60 {
            naive = var_convolve(&naive, &a).unwrap();
        }
        let mut cache = PowerCache::new(&a, Mode::Var);
        let fast = cache.power(60).unwrap();
        assert!(tv(&fast, &naive) < 1e-8, "tv = {}", tv(&fast, &naive));
    }

    #[test]
    fn mixers_handle_zero_degree_rows_with_the_right_identity() {
        let g = small_grid();
        let ch = DensityVector::new(vec![delta_zero(g), bi_awgn_density(1.0, g).unwrap()]).unwrap();
        let q = DensityVector::new(vec![delta_at(g, 1.0)]).unwrap();

        // Row with no factors at all: variable identity is delta_zero.
        let rows = vec![VariableNodeRow { coeff: 1.0, received: vec![0, 0], degrees: vec![0] }];
        let d = poly_apply_var(&rows, &ch, &q).unwrap();
        assert_eq!(d.mass()[g.center_index()], 1.0);

        // Check identity is delta_inf.
        let rows = vec![CheckNodeRow { coeff: 1.0, degrees: vec![0] }];
        let d = poly_apply_chk(&rows, &q).unwrap();
        assert_eq!(d.mass()[g.n_bins - 1], 1.0);
    }

    #[test]
    fn both_operators_commute_exactly() {
        let g = small_grid();
        let a = bi_awgn_density(1.0, g).unwrap();
        let b = bi_awgn_density(2.0, g).unwrap();
        assert!(tv(&var_convolve(&a, &b).unwrap(), &var_convolve(&b, &a).unwrap()) < 1e-12);
        assert!(tv(&chk_convolve(&a, &b).unwrap(), &chk_convolve(&b, &a).unwrap()) < 1e-12);
    }

    #[test]
    fn var_convolution_is_associative_away_from_the_grid_ends() {
        // Means and spreads chosen so the triple sum stays 8 standard
        // deviations inside the grid; then fold order cannot matter.
        let g = small_grid();
        let a = bi_awgn_density(2.5, g).unwrap();
        let b = bi_awgn_density(3.0, g).unwrap();
        let c = delta_at(g, 0.7);
        let ab_c = var_convolve(&var_convolve(&a, &b).unwrap(), &c).unwrap();
        let a_bc = var_convolve(&a, &var_convolve(&b, &c).unwrap()).unwrap();
        assert!(tv(&ab_c, &a_bc) < 1e-10, "tv = {}", tv(&ab_c, &a_bc));
    }

    #[test]
    fn chk_association_order_differs_only_by_quantization_noise() {
        let g = small_grid();
        let a = bi_awgn_density(1.0, g).unwrap();
        let b = bi_awgn_density(2.0, g).unwrap();

        // Smooth third operand: bin-wise mass agrees to quantization order.
        let c = bi_awgn_density(1.5, g).unwrap();
        let ab_c = chk_convolve(&chk_convolve(&a, &b).unwrap(), &c).unwrap();
        let a_bc = chk_convolve(&a, &chk_convolve(&b, &c).unwrap()).unwrap();
        let d = tv(&ab_c, &a_bc);
        assert!(d < 5e-3, "tv = {d}");

        // A point-mass operand concentrates placement error into adjacent
        // bins, so bin-wise mass diverges; the functionals that drive every
        // downstream decision still agree.
        let c = delta_at(g, 1.7);
        let ab_c = chk_convolve(&chk_convolve(&a, &b).unwrap(), &c).unwrap();
        let a_bc = chk_convolve(&a, &chk_convolve(&b, &c).unwrap()).unwrap();
        let dh = (ab_c.entropy() - a_bc.entropy()).abs();
        let dp = (ab_c.error_probability() - a_bc.error_probability()).abs();
        assert!(dh < 5e-4, "entropy gap {dh}");
        assert!(dp < 5e-4, "error probability gap {dp}");
    }
}
