//! Multiple-measurement-vector baselines operating on `Y = Y_pᴴ` (`L×M`).
//!
//! MSBL and M-FOCUSS touch the observations only through `R = Y·Yᴴ/M`, so
//! both iterate on `L×L` quantities regardless of the array size.

use crate::detect::{support_by_rule, DEFAULT_THRESHOLD_RATIO};
use crate::error::invalid;
use crate::linalg::{hpd_inverse, MAX_CONDITION};
use crate::model::{ReceivedPilot, Support};
use crate::pilots::PilotDictionary;
use crate::{CMat, Result, C64};

/// `Y_pᴴ = S·Hᴴ + Wᴴ` with its dictionary and the known noise variance.
#[derive(Debug, Clone)]
pub struct MmvProblem<'a> {
    /// `L×M` observations, one column per antenna.
    pub y: CMat,
    pub dict: &'a PilotDictionary,
    pub noise_variance: f64,
}

impl<'a> MmvProblem<'a> {
    pub fn new(y: CMat, dict: &'a PilotDictionary, noise_variance: f64) -> Result<Self> {
        if y.nrows() != dict.length() {
            return Err(invalid(format!(
                "observation has {} rows but pilot length is {}",
                y.nrows(),
                dict.length()
            )));
        }
        if y.ncols() == 0 {
            return Err(invalid("observation has no antenna columns"));
        }
        if !(noise_variance >= 0.0 && noise_variance.is_finite()) {
            return Err(invalid(format!("noise variance {noise_variance} must be finite and >= 0")));
        }
        Ok(Self { y, dict, noise_variance })
    }

    pub fn from_pilot(pilot: &ReceivedPilot, dict: &'a PilotDictionary, noise_variance: f64) -> Result<Self> {
        Self::new(pilot.entries.adjoint(), dict, noise_variance)
    }

    fn snapshots(&self) -> usize {
        self.y.ncols()
    }

    /// `Y·Yᴴ/M`.
    fn covariance(&self) -> CMat {
        &self.y * self.y.adjoint() / C64::new(self.snapshots() as f64, 0.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineResult {
    pub support: Support,
    /// Per-node power score the support was read from (γ, squared row norm).
    pub weights: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// The solver had to raise its regularization to keep an inner system
    /// invertible.
    pub regularized: bool,
}

fn empty_result(k: usize) -> BaselineResult {
    BaselineResult { support: Support::empty(k), weights: vec![0.0; k], iterations: 0, converged: true, regularized: false }
}

fn trace_re(m: &CMat) -> f64 {
    (0..m.nrows()).map(|i| m[(i, i)].re).sum()
}

/// `S·diag(w)·Sᴴ + ridge·I`.
fn weighted_gram(s: &CMat, weights: &[f64], ridge: f64) -> CMat {
    let l = s.nrows();
    let mut out = CMat::identity(l, l) * C64::new(ridge, 0.0);
    for (k, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            let col = s.column(k);
            out.ger(C64::new(w, 0.0), &col, &col.conjugate(), C64::new(1.0, 0.0));
        }
    }
    out
}

/// Inverts `S·diag(w)·Sᴴ + ridge·I`, growing the ridge tenfold until the
/// system is well conditioned. Returns the inverse and whether it had to grow.
fn regularized_inverse(s: &CMat, weights: &[f64], ridge: f64) -> (CMat, bool) {
    let mut ridge = ridge;
    let mut grown = false;
    loop {
        let q = weighted_gram(s, weights, ridge);
        if let Some(inv) = hpd_inverse(&q) {
            let ok = inv.iter().all(|z| z.re.is_finite() && z.im.is_finite());
            if ok {
                return (inv, grown);
            }
        }
        ridge = if ridge > 0.0 { ridge * 10.0 } else { 1e-12 };
        grown = true;
    }
}

/// Per-column `Re(z_kᴴ·B·z_k)` for `Z = [z_1 … z_K]`.
fn column_quadratic(z: &CMat, b: &CMat) -> Vec<f64> {
    let bz = b * z;
    z.column_iter().zip(bz.column_iter()).map(|(zc, bc)| zc.dotc(&bc).re).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct MsblOptions {
    pub max_iterations: usize,
    /// Stop when `max|Δγ| < tolerance·max γ`.
    pub tolerance: f64,
    /// Relative threshold on γ for the support when `known_sparsity` is unset.
    pub prune_tolerance: f64,
    pub known_sparsity: Option<usize>,
}

impl Default for MsblOptions {
    fn default() -> Self {
        Self { max_iterations: 500, tolerance: 1e-6, prune_tolerance: DEFAULT_THRESHOLD_RATIO, known_sparsity: None }
    }
}

/// M-SBL: EM updates of the row-variance hyperparameters γ under a
/// row-sparse Gaussian prior, with the noise variance held at its true value.
///
/// `γ_k ← γ_k²·s_kᴴΣ⁻¹RΣ⁻¹s_k + γ_k − γ_k²·s_kᴴΣ⁻¹s_k`, `Σ = σ²I + SΓSᴴ`.
pub fn msbl(problem: &MmvProblem<'_>, opts: &MsblOptions) -> Result<BaselineResult> {
    if opts.max_iterations == 0 {
        return Err(invalid("MSBL needs at least one iteration"));
    }
    let s = problem.dict.entries();
    let (l, k) = s.shape();
    let r = problem.covariance();
    let power = trace_re(&r);
    if power <= 0.0 {
        return Ok(empty_result(k));
    }
    // keeps Σ invertible for noiseless data
    let floor = 1e-10 * power / l as f64;
    let mut regularized = problem.noise_variance < floor;
    let noise = problem.noise_variance.max(floor);

    let mut gamma = vec![1.0; k];
    let mut iterations = 0;
    let mut converged = false;
    while iterations < opts.max_iterations {
        iterations += 1;
        let (inv, grown) = regularized_inverse(s, &gamma, noise);
        regularized |= grown;
        let z = &inv * s;
        let q: Vec<f64> = s.column_iter().zip(z.column_iter()).map(|(sc, zc)| sc.dotc(&zc).re).collect();
        let u = column_quadratic(&z, &r);
        let next: Vec<f64> = (0..k)
            .map(|i| {
                let g = gamma[i];
                (g * g * u[i] + g - g * g * q[i]).max(0.0)
            })
            .collect();
        let max = next.iter().copied().fold(0.0, f64::max);
        let change = next.iter().zip(&gamma).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        gamma = next
            .into_iter()
            .map(|g| if g < 1e-12 * max { 0.0 } else { g })
            .collect();
        if max == 0.0 || change < opts.tolerance * max {
            converged = true;
            break;
        }
    }
    Ok(BaselineResult {
        support: support_by_rule(&gamma, opts.known_sparsity, opts.prune_tolerance),
        weights: gamma,
        iterations,
        converged,
        regularized,
    })
}

/// Block-OMP on the Kronecker-lifted model `vec(Y_p) = (S⊗I_M)·vec(H) + w`.
///
/// The block correlation of node `k` with the residual is the `k`-th row of
/// `Sᴴ·Res`, so the lifted `LM×KM` operator is never formed. Each of the `D`
/// iterations adds the node with the largest row norm (lower index on ties)
/// and refits all selected rows by least squares.
pub fn bomp(problem: &MmvProblem<'_>, sparsity: usize) -> Result<BaselineResult> {
    let s = problem.dict.entries();
    let k = s.ncols();
    if sparsity == 0 || sparsity > k {
        return Err(invalid(format!("BOMP sparsity {sparsity} must lie in [1, K={k}]")));
    }
    let y = &problem.y;
    let mut residual = y.clone();
    let mut selected: Vec<usize> = Vec::with_capacity(sparsity);
    let mut weights = vec![0.0; k];
    for _ in 0..sparsity {
        let corr = s.adjoint() * &residual;
        let mut best = None;
        let mut best_score = f64::NEG_INFINITY;
        for node in 0..k {
            if selected.contains(&node) {
                continue;
            }
            let score = corr.row(node).norm();
            if score > best_score {
                best_score = score;
                best = Some(node);
            }
        }
        let node = best.expect("fewer selections than nodes");
        selected.push(node);
        let sub = s.select_columns(&selected);
        let coef = sub
            .clone()
            .svd(true, true)
            .solve(y, f64::EPSILON * MAX_CONDITION.sqrt())
            .map_err(|e| invalid(format!("BOMP least squares failed: {e}")))?;
        residual = y - &sub * &coef;
        for (row, &n) in selected.iter().enumerate() {
            weights[n] = coef.row(row).norm();
        }
    }
    Ok(BaselineResult {
        support: Support::new(k, selected)?,
        weights,
        iterations: sparsity,
        converged: true,
        regularized: false,
    })
}

/// Default M-FOCUSS regularization relative to the noise variance. Larger
/// values drive every row to zero: with unit-power rows the reweighting has no
/// nonzero fixed point once `λ` exceeds about 0.58.
pub const MFOCUSS_NOISE_FACTOR: f64 = 0.5;

#[derive(Debug, Clone, PartialEq)]
pub struct MfocussOptions {
    /// Diversity exponent `p ∈ (0, 1]`.
    pub p: f64,
    /// Tikhonov weight of the inner solve; `None` uses
    /// [`MFOCUSS_NOISE_FACTOR`]`·σ_w²`.
    pub lambda: Option<f64>,
    pub max_iterations: usize,
    /// Stop when row norms change by less than this fraction of the largest.
    pub tolerance: f64,
    pub prune_tolerance: f64,
    pub known_sparsity: Option<usize>,
}

impl Default for MfocussOptions {
    fn default() -> Self {
        Self { p: 0.8, lambda: None, max_iterations: 500, tolerance: 1e-6, prune_tolerance: DEFAULT_THRESHOLD_RATIO, known_sparsity: None }
    }
}

/// Regularized M-FOCUSS: `X = W²Sᴴ(S·W²·Sᴴ + λI)⁻¹·Y` with
/// `w_k = ‖x_k‖^{1−p/2}` from the previous iterate's row norms, taken per
/// snapshot (`‖x_k‖/√M`) so that `λ` is on the scale of the noise variance.
pub fn mfocuss(problem: &MmvProblem<'_>, opts: &MfocussOptions) -> Result<BaselineResult> {
    if !(opts.p > 0.0 && opts.p <= 1.0) {
        return Err(invalid(format!("M-FOCUSS exponent p={} must lie in (0, 1]", opts.p)));
    }
    let lambda = opts.lambda.unwrap_or(MFOCUSS_NOISE_FACTOR * problem.noise_variance);
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(invalid(format!("M-FOCUSS lambda {lambda} must be finite and >= 0")));
    }
    if opts.max_iterations == 0 {
        return Err(invalid("M-FOCUSS needs at least one iteration"));
    }
    let s = problem.dict.entries();
    let k = s.ncols();
    let r = problem.covariance();
    if trace_re(&r) <= 0.0 {
        return Ok(empty_result(k));
    }
    let exponent = 1.0 - opts.p / 2.0;

    let mut w2 = vec![1.0; k];
    let mut norms = vec![0.0; k];
    let mut iterations = 0;
    let mut converged = false;
    let mut regularized = false;
    while iterations < opts.max_iterations {
        iterations += 1;
        let scale: f64 = w2.iter().sum::<f64>() / s.nrows() as f64;
        let floor = 1e-10 * scale;
        let ridge = lambda.max(floor);
        regularized |= lambda < floor;
        let (inv, grown) = regularized_inverse(s, &w2, ridge);
        regularized |= grown;
        let z = &inv * s;
        let u = column_quadratic(&z, &r);
        let next: Vec<f64> = (0..k).map(|i| w2[i] * u[i].max(0.0).sqrt()).collect();
        let max = next.iter().copied().fold(0.0, f64::max);
        let change = next.iter().zip(&norms).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        norms = next
            .into_iter()
            .map(|v| if v < 1e-10 * max { 0.0 } else { v })
            .collect();
        w2 = norms.iter().map(|&v| v.powf(2.0 * exponent)).collect();
        if max == 0.0 || change < opts.tolerance * max {
            converged = true;
            break;
        }
    }
    // threshold row powers, like γ and r̂ for the other detectors
    let powers: Vec<f64> = norms.iter().map(|v| v * v).collect();
    Ok(BaselineResult {
        support: support_by_rule(&powers, opts.known_sparsity, opts.prune_tolerance),
        weights: powers,
        iterations,
        converged,
        regularized,
    })
}
