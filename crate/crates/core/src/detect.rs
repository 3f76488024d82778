//! Covariance-domain activity detection.
//!
//! The `L×L` sample covariance of the received pilots is vectorized into an
//! `L²`-dimensional single-measurement problem `x = (conj(S)⊙S)·r + e`, where
//! `r ≥ 0` holds the per-node channel powers, and `r` is recovered with a
//! non-negative LASSO.

use crate::error::invalid;
use crate::linalg::{all_finite, conj_khatri_rao};
use crate::model::{ReceivedPilot, Support};
use crate::pilots::PilotDictionary;
use crate::{CMat, CVec, Result, C64};

/// Sample covariance `Φ_yy` together with its noise-mean-removed vectorization.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceSketch {
    pub phi_yy: CMat,
    /// `vec(Φ_yy) − σ_w²·vec(I_L)`, column-major.
    pub x: CVec,
    pub antennas: usize,
}

impl CovarianceSketch {
    pub fn from_pilot(y: &ReceivedPilot, noise_variance: f64) -> Result<Self> {
        let phi_yy = sample_covariance(y)?;
        let x = noise_removed_vec(&phi_yy, noise_variance)?;
        Ok(Self { phi_yy, x, antennas: y.num_antennas() })
    }
}

/// `(1/M)·Σ_m y_mᴴ y_m` over the antenna rows `y_m` of `Y_p`.
pub fn sample_covariance(y: &ReceivedPilot) -> Result<CMat> {
    let m = y.num_antennas();
    if m == 0 || y.pilot_length() == 0 {
        return Err(invalid("received pilot block is empty"));
    }
    let yy = &y.entries;
    Ok(yy.adjoint() * yy / C64::new(m as f64, 0.0))
}

fn noise_removed_vec(phi: &CMat, noise_variance: f64) -> Result<CVec> {
    if !phi.is_square() {
        return Err(invalid(format!("covariance must be square, got {:?}", phi.shape())));
    }
    if !(noise_variance >= 0.0 && noise_variance.is_finite()) {
        return Err(invalid(format!("noise variance {noise_variance} must be finite and >= 0")));
    }
    let l = phi.nrows();
    let mut x = CVec::from_column_slice(phi.as_slice());
    for i in 0..l {
        x[i * l + i] -= C64::new(noise_variance, 0.0);
    }
    Ok(x)
}

/// Vectorized single-measurement problem `x ≈ A·r`.
#[derive(Debug, Clone, PartialEq)]
pub struct SmvProblem {
    /// `conj(S)⊙S`, `L²×K`.
    pub a: CMat,
    pub x: CVec,
}

pub fn build_smv(phi_yy: &CMat, dict: &PilotDictionary, noise_variance: f64) -> Result<SmvProblem> {
    let l = dict.length();
    if phi_yy.shape() != (l, l) {
        return Err(invalid(format!(
            "covariance is {:?} but dictionary has pilot length {l}",
            phi_yy.shape()
        )));
    }
    Ok(SmvProblem { a: conj_khatri_rao(dict.entries()), x: noise_removed_vec(phi_yy, noise_variance)? })
}

/// Regularization weight of the LASSO.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Lambda {
    Fixed(f64),
    /// `0.1·‖Aᴴx‖_∞·√(ln K / M)`, resolved by [`detect_activity`].
    Auto,
}

/// Relative support threshold τ shared by all detectors that threshold a
/// per-node power estimate.
pub const DEFAULT_THRESHOLD_RATIO: f64 = 0.3;

#[derive(Debug, Clone, PartialEq)]
pub struct LassoOptions {
    pub lambda: Lambda,
    pub max_iterations: usize,
    /// Stop once an accepted step lowers the objective by less than this
    /// fraction of its value.
    pub objective_tolerance: f64,
    /// Relative support threshold τ: keep `k` with `r_k > τ·max r`.
    pub threshold_ratio: f64,
    /// If set, keep exactly this many largest entries instead of thresholding.
    pub known_sparsity: Option<usize>,
    /// Keep the per-iteration objective in [`DetectionResult::objective_history`].
    pub record_history: bool,
}

impl Default for LassoOptions {
    fn default() -> Self {
        Self {
            lambda: Lambda::Auto,
            max_iterations: 5000,
            objective_tolerance: 1e-16,
            threshold_ratio: DEFAULT_THRESHOLD_RATIO,
            known_sparsity: None,
            record_history: false,
        }
    }
}

impl LassoOptions {
    pub fn validate(&self) -> Result<()> {
        if let Lambda::Fixed(l) = self.lambda {
            if !(l >= 0.0 && l.is_finite()) {
                return Err(invalid(format!("lambda {l} must be finite and >= 0")));
            }
        }
        if !(self.threshold_ratio > 0.0 && self.threshold_ratio < 1.0) {
            return Err(invalid(format!("threshold ratio {} outside (0, 1)", self.threshold_ratio)));
        }
        if self.max_iterations == 0 {
            return Err(invalid("max_iterations must be positive"));
        }
        if !(self.objective_tolerance >= 0.0) {
            return Err(invalid("objective tolerance must be >= 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectionResult {
    /// Recovered non-negative powers, one per node.
    pub r_hat: Vec<f64>,
    pub support: Support,
    pub lambda: f64,
    pub iterations: usize,
    pub converged: bool,
    pub final_objective: f64,
    /// `‖A·r̂ − x‖₂`.
    pub residual_norm: f64,
    /// Largest violation of the optimality conditions at `r̂`.
    pub kkt_residual: f64,
    pub objective_history: Vec<f64>,
}

/// `0.1·‖Aᴴx‖_∞·√(ln K / M)`.
pub fn auto_lambda(a: &CMat, x: &CVec, antennas: usize) -> f64 {
    let k = a.ncols().max(1) as f64;
    let corr = a.adjoint() * x;
    let peak = corr.iter().map(|z| z.norm()).fold(0.0, f64::max);
    0.1 * peak * (k.ln() / antennas.max(1) as f64).sqrt()
}

/// Real quadratic form of the complex least-squares term restricted to real `r`:
/// `½‖A·r − x‖² = ½ rᵀGr − bᵀr + ½‖x‖²` with `G = Re(AᴴA)`, `b = Re(Aᴴx)`.
struct Quadratic {
    gram: Vec<f64>,
    linear: Vec<f64>,
    constant: f64,
    n: usize,
}

impl Quadratic {
    fn new(a: &CMat, x: &CVec) -> Self {
        let n = a.ncols();
        let g = a.adjoint() * a;
        let b = a.adjoint() * x;
        let mut gram = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                gram[i * n + j] = 0.5 * (g[(i, j)].re + g[(j, i)].re);
            }
        }
        Self { gram, linear: b.iter().map(|z| z.re).collect(), constant: 0.5 * x.norm_squared(), n }
    }

    fn gram_times(&self, r: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            let row = &self.gram[i * self.n..(i + 1) * self.n];
            *o = row.iter().zip(r).map(|(g, v)| g * v).sum();
        }
    }

    /// Gradient `G·r − b` of the smooth part.
    fn gradient(&self, r: &[f64], out: &mut [f64]) {
        self.gram_times(r, out);
        for (o, b) in out.iter_mut().zip(&self.linear) {
            *o -= b;
        }
    }

    fn objective(&self, r: &[f64], lambda: f64, scratch: &mut [f64]) -> f64 {
        self.gram_times(r, scratch);
        let quad: f64 = r.iter().zip(scratch.iter()).map(|(v, g)| v * g).sum();
        let lin: f64 = r.iter().zip(&self.linear).map(|(v, b)| v * b).sum();
        let l1: f64 = r.iter().sum();
        // clamp rounding below the exact minimum of a nonnegative quantity
        (0.5 * quad - lin + self.constant).max(0.0) + lambda * l1
    }

    /// `f(z) − f(r)` evaluated without cancellation, given `grad_r = G·r − b`:
    /// `dᵀ(grad_r + λ) + ½dᵀGd` with `d = z − r`.
    fn change(&self, r: &[f64], z: &[f64], grad_r: &[f64], lambda: f64, scratch: &mut [f64]) -> f64 {
        let d: Vec<f64> = z.iter().zip(r).map(|(a, b)| a - b).collect();
        self.gram_times(&d, scratch);
        let linear: f64 = d.iter().zip(grad_r).map(|(di, g)| di * (g + lambda)).sum();
        let curvature: f64 = d.iter().zip(scratch.iter()).map(|(di, gi)| di * gi).sum();
        linear + 0.5 * curvature
    }

    /// Largest eigenvalue of `G` by power iteration.
    fn lipschitz(&self) -> f64 {
        let n = self.n;
        let mut v = vec![1.0 / (n as f64).sqrt(); n];
        let mut w = vec![0.0; n];
        let mut estimate = 0.0;
        for _ in 0..500 {
            self.gram_times(&v, &mut w);
            let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm == 0.0 {
                return 0.0;
            }
            for (vi, wi) in v.iter_mut().zip(&w) {
                *vi = wi / norm;
            }
            let converged = (norm - estimate).abs() <= 1e-12 * norm;
            estimate = norm;
            if converged {
                break;
            }
        }
        estimate
    }
}

/// Optimality violation of `r` for `min ½‖A·r − x‖² + λ·Σr` s.t. `r ≥ 0`.
pub fn kkt_residual(a: &CMat, x: &CVec, r: &[f64], lambda: f64) -> f64 {
    let rv = CVec::from_iterator(r.len(), r.iter().map(|&v| C64::new(v, 0.0)));
    let grad = a.adjoint() * (a * rv - x);
    r.iter()
        .zip(grad.iter())
        .map(|(&rk, g)| {
            let d = g.re + lambda;
            if rk > 0.0 {
                d.abs()
            } else {
                (-d).max(0.0)
            }
        })
        .fold(0.0, f64::max)
}

/// Non-negative LASSO `min_r ½‖A·r − x‖₂² + λ·Σ r_k` s.t. `r ≥ 0`, `r` real.
///
/// Monotone FISTA with function-value restart; the objective never increases
/// between iterations. `opts.lambda` must be [`Lambda::Fixed`].
pub fn nn_lasso(a: &CMat, x: &CVec, opts: &LassoOptions) -> Result<DetectionResult> {
    opts.validate()?;
    let lambda = match opts.lambda {
        Lambda::Fixed(l) => l,
        Lambda::Auto => {
            return Err(invalid("automatic lambda needs the antenna count; resolve it first"))
        }
    };
    if a.is_empty() {
        return Err(invalid("measurement matrix is empty"));
    }
    if a.nrows() != x.len() {
        return Err(invalid(format!("A has {} rows but x has length {}", a.nrows(), x.len())));
    }
    if !all_finite(a) || !x.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        return Err(invalid("non-finite entries in LASSO input"));
    }

    let quad = Quadratic::new(a, x);
    let n = quad.n;
    let lip = quad.lipschitz();
    let mut r = vec![0.0; n];
    let mut history = Vec::new();
    let mut scratch = vec![0.0; n];
    // running objective, updated with exactly computed decrements
    let mut f_track = quad.objective(&r, lambda, &mut scratch);
    let mut iterations = 0;
    let mut converged = false;

    if lip > 0.0 {
        let step = 1.0 / (1.01 * lip);
        let mut y = r.clone();
        let mut z = vec![0.0; n];
        let mut grad = vec![0.0; n];
        let mut grad_r = vec![0.0; n];
        let mut t = 1.0f64;
        while iterations < opts.max_iterations {
            iterations += 1;
            quad.gradient(&y, &mut grad);
            for i in 0..n {
                z[i] = (y[i] - step * (grad[i] + lambda)).max(0.0);
            }
            quad.gradient(&r, &mut grad_r);
            let delta = quad.change(&r, &z, &grad_r, lambda, &mut scratch);
            let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
            if delta <= 0.0 {
                for i in 0..n {
                    y[i] = z[i] + ((t - 1.0) / t_next) * (z[i] - r[i]);
                }
                r.copy_from_slice(&z);
                f_track += delta;
                t = t_next;
                if opts.record_history {
                    history.push(f_track);
                }
                if -delta <= opts.objective_tolerance * f_track.abs().max(f64::MIN_POSITIVE) {
                    converged = true;
                    break;
                }
            } else {
                // restart momentum from the last accepted iterate
                y.copy_from_slice(&r);
                t = 1.0;
                if opts.record_history {
                    history.push(f_track);
                }
            }
        }
    } else {
        converged = true;
    }
    let final_objective = quad.objective(&r, lambda, &mut scratch);

    let rv = CVec::from_iterator(n, r.iter().map(|&v| C64::new(v, 0.0)));
    let residual_norm = (a * rv - x).norm();
    let kkt = kkt_residual(a, x, &r, lambda);
    let support = extract_support(&r, opts);
    Ok(DetectionResult {
        r_hat: r,
        support,
        lambda,
        iterations,
        converged,
        final_objective,
        residual_norm,
        kkt_residual: kkt,
        objective_history: history,
    })
}

/// Support of a non-negative estimate: the `known_sparsity` largest positive
/// entries (lower index wins ties), or the entries above `τ·max`.
pub fn extract_support(r_hat: &[f64], opts: &LassoOptions) -> Support {
    support_by_rule(r_hat, opts.known_sparsity, opts.threshold_ratio)
}

pub(crate) fn support_by_rule(weights: &[f64], known: Option<usize>, ratio: f64) -> Support {
    let k = weights.len();
    let max = weights.iter().copied().fold(0.0, f64::max);
    if max <= 0.0 {
        return Support::empty(k);
    }
    let indices = match known {
        Some(d) => {
            let mut order: Vec<usize> = (0..k).filter(|&i| weights[i] > 0.0).collect();
            order.sort_by(|&i, &j| weights[j].total_cmp(&weights[i]).then(i.cmp(&j)));
            order.truncate(d);
            order
        }
        None => (0..k).filter(|&i| weights[i] > ratio * max).collect(),
    };
    Support::new(k, indices).expect("indices are in range")
}

/// Full pipeline: sample covariance, Khatri-Rao sketch, non-negative LASSO,
/// support extraction.
pub fn detect_activity(
    y: &ReceivedPilot,
    dict: &PilotDictionary,
    noise_variance: f64,
    opts: &LassoOptions,
) -> Result<DetectionResult> {
    opts.validate()?;
    if y.pilot_length() != dict.length() {
        return Err(invalid(format!(
            "received pilot length {} does not match dictionary length {}",
            y.pilot_length(),
            dict.length()
        )));
    }
    let phi = sample_covariance(y)?;
    let smv = build_smv(&phi, dict, noise_variance)?;
    let lambda = match opts.lambda {
        Lambda::Fixed(l) => l,
        Lambda::Auto => auto_lambda(&smv.a, &smv.x, y.num_antennas()),
    };
    let resolved = LassoOptions { lambda: Lambda::Fixed(lambda), ..opts.clone() };
    nn_lasso(&smv.a, &smv.x, &resolved)
}
