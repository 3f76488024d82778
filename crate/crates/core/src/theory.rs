//! Numerical evaluation of the LASSO support-recovery guarantees.
//!
//! Success is implied by two events: the sketch error is small
//! (`‖e‖₂ < c₁`) and every active node's empirical power is large
//! (`σ²_min[M] > c₂`). Concentration of both events gives a success
//! probability of at least `1 − (D + 4L²)·γ^{−M}` for any admissible `γ > 1`.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::{Error, Result};

/// Safety factor keeping `γ` strictly below its admissible maximum.
pub const GAMMA_BACKOFF: f64 = 0.99;

fn violated(msg: impl Into<String>) -> Error {
    Error::ConditionViolated(msg.into())
}

/// Scenario quantities entering the bound.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundInputs {
    pub lambda: f64,
    /// Pilot coherence μ_S.
    pub mu: f64,
    /// Number of active nodes `D`.
    pub active: usize,
    pub pilot_length: usize,
    pub antennas: usize,
    /// Two largest active-channel standard deviations.
    pub sigma_max: [f64; 2],
    /// Two largest noise standard deviations (both σ_w for white noise).
    pub noise_sigma_max: [f64; 2],
    /// Largest pilot entry modulus ‖S‖_{∞,∞}.
    pub s_inf_norm: f64,
    /// Smallest active-channel variance.
    pub sigma_min2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LassoConstants {
    pub c1: f64,
    pub c2: f64,
}

/// `c₁ = λ(1+μ²−2μ²D)/(1+μ²−μ²D)` and `c₂ = λ(2(1+μ²)−3μ²D)/(1+μ²−μ²D)²`.
pub fn lasso_constants(lambda: f64, mu: f64, active: usize) -> Result<LassoConstants> {
    let mu2 = mu * mu;
    let d = active as f64;
    let den = 1.0 + mu2 - mu2 * d;
    if !(den > 0.0) {
        return Err(violated(format!("1 + μ² − μ²D = {den} must be positive (μ={mu}, D={active})")));
    }
    Ok(LassoConstants {
        c1: lambda * (1.0 + mu2 - 2.0 * mu2 * d) / den,
        c2: lambda * (2.0 * (1.0 + mu2) - 3.0 * mu2 * d) / (den * den),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConcentrationBeta {
    pub beta: f64,
    /// Maximizer of `β(t) = exp(−2tC/σ²)(1+2t)`.
    pub t0: f64,
}

/// `β(t) = exp(−2tC/σ_min²)·(1+2t)`.
pub fn beta_curve(t: f64, c: f64, sigma_min2: f64) -> f64 {
    (-2.0 * t * c / sigma_min2).exp() * (1.0 + 2.0 * t)
}

/// Exponent base for `P((1/M)Σx_i² > C) ≥ 1 − β^{−M}`; `β = √β(t₀)` with the
/// closed-form maximizer `t₀ = (σ_min²/C − 1)/2`.
pub fn concentration_beta(c: f64, sigma_min2: f64) -> Result<ConcentrationBeta> {
    if !(c > 0.0 && c < sigma_min2) {
        return Err(violated(format!("need 0 < C < σ_min², got C={c}, σ_min²={sigma_min2}")));
    }
    let t0 = 0.5 * (sigma_min2 / c - 1.0);
    Ok(ConcentrationBeta { beta: beta_curve(t0, c, sigma_min2).sqrt(), t0 })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Deltas {
    pub delta1: f64,
    pub delta2: f64,
}

/// `t²/(2a(2a + t))`, infinite when the variance product `a` vanishes.
fn tail_exponent(t: f64, a: f64) -> f64 {
    if a <= 0.0 {
        f64::INFINITY
    } else {
        t * t / (2.0 * a * (2.0 * a + t))
    }
}

fn delta1_raw(inputs: &BoundInputs, c1_split: f64) -> f64 {
    let d = inputs.active as f64;
    let t1 = c1_split * inputs.antennas as f64 / (inputs.s_inf_norm.powi(2) * d * (d - 1.0));
    tail_exponent(t1, inputs.sigma_max[0] * inputs.sigma_max[1])
}

fn delta2_raw(inputs: &BoundInputs, c2_split: f64) -> f64 {
    let l = inputs.pilot_length as f64;
    let t2 = c2_split * inputs.antennas as f64 / (l * (l - 1.0));
    tail_exponent(t2, inputs.noise_sigma_max[0] * inputs.noise_sigma_max[1])
}

/// Concentration exponents δ₁ (cross-channel term) and δ₂ (noise
/// cross-correlation term) for a split `C₁ + C₂ = c₁/L`.
pub fn deltas(inputs: &BoundInputs, c1_split: f64, c2_split: f64) -> Result<Deltas> {
    if inputs.active < 2 || inputs.pilot_length < 2 {
        return Err(violated(format!(
            "need D >= 2 and L >= 2, got D={}, L={}",
            inputs.active, inputs.pilot_length
        )));
    }
    if !(c1_split > 0.0 && c2_split > 0.0) {
        return Err(violated("C₁ and C₂ must be positive"));
    }
    let c1 = lasso_constants(inputs.lambda, inputs.mu, inputs.active)?.c1;
    let target = c1 / inputs.pilot_length as f64;
    if ((c1_split + c2_split) - target).abs() > 1e-9 * target.abs().max(1e-300) {
        return Err(violated(format!("C₁ + C₂ = {} must equal c₁/L = {target}", c1_split + c2_split)));
    }
    Ok(Deltas { delta1: delta1_raw(inputs, c1_split), delta2: delta2_raw(inputs, c2_split) })
}

/// `max(0, 1 − (D + 4L²)·γ^{−M})`.
pub fn recovery_bound(antennas: usize, active: usize, pilot_length: usize, gamma: f64) -> Result<f64> {
    if !(gamma > 1.0) {
        return Err(violated(format!("γ = {gamma} must exceed 1")));
    }
    let alpha = active as f64 + 4.0 * (pilot_length as f64).powi(2);
    let tail = (-(antennas as f64) * gamma.ln()).exp();
    Ok((1.0 - alpha * tail).max(0.0))
}

/// Everything computed on the way to the recovery bound.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundReport {
    pub constants: LassoConstants,
    pub beta_min: f64,
    pub delta1: f64,
    pub delta2: f64,
    pub gamma: f64,
    /// Lower bound on the success probability; 0 when vacuous.
    pub bound: f64,
}

/// Evaluates the bound with `C₁ = c1_fraction·c₁/L`, `C₂ = (1 − c1_fraction)·c₁/L`
/// and `γ = 0.99·min(β_min, e^{δ₁}, e^{δ₂})`.
///
/// With a single active node there is no cross-channel term (δ₁ = ∞); with
/// zero noise there is no noise term (δ₂ = ∞).
pub fn evaluate_bound(inputs: &BoundInputs, c1_fraction: f64) -> Result<BoundReport> {
    if !(c1_fraction > 0.0 && c1_fraction < 1.0) {
        return Err(Error::InvalidParameter(format!("C₁ fraction {c1_fraction} outside (0, 1)")));
    }
    if inputs.active == 0 || inputs.pilot_length == 0 || inputs.antennas == 0 {
        return Err(violated("need D, L and M positive"));
    }
    if !(inputs.lambda > 0.0 && inputs.sigma_min2 > 0.0) {
        return Err(violated("need λ > 0 and σ_min² > 0"));
    }
    if inputs.mu > 0.0 {
        let limit = 0.5 * (1.0 + 1.0 / (inputs.mu * inputs.mu));
        if inputs.active as f64 >= limit {
            return Err(violated(format!("D={} is not below (1 + 1/μ²)/2 = {limit}", inputs.active)));
        }
    }
    let constants = lasso_constants(inputs.lambda, inputs.mu, inputs.active)?;
    if !(constants.c1 > 0.0) {
        return Err(violated(format!("c₁ = {} must be positive", constants.c1)));
    }
    let beta_min = concentration_beta(constants.c2, inputs.sigma_min2)?.beta;
    let share = constants.c1 / inputs.pilot_length as f64;
    let delta1 = if inputs.active < 2 { f64::INFINITY } else { delta1_raw(inputs, c1_fraction * share) };
    let delta2 = if inputs.pilot_length < 2 {
        f64::INFINITY
    } else {
        delta2_raw(inputs, (1.0 - c1_fraction) * share)
    };
    let gamma = GAMMA_BACKOFF * beta_min.min(delta1.exp()).min(delta2.exp());
    let bound = if gamma > 1.0 {
        recovery_bound(inputs.antennas, inputs.active, inputs.pilot_length, gamma)?
    } else {
        0.0
    };
    Ok(BoundReport { constants, beta_min, delta1, delta2, gamma, bound })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConcentrationCheck {
    pub empirical_prob: f64,
    pub bound: f64,
    /// Three binomial standard errors at the empirical rate.
    pub margin: f64,
}

impl ConcentrationCheck {
    pub fn holds(&self) -> bool {
        self.empirical_prob >= self.bound - self.margin
    }
}

/// Monte Carlo estimate of `P((1/M)Σ x_i² > C)` for `x_i ~ N(0, σ²)` next to
/// the guarantee `1 − β^{−M}`.
pub fn concentration_empirical_check<R: Rng + ?Sized>(
    c: f64,
    sigma2: f64,
    antennas: usize,
    trials: usize,
    rng: &mut R,
) -> Result<ConcentrationCheck> {
    if antennas == 0 || trials == 0 {
        return Err(Error::InvalidParameter("need M >= 1 and at least one trial".into()));
    }
    let beta = concentration_beta(c, sigma2)?.beta;
    let sd = sigma2.sqrt();
    let hits = (0..trials)
        .filter(|_| {
            let energy: f64 = (0..antennas)
                .map(|_| {
                    let z: f64 = rng.sample(StandardNormal);
                    (z * sd).powi(2)
                })
                .sum();
            energy / antennas as f64 > c
        })
        .count();
    let p = hits as f64 / trials as f64;
    let bound = 1.0 - beta.powf(-(antennas as f64));
    let margin = 3.0 * (p * (1.0 - p) / trials as f64).sqrt();
    Ok(ConcentrationCheck { empirical_prob: p, bound, margin })
}
