//! Activity patterns, channel models and received signals.
//!
//! All randomness flows through an explicit generator. Monte Carlo trials get
//! their own stream from [`trial_rng`], so a trial's draws depend only on the
//! master seed and the trial index.

use std::f64::consts::{FRAC_PI_2, PI};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::invalid;
use crate::linalg::{complex_gaussian_matrix, complex_normal};
use crate::pilots::PilotDictionary;
use crate::{CMat, CVec, Result, C64};

/// Default antenna spacing in wavelengths (half-wavelength ULA).
pub const DEFAULT_SPACING_RATIO: f64 = 0.5;
/// Default number of propagation paths for the ULA model.
pub const DEFAULT_PATHS: usize = 200;

/// Independent generator for trial `trial_index` under `seed`.
pub fn trial_rng(seed: u64, trial_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial_index);
    rng
}

/// Set of active node indices out of `K` nodes, kept sorted and unique.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Support {
    indices: Vec<usize>,
    num_nodes: usize,
}

impl Support {
    /// Builds a support from arbitrary-order indices; duplicates are merged.
    pub fn new(num_nodes: usize, mut indices: Vec<usize>) -> Result<Self> {
        indices.sort_unstable();
        indices.dedup();
        if let Some(&last) = indices.last() {
            if last >= num_nodes {
                return Err(invalid(format!(
                    "support index {last} out of range for K={num_nodes}"
                )));
            }
        }
        Ok(Self { indices, num_nodes })
    }

    pub fn empty(num_nodes: usize) -> Self {
        Self { indices: Vec::new(), num_nodes }
    }

    pub fn full(num_nodes: usize) -> Self {
        Self { indices: (0..num_nodes).collect(), num_nodes }
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    /// Total number of nodes `K`.
    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    /// Number of active nodes `D`.
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn contains(&self, k: usize) -> bool {
        self.indices.binary_search(&k).is_ok()
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.indices.iter().copied()
    }

    /// Sorted union of two supports over the same node set.
    pub fn union(&self, other: &Support) -> Support {
        let mut all = self.indices.clone();
        all.extend_from_slice(&other.indices);
        all.sort_unstable();
        all.dedup();
        Support { indices: all, num_nodes: self.num_nodes.max(other.num_nodes) }
    }
}

/// How many nodes are active in a slot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ActivityModel {
    /// Exactly `D` nodes, chosen uniformly.
    Fixed(usize),
    /// Each node active independently with probability `p_a`.
    Bernoulli(f64),
}

pub fn draw_support<R: Rng + ?Sized>(
    num_nodes: usize,
    mode: ActivityModel,
    rng: &mut R,
) -> Result<Support> {
    if num_nodes == 0 {
        return Err(invalid("K must be at least 1"));
    }
    let indices = match mode {
        ActivityModel::Fixed(d) => {
            if d > num_nodes {
                return Err(invalid(format!("D={d} exceeds K={num_nodes}")));
            }
            rand::seq::index::sample(rng, num_nodes, d).into_vec()
        }
        ActivityModel::Bernoulli(p) => {
            if !(0.0..=1.0).contains(&p) {
                return Err(invalid(format!("activity probability {p} outside [0, 1]")));
            }
            (0..num_nodes).filter(|_| rng.random_bool(p)).collect()
        }
    };
    Support::new(num_nodes, indices)
}

/// ULA response `[1, e^{-j2π(d/λ)cosθ}, …, e^{-j2π(M-1)(d/λ)cosθ}]ᵀ`.
pub fn steering_vector(num_antennas: usize, theta: f64, spacing_ratio: f64) -> Result<CVec> {
    if num_antennas == 0 {
        return Err(invalid("M must be at least 1"));
    }
    if !theta.is_finite() || theta.abs() > FRAC_PI_2 + 1e-12 {
        return Err(invalid(format!("angle {theta} outside [-π/2, π/2]")));
    }
    if !spacing_ratio.is_finite() || spacing_ratio <= 0.0 {
        return Err(invalid(format!("spacing ratio {spacing_ratio} must be positive")));
    }
    let phase_step = -2.0 * PI * spacing_ratio * theta.cos();
    Ok(CVec::from_fn(num_antennas, |m, _| C64::from_polar(1.0, phase_step * m as f64)))
}

/// `(1/√P)·Σ_p g_p·a(θ_p)` for explicit path gains and angles.
pub fn ula_channel_vector(
    num_antennas: usize,
    gains: &[C64],
    angles: &[f64],
    spacing_ratio: f64,
) -> Result<CVec> {
    if gains.is_empty() || gains.len() != angles.len() {
        return Err(invalid("need the same nonzero number of path gains and angles"));
    }
    let mut h = CVec::zeros(num_antennas);
    for (&g, &theta) in gains.iter().zip(angles) {
        h.axpy(g, &steering_vector(num_antennas, theta, spacing_ratio)?, C64::new(1.0, 0.0));
    }
    Ok(h / C64::new((gains.len() as f64).sqrt(), 0.0))
}

/// `M×K` channel with zero columns outside the support.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelMatrix {
    pub entries: CMat,
    pub support: Support,
    /// Per-node variance σ_k²; zero for inactive nodes.
    pub variances: Vec<f64>,
}

impl ChannelMatrix {
    pub fn num_antennas(&self) -> usize {
        self.entries.nrows()
    }

    pub fn num_nodes(&self) -> usize {
        self.entries.ncols()
    }

    /// The `M×D` submatrix of active columns, in support order.
    pub fn active_columns(&self) -> CMat {
        self.entries.select_columns(self.support.indices())
    }
}

/// Multipath ULA channel: per active node, `P` paths with `CN(0,1)` gains and
/// angles uniform on `[-π/2, π/2]`.
pub fn draw_channel_ula<R: Rng + ?Sized>(
    num_antennas: usize,
    paths: usize,
    support: &Support,
    spacing_ratio: f64,
    rng: &mut R,
) -> Result<ChannelMatrix> {
    if paths == 0 {
        return Err(invalid("number of paths must be at least 1"));
    }
    if num_antennas == 0 {
        return Err(invalid("M must be at least 1"));
    }
    let k = support.num_nodes();
    let mut entries = CMat::zeros(num_antennas, k);
    let mut variances = vec![0.0; k];
    for node in support.iter() {
        let gains: Vec<C64> = (0..paths).map(|_| complex_normal(rng, 1.0)).collect();
        let angles: Vec<f64> = (0..paths).map(|_| rng.random_range(-FRAC_PI_2..=FRAC_PI_2)).collect();
        let h = ula_channel_vector(num_antennas, &gains, &angles, spacing_ratio)?;
        entries.set_column(node, &h);
        variances[node] = 1.0;
    }
    Ok(ChannelMatrix { entries, support: support.clone(), variances })
}

/// Favorable-propagation Gaussian channel: active column `k` has i.i.d.
/// `CN(0, σ_k²)` entries. `variances` is indexed by node and has length `K`.
pub fn draw_channel_gaussian<R: Rng + ?Sized>(
    num_antennas: usize,
    support: &Support,
    variances: &[f64],
    rng: &mut R,
) -> Result<ChannelMatrix> {
    let k = support.num_nodes();
    if variances.len() != k {
        return Err(invalid(format!("{} variances given for K={k}", variances.len())));
    }
    if num_antennas == 0 {
        return Err(invalid("M must be at least 1"));
    }
    let mut entries = CMat::zeros(num_antennas, k);
    let mut kept = vec![0.0; k];
    for node in support.iter() {
        let var = variances[node];
        if !(var > 0.0 && var.is_finite()) {
            return Err(invalid(format!("node {node} has nonpositive variance {var}")));
        }
        for m in 0..num_antennas {
            entries[(m, node)] = complex_normal(rng, var);
        }
        kept[node] = var;
    }
    Ok(ChannelMatrix { entries, support: support.clone(), variances: kept })
}

/// Per-entry complex noise variance σ_w² (SNR = 1/σ_w² at unit symbol energy).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    variance: f64,
}

impl NoiseSpec {
    pub fn new(variance: f64) -> Result<Self> {
        if !(variance >= 0.0 && variance.is_finite()) {
            return Err(invalid(format!("noise variance {variance} must be finite and >= 0")));
        }
        Ok(Self { variance })
    }

    pub fn noiseless() -> Self {
        Self { variance: 0.0 }
    }

    pub fn from_snr_db(snr_db: f64) -> Result<Self> {
        Self::new(10f64.powf(-snr_db / 10.0))
    }

    pub fn variance(&self) -> f64 {
        self.variance
    }
}

/// Pilot-phase observation `Y_p`, `M×L`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReceivedPilot {
    pub entries: CMat,
}

impl ReceivedPilot {
    pub fn num_antennas(&self) -> usize {
        self.entries.nrows()
    }

    pub fn pilot_length(&self) -> usize {
        self.entries.ncols()
    }
}

/// `Y_p = H·Sᴴ + W`.
pub fn received_pilot<R: Rng + ?Sized>(
    channel: &ChannelMatrix,
    pilots: &PilotDictionary,
    noise: NoiseSpec,
    rng: &mut R,
) -> Result<ReceivedPilot> {
    let s = pilots.entries();
    if channel.num_nodes() != s.ncols() {
        return Err(invalid(format!(
            "channel has {} columns but dictionary has {}",
            channel.num_nodes(),
            s.ncols()
        )));
    }
    let clean = &channel.entries * s.adjoint();
    let w = complex_gaussian_matrix(clean.nrows(), clean.ncols(), noise.variance(), rng);
    Ok(ReceivedPilot { entries: clean + w })
}

/// Data-phase observation `Y_d = H_a·D + W` for `M×K_a` channels and
/// `K_a×N` symbols.
pub fn received_data<R: Rng + ?Sized>(
    active_channels: &CMat,
    symbols: &CMat,
    noise: NoiseSpec,
    rng: &mut R,
) -> Result<CMat> {
    if active_channels.ncols() != symbols.nrows() {
        return Err(invalid(format!(
            "channel has {} columns but symbol block has {} rows",
            active_channels.ncols(),
            symbols.nrows()
        )));
    }
    let clean = active_channels * symbols;
    let w = complex_gaussian_matrix(clean.nrows(), clean.ncols(), noise.variance(), rng);
    Ok(clean + w)
}
