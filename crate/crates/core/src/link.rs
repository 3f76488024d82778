//! Post-detection receiver: LS channel estimation, LS data decoding, hard
//! decisions and the error metrics.

use std::f64::consts::FRAC_1_SQRT_2;

use nalgebra::DMatrix;

use crate::error::invalid;
use crate::linalg::solve_gram;
use crate::model::Support;
use crate::{CMat, Error, Result, C64};

/// Unit-average-energy constellation. Inactive nodes transmit the extra
/// symbol 0, which is not part of the alphabet.
#[derive(Debug, Clone, PartialEq)]
pub struct ModulationScheme {
    name: &'static str,
    points: Vec<C64>,
}

impl ModulationScheme {
    pub fn new(name: &'static str, points: Vec<C64>) -> Result<Self> {
        if points.is_empty() {
            return Err(invalid("constellation needs at least one point"));
        }
        let energy = points.iter().map(|p| p.norm_sqr()).sum::<f64>() / points.len() as f64;
        if (energy - 1.0).abs() > 1e-9 {
            return Err(invalid(format!("constellation {name} has mean energy {energy}, expected 1")));
        }
        Ok(Self { name, points })
    }

    /// `(±1 ± j)/√2`, counter-clockwise from the first quadrant.
    pub fn qpsk() -> Self {
        let h = FRAC_1_SQRT_2;
        Self {
            name: "qpsk",
            points: vec![C64::new(h, h), C64::new(-h, h), C64::new(-h, -h), C64::new(h, -h)],
        }
    }

    pub fn bpsk() -> Self {
        Self { name: "bpsk", points: vec![C64::new(1.0, 0.0), C64::new(-1.0, 0.0)] }
    }

    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "qpsk" => Ok(Self::qpsk()),
            "bpsk" => Ok(Self::bpsk()),
            other => Err(Error::Config(format!("unknown modulation {other:?}"))),
        }
    }

    pub fn name(&self) -> &'static str {
        self.name
    }

    pub fn points(&self) -> &[C64] {
        &self.points
    }

    pub fn order(&self) -> usize {
        self.points.len()
    }

    /// Maps a matrix of alphabet indices to constellation points.
    pub fn modulate(&self, indices: &DMatrix<usize>) -> CMat {
        indices.map(|i| self.points[i])
    }
}

/// Everything the receiver produced for one slot.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkResult {
    pub h_hat: CMat,
    pub d_hat: CMat,
    pub symbols_hat: DMatrix<usize>,
    pub ser: f64,
    pub channel_mse: f64,
}

/// `Ĥ = Y_p·Ŝ·(ŜᴴŜ)⁻¹` for the `L×K_a` pilots of the detected nodes.
pub fn ls_channel_estimate(y_p: &CMat, s_hat: &CMat) -> Result<CMat> {
    if y_p.ncols() != s_hat.nrows() {
        return Err(invalid(format!(
            "pilot block has {} columns but pilots have length {}",
            y_p.ncols(),
            s_hat.nrows()
        )));
    }
    let ka = s_hat.ncols();
    if ka == 0 {
        return Ok(CMat::zeros(y_p.nrows(), 0));
    }
    if ka > s_hat.nrows() {
        return Err(Error::SingularSystem { context: "LS channel estimate", condition: f64::INFINITY });
    }
    let gram = s_hat.adjoint() * s_hat;
    // Ĥᴴ = (ŜᴴŜ)⁻¹·Ŝᴴ·Y_pᴴ
    let h_adj = solve_gram(&gram, &(s_hat.adjoint() * y_p.adjoint()), "LS channel estimate")?;
    Ok(h_adj.adjoint())
}

/// `D̂ = (ĤᴴĤ)⁻¹·Ĥᴴ·Y_d`, the left pseudo-inverse of the tall `M×K_a` channel.
pub fn ls_data_decode(y_d: &CMat, h_hat: &CMat) -> Result<CMat> {
    if y_d.nrows() != h_hat.nrows() {
        return Err(invalid(format!(
            "data block has {} rows but channel has {}",
            y_d.nrows(),
            h_hat.nrows()
        )));
    }
    let ka = h_hat.ncols();
    if ka == 0 {
        return Ok(CMat::zeros(0, y_d.ncols()));
    }
    if ka > h_hat.nrows() {
        return Err(Error::SingularSystem { context: "LS data decode", condition: f64::INFINITY });
    }
    solve_gram(&(h_hat.adjoint() * h_hat), &(h_hat.adjoint() * y_d), "LS data decode")
}

/// Nearest constellation point per entry; the lowest index wins ties.
pub fn demodulate(d_soft: &CMat, scheme: &ModulationScheme) -> DMatrix<usize> {
    d_soft.map(|z| {
        let mut best = 0;
        let mut best_dist = f64::INFINITY;
        for (i, p) in scheme.points.iter().enumerate() {
            let dist = (z - p).norm_sqr();
            if dist < best_dist {
                best = i;
                best_dist = dist;
            }
        }
        best
    })
}

/// `Σ_k ‖h_k − ĥ_k‖²/‖h_k‖²` over the columns of the true active channels.
pub fn channel_mse(h_true: &CMat, h_hat: &CMat) -> Result<f64> {
    if h_true.shape() != h_hat.shape() {
        return Err(invalid(format!("channel shapes differ: {:?} vs {:?}", h_true.shape(), h_hat.shape())));
    }
    h_true
        .column_iter()
        .zip(h_hat.column_iter())
        .enumerate()
        .map(|(k, (h, e))| {
            let energy = h.norm_squared();
            if energy == 0.0 {
                Err(invalid(format!("true channel column {k} is zero")))
            } else {
                Ok((h - e).norm_squared() / energy)
            }
        })
        .sum()
}

/// Reorders estimated columns (one per node of `support_hat`) onto the true
/// support; true nodes that were missed get a zero column.
pub fn align_to_support(h_hat: &CMat, support_hat: &Support, support_true: &Support) -> CMat {
    let mut out = CMat::zeros(h_hat.nrows(), support_true.len());
    for (col, node) in support_true.iter().enumerate() {
        if let Ok(pos) = support_hat.indices().binary_search(&node) {
            out.set_column(col, &h_hat.column(pos));
        }
    }
    out
}

/// Symbol error rate over the augmented alphabet.
///
/// Rows of `true_symbols` / `est_symbols` follow `support_true` /
/// `support_hat`. Every (node, slot) pair in `(support_true ∪ support_hat) × N`
/// is scored: a missed node errs in all `N` slots, a false alarm errs wherever
/// it decided a nonzero symbol, which is always. Returns 0 on an empty grid.
pub fn symbol_error_rate(
    true_symbols: &DMatrix<usize>,
    est_symbols: &DMatrix<usize>,
    support_true: &Support,
    support_hat: &Support,
) -> f64 {
    assert_eq!(true_symbols.nrows(), support_true.len(), "true symbol rows must match the true support");
    assert_eq!(est_symbols.nrows(), support_hat.len(), "estimated symbol rows must match the detected support");
    let n = true_symbols.ncols().max(est_symbols.ncols());
    if !support_true.is_empty() && !support_hat.is_empty() {
        assert_eq!(true_symbols.ncols(), est_symbols.ncols(), "symbol blocks must have the same length");
    }
    let union = support_true.union(support_hat);
    if union.is_empty() || n == 0 {
        return 0.0;
    }
    let mut errors = 0usize;
    for node in union.iter() {
        let truth = support_true.indices().binary_search(&node).ok();
        let est = support_hat.indices().binary_search(&node).ok();
        match (truth, est) {
            (Some(t), Some(e)) => {
                errors += (0..n).filter(|&j| true_symbols[(t, j)] != est_symbols[(e, j)]).count();
            }
            _ => errors += n,
        }
    }
    errors as f64 / (union.len() * n) as f64
}

/// Unit-norm spreading codes, one column per node.
pub fn spread(symbols: &CMat, codes: &CMat) -> Result<CMat> {
    if symbols.nrows() != codes.ncols() {
        return Err(invalid("need one spreading code per symbol row"));
    }
    let ld = codes.nrows();
    Ok(CMat::from_fn(symbols.nrows(), symbols.ncols() * ld, |k, j| {
        symbols[(k, j / ld)] * codes[(j % ld, k)]
    }))
}

/// Matched-filter despreading: per node and block, `c_kᴴ·chips / ‖c_k‖²`.
pub fn despread(chips: &CMat, codes: &CMat) -> Result<CMat> {
    let ld = codes.nrows();
    if chips.nrows() != codes.ncols() || ld == 0 || !chips.ncols().is_multiple_of(ld) {
        return Err(invalid("chip block does not match the spreading codes"));
    }
    let energy: Vec<f64> = codes.column_iter().map(|c| c.norm_squared()).collect();
    Ok(CMat::from_fn(chips.nrows(), chips.ncols() / ld, |k, n| {
        let acc: C64 = (0..ld).map(|c| codes[(c, k)].conj() * chips[(k, n * ld + c)]).sum();
        acc / energy[k]
    }))
}
