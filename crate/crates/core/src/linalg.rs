//! Small dense helpers shared by the solvers.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::{CMat, Error, Result, C64};

/// Gram matrices with a worse condition number are treated as singular.
pub(crate) const MAX_CONDITION: f64 = 1e12;

/// Circularly-symmetric complex Gaussian sample with `E|z|² = variance`.
pub(crate) fn complex_normal<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> C64 {
    let scale = (variance / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re * scale, im * scale)
}

/// `rows×cols` matrix of i.i.d. complex Gaussian entries, filled column by column.
pub(crate) fn complex_gaussian_matrix<R: Rng + ?Sized>(
    rows: usize,
    cols: usize,
    variance: f64,
    rng: &mut R,
) -> CMat {
    let mut m = CMat::zeros(rows, cols);
    if variance > 0.0 {
        for c in 0..cols {
            for r in 0..rows {
                m[(r, c)] = complex_normal(rng, variance);
            }
        }
    }
    m
}

/// Ratio of extreme singular values; infinite for an exactly singular matrix.
pub(crate) fn condition_number(m: &CMat) -> f64 {
    if m.is_empty() {
        return f64::INFINITY;
    }
    let sv = m.singular_values();
    let max = sv.max();
    let min = sv.min();
    if min <= 0.0 || !min.is_finite() {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Solves `gram · X = rhs` for a Hermitian positive definite `gram`.
pub(crate) fn solve_gram(gram: &CMat, rhs: &CMat, context: &'static str) -> Result<CMat> {
    let condition = condition_number(gram);
    if condition > MAX_CONDITION {
        return Err(Error::SingularSystem { context, condition });
    }
    match gram.clone().cholesky() {
        Some(ch) => Ok(ch.solve(rhs)),
        None => Err(Error::SingularSystem { context, condition }),
    }
}

/// Inverse of a Hermitian positive definite matrix, `None` if Cholesky fails.
pub(crate) fn hpd_inverse(m: &CMat) -> Option<CMat> {
    m.clone().cholesky().map(|ch| ch.inverse())
}

/// Column-wise Kronecker product `conj(S) ⊙ S`: column k is `conj(s_k) ⊗ s_k`.
///
/// With column-major `vec`, `vec(S·diag(r)·Sᴴ) = (conj(S)⊙S)·r` holds exactly.
pub(crate) fn conj_khatri_rao(s: &CMat) -> CMat {
    let l = s.nrows();
    let k = s.ncols();
    DMatrix::from_fn(l * l, k, |row, col| {
        let outer = row / l;
        let inner = row % l;
        s[(outer, col)].conj() * s[(inner, col)]
    })
}

pub(crate) fn all_finite(m: &CMat) -> bool {
    m.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}
