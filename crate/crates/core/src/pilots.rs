//! Pilot dictionaries and coherence analysis.

use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;

use crate::error::invalid;
use crate::linalg::{complex_gaussian_matrix, conj_khatri_rao};
use crate::{CMat, Error, Result, C64};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DictionaryKind {
    GaussianRandom,
    UserSupplied,
}

/// `L×K` training dictionary with unit-norm columns.
#[derive(Debug, Clone, PartialEq)]
pub struct PilotDictionary {
    entries: CMat,
    coherence: f64,
    kind: DictionaryKind,
}

impl PilotDictionary {
    /// I.i.d. complex Gaussian code, columns scaled to unit norm.
    pub fn gaussian<R: Rng + ?Sized>(length: usize, num_nodes: usize, rng: &mut R) -> Result<Self> {
        if length == 0 || num_nodes == 0 {
            return Err(invalid(format!("dictionary needs L >= 1 and K >= 1, got {length}x{num_nodes}")));
        }
        let raw = complex_gaussian_matrix(length, num_nodes, 1.0, rng);
        Self::build(raw, DictionaryKind::GaussianRandom)
    }

    /// Wraps a user-supplied code (Gold, Zadoff-Chu, ...); columns are normalized.
    pub fn from_matrix(entries: CMat) -> Result<Self> {
        if entries.is_empty() {
            return Err(invalid("empty pilot matrix"));
        }
        Self::build(entries, DictionaryKind::UserSupplied)
    }

    fn build(mut entries: CMat, kind: DictionaryKind) -> Result<Self> {
        if !crate::linalg::all_finite(&entries) {
            return Err(invalid("pilot matrix has non-finite entries"));
        }
        normalize_columns(&mut entries)?;
        let coherence = if entries.ncols() >= 2 { max_column_coherence(&entries) } else { 0.0 };
        Ok(Self { entries, coherence, kind })
    }

    pub fn entries(&self) -> &CMat {
        &self.entries
    }

    pub fn length(&self) -> usize {
        self.entries.nrows()
    }

    pub fn num_nodes(&self) -> usize {
        self.entries.ncols()
    }

    /// Cached mutual coherence μ_S (0 for a single column).
    pub fn coherence(&self) -> f64 {
        self.coherence
    }

    pub fn kind(&self) -> DictionaryKind {
        self.kind
    }

    /// Largest entry modulus, ‖S‖_{∞,∞}.
    pub fn max_abs_entry(&self) -> f64 {
        self.entries.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Columns `indices` as an `L×|indices|` matrix.
    pub fn select(&self, indices: &[usize]) -> CMat {
        self.entries.select_columns(indices)
    }

    /// CSV text: a `L=<L>,K=<K>` header line, then `L` rows of `2K`
    /// interleaved `re,im` values.
    pub fn to_csv_string(&self) -> String {
        let (l, k) = self.entries.shape();
        let mut out = format!("L={l},K={k}\n");
        for r in 0..l {
            for c in 0..k {
                let z = self.entries[(r, c)];
                if c > 0 {
                    out.push(',');
                }
                let _ = write!(out, "{},{}", z.re, z.im);
            }
            out.push('\n');
        }
        out
    }

    /// Parses the format written by [`to_csv_string`](Self::to_csv_string).
    /// The result is a user-supplied dictionary (columns renormalized).
    pub fn from_csv_str(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| invalid("empty dictionary file"))?;
        let (l, k) = parse_header(header)?;
        let mut entries = CMat::zeros(l, k);
        for r in 0..l {
            let line = lines.next().ok_or_else(|| invalid(format!("missing row {r}")))?;
            let values = line
                .split(',')
                .map(|v| v.trim().parse::<f64>().map_err(|e| invalid(format!("row {r}: {e}"))))
                .collect::<Result<Vec<_>>>()?;
            if values.len() != 2 * k {
                return Err(invalid(format!("row {r} has {} values, expected {}", values.len(), 2 * k)));
            }
            for c in 0..k {
                entries[(r, c)] = C64::new(values[2 * c], values[2 * c + 1]);
            }
        }
        if lines.next().is_some() {
            return Err(invalid(format!("more than {l} rows in dictionary file")));
        }
        Self::from_matrix(entries)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv_string())
            .map_err(|source| Error::Io { path: path.to_path_buf(), source })
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
        Self::from_csv_str(&text)
    }
}

fn parse_header(header: &str) -> Result<(usize, usize)> {
    let mut l = None;
    let mut k = None;
    for field in header.split(',') {
        let (key, value) = field
            .split_once('=')
            .ok_or_else(|| invalid(format!("bad dictionary header {header:?}")))?;
        let value: usize = value
            .trim()
            .parse()
            .map_err(|_| invalid(format!("bad dictionary header {header:?}")))?;
        match key.trim() {
            "L" => l = Some(value),
            "K" => k = Some(value),
            other => return Err(invalid(format!("unknown header key {other:?}"))),
        }
    }
    match (l, k) {
        (Some(l), Some(k)) if l >= 1 && k >= 1 => Ok((l, k)),
        _ => Err(invalid(format!("dictionary header must give L>=1 and K>=1: {header:?}"))),
    }
}

/// Scales every column to unit Euclidean norm.
pub fn normalize_columns(m: &mut CMat) -> Result<()> {
    for (idx, mut col) in m.column_iter_mut().enumerate() {
        let norm = col.norm();
        if norm == 0.0 {
            return Err(invalid(format!("column {idx} is zero and cannot be normalized")));
        }
        col.unscale_mut(norm);
    }
    Ok(())
}

/// Max |⟨m_i, m_j⟩| / (‖m_i‖‖m_j‖) over distinct columns, for any matrix.
pub(crate) fn max_column_coherence(m: &CMat) -> f64 {
    let norms: Vec<f64> = m.column_iter().map(|c| c.norm()).collect();
    let gram = m.adjoint() * m;
    let mut best: f64 = 0.0;
    for i in 0..m.ncols() {
        for j in (i + 1)..m.ncols() {
            let value = gram[(i, j)].norm() / (norms[i] * norms[j]);
            best = best.max(value);
        }
    }
    best.min(1.0)
}

/// μ_S = max_{i≠j} |s_iᴴ s_j|.
pub fn mutual_coherence(dict: &PilotDictionary) -> Result<f64> {
    if dict.num_nodes() < 2 {
        return Err(invalid("mutual coherence needs at least two columns"));
    }
    Ok(max_column_coherence(dict.entries()))
}

/// Coherence of the Khatri-Rao lifted dictionary, μ_S².
pub fn khatri_rao_coherence(mu: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&mu) {
        return Err(invalid(format!("coherence {mu} outside [0, 1]")));
    }
    Ok(mu * mu)
}

/// Coherence of `conj(S)⊙S` computed from the explicit `L²×K` matrix.
pub fn explicit_khatri_rao_coherence(dict: &PilotDictionary) -> Result<f64> {
    if dict.num_nodes() < 2 {
        return Err(invalid("mutual coherence needs at least two columns"));
    }
    Ok(max_column_coherence(&conj_khatri_rao(dict.entries())))
}

/// Welch lower bound √((K−L)/((K−1)L)) on the coherence of `K` unit vectors in
/// `L` dimensions; zero when `K <= L`.
pub fn welch_bound(num_nodes: usize, length: usize) -> f64 {
    assert!(length >= 1, "pilot length must be at least 1");
    if num_nodes <= length {
        return 0.0;
    }
    let (k, l) = (num_nodes as f64, length as f64);
    ((k - l) / ((k - 1.0) * l)).sqrt()
}

/// Largest `D` with `D < (1 + 1/μ²)/2`, the sparsity guaranteed recoverable
/// on the Khatri-Rao dictionary of a pilot code with coherence `mu`.
pub fn max_identifiable_support(mu: f64) -> Result<usize> {
    if !(mu > 0.0 && mu <= 1.0) {
        return Err(invalid(format!("coherence {mu} must lie in (0, 1]")));
    }
    let limit = 0.5 * (1.0 + 1.0 / (mu * mu));
    let d = limit.ceil() - 1.0;
    Ok(if d >= usize::MAX as f64 { usize::MAX } else { d.max(0.0) as usize })
}

/// Smallest `L` with `L > (2K·D − K)/(K + 2D − 2)`, capped at `K`.
pub fn min_pilot_length(num_nodes: usize, max_active: usize) -> usize {
    assert!(num_nodes >= 2, "K must be at least 2");
    assert!((1..=num_nodes).contains(&max_active), "D must lie in [1, K]");
    let num = 2 * num_nodes * max_active - num_nodes;
    let den = num_nodes + 2 * max_active - 2;
    (num / den + 1).min(num_nodes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::trial_rng;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn gaussian_columns_are_unit_norm() {
        let mut rng = trial_rng(1, 0);
        let d = PilotDictionary::gaussian(20, 64, &mut rng).unwrap();
        assert_eq!(d.kind(), DictionaryKind::GaussianRandom);
        for col in d.entries().column_iter() {
            assert_abs_diff_eq!(col.norm(), 1.0, epsilon = 1e-10);
        }
        assert!(PilotDictionary::gaussian(0, 4, &mut rng).is_err());
    }

    #[test]
    fn square_random_dictionary_is_coherent() {
        let mut rng = trial_rng(2, 0);
        let d = PilotDictionary::gaussian(8, 8, &mut rng).unwrap();
        assert!(d.coherence() > 0.0);
    }

    #[test]
    fn gaussian_coherence_never_below_welch() {
        let floor = welch_bound(64, 20);
        for seed in 0..50 {
            let mut rng = trial_rng(seed, 0);
            let d = PilotDictionary::gaussian(20, 64, &mut rng).unwrap();
            let mu = mutual_coherence(&d).unwrap();
            assert!(mu >= floor - 1e-12 && mu < 1.0, "seed {seed}: {mu}");
            assert_eq!(mu, d.coherence());
        }
    }

    #[test]
    fn coherence_hand_cases() {
        let id = PilotDictionary::from_matrix(CMat::identity(3, 3)).unwrap();
        assert_eq!(mutual_coherence(&id).unwrap(), 0.0);

        let dup = CMat::from_row_slice(2, 2, &[c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]);
        assert_abs_diff_eq!(mutual_coherence(&PilotDictionary::from_matrix(dup).unwrap()).unwrap(), 1.0, epsilon = 1e-15);

        let h = std::f64::consts::FRAC_1_SQRT_2;
        let two = CMat::from_row_slice(2, 2, &[c(1.0, 0.0), c(h, 0.0), c(0.0, 0.0), c(h, 0.0)]);
        let d = PilotDictionary::from_matrix(two).unwrap();
        assert_abs_diff_eq!(mutual_coherence(&d).unwrap(), 0.5f64.sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(khatri_rao_coherence(d.coherence()).unwrap(), 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(explicit_khatri_rao_coherence(&d).unwrap(), 0.5, epsilon = 1e-12);

        let single = PilotDictionary::from_matrix(CMat::identity(3, 1)).unwrap();
        assert!(mutual_coherence(&single).is_err());
    }

    #[test]
    fn khatri_rao_coherence_domain() {
        assert_eq!(khatri_rao_coherence(0.0).unwrap(), 0.0);
        assert_eq!(khatri_rao_coherence(1.0).unwrap(), 1.0);
        assert!(khatri_rao_coherence(1.1).is_err());
        assert!(khatri_rao_coherence(-0.1).is_err());
    }

    #[test]
    fn welch_values() {
        assert_abs_diff_eq!(welch_bound(64, 20), 0.18687, epsilon = 1e-5);
        assert_eq!(welch_bound(16, 16), 0.0);
        assert_eq!(welch_bound(4, 9), 0.0);
        assert_abs_diff_eq!(welch_bound(2, 1), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn identifiable_support_values() {
        assert_eq!(max_identifiable_support(1.0).unwrap(), 0);
        assert_eq!(max_identifiable_support(0.5).unwrap(), 2);
        assert_eq!(max_identifiable_support(0.18687).unwrap(), 14);
        assert!(max_identifiable_support(0.0).is_err());
        assert!(max_identifiable_support(-0.3).is_err());
    }

    #[test]
    fn pilot_length_values() {
        assert_eq!(min_pilot_length(64, 10), 15);
        assert_eq!(min_pilot_length(64, 1), 2);
        for k in 2..40 {
            for d in 1..=k {
                assert!(min_pilot_length(k, d) <= k);
            }
        }
    }

    #[test]
    fn csv_round_trip_and_errors() {
        let mut rng = trial_rng(4, 0);
        let d = PilotDictionary::gaussian(3, 5, &mut rng).unwrap();
        let text = d.to_csv_string();
        assert!(text.starts_with("L=3,K=5\n"));
        let back = PilotDictionary::from_csv_str(&text).unwrap();
        assert_abs_diff_eq!((back.entries() - d.entries()).norm(), 0.0, epsilon = 1e-14);
        assert_eq!(back.kind(), DictionaryKind::UserSupplied);

        assert!(PilotDictionary::from_csv_str("").is_err());
        assert!(PilotDictionary::from_csv_str("L=1,K=2\n1,0,0\n").is_err());
        assert!(PilotDictionary::from_csv_str("L=1,K=1\n0,0\n").is_err());
        assert!(PilotDictionary::from_csv_str("L=2,K=1\n1,0\n").is_err());
        assert!(PilotDictionary::from_csv_str("rows=1\n1,0\n").is_err());

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pilots.csv");
        d.write_csv(&path).unwrap();
        assert_abs_diff_eq!((PilotDictionary::read_csv(&path).unwrap().entries() - d.entries()).norm(), 0.0, epsilon = 1e-14);
        assert!(matches!(PilotDictionary::read_csv(&dir.path().join("missing.csv")), Err(Error::Io { .. })));
    }

    proptest! {
        #[test]
        fn khatri_rao_coherence_is_square_of_coherence(seed in any::<u64>(), l in 1usize..=8, k in 2usize..=12) {
            let mut rng = trial_rng(seed, 0);
            let d = PilotDictionary::gaussian(l, k, &mut rng).unwrap();
            let explicit = explicit_khatri_rao_coherence(&d).unwrap();
            prop_assert!((explicit - d.coherence().powi(2)).abs() < 1e-10);
        }

        #[test]
        fn normalization_is_idempotent(seed in any::<u64>(), l in 1usize..=6, k in 1usize..=6) {
            let mut rng = trial_rng(seed, 0);
            let mut m = complex_gaussian_matrix(l, k, 3.0, &mut rng);
            normalize_columns(&mut m).unwrap();
            let once = m.clone();
            normalize_columns(&mut m).unwrap();
            prop_assert!((m - once).norm() < 1e-14);
        }

        #[test]
        fn identifiable_support_non_increasing(a in 0.01f64..=1.0, b in 0.01f64..=1.0) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(max_identifiable_support(lo).unwrap() >= max_identifiable_support(hi).unwrap());
        }
    }
}
