//! Gaussian conditional-independence testing on a correlation matrix.
//!
//! A test `I(i, j | S)` extracts the blocks
//!
//! ```text
//! M0 = C[{i,j},{i,j}]   (2 x 2)
//! M1 = C[{i,j}, S]      (2 x l)
//! M2 = C[S, S]          (l x l)
//! ```
//!
//! forms `H = M0 - M1 pinv(M2) M1^T`, takes the partial correlation
//! `H01 / sqrt(H00 H11)`, and compares its Fisher z-transform against
//! `tau = Phi^{-1}(1 - alpha/2) / sqrt(m - l - 3)`.
//!
//! `M2` only depends on `S`, so [`ConditioningSet`] owns the pseudo-inverse
//! and can be reused for every pair tested against the same set.

mod normal;
mod pinv;

pub use normal::inverse_normal_cdf;
pub use pinv::{full_rank_cholesky, invert, pseudo_inverse, Matrix, RANK_TOLERANCE};

use thiserror::Error;

use crate::graph::{CorrelationMatrix, DataMatrix};

/// Partial correlations are clamped to `[-1 + CLAMP, 1 - CLAMP]` before the
/// z-transform so the logarithm stays finite.
pub const CLAMP: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StatsError {
    #[error("column {column} has zero variance")]
    ZeroVariance { column: usize },
    #[error("need at least 2 samples, got {0}")]
    TooFewSamples(usize),
    #[error("variable {index} out of range for {n} variables")]
    IndexOutOfRange { index: usize, n: usize },
    #[error("tested pair ({i}, {j}) overlaps the conditioning set or repeats a variable")]
    IndexOverlap { i: usize, j: usize },
    #[error("matrix is not square ({rows} x {cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix contains NaN or infinite entries")]
    NonFinite,
    #[error("matrix is singular")]
    Singular,
    #[error("residual covariance is degenerate (H00 * H11 = {0})")]
    DegenerateConditioning(f64),
    #[error("level {ell} unreachable with {m} samples (needs m - l - 3 >= 1)")]
    LevelUnreachable { m: usize, ell: usize },
}

/// Sample Pearson correlation of every column pair, two-pass mean-centered.
pub fn compute_correlation(data: &DataMatrix) -> Result<CorrelationMatrix, StatsError> {
    let m = data.samples();
    let n = data.variables();
    if m < 2 {
        return Err(StatsError::TooFewSamples(m));
    }
    // Column-major centered copy, each column scaled to unit norm.
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(n);
    for j in 0..n {
        let mut col = data.column(j);
        let (lo, hi) = col.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
        if lo == hi {
            return Err(StatsError::ZeroVariance { column: j });
        }
        let mean = col.iter().sum::<f64>() / m as f64;
        for v in &mut col {
            *v -= mean;
        }
        let norm = col.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(StatsError::ZeroVariance { column: j });
        }
        for v in &mut col {
            *v /= norm;
        }
        cols.push(col);
    }
    let mut values = vec![0.0; n * n];
    for i in 0..n {
        values[i * n + i] = 1.0;
        for j in i + 1..n {
            let r = cols[i].iter().zip(&cols[j]).map(|(a, b)| a * b).sum::<f64>().clamp(-1.0, 1.0);
            values[i * n + j] = r;
            values[j * n + i] = r;
        }
    }
    Ok(CorrelationMatrix::new(n, values).expect("constructed correlation matrix is valid"))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConditioningMatrices {
    pub m0: [[f64; 2]; 2],
    /// Row 0 is `C(i, S)`, row 1 is `C(j, S)`.
    pub m1: [Vec<f64>; 2],
    pub m2: Matrix,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HMatrix(pub [[f64; 2]; 2]);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CiDecision {
    pub independent: bool,
    pub z: f64,
    pub rho: f64,
}

fn check_indices(c: &CorrelationMatrix, i: usize, j: usize, set: &[usize]) -> Result<(), StatsError> {
    let n = c.dim();
    for &v in [i, j].iter().chain(set) {
        if v >= n {
            return Err(StatsError::IndexOutOfRange { index: v, n });
        }
    }
    if i == j || set.contains(&i) || set.contains(&j) {
        return Err(StatsError::IndexOverlap { i, j });
    }
    Ok(())
}

fn check_set(c: &CorrelationMatrix, set: &[usize]) -> Result<(), StatsError> {
    let n = c.dim();
    if let Some(&v) = set.iter().find(|&&v| v >= n) {
        return Err(StatsError::IndexOutOfRange { index: v, n });
    }
    Ok(())
}

fn m2_of(c: &CorrelationMatrix, set: &[usize]) -> Matrix {
    Matrix::from_fn(set.len(), set.len(), |a, b| c.get(set[a], set[b]))
}

pub fn extract_conditioning(
    c: &CorrelationMatrix,
    i: usize,
    j: usize,
    set: &[usize],
) -> Result<ConditioningMatrices, StatsError> {
    check_indices(c, i, j, set)?;
    Ok(ConditioningMatrices {
        m0: [[c.get(i, i), c.get(i, j)], [c.get(j, i), c.get(j, j)]],
        m1: [set.iter().map(|&s| c.get(i, s)).collect(), set.iter().map(|&s| c.get(j, s)).collect()],
        m2: m2_of(c, set),
    })
}

/// `H = M0 - M1 * m2_pinv * M1^T`.
pub fn h_matrix(blocks: &ConditioningMatrices, m2_pinv: &Matrix) -> HMatrix {
    let ell = blocks.m1[0].len();
    let mut q = [vec![0.0; ell], vec![0.0; ell]];
    m2_pinv.mul_vec(&blocks.m1[0], &mut q[0]);
    m2_pinv.mul_vec(&blocks.m1[1], &mut q[1]);
    let mut h = [[0.0; 2]; 2];
    for r in 0..2 {
        for c in 0..2 {
            h[r][c] = blocks.m0[r][c] - dot(&blocks.m1[r], &q[c]);
        }
    }
    HMatrix(h)
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `|atanh(rho)|`, the Fisher z-transform with the absolute value taken.
pub fn fisher_z(rho: f64) -> f64 {
    let r = rho.abs().min(1.0 - CLAMP);
    0.5 * ((1.0 + r) / (1.0 - r)).ln()
}

/// Rejection threshold on the z scale for a test with `ell` conditioning
/// variables.
pub fn threshold_tau(alpha: f64, m: usize, ell: usize) -> Result<f64, StatsError> {
    if m < ell + 4 {
        return Err(StatsError::LevelUnreachable { m, ell });
    }
    let dof = (m - ell - 3) as f64;
    Ok(inverse_normal_cdf(1.0 - alpha / 2.0) / dof.sqrt())
}

/// A conditioning set together with the pseudo-inverse of its correlation
/// block, ready to be shared across tests.
#[derive(Debug, Clone)]
pub struct ConditioningSet {
    members: Vec<usize>,
    pinv: Matrix,
}

impl ConditioningSet {
    pub fn new(c: &CorrelationMatrix, members: &[usize]) -> Result<Self, StatsError> {
        check_set(c, members)?;
        Self::build(c, members.to_vec())
    }

    pub(crate) fn build(c: &CorrelationMatrix, members: Vec<usize>) -> Result<Self, StatsError> {
        let pinv = if members.is_empty() { Matrix::zeros(0, 0) } else { pseudo_inverse(&m2_of(c, &members))? };
        Ok(Self { members, pinv })
    }

    pub fn members(&self) -> &[usize] {
        &self.members
    }

    pub fn pinv(&self) -> &Matrix {
        &self.pinv
    }

    /// Partial correlation of `(i, j)` given this set. Evaluated with the pair
    /// in ascending order so `(i, j)` and `(j, i)` give bit-identical results.
    pub fn partial_correlation(&self, c: &CorrelationMatrix, i: usize, j: usize) -> Result<f64, StatsError> {
        check_indices(c, i, j, &self.members)?;
        self.partial_correlation_unchecked(c, i, j)
    }

    pub(crate) fn partial_correlation_unchecked(
        &self,
        c: &CorrelationMatrix,
        i: usize,
        j: usize,
    ) -> Result<f64, StatsError> {
        let (a, b) = if i < j { (i, j) } else { (j, i) };
        if self.members.is_empty() {
            return Ok(c.get(a, b).clamp(-1.0 + CLAMP, 1.0 - CLAMP));
        }
        const STACK: usize = 16;
        let ell = self.members.len();
        let (mut buf, mut heap);
        let scratch: &mut [f64] = if ell <= STACK {
            buf = [0.0; 4 * STACK];
            &mut buf[..4 * ell]
        } else {
            heap = vec![0.0; 4 * ell];
            &mut heap
        };
        let (ca, rest) = scratch.split_at_mut(ell);
        let (cb, rest) = rest.split_at_mut(ell);
        let (qa, qb) = rest.split_at_mut(ell);
        let row_a = c.row(a);
        let row_b = c.row(b);
        for (k, &s) in self.members.iter().enumerate() {
            ca[k] = row_a[s];
            cb[k] = row_b[s];
        }
        self.pinv.mul_vec(ca, qa);
        self.pinv.mul_vec(cb, qb);
        let h00 = row_a[a] - dot(ca, qa);
        let h11 = row_b[b] - dot(cb, qb);
        let h01 = row_a[b] - dot(ca, qb);
        let denom = h00 * h11;
        if denom.is_nan() || denom <= 0.0 {
            return Err(StatsError::DegenerateConditioning(denom));
        }
        let rho = h01 / denom.sqrt();
        if !rho.is_finite() {
            return Err(StatsError::DegenerateConditioning(denom));
        }
        Ok(rho.clamp(-1.0 + CLAMP, 1.0 - CLAMP))
    }

    pub fn ci_test(&self, c: &CorrelationMatrix, i: usize, j: usize, tau: f64) -> Result<CiDecision, StatsError> {
        check_indices(c, i, j, &self.members)?;
        self.ci_test_unchecked(c, i, j, tau)
    }

    #[inline]
    pub(crate) fn ci_test_unchecked(
        &self,
        c: &CorrelationMatrix,
        i: usize,
        j: usize,
        tau: f64,
    ) -> Result<CiDecision, StatsError> {
        let rho = self.partial_correlation_unchecked(c, i, j)?;
        let z = fisher_z(rho);
        Ok(CiDecision { independent: z <= tau, z, rho })
    }
}

pub fn partial_correlation(c: &CorrelationMatrix, i: usize, j: usize, set: &[usize]) -> Result<f64, StatsError> {
    check_indices(c, i, j, set)?;
    ConditioningSet::build(c, set.to_vec())?.partial_correlation_unchecked(c, i, j)
}

pub fn ci_test(c: &CorrelationMatrix, i: usize, j: usize, set: &[usize], tau: f64) -> Result<CiDecision, StatsError> {
    check_indices(c, i, j, set)?;
    ConditioningSet::build(c, set.to_vec())?.ci_test_unchecked(c, i, j, tau)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{sample_linear_gaussian, WeightedDag};
    use proptest::prelude::*;

    fn corr3(rij: f64, rik: f64, rjk: f64) -> CorrelationMatrix {
        CorrelationMatrix::from_rows(&[vec![1.0, rij, rik], vec![rij, 1.0, rjk], vec![rik, rjk, 1.0]]).unwrap()
    }

    fn data(m: usize, n: usize, f: impl Fn(usize, usize) -> f64) -> DataMatrix {
        let mut v = Vec::with_capacity(m * n);
        for r in 0..m {
            for c in 0..n {
                v.push(f(r, c));
            }
        }
        DataMatrix::new(m, n, v).unwrap()
    }

    /// Correlation of OLS residuals after regressing out `set`, computed on
    /// the raw data with nalgebra's SVD least squares.
    fn residual_correlation(d: &DataMatrix, i: usize, j: usize, set: &[usize]) -> f64 {
        let m = d.samples();
        let x = nalgebra::DMatrix::from_fn(m, set.len() + 1, |r, c| if c == 0 { 1.0 } else { d.get(r, set[c - 1]) });
        let svd = x.clone().svd(true, true);
        let resid = |col: usize| {
            let y = nalgebra::DVector::from_fn(m, |r, _| d.get(r, col));
            let beta = svd.solve(&y, 1e-14).unwrap();
            y - &x * beta
        };
        let (ri, rj) = (resid(i), resid(j));
        let (mi, mj) = (ri.mean(), rj.mean());
        let (mut sij, mut sii, mut sjj) = (0.0, 0.0, 0.0);
        for r in 0..m {
            let (a, b) = (ri[r] - mi, rj[r] - mj);
            sij += a * b;
            sii += a * a;
            sjj += b * b;
        }
        sij / (sii * sjj).sqrt()
    }

    #[test]
    fn identical_and_negated_columns() {
        let d = data(50, 3, |r, c| {
            let x = (r as f64 * 0.37).sin() + r as f64 * 0.01;
            match c {
                0 | 1 => x,
                _ => -x,
            }
        });
        let c = compute_correlation(&d).unwrap();
        assert!((c.get(0, 1) - 1.0).abs() < 1e-12);
        assert!((c.get(0, 2) + 1.0).abs() < 1e-12);
        assert_eq!(c.get(1, 0), c.get(0, 1));
    }

    #[test]
    fn independent_normals_are_nearly_uncorrelated() {
        let dag = WeightedDag::from_weights(2, vec![0.0; 4]).unwrap();
        let d = sample_linear_gaussian(&dag, 1000, 2024);
        let c = compute_correlation(&d).unwrap();
        // Cross-check against statrs' sample statistics on the same columns.
        let (x, y) = (d.column(0), d.column(1));
        let mx = x.iter().sum::<f64>() / 1000.0;
        let my = y.iter().sum::<f64>() / 1000.0;
        let cov: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum::<f64>() / 999.0;
        use statrs::statistics::Statistics;
        let expected = cov / (x.clone().std_dev() * y.clone().std_dev());
        assert!((c.get(0, 1) - expected).abs() < 1e-12);
        assert!(c.get(0, 1).abs() < 0.1);
    }

    #[test]
    fn zero_variance_column_is_reported() {
        let d = data(10, 3, |r, c| if c == 1 { 0.1 } else { r as f64 * (c + 1) as f64 });
        assert_eq!(compute_correlation(&d), Err(StatsError::ZeroVariance { column: 1 }));
    }

    #[test]
    fn extract_single_conditioner() {
        let c = corr3(0.3, 0.5, 0.2);
        let b = extract_conditioning(&c, 0, 1, &[2]).unwrap();
        assert_eq!(b.m0, [[1.0, 0.3], [0.3, 1.0]]);
        assert_eq!(b.m1, [vec![0.5], vec![0.2]]);
        assert_eq!(b.m2, Matrix::from_rows(&[vec![1.0]]));
    }

    #[test]
    fn extract_from_identity() {
        let c = CorrelationMatrix::identity(5);
        let b = extract_conditioning(&c, 3, 0, &[1, 4]).unwrap();
        assert_eq!(b.m0, [[1.0, 0.0], [0.0, 1.0]]);
        assert_eq!(b.m1, [vec![0.0, 0.0], vec![0.0, 0.0]]);
        assert_eq!(b.m2, Matrix::identity(2));
    }

    #[test]
    fn extract_indexes_directly() {
        let d = sample_linear_gaussian(&WeightedDag::random(6, 0.5, 3), 200, 4);
        let c = compute_correlation(&d).unwrap();
        let b = extract_conditioning(&c, 4, 1, &[5, 2]).unwrap();
        assert_eq!(b.m0[0][1], c.get(4, 1));
        assert_eq!(b.m1[0], vec![c.get(4, 5), c.get(4, 2)]);
        assert_eq!(b.m1[1], vec![c.get(1, 5), c.get(1, 2)]);
        assert_eq!(b.m2[(0, 1)], c.get(5, 2));
        assert_eq!(b.m2[(1, 0)], c.get(2, 5));
    }

    #[test]
    fn extract_rejects_overlap() {
        let c = CorrelationMatrix::identity(4);
        assert!(matches!(extract_conditioning(&c, 0, 1, &[1]), Err(StatsError::IndexOverlap { .. })));
        assert!(matches!(extract_conditioning(&c, 0, 0, &[2]), Err(StatsError::IndexOverlap { .. })));
        assert!(matches!(extract_conditioning(&c, 0, 1, &[7]), Err(StatsError::IndexOutOfRange { .. })));
    }

    #[test]
    fn empty_set_is_the_raw_correlation() {
        let c = corr3(0.42, 0.1, 0.2);
        assert_eq!(partial_correlation(&c, 0, 1, &[]).unwrap(), 0.42);
    }

    #[test]
    fn h_matrix_is_symmetric() {
        let d = sample_linear_gaussian(&WeightedDag::random(8, 0.4, 11), 300, 12);
        let c = compute_correlation(&d).unwrap();
        let b = extract_conditioning(&c, 0, 7, &[1, 3, 5]).unwrap();
        let h = h_matrix(&b, &pseudo_inverse(&b.m2).unwrap());
        assert!((h.0[0][1] - h.0[1][0]).abs() < 1e-9);
        let rho = h.0[0][1] / (h.0[0][0] * h.0[1][1]).sqrt();
        assert!((rho - partial_correlation(&c, 0, 7, &[1, 3, 5]).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn common_cause_is_explained_away() {
        // V1 = V0 + noise, V2 = V0 + noise.
        let w = vec![0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 1.0, 0.0, 0.0];
        let dag = WeightedDag::from_weights(3, w).unwrap();
        let d = sample_linear_gaussian(&dag, 5000, 77);
        let c = compute_correlation(&d).unwrap();
        let rho = partial_correlation(&c, 1, 2, &[0]).unwrap();
        let oracle = residual_correlation(&d, 1, 2, &[0]);
        assert!((rho - oracle).abs() < 1e-8);
        assert!(rho.abs() < 0.05);
    }

    #[test]
    fn fisher_z_values() {
        assert_eq!(fisher_z(0.0), 0.0);
        assert_eq!(fisher_z(0.3), fisher_z(-0.3));
        assert!((fisher_z(0.5) - 0.5 * 3f64.ln()).abs() < 1e-15);
        assert!((fisher_z(0.5) - 0.549_306_144_334_054_8).abs() < 1e-12);
        assert!(fisher_z(1.0).is_finite());
        assert_eq!(fisher_z(1.0), fisher_z(-1.0));
    }

    #[test]
    fn tau_values() {
        let tau = threshold_tau(0.05, 1000, 0).unwrap();
        assert!((tau - 1.959_963_984_540_054 / 997f64.sqrt()).abs() < 1e-12);
        assert!((tau - 0.062_073).abs() < 1e-6);
        assert_eq!(threshold_tau(1.0, 100, 2).unwrap(), 0.0);
        assert!(threshold_tau(0.05, 100, 3).unwrap() < threshold_tau(0.05, 100, 4).unwrap());
        assert!(threshold_tau(0.05, 200, 3).unwrap() < threshold_tau(0.05, 100, 3).unwrap());
        assert!(threshold_tau(0.01, 200, 3).unwrap() > threshold_tau(0.05, 200, 3).unwrap());
        assert_eq!(threshold_tau(0.05, 5, 2), Err(StatsError::LevelUnreachable { m: 5, ell: 2 }));
        assert!(threshold_tau(0.05, 4, 0).is_ok());
    }

    #[test]
    fn ci_decisions() {
        let c = corr3(0.0, 0.3, 0.3);
        assert!(ci_test(&c, 0, 1, &[], 0.01).unwrap().independent);
        let c = corr3(0.9, 0.3, 0.3);
        let d = ci_test(&c, 0, 1, &[], 0.062).unwrap();
        assert!(!d.independent);
        assert!((d.z - 1.472_219_489_583_220).abs() < 1e-9);
    }

    #[test]
    fn chain_is_separated_by_its_middle() {
        // V0 -> V1 -> V2
        let w = vec![0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0];
        let dag = WeightedDag::from_weights(3, w).unwrap();
        let d = sample_linear_gaussian(&dag, 10_000, 5);
        let c = compute_correlation(&d).unwrap();
        let tau0 = threshold_tau(0.05, 10_000, 0).unwrap();
        let tau1 = threshold_tau(0.05, 10_000, 1).unwrap();
        assert!(!ci_test(&c, 0, 2, &[], tau0).unwrap().independent);
        assert!(ci_test(&c, 0, 2, &[1], tau1).unwrap().independent);
        assert!((partial_correlation(&c, 0, 2, &[1]).unwrap() - residual_correlation(&d, 0, 2, &[1])).abs() < 1e-8);
    }

    #[test]
    fn degenerate_conditioning() {
        // j is an exact copy of the conditioning variable: H11 = 0.
        let c = corr3(0.5, 0.5, 1.0);
        assert!(matches!(partial_correlation(&c, 0, 1, &[2]), Err(StatsError::DegenerateConditioning(_))));
    }

    fn valid_triple() -> impl Strategy<Value = (f64, f64, f64)> {
        (-0.95f64..0.95, -0.95f64..0.95, -0.95f64..0.95)
            .prop_filter("positive definite", |&(a, b, c)| 1.0 + 2.0 * a * b * c - a * a - b * b - c * c > 1e-3)
    }

    proptest! {
        #[test]
        fn first_order_closed_form((rij, rik, rjk) in valid_triple()) {
            let c = corr3(rij, rik, rjk);
            let expected = (rij - rik * rjk) / ((1.0 - rik * rik) * (1.0 - rjk * rjk)).sqrt();
            let got = partial_correlation(&c, 0, 1, &[2]).unwrap();
            prop_assert!((got - expected).abs() < 1e-10);
        }

        #[test]
        fn decision_is_symmetric((rij, rik, rjk) in valid_triple(), tau in 0.0f64..1.0) {
            let c = corr3(rij, rik, rjk);
            let a = ci_test(&c, 0, 1, &[2], tau).unwrap();
            let b = ci_test(&c, 1, 0, &[2], tau).unwrap();
            prop_assert_eq!(a, b);
        }

        #[test]
        fn fisher_z_even_and_monotone(a in 0.0f64..0.999, b in 0.0f64..0.999) {
            prop_assert_eq!(fisher_z(a), fisher_z(-a));
            prop_assert!(fisher_z(a) >= 0.0);
            if a < b {
                prop_assert!(fisher_z(a) < fisher_z(b));
            }
        }

        #[test]
        fn tau_monotone(m in 10usize..5000, ell in 0usize..6, alpha in 0.001f64..0.5) {
            let t = threshold_tau(alpha, m, ell).unwrap();
            prop_assert!(t > 0.0);
            prop_assert!(threshold_tau(alpha, m + 1, ell).unwrap() < t);
            prop_assert!(threshold_tau(alpha, m, ell + 1).unwrap() > t);
            prop_assert!(threshold_tau(alpha * 0.5, m, ell).unwrap() > t);
        }
    }
}
