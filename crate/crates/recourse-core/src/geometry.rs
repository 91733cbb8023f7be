//! Per-input geometric quantities shared by both selectors: normalized
//! direction vectors, the cosine similarity matrix, distances between the
//! input and the candidate samples, and a truncated eigenbasis of the
//! similarity matrix.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

const UNIT_TOL: f64 = 1e-9;
const RANK_TOL: f64 = 1e-10;

/// Unit direction vectors from the input to each candidate sample, stored
/// as columns of a p-by-N matrix. Candidates coincident with the input are
/// excluded and reported: they already are zero-cost recourses.
#[derive(Debug, Clone)]
pub struct DirectionMatrix {
    a: DMatrix<f64>,
    /// Original candidate index of each kept column.
    kept: Vec<usize>,
    excluded: Vec<usize>,
}

impl DirectionMatrix {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn ncols(&self) -> usize {
        self.a.ncols()
    }

    pub fn kept(&self) -> &[usize] {
        &self.kept
    }

    pub fn excluded(&self) -> &[usize] {
        &self.excluded
    }
}

/// Direction matrix with columns `(sample_i - x0) / ||sample_i - x0||`.
pub fn directions(x0: &DVector<f64>, samples: &DMatrix<f64>) -> DirectionMatrix {
    let p = samples.nrows();
    assert_eq!(x0.len(), p, "input dimension must match samples");
    let n = samples.ncols();
    let mut cols = Vec::with_capacity(n);
    let mut kept = Vec::new();
    let mut excluded = Vec::new();
    for i in 0..n {
        let diff = samples.column(i) - x0;
        let norm = diff.norm();
        if norm > 1e-12 {
            cols.push(diff / norm);
            kept.push(i);
        } else {
            excluded.push(i);
        }
    }
    let mut a = DMatrix::zeros(p, cols.len());
    for (j, c) in cols.iter().enumerate() {
        a.set_column(j, c);
    }
    DirectionMatrix { a, kept, excluded }
}

/// Either an explicit similarity matrix or the directions that generate it
/// as `S = A^T A`. The factored form avoids materializing N-by-N storage.
#[derive(Debug, Clone)]
pub enum SimilaritySource {
    Dense(DMatrix<f64>),
    Directions(DMatrix<f64>),
}

impl SimilaritySource {
    pub fn n(&self) -> usize {
        match self {
            SimilaritySource::Dense(s) => s.nrows(),
            SimilaritySource::Directions(a) => a.ncols(),
        }
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        match self {
            SimilaritySource::Dense(s) => s[(i, j)],
            SimilaritySource::Directions(a) => a.column(i).dot(&a.column(j)),
        }
    }

    /// Writes row `i` of S into `out`.
    pub fn row_into(&self, i: usize, out: &mut [f64]) {
        let n = self.n();
        debug_assert_eq!(out.len(), n);
        match self {
            SimilaritySource::Dense(s) => {
                for (j, o) in out.iter_mut().enumerate() {
                    *o = s[(i, j)];
                }
            }
            SimilaritySource::Directions(a) => {
                let ci = a.column(i);
                for (j, o) in out.iter_mut().enumerate() {
                    *o = ci.dot(&a.column(j));
                }
            }
        }
    }

    /// Materializes the dense matrix.
    pub fn to_dense(&self) -> DMatrix<f64> {
        match self {
            SimilaritySource::Dense(s) => s.clone(),
            SimilaritySource::Directions(a) => a.transpose() * a,
        }
    }

    /// Largest absolute off-diagonal entry; 0 for N < 2.
    pub fn max_abs_off_diagonal(&self) -> f64 {
        match self {
            SimilaritySource::Dense(s) => {
                let mut m: f64 = 0.0;
                for i in 0..s.nrows() {
                    for j in 0..s.ncols() {
                        if i != j {
                            m = m.max(s[(i, j)].abs());
                        }
                    }
                }
                m
            }
            // unit columns: cosines never exceed 1 in magnitude
            SimilaritySource::Directions(_) => 1.0,
        }
    }
}

/// Cosine similarity matrix `S = A^T A` of a direction matrix.
pub fn similarity(directions: &DirectionMatrix) -> DMatrix<f64> {
    let a = directions.matrix();
    a.transpose() * a
}

/// How candidate distances were measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DistanceKind {
    Euclidean,
    GraphShortestPath,
}

/// Distances from the input to each retained candidate.
#[derive(Debug, Clone)]
pub struct DistanceVector {
    pub values: Vec<f64>,
    pub kind: DistanceKind,
}

impl DistanceVector {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Euclidean distances from `x0` to the given sample columns.
pub fn euclidean_distances(x0: &DVector<f64>, samples: &DMatrix<f64>) -> DistanceVector {
    let values = (0..samples.ncols())
        .map(|i| (samples.column(i) - x0).norm())
        .collect();
    DistanceVector {
        values,
        kind: DistanceKind::Euclidean,
    }
}

/// Builds a graph-distance vector from per-candidate shortest-path
/// distances; unreachable candidates (infinite distance) are dropped and
/// reported by index. Fails when nothing is reachable.
pub fn graph_distances(dists: &[f64]) -> Result<(DistanceVector, Vec<usize>)> {
    let mut values = Vec::new();
    let mut dropped = Vec::new();
    for (i, &d) in dists.iter().enumerate() {
        if d.is_finite() {
            values.push(d);
        } else {
            dropped.push(i);
        }
    }
    if values.is_empty() {
        return Err(Error::NoReachableCandidates);
    }
    Ok((
        DistanceVector {
            values,
            kind: DistanceKind::GraphShortestPath,
        },
        dropped,
    ))
}

/// Top-M eigenpairs of the similarity matrix, eigenvalues descending.
#[derive(Debug, Clone)]
pub struct EigenBasis {
    /// Positive eigenvalues, decreasing.
    pub sigma: Vec<f64>,
    /// Orthonormal eigenvectors as columns of an N-by-M matrix.
    pub vectors: DMatrix<f64>,
    /// Requested rank when it exceeded the numerical rank.
    pub truncated_from: Option<usize>,
}

impl EigenBasis {
    pub fn rank(&self) -> usize {
        self.sigma.len()
    }

    pub fn n(&self) -> usize {
        self.vectors.nrows()
    }

    /// `z^T S_M z` for an index-set selection, via the factored form
    /// `sum_m sigma_m (v_m^T z)^2`.
    pub fn quadratic(&self, indices: &[usize]) -> f64 {
        let mut total = 0.0;
        for m in 0..self.rank() {
            let vm = self.vectors.column(m);
            let h: f64 = indices.iter().map(|&i| vm[i]).sum();
            total += self.sigma[m] * h * h;
        }
        total
    }

    fn sign_normalize(&mut self) {
        for m in 0..self.vectors.ncols() {
            let mut col = self.vectors.column_mut(m);
            if let Some(lead) = col.iter().find(|v| v.abs() > UNIT_TOL) {
                if *lead < 0.0 {
                    col.neg_mut();
                }
            }
        }
    }
}

/// Top-M eigenbasis of a symmetric matrix S. M is silently reduced to the
/// numerical rank (eigenvalues above 1e-10); `truncated_from` records the
/// request when that happens.
pub fn eigenbasis(s: &DMatrix<f64>, m: usize) -> Result<EigenBasis> {
    let n = s.nrows();
    if m == 0 || m > n {
        return Err(Error::InvalidParameter(format!(
            "eigenbasis rank must lie in 1..={n}, got {m}"
        )));
    }
    let mut max_asym: f64 = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            max_asym = max_asym.max((s[(i, j)] - s[(j, i)]).abs());
        }
    }
    if max_asym > 1e-8 {
        return Err(Error::NotSymmetric {
            max_asymmetry: max_asym,
        });
    }
    let sym = (s + s.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].partial_cmp(&eig.eigenvalues[a]).unwrap());
    assemble_basis(
        m,
        order
            .into_iter()
            .map(|i| (eig.eigenvalues[i], eig.eigenvectors.column(i).into_owned())),
        n,
    )
}

/// Eigenbasis of `S = A^T A` computed from a thin SVD of the direction
/// matrix A itself: the eigenvalues are squared singular values, the
/// eigenvectors are right singular vectors. Costs O(p^2 N) instead of the
/// O(N^3) symmetric decomposition.
pub fn eigenbasis_from_directions(a: &DMatrix<f64>, m: usize) -> Result<EigenBasis> {
    let n = a.ncols();
    if m == 0 || m > n {
        return Err(Error::InvalidParameter(format!(
            "eigenbasis rank must lie in 1..={n}, got {m}"
        )));
    }
    let svd = a.clone().svd(false, true);
    let v_t = svd.v_t.expect("requested right singular vectors");
    let mut pairs: Vec<(f64, DVector<f64>)> = svd
        .singular_values
        .iter()
        .enumerate()
        .map(|(i, &s)| (s * s, v_t.row(i).transpose()))
        .collect();
    pairs.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
    assemble_basis(m, pairs.into_iter(), n)
}

fn assemble_basis(
    m: usize,
    pairs: impl Iterator<Item = (f64, DVector<f64>)>,
    n: usize,
) -> Result<EigenBasis> {
    let mut sigma = Vec::new();
    let mut vectors = Vec::new();
    for (value, vector) in pairs.take(m) {
        if value <= RANK_TOL {
            break;
        }
        sigma.push(value);
        vectors.push(vector);
    }
    if sigma.is_empty() {
        return Err(Error::InvalidParameter(
            "similarity matrix is numerically zero".into(),
        ));
    }
    let mut mat = DMatrix::zeros(n, sigma.len());
    for (j, v) in vectors.iter().enumerate() {
        mat.set_column(j, v);
    }
    let mut basis = EigenBasis {
        truncated_from: (sigma.len() < m).then_some(m),
        sigma,
        vectors: mat,
    };
    basis.sign_normalize();
    Ok(basis)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn columns(cols: &[&[f64]]) -> DMatrix<f64> {
        let p = cols[0].len();
        let mut m = DMatrix::zeros(p, cols.len());
        for (i, c) in cols.iter().enumerate() {
            m.set_column(i, &DVector::from_vec(c.to_vec()));
        }
        m
    }

    #[test]
    fn direction_examples() {
        let x0 = DVector::from_vec(vec![0.0, 0.0]);
        let samples = columns(&[&[3.0, 4.0], &[1.0, 0.0], &[0.0, 0.0]]);
        let d = directions(&x0, &samples);
        assert_eq!(d.ncols(), 2);
        assert_eq!(d.kept(), &[0, 1]);
        assert_eq!(d.excluded(), &[2]);
        assert_relative_eq!(d.matrix()[(0, 0)], 0.6, epsilon = 1e-15);
        assert_relative_eq!(d.matrix()[(1, 0)], 0.8, epsilon = 1e-15);
        assert_eq!(d.matrix().column(1).as_slice(), &[1.0, 0.0]);
    }

    #[test]
    fn direction_columns_are_unit() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x0 = DVector::from_fn(5, |_, _| rng.gen_range(-1.0..1.0));
        let samples = DMatrix::from_fn(5, 40, |_, _| rng.gen_range(-3.0..3.0));
        let d = directions(&x0, &samples);
        for j in 0..d.ncols() {
            assert!((d.matrix().column(j).norm() - 1.0).abs() <= 1e-9);
        }
    }

    #[test]
    fn similarity_examples() {
        let x0 = DVector::from_vec(vec![0.0, 0.0]);
        // identical, orthogonal, opposite directions
        let samples = columns(&[&[2.0, 0.0], &[1.0, 0.0], &[0.0, 3.0], &[-1.0, 0.0]]);
        let d = directions(&x0, &samples);
        let s = similarity(&d);
        assert_relative_eq!(s[(0, 1)], 1.0, epsilon = 1e-12);
        assert_relative_eq!(s[(0, 2)], 0.0, epsilon = 1e-12);
        assert_relative_eq!(s[(0, 3)], -1.0, epsilon = 1e-12);
        for i in 0..s.nrows() {
            assert!((s[(i, i)] - 1.0).abs() <= 1e-9);
            for j in 0..s.ncols() {
                assert!(s[(i, j)].abs() <= 1.0 + 1e-9);
            }
        }
    }

    #[test]
    fn distance_examples() {
        let x0 = DVector::from_vec(vec![0.0, 0.0]);
        let samples = columns(&[&[3.0, 4.0]]);
        let d = euclidean_distances(&x0, &samples);
        assert_relative_eq!(d.values[0], 5.0, epsilon = 1e-15);

        let (gd, dropped) = graph_distances(&[2.0, f64::INFINITY, 0.5]).unwrap();
        assert_eq!(gd.values, vec![2.0, 0.5]);
        assert_eq!(dropped, vec![1]);
        assert!(matches!(
            graph_distances(&[f64::INFINITY]),
            Err(Error::NoReachableCandidates)
        ));
    }

    #[test]
    fn eigen_identity_and_rank_one() {
        let s = DMatrix::identity(2, 2);
        let b = eigenbasis(&s, 2).unwrap();
        assert_eq!(b.rank(), 2);
        assert_relative_eq!(b.sigma[0], 1.0, epsilon = 1e-12);
        assert_relative_eq!(b.sigma[1], 1.0, epsilon = 1e-12);

        // rank-1 S = aa^T with unit a: M reduced from 2 to 1
        let a = DVector::from_vec(vec![0.6, 0.8]);
        let s = &a * a.transpose();
        let b = eigenbasis(&s, 2).unwrap();
        assert_eq!(b.rank(), 1);
        assert_eq!(b.truncated_from, Some(2));
        assert_relative_eq!(b.sigma[0], 1.0, epsilon = 1e-10);
    }

    #[test]
    fn eigen_rejects_asymmetric() {
        let s = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, -0.5, 1.0]);
        assert!(matches!(eigenbasis(&s, 1), Err(Error::NotSymmetric { .. })));
    }

    #[test]
    fn full_rank_reconstruction_and_orthonormality() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let a = DMatrix::from_fn(6, 6, |_, _| rng.gen_range(-1.0..1.0));
        let s = a.transpose() * &a; // PSD by construction
        let b = eigenbasis(&s, 6).unwrap();
        let mut recon = DMatrix::zeros(6, 6);
        for m in 0..b.rank() {
            let v = b.vectors.column(m);
            recon += b.sigma[m] * v * v.transpose();
        }
        assert!((s - recon).norm() <= 1e-8);
        for m in 0..b.rank() {
            for l in 0..b.rank() {
                let dot = b.vectors.column(m).dot(&b.vectors.column(l));
                let want = if m == l { 1.0 } else { 0.0 };
                assert!((dot - want).abs() <= 1e-8);
            }
        }
    }

    #[test]
    fn svd_route_matches_symmetric_route() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..10 {
            let p = rng.gen_range(2..5);
            let n = rng.gen_range(p + 1..12);
            let x0 = DVector::from_fn(p, |_, _| rng.gen_range(-1.0..1.0));
            let samples = DMatrix::from_fn(p, n, |_, _| rng.gen_range(-2.0..2.0));
            let dir = directions(&x0, &samples);
            let s = similarity(&dir);
            let m = dir.ncols().min(p + 1);
            let via_svd = eigenbasis_from_directions(dir.matrix(), m).unwrap();
            let via_sym = eigenbasis(&s, m).unwrap();
            assert_eq!(via_svd.rank(), via_sym.rank());
            for (a, b) in via_svd.sigma.iter().zip(&via_sym.sigma) {
                assert_relative_eq!(a, b, epsilon = 1e-8);
            }
            // same reconstruction (spans agree even if vectors flip)
            let recon = |b: &EigenBasis| {
                let mut r = DMatrix::zeros(b.n(), b.n());
                for m in 0..b.rank() {
                    let v = b.vectors.column(m);
                    r += b.sigma[m] * v * v.transpose();
                }
                r
            };
            assert!((recon(&via_svd) - recon(&via_sym)).norm() <= 1e-7);
        }
    }

    #[test]
    fn positive_eigenvalue_count_is_at_most_rank() {
        // rank(S) <= p, so at most min(p, N) positive eigenvalues survive
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        let p = 3;
        let n = 9;
        let x0 = DVector::from_fn(p, |_, _| rng.gen_range(-1.0..1.0));
        let samples = DMatrix::from_fn(p, n, |_, _| rng.gen_range(-2.0..2.0));
        let dir = directions(&x0, &samples);
        let s = similarity(&dir);
        let b = eigenbasis(&s, n).unwrap();
        assert!(b.rank() <= p.min(n));
        for w in b.sigma.windows(2) {
            assert!(w[0] >= w[1]);
        }
        assert!(*b.sigma.last().unwrap() > 0.0);
    }

    #[test]
    fn sign_convention_is_deterministic() {
        let s = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 1.0]);
        let b = eigenbasis(&s, 2).unwrap();
        for m in 0..b.rank() {
            let lead = b
                .vectors
                .column(m)
                .iter()
                .copied()
                .find(|v| v.abs() > 1e-9)
                .unwrap();
            assert!(lead > 0.0);
        }
    }
}
