//! Prototype selection via MAP inference on a proximity-weighted
//! L-ensemble: `L = theta * S + (1 - theta) * D` where S is the cosine
//! similarity of direction vectors and D is a diagonal Gaussian locality
//! weight. Solvers: greedy with incremental factor updates, a 2-swap
//! local search, and an exhaustive oracle.

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::error::{Error, Result};
use crate::geometry::{DistanceVector, SimilaritySource};
use crate::par;
use crate::selection::Selection;

const RIDGE: f64 = 1e-10;
const IMPROVEMENT_TOL: f64 = 1e-10;

/// Gaussian locality weights `D_ii = exp(-d_i^2 / h^2)`.
pub fn locality_diag(d: &DistanceVector, h: f64) -> Result<DVector<f64>> {
    if h <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "bandwidth must be positive, got {h}"
        )));
    }
    Ok(DVector::from_iterator(
        d.len(),
        d.values.iter().map(|&di| (-di * di / (h * h)).exp()),
    ))
}

/// The L-ensemble kernel `L = theta * S + (1 - theta) * D`, kept in
/// factored form so that N-by-N storage is never required when S comes
/// from direction vectors.
#[derive(Debug, Clone)]
pub struct DppKernel {
    sim: SimilaritySource,
    diag: DVector<f64>,
    theta: f64,
}

impl DppKernel {
    pub fn new(sim: SimilaritySource, diag: DVector<f64>, theta: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&theta) {
            return Err(Error::InvalidParameter(format!(
                "theta must lie in [0,1], got {theta}"
            )));
        }
        if sim.n() != diag.len() {
            return Err(Error::DimensionMismatch {
                expected: sim.n(),
                got: diag.len(),
            });
        }
        Ok(DppKernel { sim, diag, theta })
    }

    pub fn n(&self) -> usize {
        self.diag.len()
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        let mut v = self.theta * self.sim.entry(i, j);
        if i == j {
            v += (1.0 - self.theta) * self.diag[i];
        }
        v
    }

    fn row_into(&self, i: usize, out: &mut [f64]) {
        self.sim.row_into(i, out);
        for v in out.iter_mut() {
            *v *= self.theta;
        }
        out[i] += (1.0 - self.theta) * self.diag[i];
    }

    /// Materializes the dense kernel (tests and small instances only).
    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.n();
        let mut m = self.sim.to_dense() * self.theta;
        for i in 0..n {
            m[(i, i)] += (1.0 - self.theta) * self.diag[i];
        }
        m
    }

    fn submatrix(&self, indices: &[usize]) -> DMatrix<f64> {
        let k = indices.len();
        DMatrix::from_fn(k, k, |r, c| self.entry(indices[r], indices[c]))
    }
}

/// `log det(L_J)` via a Cholesky factorization. A failing factorization is
/// retried once with a ridge of 1e-10 on the diagonal; the retry counts
/// only when every pivot clears the injected ridge, so genuinely
/// rank-deficient submatrices (duplicated directions) come back as the
/// -inf sentinel. The empty set has log-determinant 0.
pub fn log_det_subset(kernel: &DppKernel, indices: &[usize]) -> f64 {
    if indices.is_empty() {
        return 0.0;
    }
    log_det_psd(kernel.submatrix(indices))
}

fn log_det_psd(matrix: DMatrix<f64>) -> f64 {
    let k = matrix.nrows();
    match Cholesky::new(matrix.clone()) {
        Some(chol) => 2.0 * (0..k).map(|i| chol.l_dirty()[(i, i)].ln()).sum::<f64>(),
        None => {
            let mut ridged = matrix;
            for i in 0..k {
                ridged[(i, i)] += RIDGE;
            }
            match Cholesky::new(ridged) {
                Some(chol) => {
                    let pivots: Vec<f64> = (0..k).map(|i| chol.l_dirty()[(i, i)]).collect();
                    if pivots.iter().any(|&p| p * p <= 10.0 * RIDGE) {
                        return f64::NEG_INFINITY; // volume came from the ridge alone
                    }
                    2.0 * pivots.iter().map(|p| p.ln()).sum::<f64>()
                }
                None => f64::NEG_INFINITY,
            }
        }
    }
}

/// Greedy MAP inference: repeatedly add the index with the largest
/// marginal log-determinant gain (ties break to the lowest index). The
/// marginal gains are maintained through incremental Cholesky-factor
/// updates, one new row per accepted index, so a full inference costs
/// O(K^2 N) plus kernel row access. Stops early when every remaining gain
/// is -inf (singular continuation); the result then has fewer than `k`
/// indices.
pub fn greedy_map(kernel: &DppKernel, k: usize) -> Selection {
    let n = kernel.n();
    let k = k.min(n);
    let kmax = k.max(1);
    let mut gain: Vec<f64> = (0..n).map(|i| kernel.entry(i, i)).collect();
    let mut factors = vec![0.0f64; n * kmax];
    let mut selected_mask = vec![false; n];
    let mut selected = Vec::with_capacity(k);
    let mut row = vec![0.0f64; n];

    for step in 0..k {
        let mut best: Option<usize> = None;
        let mut best_gain = 0.0;
        for i in 0..n {
            if !selected_mask[i] && gain[i] > 0.0 && (best.is_none() || gain[i] > best_gain) {
                best = Some(i);
                best_gain = gain[i];
            }
        }
        let Some(j) = best else {
            break; // every remaining marginal gain is -inf
        };
        selected.push(j);
        selected_mask[j] = true;
        kernel.row_into(j, &mut row);
        let sqrt_gain = best_gain.sqrt();
        let cj: Vec<f64> = factors[j * kmax..j * kmax + step].to_vec();
        let updates = {
            let factors = &factors;
            let selected_mask = &selected_mask;
            let row = &row;
            let cj = &cj;
            par::map_range(n, move |i| {
                if selected_mask[i] {
                    return 0.0;
                }
                let ci = &factors[i * kmax..i * kmax + step];
                let dot: f64 = ci.iter().zip(cj).map(|(a, b)| a * b).sum();
                (row[i] - dot) / sqrt_gain
            })
        };
        for (i, &e) in updates.iter().enumerate() {
            if !selected_mask[i] {
                factors[i * kmax + step] = e;
                gain[i] -= e * e;
            }
        }
    }
    Selection::new(selected)
}

/// 2-swap local search: remove the member whose removal costs the least
/// (the remaining set keeps the largest log-determinant), then add the
/// candidate with the largest marginal gain over everything outside the
/// reduced set (including the removed member). A move is accepted only if
/// it improves the objective by more than 1e-10, so the search always
/// terminates and never returns a worse set than `z0`.
pub fn local_search(kernel: &DppKernel, k: usize, z0: &Selection) -> Result<Selection> {
    if z0.len() != k {
        return Err(Error::CardinalityViolation {
            expected: k,
            got: z0.len(),
        });
    }
    let n = kernel.n();
    let mut current: Vec<usize> = z0.indices().to_vec();
    let mut objective = log_det_subset(kernel, &current);

    loop {
        // j-: the member whose removal leaves the best remaining set
        let mut best_remove = 0;
        let mut best_remaining = f64::NEG_INFINITY;
        for pos in 0..current.len() {
            let mut remaining = current.clone();
            remaining.remove(pos);
            let v = log_det_subset(kernel, &remaining);
            if v > best_remaining {
                best_remaining = v;
                best_remove = pos;
            }
        }
        let mut reduced = current.clone();
        let removed = reduced.remove(best_remove);

        // j+: the best addition over candidates outside the reduced set
        let mut in_reduced = vec![false; n];
        for &i in &reduced {
            in_reduced[i] = true;
        }
        let gains = addition_gains(kernel, &reduced, &in_reduced);
        let mut best_add: Option<usize> = None;
        let mut best_gain = f64::NEG_INFINITY;
        for (i, &g) in gains.iter().enumerate() {
            if !in_reduced[i] && g > best_gain {
                best_gain = g;
                best_add = Some(i);
            }
        }
        let Some(j_plus) = best_add else {
            return Ok(Selection::new(current));
        };
        if j_plus == removed {
            return Ok(Selection::new(current));
        }
        let mut candidate = reduced;
        candidate.push(j_plus);
        candidate.sort_unstable();
        let candidate_obj = log_det_subset(kernel, &candidate);
        if candidate_obj > objective + IMPROVEMENT_TOL {
            current = candidate;
            objective = candidate_obj;
        } else {
            return Ok(Selection::new(current));
        }
    }
}

/// Marginal log-det gains of adding each candidate to `base`; -inf where
/// the extended submatrix is singular or the candidate is already a
/// member.
fn addition_gains(kernel: &DppKernel, base: &[usize], in_base: &[bool]) -> Vec<f64> {
    let n = kernel.n();
    if base.is_empty() {
        return (0..n)
            .map(|i| {
                let v = kernel.entry(i, i);
                if v > 0.0 {
                    v.ln()
                } else {
                    f64::NEG_INFINITY
                }
            })
            .collect();
    }
    match Cholesky::new(kernel.submatrix(base)) {
        Some(chol) => {
            let base_rows: Vec<Vec<f64>> = base
                .iter()
                .map(|&s| {
                    let mut r = vec![0.0; n];
                    kernel.row_into(s, &mut r);
                    r
                })
                .collect();
            let chol = &chol;
            let base_rows = &base_rows;
            par::map_range(n, move |i| {
                if in_base[i] {
                    return f64::NEG_INFINITY;
                }
                let u = DVector::from_iterator(base_rows.len(), base_rows.iter().map(|r| r[i]));
                match chol.l_dirty().solve_lower_triangular(&u) {
                    Some(c) => {
                        let residual = kernel.entry(i, i) - c.norm_squared();
                        if residual > 0.0 {
                            residual.ln()
                        } else {
                            f64::NEG_INFINITY
                        }
                    }
                    None => f64::NEG_INFINITY,
                }
            })
        }
        // the base itself is singular: fall back to direct evaluation
        None => {
            let base_val = log_det_subset(kernel, base);
            par::map_range(n, move |i| {
                if in_base[i] {
                    return f64::NEG_INFINITY;
                }
                let mut extended = base.to_vec();
                extended.push(i);
                extended.sort_unstable();
                log_det_subset(kernel, &extended) - base_val
            })
        }
    }
}

/// Number of K-subsets, saturating; used for enumeration budgets.
pub(crate) fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut result: u128 = 1;
    for i in 0..k {
        result = result.saturating_mul((n - i) as u128) / (i as u128 + 1);
    }
    result
}

/// Exhaustive MAP oracle: maximizes `det(L_J)` over all K-subsets,
/// enumerated lexicographically so exact ties keep the smallest index
/// set. Refuses instances with more than 10^7 subsets.
pub fn brute_force_map(kernel: &DppKernel, k: usize) -> Result<Selection> {
    let n = kernel.n();
    if k > n {
        return Err(Error::CardinalityViolation { expected: k, got: n });
    }
    let budget = 10_000_000u128;
    if binomial(n, k) > budget {
        return Err(Error::BudgetExceeded { n, k, budget });
    }
    let mut best: Option<(f64, Vec<usize>)> = None;
    let mut combo: Vec<usize> = (0..k).collect();
    loop {
        let v = log_det_subset(kernel, &combo);
        match &best {
            None => best = Some((v, combo.clone())),
            Some((bv, _)) if v > *bv => best = Some((v, combo.clone())),
            _ => {}
        }
        if !next_combination(&mut combo, n) {
            break;
        }
    }
    Ok(Selection::new(best.expect("at least one subset").1))
}

/// Advances `combo` to the next lexicographic K-subset of 0..n.
pub(crate) fn next_combination(combo: &mut [usize], n: usize) -> bool {
    let k = combo.len();
    if k == 0 {
        return false;
    }
    let mut i = k;
    while i > 0 {
        i -= 1;
        if combo[i] < n - k + i {
            combo[i] += 1;
            for j in i + 1..k {
                combo[j] = combo[j - 1] + 1;
            }
            return true;
        }
    }
    false
}
