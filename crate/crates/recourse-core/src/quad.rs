//! Prototype selection via the binary quadratic program
//! `min vartheta * z'Sz + (1 - vartheta) * d'z` subject to `||z||_0 = K`:
//! an eigen-approximate min-max reformulation solved by best-response or
//! dual-ascent iterations, support screening, an exact reduced solve
//! (enumeration or depth-first branch-and-bound), plus greedy and
//! local-search heuristics and an exhaustive oracle.

use std::io::Write;

use crate::dpp::{binomial, next_combination};
use crate::error::{Error, Result};
use crate::geometry::{EigenBasis, SimilaritySource};
use crate::selection::Selection;

const IMPROVEMENT_TOL: f64 = 1e-10;
const ENUMERATION_LIMIT: u128 = 1_000_000;
const ORACLE_BUDGET: u128 = 10_000_000;
const PRUNE_SLACK: f64 = 1e-9;
/// Densify the reduced similarity matrix up to this many candidates.
const DENSIFY_LIMIT: usize = 2048;

/// The per-input selection problem: similarity S, distances d, trade-off
/// weight, and target cardinality.
#[derive(Debug, Clone)]
pub struct QuadProblem {
    pub sim: SimilaritySource,
    pub d: Vec<f64>,
    pub vartheta: f64,
    pub k: usize,
}

impl QuadProblem {
    pub fn new(sim: SimilaritySource, d: Vec<f64>, vartheta: f64, k: usize) -> Result<Self> {
        if !(0.0..=1.0).contains(&vartheta) {
            return Err(Error::InvalidParameter(format!(
                "vartheta must lie in [0,1], got {vartheta}"
            )));
        }
        if sim.n() != d.len() {
            return Err(Error::DimensionMismatch {
                expected: sim.n(),
                got: d.len(),
            });
        }
        if k == 0 || k > d.len() {
            return Err(Error::InvalidParameter(format!(
                "cardinality must lie in 1..={}, got {k}",
                d.len()
            )));
        }
        Ok(QuadProblem {
            sim,
            d,
            vartheta,
            k,
        })
    }

    pub fn n(&self) -> usize {
        self.d.len()
    }
}

/// Exact objective `vartheta * z'Sz + (1-vartheta) * d'z` with the full
/// similarity matrix (never the truncated one).
pub fn objective(problem: &QuadProblem, z: &Selection) -> Result<f64> {
    if z.len() != problem.k {
        return Err(Error::CardinalityViolation {
            expected: problem.k,
            got: z.len(),
        });
    }
    let mut quad = 0.0;
    for &i in z.indices() {
        for &j in z.indices() {
            quad += problem.sim.entry(i, j);
        }
    }
    let dist: f64 = z.indices().iter().map(|&i| problem.d[i]).sum();
    Ok(problem.vartheta * quad + (1.0 - problem.vartheta) * dist)
}

fn check_vartheta_positive(vartheta: f64) -> Result<()> {
    if !(vartheta > 0.0 && vartheta <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "the min-max machinery needs vartheta in (0,1], got {vartheta}"
        )));
    }
    Ok(())
}

/// Inner minimizer of the Lagrangian at fixed multipliers: the indicator
/// of the K smallest entries of `(1-vartheta) d - 2 sum_m gamma_m v_m`,
/// ties to the lowest index.
pub fn z_star(
    gamma: &[f64],
    basis: &EigenBasis,
    d: &[f64],
    vartheta: f64,
    k: usize,
) -> Result<Selection> {
    check_vartheta_positive(vartheta)?;
    if gamma.len() != basis.rank() {
        return Err(Error::DimensionMismatch {
            expected: basis.rank(),
            got: gamma.len(),
        });
    }
    let n = d.len();
    let mut scores: Vec<f64> = d.iter().map(|&di| (1.0 - vartheta) * di).collect();
    for (m, &g) in gamma.iter().enumerate() {
        let vm = basis.vectors.column(m);
        for (i, s) in scores.iter_mut().enumerate() {
            *s -= 2.0 * g * vm[i];
        }
    }
    Ok(k_smallest(&scores, k.min(n)))
}

/// Indices of the K smallest values, ties to the lowest index.
pub fn k_smallest(values: &[f64], k: usize) -> Selection {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap().then(a.cmp(&b)));
    Selection::new(order[..k.min(values.len())].to_vec())
}

/// Outer maximizer of the Lagrangian at a fixed selection:
/// `gamma_m = -vartheta * sigma_m * v_m'z`.
pub fn gamma_star(z: &Selection, basis: &EigenBasis, vartheta: f64) -> Result<Vec<f64>> {
    check_vartheta_positive(vartheta)?;
    Ok((0..basis.rank())
        .map(|m| {
            let vm = basis.vectors.column(m);
            let h: f64 = z.indices().iter().map(|&i| vm[i]).sum();
            -vartheta * basis.sigma[m] * h
        })
        .collect())
}

/// The min-max Lagrangian
/// `((1-vartheta) d - 2 sum gamma_m v_m)'z - sum gamma_m^2/(vartheta sigma_m)`.
pub fn lagrangian(
    z: &Selection,
    gamma: &[f64],
    basis: &EigenBasis,
    d: &[f64],
    vartheta: f64,
) -> Result<f64> {
    check_vartheta_positive(vartheta)?;
    if gamma.len() != basis.rank() {
        return Err(Error::DimensionMismatch {
            expected: basis.rank(),
            got: gamma.len(),
        });
    }
    let mut linear = 0.0;
    for &i in z.indices() {
        let mut s = (1.0 - vartheta) * d[i];
        for (m, &g) in gamma.iter().enumerate() {
            s -= 2.0 * g * basis.vectors[(i, m)];
        }
        linear += s;
    }
    let penalty: f64 = gamma
        .iter()
        .enumerate()
        .map(|(m, &g)| g * g / (vartheta * basis.sigma[m]))
        .sum();
    Ok(linear - penalty)
}

/// One iterate of a screening run.
#[derive(Debug, Clone)]
pub struct IterateRecord {
    pub selection: Selection,
    pub gamma: Vec<f64>,
    /// Exact objective of the iterate under the full S.
    pub primal_objective: f64,
    /// Lagrangian at (selection, gamma); a lower bound on the truncated
    /// objective by weak duality when the selection solves the inner
    /// minimization.
    pub dual_value: f64,
}

/// The iterates `z_1..z_T` with their multipliers and objective values.
#[derive(Debug, Clone)]
pub struct IterateTrace {
    pub iterates: Vec<IterateRecord>,
}

impl IterateTrace {
    pub fn len(&self) -> usize {
        self.iterates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.iterates.is_empty()
    }

    /// Iterate with the best (smallest) exact primal objective; earliest
    /// wins ties.
    pub fn best_iterate(&self) -> &IterateRecord {
        self.iterates
            .iter()
            .reduce(|best, r| {
                if r.primal_objective < best.primal_objective {
                    r
                } else {
                    best
                }
            })
            .expect("trace is never empty")
    }

    /// Per-iteration CSV: `t,primal_objective,dual_value,support` with the
    /// support indices space-separated.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "t,primal_objective,dual_value,support")?;
        for (t, r) in self.iterates.iter().enumerate() {
            let support = r
                .selection
                .indices()
                .iter()
                .map(|i| i.to_string())
                .collect::<Vec<_>>()
                .join(" ");
            writeln!(
                w,
                "{},{},{},{}",
                t + 1,
                r.primal_objective,
                r.dual_value,
                support
            )?;
        }
        Ok(())
    }
}

fn record_iterate(
    problem: &QuadProblem,
    basis: &EigenBasis,
    selection: Selection,
    gamma: Vec<f64>,
) -> Result<IterateRecord> {
    let primal = objective(problem, &selection)?;
    let dual = lagrangian(&selection, &gamma, basis, &problem.d, problem.vartheta)?;
    Ok(IterateRecord {
        selection,
        gamma,
        primal_objective: primal,
        dual_value: dual,
    })
}

/// Best-response iterations: alternate the closed-form optimizers,
/// starting from the empty selection and zero multipliers.
pub fn best_response(problem: &QuadProblem, basis: &EigenBasis, t: usize) -> Result<IterateTrace> {
    check_vartheta_positive(problem.vartheta)?;
    if t == 0 {
        return Err(Error::InvalidParameter("need at least one iteration".into()));
    }
    let mut z = Selection::new(Vec::new());
    let mut iterates = Vec::with_capacity(t);
    for _ in 0..t {
        let gamma = gamma_star(&z, basis, problem.vartheta)?;
        z = z_star(&gamma, basis, &problem.d, problem.vartheta, problem.k)?;
        iterates.push(record_iterate(problem, basis, z.clone(), gamma)?);
    }
    Ok(IterateTrace { iterates })
}

/// Dual-ascent iterations with diminishing steps `2*lambda/sqrt(t+1)`
/// along the dual gradient `-(gamma_m/(vartheta sigma_m) + v_m'z_t)`.
pub fn dual_ascent(
    problem: &QuadProblem,
    basis: &EigenBasis,
    t: usize,
    lambda: f64,
) -> Result<IterateTrace> {
    check_vartheta_positive(problem.vartheta)?;
    if t == 0 {
        return Err(Error::InvalidParameter("need at least one iteration".into()));
    }
    if lambda < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "step size must be nonnegative, got {lambda}"
        )));
    }
    let m = basis.rank();
    let mut gamma = vec![0.0; m];
    let mut z = Selection::new(Vec::new());
    let mut iterates = Vec::with_capacity(t);
    for step in 0..t {
        let rate = 2.0 * lambda / ((step + 1) as f64).sqrt();
        let mut next_gamma = gamma.clone();
        for (mi, g) in next_gamma.iter_mut().enumerate() {
            let vm = basis.vectors.column(mi);
            let vz: f64 = z.indices().iter().map(|&i| vm[i]).sum();
            *g -= rate * (gamma[mi] / (problem.vartheta * basis.sigma[mi]) + vz);
        }
        gamma = next_gamma;
        z = z_star(&gamma, basis, &problem.d, problem.vartheta, problem.k)?;
        iterates.push(record_iterate(problem, basis, z.clone(), gamma.clone())?);
    }
    Ok(IterateTrace { iterates })
}

/// The dual function `g(gamma) = min_z L(z, gamma)`, with the inner
/// minimization solved exactly by the K-smallest rule. A lower bound on
/// the truncated objective of every feasible selection.
pub fn dual_value(
    gamma: &[f64],
    basis: &EigenBasis,
    d: &[f64],
    vartheta: f64,
    k: usize,
) -> Result<f64> {
    let z = z_star(gamma, basis, d, vartheta, k)?;
    lagrangian(&z, gamma, basis, d, vartheta)
}

/// Indices that appeared in the last `tau + 1` iterates.
#[derive(Debug, Clone)]
pub struct ScreeningSet {
    pub indices: Vec<usize>,
    pub tau: usize,
}

/// Union of supports of the final `tau + 1` iterates of a trace.
pub fn screen(trace: &IterateTrace, tau: usize, k: usize) -> Result<ScreeningSet> {
    if tau >= trace.len() {
        return Err(Error::InvalidParameter(format!(
            "window tau={tau} must be smaller than the trace length {}",
            trace.len()
        )));
    }
    let mut union = Selection::new(Vec::new());
    for r in &trace.iterates[trace.len() - tau - 1..] {
        union = union.union(&r.selection);
    }
    if union.len() < k {
        return Err(Error::ScreeningTooSmall {
            k,
            got: union.len(),
        });
    }
    Ok(ScreeningSet {
        indices: union.indices().to_vec(),
        tau,
    })
}

/// Similarity lookups for the reduced solver: densified when small enough,
/// otherwise computed on the fly from the source.
enum ReducedSim<'a> {
    Dense(Vec<f64>, usize),
    Lazy(&'a SimilaritySource, &'a [usize]),
}

impl ReducedSim<'_> {
    fn entry(&self, i: usize, j: usize) -> f64 {
        match self {
            ReducedSim::Dense(s, m) => s[i * m + j],
            ReducedSim::Lazy(src, ids) => src.entry(ids[i], ids[j]),
        }
    }
}

struct ReducedSolver<'a> {
    sim: ReducedSim<'a>,
    d: Vec<f64>,
    diag: Vec<f64>,
    vartheta: f64,
    k: usize,
    m: usize,
    /// Worst-case |S_ij| among the candidates, for the pair-term bound.
    s_max: f64,
    use_bound: bool,
    best_value: f64,
    best: Vec<usize>,
    prune_ref: f64,
    scratch: Vec<f64>,
}

impl ReducedSolver<'_> {
    fn add_row(&self, i: usize, cross: &mut [f64], sign: f64) {
        match &self.sim {
            ReducedSim::Dense(s, m) => {
                let row = &s[i * m..(i + 1) * m];
                for (c, &v) in cross.iter_mut().zip(row) {
                    *c += sign * v;
                }
            }
            ReducedSim::Lazy(src, ids) => {
                let gi = ids[i];
                for (j, c) in cross.iter_mut().enumerate() {
                    *c += sign * src.entry(gi, ids[j]);
                }
            }
        }
    }

    /// Depth-first search over ascending index combinations. `cross[j]`
    /// holds `sum_{s in partial} S_sj`; the last element is chosen by a
    /// closed-form scan. Pruning uses a valid lower bound: the known
    /// per-candidate terms plus the worst case `-r(r-1) s_max` for the
    /// pairwise terms among the still-unchosen elements.
    fn dfs(
        &mut self,
        start: usize,
        partial: &mut Vec<usize>,
        cross: &mut [f64],
        partial_quad: f64,
        partial_dist: f64,
    ) {
        let r = self.k - partial.len();
        let vt = self.vartheta;
        let rest = 1.0 - vt;
        let base = vt * partial_quad + rest * partial_dist;
        if r == 1 {
            let mut best_value = self.best_value;
            let mut best_i = usize::MAX;
            for i in start..self.m {
                let value = base + vt * (self.diag[i] + 2.0 * cross[i]) + rest * self.d[i];
                if value < best_value {
                    best_value = value;
                    best_i = i;
                }
            }
            if best_i != usize::MAX {
                self.best_value = best_value;
                partial.push(best_i);
                self.best = partial.clone();
                partial.pop();
            }
            return;
        }
        if r == 2 {
            if let ReducedSim::Dense(s, msize) = &self.sim {
                // fused pair-plus-leaf scan on dense rows
                let m = *msize;
                let mut best_value = self.best_value;
                let mut best_pair = (usize::MAX, usize::MAX);
                for j in start..m.saturating_sub(1) {
                    let base_j = base + vt * (self.diag[j] + 2.0 * cross[j]) + rest * self.d[j];
                    let row_j = &s[j * m..(j + 1) * m];
                    for l in (j + 1)..m {
                        let value = base_j
                            + vt * (self.diag[l] + 2.0 * (cross[l] + row_j[l]))
                            + rest * self.d[l];
                        if value < best_value {
                            best_value = value;
                            best_pair = (j, l);
                        }
                    }
                }
                if best_pair.0 != usize::MAX {
                    self.best_value = best_value;
                    partial.push(best_pair.0);
                    partial.push(best_pair.1);
                    self.best = partial.clone();
                    partial.pop();
                    partial.pop();
                }
                return;
            }
        }
        for i in start..=self.m - r {
            let quad = partial_quad + self.diag[i] + 2.0 * cross[i];
            let dist = partial_dist + self.d[i];
            self.add_row(i, cross, 1.0);
            let mut prune = false;
            // r <= 2 levels solve themselves in closed scans, so bounding
            // only pays off higher up
            if self.use_bound && r - 1 >= 2 {
                let bound = self.child_bound(i + 1, quad, dist, r - 1, cross);
                let threshold = self.best_value.min(self.prune_ref);
                if bound > threshold + PRUNE_SLACK {
                    prune = true;
                }
            }
            if !prune {
                partial.push(i);
                self.dfs(i + 1, partial, cross, quad, dist);
                partial.pop();
            }
            self.add_row(i, cross, -1.0);
        }
    }

    fn child_bound(
        &mut self,
        start: usize,
        quad: f64,
        dist: f64,
        r: usize,
        cross: &[f64],
    ) -> f64 {
        let vt = self.vartheta;
        let base = vt * quad + (1.0 - vt) * dist;
        if r == 0 {
            return base;
        }
        self.scratch.clear();
        for j in start..self.m {
            let g = vt * (self.diag[j] + 2.0 * cross[j]) + (1.0 - vt) * self.d[j];
            self.scratch.push(g);
        }
        if self.scratch.len() < r {
            return f64::INFINITY; // infeasible branch
        }
        self.scratch
            .select_nth_unstable_by(r - 1, |a, b| a.partial_cmp(b).unwrap());
        let cheapest: f64 = self.scratch[..r].iter().sum();
        base + cheapest - vt * (r * (r - 1)) as f64 * self.s_max
    }
}

/// Exact minimizer of the full-S objective restricted to supports inside
/// `subset`: plain enumeration when at most 10^6 subsets exist, otherwise
/// a depth-first branch-and-bound warm-started by the greedy/local-search
/// heuristics. Ties go to the lexicographically smallest index set.
pub fn solve_reduced(problem: &QuadProblem, subset: &[usize]) -> Result<Selection> {
    solve_reduced_impl(problem, subset, None)
}

#[cfg(test)]
pub(crate) fn solve_reduced_forced(
    problem: &QuadProblem,
    subset: &[usize],
    use_bound: bool,
) -> Result<Selection> {
    solve_reduced_impl(problem, subset, Some(use_bound))
}

fn solve_reduced_impl(
    problem: &QuadProblem,
    subset: &[usize],
    force_bound: Option<bool>,
) -> Result<Selection> {
    let ids = Selection::new(subset.to_vec());
    let m = ids.len();
    if m < problem.k {
        return Err(Error::ScreeningTooSmall {
            k: problem.k,
            got: m,
        });
    }
    let use_bound = force_bound.unwrap_or(binomial(m, problem.k) > ENUMERATION_LIMIT);

    let sim = if m <= DENSIFY_LIMIT {
        let mut dense = vec![0.0; m * m];
        for (ri, &i) in ids.indices().iter().enumerate() {
            for (rj, &j) in ids.indices().iter().enumerate() {
                dense[ri * m + rj] = problem.sim.entry(i, j);
            }
        }
        ReducedSim::Dense(dense, m)
    } else {
        ReducedSim::Lazy(&problem.sim, ids.indices())
    };
    let s_max = match &sim {
        ReducedSim::Dense(s, m) => {
            let mut v: f64 = 0.0;
            for i in 0..*m {
                for j in 0..*m {
                    if i != j {
                        v = v.max(s[i * m + j].abs());
                    }
                }
            }
            v
        }
        ReducedSim::Lazy(src, _) => src.max_abs_off_diagonal(),
    };
    let d: Vec<f64> = ids.indices().iter().map(|&i| problem.d[i]).collect();

    // warm start for pruning; never returned directly
    let prune_ref = if use_bound {
        let warm = reduced_greedy(&sim, &d, problem.vartheta, problem.k);
        let warm = reduced_local_search(&sim, &d, problem.vartheta, &warm);
        reduced_objective(&sim, &d, problem.vartheta, &warm)
    } else {
        f64::INFINITY
    };

    let diag: Vec<f64> = (0..m).map(|i| sim.entry(i, i)).collect();
    let mut solver = ReducedSolver {
        sim,
        d,
        diag,
        vartheta: problem.vartheta,
        k: problem.k,
        m,
        s_max,
        use_bound,
        best_value: f64::INFINITY,
        best: Vec::new(),
        prune_ref,
        scratch: Vec::with_capacity(m),
    };
    let mut cross = vec![0.0; m];
    let mut partial = Vec::with_capacity(problem.k);
    solver.dfs(0, &mut partial, &mut cross, 0.0, 0.0);
    debug_assert_eq!(solver.best.len(), problem.k);
    Ok(Selection::new(
        solver.best.iter().map(|&r| ids.indices()[r]).collect(),
    ))
}

fn reduced_objective(sim: &ReducedSim, d: &[f64], vartheta: f64, ids: &[usize]) -> f64 {
    let mut quad = 0.0;
    let mut dist = 0.0;
    for &i in ids {
        dist += d[i];
        for &j in ids {
            quad += sim.entry(i, j);
        }
    }
    vartheta * quad + (1.0 - vartheta) * dist
}

fn reduced_greedy(sim: &ReducedSim, d: &[f64], vartheta: f64, k: usize) -> Vec<usize> {
    let m = d.len();
    let mut cross = vec![0.0; m];
    let mut in_set = vec![false; m];
    let mut chosen = Vec::with_capacity(k);
    for _ in 0..k {
        let mut best: Option<usize> = None;
        let mut best_term = f64::INFINITY;
        for i in 0..m {
            if in_set[i] {
                continue;
            }
            let term = vartheta * (sim.entry(i, i) + 2.0 * cross[i]) + (1.0 - vartheta) * d[i];
            if best.is_none() || term < best_term {
                best = Some(i);
                best_term = term;
            }
        }
        let j = best.expect("k <= m");
        chosen.push(j);
        in_set[j] = true;
        for (i, c) in cross.iter_mut().enumerate() {
            *c += sim.entry(j, i);
        }
    }
    chosen.sort_unstable();
    chosen
}

fn reduced_local_search(sim: &ReducedSim, d: &[f64], vartheta: f64, z0: &[usize]) -> Vec<usize> {
    let m = d.len();
    let mut current = z0.to_vec();
    let mut obj = reduced_objective(sim, d, vartheta, &current);
    loop {
        let mut best_remove = 0;
        let mut best_contribution = f64::NEG_INFINITY;
        for (pos, &j) in current.iter().enumerate() {
            let mut cross_j = 0.0;
            for &i in &current {
                if i != j {
                    cross_j += sim.entry(i, j);
                }
            }
            let contribution =
                vartheta * (sim.entry(j, j) + 2.0 * cross_j) + (1.0 - vartheta) * d[j];
            if contribution > best_contribution {
                best_contribution = contribution;
                best_remove = pos;
            }
        }
        let mut reduced = current.clone();
        let removed = reduced.remove(best_remove);
        let mut cross = vec![0.0; m];
        for &i in &reduced {
            for (j, c) in cross.iter_mut().enumerate() {
                *c += sim.entry(i, j);
            }
        }
        let mut best_add: Option<usize> = None;
        let mut best_term = f64::INFINITY;
        for i in 0..m {
            if reduced.contains(&i) {
                continue;
            }
            let term = vartheta * (sim.entry(i, i) + 2.0 * cross[i]) + (1.0 - vartheta) * d[i];
            if best_add.is_none() || term < best_term {
                best_add = Some(i);
                best_term = term;
            }
        }
        let Some(j_plus) = best_add else {
            return current;
        };
        if j_plus == removed {
            return current;
        }
        let mut candidate = reduced;
        candidate.push(j_plus);
        candidate.sort_unstable();
        let candidate_obj = reduced_objective(sim, d, vartheta, &candidate);
        if candidate_obj < obj - IMPROVEMENT_TOL {
            current = candidate;
            obj = candidate_obj;
        } else {
            return current;
        }
    }
}

/// Exhaustive oracle over all K-subsets (at most 10^7 allowed):
/// the exact global minimizer, ties to the lexicographically smallest set.
pub fn brute_force(problem: &QuadProblem) -> Result<Selection> {
    let n = problem.n();
    if binomial(n, problem.k) > ORACLE_BUDGET {
        return Err(Error::BudgetExceeded {
            n,
            k: problem.k,
            budget: ORACLE_BUDGET,
        });
    }
    let mut combo: Vec<usize> = (0..problem.k).collect();
    let mut best: Option<(f64, Vec<usize>)> = None;
    loop {
        let value = objective(problem, &Selection::new(combo.clone()))?;
        match &best {
            None => best = Some((value, combo.clone())),
            Some((bv, _)) if value < *bv => best = Some((value, combo.clone())),
            _ => {}
        }
        if !next_combination(&mut combo, n) {
            break;
        }
    }
    Ok(Selection::new(best.expect("at least one subset").1))
}

/// Greedy heuristic: repeatedly add the index with the smallest marginal
/// objective increase, ties to the lowest index.
pub fn greedy(problem: &QuadProblem) -> Result<Selection> {
    greedy_on_subset(problem, &(0..problem.n()).collect::<Vec<_>>())
}

fn greedy_on_subset(problem: &QuadProblem, candidates: &[usize]) -> Result<Selection> {
    let vt = problem.vartheta;
    let mut cross: Vec<f64> = vec![0.0; problem.n()];
    let mut chosen = Vec::with_capacity(problem.k);
    let mut in_set = vec![false; problem.n()];
    let mut row = vec![0.0; problem.n()];
    for _ in 0..problem.k {
        let mut best: Option<usize> = None;
        let mut best_term = f64::INFINITY;
        for &i in candidates {
            if in_set[i] {
                continue;
            }
            let term =
                vt * (problem.sim.entry(i, i) + 2.0 * cross[i]) + (1.0 - vt) * problem.d[i];
            if best.is_none() || term < best_term {
                best = Some(i);
                best_term = term;
            }
        }
        let j = best.expect("k <= candidate count");
        chosen.push(j);
        in_set[j] = true;
        problem.sim.row_into(j, &mut row);
        for (c, &r) in cross.iter_mut().zip(&row) {
            *c += r;
        }
    }
    Ok(Selection::new(chosen))
}

/// 2-swap local search for the quadratic objective, started from `z0`:
/// remove the member contributing the most to the objective, then add the
/// candidate with the smallest marginal increase over everything outside
/// the reduced set (including the removed member). Moves are accepted on
/// strict improvement (> 1e-10) only, so the result never exceeds the
/// objective of `z0`.
pub fn local_search_from(problem: &QuadProblem, z0: &Selection) -> Result<Selection> {
    if z0.len() != problem.k {
        return Err(Error::CardinalityViolation {
            expected: problem.k,
            got: z0.len(),
        });
    }
    let vt = problem.vartheta;
    let n = problem.n();
    let mut current: Vec<usize> = z0.indices().to_vec();
    let mut obj = objective(problem, &Selection::new(current.clone()))?;
    let mut row = vec![0.0; n];
    loop {
        // contribution of each member: its removal lowers the objective by
        // this amount
        let mut best_remove = 0;
        let mut best_contribution = f64::NEG_INFINITY;
        for (pos, &j) in current.iter().enumerate() {
            let mut cross_j = 0.0;
            for &i in &current {
                if i != j {
                    cross_j += problem.sim.entry(i, j);
                }
            }
            let contribution =
                vt * (problem.sim.entry(j, j) + 2.0 * cross_j) + (1.0 - vt) * problem.d[j];
            if contribution > best_contribution {
                best_contribution = contribution;
                best_remove = pos;
            }
        }
        let mut reduced = current.clone();
        let removed = reduced.remove(best_remove);

        let mut cross = vec![0.0; n];
        for &i in &reduced {
            problem.sim.row_into(i, &mut row);
            for (c, &r) in cross.iter_mut().zip(&row) {
                *c += r;
            }
        }
        let mut in_reduced = vec![false; n];
        for &i in &reduced {
            in_reduced[i] = true;
        }
        let mut best_add: Option<usize> = None;
        let mut best_term = f64::INFINITY;
        for i in 0..n {
            if in_reduced[i] {
                continue;
            }
            let term =
                vt * (problem.sim.entry(i, i) + 2.0 * cross[i]) + (1.0 - vt) * problem.d[i];
            if best_add.is_none() || term < best_term {
                best_add = Some(i);
                best_term = term;
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
        let candidate = Selection::new(candidate);
        let candidate_obj = objective(problem, &candidate)?;
        if candidate_obj < obj - IMPROVEMENT_TOL {
            current = candidate.indices().to_vec();
            obj = candidate_obj;
        } else {
            return Ok(Selection::new(current));
        }
    }
}

/// Greedy followed by local search.
pub fn local_search(problem: &QuadProblem) -> Result<Selection> {
    let start = greedy(problem)?;
    local_search_from(problem, &start)
}

/// Closed-form solution at `vartheta = 0`: the K nearest candidates by
/// distance, ties to the lowest index.
pub fn k_nearest(d: &[f64], k: usize) -> Selection {
    k_smallest(d, k)
}
