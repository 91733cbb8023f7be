//! Plan and sequential-path metrics: cost, validity, anti-diversity, the
//! determinant-based diversity score, manifold distance, and the weighted
//! path Levenshtein / Jaccard measures.

use nalgebra::{DMatrix, DVector};

use crate::classifier::MlpModel;
use crate::error::{Error, Result};
use crate::graph::{ActionGraph, GraphPath};
use crate::interpolate::RecoursePlan;

/// Scores of one plan.
#[derive(Debug, Clone)]
pub struct PlanMetrics {
    pub cost: f64,
    pub valid: bool,
    pub anti_diversity: f64,
    pub dpp: f64,
    pub manifold_distance: f64,
}

/// Scores of one sequential plan.
#[derive(Debug, Clone)]
pub struct PathMetrics {
    pub shortest_path_cost: f64,
    /// Undefined (None) below two paths.
    pub path_diversity: Option<f64>,
    /// Undefined (None) below two paths.
    pub path_anti_diversity: Option<f64>,
}

pub fn euclidean(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    (a - b).norm()
}

/// Mean distance from the input to each recourse.
pub fn cost<F>(plan: &RecoursePlan, mut dist: F) -> f64
where
    F: FnMut(&DVector<f64>, &DVector<f64>) -> f64,
{
    assert!(plan.k() > 0, "cost of an empty plan is undefined");
    plan.entries
        .iter()
        .map(|e| dist(&e.recourse, &plan.x0))
        .sum::<f64>()
        / plan.k() as f64
}

/// Whether every recourse of the plan receives the favorable label.
pub fn plan_is_valid(plan: &RecoursePlan, model: &MlpModel) -> Result<bool> {
    for e in &plan.entries {
        if model.predict_label(&e.recourse)? != 1 {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Fraction of plans whose every recourse flips the prediction; `None`
/// for an empty collection.
pub fn validity(plans: &[RecoursePlan], model: &MlpModel) -> Result<Option<f64>> {
    if plans.is_empty() {
        return Ok(None);
    }
    let mut valid = 0usize;
    for plan in plans {
        if plan_is_valid(plan, model)? {
            valid += 1;
        }
    }
    Ok(Some(valid as f64 / plans.len() as f64))
}

/// Sum over ordered pairs (k, k') with k != k' of the cosine between the
/// recourse directions; each unordered pair therefore counts twice.
pub fn anti_diversity_metric(plan: &RecoursePlan) -> Result<f64> {
    let mut units = Vec::with_capacity(plan.k());
    for (idx, e) in plan.entries.iter().enumerate() {
        let diff = &e.recourse - &plan.x0;
        let norm = diff.norm();
        if norm <= 1e-12 {
            return Err(Error::ZeroNormDirection(idx));
        }
        units.push(diff / norm);
    }
    let mut total = 0.0;
    for (a, ua) in units.iter().enumerate() {
        for (b, ub) in units.iter().enumerate() {
            if a != b {
                total += ua.dot(ub);
            }
        }
    }
    Ok(total)
}

/// Determinant of the decay kernel `Q_ij = (1 + dist(r_i, r_j))^-1` over
/// the plan's recourses; the diagonal is pinned to 1 exactly.
pub fn dpp_metric<F>(plan: &RecoursePlan, mut dist: F) -> f64
where
    F: FnMut(&DVector<f64>, &DVector<f64>) -> f64,
{
    let k = plan.k();
    let mut q = DMatrix::zeros(k, k);
    for i in 0..k {
        q[(i, i)] = 1.0;
        for j in (i + 1)..k {
            let v = 1.0 / (1.0 + dist(&plan.entries[i].recourse, &plan.entries[j].recourse));
            q[(i, j)] = v;
            q[(j, i)] = v;
        }
    }
    q.determinant()
}

/// Determinant of the decay kernel from a precomputed distance matrix
/// (graph mode, where recourse distances are shortest-path lengths).
pub fn dpp_metric_from_distances(dists: &DMatrix<f64>) -> f64 {
    let k = dists.nrows();
    let mut q = DMatrix::zeros(k, k);
    for i in 0..k {
        q[(i, i)] = 1.0;
        for j in 0..k {
            if i != j {
                q[(i, j)] = 1.0 / (1.0 + dists[(i, j)]);
            }
        }
    }
    q.determinant()
}

/// Max over recourses of the distance to the nearest favorably-predicted
/// sample (columns of `positives`).
pub fn manifold_distance(plan: &RecoursePlan, positives: &DMatrix<f64>) -> f64 {
    assert!(positives.ncols() > 0, "need at least one positive sample");
    plan.entries
        .iter()
        .map(|e| {
            (0..positives.ncols())
                .map(|i| (positives.column(i) - &e.recourse).norm())
                .fold(f64::INFINITY, f64::min)
        })
        .fold(0.0, f64::max)
}

/// Weighted path edit distance over node sequences `p` and `q` with
/// feature coordinates in `coords` (indexed by node id). Removing a
/// trailing node costs the length of its incident edge; substituting
/// endpoint nodes costs their feature distance. Degenerate bases: the
/// empty-vs-empty distance is 0, a single node against the empty path is
/// 0, and a longer path against the empty path costs its total length.
pub fn path_levenshtein(p: &[usize], q: &[usize], coords: &[DVector<f64>]) -> f64 {
    let d = |a: usize, b: usize| euclidean(&coords[a], &coords[b]);
    let lp = p.len();
    let lq = q.len();
    // table[i][j] = lev over the first i nodes of p and j nodes of q
    let mut table = vec![vec![0.0f64; lq + 1]; lp + 1];
    for i in 2..=lp {
        table[i][0] = table[i - 1][0] + d(p[i - 1], p[i - 2]);
    }
    for j in 2..=lq {
        table[0][j] = table[0][j - 1] + d(q[j - 1], q[j - 2]);
    }
    for i in 1..=lp {
        for j in 1..=lq {
            let mut best = d(p[i - 1], q[j - 1]) + table[i - 1][j - 1];
            if j >= 2 {
                best = best.min(d(q[j - 1], q[j - 2]) + table[i][j - 1]);
            }
            if i >= 2 {
                best = best.min(d(p[i - 1], p[i - 2]) + table[i - 1][j]);
            }
            table[i][j] = best;
        }
    }
    table[lp][lq]
}

/// Average pairwise path Levenshtein distance over unordered pairs;
/// `None` below two paths.
pub fn path_diversity(paths: &[&[usize]], coords: &[DVector<f64>]) -> Option<f64> {
    let k = paths.len();
    if k < 2 {
        return None;
    }
    let mut total = 0.0;
    for i in 0..k {
        for j in (i + 1)..k {
            total += path_levenshtein(paths[i], paths[j], coords);
        }
    }
    Some(total / (k * (k - 1) / 2) as f64)
}

/// Length-weighted Jaccard coefficient of the edge sets of two paths.
/// Edges are identified by their unordered endpoint pair; an edge's
/// length is the feature distance of its endpoints. When the union has
/// zero total length the value is 1 for equal edge sets and 0 otherwise.
pub fn path_jaccard(p: &[usize], q: &[usize], coords: &[DVector<f64>]) -> f64 {
    let edge_set = |path: &[usize]| {
        let mut edges: Vec<(usize, usize)> = path
            .windows(2)
            .map(|w| (w[0].min(w[1]), w[0].max(w[1])))
            .collect();
        edges.sort_unstable();
        edges.dedup();
        edges
    };
    let pe = edge_set(p);
    let qe = edge_set(q);
    let length = |e: &(usize, usize)| euclidean(&coords[e.0], &coords[e.1]);
    let mut intersection = 0.0;
    let mut union = 0.0;
    let mut union_edges = pe.clone();
    union_edges.extend(qe.iter().copied());
    union_edges.sort_unstable();
    union_edges.dedup();
    for e in &union_edges {
        let len = length(e);
        union += len;
        if pe.binary_search(e).is_ok() && qe.binary_search(e).is_ok() {
            intersection += len;
        }
    }
    if union == 0.0 {
        return if pe == qe { 1.0 } else { 0.0 };
    }
    intersection / union
}

/// Average pairwise Jaccard over unordered pairs; `None` below two paths.
pub fn path_anti_diversity(paths: &[&[usize]], coords: &[DVector<f64>]) -> Option<f64> {
    let k = paths.len();
    if k < 2 {
        return None;
    }
    let mut total = 0.0;
    for i in 0..k {
        for j in (i + 1)..k {
            total += path_jaccard(paths[i], paths[j], coords);
        }
    }
    Some(total / (k * (k - 1) / 2) as f64)
}

/// Full metric row for a linear-mode plan: Euclidean distances
/// everywhere.
pub fn evaluate_linear_plan(
    plan: &RecoursePlan,
    model: &MlpModel,
    positives: &DMatrix<f64>,
) -> Result<PlanMetrics> {
    Ok(PlanMetrics {
        cost: cost(plan, euclidean),
        valid: plan_is_valid(plan, model)?,
        anti_diversity: anti_diversity_metric(plan)?,
        dpp: dpp_metric(plan, euclidean),
        manifold_distance: manifold_distance(plan, positives),
    })
}

/// Full metric rows for a graph-mode plan. Costs and the decay kernel use
/// shortest-path distances on the graph (the input must already be
/// attachable); anti-diversity keeps feature-space directions; manifold
/// distance stays Euclidean against the favorably-predicted nodes.
pub fn evaluate_graph_plan(
    plan: &RecoursePlan,
    model: &MlpModel,
    graph: &ActionGraph,
) -> Result<(PlanMetrics, PathMetrics)> {
    let k = plan.k();
    let paths: Vec<&GraphPath> = plan
        .entries
        .iter()
        .map(|e| {
            e.path
                .as_ref()
                .ok_or_else(|| Error::MalformedPlan("graph-mode plan without paths".into()))
        })
        .collect::<Result<_>>()?;
    let shortest_path_cost =
        paths.iter().map(|p| p.weight).sum::<f64>() / k as f64;

    // pairwise shortest-path distances between the prototype nodes
    let attached = crate::graph::attach_input(graph, &plan.x0, model)?;
    let mut node_dists = DMatrix::zeros(k, k);
    for (i, path) in paths.iter().enumerate() {
        let from = *path.nodes.last().expect("paths are nonempty");
        let sp = crate::graph::shortest_paths(&attached, from);
        for (j, other) in paths.iter().enumerate() {
            if i != j {
                node_dists[(i, j)] = sp.dist[*other.nodes.last().expect("nonempty")];
            }
        }
    }

    let positives_cols: Vec<usize> = (0..graph.len())
        .filter(|&v| graph.nodes[v].label == 1)
        .collect();
    let mut positives = DMatrix::zeros(plan.x0.len(), positives_cols.len());
    for (c, &v) in positives_cols.iter().enumerate() {
        positives.set_column(c, &graph.nodes[v].coords);
    }

    let coords: Vec<DVector<f64>> = attached.nodes.iter().map(|n| n.coords.clone()).collect();
    let node_paths: Vec<&[usize]> = paths.iter().map(|p| p.nodes.as_slice()).collect();

    let plan_metrics = PlanMetrics {
        cost: shortest_path_cost,
        valid: plan_is_valid(plan, model)?,
        anti_diversity: anti_diversity_metric(plan)?,
        dpp: dpp_metric_from_distances(&node_dists),
        manifold_distance: manifold_distance(plan, &positives),
    };
    let path_metrics = PathMetrics {
        shortest_path_cost,
        path_diversity: path_diversity(&node_paths, &coords),
        path_anti_diversity: path_anti_diversity(&node_paths, &coords),
    };
    Ok((plan_metrics, path_metrics))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interpolate::{PlanEntry, RecoursePlan};
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn plan_from(x0: Vec<f64>, recourses: Vec<Vec<f64>>) -> RecoursePlan {
        RecoursePlan {
            x0: DVector::from_vec(x0),
            entries: recourses
                .into_iter()
                .enumerate()
                .map(|(i, r)| PlanEntry {
                    prototype_index: i,
                    prototype: DVector::from_vec(r.clone()),
                    recourse: DVector::from_vec(r),
                    lambda: Some(1.0),
                    path: None,
                })
                .collect(),
            method: "test".into(),
        }
    }

    #[test]
    fn cost_examples() {
        let plan = plan_from(vec![0.0, 0.0], vec![vec![0.0, 0.0], vec![0.0, 0.0]]);
        assert_eq!(cost(&plan, euclidean), 0.0);
        let plan = plan_from(vec![0.0, 0.0], vec![vec![1.0, 0.0], vec![3.0, 0.0]]);
        assert_eq!(cost(&plan, euclidean), 2.0);
        let plan = plan_from(vec![0.0, 0.0], vec![vec![0.0, 2.5]]);
        assert_eq!(cost(&plan, euclidean), 2.5);
    }

    #[test]
    fn anti_diversity_examples() {
        // orthogonal, opposite, identical direction pairs
        let orth = plan_from(vec![0.0, 0.0], vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
        assert_relative_eq!(anti_diversity_metric(&orth).unwrap(), 0.0, epsilon = 1e-12);
        let opp = plan_from(vec![0.0, 0.0], vec![vec![2.0, 0.0], vec![-1.0, 0.0]]);
        assert_relative_eq!(anti_diversity_metric(&opp).unwrap(), -2.0, epsilon = 1e-12);
        let same = plan_from(vec![0.0, 0.0], vec![vec![1.0, 0.0], vec![5.0, 0.0]]);
        assert_relative_eq!(anti_diversity_metric(&same).unwrap(), 2.0, epsilon = 1e-12);
        // coincident recourse is rejected
        let degenerate = plan_from(vec![0.0, 0.0], vec![vec![0.0, 0.0], vec![1.0, 0.0]]);
        assert!(matches!(
            anti_diversity_metric(&degenerate),
            Err(Error::ZeroNormDirection(0))
        ));
    }

    #[test]
    fn anti_diversity_range_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let k = rng.gen_range(2..6);
            let recourses: Vec<Vec<f64>> = (0..k)
                .map(|_| vec![rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)])
                .collect();
            let plan = plan_from(vec![2.0, 2.0], recourses);
            let v = anti_diversity_metric(&plan).unwrap();
            let bound = (k * (k - 1)) as f64;
            assert!(v >= -bound - 1e-9 && v <= bound + 1e-9);
        }
        // all directions identical attains K(K-1)
        let plan = plan_from(
            vec![0.0, 0.0],
            vec![vec![1.0, 0.0], vec![2.0, 0.0], vec![3.0, 0.0]],
        );
        assert_relative_eq!(anti_diversity_metric(&plan).unwrap(), 6.0, epsilon = 1e-9);
    }

    #[test]
    fn dpp_metric_examples() {
        let single = plan_from(vec![0.0, 0.0], vec![vec![1.0, 0.0]]);
        assert_eq!(dpp_metric(&single, euclidean), 1.0);
        // distance 1 pair: det [[1, .5], [.5, 1]] = 0.75
        let pair = plan_from(vec![0.0, 0.0], vec![vec![1.0, 0.0], vec![2.0, 0.0]]);
        assert_relative_eq!(dpp_metric(&pair, euclidean), 0.75, epsilon = 1e-12);
        // coincident recourses: det [[1, 1], [1, 1]] = 0
        let coincident = plan_from(vec![0.0, 0.0], vec![vec![1.0, 0.0], vec![1.0, 0.0]]);
        assert_relative_eq!(dpp_metric(&coincident, euclidean), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn dpp_metric_stays_in_unit_interval() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..30 {
            let k = rng.gen_range(1..6);
            let recourses: Vec<Vec<f64>> = (0..k)
                .map(|_| vec![rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)])
                .collect();
            let plan = plan_from(vec![0.0, 0.0], recourses);
            let v = dpp_metric(&plan, euclidean);
            assert!((-1e-9..=1.0 + 1e-9).contains(&v), "det(Q) = {v}");
        }
    }

    #[test]
    fn manifold_distance_examples() {
        let positives = DMatrix::from_columns(&[
            DVector::from_vec(vec![1.0, 0.0]),
            DVector::from_vec(vec![0.0, 1.0]),
        ]);
        // every recourse sits on a positive sample
        let plan = plan_from(vec![0.0, 0.0], vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
        assert_eq!(manifold_distance(&plan, &positives), 0.0);
        // single recourse at distance 2 from its nearest positive
        let plan = plan_from(vec![0.0, 0.0], vec![vec![3.0, 0.0]]);
        assert_eq!(manifold_distance(&plan, &positives), 2.0);
        // max-min: nearest distances 1 and 3
        let plan = plan_from(vec![0.0, 0.0], vec![vec![2.0, 0.0], vec![4.0, 0.0]]);
        assert_eq!(manifold_distance(&plan, &positives), 3.0);
    }

    #[test]
    fn validity_examples() {
        use crate::classifier::Layer;
        // label 1 iff first coordinate >= 0.5
        let model = MlpModel {
            layer_dims: vec![2, 1],
            layers: vec![Layer {
                weights: vec![vec![1.0, 0.0]],
                biases: vec![-0.5],
            }],
        };
        let valid = plan_from(vec![0.0, 0.0], vec![vec![0.9, 0.0]]);
        let invalid = plan_from(vec![0.0, 0.0], vec![vec![0.9, 0.0], vec![0.1, 0.0]]);
        let plans = vec![valid.clone(), valid.clone(), valid.clone(), invalid];
        assert_eq!(validity(&plans, &model).unwrap(), Some(0.75));
        assert_eq!(validity(&[], &model).unwrap(), None);
    }

    fn coords_1d(values: &[f64]) -> Vec<DVector<f64>> {
        values.iter().map(|&v| DVector::from_vec(vec![v])).collect()
    }

    #[test]
    fn levenshtein_examples() {
        let coords = coords_1d(&[0.0, 2.0, 5.0]);
        // identical paths cost nothing
        assert_eq!(path_levenshtein(&[0, 1, 2], &[0, 1, 2], &coords), 0.0);
        // one deletion under the decided base case: P = (a), Q = (a, b)
        assert_eq!(path_levenshtein(&[0], &[0, 1], &coords), 2.0);
        // symmetry
        let a = [0, 2];
        let b = [0, 1, 2];
        assert_eq!(
            path_levenshtein(&a, &b, &coords),
            path_levenshtein(&b, &a, &coords)
        );
    }

    /// Direct recursive evaluation of the path edit distance with the same
    /// base cases; exponential, test-side oracle.
    fn lev_oracle(p: &[usize], q: &[usize], coords: &[DVector<f64>]) -> f64 {
        let d = |a: usize, b: usize| euclidean(&coords[a], &coords[b]);
        if p.is_empty() && q.is_empty() {
            return 0.0;
        }
        if q.is_empty() {
            return p
                .windows(2)
                .map(|w| d(w[1], w[0]))
                .sum();
        }
        if p.is_empty() {
            return q
                .windows(2)
                .map(|w| d(w[1], w[0]))
                .sum();
        }
        let (lp, lq) = (p.len(), q.len());
        let mut best = d(p[lp - 1], q[lq - 1]) + lev_oracle(&p[..lp - 1], &q[..lq - 1], coords);
        if lq >= 2 {
            best = best.min(d(q[lq - 1], q[lq - 2]) + lev_oracle(p, &q[..lq - 1], coords));
        }
        if lp >= 2 {
            best = best.min(d(p[lp - 1], p[lp - 2]) + lev_oracle(&p[..lp - 1], q, coords));
        }
        best
    }

    #[test]
    fn levenshtein_matches_recursive_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let coords: Vec<DVector<f64>> = (0..12)
            .map(|_| DVector::from_vec(vec![rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0)]))
            .collect();
        for _ in 0..100 {
            let lp = rng.gen_range(1..=6);
            let lq = rng.gen_range(1..=6);
            let p: Vec<usize> = (0..lp).map(|_| rng.gen_range(0..coords.len())).collect();
            let q: Vec<usize> = (0..lq).map(|_| rng.gen_range(0..coords.len())).collect();
            let dp = path_levenshtein(&p, &q, &coords);
            let oracle = lev_oracle(&p, &q, &coords);
            assert_eq!(dp, oracle, "paths {p:?} vs {q:?}");
        }
    }

    #[test]
    fn path_diversity_examples() {
        let coords = coords_1d(&[0.0, 2.0, 5.0]);
        let a = vec![0, 1, 2];
        let b = vec![0, 1, 2];
        assert_eq!(
            path_diversity(&[&a, &b], &coords),
            Some(0.0)
        );
        let c = vec![0, 2];
        let pair = path_diversity(&[&a, &c], &coords).unwrap();
        assert_eq!(pair, path_levenshtein(&a, &c, &coords));
        assert_eq!(path_diversity(&[&a], &coords), None);
    }

    #[test]
    fn jaccard_examples() {
        let coords = coords_1d(&[0.0, 1.0, 3.0]);
        // identical edge sets
        assert_eq!(path_jaccard(&[0, 1, 2], &[0, 1, 2], &coords), 1.0);
        // disjoint edge sets
        assert_eq!(path_jaccard(&[0, 1], &[1, 2], &coords), 0.0);
        // shared edge of length 1, union length 1 + 2
        let v = path_jaccard(&[0, 1, 2], &[0, 1], &coords);
        assert_relative_eq!(v, 1.0 / 3.0, epsilon = 1e-12);
        // two unit edges against one shared unit edge: 1/2
        let unit = coords_1d(&[0.0, 1.0, 2.0]);
        assert_relative_eq!(
            path_jaccard(&[0, 1, 2], &[0, 1], &unit),
            0.5,
            epsilon = 1e-12
        );
        // zero-length unions fall back to set equality
        let dup = coords_1d(&[0.0, 0.0]);
        assert_eq!(path_jaccard(&[0, 1], &[0, 1], &dup), 1.0);
        assert_eq!(path_jaccard(&[0, 0], &[1, 1], &dup), 0.0);
    }

    #[test]
    fn path_anti_diversity_examples() {
        let coords = coords_1d(&[0.0, 1.0, 3.0, 7.0]);
        let a = vec![0, 1];
        let b = vec![0, 1];
        assert_eq!(path_anti_diversity(&[&a, &b], &coords), Some(1.0));
        let c = vec![2, 3];
        assert_eq!(path_anti_diversity(&[&a, &c], &coords), Some(0.0));
        let mixed = path_anti_diversity(&[&a, &b, &c], &coords).unwrap();
        assert!((0.0..=1.0).contains(&mixed));
        assert_relative_eq!(mixed, 1.0 / 3.0, epsilon = 1e-12);
        assert_eq!(path_anti_diversity(&[&a], &coords), None);
    }
}
