//! Turns selected prototypes into recourses: linear boundary interpolation
//! or graph shortest-path sequential recourse, plus the select-then-
//! interpolate pipelines that tie the selectors together.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::classifier::MlpModel;
use crate::data::Dataset;
use crate::dpp;
use crate::error::{Error, Result};
use crate::geometry::{
    directions, eigenbasis_from_directions, DirectionMatrix, DistanceKind, DistanceVector,
    SimilaritySource,
};
use crate::graph::{attach_input, extract_path, shortest_paths, ActionGraph, GraphPath, NodeOrigin};
use crate::quad;
use crate::selection::Selection;

/// The prototype selection strategies exposed by the pipelines.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Selector {
    DppGreedy,
    DppLocalSearch,
    QuadBestResponse,
    QuadDualAscent,
    QuadGreedy,
    QuadLocalSearch,
    Exact,
}

impl Selector {
    pub const ALL: [Selector; 7] = [
        Selector::DppGreedy,
        Selector::DppLocalSearch,
        Selector::QuadBestResponse,
        Selector::QuadDualAscent,
        Selector::QuadGreedy,
        Selector::QuadLocalSearch,
        Selector::Exact,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Selector::DppGreedy => "dpp-greedy",
            Selector::DppLocalSearch => "dpp-ls",
            Selector::QuadBestResponse => "quad-br",
            Selector::QuadDualAscent => "quad-da",
            Selector::QuadGreedy => "quad-greedy",
            Selector::QuadLocalSearch => "quad-ls",
            Selector::Exact => "exact",
        }
    }

    pub fn parse(name: &str) -> Option<Selector> {
        Selector::ALL.iter().copied().find(|s| s.name() == name)
    }
}

/// Shared selector knobs; the weight doubles as theta for the DPP kernel
/// and vartheta for the quadratic objective.
#[derive(Debug, Clone)]
pub struct SelectorParams {
    pub k: usize,
    pub weight: f64,
    pub bandwidth: f64,
    /// Truncation rank M; `None` means `min(p, 20)` before the numerical
    /// rank cap.
    pub rank: Option<usize>,
    pub iterations: usize,
    pub window: usize,
    pub step: f64,
}

impl Default for SelectorParams {
    fn default() -> Self {
        SelectorParams {
            k: 3,
            weight: 0.9,
            bandwidth: 1.0,
            rank: None,
            iterations: 50,
            window: 10,
            step: 0.1,
        }
    }
}

/// Runs a selector over candidate direction/distance data. The returned
/// indices address the direction-matrix columns.
pub fn select_prototypes(
    dir: &DirectionMatrix,
    d: &DistanceVector,
    selector: Selector,
    params: &SelectorParams,
) -> Result<Selection> {
    let n = dir.ncols();
    let k = params.k;
    if n < k {
        return Err(Error::TooFewCandidates { need: k, got: n });
    }
    let sim = SimilaritySource::Directions(dir.matrix().clone());
    let selection = match selector {
        Selector::DppGreedy | Selector::DppLocalSearch => {
            let diag = dpp::locality_diag(d, params.bandwidth)?;
            let kernel = dpp::DppKernel::new(sim, diag, params.weight)?;
            let greedy = dpp::greedy_map(&kernel, k);
            if greedy.len() < k {
                return Err(Error::CardinalityViolation {
                    expected: k,
                    got: greedy.len(),
                });
            }
            if selector == Selector::DppLocalSearch {
                dpp::local_search(&kernel, k, &greedy)?
            } else {
                greedy
            }
        }
        Selector::QuadBestResponse | Selector::QuadDualAscent => {
            if params.weight == 0.0 {
                quad::k_nearest(&d.values, k)
            } else {
                let problem = quad::QuadProblem::new(sim, d.values.clone(), params.weight, k)?;
                let p = dir.matrix().nrows();
                let m = params.rank.unwrap_or_else(|| p.min(20)).clamp(1, n);
                let basis = eigenbasis_from_directions(dir.matrix(), m)?;
                let t = params.iterations.max(1);
                let trace = match selector {
                    Selector::QuadBestResponse => quad::best_response(&problem, &basis, t)?,
                    _ => quad::dual_ascent(&problem, &basis, t, params.step)?,
                };
                let tau = params.window.min(t - 1);
                let screened = quad::screen(&trace, tau, k)?;
                // keep the best iterate reachable in the reduced solve
                let support = Selection::new(screened.indices)
                    .union(&trace.best_iterate().selection);
                quad::solve_reduced(&problem, support.indices())?
            }
        }
        Selector::QuadGreedy => {
            let problem = quad::QuadProblem::new(sim, d.values.clone(), params.weight, k)?;
            quad::greedy(&problem)?
        }
        Selector::QuadLocalSearch => {
            let problem = quad::QuadProblem::new(sim, d.values.clone(), params.weight, k)?;
            quad::local_search(&problem)?
        }
        Selector::Exact => {
            if params.weight == 0.0 {
                quad::k_nearest(&d.values, k)
            } else {
                let problem = quad::QuadProblem::new(sim, d.values.clone(), params.weight, k)?;
                let all: Vec<usize> = (0..n).collect();
                quad::solve_reduced(&problem, &all)?
            }
        }
    };
    if selection.len() != k {
        return Err(Error::CardinalityViolation {
            expected: k,
            got: selection.len(),
        });
    }
    Ok(selection)
}

/// One recourse of a plan.
#[derive(Debug, Clone)]
pub struct PlanEntry {
    /// Index of the prototype in the candidate dataset (training index).
    pub prototype_index: usize,
    pub prototype: DVector<f64>,
    pub recourse: DVector<f64>,
    /// Interpolation coefficient, linear mode only.
    pub lambda: Option<f64>,
    /// Shortest path from the input, graph mode only.
    pub path: Option<GraphPath>,
}

/// A set of K recourses for one input.
#[derive(Debug, Clone)]
pub struct RecoursePlan {
    pub x0: DVector<f64>,
    pub entries: Vec<PlanEntry>,
    pub method: String,
}

impl RecoursePlan {
    pub fn k(&self) -> usize {
        self.entries.len()
    }

    pub fn to_record(&self) -> PlanRecord {
        PlanRecord {
            method: self.method.clone(),
            x0: self.x0.iter().copied().collect(),
            entries: self
                .entries
                .iter()
                .map(|e| PlanEntryRecord {
                    prototype_index: e.prototype_index,
                    prototype: e.prototype.iter().copied().collect(),
                    recourse: e.recourse.iter().copied().collect(),
                    lambda: e.lambda,
                    path_nodes: e.path.as_ref().map(|p| p.nodes.clone()),
                    path_weight: e.path.as_ref().map(|p| p.weight),
                })
                .collect(),
        }
    }

    pub fn from_record(record: &PlanRecord) -> Result<RecoursePlan> {
        let entries = record
            .entries
            .iter()
            .map(|e| {
                let path = match (&e.path_nodes, e.path_weight) {
                    (Some(nodes), Some(weight)) => Some(GraphPath {
                        nodes: nodes.clone(),
                        weight,
                    }),
                    (None, None) => None,
                    _ => {
                        return Err(Error::MalformedPlan(
                            "path nodes and weight must appear together".into(),
                        ))
                    }
                };
                Ok(PlanEntry {
                    prototype_index: e.prototype_index,
                    prototype: DVector::from_vec(e.prototype.clone()),
                    recourse: DVector::from_vec(e.recourse.clone()),
                    lambda: e.lambda,
                    path,
                })
            })
            .collect::<Result<_>>()?;
        Ok(RecoursePlan {
            x0: DVector::from_vec(record.x0.clone()),
            entries,
            method: record.method.clone(),
        })
    }
}

/// Serializable plan record: method, input, and per-entry prototype index,
/// recourse coordinates, and lambda or path node ids.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PlanRecord {
    pub method: String,
    pub x0: Vec<f64>,
    pub entries: Vec<PlanEntryRecord>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PlanEntryRecord {
    pub prototype_index: usize,
    pub prototype: Vec<f64>,
    pub recourse: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub lambda: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub path_nodes: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub path_weight: Option<f64>,
}

/// Knobs of the boundary search along a segment.
#[derive(Debug, Clone, Copy)]
pub struct LinearParams {
    pub grid: usize,
    pub tol: f64,
}

impl Default for LinearParams {
    fn default() -> Self {
        LinearParams {
            grid: 100,
            tol: 1e-6,
        }
    }
}

/// Finds the earliest favorably-labeled point on the segment from `x0` to
/// a prototype: scan a uniform grid over (0, 1], take the first positive
/// cell, then bisect down to `tol` and return the label-1 endpoint. Falls
/// back to the prototype itself when the whole open segment stays
/// unfavorable.
pub fn linear_recourse(
    x0: &DVector<f64>,
    prototype: &DVector<f64>,
    model: &MlpModel,
    grid: usize,
    tol: f64,
) -> Result<(DVector<f64>, f64)> {
    if model.predict_label(prototype)? != 1 {
        return Err(Error::InvalidPrototype);
    }
    if grid == 0 || tol <= 0.0 {
        return Err(Error::InvalidParameter(
            "grid must be positive and tol > 0".into(),
        ));
    }
    let point = |lambda: f64| -> DVector<f64> { x0 + lambda * (prototype - x0) };
    let mut first_positive = None;
    for i in 1..=grid {
        let lambda = i as f64 / grid as f64;
        if model.predict_label(&point(lambda))? == 1 {
            first_positive = Some(i);
            break;
        }
    }
    let Some(i) = first_positive else {
        // rounding kept even the endpoint unfavorable: hand out the
        // prototype itself
        return Ok((prototype.clone(), 1.0));
    };
    let mut hi = i as f64 / grid as f64;
    let mut lo = (i - 1) as f64 / grid as f64;
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if model.predict_label(&point(mid))? == 1 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok((point(hi), hi))
}

/// Full linear pipeline: gather favorably-predicted candidates, build the
/// per-input geometry, select K prototypes, and interpolate to each one.
/// Every recourse in the result carries the favorable label.
pub fn plan_linear(
    x0: &DVector<f64>,
    train: &Dataset,
    model: &MlpModel,
    selector: Selector,
    params: &SelectorParams,
    lin: &LinearParams,
) -> Result<RecoursePlan> {
    if model.predict_label(x0)? == 1 {
        return Err(Error::InputAlreadyFavorable);
    }
    let labels = crate::par::map_range(train.len(), |i| {
        model
            .predict_label(&train.instance(i))
            .expect("training data matches the model dimension")
    });
    let candidate_ids: Vec<usize> = (0..train.len()).filter(|&i| labels[i] == 1).collect();
    if candidate_ids.len() < params.k {
        return Err(Error::TooFewCandidates {
            need: params.k,
            got: candidate_ids.len(),
        });
    }
    let p = train.x.nrows();
    let mut candidates = DMatrix::zeros(p, candidate_ids.len());
    for (c, &i) in candidate_ids.iter().enumerate() {
        candidates.set_column(c, &train.x.column(i));
    }
    let dir = directions(x0, &candidates);
    if dir.ncols() < params.k {
        return Err(Error::TooFewCandidates {
            need: params.k,
            got: dir.ncols(),
        });
    }
    let d = DistanceVector {
        values: dir
            .kept()
            .iter()
            .map(|&c| (candidates.column(c) - x0).norm())
            .collect(),
        kind: DistanceKind::Euclidean,
    };
    let selection = select_prototypes(&dir, &d, selector, params)?;
    let mut entries = Vec::with_capacity(selection.len());
    for &col in selection.indices() {
        let candidate_col = dir.kept()[col];
        let prototype = candidates.column(candidate_col).into_owned();
        let (recourse, lambda) = linear_recourse(x0, &prototype, model, lin.grid, lin.tol)?;
        entries.push(PlanEntry {
            prototype_index: candidate_ids[candidate_col],
            prototype,
            recourse,
            lambda: Some(lambda),
            path: None,
        });
    }
    Ok(RecoursePlan {
        x0: x0.clone(),
        entries,
        method: selector.name().to_string(),
    })
}

/// Full graph pipeline: attach the input, run single-source shortest
/// paths, select among reachable favorably-predicted nodes with graph
/// distances and feature-space direction cosines, and return each
/// prototype with its path. The recourse of an entry is the prototype
/// node itself.
pub fn plan_graph(
    x0: &DVector<f64>,
    graph: &ActionGraph,
    model: &MlpModel,
    selector: Selector,
    params: &SelectorParams,
) -> Result<RecoursePlan> {
    if model.predict_label(x0)? == 1 {
        return Err(Error::InputAlreadyFavorable);
    }
    let attached = attach_input(graph, x0, model)?;
    let source = attached.input_node().expect("input was just attached");
    let sp = shortest_paths(&attached, source);

    let mut node_ids = Vec::new();
    for (v, node) in attached.nodes.iter().enumerate() {
        if v == source || node.label != 1 || !sp.dist[v].is_finite() {
            continue;
        }
        node_ids.push(v);
    }
    if node_ids.len() < params.k {
        return Err(Error::TooFewCandidates {
            need: params.k,
            got: node_ids.len(),
        });
    }
    let p = x0.len();
    let mut coords = DMatrix::zeros(p, node_ids.len());
    for (c, &v) in node_ids.iter().enumerate() {
        coords.set_column(c, &attached.nodes[v].coords);
    }
    let dir = directions(x0, &coords);
    if dir.ncols() < params.k {
        return Err(Error::TooFewCandidates {
            need: params.k,
            got: dir.ncols(),
        });
    }
    let d = DistanceVector {
        values: dir.kept().iter().map(|&c| sp.dist[node_ids[c]]).collect(),
        kind: DistanceKind::GraphShortestPath,
    };
    let selection = select_prototypes(&dir, &d, selector, params)?;
    let mut entries = Vec::with_capacity(selection.len());
    for &col in selection.indices() {
        let node_id = node_ids[dir.kept()[col]];
        let path = extract_path(&attached, &sp, node_id)?;
        let prototype = attached.nodes[node_id].coords.clone();
        let prototype_index = match attached.nodes[node_id].origin {
            NodeOrigin::Train(i) => i,
            NodeOrigin::Input => unreachable!("input is never a candidate"),
        };
        entries.push(PlanEntry {
            prototype_index,
            prototype: prototype.clone(),
            recourse: prototype,
            lambda: None,
            path: Some(path),
        });
    }
    Ok(RecoursePlan {
        x0: x0.clone(),
        entries,
        method: selector.name().to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifier::Layer;
    use crate::data::Provenance;
    use crate::graph::build_graph;
    use crate::data::synth_schema;
    use approx::assert_relative_eq;

    /// label 1 iff x1 >= boundary
    fn boundary_model(p: usize, boundary: f64) -> MlpModel {
        let mut w = vec![0.0; p];
        w[0] = 1.0;
        MlpModel {
            layer_dims: vec![p, 1],
            layers: vec![Layer {
                weights: vec![w],
                biases: vec![-boundary],
            }],
        }
    }

    fn toy_dataset(cols: &[&[f64]], y: &[u8]) -> Dataset {
        let p = cols[0].len();
        let mut x = DMatrix::zeros(p, cols.len());
        for (i, c) in cols.iter().enumerate() {
            x.set_column(i, &DVector::from_vec(c.to_vec()));
        }
        Dataset {
            x,
            y: y.to_vec(),
            provenance: Provenance::Synthetic,
        }
    }

    #[test]
    fn boundary_bisection_hits_half() {
        let model = boundary_model(2, 0.5);
        let x0 = DVector::from_vec(vec![0.0, 0.0]);
        let proto = DVector::from_vec(vec![1.0, 0.0]);
        let (recourse, lambda) = linear_recourse(&x0, &proto, &model, 100, 1e-6).unwrap();
        assert!((lambda - 0.5).abs() <= 1e-6);
        assert_eq!(model.predict_label(&recourse).unwrap(), 1);
        assert_relative_eq!(recourse[0], lambda, epsilon = 1e-15);
        assert_eq!(recourse[1], 0.0);
    }

    #[test]
    fn unfavorable_open_segment_falls_back_to_prototype() {
        // positive region starts within 1e-9 of the prototype: every grid
        // and bisection probe on the open segment stays unfavorable
        let model = boundary_model(2, 1.0 - 1e-9);
        let x0 = DVector::from_vec(vec![0.0, 0.0]);
        let proto = DVector::from_vec(vec![1.0, 0.0]);
        let (recourse, lambda) = linear_recourse(&x0, &proto, &model, 100, 1e-6).unwrap();
        assert_eq!(lambda, 1.0);
        assert_eq!(recourse, proto);
        assert_eq!(model.predict_label(&recourse).unwrap(), 1);
    }

    #[test]
    fn invalid_prototype_is_rejected() {
        let model = boundary_model(2, 0.5);
        let x0 = DVector::from_vec(vec![0.0, 0.0]);
        let bad = DVector::from_vec(vec![0.1, 0.0]);
        assert!(matches!(
            linear_recourse(&x0, &bad, &model, 100, 1e-6),
            Err(Error::InvalidPrototype)
        ));
    }

    #[test]
    fn recourse_never_farther_than_prototype() {
        let model = boundary_model(3, 0.3);
        let x0 = DVector::from_vec(vec![0.0, 0.2, -0.4]);
        for t in 0..20 {
            let proto = DVector::from_vec(vec![
                0.31 + 0.1 * t as f64,
                -0.5 + 0.05 * t as f64,
                0.1 * t as f64,
            ]);
            let (recourse, lambda) = linear_recourse(&x0, &proto, &model, 100, 1e-6).unwrap();
            assert!((&recourse - &x0).norm() <= (&proto - &x0).norm() + 1e-12);
            assert!(lambda > 0.0 && lambda <= 1.0);
        }
    }

    #[test]
    fn lambda_shrinks_with_tighter_tolerance() {
        let model = boundary_model(2, 0.737);
        let x0 = DVector::from_vec(vec![0.0, 0.0]);
        let proto = DVector::from_vec(vec![1.0, 0.0]);
        let (_, coarse) = linear_recourse(&x0, &proto, &model, 100, 1e-2).unwrap();
        let (_, fine) = linear_recourse(&x0, &proto, &model, 100, 1e-8).unwrap();
        assert!(fine <= coarse);
        assert!(coarse - fine <= 1e-2);
    }

    #[test]
    fn plan_linear_theta_zero_takes_nearest_positives() {
        // positives at x1 >= 0.5; x0 at the origin
        let train = toy_dataset(
            &[
                &[0.6, 0.0],
                &[0.7, 0.5],
                &[0.9, 0.9],
                &[0.55, -0.2],
                &[0.1, 0.1],
            ],
            &[1, 1, 1, 1, 0],
        );
        let model = boundary_model(2, 0.5);
        let x0 = DVector::from_vec(vec![0.0, 0.0]);
        let params = SelectorParams {
            k: 2,
            weight: 0.0,
            ..SelectorParams::default()
        };
        for selector in Selector::ALL {
            let plan = plan_linear(&x0, &train, &model, selector, &params, &LinearParams::default())
                .unwrap();
            let mut ids: Vec<usize> = plan.entries.iter().map(|e| e.prototype_index).collect();
            ids.sort_unstable();
            // nearest positives are train indices 3 (0.585) and 0 (0.6)
            assert_eq!(ids, vec![0, 3], "selector {}", selector.name());
            for e in &plan.entries {
                assert_eq!(model.predict_label(&e.recourse).unwrap(), 1);
            }
        }
    }

    #[test]
    fn plan_linear_k1_stays_on_segment() {
        let train = toy_dataset(&[&[0.8, 0.3], &[0.2, 0.0]], &[1, 0]);
        let model = boundary_model(2, 0.5);
        let x0 = DVector::from_vec(vec![0.0, 0.0]);
        let params = SelectorParams {
            k: 1,
            ..SelectorParams::default()
        };
        let plan = plan_linear(
            &x0,
            &train,
            &model,
            Selector::DppGreedy,
            &params,
            &LinearParams::default(),
        )
        .unwrap();
        assert_eq!(plan.k(), 1);
        let e = &plan.entries[0];
        let lambda = e.lambda.unwrap();
        let expect = &x0 + lambda * (&e.prototype - &x0);
        assert_relative_eq!((expect - &e.recourse).norm(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn plan_linear_rejects_favorable_input_and_tiny_candidate_pools() {
        let train = toy_dataset(&[&[0.8, 0.3], &[0.2, 0.0]], &[1, 0]);
        let model = boundary_model(2, 0.5);
        let favorable = DVector::from_vec(vec![0.9, 0.0]);
        assert!(matches!(
            plan_linear(
                &favorable,
                &train,
                &model,
                Selector::DppGreedy,
                &SelectorParams::default(),
                &LinearParams::default()
            ),
            Err(Error::InputAlreadyFavorable)
        ));
        let x0 = DVector::from_vec(vec![0.0, 0.0]);
        assert!(matches!(
            plan_linear(
                &x0,
                &train,
                &model,
                Selector::DppGreedy,
                &SelectorParams::default(), // k = 3 > 1 positive
                &LinearParams::default()
            ),
            Err(Error::TooFewCandidates { .. })
        ));
    }

    #[test]
    fn plan_graph_single_reachable_positive() {
        // one positive within reach, one beyond epsilon
        let train = toy_dataset(&[&[0.55, 0.0], &[0.9, 0.9], &[0.05, 0.0]], &[1, 1, 0]);
        let model = boundary_model(2, 0.5);
        let graph = build_graph(&train, &model, &synth_schema(), 0.6).unwrap();
        let x0 = DVector::from_vec(vec![0.0, 0.0]);
        let params = SelectorParams {
            k: 1,
            ..SelectorParams::default()
        };
        let plan = plan_graph(&x0, &graph, &model, Selector::DppGreedy, &params).unwrap();
        assert_eq!(plan.k(), 1);
        let e = &plan.entries[0];
        assert_eq!(e.prototype_index, 0);
        assert_eq!(e.recourse, e.prototype);
        let path = e.path.as_ref().unwrap();
        assert_eq!(*path.nodes.last().unwrap(), 0);
        assert!(path.weight > 0.0);
    }

    #[test]
    fn plan_graph_paths_connect_input_to_prototypes() {
        let train = toy_dataset(
            &[
                &[0.55, 0.0],
                &[0.6, 0.45],
                &[0.62, -0.4],
                &[0.3, 0.0],
                &[0.1, 0.2],
            ],
            &[1, 1, 1, 0, 0],
        );
        let model = boundary_model(2, 0.5);
        let graph = build_graph(&train, &model, &synth_schema(), 0.65).unwrap();
        let x0 = DVector::from_vec(vec![0.0, 0.0]);
        let params = SelectorParams {
            k: 3,
            weight: 0.5,
            ..SelectorParams::default()
        };
        let plan = plan_graph(&x0, &graph, &model, Selector::QuadBestResponse, &params).unwrap();
        assert_eq!(plan.k(), 3);
        let attached = attach_input(&graph, &x0, &model).unwrap();
        let source = attached.input_node().unwrap();
        let sp = shortest_paths(&attached, source);
        for e in &plan.entries {
            let path = e.path.as_ref().unwrap();
            assert_eq!(path.nodes[0], source);
            // the path ends on the prototype's node
            let last = *path.nodes.last().unwrap();
            assert_eq!(attached.nodes[last].coords, e.prototype);
            // selection distance agrees with the path weight
            assert!((sp.dist[last] - path.weight).abs() <= 1e-9);
            assert_eq!(model.predict_label(&e.recourse).unwrap(), 1);
        }
    }

    #[test]
    fn plan_graph_fails_without_enough_reachable_positives() {
        let train = toy_dataset(&[&[0.55, 0.0], &[5.0, 5.0]], &[1, 1]);
        let model = boundary_model(2, 0.5);
        let graph = build_graph(&train, &model, &synth_schema(), 0.6).unwrap();
        let x0 = DVector::from_vec(vec![0.0, 0.0]);
        let params = SelectorParams {
            k: 2,
            ..SelectorParams::default()
        };
        match plan_graph(&x0, &graph, &model, Selector::DppGreedy, &params) {
            Err(Error::TooFewCandidates { need, got }) => {
                assert_eq!((need, got), (2, 1));
            }
            other => panic!("expected too-few-candidates, got {other:?}"),
        }
    }

    #[test]
    fn plan_record_round_trip() {
        let plan = RecoursePlan {
            x0: DVector::from_vec(vec![0.25, 0.5]),
            entries: vec![PlanEntry {
                prototype_index: 7,
                prototype: DVector::from_vec(vec![1.0, 0.0]),
                recourse: DVector::from_vec(vec![0.5, 0.25]),
                lambda: Some(0.5),
                path: None,
            }],
            method: "dpp-greedy".into(),
        };
        let json = serde_json::to_string(&plan.to_record()).unwrap();
        let record: PlanRecord = serde_json::from_str(&json).unwrap();
        let back = RecoursePlan::from_record(&record).unwrap();
        assert_eq!(back.x0, plan.x0);
        assert_eq!(back.entries[0].prototype_index, 7);
        assert_eq!(back.entries[0].lambda, Some(0.5));
        assert_eq!(back.method, "dpp-greedy");
    }
}
