//! The actionability graph: training samples as nodes, directed weighted
//! edges for transitions that stay under the cost threshold and leave
//! every immutable feature untouched. Shortest-path machinery supplies
//! graph distances and sequential recourse paths.

use std::collections::BinaryHeap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use nalgebra::DVector;

use crate::classifier::MlpModel;
use crate::data::{Dataset, FeatureSchema};
use crate::error::{Error, Result};
use crate::par;

/// Where a node came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeOrigin {
    Train(usize),
    Input,
}

#[derive(Debug, Clone)]
pub struct GraphNode {
    pub coords: DVector<f64>,
    pub label: u8,
    pub origin: NodeOrigin,
}

/// Directed weighted graph over encoded training samples, plus optionally
/// one attached input node (out-edges only).
#[derive(Debug, Clone)]
pub struct ActionGraph {
    pub nodes: Vec<GraphNode>,
    /// Out-edges per node as `(target, weight)`.
    pub edges: Vec<Vec<(usize, f64)>>,
    pub epsilon: f64,
    /// Encoded coordinates that must match exactly across an edge.
    pub immutable_coords: Vec<usize>,
    input_node: Option<usize>,
}

/// Node/edge counts and the realized threshold, reported by the builder.
#[derive(Debug, Clone, Copy)]
pub struct BuildReport {
    pub nodes: usize,
    pub edges: usize,
    pub epsilon: f64,
}

impl ActionGraph {
    /// Assembles a graph from explicit parts; the input node, if any, is
    /// located by its origin marker.
    pub fn from_parts(
        nodes: Vec<GraphNode>,
        edges: Vec<Vec<(usize, f64)>>,
        epsilon: f64,
        immutable_coords: Vec<usize>,
    ) -> Result<Self> {
        if edges.len() != nodes.len() {
            return Err(Error::DimensionMismatch {
                expected: nodes.len(),
                got: edges.len(),
            });
        }
        for out in &edges {
            for &(v, w) in out {
                if v >= nodes.len() || w < 0.0 {
                    return Err(Error::InvalidParameter(
                        "edge endpoint out of range or negative weight".into(),
                    ));
                }
            }
        }
        let input_node = nodes.iter().position(|n| n.origin == NodeOrigin::Input);
        Ok(ActionGraph {
            nodes,
            edges,
            epsilon,
            immutable_coords,
            input_node,
        })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.iter().map(Vec::len).sum()
    }

    pub fn input_node(&self) -> Option<usize> {
        self.input_node
    }

    pub fn report(&self) -> BuildReport {
        BuildReport {
            nodes: self.len(),
            edges: self.edge_count(),
            epsilon: self.epsilon,
        }
    }

    fn immutables_match(&self, u: usize, v: usize) -> bool {
        self.immutable_coords
            .iter()
            .all(|&c| self.nodes[u].coords[c] == self.nodes[v].coords[c])
    }
}

/// The q-quantile (linear interpolation) of all pairwise distances in the
/// training set; the default source of the edge threshold.
pub fn pairwise_distance_quantile(train: &Dataset, q: f64) -> Result<f64> {
    let n = train.len();
    if n < 2 {
        return Err(Error::EmptyDataset(
            "need at least 2 samples for a distance quantile".into(),
        ));
    }
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::InvalidParameter(format!(
            "quantile must lie in [0,1], got {q}"
        )));
    }
    let mut dists: Vec<f64> = Vec::with_capacity(n * (n - 1) / 2);
    let rows = par::map_range(n, |i| {
        let xi = train.x.column(i);
        ((i + 1)..n)
            .map(|j| (train.x.column(j) - xi).norm())
            .collect::<Vec<f64>>()
    });
    for r in rows {
        dists.extend(r);
    }
    dists.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let pos = q * (dists.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    Ok(dists[lo] * (1.0 - frac) + dists[hi] * frac)
}

/// Builds the graph over all training samples: a directed edge `(u, v)`
/// exists iff the Euclidean distance is at most `epsilon` (inclusive) and
/// both endpoints agree exactly on every immutable coordinate. Each node
/// carries the classifier's predicted label.
pub fn build_graph(
    train: &Dataset,
    model: &MlpModel,
    schema: &FeatureSchema,
    epsilon: f64,
) -> Result<ActionGraph> {
    if epsilon <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "epsilon must be positive, got {epsilon}"
        )));
    }
    let n = train.len();
    let immutable_coords = schema.immutable_coords();
    let nodes: Vec<GraphNode> = (0..n)
        .map(|i| {
            let coords = train.instance(i);
            let label = model.predict_label(&coords)?;
            Ok(GraphNode {
                coords,
                label,
                origin: NodeOrigin::Train(i),
            })
        })
        .collect::<Result<_>>()?;

    let edges = {
        let nodes = &nodes;
        let immutable_coords = &immutable_coords;
        par::map_range(n, move |u| {
            let mut out = Vec::new();
            for v in 0..n {
                if u == v {
                    continue;
                }
                let matches = immutable_coords
                    .iter()
                    .all(|&c| nodes[u].coords[c] == nodes[v].coords[c]);
                if !matches {
                    continue;
                }
                let w = (&nodes[u].coords - &nodes[v].coords).norm();
                if w <= epsilon {
                    out.push((v, w));
                }
            }
            out
        })
    };
    Ok(ActionGraph {
        nodes,
        edges,
        epsilon,
        immutable_coords,
        input_node: None,
    })
}

/// Attaches the input instance as a node with out-edges only, to every
/// training node within `epsilon` that matches the input on all immutable
/// coordinates. Fails when no such node exists.
pub fn attach_input(graph: &ActionGraph, x0: &DVector<f64>, model: &MlpModel) -> Result<ActionGraph> {
    let mut out = graph.clone();
    if let Some(old) = out.input_node {
        // detach a previously attached input
        out.nodes.remove(old);
        out.edges.remove(old);
        out.input_node = None;
    }
    let label = model.predict_label(x0)?;
    let id = out.nodes.len();
    out.nodes.push(GraphNode {
        coords: x0.clone(),
        label,
        origin: NodeOrigin::Input,
    });
    let mut input_edges = Vec::new();
    for v in 0..id {
        if !out.immutables_match(id, v) {
            continue;
        }
        let w = (&out.nodes[id].coords - &out.nodes[v].coords).norm();
        if w <= out.epsilon {
            input_edges.push((v, w));
        }
    }
    if input_edges.is_empty() {
        return Err(Error::IsolatedInput);
    }
    out.edges.push(input_edges);
    out.input_node = Some(id);
    Ok(out)
}

/// Distances and predecessors from a single source.
#[derive(Debug, Clone)]
pub struct ShortestPaths {
    pub source: usize,
    /// `f64::INFINITY` for unreachable nodes.
    pub dist: Vec<f64>,
    pub predecessor: Vec<Option<usize>>,
}

#[derive(PartialEq)]
struct HeapEntry {
    dist: f64,
    node: usize,
}

impl Eq for HeapEntry {}

impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        // reversed for a min-heap; ties break on the smaller node id
        other
            .dist
            .partial_cmp(&self.dist)
            .unwrap()
            .then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

/// Dijkstra with a binary heap; deterministic because priority ties pop
/// the smaller node id and relaxations replace only on strict improvement.
pub fn shortest_paths(graph: &ActionGraph, source: usize) -> ShortestPaths {
    let n = graph.len();
    let mut dist = vec![f64::INFINITY; n];
    let mut predecessor = vec![None; n];
    let mut settled = vec![false; n];
    let mut heap = BinaryHeap::new();
    dist[source] = 0.0;
    heap.push(HeapEntry {
        dist: 0.0,
        node: source,
    });
    while let Some(HeapEntry { dist: d, node: u }) = heap.pop() {
        if settled[u] {
            continue;
        }
        settled[u] = true;
        for &(v, w) in &graph.edges[u] {
            let candidate = d + w;
            if !settled[v] && candidate < dist[v] {
                dist[v] = candidate;
                predecessor[v] = Some(u);
                heap.push(HeapEntry {
                    dist: candidate,
                    node: v,
                });
            }
        }
    }
    ShortestPaths {
        source,
        dist,
        predecessor,
    }
}

/// An actionable path: consecutive graph nodes from the source to a
/// target, with the summed edge weight.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphPath {
    pub nodes: Vec<usize>,
    pub weight: f64,
}

/// Reconstructs the path to `target` from a predecessor map; the path
/// weight must agree with the computed distance to within 1e-9.
pub fn extract_path(graph: &ActionGraph, sp: &ShortestPaths, target: usize) -> Result<GraphPath> {
    if !sp.dist[target].is_finite() {
        return Err(Error::UnreachableTarget(target));
    }
    let mut nodes = vec![target];
    let mut cur = target;
    while let Some(prev) = sp.predecessor[cur] {
        nodes.push(prev);
        cur = prev;
    }
    nodes.reverse();
    debug_assert_eq!(nodes[0], sp.source);
    let mut weight = 0.0;
    for pair in nodes.windows(2) {
        let w = graph.edges[pair[0]]
            .iter()
            .find(|(v, _)| *v == pair[1])
            .map(|(_, w)| *w)
            .expect("predecessor edges exist");
        weight += w;
    }
    if (weight - sp.dist[target]).abs() > 1e-9 {
        return Err(Error::PathWeightMismatch {
            path_weight: weight,
            dist: sp.dist[target],
        });
    }
    Ok(GraphPath {
        nodes,
        weight: sp.dist[target],
    })
}

/// Writes the graph as a line-oriented text file: a header, one node line
/// per node, one edge line per directed edge. Floats keep full round-trip
/// precision.
pub fn save_graph(graph: &ActionGraph, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut w = BufWriter::new(file);
    let io_err = |source: std::io::Error| Error::Io {
        path: path.display().to_string(),
        source,
    };
    writeln!(w, "actiongraph 1").map_err(io_err)?;
    writeln!(w, "epsilon {}", graph.epsilon).map_err(io_err)?;
    let imm: Vec<String> = graph.immutable_coords.iter().map(|c| c.to_string()).collect();
    writeln!(w, "immutables {}", imm.join(" ")).map_err(io_err)?;
    writeln!(w, "nodes {}", graph.len()).map_err(io_err)?;
    for node in &graph.nodes {
        let origin = match node.origin {
            NodeOrigin::Train(i) => i.to_string(),
            NodeOrigin::Input => "input".to_string(),
        };
        let coords: Vec<String> = node.coords.iter().map(|c| c.to_string()).collect();
        writeln!(w, "{} {} {}", origin, node.label, coords.join(" ")).map_err(io_err)?;
    }
    writeln!(w, "edges {}", graph.edge_count()).map_err(io_err)?;
    for (u, out) in graph.edges.iter().enumerate() {
        for &(v, weight) in out {
            writeln!(w, "{u} {v} {weight}").map_err(io_err)?;
        }
    }
    Ok(())
}

/// Reads a graph back; errors carry the 1-based line number.
pub fn load_graph(path: impl AsRef<Path>) -> Result<ActionGraph> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut lines = BufReader::new(file).lines().enumerate();
    let mut next_line = |expect: &str| -> Result<(usize, String)> {
        match lines.next() {
            Some((i, Ok(l))) => Ok((i + 1, l)),
            Some((i, Err(e))) => Err(Error::MalformedGraph {
                line: i + 1,
                reason: e.to_string(),
            }),
            None => Err(Error::MalformedGraph {
                line: 0,
                reason: format!("unexpected end of file, wanted {expect}"),
            }),
        }
    };
    let bad = |line: usize, reason: &str| Error::MalformedGraph {
        line,
        reason: reason.to_string(),
    };

    let (ln, header) = next_line("header")?;
    if header.trim() != "actiongraph 1" {
        return Err(bad(ln, "expected header `actiongraph 1`"));
    }
    let (ln, eps_line) = next_line("epsilon")?;
    let epsilon = eps_line
        .strip_prefix("epsilon ")
        .and_then(|s| s.trim().parse::<f64>().ok())
        .ok_or_else(|| bad(ln, "expected `epsilon <value>`"))?;
    let (ln, imm_line) = next_line("immutables")?;
    let imm_body = imm_line
        .strip_prefix("immutables")
        .ok_or_else(|| bad(ln, "expected `immutables ...`"))?;
    let immutable_coords: Vec<usize> = imm_body
        .split_whitespace()
        .map(|t| t.parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| bad(ln, "bad immutable coordinate index"))?;
    let (ln, nodes_line) = next_line("node count")?;
    let node_count = nodes_line
        .strip_prefix("nodes ")
        .and_then(|s| s.trim().parse::<usize>().ok())
        .ok_or_else(|| bad(ln, "expected `nodes <count>`"))?;

    let mut nodes = Vec::with_capacity(node_count);
    let mut input_node = None;
    for _ in 0..node_count {
        let (ln, line) = next_line("node line")?;
        let mut tokens = line.split_whitespace();
        let origin_tok = tokens.next().ok_or_else(|| bad(ln, "missing origin"))?;
        let origin = if origin_tok == "input" {
            input_node = Some(nodes.len());
            NodeOrigin::Input
        } else {
            NodeOrigin::Train(
                origin_tok
                    .parse::<usize>()
                    .map_err(|_| bad(ln, "bad origin index"))?,
            )
        };
        let label = tokens
            .next()
            .and_then(|t| t.parse::<u8>().ok())
            .filter(|l| *l <= 1)
            .ok_or_else(|| bad(ln, "bad label"))?;
        let coords: Vec<f64> = tokens
            .map(|t| t.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| bad(ln, "bad coordinate"))?;
        if coords.is_empty() {
            return Err(bad(ln, "node has no coordinates"));
        }
        nodes.push(GraphNode {
            coords: DVector::from_vec(coords),
            label,
            origin,
        });
    }

    let (ln, edges_line) = next_line("edge count")?;
    let edge_count = edges_line
        .strip_prefix("edges ")
        .and_then(|s| s.trim().parse::<usize>().ok())
        .ok_or_else(|| bad(ln, "expected `edges <count>`"))?;
    let mut edges = vec![Vec::new(); nodes.len()];
    for _ in 0..edge_count {
        let (ln, line) = next_line("edge line")?;
        let mut tokens = line.split_whitespace();
        let parse_usize = |t: Option<&str>| {
            t.and_then(|t| t.parse::<usize>().ok())
                .ok_or_else(|| bad(ln, "bad edge endpoint"))
        };
        let u = parse_usize(tokens.next())?;
        let v = parse_usize(tokens.next())?;
        let weight = tokens
            .next()
            .and_then(|t| t.parse::<f64>().ok())
            .ok_or_else(|| bad(ln, "bad edge weight"))?;
        if u >= nodes.len() || v >= nodes.len() {
            return Err(bad(ln, "edge endpoint out of range"));
        }
        edges[u].push((v, weight));
    }
    Ok(ActionGraph {
        nodes,
        edges,
        epsilon,
        immutable_coords,
        input_node,
    })
}
