//! Weighted graphs, their directed doubles, and the weight-driven
//! structure classification.
//!
//! A [`WeightedGraph`] is a finite connected undirected multigraph with a
//! strictly positive weight on each vertex; self-loops and parallel edges
//! are allowed. Its [`DirectedDouble`] replaces every non-loop edge by an
//! opposite pair of oriented edges and every self-loop by a single
//! orientation-fixed edge, and attaches the amplitude
//! `a = (mu(source)/mu(target))^(1/4)` to each oriented edge.
//!
//! Classification compares each vertex weight against the
//! multiplicity-weighted sum of its neighbors' weights, in exact rational
//! arithmetic, so set membership is never a floating-point coin flip.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use num_rational::BigRational;
use num_traits::{Signed, Zero};
use thiserror::Error;

use crate::rational::{format_rational, parse_rational, to_f64};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VertexId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EdgeId(pub usize);

/// Index into [`DirectedDouble::oriented`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct OrientedEdgeId(pub usize);

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("graph has no vertices")]
    Empty,
    #[error("duplicate vertex id `{0}`")]
    DuplicateVertex(String),
    #[error("duplicate edge id `{0}`")]
    DuplicateEdge(String),
    #[error("edge `{edge}` references unknown vertex `{vertex}`")]
    UnknownEndpoint { edge: String, vertex: String },
    #[error("vertex `{0}` has non-positive weight {1}")]
    NonPositiveWeight(String, String),
    #[error("graph is not connected")]
    Disconnected,
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("unknown vertex `{0}`")]
    UnknownVertex(String),
    #[error("unknown edge `{0}`")]
    UnknownEdge(String),
    #[error("structure report requires at least two edges, graph has {0}")]
    EdgeCount(usize),
    #[error("coefficient on vertex `{0}`, which is not in the K0 basis")]
    NotInK0Basis(String),
}

#[derive(Debug, Clone)]
struct Vertex {
    name: String,
    weight: BigRational,
}

#[derive(Debug, Clone)]
struct Edge {
    name: String,
    ends: (VertexId, VertexId),
}

/// Finite connected weighted undirected multigraph.
#[derive(Debug, Clone)]
pub struct WeightedGraph {
    vertices: Vec<Vertex>,
    edges: Vec<Edge>,
    vertex_index: HashMap<String, VertexId>,
    edge_index: HashMap<String, EdgeId>,
}

impl WeightedGraph {
    /// Build a graph from `(name, weight)` vertices and
    /// `(name, endpoint, endpoint)` edges, validating every invariant.
    pub fn new(
        vertices: Vec<(String, BigRational)>,
        edges: Vec<(String, String, String)>,
    ) -> Result<Self, GraphError> {
        if vertices.is_empty() {
            return Err(GraphError::Empty);
        }
        let mut g = WeightedGraph {
            vertices: Vec::new(),
            edges: Vec::new(),
            vertex_index: HashMap::new(),
            edge_index: HashMap::new(),
        };
        for (name, weight) in vertices {
            if g.vertex_index.contains_key(&name) {
                return Err(GraphError::DuplicateVertex(name));
            }
            if !weight.is_positive() {
                return Err(GraphError::NonPositiveWeight(
                    name,
                    format_rational(&weight),
                ));
            }
            g.vertex_index
                .insert(name.clone(), VertexId(g.vertices.len()));
            g.vertices.push(Vertex { name, weight });
        }
        for (name, a, b) in edges {
            if g.edge_index.contains_key(&name) {
                return Err(GraphError::DuplicateEdge(name));
            }
            let va = *g
                .vertex_index
                .get(&a)
                .ok_or_else(|| GraphError::UnknownEndpoint {
                    edge: name.clone(),
                    vertex: a.clone(),
                })?;
            let vb = *g
                .vertex_index
                .get(&b)
                .ok_or_else(|| GraphError::UnknownEndpoint {
                    edge: name.clone(),
                    vertex: b.clone(),
                })?;
            g.edge_index.insert(name.clone(), EdgeId(g.edges.len()));
            g.edges.push(Edge {
                name,
                ends: (va, vb),
            });
        }
        g.check_connected()?;
        Ok(g)
    }

    /// Parse the line-oriented graph format:
    /// `vertex <id> <weight>`, `edge <id> <v1> <v2>`, `#` comments.
    /// Weights are rationals (`p/q`) or decimals, converted exactly.
    pub fn parse_str(text: &str) -> Result<Self, GraphError> {
        let mut vertices = Vec::new();
        let mut edges = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = match raw.find('#') {
                Some(pos) => &raw[..pos],
                None => raw,
            };
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.is_empty() {
                continue;
            }
            match fields[0] {
                "vertex" => {
                    if fields.len() != 3 {
                        return Err(GraphError::Parse {
                            line: line_no,
                            msg: format!("expected `vertex <id> <weight>`, got `{}`", line.trim()),
                        });
                    }
                    let w = parse_rational(fields[2]).map_err(|msg| GraphError::Parse {
                        line: line_no,
                        msg,
                    })?;
                    vertices.push((fields[1].to_string(), w));
                }
                "edge" => {
                    if fields.len() != 4 {
                        return Err(GraphError::Parse {
                            line: line_no,
                            msg: format!("expected `edge <id> <v1> <v2>`, got `{}`", line.trim()),
                        });
                    }
                    edges.push((
                        fields[1].to_string(),
                        fields[2].to_string(),
                        fields[3].to_string(),
                    ));
                }
                other => {
                    return Err(GraphError::Parse {
                        line: line_no,
                        msg: format!("unknown directive `{other}`"),
                    });
                }
            }
        }
        WeightedGraph::new(vertices, edges)
    }

    fn check_connected(&self) -> Result<(), GraphError> {
        let n = self.vertices.len();
        let mut adj = vec![Vec::new(); n];
        for e in &self.edges {
            adj[e.ends.0 .0].push(e.ends.1 .0);
            adj[e.ends.1 .0].push(e.ends.0 .0);
        }
        let mut seen = vec![false; n];
        let mut stack = vec![0usize];
        seen[0] = true;
        while let Some(v) = stack.pop() {
            for &w in &adj[v] {
                if !seen[w] {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
        if seen.iter().all(|&s| s) {
            Ok(())
        } else {
            Err(GraphError::Disconnected)
        }
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn vertex_ids(&self) -> impl Iterator<Item = VertexId> {
        (0..self.vertices.len()).map(VertexId)
    }

    pub fn edge_ids(&self) -> impl Iterator<Item = EdgeId> {
        (0..self.edges.len()).map(EdgeId)
    }

    pub fn weight(&self, v: VertexId) -> &BigRational {
        &self.vertices[v.0].weight
    }

    pub fn weight_f64(&self, v: VertexId) -> f64 {
        to_f64(&self.vertices[v.0].weight)
    }

    pub fn vertex_name(&self, v: VertexId) -> &str {
        &self.vertices[v.0].name
    }

    pub fn edge_name(&self, e: EdgeId) -> &str {
        &self.edges[e.0].name
    }

    pub fn edge_ends(&self, e: EdgeId) -> (VertexId, VertexId) {
        self.edges[e.0].ends
    }

    pub fn is_loop(&self, e: EdgeId) -> bool {
        let (a, b) = self.edges[e.0].ends;
        a == b
    }

    pub fn vertex_by_name(&self, name: &str) -> Result<VertexId, GraphError> {
        self.vertex_index
            .get(name)
            .copied()
            .ok_or_else(|| GraphError::UnknownVertex(name.to_string()))
    }

    pub fn edge_by_name(&self, name: &str) -> Result<EdgeId, GraphError> {
        self.edge_index
            .get(name)
            .copied()
            .ok_or_else(|| GraphError::UnknownEdge(name.to_string()))
    }

    /// Same graph with every weight scaled by `c > 0`.
    pub fn scale_weights(&self, c: &BigRational) -> Result<Self, GraphError> {
        WeightedGraph::new(
            self.vertices
                .iter()
                .map(|v| (v.name.clone(), &v.weight * c))
                .collect(),
            self.edges
                .iter()
                .map(|e| {
                    (
                        e.name.clone(),
                        self.vertex_name(e.ends.0).to_string(),
                        self.vertex_name(e.ends.1).to_string(),
                    )
                })
                .collect(),
        )
    }

    /// Number of unoriented edges with endpoint set `{a, b}`.
    /// A self-loop at `a` counts once toward `(a, a)`.
    pub fn edge_multiplicity(&self, a: VertexId, b: VertexId) -> usize {
        self.edges
            .iter()
            .filter(|e| e.ends == (a, b) || e.ends == (b, a))
            .count()
    }
}

#[derive(Debug, Clone)]
pub struct OrientedEdge {
    pub source: VertexId,
    pub target: VertexId,
    pub op: OrientedEdgeId,
    pub parent: EdgeId,
    /// `(mu(source)/mu(target))^(1/4)`; reciprocal of the opposite edge's
    /// amplitude, and exactly 1 on self-loops.
    pub amplitude: f64,
}

/// The directed double: one oriented pair per non-loop edge, one fixed
/// point of the opposition involution per self-loop.
#[derive(Debug, Clone)]
pub struct DirectedDouble {
    graph: WeightedGraph,
    oriented: Vec<OrientedEdge>,
    outgoing: Vec<Vec<OrientedEdgeId>>,
    by_edge: Vec<(OrientedEdgeId, Option<OrientedEdgeId>)>,
}

/// Every oriented edge gets the parent edge's name plus an orientation
/// sign: `+` runs from the first listed endpoint to the second, `-` the
/// other way. Self-loops have only `+`.
pub fn build_directed_double(g: &WeightedGraph) -> DirectedDouble {
    let mut oriented = Vec::new();
    let mut outgoing = vec![Vec::new(); g.vertex_count()];
    let mut by_edge = Vec::new();
    for e in g.edge_ids() {
        let (a, b) = g.edge_ends(e);
        if a == b {
            let id = OrientedEdgeId(oriented.len());
            oriented.push(OrientedEdge {
                source: a,
                target: a,
                op: id,
                parent: e,
                amplitude: 1.0,
            });
            outgoing[a.0].push(id);
            by_edge.push((id, None));
        } else {
            let fwd = OrientedEdgeId(oriented.len());
            let bwd = OrientedEdgeId(oriented.len() + 1);
            let ratio = to_f64(g.weight(a)) / to_f64(g.weight(b));
            let amp = ratio.powf(0.25);
            oriented.push(OrientedEdge {
                source: a,
                target: b,
                op: bwd,
                parent: e,
                amplitude: amp,
            });
            oriented.push(OrientedEdge {
                source: b,
                target: a,
                op: fwd,
                parent: e,
                amplitude: 1.0 / amp,
            });
            outgoing[a.0].push(fwd);
            outgoing[b.0].push(bwd);
            by_edge.push((fwd, Some(bwd)));
        }
    }
    DirectedDouble {
        graph: g.clone(),
        oriented,
        outgoing,
        by_edge,
    }
}

impl DirectedDouble {
    pub fn graph(&self) -> &WeightedGraph {
        &self.graph
    }

    pub fn oriented_count(&self) -> usize {
        self.oriented.len()
    }

    pub fn oriented_ids(&self) -> impl Iterator<Item = OrientedEdgeId> {
        (0..self.oriented.len()).map(OrientedEdgeId)
    }

    pub fn source(&self, e: OrientedEdgeId) -> VertexId {
        self.oriented[e.0].source
    }

    pub fn target(&self, e: OrientedEdgeId) -> VertexId {
        self.oriented[e.0].target
    }

    pub fn op(&self, e: OrientedEdgeId) -> OrientedEdgeId {
        self.oriented[e.0].op
    }

    pub fn parent(&self, e: OrientedEdgeId) -> EdgeId {
        self.oriented[e.0].parent
    }

    pub fn amplitude(&self, e: OrientedEdgeId) -> f64 {
        self.oriented[e.0].amplitude
    }

    pub fn is_loop(&self, e: OrientedEdgeId) -> bool {
        self.oriented[e.0].op == e
    }

    /// Oriented edges leaving `v`, in construction order.
    pub fn outgoing(&self, v: VertexId) -> &[OrientedEdgeId] {
        &self.outgoing[v.0]
    }

    /// The `+` (and for non-loops `-`) orientations of an undirected edge.
    pub fn orientations(&self, e: EdgeId) -> (OrientedEdgeId, Option<OrientedEdgeId>) {
        self.by_edge[e.0]
    }

    /// Display name, e.g. `e1+` or `e1-`.
    pub fn oriented_name(&self, e: OrientedEdgeId) -> String {
        let parent = self.oriented[e.0].parent;
        let (fwd, _) = self.by_edge[parent.0];
        let sign = if e == fwd { '+' } else { '-' };
        format!("{}{}", self.graph.edge_name(parent), sign)
    }

    /// Resolve `e1+` / `e1-` names; self-loops accept only `+`.
    pub fn oriented_by_name(&self, name: &str) -> Result<OrientedEdgeId, GraphError> {
        let (base, sign) = match name.char_indices().last() {
            Some((i, c @ ('+' | '-'))) => (&name[..i], c),
            _ => return Err(GraphError::UnknownEdge(name.to_string())),
        };
        let edge = self.graph.edge_by_name(base)?;
        let (fwd, bwd) = self.by_edge[edge.0];
        match (sign, bwd) {
            ('+', _) => Ok(fwd),
            ('-', Some(b)) => Ok(b),
            _ => Err(GraphError::UnknownEdge(name.to_string())),
        }
    }
}

/// Vertex sets from the weight comparison, plus the neighbor
/// multiplicities the comparison was computed from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VertexClassification {
    pub v_gt: BTreeSet<VertexId>,
    pub v_eq: BTreeSet<VertexId>,
    /// `n[(a, b)]` with `a <= b`: unoriented edge count between a and b.
    pub multiplicities: BTreeMap<(VertexId, VertexId), usize>,
}

impl VertexClassification {
    pub fn v_geq(&self) -> BTreeSet<VertexId> {
        self.v_gt.union(&self.v_eq).copied().collect()
    }
}

/// Exact comparison of `mu(v)` against `sum_{w ~ v} n_{v,w} mu(w)` for
/// every vertex. A self-loop at `v` contributes `n_{v,v}` copies of
/// `mu(v)` to the sum.
pub fn classify_vertices(g: &WeightedGraph) -> VertexClassification {
    let mut multiplicities: BTreeMap<(VertexId, VertexId), usize> = BTreeMap::new();
    for e in g.edge_ids() {
        let (a, b) = g.edge_ends(e);
        let key = if a <= b { (a, b) } else { (b, a) };
        *multiplicities.entry(key).or_insert(0) += 1;
    }
    let mut v_gt = BTreeSet::new();
    let mut v_eq = BTreeSet::new();
    for v in g.vertex_ids() {
        let mut neighbor_sum = BigRational::zero();
        for (&(a, b), &n) in &multiplicities {
            if a == v {
                neighbor_sum += g.weight(b) * BigRational::from_integer(n.into());
            } else if b == v {
                neighbor_sum += g.weight(a) * BigRational::from_integer(n.into());
            }
        }
        match g.weight(v).cmp(&neighbor_sum) {
            std::cmp::Ordering::Greater => {
                v_gt.insert(v);
            }
            std::cmp::Ordering::Equal => {
                v_eq.insert(v);
            }
            std::cmp::Ordering::Less => {}
        }
    }
    VertexClassification {
        v_gt,
        v_eq,
        multiplicities,
    }
}

/// Structure of the algebra read off the classification: simplicity,
/// trace uniqueness, unitality of the minimal ideal, the
/// finite-dimensional quotient, K-groups and scalar summand traces.
#[derive(Debug, Clone)]
pub struct StructureReport {
    pub classification: VertexClassification,
    pub simple: bool,
    pub unique_trace: bool,
    pub ideal_unital: bool,
    pub quotient_dimension: usize,
    /// For each v in V_>, `mu(v) - sum_{w ~ v} n_{v,w} mu(w)`, the trace
    /// of the scalar direct summand sitting under p_v.
    pub summand_traces: BTreeMap<VertexId, BigRational>,
    /// Free generators of K0 of the minimal ideal: vertices outside V_>=.
    pub k0_basis: Vec<VertexId>,
    pub k1_trivial: bool,
    weights: Vec<BigRational>,
}

pub fn structure_report(g: &WeightedGraph) -> Result<StructureReport, GraphError> {
    if g.edge_count() < 2 {
        return Err(GraphError::EdgeCount(g.edge_count()));
    }
    let classification = classify_vertices(g);
    let v_geq = classification.v_geq();
    let mut summand_traces = BTreeMap::new();
    for &v in &classification.v_gt {
        let mut neighbor_sum = BigRational::zero();
        for (&(a, b), &n) in &classification.multiplicities {
            if a == v {
                neighbor_sum += g.weight(b) * BigRational::from_integer(n.into());
            } else if b == v {
                neighbor_sum += g.weight(a) * BigRational::from_integer(n.into());
            }
        }
        summand_traces.insert(v, g.weight(v) - neighbor_sum);
    }
    let k0_basis: Vec<VertexId> = g.vertex_ids().filter(|v| !v_geq.contains(v)).collect();
    Ok(StructureReport {
        simple: v_geq.is_empty(),
        unique_trace: v_geq.is_empty(),
        ideal_unital: classification.v_eq.is_empty(),
        quotient_dimension: v_geq.len(),
        summand_traces,
        k0_basis,
        k1_trivial: true,
        weights: g.vertex_ids().map(|v| g.weight(v).clone()).collect(),
        classification,
    })
}

impl StructureReport {
    /// Whether an integer combination of K0 basis classes lies in the
    /// positive cone: true iff its trace is positive or all coefficients
    /// vanish. Coefficients on vertices outside the basis are rejected.
    pub fn k0_positive_cone_member(
        &self,
        coeffs: &BTreeMap<VertexId, i64>,
        g: &WeightedGraph,
    ) -> Result<bool, GraphError> {
        let basis: BTreeSet<VertexId> = self.k0_basis.iter().copied().collect();
        let mut trace = BigRational::zero();
        let mut all_zero = true;
        for (&v, &n) in coeffs {
            if !basis.contains(&v) {
                return Err(GraphError::NotInK0Basis(g.vertex_name(v).to_string()));
            }
            if n != 0 {
                all_zero = false;
                trace += &self.weights[v.0] * BigRational::from_integer(n.into());
            }
        }
        Ok(all_zero || trace.is_positive())
    }
}

impl fmt::Display for StructureReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "simple: {}", self.simple)?;
        writeln!(f, "unique_trace: {}", self.unique_trace)?;
        writeln!(f, "ideal_unital: {}", self.ideal_unital)?;
        writeln!(f, "quotient_dimension: {}", self.quotient_dimension)?;
        writeln!(f, "k1_trivial: {}", self.k1_trivial)
    }
}
