//! Depth-truncated Fock representation of the generators.
//!
//! The basis consists of all composable paths of length 0..=D, a
//! length-0 path being a vertex. Each basis vector is the path divided
//! by `sqrt(mu(target))`, which folds the weighted inner product into
//! the basis so that adjoints are plain transposes and all matrices are
//! real. In this normalization the creation operator of an oriented
//! edge is a partial 0/1 map (prepend the edge when composable, drop
//! any image that would exceed the depth), the generator
//! `X_e = a ell(e) + a^{-1} ell(op(e))^T` has at most two entries per
//! column, and the modular conjugation J (reverse the path, flip every
//! edge) is a permutation with `J^2 = I` exactly.
//!
//! Truncation policy: creation out of the top level maps to 0, so any
//! claim of exactness is restricted to inputs whose images stay inside
//! the truncation. The trace of a word of length at most D is exact
//! because intermediate path lengths never exceed the word length.

use std::collections::HashMap;

use thiserror::Error;

use crate::graph::{DirectedDouble, OrientedEdgeId, VertexId};
use crate::ncpoly::Word;

pub const DEFAULT_DIMENSION_CAP: usize = 200_000;

#[derive(Debug, Error, PartialEq)]
pub enum FockError {
    #[error("word length {needed} exceeds truncation depth {depth}")]
    DepthTooShallow { needed: usize, depth: usize },
    #[error("basis dimension {dim} exceeds cap {cap} at depth {depth}")]
    DimensionCap { dim: usize, cap: usize, depth: usize },
}

/// A sparse operator stored column-wise; every column holds the rows it
/// feeds. Generators have at most two entries per column.
#[derive(Debug, Clone)]
pub struct SparseOp {
    cols: Vec<Vec<(usize, f64)>>,
}

impl SparseOp {
    fn zeros(dim: usize) -> Self {
        SparseOp {
            cols: vec![Vec::new(); dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.cols.len()
    }

    pub fn column(&self, j: usize) -> &[(usize, f64)] {
        &self.cols[j]
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.cols.len()];
        for (j, col) in self.cols.iter().enumerate() {
            if v[j] != 0.0 {
                for &(i, a) in col {
                    out[i] += a * v[j];
                }
            }
        }
        out
    }

    fn transpose(&self) -> SparseOp {
        let mut out = SparseOp::zeros(self.cols.len());
        for (j, col) in self.cols.iter().enumerate() {
            for &(i, a) in col {
                out.cols[i].push((j, a));
            }
        }
        out
    }

    fn sorted(mut self) -> SparseOp {
        for col in &mut self.cols {
            col.sort_by_key(|&(i, _)| i);
        }
        self
    }
}

/// The truncated Fock space with its operator matrices.
pub struct TruncatedFock {
    depth: usize,
    paths: Vec<Word>,
    index: HashMap<Word, usize>,
    lengths: Vec<usize>,
    /// Source vertex per basis vector (`p_v` is diagonal on these).
    sources: Vec<VertexId>,
    vacuum: Vec<usize>,
    creation: Vec<SparseOp>,
    generators: Vec<SparseOp>,
    /// J as a basis permutation.
    conjugation: Vec<usize>,
    weights: Vec<f64>,
}

/// Enumerate the path basis and assemble all operator matrices.
pub fn build(
    dd: &DirectedDouble,
    depth: usize,
    cap: Option<usize>,
) -> Result<TruncatedFock, FockError> {
    let cap = cap.unwrap_or(DEFAULT_DIMENSION_CAP);
    let g = dd.graph();
    let mut paths: Vec<Word> = g.vertex_ids().map(Word::Empty).collect();
    let mut index: HashMap<Word, usize> = HashMap::new();
    for (i, p) in paths.iter().enumerate() {
        index.insert(p.clone(), i);
    }
    let mut level_start = 0;
    for d in 1..=depth {
        let level_end = paths.len();
        for i in level_start..level_end {
            let tail = paths[i].clone();
            for &e in dd.outgoing(tail.target(dd)) {
                let mut es = tail.edges().to_vec();
                es.push(e);
                let p = Word::Path(es);
                index.insert(p.clone(), paths.len());
                paths.push(p);
                if paths.len() > cap {
                    return Err(FockError::DimensionCap {
                        dim: paths.len(),
                        cap,
                        depth: d,
                    });
                }
            }
        }
        level_start = level_end;
    }
    let dim = paths.len();
    let lengths: Vec<usize> = paths.iter().map(Word::len).collect();
    let sources: Vec<VertexId> = paths.iter().map(|p| p.source(dd)).collect();
    let vacuum: Vec<usize> = g.vertex_ids().map(|v| index[&Word::Empty(v)]).collect();

    // creation: prepend the edge when composable and within depth
    let mut creation = Vec::with_capacity(dd.oriented_count());
    for e in dd.oriented_ids() {
        let mut op = SparseOp::zeros(dim);
        for (j, p) in paths.iter().enumerate() {
            if dd.target(e) == p.source(dd) && p.len() + 1 <= depth {
                let mut es = vec![e];
                es.extend_from_slice(p.edges());
                let i = index[&Word::Path(es)];
                op.cols[j].push((i, 1.0));
            }
        }
        creation.push(op);
    }

    // X_e = a ell(e) + a^{-1} ell(op(e))^T; the annihilation weight is
    // the stored amplitude of op(e), so X_e and X_op(e)^T share floats
    // bit for bit
    let mut generators = Vec::with_capacity(dd.oriented_count());
    for e in dd.oriented_ids() {
        let a = dd.amplitude(e);
        let a_op = dd.amplitude(dd.op(e));
        let annihilate = creation[dd.op(e).0].transpose();
        let mut op = SparseOp::zeros(dim);
        for j in 0..dim {
            for &(i, v) in creation[e.0].column(j) {
                op.cols[j].push((i, a * v));
            }
            for &(i, v) in annihilate.column(j) {
                op.cols[j].push((i, a_op * v));
            }
        }
        generators.push(op.sorted());
    }

    // J: reverse the path, flip every edge; identity on vacua
    let conjugation: Vec<usize> = paths
        .iter()
        .map(|p| match p {
            Word::Empty(_) => index[p],
            Word::Path(es) => {
                let rev: Vec<OrientedEdgeId> = es.iter().rev().map(|&e| dd.op(e)).collect();
                index[&Word::Path(rev)]
            }
        })
        .collect();

    Ok(TruncatedFock {
        depth,
        paths,
        index,
        lengths,
        sources,
        vacuum,
        creation,
        generators,
        conjugation,
        weights: g.vertex_ids().map(|v| g.weight_f64(v)).collect(),
    })
}

impl TruncatedFock {
    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn dim(&self) -> usize {
        self.paths.len()
    }

    pub fn basis_word(&self, i: usize) -> &Word {
        &self.paths[i]
    }

    pub fn basis_index(&self, w: &Word) -> Option<usize> {
        self.index.get(w).copied()
    }

    pub fn creation_op(&self, e: OrientedEdgeId) -> &SparseOp {
        &self.creation[e.0]
    }

    pub fn generator_op(&self, e: OrientedEdgeId) -> &SparseOp {
        &self.generators[e.0]
    }

    /// J as a function on basis indices.
    pub fn conjugate_index(&self, i: usize) -> usize {
        self.conjugation[i]
    }

    pub fn source_vertex(&self, i: usize) -> VertexId {
        self.sources[i]
    }

    /// Trace of a word, exact for `len <= depth`.
    pub fn trace(&self, w: &Word) -> Result<f64, FockError> {
        match w {
            Word::Empty(v) => Ok(self.weights[v.0]),
            Word::Path(es) => {
                if es.len() > self.depth {
                    return Err(FockError::DepthTooShallow {
                        needed: es.len(),
                        depth: self.depth,
                    });
                }
                let mut total = 0.0;
                for (v, &vac) in self.vacuum.iter().enumerate() {
                    let mut vec = vec![0.0; self.dim()];
                    vec[vac] = 1.0;
                    // the rightmost generator acts first
                    for &e in es.iter().rev() {
                        vec = self.generators[e.0].apply(&vec);
                    }
                    total += self.weights[v] * vec[vac];
                }
                Ok(total)
            }
        }
    }

    /// Column of `J X_e J` at basis index `j`.
    fn jxj_column(&self, e: OrientedEdgeId, j: usize) -> Vec<(usize, f64)> {
        let mut out = Vec::new();
        for &(i, a) in self.generators[e.0].column(self.conjugation[j]) {
            out.push((self.conjugation[i], a));
        }
        out
    }

    /// Residual of the commutation relation between a creation operator
    /// and a conjugated generator, measured on the interior subspace
    /// (path length <= depth - 2, where truncation cannot interfere).
    ///
    /// For distinct edges the commutator must vanish; for the same edge
    /// it must equal the rank-one operator `c |s(e)><t(e)|` with
    /// `c = -1 / (mu(s)^3 mu(t))^(1/4)`, whose single matrix entry in
    /// the normalized basis is `-(mu(t)/mu(s))^(1/4)`.
    pub fn check_commutator(
        &self,
        e: OrientedEdgeId,
        e2: OrientedEdgeId,
        dd: &DirectedDouble,
    ) -> Result<f64, FockError> {
        if self.depth < 2 {
            return Err(FockError::DepthTooShallow {
                needed: 2,
                depth: self.depth,
            });
        }
        let ell = &self.creation[e.0];
        let mut worst: f64 = 0.0;
        for j in 0..self.dim() {
            if self.lengths[j] > self.depth - 2 {
                continue;
            }
            let mut col: HashMap<usize, f64> = HashMap::new();
            // ell(e) . JX(e2)J
            for (m, a) in self.jxj_column(e2, j) {
                for &(i, b) in ell.column(m) {
                    *col.entry(i).or_insert(0.0) += a * b;
                }
            }
            // - JX(e2)J . ell(e)
            for &(m, a) in ell.column(j) {
                for (i, b) in self.jxj_column(e2, m) {
                    *col.entry(i).or_insert(0.0) -= a * b;
                }
            }
            if e == e2 && j == self.vacuum[dd.target(e).0] {
                let entry = -1.0 / dd.amplitude(e);
                *col.entry(self.vacuum[dd.source(e).0]).or_insert(0.0) -= entry;
            }
            let norm2: f64 = col.values().map(|v| v * v).sum();
            worst = worst.max(norm2.sqrt());
        }
        Ok(worst)
    }

    /// Sup over columns of the column-norm difference between `X_e` and
    /// `X_op(e)^T`; zero by construction of the normalized basis.
    pub fn adjoint_defect(&self, e: OrientedEdgeId, dd: &DirectedDouble) -> f64 {
        let xt = self.generators[dd.op(e).0].transpose().sorted();
        let x = &self.generators[e.0];
        let mut worst: f64 = 0.0;
        for j in 0..self.dim() {
            let mut col: HashMap<usize, f64> = HashMap::new();
            for &(i, a) in x.column(j) {
                *col.entry(i).or_insert(0.0) += a;
            }
            for &(i, a) in xt.column(j) {
                *col.entry(i).or_insert(0.0) -= a;
            }
            let norm2: f64 = col.values().map(|v| v * v).sum();
            worst = worst.max(norm2.sqrt());
        }
        worst
    }

    /// J is an exact involution on basis indices.
    pub fn conjugation_is_involution(&self) -> bool {
        (0..self.dim()).all(|i| self.conjugation[self.conjugation[i]] == i)
    }
}
