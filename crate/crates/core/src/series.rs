//! The loop generating series as the solution of a proper algebraic
//! system, solved in graded truncation.
//!
//! For each vertex `v` the series `z_v` collects, word by word, the
//! traces of loops based at `v`. Splitting every loop at the positions
//! pairing with its last edge turns the trace recursion into the system
//!
//! ```text
//! z_v = sum over oriented e with t(e) = v, s(e) = w of
//!       sqrt(mu(v) mu(w)) op(e) e
//!     + sqrt(mu(w)/mu(v)) z_v op(e) e
//!     + (1/sqrt(mu(w) mu(v))) z_v op(e) z_w e
//!     + sqrt(mu(v)/mu(w)) op(e) z_w e
//! ```
//!
//! The two ratio factors are pinned by the convention that an empty
//! factor loop contributes its full corner mass; the cross check below
//! ties every coefficient to the trace recursion and would catch any
//! other placement.
//!
//! Self-loop edges enter as the `w = v` case with the same coefficient
//! pattern (all four roots collapse to the weight itself); the cross
//! check against the direct trace recursion validates that convention.
//!
//! Every right-hand term raises word length by at least two, so the
//! fixed-point iteration from zero is graded and reaches the truncated
//! solution exactly after at most `max_degree` rounds.

use std::collections::BTreeMap;

use crate::graph::{DirectedDouble, OrientedEdgeId, VertexId};
use crate::ncpoly::Word;
use crate::trace::Tracer;

/// Truncated series over loop words at a base vertex.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedNCSeries {
    pub base: VertexId,
    pub max_degree: usize,
    /// Nonzero coefficients; keys are loop words based at `base`.
    pub coeffs: BTreeMap<Vec<OrientedEdgeId>, f64>,
}

impl TruncatedNCSeries {
    pub fn coeff(&self, word: &[OrientedEdgeId]) -> f64 {
        self.coeffs.get(word).copied().unwrap_or(0.0)
    }

    /// Commutative specialization: index m holds the sum of the
    /// coefficients of all words of length m.
    pub fn specialize_commutative(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.max_degree + 1];
        for (w, c) in &self.coeffs {
            out[w.len()] += c;
        }
        out
    }
}

/// Solve the system for all vertices jointly, truncated at `max_degree`.
pub fn solve_system(dd: &DirectedDouble, max_degree: usize) -> Vec<TruncatedNCSeries> {
    assert!(max_degree >= 2, "the system has no content below degree 2");
    let g = dd.graph();
    let nv = g.vertex_count();
    let mut z: Vec<BTreeMap<Vec<OrientedEdgeId>, f64>> = vec![BTreeMap::new(); nv];
    for _round in 0..=max_degree {
        let next = apply_rhs(dd, &z, max_degree);
        if next == z {
            break;
        }
        z = next;
    }
    z.into_iter()
        .enumerate()
        .map(|(v, coeffs)| TruncatedNCSeries {
            base: VertexId(v),
            max_degree,
            coeffs,
        })
        .collect()
}

fn apply_rhs(
    dd: &DirectedDouble,
    z: &[BTreeMap<Vec<OrientedEdgeId>, f64>],
    max_degree: usize,
) -> Vec<BTreeMap<Vec<OrientedEdgeId>, f64>> {
    let g = dd.graph();
    let mut out: Vec<BTreeMap<Vec<OrientedEdgeId>, f64>> = vec![BTreeMap::new(); z.len()];
    for e in dd.oriented_ids() {
        let v = dd.target(e);
        let w = dd.source(e);
        let mv = g.weight_f64(v);
        let mw = g.weight_f64(w);
        let op = dd.op(e);
        let sink = &mut out[v.0];

        // sqrt(mu(v) mu(w)) op(e) e
        add(sink, vec![op, e], (mv * mw).sqrt(), max_degree);

        // sqrt(mu(w)/mu(v)) z_v op(e) e: an empty middle loop at w
        // contributes its full mass mu(w), i.e. mu(w)/sqrt(mu(v) mu(w))
        for (zw, c) in &z[v.0] {
            let mut word = zw.clone();
            word.push(op);
            word.push(e);
            add(sink, word, c * (mw / mv).sqrt(), max_degree);
        }

        // sqrt(mu(v)/mu(w)) op(e) z_w e: empty prefix loop at v
        for (zw, c) in &z[w.0] {
            let mut word = Vec::with_capacity(zw.len() + 2);
            word.push(op);
            word.extend_from_slice(zw);
            word.push(e);
            add(sink, word, c * (mv / mw).sqrt(), max_degree);
        }

        // (1/sqrt(mu(w) mu(v))) z_v op(e) z_w e
        for (za, ca) in &z[v.0] {
            if za.len() + 4 > max_degree {
                continue;
            }
            for (zb, cb) in &z[w.0] {
                let mut word = Vec::with_capacity(za.len() + zb.len() + 2);
                word.extend_from_slice(za);
                word.push(op);
                word.extend_from_slice(zb);
                word.push(e);
                add(sink, word, ca * cb / (mv * mw).sqrt(), max_degree);
            }
        }
    }
    out
}

fn add(
    sink: &mut BTreeMap<Vec<OrientedEdgeId>, f64>,
    word: Vec<OrientedEdgeId>,
    c: f64,
    max_degree: usize,
) {
    if word.len() > max_degree || c == 0.0 {
        return;
    }
    *sink.entry(word).or_insert(0.0) += c;
}

/// Largest deviation between series coefficients and directly computed
/// word traces, over all loop words at the base vertex up to the
/// truncation degree (including words absent from the series).
pub fn crosscheck(dd: &DirectedDouble, series: &TruncatedNCSeries) -> f64 {
    let tracer = Tracer::new(dd);
    let mut worst: f64 = 0.0;
    // walk all composable words from the base vertex
    let mut stack: Vec<Vec<OrientedEdgeId>> = dd
        .outgoing(series.base)
        .iter()
        .map(|&e| vec![e])
        .collect();
    while let Some(es) = stack.pop() {
        if dd.target(*es.last().unwrap()) == series.base {
            let trace = tracer.trace_word(&Word::Path(es.clone()));
            worst = worst.max((series.coeff(&es) - trace).abs());
        }
        if es.len() < series.max_degree {
            for &e in dd.outgoing(dd.target(*es.last().unwrap())) {
                let mut next = es.clone();
                next.push(e);
                stack.push(next);
            }
        }
    }
    // coefficients on words the walk may have missed would be a bug in
    // the solver itself: every stored key must be a loop at the base
    for w in series.coeffs.keys() {
        debug_assert!(!w.is_empty());
    }
    worst
}

/// One more application of the right-hand side must not change a solved
/// truncation; exposed for tests and the CLI consistency gate.
pub fn is_fixed_point(dd: &DirectedDouble, solution: &[TruncatedNCSeries]) -> bool {
    let z: Vec<BTreeMap<Vec<OrientedEdgeId>, f64>> =
        solution.iter().map(|s| s.coeffs.clone()).collect();
    let deg = solution.first().map(|s| s.max_degree).unwrap_or(2);
    apply_rhs(dd, &z, deg) == z
}
