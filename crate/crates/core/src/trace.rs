//! The canonical trace on words and polynomials, via the loop recursion.
//!
//! The trace of a word in the oriented generators vanishes unless the
//! word is a loop. On loops it satisfies a recursion in the last edge:
//! writing the word as `e_1 .. e_n` with `n >= 3`, the trace equals the
//! sum over interior positions `j` carrying `op(e_n)` of
//!
//! ```text
//! Tr(e_1..e_{j-1}) * Tr(e_{j+1}..e_{n-1}) / sqrt(mu(s(e_n)) mu(t(e_n)))
//! ```
//!
//! plus the two boundary terms
//!
//! ```text
//! [e_{n-1} = op(e_n)] * sqrt(mu(s(e_n))/mu(t(e_n))) * Tr(e_1..e_{n-2})
//! [e_1     = op(e_n)] * sqrt(mu(t(e_n))/mu(s(e_n))) * Tr(e_2..e_{n-1})
//! ```
//!
//! with base cases `Tr(p_v) = mu(v)`, zero in length 1, and
//! `Tr(X_e X_op(e)) = sqrt(mu(s) mu(t))` in length 2. The subwords in
//! the recursion are again loops, so the recursion closes; results are
//! memoized on the exact edge sequence.
//!
//! The recursion is validated against the truncated Fock representation
//! (see [`crate::fock`]); the Fock model is treated as the definition
//! and this module as the fast path.
//!
//! All of the structure constants are square roots of weight ratios or
//! products. When every such root is rational the whole computation
//! runs in exact rational arithmetic; [`Tracer::new_exact`] detects
//! this. Otherwise traces are floats with the word combinatorics still
//! exact.

use std::collections::HashMap;
use std::sync::Mutex;

use num_complex::Complex;
use num_rational::BigRational;
use num_traits::Zero;

use crate::graph::{DirectedDouble, OrientedEdgeId, VertexId};
use crate::ncpoly::{coeff_to_c64, Coeff, NCPoly, PolyError, Word};
use crate::rational::{sqrt_exact, to_f64};

/// Scalars the trace recursion runs over.
pub trait TraceScalar:
    Clone + PartialEq + Zero + std::ops::Mul<Output = Self> + std::ops::AddAssign
{
}

impl TraceScalar for f64 {}
impl TraceScalar for BigRational {}

/// Per-edge and per-vertex structure constants of the recursion.
struct TraceConsts<S> {
    /// sqrt(mu(s) mu(t)), indexed by oriented edge.
    sqrt_prod: Vec<S>,
    /// 1 / sqrt(mu(s) mu(t)).
    inv_sqrt_prod: Vec<S>,
    /// sqrt(mu(s)/mu(t)).
    sqrt_ratio_st: Vec<S>,
    /// sqrt(mu(t)/mu(s)).
    sqrt_ratio_ts: Vec<S>,
    /// mu(v), indexed by vertex.
    weight: Vec<S>,
}

impl TraceConsts<f64> {
    fn build(dd: &DirectedDouble) -> Self {
        let g = dd.graph();
        let mut sqrt_prod = Vec::new();
        let mut inv_sqrt_prod = Vec::new();
        let mut sqrt_ratio_st = Vec::new();
        let mut sqrt_ratio_ts = Vec::new();
        for e in dd.oriented_ids() {
            let ws = g.weight_f64(dd.source(e));
            let wt = g.weight_f64(dd.target(e));
            sqrt_prod.push((ws * wt).sqrt());
            inv_sqrt_prod.push(1.0 / (ws * wt).sqrt());
            sqrt_ratio_st.push((ws / wt).sqrt());
            sqrt_ratio_ts.push((wt / ws).sqrt());
        }
        TraceConsts {
            sqrt_prod,
            inv_sqrt_prod,
            sqrt_ratio_st,
            sqrt_ratio_ts,
            weight: g.vertex_ids().map(|v| g.weight_f64(v)).collect(),
        }
    }
}

impl TraceConsts<BigRational> {
    /// `None` unless every required square root is rational, i.e. every
    /// edge's weight ratio is a perfect square of a rational.
    fn build_exact(dd: &DirectedDouble) -> Option<Self> {
        let g = dd.graph();
        let mut sqrt_prod = Vec::new();
        let mut inv_sqrt_prod = Vec::new();
        let mut sqrt_ratio_st = Vec::new();
        let mut sqrt_ratio_ts = Vec::new();
        for e in dd.oriented_ids() {
            let ws = g.weight(dd.source(e));
            let wt = g.weight(dd.target(e));
            let prod = sqrt_exact(&(ws * wt))?;
            let ratio = sqrt_exact(&(ws / wt))?;
            inv_sqrt_prod.push(prod.recip());
            sqrt_ratio_ts.push(ratio.recip());
            sqrt_prod.push(prod);
            sqrt_ratio_st.push(ratio);
        }
        Some(TraceConsts {
            sqrt_prod,
            inv_sqrt_prod,
            sqrt_ratio_st,
            sqrt_ratio_ts,
            weight: g.vertex_ids().map(|v| g.weight(v).clone()).collect(),
        })
    }
}

/// Memoizing trace evaluator over an immutable directed double.
///
/// The memo cache is synchronized, so a shared `Tracer` may be used from
/// several threads; concurrent calls return identical values because
/// every cached entry is a pure function of the word.
pub struct Tracer<'g, S> {
    dd: &'g DirectedDouble,
    consts: TraceConsts<S>,
    memo: Mutex<HashMap<Box<[OrientedEdgeId]>, S>>,
}

impl<'g> Tracer<'g, f64> {
    pub fn new(dd: &'g DirectedDouble) -> Self {
        Tracer {
            dd,
            consts: TraceConsts::build(dd),
            memo: Mutex::new(HashMap::new()),
        }
    }
}

impl<'g> Tracer<'g, BigRational> {
    /// Exact-mode tracer; available iff all weight ratios across edges
    /// are perfect squares of rationals.
    pub fn new_exact(dd: &'g DirectedDouble) -> Option<Self> {
        Some(Tracer {
            dd,
            consts: TraceConsts::build_exact(dd)?,
            memo: Mutex::new(HashMap::new()),
        })
    }
}

impl<'g, S: TraceScalar> Tracer<'g, S> {
    pub fn double(&self) -> &'g DirectedDouble {
        self.dd
    }

    pub fn weight(&self, v: VertexId) -> S {
        self.consts.weight[v.0].clone()
    }

    /// Trace of a single word. Zero on non-loops.
    pub fn trace_word(&self, w: &Word) -> S {
        match w {
            Word::Empty(v) => self.consts.weight[v.0].clone(),
            Word::Path(es) => {
                for pair in es.windows(2) {
                    if self.dd.target(pair[0]) != self.dd.source(pair[1]) {
                        return S::zero();
                    }
                }
                self.trace_edges(es)
            }
        }
    }

    /// Recursion on a composable edge sequence.
    fn trace_edges(&self, es: &[OrientedEdgeId]) -> S {
        let n = es.len();
        match n {
            0 => unreachable!("empty edge sequences are Word::Empty"),
            1 => return S::zero(),
            2 => {
                return if self.dd.op(es[0]) == es[1] {
                    self.consts.sqrt_prod[es[0].0].clone()
                } else {
                    S::zero()
                };
            }
            _ => {}
        }
        if self.dd.source(es[0]) != self.dd.target(es[n - 1]) {
            return S::zero();
        }
        if let Some(hit) = self.memo.lock().unwrap().get(es) {
            return hit.clone();
        }
        let last = es[n - 1];
        let opn = self.dd.op(last);
        let mut acc = S::zero();
        // interior occurrences of op(e_n): positions 2..=n-2 in 1-based terms
        for j in 1..n.saturating_sub(2) {
            if es[j] == opn {
                acc += self.consts.inv_sqrt_prod[last.0].clone()
                    * self.trace_edges(&es[..j])
                    * self.trace_edges(&es[j + 1..n - 1]);
            }
        }
        if es[n - 2] == opn {
            acc += self.consts.sqrt_ratio_st[last.0].clone() * self.trace_edges(&es[..n - 2]);
        }
        if es[0] == opn {
            acc += self.consts.sqrt_ratio_ts[last.0].clone() * self.trace_edges(&es[1..n - 1]);
        }
        self.memo
            .lock()
            .unwrap()
            .insert(es.to_vec().into_boxed_slice(), acc.clone());
        acc
    }
}

impl<'g> Tracer<'g, f64> {
    /// Linear extension of the word trace.
    pub fn trace_poly(&self, p: &NCPoly) -> Complex<f64> {
        let mut acc = Complex::new(0.0, 0.0);
        for (w, c) in p.terms() {
            let t = self.trace_word(w);
            if t != 0.0 {
                acc += coeff_to_c64(c) * t;
            }
        }
        acc
    }

    /// Unnormalized moment sequence `m_k = Tr(q^k)` for `k = 0..=k_max`,
    /// for a self-adjoint `q` cornered at `vertex`.
    pub fn moments(
        &self,
        q: &NCPoly,
        vertex: VertexId,
        k_max: usize,
    ) -> Result<MomentSeq, PolyError> {
        if !q.is_self_adjoint(self.dd) {
            return Err(PolyError::NotSelfAdjoint);
        }
        if !q.is_cornered_at(vertex, self.dd) {
            return Err(PolyError::NotCornered);
        }
        let mut moments = Vec::with_capacity(k_max + 1);
        let mut power = NCPoly::projection(vertex);
        for _ in 0..=k_max {
            moments.push(self.trace_poly(&power).re);
            power = power.mul(q, self.dd);
        }
        Ok(MomentSeq {
            vertex,
            weight: self.weight(vertex),
            moments,
            exact: None,
        })
    }
}

impl<'g> Tracer<'g, BigRational> {
    /// Exact linear extension; coefficients stay complex rationals.
    pub fn trace_poly_exact(&self, p: &NCPoly) -> Coeff {
        let mut re = BigRational::zero();
        let mut im = BigRational::zero();
        for (w, c) in p.terms() {
            let t = self.trace_word(w);
            if !t.is_zero() {
                re += &c.re * &t;
                im += &c.im * &t;
            }
        }
        Complex::new(re, im)
    }

    /// Exact moments, as rationals. See [`Tracer::moments`].
    pub fn moments_exact(
        &self,
        q: &NCPoly,
        vertex: VertexId,
        k_max: usize,
    ) -> Result<Vec<BigRational>, PolyError> {
        if !q.is_self_adjoint(self.dd) {
            return Err(PolyError::NotSelfAdjoint);
        }
        if !q.is_cornered_at(vertex, self.dd) {
            return Err(PolyError::NotCornered);
        }
        let mut out = Vec::with_capacity(k_max + 1);
        let mut power = NCPoly::projection(vertex);
        for _ in 0..=k_max {
            let t = self.trace_poly_exact(&power);
            debug_assert!(t.im.is_zero(), "self-adjoint powers have real trace");
            out.push(t.re);
            power = power.mul(q, self.dd);
        }
        Ok(out)
    }
}

/// Unnormalized trace moments of a self-adjoint cornered element.
#[derive(Debug, Clone)]
pub struct MomentSeq {
    pub vertex: VertexId,
    /// Corner weight mu(vertex) = m_0.
    pub weight: f64,
    pub moments: Vec<f64>,
    /// Present when the weighting admits exact traces.
    pub exact: Option<Vec<BigRational>>,
}

impl MomentSeq {
    pub fn k_max(&self) -> usize {
        self.moments.len().saturating_sub(1)
    }

    /// Smallest eigenvalue of the Hankel matrix of the normalized
    /// moments, a positivity diagnostic: should be >= -1e-9.
    pub fn hankel_min_eigenvalue(&self) -> f64 {
        let k = self.moments.len();
        let mut h = k / 2 + 1;
        while h > 1 && 2 * (h - 1) >= k {
            h -= 1;
        }
        let mut m = nalgebra::DMatrix::<f64>::zeros(h, h);
        for i in 0..h {
            for j in 0..h {
                m[(i, j)] = self.moments[i + j] / self.moments[0];
            }
        }
        m.symmetric_eigen()
            .eigenvalues
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min)
    }
}

/// Compute the moment sequence of `q` at `vertex`, attaching exact
/// rational moments whenever the weighting admits them.
pub fn moments(
    dd: &DirectedDouble,
    q: &NCPoly,
    vertex: VertexId,
    k_max: usize,
) -> Result<MomentSeq, PolyError> {
    if let Some(exact_tracer) = Tracer::new_exact(dd) {
        let exact = exact_tracer.moments_exact(q, vertex, k_max)?;
        let moments: Vec<f64> = exact.iter().map(to_f64).collect();
        Ok(MomentSeq {
            vertex,
            weight: dd.graph().weight_f64(vertex),
            moments,
            exact: Some(exact),
        })
    } else {
        Tracer::new(dd).moments(q, vertex, k_max)
    }
}
