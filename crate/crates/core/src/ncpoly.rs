//! Words over oriented edges and noncommutative *-polynomials in the
//! generators `X_e` and the vertex projections `p_v`.
//!
//! The generator relations already pin the canonical form down: a
//! monomial is either a vertex projection (the empty word based at that
//! vertex) or a composable path of oriented edges, and a product of two
//! monomials survives exactly when the right endpoint of the first
//! matches the left endpoint of the second. Everything else multiplies
//! to zero, so a polynomial is a finite map from canonical words to
//! coefficients.
//!
//! Coefficients are exact complex rationals. Trace values of words are
//! generally irrational, so traces are taken in floating point (or in an
//! exact mode when the weighting allows it); the word combinatorics
//! stays exact throughout.

use std::collections::BTreeMap;

use num_complex::Complex;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use thiserror::Error;

use crate::graph::{DirectedDouble, OrientedEdgeId, VertexId};
use crate::rational::{format_rational, to_f64};

/// Exact scalar: complex number with rational real and imaginary parts.
pub type Coeff = Complex<BigRational>;

pub fn coeff_zero() -> Coeff {
    Complex::new(BigRational::zero(), BigRational::zero())
}

pub fn coeff_one() -> Coeff {
    Complex::new(BigRational::one(), BigRational::zero())
}

pub fn coeff_from_int(n: i64) -> Coeff {
    Complex::new(BigRational::from_integer(n.into()), BigRational::zero())
}

pub fn coeff_from_rational(r: BigRational) -> Coeff {
    Complex::new(r, BigRational::zero())
}

/// Exact conversion; every finite f64 is a rational.
pub fn coeff_from_f64(x: f64) -> Coeff {
    Complex::new(
        BigRational::from_float(x).expect("finite float"),
        BigRational::zero(),
    )
}

pub fn coeff_to_c64(c: &Coeff) -> Complex<f64> {
    Complex::new(to_f64(&c.re), to_f64(&c.im))
}

pub fn coeff_is_zero(c: &Coeff) -> bool {
    c.re.is_zero() && c.im.is_zero()
}

fn coeff_conj(c: &Coeff) -> Coeff {
    Complex::new(c.re.clone(), -c.im.clone())
}

fn format_coeff(c: &Coeff) -> String {
    if c.im.is_zero() {
        format_rational(&c.re)
    } else {
        format!("({},{})", format_rational(&c.re), format_rational(&c.im))
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PolyError {
    #[error("polynomial is not self-adjoint")]
    NotSelfAdjoint,
    #[error("polynomial is not cornered at the requested vertex")]
    NotCornered,
}

/// A canonical monomial: either the projection `p_v` (empty word based
/// at `v`) or a composable path of oriented edges.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Word {
    Empty(VertexId),
    Path(Vec<OrientedEdgeId>),
}

impl Word {
    /// Composable path constructor; `None` if the edges do not chain.
    pub fn path(dd: &DirectedDouble, edges: Vec<OrientedEdgeId>) -> Option<Word> {
        if edges.is_empty() {
            return None;
        }
        for pair in edges.windows(2) {
            if dd.target(pair[0]) != dd.source(pair[1]) {
                return None;
            }
        }
        Some(Word::Path(edges))
    }

    pub fn len(&self) -> usize {
        match self {
            Word::Empty(_) => 0,
            Word::Path(es) => es.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn source(&self, dd: &DirectedDouble) -> VertexId {
        match self {
            Word::Empty(v) => *v,
            Word::Path(es) => dd.source(es[0]),
        }
    }

    pub fn target(&self, dd: &DirectedDouble) -> VertexId {
        match self {
            Word::Empty(v) => *v,
            Word::Path(es) => dd.target(*es.last().unwrap()),
        }
    }

    pub fn is_loop(&self, dd: &DirectedDouble) -> bool {
        self.source(dd) == self.target(dd)
    }

    pub fn edges(&self) -> &[OrientedEdgeId] {
        match self {
            Word::Empty(_) => &[],
            Word::Path(es) => es,
        }
    }

    /// Reverse the word and flip every edge: the monomial part of the
    /// involution.
    pub fn adjoint(&self, dd: &DirectedDouble) -> Word {
        match self {
            Word::Empty(v) => Word::Empty(*v),
            Word::Path(es) => Word::Path(es.iter().rev().map(|&e| dd.op(e)).collect()),
        }
    }

    /// Concatenation; `None` when the endpoints do not match.
    pub fn concat(&self, other: &Word, dd: &DirectedDouble) -> Option<Word> {
        if self.target(dd) != other.source(dd) {
            return None;
        }
        match (self, other) {
            (Word::Empty(_), w) | (w, Word::Empty(_)) => Some(w.clone()),
            (Word::Path(a), Word::Path(b)) => {
                let mut es = a.clone();
                es.extend_from_slice(b);
                Some(Word::Path(es))
            }
        }
    }

    pub fn display(&self, dd: &DirectedDouble) -> String {
        match self {
            Word::Empty(v) => format!("P[{}]", dd.graph().vertex_name(*v)),
            Word::Path(es) => es
                .iter()
                .map(|&e| dd.oriented_name(e))
                .collect::<Vec<_>>()
                .join(","),
        }
    }
}

/// Noncommutative *-polynomial in canonical form: a finite map from
/// words to nonzero coefficients.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct NCPoly {
    terms: BTreeMap<Word, Coeff>,
}

impl NCPoly {
    pub fn zero() -> Self {
        NCPoly::default()
    }

    pub fn projection(v: VertexId) -> Self {
        let mut p = NCPoly::zero();
        p.add_term(Word::Empty(v), coeff_one());
        p
    }

    /// The oriented generator `X_e` as a single length-1 word.
    pub fn generator(e: OrientedEdgeId) -> Self {
        let mut p = NCPoly::zero();
        p.add_term(Word::Path(vec![e]), coeff_one());
        p
    }

    /// The self-adjoint edge generator: `X_e + X_op(e)` for a non-loop
    /// edge, the single fixed generator for a self-loop.
    pub fn edge_generator(dd: &DirectedDouble, e: OrientedEdgeId) -> Self {
        let mut p = NCPoly::generator(e);
        if dd.op(e) != e {
            p.add_term(Word::Path(vec![dd.op(e)]), coeff_one());
        }
        p
    }

    /// The unit: sum of all vertex projections.
    pub fn unit(dd: &DirectedDouble) -> Self {
        let mut p = NCPoly::zero();
        for v in dd.graph().vertex_ids() {
            p.add_term(Word::Empty(v), coeff_one());
        }
        p
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Word, &Coeff)> {
        self.terms.iter()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn coeff(&self, w: &Word) -> Coeff {
        self.terms.get(w).cloned().unwrap_or_else(coeff_zero)
    }

    pub fn max_word_len(&self) -> usize {
        self.terms.keys().map(Word::len).max().unwrap_or(0)
    }

    /// Add `c * w`, dropping the entry if the total cancels.
    pub fn add_term(&mut self, w: Word, c: Coeff) {
        if coeff_is_zero(&c) {
            return;
        }
        let entry = self.terms.entry(w);
        match entry {
            std::collections::btree_map::Entry::Vacant(slot) => {
                slot.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut slot) => {
                let sum = slot.get().clone() + c;
                if coeff_is_zero(&sum) {
                    slot.remove();
                } else {
                    slot.insert(sum);
                }
            }
        }
    }

    pub fn add(&self, other: &NCPoly) -> NCPoly {
        let mut out = self.clone();
        for (w, c) in &other.terms {
            out.add_term(w.clone(), c.clone());
        }
        out
    }

    pub fn sub(&self, other: &NCPoly) -> NCPoly {
        let mut out = self.clone();
        for (w, c) in &other.terms {
            out.add_term(w.clone(), -c.clone());
        }
        out
    }

    pub fn scale(&self, c: &Coeff) -> NCPoly {
        let mut out = NCPoly::zero();
        for (w, k) in &self.terms {
            out.add_term(w.clone(), k.clone() * c.clone());
        }
        out
    }

    /// Bilinear product; non-composable word pairs vanish.
    pub fn mul(&self, other: &NCPoly, dd: &DirectedDouble) -> NCPoly {
        let mut out = NCPoly::zero();
        for (w1, c1) in &self.terms {
            for (w2, c2) in &other.terms {
                if let Some(w) = w1.concat(w2, dd) {
                    out.add_term(w, c1.clone() * c2.clone());
                }
            }
        }
        out
    }

    pub fn pow(&self, k: usize, dd: &DirectedDouble) -> NCPoly {
        let mut out = NCPoly::unit(dd);
        for _ in 0..k {
            out = out.mul(self, dd);
        }
        out
    }

    /// The involution: conjugate coefficients, reverse words, flip edges.
    pub fn adjoint(&self, dd: &DirectedDouble) -> NCPoly {
        let mut out = NCPoly::zero();
        for (w, c) in &self.terms {
            out.add_term(w.adjoint(dd), coeff_conj(c));
        }
        out
    }

    pub fn is_self_adjoint(&self, dd: &DirectedDouble) -> bool {
        self == &self.adjoint(dd)
    }

    /// Whether `p_v * self * p_v == self`.
    pub fn is_cornered_at(&self, v: VertexId, dd: &DirectedDouble) -> bool {
        self.terms
            .keys()
            .all(|w| w.source(dd) == v && w.target(dd) == v)
    }

    /// Compress `self` to `p_left * self * p_right`.
    pub fn corner(&self, left: VertexId, right: VertexId, dd: &DirectedDouble) -> NCPoly {
        let mut out = NCPoly::zero();
        for (w, c) in &self.terms {
            if w.source(dd) == left && w.target(dd) == right {
                out.add_term(w.clone(), c.clone());
            }
        }
        out
    }

    /// Largest absolute value over real/imaginary coefficient parts, as
    /// an exact rational. Zero for the zero polynomial.
    pub fn sup_coeff_norm(&self) -> BigRational {
        let mut best = BigRational::zero();
        for c in self.terms.values() {
            for part in [&c.re, &c.im] {
                let a = part.abs();
                if a > best {
                    best = a;
                }
            }
        }
        best
    }

    pub fn display(&self, dd: &DirectedDouble) -> String {
        if self.terms.is_empty() {
            return "0".to_string();
        }
        self.terms
            .iter()
            .map(|(w, c)| {
                if w.is_empty() {
                    format!("{} {}", format_coeff(c), w.display(dd))
                } else {
                    format!("{} X[{}]", format_coeff(c), w.display(dd))
                }
            })
            .collect::<Vec<_>>()
            .join(" + ")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_directed_double, WeightedGraph};
    use num_complex::Complex;

    fn edge14() -> DirectedDouble {
        let g = WeightedGraph::parse_str("vertex a 1\nvertex b 4\nedge e a b\n").unwrap();
        build_directed_double(&g)
    }

    #[test]
    fn projection_is_idempotent() {
        let dd = edge14();
        let a = dd.graph().vertex_by_name("a").unwrap();
        let p = NCPoly::projection(a);
        assert_eq!(p.mul(&p, &dd), p);
    }

    #[test]
    fn projection_annihilates_mismatched_generator() {
        let dd = edge14();
        let b = dd.graph().vertex_by_name("b").unwrap();
        let eplus = dd.oriented_by_name("e+").unwrap(); // a -> b
        let p_b = NCPoly::projection(b);
        let x = NCPoly::generator(eplus);
        assert!(p_b.mul(&x, &dd).is_zero());
        assert_eq!(x.mul(&p_b, &dd), x);
    }

    #[test]
    fn composable_generators_concatenate() {
        let dd = edge14();
        let eplus = dd.oriented_by_name("e+").unwrap();
        let eminus = dd.oriented_by_name("e-").unwrap();
        let prod = NCPoly::generator(eplus).mul(&NCPoly::generator(eminus), &dd);
        assert_eq!(prod.num_terms(), 1);
        let w = Word::Path(vec![eplus, eminus]);
        assert_eq!(prod.coeff(&w), coeff_one());
        // same orientation twice is not composable
        assert!(NCPoly::generator(eplus)
            .mul(&NCPoly::generator(eplus), &dd)
            .is_zero());
    }

    #[test]
    fn adjoint_flips_generators_and_conjugates() {
        let dd = edge14();
        let a = dd.graph().vertex_by_name("a").unwrap();
        let eplus = dd.oriented_by_name("e+").unwrap();
        let eminus = dd.oriented_by_name("e-").unwrap();
        assert_eq!(
            NCPoly::generator(eplus).adjoint(&dd),
            NCPoly::generator(eminus)
        );
        let i = Complex::new(BigRational::zero(), BigRational::one());
        let p = NCPoly::projection(a).scale(&i);
        assert_eq!(p.adjoint(&dd), p.scale(&coeff_from_int(-1)));
    }

    #[test]
    fn adjoint_reverses_products() {
        let g = WeightedGraph::parse_str(
            "vertex a 1\nvertex b 2\nvertex c 3\nedge e1 a b\nedge e2 b c\n",
        )
        .unwrap();
        let dd = build_directed_double(&g);
        let e1 = dd.oriented_by_name("e1+").unwrap();
        let e2 = dd.oriented_by_name("e2+").unwrap();
        let pq = NCPoly::generator(e1).mul(&NCPoly::generator(e2), &dd);
        let qs_ps = NCPoly::generator(dd.op(e2)).mul(&NCPoly::generator(dd.op(e1)), &dd);
        assert_eq!(pq.adjoint(&dd), qs_ps);
    }

    #[test]
    fn bracketing_projections_act_as_identity() {
        let dd = edge14();
        let a = dd.graph().vertex_by_name("a").unwrap();
        let b = dd.graph().vertex_by_name("b").unwrap();
        let eplus = dd.oriented_by_name("e+").unwrap();
        let x = NCPoly::generator(eplus);
        let bracketed = NCPoly::projection(a).mul(&x, &dd).mul(&NCPoly::projection(b), &dd);
        assert_eq!(bracketed, x);
    }

    #[test]
    fn unit_is_two_sided_identity() {
        let dd = edge14();
        let one = NCPoly::unit(&dd);
        let eplus = dd.oriented_by_name("e+").unwrap();
        let x = NCPoly::edge_generator(&dd, eplus);
        assert_eq!(one.mul(&x, &dd), x);
        assert_eq!(x.mul(&one, &dd), x);
        assert_eq!(one.mul(&one, &dd), one);
    }

    #[test]
    fn cancellation_drops_terms() {
        let dd = edge14();
        let eplus = dd.oriented_by_name("e+").unwrap();
        let x = NCPoly::generator(eplus);
        assert!(x.sub(&x).is_zero());
    }

    #[test]
    fn self_loop_generator_is_self_adjoint() {
        let g = WeightedGraph::parse_str("vertex a 1\nedge l a a\n").unwrap();
        let dd = build_directed_double(&g);
        let e = dd.oriented_by_name("l+").unwrap();
        let x = NCPoly::edge_generator(&dd, e);
        assert_eq!(x.num_terms(), 1);
        assert!(x.is_self_adjoint(&dd));
    }

    #[test]
    fn cornering() {
        let dd = edge14();
        let a = dd.graph().vertex_by_name("a").unwrap();
        let eplus = dd.oriented_by_name("e+").unwrap();
        let eminus = dd.oriented_by_name("e-").unwrap();
        let loop_at_a = NCPoly::generator(eplus).mul(&NCPoly::generator(eminus), &dd);
        assert!(loop_at_a.is_cornered_at(a, &dd));
        let x = NCPoly::edge_generator(&dd, eplus);
        assert!(!x.is_cornered_at(a, &dd));
        assert!(x.corner(a, a, &dd).is_zero());
    }
}
