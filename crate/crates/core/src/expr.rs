//! The expression mini-language for building polynomials.
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := coeff ('*'? factor ('*' factor)*)?
//!         | factor ('*' factor)*
//! factor := P[vertex] | X[edge] | X[edge;v->w] | '(' expr ')' | factor '^' uint
//! coeff  := number | '(' number ',' number ')'      -- complex (re,im)
//! number := rational `p/q`, decimal, or integer, with optional sign
//! ```
//!
//! `X[e]` is the self-adjoint edge generator; `X[e;v->w]` picks the
//! oriented corner `p_v X_e p_w`. All coefficients parse to exact
//! complex rationals.

use num_complex::Complex;
use num_rational::BigRational;
use num_traits::Zero;
use thiserror::Error;

use crate::graph::DirectedDouble;
use crate::ncpoly::{Coeff, NCPoly};
use crate::rational::parse_rational;

#[derive(Debug, Error, PartialEq)]
#[error("parse error at byte {pos}: {msg}")]
pub struct ExprError {
    pub pos: usize,
    pub msg: String,
}

struct Parser<'a> {
    text: &'a str,
    bytes: &'a [u8],
    pos: usize,
    dd: &'a DirectedDouble,
}

/// Parse an expression against a directed double's vertex and edge
/// names, producing a canonical polynomial.
pub fn parse_expression(text: &str, dd: &DirectedDouble) -> Result<NCPoly, ExprError> {
    let mut p = Parser {
        text,
        bytes: text.as_bytes(),
        pos: 0,
        dd,
    };
    let out = p.expr()?;
    p.skip_ws();
    if p.pos != p.bytes.len() {
        return Err(p.err("unexpected trailing input"));
    }
    Ok(out)
}

impl<'a> Parser<'a> {
    fn err(&self, msg: impl Into<String>) -> ExprError {
        ExprError {
            pos: self.pos,
            msg: msg.into(),
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.bytes.get(self.pos).copied()
    }

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: u8) -> Result<(), ExprError> {
        if self.eat(c) {
            Ok(())
        } else {
            Err(self.err(format!("expected `{}`", c as char)))
        }
    }

    fn expr(&mut self) -> Result<NCPoly, ExprError> {
        let mut acc = self.term()?;
        loop {
            match self.peek() {
                Some(b'+') => {
                    self.pos += 1;
                    acc = acc.add(&self.term()?);
                }
                Some(b'-') => {
                    self.pos += 1;
                    acc = acc.sub(&self.term()?);
                }
                _ => return Ok(acc),
            }
        }
    }

    fn term(&mut self) -> Result<NCPoly, ExprError> {
        let coeff = self.try_coeff()?;
        let mut factors: Vec<NCPoly> = Vec::new();
        if coeff.is_some() {
            // optional `*` between coefficient and first factor
            let save = self.pos;
            if !self.eat(b'*') {
                self.pos = save;
            }
        }
        if self.starts_factor() {
            factors.push(self.power()?);
            while self.eat(b'*') {
                factors.push(self.power()?);
            }
        }
        match (coeff, factors.is_empty()) {
            (None, true) => Err(self.err("expected a coefficient or a factor")),
            (Some(c), true) => Ok(NCPoly::unit(self.dd).scale(&c)),
            (c, false) => {
                let mut acc = factors[0].clone();
                for f in &factors[1..] {
                    acc = acc.mul(f, self.dd);
                }
                Ok(match c {
                    Some(c) => acc.scale(&c),
                    None => acc,
                })
            }
        }
    }

    fn starts_factor(&mut self) -> bool {
        matches!(self.peek(), Some(b'P') | Some(b'X') | Some(b'('))
    }

    fn power(&mut self) -> Result<NCPoly, ExprError> {
        let base = self.factor()?;
        if self.eat(b'^') {
            self.skip_ws();
            let start = self.pos;
            while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
                self.pos += 1;
            }
            if start == self.pos {
                return Err(self.err("expected an exponent"));
            }
            let n: usize = self.text[start..self.pos]
                .parse()
                .map_err(|_| self.err("exponent out of range"))?;
            Ok(base.pow(n, self.dd))
        } else {
            Ok(base)
        }
    }

    fn factor(&mut self) -> Result<NCPoly, ExprError> {
        match self.peek() {
            Some(b'P') => {
                self.pos += 1;
                self.expect(b'[')?;
                let name = self.ident()?;
                self.expect(b']')?;
                let v = self
                    .dd
                    .graph()
                    .vertex_by_name(&name)
                    .map_err(|_| self.err(format!("unknown vertex `{name}`")))?;
                Ok(NCPoly::projection(v))
            }
            Some(b'X') => {
                self.pos += 1;
                self.expect(b'[')?;
                let name = self.ident()?;
                let poly = if self.eat(b';') {
                    let from = self.ident()?;
                    self.expect(b'-')?;
                    self.expect(b'>')?;
                    let to = self.ident()?;
                    let edge = self
                        .dd
                        .graph()
                        .edge_by_name(&name)
                        .map_err(|_| self.err(format!("unknown edge `{name}`")))?;
                    let v_from = self
                        .dd
                        .graph()
                        .vertex_by_name(&from)
                        .map_err(|_| self.err(format!("unknown vertex `{from}`")))?;
                    let v_to = self
                        .dd
                        .graph()
                        .vertex_by_name(&to)
                        .map_err(|_| self.err(format!("unknown vertex `{to}`")))?;
                    let (fwd, bwd) = self.dd.orientations(edge);
                    let oriented = if self.dd.source(fwd) == v_from && self.dd.target(fwd) == v_to
                    {
                        fwd
                    } else if let Some(b) = bwd {
                        if self.dd.source(b) == v_from && self.dd.target(b) == v_to {
                            b
                        } else {
                            return Err(
                                self.err(format!("edge `{name}` does not run {from}->{to}"))
                            );
                        }
                    } else if v_from == v_to && self.dd.source(fwd) == v_from {
                        fwd
                    } else {
                        return Err(self.err(format!("edge `{name}` does not run {from}->{to}")));
                    };
                    NCPoly::generator(oriented)
                } else {
                    let edge = self
                        .dd
                        .graph()
                        .edge_by_name(&name)
                        .map_err(|_| self.err(format!("unknown edge `{name}`")))?;
                    let (fwd, _) = self.dd.orientations(edge);
                    NCPoly::edge_generator(self.dd, fwd)
                };
                self.expect(b']')?;
                Ok(poly)
            }
            Some(b'(') => {
                self.pos += 1;
                let inner = self.expr()?;
                self.expect(b')')?;
                Ok(inner)
            }
            _ => Err(self.err("expected `P[`, `X[` or `(`")),
        }
    }

    fn ident(&mut self) -> Result<String, ExprError> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.bytes.len()
            && (self.bytes[self.pos].is_ascii_alphanumeric() || self.bytes[self.pos] == b'_')
        {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.err("expected a name"));
        }
        Ok(self.text[start..self.pos].to_string())
    }

    /// Try to read a scalar: a signed number or a complex `(re,im)`.
    /// Backtracks fully on failure.
    fn try_coeff(&mut self) -> Result<Option<Coeff>, ExprError> {
        let save = self.pos;
        match self.peek() {
            Some(b'(') => {
                // complex literal `(re,im)` vs parenthesized expression
                self.pos += 1;
                let re = match self.try_number() {
                    Some(r) => r,
                    None => {
                        self.pos = save;
                        return Ok(None);
                    }
                };
                if !self.eat(b',') {
                    self.pos = save;
                    return Ok(None);
                }
                let im = match self.try_number() {
                    Some(r) => r,
                    None => {
                        self.pos = save;
                        return Ok(None);
                    }
                };
                if !self.eat(b')') {
                    self.pos = save;
                    return Ok(None);
                }
                Ok(Some(Complex::new(re, im)))
            }
            Some(c) if c.is_ascii_digit() || c == b'+' || c == b'-' || c == b'.' => {
                match self.try_number() {
                    Some(r) => Ok(Some(Complex::new(r, BigRational::zero()))),
                    None => {
                        self.pos = save;
                        Ok(None)
                    }
                }
            }
            _ => Ok(None),
        }
    }

    fn try_number(&mut self) -> Option<BigRational> {
        self.skip_ws();
        let start = self.pos;
        if self.pos < self.bytes.len() && matches!(self.bytes[self.pos], b'+' | b'-') {
            self.pos += 1;
        }
        let mut seen_digit = false;
        while self.pos < self.bytes.len()
            && (self.bytes[self.pos].is_ascii_digit()
                || self.bytes[self.pos] == b'.'
                || self.bytes[self.pos] == b'/')
        {
            if self.bytes[self.pos].is_ascii_digit() {
                seen_digit = true;
            }
            self.pos += 1;
        }
        if !seen_digit {
            self.pos = start;
            return None;
        }
        match parse_rational(&self.text[start..self.pos]) {
            Ok(r) => Some(r),
            Err(_) => {
                self.pos = start;
                None
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_directed_double, WeightedGraph};
    use crate::ncpoly::{coeff_from_int, Word};

    fn double() -> DirectedDouble {
        build_directed_double(
            &WeightedGraph::parse_str("vertex a 1\nvertex b 4\nedge e a b\n").unwrap(),
        )
    }

    #[test]
    fn parses_projection() {
        let dd = double();
        let a = dd.graph().vertex_by_name("a").unwrap();
        assert_eq!(
            parse_expression("P[a]", &dd).unwrap(),
            NCPoly::projection(a)
        );
    }

    #[test]
    fn parses_self_adjoint_edge_generator() {
        let dd = double();
        let p = parse_expression("X[e]", &dd).unwrap();
        assert_eq!(p.num_terms(), 2);
        assert!(p.is_self_adjoint(&dd));
    }

    #[test]
    fn parses_oriented_product() {
        let dd = double();
        let p = parse_expression("X[e;a->b] * X[e;b->a]", &dd).unwrap();
        let ep = dd.oriented_by_name("e+").unwrap();
        let em = dd.oriented_by_name("e-").unwrap();
        assert_eq!(p.coeff(&Word::Path(vec![ep, em])), coeff_from_int(1));
        assert_eq!(p.num_terms(), 1);
    }

    #[test]
    fn parses_coefficients_and_signs() {
        let dd = double();
        let a = dd.graph().vertex_by_name("a").unwrap();
        let b = dd.graph().vertex_by_name("b").unwrap();
        let p = parse_expression("2 P[a] + 3*P[b]", &dd).unwrap();
        assert_eq!(p.coeff(&Word::Empty(a)), coeff_from_int(2));
        assert_eq!(p.coeff(&Word::Empty(b)), coeff_from_int(3));
        let q = parse_expression("P[a] - P[a]", &dd).unwrap();
        assert!(q.is_zero());
        let r = parse_expression("-2 P[a]", &dd).unwrap();
        assert_eq!(r.coeff(&Word::Empty(a)), coeff_from_int(-2));
    }

    #[test]
    fn parses_rational_and_decimal_coefficients() {
        let dd = double();
        let a = dd.graph().vertex_by_name("a").unwrap();
        let p = parse_expression("1/2 P[a]", &dd).unwrap();
        assert_eq!(
            p.coeff(&Word::Empty(a)),
            Complex::new(BigRational::new(1.into(), 2.into()), BigRational::zero())
        );
        let q = parse_expression("0.25 P[a]", &dd).unwrap();
        assert_eq!(
            q.coeff(&Word::Empty(a)),
            Complex::new(BigRational::new(1.into(), 4.into()), BigRational::zero())
        );
    }

    #[test]
    fn parses_complex_scalars() {
        let dd = double();
        let a = dd.graph().vertex_by_name("a").unwrap();
        let p = parse_expression("(0,1) P[a]", &dd).unwrap();
        assert_eq!(
            p.coeff(&Word::Empty(a)),
            Complex::new(BigRational::zero(), BigRational::from_integer(1.into()))
        );
    }

    #[test]
    fn parses_powers_and_parens() {
        let dd = double();
        let p = parse_expression("X[e]^2", &dd).unwrap();
        let q = parse_expression("X[e]*X[e]", &dd).unwrap();
        assert_eq!(p, q);
        let r = parse_expression("(X[e] + P[a])^2", &dd).unwrap();
        let manual = parse_expression("X[e]*X[e] + X[e]*P[a] + P[a]*X[e] + P[a]", &dd).unwrap();
        assert_eq!(r, manual);
    }

    #[test]
    fn parenthesized_expr_is_not_a_complex_literal() {
        let dd = double();
        let p = parse_expression("(2) P[a]", &dd);
        // `(2)` parses as a parenthesized expression (scalar times unit),
        // then juxtaposition with P[a] is not part of the grammar
        assert!(p.is_err());
        let q = parse_expression("(2,0) P[a]", &dd).unwrap();
        let a = dd.graph().vertex_by_name("a").unwrap();
        assert_eq!(q.coeff(&Word::Empty(a)), coeff_from_int(2));
    }

    #[test]
    fn error_positions_and_unknown_names() {
        let dd = double();
        let err = parse_expression("P[zz]", &dd).unwrap_err();
        assert!(err.msg.contains("unknown vertex"));
        let err = parse_expression("X[f]", &dd).unwrap_err();
        assert!(err.msg.contains("unknown edge"));
        let err = parse_expression("X[e;b->b]", &dd).unwrap_err();
        assert!(err.msg.contains("does not run"));
        let err = parse_expression("P[a] +", &dd).unwrap_err();
        assert!(err.pos >= 6);
        assert!(parse_expression("", &dd).is_err());
        assert!(parse_expression("P[a] P[a]", &dd).is_err());
    }

    #[test]
    fn self_loop_orientation() {
        let g = WeightedGraph::parse_str("vertex a 1\nedge l a a\n").unwrap();
        let dd = build_directed_double(&g);
        let p = parse_expression("X[l;a->a]", &dd).unwrap();
        let e = dd.oriented_by_name("l+").unwrap();
        assert_eq!(p, NCPoly::generator(e));
        assert_eq!(parse_expression("X[l]", &dd).unwrap(), p);
    }
}
