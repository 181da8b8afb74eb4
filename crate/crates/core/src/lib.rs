//! Trace and spectral laws of loop polynomials on weighted graphs.
//!
//! A finite weighted undirected graph carries a canonical family of
//! self-adjoint generators, one per edge, acting on the graph's Fock
//! space. This crate computes the canonical trace of noncommutative
//! polynomials in those generators, reconstructs the spectral laws of
//! self-adjoint loop elements from their moments, classifies the
//! ideal/K-theory structure of the associated C*-algebra from the
//! vertex weighting, and validates the predicted limit laws against
//! Monte Carlo block-Wishart ensembles.
//!
//! Modules:
//! - [`graph`]: weighted graphs, the directed double, vertex
//!   classification, structure reports.
//! - [`ncpoly`]: words over oriented edges and *-polynomials in the
//!   generators, with exact rational coefficients.
//! - [`expr`]: the expression mini-language used by the CLI.
//! - [`trace`]: the canonical trace via the loop recursion; moment
//!   sequences.
//! - [`fock`]: the depth-truncated Fock representation, used as an
//!   independent trace oracle and for operator identity checks.
//! - [`calculus`]: free difference quotients and their numeric and
//!   symbolic identity suite.
//! - [`series`]: the proper algebraic system satisfied by the loop
//!   generating series, solved in graded truncation.
//! - [`law`]: Cauchy transforms, Stieltjes inversion, algebraic
//!   relation discovery, reference free-Poisson laws.
//! - [`wishart`]: block-Wishart Monte Carlo and comparison harness.

pub mod calculus;
pub mod cli;
pub mod expr;
pub mod fock;
pub mod graph;
pub mod law;
pub mod ncpoly;
pub mod rational;
pub mod series;
pub mod trace;
pub mod wishart;

pub use graph::{DirectedDouble, EdgeId, OrientedEdgeId, VertexId, WeightedGraph};
pub use ncpoly::{NCPoly, Word};
