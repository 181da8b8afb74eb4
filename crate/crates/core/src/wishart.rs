//! Block-Wishart Monte Carlo and the comparison harness against the
//! trace-engine predictions.
//!
//! An ensemble is a family of independent rectangular blocks `A_ij` of
//! shape `M_i x M_j`, `M_i = round(ratio_i * n)`, with i.i.d. complex
//! Gaussian entries of variance `E|a|^2 = 1/sqrt(M_i M_j)` and
//! `E(a^2) = 0`. Entries are drawn from counter-based substreams keyed
//! by `(seed, sample, i, j)`, so any subset of blocks reproduces
//! bit-identically regardless of sampling order.
//!
//! The limiting model lives on the complete graph with two parallel
//! edges per vertex pair (one per block orientation) weighted by the
//! ratios; the symbol for block `(i, j)` is the oriented corner
//! generator running `i -> j` of its own edge, and the adjoint block is
//! the opposite orientation. Diagonal blocks are sampled but excluded
//! from the default dictionary; an opt-in flag maps them to self-loop
//! generators through their Hermitian parts (exploratory only).

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use num_complex::Complex;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::graph::{build_directed_double, DirectedDouble, EdgeId, WeightedGraph};
use crate::law::{estimate_law, SpectralEstimate};
use crate::ncpoly::{coeff_to_c64, NCPoly, Word};
use crate::rational::format_rational;
use crate::trace::Tracer;

pub type C64 = Complex<f64>;

#[derive(Debug, Error)]
pub enum WishartError {
    #[error("ratios must start with 1 and be >= 1, got {0}")]
    BadRatios(String),
    #[error("the limit graph needs at least two blocks")]
    TooFewBlocks,
    #[error("polynomial is not self-adjoint after substitution")]
    NotSelfAdjoint,
    #[error("polynomial is not of block shape (1,1); every word must be a loop at vertex 1")]
    ShapeMismatch,
    #[error("diagonal block symbols are disabled; enable the diagonal dictionary")]
    DiagonalDisabled,
    #[error(transparent)]
    Graph(#[from] crate::graph::GraphError),
}

/// Ensemble description: ratio vector, base size, sample count, seed.
#[derive(Debug, Clone)]
pub struct EnsembleSpec {
    pub ratios: Vec<BigRational>,
    pub n: usize,
    pub samples: usize,
    pub seed: u64,
}

impl EnsembleSpec {
    pub fn new(
        ratios: Vec<BigRational>,
        n: usize,
        samples: usize,
        seed: u64,
    ) -> Result<Self, WishartError> {
        if ratios.is_empty()
            || !ratios[0].is_one()
            || ratios.iter().any(|r| r < &BigRational::one())
        {
            let shown: Vec<String> = ratios.iter().map(format_rational).collect();
            return Err(WishartError::BadRatios(shown.join(",")));
        }
        Ok(EnsembleSpec {
            ratios,
            n,
            samples,
            seed,
        })
    }

    pub fn block_count(&self) -> usize {
        self.ratios.len()
    }

    /// `M_i(n) = round(ratio_i * n)`.
    pub fn block_size(&self, i: usize) -> usize {
        let v = &self.ratios[i] * BigRational::from_integer(self.n.into());
        let rounded = (&v + BigRational::new(1.into(), 2.into())).floor();
        rounded.to_integer().to_usize().unwrap_or(0)
    }
}

/// The limiting weighted graph plus the block dictionary.
pub struct WishartModel {
    pub spec: EnsembleSpec,
    double: DirectedDouble,
    /// EdgeId -> (i, j): edge carries block A_ij.
    block_of_edge: Vec<(usize, usize)>,
    include_diagonal: bool,
}

/// Complete graph on the blocks with two parallel edges per unordered
/// pair (`e{i}_{j}` carries block `(i,j)` and runs `i -> j` in its `+`
/// orientation) and, when enabled, one self-loop per vertex.
pub fn limit_graph(
    spec: &EnsembleSpec,
    include_diagonal: bool,
) -> Result<(WeightedGraph, Vec<(usize, usize)>), WishartError> {
    let k = spec.block_count();
    if k < 2 {
        return Err(WishartError::TooFewBlocks);
    }
    let vertices: Vec<(String, BigRational)> = (0..k)
        .map(|i| ((i + 1).to_string(), spec.ratios[i].clone()))
        .collect();
    // one edge per ordered pair (i, j), i != j: e{i}_{j} carries the
    // block A_ij and its `+` orientation runs i -> j because i is
    // listed first; diagonal pairs become self-loops when enabled
    let mut edges = Vec::new();
    let mut blocks = Vec::new();
    for i in 0..k {
        for j in 0..k {
            if i == j && !include_diagonal {
                continue;
            }
            edges.push((
                format!("e{}_{}", i + 1, j + 1),
                (i + 1).to_string(),
                (j + 1).to_string(),
            ));
            blocks.push((i, j));
        }
    }
    Ok((WeightedGraph::new(vertices, edges)?, blocks))
}

impl WishartModel {
    pub fn new(spec: EnsembleSpec, include_diagonal: bool) -> Result<Self, WishartError> {
        let (graph, block_of_edge) = limit_graph(&spec, include_diagonal)?;
        Ok(WishartModel {
            spec,
            double: build_directed_double(&graph),
            block_of_edge,
            include_diagonal,
        })
    }

    pub fn graph_double(&self) -> &DirectedDouble {
        &self.double
    }

    pub fn graph(&self) -> &WeightedGraph {
        self.double.graph()
    }

    /// Substream for one block of one sample, independent of sampling
    /// order.
    fn block_rng(&self, sample: u64, i: usize, j: usize) -> ChaCha8Rng {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&self.spec.seed.to_le_bytes());
        key[8..16].copy_from_slice(&sample.to_le_bytes());
        key[16..24].copy_from_slice(&(i as u64).to_le_bytes());
        key[24..32].copy_from_slice(&(j as u64).to_le_bytes());
        ChaCha8Rng::from_seed(key)
    }

    /// One `M_i x M_j` block with entry variance `1/sqrt(M_i M_j)`,
    /// filled row-major.
    pub fn sample_block(&self, sample: u64, i: usize, j: usize) -> DMatrix<C64> {
        let mi = self.spec.block_size(i);
        let mj = self.spec.block_size(j);
        let sigma = (0.5 / (mi as f64 * mj as f64).sqrt()).sqrt();
        let mut rng = self.block_rng(sample, i, j);
        let mut m = DMatrix::<C64>::zeros(mi, mj);
        for r in 0..mi {
            for c in 0..mj {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                m[(r, c)] = C64::new(re * sigma, im * sigma);
            }
        }
        m
    }

    /// Evaluate a cornered polynomial at one sample, yielding the
    /// `(1,1)`-block `n x n` random matrix.
    pub fn evaluate(&self, q: &NCPoly, sample: u64) -> Result<DMatrix<C64>, WishartError> {
        let v1 = self.graph().vertex_by_name("1").expect("vertex 1");
        if !q.is_cornered_at(v1, &self.double) {
            return Err(WishartError::ShapeMismatch);
        }
        let n = self.spec.block_size(0);
        let mut cache: BTreeMap<(usize, usize), DMatrix<C64>> = BTreeMap::new();
        let mut acc = DMatrix::<C64>::zeros(n, n);
        for (w, c) in q.terms() {
            let term = match w {
                Word::Empty(_) => DMatrix::<C64>::identity(n, n),
                Word::Path(es) => {
                    let mut prod: Option<DMatrix<C64>> = None;
                    for &e in es {
                        let mat = self.oriented_matrix(e, sample, &mut cache)?;
                        prod = Some(match prod {
                            None => mat,
                            Some(p) => p * mat,
                        });
                    }
                    prod.expect("nonempty path")
                }
            };
            let cc = coeff_to_c64(c);
            acc += term * cc;
        }
        Ok(acc)
    }

    fn oriented_matrix(
        &self,
        e: crate::graph::OrientedEdgeId,
        sample: u64,
        cache: &mut BTreeMap<(usize, usize), DMatrix<C64>>,
    ) -> Result<DMatrix<C64>, WishartError> {
        let parent: EdgeId = self.double.parent(e);
        let (i, j) = self.block_of_edge[parent.0];
        if i == j && !self.include_diagonal {
            return Err(WishartError::DiagonalDisabled);
        }
        if !cache.contains_key(&(i, j)) {
            let raw = self.sample_block(sample, i, j);
            let mat = if i == j {
                // exploratory diagonal dictionary: Hermitian part
                let h = (&raw + raw.adjoint()) / C64::new(2f64.sqrt(), 0.0);
                h
            } else {
                raw
            };
            cache.insert((i, j), mat);
        }
        let mat = &cache[&(i, j)];
        // `+` orientation of e{i}_{j} runs i -> j and carries A_ij; the
        // opposite orientation is the adjoint block
        let src = self.double.source(e);
        let src_index: usize = self.graph().vertex_name(src).parse::<usize>().unwrap() - 1;
        if src_index == i {
            Ok(mat.clone())
        } else {
            Ok(mat.adjoint())
        }
    }

    /// Empirical vs predicted moments, with optional spectra.
    pub fn compare(
        &self,
        q: &NCPoly,
        max_moment: usize,
        options: &CompareOptions,
    ) -> Result<CompareReport, WishartError> {
        if !q.is_self_adjoint(&self.double) {
            return Err(WishartError::NotSelfAdjoint);
        }
        let v1 = self.graph().vertex_by_name("1").expect("vertex 1");
        if !q.is_cornered_at(v1, &self.double) {
            return Err(WishartError::ShapeMismatch);
        }
        let n = self.spec.block_size(0);
        let samples = self.spec.samples;

        // predictions from the trace engine on the limit graph
        let tracer = Tracer::new(&self.double);
        let mut predicted = Vec::with_capacity(max_moment + 1);
        let mut power = NCPoly::projection(v1);
        let corner_weight = self.graph().weight_f64(v1);
        for _ in 0..=max_moment {
            predicted.push(tracer.trace_poly(&power).re / corner_weight);
            power = power.mul(q, &self.double);
        }

        // per-sample normalized trace powers, slots pre-assigned so the
        // reduction is independent of evaluation order
        let mut per_sample: Vec<Vec<f64>> = vec![vec![0.0; samples]; max_moment + 1];
        let mut eigenvalues: Vec<f64> = Vec::new();
        for s in 0..samples {
            let qn = self.evaluate(q, s as u64)?;
            let mut p = DMatrix::<C64>::identity(n, n);
            for m in 0..=max_moment {
                let tr: C64 = (0..n).map(|d| p[(d, d)]).sum();
                per_sample[m][s] = tr.re / n as f64;
                if m < max_moment {
                    p *= &qn;
                }
            }
            if options.histogram_bins > 0 {
                eigenvalues.extend(hermitian_eigenvalues(&qn));
            }
        }

        let moments: Vec<MomentComparison> = (0..=max_moment)
            .map(|m| {
                let vals = &per_sample[m];
                let mean = vals.iter().sum::<f64>() / samples as f64;
                let var = if samples > 1 {
                    vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>()
                        / (samples as f64 - 1.0)
                } else {
                    0.0
                };
                let std_err = (var / samples as f64).sqrt();
                let z_score = if std_err > 0.0 {
                    (mean - predicted[m]) / std_err
                } else {
                    0.0
                };
                MomentComparison {
                    order: m,
                    empirical: mean,
                    std_err,
                    predicted: predicted[m],
                    z_score,
                }
            })
            .collect();

        let (histogram, gap_mass, predicted_law) = if options.histogram_bins > 0 {
            let k_pred = (2 * max_moment).max(20);
            let mut power = NCPoly::projection(v1);
            let mut pred_moments = Vec::with_capacity(k_pred + 1);
            for _ in 0..=k_pred {
                pred_moments.push(tracer.trace_poly(&power).re / corner_weight);
                power = power.mul(q, &self.double);
            }
            let ms = crate::trace::MomentSeq {
                vertex: v1,
                weight: corner_weight,
                moments: pred_moments,
                exact: None,
            };
            let est = estimate_law(&ms, 1e-3, None);
            let hist = build_histogram(&eigenvalues, &est, options.histogram_bins);
            let gaps = gap_mass_fraction(&eigenvalues, &est);
            (Some(hist), Some(gaps), Some(est))
        } else {
            (None, None, None)
        };

        Ok(CompareReport {
            n,
            samples,
            seed: self.spec.seed,
            moments,
            histogram,
            gap_mass,
            predicted_law,
        })
    }
}

#[derive(Debug, Clone, Default)]
pub struct CompareOptions {
    /// 0 disables eigenvalue work entirely.
    pub histogram_bins: usize,
}

#[derive(Debug, Clone)]
pub struct MomentComparison {
    pub order: usize,
    pub empirical: f64,
    pub std_err: f64,
    pub predicted: f64,
    pub z_score: f64,
}

#[derive(Debug, Clone)]
pub struct Histogram {
    pub lo: f64,
    pub hi: f64,
    /// `(bin_lo, bin_hi, count)` triples.
    pub bins: Vec<(f64, f64, usize)>,
}

#[derive(Debug)]
pub struct CompareReport {
    pub n: usize,
    pub samples: usize,
    pub seed: u64,
    pub moments: Vec<MomentComparison>,
    pub histogram: Option<Histogram>,
    /// Fraction of eigenvalues falling outside every predicted support
    /// interval (and away from predicted atoms).
    pub gap_mass: Option<f64>,
    pub predicted_law: Option<SpectralEstimate>,
}

/// Hermitian eigenvalues through the real symmetric embedding
/// `[[Re, -Im], [Im, Re]]`, whose spectrum is the doubled spectrum.
fn hermitian_eigenvalues(m: &DMatrix<C64>) -> Vec<f64> {
    let n = m.nrows();
    let mut big = DMatrix::<f64>::zeros(2 * n, 2 * n);
    for r in 0..n {
        for c in 0..n {
            let v = m[(r, c)];
            big[(r, c)] = v.re;
            big[(r, c + n)] = -v.im;
            big[(r + n, c)] = v.im;
            big[(r + n, c + n)] = v.re;
        }
    }
    let mut eig: Vec<f64> = big.symmetric_eigen().eigenvalues.iter().cloned().collect();
    eig.sort_by(|a, b| a.partial_cmp(b).unwrap());
    // doubled spectrum: take every second value
    eig.into_iter().step_by(2).collect()
}

fn build_histogram(eigenvalues: &[f64], est: &SpectralEstimate, bins: usize) -> Histogram {
    let lo = est.grid[0];
    let hi = *est.grid.last().unwrap();
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0usize; bins];
    for &x in eigenvalues {
        if x >= lo && x < hi {
            counts[((x - lo) / width) as usize] += 1;
        }
    }
    Histogram {
        lo,
        hi,
        bins: counts
            .into_iter()
            .enumerate()
            .map(|(i, c)| (lo + width * i as f64, lo + width * (i + 1) as f64, c))
            .collect(),
    }
}

fn gap_mass_fraction(eigenvalues: &[f64], est: &SpectralEstimate) -> f64 {
    if eigenvalues.is_empty() {
        return 0.0;
    }
    let margin = 0.05;
    let inside = |x: f64| {
        est.support
            .iter()
            .any(|&(lo, hi)| x >= lo - margin && x <= hi + margin)
            || est
                .atoms
                .iter()
                .any(|a| (x - a.location).abs() <= margin)
    };
    let outside = eigenvalues.iter().filter(|&&x| !inside(x)).count();
    outside as f64 / eigenvalues.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse_expression;

    fn spec(ratios: &[i64], n: usize, samples: usize, seed: u64) -> EnsembleSpec {
        EnsembleSpec::new(
            ratios
                .iter()
                .map(|&r| BigRational::from_integer(r.into()))
                .collect(),
            n,
            samples,
            seed,
        )
        .unwrap()
    }

    #[test]
    fn ratio_validation() {
        assert!(EnsembleSpec::new(
            vec![BigRational::from_integer(2.into())],
            10,
            1,
            0
        )
        .is_err());
        assert!(EnsembleSpec::new(
            vec![
                BigRational::one(),
                BigRational::new(1.into(), 2.into())
            ],
            10,
            1,
            0
        )
        .is_err());
    }

    #[test]
    fn block_sizes_round() {
        let s = EnsembleSpec::new(
            vec![BigRational::one(), BigRational::new(3.into(), 2.into())],
            11,
            1,
            0,
        )
        .unwrap();
        assert_eq!(s.block_size(0), 11);
        assert_eq!(s.block_size(1), 17); // 16.5 rounds up
    }

    #[test]
    fn limit_graph_shapes() {
        let s = spec(&[1, 2], 10, 1, 0);
        let (g, blocks) = limit_graph(&s, false).unwrap();
        assert_eq!(g.vertex_count(), 2);
        assert_eq!(g.edge_count(), 2); // e1_2 and e2_1
        assert_eq!(blocks.len(), 2);

        let s3 = spec(&[1, 2, 5], 10, 1, 0);
        let (g3, _) = limit_graph(&s3, false).unwrap();
        assert_eq!(g3.vertex_count(), 3);
        assert_eq!(g3.edge_count(), 6);
        let one = g3.vertex_by_name("1").unwrap();
        assert_eq!(g3.weight_f64(one), 1.0);
        let three = g3.vertex_by_name("3").unwrap();
        assert_eq!(g3.weight_f64(three), 5.0);
    }

    #[test]
    fn sampling_is_deterministic() {
        let model = WishartModel::new(spec(&[1, 2], 20, 2, 42), false).unwrap();
        let a = model.sample_block(0, 0, 1);
        let b = model.sample_block(0, 0, 1);
        assert_eq!(a, b);
        // different substreams differ
        let c = model.sample_block(1, 0, 1);
        assert_ne!(a, c);
        let d = model.sample_block(0, 1, 0);
        assert_ne!(a.transpose(), d);
    }

    #[test]
    fn entry_variance_matches_covariance() {
        let model = WishartModel::new(spec(&[1, 2], 60, 1, 7), false).unwrap();
        let m = model.sample_block(0, 0, 1);
        let (mi, mj) = (m.nrows(), m.ncols());
        let target = 1.0 / ((mi as f64 * mj as f64).sqrt());
        let avg: f64 = m.iter().map(|z| z.norm_sqr()).sum::<f64>() / (mi * mj) as f64;
        let tol = 3.0 * target / ((mi * mj) as f64).sqrt();
        assert!(
            (avg - target).abs() <= tol,
            "avg {avg}, target {target}, tol {tol}"
        );
    }

    #[test]
    fn first_moment_matches_sqrt2() {
        let model = WishartModel::new(spec(&[1, 2], 100, 20, 5), false).unwrap();
        let q = parse_expression("X[e1_2;1->2]*X[e1_2;2->1]", model.graph_double()).unwrap();
        let report = model.compare(&q, 1, &CompareOptions::default()).unwrap();
        let m1 = &report.moments[1];
        assert!((m1.predicted - 2f64.sqrt()).abs() < 1e-12);
        assert!(
            (m1.empirical - m1.predicted).abs() <= 3.0 * m1.std_err.max(1e-4),
            "empirical {} predicted {} se {}",
            m1.empirical,
            m1.predicted,
            m1.std_err
        );
    }

    #[test]
    fn shape_validation() {
        let model = WishartModel::new(spec(&[1, 2], 10, 1, 1), false).unwrap();
        let dd = model.graph_double();
        // not cornered at vertex 1
        let q = parse_expression("X[e1_2;2->1]*X[e1_2;1->2]", dd).unwrap();
        assert!(matches!(
            model.compare(&q, 1, &CompareOptions::default()),
            Err(WishartError::ShapeMismatch)
        ));
        // not self-adjoint
        let q2 = parse_expression("X[e1_2;1->2]*X[e2_1;2->1]", dd).unwrap();
        assert!(matches!(
            model.compare(&q2, 1, &CompareOptions::default()),
            Err(WishartError::NotSelfAdjoint)
        ));
    }

    #[test]
    fn histogram_and_gap_mass() {
        let model = WishartModel::new(spec(&[1, 2], 40, 4, 3), false).unwrap();
        let q = parse_expression("X[e1_2;1->2]*X[e1_2;2->1]", model.graph_double()).unwrap();
        let report = model
            .compare(&q, 2, &CompareOptions { histogram_bins: 40 })
            .unwrap();
        let hist = report.histogram.expect("histogram");
        let total: usize = hist.bins.iter().map(|b| b.2).sum();
        assert_eq!(total, 40 * 4);
        assert!(report.gap_mass.unwrap() <= 0.1);
    }

    #[test]
    fn hermitian_eigen_embedding() {
        let m = DMatrix::<C64>::from_row_slice(
            2,
            2,
            &[
                C64::new(1.0, 0.0),
                C64::new(0.0, -1.0),
                C64::new(0.0, 1.0),
                C64::new(1.0, 0.0),
            ],
        );
        let mut eig = hermitian_eigenvalues(&m);
        eig.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(eig.len(), 2);
        assert!((eig[0] - 0.0).abs() < 1e-12);
        assert!((eig[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn diagonal_blocks_gated() {
        let model = WishartModel::new(spec(&[1, 1], 10, 1, 1), true).unwrap();
        assert_eq!(model.graph().edge_count(), 4); // two parallel + two loops
        let q = parse_expression("X[e1_1]^2", model.graph_double()).unwrap();
        let report = model.compare(&q, 1, &CompareOptions::default()).unwrap();
        // Tr(X^2) = mu(1) = 1 in the limit
        assert!((report.moments[1].predicted - 1.0).abs() < 1e-12);

        let gated = WishartModel::new(spec(&[1, 1], 10, 1, 1), false).unwrap();
        assert!(gated.graph().edge_by_name("e1_1").is_err());
    }
}
