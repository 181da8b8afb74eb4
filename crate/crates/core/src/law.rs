//! Spectral laws from moment sequences.
//!
//! The Cauchy transform of the (unnormalized) law behind a moment
//! sequence is evaluated through its Jacobi continued fraction
//!
//! ```text
//! G(z) = b0 / (z - a0 - b1 / (z - a1 - ... ))
//! ```
//!
//! whose coefficients come from the classical moment recurrence. That
//! recurrence is violently ill-conditioned in floating point, so it is
//! run in exact rational arithmetic on the exactly-converted input
//! moments (every finite f64 is a rational); only evaluation happens in
//! floats. A vanishing `b_k` is an exact termination (the measure is
//! supported on k points); a negative one means the rounded sequence
//! admits no measure beyond that level, so the positive levels are kept
//! and the result is flagged unstable. With no usable levels the
//! evaluator degrades to the truncated power sum.
//!
//! Densities come from Stieltjes inversion `density = |Im G(x+ih)|/pi`
//! on a grid; support intervals are maximal runs above a relative
//! threshold; atoms are probed by the `h*Im G` mass test with one
//! Richardson step in `h` and a local refinement of the location.
//!
//! The reference law of a corner element `X_e* X_e` on a non-loop edge
//! is Marchenko-Pastur shaped with an explicit density, and an atom at
//! zero exactly when the corner vertex outweighs the far endpoint; its
//! moments are integrated by adaptive quadrature after the
//! trigonometric substitution that removes both edge singularities.
//!
//! `find_algebraic_relation` searches for polynomials `Q_j(z)` of
//! bounded degree making `sum_j Q_j(z) G(z)^j` vanish to the available
//! series order, by a singular-value split of the coefficient-matching
//! system; any returned relation is certified by substituting the
//! series back in, never assumed from the solver.

use num_complex::Complex;
use num_rational::BigRational;
use num_traits::{Signed, Zero};
use thiserror::Error;

use crate::graph::{DirectedDouble, OrientedEdgeId, WeightedGraph};
use crate::rational::to_f64;
use crate::trace::MomentSeq;

pub type C64 = Complex<f64>;

#[derive(Debug, Error, PartialEq)]
pub enum LawError {
    #[error("the reference law is defined for non-loop edges only")]
    LoopEdge,
    #[error("need at least {needed} moments, got {got}")]
    NotEnoughMoments { needed: usize, got: usize },
}

/// Jacobi (three-term recurrence) coefficients of a moment sequence.
#[derive(Debug, Clone)]
pub struct JacobiCoeffs {
    /// `alphas[k]` is the k-th diagonal coefficient.
    pub alphas: Vec<f64>,
    /// `betas[0]` is the total mass `m_0`; `betas[k]` for k >= 1 the
    /// off-diagonal squares, all strictly positive.
    pub betas: Vec<f64>,
    /// The measure is exactly the `alphas.len()`-point quadrature.
    pub terminated: bool,
    /// Positivity was lost before exhausting the moments.
    pub unstable: bool,
}

impl JacobiCoeffs {
    pub fn levels(&self) -> usize {
        self.alphas.len()
    }

    /// Exact-rational moment recurrence. `moments` is `m_0..=m_K`.
    pub fn from_exact(moments: &[BigRational]) -> JacobiCoeffs {
        let k_max = moments.len() - 1;
        let n = (k_max + 1) / 2;
        let mut alphas: Vec<BigRational> = Vec::new();
        let mut betas: Vec<BigRational> = vec![moments[0].clone()];
        let mut terminated = false;
        let mut unstable = false;
        if n == 0 || moments[0].is_zero() {
            return JacobiCoeffs {
                alphas: vec![],
                betas: betas.iter().map(to_f64).collect(),
                terminated: true,
                unstable: false,
            };
        }
        alphas.push(&moments[1] / &moments[0]);
        // sigma rows: prev = sigma_{k-2}, curr = sigma_{k-1}, indexed by l
        let width = 2 * n;
        let mut prev: Vec<BigRational> = vec![BigRational::zero(); width];
        let mut curr: Vec<BigRational> = moments[..width.min(moments.len())].to_vec();
        curr.resize(width, BigRational::zero());
        for k in 1..n {
            let mut next: Vec<BigRational> = vec![BigRational::zero(); width];
            for l in k..(2 * n - k) {
                let mut v = curr[l + 1].clone();
                v -= &alphas[k - 1] * &curr[l];
                if k >= 2 {
                    v -= &betas[k - 1] * &prev[l];
                }
                next[l] = v;
            }
            let norm_prev = if k == 1 { &moments[0] } else { &curr[k - 1] };
            let norm = next[k].clone();
            if norm.is_zero() {
                terminated = true;
                break;
            }
            if norm.is_negative() {
                unstable = true;
                break;
            }
            betas.push(&norm / norm_prev);
            alphas.push(&next[k + 1] / &next[k] - &curr[k] / norm_prev);
            prev = curr;
            curr = next;
        }
        JacobiCoeffs {
            alphas: alphas.iter().map(to_f64).collect(),
            betas: betas.iter().map(to_f64).collect(),
            terminated,
            unstable,
        }
    }

    /// Convert f64 moments exactly and run the exact recurrence. For
    /// float-sourced moments the deep coefficients are dominated by the
    /// input rounding (they reproduce the rounded sequence exactly, but
    /// that sequence no longer pins the law), so they are cut at the
    /// stabilization valley.
    pub fn from_moments(ms: &MomentSeq) -> JacobiCoeffs {
        if let Some(exact) = &ms.exact {
            JacobiCoeffs::from_exact(exact)
        } else {
            let exact: Vec<BigRational> = ms
                .moments
                .iter()
                .map(|m| BigRational::from_float(*m).expect("finite moments"))
                .collect();
            JacobiCoeffs::from_exact(&exact).stabilized()
        }
    }

    /// Keep levels up to the last point where consecutive recurrence
    /// coefficients have settled. The jump profile of a law from this
    /// family decays geometrically and then rises again once rounding
    /// noise takes over; the valley is the trustworthy depth.
    fn stabilized(mut self) -> JacobiCoeffs {
        let l = self.alphas.len();
        if self.terminated || l < 4 {
            return self;
        }
        let sa = self.alphas.iter().fold(1.0f64, |m, a| m.max(a.abs()));
        let sb = self.betas[1..].iter().fold(1.0f64, |m, b| m.max(b.abs()));
        let jumps: Vec<(usize, f64)> = (2..l)
            .map(|k| {
                let j = (self.alphas[k] - self.alphas[k - 1]).abs() / sa
                    + (self.betas[k] - self.betas[k - 1]).abs() / sb;
                (k, j)
            })
            .collect();
        let min_jump = jumps.iter().map(|&(_, j)| j).fold(f64::INFINITY, f64::min);
        let cutoff = 2.0 * min_jump + 1e-13;
        let k_star = jumps
            .iter()
            .rev()
            .find(|&&(_, j)| j <= cutoff)
            .map(|&(k, _)| k)
            .unwrap_or(l - 1);
        self.alphas.truncate(k_star + 1);
        self.betas.truncate(k_star + 1);
        self
    }

    /// Continued-fraction evaluation, backward recurrence. Exact for
    /// terminated (finitely atomic) sequences.
    pub fn eval_finite(&self, z: C64) -> C64 {
        let levels = self.alphas.len();
        if levels == 0 {
            return C64::new(0.0, 0.0);
        }
        let mut t = z - self.alphas[levels - 1];
        for k in (1..levels).rev() {
            t = z - self.alphas[k - 1] - self.betas[k] / t;
        }
        self.betas[0] / t
    }

    /// Tail coefficients for the square-root terminator: the mean of
    /// the last few recurrence coefficients. `None` when the sequence
    /// terminated (no tail) or has too few levels.
    fn tail_params(&self) -> Option<(f64, f64)> {
        if self.terminated || self.alphas.len() < 2 || self.betas.len() < 2 {
            return None;
        }
        let na = self.alphas.len().min(3);
        let a_hat = self.alphas[self.alphas.len() - na..].iter().sum::<f64>() / na as f64;
        let off = &self.betas[1..];
        let nb = off.len().min(3);
        let b_hat = off[off.len() - nb..].iter().sum::<f64>() / nb as f64;
        Some((a_hat, b_hat))
    }

    /// Continued-fraction evaluation closed with the self-similar
    /// square-root tail for the stabilized coefficients: the tail `t`
    /// solves `t = z - a - b/t` with the Herglotz (larger-modulus)
    /// root. For measures whose recurrence coefficients become constant
    /// (one bulk interval plus finitely many atoms) this analytically
    /// continues the transform right up to the support, which is what
    /// Stieltjes inversion at small `h` requires; a plain finite
    /// fraction would only see its quadrature nodes there.
    pub fn eval(&self, z: C64) -> C64 {
        let Some((a_hat, b_hat)) = self.tail_params() else {
            return self.eval_finite(z);
        };
        let levels = self.alphas.len();
        let w = z - a_hat;
        let s = (w * w - 4.0 * b_hat).sqrt();
        let t_plus = (w + s) * 0.5;
        let t_minus = (w - s) * 0.5;
        let mut t = if t_plus.norm() >= t_minus.norm() {
            t_plus
        } else {
            t_minus
        };
        // attach the tail under the deepest computed level
        t = z - self.alphas[levels - 1] - b_hat / t;
        for k in (1..levels).rev() {
            t = z - self.alphas[k - 1] - self.betas[k] / t;
        }
        self.betas[0] / t
    }
}

/// Truncated Cauchy transform of a moment sequence, evaluated through
/// the continued fraction when possible.
#[derive(Debug, Clone)]
pub struct CauchySeries {
    pub moments: Vec<f64>,
    pub mass: f64,
    pub jacobi: JacobiCoeffs,
}

impl CauchySeries {
    pub fn from_moments(ms: &MomentSeq) -> CauchySeries {
        CauchySeries {
            moments: ms.moments.clone(),
            mass: ms.moments[0],
            jacobi: JacobiCoeffs::from_moments(ms),
        }
    }

    /// Plain truncated sum `sum m_k / z^{k+1}`; only trustworthy well
    /// outside the support.
    pub fn eval_truncated_sum(&self, z: C64) -> C64 {
        let inv = 1.0 / z;
        let mut acc = C64::new(0.0, 0.0);
        let mut p = inv;
        for &m in &self.moments {
            acc += p * m;
            p *= inv;
        }
        acc
    }

    pub fn eval(&self, z: C64) -> C64 {
        if self.jacobi.levels() == 0 {
            self.eval_truncated_sum(z)
        } else {
            self.jacobi.eval(z)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Atom {
    pub location: f64,
    pub mass: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct GridSpec {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
}

/// Density samples, detected support, detected atoms and optionally a
/// certified algebraic relation for the transform.
#[derive(Debug, Clone)]
pub struct SpectralEstimate {
    pub grid: Vec<f64>,
    pub density: Vec<f64>,
    pub eta: f64,
    pub support: Vec<(f64, f64)>,
    pub atoms: Vec<Atom>,
    pub relation: Option<AlgebraicRelation>,
    pub mass: f64,
    pub jacobi_levels: usize,
    pub jacobi_unstable: bool,
    /// The transform the estimate was sampled from, for off-grid
    /// evaluation (edge-refined quadrature, atom follow-ups).
    pub cauchy: CauchySeries,
}

/// Default grid from the moment growth bound: support radius is
/// estimated by the highest even normalized moment root, widened by the
/// safety factor 1.5 and an absolute margin of 0.5.
pub fn default_grid(ms: &MomentSeq) -> GridSpec {
    let m0 = ms.moments[0];
    let mut radius: f64 = 1.0;
    let mut j = ms.moments.len() - 1;
    if j % 2 == 1 {
        j -= 1;
    }
    if j >= 2 {
        radius = (ms.moments[j].abs() / m0).powf(1.0 / j as f64).max(1e-6);
    }
    GridSpec {
        lo: -1.5 * radius - 0.5,
        hi: 1.5 * radius + 0.5,
        points: 2000,
    }
}

/// Stieltjes inversion with support and atom detection.
pub fn estimate_law(ms: &MomentSeq, eta: f64, grid: Option<GridSpec>) -> SpectralEstimate {
    assert!(eta > 0.0);
    let spec = grid.unwrap_or_else(|| default_grid(ms));
    let cauchy = CauchySeries::from_moments(ms);
    let n = spec.points.max(2);
    let step = (spec.hi - spec.lo) / (n - 1) as f64;
    let grid: Vec<f64> = (0..n).map(|i| spec.lo + step * i as f64).collect();
    let density: Vec<f64> = grid
        .iter()
        .map(|&x| cauchy.eval(C64::new(x, eta)).im.abs() / std::f64::consts::PI)
        .collect();

    // support: runs above the relative threshold, merging short gaps
    let max_density = density.iter().cloned().fold(0.0, f64::max);
    let tau = 1e-2 * max_density;
    let mut support: Vec<(usize, usize)> = Vec::new();
    let mut run: Option<usize> = None;
    for (i, &d) in density.iter().enumerate() {
        if d > tau {
            if run.is_none() {
                run = Some(i);
            }
        } else if let Some(start) = run.take() {
            support.push((start, i - 1));
        }
    }
    if let Some(start) = run {
        support.push((start, n - 1));
    }
    let mut merged: Vec<(usize, usize)> = Vec::new();
    for (s, e) in support {
        match merged.last_mut() {
            Some((_, pe)) if s <= *pe + 3 => *pe = e,
            _ => merged.push((s, e)),
        }
    }
    let support: Vec<(f64, f64)> = merged
        .iter()
        .map(|&(s, e)| (grid[s], grid[e]))
        .collect();

    let atoms = probe_atoms(&cauchy, &grid, step, eta, ms.moments[0]);

    SpectralEstimate {
        grid,
        density,
        eta,
        support,
        atoms,
        relation: None,
        mass: ms.moments[0],
        jacobi_levels: cauchy.jacobi.levels(),
        jacobi_unstable: cauchy.jacobi.unstable,
        cauchy,
    }
}

/// Atom probe at a refined location. The signal `a(h) = h |Im G(x+ih)|`
/// tends to the atom mass; on continuous spectrum it decays like h, and
/// at a hard square-root edge like sqrt(h). The decay ratio over two
/// halvings separates those cases, and a Richardson step on the two
/// finest values removes the leading smooth background from the mass.
fn probe_mass(cauchy: &CauchySeries, x: f64, eta: f64) -> Option<f64> {
    let a1 = eta * cauchy.eval(C64::new(x, eta)).im.abs();
    let a2 = (eta / 2.0) * cauchy.eval(C64::new(x, eta / 2.0)).im.abs();
    let a4 = (eta / 4.0) * cauchy.eval(C64::new(x, eta / 4.0)).im.abs();
    if a1 <= 0.0 || a4 / a1 < 0.8 {
        return None;
    }
    Some(2.0 * a4 - a2)
}

fn probe_atoms(
    cauchy: &CauchySeries,
    grid: &[f64],
    step: f64,
    eta: f64,
    mass: f64,
) -> Vec<Atom> {
    let threshold = 0.01 * mass.max(1.0);
    let raw: Vec<f64> = grid
        .iter()
        .map(|&x| eta * cauchy.eval(C64::new(x, eta)).im.abs())
        .collect();
    let mut atoms: Vec<Atom> = Vec::new();
    for i in 0..grid.len() {
        let left = if i == 0 { -1.0 } else { raw[i - 1] };
        let right = if i + 1 == grid.len() { -1.0 } else { raw[i + 1] };
        if raw[i] < threshold || raw[i] < left || raw[i] < right {
            continue;
        }
        // local maximum of the raw mass signal: refine the location by
        // ternary search on the smoothed transform
        let mut lo = grid[i] - step;
        let mut hi = grid[i] + step;
        for _ in 0..80 {
            let m1 = lo + (hi - lo) / 3.0;
            let m2 = hi - (hi - lo) / 3.0;
            let f1 = cauchy.eval(C64::new(m1, eta)).im.abs();
            let f2 = cauchy.eval(C64::new(m2, eta)).im.abs();
            if f1 < f2 {
                lo = m1;
            } else {
                hi = m2;
            }
        }
        let x = 0.5 * (lo + hi);
        let Some(m) = probe_mass(cauchy, x, eta) else {
            continue;
        };
        if m > threshold {
            match atoms.last_mut() {
                Some(prev) if (prev.location - x).abs() < 2.0 * step => {
                    if m > prev.mass {
                        *prev = Atom { location: x, mass: m };
                    }
                }
                _ => atoms.push(Atom { location: x, mass: m }),
            }
        }
    }
    atoms
}

impl SpectralEstimate {
    /// k-th moment of the estimated law: trapezoid over the sampled
    /// density. Atom spikes are part of the smoothed density, so they
    /// are not added separately.
    pub fn moment(&self, k: u32) -> f64 {
        let mut acc = 0.0;
        for w in self.grid.windows(2) {
            let i = w[0];
            let j = w[1];
            let di = self.density_at_index(i);
            let dj = self.density_at_index(j);
            acc += 0.5 * (i.powi(k as i32) * di + j.powi(k as i32) * dj) * (j - i);
        }
        acc
    }

    fn density_at_index(&self, x: f64) -> f64 {
        // grid is uniform; invert the index
        let step = self.grid[1] - self.grid[0];
        let idx = ((x - self.grid[0]) / step).round() as usize;
        self.density[idx.min(self.density.len() - 1)]
    }

    /// Integral of the density over one detected interval.
    pub fn interval_measure(&self, interval: (f64, f64)) -> f64 {
        let mut acc = 0.0;
        for w in self.grid.windows(2) {
            if w[0] >= interval.0 - 1e-12 && w[1] <= interval.1 + 1e-12 {
                acc += 0.5
                    * (self.density_at_index(w[0]) + self.density_at_index(w[1]))
                    * (w[1] - w[0]);
            }
        }
        acc
    }
}

/// Outcome of the log-moment quadrature over a positive-element law.
#[derive(Debug, Clone)]
pub struct LogMoment {
    /// `-inf` when an atom sits at zero.
    pub value: f64,
    pub atom_at_zero: Option<f64>,
    pub eta: f64,
}

/// Quadrature of `log t` against the estimated law on the positive
/// axis. An atom at (numerically) zero forces the sentinel. The
/// integrand is evaluated off-grid through the stored transform: the
/// coarse grid cannot resolve the integrable log singularity that a
/// hard edge at zero produces.
pub fn log_moment(est: &SpectralEstimate) -> LogMoment {
    let step = est.grid[1] - est.grid[0];
    for atom in &est.atoms {
        if atom.location.abs() <= 2.0 * step {
            return LogMoment {
                value: f64::NEG_INFINITY,
                atom_at_zero: Some(atom.mass),
                eta: est.eta,
            };
        }
    }
    let hi = (*est.grid.last().unwrap()).max(1e-6);
    let raw = |eta: f64| {
        let f =
            |x: f64| x.ln() * est.cauchy.eval(C64::new(x, eta)).im.abs() / std::f64::consts::PI;
        // density off the support is negligible, so integrating the
        // whole positive window is the support integral with better
        // edge handling
        adaptive_simpson(&f, 1e-9, hi, 1e-9, 48)
    };
    // a hard x^{-1/2} edge biases the smoothed integral by O(sqrt(eta));
    // one Richardson step in sqrt(eta) removes it (and is harmless for
    // soft edges, where the bias is already O(eta))
    let v1 = raw(est.eta);
    let v2 = raw(est.eta / 2.0);
    let s = 2f64.sqrt();
    let value = (s * v2 - v1) / (s - 1.0);
    LogMoment {
        value,
        atom_at_zero: None,
        eta: est.eta,
    }
}

/// The reference law of the corner element attached to a non-loop
/// oriented edge: Marchenko-Pastur-shaped density on
/// `[a^2 + a^-2 - 2, a^2 + a^-2 + 2]` with corner mass `mu(t)`, plus
/// the atom `(mu(t) - mu(s))^+ delta_0`.
#[derive(Debug, Clone)]
pub struct FreePoissonLaw {
    pub amplitude: f64,
    pub weight_far: f64,
    pub weight_corner: f64,
    pub support: (f64, f64),
    pub atom_mass: f64,
    /// Corner weight is at least the far weight (atom present).
    pub corner_is_heavy: bool,
}

pub fn free_poisson_reference(
    dd: &DirectedDouble,
    e: OrientedEdgeId,
) -> Result<FreePoissonLaw, LawError> {
    if dd.is_loop(e) {
        return Err(LawError::LoopEdge);
    }
    let g = dd.graph();
    let ws = g.weight_f64(dd.source(e));
    let wt = g.weight_f64(dd.target(e));
    let a = dd.amplitude(e);
    let c = a * a + 1.0 / (a * a);
    Ok(FreePoissonLaw {
        amplitude: a,
        weight_far: ws,
        weight_corner: wt,
        support: (c - 2.0, c + 2.0),
        atom_mass: (wt - ws).max(0.0),
        corner_is_heavy: wt >= ws,
    })
}

impl FreePoissonLaw {
    /// Absolutely continuous density at `x` (zero outside the support).
    pub fn density(&self, x: f64) -> f64 {
        if x <= self.support.0 || x >= self.support.1 || x == 0.0 {
            return 0.0;
        }
        let a2 = self.amplitude * self.amplitude;
        let disc = 4.0 * a2 * x - (a2 * a2 - 1.0 - a2 * x).powi(2);
        if disc <= 0.0 {
            return 0.0;
        }
        self.weight_corner * disc.sqrt() / (2.0 * std::f64::consts::PI * x)
    }

    /// k-th moment including the atom, by adaptive quadrature after the
    /// substitution `x = c + 2 cos(theta)` (the edge singularities
    /// become a smooth `sin^2`).
    pub fn moment(&self, k: u32) -> f64 {
        let a2 = self.amplitude * self.amplitude;
        let c = a2 + 1.0 / a2;
        let w = self.weight_corner;
        let scale = 2.0 * w * a2 / std::f64::consts::PI;
        let f = |theta: f64| {
            let x = c + 2.0 * theta.cos();
            let s = theta.sin();
            if k == 0 {
                // sin^2/x has the finite limit (1 - cos)/2 at the hard
                // edge x -> 0 (only reachable when c = 2)
                if x < 1e-12 {
                    scale * (1.0 - theta.cos()) / 2.0
                } else {
                    scale * s * s / x
                }
            } else {
                scale * s * s * x.powi(k as i32 - 1)
            }
        };
        let cont = adaptive_simpson(&f, 0.0, std::f64::consts::PI, 1e-11, 40);
        if k == 0 {
            cont + self.atom_mass
        } else {
            cont
        }
    }

    pub fn total_mass(&self) -> f64 {
        self.moment(0)
    }

    /// `int log(t) d(law)` over the continuous part; `-inf` with a
    /// zero atom present.
    pub fn log_moment(&self) -> f64 {
        if self.atom_mass > 0.0 {
            return f64::NEG_INFINITY;
        }
        let a2 = self.amplitude * self.amplitude;
        let c = a2 + 1.0 / a2;
        let w = self.weight_corner;
        let f = |theta: f64| {
            let x = c + 2.0 * theta.cos();
            let s = theta.sin();
            2.0 * w * a2 / std::f64::consts::PI * s * s * x.ln() / x
        };
        // at a hard edge (c = 2) the integrand diverges logarithmically
        // at theta = pi; stop just short, the tail is O(1e-6)
        adaptive_simpson(&f, 0.0, std::f64::consts::PI - 1e-7, 1e-11, 40)
    }
}

/// Adaptive Simpson quadrature with absolute tolerance. A minimum
/// bisection depth is enforced: trigonometric integrands can produce
/// coincidentally equal coarse and refined estimates, which would fool
/// the error test at the top level.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
    let c = 0.5 * (a + b);
    let fa = f(a);
    let fb = f(b);
    let fc = f(c);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fc + fb);
    simpson_recurse(f, a, b, fa, fb, fc, whole, tol, depth, 5)
}

#[allow(clippy::too_many_arguments)]
fn simpson_recurse<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fb: f64,
    fc: f64,
    whole: f64,
    tol: f64,
    depth: u32,
    forced: u32,
) -> f64 {
    let c = 0.5 * (a + b);
    let d = 0.5 * (a + c);
    let e = 0.5 * (c + b);
    let fd = f(d);
    let fe = f(e);
    let left = (c - a) / 6.0 * (fa + 4.0 * fd + fc);
    let right = (b - c) / 6.0 * (fc + 4.0 * fe + fb);
    if depth == 0 || (forced == 0 && (left + right - whole).abs() <= 15.0 * tol) {
        left + right + (left + right - whole) / 15.0
    } else {
        let forced = forced.saturating_sub(1);
        simpson_recurse(f, a, c, fa, fc, fd, left, tol / 2.0, depth - 1, forced)
            + simpson_recurse(f, c, b, fc, fb, fe, right, tol / 2.0, depth - 1, forced)
    }
}

/// A bivariate relation `sum_j Q_j(z) G^j = 0` with `deg Q_j <= deg_z`.
#[derive(Debug, Clone)]
pub struct AlgebraicRelation {
    pub deg_g: usize,
    pub deg_z: usize,
    /// `coeffs[j][i]` is the z^i coefficient of Q_j; normalized so the
    /// largest entry is exactly 1.
    pub coeffs: Vec<Vec<f64>>,
    /// Certified substitution residual of the scaled system.
    pub residual: f64,
}

impl AlgebraicRelation {
    pub fn human_readable(&self) -> String {
        let mut parts = Vec::new();
        for (j, q) in self.coeffs.iter().enumerate().rev() {
            let terms: Vec<String> = q
                .iter()
                .enumerate()
                .filter(|(_, c)| c.abs() > 1e-10)
                .map(|(i, c)| match i {
                    0 => format!("{c:.6}"),
                    1 => format!("{c:.6}*z"),
                    _ => format!("{c:.6}*z^{i}"),
                })
                .collect();
            if terms.is_empty() {
                continue;
            }
            let qs = terms.join(" + ");
            match j {
                0 => parts.push(format!("({qs})")),
                1 => parts.push(format!("({qs})*G")),
                _ => parts.push(format!("({qs})*G^{j}")),
            }
        }
        format!("{} = 0", parts.join(" + "))
    }
}

/// Search for a minimal algebraic relation annihilating the truncated
/// transform, in increasing `deg G` then increasing `deg z`.
pub fn find_algebraic_relation(
    ms: &MomentSeq,
    max_deg_z: usize,
    max_deg_g: usize,
) -> Result<Option<AlgebraicRelation>, LawError> {
    let k = ms.k_max();
    let needed = (max_deg_z + 1) * (max_deg_g + 1);
    if k < needed {
        return Err(LawError::NotEnoughMoments {
            needed,
            got: k,
        });
    }
    // g(w) = sum m_k w^{k+1}, exact to order K+1 inclusive
    let order = k + 2;
    let mut g = vec![0.0; order];
    for (i, m) in ms.moments.iter().enumerate() {
        g[i + 1] = *m;
    }
    // powers of g, truncated
    let mut powers: Vec<Vec<f64>> = vec![vec![0.0; order]; max_deg_g + 1];
    powers[0][0] = 1.0;
    for j in 1..=max_deg_g {
        let (done, rest) = powers.split_at_mut(j);
        let prev = &done[j - 1];
        let cur = &mut rest[0];
        for a in 0..order {
            if prev[a] == 0.0 {
                continue;
            }
            for b in 0..order - a {
                cur[a + b] += prev[a] * g[b];
            }
        }
    }
    for dg in 1..=max_deg_g {
        for dz in 0..=max_deg_z {
            let unknowns = (dg + 1) * (dz + 1);
            if unknowns + 2 > order {
                continue;
            }
            if let Some(rel) = try_relation(&powers, order, dg, dz) {
                return Ok(Some(rel));
            }
        }
    }
    Ok(None)
}

fn try_relation(
    powers: &[Vec<f64>],
    order: usize,
    dg: usize,
    dz: usize,
) -> Option<AlgebraicRelation> {
    let unknowns = (dg + 1) * (dz + 1);
    // row l: coefficient of w^l in sum q_{ji} w^{dz - i} g^j
    let mut a = nalgebra::DMatrix::<f64>::zeros(order, unknowns);
    for j in 0..=dg {
        for i in 0..=dz {
            let col = j * (dz + 1) + i;
            let shift = dz - i;
            for l in shift..order {
                a[(l, col)] = powers[j][l - shift];
            }
        }
    }
    // column scaling for a meaningful singular-value threshold
    let mut scales = vec![1.0; unknowns];
    for c in 0..unknowns {
        let norm = a.column(c).norm();
        if norm > 0.0 {
            scales[c] = norm;
            for l in 0..order {
                a[(l, c)] /= norm;
            }
        }
    }
    let svd = a.clone().svd(false, true);
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let (idx, &smin) = svd
        .singular_values
        .iter()
        .enumerate()
        .min_by(|x, y| x.1.partial_cmp(y.1).unwrap())?;
    if smax == 0.0 || smin / smax > 1e-8 {
        return None;
    }
    let vt = svd.v_t?;
    let v = vt.row(idx).transpose();
    // certify by explicit substitution in the scaled system
    let residual = (&a * &v).norm();
    if residual > 1e-8 * smax.max(1.0) {
        return None;
    }
    // unscale and normalize the largest coefficient to exactly 1
    let mut coeffs = vec![vec![0.0; dz + 1]; dg + 1];
    let mut best = 0.0f64;
    let mut best_val = 1.0;
    for j in 0..=dg {
        for i in 0..=dz {
            let col = j * (dz + 1) + i;
            let q = v[col] / scales[col];
            coeffs[j][i] = q;
            if q.abs() > best {
                best = q.abs();
                best_val = q;
            }
        }
    }
    if best == 0.0 {
        return None;
    }
    for row in &mut coeffs {
        for q in row.iter_mut() {
            *q /= best_val;
        }
    }
    Some(AlgebraicRelation {
        deg_g: dg,
        deg_z: dz,
        coeffs,
        residual,
    })
}

/// Advisory arithmetic check: each detected support interval should
/// carry measure close to an integer combination of the vertex weights
/// inside `(0, mu(base)]`.
#[derive(Debug, Clone)]
pub struct SupportArithmetic {
    pub intervals: Vec<IntervalMeasure>,
    pub tolerance: f64,
}

#[derive(Debug, Clone)]
pub struct IntervalMeasure {
    pub interval: (f64, f64),
    pub measure: f64,
    pub nearest_lattice: Option<f64>,
    pub within_tolerance: bool,
}

pub fn check_support_arithmetic(
    est: &SpectralEstimate,
    g: &WeightedGraph,
    base: crate::graph::VertexId,
) -> SupportArithmetic {
    let mu = g.weight_f64(base);
    let tolerance = 0.05 * mu;
    // Z-combinations of weights with bounded coefficients, kept in (0, mu]
    let weights: Vec<f64> = g.vertex_ids().map(|v| g.weight_f64(v)).collect();
    let bound: i64 = if weights.len() <= 5 { 8 } else { 3 };
    let mut lattice: Vec<f64> = Vec::new();
    let mut stack = vec![(0usize, 0.0f64)];
    while let Some((i, acc)) = stack.pop() {
        if i == weights.len() {
            if acc > 1e-12 && acc <= mu + 1e-9 {
                lattice.push(acc);
            }
            continue;
        }
        for n in -bound..=bound {
            stack.push((i + 1, acc + n as f64 * weights[i]));
        }
    }
    lattice.sort_by(|a, b| a.partial_cmp(b).unwrap());
    lattice.dedup_by(|a, b| (*a - *b).abs() < 1e-12);

    let intervals = est
        .support
        .iter()
        .map(|&iv| {
            let measure = est.interval_measure(iv);
            let nearest = lattice
                .iter()
                .min_by(|a, b| {
                    (*a - measure)
                        .abs()
                        .partial_cmp(&(*b - measure).abs())
                        .unwrap()
                })
                .copied();
            IntervalMeasure {
                interval: iv,
                measure,
                nearest_lattice: nearest,
                within_tolerance: nearest
                    .map(|l| (l - measure).abs() <= tolerance)
                    .unwrap_or(false),
            }
        })
        .collect();
    SupportArithmetic {
        intervals,
        tolerance,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_directed_double, VertexId};
    use crate::ncpoly::NCPoly;
    use crate::trace::{moments, Tracer};

    fn catalan_moments(k_max: usize) -> MomentSeq {
        let g = crate::graph::WeightedGraph::parse_str("vertex a 1\nedge l a a\n").unwrap();
        let dd = build_directed_double(&g);
        let a = dd.graph().vertex_by_name("a").unwrap();
        let e = dd.oriented_by_name("l+").unwrap();
        moments(&dd, &NCPoly::edge_generator(&dd, e), a, k_max).unwrap()
    }

    #[test]
    fn jacobi_of_semicircle_is_free() {
        let ms = catalan_moments(20);
        let j = JacobiCoeffs::from_moments(&ms);
        assert!(!j.unstable);
        assert!(j.levels() >= 10);
        for a in &j.alphas {
            assert!(a.abs() < 1e-12);
        }
        assert!((j.betas[0] - 1.0).abs() < 1e-12);
        for b in &j.betas[1..] {
            assert!((b - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn jacobi_of_projection_terminates() {
        // law = delta_1 with mass 2
        let ms = MomentSeq {
            vertex: VertexId(0),
            weight: 2.0,
            moments: vec![2.0; 9],
            exact: None,
        };
        let j = JacobiCoeffs::from_moments(&ms);
        assert!(j.terminated);
        assert_eq!(j.levels(), 1);
        let g = j.eval(C64::new(3.0, 0.0));
        assert!((g.re - 1.0).abs() < 1e-12); // 2/(3-1)
    }

    #[test]
    fn herglotz_sign_on_grid() {
        let ms = catalan_moments(24);
        let c = CauchySeries::from_moments(&ms);
        for i in 0..100 {
            let x = -3.0 + 6.0 * i as f64 / 99.0;
            assert!(c.eval(C64::new(x, 1e-3)).im < 0.0);
        }
    }

    #[test]
    fn semicircle_density_from_inversion() {
        let ms = catalan_moments(40);
        let est = estimate_law(&ms, 1e-3, None);
        // compare against sqrt(4-x^2)/(2 pi) away from the edges
        for (x, d) in est.grid.iter().zip(est.density.iter()) {
            if x.abs() <= 1.8 {
                let truth = (4.0 - x * x).sqrt() / (2.0 * std::f64::consts::PI);
                assert!(
                    (d - truth).abs() <= 0.01,
                    "x = {x}, density {d}, truth {truth}"
                );
            }
        }
        assert_eq!(est.support.len(), 1);
        assert!(est.support[0].0 > -2.2 && est.support[0].0 < -1.8);
        assert!(est.support[0].1 < 2.2 && est.support[0].1 > 1.8);
        assert!(est.atoms.is_empty());
    }

    #[test]
    fn projection_law_is_single_atom() {
        let ms = MomentSeq {
            vertex: VertexId(0),
            weight: 1.0,
            moments: vec![1.0; 13],
            exact: None,
        };
        let est = estimate_law(&ms, 1e-3, Some(GridSpec { lo: -1.0, hi: 3.0, points: 2000 }));
        assert_eq!(est.atoms.len(), 1);
        assert!((est.atoms[0].location - 1.0).abs() < 1e-6);
        assert!((est.atoms[0].mass - 1.0).abs() < 0.02);
    }

    #[test]
    fn free_poisson_reference_unit_weights() {
        let g = crate::graph::WeightedGraph::parse_str(
            "vertex a 1\nvertex b 1\nedge e a b\n",
        )
        .unwrap();
        let dd = build_directed_double(&g);
        let ep = dd.oriented_by_name("e+").unwrap();
        let law = free_poisson_reference(&dd, ep).unwrap();
        assert_eq!(law.support, (0.0, 4.0));
        assert_eq!(law.atom_mass, 0.0);
        assert!((law.total_mass() - 1.0).abs() < 1e-6);
        assert!((law.moment(1) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn free_poisson_reference_heavy_corner() {
        let g = crate::graph::WeightedGraph::parse_str(
            "vertex a 1\nvertex b 2\nedge e a b\n",
        )
        .unwrap();
        let dd = build_directed_double(&g);
        // e+ runs a -> b, so the corner is the heavy vertex b
        let ep = dd.oriented_by_name("e+").unwrap();
        let law = free_poisson_reference(&dd, ep).unwrap();
        assert!((law.atom_mass - 1.0).abs() < 1e-12);
        let c = 3.0 / 2f64.sqrt();
        assert!((law.support.0 - (c - 2.0)).abs() < 1e-12);
        assert!((law.support.1 - (c + 2.0)).abs() < 1e-12);
        assert!((law.total_mass() - 2.0).abs() < 1e-6);
        assert!((law.moment(1) - 2f64.sqrt()).abs() < 1e-6);
    }

    #[test]
    fn loop_edge_rejected() {
        let g = crate::graph::WeightedGraph::parse_str("vertex a 1\nedge l a a\n").unwrap();
        let dd = build_directed_double(&g);
        let e = dd.oriented_by_name("l+").unwrap();
        assert!(matches!(
            free_poisson_reference(&dd, e),
            Err(LawError::LoopEdge)
        ));
    }

    #[test]
    fn free_poisson_moments_match_trace_engine() {
        for (wa, wb) in [("1", "1"), ("1", "2"), ("1", "4")] {
            let g = crate::graph::WeightedGraph::parse_str(&format!(
                "vertex a {wa}\nvertex b {wb}\nedge e a b\n"
            ))
            .unwrap();
            let dd = build_directed_double(&g);
            let ep = dd.oriented_by_name("e+").unwrap();
            let law = free_poisson_reference(&dd, ep).unwrap();
            let tracer = Tracer::new(&dd);
            let b = dd.graph().vertex_by_name("b").unwrap();
            // q = X_e+^* X_e+ = X_e- X_e+, cornered at b
            let q = NCPoly::generator(dd.op(ep)).mul(&NCPoly::generator(ep), &dd);
            let ms = tracer.moments(&q, b, 8).unwrap();
            for k in 0..=8 {
                assert!(
                    (ms.moments[k] - law.moment(k as u32)).abs() <= 1e-6,
                    "mu=({wa},{wb}), k={k}: {} vs {}",
                    ms.moments[k],
                    law.moment(k as u32)
                );
            }
        }
    }

    #[test]
    fn heavy_corner_atom_recovered() {
        let g = crate::graph::WeightedGraph::parse_str(
            "vertex a 1\nvertex b 2\nedge e a b\n",
        )
        .unwrap();
        let dd = build_directed_double(&g);
        let ep = dd.oriented_by_name("e+").unwrap();
        let b = dd.graph().vertex_by_name("b").unwrap();
        let tracer = Tracer::new(&dd);
        let q = NCPoly::generator(dd.op(ep)).mul(&NCPoly::generator(ep), &dd);
        let ms = tracer.moments(&q, b, 40).unwrap();
        let est = estimate_law(&ms, 1e-3, None);
        let zero_atom = est
            .atoms
            .iter()
            .find(|a| a.location.abs() < 0.05)
            .expect("atom at zero");
        assert!(
            (zero_atom.mass - 1.0).abs() <= 0.05,
            "mass {}",
            zero_atom.mass
        );
    }

    #[test]
    fn semicircle_relation_recovered() {
        let ms = catalan_moments(20);
        let rel = find_algebraic_relation(&ms, 2, 3).unwrap().expect("relation");
        // expect G^2 - z G + 1 = 0 up to overall scale (deg_g 2, deg_z 1)
        assert_eq!(rel.deg_g, 2);
        assert!(rel.residual <= 1e-8);
        let q0 = &rel.coeffs[0];
        let q1 = &rel.coeffs[1];
        let q2 = &rel.coeffs[2];
        let scale = q2[0];
        assert!(scale.abs() > 1e-6);
        assert!((q0[0] / scale - 1.0).abs() < 1e-6);
        assert!((q1[1] / scale + 1.0).abs() < 1e-6);
        assert!((q1[0] / scale).abs() < 1e-6);
        for extra in q2.iter().skip(1) {
            assert!((extra / scale).abs() < 1e-6);
        }
    }

    #[test]
    fn projection_relation_is_linear() {
        let ms = MomentSeq {
            vertex: VertexId(0),
            weight: 1.0,
            moments: vec![1.0; 13],
            exact: None,
        };
        let rel = find_algebraic_relation(&ms, 2, 2).unwrap().expect("relation");
        assert_eq!(rel.deg_g, 1);
        // (z - 1) G - 1 = 0 up to scale
        let q1 = &rel.coeffs[1];
        let q0 = &rel.coeffs[0];
        let scale = q1[1];
        assert!((q1[0] / scale + 1.0).abs() < 1e-6);
        assert!((q0[0] / scale + 1.0).abs() < 1e-6);
    }

    #[test]
    fn not_enough_moments_is_an_error() {
        let ms = catalan_moments(4);
        assert!(matches!(
            find_algebraic_relation(&ms, 3, 3),
            Err(LawError::NotEnoughMoments { .. })
        ));
    }

    #[test]
    fn moment_round_trip_through_inversion() {
        let ms = catalan_moments(40);
        let est = estimate_law(&ms, 1e-3, None);
        for k in 0..=6 {
            let got = est.moment(k);
            let want = ms.moments[k as usize];
            assert!(
                (got - want).abs() <= 0.03 * want.abs().max(1.0),
                "k = {k}: {got} vs {want}"
            );
        }
    }

    #[test]
    fn log_moment_finite_and_stable_for_mp() {
        let g = crate::graph::WeightedGraph::parse_str(
            "vertex a 1\nvertex b 1\nedge e a b\n",
        )
        .unwrap();
        let dd = build_directed_double(&g);
        let ep = dd.oriented_by_name("e+").unwrap();
        let b = dd.graph().vertex_by_name("b").unwrap();
        let tracer = Tracer::new(&dd);
        let q = NCPoly::generator(dd.op(ep)).mul(&NCPoly::generator(ep), &dd);
        let ms = tracer.moments(&q, b, 40).unwrap();
        let est1 = estimate_law(&ms, 1e-3, None);
        let est2 = estimate_law(&ms, 5e-4, None);
        let l1 = log_moment(&est1);
        let l2 = log_moment(&est2);
        assert!(l1.value.is_finite() && l2.value.is_finite());
        assert!((l1.value - l2.value).abs() <= 0.02);
    }

    #[test]
    fn log_moment_sentinel_on_zero_atom() {
        let g = crate::graph::WeightedGraph::parse_str(
            "vertex a 1\nvertex b 2\nedge e a b\n",
        )
        .unwrap();
        let dd = build_directed_double(&g);
        let ep = dd.oriented_by_name("e+").unwrap();
        let b = dd.graph().vertex_by_name("b").unwrap();
        let tracer = Tracer::new(&dd);
        let q = NCPoly::generator(dd.op(ep)).mul(&NCPoly::generator(ep), &dd);
        let ms = tracer.moments(&q, b, 40).unwrap();
        let est = estimate_law(&ms, 1e-3, None);
        let lm = log_moment(&est);
        assert_eq!(lm.value, f64::NEG_INFINITY);
        assert!(lm.atom_at_zero.is_some());
    }

    #[test]
    fn support_arithmetic_semicircle() {
        let g = crate::graph::WeightedGraph::parse_str("vertex a 1\nedge l a a\n").unwrap();
        let ms = catalan_moments(40);
        let est = estimate_law(&ms, 1e-3, None);
        let a = g.vertex_by_name("a").unwrap();
        let report = check_support_arithmetic(&est, &g, a);
        assert_eq!(report.intervals.len(), 1);
        assert!(report.intervals[0].within_tolerance);
        assert!((report.intervals[0].nearest_lattice.unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn log_moment_reference_agrees() {
        // analytic quadrature against the estimate for the unit MP law
        let g = crate::graph::WeightedGraph::parse_str(
            "vertex a 1\nvertex b 1\nedge e a b\n",
        )
        .unwrap();
        let dd = build_directed_double(&g);
        let ep = dd.oriented_by_name("e+").unwrap();
        let law = free_poisson_reference(&dd, ep).unwrap();
        let reference = law.log_moment();
        assert!(reference.is_finite());
        let b = dd.graph().vertex_by_name("b").unwrap();
        let tracer = Tracer::new(&dd);
        let q = NCPoly::generator(dd.op(ep)).mul(&NCPoly::generator(ep), &dd);
        let ms = tracer.moments(&q, b, 40).unwrap();
        let est = estimate_law(&ms, 1e-3, None);
        let lm = log_moment(&est);
        assert!((lm.value - reference).abs() <= 0.1, "{} vs {reference}", lm.value);
    }
}
