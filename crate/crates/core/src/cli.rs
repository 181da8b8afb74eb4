//! Command-line interface: one deterministic entry point per module.
//!
//! Every run is fully determined by its arguments (plus `--seed` where
//! randomness is involved); the configuration is echoed into the output
//! header, numeric lines carry the tolerance or smoothing parameter
//! they were computed with, and identical invocations produce
//! byte-identical output. Exit codes: 0 success, 1 input error, 2 a
//! consistency check failed.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use num_rational::BigRational;
use thiserror::Error;

use crate::expr::{parse_expression, ExprError};
use crate::fock::{self, FockError};
use crate::graph::{
    build_directed_double, classify_vertices, structure_report, DirectedDouble, GraphError,
    VertexId, WeightedGraph,
};
use crate::law::{
    check_support_arithmetic, estimate_law, find_algebraic_relation, log_moment, GridSpec,
    LawError,
};
use crate::ncpoly::{NCPoly, PolyError, Word};
use crate::rational::{format_rational, parse_rational};
use crate::series::{crosscheck, solve_system};
use crate::trace::{moments as compute_moments, Tracer};
use crate::wishart::{CompareOptions, EnsembleSpec, WishartError, WishartModel};
use crate::calculus;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error(transparent)]
    Poly(#[from] PolyError),
    #[error(transparent)]
    Fock(#[from] FockError),
    #[error(transparent)]
    Law(#[from] LawError),
    #[error(transparent)]
    Wishart(#[from] WishartError),
    #[error("{0}")]
    Input(String),
}

#[derive(Debug, Parser)]
#[command(
    name = "looplaw",
    about = "Trace and spectral laws of loop polynomials on weighted graphs"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Copy the report to this file as well as stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Suppress stdout (useful together with --out).
    #[arg(long, global = true)]
    pub quiet: bool,
    /// Residual tolerance for consistency checks.
    #[arg(long, global = true, default_value_t = 1e-9)]
    pub tol: f64,
    /// Seed for every randomized component.
    #[arg(long, global = true, default_value_t = 1)]
    pub seed: u64,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Vertex classification and algebra structure of a graph.
    Classify {
        graph: PathBuf,
    },
    /// Trace of a word or polynomial.
    Trace {
        graph: PathBuf,
        #[command(flatten)]
        input: TraceInput,
        /// Exact rational output (requires square weight ratios).
        #[arg(long)]
        exact: bool,
    },
    /// Moment sequence of a self-adjoint cornered polynomial.
    Moments {
        graph: PathBuf,
        #[arg(long)]
        expr: String,
        /// Corner vertex.
        #[arg(long)]
        vertex: String,
        /// Highest moment order.
        #[arg(short = 'K', long, default_value_t = 8)]
        order: usize,
        #[arg(long)]
        exact: bool,
    },
    /// Spectral-law estimate from moments: density, support, atoms,
    /// optionally an algebraic relation for the transform.
    Law {
        graph: PathBuf,
        #[arg(long)]
        expr: String,
        #[arg(long)]
        vertex: String,
        #[arg(short = 'K', long, default_value_t = 40)]
        order: usize,
        /// Smoothing parameter for the inversion.
        #[arg(long, default_value_t = 1e-3)]
        eta: f64,
        /// Evaluation grid lo:hi:points (derived from moments if absent).
        #[arg(long)]
        grid: Option<String>,
        /// Search for a relation with degree bounds dz,dG.
        #[arg(long)]
        relation: Option<String>,
        /// Skip the advisory support-arithmetic report.
        #[arg(long)]
        no_support_check: bool,
    },
    /// Solve the loop-series system in graded truncation.
    Series {
        graph: PathBuf,
        #[arg(long, default_value_t = 6)]
        degree: usize,
        /// Cross-check coefficients against the trace engine.
        #[arg(long)]
        check: bool,
        /// Restrict the report to one base vertex.
        #[arg(long)]
        base: Option<String>,
    },
    /// Operator identity suite on the truncated Fock representation.
    FockCheck {
        graph: PathBuf,
        #[arg(long, default_value_t = 5)]
        depth: usize,
        /// Basis-size cap.
        #[arg(long)]
        cap: Option<usize>,
        /// Also run the difference-quotient identity suite.
        #[arg(long)]
        calculus: bool,
    },
    /// Monte Carlo block ensembles against trace-engine predictions.
    Wishart {
        /// Comma-separated ratio list, first entry 1.
        #[arg(long)]
        ratios: String,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 100)]
        samples: usize,
        #[arg(long)]
        expr: String,
        #[arg(long, default_value_t = 4)]
        max_moment: usize,
        /// Write an eigenvalue histogram CSV here.
        #[arg(long)]
        hist: Option<PathBuf>,
        #[arg(long, default_value_t = 60)]
        bins: usize,
        /// Map diagonal blocks to self-loops (exploratory).
        #[arg(long)]
        diagonal: bool,
    },
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
pub struct TraceInput {
    /// Expression in the polynomial mini-language.
    #[arg(long)]
    pub expr: Option<String>,
    /// Comma-separated oriented edges, e.g. `e1+,e1-`.
    #[arg(long)]
    pub word: Option<String>,
}

struct Report {
    text: String,
    check_failed: bool,
}

impl Report {
    fn new(header: String) -> Report {
        Report {
            text: header,
            check_failed: false,
        }
    }

    fn line(&mut self, s: impl AsRef<str>) {
        self.text.push_str(s.as_ref());
        self.text.push('\n');
    }

    fn check(&mut self, label: &str, residual: f64, tol: f64) {
        let status = if residual <= tol { "pass" } else { "FAIL" };
        if residual > tol {
            self.check_failed = true;
        }
        self.line(format!("check {label}: residual={residual:.3e} tol={tol:.1e} {status}"));
    }
}

/// Run a parsed invocation; returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    match execute(&cli) {
        Ok(report) => {
            if !cli.quiet {
                print!("{}", report.text);
            }
            if let Some(path) = &cli.out {
                if let Err(e) = std::fs::write(path, report.text.as_bytes()) {
                    eprintln!("error: cannot write {}: {e}", path.display());
                    return 1;
                }
            }
            if report.check_failed {
                2
            } else {
                0
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn execute(cli: &Cli) -> Result<Report, CliError> {
    match &cli.command {
        Command::Classify { graph } => cmd_classify(graph),
        Command::Trace {
            graph,
            input,
            exact,
        } => cmd_trace(graph, input, *exact),
        Command::Moments {
            graph,
            expr,
            vertex,
            order,
            exact,
        } => cmd_moments(graph, expr, vertex, *order, *exact),
        Command::Law {
            graph,
            expr,
            vertex,
            order,
            eta,
            grid,
            relation,
            no_support_check,
        } => cmd_law(
            graph,
            expr,
            vertex,
            *order,
            *eta,
            grid.as_deref(),
            relation.as_deref(),
            !*no_support_check,
        ),
        Command::Series {
            graph,
            degree,
            check,
            base,
        } => cmd_series(graph, *degree, *check, base.as_deref(), cli.tol),
        Command::FockCheck {
            graph,
            depth,
            cap,
            calculus,
        } => cmd_fock_check(graph, *depth, *cap, *calculus, cli.tol, cli.seed),
        Command::Wishart {
            ratios,
            n,
            samples,
            expr,
            max_moment,
            hist,
            bins,
            diagonal,
        } => cmd_wishart(
            ratios,
            *n,
            *samples,
            cli.seed,
            expr,
            *max_moment,
            hist.as_deref(),
            *bins,
            *diagonal,
        ),
    }
}

fn load_graph(path: &PathBuf) -> Result<WeightedGraph, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
    Ok(WeightedGraph::parse_str(&text)?)
}

fn vertex_by_name(g: &WeightedGraph, name: &str) -> Result<VertexId, CliError> {
    Ok(g.vertex_by_name(name)?)
}

fn names(g: &WeightedGraph, set: &BTreeSet<VertexId>) -> String {
    if set.is_empty() {
        return "{}".to_string();
    }
    let inner: Vec<&str> = set.iter().map(|&v| g.vertex_name(v)).collect();
    format!("{{{}}}", inner.join(","))
}

fn cmd_classify(path: &PathBuf) -> Result<Report, CliError> {
    let g = load_graph(path)?;
    let mut r = Report::new(format!("# looplaw classify graph={}\n", path.display()));
    let c = classify_vertices(&g);
    r.line(format!("vertices: {}", g.vertex_count()));
    r.line(format!("edges: {}", g.edge_count()));
    r.line(format!("V_gt: {}", names(&g, &c.v_gt)));
    r.line(format!("V_eq: {}", names(&g, &c.v_eq)));
    r.line(format!("V_geq: {}", names(&g, &c.v_geq())));
    for (&(a, b), &n) in &c.multiplicities {
        r.line(format!(
            "multiplicity {} {} {}",
            g.vertex_name(a),
            g.vertex_name(b),
            n
        ));
    }
    let report = structure_report(&g)?;
    r.line(format!("simple: {}", report.simple));
    r.line(format!("unique_trace: {}", report.unique_trace));
    r.line(format!("ideal_unital: {}", report.ideal_unital));
    r.line(format!("quotient_dimension: {}", report.quotient_dimension));
    for (v, t) in &report.summand_traces {
        r.line(format!(
            "summand_trace {} {}",
            g.vertex_name(*v),
            format_rational(t)
        ));
    }
    let basis: Vec<&str> = report.k0_basis.iter().map(|&v| g.vertex_name(v)).collect();
    r.line(format!("k0_basis: [{}]", basis.join(",")));
    r.line(format!("k1_trivial: {}", report.k1_trivial));
    Ok(r)
}

fn parse_word(dd: &DirectedDouble, text: &str) -> Result<Word, CliError> {
    let mut edges = Vec::new();
    for part in text.split(',') {
        let part = part.trim();
        if part.is_empty() {
            continue;
        }
        edges.push(dd.oriented_by_name(part)?);
    }
    if edges.is_empty() {
        return Err(CliError::Input("empty word".into()));
    }
    Word::path(dd, edges).ok_or_else(|| CliError::Input(format!("`{text}` is not composable")))
}

fn cmd_trace(path: &PathBuf, input: &TraceInput, exact: bool) -> Result<Report, CliError> {
    let g = load_graph(path)?;
    let dd = build_directed_double(&g);
    let mut r = Report::new(format!(
        "# looplaw trace graph={} exact={exact}\n",
        path.display()
    ));
    if exact {
        let tracer = Tracer::new_exact(&dd).ok_or_else(|| {
            CliError::Input(
                "exact mode needs every edge weight ratio to be a perfect rational square"
                    .into(),
            )
        })?;
        match (&input.word, &input.expr) {
            (Some(word), _) => {
                let w = parse_word(&dd, word)?;
                r.line(format!("trace = {}", format_rational(&tracer.trace_word(&w))));
            }
            (_, Some(expr)) => {
                let p = parse_expression(expr, &dd)?;
                let t = tracer.trace_poly_exact(&p);
                r.line(format!(
                    "trace = ({},{})",
                    format_rational(&t.re),
                    format_rational(&t.im)
                ));
            }
            _ => unreachable!("clap group"),
        }
    } else {
        let tracer = Tracer::new(&dd);
        match (&input.word, &input.expr) {
            (Some(word), _) => {
                let w = parse_word(&dd, word)?;
                r.line(format!("trace = {:.12}", tracer.trace_word(&w)));
            }
            (_, Some(expr)) => {
                let p = parse_expression(expr, &dd)?;
                let t = tracer.trace_poly(&p);
                r.line(format!("trace = {:.12} + {:.12}i", t.re, t.im));
            }
            _ => unreachable!("clap group"),
        }
    }
    Ok(r)
}

fn cmd_moments(
    path: &PathBuf,
    expr: &str,
    vertex: &str,
    order: usize,
    exact: bool,
) -> Result<Report, CliError> {
    let g = load_graph(path)?;
    let dd = build_directed_double(&g);
    let v = vertex_by_name(&g, vertex)?;
    let q = parse_expression(expr, &dd)?;
    let mut r = Report::new(format!(
        "# looplaw moments graph={} expr={expr} vertex={vertex} K={order} exact={exact}\n",
        path.display()
    ));
    let ms = compute_moments(&dd, &q, v, order)?;
    if exact {
        let exact_ms = ms.exact.as_ref().ok_or_else(|| {
            CliError::Input(
                "exact mode needs every edge weight ratio to be a perfect rational square"
                    .into(),
            )
        })?;
        r.line("k,m_k");
        for (k, m) in exact_ms.iter().enumerate() {
            r.line(format!("{k},{}", format_rational(m)));
        }
    } else {
        r.line("k,m_k");
        for (k, m) in ms.moments.iter().enumerate() {
            r.line(format!("{k},{m:.12}"));
        }
    }
    Ok(r)
}

fn parse_grid(text: &str) -> Result<GridSpec, CliError> {
    let parts: Vec<&str> = text.split(':').collect();
    if parts.len() != 3 {
        return Err(CliError::Input(format!(
            "grid must be lo:hi:points, got `{text}`"
        )));
    }
    let lo: f64 = parts[0]
        .parse()
        .map_err(|_| CliError::Input(format!("bad grid lo `{}`", parts[0])))?;
    let hi: f64 = parts[1]
        .parse()
        .map_err(|_| CliError::Input(format!("bad grid hi `{}`", parts[1])))?;
    let points: usize = parts[2]
        .parse()
        .map_err(|_| CliError::Input(format!("bad grid points `{}`", parts[2])))?;
    if !(hi > lo) || points < 2 {
        return Err(CliError::Input("grid needs hi > lo and points >= 2".into()));
    }
    Ok(GridSpec { lo, hi, points })
}

#[allow(clippy::too_many_arguments)]
fn cmd_law(
    path: &PathBuf,
    expr: &str,
    vertex: &str,
    order: usize,
    eta: f64,
    grid: Option<&str>,
    relation: Option<&str>,
    support_check: bool,
) -> Result<Report, CliError> {
    let g = load_graph(path)?;
    let dd = build_directed_double(&g);
    let v = vertex_by_name(&g, vertex)?;
    let q = parse_expression(expr, &dd)?;
    let mut r = Report::new(format!(
        "# looplaw law graph={} expr={expr} vertex={vertex} K={order} eta={eta:e}\n",
        path.display()
    ));
    let ms = compute_moments(&dd, &q, v, order)?;
    let grid_spec = grid.map(parse_grid).transpose()?;
    let mut est = estimate_law(&ms, eta, grid_spec);
    r.line(format!(
        "# jacobi levels={} unstable={}",
        est.jacobi_levels, est.jacobi_unstable
    ));
    if est.jacobi_unstable {
        r.line("# warning: moment positivity exhausted before full depth; evaluation uses the stable levels");
    }
    for (lo, hi) in &est.support {
        r.line(format!("support interval: [{lo:.6},{hi:.6}] eta={eta:e}"));
    }
    for atom in &est.atoms {
        r.line(format!(
            "atom: location={:.6} mass={:.6} eta={eta:e}",
            atom.location, atom.mass
        ));
    }
    if let Some(spec) = relation {
        let (dz, dg) = parse_pair(spec)?;
        match find_algebraic_relation(&ms, dz, dg)? {
            Some(rel) => {
                r.line(format!(
                    "relation: {} (residual {:.3e})",
                    rel.human_readable(),
                    rel.residual
                ));
                r.line("relation_coeff j,i,value");
                for (j, row) in rel.coeffs.iter().enumerate() {
                    for (i, c) in row.iter().enumerate() {
                        if c.abs() > 1e-12 {
                            r.line(format!("relation_coeff {j},{i},{c:.12}"));
                        }
                    }
                }
            }
            None => r.line(format!("relation: none found within degrees dz={dz} dG={dg}")),
        }
    }
    if support_check {
        let sa = check_support_arithmetic(&est, &g, v);
        for iv in &sa.intervals {
            r.line(format!(
                "interval_measure [{:.6},{:.6}]: measure={:.6} nearest_lattice={} within_tol={} tol={:.4}",
                iv.interval.0,
                iv.interval.1,
                iv.measure,
                iv.nearest_lattice
                    .map(|l| format!("{l:.6}"))
                    .unwrap_or_else(|| "none".into()),
                iv.within_tolerance,
                sa.tolerance
            ));
        }
    }
    let lm = log_moment(&est);
    match lm.atom_at_zero {
        Some(mass) => r.line(format!(
            "log_moment: -inf (atom at zero, mass {mass:.6}) eta={:e}",
            lm.eta
        )),
        None => r.line(format!("log_moment: {:.6} eta={:e}", lm.value, lm.eta)),
    }
    r.line("x,density");
    let density = std::mem::take(&mut est.density);
    for (x, d) in est.grid.iter().zip(density.iter()) {
        r.line(format!("{x:.8},{d:.10}"));
    }
    Ok(r)
}

fn parse_pair(text: &str) -> Result<(usize, usize), CliError> {
    let parts: Vec<&str> = text.split(',').collect();
    if parts.len() != 2 {
        return Err(CliError::Input(format!(
            "expected `dz,dG`, got `{text}`"
        )));
    }
    let dz = parts[0]
        .trim()
        .parse()
        .map_err(|_| CliError::Input(format!("bad degree `{}`", parts[0])))?;
    let dg = parts[1]
        .trim()
        .parse()
        .map_err(|_| CliError::Input(format!("bad degree `{}`", parts[1])))?;
    Ok((dz, dg))
}

fn cmd_series(
    path: &PathBuf,
    degree: usize,
    check: bool,
    base: Option<&str>,
    tol: f64,
) -> Result<Report, CliError> {
    let g = load_graph(path)?;
    let dd = build_directed_double(&g);
    if degree < 2 {
        return Err(CliError::Input("--degree must be at least 2".into()));
    }
    let mut r = Report::new(format!(
        "# looplaw series graph={} degree={degree} check={check}\n",
        path.display()
    ));
    let solution = solve_system(&dd, degree);
    let tracer = Tracer::new(&dd);
    let only: Option<VertexId> = base.map(|b| vertex_by_name(&g, b)).transpose()?;
    r.line("vertex,word,coefficient,trace,abs_error");
    for series in &solution {
        if let Some(v) = only {
            if series.base != v {
                continue;
            }
        }
        let vname = g.vertex_name(series.base);
        for (word, coeff) in &series.coeffs {
            let shown: Vec<String> = word.iter().map(|&e| dd.oriented_name(e)).collect();
            let trace = tracer.trace_word(&Word::Path(word.clone()));
            r.line(format!(
                "{vname},{},{coeff:.12},{trace:.12},{:.3e}",
                shown.join(" "),
                (coeff - trace).abs()
            ));
        }
    }
    if check {
        let mut worst: f64 = 0.0;
        for series in &solution {
            worst = worst.max(crosscheck(&dd, series));
        }
        r.check("series-vs-trace", worst, tol);
    }
    Ok(r)
}

fn cmd_fock_check(
    path: &PathBuf,
    depth: usize,
    cap: Option<usize>,
    with_calculus: bool,
    tol: f64,
    seed: u64,
) -> Result<Report, CliError> {
    let g = load_graph(path)?;
    let dd = build_directed_double(&g);
    let f = fock::build(&dd, depth, cap)?;
    let mut r = Report::new(format!(
        "# looplaw fock-check graph={} depth={depth} dim={} tol={tol:e} seed={seed}\n",
        path.display(),
        f.dim()
    ));

    let mut adjoint_worst: f64 = 0.0;
    for e in dd.oriented_ids() {
        adjoint_worst = adjoint_worst.max(f.adjoint_defect(e, &dd));
    }
    r.check("generator-adjoints", adjoint_worst, 1e-12);
    r.check(
        "conjugation-involution",
        if f.conjugation_is_involution() { 0.0 } else { 1.0 },
        0.0,
    );

    if depth >= 2 {
        let mut comm_worst: f64 = 0.0;
        for e in dd.oriented_ids() {
            for e2 in dd.oriented_ids() {
                comm_worst = comm_worst.max(f.check_commutator(e, e2, &dd)?);
            }
        }
        r.check("creation-commutators", comm_worst, 1e-12);
    }

    // trace agreement between the recursion and the representation
    let tracer = Tracer::new(&dd);
    let mut trace_worst: f64 = 0.0;
    let mut words = 0usize;
    let mut stack: Vec<Vec<crate::graph::OrientedEdgeId>> =
        dd.oriented_ids().map(|e| vec![e]).collect();
    while let Some(es) = stack.pop() {
        if words >= 20000 {
            break;
        }
        let w = Word::Path(es.clone());
        trace_worst = trace_worst.max((tracer.trace_word(&w) - f.trace(&w)?).abs());
        words += 1;
        if es.len() < depth {
            for &e in dd.outgoing(dd.target(*es.last().unwrap())) {
                let mut next = es.clone();
                next.push(e);
                stack.push(next);
            }
        }
    }
    r.line(format!("# trace agreement over {words} words of length <= {depth}"));
    r.check("trace-vs-recursion", trace_worst, tol);

    if with_calculus {
        run_calculus_suite(&mut r, &dd, tol, seed);
    }
    Ok(r)
}

fn run_calculus_suite(r: &mut Report, dd: &DirectedDouble, tol: f64, seed: u64) {
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    let tracer = Tracer::new(dd);
    let mut rng = StdRng::seed_from_u64(seed);
    let mut conj_worst: f64 = 0.0;
    let mut sigma_worst: f64 = 0.0;
    let mut adj_worst: f64 = 0.0;
    let mut flat_worst: f64 = 0.0;
    for _ in 0..100 {
        let p = random_poly_for_suite(dd, &mut rng, 5);
        let q = random_poly_for_suite(dd, &mut rng, 4);
        let w = random_poly_for_suite(dd, &mut rng, 4);
        for e in dd.oriented_ids() {
            conj_worst = conj_worst.max(calculus::check_conjugate_variable(&tracer, e, &p));
            sigma_worst = sigma_worst.max(calculus::check_sigma_symmetry(dd, e, &p));
            adj_worst = adj_worst.max(calculus::check_adjoint_formula(&tracer, e, &q, &w, &p));
        }
        // one random cornered monomial per round for the flatness identity
        let start = VertexId(rng.gen_range(0..dd.graph().vertex_count()));
        let len = rng.gen_range(1..=6);
        let mut at = start;
        let mut es = Vec::new();
        for _ in 0..len {
            let out = dd.outgoing(at);
            let e = out[rng.gen_range(0..out.len())];
            es.push(e);
            at = dd.target(e);
        }
        let mut mono = NCPoly::zero();
        mono.add_term(Word::Path(es), crate::ncpoly::coeff_from_int(1));
        flat_worst = flat_worst.max(
            calculus::check_flatness_identity(dd, &mono, start, at).expect("cornered"),
        );
    }
    r.check("conjugate-variable", conj_worst, tol);
    r.check("sigma-symmetry", sigma_worst, tol);
    r.check("derivation-adjoint", adj_worst, tol);
    r.check("flatness-identity", flat_worst, 0.0);
}

fn random_poly_for_suite(
    dd: &DirectedDouble,
    rng: &mut rand::rngs::StdRng,
    max_len: usize,
) -> NCPoly {
    use rand::Rng;
    let mut p = NCPoly::zero();
    for _ in 0..rng.gen_range(1..=4) {
        let len = rng.gen_range(0..=max_len);
        if len == 0 {
            let v = VertexId(rng.gen_range(0..dd.graph().vertex_count()));
            p.add_term(Word::Empty(v), crate::ncpoly::coeff_from_int(rng.gen_range(-3..=3)));
            continue;
        }
        let mut at = VertexId(rng.gen_range(0..dd.graph().vertex_count()));
        let mut es = Vec::new();
        for _ in 0..len {
            let out = dd.outgoing(at);
            if out.is_empty() {
                break;
            }
            let e = out[rng.gen_range(0..out.len())];
            es.push(e);
            at = dd.target(e);
        }
        if es.is_empty() {
            continue;
        }
        p.add_term(
            Word::Path(es),
            crate::ncpoly::coeff_from_int(rng.gen_range(-3..=3)),
        );
    }
    p
}

#[allow(clippy::too_many_arguments)]
fn cmd_wishart(
    ratios: &str,
    n: usize,
    samples: usize,
    seed: u64,
    expr: &str,
    max_moment: usize,
    hist: Option<&std::path::Path>,
    bins: usize,
    diagonal: bool,
) -> Result<Report, CliError> {
    let ratio_list: Vec<BigRational> = ratios
        .split(',')
        .map(|p| parse_rational(p.trim()).map_err(CliError::Input))
        .collect::<Result<_, _>>()?;
    let spec = EnsembleSpec::new(ratio_list, n, samples, seed)?;
    let model = WishartModel::new(spec, diagonal)?;
    let q = parse_expression(expr, model.graph_double())?;
    let mut r = Report::new(format!(
        "# looplaw wishart ratios={ratios} n={n} samples={samples} seed={seed} expr={expr} max_moment={max_moment}\n",
    ));
    let options = CompareOptions {
        histogram_bins: if hist.is_some() { bins } else { 0 },
    };
    let report = model.compare(&q, max_moment, &options)?;
    r.line("m,empirical,std_err,predicted,z");
    for m in &report.moments {
        r.line(format!(
            "{},{:.10},{:.3e},{:.10},{:.3}",
            m.order, m.empirical, m.std_err, m.predicted, m.z_score
        ));
    }
    if let Some(gap) = report.gap_mass {
        r.line(format!("gap_mass_fraction: {gap:.6}"));
    }
    if let (Some(path), Some(h)) = (hist, &report.histogram) {
        let mut csv = String::new();
        let _ = writeln!(csv, "bin_lo,bin_hi,count");
        for (lo, hi, count) in &h.bins {
            let _ = writeln!(csv, "{lo:.8},{hi:.8},{count}");
        }
        std::fs::write(path, csv)?;
        r.line(format!("histogram written to {}", path.display()));
    }
    Ok(r)
}
