//! Quasi-reversibility reconstruction of the source factor `p(x)`.
//!
//! With `v = u_t`, the source problem turns into
//!
//! ```text
//! v_t = Δv + c v + (f_t(x,t) / f(x,0)) v(x,0),   v = 0 and ∂_ν v = G_t on ∂Ω,
//! ```
//!
//! which involves `v` only. On the grid the residual of that equation is the
//! sparse operator `D`, the boundary conditions are `K1 v = 0` and
//! `K2 v = g`, and the regularized solution solves
//!
//! ```text
//! (DᵀD + K1ᵀK1 + K2ᵀK2 + ε(Id + DxᵀDx + DyᵀDy)) v = K2ᵀ g.
//! ```
//!
//! The source factor is then `p = v(·, t_1) / f(·, t_1)`.

use std::time::Instant;

use crate::error::{Error, Result};
use crate::fields::{rate_second_order, BoundaryKind, BoundarySeries, SpaceTimeField, SpatialField};
use crate::grid::GridSpec;
use crate::sparse::{self, default_max_iter, gram_accumulate, SparseMatrixCsr, TripletBuilder};

pub const DEFAULT_EPSILON: f64 = 1e-8;
pub const DEFAULT_TOL: f64 = 1e-10;

/// How the PDE and penalty terms are weighted against the boundary rows.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum GramWeighting {
    /// `DᵀD + K1ᵀK1 + K2ᵀK2 + ε(...)`, exactly as the normal equations are
    /// usually written.
    #[default]
    Unweighted,
    /// PDE and penalty terms scaled by the quadrature measure `dt dx²`,
    /// boundary rows left as they are.
    Measure,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LinearSolver {
    /// Sparse Cholesky with iterative refinement.
    Cholesky { max_refine: usize },
    /// Diagonal-preconditioned conjugate gradients; `None` uses
    /// [`default_max_iter`].
    ConjugateGradient { max_iter: Option<usize> },
}

impl Default for LinearSolver {
    fn default() -> Self {
        LinearSolver::Cholesky { max_refine: 3 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QrOptions {
    pub epsilon: f64,
    pub weighting: GramWeighting,
    pub solver: LinearSolver,
    pub tol: f64,
}

impl Default for QrOptions {
    fn default() -> Self {
        Self {
            epsilon: DEFAULT_EPSILON,
            weighting: GramWeighting::Unweighted,
            solver: LinearSolver::default(),
            tol: DEFAULT_TOL,
        }
    }
}

impl QrOptions {
    pub fn with_epsilon(epsilon: f64) -> Self {
        Self {
            epsilon,
            ..Self::default()
        }
    }
}

#[derive(Clone, Debug)]
pub struct QrProblem {
    pub spec: GridSpec,
    pub c: SpatialField,
    pub f: SpaceTimeField,
    /// Analytic `f_t`; when absent it is differenced from `f`.
    pub f_rate: Option<SpaceTimeField>,
    pub data_gt: BoundarySeries,
    pub options: QrOptions,
}

impl QrProblem {
    pub fn new(c: SpatialField, f: SpaceTimeField, data_gt: BoundarySeries, options: QrOptions) -> Result<Self> {
        let spec = *c.spec();
        if *f.spec() != spec || *data_gt.spec() != spec {
            return Err(Error::Domain("problem inputs live on different grids".into()));
        }
        if data_gt.kind() != BoundaryKind::FluxRate {
            return Err(Error::Config("inverse source data must be a flux-rate (G_t) series".into()));
        }
        if !(options.epsilon.is_finite() && options.epsilon > 0.0) {
            return Err(Error::Config(format!("epsilon must be positive, got {}", options.epsilon)));
        }
        if !(options.tol > 0.0) {
            return Err(Error::Config(format!("solver tolerance must be positive, got {}", options.tol)));
        }
        check_initial_factor(&f)?;
        Ok(Self {
            spec,
            c,
            f,
            f_rate: None,
            data_gt,
            options,
        })
    }

    pub fn with_f_rate(mut self, f_rate: SpaceTimeField) -> Result<Self> {
        if *f_rate.spec() != self.spec {
            return Err(Error::Domain("f_t lives on a different grid".into()));
        }
        self.f_rate = Some(f_rate);
        Ok(self)
    }
}

fn check_initial_factor(f: &SpaceTimeField) -> Result<()> {
    let spec = f.spec();
    let m = spec.nodes_per_axis();
    for i in 1..=m {
        for j in 1..=m {
            let v = f.get(i, j, 1);
            if v == 0.0 || !v.is_finite() {
                return Err(Error::Precondition(format!("f(x, 0) vanishes at node ({i}, {j})")));
            }
        }
    }
    Ok(())
}

/// Time derivative of `f` by the second-order stencils used for the data.
pub fn numeric_rate(f: &SpaceTimeField) -> Result<SpaceTimeField> {
    if f.spec().nt() < 2 {
        return Err(Error::Config("f_t needs N_t >= 2".into()));
    }
    f.time_derivative()
}

/// Discrete residual operator `D`. Rows exist for interior nodes
/// `2 <= i, j <= Nx` at levels `2 <= l <= Nt+1`; every other row is empty.
pub fn assemble_operator_d(spec: GridSpec, c: &SpatialField, f: &SpaceTimeField) -> Result<SparseMatrixCsr> {
    let rate = numeric_rate(f)?;
    assemble_operator_d_with_rate(spec, c, f, &rate)
}

pub fn assemble_operator_d_with_rate(
    spec: GridSpec,
    c: &SpatialField,
    f: &SpaceTimeField,
    f_rate: &SpaceTimeField,
) -> Result<SparseMatrixCsr> {
    if *c.spec() != spec || *f.spec() != spec || *f_rate.spec() != spec {
        return Err(Error::Domain("operator inputs live on different grids".into()));
    }
    check_initial_factor(f)?;
    let n = spec.lineup_len();
    let m = spec.nodes_per_axis();
    let (dx, dt) = (spec.dx(), spec.dt());
    let inv_h2 = 1.0 / (dx * dx);
    let rows = (m - 2) * (m - 2) * spec.nt();
    let mut b = TripletBuilder::with_capacity(n, n, 7 * rows);
    for i in 2..m {
        for j in 2..m {
            let f0 = f.get(i, j, 1);
            for l in 2..=spec.time_levels() {
                let row = spec.offset(i, j, l);
                b.push(row, row, 1.0 / dt + 4.0 * inv_h2 - c.get(i, j));
                b.push(row, spec.offset(i, j, l - 1), -1.0 / dt);
                b.push(row, spec.offset(i, j, 1), -f_rate.get(i, j, l) / f0);
                b.push(row, spec.offset(i + 1, j, l), -inv_h2);
                b.push(row, spec.offset(i - 1, j, l), -inv_h2);
                b.push(row, spec.offset(i, j + 1, l), -inv_h2);
                b.push(row, spec.offset(i, j - 1, l), -inv_h2);
            }
        }
    }
    Ok(b.build())
}

/// Backward-difference gradient matrices `(Dx, Dy)`, populated on rows
/// `2 <= i, j <= Nx+1` at every time level.
pub fn assemble_gradient(spec: GridSpec) -> (SparseMatrixCsr, SparseMatrixCsr) {
    let n = spec.lineup_len();
    let m = spec.nodes_per_axis();
    let inv_h = 1.0 / spec.dx();
    let cap = 2 * (m - 1) * (m - 1) * spec.time_levels();
    let mut bx = TripletBuilder::with_capacity(n, n, cap);
    let mut by = TripletBuilder::with_capacity(n, n, cap);
    for i in 2..=m {
        for j in 2..=m {
            for l in 1..=spec.time_levels() {
                let row = spec.offset(i, j, l);
                bx.push(row, row, inv_h);
                bx.push(row, spec.offset(i - 1, j, l), -inv_h);
                by.push(row, row, inv_h);
                by.push(row, spec.offset(i, j - 1, l), -inv_h);
            }
        }
    }
    (bx.build(), by.build())
}

/// Projector onto boundary nodes at every time level.
pub fn assemble_dirichlet_k1(spec: GridSpec) -> SparseMatrixCsr {
    let n = spec.lineup_len();
    let mut b = TripletBuilder::with_capacity(n, n, 4 * spec.nx() * spec.time_levels());
    for node in spec.boundary_nodes() {
        for l in 1..=spec.time_levels() {
            let row = spec.offset(node.i, node.j, l);
            b.push(row, row, 1.0);
        }
    }
    b.build()
}

/// One-sided outward normal derivative on boundary rows.
pub fn assemble_neumann_k2(spec: GridSpec) -> SparseMatrixCsr {
    let n = spec.lineup_len();
    let inv_h = 1.0 / spec.dx();
    let mut b = TripletBuilder::with_capacity(n, n, 8 * spec.nx() * spec.time_levels());
    for node in spec.boundary_nodes() {
        let (ii, jj) = node.inward;
        for l in 1..=spec.time_levels() {
            let row = spec.offset(node.i, node.j, l);
            b.push(row, row, inv_h);
            b.push(row, spec.offset(ii, jj, l), -inv_h);
        }
    }
    b.build()
}

/// Every matrix of the discrete functional for one problem.
#[derive(Clone, Debug)]
pub struct QrOperators {
    pub d: SparseMatrixCsr,
    pub dx: SparseMatrixCsr,
    pub dy: SparseMatrixCsr,
    pub k1: SparseMatrixCsr,
    pub k2: SparseMatrixCsr,
}

impl QrOperators {
    pub fn assemble(problem: &QrProblem) -> Result<Self> {
        let d = match &problem.f_rate {
            Some(rate) => assemble_operator_d_with_rate(problem.spec, &problem.c, &problem.f, rate)?,
            None => assemble_operator_d(problem.spec, &problem.c, &problem.f)?,
        };
        let (dx, dy) = assemble_gradient(problem.spec);
        Ok(Self {
            d,
            dx,
            dy,
            k1: assemble_dirichlet_k1(problem.spec),
            k2: assemble_neumann_k2(problem.spec),
        })
    }

    /// Weight of the PDE and penalty terms relative to the boundary rows.
    pub fn interior_weight(spec: &GridSpec, weighting: GramWeighting) -> f64 {
        match weighting {
            GramWeighting::Unweighted => 1.0,
            GramWeighting::Measure => spec.dt() * spec.dx() * spec.dx(),
        }
    }

    pub fn gram(&self, spec: &GridSpec, epsilon: f64, weighting: GramWeighting) -> Result<SparseMatrixCsr> {
        let w = Self::interior_weight(spec, weighting);
        gram_accumulate(
            &[
                (&self.d, w),
                (&self.k1, 1.0),
                (&self.k2, 1.0),
                (&self.dx, w * epsilon),
                (&self.dy, w * epsilon),
            ],
            w * epsilon,
        )
    }

    /// Split of the minimized quadratic at `v` into data misfit and penalty.
    pub fn objective_terms(&self, v: &[f64], g: &[f64], spec: &GridSpec, weighting: GramWeighting) -> Result<ObjectiveTerms> {
        let w = Self::interior_weight(spec, weighting);
        let sq = |x: &[f64]| x.iter().map(|a| a * a).sum::<f64>();
        let pde = sq(&self.d.matvec(v)?);
        let dirichlet = sq(&self.k1.matvec(v)?);
        let k2v = self.k2.matvec(v)?;
        let neumann: f64 = k2v.iter().zip(g).map(|(a, b)| (a - b) * (a - b)).sum();
        let penalty = sq(v) + sq(&self.dx.matvec(v)?) + sq(&self.dy.matvec(v)?);
        Ok(ObjectiveTerms {
            pde: w * pde,
            dirichlet,
            neumann,
            penalty: w * penalty,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ObjectiveTerms {
    pub pde: f64,
    pub dirichlet: f64,
    pub neumann: f64,
    pub penalty: f64,
}

impl ObjectiveTerms {
    /// `‖D v‖² + ‖K1 v‖² + ‖K2 v - g‖²` (weighted as in the Gram system).
    pub fn misfit(&self) -> f64 {
        self.pde + self.dirichlet + self.neumann
    }
}

#[derive(Clone, Debug)]
pub struct QrDiagnostics {
    pub epsilon: f64,
    pub unknowns: usize,
    pub gram_nnz: usize,
    pub terms: ObjectiveTerms,
    pub assembly_secs: f64,
    pub solve_secs: f64,
}

#[derive(Clone, Debug)]
pub struct QrSolution {
    pub v: SpaceTimeField,
    pub p: SpatialField,
    pub residual: f64,
    pub iterations: usize,
    pub diagnostics: QrDiagnostics,
}

impl QrSolution {
    /// `key=value` lines for run reports.
    pub fn report(&self) -> String {
        let d = &self.diagnostics;
        format!(
            "epsilon={:e}\nunknowns={}\ngram_nnz={}\niterations={}\nresidual={:e}\nmisfit={:e}\npenalty={:e}\nassembly_secs={:.3}\nsolve_secs={:.3}\n",
            d.epsilon,
            d.unknowns,
            d.gram_nnz,
            self.iterations,
            self.residual,
            d.terms.misfit(),
            d.terms.penalty,
            d.assembly_secs,
            d.solve_secs
        )
    }
}

pub fn solve_qr(problem: &QrProblem) -> Result<QrSolution> {
    let spec = problem.spec;
    let opts = problem.options;
    let started = Instant::now();
    let ops = QrOperators::assemble(problem)?;
    let gram = ops.gram(&spec, opts.epsilon, opts.weighting)?;
    let g = problem.data_gt.to_lineup();
    let rhs = ops.k2.matvec_transpose(&g)?;
    let assembly_secs = started.elapsed().as_secs_f64();

    let started = Instant::now();
    let outcome = match opts.solver {
        LinearSolver::Cholesky { max_refine } => sparse::solve_spd_direct(&gram, &rhs, opts.tol, max_refine)?,
        LinearSolver::ConjugateGradient { max_iter } => sparse::solve_spd(
            &gram,
            &rhs,
            opts.tol,
            max_iter.unwrap_or_else(|| default_max_iter(gram.rows())),
        )?,
    };
    let solve_secs = started.elapsed().as_secs_f64();

    let terms = ops.objective_terms(&outcome.x, &g, &spec, opts.weighting)?;
    let v = SpaceTimeField::from_lineup(spec, outcome.x)?;
    let p = source_from_v(&v, &problem.f);
    Ok(QrSolution {
        v,
        p,
        residual: outcome.residual,
        iterations: outcome.iterations,
        diagnostics: QrDiagnostics {
            epsilon: opts.epsilon,
            unknowns: gram.rows(),
            gram_nnz: gram.nnz(),
            terms,
            assembly_secs,
            solve_secs,
        },
    })
}

/// `p = v(·, t_1) / f(·, t_1)`.
pub fn source_from_v(v: &SpaceTimeField, f: &SpaceTimeField) -> SpatialField {
    let spec = *v.spec();
    let m = spec.nodes_per_axis();
    let mut p = SpatialField::zeros(spec);
    for i in 1..=m {
        for j in 1..=m {
            p.set(i, j, v.get(i, j, 1) / f.get(i, j, 1));
        }
    }
    p
}

/// Second-order time derivative of an arbitrary per-node series; re-exported
/// for callers that difference their own `f`.
pub fn rate_of(series: &[f64], dt: f64) -> Result<Vec<f64>> {
    rate_second_order(series, dt)
}
