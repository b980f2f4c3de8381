//! Forward parabolic solver for `u_t = Δu + c u + s` on the square with
//! Dirichlet boundary values, and the boundary flux it produces.
//!
//! Time stepping is Crank-Nicolson with the 5-point Laplacian; each step is a
//! symmetric positive definite system on the interior nodes, solved by
//! preconditioned conjugate gradients warm-started from the previous level.

use crate::error::{Error, Result};
use crate::fields::{sample_space_time, sample_spatial, BoundaryKind, BoundarySeries, SpaceTimeField, SpatialField};
use crate::grid::GridSpec;
use crate::sparse::{default_max_iter, solve_spd_from, TripletBuilder};

/// Relative tolerance of the per-step linear solves.
pub const STEP_TOL: f64 = 1e-13;

#[derive(Clone, Debug)]
pub struct ForwardProblem {
    pub spec: GridSpec,
    pub c: SpatialField,
    pub source: SpaceTimeField,
    pub dirichlet: BoundarySeries,
    pub initial: SpatialField,
}

impl ForwardProblem {
    pub fn new(
        spec: GridSpec,
        c: SpatialField,
        source: SpaceTimeField,
        dirichlet: BoundarySeries,
        initial: SpatialField,
    ) -> Result<Self> {
        if *c.spec() != spec || *source.spec() != spec || *dirichlet.spec() != spec || *initial.spec() != spec {
            return Err(Error::Domain("forward problem inputs live on different grids".into()));
        }
        if dirichlet.kind() != BoundaryKind::Value {
            return Err(Error::Config("Dirichlet data must be a value series".into()));
        }
        for (k, node) in dirichlet.nodes().iter().enumerate() {
            let gap = (dirichlet.get(k, 1) - initial.get(node.i, node.j)).abs();
            if gap > 1e-12 {
                return Err(Error::Precondition(format!(
                    "boundary data at t = 0 differs from the initial state at node ({}, {}) by {gap:e}",
                    node.i, node.j
                )));
            }
        }
        Ok(Self {
            spec,
            c,
            source,
            dirichlet,
            initial,
        })
    }

    /// Zero boundary values, zero initial state, given source.
    pub fn with_source(spec: GridSpec, c: SpatialField, source: SpaceTimeField) -> Result<Self> {
        Self::new(
            spec,
            c,
            source,
            BoundarySeries::zeros(spec, BoundaryKind::Value),
            SpatialField::zeros(spec),
        )
    }
}

/// Interior numbering `(i, j) -> (i-2)(Nx-1) + (j-2)` for `2 <= i, j <= Nx`.
struct Interior {
    m: usize,
}

impl Interior {
    fn len(&self) -> usize {
        (self.m - 2) * (self.m - 2)
    }
    fn index(&self, i: usize, j: usize) -> usize {
        (i - 2) * (self.m - 2) + (j - 2)
    }
}

pub fn solve_forward(problem: &ForwardProblem) -> Result<SpaceTimeField> {
    let spec = problem.spec;
    let m = spec.nodes_per_axis();
    let (dx, dt) = (spec.dx(), spec.dt());
    let inv_h2 = 1.0 / (dx * dx);
    let interior = Interior { m };
    let n = interior.len();

    let mut u = SpaceTimeField::zeros(spec);
    u.set_level(1, &problem.initial);
    for l in 2..=spec.time_levels() {
        for (k, node) in problem.dirichlet.nodes().iter().enumerate() {
            u.set(node.i, node.j, l, problem.dirichlet.get(k, l));
        }
    }
    if n == 0 {
        return Ok(u);
    }

    // I - dt/2 (Δ_h + c) on interior unknowns
    let mut b = TripletBuilder::with_capacity(n, n, 5 * n);
    for i in 2..m {
        for j in 2..m {
            let row = interior.index(i, j);
            b.push(row, row, 1.0 + 0.5 * dt * (4.0 * inv_h2 - problem.c.get(i, j)));
            for (a, bb) in [(i + 1, j), (i - 1, j), (i, j + 1), (i, j - 1)] {
                if !spec.is_boundary(a, bb) {
                    b.push(row, interior.index(a, bb), -0.5 * dt * inv_h2);
                }
            }
        }
    }
    let lhs = b.build();
    let max_iter = default_max_iter(n);

    let mut rhs = vec![0.0; n];
    let mut guess = vec![0.0; n];
    for l in 1..spec.time_levels() {
        for i in 2..m {
            for j in 2..m {
                let k = interior.index(i, j);
                let cur = u.get(i, j, l);
                let lap = (u.get(i + 1, j, l) + u.get(i - 1, j, l) + u.get(i, j + 1, l) + u.get(i, j - 1, l)
                    - 4.0 * cur)
                    * inv_h2;
                let mut r = cur + 0.5 * dt * (lap + problem.c.get(i, j) * cur);
                r += 0.5 * dt * (problem.source.get(i, j, l) + problem.source.get(i, j, l + 1));
                for (a, bb) in [(i + 1, j), (i - 1, j), (i, j + 1), (i, j - 1)] {
                    if spec.is_boundary(a, bb) {
                        r += 0.5 * dt * inv_h2 * u.get(a, bb, l + 1);
                    }
                }
                rhs[k] = r;
                guess[k] = cur;
            }
        }
        let out = solve_spd_from(&lhs, &rhs, Some(&guess), STEP_TOL, max_iter)
            .map_err(|e| e.at_iteration(l))?;
        for i in 2..m {
            for j in 2..m {
                u.set(i, j, l + 1, out.x[interior.index(i, j)]);
            }
        }
    }
    Ok(u)
}

/// Largest Crank-Nicolson residual over interior nodes and steps, relative to
/// the largest term in the update.
pub fn scheme_residual(problem: &ForwardProblem, u: &SpaceTimeField) -> f64 {
    let spec = problem.spec;
    let m = spec.nodes_per_axis();
    let (dx, dt) = (spec.dx(), spec.dt());
    let inv_h2 = 1.0 / (dx * dx);
    let op = |i: usize, j: usize, l: usize| {
        (u.get(i + 1, j, l) + u.get(i - 1, j, l) + u.get(i, j + 1, l) + u.get(i, j - 1, l) - 4.0 * u.get(i, j, l))
            * inv_h2
            + problem.c.get(i, j) * u.get(i, j, l)
    };
    let mut worst: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for l in 1..spec.time_levels() {
        for i in 2..m {
            for j in 2..m {
                let lhs = (u.get(i, j, l + 1) - u.get(i, j, l)) / dt;
                let rhs = 0.5 * (op(i, j, l) + op(i, j, l + 1))
                    + 0.5 * (problem.source.get(i, j, l) + problem.source.get(i, j, l + 1));
                worst = worst.max((lhs - rhs).abs());
                scale = scale.max(lhs.abs()).max(rhs.abs());
            }
        }
    }
    if scale == 0.0 {
        worst
    } else {
        worst / scale
    }
}

/// Outward normal derivative `(u_boundary - u_inward) / dx` at every boundary
/// node and time level.
pub fn extract_normal_flux(u: &SpaceTimeField) -> BoundarySeries {
    let spec = *u.spec();
    let dx = spec.dx();
    let mut out = BoundarySeries::zeros(spec, BoundaryKind::Flux);
    let nodes = out.nodes().to_vec();
    for (k, node) in nodes.iter().enumerate() {
        let (ii, jj) = node.inward;
        for l in 1..=spec.time_levels() {
            out.set(k, l, (u.get(node.i, node.j, l) - u.get(ii, jj, l)) / dx);
        }
    }
    out
}

/// Solves the source problem (zero boundary and initial values, source
/// `f(x,t) p(x)`, coefficient `c`) on `spec` refined by `refinement`,
/// restricts to `spec` and returns the outward flux `G`.
pub fn simulate_source_flux(
    spec: GridSpec,
    refinement: usize,
    p: &dyn Fn(f64, f64) -> f64,
    f: &dyn Fn(f64, f64, f64) -> f64,
    c: &dyn Fn(f64, f64) -> f64,
) -> Result<BoundarySeries> {
    check_nonvanishing(spec, f)?;
    let fine = spec.refined(refinement)?;
    let source = sample_space_time(fine, |x, y, t| f(x, y, t) * p(x, y))?;
    let problem = ForwardProblem::with_source(fine, sample_spatial(fine, c)?, source)?;
    let u = solve_forward(&problem)?;
    Ok(extract_normal_flux(&u.restrict(spec, refinement)?))
}

/// Clean indirect data `G_t` for the inverse source problem.
pub fn generate_data(
    spec: GridSpec,
    refinement: usize,
    p: &dyn Fn(f64, f64) -> f64,
    f: &dyn Fn(f64, f64, f64) -> f64,
    c: &dyn Fn(f64, f64) -> f64,
) -> Result<BoundarySeries> {
    simulate_source_flux(spec, refinement, p, f, c)?.time_derivative()
}

/// Same as [`generate_data`] for already-sampled fields on the inversion grid
/// (no refinement).
pub fn generate_data_from_fields(p: &SpatialField, f: &SpaceTimeField, c: &SpatialField) -> Result<BoundarySeries> {
    let spec = *p.spec();
    if *f.spec() != spec || *c.spec() != spec {
        return Err(Error::Domain("source inputs live on different grids".into()));
    }
    let m = spec.nodes_per_axis();
    for i in 1..=m {
        for j in 1..=m {
            if f.get(i, j, 1) == 0.0 {
                return Err(Error::Precondition(format!("f(x, 0) vanishes at node ({i}, {j})")));
            }
        }
    }
    let mut source = SpaceTimeField::zeros(spec);
    for i in 1..=m {
        for j in 1..=m {
            for l in 1..=spec.time_levels() {
                source.set(i, j, l, f.get(i, j, l) * p.get(i, j));
            }
        }
    }
    let u = solve_forward(&ForwardProblem::with_source(spec, c.clone(), source)?)?;
    extract_normal_flux(&u).time_derivative()
}

fn check_nonvanishing(spec: GridSpec, f: &dyn Fn(f64, f64, f64) -> f64) -> Result<()> {
    let m = spec.nodes_per_axis();
    for i in 1..=m {
        for j in 1..=m {
            if f(spec.x(i), spec.y(j), 0.0) == 0.0 {
                return Err(Error::Precondition(format!("f(x, 0) vanishes at node ({i}, {j})")));
            }
        }
    }
    Ok(())
}

/// Forward solution of `u_t = Δu + c u` with initial state `g` and boundary
/// values `g1`.
pub fn solve_coefficient_forward(c: &SpatialField, g: &SpatialField, g1: &BoundarySeries) -> Result<SpaceTimeField> {
    let spec = *c.spec();
    let problem = ForwardProblem::new(spec, c.clone(), SpaceTimeField::zeros(spec), g1.clone(), g.clone())?;
    solve_forward(&problem)
}

/// Measured flux `F` for the coefficient problem, simulated on `spec` refined
/// by `refinement` and restricted back.
pub fn generate_coefficient_data(
    spec: GridSpec,
    refinement: usize,
    c_true: &dyn Fn(f64, f64) -> f64,
    g: &dyn Fn(f64, f64) -> f64,
    g1: &dyn Fn(f64, f64, f64) -> f64,
) -> Result<BoundarySeries> {
    let fine = spec.refined(refinement)?;
    let c = sample_spatial(fine, c_true)?;
    let initial = sample_spatial(fine, g)?;
    let boundary = BoundarySeries::from_fn(fine, BoundaryKind::Value, g1)?;
    let u = solve_coefficient_forward(&c, &initial, &boundary)?;
    Ok(extract_normal_flux(&u.restrict(spec, refinement)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn zero_problem(spec: GridSpec) -> ForwardProblem {
        ForwardProblem::with_source(spec, SpatialField::zeros(spec), SpaceTimeField::zeros(spec)).unwrap()
    }

    #[test]
    fn zero_data_zero_solution() {
        let spec = GridSpec::new(1.0, 6, 4, 0.2).unwrap();
        let u = solve_forward(&zero_problem(spec)).unwrap();
        assert!(u.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn constants_are_preserved() {
        let spec = GridSpec::new(1.0, 8, 5, 0.2).unwrap();
        let problem = ForwardProblem::new(
            spec,
            SpatialField::zeros(spec),
            SpaceTimeField::zeros(spec),
            BoundarySeries::from_fn(spec, BoundaryKind::Value, |_, _, _| 1.0).unwrap(),
            SpatialField::constant(spec, 1.0),
        )
        .unwrap();
        let u = solve_forward(&problem).unwrap();
        for v in u.values() {
            assert!((v - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn incompatible_initial_data_rejected() {
        let spec = GridSpec::new(1.0, 4, 2, 0.2).unwrap();
        let err = ForwardProblem::new(
            spec,
            SpatialField::zeros(spec),
            SpaceTimeField::zeros(spec),
            BoundarySeries::from_fn(spec, BoundaryKind::Value, |_, _, _| 1.0).unwrap(),
            SpatialField::zeros(spec),
        )
        .unwrap_err();
        assert!(matches!(err, Error::Precondition(_)));
    }

    #[test]
    fn scheme_residual_is_small() {
        let spec = GridSpec::new(1.0, 12, 8, 0.2).unwrap();
        let c = sample_spatial(spec, |x, y| 0.2 * (x * x + y * y)).unwrap();
        let source = sample_space_time(spec, |x, y, t| (1.0 + t) * (-(x * x + y * y) * 4.0).exp()).unwrap();
        let problem = ForwardProblem::with_source(spec, c, source).unwrap();
        let u = solve_forward(&problem).unwrap();
        assert!(scheme_residual(&problem, &u) <= 1e-10);
    }

    #[test]
    fn flux_of_constant_is_zero() {
        let spec = GridSpec::new(1.0, 4, 2, 0.2).unwrap();
        let u = sample_space_time(spec, |_, _, _| 2.0).unwrap();
        assert!(extract_normal_flux(&u).values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn flux_of_linear_field() {
        let spec = GridSpec::new(1.0, 8, 2, 0.2).unwrap();
        let u = sample_space_time(spec, |x, _, _| x).unwrap();
        let g = extract_normal_flux(&u);
        for (k, node) in g.nodes().iter().enumerate() {
            let want = match node.side {
                crate::grid::Side::East => 1.0,
                crate::grid::Side::West => -1.0,
                _ => 0.0,
            };
            for l in 1..=3 {
                assert!((g.get(k, l) - want).abs() < 1e-12, "{node:?}");
            }
        }
    }

    #[test]
    fn zero_source_gives_zero_data() {
        let spec = GridSpec::new(1.0, 6, 4, 0.2).unwrap();
        let gt = generate_data(spec, 2, &|_, _| 0.0, &|_, _, _| 1.2, &|_, _| 0.0).unwrap();
        assert!(gt.values().iter().all(|&v| v == 0.0));
        assert_eq!(gt.kind(), BoundaryKind::FluxRate);
    }

    #[test]
    fn vanishing_initial_factor_rejected() {
        let spec = GridSpec::new(1.0, 4, 2, 0.2).unwrap();
        let err = generate_data(spec, 1, &|_, _| 1.0, &|x, _, _| x, &|_, _| 0.0).unwrap_err();
        assert!(matches!(err, Error::Precondition(_)));
    }

    #[test]
    fn data_is_linear_in_source() {
        let spec = GridSpec::new(1.0, 10, 6, 0.2).unwrap();
        let f = |x: f64, y: f64, t: f64| 1.0 + 0.2 * (t * (x * x + y * y)).exp();
        let c = |x: f64, y: f64| 0.2 * (x * x + y * y);
        let p1 = |x: f64, y: f64| (-(x - 0.2).powi(2) * 8.0 - y * y * 8.0).exp();
        let p2 = |x: f64, y: f64| x * y * (1.0 - x * x) * (1.0 - y * y);
        let d1 = generate_data(spec, 1, &p1, &f, &c).unwrap();
        let d2 = generate_data(spec, 1, &p2, &f, &c).unwrap();
        let d12 = generate_data(spec, 1, &|x, y| p1(x, y) + 3.0 * p2(x, y), &f, &c).unwrap();
        let scale = d12.max_abs();
        for k in 0..d12.values().len() {
            let want = d1.values()[k] + 3.0 * d2.values()[k];
            assert!((d12.values()[k] - want).abs() <= 1e-10 * scale);
        }
    }

    #[test]
    fn maximum_principle_without_source() {
        let spec = GridSpec::new(1.0, 8, 16, 0.1).unwrap();
        // dt/dx^2 = 0.4 keeps the Crank-Nicolson weights nonnegative
        assert!(spec.dt() / spec.dx().powi(2) <= 0.5);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..5 {
            let mut c = SpatialField::zeros(spec);
            for v in c.values_mut() {
                *v = -rng.random_range(0.0..2.0);
            }
            let mut initial = SpatialField::zeros(spec);
            for v in initial.values_mut() {
                *v = rng.random_range(0.0..1.0);
            }
            let mut bd = BoundarySeries::zeros(spec, BoundaryKind::Value);
            let nodes = bd.nodes().to_vec();
            for (k, node) in nodes.iter().enumerate() {
                bd.set(k, 1, initial.get(node.i, node.j));
                for l in 2..=spec.time_levels() {
                    bd.set(k, l, rng.random_range(0.0..1.0));
                }
            }
            let u = solve_forward(&ForwardProblem::new(spec, c, SpaceTimeField::zeros(spec), bd.clone(), initial.clone()).unwrap())
                .unwrap();
            let parabolic_max = initial.max().max(bd.values().iter().copied().fold(0.0, f64::max));
            assert!(u.values().iter().all(|&v| v <= parabolic_max + 1e-12));
        }
    }
}
