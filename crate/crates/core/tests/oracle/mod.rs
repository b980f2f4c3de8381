//! Dense reference matrices built directly from the stencil descriptions,
//! with their own node numbering and coordinates. Shared by the assembly
//! tests and the acceptance suite.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};

#[derive(Clone, Copy, Debug)]
pub struct Dims {
    pub r: f64,
    pub nx: usize,
    pub nt: usize,
    pub t_final: f64,
}

impl Dims {
    pub fn dx(&self) -> f64 {
        2.0 * self.r / self.nx as f64
    }
    pub fn dt(&self) -> f64 {
        self.t_final / self.nt as f64
    }
    pub fn len(&self) -> usize {
        (self.nx + 1) * (self.nx + 1) * (self.nt + 1)
    }
    pub fn x(&self, i: usize) -> f64 {
        -self.r + (i as f64 - 1.0) * self.dx()
    }
    pub fn t(&self, l: usize) -> f64 {
        (l as f64 - 1.0) * self.dt()
    }
    /// Zero-based row/column of node `(i, j, l)`.
    pub fn col(&self, i: usize, j: usize, l: usize) -> usize {
        (i - 1) * (self.nx + 1) * (self.nt + 1) + (j - 1) * (self.nt + 1) + l - 1
    }
    fn on_boundary(&self, i: usize, j: usize) -> bool {
        i == 1 || j == 1 || i == self.nx + 1 || j == self.nx + 1
    }
}

/// `d/dt f` at level `l` from grid samples: central inside, three-point
/// one-sided at the ends.
pub fn rate(dims: &Dims, f: &dyn Fn(f64, f64, f64) -> f64, x: f64, y: f64, l: usize) -> f64 {
    let dt = dims.dt();
    let s = |k: usize| f(x, y, dims.t(k));
    let last = dims.nt + 1;
    if l == 1 {
        (-3.0 * s(1) + 4.0 * s(2) - s(3)) / (2.0 * dt)
    } else if l == last {
        (3.0 * s(last) - 4.0 * s(last - 1) + s(last - 2)) / (2.0 * dt)
    } else {
        (s(l + 1) - s(l - 1)) / (2.0 * dt)
    }
}

pub fn matrix_d(dims: &Dims, c: &dyn Fn(f64, f64) -> f64, f: &dyn Fn(f64, f64, f64) -> f64) -> DMatrix<f64> {
    let n = dims.len();
    let (dx, dt) = (dims.dx(), dims.dt());
    let mut d = DMatrix::zeros(n, n);
    for i in 2..=dims.nx {
        for j in 2..=dims.nx {
            let (x, y) = (dims.x(i), dims.x(j));
            for l in 2..=dims.nt + 1 {
                let row = dims.col(i, j, l);
                d[(row, row)] += 1.0 / dt + 4.0 / (dx * dx) - c(x, y);
                d[(row, dims.col(i, j, l - 1))] += -1.0 / dt;
                d[(row, dims.col(i, j, 1))] += -rate(dims, f, x, y, l) / f(x, y, 0.0);
                for (a, b) in [(i + 1, j), (i - 1, j), (i, j + 1), (i, j - 1)] {
                    d[(row, dims.col(a, b, l))] += -1.0 / (dx * dx);
                }
            }
        }
    }
    d
}

pub fn matrix_dx(dims: &Dims) -> DMatrix<f64> {
    gradient(dims, true)
}

pub fn matrix_dy(dims: &Dims) -> DMatrix<f64> {
    gradient(dims, false)
}

fn gradient(dims: &Dims, along_x: bool) -> DMatrix<f64> {
    let n = dims.len();
    let h = dims.dx();
    let mut m = DMatrix::zeros(n, n);
    for i in 2..=dims.nx + 1 {
        for j in 2..=dims.nx + 1 {
            for l in 1..=dims.nt + 1 {
                let row = dims.col(i, j, l);
                m[(row, row)] = 1.0 / h;
                let back = if along_x { dims.col(i - 1, j, l) } else { dims.col(i, j - 1, l) };
                m[(row, back)] = -1.0 / h;
            }
        }
    }
    m
}

pub fn matrix_k1(dims: &Dims) -> DMatrix<f64> {
    let n = dims.len();
    let mut m = DMatrix::zeros(n, n);
    for i in 1..=dims.nx + 1 {
        for j in 1..=dims.nx + 1 {
            if dims.on_boundary(i, j) {
                for l in 1..=dims.nt + 1 {
                    let row = dims.col(i, j, l);
                    m[(row, row)] = 1.0;
                }
            }
        }
    }
    m
}

pub fn matrix_k2(dims: &Dims) -> DMatrix<f64> {
    let n = dims.len();
    let h = dims.dx();
    let last = dims.nx + 1;
    let mut m = DMatrix::zeros(n, n);
    for i in 1..=last {
        for j in 1..=last {
            let inward = if i == 1 {
                (2, j)
            } else if i == last {
                (last - 1, j)
            } else if j == 1 {
                (i, 2)
            } else if j == last {
                (i, last - 1)
            } else {
                continue;
            };
            for l in 1..=dims.nt + 1 {
                let row = dims.col(i, j, l);
                m[(row, row)] = 1.0 / h;
                m[(row, dims.col(inward.0, inward.1, l))] = -1.0 / h;
            }
        }
    }
    m
}

/// Dense minimizer of
/// `|D v|² + |K1 v|² + |K2 v - g|² + eps (|v|² + |Dx v|² + |Dy v|²)`
/// by SVD least squares on the stacked rectangular system.
pub fn dense_minimizer(
    dims: &Dims,
    c: &dyn Fn(f64, f64) -> f64,
    f: &dyn Fn(f64, f64, f64) -> f64,
    g: &DVector<f64>,
    eps: f64,
) -> DVector<f64> {
    let n = dims.len();
    let se = eps.sqrt();
    let blocks = [
        matrix_d(dims, c, f),
        matrix_k1(dims),
        matrix_k2(dims),
        DMatrix::identity(n, n) * se,
        matrix_dx(dims) * se,
        matrix_dy(dims) * se,
    ];
    let mut stacked = DMatrix::zeros(6 * n, n);
    for (k, b) in blocks.iter().enumerate() {
        stacked.view_mut((k * n, 0), (n, n)).copy_from(b);
    }
    let mut rhs = DVector::zeros(6 * n);
    rhs.rows_mut(2 * n, n).copy_from(g);
    stacked.svd(true, true).solve(&rhs, 1e-300).expect("svd solve")
}

/// Largest entrywise difference between a dense oracle and a sparse matrix
/// given as `(row, col, value)` lookups.
pub fn max_entry_gap(oracle: &DMatrix<f64>, lookup: impl Fn(usize, usize) -> f64) -> f64 {
    let mut gap = 0.0f64;
    for r in 0..oracle.nrows() {
        for c in 0..oracle.ncols() {
            gap = gap.max((oracle[(r, c)] - lookup(r, c)).abs());
        }
    }
    gap
}

/// Max-norm error of the forward solver against
/// `u* = e^{-t} sin(πx/2R) sin(πy/2R)` with `c = 0.2|x|²`, for each
/// `(nx, nt)` level.
pub fn manufactured_errors(levels: &[(usize, usize)], t_final: f64) -> Vec<f64> {
    use quasirev::fields::{sample_space_time, sample_spatial};
    use quasirev::forward::{solve_forward, ForwardProblem};
    use quasirev::{BoundaryKind, BoundarySeries, GridSpec};
    use std::f64::consts::PI;

    let r = 1.0;
    let k = PI / (2.0 * r);
    let exact = move |x: f64, y: f64, t: f64| (-t).exp() * (k * x).sin() * (k * y).sin();
    let c = |x: f64, y: f64| 0.2 * (x * x + y * y);
    levels
        .iter()
        .map(|&(nx, nt)| {
            let spec = GridSpec::new(r, nx, nt, t_final).unwrap();
            let source = sample_space_time(spec, |x, y, t| exact(x, y, t) * (-1.0 + 2.0 * k * k - c(x, y))).unwrap();
            let problem = ForwardProblem::new(
                spec,
                sample_spatial(spec, c).unwrap(),
                source,
                BoundarySeries::from_fn(spec, BoundaryKind::Value, exact).unwrap(),
                sample_spatial(spec, |x, y| exact(x, y, 0.0)).unwrap(),
            )
            .unwrap();
            let u = solve_forward(&problem).unwrap();
            let want = sample_space_time(spec, exact).unwrap();
            u.values()
                .iter()
                .zip(want.values())
                .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
        })
        .collect()
}
