//! Linearization iteration for the coefficient problem
//!
//! ```text
//! u_t = Δu + c(x) u,   u = g1 on ∂Ω,   u(·, 0) = g,
//! ```
//!
//! where `c` is recovered from the boundary flux `F = ∂_ν u`. Each step
//! freezes the forward solution `u_n`, reads the flux mismatch as source
//! data for the linear solver with `f = u_n`, and turns the recovered
//! source factor into the next coefficient.

use crate::error::{Error, Result};
use crate::fields::{BoundaryKind, BoundarySeries, SpaceTimeField, SpatialField};
use crate::forward::{extract_normal_flux, solve_coefficient_forward};
use crate::grid::GridSpec;
use crate::noise::{apply_noise, NoiseSpec};
use crate::qr::{solve_qr, QrOptions, QrProblem};

pub const DEFAULT_N_STAR: usize = 20;

/// How the recovered source factor `p_n` becomes `c_{n+1}`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum UpdateRule {
    /// Data `F - ∂_ν u_n`, operator coefficient `c_0`,
    /// `c_{n+1} = c_0 + p_n`.
    #[default]
    Background,
    /// Data `F - ∂_ν u_n`, operator coefficient `c_n`,
    /// `c_{n+1} = c_n + p_n`.
    Cumulative,
    /// Data `F - ∂_ν u_0` at every step, operator coefficient `c_0`,
    /// `c_{n+1} = c_0 + p_n`.
    Anchored,
}

impl UpdateRule {
    pub fn label(self) -> &'static str {
        match self {
            UpdateRule::Background => "background",
            UpdateRule::Cumulative => "cumulative",
            UpdateRule::Anchored => "anchored",
        }
    }

    pub fn from_label(s: &str) -> Option<Self> {
        match s {
            "background" => Some(UpdateRule::Background),
            "cumulative" => Some(UpdateRule::Cumulative),
            "anchored" => Some(UpdateRule::Anchored),
            _ => None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct CipProblem {
    pub spec: GridSpec,
    pub g: SpatialField,
    pub g1: BoundarySeries,
    pub data_f: BoundarySeries,
    pub c0: f64,
    pub n_star: usize,
    pub qr: QrOptions,
    pub noise: NoiseSpec,
    pub update: UpdateRule,
    pub keep_history: bool,
}

impl CipProblem {
    pub fn new(g: SpatialField, g1: BoundarySeries, data_f: BoundarySeries, c0: f64, n_star: usize) -> Result<Self> {
        let spec = *g.spec();
        if *g1.spec() != spec || *data_f.spec() != spec {
            return Err(Error::Domain("coefficient problem inputs live on different grids".into()));
        }
        if g1.kind() != BoundaryKind::Value {
            return Err(Error::Config("g1 must be a boundary value series".into()));
        }
        if data_f.kind() != BoundaryKind::Flux {
            return Err(Error::Config("measured data F must be a flux series".into()));
        }
        if !c0.is_finite() {
            return Err(Error::Config(format!("background coefficient must be finite, got {c0}")));
        }
        if n_star == 0 {
            return Err(Error::Config("n_star must be at least 1".into()));
        }
        if let Some(k) = g.values().iter().position(|&v| !(v > 0.0)) {
            let m = spec.nodes_per_axis();
            return Err(Error::Precondition(format!(
                "initial state must be positive, fails at node ({}, {})",
                k / m + 1,
                k % m + 1
            )));
        }
        for (k, node) in g1.nodes().iter().enumerate() {
            if (g1.get(k, 1) - g.get(node.i, node.j)).abs() > 1e-12 {
                return Err(Error::Precondition(format!(
                    "g1(x, 0) differs from g at boundary node ({}, {})",
                    node.i, node.j
                )));
            }
        }
        Ok(Self {
            spec,
            g,
            g1,
            data_f,
            c0,
            n_star,
            qr: QrOptions::default(),
            noise: NoiseSpec::none(),
            update: UpdateRule::default(),
            keep_history: false,
        })
    }
}

#[derive(Clone, Debug)]
pub struct CipState {
    pub n: usize,
    pub c_n: SpatialField,
    pub u_n: SpaceTimeField,
    /// `e_1 .. e_n`.
    pub e_history: Vec<f64>,
    /// `c_0 .. c_n`, filled only when `keep_history` is set.
    pub c_history: Vec<SpatialField>,
    /// `max |u_{k+1} - u_k|` for `k = 0 .. n-1`.
    pub u_change: Vec<f64>,
    /// `max |G_k|` of the flux mismatch fed to step `k`.
    pub data_residual: Vec<f64>,
}

/// `‖c_new - c_old‖_∞ / ‖c_old‖_∞`.
pub fn relative_difference(c_new: &SpatialField, c_old: &SpatialField) -> Result<f64> {
    if c_new.spec() != c_old.spec() {
        return Err(Error::Domain("coefficients live on different grids".into()));
    }
    let denom = c_old.max_abs();
    if denom == 0.0 {
        return Err(Error::Domain("relative difference against a zero coefficient".into()));
    }
    let num = c_new
        .values()
        .iter()
        .zip(c_old.values())
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    Ok(num / denom)
}

pub fn cip_iterate(problem: &CipProblem) -> Result<CipState> {
    let spec = problem.spec;
    let background = SpatialField::constant(spec, problem.c0);
    let measured = apply_noise(&problem.data_f, &problem.noise);

    let mut c = background.clone();
    let mut u = solve_coefficient_forward(&c, &problem.g, &problem.g1).map_err(|e| e.at_iteration(0))?;
    let anchor = measured.difference(&extract_normal_flux(&u))?;

    let mut state = CipState {
        n: 0,
        c_n: c.clone(),
        u_n: u.clone(),
        e_history: Vec::with_capacity(problem.n_star),
        c_history: Vec::new(),
        u_change: Vec::with_capacity(problem.n_star),
        data_residual: Vec::with_capacity(problem.n_star),
    };
    if problem.keep_history {
        state.c_history.push(c.clone());
    }

    for n in 0..problem.n_star {
        let step = || -> Result<(SpatialField, SpaceTimeField, f64)> {
            let mismatch = match problem.update {
                UpdateRule::Anchored => anchor.clone(),
                _ => measured.difference(&extract_normal_flux(&u))?,
            };
            let operator_c = match problem.update {
                UpdateRule::Cumulative => c.clone(),
                _ => background.clone(),
            };
            let qr = QrProblem::new(operator_c, u.clone(), mismatch.time_derivative()?, problem.qr)?;
            let p = solve_qr(&qr)?.p;
            let base = match problem.update {
                UpdateRule::Cumulative => &c,
                _ => &background,
            };
            let next = base.zip_map(&p, |a, b| a + b)?;
            let u_next = solve_coefficient_forward(&next, &problem.g, &problem.g1)?;
            Ok((next, u_next, mismatch.max_abs()))
        };
        let (next, u_next, residual) = step().map_err(|e| e.at_iteration(n + 1))?;

        state.e_history.push(relative_difference(&next, &c).map_err(|e| e.at_iteration(n + 1))?);
        state.u_change.push(
            u_next
                .values()
                .iter()
                .zip(u.values())
                .fold(0.0f64, |m, (a, b)| m.max((a - b).abs())),
        );
        state.data_residual.push(residual);
        if problem.keep_history {
            state.c_history.push(next.clone());
        }
        c = next;
        u = u_next;
    }
    state.n = problem.n_star;
    state.c_n = c;
    state.u_n = u;
    Ok(state)
}
