//! Two-way coupling: drag assembly, the mild-form velocity update and the
//! Picard fixed-point loop over short time windows.

mod duhamel;
pub mod quadrature;

pub use duhamel::{duhamel_forced, duhamel_update};

use log::{debug, warn};
use serde::{Deserialize, Serialize};

use crate::diagnostics::sobolev_norms;
use crate::error::{NsvError, Result};
use crate::kinetic::{
    compute_moments, DistributionFunction, KineticScheme, MomentSet, PathSampler,
};
use crate::spectral::{VectorField, VelocityField};

use duhamel::{coupled_forcing, WeightCache};
use quadrature::gauss_lobatto;

/// Fluid velocity and particle distribution at a common time, with the
/// moments of `f` cached.
#[derive(Clone, Debug, PartialEq)]
pub struct SimState {
    u: VelocityField,
    f: DistributionFunction,
    moments: MomentSet,
}

impl SimState {
    /// The state time is taken from `f`.
    pub fn new(u: VelocityField, f: DistributionFunction) -> Result<Self> {
        if f.grid().space() != u.grid() {
            return Err(NsvError::GridMismatch("fluid and kinetic grids"));
        }
        let moments = compute_moments(&f);
        Ok(SimState { u, f, moments })
    }

    pub fn time(&self) -> f64 {
        self.f.time()
    }

    pub fn u(&self) -> &VelocityField {
        &self.u
    }

    pub fn f(&self) -> &DistributionFunction {
        &self.f
    }

    pub fn moments(&self) -> &MomentSet {
        &self.moments
    }

    pub fn into_parts(self) -> (VelocityField, DistributionFunction) {
        (self.u, self.f)
    }

    /// `∫u dx + ∫∫v f dv dx`.
    pub fn total_momentum(&self) -> [f64; 2] {
        let fl = self.u.integral();
        let pa = self.moments.momentum();
        [fl[0] + pa[0], fl[1] + pa[1]]
    }
}

/// Order of the fluid and kinetic updates inside one Picard iterate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepMode {
    /// Both halves of the map read the previous iterate.
    Jacobi,
    /// The kinetic half runs first and the fluid half reads its moments.
    GaussSeidel,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PicardConfig {
    /// Window length `ε`.
    pub window: f64,
    /// Stop once the X-norm of the velocity increment is at most this.
    pub tol: f64,
    pub max_iter: usize,
    /// Gauss–Lobatto nodes per window.
    pub quadrature_nodes: usize,
    pub sweep: SweepMode,
    pub kinetic: KineticScheme,
    /// Window halvings tried by [`advance`] before giving up.
    pub max_halvings: usize,
}

impl Default for PicardConfig {
    fn default() -> Self {
        PicardConfig {
            window: 0.01,
            tol: 1e-10,
            max_iter: 20,
            quadrature_nodes: 5,
            sweep: SweepMode::Jacobi,
            kinetic: KineticScheme::default(),
            max_halvings: 5,
        }
    }
}

impl PicardConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.window > 0.0 && self.window.is_finite()) {
            return Err(NsvError::arg("window", "must be positive and finite"));
        }
        if !(self.tol > 0.0) {
            return Err(NsvError::arg("tol", "must be positive"));
        }
        if self.max_iter < 2 {
            return Err(NsvError::arg("max_iter", "must be at least 2"));
        }
        if self.quadrature_nodes < 2 {
            return Err(NsvError::arg("quadrature_nodes", "must be at least 2"));
        }
        if self.kinetic.substeps == 0 {
            return Err(NsvError::arg("substeps", "must be at least 1"));
        }
        Ok(())
    }
}

/// Outcome of one Picard window.
#[derive(Clone, Debug, PartialEq)]
pub struct StepReport {
    pub t_start: f64,
    pub window: f64,
    pub iterations: usize,
    /// X-norm of `u^{n+1} − u^n` for each iterate.
    pub increments: Vec<f64>,
    /// `increments[n+1] / increments[n]`.
    pub contraction_factors: Vec<f64>,
    pub converged: bool,
    /// X-norm of the accepted velocity path.
    pub x_norm: f64,
    /// Y-norm of the accepted distribution path.
    pub y_norm: f64,
}

/// `−ρu + j` at every spatial node.
pub fn drag_force(moments: &MomentSet, u: &VectorField) -> Result<VectorField> {
    if moments.grid() != u.grid() {
        return Err(NsvError::GridMismatch("moments and velocity"));
    }
    let rho = moments.rho.values();
    let [a, b] = [0, 1].map(|c| {
        let j = moments.current.component(c);
        u.component(c)
            .iter()
            .zip(rho)
            .zip(j)
            .map(|((uc, r), jc)| jc - r * uc)
            .collect::<Vec<_>>()
    });
    VectorField::new(u.grid(), a, b)
}

/// Discrete `‖u‖_X`: max over nodes of `(‖u‖² + ‖∇u‖²)^{1/2}` plus the
/// Gauss–Lobatto quadrature of `‖Δu‖²` over the window, square-rooted.
pub fn x_norm(path: &[VectorField], window: f64) -> f64 {
    let (_, w) = gauss_lobatto(path.len());
    let mut sup: f64 = 0.0;
    let mut l2: f64 = 0.0;
    for (u, wm) in path.iter().zip(w) {
        let s = sobolev_norms(u);
        sup = sup.max((s.l2 + s.h1).sqrt());
        l2 += wm * window * s.h2;
    }
    sup + l2.sqrt()
}

/// Discrete `‖f‖_Y`: max over the path of `max(‖f‖_∞, M₀f)`.
pub fn y_norm(path: &[DistributionFunction]) -> f64 {
    path.iter().fold(0.0, |m, f| m.max(f.max()).max(f.mass()))
}

fn path_difference(a: &[VelocityField], b: &[VelocityField]) -> Vec<VectorField> {
    a.iter().zip(b).map(|(x, y)| x.sub(y)).collect()
}

/// Kinetic half of the map: `f` along the window nodes transported by the
/// velocity path.
fn kinetic_path(
    f0: &DistributionFunction,
    times: &[f64],
    u_path: &[VelocityField],
    scheme: &KineticScheme,
) -> Result<Vec<DistributionFunction>> {
    let sampler = PathSampler::new(
        times.to_vec(),
        u_path.iter().map(|u| u.as_vector().clone()).collect(),
    )?;
    let mut out = Vec::with_capacity(times.len());
    out.push(f0.clone());
    for m in 1..times.len() {
        let prev = &out[m - 1];
        let next = scheme
            .step(prev, &sampler, times[m] - prev.time())?
            .with_time(times[m]);
        out.push(next);
    }
    Ok(out)
}

struct Solver {
    cache: WeightCache,
}

impl Solver {
    fn new() -> Self {
        Solver {
            cache: WeightCache::default(),
        }
    }

    /// Picard iteration over `[state.t, t_end]`.
    fn solve(
        &mut self,
        state: &SimState,
        t_end: f64,
        cfg: &PicardConfig,
    ) -> Result<(SimState, StepReport)> {
        let t0 = state.time();
        let window = t_end - t0;
        if !(window > 0.0) {
            return Err(NsvError::arg("window", format!("empty window at t = {t0}")));
        }
        let q = cfg.quadrature_nodes;
        let grid = state.u.grid().clone();
        let weights = self.cache.get(&grid, q, window);
        let times: Vec<f64> = weights
            .nodes()
            .iter()
            .enumerate()
            .map(|(m, s)| if m + 1 == q { t_end } else { t0 + s * window })
            .collect();

        let mut u_path = vec![state.u.clone(); q];
        let mut f_path = vec![state.f.clone(); q];
        let mut moments = vec![state.moments.clone(); q];
        let mut increments = Vec::new();
        let mut converged = false;

        for iter in 0..cfg.max_iter {
            let new_f = kinetic_path(&state.f, &times, &u_path, &cfg.kinetic)?;
            if cfg.sweep == SweepMode::GaussSeidel {
                moments = new_f.iter().map(compute_moments).collect();
            }
            let forcing = u_path
                .iter()
                .zip(&moments)
                .map(|(u, m)| coupled_forcing(u, m))
                .collect::<Result<Vec<_>>>()?;
            let new_u = weights.apply(&grid, &state.u, &forcing);
            let delta = x_norm(&path_difference(&new_u, &u_path), window);
            increments.push(delta);
            debug!("t={t0:.6} iter={} increment={delta:.3e}", iter + 1);
            u_path = new_u;
            f_path = new_f;
            if cfg.sweep == SweepMode::Jacobi {
                moments = f_path.iter().map(compute_moments).collect();
            }
            if delta <= cfg.tol {
                converged = true;
                break;
            }
        }

        let contraction_factors = increments
            .windows(2)
            .map(|w| if w[0] > 0.0 { w[1] / w[0] } else { 0.0 })
            .collect();
        let report = StepReport {
            t_start: t0,
            window,
            iterations: increments.len(),
            x_norm: x_norm(
                &u_path.iter().map(|u| u.as_vector().clone()).collect::<Vec<_>>(),
                window,
            ),
            y_norm: y_norm(&f_path),
            increments,
            contraction_factors,
            converged,
        };
        let u = u_path.pop().expect("at least two nodes");
        let f = f_path.pop().expect("at least two nodes");
        let end = SimState {
            u,
            f,
            moments: moments.pop().expect("at least two nodes"),
        };
        Ok((end, report))
    }
}

/// One Picard window of length `cfg.window` starting at `state.time()`.
/// Non-convergence is reported through `StepReport::converged`, not as an error.
pub fn picard_solve(state: &SimState, cfg: &PicardConfig) -> Result<(SimState, StepReport)> {
    cfg.validate()?;
    Solver::new().solve(state, state.time() + cfg.window, cfg)
}

/// Chains Picard windows from `state.time()` to `t_end`, halving a window
/// that fails to converge up to `cfg.max_halvings` times. `observer` sees
/// every accepted window end.
pub fn advance(
    state: SimState,
    t_end: f64,
    cfg: &PicardConfig,
    mut observer: impl FnMut(&SimState, &StepReport) -> Result<()>,
) -> Result<SimState> {
    cfg.validate()?;
    let t_start = state.time();
    if !(t_end >= t_start) {
        return Err(NsvError::arg(
            "t_end",
            format!("must not precede the state time {t_start}, got {t_end}"),
        ));
    }
    let mut solver = Solver::new();
    let mut state = state;
    loop {
        let t = state.time();
        let remaining = t_end - t;
        if remaining <= 1e-12 * t_end.abs().max(1.0) {
            return Ok(state);
        }
        let mut span = if remaining <= cfg.window * (1.0 + 1e-9) {
            remaining
        } else {
            cfg.window
        };
        let mut accepted = None;
        for attempt in 0..=cfg.max_halvings {
            let end = if span == remaining { t_end } else { t + span };
            let (next, report) = solver.solve(&state, end, cfg)?;
            if report.converged {
                accepted = Some((next, report));
                break;
            }
            warn!(
                "no convergence at t={t:.6} with window {span:e} after {} iterations (attempt {})",
                report.iterations,
                attempt + 1
            );
            span *= 0.5;
        }
        match accepted {
            Some((next, report)) => {
                observer(&next, &report)?;
                state = next;
            }
            None => {
                return Err(NsvError::NonConvergence {
                    t,
                    retries: cfg.max_halvings,
                })
            }
        }
    }
}
