//! Phase-space distribution `f(x, v)` on a periodic `x` grid times a truncated
//! velocity box, evolved by backward characteristics.
//!
//! Values are stored `[i₁][i₂][j₁][j₂]` with `j₂` (the second velocity
//! component) fastest, so each spatial point owns a contiguous `n_v × n_v`
//! velocity block.

mod characteristics;
mod moments;
mod sampler;
mod semi_lagrangian;

pub use characteristics::{
    integrate_characteristic, lipschitz_dependence_probe, CharacteristicState, Tracer,
};
pub use moments::{compute_moments, MomentSet};
pub use sampler::{ConstantSampler, FnSampler, PathSampler, VelocitySampler};
pub use semi_lagrangian::{
    exact_free_solution, semi_lagrangian_step, ClipPolicy, KineticScheme, VelocityInterp,
};

use crate::error::{NsvError, Result};
use crate::spectral::SpectralGrid;

/// Spatial grid times the velocity box `[−v_max, v_max]²` sampled with `n_v`
/// points per axis (nodes include both end points; `v = 0` is a node only for
/// odd `n_v`).
#[derive(Clone, Debug, PartialEq)]
pub struct PhaseGrid {
    space: SpectralGrid,
    n_v: usize,
    v_max: f64,
}

impl PhaseGrid {
    pub fn new(space: SpectralGrid, n_v: usize, v_max: f64) -> Result<Self> {
        if n_v < 4 {
            return Err(NsvError::Grid(format!(
                "velocity points per axis must be at least 4, got {n_v}"
            )));
        }
        if !(v_max.is_finite() && v_max > 0.0) {
            return Err(NsvError::Grid(format!("v_max must be positive, got {v_max}")));
        }
        Ok(PhaseGrid { space, n_v, v_max })
    }

    pub fn space(&self) -> &SpectralGrid {
        &self.space
    }

    pub fn n_v(&self) -> usize {
        self.n_v
    }

    pub fn v_max(&self) -> f64 {
        self.v_max
    }

    pub fn dv(&self) -> f64 {
        2.0 * self.v_max / (self.n_v - 1) as f64
    }

    pub fn velocity(&self, j: usize) -> f64 {
        -self.v_max + j as f64 * self.dv()
    }

    /// Velocity nodes per spatial point, `n_v²`.
    pub fn block(&self) -> usize {
        self.n_v * self.n_v
    }

    pub fn len(&self) -> usize {
        self.space.len() * self.block()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn index(&self, i1: usize, i2: usize, j1: usize, j2: usize) -> usize {
        ((i1 * self.space.n() + i2) * self.n_v + j1) * self.n_v + j2
    }

    /// One-dimensional trapezoid weight of velocity node `j`.
    pub fn trapezoid_weight(&self, j: usize) -> f64 {
        if j == 0 || j + 1 == self.n_v {
            0.5 * self.dv()
        } else {
            self.dv()
        }
    }

    /// Phase-space volume weight of a velocity node pair (spatial cell included).
    pub fn node_weight(&self, j1: usize, j2: usize) -> f64 {
        self.trapezoid_weight(j1) * self.trapezoid_weight(j2) * self.space.cell_area()
    }
}

/// Nonnegative samples of `f` on a [`PhaseGrid`] at time `time`.
#[derive(Clone, Debug, PartialEq)]
pub struct DistributionFunction {
    grid: PhaseGrid,
    values: Vec<f64>,
    time: f64,
}

impl DistributionFunction {
    pub fn zeros(grid: &PhaseGrid, time: f64) -> Self {
        DistributionFunction {
            grid: grid.clone(),
            values: vec![0.0; grid.len()],
            time,
        }
    }

    /// Wraps raw samples; negative entries are rejected.
    pub fn new(grid: &PhaseGrid, values: Vec<f64>, time: f64) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(NsvError::GridMismatch("distribution length"));
        }
        if let Some(bad) = values.iter().find(|v| !(**v >= 0.0) || !v.is_finite()) {
            return Err(NsvError::arg(
                "f",
                format!("samples must be finite and nonnegative, found {bad}"),
            ));
        }
        Ok(DistributionFunction {
            grid: grid.clone(),
            values,
            time,
        })
    }

    /// Samples `g(x, v)` at every node, clipping negatives to zero.
    pub fn from_fn(grid: &PhaseGrid, time: f64, g: impl Fn([f64; 2], [f64; 2]) -> f64) -> Self {
        let space = grid.space();
        let n = space.n();
        let mut values = Vec::with_capacity(grid.len());
        for i1 in 0..n {
            for i2 in 0..n {
                let x = [space.coordinate(i1), space.coordinate(i2)];
                for j1 in 0..grid.n_v() {
                    for j2 in 0..grid.n_v() {
                        let v = [grid.velocity(j1), grid.velocity(j2)];
                        values.push(g(x, v).max(0.0));
                    }
                }
            }
        }
        DistributionFunction {
            grid: grid.clone(),
            values,
            time,
        }
    }

    pub fn grid(&self) -> &PhaseGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn max(&self) -> f64 {
        self.values.iter().fold(0.0, |m, &v| m.max(v))
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    /// `∫∫ f dx dv` with trapezoid weights in `v`.
    pub fn mass(&self) -> f64 {
        self.weighted_sum(|f| f)
    }

    /// Discrete `‖f‖_{L^p}` for finite `p ≥ 1`.
    pub fn lp_norm(&self, p: f64) -> f64 {
        self.weighted_sum(|f| f.powf(p)).powf(1.0 / p)
    }

    pub fn l2_norm(&self) -> f64 {
        self.weighted_sum(|f| f * f).sqrt()
    }

    fn weighted_sum(&self, g: impl Fn(f64) -> f64) -> f64 {
        let nv = self.grid.n_v();
        let w: Vec<f64> = (0..nv).map(|j| self.grid.trapezoid_weight(j)).collect();
        let mut total = 0.0;
        for block in self.values.chunks_exact(self.grid.block()) {
            let mut acc = 0.0;
            for (j1, row) in block.chunks_exact(nv).enumerate() {
                let mut r = 0.0;
                for (j2, &f) in row.iter().enumerate() {
                    r += w[j2] * g(f);
                }
                acc += w[j1] * r;
            }
            total += acc;
        }
        total * self.grid.space().cell_area()
    }

    /// Fraction of the mass sitting on the outermost ring of velocity nodes.
    pub fn boundary_mass_fraction(&self) -> f64 {
        let nv = self.grid.n_v();
        let mut edge = 0.0;
        for block in self.values.chunks_exact(self.grid.block()) {
            for j1 in 0..nv {
                for j2 in 0..nv {
                    if j1 == 0 || j2 == 0 || j1 + 1 == nv || j2 + 1 == nv {
                        edge += block[j1 * nv + j2]
                            * self.grid.trapezoid_weight(j1)
                            * self.grid.trapezoid_weight(j2);
                    }
                }
            }
        }
        let total = self.mass();
        if total == 0.0 {
            0.0
        } else {
            edge * self.grid.space().cell_area() / total
        }
    }

    pub(crate) fn from_parts_unchecked(grid: &PhaseGrid, values: Vec<f64>, time: f64) -> Self {
        DistributionFunction {
            grid: grid.clone(),
            values,
            time,
        }
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub(crate) fn with_time(mut self, time: f64) -> Self {
        self.time = time;
        self
    }
}
