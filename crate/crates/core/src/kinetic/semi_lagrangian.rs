use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{NsvError, Result};
use crate::interp::{bspline_weights, cubic_weights, split, SplineFilter};

use super::characteristics::Tracer;
use super::sampler::VelocitySampler;
use super::{DistributionFunction, PhaseGrid};

/// Upper cap applied to interpolated values before the `e^{2dt}` factor.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClipPolicy {
    /// Max over the 2⁴ nodes of the phase-space cell holding the foot point.
    LocalStencil,
    /// Global max of the previous iterate.
    GlobalMax,
}

/// Interpolant along the velocity axes. Space always uses cubic Lagrange.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VelocityInterp {
    Lagrange,
    Spline,
}

/// Discretisation parameters of the semi-Lagrangian update.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KineticScheme {
    /// RK4 substeps per traced step (`h = dt / substeps`).
    pub substeps: usize,
    pub clip: ClipPolicy,
    pub velocity: VelocityInterp,
}

impl Default for KineticScheme {
    fn default() -> Self {
        KineticScheme {
            substeps: 4,
            clip: ClipPolicy::LocalStencil,
            velocity: VelocityInterp::Spline,
        }
    }
}

/// `f` copied into a buffer with periodic ghost layers in `x` (one before, two
/// after) and zero ghost layers in `v` (three on each side).
struct PaddedPhase {
    n: usize,
    n_v: usize,
    px: usize,
    pv: usize,
    inv_dx: f64,
    inv_dv: f64,
    v_max: f64,
    spline: bool,
    /// Interpolation coefficients: samples, or B-spline coefficients along `v`.
    data: Vec<f64>,
    /// Max of the samples over the 2⁴ corners of the cell with this lower corner.
    cell_max: Vec<f64>,
}

const V_PAD: usize = 3;

impl PaddedPhase {
    fn new(f: &DistributionFunction, velocity: VelocityInterp) -> Self {
        let grid = f.grid();
        let n = grid.space().n();
        let n_v = grid.n_v();
        let px = n + 3;
        let pv = n_v + 2 * V_PAD;
        let mut data = vec![0.0; px * px * pv * pv];
        let src = f.values();
        for p1 in 0..px {
            let i1 = (p1 + n - 1) % n;
            for p2 in 0..px {
                let i2 = (p2 + n - 1) % n;
                let dst_block = (p1 * px + p2) * pv * pv;
                for j1 in 0..n_v {
                    let s = grid.index(i1, i2, j1, 0);
                    let d = dst_block + (j1 + V_PAD) * pv + V_PAD;
                    data[d..d + n_v].copy_from_slice(&src[s..s + n_v]);
                }
            }
        }
        let cell_max = corner_max(&data, [px, px, pv, pv]);
        let spline = velocity == VelocityInterp::Spline;
        if spline {
            let filter = SplineFilter::new(pv);
            data.par_chunks_mut(pv * pv).for_each(|blk| {
                for r in 0..pv {
                    filter.apply(blk, r * pv, 1);
                }
                for c in 0..pv {
                    filter.apply(blk, c, pv);
                }
            });
        }
        PaddedPhase {
            n,
            n_v,
            px,
            pv,
            inv_dx: 1.0 / grid.space().dx(),
            inv_dv: 1.0 / grid.dv(),
            v_max: grid.v_max(),
            spline,
            data,
            cell_max,
        }
    }

    /// Velocity-axis stencil start in padded coordinates, or `None` when the
    /// whole stencil lies in the zero extension.
    #[inline(always)]
    fn v_stencil(&self, v: f64) -> Option<(usize, f64)> {
        let (fl, t) = split((v + self.v_max) * self.inv_dv);
        if fl < -2 || fl > self.n_v as i64 {
            None
        } else {
            Some(((fl + 2) as usize, t))
        }
    }

    /// Tensor-product cubic value at `(x, v)` and the max over the enclosing
    /// cell's 16 nodes.
    #[inline(always)]
    fn interp(&self, x: [f64; 2], v: [f64; 2]) -> (f64, f64) {
        let (q1, tv1) = match self.v_stencil(v[0]) {
            Some(s) => s,
            None => return (0.0, 0.0),
        };
        let (q2, tv2) = match self.v_stencil(v[1]) {
            Some(s) => s,
            None => return (0.0, 0.0),
        };
        let (f1, tx1) = split(x[0] * self.inv_dx);
        let (f2, tx2) = split(x[1] * self.inv_dx);
        let b1 = f1.rem_euclid(self.n as i64) as usize;
        let b2 = f2.rem_euclid(self.n as i64) as usize;
        let wx1 = cubic_weights(tx1);
        let wx2 = cubic_weights(tx2);
        let (wv1, wv2) = if self.spline {
            (bspline_weights(tv1), bspline_weights(tv2))
        } else {
            (cubic_weights(tv1), cubic_weights(tv2))
        };
        let pv = self.pv;
        let vblock = pv * pv;
        let voff = q1 * pv + q2;

        let mut acc = 0.0;
        for a in 0..4 {
            let mut sa = 0.0;
            for b in 0..4 {
                let base = ((b1 + a) * self.px + b2 + b) * vblock + voff;
                let blk = &self.data[base..base + 3 * pv + 4];
                let mut sab = 0.0;
                for c in 0..4 {
                    let r = &blk[c * pv..c * pv + 4];
                    sab += wv1[c] * (wv2[0] * r[0] + wv2[1] * r[1] + wv2[2] * r[2] + wv2[3] * r[3]);
                }
                sa += wx2[b] * sab;
            }
            acc += wx1[a] * sa;
        }
        let corner = ((b1 + 1) * self.px + b2 + 1) * vblock + voff + pv + 1;
        (acc, self.cell_max[corner])
    }
}

/// Running max over index pairs `{k, k + 1}` along each axis of a row-major
/// array with the given shape.
fn corner_max(src: &[f64], shape: [usize; 4]) -> Vec<f64> {
    let mut out = src.to_vec();
    let mut stride = 1;
    for axis in (0..4).rev() {
        let len = shape[axis];
        let outer = out.len() / (len * stride);
        for o in 0..outer {
            let base = o * len * stride;
            for k in 0..len - 1 {
                for s in 0..stride {
                    let i = base + k * stride + s;
                    out[i] = out[i].max(out[i + stride]);
                }
            }
        }
        stride *= len;
    }
    out
}

impl KineticScheme {
    /// One backward-characteristic update over `[t, t + dt]`:
    /// `f^{n+1}(x, v) = e^{2dt} · clip(f^n(χ_backward(x, v)))`.
    pub fn step(
        &self,
        f: &DistributionFunction,
        sampler: &dyn VelocitySampler,
        dt: f64,
    ) -> Result<DistributionFunction> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(NsvError::arg("dt", format!("must be positive, got {dt}")));
        }
        let t0 = f.time();
        let t1 = t0 + dt;
        sampler.check_time(t0)?;
        sampler.check_time(t1)?;
        let grid = f.grid();
        if f.is_zero() {
            return Ok(DistributionFunction::zeros(grid, t1));
        }
        let tracer = Tracer::new(sampler, t1, t0, self.substeps)?;
        let padded = PaddedPhase::new(f, self.velocity);
        let growth = (2.0 * dt).exp();
        let global_max = f.max();
        let clip = self.clip;

        let space = grid.space();
        let n = space.n();
        let n_v = grid.n_v();
        let xs: Vec<f64> = (0..n).map(|i| space.coordinate(i)).collect();
        let vs: Vec<f64> = (0..n_v).map(|j| grid.velocity(j)).collect();
        let mut out = vec![0.0; grid.len()];
        out.par_chunks_mut(n * n_v * n_v)
            .enumerate()
            .for_each(|(i1, row)| {
                for i2 in 0..n {
                    let x = [xs[i1], xs[i2]];
                    let block = &mut row[i2 * n_v * n_v..(i2 + 1) * n_v * n_v];
                    for j1 in 0..n_v {
                        for j2 in 0..n_v {
                            let v = [vs[j1], vs[j2]];
                            let (xf, vf) = tracer.trace_from_node(i1, i2, x, v);
                            let (val, cell_max) = padded.interp(xf, vf);
                            let cap = match clip {
                                ClipPolicy::LocalStencil => cell_max,
                                ClipPolicy::GlobalMax => global_max,
                            };
                            block[j1 * n_v + j2] = val.min(cap).max(0.0) * growth;
                        }
                    }
                }
            });
        Ok(DistributionFunction::from_parts_unchecked(grid, out, t1))
    }
}

/// [`KineticScheme::step`] with default substeps and clipping.
pub fn semi_lagrangian_step(
    f: &DistributionFunction,
    sampler: &dyn VelocitySampler,
    dt: f64,
) -> Result<DistributionFunction> {
    KineticScheme::default().step(f, sampler, dt)
}

/// Closed-form solution of the kinetic equation with `u ≡ 0`:
/// `f(t, x, v) = e^{2t} f₀(x − v(eᵗ − 1), v eᵗ)`.
pub fn exact_free_solution(
    f0: impl Fn([f64; 2], [f64; 2]) -> f64,
    t: f64,
    x: [f64; 2],
    v: [f64; 2],
) -> f64 {
    let et = t.exp();
    let foot_x = [x[0] - v[0] * (et - 1.0), x[1] - v[1] * (et - 1.0)];
    let foot_v = [v[0] * et, v[1] * et];
    (2.0 * t).exp() * f0(foot_x, foot_v)
}

impl PhaseGrid {
    /// Samples the free-flow solution at time `t` on this grid.
    pub fn sample_free_solution(
        &self,
        f0: impl Fn([f64; 2], [f64; 2]) -> f64,
        t: f64,
    ) -> DistributionFunction {
        DistributionFunction::from_fn(self, t, |x, v| exact_free_solution(&f0, t, x, v))
    }
}
