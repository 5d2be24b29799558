use crate::error::{NsvError, Result};
use crate::interp::{cubic_weights, split};
use crate::spectral::VectorField;

use super::sampler::VelocitySampler;

/// A point `(x, v)` of phase space; `x` lives on the torus.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CharacteristicState {
    pub x: [f64; 2],
    pub v: [f64; 2],
}

impl CharacteristicState {
    pub fn new(x: [f64; 2], v: [f64; 2]) -> Self {
        CharacteristicState { x, v }
    }
}

/// Velocity field with interleaved components and periodic ghost cells
/// (one before, two after on each axis) for cubic interpolation.
pub(crate) struct PaddedVelocity {
    n: usize,
    stride: usize,
    inv_dx: f64,
    data: Vec<[f64; 2]>,
}

impl PaddedVelocity {
    pub(crate) fn new(field: &VectorField) -> Self {
        let grid = field.grid();
        let n = grid.n();
        let stride = n + 3;
        let mut data = vec![[0.0; 2]; stride * stride];
        for p1 in 0..stride {
            let i1 = (p1 + n - 1) % n;
            for p2 in 0..stride {
                let i2 = (p2 + n - 1) % n;
                data[p1 * stride + p2] = field.at(i1 * n + i2);
            }
        }
        PaddedVelocity {
            n,
            stride,
            inv_dx: 1.0 / grid.dx(),
            data,
        }
    }

    #[inline(always)]
    pub(crate) fn node(&self, i1: usize, i2: usize) -> [f64; 2] {
        self.data[(i1 + 1) * self.stride + i2 + 1]
    }

    #[inline(always)]
    pub(crate) fn eval(&self, x: [f64; 2]) -> [f64; 2] {
        let (f1, t1) = split(x[0] * self.inv_dx);
        let (f2, t2) = split(x[1] * self.inv_dx);
        let b1 = f1.rem_euclid(self.n as i64) as usize;
        let b2 = f2.rem_euclid(self.n as i64) as usize;
        let w1 = cubic_weights(t1);
        let w2 = cubic_weights(t2);
        let mut acc = [0.0; 2];
        for (a, wa) in w1.iter().enumerate() {
            let row = &self.data[(b1 + a) * self.stride + b2..][..4];
            let mut r = [0.0; 2];
            for (val, wb) in row.iter().zip(&w2) {
                r[0] += wb * val[0];
                r[1] += wb * val[1];
            }
            acc[0] += wa * r[0];
            acc[1] += wa * r[1];
        }
        acc
    }
}

/// Classical RK4 integrator for `dx/dt = v`, `dv/dt = u(t, x) − v` between two
/// fixed times, with the velocity fields at every stage time pre-sampled so a
/// whole phase grid can be traced against the same stages.
pub struct Tracer {
    stages: Vec<PaddedVelocity>,
    h: f64,
    substeps: usize,
    length: f64,
}

impl Tracer {
    /// Integration from `from` to `to` (either direction) in `substeps` equal
    /// RK4 steps.
    pub fn new(
        sampler: &dyn VelocitySampler,
        from: f64,
        to: f64,
        substeps: usize,
    ) -> Result<Self> {
        if substeps == 0 {
            return Err(NsvError::arg("substeps", "must be at least 1"));
        }
        let h = (to - from) / substeps as f64;
        let mut stages = Vec::with_capacity(2 * substeps + 1);
        let mut length = 0.0;
        for q in 0..=2 * substeps {
            let t = if q == 2 * substeps {
                to
            } else {
                from + q as f64 * 0.5 * h
            };
            let field = sampler.field_at(t)?;
            length = field.grid().length();
            stages.push(PaddedVelocity::new(&field));
        }
        Ok(Tracer {
            stages,
            h,
            substeps,
            length,
        })
    }

    pub fn trace(&self, s: CharacteristicState) -> CharacteristicState {
        let (x, v) = self.run(s.x, s.v, None);
        CharacteristicState::new(x, v)
    }

    /// Traces from spatial grid node `(i1, i2)`; the first stage reads the
    /// velocity directly from the grid.
    #[inline(always)]
    pub(crate) fn trace_from_node(
        &self,
        i1: usize,
        i2: usize,
        x: [f64; 2],
        v: [f64; 2],
    ) -> ([f64; 2], [f64; 2]) {
        self.run(x, v, Some((i1, i2)))
    }

    #[inline(always)]
    fn run(
        &self,
        mut x: [f64; 2],
        mut v: [f64; 2],
        node: Option<(usize, usize)>,
    ) -> ([f64; 2], [f64; 2]) {
        let h = self.h;
        let hh = 0.5 * h;
        for s in 0..self.substeps {
            let f0 = &self.stages[2 * s];
            let fm = &self.stages[2 * s + 1];
            let f1 = &self.stages[2 * s + 2];
            let ua = match (s, node) {
                (0, Some((i1, i2))) => f0.node(i1, i2),
                _ => f0.eval(x),
            };
            let k1x = v;
            let k1v = [ua[0] - v[0], ua[1] - v[1]];

            let x2 = [x[0] + hh * k1x[0], x[1] + hh * k1x[1]];
            let v2 = [v[0] + hh * k1v[0], v[1] + hh * k1v[1]];
            let ub = fm.eval(x2);
            let k2v = [ub[0] - v2[0], ub[1] - v2[1]];

            let x3 = [x[0] + hh * v2[0], x[1] + hh * v2[1]];
            let v3 = [v[0] + hh * k2v[0], v[1] + hh * k2v[1]];
            let uc = fm.eval(x3);
            let k3v = [uc[0] - v3[0], uc[1] - v3[1]];

            let x4 = [x[0] + h * v3[0], x[1] + h * v3[1]];
            let v4 = [v[0] + h * k3v[0], v[1] + h * k3v[1]];
            let ud = f1.eval(x4);
            let k4v = [ud[0] - v4[0], ud[1] - v4[1]];

            let c = h / 6.0;
            for d in 0..2 {
                x[d] += c * (k1x[d] + 2.0 * v2[d] + 2.0 * v3[d] + v4[d]);
                v[d] += c * (k1v[d] + 2.0 * k2v[d] + 2.0 * k3v[d] + k4v[d]);
            }
        }
        (x.map(|c| wrap(c, self.length)), v)
    }
}

#[inline(always)]
pub(crate) fn wrap(x: f64, length: f64) -> f64 {
    let r = x.rem_euclid(length);
    if r >= length {
        0.0
    } else {
        r
    }
}

/// Flow map of the characteristic system from `t0` to `t1` (`t1 < t0`
/// integrates backward) with RK4 substeps no longer than `h_max`.
pub fn integrate_characteristic(
    sampler: &dyn VelocitySampler,
    start: CharacteristicState,
    t0: f64,
    t1: f64,
    h_max: f64,
) -> Result<CharacteristicState> {
    if !(h_max > 0.0) {
        return Err(NsvError::arg("h_max", "must be positive"));
    }
    sampler.check_time(t0)?;
    sampler.check_time(t1)?;
    if t0 == t1 {
        let length = sampler.field_at(t0)?.grid().length();
        return Ok(CharacteristicState::new(start.x.map(|c| wrap(c, length)), start.v));
    }
    let substeps = ((t1 - t0).abs() / h_max).ceil().max(1.0) as usize;
    Ok(Tracer::new(sampler, t0, t1, substeps)?.trace(start))
}

fn sup_difference(a: &VectorField, b: &VectorField) -> f64 {
    a.sub(b).max_abs()
}

/// Ratio of the largest flow-map discrepancy `max(|Δx|, |Δv|)` at time `t`
/// (characteristics started at time 0 from `samples`) to the quadrature
/// estimate of `∫₀ᵗ ‖u₁ − u₂‖_∞ ds`. Returns zero when the fields coincide.
pub fn lipschitz_dependence_probe(
    u1: &dyn VelocitySampler,
    u2: &dyn VelocitySampler,
    samples: &[CharacteristicState],
    t: f64,
    h_max: f64,
) -> Result<f64> {
    if !(t > 0.0) {
        return Err(NsvError::arg("t", "must be positive"));
    }
    // Composite Simpson on 32 panels.
    let panels = 32;
    let ds = t / panels as f64;
    let mut denom = 0.0;
    for k in 0..=panels {
        let s = k as f64 * ds;
        let w = if k == 0 || k == panels {
            1.0
        } else if k % 2 == 1 {
            4.0
        } else {
            2.0
        };
        denom += w * sup_difference(&u1.field_at(s)?, &u2.field_at(s)?);
    }
    denom *= ds / 3.0;
    if denom == 0.0 {
        return Ok(0.0);
    }
    let substeps = (t / h_max).ceil().max(1.0) as usize;
    let tr1 = Tracer::new(u1, 0.0, t, substeps)?;
    let tr2 = Tracer::new(u2, 0.0, t, substeps)?;
    let length = tr1.length;
    let mut worst: f64 = 0.0;
    for &s in samples {
        let a = tr1.trace(s);
        let b = tr2.trace(s);
        let dx: f64 = (0..2)
            .map(|d| {
                let mut e = (a.x[d] - b.x[d]).rem_euclid(length);
                if e > 0.5 * length {
                    e -= length;
                }
                e * e
            })
            .sum::<f64>()
            .sqrt();
        let dv = ((a.v[0] - b.v[0]).powi(2) + (a.v[1] - b.v[1]).powi(2)).sqrt();
        worst = worst.max(dx.max(dv));
    }
    Ok(worst / denom)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinetic::sampler::{ConstantSampler, FnSampler};
    use crate::spectral::SpectralGrid;
    use std::f64::consts::PI;

    fn grid() -> SpectralGrid {
        SpectralGrid::new(32, 2.0 * PI).unwrap()
    }

    #[test]
    fn constant_drag_closed_form() {
        let g = grid();
        let s = ConstantSampler::new(VectorField::from_fn(&g, |_| [1.0, 0.0]));
        let x0 = [1.0, 2.0];
        let end = integrate_characteristic(
            &s,
            CharacteristicState::new(x0, [0.0, 0.0]),
            0.0,
            1.0,
            1e-3,
        )
        .unwrap();
        let e = (-1.0f64).exp();
        assert!((end.v[0] - (1.0 - e)).abs() < 1e-8);
        assert!(end.v[1].abs() < 1e-12);
        assert!((end.x[0] - (x0[0] + e)).abs() < 1e-8);
        assert!((end.x[1] - x0[1]).abs() < 1e-12);
    }

    #[test]
    fn free_flow_closed_form() {
        let g = grid();
        let s = ConstantSampler::zero(&g);
        let (x0, v0) = ([0.5, 0.25], [0.7, -1.1]);
        let t: f64 = 0.8;
        let end = integrate_characteristic(&s, CharacteristicState::new(x0, v0), 0.0, t, 1e-2)
            .unwrap();
        for d in 0..2 {
            assert!((end.v[d] - v0[d] * (-t).exp()).abs() < 1e-10);
            let xe = wrap(x0[d] + v0[d] * (1.0 - (-t).exp()), 2.0 * PI);
            assert!((end.x[d] - xe).abs() < 1e-10);
        }
    }

    fn swirl(t: f64, x: [f64; 2]) -> [f64; 2] {
        let a = 1.0 + 0.3 * t;
        [a * x[0].sin() * x[1].cos(), -a * x[0].cos() * x[1].sin() + 0.2]
    }

    #[test]
    fn backward_forward_round_trip() {
        let g = grid();
        let s = FnSampler::new(&g, 0.0, 1.0, swirl);
        let start = CharacteristicState::new([1.3, 4.1], [0.4, -0.9]);
        let back = integrate_characteristic(&s, start, 1.0, 0.2, 1e-2).unwrap();
        let fwd = integrate_characteristic(&s, back, 0.2, 1.0, 1e-2).unwrap();
        for d in 0..2 {
            assert!((fwd.x[d] - start.x[d]).abs() < 1e-7);
            assert!((fwd.v[d] - start.v[d]).abs() < 1e-7);
        }
    }

    #[test]
    fn flow_map_composition() {
        let g = grid();
        let s = FnSampler::new(&g, 0.0, 1.0, swirl);
        let start = CharacteristicState::new([0.3, 2.2], [1.5, 0.1]);
        let mid = integrate_characteristic(&s, start, 0.0, 0.35, 5e-3).unwrap();
        let two = integrate_characteristic(&s, mid, 0.35, 0.9, 5e-3).unwrap();
        let one = integrate_characteristic(&s, start, 0.0, 0.9, 5e-3).unwrap();
        for d in 0..2 {
            assert!((two.x[d] - one.x[d]).abs() < 1e-7);
            assert!((two.v[d] - one.v[d]).abs() < 1e-7);
        }
    }

    #[test]
    fn sampler_range_is_enforced() {
        let g = grid();
        let s = FnSampler::new(&g, 0.0, 1.0, swirl);
        let start = CharacteristicState::new([0.0, 0.0], [0.0, 0.0]);
        assert!(matches!(
            integrate_characteristic(&s, start, 0.5, 1.5, 1e-2),
            Err(NsvError::SamplerRange { .. })
        ));
    }

    #[test]
    fn lipschitz_probe_identical_fields_is_zero() {
        let g = grid();
        let s = FnSampler::new(&g, 0.0, 1.0, swirl);
        let pts = [CharacteristicState::new([1.0, 1.0], [0.0, 0.5])];
        assert_eq!(lipschitz_dependence_probe(&s, &s, &pts, 1.0, 1e-2).unwrap(), 0.0);
    }

    #[test]
    fn lipschitz_probe_constant_fields_closed_form() {
        let g = grid();
        let u1 = ConstantSampler::new(VectorField::from_fn(&g, |_| [1.0, 0.0]));
        let u2 = ConstantSampler::zero(&g);
        let pts = [
            CharacteristicState::new([1.0, 1.0], [0.0, 0.0]),
            CharacteristicState::new([3.0, 0.5], [0.3, -0.2]),
        ];
        let ratio = lipschitz_dependence_probe(&u1, &u2, &pts, 1.0, 1e-3).unwrap();
        let e = (-1.0f64).exp();
        let dv = 1.0 - e;
        let dx = e; // t − 1 + e^{−t} at t = 1
        assert!((ratio - dv.max(dx)).abs() < 1e-8, "ratio {ratio}");
    }
}
