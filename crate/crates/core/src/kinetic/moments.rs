use rayon::prelude::*;

use crate::spectral::{ScalarField, SpectralGrid, VectorField};

use super::DistributionFunction;

/// Velocity moments of `f` at every spatial node plus their spatial integrals.
#[derive(Clone, Debug, PartialEq)]
pub struct MomentSet {
    /// `ρ = ∫ f dv`.
    pub rho: ScalarField,
    /// `j = ∫ v f dv`.
    pub current: VectorField,
    /// `m₂ = ∫ |v|² f dv`.
    pub m2: ScalarField,
    /// `m₆ = ∫ |v|⁶ f dv`.
    pub m6: ScalarField,
}

impl MomentSet {
    pub fn zeros(grid: &SpectralGrid) -> Self {
        MomentSet {
            rho: ScalarField::zeros(grid),
            current: VectorField::zeros(grid),
            m2: ScalarField::zeros(grid),
            m6: ScalarField::zeros(grid),
        }
    }

    pub fn grid(&self) -> &SpectralGrid {
        self.rho.grid()
    }

    /// `M₀ = ∫ρ dx`.
    pub fn mass(&self) -> f64 {
        self.rho.integral()
    }

    /// `∫ j dx`, the particle momentum.
    pub fn momentum(&self) -> [f64; 2] {
        self.current.integral()
    }

    /// `M₂ = ∫ m₂ dx`.
    pub fn m2_total(&self) -> f64 {
        self.m2.integral()
    }

    /// `M₆ = ∫ m₆ dx`.
    pub fn m6_total(&self) -> f64 {
        self.m6.integral()
    }

    /// `∫∫ f |u − v|² dv dx = ∫ (ρ|u|² − 2u·j + m₂) dx`.
    pub fn relative_kinetic(&self, u: &VectorField) -> f64 {
        let (u1, u2) = (u.component(0), u.component(1));
        let (j1, j2) = (self.current.component(0), self.current.component(1));
        let mut acc = 0.0;
        for i in 0..u1.len() {
            let uu = u1[i] * u1[i] + u2[i] * u2[i];
            acc += self.rho.values()[i] * uu - 2.0 * (u1[i] * j1[i] + u2[i] * j2[i])
                + self.m2.values()[i];
        }
        acc * self.grid().cell_area()
    }
}

/// Trapezoid quadrature over each spatial point's velocity block.
pub fn compute_moments(f: &DistributionFunction) -> MomentSet {
    let grid = f.grid();
    let space = grid.space();
    let nv = grid.n_v();
    let vs: Vec<f64> = (0..nv).map(|j| grid.velocity(j)).collect();
    let ws: Vec<f64> = (0..nv).map(|j| grid.trapezoid_weight(j)).collect();

    let per_point: Vec<[f64; 5]> = f
        .values()
        .par_chunks_exact(grid.block())
        .map(|block| {
            let mut m = [0.0; 5];
            for (j1, row) in block.chunks_exact(nv).enumerate() {
                let v1 = vs[j1];
                let mut r = [0.0; 5];
                for (j2, &fv) in row.iter().enumerate() {
                    if fv == 0.0 {
                        continue;
                    }
                    let v2 = vs[j2];
                    let wf = ws[j2] * fv;
                    let s = v1 * v1 + v2 * v2;
                    r[0] += wf;
                    r[1] += wf * v1;
                    r[2] += wf * v2;
                    r[3] += wf * s;
                    r[4] += wf * s * s * s;
                }
                for k in 0..5 {
                    m[k] += ws[j1] * r[k];
                }
            }
            m
        })
        .collect();

    let pick = |k: usize| per_point.iter().map(|m| m[k]).collect::<Vec<_>>();
    MomentSet {
        rho: ScalarField::new(space, pick(0)).expect("grid length"),
        current: VectorField::new(space, pick(1), pick(2)).expect("grid length"),
        m2: ScalarField::new(space, pick(3)).expect("grid length"),
        m6: ScalarField::new(space, pick(4)).expect("grid length"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinetic::PhaseGrid;
    use std::f64::consts::PI;

    fn phase(n: usize, nv: usize, vmax: f64) -> PhaseGrid {
        PhaseGrid::new(SpectralGrid::new(n, 2.0 * PI).unwrap(), nv, vmax).unwrap()
    }

    fn gauss(v: [f64; 2], mean: [f64; 2], sigma: f64) -> f64 {
        let d2 = (v[0] - mean[0]).powi(2) + (v[1] - mean[1]).powi(2);
        (-d2 / (2.0 * sigma * sigma)).exp() / (2.0 * PI * sigma * sigma)
    }

    /// `∫_{−vmax}^{vmax} v^k N(mean, 1)(v) dv` by fine composite Simpson.
    fn truncated_moment(k: i32, mean: f64, vmax: f64) -> f64 {
        let panels = 20_000;
        let h = 2.0 * vmax / panels as f64;
        let g = |v: f64| v.powi(k) * (-(v - mean).powi(2) / 2.0).exp() / (2.0 * PI).sqrt();
        let mut acc = g(-vmax) + g(vmax);
        for i in 1..panels {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            acc += w * g(-vmax + i as f64 * h);
        }
        acc * h / 3.0
    }

    #[test]
    fn zero_distribution_has_zero_moments() {
        let g = phase(8, 6, 3.0);
        let m = compute_moments(&DistributionFunction::zeros(&g, 0.0));
        assert_eq!(m, MomentSet::zeros(g.space()));
    }

    #[test]
    fn centred_gaussian_moments() {
        let g = phase(8, 64, 6.0);
        let shape = |x: [f64; 2]| 1.0 + 0.5 * x[0].sin() * x[1].cos();
        let f = DistributionFunction::from_fn(&g, 0.0, |x, v| shape(x) * gauss(v, [0.0; 2], 1.0));
        let m = compute_moments(&f);
        let expect = g.space().sample(shape);
        let mom = |k| truncated_moment(k, 0.0, 6.0);
        let m6_box = mom(6) * mom(0) * 2.0 + 3.0 * mom(4) * mom(2) * 2.0;
        for i in 0..expect.len() {
            assert!((m.rho.values()[i] - expect[i]).abs() < 1e-6);
            assert!(m.current.component(0)[i].abs() < 1e-12);
            assert!(m.current.component(1)[i].abs() < 1e-12);
            assert!((m.m2.values()[i] - 2.0 * expect[i]).abs() < 1e-6);
            assert!((m.m6.values()[i] - m6_box * expect[i]).abs() < 1e-6 * m6_box);
        }
    }

    #[test]
    fn shifted_gaussian_current() {
        let g = phase(8, 64, 6.0);
        let mean = [1.0, 0.5];
        let f = DistributionFunction::from_fn(&g, 0.0, |x, v| {
            (1.0 + 0.3 * x[1].cos()) * gauss(v, mean, 1.0)
        });
        let m = compute_moments(&f);
        let box_mean = [0, 1].map(|c| {
            truncated_moment(1, mean[c], 6.0) / truncated_moment(0, mean[c], 6.0)
        });
        assert!((box_mean[0] - mean[0]).abs() < 1e-5);
        for i in 0..g.space().len() {
            let rho = m.rho.values()[i];
            assert!((m.current.component(0)[i] - rho * box_mean[0]).abs() < 1e-6 * rho);
            assert!((m.current.component(1)[i] - rho * box_mean[1]).abs() < 1e-6 * rho);
        }
        let drag_free = VectorField::from_fn(g.space(), |_| mean);
        // ∫∫f|u − v|² with u = v̄ is twice the mass for unit variance.
        assert!((m.relative_kinetic(&drag_free) - 2.0 * m.mass()).abs() < 1e-5 * m.mass());
    }

    #[test]
    fn cauchy_schwarz_on_rough_data() {
        let g = phase(8, 10, 2.0);
        let f = DistributionFunction::from_fn(&g, 0.0, |x, v| {
            ((3.0 * x[0] + v[0]).sin() + (v[1] * x[1]).cos()).max(0.0)
        });
        let m = compute_moments(&f);
        for i in 0..g.space().len() {
            let j = m.current.at(i);
            let lhs = j[0] * j[0] + j[1] * j[1];
            assert!(lhs <= m.rho.values()[i] * m.m2.values()[i] + 1e-10);
        }
    }
}
