//! Energetics, conservation and moment tracking along a trajectory, and the
//! residuals of the energy and vorticity balances.

use crate::coupling::{drag_force, SimState};
use crate::error::{NsvError, Result};
use crate::kinetic::DistributionFunction;
use crate::spectral::{
    apply_dealias, curl_spectrum, derivative, laplacian, SpectralGrid, Spectrum, VectorField,
};

/// Squared Sobolev seminorms `‖u‖²`, `‖∇u‖²`, `‖Δu‖²`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SobolevNorms {
    pub l2: f64,
    pub h1: f64,
    pub h2: f64,
}

/// Parseval sums over the spectrum. The gradient weight drops each axis's
/// Nyquist mode, matching spectral differentiation.
pub fn sobolev_norms(u: &VectorField) -> SobolevNorms {
    let grid = u.grid();
    let area = grid.length() * grid.length();
    let nyq = grid.n() / 2;
    let mut out = SobolevNorms {
        l2: 0.0,
        h1: 0.0,
        h2: 0.0,
    };
    for s in u.spectra() {
        out.l2 += s.power(grid);
        out.h1 += s.weighted_power(grid, |i1, j2| {
            let [k1, k2] = grid.wavenumber(i1, j2);
            let a = if i1 == nyq { 0.0 } else { k1 * k1 };
            let b = if j2 == nyq { 0.0 } else { k2 * k2 };
            a + b
        });
        out.h2 += s.weighted_power(grid, |i1, j2| grid.k_squared(i1, j2).powi(2));
    }
    out.l2 *= area;
    out.h1 *= area;
    out.h2 *= area;
    out
}

/// Instantaneous terms of the energy balance at one state.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnergySample {
    pub t: f64,
    /// `∫|u|² dx`.
    pub fluid_energy: f64,
    /// `∫∫ f (1 + |v|²) dv dx`.
    pub particle_functional: f64,
    /// `2‖∇u‖²`.
    pub visc_rate: f64,
    /// `2∫∫ f |u − v|² dv dx`.
    pub drag_rate: f64,
}

impl EnergySample {
    pub fn from_state(state: &SimState) -> Self {
        let s = sobolev_norms(state.u());
        let m = state.moments();
        EnergySample {
            t: state.time(),
            fluid_energy: s.l2,
            particle_functional: m.mass() + m.m2_total(),
            visc_rate: 2.0 * s.h1,
            drag_rate: 2.0 * m.relative_kinetic(state.u()),
        }
    }

    pub fn total_energy(&self) -> f64 {
        self.fluid_energy + self.particle_functional
    }
}

/// Running energy balance: dissipation integrals accumulate by the trapezoid
/// rule over the pushed samples, and
/// `identity_residual = E(t) − E(t₀) + ∫(2‖∇u‖² + 2∫∫f|u−v|²) ds`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnergyLedger {
    pub fluid_energy: f64,
    pub particle_functional: f64,
    pub visc_dissipation: f64,
    pub drag_dissipation: f64,
    pub identity_residual: f64,
    initial_energy: f64,
    last: EnergySample,
}

impl EnergyLedger {
    pub fn start(sample: EnergySample) -> Self {
        Self::resume(sample, sample.total_energy(), 0.0, 0.0)
    }

    /// Continues a ledger whose accumulators were saved at `sample`.
    pub fn resume(
        sample: EnergySample,
        initial_energy: f64,
        visc_dissipation: f64,
        drag_dissipation: f64,
    ) -> Self {
        EnergyLedger {
            fluid_energy: sample.fluid_energy,
            particle_functional: sample.particle_functional,
            visc_dissipation,
            drag_dissipation,
            identity_residual: sample.total_energy() - initial_energy
                + visc_dissipation
                + drag_dissipation,
            initial_energy,
            last: sample,
        }
    }

    pub fn push(&mut self, sample: EnergySample) {
        let dt = sample.t - self.last.t;
        self.visc_dissipation += 0.5 * dt * (self.last.visc_rate + sample.visc_rate);
        self.drag_dissipation += 0.5 * dt * (self.last.drag_rate + sample.drag_rate);
        self.fluid_energy = sample.fluid_energy;
        self.particle_functional = sample.particle_functional;
        self.identity_residual = sample.total_energy() - self.initial_energy
            + self.visc_dissipation
            + self.drag_dissipation;
        self.last = sample;
    }

    pub fn initial_energy(&self) -> f64 {
        self.initial_energy
    }

    pub fn total_energy(&self) -> f64 {
        self.fluid_energy + self.particle_functional
    }
}

/// `|E(t_N) − E(t_0) + ∫_{t_0}^{t_N} D ds|` over the samples, with the
/// dissipation `D` integrated by the trapezoid rule.
pub fn energy_identity_residual(trajectory: &[EnergySample]) -> Result<f64> {
    if trajectory.len() < 2 {
        return Err(NsvError::arg("trajectory", "need at least two samples"));
    }
    let mut ledger = EnergyLedger::start(trajectory[0]);
    for s in &trajectory[1..] {
        ledger.push(*s);
    }
    Ok(ledger.identity_residual.abs())
}

/// `−(u·∇)ω + Δω + curl(−ρu + j)` in spectral form; the product and the
/// drag curl are restricted to the two-thirds band, as in the velocity update.
fn vorticity_rhs(state: &SimState) -> Result<Spectrum> {
    let u = state.u();
    let grid = u.grid();
    let us = u.spectra();
    let omega = curl_spectrum(grid, &us);
    let trunc = |s: &Spectrum| {
        let mut s = s.clone();
        apply_dealias(grid, &mut s);
        s
    };
    let ut = [0, 1].map(|c| grid.inverse(&trunc(&us[c])));
    let wt = trunc(&omega);
    let d1 = grid.inverse(&derivative(grid, &wt, 0));
    let d2 = grid.inverse(&derivative(grid, &wt, 1));
    let prod: Vec<f64> = (0..grid.len())
        .map(|i| ut[0][i] * d1[i] + ut[1][i] * d2[i])
        .collect();
    let mut adv = grid.forward(&prod);
    apply_dealias(grid, &mut adv);

    let mut drag = drag_force(state.moments(), u)?.spectra();
    for s in drag.iter_mut() {
        apply_dealias(grid, s);
    }
    let drag_curl = curl_spectrum(grid, &drag);
    let lap = laplacian(grid, &omega);
    Ok(Spectrum {
        coeffs: (0..omega.coeffs.len())
            .map(|i| lap.coeffs[i] - adv.coeffs[i] + drag_curl.coeffs[i])
            .collect(),
    })
}

fn spectral_l2(grid: &SpectralGrid, spec: &Spectrum) -> f64 {
    (spec.power(grid)).sqrt() * grid.length()
}

/// L² norm of `(ω₁ − ω₀)/Δt − ½(R₀ + R₁)` where `R = −u·∇ω + Δω + curl(−ρu + j)`.
pub fn vorticity_residual(prev: &SimState, next: &SimState) -> Result<f64> {
    let grid = prev.u().grid();
    if next.u().grid() != grid {
        return Err(NsvError::GridMismatch("vorticity residual states"));
    }
    let dt = next.time() - prev.time();
    if !(dt > 0.0) {
        return Err(NsvError::arg("state_pair", "states must be in increasing time order"));
    }
    let w0 = curl_spectrum(grid, &prev.u().spectra());
    let w1 = curl_spectrum(grid, &next.u().spectra());
    let r0 = vorticity_rhs(prev)?;
    let r1 = vorticity_rhs(next)?;
    let res = Spectrum {
        coeffs: (0..w0.coeffs.len())
            .map(|i| (w1.coeffs[i] - w0.coeffs[i]) / dt - (r0.coeffs[i] + r1.coeffs[i]) * 0.5)
            .collect(),
    };
    Ok(spectral_l2(grid, &res))
}

/// `‖ω‖_{L²}` of a velocity field.
pub fn vorticity_norm(u: &VectorField) -> f64 {
    let grid = u.grid();
    spectral_l2(grid, &curl_spectrum(grid, &u.spectra()))
}

/// Scalars of the initial state that later reports are measured against.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReferenceScalars {
    pub t0: f64,
    pub mass: f64,
    pub linf: f64,
    pub l2: f64,
    pub m6: f64,
    pub momentum: [f64; 2],
    pub momentum_scale: f64,
}

impl ReferenceScalars {
    pub fn from_state(state: &SimState) -> Self {
        ReferenceScalars {
            t0: state.time(),
            mass: state.moments().mass(),
            linf: state.f().max(),
            l2: state.f().l2_norm(),
            m6: state.moments().m6_total(),
            momentum: state.total_momentum(),
            momentum_scale: momentum_scale(state),
        }
    }
}

/// `∫|u| dx + ∫∫|v| f dv dx`, the scale against which momentum drift is judged.
pub fn momentum_scale(state: &SimState) -> f64 {
    let u = state.u();
    let a = u.grid().cell_area();
    let fluid: f64 = (0..u.grid().len())
        .map(|i| {
            let [x, y] = u.at(i);
            x.hypot(y)
        })
        .sum::<f64>()
        * a;
    fluid + abs_velocity_moment(state.f())
}

fn abs_velocity_moment(f: &DistributionFunction) -> f64 {
    let g = f.grid();
    let nv = g.n_v();
    let mut weights = Vec::with_capacity(g.block());
    for j1 in 0..nv {
        for j2 in 0..nv {
            let speed = g.velocity(j1).hypot(g.velocity(j2));
            weights.push(speed * g.trapezoid_weight(j1) * g.trapezoid_weight(j2));
        }
    }
    f.values()
        .chunks_exact(g.block())
        .map(|b| b.iter().zip(&weights).map(|(f, w)| f * w).sum::<f64>())
        .sum::<f64>()
        * g.space().cell_area()
}

/// Conservation and bound diagnostics of one state.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConservationReport {
    pub t: f64,
    /// `M₀f`.
    pub mass: f64,
    /// `(M₀f − M₀f₀) / M₀f₀`, zero when the reference mass vanishes.
    pub mass_drift: f64,
    pub linf_f: f64,
    /// `e^{2(t − t₀)} ‖f₀‖_∞`.
    pub linf_bound: f64,
    pub l2_f: f64,
    /// `e^{t − t₀} ‖f₀‖_{L²}`.
    pub l2_bound: f64,
    pub momentum_total: [f64; 2],
    /// `|momentum_total − momentum₀|`.
    pub momentum_drift: f64,
    /// `M₆f`.
    pub m6: f64,
    /// Share of the mass on the outermost velocity nodes.
    pub boundary_mass_fraction: f64,
}

impl ConservationReport {
    /// `linf_f > linf_bound · (1 + 10⁻⁶)`.
    pub fn max_principle_violated(&self) -> bool {
        self.linf_f > self.linf_bound * (1.0 + 1e-6)
    }

    pub fn mass_violated(&self, tol: f64) -> bool {
        self.mass_drift.abs() > tol
    }
}

pub fn conservation_report(state: &SimState, reference: &ReferenceScalars) -> ConservationReport {
    let m = state.moments();
    let mass = m.mass();
    let dt = state.time() - reference.t0;
    let mom = state.total_momentum();
    let drift = [mom[0] - reference.momentum[0], mom[1] - reference.momentum[1]];
    ConservationReport {
        t: state.time(),
        mass,
        mass_drift: if reference.mass > 0.0 {
            (mass - reference.mass) / reference.mass
        } else {
            0.0
        },
        linf_f: state.f().max(),
        linf_bound: (2.0 * dt).exp() * reference.linf,
        l2_f: state.f().l2_norm(),
        l2_bound: dt.exp() * reference.l2,
        momentum_total: mom,
        momentum_drift: drift[0].hypot(drift[1]),
        m6: m.m6_total(),
        boundary_mass_fraction: state.f().boundary_mass_fraction(),
    }
}
