//! Deterministic initial data from the named generators.

use std::f64::consts::PI;

use log::info;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::coupling::SimState;
use crate::error::{NsvError, Result};
use crate::kinetic::{DistributionFunction, PhaseGrid};
use crate::spectral::{leray_project, taylor_green, SpectralGrid, VectorField, VelocityField};

use super::config::{BumpShape, MaxwellianParams, RunConfig};

/// Signed periodic distance from `c` to `x` on `[0, length)`, in `[−L/2, L/2)`.
fn periodic_offset(x: f64, c: f64, length: f64) -> f64 {
    (x - c + 0.5 * length).rem_euclid(length) - 0.5 * length
}

/// `e^{−z} I₀(z)` from the power series, summed in log space.
fn scaled_bessel_i0(z: f64) -> f64 {
    if z == 0.0 {
        return 1.0;
    }
    let lz = (0.5 * z).ln();
    let mut sum = 0.0;
    let mut m = 0u32;
    loop {
        let mf = f64::from(m);
        let term = (2.0 * mf * lz - 2.0 * libm::lgamma(mf + 1.0) - z).exp();
        sum += term;
        if mf > 0.5 * z && term < 1e-17 * sum {
            return sum;
        }
        m += 1;
    }
}

/// `∫ G dx` of the spatial profile over one side of the torus.
fn side_integral(shape: BumpShape, width: f64, length: f64) -> f64 {
    match shape {
        BumpShape::Gaussian => {
            (2.0 * PI).sqrt() * width * libm::erf(0.5 * length / (std::f64::consts::SQRT_2 * width))
        }
        BumpShape::Periodic => {
            let k = 2.0 * PI / length;
            length * scaled_bessel_i0(1.0 / (k * width).powi(2))
        }
    }
}

/// `∫∫ f₀ dv dx` of the bump on the torus of side `length`, before the
/// velocity cut.
pub fn maxwellian_mass(params: &MaxwellianParams, length: f64) -> f64 {
    params.density * side_integral(params.shape, params.width, length).powi(2)
}

/// Samples the bump; the outermost velocity nodes are zeroed so the support
/// lies strictly inside the velocity box.
pub fn maxwellian_bump(grid: &PhaseGrid, params: &MaxwellianParams) -> DistributionFunction {
    let length = grid.space().length();
    let center = params.center.unwrap_or([0.5 * length; 2]);
    let w2 = params.width * params.width;
    let k = 2.0 * PI / length;
    let a = 1.0 / (k * params.width).powi(2);
    let s2 = params.sigma * params.sigma;
    let norm = params.density / (2.0 * PI * s2);
    let edge = grid.v_max() * (1.0 - 1e-12);
    DistributionFunction::from_fn(grid, 0.0, |x, v| {
        if v[0].abs() >= edge || v[1].abs() >= edge {
            return 0.0;
        }
        let d = [0, 1].map(|c| periodic_offset(x[c], center[c], length));
        let spatial = match params.shape {
            BumpShape::Gaussian => -0.5 * (d[0] * d[0] + d[1] * d[1]) / w2,
            BumpShape::Periodic => a * ((k * d[0]).cos() + (k * d[1]).cos() - 2.0),
        };
        let c2 = (v[0] - params.drift[0]).powi(2) + (v[1] - params.drift[1]).powi(2);
        (norm * (spatial - 0.5 * c2 / s2).exp()).max(0.0)
    })
}

/// Random stream-function field with modes `1 ≤ |k|∞ ≤ modes`, rescaled to
/// `‖u‖_{L²} = amplitude · L` (unit RMS velocity per unit amplitude).
pub fn random_perturbation(
    grid: &SpectralGrid,
    amplitude: f64,
    modes: usize,
    seed: u64,
) -> VectorField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let kmax = modes.min(grid.n() / 3) as i64;
    let scale = 2.0 * PI / grid.length();
    let mut terms = Vec::new();
    for k1 in -kmax..=kmax {
        for k2 in 0..=kmax {
            if k2 == 0 && k1 <= 0 {
                continue;
            }
            let a: f64 = rng.gen_range(-1.0..1.0);
            let b: f64 = rng.gen_range(-1.0..1.0);
            let k = [k1 as f64 * scale, k2 as f64 * scale];
            terms.push((k, a / (k[0] * k[0] + k[1] * k[1]), b));
        }
    }
    // u = (∂₂ψ, −∂₁ψ) with ψ = Σ c·(a cos + b sin)(k·x).
    let w = VectorField::from_fn(grid, |x| {
        let mut u = [0.0; 2];
        for &(k, c, b) in &terms {
            let ph = k[0] * x[0] + k[1] * x[1];
            let d = c * (b * ph.cos() - ph.sin());
            u[0] += k[1] * d;
            u[1] -= k[0] * d;
        }
        u
    });
    let norm = w.l2_norm();
    if norm == 0.0 || amplitude == 0.0 {
        return VectorField::zeros(grid);
    }
    let f = amplitude * grid.length() / norm;
    let [a, b] = w.into_components();
    VectorField::new(
        grid,
        a.into_iter().map(|x| x * f).collect(),
        b.into_iter().map(|x| x * f).collect(),
    )
    .expect("grid length")
}

fn fluid(name: &str, cfg: &RunConfig, grid: &SpectralGrid) -> Result<VectorField> {
    match name {
        "taylor_green_fluid" => {
            let a = cfg.initial_data.taylor_green.amplitude;
            let [u1, u2] = taylor_green(0.0, grid)?.into_vector().into_components();
            VectorField::new(
                grid,
                u1.into_iter().map(|x| a * x).collect(),
                u2.into_iter().map(|x| a * x).collect(),
            )
        }
        "zero_fluid" => Ok(VectorField::zeros(grid)),
        other => Err(NsvError::UnknownGenerator(other.to_string())),
    }
}

fn kinetic(name: &str, cfg: &RunConfig, grid: &PhaseGrid) -> Result<DistributionFunction> {
    match name {
        "maxwellian_bump" => {
            let params = &cfg.initial_data.maxwellian;
            let f = maxwellian_bump(grid, params);
            let exact = maxwellian_mass(params, grid.space().length());
            info!(
                "maxwellian bump: mass {:.12e}, truncated tail mass {:.3e}",
                f.mass(),
                exact - f.mass()
            );
            Ok(f)
        }
        "zero_kinetic" => Ok(DistributionFunction::zeros(grid, 0.0)),
        other => Err(NsvError::UnknownGenerator(other.to_string())),
    }
}

/// Builds `(u₀, f₀)` at `t = 0`. The velocity is Leray-projected after
/// generation and `f₀` is clipped to be nonnegative.
pub fn make_initial_data(cfg: &RunConfig) -> Result<SimState> {
    let phase = cfg.phase_grid()?;
    let space = phase.space();
    let init = &cfg.initial_data;
    let (fluid_name, kinetic_name) = match init.generator.as_str() {
        "composite" => (init.fluid.as_str(), init.kinetic.as_str()),
        "taylor_green_fluid" => ("taylor_green_fluid", "zero_kinetic"),
        "maxwellian_bump" => ("zero_fluid", "maxwellian_bump"),
        "zero_fluid" | "zero_kinetic" => ("zero_fluid", "zero_kinetic"),
        other => return Err(NsvError::UnknownGenerator(other.to_string())),
    };
    let mut w = fluid(fluid_name, cfg, space)?;
    if init.perturbation > 0.0 {
        let p = random_perturbation(space, init.perturbation, init.perturbation_modes, cfg.seed);
        let [a, b] = w.into_components();
        let [pa, pb] = p.into_components();
        w = VectorField::new(
            space,
            a.iter().zip(&pa).map(|(x, y)| x + y).collect(),
            b.iter().zip(&pb).map(|(x, y)| x + y).collect(),
        )?;
    }
    let u: VelocityField = leray_project(&w);
    let f = kinetic(kinetic_name, cfg, &phase)?;
    let f = DistributionFunction::new(
        &phase,
        f.into_values().into_iter().map(|x| x.max(0.0)).collect(),
        0.0,
    )?;
    let state = SimState::new(u, f)?;
    info!(
        "initial data `{}`: M0 = {:.12e}, M6 = {:.12e}, |u|_L2 = {:.12e}",
        init.generator,
        state.moments().mass(),
        state.moments().m6_total(),
        state.u().l2_norm()
    );
    Ok(state)
}
