use std::collections::HashMap;

use rustfft::num_complex::Complex64;

use crate::error::{NsvError, Result};
use crate::kinetic::MomentSet;
use crate::spectral::{
    advection_spectra, apply_dealias, project_spectra, SpectralGrid, Spectrum, VectorField,
    VelocityField,
};

use super::drag_force;
use super::quadrature::{gauss_legendre, gauss_lobatto, lagrange_basis};

/// Exponent range beyond which the heat kernel is treated as zero.
const KERNEL_CUTOFF: f64 = 40.0;
const PANEL_POINTS: usize = 8;

/// Product-quadrature weights `W_{i,m}(λ) = ∫_{t₀}^{s_i} e^{−λ(s_i − s)} ℓ_m(s) ds`
/// for the Lagrange basis `ℓ_m` through Gauss–Lobatto nodes `s_m` of one
/// window, tabulated per integer `|k|²` of the retained band.
pub(crate) struct DuhamelWeights {
    nodes: Vec<f64>,
    window: f64,
    /// `table[k2] = q × q` row-major `W_{i,m}`, empty for absent `k2`.
    table: Vec<Vec<f64>>,
}

impl DuhamelWeights {
    pub(crate) fn new(grid: &SpectralGrid, q: usize, window: f64) -> Self {
        let (nodes, _) = gauss_lobatto(q);
        let scale = (2.0 * std::f64::consts::PI / grid.length()).powi(2);
        let h = grid.half();
        let mut needed = Vec::new();
        for i1 in 0..grid.n() {
            for j2 in 0..h {
                if grid.is_retained(i1, j2) && !grid.is_nyquist(i1, j2) {
                    needed.push(grid.k_squared_index(i1, j2));
                }
            }
        }
        needed.sort_unstable();
        needed.dedup();
        let max = needed.last().copied().unwrap_or(0);
        let (gx, gw) = gauss_legendre(PANEL_POINTS);
        let mut table = vec![Vec::new(); max + 1];
        for k2 in needed {
            table[k2] = Self::weights(&nodes, window, k2 as f64 * scale, &gx, &gw);
        }
        DuhamelWeights {
            nodes,
            window,
            table,
        }
    }

    fn weights(nodes: &[f64], window: f64, lambda: f64, gx: &[f64], gw: &[f64]) -> Vec<f64> {
        let q = nodes.len();
        let a = lambda * window;
        let mut out = vec![0.0; q * q];
        for (i, &ti) in nodes.iter().enumerate() {
            if ti == 0.0 {
                continue;
            }
            let start = if a * ti > KERNEL_CUTOFF {
                ti - KERNEL_CUTOFF / a
            } else {
                0.0
            };
            let len = ti - start;
            let panels = ((a * len).ceil() as usize).max(1);
            let hp = len / panels as f64;
            let row = &mut out[i * q..(i + 1) * q];
            for p in 0..panels {
                let lo = start + p as f64 * hp;
                for (x, w) in gx.iter().zip(gw) {
                    let s = lo + x * hp;
                    let kern = w * hp * (-a * (ti - s)).exp();
                    for (r, l) in row.iter_mut().zip(lagrange_basis(nodes, s)) {
                        *r += kern * l;
                    }
                }
            }
            for r in row.iter_mut() {
                *r *= window;
            }
        }
        out
    }

    pub(crate) fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// `e^{(s_i − t₀)Δ} u₀ + Σ_m W_{i,m} ⊙ F_m` for every node `i`, where `F_m`
    /// are already projected and masked forcing spectra.
    pub(crate) fn apply(
        &self,
        grid: &SpectralGrid,
        u0: &VelocityField,
        forcing: &[[Spectrum; 2]],
    ) -> Vec<VelocityField> {
        let q = self.nodes.len();
        let h = grid.half();
        let u0_spec = u0.spectra();
        let mut out = Vec::with_capacity(q);
        out.push(u0.clone());
        for i in 1..q {
            let tau = self.nodes[i] * self.window;
            let spec = [0, 1].map(|c| {
                let mut s = u0_spec[c].clone();
                for i1 in 0..grid.n() {
                    for j2 in 0..h {
                        let idx = i1 * h + j2;
                        let k2 = grid.k_squared_index(i1, j2);
                        let mut acc = s.coeffs[idx] * (-grid.k_squared(i1, j2) * tau).exp();
                        if let Some(w) = self.table.get(k2).filter(|w| !w.is_empty()) {
                            if grid.is_retained(i1, j2) && !grid.is_nyquist(i1, j2) {
                                let row = &w[i * q..(i + 1) * q];
                                for (wm, fm) in row.iter().zip(forcing) {
                                    acc += fm[c].coeffs[idx] * *wm;
                                }
                            }
                        }
                        s.coeffs[idx] = acc;
                    }
                }
                s
            });
            out.push(VelocityField::from_spectra_unchecked(grid, &spec));
        }
        out
    }
}

/// Cache of [`DuhamelWeights`] keyed by window length and node count.
#[derive(Default)]
pub(crate) struct WeightCache {
    map: HashMap<(u64, usize), DuhamelWeights>,
}

impl WeightCache {
    pub(crate) fn get(&mut self, grid: &SpectralGrid, q: usize, window: f64) -> &DuhamelWeights {
        self.map
            .entry((window.to_bits(), q))
            .or_insert_with(|| DuhamelWeights::new(grid, q, window))
    }
}

/// `P·mask(g)` for one forcing sample.
fn projected(grid: &SpectralGrid, mut spec: [Spectrum; 2]) -> [Spectrum; 2] {
    for s in spec.iter_mut() {
        apply_dealias(grid, s);
    }
    project_spectra(grid, &mut spec);
    spec
}

/// Forcing `N = −(u·∇)u − ρu + j` at one node, projected and masked.
pub(crate) fn coupled_forcing(
    u: &VelocityField,
    moments: &MomentSet,
) -> Result<[Spectrum; 2]> {
    let grid = u.grid();
    let us = u.spectra();
    let adv = advection_spectra(grid, &us, &us);
    let drag = drag_force(moments, u)?.spectra();
    let spec = [0, 1].map(|c| Spectrum {
        coeffs: drag[c]
            .coeffs
            .iter()
            .zip(&adv[c].coeffs)
            .map(|(d, a)| *d - *a)
            .collect::<Vec<Complex64>>(),
    });
    Ok(projected(grid, spec))
}

fn check_nodes(q: usize) -> Result<()> {
    if q < 2 {
        return Err(NsvError::arg(
            "quadrature_nodes",
            format!("need at least 2 Gauss–Lobatto nodes, got {q}"),
        ));
    }
    Ok(())
}

fn check_window(window: f64) -> Result<()> {
    if !(window > 0.0 && window.is_finite()) {
        return Err(NsvError::arg("window", format!("must be positive, got {window}")));
    }
    Ok(())
}

/// Mild-form velocity over one window from an arbitrary forcing path `g(s_m)`
/// sampled at the window's Gauss–Lobatto nodes:
/// `u(s_i) = e^{(s_i − t₀)Δ}u₀ + ∫_{t₀}^{s_i} e^{(s_i − s)Δ} P g(s) ds`,
/// with `g` interpolated in time and masked to the two-thirds band.
pub fn duhamel_forced(
    u0: &VelocityField,
    forcing: &[VectorField],
    window: f64,
) -> Result<Vec<VelocityField>> {
    check_nodes(forcing.len())?;
    check_window(window)?;
    let grid = u0.grid();
    if forcing.iter().any(|g| g.grid() != grid) {
        return Err(NsvError::GridMismatch("forcing path"));
    }
    let spectra: Vec<_> = forcing.iter().map(|g| projected(grid, g.spectra())).collect();
    Ok(DuhamelWeights::new(grid, forcing.len(), window).apply(grid, u0, &spectra))
}

/// One application of the mild-form map over a window: from the velocity
/// path `u(s_m)` and moment path at the Gauss–Lobatto nodes, returns
/// `ū(s_i) = e^{(s_i − t₀)Δ}u₀ + ∫ e^{(s_i − s)Δ} P(−(u·∇)u − ρu + j)(s) ds`.
pub fn duhamel_update(
    u_path: &[VelocityField],
    moments_path: &[MomentSet],
    u0: &VelocityField,
    window: f64,
) -> Result<Vec<VelocityField>> {
    check_nodes(u_path.len())?;
    check_window(window)?;
    if moments_path.len() != u_path.len() {
        return Err(NsvError::arg(
            "moments_path",
            "need one moment set per velocity node",
        ));
    }
    let grid = u0.grid();
    if u_path.iter().any(|u| u.grid() != grid) {
        return Err(NsvError::GridMismatch("velocity path"));
    }
    let forcing = u_path
        .iter()
        .zip(moments_path)
        .map(|(u, m)| coupled_forcing(u, m))
        .collect::<Result<Vec<_>>>()?;
    Ok(DuhamelWeights::new(grid, u_path.len(), window).apply(grid, u0, &forcing))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{heat_propagate, taylor_green};
    use std::f64::consts::PI;

    fn grid(n: usize) -> SpectralGrid {
        SpectralGrid::new(n, 2.0 * PI).unwrap()
    }

    /// Direct `∫₀^T e^{−λ(T−s)} s^p ds` by a fine midpoint sum.
    fn kernel_moment(lambda: f64, t: f64, p: i32) -> f64 {
        let n = 200_000;
        let h = t / n as f64;
        (0..n)
            .map(|i| {
                let s = (i as f64 + 0.5) * h;
                (-lambda * (t - s)).exp() * s.powi(p) * h
            })
            .sum()
    }

    #[test]
    fn weights_integrate_polynomials_against_kernel() {
        let (gx, gw) = gauss_legendre(PANEL_POINTS);
        let (nodes, _) = gauss_lobatto(4);
        let window = 0.3;
        for lambda in [0.0, 1.0, 37.0, 2000.0] {
            let w = DuhamelWeights::weights(&nodes, window, lambda, &gx, &gw);
            for (i, &ti) in nodes.iter().enumerate() {
                for p in 0..4 {
                    let approx: f64 = (0..4)
                        .map(|m| w[i * 4 + m] * (nodes[m] * window).powi(p))
                        .sum();
                    let exact = kernel_moment(lambda, ti * window, p);
                    assert!(
                        (approx - exact).abs() < 1e-9 * (1.0 + exact.abs()),
                        "λ={lambda} i={i} p={p}: {approx} vs {exact}"
                    );
                }
            }
        }
    }

    #[test]
    fn rejects_single_node_and_bad_window() {
        let g = grid(8);
        let u = VelocityField::zeros(&g);
        let f = VectorField::zeros(&g);
        assert!(duhamel_forced(&u, &[f.clone()], 0.1).is_err());
        assert!(duhamel_forced(&u, &[f.clone(), f], 0.0).is_err());
    }

    #[test]
    fn zero_forcing_is_heat_decay() {
        let g = grid(16);
        let u0 = taylor_green(0.0, &g).unwrap();
        let zero = vec![VectorField::zeros(&g); 5];
        let path = duhamel_forced(&u0, &zero, 0.2).unwrap();
        let (nodes, _) = gauss_lobatto(5);
        for (u, s) in path.iter().zip(nodes) {
            let exact = heat_propagate(&u0, 0.2 * s).unwrap();
            assert!(u.sub(&exact).max_abs() < 1e-14);
        }
    }

    #[test]
    fn taylor_green_path_is_exact() {
        let g = grid(32);
        let u0 = taylor_green(0.0, &g).unwrap();
        let moments = vec![MomentSet::zeros(&g); 5];
        let (nodes, _) = gauss_lobatto(5);
        let window = 0.05;
        let guess: Vec<_> = nodes
            .iter()
            .map(|s| taylor_green(s * window, &g).unwrap())
            .collect();
        let out = duhamel_update(&guess, &moments, &u0, window).unwrap();
        for (u, s) in out.iter().zip(&nodes) {
            let exact = taylor_green(s * window, &g).unwrap();
            assert!(u.sub(&exact).max_abs() < 1e-8);
        }
    }

    #[test]
    fn constant_forcing_matches_per_mode_closed_form() {
        let g = grid(16);
        // Divergence-free low-mode forcing with two distinct |k|².
        let forcing = VectorField::from_fn(&g, |[x1, x2]| {
            [
                (2.0 * x2).cos() + 0.5 * x1.sin() * x2.cos(),
                0.3 * x1.cos() - 0.5 * x1.cos() * x2.sin(),
            ]
        });
        let u0 = VelocityField::zeros(&g);
        let window = 0.7;
        let path = duhamel_forced(&u0, &vec![forcing.clone(); 3], window).unwrap();
        let (nodes, _) = gauss_lobatto(3);
        let h = g.half();
        for (u, s) in path.iter().zip(nodes) {
            let t = s * window;
            let got = u.spectra();
            let gs = forcing.spectra();
            for c in 0..2 {
                for i1 in 0..g.n() {
                    for j2 in 0..h {
                        let k2 = g.k_squared(i1, j2);
                        let factor = if k2 == 0.0 {
                            t
                        } else {
                            (1.0 - (-k2 * t).exp()) / k2
                        };
                        let idx = i1 * h + j2;
                        let expect = gs[c].coeffs[idx] * factor;
                        assert!((got[c].coeffs[idx] - expect).norm() < 1e-9);
                    }
                }
            }
        }
    }
}
