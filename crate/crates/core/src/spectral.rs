//! Periodic pseudo-spectral representation of the fluid.
//!
//! Physical samples live on a uniform `n × n` grid over `[0, L)²`, row-major with
//! `x₂` varying fastest. Spectra use the conjugate-symmetry-reduced layout of a
//! real transform: `n × (n/2 + 1)` complex coefficients, row index `i₁` over the
//! full `x₁` frequency axis and column index `j₂ ∈ 0..=n/2`. Coefficients are
//! normalised Fourier amplitudes, `u(x) = Σ_k û(k) e^{ik·x}`.
//!
//! Viscosity is fixed to one, so the heat semigroup is the multiplier
//! `exp(−|k|² τ)`.

use std::f64::consts::PI;
use std::fmt;
use std::ops::Deref;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{NsvError, Result};

struct FftPlans {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

/// Uniform periodic grid on `[0, L)²` with its Fourier dual.
#[derive(Clone)]
pub struct SpectralGrid {
    n: usize,
    length: f64,
    plans: Arc<FftPlans>,
}

impl fmt::Debug for SpectralGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SpectralGrid")
            .field("n", &self.n)
            .field("length", &self.length)
            .finish()
    }
}

impl PartialEq for SpectralGrid {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.length.to_bits() == other.length.to_bits()
    }
}

impl SpectralGrid {
    pub fn new(n: usize, length: f64) -> Result<Self> {
        if n < 8 || n % 2 != 0 {
            return Err(NsvError::Grid(format!(
                "points per axis must be even and at least 8, got {n}"
            )));
        }
        if !(length.is_finite() && length > 0.0) {
            return Err(NsvError::Grid(format!(
                "domain length must be positive, got {length}"
            )));
        }
        let mut planner = FftPlanner::new();
        let plans = FftPlans {
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        };
        Ok(SpectralGrid {
            n,
            length,
            plans: Arc::new(plans),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn dx(&self) -> f64 {
        self.length / self.n as f64
    }

    /// Area element of one grid cell.
    pub fn cell_area(&self) -> f64 {
        self.dx() * self.dx()
    }

    /// Number of physical samples, `n²`.
    pub fn len(&self) -> usize {
        self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Columns in the reduced spectral layout, `n/2 + 1`.
    pub fn half(&self) -> usize {
        self.n / 2 + 1
    }

    pub fn spectral_len(&self) -> usize {
        self.n * self.half()
    }

    /// Signed integer frequency of a full-axis index.
    pub fn frequency(&self, idx: usize) -> i64 {
        if idx <= self.n / 2 {
            idx as i64
        } else {
            idx as i64 - self.n as i64
        }
    }

    fn scale(&self) -> f64 {
        2.0 * PI / self.length
    }

    /// Wavenumber vector of reduced-layout mode `(i1, j2)`.
    pub fn wavenumber(&self, i1: usize, j2: usize) -> [f64; 2] {
        let s = self.scale();
        [self.frequency(i1) as f64 * s, j2 as f64 * s]
    }

    pub fn k_squared(&self, i1: usize, j2: usize) -> f64 {
        let [k1, k2] = self.wavenumber(i1, j2);
        k1 * k1 + k2 * k2
    }

    /// Integer `|k|²` in units of `(2π/L)²`.
    pub fn k_squared_index(&self, i1: usize, j2: usize) -> usize {
        let f1 = self.frequency(i1);
        let f2 = j2 as i64;
        (f1 * f1 + f2 * f2) as usize
    }

    /// True when either index sits on the Nyquist frequency.
    pub fn is_nyquist(&self, i1: usize, j2: usize) -> bool {
        i1 == self.n / 2 || j2 == self.n / 2
    }

    /// Two-thirds rule: keep modes with `3|k_i| ≤ n` on both axes.
    pub fn is_retained(&self, i1: usize, j2: usize) -> bool {
        let n = self.n as i64;
        3 * self.frequency(i1).abs() <= n && 3 * (j2 as i64) <= n
    }

    /// Parseval multiplicity of a reduced-layout column.
    pub fn column_weight(&self, j2: usize) -> f64 {
        if j2 == 0 || j2 == self.n / 2 {
            1.0
        } else {
            2.0
        }
    }

    pub fn coordinate(&self, idx: usize) -> f64 {
        idx as f64 * self.dx()
    }

    /// Samples `g` at every grid point.
    pub fn sample(&self, g: impl Fn([f64; 2]) -> f64) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.len());
        for i1 in 0..self.n {
            let x1 = self.coordinate(i1);
            for i2 in 0..self.n {
                out.push(g([x1, self.coordinate(i2)]));
            }
        }
        out
    }

    fn fft2(&self, buf: &mut [Complex64], inverse: bool) {
        let plan = if inverse {
            &self.plans.inverse
        } else {
            &self.plans.forward
        };
        let mut scratch = vec![Complex64::default(); plan.get_inplace_scratch_len()];
        plan.process_with_scratch(buf, &mut scratch);
        transpose(buf, self.n);
        plan.process_with_scratch(buf, &mut scratch);
        transpose(buf, self.n);
    }

    pub fn forward(&self, values: &[f64]) -> Spectrum {
        assert_eq!(values.len(), self.len(), "field size does not match grid");
        let n = self.n;
        let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.fft2(&mut buf, false);
        let norm = 1.0 / (n * n) as f64;
        let h = self.half();
        let mut coeffs = Vec::with_capacity(self.spectral_len());
        for i1 in 0..n {
            for j2 in 0..h {
                coeffs.push(buf[i1 * n + j2] * norm);
            }
        }
        Spectrum { coeffs }
    }

    pub fn inverse(&self, spec: &Spectrum) -> Vec<f64> {
        assert_eq!(spec.coeffs.len(), self.spectral_len());
        let n = self.n;
        let h = self.half();
        let mut buf = vec![Complex64::default(); n * n];
        for i1 in 0..n {
            for j2 in 0..n {
                buf[i1 * n + j2] = if j2 < h {
                    spec.coeffs[i1 * h + j2]
                } else {
                    spec.coeffs[((n - i1) % n) * h + (n - j2)].conj()
                };
            }
        }
        self.fft2(&mut buf, true);
        buf.iter().map(|c| c.re).collect()
    }
}

fn transpose(buf: &mut [Complex64], n: usize) {
    for i in 0..n {
        for j in (i + 1)..n {
            buf.swap(i * n + j, j * n + i);
        }
    }
}

/// Reduced-layout Fourier coefficients of one real scalar field.
#[derive(Clone, Debug, PartialEq)]
pub struct Spectrum {
    pub coeffs: Vec<Complex64>,
}

impl Spectrum {
    pub fn zeros(grid: &SpectralGrid) -> Self {
        Spectrum {
            coeffs: vec![Complex64::default(); grid.spectral_len()],
        }
    }

    /// `Σ_k |û(k)|²` over the full (unreduced) spectrum.
    pub fn power(&self, grid: &SpectralGrid) -> f64 {
        self.weighted_power(grid, |_, _| 1.0)
    }

    pub(crate) fn weighted_power(
        &self,
        grid: &SpectralGrid,
        weight: impl Fn(usize, usize) -> f64,
    ) -> f64 {
        let h = grid.half();
        let mut acc = 0.0;
        for i1 in 0..grid.n() {
            for j2 in 0..h {
                let c = self.coeffs[i1 * h + j2];
                acc += grid.column_weight(j2) * weight(i1, j2) * c.norm_sqr();
            }
        }
        acc
    }
}

/// Real scalar field sampled on a [`SpectralGrid`].
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    grid: SpectralGrid,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: &SpectralGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(NsvError::GridMismatch("scalar field length"));
        }
        Ok(ScalarField {
            grid: grid.clone(),
            values,
        })
    }

    pub fn zeros(grid: &SpectralGrid) -> Self {
        ScalarField {
            grid: grid.clone(),
            values: vec![0.0; grid.len()],
        }
    }

    pub fn from_fn(grid: &SpectralGrid, g: impl Fn([f64; 2]) -> f64) -> Self {
        ScalarField {
            grid: grid.clone(),
            values: grid.sample(g),
        }
    }

    pub fn grid(&self) -> &SpectralGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn spectrum(&self) -> Spectrum {
        self.grid.forward(&self.values)
    }

    /// `∫ g dx` by the rectangle rule.
    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.cell_area()
    }

    pub fn l2_norm(&self) -> f64 {
        (self.values.iter().map(|v| v * v).sum::<f64>() * self.grid.cell_area()).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Arbitrary two-component field; not necessarily divergence-free.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorField {
    grid: SpectralGrid,
    comps: [Vec<f64>; 2],
}

impl VectorField {
    pub fn new(grid: &SpectralGrid, u1: Vec<f64>, u2: Vec<f64>) -> Result<Self> {
        if u1.len() != grid.len() || u2.len() != grid.len() {
            return Err(NsvError::GridMismatch("vector field length"));
        }
        Ok(VectorField {
            grid: grid.clone(),
            comps: [u1, u2],
        })
    }

    pub fn zeros(grid: &SpectralGrid) -> Self {
        VectorField {
            grid: grid.clone(),
            comps: [vec![0.0; grid.len()], vec![0.0; grid.len()]],
        }
    }

    pub fn from_fn(grid: &SpectralGrid, g: impl Fn([f64; 2]) -> [f64; 2]) -> Self {
        VectorField {
            grid: grid.clone(),
            comps: [grid.sample(|x| g(x)[0]), grid.sample(|x| g(x)[1])],
        }
    }

    pub(crate) fn from_spectra(grid: &SpectralGrid, spec: &[Spectrum; 2]) -> Self {
        VectorField {
            grid: grid.clone(),
            comps: [grid.inverse(&spec[0]), grid.inverse(&spec[1])],
        }
    }

    pub fn grid(&self) -> &SpectralGrid {
        &self.grid
    }

    pub fn component(&self, c: usize) -> &[f64] {
        &self.comps[c]
    }

    pub fn components(&self) -> &[Vec<f64>; 2] {
        &self.comps
    }

    pub fn into_components(self) -> [Vec<f64>; 2] {
        self.comps
    }

    pub fn spectra(&self) -> [Spectrum; 2] {
        [
            self.grid.forward(&self.comps[0]),
            self.grid.forward(&self.comps[1]),
        ]
    }

    pub fn at(&self, idx: usize) -> [f64; 2] {
        [self.comps[0][idx], self.comps[1][idx]]
    }

    /// Discrete `∫ a·b dx`.
    pub fn inner(&self, other: &VectorField) -> f64 {
        let s: f64 = (0..2)
            .map(|c| {
                self.comps[c]
                    .iter()
                    .zip(&other.comps[c])
                    .map(|(a, b)| a * b)
                    .sum::<f64>()
            })
            .sum();
        s * self.grid.cell_area()
    }

    pub fn l2_norm(&self) -> f64 {
        self.inner(self).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.comps
            .iter()
            .flat_map(|c| c.iter())
            .fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `∫ u dx`, the fluid momentum.
    pub fn integral(&self) -> [f64; 2] {
        let a = self.grid.cell_area();
        [
            self.comps[0].iter().sum::<f64>() * a,
            self.comps[1].iter().sum::<f64>() * a,
        ]
    }

    pub fn sub(&self, other: &VectorField) -> VectorField {
        let comps = [0, 1].map(|c| {
            self.comps[c]
                .iter()
                .zip(&other.comps[c])
                .map(|(a, b)| a - b)
                .collect()
        });
        VectorField {
            grid: self.grid.clone(),
            comps,
        }
    }

    /// Largest `|k·û(k)|` over non-Nyquist modes.
    pub fn divergence_residual(&self) -> f64 {
        let spec = self.spectra();
        let grid = &self.grid;
        let h = grid.half();
        let mut worst: f64 = 0.0;
        for i1 in 0..grid.n() {
            for j2 in 0..h {
                if grid.is_nyquist(i1, j2) {
                    continue;
                }
                let [k1, k2] = grid.wavenumber(i1, j2);
                let idx = i1 * h + j2;
                let d = spec[0].coeffs[idx] * k1 + spec[1].coeffs[idx] * k2;
                worst = worst.max(d.norm());
            }
        }
        worst
    }
}

/// Divergence-free velocity field.
#[derive(Clone, Debug, PartialEq)]
pub struct VelocityField(VectorField);

impl Deref for VelocityField {
    type Target = VectorField;

    fn deref(&self) -> &VectorField {
        &self.0
    }
}

impl VelocityField {
    pub fn zeros(grid: &SpectralGrid) -> Self {
        VelocityField(VectorField::zeros(grid))
    }

    /// Accepts `w` as a velocity if its spectral divergence is below
    /// `tol · max(‖w‖_{L²}, 1)`.
    pub fn try_from_field(w: VectorField, tol: f64) -> Result<Self> {
        let scale = w.l2_norm().max(1.0);
        let div = w.divergence_residual();
        if div > tol * scale {
            return Err(NsvError::arg(
                "velocity",
                format!("field is not divergence-free (max |k·û| = {div:e})"),
            ));
        }
        Ok(VelocityField(w))
    }

    pub(crate) fn from_spectra_unchecked(grid: &SpectralGrid, spec: &[Spectrum; 2]) -> Self {
        VelocityField(VectorField::from_spectra(grid, spec))
    }

    pub(crate) fn from_field_unchecked(w: VectorField) -> Self {
        VelocityField(w)
    }

    pub fn as_vector(&self) -> &VectorField {
        &self.0
    }

    pub fn into_vector(self) -> VectorField {
        self.0
    }
}

/// Scalar vorticity `ω = ∂₁u₂ − ∂₂u₁`.
#[derive(Clone, Debug, PartialEq)]
pub struct VorticityField(pub ScalarField);

impl Deref for VorticityField {
    type Target = ScalarField;

    fn deref(&self) -> &ScalarField {
        &self.0
    }
}

/// Applies `I − kkᵀ/|k|²` per mode. `k = 0` passes through; Nyquist modes, whose
/// divergence is not representable on the grid, are removed.
pub(crate) fn project_spectra(grid: &SpectralGrid, spec: &mut [Spectrum; 2]) {
    let h = grid.half();
    let [s1, s2] = spec;
    for i1 in 0..grid.n() {
        for j2 in 0..h {
            let idx = i1 * h + j2;
            if grid.is_nyquist(i1, j2) {
                s1.coeffs[idx] = Complex64::default();
                s2.coeffs[idx] = Complex64::default();
                continue;
            }
            let [k1, k2] = grid.wavenumber(i1, j2);
            let ksq = k1 * k1 + k2 * k2;
            if ksq == 0.0 {
                continue;
            }
            let a = s1.coeffs[idx];
            let b = s2.coeffs[idx];
            let kdot = (a * k1 + b * k2) / ksq;
            s1.coeffs[idx] = a - kdot * k1;
            s2.coeffs[idx] = b - kdot * k2;
        }
    }
}

pub(crate) fn apply_dealias(grid: &SpectralGrid, spec: &mut Spectrum) {
    let h = grid.half();
    for i1 in 0..grid.n() {
        for j2 in 0..h {
            if !grid.is_retained(i1, j2) {
                spec.coeffs[i1 * h + j2] = Complex64::default();
            }
        }
    }
}

/// Multiplies every mode by `exp(−|k|² τ)`.
pub(crate) fn heat_multiply(grid: &SpectralGrid, spec: &mut Spectrum, tau: f64) {
    let h = grid.half();
    for i1 in 0..grid.n() {
        for j2 in 0..h {
            spec.coeffs[i1 * h + j2] *= (-grid.k_squared(i1, j2) * tau).exp();
        }
    }
}

/// Spectral `∂_axis`, with the Nyquist mode of that axis zeroed.
pub(crate) fn derivative(grid: &SpectralGrid, spec: &Spectrum, axis: usize) -> Spectrum {
    let h = grid.half();
    let mut out = spec.clone();
    for i1 in 0..grid.n() {
        for j2 in 0..h {
            let idx = i1 * h + j2;
            let nyq = if axis == 0 {
                i1 == grid.n() / 2
            } else {
                j2 == grid.n() / 2
            };
            let k = grid.wavenumber(i1, j2)[axis];
            out.coeffs[idx] = if nyq {
                Complex64::default()
            } else {
                spec.coeffs[idx] * Complex64::new(0.0, k)
            };
        }
    }
    out
}

pub(crate) fn laplacian(grid: &SpectralGrid, spec: &Spectrum) -> Spectrum {
    let h = grid.half();
    let mut out = spec.clone();
    for i1 in 0..grid.n() {
        for j2 in 0..h {
            out.coeffs[i1 * h + j2] *= -grid.k_squared(i1, j2);
        }
    }
    out
}

/// Leray–Hodge projection onto divergence-free fields.
pub fn leray_project(w: &VectorField) -> VelocityField {
    let grid = w.grid();
    let mut spec = w.spectra();
    project_spectra(grid, &mut spec);
    VelocityField::from_spectra_unchecked(grid, &spec)
}

/// Exact heat-semigroup propagation `e^{τΔ}u`.
pub fn heat_propagate(u: &VelocityField, tau: f64) -> Result<VelocityField> {
    if !(tau >= 0.0 && tau.is_finite()) {
        return Err(NsvError::arg("tau", format!("must be finite and ≥ 0, got {tau}")));
    }
    let grid = u.grid();
    let mut spec = u.spectra();
    for s in spec.iter_mut() {
        heat_multiply(grid, s, tau);
    }
    Ok(VelocityField::from_spectra_unchecked(grid, &spec))
}

/// Dealiased spectrum of `(a·∇)b` for each component of `b`, before projection.
/// Inputs are truncated to the retained band first.
pub(crate) fn advection_spectra(
    grid: &SpectralGrid,
    a_spec: &[Spectrum; 2],
    b_spec: &[Spectrum; 2],
) -> [Spectrum; 2] {
    let trunc = |s: &Spectrum| {
        let mut s = s.clone();
        apply_dealias(grid, &mut s);
        s
    };
    let a: [Vec<f64>; 2] = [0, 1].map(|c| grid.inverse(&trunc(&a_spec[c])));
    [0, 1].map(|c| {
        let bt = trunc(&b_spec[c]);
        let d1 = grid.inverse(&derivative(grid, &bt, 0));
        let d2 = grid.inverse(&derivative(grid, &bt, 1));
        let prod: Vec<f64> = (0..grid.len())
            .map(|i| a[0][i] * d1[i] + a[1][i] * d2[i])
            .collect();
        let mut s = grid.forward(&prod);
        apply_dealias(grid, &mut s);
        s
    })
}

/// `P(u·∇u)`, evaluated pseudo-spectrally under the two-thirds rule.
pub fn nonlinear_term(u: &VelocityField) -> VelocityField {
    let grid = u.grid();
    let spec = u.spectra();
    let mut adv = advection_spectra(grid, &spec, &spec);
    project_spectra(grid, &mut adv);
    VelocityField::from_spectra_unchecked(grid, &adv)
}

/// Spectral curl; Nyquist modes are dropped on both axes, matching the projector.
pub(crate) fn curl_spectrum(grid: &SpectralGrid, spec: &[Spectrum; 2]) -> Spectrum {
    let d1u2 = derivative(grid, &spec[1], 0);
    let d2u1 = derivative(grid, &spec[0], 1);
    let h = grid.half();
    let mut out = Spectrum::zeros(grid);
    for i1 in 0..grid.n() {
        for j2 in 0..h {
            if !grid.is_nyquist(i1, j2) {
                let idx = i1 * h + j2;
                out.coeffs[idx] = d1u2.coeffs[idx] - d2u1.coeffs[idx];
            }
        }
    }
    out
}

/// `ω = ∂₁u₂ − ∂₂u₁` by spectral differentiation.
pub fn curl(u: &VectorField) -> VorticityField {
    let grid = u.grid();
    let omega = curl_spectrum(grid, &u.spectra());
    VorticityField(ScalarField {
        grid: grid.clone(),
        values: grid.inverse(&omega),
    })
}

/// The decaying Taylor–Green vortex `(sin x₁ cos x₂, −cos x₁ sin x₂)·e^{−2t}`,
/// an exact solution of the unforced equations with unit viscosity on `L = 2π`.
pub fn taylor_green(t: f64, grid: &SpectralGrid) -> Result<VelocityField> {
    if (grid.length() - 2.0 * PI).abs() > 1e-12 {
        return Err(NsvError::arg(
            "grid.length",
            format!("Taylor–Green requires L = 2π, got {}", grid.length()),
        ));
    }
    let amp = (-2.0 * t).exp();
    Ok(VelocityField(VectorField::from_fn(grid, |[x1, x2]| {
        [amp * x1.sin() * x2.cos(), -amp * x1.cos() * x2.sin()]
    })))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize) -> SpectralGrid {
        SpectralGrid::new(n, 2.0 * PI).unwrap()
    }

    /// Deterministic pseudo-random field for tests.
    pub(crate) fn noise_field(grid: &SpectralGrid, seed: u64) -> VectorField {
        let mut state = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        let mut next = || {
            state = state
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        let u1: Vec<f64> = (0..grid.len()).map(|_| next()).collect();
        let u2: Vec<f64> = (0..grid.len()).map(|_| next()).collect();
        VectorField::new(grid, u1, u2).unwrap()
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(SpectralGrid::new(7, 1.0).is_err());
        assert!(SpectralGrid::new(6, 1.0).is_err());
        assert!(SpectralGrid::new(8, 0.0).is_err());
        assert!(SpectralGrid::new(8, -1.0).is_err());
    }

    #[test]
    fn zero_mode_and_dealias_mask() {
        let g = grid(12);
        assert_eq!(g.wavenumber(0, 0), [0.0, 0.0]);
        assert!(g.is_retained(4, 4));
        assert!(!g.is_retained(5, 0));
        assert!(!g.is_retained(0, 5));
        assert!(g.is_retained(g.n() - 4, 0));
        assert!(!g.is_retained(g.n() - 5, 0));
    }

    #[test]
    fn round_trip_is_identity() {
        let g = grid(16);
        let w = noise_field(&g, 3);
        let back = g.inverse(&g.forward(w.component(0)));
        let err = back
            .iter()
            .zip(w.component(0))
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(err < 1e-12 * w.max_abs(), "round trip error {err}");
    }

    #[test]
    fn projection_fixes_divergence_free_fields() {
        let g = grid(16);
        let u = taylor_green(0.0, &g).unwrap();
        let p = leray_project(u.as_vector());
        assert!(p.sub(&u).max_abs() < 1e-14);
    }

    #[test]
    fn projection_kills_gradients() {
        let g = grid(16);
        let l = g.length();
        // φ = cos(2πx₁/L), ∇φ = (−(2π/L) sin(2πx₁/L), 0)
        let w = VectorField::from_fn(&g, |[x1, _]| {
            [-(2.0 * PI / l) * (2.0 * PI * x1 / l).sin(), 0.0]
        });
        let p = leray_project(&w);
        assert!(p.max_abs() < 1e-14, "residual {}", p.max_abs());
    }

    #[test]
    fn projection_matches_per_mode_matrix_oracle() {
        let g = grid(16);
        let w = noise_field(&g, 11);
        let p = leray_project(&w);
        // Dense 2×2 matrix per mode applied to the raw spectrum.
        let spec = w.spectra();
        let h = g.half();
        let mut expect = [Spectrum::zeros(&g), Spectrum::zeros(&g)];
        for i1 in 0..g.n() {
            for j2 in 0..h {
                let idx = i1 * h + j2;
                if g.is_nyquist(i1, j2) {
                    continue;
                }
                let [k1, k2] = g.wavenumber(i1, j2);
                let ksq = k1 * k1 + k2 * k2;
                let m = if ksq == 0.0 {
                    [[1.0, 0.0], [0.0, 1.0]]
                } else {
                    [
                        [1.0 - k1 * k1 / ksq, -k1 * k2 / ksq],
                        [-k2 * k1 / ksq, 1.0 - k2 * k2 / ksq],
                    ]
                };
                for r in 0..2 {
                    expect[r].coeffs[idx] =
                        spec[0].coeffs[idx] * m[r][0] + spec[1].coeffs[idx] * m[r][1];
                }
            }
        }
        let oracle = VectorField::from_spectra(&g, &expect);
        assert!(p.sub(&oracle).max_abs() < 1e-13);
        assert!(p.divergence_residual() < 1e-12 * w.l2_norm());
    }

    #[test]
    fn heat_rejects_negative_time() {
        let g = grid(8);
        let u = VelocityField::zeros(&g);
        assert!(heat_propagate(&u, -1e-3).is_err());
        assert!(heat_propagate(&u, f64::NAN).is_err());
    }

    #[test]
    fn heat_identity_at_zero_and_single_mode_decay() {
        let g = SpectralGrid::new(16, 3.0).unwrap();
        let kk = 2.0 * PI / 3.0;
        let u = VelocityField::try_from_field(
            VectorField::from_fn(&g, |[_, x2]| [(kk * x2).cos(), 0.0]),
            1e-12,
        )
        .unwrap();
        let same = heat_propagate(&u, 0.0).unwrap();
        assert!(same.sub(&u).max_abs() < 1e-14);
        // mode (0, 2π/L) in u₁: divergence-free since ∂₁u₁ = 0
        let decayed = heat_propagate(&u, 1.0).unwrap();
        let factor = (-kk * kk).exp();
        let expect = VectorField::from_fn(&g, |[_, x2]| [factor * (kk * x2).cos(), 0.0]);
        assert!(decayed.sub(&expect).max_abs() < 1e-14);
    }

    #[test]
    fn heat_semigroup_law() {
        let g = grid(16);
        let u = leray_project(&noise_field(&g, 5));
        let ab = heat_propagate(&heat_propagate(&u, 0.03).unwrap(), 0.05).unwrap();
        let direct = heat_propagate(&u, 0.08).unwrap();
        assert!(ab.sub(&direct).l2_norm() < 1e-13 * direct.l2_norm());
    }

    #[test]
    fn nonlinear_term_vanishes_for_constant_and_taylor_green() {
        let g = grid(16);
        let c = VelocityField::try_from_field(VectorField::from_fn(&g, |_| [0.7, -0.2]), 1e-12)
            .unwrap();
        assert!(nonlinear_term(&c).max_abs() < 1e-14);
        let tg = taylor_green(0.0, &g).unwrap();
        assert!(nonlinear_term(&tg).max_abs() < 1e-13);
    }

    /// Direct truncated convolution: (u·∇u)^(k) = Σ_{p+q=k} (û(p)·iq) û(q).
    #[test]
    fn nonlinear_term_matches_convolution_oracle() {
        let g = grid(8);
        let raw = noise_field(&g, 21);
        let mut spec = raw.spectra();
        for s in spec.iter_mut() {
            apply_dealias(&g, s);
        }
        let u = VelocityField::from_spectra_unchecked(&g, &{
            let mut s = spec.clone();
            project_spectra(&g, &mut s);
            s
        });
        let us = u.spectra();
        let n = g.n() as i64;
        let h = g.half();
        // Expand the reduced spectrum to a map over signed frequencies.
        let coeff = |c: usize, f1: i64, f2: i64| -> Complex64 {
            let i1 = f1.rem_euclid(n) as usize;
            if f2 >= 0 {
                us[c].coeffs[i1 * h + f2 as usize]
            } else {
                let j1 = (-f1).rem_euclid(n) as usize;
                us[c].coeffs[j1 * h + (-f2) as usize].conj()
            }
        };
        let band = n / 3;
        let scale = 2.0 * PI / g.length();
        let mut expect = [Spectrum::zeros(&g), Spectrum::zeros(&g)];
        for i1 in 0..g.n() {
            for j2 in 0..h {
                if !g.is_retained(i1, j2) {
                    continue;
                }
                let k1 = g.frequency(i1);
                let k2 = j2 as i64;
                for c in 0..2 {
                    let mut acc = Complex64::default();
                    for p1 in -band..=band {
                        for p2 in -band..=band {
                            let (q1, q2) = (k1 - p1, k2 - p2);
                            if q1.abs() > band || q2.abs() > band {
                                continue;
                            }
                            let adot = coeff(0, p1, p2) * Complex64::new(0.0, q1 as f64 * scale)
                                + coeff(1, p1, p2) * Complex64::new(0.0, q2 as f64 * scale);
                            acc += adot * coeff(c, q1, q2);
                        }
                    }
                    expect[c].coeffs[i1 * h + j2] = acc;
                }
            }
        }
        project_spectra(&g, &mut expect);
        let oracle = VectorField::from_spectra(&g, &expect);
        let got = nonlinear_term(&u);
        let err = got.sub(&oracle).max_abs();
        assert!(err < 1e-10, "convolution mismatch {err}");
    }

    #[test]
    fn curl_of_taylor_green() {
        let g = grid(16);
        let tg = taylor_green(0.0, &g).unwrap();
        let w = curl(tg.as_vector());
        let expect = ScalarField::from_fn(&g, |[x1, x2]| 2.0 * x1.sin() * x2.sin());
        let err = w
            .values()
            .iter()
            .zip(expect.values())
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(err < 1e-13);
        assert!(curl(&VectorField::zeros(&g)).max_abs() == 0.0);
    }

    #[test]
    fn curl_ignores_gradient_part() {
        let g = grid(16);
        let w = noise_field(&g, 8);
        let a = curl(&w);
        let b = curl(leray_project(&w).as_vector());
        let err = a
            .values()
            .iter()
            .zip(b.values())
            .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
        // Nyquist content is discarded by both derivative and projection.
        assert!(err < 1e-12 * a.max_abs().max(1.0), "err {err}");
    }

    #[test]
    fn taylor_green_amplitude_and_domain() {
        let g = grid(16);
        let half = taylor_green(2f64.ln() / 2.0, &g).unwrap();
        let unit = taylor_green(0.0, &g).unwrap();
        assert!((half.max_abs() - 0.5 * unit.max_abs()).abs() < 1e-15);
        assert!(half.divergence_residual() < 1e-12);
        let other = SpectralGrid::new(16, 1.0).unwrap();
        assert!(taylor_green(0.0, &other).is_err());
    }
}
