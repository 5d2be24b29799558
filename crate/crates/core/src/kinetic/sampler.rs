use crate::error::{NsvError, Result};
use crate::spectral::{SpectralGrid, VectorField};

/// Time-indexed source of the fluid velocity seen by the characteristics.
pub trait VelocitySampler: Sync {
    /// Closed interval of times this sampler can evaluate.
    fn time_range(&self) -> (f64, f64);

    /// Velocity field on the spatial grid at time `t`.
    fn field_at(&self, t: f64) -> Result<VectorField>;

    fn check_time(&self, t: f64) -> Result<()> {
        let (start, end) = self.time_range();
        let slack = 1e-12 * (1.0 + start.abs().max(end.abs()));
        if t.is_nan() || t < start - slack || t > end + slack {
            return Err(NsvError::SamplerRange { t, start, end });
        }
        Ok(())
    }
}

/// Time-independent velocity over a (possibly unbounded) interval.
#[derive(Clone, Debug)]
pub struct ConstantSampler {
    field: VectorField,
    range: (f64, f64),
}

impl ConstantSampler {
    pub fn new(field: VectorField) -> Self {
        ConstantSampler {
            field,
            range: (f64::NEG_INFINITY, f64::INFINITY),
        }
    }

    pub fn zero(grid: &SpectralGrid) -> Self {
        Self::new(VectorField::zeros(grid))
    }

    pub fn with_range(field: VectorField, start: f64, end: f64) -> Self {
        ConstantSampler {
            field,
            range: (start, end),
        }
    }
}

impl VelocitySampler for ConstantSampler {
    fn time_range(&self) -> (f64, f64) {
        self.range
    }

    fn field_at(&self, t: f64) -> Result<VectorField> {
        self.check_time(t)?;
        Ok(self.field.clone())
    }
}

/// Lagrange interpolation in time through fields given at distinct nodes.
#[derive(Clone, Debug)]
pub struct PathSampler {
    times: Vec<f64>,
    fields: Vec<VectorField>,
}

impl PathSampler {
    pub fn new(times: Vec<f64>, fields: Vec<VectorField>) -> Result<Self> {
        if times.is_empty() || times.len() != fields.len() {
            return Err(NsvError::arg(
                "path",
                "need one field per time node and at least one node",
            ));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(NsvError::arg("path", "time nodes must be strictly increasing"));
        }
        let grid = fields[0].grid();
        if fields.iter().any(|f| f.grid() != grid) {
            return Err(NsvError::GridMismatch("path fields"));
        }
        Ok(PathSampler { times, fields })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn fields(&self) -> &[VectorField] {
        &self.fields
    }

    fn basis(&self, t: f64) -> Vec<f64> {
        let m = self.times.len();
        (0..m)
            .map(|a| {
                (0..m)
                    .filter(|&b| b != a)
                    .map(|b| (t - self.times[b]) / (self.times[a] - self.times[b]))
                    .product()
            })
            .collect()
    }
}

impl VelocitySampler for PathSampler {
    fn time_range(&self) -> (f64, f64) {
        (self.times[0], *self.times.last().unwrap())
    }

    fn field_at(&self, t: f64) -> Result<VectorField> {
        self.check_time(t)?;
        if let Some(k) = self.times.iter().position(|&s| s == t) {
            return Ok(self.fields[k].clone());
        }
        let w = self.basis(t);
        let grid = self.fields[0].grid();
        let comps = [0, 1].map(|c| {
            let mut acc = vec![0.0; grid.len()];
            for (wk, f) in w.iter().zip(&self.fields) {
                for (a, &v) in acc.iter_mut().zip(f.component(c)) {
                    *a += wk * v;
                }
            }
            acc
        });
        let [u1, u2] = comps;
        VectorField::new(grid, u1, u2)
    }
}

/// Analytic velocity `u(t, x)` sampled onto the grid on demand.
pub struct FnSampler<F> {
    grid: SpectralGrid,
    range: (f64, f64),
    func: F,
}

impl<F> FnSampler<F>
where
    F: Fn(f64, [f64; 2]) -> [f64; 2] + Sync,
{
    pub fn new(grid: &SpectralGrid, start: f64, end: f64, func: F) -> Self {
        FnSampler {
            grid: grid.clone(),
            range: (start, end),
            func,
        }
    }
}

impl<F> VelocitySampler for FnSampler<F>
where
    F: Fn(f64, [f64; 2]) -> [f64; 2] + Sync,
{
    fn time_range(&self) -> (f64, f64) {
        self.range
    }

    fn field_at(&self, t: f64) -> Result<VectorField> {
        self.check_time(t)?;
        Ok(VectorField::from_fn(&self.grid, |x| (self.func)(t, x)))
    }
}
