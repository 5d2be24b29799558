//! Four-point cubic interpolation on uniform grids: Lagrange and B-spline.

/// Weights for the stencil `{−1, 0, 1, 2}` at fractional offset `θ ∈ [0, 1)`.
#[inline(always)]
pub fn cubic_weights(t: f64) -> [f64; 4] {
    let tp1 = t + 1.0;
    let tm1 = t - 1.0;
    let tm2 = t - 2.0;
    [
        -t * tm1 * tm2 / 6.0,
        tp1 * tm1 * tm2 / 2.0,
        -tp1 * t * tm2 / 2.0,
        tp1 * t * tm1 / 6.0,
    ]
}

/// Uniform cubic B-spline basis values for the stencil `{−1, 0, 1, 2}` at
/// offset `θ ∈ [0, 1)`. Applied to coefficients from [`SplineFilter`].
#[inline(always)]
pub fn bspline_weights(t: f64) -> [f64; 4] {
    let s = 1.0 - t;
    let t2 = t * t;
    let t3 = t2 * t;
    [
        s * s * s / 6.0,
        (3.0 * t3 - 6.0 * t2 + 4.0) / 6.0,
        (-3.0 * t3 + 3.0 * t2 + 3.0 * t + 1.0) / 6.0,
        t3 / 6.0,
    ]
}

/// Solver for the cubic B-spline coefficients `c` of samples `y` on `len`
/// nodes: `(c[k−1] + 4c[k] + c[k+1]) / 6 = y[k]` with `c = 0` outside.
pub struct SplineFilter {
    /// Reciprocal pivots of the tridiagonal `(1, 4, 1)` elimination.
    inv: Vec<f64>,
}

impl SplineFilter {
    pub fn new(len: usize) -> Self {
        let mut inv = Vec::with_capacity(len);
        let mut prev = 0.0;
        for _ in 0..len {
            let p = 1.0 / (4.0 - prev);
            inv.push(p);
            prev = p;
        }
        SplineFilter { inv }
    }

    /// In-place on `y[offset + k·stride]`, `k < len`.
    pub fn apply(&self, y: &mut [f64], offset: usize, stride: usize) {
        let inv = &self.inv;
        let len = inv.len();
        let at = |k: usize| offset + k * stride;
        y[at(0)] *= 6.0 * inv[0];
        for k in 1..len {
            y[at(k)] = (6.0 * y[at(k)] - y[at(k - 1)]) * inv[k];
        }
        for k in (0..len - 1).rev() {
            y[at(k)] -= inv[k] * y[at(k + 1)];
        }
    }
}

/// Splits a grid coordinate `s` (in units of spacing) into `(floor, θ)`.
#[inline(always)]
pub fn split(s: f64) -> (i64, f64) {
    let fl = s.floor();
    (fl as i64, s - fl)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_partition_unity_and_reproduce_cubics() {
        for &t in &[0.0, 0.1, 0.5, 0.77, 0.999] {
            let w = cubic_weights(t);
            assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-15);
            let p = |x: f64| 2.0 - x + 0.5 * x * x - 0.25 * x * x * x;
            let interp: f64 = (0..4).map(|k| w[k] * p(k as f64 - 1.0)).sum();
            assert!((interp - p(t)).abs() < 1e-14);
        }
        assert_eq!(cubic_weights(0.0), [0.0, 1.0, 0.0, 0.0].map(|v: f64| v.abs()));
    }

    #[test]
    fn spline_reproduces_samples_and_cubics() {
        let n = 40;
        let y: Vec<f64> = (0..n)
            .map(|k| {
                let x = (k as f64 - 20.0) * 0.3;
                (-x * x).exp()
            })
            .collect();
        let mut c = y.clone();
        SplineFilter::new(n).apply(&mut c, 0, 1);
        for k in 1..n - 1 {
            let back = (c[k - 1] + 4.0 * c[k] + c[k + 1]) / 6.0;
            assert!((back - y[k]).abs() < 1e-14);
        }
        for &t in &[0.0, 0.3, 0.9] {
            let w = bspline_weights(t);
            assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-15);
            // Coefficients of x³ at integer nodes are k³ − k.
            let c = |k: f64| k * k * k - k;
            let v: f64 = (0..4).map(|k| w[k] * c(k as f64 - 1.0)).sum();
            assert!((v - t * t * t).abs() < 1e-13);
        }
    }

    #[test]
    fn split_handles_negatives() {
        assert_eq!(split(-0.25), (-1, 0.75));
        assert_eq!(split(3.5), (3, 0.5));
    }
}
