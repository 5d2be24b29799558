//! Gauss rules on `[0, 1]` and Lagrange bases through their nodes.

use std::f64::consts::PI;

/// `(P_n(x), P_{n−1}(x))` by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    (p1, p0)
}

/// `q`-point Gauss–Lobatto nodes and weights on `[0, 1]`, ascending; `q ≥ 2`.
pub fn gauss_lobatto(q: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(q >= 2, "Gauss–Lobatto needs at least two nodes");
    let n = q - 1;
    let nf = n as f64;
    let mut nodes = Vec::with_capacity(q);
    let mut weights = Vec::with_capacity(q);
    for i in 0..q {
        let mut x = -(PI * i as f64 / nf).cos();
        if i != 0 && i != n {
            // Newton on (1 − x²) P_n'(x) = n (P_{n−1} − x P_n).
            for _ in 0..100 {
                let (pn, pm) = legendre(n, x);
                let g = pm - x * pn;
                // d/dx of P_{n−1} − x P_n equals −(n + 1) P_n.
                let dx = g / (-(nf + 1.0) * pn);
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
        }
        let (pn, _) = legendre(n, x);
        nodes.push(0.5 * (x + 1.0));
        weights.push(1.0 / (nf * (nf + 1.0) * pn * pn));
    }
    (nodes, weights)
}

/// `q`-point Gauss–Legendre nodes and weights on `[0, 1]`.
pub fn gauss_legendre(q: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(q >= 1);
    let mut nodes = Vec::with_capacity(q);
    let mut weights = Vec::with_capacity(q);
    let qf = q as f64;
    for i in 0..q {
        let mut x = -(PI * (i as f64 + 0.75) / (qf + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, pm) = legendre(q, x);
            dp = qf * (x * p - pm) / (x * x - 1.0);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (p, pm) = legendre(q, x);
        dp = if p.is_finite() { qf * (x * p - pm) / (x * x - 1.0) } else { dp };
        nodes.push(0.5 * (x + 1.0));
        weights.push(1.0 / ((1.0 - x * x) * dp * dp));
    }
    (nodes, weights)
}

/// Values at `t` of the Lagrange basis through `nodes`.
pub fn lagrange_basis(nodes: &[f64], t: f64) -> Vec<f64> {
    (0..nodes.len())
        .map(|a| {
            nodes
                .iter()
                .enumerate()
                .filter(|&(b, _)| b != a)
                .map(|(_, &xb)| (t - xb) / (nodes[a] - xb))
                .product()
        })
        .collect()
}
