//! Gauss-Legendre quadrature on `[0, 1]`.
//!
//! Nodes and weights are computed from scratch by Newton iteration on the
//! three-term Legendre recurrence, not copied from a table, so the module
//! is an independent oracle for the rest of the crate. The crate standard
//! is 64 nodes: every integrand integrated here is analytic on `[0, 1]`,
//! for which 64 nodes is far past machine-precision convergence.

use std::sync::OnceLock;

/// Number of nodes used by the crate's quadrature oracles.
pub const ORACLE_NODES: usize = 64;

/// Evaluate the Legendre polynomial `P_n` and its derivative at `x`.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    // p0 = P_{j-1}, p1 = P_j; recurrence (j+1) P_{j+1} = (2j+1) x P_j - j P_{j-1}.
    let mut p0 = 1.0;
    let mut p1 = x;
    for j in 1..n {
        let jf = j as f64;
        let p2 = ((2.0 * jf + 1.0) * x * p1 - jf * p0) / (jf + 1.0);
        p0 = p1;
        p1 = p2;
    }
    // P_n'(x) = n (x P_n - P_{n-1}) / (x^2 - 1).
    let dp = (n as f64) * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// Nodes and weights of the `n`-point rule on `[-1, 1]`, ascending nodes.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 2, "need at least two nodes");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        // Tricomi-style initial guess for the i-th root from the right.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (_, dp) = legendre(n, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        // x is the root nearest +1 for i=0; store ascending.
        nodes[n - 1 - i] = x;
        nodes[i] = -x;
        weights[n - 1 - i] = w;
        weights[i] = w;
    }
    if n % 2 == 1 {
        let mid = n / 2;
        nodes[mid] = 0.0;
        let (_, dp) = legendre(n, 0.0);
        weights[mid] = 2.0 / (dp * dp);
    }
    (nodes, weights)
}

/// Nodes and weights of the `n`-point rule mapped to `[0, 1]`.
pub fn gauss_legendre_01(n: usize) -> (Vec<f64>, Vec<f64>) {
    let (nodes, weights) = gauss_legendre(n);
    (
        nodes.iter().map(|t| 0.5 * (t + 1.0)).collect(),
        weights.iter().map(|w| 0.5 * w).collect(),
    )
}

fn oracle_rule() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre_01(ORACLE_NODES))
}

/// Integrate `f` over `[0, 1]` with the cached 64-node rule.
pub fn integrate_01(f: impl Fn(f64) -> f64) -> f64 {
    let (nodes, weights) = oracle_rule();
    let mut acc = 0.0;
    for (x, w) in nodes.iter().zip(weights) {
        acc += w * f(*x);
    }
    acc
}

/// Integrate `f` over the unit square with the cached 64x64 tensor rule.
pub fn integrate_unit_square(f: impl Fn(f64, f64) -> f64) -> f64 {
    let (nodes, weights) = oracle_rule();
    let mut acc = 0.0;
    for (x1, w1) in nodes.iter().zip(weights) {
        let mut inner = 0.0;
        for (x2, w2) in nodes.iter().zip(weights) {
            inner += w2 * f(*x1, *x2);
        }
        acc += w1 * inner;
    }
    acc
}
