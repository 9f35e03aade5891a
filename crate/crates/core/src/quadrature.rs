//! Adaptive composite Gauss–Legendre quadrature.
//!
//! Each panel is integrated with the 15-point rule and with the same rule on
//! its two halves; the difference serves as the panel error estimate. Panels
//! whose estimate exceeds their share of the tolerance are bisected.

use std::sync::OnceLock;

use crate::error::{Error, Result};

const POINTS: usize = 15;
const MAX_DEPTH: u32 = 40;

/// Nodes and weights on `[-1, 1]`, from Newton iteration on `P_15`.
fn rule() -> &'static ([f64; POINTS], [f64; POINTS]) {
    static RULE: OnceLock<([f64; POINTS], [f64; POINTS])> = OnceLock::new();
    RULE.get_or_init(|| {
        let n = POINTS;
        let mut nodes = [0.0; POINTS];
        let mut weights = [0.0; POINTS];
        for k in 0..n {
            let mut x = (std::f64::consts::PI * (k as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                // three-term recurrence for P_n and its derivative
                let (mut p0, mut p1) = (1.0, x);
                for m in 2..=n {
                    let m = m as f64;
                    let p2 = ((2.0 * m - 1.0) * x * p1 - (m - 1.0) * p0) / m;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            nodes[k] = x;
            weights[k] = 2.0 / ((1.0 - x * x) * dp * dp);
        }
        (nodes, weights)
    })
}

/// Single 15-point panel on `[a, b]`.
pub fn gauss_legendre<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> f64 {
    let (nodes, weights) = rule();
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    nodes
        .iter()
        .zip(weights)
        .map(|(x, w)| w * f(mid + half * x))
        .sum::<f64>()
        * half
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub error: f64,
    pub panels: usize,
}

/// Integrate `f` over `[a, b]` to absolute tolerance `tol`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> Result<QuadResult> {
    if !(tol > 0.0) || !(b >= a) {
        return Err(Error::InvalidArgument(format!(
            "bad quadrature request: [{a}, {b}] with tol {tol}"
        )));
    }
    if a == b {
        return Ok(QuadResult { value: 0.0, error: 0.0, panels: 0 });
    }
    let total = b - a;
    let mut out = QuadResult { value: 0.0, error: 0.0, panels: 0 };
    let mut converged = true;
    let whole = gauss_legendre(&f, a, b);
    refine(&f, a, b, whole, tol, total, 0, &mut out, &mut converged);
    if !converged || !out.value.is_finite() || out.error > tol {
        return Err(Error::Quadrature {
            estimate: out.value,
            error: out.error,
        });
    }
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn refine<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    whole: f64,
    tol: f64,
    total: f64,
    depth: u32,
    out: &mut QuadResult,
    converged: &mut bool,
) {
    let m = 0.5 * (a + b);
    let left = gauss_legendre(f, a, m);
    let right = gauss_legendre(f, m, b);
    let err = (left + right - whole).abs();
    let share = tol * (b - a) / total;
    if err <= share || depth >= MAX_DEPTH {
        if err > share {
            *converged = false;
        }
        out.value += left + right;
        out.error += err;
        out.panels += 2;
        return;
    }
    refine(f, a, m, left, tol, total, depth + 1, out, converged);
    refine(f, m, b, right, tol, total, depth + 1, out, converged);
}
