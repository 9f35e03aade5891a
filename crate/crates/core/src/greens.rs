//! Generating function `P(x0, y0) = Σ_{i,j≥1} p_{i,j} x0^i y0^j`, two ways.
//!
//! [`greens_quadrature`] integrates along the characteristic through
//! `(x0, y0)` up to the time `s0` at which it reaches the origin. Only the
//! first-row probabilities `p_{i,1}` (equal to `p_{1,i}` by symmetry) enter:
//!
//! ```text
//! P = (r/2) Σ_{i≤I0} p_{i,1} ∫ i (x_u^i + y_u^i) IF(u) du
//!   + d ∫ [ x_u (x_u^I0 - y_u)/(1 - x_u) + y_u (y_u^I0 - x_u)/(1 - y_u) ] IF(u) du
//! ```
//!
//! where the second integral merges the boundary source term with the tail
//! `i > I0` of the first sum, approximated through `p_{i,1} ≈ 2d/(r i)`.
//!
//! The first-row values have to come from somewhere; in practice they are
//! read off a solved grid, so the quadrature is only as good as its input.
//! [`series_from_grid`] sums the series directly from the grid and bounds
//! the missing tail, which makes it an independent check of the quadrature.

use std::io::Write;

use crate::asymptotics::closure_estimate;
use crate::characteristics::make_path;
use crate::error::{Error, Result};
use crate::grid::GridSolution;
use crate::io::fmt_g12;
use crate::model::ModelParams;
use crate::quadrature::integrate;

pub const MAX_I0: usize = 200;

#[derive(Debug, Clone, PartialEq)]
pub struct GreensInput {
    pub x0: f64,
    pub y0: f64,
    /// `p_{i,1}` for `i = 1..=I0`.
    pub p_row1: Vec<f64>,
    pub quad_tol: f64,
}

impl GreensInput {
    pub fn new(x0: f64, y0: f64, p_row1: Vec<f64>, quad_tol: f64) -> Result<Self> {
        if p_row1.is_empty() {
            return Err(Error::InvalidArgument("need at least one p_{i,1} (I0 >= 1)".into()));
        }
        if let Some(bad) = p_row1.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::InvalidArgument(format!("p_{{i,1}} value {bad} outside [0, 1]")));
        }
        if !(quad_tol > 0.0) {
            return Err(Error::InvalidArgument(format!("quad_tol must be > 0, got {quad_tol}")));
        }
        Ok(Self { x0, y0, p_row1, quad_tol })
    }

    /// Input with the default truncation index and first-row values taken
    /// from `solution`, extended by the asymptotic closure past the grid.
    pub fn from_grid(solution: &GridSolution, x0: f64, y0: f64, quad_tol: f64) -> Result<Self> {
        let i0 = default_i0(x0, y0, quad_tol);
        let row = row1_from_grid(solution, i0)?;
        Self::new(x0, y0, row, quad_tol)
    }

    pub fn i0(&self) -> usize {
        self.p_row1.len()
    }
}

/// Smallest `I0` with `max(x0, y0)^(I0+1) < quad_tol`, capped at [`MAX_I0`].
pub fn default_i0(x0: f64, y0: f64, quad_tol: f64) -> usize {
    let m = x0.max(y0);
    let mut i0 = 1;
    while i0 < MAX_I0 && m.powi(i0 as i32 + 1) >= quad_tol {
        i0 += 1;
    }
    i0
}

/// `p_{i,1}` for `i = 1..=i0`: grid values where available, then the
/// asymptotic closure.
pub fn row1_from_grid(solution: &GridSolution, i0: usize) -> Result<Vec<f64>> {
    let n = solution.n();
    (1..=i0)
        .map(|i| {
            if i <= n {
                Ok(solution.get(i, 1))
            } else {
                closure_estimate(&solution.params, i as u32, 1)
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GreensEstimate {
    pub value: f64,
    /// Quadrature error estimate (truncation at `I0` not included).
    pub error: f64,
    pub s0: f64,
}

pub fn greens_quadrature(params: &ModelParams, input: &GreensInput) -> Result<GreensEstimate> {
    let path = make_path(params, input.x0, input.y0)?;
    let (r, d) = (params.r(), params.d());
    let i0 = input.i0() as i32;
    let p_row1 = &input.p_row1;

    let integrand = |u: f64| {
        let (x, y) = path.point(u);
        let (wx, wy) = path.weighted_point(u);
        // Σ p_i i (x^{i-1} + ...) by Horner in x and y
        let mut bx = 0.0;
        let mut by = 0.0;
        for (k, p) in p_row1.iter().enumerate().rev() {
            let c = p * (k + 1) as f64;
            bx = bx * x + c;
            by = by * y + c;
        }
        let boundary = bx * wx + by * wy;
        let tail = wx * (x.powi(i0) - y) / (1.0 - x) + wy * (y.powi(i0) - x) / (1.0 - y);
        0.5 * r * boundary + d * tail
    };

    let q = integrate(integrand, 0.0, path.s0, input.quad_tol)?;
    Ok(GreensEstimate {
        value: q.value,
        error: q.error,
        s0: path.s0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesEstimate {
    pub value: f64,
    /// Upper bound on `Σ_{i>N or j>N} p_{i,j} x0^i y0^j` from the a-priori
    /// bound `p_{i,j} ≤ (d/r)^i + (d/r)^j`.
    pub tail_bound: f64,
}

/// Partial sum over the grid plus a closed-form bound on the missing tail.
pub fn series_from_grid(solution: &GridSolution, x0: f64, y0: f64) -> Result<SeriesEstimate> {
    let in_range = |v: f64| (0.0..1.0).contains(&v);
    if !in_range(x0) || !in_range(y0) {
        return Err(Error::InvalidArgument(format!(
            "series needs (x0, y0) in [0, 1)^2, got ({x0}, {y0})"
        )));
    }
    let n = solution.n();
    let xp: Vec<f64> = (1..=n).map(|i| x0.powi(i as i32)).collect();
    let yp: Vec<f64> = (1..=n).map(|j| y0.powi(j as i32)).collect();
    let mut value = 0.0;
    for i in 1..=n {
        let row: f64 = (1..=n).map(|j| solution.get(i, j) * yp[j - 1]).sum();
        value += row * xp[i - 1];
    }
    let rho = solution.params.ratio();
    let tail_bound = box_complement_sum(rho * x0, y0, n) + box_complement_sum(x0, rho * y0, n);
    Ok(SeriesEstimate { value, tail_bound })
}

/// `Σ a^i b^j` over `i, j ≥ 1` with `i > n` or `j > n`.
fn box_complement_sum(a: f64, b: f64, n: usize) -> f64 {
    let full = |t: f64| t / (1.0 - t);
    let partial = |t: f64| t * (1.0 - t.powi(n as i32)) / (1.0 - t);
    let tail = |t: f64| t.powi(n as i32 + 1) / (1.0 - t);
    full(a) * tail(b) + tail(a) * partial(b)
}

/// One row of the `x,y,P_quadrature,P_series,abs_diff` table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GreensComparison {
    pub x0: f64,
    pub y0: f64,
    pub quadrature: f64,
    pub series: f64,
    pub series_tail: f64,
    pub abs_diff: f64,
}

pub fn compare_at(solution: &GridSolution, x0: f64, y0: f64, quad_tol: f64) -> Result<GreensComparison> {
    let input = GreensInput::from_grid(solution, x0, y0, quad_tol)?;
    let quad = greens_quadrature(&solution.params, &input)?;
    let series = series_from_grid(solution, x0, y0)?;
    Ok(GreensComparison {
        x0,
        y0,
        quadrature: quad.value,
        series: series.value,
        series_tail: series.tail_bound,
        abs_diff: (quad.value - series.value).abs(),
    })
}

pub const CSV_HEADER: &str = "x,y,P_quadrature,P_series,abs_diff";

pub fn write_csv<W: Write>(mut w: W, rows: &[GreensComparison]) -> Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    for c in rows {
        writeln!(
            w,
            "{},{},{},{},{}",
            fmt_g12(c.x0),
            fmt_g12(c.y0),
            fmt_g12(c.quadrature),
            fmt_g12(c.series),
            fmt_g12(c.abs_diff)
        )?;
    }
    Ok(())
}
