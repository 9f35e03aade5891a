//! Cell-wise error metrics between two probability fields, relative
//! quadratic error, and the least-squares fit used for convergence rates.

use std::io::Write;

use crate::error::{Error, Result};
use crate::field::Field;
use crate::io::fmt_g12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SummaryStats {
    pub mean: f64,
    /// Sample standard deviation (`n - 1` denominator; 0 for one value).
    pub sd: f64,
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

impl SummaryStats {
    pub fn from_values(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
        let sd = if values.len() > 1 { (ss / (n - 1.0)).sqrt() } else { 0.0 };
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Some(Self { mean, sd, min, max, count: values.len() })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellError {
    pub i: usize,
    pub j: usize,
    pub a: f64,
    pub b: f64,
    pub square: f64,
    pub absolute: f64,
    /// `|a - b| / |b|`, absent when either value is zero.
    pub relative: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonReport {
    /// Side of the compared sub-lattice `{1..n}²`.
    pub n: usize,
    pub cells: Vec<CellError>,
    pub square: SummaryStats,
    pub absolute: SummaryStats,
    pub relative: Option<SummaryStats>,
    pub cells_excluded: usize,
    /// Relative quadratic error normalised by the norm of `a`.
    pub rqe_by_a: f64,
    /// Relative quadratic error normalised by the norm of `b`.
    pub rqe_by_b: f64,
}

/// Compare `a` and `b` on `{1..n}²`.
pub fn compare(a: &Field, b: &Field, n: usize) -> Result<ComparisonReport> {
    if n == 0 {
        return Err(Error::InvalidArgument("empty comparison lattice".into()));
    }
    if a.n() < n || b.n() < n {
        return Err(Error::InvalidArgument(format!(
            "fields of size {} and {} do not cover the {n}x{n} lattice",
            a.n(),
            b.n()
        )));
    }
    let mut cells = Vec::with_capacity(n * n);
    for i in 1..=n {
        for j in 1..=n {
            let (x, y) = (a.get(i, j), b.get(i, j));
            let diff = x - y;
            cells.push(CellError {
                i,
                j,
                a: x,
                b: y,
                square: diff * diff,
                absolute: diff.abs(),
                relative: (x != 0.0 && y != 0.0).then(|| diff.abs() / y.abs()),
            });
        }
    }
    let collect = |f: fn(&CellError) -> f64| cells.iter().map(f).collect::<Vec<_>>();
    let relative: Vec<f64> = cells.iter().filter_map(|c| c.relative).collect();
    let (by_a, by_b) = rqe(a, b, n);
    Ok(ComparisonReport {
        n,
        square: SummaryStats::from_values(&collect(|c| c.square)).expect("non-empty"),
        absolute: SummaryStats::from_values(&collect(|c| c.absolute)).expect("non-empty"),
        relative: SummaryStats::from_values(&relative),
        cells_excluded: cells.len() - relative.len(),
        cells,
        rqe_by_a: by_a,
        rqe_by_b: by_b,
    })
}

/// `‖a - b‖₂ / ‖a‖₂` and `‖a - b‖₂ / ‖b‖₂` over `{1..n}²`. A zero
/// difference gives 0 even when a norm vanishes.
pub fn rqe(a: &Field, b: &Field, n: usize) -> (f64, f64) {
    let (mut diff, mut na, mut nb) = (0.0, 0.0, 0.0);
    for i in 1..=n {
        for j in 1..=n {
            let (x, y) = (a.get(i, j), b.get(i, j));
            diff += (x - y) * (x - y);
            na += x * x;
            nb += y * y;
        }
    }
    let ratio = |norm: f64| if diff == 0.0 { 0.0 } else { (diff / norm).sqrt() };
    (ratio(na), ratio(nb))
}

impl ComparisonReport {
    /// Summary table: one row per metric plus the two quadratic errors.
    pub fn write_summary_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "metric,mean,sd,min,max,count")?;
        let mut row = |name: &str, s: &SummaryStats| {
            writeln!(
                w,
                "{name},{},{},{},{},{}",
                fmt_g12(s.mean),
                fmt_g12(s.sd),
                fmt_g12(s.min),
                fmt_g12(s.max),
                s.count
            )
        };
        row("square", &self.square)?;
        row("absolute", &self.absolute)?;
        if let Some(rel) = &self.relative {
            row("relative", rel)?;
        }
        writeln!(w, "rqe_by_a,{},,,,{}", fmt_g12(self.rqe_by_a), self.n * self.n)?;
        writeln!(w, "rqe_by_b,{},,,,{}", fmt_g12(self.rqe_by_b), self.n * self.n)?;
        writeln!(w, "relative_excluded,{},,,,", self.cells_excluded)?;
        Ok(())
    }

    pub fn write_cells_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "i,j,a,b,square,absolute,relative")?;
        for c in &self.cells {
            let rel = c.relative.map(fmt_g12).unwrap_or_default();
            writeln!(
                w,
                "{},{},{},{},{},{},{rel}",
                c.i,
                c.j,
                fmt_g12(c.a),
                fmt_g12(c.b),
                fmt_g12(c.square),
                fmt_g12(c.absolute)
            )?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub points: usize,
}

/// Ordinary least squares `y ≈ intercept + slope x`.
pub fn fit_line(points: &[(f64, f64)]) -> Result<LinearFit> {
    if points.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "need at least two points for a fit, got {}",
            points.len()
        )));
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = points.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidArgument("fit abscissae are all equal".into()));
    }
    let slope = sxy / sxx;
    let r_squared = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok(LinearFit {
        slope,
        intercept: my - slope * mx,
        r_squared,
        points: points.len(),
    })
}

/// Fit `log y` against `x`, skipping non-positive `y`.
pub fn fit_log_linear(points: &[(f64, f64)]) -> Result<LinearFit> {
    let logs: Vec<(f64, f64)> = points
        .iter()
        .filter(|p| p.1 > 0.0)
        .map(|&(x, y)| (x, y.ln()))
        .collect();
    fit_line(&logs)
}
