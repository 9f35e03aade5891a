//! Experiment descriptors and the driver that writes their CSV artifacts.
//!
//! A descriptor is a flat `key = value` file; `#` starts a comment. Keys:
//!
//! | key | meaning | `r3` preset |
//! |-----|---------|-------------|
//! | `preset` | start from `r3` or `r2002` | |
//! | `name` | label echoed in `spec.txt` | `r3` |
//! | `r`, `d` | model rates | 3, 2 |
//! | `N` | grid size of the main solve and of the MC lattice | 50 |
//! | `M`, `T` | MC paths per cell and horizon | 200, 5000 |
//! | `seed` | base MC seed | 20110 |
//! | `methods` | comma list out of `grid`, `mc`, `greens` | `grid,mc,greens` |
//! | `solver` | `sweep`, `banded` or `value-iteration` | `sweep` |
//! | `tol` | solver tolerance | 1e-12 |
//! | `convergence_min`, `convergence_max` | grid sizes of the convergence series | 10, 50 |
//! | `reference_n` | deterministic reference grid size | 50 |
//! | `rqe_lattice` | side of the sub-lattice used for relative quadratic errors | 10 |
//! | `greens_points` | comma list of coordinates, used for both `x` and `y` | 0.1,…,0.5 |
//! | `quad_tol` | quadrature tolerance | 1e-8 |
//!
//! The `r2002` preset changes `name`, `r` (2.002), `N` (100) and `solver`
//! (`banded`: near criticality the sweep needs ~8e4 iterations). The `preset`
//! key is applied first regardless of where it appears.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::metrics::{compare, fit_log_linear, rqe, ComparisonReport, LinearFit};
use crate::error::{Error, Result};
use crate::greens::{self, GreensComparison};
use crate::grid::{solve_grid, GridSolution, SolveMethod, SolveOptions};
use crate::io::fmt_g12;
use crate::model::ModelParams;
use crate::montecarlo::{self, McEstimate};

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub name: String,
    pub r: f64,
    pub d: f64,
    pub grid_n: usize,
    pub paths: u64,
    pub horizon: u64,
    pub seed: u64,
    pub run_grid: bool,
    pub run_mc: bool,
    pub run_greens: bool,
    pub solver: SolveMethod,
    pub tol: f64,
    pub convergence_min: usize,
    pub convergence_max: usize,
    pub reference_n: usize,
    pub rqe_lattice: usize,
    pub greens_points: Vec<f64>,
    pub quad_tol: f64,
}

impl ExperimentSpec {
    /// First experiment: `r = 3`, `d = 2`, `N = 50`.
    pub fn preset_r3() -> Self {
        Self {
            name: "r3".into(),
            r: 3.0,
            d: 2.0,
            grid_n: 50,
            paths: montecarlo::DEFAULT_PATHS,
            horizon: montecarlo::DEFAULT_HORIZON,
            seed: 20110,
            run_grid: true,
            run_mc: true,
            run_greens: true,
            solver: SolveMethod::IterativeSweep,
            tol: 1e-12,
            convergence_min: 10,
            convergence_max: 50,
            reference_n: 50,
            rqe_lattice: 10,
            greens_points: vec![0.1, 0.2, 0.3, 0.4, 0.5],
            quad_tol: 1e-8,
        }
    }

    /// Second, near-critical experiment: `r = 2.002`, `d = 2`, `N = 100`.
    pub fn preset_r2002() -> Self {
        Self {
            name: "r2002".into(),
            r: 2.002,
            grid_n: 100,
            solver: SolveMethod::DirectBanded,
            ..Self::preset_r3()
        }
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "r3" => Ok(Self::preset_r3()),
            "r2002" => Ok(Self::preset_r2002()),
            other => Err(Error::InvalidArgument(format!(
                "unknown preset '{other}' (expected r3 or r2002)"
            ))),
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        let mut preset = None;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::InvalidArgument(format!("line {}: expected key = value", lineno + 1))
            })?;
            let (key, value) = (key.trim(), value.trim());
            if key == "preset" {
                preset = Some(value.to_string());
            } else if entries.insert(key.to_string(), value.to_string()).is_some() {
                return Err(Error::InvalidArgument(format!("duplicate key '{key}'")));
            }
        }
        let mut spec = match preset {
            Some(p) => Self::preset(&p)?,
            None => Self::preset_r3(),
        };
        for (key, value) in &entries {
            spec.set(key, value)?;
        }
        spec.validate()?;
        Ok(spec)
    }

    /// Override one key, with the same syntax as the config file.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
            value
                .parse()
                .map_err(|_| Error::InvalidArgument(format!("bad value '{value}' for '{key}'")))
        }
        match key {
            "name" => self.name = value.to_string(),
            "r" => self.r = num(key, value)?,
            "d" => self.d = num(key, value)?,
            "N" => self.grid_n = num(key, value)?,
            "M" => self.paths = num(key, value)?,
            "T" => self.horizon = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            "methods" => {
                self.run_grid = false;
                self.run_mc = false;
                self.run_greens = false;
                for m in value.split(',').map(str::trim).filter(|m| !m.is_empty()) {
                    match m {
                        "grid" => self.run_grid = true,
                        "mc" => self.run_mc = true,
                        "greens" => self.run_greens = true,
                        other => {
                            return Err(Error::InvalidArgument(format!("unknown method '{other}'")))
                        }
                    }
                }
            }
            "solver" => self.solver = value.parse()?,
            "tol" => self.tol = num(key, value)?,
            "convergence_min" => self.convergence_min = num(key, value)?,
            "convergence_max" => self.convergence_max = num(key, value)?,
            "reference_n" => self.reference_n = num(key, value)?,
            "rqe_lattice" => self.rqe_lattice = num(key, value)?,
            "greens_points" => {
                self.greens_points = value
                    .split(',')
                    .map(|v| num(key, v.trim()))
                    .collect::<Result<_>>()?
            }
            "quad_tol" => self.quad_tol = num(key, value)?,
            other => return Err(Error::InvalidArgument(format!("unknown key '{other}'"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        ModelParams::new(self.r, self.d)?;
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if self.grid_n < 2 {
            return bad(format!("N must be >= 2, got {}", self.grid_n));
        }
        if self.paths == 0 || self.horizon == 0 {
            return bad("M and T must be >= 1".into());
        }
        if self.rqe_lattice == 0 {
            return bad("rqe_lattice must be >= 1".into());
        }
        if self.convergence_min < self.rqe_lattice.max(2) || self.convergence_max < self.convergence_min {
            return bad(format!(
                "convergence range {}..={} must start at or above rqe_lattice = {}",
                self.convergence_min, self.convergence_max, self.rqe_lattice
            ));
        }
        if self.reference_n < self.rqe_lattice {
            return bad("reference_n must be >= rqe_lattice".into());
        }
        if self.run_mc && self.grid_n < self.rqe_lattice {
            return bad("N must be >= rqe_lattice when mc runs".into());
        }
        if self.greens_points.iter().any(|&x| !(x > 0.0 && x < 1.0)) {
            return bad("greens_points must lie in (0, 1)".into());
        }
        if (self.run_mc || self.run_greens) && !self.run_grid {
            return bad("mc and greens are compared against the grid; include grid in methods".into());
        }
        Ok(())
    }

    /// Canonical `key = value` rendering; parsing it gives back `self`.
    pub fn to_config(&self) -> String {
        let mut methods = Vec::new();
        for (on, name) in [(self.run_grid, "grid"), (self.run_mc, "mc"), (self.run_greens, "greens")] {
            if on {
                methods.push(name);
            }
        }
        let points: Vec<String> = self.greens_points.iter().map(|p| p.to_string()).collect();
        let mut s = String::new();
        let _ = writeln!(s, "name = {}", self.name);
        let _ = writeln!(s, "r = {}", self.r);
        let _ = writeln!(s, "d = {}", self.d);
        let _ = writeln!(s, "N = {}", self.grid_n);
        let _ = writeln!(s, "M = {}", self.paths);
        let _ = writeln!(s, "T = {}", self.horizon);
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "methods = {}", methods.join(","));
        let _ = writeln!(s, "solver = {}", self.solver);
        let _ = writeln!(s, "tol = {:e}", self.tol);
        let _ = writeln!(s, "convergence_min = {}", self.convergence_min);
        let _ = writeln!(s, "convergence_max = {}", self.convergence_max);
        let _ = writeln!(s, "reference_n = {}", self.reference_n);
        let _ = writeln!(s, "rqe_lattice = {}", self.rqe_lattice);
        let _ = writeln!(s, "greens_points = {}", points.join(","));
        let _ = writeln!(s, "quad_tol = {:e}", self.quad_tol);
        s
    }

    fn solve_options(&self) -> SolveOptions {
        SolveOptions {
            method: self.solver,
            tol: self.tol,
            ..SolveOptions::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceRow {
    pub n: usize,
    pub rqe_reference: (f64, f64),
    pub rqe_mc: Option<(f64, f64)>,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub spec: ExperimentSpec,
    pub grid: Option<GridSolution>,
    pub mc: Option<Vec<McEstimate>>,
    pub comparison: Option<ComparisonReport>,
    pub convergence: Vec<ConvergenceRow>,
    /// Fit of log rqe against `N` versus the deterministic reference,
    /// excluding `N = reference_n`.
    pub fit_reference: Option<LinearFit>,
    pub fit_mc: Option<LinearFit>,
    pub greens: Vec<GreensComparison>,
    pub files: Vec<PathBuf>,
}

fn context(spec: &ExperimentSpec, what: &str, e: Error) -> Error {
    Error::InvalidArgument(format!("experiment '{}', {what}: {e}", spec.name))
}

/// Run the computations of `spec` without writing anything.
pub fn compute_experiment(spec: &ExperimentSpec) -> Result<ExperimentOutcome> {
    spec.validate()?;
    let params = ModelParams::new(spec.r, spec.d)?;
    let options = spec.solve_options();
    let mut out = ExperimentOutcome {
        spec: spec.clone(),
        grid: None,
        mc: None,
        comparison: None,
        convergence: Vec::new(),
        fit_reference: None,
        fit_mc: None,
        greens: Vec::new(),
        files: Vec::new(),
    };
    if !spec.run_grid {
        return Ok(out);
    }

    let grid = solve_grid(&params, spec.grid_n, &options).map_err(|e| context(spec, "grid", e))?;

    let mc_field = if spec.run_mc {
        let est = montecarlo::estimate_lattice(&params, spec.grid_n, spec.paths, spec.horizon, spec.seed)
            .map_err(|e| context(spec, "monte carlo", e))?;
        let field = montecarlo::lattice_field(&est)?;
        out.comparison = Some(compare(&field, &grid.values, spec.grid_n)?);
        out.mc = Some(est);
        Some(field)
    } else {
        None
    };

    let sizes: Vec<usize> = (spec.convergence_min..=spec.convergence_max).collect();
    let mut needed = sizes.clone();
    if !needed.contains(&spec.reference_n) {
        needed.push(spec.reference_n);
    }
    let solved: Vec<GridSolution> = needed
        .par_iter()
        .filter(|&&n| n != spec.grid_n)
        .map(|&n| solve_grid(&params, n, &options))
        .collect::<Result<_>>()
        .map_err(|e| context(spec, "convergence series", e))?;
    let lookup = |n: usize| -> &GridSolution {
        if n == spec.grid_n {
            &grid
        } else {
            solved.iter().find(|s| s.n() == n).expect("solved above")
        }
    };
    let reference = &lookup(spec.reference_n).values;
    let m = spec.rqe_lattice;
    for &n in &sizes {
        let values = &lookup(n).values;
        out.convergence.push(ConvergenceRow {
            n,
            rqe_reference: rqe(values, reference, m),
            rqe_mc: mc_field.as_ref().map(|f| rqe(values, f, m)),
        });
    }
    let ref_points: Vec<(f64, f64)> = out
        .convergence
        .iter()
        .filter(|c| c.n != spec.reference_n)
        .map(|c| (c.n as f64, c.rqe_reference.0))
        .collect();
    out.fit_reference = fit_log_linear(&ref_points).ok();
    if mc_field.is_some() {
        let mc_points: Vec<(f64, f64)> = out
            .convergence
            .iter()
            .filter_map(|c| c.rqe_mc.map(|q| (c.n as f64, q.0)))
            .collect();
        out.fit_mc = fit_log_linear(&mc_points).ok();
    }

    if spec.run_greens {
        let pairs: Vec<(f64, f64)> = spec
            .greens_points
            .iter()
            .flat_map(|&x| spec.greens_points.iter().map(move |&y| (x, y)))
            .collect();
        out.greens = pairs
            .par_iter()
            .map(|&(x, y)| greens::compare_at(&grid, x, y, spec.quad_tol))
            .collect::<Result<_>>()
            .map_err(|e| context(spec, "greens", e))?;
    }
    out.grid = Some(grid);
    Ok(out)
}

/// Run `spec` and write its artifacts into `dir` (created if missing).
pub fn run_experiment(spec: &ExperimentSpec, dir: &Path) -> Result<ExperimentOutcome> {
    let mut out = compute_experiment(spec)?;
    fs::create_dir_all(dir)?;
    let mut files = Vec::new();
    let mut create = |name: &str| -> Result<BufWriter<File>> {
        let path = dir.join(name);
        files.push(path.clone());
        Ok(BufWriter::new(File::create(path)?))
    };

    create("spec.txt")?.write_all(spec.to_config().as_bytes())?;
    if let Some(grid) = &out.grid {
        grid.write_csv(create("grid.csv")?)?;
    }
    if let Some(mc) = &out.mc {
        montecarlo::write_csv(&mut create("mc.csv")?, mc)?;
    }
    if let Some(report) = &out.comparison {
        report.write_summary_csv(create("comparison.csv")?)?;
        report.write_cells_csv(create("comparison_cells.csv")?)?;
    }
    if !out.convergence.is_empty() {
        let mut w = create("convergence.csv")?;
        writeln!(w, "N,rqe_ref_by_grid,rqe_ref_by_ref,rqe_mc_by_grid,rqe_mc_by_mc")?;
        for c in &out.convergence {
            let (ma, mb) = c
                .rqe_mc
                .map(|(a, b)| (fmt_g12(a), fmt_g12(b)))
                .unwrap_or_default();
            writeln!(
                w,
                "{},{},{},{ma},{mb}",
                c.n,
                fmt_g12(c.rqe_reference.0),
                fmt_g12(c.rqe_reference.1)
            )?;
        }
        w.flush()?;

        let mut w = create("fit.csv")?;
        writeln!(w, "series,slope,intercept,r_squared,points")?;
        for (name, fit) in [("reference", out.fit_reference), ("mc", out.fit_mc)] {
            if let Some(f) = fit {
                writeln!(
                    w,
                    "{name},{},{},{},{}",
                    fmt_g12(f.slope),
                    fmt_g12(f.intercept),
                    fmt_g12(f.r_squared),
                    f.points
                )?;
            }
        }
        w.flush()?;
    }
    if !out.greens.is_empty() {
        greens::write_csv(create("greens.csv")?, &out.greens)?;
    }
    out.files = files;
    Ok(out)
}
