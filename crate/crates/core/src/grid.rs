//! Deterministic solution of the Dirichlet problem on the truncated grid
//! `{1..N}^2`.
//!
//! The unknowns `p_{i,j}` are stacked i-major. Values on the axes are 1; the
//! values just outside the grid (`p_{i,N+1}` and `p_{N+1,j}`) come from a
//! [`Closure`]. Three solvers are offered: in-place Gauss–Seidel sweeps of the
//! kernel, a banded LU factorisation of the assembled five-diagonal matrix,
//! and plain value iteration from zero, which increases monotonically to the
//! minimal solution of the truncated problem.

use std::fmt;
use std::io::Write;

use crate::asymptotics::closure_estimate;
use crate::error::{Error, Result};
use crate::field::Field;
use crate::io::fmt_g12;
use crate::model::{prop2_bounds, ModelParams, State};

/// Rule used to fill the values just outside the truncated grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ClosurePolicy {
    /// Large-`j` expansions (two-term on the first row, general leading term
    /// elsewhere), clamped into the a-priori bracket.
    Asymptotic,
    LowerBound,
    UpperBound,
    Constant(f64),
}

impl fmt::Display for ClosurePolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ClosurePolicy::Asymptotic => {
                write!(f, "asymptotic (two-term for index 1, general leading term otherwise; clamped to bounds)")
            }
            ClosurePolicy::LowerBound => write!(f, "lower bound (d/r)^(i+j)"),
            ClosurePolicy::UpperBound => write!(f, "upper bound (d/r)^i+(d/r)^j-(d/r)^(i+j)"),
            ClosurePolicy::Constant(c) => write!(f, "constant {c}"),
        }
    }
}

/// Values `p_{i,N+1}` (`top[i-1]`) and `p_{N+1,j}` (`side[j-1]`).
#[derive(Debug, Clone, PartialEq)]
pub struct Closure {
    n: usize,
    top: Vec<f64>,
    side: Vec<f64>,
    policy: Option<ClosurePolicy>,
}

impl Closure {
    pub fn build(params: &ModelParams, n: usize, policy: ClosurePolicy) -> Result<Self> {
        let outer = (n + 1) as u32;
        let value = |k: usize| -> Result<f64> {
            let s = State::new(k as u32, outer);
            Ok(match policy {
                ClosurePolicy::Asymptotic => closure_estimate(params, s.i, s.j)?,
                ClosurePolicy::LowerBound => prop2_bounds(params, s).0,
                ClosurePolicy::UpperBound => prop2_bounds(params, s).1,
                ClosurePolicy::Constant(c) => c,
            })
        };
        let top = (1..=n).map(value).collect::<Result<Vec<_>>>()?;
        // every policy is symmetric
        let side = top.clone();
        Ok(Self {
            n,
            top,
            side,
            policy: Some(policy),
        })
    }

    pub fn from_values(top: Vec<f64>, side: Vec<f64>) -> Result<Self> {
        if top.len() != side.len() {
            return Err(Error::InvalidArgument(
                "closure rows must have equal length".into(),
            ));
        }
        Ok(Self {
            n: top.len(),
            top,
            side,
            policy: None,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn policy(&self) -> Option<ClosurePolicy> {
        self.policy
    }

    /// `p_{i,N+1}`.
    pub fn top(&self, i: usize) -> f64 {
        self.top[i - 1]
    }

    /// `p_{N+1,j}`.
    pub fn side(&self, j: usize) -> f64 {
        self.side[j - 1]
    }

    pub fn asymmetry(&self) -> f64 {
        self.top
            .iter()
            .zip(&self.side)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn describe(&self) -> String {
        match self.policy {
            Some(p) => p.to_string(),
            None => "user supplied".to_string(),
        }
    }
}

/// Value of the extended field at `(i, j)` with `0 <= i, j <= N+1`.
#[inline]
fn extended(field: &Field, closure: &Closure, i: usize, j: usize) -> f64 {
    let n = field.n();
    if i == 0 || j == 0 {
        1.0
    } else if j == n + 1 {
        closure.top(i)
    } else if i == n + 1 {
        closure.side(j)
    } else {
        field.get(i, j)
    }
}

/// Precomputed transition weights for repeated sweeps.
struct Kernel {
    birth: f64,
    death: f64,
}

impl Kernel {
    fn new(params: &ModelParams) -> Self {
        Self {
            birth: params.birth_prob(),
            death: params.death_weight(),
        }
    }

    #[inline]
    fn apply(&self, field: &Field, closure: &Closure, i: usize, j: usize) -> f64 {
        let w = self.death / (i + j) as f64;
        w * (i as f64) * extended(field, closure, i - 1, j)
            + w * (j as f64) * extended(field, closure, i, j - 1)
            + self.birth
                * (extended(field, closure, i, j + 1) + extended(field, closure, i + 1, j))
    }
}

/// One application of the transition kernel at `(i, j)`: the expected value
/// of the field after one step, with 1 on the axes and the closure beyond N.
pub fn apply_kernel(
    params: &ModelParams,
    field: &Field,
    closure: &Closure,
    i: usize,
    j: usize,
) -> Result<f64> {
    let n = field.n();
    if i == 0 || j == 0 || i > n || j > n {
        return Err(Error::OutOfRange { i, j, n });
    }
    if closure.n() != n {
        return Err(Error::InvalidArgument(format!(
            "closure of size {} does not match field of size {n}",
            closure.n()
        )));
    }
    Ok(Kernel::new(params).apply(field, closure, i, j))
}

/// Sparse `N^2 x N^2` system `T p = b` in compressed-row form.
#[derive(Debug, Clone)]
pub struct LinearSystem {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
    rhs: Vec<f64>,
}

impl LinearSystem {
    pub fn grid_size(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.n * self.n
    }

    pub fn rhs(&self) -> &[f64] {
        &self.rhs
    }

    /// Stacked position of `(i, j)`.
    pub fn position(&self, i: usize, j: usize) -> usize {
        (i - 1) * self.n + (j - 1)
    }

    pub fn row(&self, k: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_ptr[k]..self.row_ptr[k + 1];
        self.cols[range.clone()]
            .iter()
            .copied()
            .zip(self.vals[range].iter().copied())
    }

    pub fn entry(&self, row: usize, col: usize) -> f64 {
        self.row(row)
            .filter(|&(c, _)| c == col)
            .map(|(_, v)| v)
            .sum()
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn multiply(&self, x: &[f64]) -> Vec<f64> {
        (0..self.dim())
            .map(|k| self.row(k).map(|(c, v)| v * x[c]).sum())
            .collect()
    }

    /// `max_k |(T x - b)_k|`.
    pub fn residual(&self, x: &[f64]) -> f64 {
        (0..self.dim())
            .map(|k| {
                let tx: f64 = self.row(k).map(|(c, v)| v * x[c]).sum();
                (tx - self.rhs[k]).abs()
            })
            .fold(0.0, f64::max)
    }
}

/// Assemble the five-diagonal matrix and right-hand side. Diagonal entries
/// are −1; boundary values and closure terms are moved to the right-hand
/// side with a minus sign.
pub fn assemble_system(params: &ModelParams, n: usize, closure: &Closure) -> Result<LinearSystem> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!("grid size must be >= 2, got {n}")));
    }
    if closure.n() != n {
        return Err(Error::InvalidArgument(format!(
            "closure of size {} does not match grid size {n}",
            closure.n()
        )));
    }
    let birth = params.birth_prob();
    let death = params.death_weight();
    let pos = |i: usize, j: usize| (i - 1) * n + (j - 1);

    let mut row_ptr = Vec::with_capacity(n * n + 1);
    let mut cols = Vec::with_capacity(5 * n * n);
    let mut vals = Vec::with_capacity(5 * n * n);
    let mut rhs = Vec::with_capacity(n * n);
    row_ptr.push(0);

    for i in 1..=n {
        for j in 1..=n {
            let w = death / (i + j) as f64;
            let mut b = 0.0;
            // (i-1, j): block B_{i,i-1}, or the axis i = 0
            if i > 1 {
                cols.push(pos(i - 1, j));
                vals.push(w * i as f64);
            } else {
                b -= w * i as f64;
            }
            // (i, j-1): sub-diagonal of A_i, or the axis j = 0
            if j > 1 {
                cols.push(pos(i, j - 1));
                vals.push(w * j as f64);
            } else {
                b -= w * j as f64;
            }
            cols.push(pos(i, j));
            vals.push(-1.0);
            // (i, j+1): super-diagonal of A_i, or the closure
            if j < n {
                cols.push(pos(i, j + 1));
                vals.push(birth);
            } else {
                b -= birth * closure.top(i);
            }
            // (i+1, j): block D, or the closure
            if i < n {
                cols.push(pos(i + 1, j));
                vals.push(birth);
            } else {
                b -= birth * closure.side(j);
            }
            rhs.push(b);
            row_ptr.push(cols.len());
        }
    }
    Ok(LinearSystem {
        n,
        row_ptr,
        cols,
        vals,
        rhs,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveMethod {
    IterativeSweep,
    DirectBanded,
    ValueIteration,
}

impl std::str::FromStr for SolveMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sweep" | "iterative" | "gauss-seidel" => Ok(SolveMethod::IterativeSweep),
            "banded" | "direct" => Ok(SolveMethod::DirectBanded),
            "value-iteration" | "vi" => Ok(SolveMethod::ValueIteration),
            other => Err(Error::InvalidArgument(format!("unknown solve method '{other}'"))),
        }
    }
}

impl fmt::Display for SolveMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SolveMethod::IterativeSweep => "sweep",
            SolveMethod::DirectBanded => "banded",
            SolveMethod::ValueIteration => "value-iteration",
        })
    }
}

/// Largest grid accepted by the banded LU solver.
pub const MAX_BANDED_N: usize = 120;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    pub method: SolveMethod,
    pub tol: f64,
    pub max_iter: usize,
    pub closure: ClosurePolicy,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            method: SolveMethod::IterativeSweep,
            tol: 1e-12,
            max_iter: 2_000_000,
            closure: ClosurePolicy::Asymptotic,
        }
    }
}

impl SolveOptions {
    pub fn with_method(method: SolveMethod) -> Self {
        Self {
            method,
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::InvalidArgument(format!("tol must be > 0, got {}", self.tol)));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidArgument("max_iter must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct GridSolution {
    pub params: ModelParams,
    pub values: Field,
    pub closure: Closure,
    pub method: SolveMethod,
    /// Sup norm of `T p - b` at the returned field.
    pub residual: f64,
    pub iterations: usize,
}

impl GridSolution {
    pub fn n(&self) -> usize {
        self.values.n()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values.get(i, j)
    }

    /// Tolerance on `|p_{i,j} - p_{j,i}|` implied by the solver tolerance
    /// and the closure asymmetry.
    pub fn symmetry_tolerance(&self) -> f64 {
        1e-9f64.max(10.0 * self.closure.asymmetry())
    }

    /// Export as CSV with header `i,j,p`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "i,j,p")?;
        for (i, j, p) in self.values.iter() {
            writeln!(w, "{i},{j},{}", fmt_g12(p))?;
        }
        Ok(())
    }
}

pub fn solve_grid(params: &ModelParams, n: usize, options: &SolveOptions) -> Result<GridSolution> {
    let closure = Closure::build(params, n, options.closure)?;
    solve_with_closure(params, closure, options)
}

pub fn solve_with_closure(
    params: &ModelParams,
    closure: Closure,
    options: &SolveOptions,
) -> Result<GridSolution> {
    options.validate()?;
    let n = closure.n();
    let system = assemble_system(params, n, &closure)?;
    let (values, iterations) = match options.method {
        SolveMethod::IterativeSweep => iterate(params, &closure, &system, options, true)?,
        SolveMethod::ValueIteration => iterate(params, &closure, &system, options, false)?,
        SolveMethod::DirectBanded => (banded_solve(&system)?, 1),
    };
    let residual = system.residual(values.as_slice());
    if options.method == SolveMethod::DirectBanded && !(residual <= options.tol) {
        return Err(Error::NotConverged {
            method: "banded LU",
            iterations: 1,
            residual,
        });
    }
    Ok(GridSolution {
        params: *params,
        values,
        closure,
        method: options.method,
        residual,
        iterations,
    })
}

/// Fixed-point iteration from the zero field, either in place (Gauss–Seidel
/// order) or synchronous (value iteration). Both are monotone nondecreasing.
///
/// Stops once the sup-norm update, inflated by the observed contraction
/// `q / (1 - q)`, and the linear residual are both below `tol`.
fn iterate(
    params: &ModelParams,
    closure: &Closure,
    system: &LinearSystem,
    options: &SolveOptions,
    in_place: bool,
) -> Result<(Field, usize)> {
    let n = closure.n();
    let kernel = Kernel::new(params);
    let mut field = Field::zeros(n);
    let mut scratch = Field::zeros(n);
    let mut prev_update = f64::INFINITY;
    let mut last_residual = f64::INFINITY;

    for iter in 1..=options.max_iter {
        let mut update = 0.0f64;
        if in_place {
            for i in 1..=n {
                for j in 1..=n {
                    let v = kernel.apply(&field, closure, i, j);
                    update = update.max((v - field.get(i, j)).abs());
                    field.set(i, j, v);
                }
            }
        } else {
            for i in 1..=n {
                for j in 1..=n {
                    let v = kernel.apply(&field, closure, i, j);
                    update = update.max((v - field.get(i, j)).abs());
                    scratch.set(i, j, v);
                }
            }
            std::mem::swap(&mut field, &mut scratch);
        }

        let q = update / prev_update;
        prev_update = update;
        let error_estimate = if update == 0.0 {
            0.0
        } else if q < 1.0 {
            update * q / (1.0 - q)
        } else {
            f64::INFINITY
        };
        if update <= options.tol && error_estimate <= options.tol {
            last_residual = system.residual(field.as_slice());
            if last_residual <= options.tol {
                return Ok((field, iter));
            }
        }
    }
    if !last_residual.is_finite() {
        last_residual = system.residual(field.as_slice());
    }
    Err(Error::NotConverged {
        method: if in_place { "sweep" } else { "value iteration" },
        iterations: options.max_iter,
        residual: last_residual,
    })
}

/// LU without pivoting on the band of half-width N. The matrix is weakly
/// diagonally dominant by rows with strict dominance on boundary rows, so no
/// pivoting is needed.
fn banded_solve(system: &LinearSystem) -> Result<Field> {
    let n = system.grid_size();
    if n > MAX_BANDED_N {
        return Err(Error::InvalidArgument(format!(
            "banded solver limited to N <= {MAX_BANDED_N}, got {n}"
        )));
    }
    let dim = system.dim();
    let bw = n;
    let width = 2 * bw + 1;
    let mut band = vec![0.0f64; dim * width];
    let at = |r: usize, c: usize| r * width + (c + bw - r);
    for r in 0..dim {
        for (c, v) in system.row(r) {
            band[at(r, c)] += v;
        }
    }
    let mut x = system.rhs().to_vec();

    for k in 0..dim {
        let pivot = band[at(k, k)];
        if pivot.abs() < 1e-300 {
            return Err(Error::InvalidArgument(format!("zero pivot at row {k}")));
        }
        let last = (k + bw).min(dim - 1);
        for r in (k + 1)..=last {
            let l = band[at(r, k)] / pivot;
            if l == 0.0 {
                continue;
            }
            band[at(r, k)] = l;
            for c in (k + 1)..=last {
                band[at(r, c)] -= l * band[at(k, c)];
            }
            x[r] -= l * x[k];
        }
    }
    for k in (0..dim).rev() {
        let last = (k + bw).min(dim - 1);
        let mut s = x[k];
        for c in (k + 1)..=last {
            s -= band[at(k, c)] * x[c];
        }
        x[k] = s / band[at(k, k)];
    }
    Field::from_vec(n, x)
}

/// Maximum defect of the column recursion
/// `p_{i,j+1} = 2(r+d)/r p_{i,j} - 2di/(r(i+j)) p_{i-1,j} - 2dj/(r(i+j)) p_{i,j-1} - p_{i+1,j}`
/// over all targets `(i, j+1)` inside the grid. The recursion amplifies
/// errors by `2(r+d)/r` per step, so this is a diagnostic, not a solver.
pub fn column_recursion_check(solution: &GridSolution) -> f64 {
    let (r, d) = (solution.params.r(), solution.params.d());
    let field = &solution.values;
    let closure = &solution.closure;
    let n = field.n();
    let mut worst = 0.0f64;
    for i in 1..=n {
        for j in 1..n {
            let s = (i + j) as f64;
            let predicted = 2.0 * (r + d) / r * field.get(i, j)
                - 2.0 * d * i as f64 / (r * s) * extended(field, closure, i - 1, j)
                - 2.0 * d * j as f64 / (r * s) * extended(field, closure, i, j - 1)
                - extended(field, closure, i + 1, j);
            worst = worst.max((predicted - field.get(i, j + 1)).abs());
        }
    }
    worst
}
