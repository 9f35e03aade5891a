//! Characteristic curves of the first-order operator
//! `Q(x,y) ∂x + Q(y,x) ∂y + R(x,y)` satisfied by the generating function.
//!
//! Everything here is closed form. Trajectories are evaluated in the
//! `kappa` form, which stays regular on the diagonal `x0 = y0`, and every
//! exponential is rescaled by `e^{-ds}` so that nothing overflows when
//! `r - d` is small and the critical times are large.
//!
//! With `v = (r - d)(s - s0)` the trajectory reads
//!
//! ```text
//! x_s = N(s) / Dx(s),  y_s = N(s) / Dy(s)
//! N(s)  = 1 - e^v
//! Dx(s) = 1 - (d/r) e^v + c e^{-ds}
//! Dy(s) = 1 - (d/r) e^v - c e^{-ds}
//! ```
//!
//! where `c = (1 - d/r)(y0 - x0) / (x0 + y0 - 2(d/r) x0 y0)`. The integrating
//! factor `exp(∫ R)` then equals
//! `Dx(0) Dy(0) N(0) e^{(r-2d)u} / (Dx(u) Dy(u) N(u))`.

use crate::error::{Error, Result};
use crate::model::ModelParams;

/// `Q(x, y) = (r+d)x - r/2 - (r/2)(x/y) - d x^2`.
pub fn q_coeff(params: &ModelParams, x: f64, y: f64) -> Result<f64> {
    if y == 0.0 {
        return Err(Error::InvalidArgument("Q(x, y) is undefined at y = 0".into()));
    }
    let (r, d) = (params.r(), params.d());
    Ok((r + d) * x - r / 2.0 - r / 2.0 * (x / y) - d * x * x)
}

/// `R(x, y) = r/(2x) + r/(2y) - d x - d y`.
pub fn r_coeff(params: &ModelParams, x: f64, y: f64) -> Result<f64> {
    if x == 0.0 || y == 0.0 {
        return Err(Error::InvalidArgument("R(x, y) is undefined on the axes".into()));
    }
    let (r, d) = (params.r(), params.d());
    Ok(r / (2.0 * x) + r / (2.0 * y) - d * x - d * y)
}

/// Relative threshold below which a scaled denominator counts as zero.
const SINGULAR_EPS: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq)]
pub struct CharacteristicPath {
    params: ModelParams,
    pub x0: f64,
    pub y0: f64,
    /// `-λr/(μd) = (x0+y0-2x0y0)/(x0+y0-2(d/r)x0y0)`, in `(0, 1)`.
    pub kappa: f64,
    /// `1/μ = (1-d/r)(y0-x0)/(x0+y0-2(d/r)x0y0)`.
    pub inv_mu: f64,
    /// Integration constants; undefined on the diagonal.
    pub lambda: Option<f64>,
    pub mu: Option<f64>,
    /// Time at which the path reaches the origin.
    pub s0: f64,
    /// `(s_plus, s_minus)` when requested through [`CharacteristicPath::with_critical_times`].
    pub critical: Option<(f64, f64)>,
}

pub fn make_path(params: &ModelParams, x0: f64, y0: f64) -> Result<CharacteristicPath> {
    let inside = |v: f64| v > 0.0 && v < 1.0;
    if !inside(x0) || !inside(y0) {
        return Err(Error::InvalidArgument(format!(
            "start point ({x0}, {y0}) must lie in the open unit square"
        )));
    }
    let (r, d) = (params.r(), params.d());
    let rho = params.ratio();
    let denom = x0 + y0 - 2.0 * rho * x0 * y0;
    let kappa = (x0 + y0 - 2.0 * x0 * y0) / denom;
    let inv_mu = (1.0 - rho) * (y0 - x0) / denom;
    let (lambda, mu) = if x0 != y0 {
        let scale = (y0 - x0) * (r - d);
        (
            Some((2.0 * d * x0 * y0 - d * (x0 + y0)) / scale),
            Some((r * (x0 + y0) - 2.0 * d * x0 * y0) / scale),
        )
    } else {
        (None, None)
    };
    let s0 = kappa.ln() / (d - r);
    Ok(CharacteristicPath {
        params: *params,
        x0,
        y0,
        kappa,
        inv_mu,
        lambda,
        mu,
        s0,
        critical: None,
    })
}

impl CharacteristicPath {
    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn with_critical_times(mut self) -> Result<Self> {
        self.critical = Some(critical_times(&self)?);
        Ok(self)
    }

    /// `(N, Dx, Dy)` at time `s`, all rescaled by `e^{-ds}`.
    #[inline]
    fn parts(&self, s: f64) -> (f64, f64, f64) {
        let (r, d) = (self.params.r(), self.params.d());
        let v = (r - d) * (s - self.s0);
        let numer = -v.exp_m1();
        let common = 1.0 - self.params.ratio() * v.exp();
        let shift = self.inv_mu * (-d * s).exp();
        (numer, common + shift, common - shift)
    }

    /// `(x_s, y_s)` without singularity checks; callers stay on `[0, s0]`.
    #[inline]
    pub fn point(&self, s: f64) -> (f64, f64) {
        let (n, dx, dy) = self.parts(s);
        (n / dx, n / dy)
    }

    /// Logarithm of the integrating factor `exp(∫_0^u R(x_a, y_a) da)`.
    pub fn log_integrating_factor(&self, u: f64) -> f64 {
        let (r, d) = (self.params.r(), self.params.d());
        let (n0, dx0, dy0) = self.parts(0.0);
        let (n, dx, dy) = self.parts(u);
        (n0 * dx0 * dy0).ln() - (n * dx * dy).ln() + (r - 2.0 * d) * u
    }

    /// `exp(∫_0^u R) · N(u)`: the integrating factor with its simple pole at
    /// `s0` removed. Finite and positive on the closed interval `[0, s0]`;
    /// `x_u · IF(u) = reduced / Dx(u)` and `y_u · IF(u) = reduced / Dy(u)`.
    #[inline]
    pub fn reduced_factor(&self, u: f64) -> f64 {
        let (r, d) = (self.params.r(), self.params.d());
        let (n0, dx0, dy0) = self.parts(0.0);
        let (_, dx, dy) = self.parts(u);
        n0 * dx0 * dy0 * ((r - 2.0 * d) * u).exp() / (dx * dy)
    }

    /// `(x_u IF(u), y_u IF(u))`, regular up to and including `u = s0`.
    #[inline]
    pub fn weighted_point(&self, u: f64) -> (f64, f64) {
        let (_, dx, dy) = self.parts(u);
        let j = self.reduced_factor(u);
        (j / dx, j / dy)
    }
}

/// Trajectory through the start point at time `s`.
pub fn eval_path(path: &CharacteristicPath, s: f64) -> Result<(f64, f64)> {
    let (n, dx, dy) = path.parts(s);
    if dx.abs() < SINGULAR_EPS {
        return Err(Error::Singular { s, which: "s_plus" });
    }
    if dy.abs() < SINGULAR_EPS {
        return Err(Error::Singular { s, which: "s_minus" });
    }
    Ok((n / dx, n / dy))
}

/// Roots in `(s0, ∞)` of the two denominators: `s_plus` for `x`, `s_minus`
/// for `y`. Bisection on `[s0, s0 + 50/(r-d)]` to 1e-12, then Newton polish.
pub fn critical_times(path: &CharacteristicPath) -> Result<(f64, f64)> {
    let (r, d) = (path.params.r(), path.params.d());
    let lo = path.s0;
    let hi = path.s0 + 50.0 / (r - d);
    let plus = find_root(|s| path.parts(s).1, lo, hi, d, path, 1.0)?;
    let minus = find_root(|s| path.parts(s).2, lo, hi, d, path, -1.0)?;
    Ok((plus, minus))
}

fn find_root(
    f: impl Fn(f64) -> f64,
    mut lo: f64,
    mut hi: f64,
    d: f64,
    path: &CharacteristicPath,
    sign: f64,
) -> Result<f64> {
    let (flo, fhi) = (f(lo), f(hi));
    if !(flo > 0.0 && fhi < 0.0) {
        return Err(Error::NotConverged {
            method: "critical time bracketing",
            iterations: 0,
            residual: flo.min(fhi.abs()),
        });
    }
    let mut iterations = 0;
    while hi - lo > 1e-12 * hi.max(1.0) && iterations < 400 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        iterations += 1;
    }
    let mut s = 0.5 * (lo + hi);
    let (r, _) = (path.params.r(), d);
    for _ in 0..3 {
        let v = (r - d) * (s - path.s0);
        let deriv = -path.params.ratio() * (r - d) * v.exp() - sign * d * path.inv_mu * (-d * s).exp();
        if deriv == 0.0 {
            break;
        }
        let next = s - f(s) / deriv;
        if !(next > lo - 1e-9 && next < hi + 1e-9) {
            break;
        }
        s = next;
    }
    Ok(s)
}

/// `exp(∫_0^u R(x_a, y_a) da)` for `u ∈ [0, s0)`.
pub fn integrating_factor(path: &CharacteristicPath, u: f64) -> Result<f64> {
    if !(u >= 0.0 && u < path.s0) {
        return Err(Error::InvalidArgument(format!(
            "integrating factor needs u in [0, s0={}), got {u}",
            path.s0
        )));
    }
    Ok(path.log_integrating_factor(u).exp())
}

/// One sample of a trajectory for phase-portrait output.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathSample {
    pub s: f64,
    pub x: f64,
    pub y: f64,
    pub integrating_factor: f64,
}

/// `count` evenly spaced samples on `[0, s0)`.
pub fn sample_path(path: &CharacteristicPath, count: usize) -> Result<Vec<PathSample>> {
    (0..count)
        .map(|k| {
            let s = path.s0 * k as f64 / count as f64;
            let (x, y) = eval_path(path, s)?;
            Ok(PathSample {
                s,
                x,
                y,
                integrating_factor: integrating_factor(path, s)?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p32() -> ModelParams {
        ModelParams::new(3.0, 2.0).unwrap()
    }

    #[test]
    fn stationary_points_zero_q() {
        let p = p32();
        assert!(q_coeff(&p, 1.0, 1.0).unwrap().abs() < 1e-15);
        assert!(q_coeff(&p, 1.5, 1.5).unwrap().abs() < 1e-12);
        assert!((r_coeff(&p, 1.0, 1.0).unwrap() + 1.0).abs() < 1e-15);
        assert!(q_coeff(&p, 0.5, 0.0).is_err());
        assert!(r_coeff(&p, 0.0, 0.5).is_err());
    }

    #[test]
    fn diagonal_start_example() {
        let path = make_path(&p32(), 0.5, 0.5).unwrap();
        assert!((path.kappa - 0.75).abs() < 1e-15);
        assert!((path.s0 - 0.287_682_072_451_781).abs() < 1e-12);
        assert!(path.lambda.is_none());
        for k in 0..=10 {
            let s = path.s0 * k as f64 / 10.0;
            let (x, y) = eval_path(&path, s).unwrap();
            assert_eq!(x, y);
        }
    }

    #[test]
    fn start_and_end_points() {
        let path = make_path(&p32(), 0.2, 0.7).unwrap();
        let (x, y) = eval_path(&path, 0.0).unwrap();
        assert!((x - 0.2).abs() < 1e-15 && (y - 0.7).abs() < 1e-15);
        let (x, y) = eval_path(&path, path.s0).unwrap();
        assert!(x.abs() < 1e-12 && y.abs() < 1e-12);
    }

    #[test]
    fn swapping_start_swaps_coordinates() {
        let a = make_path(&p32(), 0.3, 0.8).unwrap();
        let b = make_path(&p32(), 0.8, 0.3).unwrap();
        assert_eq!(a.s0, b.s0);
        for k in 0..10 {
            let s = a.s0 * k as f64 / 10.0;
            let (xa, ya) = eval_path(&a, s).unwrap();
            let (xb, yb) = eval_path(&b, s).unwrap();
            assert!((xa - yb).abs() < 1e-14 && (ya - xb).abs() < 1e-14);
        }
    }

    #[test]
    fn lambda_mu_identities() {
        let p = p32();
        let path = make_path(&p, 0.3, 0.6).unwrap();
        let (l, m) = (path.lambda.unwrap(), path.mu.unwrap());
        assert!((l + m - 0.9 / 0.3).abs() < 1e-13);
        assert!((-l * p.r() / (m * p.d()) - path.kappa).abs() < 1e-14);
        assert!((1.0 / m - path.inv_mu).abs() < 1e-14);
        // the lambda/mu form at s = 0 reproduces the start point
        let x = (l * p.r() + m * p.d()) / (p.d() * (l + m + 1.0));
        let y = (l * p.r() + m * p.d()) / (p.d() * (l + m - 1.0));
        assert!((x - 0.3).abs() < 1e-14 && (y - 0.6).abs() < 1e-14);
    }

    #[test]
    fn rejects_start_outside_unit_square() {
        assert!(make_path(&p32(), 0.0, 0.5).is_err());
        assert!(make_path(&p32(), 0.5, 1.0).is_err());
        assert!(make_path(&p32(), -0.1, 0.5).is_err());
    }

    #[test]
    fn critical_time_ordering() {
        let p = p32();
        let path = make_path(&p, 0.6, 0.2).unwrap();
        let (sp, sm) = critical_times(&path).unwrap();
        assert!(sp < sm);
        assert!(sp > path.s0 && sm > path.s0);
        let path = make_path(&p, 0.2, 0.6).unwrap();
        let (sp, sm) = critical_times(&path).unwrap();
        assert!(sp > sm);
        let path = make_path(&p, 0.4, 0.4).unwrap();
        let (sp, sm) = critical_times(&path).unwrap();
        assert!((sp - sm).abs() < 1e-12);
    }

    #[test]
    fn eval_reports_singular_denominator() {
        let path = make_path(&p32(), 0.6, 0.2).unwrap().with_critical_times().unwrap();
        let (sp, _) = path.critical.unwrap();
        match eval_path(&path, sp) {
            Err(Error::Singular { which, .. }) => assert_eq!(which, "s_plus"),
            other => panic!("expected singular, got {other:?}"),
        }
        let (x, _) = eval_path(&path, sp - 1e-6).unwrap();
        assert!(x < -1e3);
    }

    #[test]
    fn critical_times_for_near_critical_rates() {
        let p = ModelParams::new(2.002, 2.0).unwrap();
        let path = make_path(&p, 0.5, 0.3).unwrap();
        let (sp, sm) = critical_times(&path).unwrap();
        assert!(sp.is_finite() && sm.is_finite() && sp > path.s0 && sm > path.s0);
    }

    #[test]
    fn integrating_factor_starts_at_one() {
        let path = make_path(&p32(), 0.35, 0.15).unwrap();
        assert!((integrating_factor(&path, 0.0).unwrap() - 1.0).abs() < 1e-14);
        assert!(integrating_factor(&path, path.s0).is_err());
        assert!(integrating_factor(&path, -0.1).is_err());
    }

    #[test]
    fn weighted_point_has_finite_limit_at_s0() {
        let path = make_path(&p32(), 0.4, 0.3).unwrap();
        let (wx, wy) = path.weighted_point(path.s0);
        assert!(wx.is_finite() && wx > 0.0 && wy.is_finite() && wy > 0.0);
        // direct product approaches the same limit from inside
        let u = path.s0 * (1.0 - 1e-7);
        let (x, _) = eval_path(&path, u).unwrap();
        let direct = x * integrating_factor(&path, u).unwrap();
        assert!((direct - wx).abs() < 1e-5 * wx);
        // x^2 IF vanishes
        assert!((x * direct).abs() < 1e-6);
    }
}
