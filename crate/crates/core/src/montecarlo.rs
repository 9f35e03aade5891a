//! Monte Carlo estimation of `P[τ₀ ≤ T]`.
//!
//! Each path gets its own ChaCha8 stream: the generator is seeded from the
//! experiment seed and the stream number is the path index, so an estimate
//! does not depend on how rayon schedules the paths. Paths still alive at
//! the horizon are counted as surviving, so `p_hat` targets the censored
//! probability, which is at most `p_{i,j}`.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::field::Field;
use crate::io::fmt_g12;
use crate::model::{ModelParams, State};

pub const DEFAULT_PATHS: u64 = 200;
pub const DEFAULT_HORIZON: u64 = 5000;

const Z_95: f64 = 1.96;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct McConfig {
    pub paths: u64,
    pub horizon: u64,
    pub seed: u64,
    pub initial: State,
}

impl McConfig {
    pub fn new(paths: u64, horizon: u64, seed: u64, initial: State) -> Result<Self> {
        if paths == 0 || horizon == 0 {
            return Err(Error::InvalidArgument(format!(
                "need M >= 1 and T >= 1, got M = {paths}, T = {horizon}"
            )));
        }
        if initial.is_absorbed() {
            return Err(Error::AbsorbedState { i: initial.i, j: initial.j });
        }
        Ok(Self { paths, horizon, seed, initial })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PathOutcome {
    Absorbed { time: u64 },
    Censored,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub initial: State,
    pub p_hat: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub paths: u64,
    pub horizon: u64,
    pub seed: u64,
    /// `p_hat` is 0 or 1, so the Wald interval has zero width.
    pub degenerate: bool,
}

impl McEstimate {
    pub fn contains(&self, p: f64) -> bool {
        self.ci_low <= p && p <= self.ci_high
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{}",
            self.initial.i,
            self.initial.j,
            fmt_g12(self.p_hat),
            fmt_g12(self.ci_low),
            fmt_g12(self.ci_high),
            self.paths,
            self.horizon,
            self.seed
        )
    }
}

pub const CSV_HEADER: &str = "i,j,p_hat,ci_low,ci_high,M,T,seed";

/// Half-width `1.96 sqrt(p(1-p)/M)` of the asymptotic 95% interval.
pub fn wald_half_width(p_hat: f64, paths: u64) -> f64 {
    Z_95 * (p_hat * (1.0 - p_hat) / paths as f64).sqrt()
}

/// Generator for path `index` of an experiment seeded with `seed`.
pub fn path_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Run one path from `initial` for at most `horizon` steps.
pub fn simulate_path<R: Rng + ?Sized>(
    params: &ModelParams,
    initial: State,
    horizon: u64,
    rng: &mut R,
) -> Result<PathOutcome> {
    if initial.is_absorbed() {
        return Err(Error::AbsorbedState { i: initial.i, j: initial.j });
    }
    let (r, d) = (params.r(), params.d());
    let (mut i, mut j) = (initial.i as u64, initial.j as u64);
    for t in 1..=horizon {
        // weights r(i+j), r(i+j), 2di, 2dj out of 2(r+d)(i+j)
        let n = (i + j) as f64;
        let birth = r * n;
        let left = 2.0 * d * i as f64;
        let u = rng.random::<f64>() * 2.0 * (r + d) * n;
        if u < birth {
            i += 1;
        } else if u < 2.0 * birth {
            j += 1;
        } else if u < 2.0 * birth + left {
            i -= 1;
            if i == 0 {
                return Ok(PathOutcome::Absorbed { time: t });
            }
        } else {
            j -= 1;
            if j == 0 {
                return Ok(PathOutcome::Absorbed { time: t });
            }
        }
    }
    Ok(PathOutcome::Censored)
}

pub fn estimate(params: &ModelParams, config: &McConfig) -> Result<McEstimate> {
    let absorbed: u64 = (0..config.paths)
        .into_par_iter()
        .map(|k| {
            let mut rng = path_rng(config.seed, k);
            match simulate_path(params, config.initial, config.horizon, &mut rng) {
                Ok(PathOutcome::Absorbed { .. }) => 1,
                _ => 0,
            }
        })
        .sum();
    Ok(from_count(absorbed, config))
}

fn from_count(absorbed: u64, config: &McConfig) -> McEstimate {
    let p_hat = absorbed as f64 / config.paths as f64;
    let half = wald_half_width(p_hat, config.paths);
    McEstimate {
        initial: config.initial,
        p_hat,
        ci_low: (p_hat - half).max(0.0),
        ci_high: (p_hat + half).min(1.0),
        paths: config.paths,
        horizon: config.horizon,
        seed: config.seed,
        degenerate: absorbed == 0 || absorbed == config.paths,
    }
}

/// Seed for the cell `(i, j)` of a lattice run, mixed with splitmix64 so
/// that neighbouring cells get unrelated streams.
pub fn cell_seed(seed: u64, i: u32, j: u32) -> u64 {
    let mut z = seed ^ ((i as u64) << 32 | j as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Estimates for every cell of `{1..n}²`, i-major. Cell seeds come from
/// [`cell_seed`]; the `seed` field of each estimate echoes the base seed.
pub fn estimate_lattice(
    params: &ModelParams,
    n: usize,
    paths: u64,
    horizon: u64,
    seed: u64,
) -> Result<Vec<McEstimate>> {
    if n == 0 {
        return Err(Error::InvalidArgument("lattice size must be >= 1".into()));
    }
    let cells: Vec<State> = (1..=n as u32)
        .flat_map(|i| (1..=n as u32).map(move |j| State::new(i, j)))
        .collect();
    cells
        .par_iter()
        .map(|&s| {
            let config = McConfig::new(paths, horizon, cell_seed(seed, s.i, s.j), s)?;
            let absorbed: u64 = (0..paths)
                .map(|k| {
                    let mut rng = path_rng(config.seed, k);
                    match simulate_path(params, s, horizon, &mut rng) {
                        Ok(PathOutcome::Absorbed { .. }) => 1,
                        _ => 0,
                    }
                })
                .sum();
            let mut est = from_count(absorbed, &config);
            est.seed = seed;
            Ok(est)
        })
        .collect()
}

/// `p_hat` values of a lattice run as a field.
pub fn lattice_field(estimates: &[McEstimate]) -> Result<Field> {
    let n = (estimates.len() as f64).sqrt().round() as usize;
    if n * n != estimates.len() {
        return Err(Error::InvalidArgument(format!(
            "{} estimates do not form a square lattice",
            estimates.len()
        )));
    }
    let mut field = Field::zeros(n);
    for e in estimates {
        field.set(e.initial.i as usize, e.initial.j as usize, e.p_hat);
    }
    Ok(field)
}

pub fn write_csv<W: Write>(out: &mut W, estimates: &[McEstimate]) -> Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for e in estimates {
        writeln!(out, "{}", e.csv_row())?;
    }
    Ok(())
}
