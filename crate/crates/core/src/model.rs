//! Model parameters and the transition kernel of the embedded chain.
//!
//! The walk lives on pairs `(i, j)` of genotype counts. From an interior
//! state it moves right or up with probability `r / (2(r+d))` each, left with
//! probability `d i / ((r+d)(i+j))` and down with `d j / ((r+d)(i+j))`. It is
//! absorbed as soon as either coordinate reaches zero.

use crate::error::{Error, Result};

/// Birth rate `r` and death rate `d` of the population, with `r > d > 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    r: f64,
    d: f64,
}

impl ModelParams {
    pub fn new(r: f64, d: f64) -> Result<Self> {
        if !(r.is_finite() && d.is_finite() && d > 0.0 && r > d) {
            return Err(Error::InvalidParams { r, d });
        }
        Ok(Self { r, d })
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn d(&self) -> f64 {
        self.d
    }

    /// `d / r`, always in `(0, 1)`.
    pub fn ratio(&self) -> f64 {
        self.d / self.r
    }

    /// Probability of each of the two birth moves, `r / (2(r+d))`.
    pub fn birth_prob(&self) -> f64 {
        self.r / (2.0 * (self.r + self.d))
    }

    /// Weight `d / (r+d)` shared by both death moves.
    pub fn death_weight(&self) -> f64 {
        self.d / (self.r + self.d)
    }
}

/// A point of the quadrant: `i` individuals of genotype Aa, `j` of genotype aa.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct State {
    pub i: u32,
    pub j: u32,
}

impl State {
    pub fn new(i: u32, j: u32) -> Self {
        Self { i, j }
    }

    pub fn is_absorbed(&self) -> bool {
        self.i == 0 || self.j == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepDistribution {
    pub p_right: f64,
    pub p_up: f64,
    pub p_left: f64,
    pub p_down: f64,
}

impl StepDistribution {
    pub fn total(&self) -> f64 {
        self.p_right + self.p_up + self.p_left + self.p_down
    }
}

pub fn step_distribution(params: &ModelParams, s: State) -> Result<StepDistribution> {
    if s.is_absorbed() {
        return Err(Error::AbsorbedState { i: s.i, j: s.j });
    }
    let (i, j) = (f64::from(s.i), f64::from(s.j));
    let birth = params.birth_prob();
    let w = params.death_weight() / (i + j);
    Ok(StepDistribution {
        p_right: birth,
        p_up: birth,
        p_left: w * i,
        p_down: w * j,
    })
}

/// Rigorous bracket `[(d/r)^(i+j), (d/r)^i + (d/r)^j - (d/r)^(i+j)]` on the
/// extinction probability, clamped into `[0, 1]`. On the axes both ends are 1.
pub fn prop2_bounds(params: &ModelParams, s: State) -> (f64, f64) {
    if s.is_absorbed() {
        return (1.0, 1.0);
    }
    let rho = params.ratio();
    let ri = rho.powi(s.i as i32);
    let rj = rho.powi(s.j as i32);
    let lower = ri * rj;
    let upper = (ri + rj - lower).min(1.0);
    (lower, upper)
}
