//! Square arrays of per-state values indexed from 1.

use crate::error::{Error, Result};

/// Values `f(i, j)` for `1 <= i, j <= n`, stored i-major:
/// `(1,1), (1,2), ..., (1,n), (2,1), ...`.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    n: usize,
    values: Vec<f64>,
}

impl Field {
    pub fn zeros(n: usize) -> Self {
        Self::filled(n, 0.0)
    }

    pub fn filled(n: usize, value: f64) -> Self {
        Self {
            n,
            values: vec![value; n * n],
        }
    }

    pub fn from_vec(n: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != n * n {
            return Err(Error::InvalidArgument(format!(
                "field of size {n} needs {} values, got {}",
                n * n,
                values.len()
            )));
        }
        Ok(Self { n, values })
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut values = Vec::with_capacity(n * n);
        for i in 1..=n {
            for j in 1..=n {
                values.push(f(i, j));
            }
        }
        Self { n, values }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        (i - 1) * self.n + (j - 1)
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[self.index(i, j)]
    }

    pub fn try_get(&self, i: usize, j: usize) -> Result<f64> {
        if i == 0 || j == 0 || i > self.n || j > self.n {
            return Err(Error::OutOfRange { i, j, n: self.n });
        }
        Ok(self.get(i, j))
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let k = self.index(i, j);
        self.values[k] = v;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// `max |f(i,j) - f(j,i)|`.
    pub fn max_asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 1..=self.n {
            for j in (i + 1)..=self.n {
                worst = worst.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        worst
    }

    pub fn max_abs_diff(&self, other: &Field) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Leading `m x m` corner.
    pub fn restrict(&self, m: usize) -> Field {
        Field::from_fn(m.min(self.n), |i, j| self.get(i, j))
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.values
            .iter()
            .enumerate()
            .map(move |(k, &v)| (k / self.n + 1, k % self.n + 1, v))
    }
}
