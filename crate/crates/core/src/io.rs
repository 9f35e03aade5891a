//! CSV helpers: 12-significant-digit number formatting and reading `i,j,p`
//! style files back into a [`Field`].

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::field::Field;

/// Format like C's `%.12g`: 12 significant digits, trailing zeros removed,
/// scientific notation outside `1e-4 <= |x| < 1e12`.
pub fn fmt_g12(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{x:.11e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-4..12).contains(&exp) {
        let decimals = (11 - exp).max(0) as usize;
        trim_zeros(&format!("{x:.decimals$}")).to_string()
    } else {
        format!("{}e{exp}", trim_zeros(mantissa))
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Read a CSV with integer columns `i`, `j` and a value column named
/// `value_column` (e.g. `p` or `p_hat`) into a square field. Every cell of
/// `1..=n` must be present, where `n` is the largest index seen.
pub fn read_field_csv(path: &Path, value_column: &str) -> Result<Field> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header: Vec<&str> = lines
        .next()
        .ok_or_else(|| Error::InvalidArgument(format!("{}: empty file", path.display())))?
        .split(',')
        .map(str::trim)
        .collect();
    let col = |name: &str| {
        header.iter().position(|h| *h == name).ok_or_else(|| {
            Error::InvalidArgument(format!("{}: missing column '{name}'", path.display()))
        })
    };
    let (ci, cj, cv) = (col("i")?, col("j")?, col(value_column)?);

    let mut cells = HashMap::new();
    let mut n = 0usize;
    for (lineno, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let bad = || Error::InvalidArgument(format!("{}: bad row {}", path.display(), lineno + 2));
        let i: usize = fields.get(ci).ok_or_else(bad)?.parse().map_err(|_| bad())?;
        let j: usize = fields.get(cj).ok_or_else(bad)?.parse().map_err(|_| bad())?;
        let v: f64 = fields.get(cv).ok_or_else(bad)?.parse().map_err(|_| bad())?;
        if i == 0 || j == 0 {
            return Err(bad());
        }
        n = n.max(i).max(j);
        cells.insert((i, j), v);
    }
    if cells.len() != n * n {
        return Err(Error::InvalidArgument(format!(
            "{}: expected a full {n}x{n} lattice, found {} cells",
            path.display(),
            cells.len()
        )));
    }
    Ok(Field::from_fn(n, |i, j| cells[&(i, j)]))
}
