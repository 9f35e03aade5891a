//! Large-`j` expansions of the extinction probability, and the boundary
//! closure built on them.

use crate::error::{Error, Result};
use crate::model::{prop2_bounds, ModelParams, State};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AsymptoticOrder {
    Leading,
    TwoTerm,
    /// Only defined for the first row (`i = 1`).
    ThreeTerm,
}

/// Coefficients `(c1, c2, c3)` of `p_{1,j} ~ c1/j - c2/j^2 + c3/j^3`.
pub fn row1_coefficients(params: &ModelParams) -> (f64, f64, f64) {
    let (r, d) = (params.r(), params.d());
    let c1 = 2.0 * d / r;
    let c2 = 2.0 * d * (r * r + d * r + 2.0 * d * d) / (r * r * (r + d));
    let half = r / 2.0 + d;
    let c3 = d
        * (2.0 / r * (1.0 + 2.0 * d / r).powi(2) - 24.0 * d * half / (r * r * (r + d))
            + 5.0 * r * r * d * d / (2.0 * (r + d).powi(2) * half.powi(3)));
    (c1, c2, c3)
}

/// Expansion of `p_{1,j} = p_{j,1}` in powers of `1/j`, clamped to `[0, 1]`.
pub fn p_row1_asymptotic(params: &ModelParams, j: u32, order: AsymptoticOrder) -> Result<f64> {
    if j == 0 {
        return Err(Error::InvalidArgument(
            "j = 0 lies on the axis where p = 1 exactly".into(),
        ));
    }
    let (c1, c2, c3) = row1_coefficients(params);
    let inv = 1.0 / f64::from(j);
    let value = match order {
        AsymptoticOrder::Leading => c1 * inv,
        AsymptoticOrder::TwoTerm => c1 * inv - c2 * inv * inv,
        AsymptoticOrder::ThreeTerm => c1 * inv - c2 * inv * inv + c3 * inv * inv * inv,
    };
    Ok(value.clamp(0.0, 1.0))
}

/// `ln(i!)` as a sum of logarithms; exact enough and never overflows.
fn ln_factorial(i: u32) -> f64 {
    (2..=i).map(|k| f64::from(k).ln()).sum()
}

/// Leading behaviour `(2d/r)^i i! / j^i` for fixed `i` as `j` grows, evaluated
/// in log space and clamped into the rigorous a-priori bracket.
pub fn p_general_asymptotic(params: &ModelParams, i: u32, j: u32) -> Result<f64> {
    if i == 0 || j == 0 {
        return Err(Error::InvalidArgument(format!(
            "asymptotic estimate needs i, j >= 1 (got i={i}, j={j})"
        )));
    }
    let fi = f64::from(i);
    let log_raw =
        fi * (2.0 * params.d() / params.r()).ln() + ln_factorial(i) - fi * f64::from(j).ln();
    let (lower, upper) = prop2_bounds(params, State::new(i, j));
    Ok(log_raw.exp().clamp(lower, upper))
}

/// Approximation of `p_{i,j}` used to close the truncated grid: the two-term
/// expansion on the first row/column, the general leading term elsewhere,
/// always clamped into the a-priori bracket. Symmetric in `(i, j)`; the
/// expansion runs along the larger index.
pub fn closure_estimate(params: &ModelParams, i: u32, j: u32) -> Result<f64> {
    let (small, large) = if i <= j { (i, j) } else { (j, i) };
    let raw = if small == 1 {
        p_row1_asymptotic(params, large, AsymptoticOrder::TwoTerm)?
    } else {
        p_general_asymptotic(params, small, large)?
    };
    let (lower, upper) = prop2_bounds(params, State::new(i, j));
    Ok(raw.clamp(lower, upper))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p32() -> ModelParams {
        ModelParams::new(3.0, 2.0).unwrap()
    }

    #[test]
    fn coefficients_for_three_two() {
        let (c1, c2, _) = row1_coefficients(&p32());
        assert!((c1 - 4.0 / 3.0).abs() < 1e-15);
        // 2*2*(9+6+8)/(9*5)
        assert!((c2 - 92.0 / 45.0).abs() < 1e-14);
    }

    #[test]
    fn third_coefficient_by_hand() {
        // r=3, d=2: 2/3*(7/3)^2 - 48*3.5/45 + 5*9*4/(2*25*3.5^3)
        let expected = 2.0 * (2.0 / 3.0 * 49.0 / 9.0 - 168.0 / 45.0 + 180.0 / (50.0 * 42.875));
        let (_, _, c3) = row1_coefficients(&p32());
        assert!((c3 - expected).abs() < 1e-13, "{c3} vs {expected}");
    }

    #[test]
    fn leading_term_scales_like_one_over_j() {
        let p = p32();
        for k in [3u32, 10, 77] {
            let a = p_row1_asymptotic(&p, k, AsymptoticOrder::Leading).unwrap();
            let b = p_row1_asymptotic(&p, 2 * k, AsymptoticOrder::Leading).unwrap();
            assert!((a - 2.0 * b).abs() < 1e-15);
        }
        let big = 1_000_000u32;
        let v = p_row1_asymptotic(&p, big, AsymptoticOrder::TwoTerm).unwrap();
        assert!((v * f64::from(big) - 4.0 / 3.0).abs() < 1e-5);
    }

    #[test]
    fn zero_index_is_rejected() {
        assert!(p_row1_asymptotic(&p32(), 0, AsymptoticOrder::TwoTerm).is_err());
        assert!(p_general_asymptotic(&p32(), 0, 3).is_err());
    }

    #[test]
    fn general_matches_row1_leading_and_hand_value() {
        let p = p32();
        for j in [20u32, 50, 400] {
            let g = p_general_asymptotic(&p, 1, j).unwrap();
            let l = p_row1_asymptotic(&p, j, AsymptoticOrder::Leading).unwrap();
            assert!((g - l).abs() < 1e-15);
        }
        let v = p_general_asymptotic(&p, 2, 100).unwrap();
        assert!((v - (16.0 / 9.0) * 2.0 / 1e4).abs() < 1e-15);
    }

    #[test]
    fn general_is_clamped_and_finite_for_huge_i() {
        let p = p32();
        // raw value (4/3)^3 * 6 / 2^3 = 1.78 exceeds the upper bound at (3, 2)
        let v = p_general_asymptotic(&p, 3, 2).unwrap();
        let (_, up) = prop2_bounds(&p, State::new(3, 2));
        assert_eq!(v, up);
        let v = p_general_asymptotic(&p, 500, 501).unwrap();
        assert!(v.is_finite());
    }

    #[test]
    fn closure_is_symmetric() {
        let p = ModelParams::new(2.002, 2.0).unwrap();
        for (i, j) in [(1u32, 51u32), (7, 51), (51, 51)] {
            assert_eq!(
                closure_estimate(&p, i, j).unwrap(),
                closure_estimate(&p, j, i).unwrap()
            );
        }
    }
}
