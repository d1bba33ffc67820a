//! Dickman's function and the density constants built on it.
//!
//! `rho` is the continuous solution of `u ρ'(u) = -ρ(u - 1)` with `ρ = 1` on
//! `(0, 1]`. On each unit interval `[j, j + 1]` it is analytic, so we store a
//! truncated power series about the midpoint. With `s = u - j - 1/2`, the
//! equation becomes `(c + s) ρ_j'(s) = -ρ_{j-1}(s)` where `c = j + 1/2`,
//! giving the coefficient recurrence
//!
//! ```text
//! a[n+1] = -(b[n] + n a[n]) / (c (n + 1))
//! ```
//!
//! (`b` are the coefficients on the previous interval); `a[0]` is fixed by
//! continuity at `u = j`. The series has radius `c >= 3/2` and is evaluated
//! for `|s| <= 1/2`, so the truncation error decays like `3^-n`.

use std::sync::OnceLock;

use crate::error::{Error, Result};

const SERIES_TERMS: usize = 64;
pub const DEFAULT_U_MAX: f64 = 20.0;

/// Piecewise power-series representation of ρ on `(0, u_max]`.
#[derive(Clone, Debug)]
pub struct RhoEvaluator {
    u_max: f64,
    /// `segments[j]` covers `[j, j + 1]`.
    segments: Vec<[f64; SERIES_TERMS]>,
}

fn eval_series(a: &[f64; SERIES_TERMS], s: f64) -> f64 {
    a.iter().rev().fold(0.0, |acc, &c| acc * s + c)
}

impl RhoEvaluator {
    pub fn new(u_max: f64) -> Result<Self> {
        if !(u_max >= 1.0 && u_max.is_finite()) {
            return Err(Error::Domain(format!("u_max must be >= 1, got {u_max}")));
        }
        let count = u_max.ceil() as usize;
        let mut segments = Vec::with_capacity(count);
        let mut first = [0.0; SERIES_TERMS];
        first[0] = 1.0;
        segments.push(first);
        for j in 1..count {
            let prev = &segments[j - 1];
            let c = j as f64 + 0.5;
            let mut a = [0.0; SERIES_TERMS];
            for n in 0..SERIES_TERMS - 1 {
                a[n + 1] = -(prev[n] + n as f64 * a[n]) / (c * (n as f64 + 1.0));
            }
            let left_limit = eval_series(prev, 0.5);
            a[0] = 0.0;
            a[0] = left_limit - eval_series(&a, -0.5);
            segments.push(a);
        }
        Ok(RhoEvaluator { u_max, segments })
    }

    pub fn u_max(&self) -> f64 {
        self.u_max
    }

    pub fn rho(&self, u: f64) -> Result<f64> {
        if !(u > 0.0 && u <= self.u_max) {
            return Err(Error::Domain(format!(
                "rho is evaluated on (0, {}], got {u}",
                self.u_max
            )));
        }
        if u <= 1.0 {
            return Ok(1.0);
        }
        let j = (u.ceil() as usize - 1).min(self.segments.len() - 1);
        let s = u - j as f64 - 0.5;
        Ok(eval_series(&self.segments[j], s))
    }
}

impl Default for RhoEvaluator {
    fn default() -> Self {
        RhoEvaluator::new(DEFAULT_U_MAX).expect("default u_max is valid")
    }
}

fn shared() -> &'static RhoEvaluator {
    static EVAL: OnceLock<RhoEvaluator> = OnceLock::new();
    EVAL.get_or_init(RhoEvaluator::default)
}

/// ρ(u) on `(0, 20]` using a shared evaluator.
pub fn rho(u: f64) -> Result<f64> {
    shared().rho(u)
}

/// `C(r) = (1 - log 2)(1 - exp(-r / (1 - log 2)))`.
pub fn c_of_r(r: f64) -> Result<f64> {
    if !(r > 0.0) {
        return Err(Error::Domain(format!("C(r) needs r > 0, got {r}")));
    }
    let c = 1.0 - std::f64::consts::LN_2;
    Ok(-c * (-r / c).exp_m1())
}

/// `1 - e^{-r}`, the largest density any representation of `r` can have.
pub fn density_upper_bound(r: f64) -> f64 {
    -(-r).exp_m1()
}

/// Riemann zeta at an integer `k >= 2`: direct sum to 64 plus an
/// Euler–Maclaurin tail, accurate far below `1e-12`.
pub fn zeta(k: u32) -> f64 {
    assert!(k >= 2, "zeta needs k >= 2");
    const N: f64 = 64.0;
    let kf = k as f64;
    let head: f64 = (1..64u32).rev().map(|n| (n as f64).powi(-(k as i32))).sum();
    let tail = N.powf(1.0 - kf) / (kf - 1.0) + 0.5 * N.powf(-kf) + kf / 12.0 * N.powf(-kf - 1.0)
        - kf * (kf + 1.0) * (kf + 2.0) / 720.0 * N.powf(-kf - 3.0);
    head + tail
}

/// `ξ(k) = 2 (1 - 2^{-k}) ζ(k)`, the odd-part analogue of `ζ(k)`.
pub fn xi(k: u32) -> f64 {
    2.0 * (1.0 - 2f64.powi(-(k as i32))) * zeta(k)
}

fn u_of(x: f64, y: f64) -> Result<f64> {
    if !(x >= 3.0 && y >= 2.0 && y <= x) {
        return Err(Error::Domain(format!("estimators need x >= 3 and 2 <= y <= x (x={x}, y={y})")));
    }
    Ok(x.ln() / y.ln())
}

/// Main term `x ρ(log x / log y) / ζ(k)` for the census of the k-free family.
pub fn psi_estimate(x: f64, y: f64, k: u32) -> Result<f64> {
    Ok(x * rho(u_of(x, y)?)? / zeta(k))
}

/// Main term `x ρ(log x / log y) / ξ(k)` for the odd, non-`m²+m-1` subfamily.
pub fn psi0_estimate(x: f64, y: f64, k: u32) -> Result<f64> {
    Ok(x * rho(u_of(x, y)?)? / xi(k))
}

/// Main term `ρ(log x / log y) log(1/λ) / ζ(k)` for the reciprocal sum over
/// `(λx, x]`.
pub fn recip_sum_estimate(x: f64, y: f64, k: u32, lambda: f64) -> Result<f64> {
    if !(lambda > 0.0 && lambda <= 1.0) {
        return Err(Error::Domain(format!("lambda must lie in (0, 1], got {lambda}")));
    }
    Ok(rho(u_of(x, y)?)? * (1.0 / lambda).ln() / zeta(k))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{LN_2, PI};

    #[test]
    fn rho_reference_values() {
        assert_eq!(rho(0.5).unwrap(), 1.0);
        assert_eq!(rho(1.0).unwrap(), 1.0);
        assert!((rho(2.0).unwrap() - (1.0 - LN_2)).abs() < 1e-12);
        assert!((rho(2.0).unwrap() - 0.306_852_819_44).abs() < 1e-8);
    }

    #[test]
    fn rho_matches_closed_form_on_first_interval() {
        for i in 0..=200 {
            let u = 1.0 + i as f64 / 200.0;
            assert!((rho(u).unwrap() - (1.0 - u.ln())).abs() < 1e-13, "u = {u}");
        }
    }

    #[test]
    fn rho_is_continuous_at_integers() {
        let e = RhoEvaluator::default();
        for j in 1..19usize {
            let left = eval_series(&e.segments[j - 1], 0.5);
            let right = eval_series(&e.segments[j], -0.5);
            assert!((left - right).abs() < 1e-15 * left.max(1e-300).max(1.0));
        }
    }

    #[test]
    fn rho_positive_and_non_increasing() {
        let mut last = f64::INFINITY;
        for i in 1..=2000 {
            let u = i as f64 * 0.01;
            let v = rho(u).unwrap();
            assert!(v > 0.0, "rho({u}) = {v}");
            assert!(v <= last, "rho increased at {u}");
            last = v;
        }
    }

    #[test]
    fn rho_domain() {
        assert!(rho(0.0).is_err());
        assert!(rho(-1.0).is_err());
        assert!(rho(20.5).is_err());
        assert!(rho(f64::NAN).is_err());
        assert!(RhoEvaluator::new(0.5).is_err());
    }

    #[test]
    fn constants() {
        assert!((zeta(2) - PI * PI / 6.0).abs() < 1e-13);
        assert!((zeta(4) - PI.powi(4) / 90.0).abs() < 1e-13);
        assert!((xi(2) - PI * PI / 4.0).abs() < 1e-13);
        assert!((c_of_r(1.0).unwrap() - 0.295_06).abs() < 1e-5);
        assert!((density_upper_bound(1.0) - 0.632_120_6).abs() < 1e-7);
        assert!(c_of_r(0.0).is_err());
        assert!((c_of_r(200.0).unwrap() - (1.0 - LN_2)).abs() < 1e-15);
        assert!(density_upper_bound(1e-12) < 1e-11);
    }

    #[test]
    fn estimators() {
        let p = psi_estimate(1e6, 1e6, 2).unwrap();
        assert!((p - 1e6 / zeta(2)).abs() < 1e-6);
        assert_eq!(p.round(), 607_927.0);
        let p0 = psi0_estimate(1e6, 1e6, 2).unwrap();
        assert_eq!(p0.round(), 405_285.0);
        assert_eq!(recip_sum_estimate(1e6, 1e3, 3, 1.0).unwrap(), 0.0);
        assert!(psi_estimate(2.0, 2.0, 2).is_err());
        assert!(recip_sum_estimate(1e6, 1e3, 3, 0.0).is_err());
    }
}
