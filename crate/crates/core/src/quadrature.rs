//! Composite Simpson quadrature on uniform grids, plus a grid-doubling driver
//! for callable integrands.

use crate::error::{Error, Result};

/// Uniform partition of `[t_start, t_end]` into an even number of subintervals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UniformGrid {
    t_start: f64,
    t_end: f64,
    n: usize,
}

impl UniformGrid {
    pub fn new(t_start: f64, t_end: f64, n: usize) -> Result<Self> {
        if n < 2 || !n.is_multiple_of(2) {
            return Err(Error::InvalidParams(format!(
                "grid needs an even number of subintervals >= 2, got {n}"
            )));
        }
        if !(t_start < t_end) || !t_start.is_finite() || !t_end.is_finite() {
            return Err(Error::InvalidParams(format!(
                "grid interval [{t_start}, {t_end}] is empty or non-finite"
            )));
        }
        Ok(UniformGrid { t_start, t_end, n })
    }

    pub fn t_start(&self) -> f64 {
        self.t_start
    }

    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn h(&self) -> f64 {
        (self.t_end - self.t_start) / self.n as f64
    }

    /// Node `i`; the last node is exactly `t_end`.
    pub fn node(&self, i: usize) -> f64 {
        if i == self.n {
            self.t_end
        } else {
            self.t_start + i as f64 * self.h()
        }
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..=self.n).map(move |i| self.node(i))
    }
}

/// Composite Simpson rule over `grid` for samples at its `n + 1` nodes.
pub fn simpson(values: &[f64], grid: &UniformGrid) -> Result<f64> {
    if values.len() != grid.n + 1 {
        return Err(Error::LengthMismatch {
            expected: grid.n + 1,
            found: values.len(),
        });
    }
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("integrand sample {i} is {}", values[i])));
    }
    Ok(simpson_unchecked(values, grid.h()))
}

/// Simpson weights without validation; `values.len()` must be odd.
pub(crate) fn simpson_unchecked(values: &[f64], h: f64) -> f64 {
    let n = values.len() - 1;
    debug_assert!(n.is_multiple_of(2) && n >= 2);
    let mut odd = 0.0;
    let mut even = 0.0;
    for (i, v) in values.iter().enumerate().take(n).skip(1) {
        if i % 2 == 1 {
            odd += v;
        } else {
            even += v;
        }
    }
    h / 3.0 * (values[0] + values[n] + 4.0 * odd + 2.0 * even)
}

pub const DEFAULT_REL_TOL: f64 = 1e-10;
pub const DEFAULT_START_N: usize = 16;
pub const MAX_N: usize = 1 << 20;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaptiveEstimate {
    pub value: f64,
    /// Relative change between the last two grid levels.
    pub achieved_rel_tol: f64,
    pub n: usize,
    pub converged: bool,
}

/// Simpson with grid doubling from `n = 16` until two successive estimates
/// agree to `rel_tol` (relative) or `n` would exceed `2^20`.
///
/// Failing to reach the tolerance is reported through `converged`, not as an
/// error. A non-finite integrand value is an error.
pub fn integrate_adaptive<F>(f: F, a: f64, b: f64, rel_tol: f64) -> Result<AdaptiveEstimate>
where
    F: Fn(f64) -> f64,
{
    if !(a < b) {
        return Err(Error::InvalidParams(format!("integration bounds a={a} >= b={b}")));
    }
    if !(rel_tol > 0.0) {
        return Err(Error::InvalidParams(format!("rel_tol must be positive, got {rel_tol}")));
    }
    let sample = |t: f64| -> Result<f64> {
        let v = f(t);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::NonFinite(format!("integrand is {v} at {t}")))
        }
    };

    let mut n = DEFAULT_START_N;
    let mut h = (b - a) / n as f64;
    // Endpoints, interior even nodes and odd nodes kept as separate sums so
    // each doubling only evaluates the new midpoints.
    let ends = sample(a)? + sample(b)?;
    let mut evens = 0.0;
    let mut odds = 0.0;
    for i in 1..n {
        let v = sample(a + i as f64 * h)?;
        if i % 2 == 1 {
            odds += v;
        } else {
            evens += v;
        }
    }
    let mut prev = h / 3.0 * (ends + 4.0 * odds + 2.0 * evens);
    let mut achieved = f64::INFINITY;
    while n * 2 <= MAX_N {
        n *= 2;
        h /= 2.0;
        evens += odds;
        odds = 0.0;
        for i in (1..n).step_by(2) {
            odds += sample(a + i as f64 * h)?;
        }
        let est = h / 3.0 * (ends + 4.0 * odds + 2.0 * evens);
        let scale = est.abs().max(prev.abs());
        achieved = if scale == 0.0 { 0.0 } else { (est - prev).abs() / scale };
        prev = est;
        if achieved < rel_tol {
            return Ok(AdaptiveEstimate {
                value: est,
                achieved_rel_tol: achieved,
                n,
                converged: true,
            });
        }
    }
    Ok(AdaptiveEstimate {
        value: prev,
        achieved_rel_tol: achieved,
        n,
        converged: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_on_unit_interval() {
        let g = UniformGrid::new(0.0, 1.0, 2).unwrap();
        assert_eq!(simpson(&[1.0, 1.0, 1.0], &g).unwrap(), 1.0);
    }

    #[test]
    fn quadratic_weight_inside_lambda2() {
        // 8(3/4 - s) on [1/4, 3/4]: antiderivative -4(3/4-s)^2, value 1
        let g = UniformGrid::new(0.25, 0.75, 64).unwrap();
        let v: Vec<f64> = g.nodes().map(|s| (0.75 - s) * 8.0).collect();
        assert!((simpson(&v, &g).unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn quintic_weight_inside_lambda1_converges() {
        // 2(2-s) * 5/32 (2-s)^3 on [0,2] = 2
        let f = |s: f64| 2.0 * (2.0 - s) * 5.0 / 32.0 * (2.0 - s).powi(3);
        let est = integrate_adaptive(f, 0.0, 2.0, 1e-12).unwrap();
        assert!(est.converged);
        assert!((est.value - 2.0).abs() < 1e-11, "{}", est.value);
    }

    #[test]
    fn adaptive_closed_forms() {
        let one = integrate_adaptive(|_| 1.0, 0.0, 1.0, 1e-12).unwrap();
        assert_eq!(one.value, 1.0);
        let tail = integrate_adaptive(|s| 1.0 - s, 1.0 / 3.0, 1.0, DEFAULT_REL_TOL).unwrap();
        assert!((tail.value - 2.0 / 9.0).abs() < 1e-15);
        let w = integrate_adaptive(|s| (1.0 - s) * 6.0 / 25.0 * s, 0.0, 1.0, DEFAULT_REL_TOL).unwrap();
        assert!((w.value - 1.0 / 25.0).abs() < 1e-15);
    }

    #[test]
    fn errors() {
        assert!(UniformGrid::new(0.0, 1.0, 3).is_err());
        assert!(UniformGrid::new(0.0, 1.0, 0).is_err());
        assert!(UniformGrid::new(1.0, 1.0, 2).is_err());
        let g = UniformGrid::new(0.0, 1.0, 2).unwrap();
        assert!(matches!(
            simpson(&[1.0, 1.0], &g),
            Err(Error::LengthMismatch { expected: 3, found: 2 })
        ));
        assert!(matches!(simpson(&[1.0, f64::NAN, 1.0], &g), Err(Error::NonFinite(_))));
        assert!(integrate_adaptive(|s| 1.0 / s, 0.0, 1.0, 1e-10).is_err());
        assert!(integrate_adaptive(|s| s, 1.0, 0.0, 1e-10).is_err());
        assert!(integrate_adaptive(|s| s, 0.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn unreachable_tolerance_is_reported() {
        let est = integrate_adaptive(|s| s.sqrt(), 0.0, 1.0, 1e-300).unwrap();
        assert!(!est.converged);
        assert_eq!(est.n, MAX_N);
        assert!((est.value - 2.0 / 3.0).abs() < 1e-8);
    }
}
