//! The cone constant `gamma`, the growth thresholds `Lambda_1`, `Lambda_2`,
//! and sampled checks of the sign conditions on `a` and `f`.

use std::cell::RefCell;

use crate::error::{Error, Result};
use crate::expr::{EvalError, Expr};
use crate::linear_kernel::BvpParams;
use crate::quadrature::{integrate_adaptive, DEFAULT_REL_TOL};

pub const COEFFICIENT_SAMPLES: usize = 4096;
pub const DEFAULT_U_PROBE_MAX: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConeConstants {
    pub gamma: f64,
    /// `eta/T`, `alpha(beta+1)eta^2/(2T)` and
    /// `alpha(beta+1)eta(T-eta)/(2T - alpha(beta+1)eta^2)`.
    pub gamma_branches: [f64; 3],
    pub lambda1: f64,
    pub lambda2: f64,
    pub alpha_sup: f64,
    pub beta_sup: f64,
}

impl ConeConstants {
    pub fn compute(params: &BvpParams, a: &Expr) -> Result<Self> {
        Self::compute_with_tol(params, a, DEFAULT_REL_TOL)
    }

    pub fn compute_with_tol(params: &BvpParams, a: &Expr, rel_tol: f64) -> Result<Self> {
        let gamma_branches = gamma_branches(params)?;
        let gamma = gamma_branches.iter().copied().fold(f64::INFINITY, f64::min);
        Ok(ConeConstants {
            gamma,
            gamma_branches,
            lambda1: lambda1_with_tol(params, a, rel_tol)?,
            lambda2: lambda2_with_tol(params, a, gamma, rel_tol)?,
            alpha_sup: params.alpha_sup(),
            beta_sup: params.beta_sup(),
        })
    }

    /// `Lambda_2 / gamma`, the threshold for the conditions on f_inf and f0.
    pub fn lambda2_over_gamma(&self) -> f64 {
        self.lambda2 / self.gamma
    }
}

fn gamma_branches(params: &BvpParams) -> Result<[f64; 3]> {
    let (a, b, e, t) = (params.alpha(), params.beta(), params.eta(), params.t_end());
    let ab = a * (b + 1.0);
    let third_den = 2.0 * t - ab * e * e;
    if !(third_den > 0.0) {
        return Err(Error::InvalidParams(format!(
            "gamma: 2T - alpha(beta+1)eta^2 = {third_den} is not positive"
        )));
    }
    Ok([e / t, ab * e * e / (2.0 * t), ab * e * (t - e) / third_den])
}

/// Cone constant; lies in `(0, 1)` for admissible parameters.
pub fn gamma(params: &BvpParams) -> Result<f64> {
    let g = gamma_branches(params)?.into_iter().fold(f64::INFINITY, f64::min);
    if !(g > 0.0 && g < 1.0) {
        return Err(Error::InvalidParams(format!("gamma = {g} is outside (0, 1)")));
    }
    Ok(g)
}

/// `int_lo^hi weight(s) * a(s) ds` by grid-doubling Simpson. Evaluation
/// errors of `a` are reported with the offending point.
pub(crate) fn weighted_integral(a: &Expr, weight: impl Fn(f64) -> f64, lo: f64, hi: f64, rel_tol: f64) -> Result<f64> {
    let failure: RefCell<Option<(EvalError, f64)>> = RefCell::new(None);
    let est = integrate_adaptive(
        |s| match a.eval(s) {
            Ok(v) => weight(s) * v,
            Err(e) => {
                failure.borrow_mut().get_or_insert((e, s));
                f64::NAN
            }
        },
        lo,
        hi,
        rel_tol,
    );
    if let Some((source, at)) = failure.into_inner() {
        return Err(Error::Eval { source, var: "t", at });
    }
    Ok(est?.value)
}

fn positive_numerator(params: &BvpParams) -> Result<f64> {
    let num = params.shared_numerator();
    if !(num > 0.0) {
        return Err(Error::InvalidParams(format!(
            "(2T - alpha eta^2) - beta(alpha eta^2 - 2 eta + 2T) = {num} is not positive"
        )));
    }
    Ok(num)
}

pub fn lambda1(params: &BvpParams, a: &Expr) -> Result<f64> {
    lambda1_with_tol(params, a, DEFAULT_REL_TOL)
}

pub fn lambda1_with_tol(params: &BvpParams, a: &Expr, rel_tol: f64) -> Result<f64> {
    let (al, b, e, t) = (params.alpha(), params.beta(), params.eta(), params.t_end());
    let num = positive_numerator(params)?;
    let weight = |s: f64| t * (t - s);
    let integral = weighted_integral(a, weight, 0.0, e, rel_tol)? + weighted_integral(a, weight, e, t, rel_tol)?;
    if !(integral > 0.0) {
        return Err(Error::Degenerate(format!(
            "int_0^T T(T-s)a(s)ds = {integral}; a vanishes on [0, T]"
        )));
    }
    let bracket = 2.0 * (b + 1.0) + b * e * (al * e + 2.0) / t + al * b * t;
    Ok(num / (bracket * integral))
}

pub fn lambda2(params: &BvpParams, a: &Expr, gamma: f64) -> Result<f64> {
    lambda2_with_tol(params, a, gamma, DEFAULT_REL_TOL)
}

pub fn lambda2_with_tol(params: &BvpParams, a: &Expr, gamma: f64, rel_tol: f64) -> Result<f64> {
    let (e, t) = (params.eta(), params.t_end());
    let num = positive_numerator(params)?;
    let integral = weighted_integral(a, |s| t - s, e, t, rel_tol)?;
    if !(integral > 0.0) {
        return Err(Error::ConditionB2(format!(
            "int_eta^T (T-s)a(s)ds = {integral}; a must be positive somewhere on [eta, T]"
        )));
    }
    Ok(num / (2.0 * gamma * e * integral))
}

/// Sampled sign checks on `a` over `[0, T]` and `f` over `(0, u_probe_max]`.
///
/// These are finite-window samples, not proofs. Points where `f` overflows
/// are skipped and counted in `f_unevaluated`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CoefficientCheck {
    pub a_nonneg: bool,
    pub a_positive_somewhere_on_tail: bool,
    pub f_nonneg: bool,
    pub f_unevaluated: usize,
}

impl CoefficientCheck {
    pub fn all_hold(&self) -> bool {
        self.a_nonneg && self.a_positive_somewhere_on_tail && self.f_nonneg
    }
}

/// Probe points for `f`: half log-spaced over twelve decades below
/// `u_max`, half uniform.
pub(crate) fn probe_points(u_max: f64) -> Vec<f64> {
    let half = COEFFICIENT_SAMPLES / 2;
    let lo = u_max * 1e-12;
    let log_lo = lo.ln();
    let log_step = (u_max.ln() - log_lo) / (half - 1) as f64;
    let mut pts: Vec<f64> = (0..half).map(|i| (log_lo + i as f64 * log_step).exp()).collect();
    pts.extend((1..=half).map(|i| u_max * i as f64 / half as f64));
    pts
}

pub fn check_coefficients(a: &Expr, f: &Expr, params: &BvpParams, u_probe_max: f64) -> Result<CoefficientCheck> {
    let (e, t) = (params.eta(), params.t_end());
    let mut a_nonneg = true;
    let mut tail_positive = false;
    let step = t / (COEFFICIENT_SAMPLES - 1) as f64;
    let nodes = (0..COEFFICIENT_SAMPLES)
        .map(|i| {
            if i == COEFFICIENT_SAMPLES - 1 {
                t
            } else {
                i as f64 * step
            }
        })
        .chain(std::iter::once(e));
    for s in nodes {
        let v = a.eval(s).map_err(|source| Error::Eval {
            source,
            var: "t",
            at: s,
        })?;
        a_nonneg &= v >= 0.0;
        if s >= e && v > 0.0 {
            tail_positive = true;
        }
    }

    let mut f_nonneg = true;
    let mut skipped = 0;
    for u in probe_points(u_probe_max) {
        match f.eval(u) {
            Ok(v) => f_nonneg &= v >= 0.0,
            Err(EvalError::NonFinite) => skipped += 1,
            Err(source) => {
                return Err(Error::Eval {
                    source,
                    var: "u",
                    at: u,
                })
            }
        }
    }
    Ok(CoefficientCheck {
        a_nonneg,
        a_positive_somewhere_on_tail: tail_positive,
        f_nonneg,
        f_unevaluated: skipped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn gamma_of_examples() {
        let p2 = BvpParams::new(20.0, 0.1, 0.25, 0.75).unwrap();
        let b = gamma_branches(&p2).unwrap();
        assert!(rel(b[0], 1.0 / 3.0) < 1e-14 && rel(b[1], 11.0 / 12.0) < 1e-14 && rel(b[2], 22.0) < 1e-12);
        assert!(rel(gamma(&p2).unwrap(), 1.0 / 3.0) < 1e-14);
        let p3 = BvpParams::new(3.0, 0.5, 1.0 / 3.0, 1.0).unwrap();
        assert!(rel(gamma(&p3).unwrap(), 0.25) < 1e-14);
        let p4 = BvpParams::new(1.0, 1.0, 0.5, 1.0).unwrap();
        let b = gamma_branches(&p4).unwrap();
        assert_eq!(b, [0.5, 0.25, 1.0 / 3.0]);
    }

    #[test]
    fn lambdas_of_examples() {
        let p1 = BvpParams::new(2.0, 1.0 / 30.0, 1.0, 2.0).unwrap();
        let a1 = parse("5/32*(2-t)^3", "t").unwrap();
        assert!(rel(lambda1(&p1, &a1).unwrap(), 7.0 / 17.0) < 1e-9);

        let p2 = BvpParams::new(20.0, 0.1, 0.25, 0.75).unwrap();
        let a2 = parse("8", "t").unwrap();
        assert!(rel(lambda2(&p2, &a2, 1.0 / 3.0).unwrap(), 3.0 / 20.0) < 1e-9);

        let p4 = BvpParams::new(1.0, 1.0, 0.5, 1.0).unwrap();
        let a4 = parse("6/25*t", "t").unwrap();
        let c = ConeConstants::compute(&p4, &a4).unwrap();
        assert!(rel(c.lambda1, 2.0) < 1e-9);
        assert!(rel(c.lambda2, 100.0) < 1e-9);
        assert!(rel(c.beta_sup, 1.4) < 1e-14);
    }

    #[test]
    fn degenerate_coefficients() {
        let p = BvpParams::new(2.0, 1.0 / 30.0, 1.0, 2.0).unwrap();
        let zero = parse("0", "t").unwrap();
        assert!(matches!(lambda1(&p, &zero), Err(Error::Degenerate(_))));
        assert!(matches!(lambda2(&p, &zero, 0.5), Err(Error::ConditionB2(_))));
        let bad = parse("log(t)", "t").unwrap();
        assert!(matches!(lambda1(&p, &bad), Err(Error::Eval { var: "t", at, .. }) if at == 0.0));
    }

    #[test]
    fn coefficient_flags() {
        let p2 = BvpParams::new(20.0, 0.1, 0.25, 0.75).unwrap();
        let f2 = parse("exp(6)*u^2*exp(-u)", "u").unwrap();
        let c = check_coefficients(&parse("8", "t").unwrap(), &f2, &p2, DEFAULT_U_PROBE_MAX).unwrap();
        assert!(c.all_hold());
        assert_eq!(c.f_unevaluated, 0);

        let p = BvpParams::new(2.0, 1.0 / 30.0, 1.0, 2.0).unwrap();
        let c = check_coefficients(&parse("t-1", "t").unwrap(), &f2, &p, 10.0).unwrap();
        assert!(!c.a_nonneg && c.a_positive_somewhere_on_tail);
        let c = check_coefficients(&parse("0", "t").unwrap(), &f2, &p, 10.0).unwrap();
        assert!(c.a_nonneg && !c.a_positive_somewhere_on_tail);
        let c = check_coefficients(&parse("1", "t").unwrap(), &parse("u-1", "u").unwrap(), &p, 10.0).unwrap();
        assert!(!c.f_nonneg);
    }

    #[test]
    fn overflowing_nonlinearity_is_skipped_not_fatal() {
        let p3 = BvpParams::new(3.0, 0.5, 1.0 / 3.0, 1.0).unwrap();
        let f3 = parse("183*u*exp(2*u)/(637+exp(u)+exp(2*u))", "u").unwrap();
        let c = check_coefficients(&parse("1", "t").unwrap(), &f3, &p3, DEFAULT_U_PROBE_MAX).unwrap();
        assert!(c.all_hold());
        assert!(c.f_unevaluated > 0);
        let domain = parse("sqrt(1-u)", "u").unwrap();
        assert!(matches!(
            check_coefficients(&parse("1", "t").unwrap(), &domain, &p3, 10.0),
            Err(Error::Eval { var: "u", .. })
        ));
    }
}
