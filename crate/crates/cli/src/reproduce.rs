//! Built-in examples checked against reference constants.

use nonlocal_bvp::criteria::{check_h2, check_h4, primary, Limit, Theorem};
use nonlocal_bvp::numfmt::g12;
use nonlocal_bvp::problem::builtin;
use nonlocal_bvp::solver::TRIVIAL_NORM;

use crate::{analyze, solve, Failure};

pub const TOLERANCE: f64 = 1e-9;

pub struct Expected {
    pub values: &'static [(&'static str, f64)],
    pub witness: Option<(Witness, f64, f64, f64)>,
    pub theorem: Theorem,
    /// Positive solutions required, and the norm they must straddle.
    pub solutions: (usize, Option<f64>),
}

#[derive(Clone, Copy)]
pub enum Witness {
    MaxOnBall,
    MinOnShell,
}

/// Per example: named constants, optional `(kind, rho, extremum, M)`.
pub fn expected(id: usize) -> Expected {
    match id {
        1 => Expected {
            values: &[("lambda1", 7.0 / 17.0)],
            witness: Some((Witness::MaxOnBall, 4.0, 1.5, 3.0 / 8.0)),
            theorem: Theorem::Thm31,
            solutions: (2, Some(4.0)),
        },
        2 => Expected {
            values: &[("gamma", 1.0 / 3.0), ("lambda2", 3.0 / 20.0)],
            witness: Some((Witness::MinOnShell, 6.0, 36.0, 6.0)),
            theorem: Theorem::Thm32,
            solutions: (2, Some(6.0)),
        },
        3 => Expected {
            values: &[
                ("gamma", 0.25),
                ("lambda1", 1.0 / 3.0),
                ("lambda2", 22.5),
                ("lambda2_over_gamma", 90.0),
                ("f0", 61.0 / 213.0),
                ("finf", 183.0),
            ],
            witness: None,
            theorem: Theorem::Cor42,
            solutions: (1, None),
        },
        4 => Expected {
            values: &[
                ("gamma", 0.25),
                ("lambda1", 2.0),
                ("lambda2", 100.0),
                ("lambda2_over_gamma", 400.0),
                ("f0", 800.0),
                ("finf", 1.0),
            ],
            witness: None,
            theorem: Theorem::Cor43,
            solutions: (1, None),
        },
        _ => unreachable!("example ids are validated by the argument parser"),
    }
}

fn rel_err(expected: f64, computed: f64) -> f64 {
    (computed - expected).abs() / expected.abs().max(f64::MIN_POSITIVE)
}

fn limit_value(l: Limit) -> f64 {
    l.value()
}

pub fn run(id: usize, n: Option<usize>, with_solve: bool) -> Result<(), Failure> {
    let spec = builtin(id).expect("built-in example");
    let exp = expected(id);
    let an = analyze(&spec)?;
    let c = &an.constants;
    let mut all_ok = true;

    println!(
        "{:<22} {:>20} {:>20} {:>10}  status",
        "quantity", "expected", "computed", "rel_err"
    );
    let mut row = |name: &str, expected: f64, computed: f64| {
        let err = rel_err(expected, computed);
        let ok = err <= TOLERANCE;
        all_ok &= ok;
        println!(
            "{name:<22} {:>20} {:>20} {:>10}  {}",
            g12(expected),
            g12(computed),
            format!("{err:.1e}"),
            if ok { "ok" } else { "MISMATCH" }
        );
    };
    for &(name, value) in exp.values {
        let computed = match name {
            "gamma" => c.gamma,
            "lambda1" => c.lambda1,
            "lambda2" => c.lambda2,
            "lambda2_over_gamma" => c.lambda2_over_gamma(),
            "f0" => limit_value(an.asymptotics.f0),
            "finf" => limit_value(an.asymptotics.f_inf),
            other => unreachable!("{other}"),
        };
        row(name, value, computed);
    }
    if let Some((kind, rho, extremum, m)) = exp.witness {
        let w = match kind {
            Witness::MaxOnBall => check_h2(&spec.f, c.lambda1, rho)?,
            Witness::MinOnShell => check_h4(&spec.f, c.lambda2, c.gamma, rho)?,
        };
        let (label, mlabel) = match kind {
            Witness::MaxOnBall => ("H2 max f on [0,rho]", "H2 M"),
            Witness::MinOnShell => ("H4 min f on shell", "H4 M"),
        };
        let got_m = w.m.unwrap_or(f64::NAN);
        row(label, extremum, got_m * rho);
        row(mlabel, m, got_m);
        if !w.holds {
            all_ok = false;
            println!("{label}: does not hold at rho = {}", g12(rho));
        }
    }

    let fired: Vec<&str> = an.certificates.iter().map(|c| c.theorem.label()).collect();
    let routed = primary(&an.certificates).map(|c| c.theorem);
    let route_ok = routed == Some(exp.theorem);
    all_ok &= route_ok;
    println!(
        "certificate: expected {}, primary {}, fired [{}]  {}",
        exp.theorem,
        routed.map(|t| t.label()).unwrap_or("none"),
        fired.join(", "),
        if route_ok { "ok" } else { "MISMATCH" }
    );

    if with_solve {
        let started = std::time::Instant::now();
        let solved = solve(&spec, an.params, &an.certificates, n)?;
        let tol = solved.options.residual_tol;
        let good: Vec<f64> = solved
            .outcome
            .positive
            .iter()
            .filter(|s| s.sup_norm > TRIVIAL_NORM && s.fixed_point_residual <= tol && s.in_cone)
            .map(|s| s.sup_norm)
            .collect();
        let (need, straddle) = exp.solutions;
        let mut ok = good.len() >= need;
        if let Some(rho) = straddle {
            ok &= good.iter().any(|&x| x < rho) && good.iter().any(|&x| x > rho);
        }
        all_ok &= ok;
        let norms: Vec<String> = good.iter().map(|x| g12(*x)).collect();
        println!(
            "solutions: n = {}, norms [{}], {:.2} s  {}",
            solved.options.grid_n,
            norms.join(", "),
            started.elapsed().as_secs_f64(),
            if ok { "ok" } else { "MISMATCH" }
        );
    }

    println!("result = {}", if all_ok { "pass" } else { "fail" });
    if all_ok {
        Ok(())
    } else {
        Err(Failure::Mismatch)
    }
}
