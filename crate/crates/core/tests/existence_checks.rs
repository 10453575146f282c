mod common;

use nonlocal_bvp::criteria::{
    certify, check_h2, check_h2_with, check_h4, check_h4_with, estimate_asymptotics, search_rho, AsymptoticEstimate,
    DeclaredRho, Hypothesis, Limit, ScanOptions, Theorem, Which, MARGIN,
};
use nonlocal_bvp::problem::builtin;
use nonlocal_bvp::{parse, ConeConstants};
use proptest::prelude::*;

fn constants(id: usize) -> (nonlocal_bvp::Expr, ConeConstants) {
    let spec = builtin(id).unwrap();
    let c = ConeConstants::compute(&spec.params().unwrap(), &spec.a).unwrap();
    (spec.f, c)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn scaling_f_and_threshold_together_keeps_the_verdict(c in 0.05f64..20.0, rho in 0.1f64..20.0) {
        let (f, k) = constants(1);
        let plain = check_h2(&f, k.lambda1, rho).unwrap();
        let scaled = check_h2(&f.scaled(c), c * k.lambda1, rho).unwrap();
        prop_assert_eq!(plain.holds, scaled.holds);
        let (m, mc) = (plain.m.unwrap(), scaled.m.unwrap());
        prop_assert!((mc - c * m).abs() <= 1e-12 * c * m);

        // same threshold: the verdict follows c * max f against Lambda1 rho
        let s_max = m * rho;
        let unscaled_threshold = check_h2(&f.scaled(c), k.lambda1, rho).unwrap();
        let margin = (c * s_max - k.lambda1 * rho).abs() / (k.lambda1 * rho);
        if margin > 10.0 * MARGIN {
            prop_assert_eq!(unscaled_threshold.holds, c * s_max <= k.lambda1 * rho);
        }

        let (f, k) = constants(2);
        let plain = check_h4(&f, k.lambda2, k.gamma, rho).unwrap();
        let scaled = check_h4(&f.scaled(c), c * k.lambda2, k.gamma, rho).unwrap();
        prop_assert_eq!(plain.holds, scaled.holds);
    }

    #[test]
    fn finer_scan_agrees_away_from_the_threshold(rho in 0.05f64..50.0) {
        for id in 1..=4 {
            let (f, k) = constants(id);
            let coarse = check_h2(&f, k.lambda1, rho).unwrap();
            let fine = check_h2_with(&f, k.lambda1, rho, ScanOptions::default().doubled()).unwrap();
            if !coarse.marginal && !fine.marginal {
                prop_assert_eq!(coarse.holds, fine.holds, "example {} H2 at {}", id, rho);
            }
            let coarse = check_h4(&f, k.lambda2, k.gamma, rho).unwrap();
            let fine = check_h4_with(&f, k.lambda2, k.gamma, rho, ScanOptions::default().doubled()).unwrap();
            if !coarse.marginal && !fine.marginal {
                prop_assert_eq!(coarse.holds, fine.holds, "example {} H4 at {}", id, rho);
            }
        }
    }
}

#[test]
fn limits_at_zero_and_infinity_imply_shell_conditions() {
    // f0 < Lambda1 gives the ball condition for small rho, f_inf > Lambda2/gamma
    // the shell condition for large rho, and symmetrically for the other pair.
    let (f, k) = constants(3);
    assert!(check_h2(&f, k.lambda1, 1e-3).unwrap().holds);
    assert!(check_h4(&f, k.lambda2, k.gamma, 100.0).unwrap().holds);
    let (f, k) = constants(4);
    assert!(check_h4(&f, k.lambda2, k.gamma, 1e-4).unwrap().holds);
    assert!(check_h2(&f, k.lambda1, 1e4).unwrap().holds);
}

#[test]
fn asymptotic_certificates_carry_usable_theta() {
    for id in [3, 4] {
        let spec = builtin(id).unwrap();
        let k = ConeConstants::compute(&spec.params().unwrap(), &spec.a).unwrap();
        let est = estimate_asymptotics(&spec.f, spec.asymptotics).unwrap();
        let certs = certify(&spec.f, &k, &est, spec.hypotheses).unwrap();
        assert!(!certs.is_empty());
        for w in certs.iter().flat_map(|c| &c.witnesses) {
            if let Some(theta) = w.theta {
                assert!(theta > 0.0 && theta.is_finite(), "{w:?}");
            }
        }
    }
}

#[test]
fn search_finds_a_witness_that_checks_out() {
    let (f, k) = constants(1);
    let w = search_rho(&f, Which::H2, &k, 1e-3, 1e3).unwrap();
    let rho = w.rho.unwrap();
    assert!(check_h2(&f, k.lambda1, rho).unwrap().holds);
    let (f, k) = constants(2);
    let w = search_rho(&f, Which::H4, &k, 1e-3, 1e3).unwrap();
    assert!(check_h4(&f, k.lambda2, k.gamma, w.rho.unwrap()).unwrap().holds);
}

#[test]
fn sampled_limits_of_simple_nonlinearities() {
    let est = |src: &str| estimate_asymptotics(&parse(src, "u").unwrap(), (None, None)).unwrap();
    let e = est("u^2");
    assert_eq!((e.f0, e.f_inf), (Limit::Zero, Limit::Infinite));
    let e = est("sqrt(u)");
    assert_eq!((e.f0, e.f_inf), (Limit::Infinite, Limit::Zero));
    let e = est("3*u + u^2/(1 + u^2)");
    match (e.f0, e.f_inf) {
        (Limit::Finite(a), Limit::Finite(b)) => {
            assert!((a - 3.0).abs() < 1e-6 && (b - 3.0).abs() < 1e-6, "{a} {b}");
        }
        other => panic!("{other:?}"),
    }
}

fn declared(f0: Limit, f_inf: Limit) -> AsymptoticEstimate {
    AsymptoticEstimate {
        f0,
        f_inf,
        f0_declared: true,
        f_inf_declared: true,
        f0_window: None,
        f_inf_window: None,
    }
}

fn fires(certs: &[nonlocal_bvp::criteria::Certificate], t: Theorem) -> Option<&nonlocal_bvp::criteria::Certificate> {
    certs.iter().find(|c| c.theorem == t)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn theta_elimination_matches_the_limit_comparison(
        lambda1 in 0.05f64..20.0,
        ratio0 in 0.0f64..3.0,
        gamma in 0.05f64..0.95,
        lambda2 in 0.05f64..50.0,
        ratio_inf in 0.0f64..3.0,
    ) {
        prop_assume!((ratio0 - 1.0).abs() > 1e-6 && (ratio_inf - 1.0).abs() > 1e-6);
        let k = ConeConstants {
            gamma,
            gamma_branches: [gamma; 3],
            lambda1,
            lambda2,
            alpha_sup: 1.0,
            beta_sup: 1.0,
        };
        let f = parse("u", "u").unwrap();
        let rho = DeclaredRho::default();

        // with f_inf infinite only the condition on f0 can fail
        let f0 = ratio0 * lambda1;
        let certs = certify(&f, &k, &declared(Limit::Finite(f0), Limit::Infinite), rho).unwrap();
        let cert = fires(&certs, Theorem::Cor42);
        prop_assert_eq!(cert.is_some(), f0 < lambda1);
        if let Some(cert) = cert {
            let h5 = cert.witnesses.iter().find(|w| w.name == Hypothesis::H5).unwrap();
            let theta = h5.theta.unwrap();
            prop_assert!(theta > 0.0 && theta <= 1.0);
            prop_assert!(f0 < theta * lambda1 || f0 == 0.0);
        }

        // with f0 zero only the condition on f_inf can fail
        let f_inf = ratio_inf * lambda2 / gamma;
        let certs = certify(&f, &k, &declared(Limit::Zero, Limit::Finite(f_inf)), rho).unwrap();
        let cert = fires(&certs, Theorem::Cor42);
        prop_assert_eq!(cert.is_some(), f_inf > lambda2 / gamma);
        if let Some(cert) = cert {
            let h6 = cert.witnesses.iter().find(|w| w.name == Hypothesis::H6).unwrap();
            let theta = h6.theta.unwrap();
            prop_assert!(theta >= 1.0);
            prop_assert!(f_inf > theta * lambda2 / gamma);
        }
    }
}

#[test]
fn fired_witnesses_survive_a_finer_scan() {
    for id in 1..=4 {
        let spec = builtin(id).unwrap();
        let k = ConeConstants::compute(&spec.params().unwrap(), &spec.a).unwrap();
        let est = estimate_asymptotics(&spec.f, spec.asymptotics).unwrap();
        let finer = ScanOptions::default().doubled();
        for cert in certify(&spec.f, &k, &est, spec.hypotheses).unwrap() {
            for w in &cert.witnesses {
                let Some(rho) = w.rho else { continue };
                let again = match w.name {
                    Hypothesis::H2 => check_h2_with(&spec.f, k.lambda1, rho, finer).unwrap(),
                    Hypothesis::H4 => check_h4_with(&spec.f, k.lambda2, k.gamma, rho, finer).unwrap(),
                    other => panic!("unexpected rho witness {other:?}"),
                };
                assert!(again.holds, "example {id}, {} {:?} at {rho}", cert.theorem, w.name);
            }
        }
    }
}

#[test]
fn constants_shrink_as_beta_approaches_its_supremum() {
    let a = parse("1 + t", "t").unwrap();
    let (alpha, eta, t) = (1.5, 0.6, 1.4);
    let beta_sup = (2.0 * t - alpha * eta * eta) / (alpha * eta * eta - 2.0 * eta + 2.0 * t);
    let values: Vec<(f64, f64)> = (0..20)
        .map(|i| {
            let beta = beta_sup * (1.0 - 0.5f64.powi(i));
            let p = nonlocal_bvp::BvpParams::new(alpha, beta, eta, t).unwrap();
            assert!(p.shared_numerator() > 0.0);
            let c = ConeConstants::compute(&p, &a).unwrap();
            (c.lambda1, c.lambda2)
        })
        .collect();
    for w in values.windows(2) {
        assert!(w[1].0 < w[0].0 && w[1].1 < w[0].1, "{w:?}");
    }
    let last = values.last().unwrap();
    assert!(last.0 < 1e-4 * values[0].0 && last.1 < 1e-4 * values[0].1, "{last:?}");
}
