use nonlocal_bvp::{parse, Expr};
use proptest::prelude::*;

fn source() -> impl Strategy<Value = String> {
    let leaf = prop_oneof![
        (0.0f64..100.0).prop_map(|v| format!("{v}")),
        (1u32..50, 1u32..50).prop_map(|(p, q)| format!("{p}/{q}")),
        Just("u".to_string()),
        Just("pi".to_string()),
        Just("e".to_string()),
    ];
    leaf.prop_recursive(4, 32, 2, |inner| {
        prop_oneof![
            (
                inner.clone(),
                prop::sample::select(vec!['+', '-', '*', '/', '^']),
                inner.clone()
            )
                .prop_map(|(l, op, r)| format!("({l}){op}({r})")),
            inner.clone().prop_map(|x| format!("-{x}")),
            (
                prop::sample::select(vec!["exp", "log", "sqrt", "abs", "sin", "cos"]),
                inner
            )
                .prop_map(|(func, x)| format!("{func}({x})")),
        ]
    })
}

fn same_value(a: &Expr, b: &Expr, x: f64) -> bool {
    match (a.eval(x), b.eval(x)) {
        (Ok(p), Ok(q)) => p == q || (p.is_nan() && q.is_nan()),
        (Err(p), Err(q)) => p == q,
        _ => false,
    }
}

proptest! {
    #[test]
    fn printing_and_reparsing_is_stable(src in source()) {
        let e = parse(&src, "u").unwrap();
        let printed = e.to_string();
        let again = parse(&printed, "u").unwrap();
        prop_assert_eq!(&again, &e);
        prop_assert_eq!(again.to_string(), printed);
        for x in [0.0, 0.3, 1.0, 7.5] {
            prop_assert!(same_value(&e, &again, x));
        }
    }

    #[test]
    fn scaled_expression_multiplies_values(src in source(), c in 0.1f64..10.0, x in 0.0f64..5.0) {
        let e = parse(&src, "u").unwrap();
        if let Ok(v) = e.eval(x) {
            if let Ok(w) = e.scaled(c).eval(x) {
                prop_assert!((w - c * v).abs() <= 1e-15 * (c * v).abs());
            }
        }
    }

    #[test]
    fn garbage_never_panics(src in "[-+*/^()a-z0-9. ]{0,24}") {
        let _ = parse(&src, "u");
    }
}

#[test]
fn wrong_variable_is_reported_with_position() {
    let err = parse("2*t + u", "u").unwrap_err();
    assert_eq!(err.position(), 2);
}
