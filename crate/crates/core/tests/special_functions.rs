//! Error-function accuracy against 30-digit reference values.

use solitonic::special::{erf, erfcx, yukawa_bracket};

fn table(src: &str) -> Vec<(f64, f64)> {
    src.lines()
        .filter(|l| !l.starts_with('#') && !l.trim().is_empty())
        .map(|l| {
            let (x, y) = l.split_once(',').unwrap();
            // parsing the 30-digit decimal gives the correctly rounded double
            (x.parse().unwrap(), y.parse().unwrap())
        })
        .collect()
}

fn ulps(a: f64, b: f64) -> u64 {
    assert_eq!(a.is_sign_negative(), b.is_sign_negative());
    (a.to_bits() as i64 - b.to_bits() as i64).unsigned_abs()
}

#[test]
fn erf_within_two_ulp() {
    let rows = table(include_str!("data_erf_reference.csv"));
    assert!(rows.len() > 25);
    for (x, want) in rows {
        let got = erf(x);
        assert!(ulps(got, want) <= 2, "erf({x}) = {got:e}, want {want:e}");
        assert!(ulps(erf(-x), -want) <= 2);
    }
}

#[test]
fn erfcx_relative_accuracy() {
    for (x, want) in table(include_str!("data_erfcx_reference.csv")) {
        let got = erfcx(x);
        assert!(
            ((got - want) / want).abs() < 5e-14,
            "erfcx({x}) = {got:e}, want {want:e}"
        );
    }
}

#[test]
fn yukawa_bracket_consistent_with_erfcx() {
    for (x, e) in table(include_str!("data_erfcx_reference.csv")) {
        if x > 0.0 && x < 5.0 {
            let b = 1.0 - std::f64::consts::PI.sqrt() * x * e;
            assert!((yukawa_bracket(x) - b).abs() < 1e-13, "x={x}");
        }
    }
}
