use proptest::prelude::*;

use solitonic::units::{gravitational_length_m, natural_scales};
use solitonic::variational::{
    energy_idg, energy_newton, energy_yukawa_closed, minimize_spread, minimize_spread_in_unit,
};
use solitonic::{GravityKernel, PhysicalParams};

fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn spread_is_independent_of_the_length_unit(log_m in -18.0..-8.0f64, log_ms in -3.0..20.0f64, log_unit in -3.0..3.0f64) {
        let p = PhysicalParams::idg(10f64.powf(log_m), 10f64.powf(log_ms));
        let l0 = gravitational_length_m(p.mass_kg);
        let a = minimize_spread_in_unit(&p, None).unwrap();
        let b = minimize_spread_in_unit(&p, Some(l0 * 10f64.powf(log_unit))).unwrap();
        prop_assert!(rel(a.sigma_m, b.sigma_m) < 1e-10, "{} {}", a.sigma_m, b.sigma_m);
    }

    #[test]
    fn nonlocal_energy_never_below_newtonian(log_s in -6.0..6.0f64, log_b in -6.0..6.0f64) {
        let (s, b) = (10f64.powf(log_s), 10f64.powf(log_b));
        prop_assert!(energy_idg(s, b) >= energy_newton(s));
    }

    #[test]
    fn yukawa_energy_never_above_newtonian(log_s in -6.0..6.0f64, log_mu in -6.0..6.0f64) {
        let (s, mu) = (10f64.powf(log_s), 10f64.powf(log_mu));
        prop_assert!(energy_yukawa_closed(s, mu) <= energy_newton(s));
    }

    #[test]
    fn nonlocal_kernel_increases_and_bounds_newtonian(log_b in -3.0..3.0f64, log_r in -4.0..4.0f64) {
        let b = 10f64.powf(log_b);
        let r = 10f64.powf(log_r) / b;
        let k = GravityKernel::idg(b);
        let (v, v_out) = (k.eval(r).unwrap(), k.eval(r * 1.01).unwrap());
        prop_assert!(v_out > v);
        prop_assert!(v >= -1.0 / r);
        prop_assert!(GravityKernel::yukawa(b).eval(r).unwrap() <= -1.0 / r);
    }

    #[test]
    fn newtonian_spread_scales_as_inverse_cube(log_m in -18.0..-8.0f64) {
        let m = 10f64.powf(log_m);
        let a = minimize_spread(&PhysicalParams::newtonian(m)).unwrap().sigma_m;
        let b = minimize_spread(&PhysicalParams::newtonian(2.0 * m)).unwrap().sigma_m;
        prop_assert!(rel(a / b, 8.0) < 1e-10);
    }
}

#[test]
fn natural_scales_are_consistent() {
    let p = PhysicalParams::idg(1e-14, 1.0);
    let s = natural_scales(&p).unwrap();
    assert!(rel(s.beta, s.l0_m / s.hbar_c_ev_m) < 1e-14);
    assert!(rel(s.t0_s * s.e0_j, solitonic::units::HBAR) < 1e-14);
}
