//! Scalar values frozen from a 60-digit independent evaluation
//! (`fixtures/golden_oracle.py`), compared at relative 1e-12.

use std::collections::HashMap;

use lp_recovery::bounds::*;

fn golden() -> HashMap<String, f64> {
    include_str!("fixtures/golden.txt")
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            let (k, v) = l.split_once(' ').unwrap();
            (k.to_string(), v.trim().parse().unwrap())
        })
        .collect()
}

fn close(name: &str, got: f64, want: f64) {
    let rel = ((got - want) / want).abs();
    assert!(rel <= 1e-12, "{name}: got {got:e}, want {want:e}, rel {rel:e}");
}

fn p(v: f64) -> PExponent {
    PExponent::new(v).unwrap()
}

fn d(v: f64) -> Ric {
    Ric::new(v).unwrap()
}

#[test]
fn scalar_functions() {
    let g_ = golden();
    close("p_star", p_star().get(), g_["p_star"]);
    close("f_0.5", f(p(0.5)), g_["f_0.5"]);
    close("g_0.5", g(p(0.5)), g_["g_0.5"]);
    close("h_pstar", h(p_star()).unwrap(), g_["h_pstar"]);
    close(
        "p_bar_sqrt2_2",
        p_bar(d(std::f64::consts::FRAC_1_SQRT_2)).unwrap().get(),
        g_["p_bar_sqrt2_2"],
    );
}

#[test]
fn constants_on_both_branches() {
    let g_ = golden();
    close("big_c_0.4_0.8", big_c(p(0.4), d(0.8)).unwrap(), g_["big_c_0.4_0.8"]);
    close("big_d_0.4_0.8", big_d(p(0.4), d(0.8)).unwrap(), g_["big_d_0.4_0.8"]);
    close("big_c_0.6_0.72", big_c(p(0.6), d(0.72)).unwrap(), g_["big_c_0.6_0.72"]);
    close("big_d_0.6_0.72", big_d(p(0.6), d(0.72)).unwrap(), g_["big_d_0.6_0.72"]);
    close(
        "big_c_bar_0.5_0.72",
        big_c_bar(p(0.5), d(0.72)).unwrap(),
        g_["big_c_bar_0.5_0.72"],
    );
    close(
        "big_d_bar_0.5_0.72",
        big_d_bar(p(0.5), d(0.72)).unwrap(),
        g_["big_d_bar_0.5_0.72"],
    );
}

#[test]
fn branches_meet_at_threshold_exponent() {
    let g_ = golden();
    close("left == right (C)", g_["big_c_pstar_0.75_left"], g_["big_c_pstar_0.75_right"]);
    close("left == right (D)", g_["big_d_pstar_0.75_left"], g_["big_d_pstar_0.75_right"]);
    close("big_c at p*", big_c(p_star(), d(0.75)).unwrap(), g_["big_c_pstar_0.75_left"]);
    close("big_d at p*", big_d(p_star(), d(0.75)).unwrap(), g_["big_d_pstar_0.75_left"]);
    // Just above the threshold the right branch is used and agrees.
    let above = p(p_star().get() + 1e-12);
    let c = big_c(above, d(0.75)).unwrap();
    assert!((c - g_["big_c_pstar_0.75_right"]).abs() < 1e-9);
}

#[test]
fn general_bound_set() {
    let g_ = golden();
    let b = bound_set(p(0.4), d(0.8), Regime::General);
    assert!(b.valid && b.general_condition);
    close("c_p", b.c_p, g_["general_0.4_0.8_c_p"]);
    close("c0", b.c0.unwrap(), g_["general_0.4_0.8_c0"]);
    close("c1", b.c1.unwrap(), g_["general_0.4_0.8_c1"]);
    close("d_p", b.d_p, g_["general_0.4_0.8_d_p"]);
    close("d0", b.d0.unwrap(), g_["general_0.4_0.8_d0"]);
    close("d1", b.d1.unwrap(), g_["general_0.4_0.8_d1"]);
}

#[test]
fn special_bound_set() {
    let g_ = golden();
    let ps = 0.7 * special_p_limit(d(0.75)).unwrap().get();
    close("special_p", ps, g_["special_p"]);
    let b = bound_set(p(ps), d(0.75), Regime::SpecialNLe4k);
    assert!(b.valid && b.special_condition);
    close("c_bar", b.c_bar, g_["special_0.75_c_bar"]);
    close("c0_bar", b.c0_bar.unwrap(), g_["special_0.75_c0_bar"]);
    close("c1_bar", b.c1_bar.unwrap(), g_["special_0.75_c1_bar"]);
    close("d_bar", b.d_bar, g_["special_0.75_d_bar"]);
    close("d0_bar", b.d0_bar.unwrap(), g_["special_0.75_d0_bar"]);
    close("d1_bar", b.d1_bar.unwrap(), g_["special_0.75_d1_bar"]);
}

#[test]
fn closed_form_scalars() {
    // f(1) = √2/2, g(1) = 1/4, φ1(1/2) = 1/3, φ(1) = 6 - 4√2.
    let sqrt2 = std::f64::consts::SQRT_2;
    close("f(1)", f(p(1.0)), sqrt2 / 2.0);
    close("g(1)", g(p(1.0)), 0.25);
    close("phi1(1/2)", phi1(0.5).unwrap(), 1.0 / 3.0);
    close("varphi(1)", varphi(p(1.0)), 6.0 - 4.0 * sqrt2);
}
