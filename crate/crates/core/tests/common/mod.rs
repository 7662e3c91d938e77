//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use lp_recovery::bounds::PExponent;
use lp_recovery::ric::colex_subsets;
use lp_recovery::solver::{lp_norm_pth_power, SensingProblem};
use nalgebra::{DMatrix, DVector};

/// Global minimizer of `||γ||_p^p` subject to `Aγ = y` for `p < 1`.
///
/// The objective is concave on each orthant, so a minimizer sits at a basic
/// solution: enumerate every support of size at most `m` with independent
/// columns, solve exactly, keep the feasible one with the smallest objective.
/// Ties go to the smaller support, then colex order.
pub fn brute_force_noiseless(prob: &SensingProblem, p: PExponent) -> DVector<f64> {
    let a = prob.a.matrix();
    let (m, n) = (a.nrows(), a.ncols());
    let tol = 1e-9 * prob.y.norm().max(1.0);
    let mut best: Option<(f64, DVector<f64>)> = None;
    if prob.y.norm() == 0.0 {
        return DVector::zeros(n);
    }
    for s in 1..=m {
        for support in colex_subsets(n, s) {
            let a_s = DMatrix::from_fn(m, s, |i, j| a[(i, support[j])]);
            let svd = a_s.clone().svd(true, true);
            if svd.singular_values.min() <= 1e-10 * svd.singular_values.max() {
                continue;
            }
            let coef = svd.solve(&prob.y, 0.0).unwrap();
            if (&a_s * &coef - &prob.y).norm() > tol {
                continue;
            }
            let mut x = DVector::zeros(n);
            for (c, &j) in coef.iter().zip(&support) {
                x[j] = *c;
            }
            let obj = lp_norm_pth_power(x.as_slice(), p);
            if best.as_ref().map_or(true, |(b, _)| obj < *b * (1.0 - 1e-12)) {
                best = Some((obj, x));
            }
        }
    }
    best.expect("full row rank guarantees a basic solution").1
}

/// Largest eigenvalue gap of every `k`-column Gram matrix, computed the slow
/// way from scratch for each subset.
pub fn ric_by_definition(a: &DMatrix<f64>, k: usize) -> f64 {
    let n = a.ncols();
    let mut worst: f64 = 0.0;
    for support in colex_subsets(n, k) {
        let a_s = DMatrix::from_fn(a.nrows(), k, |i, j| a[(i, support[j])]);
        let eig = (a_s.transpose() * &a_s).symmetric_eigenvalues();
        worst = worst.max(eig.max() - 1.0).max(1.0 - eig.min());
    }
    worst
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
