//! Numeric checks for each inequality in the error-bound proof chain.
//!
//! The pure vector inequalities are checked on arbitrary inputs. The ones
//! that depend on the optimization (head bounds, final bounds) take a
//! problem, a reference `x` and a recovered `x̂`, and replace the noise
//! budget by an effective one that provably bounds both true residuals, so
//! floating-point residue cannot produce false violations.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::bounds::{
    big_c, big_c_bar, bound_set, c1_tp, shift_constant, shift_lemma_constant, BoundSet,
    PExponent, Regime, Ric,
};
use crate::error::{Error, Result};
use crate::ric::{RicEstimate, RicKind, SensingMatrix};
use crate::solver::{dominates, lp_norm_pth_power, SensingProblem};

pub const CHECK_RTOL: f64 = 1e-9;
pub const CHECK_ATOL: f64 = 1e-12;

fn pth(v: &[f64], p: f64) -> f64 {
    v.iter()
        .filter(|x| **x != 0.0)
        .map(|x| x.abs().powf(p))
        .sum()
}

fn sq(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

/// Zero-safe power: `0^e = 0` for every exponent.
fn zpow(t: f64, e: f64) -> f64 {
    if t == 0.0 {
        0.0
    } else {
        t.powf(e)
    }
}

/// Indices of the `k` largest `|x_i|`, ties to the lower index, in that order.
pub fn largest_k_support(x: &[f64], k: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&i, &j| x[j].abs().total_cmp(&x[i].abs()).then(i.cmp(&j)));
    order.truncate(k);
    order
}

/// An error vector rearranged into blocks of size `k`.
///
/// `values` holds the head block `T0` first, then the complement sorted by
/// decreasing magnitude, then zero padding up to `(l + 1) k` entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionedError {
    pub values: Vec<f64>,
    /// Original coordinate of each entry of `values`; `None` for padding.
    pub source_index: Vec<Option<usize>>,
    pub k: usize,
    /// Number of blocks after the head.
    pub l: usize,
    /// Share of the complement's p-mass carried by the first tail block.
    pub t: f64,
    pub p: PExponent,
}

impl PartitionedError {
    /// Block `i` (`0` is the head).
    pub fn block(&self, i: usize) -> &[f64] {
        &self.values[i * self.k..(i + 1) * self.k]
    }

    pub fn head(&self) -> &[f64] {
        self.block(0)
    }

    /// Everything outside the head.
    pub fn tail(&self) -> &[f64] {
        &self.values[self.k..]
    }

    /// Blocks `2..=l`, the part the proofs push through the matrix.
    pub fn far_tail(&self) -> &[f64] {
        &self.values[(2 * self.k).min(self.values.len())..]
    }

    pub fn tail_p_mass(&self) -> f64 {
        pth(self.tail(), self.p.get())
    }

    pub fn block_p_mass(&self, i: usize) -> f64 {
        pth(self.block(i), self.p.get())
    }

    pub fn block_two_norm(&self, i: usize) -> f64 {
        sq(self.block(i)).sqrt()
    }

    /// `Σ_{i>=2} A h_{T_i}` in the original coordinates.
    pub fn far_tail_image(&self, a: &SensingMatrix) -> Result<DVector<f64>> {
        let mut v = DVector::zeros(a.ncols());
        for (pos, src) in self.source_index.iter().enumerate().skip(2 * self.k) {
            if let Some(j) = *src {
                if j >= a.ncols() {
                    return Err(Error::Dimension("partition does not match A".into()));
                }
                v[j] = self.values[pos];
            }
        }
        Ok(a.matrix() * v)
    }
}

/// Partitions `h` with the given head set; the rest is sorted by `|h|`
/// (ties to the lower index) and padded so at least `min_l` tail blocks exist.
pub fn partition_with_head(
    h: &[f64],
    head: &[usize],
    k: usize,
    p: PExponent,
    min_l: usize,
) -> Result<PartitionedError> {
    let n = h.len();
    if k == 0 || k > n {
        return Err(Error::Dimension(format!("need 1 <= k <= n, got k={k}, n={n}")));
    }
    if head.len() != k {
        return Err(Error::Dimension("head set must have k entries".into()));
    }
    let mut in_head = vec![false; n];
    for &j in head {
        if j >= n || in_head[j] {
            return Err(Error::Dimension("head set must be distinct indices below n".into()));
        }
        in_head[j] = true;
    }
    if h.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("error vector"));
    }
    let mut rest: Vec<usize> = (0..n).filter(|&j| !in_head[j]).collect();
    rest.sort_by(|&i, &j| h[j].abs().total_cmp(&h[i].abs()).then(i.cmp(&j)));

    let l = n.div_ceil(k).saturating_sub(1).max(min_l).max(1);
    let padded = (l + 1) * k;
    let mut source_index: Vec<Option<usize>> = head.iter().chain(&rest).map(|&j| Some(j)).collect();
    source_index.resize(padded, None);
    let values: Vec<f64> = source_index.iter().map(|s| s.map_or(0.0, |j| h[j])).collect();

    let pv = p.get();
    let tail_mass = pth(&values[k..], pv);
    let t = if tail_mass > 0.0 {
        (pth(&values[k..2 * k], pv) / tail_mass).clamp(0.0, 1.0)
    } else {
        0.0
    };
    Ok(PartitionedError {
        values,
        source_index,
        k,
        l,
        t,
        p,
    })
}

/// Partition with the head fixed to the first `k` coordinates.
pub fn partition_vector(h: &[f64], k: usize, p: PExponent) -> Result<PartitionedError> {
    let head: Vec<usize> = (0..k.min(h.len())).collect();
    partition_with_head(h, &head, k, p, 1)
}

/// Partition of `h = x - x̂` with the head on the `k` largest entries of `x`.
pub fn partition_error(x: &[f64], x_hat: &[f64], k: usize, p: PExponent) -> Result<PartitionedError> {
    partition_error_with_blocks(x, x_hat, k, p, 1)
}

/// As [`partition_error`], padding to at least `min_l` tail blocks
/// (`min_l = 3` gives the four-block layout of the `n <= 4k` regime).
pub fn partition_error_with_blocks(
    x: &[f64],
    x_hat: &[f64],
    k: usize,
    p: PExponent,
    min_l: usize,
) -> Result<PartitionedError> {
    if x.len() != x_hat.len() {
        return Err(Error::Dimension("x and x_hat differ in length".into()));
    }
    if k == 0 || k > x.len() {
        return Err(Error::Dimension(format!(
            "need 1 <= k <= n, got k={k}, n={}",
            x.len()
        )));
    }
    let h: Vec<f64> = x.iter().zip(x_hat).map(|(a, b)| a - b).collect();
    partition_with_head(&h, &largest_k_support(x, k), k, p, min_l)
}

/// `||x_{T0^c}||_p^p` with `T0` the `k` largest entries: the best `k`-term
/// approximation error in the p-th power sum.
pub fn best_k_tail(x: &[f64], k: usize, p: PExponent) -> f64 {
    let head = largest_k_support(x, k);
    let mut in_head = vec![false; x.len()];
    for j in head {
        in_head[j] = true;
    }
    let rest: Vec<f64> = x
        .iter()
        .zip(&in_head)
        .filter(|(_, h)| !**h)
        .map(|(v, _)| *v)
        .collect();
    pth(&rest, p.get())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Satisfied,
    Violated,
    /// The inequality's preconditions do not hold; nothing is claimed.
    HypothesesUnmet,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    /// `lhs <= rhs (1 + 1e-9) + 1e-12`.
    pub satisfied: bool,
    pub slack: f64,
    pub verdict: Verdict,
}

impl CheckReport {
    pub fn new(name: impl Into<String>, lhs: f64, rhs: f64) -> Self {
        let satisfied = lhs <= rhs * (1.0 + CHECK_RTOL) + CHECK_ATOL;
        Self {
            name: name.into(),
            lhs,
            rhs,
            satisfied,
            slack: rhs - lhs,
            verdict: if satisfied {
                Verdict::Satisfied
            } else {
                Verdict::Violated
            },
        }
    }

    /// A report whose preconditions failed. `satisfied` still reflects the
    /// arithmetic so the invariant on it holds.
    pub fn unmet(name: impl Into<String>, lhs: f64, rhs: f64) -> Self {
        Self {
            verdict: Verdict::HypothesesUnmet,
            ..Self::new(name, lhs, rhs)
        }
    }

    fn gated(name: &str, lhs: f64, rhs: f64, hypotheses: bool) -> Self {
        if hypotheses {
            Self::new(name, lhs, rhs)
        } else {
            Self::unmet(name, lhs, rhs)
        }
    }

    pub fn is_violation(&self) -> bool {
        self.verdict == Verdict::Violated
    }
}

/// Rigorous upper bound on the rounding error of a computed residual
/// `||y - A v||_2`.
fn residual_rounding(prob: &SensingProblem, v: &DVector<f64>) -> f64 {
    let u = f64::EPSILON / 2.0;
    let (m, n) = (prob.m() as f64, prob.n() as f64);
    2.0 * (n + m + 2.0) * u * (prob.a.matrix().norm() * v.norm() + prob.y.norm())
}

/// Noise level covering both true residuals: `max(eps, ||y - Ax||, ||y - Ax̂||)`
/// with rounding allowance.
pub fn effective_epsilon(prob: &SensingProblem, x: &DVector<f64>, x_hat: &DVector<f64>) -> f64 {
    let rx = prob.residual_norm(x) + residual_rounding(prob, x);
    let rh = prob.residual_norm(x_hat) + residual_rounding(prob, x_hat);
    prob.epsilon.max(rx).max(rh)
}

/// How far `||x̂||_p^p` may exceed `||x||_p^p`, rounding included.
pub fn objective_excess(x: &[f64], x_hat: &[f64], p: PExponent) -> f64 {
    let (ox, oh) = (lp_norm_pth_power(x, p), lp_norm_pth_power(x_hat, p));
    let round = 4.0 * (x.len() as f64 + 1.0) * f64::EPSILON * (ox + oh);
    (oh - ox).max(0.0) + round
}

/// Cone condition `||h_{T0^c}||_p^p <= ||h_{T0}||_p^p + 2 ||x_{T0^c}||_p^p`.
///
/// Needs `||x̂||_p <= ||x||_p`; the small excess allowed by the dominance
/// tolerance is added to the right side.
pub fn check_cone(x: &[f64], x_hat: &[f64], k: usize, p: PExponent) -> Result<CheckReport> {
    let pe = partition_error(x, x_hat, k, p)?;
    let pv = p.get();
    let excess = objective_excess(x, x_hat, p);
    let lhs = pe.tail_p_mass();
    let rhs = pth(pe.head(), pv) + 2.0 * best_k_tail(x, k, p) + excess;
    let dominated = dominates(lp_norm_pth_power(x_hat, p), lp_norm_pth_power(x, p));
    Ok(CheckReport::gated("cone", lhs, rhs, dominated))
}

/// `Σ_{i>=2} ||h_{T_i}||_2^2 <= (1-t) t^{2/p-1} k^{1-2/p} ||h_{T0^c}||_p^2`.
pub fn check_tail_energy(pe: &PartitionedError) -> CheckReport {
    let pv = pe.p.get();
    let k = pe.k as f64;
    let lhs = sq(pe.far_tail());
    let tail_norm_sq = zpow(pe.tail_p_mass(), 2.0 / pv);
    let rhs = (1.0 - pe.t) * zpow(pe.t, 2.0 / pv - 1.0) * k.powf(1.0 - 2.0 / pv) * tail_norm_sq;
    CheckReport::new("tail_energy", lhs, rhs)
}

/// Reverse Hölder: `k^{1/2-1/p} ||u||_p <= ||u||_2` for `u` of length `k`.
pub fn check_reverse_holder(u: &[f64], p: PExponent) -> Result<CheckReport> {
    if u.is_empty() {
        return Err(Error::Dimension("empty vector".into()));
    }
    let pv = p.get();
    let k = u.len() as f64;
    let lhs = k.powf(0.5 - 1.0 / pv) * zpow(pth(u, pv), 1.0 / pv);
    Ok(CheckReport::new("reverse_holder", lhs, sq(u).sqrt()))
}

/// `Σ ω_j <= (Σ ω_j^p)^{1/p}` for nonnegative `ω`.
pub fn check_omega(omega: &[f64], p: PExponent) -> Result<CheckReport> {
    if let Some(&bad) = omega.iter().find(|v| !(**v >= 0.0)) {
        return Err(Error::domain("omega entry", bad, "[0, inf)"));
    }
    let pv = p.get();
    let lhs: f64 = omega.iter().sum();
    Ok(CheckReport::new("omega", lhs, zpow(pth(omega, pv), 1.0 / pv)))
}

fn check_sorted(u: &[f64]) -> Result<()> {
    if let Some(i) = u.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::domain("shift entry", u[i], "[0, inf)"));
    }
    match u.windows(2).position(|w| w[1] > w[0]) {
        Some(i) => Err(Error::NotSorted(i + 1)),
        None => Ok(()),
    }
}

/// Shift inequality `(Σ_{i=l+1}^{l+r} u_i²)^{1/2} <= C (Σ_{i=1}^{r} u_i^p)^{1/p}`
/// for non-increasing nonnegative `u` and `p in (0, 2)`.
pub fn check_shift(u: &[f64], l: usize, r: usize, p: f64) -> Result<CheckReport> {
    check_sorted(u)?;
    let c = shift_lemma_constant(l, r, p)?;
    if u.len() < l + r {
        return Err(Error::Dimension(format!(
            "shift needs at least l + r = {} entries, got {}",
            l + r,
            u.len()
        )));
    }
    let lhs = sq(&u[l..l + r]).sqrt();
    let rhs = c * zpow(pth(&u[..r], p), 1.0 / p);
    Ok(CheckReport::new("shift", lhs, rhs))
}

/// Equal-block form: `(Σ_{i=k+1}^{3k} u_i²)^{1/2} <= C_1(p) k^{1/2-1/p} (Σ_{i=1}^{2k} u_i^p)^{1/p}`.
pub fn check_shift_corollary(u: &[f64], k: usize, p: PExponent) -> Result<CheckReport> {
    check_sorted(u)?;
    let c = shift_constant(p)?;
    if k == 0 || u.len() < 3 * k {
        return Err(Error::Dimension(format!(
            "corollary needs 3k = {} entries, got {}",
            3 * k,
            u.len()
        )));
    }
    let pv = p.get();
    let lhs = sq(&u[k..3 * k]).sqrt();
    let rhs = c * (k as f64).powf(0.5 - 1.0 / pv) * zpow(pth(&u[..2 * k], pv), 1.0 / pv);
    Ok(CheckReport::new("shift_corollary", lhs, rhs))
}

/// `Σ_{i>=2} ||h_{T_i}||_2 <= √2 C_1(p) k^{1/2-1/p} ||h_{T0^c}||_p`.
pub fn check_reverse_block_sum(pe: &PartitionedError) -> Result<CheckReport> {
    let c = shift_constant(pe.p)?;
    let pv = pe.p.get();
    let lhs: f64 = (2..=pe.l).map(|i| pe.block_two_norm(i)).sum();
    let rhs = std::f64::consts::SQRT_2
        * c
        * (pe.k as f64).powf(0.5 - 1.0 / pv)
        * zpow(pe.tail_p_mass(), 1.0 / pv);
    Ok(CheckReport::new("reverse_block_sum", lhs, rhs))
}

/// `||Σ_{i>=2} A h_{T_i}||_2² <= C_1(t,p) k^{1-2/p} ||h_{T0^c}||_p²`.
///
/// Only an exactly computed constant of order `2k` is accepted.
pub fn check_a_blocksum(
    a: &SensingMatrix,
    pe: &PartitionedError,
    delta: &RicEstimate,
) -> Result<CheckReport> {
    if delta.kind != RicKind::Exact || delta.order != 2 * pe.k {
        return Err(Error::InexactRic(2 * pe.k));
    }
    let lhs = pe.far_tail_image(a)?.norm_squared();
    if delta.rip_fails {
        return Ok(CheckReport::unmet("a_blocksum", lhs, f64::NAN));
    }
    let pv = pe.p.get();
    let c = c1_tp(pe.t, pe.p, delta.as_ric()?)?;
    let rhs = c * (pe.k as f64).powf(1.0 - 2.0 / pv) * zpow(pe.tail_p_mass(), 2.0 / pv);
    Ok(CheckReport::new("a_blocksum", lhs, rhs))
}

/// The constant is usable by the optimization-dependent inequalities: an
/// upper bound below one at order `2k`.
fn usable_constant(delta: &RicEstimate, k: usize) -> Option<Ric> {
    (delta.is_upper_bound() && !delta.rip_fails && delta.order == 2 * k)
        .then(|| delta.as_ric().ok())
        .flatten()
}

/// `||h_{T0}||_2² + ||h_{T1}||_2² <= (2 eps + ||Σ_{i>=2} A h_{T_i}||_2)² / (1 - δ_{2k})`.
pub fn check_head_energy(
    prob: &SensingProblem,
    x: &DVector<f64>,
    x_hat: &DVector<f64>,
    delta: &RicEstimate,
    p: PExponent,
) -> Result<CheckReport> {
    let pe = partition_error(x.as_slice(), x_hat.as_slice(), prob.k, p)?;
    let eps = effective_epsilon(prob, x, x_hat);
    let lhs = sq(pe.head()) + sq(pe.block(1));
    let image = pe.far_tail_image(&prob.a)?.norm();
    Ok(match usable_constant(delta, prob.k) {
        Some(d) => CheckReport::new("head_energy", lhs, (2.0 * eps + image).powi(2) / (1.0 - d.get())),
        None => CheckReport::unmet("head_energy", lhs, f64::NAN),
    })
}

/// Head bound in the p-th power sum: the general form with `C(p)`, or the
/// four-block form with `C̄(p)` when `regime` is the `n <= 4k` one.
///
/// The constant is raised to `√2/2` if smaller; the statement only needs an
/// upper bound in `[√2/2, 1)`.
pub fn check_head_p_bound(
    prob: &SensingProblem,
    x: &DVector<f64>,
    x_hat: &DVector<f64>,
    delta: &RicEstimate,
    p: PExponent,
    regime: Regime,
) -> Result<CheckReport> {
    let k = prob.k;
    let special = regime == Regime::SpecialNLe4k;
    let name = if special { "head_p_bound_special" } else { "head_p_bound" };
    let pe = partition_error_with_blocks(x.as_slice(), x_hat.as_slice(), k, p, if special { 3 } else { 1 })?;
    let pv = p.get();
    let lhs = pth(pe.head(), pv);
    let regime_ok = !special || pe.l == 3;
    let (Some(d), true, true) = (usable_constant(delta, k), regime_ok, pv < 1.0) else {
        return Ok(CheckReport::unmet(name, lhs, f64::NAN));
    };
    let d = d.lifted_to_theorem_range();
    let eps = effective_epsilon(prob, x, x_hat);
    let (lead, c) = if special {
        ((pv + 1.0).exp2(), big_c_bar(p, d)?)
    } else {
        ((1.5 * pv).exp2(), big_c(p, d)?)
    };
    let noise = lead / (1.0 - d.get()).powf(pv / 2.0) * (k as f64).powf(1.0 - pv / 2.0) * zpow(eps, pv);
    Ok(CheckReport::new(name, lhs, noise + c * pe.tail_p_mass()))
}

/// Everything computed while checking the final error bounds of one pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoremCheck {
    /// Constants at the (possibly raised) constant actually used.
    pub bounds: BoundSet,
    pub eps_eff: f64,
    /// `||x_{T0^c}||_p^p`.
    pub tail: f64,
    /// `tail` plus half the objective excess.
    pub tail_eff: f64,
    pub certified: bool,
    pub error_p_pow: f64,
    pub error_2_pow: f64,
    pub rhs_pnorm: Option<f64>,
    pub rhs_2norm: Option<f64>,
    pub rhs_pnorm_special: Option<f64>,
    pub rhs_2norm_special: Option<f64>,
    pub reports: Vec<CheckReport>,
}

impl TheoremCheck {
    pub fn any_violation(&self) -> bool {
        self.reports.iter().any(CheckReport::is_violation)
    }

    pub fn all_unmet(&self) -> bool {
        self.reports
            .iter()
            .all(|r| r.verdict == Verdict::HypothesesUnmet)
    }
}

/// Checks `||h||_p^p` and `||h||_2^p` against the bounds of `regime`.
///
/// Hypotheses: `x̂` feasible, `||x̂||_p <= ||x||_p`, an upper bound on
/// `δ_{2k}` whose constants are valid for `p`, and `n <= 4k` for the special
/// regime. When any fails the reports are marked, not judged.
pub fn check_theorem_bounds(
    prob: &SensingProblem,
    x: &DVector<f64>,
    x_hat: &DVector<f64>,
    delta: &RicEstimate,
    p: PExponent,
    regime: Regime,
) -> Result<TheoremCheck> {
    let n = prob.n();
    if x.len() != n || x_hat.len() != n {
        return Err(Error::Dimension("x, x_hat and A disagree on n".into()));
    }
    let k = prob.k;
    let pv = p.get();
    let d = Ric::new(delta.delta.min(1.0 - 1e-15))?.lifted_to_theorem_range();
    let bounds = bound_set(p, d, regime);

    let eps_eff = effective_epsilon(prob, x, x_hat);
    let tail = best_k_tail(x.as_slice(), k, p);
    let tail_eff = tail + objective_excess(x.as_slice(), x_hat.as_slice(), p) / 2.0;
    let h = x - x_hat;
    let error_p_pow = lp_norm_pth_power(h.as_slice(), p);
    let error_2_pow = zpow(h.norm(), pv);

    let certified = prob.is_feasible(x_hat)
        && dominates(
            lp_norm_pth_power(x_hat.as_slice(), p),
            lp_norm_pth_power(x.as_slice(), p),
        );
    let hypotheses = certified
        && usable_constant(delta, k).is_some()
        && bounds.valid
        && (regime == Regime::General || n <= 4 * k);

    let rhs_pnorm = bounds.pnorm_rhs(tail_eff, k, eps_eff);
    let rhs_2norm = bounds.two_norm_rhs(tail_eff, k, eps_eff);
    let rhs_pnorm_special = bounds.pnorm_rhs_special(tail_eff, k, eps_eff);
    let rhs_2norm_special = bounds.two_norm_rhs_special(tail_eff, k, eps_eff);
    let (names, rhs) = match regime {
        Regime::General => (["pnorm_bound", "two_norm_bound"], [rhs_pnorm, rhs_2norm]),
        Regime::SpecialNLe4k => (
            ["pnorm_bound_special", "two_norm_bound_special"],
            [rhs_pnorm_special, rhs_2norm_special],
        ),
    };
    let reports = names
        .iter()
        .zip(rhs)
        .zip([error_p_pow, error_2_pow])
        .map(|((name, rhs), lhs)| CheckReport::gated(name, lhs, rhs.unwrap_or(f64::NAN), hypotheses))
        .collect();

    Ok(TheoremCheck {
        bounds,
        eps_eff,
        tail,
        tail_eff,
        certified,
        error_p_pow,
        error_2_pow,
        rhs_pnorm,
        rhs_2norm,
        rhs_pnorm_special,
        rhs_2norm_special,
        reports,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(v: f64) -> PExponent {
        PExponent::new(v).unwrap()
    }

    #[test]
    fn report_tolerance_boundary() {
        assert!(CheckReport::new("x", 1.0 + 0.5e-9, 1.0).satisfied);
        assert!(!CheckReport::new("x", 1.0 + 2e-9, 1.0).satisfied);
        assert!(CheckReport::new("x", 1e-12, 0.0).satisfied);
        assert!(!CheckReport::new("x", 1.0, f64::NAN).satisfied);
    }

    #[test]
    fn equal_vectors_give_zero_error() {
        let x = [0.0, 3.0, -1.0, 0.5, 0.0, 2.0];
        let pe = partition_error(&x, &x, 2, p(0.5)).unwrap();
        assert!(pe.values.iter().all(|v| *v == 0.0));
        assert_eq!(pe.t, 0.0);
        let cone = check_cone(&x, &x, 2, p(0.5)).unwrap();
        assert!(cone.satisfied && cone.lhs == 0.0);
    }

    #[test]
    fn four_k_gives_three_tail_blocks() {
        let h: Vec<f64> = (0..12).map(|i| i as f64).collect();
        let pe = partition_vector(&h, 3, p(0.5)).unwrap();
        assert_eq!(pe.l, 3);
        assert_eq!(pe.values.len(), 12);
        // Non-multiple lengths are zero padded.
        let pe = partition_vector(&h[..10], 3, p(0.5)).unwrap();
        assert_eq!((pe.l, pe.values.len()), (3, 12));
        assert_eq!(pe.source_index[10..], [None, None]);
    }

    #[test]
    fn tail_sorted_with_index_ties() {
        let h = [9.0, 1.0, -2.0, 2.0, 0.5, -2.0];
        let pe = partition_vector(&h, 1, p(0.5)).unwrap();
        let order: Vec<usize> = pe.source_index.iter().map(|s| s.unwrap()).collect();
        assert_eq!(order, vec![0, 2, 3, 5, 1, 4]);
    }

    #[test]
    fn head_is_largest_entries_of_reference() {
        assert_eq!(largest_k_support(&[0.1, -5.0, 2.0, 5.0], 2), vec![1, 3]);
        assert!((best_k_tail(&[0.25, -5.0, 1.0, 5.0], 2, p(0.5)) - 1.5).abs() < 1e-15);
    }

    #[test]
    fn k_larger_than_n_rejected() {
        assert!(partition_error(&[1.0], &[0.0], 2, p(0.5)).is_err());
    }

    #[test]
    fn shift_rejects_unsorted() {
        assert!(matches!(
            check_shift(&[1.0, 2.0, 0.5], 1, 1, 0.5),
            Err(Error::NotSorted(1))
        ));
    }

    #[test]
    fn constant_vector_holder_equality() {
        let r = check_reverse_holder(&[0.7; 5], p(0.3)).unwrap();
        assert!((r.lhs - r.rhs).abs() < 1e-12 * r.rhs);
    }

    #[test]
    fn constant_vector_shift_closed_form() {
        // u ≡ 1 on 3k entries, k = 5, p = 1/2: lhs = √10, and the
        // corollary's right side is C_1(1/2) 5^{-3/2} 10^2.
        let u = [1.0; 15];
        let r = check_shift_corollary(&u, 5, p(0.5)).unwrap();
        assert!((r.lhs - 10f64.sqrt()).abs() < 1e-14);
        let expected = 2f64.powf(-1.5) * 5f64.powf(-1.5) * 100.0;
        assert!((r.rhs - expected).abs() < 1e-12 * expected);
        assert!(r.satisfied);
    }

    #[test]
    fn a_blocksum_rejects_sampled_constant() {
        let a = SensingMatrix::from_rows(&[vec![1.0, 0.0, 0.0, 0.0], vec![0.0, 1.0, 0.0, 0.0]])
            .unwrap();
        let pe = partition_vector(&[1.0, 0.5, 0.25, 0.1], 1, p(0.5)).unwrap();
        let sampled = RicEstimate {
            delta: 0.5,
            order: 2,
            kind: RicKind::SampledLowerBound,
            argmax_subset: vec![],
            rip_fails: false,
        };
        assert!(matches!(
            check_a_blocksum(&a, &pe, &sampled),
            Err(Error::InexactRic(2))
        ));
    }
}
