//! Closed-form scalar functions behind the recovery guarantees.
//!
//! Everything here is a pure function of the exponent `p` and the
//! restricted isometry constant `delta` of order `2k`. The threshold `p*`
//! (root of `f(p) = 1`) splits most piecewise definitions: `p <= p*` takes
//! the left branch, `p > p*` the right one.

use std::f64::consts::{FRAC_1_SQRT_2, SQRT_2};
use std::fmt;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Exponent of the lp quasi-norm, `0 < p <= 1`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct PExponent(f64);

impl PExponent {
    pub fn new(p: f64) -> Result<Self> {
        if p.is_finite() && p > 0.0 && p <= 1.0 {
            Ok(Self(p))
        } else {
            Err(Error::domain("p", p, "(0, 1]"))
        }
    }

    #[inline]
    pub fn get(self) -> f64 {
        self.0
    }

    /// Theorem constants are only defined on the open interval `(0, 1)`.
    pub fn require_below_one(self) -> Result<Self> {
        if self.0 < 1.0 {
            Ok(self)
        } else {
            Err(Error::domain("p", self.0, "(0, 1)"))
        }
    }

    /// True when `p` falls in the left branch `(0, p*]`.
    pub fn is_left_branch(self) -> bool {
        self.0 <= p_star().0
    }
}

impl TryFrom<f64> for PExponent {
    type Error = Error;
    fn try_from(p: f64) -> Result<Self> {
        Self::new(p)
    }
}

impl From<PExponent> for f64 {
    fn from(p: PExponent) -> f64 {
        p.0
    }
}

impl fmt::Display for PExponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// A restricted isometry constant usable in the bounds, `0 <= delta < 1`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Ric(f64);

impl Ric {
    pub fn new(delta: f64) -> Result<Self> {
        if delta.is_finite() && (0.0..1.0).contains(&delta) {
            Ok(Self(delta))
        } else {
            Err(Error::domain("delta", delta, "[0, 1)"))
        }
    }

    #[inline]
    pub fn get(self) -> f64 {
        self.0
    }

    /// Whether `delta` lies in `[sqrt(2)/2, 1)`, the range the theorems address.
    pub fn in_theorem_range(self) -> bool {
        self.0 >= FRAC_1_SQRT_2
    }

    /// Any constant at least as large as the true RIC also satisfies the
    /// isometry inequalities, so lifting to `sqrt(2)/2` keeps the bounds valid.
    pub fn lifted_to_theorem_range(self) -> Self {
        Self(self.0.max(FRAC_1_SQRT_2))
    }
}

impl TryFrom<f64> for Ric {
    type Error = Error;
    fn try_from(d: f64) -> Result<Self> {
        Self::new(d)
    }
}

impl From<Ric> for f64 {
    fn from(d: Ric) -> f64 {
        d.0
    }
}

/// `f(p) = (p/2)^{1/2} (2-p)^{1/p - 1/2}`, strictly decreasing on `(0, 1]`.
pub fn f(p: PExponent) -> f64 {
    ln_f(p.0).exp()
}

fn ln_f(p: f64) -> f64 {
    0.5 * (p / 2.0).ln() + (1.0 / p - 0.5) * (2.0 - p).ln()
}

/// `g(p) = (p/2)(1 - p/2)^{2/p - 1}`, strictly increasing with `g(1) = 1/4`.
pub fn g(p: PExponent) -> f64 {
    let p = p.0;
    (p / 2.0) * ((2.0 / p - 1.0) * (1.0 - p / 2.0).ln()).exp()
}

/// Unique root of `f(p) = 1` on `(0, 1]`, approximately 0.45418.
///
/// Computed once by bisection on `ln f` over `[1e-6, 1]` and cached.
pub fn p_star() -> PExponent {
    static P_STAR: OnceLock<f64> = OnceLock::new();
    PExponent(*P_STAR.get_or_init(|| bisect_decreasing(ln_f, 1e-6, 1.0, 1e-13)))
}

/// Root of a strictly decreasing function with `func(lo) > 0 > func(hi)`.
fn bisect_decreasing(func: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    debug_assert!(func(lo) > 0.0 && func(hi) < 0.0);
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if func(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Piecewise-linear threshold: `delta <= h(p)` guarantees `C(p) < 1`.
pub fn h(p: PExponent) -> Result<f64> {
    let p = p.require_below_one()?;
    let slope = if p.is_left_branch() { 0.5 } else { 0.62 };
    Ok(1.0 - slope * p.0)
}

/// Largest admissible exponent for the general case at a given `delta`.
pub fn p_bar(delta: Ric) -> Result<PExponent> {
    let d = delta.0;
    if d < FRAC_1_SQRT_2 {
        return Err(Error::domain("delta", d, "[sqrt(2)/2, 1); use p = 1 below sqrt(2)/2"));
    }
    let p = if d < 0.7183 {
        50.0 / 31.0 * (1.0 - d)
    } else if d < 0.7729 {
        p_star().0
    } else {
        2.0 * (1.0 - d)
    };
    PExponent::new(p)
}

/// Admissible exponent limit when `n <= 4k`: `((3 + 2 sqrt 2)/2)(1 - delta)`.
///
/// Capped just below 1 since the theorem constants require `p < 1`.
pub fn special_p_limit(delta: Ric) -> Result<PExponent> {
    if !delta.in_theorem_range() {
        return Err(Error::domain("delta", delta.0, "[sqrt(2)/2, 1)"));
    }
    let p = (3.0 + 2.0 * SQRT_2) / 2.0 * (1.0 - delta.0);
    PExponent::new(p.min(1.0 - 1e-12))
}

/// Right-hand side of the special-case threshold line, `1 - (6 - 4 sqrt 2) p`.
pub fn special_threshold_line(p: PExponent) -> f64 {
    1.0 - (6.0 - 4.0 * SQRT_2) * p.0
}

/// Coefficient multiplying `delta` inside `C(p)`, `C_1(t,p)` and friends:
/// `2 g(p)` on the left branch, `2^{2 - 2/p}` on the right.
fn cross_term(p: PExponent) -> f64 {
    if p.is_left_branch() {
        2.0 * g(p)
    } else {
        (2.0 - 2.0 / p.0).exp2()
    }
}

/// `C(p)`; the general-case guarantees need `C(p) < 1`.
pub fn big_c(p: PExponent, delta: Ric) -> Result<f64> {
    let p = p.require_below_one()?;
    Ok(big_c_unchecked(p, delta))
}

fn big_c_unchecked(p: PExponent, delta: Ric) -> f64 {
    let (pv, d) = (p.0, delta.0);
    let lead = (2.0 - d).powf(1.0 - 2.0 / pv) * g(p);
    ((lead + cross_term(p) * d) / (1.0 - d)).powf(pv / 2.0)
}

/// `D(p)`, the coefficient in the l2 error bound of the general case.
pub fn big_d(p: PExponent, delta: Ric) -> Result<f64> {
    let p = p.require_below_one()?;
    Ok(big_d_unchecked(p, delta))
}

fn big_d_unchecked(p: PExponent, delta: Ric) -> f64 {
    let (pv, d) = (p.0, delta.0);
    // Left branch (2 + d) g(p) equals (2 - d) g(p) + 2 g(p) d.
    (((2.0 - d) * g(p) + cross_term(p) * d) / (1.0 - d)).powf(pv / 2.0)
}

/// `C̄(p) = (1 + delta) 2^{p/2 - 1} (g(p) / (1 - delta))^{p/2}`.
pub fn big_c_bar(p: PExponent, delta: Ric) -> Result<f64> {
    let p = p.require_below_one()?;
    Ok(big_c_bar_unchecked(p, delta))
}

fn big_c_bar_unchecked(p: PExponent, delta: Ric) -> f64 {
    let (pv, d) = (p.0, delta.0);
    (1.0 + d) * (pv / 2.0 - 1.0).exp2() * (g(p) / (1.0 - d)).powf(pv / 2.0)
}

/// `D̄(p) = (2 g(p) / (1 - delta))^{p/2}`.
pub fn big_d_bar(p: PExponent, delta: Ric) -> Result<f64> {
    let p = p.require_below_one()?;
    Ok(big_d_bar_unchecked(p, delta))
}

fn big_d_bar_unchecked(p: PExponent, delta: Ric) -> f64 {
    (2.0 * g(p) / (1.0 - delta.0)).powf(p.0 / 2.0)
}

/// `t^e` with the convention `0^e = 0` for `e > 0`.
fn tpow(t: f64, e: f64) -> f64 {
    if t == 0.0 {
        0.0
    } else {
        t.powf(e)
    }
}

fn check_t(t: f64) -> Result<()> {
    if (0.0..=1.0).contains(&t) {
        Ok(())
    } else {
        Err(Error::domain("t", t, "[0, 1]"))
    }
}

/// `C_1(t,p) = (1-t) t^{2/p-1} + cross(p) delta`, the block-sum coefficient.
pub fn c1_tp(t: f64, p: PExponent, delta: Ric) -> Result<f64> {
    check_t(t)?;
    let p = p.require_below_one()?;
    Ok((1.0 - t) * tpow(t, 2.0 / p.0 - 1.0) + cross_term(p) * delta.0)
}

/// `C_2(t,p) = (delta - 2) t^{2/p} + t^{2/p-1} + cross(p) delta`.
pub fn c2_tp(t: f64, p: PExponent, delta: Ric) -> Result<f64> {
    check_t(t)?;
    let p = p.require_below_one()?;
    let d = delta.0;
    Ok((d - 2.0) * tpow(t, 2.0 / p.0) + tpow(t, 2.0 / p.0 - 1.0) + cross_term(p) * d)
}

/// `C_3(t,p) = (2 - delta)(1-t) t^{2/p-1} + cross(p) delta`.
pub fn c3_tp(t: f64, p: PExponent, delta: Ric) -> Result<f64> {
    check_t(t)?;
    let p = p.require_below_one()?;
    let d = delta.0;
    Ok((2.0 - d) * (1.0 - t) * tpow(t, 2.0 / p.0 - 1.0) + cross_term(p) * d)
}

/// Closed-form maximizer of `C_1(·, p)` over `[0, 1]`.
pub fn c1_tp_argmax(p: PExponent) -> f64 {
    1.0 - p.0 / 2.0
}

/// Closed-form maximizer of `C_2(·, p)` over `[0, 1]`.
pub fn c2_tp_argmax(p: PExponent, delta: Ric) -> f64 {
    (2.0 - p.0) / (2.0 * (2.0 - delta.0))
}

/// Shift-inequality constant `C_1(p)` for blocks of equal size `k`
/// (the factor in front of `k^{1/2 - 1/p}`).
pub fn shift_constant(p: PExponent) -> Result<f64> {
    let p = p.require_below_one()?;
    let pv = p.0;
    Ok(if p.is_left_branch() {
        (pv / 2.0).sqrt() * (2.0 / (2.0 - pv)).powf(0.5 - 1.0 / pv)
    } else {
        (0.5 - 1.0 / pv).exp2()
    })
}

/// The older single-branch constant `p^{1/2} (2/(2-p))^{1/2 - 1/p}` that
/// [`shift_constant`] improves on for `p > p*`.
pub fn shift_constant_prior(p: PExponent) -> f64 {
    let pv = p.0;
    pv.sqrt() * (2.0 / (2.0 - pv)).powf(0.5 - 1.0 / pv)
}

/// General shift-inequality constant
/// `max{ r^{1/2-1/p}, (p/2)^{1/2} (2l/(2-p))^{1/2-1/p} }` for `p in (0, 2)`.
pub fn shift_lemma_constant(l: usize, r: usize, p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 2.0) {
        return Err(Error::domain("p", p, "(0, 2)"));
    }
    if l == 0 || r == 0 {
        return Err(Error::Dimension("shift lemma needs l >= 1 and r >= 1".into()));
    }
    let e = 0.5 - 1.0 / p;
    let first = (r as f64).powf(e);
    let second = (p / 2.0).sqrt() * (2.0 * l as f64 / (2.0 - p)).powf(e);
    Ok(first.max(second))
}

/// `φ_1(t) = ((1-t)/(1+t))^{1/t - 1}`, increasing on `(0, 1)`.
pub fn phi1(t: f64) -> Result<f64> {
    check_open_unit(t, "t")?;
    Ok(((1.0 - t) / (1.0 + t)).powf(1.0 / t - 1.0))
}

/// `φ_2(t) = (1-t)^{1/t}`, decreasing on `(0, 1)`.
pub fn phi2(t: f64) -> Result<f64> {
    check_open_unit(t, "t")?;
    Ok((1.0 - t).powf(1.0 / t))
}

fn check_open_unit(t: f64, what: &'static str) -> Result<()> {
    if t > 0.0 && t < 1.0 {
        Ok(())
    } else {
        Err(Error::domain(what, t, "(0, 1)"))
    }
}

const THREE_MINUS_2SQRT2: f64 = 3.0 - 2.0 * SQRT_2;

/// `φ(p) = (1 - (3 - 2 sqrt 2) p)^{2/p} (1 - p/2)^{2/p - 1}`, increasing on `(0, 1]`.
pub fn varphi(p: PExponent) -> f64 {
    let pv = p.0;
    ((2.0 / pv) * (1.0 - THREE_MINUS_2SQRT2 * pv).ln()
        + (2.0 / pv - 1.0) * (1.0 - pv / 2.0).ln())
    .exp()
}

/// Auxiliary `φ̄(p)`; non-positive on `(0, 1]`, which makes `φ` increasing.
pub fn varphi_bar(p: PExponent) -> f64 {
    let pv = p.0;
    let a = THREE_MINUS_2SQRT2 * pv;
    a / (1.0 - a) + pv / 2.0 + (1.0 - a).ln() + (1.0 - pv / 2.0).ln()
}

/// Which family of constants a [`BoundSet`] is judged by.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    General,
    /// `n <= 4k`, handled with exactly four blocks.
    SpecialNLe4k,
}

impl std::str::FromStr for Regime {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "general" => Ok(Regime::General),
            "special" | "special_n_le_4k" => Ok(Regime::SpecialNLe4k),
            other => Err(Error::Parse(format!("unknown regime `{other}`"))),
        }
    }
}

/// Every constant entering the error bounds for one `(p, delta)` pair.
///
/// Derived constants are `None` when their denominator condition
/// (`C(p) < 1`, resp. `C̄(p) < 1`) fails or `p = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundSet {
    pub p: f64,
    pub delta: f64,
    pub regime: Regime,
    pub c_p: f64,
    pub c0: Option<f64>,
    pub c1: Option<f64>,
    pub d_p: f64,
    pub d0: Option<f64>,
    pub d1: Option<f64>,
    pub c_bar: f64,
    pub c0_bar: Option<f64>,
    pub c1_bar: Option<f64>,
    pub d_bar: f64,
    pub d0_bar: Option<f64>,
    pub d1_bar: Option<f64>,
    pub general_condition: bool,
    pub special_condition: bool,
    pub delta_in_range: bool,
    /// The selected regime's condition holds and its constants are finite.
    pub valid: bool,
}

/// Populates a [`BoundSet`]. A failed condition is reported through the
/// flags, not as an error.
pub fn bound_set(p: PExponent, delta: Ric, regime: Regime) -> BoundSet {
    let (pv, d) = (p.0, delta.0);
    let open = pv < 1.0;
    let c_p = big_c_unchecked(p, delta);
    let d_p = big_d_unchecked(p, delta);
    let c_bar = big_c_bar_unchecked(p, delta);
    let d_bar = big_d_bar_unchecked(p, delta);
    let general_condition = open && c_p < 1.0;
    let special_condition = open && c_bar < 1.0;
    let noise_scale = (1.0 - d).powf(pv / 2.0);

    let general = general_condition.then(|| {
        (
            2.0 * (1.0 + c_p) / (1.0 - c_p),
            (1.5 * pv + 1.0).exp2() / (noise_scale * (1.0 - c_p)),
            2.0 * d_p / (1.0 - c_p),
            (pv.exp2() + (1.5 * pv).exp2() * d_p / (1.0 - c_p)) / noise_scale,
        )
    });
    let special = special_condition.then(|| {
        (
            2.0 * (1.0 + c_bar) / (1.0 - c_bar),
            (pv + 2.0).exp2() / (noise_scale * (1.0 - c_bar)),
            2.0 * d_bar / (1.0 - c_bar),
            pv.exp2() / noise_scale * (1.0 + 2.0 * d_bar / (1.0 - c_bar)),
        )
    });

    let delta_in_range = delta.in_theorem_range();
    let valid = delta_in_range
        && match regime {
            Regime::General => general_condition,
            Regime::SpecialNLe4k => special_condition,
        };
    BoundSet {
        p: pv,
        delta: d,
        regime,
        c_p,
        c0: general.map(|c| c.0),
        c1: general.map(|c| c.1),
        d_p,
        d0: general.map(|c| c.2),
        d1: general.map(|c| c.3),
        c_bar,
        c0_bar: special.map(|c| c.0),
        c1_bar: special.map(|c| c.1),
        d_bar,
        d0_bar: special.map(|c| c.2),
        d1_bar: special.map(|c| c.3),
        general_condition,
        special_condition,
        delta_in_range,
        valid,
    }
}

impl BoundSet {
    /// Right side of the general lp bound:
    /// `C0 * tail + C1 * k^{1 - p/2} * eps^p`, with `tail = ||x_{T0^c}||_p^p`.
    pub fn pnorm_rhs(&self, tail: f64, k: usize, eps: f64) -> Option<f64> {
        let (c0, c1) = (self.c0?, self.c1?);
        Some(c0 * tail + c1 * (k as f64).powf(1.0 - self.p / 2.0) * eps.powf(self.p))
    }

    /// Right side of the general l2 bound (on `||h||_2^p`):
    /// `D0 * k^{p/2 - 1} * tail + D1 * eps^p`.
    pub fn two_norm_rhs(&self, tail: f64, k: usize, eps: f64) -> Option<f64> {
        let (d0, d1) = (self.d0?, self.d1?);
        Some(d0 * (k as f64).powf(self.p / 2.0 - 1.0) * tail + d1 * eps.powf(self.p))
    }

    pub fn pnorm_rhs_special(&self, tail: f64, k: usize, eps: f64) -> Option<f64> {
        let (c0, c1) = (self.c0_bar?, self.c1_bar?);
        Some(c0 * tail + c1 * (k as f64).powf(1.0 - self.p / 2.0) * eps.powf(self.p))
    }

    pub fn two_norm_rhs_special(&self, tail: f64, k: usize, eps: f64) -> Option<f64> {
        let (d0, d1) = (self.d0_bar?, self.d1_bar?);
        Some(d0 * (k as f64).powf(self.p / 2.0 - 1.0) * tail + d1 * eps.powf(self.p))
    }

    /// Key/value rendering used by the CLI table output.
    pub fn to_table(&self) -> String {
        fn opt(v: Option<f64>) -> String {
            v.map_or_else(|| "invalid".to_string(), |x| format!("{x:.12e}"))
        }
        let rows: [(&str, String); 19] = [
            ("p", format!("{}", self.p)),
            ("delta", format!("{}", self.delta)),
            ("regime", format!("{:?}", self.regime)),
            ("c_p", format!("{:.12e}", self.c_p)),
            ("c0", opt(self.c0)),
            ("c1", opt(self.c1)),
            ("d_p", format!("{:.12e}", self.d_p)),
            ("d0", opt(self.d0)),
            ("d1", opt(self.d1)),
            ("c_bar", format!("{:.12e}", self.c_bar)),
            ("c0_bar", opt(self.c0_bar)),
            ("c1_bar", opt(self.c1_bar)),
            ("d_bar", format!("{:.12e}", self.d_bar)),
            ("d0_bar", opt(self.d0_bar)),
            ("d1_bar", opt(self.d1_bar)),
            ("general_condition", self.general_condition.to_string()),
            ("special_condition", self.special_condition.to_string()),
            ("delta_in_range", self.delta_in_range.to_string()),
            ("valid", self.valid.to_string()),
        ];
        rows.iter()
            .map(|(k, v)| format!("{k:<18} {v}\n"))
            .collect()
    }
}
