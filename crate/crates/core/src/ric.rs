//! Restricted isometry constants of small dense matrices.
//!
//! The order-`k` constant is the worst deviation from 1 of the extreme
//! eigenvalues of the Gram matrices `A_Sᵀ A_S` over all `k`-column subsets `S`.
//! Exact computation enumerates every subset (colexicographic order); a
//! seeded sampler gives a lower bound when enumeration is too expensive.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bounds::Ric;
use crate::error::{Error, Result};

pub const DEFAULT_ENUMERATION_CAP: u128 = 1_000_000;

/// Eigenvalues this close are treated as equal; a statistic within this
/// distance of 1 counts as an isometry failure.
pub const EIGEN_TOL: f64 = 1e-10;

/// Dense `m x n` sensing matrix with finite entries.
#[derive(Debug, Clone, PartialEq)]
pub struct SensingMatrix(DMatrix<f64>);

impl SensingMatrix {
    pub fn new(entries: DMatrix<f64>) -> Result<Self> {
        if entries.nrows() == 0 || entries.ncols() == 0 {
            return Err(Error::Dimension("sensing matrix must be at least 1x1".into()));
        }
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("sensing matrix"));
        }
        Ok(Self(entries))
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let m = rows.len();
        let n = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::Dimension("ragged rows".into()));
        }
        Self::new(DMatrix::from_fn(m, n, |i, j| rows[i][j]))
    }

    pub fn nrows(&self) -> usize {
        self.0.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.0.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    /// Multiplies every entry by `c`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::new(&self.0 * c)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RicKind {
    Exact,
    SampledLowerBound,
    UserSupplied,
}

/// A value for `delta_k` together with how it was obtained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RicEstimate {
    /// Clamped to 1 when the isometry fails at this order.
    pub delta: f64,
    pub order: usize,
    pub kind: RicKind,
    /// Subset attaining the maximum (empty for user-supplied values).
    pub argmax_subset: Vec<usize>,
    /// The raw statistic reached 1: no constant below 1 exists at this order.
    pub rip_fails: bool,
}

impl RicEstimate {
    pub fn user_supplied(delta: f64, order: usize) -> Result<Self> {
        if !delta.is_finite() || delta < 0.0 {
            return Err(Error::domain("delta", delta, "[0, inf)"));
        }
        Ok(Self {
            delta: delta.min(1.0),
            order,
            kind: RicKind::UserSupplied,
            argmax_subset: Vec::new(),
            rip_fails: delta >= 1.0,
        })
    }

    /// The constant as a bounds-ready [`Ric`]; fails when the isometry fails.
    pub fn as_ric(&self) -> Result<Ric> {
        if self.rip_fails {
            return Err(Error::domain("delta", self.delta, "[0, 1) (RIP fails at this order)"));
        }
        Ric::new(self.delta)
    }

    /// Only exact values and user-supplied upper bounds may feed the proven
    /// inequalities; a sampled value is a lower bound.
    pub fn is_upper_bound(&self) -> bool {
        matches!(self.kind, RicKind::Exact | RicKind::UserSupplied)
    }
}

/// `binom(n, k)`, saturating at `u128::MAX`.
pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = match acc.checked_mul((n - i) as u128) {
            Some(v) => v / (i as u128 + 1),
            None => return u128::MAX,
        };
    }
    acc
}

/// Iterator over `k`-subsets of `0..n` in colexicographic order.
#[derive(Debug, Clone)]
pub struct ColexSubsets {
    n: usize,
    current: Option<Vec<usize>>,
}

pub fn colex_subsets(n: usize, k: usize) -> ColexSubsets {
    ColexSubsets {
        n,
        current: (k <= n).then(|| (0..k).collect()),
    }
}

impl Iterator for ColexSubsets {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        let out = self.current.clone()?;
        let c = self.current.as_mut().unwrap();
        let k = c.len();
        let pivot = (0..k).find(|&i| {
            let limit = if i + 1 < k { c[i + 1] } else { self.n };
            c[i] + 1 < limit
        });
        match pivot {
            Some(i) => {
                c[i] += 1;
                for (j, slot) in c.iter_mut().enumerate().take(i) {
                    *slot = j;
                }
            }
            None => self.current = None,
        }
        Some(out)
    }
}

/// Extreme eigenvalues of `A_Sᵀ A_S` over the enumerated subsets.
#[derive(Debug, Clone, PartialEq)]
pub struct SubsetSpectrum {
    pub lambda_max: f64,
    pub lambda_min: f64,
    pub argmax_upper: Vec<usize>,
    pub argmin_lower: Vec<usize>,
    pub subsets: u128,
}

fn gram_eigen_extremes(gram: &DMatrix<f64>, subset: &[usize]) -> (f64, f64) {
    let k = subset.len();
    if k == 1 {
        let v = gram[(subset[0], subset[0])];
        return (v, v);
    }
    let sub = DMatrix::from_fn(k, k, |i, j| gram[(subset[i], subset[j])]);
    let eig = SymmetricEigen::new(sub).eigenvalues;
    let hi = eig.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = eig.iter().copied().fold(f64::INFINITY, f64::min);
    (hi, lo)
}

fn check_order(a: &SensingMatrix, k: usize) -> Result<()> {
    if k == 0 || k > a.ncols() {
        return Err(Error::Dimension(format!(
            "order k = {k} must satisfy 1 <= k <= n = {}",
            a.ncols()
        )));
    }
    Ok(())
}

/// Enumerates every `k`-subset and records the extreme Gram eigenvalues.
/// Ties keep the first subset in colexicographic order.
pub fn subset_spectrum(a: &SensingMatrix, k: usize, cap: u128) -> Result<SubsetSpectrum> {
    check_order(a, k)?;
    let subsets = binomial(a.ncols(), k);
    if subsets > cap {
        return Err(Error::EnumerationCap { subsets, cap });
    }
    let gram = a.matrix().transpose() * a.matrix();
    let mut spec = SubsetSpectrum {
        lambda_max: f64::NEG_INFINITY,
        lambda_min: f64::INFINITY,
        argmax_upper: Vec::new(),
        argmin_lower: Vec::new(),
        subsets,
    };
    for s in colex_subsets(a.ncols(), k) {
        let (hi, lo) = gram_eigen_extremes(&gram, &s);
        if hi > spec.lambda_max {
            spec.lambda_max = hi;
            spec.argmax_upper = s.clone();
        }
        if lo < spec.lambda_min {
            spec.lambda_min = lo;
            spec.argmin_lower = s;
        }
    }
    Ok(spec)
}

fn estimate_from_extremes(
    hi: f64,
    lo: f64,
    upper_subset: &[usize],
    lower_subset: &[usize],
    order: usize,
    kind: RicKind,
) -> RicEstimate {
    let upper = hi - 1.0;
    let lower = 1.0 - lo;
    let (raw, subset) = if upper >= lower {
        (upper, upper_subset)
    } else {
        (lower, lower_subset)
    };
    let raw = raw.max(0.0);
    let rip_fails = raw >= 1.0 - EIGEN_TOL;
    RicEstimate {
        delta: if rip_fails { 1.0 } else { raw },
        order,
        kind,
        argmax_subset: subset.to_vec(),
        rip_fails,
    }
}

/// Exact order-`k` restricted isometry constant by full enumeration,
/// refusing when `binom(n, k)` exceeds [`DEFAULT_ENUMERATION_CAP`].
pub fn exact_ric(a: &SensingMatrix, k: usize) -> Result<RicEstimate> {
    exact_ric_with_cap(a, k, DEFAULT_ENUMERATION_CAP)
}

pub fn exact_ric_with_cap(a: &SensingMatrix, k: usize, cap: u128) -> Result<RicEstimate> {
    let s = subset_spectrum(a, k, cap)?;
    Ok(estimate_from_extremes(
        s.lambda_max,
        s.lambda_min,
        &s.argmax_upper,
        &s.argmin_lower,
        k,
        RicKind::Exact,
    ))
}

/// Maximum of the subset statistic over `trials` uniformly random
/// `k`-subsets. A lower bound on the exact constant; trial `i` draws the
/// same subset for a given seed regardless of `trials`.
pub fn sampled_ric_lower_bound(
    a: &SensingMatrix,
    k: usize,
    trials: usize,
    seed: u64,
) -> Result<RicEstimate> {
    check_order(a, k)?;
    if trials == 0 {
        return Err(Error::Config("trials must be at least 1".into()));
    }
    let gram = a.matrix().transpose() * a.matrix();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<(f64, Vec<usize>)> = None;
    for _ in 0..trials {
        let mut s = rand::seq::index::sample(&mut rng, a.ncols(), k).into_vec();
        s.sort_unstable();
        let (hi, lo) = gram_eigen_extremes(&gram, &s);
        let stat = (hi - 1.0).max(1.0 - lo);
        if best.as_ref().is_none_or(|(b, _)| stat > *b) {
            best = Some((stat, s));
        }
    }
    let (raw, subset) = best.expect("trials >= 1");
    let raw = raw.max(0.0);
    let rip_fails = raw >= 1.0 - EIGEN_TOL;
    Ok(RicEstimate {
        delta: if rip_fails { 1.0 } else { raw },
        order: k,
        kind: RicKind::SampledLowerBound,
        argmax_subset: subset,
        rip_fails,
    })
}

/// Rescales every column to unit l2 norm.
pub fn normalize_columns(a: &SensingMatrix) -> Result<SensingMatrix> {
    let mut m = a.matrix().clone();
    for (j, mut col) in m.column_iter_mut().enumerate() {
        let norm = col.norm();
        if norm == 0.0 {
            return Err(Error::ZeroColumn(j));
        }
        col /= norm;
    }
    SensingMatrix::new(m)
}

/// A global rescaling `c A` together with its exact constant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaledRic {
    pub scale: f64,
    pub estimate: RicEstimate,
}

/// Chooses the scalar `c` minimizing the order-`k` constant of `c A`.
///
/// With `L`/`l` the largest/smallest subset Gram eigenvalues the optimum is
/// `c^2 = 2/(L + l)` and the constant becomes `(L - l)/(L + l)`. Scaling the
/// observations and noise level by the same `c` leaves the recovery problem
/// unchanged, so the smaller constant is the one to use in the bounds.
pub fn optimal_scaling(a: &SensingMatrix, k: usize, cap: u128) -> Result<ScaledRic> {
    let s = subset_spectrum(a, k, cap)?;
    let sum = s.lambda_max + s.lambda_min;
    if sum <= 0.0 {
        return Err(Error::RankDeficient);
    }
    let c2 = 2.0 / sum;
    let estimate = estimate_from_extremes(
        c2 * s.lambda_max,
        c2 * s.lambda_min,
        &s.argmax_upper,
        &s.argmin_lower,
        k,
        RicKind::Exact,
    );
    Ok(ScaledRic {
        scale: c2.sqrt(),
        estimate,
    })
}
