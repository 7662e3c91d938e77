//! lp-minimization `min ||γ||_p  s.t.  ||y - Aγ||_2 <= eps` by iteratively
//! reweighted least squares with smoothing continuation.
//!
//! The smoothed objective is `Σ (x_i² + σ²)^{p/2}`. At a fixed `σ` each step
//! minimizes the quadratic majorizer `Σ w_i⁻¹ x_i²`, which is why the
//! objective never increases within a level. `σ` starts at the largest
//! entry of the minimum-norm solution and shrinks tenfold per level.
//!
//! Noiseless problems keep `Aγ = y` exactly; noisy ones replace the
//! constraint by a penalty `λ ||Aγ - y||²` and bisect `λ` until the residual
//! lands in `[0.9 eps, eps]`. A final polish step restricts the iterate to
//! its dominant entries and keeps whichever feasible candidate has the
//! smallest objective.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::bounds::PExponent;
use crate::error::{Error, Result};
use crate::ric::{normalize_columns, SensingMatrix};

/// Relative slack when comparing the recovered objective with the reference.
pub const DOMINANCE_RTOL: f64 = 1e-9;
/// Relative slack on the noise budget in the feasibility test.
pub const FEASIBILITY_RTOL: f64 = 1e-8;

/// Observation model `y = A x + e` with `||e||_2 <= epsilon`.
#[derive(Debug, Clone, PartialEq)]
pub struct SensingProblem {
    pub a: SensingMatrix,
    pub y: DVector<f64>,
    pub epsilon: f64,
    /// Sparsity level the bounds are evaluated at.
    pub k: usize,
}

impl SensingProblem {
    pub fn new(a: SensingMatrix, y: DVector<f64>, epsilon: f64, k: usize) -> Result<Self> {
        if y.len() != a.nrows() {
            return Err(Error::Dimension(format!(
                "y has length {} but A has {} rows",
                y.len(),
                a.nrows()
            )));
        }
        if !(epsilon.is_finite() && epsilon >= 0.0) {
            return Err(Error::domain("epsilon", epsilon, "[0, inf)"));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("observation"));
        }
        if k == 0 || k > a.ncols() {
            return Err(Error::Dimension(format!("sparsity k = {k} outside 1..=n")));
        }
        Ok(Self { a, y, epsilon, k })
    }

    pub fn m(&self) -> usize {
        self.a.nrows()
    }

    pub fn n(&self) -> usize {
        self.a.ncols()
    }

    pub fn residual_norm(&self, x: &DVector<f64>) -> f64 {
        (&self.y - self.a.matrix() * x).norm()
    }

    /// `eps (1 + 1e-8)`; for `eps = 0` the noiseless target `1e-8 ||y||_2`.
    pub fn feasibility_tolerance(&self) -> f64 {
        if self.epsilon > 0.0 {
            self.epsilon * (1.0 + FEASIBILITY_RTOL)
        } else {
            FEASIBILITY_RTOL * self.y.norm()
        }
    }

    pub fn is_feasible(&self, x: &DVector<f64>) -> bool {
        self.residual_norm(x) <= self.feasibility_tolerance()
    }

    /// The same problem with `A`, `y` and `eps` multiplied by `c > 0`.
    pub fn rescaled(&self, c: f64) -> Result<Self> {
        if !(c.is_finite() && c > 0.0) {
            return Err(Error::domain("scale", c, "(0, inf)"));
        }
        Self::new(self.a.scaled(c)?, &self.y * c, self.epsilon * c, self.k)
    }
}

/// `||v||_p = (Σ |v_i|^p)^{1/p}`.
pub fn lp_norm(v: &[f64], p: PExponent) -> f64 {
    lp_norm_pth_power(v, p).powf(1.0 / p.get())
}

/// `||v||_p^p = Σ |v_i|^p`, the quantity the error bounds are stated in.
pub fn lp_norm_pth_power(v: &[f64], p: PExponent) -> f64 {
    let p = p.get();
    v.iter()
        .filter(|x| **x != 0.0)
        .map(|x| x.abs().powf(p))
        .sum()
}

/// Whether `objective <= reference` up to [`DOMINANCE_RTOL`].
pub fn dominates(objective: f64, reference: f64) -> bool {
    objective <= reference * (1.0 + DOMINANCE_RTOL)
}

#[derive(Debug, Clone, PartialEq)]
pub struct IrlsOptions {
    pub sigma_decay: f64,
    pub sigma_floor: f64,
    pub max_iter_per_level: usize,
    /// Relative step size `||Δx|| / max(1, ||x||)` that ends a level.
    pub tol: f64,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub max_bisection: usize,
    pub polish: bool,
    pub record_trace: bool,
}

impl Default for IrlsOptions {
    fn default() -> Self {
        Self {
            sigma_decay: 10.0,
            sigma_floor: 1e-9,
            max_iter_per_level: 500,
            tol: 1e-9,
            lambda_min: 1e-6,
            lambda_max: 1e6,
            max_bisection: 60,
            polish: true,
            record_trace: false,
        }
    }
}

/// Smoothed objective after one IRLS step (normalized problem units).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub sigma: f64,
    pub lambda: Option<f64>,
    pub objective: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryOutcome {
    pub x_hat: Vec<f64>,
    /// `||y - A x_hat||_2`.
    pub residual: f64,
    /// `||x_hat||_p^p`.
    pub objective_p: f64,
    pub feasible: bool,
    /// `||x_hat||_p <= ||x_ref||_p`; `None` without a reference.
    pub objective_dominates_reference: Option<bool>,
    pub iterations: usize,
    pub final_smoothing: f64,
    /// Penalty weight of the accepted noisy solve.
    pub lambda: Option<f64>,
    /// False when a level hit the iteration cap: the best iterate is
    /// returned, flagged rather than silently accepted.
    pub converged: bool,
    pub polished: bool,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub trace: Vec<TracePoint>,
}

impl RecoveryOutcome {
    /// Both certificate facts hold: feasible and no worse than the reference.
    pub fn certified(&self) -> bool {
        self.feasible && self.objective_dominates_reference == Some(true)
    }

    pub fn x_hat_vector(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.x_hat)
    }
}

struct Continuation {
    x: DVector<f64>,
    iterations: usize,
    sigma: f64,
    converged: bool,
    /// Iterate at the end of each smoothing level.
    path: Vec<DVector<f64>>,
}

/// Solves `(A W Aᵀ + mu I) z = y`, returning `None` when singular.
fn weighted_solve(a: &DMatrix<f64>, w: &DVector<f64>, mu: f64, y: &DVector<f64>) -> Option<DVector<f64>> {
    let aw = DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)] * w[j]);
    let mut gram = &aw * a.transpose();
    for i in 0..gram.nrows() {
        gram[(i, i)] += mu;
    }
    // One refinement step: large penalties make the system ill-conditioned
    // and the objective is sensitive to the residual it leaves.
    let z = match gram.clone().cholesky() {
        Some(ch) => {
            let z = ch.solve(y);
            let r = y - &gram * &z;
            z + ch.solve(&r)
        }
        None => {
            let lu = gram.clone().lu();
            let z = lu.solve(y)?;
            let r = y - &gram * &z;
            z + lu.solve(&r)?
        }
    };
    z.iter().all(|v| v.is_finite()).then(|| aw.transpose() * z)
}

fn smoothed_objective(x: &DVector<f64>, sigma: f64, p: f64) -> f64 {
    let s2 = sigma * sigma;
    x.iter().map(|v| (v * v + s2).powf(p / 2.0)).sum()
}

/// Runs the full smoothing schedule from `x0`. `mu = 0` is the equality
/// constrained update, `mu = 1/λ` the penalized one.
fn continuation(
    a: &DMatrix<f64>,
    y: &DVector<f64>,
    x0: DVector<f64>,
    p: f64,
    mu: f64,
    opts: &IrlsOptions,
    trace: Option<&mut Vec<TracePoint>>,
) -> Continuation {
    let mut trace = trace;
    let lambda = (mu > 0.0).then(|| 1.0 / mu);
    let sigma0 = x0.amax().max(opts.sigma_floor);
    let mut sigma = sigma0;
    let mut x = x0;
    let mut iterations = 0;
    let mut path = Vec::new();
    let converged;
    loop {
        let mut level_done = false;
        for _ in 0..opts.max_iter_per_level {
            let s2 = sigma * sigma;
            // Inverse majorizer weights; the 2/p matters once a penalty is present.
            let w = x.map(|v| (2.0 / p) * (v * v + s2).powf(1.0 - p / 2.0));
            let Some(next) = weighted_solve(a, &w, mu, y) else {
                level_done = true;
                break;
            };
            iterations += 1;
            let step = (&next - &x).norm() / x.norm().max(1.0);
            x = next;
            if let Some(t) = trace.as_deref_mut() {
                let penalty = lambda.map_or(0.0, |l| l * (a * &x - y).norm_squared());
                t.push(TracePoint {
                    sigma,
                    lambda,
                    objective: smoothed_objective(&x, sigma, p) + penalty,
                });
            }
            if step < opts.tol {
                level_done = true;
                break;
            }
        }
        path.push(x.clone());
        if sigma <= opts.sigma_floor {
            converged = level_done;
            break;
        }
        sigma = (sigma / opts.sigma_decay).max(opts.sigma_floor);
    }
    Continuation {
        x,
        iterations,
        sigma,
        converged,
        path,
    }
}

/// Minimum-norm least-squares solution via SVD.
fn min_norm_solution(a: &DMatrix<f64>, y: &DVector<f64>) -> Result<(DVector<f64>, f64)> {
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    let x = svd
        .solve(y, smax * 1e-13)
        .map_err(|e| Error::Dimension(e.to_string()))?;
    Ok((x, if smax > 0.0 { smin / smax } else { 0.0 }))
}

/// Recovers a sparse signal from `prob` with exponent `p`.
///
/// `reference`, when known, fills in the dominance flag of the certificate.
pub fn irls_recover(
    prob: &SensingProblem,
    p: PExponent,
    opts: &IrlsOptions,
    reference: Option<&DVector<f64>>,
) -> Result<RecoveryOutcome> {
    let (m, n) = (prob.m(), prob.n());
    if m > n {
        return Err(Error::Dimension(format!("need m <= n, got {m} x {n}")));
    }
    if let Some(r) = reference {
        if r.len() != n {
            return Err(Error::Dimension("reference length differs from n".into()));
        }
    }
    let pv = p.get();
    let a = prob.a.matrix();
    let scale = prob.y.norm();
    let mut trace = Vec::new();
    let trace_sink = opts.record_trace.then_some(&mut trace);

    // Work on y / ||y|| so the whole pipeline is scale equivariant.
    let (x_norm, path, iterations, sigma, lambda, converged) = if scale == 0.0
        || (prob.epsilon > 0.0 && scale <= prob.epsilon)
    {
        (DVector::zeros(n), Vec::new(), 0, 0.0, None, true)
    } else {
        let y = &prob.y / scale;
        let eps = prob.epsilon / scale;
        let (x_ls, rcond) = min_norm_solution(a, &y)?;
        if eps == 0.0 {
            if rcond < 1e-12 {
                return Err(Error::RankDeficient);
            }
            let c = continuation(a, &y, x_ls, pv, 0.0, opts, trace_sink);
            (c.x, c.path, c.iterations, c.sigma, None, c.converged)
        } else {
            let (c, lambda) = bisect_penalty(a, &y, &x_ls, pv, eps, opts, trace_sink);
            let mut x = c.x;
            let r = &y - a * &x;
            let rn = r.norm();
            if rn > eps {
                // One least-squares correction shrinks the residual to eps.
                let (corr, _) = min_norm_solution(a, &r)?;
                x += corr * (1.0 - eps / rn);
            }
            (x, c.path, c.iterations, c.sigma, Some(lambda), c.converged)
        }
    };

    let mut x_hat = x_norm * scale;
    let mut polished = false;
    if opts.polish && scale > 0.0 {
        let path: Vec<_> = path.into_iter().map(|v| v * scale).collect();
        if let Some(better) = polish(prob, &x_hat, &path, p) {
            x_hat = better;
            polished = true;
        }
    }

    let residual = prob.residual_norm(&x_hat);
    let objective_p = lp_norm_pth_power(x_hat.as_slice(), p);
    let objective_dominates_reference =
        reference.map(|r| dominates(objective_p, lp_norm_pth_power(r.as_slice(), p)));
    Ok(RecoveryOutcome {
        x_hat: x_hat.as_slice().to_vec(),
        residual,
        objective_p,
        feasible: residual <= prob.feasibility_tolerance(),
        objective_dominates_reference,
        iterations,
        final_smoothing: sigma * scale,
        lambda,
        converged,
        polished,
        trace,
    })
}

/// Penalty bisection on `log λ`. Returns the accepted run and its `λ`.
fn bisect_penalty(
    a: &DMatrix<f64>,
    y: &DVector<f64>,
    x_ls: &DVector<f64>,
    p: f64,
    eps: f64,
    opts: &IrlsOptions,
    mut trace: Option<&mut Vec<TracePoint>>,
) -> (Continuation, f64) {
    let run = |lambda: f64, trace: Option<&mut Vec<TracePoint>>| {
        let c = continuation(a, y, x_ls.clone(), p, 1.0 / lambda, opts, trace);
        let r = (y - a * &c.x).norm();
        (c, r)
    };
    let mut total_iterations = 0;
    let mut lo = opts.lambda_min.ln();
    let mut hi = opts.lambda_max.ln();

    let (c_hi, r_hi) = run(opts.lambda_max, trace.as_deref_mut());
    total_iterations += c_hi.iterations;
    if r_hi > eps {
        return (
            Continuation {
                iterations: total_iterations,
                ..c_hi
            },
            opts.lambda_max,
        );
    }
    let mut best = (c_hi, opts.lambda_max);
    for _ in 0..opts.max_bisection {
        let mid = 0.5 * (lo + hi);
        let lambda = mid.exp();
        let (c, r) = run(lambda, trace.as_deref_mut());
        total_iterations += c.iterations;
        if r > eps {
            lo = mid;
        } else {
            // Feasible; smaller λ means less weight on the data term.
            let in_window = r >= 0.9 * eps;
            best = (c, lambda);
            if in_window {
                break;
            }
            hi = mid;
        }
    }
    let (c, lambda) = best;
    (
        Continuation {
            iterations: total_iterations,
            ..c
        },
        lambda,
    )
}

/// Support-restricted cleanup of an IRLS iterate.
///
/// For each iterate on the continuation path and each `s`, keeps its `s`
/// largest entries, and if that is infeasible moves along the segment toward
/// the least-squares fit on the same support until the residual meets the
/// budget. Early levels are smoother and sometimes point at a better support
/// than the final one. Returns the feasible candidate with the smallest
/// objective when it beats `x`.
fn polish(
    prob: &SensingProblem,
    x: &DVector<f64>,
    path: &[DVector<f64>],
    p: PExponent,
) -> Option<DVector<f64>> {
    let (m, n) = (prob.m(), prob.n());
    let tol = prob.feasibility_tolerance();
    let raw_feasible = prob.residual_norm(x) <= tol;
    let raw_objective = lp_norm_pth_power(x.as_slice(), p);

    let mut best: Option<(f64, DVector<f64>)> = None;
    let mut tried = std::collections::HashSet::new();
    for source in std::iter::once(x).chain(path.iter().rev()) {
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| source[j].abs().total_cmp(&source[i].abs()).then(i.cmp(&j)));
        for s in 1..=m.min(n) {
            let mut support = order[..s].to_vec();
            support.sort_unstable();
            if !tried.insert(support.clone()) {
                continue;
            }
            let Some(cand) = support_candidate(prob, source, &support) else {
                continue;
            };
            let obj = lp_norm_pth_power(cand.as_slice(), p);
            if best.as_ref().is_none_or(|(b, _)| obj < *b) {
                best = Some((obj, cand));
            }
        }
    }

    match best {
        Some((obj, cand)) if !raw_feasible || obj < raw_objective => Some(cand),
        _ => None,
    }
}

/// Feasible point supported on `support`, as close to `source` as the
/// segment toward the least-squares fit allows.
fn support_candidate(
    prob: &SensingProblem,
    source: &DVector<f64>,
    support: &[usize],
) -> Option<DVector<f64>> {
    let a = prob.a.matrix();
    let (m, n) = (prob.m(), prob.n());
    let tol = prob.feasibility_tolerance();
    let eps = prob.epsilon;

    let mut z0 = DVector::zeros(n);
    for &j in support {
        z0[j] = source[j];
    }
    let r0 = &prob.y - a * &z0;
    if r0.norm() <= tol {
        return Some(z0);
    }
    let a_s = DMatrix::from_fn(m, support.len(), |i, j| a[(i, support[j])]);
    let svd = a_s.svd(true, true);
    if svd.singular_values.min() <= 1e-12 * svd.singular_values.max() {
        return None;
    }
    let coef = svd.solve(&prob.y, 0.0).ok()?;
    let mut z_ls = DVector::zeros(n);
    for (c, &j) in coef.iter().zip(support) {
        z_ls[j] = *c;
    }
    let r_ls = &prob.y - a * &z_ls;
    if r_ls.norm() > tol {
        return None;
    }
    if eps == 0.0 {
        return Some(z_ls);
    }
    // Smallest α in [0, 1] with ||r0 + α (r_ls - r0)|| = eps.
    let d = &r_ls - &r0;
    let qa = d.norm_squared();
    let qb = 2.0 * r0.dot(&d);
    let qc = r0.norm_squared() - eps * eps;
    let disc = (qb * qb - 4.0 * qa * qc).max(0.0);
    let alpha = if qa > 0.0 {
        ((-qb - disc.sqrt()) / (2.0 * qa)).clamp(0.0, 1.0)
    } else {
        1.0
    };
    let cand = &z0 + (&z_ls - &z0) * alpha;
    if prob.residual_norm(&cand) <= tol {
        Some(cand)
    } else {
        Some(z_ls)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ensemble {
    Gaussian,
    Bernoulli,
}

impl std::str::FromStr for Ensemble {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" => Ok(Ensemble::Gaussian),
            "bernoulli" => Ok(Ensemble::Bernoulli),
            other => Err(Error::Parse(format!("unknown ensemble `{other}`"))),
        }
    }
}

/// Column-normalized random matrix from `ensemble`.
pub fn random_matrix<R: Rng + ?Sized>(
    m: usize,
    n: usize,
    ensemble: Ensemble,
    rng: &mut R,
) -> Result<SensingMatrix> {
    let mut entries = DMatrix::zeros(m, n);
    // Column-major fill keeps column j's draws contiguous in the stream.
    for j in 0..n {
        for i in 0..m {
            entries[(i, j)] = match ensemble {
                Ensemble::Gaussian => StandardNormal.sample(rng),
                Ensemble::Bernoulli => {
                    if rng.random::<bool>() {
                        1.0
                    } else {
                        -1.0
                    }
                }
            };
        }
    }
    normalize_columns(&SensingMatrix::new(entries)?)
}

/// Exactly `k`-sparse signal: uniform support, standard normal nonzeros.
pub fn sparse_signal<R: Rng + ?Sized>(n: usize, k: usize, rng: &mut R) -> DVector<f64> {
    let mut support = rand::seq::index::sample(rng, n, k).into_vec();
    support.sort_unstable();
    let mut x = DVector::zeros(n);
    for j in support {
        x[j] = loop {
            let v: f64 = StandardNormal.sample(rng);
            if v != 0.0 {
                break v;
            }
        };
    }
    x
}

/// Noise uniform on the sphere of radius `eps` (zero when `eps = 0`).
pub fn sphere_noise<R: Rng + ?Sized>(m: usize, eps: f64, rng: &mut R) -> DVector<f64> {
    if eps == 0.0 {
        return DVector::zeros(m);
    }
    loop {
        let g = DVector::from_fn(m, |_, _| StandardNormal.sample(rng));
        let norm: f64 = g.norm();
        if norm > 0.0 {
            return g * (eps / norm);
        }
    }
}

/// A generated problem together with the signal and noise behind it.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub problem: SensingProblem,
    pub x_ref: DVector<f64>,
    pub noise: DVector<f64>,
}

impl Instance {
    /// Builds `y = A x + e` from parts.
    pub fn assemble(
        a: SensingMatrix,
        x_ref: DVector<f64>,
        noise: DVector<f64>,
        epsilon: f64,
        k: usize,
    ) -> Result<Self> {
        if x_ref.len() != a.ncols() || noise.len() != a.nrows() {
            return Err(Error::Dimension("signal or noise length mismatch".into()));
        }
        let y = a.matrix() * &x_ref + &noise;
        Ok(Self {
            problem: SensingProblem::new(a, y, epsilon, k)?,
            x_ref,
            noise,
        })
    }

    pub fn rescaled(&self, c: f64) -> Result<Self> {
        Ok(Self {
            problem: self.problem.rescaled(c)?,
            x_ref: self.x_ref.clone(),
            noise: &self.noise * c,
        })
    }
}

/// Seeded test instance: random matrix, `k`-sparse signal, sphere noise.
pub fn make_instance(
    m: usize,
    n: usize,
    k: usize,
    noise_eps: f64,
    seed: u64,
    ensemble: Ensemble,
) -> Result<Instance> {
    use rand::SeedableRng;
    if !(k >= 1 && k <= m && m <= n) {
        return Err(Error::Dimension(format!(
            "need 1 <= k <= m <= n, got k={k} m={m} n={n}"
        )));
    }
    if !(noise_eps.is_finite() && noise_eps >= 0.0) {
        return Err(Error::domain("epsilon", noise_eps, "[0, inf)"));
    }
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let a = random_matrix(m, n, ensemble, &mut rng)?;
    let x = sparse_signal(n, k, &mut rng);
    let e = sphere_noise(m, noise_eps, &mut rng);
    Instance::assemble(a, x, e, noise_eps, k)
}
