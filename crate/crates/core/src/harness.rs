//! Experiment configuration, the Monte-Carlo driver, report output and the
//! randomized lemma suite behind `verify-lemmas`.
//!
//! Every trial is a pure function of `(config, seed, trial index)`: trial `i`
//! draws from its own ChaCha stream seeded with `seed + i`, so trials can run
//! in parallel and any one of them can be replayed alone.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{p_bar, special_p_limit, PExponent, Regime, Ric};
use crate::error::{Error, Result};
use crate::lemmas::{
    check_a_blocksum, check_cone, check_head_energy, check_head_p_bound, check_omega,
    check_reverse_block_sum, check_reverse_holder, check_shift, check_shift_corollary,
    check_tail_energy, check_theorem_bounds, partition_vector, CheckReport, Verdict,
};
use crate::ric::{
    exact_ric_with_cap, optimal_scaling, sampled_ric_lower_bound, RicEstimate, RicKind,
    SensingMatrix, DEFAULT_ENUMERATION_CAP,
};
use crate::solver::{
    irls_recover, lp_norm_pth_power, random_matrix, sparse_signal, sphere_noise, Ensemble,
    Instance, IrlsOptions, SensingProblem,
};

/// How the exponent of each trial is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum PRule {
    Fixed { p: f64 },
    /// `alpha` times the general-regime threshold at the trial's constant.
    PbarFraction { alpha: f64 },
    /// `alpha` times the `n <= 4k` threshold `((3+2√2)/2)(1 - δ)`.
    SpecialFraction { alpha: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum DeltaSource {
    Exact,
    User { delta: f64 },
    /// Lower bound from random subsets; never satisfies the bound hypotheses.
    Sampled { samples: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub m: usize,
    pub n: usize,
    pub k: usize,
    pub p_rule: PRule,
    /// Noise level: `||e||_2 = epsilon` and the constraint budget.
    pub epsilon: f64,
    pub ensemble: Ensemble,
    pub trials: usize,
    pub seed: u64,
    pub delta_source: DeltaSource,
    pub regime: Regime,
    /// Draw a new matrix per trial instead of sharing trial 0's.
    pub fresh_matrix: bool,
    /// Rescale `A`, `y`, `e`, `epsilon` by the factor minimizing the exact
    /// constant. Requires the exact source.
    pub rescale: bool,
    /// Standard deviation of the dense perturbation added off the support,
    /// making the reference compressible rather than sparse.
    pub compressible_tail: f64,
    pub enumeration_cap: u128,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            m: 8,
            n: 16,
            k: 2,
            p_rule: PRule::PbarFraction { alpha: 1.0 },
            epsilon: 0.0,
            ensemble: Ensemble::Gaussian,
            trials: 100,
            seed: 0,
            delta_source: DeltaSource::Exact,
            regime: Regime::General,
            fresh_matrix: false,
            rescale: true,
            compressible_tail: 0.0,
            enumeration_cap: DEFAULT_ENUMERATION_CAP,
        }
    }
}

/// Flat key/value form of [`ExperimentConfig`] as read from a TOML file or
/// command line; every key is optional and overrides the defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigOverrides {
    pub m: Option<usize>,
    pub n: Option<usize>,
    pub k: Option<usize>,
    /// `fixed`, `pbar_fraction` or `special_fraction`.
    pub p_rule: Option<String>,
    pub p: Option<f64>,
    pub alpha: Option<f64>,
    pub epsilon: Option<f64>,
    pub ensemble: Option<Ensemble>,
    pub trials: Option<usize>,
    pub seed: Option<u64>,
    /// `exact`, `user` or `sampled`.
    pub delta_source: Option<String>,
    pub delta: Option<f64>,
    pub delta_samples: Option<usize>,
    pub regime: Option<String>,
    pub fresh_matrix: Option<bool>,
    pub rescale: Option<bool>,
    pub compressible_tail: Option<f64>,
    pub enumeration_cap: Option<u64>,
}

impl ConfigOverrides {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Keys set in `other` win.
    pub fn merged_with(self, other: ConfigOverrides) -> Self {
        macro_rules! pick {
            ($($f:ident),*) => { Self { $($f: other.$f.or(self.$f)),* } };
        }
        pick!(
            m, n, k, p_rule, p, alpha, epsilon, ensemble, trials, seed, delta_source, delta,
            delta_samples, regime, fresh_matrix, rescale, compressible_tail, enumeration_cap
        )
    }

    pub fn resolve(&self) -> Result<ExperimentConfig> {
        let d = ExperimentConfig::default();
        let rule_name = self.p_rule.as_deref().unwrap_or(match (self.p, self.alpha) {
            (Some(_), None) => "fixed",
            _ => "pbar_fraction",
        });
        let p_rule = match rule_name {
            "fixed" => PRule::Fixed {
                p: self
                    .p
                    .ok_or_else(|| Error::Config("p_rule = fixed needs p".into()))?,
            },
            "pbar_fraction" => PRule::PbarFraction {
                alpha: self.alpha.unwrap_or(1.0),
            },
            "special_fraction" => PRule::SpecialFraction {
                alpha: self.alpha.unwrap_or(1.0),
            },
            other => return Err(Error::Config(format!("unknown p_rule `{other}`"))),
        };
        let delta_source = match self.delta_source.as_deref().unwrap_or(match self.delta {
            Some(_) => "user",
            None => "exact",
        }) {
            "exact" => DeltaSource::Exact,
            "user" => DeltaSource::User {
                delta: self
                    .delta
                    .ok_or_else(|| Error::Config("delta_source = user needs delta".into()))?,
            },
            "sampled" => DeltaSource::Sampled {
                samples: self.delta_samples.unwrap_or(10_000),
            },
            other => return Err(Error::Config(format!("unknown delta_source `{other}`"))),
        };
        let regime = match &self.regime {
            Some(r) => r.parse().map_err(|e: Error| Error::Config(e.to_string()))?,
            None if matches!(p_rule, PRule::SpecialFraction { .. }) => Regime::SpecialNLe4k,
            None => d.regime,
        };
        let cfg = ExperimentConfig {
            m: self.m.unwrap_or(d.m),
            n: self.n.unwrap_or(d.n),
            k: self.k.unwrap_or(d.k),
            p_rule,
            epsilon: self.epsilon.unwrap_or(d.epsilon),
            ensemble: self.ensemble.unwrap_or(d.ensemble),
            trials: self.trials.unwrap_or(d.trials),
            seed: self.seed.unwrap_or(d.seed),
            rescale: self
                .rescale
                .unwrap_or(matches!(delta_source, DeltaSource::Exact)),
            delta_source,
            regime,
            fresh_matrix: self.fresh_matrix.unwrap_or(d.fresh_matrix),
            compressible_tail: self.compressible_tail.unwrap_or(d.compressible_tail),
            enumeration_cap: self.enumeration_cap.map_or(d.enumeration_cap, u128::from),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if !(1 <= self.k && self.k <= self.m && self.m <= self.n) {
            return bad(format!(
                "need 1 <= k <= m <= n, got k={} m={} n={}",
                self.k, self.m, self.n
            ));
        }
        if 2 * self.k > self.n {
            return bad("the bounds use the order-2k constant; need 2k <= n".into());
        }
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if !(self.epsilon.is_finite() && self.epsilon >= 0.0) {
            return bad(format!("epsilon = {} must be finite and >= 0", self.epsilon));
        }
        if !(self.compressible_tail.is_finite() && self.compressible_tail >= 0.0) {
            return bad("compressible_tail must be finite and >= 0".into());
        }
        match self.p_rule {
            PRule::Fixed { p } => {
                PExponent::new(p).map_err(|e| Error::Config(e.to_string()))?;
            }
            PRule::PbarFraction { alpha } | PRule::SpecialFraction { alpha } => {
                if !(alpha > 0.0 && alpha <= 1.0) {
                    return bad(format!("alpha = {alpha} must lie in (0, 1]"));
                }
            }
        }
        match self.delta_source {
            DeltaSource::User { delta } if !(0.0..1.0).contains(&delta) => {
                return bad(format!("user delta = {delta} must lie in [0, 1)"));
            }
            DeltaSource::Sampled { samples: 0 } => {
                return bad("delta_samples must be at least 1".into());
            }
            _ => {}
        }
        if self.rescale && !matches!(self.delta_source, DeltaSource::Exact) {
            return bad("rescale needs delta_source = exact".into());
        }
        if self.regime == Regime::SpecialNLe4k && self.n > 4 * self.k {
            return bad(format!(
                "the n <= 4k regime needs n <= {}, got n = {}",
                4 * self.k,
                self.n
            ));
        }
        Ok(())
    }

    fn trial_rng(&self, trial: usize, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed.wrapping_add(trial as u64));
        rng.set_stream(stream);
        rng
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrialStatus {
    Pass,
    HypothesesUnmet,
    Violation,
}

/// One row of a Monte-Carlo report. Column order is the field order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub seed_offset: u64,
    pub delta_used: f64,
    pub delta_kind: RicKind,
    pub scale: f64,
    /// `None` when the rule needs a constant below one and none exists.
    pub p_used: Option<f64>,
    /// Noise budget after rescaling.
    pub epsilon: f64,
    pub feasible: bool,
    pub dominates_reference: bool,
    pub certified: bool,
    pub converged: bool,
    pub iterations: usize,
    pub error_p_pow: Option<f64>,
    pub error_2_pow: Option<f64>,
    pub error_2_norm: Option<f64>,
    pub bound_rhs_pnorm: Option<f64>,
    pub bound_rhs_2norm: Option<f64>,
    pub bound_rhs_pnorm_bar: Option<f64>,
    pub bound_rhs_2norm_bar: Option<f64>,
    /// Smallest `rhs - lhs` over the judged bounds.
    pub min_slack: Option<f64>,
    pub status: TrialStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub trials: usize,
    pub passes: usize,
    pub hypotheses_unmet: usize,
    pub violations: usize,
    pub certified: usize,
    pub unconverged: usize,
    pub min_slack: Option<f64>,
    /// Largest `||x - x̂||_2` over passing trials.
    pub max_pass_error_2: Option<f64>,
}

impl Summary {
    pub fn from_records(records: &[TrialRecord]) -> Self {
        let count = |s: TrialStatus| records.iter().filter(|r| r.status == s).count();
        let fold_opt = |it: &mut dyn Iterator<Item = f64>, pick: fn(f64, f64) -> f64| {
            it.fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| pick(a, v))))
        };
        Self {
            trials: records.len(),
            passes: count(TrialStatus::Pass),
            hypotheses_unmet: count(TrialStatus::HypothesesUnmet),
            violations: count(TrialStatus::Violation),
            certified: records.iter().filter(|r| r.certified).count(),
            unconverged: records.iter().filter(|r| !r.converged).count(),
            min_slack: fold_opt(&mut records.iter().filter_map(|r| r.min_slack), f64::min),
            max_pass_error_2: fold_opt(
                &mut records
                    .iter()
                    .filter(|r| r.status == TrialStatus::Pass)
                    .filter_map(|r| r.error_2_norm),
                f64::max,
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloRun {
    pub config: ExperimentConfig,
    pub summary: Summary,
    pub records: Vec<TrialRecord>,
}

/// A matrix (already rescaled when requested) with its constant.
struct PreparedMatrix {
    a: SensingMatrix,
    scale: f64,
    delta: RicEstimate,
}

fn prepare_matrix(cfg: &ExperimentConfig, trial: usize) -> Result<PreparedMatrix> {
    let mut rng = cfg.trial_rng(trial, 0);
    let a = random_matrix(cfg.m, cfg.n, cfg.ensemble, &mut rng)?;
    let order = 2 * cfg.k;
    Ok(match cfg.delta_source {
        DeltaSource::Exact if cfg.rescale => {
            let s = optimal_scaling(&a, order, cfg.enumeration_cap)?;
            PreparedMatrix {
                a,
                scale: s.scale,
                delta: s.estimate,
            }
        }
        DeltaSource::Exact => PreparedMatrix {
            delta: exact_ric_with_cap(&a, order, cfg.enumeration_cap)?,
            a,
            scale: 1.0,
        },
        DeltaSource::User { delta } => PreparedMatrix {
            a,
            scale: 1.0,
            delta: RicEstimate::user_supplied(delta, order)?,
        },
        DeltaSource::Sampled { samples } => PreparedMatrix {
            delta: sampled_ric_lower_bound(&a, order, samples, cfg.seed.wrapping_add(trial as u64))?,
            a,
            scale: 1.0,
        },
    })
}

/// The exponent for a trial, or `None` when the rule needs a constant below
/// one and none is available.
fn select_p(rule: PRule, delta: &RicEstimate) -> Result<Option<PExponent>> {
    let lifted = || -> Option<Ric> {
        (!delta.rip_fails)
            .then(|| Ric::new(delta.delta).ok().map(Ric::lifted_to_theorem_range))
            .flatten()
    };
    Ok(match rule {
        PRule::Fixed { p } => Some(PExponent::new(p)?),
        PRule::PbarFraction { alpha } => match lifted() {
            Some(d) => Some(PExponent::new(alpha * p_bar(d)?.get())?),
            None => None,
        },
        PRule::SpecialFraction { alpha } => match lifted() {
            Some(d) => Some(PExponent::new(alpha * special_p_limit(d)?.get())?),
            None => None,
        },
    })
}

fn reference_signal(cfg: &ExperimentConfig, rng: &mut ChaCha8Rng) -> DVector<f64> {
    let mut x = sparse_signal(cfg.n, cfg.k, rng);
    if cfg.compressible_tail > 0.0 {
        for v in x.iter_mut().filter(|v| **v == 0.0) {
            let g: f64 = StandardNormal.sample(rng);
            *v = cfg.compressible_tail * g;
        }
    }
    x
}

fn run_trial(cfg: &ExperimentConfig, trial: usize, shared: Option<&PreparedMatrix>) -> Result<TrialRecord> {
    let fresh;
    let prepared = match shared {
        Some(p) => p,
        None => {
            fresh = prepare_matrix(cfg, trial)?;
            &fresh
        }
    };
    let mut rng = cfg.trial_rng(trial, 1);
    let x = reference_signal(cfg, &mut rng);
    let e = sphere_noise(cfg.m, cfg.epsilon, &mut rng);
    let inst = Instance::assemble(prepared.a.clone(), x, e, cfg.epsilon, cfg.k)?
        .rescaled(prepared.scale)?;
    let prob = &inst.problem;

    let mut record = TrialRecord {
        trial,
        seed_offset: trial as u64,
        delta_used: prepared.delta.delta,
        delta_kind: prepared.delta.kind,
        scale: prepared.scale,
        p_used: None,
        epsilon: prob.epsilon,
        feasible: false,
        dominates_reference: false,
        certified: false,
        converged: true,
        iterations: 0,
        error_p_pow: None,
        error_2_pow: None,
        error_2_norm: None,
        bound_rhs_pnorm: None,
        bound_rhs_2norm: None,
        bound_rhs_pnorm_bar: None,
        bound_rhs_2norm_bar: None,
        min_slack: None,
        status: TrialStatus::HypothesesUnmet,
    };
    let Some(p) = select_p(cfg.p_rule, &prepared.delta)? else {
        return Ok(record);
    };
    record.p_used = Some(p.get());

    let out = irls_recover(prob, p, &IrlsOptions::default(), Some(&inst.x_ref))?;
    let x_hat = out.x_hat_vector();
    let check = check_theorem_bounds(prob, &inst.x_ref, &x_hat, &prepared.delta, p, cfg.regime)?;

    let judged: Vec<&CheckReport> = check
        .reports
        .iter()
        .filter(|r| r.verdict != Verdict::HypothesesUnmet)
        .collect();
    record.feasible = out.feasible;
    record.dominates_reference = out.objective_dominates_reference == Some(true);
    record.certified = check.certified;
    record.converged = out.converged;
    record.iterations = out.iterations;
    record.error_p_pow = Some(check.error_p_pow);
    record.error_2_pow = Some(check.error_2_pow);
    record.error_2_norm = Some((&inst.x_ref - &x_hat).norm());
    record.bound_rhs_pnorm = check.rhs_pnorm;
    record.bound_rhs_2norm = check.rhs_2norm;
    record.bound_rhs_pnorm_bar = check.rhs_pnorm_special;
    record.bound_rhs_2norm_bar = check.rhs_2norm_special;
    record.min_slack = judged.iter().map(|r| r.slack).reduce(f64::min);
    record.status = if check.any_violation() {
        TrialStatus::Violation
    } else if judged.is_empty() {
        TrialStatus::HypothesesUnmet
    } else {
        TrialStatus::Pass
    };
    Ok(record)
}

/// Runs every trial of `cfg` (in parallel) and aggregates the outcome.
pub fn run_montecarlo(cfg: &ExperimentConfig) -> Result<MonteCarloRun> {
    cfg.validate()?;
    let shared = if cfg.fresh_matrix {
        None
    } else {
        Some(prepare_matrix(cfg, 0)?)
    };
    let records = (0..cfg.trials)
        .into_par_iter()
        .map(|i| run_trial(cfg, i, shared.as_ref()))
        .collect::<Result<Vec<_>>>()?;
    Ok(MonteCarloRun {
        config: cfg.clone(),
        summary: Summary::from_records(&records),
        records,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    Csv,
    Jsonl,
}

impl std::str::FromStr for ReportFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Self::Csv),
            "jsonl" | "json" => Ok(Self::Jsonl),
            other => Err(Error::Parse(format!("unknown report format `{other}`"))),
        }
    }
}

/// Writes one line per record: a CSV table with a header row, or JSON lines.
pub fn emit_report<W: Write>(records: &[TrialRecord], format: ReportFormat, out: W) -> Result<()> {
    if records.is_empty() {
        return Err(Error::EmptyRecords);
    }
    match format {
        ReportFormat::Csv => {
            let mut w = csv::Writer::from_writer(out);
            for r in records {
                w.serialize(r)?;
            }
            w.flush()?;
        }
        ReportFormat::Jsonl => {
            let mut out = std::io::BufWriter::new(out);
            for r in records {
                serde_json::to_writer(&mut out, r)?;
                out.write_all(b"\n")?;
            }
            out.flush()?;
        }
    }
    Ok(())
}

pub fn emit_report_to_path(records: &[TrialRecord], format: ReportFormat, path: &Path) -> Result<()> {
    if records.is_empty() {
        return Err(Error::EmptyRecords);
    }
    emit_report(records, format, std::fs::File::create(path)?)
}

/// Tally of one inequality across the lemma suite.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LemmaStats {
    pub trials: usize,
    pub passes: usize,
    pub violations: usize,
    pub hypotheses_unmet: usize,
    pub min_slack: Option<f64>,
}

impl LemmaStats {
    fn add(&mut self, r: &CheckReport) {
        self.trials += 1;
        match r.verdict {
            Verdict::Satisfied => self.passes += 1,
            Verdict::Violated => self.violations += 1,
            Verdict::HypothesesUnmet => {
                self.hypotheses_unmet += 1;
                return;
            }
        }
        self.min_slack = Some(self.min_slack.map_or(r.slack, |s| s.min(r.slack)));
    }

    fn merge(&mut self, other: &LemmaStats) {
        self.trials += other.trials;
        self.passes += other.passes;
        self.violations += other.violations;
        self.hypotheses_unmet += other.hypotheses_unmet;
        self.min_slack = match (self.min_slack, other.min_slack) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        };
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LemmaSuiteConfig {
    pub trials: usize,
    pub seed: u64,
    pub p_grid: Vec<f64>,
    /// `(m, n, k)` shapes for the matrix-dependent inequalities.
    pub sizes: Vec<(usize, usize, usize)>,
    /// Run the inequalities that need no matrix.
    pub vector_lemmas: bool,
    /// Run the inequalities that need a matrix and its exact constant.
    pub matrix_lemmas: bool,
}

impl Default for LemmaSuiteConfig {
    fn default() -> Self {
        Self {
            trials: 1000,
            seed: 0,
            p_grid: (1..=9).map(|i| i as f64 / 10.0).collect(),
            sizes: vec![(8, 12, 2), (6, 8, 2), (10, 16, 2)],
            vector_lemmas: true,
            matrix_lemmas: true,
        }
    }
}

pub type LemmaSummary = BTreeMap<String, LemmaStats>;

pub fn total_violations(summary: &LemmaSummary) -> usize {
    summary.values().map(|s| s.violations).sum()
}

/// Heavy-tailed random magnitudes: exponents spread the scale over several
/// decades, some entries are exactly zero and some are tied.
fn random_magnitudes<R: Rng>(len: usize, rng: &mut R) -> Vec<f64> {
    let shape = rng.random_range(0.1..8.0);
    let mode = rng.random_range(0..4);
    (0..len)
        .map(|_| match mode {
            0 => rng.random::<f64>().powf(shape),
            1 if rng.random_bool(0.3) => 0.0,
            2 => 1.0,
            _ => (-rng.random::<f64>().ln()).powf(shape),
        })
        .collect()
}

fn random_signed<R: Rng>(len: usize, rng: &mut R) -> Vec<f64> {
    random_magnitudes(len, rng)
        .into_iter()
        .map(|v| if rng.random_bool(0.5) { v } else { -v })
        .collect()
}

fn vector_trial(p: PExponent, rng: &mut ChaCha8Rng, stats: &mut LemmaSummary) -> Result<()> {
    let mut add = |r: CheckReport| stats.entry(r.name.clone()).or_default().add(&r);
    let k = rng.random_range(1..=6);
    let n = rng.random_range(k + 1..=8 * k);

    // Cone condition on a pair with ||x̂||_p <= ||x||_p.
    let x = random_signed(n, rng);
    let mut x_hat: Vec<f64> = x
        .iter()
        .map(|v| v + rng.random_range(-1.0..1.0) * rng.random::<f64>())
        .collect();
    let (ox, oh) = (lp_norm_pth_power(&x, p), lp_norm_pth_power(&x_hat, p));
    if oh > ox {
        let shrink = (ox / oh).powf(1.0 / p.get());
        x_hat.iter_mut().for_each(|v| *v *= shrink);
    }
    add(check_cone(&x, &x_hat, k, p)?);

    let h = random_signed(n, rng);
    let pe = partition_vector(&h, k, p)?;
    add(check_tail_energy(&pe));
    if p.get() < 1.0 {
        add(check_reverse_block_sum(&pe)?);
    }

    add(check_reverse_holder(&random_signed(k, rng), p)?);
    add(check_omega(&random_magnitudes(n, rng), p)?);

    let (l, r) = (rng.random_range(1..=2 * k), rng.random_range(1..=2 * k));
    let mut u = random_magnitudes(l + r + rng.random_range(0..k), rng);
    u.sort_by(|a, b| b.total_cmp(a));
    add(check_shift(&u, l, r, p.get())?);
    if p.get() < 1.0 {
        let mut u = random_magnitudes(3 * k, rng);
        u.sort_by(|a, b| b.total_cmp(a));
        add(check_shift_corollary(&u, k, p)?);
    }
    Ok(())
}

/// A matrix with its exact constant for the matrix-dependent inequalities.
struct LemmaMatrix {
    a: SensingMatrix,
    delta: RicEstimate,
    pinv: DMatrix<f64>,
}

fn lemma_matrix(m: usize, n: usize, k: usize, rng: &mut ChaCha8Rng) -> Result<LemmaMatrix> {
    let raw = random_matrix(m, n, Ensemble::Gaussian, rng)?;
    let s = optimal_scaling(&raw, 2 * k, DEFAULT_ENUMERATION_CAP)?;
    let a = raw.scaled(s.scale)?;
    let aat = a.matrix() * a.matrix().transpose();
    let inv = aat.try_inverse().ok_or(Error::RankDeficient)?;
    Ok(LemmaMatrix {
        pinv: a.matrix().transpose() * inv,
        a,
        delta: s.estimate,
    })
}

/// A feasible pair `(x, x̂)` for `y = A x + e`: `x̂` differs from `x` by a
/// random null-space direction plus a shift that leaves residual `e2`, with
/// `||e2|| <= eps`.
fn feasible_pair(
    lm: &LemmaMatrix,
    k: usize,
    eps: f64,
    rng: &mut ChaCha8Rng,
) -> Result<(SensingProblem, DVector<f64>, DVector<f64>)> {
    let (m, n) = (lm.a.nrows(), lm.a.ncols());
    let mut x = sparse_signal(n, k, rng);
    if rng.random_bool(0.5) {
        let tail = rng.random::<f64>() * 0.2;
        for v in x.iter_mut().filter(|v| **v == 0.0) {
            let g: f64 = StandardNormal.sample(rng);
            *v = tail * g;
        }
    }
    let e = sphere_noise(m, eps * rng.random::<f64>().sqrt(), rng);
    let e2 = sphere_noise(m, eps * rng.random::<f64>().sqrt(), rng);
    let g = DVector::from_fn(n, |_, _| StandardNormal.sample(rng));
    let null = &g - &lm.pinv * (lm.a.matrix() * &g);
    let size = rng.random::<f64>().powi(3) * 2.0 * x.norm().max(1.0);
    let x_hat = &x + null * (size / g.norm().max(f64::MIN_POSITIVE)) + &lm.pinv * (&e - &e2);
    let y = lm.a.matrix() * &x + e;
    Ok((SensingProblem::new(lm.a.clone(), y, eps, k)?, x, x_hat))
}

fn matrix_trial(
    lm: &LemmaMatrix,
    k: usize,
    p: PExponent,
    rng: &mut ChaCha8Rng,
    stats: &mut LemmaSummary,
) -> Result<()> {
    let mut add = |r: CheckReport| stats.entry(r.name.clone()).or_default().add(&r);
    let n = lm.a.ncols();
    let h = random_signed(n, rng);
    let mut pe = partition_vector(&h, k, p)?;
    if p.get() < 1.0 {
        add(check_a_blocksum(&lm.a, &pe, &lm.delta)?);
        // Rebalance toward the maximizing block share 1 - p/2 and recheck.
        let target = 1.0 - p.get() / 2.0;
        let rest: f64 = pe.tail_p_mass() - pe.block_p_mass(1);
        if rest > 0.0 && pe.block_p_mass(1) > 0.0 {
            let want = target / (1.0 - target) * rest;
            let factor = (want / pe.block_p_mass(1)).powf(1.0 / p.get());
            let first = pe.block(1)[pe.k - 1].abs() * factor;
            let second = pe.block(2)[0].abs();
            if first >= second {
                for v in &mut pe.values[k..2 * k] {
                    *v *= factor;
                }
                let mut reordered = vec![0.0; n];
                for (pos, src) in pe.source_index.iter().enumerate() {
                    if let Some(j) = *src {
                        reordered[j] = pe.values[pos];
                    }
                }
                let pe2 = partition_vector(&reordered, k, p)?;
                add(check_a_blocksum(&lm.a, &pe2, &lm.delta)?);
            }
        }
    }

    let eps = if rng.random_bool(0.3) { 0.0 } else { rng.random::<f64>() * 0.5 };
    let (prob, x, x_hat) = feasible_pair(lm, k, eps, rng)?;
    add(check_head_energy(&prob, &x, &x_hat, &lm.delta, p)?);
    if p.get() < 1.0 {
        add(check_head_p_bound(&prob, &x, &x_hat, &lm.delta, p, Regime::General)?);
        if n <= 4 * k {
            add(check_head_p_bound(&prob, &x, &x_hat, &lm.delta, p, Regime::SpecialNLe4k)?);
        }
    }
    Ok(())
}

/// Runs each inequality `trials` times per exponent in the grid (and per
/// shape for the matrix ones). Deterministic for a given seed.
pub fn run_lemma_suite(cfg: &LemmaSuiteConfig) -> Result<LemmaSummary> {
    if cfg.trials == 0 {
        return Err(Error::Config("trials must be at least 1".into()));
    }
    let grid = cfg
        .p_grid
        .iter()
        .map(|&p| PExponent::new(p))
        .collect::<Result<Vec<_>>>()?;
    for &(m, n, k) in &cfg.sizes {
        if !(1 <= k && k <= m && m <= n && 2 * k <= n) {
            return Err(Error::Config(format!("bad size m={m} n={n} k={k}")));
        }
    }

    // One job per (exponent, shape); each owns an independent stream.
    let mut jobs = Vec::new();
    for (gi, &p) in grid.iter().enumerate() {
        if cfg.vector_lemmas {
            jobs.push((gi, p, None));
        }
        if cfg.matrix_lemmas {
            for (si, &size) in cfg.sizes.iter().enumerate() {
                jobs.push((gi, p, Some((si, size))));
            }
        }
    }
    let parts = jobs
        .into_par_iter()
        .map(|(gi, p, size)| -> Result<LemmaSummary> {
            let stream = match size {
                None => 0,
                Some((si, _)) => si as u64 + 1,
            };
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(gi as u64));
            rng.set_stream(stream);
            let mut stats = LemmaSummary::new();
            match size {
                None => {
                    for _ in 0..cfg.trials {
                        vector_trial(p, &mut rng, &mut stats)?;
                    }
                }
                Some((_, (m, n, k))) => {
                    let lm = lemma_matrix(m, n, k, &mut rng)?;
                    for _ in 0..cfg.trials {
                        matrix_trial(&lm, k, p, &mut rng, &mut stats)?;
                    }
                }
            }
            Ok(stats)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut summary = LemmaSummary::new();
    for part in &parts {
        for (name, s) in part {
            summary.entry(name.clone()).or_default().merge(s);
        }
    }
    Ok(summary)
}
