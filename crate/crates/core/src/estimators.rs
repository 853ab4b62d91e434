//! Evaluation plans and the five main-effect estimators.
//!
//! A plan draws one unit point set per run and splits it by coordinate blocks:
//! columns `[0, d)` give the base matrix `A`, `[d, 2d)` the independent
//! matrix `B` and, for Owen's estimator, `[2d, 3d)` a third matrix `C`.
//! The mixed matrices are
//!
//! ```text
//!   AB_i = B with column i taken from A      f(x_i, z')
//!   CA_i = A with column i taken from C      f(x_i'', z)
//! ```
//!
//! so that, per sample `k`,
//!
//! ```text
//!   sobol   D_i ~ mean(fA fAB_i) - mean(fA)^2
//!   sk      D_i ~ mean(fA (fAB_i - fB))
//!   owen    D_i ~ mean((fA - fCA_i) (fAB_i - fB))
//!   oracle  D_i ~ mean((fA - f0) (fAB_i - fB))
//!   dlr     D_i ~ mean_j(m_j^2) - f0^2,  m_j = mean of f over bin j of A sorted by x_i
//! ```

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::models::{InputModel, Inputs};
use crate::sampling::{
    generate_uniform, transform_correlated_normal, transform_independent, InputSample, SamplerSpec,
    UnitPointSet,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EstimatorKind {
    SobolOriginal,
    SK,
    Owen,
    Oracle,
    DLR,
}

impl EstimatorKind {
    pub const ALL: [EstimatorKind; 5] = [
        EstimatorKind::SobolOriginal,
        EstimatorKind::SK,
        EstimatorKind::Owen,
        EstimatorKind::Oracle,
        EstimatorKind::DLR,
    ];

    /// Short name used on the command line and in CSV output.
    pub fn name(self) -> &'static str {
        match self {
            EstimatorKind::SobolOriginal => "sobol",
            EstimatorKind::SK => "sk",
            EstimatorKind::Owen => "owen",
            EstimatorKind::Oracle => "oracle",
            EstimatorKind::DLR => "dlr",
        }
    }

    /// Whether the estimator is one of the direct (pick-freeze) formulas.
    pub fn is_direct(self) -> bool {
        self != EstimatorKind::DLR
    }

    /// Width of the unit point set a plan draws for a `d`-input model.
    pub fn unit_dims(self, d: usize) -> usize {
        match self {
            EstimatorKind::DLR => d,
            EstimatorKind::Owen => 3 * d,
            _ => 2 * d,
        }
    }
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EstimatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.to_ascii_lowercase();
        EstimatorKind::ALL
            .into_iter()
            .find(|k| k.name() == lower)
            .ok_or_else(|| Error::UnknownName {
                what: "estimator",
                name: s.to_string(),
            })
    }
}

/// How the DLR bin count is chosen for a sample size `N`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BinRule {
    /// `M = 2^ceil(p/2)`, `N_m = 2^floor(p/2)` for `N = 2^p`; for other `N`
    /// the smallest divisor of `N` not below `sqrt(N)`.
    #[default]
    Ceil,
    /// `M = 2^floor(p/2)`, `N_m = 2^ceil(p/2)`.
    Floor,
    /// A fixed number of bins.
    Fixed(usize),
}

impl FromStr for BinRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        match s.as_str() {
            "ceil" | "sqrt" | "default" => Ok(BinRule::Ceil),
            "floor" => Ok(BinRule::Floor),
            _ => s
                .strip_prefix("fixed:")
                .unwrap_or(&s)
                .parse::<usize>()
                .map(BinRule::Fixed)
                .map_err(|_| Error::UnknownName {
                    what: "bin rule",
                    name: s.clone(),
                }),
        }
    }
}

impl fmt::Display for BinRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BinRule::Ceil => f.write_str("ceil"),
            BinRule::Floor => f.write_str("floor"),
            BinRule::Fixed(m) => write!(f, "fixed:{m}"),
        }
    }
}

/// Partition of `N` sorted samples into `M` bins of `N_m` points each.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BinSchedule {
    n: usize,
    bins: usize,
    per_bin: usize,
}

impl BinSchedule {
    pub fn new(n: usize, bins: usize) -> Result<Self> {
        if bins < 2 || !n.is_multiple_of(bins) || n / bins < 2 {
            return Err(Error::BinSchedule(format!(
                "N = {n} cannot be split into {bins} equal bins of at least 2 points"
            )));
        }
        Ok(Self {
            n,
            bins,
            per_bin: n / bins,
        })
    }

    pub fn for_rule(n: usize, rule: BinRule) -> Result<Self> {
        let bins = match rule {
            BinRule::Fixed(m) => m,
            BinRule::Ceil | BinRule::Floor if n.is_power_of_two() => {
                let p = n.trailing_zeros();
                let e = if rule == BinRule::Ceil {
                    p.div_ceil(2)
                } else {
                    p / 2
                };
                1usize << e
            }
            BinRule::Ceil | BinRule::Floor => {
                let root = (n as f64).sqrt();
                let target = if rule == BinRule::Ceil {
                    root.ceil()
                } else {
                    root.floor()
                } as usize;
                if rule == BinRule::Ceil {
                    (target.max(1)..=n)
                        .find(|&m| n.is_multiple_of(m))
                        .unwrap_or(n)
                } else {
                    (1..=target.max(1))
                        .rev()
                        .find(|&m| n.is_multiple_of(m))
                        .unwrap_or(1)
                }
            }
        };
        Self::new(n, bins)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn per_bin(&self) -> usize {
        self.per_bin
    }
}

/// Where the Oracle estimator's `f0` came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum F0Source {
    Analytic,
    /// Sample mean over an independent pseudo-random block of `N` points.
    PrePass,
}

/// Model outputs needed by one estimator for all inputs of a model.
#[derive(Debug, Clone)]
pub struct EvaluationPlan {
    pub kind: EstimatorKind,
    pub n: usize,
    pub f_a: Vec<f64>,
    pub f_b: Option<Vec<f64>>,
    /// `f_ab[i]`: outputs at `B` with column `i` from `A`.
    pub f_ab: Vec<Vec<f64>>,
    /// `f_ca[i]`: outputs at `A` with column `i` from `C` (Owen only).
    pub f_ca: Vec<Vec<f64>>,
    /// Outputs of the Oracle pre-pass, when no analytic mean exists.
    pub f_prepass: Option<Vec<f64>>,
    pub x_a: InputSample,
    pub f0: Option<(f64, F0Source)>,
    pub bins: Option<BinSchedule>,
    pub eval_count: usize,
}

impl EvaluationPlan {
    fn count_outputs(&self) -> usize {
        self.f_a.len()
            + self.f_b.as_ref().map_or(0, Vec::len)
            + self.f_ab.iter().map(Vec::len).sum::<usize>()
            + self.f_ca.iter().map(Vec::len).sum::<usize>()
            + self.f_prepass.as_ref().map_or(0, Vec::len)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IndexEstimate {
    pub kind: EstimatorKind,
    pub input: usize,
    pub partial_variance: f64,
    pub variance: f64,
    pub index: f64,
    pub n: usize,
    /// Plan evaluations divided evenly over the inputs.
    pub eval_count_share: f64,
    pub f0_source: Option<F0Source>,
}

const PREPASS_SALT: u64 = 0x0f0_0f0;

fn to_model_space(model: &InputModel, u: &UnitPointSet) -> Result<InputSample> {
    match model.inputs() {
        Inputs::Independent(m) => transform_independent(u, m),
        Inputs::Correlated(c) => transform_correlated_normal(u, c),
    }
}

fn eval_rows(model: &InputModel, x: &InputSample) -> Vec<f64> {
    x.values()
        .par_chunks_exact(x.dims())
        .map(|row| model.eval_unchecked(row))
        .collect()
}

/// Evaluates `model` at `base` rows with column `col` replaced by the same
/// column of `donor`.
fn eval_mixed(model: &InputModel, base: &InputSample, donor: &InputSample, col: usize) -> Vec<f64> {
    let d = base.dims();
    (0..base.n())
        .into_par_iter()
        .map_init(
            || vec![0.0; d],
            |row, k| {
                row.copy_from_slice(base.row(k));
                row[col] = donor.row(k)[col];
                model.eval_unchecked(row)
            },
        )
        .collect()
}

pub fn build_plan(
    model: &InputModel,
    kind: EstimatorKind,
    n: usize,
    sampler: SamplerSpec,
) -> Result<EvaluationPlan> {
    build_plan_with_bins(model, kind, n, sampler, BinRule::default())
}

pub fn build_plan_with_bins(
    model: &InputModel,
    kind: EstimatorKind,
    n: usize,
    sampler: SamplerSpec,
    bin_rule: BinRule,
) -> Result<EvaluationPlan> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "need N >= 2 samples, got {n}"
        )));
    }
    if kind.is_direct() && !model.has_independent_inputs() {
        return Err(Error::DependentInputs {
            model: model.name().to_string(),
        });
    }
    let d = model.dim();
    let bins = match kind {
        EstimatorKind::DLR => Some(BinSchedule::for_rule(n, bin_rule)?),
        _ => None,
    };
    let u = generate_uniform(sampler, n, kind.unit_dims(d))?;
    let x_a = to_model_space(model, &u.column_block(0, d)?)?;
    let f_a = eval_rows(model, &x_a);

    let mut plan = EvaluationPlan {
        kind,
        n,
        f_a,
        f_b: None,
        f_ab: Vec::new(),
        f_ca: Vec::new(),
        f_prepass: None,
        x_a,
        f0: None,
        bins,
        eval_count: 0,
    };

    if kind.is_direct() {
        let x_b = to_model_space(model, &u.column_block(d, d)?)?;
        plan.f_ab = (0..d)
            .map(|i| eval_mixed(model, &x_b, &plan.x_a, i))
            .collect();
        if kind != EstimatorKind::SobolOriginal {
            plan.f_b = Some(eval_rows(model, &x_b));
        }
        if kind == EstimatorKind::Owen {
            let x_c = to_model_space(model, &u.column_block(2 * d, d)?)?;
            plan.f_ca = (0..d)
                .map(|i| eval_mixed(model, &plan.x_a, &x_c, i))
                .collect();
        }
        if kind == EstimatorKind::Oracle {
            plan.f0 = Some(match model.analytic_f0() {
                Some(f0) => (f0, F0Source::Analytic),
                None => {
                    let aux = SamplerSpec::Mc {
                        seed: sampler.auxiliary_seed(PREPASS_SALT),
                    };
                    let x = to_model_space(model, &generate_uniform(aux, n, d)?)?;
                    let outputs = eval_rows(model, &x);
                    let mean = mean_of(outputs.len(), |k| outputs[k]);
                    plan.f_prepass = Some(outputs);
                    (mean, F0Source::PrePass)
                }
            });
        }
    }
    plan.eval_count = plan.count_outputs();
    Ok(plan)
}

/// Fixed-order pairwise mean of `term(0..n)`.
fn mean_of<F: Fn(usize) -> f64>(n: usize, term: F) -> f64 {
    fn sum<F: Fn(usize) -> f64>(lo: usize, hi: usize, term: &F) -> f64 {
        if hi - lo <= 64 {
            (lo..hi).map(term).sum()
        } else {
            let mid = lo + (hi - lo) / 2;
            sum(lo, mid, term) + sum(mid, hi, term)
        }
    }
    sum(0, n, &term) / n as f64
}

fn check_lengths(n: usize, arrays: &[&[f64]]) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidArgument("empty output array".into()));
    }
    match arrays.iter().find(|a| a.len() != n) {
        Some(a) => Err(Error::DimensionMismatch {
            expected: n,
            got: a.len(),
        }),
        None => Ok(()),
    }
}

/// Sample mean and variance over all provided outputs.
pub fn estimate_mean_and_variance(f_a: &[f64], f_b: Option<&[f64]>) -> Result<(f64, f64)> {
    let b = f_b.unwrap_or(&[]);
    let n = f_a.len() + b.len();
    if n == 0 {
        return Err(Error::InvalidArgument("no outputs to estimate from".into()));
    }
    let at = |k: usize| {
        if k < f_a.len() {
            f_a[k]
        } else {
            b[k - f_a.len()]
        }
    };
    let f0 = mean_of(n, at);
    // Centred second moment: the same quantity as mean(f^2) - f0^2.
    let d = mean_of(n, |k| (at(k) - f0).powi(2));
    if d.is_nan() || d <= 0.0 {
        return Err(Error::DegenerateVariance);
    }
    Ok((f0, d))
}

pub fn estimate_sobol_original(f_a: &[f64], f_ab: &[f64]) -> Result<f64> {
    check_lengths(f_a.len(), &[f_ab])?;
    let n = f_a.len();
    let mean = mean_of(n, |k| f_a[k]);
    Ok(mean_of(n, |k| f_a[k] * f_ab[k]) - mean * mean)
}

pub fn estimate_sk(f_a: &[f64], f_b: &[f64], f_ab: &[f64]) -> Result<f64> {
    check_lengths(f_a.len(), &[f_b, f_ab])?;
    Ok(mean_of(f_a.len(), |k| f_a[k] * (f_ab[k] - f_b[k])))
}

pub fn estimate_owen(f_a: &[f64], f_b: &[f64], f_ab: &[f64], f_ca: &[f64]) -> Result<f64> {
    check_lengths(f_a.len(), &[f_b, f_ab, f_ca])?;
    Ok(mean_of(f_a.len(), |k| {
        (f_a[k] - f_ca[k]) * (f_ab[k] - f_b[k])
    }))
}

pub fn estimate_oracle(f_a: &[f64], f_b: &[f64], f_ab: &[f64], f0: f64) -> Result<f64> {
    check_lengths(f_a.len(), &[f_b, f_ab])?;
    Ok(mean_of(f_a.len(), |k| (f_a[k] - f0) * (f_ab[k] - f_b[k])))
}

/// Variance of the bin means of `f_a` after sorting the samples by `x_i`.
///
/// Ties in `x_i` keep the original sample order. Since the bins are equally
/// populated the mean of the bin means is the overall mean, so the result is
/// computed as `mean_j (m_j - f0)^2`, which equals `mean_j m_j^2 - f0^2`.
pub fn estimate_dlr(x_i: &[f64], f_a: &[f64], bins: &BinSchedule) -> Result<f64> {
    check_lengths(bins.n(), &[x_i, f_a])?;
    let mut order: Vec<usize> = (0..bins.n()).collect();
    order.sort_by(|&a, &b| x_i[a].total_cmp(&x_i[b]));
    let f0 = mean_of(f_a.len(), |k| f_a[k]);
    let per_bin = bins.per_bin();
    let bin_means: Vec<f64> = order
        .chunks_exact(per_bin)
        .map(|chunk| mean_of(per_bin, |k| f_a[chunk[k]]))
        .collect();
    debug_assert_eq!(bin_means.len(), bins.bins());
    Ok(mean_of(bin_means.len(), |j| (bin_means[j] - f0).powi(2)))
}

/// Indices of the samples in each DLR bin for input column `x_i`.
pub fn dlr_bins(x_i: &[f64], bins: &BinSchedule) -> Result<Vec<Vec<usize>>> {
    check_lengths(bins.n(), &[x_i])?;
    let mut order: Vec<usize> = (0..bins.n()).collect();
    order.sort_by(|&a, &b| x_i[a].total_cmp(&x_i[b]));
    Ok(order
        .chunks_exact(bins.per_bin())
        .map(<[usize]>::to_vec)
        .collect())
}

fn missing(what: &str, kind: EstimatorKind) -> Error {
    Error::InvalidArgument(format!(
        "plan lacks {what} required by the {kind} estimator"
    ))
}

/// Main-effect index estimates for every input, using `kind` on `plan`.
///
/// All inputs share one total-variance estimate, taken over `fA` and `fB`
/// when the plan has `fB`, else over `fA` alone.
pub fn estimate_main_index(
    kind: EstimatorKind,
    plan: &EvaluationPlan,
    model: &InputModel,
) -> Result<Vec<IndexEstimate>> {
    let d = model.dim();
    if plan.x_a.dims() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: plan.x_a.dims(),
        });
    }
    if kind.is_direct() && !model.has_independent_inputs() {
        return Err(Error::DependentInputs {
            model: model.name().to_string(),
        });
    }
    let f_b = plan.f_b.as_deref();
    let (_, variance) = estimate_mean_and_variance(&plan.f_a, f_b)?;
    let need_b = || f_b.ok_or_else(|| missing("fB", kind));
    let f0_source = match kind {
        EstimatorKind::Oracle => Some(plan.f0.ok_or_else(|| missing("f0", kind))?.1),
        _ => None,
    };

    let partial: Vec<f64> = (0..d)
        .into_par_iter()
        .map(|i| -> Result<f64> {
            let f_ab = || {
                plan.f_ab
                    .get(i)
                    .map(Vec::as_slice)
                    .ok_or_else(|| missing("fAB", kind))
            };
            match kind {
                EstimatorKind::SobolOriginal => estimate_sobol_original(&plan.f_a, f_ab()?),
                EstimatorKind::SK => estimate_sk(&plan.f_a, need_b()?, f_ab()?),
                EstimatorKind::Owen => {
                    let f_ca = plan.f_ca.get(i).ok_or_else(|| missing("fCA", kind))?;
                    estimate_owen(&plan.f_a, need_b()?, f_ab()?, f_ca)
                }
                EstimatorKind::Oracle => {
                    let (f0, _) = plan.f0.ok_or_else(|| missing("f0", kind))?;
                    estimate_oracle(&plan.f_a, need_b()?, f_ab()?, f0)
                }
                EstimatorKind::DLR => {
                    let bins = plan
                        .bins
                        .as_ref()
                        .ok_or_else(|| missing("bin schedule", kind))?;
                    estimate_dlr(&plan.x_a.column(i), &plan.f_a, bins)
                }
            }
        })
        .collect::<Result<_>>()?;

    Ok(partial
        .into_iter()
        .enumerate()
        .map(|(input, partial_variance)| IndexEstimate {
            kind,
            input,
            partial_variance,
            variance,
            index: partial_variance / variance,
            n: plan.n,
            eval_count_share: plan.eval_count as f64 / d as f64,
            f0_source,
        })
        .collect())
}

/// Builds a plan and estimates every main-effect index in one step.
pub fn estimate(
    model: &InputModel,
    kind: EstimatorKind,
    n: usize,
    sampler: SamplerSpec,
    bin_rule: BinRule,
) -> Result<Vec<IndexEstimate>> {
    let plan = build_plan_with_bins(model, kind, n, sampler, bin_rule)?;
    estimate_main_index(kind, &plan, model)
}
