//! Replicated convergence benchmarks: RMSE over `K` runs per sample size,
//! power-law rate fits and evaluation-cost accounting.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimators::{build_plan_with_bins, estimate_main_index, BinRule, EstimatorKind};
use crate::models::{build_with, TestCaseId};
use crate::sampling::{LognormalParams, SamplerKind, SamplerSpec};

pub const DEFAULT_RUNS: usize = 10;

/// Points with an RMSE below this are treated as exact and left out of fits.
pub const ZERO_RMSE: f64 = 1e-14;

/// Which part of the `N` ladder a rate fit uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FitWindow {
    /// The upper half of the ladder (at least four points).
    #[default]
    Upper,
    Full,
}

impl FromStr for FitWindow {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "upper" | "upper-half" => Ok(FitWindow::Upper),
            "full" => Ok(FitWindow::Full),
            _ => Err(Error::UnknownName {
                what: "fit window",
                name: s.to_string(),
            }),
        }
    }
}

impl fmt::Display for FitWindow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FitWindow::Upper => "upper",
            FitWindow::Full => "full",
        })
    }
}

/// Abscissa of an RMSE curve.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    N,
    NCpu,
}

impl Axis {
    pub fn name(self) -> &'static str {
        match self {
            Axis::N => "N",
            Axis::NCpu => "N_CPU",
        }
    }

    pub fn value(self, r: &ConvergenceRecord) -> f64 {
        match self {
            Axis::N => r.n as f64,
            Axis::NCpu => r.n_cpu_actual as f64,
        }
    }
}

impl FromStr for Axis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "n" => Ok(Axis::N),
            "n_cpu" | "ncpu" => Ok(Axis::NCpu),
            _ => Err(Error::UnknownName {
                what: "axis",
                name: s.to_string(),
            }),
        }
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkConfig {
    pub test: TestCaseId,
    pub estimators: Vec<EstimatorKind>,
    pub sampler: SamplerKind,
    pub p_min: u32,
    pub p_max: u32,
    pub runs: usize,
    pub master_seed: u64,
    pub bin_rule: BinRule,
    pub fit_window: FitWindow,
    pub lognormal: LognormalParams,
}

impl BenchmarkConfig {
    pub fn new(
        test: TestCaseId,
        estimators: Vec<EstimatorKind>,
        sampler: SamplerKind,
        p_min: u32,
        p_max: u32,
    ) -> Self {
        Self {
            test,
            estimators,
            sampler,
            p_min,
            p_max,
            runs: DEFAULT_RUNS,
            master_seed: 0,
            bin_rule: BinRule::default(),
            fit_window: FitWindow::default(),
            lognormal: LognormalParams::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.estimators.is_empty() {
            return Err(Error::InvalidArgument("no estimators selected".into()));
        }
        if self.p_min > self.p_max {
            return Err(Error::InvalidArgument(format!(
                "p_min = {} exceeds p_max = {}",
                self.p_min, self.p_max
            )));
        }
        if self.p_min < 1 || self.p_max > 26 {
            return Err(Error::InvalidArgument(format!(
                "ladder exponents must lie in [1, 26], got {}..{}",
                self.p_min, self.p_max
            )));
        }
        if self.runs < 2 {
            return Err(Error::InvalidArgument(format!(
                "K = {} replicates; at least 2 are required",
                self.runs
            )));
        }
        Ok(())
    }

    pub fn ladder(&self) -> impl Iterator<Item = usize> + '_ {
        (self.p_min..=self.p_max).map(|p| 1usize << p)
    }
}

/// RMSE of one estimator for one input at one sample size.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRecord {
    pub test: TestCaseId,
    pub estimator: EstimatorKind,
    pub sampler: SamplerKind,
    /// 1-based input index.
    pub input: usize,
    pub n: usize,
    pub n_cpu_actual: usize,
    pub n_cpu_table1: usize,
    pub rmse: f64,
    pub mean_estimate: f64,
    pub analytic: f64,
    pub runs: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateFit {
    pub estimator: EstimatorKind,
    pub input: usize,
    pub alpha: f64,
    pub c: f64,
    pub r2: f64,
    pub axis: Axis,
    pub points: usize,
}

/// Model evaluations for a full set of main-effect indices: what a plan
/// actually spends, and the count listed for the method when total indices
/// are estimated alongside.
pub fn cost(kind: EstimatorKind, d: usize, n: usize) -> (usize, usize) {
    match kind {
        EstimatorKind::SobolOriginal => (n * (d + 1), n * (2 * d + 1)),
        EstimatorKind::SK | EstimatorKind::Oracle => (n * (d + 2), n * (d + 2)),
        EstimatorKind::Owen => (n * (2 * d + 2), n * (2 * d + 2)),
        EstimatorKind::DLR => (n, n),
    }
}

pub fn rmse(estimates: &[f64], analytic: f64) -> f64 {
    let k = estimates.len() as f64;
    (estimates
        .iter()
        .map(|s| (s - analytic).powi(2))
        .sum::<f64>()
        / k)
        .sqrt()
}

struct RunResult {
    indices: Vec<f64>,
    eval_count: usize,
}

pub fn run_benchmark(cfg: &BenchmarkConfig) -> Result<Vec<ConvergenceRecord>> {
    cfg.validate()?;
    let model = build_with(cfg.test, cfg.lognormal);
    let analytic = model
        .analytic_main()
        .ok_or_else(|| Error::MissingAnalytic(cfg.test.to_string()))?
        .to_vec();
    if !model.has_independent_inputs() && cfg.estimators.iter().any(|k| k.is_direct()) {
        return Err(Error::DependentInputs {
            model: model.name().to_string(),
        });
    }
    let mut estimators = cfg.estimators.clone();
    estimators.sort();
    estimators.dedup();

    let ladder: Vec<usize> = cfg.ladder().collect();
    let tasks: Vec<(EstimatorKind, usize, usize)> = estimators
        .iter()
        .flat_map(|&k| {
            ladder
                .iter()
                .flat_map(move |&n| (0..cfg.runs).map(move |run| (k, n, run)))
        })
        .collect();

    let results: Vec<RunResult> = tasks
        .par_iter()
        .map(|&(kind, n, run)| {
            let spec = SamplerSpec::for_run(cfg.sampler, cfg.master_seed, run as u64);
            let plan = build_plan_with_bins(&model, kind, n, spec, cfg.bin_rule)?;
            let est = estimate_main_index(kind, &plan, &model)?;
            Ok(RunResult {
                indices: est.into_iter().map(|e| e.index).collect(),
                eval_count: plan.eval_count,
            })
        })
        .collect::<Result<_>>()?;

    let d = model.dim();
    let mut records = Vec::with_capacity(estimators.len() * ladder.len() * d);
    for (group, chunk) in results.chunks(cfg.runs).enumerate() {
        let (kind, n, _) = tasks[group * cfg.runs];
        let (_, table1) = cost(kind, d, n);
        for (i, &s_a) in analytic.iter().enumerate() {
            let s: Vec<f64> = chunk.iter().map(|r| r.indices[i]).collect();
            records.push(ConvergenceRecord {
                test: cfg.test,
                estimator: kind,
                sampler: cfg.sampler,
                input: i + 1,
                n,
                n_cpu_actual: chunk[0].eval_count,
                n_cpu_table1: table1,
                rmse: rmse(&s, s_a),
                mean_estimate: s.iter().sum::<f64>() / s.len() as f64,
                analytic: s_a,
                runs: cfg.runs,
            });
        }
    }
    records.sort_by_key(|r| (r.estimator, r.input, r.n));
    Ok(records)
}

/// Least-squares line through `(log10 axis, log10 rmse)`; `alpha = -slope`.
///
/// `records` must all belong to one (estimator, input) pair.
pub fn fit_rate(records: &[ConvergenceRecord], axis: Axis, window: FitWindow) -> Result<RateFit> {
    let first = records.first().ok_or(Error::TooFewPoints(0))?;
    if records
        .iter()
        .any(|r| r.estimator != first.estimator || r.input != first.input)
    {
        return Err(Error::InvalidArgument(
            "rate fit records must share estimator and input".into(),
        ));
    }
    let mut sorted: Vec<&ConvergenceRecord> = records.iter().collect();
    sorted.sort_by_key(|r| r.n);
    let skip = match window {
        FitWindow::Full => 0,
        FitWindow::Upper => (sorted.len() / 2).min(sorted.len().saturating_sub(4)),
    };
    let points: Vec<(f64, f64)> = sorted[skip..]
        .iter()
        .filter(|r| r.rmse >= ZERO_RMSE)
        .map(|r| (axis.value(r).log10(), r.rmse.log10()))
        .collect();
    if points.len() < 4 {
        return Err(Error::TooFewPoints(points.len()));
    }
    let (slope, intercept, r2) = least_squares(&points);
    Ok(RateFit {
        estimator: first.estimator,
        input: first.input,
        alpha: -slope,
        c: 10f64.powf(intercept),
        r2,
        axis,
        points: points.len(),
    })
}

/// Rate fits for every (estimator, input) group with enough usable points.
pub fn fit_all(records: &[ConvergenceRecord], axis: Axis, window: FitWindow) -> Vec<RateFit> {
    let mut keys: Vec<(EstimatorKind, usize)> =
        records.iter().map(|r| (r.estimator, r.input)).collect();
    keys.sort();
    keys.dedup();
    keys.into_iter()
        .filter_map(|(k, i)| {
            let group: Vec<ConvergenceRecord> = records
                .iter()
                .filter(|r| r.estimator == k && r.input == i)
                .cloned()
                .collect();
            fit_rate(&group, axis, window).ok()
        })
        .collect()
}

fn least_squares(points: &[(f64, f64)]) -> (f64, f64, f64) {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = points.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy == 0.0 {
        1.0
    } else {
        sxy * sxy / (sxx * syy)
    };
    (slope, intercept, r2)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synthetic(ns: &[usize], f: impl Fn(f64) -> f64) -> Vec<ConvergenceRecord> {
        ns.iter()
            .map(|&n| ConvergenceRecord {
                test: TestCaseId::Linear4,
                estimator: EstimatorKind::SK,
                sampler: SamplerKind::Qmc,
                input: 1,
                n,
                n_cpu_actual: 6 * n,
                n_cpu_table1: 6 * n,
                rmse: f(n as f64),
                mean_estimate: 0.0,
                analytic: 0.0,
                runs: 10,
            })
            .collect()
    }

    #[test]
    fn exact_power_law_fit() {
        let ns: Vec<usize> = (8..=16).map(|p| 1 << p).collect();
        let recs = synthetic(&ns, |n| 10.0 / n);
        for window in [FitWindow::Full, FitWindow::Upper] {
            let fit = fit_rate(&recs, Axis::N, window).unwrap();
            assert!((fit.alpha - 1.0).abs() < 1e-12);
            assert!((fit.r2 - 1.0).abs() < 1e-12);
            assert!((fit.c - 10.0).abs() < 1e-9);
        }
        assert_eq!(
            fit_rate(&recs, Axis::N, FitWindow::Upper).unwrap().points,
            5
        );
        // Same slope against N_CPU = 6 N, prefactor scaled.
        let cpu = fit_rate(&recs, Axis::NCpu, FitWindow::Full).unwrap();
        assert!((cpu.alpha - 1.0).abs() < 1e-12);
        assert!((cpu.c - 60.0).abs() < 1e-8);
    }

    #[test]
    fn zero_rmse_points_dropped() {
        let ns: Vec<usize> = (8..=13).map(|p| 1 << p).collect();
        let mut recs = synthetic(&ns, |n| 1.0 / n.sqrt());
        recs[5].rmse = 0.0;
        let fit = fit_rate(&recs, Axis::N, FitWindow::Full).unwrap();
        assert_eq!(fit.points, 5);
        assert!((fit.alpha - 0.5).abs() < 1e-12);
        recs[4].rmse = 1e-16;
        recs[3].rmse = 0.0;
        assert!(matches!(
            fit_rate(&recs, Axis::N, FitWindow::Full),
            Err(Error::TooFewPoints(3))
        ));
    }

    #[test]
    fn short_ladder_keeps_four_points() {
        let ns: Vec<usize> = (8..=12).map(|p| 1 << p).collect();
        let fit = fit_rate(&synthetic(&ns, |n| 1.0 / n), Axis::N, FitWindow::Upper).unwrap();
        assert_eq!(fit.points, 4);
    }

    #[test]
    fn rmse_of_identical_estimates() {
        assert_eq!(rmse(&[0.3; 10], 0.25), (0.3f64 - 0.25).abs());
        assert_eq!(rmse(&[0.1, 0.3], 0.2), 0.1f64.hypot(0.1) / 2f64.sqrt());
    }

    #[test]
    fn cost_table() {
        assert_eq!(cost(EstimatorKind::DLR, 10, 1024), (1024, 1024));
        assert_eq!(cost(EstimatorKind::Owen, 3, 1024), (8192, 8192));
        assert_eq!(cost(EstimatorKind::SobolOriginal, 4, 1024), (5120, 9216));
        assert_eq!(cost(EstimatorKind::SK, 4, 1024), (6144, 6144));
        assert_eq!(cost(EstimatorKind::Oracle, 4, 1024), (6144, 6144));
        for k in EstimatorKind::ALL {
            for d in 1..12 {
                let (a, t) = cost(k, d, 64);
                assert!(a <= t);
                assert_eq!(a == t, k != EstimatorKind::SobolOriginal);
            }
        }
    }

    #[test]
    fn config_validation() {
        let mut cfg = BenchmarkConfig::new(
            TestCaseId::Linear4,
            vec![EstimatorKind::SK],
            SamplerKind::Qmc,
            8,
            10,
        );
        assert_eq!(cfg.runs, 10);
        assert!(cfg.validate().is_ok());
        cfg.runs = 1;
        assert!(run_benchmark(&cfg).is_err());
        cfg.runs = 10;
        cfg.p_min = 11;
        assert!(cfg.validate().is_err());
        cfg.p_min = 8;
        cfg.estimators.clear();
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn dependent_model_rejects_direct_estimators() {
        let cfg = BenchmarkConfig::new(
            TestCaseId::DepLinear3,
            vec![EstimatorKind::SK],
            SamplerKind::Qmc,
            6,
            8,
        );
        assert!(matches!(
            run_benchmark(&cfg),
            Err(Error::DependentInputs { .. })
        ));
    }

    #[test]
    fn linear_sk_ladder() {
        let cfg = BenchmarkConfig::new(
            TestCaseId::Linear4,
            vec![EstimatorKind::SK],
            SamplerKind::Qmc,
            8,
            14,
        );
        let recs = run_benchmark(&cfg).unwrap();
        assert_eq!(recs.len(), 28);
        for i in 1..=4 {
            let group: Vec<_> = recs.iter().filter(|r| r.input == i).cloned().collect();
            let fit = fit_rate(&group, Axis::N, FitWindow::Full).unwrap();
            assert!(fit.alpha > 0.0, "input {i}: {fit:?}");
            assert!(group
                .iter()
                .all(|r| r.n_cpu_actual == 6 * r.n && r.n_cpu_table1 == 6 * r.n));
        }
    }

    #[test]
    fn dependent_quadratic_dlr_records() {
        let cfg = BenchmarkConfig::new(
            TestCaseId::DepQuad4,
            vec![EstimatorKind::DLR],
            SamplerKind::Qmc,
            10,
            14,
        );
        let recs = run_benchmark(&cfg).unwrap();
        assert_eq!(recs.len(), 5 * 4);
        for r in recs.iter().filter(|r| r.input >= 3) {
            assert_eq!(r.analytic, 0.0);
            assert!(r.rmse > 0.0);
        }
    }

    #[test]
    fn records_are_reproducible_and_ordered() {
        let mut cfg = BenchmarkConfig::new(
            TestCaseId::Ishigami,
            vec![EstimatorKind::DLR, EstimatorKind::Owen],
            SamplerKind::Mc,
            6,
            9,
        );
        cfg.master_seed = 1234;
        let a = run_benchmark(&cfg).unwrap();
        let b = run_benchmark(&cfg).unwrap();
        assert_eq!(a, b);
        let keys: Vec<_> = a.iter().map(|r| (r.estimator, r.input, r.n)).collect();
        let mut sorted = keys.clone();
        sorted.sort();
        assert_eq!(keys, sorted);
        assert_eq!(a[0].estimator, EstimatorKind::Owen);
    }
}
