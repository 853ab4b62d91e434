//! Model functions and the reference test cases with known indices.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::sampling::{CovarianceSpec, LognormalParams, MarginalSpec, SquareMatrix};

pub type ModelFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// Joint distribution of the model inputs.
#[derive(Debug, Clone, PartialEq)]
pub enum Inputs {
    Independent(Vec<MarginalSpec>),
    Correlated(CovarianceSpec),
}

impl Inputs {
    pub fn dim(&self) -> usize {
        match self {
            Inputs::Independent(m) => m.len(),
            Inputs::Correlated(c) => c.dim(),
        }
    }
}

/// Closed-form reference values for a model.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AnalyticIndices {
    pub main: Vec<f64>,
    pub total: Option<Vec<f64>>,
    pub f0: Option<f64>,
    pub variance: Option<f64>,
}

#[derive(Clone)]
pub struct InputModel {
    name: String,
    inputs: Inputs,
    f: ModelFn,
    analytic: Option<AnalyticIndices>,
}

impl fmt::Debug for InputModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("InputModel")
            .field("name", &self.name)
            .field("inputs", &self.inputs)
            .field("analytic", &self.analytic)
            .finish_non_exhaustive()
    }
}

impl InputModel {
    pub fn new<F>(name: impl Into<String>, inputs: Inputs, f: F) -> Result<Self>
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        if inputs.dim() == 0 {
            return Err(Error::InvalidArgument(
                "model needs at least one input".into(),
            ));
        }
        if let Inputs::Independent(m) = &inputs {
            for marginal in m {
                marginal.validate()?;
            }
        }
        Ok(Self {
            name: name.into(),
            inputs,
            f: Arc::new(f),
            analytic: None,
        })
    }

    pub fn with_analytic(mut self, analytic: AnalyticIndices) -> Result<Self> {
        if analytic.main.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: analytic.main.len(),
            });
        }
        if let Some(s) = analytic.main.iter().find(|s| !(0.0..=1.0).contains(*s)) {
            return Err(Error::InvalidArgument(format!(
                "analytic main index {s} outside [0, 1]"
            )));
        }
        self.analytic = Some(analytic);
        Ok(self)
    }

    /// Same inputs and reference data, different function. Reference values
    /// are dropped since they no longer describe the model.
    pub fn map_output<G>(&self, name: impl Into<String>, g: G) -> Self
    where
        G: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        let f = Arc::clone(&self.f);
        Self {
            name: name.into(),
            inputs: self.inputs.clone(),
            f: Arc::new(move |x| g(f(x))),
            analytic: None,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.inputs.dim()
    }

    pub fn inputs(&self) -> &Inputs {
        &self.inputs
    }

    pub fn has_independent_inputs(&self) -> bool {
        matches!(self.inputs, Inputs::Independent(_))
    }

    pub fn analytic(&self) -> Option<&AnalyticIndices> {
        self.analytic.as_ref()
    }

    pub fn analytic_main(&self) -> Option<&[f64]> {
        self.analytic.as_ref().map(|a| a.main.as_slice())
    }

    pub fn analytic_f0(&self) -> Option<f64> {
        self.analytic.as_ref().and_then(|a| a.f0)
    }

    pub fn evaluate(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        Ok((self.f)(x))
    }

    /// Evaluates without the length check; `x.len()` must equal `dim()`.
    pub(crate) fn eval_unchecked(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.dim());
        (self.f)(x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TestCaseId {
    Linear4,
    ParkAhn7,
    Ishigami,
    GFunc10A,
    GFunc10B,
    DepQuad4,
    DepLinear3,
}

impl TestCaseId {
    pub const ALL: [TestCaseId; 7] = [
        TestCaseId::Linear4,
        TestCaseId::ParkAhn7,
        TestCaseId::Ishigami,
        TestCaseId::GFunc10A,
        TestCaseId::GFunc10B,
        TestCaseId::DepQuad4,
        TestCaseId::DepLinear3,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TestCaseId::Linear4 => "Linear4",
            TestCaseId::ParkAhn7 => "ParkAhn7",
            TestCaseId::Ishigami => "Ishigami",
            TestCaseId::GFunc10A => "GFunc10A",
            TestCaseId::GFunc10B => "GFunc10B",
            TestCaseId::DepQuad4 => "DepQuad4",
            TestCaseId::DepLinear3 => "DepLinear3",
        }
    }
}

impl fmt::Display for TestCaseId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TestCaseId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        TestCaseId::ALL
            .into_iter()
            .find(|t| t.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::UnknownName {
                what: "test case",
                name: s.to_string(),
            })
    }
}

// Linear4
const LINEAR_MEAN: [f64; 4] = [1.0, 3.0, 5.0, 7.0];
const LINEAR_SD: [f64; 4] = [1.0, 1.5, 2.0, 2.5];

// ParkAhn7: ten trilinear terms over seven lognormal inputs (0-based).
const PARK_AHN_TERMS: [[usize; 3]; 10] = [
    [0, 2, 4],
    [0, 2, 5],
    [0, 3, 4],
    [0, 3, 5],
    [1, 2, 3],
    [1, 2, 4],
    [1, 3, 4],
    [1, 4, 5],
    [1, 3, 6],
    [1, 5, 6],
];
const PARK_AHN_MEANS: [f64; 7] = [2.0, 3.0, 0.001, 0.002, 0.004, 0.005, 0.003];
const PARK_AHN_SD: f64 = 0.4214;
const PARK_AHN_MAIN: [f64; 7] = [0.0350, 0.330, 0.0157, 0.0857, 0.174, 0.221, 0.0477];

// Ishigami
const ISHIGAMI_A: f64 = 7.0;
const ISHIGAMI_B: f64 = 0.1;

// g-function coefficients
const GFUNC_A: [f64; 10] = [0.0, 0.0, 3.0, 3.0, 3.0, 3.0, 3.0, 3.0, 3.0, 3.0];
const GFUNC_B: [f64; 10] = [0.0; 10];

// DepQuad4
const DEP_QUAD_MEAN: [f64; 4] = [0.0, 0.0, 250.0, 400.0];
const DEP_QUAD_COV: [[f64; 4]; 4] = [
    [16.0, 2.4, 0.0, 0.0],
    [2.4, 4.0, 0.0, 0.0],
    [0.0, 0.0, 4e4, -1.8e4],
    [0.0, 0.0, -1.8e4, 9e4],
];

// DepLinear3
const DEP_LINEAR_SIGMA: f64 = 2.0;
const DEP_LINEAR_RHO: f64 = -0.8;

pub fn park_ahn(x: &[f64]) -> f64 {
    PARK_AHN_TERMS
        .iter()
        .map(|t| x[t[0]] * x[t[1]] * x[t[2]])
        .sum()
}

pub fn ishigami(x: &[f64]) -> f64 {
    let s1 = x[0].sin();
    let s2 = x[1].sin();
    s1 + ISHIGAMI_A * s2 * s2 + ISHIGAMI_B * x[2].powi(4) * s1
}

pub fn g_function(a: &[f64], x: &[f64]) -> f64 {
    a.iter()
        .zip(x)
        .map(|(&ai, &xi)| ((4.0 * xi - 2.0).abs() + ai) / (1.0 + ai))
        .product()
}

fn covariance(mean: &[f64], cov: &[[f64; 4]]) -> CovarianceSpec {
    let rows: Vec<Vec<f64>> = cov.iter().map(|r| r[..mean.len()].to_vec()).collect();
    CovarianceSpec::new(
        mean.to_vec(),
        SquareMatrix::from_rows(&rows).expect("square"),
    )
    .expect("reference covariance is positive definite")
}

fn dep_linear_covariance() -> CovarianceSpec {
    let (s, r) = (DEP_LINEAR_SIGMA, DEP_LINEAR_RHO);
    covariance(
        &[0.0; 3],
        &[
            [1.0, 0.0, 0.0, 0.0],
            [0.0, 1.0, r * s, 0.0],
            [0.0, r * s, s * s, 0.0],
        ],
    )
}

fn park_ahn_marginals(params: LognormalParams) -> Vec<MarginalSpec> {
    PARK_AHN_MEANS
        .iter()
        .map(|&a| MarginalSpec::Lognormal {
            a,
            b: PARK_AHN_SD,
            params,
        })
        .collect()
}

/// Builds a reference test case with the default lognormal reading.
pub fn build(test: TestCaseId) -> InputModel {
    build_with(test, LognormalParams::default())
}

/// Builds a reference test case; `lognormal` only affects `ParkAhn7`.
pub fn build_with(test: TestCaseId, lognormal: LognormalParams) -> InputModel {
    let normal = |mean: f64, sd: f64| MarginalSpec::Normal { mean, sd };
    let model = match test {
        TestCaseId::Linear4 => InputModel::new(
            test.name(),
            Inputs::Independent(
                LINEAR_MEAN
                    .iter()
                    .zip(&LINEAR_SD)
                    .map(|(&m, &s)| normal(m, s))
                    .collect(),
            ),
            |x: &[f64]| x.iter().sum(),
        ),
        TestCaseId::ParkAhn7 => InputModel::new(
            test.name(),
            Inputs::Independent(park_ahn_marginals(lognormal)),
            park_ahn,
        ),
        TestCaseId::Ishigami => InputModel::new(
            test.name(),
            Inputs::Independent(vec![MarginalSpec::Uniform { lo: -PI, hi: PI }; 3]),
            ishigami,
        ),
        TestCaseId::GFunc10A => InputModel::new(
            test.name(),
            Inputs::Independent(vec![MarginalSpec::Uniform { lo: 0.0, hi: 1.0 }; 10]),
            |x: &[f64]| g_function(&GFUNC_A, x),
        ),
        TestCaseId::GFunc10B => InputModel::new(
            test.name(),
            Inputs::Independent(vec![MarginalSpec::Uniform { lo: 0.0, hi: 1.0 }; 10]),
            |x: &[f64]| g_function(&GFUNC_B, x),
        ),
        TestCaseId::DepQuad4 => InputModel::new(
            test.name(),
            Inputs::Correlated(covariance(&DEP_QUAD_MEAN, &DEP_QUAD_COV)),
            |x: &[f64]| x[0] * x[2] + x[1] * x[3],
        ),
        TestCaseId::DepLinear3 => InputModel::new(
            test.name(),
            Inputs::Correlated(dep_linear_covariance()),
            |x: &[f64]| x.iter().sum(),
        ),
    }
    .expect("reference model parameters are valid");
    let analytic = analytic_indices_with(test, lognormal);
    model
        .with_analytic(analytic)
        .expect("reference indices are valid")
}

pub fn analytic_indices(test: TestCaseId) -> AnalyticIndices {
    analytic_indices_with(test, LognormalParams::default())
}

fn analytic_indices_with(test: TestCaseId, lognormal: LognormalParams) -> AnalyticIndices {
    match test {
        TestCaseId::Linear4 => {
            let var: Vec<f64> = LINEAR_SD.iter().map(|s| s * s).collect();
            let d: f64 = var.iter().sum();
            let main: Vec<f64> = var.iter().map(|v| v / d).collect();
            AnalyticIndices {
                total: Some(main.clone()),
                main,
                f0: Some(LINEAR_MEAN.iter().sum()),
                variance: Some(d),
            }
        }
        TestCaseId::ParkAhn7 => {
            let (f0, d) = park_ahn_moments(&park_ahn_marginals(lognormal));
            AnalyticIndices {
                main: PARK_AHN_MAIN.to_vec(),
                total: None,
                f0: Some(f0),
                variance: Some(d),
            }
        }
        TestCaseId::Ishigami => ishigami_indices(),
        TestCaseId::GFunc10A => g_function_indices(&GFUNC_A),
        TestCaseId::GFunc10B => g_function_indices(&GFUNC_B),
        TestCaseId::DepQuad4 => dep_quad_indices(),
        TestCaseId::DepLinear3 => dep_linear_indices(),
    }
}

/// Exact mean and variance of the trilinear sum under independent lognormal
/// inputs, from `E[x^k] = exp(k mu + k^2 sigma^2 / 2)`.
fn park_ahn_moments(marginals: &[MarginalSpec]) -> (f64, f64) {
    let log: Vec<(f64, f64)> = marginals.iter().map(|m| m.log_scale().unwrap()).collect();
    let moment = |j: usize, k: u32| {
        let (mu, s) = log[j];
        let k = k as f64;
        (k * mu + 0.5 * k * k * s * s).exp()
    };
    let mean: f64 = PARK_AHN_TERMS
        .iter()
        .map(|t| t.iter().map(|&j| moment(j, 1)).product::<f64>())
        .sum();
    let mut second = 0.0;
    for t in &PARK_AHN_TERMS {
        for u in &PARK_AHN_TERMS {
            let mut power = [0u32; 7];
            for &j in t.iter().chain(u) {
                power[j] += 1;
            }
            second += power
                .iter()
                .enumerate()
                .filter(|(_, &p)| p > 0)
                .map(|(j, &p)| moment(j, p))
                .product::<f64>();
        }
    }
    (mean, second - mean * mean)
}

fn ishigami_indices() -> AnalyticIndices {
    let (a, b) = (ISHIGAMI_A, ISHIGAMI_B);
    let pi4 = PI.powi(4);
    let pi8 = PI.powi(8);
    let d1 = b * pi4 / 5.0 + b * b * pi8 / 50.0 + 0.5;
    let d2 = a * a / 8.0;
    let d13 = b * b * pi8 * (1.0 / 18.0 - 1.0 / 50.0);
    let d = d1 + d2 + d13;
    AnalyticIndices {
        main: vec![d1 / d, d2 / d, 0.0],
        total: Some(vec![(d1 + d13) / d, d2 / d, d13 / d]),
        f0: Some(a / 2.0),
        variance: Some(d),
    }
}

fn g_function_indices(a: &[f64]) -> AnalyticIndices {
    let partial: Vec<f64> = a
        .iter()
        .map(|ai| (1.0 / 3.0) / (1.0 + ai).powi(2))
        .collect();
    let product: f64 = partial.iter().map(|di| 1.0 + di).product();
    let d = product - 1.0;
    AnalyticIndices {
        main: partial.iter().map(|di| di / d).collect(),
        total: Some(
            partial
                .iter()
                .map(|di| di * product / (1.0 + di) / d)
                .collect(),
        ),
        f0: Some(1.0),
        variance: Some(d),
    }
}

fn dep_quad_indices() -> AnalyticIndices {
    let c = DEP_QUAD_COV;
    let (mu3, mu4) = (DEP_QUAD_MEAN[2], DEP_QUAD_MEAN[3]);
    let (s1, s2, s3, s4) = (
        c[0][0].sqrt(),
        c[1][1].sqrt(),
        c[2][2].sqrt(),
        c[3][3].sqrt(),
    );
    let (s12, s34) = (c[0][1], c[2][3]);
    let rho12 = s12 / (s1 * s2);
    let rho34 = s34 / (s3 * s4);
    let d = s1 * s1 * (s3 * s3 + mu3 * mu3)
        + s2 * s2 * (s4 * s4 + mu4 * mu4)
        + 2.0 * s12 * (s34 + mu3 * mu4);
    let main = vec![
        s1 * s1 * (mu3 + mu4 * rho12 * s2 / s1).powi(2) / d,
        s2 * s2 * (mu4 + mu3 * rho12 * s1 / s2).powi(2) / d,
        0.0,
        0.0,
    ];
    let total = vec![
        s1 * s1 * (1.0 - rho12 * rho12) * (s3 * s3 + mu3 * mu3) / d,
        s2 * s2 * (1.0 - rho12 * rho12) * (s4 * s4 + mu4 * mu4) / d,
        s1 * s1 * s3 * s3 * (1.0 - rho34 * rho34) / d,
        s2 * s2 * s4 * s4 * (1.0 - rho34 * rho34) / d,
    ];
    // E[x1 x3 + x2 x4] with cov(x1, x3) = cov(x2, x4) = 0
    let f0 = DEP_QUAD_MEAN[0] * mu3 + c[0][2] + DEP_QUAD_MEAN[1] * mu4 + c[1][3];
    AnalyticIndices {
        main,
        total: Some(total),
        f0: Some(f0),
        variance: Some(d),
    }
}

/// Main effects from the conditional means of jointly normal inputs:
/// `E[f | x2] = (1 + rho sigma) x2`, `E[f | x3] = (1 + rho / sigma) x3`.
fn dep_linear_indices() -> AnalyticIndices {
    let (s, r) = (DEP_LINEAR_SIGMA, DEP_LINEAR_RHO);
    let d = 2.0 + s * s + 2.0 * r * s;
    AnalyticIndices {
        main: vec![1.0 / d, (1.0 + r * s).powi(2) / d, (s + r).powi(2) / d],
        total: Some(vec![1.0 / d, (1.0 - r * r) / d, s * s * (1.0 - r * r) / d]),
        f0: Some(0.0),
        variance: Some(d),
    }
}
