//! Uniform point sets (pseudo-random and Sobol') and their transforms to the
//! input distributions of a model.

mod cholesky;
mod normal;
pub mod sobol;

pub use cholesky::{cholesky_lower, SquareMatrix};
pub use normal::inverse_normal_cdf;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use normal::ppnd16;

/// `n x dims` row-major array of values in [0, 1).
#[derive(Debug, Clone, PartialEq)]
pub struct UnitPointSet {
    n: usize,
    dims: usize,
    values: Vec<f64>,
}

impl UnitPointSet {
    pub fn new(n: usize, dims: usize, values: Vec<f64>) -> Result<Self> {
        if n == 0 || dims == 0 {
            return Err(Error::InvalidArgument("point set must be non-empty".into()));
        }
        if values.len() != n * dims {
            return Err(Error::DimensionMismatch {
                expected: n * dims,
                got: values.len(),
            });
        }
        if let Some(v) = values.iter().find(|v| !(**v >= 0.0 && **v < 1.0)) {
            return Err(Error::InvalidArgument(format!(
                "unit point coordinate {v} outside [0, 1)"
            )));
        }
        Ok(Self { n, dims, values })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, k: usize) -> &[f64] {
        &self.values[k * self.dims..(k + 1) * self.dims]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.dims)
    }

    /// Columns `[start, start + width)` as a new point set.
    pub fn column_block(&self, start: usize, width: usize) -> Result<Self> {
        if width == 0 || start + width > self.dims {
            return Err(Error::InvalidArgument(format!(
                "column block [{start}, {}) outside {} dimensions",
                start + width,
                self.dims
            )));
        }
        let values = self
            .rows()
            .flat_map(|r| r[start..start + width].iter().copied())
            .collect();
        Ok(Self {
            n: self.n,
            dims: width,
            values,
        })
    }
}

/// Source of a uniform point set.
///
/// QMC runs with run index `k` draw the contiguous Sobol' block of global
/// indices `[1 + k n, 1 + (k + 1) n)`; the all-zeros element 0 is never used.
/// MC runs draw from a ChaCha8 stream keyed by the seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SamplerSpec {
    Mc { seed: u64 },
    Qmc { run_index: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SamplerKind {
    Mc,
    Qmc,
}

impl SamplerKind {
    pub fn name(self) -> &'static str {
        match self {
            SamplerKind::Mc => "MC",
            SamplerKind::Qmc => "QMC",
        }
    }
}

impl std::str::FromStr for SamplerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mc" => Ok(SamplerKind::Mc),
            "qmc" => Ok(SamplerKind::Qmc),
            _ => Err(Error::UnknownName {
                what: "sampler",
                name: s.to_string(),
            }),
        }
    }
}

impl std::fmt::Display for SamplerKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl SamplerSpec {
    pub fn kind(&self) -> SamplerKind {
        match self {
            SamplerSpec::Mc { .. } => SamplerKind::Mc,
            SamplerSpec::Qmc { .. } => SamplerKind::Qmc,
        }
    }

    /// Spec for replicate `run` of a benchmark keyed by `master_seed`.
    pub fn for_run(kind: SamplerKind, master_seed: u64, run: u64) -> Self {
        match kind {
            SamplerKind::Mc => SamplerSpec::Mc {
                seed: mix_seed(master_seed, run),
            },
            SamplerKind::Qmc => SamplerSpec::Qmc { run_index: run },
        }
    }

    /// A seed for auxiliary pseudo-random draws tied to this spec.
    pub fn auxiliary_seed(&self, salt: u64) -> u64 {
        match *self {
            SamplerSpec::Mc { seed } => mix_seed(seed, salt),
            SamplerSpec::Qmc { run_index } => mix_seed(mix_seed(0x5157_4d43, run_index), salt),
        }
    }
}

/// SplitMix64 finalizer applied to `master ^ golden * (run + 1)`.
///
/// Distinct `(master, run)` pairs give decorrelated 64-bit seeds.
pub fn mix_seed(master: u64, run: u64) -> u64 {
    let mut z = master ^ run.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn generate_uniform(spec: SamplerSpec, n: usize, dims: usize) -> Result<UnitPointSet> {
    if n == 0 || dims == 0 {
        return Err(Error::InvalidArgument("point set must be non-empty".into()));
    }
    let mut values = vec![0.0; n * dims];
    match spec {
        SamplerSpec::Mc { seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            // Midpoints of a 2^53 grid: strictly inside (0, 1).
            let scale = 1.0 / (1u64 << 53) as f64;
            for v in values.iter_mut() {
                *v = ((rng.next_u64() >> 11) as f64 + 0.5) * scale;
            }
        }
        SamplerSpec::Qmc { run_index } => {
            if !n.is_power_of_two() {
                return Err(Error::NotPowerOfTwo(n));
            }
            let generator = sobol::Sobol::new(dims)?;
            let start = run_index
                .checked_mul(n as u64)
                .and_then(|s| s.checked_add(1))
                .ok_or_else(|| Error::InvalidArgument("QMC run index overflows".into()))?;
            generator.fill_block(start, n, &mut values)?;
        }
    }
    Ok(UnitPointSet { n, dims, values })
}

/// How the two numbers given for a lognormal input are read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LognormalParams {
    /// `(mu, sigma)` of the underlying normal: `x = exp(mu + sigma z)`.
    LogScale,
    /// Mean and standard deviation of `x` itself.
    Moments,
    /// Mean of `x` and standard deviation of `ln x`.
    #[default]
    MeanLogSd,
}

impl std::str::FromStr for LognormalParams {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "logscale" => Ok(Self::LogScale),
            "moments" => Ok(Self::Moments),
            "meanlogsd" => Ok(Self::MeanLogSd),
            _ => Err(Error::UnknownName {
                what: "lognormal interpretation",
                name: s.to_string(),
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MarginalSpec {
    Uniform {
        lo: f64,
        hi: f64,
    },
    Normal {
        mean: f64,
        sd: f64,
    },
    Lognormal {
        a: f64,
        b: f64,
        params: LognormalParams,
    },
}

impl MarginalSpec {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            MarginalSpec::Uniform { lo, hi } => hi > lo,
            MarginalSpec::Normal { sd, .. } => sd > 0.0,
            MarginalSpec::Lognormal { a, b, params } => {
                b > 0.0 && (params == LognormalParams::LogScale || a > 0.0)
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("invalid marginal {self:?}")))
        }
    }

    /// `(mu, sigma)` of `ln x` for a lognormal marginal.
    pub fn log_scale(&self) -> Option<(f64, f64)> {
        match *self {
            MarginalSpec::Lognormal { a, b, params } => Some(match params {
                LognormalParams::LogScale => (a, b),
                LognormalParams::Moments => {
                    let s2 = (1.0 + (b / a).powi(2)).ln();
                    (a.ln() - 0.5 * s2, s2.sqrt())
                }
                LognormalParams::MeanLogSd => (a.ln() - 0.5 * b * b, b),
            }),
            _ => None,
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            MarginalSpec::Uniform { lo, hi } => 0.5 * (lo + hi),
            MarginalSpec::Normal { mean, .. } => mean,
            MarginalSpec::Lognormal { .. } => {
                let (mu, sigma) = self.log_scale().unwrap();
                (mu + 0.5 * sigma * sigma).exp()
            }
        }
    }

    /// Inverse CDF at `u` in (0, 1); uniform marginals also accept `u = 0`.
    pub fn quantile(&self, u: f64) -> f64 {
        match *self {
            MarginalSpec::Uniform { lo, hi } => lo + (hi - lo) * u,
            MarginalSpec::Normal { mean, sd } => mean + sd * ppnd16(u),
            MarginalSpec::Lognormal { .. } => {
                let (mu, sigma) = self.log_scale().unwrap();
                (mu + sigma * ppnd16(u)).exp()
            }
        }
    }

    fn needs_open_interval(&self) -> bool {
        !matches!(self, MarginalSpec::Uniform { .. })
    }
}

/// Mean vector and covariance matrix of a multivariate normal input vector.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceSpec {
    mean: Vec<f64>,
    cov: SquareMatrix,
}

impl CovarianceSpec {
    pub fn new(mean: Vec<f64>, cov: SquareMatrix) -> Result<Self> {
        if mean.len() != cov.dim() {
            return Err(Error::DimensionMismatch {
                expected: cov.dim(),
                got: mean.len(),
            });
        }
        cholesky_lower(&cov)?;
        Ok(Self { mean, cov })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn cov(&self) -> &SquareMatrix {
        &self.cov
    }
}

/// `n x dims` row-major sample in model units.
#[derive(Debug, Clone, PartialEq)]
pub struct InputSample {
    n: usize,
    dims: usize,
    values: Vec<f64>,
}

impl InputSample {
    pub fn from_values(n: usize, dims: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != n * dims {
            return Err(Error::DimensionMismatch {
                expected: n * dims,
                got: values.len(),
            });
        }
        Ok(Self { n, dims, values })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, k: usize) -> &[f64] {
        &self.values[k * self.dims..(k + 1) * self.dims]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.dims)
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows().map(|r| r[j]).collect()
    }
}

pub fn transform_independent(u: &UnitPointSet, marginals: &[MarginalSpec]) -> Result<InputSample> {
    if u.dims() != marginals.len() {
        return Err(Error::DimensionMismatch {
            expected: marginals.len(),
            got: u.dims(),
        });
    }
    for m in marginals {
        m.validate()?;
    }
    let mut values = Vec::with_capacity(u.values().len());
    for row in u.rows() {
        for (&v, m) in row.iter().zip(marginals) {
            if m.needs_open_interval() && v == 0.0 {
                return Err(Error::InvalidProbability(v));
            }
            values.push(m.quantile(v));
        }
    }
    Ok(InputSample {
        n: u.n(),
        dims: u.dims(),
        values,
    })
}

/// Rows `x = mean + L z` with `z` the componentwise standard-normal quantiles
/// of the unit row and `L` the lower Cholesky factor of the covariance.
pub fn transform_correlated_normal(u: &UnitPointSet, cov: &CovarianceSpec) -> Result<InputSample> {
    let d = cov.dim();
    if u.dims() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: u.dims(),
        });
    }
    let l = cholesky_lower(cov.cov())?;
    let mut values = Vec::with_capacity(u.values().len());
    let mut z = vec![0.0; d];
    for row in u.rows() {
        for (zj, &v) in z.iter_mut().zip(row) {
            *zj = inverse_normal_cdf(v)?;
        }
        for i in 0..d {
            let li = l.row(i);
            let s: f64 = li[..=i].iter().zip(&z).map(|(a, b)| a * b).sum();
            values.push(cov.mean()[i] + s);
        }
    }
    Ok(InputSample {
        n: u.n(),
        dims: d,
        values,
    })
}
