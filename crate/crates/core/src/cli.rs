//! Command layer behind the `gsa` binary: the benchmark config format,
//! CSV and manifest writers, and plot-data files.
//!
//! Config files are flat `key = value` text; `#` starts a comment and blank
//! lines are ignored. Keys:
//!
//! | key           | value                                         | default |
//! |---------------|-----------------------------------------------|---------|
//! | `test`        | test case name, e.g. `Linear4`                | required |
//! | `estimators`  | comma list of `sobol, sk, owen, oracle, dlr`  | required |
//! | `sampler`     | `MC` or `QMC`                                 | required |
//! | `p_min`       | smallest exponent of the `N = 2^p` ladder     | required |
//! | `p_max`       | largest exponent                              | required |
//! | `K`           | replicates per `N`                            | `10`    |
//! | `master_seed` | 64-bit seed for MC replicates                 | `0`     |
//! | `bin_override`| `ceil`, `floor` or `fixed:M`                  | `ceil`  |
//! | `fit_window`  | `upper` or `full`                             | `upper` |
//! | `lognormal`   | `mean-logsd`, `logscale` or `moments`         | `mean-logsd` |

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::{SystemTime, UNIX_EPOCH};

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::estimators::{estimate, BinRule, EstimatorKind};
use crate::harness::{
    fit_all, run_benchmark, Axis, BenchmarkConfig, ConvergenceRecord, FitWindow, RateFit, ZERO_RMSE,
};
use crate::models::{build_with, TestCaseId};
use crate::sampling::{LognormalParams, SamplerKind, SamplerSpec};
use crate::Error;

pub const RECORDS_FILE: &str = "records.csv";
pub const RATES_FILE: &str = "rates.csv";
pub const MANIFEST_FILE: &str = "manifest.txt";

pub const RECORDS_HEADER: [&str; 11] = [
    "test",
    "estimator",
    "sampler",
    "input",
    "N",
    "n_cpu_actual",
    "n_cpu_table1",
    "rmse",
    "mean_estimate",
    "analytic",
    "K",
];

pub const RATES_HEADER: [&str; 10] = [
    "test",
    "estimator",
    "sampler",
    "input",
    "axis",
    "window",
    "alpha",
    "c",
    "r2",
    "points",
];

#[derive(Debug, Error)]
#[error("{}", self.render())]
pub struct ConfigError {
    pub line: Option<usize>,
    pub field: Option<String>,
    pub message: String,
}

impl ConfigError {
    fn at(line: usize, field: Option<&str>, message: impl Into<String>) -> Self {
        Self {
            line: Some(line),
            field: field.map(str::to_string),
            message: message.into(),
        }
    }

    fn render(&self) -> String {
        let mut s = String::from("config");
        if let Some(l) = self.line {
            let _ = write!(s, " line {l}");
        }
        if let Some(f) = &self.field {
            let _ = write!(s, ", field '{f}'");
        }
        let _ = write!(s, ": {}", self.message);
        s
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Lib(#[from] Error),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
}

impl CliError {
    fn io(path: &Path) -> impl FnOnce(io::Error) -> CliError + '_ {
        move |source| CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    /// 2 usage or config, 3 estimator/model incompatibility, 4 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Lib(Error::DependentInputs { .. }) => 3,
            CliError::Io { .. } => 4,
            _ => 2,
        }
    }
}

pub fn parse_list<T>(s: &str) -> Result<Vec<T>, Error>
where
    T: FromStr<Err = Error>,
{
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(str::parse)
        .collect()
}

const KNOWN_KEYS: [&str; 10] = [
    "test",
    "estimators",
    "sampler",
    "p_min",
    "p_max",
    "K",
    "master_seed",
    "bin_override",
    "fit_window",
    "lognormal",
];

pub fn parse_config(text: &str) -> Result<BenchmarkConfig, ConfigError> {
    let mut fields: BTreeMap<&str, (usize, &str)> = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            ConfigError::at(
                line_no,
                None,
                format!("expected 'key = value', got '{line}'"),
            )
        })?;
        let key = key.trim();
        let value = value.trim();
        let Some(&canonical) = KNOWN_KEYS.iter().find(|k| k.eq_ignore_ascii_case(key)) else {
            return Err(ConfigError::at(line_no, Some(key), "unknown key"));
        };
        if value.is_empty() {
            return Err(ConfigError::at(line_no, Some(canonical), "empty value"));
        }
        if let Some((first, _)) = fields.insert(canonical, (line_no, value)) {
            return Err(ConfigError::at(
                line_no,
                Some(canonical),
                format!("duplicate key (first set on line {first})"),
            ));
        }
    }

    fn get<T, E: fmt::Display>(
        fields: &BTreeMap<&str, (usize, &str)>,
        key: &str,
        parse: impl Fn(&str) -> Result<T, E>,
    ) -> Result<Option<T>, ConfigError> {
        match fields.get(key) {
            None => Ok(None),
            Some(&(line, v)) => parse(v)
                .map(Some)
                .map_err(|e| ConfigError::at(line, Some(key), e.to_string())),
        }
    }
    let required = |key: &str| ConfigError {
        line: None,
        field: Some(key.to_string()),
        message: "missing required key".into(),
    };
    let int = |v: &str| {
        v.parse::<u32>()
            .map_err(|_| format!("expected a non-negative integer, got '{v}'"))
    };

    let test = get(&fields, "test", TestCaseId::from_str)?;
    let estimators = get(&fields, "estimators", parse_list::<EstimatorKind>)?;
    let sampler = get(&fields, "sampler", SamplerKind::from_str)?;
    let p_min = get(&fields, "p_min", int)?;
    let p_max = get(&fields, "p_max", int)?;
    let runs = get(&fields, "K", |v| {
        v.parse::<usize>()
            .map_err(|_| format!("expected a replicate count, got '{v}'"))
    })?;
    let seed = get(&fields, "master_seed", |v| {
        v.parse::<u64>()
            .map_err(|_| format!("expected a 64-bit unsigned integer, got '{v}'"))
    })?;
    let bin_rule = get(&fields, "bin_override", BinRule::from_str)?;
    let fit_window = get(&fields, "fit_window", FitWindow::from_str)?;
    let lognormal = get(&fields, "lognormal", LognormalParams::from_str)?;

    let mut cfg = BenchmarkConfig::new(
        test.ok_or_else(|| required("test"))?,
        estimators.ok_or_else(|| required("estimators"))?,
        sampler.ok_or_else(|| required("sampler"))?,
        p_min.ok_or_else(|| required("p_min"))?,
        p_max.ok_or_else(|| required("p_max"))?,
    );
    cfg.runs = runs.unwrap_or(cfg.runs);
    cfg.master_seed = seed.unwrap_or(cfg.master_seed);
    cfg.bin_rule = bin_rule.unwrap_or(cfg.bin_rule);
    cfg.fit_window = fit_window.unwrap_or(cfg.fit_window);
    cfg.lognormal = lognormal.unwrap_or(cfg.lognormal);

    cfg.validate().map_err(|e| {
        let field = if cfg.estimators.is_empty() {
            "estimators"
        } else if cfg.runs < 2 {
            "K"
        } else if cfg.p_max > 26 {
            "p_max"
        } else {
            "p_min"
        };
        ConfigError {
            line: fields.get(field).map(|&(l, _)| l),
            field: Some(field.into()),
            message: e.to_string(),
        }
    })?;
    Ok(cfg)
}

fn lognormal_name(l: LognormalParams) -> &'static str {
    match l {
        LognormalParams::LogScale => "logscale",
        LognormalParams::Moments => "moments",
        LognormalParams::MeanLogSd => "mean-logsd",
    }
}

/// Canonical text of a config; parses back to an equal value.
pub fn render_config(cfg: &BenchmarkConfig) -> String {
    let estimators: Vec<&str> = cfg.estimators.iter().map(|e| e.name()).collect();
    format!(
        "test = {}\nestimators = {}\nsampler = {}\np_min = {}\np_max = {}\nK = {}\nmaster_seed = {}\nbin_override = {}\nfit_window = {}\nlognormal = {}\n",
        cfg.test,
        estimators.join(","),
        cfg.sampler,
        cfg.p_min,
        cfg.p_max,
        cfg.runs,
        cfg.master_seed,
        cfg.bin_rule,
        cfg.fit_window,
        lognormal_name(cfg.lognormal),
    )
}

pub fn config_checksum(cfg: &BenchmarkConfig) -> String {
    hex::encode(Sha256::digest(render_config(cfg).as_bytes()))
}

/// Floats use Rust's shortest round-trip formatting, so identical records
/// always produce identical bytes.
pub fn write_records<W: Write>(out: W, records: &[ConvergenceRecord]) -> io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(RECORDS_HEADER)?;
    for r in records {
        w.write_record([
            r.test.to_string(),
            r.estimator.to_string(),
            r.sampler.to_string(),
            r.input.to_string(),
            r.n.to_string(),
            r.n_cpu_actual.to_string(),
            r.n_cpu_table1.to_string(),
            r.rmse.to_string(),
            r.mean_estimate.to_string(),
            r.analytic.to_string(),
            r.runs.to_string(),
        ])?;
    }
    w.flush()
}

pub fn write_rates<W: Write>(out: W, cfg: &BenchmarkConfig, fits: &[RateFit]) -> io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(RATES_HEADER)?;
    for f in fits {
        w.write_record([
            cfg.test.to_string(),
            f.estimator.to_string(),
            cfg.sampler.to_string(),
            f.input.to_string(),
            f.axis.to_string(),
            cfg.fit_window.to_string(),
            f.alpha.to_string(),
            f.c.to_string(),
            f.r2.to_string(),
            f.points.to_string(),
        ])?;
    }
    w.flush()
}

#[derive(Debug, Clone)]
pub struct RunManifest {
    pub config: BenchmarkConfig,
    pub records: PathBuf,
    pub rates: PathBuf,
    pub version: &'static str,
    pub created_unix: u64,
    pub checksum: String,
}

impl RunManifest {
    pub fn new(config: BenchmarkConfig, out_dir: &Path) -> Self {
        let checksum = config_checksum(&config);
        Self {
            config,
            records: out_dir.join(RECORDS_FILE),
            rates: out_dir.join(RATES_FILE),
            version: env!("CARGO_PKG_VERSION"),
            created_unix: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map_or(0, |d| d.as_secs()),
            checksum,
        }
    }

    /// Header lines are comments, so the body is itself a valid config file.
    pub fn render(&self) -> String {
        format!(
            "# gsa {}\n# created_unix = {}\n# config_sha256 = {}\n# records = {}\n# rates = {}\n{}",
            self.version,
            self.created_unix,
            self.checksum,
            self.records.display(),
            self.rates.display(),
            render_config(&self.config),
        )
    }
}

pub struct BenchOutput {
    pub manifest: RunManifest,
    pub records: Vec<ConvergenceRecord>,
    pub fits: Vec<RateFit>,
}

fn write_file(
    path: &Path,
    write: impl FnOnce(&mut io::BufWriter<fs::File>) -> io::Result<()>,
) -> Result<(), CliError> {
    let file = fs::File::create(path).map_err(CliError::io(path))?;
    let mut buf = io::BufWriter::new(file);
    write(&mut buf)
        .and_then(|_| buf.flush())
        .map_err(CliError::io(path))
}

pub fn load_config(path: &Path) -> Result<BenchmarkConfig, CliError> {
    let text = fs::read_to_string(path).map_err(CliError::io(path))?;
    Ok(parse_config(&text)?)
}

/// Runs the benchmark described by `cfg` and writes records, rates and the
/// manifest into `out_dir`.
pub fn bench(cfg: BenchmarkConfig, out_dir: &Path) -> Result<BenchOutput, CliError> {
    let records = run_benchmark(&cfg)?;
    let mut fits = fit_all(&records, Axis::N, cfg.fit_window);
    fits.extend(fit_all(&records, Axis::NCpu, cfg.fit_window));

    fs::create_dir_all(out_dir).map_err(CliError::io(out_dir))?;
    let manifest = RunManifest::new(cfg, out_dir);
    write_file(&manifest.records, |w| write_records(w, &records))?;
    write_file(&manifest.rates, |w| write_rates(w, &manifest.config, &fits))?;
    let manifest_path = out_dir.join(MANIFEST_FILE);
    write_file(&manifest_path, |w| {
        w.write_all(manifest.render().as_bytes())
    })?;
    Ok(BenchOutput {
        manifest,
        records,
        fits,
    })
}

#[derive(Debug, Clone)]
pub struct EstimateRequest {
    pub test: TestCaseId,
    pub estimators: Vec<EstimatorKind>,
    pub sampler: SamplerKind,
    pub n: usize,
    pub seed: u64,
    pub run_index: u64,
    pub lognormal: LognormalParams,
}

/// One table per estimator: estimated index, analytic value and absolute
/// error for every input.
pub fn estimate_table(req: &EstimateRequest) -> Result<String, CliError> {
    let model = build_with(req.test, req.lognormal);
    let spec = match req.sampler {
        SamplerKind::Mc => SamplerSpec::Mc { seed: req.seed },
        SamplerKind::Qmc => SamplerSpec::Qmc {
            run_index: req.run_index,
        },
    };
    let analytic = model.analytic_main();
    let mut out = String::new();
    for &kind in &req.estimators {
        let est = estimate(&model, kind, req.n, spec, BinRule::default())?;
        let evals = est.iter().map(|e| e.eval_count_share).sum::<f64>().round();
        let _ = writeln!(
            out,
            "{} {} {} N={} evaluations={}",
            req.test, kind, req.sampler, req.n, evals
        );
        let _ = writeln!(
            out,
            "{:>5}  {:>10}  {:>10}  {:>10}",
            "input", "S_hat", "analytic", "abs_error"
        );
        for e in &est {
            let i = e.input;
            match analytic {
                Some(a) => {
                    let _ = writeln!(
                        out,
                        "{:>5}  {:>10.6}  {:>10.6}  {:>10.6}",
                        i + 1,
                        e.index,
                        a[i],
                        (e.index - a[i]).abs()
                    );
                }
                None => {
                    let _ = writeln!(
                        out,
                        "{:>5}  {:>10.6}  {:>10}  {:>10}",
                        i + 1,
                        e.index,
                        "-",
                        "-"
                    );
                }
            }
        }
        out.push('\n');
    }
    Ok(out)
}

/// Parses a records file written by [`write_records`].
pub fn read_records(path: &Path) -> Result<Vec<ConvergenceRecord>, CliError> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(source) => CliError::Io {
            path: path.to_path_buf(),
            source,
        },
        other => CliError::Usage(format!("{}: {other:?}", path.display())),
    })?;
    let headers = reader
        .headers()
        .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?
        .clone();
    let mut column = BTreeMap::new();
    for name in RECORDS_HEADER {
        let idx = headers.iter().position(|h| h == name).ok_or_else(|| {
            CliError::Usage(format!("{}: missing column '{name}'", path.display()))
        })?;
        column.insert(name, idx);
    }

    let mut records = Vec::new();
    for (row, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        let line = row + 2;
        let field = |name: &str| rec.get(column[name]).unwrap_or("");
        let bad = |name: &str| {
            CliError::Usage(format!(
                "{} line {line}: bad value in column '{name}'",
                path.display()
            ))
        };
        let uint = |name: &str| field(name).parse::<usize>().map_err(|_| bad(name));
        let float = |name: &str| field(name).parse::<f64>().map_err(|_| bad(name));
        records.push(ConvergenceRecord {
            test: field("test").parse()?,
            estimator: field("estimator").parse()?,
            sampler: field("sampler").parse()?,
            input: uint("input")?,
            n: uint("N")?,
            n_cpu_actual: uint("n_cpu_actual")?,
            n_cpu_table1: uint("n_cpu_table1")?,
            rmse: float("rmse")?,
            mean_estimate: float("mean_estimate")?,
            analytic: float("analytic")?,
            runs: uint("K")?,
        });
    }
    Ok(records)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlotFile {
    pub name: String,
    pub contents: String,
}

fn plot_value(rmse: f64) -> String {
    if rmse >= ZERO_RMSE {
        rmse.to_string()
    } else {
        "NaN".into()
    }
}

/// Whitespace-delimited RMSE tables, one per (test, sampler, input).
///
/// With [`Axis::N`] the first column is `N` and each estimator contributes
/// an `rmse_<name>` column. With [`Axis::NCpu`] every estimator has its own
/// cost, so columns come in `n_cpu_<name> rmse_<name>` pairs. Rows follow
/// ascending `N`; RMSE values below [`ZERO_RMSE`] are written as `NaN` so
/// log scales skip them.
pub fn plot_files(records: &[ConvergenceRecord], axis: Axis) -> Vec<PlotFile> {
    let mut groups: BTreeMap<(TestCaseId, SamplerKind, usize), Vec<&ConvergenceRecord>> =
        BTreeMap::new();
    for r in records {
        groups
            .entry((r.test, r.sampler, r.input))
            .or_default()
            .push(r);
    }
    groups
        .into_iter()
        .map(|((test, sampler, input), rows)| {
            let mut estimators: Vec<EstimatorKind> = rows.iter().map(|r| r.estimator).collect();
            estimators.sort();
            estimators.dedup();
            let mut ns: Vec<usize> = rows.iter().map(|r| r.n).collect();
            ns.sort();
            ns.dedup();

            let mut header: Vec<String> = Vec::new();
            if axis == Axis::N {
                header.push("N".into());
            }
            for e in &estimators {
                if axis == Axis::NCpu {
                    header.push(format!("n_cpu_{e}"));
                }
                header.push(format!("rmse_{e}"));
            }
            let mut contents = format!("# {}\n", header.join(" "));
            for &n in &ns {
                let mut cells: Vec<String> = Vec::new();
                if axis == Axis::N {
                    cells.push(n.to_string());
                }
                for &e in &estimators {
                    let r = rows.iter().find(|r| r.estimator == e && r.n == n);
                    if axis == Axis::NCpu {
                        cells.push(r.map_or("NaN".into(), |r| r.n_cpu_actual.to_string()));
                    }
                    cells.push(r.map_or("NaN".into(), |r| plot_value(r.rmse)));
                }
                contents.push_str(&cells.join(" "));
                contents.push('\n');
            }
            let suffix = match axis {
                Axis::N => "n",
                Axis::NCpu => "ncpu",
            };
            PlotFile {
                name: format!("{test}_{sampler}_i{input}_{suffix}.dat"),
                contents,
            }
        })
        .collect()
}

pub fn plotdata(records_path: &Path, axis: Axis, out_dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let records = read_records(records_path)?;
    if records.is_empty() {
        return Err(CliError::Usage(format!(
            "{}: no records",
            records_path.display()
        )));
    }
    fs::create_dir_all(out_dir).map_err(CliError::io(out_dir))?;
    plot_files(&records, axis)
        .into_iter()
        .map(|f| {
            let path = out_dir.join(&f.name);
            fs::write(&path, f.contents).map_err(CliError::io(&path))?;
            Ok(path)
        })
        .collect()
}
