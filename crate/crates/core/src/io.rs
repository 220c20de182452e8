//! Experiment configs, series ingestion and CSV reports.
//!
//! Numbers are written in shortest round-trip scientific notation, so every
//! value re-reads to the identical `f64`. Each CSV starts with a
//! `# config_hash=...` comment line when it comes from a config.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Deserialize;
use sha2::{Digest, Sha256};

use crate::cogarch::{samples_per_period, simulate_path, CogarchParams, CogarchPath};
use crate::coherence::{sample_acf, significant_pairs, CoherenceConfig, CoherenceReport};
use crate::conditions::{check, ConditionReport};
use crate::dist::JumpDist;
use crate::error::{Error, Result};
use crate::exec::{path_rng, Execution};
use crate::semi_levy::SemiLevyConfig;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    seed: u64,
    periods: u64,
    sample_interval: f64,
    semi_levy: RawSemiLevy,
    cogarch: RawCogarch,
    #[serde(default)]
    analysis: RawAnalysis,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSemiLevy {
    tau: f64,
    d: Option<usize>,
    lengths: Vec<f64>,
    rates: Vec<f64>,
    jump_dist: Vec<String>,
    #[serde(default)]
    delta: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCogarch {
    alpha0: f64,
    alpha: Vec<f64>,
    beta: Vec<f64>,
    y0: Vec<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAnalysis {
    #[serde(rename = "M", default = "default_m")]
    m: usize,
    #[serde(default = "default_alpha")]
    alpha: f64,
    #[serde(default = "default_max_lag")]
    max_lag: usize,
    stride: Option<usize>,
}

fn default_m() -> usize {
    240
}

fn default_alpha() -> f64 {
    0.05
}

fn default_max_lag() -> usize {
    104
}

impl Default for RawAnalysis {
    fn default() -> Self {
        Self {
            m: default_m(),
            alpha: default_alpha(),
            max_lag: default_max_lag(),
            stride: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisConfig {
    pub m: usize,
    pub alpha: f64,
    pub max_lag: usize,
    pub stride: Option<usize>,
}

impl AnalysisConfig {
    pub fn coherence(&self) -> CoherenceConfig {
        let mut c = CoherenceConfig::new(self.m, self.alpha);
        c.stride = self.stride;
        c
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub periods: u64,
    pub sample_interval: f64,
    pub semi_levy: SemiLevyConfig,
    pub cogarch: CogarchParams,
    pub analysis: AnalysisConfig,
    /// Hex SHA-256 of the config text.
    pub hash: String,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let s = raw.semi_levy;
        if let Some(d) = s.d {
            if d != s.lengths.len() {
                return Err(Error::Config(format!(
                    "d = {d} but {} interval lengths given",
                    s.lengths.len()
                )));
            }
        }
        let dists = s
            .jump_dist
            .iter()
            .map(|j| j.parse::<JumpDist>())
            .collect::<Result<Vec<_>>>()?;
        let semi_levy = SemiLevyConfig::new(s.tau, s.lengths, s.rates, dists, s.delta)?;
        let c = raw.cogarch;
        let cogarch = CogarchParams::new(c.alpha0, &c.alpha, &c.beta, &c.y0)?;
        if raw.periods == 0 {
            return Err(Error::Config("periods must be positive".into()));
        }
        samples_per_period(semi_levy.period(), raw.sample_interval)?;
        let a = raw.analysis;
        Ok(Self {
            seed: raw.seed,
            periods: raw.periods,
            sample_interval: raw.sample_interval,
            semi_levy,
            cogarch,
            analysis: AnalysisConfig {
                m: a.m,
                alpha: a.alpha,
                max_lag: a.max_lag,
                stride: a.stride,
            },
            hash: config_hash(text.as_bytes()),
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        Self::parse(&text)
    }

    pub fn samples_per_period(&self) -> u64 {
        samples_per_period(self.semi_levy.period(), self.sample_interval)
            .expect("validated on parse")
    }
}

pub fn config_hash(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Formats a value so that parsing it back yields the same `f64`.
pub fn fmt_num(x: f64) -> String {
    format!("{x:e}")
}

#[derive(Debug, Clone, PartialEq)]
pub struct PriceSeries {
    pub timestamps: Vec<f64>,
    pub prices: Vec<f64>,
    pub samples_per_period: Option<usize>,
}

impl PriceSeries {
    pub fn new(
        timestamps: Vec<f64>,
        prices: Vec<f64>,
        samples_per_period: Option<usize>,
    ) -> Result<Self> {
        if timestamps.len() != prices.len() {
            return Err(Error::InvalidParameter(format!(
                "{} timestamps for {} prices",
                timestamps.len(),
                prices.len()
            )));
        }
        if let Some(i) = timestamps.windows(2).position(|w| !(w[1] > w[0])) {
            return Err(Error::Data {
                line: i + 1,
                message: "timestamps must be strictly increasing".into(),
            });
        }
        if let Some(i) = prices.iter().position(|&p| !(p > 0.0 && p.is_finite())) {
            return Err(Error::Data {
                line: i,
                message: format!("price {} is not positive", prices[i]),
            });
        }
        Ok(Self {
            timestamps,
            prices,
            samples_per_period,
        })
    }
}

/// `ln(p_{k+1}/p_k)`; the error names the row of a non-positive price.
pub fn log_returns(prices: &[f64]) -> Result<Vec<f64>> {
    if prices.len() < 2 {
        return Err(Error::InvalidParameter("need at least two prices".into()));
    }
    if let Some(i) = prices.iter().position(|&p| !(p > 0.0 && p.is_finite())) {
        return Err(Error::Data {
            line: i,
            message: format!("price {} is not positive", prices[i]),
        });
    }
    Ok(prices.windows(2).map(|w| (w[1] / w[0]).ln()).collect())
}

/// A numeric CSV with a header row.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub headers: Vec<String>,
    pub columns: Vec<Vec<f64>>,
}

impl Table {
    pub fn column(&self, name: &str) -> Result<&[f64]> {
        self.headers
            .iter()
            .position(|h| h == name)
            .map(|i| self.columns[i].as_slice())
            .ok_or_else(|| Error::Data {
                line: 1,
                message: format!(
                    "no column named {name:?} (have {})",
                    self.headers.join(", ")
                ),
            })
    }

    pub fn last_column(&self) -> &[f64] {
        self.columns.last().map(Vec::as_slice).unwrap_or(&[])
    }
}

/// Reads a numeric CSV. `#` lines are comments; errors carry the 1-based line number.
pub fn read_table(path: &Path) -> Result<Table> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(e, path))?;
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| csv_error(e, path))?
        .iter()
        .map(str::to_string)
        .collect();
    let mut columns = vec![Vec::new(); headers.len()];
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(e, path))?;
        let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
        if record.len() != headers.len() {
            return Err(Error::Data {
                line,
                message: format!("expected {} fields, found {}", headers.len(), record.len()),
            });
        }
        for (col, field) in columns.iter_mut().zip(record.iter()) {
            let v = field.parse::<f64>().map_err(|_| Error::Data {
                line,
                message: format!("{field:?} is not a number"),
            })?;
            col.push(v);
        }
    }
    Ok(Table { headers, columns })
}

fn csv_error(e: csv::Error, path: &Path) -> Error {
    let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        kind => Error::Data {
            line,
            message: format!("{}: {kind:?}", path.display()),
        },
    }
}

/// Reads `time,price` (or the named columns) into a [`PriceSeries`].
pub fn read_price_series(path: &Path, time_col: &str, price_col: &str) -> Result<PriceSeries> {
    let t = read_table(path)?;
    // +2: header line and 1-based numbering
    PriceSeries::new(
        t.column(time_col)?.to_vec(),
        t.column(price_col)?.to_vec(),
        None,
    )
    .map_err(|e| match e {
        Error::Data { line, message } => Error::Data {
            line: line + 2,
            message,
        },
        e => e,
    })
}

struct CsvOut {
    w: BufWriter<File>,
}

impl CsvOut {
    fn create(path: &Path, hash: Option<&str>, header: &str) -> Result<Self> {
        let mut w = BufWriter::new(File::create(path)?);
        if let Some(h) = hash {
            writeln!(w, "# config_hash={h}")?;
        }
        writeln!(w, "{header}")?;
        Ok(Self { w })
    }

    fn row(&mut self, fields: &[String]) -> Result<()> {
        writeln!(self.w, "{}", fields.join(","))?;
        Ok(())
    }

    fn finish(mut self) -> Result<()> {
        self.w.flush()?;
        Ok(())
    }
}

pub fn write_grid_csv(path: &Path, sim: &CogarchPath, hash: Option<&str>) -> Result<()> {
    let mut out = CsvOut::create(path, hash, "index,time,V,G")?;
    for i in 0..sim.times.len() {
        out.row(&[
            i.to_string(),
            fmt_num(sim.times[i]),
            fmt_num(sim.v_grid[i]),
            fmt_num(sim.g_grid[i]),
        ])?;
    }
    out.finish()
}

pub fn write_jumps_csv(path: &Path, sim: &CogarchPath, hash: Option<&str>) -> Result<()> {
    let mut out = CsvOut::create(path, hash, "n,arrival,jump,V,G")?;
    for i in 0..sim.arrivals.len() {
        out.row(&[
            (i + 1).to_string(),
            fmt_num(sim.arrivals[i]),
            fmt_num(sim.jumps[i]),
            fmt_num(sim.v_jump[i]),
            fmt_num(sim.g_jump[i]),
        ])?;
    }
    out.finish()
}

pub fn write_coherence_csv(
    path: &Path,
    report: &CoherenceReport,
    hash: Option<&str>,
) -> Result<()> {
    let mut out = CsvOut::create(path, hash, "P,Q,value,significant")?;
    for v in &report.values {
        out.row(&[
            v.p.to_string(),
            v.q.to_string(),
            fmt_num(v.value),
            (v.significant as u8).to_string(),
        ])?;
    }
    out.finish()
}

pub fn coherence_summary(report: &CoherenceReport) -> String {
    let period = report
        .estimated_period
        .map(|p| p.to_string())
        .unwrap_or_else(|| "none".into());
    let lines: Vec<String> = report.lines.iter().map(|f| f.to_string()).collect();
    format!(
        "n={}\nM={}\nalpha={}\nthreshold={}\nscan_score={}\nscan_threshold={}\nlines={}\nperiod={}\nclassification={}\n",
        report.n,
        report.m,
        report.alpha,
        fmt_num(report.threshold),
        fmt_num(report.scan_score),
        fmt_num(report.scan_threshold),
        lines.join(" "),
        period,
        report.classification
    )
}

pub fn write_acf_csv(path: &Path, acf: &[f64], band: f64, hash: Option<&str>) -> Result<()> {
    let mut out = CsvOut::create(path, hash, "lag,acf,band")?;
    for (h, r) in acf.iter().enumerate() {
        out.row(&[h.to_string(), fmt_num(*r), fmt_num(band)])?;
    }
    out.finish()
}

/// Files written by [`run_simulate`].
#[derive(Debug, Clone)]
pub struct SimulateOutput {
    pub path: CogarchPath,
    pub grid: PathBuf,
    pub jumps: PathBuf,
    pub manifest: PathBuf,
}

/// Simulates one path from the config and writes `grid.csv`, `jumps.csv`
/// and `manifest.txt` into `out`.
///
/// With `require_valid` the condition report must pass first; a failing report
/// is returned as the error text.
pub fn run_simulate(
    cfg: &ExperimentConfig,
    seed: u64,
    out: &Path,
    require_valid: bool,
) -> Result<SimulateOutput> {
    if require_valid {
        let report = run_check(cfg);
        if !report.overall {
            return Err(Error::InvalidParameter(format!(
                "parameters fail the stationarity and non-negativity conditions:\n{report}"
            )));
        }
    }
    let mut rng = path_rng(seed);
    let jump_path = cfg.semi_levy.simulate(cfg.periods, &mut rng)?;
    let sim = simulate_path(
        &jump_path,
        &cfg.cogarch,
        cfg.sample_interval,
        cfg.semi_levy.period(),
    )?;
    fs::create_dir_all(out)?;
    let grid = out.join("grid.csv");
    let jumps = out.join("jumps.csv");
    let manifest = out.join("manifest.txt");
    write_grid_csv(&grid, &sim, Some(&cfg.hash))?;
    write_jumps_csv(&jumps, &sim, Some(&cfg.hash))?;
    let text = format!(
        "seed={seed}\nconfig_hash={}\nperiods={}\nsamples_per_period={}\ngrid_samples={}\narrivals={}\nhorizon={}\nmin_volatility={}\n",
        cfg.hash,
        cfg.periods,
        cfg.samples_per_period(),
        sim.times.len(),
        sim.arrivals.len(),
        fmt_num(jump_path.horizon),
        fmt_num(sim.min_volatility()),
    );
    fs::write(&manifest, text)?;
    Ok(SimulateOutput {
        path: sim,
        grid,
        jumps,
        manifest,
    })
}

pub fn run_check(cfg: &ExperimentConfig) -> ConditionReport {
    check(&cfg.semi_levy, &cfg.cogarch)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Transform {
    #[default]
    None,
    Diff,
    LogReturns,
}

/// Applies the transform, keeps the last `tail` samples and optionally squares.
pub fn prepare_series(
    x: &[f64],
    transform: Transform,
    tail: Option<usize>,
    square: bool,
) -> Result<Vec<f64>> {
    let mut y = match transform {
        Transform::None => x.to_vec(),
        Transform::Diff => crate::cogarch::increments(x),
        Transform::LogReturns => log_returns(x)?,
    };
    if let Some(k) = tail {
        if k > y.len() {
            return Err(Error::InvalidParameter(format!(
                "tail {k} exceeds series length {}",
                y.len()
            )));
        }
        y.drain(..y.len() - k);
    }
    if square {
        y.iter_mut().for_each(|v| *v *= *v);
    }
    Ok(y)
}

/// Runs the coherence analysis and writes `coherence.csv` and `coherence_summary.txt`.
pub fn run_coherence(
    x: &[f64],
    cfg: &CoherenceConfig,
    out: &Path,
    hash: Option<&str>,
) -> Result<CoherenceReport> {
    let report = significant_pairs(x, cfg)?;
    fs::create_dir_all(out)?;
    write_coherence_csv(&out.join("coherence.csv"), &report, hash)?;
    let mut summary = coherence_summary(&report);
    if let Some(h) = hash {
        summary.insert_str(0, &format!("config_hash={h}\n"));
    }
    fs::write(out.join("coherence_summary.txt"), summary)?;
    Ok(report)
}

/// Writes `acf.csv` and returns the autocorrelations.
pub fn run_acf(x: &[f64], max_lag: usize, out: &Path, hash: Option<&str>) -> Result<Vec<f64>> {
    let acf = sample_acf(x, max_lag)?;
    fs::create_dir_all(out)?;
    write_acf_csv(
        &out.join("acf.csv"),
        &acf,
        crate::coherence::acf_band(x.len()),
        hash,
    )?;
    Ok(acf)
}

/// Rows of `u, Re φ, Im φ` and, with `mc_paths > 0`, the Monte Carlo estimate.
pub fn run_charfn(
    cfg: &ExperimentConfig,
    t: f64,
    us: &[f64],
    mc_paths: usize,
    seed: u64,
    out: &Path,
) -> Result<Vec<[f64; 5]>> {
    let empirical = if mc_paths > 0 {
        Some(
            cfg.semi_levy
                .empirical_char_function(us, t, mc_paths, seed, Execution::default())?,
        )
    } else {
        None
    };
    let mut rows = Vec::with_capacity(us.len());
    for (i, &u) in us.iter().enumerate() {
        let phi = cfg.semi_levy.char_function(u, t)?;
        let (er, ei) = empirical
            .as_ref()
            .map(|e| (e[i].re, e[i].im))
            .unwrap_or((f64::NAN, f64::NAN));
        rows.push([u, phi.re, phi.im, er, ei]);
    }
    fs::create_dir_all(out)?;
    let mut w = CsvOut::create(
        &out.join("charfn.csv"),
        Some(&cfg.hash),
        "u,re,im,mc_re,mc_im",
    )?;
    for r in &rows {
        w.row(&r.iter().map(|&v| fmt_num(v)).collect::<Vec<_>>())?;
    }
    w.finish()?;
    Ok(rows)
}

/// `−2, −1.5, …, 2`.
pub fn default_u_grid() -> Vec<f64> {
    (0..=8).map(|i| -2.0 + 0.5 * i as f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    pub const EXAMPLE: &str = r#"
seed = 42
periods = 30
sample_interval = 0.25

[semi_levy]
tau = 6.5
d = 4
lengths = [0.5, 2.5, 3.0, 0.5]
rates = [4.0, 10.0, 5.0, 30.0]
jump_dist = ["normal(2, 4)", "normal(1.5, 2.5)", "normal(2.5, 1.5)", "normal(1.75, 3)"]
delta = 0.0

[cogarch]
alpha0 = 1e-6
alpha = [0.005]
beta = [2.1, 6.0, 0.6]
y0 = [0.37e-3, 0.05e-3, 0.19e-3]

[analysis]
M = 240
alpha = 0.05
max_lag = 104
"#;

    #[test]
    fn parse_example() {
        let cfg = ExperimentConfig::parse(EXAMPLE).unwrap();
        assert_eq!(cfg.periods, 30);
        assert_eq!(cfg.samples_per_period(), 26);
        assert_eq!(cfg.semi_levy.d(), 4);
        assert_eq!(cfg.cogarch.q(), 3);
        assert_eq!(cfg.analysis.m, 240);
        assert_eq!(cfg.hash.len(), 64);
        assert_eq!(cfg.hash, config_hash(EXAMPLE.as_bytes()));
    }

    #[test]
    fn config_errors() {
        let bad_interval = EXAMPLE.replace("sample_interval = 0.25", "sample_interval = 0.3");
        assert!(ExperimentConfig::parse(&bad_interval).is_err());
        let bad_d = EXAMPLE.replace("d = 4", "d = 3");
        assert!(matches!(
            ExperimentConfig::parse(&bad_d),
            Err(Error::Config(_))
        ));
        let bad_dist = EXAMPLE.replace("normal(2, 4)", "gamma(2, 4)");
        assert!(ExperimentConfig::parse(&bad_dist).is_err());
        let unknown = EXAMPLE.replace("delta = 0.0", "delta = 0.0\nextra = 1");
        assert!(ExperimentConfig::parse(&unknown).is_err());
    }

    #[test]
    fn hash_known_value() {
        assert_eq!(
            config_hash(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn log_return_examples() {
        assert_eq!(log_returns(&[5.0, 5.0, 5.0]).unwrap(), vec![0.0, 0.0]);
        assert!((log_returns(&[100.0, 105.0]).unwrap()[0] - 0.04879016416943205).abs() < 1e-15);
        let p = [100.0, 101.0, 99.5, 102.25, 98.0];
        let total: f64 = log_returns(&p).unwrap().iter().sum();
        assert!((total - (98.0f64 / 100.0).ln()).abs() < 1e-14);
        assert!(matches!(
            log_returns(&[1.0, 0.0, 2.0]),
            Err(Error::Data { line: 1, .. })
        ));
        assert!(log_returns(&[1.0]).is_err());
    }

    #[test]
    fn number_format_round_trips() {
        for x in [
            0.1,
            1.0 / 3.0,
            -2.5e-300,
            6.02214076e23,
            0.0,
            f64::MIN_POSITIVE,
        ] {
            assert_eq!(fmt_num(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn price_series_validation() {
        assert!(PriceSeries::new(vec![0.0, 1.0], vec![1.0, 2.0], Some(26)).is_ok());
        assert!(PriceSeries::new(vec![0.0, 0.0], vec![1.0, 2.0], None).is_err());
        assert!(PriceSeries::new(vec![0.0, 1.0], vec![1.0, -2.0], None).is_err());
        assert!(PriceSeries::new(vec![0.0], vec![1.0, 2.0], None).is_err());
    }

    #[test]
    fn malformed_csv_line_number() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        fs::write(&path, "time,price\n0,100\n1,abc\n").unwrap();
        match read_table(&path) {
            Err(Error::Data { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        fs::write(&path, "time,price\n0,100\n1,0\n").unwrap();
        match read_price_series(&path, "time", "price") {
            Err(Error::Data { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn prepare_series_options() {
        let x = [1.0, 2.0, 4.0, 7.0];
        assert_eq!(
            prepare_series(&x, Transform::Diff, None, false).unwrap(),
            vec![1.0, 2.0, 3.0]
        );
        assert_eq!(
            prepare_series(&x, Transform::Diff, Some(2), true).unwrap(),
            vec![4.0, 9.0]
        );
        assert!(prepare_series(&x, Transform::None, Some(5), false).is_err());
    }

    #[test]
    fn u_grid() {
        assert_eq!(
            default_u_grid(),
            vec![-2.0, -1.5, -1.0, -0.5, 0.0, 0.5, 1.0, 1.5, 2.0]
        );
    }
}
