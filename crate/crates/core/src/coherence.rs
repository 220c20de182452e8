//! Sample spectral coherence and periodic-correlation detection.
//!
//! With `d_X(ζ_P) = Σ_k X_k e^{i k ζ_P}`, `ζ_P = 2πP/n`, the squared coherence
//! of the frequency pair `(P, Q)` over a window of `M` ordinates is
//!
//! ```text
//! |γ(P,Q,M)|² = |Σ_m d(ζ_{P+m}) conj d(ζ_{Q+m})|² / (Σ_m |d(ζ_{P+m})|² Σ_m |d(ζ_{Q+m})|²)
//! ```
//!
//! with frequency indices taken modulo `n`. A periodically correlated series
//! with period `ϱ` shows significant values along the lines `|P−Q| = kn/ϱ`.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rustfft::FftPlanner;
use statrs::distribution::{ContinuousCDF, Gamma, Normal};

use crate::error::{Error, Result};
use crate::exec::Execution;

/// Upper bound on pair evaluations when no stride is given.
pub const DEFAULT_MAX_PAIRS: usize = 4_000_000;

/// Sliding window sums are recomputed from scratch this often.
const REFRESH: usize = 32;

/// `d_X(ζ_P)` for `P = 0..n-1`, using the positive-exponent convention.
pub fn dft_ordinates(x: &[f64]) -> Result<Vec<Complex64>> {
    if x.len() < 2 {
        return Err(Error::InvalidParameter(format!(
            "need at least two observations, got {}",
            x.len()
        )));
    }
    let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    // rustfft's inverse transform is the unnormalized positive-exponent sum
    FftPlanner::new()
        .plan_fft_inverse(x.len())
        .process(&mut buf);
    Ok(buf)
}

/// The direct `O(n²)` sum, kept as a reference for the FFT path.
pub fn dft_direct(x: &[f64]) -> Vec<Complex64> {
    let n = x.len();
    (0..n)
        .map(|p| {
            x.iter()
                .enumerate()
                .map(|(k, &v)| {
                    // reduce k*p first so the angle stays accurate for large n
                    let angle = 2.0 * std::f64::consts::PI * ((k * p) % n) as f64 / n as f64;
                    Complex64::from_polar(v, angle)
                })
                .sum()
        })
        .collect()
}

/// `x_α = 1 − exp(ln α / (M−1))`.
pub fn threshold(alpha: f64, m: usize) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "alpha must lie in (0, 1), got {alpha}"
        )));
    }
    if m < 2 {
        return Err(Error::InvalidParameter(format!(
            "window M must be at least 2, got {m}"
        )));
    }
    Ok(-(alpha.ln() / (m - 1) as f64).exp_m1())
}

fn check_window(n: usize, m: usize) -> Result<()> {
    if m < 2 {
        return Err(Error::InvalidParameter(format!(
            "window M must be at least 2, got {m}"
        )));
    }
    if m > n {
        return Err(Error::InvalidParameter(format!(
            "window M = {m} exceeds series length {n}"
        )));
    }
    Ok(())
}

fn coherence_from(d: &[Complex64], p: usize, q: usize, m: usize) -> Result<f64> {
    let n = d.len();
    let (mut num, mut sp, mut sq) = (Complex64::new(0.0, 0.0), 0.0, 0.0);
    for k in 0..m {
        let a = d[(p + k) % n];
        let b = d[(q + k) % n];
        num += a * b.conj();
        sp += a.norm_sqr();
        sq += b.norm_sqr();
    }
    if sp == 0.0 || sq == 0.0 {
        return Err(Error::Undefined(format!(
            "coherence at ({p}, {q}) has an all-zero window"
        )));
    }
    Ok((num.norm_sqr() / (sp * sq)).min(1.0))
}

/// Squared coherence of the raw series (no centering).
pub fn coherence(x: &[f64], p: usize, q: usize, m: usize) -> Result<f64> {
    check_window(x.len(), m)?;
    let d = dft_ordinates(x)?;
    coherence_from(&d, p % x.len(), q % x.len(), m)
}

/// Biased sample autocorrelation for lags `0..=max_lag`.
pub fn sample_acf(x: &[f64], max_lag: usize) -> Result<Vec<f64>> {
    let n = x.len();
    if max_lag >= n {
        return Err(Error::InvalidParameter(format!(
            "max_lag {max_lag} must be below n = {n}"
        )));
    }
    let mean = x.iter().sum::<f64>() / n as f64;
    let c: Vec<f64> = x.iter().map(|v| v - mean).collect();
    let c0: f64 = c.iter().map(|v| v * v).sum();
    if c0 == 0.0 {
        return Err(Error::Undefined(
            "autocorrelation of a constant series".into(),
        ));
    }
    Ok((0..=max_lag)
        .map(|h| {
            c[..n - h]
                .iter()
                .zip(&c[h..])
                .map(|(a, b)| a * b)
                .sum::<f64>()
                / c0
        })
        .collect())
}

/// Half-width of the 95% white-noise band.
pub fn acf_band(n: usize) -> f64 {
    1.96 / (n as f64).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Classification {
    Stationary,
    Pc(usize),
    Nonstationary,
}

impl fmt::Display for Classification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Classification::Stationary => write!(f, "stationary"),
            Classification::Pc(p) => write!(f, "PC({p})"),
            Classification::Nonstationary => write!(f, "nonstationary"),
        }
    }
}

impl FromStr for Classification {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s {
            "stationary" => Ok(Classification::Stationary),
            "nonstationary" => Ok(Classification::Nonstationary),
            _ => s
                .strip_prefix("PC(")
                .and_then(|r| r.strip_suffix(')'))
                .and_then(|r| r.parse().ok())
                .map(Classification::Pc)
                .ok_or_else(|| Error::InvalidParameter(format!("unknown classification {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoherenceConfig {
    pub m: usize,
    pub alpha: f64,
    /// Row stride over `P`; `None` picks the smallest stride that keeps the
    /// evaluation count under [`DEFAULT_MAX_PAIRS`].
    pub stride: Option<usize>,
    pub center: bool,
    /// Share of line contrast that must sit on multiples of the spacing.
    pub concentration: f64,
    /// Offsets within this many bins of a multiple count as aligned.
    pub tolerance: usize,
    /// Family-wise false-detection rate for lines and for the period scan.
    pub level: f64,
    /// Half-width, in offsets, of the neighbourhood giving the local background.
    pub background_window: usize,
    /// Harmonics per candidate period in the scan.
    pub max_harmonics: usize,
    pub execution: Execution,
}

impl CoherenceConfig {
    pub fn new(m: usize, alpha: f64) -> Self {
        Self {
            m,
            alpha,
            stride: None,
            center: true,
            concentration: 0.6,
            tolerance: 1,
            level: 0.001,
            background_window: 12,
            max_harmonics: 16,
            execution: Execution::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoherenceValue {
    pub p: usize,
    pub q: usize,
    pub value: f64,
    pub significant: bool,
}

/// Summary of one folded offset `f = min(D, n−D)`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct OffsetCount {
    pub evaluated: usize,
    pub significant: usize,
    /// Mean coherence times `M`; about 1 without correlation.
    pub strength: f64,
}

#[derive(Debug, Clone)]
pub struct CoherenceReport {
    pub n: usize,
    pub m: usize,
    pub alpha: f64,
    pub threshold: f64,
    pub stride: usize,
    /// Lower triangle `Q ≤ P`, ordered by `P` then `Q`.
    pub values: Vec<CoherenceValue>,
    /// Indexed by folded offset `0..=n/2`.
    pub offsets: Vec<OffsetCount>,
    /// Standardized contrast of each offset against its neighbours.
    pub contrast: Vec<f64>,
    /// Folded offsets whose contrast alone is beyond the null.
    pub lines: Vec<usize>,
    /// Best period-scan score and the cutoff it has to beat.
    pub scan_score: f64,
    pub scan_threshold: f64,
    pub spacing: Option<usize>,
    pub estimated_period: Option<usize>,
    pub classification: Classification,
}

impl CoherenceReport {
    pub fn significant(&self) -> impl Iterator<Item = &CoherenceValue> {
        self.values.iter().filter(|v| v.significant)
    }

    pub fn off_diagonal_significant(&self) -> usize {
        self.offsets[1..].iter().map(|o| o.significant).sum()
    }

    /// Expected off-diagonal false positives under the null.
    pub fn expected_false_positives(&self) -> f64 {
        self.alpha * self.offsets[1..].iter().map(|o| o.evaluated).sum::<usize>() as f64
    }
}

/// Is folded offset `f` within `tol` of a multiple `k·spacing`, `0 < k·spacing < n`?
/// Both `f` and `n − f` are tried, so lines wrapping past `n/2` count too.
pub fn is_aligned(f: usize, spacing: usize, n: usize, tol: usize) -> bool {
    let near = |d: usize| {
        let k = (d + spacing / 2) / spacing;
        k >= 1 && k * spacing < n && d.abs_diff(k * spacing) <= tol
    };
    near(f) || near(n - f)
}

/// Fraction of off-diagonal significant pairs lying within `tol` of a multiple
/// of `spacing`.
pub fn aligned_fraction(report: &CoherenceReport, spacing: usize, tol: usize) -> f64 {
    let total = report.off_diagonal_significant();
    if total == 0 || spacing == 0 {
        return 0.0;
    }
    let aligned: usize = report
        .offsets
        .iter()
        .enumerate()
        .skip(1)
        .filter(|(f, _)| is_aligned(*f, spacing, report.n, tol))
        .map(|(_, o)| o.significant)
        .sum();
    aligned as f64 / total as f64
}

/// Precomputed ordinates for repeated coherence queries on one series.
pub struct CoherencePlan {
    d: Vec<Complex64>,
    window_power: Vec<f64>,
    m: usize,
}

impl CoherencePlan {
    pub fn new(x: &[f64], m: usize, center: bool) -> Result<Self> {
        check_window(x.len(), m)?;
        let d = if center {
            let mean = x.iter().sum::<f64>() / x.len() as f64;
            let c: Vec<f64> = x.iter().map(|v| v - mean).collect();
            dft_ordinates(&c)?
        } else {
            dft_ordinates(x)?
        };
        let power: Vec<Complex64> = d
            .iter()
            .map(|z| Complex64::new(z.norm_sqr(), 0.0))
            .collect();
        let window_power = cyclic_window_sums(&power, m)
            .into_iter()
            .map(|z| z.re)
            .collect();
        Ok(Self { d, window_power, m })
    }

    pub fn n(&self) -> usize {
        self.d.len()
    }

    pub fn ordinates(&self) -> &[Complex64] {
        &self.d
    }

    pub fn coherence(&self, p: usize, q: usize) -> Result<f64> {
        coherence_from(&self.d, p % self.n(), q % self.n(), self.m)
    }

    /// Coherence for every `P ≥ offset` on the diagonal `Q = P − offset`,
    /// returned as a vector indexed by `P − offset`.
    fn diagonal(&self, offset: usize) -> Vec<Option<f64>> {
        let n = self.n();
        let products: Vec<Complex64> = (0..n)
            .map(|k| self.d[k] * self.d[(k + n - offset) % n].conj())
            .collect();
        let num = if offset == 0 {
            // identical arithmetic to the denominators keeps the diagonal at exactly 1
            self.window_power
                .iter()
                .map(|&w| Complex64::new(w, 0.0))
                .collect()
        } else {
            cyclic_window_sums(&products, self.m)
        };
        (offset..n)
            .map(|p| {
                let den = self.window_power[p] * self.window_power[p - offset];
                (den > 0.0).then(|| (num[p].norm_sqr() / den).min(1.0))
            })
            .collect()
    }
}

/// `s_k = Σ_{m<M} c_{(k+m) mod n}` for every `k`, by a running sum that is
/// refreshed periodically to bound accumulated rounding.
fn cyclic_window_sums(c: &[Complex64], m: usize) -> Vec<Complex64> {
    let n = c.len();
    let exact = |k: usize| (0..m).map(|j| c[(k + j) % n]).sum::<Complex64>();
    let mut out = Vec::with_capacity(n);
    let mut s = exact(0);
    for k in 0..n {
        if k > 0 {
            if k % REFRESH == 0 {
                s = exact(k);
            } else {
                s += c[(k - 1 + m) % n] - c[k - 1];
            }
        }
        out.push(s);
    }
    out
}

/// Smallest stride keeping the lower triangle under `max_pairs` evaluations.
pub fn default_stride(n: usize, max_pairs: usize) -> usize {
    let full = n * (n + 1) / 2;
    full.div_ceil(max_pairs).max(1)
}

/// Evaluates coherence on the lower triangle and classifies the series.
pub fn significant_pairs(x: &[f64], cfg: &CoherenceConfig) -> Result<CoherenceReport> {
    let n = x.len();
    let thr = threshold(cfg.alpha, cfg.m)?;
    let plan = CoherencePlan::new(x, cfg.m, cfg.center)?;
    let stride = match cfg.stride {
        Some(0) => return Err(Error::InvalidParameter("stride must be at least 1".into())),
        Some(s) => s,
        None => default_stride(n, DEFAULT_MAX_PAIRS),
    };
    let rows: Vec<Vec<(usize, f64)>> = cfg.execution.map(n, |offset| {
        plan.diagonal(offset)
            .into_iter()
            .enumerate()
            .filter_map(|(i, v)| {
                let p = i + offset;
                (p % stride == 0).then_some(v.map(|v| (p, v))).flatten()
            })
            .collect()
    });
    if rows[0].len() < n.div_ceil(stride) {
        return Err(Error::Undefined(
            "coherence has all-zero windows on the diagonal".into(),
        ));
    }
    let mut offsets = vec![OffsetCount::default(); n / 2 + 1];
    let mut values = Vec::with_capacity(rows.iter().map(Vec::len).sum());
    for (offset, row) in rows.iter().enumerate() {
        let fold = offset.min(n - offset);
        for &(p, v) in row {
            let significant = v > thr;
            offsets[fold].evaluated += 1;
            offsets[fold].significant += significant as usize;
            offsets[fold].strength += v;
            values.push(CoherenceValue {
                p,
                q: p - offset,
                value: v,
                significant,
            });
        }
    }
    for o in offsets.iter_mut().filter(|o| o.evaluated > 0) {
        o.strength *= cfg.m as f64 / o.evaluated as f64;
    }
    values.sort_by_key(|v| (v.p, v.q));
    let mut report = CoherenceReport {
        n,
        m: cfg.m,
        alpha: cfg.alpha,
        threshold: thr,
        stride,
        values,
        offsets,
        contrast: vec![],
        lines: vec![],
        scan_score: f64::NAN,
        scan_threshold: f64::NAN,
        spacing: None,
        estimated_period: None,
        classification: Classification::Stationary,
    };
    estimate_period(&mut report, cfg);
    Ok(report)
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn unit_gamma(shape: f64) -> Gamma {
    Gamma::new(shape, shape).expect("positive shape")
}

/// Median absolute deviation of `ln G` for `G ~ Gamma(shape)`.
fn log_gamma_mad(shape: f64) -> f64 {
    let g = unit_gamma(shape);
    let m = g.inverse_cdf(0.5).ln();
    let inside = |d: f64| g.cdf((m + d).exp()) - g.cdf((m - d).exp());
    let (mut lo, mut hi) = (0.0, 1.0);
    while inside(hi) < 0.5 {
        hi *= 2.0;
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if inside(mid) < 0.5 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Gamma shape whose log has the given MAD (the MAD falls as the shape grows).
fn fit_gamma_shape(mad: f64) -> f64 {
    let (mut lo, mut hi) = (1e-3f64, 1e4f64);
    for _ in 0..80 {
        let mid = (lo * hi).sqrt();
        if log_gamma_mad(mid) > mad {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (lo * hi).sqrt()
}

/// Contrast of each folded offset against its neighbourhood, on a standard
/// normal scale.
///
/// Without periodic correlation the strength of an offset is roughly Gamma
/// distributed around a background that may drift with the offset (leakage
/// from a peaked spectrum, heavy tails). Each log strength is compared with
/// the median over `±window` neighbours, leaving out the `±tol` next to it and
/// offset 0.
/// The Gamma shape is fitted to the robust spread of these residuals and each
/// residual is mapped through that Gamma law to a normal score.
pub fn offset_contrast(offsets: &[OffsetCount], n: usize, window: usize, tol: usize) -> Vec<f64> {
    let last = offsets.len() - 1;
    let mut z = vec![0.0; offsets.len()];
    if last < 2 {
        return z;
    }
    let ln: Vec<f64> = offsets
        .iter()
        .map(|o| o.strength.max(f64::MIN_POSITIVE).ln())
        .collect();
    let mut resid = vec![0.0; offsets.len()];
    // strength is even about 0 and about n/2, so neighbours fold like offsets
    let reflect = |g: isize| -> usize {
        let g = g.unsigned_abs();
        g.min(n - g)
    };
    for f in 1..=last {
        let fi = f as isize;
        let w = window.min(last - 1) as isize;
        let mut nb: Vec<f64> = (fi - w..=fi + w)
            .map(reflect)
            .filter(|&g| g != 0 && g.abs_diff(f) > tol)
            .map(|g| ln[g])
            .collect();
        if nb.is_empty() {
            nb.push(ln[f]);
        }
        resid[f] = ln[f] - median(&mut nb);
    }
    let mut spread: Vec<f64> = resid[1..].iter().map(|r| r.abs()).collect();
    let mad = median(&mut spread);
    if !(mad > 0.0) {
        return z;
    }
    let shape = fit_gamma_shape(mad);
    let null = unit_gamma(shape);
    let g_median = null.inverse_cdf(0.5);
    let normal = Normal::standard();
    for f in 1..=last {
        let g = resid[f].exp() * g_median;
        // upper tail from sf keeps precision for large contrasts
        let upper = null.sf(g).max(1e-300);
        z[f] = -normal.inverse_cdf(upper);
    }
    z
}

/// Upper standard normal quantile for a family-wise `level` over `tests` tests.
fn bonferroni(level: f64, tests: usize) -> f64 {
    -Normal::standard().inverse_cdf(level / tests.max(1) as f64)
}

/// Folded offset nearest to `k n / period`.
fn harmonic_offset(k: usize, n: usize, period: usize) -> usize {
    let d = ((k * n) as f64 / period as f64).round() as usize;
    d.min(n - d)
}

/// Scan score of one candidate period: the best `Σ_{k≤K} z_k / √K` over the
/// first `K` folded harmonics.
fn comb_score(z: &[f64], n: usize, period: usize, max_harmonics: usize) -> f64 {
    let mut sum = 0.0;
    let mut best = f64::NEG_INFINITY;
    for k in 1..=(period / 2).min(max_harmonics) {
        let f = harmonic_offset(k, n, period);
        if f == 0 {
            break;
        }
        sum += z[f];
        best = best.max(sum / (k as f64).sqrt());
    }
    best
}

/// `Σ z / √count` over the harmonics of `period` that are not harmonics of
/// `period / k`.
fn extra_harmonic_score(z: &[f64], n: usize, period: usize, k: usize, max_harmonics: usize) -> f64 {
    let extra: Vec<f64> = (1..=(period / 2).min(max_harmonics))
        .filter(|j| j % k != 0)
        .map(|j| harmonic_offset(j, n, period))
        .filter(|&f| f > 0)
        .map(|f| z[f])
        .collect();
    if extra.is_empty() {
        return f64::NEG_INFINITY;
    }
    extra.iter().sum::<f64>() / (extra.len() as f64).sqrt()
}

/// Steps down from a subharmonic: `period` is replaced by `period / k` while
/// that divisor's comb beats `cutoff` and the harmonics only `period` has add
/// nothing significant.
fn resolve_subharmonic(
    z: &[f64],
    n: usize,
    mut period: usize,
    cutoff: f64,
    single: f64,
    max_harmonics: usize,
) -> usize {
    'outer: loop {
        for k in 2..=period / 2 {
            if !period.is_multiple_of(k) {
                continue;
            }
            let d = period / k;
            if comb_score(z, n, d, max_harmonics) > cutoff
                && extra_harmonic_score(z, n, period, k, max_harmonics) <= single
            {
                period = d;
                continue 'outer;
            }
        }
        return period;
    }
}

/// Fills in `contrast`, `lines`, the scan fields, `spacing`,
/// `estimated_period` and `classification`.
///
/// Periodic correlation with period `ϱ` raises the diagonals `kn/ϱ`. Every
/// period whose spacing `n/ϱ` is at least `2·tolerance + 2` is scored by
/// [`comb_score`] on the offset contrasts, and the best one is kept if it
/// beats a Bonferroni cutoff over all periods and harmonic counts. A winner
/// that is a multiple of a significant period is reduced to it unless its extra
/// harmonics are significant on their own (at `level`, one test). Offsets
/// whose contrast is significant on its own are lines; the period is accepted
/// only if at least `concentration` of the positive line contrast sits within
/// `tolerance` of multiples of its spacing, otherwise the series is
/// nonstationary. No surviving period and no lines means stationary.
pub fn estimate_period(report: &mut CoherenceReport, cfg: &CoherenceConfig) {
    let n = report.n;
    let z = offset_contrast(&report.offsets, n, cfg.background_window, cfg.tolerance);
    let folded = report.offsets.len() - 1;
    let min_spacing = 2 * cfg.tolerance + 2;
    // offsets below the smallest scanned spacing carry slow drift rather than
    // a resolvable period
    let tested = folded.saturating_sub(min_spacing - 1);
    let line_cut = bonferroni(cfg.level, tested);
    let lines: Vec<usize> = (min_spacing..=folded)
        .filter(|&f| z[f] > line_cut)
        .collect();
    let periods: Vec<usize> = (2..=n / min_spacing).collect();
    let scan_tests = periods
        .iter()
        .map(|&p| (p / 2).min(cfg.max_harmonics))
        .sum();
    let scan_cut = bonferroni(cfg.level, scan_tests);
    let best = periods
        .iter()
        .map(|&p| (comb_score(&z, n, p, cfg.max_harmonics), p))
        .max_by(|a, b| a.0.total_cmp(&b.0).then(b.1.cmp(&a.1)));
    report.scan_score = best.map(|b| b.0).unwrap_or(f64::NEG_INFINITY);
    report.scan_threshold = scan_cut;
    report.spacing = None;
    report.estimated_period = None;
    report.classification = if lines.is_empty() {
        Classification::Stationary
    } else {
        Classification::Nonstationary
    };
    if let Some((_, period)) = best.filter(|b| b.0 > scan_cut) {
        let single = bonferroni(cfg.level, 1);
        let period = resolve_subharmonic(&z, n, period, scan_cut, single, cfg.max_harmonics);
        let spacing = ((n as f64 / period as f64).round() as usize).max(1);
        let total: f64 = lines.iter().map(|&f| z[f]).sum();
        let aligned: f64 = lines
            .iter()
            .filter(|&&f| is_aligned(f, spacing, n, cfg.tolerance))
            .map(|&f| z[f])
            .sum();
        if lines.is_empty() || aligned >= cfg.concentration * total {
            report.spacing = Some(spacing);
            report.estimated_period = Some(period);
            report.classification = Classification::Pc(period);
        } else {
            report.classification = Classification::Nonstationary;
        }
    }
    report.lines = lines;
    report.contrast = z;
}
