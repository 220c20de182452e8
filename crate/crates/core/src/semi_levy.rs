//! Semi-Lévy compound Poisson driver.
//!
//! One period `(0, τ]` is split into `d` half-open intervals
//! `A_j = (s_{j-1}, s_j]` of lengths `l_j`. The jump intensity is `λ_j` on every
//! translate `A_j + kτ` and jumps arriving there are drawn from `F_j`. On top of
//! the jumps the process carries a linear drift `δ t`.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Poisson};

use crate::dist::{JumpDist, JumpLaw};
use crate::error::{Error, Result};
use crate::exec::{replication_rng, Execution};

#[derive(Debug, Clone, PartialEq)]
pub struct SemiLevyConfig {
    period: f64,
    lengths: Vec<f64>,
    rates: Vec<f64>,
    jump_dists: Vec<JumpDist>,
    drift: f64,
    /// Right endpoints `s_1..s_d` within the first period.
    ends: Vec<f64>,
}

impl SemiLevyConfig {
    pub fn new(
        period: f64,
        lengths: Vec<f64>,
        rates: Vec<f64>,
        jump_dists: Vec<JumpDist>,
        drift: f64,
    ) -> Result<Self> {
        let d = lengths.len();
        if d == 0 {
            return Err(Error::InvalidParameter(
                "need at least one partition interval".into(),
            ));
        }
        if rates.len() != d || jump_dists.len() != d {
            return Err(Error::InvalidParameter(format!(
                "lengths, rates and jump_dists must all have length d = {d} (got {}, {}, {})",
                d,
                rates.len(),
                jump_dists.len()
            )));
        }
        if !(period.is_finite() && period > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "period must be positive, got {period}"
            )));
        }
        if let Some(l) = lengths.iter().find(|l| !(l.is_finite() && **l > 0.0)) {
            return Err(Error::InvalidParameter(format!(
                "interval lengths must be positive, got {l}"
            )));
        }
        if let Some(r) = rates.iter().find(|r| !(r.is_finite() && **r >= 0.0)) {
            return Err(Error::InvalidParameter(format!(
                "rates must be non-negative, got {r}"
            )));
        }
        if !drift.is_finite() {
            return Err(Error::InvalidParameter("drift must be finite".into()));
        }
        let total: f64 = lengths.iter().sum();
        if (total - period).abs() > 1e-12 * period {
            return Err(Error::InvalidParameter(format!(
                "interval lengths sum to {total}, expected the period {period}"
            )));
        }
        let mut ends = Vec::with_capacity(d);
        let mut acc = 0.0;
        for l in &lengths {
            acc += l;
            ends.push(acc);
        }
        // the last endpoint is the period itself, not the rounded running sum
        ends[d - 1] = period;
        Ok(Self {
            period,
            lengths,
            rates,
            jump_dists,
            drift,
            ends,
        })
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn d(&self) -> usize {
        self.lengths.len()
    }

    pub fn lengths(&self) -> &[f64] {
        &self.lengths
    }

    pub fn rates(&self) -> &[f64] {
        &self.rates
    }

    pub fn jump_dists(&self) -> &[JumpDist] {
        &self.jump_dists
    }

    pub fn drift(&self) -> f64 {
        self.drift
    }

    /// Left endpoint `s_{j-1}` of interval `j` (0-based) in the first period.
    fn start(&self, j: usize) -> f64 {
        if j == 0 {
            0.0
        } else {
            self.ends[j - 1]
        }
    }

    /// Copy with every jump variance multiplied by `factor`.
    pub fn with_scaled_variance(&self, factor: f64) -> Self {
        let mut out = self.clone();
        for d in &mut out.jump_dists {
            *d = d.scale_variance(factor);
        }
        out
    }

    /// Expected number of jumps per period, `Λ(τ) = Σ λ_j l_j`.
    pub fn jumps_per_period(&self) -> f64 {
        self.rates
            .iter()
            .zip(&self.lengths)
            .map(|(r, l)| r * l)
            .sum()
    }

    /// Which interval contains `t`.
    ///
    /// Intervals are closed on the right, so `t = s_j` belongs to `A_j`; at an
    /// exact period boundary `t = kτ` this gives `m = k-1, r = d`. `t = 0` is
    /// assigned to the first interval.
    pub fn locate_phase(&self, t: f64) -> Result<PhaseLocation> {
        check_time(t)?;
        if t == 0.0 {
            return Ok(PhaseLocation {
                m: 0,
                r: 0,
                s_prev: 0.0,
            });
        }
        let mut m = (t / self.period).floor();
        let mut u = t - m * self.period;
        if u <= 0.0 {
            m -= 1.0;
            u += self.period;
        }
        let r = self
            .ends
            .iter()
            .position(|&e| u <= e)
            .unwrap_or(self.d() - 1);
        Ok(PhaseLocation {
            m: m as u64,
            r,
            s_prev: m * self.period + self.start(r),
        })
    }

    /// `λ(t)`.
    pub fn intensity(&self, t: f64) -> Result<f64> {
        Ok(self.rates[self.locate_phase(t)?.r])
    }

    /// `Λ(t) = ∫_0^t λ(u) du`, evaluated piecewise exactly.
    pub fn cumulative_intensity(&self, t: f64) -> Result<f64> {
        if t == 0.0 {
            check_time(t)?;
            return Ok(0.0);
        }
        let loc = self.locate_phase(t)?;
        let completed: f64 = (0..loc.r).map(|j| self.rates[j] * self.lengths[j]).sum();
        Ok(loc.m as f64 * self.jumps_per_period()
            + completed
            + self.rates[loc.r] * (t - loc.s_prev))
    }

    /// Masses `ν_t(ℝ)` attributed to each `F_j` over `(0, t]`; they sum to `Λ(t)`.
    pub fn levy_weights(&self, t: f64) -> Result<Vec<f64>> {
        let loc = self.locate_phase(t)?;
        let m = loc.m as f64;
        let mut w: Vec<f64> = (0..self.d())
            .map(|j| {
                let full = if j < loc.r { m + 1.0 } else { m };
                full * self.rates[j] * self.lengths[j]
            })
            .collect();
        w[loc.r] += self.rates[loc.r] * (t - loc.s_prev);
        Ok(w)
    }

    /// `E[e^{iuS_t}] = exp(iuδt + ∫(e^{iuz} − 1) ν_t(dz))`.
    ///
    /// `ν_t` is a finite measure, so the truncated compensator of the general
    /// Lévy–Khintchine form cancels against the matching drift term.
    pub fn char_function(&self, u: f64, t: f64) -> Result<Complex64> {
        if !(t > 0.0) {
            return Err(Error::Domain(format!(
                "characteristic function needs t > 0, got {t}"
            )));
        }
        let weights = self.levy_weights(t)?;
        let exponent: Complex64 = weights
            .iter()
            .zip(&self.jump_dists)
            .map(|(w, f)| (f.char_function(u) - 1.0) * *w)
            .sum::<Complex64>()
            + Complex64::new(0.0, u * self.drift * t);
        Ok(exponent.exp())
    }

    /// Arrival times over `m` full periods.
    ///
    /// Draw order, per interval in time order: the Poisson count, then that many
    /// uniform positions on `(s_{i-1}, s_i]`. All positions are sorted at the end
    /// (stable, ties kept).
    pub fn simulate_arrivals<R: Rng + ?Sized>(
        &self,
        periods: u64,
        rng: &mut R,
    ) -> Result<JumpPath> {
        if periods == 0 {
            return Err(Error::InvalidParameter("need at least one period".into()));
        }
        let mut arrivals =
            Vec::with_capacity((self.jumps_per_period() * periods as f64 * 1.1) as usize + 8);
        for k in 0..periods {
            let offset = k as f64 * self.period;
            for j in 0..self.d() {
                let mean = self.rates[j] * self.lengths[j];
                if mean <= 0.0 {
                    continue;
                }
                let count = Poisson::new(mean)
                    .map_err(|e| Error::InvalidParameter(format!("poisson mean {mean}: {e}")))?
                    .sample(rng) as u64;
                let lo = offset + self.start(j);
                let hi = offset + self.ends[j];
                for _ in 0..count {
                    // 1 - U with U in [0, 1) lands in (lo, hi]
                    let u: f64 = rng.random();
                    arrivals.push(lo + (hi - lo) * (1.0 - u));
                }
            }
        }
        arrivals.sort_by(|a, b| a.total_cmp(b));
        Ok(JumpPath {
            jumps: vec![0.0; arrivals.len()],
            arrivals,
            horizon: periods as f64 * self.period,
        })
    }

    /// Fills jump sizes in arrival order, `Z_n ~ F_r` with `r` the phase of `Υ_n`.
    pub fn simulate_jumps<R: Rng + ?Sized>(&self, path: &mut JumpPath, rng: &mut R) -> Result<()> {
        for (z, &t) in path.jumps.iter_mut().zip(&path.arrivals) {
            let r = self.locate_phase(t)?.r;
            *z = self.jump_dists[r].sample(rng);
        }
        Ok(())
    }

    /// Arrivals followed by jump sizes from one stream.
    pub fn simulate<R: Rng + ?Sized>(&self, periods: u64, rng: &mut R) -> Result<JumpPath> {
        let mut path = self.simulate_arrivals(periods, rng)?;
        self.simulate_jumps(&mut path, rng)?;
        Ok(path)
    }

    /// Monte Carlo estimate of `E[e^{iuS_t}]` on a grid of `u`, from `n_paths`
    /// independent replications.
    pub fn empirical_char_function(
        &self,
        us: &[f64],
        t: f64,
        n_paths: usize,
        seed: u64,
        exec: Execution,
    ) -> Result<Vec<Complex64>> {
        if !(t > 0.0) {
            return Err(Error::Domain(format!("t must be positive, got {t}")));
        }
        let periods = (t / self.period).ceil().max(1.0) as u64;
        let values = exec.map(n_paths, |i| {
            let mut rng = replication_rng(seed, i as u64);
            self.simulate(periods, &mut rng)
                .and_then(|p| p.evaluate_s(t, self))
        });
        let mut acc = vec![Complex64::new(0.0, 0.0); us.len()];
        for s in values {
            let s = s?;
            for (a, &u) in acc.iter_mut().zip(us) {
                *a += Complex64::new(0.0, u * s).exp();
            }
        }
        Ok(acc.into_iter().map(|a| a / n_paths as f64).collect())
    }
}

fn check_time(t: f64) -> Result<()> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::Domain(format!(
            "time must be a finite non-negative number, got {t}"
        )));
    }
    Ok(())
}

/// Position of a time inside the periodic partition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseLocation {
    /// Completed periods.
    pub m: u64,
    /// 0-based interval index (`r - 1` in one-based notation).
    pub r: usize,
    /// Left endpoint of the containing interval.
    pub s_prev: f64,
}

/// Arrival times and jump sizes of one driver path on `(0, horizon]`.
#[derive(Debug, Clone, PartialEq)]
pub struct JumpPath {
    pub arrivals: Vec<f64>,
    pub jumps: Vec<f64>,
    pub horizon: f64,
}

impl JumpPath {
    pub fn new(arrivals: Vec<f64>, jumps: Vec<f64>, horizon: f64) -> Result<Self> {
        if arrivals.len() != jumps.len() {
            return Err(Error::InvalidParameter(
                "arrivals and jumps differ in length".into(),
            ));
        }
        if arrivals.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::InvalidParameter("arrivals must be sorted".into()));
        }
        if arrivals.first().is_some_and(|&a| a <= 0.0)
            || arrivals.last().is_some_and(|&a| a > horizon)
        {
            return Err(Error::InvalidParameter(
                "arrivals must lie in (0, horizon]".into(),
            ));
        }
        Ok(Self {
            arrivals,
            jumps,
            horizon,
        })
    }

    pub fn len(&self) -> usize {
        self.arrivals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.arrivals.is_empty()
    }

    /// `N(t)`: number of arrivals in `(0, t]`.
    pub fn count(&self, t: f64) -> usize {
        self.arrivals.partition_point(|&a| a <= t)
    }

    fn check_within(&self, t: f64) -> Result<()> {
        check_time(t)?;
        if t > self.horizon {
            return Err(Error::Domain(format!(
                "t = {t} beyond horizon {}",
                self.horizon
            )));
        }
        Ok(())
    }

    /// `S_t = δt + Σ_{Υ_n ≤ t} Z_n`.
    pub fn evaluate_s(&self, t: f64, cfg: &SemiLevyConfig) -> Result<f64> {
        self.check_within(t)?;
        let n = self.count(t);
        Ok(cfg.drift() * t + self.jumps[..n].iter().sum::<f64>())
    }

    /// `[S,S]_t = Σ_{Υ_n ≤ t} Z_n²`.
    pub fn quadratic_variation(&self, t: f64) -> Result<f64> {
        self.check_within(t)?;
        let n = self.count(t);
        Ok(self.jumps[..n].iter().map(|z| z * z).sum())
    }
}
