//! Exact jump-time evolution of the COGARCH state, volatility and price.
//!
//! Between arrivals the state drifts as `Y_t = e^{B(t-Υ_n)} Y_{Υ_n}`; at an
//! arrival with jump `Z_n` it takes the rank-one update
//! `Y_{Υ_n} = Y_{Υ_n⁻} + e (α₀ + a'Y_{Υ_n⁻}) Z_n²`. Volatility is the left limit
//! `V_t = α₀ + a'Y_{t⁻}` and the price moves by `√V_{Υ_n} Z_n` at each arrival.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::exec::{replication_rng, Execution};
use crate::matrix::{CompanionMatrix, EigenStructure};
use crate::semi_levy::{JumpPath, SemiLevyConfig};

#[derive(Debug, Clone)]
pub struct CogarchParams {
    p: usize,
    alpha0: f64,
    a: Vec<f64>,
    companion: CompanionMatrix,
    eigen: Option<EigenStructure>,
    y0: Vec<f64>,
}

impl CogarchParams {
    /// `alphas` holds `α_1..α_p`; the remaining `q - p` entries of `a` are zero.
    pub fn new(alpha0: f64, alphas: &[f64], betas: &[f64], y0: &[f64]) -> Result<Self> {
        let p = alphas.len();
        let q = betas.len();
        if p == 0 || q < p {
            return Err(Error::InvalidParameter(format!(
                "need q >= p >= 1, got p = {p}, q = {q}"
            )));
        }
        if !(alpha0.is_finite() && alpha0 > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "alpha0 must be positive, got {alpha0}"
            )));
        }
        if alphas.iter().any(|x| !x.is_finite()) || y0.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter(
                "alphas and y0 must be finite".into(),
            ));
        }
        if alphas[p - 1] == 0.0 {
            return Err(Error::InvalidParameter("alpha_p must be non-zero".into()));
        }
        if y0.len() != q {
            return Err(Error::InvalidParameter(format!(
                "initial state has length {}, expected q = {q}",
                y0.len()
            )));
        }
        let companion = CompanionMatrix::new(betas)?;
        let eigen = companion.eigen().ok();
        let mut a = alphas.to_vec();
        a.resize(q, 0.0);
        Ok(Self {
            p,
            alpha0,
            a,
            companion,
            eigen,
            y0: y0.to_vec(),
        })
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn q(&self) -> usize {
        self.a.len()
    }

    pub fn alpha0(&self) -> f64 {
        self.alpha0
    }

    pub fn a(&self) -> &[f64] {
        &self.a
    }

    pub fn y0(&self) -> &[f64] {
        &self.y0
    }

    pub fn companion(&self) -> &CompanionMatrix {
        &self.companion
    }

    /// Same parameters with a different deterministic initial state.
    pub fn with_y0(&self, y0: &[f64]) -> Result<Self> {
        if y0.len() != self.q() {
            return Err(Error::InvalidParameter(
                "initial state length must equal q".into(),
            ));
        }
        let mut out = self.clone();
        out.y0 = y0.to_vec();
        Ok(out)
    }

    /// The diagonalisation used for every `e^{Bt}`; fails for repeated eigenvalues.
    pub fn eigen(&self) -> Result<&EigenStructure> {
        match &self.eigen {
            Some(e) => Ok(e),
            None => Err(self.companion.eigen().expect_err("eigen cached on success")),
        }
    }

    fn dot_a(&self, y: &[f64]) -> f64 {
        self.a.iter().zip(y).map(|(a, y)| a * y).sum()
    }

    /// `V_{Υ_n} = α₀ + a' e^{B dt} Y_prev`, the left limit at the next arrival.
    pub fn volatility_at_jump(&self, y_prev: &[f64], dt: f64) -> Result<f64> {
        let drifted = self.eigen()?.exp_apply(dt, y_prev);
        Ok(self.alpha0 + self.dot_a(&drifted))
    }

    /// `Y_{Υ_n} = (I + Z² e a') e^{B dt} Y_prev + α₀ Z² e`.
    pub fn state_update(&self, y_prev: &[f64], dt: f64, z: f64) -> Result<Vec<f64>> {
        let mut y = self.eigen()?.exp_apply(dt, y_prev);
        let v = self.alpha0 + self.dot_a(&y);
        let q = y.len();
        y[q - 1] += v * z * z;
        Ok(y)
    }

    /// The rank-one jump factor `I + z² e a'`.
    fn jump_matrix(&self, z: f64) -> DMatrix<f64> {
        let q = self.q();
        let mut m = DMatrix::identity(q, q);
        for j in 0..q {
            m[(q - 1, j)] += z * z * self.a[j];
        }
        m
    }
}

/// Walks a jump path forward, keeping the post-jump state at the last arrival.
struct Walker<'a> {
    params: &'a CogarchParams,
    eig: &'a EigenStructure,
    path: &'a JumpPath,
    next: usize,
    t_last: f64,
    y: Vec<f64>,
    g: f64,
}

struct JumpRecord {
    time: f64,
    v: f64,
    g: f64,
}

impl<'a> Walker<'a> {
    fn new(params: &'a CogarchParams, path: &'a JumpPath, start: f64, y: Vec<f64>) -> Result<Self> {
        Ok(Self {
            params,
            eig: params.eigen()?,
            path,
            next: path.arrivals.partition_point(|&a| a <= start),
            t_last: start,
            y,
            g: 0.0,
        })
    }

    fn step(&mut self) -> Result<JumpRecord> {
        let time = self.path.arrivals[self.next];
        let z = self.path.jumps[self.next];
        let mut y = self.eig.exp_apply(time - self.t_last, &self.y);
        let v = self.params.alpha0 + self.params.dot_a(&y);
        if v < 0.0 {
            return Err(Error::NegativeVolatility { time, value: v });
        }
        self.g += v.sqrt() * z;
        let q = y.len();
        y[q - 1] += v * z * z;
        self.y = y;
        self.t_last = time;
        self.next += 1;
        Ok(JumpRecord { time, v, g: self.g })
    }

    /// Processes arrivals `< t` (strict) or `<= t` (inclusive).
    fn advance(
        &mut self,
        t: f64,
        inclusive: bool,
        mut sink: impl FnMut(&Self, JumpRecord),
    ) -> Result<()> {
        while self.next < self.path.len() {
            let a = self.path.arrivals[self.next];
            if a > t || (!inclusive && a == t) {
                break;
            }
            let rec = self.step()?;
            sink(self, rec);
        }
        Ok(())
    }

    fn volatility(&self, t: f64) -> Result<f64> {
        let drifted = self.eig.exp_apply(t - self.t_last, &self.y);
        let v = self.params.alpha0 + self.params.dot_a(&drifted);
        if v < 0.0 {
            return Err(Error::NegativeVolatility { time: t, value: v });
        }
        Ok(v)
    }

    fn state(&self, t: f64) -> Vec<f64> {
        self.eig.exp_apply(t - self.t_last, &self.y)
    }
}

/// Per-jump records plus equally spaced samples of one COGARCH path.
#[derive(Debug, Clone, PartialEq)]
pub struct CogarchPath {
    pub arrivals: Vec<f64>,
    pub jumps: Vec<f64>,
    /// Post-jump states `Y_{Υ_n}`.
    pub states: Vec<Vec<f64>>,
    pub v_jump: Vec<f64>,
    pub g_jump: Vec<f64>,
    pub sample_interval: f64,
    pub times: Vec<f64>,
    pub v_grid: Vec<f64>,
    pub g_grid: Vec<f64>,
    pub y0: Vec<f64>,
}

impl CogarchPath {
    /// `G_{(i+1)l} − G_{il}`.
    pub fn increments(&self) -> Vec<f64> {
        increments(&self.g_grid)
    }

    /// `Y_t` (right-continuous).
    pub fn state_at(&self, t: f64, params: &CogarchParams) -> Result<Vec<f64>> {
        let n = self.arrivals.partition_point(|&a| a <= t);
        let (t0, y) = if n == 0 {
            (0.0, &self.y0)
        } else {
            (self.arrivals[n - 1], &self.states[n - 1])
        };
        Ok(params.eigen()?.exp_apply(t - t0, y))
    }

    /// `V_t = α₀ + a'Y_{t⁻}`.
    pub fn volatility_at(&self, t: f64, params: &CogarchParams) -> Result<f64> {
        let n = self.arrivals.partition_point(|&a| a < t);
        let (t0, y) = if n == 0 {
            (0.0, &self.y0)
        } else {
            (self.arrivals[n - 1], &self.states[n - 1])
        };
        let drifted = params.eigen()?.exp_apply(t - t0, y);
        Ok(params.alpha0 + params.dot_a(&drifted))
    }

    pub fn min_volatility(&self) -> f64 {
        self.v_jump
            .iter()
            .chain(&self.v_grid)
            .copied()
            .fold(f64::INFINITY, f64::min)
    }
}

/// First differences.
pub fn increments(series: &[f64]) -> Vec<f64> {
    series.windows(2).map(|w| w[1] - w[0]).collect()
}

/// Number of samples per period, `ϱ = τ / l`, when it is a positive integer.
pub fn samples_per_period(period: f64, sample_interval: f64) -> Result<u64> {
    if !(sample_interval > 0.0 && sample_interval.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "sample interval must be positive, got {sample_interval}"
        )));
    }
    let ratio = period / sample_interval;
    let rho = ratio.round();
    if rho < 1.0 || (ratio - rho).abs() > 1e-9 * rho {
        return Err(Error::InvalidParameter(format!(
            "sample interval {sample_interval} does not divide the period {period}"
        )));
    }
    Ok(rho as u64)
}

/// Runs the jump recursion over a driver path and samples `V` and `G` on the
/// grid `il`, `i = 0 .. mϱ − 1`.
///
/// At each arrival the volatility is taken first (left limit), then the price
/// jump, then the state jump. A grid point that coincides with an arrival sees
/// the pre-jump volatility and the post-jump price.
pub fn simulate_path(
    jump_path: &JumpPath,
    params: &CogarchParams,
    sample_interval: f64,
    period: f64,
) -> Result<CogarchPath> {
    let rho = samples_per_period(period, sample_interval)?;
    let periods = jump_path.horizon / period;
    if (periods - periods.round()).abs() > 1e-9 * periods.max(1.0) || periods.round() < 1.0 {
        return Err(Error::InvalidParameter(format!(
            "horizon {} is not a whole number of periods {period}",
            jump_path.horizon
        )));
    }
    let n_samples = periods.round() as u64 * rho;
    let n_jumps = jump_path.len();

    let mut out = CogarchPath {
        arrivals: Vec::with_capacity(n_jumps),
        jumps: Vec::with_capacity(n_jumps),
        states: Vec::with_capacity(n_jumps),
        v_jump: Vec::with_capacity(n_jumps),
        g_jump: Vec::with_capacity(n_jumps),
        sample_interval,
        times: Vec::with_capacity(n_samples as usize),
        v_grid: Vec::with_capacity(n_samples as usize),
        g_grid: Vec::with_capacity(n_samples as usize),
        y0: params.y0().to_vec(),
    };
    let mut walker = Walker::new(params, jump_path, 0.0, params.y0().to_vec())?;
    let mut record = |w: &Walker, rec: JumpRecord| {
        out.arrivals.push(rec.time);
        out.jumps.push(w.path.jumps[w.next - 1]);
        out.states.push(w.y.clone());
        out.v_jump.push(rec.v);
        out.g_jump.push(rec.g);
    };
    let mut times = Vec::with_capacity(n_samples as usize);
    let mut v_grid = Vec::with_capacity(n_samples as usize);
    let mut g_grid = Vec::with_capacity(n_samples as usize);
    for i in 0..n_samples {
        let t = i as f64 * sample_interval;
        walker.advance(t, false, &mut record)?;
        v_grid.push(walker.volatility(t)?);
        walker.advance(t, true, &mut record)?;
        times.push(t);
        g_grid.push(walker.g);
    }
    walker.advance(jump_path.horizon, true, &mut record)?;
    out.times = times;
    out.v_grid = v_grid;
    out.g_grid = g_grid;
    Ok(out)
}

/// `Y_t` obtained by restarting the recursion from `y_s` at time `s`.
pub fn propagate_state(
    jump_path: &JumpPath,
    params: &CogarchParams,
    s: f64,
    y_s: &[f64],
    t: f64,
) -> Result<Vec<f64>> {
    if s > t {
        return Err(Error::InvalidParameter(format!(
            "need s <= t, got s = {s}, t = {t}"
        )));
    }
    let mut walker = Walker::new(params, jump_path, s, y_s.to_vec())?;
    walker.advance(t, true, |_, _| {})?;
    Ok(walker.state(t))
}

/// `V_t` at sorted probe times along one driver path.
pub fn volatility_at_times(
    jump_path: &JumpPath,
    params: &CogarchParams,
    times: &[f64],
) -> Result<Vec<f64>> {
    if times.first().is_some_and(|&t| !(t >= 0.0)) || times.windows(2).any(|w| !(w[0] <= w[1])) {
        return Err(Error::InvalidParameter(
            "probe times must be sorted and non-negative".into(),
        ));
    }
    let mut walker = Walker::new(params, jump_path, 0.0, params.y0().to_vec())?;
    let mut out = Vec::with_capacity(times.len());
    for &t in times {
        walker.advance(t, false, |_, _| {})?;
        out.push(walker.volatility(t)?);
    }
    Ok(out)
}

/// Random coefficients of `Y_t = J_{s,t} Y_s + K_{s,t}` built from the jumps in `(s, t]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RecurrencePair {
    pub j: DMatrix<f64>,
    pub k: DVector<f64>,
    pub s: f64,
    pub t: f64,
}

impl RecurrencePair {
    pub fn apply(&self, y_s: &[f64]) -> Vec<f64> {
        (&self.j * DVector::from_row_slice(y_s) + &self.k)
            .iter()
            .copied()
            .collect()
    }

    /// `(J_{t,u} J_{s,t}, J_{t,u} K_{s,t} + K_{t,u})`.
    pub fn then(&self, later: &RecurrencePair) -> RecurrencePair {
        RecurrencePair {
            j: &later.j * &self.j,
            k: &later.j * &self.k + &later.k,
            s: self.s,
            t: later.t,
        }
    }
}

pub fn recurrence_pair(
    jump_path: &JumpPath,
    params: &CogarchParams,
    s: f64,
    t: f64,
) -> Result<RecurrencePair> {
    if !(s >= 0.0) || s > t || t > jump_path.horizon {
        return Err(Error::InvalidParameter(format!(
            "need 0 <= s <= t <= horizon, got s = {s}, t = {t}"
        )));
    }
    let eig = params.eigen()?;
    let q = params.q();
    let mut j = DMatrix::<f64>::identity(q, q);
    let mut k = DVector::<f64>::zeros(q);
    let mut e = DVector::<f64>::zeros(q);
    e[q - 1] = 1.0;
    let first = jump_path.arrivals.partition_point(|&a| a <= s);
    let last = jump_path.arrivals.partition_point(|&a| a <= t);
    let mut t_last = s;
    for n in first..last {
        let time = jump_path.arrivals[n];
        let z = jump_path.jumps[n];
        let step = params.jump_matrix(z) * eig.mat_exp(time - t_last)?;
        j = &step * j;
        k = &step * k + &e * (params.alpha0 * z * z);
        t_last = time;
    }
    let tail = eig.mat_exp(t - t_last)?;
    Ok(RecurrencePair {
        j: &tail * j,
        k: &tail * k,
        s,
        t,
    })
}

/// Volatility at probe times for `n_reps` independent driver paths.
///
/// Row `i` holds replication `i`; each replication uses its own stream of
/// `seed`.
pub fn ensemble_volatility(
    cfg: &SemiLevyConfig,
    params: &CogarchParams,
    periods: u64,
    probe_times: &[f64],
    n_reps: usize,
    seed: u64,
    exec: Execution,
) -> Result<Vec<Vec<f64>>> {
    exec.map(n_reps, |i| {
        let mut rng = replication_rng(seed, i as u64);
        let path = cfg.simulate(periods, &mut rng)?;
        volatility_at_times(&path, params, probe_times)
    })
    .into_iter()
    .collect()
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::exec::path_rng;
    use crate::semi_levy::tests::example_config;
    use proptest::prelude::*;

    pub fn example_params() -> CogarchParams {
        CogarchParams::new(
            1e-6,
            &[0.005],
            &[2.1, 6.0, 0.6],
            &[0.37e-3, 0.05e-3, 0.19e-3],
        )
        .unwrap()
    }

    fn norm(v: &[f64]) -> f64 {
        v.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    fn dist(a: &[f64], b: &[f64]) -> f64 {
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt()
    }

    #[test]
    fn parameter_validation() {
        assert!(CogarchParams::new(0.0, &[0.1], &[1.0], &[0.0]).is_err());
        assert!(CogarchParams::new(1.0, &[0.1, 0.2], &[1.0], &[0.0]).is_err());
        assert!(CogarchParams::new(1.0, &[0.0], &[1.0], &[0.0]).is_err());
        assert!(CogarchParams::new(1.0, &[0.1], &[1.0, 0.0], &[0.0, 0.0]).is_err());
        assert!(CogarchParams::new(1.0, &[0.1], &[1.0, 2.0], &[0.0]).is_err());
        let p = example_params();
        assert_eq!(p.a(), &[0.005, 0.0, 0.0]);
        assert_eq!((p.p(), p.q()), (1, 3));
    }

    #[test]
    fn state_update_examples() {
        let p = example_params();
        let y = [1e-4, -2e-4, 3e-4];
        let drift = p.eigen().unwrap().exp_apply(0.7, &y);
        assert_eq!(p.state_update(&y, 0.7, 0.0).unwrap(), drift);

        let z = 1.3;
        let pure = p.state_update(&y, 1e-10, z).unwrap();
        let v = p.alpha0() + 0.005 * y[0];
        let expected = [y[0], y[1], y[2] + v * z * z];
        assert!(dist(&pure, &expected) < 1e-12);

        let zero = p.state_update(&[0.0; 3], 2.0, z).unwrap();
        assert!(dist(&zero, &[0.0, 0.0, p.alpha0() * z * z]) < 1e-20);
    }

    #[test]
    fn volatility_examples() {
        let p = example_params();
        assert_eq!(p.volatility_at_jump(&[0.0; 3], 3.0).unwrap(), p.alpha0());
        let y = [2e-4, 1e-4, -1e-4];
        assert!(
            (p.volatility_at_jump(&y, 0.0).unwrap() - (p.alpha0() + 0.005 * 2e-4)).abs() < 1e-18
        );
        let drifted = p.state_update(&y, 1.1, 0.0).unwrap();
        let via_state = p.alpha0() + drifted.iter().zip(p.a()).map(|(a, b)| a * b).sum::<f64>();
        assert!((p.volatility_at_jump(&y, 1.1).unwrap() - via_state).abs() < 1e-18);
    }

    #[test]
    fn empty_path_decays() {
        let p = example_params();
        let jp = JumpPath::new(vec![], vec![], 13.0).unwrap();
        let path = simulate_path(&jp, &p, 0.25, 6.5).unwrap();
        assert_eq!(path.v_grid.len(), 52);
        assert!(path.g_grid.iter().all(|&g| g == 0.0));
        let eig = p.eigen().unwrap();
        for (i, &v) in path.v_grid.iter().enumerate() {
            let y = eig.exp_apply(i as f64 * 0.25, p.y0());
            assert!((v - (p.alpha0() + 0.005 * y[0])).abs() < 1e-18);
        }
        assert!(path.increments().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn single_jump_from_zero_state() {
        let p = example_params().with_y0(&[0.0; 3]).unwrap();
        let jp = JumpPath::new(vec![0.6], vec![1.7], 6.5).unwrap();
        let path = simulate_path(&jp, &p, 0.25, 6.5).unwrap();
        assert!((path.g_jump[0] - p.alpha0().sqrt() * 1.7).abs() < 1e-18);
        assert_eq!(path.g_grid[2], 0.0);
        assert_eq!(path.g_grid[3], path.g_jump[0]);
    }

    #[test]
    fn grid_point_on_arrival() {
        let p = example_params();
        let jp = JumpPath::new(vec![0.5, 1.0], vec![2.0, -1.0], 6.5).unwrap();
        let path = simulate_path(&jp, &p, 0.25, 6.5).unwrap();
        // t = 0.5: pre-jump volatility, post-jump price
        assert_eq!(path.v_grid[2], path.v_jump[0]);
        assert_eq!(path.g_grid[2], path.g_jump[0]);
        assert_eq!(path.v_grid[4], path.v_jump[1]);
        assert_eq!(path.g_grid[4], path.g_jump[1]);
    }

    #[test]
    fn sampling_validation() {
        let p = example_params();
        let jp = JumpPath::new(vec![], vec![], 6.5).unwrap();
        assert!(simulate_path(&jp, &p, 0.3, 6.5).is_err());
        let bad = JumpPath::new(vec![], vec![], 7.0).unwrap();
        assert!(simulate_path(&bad, &p, 0.25, 6.5).is_err());
    }

    #[test]
    fn example_grid_has_780_samples() {
        let cfg = example_config();
        let jp = cfg.simulate(30, &mut path_rng(42)).unwrap();
        let path = simulate_path(&jp, &example_params(), 0.25, 6.5).unwrap();
        assert_eq!(path.v_grid.len(), 780);
        assert_eq!(path.increments().len(), 779);
        assert_eq!(path.g_jump.len(), jp.len());
        let total: f64 = path.increments().iter().sum();
        assert!((total - (path.g_grid[779] - path.g_grid[0])).abs() < 1e-12);
    }

    #[test]
    fn negative_volatility_is_an_error() {
        // negative alpha_1 lets large jumps push a'Y below -alpha0
        let p = CogarchParams::new(1e-3, &[-0.5], &[1.0], &[0.0]).unwrap();
        let jp = JumpPath::new(vec![0.1, 0.2], vec![3.0, 3.0], 1.0).unwrap();
        let err = simulate_path(&jp, &p, 0.5, 1.0).unwrap_err();
        assert!(matches!(err, Error::NegativeVolatility { .. }));
    }

    #[test]
    fn unsorted_probes_rejected() {
        let cfg = example_config();
        let params = example_params();
        let jp = cfg.simulate(2, &mut path_rng(1)).unwrap();
        assert!(volatility_at_times(&jp, &params, &[3.0, 1.0]).is_err());
        assert!(volatility_at_times(&jp, &params, &[-1.0]).is_err());
        let v = volatility_at_times(&jp, &params, &[1.0, 1.0, 3.0]).unwrap();
        assert_eq!(v[0], v[1]);
    }

    #[test]
    fn left_limit_consistency() {
        let cfg = example_config();
        let p = example_params();
        let jp = cfg.simulate(3, &mut path_rng(9)).unwrap();
        let path = simulate_path(&jp, &p, 0.25, 6.5).unwrap();
        let eig = p.eigen().unwrap();
        for n in 1..path.arrivals.len() {
            let pre = eig.exp_apply(path.arrivals[n] - path.arrivals[n - 1], &path.states[n - 1]);
            assert_eq!(path.v_jump[n], p.alpha0() + p.dot_a(&pre));
        }
    }

    #[test]
    fn recurrence_without_jumps() {
        let p = example_params();
        let jp = JumpPath::new(vec![], vec![], 6.5).unwrap();
        let pair = recurrence_pair(&jp, &p, 1.0, 3.5).unwrap();
        let e = p.eigen().unwrap().mat_exp(2.5).unwrap();
        assert!((pair.j - e).amax() < 1e-15);
        assert_eq!(pair.k.amax(), 0.0);
        assert!(recurrence_pair(&jp, &p, 3.0, 1.0).is_err());
    }

    #[test]
    fn recurrence_reproduces_states() {
        let cfg = example_config();
        let p = example_params();
        let jp = cfg.simulate(4, &mut path_rng(17)).unwrap();
        let path = simulate_path(&jp, &p, 0.25, 6.5).unwrap();
        for (s, t) in [(0.0, 26.0), (1.3, 7.7), (5.0, 5.0), (10.2, 25.9)] {
            let pair = recurrence_pair(&jp, &p, s, t).unwrap();
            let ys = path.state_at(s, &p).unwrap();
            let yt = path.state_at(t, &p).unwrap();
            assert!(dist(&yt, &pair.apply(&ys)) <= 1e-8 * (1.0 + norm(&yt)));
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn flow_property(seed in any::<u64>(), s in 0.0f64..13.0, dt in 0.0f64..13.0) {
            let cfg = example_config();
            let p = example_params();
            let jp = cfg.simulate(4, &mut path_rng(seed)).unwrap();
            let path = simulate_path(&jp, &p, 0.25, 6.5).unwrap();
            let t = s + dt;
            let ys = path.state_at(s, &p).unwrap();
            let restarted = propagate_state(&jp, &p, s, &ys, t).unwrap();
            let direct = path.state_at(t, &p).unwrap();
            prop_assert!(dist(&restarted, &direct) <= 1e-10 * norm(&direct).max(1e-300));
        }

        #[test]
        fn recurrence_composition(seed in any::<u64>(), a in 0.0f64..26.0, b in 0.0f64..26.0, c in 0.0f64..26.0) {
            let mut pts = [a, b, c];
            pts.sort_by(f64::total_cmp);
            let cfg = example_config();
            let p = example_params();
            let jp = cfg.simulate(4, &mut path_rng(seed)).unwrap();
            let first = recurrence_pair(&jp, &p, pts[0], pts[1]).unwrap();
            let second = recurrence_pair(&jp, &p, pts[1], pts[2]).unwrap();
            let whole = recurrence_pair(&jp, &p, pts[0], pts[2]).unwrap();
            let composed = first.then(&second);
            prop_assert!((composed.j - &whole.j).amax() <= 1e-8 * (1.0 + whole.j.amax()));
            prop_assert!((composed.k - &whole.k).amax() <= 1e-8 * (1.0 + whole.k.amax()));
        }
    }
}
