//! Sufficient conditions for strict periodic stationarity of the state and
//! for almost-sure non-negativity of the volatility.
//!
//! Stationarity needs (i) distinct eigenvalues of `B` with negative real
//! parts and (ii) for some `r ∈ {1, 2, ∞}` and every interval `j`
//!
//! ```text
//! ∫ log(1 + ‖P⁻¹ e a' P‖_r z²) F_j(dz) < −η τ / (Λ(t+τ) − Λ(t)).
//! ```
//!
//! Because `λ` is τ-periodic the denominator equals `Λ(τ)` for every `t`, so
//! the right side is a single constant.
//!
//! Non-negativity needs `a' e^{Bt} e ≥ 0` and `a' e^{Bt} Y₀ ≥ γ ≥ −α₀` for all
//! `t ≥ 0`. Both are certified numerically on a grid up to a horizon past which
//! the modal decay bound is below `1e-12`; this is a certificate, not a proof.

use std::fmt;

use num_complex::Complex64;

use crate::cogarch::CogarchParams;
use crate::dist::JumpLaw;
use crate::error::{Error, Result};
use crate::matrix::{to_complex, NormKind};
use crate::semi_levy::SemiLevyConfig;

pub const QUADRATURE_NODES: usize = 128;
pub const QUADRATURE_CHECK_NODES: usize = 96;
pub const QUADRATURE_TOLERANCE: f64 = 1e-8;
/// Grid values of `a'e^{Bt}e` above this count as non-negative.
pub const NONNEG_TOLERANCE: f64 = -1e-12;
/// Tail cutoff for the decay bound.
pub const TAIL_BOUND: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct EigenCheck {
    pub ok: bool,
    pub distinct: bool,
    pub eta_max: Option<f64>,
    pub eigenvalues: Vec<Complex64>,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NormMargin {
    pub norm: NormKind,
    /// `‖P⁻¹ e a' P‖_r`.
    pub constant: f64,
    /// `∫ log(1 + c z²) F_j(dz)` per interval.
    pub integrals: Vec<f64>,
    pub rhs: f64,
    /// `rhs − max_j integral`; positive means the condition holds.
    pub margin: f64,
    pub ok: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogMomentCheck {
    pub ok: bool,
    pub per_norm: Vec<NormMargin>,
    /// The norm with the largest margin among those that pass.
    pub best: Option<NormKind>,
    pub error: Option<String>,
}

impl LogMomentCheck {
    pub fn margin(&self, norm: NormKind) -> Option<f64> {
        self.per_norm
            .iter()
            .find(|m| m.norm == norm)
            .map(|m| m.margin)
    }

    fn failed(reason: String) -> Self {
        Self {
            ok: false,
            per_norm: vec![],
            best: None,
            error: Some(reason),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NonnegCheck {
    pub ok: bool,
    /// `min a'e^{Bt}e` over the grid.
    pub min_kernel: f64,
    /// `min a'e^{Bt}Y₀` over the grid.
    pub min_initial: f64,
    pub gamma: f64,
    /// Guaranteed lower bound `α₀ + γ` on the volatility.
    pub floor: f64,
    pub horizon: f64,
    pub step: f64,
    pub grid_points: usize,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionReport {
    pub eigen: EigenCheck,
    pub log_moment: LogMomentCheck,
    pub nonneg: NonnegCheck,
    pub overall: bool,
}

pub fn check_eigen(params: &CogarchParams) -> EigenCheck {
    match params.eigen() {
        Ok(eig) => {
            let eta = eig.eta_max();
            EigenCheck {
                ok: eta < 0.0,
                distinct: true,
                eta_max: Some(eta),
                eigenvalues: eig.eigenvalues().to_vec(),
                detail: {
                    let mut d = if eta < 0.0 {
                        "distinct eigenvalues with negative real parts".to_string()
                    } else {
                        format!("largest real part {eta} is not negative")
                    };
                    if eig.is_ill_conditioned() {
                        d += &format!(
                            "; warning: eigenvector matrix condition {:.1e}",
                            eig.condition()
                        );
                    }
                    d
                },
            }
        }
        Err(e) => EigenCheck {
            ok: false,
            distinct: false,
            eta_max: None,
            eigenvalues: vec![],
            detail: e.to_string(),
        },
    }
}

/// `‖P⁻¹ e a' P‖_r`.
pub fn jump_norm_constant(params: &CogarchParams, r: NormKind) -> Result<f64> {
    let eig = params.eigen()?;
    let q = params.q();
    let ea = nalgebra::DMatrix::from_fn(q, q, |i, j| if i == q - 1 { params.a()[j] } else { 0.0 });
    Ok(eig.natural_norm(&to_complex(&ea), r))
}

/// `E log(1 + c Z²)` by Gauss–Hermite quadrature, cross-checked against a
/// coarser rule.
pub fn log_moment<L: JumpLaw>(law: &L, c: f64) -> Result<f64> {
    let integrate = |n| -> f64 {
        law.quadrature_nodes(n)
            .into_iter()
            .map(|(z, w)| w * (c * z * z).ln_1p())
            .sum()
    };
    let fine = integrate(QUADRATURE_NODES);
    let coarse = integrate(QUADRATURE_CHECK_NODES);
    if (fine - coarse).abs() > QUADRATURE_TOLERANCE * fine.abs() {
        return Err(Error::Quadrature {
            coarse,
            fine,
            coarse_nodes: QUADRATURE_CHECK_NODES,
            fine_nodes: QUADRATURE_NODES,
        });
    }
    Ok(fine)
}

/// `−η τ / Λ(τ)`; infinite when the driver never jumps.
pub fn log_moment_rhs(cfg: &SemiLevyConfig, eta_max: f64) -> f64 {
    let per_period = cfg.jumps_per_period();
    if per_period > 0.0 {
        -eta_max * cfg.period() / per_period
    } else {
        f64::INFINITY
    }
}

fn check_log_moment_norm(
    cfg: &SemiLevyConfig,
    params: &CogarchParams,
    r: NormKind,
) -> Result<NormMargin> {
    let eta = params.eigen()?.eta_max();
    let c = jump_norm_constant(params, r)?;
    let integrals = cfg
        .jump_dists()
        .iter()
        .map(|f| log_moment(f, c))
        .collect::<Result<Vec<_>>>()?;
    let rhs = log_moment_rhs(cfg, eta);
    let worst = integrals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let margin = if rhs.is_finite() {
        rhs - worst
    } else {
        f64::MAX
    };
    Ok(NormMargin {
        norm: r,
        constant: c,
        integrals,
        rhs,
        margin,
        ok: worst < rhs,
    })
}

/// Checks the log-moment condition for each supported norm; passes if any does.
pub fn check_log_moment(cfg: &SemiLevyConfig, params: &CogarchParams) -> LogMomentCheck {
    let eigen = check_eigen(params);
    if !eigen.ok {
        return LogMomentCheck::failed(format!("eigenvalue condition fails: {}", eigen.detail));
    }
    let mut per_norm = Vec::new();
    let mut errors = Vec::new();
    for r in NormKind::ALL {
        match check_log_moment_norm(cfg, params, r) {
            Ok(m) => per_norm.push(m),
            Err(e) => errors.push(format!("r={r}: {e}")),
        }
    }
    let best = per_norm
        .iter()
        .filter(|m| m.ok)
        .max_by(|a, b| a.margin.total_cmp(&b.margin))
        .map(|m| m.norm);
    LogMomentCheck {
        ok: best.is_some(),
        per_norm,
        best,
        error: if errors.is_empty() {
            None
        } else {
            Some(errors.join("; "))
        },
    }
}

fn modal_eval(coeffs: &[Complex64], eta: &[Complex64], t: f64) -> f64 {
    coeffs
        .iter()
        .zip(eta)
        .map(|(c, e)| (c * (e * t).exp()).re)
        .sum()
}

/// Time after which `|Σ c_k e^{η_k t}| ≤ Σ|c_k| e^{ηt}` drops below the tail bound.
fn tail_horizon(coeffs: &[Complex64], eta_max: f64) -> f64 {
    let bound: f64 = coeffs.iter().map(|c| c.norm()).sum();
    if bound <= TAIL_BOUND {
        0.0
    } else {
        (TAIL_BOUND / bound).ln() / eta_max
    }
}

/// Grid certificate for `a'e^{Bt}e ≥ 0` and `a'e^{Bt}Y₀ ≥ γ ≥ −α₀`.
///
/// `step` defaults to `τ/1000` when `None`.
pub fn check_nonneg(
    cfg: &SemiLevyConfig,
    params: &CogarchParams,
    step: Option<f64>,
) -> NonnegCheck {
    let step = step.unwrap_or(cfg.period() / 1000.0);
    let fail = |error: String| NonnegCheck {
        ok: false,
        min_kernel: f64::NAN,
        min_initial: f64::NAN,
        gamma: 0.0,
        floor: params.alpha0(),
        horizon: 0.0,
        step,
        grid_points: 0,
        error: Some(error),
    };
    let eig = match params.eigen() {
        Ok(e) if e.eta_max() < 0.0 => e,
        Ok(e) => {
            return fail(format!(
                "largest real part {} is not negative; no tail bound",
                e.eta_max()
            ))
        }
        Err(e) => return fail(e.to_string()),
    };
    if !(step > 0.0) {
        return fail(format!("grid step must be positive, got {step}"));
    }
    let q = params.q();
    let mut e = vec![0.0; q];
    e[q - 1] = 1.0;
    let kernel = eig.modal_coefficients(params.a(), &e);
    let initial = eig.modal_coefficients(params.a(), params.y0());
    let eta = eig.eigenvalues();
    let horizon = tail_horizon(&kernel, eig.eta_max())
        .max(tail_horizon(&initial, eig.eta_max()))
        .max(cfg.period());
    let points = (horizon / step).ceil() as usize + 1;
    let mut min_kernel = f64::INFINITY;
    let mut min_initial = f64::INFINITY;
    for i in 0..points {
        let t = i as f64 * step;
        min_kernel = min_kernel.min(modal_eval(&kernel, eta, t));
        min_initial = min_initial.min(modal_eval(&initial, eta, t));
    }
    let gamma = min_initial.min(0.0);
    let kernel_ok = min_kernel >= NONNEG_TOLERANCE;
    let initial_ok = gamma >= -params.alpha0();
    let error = match (kernel_ok, initial_ok) {
        (true, true) => None,
        (false, _) => Some(format!("a'e^(Bt)e reaches {min_kernel:e}")),
        (true, false) => Some(format!(
            "a'e^(Bt)Y0 reaches {min_initial:e}, below -alpha0 = {:e}",
            -params.alpha0()
        )),
    };
    NonnegCheck {
        ok: kernel_ok && initial_ok,
        min_kernel,
        min_initial,
        gamma,
        floor: params.alpha0() + gamma,
        horizon,
        step,
        grid_points: points,
        error,
    }
}

pub fn check(cfg: &SemiLevyConfig, params: &CogarchParams) -> ConditionReport {
    let eigen = check_eigen(params);
    let log_moment = check_log_moment(cfg, params);
    let nonneg = check_nonneg(cfg, params, None);
    let overall = eigen.ok && log_moment.ok && nonneg.ok;
    ConditionReport {
        eigen,
        log_moment,
        nonneg,
        overall,
    }
}

impl ConditionReport {
    /// Machine-readable `key=value` lines.
    pub fn to_key_values(&self) -> String {
        let mut out = String::new();
        let fmt_opt = |x: Option<f64>| {
            x.map(|v| format!("{v:.15e}"))
                .unwrap_or_else(|| "nan".into())
        };
        out.push_str(&format!("eigen_ok={}\n", self.eigen.ok));
        out.push_str(&format!("eta_max={}\n", fmt_opt(self.eigen.eta_max)));
        for r in NormKind::ALL {
            out.push_str(&format!(
                "log_moment_margin_{}={}\n",
                r.tag(),
                fmt_opt(self.log_moment.margin(r))
            ));
        }
        out.push_str(&format!("log_moment_ok={}\n", self.log_moment.ok));
        out.push_str(&format!("nonneg_ok={}\n", self.nonneg.ok));
        out.push_str(&format!("gamma={:.15e}\n", self.nonneg.gamma));
        out.push_str(&format!("floor={:.15e}\n", self.nonneg.floor));
        out.push_str(&format!("overall={}\n", self.overall));
        out
    }
}

impl fmt::Display for ConditionReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mark = |ok: bool| if ok { "ok" } else { "FAILED" };
        writeln!(
            f,
            "eigenvalues: {} ({})",
            mark(self.eigen.ok),
            self.eigen.detail
        )?;
        for e in &self.eigen.eigenvalues {
            writeln!(f, "  eta = {:.10} {:+.10}i", e.re, e.im)?;
        }
        writeln!(f, "log-moment condition: {}", mark(self.log_moment.ok))?;
        for m in &self.log_moment.per_norm {
            writeln!(
                f,
                "  r={:<3} c={:.6e} rhs={:.6e} max integral={:.6e} margin={:+.6e} {}",
                m.norm.to_string(),
                m.constant,
                m.rhs,
                m.integrals
                    .iter()
                    .copied()
                    .fold(f64::NEG_INFINITY, f64::max),
                m.margin,
                mark(m.ok)
            )?;
        }
        if let Some(e) = &self.log_moment.error {
            writeln!(f, "  note: {e}")?;
        }
        writeln!(f, "non-negativity: {}", mark(self.nonneg.ok))?;
        writeln!(
            f,
            "  min a'e^(Bt)e = {:.6e}, min a'e^(Bt)Y0 = {:.6e} on [0, {:.3}] step {:.3e}",
            self.nonneg.min_kernel, self.nonneg.min_initial, self.nonneg.horizon, self.nonneg.step
        )?;
        writeln!(
            f,
            "  gamma = {:.6e}, volatility floor = {:.6e}",
            self.nonneg.gamma, self.nonneg.floor
        )?;
        if let Some(e) = &self.nonneg.error {
            writeln!(f, "  note: {e}")?;
        }
        write!(f, "overall: {}", mark(self.overall))
    }
}
