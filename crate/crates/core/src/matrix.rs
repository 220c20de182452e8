//! Companion-matrix linear algebra: eigenstructure, matrix exponentials and
//! the operator norms used by the stationarity conditions.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;

/// `B` with ones on the superdiagonal and last row `(-β_q, …, -β_1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CompanionMatrix {
    betas: Vec<f64>,
    dense: DMatrix<f64>,
}

impl CompanionMatrix {
    pub fn new(betas: &[f64]) -> Result<Self> {
        let q = betas.len();
        if q == 0 {
            return Err(Error::InvalidParameter(
                "companion matrix needs q >= 1".into(),
            ));
        }
        if betas.iter().any(|b| !b.is_finite()) {
            return Err(Error::InvalidParameter("betas must be finite".into()));
        }
        if betas[q - 1] == 0.0 {
            return Err(Error::InvalidParameter("beta_q must be non-zero".into()));
        }
        let mut dense = DMatrix::zeros(q, q);
        for i in 0..q - 1 {
            dense[(i, i + 1)] = 1.0;
        }
        for (k, b) in betas.iter().enumerate() {
            dense[(q - 1, q - 1 - k)] = -b;
        }
        Ok(Self {
            betas: betas.to_vec(),
            dense,
        })
    }

    pub fn q(&self) -> usize {
        self.betas.len()
    }

    pub fn betas(&self) -> &[f64] {
        &self.betas
    }

    pub fn dense(&self) -> &DMatrix<f64> {
        &self.dense
    }

    /// Monic characteristic polynomial `λ^q + β_1 λ^{q-1} + … + β_q`,
    /// highest degree first.
    pub fn char_poly(&self) -> Vec<f64> {
        std::iter::once(1.0)
            .chain(self.betas.iter().copied())
            .collect()
    }

    pub fn eigen(&self) -> Result<EigenStructure> {
        EigenStructure::new(self)
    }
}

fn horner(coeffs: &[f64], z: Complex64) -> (Complex64, Complex64) {
    let mut p = Complex64::new(0.0, 0.0);
    let mut dp = Complex64::new(0.0, 0.0);
    for &c in coeffs {
        dp = dp * z + p;
        p = p * z + c;
    }
    (p, dp)
}

/// Roots of a real monic polynomial by Aberth–Ehrlich iteration followed by a
/// few Newton polishing steps. Conjugate pairs are made exactly conjugate.
pub fn poly_roots(coeffs: &[f64]) -> Vec<Complex64> {
    let q = coeffs.len() - 1;
    if q == 0 {
        return vec![];
    }
    if q == 1 {
        return vec![Complex64::new(-coeffs[1] / coeffs[0], 0.0)];
    }
    let radius = coeffs[1..]
        .iter()
        .enumerate()
        .map(|(k, c)| (c / coeffs[0]).abs().powf(1.0 / (k as f64 + 1.0)))
        .fold(0.0f64, f64::max)
        .max(1e-3);
    let mut z: Vec<Complex64> = (0..q)
        .map(|k| {
            Complex64::from_polar(
                radius,
                2.0 * std::f64::consts::PI * k as f64 / q as f64 + 0.4,
            )
        })
        .collect();
    for _ in 0..1000 {
        let mut largest = 0.0f64;
        for k in 0..q {
            let (p, dp) = horner(coeffs, z[k]);
            if p.norm() == 0.0 {
                continue;
            }
            let ratio = p / dp;
            let repulsion: Complex64 = (0..q)
                .filter(|&j| j != k)
                .map(|j| 1.0 / (z[k] - z[j]))
                .sum();
            let step = ratio / (1.0 - ratio * repulsion);
            if step.is_finite() {
                z[k] -= step;
                largest = largest.max(step.norm() / z[k].norm().max(1.0));
            }
        }
        if largest < 1e-16 {
            break;
        }
    }
    for zk in z.iter_mut() {
        for _ in 0..3 {
            let (p, dp) = horner(coeffs, *zk);
            if dp.norm() == 0.0 {
                break;
            }
            let step = p / dp;
            if step.is_finite() {
                *zk -= step;
            }
        }
    }
    symmetrize_conjugates(&mut z);
    z.sort_by(|a, b| b.re.total_cmp(&a.re).then(b.im.total_cmp(&a.im)));
    z
}

fn symmetrize_conjugates(z: &mut [Complex64]) {
    let q = z.len();
    let mut paired = vec![false; q];
    for i in 0..q {
        if paired[i] {
            continue;
        }
        let scale = z[i].norm().max(1.0);
        if z[i].im.abs() <= 1e-10 * scale {
            z[i].im = 0.0;
            paired[i] = true;
            continue;
        }
        let partner = (0..q).filter(|&j| j != i && !paired[j]).min_by(|&a, &b| {
            (z[a] - z[i].conj())
                .norm()
                .total_cmp(&(z[b] - z[i].conj()).norm())
        });
        if let Some(j) = partner {
            if (z[j] - z[i].conj()).norm() <= 1e-8 * scale {
                let re = 0.5 * (z[i].re + z[j].re);
                let im = 0.5 * (z[i].im - z[j].im).abs();
                z[i] = Complex64::new(re, im);
                z[j] = Complex64::new(re, -im);
                paired[j] = true;
            }
        }
        paired[i] = true;
    }
}

/// Eigenvalues of `B`, the Vandermonde matrix `P` of eigenvectors
/// (`P_{ik} = η_k^i`) and its inverse, so that `P⁻¹BP = diag(η)`.
#[derive(Debug, Clone)]
pub struct EigenStructure {
    eigenvalues: Vec<Complex64>,
    p: CMatrix,
    p_inv: CMatrix,
    eta_max: f64,
    condition: f64,
}

impl EigenStructure {
    pub fn new(b: &CompanionMatrix) -> Result<Self> {
        let coeffs = b.char_poly();
        let eta = poly_roots(&coeffs);
        let q = eta.len();
        check_distinct(&coeffs, &eta)?;

        let p = CMatrix::from_fn(q, q, |i, k| eta[k].powi(i as i32));
        let p_inv = p
            .clone()
            .lu()
            .try_inverse()
            .ok_or_else(|| Error::InvalidParameter("eigenvector matrix is singular".into()))?;
        let eta_max = eta.iter().map(|e| e.re).fold(f64::NEG_INFINITY, f64::max);
        let condition = lr_norm(&p, NormKind::One) * lr_norm(&p_inv, NormKind::One);
        Ok(Self {
            eigenvalues: eta,
            p,
            p_inv,
            eta_max,
            condition,
        })
    }

    pub fn eigenvalues(&self) -> &[Complex64] {
        &self.eigenvalues
    }

    pub fn p(&self) -> &CMatrix {
        &self.p
    }

    pub fn p_inv(&self) -> &CMatrix {
        &self.p_inv
    }

    /// `η = max_i Re(η_i)`.
    pub fn eta_max(&self) -> f64 {
        self.eta_max
    }

    /// L¹ condition number estimate of `P`.
    pub fn condition(&self) -> f64 {
        self.condition
    }

    pub fn is_ill_conditioned(&self) -> bool {
        self.condition > 1e12
    }

    pub fn q(&self) -> usize {
        self.eigenvalues.len()
    }

    /// `e^{Bt} = Re(P diag(e^{η_i t}) P⁻¹)`.
    pub fn mat_exp(&self, t: f64) -> Result<DMatrix<f64>> {
        let q = self.q();
        let scaled = CMatrix::from_fn(q, q, |i, k| {
            self.p[(i, k)] * (self.eigenvalues[k] * t).exp()
        });
        let full = scaled * &self.p_inv;
        let size = full.iter().map(|z| z.norm()).fold(0.0f64, f64::max);
        let residue = full.iter().map(|z| z.im.abs()).fold(0.0f64, f64::max);
        if size > 0.0 && residue > 1e-10 * size {
            return Err(Error::ImaginaryResidue(residue / size));
        }
        Ok(full.map(|z| z.re))
    }

    /// `e^{Bt} y` through the modal coordinates `P⁻¹y`; no residue check.
    pub fn exp_apply(&self, t: f64, y: &[f64]) -> Vec<f64> {
        let q = self.q();
        let modal: Vec<Complex64> = (0..q)
            .map(|k| {
                let c: Complex64 = (0..q).map(|j| self.p_inv[(k, j)] * y[j]).sum();
                c * (self.eigenvalues[k] * t).exp()
            })
            .collect();
        (0..q)
            .map(|i| {
                (0..q)
                    .map(|k| self.p[(i, k)] * modal[k])
                    .sum::<Complex64>()
                    .re
            })
            .collect()
    }

    /// Coefficients `c_k` with `a' e^{Bt} x = Re Σ_k c_k e^{η_k t}`.
    pub fn modal_coefficients(&self, a: &[f64], x: &[f64]) -> Vec<Complex64> {
        let q = self.q();
        (0..q)
            .map(|k| {
                let left: Complex64 = (0..q).map(|i| self.p[(i, k)] * a[i]).sum();
                let right: Complex64 = (0..q).map(|j| self.p_inv[(k, j)] * x[j]).sum();
                left * right
            })
            .collect()
    }

    /// `‖C‖_{P,r} = ‖P⁻¹CP‖_r`.
    pub fn natural_norm(&self, c: &CMatrix, r: NormKind) -> f64 {
        lr_norm(&(&self.p_inv * c * &self.p), r)
    }

    pub fn natural_norm_real(&self, c: &DMatrix<f64>, r: NormKind) -> f64 {
        self.natural_norm(&to_complex(c), r)
    }

    /// `‖c‖_{P,r} = ‖P⁻¹c‖_r`.
    pub fn natural_vec_norm(&self, c: &[f64], r: NormKind) -> f64 {
        let v = &self.p_inv
            * DVector::from_iterator(c.len(), c.iter().map(|&x| Complex64::new(x, 0.0)));
        vec_norm(v.as_slice(), r)
    }
}

/// Fails when two roots are closer than `1e-8·max|η|`, or when the computed
/// roots are too ill-conditioned to be told apart (a numerically repeated root
/// splits into a pair at distance ~√ε which would otherwise pass the gap test).
fn check_distinct(coeffs: &[f64], eta: &[Complex64]) -> Result<()> {
    let q = eta.len();
    if q < 2 {
        return Ok(());
    }
    let scale = eta.iter().map(|e| e.norm()).fold(0.0f64, f64::max);
    let threshold = 1e-8 * scale;
    let mut min_gap = f64::INFINITY;
    for i in 0..q {
        let gap = (0..q)
            .filter(|&j| j != i)
            .map(|j| (eta[i] - eta[j]).norm())
            .fold(f64::INFINITY, f64::min);
        min_gap = min_gap.min(gap);
        let (_, dp) = horner(coeffs, eta[i]);
        let magnitude: f64 = coeffs
            .iter()
            .rev()
            .enumerate()
            .map(|(k, c)| c.abs() * eta[i].norm().powi(k as i32))
            .sum();
        let forward_error = 4.0 * f64::EPSILON * magnitude / dp.norm();
        if !(forward_error < 0.1 * gap) {
            return Err(Error::RepeatedEigenvalues {
                min_gap: gap,
                threshold: (10.0 * forward_error).max(threshold),
            });
        }
    }
    if min_gap < threshold {
        return Err(Error::RepeatedEigenvalues { min_gap, threshold });
    }
    Ok(())
}

pub fn to_complex(m: &DMatrix<f64>) -> CMatrix {
    m.map(|x| Complex64::new(x, 0.0))
}

/// Which induced `L^r` operator norm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NormKind {
    One,
    Two,
    Inf,
}

impl NormKind {
    pub const ALL: [NormKind; 3] = [NormKind::One, NormKind::Two, NormKind::Inf];

    /// Supported orders are 1, 2 and ∞.
    pub fn from_order(r: f64) -> Result<Self> {
        if r == 1.0 {
            Ok(NormKind::One)
        } else if r == 2.0 {
            Ok(NormKind::Two)
        } else if r == f64::INFINITY {
            Ok(NormKind::Inf)
        } else {
            Err(Error::InvalidParameter(format!(
                "matrix L^r norm supported for r in {{1, 2, inf}}, got {r}"
            )))
        }
    }

    /// Short tag used in report keys: `r1`, `r2`, `rinf`.
    pub fn tag(self) -> &'static str {
        match self {
            NormKind::One => "r1",
            NormKind::Two => "r2",
            NormKind::Inf => "rinf",
        }
    }
}

impl fmt::Display for NormKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NormKind::One => "1",
            NormKind::Two => "2",
            NormKind::Inf => "inf",
        })
    }
}

impl FromStr for NormKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "1" => Ok(NormKind::One),
            "2" => Ok(NormKind::Two),
            "inf" | "infinity" => Ok(NormKind::Inf),
            other => Err(Error::InvalidParameter(format!(
                "unsupported norm order {other:?}"
            ))),
        }
    }
}

fn vec_norm(v: &[Complex64], r: NormKind) -> f64 {
    match r {
        NormKind::One => v.iter().map(|z| z.norm()).sum(),
        NormKind::Two => v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt(),
        NormKind::Inf => v.iter().map(|z| z.norm()).fold(0.0, f64::max),
    }
}

/// Induced matrix norm: max column sum (1), spectral norm (2), max row sum (∞).
pub fn lr_norm(c: &CMatrix, r: NormKind) -> f64 {
    match r {
        NormKind::One => (0..c.ncols())
            .map(|j| c.column(j).iter().map(|z| z.norm()).sum::<f64>())
            .fold(0.0, f64::max),
        NormKind::Inf => (0..c.nrows())
            .map(|i| c.row(i).iter().map(|z| z.norm()).sum::<f64>())
            .fold(0.0, f64::max),
        NormKind::Two => spectral_norm(c),
    }
}

/// Largest singular value by power iteration on `C^H C`.
fn spectral_norm(c: &CMatrix) -> f64 {
    let n = c.ncols();
    if n == 0 {
        return 0.0;
    }
    let gram = c.adjoint() * c;
    let mut v = DVector::from_fn(n, |i, _| {
        Complex64::new(1.0 + 0.1 * i as f64, 0.05 * i as f64)
    });
    v /= Complex64::new(v.norm(), 0.0);
    let mut rho = 0.0f64;
    for _ in 0..20_000 {
        let w = &gram * &v;
        let next = v.dotc(&w).re;
        let size = w.norm();
        if size == 0.0 {
            return 0.0;
        }
        v = w / Complex64::new(size, 0.0);
        if (next - rho).abs() <= 1e-14 * next.abs() {
            rho = next;
            break;
        }
        rho = next;
    }
    rho.max(0.0).sqrt()
}
