//! The 4×4 linearized matrix around a self-similar burst and the eigenvalue
//! test requiring every eigenvalue to have real part `−a`.

use crate::kernel::{self, KernelError};
use crate::linalg::{self, CMat4, LinalgError};
use crate::selfsimilar::{self, SelfSimilarError, TripleConfig, SS_TOL};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Absolute tolerance on eigenvalue real parts.
pub const EIG_TOL: f64 = 1e-8;
/// Relative gap below which two μ roots count as repeated.
pub const DISTINCT_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StabilityError {
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    SelfSimilar(#[from] SelfSimilarError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("points a_{0} and a_{1} coincide")]
    Coincident(usize, usize),
    #[error("rate a = {0} must be positive for the propagator")]
    NonPositiveRate(f64),
    #[error("propagator time must lie in (0, 1], got {0}")]
    TimeDomain(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityMatrix {
    pub entries: CMat4,
    pub a_rate: f64,
    pub b_rate: f64,
    /// `(L13, L14, L23, L24)`.
    pub off: [Complex64; 4],
}

impl StabilityMatrix {
    /// Assembles `[[d,0,L13,L14],[0,d,L23,L24],[L̄13,L̄14,d̄,0],[L̄23,L̄24,0,d̄]]`
    /// with `d = −a − ib`.
    pub fn from_parts(a_rate: f64, b_rate: f64, off: [Complex64; 4]) -> Self {
        let [l13, l14, l23, l24] = off;
        let d = Complex64::new(-a_rate, -b_rate);
        let z = Complex64::new(0.0, 0.0);
        let entries = [
            [d, z, l13, l14],
            [z, d, l23, l24],
            [l13.conj(), l14.conj(), d.conj(), z],
            [l23.conj(), l24.conj(), z, d.conj()],
        ];
        StabilityMatrix {
            entries,
            a_rate,
            b_rate,
            off,
        }
    }
}

/// Term `−(i c/|a₁|²) conj(a₁² ξ_m ((α−2)|d|^{α−4} − |d|^{α−2}/d²))`, `d = a_p − a_q`.
fn lemma_term(c: f64, alpha: f64, a: &[Complex64; 3], xi: &[f64; 3], m: usize, p: usize, q: usize) -> Complex64 {
    let d = a[p] - a[q];
    let r2 = d.norm_sqr();
    let inner = (alpha - 2.0) * r2.powf(0.5 * alpha - 2.0) - r2.powf(0.5 * alpha - 1.0) / (d * d);
    let a1 = a[0];
    Complex64::new(0.0, -c / a1.norm_sqr()) * (a1 * a1 * xi[m] * inner).conj()
}

pub(crate) fn off_entries(c: f64, cfg: &TripleConfig) -> [Complex64; 4] {
    let (a, xi, al) = (&cfg.a, &cfg.xi, cfg.alpha);
    let t = |m, p, q| lemma_term(c, al, a, xi, m, p, q);
    let r2 = a[1] / a[0];
    let r3 = a[2] / a[0];
    let l13 = t(2, 1, 2) + t(0, 1, 0) + r2 * t(1, 0, 1);
    let l14 = t(2, 1, 2) + r2 * t(2, 0, 2);
    let l23 = t(1, 2, 1) + r3 * t(1, 0, 1);
    let l24 = t(1, 2, 1) + t(0, 2, 0) + r3 * t(1, 0, 2);
    [l13, l14, l23, l24]
}

/// Builds the linearized matrix from the closed-form entries `L13 … L24`.
pub fn l_matrix(cfg: &TripleConfig, a_rate: f64, b_rate: f64) -> Result<StabilityMatrix, StabilityError> {
    let c = kernel::coupling_constant(cfg.alpha)?;
    let guard = kernel::DMIN_REL * kernel::diameter(&cfg.a);
    for (p, q) in [(0, 1), (0, 2), (1, 2)] {
        if (cfg.a[p] - cfg.a[q]).norm() <= guard {
            return Err(StabilityError::Coincident(p, q));
        }
    }
    if cfg.a[0].norm() == 0.0 {
        return Err(SelfSimilarError::Degenerate(0).into());
    }
    Ok(StabilityMatrix::from_parts(a_rate, b_rate, off_entries(c, cfg)))
}

/// `(c1, c2)` of the quartic in μ, from the entries as real arithmetic.
pub fn mu_coefficients(m: &StabilityMatrix) -> (f64, f64) {
    mu_coefficients_of(&m.off)
}

pub(crate) fn mu_coefficients_of(off: &[Complex64; 4]) -> (f64, f64) {
    let [l13, l14, l23, l24] = *off;
    let c1 = l13.norm_sqr() + l24.norm_sqr() + 2.0 * (l23 * l14.conj()).re;
    let c2 = l13.norm_sqr() * l24.norm_sqr() + l23.norm_sqr() * l14.norm_sqr()
        - 2.0 * (l14 * l13.conj() * l23 * l24.conj()).re;
    (c1, c2)
}

/// The same coefficients evaluated in complex arithmetic; the imaginary
/// parts are roundoff.
pub fn mu_coefficients_complex(m: &StabilityMatrix) -> (Complex64, Complex64) {
    let [l13, l14, l23, l24] = m.off;
    let c1 = l23 * l14.conj() + l24 * l24.conj() + l13 * l13.conj() + l14 * l23.conj();
    let c2 = l13 * l13.conj() * l24 * l24.conj() + l23 * l23.conj() * l14 * l14.conj()
        - l14 * l13.conj() * l23 * l24.conj()
        - l13 * l14.conj() * l24 * l23.conj();
    (c1, c2)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MuFailure {
    /// `c1² − 4c2 ≤ 0`.
    ComplexMuSquared,
    /// `2b² − c1 − √(c1² − 4c2) ≤ 0`.
    NonPositiveMuSquared,
}

impl std::fmt::Display for MuFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            MuFailure::ComplexMuSquared => write!(f, "complex μ²"),
            MuFailure::NonPositiveMuSquared => write!(f, "non-positive μ²"),
        }
    }
}

/// Real roots `[+√μ²₊, −√μ²₊, +√μ²₋, −√μ²₋]` of
/// `μ⁴ + μ²(c1 − 2b²) + b⁴ − b²c1 + c2 = 0`.
pub fn mu_roots(b_rate: f64, c1: f64, c2: f64) -> Result<[f64; 4], MuFailure> {
    let disc = c1 * c1 - 4.0 * c2;
    if !(disc > 0.0) {
        return Err(MuFailure::ComplexMuSquared);
    }
    let sq = disc.sqrt();
    let base = 2.0 * b_rate * b_rate - c1;
    if !(base - sq > 0.0) {
        return Err(MuFailure::NonPositiveMuSquared);
    }
    let hi = (0.5 * (base + sq)).sqrt();
    let lo = (0.5 * (base - sq)).sqrt();
    Ok([hi, -hi, lo, -lo])
}

/// Pairwise gap of the roots against `DISTINCT_TOL·(1 + max|μ|)`.
pub fn roots_distinct(roots: &[f64]) -> bool {
    let m = roots.iter().map(|r| r.abs()).fold(0.0, f64::max);
    let tol = DISTINCT_TOL * (1.0 + m);
    for i in 0..roots.len() {
        for j in i + 1..roots.len() {
            if (roots[i] - roots[j]).abs() <= tol {
                return false;
            }
        }
    }
    true
}

pub fn eigen4(m: &StabilityMatrix) -> Result<[Complex64; 4], StabilityError> {
    Ok(linalg::eigenvalues(&m.entries)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisReport {
    pub pass: bool,
    pub selfsimilar_ok: bool,
    pub a_positive: bool,
    pub mu_roots: Vec<f64>,
    pub eigen_ok: bool,
    pub distinct: bool,
    pub details: String,
    pub alpha: f64,
    pub a: f64,
    pub b: f64,
    pub residual: f64,
    pub centered_positions: Vec<[f64; 2]>,
    pub intensities: Vec<f64>,
    pub l13: Option<[f64; 2]>,
    pub l14: Option<[f64; 2]>,
    pub l23: Option<[f64; 2]>,
    pub l24: Option<[f64; 2]>,
    pub c1: Option<f64>,
    pub c2: Option<f64>,
    pub eigenvalues: Vec<[f64; 2]>,
    /// Largest distance between an eigenvalue and its predicted `−a + iμ`.
    pub eigen_mismatch: Option<f64>,
}

/// Matches each eigenvalue to the nearest `−a + iμ_j`, one to one, and
/// returns the largest distance.
pub fn eigen_mu_mismatch(ev: &[Complex64; 4], a_rate: f64, roots: &[f64; 4]) -> f64 {
    let mut used = [false; 4];
    let mut worst: f64 = 0.0;
    for e in ev {
        let mut best = (f64::INFINITY, 0);
        for (k, mu) in roots.iter().enumerate() {
            if used[k] {
                continue;
            }
            let d = (e - Complex64::new(-a_rate, *mu)).norm();
            if d < best.0 {
                best = (d, k);
            }
        }
        used[best.1] = true;
        worst = worst.max(best.0);
    }
    worst
}

/// Centers the triple, checks self-similarity with `a > 0`, builds the
/// linearized matrix and requires four distinct real μ. The eigenvalues are
/// computed independently and reported as a cross-check.
pub fn hypothesis_a_check(cfg: &TripleConfig) -> Result<HypothesisReport, StabilityError> {
    let cen = selfsimilar::center(cfg)?;
    let rates = selfsimilar::selfsimilar_rate(&cen)?;
    let selfsimilar_ok = rates.residual <= SS_TOL;
    let a_positive = rates.a_rate > selfsimilar::RATE_TOL;
    let mut rep = HypothesisReport {
        pass: false,
        selfsimilar_ok,
        a_positive,
        mu_roots: Vec::new(),
        eigen_ok: false,
        distinct: false,
        details: String::new(),
        alpha: cfg.alpha,
        a: rates.a_rate,
        b: rates.b_rate,
        residual: rates.residual,
        centered_positions: cen.a.iter().map(|w| [w.re, w.im]).collect(),
        intensities: cen.xi.to_vec(),
        l13: None,
        l14: None,
        l23: None,
        l24: None,
        c1: None,
        c2: None,
        eigenvalues: Vec::new(),
        eigen_mismatch: None,
    };
    if !selfsimilar_ok {
        rep.details = format!("not self-similar: ratio spread {:e} exceeds {SS_TOL:e}", rates.residual);
        return Ok(rep);
    }
    if !a_positive {
        rep.details = format!("rate a = {:e} is not positive", rates.a_rate);
        return Ok(rep);
    }
    let m = l_matrix(&cen, rates.a_rate, rates.b_rate)?;
    let pair = |v: Complex64| Some([v.re, v.im]);
    rep.l13 = pair(m.off[0]);
    rep.l14 = pair(m.off[1]);
    rep.l23 = pair(m.off[2]);
    rep.l24 = pair(m.off[3]);
    let (c1, c2) = mu_coefficients(&m);
    rep.c1 = Some(c1);
    rep.c2 = Some(c2);
    let ev = eigen4(&m)?;
    rep.eigenvalues = ev.iter().map(|e| [e.re, e.im]).collect();
    match mu_roots(rates.b_rate, c1, c2) {
        Err(f) => {
            rep.eigen_ok = ev.iter().all(|e| (e.re + rates.a_rate).abs() <= EIG_TOL);
            rep.details = format!("condition on μ fails: {f}");
        }
        Ok(roots) => {
            rep.mu_roots = roots.to_vec();
            rep.distinct = roots_distinct(&roots);
            let mismatch = eigen_mu_mismatch(&ev, rates.a_rate, &roots);
            rep.eigen_mismatch = Some(mismatch);
            rep.eigen_ok = ev.iter().all(|e| (e.re + rates.a_rate).abs() <= EIG_TOL);
            rep.pass = rep.distinct;
            rep.details = if !rep.distinct {
                "μ roots are not distinct".into()
            } else if !rep.eigen_ok {
                format!("four distinct real μ; eigensolver cross-check off by {mismatch:e}")
            } else {
                "four distinct real μ; eigenvalue real parts equal −a".into()
            };
        }
    }
    Ok(rep)
}

/// Operator 2-norm of `exp(log t / ((4−α) a) · L)`.
pub fn propagator_norm(m: &StabilityMatrix, alpha: f64, t: f64) -> Result<f64, StabilityError> {
    kernel::check_alpha(alpha)?;
    if !(m.a_rate > 0.0) {
        return Err(StabilityError::NonPositiveRate(m.a_rate));
    }
    if !(t > 0.0 && t <= 1.0) {
        return Err(StabilityError::TimeDomain(t));
    }
    let s = t.ln() / ((4.0 - alpha) * m.a_rate);
    let e = linalg::expm(&linalg::scale(&m.entries, Complex64::new(s, 0.0)));
    Ok(linalg::norm2(&e)?)
}
