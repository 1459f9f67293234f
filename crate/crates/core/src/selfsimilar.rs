//! Self-similar three-vortex motions `z_j(t) = a_j Z(t)`.

use crate::kernel::{self, pair_term, KernelError};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Absolute tolerance on the spread of the ratios `q_j = v_j / conj(a_j)`.
pub const SS_TOL: f64 = 1e-8;
/// Threshold on `|a_rate|` below which a motion is a relative equilibrium.
pub const RATE_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SelfSimilarError {
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error("position a_{0} vanishes, the ratio to conj(a_j) is undefined")]
    Degenerate(usize),
    #[error("total intensity is zero, the configuration cannot be centered")]
    ZeroTotalIntensity,
    #[error("configuration is not centered (|Σ ξ a| = {0:e})")]
    NotCentered(f64),
    #[error("time {t} is outside the domain of the motion (t0 = {t0}, a = {a})")]
    TimeDomain { t: f64, t0: f64, a: f64 },
    #[error("rate a = 0 has no power-law profile")]
    ZeroRate,
}

/// Shape `a₁, a₂, a₃`, intensities and exponent of a candidate triple.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TripleJson", into = "TripleJson")]
pub struct TripleConfig {
    pub a: [Complex64; 3],
    pub xi: [f64; 3],
    pub alpha: f64,
}

#[derive(Serialize, Deserialize)]
struct TripleJson {
    alpha: f64,
    positions: [[f64; 2]; 3],
    intensities: [f64; 3],
}

impl From<TripleConfig> for TripleJson {
    fn from(c: TripleConfig) -> Self {
        TripleJson {
            alpha: c.alpha,
            positions: c.a.map(|w| [w.re, w.im]),
            intensities: c.xi,
        }
    }
}

impl TryFrom<TripleJson> for TripleConfig {
    type Error = SelfSimilarError;
    fn try_from(j: TripleJson) -> Result<Self, Self::Error> {
        TripleConfig::new(j.positions.map(|p| Complex64::new(p[0], p[1])), j.intensities, j.alpha)
    }
}

impl TripleConfig {
    pub fn new(a: [Complex64; 3], xi: [f64; 3], alpha: f64) -> Result<Self, SelfSimilarError> {
        let c = TripleConfig { a, xi, alpha };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<(), SelfSimilarError> {
        self.state(0.0).validate()?;
        Ok(())
    }

    pub fn state(&self, t: f64) -> kernel::VortexState {
        kernel::VortexState {
            t,
            z: self.a.to_vec(),
            xi: self.xi.to_vec(),
            alpha: self.alpha,
        }
    }

    /// `|Σ ξ_j a_j|`.
    pub fn center_offset(&self) -> f64 {
        (0..3).map(|j| self.xi[j] * self.a[j]).sum::<Complex64>().norm()
    }

    pub fn is_centered(&self) -> bool {
        let scale: f64 = (0..3).map(|j| self.xi[j].abs() * self.a[j].norm()).sum();
        self.center_offset() <= 1e-12 * scale.max(f64::MIN_POSITIVE)
    }

    pub fn scaled(&self, lambda: f64) -> TripleConfig {
        TripleConfig {
            a: self.a.map(|w| w * lambda),
            ..*self
        }
    }

    pub fn negated(&self) -> TripleConfig {
        TripleConfig {
            xi: self.xi.map(|x| -x),
            ..*self
        }
    }
}

/// Rates, reference time and angle of `Z(t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelfSimilarMotion {
    #[serde(rename = "a")]
    pub a_rate: f64,
    #[serde(rename = "b")]
    pub b_rate: f64,
    pub t0: f64,
    pub theta0: f64,
    pub alpha: f64,
}

impl std::fmt::Display for SelfSimilarMotion {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "a = {}, b = {}, t0 = {}, theta0 = {}", self.a_rate, self.b_rate, self.t0, self.theta0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Classification {
    RelativeEquilibrium,
    Burst,
    Collapse,
    NotSelfSimilar,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rates {
    pub a_rate: f64,
    pub b_rate: f64,
    /// `max_j |q_j − mean(q)|`.
    pub residual: f64,
}

/// Translates the triple so that `Σ ξ_j a_j = 0`.
pub fn center(cfg: &TripleConfig) -> Result<TripleConfig, SelfSimilarError> {
    let total: f64 = cfg.xi.iter().sum();
    let scale: f64 = cfg.xi.iter().map(|x| x.abs()).sum();
    if total.abs() <= 1e-14 * scale {
        return Err(SelfSimilarError::ZeroTotalIntensity);
    }
    let c: Complex64 = (0..3).map(|j| cfg.xi[j] * cfg.a[j]).sum::<Complex64>() / total;
    Ok(TripleConfig {
        a: cfg.a.map(|w| w - c),
        ..*cfg
    })
}

/// Conjugate velocities `v_j` of the triple with an explicit coupling constant.
pub(crate) fn triple_velocities(c_alpha: f64, alpha: f64, a: &[Complex64; 3], xi: &[f64; 3]) -> [Complex64; 3] {
    let p01 = pair_term(c_alpha, alpha, a[0] - a[1]);
    let p02 = pair_term(c_alpha, alpha, a[0] - a[2]);
    let p12 = pair_term(c_alpha, alpha, a[1] - a[2]);
    [
        xi[1] * p01 + xi[2] * p02,
        -xi[0] * p01 + xi[2] * p12,
        -xi[0] * p02 - xi[1] * p12,
    ]
}

/// `a − ib = mean(q_j)` with `q_j = v_j / conj(a_j)`, using a supplied `c_α`.
pub(crate) fn rates_with(c_alpha: f64, cfg: &TripleConfig) -> Result<Rates, SelfSimilarError> {
    let v = triple_velocities(c_alpha, cfg.alpha, &cfg.a, &cfg.xi);
    let mut q = [Complex64::new(0.0, 0.0); 3];
    for j in 0..3 {
        if cfg.a[j].norm() == 0.0 {
            return Err(SelfSimilarError::Degenerate(j));
        }
        q[j] = v[j] / cfg.a[j].conj();
    }
    let m = (q[0] + q[1] + q[2]) / 3.0;
    let residual = q.iter().map(|qj| (qj - m).norm()).fold(0.0, f64::max);
    Ok(Rates {
        a_rate: m.re,
        b_rate: -m.im,
        residual,
    })
}

pub fn selfsimilar_rate(cfg: &TripleConfig) -> Result<Rates, SelfSimilarError> {
    cfg.validate()?;
    if !cfg.is_centered() {
        return Err(SelfSimilarError::NotCentered(cfg.center_offset()));
    }
    rates_with(kernel::coupling_constant(cfg.alpha)?, cfg)
}

/// `(H, Lmom)` of the triple.
pub fn check_h_l_zero(cfg: &TripleConfig) -> Result<(f64, f64), SelfSimilarError> {
    let q = kernel::conserved(&cfg.state(0.0))?;
    Ok((q.h, q.lmom))
}

pub fn classify(cfg: &TripleConfig) -> Result<Classification, SelfSimilarError> {
    let r = selfsimilar_rate(cfg)?;
    Ok(classify_rates(&r))
}

pub fn classify_rates(r: &Rates) -> Classification {
    if r.residual > SS_TOL {
        Classification::NotSelfSimilar
    } else if r.a_rate > RATE_TOL {
        Classification::Burst
    } else if r.a_rate < -RATE_TOL {
        Classification::Collapse
    } else {
        Classification::RelativeEquilibrium
    }
}

impl SelfSimilarMotion {
    pub fn from_rates(r: &Rates, alpha: f64, t0: f64, theta0: f64) -> Self {
        SelfSimilarMotion {
            a_rate: r.a_rate,
            b_rate: r.b_rate,
            t0,
            theta0,
            alpha,
        }
    }

    /// Motion of the time-inverted system: `(a, b, t₀) ↦ (−a, −b, −t₀)`.
    pub fn time_reversed(&self) -> Self {
        SelfSimilarMotion {
            a_rate: -self.a_rate,
            b_rate: -self.b_rate,
            t0: -self.t0,
            ..*self
        }
    }

    fn elapsed(&self, t: f64) -> Result<f64, SelfSimilarError> {
        if self.a_rate == 0.0 {
            return Err(SelfSimilarError::ZeroRate);
        }
        let dt = if self.a_rate > 0.0 { t - self.t0 } else { self.t0 - t };
        if !(dt > 0.0) {
            return Err(SelfSimilarError::TimeDomain {
                t,
                t0: self.t0,
                a: self.a_rate,
            });
        }
        Ok(dt)
    }
}

/// `Z(t) = ((4−α) a (t−t₀))^{1/(4−α)} exp(i(θ₀ + b/((4−α)a) log|t−t₀|))`.
pub fn zeta(m: &SelfSimilarMotion, t: f64) -> Result<Complex64, SelfSimilarError> {
    let dt = m.elapsed(t)?;
    let e = 4.0 - m.alpha;
    let modulus = (e * m.a_rate.abs() * dt).powf(1.0 / e);
    let phase = m.theta0 + m.b_rate / (e * m.a_rate) * dt.ln();
    Ok(Complex64::from_polar(modulus, phase))
}

/// `dZ/dt = (a + ib) Z |Z|^{α−4}`.
pub fn zeta_dot(m: &SelfSimilarMotion, t: f64) -> Result<Complex64, SelfSimilarError> {
    let z = zeta(m, t)?;
    Ok(Complex64::new(m.a_rate, m.b_rate) * z * z.norm().powf(m.alpha - 4.0))
}
