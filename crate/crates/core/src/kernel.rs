//! Point-vortex interaction kernel of the generalized SQG family.
//!
//! The conjugate velocity of vortex `j` is
//! `i c_α Σ_{k≠j} ξ_k |z_j − z_k|^{α−2} / (z_j − z_k)`.

use num_complex::Complex64;
use statrs::function::gamma::gamma;
use std::f64::consts::PI;
use thiserror::Error;

/// Half-width of the excluded band around the Euler exponent α = 2.
pub const ALPHA_GUARD: f64 = 1e-3;
/// Singularity guard relative to the configuration diameter.
pub const DMIN_REL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KernelError {
    #[error("alpha = {0} is outside (0, 3) or within {ALPHA_GUARD} of 2")]
    AlphaDomain(f64),
    #[error("vortices {0} and {1} are closer than the singularity guard")]
    Singular(usize, usize),
    #[error("intensity of vortex {0} is zero")]
    ZeroIntensity(usize),
    #[error("{0} positions but {1} intensities")]
    LengthMismatch(usize, usize),
    #[error("index {0} out of range for {1} vortices")]
    Index(usize, usize),
    #[error("non-finite entry in state")]
    NonFinite,
    #[error("operation needs exactly three vortices, got {0}")]
    NotATriple(usize),
}

/// Positions, intensities and exponent of an N-vortex system at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct VortexState {
    pub t: f64,
    pub z: Vec<Complex64>,
    pub xi: Vec<f64>,
    pub alpha: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConservedQuantities {
    pub c: Complex64,
    pub h: f64,
    pub lmom: f64,
}

pub fn check_alpha(alpha: f64) -> Result<(), KernelError> {
    if !(alpha > 0.0 && alpha < 3.0) || (alpha - 2.0).abs() <= ALPHA_GUARD {
        return Err(KernelError::AlphaDomain(alpha));
    }
    Ok(())
}

/// `c_α = −(2^α Γ(α/2)² sin(απ/2))⁻¹`.
pub fn coupling_constant(alpha: f64) -> Result<f64, KernelError> {
    check_alpha(alpha)?;
    let g = gamma(alpha / 2.0);
    Ok(-1.0 / (2f64.powf(alpha) * g * g * (alpha * PI / 2.0).sin()))
}

/// Contribution `i c |d|^{α−2} / d` of a unit-intensity partner at offset `d`.
#[inline]
pub fn pair_term(c_alpha: f64, alpha: f64, d: Complex64) -> Complex64 {
    let r2 = d.norm_sqr();
    // |d|^{α−2}/d = conj(d) |d|^{α−4}
    Complex64::new(0.0, c_alpha) * d.conj() * r2.powf(0.5 * alpha - 2.0)
}

pub fn diameter(z: &[Complex64]) -> f64 {
    let mut d: f64 = 0.0;
    for j in 0..z.len() {
        for k in j + 1..z.len() {
            d = d.max((z[j] - z[k]).norm());
        }
    }
    d
}

pub fn min_distance(z: &[Complex64]) -> f64 {
    let mut d = f64::INFINITY;
    for j in 0..z.len() {
        for k in j + 1..z.len() {
            d = d.min((z[j] - z[k]).norm());
        }
    }
    d
}

impl VortexState {
    pub fn new(t: f64, z: Vec<Complex64>, xi: Vec<f64>, alpha: f64) -> Result<Self, KernelError> {
        let s = VortexState { t, z, xi, alpha };
        s.validate()?;
        Ok(s)
    }

    pub fn len(&self) -> usize {
        self.z.len()
    }

    pub fn is_empty(&self) -> bool {
        self.z.is_empty()
    }

    pub fn validate(&self) -> Result<(), KernelError> {
        check_alpha(self.alpha)?;
        if self.z.len() != self.xi.len() {
            return Err(KernelError::LengthMismatch(self.z.len(), self.xi.len()));
        }
        if !self.t.is_finite() || self.z.iter().any(|w| !w.re.is_finite() || !w.im.is_finite()) {
            return Err(KernelError::NonFinite);
        }
        if let Some(j) = self.xi.iter().position(|&x| x == 0.0 || !x.is_finite()) {
            return Err(KernelError::ZeroIntensity(j));
        }
        self.check_separation()
    }

    /// Fails when two vortices are closer than `DMIN_REL` times the diameter.
    pub fn check_separation(&self) -> Result<(), KernelError> {
        let guard = DMIN_REL * diameter(&self.z);
        for j in 0..self.z.len() {
            for k in j + 1..self.z.len() {
                if (self.z[j] - self.z[k]).norm() <= guard {
                    return Err(KernelError::Singular(j, k));
                }
            }
        }
        Ok(())
    }

    pub fn time_reversed(&self) -> VortexState {
        VortexState {
            t: -self.t,
            z: self.z.clone(),
            xi: self.xi.iter().map(|x| -x).collect(),
            alpha: self.alpha,
        }
    }
}

/// `dz_j/dt` for vortex `j` (zero-based).
pub fn velocity(state: &VortexState, j: usize) -> Result<Complex64, KernelError> {
    if j >= state.len() {
        return Err(KernelError::Index(j, state.len()));
    }
    let c = coupling_constant(state.alpha)?;
    state.check_separation()?;
    let mut v = Complex64::new(0.0, 0.0);
    for k in 0..state.len() {
        if k != j {
            v += state.xi[k] * pair_term(c, state.alpha, state.z[j] - state.z[k]);
        }
    }
    Ok(v.conj())
}

pub fn rhs(state: &VortexState) -> Result<Vec<Complex64>, KernelError> {
    let c = coupling_constant(state.alpha)?;
    state.check_separation()?;
    let mut out = vec![Complex64::new(0.0, 0.0); state.len()];
    rhs_into(c, state.alpha, &state.z, &state.xi, &mut out);
    Ok(out)
}

/// Unchecked velocity evaluation used inside the integrator loop.
pub fn rhs_into(c_alpha: f64, alpha: f64, z: &[Complex64], xi: &[f64], out: &mut [Complex64]) {
    for o in out.iter_mut() {
        *o = Complex64::new(0.0, 0.0);
    }
    for j in 0..z.len() {
        for k in j + 1..z.len() {
            let p = pair_term(c_alpha, alpha, z[j] - z[k]);
            // the pair term is odd in the offset
            out[j] += xi[k] * p;
            out[k] -= xi[j] * p;
        }
    }
    for o in out.iter_mut() {
        *o = o.conj();
    }
}

pub fn conserved(state: &VortexState) -> Result<ConservedQuantities, KernelError> {
    let c_alpha = coupling_constant(state.alpha)?;
    Ok(conserved_unchecked(c_alpha, state.alpha, &state.z, &state.xi))
}

pub(crate) fn conserved_unchecked(
    c_alpha: f64,
    alpha: f64,
    z: &[Complex64],
    xi: &[f64],
) -> ConservedQuantities {
    let mut c = Complex64::new(0.0, 0.0);
    let mut h = 0.0;
    let mut l = 0.0;
    for j in 0..z.len() {
        c += xi[j] * z[j];
        for k in j + 1..z.len() {
            let r2 = (z[j] - z[k]).norm_sqr();
            let w = 2.0 * xi[j] * xi[k];
            h += w * r2.powf(0.5 * alpha - 1.0);
            l += w * r2;
        }
    }
    ConservedQuantities {
        c,
        h: h / c_alpha,
        lmom: l,
    }
}

/// Signed area of the triangle, positive for counter-clockwise vertices.
pub fn signed_area(z1: Complex64, z2: Complex64, z3: Complex64) -> f64 {
    0.5 * ((z2 - z1).conj() * (z3 - z1)).im
}

/// `d|z_p − z_q|²/dt` for a three-vortex state, from the closed-form
/// relative-motion identity `−4 c_α A ξ_r (|w_{r,q'}|^{α−4} − |w_{r,p'}|^{α−4})`
/// where `r` is the third vortex, `(r, p', q')` is cyclic and `A` is the
/// signed area of `(z_r, z_p', z_q')`. `pair` is zero-based and unordered.
pub fn relative_motion_rate(state: &VortexState, pair: (usize, usize)) -> Result<f64, KernelError> {
    if state.len() != 3 {
        return Err(KernelError::NotATriple(state.len()));
    }
    let (p, q) = pair;
    if p > 2 || q > 2 || p == q {
        return Err(KernelError::Index(p.max(q), 3));
    }
    let c = coupling_constant(state.alpha)?;
    state.check_separation()?;
    let r = 3 - p - q;
    let (p1, q1) = ((r + 1) % 3, (r + 2) % 3);
    let z = &state.z;
    let area = signed_area(z[r], z[p1], z[q1]);
    let e = state.alpha - 4.0;
    let far = (z[r] - z[q1]).norm().powf(e);
    let near = (z[r] - z[p1]).norm().powf(e);
    Ok(-4.0 * c * area * state.xi[r] * (far - near))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn coupling_closed_form_and_oracle() {
        assert!((coupling_constant(1.0).unwrap() + 1.0 / (2.0 * PI)).abs() < 1e-15);
        // high-precision gamma values
        let refs = [
            (0.5, -0.07607427986246773),
            (1.5, -0.33296793550170023),
            (2.5, 0.3042971194498709),
        ];
        for (a, v) in refs {
            let got = coupling_constant(a).unwrap();
            assert!((got - v).abs() < 1e-13 * v.abs(), "{a}: {got} vs {v}");
        }
        assert!(coupling_constant(1.5).unwrap() < 0.0);
        assert!(coupling_constant(2.5).unwrap() > 0.0);
    }

    #[test]
    fn coupling_rejects_guard_band() {
        for a in [0.0, 3.0, 2.0, 2.0005, 1.9995, -1.0, f64::NAN] {
            assert!(coupling_constant(a).is_err(), "{a}");
        }
    }

    #[test]
    fn two_vortex_velocity() {
        let s = VortexState::new(0.0, vec![c(0.5, 0.0), c(-0.5, 0.0)], vec![1.0, 1.0], 1.0).unwrap();
        let v = velocity(&s, 0).unwrap();
        // conj(i c_1) = i/(2π)
        assert!((v - c(0.0, 1.0 / (2.0 * PI))).norm() < 1e-15);
        let r = rhs(&s).unwrap();
        assert!((r[0] + r[1]).norm() < 1e-15);
        assert!((r[0].re * 0.5).abs() < 1e-15);
    }

    #[test]
    fn single_vortex_is_still() {
        let s = VortexState::new(0.0, vec![c(0.3, 0.1)], vec![2.0], 1.3).unwrap();
        assert_eq!(velocity(&s, 0).unwrap(), c(0.0, 0.0));
    }

    #[test]
    fn opposite_pair_translates() {
        let s = VortexState::new(0.0, vec![c(0.5, 0.0), c(-0.5, 0.0)], vec![1.0, -1.0], 1.0).unwrap();
        let r = rhs(&s).unwrap();
        assert!((r[0] - r[1]).norm() < 1e-15);
        assert!(r[0].norm() > 0.1);
    }

    #[test]
    fn conserved_pair() {
        let s = VortexState::new(0.0, vec![c(0.5, 0.0), c(-0.5, 0.0)], vec![1.0, 1.0], 1.0).unwrap();
        let q = conserved(&s).unwrap();
        assert!(q.c.norm() < 1e-15);
        assert!((q.lmom - 2.0).abs() < 1e-15);
    }

    #[test]
    fn signed_area_orientation() {
        assert_eq!(signed_area(c(0.0, 0.0), c(1.0, 0.0), c(0.0, 1.0)), 0.5);
        assert_eq!(signed_area(c(0.0, 0.0), c(0.0, 1.0), c(1.0, 0.0)), -0.5);
        assert_eq!(signed_area(c(0.0, 0.0), c(1.0, 0.0), c(2.0, 0.0)), 0.0);
    }

    #[test]
    fn rejects_coincident_and_zero() {
        assert!(VortexState::new(0.0, vec![c(0.0, 0.0), c(0.0, 0.0)], vec![1.0, 1.0], 1.0).is_err());
        assert!(VortexState::new(0.0, vec![c(0.0, 0.0), c(1.0, 0.0)], vec![1.0, 0.0], 1.0).is_err());
        assert!(VortexState::new(0.0, vec![c(0.0, 0.0)], vec![1.0, 1.0], 1.0).is_err());
    }

    #[test]
    fn relative_rate_vanishes_on_symmetric_shapes() {
        let w = Complex64::from_polar(1.0, 2.0 * PI / 3.0);
        let s = VortexState::new(0.0, vec![c(1.0, 0.0), w, w * w], vec![1.0, 2.0, -0.7], 1.0).unwrap();
        for pair in [(1, 2), (0, 2), (0, 1)] {
            assert!(relative_motion_rate(&s, pair).unwrap().abs() < 1e-14);
        }
        let s = VortexState::new(0.0, vec![c(0.0, 0.0), c(1.0, 0.0), c(2.5, 0.0)], vec![1.0, 2.0, -0.7], 1.0)
            .unwrap();
        assert_eq!(relative_motion_rate(&s, (1, 2)).unwrap(), 0.0);
    }
}
