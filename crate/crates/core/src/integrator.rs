//! Adaptive Dormand–Prince 5(4) integration of the vortex equations.
//!
//! Step control is the proportional-integral scheme of Hairer, Nørsett and
//! Wanner, and dense output uses the usual 4th-order continuous extension.
//! Runs toward a collapse use a Sundman time transformation so that the
//! self-similar solution becomes an exponential in the new variable.

use crate::kernel::{self, conserved_unchecked, min_distance, KernelError, VortexState};
use num_complex::Complex64;
use std::fmt::Write as _;
use thiserror::Error;

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

const SAFE: f64 = 0.9;
const BETA: f64 = 0.04;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 10.0;

/// Collapse runs stop once the closest pair has shrunk by this factor.
pub const COLLAPSE_STOP_RATIO: f64 = 1e-2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IntegratorError {
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error("invalid integrator configuration: {0}")]
    Config(String),
    #[error("end time equals start time")]
    EmptyInterval,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_steps: usize,
    /// Absolute collapse threshold on the closest pair. Zero selects the
    /// kernel guard relative to the initial diameter.
    pub dmin: f64,
    /// Disables step control and takes uniform steps of this size.
    pub fixed_step: Option<f64>,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig {
            rel_tol: 1e-10,
            abs_tol: 1e-13,
            max_steps: 2_000_000,
            dmin: 0.0,
            fixed_step: None,
        }
    }
}

impl IntegratorConfig {
    pub fn with_rel_tol(rel_tol: f64) -> Self {
        IntegratorConfig {
            rel_tol,
            abs_tol: rel_tol * 1e-3,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<(), IntegratorError> {
        let ok = |v: f64| v > 0.0 && v <= 1e-2;
        if !ok(self.rel_tol) || !ok(self.abs_tol) {
            return Err(IntegratorError::Config(format!(
                "tolerances must lie in (0, 1e-2], got rel {} abs {}",
                self.rel_tol, self.abs_tol
            )));
        }
        if self.max_steps == 0 {
            return Err(IntegratorError::Config("max_steps must be at least 1".into()));
        }
        if self.dmin < 0.0 || !self.dmin.is_finite() {
            return Err(IntegratorError::Config("dmin must be finite and non-negative".into()));
        }
        if let Some(h) = self.fixed_step {
            if !(h > 0.0 && h.is_finite()) {
                return Err(IntegratorError::Config("fixed_step must be positive".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TrajectoryStatus {
    Completed,
    CollapseDetected(f64),
    /// Step size underflow or step budget exhausted at the given time.
    StepFailure(f64),
}

/// One accepted step's continuous extension.
#[derive(Debug, Clone)]
struct DenseSegment {
    t_old: f64,
    h: f64,
    rc: [Vec<f64>; 5],
}

impl DenseSegment {
    fn eval(&self, t: f64, out: &mut [f64]) {
        let s = (t - self.t_old) / self.h;
        let s1 = 1.0 - s;
        let [r1, r2, r3, r4, r5] = &self.rc;
        for i in 0..out.len() {
            out[i] = r1[i] + s * (r2[i] + s1 * (r3[i] + s * (r4[i] + s1 * r5[i])));
        }
    }
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub samples: Vec<VortexState>,
    pub status: TrajectoryStatus,
    /// Sum over accepted steps of the largest absolute local error estimate.
    pub error_estimate: f64,
    dense: Vec<DenseSegment>,
}

impl Trajectory {
    pub fn last(&self) -> &VortexState {
        self.samples.last().expect("trajectory holds its initial sample")
    }

    pub fn t_start(&self) -> f64 {
        self.samples[0].t
    }

    pub fn t_end(&self) -> f64 {
        self.last().t
    }

    /// Positions at time `t` from the dense output, `None` outside the run.
    pub fn positions_at(&self, t: f64) -> Option<Vec<Complex64>> {
        if self.dense.is_empty() {
            return None;
        }
        let forward = self.t_end() >= self.t_start();
        let (lo, hi) = if forward {
            (self.t_start(), self.t_end())
        } else {
            (self.t_end(), self.t_start())
        };
        if t < lo || t > hi {
            return None;
        }
        let idx = self
            .dense
            .partition_point(|seg| if forward { seg.t_old + seg.h < t } else { seg.t_old + seg.h > t });
        let seg = &self.dense[idx.min(self.dense.len() - 1)];
        let mut y = vec![0.0; seg.rc[0].len()];
        seg.eval(t, &mut y);
        Some(unpack(&y))
    }

    /// CSV with columns `t, re_z1, im_z1, …, H, L, C_re, C_im`.
    pub fn to_csv(&self) -> Result<String, KernelError> {
        let n = self.samples[0].len();
        let mut out = String::from("t");
        for j in 1..=n {
            let _ = write!(out, ",re_z{j},im_z{j}");
        }
        out.push_str(",H,L,C_re,C_im\n");
        for s in &self.samples {
            let q = kernel::conserved(s)?;
            let _ = write!(out, "{:.16e}", s.t);
            for w in &s.z {
                let _ = write!(out, ",{:.16e},{:.16e}", w.re, w.im);
            }
            let _ = writeln!(out, ",{:.16e},{:.16e},{:.16e},{:.16e}", q.h, q.lmom, q.c.re, q.c.im);
        }
        Ok(out)
    }
}

fn pack(z: &[Complex64]) -> Vec<f64> {
    z.iter().flat_map(|w| [w.re, w.im]).collect()
}

fn unpack(y: &[f64]) -> Vec<Complex64> {
    y.chunks_exact(2).map(|p| Complex64::new(p[0], p[1])).collect()
}

fn unpack_into(y: &[f64], z: &mut [Complex64]) {
    for (w, p) in z.iter_mut().zip(y.chunks_exact(2)) {
        *w = Complex64::new(p[0], p[1]);
    }
}

enum Flow {
    Continue,
    Stop,
}

enum RunEnd {
    Reached,
    Stopped,
    Underflow(f64),
    Budget(f64),
}

/// Accepted-step record handed to the observer.
struct Step<'a> {
    t_old: f64,
    t: f64,
    y: &'a [f64],
    err: f64,
    seg: &'a DenseSegment,
}

/// Dormand–Prince driver over a real state vector. `f` returns `false`
/// when the right-hand side cannot be evaluated, which rejects the step.
fn dopri<F, O>(mut f: F, t0: f64, y0: &[f64], t1: f64, cfg: &IntegratorConfig, mut observe: O) -> RunEnd
where
    F: FnMut(f64, &[f64], &mut [f64]) -> bool,
    O: FnMut(&Step) -> Flow,
{
    let n = y0.len();
    let dir = (t1 - t0).signum();
    let mut k: [Vec<f64>; 7] = std::array::from_fn(|_| vec![0.0; n]);
    let mut y = y0.to_vec();
    let mut ytmp = vec![0.0; n];
    let mut ynew = vec![0.0; n];
    let mut t = t0;
    if !f(t, &y, &mut k[0]) {
        return RunEnd::Underflow(t);
    }
    let sc = |a: f64, b: f64| cfg.abs_tol + cfg.rel_tol * a.abs().max(b.abs());

    let mut h = match cfg.fixed_step {
        Some(hf) => hf.min((t1 - t0).abs()),
        None => initial_step(&mut f, t0, &y, &k[0], t1, cfg),
    };
    let mut facold: f64 = 1e-4;
    let mut reject = false;
    let mut steps = 0usize;

    loop {
        if steps >= cfg.max_steps {
            return RunEnd::Budget(t);
        }
        let remaining = (t1 - t) * dir;
        if remaining <= 0.0 {
            return RunEnd::Reached;
        }
        // absorb a roundoff-sized remainder into this step
        let last = h * (1.0 + 1e-9) >= remaining;
        if last {
            h = remaining;
        }
        if h <= 16.0 * f64::EPSILON * t.abs().max(1e-300) {
            return RunEnd::Underflow(t);
        }
        let hs = h * dir;
        steps += 1;

        let mut ok = true;
        let mut kk = std::mem::take(&mut k);
        macro_rules! go {
            ($idx:expr, $tt:expr, $($ki:expr => $aij:expr),+) => {{
                let mut dst = std::mem::take(&mut kk[$idx]);
                for i in 0..n {
                    ytmp[i] = y[i] + hs * (0.0 $(+ $aij * kk[$ki][i])+);
                }
                let r = f($tt, &ytmp, &mut dst);
                kk[$idx] = dst;
                r
            }};
        }
        ok &= go!(1, t + C2 * hs, 0 => A21);
        ok = ok && go!(2, t + C3 * hs, 0 => A31, 1 => A32);
        ok = ok && go!(3, t + C4 * hs, 0 => A41, 1 => A42, 2 => A43);
        ok = ok && go!(4, t + C5 * hs, 0 => A51, 1 => A52, 2 => A53, 3 => A54);
        ok = ok && go!(5, t + hs, 0 => A61, 1 => A62, 2 => A63, 3 => A64, 4 => A65);
        if ok {
            for i in 0..n {
                ynew[i] = y[i]
                    + hs * (A71 * kk[0][i] + A73 * kk[2][i] + A74 * kk[3][i] + A75 * kk[4][i] + A76 * kk[5][i]);
            }
            let mut dst = std::mem::take(&mut kk[6]);
            ok = f(t + hs, &ynew, &mut dst);
            kk[6] = dst;
        }
        k = kk;

        if !ok {
            if cfg.fixed_step.is_some() {
                return RunEnd::Underflow(t);
            }
            h *= 0.25;
            reject = true;
            continue;
        }

        let mut err = 0.0;
        let mut emax: f64 = 0.0;
        for i in 0..n {
            let e = hs
                * (E1 * k[0][i] + E3 * k[2][i] + E4 * k[3][i] + E5 * k[4][i] + E6 * k[5][i] + E7 * k[6][i]);
            emax = emax.max(e.abs());
            let s = e / sc(y[i], ynew[i]);
            err += s * s;
        }
        let err = (err / n as f64).sqrt();
        if !err.is_finite() {
            h *= 0.25;
            reject = true;
            continue;
        }

        let accept = cfg.fixed_step.is_some() || err <= 1.0;
        let fac11 = err.powf(0.2 - BETA * 0.75);
        if accept {
            let ydiff: Vec<f64> = (0..n).map(|i| ynew[i] - y[i]).collect();
            let bspl: Vec<f64> = (0..n).map(|i| hs * k[0][i] - ydiff[i]).collect();
            let rc4: Vec<f64> = (0..n).map(|i| ydiff[i] - hs * k[6][i] - bspl[i]).collect();
            let rc5: Vec<f64> = (0..n)
                .map(|i| {
                    hs * (D1 * k[0][i] + D3 * k[2][i] + D4 * k[3][i] + D5 * k[4][i] + D6 * k[5][i] + D7 * k[6][i])
                })
                .collect();
            let seg = DenseSegment {
                t_old: t,
                h: hs,
                rc: [y.clone(), ydiff, bspl, rc4, rc5],
            };
            let t_new = if last { t1 } else { t + hs };
            let flow = observe(&Step {
                t_old: t,
                t: t_new,
                y: &ynew,
                err: emax,
                seg: &seg,
            });
            t = t_new;
            std::mem::swap(&mut y, &mut ynew);
            let (k0, k6) = {
                let (a, b) = k.split_at_mut(6);
                (&mut a[0], &mut b[0])
            };
            std::mem::swap(k0, k6);
            if let Flow::Stop = flow {
                return RunEnd::Stopped;
            }
            if last {
                return RunEnd::Reached;
            }
            if let Some(hf) = cfg.fixed_step {
                h = hf;
                continue;
            }
            let fac = (fac11 / facold.powf(BETA) / SAFE).clamp(1.0 / FAC_MAX, 1.0 / FAC_MIN);
            facold = err.max(1e-4);
            let mut hnew = h / fac;
            if reject {
                hnew = hnew.min(h);
            }
            reject = false;
            h = hnew;
        } else {
            h /= (fac11 / SAFE).min(1.0 / FAC_MIN);
            reject = true;
        }
    }
}

fn initial_step<F>(f: &mut F, t0: f64, y0: &[f64], f0: &[f64], t1: f64, cfg: &IntegratorConfig) -> f64
where
    F: FnMut(f64, &[f64], &mut [f64]) -> bool,
{
    let n = y0.len();
    let dir = (t1 - t0).signum();
    let span = (t1 - t0).abs();
    let mut dnf = 0.0;
    let mut dny = 0.0;
    for i in 0..n {
        let sk = cfg.abs_tol + cfg.rel_tol * y0[i].abs();
        dnf += (f0[i] / sk).powi(2);
        dny += (y0[i] / sk).powi(2);
    }
    let mut h = if dnf <= 1e-10 || dny <= 1e-10 {
        1e-6
    } else {
        (dny / dnf).sqrt() * 0.01
    };
    h = h.min(span);
    let y1: Vec<f64> = (0..n).map(|i| y0[i] + dir * h * f0[i]).collect();
    let mut f1 = vec![0.0; n];
    if !f(t0 + dir * h, &y1, &mut f1) {
        return (h * 1e-3).min(span);
    }
    let mut der2 = 0.0;
    for i in 0..n {
        let sk = cfg.abs_tol + cfg.rel_tol * y0[i].abs();
        der2 += ((f1[i] - f0[i]) / sk).powi(2);
    }
    let der2 = der2.sqrt() / h;
    let der12 = der2.max(dnf.sqrt());
    let h1 = if der12 <= 1e-15 {
        (h * 1e-3).max(1e-6)
    } else {
        (0.01 / der12).powf(0.2)
    };
    (100.0 * h).min(h1).min(span)
}

fn resolve_dmin(cfg: &IntegratorConfig, z: &[Complex64]) -> f64 {
    if cfg.dmin > 0.0 {
        cfg.dmin
    } else {
        kernel::DMIN_REL * kernel::diameter(z)
    }
}

/// Integrates `state0` to time `t1` (either direction).
pub fn integrate(state0: &VortexState, t1: f64, cfg: &IntegratorConfig) -> Result<Trajectory, IntegratorError> {
    cfg.validate()?;
    state0.validate()?;
    if t1 == state0.t || !t1.is_finite() {
        return Err(IntegratorError::EmptyInterval);
    }
    let c = kernel::coupling_constant(state0.alpha)?;
    let alpha = state0.alpha;
    let xi = state0.xi.clone();
    let dmin = resolve_dmin(cfg, &state0.z);
    let guard = kernel::DMIN_REL * kernel::diameter(&state0.z);
    let n = state0.len();
    let mut zbuf = vec![Complex64::new(0.0, 0.0); n];
    let mut vbuf = vec![Complex64::new(0.0, 0.0); n];
    let rhs = |_t: f64, y: &[f64], dy: &mut [f64]| {
        unpack_into(y, &mut zbuf);
        if min_distance(&zbuf) <= guard {
            return false;
        }
        kernel::rhs_into(c, alpha, &zbuf, &xi, &mut vbuf);
        for (j, v) in vbuf.iter().enumerate() {
            dy[2 * j] = v.re;
            dy[2 * j + 1] = v.im;
        }
        dy.iter().all(|v| v.is_finite())
    };
    let mut samples = vec![state0.clone()];
    let mut dense = Vec::new();
    let mut collapse = None;
    let mut err_sum = 0.0;
    let end = dopri(rhs, state0.t, &pack(&state0.z), t1, cfg, |st| {
        let z = unpack(st.y);
        dense.push(st.seg.clone());
        err_sum += st.err;
        let d = min_distance(&z);
        samples.push(VortexState {
            t: st.t,
            z,
            xi: xi.clone(),
            alpha,
        });
        if d < dmin {
            collapse = Some(st.t);
            return Flow::Stop;
        }
        Flow::Continue
    });
    let status = match end {
        RunEnd::Reached => TrajectoryStatus::Completed,
        RunEnd::Stopped => TrajectoryStatus::CollapseDetected(collapse.unwrap_or(f64::NAN)),
        RunEnd::Underflow(t) | RunEnd::Budget(t) => TrajectoryStatus::StepFailure(t),
    };
    Ok(Trajectory {
        samples,
        status,
        error_estimate: err_sum,
        dense,
    })
}

/// Result of a collapse run.
#[derive(Debug, Clone)]
pub struct CollapseRun {
    pub trajectory: Trajectory,
    /// Extrapolated singular time, present when a collapse was detected.
    pub t_star: Option<f64>,
    /// Fitted exponent of the closest-pair distance against `t* − t`.
    pub exponent: Option<f64>,
}

/// Smooth distance scale `(Σ_{j<k} |z_j − z_k|^{−2})^{−1/2}`.
fn harmonic_distance(z: &[Complex64]) -> f64 {
    let mut s = 0.0;
    for j in 0..z.len() {
        for k in j + 1..z.len() {
            s += 1.0 / (z[j] - z[k]).norm_sqr();
        }
    }
    1.0 / s.sqrt()
}

/// Integrates forward in time toward a collapse, at most `horizon` time
/// units. Time is reparametrized by `dt/dτ = D(z)^{4−α}` with `D` a smooth
/// closest-pair scale. The run stops once the closest pair is below
/// `max(cfg.dmin, COLLAPSE_STOP_RATIO · d₀)` and the singular time is then
/// fitted from the final decade of closest-pair distances.
pub fn integrate_collapse(
    state0: &VortexState,
    horizon: f64,
    cfg: &IntegratorConfig,
) -> Result<CollapseRun, IntegratorError> {
    cfg.validate()?;
    state0.validate()?;
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(IntegratorError::EmptyInterval);
    }
    let c = kernel::coupling_constant(state0.alpha)?;
    let alpha = state0.alpha;
    let xi = state0.xi.clone();
    let n = state0.len();
    let d0 = min_distance(&state0.z);
    let stop = cfg.dmin.max(COLLAPSE_STOP_RATIO * d0);
    let t_end = state0.t + horizon;
    let guard = kernel::DMIN_REL * kernel::diameter(&state0.z);
    let mut zbuf = vec![Complex64::new(0.0, 0.0); n];
    let mut vbuf = vec![Complex64::new(0.0, 0.0); n];
    let rhs = |_tau: f64, y: &[f64], dy: &mut [f64]| {
        unpack_into(&y[..2 * n], &mut zbuf);
        if min_distance(&zbuf) <= guard {
            return false;
        }
        let g = harmonic_distance(&zbuf).powf(4.0 - alpha);
        kernel::rhs_into(c, alpha, &zbuf, &xi, &mut vbuf);
        for (j, v) in vbuf.iter().enumerate() {
            dy[2 * j] = g * v.re;
            dy[2 * j + 1] = g * v.im;
        }
        dy[2 * n] = g;
        dy.iter().all(|v| v.is_finite())
    };
    let mut y0 = pack(&state0.z);
    y0.push(state0.t);
    let mut samples = vec![state0.clone()];
    let mut segs: Vec<DenseSegment> = Vec::new();
    let mut collapsed = false;
    let mut reached = false;
    let mut err_sum = 0.0;
    let mut eval = vec![0.0; 2 * n + 1];
    let end = dopri(rhs, 0.0, &y0, f64::INFINITY, cfg, |st| {
        err_sum += st.err;
        let z = unpack(&st.y[..2 * n]);
        let t = st.y[2 * n];
        if t >= t_end {
            // locate the horizon inside this step by bisection on τ
            let (mut lo, mut hi) = (st.t_old, st.t);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                st.seg.eval(mid, &mut eval);
                if eval[2 * n] < t_end {
                    lo = mid;
                } else {
                    hi = mid;
                }
                if hi - lo <= f64::EPSILON * hi.abs() {
                    break;
                }
            }
            st.seg.eval(hi, &mut eval);
            samples.push(VortexState {
                t: t_end,
                z: unpack(&eval[..2 * n]),
                xi: xi.clone(),
                alpha,
            });
            reached = true;
            return Flow::Stop;
        }
        segs.push(st.seg.clone());
        let d = min_distance(&z);
        samples.push(VortexState {
            t,
            z,
            xi: xi.clone(),
            alpha,
        });
        if d < stop {
            collapsed = true;
            return Flow::Stop;
        }
        Flow::Continue
    });
    let status = match end {
        RunEnd::Stopped if reached => TrajectoryStatus::Completed,
        RunEnd::Stopped if collapsed => TrajectoryStatus::CollapseDetected(samples.last().map(|s| s.t).unwrap()),
        RunEnd::Reached | RunEnd::Stopped => TrajectoryStatus::Completed,
        RunEnd::Underflow(_) | RunEnd::Budget(_) => {
            TrajectoryStatus::StepFailure(samples.last().map(|s| s.t).unwrap_or(state0.t))
        }
    };
    let (t_star, exponent) = if collapsed {
        match fit_collapse(&segs, n, stop) {
            Some((ts, p)) => (Some(ts), Some(p)),
            None => (None, None),
        }
    } else {
        (None, None)
    };
    Ok(CollapseRun {
        trajectory: Trajectory {
            samples,
            status,
            error_estimate: err_sum,
            dense: Vec::new(),
        },
        t_star,
        exponent,
    })
}

/// Samples the final decade of closest-pair distances and fits
/// `log d = c + p log(t* − t)` jointly in `t*` and `p`.
fn fit_collapse(segs: &[DenseSegment], n: usize, stop: f64) -> Option<(f64, f64)> {
    let tau_end = segs.last().map(|s| s.t_old + s.h)?;
    let mut y = vec![0.0; 2 * n + 1];
    let mut dist_at = |tau: f64| -> (f64, f64) {
        let i = segs.partition_point(|s| s.t_old + s.h < tau).min(segs.len() - 1);
        segs[i].eval(tau, &mut y);
        (y[2 * n], min_distance(&unpack(&y[..2 * n])))
    };
    // earliest τ whose distance is within a decade of the stop value
    let first_in = segs.iter().position(|s| {
        let (_, d) = dist_at(s.t_old + s.h);
        d <= 10.0 * stop
    })?;
    let (mut lo, mut hi) = (segs[first_in].t_old, segs[first_in].t_old + segs[first_in].h);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if dist_at(mid).1 > 10.0 * stop {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let tau_start = hi;
    const M: usize = 400;
    let pts: Vec<(f64, f64)> = (0..=M)
        .map(|i| dist_at(tau_start + (tau_end - tau_start) * i as f64 / M as f64))
        .collect();
    let t_last = pts.last()?.0;
    let span = t_last - pts[0].0;
    if !(span > 0.0) {
        return None;
    }
    let rss = |delta: f64| -> (f64, f64) {
        let ts = t_last + delta;
        let xs: Vec<f64> = pts.iter().map(|p| (ts - p.0).ln()).collect();
        let ys: Vec<f64> = pts.iter().map(|p| p.1.ln()).collect();
        let (slope, _, r) = linear_fit(&xs, &ys);
        (r, slope)
    };
    let (mut a, mut b) = ((span * 1e-8).ln(), (span * 1e2).ln());
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = b - g * (b - a);
    let mut x2 = a + g * (b - a);
    let mut f1 = rss(x1.exp()).0;
    let mut f2 = rss(x2.exp()).0;
    for _ in 0..200 {
        if f1 < f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - g * (b - a);
            f1 = rss(x1.exp()).0;
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + g * (b - a);
            f2 = rss(x2.exp()).0;
        }
        if b - a < 1e-12 {
            break;
        }
    }
    let delta = (0.5 * (a + b)).exp();
    let (_, p) = rss(delta);
    Some((t_last + delta, p))
}

/// Ordinary least squares `y ≈ slope·x + intercept`; returns the residual
/// sum of squares as the third element.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (a, b) in x.iter().zip(y) {
        sxx += (a - mx) * (a - mx);
        sxy += (a - mx) * (b - my);
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss = x
        .iter()
        .zip(y)
        .map(|(a, b)| (b - slope * a - intercept).powi(2))
        .sum();
    (slope, intercept, rss)
}

/// Maximum relative drift of `H`, `Lmom` and `|C|` along the samples.
/// Each is normalized by a scale that stays meaningful when the quantity
/// itself vanishes: `Σ|ξ_j ξ_k| |z_jk|^{α−2} / |c_α|`, `Σ|ξ_j ξ_k| |z_jk|²`
/// and `Σ|ξ_j| |z_j|` at the initial sample.
pub fn conservation_drift(traj: &Trajectory) -> Result<[f64; 3], KernelError> {
    let s0 = &traj.samples[0];
    let c = kernel::coupling_constant(s0.alpha)?;
    let q0 = conserved_unchecked(c, s0.alpha, &s0.z, &s0.xi);
    let abs_xi: Vec<f64> = s0.xi.iter().map(|v| v.abs()).collect();
    let scale = conserved_unchecked(c, s0.alpha, &s0.z, &abs_xi);
    let c_scale: f64 = s0.z.iter().zip(&abs_xi).map(|(w, x)| w.norm() * x).sum();
    let mut out = [0.0f64; 3];
    for s in &traj.samples {
        let q = conserved_unchecked(c, s.alpha, &s.z, &s.xi);
        out[0] = out[0].max((q.h - q0.h).abs() / scale.h.abs());
        out[1] = out[1].max((q.lmom - q0.lmom).abs() / scale.lmom.abs());
        out[2] = out[2].max((q.c - q0.c).norm() / c_scale);
    }
    Ok(out)
}
