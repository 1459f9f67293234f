//! Bursts of a self-similar triple among background vortices, and the
//! time-reversed collapses.
//!
//! A run seeds the triple on its exact self-similar profile at a small
//! start time `t_ini` and integrates the full system. Successive halvings
//! of `t_ini` form a Cauchy study whose gaps are numerical evidence for a
//! limiting solution that emanates from a single point. They are not a
//! proof of one.

use crate::integrator::{self, conservation_drift, linear_fit, IntegratorConfig, IntegratorError, Trajectory};
use crate::kernel::{self, KernelError, VortexState};
use crate::selfsimilar::{self, zeta, SelfSimilarError, SelfSimilarMotion, TripleConfig};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default separation between the burst site and background vortices.
pub const RHO_SEP: f64 = 0.5;
/// Points in the log-spaced grids used for fits and Cauchy gaps.
const GRID_POINTS: usize = 200;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BurstError {
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    SelfSimilar(#[from] SelfSimilarError),
    #[error(transparent)]
    Integrator(#[from] IntegratorError),
    #[error("triple spread {spread:e} at t_ini = {t_ini:e} exceeds half the separation {rho_sep}")]
    Separation { spread: f64, t_ini: f64, rho_sep: f64 },
    #[error("invalid scenario: {0}")]
    Scenario(String),
    #[error("run starting at t_ini = {t_ini:e} stopped early: {status}")]
    Incomplete { t_ini: f64, status: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BackgroundVortex {
    #[serde(with = "complex_pair")]
    pub position: Complex64,
    pub intensity: f64,
}

mod complex_pair {
    use num_complex::Complex64;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(z: &Complex64, s: S) -> Result<S::Ok, S::Error> {
        [z.re, z.im].serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Complex64, D::Error> {
        let [re, im] = <[f64; 2]>::deserialize(d)?;
        Ok(Complex64::new(re, im))
    }
}

/// On-disk scenario layout.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioFile {
    pub triple: TripleConfig,
    pub background: Vec<BackgroundVortex>,
    pub t_ini: Vec<f64>,
    pub horizon: f64,
    #[serde(default, with = "complex_pair_opt", skip_serializing_if = "Option::is_none")]
    pub burst_site: Option<Complex64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho_sep: Option<f64>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub reversed: bool,
}

mod complex_pair_opt {
    use num_complex::Complex64;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(z: &Option<Complex64>, s: S) -> Result<S::Ok, S::Error> {
        z.map(|z| [z.re, z.im]).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Complex64>, D::Error> {
        Ok(Option::<[f64; 2]>::deserialize(d)?.map(|[re, im]| Complex64::new(re, im)))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BurstScenario {
    /// Centered shape of the triple.
    pub triple: TripleConfig,
    pub motion: SelfSimilarMotion,
    pub background: Vec<BackgroundVortex>,
    pub burst_site: Complex64,
    pub t_ini: Vec<f64>,
    pub horizon: f64,
    pub rho_sep: f64,
    /// Collapse orientation: intensities negated and time running toward 0⁻.
    pub reversed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BurstDiagnostics {
    /// Log-log slope of the triple spread against `|t − t₀|` for the run
    /// with the smallest `t_ini`.
    pub exponent_fit: f64,
    /// Sup-distance between runs `m` and `m + 1` on a common time grid.
    pub cauchy_gaps: Vec<f64>,
    /// `max_k |y_k(T) − y_k(0)|`, largest over the runs.
    pub background_drift: f64,
    /// Start times of the runs, in order.
    pub t_ini: Vec<f64>,
    /// Exponent fit of each run.
    pub run_exponents: Vec<f64>,
    /// Largest relative drift of `H`, `Lmom`, `|C|` over all runs.
    pub conservation_drift: [f64; 3],
}

impl BurstScenario {
    /// Builds a burst scenario from a triple shape. The motion is taken with
    /// `t₀ = 0` and `θ₀ = 0`.
    pub fn new(
        triple: &TripleConfig,
        background: Vec<BackgroundVortex>,
        t_ini: Vec<f64>,
        horizon: f64,
    ) -> Result<Self, BurstError> {
        let cen = selfsimilar::center(triple)?;
        let rates = selfsimilar::selfsimilar_rate(&cen)?;
        if rates.residual > selfsimilar::SS_TOL {
            return Err(BurstError::Scenario(format!(
                "triple is not self-similar (ratio spread {:e})",
                rates.residual
            )));
        }
        if !(rates.a_rate > selfsimilar::RATE_TOL) {
            return Err(BurstError::Scenario(format!("triple rate a = {:e} is not a burst", rates.a_rate)));
        }
        let s = BurstScenario {
            triple: cen,
            motion: SelfSimilarMotion::from_rates(&rates, triple.alpha, 0.0, 0.0),
            background,
            burst_site: Complex64::new(0.0, 0.0),
            t_ini,
            horizon,
            rho_sep: RHO_SEP,
            reversed: false,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn from_file(f: &ScenarioFile) -> Result<Self, BurstError> {
        let mut s = BurstScenario::new(&f.triple, f.background.clone(), f.t_ini.clone(), f.horizon)?;
        if let Some(site) = f.burst_site {
            s.burst_site = site;
        }
        if let Some(r) = f.rho_sep {
            s.rho_sep = r;
        }
        s.validate()?;
        Ok(if f.reversed { collapse_scenario(&s) } else { s })
    }

    pub fn to_file(&self) -> ScenarioFile {
        ScenarioFile {
            triple: self.triple,
            background: self.background.clone(),
            t_ini: self.t_ini.clone(),
            horizon: self.horizon,
            burst_site: Some(self.burst_site),
            rho_sep: Some(self.rho_sep),
            reversed: self.reversed,
        }
    }

    pub fn validate(&self) -> Result<(), BurstError> {
        let bad = |m: String| Err(BurstError::Scenario(m));
        if !(self.rho_sep > 0.0) {
            return bad(format!("rho_sep must be positive, got {}", self.rho_sep));
        }
        if self.t_ini.is_empty() || self.t_ini.iter().any(|t| !(*t > 0.0)) {
            return bad("t_ini values must be positive".into());
        }
        if self.t_ini.windows(2).any(|w| w[1] > w[0]) {
            return bad("t_ini values must not increase".into());
        }
        if !(self.horizon > self.t_ini[0]) {
            return bad(format!("horizon {} must exceed every t_ini", self.horizon));
        }
        for (k, b) in self.background.iter().enumerate() {
            if b.intensity == 0.0 || !b.intensity.is_finite() {
                return bad(format!("background vortex {k} has zero intensity"));
            }
            if (b.position - self.burst_site).norm() < self.rho_sep {
                return bad(format!("background vortex {k} is closer than rho_sep to the burst site"));
            }
            for (l, c) in self.background.iter().enumerate().skip(k + 1) {
                if (b.position - c.position).norm() < self.rho_sep {
                    return bad(format!("background vortices {k} and {l} are closer than rho_sep"));
                }
            }
        }
        Ok(())
    }

    /// Intensity carried by the triple, the merged vortex at the singular time.
    pub fn merged_intensity(&self) -> f64 {
        self.triple.xi.iter().sum()
    }

    fn time_sign(&self) -> f64 {
        if self.reversed {
            -1.0
        } else {
            1.0
        }
    }
}

/// Negates every intensity and flips the time orientation.
pub fn collapse_scenario(s: &BurstScenario) -> BurstScenario {
    BurstScenario {
        triple: s.triple.negated(),
        motion: s.motion.time_reversed(),
        background: s
            .background
            .iter()
            .map(|b| BackgroundVortex {
                position: b.position,
                intensity: -b.intensity,
            })
            .collect(),
        reversed: !s.reversed,
        ..s.clone()
    }
}

fn triple_spread(z: &[Complex64]) -> f64 {
    kernel::diameter(&z[..3])
}

/// Full state at `t_ini`: the triple on its self-similar profile around the
/// burst site and the background at rest positions. For a reversed scenario
/// this is the mirror state at time `−t_ini`.
pub fn make_burst_initial(s: &BurstScenario, t_ini: f64) -> Result<VortexState, BurstError> {
    if !(t_ini > 0.0) {
        return Err(BurstError::Scenario(format!("t_ini must be positive, got {t_ini}")));
    }
    let t = s.time_sign() * t_ini;
    let zt = zeta(&s.motion, t)?;
    let mut z: Vec<Complex64> = s.triple.a.iter().map(|a| s.burst_site + a * zt).collect();
    let spread = triple_spread(&z);
    if spread > 0.5 * s.rho_sep {
        return Err(BurstError::Separation {
            spread,
            t_ini,
            rho_sep: s.rho_sep,
        });
    }
    let mut xi = s.triple.xi.to_vec();
    for b in &s.background {
        z.push(b.position);
        xi.push(b.intensity);
    }
    Ok(VortexState::new(t, z, xi, s.triple.alpha)?)
}

/// Horizon such that the fastest background vortex moves at most
/// `rho_sep / 10`, from velocities at the largest `t_ini`.
pub fn default_horizon(s: &BurstScenario) -> Result<Option<f64>, BurstError> {
    if s.background.is_empty() {
        return Ok(None);
    }
    let st = make_burst_initial(s, s.t_ini[0])?;
    let v = kernel::rhs(&st)?;
    let vmax = v[3..].iter().map(|w| w.norm()).fold(0.0, f64::max);
    Ok(Some(if vmax > 0.0 { s.rho_sep / (10.0 * vmax) } else { f64::INFINITY }))
}

/// Log-spaced magnitudes between `lo` and `hi`, inclusive.
fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| match i {
            0 => lo,
            _ if i + 1 == n => hi,
            _ => (a + (b - a) * i as f64 / (n - 1) as f64).exp(),
        })
        .collect()
}

fn spread_exponent(s: &BurstScenario, traj: &Trajectory, t_ini: f64) -> Result<f64, BurstError> {
    let lo = t_ini.max(s.horizon / 100.0);
    let sign = s.time_sign();
    let mut xs = Vec::with_capacity(GRID_POINTS);
    let mut ys = Vec::with_capacity(GRID_POINTS);
    for tau in log_grid(lo, s.horizon, GRID_POINTS) {
        let t = sign * tau;
        let z = traj
            .positions_at(t)
            .ok_or_else(|| BurstError::Scenario(format!("time {t} outside the run")))?;
        xs.push((t - s.motion.t0).abs().ln());
        ys.push(triple_spread(&z).ln());
    }
    Ok(linear_fit(&xs, &ys).0)
}

fn require_completed(traj: &Trajectory, t_ini: f64) -> Result<(), BurstError> {
    match traj.status {
        integrator::TrajectoryStatus::Completed => Ok(()),
        st => Err(BurstError::Incomplete {
            t_ini,
            status: format!("{st:?}"),
        }),
    }
}

/// Integrates one run. A burst runs from `t_ini` to `T`; a reversed
/// scenario starts from the mirror of the burst's state at `T`, at time
/// `−T`, and runs to `−t_ini`.
pub fn run_burst(
    s: &BurstScenario,
    t_ini: f64,
    cfg: &IntegratorConfig,
) -> Result<(Trajectory, BurstDiagnostics), BurstError> {
    s.validate()?;
    let traj = if s.reversed {
        let forward = collapse_scenario(s);
        let fw = integrator::integrate(&make_burst_initial(&forward, t_ini)?, forward.horizon, cfg)?;
        require_completed(&fw, t_ini)?;
        integrator::integrate(&fw.last().time_reversed(), -t_ini, cfg)?
    } else {
        integrator::integrate(&make_burst_initial(s, t_ini)?, s.horizon, cfg)?
    };
    require_completed(&traj, t_ini)?;
    let exponent_fit = spread_exponent(s, &traj, t_ini)?;
    let first = &traj.samples[0];
    let last = traj.last();
    let (start, end) = if s.reversed { (last, first) } else { (first, last) };
    let background_drift = (3..start.len())
        .map(|k| (end.z[k] - start.z[k]).norm())
        .fold(0.0, f64::max);
    let drift = conservation_drift(&traj)?;
    let diag = BurstDiagnostics {
        exponent_fit,
        cauchy_gaps: Vec::new(),
        background_drift,
        t_ini: vec![t_ini],
        run_exponents: vec![exponent_fit],
        conservation_drift: drift,
    };
    Ok((traj, diag))
}

/// Runs every start time concurrently and measures successive Cauchy gaps
/// on a log-spaced grid from the largest `t_ini` to `T`.
pub fn convergence_study(
    s: &BurstScenario,
    cfg: &IntegratorConfig,
) -> Result<(Vec<Trajectory>, BurstDiagnostics), BurstError> {
    s.validate()?;
    if s.t_ini.len() < 2 {
        return Err(BurstError::Scenario("a convergence study needs at least two start times".into()));
    }
    let runs: Vec<(Trajectory, BurstDiagnostics)> = s
        .t_ini
        .par_iter()
        .map(|&t| run_burst(s, t, cfg))
        .collect::<Result<_, _>>()?;
    let sign = s.time_sign();
    let grid = log_grid(s.t_ini[0], s.horizon, GRID_POINTS);
    let mut gaps = Vec::with_capacity(runs.len() - 1);
    for w in runs.windows(2) {
        let mut sup: f64 = 0.0;
        for &tau in &grid {
            let t = sign * tau;
            let (za, zb) = match (w[0].0.positions_at(t), w[1].0.positions_at(t)) {
                (Some(a), Some(b)) => (a, b),
                _ => return Err(BurstError::Scenario(format!("time {t} outside a run"))),
            };
            for (p, q) in za.iter().zip(&zb) {
                sup = sup.max((p - q).norm());
            }
        }
        gaps.push(sup);
    }
    let mut drift = [0.0f64; 3];
    for (_, d) in &runs {
        for i in 0..3 {
            drift[i] = drift[i].max(d.conservation_drift[i]);
        }
    }
    let diag = BurstDiagnostics {
        exponent_fit: runs.last().map(|r| r.1.exponent_fit).unwrap_or(f64::NAN),
        cauchy_gaps: gaps,
        background_drift: runs.iter().map(|r| r.1.background_drift).fold(0.0, f64::max),
        t_ini: s.t_ini.clone(),
        run_exponents: runs.iter().map(|r| r.1.exponent_fit).collect(),
        conservation_drift: drift,
    };
    Ok((runs.into_iter().map(|r| r.0).collect(), diag))
}
