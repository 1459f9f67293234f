//! Reduced side-length parametrization of normalized triples, admissibility
//! of the stability condition, and the sweep over α.
//!
//! Triples are normalized to `a₁ = 1/2`, `a₂ = −1/2`, `ξ₁ = ξ₂ = 1`, with
//! side lengths `x = |a₁ − a₃|` and `y = |a₂ − a₃|`. Vanishing moment of
//! inertia fixes `ξ₃ = −1/(x² + y²)` and vanishing energy gives
//! `x^{α−2} + y^{α−2} = x² + y²`.

use crate::kernel::{self, KernelError, ALPHA_GUARD};
use crate::selfsimilar::{self, SelfSimilarError, TripleConfig, RATE_TOL, SS_TOL};
use crate::stability::{self, HypothesisReport, StabilityError};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use thiserror::Error;

/// Lower cap on the bracket for `y`.
pub const Y_EPS: f64 = 1e-6;
/// Upper end of the bracket for `y`.
pub const Y_MAX: f64 = 10.0;
/// Residual tolerance used when the search solves for `y`.
pub const Y_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SearchError {
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    SelfSimilar(#[from] SelfSimilarError),
    #[error(transparent)]
    Stability(#[from] StabilityError),
    #[error("x = {0} outside the admissible range")]
    XDomain(f64),
    #[error("no sign change of the side-length equation on [{lo}, {hi}] at x = {x}")]
    NoRoot { x: f64, lo: f64, hi: f64 },
    #[error("side-length solve stalled with residual {0:e}")]
    NotConverged(f64),
    #[error("discriminant {0} is not positive")]
    CardanoDomain(f64),
    #[error("triangle with sides 1, {x}, {y} is degenerate")]
    Collinear { x: f64, y: f64 },
    #[error("energy identity violated by {0:e}")]
    Inconsistent(f64),
    #[error("third intensity {0} must exceed -2")]
    IntensityBound(f64),
    #[error("sweep range [{0}, {1}] crosses the excluded band around alpha = 2")]
    Straddle(f64, f64),
    #[error("invalid sweep parameters: {0}")]
    Params(String),
}

/// Sign of `Im(a₃)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Branch {
    Lower,
    Upper,
}

impl Branch {
    pub fn sign(self) -> f64 {
        match self {
            Branch::Lower => -1.0,
            Branch::Upper => 1.0,
        }
    }

    pub fn flipped(self) -> Branch {
        match self {
            Branch::Lower => Branch::Upper,
            Branch::Upper => Branch::Lower,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReducedParams {
    pub alpha: f64,
    pub x: f64,
    pub y: f64,
    pub branch: Branch,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepStatus {
    Interval,
    Empty,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub alpha: f64,
    pub x_minus: Option<f64>,
    pub x_plus: Option<f64>,
    pub status: SweepStatus,
}

fn side_residual(x: f64, y: f64, alpha: f64) -> f64 {
    y * y - y.powf(alpha - 2.0) - x.powf(alpha - 2.0) + x * x
}

/// Solves `x^{α−2} + y^{α−2} = x² + y²` for `y` on `[max(1−x, ε), Y_MAX]`
/// by Newton steps safeguarded with bisection.
pub fn y_from_x(x: f64, alpha: f64, tol: f64) -> Result<f64, SearchError> {
    kernel::check_alpha(alpha)?;
    if !(x > 0.0 && x <= 1.0) {
        return Err(SearchError::XDomain(x));
    }
    let g = |y: f64| side_residual(x, y, alpha);
    let dg = |y: f64| 2.0 * y - (alpha - 2.0) * y.powf(alpha - 3.0);
    let (mut lo, mut hi) = ((1.0 - x).max(Y_EPS), Y_MAX);
    let (glo, ghi) = (g(lo), g(hi));
    if glo == 0.0 {
        return Ok(lo);
    }
    if glo.signum() == ghi.signum() {
        return Err(SearchError::NoRoot { x, lo, hi });
    }
    // orient so that g(lo) < 0 < g(hi)
    let flip = glo > 0.0;
    let f = |y: f64| if flip { -g(y) } else { g(y) };
    let df = |y: f64| if flip { -dg(y) } else { dg(y) };
    let mut y = 1.0f64.clamp(lo, hi);
    for _ in 0..200 {
        let fy = f(y);
        if fy == 0.0 {
            return Ok(y);
        }
        if fy < 0.0 {
            lo = y;
        } else {
            hi = y;
        }
        let d = df(y);
        let newton = y - fy / d;
        let next = if d.is_finite() && d != 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        let step = (next - y).abs();
        y = next;
        if step <= 2.0 * f64::EPSILON * y.abs() || hi - lo <= 2.0 * f64::EPSILON * y.abs() {
            break;
        }
    }
    let r = g(y).abs();
    if r <= tol {
        Ok(y)
    } else {
        Err(SearchError::NotConverged(r))
    }
}

/// `1/4 − (1 − x³)³ / (27 x³)`.
pub fn cardano_discriminant(x: f64) -> f64 {
    let u = 1.0 - x * x * x;
    0.25 - u * u * u / (27.0 * x * x * x)
}

/// Closed-form root of the α = 1 side-length cubic.
pub fn cardano_y(x: f64) -> Result<f64, SearchError> {
    if !(x > 0.5 && x <= 1.0) {
        return Err(SearchError::XDomain(x));
    }
    let d = cardano_discriminant(x);
    if !(d > 0.0) {
        return Err(SearchError::CardanoDomain(d));
    }
    let s = d.sqrt();
    Ok((0.5 + s).cbrt() + (0.5 - s).cbrt())
}

/// `(Re a₃, |Im a₃|)` for sides `x = |a₁ − a₃|`, `y = |a₂ − a₃|`.
fn third_vertex(x: f64, y: f64) -> Result<(f64, f64), SearchError> {
    let u = x * x - y * y - 1.0;
    let arg = y * y - 0.25 * u * u;
    if !(arg > 0.0) {
        return Err(SearchError::Collinear { x, y });
    }
    Ok((0.5 * (y * y - x * x), arg.sqrt()))
}

/// Normalized triple with `|a₁ − a₃| = x`, `|a₂ − a₃| = y` and `Im(a₃)` on
/// the requested branch.
pub fn reduced_config(p: &ReducedParams) -> Result<TripleConfig, SearchError> {
    kernel::check_alpha(p.alpha)?;
    if !(p.x > 0.0 && p.x <= 1.0) {
        return Err(SearchError::XDomain(p.x));
    }
    if !(p.y > (1.0 - p.x).max(0.0)) {
        return Err(SearchError::Collinear { x: p.x, y: p.y });
    }
    let (re, im) = third_vertex(p.x, p.y)?;
    let s2 = p.x * p.x + p.y * p.y;
    let identity = (p.x.powf(p.alpha - 2.0) + p.y.powf(p.alpha - 2.0) - s2) / s2;
    if identity.abs() > 1e-10 {
        return Err(SearchError::Inconsistent(identity));
    }
    let xi3 = -1.0 / s2;
    if !(xi3 > -2.0) {
        return Err(SearchError::IntensityBound(xi3));
    }
    let a = [
        Complex64::new(0.5, 0.0),
        Complex64::new(-0.5, 0.0),
        Complex64::new(re, p.branch.sign() * im),
    ];
    Ok(TripleConfig::new(a, [1.0, 1.0, xi3], p.alpha)?)
}

/// Intermediate quantities of the stability test at one `(x, α)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointEval {
    pub y: f64,
    pub branch: Branch,
    pub a_rate: f64,
    pub b_rate: f64,
    pub residual: f64,
    pub c1: f64,
    pub c2: f64,
    /// `c1² − 4c2`.
    pub disc: f64,
    /// `min(disc/c1², (2b² − c1 − √disc)/(2b² + |c1|))`; positive exactly
    /// when both inequalities on μ² hold.
    pub margin: f64,
}

/// Reason a point fails before the μ conditions are reached.
#[derive(Debug, Clone, PartialEq)]
pub enum PointReject {
    Search(SearchError),
    NotSelfSimilar(f64),
    NonPositiveRate(f64),
}

impl std::fmt::Display for PointReject {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PointReject::Search(e) => write!(f, "{e}"),
            PointReject::NotSelfSimilar(r) => write!(f, "ratio spread {r:e} exceeds {SS_TOL:e}"),
            PointReject::NonPositiveRate(a) => write!(f, "rate a = {a:e} is not positive on either branch"),
        }
    }
}

/// Runs the reduced pipeline at `(x, α)` with coupling constant `c_alpha`.
/// The branch of `Im(a₃)` is the one giving `a > 0`.
pub fn evaluate_point(x: f64, alpha: f64, c_alpha: f64) -> Result<PointEval, PointReject> {
    let y = y_from_x(x, alpha, Y_TOL).map_err(PointReject::Search)?;
    let mut branch = Branch::Lower;
    let raw = reduced_config(&ReducedParams { alpha, x, y, branch }).map_err(PointReject::Search)?;
    let mut cen = selfsimilar::center(&raw).map_err(|e| PointReject::Search(e.into()))?;
    let mut r = selfsimilar::rates_with(c_alpha, &cen).map_err(|e| PointReject::Search(e.into()))?;
    if r.a_rate < 0.0 {
        branch = Branch::Upper;
        cen.a = cen.a.map(|w| w.conj());
        r = selfsimilar::rates_with(c_alpha, &cen).map_err(|e| PointReject::Search(e.into()))?;
    }
    if r.residual > SS_TOL {
        return Err(PointReject::NotSelfSimilar(r.residual));
    }
    if !(r.a_rate > RATE_TOL) {
        return Err(PointReject::NonPositiveRate(r.a_rate));
    }
    let off = stability::off_entries(c_alpha, &cen);
    let (c1, c2) = stability::mu_coefficients_of(&off);
    let disc = c1 * c1 - 4.0 * c2;
    let b2 = 2.0 * r.b_rate * r.b_rate;
    let m1 = disc / (c1 * c1);
    let m2 = (b2 - c1 - disc.max(0.0).sqrt()) / (b2 + c1.abs());
    Ok(PointEval {
        y,
        branch,
        a_rate: r.a_rate,
        b_rate: r.b_rate,
        residual: r.residual,
        c1,
        c2,
        disc,
        margin: m1.min(m2),
    })
}

/// Stability margin at `(x, α)`, `−1` where the pipeline rejects the point.
pub fn margin(x: f64, alpha: f64) -> f64 {
    match kernel::coupling_constant(alpha) {
        Ok(c) => evaluate_point(x, alpha, c).map(|p| p.margin).unwrap_or(-1.0),
        Err(_) => -1.0,
    }
}

/// Branch of `Im(a₃)` giving a burst at `(x, α)`.
pub fn burst_branch(x: f64, alpha: f64) -> Result<Branch, SearchError> {
    let c = kernel::coupling_constant(alpha)?;
    match evaluate_point(x, alpha, c) {
        Ok(p) => Ok(p.branch),
        Err(PointReject::Search(e)) => Err(e),
        Err(_) => Ok(Branch::Lower),
    }
}

/// Normalized burst triple at `(x, α)`: solves for `y`, picks the branch
/// with `a > 0` and builds the uncentered configuration.
pub fn normalized_triple(x: f64, alpha: f64) -> Result<(ReducedParams, TripleConfig), SearchError> {
    let y = y_from_x(x, alpha, Y_TOL)?;
    let branch = burst_branch(x, alpha)?;
    let p = ReducedParams { alpha, x, y, branch };
    Ok((p, reduced_config(&p)?))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Admissibility {
    pub admissible: bool,
    pub x: f64,
    pub alpha: f64,
    pub y: Option<f64>,
    pub branch: Option<Branch>,
    pub reason: String,
    pub report: Option<HypothesisReport>,
}

/// Full check at `(x, α)`: side-length solve, burst-branch triple, and the
/// stability report.
pub fn admissible(x: f64, alpha: f64) -> Admissibility {
    let mut out = Admissibility {
        admissible: false,
        x,
        alpha,
        y: None,
        branch: None,
        reason: String::new(),
        report: None,
    };
    if !(x > 0.0 && x < 1.0) {
        out.reason = SearchError::XDomain(x).to_string();
        return out;
    }
    let y = match y_from_x(x, alpha, Y_TOL) {
        Ok(y) => y,
        Err(e) => {
            out.reason = e.to_string();
            return out;
        }
    };
    out.y = Some(y);
    let branch = match burst_branch(x, alpha) {
        Ok(b) => b,
        Err(e) => {
            out.reason = e.to_string();
            return out;
        }
    };
    out.branch = Some(branch);
    let cfg = match reduced_config(&ReducedParams { alpha, x, y, branch }) {
        Ok(c) => c,
        Err(e) => {
            out.reason = e.to_string();
            return out;
        }
    };
    match stability::hypothesis_a_check(&cfg) {
        Ok(rep) => {
            out.admissible = rep.pass;
            out.reason = rep.details.clone();
            out.report = Some(rep);
        }
        Err(e) => out.reason = e.to_string(),
    }
    out
}

/// Outcome of scanning one α.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalScan {
    pub record: SweepRecord,
    /// Every admissible run found, refined, in increasing `x`.
    pub runs: Vec<(f64, f64)>,
}

impl IntervalScan {
    pub fn disconnected(&self) -> bool {
        self.runs.len() > 1
    }
}

fn bisect_boundary<F: Fn(f64) -> bool>(pred: F, mut out: f64, mut inside: f64, tol: f64) -> f64 {
    while (inside - out).abs() > tol {
        let mid = 0.5 * (inside + out);
        if pred(mid) {
            inside = mid;
        } else {
            out = mid;
        }
    }
    0.5 * (inside + out)
}

/// Golden-section maximization of `f` on `[a, b]`.
fn golden_max<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64) -> (f64, f64) {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = b - g * (b - a);
    let mut x2 = a + g * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while b - a > 4.0 * f64::EPSILON * b.abs().max(1e-300) {
        if f1 > 0.0 || f2 > 0.0 {
            break;
        }
        if f1 >= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - g * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + g * (b - a);
            f2 = f(x2);
        }
    }
    if f1 >= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

/// Admissible x-set at a fixed α. The grid of pitch `coarse` finds runs of
/// admissible points; every non-positive local maximum of the margin is
/// also maximized continuously, which catches windows narrower than the
/// pitch. Boundaries are bisected on the admissibility predicate down to
/// `refine_tol`. The widest run is reported.
pub fn x_interval(alpha: f64, coarse: f64, refine_tol: f64) -> Result<IntervalScan, SearchError> {
    let c = kernel::coupling_constant(alpha)?;
    if !(coarse > 0.0 && coarse < 0.5) || !(refine_tol > 0.0 && refine_tol < coarse) {
        return Err(SearchError::Params(format!(
            "need 0 < refine_tol < coarse < 0.5, got coarse {coarse}, refine_tol {refine_tol}"
        )));
    }
    let m = |x: f64| -> f64 {
        if !(x > 0.0 && x < 1.0) {
            return -1.0;
        }
        evaluate_point(x, alpha, c).map(|p| p.margin).unwrap_or(-1.0)
    };
    let pred = |x: f64| m(x) > 0.0;
    let n = (1.0 / coarse).round() as usize;
    // grid with the open-interval ends 0 and 1 as sentinels
    let xs: Vec<f64> = (0..=n).map(|k| (k as f64 * coarse).min(1.0)).collect();
    let mut ms: Vec<f64> = xs.iter().map(|&x| m(x)).collect();
    ms[0] = -1.0;
    ms[n] = -1.0;

    let mut runs = Vec::new();
    let mut k = 1;
    while k < n {
        if ms[k] > 0.0 {
            let start = k;
            while k + 1 < n && ms[k + 1] > 0.0 {
                k += 1;
            }
            let lo = bisect_boundary(pred, xs[start - 1], xs[start], refine_tol);
            let hi = bisect_boundary(pred, xs[k + 1], xs[k], refine_tol);
            runs.push((lo, hi));
        } else if ms[k] > -1.0 && ms[k] >= ms[k - 1] && ms[k] >= ms[k + 1] {
            let (xp, mp) = golden_max(m, xs[k - 1], xs[k + 1]);
            if mp > 0.0 {
                let lo = bisect_boundary(pred, xs[k - 1], xp, refine_tol);
                let hi = bisect_boundary(pred, xs[k + 1], xp, refine_tol);
                runs.push((lo, hi));
            }
        }
        k += 1;
    }
    runs.sort_by(|a, b| a.0.total_cmp(&b.0));
    runs.dedup_by(|b, a| b.0 <= a.1);
    let widest = runs
        .iter()
        .copied()
        .fold(None, |best: Option<(f64, f64)>, r| match best {
            Some(b) if b.1 - b.0 >= r.1 - r.0 => Some(b),
            _ => Some(r),
        });
    let record = match widest {
        Some((lo, hi)) => SweepRecord {
            alpha,
            x_minus: Some(lo),
            x_plus: Some(hi),
            status: SweepStatus::Interval,
        },
        None => SweepRecord {
            alpha,
            x_minus: None,
            x_plus: None,
            status: SweepStatus::Empty,
        },
    };
    Ok(IntervalScan { record, runs })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepParams {
    pub alpha_min: f64,
    pub alpha_max: f64,
    pub alpha_step: f64,
    pub coarse: f64,
    pub refine_tol: f64,
    /// Skip the excluded band around α = 2 instead of rejecting the range.
    pub split_at_2: bool,
}

impl Default for SweepParams {
    fn default() -> Self {
        SweepParams {
            alpha_min: 0.9,
            alpha_max: 2.2,
            alpha_step: 1e-3,
            coarse: 1e-4,
            refine_tol: 1e-7,
            split_at_2: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    pub records: Vec<SweepRecord>,
    /// Lowest α where the interval opens, bracketed between grid points.
    pub alpha_minus: Option<f64>,
    /// Highest α where the interval closes.
    pub alpha_plus: Option<f64>,
    /// α values whose admissible set had more than one run.
    pub disconnected: Vec<f64>,
}

fn in_band(alpha: f64) -> bool {
    (alpha - 2.0).abs() <= ALPHA_GUARD * (1.0 + 1e-9)
}

/// The α grid of a sweep, with the band around 2 removed.
pub fn alpha_grid(p: &SweepParams) -> Result<Vec<f64>, SearchError> {
    if !(p.alpha_step > 0.0) || !(p.alpha_max >= p.alpha_min) {
        return Err(SearchError::Params(format!(
            "need alpha_step > 0 and alpha_max >= alpha_min, got [{}, {}] step {}",
            p.alpha_min, p.alpha_max, p.alpha_step
        )));
    }
    for a in [p.alpha_min, p.alpha_max] {
        if !(a > 0.0 && a < 3.0) {
            return Err(KernelError::AlphaDomain(a).into());
        }
    }
    let straddles = p.alpha_min < 2.0 + ALPHA_GUARD && p.alpha_max > 2.0 - ALPHA_GUARD;
    if straddles && !p.split_at_2 {
        return Err(SearchError::Straddle(p.alpha_min, p.alpha_max));
    }
    let n = ((p.alpha_max - p.alpha_min) / p.alpha_step + 1e-9).floor() as usize;
    let grid: Vec<f64> = (0..=n)
        .map(|k| p.alpha_min + k as f64 * p.alpha_step)
        .filter(|a| !in_band(*a))
        .collect();
    if grid.is_empty() {
        return Err(SearchError::Params("sweep range holds no admissible alpha".into()));
    }
    Ok(grid)
}

fn is_empty_at(alpha: f64, p: &SweepParams) -> Result<bool, SearchError> {
    Ok(x_interval(alpha, p.coarse, p.refine_tol)?.record.status == SweepStatus::Empty)
}

/// Bisects an emptiness transition between `empty` and `full`.
fn refine_transition(mut empty: f64, mut full: f64, p: &SweepParams) -> Result<f64, SearchError> {
    for _ in 0..10 {
        let mid = 0.5 * (empty + full);
        if is_empty_at(mid, p)? {
            empty = mid;
        } else {
            full = mid;
        }
    }
    Ok(0.5 * (empty + full))
}

/// Per-α admissible intervals and the α values where they open and close.
/// `jobs` sets the worker count; output order follows α regardless.
pub fn sweep(p: &SweepParams, jobs: Option<usize>) -> Result<SweepResult, SearchError> {
    let grid = alpha_grid(p)?;
    let work = || -> Result<Vec<IntervalScan>, SearchError> {
        grid.par_iter().map(|&a| x_interval(a, p.coarse, p.refine_tol)).collect()
    };
    let scans = match jobs {
        Some(j) => rayon::ThreadPoolBuilder::new()
            .num_threads(j.max(1))
            .build()
            .map_err(|e| SearchError::Params(e.to_string()))?
            .install(work)?,
        None => work()?,
    };
    let nonempty: Vec<bool> = scans.iter().map(|s| s.record.status == SweepStatus::Interval).collect();
    let adjacent = |i: usize| !(grid[i] < 2.0 && grid[i + 1] > 2.0);
    let mut alpha_minus = None;
    if let Some(i) = nonempty.iter().position(|&b| b) {
        if i > 0 && adjacent(i - 1) {
            alpha_minus = Some(refine_transition(grid[i - 1], grid[i], p)?);
        }
    }
    let mut alpha_plus = None;
    if let Some(i) = nonempty.iter().rposition(|&b| b) {
        if i + 1 < grid.len() && adjacent(i) {
            alpha_plus = Some(refine_transition(grid[i + 1], grid[i], p)?);
        }
    }
    let disconnected = scans.iter().filter(|s| s.disconnected()).map(|s| s.record.alpha).collect();
    Ok(SweepResult {
        records: scans.into_iter().map(|s| s.record).collect(),
        alpha_minus,
        alpha_plus,
        disconnected,
    })
}

/// Plot-ready CSV `alpha,x_minus,x_plus,status` at 12 significant digits.
pub fn sweep_csv(records: &[SweepRecord]) -> String {
    let mut out = String::from("alpha,x_minus,x_plus,status\n");
    let f = |v: Option<f64>| v.map(|x| format!("{x:.11e}")).unwrap_or_default();
    for r in records {
        let status = match r.status {
            SweepStatus::Interval => "Interval",
            SweepStatus::Empty => "Empty",
        };
        let _ = writeln!(out, "{:.11e},{},{},{}", r.alpha, f(r.x_minus), f(r.x_plus), status);
    }
    out
}
