use crate::manifest::{ensure_dir, ManifestBuilder};
use anyhow::{bail, Context, Result};
use gsqg::burst::{self, BurstScenario, ScenarioFile};
use gsqg::integrator::{self, IntegratorConfig, Trajectory};
use gsqg::kernel::{self, VortexState};
use gsqg::search::{self, SweepParams, SweepStatus};
use gsqg::selfsimilar::{self, Classification, SelfSimilarMotion, TripleConfig};
use num_complex::Complex64;
use serde::Serialize;
use serde_json::{json, Value};
use std::path::{Path, PathBuf};

/// What a successful command found.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Positive,
    Negative,
}

#[derive(Debug, Serialize)]
pub struct FindConfigParams {
    pub alpha: f64,
    pub x: Option<f64>,
    pub auto: bool,
    pub out: PathBuf,
}

pub fn find_config(p: &FindConfigParams) -> Result<Verdict> {
    kernel::check_alpha(p.alpha)?;
    ensure_dir(&p.out)?;
    let mut man = ManifestBuilder::new("find-config", p)?;
    let defaults = SweepParams::default();
    let x = match (p.x, p.auto) {
        (Some(x), false) => {
            if !(x > 0.0 && x < 1.0) {
                bail!("--x must lie in (0, 1), got {x}");
            }
            x
        }
        (None, true) => {
            let scan = search::x_interval(p.alpha, defaults.coarse, defaults.refine_tol)?;
            match (scan.record.x_minus, scan.record.x_plus) {
                (Some(lo), Some(hi)) => 0.5 * (lo + hi),
                _ => {
                    let report = json!({
                        "admissible": false,
                        "alpha": p.alpha,
                        "reason": "no admissible x in (0, 1)",
                    });
                    man.write_json(&p.out.join("report.json"), &report)?;
                    man.finish(&p.out.join("manifest.json"), report)?;
                    println!("alpha = {}: admissible interval is empty", p.alpha);
                    return Ok(Verdict::Negative);
                }
            }
        }
        _ => bail!("exactly one of --x and --auto is required"),
    };
    let adm = search::admissible(x, p.alpha);
    if let Ok((_, cfg)) = search::normalized_triple(x, p.alpha) {
        man.write_json(&p.out.join("config.json"), &cfg)?;
    }
    man.write_json(&p.out.join("report.json"), &adm)?;
    let summary = json!({
        "admissible": adm.admissible,
        "alpha": p.alpha,
        "x": x,
        "y": adm.y,
        "a": adm.report.as_ref().map(|r| r.a),
        "reason": adm.reason,
    });
    man.finish(&p.out.join("manifest.json"), summary)?;
    println!(
        "alpha = {}, x = {x}: Hypothesis A {} ({})",
        p.alpha,
        if adm.admissible { "holds" } else { "fails" },
        adm.reason
    );
    Ok(if adm.admissible { Verdict::Positive } else { Verdict::Negative })
}

#[derive(Debug, Serialize)]
pub struct SweepCmdParams {
    pub sweep: SweepParams,
    pub jobs: Option<usize>,
    pub out: PathBuf,
}

pub fn sweep(p: &SweepCmdParams) -> Result<Verdict> {
    // validate before touching the filesystem
    search::alpha_grid(&p.sweep)?;
    ensure_dir(&p.out)?;
    let mut man = ManifestBuilder::new("sweep", p)?;
    let res = search::sweep(&p.sweep, p.jobs)?;
    man.write(&p.out.join("sweep.csv"), &search::sweep_csv(&res.records))?;
    let endpoints = json!({ "alpha_minus": res.alpha_minus, "alpha_plus": res.alpha_plus });
    man.write_json(&p.out.join("endpoints.json"), &endpoints)?;
    let intervals = res.records.iter().filter(|r| r.status == SweepStatus::Interval).count();
    let summary = json!({
        "alpha_minus": res.alpha_minus,
        "alpha_plus": res.alpha_plus,
        "records": res.records.len(),
        "intervals": intervals,
        "disconnected": res.disconnected,
    });
    man.finish(&p.out.join("manifest.json"), summary)?;
    let show = |v: Option<f64>| v.map_or_else(|| "not bracketed".to_string(), |a| a.to_string());
    println!(
        "{} alpha values, {intervals} with an interval; alpha_minus = {}, alpha_plus = {}",
        res.records.len(),
        show(res.alpha_minus),
        show(res.alpha_plus)
    );
    Ok(if intervals > 0 { Verdict::Positive } else { Verdict::Negative })
}

#[derive(Debug, Serialize)]
pub struct SimulateParams {
    pub config: PathBuf,
    pub t0: f64,
    pub t1: f64,
    pub rel_tol: f64,
    pub out: PathBuf,
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn manifest_path(out: &Path) -> PathBuf {
    out.with_extension("manifest.json")
}

/// Largest relative distance between the samples and the exact profile,
/// over the samples where the profile is defined.
fn max_selfsimilar_deviation(traj: &Trajectory, shape: &TripleConfig, m: &SelfSimilarMotion) -> f64 {
    let mut worst: f64 = 0.0;
    for s in &traj.samples {
        let Ok(z) = selfsimilar::zeta(m, s.t) else { continue };
        let mut scale: f64 = 0.0;
        let mut dev: f64 = 0.0;
        for (w, a) in s.z.iter().zip(&shape.a) {
            let exact = a * z;
            scale = scale.max(exact.norm());
            dev = dev.max((w - exact).norm());
        }
        worst = worst.max(dev / scale);
    }
    worst
}

/// Integrates a triple from `t0` to `t1`. A self-similar triple starts on
/// its exact profile `a_j Z(t0)` with `Z` referenced to time 0; collapsing
/// triples are handed to the collapse integrator and the singular time is
/// fitted. Other triples start at their given positions.
pub fn simulate(p: &SimulateParams) -> Result<Verdict> {
    if !(p.t1 > p.t0) {
        bail!("--t1 must exceed --t0");
    }
    let cfg = IntegratorConfig::with_rel_tol(p.rel_tol);
    cfg.validate()?;
    let triple: TripleConfig = read_json(&p.config)?;
    triple.validate()?;
    let shape = selfsimilar::center(&triple)?;
    let rates = selfsimilar::selfsimilar_rate(&shape)?;
    let class = selfsimilar::classify_rates(&rates);
    let motion = SelfSimilarMotion::from_rates(&rates, triple.alpha, 0.0, 0.0);
    let z0: Vec<Complex64> = match class {
        Classification::Burst | Classification::Collapse => {
            let z = selfsimilar::zeta(&motion, p.t0)
                .with_context(|| format!("--t0 {} lies outside the self-similar branch", p.t0))?;
            shape.a.iter().map(|a| a * z).collect()
        }
        _ => triple.a.to_vec(),
    };
    let state = VortexState::new(p.t0, z0, triple.xi.to_vec(), triple.alpha)?;
    let mut man = ManifestBuilder::new("simulate", p)?;
    let mut summary = json!({ "classification": format!("{class:?}"), "a": rates.a_rate, "b": rates.b_rate });
    let traj = if class == Classification::Collapse {
        let run = integrator::integrate_collapse(&state, p.t1 - p.t0, &cfg)?;
        summary["t_star"] = json!(run.t_star);
        summary["t_star_exact"] = json!(motion.t0);
        summary["exponent"] = json!(run.exponent);
        run.trajectory
    } else {
        integrator::integrate(&state, p.t1, &cfg)?
    };
    if matches!(class, Classification::Burst | Classification::Collapse) {
        summary["selfsimilar_deviation"] = json!(max_selfsimilar_deviation(&traj, &shape, &motion));
    }
    summary["status"] = json!(format!("{:?}", traj.status));
    summary["t_end"] = json!(traj.t_end());
    summary["conservation_drift"] = json!(integrator::conservation_drift(&traj)?);
    man.write(&p.out, &traj.to_csv()?)?;
    man.finish(&manifest_path(&p.out), summary.clone())?;
    println!("{}", serde_json::to_string(&summary)?);
    Ok(Verdict::Positive)
}

#[derive(Debug, Serialize)]
pub struct BurstParams {
    pub scenario: PathBuf,
    pub out: PathBuf,
}

/// Runs a burst scenario. Two or more start times run the convergence
/// study; a single start time runs once.
pub fn burst(p: &BurstParams) -> Result<Verdict> {
    let file: ScenarioFile = read_json(&p.scenario)?;
    let s = BurstScenario::from_file(&file)?;
    ensure_dir(&p.out)?;
    let mut man = ManifestBuilder::new("burst", p)?;
    let cfg = IntegratorConfig::default();
    let (runs, diag) = if s.t_ini.len() >= 2 {
        burst::convergence_study(&s, &cfg)?
    } else {
        let (t, d) = burst::run_burst(&s, s.t_ini[0], &cfg)?;
        (vec![t], d)
    };
    for (k, traj) in runs.iter().enumerate() {
        man.write(&p.out.join(format!("run_{k}.csv")), &traj.to_csv()?)?;
    }
    man.write_json(&p.out.join("diagnostics.json"), &diag)?;
    let summary: Value = serde_json::to_value(&diag)?;
    man.finish(&p.out.join("manifest.json"), summary)?;
    println!(
        "{} run(s); exponent fit {}, cauchy gaps {:?}, background drift {:e}",
        runs.len(),
        diag.exponent_fit,
        diag.cauchy_gaps,
        diag.background_drift
    );
    Ok(Verdict::Positive)
}
