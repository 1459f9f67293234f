use gsqg::burst::{self, BackgroundVortex, BurstScenario, ScenarioFile};
use gsqg::integrator::IntegratorConfig;
use gsqg::kernel;
use gsqg::search;
use gsqg::selfsimilar::{self, Classification};
use num_complex::Complex64;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn reference_triple() -> gsqg::TripleConfig {
    search::normalized_triple(0.70190, 1.0).unwrap().1
}

fn one_background() -> Vec<BackgroundVortex> {
    vec![BackgroundVortex {
        position: c(1.0, 0.0),
        intensity: 1.0,
    }]
}

fn halvings(t0: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| t0 / 2f64.powi(k as i32)).collect()
}

#[test]
fn initial_state_layout() {
    let s = BurstScenario::new(&reference_triple(), vec![], vec![1e-4], 1.0).unwrap();
    let st = burst::make_burst_initial(&s, 1e-4).unwrap();
    let z = selfsimilar::zeta(&s.motion, 1e-4).unwrap();
    assert_eq!(st.len(), 3);
    for j in 0..3 {
        assert_eq!(st.z[j], s.triple.a[j] * z);
        assert_eq!(st.xi[j], s.triple.xi[j]);
    }
    let mut prev = f64::INFINITY;
    for k in 3..10 {
        let st = burst::make_burst_initial(&s, 10f64.powi(-k)).unwrap();
        let r = st.z.iter().map(|w| w.norm()).fold(0.0, f64::max);
        assert!(r < prev);
        prev = r;
    }
    assert!(prev < 1e-3);
}

#[test]
fn background_start_is_valid() {
    let s = BurstScenario::new(&reference_triple(), one_background(), vec![1e-6], 1e-3).unwrap();
    let st = burst::make_burst_initial(&s, 1e-6).unwrap();
    assert!(st.validate().is_ok());
    assert_eq!(st.len(), 4);
    let spread = kernel::diameter(&st.z[..3]);
    let closest = kernel::min_distance(&st.z);
    assert!(closest <= spread && closest >= 0.3 * spread, "{closest} vs {spread}");
    assert_eq!(st.z[3], c(1.0, 0.0));
}

#[test]
fn merged_intensity_is_triple_sum() {
    let s = BurstScenario::new(&reference_triple(), one_background(), vec![1e-4], 1e-3).unwrap();
    assert_eq!(s.merged_intensity(), s.triple.xi.iter().sum::<f64>());
    let r = burst::collapse_scenario(&s);
    assert_eq!(r.merged_intensity(), -s.merged_intensity());
}

#[test]
fn isolated_burst_exponent() {
    let s = BurstScenario::new(&reference_triple(), vec![], vec![1e-5], 1.0).unwrap();
    let (traj, d) = burst::run_burst(&s, 1e-5, &IntegratorConfig::default()).unwrap();
    assert!((d.exponent_fit - 1.0 / 3.0).abs() <= 1e-3, "{}", d.exponent_fit);
    assert_eq!(d.background_drift, 0.0);
    assert!(traj.t_end() == 1.0);
}

#[test]
fn burst_near_a_background_vortex() {
    let s = BurstScenario::new(&reference_triple(), one_background(), vec![1e-6], 1e-3).unwrap();
    let (traj, d) = burst::run_burst(&s, 1e-6, &IntegratorConfig::default()).unwrap();
    assert!((d.exponent_fit - 1.0 / 3.0).abs() <= 5e-3, "{}", d.exponent_fit);
    assert!(d.background_drift <= 1e-2, "{}", d.background_drift);
    let span = traj.t_end() - traj.t_start();
    for v in d.conservation_drift {
        assert!(v <= 1e-7 * span, "{:?}", d.conservation_drift);
    }
}

#[test]
fn reversed_run_shrinks_to_the_site() {
    let s = BurstScenario::new(&reference_triple(), one_background(), vec![1e-6], 1e-3).unwrap();
    let r = burst::collapse_scenario(&s);
    let (traj, _) = burst::run_burst(&r, 1e-6, &IntegratorConfig::default()).unwrap();
    assert!(traj.t_start() < traj.t_end() && traj.t_end() < 0.0);
    let spreads: Vec<f64> = traj.samples.iter().map(|st| kernel::diameter(&st.z[..3])).collect();
    assert!(spreads.windows(2).all(|w| w[1] < w[0]));
    let want = spreads[0] * (1e-6f64 / 1e-3).powf(1.0 / 3.0);
    assert!((spreads.last().unwrap() - want).abs() <= 0.05 * want, "{} vs {want}", spreads.last().unwrap());
}

#[test]
fn collapse_mirrors_burst() {
    let s = BurstScenario::new(&reference_triple(), one_background(), vec![1e-5], 1e-3).unwrap();
    let cfg = IntegratorConfig::default();
    let (fw, _) = burst::run_burst(&s, 1e-5, &cfg).unwrap();
    let (bw, _) = burst::run_burst(&burst::collapse_scenario(&s), 1e-5, &cfg).unwrap();
    let mut worst: f64 = 0.0;
    for k in 0..=100 {
        let t = 1e-5 + (1e-3 - 1e-5) * k as f64 / 100.0;
        let a = fw.positions_at(t).unwrap();
        let b = bw.positions_at(-t).unwrap();
        for (p, q) in a.iter().zip(&b) {
            worst = worst.max((p - q).norm());
        }
    }
    assert!(worst <= 1e-8, "{worst}");
}

#[test]
fn collapse_is_an_involution() {
    let s = BurstScenario::new(&reference_triple(), one_background(), vec![1e-4], 1e-3).unwrap();
    let r = burst::collapse_scenario(&s);
    assert_eq!(burst::collapse_scenario(&r), s);
    assert_eq!(selfsimilar::classify(&s.triple).unwrap(), Classification::Burst);
    assert_eq!(selfsimilar::classify(&r.triple).unwrap(), Classification::Collapse);
}

#[test]
fn isolated_study_gaps_shrink() {
    let s = BurstScenario::new(&reference_triple(), vec![], halvings(1e-4, 4), 1e-2).unwrap();
    let (_, d) = burst::convergence_study(&s, &IntegratorConfig::default()).unwrap();
    for w in d.cauchy_gaps.windows(2) {
        assert!(w[0] >= 1.5 * w[1], "gaps {:?}", d.cauchy_gaps);
    }
}

#[test]
fn background_study_gaps_decrease() {
    let s = BurstScenario::new(&reference_triple(), one_background(), halvings(1e-4, 4), 1e-3).unwrap();
    let (runs, d) = burst::convergence_study(&s, &IntegratorConfig::default()).unwrap();
    assert_eq!(runs.len(), 4);
    assert_eq!(d.cauchy_gaps.len(), 3);
    assert!(d.cauchy_gaps.windows(2).all(|w| w[1] < w[0]), "{:?}", d.cauchy_gaps);
    assert!((d.exponent_fit - 1.0 / 3.0).abs() <= 5e-3);
    assert_eq!(d.run_exponents.len(), 4);
}

#[test]
fn repeated_start_time_gives_zero_gap() {
    let s = BurstScenario::new(&reference_triple(), one_background(), vec![1e-4, 1e-4], 1e-3).unwrap();
    let (_, d) = burst::convergence_study(&s, &IntegratorConfig::default()).unwrap();
    assert_eq!(d.cauchy_gaps, vec![0.0]);
}

#[test]
fn background_stays_confined_within_default_horizon() {
    let bg = vec![
        BackgroundVortex {
            position: c(1.0, 0.0),
            intensity: 1.0,
        },
        BackgroundVortex {
            position: c(-0.4, 0.9),
            intensity: -0.7,
        },
    ];
    let mut s = BurstScenario::new(&reference_triple(), bg, vec![1e-5], 1.0).unwrap();
    let t = burst::default_horizon(&s).unwrap().unwrap();
    s.horizon = 0.9 * t;
    let (traj, d) = burst::run_burst(&s, 1e-5, &IntegratorConfig::default()).unwrap();
    assert!(d.background_drift <= 0.5 * s.rho_sep);
    for st in &traj.samples {
        for k in 3..5 {
            assert!((st.z[k] - traj.samples[0].z[k]).norm() <= 0.5 * s.rho_sep);
        }
    }
    assert!(burst::default_horizon(&BurstScenario::new(&reference_triple(), vec![], vec![1e-5], 1.0).unwrap())
        .unwrap()
        .is_none());
}

#[test]
fn invalid_scenarios_are_rejected() {
    let tri = reference_triple();
    let near = vec![BackgroundVortex {
        position: c(0.2, 0.0),
        intensity: 1.0,
    }];
    assert!(BurstScenario::new(&tri, near, vec![1e-4], 1e-3).is_err());
    assert!(BurstScenario::new(&tri, vec![], vec![1e-4, 2e-4], 1e-3).is_err());
    assert!(BurstScenario::new(&tri, vec![], vec![1e-2], 1e-3).is_err());
    assert!(BurstScenario::new(&tri.negated(), vec![], vec![1e-4], 1e-3).is_err());
    let s = BurstScenario::new(&tri, vec![], vec![1e-4], 1e3).unwrap();
    assert!(matches!(
        burst::make_burst_initial(&s, 10.0),
        Err(burst::BurstError::Separation { .. })
    ));
    assert!(burst::convergence_study(&s, &IntegratorConfig::default()).is_err());
}

#[test]
fn scenario_file_round_trip() {
    let json = r#"{
        "triple": {"alpha": 1.0, "positions": [[0.5, 0.0], [-0.5, 0.0], [0.6032625978666540, -0.6942625194275073]],
                   "intensities": [1.0, 1.0, -0.4562350972273099]},
        "background": [{"position": [1.0, 0.0], "intensity": 1.0}],
        "t_ini": [1e-4, 5e-5],
        "horizon": 1e-3
    }"#;
    let f: ScenarioFile = serde_json::from_str(json).unwrap();
    let s = BurstScenario::from_file(&f).unwrap();
    assert_eq!(s.burst_site, c(0.0, 0.0));
    assert_eq!(s.rho_sep, burst::RHO_SEP);
    let back = BurstScenario::from_file(&serde_json::from_str(&serde_json::to_string(&s.to_file()).unwrap()).unwrap())
        .unwrap();
    for j in 0..3 {
        assert!((back.triple.a[j] - s.triple.a[j]).norm() < 1e-15);
    }
    assert!((back.motion.a_rate - s.motion.a_rate).abs() < 1e-15);
    assert_eq!((back.background, back.t_ini, back.horizon), (s.background, s.t_ini, s.horizon));
}
