use gsqg::search;
use gsqg::selfsimilar::{self, TripleConfig};
use gsqg::stability::{self, StabilityMatrix, EIG_TOL};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Centered burst triples passing Hypothesis A, drawn from the admissible
/// region found by the sweep.
fn passing_configs(n: usize, seed: u64) -> Vec<TripleConfig> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    while out.len() < n {
        let alpha = if rng.gen_bool(0.8) {
            rng.gen_range(0.98..1.95)
        } else {
            rng.gen_range(2.01..2.13)
        };
        let x = rng.gen_range(0.6..1.0);
        let Ok((_, raw)) = search::normalized_triple(x, alpha) else { continue };
        let Ok(rep) = stability::hypothesis_a_check(&raw) else { continue };
        if rep.pass {
            out.push(selfsimilar::center(&raw).unwrap());
        }
    }
    out
}

fn matrix_of(cfg: &TripleConfig) -> StabilityMatrix {
    let r = selfsimilar::selfsimilar_rate(cfg).unwrap();
    stability::l_matrix(cfg, r.a_rate, r.b_rate).unwrap()
}

fn multiset_gap(a: &[Complex64], b: &[Complex64]) -> f64 {
    let mut used = vec![false; b.len()];
    let mut worst: f64 = 0.0;
    for x in a {
        let (k, d) = b
            .iter()
            .enumerate()
            .filter(|(k, _)| !used[*k])
            .map(|(k, y)| (k, (x - y).norm()))
            .min_by(|p, q| p.1.total_cmp(&q.1))
            .unwrap();
        used[k] = true;
        worst = worst.max(d);
    }
    worst
}

#[test]
fn mu_roots_agree_with_eigensolver() {
    let mut worst: f64 = 0.0;
    for cfg in passing_configs(200, 21) {
        let m = matrix_of(&cfg);
        let (c1, c2) = stability::mu_coefficients(&m);
        let roots = stability::mu_roots(m.b_rate, c1, c2).unwrap();
        let ev = stability::eigen4(&m).unwrap();
        worst = worst.max(stability::eigen_mu_mismatch(&ev, m.a_rate, &roots));
        for e in ev {
            assert!((e.re + m.a_rate).abs() <= EIG_TOL);
        }
    }
    assert!(worst <= 1e-7, "{worst}");
}

#[test]
fn spectrum_is_conjugation_closed_with_trace() {
    for cfg in passing_configs(50, 22) {
        let m = matrix_of(&cfg);
        let ev = stability::eigen4(&m).unwrap();
        let conj: Vec<Complex64> = ev.iter().map(|e| e.conj()).collect();
        assert!(multiset_gap(&ev, &conj) <= 1e-10);
        let sum: Complex64 = ev.iter().sum();
        assert!((sum - c(-4.0 * m.a_rate, 0.0)).norm() <= 1e-10 * 4.0 * m.a_rate);
        let tr = gsqg::linalg::trace(&m.entries);
        assert!((tr - c(-4.0 * m.a_rate, 0.0)).norm() <= 1e-12);
    }
}

#[test]
fn coefficients_are_real_in_complex_arithmetic() {
    for cfg in passing_configs(30, 23) {
        let m = matrix_of(&cfg);
        let (c1, c2) = stability::mu_coefficients_complex(&m);
        let (r1, r2) = stability::mu_coefficients(&m);
        assert!(c1.im.abs() <= 1e-12 && c2.im.abs() <= 1e-12);
        assert!((c1.re - r1).abs() <= 1e-12 && (c2.re - r2).abs() <= 1e-12);
    }
}

#[test]
fn intensity_scaling_is_homogeneous() {
    for cfg in passing_configs(20, 24) {
        let m = matrix_of(&cfg);
        for lam in [0.3, 2.0, 7.5] {
            let mut s = cfg.clone();
            s.xi = cfg.xi.map(|v| v * lam);
            let ms = matrix_of(&s);
            assert!((ms.a_rate - lam * m.a_rate).abs() <= 1e-12 * lam);
            assert!((ms.b_rate - lam * m.b_rate).abs() <= 1e-12 * lam);
            for k in 0..4 {
                assert!((ms.off[k] - m.off[k] * lam).norm() <= 1e-12 * lam);
            }
            let (c1, c2) = stability::mu_coefficients(&ms);
            assert!(stability::mu_roots(ms.b_rate, c1, c2).is_ok());
        }
    }
}

#[test]
fn reference_matrix_real_parts() {
    let raw = search::normalized_triple(0.70190, 1.0).unwrap().1;
    let rep = stability::hypothesis_a_check(&raw).unwrap();
    assert!(rep.pass && rep.distinct && rep.eigen_ok);
    for e in &rep.eigenvalues {
        assert!((e[0] + rep.a).abs() <= 1e-8);
    }
}

#[test]
fn below_lower_threshold_fails() {
    let mut tried = 0;
    for k in 1..200 {
        let x = 0.005 * k as f64;
        let Ok((_, raw)) = search::normalized_triple(x, 0.9) else { continue };
        tried += 1;
        if let Ok(rep) = stability::hypothesis_a_check(&raw) {
            assert!(!rep.pass, "x={x}: {}", rep.details);
        }
    }
    assert!(tried > 50);
}

#[test]
fn equilateral_is_a_relative_equilibrium() {
    let w = Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI / 3.0);
    let cfg = TripleConfig::new([c(1.0, 0.0), w, w * w], [1.0; 3], 1.0).unwrap();
    let rep = stability::hypothesis_a_check(&cfg).unwrap();
    assert!(!rep.pass && !rep.a_positive && rep.selfsimilar_ok);
}

#[test]
fn decoupled_blocks_give_block_eigenvalues() {
    let (a, b) = (0.2, 1.1);
    let m = StabilityMatrix::from_parts(a, b, [c(0.5, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.3, 0.0)]);
    let (c1, c2) = stability::mu_coefficients(&m);
    assert!((c1 - 0.34).abs() < 1e-15 && (c2 - 0.0225).abs() < 1e-15);
    let roots = stability::mu_roots(b, c1, c2).unwrap();
    let ev = stability::eigen4(&m).unwrap();
    assert!(stability::eigen_mu_mismatch(&ev, a, &roots) < 1e-12);
    // one μ² per block: b² − |L|²
    let mut sq: Vec<f64> = roots.iter().map(|r| r * r).collect();
    sq.sort_by(f64::total_cmp);
    assert!((sq[0] - (b * b - 0.25)).abs() < 1e-12 && (sq[3] - (b * b - 0.09)).abs() < 1e-12);
}

#[test]
fn propagator_exponent_record() {
    let cfg = selfsimilar::center(&search::normalized_triple(0.70190, 1.0).unwrap().1).unwrap();
    let m = matrix_of(&cfg);
    assert!((stability::propagator_norm(&m, 1.0, 1.0).unwrap() - 1.0).abs() < 1e-12);
    // the norm never drops below the spectral-radius growth t^{−1/(4−α)}
    for k in 1..=6 {
        let t = 10f64.powi(-k);
        let n = stability::propagator_norm(&m, 1.0, t).unwrap();
        assert!(n >= t.powf(-1.0 / 3.0) * (1.0 - 1e-9), "t={t}: {n}");
    }
    assert!(stability::propagator_norm(&m, 1.0, 0.0).is_err());
    assert!(stability::propagator_norm(&m, 1.0, 1.5).is_err());
}
