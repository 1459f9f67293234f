use gsqg::kernel;
use gsqg::search::{self, Branch, ReducedParams, SweepParams, SweepStatus, Y_TOL};
use gsqg::selfsimilar;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn cardano_matches_newton() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for _ in 0..100 {
        let x = rng.gen_range(0.51..1.0);
        let a = search::y_from_x(x, 1.0, Y_TOL).unwrap();
        let b = search::cardano_y(x).unwrap();
        assert!((a - b).abs() <= 1e-10, "x={x}: {a} vs {b}");
    }
    let a = search::y_from_x(0.8, 1.0, Y_TOL).unwrap();
    assert!((a - search::cardano_y(0.8).unwrap()).abs() <= 1e-12);
}

#[test]
fn reference_side_length() {
    assert!((search::y_from_x(0.70190, 1.0, Y_TOL).unwrap() - 1.30353).abs() <= 5e-5);
    assert!((search::cardano_y(0.70190).unwrap() - 1.30353).abs() <= 5e-5);
    for alpha in [0.5, 1.0, 1.7, 2.4] {
        assert!((search::y_from_x(1.0, alpha, Y_TOL).unwrap() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn discriminant_lower_bound() {
    let n = 50_000;
    let min = (1..n)
        .map(|k| search::cardano_discriminant(0.5 + k as f64 * 1e-5))
        .fold(f64::INFINITY, f64::min);
    assert!(min >= 0.0515, "{min}");
}

#[test]
fn construction_identities() {
    let mut rng = ChaCha8Rng::seed_from_u64(32);
    let mut n = 0;
    while n < 100 {
        let alpha: f64 = rng.gen_range(0.5..2.9);
        if (alpha - 2.0).abs() < 0.01 {
            continue;
        }
        let x = rng.gen_range(0.3..1.0);
        let Ok((p, cfg)) = search::normalized_triple(x, alpha) else { continue };
        assert!(((cfg.a[0] - cfg.a[2]).norm() - p.x).abs() <= 1e-12);
        assert!(((cfg.a[1] - cfg.a[2]).norm() - p.y).abs() <= 1e-12);
        assert!((cfg.xi[2] + 1.0 / (p.x * p.x + p.y * p.y)).abs() < 1e-15);
        n += 1;
    }
    let eq = search::reduced_config(&ReducedParams {
        alpha: 1.4,
        x: 1.0,
        y: 1.0,
        branch: Branch::Upper,
    })
    .unwrap();
    assert!(eq.a[2].re.abs() < 1e-15 && eq.a[2].im > 0.0);
}

#[test]
fn admissibility_examples() {
    let at = search::admissible(0.70190, 1.0);
    assert!(at.admissible, "{}", at.reason);
    assert!(!search::admissible(0.05, 1.0).admissible);
    for k in 1..1000 {
        let x = k as f64 * 1e-3;
        assert!(!search::admissible(x, 0.9).admissible, "x={x}");
    }
}

fn admissible_points() -> Vec<(f64, f64)> {
    let mut pts = Vec::new();
    for alpha in [1.0, 1.25, 1.5, 1.75, 1.9, 2.05, 2.1] {
        let scan = search::x_interval(alpha, 1e-3, 1e-7).unwrap();
        let (lo, hi) = (scan.record.x_minus.unwrap(), scan.record.x_plus.unwrap());
        for k in 0..=10 {
            let x = lo + (hi - lo) * (0.05 + 0.09 * k as f64);
            if search::admissible(x, alpha).admissible {
                pts.push((x, alpha));
            }
        }
    }
    assert!(pts.len() > 50);
    pts
}

#[test]
fn admissible_configs_have_vanishing_invariants() {
    for (x, alpha) in admissible_points() {
        let (_, cfg) = search::normalized_triple(x, alpha).unwrap();
        let (h, l) = selfsimilar::check_h_l_zero(&cfg).unwrap();
        assert!(h.abs() <= 1e-10 && l.abs() <= 1e-10, "x={x} α={alpha}: {h} {l}");
    }
}

#[test]
fn burst_branch_and_its_mirror() {
    for (x, alpha) in admissible_points() {
        let (p, cfg) = search::normalized_triple(x, alpha).unwrap();
        let r = selfsimilar::selfsimilar_rate(&selfsimilar::center(&cfg).unwrap()).unwrap();
        assert!(r.a_rate > 0.0);
        // c_α changes sign at α = 2, and so does the burst branch
        if alpha < 2.0 {
            assert!(cfg.a[2].im < 0.0, "x={x} α={alpha}");
        } else {
            assert!(cfg.a[2].im > 0.0, "x={x} α={alpha}");
        }
        let flipped = search::reduced_config(&ReducedParams {
            branch: p.branch.flipped(),
            ..p
        })
        .unwrap();
        let rf = selfsimilar::selfsimilar_rate(&selfsimilar::center(&flipped).unwrap()).unwrap();
        assert!(rf.a_rate < 0.0);
        assert!((rf.a_rate.abs() - r.a_rate).abs() <= 1e-12);
    }
}

#[test]
fn condition_is_invariant_under_coupling_scale() {
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    let mut n = 0;
    let mut positives = 0;
    while n < 50 {
        let alpha: f64 = rng.gen_range(0.95..2.15);
        if (alpha - 2.0).abs() < 0.01 {
            continue;
        }
        let x = rng.gen_range(0.6..1.0);
        let c = kernel::coupling_constant(alpha).unwrap();
        let (Ok(p1), Ok(p2)) = (search::evaluate_point(x, alpha, c), search::evaluate_point(x, alpha, 2.0 * c)) else {
            continue;
        };
        assert_eq!(p1.margin > 0.0, p2.margin > 0.0, "x={x} α={alpha}");
        assert!((p2.a_rate - 2.0 * p1.a_rate).abs() <= 1e-12);
        positives += usize::from(p1.margin > 0.0);
        n += 1;
    }
    assert!(positives > 0);
}

#[test]
fn interval_examples() {
    let one = search::x_interval(1.0, 1e-4, 1e-7).unwrap().record;
    assert_eq!(one.status, SweepStatus::Interval);
    assert!(one.x_minus.unwrap() < 0.70190 && 0.70190 < one.x_plus.unwrap());
    for alpha in [0.9, 2.2] {
        let r = search::x_interval(alpha, 1e-4, 1e-7).unwrap().record;
        assert_eq!(r.status, SweepStatus::Empty, "α={alpha}");
        assert!(r.x_minus.is_none() && r.x_plus.is_none());
    }
    for alpha in [1.0, 1.25, 1.5, 1.75, 1.9, 2.05] {
        let r = search::x_interval(alpha, 1e-4, 1e-7).unwrap().record;
        assert_eq!(r.status, SweepStatus::Interval, "α={alpha}");
        let (lo, hi) = (r.x_minus.unwrap(), r.x_plus.unwrap());
        assert!(0.0 < lo && lo < hi && hi < 1.0);
    }
}

#[test]
fn boundaries_are_refined_to_tolerance() {
    let r = search::x_interval(1.5, 1e-3, 1e-9).unwrap().record;
    let (lo, hi) = (r.x_minus.unwrap(), r.x_plus.unwrap());
    assert!(search::admissible(lo + 1e-8, 1.5).admissible);
    assert!(!search::admissible(lo - 1e-8, 1.5).admissible);
    assert!(search::admissible(hi - 1e-8, 1.5).admissible);
    assert!(!search::admissible(hi + 1e-8, 1.5).admissible);
}

#[test]
fn curves_are_continuous() {
    let p = SweepParams {
        alpha_min: 1.0,
        alpha_max: 1.3,
        alpha_step: 1e-3,
        ..SweepParams::default()
    };
    let res = search::sweep(&p, None).unwrap();
    assert!(res.records.iter().all(|r| r.status == SweepStatus::Interval));
    assert!(res.disconnected.is_empty());
    for w in res.records.windows(2) {
        let d_lo = (w[0].x_minus.unwrap() - w[1].x_minus.unwrap()).abs();
        let d_hi = (w[0].x_plus.unwrap() - w[1].x_plus.unwrap()).abs();
        assert!(d_lo < 10.0 * p.coarse && d_hi < 10.0 * p.coarse, "α={}", w[1].alpha);
    }
    assert!(res.alpha_minus.is_none() && res.alpha_plus.is_none());
}

#[test]
fn sweep_is_deterministic_across_worker_counts() {
    let p = SweepParams {
        alpha_min: 1.99,
        alpha_max: 2.01,
        alpha_step: 1e-3,
        coarse: 1e-3,
        refine_tol: 1e-7,
        split_at_2: true,
    };
    let one = search::sweep(&p, Some(1)).unwrap();
    let many = search::sweep(&p, Some(4)).unwrap();
    assert_eq!(one, many);
    assert!(one.records.iter().all(|r| (r.alpha - 2.0).abs() > kernel::ALPHA_GUARD));
    assert!(one.records.windows(2).all(|w| w[1].alpha > w[0].alpha));
    let csv = search::sweep_csv(&one.records);
    assert_eq!(csv.lines().count(), one.records.len() + 1);
}

#[test]
fn sweep_brackets_the_upper_transition() {
    let p = SweepParams {
        alpha_min: 2.12,
        alpha_max: 2.15,
        alpha_step: 5e-3,
        coarse: 1e-3,
        refine_tol: 1e-7,
        split_at_2: true,
    };
    let res = search::sweep(&p, None).unwrap();
    let hi = res.alpha_plus.unwrap();
    let last_full = res.records.iter().rev().find(|r| r.status == SweepStatus::Interval).unwrap().alpha;
    assert!(hi >= last_full && hi <= last_full + p.alpha_step);
    assert!(res.alpha_minus.is_none());
}
