use pileup::analysis::fd_check_gradient;
use pileup::discrete::{self, NewtonOptions};
use pileup::potentials::{make_potential, ConfiningPotential, PotentialSpec};
use pileup::scaling::frame_from_alpha;
use proptest::prelude::*;

fn quadratic() -> ConfiningPotential {
    make_potential(&PotentialSpec::Power { p: 2.0, reg_radius: 0.01 }).unwrap()
}

/// `E_n^alpha` for `Q_alpha(x) = 3 x^2`, written from the definition.
fn oracle_energy(alpha: f64, x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mut pair = 0.0;
    for i in 0..x.len() {
        for j in 0..x.len() {
            if i != j {
                let d = x[i] - x[j];
                if d == 0.0 {
                    return f64::INFINITY;
                }
                pair += -alpha * (alpha * d).tanh().abs().ln();
            }
        }
    }
    pair / (2.0 * n * (n - 1.0)) + x.iter().map(|v| 3.0 * v * v).sum::<f64>() / n
}

fn golden<F: FnMut(f64) -> f64>(mut f: F, mut a: f64, mut b: f64) -> f64 {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    for _ in 0..100 {
        if f(c) < f(d) {
            b = d;
        } else {
            a = c;
        }
        c = b - r * (b - a);
        d = a + r * (b - a);
    }
    0.5 * (a + b)
}

/// Ordered grid search (coarse `1e-2`, then `1e-3` around the best point),
/// followed by coordinate-wise golden-section sweeps.
fn brute_force(alpha: f64, n: usize) -> f64 {
    let lim = 1.5;
    let mut best = (f64::INFINITY, vec![0.0; n]);
    let coarse = |step: f64, lo: &[f64], hi: &[f64], best: &mut (f64, Vec<f64>)| {
        let counts: Vec<usize> = lo.iter().zip(hi).map(|(l, h)| ((h - l) / step).round() as usize + 1).collect();
        let mut idx = vec![0usize; n];
        loop {
            let x: Vec<f64> = (0..n).map(|k| lo[k] + idx[k] as f64 * step).collect();
            if x.windows(2).all(|w| w[1] > w[0]) {
                let e = oracle_energy(alpha, &x);
                if e < best.0 {
                    *best = (e, x);
                }
            }
            let mut k = 0;
            loop {
                idx[k] += 1;
                if idx[k] < counts[k] {
                    break;
                }
                idx[k] = 0;
                k += 1;
                if k == n {
                    return;
                }
            }
        }
    };
    coarse(1e-2, &vec![-lim; n], &vec![lim; n], &mut best);
    let center = best.1.clone();
    let lo: Vec<f64> = center.iter().map(|c| c - 2e-2).collect();
    let hi: Vec<f64> = center.iter().map(|c| c + 2e-2).collect();
    coarse(1e-3, &lo, &hi, &mut best);
    let mut x = best.1;
    for _ in 0..200 {
        for k in 0..n {
            let lo = if k == 0 { x[k] - 0.05 } else { x[k - 1] + 1e-9 };
            let hi = if k == n - 1 { x[k] + 0.05 } else { x[k + 1] - 1e-9 };
            let (lo, hi) = (lo.max(x[k] - 0.05), hi.min(x[k] + 0.05));
            let mut y = x.clone();
            x[k] = golden(
                |t| {
                    y[k] = t;
                    oracle_energy(alpha, &y)
                },
                lo,
                hi,
            );
        }
    }
    oracle_energy(alpha, &x)
}

#[test]
fn solver_matches_brute_force() {
    let q = quadratic();
    for n in [2, 3] {
        for alpha in [1.0, 4.0] {
            let f = frame_from_alpha(n, alpha, &q).unwrap();
            let (_, rep) = discrete::minimize(&f, None, NewtonOptions::default()).unwrap();
            let oracle = brute_force(alpha, n);
            assert!((rep.energy - oracle).abs() <= 1e-6, "n={n} alpha={alpha}: {} vs {oracle}", rep.energy);
            assert!(rep.energy <= oracle + 1e-12);
        }
    }
}

#[test]
fn two_particle_gap_equation() {
    let f = frame_from_alpha(2, 1.0, &quadratic()).unwrap();
    let (x, rep) = discrete::minimize(&f, None, NewtonOptions::default()).unwrap();
    let p = x.positions();
    let d = p[1] - p[0];
    let residual = (2.0 * d).sinh() - 2.0 / (3.0 * d);
    assert!(residual.abs() <= 1e-6, "{residual}");
    assert!((d - 0.527).abs() < 1e-3, "{d}");
    assert!((p[0] + p[1]).abs() < 1e-10);
    // F = E - (Q_alpha(x1) + Q_alpha(x2))/4
    let e = oracle_energy(1.0, p);
    let f_direct = e - 0.25 * (3.0 * p[0] * p[0] + 3.0 * p[1] * p[1]);
    assert!((rep.f_alpha - f_direct).abs() < 1e-12);
    assert!((rep.f_raw - f.gamma * rep.f_alpha).abs() < 1e-12 * rep.f_raw.abs());
}

#[test]
fn three_particles_center_on_origin() {
    for alpha in [1.0, 4.0, 9.0] {
        let f = frame_from_alpha(3, alpha, &quadratic()).unwrap();
        let (x, _) = discrete::minimize(&f, None, NewtonOptions::default()).unwrap();
        assert!(x.positions()[1].abs() < 1e-9);
    }
}

#[test]
fn energy_trace_is_monotone_and_ordering_kept() {
    let f = frame_from_alpha(40, 6.0, &quadratic()).unwrap();
    let init: Vec<f64> = (0..40).map(|i| -0.2 + 0.01 * i as f64 + 1e-4 * (i * i) as f64).collect();
    let (x, rep) = discrete::minimize(&f, Some(&init), NewtonOptions::default()).unwrap();
    assert!(rep.energy_trace.windows(2).all(|w| w[1] <= w[0] + 1e-15 * w[0].abs()));
    assert!(x.positions().windows(2).all(|w| w[1] > w[0]));
    assert!(rep.grad_norm <= rep.tol_g);
    assert!(0.5 * rep.energy <= rep.f_alpha && rep.f_alpha <= rep.energy);
}

#[test]
fn reflected_start_gives_the_same_energy() {
    let q = make_potential(&PotentialSpec::Gap { reg_radius: 0.01 }).unwrap();
    let f = frame_from_alpha(30, 5.0, &q).unwrap();
    let init: Vec<f64> = (0..30).map(|i| -0.5 + 0.04 * i as f64 + 0.001 * (i as f64).sqrt()).collect();
    let refl: Vec<f64> = init.iter().rev().map(|v| -v).collect();
    let (_, a) = discrete::minimize(&f, Some(&init), NewtonOptions::default()).unwrap();
    let (_, b) = discrete::minimize(&f, Some(&refl), NewtonOptions::default()).unwrap();
    assert!((a.energy - b.energy).abs() <= 1e-10 * a.energy);
}

#[test]
fn invalid_start_is_a_domain_error() {
    let f = frame_from_alpha(3, 2.0, &quadratic()).unwrap();
    assert!(discrete::minimize(&f, Some(&[0.0, 0.0, 1.0]), NewtonOptions::default()).is_err());
    assert!(discrete::minimize(&f, Some(&[0.0, 1.0]), NewtonOptions::default()).is_err());
}

#[test]
fn iteration_cap_reports_best_iterate() {
    let f = frame_from_alpha(50, 7.0, &quadratic()).unwrap();
    let opts = NewtonOptions { tol_g: Some(1e-300), max_iter: 2 };
    match discrete::minimize(&f, None, opts) {
        Err(pileup::Error::NonConvergence { best, .. }) => assert_eq!(best.len(), 50),
        other => panic!("expected non-convergence, got {other:?}"),
    }
}

fn sorted_spread(raw: Vec<f64>) -> Vec<f64> {
    let mut x = raw;
    x.sort_by(f64::total_cmp);
    for i in 1..x.len() {
        if x[i] < x[i - 1] + 0.02 {
            x[i] = x[i - 1] + 0.02;
        }
    }
    x
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn gradient_matches_finite_differences(pts in proptest::collection::vec(-1.0f64..1.0, 5), alpha in 1.0f64..10.0) {
        let x = sorted_spread(pts);
        let f = frame_from_alpha(5, alpha, &quadratic()).unwrap();
        let g = discrete::gradient(&f, &x).unwrap();
        let dev = fd_check_gradient(|y| discrete::energy(&f, y).unwrap(), g.as_slice(), &x);
        prop_assert!(dev <= 1e-6, "{dev:e}");
    }

    #[test]
    fn hessian_is_positive_semidefinite(pts in proptest::collection::vec(-1.0f64..1.0, 8), alpha in 1.0f64..20.0, gap in any::<bool>()) {
        let spec = if gap { PotentialSpec::Gap { reg_radius: 0.01 } } else { PotentialSpec::Power { p: 2.0, reg_radius: 0.01 } };
        let q = make_potential(&spec).unwrap();
        let x = sorted_spread(pts);
        let f = frame_from_alpha(8, alpha, &q).unwrap();
        let (_, h) = discrete::gradient_hessian(&f, &x).unwrap();
        prop_assert!((&h - h.transpose()).amax() == 0.0);
        let min = h.symmetric_eigenvalues().min();
        prop_assert!(min >= -1e-10 * h.amax().max(1.0), "{min}");
    }

    #[test]
    fn symmetric_configurations_have_odd_gradients(half in proptest::collection::vec(0.05f64..1.0, 3), alpha in 1.0f64..10.0) {
        let h = sorted_spread(half);
        let mut x: Vec<f64> = h.iter().rev().map(|v| -v).collect();
        x.extend(h.iter().copied());
        let f = frame_from_alpha(6, alpha, &quadratic()).unwrap();
        let g = discrete::gradient(&f, &x).unwrap();
        for i in 0..6 {
            prop_assert!((g[i] + g[5 - i]).abs() <= 1e-12 * g.amax().max(1.0));
        }
    }

    #[test]
    fn symmetric_start_beats_small_translations(t in prop_oneof![-0.05f64..-1e-3, 1e-3f64..0.05]) {
        let f = frame_from_alpha(6, 3.0, &quadratic()).unwrap();
        let x = discrete::uniform_init(6);
        let e0 = discrete::energy(&f, &x).unwrap();
        let shifted: Vec<f64> = x.iter().map(|v| v + t).collect();
        prop_assert!(discrete::energy(&f, &shifted).unwrap() >= e0);
    }
}
