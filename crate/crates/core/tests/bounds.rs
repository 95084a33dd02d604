use pileup::bounds::{
    diagonal_energies, improvement_factor, quantile_points, robin_bracket, scale_constants, solve_discrete_given,
    solve_instance, sweep_stability, verify_theorems, Instance, RobinBracket, Tolerances,
};
use pileup::continuum::{minimize_continuum, ContinuumOptions};
use pileup::discrete::NewtonOptions;
use pileup::integrals::cell_self_interaction;
use pileup::potentials::{kernel::k, make_potential, ConfiningPotential, PotentialSpec};
use pileup::quad;
use pileup::scaling::{frame_from_alpha, make_frame};

fn quadratic() -> ConfiningPotential {
    make_potential(&PotentialSpec::Power { p: 2.0, reg_radius: 0.01 }).unwrap()
}

fn gap() -> ConfiningPotential {
    make_potential(&PotentialSpec::Gap { reg_radius: 0.01 }).unwrap()
}

fn instance(n: usize, alpha: f64, q: &ConfiningPotential) -> Instance {
    let f = frame_from_alpha(n, alpha, q).unwrap();
    solve_instance(&f, &ContinuumOptions::default(), NewtonOptions::default()).unwrap()
}

#[test]
fn potential_difference_has_the_right_sign() {
    let tol = Tolerances::default();
    for q in [quadratic(), gap()] {
        for alpha in [4.0, 16.0] {
            for n in [64, 256] {
                let r = verify_theorems(&instance(n, alpha, &q), &tol).unwrap();
                assert!(r.pass_sign && r.pass_raw_sign, "{} n={n} alpha={alpha}: {r:?}", q.name());
                assert!(r.fd - r.fc <= 1e-4 * r.fc.abs());
                assert_eq!(r.energy_diff, r.e_disc - r.e_cont);
                assert_eq!(r.potential_diff, r.f_disc - r.f_cont);
            }
        }
    }
}

#[test]
fn ratios_are_stable_when_n_doubles() {
    let tol = Tolerances::default();
    for q in [quadratic(), gap()] {
        let mut reps: Vec<_> = [64usize, 128, 256, 512]
            .iter()
            .map(|&n| verify_theorems(&instance(n, (n as f64).sqrt(), &q), &tol).unwrap())
            .collect();
        let s = sweep_stability(&mut reps, &tol);
        assert!(s.pass_e && s.pass_f, "{}: {s:?}", q.name());
        assert!(reps.iter().all(|r| r.pass_ratio == Some(true)));
        assert!(reps.iter().all(|r| r.a_scale <= 1.0));
    }
}

#[test]
fn quadratic_scale_constants() {
    let inst = instance(128, 8.0, &quadratic());
    let sc = scale_constants(&inst.frame, &inst.rho);
    assert!((sc.q2_sup - 6.0).abs() < 1e-12);
    assert!((sc.q_alpha - 7.0).abs() < 1e-12);
    // raw curvature term beta alpha^3/n ||Q''|| equals ||Q_alpha''||
    assert!((sc.raw_curvature - 6.0).abs() < 1e-9);
    let n = 128.0;
    let expect = (8.0 / n * (n / 8.0 * 7.0f64).ln()).min(1.0);
    assert!((sc.a_scale - expect).abs() < 1e-14);
}

#[test]
fn alpha_equal_to_n_scale() {
    let inst = instance(16, 16.0, &quadratic());
    let sc = scale_constants(&inst.frame, &inst.rho);
    assert!((sc.a_scale - 7f64.ln().min(1.0)).abs() < 1e-14);
}

#[test]
fn two_particle_smoke_case() {
    let r = verify_theorems(&instance(2, 1.0, &quadratic()), &Tolerances::default()).unwrap();
    assert!(r.pass_sign);
    assert!(r.pass_ratio.is_none());
}

#[test]
fn unconverged_inputs_are_refused() {
    let f = frame_from_alpha(64, 4.0, &quadratic()).unwrap();
    let (rho, crep) = minimize_continuum(&f, &ContinuumOptions::default()).unwrap();
    let mut inst = solve_discrete_given(&f, rho, crep, NewtonOptions::default()).unwrap();
    inst.discrete.grad_norm = 1.0;
    assert!(matches!(verify_theorems(&inst, &Tolerances::default()), Err(pileup::Error::Unconverged(_))));
}

#[test]
fn quantile_construction_properties() {
    let tol = 1e-10;
    for (q, alpha) in [(quadratic(), 8.0), (gap(), 16.0)] {
        let mut ratios = vec![];
        for n in [64, 128, 256, 512] {
            let inst = instance(n, alpha, &q);
            let xh = quantile_points(&inst.rho, n);
            assert_eq!(xh.len(), n + 1);
            for w in xh.windows(2) {
                let m = inst.rho.mass_between(w[0], w[1]);
                assert!((m - 1.0 / n as f64).abs() <= tol, "{m}");
                assert!(w[1] - w[0] >= 1.0 / (n as f64 * inst.rho.max_density()) * (1.0 - 1e-12));
            }
            for i in 0..=n {
                assert!((xh[i] + xh[n - i]).abs() <= 1e-6, "{} vs {}", xh[i], xh[n - i]);
            }
            let sc = scale_constants(&inst.frame, &inst.rho);
            let d = diagonal_energies(&xh, &inst.frame, sc.q_alpha);
            assert!(d.d_n <= 2.0 * d.d_phi, "{d:?}");
            ratios.push(d.d_phi / d.scale);
        }
        let max = ratios.iter().copied().fold(0.0, f64::max);
        let min = ratios.iter().copied().fold(f64::INFINITY, f64::min);
        assert!(max / min <= 10.0, "{ratios:?}");
    }
}

#[test]
fn single_cell_diagonal_energy() {
    let f = frame_from_alpha(4, 3.0, &quadratic()).unwrap();
    let l = 0.4;
    let d = diagonal_energies(&[0.0, l], &f, 7.0);
    let inner = |x: f64| quad::adaptive_piecewise(|y| 3.0 * k(3.0 * (x - y)), &[0.0, x, l], 1e-14, 1e-14).value;
    let oracle = 0.5 / (l * l) * quad::adaptive(inner, 0.0, l, 1e-13, 1e-13).value;
    assert!((d.d_phi - oracle).abs() <= 1e-8 * oracle, "{} vs {oracle}", d.d_phi);
    assert!((0.5 * cell_self_interaction(3.0, l) - oracle).abs() <= 1e-8 * oracle);
}

#[test]
fn quantile_start_energy_is_close_to_continuum() {
    let q = quadratic();
    let mut cs = vec![];
    for n in [64, 128, 256] {
        let inst = instance(n, 8.0, &q);
        let sc = scale_constants(&inst.frame, &inst.rho);
        let scale = 8.0 / n as f64 * (sc.q_alpha * n as f64 / 8.0).ln();
        cs.push((inst.discrete.energy - inst.continuum.energy) / scale);
    }
    assert!(cs.iter().all(|c| c.is_finite() && *c <= 1.0), "{cs:?}");
}

#[test]
fn robin_bracket_orders_and_beats_the_earlier_bound() {
    let q = quadratic();
    for n in [64, 256] {
        let (_, r) = robin_bracket(n, 1.0, &q, &ContinuumOptions::default(), NewtonOptions::default()).unwrap();
        let b = r.bracket;
        assert!(b.ordered && b.lower <= b.upper, "{r:?}");
        assert!((b.width() - b.width_decomposition()).abs() <= 1e-12 * b.width().abs().max(1.0));
        if n >= 256 {
            assert!(r.magnitude_ratio <= 1.0, "{r:?}");
        }
    }
    let b = RobinBracket::new(7, 3.5, 4.0);
    assert_eq!(b.lower, -4.0 / 6.0);
    assert_eq!(b.upper, -0.5);
}

#[test]
fn improvement_factor_closed_forms() {
    let lin = make_potential(&PotentialSpec::Power { p: 1.0, reg_radius: 0.0 }).unwrap();
    let e = std::f64::consts::E;
    let f_e = improvement_factor(e, &lin).unwrap();
    assert!((f_e - ((2.0 * e).sqrt() / e).sqrt()).abs() < 1e-12);
    let mut prev = f64::INFINITY;
    for n in (16..4096).step_by(37) {
        let nf = n as f64;
        let v = improvement_factor(nf, &lin).unwrap();
        assert!((v - ((2.0 * nf).sqrt() * nf.ln() / nf).sqrt()).abs() < 1e-12);
        assert!(v < prev);
        prev = v;
    }
    // growth extremes: exponential growth sits near sqrt(log n / n), linear near sqrt(log n / sqrt n)
    let exp = make_potential(&PotentialSpec::ExpPower { p: 1.0, reg_radius: 0.01 }).unwrap();
    let n: f64 = 1e6;
    let lo = (n.ln() / n).sqrt();
    let hi = (n.ln() / n.sqrt()).sqrt();
    let fe = improvement_factor(n, &exp).unwrap();
    let fl = improvement_factor(n, &lin).unwrap();
    assert!(lo <= fe && fe < fl && fl <= 2.0 * hi, "{lo} {fe} {fl} {hi}");
    assert!(improvement_factor(1.0, &lin).is_err());
}

#[test]
fn beta_mode_uses_the_same_pipeline() {
    let q = quadratic();
    let f = make_frame(256, 1.0, &q).unwrap();
    let g = frame_from_alpha(256, f.alpha, &q).unwrap();
    assert!((f.gamma - g.gamma).abs() <= 1e-12 * f.gamma);
}
