use nalgebra::DMatrix;
use pileup::bounds::{quantile_init, solve_instance};
use pileup::continuum::{minimize_continuum, ContinuumOptions, GridSpec};
use pileup::discrete::NewtonOptions;
use pileup::kernelsplit::{discrepancy_norm, l_inner_product, split_kernel, SignedMeasureOnGrid};
use pileup::potentials::kernel::{k, k1};
use pileup::potentials::{make_potential, PotentialSpec};
use pileup::quad;
use pileup::scaling::frame_from_alpha;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn split_sums_to_kernel() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for sigma in [1e-3, 0.1, 0.5] {
        let s = split_kernel(sigma, 1.0).unwrap();
        for _ in 0..1000 {
            let x: f64 = rng.gen_range(-3.0..3.0);
            if x == 0.0 {
                continue;
            }
            let kv = k(x);
            assert!((s.l(x) + s.m(x) - kv).abs() <= 1e-14 * kv.max(1.0), "x={x}");
            assert!(s.m(x) >= 0.0);
            if x.abs() >= sigma {
                assert_eq!(s.m(x), 0.0);
            }
        }
        assert_eq!(s.l(2.0 * sigma), k(2.0 * sigma));
    }
}

#[test]
fn tangent_extension_values() {
    let s = split_kernel(0.1, 1.0).unwrap();
    let direct = k(0.1) - 0.1 * k1(0.1);
    assert!((s.l0() - direct).abs() < 1e-12);
    assert!((s.l(0.0) - direct).abs() < 1e-12);
    // convexity on (0, inf) at sampled triples
    for &(a, b) in &[(0.01, 0.3), (0.05, 0.09), (0.08, 0.2), (0.2, 1.5)] {
        let mid = 0.5 * (a + b);
        assert!(s.l(mid) <= 0.5 * (s.l(a) + s.l(b)) + 1e-15);
    }
}

#[test]
fn remainder_mass_and_tangent_height() {
    let mut prev = f64::INFINITY;
    for sigma in [1e-1, 1e-2, 1e-3] {
        let s = split_kernel(sigma, 1.0).unwrap();
        let im = s.m_integral();
        // oracle: adaptive quadrature of M over (0, sigma)
        let oracle = 2.0 * quad::adaptive(|x| s.m(x), 0.0, sigma, 1e-16, 1e-12).value;
        assert!((im - oracle).abs() <= 1e-9 * oracle, "{im} vs {oracle}");
        let c = im / (sigma * (sigma.ln().abs() + 1.0));
        assert!(c <= 4.0, "{c}");
        assert!(im < prev);
        prev = im;
    }
    let mut sigma: f64 = 1e-6;
    while sigma <= 0.5 {
        let s = split_kernel(sigma, 1.0).unwrap();
        assert!(s.l0() <= 3.0 * (sigma.ln().abs() + 1.0), "{sigma}");
        sigma *= 1.7;
    }
}

fn random_measure(rng: &mut ChaCha8Rng, grid: GridSpec) -> SignedMeasureOnGrid {
    let cells: Vec<f64> = (0..grid.m)
        .map(|i| if (grid.center(i)).abs() < 1.2 { rng.gen_range(-1.0..1.0) * grid.h() } else { 0.0 })
        .collect();
    let atoms = (0..rng.gen_range(0..4)).map(|_| (rng.gen_range(-1.0..1.0), rng.gen_range(-0.2..0.2))).collect();
    SignedMeasureOnGrid::new(grid, cells, atoms).unwrap()
}

#[test]
fn gram_matrix_is_positive_semidefinite() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let grid = GridSpec { x_lo: -2.0, x_hi: 2.0, m: 256 };
    for &(sigma, alpha) in &[(0.05, 1.0), (0.2, 8.0), (0.5, 20.0)] {
        let split = split_kernel(sigma, alpha).unwrap();
        let ms: Vec<SignedMeasureOnGrid> = (0..20).map(|_| random_measure(&mut rng, grid)).collect();
        let mut g = DMatrix::zeros(20, 20);
        for i in 0..20 {
            for j in 0..20 {
                g[(i, j)] = l_inner_product(&ms[i], &ms[j], &split).unwrap();
            }
        }
        assert!((&g - g.transpose()).amax() <= 1e-12 * g.amax());
        let min = g.clone().symmetric_eigenvalues().min();
        assert!(min >= -1e-8 * g.amax(), "sigma={sigma} alpha={alpha}: {min}");
    }
}

#[test]
fn inner_product_is_bilinear() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let grid = GridSpec { x_lo: -2.0, x_hi: 2.0, m: 128 };
    let split = split_kernel(0.1, 4.0).unwrap();
    let (a, b, c) = (random_measure(&mut rng, grid), random_measure(&mut rng, grid), random_measure(&mut rng, grid));
    let lhs = l_inner_product(&a.add(&b).unwrap(), &c, &split).unwrap();
    let rhs = l_inner_product(&a, &c, &split).unwrap() + l_inner_product(&b, &c, &split).unwrap();
    assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(1.0));
    let scaled = l_inner_product(&a.scaled(-2.5), &c, &split).unwrap();
    assert!((scaled + 2.5 * l_inner_product(&a, &c, &split).unwrap()).abs() <= 1e-12 * scaled.abs().max(1.0));
}

#[test]
fn zero_measure_has_zero_norm() {
    let grid = GridSpec { x_lo: -1.0, x_hi: 1.0, m: 64 };
    let nu = SignedMeasureOnGrid::new(grid, vec![0.0; 64], vec![]).unwrap();
    assert_eq!(l_inner_product(&nu, &nu, &split_kernel(0.1, 2.0).unwrap()).unwrap(), 0.0);
}

#[test]
fn quantile_samples_approach_the_density() {
    let q = make_potential(&PotentialSpec::Power { p: 2.0, reg_radius: 0.01 }).unwrap();
    let f0 = frame_from_alpha(64, 4.0, &q).unwrap();
    let (rho, _) = minimize_continuum(&f0, &ContinuumOptions::default()).unwrap();
    let mut prev = f64::INFINITY;
    for n in [64, 128, 256, 512] {
        let f = frame_from_alpha(n, 4.0, &q).unwrap();
        let x = quantile_init(&rho, n);
        let nu = SignedMeasureOnGrid::discrepancy(&x, &rho);
        assert!(nu.total_mass().abs() <= 1e-12);
        let rep = discrepancy_norm(&f, &x, &rho, None).unwrap();
        assert!(rep.norm_sq >= 0.0);
        assert!(rep.norm < prev, "n={n}: {} !< {prev}", rep.norm);
        prev = rep.norm;
    }
}

#[test]
fn discrepancy_bound_constant_is_stable() {
    let q = make_potential(&PotentialSpec::Power { p: 2.0, reg_radius: 0.01 }).unwrap();
    let mut cs = vec![];
    for n in [64, 128, 256, 512] {
        let f = frame_from_alpha(n, (n as f64).sqrt().ceil(), &q).unwrap();
        let inst = solve_instance(&f, &ContinuumOptions::default(), NewtonOptions::default()).unwrap();
        let rep = discrepancy_norm(&f, inst.xbar.positions(), &inst.rho, None).unwrap();
        assert!(rep.norm_sq >= -1e-10);
        cs.push(rep.constant);
    }
    let max = cs.iter().copied().fold(0.0, f64::max);
    println!("measured constants {cs:?}");
    assert!(max.is_finite() && max <= 10.0, "{cs:?}");
}
