use pileup::analysis::{
    convolution_second_derivative, convolution_second_derivative_with_tol, fd_oracle, TestFunction,
};

fn interior_points(f: &TestFunction) -> Vec<f64> {
    let (a, b) = f.interval();
    [0.3, 0.4, 0.5, 0.6, 0.7].iter().map(|t| a + (b - a) * t).collect()
}

#[test]
fn identity_matches_difference_oracle() {
    let mut worst: f64 = 0.0;
    for f in TestFunction::catalog() {
        for alpha in [1.0, 4.0, 16.0] {
            for x in interior_points(&f) {
                let v = convolution_second_derivative(&f, alpha, x).unwrap();
                let o = fd_oracle(&f, alpha, x, 1e-3);
                let rel = (v - o).abs() / o.abs().max(1e-12);
                worst = worst.max(rel);
                assert!(rel <= 1e-4, "{} alpha={alpha} x={x}: {v} vs {o}", f.name());
            }
        }
    }
    println!("worst relative deviation {worst:e}");
}

#[test]
fn jumps_far_from_the_point_do_not_matter() {
    // jumps at +-1, point at 0.1: distance well above three times x's margin
    let f = TestFunction::Piecewise;
    for alpha in [1.0, 4.0] {
        let v = convolution_second_derivative(&f, alpha, 0.1).unwrap();
        let o = fd_oracle(&f, alpha, 0.1, 1e-3);
        assert!((v - o).abs() <= 1e-4 * o.abs());
    }
}

#[test]
fn tighter_tolerance_stays_within_error_estimate() {
    for f in TestFunction::catalog() {
        let x = interior_points(&f)[1];
        let coarse = convolution_second_derivative_with_tol(&f, 4.0, x, 1e-8).unwrap();
        let fine = convolution_second_derivative_with_tol(&f, 4.0, x, 5e-9).unwrap();
        assert!(
            (coarse.value - fine.value).abs() <= coarse.error.max(1e-13),
            "{}: {coarse:?} {fine:?}",
            f.name()
        );
    }
}

#[test]
fn large_alpha_affine_neighbourhood_vanishes() {
    let f = TestFunction::AffineWindow { c0: -0.5, c1: 2.0, half_width: 4.0 };
    for alpha in [8.0, 16.0, 64.0] {
        assert!(convolution_second_derivative(&f, alpha, -0.7).unwrap().abs() < 1e-9);
    }
}
