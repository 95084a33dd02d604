use pileup::discrete;
use pileup::potentials::{make_potential, InteractionKernel, PotentialSpec};
use pileup::scaling::{frame_from_alpha, make_frame, rescale_energy_identity};
use proptest::prelude::*;

fn ordered(raw: Vec<f64>) -> Vec<f64> {
    let mut x = raw;
    x.sort_by(f64::total_cmp);
    for i in 1..x.len() {
        if x[i] <= x[i - 1] + 1e-3 {
            x[i] = x[i - 1] + 1e-3;
        }
    }
    x
}

/// `I_n^D(a) = n/(n-1) sum_{i != j} K(a_i - a_j) + 2 beta sum Q(a_i)`, written out directly.
fn raw_energy_oracle(a: &[f64], beta: f64, q: impl Fn(f64) -> f64) -> f64 {
    let n = a.len() as f64;
    let mut pair = 0.0;
    for (i, ai) in a.iter().enumerate() {
        for (j, aj) in a.iter().enumerate() {
            if i != j {
                pair += -((ai - aj).tanh().abs().ln());
            }
        }
    }
    n / (n - 1.0) * pair + 2.0 * beta * a.iter().map(|&x| q(x)).sum::<f64>()
}

#[test]
fn beta_and_alpha_frames_agree() {
    let q = make_potential(&PotentialSpec::Power { p: 2.0, reg_radius: 0.01 }).unwrap();
    let f = make_frame(9, 1.0, &q).unwrap();
    assert!((f.alpha - 3.0).abs() < 1e-12);
    assert!((f.gamma - 54.0).abs() < 1e-10);
    let g = frame_from_alpha(9, f.alpha, &q).unwrap();
    assert!((g.beta - 1.0).abs() < 1e-12);
}

#[test]
fn kernel_scaling_matches_definition() {
    for (alpha, x) in [(1.0, 0.3), (4.0, 0.3), (16.0, -0.05)] {
        let v = InteractionKernel.scaled(alpha, x).unwrap();
        let direct = -alpha * (alpha * x).tanh().abs().ln();
        assert!((v - direct).abs() < 1e-13 * direct);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn raw_and_rescaled_energies_correspond(
        pts in proptest::collection::vec(-1.5f64..1.5, 2..12),
        alpha in 2.0f64..30.0,
        p in prop_oneof![Just(2.0), Just(4.0)],
    ) {
        let q = make_potential(&PotentialSpec::Power { p, reg_radius: 0.01 }).unwrap();
        let x = ordered(pts);
        let f = frame_from_alpha(x.len(), alpha, &q).unwrap();
        let e = discrete::energy(&f, &x).unwrap();
        let a: Vec<f64> = x.iter().map(|v| alpha * v).collect();
        let raw = raw_energy_oracle(&a, f.beta, |t| t.abs().powf(p));
        prop_assert!((f.gamma * e - raw).abs() <= 1e-12 * raw.abs(), "{} vs {}", f.gamma * e, raw);
        let (lib_raw, lib_scaled) = rescale_energy_identity(&f, &x).unwrap();
        prop_assert!((lib_raw - lib_scaled).abs() <= 1e-12 * lib_raw.abs());
    }
}
