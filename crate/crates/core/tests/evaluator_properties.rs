use fplap_core::{eval_flap, ProblemParams, QuadratureConfig, RadialProfile};
use proptest::prelude::*;

fn pp(n: u32, s: f64, p: f64) -> ProblemParams {
    ProblemParams::new(n, s, p, 0.0, 0.0).unwrap()
}

fn scaled_values(prof: &RadialProfile, params: &ProblemParams, exponent: f64) -> Vec<f64> {
    let cfg = QuadratureConfig::default();
    [0.5, 1.0, 2.0, 4.0, 8.0]
        .iter()
        .map(|&r: &f64| {
            let res = eval_flap(prof, params, r, &cfg).unwrap();
            assert!(res.tolerance_met, "{prof:?} at r = {r}: {res:?}");
            r.powf(exponent) * res.value
        })
        .collect()
}

fn relative_spread(values: &[f64]) -> f64 {
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
    (max - min) / values.iter().map(|v| v.abs()).fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn power_images_are_homogeneous(
        n in 2u32..=4, s in 0.1f64..0.9, p in 1.3f64..3.5, frac in -0.8f64..0.9,
    ) {
        let params = pp(n, s, p);
        let theta = if frac >= 0.0 {
            frac * params.dim() / (p - 1.0)
        } else {
            frac * params.sp() / (p - 1.0)
        };
        prop_assume!(theta.abs() > 1e-3);
        let prof = RadialProfile::Power { theta };
        let values = scaled_values(&prof, &params, theta * (p - 1.0) + params.sp());
        prop_assert!(relative_spread(&values) < 10.0 * QuadratureConfig::default().rel_tol,
            "{params} theta {theta}: {values:?}");
    }
}

#[test]
fn negative_power_is_odd_and_homogeneous_in_eps() {
    let cfg = QuadratureConfig::default();
    for &(n, s, p, tb, eps) in &[(2u32, 0.5, 2.0, 0.4, 0.3), (3, 0.7, 1.5, 0.6, 2.5), (3, 0.4, 3.0, 0.2, 0.05)] {
        let params = pp(n, s, p);
        for &r in &[1.0, 3.0] {
            let unit = eval_flap(&RadialProfile::NegativePower { eps: 1.0, theta_bar: tb }, &params, r, &cfg).unwrap();
            let scaled = eval_flap(&RadialProfile::NegativePower { eps, theta_bar: tb }, &params, r, &cfg).unwrap();
            let mirror = eval_flap(&RadialProfile::Power { theta: -tb }, &params, r, &cfg).unwrap();
            let factor = eps.powf(p - 1.0);
            assert!((scaled.value - factor * unit.value).abs() <= scaled.error_estimate + factor * unit.error_estimate);
            assert!((unit.value + mirror.value).abs() <= unit.error_estimate + mirror.error_estimate);
            // f decreases, f(r) is below its neighbours far out: the image is positive.
            assert!(unit.value > 0.0);
        }
    }
}

#[test]
fn robust_to_diagonal_window_and_tail_cutoff() {
    let base = QuadratureConfig::default();
    let cases = [
        (pp(2, 0.5, 2.0), RadialProfile::Power { theta: 0.5 }, 1.0),
        (pp(3, 0.3, 1.5), RadialProfile::Power { theta: 3.0 }, 2.0),
        (pp(3, 0.6, 2.5), RadialProfile::TruncatedPower { theta: 1.0, eps0: 0.5 }, 1.5),
        (pp(2, 0.8, 3.0), RadialProfile::NegativePower { eps: 0.5, theta_bar: 0.7 }, 1.0),
    ];
    for (params, prof, r) in cases {
        let reference = eval_flap(&prof, &params, r, &base).unwrap();
        let halved = QuadratureConfig { delta_diag: 0.5 * base.delta_diag, ..base };
        let doubled = QuadratureConfig { lambda_tail: 2.0 * base.lambda_tail, ..base };
        for cfg in [halved, doubled] {
            let other = eval_flap(&prof, &params, r, &cfg).unwrap();
            assert!(
                (other.value - reference.value).abs() < reference.error_estimate,
                "{prof:?}: {} vs {} (err {})",
                other.value,
                reference.value,
                reference.error_estimate
            );
        }
    }
}
