mod common;

use fplap_core::oracle::{grid_flap, mc_flap};
use fplap_core::{eval_flap, ProblemParams, QuadratureConfig, RadialProfile};

fn pp(n: u32, s: f64, p: f64) -> ProblemParams {
    ProblemParams::new(n, s, p, 0.0, 0.0).unwrap()
}

fn sample_cases() -> Vec<(ProblemParams, RadialProfile, f64)> {
    vec![
        (pp(2, 0.5, 2.0), RadialProfile::Power { theta: 0.5 }, 1.0),
        (pp(2, 0.5, 1.5), RadialProfile::Power { theta: 0.8 }, 1.0),
        (pp(3, 0.4, 3.0), RadialProfile::Power { theta: 0.4 }, 2.0),
        (pp(3, 0.5, 2.0), RadialProfile::TruncatedPower { theta: 1.5, eps0: 0.5 }, 1.5),
        (pp(2, 0.6, 1.5), RadialProfile::TruncatedPower { theta: 1.0, eps0: 0.5 }, 2.0),
        (pp(2, 0.7, 3.0), RadialProfile::NegativePower { eps: 0.5, theta_bar: 0.3 }, 1.0),
        (pp(3, 0.75, 1.5), RadialProfile::NegativePower { eps: 1.0, theta_bar: 0.5 }, 3.0),
        (pp(3, 0.3, 2.0), RadialProfile::Power { theta: -0.3 }, 1.0),
        (pp(2, 0.25, 3.0), RadialProfile::Power { theta: 0.6 }, 0.7),
        (pp(3, 0.6, 1.5), RadialProfile::Power { theta: 2.5 }, 1.0),
    ]
}

#[test]
fn monte_carlo_agrees_with_evaluator() {
    let cfg = QuadratureConfig::default();
    for (i, (params, prof, r)) in sample_cases().into_iter().enumerate() {
        let e = eval_flap(&prof, &params, r, &cfg).unwrap();
        let m = mc_flap(&prof, &params, r, 1_000_000, 100 + i as u64).unwrap();
        assert!(
            (e.value - m.value).abs() <= 3.0 * (m.stderr + e.error_estimate),
            "{params} {prof:?} r={r}: eval {} mc {} +- {}",
            e.value,
            m.value,
            m.stderr
        );
    }
}

#[test]
fn grid_agrees_with_evaluator_in_the_plane() {
    let cfg = QuadratureConfig::default();
    for (params, prof, r) in sample_cases().into_iter().filter(|c| c.0.n() == 2) {
        let e = eval_flap(&prof, &params, r, &cfg).unwrap();
        let g = grid_flap(&prof, &params, r, 1024, 1e-4).unwrap();
        assert!(
            (e.value - g.value).abs() <= 3.0 * (g.stderr + e.error_estimate),
            "{params} {prof:?}: eval {} grid {} +- {}",
            e.value,
            g.value,
            g.stderr
        );
    }
}

#[test]
fn monte_carlo_brackets_linear_closed_form() {
    let expect = common::linear_power_image(2.0, 0.5, 0.5);
    let m = mc_flap(&RadialProfile::Power { theta: 0.5 }, &pp(2, 0.5, 2.0), 1.0, 1_000_000, 3).unwrap();
    assert!((m.value - expect).abs() <= 3.0 * m.stderr, "{m:?} vs {expect}");
}

#[test]
fn standard_error_scales_like_inverse_square_root() {
    let prof = RadialProfile::Power { theta: 0.7 };
    let params = pp(3, 0.5, 2.5);
    let mean_stderr = |samples: u64| {
        (0..4u64)
            .map(|seed| mc_flap(&prof, &params, 1.0, samples, seed).unwrap().stderr)
            .sum::<f64>()
            / 4.0
    };
    let ratio = mean_stderr(100_000) / mean_stderr(1_000_000);
    assert!((ratio / 10f64.sqrt() - 1.0).abs() < 0.2, "ratio {ratio}");
}

#[test]
fn monte_carlo_is_odd_under_negation() {
    for &(n, s, p, tb, eps) in &[(2u32, 0.6, 2.0, 0.5, 0.4), (3, 0.5, 3.0, 0.3, 2.0)] {
        let params = pp(n, s, p);
        let neg = mc_flap(&RadialProfile::NegativePower { eps, theta_bar: tb }, &params, 1.0, 300_000, 9).unwrap();
        let pos = mc_flap(&RadialProfile::Power { theta: -tb }, &params, 1.0, 300_000, 10).unwrap();
        let factor = eps.powf(p - 1.0);
        assert!(
            (neg.value + factor * pos.value).abs() <= 3.0 * (neg.stderr + factor * pos.stderr),
            "{neg:?} vs {pos:?}"
        );
    }
}
