use statrs::function::gamma::gamma;

/// Closed-form image of `|x|^{-theta}` at p = 2 for the unnormalised
/// operator: the classical multiplier divided by the usual normalising constant.
pub fn linear_power_image(n: f64, s: f64, theta: f64) -> f64 {
    let lambda = 4f64.powf(s) * gamma(0.5 * (theta + 2.0 * s)) * gamma(0.5 * (n - theta))
        / (gamma(0.5 * theta) * gamma(0.5 * (n - theta - 2.0 * s)));
    let c_ns =
        4f64.powf(s) * gamma(0.5 * n + s) / (std::f64::consts::PI.powf(0.5 * n) * gamma(-s).abs());
    lambda / c_ns
}
