//! Spherical reduction of the `N`-dimensional kernel `|x - y|^{-N-sp}` for
//! radial functions.
//!
//! For `x = r e` and `|y| = rho`, integrating the kernel over the sphere of
//! radius `rho` leaves `rho^{N-1} A(r, rho)` with
//!
//! ```text
//! A(r, rho) = |S^{N-2}| int_0^pi sin^{N-2}(phi) (r^2 + rho^2 - 2 r rho cos phi)^{-(N+sp)/2} dphi.
//! ```
//!
//! `A` is homogeneous of degree `-(N+sp)` and symmetric, so everything is
//! computed from `A(1, 1+h)` with `h in [-1, 0)` and cached on the bits of `h`.

use std::f64::consts::PI;
use std::sync::{Arc, OnceLock};

use dashmap::DashMap;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{self, Integral};
use crate::special::{beta, sphere_area};

/// Relative gap `|r - rho| / r` below which the kernel refuses to evaluate.
pub const DIAGONAL_THRESHOLD: f64 = 1e-12;

/// Relative tolerance of the angular quadrature.
const ANGULAR_REL_TOL: f64 = 1e-13;

/// Cache entries kept per kernel before the cache is flushed.
const CACHE_LIMIT: usize = 1 << 22;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AngularKernelSpec {
    n: u32,
    order: f64,
    angular_nodes: usize,
}

impl AngularKernelSpec {
    pub const MIN_ANGULAR_NODES: usize = 16;

    /// `order` is the homogeneity `N + sp`; `angular_nodes` is the panel
    /// budget of the adaptive angular rule.
    pub fn new(n: u32, order: f64, angular_nodes: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidParams {
                field: "n",
                reason: format!("kernel needs N >= 2, got {n}"),
            });
        }
        if !(order > f64::from(n) && order.is_finite()) {
            return Err(Error::InvalidParams {
                field: "order",
                reason: format!("order must exceed N = {n}, got {order}"),
            });
        }
        if angular_nodes < Self::MIN_ANGULAR_NODES {
            return Err(Error::InvalidParams {
                field: "angular_nodes",
                reason: format!(
                    "must be at least {}, got {angular_nodes}",
                    Self::MIN_ANGULAR_NODES
                ),
            });
        }
        Ok(AngularKernelSpec {
            n,
            order,
            angular_nodes,
        })
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn order(&self) -> f64 {
        self.order
    }

    pub fn sp(&self) -> f64 {
        self.order - f64::from(self.n)
    }

    pub fn angular_nodes(&self) -> usize {
        self.angular_nodes
    }
}

/// Evaluator for `A(1, 1+h)` with a concurrent value cache.
#[derive(Debug)]
pub struct RadialKernel {
    spec: AngularKernelSpec,
    lower_sphere: f64,
    half_order: f64,
    cache: DashMap<u64, f64>,
}

type Registry = DashMap<(u32, u64, usize), Arc<RadialKernel>>;

fn registry() -> &'static Registry {
    static REGISTRY: OnceLock<Registry> = OnceLock::new();
    REGISTRY.get_or_init(DashMap::new)
}

impl RadialKernel {
    pub fn new(spec: AngularKernelSpec) -> Self {
        RadialKernel {
            spec,
            lower_sphere: sphere_area(spec.n - 2),
            half_order: 0.5 * spec.order,
            cache: DashMap::new(),
        }
    }

    /// Process-wide kernel for `spec`, so repeated evaluations share a cache.
    pub fn shared(spec: AngularKernelSpec) -> Arc<RadialKernel> {
        let key = (spec.n, spec.order.to_bits(), spec.angular_nodes);
        registry()
            .entry(key)
            .or_insert_with(|| Arc::new(RadialKernel::new(spec)))
            .clone()
    }

    pub fn spec(&self) -> &AngularKernelSpec {
        &self.spec
    }

    /// `A(1, 1+h)` for `h in [-1, 0)`, i.e. the inner point at `tau = 1+h < 1`.
    pub fn inner(&self, h: f64) -> f64 {
        debug_assert!((-1.0..0.0).contains(&h), "inner kernel needs h in [-1, 0), got {h}");
        let key = h.to_bits();
        if let Some(v) = self.cache.get(&key) {
            return *v;
        }
        let value = self.angular_integral(h).value;
        if self.cache.len() >= CACHE_LIMIT {
            self.cache.clear();
        }
        self.cache.insert(key, value);
        value
    }

    /// `A(1, 1+h)` for any `h >= -1`, `h != 0`.
    pub fn unit(&self, h: f64) -> f64 {
        if h < 0.0 {
            self.inner(h)
        } else {
            // A(1, tau) = tau^{-order} A(1, 1/tau).
            let tau = 1.0 + h;
            tau.powf(-self.spec.order) * self.inner(-h / tau)
        }
    }

    /// Uncached angular integral with its quadrature error estimate.
    pub fn angular_integral(&self, h: f64) -> Integral {
        let tau = 1.0 + h;
        let h2 = h * h;
        let alpha = self.half_order;
        let k = self.spec.n as i32 - 2;
        let integrand = |phi: f64| {
            let half = (0.5 * phi).sin();
            let dist2 = h2 + 4.0 * tau * half * half;
            let weight = if k == 0 { 1.0 } else { phi.sin().powi(k) };
            weight * (-alpha * dist2.ln()).exp()
        };
        let width = if tau > 0.0 { h.abs() / tau.sqrt() } else { f64::INFINITY };
        let breaks = if width < 0.5 {
            quadrature::graded_from(0.0, PI, width)
        } else {
            quadrature::uniform(0.0, PI, PI / 4.0)
        };
        let mut out = quadrature::integrate(
            integrand,
            &breaks,
            ANGULAR_REL_TOL,
            self.spec.angular_nodes,
        );
        out.value *= self.lower_sphere;
        out.abs_value *= self.lower_sphere;
        out.error *= self.lower_sphere;
        out
    }

    /// Leading coefficient `c` in `A(1, 1 +- h) ~ c h^{-1-sp}`.
    pub fn diagonal_coefficient(&self) -> f64 {
        let n = f64::from(self.spec.n);
        let sp = self.spec.sp();
        self.lower_sphere * 0.5 * beta(0.5 * (n - 1.0), 0.5 * (1.0 + sp))
    }

    pub fn cached_entries(&self) -> usize {
        self.cache.len()
    }
}

/// `A(r, rho)` for `r, rho > 0` off the diagonal.
pub fn angular_kernel(spec: &AngularKernelSpec, r: f64, rho: f64) -> Result<f64> {
    if !(r > 0.0 && rho > 0.0 && r.is_finite() && rho.is_finite()) {
        return Err(Error::precondition(format!(
            "kernel radii must be positive and finite, got r={r}, rho={rho}"
        )));
    }
    let gap = (r - rho).abs() / r;
    if gap < DIAGONAL_THRESHOLD {
        return Err(Error::DiagonalKernel(gap));
    }
    let kernel = RadialKernel::shared(*spec);
    // Put the smaller radius inside so the cached argument lies in [-1, 0).
    let (outer, inner) = if rho < r { (r, rho) } else { (rho, r) };
    let h = (inner - outer) / outer;
    Ok(outer.powf(-spec.order) * kernel.inner(h))
}

/// Leading-order model `c r^{1-N} h^{-1-sp}` of `A(r, r +- h)` for `h << r`.
pub fn diagonal_asymptote(spec: &AngularKernelSpec, r: f64, h: f64) -> f64 {
    let kernel = RadialKernel::shared(*spec);
    let n = f64::from(spec.n);
    kernel.diagonal_coefficient() * r.powf(1.0 - n) * h.powf(-1.0 - spec.sp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn spec(n: u32, sp: f64) -> AngularKernelSpec {
        AngularKernelSpec::new(n, f64::from(n) + sp, 256).unwrap()
    }

    fn closed_form_n3(sp: f64, r: f64, rho: f64) -> f64 {
        // For N = 3 the angular integral is elementary.
        2.0 * PI / (r * rho * (1.0 + sp))
            * ((r - rho).abs().powf(-1.0 - sp) - (r + rho).powf(-1.0 - sp))
    }

    #[test]
    fn spec_validation() {
        assert!(AngularKernelSpec::new(1, 2.0, 64).is_err());
        assert!(AngularKernelSpec::new(2, 2.0, 64).is_err());
        assert!(AngularKernelSpec::new(2, 3.0, 15).is_err());
        assert!(AngularKernelSpec::new(2, 3.0, 16).is_ok());
    }

    #[test]
    fn origin_limit_is_full_sphere() {
        let s = spec(2, 1.0);
        let a = angular_kernel(&s, 1.0, 1e-9).unwrap();
        assert_relative_eq!(a, 2.0 * PI, max_relative = 1e-8);
        let k = RadialKernel::shared(s);
        assert_relative_eq!(k.inner(-1.0), 2.0 * PI, max_relative = 1e-13);
        let k3 = RadialKernel::shared(spec(3, 0.7));
        assert_relative_eq!(k3.inner(-1.0), 4.0 * PI, max_relative = 1e-13);
    }

    #[test]
    fn homogeneity_factor_two() {
        let s = spec(2, 1.0);
        let a = angular_kernel(&s, 1.0, 1.7).unwrap();
        let b = angular_kernel(&s, 2.0, 3.4).unwrap();
        assert_relative_eq!(b / a, 2f64.powf(-3.0), max_relative = 1e-12);
    }

    #[test]
    fn matches_n3_closed_form() {
        for &(sp, r, rho) in &[(1.5, 1.0, 2.0), (0.4, 1.0, 0.999), (1.2, 3.0, 0.1), (0.9, 1.0, 1.0 + 1e-6)] {
            let got = angular_kernel(&spec(3, sp), r, rho).unwrap();
            assert_relative_eq!(got, closed_form_n3(sp, r, rho), max_relative = 1e-10);
        }
    }

    #[test]
    fn matches_brute_force_reference() {
        // Composite Simpson on 10^6 uniform angular nodes.
        let (sp, r, rho) = (1.5, 1.0, 2.0);
        let alpha = 0.5 * (3.0 + sp);
        let m = 1_000_000usize;
        let step = PI / m as f64;
        let f = |phi: f64| phi.sin() * (r * r + rho * rho - 2.0 * r * rho * phi.cos()).powf(-alpha);
        let mut acc = f(0.0) + f(PI);
        for i in 1..m {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            acc += w * f(i as f64 * step);
        }
        let reference = 2.0 * PI * acc * step / 3.0;
        let got = angular_kernel(&spec(3, sp), r, rho).unwrap();
        assert_relative_eq!(got, reference, max_relative = 1e-10);
    }

    #[test]
    fn diagonal_is_rejected() {
        let s = spec(2, 1.0);
        assert!(matches!(
            angular_kernel(&s, 1.0, 1.0),
            Err(Error::DiagonalKernel(_))
        ));
        assert!(matches!(
            angular_kernel(&s, 1.0, 1.0 + 1e-13),
            Err(Error::DiagonalKernel(_))
        ));
        assert!(angular_kernel(&s, 1.0, 1.0 + 1e-10).is_ok());
    }

    #[test]
    fn asymptote_ratio_tends_to_one() {
        for &(n, sp) in &[(2, 1.0), (3, 0.5), (2, 0.3)] {
            let s = spec(n, sp);
            let mut prev = f64::INFINITY;
            for &h in &[1e-3, 1e-4, 1e-5] {
                let ratio = angular_kernel(&s, 1.0, 1.0 + h).unwrap() / diagonal_asymptote(&s, 1.0, h);
                let dev = (ratio - 1.0).abs();
                assert!(dev < 0.05, "N={n} sp={sp} h={h}: ratio {ratio}");
                assert!(dev <= prev, "ratio not approaching 1");
                prev = dev;
            }
        }
    }

    #[test]
    fn asymptote_scaling_matches_homogeneity() {
        let s = spec(3, 0.8);
        let r: f64 = 2.5;
        let h = 1e-4;
        let direct = diagonal_asymptote(&s, r, h);
        let scaled = r.powf(-s.order()) * diagonal_asymptote(&s, 1.0, h / r);
        assert_relative_eq!(direct, scaled, max_relative = 1e-13);
    }

    #[test]
    fn divergence_exponent_fit() {
        let s = spec(2, 1.0);
        let hs: Vec<f64> = (0..9).map(|i| 10f64.powf(-5.0 + 0.25 * i as f64)).collect();
        let xs: Vec<f64> = hs.iter().map(|h| h.ln()).collect();
        let ys: Vec<f64> = hs
            .iter()
            .map(|h| angular_kernel(&s, 1.0, 1.0 + h).unwrap().ln())
            .collect();
        let nx = xs.len() as f64;
        let mx = xs.iter().sum::<f64>() / nx;
        let my = ys.iter().sum::<f64>() / nx;
        let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
        let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
        let slope = sxy / sxx;
        assert!((slope + 2.0).abs() < 0.04, "slope {slope}");
    }

    #[test]
    fn increases_towards_diagonal() {
        let s = spec(3, 0.6);
        let below: Vec<f64> = [0.2, 0.5, 0.8, 0.95, 0.999]
            .iter()
            .map(|&rho| angular_kernel(&s, 1.0, rho).unwrap())
            .collect();
        assert!(below.windows(2).all(|w| w[0] < w[1]));
        let above: Vec<f64> = [1.001, 1.05, 1.2, 2.0]
            .iter()
            .map(|&rho| angular_kernel(&s, 1.0, rho).unwrap())
            .collect();
        assert!(above.windows(2).all(|w| w[0] > w[1]));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn symmetric_in_arguments(n in 2u32..5, sp in 0.1f64..1.9, r in 0.05f64..20.0, rho in 0.05f64..20.0) {
            prop_assume!((r - rho).abs() / r.min(rho) > 1e-6);
            let s = spec(n, sp);
            let a = angular_kernel(&s, r, rho).unwrap();
            let b = angular_kernel(&s, rho, r).unwrap();
            prop_assert!((a - b).abs() <= 1e-10 * a.abs());
        }

        #[test]
        fn homogeneous_of_degree_minus_order(n in 2u32..5, sp in 0.1f64..1.9, r in 0.1f64..5.0, rho in 0.1f64..5.0, which in 0usize..3) {
            prop_assume!((r - rho).abs() / r.min(rho) > 1e-6);
            let lam = [0.5, 2.0, 10.0][which];
            let s = spec(n, sp);
            let a = angular_kernel(&s, r, rho).unwrap();
            let b = angular_kernel(&s, lam * r, lam * rho).unwrap();
            let rescaled = b * lam.powf(s.order());
            prop_assert!((rescaled - a).abs() <= 1e-8 * a.abs());
        }
    }
}
