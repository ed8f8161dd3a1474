//! Globally adaptive Gauss-Kronrod (10/21) quadrature over a list of
//! initial panels.
//!
//! Error estimates follow the QUADPACK `qk21` heuristic. Panels are bisected
//! worst-first until the summed error falls below `rel_tol` times the summed
//! `|f|` integral, or the panel budget is spent.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

#[allow(clippy::excessive_precision)]
const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];

#[allow(clippy::excessive_precision)]
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

#[allow(clippy::excessive_precision)]
const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_958_109_831_074,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Panel {
    pub a: f64,
    pub b: f64,
    pub value: f64,
    pub abs_value: f64,
    pub error: f64,
}

/// One 21-point Gauss-Kronrod panel on `[a, b]`.
pub fn gk21<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Panel {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut resk = fc * WGK[10];
    let mut resabs = resk.abs();
    let mut resg = 0.0;
    let mut fv1 = [0.0; 10];
    let mut fv2 = [0.0; 10];
    for j in 0..10 {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        fv1[j] = f1;
        fv2[j] = f2;
        resk += WGK[j] * (f1 + f2);
        resabs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            resg += WG[j / 2] * (f1 + f2);
        }
    }
    let reskh = 0.5 * resk;
    let mut resasc = WGK[10] * (fc - reskh).abs();
    for j in 0..10 {
        resasc += WGK[j] * ((fv1[j] - reskh).abs() + (fv2[j] - reskh).abs());
    }
    let value = resk * half;
    let abs_value = resabs * half.abs();
    let resasc = resasc * half.abs();
    let mut error = ((resk - resg) * half).abs();
    if resasc != 0.0 && error != 0.0 {
        error = resasc * (200.0 * error / resasc).powf(1.5).min(1.0);
    }
    if abs_value > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        error = error.max(50.0 * f64::EPSILON * abs_value);
    }
    if !value.is_finite() || !error.is_finite() {
        error = f64::INFINITY;
    }
    Panel {
        a,
        b,
        value,
        abs_value,
        error,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Integral {
    pub value: f64,
    pub abs_value: f64,
    pub error: f64,
    pub panels: usize,
    pub converged: bool,
}

impl Integral {
    pub fn zero() -> Self {
        Integral {
            converged: true,
            ..Default::default()
        }
    }

    pub fn add(self, other: Integral) -> Integral {
        Integral {
            value: self.value + other.value,
            abs_value: self.abs_value + other.abs_value,
            error: self.error + other.error,
            panels: self.panels + other.panels,
            converged: self.converged && other.converged,
        }
    }
}

struct Queued {
    error: f64,
    index: usize,
}

impl PartialEq for Queued {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Queued {}

impl PartialOrd for Queued {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Queued {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error
            .total_cmp(&other.error)
            .then_with(|| other.index.cmp(&self.index))
    }
}

/// Integrates `f` over the union of consecutive intervals given by
/// `breakpoints` (sorted, at least two entries).
pub fn integrate<F: Fn(f64) -> f64>(
    f: F,
    breakpoints: &[f64],
    rel_tol: f64,
    max_panels: usize,
) -> Integral {
    assert!(breakpoints.len() >= 2, "need at least one interval");
    let mut panels: Vec<Panel> = breakpoints
        .windows(2)
        .filter(|w| w[1] > w[0])
        .map(|w| gk21(&f, w[0], w[1]))
        .collect();
    if panels.is_empty() {
        return Integral::zero();
    }
    let mut heap: BinaryHeap<Queued> = panels
        .iter()
        .enumerate()
        .map(|(index, p)| Queued {
            error: p.error,
            index,
        })
        .collect();
    let mut err: f64 = panels.iter().map(|p| p.error).sum();
    let mut abs: f64 = panels.iter().map(|p| p.abs_value).sum();
    let budget = max_panels.max(panels.len());

    while err > rel_tol * abs && panels.len() < budget {
        let Some(worst) = heap.pop() else { break };
        let old = panels[worst.index];
        let mid = 0.5 * (old.a + old.b);
        if !(mid > old.a && mid < old.b) {
            // Panel cannot be split further in floating point.
            continue;
        }
        let left = gk21(&f, old.a, mid);
        let right = gk21(&f, mid, old.b);
        err += left.error + right.error - old.error;
        abs += left.abs_value + right.abs_value - old.abs_value;
        panels[worst.index] = left;
        heap.push(Queued {
            error: left.error,
            index: worst.index,
        });
        panels.push(right);
        heap.push(Queued {
            error: right.error,
            index: panels.len() - 1,
        });
    }

    // Sum in positional order so the result does not depend on refinement history.
    panels.sort_by(|x, y| x.a.total_cmp(&y.a));
    let value = panels.iter().map(|p| p.value).sum();
    let abs_value: f64 = panels.iter().map(|p| p.abs_value).sum();
    let error: f64 = panels.iter().map(|p| p.error).sum();
    Integral {
        value,
        abs_value,
        error,
        panels: panels.len(),
        converged: error <= rel_tol * abs_value,
    }
}

/// Breakpoints `[a, a + w, a + 2w, a + 4w, ...]` grading geometrically away
/// from `a`, capped at `b`.
pub fn graded_from(a: f64, b: f64, first_width: f64) -> Vec<f64> {
    let mut pts = vec![a];
    let mut w = first_width;
    while a + w < b {
        pts.push(a + w);
        w *= 2.0;
    }
    pts.push(b);
    pts
}

/// Evenly spaced breakpoints with spacing at most `width`.
pub fn uniform(a: f64, b: f64, width: f64) -> Vec<f64> {
    let count = ((b - a) / width).ceil().max(1.0) as usize;
    (0..=count)
        .map(|i| {
            if i == count {
                b
            } else {
                a + (b - a) * i as f64 / count as f64
            }
        })
        .collect()
}

/// Merges extra breakpoints strictly inside `[pts[0], pts[last]]`.
pub fn with_breaks(mut pts: Vec<f64>, extra: &[f64]) -> Vec<f64> {
    let lo = pts[0];
    let hi = pts[pts.len() - 1];
    for &x in extra {
        if x > lo && x < hi {
            pts.push(x);
        }
    }
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    pts
}
