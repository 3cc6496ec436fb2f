//! Real-line quadrature used by the direct-integral routes.
//!
//! Three layers:
//! - [`gauss_kronrod`]: globally adaptive 10/21-point Gauss–Kronrod on a
//!   finite interval (QUADPACK QAG strategy, error rescaling included).
//! - [`integrate_log_window`]: integrals of strictly positive integrands
//!   supplied as a log-density `v -> ln g(v)`, where the effective support is
//!   found by scanning outward from a starting point. The integrand is
//!   rescaled by its peak before summation so values far below `f64::MIN_POSITIVE`
//!   are still resolved to full relative precision.
//! - [`gauss_legendre`]: node/weight generation for the fixed-panel rules used
//!   on Mellin–Barnes contours.

use std::collections::BinaryHeap;

use crate::error::{Error, Result};

/// A quadrature result with an absolute error estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
}

/// A positive quantity carried as its natural logarithm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogEstimate {
    pub ln_value: f64,
    /// Relative error of `exp(ln_value)`.
    pub rel_error: f64,
}

impl LogEstimate {
    pub fn value(&self) -> f64 {
        self.ln_value.exp()
    }

    pub fn abs_error(&self) -> f64 {
        self.value() * self.rel_error
    }
}

const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689,
    0.973_906_528_517_171_720_077_964_012_084,
    0.930_157_491_355_708_226_001_207_180_059_5,
    0.865_063_366_688_984_510_732_096_688_423_5,
    0.780_817_726_586_416_897_063_717_578_345,
    0.679_409_568_299_024_406_234_327_365_114_9,
    0.562_757_134_668_604_683_339_000_099_272_7,
    0.433_395_394_129_247_190_799_265_943_165_8,
    0.294_392_862_701_460_198_131_126_603_103_9,
    0.148_874_338_981_631_210_884_826_001_129_7,
    0.0,
];

const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_19,
    0.032_558_162_307_964_727_478_818_972_459_39,
    0.054_755_896_574_351_996_031_381_300_244_58,
    0.075_039_674_810_919_952_767_043_140_916_19,
    0.093_125_454_583_697_605_535_065_465_083_37,
    0.109_387_158_802_297_641_899_210_590_325_8,
    0.123_491_976_262_065_851_077_600_525_318,
    0.134_709_217_311_473_325_928_054_001_771_7,
    0.142_775_938_577_060_080_797_094_273_138_7,
    0.147_739_104_901_338_491_374_841_515_972_1,
    0.149_445_554_002_916_905_664_936_468_389_8,
];

// 10-point Gauss weights for XGK[1], XGK[3], .., XGK[9].
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_33,
    0.149_451_349_150_580_593_145_776_339_657_7,
    0.219_086_362_515_982_043_995_534_934_228_2,
    0.269_266_719_309_996_355_091_226_921_569_5,
    0.295_524_224_714_752_870_173_892_994_651_3,
];

fn qk21<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut res_k = fc * WGK[10];
    let mut res_g = 0.0;
    let mut res_abs = res_k.abs();
    let mut fv1 = [0.0; 10];
    let mut fv2 = [0.0; 10];
    for j in 0..10 {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        fv1[j] = f1;
        fv2[j] = f2;
        res_k += WGK[j] * (f1 + f2);
        res_abs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            res_g += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = 0.5 * res_k;
    let mut res_asc = WGK[10] * (fc - mean).abs();
    for j in 0..10 {
        res_asc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let result = res_k * half;
    let res_abs = res_abs * half.abs();
    let res_asc = res_asc * half.abs();
    let mut err = ((res_k - res_g) * half).abs();
    if res_asc != 0.0 && err != 0.0 {
        err = res_asc * (200.0 * err / res_asc).powf(1.5).min(1.0);
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * res_abs);
    }
    (result, err)
}

struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Globally adaptive Gauss–Kronrod (10/21) integration of `f` over `[a, b]`.
///
/// Stops when the summed error estimate is below `max(abs_tol, rel_tol·|I|)`.
pub fn gauss_kronrod<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
) -> Result<Estimate> {
    gauss_kronrod_breaks(f, &[a, b], abs_tol, rel_tol)
}

/// As [`gauss_kronrod`], with the initial partition given by sorted `breaks`.
pub fn gauss_kronrod_breaks<F: Fn(f64) -> f64>(
    f: F,
    breaks: &[f64],
    abs_tol: f64,
    rel_tol: f64,
) -> Result<Estimate> {
    const MAX_SEGMENTS: usize = 4000;
    if breaks.len() < 2 {
        return Ok(Estimate { value: 0.0, error: 0.0 });
    }
    let mut heap = BinaryHeap::new();
    let mut total = 0.0;
    let mut total_err = 0.0;
    for w in breaks.windows(2) {
        if w[1] <= w[0] {
            continue;
        }
        let (value, error) = qk21(&f, w[0], w[1]);
        total += value;
        total_err += error;
        heap.push(Segment { a: w[0], b: w[1], value, error });
    }
    if !total.is_finite() || !total_err.is_finite() {
        return Err(Error::NoConvergence {
            what: "gauss-kronrod: non-finite integrand",
            estimate: total,
            error: total_err,
        });
    }
    // Requests below the per-panel roundoff floor cannot be met.
    let rel_tol = rel_tol.max(64.0 * f64::EPSILON);
    while total_err > abs_tol.max(rel_tol * total.abs()) {
        if heap.len() >= MAX_SEGMENTS {
            return Err(Error::NoConvergence {
                what: "gauss-kronrod: subdivision limit",
                estimate: total,
                error: total_err,
            });
        }
        let worst = heap.pop().expect("heap is non-empty");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // Interval at machine resolution: keep what we have.
            heap.push(worst);
            break;
        }
        let (v1, e1) = qk21(&f, worst.a, mid);
        let (v2, e2) = qk21(&f, mid, worst.b);
        total += v1 + v2 - worst.value;
        total_err += e1 + e2 - worst.error;
        heap.push(Segment { a: worst.a, b: mid, value: v1, error: e1 });
        heap.push(Segment { a: mid, b: worst.b, value: v2, error: e2 });
    }
    // Re-sum to shed drift from the running updates.
    let (value, error) = heap
        .iter()
        .fold((0.0, 0.0), |(v, e), s| (v + s.value, e + s.error));
    Ok(Estimate { value, error })
}

/// Options for [`integrate_log_window`].
#[derive(Debug, Clone, Copy)]
pub struct WindowOptions {
    /// Scan step in the integration variable.
    pub step: f64,
    /// Drop below the running peak (in nats) at which the scan stops.
    pub depth: f64,
    /// Hard cap on scan steps per side.
    pub max_steps: usize,
    pub rel_tol: f64,
}

impl Default for WindowOptions {
    fn default() -> Self {
        Self {
            step: 0.5,
            depth: 60.0,
            max_steps: 6000,
            rel_tol: 1e-11,
        }
    }
}

fn sanitize(v: f64) -> f64 {
    if v.is_nan() {
        f64::NEG_INFINITY
    } else {
        v
    }
}

/// Integrate `exp(log_f(v))` over the whole real line.
///
/// `log_f` must be unimodal-ish: the support is located by scanning from
/// `start` in steps of `opts.step` until the log-integrand has fallen
/// `opts.depth` nats below the largest value seen, on both sides.
pub fn integrate_log_window<F: Fn(f64) -> f64>(
    log_f: F,
    start: f64,
    opts: WindowOptions,
) -> Result<LogEstimate> {
    let lf = |v: f64| sanitize(log_f(v));
    let h = opts.step;

    // Scan outward; `samples` is kept sorted by abscissa.
    let mut right = vec![(start, lf(start))];
    let mut peak = right[0].1;
    let mut k = 1;
    loop {
        let v = start + k as f64 * h;
        let y = lf(v);
        right.push((v, y));
        peak = peak.max(y);
        if k >= opts.max_steps || (k >= 4 && peak.is_finite() && y < peak - opts.depth) {
            break;
        }
        k += 1;
    }
    let mut left = Vec::new();
    let mut k = 1;
    loop {
        let v = start - k as f64 * h;
        let y = lf(v);
        left.push((v, y));
        peak = peak.max(y);
        if k >= opts.max_steps || (k >= 4 && peak.is_finite() && y < peak - opts.depth) {
            break;
        }
        k += 1;
    }
    if !peak.is_finite() {
        if peak == f64::NEG_INFINITY {
            return Ok(LogEstimate {
                ln_value: f64::NEG_INFINITY,
                rel_error: 0.0,
            });
        }
        return Err(Error::NoConvergence {
            what: "log-window scan: unbounded integrand",
            estimate: peak,
            error: f64::INFINITY,
        });
    }
    left.reverse();
    left.extend(right);
    let samples = left;

    // The right scan may have stopped before the left scan raised the peak;
    // trim both ends to the window where the integrand is within `depth`.
    let lo_idx = samples
        .iter()
        .position(|s| s.1 >= peak - opts.depth)
        .unwrap_or(0)
        .saturating_sub(1);
    let hi_idx = (samples
        .iter()
        .rposition(|s| s.1 >= peak - opts.depth)
        .unwrap_or(samples.len() - 1)
        + 1)
    .min(samples.len() - 1);
    let (peak_idx, _) = samples
        .iter()
        .enumerate()
        .max_by(|a, b| a.1 .1.total_cmp(&b.1 .1))
        .expect("non-empty scan");

    // Refine the peak location so it can serve as a breakpoint.
    let (vp, yp) = golden_section_max(&lf, samples[peak_idx].0 - h, samples[peak_idx].0 + h, 40);
    let log_peak = yp.max(peak);

    let mut breaks = vec![samples[lo_idx].0, vp, samples[hi_idx].0];
    // Extra breakpoints where the scan crossed intermediate levels.
    for level in [5.0, 20.0, 40.0] {
        for w in samples[lo_idx..=hi_idx].windows(2) {
            let (a, b) = (w[0].1 - (log_peak - level), w[1].1 - (log_peak - level));
            if a.signum() != b.signum() {
                breaks.push(0.5 * (w[0].0 + w[1].0));
            }
        }
    }
    breaks.sort_by(f64::total_cmp);
    breaks.dedup_by(|a, b| (*a - *b).abs() < 1e-12);

    let g = |v: f64| {
        let y = lf(v);
        if y == f64::NEG_INFINITY {
            0.0
        } else {
            (y - log_peak).exp()
        }
    };
    let est = gauss_kronrod_breaks(g, &breaks, 0.0, opts.rel_tol)?;
    if est.value <= 0.0 {
        return Err(Error::NoConvergence {
            what: "log-window: non-positive integral",
            estimate: est.value,
            error: est.error,
        });
    }
    // Mass beyond the window is below exp(-depth) per unit step; charge it
    // against the error budget rather than ignoring it.
    let tail = 2.0 * (-opts.depth).exp() * h / est.value;
    Ok(LogEstimate {
        ln_value: log_peak + est.value.ln(),
        rel_error: est.error / est.value + tail,
    })
}

/// Maximise a unimodal function on `[a, b]` by golden-section search.
pub fn golden_section_max<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, iters: usize) -> (f64, f64) {
    let inv_phi = 0.5 * (5f64.sqrt() - 1.0);
    let (mut a, mut b) = (a, b);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..iters {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    if fc > fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// Nodes and weights of the `n`-point Gauss–Legendre rule on `[-1, 1]`,
/// nodes in increasing order.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "gauss_legendre needs at least one node");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Tricomi initial guess, then Newton on P_n.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { x } else { p1 };
            let pn1 = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * pn - pn1) / (x * x - 1.0);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        if n == 1 {
            dp = 1.0;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n == 1 {
        nodes[0] = 0.0;
        weights[0] = 2.0;
    }
    (nodes, weights)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_kronrod_polynomial_and_exponential() {
        let est = gauss_kronrod(|x| x * x, 0.0, 3.0, 0.0, 1e-14).unwrap();
        assert!((est.value - 9.0).abs() < 1e-13);
        let est = gauss_kronrod(|x: f64| (-x).exp(), 0.0, 50.0, 0.0, 1e-13).unwrap();
        assert!((est.value - (1.0 - (-50f64).exp())).abs() < 1e-12);
    }

    #[test]
    fn gauss_kronrod_handles_sqrt_endpoint() {
        let est = gauss_kronrod(|x: f64| x.sqrt(), 0.0, 1.0, 0.0, 1e-10).unwrap();
        assert!((est.value - 2.0 / 3.0).abs() < 1e-9, "{est:?}");
    }

    #[test]
    fn log_window_gaussian_far_from_start() {
        // ln of N(40, 0.3^2) density times 1e-300.
        let s = 0.3;
        let lf = |v: f64| {
            -0.5 * ((v - 40.0) / s).powi(2) - (s * (2.0 * std::f64::consts::PI).sqrt()).ln()
                - 300.0 * std::f64::consts::LN_10
        };
        let est = integrate_log_window(lf, 0.0, WindowOptions::default()).unwrap();
        let expected = -300.0 * std::f64::consts::LN_10;
        assert!((est.ln_value - expected).abs() < 1e-10, "{est:?}");
    }

    #[test]
    fn log_window_slow_algebraic_left_tail() {
        // ∫ e^{κv - e^v} dv = Γ(κ) with κ = 0.25: the left tail decays slowly.
        let k = 0.25;
        let est = integrate_log_window(|v: f64| k * v - v.exp(), 0.0, WindowOptions::default())
            .unwrap();
        let expected = statrs::function::gamma::ln_gamma(k);
        assert!((est.ln_value - expected).abs() < 1e-10, "{est:?}");
    }

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        for n in [1, 2, 5, 16, 33] {
            let (x, w) = gauss_legendre(n);
            let deg = 2 * n - 1;
            let approx: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg as i32 - 1)).sum();
            let exact = if (deg - 1) % 2 == 0 { 2.0 / deg as f64 } else { 0.0 };
            assert!((approx - exact).abs() < 1e-13, "n={n}: {approx} vs {exact}");
            assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-13);
        }
    }
}
