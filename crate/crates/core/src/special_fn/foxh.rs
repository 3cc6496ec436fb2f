//! Numerical bivariate Fox H-function via truncated double Mellin–Barnes
//! contour integration.
//!
//! The integrand is
//!
//! ```text
//!   prefactor · ∏ Γ(a + w₁t₁ + w₂t₂) / ∏ Γ(b + v₁t₁ + v₂t₂) · z₁^{-t₁} z₂^{-t₂}
//! ```
//!
//! integrated along `t_k = c_k + i·y_k` with measure `(1/2πi)² dt₁dt₂`. The
//! sign of each weight carries the usual `Γ(a ± A t)` convention. A spec whose
//! factors never involve `t₂` is evaluated as a single contour integral.
//!
//! The admissible contours are the straight lines on which every numerator
//! gamma has an argument with positive real part. That region is an open
//! polytope; [`auto_plan`] places the contour near the real-axis minimum of
//! the integrand magnitude inside it, which is where the oscillation on the
//! contour is weakest and the cancellation smallest.
//!
//! Each contour is sampled with the trapezoidal rule on an equispaced grid.
//! The integrand is analytic in a strip around the contour whose half-width
//! is the distance to the nearest pole, so the rule converges like
//! `exp(-2π·distance/step)` and halving the step squares the error. Steps of
//! the two axes are chosen so that the imaginary part of a coupled factor
//! `Γ(a + w₁t₁ + w₂t₂)` lands on a one-dimensional lattice; those factors are
//! then tabulated once instead of being evaluated at every grid point.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::gamma::log_gamma_unchecked;
use crate::error::{Error, Result};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

const MAX_NODES: usize = 16_385;
const DEFAULT_HALF_LENGTH: f64 = 60.0;
const DEFAULT_NODES: usize = 2049;
// Smallest numerator gamma argument allowed on an automatic contour.
const MIN_CLEARANCE: f64 = 0.5;
// Decay (nats) below the real-point magnitude at which contours are cut.
const TRUNCATION_DEPTH: f64 = 45.0;
// Target `2π·distance/step` of the finest automatic grid.
const RESOLUTION: f64 = 36.0;
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaFactor {
    pub offset: f64,
    pub weights: [f64; 2],
}

impl GammaFactor {
    pub fn new(offset: f64, w1: f64, w2: f64) -> Self {
        Self {
            offset,
            weights: [w1, w2],
        }
    }

    /// A factor in the first variable only.
    pub fn first(offset: f64, w1: f64) -> Self {
        Self::new(offset, w1, 0.0)
    }

    /// A factor in the second variable only.
    pub fn second(offset: f64, w2: f64) -> Self {
        Self::new(offset, 0.0, w2)
    }

    #[inline]
    fn real_arg(&self, c: [f64; 2]) -> f64 {
        self.offset + self.weights[0] * c[0] + self.weights[1] * c[1]
    }

    #[inline]
    fn arg(&self, t1: Complex64, t2: Complex64) -> Complex64 {
        self.offset + self.weights[0] * t1 + self.weights[1] * t2
    }

    fn uses(&self, axis: usize) -> bool {
        self.weights[axis] != 0.0
    }
}

/// Parameters of one bivariate (or degenerate univariate) H-function instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoxHSpec {
    pub numerator: Vec<GammaFactor>,
    pub denominator: Vec<GammaFactor>,
    pub arguments: [f64; 2],
    pub prefactor: f64,
}

impl FoxHSpec {
    pub fn new(
        numerator: Vec<GammaFactor>,
        denominator: Vec<GammaFactor>,
        arguments: [f64; 2],
        prefactor: f64,
    ) -> Result<Self> {
        let spec = Self {
            numerator,
            denominator,
            arguments,
            prefactor,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// A single-variable H-function: all second weights zero, second argument unused.
    pub fn univariate(
        numerator: Vec<(f64, f64)>,
        denominator: Vec<(f64, f64)>,
        argument: f64,
        prefactor: f64,
    ) -> Result<Self> {
        Self::new(
            numerator.into_iter().map(|(a, w)| GammaFactor::first(a, w)).collect(),
            denominator.into_iter().map(|(a, w)| GammaFactor::first(a, w)).collect(),
            [argument, 1.0],
            prefactor,
        )
    }

    pub fn is_univariate(&self) -> bool {
        self.numerator
            .iter()
            .chain(&self.denominator)
            .all(|f| !f.uses(1))
    }

    fn dims(&self) -> usize {
        if self.is_univariate() {
            1
        } else {
            2
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.numerator.is_empty() {
            return Err(Error::Config("Fox H spec needs at least one numerator factor".into()));
        }
        for f in self.numerator.iter().chain(&self.denominator) {
            if !(f.offset.is_finite() && f.weights.iter().all(|w| w.is_finite())) {
                return Err(Error::Config(format!("non-finite gamma factor {f:?}")));
            }
            if f.weights == [0.0, 0.0] {
                return Err(Error::Config(format!("gamma factor {f:?} has no weight")));
            }
        }
        let used = self.dims();
        for z in &self.arguments[..used] {
            if !(z.is_finite() && *z > 0.0) {
                return Err(Error::Domain(format!("Fox H arguments must be positive, got {z}")));
            }
        }
        if !self.prefactor.is_finite() {
            return Err(Error::Config("non-finite prefactor".into()));
        }
        Ok(())
    }

    /// `ln |integrand|` at the real point `c`, without the prefactor.
    /// `+∞` outside the admissible region.
    fn real_log_magnitude(&self, c: [f64; 2]) -> f64 {
        let mut acc = 0.0;
        for f in &self.numerator {
            let a = f.real_arg(c);
            if !(a > 0.0) {
                return f64::INFINITY;
            }
            acc += log_gamma_unchecked(Complex64::new(a, 0.0)).re;
        }
        for f in &self.denominator {
            let a = f.real_arg(c);
            let lg = log_gamma_unchecked(Complex64::new(a, 0.0)).re;
            if !lg.is_finite() {
                return f64::INFINITY;
            }
            acc -= lg;
        }
        acc - c[0] * self.arguments[0].ln() - c[1] * self.arguments[1].ln()
    }

    /// Smallest numerator argument real part, normalised by weight length;
    /// positive exactly on the admissible region.
    fn pole_clearance(&self, c: [f64; 2]) -> f64 {
        self.numerator
            .iter()
            .map(|f| f.real_arg(c) / f.weights[0].hypot(f.weights[1]))
            .fold(f64::INFINITY, f64::min)
    }

    /// Distance (in units of `t_axis`) from `c` to the nearest numerator pole line.
    fn axis_clearance(&self, c: [f64; 2], axis: usize) -> f64 {
        self.numerator
            .iter()
            .filter(|f| f.uses(axis))
            .map(|f| f.real_arg(c) / f.weights[axis].abs())
            .fold(f64::INFINITY, f64::min)
    }

    fn log_integrand(&self, t1: Complex64, t2: Complex64) -> Complex64 {
        let mut acc = -t1 * self.arguments[0].ln() - t2 * self.arguments[1].ln();
        for f in &self.numerator {
            acc += log_gamma_unchecked(f.arg(t1, t2));
        }
        for f in &self.denominator {
            acc -= log_gamma_unchecked(f.arg(t1, t2));
        }
        acc
    }
}


/// Where and how finely the contours are sampled.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContourPlan {
    pub real_parts: [f64; 2],
    /// Truncation `T_k`: contour `k` covers `|Im t_k| ≤ T_k`.
    pub half_length: [f64; 2],
    /// Odd number of equispaced nodes on each contour.
    pub nodes_per_axis: [usize; 2],
}

impl ContourPlan {
    pub fn new(real_parts: [f64; 2]) -> Self {
        Self {
            real_parts,
            half_length: [DEFAULT_HALF_LENGTH; 2],
            nodes_per_axis: [DEFAULT_NODES; 2],
        }
    }

    /// Node spacing on contour `axis`.
    pub fn step(&self, axis: usize) -> f64 {
        2.0 * self.half_length[axis] / (self.nodes_per_axis[axis] - 1) as f64
    }

    /// Same plan with the contour real parts moved by `delta`.
    pub fn shifted(&self, delta: [f64; 2]) -> Self {
        Self {
            real_parts: [self.real_parts[0] + delta[0], self.real_parts[1] + delta[1]],
            ..*self
        }
    }

    /// Halve both steps; every existing node is kept.
    pub fn refined(&self) -> Self {
        Self {
            nodes_per_axis: self.nodes_per_axis.map(|n| 2 * n - 1),
            ..*self
        }
    }

    /// Double both truncation lengths at unchanged steps.
    pub fn extended(&self) -> Self {
        Self {
            half_length: self.half_length.map(|t| 2.0 * t),
            nodes_per_axis: self.nodes_per_axis.map(|n| 2 * n - 1),
            ..*self
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FoxHOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Largest node count allowed on one contour.
    pub max_nodes: usize,
}

impl Default for FoxHOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            abs_tol: 0.0,
            max_nodes: MAX_NODES,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FoxHValue {
    pub value: f64,
    /// Absolute error estimate: discretisation, truncation and summation
    /// roundoff, whichever is largest.
    pub error: f64,
    /// `|Im Σ|` over `Σ|terms|`; zero up to rounding by conjugate symmetry.
    pub imag_residual: f64,
    /// `Σ|terms|` in the units of `value`. Much larger than `|value|` means
    /// heavy cancellation on the contour.
    pub magnitude: f64,
    /// The plan at which `value` was obtained.
    pub plan: ContourPlan,
}

/// Check that `plan` lies in the admissible region of `spec`.
pub fn validate_plan(spec: &FoxHSpec, plan: &ContourPlan) -> Result<()> {
    let c = effective_c(spec, plan.real_parts);
    for f in &spec.numerator {
        let a = f.real_arg(c);
        if a <= 0.0 && a.fract() == 0.0 {
            return Err(Error::Contour(format!(
                "numerator factor {f:?} has a pole on the contour c = {c:?}"
            )));
        }
        if !(a > 0.0) {
            return Err(Error::Contour(format!(
                "contour c = {c:?} does not separate the poles of numerator factor {f:?} (Re arg = {a})"
            )));
        }
    }
    for axis in 0..spec.dims() {
        let (t, n) = (plan.half_length[axis], plan.nodes_per_axis[axis]);
        if !(t > 0.0 && t.is_finite()) {
            return Err(Error::Contour(format!("half_length must be positive, got {t}")));
        }
        if n < 3 || n % 2 == 0 {
            return Err(Error::Contour(format!("nodes_per_axis must be odd and >= 3, got {n}")));
        }
    }
    Ok(())
}

fn effective_c(spec: &FoxHSpec, c: [f64; 2]) -> [f64; 2] {
    if spec.is_univariate() {
        [c[0], 0.0]
    } else {
        c
    }
}

/// Downhill simplex minimisation in one or two dimensions.
fn nelder_mead<F: Fn(&[f64]) -> f64>(f: F, start: &[f64], step: f64, iters: usize) -> Vec<f64> {
    let d = start.len();
    let mut simplex: Vec<(Vec<f64>, f64)> = (0..=d)
        .map(|k| {
            let mut p = start.to_vec();
            if k > 0 {
                p[k - 1] += step;
            }
            let v = f(&p);
            (p, v)
        })
        .collect();
    for _ in 0..iters {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let centroid: Vec<f64> = (0..d)
            .map(|j| simplex[..d].iter().map(|p| p.0[j]).sum::<f64>() / d as f64)
            .collect();
        let worst = simplex[d].clone();
        let along = |s: f64| -> Vec<f64> {
            (0..d).map(|j| centroid[j] + s * (worst.0[j] - centroid[j])).collect()
        };
        let refl = along(-1.0);
        let fr = f(&refl);
        if fr < simplex[0].1 {
            let exp = along(-2.0);
            let fe = f(&exp);
            simplex[d] = if fe < fr { (exp, fe) } else { (refl, fr) };
        } else if fr < simplex[d - 1].1 {
            simplex[d] = (refl, fr);
        } else {
            let con = along(0.5);
            let fc = f(&con);
            if fc < worst.1 {
                simplex[d] = (con, fc);
            } else {
                let best = simplex[0].0.clone();
                for p in simplex.iter_mut().skip(1) {
                    for j in 0..d {
                        p.0[j] = best[j] + 0.5 * (p.0[j] - best[j]);
                    }
                    p.1 = f(&p.0);
                }
            }
        }
        let spread = simplex
            .iter()
            .flat_map(|p| p.0.iter().zip(&simplex[0].0).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        if spread < 1e-9 {
            break;
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    simplex.swap_remove(0).0
}

fn to_c(p: &[f64]) -> [f64; 2] {
    [p[0], p.get(1).copied().unwrap_or(0.0)]
}

/// Choose contour real parts, truncation lengths and steps for `spec`.
///
/// The returned plan is one refinement level coarser than the grid expected
/// to meet double precision; [`fox_h_bivariate`] refines from there.
/// Fails with [`Error::Contour`] when the admissible region is empty.
pub fn auto_plan(spec: &FoxHSpec) -> Result<ContourPlan> {
    spec.validate()?;
    let d = spec.dims();

    // Interior point: maximise pole clearance (capped so unbounded regions
    // do not send the search to infinity).
    let clearance = |p: &[f64]| -spec.pole_clearance(to_c(p)).min(2.0);
    let mut centre = vec![0.5; d];
    for _ in 0..3 {
        centre = nelder_mead(clearance, &centre, 1.0, 400);
    }
    let margin = spec.pole_clearance(to_c(&centre));
    if !(margin > 1e-9) {
        return Err(Error::Contour(format!(
            "no straight contour separates the numerator poles (best clearance {margin:e})"
        )));
    }

    // Saddle heuristic: minimise the real-axis log magnitude, keeping the
    // contour away from the pole lines so the integrand stays smooth.
    let keep_out = (0.5 * margin).min(MIN_CLEARANCE);
    let objective = |p: &[f64]| {
        let c = to_c(p);
        if spec.pole_clearance(c) < keep_out {
            return f64::INFINITY;
        }
        let v = spec.real_log_magnitude(c);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    let mut best = centre.clone();
    for step in [0.5 * margin, 0.1 * margin] {
        best = nelder_mead(objective, &best, step, 600);
    }
    if !objective(&best).is_finite() {
        best = centre;
    }
    let c = to_c(&best);

    let base = spec.real_log_magnitude(c);
    let mut steps = [1.0; 2];
    let mut half = [1.0; 2];
    for axis in 0..d {
        let dist = spec.axis_clearance(c, axis).min(4.0);
        let omega = spec.arguments[axis].ln().abs()
            + 2.0
                * spec
                    .numerator
                    .iter()
                    .chain(&spec.denominator)
                    .map(|f| f.weights[axis].abs())
                    .sum::<f64>();
        steps[axis] = 2.0 * std::f64::consts::PI / (RESOLUTION / dist + omega);

        let mut y: f64 = 1.0;
        while y < 4096.0 {
            let mut t = [Complex64::new(c[0], 0.0), Complex64::new(c[1], 0.0)];
            t[axis].im = y;
            if spec.log_integrand(t[0], t[1]).re < base - TRUNCATION_DEPTH {
                break;
            }
            y *= 1.25;
        }
        half[axis] = y.max(4.0);
    }

    if d == 2 {
        let coupled = spec
            .numerator
            .iter()
            .chain(&spec.denominator)
            .find(|f| f.uses(0) && f.uses(1));
        if let Some(f) = coupled {
            // Make w₁h₁ an integer multiple of w₂h₂.
            let r = f.weights[1].abs() / f.weights[0].abs();
            let m = (steps[0] / (r * steps[1])).floor();
            if m >= 1.0 {
                steps[0] = m * r * steps[1];
            } else {
                steps[1] = steps[0] / r;
            }
        }
    }

    let mut plan = ContourPlan {
        real_parts: c,
        half_length: [1.0; 2],
        nodes_per_axis: [3; 2],
    };
    for axis in 0..d {
        let h = 2.0 * steps[axis];
        let k = (half[axis] / h).ceil().max(2.0);
        plan.half_length[axis] = k * h;
        plan.nodes_per_axis[axis] = 2 * k as usize + 1;
    }
    Ok(plan)
}

/// `exp(v - max Re v)` and its moduli, plus the shift.
fn normalised(v: &[Complex64]) -> (Vec<Complex64>, Vec<f64>, f64) {
    let m = v.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<Complex64> = v.iter().map(|z| (z - m).exp()).collect();
    let mags = v.iter().map(|z| (z.re - m).exp()).collect();
    (e, mags, m)
}

/// `|log|` at the largest entry: each term carries an absolute log error of
/// about `ε·|log|`, i.e. that much relative error after exponentiation.
fn peak_log_size(v: &[Complex64]) -> f64 {
    v.iter()
        .copied()
        .reduce(|a, b| if b.re > a.re { b } else { a })
        .map_or(0.0, |z| z.norm())
}

fn log_factors(num: &[GammaFactor], den: &[GammaFactor], t1: Complex64, t2: Complex64) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for f in num {
        acc += log_gamma_unchecked(f.arg(t1, t2));
    }
    for f in den {
        acc -= log_gamma_unchecked(f.arg(t1, t2));
    }
    acc
}

/// A coupled factor tabulated along the lattice `q = m·i' + j'`.
struct LatticeTable {
    m: i64,
    offset: i64,
    values: Vec<Complex64>,
    mags: Vec<f64>,
}

#[derive(Debug, Clone, Copy)]
struct GridSum {
    value: f64,
    magnitude: f64,
    imag_residual: f64,
    tail: f64,
    roundoff: f64,
}

// Lower bound on the decay rate (per unit of Im t) used for tail estimates.
const TAIL_DECAY: f64 = 0.5;

type Partial = (Complex64, f64, f64);

fn pairwise_sum(v: &[Partial]) -> Partial {
    match v.len() {
        0 => (Complex64::new(0.0, 0.0), 0.0, 0.0),
        1 => v[0],
        n => {
            let (a, b) = v.split_at(n / 2);
            let (sa, aa, ra) = pairwise_sum(a);
            let (sb, ab, rb) = pairwise_sum(b);
            (sa + sb, aa + ab, ra + rb)
        }
    }
}

/// Trapezoidal double sum at a fixed plan.
fn grid_sum(spec: &FoxHSpec, plan: &ContourPlan) -> GridSum {
    let d = spec.dims();
    let c = effective_c(spec, plan.real_parts);
    let zero = Complex64::new(0.0, 0.0);
    let two_pi = 2.0 * std::f64::consts::PI;
    let nodes = |axis: usize| -> Vec<Complex64> {
        let n = plan.nodes_per_axis[axis];
        let h = plan.step(axis);
        let k = ((n - 1) / 2) as f64;
        (0..n).map(|i| Complex64::new(c[axis], (i as f64 - k) * h)).collect()
    };
    let only = |axis: usize| -> (Vec<GammaFactor>, Vec<GammaFactor>) {
        let other = 1 - axis;
        (
            spec.numerator.iter().filter(|f| !f.uses(other)).copied().collect(),
            spec.denominator.iter().filter(|f| !f.uses(other)).copied().collect(),
        )
    };
    let ln_z = [spec.arguments[0].ln(), spec.arguments[1].ln()];

    let t1s = nodes(0);
    let (num1, den1) = only(0);
    let a: Vec<Complex64> = t1s
        .iter()
        .map(|t| log_factors(&num1, &den1, *t, zero) - t * ln_z[0])
        .collect();
    let (ea, ma, a_max) = normalised(&a);
    let h1 = plan.step(0);
    let mut log_size = peak_log_size(&a);

    let (sum, abs, ring, ln_scale) = if d == 1 {
        let terms: Vec<Partial> = ea.iter().zip(&ma).map(|(e, m)| (*e, *m, 0.0)).collect();
        let (s, a, _) = pairwise_sum(&terms);
        let ring = ma[0] + ma[ma.len() - 1];
        (s, a, ring, a_max + (h1 / two_pi).ln())
    } else {
        let t2s = nodes(1);
        let (num2, den2) = only(1);
        let b: Vec<Complex64> = t2s
            .iter()
            .map(|t| log_factors(&num2, &den2, zero, *t) - t * ln_z[1])
            .collect();
        let (eb, mb, b_max) = normalised(&b);
        log_size += peak_log_size(&b);
        let h2 = plan.step(1);
        let n1 = t1s.len();
        let n2 = t2s.len();
        let k1 = ((n1 - 1) / 2) as i64;
        let k2 = ((n2 - 1) / 2) as i64;

        let mut tables = Vec::new();
        let mut direct_num = Vec::new();
        let mut direct_den = Vec::new();
        let mut ln_scale = a_max + b_max + (h1 * h2 / (two_pi * two_pi)).ln();
        for (f, sign) in spec
            .numerator
            .iter()
            .map(|f| (f, 1.0))
            .chain(spec.denominator.iter().map(|f| (f, -1.0)))
            .filter(|(f, _)| f.uses(0) && f.uses(1))
        {
            let ratio = f.weights[0] * h1 / (f.weights[1] * h2);
            let m = ratio.round();
            if m != 0.0 && (ratio - m).abs() <= 1e-9 * ratio.abs() {
                let m = m as i64;
                let span = m.abs() * k1 + k2;
                let base = f.real_arg(c);
                let unit = f.weights[1] * h2;
                let logs: Vec<Complex64> = (-span..=span)
                    .map(|q| sign * log_gamma_unchecked(Complex64::new(base, unit * q as f64)))
                    .collect();
                let (values, mags, shift) = normalised(&logs);
                ln_scale += shift;
                log_size += peak_log_size(&logs);
                tables.push(LatticeTable {
                    m,
                    offset: span,
                    values,
                    mags,
                });
            } else if sign > 0.0 {
                direct_num.push(*f);
            } else {
                direct_den.push(*f);
            }
        }
        let direct_shift = if direct_num.is_empty() && direct_den.is_empty() {
            0.0
        } else {
            let s = log_factors(&direct_num, &direct_den, t1s[(n1 - 1) / 2], t2s[(n2 - 1) / 2]);
            ln_scale += s.re;
            log_size += s.norm();
            s.re
        };

        let row = |i: usize| -> Partial {
            let di = i as i64 - k1;
            let slices: Vec<(&[Complex64], &[f64])> = tables
                .iter()
                .map(|t| {
                    let start = (t.m * di - k2 + t.offset) as usize;
                    (&t.values[start..start + n2], &t.mags[start..start + n2])
                })
                .collect();
            let mut s = zero;
            let mut abs = 0.0;
            let mut edge = [0.0; 2];
            for j in 0..n2 {
                let mut term = ea[i] * eb[j];
                let mut mag = ma[i] * mb[j];
                for (v, m) in &slices {
                    term *= v[j];
                    mag *= m[j];
                }
                if !direct_num.is_empty() || !direct_den.is_empty() {
                    let e = (log_factors(&direct_num, &direct_den, t1s[i], t2s[j]) - direct_shift).exp();
                    term *= e;
                    mag *= e.norm();
                }
                s += term;
                abs += mag;
                if j == 0 {
                    edge[0] = mag;
                } else if j == n2 - 1 {
                    edge[1] = mag;
                }
            }
            let ring = if i == 0 || i == n1 - 1 { abs } else { edge[0] + edge[1] };
            (s, abs, ring)
        };

        #[cfg(feature = "parallel")]
        let rows: Vec<Partial> = (0..n1).into_par_iter().map(row).collect();
        #[cfg(not(feature = "parallel"))]
        let rows: Vec<Partial> = (0..n1).map(row).collect();
        let (s, a, r) = pairwise_sum(&rows);
        (s, a, r, ln_scale)
    };

    let ln_pref = spec.prefactor.abs().ln();
    let scale = |x: f64| {
        if x == 0.0 || spec.prefactor == 0.0 {
            0.0
        } else {
            x.signum() * (x.abs().ln() + ln_scale + ln_pref).exp()
        }
    };
    let magnitude = scale(abs);
    let h_min = if d == 1 { h1 } else { h1.min(plan.step(1)) };
    GridSum {
        value: spec.prefactor.signum() * scale(sum.re),
        magnitude,
        imag_residual: if abs > 0.0 { sum.im.abs() / abs } else { 0.0 },
        tail: scale(ring) / (TAIL_DECAY * h_min),
        roundoff: (32.0 + 2.0 * log_size) * f64::EPSILON * magnitude,
    }
}

/// Evaluate at exactly the given plan, without refinement.
pub fn fox_h_fixed(spec: &FoxHSpec, plan: &ContourPlan) -> Result<FoxHValue> {
    spec.validate()?;
    validate_plan(spec, plan)?;
    let g = grid_sum(spec, plan);
    Ok(FoxHValue {
        value: g.value,
        error: g.tail.max(g.roundoff),
        imag_residual: g.imag_residual,
        magnitude: g.magnitude,
        plan: *plan,
    })
}

/// Evaluate the H-function starting from `plan`, halving the steps until two
/// successive grids agree and extending the contours while the truncated
/// tails are not negligible.
pub fn fox_h_bivariate(spec: &FoxHSpec, plan: &ContourPlan, opts: FoxHOptions) -> Result<FoxHValue> {
    spec.validate()?;
    validate_plan(spec, plan)?;
    let d = spec.dims();
    let too_big = |p: &ContourPlan| p.nodes_per_axis[..d].iter().any(|n| *n > opts.max_nodes);
    let tol = |value: f64, floor: f64| opts.abs_tol.max(opts.rel_tol * value.abs()).max(floor);

    let mut plan = *plan;
    let mut prev = grid_sum(spec, &plan);
    loop {
        let next = plan.refined();
        if too_big(&next) {
            return Err(Error::NoConvergence {
                what: "fox_h: step refinement",
                estimate: prev.value,
                error: f64::INFINITY,
            });
        }
        let cur = grid_sum(spec, &next);
        if !cur.value.is_finite() || !cur.magnitude.is_finite() {
            return Err(Error::NoConvergence {
                what: "fox_h: non-finite sum",
                estimate: cur.value,
                error: f64::INFINITY,
            });
        }
        plan = next;
        let diff = (cur.value - prev.value).abs();
        // Halving the step squares the relative error once the rule is in
        // its asymptotic regime.
        let est = if cur.magnitude > 0.0 && diff <= 1e-3 * cur.magnitude {
            10.0 * diff * diff / cur.magnitude
        } else {
            diff
        };
        prev = cur;
        if est > tol(cur.value, cur.roundoff) {
            continue;
        }

        let mut cur = cur;
        let mut trunc = 0.0;
        while cur.tail > tol(cur.value, cur.roundoff) {
            let longer = plan.extended();
            if too_big(&longer) || longer.half_length[..d].iter().any(|t| *t > 1e4) {
                return Err(Error::NoConvergence {
                    what: "fox_h: truncation",
                    estimate: cur.value,
                    error: cur.tail,
                });
            }
            let ext = grid_sum(spec, &longer);
            trunc = (ext.value - cur.value).abs();
            plan = longer;
            cur = ext;
        }
        return Ok(FoxHValue {
            value: cur.value,
            error: est.max(trunc).max(cur.tail).max(cur.roundoff),
            imag_residual: cur.imag_residual,
            magnitude: cur.magnitude,
            plan,
        });
    }
}

/// [`auto_plan`] followed by [`fox_h_bivariate`].
pub fn fox_h(spec: &FoxHSpec, opts: FoxHOptions) -> Result<FoxHValue> {
    let plan = auto_plan(spec)?;
    fox_h_bivariate(spec, &plan, opts)
}
