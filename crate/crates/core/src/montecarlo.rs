//! Sampling estimators of the SINR law, capacity and BEP.
//!
//! Draws are produced in blocks of [`BLOCK_LEN`]; block `b` of a run with
//! master seed `s` uses ChaCha8 seeded with `s` on stream `b`. Work is split
//! by whole blocks, so the draws and the merged statistics do not depend on
//! how many partitions (threads) the run uses.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
#[cfg(feature = "parallel")]
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytics::{conditional_bep, sinr_quantile_quadrature, ModulationScheme};
use crate::error::{domain, Result};
use crate::link::{LinkConfig, SinrSampler};
use crate::special_fn::regularized_upper;

pub const BLOCK_LEN: u64 = 4096;
pub const MIN_SAMPLES: u64 = 1_000;
const Z_95: f64 = 1.96;

/// A sample mean with its 95% normal-approximation interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimateWithCI {
    pub mean: f64,
    pub half_width_95: f64,
    pub n_samples: u64,
    pub seed: u64,
}

impl EstimateWithCI {
    pub fn covers(&self, x: f64) -> bool {
        (x - self.mean).abs() <= self.half_width_95
    }
}

/// Generator for block `block` of the run seeded with `seed`.
pub fn block_rng(seed: u64, block: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(block);
    rng
}

fn default_partitions() -> usize {
    #[cfg(feature = "parallel")]
    {
        rayon::current_num_threads()
    }
    #[cfg(not(feature = "parallel"))]
    {
        1
    }
}

/// Run `f(block, len)` over all blocks of an `n`-draw run, split into
/// `partitions` contiguous chunks, and return the results in block order.
fn over_blocks<T, F>(n: u64, partitions: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64, u64) -> T + Sync,
{
    let blocks = n.div_ceil(BLOCK_LEN);
    let parts = (partitions.max(1) as u64).min(blocks.max(1));
    let chunk = blocks.div_ceil(parts);
    let run = |p: u64| -> Vec<T> {
        let end = ((p + 1) * chunk).min(blocks);
        (p * chunk..end)
            .map(|b| f(b, BLOCK_LEN.min(n - b * BLOCK_LEN)))
            .collect()
    };
    #[cfg(feature = "parallel")]
    let chunks: Vec<Vec<T>> = (0..parts).into_par_iter().map(run).collect();
    #[cfg(not(feature = "parallel"))]
    let chunks: Vec<Vec<T>> = (0..parts).map(run).collect();
    chunks.into_iter().flatten().collect()
}

#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    n: f64,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn push(&mut self, x: f64) {
        self.n += 1.0;
        let d = x - self.mean;
        self.mean += d / self.n;
        self.m2 += d * (x - self.mean);
    }

    fn merge(self, o: Moments) -> Moments {
        if o.n == 0.0 {
            return self;
        }
        if self.n == 0.0 {
            return o;
        }
        let n = self.n + o.n;
        let d = o.mean - self.mean;
        Moments {
            n,
            mean: self.mean + d * o.n / n,
            m2: self.m2 + o.m2 + d * d * self.n * o.n / n,
        }
    }
}

fn check_samples(n: u64, min: u64) -> Result<()> {
    if n < min {
        return Err(domain(format!("need at least {min} samples, got {n}")));
    }
    Ok(())
}

fn mean_of<F>(cfg: &LinkConfig, n: u64, seed: u64, partitions: usize, g: F) -> Result<EstimateWithCI>
where
    F: Fn(f64) -> f64 + Sync,
{
    check_samples(n, MIN_SAMPLES)?;
    let sampler = SinrSampler::new(cfg)?;
    let blocks = over_blocks(n, partitions, |b, len| {
        let mut rng = block_rng(seed, b);
        let mut m = Moments::default();
        for _ in 0..len {
            m.push(g(sampler.sample(&mut rng)));
        }
        m
    });
    let m = blocks.into_iter().fold(Moments::default(), Moments::merge);
    let var = if m.n > 1.0 { m.m2 / (m.n - 1.0) } else { 0.0 };
    Ok(EstimateWithCI {
        mean: m.mean,
        half_width_95: Z_95 * (var / m.n).sqrt(),
        n_samples: n,
        seed,
    })
}

/// Sample mean of `log₂(1 + γ)`.
pub fn estimate_capacity_mc(cfg: &LinkConfig, n: u64, seed: u64) -> Result<EstimateWithCI> {
    estimate_capacity_mc_partitioned(cfg, n, seed, default_partitions())
}

pub fn estimate_capacity_mc_partitioned(
    cfg: &LinkConfig,
    n: u64,
    seed: u64,
    partitions: usize,
) -> Result<EstimateWithCI> {
    mean_of(cfg, n, seed, partitions, |g| g.ln_1p() / std::f64::consts::LN_2)
}

/// Sample mean of the conditional BEP at each SINR draw.
pub fn estimate_bep_mc(
    cfg: &LinkConfig,
    m: ModulationScheme,
    n: u64,
    seed: u64,
) -> Result<EstimateWithCI> {
    estimate_bep_mc_partitioned(cfg, m, n, seed, default_partitions())
}

pub fn estimate_bep_mc_partitioned(
    cfg: &LinkConfig,
    m: ModulationScheme,
    n: u64,
    seed: u64,
    partitions: usize,
) -> Result<EstimateWithCI> {
    mean_of(cfg, n, seed, partitions, |g| conditional_bep(m, g))
}

/// Relative half-width of the window used by [`estimate_pdf_mc`].
pub const PDF_WINDOW: f64 = 0.02;

/// SINR density at `x` from the fraction of draws in `[x/(1+δ), x(1+δ)]`.
pub fn estimate_pdf_mc(cfg: &LinkConfig, x: f64, n: u64, seed: u64) -> Result<EstimateWithCI> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(domain(format!("sinr pdf needs finite x > 0, got {x}")));
    }
    let (lo, hi) = (x / (1.0 + PDF_WINDOW), x * (1.0 + PDF_WINDOW));
    let w = hi - lo;
    mean_of(cfg, n, seed, default_partitions(), |g| {
        if (lo..hi).contains(&g) {
            1.0 / w
        } else {
            0.0
        }
    })
}

/// `n` SINR draws in block order.
pub fn sinr_samples(cfg: &LinkConfig, n: u64, seed: u64) -> Result<Vec<f64>> {
    sinr_samples_partitioned(cfg, n, seed, default_partitions())
}

pub fn sinr_samples_partitioned(
    cfg: &LinkConfig,
    n: u64,
    seed: u64,
    partitions: usize,
) -> Result<Vec<f64>> {
    let sampler = SinrSampler::new(cfg)?;
    let blocks = over_blocks(n, partitions, |b, len| {
        let mut rng = block_rng(seed, b);
        (0..len).map(|_| sampler.sample(&mut rng)).collect::<Vec<_>>()
    });
    Ok(blocks.concat())
}

/// Density histogram on log-spaced bins spanning the sample range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    /// `bins + 1` increasing edges.
    pub edges: Vec<f64>,
    pub densities: Vec<f64>,
    pub n_samples: u64,
}

impl Histogram {
    pub fn total_area(&self) -> f64 {
        self.densities
            .iter()
            .zip(self.edges.windows(2))
            .map(|(d, e)| d * (e[1] - e[0]))
            .sum()
    }
}

pub fn empirical_sinr_pdf(cfg: &LinkConfig, n: u64, bins: usize, seed: u64) -> Result<Histogram> {
    check_samples(n, 10_000)?;
    if bins < 10 {
        return Err(domain(format!("need at least 10 bins, got {bins}")));
    }
    if cfg.tx_power == 0.0 {
        return Err(domain("tx_power = 0: the SINR is identically zero and has no density"));
    }
    let xs = sinr_samples(cfg, n, seed)?;
    let (lo, hi) = xs
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), x| (lo.min(*x), hi.max(*x)));
    let (a, b) = (lo.ln(), hi.ln());
    let width = (b - a) / bins as f64;
    let mut edges: Vec<f64> = (0..=bins).map(|k| (a + k as f64 * width).exp()).collect();
    edges[0] = lo;
    edges[bins] = hi;
    let mut counts = vec![0u64; bins];
    for x in &xs {
        let k = (((x.ln() - a) / width) as usize).min(bins - 1);
        // Rounding in ln/exp can put a point one bin off its edges.
        let k = if *x < edges[k] {
            k - 1
        } else if *x >= edges[k + 1] && k + 1 < bins {
            k + 1
        } else {
            k
        };
        counts[k] += 1;
    }
    let densities = counts
        .iter()
        .zip(edges.windows(2))
        .map(|(c, e)| *c as f64 / (n as f64 * (e[1] - e[0])))
        .collect();
    Ok(Histogram {
        edges,
        densities,
        n_samples: n,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GoodnessOfFit {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

/// Pearson chi-square of `samples` against equal-mass bins whose interior
/// boundaries under the model are `cut_points` (sorted, `bins − 1` of them).
pub fn equal_mass_chi_square(samples: &[f64], cut_points: &[f64]) -> GoodnessOfFit {
    let bins = cut_points.len() + 1;
    let mut counts = vec![0u64; bins];
    for x in samples {
        counts[cut_points.partition_point(|c| c <= x)] += 1;
    }
    let expected = samples.len() as f64 / bins as f64;
    let statistic = counts
        .iter()
        .map(|c| (*c as f64 - expected).powi(2) / expected)
        .sum::<f64>();
    let dof = bins - 1;
    GoodnessOfFit {
        statistic,
        dof,
        p_value: regularized_upper(0.5 * dof as f64, 0.5 * statistic),
    }
}

/// Equal-mass chi-square of SINR draws against the quadrature SINR law.
pub fn sinr_chi_square(cfg: &LinkConfig, samples: &[f64], bins: usize) -> Result<GoodnessOfFit> {
    if bins < 2 || samples.len() < 20 * bins {
        return Err(domain(format!(
            "{} samples cannot fill {bins} bins with 20 expected each",
            samples.len()
        )));
    }
    let cuts = (1..bins)
        .map(|k| sinr_quantile_quadrature(cfg, k as f64 / bins as f64))
        .collect::<Result<Vec<_>>>()?;
    Ok(equal_mass_chi_square(samples, &cuts))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fading::{AlphaMuParams, InterferenceParams, SelfInterferenceParams};
    use crate::link::dbw_to_watt;

    fn rayleigh(mean_sinr: f64) -> LinkConfig {
        LinkConfig {
            tx_power: mean_sinr,
            distance: 1.0,
            path_loss_exp: 2.0,
            fading: AlphaMuParams::default(),
            interference: InterferenceParams::none(),
            self_interference: SelfInterferenceParams::new(0.0, 0.0, 0.0, 1.0).unwrap(),
        }
    }

    fn caption(tx_dbw: f64) -> LinkConfig {
        LinkConfig {
            tx_power: dbw_to_watt(tx_dbw),
            distance: 5.0,
            path_loss_exp: 2.0,
            fading: AlphaMuParams::new(4.0, 5.0, 100.0).unwrap(),
            interference: InterferenceParams::new(2, 0.2, dbw_to_watt(1.0)).unwrap(),
            self_interference: SelfInterferenceParams::new(0.2, dbw_to_watt(20.0), 0.1, 0.1)
                .unwrap(),
        }
    }

    #[test]
    fn zero_power_is_exact() {
        let cfg = LinkConfig {
            tx_power: 0.0,
            ..caption(0.0)
        };
        let c = estimate_capacity_mc(&cfg, 5_000, 1).unwrap();
        assert_eq!((c.mean, c.half_width_95), (0.0, 0.0));
        for m in ModulationScheme::ALL {
            let b = estimate_bep_mc(&cfg, m, 5_000, 1).unwrap();
            assert_eq!((b.mean, b.half_width_95), (0.5, 0.0));
        }
    }

    #[test]
    fn rayleigh_oracles_are_covered() {
        let cfg = rayleigh(1.0);
        let c = estimate_capacity_mc(&cfg, 1_000_000, 11).unwrap();
        assert!(c.covers(0.860_347_4), "{c:?}");
        let b = estimate_bep_mc(&cfg, ModulationScheme::Dpsk, 1_000_000, 12).unwrap();
        assert!(b.covers(0.25), "{b:?}");
    }

    #[test]
    fn half_width_scales_as_inverse_root_n() {
        let cfg = caption(10.0);
        let a = estimate_capacity_mc(&cfg, 100_000, 3).unwrap();
        let b = estimate_capacity_mc(&cfg, 400_000, 3).unwrap();
        let r = a.half_width_95 / b.half_width_95;
        assert!((r - 2.0).abs() < 0.4, "ratio {r}");
    }

    #[test]
    fn partition_count_does_not_change_anything() {
        let cfg = caption(5.0);
        let n = 3 * BLOCK_LEN + 17;
        let one = sinr_samples_partitioned(&cfg, n, 99, 1).unwrap();
        for k in [2, 3, 7] {
            assert_eq!(one, sinr_samples_partitioned(&cfg, n, 99, k).unwrap());
            assert_eq!(
                estimate_capacity_mc_partitioned(&cfg, n, 99, 1).unwrap(),
                estimate_capacity_mc_partitioned(&cfg, n, 99, k).unwrap()
            );
        }
        assert_eq!(one.len() as u64, n);
    }

    #[test]
    fn seeds_matter_and_repeat() {
        let cfg = caption(5.0);
        let a = estimate_bep_mc(&cfg, ModulationScheme::Dpsk, 10_000, 1).unwrap();
        assert_eq!(a, estimate_bep_mc(&cfg, ModulationScheme::Dpsk, 10_000, 1).unwrap());
        assert_ne!(a.mean, estimate_bep_mc(&cfg, ModulationScheme::Dpsk, 10_000, 2).unwrap().mean);
    }

    #[test]
    fn too_few_samples_rejected() {
        assert!(estimate_capacity_mc(&caption(0.0), 999, 1).is_err());
        assert!(empirical_sinr_pdf(&caption(0.0), 9_999, 20, 1).is_err());
        assert!(empirical_sinr_pdf(&caption(0.0), 10_000, 9, 1).is_err());
    }

    #[test]
    fn windowed_density_covers_rayleigh() {
        let cfg = rayleigh(2.0);
        for x in [0.5, 2.0] {
            let e = estimate_pdf_mc(&cfg, x, 1_000_000, 8).unwrap();
            assert!(e.covers(0.5 * (-x / 2.0f64).exp()), "{e:?}");
        }
    }

    #[test]
    fn histogram_is_normalised() {
        let h = empirical_sinr_pdf(&caption(10.0), 50_000, 40, 5).unwrap();
        assert_eq!(h.edges.len(), 41);
        assert!(h.edges.windows(2).all(|e| e[0] < e[1]));
        assert!((h.total_area() - 1.0).abs() < 1e-12);
        assert_eq!(h, empirical_sinr_pdf(&caption(10.0), 50_000, 40, 5).unwrap());
    }

    #[test]
    fn samples_fit_the_quadrature_law() {
        let cfg = caption(10.0);
        let xs = sinr_samples(&cfg, 1_000_000, 2024).unwrap();
        let g = sinr_chi_square(&cfg, &xs, 100).unwrap();
        assert!(g.p_value > 1e-3, "{g:?}");
    }

    #[test]
    fn chi_square_rejects_the_wrong_law() {
        let cfg = caption(10.0);
        let xs: Vec<f64> = sinr_samples(&cfg, 200_000, 1).unwrap().iter().map(|x| 1.05 * x).collect();
        assert!(sinr_chi_square(&cfg, &xs, 50).unwrap().p_value < 1e-6);
    }
}
