//! One directed full-duplex link and its SINR.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::fading::{
    residual_si_plus_noise_power, AlphaMuParams, AlphaMuSampler, InterferenceParams,
    InterferenceSampler, SelfInterferenceParams,
};

pub fn dbw_to_watt(p_dbw: f64) -> f64 {
    10f64.powf(p_dbw / 10.0)
}

pub fn watt_to_dbw(p_w: f64) -> Result<f64> {
    if !(p_w > 0.0) || p_w.is_infinite() {
        return Err(domain(format!("watt_to_dbw needs a positive power, got {p_w}")));
    }
    Ok(10.0 * p_w.log10())
}

/// Physical parameters of the link from transmitter j to receiver k.
/// Powers are in watts, distance in metres.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkConfig {
    pub tx_power: f64,
    pub distance: f64,
    pub path_loss_exp: f64,
    pub fading: AlphaMuParams,
    pub interference: InterferenceParams,
    pub self_interference: SelfInterferenceParams,
}

impl LinkConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tx_power >= 0.0 && self.tx_power.is_finite()) {
            return Err(Error::Config(format!("tx_power must be >= 0, got {}", self.tx_power)));
        }
        if !(self.distance > 0.0 && self.distance.is_finite()) {
            return Err(Error::Config(format!("distance must be > 0, got {}", self.distance)));
        }
        if !(self.path_loss_exp > 0.0 && self.path_loss_exp.is_finite()) {
            return Err(Error::Config(format!(
                "path_loss_exp must be > 0, got {}",
                self.path_loss_exp
            )));
        }
        self.fading.validate()?;
        self.interference.validate()?;
        self.self_interference.validate()
    }

    /// `P_j D^{-β}`: received power per unit fading gain.
    pub fn path_gain_power(&self) -> f64 {
        self.tx_power * self.distance.powf(-self.path_loss_exp)
    }

    /// `P_j D^{-β} β_scale`, the scale of the received signal power.
    pub fn signal_scale(&self) -> f64 {
        self.path_gain_power() * self.fading.beta_scale()
    }

    /// `φ`: residual self-interference plus noise.
    pub fn phi(&self) -> f64 {
        residual_si_plus_noise_power(&self.self_interference)
    }

    /// `η P_I`, the mean interference power per path; zero when inactive.
    pub fn interference_scale(&self) -> f64 {
        if self.interference.is_active() {
            self.interference.eta * self.interference.power
        } else {
            0.0
        }
    }

    /// The k→j link obtained by exchanging the roles of the two radios:
    /// the transmit powers swap, everything else (channel, interference
    /// environment, cancellation quality) is taken as reciprocal.
    pub fn reversed(&self) -> Self {
        Self {
            tx_power: self.self_interference.own_tx_power,
            self_interference: SelfInterferenceParams {
                own_tx_power: self.tx_power,
                ..self.self_interference
            },
            ..*self
        }
    }

    /// As [`LinkConfig::reversed`] with the reverse receiver's own
    /// self-interference and interference parameters.
    pub fn reversed_with(
        &self,
        self_interference: SelfInterferenceParams,
        interference: InterferenceParams,
    ) -> Self {
        Self {
            tx_power: self_interference.own_tx_power,
            self_interference: SelfInterferenceParams {
                own_tx_power: self.tx_power,
                ..self_interference
            },
            interference,
            ..*self
        }
    }
}

/// `P_j D^{-β} Ῡ`.
pub fn mean_received_signal_gain(cfg: &LinkConfig) -> f64 {
    cfg.path_gain_power() * cfg.fading.mean_power
}

/// SINR from given fading and interference draws (`|h|²` and `U`).
#[inline]
pub fn sinr_from_draws(cfg: &LinkConfig, fading_gain: f64, interference_gain: f64) -> f64 {
    let p_i = if cfg.interference.n_paths > 0 {
        cfg.interference.power
    } else {
        0.0
    };
    cfg.path_gain_power() * fading_gain / (p_i * interference_gain + cfg.phi())
}

/// Cached samplers for repeated SINR draws from one configuration.
#[derive(Debug, Clone, Copy)]
pub struct SinrSampler {
    signal: AlphaMuSampler,
    interference: InterferenceSampler,
    gain: f64,
    p_i: f64,
    phi: f64,
}

impl SinrSampler {
    pub fn new(cfg: &LinkConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            signal: AlphaMuSampler::new(&cfg.fading)?,
            interference: InterferenceSampler::new(&cfg.interference)?,
            gain: cfg.path_gain_power(),
            p_i: if cfg.interference.n_paths > 0 {
                cfg.interference.power
            } else {
                0.0
            },
            phi: cfg.phi(),
        })
    }

    #[inline]
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let w = self.gain * self.signal.sample(rng);
        let u = self.interference.sample(rng);
        w / (self.p_i * u + self.phi)
    }
}

pub fn sinr_sample<R: Rng + ?Sized>(cfg: &LinkConfig, rng: &mut R) -> Result<f64> {
    Ok(SinrSampler::new(cfg)?.sample(rng))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn caption_config(tx_dbw: f64) -> LinkConfig {
        LinkConfig {
            tx_power: dbw_to_watt(tx_dbw),
            distance: 5.0,
            path_loss_exp: 2.0,
            fading: AlphaMuParams::new(4.0, 5.0, 1.0).unwrap(),
            interference: InterferenceParams::new(2, 0.2, dbw_to_watt(1.0)).unwrap(),
            self_interference: SelfInterferenceParams::new(0.2, dbw_to_watt(20.0), 0.1, 0.1)
                .unwrap(),
        }
    }

    #[test]
    fn unit_conversion() {
        assert_eq!(dbw_to_watt(0.0), 1.0);
        assert!((dbw_to_watt(20.0) - 100.0).abs() < 1e-12);
        assert!((dbw_to_watt(10.0) - 10.0).abs() < 1e-12);
        for p in [-30.0, -1.5, 0.0, 7.3, 45.0] {
            assert!((watt_to_dbw(dbw_to_watt(p)).unwrap() - p).abs() <= 1e-12 * p.abs().max(1.0));
        }
        assert!(watt_to_dbw(0.0).is_err());
        assert!(watt_to_dbw(-1.0).is_err());
    }

    #[test]
    fn mean_gain() {
        let cfg = caption_config(20.0);
        assert!((mean_received_signal_gain(&cfg) - 4.0).abs() < 1e-12);
        let zero = LinkConfig {
            tx_power: 0.0,
            ..cfg
        };
        assert_eq!(mean_received_signal_gain(&zero), 0.0);
        let far = LinkConfig {
            distance: 10.0,
            ..cfg
        };
        assert!((mean_received_signal_gain(&far) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn injected_draws() {
        // W = P_j D^-β |h|² = 4 and V = P_I U + φ = 2.
        let mut cfg = caption_config(20.0);
        cfg.interference.power = 1.0;
        cfg.self_interference = SelfInterferenceParams::new(0.0, 0.0, 0.0, 1.0).unwrap();
        assert!((sinr_from_draws(&cfg, 1.0, 1.0) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn sampler_determinism_and_positivity() {
        let cfg = caption_config(10.0);
        let s = SinrSampler::new(&cfg).unwrap();
        let run = || {
            let mut rng = ChaCha8Rng::seed_from_u64(42);
            (0..100).map(|_| s.sample(&mut rng)).collect::<Vec<_>>()
        };
        let a = run();
        assert_eq!(a, run());
        assert!(a.iter().all(|g| *g > 0.0));
    }

    #[test]
    fn no_interference_sinr_is_signal_over_phi() {
        let mut cfg = caption_config(10.0);
        cfg.interference = InterferenceParams::new(0, 0.2, 0.0).unwrap();
        let s = SinrSampler::new(&cfg).unwrap();
        let sig = AlphaMuSampler::new(&cfg.fading).unwrap();
        let mut r1 = ChaCha8Rng::seed_from_u64(9);
        let mut r2 = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..100 {
            let g = s.sample(&mut r1);
            let w = cfg.path_gain_power() * sig.sample(&mut r2);
            assert_eq!(g, w / cfg.phi());
        }
    }

    #[test]
    fn rayleigh_sinr_is_exponential() {
        let cfg = LinkConfig {
            tx_power: 3.0,
            distance: 2.0,
            path_loss_exp: 2.0,
            fading: AlphaMuParams::default(),
            interference: InterferenceParams::none(),
            self_interference: SelfInterferenceParams::new(0.0, 0.0, 0.0, 0.5).unwrap(),
        };
        let mean = mean_received_signal_gain(&cfg) / cfg.phi();
        let s = SinrSampler::new(&cfg).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut xs: Vec<f64> = (0..1_000_000).map(|_| s.sample(&mut rng)).collect();
        xs.sort_by(f64::total_cmp);
        let n = xs.len() as f64;
        let d = xs
            .iter()
            .enumerate()
            .map(|(i, x)| {
                let f = 1.0 - (-x / mean).exp();
                (f - i as f64 / n).abs().max((i as f64 + 1.0) / n - f)
            })
            .fold(0.0, f64::max);
        assert!(d < 0.002, "KS {d}");
    }

    #[test]
    fn reversal_swaps_powers() {
        let cfg = caption_config(7.0);
        let r = cfg.reversed();
        assert_eq!(r.tx_power, cfg.self_interference.own_tx_power);
        assert_eq!(r.self_interference.own_tx_power, cfg.tx_power);
        assert_eq!(r.reversed(), cfg);
    }

    #[test]
    fn validation() {
        let cfg = caption_config(0.0);
        assert!(cfg.validate().is_ok());
        assert!(LinkConfig { distance: 0.0, ..cfg }.validate().is_err());
        assert!(LinkConfig { tx_power: -1.0, ..cfg }.validate().is_err());
        assert!(LinkConfig { path_loss_exp: 0.0, ..cfg }.validate().is_err());
    }
}
