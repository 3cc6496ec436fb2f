//! Browser bindings for the static demo page in `www/`.
//!
//! Each export has a plain Rust counterpart so the logic can be tested
//! natively; the exported wrappers only convert errors.

use fdlink::analytics::{
    bit_error_probability, ergodic_capacity, sinr_pdf_quadrature, Method, ModulationScheme,
};
use fdlink::montecarlo::empirical_sinr_pdf;
use fdlink::semantic_payload::{
    corrupt_bits, decode_message, encode_message, match_descriptors, match_preservation_ratio,
    perturbed_view, standard_fixture, DEFAULT_RATIO, FIXTURE_SEED,
};
use fdlink::sweep::LinkParams;
use fdlink::{Error, Result};
use wasm_bindgen::prelude::*;

/// Knobs exposed on the page; everything else is the reference link.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Knobs {
    pub interference_power_dbw: f64,
    pub distance_m: f64,
    pub mean_power: f64,
}

impl Knobs {
    fn params(&self, tx_power_dbw: f64) -> LinkParams {
        LinkParams {
            tx_power_dbw,
            interference_power_dbw: self.interference_power_dbw,
            distance_m: self.distance_m,
            mean_power: self.mean_power,
            ..LinkParams::reference()
        }
    }
}

#[wasm_bindgen]
#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    x: Vec<f64>,
    y: Vec<f64>,
}

#[wasm_bindgen]
impl Curve {
    #[wasm_bindgen(getter)]
    pub fn x(&self) -> Vec<f64> {
        self.x.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn y(&self) -> Vec<f64> {
        self.y.clone()
    }
}

/// `metric` ("bep" or "capacity") against P_j in dBW, by quadrature.
pub fn link_curve(
    metric: &str,
    modulation: &str,
    knobs: Knobs,
    from_dbw: f64,
    to_dbw: f64,
    points: usize,
) -> Result<Curve> {
    if !(2..=200).contains(&points) || !(from_dbw < to_dbw) {
        return Err(Error::Config("need 2..=200 points over an increasing range".into()));
    }
    let modulation: ModulationScheme = modulation.parse()?;
    let x: Vec<f64> = (0..points)
        .map(|k| from_dbw + (to_dbw - from_dbw) * k as f64 / (points - 1) as f64)
        .collect();
    let y = x
        .iter()
        .map(|&p| {
            let cfg = knobs.params(p).to_link_config()?;
            let r = match metric {
                "bep" => bit_error_probability(&cfg, modulation, Method::Quadrature)?,
                "capacity" => ergodic_capacity(&cfg, Method::Quadrature)?,
                other => return Err(Error::Config(format!("unknown metric '{other}'"))),
            };
            Ok(r.value)
        })
        .collect::<Result<_>>()?;
    Ok(Curve { x, y })
}

#[wasm_bindgen]
#[derive(Debug, Clone, PartialEq)]
pub struct Density {
    edges: Vec<f64>,
    histogram: Vec<f64>,
    analytic: Vec<f64>,
}

#[wasm_bindgen]
impl Density {
    /// `bins + 1` bin edges.
    #[wasm_bindgen(getter)]
    pub fn edges(&self) -> Vec<f64> {
        self.edges.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn histogram(&self) -> Vec<f64> {
        self.histogram.clone()
    }

    /// Quadrature density at each bin's geometric centre.
    #[wasm_bindgen(getter)]
    pub fn analytic(&self) -> Vec<f64> {
        self.analytic.clone()
    }
}

/// Monte Carlo SINR histogram next to the quadrature density.
pub fn sinr_density(
    tx_power_dbw: f64,
    knobs: Knobs,
    samples: u64,
    bins: usize,
    seed: u64,
) -> Result<Density> {
    let cfg = knobs.params(tx_power_dbw).to_link_config()?;
    let h = empirical_sinr_pdf(&cfg, samples, bins, seed)?;
    let analytic = h
        .edges
        .windows(2)
        .map(|e| sinr_pdf_quadrature(&cfg, (e[0] * e[1]).sqrt()).map(|r| r.value))
        .collect::<Result<_>>()?;
    Ok(Density {
        edges: h.edges,
        histogram: h.densities,
        analytic,
    })
}

#[wasm_bindgen]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PayloadTrial {
    pub total_bits: usize,
    pub flipped_bits: usize,
    pub clean_matches: usize,
    pub kept_matches: usize,
    pub preservation: f64,
}

/// Send the standard fixture's second view through a binary symmetric
/// channel and re-match it against the first view.
pub fn payload_trial(bep: f64, seed: u64) -> Result<PayloadTrial> {
    let original = standard_fixture();
    let view = perturbed_view(&original, (4, -3), 0.02, FIXTURE_SEED.wrapping_add(1))?;
    let clean = match_descriptors(&original, &view, DEFAULT_RATIO)?;
    let wire = encode_message(&view)?;
    let rx_bytes = corrupt_bits(&wire, bep, seed)?;
    let flipped_bits = wire
        .iter()
        .zip(&rx_bytes)
        .map(|(a, b)| (a ^ b).count_ones() as usize)
        .sum();
    let noisy = match_descriptors(&original, &decode_message(&rx_bytes)?, DEFAULT_RATIO)?;
    let preservation = match_preservation_ratio(&clean, &noisy)?;
    let set: std::collections::HashSet<_> = noisy.iter().collect();
    Ok(PayloadTrial {
        total_bits: wire.len() * 8,
        flipped_bits,
        clean_matches: clean.len(),
        kept_matches: clean.iter().filter(|p| set.contains(p)).count(),
        preservation,
    })
}

fn js(e: Error) -> JsError {
    JsError::new(&e.to_string())
}

#[wasm_bindgen(js_name = linkCurve)]
pub fn link_curve_js(
    metric: &str,
    modulation: &str,
    interference_power_dbw: f64,
    distance_m: f64,
    mean_power: f64,
    from_dbw: f64,
    to_dbw: f64,
    points: usize,
) -> std::result::Result<Curve, JsError> {
    let knobs = Knobs {
        interference_power_dbw,
        distance_m,
        mean_power,
    };
    link_curve(metric, modulation, knobs, from_dbw, to_dbw, points).map_err(js)
}

#[wasm_bindgen(js_name = sinrDensity)]
pub fn sinr_density_js(
    tx_power_dbw: f64,
    interference_power_dbw: f64,
    distance_m: f64,
    mean_power: f64,
    samples: u32,
    bins: usize,
    seed: u32,
) -> std::result::Result<Density, JsError> {
    let knobs = Knobs {
        interference_power_dbw,
        distance_m,
        mean_power,
    };
    sinr_density(tx_power_dbw, knobs, samples as u64, bins, seed as u64).map_err(js)
}

#[wasm_bindgen(js_name = payloadTrial)]
pub fn payload_trial_js(bep: f64, seed: u32) -> std::result::Result<PayloadTrial, JsError> {
    payload_trial(bep, seed as u64).map_err(js)
}
