//! Shared-line frequency plans and the branch-filter multiplexer.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal as NormalDist};

pub const MAX_FILTER_ORDER: u32 = 20;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum MuxError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("no filter order up to {MAX_FILTER_ORDER} meets the targets")]
    Infeasible,
    #[error("element '{0}' is not on the line")]
    UnknownElement(String),
}

/// Branch filter response family.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FilterTemplate {
    Butterworth { bandwidth_hz: f64, order: u32 },
    /// Infinite-order limit: only the element's own tone passes.
    Ideal { bandwidth_hz: f64 },
    /// No filtering at all (0 dB everywhere).
    None,
}

impl FilterTemplate {
    pub fn at(self, center_hz: f64) -> FilterSpec {
        FilterSpec {
            center_hz,
            template: self,
        }
    }

    pub fn bandwidth_hz(&self) -> Option<f64> {
        match *self {
            FilterTemplate::Butterworth { bandwidth_hz, .. } | FilterTemplate::Ideal { bandwidth_hz } => {
                Some(bandwidth_hz)
            }
            FilterTemplate::None => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FilterSpec {
    pub center_hz: f64,
    pub template: FilterTemplate,
}

fn butterworth_db(offset: f64, bandwidth: f64, order: u32) -> f64 {
    let x = (offset / (bandwidth / 2.0)).abs();
    10.0 * (x.powi(2 * order as i32)).ln_1p() / std::f64::consts::LN_10
}

/// Attenuation in dB, `10·log₁₀(1 + ((f − c)/(B/2))^(2n))` for Butterworth.
///
/// The ideal filter reports 0 dB inside its passband and infinity outside.
pub fn filter_attenuation_db(spec: &FilterSpec, f_hz: f64) -> Result<f64, MuxError> {
    if !(f_hz > 0.0) {
        return Err(MuxError::InvalidInput(format!("frequency must be positive, got {f_hz}")));
    }
    Ok(match spec.template {
        FilterTemplate::Butterworth { bandwidth_hz, order } => {
            butterworth_db(f_hz - spec.center_hz, bandwidth_hz, order)
        }
        FilterTemplate::Ideal { bandwidth_hz } => {
            if (f_hz - spec.center_hz).abs() <= bandwidth_hz / 2.0 {
                0.0
            } else {
                f64::INFINITY
            }
        }
        FilterTemplate::None => 0.0,
    })
}

/// Amplitude transmission `10^(−A/20)`.
pub fn amplitude_scale(spec: &FilterSpec, f_hz: f64) -> Result<f64, MuxError> {
    Ok(10f64.powf(-filter_attenuation_db(spec, f_hz)? / 20.0))
}

/// Smallest Butterworth order meeting every `(offset, min dB)` target.
pub fn min_filter_order(bandwidth_hz: f64, targets: &[(f64, f64)]) -> Result<u32, MuxError> {
    if !(bandwidth_hz > 0.0) {
        return Err(MuxError::InvalidInput("bandwidth must be positive".into()));
    }
    for &(offset, _) in targets {
        if offset.abs() <= bandwidth_hz / 2.0 {
            return Err(MuxError::InvalidInput(format!(
                "target offset {offset} Hz lies inside the passband"
            )));
        }
    }
    (1..=MAX_FILTER_ORDER)
        .find(|&n| {
            targets
                .iter()
                .all(|&(offset, db)| butterworth_db(offset, bandwidth_hz, n) >= db)
        })
        .ok_or(MuxError::Infeasible)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    pub element: String,
    pub nominal_hz: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrequencyPlan {
    pub base_frequency_hz: f64,
    pub spacing_hz: f64,
    pub band_hz: f64,
    pub assignments: Vec<Assignment>,
    #[serde(default)]
    pub jitter_sigma_hz: f64,
    /// Defaults to the nominal frequencies.
    #[serde(default)]
    pub realized_hz: Vec<f64>,
}

impl FrequencyPlan {
    /// Elements at `base + k·Δf` in the given order.
    pub fn uniform(
        base_frequency_hz: f64,
        spacing_hz: f64,
        band_hz: f64,
        elements: &[&str],
    ) -> Result<Self, MuxError> {
        let plan = Self {
            base_frequency_hz,
            spacing_hz,
            band_hz,
            assignments: elements
                .iter()
                .enumerate()
                .map(|(k, e)| Assignment {
                    element: e.to_string(),
                    nominal_hz: base_frequency_hz + k as f64 * spacing_hz,
                })
                .collect(),
            jitter_sigma_hz: 0.0,
            realized_hz: Vec::new(),
        };
        plan.validate()?;
        Ok(plan)
    }

    pub fn validate(&self) -> Result<(), MuxError> {
        if !(self.spacing_hz > 0.0) || !(self.band_hz >= self.spacing_hz) {
            return Err(MuxError::InvalidInput(format!(
                "need band ≥ spacing > 0, got band {} Hz, spacing {} Hz",
                self.band_hz, self.spacing_hz
            )));
        }
        if !(self.jitter_sigma_hz >= 0.0) {
            return Err(MuxError::InvalidInput("jitter sigma must be non-negative".into()));
        }
        let m_max = (self.band_hz / self.spacing_hz + 1e-9).floor() as usize;
        if self.assignments.len() > m_max {
            return Err(MuxError::InvalidInput(format!(
                "{} elements exceed the multiplicity {m_max} of the band",
                self.assignments.len()
            )));
        }
        for (k, a) in self.assignments.iter().enumerate() {
            let expect = self.base_frequency_hz + k as f64 * self.spacing_hz;
            if (a.nominal_hz - expect).abs() > 1e-6 * self.spacing_hz {
                return Err(MuxError::InvalidInput(format!(
                    "element '{}' at {} Hz is off the uniform grid (expected {expect} Hz)",
                    a.element, a.nominal_hz
                )));
            }
        }
        if !self.realized_hz.is_empty() && self.realized_hz.len() != self.assignments.len() {
            return Err(MuxError::InvalidInput("realized frequency count mismatch".into()));
        }
        Ok(())
    }

    pub fn nominal(&self, element: &str) -> Option<f64> {
        self.assignments
            .iter()
            .find(|a| a.element == element)
            .map(|a| a.nominal_hz)
    }

    pub fn realized(&self, element: &str) -> Option<f64> {
        let k = self.assignments.iter().position(|a| a.element == element)?;
        Some(self.realized_hz.get(k).copied().unwrap_or(self.assignments[k].nominal_hz))
    }
}

/// A tone present on a shared line.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LineTone {
    pub freq_hz: f64,
    /// Line amplitude in arbitrary linear units (Rabi rate when simulated).
    pub amplitude: f64,
    pub phase: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LineModel {
    pub id: String,
    /// Element names; each has one branch filter centred at its plan frequency.
    pub elements: Vec<String>,
    pub template: FilterTemplate,
    pub tones: Vec<LineTone>,
}

/// Every line tone as seen behind `element`'s branch filter.
pub fn effective_tones_at(
    element: &str,
    line: &LineModel,
    plan: &FrequencyPlan,
) -> Result<Vec<LineTone>, MuxError> {
    if !line.elements.iter().any(|e| e == element) {
        return Err(MuxError::UnknownElement(element.to_string()));
    }
    let center = plan
        .nominal(element)
        .ok_or_else(|| MuxError::UnknownElement(element.to_string()))?;
    let spec = line.template.at(center);
    line.tones
        .iter()
        .map(|t| {
            Ok(LineTone {
                amplitude: t.amplitude * amplitude_scale(&spec, t.freq_hz)?,
                ..*t
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CollisionReport {
    pub trials: usize,
    pub collisions: usize,
    pub fraction: f64,
    /// Independent-element Gaussian estimate of the same probability.
    pub gaussian_estimate: f64,
    pub guard_hz: f64,
}

fn collides(i: usize, f: f64, centers: &[f64], half_bw: f64, guard: f64) -> bool {
    if (f - centers[i]).abs() > half_bw {
        return true;
    }
    centers
        .iter()
        .enumerate()
        .any(|(j, &c)| j != i && (f - c).abs() < guard)
}

/// Probability that one element with offset `x ~ N(0, σ²)` collides.
fn element_collision_probability(i: usize, centers: &[f64], half_bw: f64, guard: f64, sigma: f64) -> f64 {
    if sigma == 0.0 {
        return if collides(i, centers[i], centers, half_bw, guard) { 1.0 } else { 0.0 };
    }
    let n = NormalDist::new(0.0, sigma).expect("positive sigma");
    let outside = 2.0 * n.cdf(-half_bw);
    // guard intervals of neighbours, clipped to the own passband and merged
    let mut spans: Vec<(f64, f64)> = centers
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != i)
        .map(|(_, &c)| {
            let d = c - centers[i];
            ((d - guard).max(-half_bw), (d + guard).min(half_bw))
        })
        .filter(|(a, b)| b > a)
        .collect();
    spans.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut inside = 0.0;
    let mut cursor = f64::NEG_INFINITY;
    for (a, b) in spans {
        let a = a.max(cursor);
        if b > a {
            inside += n.cdf(b) - n.cdf(a);
            cursor = b;
        }
    }
    (outside + inside).min(1.0)
}

/// Monte-Carlo collision rate under Gaussian per-element jitter.
///
/// A trial collides when any realized frequency leaves its own passband or
/// comes within `guard_hz` of another element's filter centre. Trial `k`
/// draws from ChaCha stream `k` of `seed`, so the result does not depend on
/// the worker count.
pub fn validate_plan(
    plan: &FrequencyPlan,
    template: &FilterTemplate,
    guard_hz: f64,
    trials: usize,
    seed: u64,
) -> Result<CollisionReport, MuxError> {
    plan.validate()?;
    let half_bw = template.bandwidth_hz().unwrap_or(plan.spacing_hz) / 2.0;
    let sigma = plan.jitter_sigma_hz;
    let centers: Vec<f64> = plan.assignments.iter().map(|a| a.nominal_hz).collect();
    let normal = Normal::new(0.0, sigma).map_err(|e| MuxError::InvalidInput(e.to_string()))?;
    let collisions = (0..trials)
        .into_par_iter()
        .filter(|&k| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(k as u64);
            centers
                .iter()
                .enumerate()
                .any(|(i, &c)| collides(i, c + normal.sample(&mut rng), &centers, half_bw, guard_hz))
        })
        .count();
    let survive: f64 = (0..centers.len())
        .map(|i| 1.0 - element_collision_probability(i, &centers, half_bw, guard_hz, sigma))
        .product();
    Ok(CollisionReport {
        trials,
        collisions,
        fraction: if trials == 0 { 0.0 } else { collisions as f64 / trials as f64 },
        gaussian_estimate: 1.0 - survive,
        guard_hz,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bw(order: u32) -> FilterTemplate {
        FilterTemplate::Butterworth {
            bandwidth_hz: 50e6,
            order,
        }
    }

    #[test]
    fn attenuation_examples() {
        let s = bw(3).at(5e9);
        assert_eq!(filter_attenuation_db(&s, 5e9).unwrap(), 0.0);
        let a200 = filter_attenuation_db(&s, 5.2e9).unwrap();
        assert!((a200 - 10.0 * (1.0 + 8f64.powi(6)).log10()).abs() < 1e-9);
        assert!((a200 - 54.19).abs() < 0.01);
        let a100 = filter_attenuation_db(&s, 4.9e9).unwrap();
        assert!((a100 - 36.12).abs() < 0.01);
        assert!(filter_attenuation_db(&s, 0.0).is_err());
    }

    #[test]
    fn order_search() {
        assert_eq!(min_filter_order(50e6, &[(200e6, 40.0), (100e6, 10.0)]).unwrap(), 3);
        assert_eq!(min_filter_order(50e6, &[(100e6, 10.0)]).unwrap(), 1);
        assert!(matches!(
            min_filter_order(100e6, &[(30e6, 10.0)]),
            Err(MuxError::InvalidInput(_))
        ));
        assert_eq!(min_filter_order(50e6, &[(30e6, 400.0)]), Err(MuxError::Infeasible));
    }

    #[test]
    fn plan_rejects_overfull_band() {
        assert!(FrequencyPlan::uniform(5e9, 50e6, 100e6, &["a", "b", "c"]).is_err());
        assert!(FrequencyPlan::uniform(5e9, 50e6, 150e6, &["a", "b", "c"]).is_ok());
    }

    fn line(template: FilterTemplate) -> (LineModel, FrequencyPlan) {
        let plan = FrequencyPlan::uniform(5e9, 50e6, 1e9, &["q0", "q1"]).unwrap();
        let line = LineModel {
            id: "xy0".into(),
            elements: vec!["q0".into(), "q1".into()],
            template,
            tones: vec![
                LineTone { freq_hz: 5e9, amplitude: 1.0, phase: 0.0 },
                LineTone { freq_hz: 5.05e9, amplitude: 1.0, phase: 0.3 },
            ],
        };
        (line, plan)
    }

    #[test]
    fn neighbour_scale_order_three() {
        let (l, p) = line(bw(3));
        let t = effective_tones_at("q0", &l, &p).unwrap();
        assert_eq!(t[0].amplitude, 1.0);
        let expect = 10f64.powf(-10.0 * 65f64.log10() / 20.0);
        assert!((t[1].amplitude - expect).abs() < 1e-12);
        assert!((t[1].amplitude - 0.124).abs() < 1e-3);
        assert_eq!(t[1].phase, 0.3);
    }

    #[test]
    fn ideal_and_absent_filters() {
        let (l, p) = line(FilterTemplate::Ideal { bandwidth_hz: 50e6 });
        let t = effective_tones_at("q1", &l, &p).unwrap();
        assert_eq!((t[0].amplitude, t[1].amplitude), (0.0, 1.0));
        let (l, p) = line(FilterTemplate::None);
        let t = effective_tones_at("q1", &l, &p).unwrap();
        assert_eq!((t[0].amplitude, t[1].amplitude), (1.0, 1.0));
        assert!(effective_tones_at("q7", &l, &p).is_err());
    }

    #[test]
    fn no_jitter_no_collisions() {
        let plan = FrequencyPlan::uniform(5e9, 50e6, 1e9, &["a", "b", "c", "d"]).unwrap();
        let r = validate_plan(&plan, &bw(3), 25e6, 200, 1).unwrap();
        assert_eq!(r.collisions, 0);
        assert_eq!(r.gaussian_estimate, 0.0);
    }
}
