//! Device configuration file.

use std::collections::HashSet;
use std::path::Path;

use muxctl_core::cz::{CalibrationOptions, CouplerSystemSpec, DynamicsOptions, FluxPulse};
use muxctl_core::leakage::TransmonSpec;
use muxctl_core::mux::{FilterTemplate, FrequencyPlan};
use muxctl_core::pulse::{TimingConfig, XyLineSpec};
use serde::{Deserialize, Serialize};

use crate::error::CliError;
use crate::io::{read_text, sha256_hex};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QubitConfig {
    pub name: String,
    pub freq_hz: f64,
    pub anharmonicity_hz: f64,
    /// Truncation for single-transmon simulations.
    pub levels: usize,
}

fn default_ramp() -> f64 {
    20e-9
}

fn default_flat() -> f64 {
    200e-9
}

fn default_cz_levels() -> usize {
    4
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplerConfig {
    pub name: String,
    /// Qubit indices.
    pub pair: [usize; 2],
    pub idle_hz: f64,
    /// Activated bias during the flux pulse.
    pub hold_hz: f64,
    pub anharmonicity_hz: f64,
    pub g1c_hz: f64,
    pub g2c_hz: f64,
    #[serde(default)]
    pub g12_hz: f64,
    /// Truncation per mode in the three-mode model.
    #[serde(default = "default_cz_levels")]
    pub levels: usize,
    #[serde(default = "default_ramp")]
    pub ramp_s: f64,
    #[serde(default = "default_flat")]
    pub flat_s: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SharedLine {
    pub id: String,
    /// Coupler names.
    pub couplers: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinesConfig {
    pub xy: Vec<XyLineSpec>,
    #[serde(default)]
    pub z: Vec<SharedLine>,
    #[serde(default)]
    pub coupler_xy: Vec<SharedLine>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorConfig {
    #[serde(default)]
    pub cz: Option<DynamicsOptions>,
    #[serde(default)]
    pub calibration: Option<CalibrationOptions>,
}

fn no_filter() -> FilterTemplate {
    FilterTemplate::None
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceConfig {
    pub name: String,
    pub qubits: Vec<QubitConfig>,
    #[serde(default)]
    pub couplers: Vec<CouplerConfig>,
    pub lines: LinesConfig,
    pub frequency_plan: FrequencyPlan,
    #[serde(default = "no_filter")]
    pub filter: FilterTemplate,
    #[serde(default)]
    pub timing: TimingConfig,
    #[serde(default)]
    pub integrator: IntegratorConfig,
    #[serde(default)]
    pub seed: u64,
}

/// A parsed config and the digest of its bytes.
pub struct LoadedDevice {
    pub config: DeviceConfig,
    pub sha256: String,
}

pub fn load_device(path: &Path) -> Result<LoadedDevice, CliError> {
    let text = read_text(path)?;
    let config: DeviceConfig = serde_json::from_str(&text)
        .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
    config.validate()?;
    Ok(LoadedDevice { config, sha256: sha256_hex(text.as_bytes()) })
}

impl DeviceConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Validation(m));
        if self.qubits.is_empty() {
            return bad("device has no qubits".into());
        }
        let mut names = HashSet::new();
        for n in self.qubits.iter().map(|q| &q.name).chain(self.couplers.iter().map(|c| &c.name)) {
            if !names.insert(n.as_str()) {
                return bad(format!("duplicate element name '{n}'"));
            }
        }
        let nq = self.qubits.len();
        let mut homes = vec![0usize; nq];
        for l in &self.lines.xy {
            for &q in &l.qubits {
                if q >= nq {
                    return bad(format!("XY line '{}' lists qubit {q} of {nq}", l.id));
                }
                homes[q] += 1;
            }
        }
        if let Some(q) = homes.iter().position(|&h| h != 1) {
            return bad(format!("qubit '{}' must sit on exactly one XY line", self.qubits[q].name));
        }
        let mut pairs = HashSet::new();
        for c in &self.couplers {
            let [a, b] = c.pair;
            if a >= nq || b >= nq || a == b {
                return bad(format!("coupler '{}' joins invalid qubits {a}, {b}", c.name));
            }
            if !pairs.insert((a.min(b), a.max(b))) {
                return bad(format!("second coupler on pair {a}, {b}"));
            }
        }
        for l in self.lines.z.iter().chain(&self.lines.coupler_xy) {
            for m in &l.couplers {
                if !self.couplers.iter().any(|c| &c.name == m) {
                    return bad(format!("line '{}' lists unknown coupler '{m}'", l.id));
                }
            }
        }
        self.frequency_plan.validate()?;
        for q in &self.qubits {
            if self.frequency_plan.nominal(&q.name).is_none() {
                return bad(format!("qubit '{}' has no frequency assignment", q.name));
            }
        }
        Ok(())
    }

    pub fn qubit_names(&self) -> Vec<String> {
        self.qubits.iter().map(|q| q.name.clone()).collect()
    }

    pub fn coupler_pairs(&self) -> Vec<(usize, usize)> {
        self.couplers.iter().map(|c| (c.pair[0], c.pair[1])).collect()
    }

    pub fn transmon(&self, name: Option<&str>) -> Result<TransmonSpec, CliError> {
        let q = match name {
            Some(n) => self
                .qubits
                .iter()
                .find(|q| q.name == n)
                .ok_or_else(|| CliError::Validation(format!("no qubit named '{n}'")))?,
            None => &self.qubits[0],
        };
        Ok(TransmonSpec { f01_hz: q.freq_hz, anharmonicity_hz: q.anharmonicity_hz, levels: q.levels })
    }

    pub fn coupler(&self, name: Option<&str>) -> Result<&CouplerConfig, CliError> {
        match name {
            Some(n) => self.couplers.iter().find(|c| c.name == n),
            None => self.couplers.first(),
        }
        .ok_or_else(|| CliError::Validation(format!("no coupler '{}'", name.unwrap_or("(any)"))))
    }

    /// Three-mode model of a coupler and its two qubits.
    pub fn cz_system(&self, c: &CouplerConfig) -> CouplerSystemSpec {
        let (q1, q2) = (&self.qubits[c.pair[0]], &self.qubits[c.pair[1]]);
        CouplerSystemSpec::transmons(
            q1.freq_hz,
            q2.freq_hz,
            c.idle_hz,
            [q1.anharmonicity_hz, c.anharmonicity_hz, q2.anharmonicity_hz],
            c.g1c_hz,
            c.g2c_hz,
            c.g12_hz,
            c.levels,
        )
    }

    pub fn flux_pulse(&self, c: &CouplerConfig) -> FluxPulse {
        FluxPulse { idle_hz: c.idle_hz, hold_hz: c.hold_hz, rise_s: c.ramp_s, flat_s: c.flat_s, fall_s: c.ramp_s }
    }

    pub fn dynamics(&self) -> DynamicsOptions {
        self.integrator.cz.unwrap_or_default()
    }

    pub fn calibration(&self) -> CalibrationOptions {
        let mut c = self.integrator.calibration.unwrap_or_default();
        if let Some(d) = self.integrator.cz {
            c.dynamics = d;
        }
        c
    }
}
