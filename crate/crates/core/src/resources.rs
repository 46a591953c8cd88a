//! Wiring, multiplicity and heat-load arithmetic for multiplexed control.
//!
//! Readout lines are not counted anywhere in this module.

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

/// Reduced Planck constant in J·s.
pub const HBAR: f64 = 1.054_571_817e-34;

pub const READOUT_NOTE: &str = "readout lines excluded";

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ResourceError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

/// `floor(W/Δf)`.
pub fn multiplicity(band_hz: f64, spacing_hz: f64) -> Result<u64, ResourceError> {
    if !(spacing_hz > 0.0 && band_hz >= spacing_hz && band_hz.is_finite()) {
        return Err(ResourceError::InvalidInput(format!("need W ≥ Δf > 0, got W = {band_hz}, Δf = {spacing_hz}")));
    }
    // guard against 1e9/1e7 = 99.999…
    Ok((band_hz / spacing_hz * (1.0 + 1e-12)).floor() as u64)
}

/// Square lattice of qubits with nearest-neighbour couplers.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatticeSpec {
    pub rows: u64,
    pub cols: u64,
}

impl LatticeSpec {
    pub fn qubits(&self) -> u64 {
        self.rows * self.cols
    }

    pub fn couplers(&self) -> u64 {
        if self.qubits() == 0 {
            return 0;
        }
        2 * self.rows * self.cols - self.rows - self.cols
    }

    /// Near-square lattice holding at least `n` qubits.
    pub fn for_qubits(n: u64) -> Self {
        if n == 0 {
            return LatticeSpec { rows: 0, cols: 0 };
        }
        let rows = (n as f64).sqrt().ceil() as u64;
        LatticeSpec { rows, cols: n.div_ceil(rows) }
    }

    /// Couplers grouped by row: the horizontal couplers of qubit row `r`
    /// followed by the vertical couplers between rows `r` and `r + 1`.
    fn coupler_rows(&self) -> impl Iterator<Item = u64> + '_ {
        (0..self.rows).map(move |r| self.cols.saturating_sub(1) + if r + 1 < self.rows { self.cols } else { 0 })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Traditional,
    Multiplexed,
}

/// Line-sharing topology of the multiplexed layout.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SharingRules {
    /// Interleaved Z lines per coupler row.
    pub z_lines_per_coupler_row: u64,
    /// Coupler XY lines per coupler row.
    pub xy_lines_per_coupler_row: u64,
}

impl Default for SharingRules {
    fn default() -> Self {
        SharingRules { z_lines_per_coupler_row: 2, xy_lines_per_coupler_row: 1 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WireCounts {
    pub qubit_xy: u64,
    pub coupler_z: u64,
    pub coupler_xy: u64,
    pub total: u64,
}

/// Lines needed to serve `n` elements split round-robin over `k` shared
/// lines, each holding at most `m` elements.
fn shared_lines(n: u64, k: u64, m: u64) -> u64 {
    let k = k.max(1);
    (0..k).map(|i| (n / k + u64::from(i < n % k)).div_ceil(m)).sum()
}

pub fn wire_counts(lattice: &LatticeSpec, scheme: Scheme, m_cap: u64, rules: &SharingRules) -> WireCounts {
    let (qubit_xy, coupler_z, coupler_xy) = match scheme {
        Scheme::Traditional => (lattice.qubits(), lattice.couplers(), 0),
        Scheme::Multiplexed => {
            let m = m_cap.max(1);
            let qxy = lattice.rows * lattice.cols.div_ceil(m);
            let (mut z, mut cxy) = (0, 0);
            for n in lattice.coupler_rows() {
                z += shared_lines(n, rules.z_lines_per_coupler_row, m);
                cxy += shared_lines(n, rules.xy_lines_per_coupler_row, m);
            }
            (qxy, z, cxy)
        }
    };
    WireCounts { qubit_xy, coupler_z, coupler_xy, total: qubit_xy + coupler_z + coupler_xy }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeatLoad {
    pub watts: f64,
    pub dbm: f64,
}

/// Active load of one drive tone, `(√π/6)·ħ·ω_q·T₁·Ω_d²` (angular
/// frequencies in rad/s).
pub fn heat_load_per_tone(omega_q: f64, t1_s: f64, omega_d: f64) -> Result<HeatLoad, ResourceError> {
    if !(omega_q > 0.0 && t1_s > 0.0 && omega_d > 0.0) {
        return Err(ResourceError::InvalidInput("heat load needs positive ω_q, T₁ and Ω_d".into()));
    }
    let watts = PI.sqrt() / 6.0 * HBAR * omega_q * t1_s * omega_d * omega_d;
    Ok(HeatLoad { watts, dbm: watts_to_dbm(watts) })
}

pub fn watts_to_dbm(w: f64) -> f64 {
    10.0 * (w / 1e-3).log10()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorScaling {
    pub t1: f64,
    pub gate_time: f64,
    pub error: f64,
}

/// Relative `T₁`, gate time and error when the environmental coupling is
/// scaled by `s`.
pub fn error_scaling(s: f64) -> Result<ErrorScaling, ResourceError> {
    if !(s > 0.0 && s.is_finite()) {
        return Err(ResourceError::InvalidInput(format!("coupling scale must be positive, got {s}")));
    }
    Ok(ErrorScaling { t1: s.powi(-2), gate_time: 1.0 / s, error: s })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BudgetSpec {
    pub band_hz: f64,
    pub spacing_hz: f64,
    pub cables: u64,
    pub qubit_hz: f64,
    pub t1_s: f64,
    /// Rabi frequency in rad/s.
    pub drive_rad_s: f64,
    pub gate_time_s: f64,
    /// Passive conduction per cable in W, supplied by the user.
    pub passive_per_cable_w: f64,
}

impl BudgetSpec {
    /// 1 GHz band at 10 MHz spacing, 1000 cables, 5 GHz qubits with
    /// `T₁ = 10 ms` driven at 1.6 MHz.
    pub fn reference() -> Self {
        BudgetSpec {
            band_hz: 1e9,
            spacing_hz: 10e6,
            cables: 1000,
            qubit_hz: 5e9,
            t1_s: 10e-3,
            drive_rad_s: 2.0 * PI * 1.6e6,
            gate_time_s: 100e-9,
            passive_per_cable_w: 0.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityReport {
    pub qubits: u64,
    pub lattice: LatticeSpec,
    pub multiplicity: u64,
    pub scheme: Scheme,
    /// Shared qubit-XY cables with every line filled to `M`.
    pub xy_cables_required: u64,
    pub cable_budget: u64,
    pub feasible: bool,
    /// Line counts of the lattice layout.
    pub traditional: WireCounts,
    pub layout: WireCounts,
    pub reduction_ratio: f64,
    pub tone: HeatLoad,
    /// One attenuator carrying `M` tones.
    pub per_attenuator: HeatLoad,
    pub total_active_w: f64,
    pub total_passive_w: f64,
    pub note: String,
}

pub fn system_feasibility(
    budget: &BudgetSpec,
    qubits: u64,
    lattice: &LatticeSpec,
    rules: &SharingRules,
) -> Result<FeasibilityReport, ResourceError> {
    let m = multiplicity(budget.band_hz, budget.spacing_hz)?;
    let tone = heat_load_per_tone(2.0 * PI * budget.qubit_hz, budget.t1_s, budget.drive_rad_s)?;
    // M = 1 leaves nothing to share
    let scheme = if m == 1 { Scheme::Traditional } else { Scheme::Multiplexed };
    let xy = qubits.div_ceil(m);
    let traditional = wire_counts(lattice, Scheme::Traditional, m, rules);
    let layout = wire_counts(lattice, scheme, m, rules);
    let per_attenuator_w = tone.watts * m.min(qubits.max(1)) as f64;
    Ok(FeasibilityReport {
        qubits,
        lattice: *lattice,
        multiplicity: m,
        scheme,
        xy_cables_required: xy,
        cable_budget: budget.cables,
        feasible: xy <= budget.cables,
        traditional,
        layout,
        reduction_ratio: if layout.total == 0 { 1.0 } else { traditional.total as f64 / layout.total as f64 },
        tone,
        per_attenuator: HeatLoad { watts: per_attenuator_w, dbm: watts_to_dbm(per_attenuator_w) },
        total_active_w: tone.watts * qubits as f64,
        total_passive_w: budget.passive_per_cable_w * xy as f64,
        note: READOUT_NOTE.into(),
    })
}

impl fmt::Display for FeasibilityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let row = |f: &mut fmt::Formatter<'_>, k: &str, v: String| writeln!(f, "{k:<28}{v}");
        row(f, "qubits", self.qubits.to_string())?;
        row(f, "multiplicity M", self.multiplicity.to_string())?;
        row(f, "shared XY cables", format!("{} of {}", self.xy_cables_required, self.cable_budget))?;
        row(f, "feasible", if self.feasible { "yes".into() } else { "no".into() })?;
        row(f, "lattice", format!("{}x{}", self.lattice.rows, self.lattice.cols))?;
        for (name, w) in [("traditional", &self.traditional), ("layout", &self.layout)] {
            row(
                f,
                &format!("{name} lines"),
                format!("{} (XY {}, Z {}, coupler XY {})", w.total, w.qubit_xy, w.coupler_z, w.coupler_xy),
            )?;
        }
        row(f, "reduction", format!("{:.2}x", self.reduction_ratio))?;
        row(f, "heat per tone", format!("{:.3e} W ({:.2} dBm)", self.tone.watts, self.tone.dbm))?;
        row(f, "heat per attenuator", format!("{:.3e} W ({:.2} dBm)", self.per_attenuator.watts, self.per_attenuator.dbm))?;
        row(f, "total active", format!("{:.3e} W", self.total_active_w))?;
        row(f, "total passive", format!("{:.3e} W", self.total_passive_w))?;
        write!(f, "({})", self.note)
    }
}
