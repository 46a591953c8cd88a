//! Qubit–tunable-coupler–qubit model.
//!
//! Modes are ordered `(q1, c, q2)`; a bare label `[a, c, b]` is written
//! `|a c b⟩`. Couplings are excitation-conserving exchange terms.

mod calibrate;
mod dynamics;
mod spectrum;

pub use calibrate::{calibrate_phase, Calibration, CalibrationOptions};
pub use dynamics::{
    adiabatic_phase, conditional_phase, default_landscape_axes, simulate_tuning, squid_frequency_hz, tuning_landscape,
    two_level_phase, CurvePoint, DynamicsOptions, FluxPulse, Frame, TuningDrive, TuningLandscape,
    TuningResult,
};
pub use spectrum::{dressed_spectrum, zz_vs_coupler, DressedSpectrum, ZzPoint, LABEL_THRESHOLD};

use serde::{Deserialize, Serialize};

use crate::numerics::{hz_to_rad, ComplexMatrix, NumericsError, C64, MAX_EIGH_DIM};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum CzError {
    #[error("Hilbert dimension {dim} exceeds {max}")]
    DimensionOverflow { dim: usize, max: usize },
    #[error("label |{}{}{}⟩ has best overlap {overlap:.3} at coupler {coupler_hz:e} Hz", label[0], label[1], label[2])]
    LabelAmbiguity { label: [usize; 3], overlap: f64, coupler_hz: f64 },
    #[error("trajectory is not adiabatic: ramp {ramp_s:e} s < {required_s:e} s")]
    DiabaticTrajectory { ramp_s: f64, required_s: f64 },
    #[error("no drive reaches the target; best residual {residual:e} rad, leakage {leakage:e}")]
    NoSolution { residual: f64, leakage: f64 },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

/// One mode of the three-mode system.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModeSpec {
    /// Weakly anharmonic oscillator, `E_j = jω + αj(j−1)/2`.
    Duffing { freq_hz: f64, anharmonicity_hz: f64, levels: usize },
    /// Explicit level energies and coupling-operator matrix elements
    /// `coupling[j][k]` (`j < k` entries are used).
    Explicit { levels_hz: Vec<f64>, coupling: Vec<Vec<f64>> },
}

impl ModeSpec {
    pub fn levels(&self) -> usize {
        match self {
            ModeSpec::Duffing { levels, .. } => *levels,
            ModeSpec::Explicit { levels_hz, .. } => levels_hz.len(),
        }
    }

    /// 0→1 transition frequency.
    pub fn freq_hz(&self) -> f64 {
        match self {
            ModeSpec::Duffing { freq_hz, .. } => *freq_hz,
            ModeSpec::Explicit { levels_hz, .. } => levels_hz[1] - levels_hz[0],
        }
    }

    /// Level energy with the 0→1 frequency optionally replaced; the rest of
    /// the ladder moves rigidly with it.
    pub fn level_hz(&self, j: usize, freq_override: Option<f64>) -> f64 {
        let shift = freq_override.map_or(0.0, |f| f - self.freq_hz());
        let base = match self {
            ModeSpec::Duffing { freq_hz, anharmonicity_hz, .. } => {
                let j = j as f64;
                j * freq_hz + 0.5 * anharmonicity_hz * j * (j - 1.0)
            }
            ModeSpec::Explicit { levels_hz, .. } => levels_hz[j] - levels_hz[0],
        };
        base + shift * j as f64
    }

    /// `(lower, upper, ⟨lower|O|upper⟩)` for the lowering part of the
    /// coupling operator.
    pub fn lowering(&self) -> Vec<(usize, usize, f64)> {
        match self {
            ModeSpec::Duffing { levels, .. } => {
                (0..levels.saturating_sub(1)).map(|j| (j, j + 1, ((j + 1) as f64).sqrt())).collect()
            }
            ModeSpec::Explicit { coupling, .. } => {
                let mut out = Vec::new();
                for (j, row) in coupling.iter().enumerate() {
                    for (k, &v) in row.iter().enumerate() {
                        if k > j && v != 0.0 {
                            out.push((j, k, v));
                        }
                    }
                }
                out
            }
        }
    }

    fn validate(&self, name: &str) -> Result<(), CzError> {
        let bad = |m: &str| Err(CzError::InvalidInput(format!("{name}: {m}")));
        match self {
            ModeSpec::Duffing { freq_hz, anharmonicity_hz, levels } => {
                if *levels < 3 {
                    return bad("at least 3 levels required");
                }
                if !(freq_hz.is_finite() && *freq_hz > 0.0 && anharmonicity_hz.is_finite()) {
                    return bad("frequencies must be finite and positive");
                }
            }
            ModeSpec::Explicit { levels_hz, coupling } => {
                if levels_hz.len() < 3 {
                    return bad("at least 3 levels required");
                }
                if coupling.len() != levels_hz.len() || coupling.iter().any(|r| r.len() != levels_hz.len()) {
                    return bad("coupling matrix must be square with one row per level");
                }
                if levels_hz.windows(2).any(|w| !(w[1] > w[0])) {
                    return bad("levels must be strictly increasing");
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CouplerSystemSpec {
    pub qubit1: ModeSpec,
    pub coupler: ModeSpec,
    pub qubit2: ModeSpec,
    pub g1c_hz: f64,
    pub g2c_hz: f64,
    pub g12_hz: f64,
}

impl CouplerSystemSpec {
    /// Three Duffing modes with shared truncation.
    #[allow(clippy::too_many_arguments)]
    pub fn transmons(
        q1_hz: f64,
        q2_hz: f64,
        coupler_hz: f64,
        anharmonicity_hz: [f64; 3],
        g1c_hz: f64,
        g2c_hz: f64,
        g12_hz: f64,
        levels: usize,
    ) -> Self {
        let mode = |f, a| ModeSpec::Duffing { freq_hz: f, anharmonicity_hz: a, levels };
        CouplerSystemSpec {
            qubit1: mode(q1_hz, anharmonicity_hz[0]),
            coupler: mode(coupler_hz, anharmonicity_hz[1]),
            qubit2: mode(q2_hz, anharmonicity_hz[2]),
            g1c_hz,
            g2c_hz,
            g12_hz,
        }
    }

    /// 5.3 / 5.0 GHz qubits, −200 MHz anharmonicities, 100 MHz
    /// qubit–coupler and 10 MHz qubit–qubit coupling, coupler idling at
    /// 6.5 GHz.
    pub fn reference(levels: usize) -> Self {
        Self::transmons(5.3e9, 5.0e9, 6.5e9, [-200e6; 3], 100e6, 100e6, 10e6, levels)
    }

    pub fn modes(&self) -> [&ModeSpec; 3] {
        [&self.qubit1, &self.coupler, &self.qubit2]
    }

    pub fn dims(&self) -> [usize; 3] {
        self.modes().map(ModeSpec::levels)
    }

    pub fn dim(&self) -> usize {
        self.dims().iter().product()
    }

    /// Same system with the two qubits exchanged.
    pub fn swapped(&self) -> Self {
        CouplerSystemSpec {
            qubit1: self.qubit2.clone(),
            qubit2: self.qubit1.clone(),
            g1c_hz: self.g2c_hz,
            g2c_hz: self.g1c_hz,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<(), CzError> {
        self.qubit1.validate("qubit1")?;
        self.coupler.validate("coupler")?;
        self.qubit2.validate("qubit2")?;
        if ![self.g1c_hz, self.g2c_hz, self.g12_hz].iter().all(|g| g.is_finite()) {
            return Err(CzError::InvalidInput("couplings must be finite".into()));
        }
        let dim = self.dim();
        if dim > MAX_EIGH_DIM {
            return Err(CzError::DimensionOverflow { dim, max: MAX_EIGH_DIM });
        }
        Ok(())
    }
}

/// Product basis, optionally restricted to total level index `≤ cap`.
#[derive(Clone, Debug)]
pub(crate) struct Basis {
    pub dims: [usize; 3],
    pub states: Vec<[usize; 3]>,
    index: Vec<Option<usize>>,
}

impl Basis {
    pub fn new(dims: [usize; 3], cap: Option<usize>) -> Self {
        let mut states = Vec::new();
        let mut index = vec![None; dims.iter().product()];
        for a in 0..dims[0] {
            for c in 0..dims[1] {
                for b in 0..dims[2] {
                    if cap.is_some_and(|n| a + b + c > n) {
                        continue;
                    }
                    index[(a * dims[1] + c) * dims[2] + b] = Some(states.len());
                    states.push([a, c, b]);
                }
            }
        }
        Basis { dims, states, index }
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn find(&self, s: [usize; 3]) -> Option<usize> {
        if (0..3).any(|m| s[m] >= self.dims[m]) {
            return None;
        }
        self.index[(s[0] * self.dims[1] + s[1]) * self.dims[2] + s[2]]
    }

    pub fn excitations(&self, i: usize) -> usize {
        self.states[i].iter().sum()
    }
}

/// Pieces of `H(ω_c)` in rad/s: diagonal without the coupler frequency,
/// the coupler's level index, and the exchange terms.
#[derive(Clone, Debug)]
pub(crate) struct ModelParts {
    pub basis: Basis,
    pub diag_rest: Vec<f64>,
    /// Coupler diagonal is `coupler_scale[i] · ω_c`, relative to the bare
    /// ladder at `ω_c = 0`.
    pub coupler_scale: Vec<f64>,
    pub exchange: Vec<(usize, usize, f64)>,
    /// `(row, col, value)` of the coupler lowering operator.
    pub coupler_lowering: Vec<(usize, usize, f64)>,
    pub conserves_excitations: bool,
}

impl ModelParts {
    pub fn new(spec: &CouplerSystemSpec, cap: Option<usize>) -> Result<Self, CzError> {
        spec.validate()?;
        let basis = Basis::new(spec.dims(), cap);
        let modes = spec.modes();
        let mut diag_rest = Vec::with_capacity(basis.len());
        let mut coupler_scale = Vec::with_capacity(basis.len());
        for s in &basis.states {
            let q = modes[0].level_hz(s[0], None) + modes[2].level_hz(s[2], None);
            // coupler ladder with its 0→1 frequency removed
            let c = modes[1].level_hz(s[1], Some(0.0));
            diag_rest.push(hz_to_rad(q + c));
            coupler_scale.push(s[1] as f64);
        }
        let lowerings: Vec<_> = modes.iter().map(|m| m.lowering()).collect();
        let mut exchange = Vec::new();
        let mut conserves = true;
        for (m, n, g) in [(0, 1, spec.g1c_hz), (2, 1, spec.g2c_hz), (0, 2, spec.g12_hz)] {
            if g == 0.0 {
                continue;
            }
            // g (O_m⁺ O_n⁻ + h.c.): raise m, lower n
            for (i, s) in basis.states.iter().enumerate() {
                for &(lo, hi, v) in &lowerings[m] {
                    if s[m] != lo {
                        continue;
                    }
                    for &(lo2, hi2, v2) in &lowerings[n] {
                        if s[n] != hi2 {
                            continue;
                        }
                        let mut t = *s;
                        t[m] = hi;
                        t[n] = lo2;
                        if let Some(j) = basis.find(t) {
                            if hi - lo != hi2 - lo2 {
                                conserves = false;
                            }
                            exchange.push((j, i, hz_to_rad(g) * v * v2));
                        }
                    }
                }
            }
        }
        let mut coupler_lowering = Vec::new();
        for (i, s) in basis.states.iter().enumerate() {
            for &(lo, hi, v) in &lowerings[1] {
                if s[1] == hi {
                    let mut t = *s;
                    t[1] = lo;
                    if let Some(j) = basis.find(t) {
                        coupler_lowering.push((j, i, v));
                    }
                }
            }
        }
        Ok(ModelParts {
            basis,
            diag_rest,
            coupler_scale,
            exchange,
            coupler_lowering,
            conserves_excitations: conserves,
        })
    }

    /// Static Hamiltonian at coupler 0→1 frequency `wc` (rad/s).
    pub fn static_h(&self, wc: f64) -> ComplexMatrix {
        let n = self.basis.len();
        let mut h = ComplexMatrix::zeros(n, n);
        for i in 0..n {
            h[(i, i)] = C64::new(self.diag_rest[i] + self.coupler_scale[i] * wc, 0.0);
        }
        for &(j, i, v) in &self.exchange {
            h[(j, i)] += v;
            h[(i, j)] += v;
        }
        h
    }
}

/// `H = Σ_m E_m(n_m) + Σ_pairs g (O_m⁺O_n⁻ + h.c.)` in rad/s on the full
/// product basis, with the coupler 0→1 frequency optionally overridden.
pub fn build_hamiltonian(spec: &CouplerSystemSpec, coupler_hz: Option<f64>) -> Result<ComplexMatrix, CzError> {
    let parts = ModelParts::new(spec, None)?;
    let h = parts.static_h(hz_to_rad(coupler_hz.unwrap_or(spec.coupler.freq_hz())));
    crate::numerics::check_hermitian(&h)?;
    Ok(h)
}

/// Basis index of `|a c b⟩` in [`build_hamiltonian`] ordering.
pub fn basis_index(spec: &CouplerSystemSpec, label: [usize; 3]) -> Option<usize> {
    let d = spec.dims();
    ((0..3).all(|m| label[m] < d[m])).then(|| (label[0] * d[1] + label[1]) * d[2] + label[2])
}
