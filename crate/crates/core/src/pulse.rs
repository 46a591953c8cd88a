//! Waveform synthesis for shared XY lines.

use std::f64::consts::PI;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::circuit::Mat2;
use crate::compiler::{CompiledProgram, PairSlot, PhysicalCycle};
use crate::mux::{amplitude_scale, FilterTemplate, FrequencyPlan, MuxError};
use crate::numerics::{evolve_many, hz_to_rad, Hamiltonian, NumericsError, StateVector, C64};

/// Schedule time grid.
pub const GRID_S: f64 = 0.1e-9;
/// Largest relative change allowed when snapping a duration to the grid.
pub const GRID_ROUNDING_TOL: f64 = 0.005;

#[derive(Debug, thiserror::Error)]
pub enum PulseError {
    #[error("no frequency assignment or line for qubit {0}")]
    MissingAssignment(String),
    #[error("duration {duration_s:e} s is off the {GRID_S:e} s grid by more than 0.5%")]
    OffGrid { duration_s: f64 },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Mux(#[from] MuxError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum EnvelopeShape {
    Cosine,
    FlattopCosine { rise_s: f64, fall_s: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PulseEnvelope {
    #[serde(flatten)]
    pub shape: EnvelopeShape,
    pub duration_s: f64,
    /// Peak Rabi rate, rad/s.
    pub peak: f64,
}

impl PulseEnvelope {
    pub fn cosine(duration_s: f64, peak: f64) -> Self {
        Self {
            shape: EnvelopeShape::Cosine,
            duration_s,
            peak,
        }
    }

    /// Envelope at local time `t` (zero outside `[0, duration]`).
    pub fn value(&self, t: f64) -> f64 {
        if !(0.0..=self.duration_s).contains(&t) {
            return 0.0;
        }
        self.peak * self.unit_value(t)
    }

    fn unit_value(&self, t: f64) -> f64 {
        match self.shape {
            EnvelopeShape::Cosine => 0.5 * (1.0 - (2.0 * PI * t / self.duration_s).cos()),
            EnvelopeShape::FlattopCosine { rise_s, fall_s } => {
                flattop_unit(t, self.duration_s, rise_s, fall_s)
            }
        }
    }

    /// `∫Ω dt`.
    pub fn area(&self) -> f64 {
        match self.shape {
            EnvelopeShape::Cosine => self.peak * self.duration_s / 2.0,
            EnvelopeShape::FlattopCosine { rise_s, fall_s } => {
                self.peak * (self.duration_s - (rise_s + fall_s) / 2.0)
            }
        }
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            peak: self.peak * s,
            ..*self
        }
    }
}

/// Unit flattop: cosine ramp up over `rise`, 1, cosine ramp down over `fall`.
pub fn flattop_unit(t: f64, total: f64, rise: f64, fall: f64) -> f64 {
    if t <= 0.0 || t >= total {
        0.0
    } else if t < rise {
        0.5 * (1.0 - (PI * t / rise).cos())
    } else if t > total - fall {
        0.5 * (1.0 - (PI * (total - t) / fall).cos())
    } else {
        1.0
    }
}

/// `A = π/t_g`: the cosine envelope's area `A·t_g/2` equals π/2.
pub fn calibrate_pi_half_amplitude(t_g: f64) -> f64 {
    assert!(t_g > 0.0, "pulse duration must be positive");
    PI / t_g
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TonePulse {
    pub envelope: PulseEnvelope,
    pub freq_hz: f64,
    pub phase: f64,
    pub t0_s: f64,
}

impl TonePulse {
    /// `Ω(t − t0)·cos(2πf t + φ)`; the carrier is referenced to absolute time.
    pub fn value(&self, t: f64) -> f64 {
        let env = self.envelope.value(t - self.t0_s);
        if env == 0.0 {
            return 0.0;
        }
        env * (hz_to_rad(self.freq_hz) * t + self.phase).cos()
    }

    pub fn end_s(&self) -> f64 {
        self.t0_s + self.envelope.duration_s
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LineWaveform {
    pub line_id: String,
    pub pulses: Vec<TonePulse>,
}

impl LineWaveform {
    pub fn value(&self, t: f64) -> f64 {
        self.pulses.iter().map(|p| p.value(t)).sum()
    }

    /// `(t, value)` at `k / rate` for `t` in `[0, end]`.
    pub fn sample(&self, rate_hz: f64, end_s: f64) -> Vec<(f64, f64)> {
        let n = (end_s * rate_hz).round() as usize;
        (0..=n)
            .map(|k| {
                let t = k as f64 / rate_hz;
                (t, self.value(t))
            })
            .collect()
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            line_id: self.line_id.clone(),
            pulses: self
                .pulses
                .iter()
                .map(|p| TonePulse {
                    envelope: p.envelope.scaled(s),
                    ..*p
                })
                .collect(),
        }
    }
}

/// Rounds a duration to [`GRID_S`].
pub fn to_grid(duration_s: f64) -> Result<f64, PulseError> {
    let n = (duration_s / GRID_S).round();
    let snapped = n * GRID_S;
    if !(duration_s > 0.0) || ((snapped - duration_s) / duration_s).abs() > GRID_ROUNDING_TOL {
        return Err(PulseError::OffGrid { duration_s });
    }
    Ok(snapped)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimingConfig {
    /// Length of each π/2 pulse.
    pub pulse_s: f64,
    /// Gap between the two π/2 pulses of a cycle.
    #[serde(default)]
    pub gap_s: f64,
    /// Length of one √CZ flux slot.
    pub cz_slot_s: f64,
    /// Overrides the analytic π/t_g peak.
    #[serde(default)]
    pub peak_rad_s: Option<f64>,
}

impl Default for TimingConfig {
    fn default() -> Self {
        Self {
            pulse_s: 50e-9,
            gap_s: 0.0,
            cz_slot_s: 240e-9,
            peak_rad_s: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct XyLineSpec {
    pub id: String,
    pub qubits: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CzSlot {
    pub t0_s: f64,
    pub duration_s: f64,
    /// 0 or 1 within its two-qubit cycle.
    pub index: usize,
    pub pairs: Vec<PairSlot>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub lines: Vec<LineWaveform>,
    pub cz_slots: Vec<CzSlot>,
    pub cycle_starts_s: Vec<f64>,
    pub final_frame: Vec<f64>,
    pub total_s: f64,
}

/// Lays out a compiled program on the XY lines.
///
/// Each cycle gives every qubit two π/2 pulses with identical envelopes and
/// start times; two-qubit cycles place them between the two flux slots.
pub fn synthesize(
    program: &CompiledProgram,
    qubit_names: &[String],
    lines: &[XyLineSpec],
    plan: &FrequencyPlan,
    timing: &TimingConfig,
) -> Result<Schedule, PulseError> {
    let n = program.num_qubits;
    let pulse_s = to_grid(timing.pulse_s)?;
    let gap_s = if timing.gap_s == 0.0 { 0.0 } else { to_grid(timing.gap_s)? };
    let slot_s = to_grid(timing.cz_slot_s)?;
    let peak = timing.peak_rad_s.unwrap_or_else(|| calibrate_pi_half_amplitude(pulse_s));
    let envelope = PulseEnvelope::cosine(pulse_s, peak);

    let mut home: Vec<Option<(usize, f64)>> = vec![None; n];
    for (li, line) in lines.iter().enumerate() {
        for &q in &line.qubits {
            if q < n {
                let name = qubit_names.get(q).ok_or_else(|| PulseError::MissingAssignment(format!("#{q}")))?;
                let f = plan
                    .nominal(name)
                    .ok_or_else(|| PulseError::MissingAssignment(name.clone()))?;
                home[q] = Some((li, f));
            }
        }
    }
    let home: Vec<(usize, f64)> = home
        .into_iter()
        .enumerate()
        .map(|(q, h)| {
            h.ok_or_else(|| {
                PulseError::MissingAssignment(qubit_names.get(q).cloned().unwrap_or(format!("#{q}")))
            })
        })
        .collect::<Result<_, _>>()?;

    let mut out: Vec<LineWaveform> = lines
        .iter()
        .map(|l| LineWaveform {
            line_id: l.id.clone(),
            pulses: Vec::new(),
        })
        .collect();
    let mut cz_slots = Vec::new();
    let mut cycle_starts = Vec::new();
    let mut t = 0.0f64;
    let emit = |t: f64, phases: &[[f64; 2]], out: &mut Vec<LineWaveform>| {
        for (q, [p1, p2]) in phases.iter().enumerate() {
            let (li, f) = home[q];
            for (k, phase) in [p1, p2].into_iter().enumerate() {
                out[li].pulses.push(TonePulse {
                    envelope,
                    freq_hz: f,
                    phase: *phase,
                    t0_s: t + k as f64 * (pulse_s + gap_s),
                });
            }
        }
    };
    let pair_s = 2.0 * pulse_s + gap_s;
    for c in &program.cycles {
        cycle_starts.push(t);
        match c {
            PhysicalCycle::OneQubit { phases } => {
                emit(t, phases, &mut out);
                t += pair_s;
            }
            PhysicalCycle::TwoQubit { pairs, dressing } => {
                cz_slots.push(CzSlot {
                    t0_s: t,
                    duration_s: slot_s,
                    index: 0,
                    pairs: pairs.clone(),
                });
                t += slot_s;
                emit(t, dressing, &mut out);
                t += pair_s;
                cz_slots.push(CzSlot {
                    t0_s: t,
                    duration_s: slot_s,
                    index: 1,
                    pairs: pairs.clone(),
                });
                t += slot_s;
            }
        }
    }
    Ok(Schedule {
        lines: out,
        cz_slots,
        cycle_starts_s: cycle_starts,
        final_frame: program.final_frame.phases.clone(),
        total_s: t,
    })
}

#[derive(Serialize)]
struct PulseRecord<'a> {
    t0_ns: f64,
    duration_ns: f64,
    shape: &'a str,
    freq_hz: f64,
    phase_rad: f64,
    peak_rad_per_s: f64,
}

#[derive(Serialize)]
struct LineRecord<'a> {
    line: &'a str,
    pulses: Vec<PulseRecord<'a>>,
}

#[derive(Serialize)]
struct SlotRecord<'a> {
    t0_ns: f64,
    duration_ns: f64,
    slot: usize,
    pairs: &'a [PairSlot],
}

#[derive(Serialize)]
pub struct ScheduleExport<'a> {
    lines: Vec<LineRecord<'a>>,
    cz_slots: Vec<SlotRecord<'a>>,
    final_frame_rad: &'a [f64],
    total_ns: f64,
}

fn ns(t: f64) -> f64 {
    (t * 1e10).round() / 10.0
}

impl Schedule {
    /// JSON-ready view with times in ns.
    pub fn export(&self) -> ScheduleExport<'_> {
        ScheduleExport {
            lines: self
                .lines
                .iter()
                .map(|l| LineRecord {
                    line: &l.line_id,
                    pulses: l
                        .pulses
                        .iter()
                        .map(|p| PulseRecord {
                            t0_ns: ns(p.t0_s),
                            duration_ns: ns(p.envelope.duration_s),
                            shape: match p.envelope.shape {
                                EnvelopeShape::Cosine => "cosine",
                                EnvelopeShape::FlattopCosine { .. } => "flattop_cosine",
                            },
                            freq_hz: p.freq_hz,
                            phase_rad: p.phase,
                            peak_rad_per_s: p.envelope.peak,
                        })
                        .collect(),
                })
                .collect(),
            cz_slots: self
                .cz_slots
                .iter()
                .map(|s| SlotRecord {
                    t0_ns: ns(s.t0_s),
                    duration_ns: ns(s.duration_s),
                    slot: s.index,
                    pairs: &s.pairs,
                })
                .collect(),
            final_frame_rad: &self.final_frame,
            total_ns: ns(self.total_s),
        }
    }

    /// `t_ns,value` rows for one line.
    pub fn samples_csv(&self, line: usize, rate_hz: f64) -> String {
        let mut s = String::from("t_ns,value\n");
        for (t, v) in self.lines[line].sample(rate_hz, self.total_s) {
            let _ = writeln!(s, "{},{:e}", t * 1e9, v);
        }
        s
    }
}

/// The line's pulses as seen by `element` behind its branch filter.
pub fn element_drive(
    element: &str,
    waveform: &LineWaveform,
    template: &FilterTemplate,
    plan: &FrequencyPlan,
) -> Result<Vec<TonePulse>, PulseError> {
    let center = plan
        .nominal(element)
        .ok_or_else(|| PulseError::MissingAssignment(element.to_string()))?;
    let spec = template.at(center);
    waveform
        .pulses
        .iter()
        .map(|p| {
            Ok(TonePulse {
                envelope: p.envelope.scaled(amplitude_scale(&spec, p.freq_hz)?),
                ..*p
            })
        })
        .collect()
}

/// Two-level rotating-wave propagator of a qubit at `freq_hz` driven by
/// `pulses` (carriers must be at the qubit frequency).
///
/// In the frame rotating at `freq_hz`, a pulse with carrier phase φ gives
/// `H = Ω(t)/2·(e^{−iφ}|1⟩⟨0| + e^{iφ}|0⟩⟨1|)`.
pub fn rotating_frame_unitary(pulses: &[TonePulse], freq_hz: f64, dt: f64) -> Result<Mat2, PulseError> {
    struct Rwa<'a> {
        pulses: &'a [TonePulse],
        w: f64,
    }
    impl Hamiltonian for Rwa<'_> {
        fn dim(&self) -> usize {
            2
        }
        fn apply(&self, t: f64, psi: &[C64], out: &mut [C64]) {
            let mut c = C64::new(0.0, 0.0);
            for p in self.pulses {
                let env = p.envelope.value(t - p.t0_s);
                if env != 0.0 {
                    // carrier detuning from the frame, zero for own tones
                    let d = hz_to_rad(p.freq_hz) - self.w;
                    c += C64::from_polar(env / 2.0, -(d * t + p.phase));
                }
            }
            out[0] = c.conj() * psi[1];
            out[1] = c * psi[0];
        }
    }
    let end = pulses.iter().map(|p| p.end_s()).fold(0.0, f64::max);
    let start = pulses.iter().map(|p| p.t0_s).fold(f64::INFINITY, f64::min).min(end);
    let h = Rwa {
        pulses,
        w: hz_to_rad(freq_hz),
    };
    let out = evolve_many(&h, &[StateVector::basis(2, 0), StateVector::basis(2, 1)], (start, end), dt)?;
    Ok(Mat2([[out[0].0[0], out[1].0[0]], [out[0].0[1], out[1].0[1]]]))
}
