//! Multilevel transmon under multi-tone drive.
//!
//! The lab-frame Hamiltonian `Σ E_j|j⟩⟨j| + Σ_k Ω_k(t)cos(ω_k t + φ_k)(a + a†)`
//! is integrated exactly in the interaction picture of its diagonal part, so
//! no rotating-wave approximation is made but the stiff `E_j` phases are
//! handled analytically.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::mux::{amplitude_scale, FilterTemplate, MuxError};
use crate::numerics::{evolve_many, hz_to_rad, Hamiltonian, NumericsError, StateVector, C64};
use crate::pulse::{calibrate_pi_half_amplitude, PulseEnvelope, TonePulse};

pub const MAX_LEVELS: usize = 10;
pub const MAX_TONES: usize = 16;
/// Top-level population above which truncation is flagged.
pub const TRUNCATION_WARN: f64 = 1e-4;
/// Steps per period of the fastest frequency in the problem.
pub const STEPS_PER_PERIOD: f64 = 40.0;

#[derive(Debug, thiserror::Error)]
pub enum LeakageError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("leakage {leakage:e} at the top of the sweep is outside the perturbative regime")]
    OutOfPerturbativeRegime { leakage: f64 },
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error(transparent)]
    Mux(#[from] MuxError),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransmonSpec {
    pub f01_hz: f64,
    /// Negative for a transmon.
    pub anharmonicity_hz: f64,
    pub levels: usize,
}

impl TransmonSpec {
    /// `E_j = j·f01 + α·j(j−1)/2`, in Hz.
    pub fn level_hz(&self, j: usize) -> f64 {
        let j = j as f64;
        j * self.f01_hz + self.anharmonicity_hz * j * (j - 1.0) / 2.0
    }

    /// `E_k − E_j` in Hz.
    pub fn transition_hz(&self, j: usize, k: usize) -> f64 {
        self.level_hz(k) - self.level_hz(j)
    }

    fn validate(&self) -> Result<(), LeakageError> {
        if !(3..=MAX_LEVELS).contains(&self.levels) {
            return Err(LeakageError::InvalidInput(format!(
                "levels must be in 3..={MAX_LEVELS}, got {}",
                self.levels
            )));
        }
        if !(self.f01_hz > 0.0) {
            return Err(LeakageError::InvalidInput("f01 must be positive".into()));
        }
        Ok(())
    }

    /// Integration step for the given tones.
    pub fn time_step(&self, tones: &[TonePulse]) -> f64 {
        let fmax = tones
            .iter()
            .map(|t| t.freq_hz)
            .fold(self.level_hz(self.levels - 1), f64::max);
        1.0 / (STEPS_PER_PERIOD * fmax)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LeakageResult {
    pub populations: Vec<f64>,
    /// `1 − P(0) − P(1)`
    pub leakage: f64,
    pub truncation_warning: bool,
}

impl LeakageResult {
    fn from_state(psi: &StateVector) -> Self {
        let populations = psi.populations();
        let leakage = (1.0 - populations[0] - populations[1]).max(0.0);
        let truncation_warning = *populations.last().unwrap() > TRUNCATION_WARN;
        Self {
            populations,
            leakage,
            truncation_warning,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum InitialState {
    Level(usize),
    Superposition(Vec<C64>),
}

struct DrivenTransmon<'a> {
    energies: Vec<f64>,
    sqrt_n: Vec<f64>,
    tones: &'a [TonePulse],
}

impl DrivenTransmon<'_> {
    fn drive(&self, t: f64) -> f64 {
        self.tones.iter().map(|p| p.value(t)).sum()
    }

    fn apply_with(&self, t: f64, drive: f64, psi: &[C64], out: &mut [C64]) {
        let d = self.energies.len();
        out.iter_mut().for_each(|o| *o = C64::new(0.0, 0.0));
        if drive == 0.0 {
            return;
        }
        for j in 0..d - 1 {
            // ⟨j|H_I|j+1⟩ = drive·√(j+1)·e^{i(E_j − E_{j+1})t}
            let c = C64::from_polar(drive * self.sqrt_n[j], (self.energies[j] - self.energies[j + 1]) * t);
            out[j] += c * psi[j + 1];
            out[j + 1] += c.conj() * psi[j];
        }
    }
}

impl Hamiltonian for DrivenTransmon<'_> {
    fn dim(&self) -> usize {
        self.energies.len()
    }

    fn apply(&self, t: f64, psi: &[C64], out: &mut [C64]) {
        self.apply_with(t, self.drive(t), psi, out);
    }

    fn apply_many(&self, t: f64, psi: &[C64], out: &mut [C64]) {
        let drive = self.drive(t);
        let d = self.dim();
        for (p, o) in psi.chunks(d).zip(out.chunks_mut(d)) {
            self.apply_with(t, drive, p, o);
        }
    }
}

fn validate_tones(tones: &[TonePulse]) -> Result<(f64, f64), LeakageError> {
    if tones.len() > MAX_TONES {
        return Err(LeakageError::InvalidInput(format!(
            "{} tones exceed the maximum {MAX_TONES}",
            tones.len()
        )));
    }
    if tones.is_empty() {
        return Ok((0.0, 0.0));
    }
    let start = tones.iter().map(|t| t.t0_s).fold(f64::INFINITY, f64::min);
    let end = tones.iter().map(|t| t.end_s()).fold(0.0, f64::max);
    Ok((start.min(0.0), end))
}

/// Evolves several initial states under the same drive; returns lab-frame
/// final populations (identical in the interaction picture).
pub fn simulate_many(
    spec: &TransmonSpec,
    tones: &[TonePulse],
    initial: &[InitialState],
) -> Result<Vec<LeakageResult>, LeakageError> {
    spec.validate()?;
    let span = validate_tones(tones)?;
    let d = spec.levels;
    let states = initial
        .iter()
        .map(|s| match s {
            InitialState::Level(k) if *k < d => Ok(StateVector::basis(d, *k)),
            InitialState::Superposition(v) if v.len() == d => Ok(StateVector(v.clone()).normalized()),
            _ => Err(LeakageError::InvalidInput("initial state does not fit the truncation".into())),
        })
        .collect::<Result<Vec<_>, _>>()?;
    let h = DrivenTransmon {
        energies: (0..d).map(|j| hz_to_rad(spec.level_hz(j))).collect(),
        sqrt_n: (1..d).map(|n| (n as f64).sqrt()).collect(),
        tones,
    };
    let out = evolve_many(&h, &states, span, spec.time_step(tones))?;
    Ok(out.iter().map(LeakageResult::from_state).collect())
}

pub fn simulate_driven_transmon(
    spec: &TransmonSpec,
    tones: &[TonePulse],
    initial: InitialState,
) -> Result<LeakageResult, LeakageError> {
    Ok(simulate_many(spec, tones, &[initial])?.pop().expect("one result"))
}

/// Mean leakage over initial `|0⟩` and `|1⟩`.
pub fn average_leakage(spec: &TransmonSpec, tones: &[TonePulse]) -> Result<f64, LeakageError> {
    let r = simulate_many(spec, tones, &[InitialState::Level(0), InitialState::Level(1)])?;
    Ok(r.iter().map(|x| x.leakage).sum::<f64>() / r.len() as f64)
}

/// Resonant cosine π/2 pulse for `spec` with analytic amplitude.
pub fn main_pulse(spec: &TransmonSpec, duration_s: f64) -> TonePulse {
    TonePulse {
        envelope: PulseEnvelope::cosine(duration_s, calibrate_pi_half_amplitude(duration_s)),
        freq_hz: spec.f01_hz,
        phase: 0.0,
        t0_s: 0.0,
    }
}

/// A copy of `main` at another frequency and relative amplitude.
pub fn spurious(main: &TonePulse, freq_hz: f64, scale: f64) -> TonePulse {
    TonePulse {
        envelope: main.envelope.scaled(scale),
        freq_hz,
        ..*main
    }
}

/// Rotation angle `2·atan2(|c1|, |c0|)` reached from `|0⟩`.
pub fn rotation_angle(spec: &TransmonSpec, tones: &[TonePulse]) -> Result<f64, LeakageError> {
    let r = simulate_driven_transmon(spec, tones, InitialState::Level(0))?;
    Ok(2.0 * r.populations[1].sqrt().atan2(r.populations[0].sqrt()))
}

/// Bisects the peak amplitude of `main` until the multilevel simulation
/// rotates `|0⟩` by π/2 within `tol`.
pub fn fine_tune_pi_half(spec: &TransmonSpec, main: &TonePulse, tol: f64) -> Result<TonePulse, LeakageError> {
    let target = std::f64::consts::FRAC_PI_2;
    let at = |s: f64| rotation_angle(spec, &[spurious(main, main.freq_hz, s)]);
    let (mut lo, mut hi) = (0.8, 1.25);
    if at(lo)? > target || at(hi)? < target {
        return Err(LeakageError::InvalidInput("π/2 amplitude not bracketed".into()));
    }
    let mut mid = 1.0;
    for _ in 0..60 {
        mid = 0.5 * (lo + hi);
        let theta = at(mid)?;
        if (theta - target).abs() <= tol {
            break;
        }
        if theta < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(spurious(main, main.freq_hz, mid))
}

/// Spurious-tone amplitude treatment for maps.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Attenuation {
    /// Equal amplitude to the main pulse.
    None,
    /// Branch filter centred on the qubit.
    Filter(FilterTemplate),
}

impl Attenuation {
    fn scale(&self, spec: &TransmonSpec, f: f64) -> Result<f64, LeakageError> {
        Ok(match self {
            Attenuation::None => 1.0,
            Attenuation::Filter(t) => amplitude_scale(&t.at(spec.f01_hz), f)?,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LeakageMap {
    pub axis_a_hz: Vec<f64>,
    pub axis_b_hz: Vec<f64>,
    /// `values[i][j]` at `(axis_a[i], axis_b[j])`.
    pub values: Vec<Vec<f64>>,
    pub spec: TransmonSpec,
    pub main: TonePulse,
    pub attenuation: Attenuation,
}

pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![lo],
        _ => (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect(),
    }
}

/// Leakage averaged over `|0⟩, |1⟩` for the main pulse plus two spurious
/// tones at every `(ω_a, ω_b)` grid point.
pub fn leakage_map(
    spec: &TransmonSpec,
    main: &TonePulse,
    axis_a_hz: &[f64],
    axis_b_hz: &[f64],
    attenuation: Attenuation,
) -> Result<LeakageMap, LeakageError> {
    spec.validate()?;
    let nb = axis_b_hz.len();
    let flat = (0..axis_a_hz.len() * nb)
        .into_par_iter()
        .map(|idx| {
            let (fa, fb) = (axis_a_hz[idx / nb], axis_b_hz[idx % nb]);
            let tones = [
                *main,
                spurious(main, fa, attenuation.scale(spec, fa)?),
                spurious(main, fb, attenuation.scale(spec, fb)?),
            ];
            average_leakage(spec, &tones)
        })
        .collect::<Result<Vec<f64>, _>>()?;
    Ok(LeakageMap {
        axis_a_hz: axis_a_hz.to_vec(),
        axis_b_hz: axis_b_hz.to_vec(),
        values: flat.chunks(nb.max(1)).map(|c| c.to_vec()).collect(),
        spec: *spec,
        main: *main,
        attenuation,
    })
}

impl LeakageMap {
    /// `max |L(a,b) − L(b,a)|` over matched grid points.
    pub fn max_asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for (i, fa) in self.axis_a_hz.iter().enumerate() {
            for (j, fb) in self.axis_b_hz.iter().enumerate() {
                let (Some(i2), Some(j2)) = (
                    self.axis_b_hz.iter().position(|x| x == fa),
                    self.axis_a_hz.iter().position(|x| x == fb),
                ) else {
                    continue;
                };
                worst = worst.max((self.values[i][j] - self.values[j2][i2]).abs());
            }
        }
        worst
    }

    /// Largest grid step along either axis.
    pub fn grid_step_hz(&self) -> f64 {
        [&self.axis_a_hz, &self.axis_b_hz]
            .iter()
            .flat_map(|ax| ax.windows(2).map(|w| (w[1] - w[0]).abs()))
            .fold(0.0, f64::max)
    }

    /// Grid points whose per-spurious-photon mismatch is within `tol_hz`.
    pub fn points_on(&self, line: &ResonanceLine, tol_hz: f64) -> Vec<(usize, usize)> {
        let k = (line.n_a + line.n_b) as f64;
        let mut out = Vec::new();
        for (i, &fa) in self.axis_a_hz.iter().enumerate() {
            for (j, &fb) in self.axis_b_hz.iter().enumerate() {
                if line.mismatch(self.main.freq_hz, fa, fb).abs() / k <= tol_hz {
                    out.push((i, j));
                }
            }
        }
        out
    }

    /// Median leakage over grid points rasterized onto any of `lines`
    /// (half-step tolerance), skipping points that also sit on a line with
    /// fewer photons. `None` when no point qualifies.
    pub fn stripe_level(&self, lines: &[ResonanceLine], all: &[ResonanceLine]) -> Option<f64> {
        let tol = self.grid_step_hz() / 2.0;
        let order = lines.iter().map(ResonanceLine::photons).min()?;
        let lower: Vec<_> = all.iter().filter(|l| l.photons() < order).collect();
        let mut pts: Vec<(usize, usize)> = lines.iter().flat_map(|l| self.points_on(l, tol)).collect();
        pts.sort_unstable();
        pts.dedup();
        let mut vals: Vec<f64> = pts
            .into_iter()
            .filter(|&(i, j)| {
                let (fa, fb) = (self.axis_a_hz[i], self.axis_b_hz[j]);
                lower.iter().all(|l| {
                    l.mismatch(self.main.freq_hz, fa, fb).abs() / (l.n_a + l.n_b) as f64 > tol
                })
            })
            .map(|(i, j)| self.values[i][j])
            .collect();
        median(&mut vals)
    }

    /// Points more than `factor` times the median of their
    /// `(2r+1)×(2r+1)` neighbourhood that lie farther than `band_hz`
    /// from every listed line.
    pub fn unexplained_peaks(
        &self,
        lines: &[ResonanceLine],
        band_hz: f64,
        factor: f64,
        r: usize,
    ) -> Vec<(usize, usize)> {
        let (na, nb) = (self.axis_a_hz.len(), self.axis_b_hz.len());
        let mut out = Vec::new();
        for i in 0..na {
            for j in 0..nb {
                let mut win: Vec<f64> = (i.saturating_sub(r)..(i + r + 1).min(na))
                    .flat_map(|ii| (j.saturating_sub(r)..(j + r + 1).min(nb)).map(move |jj| (ii, jj)))
                    .map(|(ii, jj)| self.values[ii][jj])
                    .collect();
                let bg = median(&mut win).unwrap_or(0.0);
                if self.values[i][j] <= factor * bg {
                    continue;
                }
                let (fa, fb) = (self.axis_a_hz[i], self.axis_b_hz[j]);
                let explained = lines.iter().any(|l| {
                    l.mismatch(self.main.freq_hz, fa, fb).abs() / (l.n_a + l.n_b) as f64 <= band_hz
                });
                if !explained {
                    out.push((i, j));
                }
            }
        }
        out
    }
}

fn median(v: &mut [f64]) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) })
}

/// A multiphoton resonance `n_m·ω_main + n_a·ω_a + n_b·ω_b = E_to − E_from`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResonanceLine {
    pub from: usize,
    pub to: usize,
    pub n_main: u32,
    pub n_a: u32,
    pub n_b: u32,
    pub target_hz: f64,
}

impl ResonanceLine {
    pub fn photons(&self) -> u32 {
        self.n_main + self.n_a + self.n_b
    }

    /// Frequency mismatch of the condition at `(ω_a, ω_b)`.
    pub fn mismatch(&self, main_hz: f64, fa: f64, fb: f64) -> f64 {
        self.n_main as f64 * main_hz + self.n_a as f64 * fa + self.n_b as f64 * fb - self.target_hz
    }

    pub fn label(&self) -> String {
        format!(
            "{}->{} ({}·main + {}·a + {}·b)",
            self.from, self.to, self.n_main, self.n_a, self.n_b
        )
    }
}

/// Absorption resonances out of `|0⟩` and `|1⟩` into leaked levels that use
/// at least one spurious photon, up to `max_photons`.
pub fn resonance_lines(spec: &TransmonSpec, max_photons: u32) -> Vec<ResonanceLine> {
    let mut out = Vec::new();
    for from in 0..2usize {
        for to in 2..spec.levels {
            let p = (to - from) as u32;
            if p > max_photons {
                continue;
            }
            for n_main in 0..=p {
                for n_a in 0..=p - n_main {
                    let n_b = p - n_main - n_a;
                    if n_a + n_b == 0 {
                        continue;
                    }
                    out.push(ResonanceLine {
                        from,
                        to,
                        n_main,
                        n_a,
                        n_b,
                        target_hz: spec.transition_hz(from, to),
                    });
                }
            }
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerScaling {
    pub spurious_hz: f64,
    /// Spurious-tone attenuation relative to the main pulse, dB.
    pub attenuation_db: Vec<f64>,
    pub leakage: Vec<f64>,
    /// d log L / d log P
    pub slope: f64,
    pub intercept: f64,
}

impl PowerScaling {
    /// Fitted leakage at the given attenuation.
    pub fn projected(&self, attenuation_db: f64) -> f64 {
        10f64.powf(self.intercept + self.slope * (-attenuation_db / 10.0))
    }
}

/// Transition class whose spurious frequency is probed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransitionClass {
    /// One photon at `ω12`.
    SinglePhoton12,
    /// Two photons at `ω02/2`.
    TwoPhoton02,
}

impl TransitionClass {
    pub fn spurious_hz(&self, spec: &TransmonSpec) -> f64 {
        match self {
            TransitionClass::SinglePhoton12 => spec.transition_hz(1, 2),
            TransitionClass::TwoPhoton02 => spec.transition_hz(0, 2) / 2.0,
        }
    }
}

/// Least-squares slope of `log L` against `log P` for one spurious tone at
/// the class frequency, alongside the main pulse.
pub fn power_scaling(
    spec: &TransmonSpec,
    main: &TonePulse,
    class: TransitionClass,
    attenuation_db: &[f64],
) -> Result<PowerScaling, LeakageError> {
    if attenuation_db.len() < 5 {
        return Err(LeakageError::InvalidInput("need at least 5 sweep points".into()));
    }
    let f = class.spurious_hz(spec);
    let leakage = attenuation_db
        .par_iter()
        .map(|&db| average_leakage(spec, &[*main, spurious(main, f, 10f64.powf(-db / 20.0))]))
        .collect::<Result<Vec<f64>, _>>()?;
    let top = leakage.iter().cloned().fold(0.0, f64::max);
    if top >= 1e-2 {
        return Err(LeakageError::OutOfPerturbativeRegime { leakage: top });
    }
    let xs: Vec<f64> = attenuation_db.iter().map(|db| -db / 10.0).collect();
    let ys: Vec<f64> = leakage.iter().map(|l| l.log10()).collect();
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let slope = sxy / sxx;
    Ok(PowerScaling {
        spurious_hz: f,
        attenuation_db: attenuation_db.to_vec(),
        leakage,
        slope,
        intercept: my - slope * mx,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reference_transmon(levels: usize) -> TransmonSpec {
        TransmonSpec {
            f01_hz: 5e9,
            anharmonicity_hz: -200e6,
            levels,
        }
    }

    #[test]
    fn duffing_ladder() {
        let s = reference_transmon(5);
        assert_eq!(s.transition_hz(1, 2), 4.8e9);
        assert_eq!(s.transition_hz(0, 2), 9.8e9);
        assert!((s.transition_hz(0, 3) - 14.4e9).abs() < 1.0);
    }

    #[test]
    fn zero_amplitude_leaves_state() {
        let s = reference_transmon(5);
        let tone = spurious(&main_pulse(&s, 50e-9), 4.8e9, 0.0);
        let r = simulate_driven_transmon(&s, &[tone], InitialState::Level(1)).unwrap();
        assert_eq!(r.populations[1], 1.0);
        assert_eq!(r.leakage, 0.0);
    }

    #[test]
    fn resonant_pi_half() {
        let s = reference_transmon(5);
        let r = simulate_driven_transmon(&s, &[main_pulse(&s, 50e-9)], InitialState::Level(0)).unwrap();
        assert!(r.leakage < 1e-3);
        assert!((r.populations[0] - 0.5).abs() < 2e-2);
        assert!((r.populations[1] - 0.5).abs() < 2e-2);
        assert!((r.populations.iter().sum::<f64>() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn rejects_bad_truncation() {
        let s = reference_transmon(2);
        assert!(simulate_driven_transmon(&s, &[], InitialState::Level(0)).is_err());
    }

    #[test]
    fn resonance_inventory() {
        let lines = resonance_lines(&reference_transmon(5), 3);
        assert!(lines.iter().any(|l| l.from == 1 && l.to == 2 && l.n_a == 1));
        assert!(lines.iter().any(|l| l.from == 0 && l.to == 2 && l.n_a == 1 && l.n_b == 1));
        assert!(lines.iter().any(|l| l.from == 0 && l.to == 3 && l.n_a == 2 && l.n_b == 1));
        assert!(lines.iter().all(|l| l.photons() <= 3));
    }
}
