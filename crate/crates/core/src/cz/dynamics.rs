use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::Mutex;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::spectrum::{label, spectrum_from, Labeled};
use super::{CouplerSystemSpec, CzError, ModelParts};
use crate::numerics::{expm_hermitian, hz_to_rad, wrap_angle, ComplexMatrix, NumericsError, C64, NORM_DRIFT_TOL};
use crate::pulse::{flattop_unit, PulseEnvelope};

const COMPUTATIONAL: [[usize; 3]; 4] = [[0, 0, 0], [0, 0, 1], [1, 0, 0], [1, 0, 1]];

/// Coupler bare-frequency trajectory: idle, cosine ramp to `hold_hz`, hold,
/// cosine ramp back.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FluxPulse {
    pub idle_hz: f64,
    pub hold_hz: f64,
    pub rise_s: f64,
    pub flat_s: f64,
    pub fall_s: f64,
}

impl FluxPulse {
    /// 20 ns ramps around a 200 ns hold from a 6.5 GHz idle point.
    pub fn reference(hold_hz: f64) -> Self {
        FluxPulse { idle_hz: 6.5e9, hold_hz, rise_s: 20e-9, flat_s: 200e-9, fall_s: 20e-9 }
    }

    pub fn total_s(&self) -> f64 {
        self.rise_s + self.flat_s + self.fall_s
    }

    pub fn coupler_hz(&self, t: f64) -> f64 {
        let u = if self.rise_s + self.fall_s == 0.0 {
            if (0.0..=self.total_s()).contains(&t) { 1.0 } else { 0.0 }
        } else if (self.rise_s..=self.rise_s + self.flat_s).contains(&t) {
            1.0
        } else {
            flattop_unit(t, self.total_s(), self.rise_s, self.fall_s)
        };
        self.idle_hz + (self.hold_hz - self.idle_hz) * u
    }

    pub fn flat_window(&self) -> (f64, f64) {
        (self.rise_s, self.rise_s + self.flat_s)
    }

    fn validate(&self) -> Result<(), CzError> {
        let ok = [self.idle_hz, self.hold_hz].iter().all(|f| f.is_finite() && *f > 0.0)
            && [self.rise_s, self.flat_s, self.fall_s].iter().all(|d| d.is_finite() && *d >= 0.0)
            && self.total_s() > 0.0;
        if ok {
            Ok(())
        } else {
            Err(CzError::InvalidInput("flux pulse needs positive frequencies and durations".into()))
        }
    }
}

/// `ω_max·√|cos(πΦ/Φ₀)|` for a symmetric SQUID.
pub fn squid_frequency_hz(max_hz: f64, flux_quanta: f64) -> f64 {
    max_hz * (PI * flux_quanta).cos().abs().sqrt()
}

/// Cosine-envelope microwave drive on the coupler charge.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TuningDrive {
    pub freq_hz: f64,
    pub peak_rad_s: f64,
    pub duration_s: f64,
    pub t0_s: f64,
    pub phase: f64,
}

impl TuningDrive {
    /// Drive spanning the flattop of `flux`.
    pub fn on_flattop(flux: &FluxPulse, freq_hz: f64, peak_rad_s: f64) -> Self {
        TuningDrive { freq_hz, peak_rad_s, duration_s: flux.flat_s, t0_s: flux.rise_s, phase: 0.0 }
    }

    pub fn amplitude(&self, t: f64) -> f64 {
        PulseEnvelope::cosine(self.duration_s, self.peak_rad_s).value(t - self.t0_s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Frame {
    /// Frame rotating at the drive frequency per excitation, drive in RWA.
    Rotating,
    /// Laboratory frame with the full `cos` drive.
    Lab,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DynamicsOptions {
    pub frame: Frame,
    /// Step size; the lab frame defaults to 1/40 of the drive period.
    pub dt_s: Option<f64>,
    /// Step size while the coupler frequency is constant.
    pub hold_dt_s: Option<f64>,
    /// Keep only states with at most this many total excitations (ignored
    /// when the couplings do not conserve excitations).
    pub excitation_cap: Option<usize>,
}

impl Default for DynamicsOptions {
    fn default() -> Self {
        DynamicsOptions { frame: Frame::Rotating, dt_s: None, hold_dt_s: None, excitation_cap: Some(4) }
    }
}

impl DynamicsOptions {
    fn step(&self, drive: &TuningDrive) -> f64 {
        self.dt_s.unwrap_or(match self.frame {
            Frame::Rotating => 0.4e-9,
            Frame::Lab => (0.4e-9f64).min(1.0 / (40.0 * drive.freq_hz.abs().max(1.0))),
        })
    }

    fn hold_step(&self, drive: &TuningDrive) -> f64 {
        self.hold_dt_s.unwrap_or(match self.frame {
            Frame::Rotating => 1e-9,
            Frame::Lab => self.step(drive),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TuningResult {
    /// `1 − |⟨101|ψ₁₀₁(T)⟩|²`.
    pub leakage: f64,
    /// `arg u₀₀ + arg u₁₁ − arg u₀₁ − arg u₁₀`, in `(−π, π]`.
    pub phase: f64,
    /// `u_ab = ⟨a0b|ψ_a0b(T)⟩` in the simulation frame.
    pub amplitudes: [[C64; 2]; 2],
}

impl TuningResult {
    pub fn return_probabilities(&self) -> [[f64; 2]; 2] {
        self.amplitudes.map(|r| r.map(|z| z.norm_sqr()))
    }
}

/// `arg u₀₀ + arg u₁₁ − arg u₀₁ − arg u₁₀` in `(−π, π]`.
pub fn conditional_phase(u: &[[C64; 2]; 2]) -> f64 {
    wrap_angle(u[0][0].arg() + u[1][1].arg() - u[0][1].arg() - u[1][0].arg())
}

pub(crate) struct Model {
    parts: ModelParts,
    idle: Labeled,
    initial: Vec<Vec<C64>>,
    cache: Mutex<HashMap<[u64; 8], ComplexMatrix>>,
}

impl Model {
    pub fn new(spec: &CouplerSystemSpec, flux: &FluxPulse, opts: &DynamicsOptions) -> Result<Self, CzError> {
        flux.validate()?;
        let full = ModelParts::new(spec, None)?;
        let parts = if full.conserves_excitations && opts.excitation_cap.is_some() {
            ModelParts::new(spec, opts.excitation_cap)?
        } else {
            full
        };
        for l in COMPUTATIONAL {
            if parts.basis.find(l).is_none() {
                return Err(CzError::InvalidInput("excitation cap removes computational states".into()));
            }
        }
        let idle = label(&parts, hz_to_rad(flux.idle_hz))?;
        idle.check(&parts, flux.idle_hz, &COMPUTATIONAL)?;
        let initial = COMPUTATIONAL
            .iter()
            .map(|&l| idle.eig.vectors.column(idle.dressed_of[parts.basis.find(l).unwrap()]))
            .collect();
        Ok(Model { parts, idle, initial, cache: Mutex::new(HashMap::new()) })
    }

    fn hamiltonian(&self, flux: &FluxPulse, drive: &TuningDrive, frame: Frame, t: f64) -> ComplexMatrix {
        let p = &self.parts;
        let mut h = p.static_h(hz_to_rad(flux.coupler_hz(t)));
        let wd = hz_to_rad(drive.freq_hz);
        let omega = drive.amplitude(t);
        match frame {
            Frame::Rotating => {
                let n_of = |i| p.basis.excitations(i) as f64;
                for i in 0..p.basis.len() {
                    h[(i, i)] -= wd * n_of(i);
                }
                if !p.conserves_excitations {
                    for &(j, i, _) in &p.exchange {
                        let f = C64::from_polar(1.0, wd * (n_of(j) - n_of(i)) * t);
                        h[(j, i)] *= f;
                        h[(i, j)] *= f.conj();
                    }
                }
                if omega != 0.0 {
                    // Ω/2 (C† e^{−i(ω_d t + φ)} + h.c.) seen from the frame
                    for &(lo, hi, v) in &p.coupler_lowering {
                        let arg = wd * (n_of(hi) - n_of(lo)) * t - wd * t - drive.phase;
                        let z = C64::from_polar(0.5 * omega * v, arg);
                        h[(hi, lo)] += z;
                        h[(lo, hi)] += z.conj();
                    }
                }
            }
            Frame::Lab => {
                if omega != 0.0 {
                    let s = omega * (wd * t + drive.phase).cos();
                    for &(lo, hi, v) in &p.coupler_lowering {
                        h[(hi, lo)] += s * v;
                        h[(lo, hi)] += s * v;
                    }
                }
            }
        }
        h
    }

    /// Propagator of the undriven lab Hamiltonian over `[a, b]`, cached.
    fn undriven_propagator(&self, flux: &FluxPulse, a: f64, b: f64, dt: f64) -> Result<ComplexMatrix, CzError> {
        let key = [a, b, dt, flux.idle_hz, flux.hold_hz, flux.rise_s, flux.flat_s, flux.fall_s].map(f64::to_bits);
        if let Some(u) = self.cache.lock().expect("cache lock").get(&key) {
            return Ok(u.clone());
        }
        let n = self.parts.basis.len();
        let u = magnus(a, b, dt, |t| self.parts.static_h(hz_to_rad(flux.coupler_hz(t))), ComplexMatrix::identity(n))?;
        self.cache.lock().expect("cache lock").insert(key, u.clone());
        Ok(u)
    }

    /// `e^{iω_d N b} U e^{−iω_d N a}` in the rotating frame, `U` otherwise.
    fn to_frame(&self, u: &ComplexMatrix, drive: &TuningDrive, frame: Frame, a: f64, b: f64) -> ComplexMatrix {
        if frame == Frame::Lab {
            return u.clone();
        }
        let wd = hz_to_rad(drive.freq_hz);
        let n = |i| self.parts.basis.excitations(i) as f64;
        ComplexMatrix::from_fn(u.rows(), u.cols(), |i, j| u[(i, j)] * C64::from_polar(1.0, wd * (n(i) * b - n(j) * a)))
    }

    pub fn run(&self, flux: &FluxPulse, drive: &TuningDrive, opts: &DynamicsOptions) -> Result<TuningResult, CzError> {
        let total = flux.total_s();
        let mut cuts = vec![0.0, flux.rise_s, flux.rise_s + flux.flat_s, total, drive.t0_s, drive.t0_s + drive.duration_s];
        cuts.retain(|t| (0.0..=total).contains(t));
        cuts.sort_by(f64::total_cmp);
        cuts.dedup_by(|a, b| (*a - *b).abs() < 1e-15);
        let dt = opts.step(drive);
        if !(dt.is_finite() && dt > 0.0) {
            return Err(NumericsError::BadTimeGrid { dt, span: total }.into());
        }
        let n = self.parts.basis.len();
        let mut psi = ComplexMatrix::from_fn(n, 4, |i, k| self.initial[k][i]);
        let hold_dt = opts.hold_step(drive);
        let frame_free = opts.frame == Frame::Lab || self.parts.conserves_excitations;
        let (d0, d1) = (drive.t0_s, drive.t0_s + drive.duration_s);
        let (f0, f1) = flux.flat_window();
        for w in cuts.windows(2) {
            let (a, b) = (w[0], w[1]);
            if b - a <= 0.0 {
                continue;
            }
            let undriven = drive.peak_rad_s == 0.0 || b <= d0 || a >= d1;
            let flux_const = (a >= f0 && b <= f1) || b <= 0.0 || a >= total;
            if undriven && frame_free {
                let u = if flux_const {
                    let h = self.parts.static_h(hz_to_rad(flux.coupler_hz(0.5 * (a + b))));
                    expm_hermitian(&h, b - a)?
                } else {
                    self.undriven_propagator(flux, a, b, dt)?
                };
                psi = self.to_frame(&u, drive, opts.frame, a, b).matmul(&psi);
                continue;
            }
            let step = if flux_const { hold_dt } else { dt };
            psi = magnus(a, b, step, |t| self.hamiltonian(flux, drive, opts.frame, t), psi)?;
        }
        let mut u = [[C64::new(0.0, 0.0); 2]; 2];
        for (k, &l) in COMPUTATIONAL.iter().enumerate() {
            let col = psi.column(k);
            let drift = (col.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt() - 1.0).abs();
            if drift > NORM_DRIFT_TOL {
                return Err(NumericsError::NormDrift { drift }.into());
            }
            let d = self.idle.eig.vectors.column(self.idle.dressed_of[self.parts.basis.find(l).unwrap()]);
            u[l[0]][l[2]] = d.iter().zip(&col).map(|(x, y)| x.conj() * y).sum();
        }
        Ok(TuningResult { leakage: (1.0 - u[1][1].norm_sqr()).max(0.0), phase: conditional_phase(&u), amplitudes: u })
    }
}

/// Fourth-order Magnus integration of `ψ' = −iH(t)ψ` over `[a, b]`:
/// `K = h/2 (H₁+H₂) − i√3 h²/12 [H₂, H₁]` at the two Gauss nodes.
fn magnus(
    a: f64,
    b: f64,
    dt: f64,
    h: impl Fn(f64) -> ComplexMatrix,
    mut psi: ComplexMatrix,
) -> Result<ComplexMatrix, CzError> {
    let (c1, c2) = (0.5 - 3f64.sqrt() / 6.0, 0.5 + 3f64.sqrt() / 6.0);
    let steps = ((b - a) / dt).ceil().max(1.0) as usize;
    let hs = (b - a) / steps as f64;
    for s in 0..steps {
        let t = a + s as f64 * hs;
        let (h1, h2) = (h(t + c1 * hs), h(t + c2 * hs));
        let comm = h2.matmul(&h1).add(&h1.matmul(&h2).scale(C64::new(-1.0, 0.0)));
        let k = h1
            .add(&h2)
            .scale(C64::new(0.5 * hs, 0.0))
            .add(&comm.scale(C64::new(0.0, -3f64.sqrt() * hs * hs / 12.0)));
        psi = expm_hermitian(&k, 1.0)?.matmul(&psi);
    }
    Ok(psi)
}

/// Evolves the four computational states through `flux` with `drive` on
/// the coupler.
pub fn simulate_tuning(
    spec: &CouplerSystemSpec,
    flux: &FluxPulse,
    drive: &TuningDrive,
    opts: &DynamicsOptions,
) -> Result<TuningResult, CzError> {
    Model::new(spec, flux, opts)?.run(flux, drive, opts)
}

/// `−∫ζ dt` along the flux trajectory, in `(−π, π]`.
pub fn adiabatic_phase(spec: &CouplerSystemSpec, flux: &FluxPulse) -> Result<f64, CzError> {
    flux.validate()?;
    let parts = ModelParts::new(spec, None)?;
    const RAMP_POINTS: usize = 41;
    let zeta_gap = |f: f64| -> Result<(f64, f64), CzError> {
        let lab = label(&parts, hz_to_rad(f))?;
        lab.check(&parts, f, &super::spectrum::TRACKED)?;
        let mut gap = f64::INFINITY;
        for l in COMPUTATIONAL {
            let k = lab.dressed_of[parts.basis.find(l).unwrap()];
            let e = lab.eig.values[k];
            for (m, &v) in lab.eig.values.iter().enumerate() {
                if m != k {
                    gap = gap.min((v - e).abs());
                }
            }
        }
        Ok((lab.zeta(&parts), gap))
    };
    let mut integral = 0.0;
    let mut min_gap = f64::INFINITY;
    for (t0, len) in [(0.0, flux.rise_s), (flux.rise_s + flux.flat_s, flux.fall_s)] {
        if len == 0.0 {
            continue;
        }
        let h = len / (RAMP_POINTS - 1) as f64;
        for k in 0..RAMP_POINTS {
            let (z, g) = zeta_gap(flux.coupler_hz(t0 + k as f64 * h))?;
            min_gap = min_gap.min(g);
            // Simpson weights
            let w = if k == 0 || k == RAMP_POINTS - 1 { 1.0 } else if k % 2 == 1 { 4.0 } else { 2.0 };
            integral += w * h / 3.0 * z;
        }
    }
    let (z_hold, g_hold) = zeta_gap(flux.hold_hz)?;
    min_gap = min_gap.min(g_hold);
    integral += z_hold * flux.flat_s;
    let required = 10.0 / min_gap;
    let ramp = flux.rise_s.min(flux.fall_s);
    if flux.hold_hz != flux.idle_hz && ramp < required {
        return Err(CzError::DiabaticTrajectory { ramp_s: ramp, required_s: required });
    }
    Ok(wrap_angle(-integral))
}

/// Return phase `π(1 − Δ/Ω_eff)` of a two-level system after a full
/// `2π` rotation at constant detuning and amplitude.
pub fn two_level_phase(detuning_rad_s: f64, rabi_rad_s: f64) -> f64 {
    PI * (1.0 - detuning_rad_s / detuning_rad_s.hypot(rabi_rad_s))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub freq_hz: f64,
    pub peak_rad_s: f64,
    /// `ω_c^{11} − ω_d` at the hold, rad/s.
    pub detuning_rad_s: f64,
    pub leakage: f64,
    pub phase: f64,
}

impl CurvePoint {
    /// `√(Ω_d² + Δ²)` with `Ω_d` the envelope peak.
    pub fn effective_rate(&self) -> f64 {
        self.peak_rad_s.hypot(self.detuning_rad_s)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TuningLandscape {
    pub freqs_hz: Vec<f64>,
    pub peaks_rad_s: Vec<f64>,
    /// `[i][j]` at `(freqs_hz[i], peaks_rad_s[j])`.
    pub leakage: Vec<Vec<f64>>,
    pub phase: Vec<Vec<f64>>,
    pub omega_c11_hz: f64,
    pub curve: Vec<CurvePoint>,
}

/// Leakage and conditional phase over a drive frequency × amplitude grid,
/// plus the minimal-leakage curve.
pub fn tuning_landscape(
    spec: &CouplerSystemSpec,
    flux: &FluxPulse,
    freqs_hz: &[f64],
    peaks_rad_s: &[f64],
    opts: &DynamicsOptions,
) -> Result<TuningLandscape, CzError> {
    let model = Model::new(spec, flux, opts)?;
    let hold = spectrum_from(&ModelParts::new(spec, None)?, flux.hold_hz)?;
    let np = peaks_rad_s.len();
    let flat = (0..freqs_hz.len() * np)
        .into_par_iter()
        .map(|idx| {
            let d = TuningDrive::on_flattop(flux, freqs_hz[idx / np], peaks_rad_s[idx % np]);
            model.run(flux, &d, opts)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut land = TuningLandscape {
        freqs_hz: freqs_hz.to_vec(),
        peaks_rad_s: peaks_rad_s.to_vec(),
        leakage: flat.chunks(np.max(1)).map(|c| c.iter().map(|r| r.leakage).collect()).collect(),
        phase: flat.chunks(np.max(1)).map(|c| c.iter().map(|r| r.phase).collect()).collect(),
        omega_c11_hz: hold.omega_c_hz[1][1],
        curve: vec![],
    };
    land.curve = extract_curve(&land, &model, flux, opts)?;
    Ok(land)
}

/// Default landscape axes: drive frequency `ω_c^{11} ± 2u` and peak
/// amplitude `(0, 2.4u]`, with `u = 2π/T_flat`.
pub fn default_landscape_axes(flux: &FluxPulse, omega_c11_hz: f64, n_freq: usize, n_peak: usize) -> (Vec<f64>, Vec<f64>) {
    let u_hz = 1.0 / flux.flat_s;
    let freqs = crate::leakage::linspace(omega_c11_hz - 2.0 * u_hz, omega_c11_hz + 2.0 * u_hz, n_freq);
    let top = 2.4 * 2.0 * PI * u_hz;
    let peaks = (1..=n_peak).map(|k| top * k as f64 / n_peak as f64).collect();
    (freqs, peaks)
}

/// Leakage threshold for keeping a curve point.
pub const CURVE_LEAK_MAX: f64 = 1e-2;

const DIP_RATIO: f64 = 5.0;

/// Per drive frequency: the first local leakage minimum after the first
/// local maximum along the amplitude axis (the first full return), kept
/// when it dips `DIP_RATIO`× below that maximum, then refined by golden
/// section between its grid neighbours.
pub(crate) fn extract_curve(
    land: &TuningLandscape,
    model: &Model,
    flux: &FluxPulse,
    opts: &DynamicsOptions,
) -> Result<Vec<CurvePoint>, CzError> {
    let rows: Vec<Option<(usize, f64, f64)>> = land
        .leakage
        .iter()
        .map(|col| {
            let n = col.len();
            let jmax = (0..n.saturating_sub(1)).find(|&j| col[j] > col[j + 1])?;
            let jmin = (jmax + 1..n.saturating_sub(1)).find(|&j| col[j] <= col[j + 1])?;
            if col[jmax] < DIP_RATIO * col[jmin] {
                return None;
            }
            let lo = land.peaks_rad_s[jmin - 1].max(land.peaks_rad_s[jmax]);
            Some((jmin, lo, land.peaks_rad_s[jmin + 1]))
        })
        .collect();
    rows.into_par_iter()
        .enumerate()
        .filter_map(|(i, r)| r.map(|r| (i, r)))
        .map(|(i, (_, lo, hi))| {
            let f = land.freqs_hz[i];
            let (peak, res) = refine_peak(model, flux, f, lo, hi, opts)?;
            Ok((i, peak, res))
        })
        .collect::<Result<Vec<_>, CzError>>()
        .map(|v| {
            v.into_iter()
                .filter(|(_, _, r)| r.leakage < CURVE_LEAK_MAX)
                .map(|(i, peak, r)| CurvePoint {
                    freq_hz: land.freqs_hz[i],
                    peak_rad_s: peak,
                    detuning_rad_s: hz_to_rad(land.omega_c11_hz - land.freqs_hz[i]),
                    leakage: r.leakage,
                    phase: r.phase,
                })
                .collect()
        })
}

/// Golden-section minimum of leakage over the drive peak in `[lo, hi]`.
pub(crate) fn refine_peak(
    model: &Model,
    flux: &FluxPulse,
    freq_hz: f64,
    mut lo: f64,
    mut hi: f64,
    opts: &DynamicsOptions,
) -> Result<(f64, TuningResult), CzError> {
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let eval = |p: f64| model.run(flux, &TuningDrive::on_flattop(flux, freq_hz, p), opts);
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut r1 = eval(x1)?;
    let mut r2 = eval(x2)?;
    while hi - lo > 1e-4 * hi.abs().max(1.0) {
        if r1.leakage <= r2.leakage {
            hi = x2;
            (x2, r2) = (x1, r1);
            x1 = hi - INV_PHI * (hi - lo);
            r1 = eval(x1)?;
        } else {
            lo = x1;
            (x1, r1) = (x2, r2);
            x2 = lo + INV_PHI * (hi - lo);
            r2 = eval(x2)?;
        }
    }
    Ok(if r1.leakage <= r2.leakage { (x1, r1) } else { (x2, r2) })
}
