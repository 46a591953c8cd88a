use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::dynamics::{refine_peak, Model};
use super::spectrum::spectrum_from;
use super::{CouplerSystemSpec, CzError, DynamicsOptions, FluxPulse, ModelParts, TuningDrive};
use crate::numerics::{rad_to_hz, wrap_angle};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationOptions {
    pub phase_tol: f64,
    pub leak_tol: f64,
    pub max_iter: usize,
    pub dynamics: DynamicsOptions,
}

impl Default for CalibrationOptions {
    fn default() -> Self {
        CalibrationOptions { phase_tol: 1e-3, leak_tol: 1e-3, max_iter: 60, dynamics: DynamicsOptions::default() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub drive: TuningDrive,
    pub achieved_phase_rad: f64,
    pub leak_population: f64,
    /// Phase with the flux pulse alone.
    pub flux_phase_rad: f64,
    pub omega_c11_hz: f64,
}

/// Finds a drive on the minimal-leakage curve so that the total
/// conditional phase equals `target`.
pub fn calibrate_phase(
    spec: &CouplerSystemSpec,
    flux: &FluxPulse,
    target: f64,
    opts: &CalibrationOptions,
) -> Result<Calibration, CzError> {
    if !(target > -PI && target <= PI) {
        return Err(CzError::InvalidInput(format!("target {target} outside (−π, π]")));
    }
    let dyn_opts = &opts.dynamics;
    let model = Model::new(spec, flux, dyn_opts)?;
    let w11 = spectrum_from(&ModelParts::new(spec, None)?, flux.hold_hz)?.omega_c_hz[1][1];
    let bare = TuningDrive::on_flattop(flux, w11, 0.0);
    let r0 = model.run(flux, &bare, dyn_opts)?;
    let done = |drive: TuningDrive, r: &super::TuningResult| Calibration {
        drive,
        achieved_phase_rad: r.phase,
        leak_population: r.leakage,
        flux_phase_rad: r0.phase,
        omega_c11_hz: w11,
    };
    let extra_needed = (target - r0.phase).rem_euclid(2.0 * PI);
    if wrap_angle(target - r0.phase).abs() <= opts.phase_tol {
        return Ok(done(bare, &r0));
    }

    // radius of the return curve, from its resonant point
    let u = 2.0 * PI / flux.flat_s;
    let (radius, _) = refine_peak(&model, flux, w11, 1.5 * u, 2.6 * u, dyn_opts)?;
    // point on the curve at detuning Δ (rad/s): drive, result, extra phase
    let point = |delta: f64| -> Result<(TuningDrive, super::TuningResult, f64), CzError> {
        let f = w11 - rad_to_hz(delta);
        let guess = (radius * radius - delta * delta).max(0.0).sqrt();
        let (peak, r) =
            refine_peak(&model, flux, f, (guess - 0.12 * radius).max(0.0), guess + 0.12 * radius, dyn_opts)?;
        let extra = (r.phase - r0.phase).rem_euclid(2.0 * PI);
        Ok((TuningDrive::on_flattop(flux, f, peak), r, extra))
    };

    // extra phase falls from ~2π to ~0 as Δ goes from −R to R
    let edge = 0.97 * radius;
    let (mut a, mut b) = (-edge, edge);
    let pa = point(a)?;
    let pb = point(b)?;
    let g = |p: &(TuningDrive, super::TuningResult, f64)| p.2 - extra_needed;
    let (mut ga, mut gb) = (g(&pa), g(&pb));
    let mut best = if ga.abs() < gb.abs() { pa.clone() } else { pb.clone() };
    if ga < 0.0 || gb > 0.0 {
        return Err(CzError::NoSolution { residual: g(&best).abs(), leakage: best.1.leakage });
    }
    let mut side = 0i8;
    for _ in 0..opts.max_iter {
        // Illinois false position
        let c = (a * gb - b * ga) / (gb - ga);
        let pc = point(c)?;
        let gc = g(&pc);
        if gc.abs() < g(&best).abs() {
            best = pc;
        }
        if gc.abs() <= 0.5 * opts.phase_tol || (b - a).abs() < 1e-9 * radius {
            break;
        }
        if gc > 0.0 {
            (a, ga) = (c, gc);
            if side == 1 {
                gb *= 0.5;
            }
            side = 1;
        } else {
            (b, gb) = (c, gc);
            if side == -1 {
                ga *= 0.5;
            }
            side = -1;
        }
    }
    let residual = wrap_angle(best.1.phase - target).abs();
    if residual > opts.phase_tol || best.1.leakage > opts.leak_tol {
        return Err(CzError::NoSolution { residual, leakage: best.1.leakage });
    }
    Ok(done(best.0, &best.1))
}
