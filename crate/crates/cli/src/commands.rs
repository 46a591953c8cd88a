use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use muxctl_core::circuit::{layerize_with_couplers, parse_circuit, Gate};
use muxctl_core::compiler::{compile, CompileOptions, PhysicalCycle};
use muxctl_core::cz::{
    calibrate_phase, default_landscape_axes, dressed_spectrum, simulate_tuning, tuning_landscape, zz_vs_coupler,
};
use muxctl_core::leakage::{leakage_map, linspace, main_pulse, power_scaling, Attenuation, TransitionClass};
use muxctl_core::mux::validate_plan;
use muxctl_core::pulse::synthesize;
use muxctl_core::resources::{system_feasibility, BudgetSpec, LatticeSpec, SharingRules};
use serde::Serialize;

use crate::config::{load_device, LoadedDevice};
use crate::error::CliError;
use crate::io::{num, read_text, write_csv, write_json, Meta, Table};

/// `lo,hi,n` with `n ≥ 1` and `lo ≤ hi`.
pub fn parse_grid(s: &str) -> Result<(f64, f64, usize), CliError> {
    let bad = || CliError::Validation(format!("grid '{s}' is not lo,hi,n"));
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(bad());
    }
    let lo: f64 = parts[0].parse().map_err(|_| bad())?;
    let hi: f64 = parts[1].parse().map_err(|_| bad())?;
    let n: usize = parts[2].parse().map_err(|_| bad())?;
    if n == 0 || !lo.is_finite() || !hi.is_finite() || hi < lo || (n > 1 && hi == lo) {
        return Err(bad());
    }
    Ok((lo, hi, n))
}

fn meta(cmd: &str, dev: &LoadedDevice, seed: Option<u64>) -> Meta {
    Meta::new(cmd, Some(dev.sha256.clone()), seed)
}

#[derive(Serialize)]
struct CompileOutput<'a> {
    device: &'a str,
    num_qubits: usize,
    cycles: Vec<&'static str>,
    global_phase_rad: f64,
    schedule: muxctl_core::pulse::ScheduleExport<'a>,
}

pub fn cmd_compile(circuit: &Path, device: &Path, out: &Path) -> Result<String, CliError> {
    let dev = load_device(device)?;
    let cfg = &dev.config;
    let c = parse_circuit(&read_text(circuit)?)?;
    if c.num_qubits > cfg.qubits.len() {
        return Err(CliError::Validation(format!(
            "circuit uses {} qubits, device '{}' has {}",
            c.num_qubits,
            cfg.name,
            cfg.qubits.len()
        )));
    }
    let pairs = cfg.coupler_pairs();
    for (i, g) in c.gates.iter().enumerate() {
        if let Gate::Cz { qubits: (a, b) } | Gate::SqrtCz { qubits: (a, b) } = g {
            if !pairs.iter().any(|&(x, y)| (x, y) == (*a, *b) || (y, x) == (*a, *b)) {
                return Err(CliError::Validation(format!("gate #{i} acts on uncoupled qubits {a}, {b}")));
            }
        }
    }
    let couplers: Vec<(usize, usize)> =
        pairs.into_iter().filter(|&(a, b)| a < c.num_qubits && b < c.num_qubits).collect();
    let layered = layerize_with_couplers(&c, &couplers);
    let program = compile(&layered, &CompileOptions::default())?;
    let names = cfg.qubit_names();
    let schedule = synthesize(&program, &names[..c.num_qubits], &cfg.lines.xy, &cfg.frequency_plan, &cfg.timing)?;
    let body = CompileOutput {
        device: &cfg.name,
        num_qubits: c.num_qubits,
        cycles: program
            .cycles
            .iter()
            .map(|k| match k {
                PhysicalCycle::OneQubit { .. } => "one_qubit",
                PhysicalCycle::TwoQubit { .. } => "two_qubit",
            })
            .collect(),
        global_phase_rad: program.global_phase,
        schedule: schedule.export(),
    };
    write_json(out, &meta("compile", &dev, None), &body)?;
    Ok(format!("{} cycles, {:.1} ns -> {}", program.cycles.len(), schedule.total_s * 1e9, out.display()))
}

pub struct LeakageMapArgs {
    pub device: PathBuf,
    pub qubit: Option<String>,
    pub no_filter: bool,
    pub grid: String,
    pub out: PathBuf,
}

pub fn cmd_leakage_map(a: &LeakageMapArgs) -> Result<String, CliError> {
    let dev = load_device(&a.device)?;
    let (lo, hi, n) = parse_grid(&a.grid)?;
    let spec = dev.config.transmon(a.qubit.as_deref())?;
    let main = main_pulse(&spec, dev.config.timing.pulse_s);
    let att = if a.no_filter { Attenuation::None } else { Attenuation::Filter(dev.config.filter) };
    let axis = linspace(lo, hi, n);
    let map = leakage_map(&spec, &main, &axis, &axis, att)?;
    let mut t = Table::new(&["freq_a_hz", "freq_b_hz", "leakage"]);
    for (i, fa) in map.axis_a_hz.iter().enumerate() {
        for (j, fb) in map.axis_b_hz.iter().enumerate() {
            t.push(vec![num(*fa), num(*fb), num(map.values[i][j])]);
        }
    }
    write_csv(&a.out, &meta("leakage-map", &dev, None), &t)?;
    let top = map.values.iter().flatten().cloned().fold(0.0, f64::max);
    Ok(format!("{n}x{n} map, max leakage {top:.3e} -> {}", a.out.display()))
}

#[derive(Serialize)]
struct PowerOutput {
    qubit_hz: f64,
    classes: Vec<PowerClass>,
}

#[derive(Serialize)]
struct PowerClass {
    class: TransitionClass,
    fit: muxctl_core::leakage::PowerScaling,
    projected_db: f64,
    projected_leakage: f64,
}

pub fn cmd_power_scaling(device: &Path, qubit: Option<&str>, out: &Path) -> Result<String, CliError> {
    let dev = load_device(device)?;
    let spec = dev.config.transmon(qubit)?;
    let main = main_pulse(&spec, dev.config.timing.pulse_s);
    let mut classes = Vec::new();
    let mut msg = String::new();
    for (class, sweep, project) in [
        (TransitionClass::SinglePhoton12, vec![40.0, 35.0, 30.0, 25.0, 20.0], 40.0),
        (TransitionClass::TwoPhoton02, vec![10.0, 7.5, 5.0, 2.5, 0.0], 10.0),
    ] {
        let fit = power_scaling(&spec, &main, class, &sweep)?;
        let projected_leakage = fit.projected(project);
        let _ = writeln!(msg, "{class:?}: slope {:.3}, {project} dB -> {projected_leakage:.3e}", fit.slope);
        classes.push(PowerClass { class, fit, projected_db: project, projected_leakage });
    }
    write_json(out, &meta("power-scaling", &dev, None), &PowerOutput { qubit_hz: spec.f01_hz, classes })?;
    Ok(msg.trim_end().to_string())
}

pub fn cmd_plan_check(device: &Path, guard_hz: f64, trials: usize, seed: Option<u64>, out: &Path) -> Result<String, CliError> {
    let dev = load_device(device)?;
    let seed = seed.unwrap_or(dev.config.seed);
    let r = validate_plan(&dev.config.frequency_plan, &dev.config.filter, guard_hz, trials, seed)?;
    write_json(out, &meta("plan-check", &dev, Some(seed)), &r)?;
    Ok(format!("collision fraction {:.4} ({} of {})", r.fraction, r.collisions, r.trials))
}

pub fn cmd_cz_spectrum(device: &Path, coupler: Option<&str>, grid: &str, out: &Path) -> Result<String, CliError> {
    let dev = load_device(device)?;
    let c = dev.config.coupler(coupler)?;
    let spec = dev.config.cz_system(c);
    let (lo, hi, n) = parse_grid(grid)?;
    let pts = zz_vs_coupler(&spec, &linspace(lo, hi, n))?;
    let mut t = Table::new(&[
        "coupler_hz",
        "zeta_hz",
        "omega_c00_hz",
        "omega_c01_hz",
        "omega_c10_hz",
        "omega_c11_hz",
        "max_separation_hz",
        "status",
    ]);
    let mut flagged = 0;
    for p in &pts {
        match &p.spectrum {
            Some(s) => {
                let w = s.omega_c_hz;
                t.push(vec![
                    num(p.coupler_hz),
                    num(s.zeta_hz),
                    num(w[0][0]),
                    num(w[0][1]),
                    num(w[1][0]),
                    num(w[1][1]),
                    num(s.max_separation_hz()),
                    "ok".into(),
                ]);
            }
            None => {
                flagged += 1;
                let mut row = vec![num(p.coupler_hz)];
                row.extend(std::iter::repeat_n("NaN".to_string(), 6));
                row.push("label_ambiguity".into());
                t.push(row);
            }
        }
    }
    write_csv(out, &meta("cz-spectrum", &dev, None), &t)?;
    Ok(format!("{n} points, {flagged} flagged -> {}", out.display()))
}

pub fn cmd_cz_landscape(
    device: &Path,
    coupler: Option<&str>,
    n_freq: usize,
    n_peak: usize,
    out: &Path,
) -> Result<String, CliError> {
    if n_freq < 3 || n_peak < 3 {
        return Err(CliError::Validation("landscape needs at least 3 points per axis".into()));
    }
    let dev = load_device(device)?;
    let c = dev.config.coupler(coupler)?;
    let spec = dev.config.cz_system(c);
    let flux = dev.config.flux_pulse(c);
    let w11 = dressed_spectrum(&spec, flux.hold_hz)?.omega_c_hz[1][1];
    let (freqs, peaks) = default_landscape_axes(&flux, w11, n_freq, n_peak);
    let land = tuning_landscape(&spec, &flux, &freqs, &peaks, &dev.config.dynamics())?;
    write_json(out, &meta("cz-landscape", &dev, None), &land)?;
    Ok(format!("{n_freq}x{n_peak} landscape, {} curve points -> {}", land.curve.len(), out.display()))
}

#[derive(Serialize)]
struct TuneOutput {
    coupler: String,
    target_rad: f64,
    calibration: muxctl_core::cz::Calibration,
    /// Independent re-simulation of the returned drive.
    check_phase_rad: f64,
    check_leakage: f64,
}

pub fn cmd_cz_tune(device: &Path, coupler: Option<&str>, target: f64, out: &Path) -> Result<String, CliError> {
    let dev = load_device(device)?;
    let c = dev.config.coupler(coupler)?;
    let spec = dev.config.cz_system(c);
    let flux = dev.config.flux_pulse(c);
    let opts = dev.config.calibration();
    if !(target > -PI && target <= PI) {
        return Err(CliError::Validation(format!("target {target} outside (-pi, pi]")));
    }
    let cal = calibrate_phase(&spec, &flux, target, &opts)?;
    let check = simulate_tuning(&spec, &flux, &cal.drive, &opts.dynamics)?;
    let msg = format!(
        "phase {:.6} rad (target {target:.6}), leakage {:.2e}, drive {:.6} GHz at {:.4} MHz peak",
        check.phase,
        check.leakage,
        cal.drive.freq_hz / 1e9,
        cal.drive.peak_rad_s / (2.0 * PI) / 1e6
    );
    let body = TuneOutput {
        coupler: c.name.clone(),
        target_rad: target,
        calibration: cal,
        check_phase_rad: check.phase,
        check_leakage: check.leakage,
    };
    write_json(out, &meta("cz-tune", &dev, None), &body)?;
    Ok(msg)
}

pub struct ResourcesArgs {
    pub qubits: u64,
    pub cables: u64,
    pub delta_f: f64,
    pub band: f64,
    pub rows: Option<u64>,
    pub cols: Option<u64>,
    pub qubit_hz: f64,
    pub t1_s: f64,
    pub rabi_hz: f64,
    pub gate_time_s: f64,
    pub passive_w: f64,
    pub z_per_row: u64,
    pub coupler_xy_per_row: u64,
    pub out: Option<PathBuf>,
}

pub fn cmd_resources(a: &ResourcesArgs) -> Result<String, CliError> {
    let lattice = match (a.rows, a.cols) {
        (Some(rows), Some(cols)) => LatticeSpec { rows, cols },
        (None, None) => LatticeSpec::for_qubits(a.qubits),
        _ => return Err(CliError::Validation("give both --rows and --cols or neither".into())),
    };
    if lattice.qubits() < a.qubits {
        return Err(CliError::Validation(format!("{}x{} lattice holds fewer than {} qubits", lattice.rows, lattice.cols, a.qubits)));
    }
    let budget = BudgetSpec {
        band_hz: a.band,
        spacing_hz: a.delta_f,
        cables: a.cables,
        qubit_hz: a.qubit_hz,
        t1_s: a.t1_s,
        drive_rad_s: 2.0 * PI * a.rabi_hz,
        gate_time_s: a.gate_time_s,
        passive_per_cable_w: a.passive_w,
    };
    let rules = SharingRules { z_lines_per_coupler_row: a.z_per_row, xy_lines_per_coupler_row: a.coupler_xy_per_row };
    let rep = system_feasibility(&budget, a.qubits, &lattice, &rules)?;
    if let Some(out) = &a.out {
        write_json(out, &Meta::new("resources", None, None), &rep)?;
    }
    Ok(rep.to_string())
}
