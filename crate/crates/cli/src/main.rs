use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use muxctl_cli::commands::*;
use muxctl_cli::error::CliError;
use muxctl_cli::worker_count;

#[derive(Parser)]
#[command(name = "muxctl", version, about = "Multiplexed control of superconducting qubits")]
struct Cli {
    /// Worker threads for sweeps (overrides MUXCTL_WORKERS).
    #[arg(long, global = true, value_parser = clap::value_parser!(u64).range(1..))]
    workers: Option<u64>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Compile a circuit and synthesize its XY/flux schedule.
    Compile {
        #[arg(long)]
        circuit: PathBuf,
        #[arg(long)]
        device: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Leakage of a π/2 pulse with two spurious tones over a frequency grid.
    LeakageMap {
        #[arg(long)]
        device: PathBuf,
        #[arg(long)]
        qubit: Option<String>,
        /// Spurious tones at full amplitude.
        #[arg(long)]
        no_filter: bool,
        /// lo,hi,n in Hz.
        #[arg(long, allow_hyphen_values = true)]
        grid: String,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Leakage against spurious-tone power for the 1→2 and 0→2 classes.
    PowerScaling {
        #[arg(long)]
        device: PathBuf,
        #[arg(long)]
        qubit: Option<String>,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Monte-Carlo collision check of the frequency plan.
    PlanCheck {
        #[arg(long)]
        device: PathBuf,
        #[arg(long, default_value_t = 1e6)]
        guard_hz: f64,
        #[arg(long, default_value_t = 10000)]
        trials: usize,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// ZZ and conditional coupler frequencies against coupler bias.
    CzSpectrum {
        #[arg(long)]
        device: PathBuf,
        #[arg(long)]
        coupler: Option<String>,
        /// lo,hi,n in Hz.
        #[arg(long)]
        grid: String,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Leakage and phase over drive frequency and amplitude.
    CzLandscape {
        #[arg(long)]
        device: PathBuf,
        #[arg(long)]
        coupler: Option<String>,
        #[arg(long, default_value_t = 25)]
        n_freq: usize,
        #[arg(long, default_value_t = 25)]
        n_amp: usize,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Calibrate the coupler drive for a target conditional phase.
    CzTune {
        #[arg(long)]
        device: PathBuf,
        #[arg(long)]
        coupler: Option<String>,
        /// Radians in (−π, π].
        #[arg(long, allow_hyphen_values = true)]
        target: f64,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Wiring, multiplicity and heat-load report.
    Resources {
        #[arg(long)]
        qubits: u64,
        #[arg(long)]
        cables: u64,
        #[arg(long)]
        delta_f: f64,
        #[arg(long)]
        band: f64,
        #[arg(long)]
        rows: Option<u64>,
        #[arg(long)]
        cols: Option<u64>,
        #[arg(long, default_value_t = 5e9)]
        qubit_hz: f64,
        #[arg(long, default_value_t = 10e-3)]
        t1: f64,
        #[arg(long, default_value_t = 1.6e6)]
        rabi_hz: f64,
        #[arg(long, default_value_t = 100e-9)]
        gate_time: f64,
        /// Passive conduction per cable, W.
        #[arg(long, default_value_t = 0.0)]
        passive_w: f64,
        #[arg(long, default_value_t = 2)]
        z_per_row: u64,
        #[arg(long, default_value_t = 1)]
        coupler_xy_per_row: u64,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<String, CliError> {
    if let Some(n) = worker_count(cli.workers.map(|w| w as usize))? {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Validation(e.to_string()))?;
    }
    match cli.cmd {
        Cmd::Compile { circuit, device, out } => cmd_compile(&circuit, &device, &out),
        Cmd::LeakageMap { device, qubit, no_filter, grid, out } => {
            cmd_leakage_map(&LeakageMapArgs { device, qubit, no_filter, grid, out })
        }
        Cmd::PowerScaling { device, qubit, out } => cmd_power_scaling(&device, qubit.as_deref(), &out),
        Cmd::PlanCheck { device, guard_hz, trials, seed, out } => cmd_plan_check(&device, guard_hz, trials, seed, &out),
        Cmd::CzSpectrum { device, coupler, grid, out } => cmd_cz_spectrum(&device, coupler.as_deref(), &grid, &out),
        Cmd::CzLandscape { device, coupler, n_freq, n_amp, out } => {
            cmd_cz_landscape(&device, coupler.as_deref(), n_freq, n_amp, &out)
        }
        Cmd::CzTune { device, coupler, target, out } => cmd_cz_tune(&device, coupler.as_deref(), target, &out),
        Cmd::Resources {
            qubits,
            cables,
            delta_f,
            band,
            rows,
            cols,
            qubit_hz,
            t1,
            rabi_hz,
            gate_time,
            passive_w,
            z_per_row,
            coupler_xy_per_row,
            out,
        } => cmd_resources(&ResourcesArgs {
            qubits,
            cables,
            delta_f,
            band,
            rows,
            cols,
            qubit_hz,
            t1_s: t1,
            rabi_hz,
            gate_time_s: gate_time,
            passive_w,
            z_per_row,
            coupler_xy_per_row,
            out,
        }),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(msg) => {
            println!("{msg}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("muxctl: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
