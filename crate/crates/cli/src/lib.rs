//! Library side of the `muxctl` binary: device config, output files and
//! subcommand implementations.

pub mod commands;
pub mod config;
pub mod error;
pub mod io;

/// Worker count: `--workers`, else `MUXCTL_WORKERS`, else all cores.
pub fn worker_count(flag: Option<usize>) -> Result<Option<usize>, error::CliError> {
    if let Some(n) = flag {
        return Ok(Some(n));
    }
    match std::env::var("MUXCTL_WORKERS") {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&n| n > 0)
            .map(Some)
            .ok_or_else(|| error::CliError::Validation(format!("MUXCTL_WORKERS='{v}' is not a positive integer"))),
        Err(_) => Ok(None),
    }
}
