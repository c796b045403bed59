//! Experiment harness around `imdm-core`: TOML run configs, binary
//! checkpoints, self-describing run directories, metrics and report
//! emission, the synthetic reproduction bundle, and the oracle suites.

pub mod checkpoint;
pub mod config;
pub mod coupling_io;
pub mod metrics;
pub mod oracle;
pub mod plot;
pub mod repro;
pub mod rundir;
pub mod sha1;

/// Exit-code contract of the `imdm` binary.
pub mod exit_codes {
    pub const OK: i32 = 0;
    pub const CONFIG: i32 = 2;
    pub const TRAINING: i32 = 3;
    pub const CAPACITY: i32 = 4;
    pub const PROPERTY: i32 = 5;
}

/// Map a core error to the exit-code class it belongs to.
pub fn exit_code_for(err: &imdm_core::Error) -> i32 {
    match err {
        imdm_core::Error::InvalidArgument(_) | imdm_core::Error::Domain(_) => exit_codes::CONFIG,
        imdm_core::Error::Capacity { .. } => exit_codes::CAPACITY,
        imdm_core::Error::Training(_) => exit_codes::TRAINING,
        imdm_core::Error::Infeasible(_) => exit_codes::CONFIG,
    }
}
