use std::process::ExitCode;

use ctrlgraph::Error;

pub const EXIT_IO: u8 = 3;
pub const EXIT_SCENARIO: u8 = 4;
pub const EXIT_NUMERICAL: u8 = 5;
pub const EXIT_A1: u8 = 10;
pub const EXIT_A2: u8 = 11;
pub const EXIT_A3: u8 = 12;
pub const EXIT_TIMEOUT: u8 = 13;

pub fn code(e: &Error) -> u8 {
    match e {
        Error::Io(_) => EXIT_IO,
        Error::Parse(_)
        | Error::Dimension(_)
        | Error::OutsideFreeSpace
        | Error::EmptyGrid
        | Error::InvalidArgument(_) => EXIT_SCENARIO,
        Error::EmptySet
        | Error::Unbounded
        | Error::NotPositiveDefinite(_)
        | Error::NoEquilibrium
        | Error::NoInteriorEquilibrium
        | Error::SolverFailure { .. }
        | Error::NotStable(_)
        | Error::InfeasibleSample(_)
        | Error::EmptyGraph => EXIT_NUMERICAL,
        Error::A1Violated => EXIT_A1,
        Error::A2Violated => EXIT_A2,
        Error::A3Violated => EXIT_A3,
        Error::Timeout(_) => EXIT_TIMEOUT,
    }
}

pub fn exit_code(e: &Error) -> ExitCode {
    ExitCode::from(code(e))
}
