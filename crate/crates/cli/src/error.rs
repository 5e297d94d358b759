use csmac_core::Error as CoreError;

/// Configuration or argument problem detected before any run.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct Invalid(pub String);

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;
pub const EXIT_INFEASIBLE: i32 = 4;

/// Exit code for an error: invalid input, infeasible requirement, or runtime failure.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    for cause in err.chain() {
        if cause.downcast_ref::<Invalid>().is_some() {
            return EXIT_INVALID;
        }
        if let Some(e) = cause.downcast_ref::<CoreError>() {
            return match e {
                CoreError::InvalidParameter(_)
                | CoreError::DimensionMismatch(_)
                | CoreError::NonStationary { .. }
                | CoreError::NotPositiveSemidefinite { .. }
                | CoreError::Parse(_) => EXIT_INVALID,
                CoreError::NoFeasibleConfig { .. }
                | CoreError::TargetNotAttained { .. }
                | CoreError::Infeasible(_) => EXIT_INFEASIBLE,
                _ => EXIT_RUNTIME,
            };
        }
    }
    EXIT_RUNTIME
}
