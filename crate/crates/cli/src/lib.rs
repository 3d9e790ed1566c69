//! Command-line toolkit around `mousesal-core` and `mousesal-service`.

pub mod commands;
pub mod store;

/// Malformed user input (usage, manifest or trace syntax); exits with 2.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct InputError(pub String);

/// Process exit code for a failed command: 2 for usage and parse errors,
/// 1 for everything else.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    for cause in err.chain() {
        if cause.downcast_ref::<InputError>().is_some()
            || matches!(cause.downcast_ref::<mousesal_core::Error>(), Some(mousesal_core::Error::Parse { .. }))
        {
            return 2;
        }
    }
    1
}
