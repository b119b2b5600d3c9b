use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("ions {i} and {j} coincide")]
    CoincidentIons { i: usize, j: usize },

    #[error("equilibrium search did not converge (best residual {residual:.3e} in units of m*omega_z^2*l0)")]
    NotConverged { residual: f64 },

    #[error("equilibrium is not planar (max |z| = {max_z:.3e} m)")]
    NotPlanar { max_z: f64 },

    #[error("planar crystal is past its stability limit: {0}")]
    Unstable(String),

    #[error("invalid bracket: {0}")]
    InvalidBracket(String),

    #[error("scattering probability {probability:.3} per step exceeds 0.1 (beam {beam}, ion {ion}); reduce dt")]
    ScatterProbability {
        probability: f64,
        beam: usize,
        ion: usize,
    },

    #[error("non-finite state at step {step} (t = {time:.6e} s, ion {ion})")]
    NonFinite { step: u64, time: f64, ion: usize },

    #[error("shape mismatch: {0}")]
    Shape(String),
}

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
