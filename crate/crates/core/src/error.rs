//! Error types shared across the crate.

use thiserror::Error;

/// Everything that can go wrong inside the simulation library.
#[derive(Debug, Error)]
pub enum Error {
    /// The denominator of the chassis-acceleration quotient dropped below
    /// the guard threshold; the parameter set degenerates the model.
    #[error("chassis-acceleration denominator {denominator:.3e} below guard {guard:.1e}")]
    SingularDenominator { denominator: f64, guard: f64 },

    /// The torque-balance elimination is not solvable: the residual is
    /// (numerically) constant in the chassis acceleration.
    #[error("torque elimination is degenerate: slope magnitude {slope:.3e} < 1e-12")]
    DegenerateElimination { slope: f64 },

    /// An integrator stage produced a non-finite value.
    #[error("non-finite derivative during integration at t = {t}")]
    NonFiniteDerivative { t: f64 },

    /// A gyro sample arrived out of order.
    #[error("gyro sequence gap: expected {expected}, got {got}")]
    SequenceGap { expected: u64, got: u64 },

    /// Metrics were requested for a trajectory with no samples.
    #[error("empty trajectory")]
    EmptyTrajectory,

    /// The baseline metrics of a comparison contain a zero.
    #[error("comparison baseline metric `{metric}` is zero")]
    DivisionByZeroBase { metric: &'static str },

    /// A scenario run hit a numeric failure; the step index locates it.
    #[error("scenario aborted at step {step}: {source}")]
    ScenarioAborted {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    /// A wire frame that does not parse as any protocol message.
    #[error("malformed frame: {reason} in {line:?}")]
    MalformedFrame { reason: &'static str, line: String },

    /// A reply carried the wrong sequence number.
    #[error("sequence mismatch: expected {expected}, got {got}")]
    SequenceMismatch { expected: u64, got: u64 },

    /// A peer did not answer within the configured deadline.
    #[error("timed out waiting for {waiting_for}")]
    Timeout { waiting_for: &'static str },

    /// Transport-level failure.
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    /// A parameter value violates its documented invariant.
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
}

pub type Result<T> = std::result::Result<T, Error>;
