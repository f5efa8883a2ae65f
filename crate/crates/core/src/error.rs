use thiserror::Error;

/// Errors shared across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("cannot parse rational from {0:?}")]
    ParseRational(String),

    #[error("the doubling map is not invertible")]
    NotInvertible,

    #[error("0 has no odometer preimage point")]
    NoOdometerPreimage,

    #[error("empty point list: no orbit data")]
    EmptyPointList,

    #[error("target sequence is only defined up to n = {defined}, requested n = {requested}")]
    Horizon { defined: u64, requested: u64 },

    #[error("rate schedule infeasible: {0}")]
    InfeasibleSchedule(String),

    #[error(
        "cannot reach block sum: block {block} accumulated {accumulated} after scanning n <= {scanned} \
         (dyadic floors of the rates sum too slowly over the scan horizon)"
    )]
    CannotReachBlockSum {
        block: u32,
        accumulated: String,
        scanned: u64,
    },

    #[error("seed-set budget exceeded: sum n*m(E_n) = {got} > epsilon = {budget}")]
    BudgetExceeded { got: String, budget: String },

    #[error("measure mismatch at level {level}: source {source_measure} vs target {target_measure}")]
    MeasureMismatch {
        level: usize,
        source_measure: String,
        target_measure: String,
    },

    #[error("certificate invalid: {0}")]
    CertificateInvalid(String),
}
