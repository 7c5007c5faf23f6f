use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("non-finite entry in {0}")]
    NonFinite(&'static str),
    #[error("resolvent (sI - A) is numerically singular at s = {0}")]
    SingularResolvent(Complex64),
    #[error("interconnection is ill-posed: I - D22*Dk is singular")]
    IllPosedInterconnection,
    #[error("system is not stable (spectral abscissa {0:e})")]
    NotStable(f64),
    #[error("system is not strictly proper (|D| = {0:e})")]
    NotStrictlyProper(f64),
    #[error("invalid SLH data: {0}")]
    InvalidSlh(String),
    #[error("invalid frequency grid: {0}")]
    InvalidGrid(String),
    #[error("invalid partition: {0}")]
    InvalidPartition(String),
    #[error("(A, B2) is not stabilizable: uncontrollable eigenvalue {eigenvalue}")]
    NotStabilizable { eigenvalue: Complex64 },
    #[error("(A, C2) is not detectable: unobservable eigenvalue {eigenvalue}")]
    NotDetectable { eigenvalue: Complex64 },
    #[error("eigenvalue assignment failed: {0}")]
    PlacementFailed(String),
    #[error("Bezout residual {0:e} exceeds tolerance")]
    BezoutResidualTooLarge(f64),
    #[error("coprime factor {0} is unstable")]
    FactorUnstable(&'static str),
    #[error("feedthrough of V + N Q is singular at infinity")]
    FeedthroughSingular,
    #[error("recovered Youla parameter is not in RH-infinity: {0}")]
    NotInYoulaRange(String),
    #[error("initial parameter violates the quadratic constraint (residual {residual:e} > {tol:e})")]
    InfeasibleStart { residual: f64, tol: f64 },
    #[error("line search stalled at iteration {0}")]
    StalledLineSearch(usize),
    #[error("schur decomposition did not converge")]
    SchurFailed,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

pub type Result<T> = std::result::Result<T, Error>;
