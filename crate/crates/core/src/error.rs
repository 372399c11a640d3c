use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LabError {
    #[error("point outside the unit disk (|z| = {0})")]
    Domain(f64),
    #[error("domain reduction did not terminate within {0} iterations")]
    Reduction(usize),
    #[error("invalid surface model: {0}")]
    InvalidModel(String),
    #[error("metric rejected: curvature upper bound {kmax:.4} is not below {limit}")]
    MetricRejected { kmax: f64, limit: f64 },
    #[error("integration failed: {0}")]
    Integration(String),
    #[error("conjugate point at horizon {0}: Jacobi field vanished")]
    ConjugatePoint(f64),
    #[error("Hopf limit not converged by horizon {horizon} (gap {gap:.3e}, tol {tol:.1e})")]
    Convergence { horizon: f64, gap: f64, tol: f64 },
    #[error("enumeration error: {0}")]
    Enumeration(String),
    #[error("fit error: {0}")]
    Fit(String),
    #[error("outside the convergence region: {0}")]
    Region(String),
    #[error("chart boundary crossed while differentiating at {0:?}")]
    ChartBoundary([f64; 3]),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, LabError>;
