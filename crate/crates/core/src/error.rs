use thiserror::Error;

/// Crate-wide error type.
#[derive(Error, Debug)]
pub enum Error {
    /// An argument lies outside the domain of the function it was fed to
    /// (weight evaluated at a negative abscissa in the half-line case,
    /// a vanishing norm weight, a pole inside the spectral enclosure, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// Mismatched dimensions between operators, vectors or grids.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// A constant in the admissibility chain violates its defining
    /// inequality (ell <= ||F||, ess * k0 >= 1, kappa below kappa0, ...).
    #[error("constant violation: {0}")]
    ConstantViolation(String),

    /// A linear solve hit a (near-)singular matrix; carries the achieved
    /// residual so callers can report how close the point was to the spectrum.
    #[error("near-singular solve ({context}): residual {residual:.3e}")]
    NearSingular { residual: f64, context: String },

    /// A feasibility search (constants, radii, shrink parameters) ran out
    /// of room; the message names the violated inequality.
    #[error("infeasible: {0}")]
    Infeasible(String),

    /// Contour or domain construction failed (junction bisection,
    /// disc-inclusion witness, orientation defect).
    #[error("geometry error: {0}")]
    Geometry(String),

    /// Quadrature could not reach the requested resolution, or an
    /// evaluation point sits too close to the contour.
    #[error("quadrature error: {0}")]
    Quadrature(String),

    /// The requested point belongs to the spectrum of the characteristic
    /// function, where the model resolvent is undefined.
    #[error("spectral point: {0}")]
    SpectralPoint(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
