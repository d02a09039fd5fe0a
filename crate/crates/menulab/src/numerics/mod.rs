//! Shared numerical kernels: composite Gauss–Legendre quadrature, bundle-value
//! CDF convolution, scalar maximization, and a derivative-free simplex search.

mod nelder_mead;
mod quadrature;
mod scalar;

pub use nelder_mead::{nelder_mead, nelder_mead_from, NelderMeadOptions};
pub use quadrature::{integrate_1d, integrate_2d, GaussLegendre, Rect};
pub use scalar::maximize_scalar;

use crate::distributions::ProductDistribution;
use crate::error::Result;

/// Composite quadrature rule: `order` Gauss–Legendre nodes on each of
/// `panels` equal subintervals. Exact for polynomials of degree
/// `2*order - 1` on every panel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QuadratureSpec {
    pub order: usize,
    pub panels: usize,
}

impl QuadratureSpec {
    pub fn new(order: usize, panels: usize) -> Self {
        assert!(order >= 2, "quadrature order must be at least 2");
        assert!(panels >= 1, "quadrature needs at least one panel");
        Self { order, panels }
    }
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self::new(8, 64)
    }
}

/// Numerical tolerances shared across the crate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToleranceConfig {
    /// Absolute slack for feasibility/equality checks.
    pub abs_tol: f64,
    /// Relative tolerance for iterative refinement (quadrature doubling).
    pub rel_tol: f64,
    /// L-infinity distance below which menu items are merged.
    pub clustering_tol: f64,
    /// Slope difference that opens a new linear segment.
    pub slope_tol: f64,
}

impl ToleranceConfig {
    pub fn validate(&self) -> bool {
        self.abs_tol > 0.0
            && self.rel_tol > 0.0
            && self.clustering_tol > 0.0
            && self.slope_tol > 0.0
    }
}

impl Default for ToleranceConfig {
    fn default() -> Self {
        Self {
            abs_tol: 1e-9,
            rel_tol: 1e-7,
            clustering_tol: 5e-3,
            slope_tol: 1e-4,
        }
    }
}

/// CDF of the bundle value `x + y`: `P(x + y <= p)`, clamped to `[0, 1]`.
///
/// Computed as the convolution integral of the second marginal CDF against
/// the first marginal density. The integration range is split where the
/// inner CDF saturates, so the integrand stays smooth on every panel.
pub fn bundle_cdf(d: &ProductDistribution, p: f64, spec: &QuadratureSpec) -> Result<f64> {
    let (xlo, xhi) = d.dx().support();
    let (ylo, yhi) = d.dy().support();
    if p <= xlo + ylo {
        return Ok(0.0);
    }
    if p >= xhi + yhi {
        return Ok(1.0);
    }
    // Below `a` the inner CDF is exactly 1; above `b` it is exactly 0.
    let a = (p - yhi).clamp(xlo, xhi);
    let b = (p - ylo).clamp(xlo, xhi);
    let mut total = d.dx().cdf(a);
    if b > a {
        total += integrate_1d(|x| d.dy().cdf(p - x) * d.dx().pdf(x), a, b, spec)?;
    }
    Ok(total.clamp(0.0, 1.0))
}
