//! Numerical tolerances shared across the crate.

use serde::{Deserialize, Serialize};

/// Tolerance bundle threaded through every routine that makes a numerical
/// decision. The defaults are the documented contract; callers can override
/// individual fields when they know their data is cleaner or dirtier.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Tolerances {
    /// Allowed drift of `M^T J M` from `J` before renormalization.
    pub form: f64,
    /// Eigenvalue separation when deciding loxodromic against unit modulus.
    pub eig: f64,
    /// Angle comparisons (rotation detection, dihedral sums).
    pub angle: f64,
    /// Chart-point comparisons in the spherical metric on S^3.
    pub chart: f64,
    /// Inversive-distance separation around tangency.
    pub sep: f64,
    /// Annulus modulus comparisons.
    pub modulus: f64,
    /// Commutation residuals for centralizer membership.
    pub comm: f64,
    /// Relator residuals for holonomy representations.
    pub rel: f64,
    /// Edge-cycle return-map residuals.
    pub cycle: f64,
    /// Relative singular-value cutoff for rank decisions.
    pub rank: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            form: 1e-10,
            eig: 1e-8,
            angle: 1e-8,
            chart: 1e-9,
            sep: 1e-9,
            modulus: 1e-8,
            comm: 1e-9,
            rel: 1e-8,
            cycle: 1e-8,
            rank: 1e-9,
        }
    }
}
