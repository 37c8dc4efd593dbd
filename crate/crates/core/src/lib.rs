//! Computational Moebius geometry of S^3 in the Lorentz model, and the
//! machinery built on top of it: necklace fundamental polyhedra with annulus
//! faces, surface-group face pairings, Euler numbers via linking numbers of
//! piecewise-circular loops, earthquake deformations, and transversality of
//! geodesic-triangle sections in H^4.

pub mod conformal;
pub mod error;
pub mod holonomy;
pub mod necklace;
pub mod tol;

pub mod lorentz;

pub use error::{Error, Result};
pub use tol::Tolerances;
