//! Conformal geometry of S^3: spheres, circles, arcs, and Moebius annuli.

pub mod annulus;
pub mod circle;
pub mod sphere;

pub use annulus::{
    connecting_arc, inner_partner, normalize_annulus, outer_partner, winding_number,
    AnnulusNormalization, MoebiusAnnulus,
};
pub use circle::{Circle, CircleArc, CircleFrame};
pub use sphere::{dihedral_angle, inversive_distance, separation, Separation, Side, Sphere};
