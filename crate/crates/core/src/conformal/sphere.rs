//! Unoriented 2-spheres in S^3 with a selected complementary ball.

use crate::error::{Error, Result};
use crate::lorentz::{form, quad, ChartPoint, MoebiusElement, Vec3, Vec5};
use crate::tol::Tolerances;
use serde::{Deserialize, Serialize};

/// Which complementary ball of a sphere is selected. For a metric sphere,
/// `Inside` is the bounded ball of the chart and `Outside` the ball through
/// infinity; for a plane, `Inside` is the half-space below the offset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    Inside,
    Outside,
}

/// Relative position of two spheres.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Separation {
    /// The carriers cross in a circle.
    Intersecting,
    /// The carriers touch at a single point.
    Tangent,
    /// The carriers are disjoint.
    Disjoint,
}

/// A 2-sphere of S^3 represented by a unit spacelike vector `v`, oriented so
/// that the lift of every point of the selected ball pairs negatively with
/// `v`. Metric spheres and chart planes are the same object here; a plane is
/// a sphere through infinity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sphere {
    v: Vec5,
}

impl Sphere {
    /// Sphere of the chart with center `c` and radius `r > 0`, selecting the
    /// given side.
    pub fn from_center_radius(c: Vec3, r: f64, side: Side) -> Result<Self> {
        if !(r > 0.0) || !r.is_finite() {
            return Err(Error::InvalidSpec(format!(
                "sphere radius must be positive and finite, got {r}"
            )));
        }
        let n = c.norm_squared();
        let mut v = Vec5::new(
            -(n - r * r + 1.0) / (2.0 * r),
            -c.x / r,
            -c.y / r,
            -c.z / r,
            (1.0 - n + r * r) / (2.0 * r),
        );
        if side == Side::Outside {
            v = -v;
        }
        Ok(Sphere { v })
    }

    /// Plane `{ p . n = h }` of the chart; `Inside` selects `{ p . n < h }`.
    /// `n` need not be unit.
    pub fn from_plane(n: Vec3, h: f64, side: Side) -> Result<Self> {
        let len = n.norm();
        if len < 1e-14 {
            return Err(Error::InvalidSpec("plane normal must be nonzero".into()));
        }
        let u = n / len;
        let h = h / len;
        let mut v = Vec5::new(h, u.x, u.y, u.z, h);
        if side == Side::Outside {
            v = -v;
        }
        Ok(Sphere { v })
    }

    /// Wraps a spacelike vector, renormalizing to `B(v, v) = 1`.
    pub fn from_vector(v: Vec5) -> Result<Self> {
        let q = quad(&v);
        if q <= 1e-12 {
            return Err(Error::InvalidSpec(format!(
                "sphere vector must be spacelike, got B = {q}"
            )));
        }
        Ok(Sphere { v: v / q.sqrt() })
    }

    pub fn vector(&self) -> &Vec5 {
        &self.v
    }

    /// The sphere with the same carrier and the other ball selected.
    pub fn complement(&self) -> Sphere {
        Sphere { v: -self.v }
    }

    /// Signed evaluation `B(lift(p), v)`: negative on the selected ball,
    /// zero on the carrier.
    pub fn eval(&self, p: &ChartPoint) -> f64 {
        form(&p.lift(), &self.v)
    }

    /// Scale-free evaluation using the unit-sphere lift, so thresholds behave
    /// uniformly across the chart, including at infinity.
    pub fn eval_normalized(&self, p: &ChartPoint) -> f64 {
        let x = p.lift();
        form(&x, &self.v) / x[0]
    }

    pub fn carrier_contains(&self, p: &ChartPoint, tol: &Tolerances) -> bool {
        self.eval_normalized(p).abs() <= tol.chart
    }

    pub fn selected_ball_contains(&self, p: &ChartPoint, tol: &Tolerances) -> bool {
        self.eval_normalized(p) <= tol.chart
    }

    /// `(center, radius)` in the chart when the carrier is a metric sphere.
    pub fn center_radius(&self) -> Option<(Vec3, f64)> {
        // For the inside-oriented vector, v4 - v0 = 1/r > 0; the outside
        // orientation flips the sign.
        let d = self.v[4] - self.v[0];
        if d.abs() < 1e-12 {
            return None;
        }
        let w = if d > 0.0 { self.v } else { -self.v };
        let r = 1.0 / (w[4] - w[0]);
        let c = -Vec3::new(w[1], w[2], w[3]) * r;
        Some((c, r))
    }

    /// `(unit normal, offset)` when the carrier is a chart plane, oriented so
    /// the selected side is `{ p . n < h }`.
    pub fn plane_normal_offset(&self) -> Option<(Vec3, f64)> {
        let d = self.v[4] - self.v[0];
        if d.abs() >= 1e-12 {
            return None;
        }
        Some((Vec3::new(self.v[1], self.v[2], self.v[3]), self.v[0]))
    }

    /// Whether the selected ball contains infinity.
    pub fn selected_ball_has_infinity(&self, tol: &Tolerances) -> bool {
        self.eval_normalized(&ChartPoint::Infinity) <= tol.chart
    }

    /// Image sphere; the selected ball maps to the image of the selected ball.
    pub fn transform(&self, g: &MoebiusElement) -> Sphere {
        // The vector transforms by the inverse transpose action, which for
        // J-orthogonal matrices is the matrix itself.
        Sphere::from_vector(g.apply_vector(&self.v)).expect("images of spacelike vectors are spacelike")
    }
}

/// `|B(v1, v2)|`: below 1 for crossing carriers, 1 at tangency, above 1 for
/// disjoint carriers; invariant under all Moebius transformations.
pub fn inversive_distance(a: &Sphere, b: &Sphere) -> f64 {
    form(&a.v, &b.v).abs()
}

/// Three-way separation decision at tolerance `tol.sep`.
pub fn separation(a: &Sphere, b: &Sphere, tol: &Tolerances) -> Separation {
    let d = inversive_distance(a, b);
    if (d - 1.0).abs() <= tol.sep {
        Separation::Tangent
    } else if d < 1.0 {
        Separation::Intersecting
    } else {
        Separation::Disjoint
    }
}

/// Interior dihedral angle, along the intersection circle, of the complement
/// of the two selected balls. External tangency gives 0, orthogonal crossing
/// pi/2, internal tangency pi. Fails when the carriers do not meet.
pub fn dihedral_angle(a: &Sphere, b: &Sphere, tol: &Tolerances) -> Result<f64> {
    let delta = -form(&a.v, &b.v);
    if delta.abs() > 1.0 + tol.sep {
        return Err(Error::Degenerate(format!(
            "spheres do not intersect: signed inversive distance {delta:.12}"
        )));
    }
    Ok(delta.clamp(-1.0, 1.0).acos())
}
