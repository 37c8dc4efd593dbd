//! Circles of S^3 and arcs of circles.

use super::sphere::Sphere;
use crate::error::{Error, Result};
use crate::lorentz::{
    form, gram_schmidt_spacelike, j_matrix, plane_orthogonal_to_space, ChartPoint, Mat5,
    MoebiusElement, Vec5,
};
use crate::tol::Tolerances;
use serde::{Deserialize, Serialize};

/// A circle of S^3, represented by a B-orthonormal spacelike pair spanning
/// the 2-plane of sphere vectors vanishing on it. The circle itself is the
/// set of null rays B-orthogonal to that plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Circle {
    u: Vec5,
    v: Vec5,
}

/// A B-orthonormal frame of the circle's own 3-space: `f0` timelike with
/// positive first coordinate, `f1`, `f2` spacelike. Circle points are
/// `f0 + cos(t) f1 + sin(t) f2`.
#[derive(Debug, Clone, Copy)]
pub struct CircleFrame {
    pub f0: Vec5,
    pub f1: Vec5,
    pub f2: Vec5,
}

impl Circle {
    /// The intersection circle of two sphere carriers. Fails when the
    /// carriers are tangent, disjoint, or equal.
    pub fn from_spheres(a: &Sphere, b: &Sphere) -> Result<Self> {
        let mut basis = vec![*a.vector(), *b.vector()];
        if !gram_schmidt_spacelike(&mut basis) {
            return Err(Error::Degenerate(
                "sphere carriers do not intersect in a circle".into(),
            ));
        }
        Ok(Circle { u: basis[0], v: basis[1] })
    }

    /// Wraps a spacelike plane given by any two independent spanning vectors.
    pub fn from_plane_pair(p: [Vec5; 2]) -> Result<Self> {
        let mut basis = vec![p[0], p[1]];
        if !gram_schmidt_spacelike(&mut basis) {
            return Err(Error::InvalidSpec(
                "circle plane must be spanned by a spacelike pair".into(),
            ));
        }
        Ok(Circle { u: basis[0], v: basis[1] })
    }

    /// The circle through three distinct points (a chart line closes up into
    /// a circle through infinity, which is the same kind of object here).
    pub fn through_points(p: &ChartPoint, q: &ChartPoint, r: &ChartPoint) -> Result<Self> {
        let lifts = [
            normalized_lift(p),
            normalized_lift(q),
            normalized_lift(r),
        ];
        // The three lifts span a (2,1)-space exactly when the points are
        // distinct; the circle plane is its B-orthogonal complement.
        let mut gram = nalgebra::Matrix3::<f64>::zeros();
        for i in 0..3 {
            for k in 0..3 {
                gram[(i, k)] = form(&lifts[i], &lifts[k]);
            }
        }
        if gram.determinant().abs() < 1e-18 {
            return Err(Error::InvalidSpec(
                "points on a circle must be pairwise distinct".into(),
            ));
        }
        let plane = plane_orthogonal_to_space(&lifts);
        Ok(Circle { u: plane[0], v: plane[1] })
    }

    /// Basis of the plane of sphere vectors through this circle.
    pub fn plane(&self) -> [Vec5; 2] {
        [self.u, self.v]
    }

    pub fn contains(&self, p: &ChartPoint, tol: &Tolerances) -> bool {
        let x = normalized_lift(p);
        form(&x, &self.u).abs() <= tol.chart && form(&x, &self.v).abs() <= tol.chart
    }

    /// Whether the sphere carrier passes through this circle: its vector must
    /// lie in the circle plane.
    pub fn lies_on_sphere(&self, s: &Sphere, tol: &Tolerances) -> bool {
        self.projection_residual(s.vector()) <= tol.chart * 10.0
    }

    /// Relative Euclidean norm of the component of `x` outside the circle
    /// plane. The projection is Euclidean on purpose: pairing coefficients
    /// against B-unit basis vectors go wild for nearly degenerate circles,
    /// whose basis entries are huge, while the span itself stays accurate.
    pub fn projection_residual(&self, x: &Vec5) -> f64 {
        let scale = x.norm();
        if scale < 1e-300 {
            return 0.0;
        }
        let e1 = self.u.normalize();
        let mut e2 = self.v - e1 * self.v.dot(&e1);
        let n = e2.norm();
        if n < 1e-300 {
            return 1.0;
        }
        e2 /= n;
        (x - e1 * x.dot(&e1) - e2 * x.dot(&e2)).norm() / scale
    }

    /// Largest B-pairing between the two circle planes. Zero exactly when
    /// every sphere through one circle crosses every sphere through the other
    /// orthogonally, the conformal notion of orthogonal circles.
    pub fn orthogonality_defect(&self, other: &Circle) -> f64 {
        let mut worst = 0.0f64;
        for a in [&self.u, &self.v] {
            for b in [&other.u, &other.v] {
                worst = worst.max(form(a, b).abs());
            }
        }
        worst
    }

    /// Euclidean `(center, radius, unit normal)` of the circle in the chart;
    /// `None` for a circle through infinity (a chart line).
    pub fn chart_center_radius(&self) -> Option<(crate::lorentz::Vec3, f64, crate::lorentz::Vec3)> {
        let frame = self.frame();
        let mut pts = [crate::lorentz::Vec3::zeros(); 3];
        for (k, p) in pts.iter_mut().enumerate() {
            match self.point_at(&frame, k as f64 * 2.0 * std::f64::consts::FRAC_PI_3) {
                ChartPoint::Finite(q) => *p = q,
                ChartPoint::Infinity => return None,
            }
        }
        let a = pts[1] - pts[0];
        let b = pts[2] - pts[0];
        let n = a.cross(&b);
        let n2 = n.norm_squared();
        if n2 < 1e-20 {
            return None;
        }
        let m = b * a.norm_squared() - a * b.norm_squared();
        let center = pts[0] + m.cross(&n) / (2.0 * n2);
        let radius = (pts[0] - center).norm();
        if !radius.is_finite() {
            return None;
        }
        Some((center, radius, n / n2.sqrt()))
    }

    /// Distance between this plane and another, as subspaces: the largest
    /// residual of either basis against the other plane.
    pub fn plane_distance(&self, other: &Circle) -> f64 {
        other
            .projection_residual(&self.u)
            .max(other.projection_residual(&self.v))
            .max(self.projection_residual(&other.u))
            .max(self.projection_residual(&other.v))
    }

    /// The unit in-carrier representative of this circle inside the carrier
    /// `s`: the vector of the circle plane B-orthogonal to the carrier's.
    /// Its sign is not canonical; callers orient it against a witness point.
    pub fn in_carrier_vector(&self, s: &Sphere, tol: &Tolerances) -> Result<Vec5> {
        if !self.lies_on_sphere(s, tol) {
            return Err(Error::InvalidSpec(
                "carrier sphere does not pass through the circle".into(),
            ));
        }
        let alpha = form(s.vector(), &self.u);
        let beta = form(s.vector(), &self.v);
        let t = self.u * -beta + self.v * alpha;
        let n = form(&t, &t).sqrt();
        if n < 1e-12 {
            return Err(Error::Degenerate("degenerate in-carrier vector".into()));
        }
        Ok(t / n)
    }

    /// Deterministic B-orthonormal frame of the circle's 3-space.
    pub fn frame(&self) -> CircleFrame {
        // Null space of the matrix with rows J u, J v (padded with zeros):
        // the Euclidean-orthonormal basis of the complement.
        let mut rows = Mat5::zeros();
        for i in 0..5 {
            rows[(0, i)] = if i == 0 { -self.u[0] } else { self.u[i] };
            rows[(1, i)] = if i == 0 { -self.v[0] } else { self.v[i] };
        }
        let w = crate::lorentz::nullspace(&rows, 1e-9);
        assert_eq!(w.len(), 3, "circle complement must be 3-dimensional");
        // Diagonalize B restricted to the complement: one negative direction
        // (the frame's timelike axis) and two positive ones.
        let mut gram = nalgebra::Matrix3::<f64>::zeros();
        for i in 0..3 {
            for k in 0..3 {
                gram[(i, k)] = form(&w[i], &w[k]);
            }
        }
        let se = nalgebra::SymmetricEigen::new(gram);
        let mut f0 = None;
        let mut spacelike = Vec::new();
        for i in 0..3 {
            let mut g = Vec5::zeros();
            for k in 0..3 {
                g += w[k] * se.eigenvectors[(k, i)];
            }
            let e = se.eigenvalues[i];
            if e < 0.0 {
                let mut t = g / (-e).sqrt();
                if t[0] < 0.0 {
                    t = -t;
                }
                f0 = Some(t);
            } else {
                spacelike.push(g / e.sqrt());
            }
        }
        let f0 = f0.expect("circle 3-space has signature (2,1)");
        assert_eq!(spacelike.len(), 2);
        CircleFrame {
            f0,
            f1: spacelike[0],
            f2: spacelike[1],
        }
    }

    /// Point at angle `t` in the given frame.
    pub fn point_at(&self, frame: &CircleFrame, t: f64) -> ChartPoint {
        let x = frame.f0 + frame.f1 * t.cos() + frame.f2 * t.sin();
        ChartPoint::from_null(&x).expect("frame combinations are future null")
    }

    /// Angle of a point of the circle in the given frame.
    pub fn angle_of(&self, frame: &CircleFrame, p: &ChartPoint) -> f64 {
        let x = p.lift();
        let scale = -form(&x, &frame.f0);
        let c = form(&x, &frame.f1) / scale;
        let s = form(&x, &frame.f2) / scale;
        s.atan2(c)
    }

    /// Image circle under a Moebius transformation.
    pub fn transform(&self, g: &MoebiusElement) -> Circle {
        Circle::from_plane_pair([g.apply_vector(&self.u), g.apply_vector(&self.v)])
            .expect("images of spacelike planes are spacelike")
    }

    /// The rotation by `angle` fixing this circle pointwise: it turns the
    /// circle's B-orthogonal plane `{u, v}` and leaves the circle's own
    /// 3-space untouched. These maps form the stabilizer SO(2) used to align
    /// carriers that already agree on a common circle.
    pub fn rotation_about(&self, angle: f64, tol: &Tolerances) -> Result<MoebiusElement> {
        let j = j_matrix();
        let ju = (j * self.u).transpose();
        let jv = (j * self.v).transpose();
        let m = Mat5::identity()
            + angle.sin() * (self.v * ju - self.u * jv)
            + (angle.cos() - 1.0) * (self.u * ju + self.v * jv);
        MoebiusElement::from_matrix(m, tol)
    }

    /// The point maximizing the chart coordinates in lexicographic priority
    /// `(z, x, y)`. A circle through infinity has unbounded z or x, and
    /// infinity itself is the maximizer.
    pub fn lex_max_point(&self, tol: &Tolerances) -> ChartPoint {
        if self.contains(&ChartPoint::Infinity, tol) {
            return ChartPoint::Infinity;
        }
        let frame = self.frame();
        // Chart coordinate i along the circle is a ratio
        // (A + B cos t + C sin t) / (D + E cos t + F sin t).
        let coeffs = |i: usize| -> (f64, f64, f64, f64, f64, f64) {
            (
                frame.f0[i + 1],
                frame.f1[i + 1],
                frame.f2[i + 1],
                frame.f0[0] - frame.f0[4],
                frame.f1[0] - frame.f1[4],
                frame.f2[0] - frame.f2[4],
            )
        };
        let coord = |i: usize, t: f64| -> f64 {
            let (a, b, c, d, e, f) = coeffs(i);
            (a + b * t.cos() + c * t.sin()) / (d + e * t.cos() + f * t.sin())
        };
        // Critical angles of coordinate i solve
        // (AE - BD) sin t + (CD - AF) cos t + (CE - BF) = 0.
        let critical = |i: usize| -> Option<Vec<f64>> {
            let (a, b, c, d, e, f) = coeffs(i);
            let alpha = a * e - b * d;
            let beta = c * d - a * f;
            let gamma = c * e - b * f;
            let r = alpha.hypot(beta);
            let scale = [a, b, c, d, e, f].iter().fold(0.0f64, |m, x| m.max(x.abs()));
            if r <= 1e-12 * scale * scale {
                return None; // coordinate is constant along the circle
            }
            let phi = beta.atan2(alpha);
            let ratio = (-gamma / r).clamp(-1.0, 1.0);
            let base = ratio.asin();
            Some(vec![base - phi, std::f64::consts::PI - base - phi])
        };
        // Lexicographic filtering over the priority order z, x, y. The first
        // varying coordinate seeds the candidates with its critical angles
        // and each coordinate in turn keeps only its maximizers.
        let mut candidates: Option<Vec<f64>> = None;
        for &i in &[2usize, 0, 1] {
            if candidates.is_none() {
                candidates = critical(i);
            }
            if let Some(list) = &mut candidates {
                let best = list
                    .iter()
                    .map(|&t| coord(i, t))
                    .fold(f64::NEG_INFINITY, f64::max);
                list.retain(|&t| coord(i, t) >= best - 1e-9);
                if list.len() == 1 {
                    break;
                }
            }
        }
        let list = candidates.expect("some chart coordinate varies along a circle");
        self.point_at(&frame, list[0])
    }
}

/// Lift scaled to first coordinate 1, finite for every chart point.
pub(crate) fn normalized_lift(p: &ChartPoint) -> Vec5 {
    let x = p.lift();
    x / x[0]
}

/// An arc of a circle: two endpoints plus an interior witness selecting which
/// of the two complementary arcs is meant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CircleArc {
    circle: Circle,
    a: ChartPoint,
    b: ChartPoint,
    witness: ChartPoint,
}

impl CircleArc {
    pub fn new(
        circle: Circle,
        a: ChartPoint,
        b: ChartPoint,
        witness: ChartPoint,
        tol: &Tolerances,
    ) -> Result<Self> {
        for (name, p) in [("endpoint a", &a), ("endpoint b", &b), ("witness", &witness)] {
            if !circle.contains(p, tol) {
                return Err(Error::InvalidSpec(format!("{name} is not on the circle")));
            }
        }
        if a.spherical_distance(&b) <= tol.chart
            || a.spherical_distance(&witness) <= tol.chart
            || b.spherical_distance(&witness) <= tol.chart
        {
            return Err(Error::InvalidSpec(
                "arc endpoints and witness must be pairwise distinct".into(),
            ));
        }
        Ok(CircleArc { circle, a, b, witness })
    }

    /// The arc through three points in order: from `a` through `m` to `b`.
    pub fn through(a: ChartPoint, m: ChartPoint, b: ChartPoint, tol: &Tolerances) -> Result<Self> {
        let circle = Circle::through_points(&a, &m, &b)?;
        CircleArc::new(circle, a, b, m, tol)
    }

    pub fn circle(&self) -> &Circle {
        &self.circle
    }

    pub fn start(&self) -> ChartPoint {
        self.a
    }

    pub fn end(&self) -> ChartPoint {
        self.b
    }

    pub fn witness(&self) -> ChartPoint {
        self.witness
    }

    /// Signed angular sweep from start to end, passing the witness:
    /// positive when the witness sits on the counterclockwise side in the
    /// circle's own frame. The magnitude is in `(0, 2 pi)`.
    pub fn sweep(&self, frame: &CircleFrame) -> (f64, f64) {
        let ta = self.circle.angle_of(frame, &self.a);
        let tb = self.circle.angle_of(frame, &self.b);
        let tw = self.circle.angle_of(frame, &self.witness);
        let tau = std::f64::consts::TAU;
        let db = (tb - ta).rem_euclid(tau);
        let dw = (tw - ta).rem_euclid(tau);
        let sweep = if dw < db { db } else { db - tau };
        (ta, sweep)
    }

    /// Point at fraction `s` in `[0, 1]` along the arc; the endpoints are
    /// returned exactly.
    pub fn point_at_fraction(&self, frame: &CircleFrame, s: f64) -> ChartPoint {
        if s <= 0.0 {
            return self.a;
        }
        if s >= 1.0 {
            return self.b;
        }
        let (ta, sweep) = self.sweep(frame);
        self.circle.point_at(frame, ta + s * sweep)
    }

    /// `n + 1` samples from start to end inclusive.
    pub fn sample(&self, n: usize) -> Vec<ChartPoint> {
        let frame = self.circle.frame();
        (0..=n)
            .map(|k| self.point_at_fraction(&frame, k as f64 / n as f64))
            .collect()
    }

    pub fn transform(&self, g: &MoebiusElement, tol: &Tolerances) -> Result<CircleArc> {
        CircleArc::new(
            self.circle.transform(g),
            g.apply_boundary(self.a),
            g.apply_boundary(self.b),
            g.apply_boundary(self.witness),
            tol,
        )
    }

    /// The arc traversed backwards.
    pub fn reversed(&self) -> CircleArc {
        CircleArc {
            circle: self.circle,
            a: self.b,
            b: self.a,
            witness: self.witness,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conformal::sphere::Side;
    use crate::lorentz::Vec3;
    use approx::assert_abs_diff_eq;

    fn tols() -> Tolerances {
        Tolerances::default()
    }

    #[test]
    fn intersection_of_two_unit_spheres() {
        // Unit spheres centered at 0 and (1,0,0) meet in the circle
        // x = 1/2, y^2 + z^2 = 3/4.
        let s1 = Sphere::from_center_radius(Vec3::zeros(), 1.0, Side::Inside).unwrap();
        let s2 = Sphere::from_center_radius(Vec3::new(1.0, 0.0, 0.0), 1.0, Side::Inside).unwrap();
        let c = Circle::from_spheres(&s1, &s2).unwrap();
        let r = (3.0f64).sqrt() / 2.0;
        assert!(c.contains(&ChartPoint::finite(0.5, r, 0.0), &tols()));
        assert!(c.contains(&ChartPoint::finite(0.5, 0.0, -r), &tols()));
        assert!(!c.contains(&ChartPoint::finite(0.5, r, 0.1), &tols()));
        assert!(c.lies_on_sphere(&s1, &tols()));
        assert!(c.lies_on_sphere(&s2, &tols()));
        let other = Sphere::from_center_radius(Vec3::new(0.0, 1.0, 0.0), 1.0, Side::Inside).unwrap();
        assert!(!c.lies_on_sphere(&other, &tols()));
    }

    #[test]
    fn frame_parameterizes_the_circle() {
        let s1 = Sphere::from_center_radius(Vec3::new(0.3, -0.2, 0.5), 1.1, Side::Inside).unwrap();
        let s2 = Sphere::from_center_radius(Vec3::new(0.9, 0.4, 0.1), 0.9, Side::Inside).unwrap();
        let c = Circle::from_spheres(&s1, &s2).unwrap();
        let frame = c.frame();
        for k in 0..12 {
            let t = k as f64 * 0.5;
            let p = c.point_at(&frame, t);
            assert!(c.contains(&p, &tols()));
            let back = c.angle_of(&frame, &p);
            let diff = (back - t + std::f64::consts::PI).rem_euclid(std::f64::consts::TAU)
                - std::f64::consts::PI;
            assert_abs_diff_eq!(diff, 0.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn through_points_handles_lines_and_infinity() {
        // Collinear points give the chart line, a circle through infinity.
        let c = Circle::through_points(
            &ChartPoint::finite(0.0, 0.0, 0.0),
            &ChartPoint::finite(1.0, 1.0, 0.0),
            &ChartPoint::finite(2.0, 2.0, 0.0),
        )
        .unwrap();
        assert!(c.contains(&ChartPoint::Infinity, &tols()));
        assert!(c.contains(&ChartPoint::finite(-3.5, -3.5, 0.0), &tols()));
        assert!(!c.contains(&ChartPoint::finite(1.0, 0.0, 0.0), &tols()));

        // And infinity can be one of the three input points.
        let c2 = Circle::through_points(
            &ChartPoint::finite(1.0, 2.0, 3.0),
            &ChartPoint::finite(1.0, 2.0, -1.0),
            &ChartPoint::Infinity,
        )
        .unwrap();
        assert!(c2.contains(&ChartPoint::finite(1.0, 2.0, 100.0), &tols()));

        assert!(Circle::through_points(
            &ChartPoint::finite(1.0, 0.0, 0.0),
            &ChartPoint::finite(1.0, 0.0, 0.0),
            &ChartPoint::finite(0.0, 1.0, 0.0),
        )
        .is_err());
    }

    #[test]
    fn circle_through_three_generic_points_passes_through_them() {
        let p = ChartPoint::finite(1.0, 0.0, 0.0);
        let q = ChartPoint::finite(0.0, 2.0, 0.5);
        let r = ChartPoint::finite(-1.0, 1.0, -1.0);
        let c = Circle::through_points(&p, &q, &r).unwrap();
        for x in [p, q, r] {
            assert!(c.contains(&x, &tols()));
        }
    }

    #[test]
    fn transform_moves_circles_functorially() {
        let c = Circle::through_points(
            &ChartPoint::finite(1.0, 0.0, 0.0),
            &ChartPoint::finite(0.0, 1.0, 0.0),
            &ChartPoint::finite(-1.0, 0.0, 0.0),
        )
        .unwrap();
        let g = MoebiusElement::boost(
            1.8,
            ChartPoint::finite(0.3, 0.1, 2.0),
            ChartPoint::finite(-0.4, 1.0, -0.5),
        )
        .unwrap();
        let img = c.transform(&g);
        let frame = c.frame();
        for k in 0..8 {
            let p = c.point_at(&frame, k as f64);
            assert!(img.contains(&g.apply_boundary(p), &tols()));
        }
    }

    #[test]
    fn in_carrier_vector_splits_the_carrier() {
        // On the unit sphere around the origin, the equator z = 0 has an
        // in-carrier vector separating the two hemispheres.
        let carrier = Sphere::from_center_radius(Vec3::zeros(), 1.0, Side::Inside).unwrap();
        let plane = Sphere::from_plane(Vec3::z(), 0.0, Side::Inside).unwrap();
        let equator = Circle::from_spheres(&carrier, &plane).unwrap();
        let t = equator.in_carrier_vector(&carrier, &tols()).unwrap();
        let north = normalized_lift(&ChartPoint::finite(0.0, 0.0, 1.0));
        let south = normalized_lift(&ChartPoint::finite(0.0, 0.0, -1.0));
        let n = form(&north, &t);
        let s = form(&south, &t);
        assert!(n * s < 0.0, "hemispheres must take opposite signs");
        assert_abs_diff_eq!(form(&t, &t), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn lex_max_prefers_z_then_x_then_y() {
        // Circle x = 1/2, y^2 + z^2 = 3/4: top point (1/2, 0, sqrt(3)/2).
        let s1 = Sphere::from_center_radius(Vec3::zeros(), 1.0, Side::Inside).unwrap();
        let s2 = Sphere::from_center_radius(Vec3::new(1.0, 0.0, 0.0), 1.0, Side::Inside).unwrap();
        let c = Circle::from_spheres(&s1, &s2).unwrap();
        let top = c.lex_max_point(&tols());
        let expected = ChartPoint::finite(0.5, 0.0, (3.0f64).sqrt() / 2.0);
        assert!(top.spherical_distance(&expected) < 1e-9);

        // A circle in the plane z = 0 has constant z; the rule falls through
        // to x: unit circle's lex-max is (1, 0, 0).
        let flat = Circle::through_points(
            &ChartPoint::finite(1.0, 0.0, 0.0),
            &ChartPoint::finite(0.0, 1.0, 0.0),
            &ChartPoint::finite(-1.0, 0.0, 0.0),
        )
        .unwrap();
        let m = flat.lex_max_point(&tols());
        assert!(m.spherical_distance(&ChartPoint::finite(1.0, 0.0, 0.0)) < 1e-9);

        // A line has unbounded coordinates: infinity wins.
        let line = Circle::through_points(
            &ChartPoint::finite(0.0, 0.0, 0.0),
            &ChartPoint::finite(0.0, 0.0, 1.0),
            &ChartPoint::finite(0.0, 0.0, 2.0),
        )
        .unwrap();
        assert!(line.lex_max_point(&tols()).is_infinity());
    }

    #[test]
    fn arcs_select_sides_with_witnesses() {
        let a = ChartPoint::finite(1.0, 0.0, 0.0);
        let b = ChartPoint::finite(-1.0, 0.0, 0.0);
        let up = ChartPoint::finite(0.0, 1.0, 0.0);
        let down = ChartPoint::finite(0.0, -1.0, 0.0);
        let upper = CircleArc::through(a, up, b, &tols()).unwrap();
        let lower = CircleArc::through(a, down, b, &tols()).unwrap();
        let frame = upper.circle().frame();
        let (_, sweep_u) = upper.sweep(&frame);
        let (_, sweep_l) = lower.sweep(&frame);
        assert_abs_diff_eq!(sweep_u.abs(), std::f64::consts::PI, epsilon = 1e-9);
        assert_abs_diff_eq!(sweep_l.abs(), std::f64::consts::PI, epsilon = 1e-9);
        assert!(sweep_u * sweep_l < 0.0, "opposite sides have opposite sweeps");

        let mid_u = upper.point_at_fraction(&frame, 0.5);
        assert!(mid_u.spherical_distance(&up) < 1e-9);
        // Samples stay on the circle and interpolate the endpoints exactly.
        let pts = upper.sample(8);
        assert_eq!(pts.len(), 9);
        assert!(pts[0].spherical_distance(&a) < 1e-15);
        assert!(pts[8].spherical_distance(&b) < 1e-15);
        for p in &pts {
            assert!(upper.circle().contains(p, &tols()));
        }
    }

    #[test]
    fn arc_through_infinity_works() {
        // The z-axis arc from (0,0,1) to (0,0,-1) through infinity.
        let arc = CircleArc::through(
            ChartPoint::finite(0.0, 0.0, 1.0),
            ChartPoint::Infinity,
            ChartPoint::finite(0.0, 0.0, -1.0),
            &tols(),
        )
        .unwrap();
        let frame = arc.circle().frame();
        let mid = arc.point_at_fraction(&frame, 0.5);
        // The midpoint is far out along the axis or exactly infinity, in
        // particular far from the segment between the endpoints.
        match mid {
            ChartPoint::Infinity => {}
            ChartPoint::Finite(p) => assert!(p.norm() > 1.0),
        }
    }

    #[test]
    fn rotation_about_fixes_the_circle_pointwise() {
        let t = tols();
        let c = Circle::through_points(
            &ChartPoint::finite(0.9, 0.1, -0.2),
            &ChartPoint::finite(-0.3, 1.2, 0.5),
            &ChartPoint::finite(0.2, -0.7, 1.1),
        )
        .unwrap();
        let g = c.rotation_about(0.9, &t).unwrap();
        let frame = c.frame();
        for k in 0..8 {
            let p = c.point_at(&frame, k as f64 * std::f64::consts::TAU / 8.0);
            assert!(g.apply_boundary(p).spherical_distance(&p) < 1e-12);
        }
        // A point off the circle moves.
        let off = ChartPoint::finite(0.0, 0.0, 0.0);
        assert!(g.apply_boundary(off).spherical_distance(&off) > 1e-3);

        // Angles add, and the full turn is the identity.
        let sum = c
            .rotation_about(0.4, &t)
            .unwrap()
            .compose(&c.rotation_about(0.5, &t).unwrap());
        assert!(sum.matrix_distance(&g) < 1e-12);
        let full = c.rotation_about(std::f64::consts::TAU, &t).unwrap();
        assert!(full.distance_from_identity() < 1e-12);
    }

    #[test]
    fn half_turn_about_a_circle_is_the_double_inversion() {
        let t = tols();
        let c = Circle::through_points(
            &ChartPoint::finite(1.0, 0.0, 0.3),
            &ChartPoint::finite(0.0, 1.0, 0.3),
            &ChartPoint::finite(-1.0, 0.0, 0.3),
        )
        .unwrap();
        let [u, v] = c.plane();
        let half = c.rotation_about(std::f64::consts::PI, &t).unwrap();
        let double_inversion = MoebiusElement::inversion_pair(&u, &v).unwrap();
        assert!(half.matrix_distance(&double_inversion) < 1e-12);
    }

    #[test]
    fn rotation_about_transforms_equivariantly() {
        let t = tols();
        let c = Circle::through_points(
            &ChartPoint::finite(0.5, 0.0, 0.0),
            &ChartPoint::finite(0.0, 0.5, 0.1),
            &ChartPoint::finite(-0.5, 0.0, 0.2),
        )
        .unwrap();
        let h = MoebiusElement::translation(Vec3::new(0.3, -1.0, 0.2)).compose(
            &MoebiusElement::boost(
                2.0,
                ChartPoint::finite(0.1, 0.0, 0.9),
                ChartPoint::finite(-0.4, 0.3, -0.2),
            )
            .unwrap(),
        );
        let moved = c.transform(&h);
        let direct = moved.rotation_about(0.7, &t).unwrap();
        let conjugated = c.rotation_about(0.7, &t).unwrap().conjugate_by(&h);
        assert!(direct.matrix_distance(&conjugated) < 1e-9);
    }
}
