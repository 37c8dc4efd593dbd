//! The Lorentz model of Moebius geometry on S^3.
//!
//! R^{4,1} carries the quadratic form `B(x) = -x0^2 + x1^2 + x2^2 + x3^2 + x4^2`.
//! Orientation-preserving Moebius transformations of S^3 are the matrices of
//! SO+(4,1): J-orthogonal with determinant +1 that preserve the future light
//! cone, where `J = diag(-1, 1, 1, 1, 1)`. The boundary sphere is the
//! projectivized light cone, charted as R^3 together with a point at infinity
//! through the lift `psi(p) = ((1+|p|^2)/2, p, (|p|^2-1)/2)`; infinity lifts to
//! the ray of `(1, 0, 0, 0, 1)`. Hyperbolic 4-space is the sheet `B(x) = -1`,
//! `x0 > 0`.

mod classify;
mod centralizer;

pub use classify::{classify, Classification, ElementKind};
pub use centralizer::{centralizer_generators, commutation_residual, exp_so41, so41_basis};

use crate::error::{Error, Result};
use crate::tol::Tolerances;
use serde::{Deserialize, Serialize};

pub type Vec3 = nalgebra::Vector3<f64>;
pub type Vec5 = nalgebra::Vector5<f64>;
pub type Mat5 = nalgebra::Matrix5<f64>;

/// The Gram matrix of the form, `diag(-1, 1, 1, 1, 1)`.
pub fn j_matrix() -> Mat5 {
    Mat5::from_diagonal(&Vec5::new(-1.0, 1.0, 1.0, 1.0, 1.0))
}

/// Bilinear form `B(u, v) = -u0 v0 + u1 v1 + u2 v2 + u3 v3 + u4 v4`.
#[inline]
pub fn form(u: &Vec5, v: &Vec5) -> f64 {
    -u[0] * v[0] + u[1] * v[1] + u[2] * v[2] + u[3] * v[3] + u[4] * v[4]
}

/// Quadratic form `B(x, x)`.
#[inline]
pub fn quad(x: &Vec5) -> f64 {
    form(x, x)
}

pub(crate) fn max_abs(m: &Mat5) -> f64 {
    m.iter().fold(0.0f64, |a, x| a.max(x.abs()))
}

/// A point of the boundary sphere S^3 in the affine chart R^3 plus infinity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ChartPoint {
    Finite(Vec3),
    Infinity,
}

impl ChartPoint {
    pub fn finite(x: f64, y: f64, z: f64) -> Self {
        ChartPoint::Finite(Vec3::new(x, y, z))
    }

    pub const ORIGIN: ChartPoint = ChartPoint::Finite(Vec3::new(0.0, 0.0, 0.0));

    pub fn is_infinity(&self) -> bool {
        matches!(self, ChartPoint::Infinity)
    }

    /// The null lift. Finite points map to `((1+|p|^2)/2, p, (|p|^2-1)/2)`;
    /// infinity maps to `(1, 0, 0, 0, 1)`.
    pub fn lift(&self) -> Vec5 {
        match self {
            ChartPoint::Finite(p) => {
                let n = p.norm_squared();
                Vec5::new((1.0 + n) / 2.0, p.x, p.y, p.z, (n - 1.0) / 2.0)
            }
            ChartPoint::Infinity => Vec5::new(1.0, 0.0, 0.0, 0.0, 1.0),
        }
    }

    /// The representative on the unit sphere `x0 = 1`, i.e. the point of
    /// S^3 in R^4 under inverse stereographic projection.
    pub fn unit_sphere(&self) -> nalgebra::Vector4<f64> {
        match self {
            ChartPoint::Finite(p) => {
                let n = p.norm_squared();
                nalgebra::Vector4::new(2.0 * p.x, 2.0 * p.y, 2.0 * p.z, n - 1.0) / (n + 1.0)
            }
            ChartPoint::Infinity => nalgebra::Vector4::new(0.0, 0.0, 0.0, 1.0),
        }
    }

    /// Chordal distance between the round-sphere representatives. This is the
    /// metric behind every chart-point tolerance: it is finite and symmetric
    /// even when one of the points is infinity.
    pub fn spherical_distance(&self, other: &ChartPoint) -> f64 {
        (self.unit_sphere() - other.unit_sphere()).norm()
    }

    /// Recover a chart point from a future null vector (any positive scale).
    pub fn from_null(x: &Vec5) -> Result<Self> {
        if x[0] <= 0.0 {
            return Err(Error::InvalidPoint(format!(
                "null vector not in the future cone: x0 = {}",
                x[0]
            )));
        }
        let denom = x[0] - x[4];
        // In chart terms denom/x0 = 2/(1+|p|^2), so a relative threshold of
        // 1e-13 corresponds to |p| beyond ~3e6, far outside any chart data
        // this crate produces for finite points.
        if denom <= 1e-13 * x[0] {
            Ok(ChartPoint::Infinity)
        } else {
            Ok(ChartPoint::Finite(Vec3::new(x[1], x[2], x[3]) / denom))
        }
    }
}

/// A point of H^4: `B(x, x) = -1`, `x0 > 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct H4Point(Vec5);

impl H4Point {
    /// The center `(1, 0, 0, 0, 0)`.
    pub fn base() -> Self {
        H4Point(Vec5::new(1.0, 0.0, 0.0, 0.0, 0.0))
    }

    /// Normalizes a timelike future vector onto the sheet `B = -1`.
    pub fn from_timelike(x: &Vec5) -> Result<Self> {
        let q = quad(x);
        if q >= 0.0 || x[0] <= 0.0 {
            return Err(Error::InvalidPoint(format!(
                "not a future timelike vector: B = {q}, x0 = {}",
                x[0]
            )));
        }
        Ok(H4Point(x / (-q).sqrt()))
    }

    /// The point with spatial part `y`, i.e. `(sqrt(1+|y|^2), y)`.
    pub fn from_spatial(y: &nalgebra::Vector4<f64>) -> Self {
        H4Point(Vec5::new(
            (1.0 + y.norm_squared()).sqrt(),
            y[0],
            y[1],
            y[2],
            y[3],
        ))
    }

    pub fn vector(&self) -> &Vec5 {
        &self.0
    }

    /// Hyperbolic distance `arccosh(-B(x, y))`.
    pub fn distance(&self, other: &H4Point) -> f64 {
        (-form(&self.0, &other.0)).max(1.0).acosh()
    }

    /// Geodesic exponential: walk distance `|v|` from this point in the
    /// direction of the tangent vector `v` (which must satisfy `B(x, v) = 0`).
    pub fn exp(&self, v: &Vec5) -> H4Point {
        let n = form(v, v).max(0.0).sqrt();
        if n < 1e-300 {
            return *self;
        }
        H4Point::from_timelike(&(self.0 * n.cosh() + v * (n.sinh() / n)))
            .expect("geodesic stays on the sheet")
    }
}

/// An element of SO+(4,1) acting on S^3 = boundary of H^4.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MoebiusElement {
    m: Mat5,
}

impl MoebiusElement {
    pub fn identity() -> Self {
        MoebiusElement { m: Mat5::identity() }
    }

    /// Wraps a matrix after checking J-orthogonality, `det = +1`, and
    /// preservation of the future cone.
    pub fn from_matrix(m: Mat5, tol: &Tolerances) -> Result<Self> {
        let j = j_matrix();
        let residual = max_abs(&(m.transpose() * j * m - j));
        // Same norm-relative scaling as `renormalized`: honest rounding in a
        // product grows the form residual like eps * |m|^2.
        let scale = {
            let n = max_abs(&m);
            (n * n).max(1.0)
        };
        if residual > tol.form.max(1e-12) * 100.0 * scale {
            return Err(Error::InvalidElement(format!(
                "form residual {residual:.3e} exceeds tolerance"
            )));
        }
        let det = m.determinant();
        if det < 0.0 {
            return Err(Error::InvalidElement(format!(
                "determinant {det:.6} is negative (orientation-reversing)"
            )));
        }
        if m[(0, 0)] <= 0.0 {
            return Err(Error::InvalidElement(
                "matrix swaps the two cone components".into(),
            ));
        }
        Ok(MoebiusElement { m }.renormalized())
    }

    /// Wraps a matrix that is trusted to already lie in SO+(4,1).
    pub(crate) fn from_matrix_unchecked(m: Mat5) -> Self {
        MoebiusElement { m }
    }

    pub fn matrix(&self) -> &Mat5 {
        &self.m
    }

    /// Translation `p -> p + t` of the chart.
    pub fn translation(t: Vec3) -> Self {
        let n = t.norm_squared();
        let mut m = Mat5::identity();
        m[(0, 0)] = 1.0 + n / 2.0;
        m[(0, 4)] = -n / 2.0;
        m[(4, 0)] = n / 2.0;
        m[(4, 4)] = 1.0 - n / 2.0;
        for i in 0..3 {
            m[(0, 1 + i)] = t[i];
            m[(4, 1 + i)] = t[i];
            m[(1 + i, 0)] = t[i];
            m[(1 + i, 4)] = -t[i];
        }
        MoebiusElement { m }
    }

    /// Scaling `p -> lambda p` of the chart, `lambda > 0`: the boost of
    /// rapidity `ln lambda` in the `(x0, x4)`-plane.
    pub fn scaling(lambda: f64) -> Result<Self> {
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(Error::InvalidSpec(format!(
                "scaling factor must be positive and finite, got {lambda}"
            )));
        }
        let c = (lambda + 1.0 / lambda) / 2.0;
        let s = (lambda - 1.0 / lambda) / 2.0;
        let mut m = Mat5::identity();
        m[(0, 0)] = c;
        m[(0, 4)] = s;
        m[(4, 0)] = s;
        m[(4, 4)] = c;
        Ok(MoebiusElement { m })
    }

    /// Rotation of the chart about the axis through the origin in direction
    /// `axis`, by `angle`. Fixes the axis line together with infinity.
    pub fn rotation(axis: Vec3, angle: f64) -> Result<Self> {
        let n = axis.norm();
        if n < 1e-14 {
            return Err(Error::InvalidSpec("rotation axis must be nonzero".into()));
        }
        let r = nalgebra::Rotation3::from_axis_angle(
            &nalgebra::Unit::new_normalize(axis),
            angle,
        );
        let mut m = Mat5::identity();
        for i in 0..3 {
            for k in 0..3 {
                m[(1 + i, 1 + k)] = r[(i, k)];
            }
        }
        Ok(MoebiusElement { m })
    }

    /// Loxodromic boost with repelling fixed point `p`, attracting fixed
    /// point `q`, and dilation `lambda > 1` (eigenvalues `1/lambda` on the
    /// lift of `p` and `lambda` on the lift of `q`).
    pub fn boost(lambda: f64, p: ChartPoint, q: ChartPoint) -> Result<Self> {
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(Error::InvalidSpec(format!(
                "boost dilation must be positive and finite, got {lambda}"
            )));
        }
        let u = p.lift();
        let v = q.lift();
        let s = form(&u, &v);
        if s.abs() < 1e-14 {
            return Err(Error::InvalidSpec(
                "boost fixed points must be distinct".into(),
            ));
        }
        let j = j_matrix();
        let jv = j * v;
        let ju = j * u;
        let m = Mat5::identity()
            + (1.0 / lambda - 1.0) / s * u * jv.transpose()
            + (lambda - 1.0) / s * v * ju.transpose();
        Ok(MoebiusElement { m })
    }

    /// Composition of two sphere inversions, given by unit spacelike vectors.
    /// Each single inversion reverses orientation; the pair lies in SO+(4,1).
    pub fn inversion_pair(s1: &Vec5, s2: &Vec5) -> Result<Self> {
        for s in [s1, s2] {
            let q = quad(s);
            if (q - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidSpec(format!(
                    "inversion vector must be unit spacelike, got B = {q}"
                )));
            }
        }
        let j = j_matrix();
        let r1 = Mat5::identity() - 2.0 * s1 * (j * s1).transpose();
        let r2 = Mat5::identity() - 2.0 * s2 * (j * s2).transpose();
        Ok(MoebiusElement { m: r2 * r1 }.renormalized())
    }

    /// `self` after `other`: `(self.compose(&other)).apply(x) = self(other(x))`.
    pub fn compose(&self, other: &MoebiusElement) -> MoebiusElement {
        MoebiusElement { m: self.m * other.m }.renormalized()
    }

    /// Exact inverse `J M^T J`.
    pub fn inverse(&self) -> MoebiusElement {
        let j = j_matrix();
        MoebiusElement { m: j * self.m.transpose() * j }
    }

    /// `h self h^{-1}`.
    pub fn conjugate_by(&self, h: &MoebiusElement) -> MoebiusElement {
        h.compose(self).compose(&h.inverse())
    }

    /// Max-entry residual of `M^T J M - J`.
    pub fn form_residual(&self) -> f64 {
        let j = j_matrix();
        max_abs(&(self.m.transpose() * j * self.m - j))
    }

    /// Pulls the matrix back onto the J-orthogonal group by the Newton step
    /// `X <- (X + J X^{-T} J) / 2`, applied only when drift is detectable.
    /// The iteration converges quadratically to the nearest J-orthogonal
    /// matrix, so one or two steps suffice for drift of composition origin.
    ///
    /// The drift threshold scales with the squared matrix norm: the form
    /// residual of an honestly rounded product grows like `eps * |X|^2`, and
    /// projecting at a fixed absolute threshold would inject norm-scaled
    /// noise into every composition of large elements.
    pub fn renormalized(&self) -> MoebiusElement {
        let mut x = self.m;
        let j = j_matrix();
        let scale = {
            let n = max_abs(&x);
            (n * n).max(1.0)
        };
        for _ in 0..3 {
            let residual = max_abs(&(x.transpose() * j * x - j));
            if residual <= 1e-11 * scale {
                break;
            }
            let inv_t = x
                .transpose()
                .try_inverse()
                .expect("near-J-orthogonal matrix is invertible");
            x = (x + j * inv_t * j) * 0.5;
        }
        MoebiusElement { m: x }
    }

    /// Action on the boundary chart.
    pub fn apply_boundary(&self, p: ChartPoint) -> ChartPoint {
        ChartPoint::from_null(&(self.m * p.lift()))
            .expect("group elements preserve the future cone")
    }

    /// Action on a raw vector of R^{4,1}.
    pub fn apply_vector(&self, x: &Vec5) -> Vec5 {
        self.m * x
    }

    /// Action on H^4, with the image renormalized onto the sheet.
    pub fn apply_h4(&self, x: &H4Point) -> H4Point {
        H4Point::from_timelike(&(self.m * x.0)).expect("group elements preserve the sheet")
    }

    /// `max |M - I|`, used for cheap identity checks.
    pub fn distance_from_identity(&self) -> f64 {
        max_abs(&(self.m - Mat5::identity()))
    }

    /// Max-entry difference of the two matrices.
    pub fn matrix_distance(&self, other: &MoebiusElement) -> f64 {
        max_abs(&(self.m - other.m))
    }
}

/// B-orthonormalizes `vectors` (assumed B-positive) in place by Gram-Schmidt.
/// Returns false if a vector degenerates.
pub(crate) fn gram_schmidt_spacelike(vectors: &mut Vec<Vec5>) -> bool {
    let mut out: Vec<Vec5> = Vec::with_capacity(vectors.len());
    for v in vectors.iter() {
        let mut w = *v;
        for u in &out {
            w -= *u * form(u, &w);
        }
        let q = quad(&w);
        if q <= 1e-20 {
            return false;
        }
        out.push(w / q.sqrt());
    }
    *vectors = out;
    true
}

/// SVD with an iteration cap. nalgebra's default entry points iterate without
/// bound and can stall on rare inputs; a capped attempt with a tiny
/// perturbation retry never hangs.
pub(crate) fn svd5(m: &Mat5) -> nalgebra::linalg::SVD<f64, nalgebra::U5, nalgebra::U5> {
    if let Some(svd) = m.try_svd(true, true, f64::EPSILON, 100_000) {
        return svd;
    }
    let scale = max_abs(m).max(1e-300);
    for attempt in 1..=4 {
        let mut p = *m;
        for (i, x) in p.iter_mut().enumerate() {
            // Deterministic relative dither, alternating in sign.
            let sign = if (i + attempt) % 2 == 0 { 1.0 } else { -1.0 };
            *x += sign * scale * 1e-15 * attempt as f64;
        }
        if let Some(svd) = p.try_svd(true, true, f64::EPSILON, 100_000) {
            return svd;
        }
    }
    panic!("singular value iteration failed to converge");
}

/// Eigenvalues of an orientation- and cone-preserving form isometry, in
/// closed form. The spectrum of such a matrix is `{1, x, 1/x, y, 1/y}`
/// with each reciprocal pair either real of one sign or conjugate on the
/// unit circle, so the characteristic polynomial factors as
/// `(t - 1)(t^2 - a t + 1)(t^2 - b t + 1)` with `a = x + 1/x` and
/// `b = y + 1/y`. Matching coefficients against the two power traces gives
///
///   a + b = tr(M) - 1,      a^2 + b^2 = tr(M^2) + 3,
///
/// and `a`, `b` solve a quadratic in those symmetric functions. This is
/// exact and well conditioned for every group element, where a general
/// eigenvalue iteration stalls on strong loxodromics whose spectrum spans
/// sixteen orders of magnitude.
pub(crate) fn complex_eigenvalues5(m: &Mat5) -> [nalgebra::Complex<f64>; 5] {
    let t1 = m.trace();
    let t2 = (m * m).trace();
    let s = t1 - 1.0;
    // disc = (a - b)^2 = 2 (a^2 + b^2) - (a + b)^2, clamped against rounding
    // for near-coincident pairs.
    let disc = (2.0 * (t2 + 3.0) - s * s).max(0.0);
    let root = disc.sqrt();
    let a = if s >= 0.0 { (s + root) / 2.0 } else { (s - root) / 2.0 };
    // The product ab read through Vieta keeps the smaller solution accurate
    // when |a| dominates.
    let p = (s * s - (t2 + 3.0)) / 2.0;
    let b = if a.abs() > 1e-100 { p / a } else { s - a };

    // A conjugate pair within rounding of a double real root must be read
    // as real: the square root would otherwise turn entry noise of order
    // eps into a spurious rotation angle of order sqrt(eps).
    let na = max_abs(m).max(1.0);
    let snap = 4096.0 * f64::EPSILON * na * na;

    let mut out = [nalgebra::Complex::new(1.0, 0.0); 5];
    for (slot, y) in [(1usize, a), (3usize, b)] {
        let d2 = y * y - 4.0;
        if d2 >= -snap {
            // Real reciprocal pair; take the larger root first and its exact
            // reciprocal, avoiding cancellation in the smaller one.
            let big = (y + y.signum() * d2.max(0.0).sqrt()) / 2.0;
            let (big, small) = if big == 0.0 { (0.0, 0.0) } else { (big, 1.0 / big) };
            out[slot] = nalgebra::Complex::new(big, 0.0);
            out[slot + 1] = nalgebra::Complex::new(small, 0.0);
        } else {
            let im = (-d2).sqrt() / 2.0;
            out[slot] = nalgebra::Complex::new(y / 2.0, im);
            out[slot + 1] = nalgebra::Complex::new(y / 2.0, -im);
        }
    }
    out
}

/// Number of negative eigenvalues of the Gram matrix of `space`.
pub(crate) fn timelike_count(space: &[Vec5]) -> usize {
    let n = space.len();
    let mut gram = nalgebra::DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        for k in 0..n {
            gram[(i, k)] = form(&space[i], &space[k]);
        }
    }
    let se = nalgebra::SymmetricEigen::new(gram);
    let scale = se.eigenvalues.iter().cloned().fold(0.0f64, |a, x| a.max(x.abs()));
    se.eigenvalues
        .iter()
        .filter(|&&e| e < -1e-8 * scale.max(1e-300))
        .count()
}

/// Given a basis of a 3-space on which B restricts non-degenerately, returns
/// a B-orthonormal spacelike pair spanning its B-orthogonal complement.
pub(crate) fn plane_orthogonal_to_space(space: &[Vec5]) -> [Vec5; 2] {
    // Solve the Gram system to project standard vectors off the 3-space.
    let n = space.len();
    let mut gram = nalgebra::DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        for k in 0..n {
            gram[(i, k)] = form(&space[i], &space[k]);
        }
    }
    let gram_inv = gram.try_inverse().expect("non-degenerate restriction");
    let mut out: Vec<Vec5> = Vec::new();
    for i in 0..5 {
        let mut e = Vec5::zeros();
        e[i] = 1.0;
        let rhs: Vec<f64> = space.iter().map(|b| form(b, &e)).collect();
        let mut w = e;
        for k in 0..n {
            let mut coeff = 0.0;
            for l in 0..n {
                coeff += gram_inv[(k, l)] * rhs[l];
            }
            w -= space[k] * coeff;
        }
        out.push(w);
    }
    let mut picked: Vec<Vec5> = Vec::new();
    for w in out {
        let mut candidate = picked.clone();
        candidate.push(w);
        if gram_schmidt_spacelike(&mut candidate) {
            picked = candidate;
            if picked.len() == 2 {
                break;
            }
        }
    }
    assert_eq!(picked.len(), 2, "orthogonal plane must be 2-dimensional");
    [picked[0], picked[1]]
}

/// Right null vectors of `m`: rows of `V^T` whose singular values fall below
/// `rtol` times the largest singular value.
pub(crate) fn nullspace(m: &Mat5, rtol: f64) -> Vec<Vec5> {
    let svd = svd5(m);
    let smax = svd.singular_values.iter().cloned().fold(0.0f64, f64::max);
    let v_t = svd.v_t.as_ref().expect("requested V^T");
    let mut out = Vec::new();
    for i in 0..5 {
        if svd.singular_values[i] <= rtol * smax.max(1e-300) {
            out.push(v_t.row(i).transpose());
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn tols() -> Tolerances {
        Tolerances::default()
    }

    #[test]
    fn lift_is_null_and_pairing_matches_chart_distance() {
        // B(psi p, psi q) = -|p - q|^2 / 2, a closed form checkable by hand.
        let p = ChartPoint::finite(0.3, -1.2, 2.0);
        let q = ChartPoint::finite(-0.5, 0.4, 1.0);
        assert_abs_diff_eq!(quad(&p.lift()), 0.0, epsilon = 1e-12);
        let d2 = match (p, q) {
            (ChartPoint::Finite(a), ChartPoint::Finite(b)) => (a - b).norm_squared(),
            _ => unreachable!(),
        };
        assert_abs_diff_eq!(form(&p.lift(), &q.lift()), -d2 / 2.0, epsilon = 1e-12);
    }

    #[test]
    fn chart_round_trip_including_infinity() {
        let pts = [
            ChartPoint::finite(1.0, 2.0, -3.0),
            ChartPoint::ORIGIN,
            ChartPoint::Infinity,
        ];
        for p in pts {
            let back = ChartPoint::from_null(&(p.lift() * 7.25)).unwrap();
            assert!(p.spherical_distance(&back) < 1e-12);
        }
    }

    #[test]
    fn spherical_distance_examples() {
        // 0 and infinity are antipodal on the round sphere: distance 2.
        assert_abs_diff_eq!(
            ChartPoint::ORIGIN.spherical_distance(&ChartPoint::Infinity),
            2.0,
            epsilon = 1e-15
        );
        // (1,0,0) and (-1,0,0) map to antipodal equator points.
        let a = ChartPoint::finite(1.0, 0.0, 0.0);
        let b = ChartPoint::finite(-1.0, 0.0, 0.0);
        assert_abs_diff_eq!(a.spherical_distance(&b), 2.0, epsilon = 1e-15);
    }

    #[test]
    fn translation_moves_chart_points() {
        let t = Vec3::new(0.5, -1.0, 2.0);
        let g = MoebiusElement::translation(t);
        assert!(g.form_residual() < 1e-14);
        let p = ChartPoint::finite(1.0, 2.0, 3.0);
        match g.apply_boundary(p) {
            ChartPoint::Finite(q) => {
                assert_abs_diff_eq!(q.x, 1.5, epsilon = 1e-13);
                assert_abs_diff_eq!(q.y, 1.0, epsilon = 1e-13);
                assert_abs_diff_eq!(q.z, 5.0, epsilon = 1e-13);
            }
            _ => panic!("translation of a finite point is finite"),
        }
        assert!(g.apply_boundary(ChartPoint::Infinity).is_infinity());
    }

    #[test]
    fn scaling_composed_with_rotation_matches_hand_value() {
        let g = MoebiusElement::scaling(2.0).unwrap();
        let r = MoebiusElement::rotation(Vec3::z(), std::f64::consts::FRAC_PI_2).unwrap();
        let gr = g.compose(&r);
        let image = gr.apply_boundary(ChartPoint::finite(1.0, 0.0, 0.0));
        let expected = ChartPoint::finite(0.0, 2.0, 0.0);
        assert!(image.spherical_distance(&expected) < 1e-12);
    }

    #[test]
    fn boost_between_origin_and_infinity_is_scaling() {
        let b = MoebiusElement::boost(2.0, ChartPoint::ORIGIN, ChartPoint::Infinity).unwrap();
        let s = MoebiusElement::scaling(2.0).unwrap();
        assert!(b.matrix_distance(&s) < 1e-12);
    }

    #[test]
    fn boost_fixes_its_fixed_points_and_dilates() {
        let p = ChartPoint::finite(1.0, 0.0, 0.0);
        let q = ChartPoint::finite(-2.0, 1.0, 0.5);
        let g = MoebiusElement::boost(3.0, p, q).unwrap();
        assert!(g.form_residual() < 1e-12);
        assert!(g.apply_boundary(p).spherical_distance(&p) < 1e-12);
        assert!(g.apply_boundary(q).spherical_distance(&q) < 1e-12);
        // Iterating attracts generic points to q.
        let mut x = ChartPoint::finite(0.4, 4.0, -1.0);
        for _ in 0..40 {
            x = g.apply_boundary(x);
        }
        assert!(x.spherical_distance(&q) < 1e-9);
    }

    #[test]
    fn inverse_is_exact_and_renormalization_bounds_drift() {
        let g = MoebiusElement::boost(
            1.7,
            ChartPoint::finite(0.2, 0.3, -0.4),
            ChartPoint::finite(-1.0, 0.1, 2.0),
        )
        .unwrap();
        let r = MoebiusElement::rotation(Vec3::new(1.0, 1.0, 0.0), 0.37).unwrap();
        let h = g.compose(&r);
        assert!(h.compose(&h.inverse()).distance_from_identity() < 1e-12);

        // A long composition chain stays J-orthogonal thanks to renormalization.
        let mut acc = MoebiusElement::identity();
        for k in 0..1000 {
            acc = if k % 2 == 0 { acc.compose(&h) } else { acc.compose(&h.inverse()) };
        }
        assert!(acc.form_residual() < 1e-10);
        assert!(acc.distance_from_identity() < 1e-8);
    }

    #[test]
    fn inversion_pair_in_concentric_spheres_is_a_scaling() {
        // Inverting in |p| = 1 then |p| = 2 scales the chart by 4. The vector
        // of the sphere with center 0 and radius r is
        // (-(1-r^2)/(2r), 0, 0, 0, (1+r^2)/(2r)).
        let s_unit = Vec5::new(0.0, 0.0, 0.0, 0.0, 1.0);
        let s_two = Vec5::new(3.0 / 4.0, 0.0, 0.0, 0.0, 5.0 / 4.0);
        assert_abs_diff_eq!(quad(&s_unit), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(quad(&s_two), 1.0, epsilon = 1e-15);
        let g = MoebiusElement::inversion_pair(&s_unit, &s_two).unwrap();
        let expected = MoebiusElement::scaling(4.0).unwrap();
        assert!(g.matrix_distance(&expected) < 1e-12);
    }

    #[test]
    fn from_matrix_rejects_bad_matrices() {
        let mut m = Mat5::identity();
        m[(1, 2)] = 0.5;
        assert!(MoebiusElement::from_matrix(m, &tols()).is_err());
        // Orientation-reversing single inversion.
        let j = j_matrix();
        let s = Vec5::new(0.0, 0.0, 0.0, 0.0, -1.0);
        let refl = Mat5::identity() - 2.0 * s * (j * s).transpose();
        assert!(MoebiusElement::from_matrix(refl, &tols()).is_err());
    }

    #[test]
    fn h4_points_and_geodesics() {
        let x = H4Point::base();
        let y = H4Point::from_spatial(&nalgebra::Vector4::new(0.3, 0.0, 0.0, 0.0));
        assert_abs_diff_eq!(quad(y.vector()), -1.0, epsilon = 1e-12);
        let d = x.distance(&y);
        // Walking distance d from x toward y lands on y.
        let dir = {
            let mut v = y.vector() - x.vector() * -form(x.vector(), y.vector());
            let n = form(&v, &v).sqrt();
            v /= n;
            v * d
        };
        let z = x.exp(&dir);
        assert!(z.distance(&y) < 1e-12);
        // Scaling acts on H^4 as a translation along a geodesic through base.
        let g = MoebiusElement::scaling(std::f64::consts::E).unwrap();
        let moved = g.apply_h4(&x);
        assert_abs_diff_eq!(x.distance(&moved), 1.0, epsilon = 1e-12);
    }
}
