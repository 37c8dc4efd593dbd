//! Moebius annuli: annular regions on sphere carriers bounded by two
//! disjoint circles, their conformal modulus, normalization to a standard
//! concentric annulus, winding numbers, and connecting arcs.

use super::circle::{normalized_lift, Circle, CircleArc};
use super::sphere::Sphere;
use crate::error::{Error, Result};
use crate::lorentz::{form, plane_orthogonal_to_space, ChartPoint, MoebiusElement, Vec3, Vec5};
use crate::tol::Tolerances;
use nalgebra::Complex;
use serde::{Deserialize, Serialize};

/// The annular region of a carrier sphere between two disjoint circles. The
/// `inner`/`outer` designation is combinatorial data used by face pairings;
/// geometrically the region between the circles is unique.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MoebiusAnnulus {
    carrier: Sphere,
    inner: Circle,
    outer: Circle,
    /// In-carrier vector of the inner circle, positive on the annulus.
    t_inner: Vec5,
    /// In-carrier vector of the outer circle, positive on the annulus.
    t_outer: Vec5,
    modulus: f64,
}

impl MoebiusAnnulus {
    pub fn new(carrier: Sphere, inner: Circle, outer: Circle, tol: &Tolerances) -> Result<Self> {
        let t_inner_raw = inner.in_carrier_vector(&carrier, tol)?;
        let t_outer_raw = outer.in_carrier_vector(&carrier, tol)?;
        let t_inner = orient_positive_on(t_inner_raw, &outer)?;
        let t_outer = orient_positive_on(t_outer_raw, &inner)?;
        let pairing = form(&t_inner, &t_outer);
        if pairing >= -1.0 - tol.sep {
            return Err(Error::Degenerate(format!(
                "boundary circles are not disjoint within the carrier \
                 (in-carrier pairing {pairing:.12})"
            )));
        }
        Ok(MoebiusAnnulus {
            carrier,
            inner,
            outer,
            t_inner,
            t_outer,
            modulus: (-pairing).acosh(),
        })
    }

    pub fn carrier(&self) -> &Sphere {
        &self.carrier
    }

    pub fn inner(&self) -> &Circle {
        &self.inner
    }

    pub fn outer(&self) -> &Circle {
        &self.outer
    }

    /// Conformal modulus: `arccosh` of the in-carrier inversive distance of
    /// the boundary circles. The annulus is conformally `{e^-m <= |w| <= 1}`.
    pub fn modulus(&self) -> f64 {
        self.modulus
    }

    /// Closed-annulus membership at chart tolerance.
    pub fn contains(&self, p: &ChartPoint, tol: &Tolerances) -> bool {
        self.carrier.carrier_contains(p, tol)
            && form(&normalized_lift(p), &self.t_inner) >= -tol.chart
            && form(&normalized_lift(p), &self.t_outer) >= -tol.chart
    }

    /// Signed depth into the annulus from the nearer boundary circle
    /// (positive inside), ignoring the carrier constraint.
    pub fn boundary_clearance(&self, p: &ChartPoint) -> f64 {
        let x = normalized_lift(p);
        form(&x, &self.t_inner).min(form(&x, &self.t_outer))
    }

    pub fn transform(&self, g: &MoebiusElement, tol: &Tolerances) -> Result<MoebiusAnnulus> {
        MoebiusAnnulus::new(
            self.carrier.transform(g),
            self.inner.transform(g),
            self.outer.transform(g),
            tol,
        )
    }

    /// The annulus with the inner/outer designations exchanged.
    pub fn swapped(&self) -> MoebiusAnnulus {
        MoebiusAnnulus {
            carrier: self.carrier,
            inner: self.outer,
            outer: self.inner,
            t_inner: self.t_outer,
            t_outer: self.t_inner,
            modulus: self.modulus,
        }
    }
}

/// Flips `t` if needed so the reference circle (sampled at four points) is on
/// its positive side.
fn orient_positive_on(t: Vec5, reference: &Circle) -> Result<Vec5> {
    let frame = reference.frame();
    let mut best = 0.0f64;
    for k in 0..4 {
        let p = reference.point_at(&frame, k as f64 * std::f64::consts::FRAC_PI_2);
        let s = form(&normalized_lift(&p), &t);
        if s.abs() > best.abs() {
            best = s;
        }
    }
    if best.abs() < 1e-13 {
        return Err(Error::Degenerate(
            "cannot orient in-carrier vector: reference circle sits on the boundary".into(),
        ));
    }
    Ok(if best > 0.0 { t } else { -t })
}

/// A Moebius map carrying an annulus onto the standard concentric annulus
/// `{e^-modulus <= |w| <= 1}` in the plane `z = 0`, with the marked outer
/// point at `(1, 0, 0)`.
#[derive(Debug, Clone, Copy)]
pub struct AnnulusNormalization {
    pub map: MoebiusElement,
    pub modulus: f64,
}

/// Normalizes `annulus`: the inner limit point goes to the chart origin, the
/// outer limit point to infinity, the carrier to the plane `z = 0`, the outer
/// circle to the unit circle, and `marking` (or the outer circle's
/// lexicographic maximum) to `(1, 0, 0)`.
pub fn normalize_annulus(
    annulus: &MoebiusAnnulus,
    marking: Option<ChartPoint>,
    tol: &Tolerances,
) -> Result<AnnulusNormalization> {
    let t_in = annulus.t_inner;
    let t_out = annulus.t_outer;
    let ell = annulus.modulus;

    // Null directions of the (1,1)-plane spanned by the in-carrier vectors:
    // the two limit points of the annulus's circle pencil.
    let mut limits = Vec::new();
    for mu in [ell.exp(), (-ell).exp()] {
        let mut n = t_in + t_out * mu;
        n /= n.norm();
        if n[0] < 0.0 {
            n = -n;
        }
        limits.push(n);
    }
    let (mut n_in, mut n_out) = (limits[0], limits[1]);
    if form(&n_in, &t_in) > 0.0 {
        std::mem::swap(&mut n_in, &mut n_out);
    }
    if !(form(&n_in, &t_in) < 0.0 && form(&n_out, &t_in) > 0.0) {
        return Err(Error::Degenerate(
            "annulus limit points could not be separated".into(),
        ));
    }

    // Scale the null pair to pairing -2, matching the standard lifts of the
    // origin and infinity.
    let s0 = form(&n_in, &n_out);
    let alpha = (2.0 / -s0).sqrt();
    let n_in = n_in * alpha;
    let n_out = n_out * alpha;

    let s = *annulus.carrier.vector();
    let w = plane_orthogonal_to_space(&[n_in, n_out, s]);

    let e_minus = Vec5::new(1.0, 0.0, 0.0, 0.0, -1.0);
    let e_plus = Vec5::new(1.0, 0.0, 0.0, 0.0, 1.0);
    let e_x = Vec5::new(0.0, 1.0, 0.0, 0.0, 0.0);
    let e_y = Vec5::new(0.0, 0.0, 1.0, 0.0, 0.0);
    let e_z = Vec5::new(0.0, 0.0, 0.0, 1.0, 0.0);

    let target = nalgebra::Matrix5::from_columns(&[e_minus, e_plus, e_x, e_y, e_z]);
    // The source columns satisfy B(n_in, n_out) = -2 with both null, and
    // the remaining three columns B-orthonormal and B-orthogonal to them,
    // so the inverse has the closed form G^{-1} S^T J with G the constant
    // Gram matrix. This avoids a numeric 5x5 inversion, whose conditioning
    // degrades badly for eccentric annuli.
    let raw_map = |w2: Vec5| -> crate::lorentz::Mat5 {
        let source = nalgebra::Matrix5::from_columns(&[n_in, n_out, w[0], w2, s]);
        let mut gram_inv = crate::lorentz::Mat5::identity();
        gram_inv[(0, 0)] = 0.0;
        gram_inv[(1, 1)] = 0.0;
        gram_inv[(0, 1)] = -0.5;
        gram_inv[(1, 0)] = -0.5;
        let j = crate::lorentz::Mat5::from_diagonal(&Vec5::new(-1.0, 1.0, 1.0, 1.0, 1.0));
        target * gram_inv * source.transpose() * j
    };
    let mut raw = raw_map(w[1]);
    if raw.determinant() < 0.0 {
        raw = raw_map(-w[1]);
    }
    let frame_map = MoebiusElement::from_matrix(raw, tol)?;

    // The frame map sends the annulus to a concentric one; rescale the outer
    // image circle to radius 1. The image of t_outer is the outside-oriented
    // vector of the sphere |w| = b', for which -(v0 + v4) = b'.
    let t_img = frame_map.apply_vector(&t_out);
    let b_prime = -(t_img[0] + t_img[4]);
    if !(b_prime > 0.0) {
        return Err(Error::Degenerate(format!(
            "normalized outer radius came out nonpositive: {b_prime}"
        )));
    }
    let rescale = MoebiusElement::scaling(1.0 / b_prime)?.compose(&frame_map);

    // Rotate the marked outer point to the positive x-axis.
    let mark = match marking {
        Some(p) => {
            if !on_circle(&annulus.outer, &p, tol) {
                return Err(Error::InvalidSpec(
                    "marking must lie on the outer circle".into(),
                ));
            }
            p
        }
        None => annulus.outer.lex_max_point(tol),
    };
    let w_mark = rescale.apply_boundary(mark);
    let phi = match w_mark {
        ChartPoint::Finite(p) => p.y.atan2(p.x),
        ChartPoint::Infinity => {
            return Err(Error::Degenerate(
                "marking mapped to infinity during normalization".into(),
            ))
        }
    };
    let map = MoebiusElement::rotation(Vec3::z(), -phi)?.compose(&rescale);
    Ok(AnnulusNormalization { map, modulus: ell })
}

fn on_circle(c: &Circle, p: &ChartPoint, tol: &Tolerances) -> bool {
    // Slightly relaxed membership for user-provided markings.
    let x = normalized_lift(p);
    let [u, v] = c.plane();
    form(&x, &u).abs() <= tol.chart * 100.0 && form(&x, &v).abs() <= tol.chart * 100.0
}

/// Reads the complex coordinate `x + i y` of a point expected to lie in the
/// chart plane `z = 0` and away from its origin and infinity.
fn plane_coordinate(p: &ChartPoint) -> Result<Complex<f64>> {
    match p {
        ChartPoint::Finite(q) => {
            let w = Complex::new(q.x, q.y);
            if q.z.abs() > 1e-6 * (1.0 + w.norm()) {
                return Err(Error::UndefinedWinding);
            }
            if w.norm() < 1e-9 {
                return Err(Error::UndefinedWinding);
            }
            Ok(w)
        }
        ChartPoint::Infinity => Err(Error::UndefinedWinding),
    }
}

/// Total winding around the origin, in turns, of a chain of arcs lying in
/// the plane `z = 0` (normalized-annulus coordinates). Each arc contributes
/// its own argument increment; a closed chain yields an integer, a chain
/// from inner to outer boundary of a normalized annulus a half-integer or
/// whatever real value its endpoints dictate.
pub fn winding_number(arcs: &[CircleArc], tol: &Tolerances) -> Result<f64> {
    let _ = tol;
    let mut total = 0.0;
    for arc in arcs {
        let frame = arc.circle().frame();
        let (_, sweep) = arc.sweep(&frame);
        // Start from parameter pieces no longer than a quarter turn so the
        // chord test below begins in its convergent regime.
        let pieces = ((sweep.abs() / std::f64::consts::FRAC_PI_2).ceil() as usize).max(1);
        for k in 0..pieces {
            let s0 = k as f64 / pieces as f64;
            let s1 = (k + 1) as f64 / pieces as f64;
            total += arg_increment(arc, &frame, s0, s1, 0)?;
        }
    }
    Ok(total / std::f64::consts::TAU)
}

fn arg_increment(
    arc: &CircleArc,
    frame: &super::circle::CircleFrame,
    s0: f64,
    s1: f64,
    depth: usize,
) -> Result<f64> {
    if depth > 40 {
        return Err(Error::UndefinedWinding);
    }
    let wa = plane_coordinate(&arc.point_at_fraction(frame, s0))?;
    let wb = plane_coordinate(&arc.point_at_fraction(frame, s1))?;
    if (wb - wa).norm() <= 0.5 * wa.norm().min(wb.norm()) {
        return Ok((wb / wa).arg());
    }
    let mid = (s0 + s1) / 2.0;
    Ok(arg_increment(arc, frame, s0, mid, depth + 1)?
        + arg_increment(arc, frame, mid, s1, depth + 1)?)
}

/// Connects `x` on the inner circle to `y` on the outer circle by the
/// canonical circular arc realizing the requested winding, which must match
/// the achievable value: `wrap(arg y - arg x) / 2 pi` in normalized
/// coordinates, except for singular pairs (diametrically opposite arguments)
/// where both `+1/2` and `-1/2` are achievable and the arc is tangent to the
/// two boundary circles.
pub fn connecting_arc(
    annulus: &MoebiusAnnulus,
    x: &ChartPoint,
    y: &ChartPoint,
    winding: f64,
    tol: &Tolerances,
) -> Result<CircleArc> {
    let norm = normalize_annulus(annulus, None, tol)?;
    let h = norm.map;
    let hx = h.apply_boundary(*x);
    let hy = h.apply_boundary(*y);
    let u = plane_coordinate(&hx).map_err(|_| {
        Error::InvalidSpec("inner endpoint did not normalize into the annulus plane".into())
    })?;
    let v = plane_coordinate(&hy).map_err(|_| {
        Error::InvalidSpec("outer endpoint did not normalize into the annulus plane".into())
    })?;
    let rho = (-norm.modulus).exp();
    if (u.norm() - rho).abs() > 1e-6 || (v.norm() - 1.0).abs() > 1e-6 {
        return Err(Error::InvalidSpec(
            "endpoints must lie on the inner and outer boundary circles".into(),
        ));
    }

    let delta = wrap_angle(v.arg() - u.arg());
    const WTOL: f64 = 1e-6;
    let singular = (delta - std::f64::consts::PI).abs() <= tol.angle * 10.0;
    let sweep = if singular {
        if (winding - 0.5).abs() <= WTOL {
            std::f64::consts::PI
        } else if (winding + 0.5).abs() <= WTOL {
            -std::f64::consts::PI
        } else {
            return Err(Error::NoSuchArc);
        }
    } else {
        if (winding - delta / std::f64::consts::TAU).abs() > WTOL {
            return Err(Error::NoSuchArc);
        }
        delta
    };

    // Canonical midpoint: geometric-mean radius at the half-way argument.
    let m_arg = u.arg() + sweep / 2.0;
    let m_norm = ChartPoint::finite(
        rho.sqrt() * m_arg.cos(),
        rho.sqrt() * m_arg.sin(),
        0.0,
    );
    let h_inv = h.inverse();
    let m = h_inv.apply_boundary(m_norm);
    let arc = CircleArc::through(*x, m, *y, tol)?;

    // Validate the construction: correct winding and containment.
    let image = arc.transform(&h, tol)?;
    let got = winding_number(std::slice::from_ref(&image), tol)?;
    if (got - winding).abs() > 1e-6 {
        return Err(Error::SolverFailure(format!(
            "connecting arc winding came out {got:.9}, wanted {winding:.9}"
        )));
    }
    let mut relaxed = *tol;
    relaxed.chart *= 100.0;
    for p in arc.sample(64) {
        if !annulus.contains(&p, &relaxed) {
            return Err(Error::SolverFailure(
                "connecting arc left the annulus".into(),
            ));
        }
    }
    Ok(arc)
}

fn wrap_angle(a: f64) -> f64 {
    let tau = std::f64::consts::TAU;
    let mut x = a.rem_euclid(tau);
    if x > std::f64::consts::PI {
        x -= tau;
    }
    x
}

/// The point on the outer circle reached from `inner_point` by the arc of
/// the requested winding: in normalized coordinates it sits at the inner
/// point's argument advanced by `2 pi winding`, on the unit circle.
pub fn outer_partner(
    annulus: &MoebiusAnnulus,
    inner_point: &ChartPoint,
    winding: f64,
    tol: &Tolerances,
) -> Result<ChartPoint> {
    boundary_partner(annulus, inner_point, winding, tol, true)
}

/// The point on the inner circle whose `outer_partner` under the same
/// winding is `outer_point`.
pub fn inner_partner(
    annulus: &MoebiusAnnulus,
    outer_point: &ChartPoint,
    winding: f64,
    tol: &Tolerances,
) -> Result<ChartPoint> {
    boundary_partner(annulus, outer_point, winding, tol, false)
}

fn boundary_partner(
    annulus: &MoebiusAnnulus,
    point: &ChartPoint,
    winding: f64,
    tol: &Tolerances,
    from_inner: bool,
) -> Result<ChartPoint> {
    let norm = normalize_annulus(annulus, None, tol)?;
    let w = plane_coordinate(&norm.map.apply_boundary(*point)).map_err(|_| {
        Error::InvalidSpec("point did not normalize into the annulus plane".into())
    })?;
    let rho = (-norm.modulus).exp();
    let (expected, target) = if from_inner { (rho, 1.0) } else { (1.0, rho) };
    if (w.norm() - expected).abs() > 1e-6 {
        return Err(Error::InvalidSpec(format!(
            "point lies at normalized radius {:.9}, expected {expected:.9}",
            w.norm()
        )));
    }
    let sign = if from_inner { 1.0 } else { -1.0 };
    let arg = w.arg() + sign * std::f64::consts::TAU * winding;
    let partner = ChartPoint::finite(target * arg.cos(), target * arg.sin(), 0.0);
    Ok(norm.map.inverse().apply_boundary(partner))
}
