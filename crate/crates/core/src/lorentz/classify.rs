//! Classification of Moebius transformations by their fixed-point data.

use super::{
    complex_eigenvalues5, form, max_abs, nullspace, svd5, ChartPoint, Mat5, MoebiusElement, Vec5,
};
use crate::tol::Tolerances;

/// Conjugacy type of an element of SO+(4,1).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ElementKind {
    Identity,
    /// Two boundary fixed points, dilation `lambda > 1`.
    Loxodromic,
    /// One boundary fixed point, no dilation.
    Parabolic,
    /// Fixed point set in the closed 4-ball is a single interior point.
    EllipticRegular,
    /// Fixed point set is a geodesic plane meeting the boundary in a circle.
    EllipticSingular,
}

/// Everything the classifier can report about one element.
#[derive(Debug, Clone)]
pub struct Classification {
    pub kind: ElementKind,
    /// Dilation `lambda > 1` for loxodromics.
    pub dilation: Option<f64>,
    /// Whether a loxodromic rotates around its axis as it translates.
    pub rotating: Option<bool>,
    /// Rotation angles in `(0, pi]`, one per rotating 2-plane.
    pub rotation_angles: Vec<f64>,
    /// Boundary fixed points: attracting then repelling for loxodromics,
    /// the single fixed point for parabolics, empty otherwise.
    pub fixed_points: Vec<ChartPoint>,
    /// For singular elliptics: a B-orthonormal spacelike pair spanning the
    /// 2-plane whose orthogonal circle on S^3 is fixed pointwise.
    pub fixed_circle_plane: Option<[Vec5; 2]>,
    /// Set when the dominant eigenvalue is so close to 1 that the
    /// loxodromic/unit-modulus decision is not trustworthy at `tol.eig`.
    pub degenerate: bool,
}

// Relative singular-value cutoff for eigenspace extraction from (M - I).
// Looser than the rank tolerance used for spans: eigenvectors of nearly
// defective matrices are the worst-conditioned objects this crate touches.
const EIGENSPACE_RTOL: f64 = 1e-7;

// Relative cutoff for the kernel of (M - I)^2 in the parabolic test. Squaring
// squares the small singular values, so genuine kernel directions sit far
// below this while near-unit loxodromic directions stay above it.
const SQUARED_RTOL: f64 = 1e-12;

// Computed eigenvalues of a defective unit-modulus cluster (a parabolic's
// Jordan block) scatter by roughly eps^(1/3) ~ 6e-6 around 1 even for a
// backward-stable solver, amplified by conjugation. Dominant-eigenvalue
// readings below this guard are therefore never trusted on their own; the
// kernel-chain test decides instead. The price is that loxodromics with
// dilation inside (1, 1 + 1e-4) are reported as unit-modulus types, flagged
// degenerate when the eigenvalue reading is measurably above 1.
const DEFECT_GUARD: f64 = 1e-4;

/// Decides the conjugacy type of `g` and extracts its fixed-point data.
///
/// Loxodromics are recognized by a dominant eigenvalue above
/// `1 + max(tol.eig, DEFECT_GUARD)`; in the unit-modulus regime, parabolics
/// are separated from elliptics by comparing the kernels of `(M - I)` and
/// `(M - I)^2`, which is robust even though the eigenvalues of a defective
/// matrix are not.
pub fn classify(g: &MoebiusElement, tol: &Tolerances) -> Classification {
    let m = *g.matrix();
    let ident = Mat5::identity();

    let dist = max_abs(&(m - ident));
    if dist < tol.eig {
        // Solid identity readings stay unflagged; matrices measurably away
        // from I yet inside the identity tolerance may equally well be tiny
        // non-identity elements, so they carry the degeneracy flag.
        return Classification {
            kind: ElementKind::Identity,
            dilation: None,
            rotating: None,
            rotation_angles: vec![],
            fixed_points: vec![],
            fixed_circle_plane: None,
            degenerate: dist > tol.eig / 100.0,
        };
    }

    let eigs = complex_eigenvalues5(&m);
    let lambda_max = eigs.iter().map(|z| z.norm()).fold(0.0f64, f64::max);

    if lambda_max > 1.0 + tol.eig.max(DEFECT_GUARD) {
        return classify_loxodromic(g, lambda_max, tol);
    }

    // Unit-modulus regime. Separate parabolic from elliptic through kernel
    // growth of powers of (M - I). A confirmed kernel jump is a positive
    // structural finding, so the parabolic branch is never flagged; in the
    // elliptic branch any eigenvalue reading measurably above 1 is suspect.
    let d = m - ident;
    let e1 = nullspace(&d, EIGENSPACE_RTOL);
    let e2 = nullspace(&(d * d), SQUARED_RTOL);
    if e2.len() > e1.len() {
        return classify_parabolic(&e1, false);
    }
    let degenerate = lambda_max > 1.0 + tol.eig / 100.0;
    classify_elliptic(&eigs, &e1, degenerate, tol)
}

fn classify_loxodromic(g: &MoebiusElement, lambda: f64, tol: &Tolerances) -> Classification {
    let m = *g.matrix();
    let ident = Mat5::identity();
    let attracting = dominant_null_vector(&(m - ident * lambda));
    let repelling = dominant_null_vector(&(m - ident / lambda));
    let fixed_points = vec![
        ChartPoint::from_null(&attracting).expect("attracting vector is future null"),
        ChartPoint::from_null(&repelling).expect("repelling vector is future null"),
    ];

    // Restrict to the B-orthogonal complement of the axis plane and read off
    // the rotation angle of the induced 3x3 rotation. The sine comes from
    // the skew part, which is linear in the angle; reading the angle from
    // the trace alone loses half the digits near zero because the cosine is
    // quadratically flat there.
    let basis = axis_complement(&attracting, &repelling);
    let mut r = nalgebra::Matrix3::<f64>::zeros();
    for (k, wk) in basis.iter().enumerate() {
        let mw: Vec<Vec5> = basis.iter().map(|wl| m * *wl).collect();
        for (l, mwl) in mw.iter().enumerate() {
            r[(k, l)] = form(wk, mwl);
        }
    }
    let cos_theta = ((r.trace() - 1.0) / 2.0).clamp(-1.0, 1.0);
    let sin_theta = {
        let wx = (r[(2, 1)] - r[(1, 2)]) / 2.0;
        let wy = (r[(0, 2)] - r[(2, 0)]) / 2.0;
        let wz = (r[(1, 0)] - r[(0, 1)]) / 2.0;
        (wx * wx + wy * wy + wz * wz).sqrt()
    };
    let theta = sin_theta.atan2(cos_theta);
    let rotating = theta > tol.angle;

    Classification {
        kind: ElementKind::Loxodromic,
        dilation: Some(lambda),
        rotating: Some(rotating),
        rotation_angles: if rotating { vec![theta] } else { vec![] },
        fixed_points,
        fixed_circle_plane: None,
        degenerate: false,
    }
}

fn classify_parabolic(e1: &[Vec5], degenerate: bool) -> Classification {
    // The fixed boundary point spans the radical of B restricted to the
    // eigenspace at 1: the basis vector combination with B-norm zero.
    let n = e1.len().max(1);
    let mut gram = nalgebra::DMatrix::<f64>::zeros(n, n);
    for i in 0..e1.len() {
        for k in 0..e1.len() {
            gram[(i, k)] = form(&e1[i], &e1[k]);
        }
    }
    let se = nalgebra::SymmetricEigen::new(gram);
    // Pick the eigenvector of the Gram matrix with smallest |eigenvalue|.
    let mut best = 0;
    for i in 0..e1.len() {
        if se.eigenvalues[i].abs() < se.eigenvalues[best].abs() {
            best = i;
        }
    }
    let mut v = Vec5::zeros();
    for i in 0..e1.len() {
        v += e1[i] * se.eigenvectors[(i, best)];
    }
    if v[0] < 0.0 {
        v = -v;
    }
    let fixed = ChartPoint::from_null(&v).expect("parabolic fixed vector is future null");
    Classification {
        kind: ElementKind::Parabolic,
        dilation: None,
        rotating: None,
        rotation_angles: vec![],
        fixed_points: vec![fixed],
        fixed_circle_plane: None,
        degenerate,
    }
}

fn classify_elliptic(
    eigs: &[nalgebra::Complex<f64>; 5],
    e1: &[Vec5],
    degenerate: bool,
    tol: &Tolerances,
) -> Classification {
    // Rotation angles: each conjugate pair e^{+-i theta} contributes one
    // angle. Collect |arg| > tol.angle and merge them pairwise.
    let mut args: Vec<f64> = eigs
        .iter()
        .map(|z| z.im.atan2(z.re).abs())
        .filter(|a| *a > tol.angle)
        .collect();
    args.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut rotation_angles = Vec::new();
    let mut i = 0;
    while i + 1 < args.len() {
        rotation_angles.push((args[i] + args[i + 1]) / 2.0);
        i += 2;
    }

    if e1.len() >= 5 {
        // Numerically the identity at the eigenspace cutoff even though some
        // entry difference exceeded tol.eig.
        return Classification {
            kind: ElementKind::Identity,
            dilation: None,
            rotating: None,
            rotation_angles: vec![],
            fixed_points: vec![],
            fixed_circle_plane: None,
            degenerate: true,
        };
    }

    if e1.len() >= 3 && super::timelike_count(e1) == 1 {
        // Three fixed directions of signature (2,1): the element fixes a
        // geodesic 2-plane of H^4 pointwise, hence a boundary circle. A
        // 3-dimensional fixed space of signature (3,0) is not this case; it
        // arises only for barely-loxodromic elements in the degenerate band
        // and falls through to the regular branch below.
        let plane = super::plane_orthogonal_to_space(e1);
        return Classification {
            kind: ElementKind::EllipticSingular,
            dilation: None,
            rotating: None,
            rotation_angles,
            fixed_points: vec![],
            fixed_circle_plane: Some(plane),
            degenerate,
        };
    }

    Classification {
        kind: ElementKind::EllipticRegular,
        dilation: None,
        rotating: None,
        rotation_angles,
        fixed_points: vec![],
        fixed_circle_plane: None,
        degenerate,
    }
}


/// The right singular vector of the smallest singular value, normalized to
/// x0 > 0.
fn dominant_null_vector(m: &Mat5) -> Vec5 {
    let svd = svd5(m);
    let v_t = svd.v_t.as_ref().expect("requested V^T");
    let mut best = 0;
    for i in 0..5 {
        if svd.singular_values[i] < svd.singular_values[best] {
            best = i;
        }
    }
    let mut v: Vec5 = v_t.row(best).transpose();
    if v[0] < 0.0 {
        v = -v;
    }
    v
}

/// B-orthonormal basis of the complement of span(u, v) for a null pair u, v.
fn axis_complement(u: &Vec5, v: &Vec5) -> Vec<Vec5> {
    let s = form(u, v);
    let mut basis: Vec<Vec5> = Vec::new();
    for i in 0..5 {
        let mut e = Vec5::zeros();
        e[i] = 1.0;
        // Remove the components along the (degenerate-metric) plane span(u,v).
        let w = e - u * (form(&e, v) / s) - v * (form(&e, u) / s);
        basis.push(w);
    }
    // The five projections span a 3-space; keep an independent triple.
    let mut out: Vec<Vec5> = Vec::new();
    for w in basis {
        let mut reduced = w;
        for b in &out {
            reduced -= *b * form(b, &reduced);
        }
        if form(&reduced, &reduced) > 1e-10 {
            out.push(reduced / form(&reduced, &reduced).sqrt());
            if out.len() == 3 {
                break;
            }
        }
    }
    assert_eq!(out.len(), 3, "axis complement must be 3-dimensional");
    out
}


#[cfg(test)]
mod tests {
    use super::*;
    use crate::lorentz::Vec3;
    use approx::assert_abs_diff_eq;

    fn tols() -> Tolerances {
        Tolerances::default()
    }

    #[test]
    fn identity_is_identity() {
        let c = classify(&MoebiusElement::identity(), &tols());
        assert_eq!(c.kind, ElementKind::Identity);
    }

    #[test]
    fn scaling_is_nonrotating_loxodromic() {
        let g = MoebiusElement::scaling(3.0).unwrap();
        let c = classify(&g, &tols());
        assert_eq!(c.kind, ElementKind::Loxodromic);
        assert_abs_diff_eq!(c.dilation.unwrap(), 3.0, epsilon = 1e-10);
        assert_eq!(c.rotating, Some(false));
        // Attracting fixed point of a chart scaling with lambda > 1 is infinity.
        assert!(c.fixed_points[0].is_infinity());
        assert!(c.fixed_points[1].spherical_distance(&ChartPoint::ORIGIN) < 1e-8);
    }

    #[test]
    fn screw_motion_is_rotating_loxodromic() {
        let g = MoebiusElement::scaling(2.0)
            .unwrap()
            .compose(&MoebiusElement::rotation(Vec3::z(), 0.7).unwrap());
        let c = classify(&g, &tols());
        assert_eq!(c.kind, ElementKind::Loxodromic);
        assert_eq!(c.rotating, Some(true));
        assert_abs_diff_eq!(c.rotation_angles[0], 0.7, epsilon = 1e-9);
        assert_abs_diff_eq!(c.dilation.unwrap(), 2.0, epsilon = 1e-9);
    }

    #[test]
    fn conjugated_boost_keeps_its_dilation_and_fixed_points() {
        let p = ChartPoint::finite(0.5, -0.25, 1.0);
        let q = ChartPoint::finite(-1.5, 2.0, 0.0);
        let g = MoebiusElement::boost(4.0, p, q).unwrap();
        let h = MoebiusElement::translation(Vec3::new(0.3, 0.0, -2.0))
            .compose(&MoebiusElement::rotation(Vec3::x(), 1.1).unwrap());
        let c = classify(&g.conjugate_by(&h), &tols());
        assert_eq!(c.kind, ElementKind::Loxodromic);
        assert_abs_diff_eq!(c.dilation.unwrap(), 4.0, epsilon = 1e-8);
        let qq = h.apply_boundary(q);
        let pp = h.apply_boundary(p);
        assert!(c.fixed_points[0].spherical_distance(&qq) < 1e-7);
        assert!(c.fixed_points[1].spherical_distance(&pp) < 1e-7);
    }

    #[test]
    fn translation_is_parabolic_fixing_infinity() {
        let g = MoebiusElement::translation(Vec3::new(1.0, -2.0, 0.5));
        let c = classify(&g, &tols());
        assert_eq!(c.kind, ElementKind::Parabolic);
        assert!(c.fixed_points[0].is_infinity());
    }

    #[test]
    fn conjugated_screw_translation_is_parabolic() {
        // A translation composed with a rotation about its own direction is
        // still parabolic (screw parabolic), and conjugation moves the fixed
        // point off infinity.
        let g = MoebiusElement::translation(Vec3::new(0.0, 0.0, 1.0))
            .compose(&MoebiusElement::rotation(Vec3::z(), 0.9).unwrap());
        let h = MoebiusElement::boost(
            2.0,
            ChartPoint::finite(1.0, 1.0, 1.0),
            ChartPoint::finite(-1.0, 0.5, 0.0),
        )
        .unwrap();
        let conj = g.conjugate_by(&h);
        let c = classify(&conj, &tols());
        assert_eq!(c.kind, ElementKind::Parabolic);
        let fixed = h.apply_boundary(ChartPoint::Infinity);
        assert!(c.fixed_points[0].spherical_distance(&fixed) < 1e-6);
    }

    #[test]
    fn rotation_about_an_axis_is_singular_elliptic() {
        let g = MoebiusElement::rotation(Vec3::z(), 1.3).unwrap();
        let c = classify(&g, &tols());
        assert_eq!(c.kind, ElementKind::EllipticSingular);
        assert_abs_diff_eq!(c.rotation_angles[0], 1.3, epsilon = 1e-10);
        // The fixed circle plane is B-orthogonal to the lifts of axis points.
        let plane = c.fixed_circle_plane.unwrap();
        for p in [
            ChartPoint::ORIGIN,
            ChartPoint::finite(0.0, 0.0, 5.0),
            ChartPoint::Infinity,
        ] {
            // Axis points lie ON the fixed circle, so their lifts are
            // B-orthogonal to the plane's complement, i.e. inside the fixed
            // 3-space: check B(lift, w) = 0 for the complement pair w.
            for w in plane.iter() {
                assert_abs_diff_eq!(form(&p.lift(), w), 0.0, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn double_rotation_is_regular_elliptic() {
        // Rotate about the z-axis and also in the orthogonal plane by
        // conjugating a z-rotation to a different axis circle and composing.
        let a = MoebiusElement::rotation(Vec3::z(), 0.8).unwrap();
        // The inversion-swap of 0 and infinity conjugates rotations about the
        // z-axis to rotations about the unit circle in the xy-plane; composing
        // two independent rotations leaves only the H^4 center fixed.
        let b = {
            // Rotation in the (x4, x0-complement) block: rotate the plane
            // spanned by e1, e2 and the plane spanned by e3, e4 together.
            let mut m = Mat5::identity();
            let (s, c) = (0.6f64).sin_cos();
            m[(3, 3)] = c;
            m[(3, 4)] = -s;
            m[(4, 3)] = s;
            m[(4, 4)] = c;
            MoebiusElement::from_matrix(m, &tols()).unwrap()
        };
        let g = a.compose(&b);
        let c = classify(&g, &tols());
        assert_eq!(c.kind, ElementKind::EllipticRegular);
        assert_eq!(c.rotation_angles.len(), 2);
        assert_abs_diff_eq!(c.rotation_angles[0], 0.6, epsilon = 1e-9);
        assert_abs_diff_eq!(c.rotation_angles[1], 0.8, epsilon = 1e-9);
    }

    #[test]
    fn near_unit_dilation_sets_the_degenerate_flag() {
        let lam = 1.0 + 5e-9; // below tol.eig = 1e-8 but above tol.eig / 100
        let g = MoebiusElement::boost(lam, ChartPoint::ORIGIN, ChartPoint::Infinity).unwrap();
        let c = classify(&g, &tols());
        assert!(c.degenerate);
        assert_ne!(c.kind, ElementKind::Loxodromic);
        // With a looser eigenvalue tolerance the same element is cleanly
        // non-loxodromic and undegenerate.
        let mut loose = tols();
        loose.eig = 1e-6;
        let c2 = classify(&g, &loose);
        assert!(!c2.degenerate);
    }

    #[test]
    fn power_iteration_oracle_for_dilation() {
        // Independent estimate of lambda: growth rate of a generic null orbit
        // under the matrix, measured through the x0 coordinate.
        let g = MoebiusElement::boost(
            2.5,
            ChartPoint::finite(1.0, 2.0, 0.0),
            ChartPoint::finite(-0.5, 0.0, 1.5),
        )
        .unwrap();
        let mut x = ChartPoint::finite(0.1, 0.2, 0.3).lift();
        let mut prev_growth = 0.0;
        for _ in 0..60 {
            x = g.matrix() * x;
            let n = x[0];
            x /= n;
            prev_growth = n;
        }
        let c = classify(&g, &tols());
        assert_abs_diff_eq!(c.dilation.unwrap(), prev_growth, epsilon = 1e-6);
        assert_abs_diff_eq!(c.dilation.unwrap(), 2.5, epsilon = 1e-9);
    }
}
