//! Face-pairing holonomy for necklace polyhedra.
//!
//! A face of a necklace polyhedron is a Moebius annulus; a *marking* singles
//! out one boundary-to-boundary arc on it, recorded as the arc's endpoint on
//! the face's outer circle together with a winding. Two marked faces with
//! equal moduli are related by a unique Moebius transformation that swaps
//! their boundary roles and matches the marked arcs, and a full set of such
//! pairings generates the holonomy group of a closed surface. This module
//! solves for those pairings (by two independent routes), verifies the edge
//! cycle condition, extracts standard surface-group generators, applies
//! earthquake deformations along handle curves, and scans one-parameter
//! families of sphere configurations for the first parameter where the
//! necklace geometry degenerates.

use crate::conformal::annulus::{connecting_arc, inner_partner, normalize_annulus, outer_partner};
use crate::conformal::circle::normalized_lift;
use crate::conformal::{Circle, CircleArc, MoebiusAnnulus, Side, Sphere};
use crate::error::{Error, Result};
use crate::lorentz::{
    centralizer_generators, classify, commutation_residual, exp_so41, form,
    plane_orthogonal_to_space, quad, ChartPoint, ElementKind, Mat5, MoebiusElement, Vec3,
};
use crate::necklace::{corner_cycles, NecklacePolyhedron};
use crate::tol::Tolerances;

/// Absolute slack for winding bookkeeping. Windings are discrete choices
/// (integers plus a continuous angle), so this only absorbs rounding.
const WINDING_TOL: f64 = 1e-6;

/// Self-check gate for the normalization-composition solver. The exact
/// construction leaves residuals near machine precision; anything above this
/// means the inputs were inconsistent in a way the prechecks missed.
const SOLVER_GUARD: f64 = 1e-7;

/// Parameter-space width to which scan events are bisected.
const SCAN_BRACKET: f64 = 1e-6;

/// A marked arc on an annulus face: its endpoint on the outer circle and the
/// winding of the arc from the (derived) inner endpoint to that point.
#[derive(Debug, Clone, Copy)]
pub struct Marking {
    pub outer_point: ChartPoint,
    /// Angular sweep of the arc divided by 2 pi, measured in the normalized
    /// concentric picture going from the inner circle to the outer one.
    pub winding: f64,
}

/// An annulus face together with an optional marking.
///
/// The inner endpoint of the marked arc is not stored: it is determined by
/// the outer endpoint and the winding, and is recovered on demand.
#[derive(Debug, Clone, Copy)]
pub struct MarkedAnnulus {
    annulus: MoebiusAnnulus,
    marking: Option<Marking>,
}

impl MarkedAnnulus {
    /// Attaches `marking` to `annulus`, checking that the marked point lies
    /// on the outer circle and that the winding is within the closed
    /// half-turn interval.
    pub fn new(annulus: MoebiusAnnulus, marking: Marking, tol: &Tolerances) -> Result<Self> {
        if !marking.winding.is_finite() || marking.winding.abs() > 0.5 + WINDING_TOL {
            return Err(Error::InvalidSpec(format!(
                "marking winding {} outside [-1/2, 1/2]",
                marking.winding
            )));
        }
        if !annulus.outer().contains(&marking.outer_point, tol) {
            return Err(Error::InvalidPoint(
                "marking endpoint does not lie on the outer circle".into(),
            ));
        }
        Ok(MarkedAnnulus { annulus, marking: Some(marking) })
    }

    pub fn unmarked(annulus: MoebiusAnnulus) -> Self {
        MarkedAnnulus { annulus, marking: None }
    }

    pub fn annulus(&self) -> &MoebiusAnnulus {
        &self.annulus
    }

    pub fn marking(&self) -> Option<Marking> {
        self.marking
    }

    fn required_marking(&self) -> Result<Marking> {
        self.marking
            .ok_or_else(|| Error::Underdetermined("face carries no marking".into()))
    }

    /// The inner endpoint of the marked arc.
    pub fn inner_point(&self, tol: &Tolerances) -> Result<ChartPoint> {
        let m = self.required_marking()?;
        inner_partner(&self.annulus, &m.outer_point, m.winding, tol)
    }

    /// The canonical midpoint of the marked arc, at the geometric-mean
    /// radius of the normalized band and half the angular sweep.
    pub fn marking_midpoint(&self, tol: &Tolerances) -> Result<ChartPoint> {
        let m = self.required_marking()?;
        midpoint_at(&self.annulus, &m.outer_point, m.winding, tol)
    }

    /// The marked arc itself.
    pub fn marking_arc(&self, tol: &Tolerances) -> Result<CircleArc> {
        let m = self.required_marking()?;
        let x = self.inner_point(tol)?;
        connecting_arc(&self.annulus, &x, &m.outer_point, m.winding, tol)
    }

    pub fn transform(&self, g: &MoebiusElement, tol: &Tolerances) -> Result<MarkedAnnulus> {
        let annulus = self.annulus.transform(g, tol)?;
        let marking = self.marking.map(|m| Marking {
            outer_point: g.apply_boundary(m.outer_point),
            winding: m.winding,
        });
        Ok(MarkedAnnulus { annulus, marking })
    }
}

fn midpoint_at(
    annulus: &MoebiusAnnulus,
    outer_point: &ChartPoint,
    winding: f64,
    tol: &Tolerances,
) -> Result<ChartPoint> {
    let norm = normalize_annulus(annulus, Some(*outer_point), tol)?;
    let r = (-0.5 * norm.modulus).exp();
    let angle = -std::f64::consts::PI * winding;
    let mid = ChartPoint::finite(r * angle.cos(), r * angle.sin(), 0.0);
    Ok(norm.map.inverse().apply_boundary(mid))
}

/// A pairing must send the marked arc of `from` onto the reversed marked arc
/// of `to`, which forces the windings to be opposite. At a half turn the two
/// boundary points coincide for either sign, so both are accepted there.
fn check_winding_compatibility(w1: f64, w2: f64) -> Result<()> {
    let s = w1 + w2;
    if s.abs() <= WINDING_TOL {
        return Ok(());
    }
    if (s.abs() - 1.0).abs() <= WINDING_TOL && (w1.abs() - 0.5).abs() <= WINDING_TOL {
        return Ok(());
    }
    Err(Error::InvalidSpec(format!(
        "marking windings {w1} and {w2} are not opposite, so the marked arcs cannot correspond"
    )))
}

/// The boundary-swapping map of the normalized band of modulus `-ln rho`:
/// a half turn about the geometric-mean circle, composed with a twist that
/// accounts for the angular position of the inner marked endpoint.
fn standard_swap(rho: f64, winding: f64) -> Result<MoebiusElement> {
    let unit = Sphere::from_center_radius(Vec3::zeros(), 1.0, Side::Inside)?;
    let plane = Sphere::from_plane(Vec3::z(), 0.0, Side::Inside)?;
    let swap = MoebiusElement::inversion_pair(unit.vector(), plane.vector())?;
    let scale = MoebiusElement::scaling(rho)?;
    let twist = MoebiusElement::rotation(Vec3::z(), std::f64::consts::TAU * winding)?;
    Ok(twist.compose(&scale).compose(&swap))
}

/// How far `g` is from being the exact pairing of `from` onto `to`: the
/// worst of the boundary-circle correspondences, the oriented carrier
/// correspondence, and the two marked-endpoint correspondences.
///
/// The carrier check is one-sided: a face pairing glues the designated side
/// of `from`'s carrier to the undesignated side of `to`'s, so the image of
/// the `from` carrier vector must be the negative of the `to` carrier
/// vector, not merely parallel to it.
pub fn pairing_residual(
    g: &MoebiusElement,
    from: &MarkedAnnulus,
    to: &MarkedAnnulus,
    tol: &Tolerances,
) -> Result<f64> {
    let m1 = from.required_marking()?;
    let m2 = to.required_marking()?;
    let fa = from.annulus();
    let ta = to.annulus();
    let mut worst = fa.inner().transform(g).plane_distance(ta.outer());
    worst = worst.max(fa.outer().transform(g).plane_distance(ta.inner()));
    let a = g.apply_vector(fa.carrier().vector());
    let b = ta.carrier().vector();
    worst = worst.max((a + b).norm() / b.norm());
    let x1 = from.inner_point(tol)?;
    let x2 = to.inner_point(tol)?;
    worst = worst.max(g.apply_boundary(x1).spherical_distance(&m2.outer_point));
    worst = worst.max(g.apply_boundary(m1.outer_point).spherical_distance(&x2));
    Ok(worst)
}

/// Solves for the unique Moebius transformation carrying the marked face
/// `from` onto the marked face `to` with boundary roles exchanged: the inner
/// circle of `from` goes to the outer circle of `to` and vice versa, and the
/// marked arcs correspond with orientation reversed.
///
/// The carriers are glued with opposite designations: the designated side of
/// `from`'s carrier maps onto the undesignated side of `to`'s. For faces of
/// a polyhedron bounded by inside-designated spheres this is the usual
/// convention that the pairing carries the ball bounded by one face onto the
/// complement of the ball bounded by its partner. Two coplanar concentric
/// bands glued by a scaling therefore designate opposite sides of the plane.
///
/// The construction composes the two face normalizations with the standard
/// boundary swap of the common normalized band.
pub fn solve_face_pairing(
    from: &MarkedAnnulus,
    to: &MarkedAnnulus,
    tol: &Tolerances,
) -> Result<MoebiusElement> {
    let m1 = from.required_marking()?;
    let m2 = to.required_marking()?;
    let l1 = from.annulus().modulus();
    let l2 = to.annulus().modulus();
    if (l1 - l2).abs() > tol.modulus {
        return Err(Error::ModulusMismatch(l1, l2));
    }
    check_winding_compatibility(m1.winding, m2.winding)?;
    let n1 = normalize_annulus(from.annulus(), Some(m1.outer_point), tol)?;
    let n2 = normalize_annulus(to.annulus(), Some(m2.outer_point), tol)?;
    let rho = (-0.5 * (l1 + l2)).exp();
    let h = standard_swap(rho, m1.winding)?;
    let g = n2.map.inverse().compose(&h).compose(&n1.map).renormalized();
    let residual = pairing_residual(&g, from, to, tol)?;
    if residual > SOLVER_GUARD {
        return Err(Error::SolverFailure(format!(
            "face pairing residual {residual:.3e} after normalization composition"
        )));
    }
    Ok(g)
}

/// The unique orientation-preserving Moebius map sending the reference
/// triple (origin, (1,0,0), infinity) to `(p, q, r)`.
///
/// Lifts of the three points are rescaled so that the matrix with those
/// lifts in its null columns is J-orthogonal; the remaining columns come
/// from the orthogonal complement.
pub fn triple_frame(
    p: &ChartPoint,
    q: &ChartPoint,
    r: &ChartPoint,
    tol: &Tolerances,
) -> Result<MoebiusElement> {
    let lp = normalized_lift(p);
    let lq = normalized_lift(q);
    let lr = normalized_lift(r);
    let bpr = form(&lp, &lr);
    let bqp = form(&lq, &lp);
    let bqr = form(&lq, &lr);
    if bpr >= -1e-14 || bqp >= -1e-14 || bqr >= -1e-14 {
        return Err(Error::Degenerate(
            "anchoring a frame needs three pairwise distinct points".into(),
        ));
    }
    let prod = -2.0 / bpr;
    let ratio = bqp / bqr;
    let s1 = (prod / ratio).sqrt();
    let s2 = (prod * ratio).sqrt();
    let l1 = lp * s1;
    let l2 = lr * s2;
    let a = -form(&lq, &l2) / 2.0;
    let b = -form(&lq, &l1) / 2.0;
    let rvec = lq - l1 * a - l2 * b;
    let c2 = quad(&rvec);
    if c2 <= 1e-20 {
        return Err(Error::Degenerate(
            "middle point is numerically collinear with the endpoints".into(),
        ));
    }
    let w = rvec / c2.sqrt();
    let [w2, w3] = plane_orthogonal_to_space(&[l1, l2, w]);
    let col0 = (l1 + l2) / 2.0;
    let col4 = (l2 - l1) / 2.0;
    let mut m = Mat5::from_columns(&[col0, w, w2, w3, col4]);
    if m.determinant() < 0.0 {
        m = Mat5::from_columns(&[col0, w, w2, -w3, col4]);
    }
    MoebiusElement::from_matrix(m, tol)
}

/// Independent pairing solver: places the marked triple of `from` (inner
/// endpoint, arc midpoint, outer endpoint) onto the reversed marked triple
/// of `to` by composing two frames, then aligns the carriers with the
/// one-parameter stabilizer of the target circle.
pub fn solve_face_pairing_by_placement(
    from: &MarkedAnnulus,
    to: &MarkedAnnulus,
    tol: &Tolerances,
) -> Result<MoebiusElement> {
    let m1 = from.required_marking()?;
    let m2 = to.required_marking()?;
    let l1 = from.annulus().modulus();
    let l2 = to.annulus().modulus();
    if (l1 - l2).abs() > tol.modulus {
        return Err(Error::ModulusMismatch(l1, l2));
    }
    check_winding_compatibility(m1.winding, m2.winding)?;

    let x1 = from.inner_point(tol)?;
    let y1 = m1.outer_point;
    let mid1 = midpoint_at(from.annulus(), &y1, m1.winding, tol)?;
    let x2 = to.inner_point(tol)?;
    let y2 = m2.outer_point;
    // The image of the marked arc of `from` always has winding -w1 on `to`;
    // at a half turn this may differ from the declared winding by a full
    // turn of sign, so the midpoint is placed with the effective value.
    let mid2 = midpoint_at(to.annulus(), &y2, -m1.winding, tol)?;

    let f1 = triple_frame(&x1, &mid1, &y1, tol)?;
    let f2 = triple_frame(&y2, &mid2, &x2, tol)?;
    let g0 = f2.compose(&f1.inverse());

    let c2 = Circle::through_points(&y2, &mid2, &x2)?;
    let [u2, v2] = c2.plane();
    let image = g0.apply_vector(from.annulus().carrier().vector());
    let target = to.annulus().carrier().vector();
    let angle_of = |s: &crate::lorentz::Vec5| form(s, &v2).atan2(form(s, &u2));
    let base = angle_of(&image);
    let mut best: Option<(f64, MoebiusElement)> = None;
    for sign in [1.0, -1.0] {
        let t = angle_of(&(target * sign)) - base;
        let cand = c2.rotation_about(t, tol)?.compose(&g0).renormalized();
        let res = pairing_residual(&cand, from, to, tol)?;
        if best.as_ref().is_none_or(|(b, _)| res < *b) {
            best = Some((res, cand));
        }
    }
    let (res, g) = best.expect("both stabilizer candidates were evaluated");
    if res > SOLVER_GUARD * 10.0 {
        return Err(Error::SolverFailure(format!(
            "three-point placement left residual {res:.3e}"
        )));
    }
    Ok(g)
}

/// A complete face pairing of a necklace polyhedron: a fixed-point-free
/// involution on face indices and one solved element per face, with
/// `elements[j] = elements[i].inverse()` for paired `i, j`.
#[derive(Debug, Clone)]
pub struct FacePairing {
    partner: Vec<usize>,
    elements: Vec<MoebiusElement>,
    markings: Vec<MarkedAnnulus>,
}

impl FacePairing {
    /// Solves every pairing `i -> partner[i]`, keeping the convention that
    /// the element stored at the smaller index maps its face onto the
    /// partner face.
    pub fn solve(
        markings: Vec<MarkedAnnulus>,
        partner: Vec<usize>,
        tol: &Tolerances,
    ) -> Result<Self> {
        let n = markings.len();
        if n == 0 || partner.len() != n {
            return Err(Error::InvalidSpec(format!(
                "pairing involution covers {} faces but {} are marked",
                partner.len(),
                n
            )));
        }
        for (i, &j) in partner.iter().enumerate() {
            if j >= n || j == i || partner[j] != i {
                return Err(Error::InvalidSpec(format!(
                    "face pairing must be a fixed-point-free involution; fails at face {i}"
                )));
            }
        }
        let mut elements = vec![MoebiusElement::identity(); n];
        for i in 0..n {
            let j = partner[i];
            if i < j {
                let g = solve_face_pairing(&markings[i], &markings[j], tol)?;
                elements[i] = g;
                elements[j] = g.inverse();
            }
        }
        Ok(FacePairing { partner, elements, markings })
    }

    pub fn len(&self) -> usize {
        self.partner.len()
    }

    pub fn is_empty(&self) -> bool {
        self.partner.is_empty()
    }

    pub fn partner(&self, i: usize) -> usize {
        self.partner[i]
    }

    /// The element mapping face `i` onto its partner face.
    pub fn element(&self, i: usize) -> &MoebiusElement {
        &self.elements[i]
    }

    pub fn elements(&self) -> &[MoebiusElement] {
        &self.elements
    }

    pub fn markings(&self) -> &[MarkedAnnulus] {
        &self.markings
    }
}

/// Markings for every face of a necklace, produced by transporting a seed
/// point around the cyclic face order at winding zero.
#[derive(Debug, Clone)]
pub struct MarkingChain {
    pub markings: Vec<MarkedAnnulus>,
    /// Spherical distance between the transported point after a full loop
    /// and the seed. Not enforced here: callers decide how much drift their
    /// construction tolerates, and deliberately broken configurations are
    /// still useful for cycle-failure diagnostics.
    pub closure_residual: f64,
}

/// Transports `seed` (default: the lexicographic maximum of the first edge)
/// across each face in order at winding zero and marks every face with the
/// transported point on its outer edge.
pub fn propagate_markings(
    polyhedron: &NecklacePolyhedron,
    seed: Option<ChartPoint>,
    tol: &Tolerances,
) -> Result<MarkingChain> {
    let faces = polyhedron.faces();
    let edges = polyhedron.edges();
    let n = faces.len();
    if n == 0 {
        return Err(Error::InvalidSpec("cannot mark an empty necklace".into()));
    }
    let start = match seed {
        Some(q) => {
            if !edges[0].contains(&q, tol) {
                return Err(Error::InvalidPoint(
                    "marking seed does not lie on the first edge circle".into(),
                ));
            }
            q
        }
        None => edges[0].lex_max_point(tol),
    };
    let mut pts = Vec::with_capacity(n + 1);
    pts.push(start);
    for i in 0..n {
        let next = outer_partner(&faces[i], &pts[i], 0.0, tol)?;
        pts.push(next);
    }
    let closure_residual = pts[n].spherical_distance(&pts[0]);
    let mut markings = Vec::with_capacity(n);
    for (i, face) in faces.iter().enumerate() {
        markings.push(MarkedAnnulus::new(
            *face,
            Marking { outer_point: pts[i + 1], winding: 0.0 },
            tol,
        )?);
    }
    Ok(MarkingChain { markings, closure_residual })
}

/// One edge cycle of a face pairing and the composed return map around it.
#[derive(Debug, Clone)]
pub struct CycleCheck {
    /// Faces visited, in the order their pairing elements are applied.
    pub corners: Vec<usize>,
    pub return_map: MoebiusElement,
    pub matrix_residual: f64,
    /// Worst displacement of three probe points on the starting edge.
    pub point_residual: f64,
    /// Largest matrix norm among the partial products of the cycle.
    pub peak_partial_norm: f64,
    /// Tolerance the residuals were held to, after conditioning scaling.
    pub gate: f64,
    pub passes: bool,
}

/// Conditioning floor for a product of `len` group elements whose partial
/// products reach matrix norm `peak`. Rounding an exact element to f64
/// already perturbs entries by `eps * peak`, and each such perturbation is
/// amplified by the flanking partial products, so no evaluation of the
/// product can be expected closer to the identity than roughly
/// `len * eps * peak^2`. The factor 32 gives headroom over the idealized
/// bound while staying orders of magnitude below any genuine mismatch.
fn product_conditioning_floor(len: usize, peak: f64) -> f64 {
    32.0 * len as f64 * f64::EPSILON * peak * peak
}

/// Composes the pairing elements around every edge cycle and checks that
/// each return map is the identity: the matrix must be near the identity
/// and must fix three probe points of the starting edge. The tolerance is
/// `tol.cycle`, widened to the conditioning floor of the cycle product when
/// the partial products have large norm: necklaces whose faces are far
/// apart in the chart produce pairing matrices of norm 1e4 or more, and a
/// 28-fold product of such matrices cannot float-evaluate to the identity
/// more closely than about 1e-5 even when the group relation is exact.
pub fn verify_edge_cycles(
    polyhedron: &NecklacePolyhedron,
    pairing: &FacePairing,
    tol: &Tolerances,
) -> Result<(Vec<CycleCheck>, bool)> {
    let n = polyhedron.faces().len();
    if pairing.len() != n {
        return Err(Error::InvalidSpec(format!(
            "pairing covers {} faces but the polyhedron has {n}",
            pairing.len()
        )));
    }
    let sigma = |c: usize| pairing.partner(c);
    let cycles = corner_cycles(&sigma, n);
    let mut checks = Vec::with_capacity(cycles.len());
    let mut all = true;
    for cycle in cycles {
        let mut acc = MoebiusElement::identity();
        let mut peak = 1.0f64;
        for &c in &cycle {
            acc = pairing.element(c).compose(&acc);
            peak = peak.max(acc.matrix().norm());
        }
        let matrix_residual = acc.distance_from_identity();
        let edge = &polyhedron.edges()[cycle[0]];
        let frame = edge.frame();
        let mut point_residual = 0.0f64;
        for k in 0..3 {
            let probe = edge.point_at(&frame, k as f64 * std::f64::consts::TAU / 3.0);
            point_residual = point_residual.max(acc.apply_boundary(probe).spherical_distance(&probe));
        }
        let gate = tol.cycle.max(product_conditioning_floor(cycle.len(), peak));
        let point_gate = (tol.chart * 10.0).max(gate);
        let passes = matrix_residual <= gate && point_residual <= point_gate;
        all &= passes;
        checks.push(CycleCheck {
            corners: cycle,
            return_map: acc,
            matrix_residual,
            point_residual,
            peak_partial_norm: peak,
            gate,
            passes,
        });
    }
    Ok((checks, all))
}

/// A word in the standard surface-group generators, stored as signed
/// 1-based generator numbers: letter `2k-1` is `A_k`, letter `2k` is `B_k`,
/// and negation means inversion.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupWord(Vec<i32>);

impl GroupWord {
    pub fn new(letters: Vec<i32>) -> Result<Self> {
        if letters.contains(&0) {
            return Err(Error::WordParse(
                format!("{letters:?}"),
                "letters are signed 1-based generator numbers; 0 has no meaning".into(),
            ));
        }
        Ok(GroupWord(letters))
    }

    pub fn letters(&self) -> &[i32] {
        &self.0
    }

    /// Parses text like `"A1 B1 A1' B1'"`: a letter `A` or `B` (case
    /// insensitive), a 1-based handle number, and an optional apostrophe for
    /// the inverse. Whitespace is optional.
    pub fn parse(text: &str) -> Result<Self> {
        let mut letters = Vec::new();
        let mut it = text.char_indices().peekable();
        while let Some((pos, c)) = it.next() {
            if c.is_whitespace() {
                continue;
            }
            let base = match c.to_ascii_uppercase() {
                'A' => 0i32,
                'B' => 1,
                _ => {
                    return Err(Error::WordParse(
                        text.into(),
                        format!("unexpected character {c:?} at byte {pos}"),
                    ))
                }
            };
            let mut digits = String::new();
            while let Some(&(_, d)) = it.peek() {
                if d.is_ascii_digit() {
                    digits.push(d);
                    it.next();
                } else {
                    break;
                }
            }
            if digits.is_empty() {
                return Err(Error::WordParse(
                    text.into(),
                    format!("generator letter at byte {pos} needs a handle number"),
                ));
            }
            let handle: u32 = digits.parse().map_err(|_| {
                Error::WordParse(text.into(), format!("handle number {digits:?} overflows"))
            })?;
            if handle == 0 || handle > 100_000 {
                return Err(Error::WordParse(
                    text.into(),
                    format!("handle number {handle} outside 1..=100000"),
                ));
            }
            let mut letter = 2 * (handle as i32 - 1) + base + 1;
            if let Some(&(_, '\'')) = it.peek() {
                it.next();
                letter = -letter;
            }
            letters.push(letter);
        }
        Ok(GroupWord(letters))
    }

    pub fn to_text(&self) -> String {
        self.0
            .iter()
            .map(|&l| {
                let idx = l.unsigned_abs() - 1;
                let handle = idx / 2 + 1;
                let letter = if idx % 2 == 0 { 'A' } else { 'B' };
                let inv = if l < 0 { "'" } else { "" };
                format!("{letter}{handle}{inv}")
            })
            .collect::<Vec<_>>()
            .join(" ")
    }
}

fn commutator(a: &MoebiusElement, b: &MoebiusElement) -> MoebiusElement {
    a.compose(b).compose(&a.inverse()).compose(&b.inverse())
}

/// A genus-g surface group in SO+(4,1), generated by handle pairs
/// `A_1, B_1, ..., A_g, B_g` satisfying the product-of-commutators relation.
#[derive(Debug, Clone)]
pub struct SurfaceGroup {
    generators: Vec<MoebiusElement>,
}

impl SurfaceGroup {
    /// Validates the generator count and the surface relation
    /// `[A_1,B_1]...[A_g,B_g] = 1` before accepting the group. The residual
    /// is held to `tol.rel` or to the evaluation's conditioning floor,
    /// whichever is larger: a genuine non-relation misses the identity by
    /// orders of magnitude more than either.
    pub fn new(generators: Vec<MoebiusElement>, tol: &Tolerances) -> Result<Self> {
        if generators.is_empty() || generators.len() % 2 != 0 {
            return Err(Error::InvalidSpec(format!(
                "a genus-g group needs 2g generators, got {}",
                generators.len()
            )));
        }
        let group = SurfaceGroup { generators };
        let res = group.relator_residual();
        let gate = tol.rel.max(group.relator_floor());
        if res > gate {
            return Err(Error::InvalidSpec(format!(
                "surface relator fails to close: residual {res:.3e} exceeds {gate:.3e}"
            )));
        }
        Ok(group)
    }

    pub fn genus(&self) -> usize {
        self.generators.len() / 2
    }

    pub fn generators(&self) -> &[MoebiusElement] {
        &self.generators
    }

    /// The handle generator `A_k`, `k` starting at 1.
    ///
    /// Panics when `k` is outside `1..=genus`.
    pub fn a(&self, k: usize) -> &MoebiusElement {
        assert!(
            k >= 1 && k <= self.genus(),
            "handle index {k} outside 1..={}",
            self.genus()
        );
        &self.generators[2 * (k - 1)]
    }

    /// The handle generator `B_k`, `k` starting at 1.
    ///
    /// Panics when `k` is outside `1..=genus`.
    pub fn b(&self, k: usize) -> &MoebiusElement {
        assert!(
            k >= 1 && k <= self.genus(),
            "handle index {k} outside 1..={}",
            self.genus()
        );
        &self.generators[2 * k - 1]
    }

    /// The relator product `[A_1,B_1]...[A_g,B_g]`, evaluated one letter at
    /// a time by left multiplication starting from the last letter. This
    /// order keeps every partial product equal to a suffix of the relator
    /// word, whose norms stay within the group's own scale; evaluating
    /// commutator by commutator instead forms intermediate products like
    /// `A_k B_k` whose norms are the product of the factors' norms, and for
    /// large-norm generators that bracketing loses several digits.
    pub fn relator(&self) -> MoebiusElement {
        self.relator_eval().0
    }

    pub fn relator_residual(&self) -> f64 {
        self.relator().distance_from_identity()
    }

    /// Conditioning floor for the relator evaluation: the closest approach
    /// to the identity that can be expected from f64 arithmetic given the
    /// norms the partial products reach. Groups built from small matrices
    /// have a floor far below any practical tolerance; necklace groups with
    /// generator norms around 1e4 have a floor near 1e-5.
    pub fn relator_floor(&self) -> f64 {
        let (_, peak) = self.relator_eval();
        product_conditioning_floor(4 * self.genus(), peak)
    }

    fn relator_eval(&self) -> (MoebiusElement, f64) {
        let word = self.relator_word();
        let mut acc = MoebiusElement::identity();
        let mut peak = 1.0f64;
        for &l in word.letters().iter().rev() {
            let idx = l.unsigned_abs() as usize - 1;
            let g = if l > 0 { self.generators[idx] } else { self.generators[idx].inverse() };
            acc = g.compose(&acc);
            peak = peak.max(acc.matrix().norm());
        }
        (acc, peak)
    }

    /// The relator as a word: `A1 B1 A1' B1' A2 B2 A2' B2' ...`.
    pub fn relator_word(&self) -> GroupWord {
        let mut letters = Vec::with_capacity(4 * self.genus());
        for k in 1..=self.genus() as i32 {
            letters.extend_from_slice(&[2 * k - 1, 2 * k, -(2 * k - 1), -(2 * k)]);
        }
        GroupWord(letters)
    }

    /// Evaluates a word left to right: `"A1 B1"` is `A_1` composed with
    /// `B_1`, with the rightmost letter acting first on points. The empty
    /// word is the identity.
    pub fn evaluate(&self, word: &GroupWord) -> Result<MoebiusElement> {
        let mut acc = MoebiusElement::identity();
        for &l in word.letters() {
            let idx = l.unsigned_abs() as usize - 1;
            if idx >= self.generators.len() {
                return Err(Error::WordParse(
                    word.to_text(),
                    format!(
                        "word uses generator {} but the group has genus {}",
                        word_letter_name(l),
                        self.genus()
                    ),
                ));
            }
            let g = if l > 0 { self.generators[idx] } else { self.generators[idx].inverse() };
            acc = acc.compose(&g);
        }
        Ok(acc)
    }

    pub fn evaluate_word(&self, text: &str) -> Result<MoebiusElement> {
        self.evaluate(&GroupWord::parse(text)?)
    }
}

fn word_letter_name(l: i32) -> String {
    let idx = l.unsigned_abs() - 1;
    let handle = idx / 2 + 1;
    let letter = if idx % 2 == 0 { 'A' } else { 'B' };
    format!("{letter}{handle}")
}

/// Reads the standard handle generators off a solved face pairing whose
/// involution follows the alternating four-face blocks
/// `4b <-> 4b+2`, `4b+1 <-> 4b+3`.
///
/// Per block, `A` is the element mapping face `4b+2` onto face `4b` and `B`
/// the one mapping face `4b+1` onto face `4b+3`. The edge cycle applies, in
/// order, the maps stored at faces `4b, 4b+3, 4b+2, 4b+1`, which composes to
/// the commutator `[B, A]` per block; the full cycle product is the inverse
/// of the commutator relator, so the relator closes exactly when the cycle
/// does.
pub fn surface_group_from_pairing(
    pairing: &FacePairing,
    tol: &Tolerances,
) -> Result<SurfaceGroup> {
    let n = pairing.len();
    if n < 4 || n % 4 != 0 {
        return Err(Error::SchemeMismatch(format!(
            "alternating handle blocks need a multiple of four faces, got {n}"
        )));
    }
    for b in 0..n / 4 {
        if pairing.partner(4 * b) != 4 * b + 2 || pairing.partner(4 * b + 1) != 4 * b + 3 {
            return Err(Error::SchemeMismatch(format!(
                "face pairing does not follow the alternating handle blocks at block {b}"
            )));
        }
    }
    let mut generators = Vec::with_capacity(n / 2);
    for b in 0..n / 4 {
        generators.push(*pairing.element(4 * b + 2));
        generators.push(*pairing.element(4 * b + 1));
    }
    SurfaceGroup::new(generators, tol)
}

/// Earthquake along the nonseparating curve dual to handle `k`: replaces
/// `B_k` by `B_k c` for a twist `c` in the centralizer of `A_k`. The surface
/// relation survives exactly because `c` commutes with `A_k`.
pub fn earthquake_nonseparating(
    group: &SurfaceGroup,
    k: usize,
    twist: &MoebiusElement,
    tol: &Tolerances,
) -> Result<SurfaceGroup> {
    let genus = group.genus();
    if k == 0 || k > genus {
        return Err(Error::InvalidSpec(format!(
            "handle index {k} outside 1..={genus}"
        )));
    }
    let res = commutation_residual(group.a(k), twist);
    if res > tol.comm {
        return Err(Error::NotInCentralizer(res));
    }
    let mut generators = group.generators().to_vec();
    generators[2 * k - 1] = generators[2 * k - 1].compose(twist);
    SurfaceGroup::new(generators, tol)
}

/// Earthquake along the separating curve splitting off the first `k`
/// handles: conjugates those handles by a twist `c` commuting with the
/// partial commutator product `[A_1,B_1]...[A_k,B_k]`.
pub fn earthquake_separating(
    group: &SurfaceGroup,
    k: usize,
    twist: &MoebiusElement,
    tol: &Tolerances,
) -> Result<SurfaceGroup> {
    let genus = group.genus();
    if k == 0 || k >= genus {
        return Err(Error::InvalidSeparatingIndex { k, genus });
    }
    let mut prefix = MoebiusElement::identity();
    for i in 1..=k {
        prefix = prefix.compose(&commutator(group.a(i), group.b(i)));
    }
    let res = commutation_residual(&prefix, twist);
    if res > tol.comm {
        return Err(Error::NotInCentralizer(res));
    }
    let mut generators = group.generators().to_vec();
    for g in generators.iter_mut().take(2 * k) {
        *g = g.conjugate_by(twist);
    }
    SurfaceGroup::new(generators, tol)
}

/// A one-parameter twist from the centralizer of `of`: the exponential of
/// `t` times the `basis_index`-th commuting-algebra basis element.
pub fn centralizer_element(
    of: &MoebiusElement,
    basis_index: usize,
    t: f64,
    tol: &Tolerances,
) -> Result<MoebiusElement> {
    let basis = centralizer_generators(of, tol)?;
    if basis_index >= basis.len() {
        return Err(Error::InvalidSpec(format!(
            "centralizer basis index {basis_index} out of range: dimension is {}",
            basis.len()
        )));
    }
    Ok(exp_so41(&basis[basis_index], t))
}

/// The two boundary fixed points of a loxodromic, attracting first,
/// polished by power iteration so that maps built from them commute with
/// the element to near machine precision.
pub fn loxodromic_axis_points(
    g: &MoebiusElement,
    tol: &Tolerances,
) -> Result<(ChartPoint, ChartPoint)> {
    let cls = classify(g, tol);
    if cls.kind != ElementKind::Loxodromic {
        return Err(Error::InvalidSpec(format!(
            "axis endpoints need a loxodromic element, got {:?}",
            cls.kind
        )));
    }
    if cls.fixed_points.len() != 2 {
        return Err(Error::Degenerate(
            "classification reported an unexpected fixed-point count".into(),
        ));
    }
    let att = polish_fixed_point(g, cls.fixed_points[0]);
    let rep = polish_fixed_point(&g.inverse(), cls.fixed_points[1]);
    Ok((att, rep))
}

fn polish_fixed_point(g: &MoebiusElement, start: ChartPoint) -> ChartPoint {
    let mut p = start;
    for _ in 0..200 {
        let q = g.apply_boundary(p);
        if q.spherical_distance(&p) < 1e-15 {
            return q;
        }
        p = q;
    }
    p
}

/// One point of a degeneration path: the sphere configuration and,
/// optionally, the worst edge-cycle residual of a holonomy solved there.
#[derive(Debug, Clone)]
pub struct ScanSample {
    pub spheres: Vec<Sphere>,
    pub cycle_residual: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScanEventKind {
    /// A non-adjacent sphere pair reached inversive distance 1.
    Tangency { i: usize, j: usize },
    /// An adjacent sphere pair stopped meeting transversally.
    NecklaceBroken { i: usize, j: usize },
    /// The edge-cycle residual crossed the verification threshold.
    CycleResidual { value: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanEvent {
    pub parameter: f64,
    pub kind: ScanEventKind,
}

/// Minimal separation margin over non-adjacent pairs and minimal crossing
/// margin over cyclically adjacent pairs, each with its critical pair.
fn sphere_margins(spheres: &[Sphere]) -> ((f64, (usize, usize)), (f64, (usize, usize))) {
    let n = spheres.len();
    let mut sep = (f64::INFINITY, (0, 0));
    let mut cross = (f64::INFINITY, (0, 0));
    for i in 0..n {
        for j in i + 1..n {
            let b = form(spheres[i].vector(), spheres[j].vector());
            let adjacent = j == i + 1 || (i == 0 && j == n - 1);
            if adjacent {
                let m = 1.0 - b.abs();
                if m < cross.0 {
                    cross = (m, (i, j));
                }
            } else {
                let m = -b - 1.0;
                if m < sep.0 {
                    sep = (m, (i, j));
                }
            }
        }
    }
    (sep, cross)
}

fn first_crossing(
    path: &dyn Fn(f64) -> Result<ScanSample>,
    params: &[f64],
    values: &[f64],
    value_of: &dyn Fn(&ScanSample) -> f64,
) -> Result<Option<f64>> {
    if values[0] <= 0.0 {
        return Ok(Some(params[0]));
    }
    for k in 1..values.len() {
        if values[k] <= 0.0 {
            let (mut lo, mut hi) = (params[k - 1], params[k]);
            for _ in 0..80 {
                if (hi - lo).abs() <= SCAN_BRACKET {
                    break;
                }
                let mid = 0.5 * (lo + hi);
                if value_of(&path(mid)?) > 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            return Ok(Some(0.5 * (lo + hi)));
        }
    }
    Ok(None)
}

/// Samples `path` at `steps + 1` evenly spaced parameters and reports, for
/// each degeneration kind, the first parameter where its margin crosses
/// zero, bisected to within `1e-6`. Events are sorted by parameter; at most
/// one event per kind is reported.
pub fn degeneration_scan(
    path: &dyn Fn(f64) -> Result<ScanSample>,
    start: f64,
    end: f64,
    steps: usize,
    tol: &Tolerances,
) -> Result<Vec<ScanEvent>> {
    if steps == 0 || !start.is_finite() || !end.is_finite() || start == end {
        return Err(Error::InvalidSpec(
            "a degeneration scan needs a nondegenerate parameter interval and at least one step"
                .into(),
        ));
    }
    let params: Vec<f64> = (0..=steps)
        .map(|k| start + (end - start) * k as f64 / steps as f64)
        .collect();
    let samples: Vec<ScanSample> = params
        .iter()
        .map(|&t| path(t))
        .collect::<Result<Vec<_>>>()?;
    let n = samples[0].spheres.len();
    if samples.iter().any(|s| s.spheres.len() != n) {
        return Err(Error::InvalidSpec(
            "the sphere count must stay constant along a degeneration path".into(),
        ));
    }

    let mut events = Vec::new();

    let sep_of = |s: &ScanSample| sphere_margins(&s.spheres).0 .0;
    let sep_values: Vec<f64> = samples.iter().map(&sep_of).collect();
    if let Some(t) = first_crossing(path, &params, &sep_values, &sep_of)? {
        let (_, (i, j)) = sphere_margins(&path(t)?.spheres).0;
        events.push(ScanEvent { parameter: t, kind: ScanEventKind::Tangency { i, j } });
    }

    let cross_of = |s: &ScanSample| sphere_margins(&s.spheres).1 .0;
    let cross_values: Vec<f64> = samples.iter().map(&cross_of).collect();
    if let Some(t) = first_crossing(path, &params, &cross_values, &cross_of)? {
        let (_, (i, j)) = sphere_margins(&path(t)?.spheres).1;
        events.push(ScanEvent { parameter: t, kind: ScanEventKind::NecklaceBroken { i, j } });
    }

    let threshold = tol.cycle;
    let residuals: Vec<Option<f64>> = samples.iter().map(|s| s.cycle_residual).collect();
    'cycle: for k in 1..residuals.len() {
        if let (Some(prev), Some(cur)) = (residuals[k - 1], residuals[k]) {
            if prev <= threshold && cur > threshold {
                let (mut lo, mut hi) = (params[k - 1], params[k]);
                for _ in 0..80 {
                    if (hi - lo).abs() <= SCAN_BRACKET {
                        break;
                    }
                    let mid = 0.5 * (lo + hi);
                    let r = path(mid)?.cycle_residual.ok_or_else(|| {
                        Error::InvalidSpec(
                            "path stopped reporting cycle residuals mid-scan".into(),
                        )
                    })?;
                    if r <= threshold {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                let t = 0.5 * (lo + hi);
                let value = path(t)?.cycle_residual.unwrap_or(f64::NAN);
                events.push(ScanEvent { parameter: t, kind: ScanEventKind::CycleResidual { value } });
                break 'cycle;
            }
        }
    }

    events.sort_by(|a, b| a.parameter.total_cmp(&b.parameter));
    Ok(events)
}
