//! Necklaces of balls whose complement is a cornerless solid-torus
//! polyhedron with Moebius-annulus faces, polygon identification schemes,
//! and the 28-sphere bead-chain construction with its parameter solver.

use crate::conformal::{dihedral_angle, Circle, MoebiusAnnulus, Side, Sphere};
use crate::error::{Error, NecklaceViolationKind, Result};
use crate::lorentz::{form, MoebiusElement, Vec3};
use crate::tol::Tolerances;
use serde::{Deserialize, Serialize};

/// A cyclic list of balls in which consecutive balls overlap and all other
/// pairs have disjoint closures. The complement of the union is then a solid
/// torus bounded by one annulus per sphere.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NecklaceSpec {
    balls: Vec<Sphere>,
    /// Positions of the dedicated closing balls, when the necklace was built
    /// by closing an open chain: `[first, last, cap]`.
    closing_indices: Option<[usize; 3]>,
}

impl NecklaceSpec {
    pub fn new(balls: Vec<Sphere>) -> Result<Self> {
        if balls.len() < 4 || balls.len() % 2 != 0 {
            return Err(Error::InvalidSpec(format!(
                "a necklace needs an even number of balls, at least 4, got {}",
                balls.len()
            )));
        }
        Ok(NecklaceSpec { balls, closing_indices: None })
    }

    pub fn with_closing_indices(mut self, closing: [usize; 3]) -> Self {
        self.closing_indices = Some(closing);
        self
    }

    pub fn balls(&self) -> &[Sphere] {
        &self.balls
    }

    pub fn len(&self) -> usize {
        self.balls.len()
    }

    pub fn is_empty(&self) -> bool {
        self.balls.is_empty()
    }

    pub fn closing_indices(&self) -> Option<[usize; 3]> {
        self.closing_indices
    }

    /// Checks the adjacency pattern: cyclically consecutive balls must cross
    /// (signed pairing in (-1, 1)), everyone else must have disjoint closures
    /// (signed pairing below -1). Tangent neighbors are reported as a
    /// degenerate edge, everything else as a necklace violation.
    pub fn validate(&self, tol: &Tolerances) -> Result<()> {
        let n = self.balls.len();
        for i in 0..n {
            for j in (i + 1)..n {
                let adjacent = j == i + 1 || (i == 0 && j == n - 1);
                let b = form(self.balls[i].vector(), self.balls[j].vector());
                if adjacent {
                    if b.abs() < 1.0 - tol.sep {
                        continue;
                    }
                    if b.abs() <= 1.0 + tol.sep {
                        // Edge shared by balls i and j is edges[j] for
                        // consecutive (i, j), and edges[0] for the wrap pair.
                        let edge = if i == 0 && j == n - 1 { 0 } else { j };
                        return Err(Error::DegenerateEdge(edge));
                    }
                    return Err(Error::NecklaceViolation {
                        i,
                        j,
                        kind: NecklaceViolationKind::AdjacentDisjoint,
                    });
                }
                if b >= -1.0 - tol.sep {
                    return Err(Error::NecklaceViolation {
                        i,
                        j,
                        kind: NecklaceViolationKind::NonAdjacentIntersect,
                    });
                }
            }
        }
        Ok(())
    }

    pub fn transform(&self, g: &MoebiusElement) -> NecklaceSpec {
        NecklaceSpec {
            balls: self.balls.iter().map(|s| s.transform(g)).collect(),
            closing_indices: self.closing_indices,
        }
    }
}

/// The solid-torus polyhedron cut out by a valid necklace: the complement of
/// the union of balls, with one annulus face per sphere and one circle edge
/// per adjacent pair. `edges[i]` is shared by `faces[i - 1]` and `faces[i]`;
/// `faces[i]` is bounded by `edges[i]` and `edges[i + 1]` (indices cyclic).
#[derive(Debug, Clone)]
pub struct NecklacePolyhedron {
    balls: Vec<Sphere>,
    edges: Vec<Circle>,
    faces: Vec<MoebiusAnnulus>,
    closing_indices: Option<[usize; 3]>,
}

pub fn build_polyhedron(spec: &NecklaceSpec, tol: &Tolerances) -> Result<NecklacePolyhedron> {
    spec.validate(tol)?;
    let n = spec.balls.len();
    let mut edges = Vec::with_capacity(n);
    for i in 0..n {
        let prev = &spec.balls[(i + n - 1) % n];
        edges.push(Circle::from_spheres(prev, &spec.balls[i])?);
    }
    let mut faces = Vec::with_capacity(n);
    for i in 0..n {
        faces.push(MoebiusAnnulus::new(
            spec.balls[i],
            edges[i],
            edges[(i + 1) % n],
            tol,
        )?);
    }
    Ok(NecklacePolyhedron {
        balls: spec.balls.clone(),
        edges,
        faces,
        closing_indices: spec.closing_indices,
    })
}

impl NecklacePolyhedron {
    pub fn face_count(&self) -> usize {
        self.faces.len()
    }

    pub fn balls(&self) -> &[Sphere] {
        &self.balls
    }

    pub fn edges(&self) -> &[Circle] {
        &self.edges
    }

    pub fn faces(&self) -> &[MoebiusAnnulus] {
        &self.faces
    }

    pub fn closing_indices(&self) -> Option<[usize; 3]> {
        self.closing_indices
    }

    pub fn spec(&self) -> NecklaceSpec {
        NecklaceSpec {
            balls: self.balls.clone(),
            closing_indices: self.closing_indices,
        }
    }

    /// Interior dihedral angle of the polyhedron at `edges[i]`, in (0, pi).
    pub fn dihedral_angle(&self, edge_index: usize, tol: &Tolerances) -> Result<f64> {
        let n = self.balls.len();
        let a = &self.balls[(edge_index + n - 1) % n];
        let b = &self.balls[edge_index % n];
        if form(a.vector(), b.vector()).abs() >= 1.0 - tol.sep {
            return Err(Error::DegenerateEdge(edge_index % n));
        }
        dihedral_angle(a, b, tol)
    }

    /// Sum of the interior dihedral angles over all edges.
    pub fn dihedral_sum(&self, tol: &Tolerances) -> Result<f64> {
        let mut total = 0.0;
        for i in 0..self.edges.len() {
            total += self.dihedral_angle(i, tol)?;
        }
        Ok(total)
    }

    /// Membership in the closed polyhedron: outside every selected ball.
    pub fn contains(&self, p: &crate::lorentz::ChartPoint, tol: &Tolerances) -> bool {
        self.balls.iter().all(|s| s.eval_normalized(p) >= -tol.chart)
    }

    pub fn transform(&self, g: &MoebiusElement, tol: &Tolerances) -> Result<NecklacePolyhedron> {
        build_polyhedron(&self.spec().transform(g), tol)
    }
}

/// An even-length identification word over letters `1..=n/2`, positive for a
/// plain occurrence and negative for the inverted one, listing the polygon's
/// edges in order. Each letter must appear exactly twice.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolygonScheme {
    letters: Vec<i32>,
}

impl PolygonScheme {
    pub fn new(letters: Vec<i32>) -> Result<Self> {
        let n = letters.len();
        if n < 4 || n % 2 != 0 {
            return Err(Error::InvalidSpec(format!(
                "scheme length must be even and at least 4, got {n}"
            )));
        }
        let half = (n / 2) as i32;
        let mut counts = vec![0usize; n / 2];
        for &l in &letters {
            if l == 0 || l.abs() > half {
                return Err(Error::InvalidSpec(format!(
                    "scheme letters must lie in 1..={half} up to sign, got {l}"
                )));
            }
            counts[(l.abs() - 1) as usize] += 1;
        }
        if let Some(k) = counts.iter().position(|&c| c != 2) {
            return Err(Error::InvalidSpec(format!(
                "letter {} must appear exactly twice, appears {} times",
                k + 1,
                counts[k]
            )));
        }
        Ok(PolygonScheme { letters })
    }

    /// The standard genus-g word: `a1 b1 a1' b1' a2 b2 a2' b2' ...` with
    /// letters numbered `1..=2g` and `'` marking the inverse.
    pub fn standard(genus: usize) -> PolygonScheme {
        assert!(genus >= 1);
        let mut letters = Vec::with_capacity(4 * genus);
        for k in 0..genus as i32 {
            letters.extend_from_slice(&[2 * k + 1, 2 * k + 2, -(2 * k + 1), -(2 * k + 2)]);
        }
        PolygonScheme { letters }
    }

    pub fn letters(&self) -> &[i32] {
        &self.letters
    }

    pub fn len(&self) -> usize {
        self.letters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }

    /// Position of the other occurrence of the letter at `i`, ignoring signs.
    pub fn partner(&self, i: usize) -> usize {
        let target = self.letters[i].abs();
        (0..self.letters.len())
            .find(|&j| j != i && self.letters[j].abs() == target)
            .expect("validated schemes pair every letter")
    }

    /// Parses words like "a1 b1 A1 B1": letters a..z numbered consecutively
    /// within each index group are not needed; any lowercase name marks a
    /// plain letter, the same name capitalized its inverse, and the digits
    /// give the letter number.
    pub fn parse(text: &str) -> Result<Self> {
        let mut letters = Vec::new();
        for token in text.split_whitespace() {
            let mut chars = token.chars();
            let head = chars
                .next()
                .ok_or_else(|| Error::WordParse(token.into(), "empty token".into()))?;
            if !head.is_ascii_alphabetic() {
                return Err(Error::WordParse(
                    token.into(),
                    "token must start with a letter".into(),
                ));
            }
            let digits: String = chars.collect();
            let index: i32 = digits.parse().map_err(|_| {
                Error::WordParse(token.into(), "expected digits after the letter".into())
            })?;
            if index <= 0 {
                return Err(Error::WordParse(token.into(), "index must be positive".into()));
            }
            letters.push(if head.is_ascii_uppercase() { -index } else { index });
        }
        PolygonScheme::new(letters)
    }

    /// Inverse of `parse`, writing letter k as "a{k}" and its inverse "A{k}".
    pub fn to_text(&self) -> String {
        self.letters
            .iter()
            .map(|&l| {
                if l > 0 {
                    format!("a{l}")
                } else {
                    format!("A{}", -l)
                }
            })
            .collect::<Vec<_>>()
            .join(" ")
    }
}

/// Genus of the closed orientable surface obtained by gluing the polygon
/// edges as the scheme dictates. Errors when some letter appears twice with
/// the same sign, which glues a Moebius band into the quotient.
pub fn scheme_genus(scheme: &PolygonScheme) -> Result<usize> {
    let n = scheme.len();
    for i in 0..n {
        let j = scheme.partner(i);
        if scheme.letters()[i] == scheme.letters()[j] {
            return Err(Error::NonOrientable(format!(
                "letter {} appears twice with the same orientation",
                scheme.letters()[i].abs()
            )));
        }
    }
    // Corner c sits between polygon edges c-1 and c. Gluing edge i onto its
    // partner j reversed sends corner i to corner j+1, so vertex classes are
    // the orbits of c -> partner(c) + 1.
    let classes = corner_cycles(&|c| scheme.partner(c), n).len();
    let chi = classes as i64 - (n / 2) as i64 + 1;
    let genus2 = 2 - chi;
    if genus2 < 0 || genus2 % 2 != 0 {
        return Err(Error::SchemeMismatch(format!(
            "Euler characteristic {chi} is not that of a closed orientable surface"
        )));
    }
    Ok((genus2 / 2) as usize)
}

/// Orbits of the corner map `c -> sigma(c) + 1 (mod n)`, each listed in walk
/// order starting from its smallest member.
pub(crate) fn corner_cycles(sigma: &dyn Fn(usize) -> usize, n: usize) -> Vec<Vec<usize>> {
    let mut seen = vec![false; n];
    let mut cycles = Vec::new();
    for start in 0..n {
        if seen[start] {
            continue;
        }
        let mut cycle = Vec::new();
        let mut c = start;
        loop {
            seen[c] = true;
            cycle.push(c);
            c = (sigma(c) + 1) % n;
            if c == start {
                break;
            }
        }
        cycles.push(cycle);
    }
    cycles
}

/// Checks that a face-pairing involution on the polyhedron realizes the
/// polygon scheme: paired faces must carry a letter and its inverse. On
/// success returns the geometric edge cycles, the orbits of edges under the
/// induced identifications, each in traversal order.
pub fn combinatorial_equivalence(
    polyhedron: &NecklacePolyhedron,
    pairing: &[usize],
    scheme: &PolygonScheme,
) -> Result<Vec<Vec<usize>>> {
    let n = polyhedron.face_count();
    if pairing.len() != n || scheme.len() != n {
        return Err(Error::SchemeMismatch(format!(
            "face count {n}, pairing length {}, scheme length {} must agree",
            pairing.len(),
            scheme.len()
        )));
    }
    for i in 0..n {
        let j = pairing[i];
        if j >= n || pairing[j] != i || j == i {
            return Err(Error::SchemeMismatch(format!(
                "pairing is not a fixed-point-free involution at face {i}"
            )));
        }
        if scheme.letters()[i] != -scheme.letters()[j] {
            return Err(Error::SchemeMismatch(format!(
                "faces {i} and {j} are paired but carry letters {} and {}",
                scheme.letters()[i],
                scheme.letters()[j]
            )));
        }
    }
    Ok(corner_cycles(&|c| pairing[c], n))
}

/// The 25 chain sphere centers of the bead-chain necklace: a zig-zag path
/// from the origin to (8, 0, 0) along unit steps.
pub fn chain_centers() -> [Vec3; 25] {
    [
        Vec3::new(0.0, 0.0, 0.0),
        Vec3::new(1.0, 0.0, 0.0),
        Vec3::new(1.0, 0.0, 1.0),
        Vec3::new(1.0, 0.0, 2.0),
        Vec3::new(1.0, 1.0, 2.0),
        Vec3::new(1.0, 2.0, 2.0),
        Vec3::new(1.0, 2.0, 1.0),
        Vec3::new(1.0, 2.0, 0.0),
        Vec3::new(2.0, 2.0, 0.0),
        Vec3::new(3.0, 2.0, 0.0),
        Vec3::new(3.0, 1.0, 0.0),
        Vec3::new(3.0, 0.0, 0.0),
        Vec3::new(4.0, 0.0, 0.0),
        Vec3::new(5.0, 0.0, 0.0),
        Vec3::new(5.0, 0.0, 1.0),
        Vec3::new(5.0, 0.0, 2.0),
        Vec3::new(5.0, 1.0, 2.0),
        Vec3::new(5.0, 2.0, 2.0),
        Vec3::new(5.0, 2.0, 1.0),
        Vec3::new(5.0, 2.0, 0.0),
        Vec3::new(6.0, 2.0, 0.0),
        Vec3::new(7.0, 2.0, 0.0),
        Vec3::new(7.0, 1.0, 0.0),
        Vec3::new(7.0, 0.0, 0.0),
        Vec3::new(8.0, 0.0, 0.0),
    ]
}

/// Parameters of the bead-chain necklace: 25 chain spheres of alternating
/// radii `r1` (odd positions) and `r2` (even), two closing spheres centered
/// at `(-d, 0, 0)` and `(8 + d, 0, 0)`, and a cap sphere centered at
/// `(4, 0, 0)` with radius `cap_radius` whose outside is removed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainParams {
    pub r1: f64,
    pub r2: f64,
    pub d: f64,
    pub cap_radius: f64,
}

impl ChainParams {
    /// Offset of the first chain edge plane from the first sphere center,
    /// along the step direction.
    fn edge_offset(&self) -> f64 {
        (1.0 + self.r1 * self.r1 - self.r2 * self.r2) / 2.0
    }

    /// Shared radius of the chain edge circles.
    pub fn edge_radius(&self) -> Result<f64> {
        let x0 = self.edge_offset();
        let rho2 = self.r1 * self.r1 - x0 * x0;
        if rho2 <= 0.0 {
            return Err(Error::Degenerate(
                "chain spheres do not overlap at these radii".into(),
            ));
        }
        Ok(rho2.sqrt())
    }

    /// Radius of the two closing spheres, which pass through the reflected
    /// first and last edge circles.
    pub fn closing_radius(&self) -> Result<f64> {
        let x0 = self.edge_offset();
        let rho = self.edge_radius()?;
        Ok(((self.d - x0) * (self.d - x0) + rho * rho).sqrt())
    }
}

/// Builds the 28-ball necklace in the cyclic order: 25 chain spheres, the
/// far closing sphere, the cap (selected side: outside), the near closing
/// sphere. The cap is adjacent to both closing spheres.
pub fn chain_spec(params: &ChainParams) -> Result<NecklaceSpec> {
    if params.d < 8.0 {
        return Err(Error::InvalidSpec(format!(
            "closing sphere offset must be at least 8, got {}",
            params.d
        )));
    }
    let r0 = params.closing_radius()?;
    let mut balls = Vec::with_capacity(28);
    for (i, c) in chain_centers().iter().enumerate() {
        let r = if i % 2 == 0 { params.r1 } else { params.r2 };
        balls.push(Sphere::from_center_radius(*c, r, Side::Inside)?);
    }
    balls.push(Sphere::from_center_radius(
        Vec3::new(8.0 + params.d, 0.0, 0.0),
        r0,
        Side::Inside,
    )?);
    balls.push(Sphere::from_center_radius(
        Vec3::new(4.0, 0.0, 0.0),
        params.cap_radius,
        Side::Outside,
    )?);
    balls.push(Sphere::from_center_radius(
        Vec3::new(-params.d, 0.0, 0.0),
        r0,
        Side::Inside,
    )?);
    Ok(NecklaceSpec::new(balls)?.with_closing_indices([27, 25, 26]))
}

/// The standard face pairing of the 28-face bead chain: within each block of
/// four faces `4k..4k+3`, face `4k` pairs with `4k+2` and `4k+3` with
/// `4k+1`.
pub fn chain_pairing() -> Vec<usize> {
    let mut pairing = vec![0usize; 28];
    for k in 0..7 {
        pairing[4 * k] = 4 * k + 2;
        pairing[4 * k + 2] = 4 * k;
        pairing[4 * k + 3] = 4 * k + 1;
        pairing[4 * k + 1] = 4 * k + 3;
    }
    pairing
}

/// Conformal modulus of the face between the last two chain edge circles
/// (the annulus that must match the cap's, on the sphere at (8, 0, 0)).
fn chain_tail_modulus(params: &ChainParams, tol: &Tolerances) -> Result<f64> {
    let rho = params.edge_radius()?;
    let x_last = 7.0 + (1.0 + params.r2 * params.r2 - params.r1 * params.r1) / 2.0;
    let x_mirror = 16.0 - x_last;
    let carrier = Sphere::from_center_radius(Vec3::new(8.0, 0.0, 0.0), params.r1, Side::Inside)?;
    let inner = chart_circle(x_last, rho)?;
    let outer = chart_circle(x_mirror, rho)?;
    Ok(MoebiusAnnulus::new(carrier, inner, outer, tol)?.modulus())
}

/// Circle `{x = x0, y^2 + z^2 = rho^2}`, as the intersection of the plane
/// with any sphere through it.
fn chart_circle(x0: f64, rho: f64) -> Result<Circle> {
    let plane = Sphere::from_plane(Vec3::x(), x0, Side::Inside)?;
    let sphere = Sphere::from_center_radius(Vec3::new(x0, 0.0, 0.0), rho, Side::Inside)?;
    Circle::from_spheres(&plane, &sphere)
}

/// Plane position and radius of the intersection circle of two spheres
/// centered on the x-axis at `p` and `q`. A well-conditioned closed form:
/// pairwise sphere bases lose accuracy near tangency, this never does.
fn coaxial_circle(p: f64, rp: f64, q: f64, rq: f64) -> Result<(f64, f64)> {
    let x = (p + q) / 2.0 + (rp * rp - rq * rq) / (2.0 * (q - p));
    let rho2 = rp * rp - (x - p) * (x - p);
    if rho2 <= 0.0 {
        return Err(Error::Degenerate("coaxial spheres do not cross".into()));
    }
    Ok((x, rho2.sqrt()))
}

/// Conformal modulus of the cap face for a given cap radius.
fn cap_modulus(params: &ChainParams, tol: &Tolerances) -> Result<f64> {
    let r0 = params.closing_radius()?;
    let cap = Sphere::from_center_radius(Vec3::new(4.0, 0.0, 0.0), params.cap_radius, Side::Outside)?;
    let (xi, ri) = coaxial_circle(8.0 + params.d, r0, 4.0, params.cap_radius)?;
    let (xo, ro) = coaxial_circle(-params.d, r0, 4.0, params.cap_radius)?;
    let inner = chart_circle(xi, ri)?;
    let outer = chart_circle(xo, ro)?;
    MoebiusAnnulus::new(cap, inner, outer, tol).map(|a| a.modulus())
}

/// Sum of the 28 dihedral angles as a function of the parameters alone,
/// without requiring necklace validity (the bracketing endpoints of the
/// solver lie outside the valid region).
pub fn chain_angle_sum(params: &ChainParams, tol: &Tolerances) -> Result<f64> {
    let pair = |a: &Sphere, b: &Sphere| dihedral_angle(a, b, tol);
    let chain_a = Sphere::from_center_radius(Vec3::zeros(), params.r1, Side::Inside)?;
    let chain_b = Sphere::from_center_radius(Vec3::x(), params.r2, Side::Inside)?;
    let r0 = params.closing_radius()?;
    let near = Sphere::from_center_radius(Vec3::new(-params.d, 0.0, 0.0), r0, Side::Inside)?;
    let far = Sphere::from_center_radius(Vec3::new(8.0 + params.d, 0.0, 0.0), r0, Side::Inside)?;
    let cap = Sphere::from_center_radius(Vec3::new(4.0, 0.0, 0.0), params.cap_radius, Side::Outside)?;
    // 24 congruent chain edges, 2 closing edges, 2 cap edges.
    Ok(24.0 * pair(&chain_a, &chain_b)? + 2.0 * pair(&near, &chain_a)? + 2.0 * pair(&far, &cap)?)
}

/// Solves the cap radius so the cap face's modulus matches the tail face's,
/// on the branch where the cap sphere approaches internal tangency with the
/// closing spheres. Deterministic nested 1-D search.
pub fn solve_cap_radius(r1: f64, r2: f64, d: f64, tol: &Tolerances) -> Result<f64> {
    cap_radius_clamped(r1, r2, d, tol, false)
}

/// Like `solve_cap_radius`, but when the target modulus is below what any
/// cap can reach, returns the radius of closest approach instead of failing.
/// The angle-sum bracket endpoints need this: at the fat end of the radius
/// range the matching condition has no solution, yet the sum must still
/// evaluate to something above 2 pi there.
fn cap_radius_clamped(r1: f64, r2: f64, d: f64, tol: &Tolerances, clamp: bool) -> Result<f64> {
    let probe = ChainParams { r1, r2, d, cap_radius: 1.0 };
    let target = chain_tail_modulus(&probe, tol)?;
    let r0 = probe.closing_radius()?;
    let lo = 4.0 + d - r0;
    let hi = 4.0 + d + r0;
    let margin = (hi - lo) * 1e-12;
    let modulus_at = |cap: f64| -> Result<f64> {
        match cap_modulus(&ChainParams { r1, r2, d, cap_radius: cap }, tol) {
            Ok(m) => Ok(m),
            // Rounding may push the probe past tangency at the bracket
            // ends, where the modulus genuinely diverges.
            Err(Error::Degenerate(_)) => Ok(f64::INFINITY),
            Err(e) => Err(e),
        }
    };

    // The modulus blows up at both tangency ends; locate its interior
    // minimum, then bisect on the increasing branch toward the upper end.
    let (mut a, mut b) = (lo + margin, hi - margin);
    for _ in 0..200 {
        let m1 = a + (b - a) / 3.0;
        let m2 = b - (b - a) / 3.0;
        if modulus_at(m1)? < modulus_at(m2)? {
            b = m2;
        } else {
            a = m1;
        }
    }
    let valley = (a + b) / 2.0;
    let floor = modulus_at(valley)?;
    if target <= floor {
        if clamp {
            return Ok(valley);
        }
        return Err(Error::SolverFailure(format!(
            "cap modulus cannot drop to {target:.6}; its minimum over all \
             cap radii is {floor:.6} for r1={r1}, r2={r2}, d={d}"
        )));
    }
    let ceiling = modulus_at(hi - margin)?;
    if target >= ceiling {
        return Err(Error::SolverFailure(format!(
            "cap modulus target {target:.6} exceeds the reachable ceiling \
             {ceiling:.6} for r1={r1}, r2={r2}, d={d}"
        )));
    }
    let (mut a, mut b) = (valley, hi - margin);
    for _ in 0..200 {
        let mid = (a + b) / 2.0;
        if mid <= a || mid >= b {
            break;
        }
        if modulus_at(mid)? < target {
            a = mid;
        } else {
            b = mid;
        }
    }
    Ok((a + b) / 2.0)
}

/// A solved bead chain: symmetric radii, matched cap modulus, and total
/// dihedral angle 2 pi around the single geometric edge cycle.
#[derive(Debug, Clone)]
pub struct ChainSolution {
    pub params: ChainParams,
    pub spec: NecklaceSpec,
    pub angle_sum: f64,
    pub modulus: f64,
}

/// Finds `r1 = r2 = r` (for the given closing offset `d >= 8`) so that the
/// dihedral angles at the polyhedron's edges sum to 2 pi within
/// `angle_tol`, with the cap radius re-solved from the modulus condition at
/// every step. The bracket endpoints are r = 1/2 (sum 0, tangent chain) and
/// r = 3/4 (sum above 2 pi).
pub fn solve_chain(d: f64, angle_tol: f64, tol: &Tolerances) -> Result<ChainSolution> {
    if d < 8.0 {
        return Err(Error::InvalidSpec(format!(
            "closing sphere offset must be at least 8, got {d}"
        )));
    }
    let sum_at = |r: f64| -> Result<(f64, f64)> {
        let cap = cap_radius_clamped(r, r, d, tol, true)?;
        let params = ChainParams { r1: r, r2: r, d, cap_radius: cap };
        Ok((chain_angle_sum(&params, tol)?, cap))
    };
    let target = std::f64::consts::TAU;
    let (mut a, mut b) = (0.5 + 1e-6, 0.75);
    let (sa, _) = sum_at(a)?;
    let (sb, _) = sum_at(b)?;
    if !(sa < target && target < sb) {
        return Err(Error::SolverFailure(format!(
            "angle sum does not bracket 2 pi: {sa:.9} at r={a}, {sb:.9} at r={b}"
        )));
    }
    let mut best = (a, sa);
    for _ in 0..200 {
        let mid = (a + b) / 2.0;
        if mid <= a || mid >= b {
            break;
        }
        let (s, _) = sum_at(mid)?;
        if (s - target).abs() < (best.1 - target).abs() {
            best = (mid, s);
        }
        if (s - target).abs() <= angle_tol * 0.5 {
            break;
        }
        if s < target {
            a = mid;
        } else {
            b = mid;
        }
    }
    let (r, _) = best;
    let (angle_sum, cap) = sum_at(r)?;
    if (angle_sum - target).abs() > angle_tol {
        return Err(Error::SolverFailure(format!(
            "bisection stalled at angle sum {angle_sum:.12}, target 2 pi +- {angle_tol}"
        )));
    }
    let params = ChainParams { r1: r, r2: r, d, cap_radius: cap };
    let spec = chain_spec(&params)?;
    spec.validate(tol)?;
    Ok(ChainSolution {
        params,
        spec,
        angle_sum,
        modulus: chain_tail_modulus(&params, tol)?,
    })
}

/// JSON shape for a necklace: metric balls plus the scheme word, kept in
/// plain center/radius form so files round-trip bit-exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NecklaceDescription {
    pub spheres: Vec<BallDescription>,
    pub scheme: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BallDescription {
    pub center: [f64; 3],
    pub radius: f64,
    #[serde(default = "default_side")]
    pub side: Side,
}

fn default_side() -> Side {
    Side::Inside
}

impl NecklaceDescription {
    pub fn from_parts(spec: &NecklaceSpec, scheme: &PolygonScheme) -> Result<Self> {
        let mut spheres = Vec::with_capacity(spec.len());
        for ball in spec.balls() {
            let (c, r) = ball.center_radius().ok_or_else(|| {
                Error::InvalidSpec("necklace descriptions support metric balls only".into())
            })?;
            let side = if ball.selected_ball_has_infinity(&Tolerances::default()) {
                Side::Outside
            } else {
                Side::Inside
            };
            spheres.push(BallDescription { center: [c.x, c.y, c.z], radius: r, side });
        }
        Ok(NecklaceDescription { spheres, scheme: scheme.to_text() })
    }

    pub fn to_parts(&self) -> Result<(NecklaceSpec, PolygonScheme)> {
        let mut balls = Vec::with_capacity(self.spheres.len());
        for b in &self.spheres {
            balls.push(Sphere::from_center_radius(
                Vec3::new(b.center[0], b.center[1], b.center[2]),
                b.radius,
                b.side,
            )?);
        }
        Ok((NecklaceSpec::new(balls)?, PolygonScheme::parse(&self.scheme)?))
    }
}

/// Necklace of the regular hyperbolic octagon with interior angle
/// `2 beta` at each vertex, swept around the equatorial circle: eight
/// congruent balls whose centers sit at distance big_d from the origin
/// in the plane z = 0. Shared across test modules as ground-truth data.
#[cfg(test)]
pub(crate) fn octagon_necklace(beta: f64) -> NecklaceSpec {
    // Apothem: cosh = cos(beta) / sin(pi / 8); side circles orthogonal
    // to the unit circle at chart distance tanh(apothem / 2).
    let cosh_a = beta.cos() / (std::f64::consts::PI / 8.0).sin();
    let sinh_a = (cosh_a * cosh_a - 1.0).sqrt();
    let m = sinh_a / (1.0 + cosh_a);
    let center = (m + 1.0 / m) / 2.0;
    let radius = (1.0 / m - m) / 2.0;
    let balls = (0..8)
        .map(|k| {
            let t = k as f64 * std::f64::consts::FRAC_PI_4;
            Sphere::from_center_radius(
                Vec3::new(center * t.cos(), center * t.sin(), 0.0),
                radius,
                Side::Inside,
            )
            .unwrap()
        })
        .collect();
    NecklaceSpec::new(balls).unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lorentz::ChartPoint;
    use approx::assert_abs_diff_eq;
    use rand::Rng;
    use rand::SeedableRng;

    fn tols() -> Tolerances {
        Tolerances::default()
    }

    #[test]
    fn octagon_necklace_is_aligned_with_angle_sum_two_pi() {
        // Interior angle pi / 4: the eight dihedral angles sum to 2 pi.
        let spec = octagon_necklace(std::f64::consts::PI / 8.0);
        let p = build_polyhedron(&spec, &tols()).unwrap();
        assert_eq!(p.face_count(), 8);
        assert_eq!(p.edges().len(), 8);

        let axis = Circle::through_points(
            &ChartPoint::finite(1.0, 0.0, 0.0),
            &ChartPoint::finite(0.0, 1.0, 0.0),
            &ChartPoint::finite(-1.0, 0.0, 0.0),
        )
        .unwrap();
        for e in p.edges() {
            assert!(e.orthogonality_defect(&axis) < 1e-9);
        }
        for i in 0..8 {
            assert_abs_diff_eq!(
                p.dihedral_angle(i, &tols()).unwrap(),
                std::f64::consts::FRAC_PI_4,
                epsilon = 1e-9
            );
        }
        assert_abs_diff_eq!(
            p.dihedral_sum(&tols()).unwrap(),
            std::f64::consts::TAU,
            epsilon = 1e-9
        );
        // Infinity is an interior point; ball centers are not.
        assert!(p.contains(&ChartPoint::Infinity, &tols()));
        assert!(p.contains(&ChartPoint::ORIGIN, &tols()));
        assert!(!p.contains(&ChartPoint::finite(1.09868411346781, 0.0, 0.0), &tols()));
    }

    #[test]
    fn right_angled_octagon_has_orthogonal_edges() {
        let spec = octagon_necklace(std::f64::consts::FRAC_PI_4);
        let p = build_polyhedron(&spec, &tols()).unwrap();
        for i in 0..8 {
            assert_abs_diff_eq!(
                p.dihedral_angle(i, &tols()).unwrap(),
                std::f64::consts::FRAC_PI_2,
                epsilon = 1e-9
            );
        }
    }

    #[test]
    fn validation_catches_gaps_overlaps_and_tangencies() {
        // Chain radii 0.4: adjacent chain balls at distance 1 are disjoint.
        // The construction itself already refuses such radii, so shrink the
        // chain balls of a valid spec in place.
        assert!(chain_spec(&ChainParams { r1: 0.4, r2: 0.4, d: 8.0, cap_radius: 12.0 }).is_err());
        let thin = {
            let valid =
                chain_spec(&ChainParams { r1: 0.52, r2: 0.52, d: 8.0, cap_radius: 18.0 }).unwrap();
            let balls = valid
                .balls()
                .iter()
                .enumerate()
                .map(|(i, s)| {
                    if i < 25 {
                        let (c, _) = s.center_radius().unwrap();
                        Sphere::from_center_radius(c, 0.4, Side::Inside).unwrap()
                    } else {
                        *s
                    }
                })
                .collect();
            NecklaceSpec::new(balls).unwrap()
        };
        match thin.validate(&tols()) {
            Err(Error::NecklaceViolation { kind: NecklaceViolationKind::AdjacentDisjoint, .. }) => {}
            other => panic!("expected adjacent-disjoint violation, got {other:?}"),
        }

        // Tangent chain: radius exactly 1/2 touches at the midpoints.
        let tangent = chain_spec(&ChainParams { r1: 0.5, r2: 0.5, d: 8.0, cap_radius: 12.0 });
        match tangent {
            Err(Error::Degenerate(_)) => {}
            Ok(spec) => match spec.validate(&tols()) {
                Err(Error::DegenerateEdge(_)) => {}
                other => panic!("expected a degenerate edge, got {other:?}"),
            },
            other => panic!("unexpected construction failure: {other:?}"),
        }

        // Inflated octagon: non-adjacent side spheres start to cross.
        let fat = {
            let spec = octagon_necklace(std::f64::consts::PI / 8.0);
            let balls = spec
                .balls()
                .iter()
                .map(|s| {
                    let (c, r) = s.center_radius().unwrap();
                    Sphere::from_center_radius(c, r * 1.75, Side::Inside).unwrap()
                })
                .collect();
            NecklaceSpec::new(balls).unwrap()
        };
        match fat.validate(&tols()) {
            Err(Error::NecklaceViolation { kind: NecklaceViolationKind::NonAdjacentIntersect, .. }) => {}
            other => panic!("expected non-adjacent intersection, got {other:?}"),
        }
    }

    #[test]
    fn edges_are_the_pairwise_intersections() {
        let spec = octagon_necklace(std::f64::consts::PI / 8.0);
        let p = build_polyhedron(&spec, &tols()).unwrap();
        for i in 0..8 {
            let again = Circle::from_spheres(&p.balls()[(i + 7) % 8], &p.balls()[i]).unwrap();
            assert!(p.edges()[i].plane_distance(&again) < 1e-12);
            // Faces are bounded by their two incident edges.
            assert!(p.faces()[i].inner().plane_distance(&p.edges()[i]) < 1e-12);
            assert!(p.faces()[i].outer().plane_distance(&p.edges()[(i + 1) % 8]) < 1e-12);
        }
    }

    #[test]
    fn dihedral_angles_are_moebius_invariant() {
        let spec = octagon_necklace(std::f64::consts::PI / 8.0);
        let base = build_polyhedron(&spec, &tols()).unwrap();
        let mut angles = Vec::new();
        for i in 0..8 {
            angles.push(base.dihedral_angle(i, &tols()).unwrap());
        }
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x6e65636b);
        for _ in 0..100 {
            let t = Vec3::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
            let axis = Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            let g = MoebiusElement::translation(t)
                .compose(&MoebiusElement::rotation(axis + Vec3::z() * 1.5, rng.random_range(-3.0..3.0)).unwrap())
                .compose(&MoebiusElement::scaling(rng.random_range(0.25..4.0)).unwrap());
            let moved = base.transform(&g, &tols()).unwrap();
            for i in 0..8 {
                assert_abs_diff_eq!(moved.dihedral_angle(i, &tols()).unwrap(), angles[i], epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn scheme_genus_of_standard_words() {
        for g in 1..=10 {
            assert_eq!(scheme_genus(&PolygonScheme::standard(g)).unwrap(), g);
        }
        // One commutator block: the torus word a b a' b'.
        assert_eq!(scheme_genus(&PolygonScheme::new(vec![1, 2, -1, -2]).unwrap()).unwrap(), 1);
    }

    #[test]
    fn scheme_rejects_non_orientable_and_malformed_words() {
        // "abab": opposite edges glued without inversion.
        let word = PolygonScheme::new(vec![1, 2, 1, 2]).unwrap();
        assert!(matches!(scheme_genus(&word), Err(Error::NonOrientable(_))));
        // A letter appearing three times never forms a scheme.
        assert!(PolygonScheme::new(vec![1, 1, 1, 2]).is_err());
        assert!(PolygonScheme::new(vec![1, 2, -1]).is_err());
        // The sphere word a a' glues to a sphere, genus 0 but length 2.
        assert!(PolygonScheme::new(vec![1, -1]).is_err());
    }

    #[test]
    fn scheme_words_round_trip_through_text() {
        let w = PolygonScheme::standard(2);
        let text = w.to_text();
        assert_eq!(text, "a1 a2 A1 A2 a3 a4 A3 A4");
        assert_eq!(PolygonScheme::parse(&text).unwrap(), w);
        assert!(PolygonScheme::parse("a1 b?").is_err());
        assert!(PolygonScheme::parse("a0 a0 a1 A1").is_err());
    }

    #[test]
    fn octagon_pairing_matches_the_genus_two_scheme() {
        let spec = octagon_necklace(std::f64::consts::PI / 8.0);
        let p = build_polyhedron(&spec, &tols()).unwrap();
        let pairing = vec![2, 3, 0, 1, 6, 7, 4, 5];
        let scheme = PolygonScheme::standard(2);
        let cycles = combinatorial_equivalence(&p, &pairing, &scheme).unwrap();
        assert_eq!(cycles, vec![vec![0, 3, 2, 1, 4, 7, 6, 5]]);

        // The identity pairing fixes faces, which no scheme letter allows.
        let identity: Vec<usize> = (0..8).collect();
        assert!(combinatorial_equivalence(&p, &identity, &scheme).is_err());
        // A pairing inconsistent with the word letters is rejected.
        let wrong = vec![1, 0, 3, 2, 5, 4, 7, 6];
        assert!(combinatorial_equivalence(&p, &wrong, &scheme).is_err());
    }

    #[test]
    fn chain_edge_circles_share_one_radius() {
        let params = ChainParams { r1: 0.52, r2: 0.52, d: 8.0, cap_radius: 18.0 };
        let rho = params.edge_radius().unwrap();
        assert_abs_diff_eq!(rho, (0.52f64 * 0.52 - 0.25).sqrt(), epsilon = 1e-12);
        let spec = chain_spec(&params).unwrap();
        // Chain edges: every consecutive pair among the first 26 balls.
        for i in 1..26 {
            let e = Circle::from_spheres(&spec.balls()[i - 1], &spec.balls()[i]).unwrap();
            let (_, r, _) = e.chart_center_radius().unwrap();
            assert_abs_diff_eq!(r, rho, epsilon = 1e-9);
        }
        // The wrap edge between the near closing sphere and the first chain
        // sphere is the mirror of the first chain edge.
        let e1 = Circle::from_spheres(&spec.balls()[27], &spec.balls()[0]).unwrap();
        let (c, r, _) = e1.chart_center_radius().unwrap();
        assert_abs_diff_eq!(r, rho, epsilon = 1e-9);
        assert_abs_diff_eq!(c.x, -0.5, epsilon = 1e-9);
    }

    #[test]
    fn near_tangent_chain_angles_collapse() {
        // Just above the tangency radius the wedge angle is tiny.
        let a = Sphere::from_center_radius(Vec3::zeros(), 0.5 + 1e-4, Side::Inside).unwrap();
        let b = Sphere::from_center_radius(Vec3::x(), 0.5 + 1e-4, Side::Inside).unwrap();
        let angle = dihedral_angle(&a, &b, &tols()).unwrap();
        assert!(angle > 0.0 && angle < 0.05, "angle {angle}");
    }

    #[test]
    fn fat_chain_angle_sum_exceeds_two_pi() {
        // At r = 3/4 the necklace is invalid and no cap can match the tail
        // modulus, but the clamped evaluation still brackets the solver
        // from above.
        assert!(solve_cap_radius(0.75, 0.75, 8.0, &tols()).is_err());
        let cap = cap_radius_clamped(0.75, 0.75, 8.0, &tols(), true).unwrap();
        let sum = chain_angle_sum(
            &ChainParams { r1: 0.75, r2: 0.75, d: 8.0, cap_radius: cap },
            &tols(),
        )
        .unwrap();
        assert!(sum > std::f64::consts::TAU, "sum {sum}");
    }

    #[test]
    fn solved_chain_meets_every_stated_condition() {
        let t = tols();
        let sol = solve_chain(8.0, 1e-9, &t).unwrap();
        let r = sol.params.r1;
        assert!(r > 0.5 && r < 0.75, "r = {r}");
        assert_eq!(sol.params.r2, r);
        assert_abs_diff_eq!(sol.angle_sum, std::f64::consts::TAU, epsilon = 1e-9);

        let p = build_polyhedron(&sol.spec, &t).unwrap();
        assert_eq!(p.face_count(), 28);
        assert_abs_diff_eq!(p.dihedral_sum(&t).unwrap(), std::f64::consts::TAU, epsilon = 1e-9);

        // Paired tail and cap faces have matching moduli; the closing pair
        // matches by the point symmetry through (4, 0, 0).
        let moduli: Vec<f64> = p.faces().iter().map(|f| f.modulus()).collect();
        assert_abs_diff_eq!(moduli[24], moduli[26], epsilon = 1e-8);
        assert_abs_diff_eq!(moduli[25], moduli[27], epsilon = 1e-8);
        for (i, &j) in chain_pairing().iter().enumerate() {
            assert_abs_diff_eq!(moduli[i], moduli[j], epsilon = 1e-8);
        }

        // Closed forms for the two chain annulus shapes.
        let r2 = r * r;
        assert_abs_diff_eq!(
            moduli[24],
            ((4.0 * r2 + 1.0) / (4.0 * r2 - 1.0)).acosh(),
            epsilon = 1e-9
        );
        assert_abs_diff_eq!(moduli[1], (1.0 / (4.0 * r2 - 1.0)).acosh(), epsilon = 1e-9);

        // The single geometric edge cycle visits all 28 edges in the
        // block-of-four traversal order.
        let cycles = combinatorial_equivalence(&p, &chain_pairing(), &PolygonScheme::standard(7)).unwrap();
        assert_eq!(cycles.len(), 1);
        let expected: Vec<usize> = (0..7)
            .flat_map(|k| [4 * k, 4 * k + 3, 4 * k + 2, 4 * k + 1])
            .collect();
        assert_eq!(cycles[0], expected);
        assert_eq!(scheme_genus(&PolygonScheme::standard(7)).unwrap(), 7);

        // Perturbing the solved radius breaks the angle condition.
        let cap = solve_cap_radius(r + 1e-3, r + 1e-3, 8.0, &t).unwrap();
        let sum = chain_angle_sum(
            &ChainParams { r1: r + 1e-3, r2: r + 1e-3, d: 8.0, cap_radius: cap },
            &t,
        )
        .unwrap();
        assert!((sum - std::f64::consts::TAU).abs() > 1e-2, "sum {sum}");

        // The solve is deterministic.
        let again = solve_chain(8.0, 1e-9, &t).unwrap();
        assert_eq!(again.params.r1.to_bits(), sol.params.r1.to_bits());
        assert_eq!(again.params.cap_radius.to_bits(), sol.params.cap_radius.to_bits());
    }

    #[test]
    fn necklace_description_round_trips() {
        let params = ChainParams { r1: 0.52, r2: 0.52, d: 8.0, cap_radius: 18.0 };
        let spec = chain_spec(&params).unwrap();
        let scheme = PolygonScheme::standard(7);
        let desc = NecklaceDescription::from_parts(&spec, &scheme).unwrap();
        assert_eq!(desc.spheres.len(), 28);
        assert_eq!(desc.spheres[26].side, Side::Outside);

        let json = serde_json::to_string_pretty(&desc).unwrap();
        let back: NecklaceDescription = serde_json::from_str(&json).unwrap();
        assert_eq!(serde_json::to_string_pretty(&back).unwrap(), json);

        let (spec2, scheme2) = back.to_parts().unwrap();
        assert_eq!(scheme2, scheme);
        for (a, b) in spec.balls().iter().zip(spec2.balls()) {
            assert!((a.vector() - b.vector()).norm() < 1e-12);
        }
    }
}
