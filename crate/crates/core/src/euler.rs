//! Euler numbers of necklace gluings via linking of piecewise-circular
//! loops.
//!
//! Two loops are built from a necklace polyhedron: the boundary loop runs
//! through the transported marking points, one circular arc per face, and
//! represents the generator class of the polyhedron's fundamental group; the
//! companion loop runs just inside the necklace balls, one arc per face, and
//! generates the first homology of the polyhedron's complement. The Euler
//! number of the glued circle bundle is their linking number, computed by two
//! independent routes (projected crossing diagrams and the Gauss integral)
//! that must agree.

use crate::conformal::{
    connecting_arc, normalize_annulus, separation, Circle, CircleArc, Separation, Side, Sphere,
};
use crate::error::{Error, Result};
use crate::holonomy::FacePairing;
use crate::lorentz::{ChartPoint, MoebiusElement, Vec3};
use crate::necklace::NecklacePolyhedron;
use crate::tol::Tolerances;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Crossing parameters closer than this to a segment endpoint (or to
/// parallelism) make a projection direction inadmissible.
const DIAGRAM_GUARD: f64 = 1e-7;

/// Number of independent projection directions that must agree on the
/// crossing count before the diagram route is accepted.
const REQUIRED_PROJECTIONS: usize = 5;

/// Attempt budget for finding admissible projection directions.
const PROJECTION_ATTEMPTS: usize = 20;

/// Allowed gap between the Gauss estimate and the diagram value.
const ROUTE_AGREEMENT: f64 = 0.2;

/// A closed loop of circular arcs. Arc `i` runs from vertex `i` to vertex
/// `i + 1` (cyclically); construction checks the chaining, while containment
/// in faces or thickened regions is the responsibility of the builders.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PiecewiseCircleLoop {
    arcs: Vec<CircleArc>,
    vertices: Vec<ChartPoint>,
}

impl PiecewiseCircleLoop {
    pub fn new(arcs: Vec<CircleArc>, tol: &Tolerances) -> Result<Self> {
        let vertices = arcs.iter().map(|a| a.start()).collect();
        let lp = PiecewiseCircleLoop { arcs, vertices };
        lp.validate(tol)?;
        Ok(lp)
    }

    /// Checks that consecutive arcs chain head to tail and the loop closes.
    pub fn validate(&self, tol: &Tolerances) -> Result<()> {
        let n = self.arcs.len();
        if n < 2 {
            return Err(Error::InvalidSpec(
                "a piecewise-circular loop needs at least two arcs".into(),
            ));
        }
        if self.vertices.len() != n {
            return Err(Error::InvalidSpec(format!(
                "loop stores {} vertices for {} arcs",
                self.vertices.len(),
                n
            )));
        }
        for i in 0..n {
            let at_vertex = self.arcs[i].start().spherical_distance(&self.vertices[i]);
            let gap = self.arcs[i]
                .end()
                .spherical_distance(&self.arcs[(i + 1) % n].start());
            if at_vertex > tol.chart || gap > tol.chart {
                return Err(Error::InvalidSpec(format!(
                    "loop is not closed at arc {i}: vertex offset {at_vertex:.3e}, gap {gap:.3e}"
                )));
            }
        }
        Ok(())
    }

    /// A round circle as a loop of four quarter arcs, oriented by the
    /// circle's own frame.
    pub fn from_circle(circle: &Circle, tol: &Tolerances) -> Result<Self> {
        let frame = circle.frame();
        let quarter = std::f64::consts::FRAC_PI_2;
        let mut arcs = Vec::with_capacity(4);
        for k in 0..4 {
            let t = k as f64 * quarter;
            arcs.push(CircleArc::new(
                *circle,
                circle.point_at(&frame, t),
                circle.point_at(&frame, t + quarter),
                circle.point_at(&frame, t + 0.5 * quarter),
                tol,
            )?);
        }
        PiecewiseCircleLoop::new(arcs, tol)
    }

    pub fn arcs(&self) -> &[CircleArc] {
        &self.arcs
    }

    pub fn vertices(&self) -> &[ChartPoint] {
        &self.vertices
    }

    pub fn len(&self) -> usize {
        self.arcs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.arcs.is_empty()
    }

    pub fn transform(&self, g: &MoebiusElement, tol: &Tolerances) -> Result<PiecewiseCircleLoop> {
        let mut arcs = Vec::with_capacity(self.arcs.len());
        for a in &self.arcs {
            arcs.push(a.transform(g, tol)?);
        }
        PiecewiseCircleLoop::new(arcs, tol)
    }

    /// The same loop traversed backwards; linking numbers against it negate.
    pub fn reversed(&self) -> PiecewiseCircleLoop {
        let arcs: Vec<CircleArc> = self.arcs.iter().rev().map(|a| a.reversed()).collect();
        let vertices = arcs.iter().map(|a| a.start()).collect();
        PiecewiseCircleLoop { arcs, vertices }
    }

    /// Closed chart polyline within `max_chord` of the loop: each arc is cut
    /// at angle steps whose sagitta stays below the bound. The final point
    /// wraps to the first. Fails on loops that leave the finite chart.
    pub fn polygonize(&self, max_chord: f64) -> Result<Vec<Vec3>> {
        if !(max_chord > 0.0) {
            return Err(Error::InvalidSpec(format!(
                "polygonization chord bound must be positive, got {max_chord}"
            )));
        }
        let mut pts = Vec::new();
        for arc in &self.arcs {
            let (_, rho, _) = arc.circle().chart_center_radius().ok_or_else(|| {
                Error::Degenerate("cannot polygonize a loop through infinity".into())
            })?;
            let frame = arc.circle().frame();
            let (_, sweep) = arc.sweep(&frame);
            let step = if max_chord >= rho {
                std::f64::consts::PI
            } else {
                2.0 * (1.0 - max_chord / rho).acos()
            };
            let m = ((sweep.abs() / step).ceil() as usize).clamp(4, 65_536);
            for k in 0..m {
                match arc.point_at_fraction(&frame, k as f64 / m as f64) {
                    ChartPoint::Finite(p) => pts.push(p),
                    ChartPoint::Infinity => {
                        return Err(Error::Degenerate(
                            "cannot polygonize a loop through infinity".into(),
                        ))
                    }
                }
            }
            if pts.len() > 1_000_000 {
                return Err(Error::SolverFailure(
                    "polygonization budget exceeded; loops too close together?".into(),
                ));
            }
        }
        Ok(pts)
    }

    /// Diameter of the loop's chart bounding box, from a coarse sampling.
    fn chart_extent(&self) -> Result<f64> {
        let pts = self.polygonize(f64::MAX)?;
        let mut lo = Vec3::repeat(f64::INFINITY);
        let mut hi = Vec3::repeat(f64::NEG_INFINITY);
        for p in &pts {
            lo = lo.inf(p);
            hi = hi.sup(p);
        }
        Ok((hi - lo).norm())
    }
}

/// A conservative lower bound for the chart distance between two loops:
/// the minimum gap of their polygonizations minus both chord errors. May be
/// negative when the loops touch or cross.
pub fn loop_separation(
    l1: &PiecewiseCircleLoop,
    l2: &PiecewiseCircleLoop,
) -> Result<f64> {
    let scale = l1.chart_extent()?.max(l2.chart_extent()?).max(1e-9);
    let mut chord = scale / 512.0;
    let mut lower = f64::NEG_INFINITY;
    for _ in 0..3 {
        let a = l1.polygonize(chord)?;
        let b = l2.polygonize(chord)?;
        lower = polyline_min_gap(&a, &b) - 2.0 * chord;
        if lower > 4.0 * chord {
            break;
        }
        chord /= 8.0;
    }
    Ok(lower)
}

/// The outcome of a dual-route linking computation: the integer value from
/// the projected diagrams, the number of agreeing projections, the Gauss
/// estimate, and the crossing tally of the first accepted diagram.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LinkReport {
    pub value: i64,
    pub projection_count: usize,
    pub gauss_estimate: f64,
    /// `(positive, negative)` crossing counts between the two loops.
    pub crossings_by_sign: (i64, i64),
}

/// Linking number of two disjoint loops by two independent routes.
///
/// Both loops are polygonized with chord error below a hundredth of their
/// separation. The diagram route projects along random directions (seeded,
/// uniform on the sphere), counts signed crossings with exact-orientation
/// tests, and requires five admissible projections that all agree; the Gauss
/// route evaluates the linking integral exactly on a polygonization, pair of
/// segments by pair of segments, as a sum of signed solid angles. The two
/// must agree within 0.2 before rounding.
pub fn linking_number(
    l1: &PiecewiseCircleLoop,
    l2: &PiecewiseCircleLoop,
    seed: u64,
    tol: &Tolerances,
) -> Result<LinkReport> {
    let lower = loop_separation(l1, l2)?;
    if lower <= 10.0 * tol.chart {
        return Err(Error::IndeterminateLink(lower));
    }
    let fine1 = l1.polygonize(lower / 100.0)?;
    let fine2 = l2.polygonize(lower / 100.0)?;
    let gauss1 = l1.polygonize(lower / 20.0)?;
    let gauss2 = l2.polygonize(lower / 20.0)?;
    let gauss = polyline_gauss_linking(&gauss1, &gauss2);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (value, projection_count, crossings_by_sign) =
        polyline_diagram_linking(&fine1, &fine2, &mut rng)?;
    if (gauss - value as f64).abs() >= ROUTE_AGREEMENT {
        return Err(Error::LinkRouteMismatch { projection: value, gauss });
    }
    Ok(LinkReport { value, projection_count, gauss_estimate: gauss, crossings_by_sign })
}

/// Diagram route on closed polylines: random projections until
/// `REQUIRED_PROJECTIONS` admissible ones agree. Returns the value, the
/// number of agreeing projections, and the first diagram's crossing tally.
fn polyline_diagram_linking(
    a: &[Vec3],
    b: &[Vec3],
    rng: &mut ChaCha8Rng,
) -> Result<(i64, usize, (i64, i64))> {
    let mut agreed: Option<i64> = None;
    let mut first_signs = (0i64, 0i64);
    let mut valid = 0usize;
    for attempt in 1..=PROJECTION_ATTEMPTS {
        let u = random_unit(rng);
        let Some((sum, pos, neg)) = diagram_crossing_sum(a, b, &u) else {
            continue;
        };
        if sum.rem_euclid(2) != 0 {
            // An odd signed sum means the diagram missed a crossing;
            // treat the direction as inadmissible.
            continue;
        }
        let v = sum / 2;
        match agreed {
            None => {
                agreed = Some(v);
                first_signs = (pos, neg);
            }
            Some(prev) if prev != v => return Err(Error::ProjectionFailure(attempt)),
            Some(_) => {}
        }
        valid += 1;
        if valid >= REQUIRED_PROJECTIONS {
            return Ok((v, valid, first_signs));
        }
    }
    Err(Error::ProjectionFailure(PROJECTION_ATTEMPTS))
}

/// Uniform direction on the unit sphere by rejection from the cube.
fn random_unit(rng: &mut ChaCha8Rng) -> Vec3 {
    loop {
        let v = Vec3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        let n2 = v.norm_squared();
        if n2 > 1e-4 && n2 < 1.0 {
            return v / n2.sqrt();
        }
    }
}

/// Signed crossing sum between the projections of two closed polylines along
/// direction `u`, with the positive/negative crossing tally. `None` marks an
/// inadmissible direction: a crossing parameter within `DIAGRAM_GUARD` of a
/// segment endpoint, or near-parallel segments in contact.
fn diagram_crossing_sum(a: &[Vec3], b: &[Vec3], u: &Vec3) -> Option<(i64, i64, i64)> {
    let (e1, e2) = plane_basis(u);
    let proj = |pts: &[Vec3]| -> (Vec<(f64, f64)>, Vec<f64>) {
        let xy = pts.iter().map(|p| (p.dot(&e1), p.dot(&e2))).collect();
        let d = pts.iter().map(|p| p.dot(u)).collect();
        (xy, d)
    };
    let (axy, adep) = proj(a);
    let (bxy, bdep) = proj(b);
    let n = a.len();
    let m = b.len();
    // Per-segment 2D bounding boxes of the second polyline.
    let bbox: Vec<(f64, f64, f64, f64)> = (0..m)
        .map(|j| {
            let (x0, y0) = bxy[j];
            let (x1, y1) = bxy[(j + 1) % m];
            (x0.min(x1), x0.max(x1), y0.min(y1), y0.max(y1))
        })
        .collect();
    let mut sum = 0i64;
    let mut pos = 0i64;
    let mut neg = 0i64;
    for i in 0..n {
        let (px, py) = axy[i];
        let (qx, qy) = axy[(i + 1) % n];
        let (rx, ry) = (qx - px, qy - py);
        let (xlo, xhi) = (px.min(qx), px.max(qx));
        let (ylo, yhi) = (py.min(qy), py.max(qy));
        for j in 0..m {
            let (bx0, bx1, by0, by1) = bbox[j];
            if bx0 > xhi || bx1 < xlo || by0 > yhi || by1 < ylo {
                continue;
            }
            let (sx, sy) = bxy[j];
            let (tx, ty) = bxy[(j + 1) % m];
            let (wx, wy) = (tx - sx, ty - sy);
            let denom = rx * wy - ry * wx;
            let rlen = rx.hypot(ry);
            let wlen = wx.hypot(wy);
            if denom.abs() <= 1e-12 * rlen * wlen {
                // Near-parallel; inadmissible only if the segments touch.
                let gap = parallel_gap_2d((px, py), (qx, qy), (sx, sy), (tx, ty));
                if gap < DIAGRAM_GUARD * rlen.max(wlen) {
                    return None;
                }
                continue;
            }
            let (dx, dy) = (sx - px, sy - py);
            let s = (dx * wy - dy * wx) / denom;
            let t = (dx * ry - dy * rx) / denom;
            let inside =
                s > DIAGRAM_GUARD && s < 1.0 - DIAGRAM_GUARD && t > DIAGRAM_GUARD && t < 1.0 - DIAGRAM_GUARD;
            let near = s > -DIAGRAM_GUARD && s < 1.0 + DIAGRAM_GUARD && t > -DIAGRAM_GUARD
                && t < 1.0 + DIAGRAM_GUARD;
            if inside {
                let ha = adep[i] + s * (adep[(i + 1) % n] - adep[i]);
                let hb = bdep[j] + t * (bdep[(j + 1) % m] - bdep[j]);
                let h = ha - hb;
                if h == 0.0 {
                    return None;
                }
                let sign = if (denom > 0.0) == (h > 0.0) { 1 } else { -1 };
                sum += sign;
                if sign > 0 {
                    pos += 1;
                } else {
                    neg += 1;
                }
            } else if near {
                return None;
            }
        }
    }
    Some((sum, pos, neg))
}

/// Minimum 2D distance between two nearly parallel segments, taken over the
/// four endpoint-to-segment distances.
fn parallel_gap_2d(p: (f64, f64), q: (f64, f64), s: (f64, f64), t: (f64, f64)) -> f64 {
    let d = |a: (f64, f64), b: (f64, f64), x: (f64, f64)| -> f64 {
        let (ex, ey) = (b.0 - a.0, b.1 - a.1);
        let len2 = ex * ex + ey * ey;
        let u = if len2 <= 0.0 {
            0.0
        } else {
            (((x.0 - a.0) * ex + (x.1 - a.1) * ey) / len2).clamp(0.0, 1.0)
        };
        let (cx, cy) = (a.0 + u * ex, a.1 + u * ey);
        (x.0 - cx).hypot(x.1 - cy)
    };
    d(p, q, s).min(d(p, q, t)).min(d(s, t, p)).min(d(s, t, q))
}

/// Exact Gauss linking integral of two closed polylines: the sum over
/// segment pairs of the signed solid angle swept by the chord direction,
/// divided by `4 pi`. For disjoint polygons the result is the integer
/// linking number up to rounding noise.
pub fn polyline_gauss_linking(a: &[Vec3], b: &[Vec3]) -> f64 {
    let n = a.len();
    let m = b.len();
    let mut total = 0.0;
    for i in 0..n {
        let a0 = a[i];
        let a1 = a[(i + 1) % n];
        for j in 0..m {
            total += gauss_pair(&a0, &a1, &b[j], &b[(j + 1) % m]);
        }
    }
    total / (4.0 * std::f64::consts::PI)
}

/// Signed solid angle traced by the direction from segment `a` to segment
/// `b` as both parameters sweep `[0, 1]`: the spherical quadrilateral
/// through the four endpoint chords, split into two geodesic triangles.
fn gauss_pair(a0: &Vec3, a1: &Vec3, b0: &Vec3, b1: &Vec3) -> f64 {
    let unit = |v: Vec3| -> Option<Vec3> {
        let n = v.norm();
        if n < 1e-14 {
            None
        } else {
            Some(v / n)
        }
    };
    let (Some(n1), Some(n2), Some(n3), Some(n4)) = (
        unit(b0 - a0),
        unit(b1 - a0),
        unit(b1 - a1),
        unit(b0 - a1),
    ) else {
        return 0.0;
    };
    spherical_triangle_area(&n1, &n2, &n3) + spherical_triangle_area(&n1, &n3, &n4)
}

/// Signed area of the spherical triangle with unit-vector vertices, via the
/// half-angle tangent form, in `(-2 pi, 2 pi)`.
fn spherical_triangle_area(a: &Vec3, b: &Vec3, c: &Vec3) -> f64 {
    let num = a.dot(&b.cross(c));
    let den = 1.0 + a.dot(b) + b.dot(c) + c.dot(a);
    2.0 * num.atan2(den)
}

/// Minimum distance between two closed chart polylines, with bounding-box
/// pruning against the best distance so far.
pub fn polyline_min_gap(a: &[Vec3], b: &[Vec3]) -> f64 {
    let n = a.len();
    let m = b.len();
    let bbox: Vec<(Vec3, Vec3)> = (0..m)
        .map(|j| {
            let p = b[j];
            let q = b[(j + 1) % m];
            (p.inf(&q), p.sup(&q))
        })
        .collect();
    let mut best = f64::INFINITY;
    for i in 0..n {
        let p = a[i];
        let q = a[(i + 1) % n];
        let lo = p.inf(&q);
        let hi = p.sup(&q);
        for j in 0..m {
            let (blo, bhi) = bbox[j];
            let gap2 = {
                let dx = (lo.x - bhi.x).max(blo.x - hi.x).max(0.0);
                let dy = (lo.y - bhi.y).max(blo.y - hi.y).max(0.0);
                let dz = (lo.z - bhi.z).max(blo.z - hi.z).max(0.0);
                dx * dx + dy * dy + dz * dz
            };
            if gap2 >= best * best {
                continue;
            }
            let d = segment_distance(&p, &q, &b[j], &b[(j + 1) % m]);
            if d < best {
                best = d;
            }
        }
    }
    best
}

/// Closest distance between segments `p1 q1` and `p2 q2` by clamped
/// closest-point parameters.
fn segment_distance(p1: &Vec3, q1: &Vec3, p2: &Vec3, q2: &Vec3) -> f64 {
    let d1 = q1 - p1;
    let d2 = q2 - p2;
    let r = p1 - p2;
    let a = d1.norm_squared();
    let e = d2.norm_squared();
    let f = d2.dot(&r);
    let (s, t);
    if a <= 1e-30 && e <= 1e-30 {
        return r.norm();
    }
    if a <= 1e-30 {
        s = 0.0;
        t = (f / e).clamp(0.0, 1.0);
    } else {
        let c = d1.dot(&r);
        if e <= 1e-30 {
            t = 0.0;
            s = (-c / a).clamp(0.0, 1.0);
        } else {
            let b = d1.dot(&d2);
            let denom = a * e - b * b;
            let mut ss = if denom > 0.0 {
                ((b * f - c * e) / denom).clamp(0.0, 1.0)
            } else {
                0.0
            };
            let mut tt = (b * ss + f) / e;
            if tt < 0.0 {
                tt = 0.0;
                ss = (-c / a).clamp(0.0, 1.0);
            } else if tt > 1.0 {
                tt = 1.0;
                ss = ((b - c) / a).clamp(0.0, 1.0);
            }
            s = ss;
            t = tt;
        }
    }
    ((p1 + d1 * s) - (p2 + d2 * t)).norm()
}

/// The boundary loop of a face-paired necklace: one arc per face, running
/// through the transported marking points at the markings' windings. The
/// vertices are the marked points themselves, so the loop closes exactly,
/// and each pairing element must carry its arc onto the partner's arc
/// reversed, which certifies that the vertices form a single transported
/// orbit under the identification maps.
pub fn build_gamma_loop(
    p: &NecklacePolyhedron,
    fp: &FacePairing,
    tol: &Tolerances,
) -> Result<PiecewiseCircleLoop> {
    let n = p.faces().len();
    if fp.len() != n {
        return Err(Error::InvalidSpec(format!(
            "pairing covers {} faces but the polyhedron has {n}",
            fp.len()
        )));
    }
    let mut vertices = Vec::with_capacity(n);
    let mut windings = Vec::with_capacity(n);
    for i in 0..n {
        let prev = (i + n - 1) % n;
        let at_prev = fp.markings()[prev]
            .marking()
            .ok_or_else(|| Error::Underdetermined(format!("face {prev} carries no marking")))?;
        let own = fp.markings()[i]
            .marking()
            .ok_or_else(|| Error::Underdetermined(format!("face {i} carries no marking")))?;
        let face = fp.markings()[i].annulus();
        let drift = (face.carrier().vector() - p.faces()[i].carrier().vector()).norm();
        if drift > 1e-9 {
            return Err(Error::InvalidSpec(format!(
                "pairing markings do not belong to this polyhedron (face {i}, carrier drift {drift:.3e})"
            )));
        }
        vertices.push(at_prev.outer_point);
        windings.push(own.winding);
    }
    for i in 0..n {
        let d = vertices[i].spherical_distance(&vertices[(i + 1) % n]);
        if d <= 10.0 * tol.chart {
            return Err(Error::Degenerate(format!(
                "transported points on edges {i} and {} collide ({d:.3e}); \
                 the configuration is too close to an edge tangency",
                (i + 1) % n
            )));
        }
    }
    let mut arcs = Vec::with_capacity(n);
    for i in 0..n {
        arcs.push(connecting_arc(
            fp.markings()[i].annulus(),
            &vertices[i],
            &vertices[(i + 1) % n],
            windings[i],
            tol,
        )?);
    }
    let lp = PiecewiseCircleLoop::new(arcs, tol)?;
    // Every pairing must carry its arc onto the partner's arc reversed.
    for i in 0..n {
        let j = fp.partner(i);
        if i > j {
            continue;
        }
        let g = fp.element(i);
        let img = lp.arcs[i].transform(g, tol)?;
        let frame_img = img.circle().frame();
        let frame_j = lp.arcs[j].circle().frame();
        let residual = img
            .start()
            .spherical_distance(&lp.arcs[j].end())
            .max(img.end().spherical_distance(&lp.arcs[j].start()))
            .max(
                img.point_at_fraction(&frame_img, 0.5)
                    .spherical_distance(&lp.arcs[j].point_at_fraction(&frame_j, 0.5)),
            );
        if residual > tol.chart {
            return Err(Error::SolverFailure(format!(
                "pairing {i} -> {j} does not carry the boundary arc onto its \
                 partner reversed (residual {residual:.3e})"
            )));
        }
    }
    Ok(lp)
}

/// Scale-setting radius of a necklace ball; planes count as unit scale.
fn ball_scale(s: &Sphere) -> f64 {
    s.center_radius().map(|(_, r)| r).unwrap_or(1.0)
}

/// Whether the selected ball is the bounded chart side.
fn selects_bounded_side(s: &Sphere) -> bool {
    match s.center_radius() {
        Some((c, _)) => s.eval_normalized(&ChartPoint::Finite(c)) < 0.0,
        None => false,
    }
}

/// The carrier displaced into the selected ball by the relative depth
/// `eps`: radius scaled by `1 - eps` toward a bounded selected side,
/// `1 + eps` away from it, and planes translated by `eps` into their
/// selected half-space.
fn offset_sphere(ball: &Sphere, eps: f64) -> Result<Sphere> {
    if let Some((c, r)) = ball.center_radius() {
        if selects_bounded_side(ball) {
            Sphere::from_center_radius(c, (1.0 - eps) * r, Side::Inside)
        } else {
            Sphere::from_center_radius(c, (1.0 + eps) * r, Side::Outside)
        }
    } else if let Some((nrm, h)) = ball.plane_normal_offset() {
        Sphere::from_plane(nrm, h - eps, Side::Inside)
    } else {
        Err(Error::Degenerate("ball is neither a metric sphere nor a plane".into()))
    }
}

/// Unit chart direction at `x` (on or near the carrier of `ball`) pointing
/// into the selected ball.
fn inward_unit(ball: &Sphere, x: &Vec3) -> Result<Vec3> {
    let v = ball.vector();
    let grad = Vec3::new(v[1], v[2], v[3]) + (v[4] - v[0]) * x;
    let n = grad.norm();
    if n < 1e-12 {
        return Err(Error::Degenerate(
            "carrier gradient vanishes; point sits at a sphere focus".into(),
        ));
    }
    Ok(-grad / n)
}

/// Unit normal of the carrier of `s` at a chart point on it (sign is
/// arbitrary).
fn carrier_unit_normal(s: &Sphere, x: &Vec3) -> Result<Vec3> {
    let v = s.vector();
    let grad = Vec3::new(v[1], v[2], v[3]) + (v[4] - v[0]) * x;
    let n = grad.norm();
    if n < 1e-12 {
        return Err(Error::Degenerate("carrier normal vanishes".into()));
    }
    Ok(grad / n)
}

/// Nearest point of the carrier of `s` to the chart point `y`.
fn project_to_carrier(s: &Sphere, y: &Vec3) -> Result<Vec3> {
    if let Some((c, r)) = s.center_radius() {
        let d = y - c;
        let n = d.norm();
        if n < 1e-12 {
            return Err(Error::Degenerate("cannot project a sphere center onto it".into()));
        }
        Ok(c + d * (r / n))
    } else if let Some((nrm, h)) = s.plane_normal_offset() {
        Ok(y - nrm * (y.dot(&nrm) - h))
    } else {
        Err(Error::Degenerate("carrier is neither a metric sphere nor a plane".into()))
    }
}

/// Pushes a chart point on the carrier of `ball` to relative depth
/// `factor` inside the selected ball.
fn push_inside(ball: &Sphere, x: &Vec3, factor: f64) -> Result<Vec3> {
    if let Some((c, _)) = ball.center_radius() {
        if selects_bounded_side(ball) {
            Ok(c + (x - c) * (1.0 - factor))
        } else {
            Ok(c + (x - c) * (1.0 + factor))
        }
    } else if let Some((nrm, _)) = ball.plane_normal_offset() {
        Ok(x - nrm * factor)
    } else {
        Err(Error::Degenerate("ball is neither a metric sphere nor a plane".into()))
    }
}

fn finite(p: &ChartPoint) -> Result<Vec3> {
    match p {
        ChartPoint::Finite(v) => Ok(*v),
        ChartPoint::Infinity => Err(Error::Degenerate(
            "construction point escaped to infinity".into(),
        )),
    }
}

/// The companion loop of a necklace polyhedron, living strictly inside the
/// union of the necklace balls (the complement of the polyhedron).
///
/// At each edge a bisecting sphere through the edge circle makes equal
/// angles with the two adjacent carriers; the loop's vertex `q_i` sits on
/// that bisector, pushed off the edge into the lens shared by the two
/// adjacent balls, between each carrier and its `eps`-offset copy. The arc
/// from `q_i` to `q_{i+1}` crosses face `i`'s ball through a witness on the
/// face's middle circle pushed to half the offset depth. Every arc is
/// sampled for strict containment in its ball collar; a violation reports
/// which face's thickening failed.
pub fn build_beta_loop(
    p: &NecklacePolyhedron,
    eps: f64,
    tol: &Tolerances,
) -> Result<PiecewiseCircleLoop> {
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(Error::InvalidSpec(format!(
            "offset depth must be positive and finite, got {eps}"
        )));
    }
    let n = p.faces().len();
    let balls = p.balls();
    let mut offsets = Vec::with_capacity(n);
    for (i, ball) in balls.iter().enumerate() {
        offsets.push(offset_sphere(ball, eps).map_err(|_| Error::ThickeningEscape(i))?);
    }
    let mut bisectors = Vec::with_capacity(n);
    for i in 0..n {
        let prev = (i + n - 1) % n;
        let v = balls[prev].vector() - balls[i].vector();
        bisectors.push(Sphere::from_vector(v).map_err(|_| {
            Error::Degenerate(format!("no bisecting sphere at edge {i}: carriers do not cross"))
        })?);
    }
    // Offsets must still cross the bisector walls on both sides of their
    // face, otherwise the thickened collar has no wall to stand on.
    for i in 0..n {
        let next = (i + 1) % n;
        if separation(&offsets[i], &bisectors[i], tol) != Separation::Intersecting
            || separation(&offsets[i], &bisectors[next], tol) != Separation::Intersecting
        {
            return Err(Error::ThickeningEscape(i));
        }
    }
    let mut qs = Vec::with_capacity(n);
    for i in 0..n {
        qs.push(place_companion_vertex(p, &offsets, &bisectors, i, eps, tol)?);
    }
    let mut arcs = Vec::with_capacity(n);
    for i in 0..n {
        arcs.push(companion_arc(p, &offsets, i, &qs[i], &qs[(i + 1) % n], eps, tol)?);
    }
    PiecewiseCircleLoop::new(arcs, tol)
}

/// A vertex for the companion loop at edge `i`: on the bisector, inside
/// both adjacent balls, short of both offset spheres.
fn place_companion_vertex(
    p: &NecklacePolyhedron,
    offsets: &[Sphere],
    bisectors: &[Sphere],
    i: usize,
    eps: f64,
    tol: &Tolerances,
) -> Result<ChartPoint> {
    let n = p.faces().len();
    let prev = (i + n - 1) % n;
    let balls = p.balls();
    let x = finite(&p.edges()[i].lex_max_point(tol))?;
    let w_prev = inward_unit(&balls[prev], &x)?;
    let w_cur = inward_unit(&balls[i], &x)?;
    let u = w_prev + w_cur;
    if u.norm() < 1e-6 {
        return Err(Error::Degenerate(format!(
            "adjacent carriers are tangent along edge {i}; no interior direction"
        )));
    }
    let nb = carrier_unit_normal(&bisectors[i], &x)?;
    let t = u - nb * u.dot(&nb);
    if t.norm() < 1e-9 {
        return Err(Error::Degenerate(format!(
            "edge {i} admits no in-bisector direction into the ball lens"
        )));
    }
    let t = t / t.norm();
    let scale = ball_scale(&balls[prev]).min(ball_scale(&balls[i]));
    for shrink in [1.0, 0.5, 0.25, 0.125] {
        let q_raw = x + t * (0.5 * eps * scale * shrink);
        let q = match project_to_carrier(&bisectors[i], &q_raw) {
            Ok(q) => ChartPoint::Finite(q),
            Err(_) => continue,
        };
        let inside_both =
            balls[prev].eval_normalized(&q) < 0.0 && balls[i].eval_normalized(&q) < 0.0;
        let short_of_offsets =
            offsets[prev].eval_normalized(&q) > 0.0 && offsets[i].eval_normalized(&q) > 0.0;
        if inside_both && short_of_offsets {
            return Ok(q);
        }
    }
    Err(Error::ThickeningEscape(i))
}

/// The companion arc across face `i`'s ball, from `q_i` to `q_{i+1}`
/// through a witness at half the offset depth over the face's middle
/// circle, sampled for containment in the collar between the carrier and
/// its offset.
fn companion_arc(
    p: &NecklacePolyhedron,
    offsets: &[Sphere],
    i: usize,
    q0: &ChartPoint,
    q1: &ChartPoint,
    eps: f64,
    tol: &Tolerances,
) -> Result<CircleArc> {
    let face = &p.faces()[i];
    let ball = &p.balls()[i];
    let norm = normalize_annulus(face, None, tol)?;
    let angle_of = |q: &ChartPoint| -> Result<f64> {
        let img = finite(&norm.map.apply_boundary(*q))?;
        Ok(img.y.atan2(img.x))
    };
    let th0 = angle_of(q0)?;
    let th1 = angle_of(q1)?;
    let delta = wrap_angle(th1 - th0);
    let mid_angle = th0 + 0.5 * delta;
    let r_mid = (-0.5 * norm.modulus).exp();
    let mid_plane = ChartPoint::finite(r_mid * mid_angle.cos(), r_mid * mid_angle.sin(), 0.0);
    let on_face = finite(&norm.map.inverse().apply_boundary(mid_plane))?;
    let witness = ChartPoint::Finite(push_inside(ball, &on_face, 0.5 * eps)?);
    let arc = CircleArc::through(*q0, witness, *q1, tol)
        .map_err(|_| Error::ThickeningEscape(i))?;
    for s in arc.sample(96) {
        if ball.eval_normalized(&s) >= -1e-12 || offsets[i].eval_normalized(&s) <= 1e-12 {
            return Err(Error::ThickeningEscape(i));
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

/// Euler number with the strict crossing bound derived from the loop size.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EulerReport {
    pub e: i64,
    /// Number of faces, which is also the arc count of both loops.
    pub n: usize,
    /// The strict bound `(3/2) n^2` on `|e|`.
    pub bound: f64,
    pub within_bound: bool,
    pub link: LinkReport,
}

/// Orientation of the companion loop relative to the boundary loop. The
/// linking number determines the Euler number only up to sign; the
/// convention is fixed once so that the canonical grafted chain yields
/// `+1` (the Fuchsian configurations yield `0` either way).
const COMPANION_ORIENTATION: i64 = 1;

/// Euler number of the glued bundle: the linking number of the boundary
/// loop and the companion loop, with the documented orientation convention
/// and the strict `(3/2) n^2` bound check.
pub fn euler_number(
    p: &NecklacePolyhedron,
    fp: &FacePairing,
    eps: f64,
    seed: u64,
    tol: &Tolerances,
) -> Result<EulerReport> {
    let gamma = build_gamma_loop(p, fp, tol)?;
    let beta = build_beta_loop(p, eps, tol)?;
    let link = linking_number(&gamma, &beta, seed, tol)?;
    let e = COMPANION_ORIENTATION * link.value;
    let n = p.faces().len();
    let bound = 1.5 * (n * n) as f64;
    Ok(EulerReport { e, n, bound, within_bound: (e.abs() as f64) < bound, link })
}

/// One trial of the piecewise-linear linking experiment.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PlTrial {
    /// Diagram-route linking number of the final adversarial pair.
    pub lk: i64,
    pub gauss: f64,
    /// Whether the Gauss estimate agreed with the diagram value.
    pub agreement: bool,
}

/// Aggregate of the piecewise-linear linking experiment.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PlExperiment {
    pub n: usize,
    pub eps: f64,
    pub trials: Vec<PlTrial>,
    pub max_abs_lk: i64,
    /// `max |lk| / n`, the quantity tracked against a conjectured linear
    /// bound.
    pub max_ratio: f64,
}

/// Empirical study of how much a PL unknot can link an `eps`-perturbed copy
/// of itself.
///
/// Each trial samples a star-shaped polygon (sorted random angles, random
/// radii, independent heights). Star position makes the vertical shadow a
/// simple polygon, and a crossing-free diagram certifies the unknot; the
/// certificate is still checked explicitly and failures are rejected. The
/// companion starts as a uniform perturbation with offsets in closed
/// `eps`-balls and is then driven adversarially: vertex-at-a-time random
/// proposals are kept when they increase `|lk|`, with the Gauss sum updated
/// incrementally. The final pair is scored by the projected-diagram route
/// and cross-checked against the Gauss value.
pub fn pl_linking_experiment(
    n: usize,
    trials: usize,
    eps: f64,
    seed: u64,
) -> Result<PlExperiment> {
    if n < 3 {
        return Err(Error::InvalidSpec(format!(
            "a closed polygon needs at least 3 vertices, got {n}"
        )));
    }
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(Error::InvalidSpec(format!(
            "perturbation radius must be positive and finite, got {eps}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(trials);
    let mut max_abs = 0i64;
    for _ in 0..trials {
        let base = sample_star_unknot(n, &mut rng)?;
        let mut offsets = sample_offsets(n, eps, &mut rng, &base)?;
        let mut columns = gauss_columns(&base, &offsets);
        let mut best = column_link(&columns);
        // Hill-climb on |lk|: per-vertex proposals, each touching only the
        // two incident companion segments, so only two column sums change.
        for _ in 0..6 {
            for v in 0..n {
                let old = offsets[v];
                let step = random_in_ball(&mut rng, 0.5 * eps);
                let mut cand = old + step;
                let r = cand.norm();
                if r > eps {
                    cand *= eps / r;
                }
                offsets[v] = cand;
                if !moved_segments_clear(&base, &offsets, v) {
                    offsets[v] = old;
                    continue;
                }
                let saved = [columns[(v + n - 1) % n], columns[v]];
                refresh_columns(&base, &offsets, &mut columns, v);
                let cand_lk = column_link(&columns);
                if cand_lk.abs() > best.abs() {
                    best = cand_lk;
                } else {
                    offsets[v] = old;
                    columns[(v + n - 1) % n] = saved[0];
                    columns[v] = saved[1];
                }
            }
        }
        let companion: Vec<Vec3> = (0..n).map(|k| base[k] + offsets[k]).collect();
        let gauss = polyline_gauss_linking(&base, &companion);
        let (lk, _, _) = polyline_diagram_linking(&base, &companion, &mut rng)?;
        debug_assert_eq!(lk, best, "incremental and full evaluations disagree");
        let agreement = (gauss - lk as f64).abs() < ROUTE_AGREEMENT;
        max_abs = max_abs.max(lk.abs());
        out.push(PlTrial { lk, gauss, agreement });
    }
    Ok(PlExperiment {
        n,
        eps,
        max_abs_lk: max_abs,
        max_ratio: max_abs as f64 / n as f64,
        trials: out,
    })
}

/// Star-shaped polygon with a certified crossing-free vertical shadow.
fn sample_star_unknot(n: usize, rng: &mut ChaCha8Rng) -> Result<Vec<Vec3>> {
    let tau = std::f64::consts::TAU;
    'outer: for _ in 0..100 {
        let mut angles: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..tau)).collect();
        angles.sort_by(f64::total_cmp);
        for k in 0..n {
            let next = angles[(k + 1) % n] + if k + 1 == n { tau } else { 0.0 };
            if next - angles[k] < 0.05 * tau / n as f64 {
                continue 'outer;
            }
        }
        let pts: Vec<Vec3> = angles
            .iter()
            .map(|&th| {
                let r = rng.random_range(0.6..1.4);
                Vec3::new(r * th.cos(), r * th.sin(), rng.random_range(-0.3..0.3))
            })
            .collect();
        if shadow_is_simple(&pts) {
            return Ok(pts);
        }
    }
    Err(Error::GenerationFailure(
        "no admissible star polygon in 100 attempts".into(),
    ))
}

/// The crossing-free certificate: no two non-adjacent edges of the vertical
/// shadow intersect.
fn shadow_is_simple(pts: &[Vec3]) -> bool {
    let n = pts.len();
    for i in 0..n {
        for j in i + 1..n {
            if j == i + 1 || (i == 0 && j == n - 1) {
                continue;
            }
            let (p, q) = (pts[i], pts[(i + 1) % n]);
            let (s, t) = (pts[j], pts[(j + 1) % n]);
            let cross = |ax: f64, ay: f64, bx: f64, by: f64| ax * by - ay * bx;
            let d = cross(q.x - p.x, q.y - p.y, t.x - s.x, t.y - s.y);
            if d.abs() < 1e-15 {
                continue;
            }
            let ss = cross(s.x - p.x, s.y - p.y, t.x - s.x, t.y - s.y) / d;
            let tt = cross(s.x - p.x, s.y - p.y, q.x - p.x, q.y - p.y) / d;
            if ss > 0.0 && ss < 1.0 && tt > 0.0 && tt < 1.0 {
                return false;
            }
        }
    }
    true
}

/// Uniform point in the closed ball of the given radius.
fn random_in_ball(rng: &mut ChaCha8Rng, radius: f64) -> Vec3 {
    random_unit(rng) * (radius * rng.random::<f64>().cbrt())
}

/// Initial companion offsets; resampled until the companion is disjoint
/// from the base polygon.
fn sample_offsets(
    n: usize,
    eps: f64,
    rng: &mut ChaCha8Rng,
    base: &[Vec3],
) -> Result<Vec<Vec3>> {
    for _ in 0..50 {
        let offsets: Vec<Vec3> = (0..n).map(|_| random_in_ball(rng, eps)).collect();
        let companion: Vec<Vec3> = (0..n).map(|k| base[k] + offsets[k]).collect();
        if polyline_min_gap(base, &companion) > 1e-7 {
            return Ok(offsets);
        }
    }
    Err(Error::GenerationFailure(
        "companion kept touching the base polygon".into(),
    ))
}

/// Per-companion-segment sums of Gauss solid angles against the whole base
/// polygon.
fn gauss_columns(base: &[Vec3], offsets: &[Vec3]) -> Vec<f64> {
    let n = base.len();
    (0..n)
        .map(|j| {
            let b0 = base[j] + offsets[j];
            let b1 = base[(j + 1) % n] + offsets[(j + 1) % n];
            (0..n)
                .map(|i| gauss_pair(&base[i], &base[(i + 1) % n], &b0, &b1))
                .sum()
        })
        .collect()
}

/// Recomputes the two column sums touched by moving companion vertex `v`.
fn refresh_columns(base: &[Vec3], offsets: &[Vec3], columns: &mut [f64], v: usize) {
    let n = base.len();
    for j in [(v + n - 1) % n, v] {
        let b0 = base[j] + offsets[j];
        let b1 = base[(j + 1) % n] + offsets[(j + 1) % n];
        columns[j] = (0..n)
            .map(|i| gauss_pair(&base[i], &base[(i + 1) % n], &b0, &b1))
            .sum();
    }
}

fn column_link(columns: &[f64]) -> i64 {
    (columns.iter().sum::<f64>() / (4.0 * std::f64::consts::PI)).round() as i64
}

/// Checks that the two companion segments incident to vertex `v` keep clear
/// of every base segment.
fn moved_segments_clear(base: &[Vec3], offsets: &[Vec3], v: usize) -> bool {
    let n = base.len();
    for j in [(v + n - 1) % n, v] {
        let b0 = base[j] + offsets[j];
        let b1 = base[(j + 1) % n] + offsets[(j + 1) % n];
        for i in 0..n {
            if segment_distance(&base[i], &base[(i + 1) % n], &b0, &b1) <= 1e-7 {
                return false;
            }
        }
    }
    true
}

/// 2D orthonormal basis of the plane orthogonal to `u`, right-handed with
/// `u` as the third axis.
fn plane_basis(u: &Vec3) -> (Vec3, Vec3) {
    let pick = if u.x.abs() < 0.8 { Vec3::x() } else { Vec3::y() };
    let e1 = u.cross(&pick).normalize();
    let e2 = u.cross(&e1);
    (e1, e2)
}
