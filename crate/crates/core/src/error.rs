//! Crate-wide error type.

/// Kinds of necklace violation reported by pattern validation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NecklaceViolationKind {
    /// Two spheres that are not cyclic neighbours overlap.
    NonAdjacentIntersect,
    /// Two cyclic neighbours fail to cross, so an edge circle is missing.
    AdjacentDisjoint,
}

impl std::fmt::Display for NecklaceViolationKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            NecklaceViolationKind::NonAdjacentIntersect => write!(f, "non-adjacent spheres intersect"),
            NecklaceViolationKind::AdjacentDisjoint => write!(f, "adjacent spheres are disjoint"),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid point: {0}")]
    InvalidPoint(String),

    #[error("matrix is not in SO+(4,1): {0}")]
    InvalidElement(String),

    #[error("invalid construction data: {0}")]
    InvalidSpec(String),

    #[error("centralizer is ambiguous: element is numerically the identity")]
    AmbiguousCentralizer,

    #[error("degenerate configuration: {0}")]
    Degenerate(String),

    #[error("necklace violation between spheres {i} and {j}: {kind}")]
    NecklaceViolation {
        i: usize,
        j: usize,
        kind: NecklaceViolationKind,
    },

    #[error("edge {0} is degenerate: adjacent spheres are tangent")]
    DegenerateEdge(usize),

    #[error("gluing scheme is not orientable: {0}")]
    NonOrientable(String),

    #[error("gluing schemes are not equivalent: {0}")]
    SchemeMismatch(String),

    #[error("annuli cannot be paired: moduli {0:.12} and {1:.12} differ")]
    ModulusMismatch(f64, f64),

    #[error("face pairing is underdetermined: {0}")]
    Underdetermined(String),

    #[error("pairing routes disagree: max matrix difference {0:.3e}")]
    RouteMismatch(f64),

    #[error("no circle arc realizes the requested winding")]
    NoSuchArc,

    #[error("winding number undefined: curve passes through a normalization pole")]
    UndefinedWinding,

    #[error("element is not in the required centralizer (residual {0:.3e})")]
    NotInCentralizer(f64),

    #[error("invalid separating index {k} for genus {genus}")]
    InvalidSeparatingIndex { k: usize, genus: usize },

    #[error("linking number indeterminate: loop gap {0:.3e} too small")]
    IndeterminateLink(f64),

    #[error("no admissible projection direction found after {0} attempts")]
    ProjectionFailure(usize),

    #[error("linking routes disagree: projection {projection} vs gauss {gauss:.6}")]
    LinkRouteMismatch { projection: i64, gauss: f64 },

    #[error("solver failed: {0}")]
    SolverFailure(String),

    #[error("thickened annulus {0} escapes the polyhedron; reduce epsilon")]
    ThickeningEscape(usize),

    #[error("transverse basepoint search exhausted budget {budget} (worst margin {margin:.3e} at pair {pair:?})")]
    SearchFailure {
        budget: usize,
        margin: f64,
        pair: (usize, usize),
    },

    #[error("random group generation failed: {0}")]
    GenerationFailure(String),

    #[error("no unique invariant 3-sphere: {0}")]
    NoInvariantSphere(String),

    #[error("unsupported scene schema version {0:?}")]
    UnsupportedVersion(String),

    #[error("scene validation failed: {0}")]
    SceneInvalid(String),

    #[error("cannot parse word {0:?}: {1}")]
    WordParse(String, String),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
