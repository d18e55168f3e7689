use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("zero polynomial")]
    ZeroPolynomial,
    #[error("newton map needs at least 3 distinct roots, found {distinct}")]
    DegreeTooSmall { distinct: usize },
    #[error("cannot parse polynomial: {0}")]
    Parse(String),
    #[error("numerator and denominator share a root near {0}")]
    NotReduced(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("point is not fixed (residual {residual:e})")]
    NotFixed { residual: f64 },
    #[error("points do not form a cycle (residual {residual:e})")]
    NotPeriodic { residual: f64 },
    #[error("bound violated: {0}")]
    BoundViolated(String),
    #[error("root is not superattracting (multiplier modulus {0:e})")]
    NotSuperattracting(f64),
    #[error("extra critical point in immediate basin near {0}")]
    ExtraCriticalPoint(String),
    #[error("ray continuation stalled at potential {potential}")]
    RayStalled { potential: f64 },
    #[error("critical value on lifted curve near {0}")]
    CriticalValueOnCurve(String),
    #[error("lift diverged: {0}")]
    LiftDiverged(String),
    #[error("edges {a} and {b} cross away from a vertex")]
    EmbeddingViolation { a: usize, b: usize },
    #[error("pole coverage not reached within {0} levels")]
    NotReachedWithin(usize),
    #[error("no separating circle at level {0}")]
    NoCircleAtThisLevel(usize),
    #[error("point is attracted to root {0}")]
    InBasin(usize),
    #[error("markov violation: {0}")]
    MarkovViolation(String),
    #[error("depth exhausted at {0}")]
    DepthExhausted(usize),
    #[error("no critical point in the fiber")]
    NoCriticalInFiber,
    #[error("domain not compactly contained (boundary distance {0:e})")]
    NotCompactlyContained(f64),
    #[error("thickening patches collide below epsilon floor")]
    PatchCollision,
    #[error("no associable critical orbit for cycle {0}")]
    NoAssociableCritical(usize),
    #[error("injectivity failure: {0}")]
    InjectivityFailure(String),
    #[error("separation undecided up to level {0}")]
    Undecided(usize),
    #[error("interpolation ill-conditioned: {0}")]
    InterpolationIllConditioned(String),
    #[error("topology error: {0}")]
    Topology(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
