use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("degenerate direction: DF maps the direction to zero")]
    DegenerateDirection,

    #[error("unsupported model: {0}")]
    UnsupportedModel(String),

    #[error("newton iteration failed on branch word {word}")]
    BranchFailure { word: String },

    #[error("tangent leaves the unstable cone at parameter t = {t}")]
    ConeViolation { t: f64 },

    #[error("degenerate pushforward at parameter t = {t}: D_*F = {dstar:e} below floor")]
    DegeneratePushforward { t: f64, dstar: f64 },

    #[error("no contraction for jet order {order}: observed coefficient {q} >= 1")]
    NoContraction { order: usize, q: f64 },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("radius {delta} is below the resolvable limit {min} of the grid")]
    Resolution { delta: f64, min: f64 },

    #[error("orbit comes within tolerance of the critical set at step {step}")]
    NearCritical { step: usize },

    #[error("no dominated splitting detected: {0}")]
    NoDomination(String),

    #[error("invalid parameters: {0}")]
    Parameter(String),

    #[error("degenerate level set: gradient norm {0:e} below floor")]
    DegenerateLevelSet(f64),

    #[error("derivative order {requested} exceeds field smoothness {max}")]
    Smoothness { requested: usize, max: usize },

    #[error("resource limit exceeded: {0}")]
    Resource(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    /// Short machine-readable tag.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Domain(_) => "domain",
            Error::DegenerateDirection => "degenerate-direction",
            Error::UnsupportedModel(_) => "unsupported-model",
            Error::BranchFailure { .. } => "branch-failure",
            Error::ConeViolation { .. } => "cone-violation",
            Error::DegeneratePushforward { .. } => "degenerate-pushforward",
            Error::NoContraction { .. } => "no-contraction",
            Error::Precondition(_) => "precondition",
            Error::Resolution { .. } => "resolution",
            Error::NearCritical { .. } => "near-critical",
            Error::NoDomination(_) => "no-domination",
            Error::Parameter(_) => "parameter",
            Error::DegenerateLevelSet(_) => "degenerate-level-set",
            Error::Smoothness { .. } => "smoothness",
            Error::Resource(_) => "resource",
            Error::Config(_) => "config",
            Error::Io(_) => "io",
        }
    }

    /// True for failures caused by the numerics rather than by the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::DegenerateDirection
                | Error::BranchFailure { .. }
                | Error::ConeViolation { .. }
                | Error::DegeneratePushforward { .. }
                | Error::NoContraction { .. }
                | Error::NearCritical { .. }
                | Error::NoDomination(_)
                | Error::DegenerateLevelSet(_)
                | Error::Resource(_)
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
