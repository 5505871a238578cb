use thiserror::Error;

/// Library-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("elements belong to different group backends ({0} vs {1})")]
    BackendMismatch(String, String),

    #[error("generating set is not closed under inverses: missing inverse of '{0}'")]
    NotInverseClosed(String),

    #[error("'{0}' is not a valid word over the declared generators")]
    BadWord(String),

    #[error("multiplication table is not a group: {0}")]
    BadTable(String),

    #[error("vertex orbit '{0}' has an infinite stabilizer; a valence budget is required")]
    NeedsBudget(String),

    #[error("unknown orbit id '{0}'")]
    UnknownOrbit(String),

    #[error("vertex {0} is not in the window")]
    NotInWindow(String),

    #[error("vertices are in different window components (sizes {0} and {1})")]
    Disconnected(usize, usize),

    #[error("edge orbit '{0}' admits an endpoint-swapping element; subdivide the edge or declare the flip")]
    EdgeInversion(String),

    #[error("'{0}' does not generate within the checked ball; offending element: {1}")]
    NotGenerating(String, String),

    #[error("relative generator overlap check failed for '{0}'")]
    OverlapFailed(String),

    #[error("no vertex orbit with stabilizer '{0}' in spec '{1}'")]
    MissingPeripheralVertex(String, String),

    #[error("removal of orbit '{0}' disconnects the graph (witness pair {1} / {2})")]
    RemovalDisconnects(String, String, String),

    #[error("paths must share both endpoints")]
    EndpointMismatch,

    #[error("path is not embedded (repeated vertex {0})")]
    NotEmbedded(String),

    #[error("paths share an interior vertex ({0})")]
    CommonInterior(String),

    #[error("path is not a ({0},{1})-quasigeodesic; violating subpath between positions {2} and {3}")]
    NotQuasigeodesic(f64, f64, usize, usize),

    #[error("simple-ladder threshold too small: need n > {0}, got n = {1}")]
    LadderGate(f64, usize),

    #[error("geodesic shorter than 10*eps ({0} < {1}); use the single-cell branch")]
    SingleCellBranch(usize, f64),

    #[error("boundary circuit {0} missing from the two-complex cell list")]
    MissingCell(String),

    #[error("circuit construction produced a non-embedded boundary (witness vertex {0})")]
    BadCircuit(String),

    #[error("window budget exhausted: {0}")]
    WindowExhausted(String),

    #[error("factorization failed for element '{0}' within the checked radius")]
    FactorizationFailed(String),

    #[error("no decomposition found for '{0}' within radius {1}")]
    NoDecomposition(String, usize),

    #[error("witness subgraph check failed: {0}")]
    BadWitness(String),

    #[error("malformed input: {0}")]
    BadInput(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
