use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParamError {
    #[error("at least one growth exponent is required")]
    EmptyExponents,
    #[error("alpha must satisfy 0 < alpha <= 1, got {0}")]
    Alpha(f64),
    #[error("growth exponent p_{} must satisfy p > 1, got {value}", axis + 1)]
    Exponent { axis: usize, value: f64 },
    #[error("structure constant Lambda must satisfy Lambda >= 1, got {0}")]
    StructureConstant(f64),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum KernelError {
    #[error("exponent must be positive, got {0}")]
    NonPositiveExponent(f64),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GridError {
    #[error("grid dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("axis {axis}: cell count must be even and at least 8, got {cells}")]
    Cells { axis: usize, cells: usize },
    #[error("axis {axis}: half-length must be positive and finite, got {value}")]
    HalfLength { axis: usize, value: f64 },
    #[error("grid has {cells} cells, above the cap of {cap}")]
    TooLarge { cells: usize, cap: usize },
    #[error("value buffer has {got} entries, grid expects {expected}")]
    Length { expected: usize, got: usize },
    #[error("grid function contains a non-finite value at flat index {0}")]
    NonFinite(usize),
    #[error("axis {axis} out of range for a {dim}-dimensional grid")]
    Axis { axis: usize, dim: usize },
    #[error("cylinder axis {axis}: extent {extent} is below one cell ({spacing})")]
    CylinderTooSmall { axis: usize, extent: f64, spacing: f64 },
    #[error("cylinder axis {axis}: [{lo}, {hi}] does not fit strictly inside (-{half_length}, {half_length})")]
    CylinderOutside { axis: usize, lo: f64, hi: f64, half_length: f64 },
    #[error("time window [{lo}, {hi}] is empty or outside the recorded range")]
    TimeWindow { lo: f64, hi: f64 },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolverError {
    #[error("invalid solver configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("stiffness floor: dt = {dt:e} below dt_min = {dt_min:e} at t = {t}")]
    StiffnessFloor { t: f64, dt: f64, dt_min: f64 },
    #[error("domain exhausted: support half-width {halfwidth} on axis {axis} within 2 cells of half-length {half_length} at t = {t}")]
    DomainExhausted { t: f64, axis: usize, halfwidth: f64, half_length: f64 },
    #[error("non-finite value produced at t = {t}")]
    NonFinite { t: f64 },
}

impl SolverError {
    /// Process exit code for command-line front ends.
    pub fn exit_code(&self) -> i32 {
        match self {
            SolverError::StiffnessFloor { .. } => 2,
            SolverError::DomainExhausted { .. } => 3,
            SolverError::NonFinite { .. } => 4,
            SolverError::Config(_) | SolverError::Grid(_) => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalysisError {
    #[error("mollification width must be positive, got {0}")]
    Width(f64),
    #[error("signal needs at least two samples and a positive step")]
    Signal,
    #[error("recursion parameters invalid: {0}")]
    Recursion(String),
    #[error("function must vanish on a collar of at least {collar} cells")]
    Collar { collar: usize },
    #[error("Troisi ratio needs p̄ < N")]
    NoConjugate,
    #[error(transparent)]
    Grid(#[from] GridError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EnergyError {
    #[error("need at least {need} snapshots inside the window, found {found}")]
    TooFewSnapshots { need: usize, found: usize },
    #[error("snapshots do not share a common grid")]
    MixedGrids,
    #[error("probe invalid: {0}")]
    Probe(String),
    #[error(transparent)]
    Grid(#[from] GridError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DiagnosticsError {
    #[error("fit needs at least {need} points in the window, found {found}")]
    TooFewPoints { need: usize, found: usize },
    #[error("non-positive value {value} at t = {t} in a log-log fit")]
    NonPositive { t: f64, value: f64 },
    #[error("check refused: {0}")]
    Refused(String),
}

#[derive(Debug, Error)]
pub enum IoError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("bad GFB1 magic bytes")]
    Magic,
    #[error("GFB1 payload has {got} bytes, header implies {expected}")]
    Length { expected: usize, got: usize },
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("time-series CSV: {0}")]
    Csv(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("exact profile fails the PDE residual check: relative residual {relative:e} (tolerance {tolerance:e})")]
    Residual { relative: f64, tolerance: f64 },
    #[error("oracle setup invalid: {0}")]
    Config(String),
    #[error(transparent)]
    Param(#[from] ParamError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Solver(#[from] SolverError),
}
