use thiserror::Error;

/// Errors raised anywhere in the laboratory.
#[derive(Debug, Error)]
pub enum LabError {
    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("radius {r} outside admissible range [{min}, {max}]")]
    Radius { r: f64, min: f64, max: f64 },

    #[error("one-phase solver stage {stage} (eps_pen = {eps_pen}) did not converge after {iterations} iterations")]
    NonConvergence {
        stage: usize,
        eps_pen: f64,
        iterations: usize,
        energy_history: Vec<f64>,
    },

    #[error("one-phase solution residual {residual:e} exceeds pde_tol {tol:e}")]
    Residual { residual: f64, tol: f64 },

    #[error("thin obstacle relaxation did not converge after {iterations} sweeps (last update {last_update:e})")]
    ViNonConvergence {
        iterations: usize,
        last_update: f64,
        residual_history: Vec<f64>,
    },

    #[error("degenerate solution: {0}")]
    Degenerate(String),

    #[error("degenerate scale: H({r}) = {value}")]
    DegenerateScale { r: f64, value: f64 },

    #[error("not enough samples for {what}: need {need}, got {got}")]
    Arity {
        what: &'static str,
        need: usize,
        got: usize,
    },

    #[error("frame error: {0}")]
    Frame(String),

    #[error("hypothesis not satisfied: {0}")]
    Hypothesis(String),

    #[error("root finding did not converge at r = {r}")]
    Root { r: f64 },

    #[error("formula error: {0}")]
    Formula(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("{module} [{stage}]: {source}")]
    Stage {
        module: &'static str,
        stage: String,
        #[source]
        source: Box<LabError>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, LabError>;

impl LabError {
    /// Attach the module and pipeline stage that produced the error.
    pub fn in_stage(self, module: &'static str, stage: impl Into<String>) -> Self {
        LabError::Stage {
            module,
            stage: stage.into(),
            source: Box::new(self),
        }
    }
}

pub(crate) trait StageExt<T> {
    fn stage(self, module: &'static str, stage: &str) -> Result<T>;
}

impl<T> StageExt<T> for Result<T> {
    fn stage(self, module: &'static str, stage: &str) -> Result<T> {
        self.map_err(|e| e.in_stage(module, stage))
    }
}
