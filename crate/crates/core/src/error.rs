use alloc::string::String;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(&'static str),
    #[error("point is behind the camera (z = {0})")]
    BehindCamera(f64),
    #[error("invalid intrinsics: {0}")]
    InvalidIntrinsics(&'static str),
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("pixel ({u}, {v}) is outside the {width}x{height} image")]
    OutOfBounds { u: f64, v: f64, width: u32, height: u32 },
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("missing metadata: {0}")]
    MissingMetadata(&'static str),
    #[error("task `{task}` is not supported by prompt variant `{variant}`")]
    UnsupportedTask { task: &'static str, variant: &'static str },
    #[error("duplicate marker label `{0}`")]
    DuplicateLabel(String),
    #[error("empty input: {0}")]
    Empty(&'static str),
    #[error("need {needed} valid pixels, only {available} available")]
    InsufficientPixels { needed: usize, available: usize },
    #[error("task `{0}` requires camera poses on both frames")]
    MissingPose(&'static str),
    #[error("no valid depth at query pixel after {0} attempts")]
    InvalidDepth(usize),
    #[error("expected {expected} values, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("unknown dataset `{0}`")]
    UnknownDataset(String),
    #[error("template error: {0}")]
    Template(String),
}
