use std::fmt;

/// Image border named in out-of-bounds errors.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Edge {
    Left,
    Right,
    Top,
    Bottom,
}

impl fmt::Display for Edge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Edge::Left => "left",
            Edge::Right => "right",
            Edge::Top => "top",
            Edge::Bottom => "bottom",
        };
        f.write_str(s)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("out of bounds: region exceeds the {edge} edge of a {width}x{height} image")]
    OutOfBounds {
        edge: Edge,
        width: usize,
        height: usize,
    },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("geometry: {0}")]
    Geometry(String),
    #[error("no particle: {0}")]
    NoParticle(String),
    #[error("fit failed: {message} (residual rms {residual:.3e})")]
    Fit { message: String, residual: f64 },
    #[error("collinear design matrix: {0}")]
    Collinear(String),
    #[error("decode error at byte {offset}: {message}")]
    Decode { offset: usize, message: String },
    #[error("unsupported image: {0}")]
    Unsupported(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid_arg<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}
