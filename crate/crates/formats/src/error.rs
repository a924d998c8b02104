use dragkit_core::DragError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("malformed spec: {0}")]
    MalformedSpec(String),

    #[error("mask is {got_w}x{got_h}, expected {want_w}x{want_h} pixels or the {grid_w}x{grid_h} token grid")]
    MaskSizeMismatch {
        got_w: usize,
        got_h: usize,
        want_w: usize,
        want_h: usize,
        grid_w: usize,
        grid_h: usize,
    },

    #[error("unsupported image: {0}")]
    UnsupportedImage(String),

    #[error("image of {width}x{height} px exceeds the {limit} px area limit")]
    ImageTooLarge { width: usize, height: usize, limit: usize },

    #[error("malformed field file: {0}")]
    MalformedField(String),

    #[error(transparent)]
    Drag(#[from] DragError),

    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

impl FormatError {
    pub fn code(&self) -> &'static str {
        match self {
            FormatError::MalformedSpec(_) => "MalformedSpec",
            FormatError::MaskSizeMismatch { .. } => "MaskSizeMismatch",
            FormatError::UnsupportedImage(_) => "UnsupportedImage",
            FormatError::ImageTooLarge { .. } => "ImageTooLarge",
            FormatError::MalformedField(_) => "MalformedField",
            FormatError::Drag(e) => e.code(),
            FormatError::Io(_) => "Io",
        }
    }

    /// Whether the caller's input caused the failure (as opposed to the
    /// environment or a bug).
    pub fn is_user_error(&self) -> bool {
        !matches!(self, FormatError::Io(_))
    }
}

pub type Result<T, E = FormatError> = std::result::Result<T, E>;
