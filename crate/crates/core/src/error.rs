use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Section of a container or payload in which a decoding error was found.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Section {
    Header,
    Geometry,
    Attributes,
}

impl std::fmt::Display for Section {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Section::Header => "header",
            Section::Geometry => "geometry",
            Section::Attributes => "attributes",
        })
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("point {index} lies outside the voxel grid: {detail}")]
    OutOfRange { index: usize, detail: String },

    /// `offset` is in bytes for byte-oriented streams and in bits for the
    /// entropy-coded attribute payload.
    #[error("corrupt {section} stream at offset {offset}: {detail}")]
    CorruptStream {
        section: Section,
        offset: usize,
        detail: String,
    },

    #[error("malformed file: {0}")]
    Malformed(String),

    #[error("parse error at {location}: {detail}")]
    Parse { location: String, detail: String },

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub(crate) fn corrupt(section: Section, offset: usize, detail: impl Into<String>) -> Self {
        Error::CorruptStream {
            section,
            offset,
            detail: detail.into(),
        }
    }
}
