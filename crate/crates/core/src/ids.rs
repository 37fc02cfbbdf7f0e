//! Opaque entity identifiers.
//!
//! An identifier is 1 to 128 printable characters with no whitespace and
//! compares by exact byte equality. Deserialization is unchecked so that a
//! malformed identifier surfaces as a validation violation rather than a
//! parse failure; use `new` to construct a checked value.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const MAX_ID_CHARS: usize = 128;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum IdError {
    #[error("identifier is empty")]
    Empty,
    #[error("identifier exceeds {MAX_ID_CHARS} characters")]
    TooLong,
    #[error("identifier contains whitespace or a non-printable character")]
    BadCharacter,
}

/// Checks the identifier rules shared by every id type.
pub fn check_identifier(s: &str) -> Result<(), IdError> {
    if s.is_empty() {
        return Err(IdError::Empty);
    }
    if s.chars().count() > MAX_ID_CHARS {
        return Err(IdError::TooLong);
    }
    if s.chars().any(|c| c.is_whitespace() || c.is_control()) {
        return Err(IdError::BadCharacter);
    }
    Ok(())
}

/// Checks a free-standing label (task class, subdomain, evidence kind).
///
/// Labels follow the identifier rules and additionally exclude `,` and `/`,
/// which separate list items and context components in text formats.
pub fn check_label(s: &str) -> Result<(), IdError> {
    check_identifier(s)?;
    if s.contains([',', '/']) {
        return Err(IdError::BadCharacter);
    }
    Ok(())
}

macro_rules! identifier {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(String);

        impl $name {
            pub fn new(s: impl Into<String>) -> Result<Self, IdError> {
                let s = s.into();
                check_identifier(&s)?;
                Ok(Self(s))
            }

            pub fn as_str(&self) -> &str {
                &self.0
            }

            pub fn is_well_formed(&self) -> bool {
                check_identifier(&self.0).is_ok()
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl fmt::Debug for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{}({:?})", stringify!($name), self.0)
            }
        }

        impl std::str::FromStr for $name {
            type Err = IdError;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                Self::new(s)
            }
        }
    };
}

identifier!(
    /// An agent offering work in the marketplace.
    AgentId
);
identifier!(
    /// A verifier that assesses task outcomes.
    VerifierId
);
identifier!(TaskId);
identifier!(OwnerId);
identifier!(
    /// Identifier of a verification regime within a catalog.
    RegimeId
);
