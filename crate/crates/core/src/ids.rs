//! Opaque identifiers and the simulation clock.

use std::fmt;

use serde::{Deserialize, Serialize};

/// Simulation time in integer ticks (nominally 10 ms each).
pub type Tick = u64;

macro_rules! string_id {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(pub String);

        impl $name {
            pub fn new(id: impl Into<String>) -> Self {
                Self(id.into())
            }

            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl From<&str> for $name {
            fn from(s: &str) -> Self {
                Self(s.to_owned())
            }
        }
    };
}

string_id!(UserId);
string_id!(DeviceId);
string_id!(SessionId);
string_id!(
    /// Network element identifier; ordering is lexicographic and drives
    /// routing tie-breaks.
    NodeId
);
string_id!(SliceId);
