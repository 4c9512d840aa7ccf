use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Satellite identity: orbit index plus in-orbit slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SatId {
    pub orbit: u16,
    pub slot: u16,
}

impl SatId {
    pub const fn new(orbit: u16, slot: u16) -> Self {
        Self { orbit, slot }
    }
}

impl fmt::Display for SatId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "S{}.{}", self.orbit, self.slot)
    }
}

/// Any node in the scenario. Rendered as `S<orbit>.<slot>` for satellites
/// and `G<id>` for ground stations and HAPs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum NodeId {
    Sat(SatId),
    Ground(u16),
}

impl NodeId {
    pub fn as_sat(self) -> Option<SatId> {
        match self {
            NodeId::Sat(s) => Some(s),
            NodeId::Ground(_) => None,
        }
    }

    pub fn as_ground(self) -> Option<u16> {
        match self {
            NodeId::Ground(g) => Some(g),
            NodeId::Sat(_) => None,
        }
    }
}

impl From<SatId> for NodeId {
    fn from(s: SatId) -> Self {
        NodeId::Sat(s)
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NodeId::Sat(s) => s.fmt(f),
            NodeId::Ground(g) => write!(f, "G{g}"),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("invalid node id {0:?}: expected S<orbit>.<slot> or G<id>")]
pub struct ParseNodeIdError(pub String);

impl FromStr for NodeId {
    type Err = ParseNodeIdError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || ParseNodeIdError(s.to_owned());
        let digits = |v: &str| -> Result<u16, ParseNodeIdError> {
            if v.is_empty() || !v.bytes().all(|b| b.is_ascii_digit()) {
                return Err(err());
            }
            v.parse().map_err(|_| err())
        };
        if let Some(rest) = s.strip_prefix('S') {
            let (orbit, slot) = rest.split_once('.').ok_or_else(err)?;
            Ok(NodeId::Sat(SatId::new(digits(orbit)?, digits(slot)?)))
        } else if let Some(rest) = s.strip_prefix('G') {
            Ok(NodeId::Ground(digits(rest)?))
        } else {
            Err(err())
        }
    }
}

impl Serialize for NodeId {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for NodeId {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

impl Serialize for SatId {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for SatId {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        match NodeId::deserialize(deserializer)? {
            NodeId::Sat(s) => Ok(s),
            other => Err(serde::de::Error::custom(format!(
                "expected a satellite id, got {other}"
            ))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parses_known_forms() {
        assert_eq!("S3.7".parse(), Ok(NodeId::Sat(SatId::new(3, 7))));
        assert_eq!("G12".parse(), Ok(NodeId::Ground(12)));
        for bad in ["", "S", "S1", "S1.", "S.1", "G", "G-1", "X1", "S1.2.3", "G+4", "S99999.1"] {
            assert!(bad.parse::<NodeId>().is_err(), "{bad}");
        }
    }

    proptest! {
        #[test]
        fn display_parse_roundtrip(orbit in any::<u16>(), slot in any::<u16>(), g in any::<u16>()) {
            let s = NodeId::Sat(SatId::new(orbit, slot));
            prop_assert_eq!(s.to_string().parse::<NodeId>().unwrap(), s);
            let n = NodeId::Ground(g);
            prop_assert_eq!(n.to_string().parse::<NodeId>().unwrap(), n);
        }
    }
}
