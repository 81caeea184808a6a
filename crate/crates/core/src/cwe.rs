use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// A CWE identifier in canonical `CWE-<digits>` form.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Cwe(String);

#[derive(Debug, Error, PartialEq, Eq)]
#[error("invalid CWE identifier {0:?}: expected CWE-<digits>")]
pub struct InvalidCwe(pub String);

impl Cwe {
    pub fn new(raw: &str) -> Result<Self, InvalidCwe> {
        let digits = raw
            .strip_prefix("CWE-")
            .ok_or_else(|| InvalidCwe(raw.to_string()))?;
        if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
            return Err(InvalidCwe(raw.to_string()));
        }
        Ok(Cwe(raw.to_string()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// Numeric part with leading zeros removed (`CWE-078` -> 78).
    pub fn number(&self) -> u32 {
        self.0[4..].parse().unwrap_or(u32::MAX)
    }

    /// Human-readable weakness name for common identifiers.
    pub fn name(&self) -> Option<&'static str> {
        let name = match self.number() {
            20 => "Improper Input Validation",
            22 => "Path Traversal",
            78 => "OS Command Injection",
            79 => "Cross-site Scripting",
            89 => "SQL Injection",
            94 => "Code Injection",
            117 => "Improper Output Neutralization for Logs",
            119 => "Improper Restriction of Operations within the Bounds of a Memory Buffer",
            120 => "Classic Buffer Overflow",
            190 => "Integer Overflow or Wraparound",
            200 => "Exposure of Sensitive Information",
            209 => "Generation of Error Message Containing Sensitive Information",
            215 => "Insertion of Sensitive Information Into Debugging Code",
            259 => "Use of Hard-coded Password",
            295 => "Improper Certificate Validation",
            312 => "Cleartext Storage of Sensitive Information",
            327 => "Use of a Broken or Risky Cryptographic Algorithm",
            328 => "Use of Weak Hash",
            330 => "Use of Insufficiently Random Values",
            377 => "Insecure Temporary File",
            400 => "Uncontrolled Resource Consumption",
            416 => "Use After Free",
            476 => "NULL Pointer Dereference",
            502 => "Deserialization of Untrusted Data",
            601 => "Open Redirect",
            605 => "Multiple Binds to the Same Port",
            611 => "Improper Restriction of XML External Entity Reference",
            703 => "Improper Check or Handling of Exceptional Conditions",
            730 => "Regular Expression Denial of Service",
            732 => "Incorrect Permission Assignment for Critical Resource",
            787 => "Out-of-bounds Write",
            798 => "Use of Hard-coded Credentials",
            918 => "Server-Side Request Forgery",
            1333 => "Inefficient Regular Expression Complexity",
            _ => return None,
        };
        Some(name)
    }
}

impl fmt::Display for Cwe {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl FromStr for Cwe {
    type Err = InvalidCwe;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Cwe::new(s)
    }
}

impl Serialize for Cwe {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.0)
    }
}

impl<'de> Deserialize<'de> for Cwe {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = String::deserialize(deserializer)?;
        Cwe::new(&raw).map_err(serde::de::Error::custom)
    }
}
