//! Network source mini-language: `path:N`, `grid2:MxN`, `grid3:MxNxP`,
//! `fuzz:H:<base>` and `file:<path>`, plus sweep family names.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use mtdc_core::network::{generate_hfuzz, generate_lattice};
use mtdc_core::{Family, Network};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::formats::{load_network, FormatError};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NetworkSpec {
    Lattice(Vec<usize>),
    Fuzz { h: usize, base: Box<NetworkSpec> },
    File(PathBuf),
}

fn sides(s: &str, dim: usize) -> Result<Vec<usize>, String> {
    let parts: Vec<&str> = s.split('x').collect();
    if parts.len() != dim {
        return Err(format!("expected {dim} side lengths separated by `x`, got {s:?}"));
    }
    parts.iter().map(|p| p.parse::<usize>().map_err(|e| format!("side {p:?}: {e}"))).collect()
}

impl FromStr for NetworkSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let (kind, rest) = s.split_once(':').ok_or_else(|| format!("network spec {s:?} has no `kind:` prefix"))?;
        match kind {
            "path" => Ok(NetworkSpec::Lattice(sides(rest, 1)?)),
            "grid2" => Ok(NetworkSpec::Lattice(sides(rest, 2)?)),
            "grid3" => Ok(NetworkSpec::Lattice(sides(rest, 3)?)),
            "fuzz" => {
                let (h, base) = rest.split_once(':').ok_or("fuzz spec is `fuzz:H:<base>`")?;
                let h = h.parse().map_err(|e| format!("fuzz radius {h:?}: {e}"))?;
                Ok(NetworkSpec::Fuzz { h, base: Box::new(base.parse()?) })
            }
            "file" if !rest.is_empty() => Ok(NetworkSpec::File(rest.into())),
            _ => Err(format!("unknown network spec {s:?}; use path:N, grid2:MxN, grid3:MxNxP, fuzz:H:<base> or file:<path>")),
        }
    }
}

impl fmt::Display for NetworkSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NetworkSpec::Lattice(s) => {
                let kind = ["path", "grid2", "grid3"].get(s.len().wrapping_sub(1)).unwrap_or(&"lattice");
                let joined: Vec<String> = s.iter().map(usize::to_string).collect();
                write!(f, "{kind}:{}", joined.join("x"))
            }
            NetworkSpec::Fuzz { h, base } => write!(f, "fuzz:{h}:{base}"),
            NetworkSpec::File(p) => write!(f, "file:{}", p.display()),
        }
    }
}

impl NetworkSpec {
    /// Generated lines get resistance `r`; file networks keep their own.
    pub fn build(&self, r: f64) -> Result<Network, FormatError> {
        match self {
            NetworkSpec::Lattice(s) => Ok(generate_lattice(s, r)?),
            NetworkSpec::Fuzz { h, base } => Ok(generate_hfuzz(&base.build(r)?, *h, r)?),
            NetworkSpec::File(p) => load_network(p),
        }
    }

    /// Same spec with file paths made absolute.
    pub fn absolutized(&self) -> std::io::Result<NetworkSpec> {
        Ok(match self {
            NetworkSpec::File(p) => NetworkSpec::File(std::path::absolute(p)?),
            NetworkSpec::Fuzz { h, base } => NetworkSpec::Fuzz { h: *h, base: Box::new(base.absolutized()?) },
            other => other.clone(),
        })
    }
}

/// `path`, `grid2`, `grid3` or `fuzz:H:<path|grid2|grid3>`.
pub fn parse_family(s: &str) -> Result<Family, String> {
    let base = |b: &str| match b {
        "path" => Ok(Family::Path),
        "grid2" => Ok(Family::Grid2d),
        "grid3" => Ok(Family::Grid3d),
        _ => Err(format!("unknown family {b:?}; use path, grid2, grid3 or fuzz:H:<base>")),
    };
    match s.split_once(':') {
        None => base(s),
        Some(("fuzz", rest)) => {
            let (h, b) = rest.split_once(':').ok_or("fuzz family is `fuzz:H:<base>`")?;
            let h = h.parse().map_err(|e| format!("fuzz radius {h:?}: {e}"))?;
            Ok(Family::Hfuzz { dim: base(b)?.dimension(), h })
        }
        Some(_) => base(s),
    }
}

impl Serialize for NetworkSpec {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for NetworkSpec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}
