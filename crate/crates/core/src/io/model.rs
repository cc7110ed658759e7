//! Model files: a short text header followed by little-endian `f64` values.
//!
//! ```text
//! FWIMODEL 1
//! nx 120
//! nz 80
//! h 15
//! n_pml 10
//! kind velocity_mps
//! end
//! <nx * nz little-endian f64, x fastest>
//! ```

use std::path::Path;

use crate::grid::Grid2D;
use crate::helmholtz::SlownessModel;
use crate::{Error, Result};

const MAGIC: &str = "FWIMODEL 1";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ValueKind {
    VelocityMps,
    SlownessSq,
}

impl ValueKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::VelocityMps => "velocity_mps",
            Self::SlownessSq => "slowness_sq",
        }
    }
}

impl std::str::FromStr for ValueKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "velocity_mps" => Ok(Self::VelocityMps),
            "slowness_sq" => Ok(Self::SlownessSq),
            other => Err(format!(
                "unknown kind '{other}' (expected velocity_mps or slowness_sq)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelFile {
    pub grid: Grid2D,
    pub kind: ValueKind,
    pub values: Vec<f64>,
}

impl ModelFile {
    pub fn from_slowness(grid: &Grid2D, model: &SlownessModel, kind: ValueKind) -> Self {
        let values = match kind {
            ValueKind::SlownessSq => model.values().to_vec(),
            ValueKind::VelocityMps => model.velocity(),
        };
        Self {
            grid: grid.clone(),
            kind,
            values,
        }
    }

    /// Squared slowness, converting from velocity when needed.
    pub fn to_slowness(&self) -> Result<SlownessModel> {
        match self.kind {
            ValueKind::SlownessSq => SlownessModel::new(&self.grid, self.values.clone()),
            ValueKind::VelocityMps => SlownessModel::from_velocity(&self.grid, &self.values),
        }
    }

    pub fn encode(&self) -> Vec<u8> {
        let header = format!(
            "{MAGIC}\nnx {}\nnz {}\nh {}\nn_pml {}\nkind {}\nend\n",
            self.grid.nx(),
            self.grid.nz(),
            self.grid.h(),
            self.grid.n_pml(),
            self.kind.as_str()
        );
        let mut out = header.into_bytes();
        out.reserve(8 * self.values.len());
        for v in &self.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn decode(bytes: &[u8], label: &str) -> Result<Self> {
        let err = |line: usize, msg: String| Error::parse(label, line, msg);
        let mut pos = 0;
        let mut line_no = 0;
        let mut next_line = |pos: &mut usize| -> Result<(usize, String)> {
            let rest = &bytes[*pos..];
            let end = rest
                .iter()
                .position(|&b| b == b'\n')
                .ok_or_else(|| err(line_no + 1, "unterminated header (missing 'end')".into()))?;
            let text = std::str::from_utf8(&rest[..end])
                .map_err(|_| err(line_no + 1, "header is not valid UTF-8".into()))?;
            *pos += end + 1;
            line_no += 1;
            Ok((line_no, text.trim().to_string()))
        };

        let (ln, first) = next_line(&mut pos)?;
        if first != MAGIC {
            return Err(err(ln, format!("expected '{MAGIC}', found '{first}'")));
        }
        let (mut nx, mut nz, mut h, mut n_pml, mut kind) = (None, None, None, None, None);
        loop {
            let (ln, line) = next_line(&mut pos)?;
            if line == "end" {
                break;
            }
            let (key, value) = line
                .split_once(char::is_whitespace)
                .map(|(k, v)| (k, v.trim()))
                .ok_or_else(|| err(ln, format!("expected 'key value', found '{line}'")))?;
            let bad = |field: &str| err(ln, format!("invalid value '{value}' for field '{field}'"));
            match key {
                "nx" => nx = Some(value.parse::<usize>().map_err(|_| bad("nx"))?),
                "nz" => nz = Some(value.parse::<usize>().map_err(|_| bad("nz"))?),
                "h" => h = Some(value.parse::<f64>().map_err(|_| bad("h"))?),
                "n_pml" => n_pml = Some(value.parse::<usize>().map_err(|_| bad("n_pml"))?),
                "kind" => {
                    kind = Some(
                        value
                            .parse::<ValueKind>()
                            .map_err(|m| err(ln, format!("field 'kind': {m}")))?,
                    )
                }
                other => return Err(err(ln, format!("unknown header field '{other}'"))),
            }
        }
        let missing = |field: &str| err(line_no, format!("header is missing field '{field}'"));
        let nx = nx.ok_or_else(|| missing("nx"))?;
        let nz = nz.ok_or_else(|| missing("nz"))?;
        let h = h.ok_or_else(|| missing("h"))?;
        let n_pml = n_pml.ok_or_else(|| missing("n_pml"))?;
        let kind = kind.ok_or_else(|| missing("kind"))?;
        let grid = Grid2D::new(nx, nz, h, n_pml)?;

        let payload = &bytes[pos..];
        let expected = 8 * grid.len();
        if payload.len() != expected {
            return Err(err(
                line_no,
                format!(
                    "payload has {} bytes, expected {expected} for {nx}x{nz} values",
                    payload.len()
                ),
            ));
        }
        let values: Vec<f64> = payload
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        if let Some(i) = values.iter().position(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(err(
                line_no,
                format!("value {i} is not finite and positive: {}", values[i]),
            ));
        }
        Ok(Self { grid, kind, values })
    }
}

pub fn read_model(path: &Path) -> Result<ModelFile> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    ModelFile::decode(&bytes, &super::file_label(path))
}

pub fn write_model(path: &Path, model: &ModelFile) -> Result<()> {
    super::write_atomic(path, &model.encode())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> ModelFile {
        ModelFile {
            grid: Grid2D::new(4, 3, 12.5, 1).unwrap(),
            kind: ValueKind::VelocityMps,
            values: (0..12).map(|k| 1500.0 + 0.1 * k as f64).collect(),
        }
    }

    #[test]
    fn round_trip() {
        let m = sample();
        assert_eq!(ModelFile::decode(&m.encode(), "m").unwrap(), m);
    }

    #[test]
    fn velocity_converts_to_squared_slowness() {
        let s = sample().to_slowness().unwrap();
        assert!((s.values()[0] - 1.0 / 1500.0f64.powi(2)).abs() < 1e-20);
    }

    #[test]
    fn malformed_header_names_the_field() {
        let mut bytes = sample().encode();
        let text = String::from_utf8_lossy(&bytes[..40]).replace("nz 3", "nz x");
        bytes.splice(..40, text.into_bytes());
        let e = ModelFile::decode(&bytes, "m").unwrap_err().to_string();
        assert!(e.contains("'nz'") && e.contains("line 3"), "{e}");
    }

    #[test]
    fn payload_length_is_checked() {
        let mut bytes = sample().encode();
        bytes.truncate(bytes.len() - 8);
        let e = ModelFile::decode(&bytes, "m").unwrap_err().to_string();
        assert!(e.contains("88 bytes, expected 96"), "{e}");
    }

    #[test]
    fn rejects_wrong_magic_and_unknown_fields() {
        assert!(ModelFile::decode(b"MODEL\n", "m").is_err());
        let bad = b"FWIMODEL 1\nnx 3\ncolour red\nend\n";
        let e = ModelFile::decode(bad, "m").unwrap_err().to_string();
        assert!(e.contains("colour"));
    }
}
