//! Output formatting shared by every exporter: full-precision floats and the
//! provenance record written at the top of each file.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};

/// Prefix of the metadata comment line in CSV outputs.
pub const CSV_META_PREFIX: &str = "# meta ";

/// Scientific notation with 17 significant digits; parses back to the same bits.
pub fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        "nan".to_string()
    } else {
        format!("{v:.16e}")
    }
}

/// Provenance attached to every exported file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub version: String,
    /// Canonical command line that regenerates the file.
    pub command: String,
    pub parameters: serde_json::Value,
    pub seed: Option<u64>,
}

impl Metadata {
    pub fn new(command: String, parameters: serde_json::Value, seed: Option<u64>) -> Self {
        Metadata { version: env!("CARGO_PKG_VERSION").to_string(), command, parameters, seed }
    }

    pub fn write_csv_line<W: Write>(&self, w: &mut W) -> io::Result<()> {
        let json = serde_json::to_string(self).map_err(io::Error::other)?;
        writeln!(w, "{CSV_META_PREFIX}{json}")
    }

    /// Parses a `# meta {...}` line.
    pub fn from_csv_line(line: &str) -> Option<Metadata> {
        serde_json::from_str(line.strip_prefix(CSV_META_PREFIX)?).ok()
    }
}
