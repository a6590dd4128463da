//! Validator for every file the command-line tool writes. Used by the test
//! suite to check round-trips, and usable on its own to audit outputs.

use serde_json::Value;
use thiserror::Error;

use crate::io::{Metadata, CSV_META_PREFIX};

#[derive(Debug, Clone, PartialEq, Error)]
#[error("line {line}: {message}")]
pub struct SchemaError {
    pub line: usize,
    pub message: String,
}

fn fail<T>(line: usize, message: impl Into<String>) -> Result<T, SchemaError> {
    Err(SchemaError { line, message: message.into() })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Col {
    Float,
    Int,
    Bool,
    Direction,
    EventKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CsvKind {
    Trajectory,
    Events,
    Scan,
    Section,
    Sweep,
}

impl CsvKind {
    pub const ALL: [CsvKind; 5] = [CsvKind::Trajectory, CsvKind::Events, CsvKind::Scan, CsvKind::Section, CsvKind::Sweep];

    pub fn header(self) -> &'static str {
        match self {
            CsvKind::Trajectory => "t,x,y,z",
            CsvKind::Events => "kind,b_critical,x_star",
            CsvKind::Scan => "b,lambda1,lambda2,lambda3,d_ky,converged",
            CsvKind::Section => "init_id,t,x,y,z,direction",
            CsvKind::Sweep => "b,hit_index,value",
        }
    }

    fn columns(self) -> &'static [Col] {
        use Col::*;
        match self {
            CsvKind::Trajectory => &[Float, Float, Float, Float],
            CsvKind::Events => &[EventKind, Float, Float],
            CsvKind::Scan => &[Float, Float, Float, Float, Float, Bool],
            CsvKind::Section => &[Int, Float, Float, Float, Float, Direction],
            CsvKind::Sweep => &[Float, Int, Float],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CsvFile {
    pub kind: CsvKind,
    pub meta: Option<Metadata>,
    /// Data rows as raw fields.
    pub rows: Vec<Vec<String>>,
}

impl CsvFile {
    /// Column `name` parsed as floats (`nan` allowed).
    pub fn float_column(&self, name: &str) -> Option<Vec<f64>> {
        let idx = self.kind.header().split(',').position(|h| h == name)?;
        self.rows.iter().map(|r| parse_float(&r[idx])).collect()
    }
}

fn parse_float(s: &str) -> Option<f64> {
    if s == "nan" {
        Some(f64::NAN)
    } else {
        s.parse::<f64>().ok().filter(|v| !v.is_nan())
    }
}

fn check_field(col: Col, s: &str) -> bool {
    match col {
        Col::Float => parse_float(s).is_some(),
        Col::Int => s.parse::<u64>().is_ok(),
        Col::Bool => s == "true" || s == "false",
        Col::Direction => s == "UP" || s == "DOWN",
        Col::EventKind => ["PITCHFORK", "DOUBLE_SADDLE_NODE", "HOPF"].contains(&s),
    }
}

/// Checks a CSV export: optional metadata line, then comment lines, the
/// header, and typed data rows.
pub fn validate_csv(text: &str) -> Result<CsvFile, SchemaError> {
    let mut meta = None;
    let mut kind = None;
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let lineno = i + 1;
        if line.starts_with(CSV_META_PREFIX) {
            if i != 0 {
                return fail(lineno, "metadata line must come first");
            }
            match Metadata::from_csv_line(line) {
                Some(m) => meta = Some(m),
                None => return fail(lineno, "unparseable metadata line"),
            }
            continue;
        }
        if line.starts_with('#') {
            continue;
        }
        let Some(k) = kind else {
            match CsvKind::ALL.iter().find(|k| k.header() == line) {
                Some(k) => kind = Some(*k),
                None => return fail(lineno, format!("unknown header {line:?}")),
            }
            continue;
        };
        let fields: Vec<&str> = line.split(',').collect();
        let cols = k.columns();
        if fields.len() != cols.len() {
            return fail(lineno, format!("expected {} fields, found {}", cols.len(), fields.len()));
        }
        for (f, c) in fields.iter().zip(cols) {
            if !check_field(*c, f) {
                return fail(lineno, format!("field {f:?} is not a valid {c:?}"));
            }
        }
        rows.push(fields.into_iter().map(str::to_string).collect());
    }
    match kind {
        Some(kind) => Ok(CsvFile { kind, meta, rows }),
        None => fail(0, "missing header"),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JsonKind {
    FixedPoints,
    WalkStats,
    Density,
}

fn field<'a>(obj: &'a Value, key: &str) -> Result<&'a Value, SchemaError> {
    obj.get(key).ok_or_else(|| SchemaError { line: 0, message: format!("missing key {key:?}") })
}

fn number(obj: &Value, key: &str) -> Result<f64, SchemaError> {
    field(obj, key)?.as_f64().ok_or_else(|| SchemaError { line: 0, message: format!("{key:?} must be a number") })
}

fn array<'a>(obj: &'a Value, key: &str) -> Result<&'a Vec<Value>, SchemaError> {
    field(obj, key)?.as_array().ok_or_else(|| SchemaError { line: 0, message: format!("{key:?} must be an array") })
}

fn counts(obj: &Value, key: &str) -> Result<u64, SchemaError> {
    array(obj, key)?
        .iter()
        .map(|v| v.as_u64().ok_or_else(|| SchemaError { line: 0, message: format!("{key:?} must hold counts") }))
        .sum()
}

/// Checks a JSON export and returns its kind and metadata.
pub fn validate_json(text: &str) -> Result<(JsonKind, Metadata), SchemaError> {
    let v: Value = serde_json::from_str(text).map_err(|e| SchemaError { line: e.line(), message: e.to_string() })?;
    let meta: Metadata = serde_json::from_value(field(&v, "meta")?.clone())
        .map_err(|e| SchemaError { line: 0, message: format!("bad metadata: {e}") })?;
    if v.get("equilibria").is_some() {
        number(&v, "b")?;
        for e in array(&v, "equilibria")? {
            for key in ["x_star", "c", "lambda0", "lambda_re", "lambda_im"] {
                number(e, key)?;
            }
            let class = field(e, "class")?.as_str().unwrap_or_default();
            if !["STABLE_NODE", "STABLE_SPIRAL", "UNSTABLE_SPIRAL", "SADDLE_FOCUS", "MARGINAL"].contains(&class) {
                return fail(0, format!("unknown class {class:?}"));
            }
        }
        return Ok((JsonKind::FixedPoints, meta));
    }
    if v.get("msd").is_some() {
        if !(number(&v, "mean_speed")? >= 0.0) || !(number(&v, "diffusion_estimate")? >= 0.0) {
            return fail(0, "mean_speed and diffusion_estimate must be non-negative");
        }
        for p in array(&v, "msd")? {
            let pair = p.as_array().filter(|a| a.len() == 2 && a.iter().all(Value::is_number));
            if pair.is_none() {
                return fail(0, "msd entries must be [lag, value] pairs");
            }
        }
        return Ok((JsonKind::WalkStats, meta));
    }
    if v.get("counts_initial").is_some() {
        number(&v, "max_cell_drift")?;
        number(&v, "noise_floor")?;
        if counts(&v, "counts_initial")? != counts(&v, "counts_final")? {
            return fail(0, "initial and final counts have different totals");
        }
        return Ok((JsonKind::Density, meta));
    }
    fail(0, "unrecognised JSON document")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn accepts_well_formed_csv() {
        let text = "# meta {\"version\":\"0\",\"command\":\"thomas x\",\"parameters\":{},\"seed\":null}\n\
                    b,hit_index,value\n# b=1 no crossings\n1.0e-1,0,2.5e0\n";
        let f = validate_csv(text).unwrap();
        assert_eq!(f.kind, CsvKind::Sweep);
        assert_eq!(f.meta.as_ref().unwrap().command, "thomas x");
        assert_eq!(f.float_column("value").unwrap(), vec![2.5]);
    }

    #[test]
    fn rejects_bad_rows() {
        assert!(validate_csv("t,x,y,z\n1,2,3\n").is_err());
        assert!(validate_csv("init_id,t,x,y,z,direction\n0,1,2,3,4,SIDEWAYS\n").is_err());
        assert!(validate_csv("a,b\n").is_err());
        assert!(validate_csv("t,x,y,z\n# meta {}\n").is_err());
        assert!(validate_csv("").is_err());
    }

    #[test]
    fn json_requires_meta() {
        assert!(validate_json("{\"b\":0.1,\"equilibria\":[]}").is_err());
    }
}
