//! Tabular sweep results and their CSV encoding.

use std::fmt::Write as _;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    F64(f64),
    U64(u64),
    Str(String),
}

impl From<f64> for Value {
    fn from(x: f64) -> Self {
        Value::F64(x)
    }
}
impl From<u64> for Value {
    fn from(x: u64) -> Self {
        Value::U64(x)
    }
}
impl From<usize> for Value {
    fn from(x: usize) -> Self {
        Value::U64(x as u64)
    }
}
impl From<&str> for Value {
    fn from(x: &str) -> Self {
        Value::Str(x.to_owned())
    }
}
impl From<String> for Value {
    fn from(x: String) -> Self {
        Value::Str(x)
    }
}

impl Value {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Value::F64(x) => Some(*x),
            Value::U64(x) => Some(*x as f64),
            Value::Str(_) => None,
        }
    }
}

/// Formats a number for CSV output: shortest round-trip decimal, switching to
/// scientific notation for magnitudes below `1e-3` (and above `1e15`).
pub fn format_number(x: f64) -> String {
    if x.is_nan() {
        return "NaN".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let a = x.abs();
    if !(1e-3..1e15).contains(&a) {
        format!("{x:e}")
    } else {
        format!("{x}")
    }
}

fn escape(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_owned()
    }
}

/// A typed row that knows its CSV schema.
pub trait Record {
    fn columns() -> &'static [&'static str];
    fn values(&self) -> Vec<Value>;
}

/// Named columns of values, one row per sweep point.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SweepReport {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
}

impl SweepReport {
    pub fn new(columns: &[&str]) -> Self {
        Self {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn from_records<R: Record>(records: &[R]) -> Self {
        Self {
            columns: R::columns().iter().map(|c| c.to_string()).collect(),
            rows: records.iter().map(Record::values).collect(),
        }
    }

    pub fn push(&mut self, row: Vec<Value>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn column_f64(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.column_index(name)?;
        self.rows.iter().map(|r| r[i].as_f64()).collect()
    }

    /// New report holding `(source, renamed)` columns in the given order.
    pub fn project(&self, columns: &[(&str, &str)]) -> Result<SweepReport> {
        if self.rows.is_empty() {
            return Err(Error::EmptySweep);
        }
        let idx = columns
            .iter()
            .map(|(src, _)| {
                self.column_index(src)
                    .ok_or_else(|| Error::Precondition(format!("report has no column `{src}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(SweepReport {
            columns: columns.iter().map(|(_, dst)| dst.to_string()).collect(),
            rows: self
                .rows
                .iter()
                .map(|r| idx.iter().map(|&i| r[i].clone()).collect())
                .collect(),
        })
    }

    /// UTF-8 CSV with a header row and `\n` line endings.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let header: Vec<String> = self.columns.iter().map(|c| escape(c)).collect();
        out.push_str(&header.join(","));
        out.push('\n');
        for row in &self.rows {
            for (i, v) in row.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                match v {
                    Value::F64(x) => out.push_str(&format_number(*x)),
                    Value::U64(x) => {
                        let _ = write!(out, "{x}");
                    }
                    Value::Str(s) => out.push_str(&escape(s)),
                }
            }
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn number_formatting() {
        assert_eq!(format_number(0.0), "0");
        assert_eq!(format_number(0.5), "0.5");
        assert_eq!(format_number(1.5e-7), "1.5e-7");
        assert_eq!(format_number(-2e-4), "-2e-4");
        assert_eq!(format_number(0.001), "0.001");
        assert_eq!(format_number(-148.3), "-148.3");
        let x = 0.123_456_789_012_345_67;
        assert_eq!(format_number(x).parse::<f64>().unwrap(), x);
    }

    #[test]
    fn csv_layout() {
        let mut r = SweepReport::new(&["a", "label"]);
        r.push(vec![1e-5.into(), "x,y".into()]);
        r.push(vec![2.0.into(), "z".into()]);
        assert_eq!(r.to_csv(), "a,label\n1e-5,\"x,y\"\n2,z\n");
        let p = r.project(&[("label", "name")]).unwrap();
        assert_eq!(p.columns, vec!["name"]);
        assert!(r.project(&[("nope", "x")]).is_err());
        assert_eq!(SweepReport::new(&["a"]).project(&[("a", "a")]), Err(Error::EmptySweep));
    }
}
