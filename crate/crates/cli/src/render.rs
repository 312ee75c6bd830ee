//! Table, CSV and JSON rendering of command reports.

use qcorr::io::fmt_g;
use qcorr::C64;
use serde_json::Value;

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Table,
    Json,
    Csv,
}

/// A report cell: numbers are printed with 12 significant digits in tables
/// and CSV, and at full precision in JSON.
#[derive(Clone, Debug)]
pub enum Cell {
    Num(f64),
    Complex(C64),
    Int(usize),
    Bool(bool),
    Text(String),
}

impl Cell {
    pub fn text(s: impl Into<String>) -> Self {
        Cell::Text(s.into())
    }

    fn plain(&self) -> String {
        match self {
            Cell::Num(x) => fmt_g(*x),
            Cell::Complex(z) => fmt_complex(*z),
            Cell::Int(n) => n.to_string(),
            Cell::Bool(b) => b.to_string(),
            Cell::Text(s) => s.clone(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Num(x) => Value::from(*x),
            Cell::Complex(z) if z.im == 0.0 => Value::from(z.re),
            Cell::Complex(z) => serde_json::json!({ "re": z.re, "im": z.im }),
            Cell::Int(n) => Value::from(*n),
            Cell::Bool(b) => Value::from(*b),
            Cell::Text(s) => Value::from(s.as_str()),
        }
    }
}

/// `a`, or `a+bi` / `a-bi` when the imaginary part is nonzero.
pub fn fmt_complex(z: C64) -> String {
    if z.im == 0.0 {
        fmt_g(z.re)
    } else if z.im < 0.0 {
        format!("{}-{}i", fmt_g(z.re), fmt_g(-z.im))
    } else {
        format!("{}+{}i", fmt_g(z.re), fmt_g(z.im))
    }
}

/// One record rendered as aligned `key value` lines, a one-row CSV or a
/// JSON object. `extra` is merged into the JSON object only.
pub fn record(format: Format, fields: &[(&str, Cell)], extra: Option<(&str, Value)>) -> String {
    match format {
        Format::Table => {
            let width = fields.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
            fields.iter().map(|(k, v)| format!("{k:<width$}  {}\n", v.plain())).collect()
        }
        Format::Csv => {
            let header: Vec<&str> = fields.iter().map(|(k, _)| *k).collect();
            let row: Vec<String> = fields.iter().map(|(_, v)| v.plain()).collect();
            format!("{}\n{}\n", header.join(","), row.join(","))
        }
        Format::Json => {
            let mut obj: serde_json::Map<String, Value> = fields.iter().map(|(k, v)| (k.to_string(), v.json())).collect();
            if let Some((k, v)) = extra {
                obj.insert(k.to_string(), v);
            }
            pretty(&Value::Object(obj))
        }
    }
}

/// Rows under a fixed header: padded columns, CSV, or a JSON array of objects.
pub fn rows(format: Format, header: &[&str], rows: &[Vec<Cell>]) -> String {
    match format {
        Format::Table => {
            let plain: Vec<Vec<String>> = rows.iter().map(|r| r.iter().map(Cell::plain).collect()).collect();
            let widths: Vec<usize> = (0..header.len())
                .map(|j| plain.iter().map(|r| r[j].len()).chain([header[j].len()]).max().unwrap_or(0))
                .collect();
            let line = |cells: Vec<&str>| {
                let padded: Vec<String> = cells.iter().zip(&widths).map(|(c, w)| format!("{c:<w$}")).collect();
                format!("{}\n", padded.join("  ").trim_end())
            };
            let mut out = line(header.to_vec());
            for r in &plain {
                out.push_str(&line(r.iter().map(String::as_str).collect()));
            }
            out
        }
        Format::Csv => {
            let mut out = format!("{}\n", header.join(","));
            for r in rows {
                let cells: Vec<String> = r.iter().map(Cell::plain).collect();
                out.push_str(&cells.join(","));
                out.push('\n');
            }
            out
        }
        Format::Json => {
            let arr: Vec<Value> = rows
                .iter()
                .map(|r| Value::Object(header.iter().zip(r).map(|(k, v)| (k.to_string(), v.json())).collect()))
                .collect();
            pretty(&Value::Array(arr))
        }
    }
}

pub fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("JSON values always serialize");
    s.push('\n');
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn complex_cells_drop_zero_imaginary_parts() {
        assert_eq!(fmt_complex(C64::new(0.25, 0.0)), "0.25");
        assert_eq!(fmt_complex(C64::new(1.0, -0.5)), "1-0.5i");
        assert_eq!(fmt_complex(C64::new(0.0, 2.0)), "0+2i");
    }

    #[test]
    fn csv_rows_follow_the_header() {
        let out = rows(Format::Csv, &["p", "v"], &[vec![Cell::Num(0.0), Cell::text("Separable")]]);
        assert_eq!(out, "p,v\n0,Separable\n");
    }

    #[test]
    fn table_records_align_keys() {
        let out = record(Format::Table, &[("a", Cell::Int(1)), ("long", Cell::Bool(true))], None);
        assert_eq!(out, "a     1\nlong  true\n");
    }

    #[test]
    fn json_records_keep_full_precision() {
        let out = record(Format::Json, &[("x", Cell::Num(0.1 + 0.2))], None);
        let v: Value = serde_json::from_str(&out).unwrap();
        assert_eq!(v["x"].as_f64().unwrap(), 0.1 + 0.2);
    }
}
