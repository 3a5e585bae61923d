//! Deterministic report writers: CSV, JSONL and JSON with every float at 17
//! significant digits, so identical plans and seeds produce byte-identical
//! files.

use crate::error::Result;
use crate::util::fmt17;
use std::fmt::Write as _;
use std::path::Path;

/// Minimal ordered JSON value for report emission.
#[derive(Debug, Clone)]
pub enum Json {
    F(f64),
    I(i64),
    U(u64),
    B(bool),
    S(String),
    Arr(Vec<Json>),
    Obj(Vec<(&'static str, Json)>),
    Null,
}

impl Json {
    pub fn render(&self) -> String {
        let mut s = String::new();
        self.write(&mut s, 0);
        s
    }

    fn write(&self, out: &mut String, indent: usize) {
        match self {
            Json::F(x) => out.push_str(&fmt17(*x)),
            Json::I(x) => {
                let _ = write!(out, "{x}");
            }
            Json::U(x) => {
                let _ = write!(out, "{x}");
            }
            Json::B(b) => out.push_str(if *b { "true" } else { "false" }),
            Json::S(s) => {
                let _ = write!(out, "{}", escape(s));
            }
            Json::Null => out.push_str("null"),
            Json::Arr(items) => {
                if items.is_empty() {
                    out.push_str("[]");
                    return;
                }
                out.push('[');
                for (i, v) in items.iter().enumerate() {
                    if i > 0 {
                        out.push_str(", ");
                    }
                    v.write(out, indent);
                }
                out.push(']');
            }
            Json::Obj(fields) => {
                if fields.is_empty() {
                    out.push_str("{}");
                    return;
                }
                out.push_str("{\n");
                let pad = "  ".repeat(indent + 1);
                for (i, (k, v)) in fields.iter().enumerate() {
                    if i > 0 {
                        out.push_str(",\n");
                    }
                    let _ = write!(out, "{pad}{}: ", escape(k));
                    v.write(out, indent + 1);
                }
                out.push('\n');
                out.push_str(&"  ".repeat(indent));
                out.push('}');
            }
        }
    }
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            c if (c as u32) < 0x20 => {
                let _ = write!(out, "\\u{:04x}", c as u32);
            }
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

/// A CSV table with a fixed header; floats at 17 significant digits.
pub struct CsvTable {
    text: String,
    columns: usize,
}

impl CsvTable {
    pub fn new(header: &[&str]) -> Self {
        CsvTable { text: format!("{}\n", header.join(",")), columns: header.len() }
    }

    pub fn row(&mut self, values: &[f64]) {
        assert_eq!(values.len(), self.columns, "csv row width");
        let cells: Vec<String> = values.iter().map(|v| fmt17(*v)).collect();
        self.text.push_str(&cells.join(","));
        self.text.push('\n');
    }

    pub fn finish(self) -> String {
        self.text
    }
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(path, text)?;
    Ok(())
}

/// JSONL line for one trajectory snapshot.
pub fn trajectory_line(t: f64, l2: f64, hs: f64, sup: f64, xt: f64) -> String {
    format!(
        "{{\"t\": {}, \"l2\": {}, \"hs\": {}, \"sup\": {}, \"xT\": {}}}",
        fmt17(t),
        fmt17(l2),
        fmt17(hs),
        fmt17(sup),
        fmt17(xt)
    )
}
