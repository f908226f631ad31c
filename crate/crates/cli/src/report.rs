//! Report assembly and rendering for the three output formats.
//!
//! A report is a header block (tool, version, subcommand, parameters), one or
//! more tabular sections, and free-form notes. Rendering never depends on
//! timing or iteration order of hash containers.

use std::fmt::Write as _;

use clap::ValueEnum;
use serde_json::{Map, Value};

pub const TOOL: &str = "genfield";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Table,
    Csv,
    Json,
}

impl Format {
    pub fn as_str(self) -> &'static str {
        match self {
            Format::Table => "table",
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

pub struct Section {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
}

impl Section {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Section {
            name: name.to_string(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Value>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }
}

pub struct Report {
    pub command: &'static str,
    pub params: Vec<(String, String)>,
    pub sections: Vec<Section>,
    pub notes: Vec<String>,
}

impl Report {
    pub fn new(command: &'static str) -> Self {
        Report {
            command,
            params: Vec::new(),
            sections: Vec::new(),
            notes: Vec::new(),
        }
    }

    pub fn param(&mut self, key: &str, value: impl ToString) -> &mut Self {
        self.params.push((key.to_string(), value.to_string()));
        self
    }

    pub fn note(&mut self, text: impl Into<String>) {
        self.notes.push(text.into());
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Table => self.render_table(),
            Format::Csv => self.render_csv(),
            Format::Json => self.render_json(),
        }
    }

    fn header_lines(&self) -> String {
        let mut out = format!("# {TOOL} {VERSION}\n# command: {}\n", self.command);
        for (k, v) in &self.params {
            let _ = writeln!(out, "# {k}: {v}");
        }
        out
    }

    fn notes_lines(&self) -> String {
        self.notes.iter().map(|n| format!("# note: {n}\n")).collect()
    }

    fn render_table(&self) -> String {
        let mut out = self.header_lines();
        for s in &self.sections {
            let cells: Vec<Vec<String>> = s.rows.iter().map(|r| r.iter().map(cell).collect()).collect();
            let mut widths: Vec<usize> = s.columns.iter().map(String::len).collect();
            for row in &cells {
                for (w, c) in widths.iter_mut().zip(row) {
                    *w = (*w).max(c.len());
                }
            }
            let line = |row: &[String]| {
                let padded: Vec<String> = row.iter().zip(&widths).map(|(c, w)| format!("{c:<w$}")).collect();
                padded.join("  ").trim_end().to_string()
            };
            let _ = writeln!(out, "\n[{}]", s.name);
            let _ = writeln!(out, "{}", line(&s.columns));
            let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
            let _ = writeln!(out, "{}", rule.join("  "));
            for row in &cells {
                let _ = writeln!(out, "{}", line(row));
            }
        }
        if !self.notes.is_empty() {
            out.push('\n');
            out.push_str(&self.notes_lines());
        }
        out
    }

    fn render_csv(&self) -> String {
        let mut out = self.header_lines();
        let multi = self.sections.len() > 1;
        for (i, s) in self.sections.iter().enumerate() {
            if multi {
                if i > 0 {
                    out.push('\n');
                }
                let _ = writeln!(out, "# section: {}", s.name);
            }
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(&s.columns).expect("in-memory write");
            for row in &s.rows {
                w.write_record(row.iter().map(cell)).expect("in-memory write");
            }
            out.push_str(&String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 csv"));
        }
        out.push_str(&self.notes_lines());
        out
    }

    fn render_json(&self) -> String {
        let mut params = Map::new();
        for (k, v) in &self.params {
            params.insert(k.clone(), Value::String(v.clone()));
        }
        let mut meta = Map::new();
        meta.insert("tool".into(), TOOL.into());
        meta.insert("version".into(), VERSION.into());
        meta.insert("command".into(), self.command.into());
        meta.insert("params".into(), Value::Object(params));

        let mut sections = Map::new();
        for s in &self.sections {
            let rows: Vec<Value> = s
                .rows
                .iter()
                .map(|r| Value::Object(s.columns.iter().cloned().zip(r.iter().cloned()).collect()))
                .collect();
            sections.insert(s.name.clone(), Value::Array(rows));
        }
        let mut root = Map::new();
        root.insert("meta".into(), Value::Object(meta));
        root.insert("sections".into(), Value::Object(sections));
        root.insert("notes".into(), self.notes.clone().into());
        let mut text = serde_json::to_string_pretty(&Value::Object(root)).expect("json values serialize");
        text.push('\n');
        text
    }
}

fn cell(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        Value::Null => String::new(),
        other => other.to_string(),
    }
}
