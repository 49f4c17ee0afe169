use serde_json::Value;

use crate::OutFormat;

/// One command result, ready in every output format.
pub struct Output {
    text: String,
    json: Value,
    csv: Option<(Vec<String>, Vec<Vec<String>>)>,
    /// Already formatted by the caller for the requested format.
    raw: bool,
}

impl Output {
    pub fn new(text: String, json: Value) -> Self {
        Self { text, json, csv: None, raw: false }
    }

    pub fn raw(text: String) -> Self {
        Self { text, json: Value::Null, csv: None, raw: true }
    }

    pub fn csv<const N: usize>(self, header: [&str; N], row: [String; N]) -> Self {
        self.csv_rows(header, std::iter::once(row.to_vec()))
    }

    pub fn csv_rows<const N: usize>(mut self, header: [&str; N], rows: impl IntoIterator<Item = Vec<String>>) -> Self {
        self.csv = Some((header.iter().map(|h| h.to_string()).collect(), rows.into_iter().collect()));
        self
    }

    pub fn render(&self, format: OutFormat) -> String {
        if self.raw {
            return self.text.clone();
        }
        match format {
            OutFormat::Text => self.text.clone(),
            OutFormat::Json => serde_json::to_string_pretty(&self.json).unwrap_or_default() + "\n",
            OutFormat::Csv => match &self.csv {
                Some((header, rows)) => {
                    let mut w = csv::Writer::from_writer(Vec::new());
                    let _ = w.write_record(header);
                    for r in rows {
                        let _ = w.write_record(r);
                    }
                    String::from_utf8(w.into_inner().unwrap_or_default()).unwrap_or_default()
                }
                None => self.text.clone(),
            },
        }
    }
}
