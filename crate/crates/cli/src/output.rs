use std::fmt::Display;

use clap::ValueEnum;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum)]
pub enum ReportFormat {
    #[default]
    Text,
    /// `key=value` lines
    Kv,
}

/// Collects report fields and prints them as aligned text or `key=value`.
pub struct Report {
    fmt: ReportFormat,
    title: String,
    fields: Vec<(String, String)>,
}

impl Report {
    pub fn new(fmt: ReportFormat, title: impl Into<String>) -> Self {
        Self {
            fmt,
            title: title.into(),
            fields: Vec::new(),
        }
    }

    pub fn field(&mut self, key: &str, v: impl Display) -> &mut Self {
        self.fields.push((key.to_string(), v.to_string()));
        self
    }

    pub fn float(&mut self, key: &str, v: f64, digits: usize) -> &mut Self {
        self.field(key, format!("{v:.digits$}"))
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        match self.fmt {
            ReportFormat::Kv => {
                for (k, v) in &self.fields {
                    s.push_str(&format!("{k}={v}\n"));
                }
            }
            ReportFormat::Text => {
                if !self.title.is_empty() {
                    s.push_str(&format!("{}\n", self.title));
                }
                let w = self.fields.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
                for (k, v) in &self.fields {
                    s.push_str(&format!("  {:<w$}  {v}\n", k.replace('_', " ")));
                }
            }
        }
        s
    }

    pub fn print(&self) {
        print!("{}", self.render());
    }
}
