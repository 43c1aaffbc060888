use std::fmt::Display;
use std::fs;
use std::path::Path;

use crate::Failure;

/// Shortest round-trip rendering; exponent form outside `[1e-4, 1e6)`.
#[derive(Debug, Clone, Copy)]
pub struct Num(pub f64);

impl Display for Num {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let a = self.0.abs();
        if a == 0.0 || !a.is_finite() || (1e-4..1e6).contains(&a) {
            write!(f, "{}", self.0)
        } else {
            write!(f, "{:e}", self.0)
        }
    }
}

/// `key = value` report, one entry per line.
#[derive(Debug, Default)]
pub struct KeyValue {
    lines: Vec<String>,
}

impl KeyValue {
    pub fn put(&mut self, key: &str, value: impl Display) -> &mut Self {
        self.lines.push(format!("{key} = {value}"));
        self
    }

    pub fn render(&self) -> String {
        let mut s = self.lines.join("\n");
        s.push('\n');
        s
    }
}

/// Writes rows of displayable cells under `header`.
pub fn write_csv<R, C>(path: &Path, header: &[&str], rows: R) -> Result<(), Failure>
where
    R: IntoIterator<Item = Vec<C>>,
    C: Display,
{
    let mut s = header.join(",");
    s.push('\n');
    for row in rows {
        let cells: Vec<String> = row.iter().map(|c| c.to_string()).collect();
        s.push_str(&cells.join(","));
        s.push('\n');
    }
    write_file(path, &s)
}

pub fn write_file(path: &Path, contents: &str) -> Result<(), Failure> {
    fs::write(path, contents).map_err(|e| Failure::io(format!("cannot write {}: {e}", path.display())))
}
