use std::fmt::Write as _;
use std::io;

use serde_json::Value;

#[derive(Debug, Clone)]
pub enum Cell {
    Int(i64),
    Num(f64),
    Text(String),
    Empty,
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<Option<f64>> for Cell {
    fn from(v: Option<f64>) -> Self {
        v.map_or(Cell::Empty, Cell::Num)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Text(if v { "yes" } else { "no" }.into())
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.into())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

/// Six significant digits, switching to scientific notation for very large
/// or small magnitudes.
pub fn sig6(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let exp = x.abs().log10().floor() as i32;
    if !(-4..6).contains(&exp) {
        return format!("{x:.5e}");
    }
    let decimals = (5 - exp).max(0) as usize;
    let s = format!("{x:.decimals$}");
    // Rounding can carry into a new digit, e.g. 9.999996 -> 10.00000.
    let digits = s.chars().filter(char::is_ascii_digit).collect::<String>();
    if digits.trim_start_matches('0').len() > 6 && decimals > 0 {
        return format!("{x:.prec$}", prec = decimals - 1);
    }
    s
}

impl Cell {
    fn human(&self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            Cell::Num(v) => sig6(*v),
            Cell::Text(s) => s.clone(),
            Cell::Empty => "-".into(),
        }
    }

    fn machine(&self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            Cell::Num(v) => format!("{v:?}"),
            Cell::Text(s) => s.clone(),
            Cell::Empty => String::new(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Table {
    pub name: String,
    pub headers: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(name: &str, headers: &[&str]) -> Self {
        Self {
            name: name.into(),
            headers: headers.iter().map(|h| h.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn with_headers(name: &str, headers: Vec<String>) -> Self {
        Self {
            name: name.into(),
            headers,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.headers.len());
        self.rows.push(row);
    }
}

/// Outcome of a command as seen by the shell.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Ok,
    /// A solver hit its budget, or a verification check failed.
    NotConverged,
}

#[derive(Debug, Clone)]
pub struct Report {
    pub title: String,
    /// `key: value` lines shown above the tables.
    pub summary: Vec<(String, Cell)>,
    pub tables: Vec<Table>,
    pub json: Value,
    pub status: Status,
}

impl Report {
    pub fn new(title: impl Into<String>, json: Value) -> Self {
        Self {
            title: title.into(),
            summary: Vec::new(),
            tables: Vec::new(),
            json,
            status: Status::Ok,
        }
    }

    pub fn line(&mut self, key: &str, value: impl Into<Cell>) {
        self.summary.push((key.into(), value.into()));
    }

    pub fn human(&self) -> String {
        let mut out = String::new();
        writeln!(out, "{}", self.title).unwrap();
        let width = self.summary.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
        for (k, v) in &self.summary {
            writeln!(out, "  {k:<width$}  {}", v.human()).unwrap();
        }
        for t in &self.tables {
            writeln!(out, "\n{}", t.name).unwrap();
            let cells: Vec<Vec<String>> = t.rows.iter().map(|r| r.iter().map(Cell::human).collect()).collect();
            let widths: Vec<usize> = (0..t.headers.len())
                .map(|c| cells.iter().map(|r| r[c].len()).chain([t.headers[c].len()]).max().unwrap_or(0))
                .collect();
            let fmt_row = |row: &[String]| {
                row.iter()
                    .zip(&widths)
                    .map(|(s, w)| format!("{s:>w$}"))
                    .collect::<Vec<_>>()
                    .join("  ")
            };
            writeln!(out, "  {}", fmt_row(&t.headers)).unwrap();
            for r in &cells {
                writeln!(out, "  {}", fmt_row(r)).unwrap();
            }
        }
        out
    }

    /// Every table in long form: the first column names the table, and each
    /// table starts with its own header row.
    pub fn csv(&self) -> io::Result<String> {
        let mut w = csv::WriterBuilder::new().flexible(true).from_writer(Vec::new());
        let summary: Vec<String> = ["summary".to_string(), "key".into(), "value".into()].into();
        w.write_record(&summary)?;
        for (k, v) in &self.summary {
            w.write_record(["summary", k, &v.machine()])?;
        }
        for t in &self.tables {
            w.write_record(std::iter::once(t.name.as_str()).chain(t.headers.iter().map(String::as_str)))?;
            for r in &t.rows {
                w.write_record(std::iter::once(t.name.clone()).chain(r.iter().map(Cell::machine)))?;
            }
        }
        let bytes = w.into_inner().map_err(|e| io::Error::other(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn json_text(&self) -> String {
        serde_json::to_string_pretty(&self.json).expect("report serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn six_significant_digits() {
        assert_eq!(sig6(12.4712345), "12.4712");
        assert_eq!(sig6(0.998), "0.998000");
        assert_eq!(sig6(-3.28), "-3.28000");
        assert_eq!(sig6(9.9999996), "10.0000");
        assert_eq!(sig6(123456.7), "123457");
        assert_eq!(sig6(1234567.0), "1.23457e6");
        assert_eq!(sig6(0.000012345678), "1.23457e-5");
        assert_eq!(sig6(0.0), "0");
        assert_eq!(sig6(f64::INFINITY), "inf");
    }

    #[test]
    fn csv_keeps_full_precision() {
        let mut r = Report::new("t", Value::Null);
        r.line("u", 0.1 + 0.2);
        let mut t = Table::new("rows", &["a", "b"]);
        t.push(vec![1usize.into(), "x,y".into()]);
        r.tables.push(t);
        let text = r.csv().unwrap();
        assert!(text.contains("summary,u,0.30000000000000004"), "{text}");
        assert!(text.contains("rows,1,\"x,y\""), "{text}");
    }
}
