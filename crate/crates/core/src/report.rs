//! Tabular output: TSV with `#` metadata lines, an equivalent JSON form,
//! BED intervals and the summary table.

use std::io::{self, Write};

use serde_json::{json, Map, Value};

use crate::analysis::{PairRecord, PipelineReport, SelectionReport, SummaryStats};
use crate::distances::Interval;
use crate::distributions::FiveNumber;

/// Formats with 6 significant digits, trailing zeros trimmed.
pub fn fmt_sig(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return if x.is_nan() { "NA".into() } else if x > 0.0 { "Inf".into() } else { "-Inf".into() };
    }
    let sci = format!("{:.5e}", x);
    let (mant, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("exponent");
    let neg = mant.starts_with('-');
    let digits: String = mant.chars().filter(|c| c.is_ascii_digit()).collect();
    // digits = d0 d1..d5 with value d0.d1..d5 * 10^exp
    let mut s = if exp >= 5 {
        format!("{}{}", digits, "0".repeat((exp - 5) as usize))
    } else if exp >= 0 {
        let (int, frac) = digits.split_at(exp as usize + 1);
        format!("{int}.{frac}")
    } else {
        format!("0.{}{}", "0".repeat((-exp - 1) as usize), digits)
    };
    if s.contains('.') {
        s = s.trim_end_matches('0').trim_end_matches('.').to_string();
    }
    if neg {
        format!("-{s}")
    } else {
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(u64),
    Float(f64),
    Text(String),
    Na,
}

impl Cell {
    fn tsv(&self) -> String {
        match self {
            Cell::Int(i) => i.to_string(),
            Cell::Float(x) => fmt_sig(*x),
            Cell::Text(t) => t.clone(),
            Cell::Na => "NA".into(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Int(i) => json!(i),
            Cell::Float(x) if x.is_finite() => json!(x),
            Cell::Float(x) => json!(fmt_sig(*x)),
            Cell::Text(t) => json!(t),
            Cell::Na => Value::Null,
        }
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v)
    }
}
impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as u64)
    }
}
impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}
impl From<Option<f64>> for Cell {
    fn from(v: Option<f64>) -> Self {
        v.map_or(Cell::Na, Cell::Float)
    }
}
impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}
impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

/// A table plus `key value` metadata.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub meta: Vec<(String, String)>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Table {
            meta: Vec::new(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn with_meta(mut self, meta: &[(String, String)]) -> Self {
        self.meta.extend_from_slice(meta);
        self
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn write_tsv<W: Write>(&self, mut out: W) -> io::Result<()> {
        for (k, v) in &self.meta {
            writeln!(out, "#{k}\t{v}")?;
        }
        writeln!(out, "{}", self.columns.join("\t"))?;
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(Cell::tsv).collect();
            writeln!(out, "{}", cells.join("\t"))?;
        }
        out.flush()
    }

    pub fn write_json<W: Write>(&self, mut out: W) -> io::Result<()> {
        let meta: Map<String, Value> = self.meta.iter().map(|(k, v)| (k.clone(), json!(v))).collect();
        let records: Vec<Value> = self
            .rows
            .iter()
            .map(|row| {
                let m: Map<String, Value> = self
                    .columns
                    .iter()
                    .zip(row)
                    .map(|(c, v)| (c.clone(), v.json()))
                    .collect();
                Value::Object(m)
            })
            .collect();
        serde_json::to_writer_pretty(&mut out, &json!({ "meta": meta, "records": records }))?;
        writeln!(out)?;
        out.flush()
    }

    pub fn write<W: Write>(&self, out: W, as_json: bool) -> io::Result<()> {
        if as_json {
            self.write_json(out)
        } else {
            self.write_tsv(out)
        }
    }
}

/// `chrom  start  end`, 0-based half-open, one interval per line.
pub fn export_bed<W: Write>(intervals: &[Interval], mut out: W) -> io::Result<()> {
    for iv in intervals {
        writeln!(out, "{}\t{}\t{}", iv.chromosome, iv.start, iv.end)?;
    }
    out.flush()
}

fn five_cells(f: &Option<FiveNumber>, i: usize) -> Cell {
    f.map(|f| f.as_array()[i]).into()
}

/// Five-number summaries side by side, one row per statistic.
pub fn summary_report(s: &SummaryStats) -> Table {
    let mut t = Table::new(&["statistic", "S_w", "ratio_all", "d_retained", "ratio_retained"]);
    for (i, name) in ["min", "q1", "median", "q3", "max"].iter().enumerate() {
        t.push(vec![
            (*name).into(),
            s.totals.as_array()[i].into(),
            five_cells(&s.ratio_all, i),
            five_cells(&s.d_retained, i),
            five_cells(&s.ratio_retained, i),
        ]);
    }
    t
}

/// Counts, thresholds and cuts as `quantity  value` rows.
pub fn counts_report(s: &SummaryStats, sel: Option<&SelectionReport>) -> Table {
    let mut t = Table::new(&["quantity", "value"]);
    t.push(vec!["pairs_total".into(), s.pairs_total.into()]);
    t.push(vec!["pairs_retained".into(), s.pairs_retained.into()]);
    t.push(vec!["pairs_excluded".into(), s.pairs_excluded.into()]);
    t.push(vec!["pairs_peakless".into(), s.pairs_peakless.into()]);
    t.push(vec!["pairs_palindromic".into(), s.pairs_palindromic.into()]);
    t.push(vec!["filter_threshold".into(), s.threshold.into()]);
    t.push(vec!["low_cut".into(), sel.map(|x| x.low_cut).into()]);
    t.push(vec!["high_cut".into(), sel.map(|x| x.high_cut).into()]);
    t.push(vec!["low_pairs".into(), sel.map_or(Cell::Na, |x| x.low_pairs.len().into())]);
    t.push(vec!["high_pairs".into(), sel.map_or(Cell::Na, |x| x.high_pairs.len().into())]);
    t
}

fn pair_row(r: &PairRecord) -> Vec<Cell> {
    vec![
        r.pair.w.to_string().into(),
        r.pair.w_bar.to_string().into(),
        r.s_w.into(),
        r.s_wbar.into(),
        r.d.into(),
        r.status.as_str().into(),
    ]
}

pub fn pairs_table(report: &PipelineReport) -> Table {
    let mut t = Table::new(&["w", "wbar", "S_w", "S_wbar", "d", "status"]);
    for r in &report.pairs {
        t.push(pair_row(r));
    }
    t
}

pub fn selection_table(sel: Option<&SelectionReport>) -> Table {
    let mut t = Table::new(&["group", "w", "wbar", "S_w", "S_wbar", "d"]);
    if let Some(sel) = sel {
        for (group, list) in [("low", &sel.low_pairs), ("high", &sel.high_pairs)] {
            for r in list {
                let mut row = pair_row(r);
                row.pop();
                row.insert(0, group.into());
                t.push(row);
            }
        }
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn significant_digits() {
        assert_eq!(fmt_sig(0.470564077), "0.470564");
        assert_eq!(fmt_sig(178.749), "178.749");
        assert_eq!(fmt_sig(1498.0), "1498");
        assert_eq!(fmt_sig(927376.0), "927376");
        assert_eq!(fmt_sig(12345678.0), "12345700");
        assert_eq!(fmt_sig(0.0001234567), "0.000123457");
        assert_eq!(fmt_sig(-2.5), "-2.5");
        assert_eq!(fmt_sig(1.0 / 3.0), "0.333333");
        assert_eq!(fmt_sig(f64::INFINITY), "Inf");
        assert_eq!(fmt_sig(0.0), "0");
    }

    #[test]
    fn bed_lines() {
        let mut buf = Vec::new();
        export_bed(&[], &mut buf).unwrap();
        assert!(buf.is_empty());
        let iv = Interval { chromosome: "c1".into(), start: 13, end: 20 };
        export_bed(&[iv], &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "c1\t13\t20\n");
    }

    #[test]
    fn table_formats() {
        let mut t = Table::new(&["a", "b"]).with_meta(&[("tool".into(), "x".into())]);
        t.push(vec![1u64.into(), Cell::Na]);
        let mut tsv = Vec::new();
        t.write_tsv(&mut tsv).unwrap();
        assert_eq!(String::from_utf8(tsv).unwrap(), "#tool\tx\na\tb\n1\tNA\n");
        let mut js = Vec::new();
        t.write_json(&mut js).unwrap();
        let v: Value = serde_json::from_slice(&js).unwrap();
        assert_eq!(v["records"][0]["a"], json!(1));
        assert!(v["records"][0]["b"].is_null());
        assert_eq!(v["meta"]["tool"], json!("x"));
    }
}
