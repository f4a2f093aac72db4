//! Dataset ingestion and result emission.
//!
//! Input files are delimited text with a header naming the columns `x`, `row`
//! and `col`. Row and column levels may be coded `1/2` or `0/1`; with `0/1`
//! coding, `1` maps to level 1 and `0` to level 2 (so "event present" is the
//! first row or column). Lines starting with `#` are ignored.
//!
//! Outputs are tables written as CSV with `#`-prefixed metadata lines, or as a
//! JSON object holding the same metadata and one object per row.

use std::io::{Read, Write};
use std::path::Path;

use serde_json::{Map, Value};

use crate::baselines::Table2x2;
use crate::error::{Error, Result};
use crate::sample::{Cell, Sample};

/// How one of the two binary variables was coded in the input.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LevelCoding {
    /// Levels `1` and `2`, used as-is.
    OneTwo,
    /// Levels `0` and `1`, mapped `1 → 1`, `0 → 2`.
    ZeroOne,
}

impl LevelCoding {
    pub fn describe(self) -> &'static str {
        match self {
            LevelCoding::OneTwo => "1->1,2->2",
            LevelCoding::ZeroOne => "1->1,0->2",
        }
    }

    fn map(self, v: u8) -> u8 {
        match (self, v) {
            (LevelCoding::ZeroOne, 0) => 2,
            (_, v) => v,
        }
    }
}

/// A parsed dataset and what was learned while reading it.
#[derive(Debug, Clone)]
pub struct Ingested {
    pub sample: Sample,
    pub row_coding: LevelCoding,
    pub col_coding: LevelCoding,
    pub table: Table2x2,
}

/// Read a dataset from `path`.
pub fn read_sample_path(path: impl AsRef<Path>, delimiter: u8) -> Result<Ingested> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    read_sample(file, delimiter)
}

struct RawRow {
    line: usize,
    x: f64,
    row: u8,
    col: u8,
}

/// Read a dataset with header `x,row,col` (any column order).
pub fn read_sample(reader: impl Read, delimiter: u8) -> Result<Ingested> {
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(reader);

    let header = rdr.headers().map_err(|e| csv_error(e, 1))?.clone();
    if header.is_empty() {
        return Err(Error::EmptyFile);
    }
    let position = |name: &str| {
        header
            .iter()
            .position(|h| h.eq_ignore_ascii_case(name))
            .ok_or_else(|| Error::Parse { line: 1, message: format!("header lacks a '{name}' column") })
    };
    let (ix, ir, ic) = (position("x")?, position("row")?, position("col")?);

    let mut raw = Vec::new();
    for result in rdr.records() {
        let record = result.map_err(|e| csv_error(e, 0))?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.iter().all(str::is_empty) {
            continue;
        }
        let field = |i: usize, name: &str| {
            record.get(i).ok_or_else(|| Error::Parse { line, message: format!("missing '{name}' field") })
        };
        let x_text = field(ix, "x")?;
        let x: f64 = x_text
            .parse()
            .ok()
            .filter(|v: &f64| v.is_finite())
            .ok_or_else(|| Error::Parse { line, message: format!("x = '{x_text}' is not a finite number") })?;
        let level = |i: usize, name: &str| -> Result<u8> {
            let text = field(i, name)?;
            match text {
                "0" => Ok(0),
                "1" => Ok(1),
                "2" => Ok(2),
                _ => Err(Error::Parse { line, message: format!("{name} = '{text}' is not one of 0, 1, 2") }),
            }
        };
        raw.push(RawRow { line, x, row: level(ir, "row")?, col: level(ic, "col")? });
    }
    if raw.is_empty() {
        return Err(Error::EmptyFile);
    }

    let row_coding = detect_coding(&raw, |r| r.row, "row")?;
    let col_coding = detect_coding(&raw, |r| r.col, "col")?;
    let mut xs = Vec::with_capacity(raw.len());
    let mut cells = Vec::with_capacity(raw.len());
    for r in &raw {
        xs.push(r.x);
        cells.push(Cell::new(row_coding.map(r.row), col_coding.map(r.col))?);
    }
    let (lo, hi) = xs.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    let sample = Sample::from_parts(xs, cells, lo, hi)?;
    let table = sample.table();
    Ok(Ingested { sample, row_coding, col_coding, table })
}

fn detect_coding(raw: &[RawRow], get: impl Fn(&RawRow) -> u8, name: &str) -> Result<LevelCoding> {
    let zero = raw.iter().find(|r| get(r) == 0);
    let two = raw.iter().find(|r| get(r) == 2);
    match (zero, two) {
        (Some(z), Some(t)) => Err(Error::Parse {
            line: z.line.max(t.line),
            message: format!("{name} mixes 0/1 and 1/2 coding (0 on line {}, 2 on line {})", z.line, t.line),
        }),
        (Some(_), None) => Ok(LevelCoding::ZeroOne),
        _ => Ok(LevelCoding::OneTwo),
    }
}

fn csv_error(e: csv::Error, fallback_line: usize) -> Error {
    let line = e.position().map_or(fallback_line, |p| p.line() as usize);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io.to_string()),
        kind => Error::Parse { line, message: format!("{kind:?}") },
    }
}

/// Write `sample` as `x,row,col` with levels 1/2; `x` uses the shortest
/// decimal that reads back to the same value.
pub fn write_sample(writer: impl Write, sample: &Sample, delimiter: u8) -> Result<()> {
    let mut w = csv::WriterBuilder::new().delimiter(delimiter).from_writer(writer);
    let io = |e: csv::Error| Error::Io(e.to_string());
    w.write_record(["x", "row", "col"]).map_err(io)?;
    for obs in sample.observations() {
        w.write_record([obs.x.to_string(), obs.cell.row().to_string(), obs.cell.col().to_string()]).map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

/// Evaluation grid written as `lo:hi:step`; `hi` is included when it lies on
/// the lattice.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub lo: f64,
    pub hi: f64,
    pub step: f64,
}

impl GridSpec {
    pub fn points(&self) -> Vec<f64> {
        let count = ((self.hi - self.lo) / self.step + 1e-9).floor() as usize + 1;
        (0..count).map(|i| self.lo + i as f64 * self.step).collect()
    }
}

impl std::str::FromStr for GridSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidInput(format!("grid must look like lo:hi:step, got '{s}'"));
        let parts: Vec<f64> =
            s.split(':').map(|p| p.trim().parse::<f64>()).collect::<std::result::Result<_, _>>().map_err(|_| bad())?;
        let [lo, hi, step] = parts[..] else { return Err(bad()) };
        if !(lo.is_finite() && hi.is_finite() && step.is_finite()) {
            return Err(bad());
        }
        if step <= 0.0 {
            return Err(Error::InvalidInput(format!("grid step must be positive, got {step}")));
        }
        if hi < lo {
            return Err(Error::InvalidInput(format!("grid upper end {hi} is below lower end {lo}")));
        }
        Ok(Self { lo, hi, step })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Json,
}

impl std::str::FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(Error::InvalidInput(format!("unknown output format '{other}'"))),
        }
    }
}

/// One value in an output table.
#[derive(Debug, Clone, PartialEq)]
pub enum Field {
    Num(f64),
    Int(u64),
    Bool(bool),
    Text(String),
    Empty,
}

impl Field {
    fn to_csv(&self) -> String {
        match self {
            Field::Num(v) => v.to_string(),
            Field::Int(v) => v.to_string(),
            Field::Bool(v) => v.to_string(),
            Field::Text(s) => s.clone(),
            Field::Empty => String::new(),
        }
    }

    fn to_json(&self) -> Value {
        match self {
            // NaN and infinities have no JSON literal.
            Field::Num(v) => serde_json::Number::from_f64(*v).map_or(Value::Null, Value::Number),
            Field::Int(v) => Value::from(*v),
            Field::Bool(v) => Value::Bool(*v),
            Field::Text(s) => Value::String(s.clone()),
            Field::Empty => Value::Null,
        }
    }
}

impl From<f64> for Field {
    fn from(v: f64) -> Self {
        Field::Num(v)
    }
}

impl From<usize> for Field {
    fn from(v: usize) -> Self {
        Field::Int(v as u64)
    }
}

impl From<u64> for Field {
    fn from(v: u64) -> Self {
        Field::Int(v)
    }
}

impl From<bool> for Field {
    fn from(v: bool) -> Self {
        Field::Bool(v)
    }
}

impl From<&str> for Field {
    fn from(v: &str) -> Self {
        Field::Text(v.to_owned())
    }
}

impl From<String> for Field {
    fn from(v: String) -> Self {
        Field::Text(v)
    }
}

/// A result table plus the metadata needed to reproduce it.
#[derive(Debug, Clone, Default)]
pub struct Report {
    pub metadata: Vec<(String, String)>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Field>>,
}

impl Report {
    pub fn new(columns: &[&str]) -> Self {
        Self { metadata: Vec::new(), columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn meta(&mut self, key: &str, value: impl ToString) -> &mut Self {
        self.metadata.push((key.to_owned(), value.to_string()));
        self
    }

    pub fn push(&mut self, row: Vec<Field>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn write(&self, writer: impl Write, format: OutputFormat, delimiter: u8) -> Result<()> {
        match format {
            OutputFormat::Csv => self.write_csv(writer, delimiter),
            OutputFormat::Json => self.write_json(writer),
        }
    }

    pub fn write_csv(&self, mut writer: impl Write, delimiter: u8) -> Result<()> {
        for (k, v) in &self.metadata {
            writeln!(writer, "# {k}: {v}")?;
        }
        let mut w = csv::WriterBuilder::new().delimiter(delimiter).from_writer(writer);
        let io = |e: csv::Error| Error::Io(e.to_string());
        w.write_record(&self.columns).map_err(io)?;
        for row in &self.rows {
            w.write_record(row.iter().map(Field::to_csv)).map_err(io)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_json(&self) -> Value {
        let metadata: Map<String, Value> =
            self.metadata.iter().map(|(k, v)| (k.clone(), Value::String(v.clone()))).collect();
        let rows: Vec<Value> = self
            .rows
            .iter()
            .map(|row| Value::Object(self.columns.iter().cloned().zip(row.iter().map(Field::to_json)).collect()))
            .collect();
        serde_json::json!({ "metadata": metadata, "columns": self.columns, "rows": rows })
    }

    pub fn write_json(&self, mut writer: impl Write) -> Result<()> {
        serde_json::to_writer_pretty(&mut writer, &self.to_json()).map_err(|e| Error::Io(e.to_string()))?;
        writeln!(writer)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ingest(text: &str) -> Result<Ingested> {
        read_sample(text.as_bytes(), b',')
    }

    #[test]
    fn four_cells() {
        let d = ingest("x,row,col\n0.1,1,1\n0.2,1,2\n0.3,2,1\n0.4,2,2\n").unwrap();
        assert_eq!(d.sample.len(), 4);
        assert_eq!(d.table, Table2x2::new(1, 1, 1, 1));
        assert_eq!(d.row_coding, LevelCoding::OneTwo);
    }

    #[test]
    fn zero_one_coding_puts_ones_first() {
        let d = ingest("x,row,col\n0,1,1\n1,1,0\n2,0,0\n3,0,0\n").unwrap();
        assert_eq!((d.row_coding, d.col_coding), (LevelCoding::ZeroOne, LevelCoding::ZeroOne));
        assert_eq!(d.table, Table2x2::new(1, 1, 0, 2));
    }

    #[test]
    fn columns_in_any_order_with_comments() {
        let d = ingest("# note\ncol;row;x\n2;1;0.5\n".replace(';', ",").as_str()).unwrap();
        assert_eq!(d.sample.cells(), &[Cell::C12]);
    }

    #[test]
    fn bad_row_names_its_line() {
        let mut text = String::from("x,row,col\n");
        for k in 0..15 {
            text.push_str(&format!("{k},1,2\n"));
        }
        text.push_str("oops,1,2\n");
        match ingest(&text) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 17),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn bad_level_and_mixed_coding() {
        assert!(matches!(ingest("x,row,col\n1,3,1\n"), Err(Error::Parse { line: 2, .. })));
        assert!(matches!(ingest("x,row,col\n1,0,1\n2,2,1\n"), Err(Error::Parse { line: 3, .. })));
    }

    #[test]
    fn empty_inputs() {
        assert_eq!(ingest("").unwrap_err(), Error::EmptyFile);
        assert_eq!(ingest("x,row,col\n").unwrap_err(), Error::EmptyFile);
        assert!(matches!(ingest("x,row\n1,1\n"), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn sample_round_trip() {
        let xs = vec![0.1 + 0.2, -1e-300, 1.0 / 3.0, 12345.678901234567];
        let cells = vec![Cell::C11, Cell::C22, Cell::C21, Cell::C12];
        let s = Sample::from_parts(xs, cells, -1e-300, 12345.678901234567).unwrap();
        let mut buf = Vec::new();
        write_sample(&mut buf, &s, b'\t').unwrap();
        let back = read_sample(buf.as_slice(), b'\t').unwrap().sample;
        assert_eq!(back, s);
    }

    #[test]
    fn grid_spec() {
        let g: GridSpec = "-1.75:1.75:0.05".parse().unwrap();
        assert_eq!(g.points().len(), 71);
        assert_eq!("0:1:0.25".parse::<GridSpec>().unwrap().points(), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert!("0:1:0".parse::<GridSpec>().is_err());
        assert!("0:1".parse::<GridSpec>().is_err());
        assert!("1:0:0.1".parse::<GridSpec>().is_err());
    }

    #[test]
    fn report_formats() {
        let mut r = Report::new(&["x", "log_or", "valid"]);
        r.meta("seed", 7);
        r.push(vec![0.5.into(), f64::NAN.into(), false.into()]);
        let mut csv = Vec::new();
        r.write_csv(&mut csv, b',').unwrap();
        assert_eq!(String::from_utf8(csv).unwrap(), "# seed: 7\nx,log_or,valid\n0.5,NaN,false\n");
        let json = r.to_json();
        assert_eq!(json["metadata"]["seed"], "7");
        assert!(json["rows"][0]["log_or"].is_null());
        assert_eq!(json["rows"][0]["x"], 0.5);
    }
}
