//! CSV formats of designs, responses and result tables.
//!
//! Numbers are written in Rust's shortest round-trip form, so reading a file
//! back reproduces every value bit for bit.
//!
//! Design files start with a `# doe kind=sobol dim=7 n=100 skip=0` line
//! (`seed=` instead of `skip=` for LHS and Monte Carlo designs), then an
//! optional `# names=a,b,…` line, then one row per point in physical units.
//! Response files start with `# responses n=… m=… failed=…`, then a header
//! `ok,<labels…>` and one row per design point; failed rows have `ok = 0`
//! and `NaN` values.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use uqforge_core::doe::{DesignForm, DesignMatrix, DoeKind, Provenance};
use uqforge_core::linalg::Matrix;

use crate::runner::ResponseSet;
use crate::{Error, Result};

/// Shortest representation that parses back to the same `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(Error::io(dir))?;
    }
    std::fs::write(path, text).map_err(Error::io(path))
}

fn csv_line(fields: impl IntoIterator<Item = String>) -> String {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(fields).expect("in-memory write");
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields")
}

/// Header comment lines (`# key=value …`) and the remaining CSV body.
fn split_comments(text: &str) -> (Vec<&str>, &str) {
    let mut comments = Vec::new();
    let mut rest = text;
    while let Some(line) = rest.strip_prefix('#') {
        let end = line.find('\n').map_or(line.len(), |i| i + 1);
        comments.push(line[..end].trim());
        rest = &line[end..];
    }
    (comments, rest)
}

fn key_values(line: &str) -> BTreeMap<&str, &str> {
    line.split_whitespace().filter_map(|t| t.split_once('=')).collect()
}

fn records(body: &str, has_headers: bool) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new().has_headers(has_headers).trim(csv::Trim::All).comment(Some(b'#')).from_reader(body.as_bytes())
}

fn parse_field(path: &Path, row: usize, field: &str) -> Result<f64> {
    field.parse().map_err(|_| Error::schema(path, format!("row {row}: `{field}` is not a number")))
}

pub fn design_to_string(design: &DesignMatrix, names: &[String]) -> String {
    let p = design.provenance;
    let origin = match p.kind {
        DoeKind::Sobol => format!("skip={}", p.skip),
        _ => format!("seed={}", p.seed),
    };
    let mut s = format!("# doe kind={} dim={} n={} {origin}\n", p.kind.as_str(), design.dim(), design.len());
    if !names.is_empty() {
        let _ = writeln!(s, "# names={}", names.join(","));
    }
    for row in design.points.row_iter() {
        s.push_str(&csv_line(row.iter().map(|&v| fmt_f64(v))));
    }
    s
}

pub fn write_design(path: &Path, design: &DesignMatrix, names: &[String]) -> Result<()> {
    write_file(path, &design_to_string(design, names))
}

/// A design read back from disk, in physical units.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignFile {
    pub design: DesignMatrix,
    pub names: Option<Vec<String>>,
}

pub fn read_design(path: &Path) -> Result<DesignFile> {
    let text = std::fs::read_to_string(path).map_err(Error::io(path))?;
    parse_design(&text, path)
}

pub fn parse_design(text: &str, path: &Path) -> Result<DesignFile> {
    let (comments, body) = split_comments(text);
    let header = comments
        .first()
        .and_then(|c| c.strip_prefix("doe"))
        .ok_or_else(|| Error::schema(path, "first line must be `# doe kind=… dim=… n=…`"))?;
    let kv = key_values(header);
    let get = |k: &str| -> Result<u64> {
        kv.get(k)
            .ok_or_else(|| Error::schema(path, format!("design header lacks `{k}=`")))?
            .parse()
            .map_err(|_| Error::schema(path, format!("design header `{k}` is not an integer")))
    };
    let kind: DoeKind = kv.get("kind").copied().unwrap_or("external").parse().map_err(|e| Error::schema(path, format!("{e}")))?;
    let (dim, n) = (get("dim")? as usize, get("n")? as usize);
    let provenance = Provenance {
        kind,
        skip: if kv.contains_key("skip") { get("skip")? } else { 0 },
        seed: if kv.contains_key("seed") { get("seed")? } else { 0 },
    };
    let names = comments.iter().find_map(|c| c.strip_prefix("names=")).map(|s| s.split(',').map(|n| n.trim().to_string()).collect::<Vec<_>>());
    if let Some(names) = &names {
        if names.len() != dim {
            return Err(Error::schema(path, format!("{} names for dim={dim}", names.len())));
        }
    }
    let mut data = Vec::with_capacity(n * dim);
    let mut rows = 0;
    for (i, rec) in records(body, false).records().enumerate() {
        let rec = rec.map_err(|e| Error::schema(path, e.to_string()))?;
        if rec.len() != dim {
            return Err(Error::schema(path, format!("row {i} has {} columns, header says dim={dim}", rec.len())));
        }
        for f in rec.iter() {
            let v = parse_field(path, i, f)?;
            if !v.is_finite() {
                return Err(Error::schema(path, format!("row {i}: non-finite coordinate")));
            }
            data.push(v);
        }
        rows += 1;
    }
    if rows != n {
        return Err(Error::schema(path, format!("{rows} rows, header says n={n}")));
    }
    let points = Matrix::from_row_major(n, dim, data)?;
    Ok(DesignFile { design: DesignMatrix::new(points, DesignForm::Physical, provenance), names })
}

pub fn responses_to_string(r: &ResponseSet) -> String {
    let mut s = format!("# responses n={} m={} failed={}\n", r.len(), r.labels.len(), r.failures());
    s.push_str(&csv_line(std::iter::once("ok".to_string()).chain(r.labels.iter().cloned())));
    for (i, row) in r.values.row_iter().enumerate() {
        let ok = if r.failed[i] { "0" } else { "1" };
        s.push_str(&csv_line(std::iter::once(ok.to_string()).chain(row.iter().map(|&v| fmt_f64(v)))));
    }
    s
}

pub fn write_responses(path: &Path, r: &ResponseSet) -> Result<()> {
    write_file(path, &responses_to_string(r))
}

pub fn read_responses(path: &Path) -> Result<ResponseSet> {
    let text = std::fs::read_to_string(path).map_err(Error::io(path))?;
    parse_responses(&text, path)
}

pub fn parse_responses(text: &str, path: &Path) -> Result<ResponseSet> {
    let (comments, body) = split_comments(text);
    if !comments.first().is_some_and(|c| c.starts_with("responses")) {
        return Err(Error::schema(path, "first line must be `# responses n=… m=…`"));
    }
    let mut rdr = records(body, true);
    let header = rdr.headers().map_err(|e| Error::schema(path, e.to_string()))?.clone();
    if header.get(0) != Some("ok") || header.len() < 2 {
        return Err(Error::schema(path, "header must be `ok,<label>,…`"));
    }
    let labels: Vec<String> = header.iter().skip(1).map(String::from).collect();
    let m = labels.len();
    let (mut data, mut failed) = (Vec::new(), Vec::new());
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::schema(path, e.to_string()))?;
        if rec.len() != m + 1 {
            return Err(Error::schema(path, format!("row {i} has {} columns, expected {}", rec.len(), m + 1)));
        }
        let ok = match &rec[0] {
            "1" => true,
            "0" => false,
            other => return Err(Error::schema(path, format!("row {i}: ok flag `{other}` must be 0 or 1"))),
        };
        let start = data.len();
        for f in rec.iter().skip(1) {
            data.push(parse_field(path, i, f)?);
        }
        if ok && data[start..].iter().any(|v| !v.is_finite()) {
            return Err(Error::schema(path, format!("row {i} is marked ok but holds non-finite values")));
        }
        failed.push(!ok);
    }
    let n = failed.len();
    Ok(ResponseSet {
        labels,
        values: Matrix::from_row_major(n, m, data)?,
        diagnostics: failed.iter().map(|&f| f.then(|| "failed in an earlier run".to_string())).collect(),
        failed,
    })
}

/// A plain CSV table with one header row.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Self { header: header.into_iter().map(Into::into).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut s = csv_line(self.header.iter().cloned());
        for r in &self.rows {
            s.push_str(&csv_line(r.iter().cloned()));
        }
        s
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_file(path, &self.to_csv())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(Error::io(path))?;
        let mut rdr = records(&text, true);
        let header = rdr.headers().map_err(|e| Error::schema(path, e.to_string()))?.iter().map(String::from).collect();
        let rows = rdr
            .records()
            .map(|r| r.map(|r| r.iter().map(String::from).collect()).map_err(|e| Error::schema(path, e.to_string())))
            .collect::<Result<_>>()?;
        Ok(Self { header, rows })
    }
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<()> {
    write_file(path, text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use uqforge_core::doe::{lhs, scale, sobol_sequence};
    use uqforge_core::models::nozzle_space;

    #[test]
    fn design_header_format() {
        let space = nozzle_space();
        let d = scale(&sobol_sequence(7, 100, 0).unwrap(), &space).unwrap();
        let names: Vec<String> = space.names().map(String::from).collect();
        let text = design_to_string(&d, &names);
        assert!(text.starts_with("# doe kind=sobol dim=7 n=100 skip=0\n# names=InletPressure,"));
        assert_eq!(text.lines().count(), 102);
        let back = parse_design(&text, Path::new("d.csv")).unwrap();
        assert_eq!(back.design, d);
        assert_eq!(back.names.unwrap(), names);

        let l = lhs(2, 5, 42).unwrap();
        let text = design_to_string(&l, &[]);
        assert!(text.starts_with("# doe kind=lhs dim=2 n=5 seed=42\n"));
        assert_eq!(parse_design(&text, Path::new("d.csv")).unwrap().design.provenance, l.provenance);
    }

    #[test]
    fn design_schema_errors() {
        let p = Path::new("d.csv");
        for bad in [
            "1,2\n",
            "# doe kind=sobol dim=2 n=2 skip=0\n1,2\n",
            "# doe kind=sobol dim=2 n=1 skip=0\n1,2,3\n",
            "# doe kind=sobol dim=2 n=1 skip=0\n1,x\n",
            "# doe kind=nope dim=2 n=1\n1,2\n",
            "# doe dim=2 n=1\n# names=a\n1,2\n",
        ] {
            let e = parse_design(bad, p).unwrap_err();
            assert_eq!(e.exit_code(), 3, "{bad:?} -> {e}");
        }
    }

    #[test]
    fn responses_round_trip_with_failures() {
        let r = ResponseSet {
            labels: vec!["p_000".into(), "T_000".into()],
            values: Matrix::from_rows(&[[1.5, -2.0], [f64::NAN, f64::NAN], [1e-300, 3.0]]).unwrap(),
            failed: vec![false, true, false],
            diagnostics: vec![None, Some("x".into()), None],
        };
        let text = responses_to_string(&r);
        assert!(text.starts_with("# responses n=3 m=2 failed=1\nok,p_000,T_000\n1,1.5,-2.0\n0,NaN,NaN\n"));
        let back = parse_responses(&text, Path::new("r.csv")).unwrap();
        assert_eq!(back.failed, r.failed);
        assert_eq!(back.values.row(2), r.values.row(2));
        assert!(parse_responses("# responses\nok,y\n1,NaN\n", Path::new("r.csv")).is_err());
    }

    #[test]
    fn table_quotes_and_round_trips() {
        let mut t = Table::new(["name", "value"]);
        t.push(vec!["a,b".into(), fmt_f64(0.1)]);
        let text = t.to_csv();
        assert_eq!(text, "name,value\n\"a,b\",0.1\n");
    }

    proptest! {
        #[test]
        fn design_values_round_trip(vals in proptest::collection::vec(-1e300f64..1e300, 6)) {
            let m = Matrix::from_row_major(3, 2, vals).unwrap();
            let d = DesignMatrix::new(m, DesignForm::Physical, Provenance { kind: DoeKind::External, seed: 0, skip: 0 });
            let back = parse_design(&design_to_string(&d, &[]), Path::new("x")).unwrap();
            prop_assert_eq!(back.design.points, d.points);
        }
    }
}
