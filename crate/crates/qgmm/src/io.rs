//! Dataset ingestion from CSV with a role-mapping configuration, result
//! serialization, and benchmark-table rendering.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::diagnostics::MessReport;
use crate::error::{Error, Result};
use crate::moment::Dataset;
use crate::samplers::{Algorithm, RunResult};

fn default_true() -> bool {
    true
}

/// Maps CSV columns onto model roles. Column order in the built matrices is
/// exactly `[intercept][endogenous|instruments][exogenous]`; exact
/// identification requires as many instruments as endogenous regressors.
/// For plain regression leave `endogenous`/`instruments` empty (Z = X).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ColumnMapping {
    pub outcome: String,
    #[serde(default)]
    pub endogenous: Vec<String>,
    #[serde(default)]
    pub instruments: Vec<String>,
    #[serde(default)]
    pub exogenous: Vec<String>,
    #[serde(default = "default_true")]
    pub add_intercept: bool,
}

impl ColumnMapping {
    /// Plain-regression mapping over the given covariate columns.
    pub fn regression(outcome: &str, covariates: &[&str], add_intercept: bool) -> Self {
        Self {
            outcome: outcome.into(),
            endogenous: Vec::new(),
            instruments: Vec::new(),
            exogenous: covariates.iter().map(|s| s.to_string()).collect(),
            add_intercept,
        }
    }

    pub fn from_json_file(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::FileNotFound(path.to_path_buf()));
        }
        Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.instruments.len() != self.endogenous.len() {
            return Err(Error::InvalidArgument(format!(
                "exact identification requires |instruments| = |endogenous|, got {} and {}",
                self.instruments.len(),
                self.endogenous.len()
            )));
        }
        Ok(())
    }
}

/// Reads an RFC-4180 CSV with a header row and assembles the dataset:
/// `X = [1?][endogenous][exogenous]`, `Z = [1?][instruments][exogenous]`.
/// Any unparsable mapped cell rejects its row with a row-indexed error.
pub fn ingest_csv(path: &Path, mapping: &ColumnMapping) -> Result<Dataset> {
    mapping.validate()?;
    if !path.exists() {
        return Err(Error::FileNotFound(path.to_path_buf()));
    }
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
    let headers: Vec<String> = reader.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let index_of = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::HeaderMismatch(name.to_string()))
    };

    let outcome_idx = index_of(&mapping.outcome)?;
    let x_names: Vec<&String> = mapping.endogenous.iter().chain(&mapping.exogenous).collect();
    let z_names: Vec<&String> = mapping.instruments.iter().chain(&mapping.exogenous).collect();
    let x_idx: Vec<usize> = x_names.iter().map(|n| index_of(n)).collect::<Result<_>>()?;
    let z_idx: Vec<usize> = z_names.iter().map(|n| index_of(n)).collect::<Result<_>>()?;

    let mut y = Vec::new();
    let mut x_rows: Vec<Vec<f64>> = Vec::new();
    let mut z_rows: Vec<Vec<f64>> = Vec::new();
    for (row_number, record) in reader.records().enumerate() {
        let record = record?;
        let parse = |col: usize, name: &str| -> Result<f64> {
            let cell = record.get(col).unwrap_or("").trim();
            cell.parse::<f64>().map_err(|_| Error::NonNumericCell {
                row: row_number + 1,
                column: name.to_string(),
                value: cell.to_string(),
            })
        };
        y.push(parse(outcome_idx, &mapping.outcome)?);
        x_rows.push(
            x_idx
                .iter()
                .zip(&x_names)
                .map(|(&c, n)| parse(c, n))
                .collect::<Result<_>>()?,
        );
        z_rows.push(
            z_idx
                .iter()
                .zip(&z_names)
                .map(|(&c, n)| parse(c, n))
                .collect::<Result<_>>()?,
        );
    }

    let n = y.len();
    let cols = x_idx.len();
    let x = DMatrix::from_fn(n, cols, |i, j| x_rows[i][j]);
    let z = DMatrix::from_fn(n, cols, |i, j| z_rows[i][j]);
    Dataset::new(DVector::from_vec(y), x, Some(z), mapping.add_intercept)
}

/// The JSON results document written next to each run.
#[derive(Serialize)]
struct ResultsDoc<'a> {
    algorithm: &'a str,
    prior: &'a str,
    n: usize,
    k: usize,
    seed: u64,
    draws_total: usize,
    draws_retained: usize,
    accept_stage1: f64,
    accept_stage2: f64,
    sampling_seconds: f64,
    mess: f64,
    mess_per_iter: f64,
    mess_per_sec: f64,
}

/// Writes the run summary as JSON and, when `draws_path` is given, the
/// retained draws as CSV with header `theta_1..theta_k` at 17 significant
/// digits (lossless f64 round-trip).
pub fn write_results(
    result: &RunResult,
    mess: &MessReport,
    path: &Path,
    draws_path: Option<&Path>,
) -> Result<()> {
    let doc = ResultsDoc {
        algorithm: result.algorithm.label(),
        prior: result.prior.label(),
        n: result.n,
        k: result.k,
        seed: result.seed,
        draws_total: result.total_draws,
        draws_retained: result.retained_draws,
        accept_stage1: result.accept_rate_stage1(),
        accept_stage2: result.accept_rate_stage2(),
        sampling_seconds: result.sampling_seconds,
        mess: mess.mess,
        mess_per_iter: mess.mess_per_iter,
        mess_per_sec: mess.mess_per_sec,
    };
    fs::write(path, serde_json::to_string_pretty(&doc)?)?;
    if let Some(draws_path) = draws_path {
        write_draws_csv(&result.draws, draws_path)?;
    }
    Ok(())
}

/// Writes a draw matrix as CSV (`theta_1..theta_k` header, one row per draw).
pub fn write_draws_csv(draws: &DMatrix<f64>, path: &Path) -> Result<()> {
    let mut out = std::io::BufWriter::new(fs::File::create(path)?);
    let k = draws.ncols();
    let header: Vec<String> = (1..=k).map(|j| format!("theta_{j}")).collect();
    writeln!(out, "{}", header.join(","))?;
    for i in 0..draws.nrows() {
        let row: Vec<String> = (0..k).map(|j| format!("{:.16e}", draws[(i, j)])).collect();
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}

/// Reads a draws CSV written by [`write_draws_csv`] (any numeric CSV with a
/// header row works).
pub fn read_draws_csv(path: &Path) -> Result<DMatrix<f64>> {
    if !path.exists() {
        return Err(Error::FileNotFound(path.to_path_buf()));
    }
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
    let k = reader.headers()?.len();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (row_number, record) in reader.records().enumerate() {
        let record = record?;
        let mut row = Vec::with_capacity(k);
        for (j, cell) in record.iter().enumerate() {
            row.push(cell.trim().parse::<f64>().map_err(|_| Error::NonNumericCell {
                row: row_number + 1,
                column: format!("col_{}", j + 1),
                value: cell.to_string(),
            })?);
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::EmptyInput(format!("{} has no data rows", path.display())));
    }
    Ok(DMatrix::from_fn(rows.len(), k, |i, j| rows[i][j]))
}

/// Key of one benchmark-table row: scenario label, problem size, algorithm.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct TableKey {
    pub scenario: String,
    pub n: usize,
    pub k: usize,
    pub algorithm: Algorithm,
}

/// Median efficiency measures over the completed replications.
#[derive(Clone, Copy, Debug)]
pub struct TableCell {
    pub mess_per_iter: f64,
    pub mess_per_sec: f64,
    pub completed: usize,
}

/// Benchmark results keyed by (scenario, n, k, algorithm).
#[derive(Clone, Debug, Default)]
pub struct BenchmarkTable {
    rows: BTreeMap<TableKey, TableCell>,
}

impl BenchmarkTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, key: TableKey, cell: TableCell) {
        self.rows.insert(key, cell);
    }

    pub fn merge(&mut self, other: BenchmarkTable) {
        self.rows.extend(other.rows);
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&TableKey, &TableCell)> {
        self.rows.iter()
    }

    pub fn get(&self, key: &TableKey) -> Option<&TableCell> {
        self.rows.get(key)
    }
}

fn group_thousands(v: f64) -> String {
    let rounded = v.round() as i64;
    let digits = rounded.abs().to_string();
    let mut grouped = String::new();
    for (i, c) in digits.chars().enumerate() {
        if i > 0 && (digits.len() - i) % 3 == 0 {
            grouped.push(',');
        }
        grouped.push(c);
    }
    if rounded < 0 {
        format!("-{grouped}")
    } else {
        grouped
    }
}

/// Renders the two-panel text table: (a) mESS/iter to 3 decimals and
/// (b) mESS/s as grouped integers, one row per (scenario, n, k), one column
/// per algorithm, `--` for missing cells.
pub fn render_table(table: &BenchmarkTable) -> Result<String> {
    if table.is_empty() {
        return Err(Error::EmptyInput("benchmark table has no rows".into()));
    }
    let mut groups: BTreeMap<(String, usize, usize), [Option<TableCell>; 4]> = BTreeMap::new();
    for (key, cell) in table.iter() {
        let entry = groups
            .entry((key.scenario.clone(), key.n, key.k))
            .or_insert([None; 4]);
        let col = Algorithm::all()
            .iter()
            .position(|a| *a == key.algorithm)
            .expect("known algorithm");
        entry[col] = Some(*cell);
    }

    let mut out = String::new();
    let widths = [18usize, 7, 4, 11, 11, 11, 11];
    let header = ["scenario", "n", "k", "ram", "da", "mda-exact", "mda-approx"];
    let rule = "-".repeat(widths.iter().sum::<usize>() + widths.len() - 1);
    for (title, fmt) in [
        ("(a) mESS/iter", 0usize),
        ("(b) mESS/s", 1usize),
    ] {
        out.push_str(title);
        out.push('\n');
        out.push_str(&rule);
        out.push('\n');
        for (i, h) in header.iter().enumerate() {
            if i > 0 {
                out.push(' ');
            }
            out.push_str(&format!("{:>width$}", h, width = widths[i]));
        }
        out.push('\n');
        for ((scenario, n, k), cells) in &groups {
            out.push_str(&format!(
                "{:>w0$} {:>w1$} {:>w2$}",
                scenario,
                n,
                k,
                w0 = widths[0],
                w1 = widths[1],
                w2 = widths[2]
            ));
            for (col, cell) in cells.iter().enumerate() {
                let text = match cell {
                    Some(c) if fmt == 0 => format!("{:.3}", c.mess_per_iter),
                    Some(c) => group_thousands(c.mess_per_sec),
                    None => "--".to_string(),
                };
                out.push_str(&format!(" {:>width$}", text, width = widths[col + 3]));
            }
            out.push('\n');
        }
        out.push('\n');
    }
    Ok(out)
}

/// Machine-readable companion for the deterministic panel: one line per
/// (scenario, n, k, algorithm) with the median mESS/iter and the completed
/// replication count.
pub fn table_csv_iter(table: &BenchmarkTable) -> String {
    let mut out = String::from("scenario,n,k,algorithm,completed,mess_per_iter\n");
    for (key, cell) in table.iter() {
        out.push_str(&format!(
            "{},{},{},{},{},{:.6}\n",
            key.scenario,
            key.n,
            key.k,
            key.algorithm.label(),
            cell.completed,
            cell.mess_per_iter
        ));
    }
    out
}

/// Timing companion (wall-clock dependent, not reproducible across runs).
pub fn table_csv_sec(table: &BenchmarkTable) -> String {
    let mut out = String::from("scenario,n,k,algorithm,completed,mess_per_sec\n");
    for (key, cell) in table.iter() {
        out.push_str(&format!(
            "{},{},{},{},{},{:.3}\n",
            key.scenario,
            key.n,
            key.k,
            key.algorithm.label(),
            cell.completed,
            cell.mess_per_sec
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::io::Write;

    fn write_csv(dir: &Path, name: &str, content: &str) -> std::path::PathBuf {
        let path = dir.join(name);
        let mut f = fs::File::create(&path).unwrap();
        f.write_all(content.as_bytes()).unwrap();
        path
    }

    #[test]
    fn ingest_builds_expected_shapes_and_column_order() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_csv(
            dir.path(),
            "toy.csv",
            "y,treat,instr,ctrl\n1.0,2.0,3.0,4.0\n2.0,5.0,6.0,7.0\n0.5,0.1,0.2,0.3\n",
        );
        let mapping = ColumnMapping {
            outcome: "y".into(),
            endogenous: vec!["treat".into()],
            instruments: vec!["instr".into()],
            exogenous: vec![],
            add_intercept: true,
        };
        let data = ingest_csv(&path, &mapping).unwrap();
        assert_eq!(data.n(), 3);
        assert_eq!(data.k(), 2);
        // column order [1, endog] / [1, instr]
        assert_eq!(data.x()[(0, 0)], 1.0);
        assert_eq!(data.x()[(0, 1)], 2.0);
        assert_eq!(data.z()[(0, 1)], 3.0);
    }

    #[test]
    fn sentinel_columns_confirm_layout() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_csv(
            dir.path(),
            "sentinel.csv",
            "y,e1,i1,c1,c2\n\
             1.0,101.0,201.0,301.0,401.0\n\
             2.0,102.0,202.0,302.0,402.0\n\
             3.0,103.0,203.0,303.5,403.0\n\
             4.0,104.5,204.0,304.0,404.0\n",
        );
        let mapping = ColumnMapping {
            outcome: "y".into(),
            endogenous: vec!["e1".into()],
            instruments: vec!["i1".into()],
            exogenous: vec!["c1".into(), "c2".into()],
            add_intercept: false,
        };
        let data = ingest_csv(&path, &mapping).unwrap();
        // X columns: [e1, c1, c2]; Z columns: [i1, c1, c2]
        assert_eq!(data.x()[(0, 0)], 101.0);
        assert_eq!(data.x()[(0, 1)], 301.0);
        assert_eq!(data.x()[(0, 2)], 401.0);
        assert_eq!(data.z()[(0, 0)], 201.0);
        assert_eq!(data.z()[(0, 1)], 301.0);
    }

    #[test]
    fn instruments_equal_endogenous_gives_z_equal_x() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_csv(
            dir.path(),
            "plain.csv",
            "y,a\n1.0,0.5\n2.0,1.5\n3.0,2.0\n",
        );
        let mapping = ColumnMapping {
            outcome: "y".into(),
            endogenous: vec!["a".into()],
            instruments: vec!["a".into()],
            exogenous: vec![],
            add_intercept: true,
        };
        let data = ingest_csv(&path, &mapping).unwrap();
        assert_eq!(data.x(), data.z());
    }

    #[test]
    fn ingest_errors_are_specific() {
        let dir = tempfile::tempdir().unwrap();
        let mapping = ColumnMapping::regression("y", &["a"], false);
        assert!(matches!(
            ingest_csv(&dir.path().join("missing.csv"), &mapping),
            Err(Error::FileNotFound(_))
        ));

        let path = write_csv(dir.path(), "bad_header.csv", "y,b\n1,2\n");
        assert!(matches!(
            ingest_csv(&path, &mapping),
            Err(Error::HeaderMismatch(name)) if name == "a"
        ));

        let path = write_csv(dir.path(), "bad_cell.csv", "y,a\n1.0,2.0\n2.0,\n3.0,4.0\n");
        match ingest_csv(&path, &mapping) {
            Err(Error::NonNumericCell { row, column, .. }) => {
                assert_eq!(row, 2);
                assert_eq!(column, "a");
            }
            other => panic!("expected NonNumericCell, got {other:?}"),
        }

        let unbalanced = ColumnMapping {
            outcome: "y".into(),
            endogenous: vec!["a".into()],
            instruments: vec![],
            exogenous: vec![],
            add_intercept: false,
        };
        let path = write_csv(dir.path(), "ok.csv", "y,a\n1,2\n2,3\n");
        assert!(ingest_csv(&path, &unbalanced).is_err());
    }

    #[test]
    fn draws_csv_round_trips_bit_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let draws = DMatrix::from_row_slice(
            2,
            2,
            &[0.1234567890123456, -1e-17, std::f64::consts::PI, 1e300],
        );
        let path = dir.path().join("draws.csv");
        write_draws_csv(&draws, &path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 3); // header + 2 rows
        let back = read_draws_csv(&path).unwrap();
        assert_eq!(back, draws);
    }

    #[test]
    fn ingest_export_ingest_is_idempotent() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_csv(
            dir.path(),
            "round.csv",
            "y,a,b\n0.25,1.5,-0.75\n1.125,2.25,0.5\n-0.5,3.0,1.25\n2.0,0.125,2.5\n",
        );
        let mapping = ColumnMapping::regression("y", &["a", "b"], false);
        let first = ingest_csv(&path, &mapping).unwrap();
        let exported = dir.path().join("export.csv");
        // export X columns alongside y and re-ingest
        let mut text = String::from("y,a,b\n");
        for i in 0..first.n() {
            text.push_str(&format!(
                "{:.16e},{:.16e},{:.16e}\n",
                first.y()[i],
                first.x()[(i, 0)],
                first.x()[(i, 1)]
            ));
        }
        fs::write(&exported, text).unwrap();
        let second = ingest_csv(&exported, &mapping).unwrap();
        assert_eq!(first.y(), second.y());
        assert_eq!(first.x(), second.x());
    }

    #[test]
    fn table_renders_both_panels_with_missing_cells() {
        let mut table = BenchmarkTable::new();
        table.insert(
            TableKey {
                scenario: "synthetic".into(),
                n: 100,
                k: 5,
                algorithm: Algorithm::MdaExact,
            },
            TableCell {
                mess_per_iter: 0.848,
                mess_per_sec: 52_321.0,
                completed: 10,
            },
        );
        table.insert(
            TableKey {
                scenario: "synthetic".into(),
                n: 100,
                k: 5,
                algorithm: Algorithm::Ram,
            },
            TableCell {
                mess_per_iter: 0.040,
                mess_per_sec: 4_405.0,
                completed: 10,
            },
        );
        let text = render_table(&table).unwrap();
        assert!(text.contains("0.848"));
        assert!(text.contains("52,321"));
        assert!(text.contains("--")); // missing da and mda-approx cells
        assert!(text.contains("(a) mESS/iter"));
        assert!(text.contains("(b) mESS/s"));
    }

    #[test]
    fn table_rows_sort_by_size_ascending() {
        let mut table = BenchmarkTable::new();
        for (n, k) in [(1000, 5), (100, 20), (100, 5)] {
            table.insert(
                TableKey {
                    scenario: "synthetic".into(),
                    n,
                    k,
                    algorithm: Algorithm::Ram,
                },
                TableCell {
                    mess_per_iter: 0.1,
                    mess_per_sec: 10.0,
                    completed: 1,
                },
            );
        }
        let csv = table_csv_iter(&table);
        let lines: Vec<&str> = csv.lines().collect();
        assert!(lines[1].starts_with("synthetic,100,5,"));
        assert!(lines[2].starts_with("synthetic,100,20,"));
        assert!(lines[3].starts_with("synthetic,1000,5,"));
    }

    #[test]
    fn empty_table_is_an_error() {
        assert!(render_table(&BenchmarkTable::new()).is_err());
    }

    #[test]
    fn grouping_thousands() {
        assert_eq!(group_thousands(52_321.4), "52,321");
        assert_eq!(group_thousands(642.0), "642");
        assert_eq!(group_thousands(1_234_567.0), "1,234,567");
    }

    #[test]
    fn results_doc_has_the_contracted_fields() {
        let dir = tempfile::tempdir().unwrap();
        let result = RunResult {
            algorithm: Algorithm::MdaApprox,
            prior: crate::prior::PriorFamily::Normal,
            n: 10,
            k: 2,
            seed: 42,
            total_draws: 100,
            retained_draws: 50,
            draws: DMatrix::zeros(50, 2),
            stage1_accepts: 80,
            stage2_accepts: 70,
            sampling_seconds: 0.5,
        };
        let mess = MessReport {
            mess: 45.0,
            mess_per_iter: 0.9,
            mess_per_sec: 90.0,
            batch_size: 7,
            p: 2,
        };
        let json_path = dir.path().join("run.json");
        let draws_path = dir.path().join("draws.csv");
        write_results(&result, &mess, &json_path, Some(&draws_path)).unwrap();
        let doc: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(&json_path).unwrap()).unwrap();
        for field in [
            "algorithm",
            "prior",
            "n",
            "k",
            "seed",
            "draws_total",
            "draws_retained",
            "accept_stage1",
            "accept_stage2",
            "sampling_seconds",
            "mess",
            "mess_per_iter",
            "mess_per_sec",
        ] {
            assert!(doc.get(field).is_some(), "missing field {field}");
        }
        assert_relative_eq!(doc["accept_stage1"].as_f64().unwrap(), 0.8);
        assert_eq!(read_draws_csv(&draws_path).unwrap().nrows(), 50);

        // without a draws path only the JSON is written
        let json_only = dir.path().join("run2.json");
        write_results(&result, &mess, &json_only, None).unwrap();
        assert!(json_only.exists());
        assert!(!dir.path().join("draws2.csv").exists());
    }
}
