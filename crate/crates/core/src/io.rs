//! File formats: posterior draws (CSV with a header of parameter names,
//! `#` comment lines allowed), hypotheses (JSON), return series, regression
//! data and latent paths.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linreg::RegressionData;
use crate::teststat::{DrawMatrix, RestrictionSpec};

fn parse_err(line: usize, column: usize, message: impl Into<String>) -> Error {
    Error::Parse { line, column, message: message.into() }
}

/// Rectangular numeric CSV with a header row. Line numbers in errors are
/// 1-based physical lines of the input.
fn read_numeric_csv<R: Read>(reader: R) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(reader);
    let header_line = rdr.position().line().max(1) as usize;
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| csv_error(e, header_line))?
        .iter()
        .map(str::to_string)
        .collect();
    if header.is_empty() || header.iter().any(String::is_empty) {
        return Err(parse_err(header_line, 1, "empty header or column name"));
    }
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_error(e, 0))?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        if rec.len() != header.len() {
            return Err(parse_err(
                line,
                rec.len().min(header.len()) + 1,
                format!("expected {} fields, found {}", header.len(), rec.len()),
            ));
        }
        let mut row = Vec::with_capacity(rec.len());
        for (c, field) in rec.iter().enumerate() {
            let v: f64 = field
                .parse()
                .map_err(|_| parse_err(line, c + 1, format!("not a number: '{field}'")))?;
            if !v.is_finite() {
                return Err(parse_err(line, c + 1, format!("non-finite value '{field}'")));
            }
            row.push(v);
        }
        rows.push(row);
    }
    Ok((header, rows))
}

fn csv_error(e: csv::Error, fallback_line: usize) -> Error {
    let line = e.position().map(|p| p.line() as usize).unwrap_or(fallback_line);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => parse_err(line, 1, format!("{other:?}")),
    }
}

fn to_matrix(rows: &[Vec<f64>], ncols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), ncols, |r, c| rows[r][c])
}

fn write_csv(path: &Path, header: &[String], m: &DMatrix<f64>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{}", header.join(","))?;
    let mut line = String::new();
    for r in 0..m.nrows() {
        line.clear();
        for c in 0..m.ncols() {
            if c > 0 {
                line.push(',');
            }
            line.push_str(&m[(r, c)].to_string());
        }
        writeln!(w, "{line}")?;
    }
    w.flush()?;
    Ok(())
}

pub fn parse_draws<R: Read>(reader: R) -> Result<DrawMatrix> {
    let (names, rows) = read_numeric_csv(reader)?;
    if rows.len() < 2 {
        return Err(parse_err(0, 0, format!("need at least 2 draws, found {}", rows.len())));
    }
    DrawMatrix::new(names.clone(), to_matrix(&rows, names.len()))
}

pub fn read_draws(path: &Path) -> Result<DrawMatrix> {
    parse_draws(File::open(path)?)
}

/// Values are written in shortest round-trip form, so reading back is exact.
pub fn write_draws(path: &Path, draws: &DrawMatrix) -> Result<()> {
    write_csv(path, draws.names(), draws.draws())
}

/// Hypothesis stated against named parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum HypothesisFile {
    Point {
        params: Vec<String>,
        theta0: Vec<f64>,
    },
    Linear {
        #[serde(rename = "R")]
        r_mat: Vec<Vec<f64>>,
        #[serde(rename = "r")]
        r_vec: Vec<f64>,
        /// Parameter for each column of `R`.
        params: Vec<String>,
    },
}

impl HypothesisFile {
    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text)
            .map_err(|e| parse_err(e.line(), e.column(), e.to_string()))
    }

    /// Resolves names against the draw columns. For a linear hypothesis,
    /// columns not listed get zero coefficients.
    pub fn resolve(&self, names: &[String]) -> Result<RestrictionSpec> {
        let lookup = |p: &String| {
            names
                .iter()
                .position(|n| n == p)
                .ok_or_else(|| Error::NameMismatch(format!("parameter '{p}' not in draw file")))
        };
        match self {
            HypothesisFile::Point { params, theta0 } => {
                if params.len() != theta0.len() {
                    return Err(Error::DimensionMismatch(format!(
                        "{} params but {} theta0 values",
                        params.len(),
                        theta0.len()
                    )));
                }
                let sel = params.iter().map(lookup).collect::<Result<Vec<_>>>()?;
                let spec = RestrictionSpec::point(sel, theta0.clone());
                spec.validate(names.len())?;
                Ok(spec)
            }
            HypothesisFile::Linear { r_mat, r_vec, params } => {
                let m = r_mat.len();
                if m == 0 || r_vec.len() != m {
                    return Err(Error::DimensionMismatch(format!(
                        "R has {m} rows but r has {} entries",
                        r_vec.len()
                    )));
                }
                if let Some(row) = r_mat.iter().find(|row| row.len() != params.len()) {
                    return Err(Error::DimensionMismatch(format!(
                        "R row of length {} for {} params",
                        row.len(),
                        params.len()
                    )));
                }
                let cols = params.iter().map(lookup).collect::<Result<Vec<_>>>()?;
                let mut full = DMatrix::zeros(m, names.len());
                for (i, row) in r_mat.iter().enumerate() {
                    for (k, &c) in cols.iter().enumerate() {
                        full[(i, c)] += row[k];
                    }
                }
                let spec = RestrictionSpec::linear(full, DVector::from_vec(r_vec.clone()));
                spec.validate(names.len())?;
                Ok(spec)
            }
        }
    }
}

/// Single-column CSV with header `r`.
pub fn read_returns(path: &Path) -> Result<Vec<f64>> {
    let (header, rows) = read_numeric_csv(File::open(path)?)?;
    if header != ["r"] {
        return Err(parse_err(1, 1, format!("expected header 'r', found '{}'", header.join(","))));
    }
    Ok(rows.into_iter().map(|r| r[0]).collect())
}

pub fn write_returns(path: &Path, returns: &[f64]) -> Result<()> {
    write_csv(path, &["r".to_string()], &DMatrix::from_column_slice(returns.len(), 1, returns))
}

/// CSV with a `y` column and covariates; an intercept column is prepended.
/// Returns the data and the coefficient names (`intercept`, then covariates).
pub fn read_regression(path: &Path) -> Result<(RegressionData, Vec<String>)> {
    let (header, rows) = read_numeric_csv(File::open(path)?)?;
    let yi = header
        .iter()
        .position(|h| h == "y")
        .ok_or_else(|| Error::NameMismatch("regression file has no 'y' column".into()))?;
    let cov_idx: Vec<usize> = (0..header.len()).filter(|&i| i != yi).collect();
    let y = DVector::from_iterator(rows.len(), rows.iter().map(|r| r[yi]));
    let x = DMatrix::from_fn(rows.len(), cov_idx.len(), |r, c| rows[r][cov_idx[c]]);
    let mut names = vec!["intercept".to_string()];
    names.extend(cov_idx.iter().map(|&i| header[i].clone()));
    Ok((RegressionData::with_intercept(x, y)?, names))
}

pub fn write_regression(path: &Path, data: &RegressionData, covariate_names: &[String]) -> Result<()> {
    let d = data.dim();
    if covariate_names.len() + 1 != d {
        return Err(Error::DimensionMismatch(format!(
            "{} names for {} covariates",
            covariate_names.len(),
            d - 1
        )));
    }
    let mut header = vec!["y".to_string()];
    header.extend(covariate_names.iter().cloned());
    let m = DMatrix::from_fn(data.n(), d, |r, c| if c == 0 { data.y()[r] } else { data.x()[(r, c)] });
    write_csv(path, &header, &m)
}

/// Latent paths: header `h1..hT`, row `j` is retained draw `j`.
pub fn write_paths(path: &Path, paths: &DMatrix<f64>) -> Result<()> {
    let header: Vec<String> = (1..=paths.ncols()).map(|t| format!("h{t}")).collect();
    write_csv(path, &header, paths)
}

pub fn read_paths(path: &Path) -> Result<DMatrix<f64>> {
    let (header, rows) = read_numeric_csv(File::open(path)?)?;
    Ok(to_matrix(&rows, header.len()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_scientific_notation() {
        let text = "# exported draws\na,b\n1.5,2e-3\n# mid comment\n-3,4E2\n";
        let d = parse_draws(text.as_bytes()).unwrap();
        assert_eq!(d.names(), ["a", "b"]);
        assert_eq!(d.draws()[(0, 1)], 2e-3);
        assert_eq!(d.draws()[(1, 1)], 400.0);
    }

    #[test]
    fn reports_line_and_column() {
        let text = "a,b\n1,2\n3,x\n";
        match parse_draws(text.as_bytes()) {
            Err(Error::Parse { line, column, .. }) => assert_eq!((line, column), (3, 2)),
            other => panic!("{other:?}"),
        }
        let text = "a,b\n1,2\n3\n";
        match parse_draws(text.as_bytes()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        let text = "a,b\n1,2\n3,NaN\n";
        assert!(matches!(parse_draws(text.as_bytes()), Err(Error::Parse { .. })));
    }

    #[test]
    fn needs_two_rows() {
        assert!(matches!(parse_draws("a\n1\n".as_bytes()), Err(Error::Parse { .. })));
    }

    #[test]
    fn draws_round_trip_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.csv");
        let m = DMatrix::from_fn(5, 2, |r, c| (r as f64 + 0.1) / 3.0 * (c as f64 - 7.3e-9));
        let d = DrawMatrix::new(vec!["x".into(), "y".into()], m).unwrap();
        write_draws(&p, &d).unwrap();
        assert_eq!(read_draws(&p).unwrap(), d);
    }

    #[test]
    fn hypothesis_resolution() {
        let names: Vec<String> = ["a", "b", "c"].iter().map(|s| s.to_string()).collect();
        let h: HypothesisFile =
            serde_json::from_str(r#"{"point": {"params": ["c", "a"], "theta0": [1, 2]}}"#).unwrap();
        assert_eq!(h.resolve(&names).unwrap(), RestrictionSpec::point(vec![2, 0], vec![1.0, 2.0]));

        let h: HypothesisFile = serde_json::from_str(
            r#"{"linear": {"R": [[1, 1]], "r": [0.5], "params": ["c", "b"]}}"#,
        )
        .unwrap();
        let spec = h.resolve(&names).unwrap();
        let want = RestrictionSpec::linear(
            DMatrix::from_row_slice(1, 3, &[0.0, 1.0, 1.0]),
            DVector::from_vec(vec![0.5]),
        );
        assert_eq!(spec, want);

        let h: HypothesisFile =
            serde_json::from_str(r#"{"point": {"params": ["zz"], "theta0": [0]}}"#).unwrap();
        assert!(matches!(h.resolve(&names), Err(Error::NameMismatch(_))));
        let h: HypothesisFile =
            serde_json::from_str(r#"{"point": {"params": ["a"], "theta0": [0, 1]}}"#).unwrap();
        assert!(matches!(h.resolve(&names), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn hypothesis_json_errors_carry_position() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("h.json");
        std::fs::write(&p, "{\n  \"point\": {\"params\": [\"a\"],\n \"theta0\": [oops]}}").unwrap();
        match HypothesisFile::read(&p) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn returns_and_regression_files() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.csv");
        write_returns(&p, &[0.1, -0.2, 3e-5]).unwrap();
        assert_eq!(read_returns(&p).unwrap(), vec![0.1, -0.2, 3e-5]);
        std::fs::write(&p, "x\n1\n").unwrap();
        assert!(matches!(read_returns(&p), Err(Error::Parse { .. })));

        let q = dir.path().join("reg.csv");
        std::fs::write(&q, "x1,y,x2\n1,2,0\n2,3,1\n3,5,0\n4,4,1\n").unwrap();
        let (data, names) = read_regression(&q).unwrap();
        assert_eq!(names, ["intercept", "x1", "x2"]);
        assert_eq!(data.x().column(0).sum(), 4.0);
        assert_eq!(data.y()[2], 5.0);
    }

    #[test]
    fn paths_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("h.csv");
        let m = DMatrix::from_fn(3, 4, |r, c| -10.0 + r as f64 * 0.01 - c as f64 / 7.0);
        write_paths(&p, &m).unwrap();
        assert_eq!(read_paths(&p).unwrap(), m);
    }
}
