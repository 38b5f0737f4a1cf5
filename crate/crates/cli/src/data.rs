//! CSV input.
//!
//! The header must contain a column `y` with integer outcomes in `0..=J`
//! and, optionally, real columns `x1, …, xk` (in any order, each once).
//! Rows are numbered from 1, not counting the header.

use std::fs::File;
use std::io::Read;
use std::path::Path;

use pitgof::Series;

use crate::CliError;

pub fn load_series(path: &Path, support_size: usize) -> Result<Series, CliError> {
    let file = File::open(path)
        .map_err(|e| CliError::parse(format!("cannot open {}: {e}", path.display())))?;
    read_series(file, support_size)
        .map_err(|e| CliError::parse(format!("{}: {}", path.display(), e.message)))
}

pub fn read_series<R: Read>(input: R, support_size: usize) -> Result<Series, CliError> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(input);
    let header = reader
        .headers()
        .map_err(|e| CliError::parse(format!("header: {e}")))?
        .clone();
    if header.is_empty() || header.iter().all(str::is_empty) {
        return Err(CliError::parse("empty file"));
    }

    let mut y_col = None;
    let mut x_cols: Vec<Option<usize>> = Vec::new();
    for (c, name) in header.iter().enumerate() {
        if name == "y" {
            if y_col.replace(c).is_some() {
                return Err(CliError::parse("column `y` appears twice"));
            }
            continue;
        }
        let index = name
            .strip_prefix('x')
            .and_then(|d| d.parse::<usize>().ok())
            .filter(|&i| i >= 1)
            .ok_or_else(|| {
                CliError::parse(format!("unexpected column `{name}`; expected y, x1..xk"))
            })?;
        if x_cols.len() < index {
            x_cols.resize(index, None);
        }
        if x_cols[index - 1].replace(c).is_some() {
            return Err(CliError::parse(format!("column `{name}` appears twice")));
        }
    }
    let y_col = y_col.ok_or_else(|| CliError::parse("no column named `y`"))?;
    let x_cols: Vec<usize> = x_cols
        .iter()
        .enumerate()
        .map(|(i, c)| c.ok_or_else(|| CliError::parse(format!("column `x{}` is missing", i + 1))))
        .collect::<Result<_, _>>()?;
    let k = x_cols.len();

    let mut y = Vec::new();
    let mut x = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| match e.kind() {
            csv::ErrorKind::UnequalLengths {
                expected_len, len, ..
            } => CliError::parse(format!("row {row}: {len} fields, expected {expected_len}")),
            _ => CliError::parse(format!("row {row}: {e}")),
        })?;
        let field = |c: usize| -> Result<&str, CliError> {
            let v = record.get(c).unwrap_or("");
            if v.is_empty() {
                Err(CliError::parse(format!(
                    "row {row}, column `{}`: missing value",
                    &header[c]
                )))
            } else {
                Ok(v)
            }
        };
        let raw = field(y_col)?;
        let value: u32 = raw.parse().map_err(|_| {
            CliError::parse(format!(
                "row {row}, column `y`: `{raw}` is not a nonnegative integer"
            ))
        })?;
        if value as usize > support_size {
            return Err(CliError::parse(format!(
                "row {row}, column `y`: value {value} outside 0..={support_size}"
            )));
        }
        y.push(value);
        for (j, &c) in x_cols.iter().enumerate() {
            let raw = field(c)?;
            let v: f64 = raw
                .parse()
                .ok()
                .filter(|v: &f64| v.is_finite())
                .ok_or_else(|| {
                    CliError::parse(format!(
                        "row {row}, column `x{}`: `{raw}` is not a finite number",
                        j + 1
                    ))
                })?;
            x.push(v);
        }
    }
    if y.is_empty() {
        return Err(CliError::parse("no data rows"));
    }
    Series::new(y, x, k).map_err(|e| CliError::parse(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn read(s: &str, j: usize) -> Result<Series, CliError> {
        read_series(s.as_bytes(), j)
    }

    #[test]
    fn three_rows() {
        let s = read("y,x1\n0,0.1\n1,-0.2\n1,0.3\n", 1).unwrap();
        assert_eq!(s.len(), 3);
        assert_eq!(s.n_regressors, 1);
        assert_eq!(s.y, vec![0, 1, 1]);
        assert_eq!(s.x, vec![0.1, -0.2, 0.3]);
    }

    #[test]
    fn columns_in_any_order() {
        let s = read("x2,y,x1\n5,1,3\n6,0,4\n", 1).unwrap();
        assert_eq!(s.x, vec![3.0, 5.0, 4.0, 6.0]);
    }

    #[test]
    fn out_of_range_outcome() {
        let e = read("y,x1\n2,0.5\n", 1).unwrap_err();
        assert!(e.message.contains("row 1"), "{}", e.message);
        assert_eq!(e.code, crate::ExitCode::Parse);
    }

    #[test]
    fn malformed_inputs() {
        assert!(read("", 1).is_err());
        assert!(read("y\n", 1).unwrap_err().message.contains("no data"));
        let e = read("y,x1\n0,0.1\n1\n", 1).unwrap_err();
        assert!(e.message.contains("row 2"), "{}", e.message);
        let e = read("y,x1\n0.5,0.1\n", 1).unwrap_err();
        assert!(e.message.contains("column `y`"), "{}", e.message);
        let e = read("y,x1\n0,\n", 1).unwrap_err();
        assert!(
            e.message.contains("column `x1`") && e.message.contains("missing"),
            "{}",
            e.message
        );
        let e = read("y,x2\n0,1\n", 1).unwrap_err();
        assert!(e.message.contains("x1"), "{}", e.message);
        assert!(read("y,z\n0,1\n", 1).is_err());
        assert!(read("x1\n0.3\n", 1).is_err());
        assert!(read("y,x1\n0,nan\n", 1).is_err());
    }
}
