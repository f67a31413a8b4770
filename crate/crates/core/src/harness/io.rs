//! CSV and JSON artifacts.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::harness::surface::Surface;
use crate::trainer::{TraceRow, TrainTrace};

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> Error + '_ {
    move |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    }
}

/// 17 significant digits; parses back to the identical `f64`.
pub fn fmt_real(x: f64) -> String {
    format!("{x:.16e}")
}

/// Column name of the `k`-th tracked parameter: `param_a`, `param_b`, …
pub fn param_column(k: usize) -> String {
    if k < 26 {
        format!("param_{}", (b'a' + k as u8) as char)
    } else {
        format!("param_{k}")
    }
}

/// Columns: iteration, f_hat, order_v, one per tracked parameter,
/// saddle_perturbed.
pub fn write_trace_csv(path: &Path, trace: &TrainTrace) -> Result<()> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    let mut header = vec!["iteration".to_string(), "f_hat".into(), "order_v".into()];
    header.extend((0..trace.tracked.len()).map(param_column));
    header.push("saddle_perturbed".into());
    w.write_record(&header).map_err(csv_err(path))?;
    for row in &trace.rows {
        let mut rec = vec![
            row.iteration.to_string(),
            fmt_real(row.f_hat),
            fmt_real(row.order_v),
        ];
        rec.extend(row.params.iter().map(|&x| fmt_real(x)));
        rec.push(row.saddle_perturbed.to_string());
        w.write_record(&rec).map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

/// Reads rows written by [`write_trace_csv`].
pub fn read_trace_rows(path: &Path) -> Result<Vec<TraceRow>> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err(path))?;
    let width = r.headers().map_err(csv_err(path))?.len();
    if width < 4 {
        return Err(Error::Config(format!(
            "{}: trace needs at least 4 columns",
            path.display()
        )));
    }
    let bad = |what: &str, line: usize| {
        Error::Config(format!("{}: bad {what} on data row {line}", path.display()))
    };
    let mut rows = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(csv_err(path))?;
        let real = |k: usize| rec[k].parse::<f64>().map_err(|_| bad("number", line + 1));
        rows.push(TraceRow {
            iteration: rec[0].parse().map_err(|_| bad("iteration", line + 1))?,
            f_hat: real(1)?,
            order_v: real(2)?,
            params: (3..width - 1).map(real).collect::<Result<_>>()?,
            saddle_perturbed: rec[width - 1].parse().map_err(|_| bad("flag", line + 1))?,
        });
    }
    Ok(rows)
}

/// Two `#` header lines carry each axis as `name,lo,hi,steps`, followed by
/// a `a,b,mse` table in row-major order.
pub fn write_surface_csv(path: &Path, s: &Surface) -> Result<()> {
    let file = File::create(path).map_err(io_err(path))?;
    write_surface(BufWriter::new(file), s, path)
}

/// [`write_surface_csv`] into any writer; `label` names it in errors.
pub fn write_surface<W: Write>(mut out: W, s: &Surface, label: &Path) -> Result<()> {
    let path = label;
    let g = &s.grid;
    for (tag, id, r) in [
        ("param_a", g.param_a, g.range_a),
        ("param_b", g.param_b, g.range_b),
    ] {
        writeln!(
            out,
            "# {tag},{id},{},{},{}",
            fmt_real(r.lo),
            fmt_real(r.hi),
            r.steps
        )
        .map_err(io_err(path))?;
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["a", "b", "mse"]).map_err(csv_err(path))?;
    for (i, &a) in s.a.iter().enumerate() {
        for (j, &b) in s.b.iter().enumerate() {
            w.write_record([fmt_real(a), fmt_real(b), fmt_real(s.at(i, j))])
                .map_err(csv_err(path))?;
        }
    }
    w.flush().map_err(io_err(path))
}

/// Reads the `(a, b, mse)` table of a surface file.
pub fn read_surface_values(path: &Path) -> Result<Vec<[f64; 3]>> {
    let mut r = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(csv_err(path))?;
    r.deserialize::<(f64, f64, f64)>()
        .map(|x| x.map(|(a, b, m)| [a, b, m]).map_err(csv_err(path)))
        .collect()
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, value).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })?;
    writeln!(w).map_err(io_err(path))?;
    w.flush().map_err(io_err(path))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::ParamId;

    #[test]
    fn real_format_round_trips() {
        for x in [
            0.1,
            -1.0 / 3.0,
            1e-300,
            6.02214076e23,
            0.0,
            -0.0,
            f64::MIN_POSITIVE,
        ] {
            let s = fmt_real(x);
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), x.to_bits(), "{s}");
        }
    }

    #[test]
    fn trace_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        let trace = TrainTrace {
            tracked: vec![ParamId::weight(1, 1, 1), ParamId::weight(2, 1, 1)],
            rows: (0..5)
                .map(|k| TraceRow {
                    iteration: k,
                    f_hat: 0.1 / (k as f64 + 1.0),
                    order_v: 1.0 + k as f64 / 7.0,
                    params: vec![-4.0 + k as f64 / 3.0, 1e-17 * k as f64],
                    saddle_perturbed: k == 3,
                })
                .collect(),
        };
        write_trace_csv(&path, &trace).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("iteration,f_hat,order_v,param_a,param_b,saddle_perturbed\n"));
        assert_eq!(read_trace_rows(&path).unwrap(), trace.rows);
    }

    #[test]
    fn missing_file_names_path() {
        let e = read_trace_rows(Path::new("/nonexistent/trace.csv")).unwrap_err();
        assert!(e.to_string().contains("/nonexistent/trace.csv"));
    }
}
