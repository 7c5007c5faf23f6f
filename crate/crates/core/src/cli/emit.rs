//! Text output: numbers at 17 significant digits, TOML matrices in the
//! problem-file encoding, CSV tables and atomic file writes.

use std::io::Write;
use std::path::Path;

use crate::linalg::CMat;
use crate::statespace::StateSpace;

/// Shortest text that reads back to the same `f64` in every case.
pub fn num(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x:.16e}")
    }
}

pub fn toml_matrix(m: &CMat) -> String {
    let rows: Vec<String> = (0..m.nrows())
        .map(|i| {
            let cells: Vec<String> = (0..m.ncols()).map(|j| format!("[{}, {}]", num(m[(i, j)].re), num(m[(i, j)].im))).collect();
            format!("[{}]", cells.join(", "))
        })
        .collect();
    format!("[{}]", rows.join(", "))
}

/// `[name]` table with `a`, `b`, `c`, `d` keys.
pub fn toml_abcd(name: &str, sys: &StateSpace) -> String {
    format!(
        "[{name}]\na = {}\nb = {}\nc = {}\nd = {}\n",
        toml_matrix(sys.a()),
        toml_matrix(sys.b()),
        toml_matrix(sys.c()),
        toml_matrix(sys.d())
    )
}

/// Matrix as nested `[re, im]` arrays for JSON reports.
pub fn json_matrix(m: &CMat) -> serde_json::Value {
    let rows: Vec<serde_json::Value> = (0..m.nrows())
        .map(|i| serde_json::Value::Array((0..m.ncols()).map(|j| serde_json::json!([m[(i, j)].re, m[(i, j)].im])).collect()))
        .collect();
    serde_json::Value::Array(rows)
}

pub fn json_abcd(sys: &StateSpace) -> serde_json::Value {
    serde_json::json!({
        "a": json_matrix(sys.a()),
        "b": json_matrix(sys.b()),
        "c": json_matrix(sys.c()),
        "d": json_matrix(sys.d()),
    })
}

/// Writes through a temporary file in the same directory, then renames.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

/// CSV with a header row and LF line endings.
pub fn csv_bytes(header: &[&str], rows: &[Vec<String>]) -> std::io::Result<Vec<u8>> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.into_inner().map_err(|e| e.into_error())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cli::problem::{parse_result, ResultFile};
    use crate::linalg::c;

    #[test]
    fn matrix_text_round_trips_exactly() {
        let mut m = crate::linalg::zeros(2, 3);
        let vals = [0.1, -1.0 / 3.0, 1e-300, 6.02214076e23, -0.0, std::f64::consts::PI];
        for (k, v) in vals.iter().enumerate() {
            m[(k % 2, k / 2)] = c(*v, v * 7.0 / 11.0);
        }
        let sys = StateSpace::static_gain(m.clone());
        let text = format!("[youla]\nbeta = 1.0\norder = 0\nq_init = [{}]\n\n{}", toml_matrix(&m), toml_abcd("controller", &sys));
        let back: ResultFile = parse_result(&text).unwrap();
        let k = back.controller.unwrap().to_statespace("controller").unwrap();
        assert_eq!(k.d(), &m);
    }

    #[test]
    fn csv_uses_lf() {
        let b = csv_bytes(&["a", "b"], &[vec!["1".into(), "2".into()]]).unwrap();
        assert_eq!(b, b"a,b\n1,2\n");
    }
}
