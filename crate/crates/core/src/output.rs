//! Deterministic text formatting for CSV and JSON artifacts.

use std::fmt::Write as _;

use crate::linalg::Mat;

/// Shortest decimal string that parses back to the same `f64`.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        ryu::Buffer::new().format_finite(x).to_string()
    } else if x.is_nan() {
        "NaN".to_string()
    } else if x > 0.0 {
        "inf".to_string()
    } else {
        "-inf".to_string()
    }
}

/// Column names `prefix_ij` (1-based) in row-major order.
pub fn matrix_columns(prefix: &str, rows: usize, cols: usize) -> Vec<String> {
    let mut names = Vec::with_capacity(rows * cols);
    for i in 1..=rows {
        for j in 1..=cols {
            names.push(format!("{prefix}_{i}{j}"));
        }
    }
    names
}

/// Row-major entries of `m`.
pub fn row_major(m: &Mat) -> impl Iterator<Item = f64> + '_ {
    (0..m.nrows()).flat_map(move |i| (0..m.ncols()).map(move |j| m[(i, j)]))
}

/// Builds CSV text from a header and numeric rows.
pub fn csv_text<I, R>(header: &[String], rows: I) -> String
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = f64>,
{
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        let mut first = true;
        for x in row {
            if !first {
                out.push(',');
            }
            first = false;
            let _ = write!(out, "{}", fmt_f64(x));
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shortest_round_trip() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 1e22, 0.0] {
            assert_eq!(fmt_f64(x).parse::<f64>().unwrap(), x);
        }
        assert_eq!(fmt_f64(0.1), "0.1");
    }

    #[test]
    fn csv_layout() {
        let m = Mat::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let header = matrix_columns("P", 2, 2);
        let text = csv_text(&header, [row_major(&m).collect::<Vec<_>>()]);
        assert_eq!(text, "P_11,P_12,P_21,P_22\n1.0,2.0,3.0,4.0\n");
    }
}
