//! Plain-text file formats.
//!
//! Instance files:
//!
//! ```text
//! TATINST <n> <d>
//! A1
//! <n rows of d values>
//! ...
//! Y2
//! <d rows of d values>
//! ```
//!
//! Blocks appear in [`BLOCK_LABELS`] order. Matrix files are
//! `TATMAT <rows> <cols>` followed by the rows. Values are written in the
//! shortest form that parses back to the same `f64`, so a file written by
//! this module survives a parse/write cycle byte for byte.

use std::fmt::Write as _;

use crate::error::{Result, TatError};
use crate::instance::{AttnInstance, BLOCK_LABELS};
use crate::matrix::Matrix;

pub const INSTANCE_MAGIC: &str = "TATINST";
pub const MATRIX_MAGIC: &str = "TATMAT";

fn write_rows(out: &mut String, m: &Matrix) {
    for i in 0..m.rows() {
        let mut first = true;
        for x in m.row(i) {
            if !first {
                out.push(' ');
            }
            first = false;
            let _ = write!(out, "{x:?}");
        }
        out.push('\n');
    }
}

pub fn write_instance(inst: &AttnInstance) -> String {
    let mut out = format!("{INSTANCE_MAGIC} {} {}\n", inst.n, inst.d);
    for (label, m) in BLOCK_LABELS.iter().zip(inst.blocks()) {
        out.push_str(label);
        out.push('\n');
        write_rows(&mut out, m);
    }
    out
}

pub fn write_matrix(m: &Matrix) -> String {
    let mut out = format!("{MATRIX_MAGIC} {} {}\n", m.rows(), m.cols());
    write_rows(&mut out, m);
    out
}

fn err_at<T>(line: usize, msg: impl std::fmt::Display) -> Result<T> {
    Err(TatError::Validation(format!("line {line}: {msg}")))
}

/// Non-empty lines with their 1-based line numbers.
struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    last: usize,
}

impl<'a> Lines<'a> {
    fn new(text: &'a str) -> Self {
        Self {
            inner: text.lines().enumerate(),
            last: 0,
        }
    }

    fn next_line(&mut self, what: &str) -> Result<(usize, &'a str)> {
        for (i, line) in self.inner.by_ref() {
            self.last = i + 1;
            let t = line.trim();
            if !t.is_empty() {
                return Ok((i + 1, t));
            }
        }
        err_at(
            self.last + 1,
            format!("unexpected end of file, expected {what}"),
        )
    }

    fn finish(&mut self) -> Result<()> {
        for (i, line) in self.inner.by_ref() {
            if !line.trim().is_empty() {
                return err_at(i + 1, "trailing content after the last block");
            }
        }
        Ok(())
    }
}

fn parse_header(lines: &mut Lines, magic: &str) -> Result<(usize, usize)> {
    let (no, line) = lines.next_line("header")?;
    let parts: Vec<&str> = line.split_whitespace().collect();
    if parts.len() != 3 || parts[0] != magic {
        return err_at(no, format!("expected header `{magic} <rows> <cols>`"));
    }
    let parse = |s: &str| s.parse::<usize>().ok().filter(|&v| v > 0);
    match (parse(parts[1]), parse(parts[2])) {
        (Some(a), Some(b)) => Ok((a, b)),
        _ => err_at(no, "header sizes must be positive integers"),
    }
}

fn parse_rows(lines: &mut Lines, rows: usize, cols: usize, label: &str) -> Result<Matrix> {
    let mut data = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        let (no, line) = lines.next_line(&format!("row {} of {label}", r + 1))?;
        let mut count = 0;
        for tok in line.split_whitespace() {
            let v: f64 = match tok.parse() {
                Ok(v) => v,
                Err(_) => return err_at(no, format!("`{tok}` is not a number")),
            };
            if !v.is_finite() {
                return err_at(no, format!("non-finite value `{tok}` in {label}"));
            }
            data.push(v);
            count += 1;
        }
        if count != cols {
            return err_at(
                no,
                format!("{label} row has {count} values, expected {cols}"),
            );
        }
    }
    Matrix::new(rows, cols, data)
}

pub fn parse_instance(text: &str) -> Result<AttnInstance> {
    let mut lines = Lines::new(text);
    let (n, d) = parse_header(&mut lines, INSTANCE_MAGIC)?;
    let mut blocks = Vec::with_capacity(BLOCK_LABELS.len());
    for (b, label) in BLOCK_LABELS.iter().enumerate() {
        let (no, line) = lines.next_line(&format!("block label {label}"))?;
        if line != *label {
            return err_at(no, format!("expected block {label}, found `{line}`"));
        }
        let rows = if b < 6 { n } else { d };
        blocks.push(parse_rows(&mut lines, rows, d, label)?);
    }
    lines.finish()?;
    AttnInstance::from_blocks(n, d, blocks)
}

pub fn parse_matrix(text: &str) -> Result<Matrix> {
    let mut lines = Lines::new(text);
    let (rows, cols) = parse_header(&mut lines, MATRIX_MAGIC)?;
    let m = parse_rows(&mut lines, rows, cols, "matrix")?;
    lines.finish()?;
    Ok(m)
}

/// `true` when the text starts like an instance file; used for error hints.
pub fn looks_like_instance(text: &str) -> bool {
    text.trim_start().starts_with(INSTANCE_MAGIC)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn instance_round_trip_is_byte_stable() {
        let inst = AttnInstance::random(3, 2, 0.8, 11).unwrap();
        let text = write_instance(&inst);
        let back = parse_instance(&text).unwrap();
        assert_eq!(back, inst);
        assert_eq!(write_instance(&back), text);
        assert!(looks_like_instance(&text));
    }

    #[test]
    fn matrix_round_trip() {
        let m = Matrix::from_rows(&[[0.1, -2.0, 1e-300], [3.5, 7.0, -0.0]]);
        let text = write_matrix(&m);
        assert!(text.starts_with("TATMAT 2 3\n"));
        let back = parse_matrix(&text).unwrap();
        assert_eq!(write_matrix(&back), text);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let inst = AttnInstance::random(2, 1, 1.0, 0).unwrap();
        let text = write_instance(&inst);

        let swapped = text.replacen("A2", "A3", 1);
        let err = parse_instance(&swapped).unwrap_err().to_string();
        assert!(
            err.contains("line 5") && err.contains("expected block A2"),
            "{err}"
        );

        let mut lines: Vec<String> = text.lines().map(String::from).collect();
        lines[2].push_str(" 1.0");
        let err = parse_instance(&lines.join("\n")).unwrap_err().to_string();
        assert!(err.contains("line 3") && err.contains("2 values"), "{err}");

        let mut lines: Vec<String> = text.lines().map(String::from).collect();
        lines[2] = "NaN".into();
        let err = parse_instance(&lines.join("\n")).unwrap_err().to_string();
        assert!(
            err.contains("line 3") && err.contains("non-finite"),
            "{err}"
        );

        let short: Vec<&str> = text.lines().take(10).collect();
        let err = parse_instance(&short.join("\n")).unwrap_err().to_string();
        assert!(err.contains("end of file"), "{err}");

        let err = parse_instance("TATINST 0 2\n").unwrap_err().to_string();
        assert!(err.contains("line 1"), "{err}");
    }
}
