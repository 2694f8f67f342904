//! MacKay's alist format for sparse binary matrices.
//!
//! ```text
//! n m
//! max_col_degree max_row_degree
//! <n column degrees>
//! <m row degrees>
//! <n lines: 1-based check indices of each column, zero padding allowed>
//! <m lines: 1-based variable indices of each row, zero padding allowed>
//! ```
//!
//! Blank lines are skipped; line numbers in errors refer to the input text.

use super::{CodeError, Gf2Matrix};

struct Lines<'a> {
    inner: std::iter::Peekable<Box<dyn Iterator<Item = (usize, &'a str)> + 'a>>,
    last_line: usize,
}

impl<'a> Lines<'a> {
    fn new(text: &'a str) -> Self {
        let it: Box<dyn Iterator<Item = (usize, &'a str)>> = Box::new(
            text.lines()
                .enumerate()
                .map(|(i, l)| (i + 1, l.trim()))
                .filter(|(_, l)| !l.is_empty()),
        );
        Self {
            inner: it.peekable(),
            last_line: 0,
        }
    }

    fn next_numbers(&mut self, what: &str) -> Result<(usize, Vec<usize>), CodeError> {
        let Some((line, text)) = self.inner.next() else {
            return Err(CodeError::ParseError {
                line: self.last_line + 1,
                message: format!("unexpected end of input, expected {what}"),
            });
        };
        self.last_line = line;
        let nums = text
            .split_whitespace()
            .map(|tok| {
                tok.parse::<usize>().map_err(|_| CodeError::ParseError {
                    line,
                    message: format!("invalid integer {tok:?} in {what}"),
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok((line, nums))
    }

    fn expect_len(&mut self, what: &str, len: usize) -> Result<(usize, Vec<usize>), CodeError> {
        let (line, nums) = self.next_numbers(what)?;
        if nums.len() != len {
            return Err(CodeError::ParseError {
                line,
                message: format!("{what}: expected {len} values, found {}", nums.len()),
            });
        }
        Ok((line, nums))
    }
}

/// Parses an alist description of a parity-check matrix.
pub fn alist_read(text: &str) -> Result<Gf2Matrix, CodeError> {
    let mut lines = Lines::new(text);
    let (line, dims) = lines.expect_len("header \"n m\"", 2)?;
    let (n, m) = (dims[0], dims[1]);
    if n == 0 || m == 0 {
        return Err(CodeError::ParseError {
            line,
            message: "matrix dimensions must be positive".into(),
        });
    }
    let (_, maxes) = lines.expect_len("maximum degrees", 2)?;
    let (max_col, max_row) = (maxes[0], maxes[1]);
    let (_, col_deg) = lines.expect_len("column degrees", n)?;
    let (_, row_deg) = lines.expect_len("row degrees", m)?;

    if col_deg.iter().copied().max().unwrap_or(0) != max_col {
        return Err(CodeError::DegreeMismatch(format!(
            "declared max column degree {max_col} disagrees with column degrees"
        )));
    }
    if row_deg.iter().copied().max().unwrap_or(0) != max_row {
        return Err(CodeError::DegreeMismatch(format!(
            "declared max row degree {max_row} disagrees with row degrees"
        )));
    }

    let mut from_cols = Gf2Matrix::zeros(m, n);
    for (i, &deg) in col_deg.iter().enumerate() {
        let (line, entries) = lines.next_numbers("column neighbour list")?;
        let nz = parse_neighbours(line, &entries, max_col, m)?;
        if nz.len() != deg {
            return Err(CodeError::DegreeMismatch(format!(
                "column {} lists {} checks but declares degree {deg} (line {line})",
                i + 1,
                nz.len()
            )));
        }
        for j in nz {
            if from_cols.get(j, i) {
                return Err(CodeError::ParseError {
                    line,
                    message: format!("check {} repeated", j + 1),
                });
            }
            from_cols.set(j, i, true);
        }
    }
    let mut from_rows = Gf2Matrix::zeros(m, n);
    for (j, &deg) in row_deg.iter().enumerate() {
        let (line, entries) = lines.next_numbers("row neighbour list")?;
        let nz = parse_neighbours(line, &entries, max_row, n)?;
        if nz.len() != deg {
            return Err(CodeError::DegreeMismatch(format!(
                "row {} lists {} variables but declares degree {deg} (line {line})",
                j + 1,
                nz.len()
            )));
        }
        for i in nz {
            if from_rows.get(j, i) {
                return Err(CodeError::ParseError {
                    line,
                    message: format!("variable {} repeated", i + 1),
                });
            }
            from_rows.set(j, i, true);
        }
    }
    if from_cols != from_rows {
        return Err(CodeError::ParseError {
            line: lines.last_line,
            message: "row lists and column lists describe different matrices".into(),
        });
    }
    if let Some((line, _)) = lines.inner.next() {
        return Err(CodeError::ParseError {
            line,
            message: "trailing data after row lists".into(),
        });
    }
    Ok(from_cols)
}

fn parse_neighbours(
    line: usize,
    entries: &[usize],
    max_deg: usize,
    bound: usize,
) -> Result<Vec<usize>, CodeError> {
    if entries.len() > max_deg.max(1) {
        return Err(CodeError::ParseError {
            line,
            message: format!(
                "{} entries exceed the maximum degree {max_deg}",
                entries.len()
            ),
        });
    }
    entries
        .iter()
        .filter(|&&e| e != 0)
        .map(|&e| {
            if e > bound {
                Err(CodeError::ParseError {
                    line,
                    message: format!("index {e} out of range 1..={bound}"),
                })
            } else {
                Ok(e - 1)
            }
        })
        .collect()
}

/// Canonical alist text: single spaces, no zero padding, trailing newline.
pub fn alist_write(h: &Gf2Matrix) -> String {
    let (m, n) = (h.rows(), h.cols());
    let col_lists: Vec<Vec<usize>> = (0..n)
        .map(|i| (0..m).filter(|&j| h.get(j, i)).collect())
        .collect();
    let row_lists: Vec<Vec<usize>> = (0..m).map(|j| h.row_ones(j).collect()).collect();
    let join = |xs: &mut dyn Iterator<Item = usize>| {
        xs.map(|x| x.to_string()).collect::<Vec<_>>().join(" ")
    };

    let mut out = String::new();
    out.push_str(&format!("{n} {m}\n"));
    let max_col = col_lists.iter().map(Vec::len).max().unwrap_or(0);
    let max_row = row_lists.iter().map(Vec::len).max().unwrap_or(0);
    out.push_str(&format!("{max_col} {max_row}\n"));
    out.push_str(&join(&mut col_lists.iter().map(Vec::len)));
    out.push('\n');
    out.push_str(&join(&mut row_lists.iter().map(Vec::len)));
    out.push('\n');
    for list in col_lists.iter().chain(&row_lists) {
        out.push_str(&join(&mut list.iter().map(|x| x + 1)));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codes::ldpc_regular_construct;

    const SPC3: &str = "3 1\n1 3\n1 1 1\n3\n1\n1\n1\n1 2 3\n";

    #[test]
    fn tiny_matrix_roundtrip() {
        let h = alist_read(SPC3).unwrap();
        assert_eq!(h.to_rows(), vec![vec![1, 1, 1]]);
        assert_eq!(alist_write(&h), SPC3);
    }

    #[test]
    fn zero_padding_and_whitespace_are_canonicalised() {
        let padded = "  4 2\n\n2 3\n1 2 1 1\n3 2\n1 0\n1 2\n2 0\n1 0\n1 2 4\n2 3 0\n";
        let h = alist_read(padded).unwrap();
        assert_eq!(h.to_rows(), vec![vec![1, 1, 0, 1], vec![0, 1, 1, 0]]);
        let canon = alist_write(&h);
        assert_eq!(alist_read(&canon).unwrap(), h);
        assert_eq!(alist_write(&alist_read(&canon).unwrap()), canon);
    }

    #[test]
    fn truncated_input() {
        let truncated = &SPC3[..SPC3.len() - 6];
        assert!(matches!(
            alist_read(truncated),
            Err(CodeError::ParseError { .. })
        ));
        assert!(matches!(
            alist_read(""),
            Err(CodeError::ParseError { line: 1, .. })
        ));
    }

    #[test]
    fn degree_contradiction() {
        let bad = "3 1\n1 3\n1 1 1\n2\n1\n1\n1\n1 2 3\n";
        assert!(matches!(alist_read(bad), Err(CodeError::DegreeMismatch(_))));
    }

    #[test]
    fn parse_error_reports_line() {
        let bad = "3 1\n1 3\n1 x 1\n3\n1\n1\n1\n1 2 3\n";
        assert!(matches!(
            alist_read(bad),
            Err(CodeError::ParseError { line: 3, .. })
        ));
        let inconsistent = "3 1\n1 3\n1 1 1\n3\n1\n1\n1\n1 2 2\n";
        assert!(alist_read(inconsistent).is_err());
    }

    #[test]
    fn random_regular_matrices_roundtrip() {
        for seed in 0..20 {
            let code = ldpc_regular_construct(24, 3, 6, seed).unwrap();
            let text = alist_write(code.parity());
            assert_eq!(&alist_read(&text).unwrap(), code.parity());
        }
    }
}
