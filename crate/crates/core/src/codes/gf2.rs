//! Dense, bit-packed matrices over GF(2).

use std::fmt;

use super::CodeError;

const WORD: usize = 64;

/// A dense binary matrix with bit-packed rows.
///
/// Entries are addressed as `(row, col)`; the packing is an implementation
/// detail and every public accessor works entrywise.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Gf2Matrix {
    rows: usize,
    cols: usize,
    words_per_row: usize,
    bits: Vec<u64>,
}

/// Output of [`row_reduce_gf2`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RowReduction {
    pub reduced: Gf2Matrix,
    pub pivot_cols: Vec<usize>,
    pub rank: usize,
}

impl Gf2Matrix {
    /// All-zero `rows × cols` matrix.
    ///
    /// Panics if either dimension is zero.
    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(
            rows >= 1 && cols >= 1,
            "Gf2Matrix dimensions must be positive"
        );
        let words_per_row = cols.div_ceil(WORD);
        Self {
            rows,
            cols,
            words_per_row,
            bits: vec![0; rows * words_per_row],
        }
    }

    pub fn identity(size: usize) -> Self {
        let mut m = Self::zeros(size, size);
        for i in 0..size {
            m.set(i, i, true);
        }
        m
    }

    /// Builds a matrix from rows of 0/1 entries.
    pub fn from_rows<R: AsRef<[u8]>>(rows: &[R]) -> Result<Self, CodeError> {
        let cols = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        if rows.is_empty() || cols == 0 {
            return Err(CodeError::EmptyMatrix);
        }
        let mut m = Self::zeros(rows.len(), cols);
        for (r, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != cols {
                return Err(CodeError::LengthMismatch {
                    expected: cols,
                    actual: row.len(),
                });
            }
            for (c, &b) in row.iter().enumerate() {
                match b {
                    0 => {}
                    1 => m.set(r, c, true),
                    other => return Err(CodeError::NotBinary(other)),
                }
            }
        }
        Ok(m)
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> bool {
        debug_assert!(row < self.rows && col < self.cols);
        (self.bits[row * self.words_per_row + col / WORD] >> (col % WORD)) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: bool) {
        debug_assert!(row < self.rows && col < self.cols);
        let word = &mut self.bits[row * self.words_per_row + col / WORD];
        let mask = 1u64 << (col % WORD);
        if value {
            *word |= mask;
        } else {
            *word &= !mask;
        }
    }

    fn row_words(&self, row: usize) -> &[u64] {
        &self.bits[row * self.words_per_row..(row + 1) * self.words_per_row]
    }

    /// `row[dst] ^= row[src]`.
    fn xor_row_into(&mut self, src: usize, dst: usize) {
        let w = self.words_per_row;
        for k in 0..w {
            let v = self.bits[src * w + k];
            self.bits[dst * w + k] ^= v;
        }
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        let w = self.words_per_row;
        for k in 0..w {
            self.bits.swap(a * w + k, b * w + k);
        }
    }

    /// Column indices of the ones in `row`, ascending.
    pub fn row_ones(&self, row: usize) -> impl Iterator<Item = usize> + '_ {
        let cols = self.cols;
        self.row_words(row)
            .iter()
            .enumerate()
            .flat_map(|(wi, &word)| {
                let mut w = word;
                std::iter::from_fn(move || {
                    if w == 0 {
                        return None;
                    }
                    let tz = w.trailing_zeros() as usize;
                    w &= w - 1;
                    Some(wi * WORD + tz)
                })
            })
            .take_while(move |&c| c < cols)
    }

    pub fn row_weight(&self, row: usize) -> usize {
        self.row_words(row)
            .iter()
            .map(|w| w.count_ones() as usize)
            .sum()
    }

    pub fn col_weight(&self, col: usize) -> usize {
        (0..self.rows).filter(|&r| self.get(r, col)).count()
    }

    /// Total number of ones.
    pub fn weight(&self) -> usize {
        self.bits.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.bits.iter().all(|&w| w == 0)
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in self.row_ones(r) {
                t.set(c, r, true);
            }
        }
        t
    }

    /// Matrix product over GF(2).
    pub fn mul(&self, rhs: &Gf2Matrix) -> Result<Gf2Matrix, CodeError> {
        if self.cols != rhs.rows {
            return Err(CodeError::LengthMismatch {
                expected: self.cols,
                actual: rhs.rows,
            });
        }
        let mut out = Self::zeros(self.rows, rhs.cols);
        for r in 0..self.rows {
            for k in self.row_ones(r) {
                let w = out.words_per_row;
                for (dst, src) in out.bits[r * w..(r + 1) * w]
                    .iter_mut()
                    .zip(rhs.row_words(k))
                {
                    *dst ^= *src;
                }
            }
        }
        Ok(out)
    }

    /// `M · vᵀ` for a 0/1 vector of length `cols`.
    pub fn mul_vec(&self, v: &[u8]) -> Result<Vec<u8>, CodeError> {
        if v.len() != self.cols {
            return Err(CodeError::LengthMismatch {
                expected: self.cols,
                actual: v.len(),
            });
        }
        Ok((0..self.rows)
            .map(|r| self.row_ones(r).fold(0u8, |acc, c| acc ^ (v[c] & 1)))
            .collect())
    }

    /// `v · M` for a 0/1 vector of length `rows`.
    pub fn vec_mul(&self, v: &[u8]) -> Result<Vec<u8>, CodeError> {
        if v.len() != self.rows {
            return Err(CodeError::LengthMismatch {
                expected: self.rows,
                actual: v.len(),
            });
        }
        let mut acc = vec![0u64; self.words_per_row];
        for (r, &bit) in v.iter().enumerate() {
            if bit & 1 == 1 {
                for (a, w) in acc.iter_mut().zip(self.row_words(r)) {
                    *a ^= *w;
                }
            }
        }
        Ok((0..self.cols)
            .map(|c| ((acc[c / WORD] >> (c % WORD)) & 1) as u8)
            .collect())
    }

    pub fn to_rows(&self) -> Vec<Vec<u8>> {
        (0..self.rows)
            .map(|r| (0..self.cols).map(|c| self.get(r, c) as u8).collect())
            .collect()
    }

    pub fn rank(&self) -> usize {
        row_reduce_gf2(self).rank
    }

    /// Copy keeping only the listed columns, in the listed order.
    pub fn select_cols(&self, cols: &[usize]) -> Gf2Matrix {
        let mut out = Self::zeros(self.rows, cols.len());
        for r in 0..self.rows {
            for (j, &c) in cols.iter().enumerate() {
                if self.get(r, c) {
                    out.set(r, j, true);
                }
            }
        }
        out
    }
}

impl fmt::Debug for Gf2Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Gf2Matrix {}x{} [", self.rows, self.cols)?;
        for r in 0..self.rows {
            write!(f, "  ")?;
            for c in 0..self.cols {
                write!(f, "{}", self.get(r, c) as u8)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

/// Reduced row-echelon form, pivots searched left to right.
pub fn row_reduce_gf2(m: &Gf2Matrix) -> RowReduction {
    let order: Vec<usize> = (0..m.cols()).collect();
    row_reduce_in_order(m, &order)
}

/// Reduced row-echelon elimination that tries pivot columns in `col_order`.
///
/// Pivot rows are placed top-down in the order their pivot columns are
/// found; `pivot_cols[r]` is the pivot column of row `r`.
pub(crate) fn row_reduce_in_order(m: &Gf2Matrix, col_order: &[usize]) -> RowReduction {
    let mut a = m.clone();
    let mut pivot_cols = Vec::new();
    let mut next_row = 0;
    for &c in col_order {
        if next_row == a.rows() {
            break;
        }
        let Some(p) = (next_row..a.rows()).find(|&r| a.get(r, c)) else {
            continue;
        };
        a.swap_rows(p, next_row);
        for r in 0..a.rows() {
            if r != next_row && a.get(r, c) {
                a.xor_row_into(next_row, r);
            }
        }
        pivot_cols.push(c);
        next_row += 1;
    }
    RowReduction {
        rank: pivot_cols.len(),
        reduced: a,
        pivot_cols,
    }
}

/// Basis of the right null space of `h` (vectors `x` with `h·xᵀ = 0`),
/// returned as rows, together with the systematic column permutation.
///
/// Pivots are searched from the last column backwards so that when the
/// trailing `rank` columns of `h` are invertible the basis is `[I | P]`
/// and the permutation is the identity.
pub(crate) fn null_space(h: &Gf2Matrix) -> (Option<Gf2Matrix>, Vec<usize>, usize) {
    let n = h.cols();
    let order: Vec<usize> = (0..n).rev().collect();
    let red = row_reduce_in_order(h, &order);
    let mut is_pivot = vec![false; n];
    for &p in &red.pivot_cols {
        is_pivot[p] = true;
    }
    let free: Vec<usize> = (0..n).filter(|&c| !is_pivot[c]).collect();
    let mut pivots_sorted = red.pivot_cols.clone();
    pivots_sorted.sort_unstable();
    let perm: Vec<usize> = free.iter().chain(pivots_sorted.iter()).copied().collect();

    if free.is_empty() {
        return (None, perm, red.rank);
    }
    let mut g = Gf2Matrix::zeros(free.len(), n);
    for (gi, &f) in free.iter().enumerate() {
        g.set(gi, f, true);
        for (r, &p) in red.pivot_cols.iter().enumerate() {
            if red.reduced.get(r, f) {
                g.set(gi, p, true);
            }
        }
    }
    (Some(g), perm, red.rank)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: &[&[u8]]) -> Gf2Matrix {
        Gf2Matrix::from_rows(rows).unwrap()
    }

    #[test]
    fn identity_is_already_reduced() {
        let id = Gf2Matrix::identity(3);
        let red = row_reduce_gf2(&id);
        assert_eq!(red.reduced, id);
        assert_eq!(red.pivot_cols, vec![0, 1, 2]);
        assert_eq!(red.rank, 3);
    }

    #[test]
    fn zero_matrix_has_rank_zero() {
        let z = Gf2Matrix::zeros(2, 4);
        let red = row_reduce_gf2(&z);
        assert!(red.reduced.is_zero());
        assert!(red.pivot_cols.is_empty());
        assert_eq!(red.rank, 0);
    }

    #[test]
    fn hand_elimination() {
        let red = row_reduce_gf2(&m(&[&[1, 1, 0], &[1, 1, 1]]));
        assert_eq!(red.reduced, m(&[&[1, 1, 0], &[0, 0, 1]]));
        assert_eq!(red.pivot_cols, vec![0, 2]);
        assert_eq!(red.rank, 2);
    }

    #[test]
    fn row_ones_spans_word_boundary() {
        let mut a = Gf2Matrix::zeros(1, 130);
        for c in [0, 63, 64, 127, 129] {
            a.set(0, c, true);
        }
        assert_eq!(a.row_ones(0).collect::<Vec<_>>(), vec![0, 63, 64, 127, 129]);
        assert_eq!(a.row_weight(0), 5);
    }

    #[test]
    fn products_agree_with_vector_forms() {
        let a = m(&[&[1, 0, 1, 1], &[0, 1, 1, 0]]);
        let v = [1u8, 1, 0, 1];
        assert_eq!(a.mul_vec(&v).unwrap(), vec![0, 1]);
        assert_eq!(a.vec_mul(&[1, 1]).unwrap(), vec![1, 1, 0, 1]);
        let at = a.transpose();
        let prod = a.mul(&at).unwrap();
        assert_eq!(prod.to_rows(), vec![vec![1, 1], vec![1, 0]]);
    }

    #[test]
    fn rejects_non_binary_and_ragged_rows() {
        assert!(matches!(
            Gf2Matrix::from_rows(&[&[0u8, 2][..]]),
            Err(CodeError::NotBinary(2))
        ));
        assert!(Gf2Matrix::from_rows(&[&[0u8, 1][..], &[1][..]]).is_err());
        assert!(matches!(
            Gf2Matrix::from_rows::<&[u8]>(&[]),
            Err(CodeError::EmptyMatrix)
        ));
    }
}
