//! Binary linear block codes: GF(2) algebra, code constructions, encoding,
//! syndromes and alist I/O.

mod alist;
mod bch;
mod gf2;
mod ldpc;
mod poly;

pub use alist::{alist_read, alist_write};
pub use bch::{
    bch_construct, bch_generator_polynomial, primitive_polynomial, PRIMITIVE_POLYNOMIALS,
};
pub use gf2::{row_reduce_gf2, Gf2Matrix, RowReduction};
pub use ldpc::ldpc_regular_construct;
pub use poly::Gf2Poly;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CodeError {
    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("matrix must have at least one row and one column")]
    EmptyMatrix,
    #[error("entry {0} is not a bit")]
    NotBinary(u8),
    #[error("parity-check matrix has rank {rank} but {rows} rows")]
    RankDeficient { rank: usize, rows: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("construction failed after {attempts} attempts")]
    ConstructionFailed { attempts: usize },
    #[error("alist parse error on line {line}: {message}")]
    ParseError { line: usize, message: String },
    #[error("alist degree mismatch: {0}")]
    DegreeMismatch(String),
    #[error("inconsistent code: {0}")]
    Inconsistent(String),
}

/// A binary linear block code `C(n, k)`.
///
/// `parity` keeps every row it was built from, so a rank-deficient
/// parity-check matrix has more than `n - k` rows; its rank is always
/// `n - k`. Decoders use `parity` as-is for the Tanner graph.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Code {
    pub name: String,
    n: usize,
    k: usize,
    generator: Gf2Matrix,
    parity: Gf2Matrix,
}

impl Code {
    /// Validates `G·Hᵀ = 0` and the rank conditions.
    pub fn new(
        name: impl Into<String>,
        generator: Gf2Matrix,
        parity: Gf2Matrix,
    ) -> Result<Self, CodeError> {
        let n = parity.cols();
        if generator.cols() != n {
            return Err(CodeError::LengthMismatch {
                expected: n,
                actual: generator.cols(),
            });
        }
        let k = generator.rows();
        let gh = generator.mul(&parity.transpose())?;
        if !gh.is_zero() {
            return Err(CodeError::Inconsistent("G·Hᵀ ≠ 0".into()));
        }
        if generator.rank() != k {
            return Err(CodeError::Inconsistent(
                "generator rows are dependent".into(),
            ));
        }
        let rank_h = parity.rank();
        if rank_h != n - k {
            return Err(CodeError::Inconsistent(format!(
                "rank(H) = {rank_h} but n - k = {}",
                n - k
            )));
        }
        Ok(Self {
            name: name.into(),
            n,
            k,
            generator,
            parity,
        })
    }

    /// Builds the code from a parity-check matrix, tolerating dependent
    /// rows (`k = n − rank(H)`).
    pub fn from_parity(name: impl Into<String>, parity: Gf2Matrix) -> Result<Self, CodeError> {
        let (g, _, _) = gf2::null_space(&parity);
        let g = g.ok_or_else(|| CodeError::InvalidParameter("code has dimension 0".into()))?;
        Self::new(name, g, parity)
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn generator(&self) -> &Gf2Matrix {
        &self.generator
    }

    pub fn parity(&self) -> &Gf2Matrix {
        &self.parity
    }

    /// `c = b·G`.
    pub fn encode(&self, message: &[u8]) -> Result<Vec<u8>, CodeError> {
        if message.len() != self.k {
            return Err(CodeError::LengthMismatch {
                expected: self.k,
                actual: message.len(),
            });
        }
        self.generator.vec_mul(message)
    }

    /// `s = H·cᵀ`; one entry per row of `parity`.
    pub fn syndrome(&self, word: &[u8]) -> Result<Vec<u8>, CodeError> {
        if word.len() != self.n {
            return Err(CodeError::LengthMismatch {
                expected: self.n,
                actual: word.len(),
            });
        }
        self.parity.mul_vec(word)
    }

    pub fn is_codeword(&self, word: &[u8]) -> Result<bool, CodeError> {
        Ok(self.syndrome(word)?.iter().all(|&b| b == 0))
    }
}

/// Systematic generator matrix for a full-rank parity-check matrix.
///
/// Returns `G` in the column order of `h` and a permutation `perm` such that
/// `G` restricted to columns `perm[0..k]` is the identity (so `G[:, perm]`
/// is `[I_k | P]`). `perm` is the identity when the last `n − k` columns of
/// `h` are invertible.
pub fn generator_from_parity(h: &Gf2Matrix) -> Result<(Gf2Matrix, Vec<usize>), CodeError> {
    let (g, perm, rank) = gf2::null_space(h);
    if rank < h.rows() {
        return Err(CodeError::RankDeficient {
            rank,
            rows: h.rows(),
        });
    }
    let g = g.ok_or_else(|| CodeError::InvalidParameter("code has dimension 0".into()))?;
    Ok((g, perm))
}

#[cfg(test)]
pub(crate) fn hamming74() -> Gf2Matrix {
    Gf2Matrix::from_rows(&[
        [1u8, 0, 0, 1, 1, 0, 1],
        [0, 1, 0, 1, 0, 1, 1],
        [0, 0, 1, 0, 1, 1, 1],
    ])
    .unwrap()
}
