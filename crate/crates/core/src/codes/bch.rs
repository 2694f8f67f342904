//! Narrow-sense primitive binary BCH codes.

use std::collections::BTreeSet;

use super::{Code, CodeError, Gf2Matrix, Gf2Poly};

/// Primitive polynomial used to build GF(2^m), indexed by `m`, as a bit mask
/// with bit `i` holding the coefficient of `x^i`.
///
/// | m  | polynomial               |
/// |----|--------------------------|
/// | 2  | x^2 + x + 1              |
/// | 3  | x^3 + x + 1              |
/// | 4  | x^4 + x + 1              |
/// | 5  | x^5 + x^2 + 1            |
/// | 6  | x^6 + x + 1              |
/// | 7  | x^7 + x^3 + 1            |
/// | 8  | x^8 + x^4 + x^3 + x^2 + 1|
/// | 9  | x^9 + x^4 + 1            |
/// | 10 | x^10 + x^3 + 1           |
pub const PRIMITIVE_POLYNOMIALS: [(u32, u32); 9] = [
    (2, 0b111),
    (3, 0b1011),
    (4, 0b1_0011),
    (5, 0b10_0101),
    (6, 0b100_0011),
    (7, 0b1000_1001),
    (8, 0b1_0001_1101),
    (9, 0b10_0001_0001),
    (10, 0b100_0000_1001),
];

pub fn primitive_polynomial(m: u32) -> Option<u32> {
    PRIMITIVE_POLYNOMIALS
        .iter()
        .find(|(deg, _)| *deg == m)
        .map(|&(_, p)| p)
}

/// Log/antilog tables for GF(2^m).
struct GaloisField {
    order: usize,
    exp: Vec<u16>,
    log: Vec<u16>,
}

impl GaloisField {
    fn new(m: u32) -> Self {
        let prim = primitive_polynomial(m).expect("unsupported field degree");
        let order = (1usize << m) - 1;
        let mut exp = vec![0u16; 2 * order];
        let mut log = vec![0u16; order + 1];
        let mut x: u32 = 1;
        for i in 0..order {
            exp[i] = x as u16;
            log[x as usize] = i as u16;
            x <<= 1;
            if x & (1 << m) != 0 {
                x ^= prim;
            }
        }
        for i in order..2 * order {
            exp[i] = exp[i - order];
        }
        Self { order, exp, log }
    }

    fn mul(&self, a: u16, b: u16) -> u16 {
        if a == 0 || b == 0 {
            return 0;
        }
        self.exp[self.log[a as usize] as usize + self.log[b as usize] as usize]
    }

    fn alpha_pow(&self, e: usize) -> u16 {
        self.exp[e % self.order]
    }
}

/// Cyclotomic coset of `e` modulo `n` under multiplication by 2.
fn cyclotomic_coset(e: usize, n: usize) -> BTreeSet<usize> {
    let mut coset = BTreeSet::new();
    let mut x = e % n;
    while coset.insert(x) {
        x = (2 * x) % n;
    }
    coset
}

/// Generator polynomial: the product of `(x + α^e)` over the union of the
/// cyclotomic cosets of `1..delta`.
fn generator_polynomial(field: &GaloisField, delta: usize) -> Result<Gf2Poly, CodeError> {
    let n = field.order;
    let roots: BTreeSet<usize> = (1..delta).flat_map(|e| cyclotomic_coset(e, n)).collect();
    // Coefficients in GF(2^m), lowest degree first.
    let mut g: Vec<u16> = vec![1];
    for &e in &roots {
        let root = field.alpha_pow(e);
        let mut next = vec![0u16; g.len() + 1];
        for (i, &c) in g.iter().enumerate() {
            next[i + 1] ^= c;
            next[i] ^= field.mul(c, root);
        }
        g = next;
    }
    if g.iter().any(|&c| c > 1) {
        return Err(CodeError::Inconsistent(
            "generator polynomial has coefficients outside GF(2)".into(),
        ));
    }
    Ok(Gf2Poly::from_coeffs(
        g.into_iter().map(|c| c as u8).collect::<Vec<_>>(),
    ))
}

/// Builds the `(2^m − 1, k)` BCH code of designed distance `delta`.
///
/// Codewords are laid out with the `n − k` parity bits first and the
/// message in the last `k` positions: row `i` of `G` is
/// `x^{n−k+i} + (x^{n−k+i} mod g)`, and `H = [I | Rᵀ]` where `R` stacks
/// the remainders.
pub fn bch_construct(m: u32, delta: usize) -> Result<Code, CodeError> {
    if !(2..=10).contains(&m) {
        return Err(CodeError::InvalidParameter(format!(
            "field degree m = {m} outside 2..=10"
        )));
    }
    let n = (1usize << m) - 1;
    if delta % 2 == 0 || delta < 3 || delta >= n {
        return Err(CodeError::InvalidParameter(format!(
            "designed distance {delta} must be odd with 3 <= delta < {n}"
        )));
    }
    let field = GaloisField::new(m);
    let g = generator_polynomial(&field, delta)?;
    let r = g.degree().expect("generator is nonzero");
    if r >= n {
        return Err(CodeError::InvalidParameter(format!(
            "designed distance {delta} leaves no message bits"
        )));
    }
    let k = n - r;

    let mut gen = Gf2Matrix::zeros(k, n);
    let mut par = Gf2Matrix::zeros(r, n);
    for j in 0..r {
        par.set(j, j, true);
    }
    for i in 0..k {
        let rem = Gf2Poly::monomial(r + i).rem(&g);
        gen.set(i, r + i, true);
        for j in 0..r {
            if rem.coeff(j) == 1 {
                gen.set(i, j, true);
                par.set(j, r + i, true);
            }
        }
    }
    Code::new(format!("bch({n},{k})"), gen, par)
}

/// Generator polynomial `g(x)` of the code built by [`bch_construct`].
///
/// Panics on parameters `bch_construct` would reject.
pub fn bch_generator_polynomial(m: u32, delta: usize) -> Gf2Poly {
    generator_polynomial(&GaloisField::new(m), delta).expect("valid BCH parameters")
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Coset sizes enumerated independently by brute force.
    fn coset_degree_sum(n: usize, delta: usize) -> usize {
        let mut seen = vec![false; n];
        let mut total = 0;
        for e in 1..delta {
            if seen[e] {
                continue;
            }
            let mut x = e;
            loop {
                seen[x] = true;
                total += 1;
                x = x * 2 % n;
                if x == e {
                    break;
                }
            }
        }
        total
    }

    #[test]
    fn length_63_dimensions() {
        assert_eq!(coset_degree_sum(63, 5), 12);
        for (delta, k) in [(5, 51), (7, 45), (11, 36)] {
            let code = bch_construct(6, delta).unwrap();
            assert_eq!((code.n(), code.k()), (63, k));
            assert_eq!(63 - k, coset_degree_sum(63, delta));
        }
    }

    #[test]
    fn hamming_from_bch() {
        let code = bch_construct(3, 3).unwrap();
        assert_eq!((code.n(), code.k()), (7, 4));
        assert_eq!(code.parity().rows(), 3);
    }

    #[test]
    fn generator_divides_x_n_minus_1() {
        for (m, delta) in [(3, 3), (4, 5), (5, 7), (6, 5), (6, 7), (6, 11), (7, 9)] {
            let n = (1usize << m) - 1;
            let g = bch_generator_polynomial(m, delta);
            let xn1 = Gf2Poly::monomial(n).add(&Gf2Poly::one());
            assert!(xn1.rem(&g).is_zero(), "m={m} delta={delta}");
            let code = bch_construct(m, delta).unwrap();
            assert_eq!(g.degree().unwrap(), n - code.k());
        }
    }

    #[test]
    fn field_tables_cycle() {
        let f = GaloisField::new(6);
        assert_eq!(f.alpha_pow(0), 1);
        assert_eq!(f.alpha_pow(63), 1);
        let distinct: BTreeSet<u16> = (0..63).map(|e| f.alpha_pow(e)).collect();
        assert_eq!(distinct.len(), 63);
    }

    #[test]
    fn invalid_parameters() {
        assert!(bch_construct(1, 3).is_err());
        assert!(bch_construct(11, 3).is_err());
        assert!(bch_construct(6, 4).is_err());
        assert!(bch_construct(6, 1).is_err());
        assert!(bch_construct(6, 63).is_err());
    }
}
