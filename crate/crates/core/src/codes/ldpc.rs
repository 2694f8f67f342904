use super::{Code, CodeError, Gf2Matrix};
use crate::channel::derive_stream;

const MAX_ATTEMPTS: u64 = 100_000;

/// Random `(wc, wr)`-regular LDPC code.
///
/// Each variable owns `wc` edge sockets and each check `wr`. A seeded
/// Fisher–Yates shuffle assigns check sockets to variable sockets. Any
/// draw that connects a variable to the same check twice is thrown away and
/// the whole permutation is re-drawn, up to a bounded number of attempts.
/// Attempt `a` uses stream `derive_stream(seed, [a])`.
///
/// The resulting `H` may be rank deficient; `k = n − rank(H)`.
pub fn ldpc_regular_construct(
    n: usize,
    wc: usize,
    wr: usize,
    seed: u64,
) -> Result<Code, CodeError> {
    if n == 0 || wc == 0 || wr == 0 {
        return Err(CodeError::InvalidParameter(
            "n, wc and wr must be positive".into(),
        ));
    }
    if (n * wc) % wr != 0 {
        return Err(CodeError::InvalidParameter(format!(
            "n·wc = {} is not divisible by wr = {wr}",
            n * wc
        )));
    }
    let m = n * wc / wr;
    if m >= n {
        return Err(CodeError::InvalidParameter(format!(
            "{m} checks for {n} variables leaves no message bits"
        )));
    }
    if wr > n || wc > m {
        return Err(CodeError::InvalidParameter(
            "degrees exceed the number of distinct neighbours".into(),
        ));
    }

    let sockets = n * wc;
    // Socket s on the check side belongs to check s / wr.
    let mut assignment: Vec<usize> = (0..sockets).collect();
    for attempt in 0..MAX_ATTEMPTS {
        let mut rng = derive_stream(seed, &[attempt]);
        for (i, a) in assignment.iter_mut().enumerate() {
            *a = i;
        }
        rng.shuffle(&mut assignment);

        let mut h = Gf2Matrix::zeros(m, n);
        let mut collision = false;
        'fill: for v in 0..n {
            for s in v * wc..(v + 1) * wc {
                let chk = assignment[s] / wr;
                if h.get(chk, v) {
                    collision = true;
                    break 'fill;
                }
                h.set(chk, v, true);
            }
        }
        if collision {
            continue;
        }
        let name = format!("ldpc({n},{wc},{wr};seed={seed})");
        return Code::from_parity(name, h);
    }
    Err(CodeError::ConstructionFailed {
        attempts: MAX_ATTEMPTS as usize,
    })
}
