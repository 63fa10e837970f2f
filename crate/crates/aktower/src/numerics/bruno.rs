//! Faà di Bruno combinatorics: the tuple index set of the higher-order
//! chain rule, the coefficient of each tuple, and their sum (a Bell number).

use rug::Integer;

use crate::error::{Error, Result};

/// Combinatorial guardrail: tuple enumeration is exponential in `n`.
pub const MAX_BRUNO_ORDER: usize = 16;

/// One multi-index (m_1, ..., m_n) with sum j*m_j = n, m_j >= 0.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BrunoTuple {
    pub n: usize,
    /// m[j-1] is the multiplicity of derivative order j.
    pub m: Vec<u32>,
}

impl BrunoTuple {
    /// m_1 + ... + m_n, the derivative order of the outer factor.
    pub fn outer_order(&self) -> usize {
        self.m.iter().map(|&x| x as usize).sum()
    }
}

/// All tuples (m_1, ..., m_n) with 1*m_1 + 2*m_2 + ... + n*m_n = n.
///
/// The count equals the number of integer partitions of n.
pub fn enumerate_bruno_tuples(n: usize) -> Result<Vec<BrunoTuple>> {
    if !(1..=MAX_BRUNO_ORDER).contains(&n) {
        return Err(Error::Bounds(format!(
            "tuple order {n} outside 1..={MAX_BRUNO_ORDER}"
        )));
    }
    let mut out = Vec::new();
    let mut m = vec![0u32; n];
    // Fill multiplicities from the largest part down.
    fn rec(j: usize, remaining: usize, m: &mut Vec<u32>, n: usize, out: &mut Vec<BrunoTuple>) {
        if j == 0 {
            debug_assert_eq!(remaining, 0);
            out.push(BrunoTuple {
                n,
                m: m.clone(),
            });
            return;
        }
        if j == 1 {
            m[0] = remaining as u32;
            out.push(BrunoTuple {
                n,
                m: m.clone(),
            });
            m[0] = 0;
            return;
        }
        for k in 0..=(remaining / j) {
            m[j - 1] = k as u32;
            rec(j - 1, remaining - k * j, m, n, out);
        }
        m[j - 1] = 0;
    }
    rec(n, n, &mut m, n, &mut out);
    Ok(out)
}

/// The coefficient n! / (prod_j m_j! * (j!)^(m_j)) of a tuple.
pub fn bruno_coefficient(t: &BrunoTuple) -> Integer {
    use rug::ops::Pow;
    let mut den = Integer::from(1);
    for (idx, &mj) in t.m.iter().enumerate() {
        if mj == 0 {
            continue;
        }
        let j = idx + 1;
        den *= Integer::from(Integer::factorial(mj));
        den *= Integer::from(Integer::factorial(j as u32)).pow(mj);
    }
    let num = Integer::from(Integer::factorial(t.n as u32));
    num / den
}

/// Sum of all tuple coefficients at order n (the n-th Bell number).
pub fn bruno_coefficient_sum(n: usize) -> Result<Integer> {
    let mut acc = Integer::from(0);
    for t in enumerate_bruno_tuples(n)? {
        acc += bruno_coefficient(&t);
    }
    Ok(acc)
}
