//! Independent partition counts: Euler's pentagonal recurrence and, for small
//! `n`, direct enumeration.

use num_bigint::BigInt;
use num_traits::Zero;

use crate::error::{Error, Result};

/// Largest `n` accepted by [`partitions_brute`].
pub const BRUTE_FORCE_LIMIT: u64 = 60;

/// `p(0), ..., p(n_max)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PartitionTable {
    values: Vec<BigInt>,
}

impl PartitionTable {
    pub fn get(&self, n: u64) -> Option<&BigInt> {
        self.values.get(n as usize)
    }

    pub fn n_max(&self) -> u64 {
        self.values.len() as u64 - 1
    }

    pub fn as_slice(&self) -> &[BigInt] {
        &self.values
    }
}

/// `p(n) = sum_{k != 0} (-1)^{k+1} p(n - k(3k-1)/2)`.
pub fn partition_pentagonal(n_max: u64) -> PartitionTable {
    let n_max = n_max as usize;
    let mut p = vec![BigInt::zero(); n_max + 1];
    p[0] = BigInt::from(1);
    for n in 1..=n_max {
        let mut acc = BigInt::zero();
        for k in 1.. {
            let g1 = k * (3 * k - 1) / 2;
            if g1 > n {
                break;
            }
            let g2 = k * (3 * k + 1) / 2;
            let odd = k % 2 == 1;
            let mut term = p[n - g1].clone();
            if g2 <= n {
                term += &p[n - g2];
            }
            if odd {
                acc += term;
            } else {
                acc -= term;
            }
        }
        p[n] = acc;
    }
    PartitionTable { values: p }
}

/// Count partitions of `n` by walking every non-increasing sequence.
pub fn partitions_brute(n: u64) -> Result<u64> {
    if n > BRUTE_FORCE_LIMIT {
        return Err(Error::TooLarge(n));
    }
    fn walk(rest: u64, max_part: u64) -> u64 {
        if rest == 0 {
            return 1;
        }
        (1..=max_part.min(rest)).map(|k| walk(rest - k, k)).sum()
    }
    Ok(walk(n, n))
}
