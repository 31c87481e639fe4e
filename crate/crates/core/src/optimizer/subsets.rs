use crate::error::{Error, Result};

/// Largest classifier count accepted by [`enumerate_subsets`].
pub const MAX_ENUMERATION_N: usize = 30;

/// Lexicographic iterator over the K-subsets of `0..n`, yielded as sorted
/// index lists.
#[derive(Debug, Clone)]
pub struct Subsets {
    n: usize,
    current: Option<Vec<usize>>,
}

impl Iterator for Subsets {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        let out = self.current.clone()?;
        let k = out.len();
        let mut next = out.clone();
        // Rightmost position that can still be incremented.
        let pos = (0..k).rev().find(|&p| next[p] < self.n - k + p);
        self.current = pos.map(|p| {
            next[p] += 1;
            for q in p + 1..k {
                next[q] = next[q - 1] + 1;
            }
            next
        });
        Some(out)
    }
}

/// All C(n, k) subsets of `0..n` exactly once, in lexicographic order.
pub fn enumerate_subsets(n: usize, k: usize) -> Result<Subsets> {
    if k == 0 || k > n || n > MAX_ENUMERATION_N {
        return Err(Error::InvalidEnsembleSize { n, k });
    }
    Ok(Subsets { n, current: Some((0..k).collect()) })
}

/// C(n, k) without overflow for the sizes accepted above.
pub fn binomial(n: usize, k: usize) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k) as u64;
    (0..k).fold(1u64, |acc, i| acc * (n as u64 - i) / (i + 1))
}
