use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use crate::error::Error;
use crate::tensor::{SparseBuilder, SparseMatrix};

/// Radius of the candidate neighbourhood used by structure learning.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HopLimit {
    Hops(usize),
    /// Every pair of nodes is a candidate.
    Unlimited,
}

impl Default for HopLimit {
    fn default() -> Self {
        HopLimit::Hops(2)
    }
}

impl FromStr for HopLimit {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.eq_ignore_ascii_case("unlimited") {
            return Ok(HopLimit::Unlimited);
        }
        match s.parse::<usize>() {
            Ok(h) if h >= 1 => Ok(HopLimit::Hops(h)),
            _ => Err(Error::Config(format!(
                "hop limit must be a positive integer or `unlimited`, got `{s}`"
            ))),
        }
    }
}

impl fmt::Display for HopLimit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HopLimit::Hops(h) => write!(f, "{h}"),
            HopLimit::Unlimited => f.write_str("unlimited"),
        }
    }
}

/// Boolean mask (stored value 1) of node pairs within `limit` hops along
/// stored entries of `structure`. The diagonal is always included.
/// Distances follow stored direction `p → q`, so an asymmetric learned
/// structure yields an asymmetric mask.
pub fn hop_neighborhood(structure: &SparseMatrix, limit: HopLimit) -> SparseMatrix {
    let n = structure.rows();
    let mut b = SparseBuilder::new(n, n);
    match limit {
        HopLimit::Unlimited => {
            for p in 0..n {
                for q in 0..n {
                    b.set(p, q, 1.0).expect("in range");
                }
            }
        }
        HopLimit::Hops(h) => {
            let mut dist = vec![usize::MAX; n];
            let mut queue = VecDeque::new();
            let mut seen = Vec::new();
            for src in 0..n {
                dist[src] = 0;
                seen.push(src);
                queue.push_back(src);
                while let Some(u) = queue.pop_front() {
                    b.set(src, u, 1.0).expect("in range");
                    if dist[u] == h {
                        continue;
                    }
                    for &v in structure.row(u).0 {
                        if dist[v] == usize::MAX {
                            dist[v] = dist[u] + 1;
                            seen.push(v);
                            queue.push_back(v);
                        }
                    }
                }
                for v in seen.drain(..) {
                    dist[v] = usize::MAX;
                }
            }
        }
    }
    b.build()
}
