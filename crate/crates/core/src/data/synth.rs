use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Dataset, GraphInstance};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Two-class synthetic corpora whose classes differ only in topology.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SynthKind {
    /// Class 0: a single cycle. Class 1: two cliques joined by one bridge
    /// edge.
    CyclesVsCliquePairs,
    /// Class 0: a uniformly random labelled tree. Class 1: a single cycle.
    TreesVsCycles,
}

impl FromStr for SynthKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cycles-vs-cliquepairs" => Ok(SynthKind::CyclesVsCliquePairs),
            "trees-vs-cycles" => Ok(SynthKind::TreesVsCycles),
            other => Err(Error::Config(format!("unknown synthetic kind `{other}`"))),
        }
    }
}

impl fmt::Display for SynthKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SynthKind::CyclesVsCliquePairs => "cycles-vs-cliquepairs",
            SynthKind::TreesVsCycles => "trees-vs-cycles",
        })
    }
}

fn cycle(n: usize) -> Vec<(usize, usize)> {
    (0..n).map(|i| (i, (i + 1) % n)).collect()
}

fn clique_pair(n: usize, rng: &mut ChaCha8Rng) -> Vec<(usize, usize)> {
    let a = rng.gen_range(3..=n - 3);
    let mut edges = Vec::new();
    for (lo, hi) in [(0, a), (a, n)] {
        for u in lo..hi {
            for v in u + 1..hi {
                edges.push((u, v));
            }
        }
    }
    edges.push((a - 1, a));
    edges
}

/// Random tree by attaching each new node to a uniformly chosen earlier one.
fn random_tree(n: usize, rng: &mut ChaCha8Rng) -> Vec<(usize, usize)> {
    (1..n).map(|v| (rng.gen_range(0..v), v)).collect()
}

/// Balanced dataset of `count` graphs alternating class 0 and class 1, with
/// node counts uniform in `sizes` (inclusive) and a single constant feature
/// per node. Node ids are shuffled so position carries no class signal.
pub fn synth_dataset(
    kind: SynthKind,
    count: usize,
    sizes: (usize, usize),
    seed: u64,
) -> Result<Dataset> {
    let (lo, hi) = sizes;
    let min_size = match kind {
        SynthKind::CyclesVsCliquePairs => 6,
        SynthKind::TreesVsCycles => 3,
    };
    if lo < min_size || hi < lo {
        return Err(Error::Config(format!(
            "size range {lo}..={hi} invalid for {kind} (minimum {min_size})"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut graphs = Vec::with_capacity(count);
    for i in 0..count {
        let label = i % 2;
        let n = rng.gen_range(lo..=hi);
        let edges = match (kind, label) {
            (SynthKind::CyclesVsCliquePairs, 0) => cycle(n),
            (SynthKind::CyclesVsCliquePairs, _) => clique_pair(n, &mut rng),
            (SynthKind::TreesVsCycles, 0) => random_tree(n, &mut rng),
            (SynthKind::TreesVsCycles, _) => cycle(n),
        };
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut rng);
        let edges: Vec<(usize, usize)> = edges.iter().map(|&(u, v)| (perm[u], perm[v])).collect();
        graphs.push(GraphInstance::from_edges(
            n,
            &edges,
            Tensor::full(n, 1, 1.0),
            label,
        )?);
    }
    Dataset::new(format!("synth-{kind}"), graphs, 2)
}
