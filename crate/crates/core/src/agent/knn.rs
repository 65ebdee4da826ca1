use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashSet};

use crate::beams::{circular_distance, BeamVector, PhaseSet};
use crate::error::{Error, Result};

struct Node {
    cost: f64,
    indices: Vec<usize>,
    ranks: Vec<usize>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Node {}

impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Node {
    // Reversed so the max-heap pops the cheapest node first.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .cost
            .total_cmp(&self.cost)
            .then_with(|| other.indices.cmp(&self.indices))
    }
}

/// The `k` lattice beams closest to a continuous phase vector.
///
/// Distance is Euclidean over per-element circular distances; ties go to
/// the lexicographically smaller index vector. Candidates come out sorted,
/// so `k = 1` gives exactly [`PhaseSet::quantize`].
pub fn nearest_beams(proto: &[f64], phases: &PhaseSet, k: usize) -> Result<Vec<BeamVector>> {
    if k == 0 {
        return Err(Error::invalid("candidate count must be positive"));
    }
    if proto.is_empty() {
        return Err(Error::Empty("proto-action".into()));
    }
    if let Some(bad) = proto.iter().find(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("proto-action entry {bad}")));
    }
    // Per element: (squared distance, phase index), best first.
    let options: Vec<Vec<(f64, usize)>> = proto
        .iter()
        .map(|&t| {
            let mut o: Vec<(f64, usize)> = phases
                .values()
                .iter()
                .enumerate()
                .map(|(i, &v)| (circular_distance(t, v).powi(2), i))
                .collect();
            o.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            o
        })
        .collect();
    let node = |ranks: Vec<usize>| {
        let mut cost = 0.0;
        let mut indices = Vec::with_capacity(ranks.len());
        for (m, &r) in ranks.iter().enumerate() {
            cost += options[m][r].0;
            indices.push(options[m][r].1);
        }
        Node {
            cost,
            indices,
            ranks,
        }
    };

    let total = crate::beams::lattice_size(proto.len(), phases).unwrap_or(u128::MAX);
    let k = k.min(usize::try_from(total).unwrap_or(usize::MAX));
    let mut heap = BinaryHeap::new();
    let mut seen = HashSet::new();
    let start = vec![0; proto.len()];
    seen.insert(start.clone());
    heap.push(node(start));
    let mut out = Vec::with_capacity(k);
    while out.len() < k {
        let Some(best) = heap.pop() else { break };
        for m in 0..best.ranks.len() {
            if best.ranks[m] + 1 < phases.levels() {
                let mut next = best.ranks.clone();
                next[m] += 1;
                if seen.insert(next.clone()) {
                    heap.push(node(next));
                }
            }
        }
        out.push(BeamVector::new(best.indices));
    }
    Ok(out)
}
