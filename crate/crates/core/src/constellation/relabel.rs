//! Hamming-distance preserving relabelling for shaped operation.

use serde::{Deserialize, Serialize};

use super::{bit_product_distribution, label_bit, weighted_energy, Constellation, ShapingSpec};

/// A label map `l -> permute(l ^ xor_mask)`: new bit `k` is old bit
/// `perm[k]` of the flipped label. Ordered lexicographically by
/// `(xor_mask, perm)`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LabelTransform {
    pub xor_mask: usize,
    pub perm: Vec<usize>,
}

impl LabelTransform {
    pub fn identity(m: usize) -> Self {
        Self { xor_mask: 0, perm: (0..m).collect() }
    }

    pub fn apply(&self, label: usize) -> usize {
        let m = self.perm.len();
        let flipped = label ^ self.xor_mask;
        self.perm
            .iter()
            .enumerate()
            .fold(0, |acc, (k, &src)| acc | ((label_bit(flipped, src, m) as usize) << (m - 1 - k)))
    }

    /// Moves every point to its transformed label.
    pub fn relabel(&self, c: &Constellation) -> Constellation {
        let mut points = c.points().to_vec();
        for (label, p) in c.points().iter().enumerate() {
            points[self.apply(label)] = *p;
        }
        Constellation::new(points).expect("permutation of a valid constellation")
    }
}

fn next_permutation(p: &mut [usize]) -> bool {
    let Some(i) = p.windows(2).rposition(|w| w[0] < w[1]) else {
        return false;
    };
    let j = p.iter().rposition(|&x| x > p[i]).expect("pivot has a successor");
    p.swap(i, j);
    p[i + 1..].reverse();
    true
}

/// Exhaustively searches bit flips and bit-position swaps for the labelling
/// that minimises mean energy under the shaped distribution. Ties (within
/// 1e-12) go to the lexicographically smallest transform.
///
/// Intended for `m <= 6` (46080 transforms).
pub fn relabel_for_shaping(c: &Constellation, spec: &ShapingSpec) -> (Constellation, LabelTransform) {
    let m = c.m();
    assert!(m <= 6, "exhaustive relabel search supports m <= 6");
    let prob = bit_product_distribution(m, &spec.mask(m), spec.p0());
    let energy_of = |t: &LabelTransform| -> f64 {
        c.points()
            .iter()
            .enumerate()
            .map(|(label, p)| prob[t.apply(label)] * p.norm_sqr())
            .sum()
    };

    let mut best = LabelTransform::identity(m);
    let mut best_energy = energy_of(&best);
    for xor_mask in 0..(1usize << m) {
        let mut perm: Vec<usize> = (0..m).collect();
        loop {
            let t = LabelTransform { xor_mask, perm: perm.clone() };
            let e = energy_of(&t);
            if e < best_energy - 1e-12 {
                best_energy = e;
                best = t;
            }
            if !next_permutation(&mut perm) {
                break;
            }
        }
    }
    let out = best.relabel(c);
    debug_assert!((weighted_energy(out.points(), &prob) - best_energy).abs() < 1e-12);
    (out, best)
}
