//! Built-in codes. The larger ones come from a seeded progressive edge
//! growth construction with a per-check degree cap; seeds are fixed so every
//! build reproduces the same matrices.

use std::collections::VecDeque;

use rand::Rng;

use super::ParityCheckMatrix;
use crate::error::{Error, Result};
use crate::rng;

pub struct BuiltinCode {
    pub name: &'static str,
    pub n: usize,
    pub checks: usize,
    pub column_weight: usize,
    pub seed: u64,
    pub note: &'static str,
}

pub const BUILTIN_CODES: &[BuiltinCode] = &[
    BuiltinCode { name: "hamming74", n: 7, checks: 3, column_weight: 0, seed: 0, note: "(7,4) Hamming" },
    BuiltinCode { name: "reg36-n96", n: 96, checks: 48, column_weight: 3, seed: 96, note: "(3,6)-regular, rate 1/2" },
    BuiltinCode {
        name: "reg36-n108",
        n: 108,
        checks: 54,
        column_weight: 3,
        seed: 108,
        note: "(3,6)-regular, rate 1/2; frame-compatible toy code for |S|=1, (2,4) shaping",
    },
    BuiltinCode { name: "reg36-n1440", n: 1440, checks: 720, column_weight: 3, seed: 1440, note: "(3,6)-regular, rate 1/2" },
    BuiltinCode {
        name: "peg-n1440-r23",
        n: 1440,
        checks: 480,
        column_weight: 3,
        seed: 2023,
        note: "column weight 3, rate 2/3 (shaped system at R = 3)",
    },
    BuiltinCode {
        name: "peg-n1440-r35",
        n: 1440,
        checks: 576,
        column_weight: 3,
        seed: 3035,
        note: "column weight 3, rate 3/5 (uniform system at R = 3)",
    },
];

pub fn builtin_names() -> Vec<&'static str> {
    BUILTIN_CODES.iter().map(|c| c.name).collect()
}

fn hamming74() -> ParityCheckMatrix {
    ParityCheckMatrix::from_dense(&[
        &[1, 0, 0, 1, 1, 0, 1],
        &[0, 1, 0, 1, 0, 1, 1],
        &[0, 0, 1, 0, 1, 1, 1],
    ])
    .expect("valid matrix")
}

/// Looks up a built-in code. PEG codes retry successive seeds until the
/// matrix has full rank and girth at least 6.
pub fn builtin_code(name: &str) -> Result<ParityCheckMatrix> {
    let spec = BUILTIN_CODES
        .iter()
        .find(|c| c.name == name)
        .ok_or_else(|| Error::Config(format!("unknown built-in code {name:?}; known: {}", builtin_names().join(", "))))?;
    if spec.name == "hamming74" {
        return Ok(hamming74());
    }
    for attempt in 0..64 {
        if let Ok(h) = peg_code(spec.n, spec.checks, spec.column_weight, spec.seed + attempt) {
            if h.rank() == spec.checks && !has_four_cycle(&h) {
                return Ok(h);
            }
        }
    }
    Err(Error::EncodingSetup(format!("no full-rank construction found for {name}")))
}

/// True when two checks share more than one variable.
pub fn has_four_cycle(h: &ParityCheckMatrix) -> bool {
    for col in h.cols() {
        for (i, &a) in col.iter().enumerate() {
            for &b in &col[i + 1..] {
                let shared = h.rows()[a].iter().filter(|v| h.rows()[b].binary_search(v).is_ok()).count();
                if shared > 1 {
                    return true;
                }
            }
        }
    }
    false
}

/// Progressive edge growth: each new edge of a variable goes to the check
/// farthest from it in the current graph (unreachable counts as farthest),
/// preferring low check degree, then a seeded random tie-break. Check
/// degrees are capped at `ceil(n * column_weight / checks)`.
pub fn peg_code(n: usize, checks: usize, column_weight: usize, seed: u64) -> Result<ParityCheckMatrix> {
    if column_weight == 0 || column_weight > checks {
        return Err(Error::Config(format!("column weight {column_weight} invalid for {checks} checks")));
    }
    let cap = (n * column_weight).div_ceil(checks);
    let mut rng = rng::substream(seed, &[n as u64, checks as u64, column_weight as u64]);
    let mut var_adj: Vec<Vec<usize>> = vec![Vec::with_capacity(column_weight); n];
    let mut chk_adj: Vec<Vec<usize>> = vec![Vec::new(); checks];
    let mut depth = vec![usize::MAX; checks];
    let mut var_seen = vec![false; n];
    let mut queue = VecDeque::new();

    for v in 0..n {
        for _ in 0..column_weight {
            // Breadth-first depths of checks from v.
            depth.fill(usize::MAX);
            var_seen.fill(false);
            queue.clear();
            var_seen[v] = true;
            for &c in &var_adj[v] {
                depth[c] = 0;
                queue.push_back(c);
            }
            while let Some(c) = queue.pop_front() {
                for &u in &chk_adj[c] {
                    if var_seen[u] {
                        continue;
                    }
                    var_seen[u] = true;
                    for &c2 in &var_adj[u] {
                        if depth[c2] == usize::MAX {
                            depth[c2] = depth[c] + 1;
                            queue.push_back(c2);
                        }
                    }
                }
            }
            let mut best: Vec<usize> = Vec::new();
            let mut best_key = (0usize, usize::MAX);
            for c in 0..checks {
                if chk_adj[c].len() >= cap || var_adj[v].contains(&c) {
                    continue;
                }
                let key = (depth[c], chk_adj[c].len());
                if best.is_empty() || key.0 > best_key.0 || (key.0 == best_key.0 && key.1 < best_key.1) {
                    best.clear();
                    best.push(c);
                    best_key = key;
                } else if key == best_key {
                    best.push(c);
                }
            }
            if best.is_empty() {
                return Err(Error::EncodingSetup(format!("PEG ran out of check capacity at variable {v}")));
            }
            let c = best[rng.random_range(0..best.len())];
            var_adj[v].push(c);
            chk_adj[c].push(v);
        }
    }
    ParityCheckMatrix::from_rows(n, chk_adj)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn regular_codes_are_regular_full_rank_and_four_cycle_free() {
        for name in ["reg36-n96", "reg36-n108", "reg36-n1440"] {
            let h = builtin_code(name).unwrap();
            assert!(h.cols().iter().all(|c| c.len() == 3), "{name}");
            assert!(h.rows().iter().all(|r| r.len() == 6), "{name}");
            assert_eq!(h.rank(), h.checks(), "{name}");
            assert!(!has_four_cycle(&h), "{name}");
        }
    }

    #[test]
    fn rate_matched_codes_have_expected_dimensions() {
        let r23 = builtin_code("peg-n1440-r23").unwrap();
        assert_eq!((r23.n(), r23.k()), (1440, 960));
        let r35 = builtin_code("peg-n1440-r35").unwrap();
        assert_eq!((r35.n(), r35.k()), (1440, 864));
        assert_eq!(r35.rank(), 576);
    }

    #[test]
    fn construction_is_deterministic() {
        assert_eq!(peg_code(60, 30, 3, 9).unwrap(), peg_code(60, 30, 3, 9).unwrap());
        assert!(builtin_code("nope").is_err());
    }
}
