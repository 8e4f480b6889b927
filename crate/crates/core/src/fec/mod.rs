//! LDPC codes: parity-check matrices, alist I/O, systematic encoding and
//! sum-product belief propagation.

mod alist;
mod bp;
mod builtin;
mod encoder;

pub use bp::{bp_decode, bp_iterate, extrinsic, BpOutcome, BpState, TannerGraph, ATANH_CLIP};
pub use builtin::{builtin_code, builtin_names, has_four_cycle, peg_code, BUILTIN_CODES};
pub use encoder::SystematicEncoder;

use crate::error::{Error, Result};

/// Sparse binary parity-check matrix with row and column adjacency.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParityCheckMatrix {
    n: usize,
    rows: Vec<Vec<usize>>,
    cols: Vec<Vec<usize>>,
}

impl ParityCheckMatrix {
    /// Builds from per-check variable lists. Every column must be covered.
    pub fn from_rows(n: usize, rows: Vec<Vec<usize>>) -> Result<Self> {
        let mut cols = vec![Vec::new(); n];
        for (r, row) in rows.iter().enumerate() {
            for &v in row {
                if v >= n {
                    return Err(Error::Config(format!("check {r} references column {v} >= n = {n}")));
                }
                if cols[v].last() == Some(&r) {
                    return Err(Error::Config(format!("duplicate entry ({r}, {v})")));
                }
                cols[v].push(r);
            }
        }
        if let Some(v) = cols.iter().position(Vec::is_empty) {
            return Err(Error::Config(format!("column {v} has no checks")));
        }
        let rows = rows
            .into_iter()
            .map(|mut r| {
                r.sort_unstable();
                r
            })
            .collect();
        Ok(Self { n, rows, cols })
    }

    pub fn from_dense(dense: &[&[u8]]) -> Result<Self> {
        let n = dense.first().map_or(0, |r| r.len());
        let rows = dense
            .iter()
            .map(|r| r.iter().enumerate().filter(|(_, &b)| b != 0).map(|(i, _)| i).collect())
            .collect();
        Self::from_rows(n, rows)
    }

    /// Code length.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of parity checks (`n - k` for a full-rank matrix).
    pub fn checks(&self) -> usize {
        self.rows.len()
    }

    /// Design dimension `n - checks`.
    pub fn k(&self) -> usize {
        self.n - self.checks()
    }

    pub fn rate(&self) -> f64 {
        self.k() as f64 / self.n as f64
    }

    pub fn rows(&self) -> &[Vec<usize>] {
        &self.rows
    }

    pub fn cols(&self) -> &[Vec<usize>] {
        &self.cols
    }

    pub fn edges(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    pub fn syndrome(&self, bits: &[u8]) -> Vec<u8> {
        self.rows
            .iter()
            .map(|r| r.iter().fold(0u8, |acc, &v| acc ^ (bits[v] & 1)))
            .collect()
    }

    pub fn syndrome_weight(&self, bits: &[u8]) -> usize {
        self.syndrome(bits).iter().filter(|&&s| s == 1).count()
    }

    /// GF(2) rank by dense elimination.
    pub fn rank(&self) -> usize {
        let mut dense = encoder::DenseRows::from_matrix(self);
        dense.eliminate().len()
    }

    pub fn to_alist(&self) -> String {
        alist::write(self)
    }

    pub fn from_alist(text: &str) -> Result<Self> {
        alist::parse(text)
    }
}

#[cfg(test)]
pub(crate) fn hamming74() -> ParityCheckMatrix {
    builtin_code("hamming74").unwrap()
}
