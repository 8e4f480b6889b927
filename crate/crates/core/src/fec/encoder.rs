//! Systematic encoding via GF(2) elimination with recorded column choice.

use super::ParityCheckMatrix;
use crate::error::{Error, Result};

/// Dense GF(2) rows packed into 64-bit words.
pub(super) struct DenseRows {
    words: usize,
    rows: Vec<Vec<u64>>,
    n: usize,
}

impl DenseRows {
    pub(super) fn from_matrix(h: &ParityCheckMatrix) -> Self {
        let words = h.n().div_ceil(64);
        let rows = h
            .rows()
            .iter()
            .map(|r| {
                let mut w = vec![0u64; words];
                for &v in r {
                    w[v / 64] ^= 1 << (v % 64);
                }
                w
            })
            .collect();
        Self { words, rows, n: h.n() }
    }

    #[inline]
    fn bit(&self, r: usize, c: usize) -> bool {
        self.rows[r][c / 64] >> (c % 64) & 1 == 1
    }

    /// Reduces to row echelon form with full back-substitution, scanning
    /// columns from the last to the first. Returns the pivot column of each
    /// independent row; dependent rows end up zero and are dropped.
    pub(super) fn eliminate(&mut self) -> Vec<usize> {
        let mut pivots = Vec::new();
        let mut r = 0;
        for c in (0..self.n).rev() {
            if r == self.rows.len() {
                break;
            }
            let Some(p) = (r..self.rows.len()).find(|&i| self.bit(i, c)) else {
                continue;
            };
            self.rows.swap(r, p);
            let pivot_row = self.rows[r].clone();
            for i in 0..self.rows.len() {
                if i != r && self.bit(i, c) {
                    for (w, pw) in self.rows[i].iter_mut().zip(&pivot_row) {
                        *w ^= pw;
                    }
                }
            }
            pivots.push(c);
            r += 1;
        }
        self.rows.truncate(r);
        pivots
    }
}

/// Places message bits on the information positions and solves the parity
/// positions from the reduced matrix.
#[derive(Debug, Clone)]
pub struct SystematicEncoder {
    n: usize,
    info_positions: Vec<usize>,
    parity_positions: Vec<usize>,
    reduced: Vec<Vec<u64>>,
}

impl SystematicEncoder {
    pub fn new(h: &ParityCheckMatrix) -> Result<Self> {
        let mut dense = DenseRows::from_matrix(h);
        let pivots = dense.eliminate();
        if pivots.len() < h.checks() {
            return Err(Error::EncodingSetup(format!(
                "parity-check matrix has rank {} < {} checks",
                pivots.len(),
                h.checks()
            )));
        }
        let mut is_parity = vec![false; h.n()];
        for &c in &pivots {
            is_parity[c] = true;
        }
        let info_positions = (0..h.n()).filter(|&c| !is_parity[c]).collect();
        debug_assert_eq!(dense.words, h.n().div_ceil(64));
        Ok(Self { n: h.n(), info_positions, parity_positions: pivots, reduced: dense.rows })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.info_positions.len()
    }

    /// Codeword positions that carry the message, in message order.
    pub fn info_positions(&self) -> &[usize] {
        &self.info_positions
    }

    pub fn encode(&self, message: &[u8]) -> Result<Vec<u8>> {
        if message.len() != self.k() {
            return Err(Error::LengthMismatch { expected: self.k(), actual: message.len() });
        }
        let mut packed = vec![0u64; self.n.div_ceil(64)];
        let mut cw = vec![0u8; self.n];
        for (&pos, &b) in self.info_positions.iter().zip(message) {
            if b & 1 == 1 {
                packed[pos / 64] |= 1 << (pos % 64);
                cw[pos] = 1;
            }
        }
        for (row, &pos) in self.reduced.iter().zip(&self.parity_positions) {
            let ones: u32 = row.iter().zip(&packed).map(|(a, b)| (a & b).count_ones()).sum();
            cw[pos] = (ones & 1) as u8;
        }
        Ok(cw)
    }

    /// Reads the message back out of a (hard-decided) codeword.
    pub fn extract(&self, codeword: &[u8]) -> Vec<u8> {
        self.info_positions.iter().map(|&p| codeword[p]).collect()
    }
}
