//! Block shaping code: a `(k_s, n_s)` codebook whose words are rich in zeros,
//! with soft-in/soft-out decoding towards its inputs and its outputs.
//!
//! Codeword bits and input bits are numbered MSB-first; input block
//! `d_0 .. d_{k_s-1}` selects codebook entry `sum_l d_l 2^{k_s-1-l}`.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::llr::{self, split_llr, split_llr_vjp, BitTable};

#[derive(Debug, Clone, PartialEq)]
pub struct ShapingCode {
    k_s: usize,
    n_s: usize,
    codebook: Vec<u32>,
    inputs: BitTable,
    outputs: BitTable,
}

impl ShapingCode {
    pub fn from_codebook(k_s: usize, n_s: usize, codebook: Vec<u32>) -> Result<Self> {
        if k_s > n_s {
            return Err(Error::InvalidRate { k_s, n_s });
        }
        if k_s == 0 || n_s > 16 {
            return Err(Error::Config(format!("unsupported shaping code ({k_s}, {n_s})")));
        }
        if codebook.len() != 1 << k_s {
            return Err(Error::LengthMismatch { expected: 1 << k_s, actual: codebook.len() });
        }
        if codebook.iter().any(|&w| w >> n_s != 0) {
            return Err(Error::Config(format!("codeword wider than {n_s} bits")));
        }
        let mut sorted = codebook.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != codebook.len() {
            return Err(Error::Config("codebook entries are not distinct".into()));
        }
        let inputs = BitTable::labels(k_s);
        let outputs = BitTable::from_words(&codebook, n_s);
        Ok(Self { k_s, n_s, codebook, inputs, outputs })
    }

    /// The `2^k_s` lowest-weight `n_s`-bit words, ties by ascending value,
    /// assigned to inputs in ascending order.
    pub fn build(k_s: usize, n_s: usize) -> Result<Self> {
        if k_s > n_s {
            return Err(Error::InvalidRate { k_s, n_s });
        }
        if k_s == 0 || n_s > 16 {
            return Err(Error::Config(format!("unsupported shaping code ({k_s}, {n_s})")));
        }
        let mut words: Vec<u32> = (0..1u32 << n_s).collect();
        words.sort_by_key(|&w| (w.count_ones(), w));
        words.truncate(1 << k_s);
        Self::from_codebook(k_s, n_s, words)
    }

    pub fn identity(k: usize) -> Self {
        Self::from_codebook(k, k, (0..1u32 << k).collect()).expect("identity codebook is valid")
    }

    pub fn k_s(&self) -> usize {
        self.k_s
    }

    pub fn n_s(&self) -> usize {
        self.n_s
    }

    pub fn rate(&self) -> f64 {
        self.k_s as f64 / self.n_s as f64
    }

    pub fn codebook(&self) -> &[u32] {
        &self.codebook
    }

    /// Fraction of zeros over the whole codebook.
    pub fn p0(&self) -> f64 {
        let ones: u32 = self.codebook.iter().map(|w| w.count_ones()).sum();
        1.0 - ones as f64 / (self.codebook.len() * self.n_s) as f64
    }

    pub fn encode(&self, d: &[u8]) -> Result<Vec<u8>> {
        if d.len() % self.k_s != 0 {
            return Err(Error::LengthMismatch {
                expected: d.len().div_ceil(self.k_s) * self.k_s,
                actual: d.len(),
            });
        }
        let mut out = Vec::with_capacity(d.len() / self.k_s * self.n_s);
        for block in d.chunks_exact(self.k_s) {
            let index = block.iter().fold(0usize, |acc, &b| (acc << 1) | (b & 1) as usize);
            out.extend_from_slice(self.outputs.row(index));
        }
        Ok(out)
    }

    /// Number of blocks in a stream of `d` LLRs, checking both lengths.
    fn blocks(&self, la_c: &[f64], la_d: &[f64]) -> usize {
        let blocks = la_d.len() / self.k_s;
        assert_eq!(la_d.len(), blocks * self.k_s, "La(d) length not a multiple of k_s");
        assert_eq!(la_c.len(), blocks * self.n_s, "La(c) length does not match La(d)");
        blocks
    }

    /// Log-weight of each codebook entry from (clipped) a priori LLRs.
    fn codeword_metrics(&self, la_c: &[f64], la_d: &[f64], base: &mut [f64]) {
        base.fill(0.0);
        let lac: Vec<f64> = la_c.iter().map(|&l| llr::clip(l)).collect();
        let lad: Vec<f64> = la_d.iter().map(|&l| llr::clip(l)).collect();
        self.outputs.add_priors(&lac, base);
        self.inputs.add_priors(&lad, base);
    }

    /// Extrinsic LLRs of the encoder inputs: the posterior of each `d_j`
    /// from all codeword terms and the other inputs' a priori.
    pub fn decode_input(&self, la_c: &[f64], la_d: &[f64]) -> Vec<f64> {
        let blocks = self.blocks(la_c, la_d);
        let mut out = vec![0.0; la_d.len()];
        let mut base = vec![0.0; self.codebook.len()];
        let mut exps = base.clone();
        for b in 0..blocks {
            let c = &la_c[b * self.n_s..(b + 1) * self.n_s];
            let d = &la_d[b * self.k_s..(b + 1) * self.k_s];
            let o = &mut out[b * self.k_s..(b + 1) * self.k_s];
            self.codeword_metrics(c, d, &mut base);
            split_llr(&base, &self.inputs, o, &mut exps);
            for (x, &a) in o.iter_mut().zip(d) {
                *x = llr::clip(*x - llr::clip(a));
            }
        }
        out
    }

    /// Extrinsic LLRs of the codeword bits: posterior of each `c_n` from the
    /// inputs' a priori and the other codeword bits' a priori.
    pub fn decode_output(&self, la_c: &[f64], la_d: &[f64]) -> Vec<f64> {
        let blocks = self.blocks(la_c, la_d);
        let mut out = vec![0.0; la_c.len()];
        let mut base = vec![0.0; self.codebook.len()];
        let mut exps = base.clone();
        for b in 0..blocks {
            let c = &la_c[b * self.n_s..(b + 1) * self.n_s];
            let d = &la_d[b * self.k_s..(b + 1) * self.k_s];
            let o = &mut out[b * self.n_s..(b + 1) * self.n_s];
            self.codeword_metrics(c, d, &mut base);
            split_llr(&base, &self.outputs, o, &mut exps);
            for (x, &a) in o.iter_mut().zip(c) {
                *x = llr::clip(*x - llr::clip(a));
            }
        }
        out
    }

    /// VJP of [`decode_input`] (`input = true`) or [`decode_output`].
    /// Returns `(g_la_c, g_la_d)`.
    pub fn decode_vjp(&self, input: bool, la_c: &[f64], la_d: &[f64], g_out: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let blocks = self.blocks(la_c, la_d);
        let forward = if input { self.decode_input(la_c, la_d) } else { self.decode_output(la_c, la_d) };
        let mut g_c = vec![0.0; la_c.len()];
        let mut g_d = vec![0.0; la_d.len()];
        let rows = self.codebook.len();
        let (mut base, mut exps, mut g_base) = (vec![0.0; rows], vec![0.0; rows], vec![0.0; rows]);
        let (target, width) = if input { (&self.inputs, self.k_s) } else { (&self.outputs, self.n_s) };
        for b in 0..blocks {
            let c = &la_c[b * self.n_s..(b + 1) * self.n_s];
            let d = &la_d[b * self.k_s..(b + 1) * self.k_s];
            let fwd = &forward[b * width..(b + 1) * width];
            // Saturated outputs are flat.
            let g: Vec<f64> = g_out[b * width..(b + 1) * width]
                .iter()
                .zip(fwd)
                .map(|(&g, &f)| if f.abs() < llr::LLR_CLIP { g } else { 0.0 })
                .collect();
            self.codeword_metrics(c, d, &mut base);
            g_base.fill(0.0);
            split_llr_vjp(&base, target, &g, &mut g_base, &mut exps);
            let gc = &mut g_c[b * self.n_s..(b + 1) * self.n_s];
            let gd = &mut g_d[b * self.k_s..(b + 1) * self.k_s];
            for (w, &gb) in g_base.iter().enumerate() {
                for (t, slot) in gc.iter_mut().enumerate() {
                    if self.outputs.get(w, t) == 1 {
                        *slot += gb;
                    }
                }
                for (t, slot) in gd.iter_mut().enumerate() {
                    if self.inputs.get(w, t) == 1 {
                        *slot += gb;
                    }
                }
            }
            // The subtracted own a priori.
            let own = if input { &mut *gd } else { &mut *gc };
            for (slot, gv) in own.iter_mut().zip(&g) {
                *slot -= gv;
            }
            for (slot, &a) in gc.iter_mut().zip(c) {
                if a.abs() >= llr::LLR_CLIP {
                    *slot = 0.0;
                }
            }
            for (slot, &a) in gd.iter_mut().zip(d) {
                if a.abs() >= llr::LLR_CLIP {
                    *slot = 0.0;
                }
            }
        }
        (g_c, g_d)
    }

    /// Text form: `"k_s n_s"` then one binary word per line.
    pub fn to_text(&self) -> String {
        let mut s = format!("{} {}\n", self.k_s, self.n_s);
        for &w in &self.codebook {
            writeln!(s, "{:0width$b}", w, width = self.n_s).unwrap();
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or(Error::Parse { line: 1, msg: "empty shaping code file".into() })?;
        let dims: Vec<usize> = header
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| Error::Parse { line: 1, msg: format!("bad integer {t:?}") }))
            .collect::<Result<_>>()?;
        let [k_s, n_s] = dims[..] else {
            return Err(Error::Parse { line: 1, msg: "expected \"k_s n_s\"".into() });
        };
        if n_s == 0 || n_s > 16 || k_s > n_s {
            return Err(Error::Parse { line: 1, msg: format!("unsupported dimensions ({k_s}, {n_s})") });
        }
        let mut words = Vec::with_capacity(1 << k_s);
        for (i, line) in lines {
            let t = line.trim();
            if t.len() != n_s || !t.bytes().all(|b| b == b'0' || b == b'1') {
                return Err(Error::Parse { line: i + 1, msg: format!("expected {n_s} binary digits") });
            }
            words.push(u32::from_str_radix(t, 2).expect("validated binary"));
        }
        if words.len() != 1 << k_s {
            return Err(Error::Parse {
                line: text.lines().count(),
                msg: format!("expected {} codewords, found {}", 1 << k_s, words.len()),
            });
        }
        Self::from_codebook(k_s, n_s, words)
    }
}
