//! Transmit chain: FEC encode, first interleaver, split into shaped and
//! unshaped segments, shaping encode, second interleaver, merge into mapper
//! labels and modulate. Also the frame geometry arithmetic.

use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::constellation::{Constellation, ShapingSpec};
use crate::error::{Error, Result};
use crate::fec::{ParityCheckMatrix, SystematicEncoder, TannerGraph};
use crate::rng::{self, Rng};
use crate::shaping_code::ShapingCode;

/// Number of shaping blocks per frame: the integer `L` with
/// `|S| (n - L k_s + L n_s) = m L n_s`.
pub fn compute_l(n: usize, m: usize, s_size: usize, k_s: usize, n_s: usize) -> Result<usize> {
    if n == 0 || m == 0 || s_size == 0 || k_s == 0 || n_s == 0 {
        return Err(Error::Config("frame parameters must be positive".into()));
    }
    if k_s > n_s {
        return Err(Error::InvalidRate { k_s, n_s });
    }
    let den = (m * n_s) as i64 - (s_size * (n_s - k_s)) as i64;
    let num = (n * s_size) as i64;
    if den <= 0 || num % den != 0 {
        return Err(Error::Config(format!(
            "L = n|S| / (m n_s - |S|(n_s - k_s)) = {num}/{den} is not a positive integer \
             (need |S| (n - L k_s + L n_s) = m L n_s)"
        )));
    }
    Ok((num / den) as usize)
}

/// Overall information rate in bits per symbol, `R_c (m + |S| (R_s - 1))`.
pub fn rate(r_c: f64, m: usize, s_size: usize, r_s: f64) -> f64 {
    r_c * (m as f64 + s_size as f64 * (r_s - 1.0))
}

/// A seeded bit permutation: `interleave(x)[i] = x[perm[i]]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Interleaver {
    perm: Vec<usize>,
    inverse: Vec<usize>,
}

impl Interleaver {
    pub fn new(len: usize, seed: u64) -> Self {
        let mut perm: Vec<usize> = (0..len).collect();
        perm.shuffle(&mut rng::substream(seed, &[len as u64]));
        Self::from_perm(perm)
    }

    pub fn identity(len: usize) -> Self {
        Self::from_perm((0..len).collect())
    }

    fn from_perm(perm: Vec<usize>) -> Self {
        let mut inverse = vec![0; perm.len()];
        for (i, &p) in perm.iter().enumerate() {
            inverse[p] = i;
        }
        Self { perm, inverse }
    }

    pub fn len(&self) -> usize {
        self.perm.len()
    }

    pub fn is_empty(&self) -> bool {
        self.perm.is_empty()
    }

    pub fn perm(&self) -> &[usize] {
        &self.perm
    }

    pub fn inverse(&self) -> &[usize] {
        &self.inverse
    }

    pub fn interleave<T: Copy>(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.len());
        self.perm.iter().map(|&p| x[p]).collect()
    }

    pub fn deinterleave<T: Copy>(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.len());
        self.inverse.iter().map(|&p| x[p]).collect()
    }
}

/// Frame geometry. `shaped` empty means plain BICM with `L = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameConfig {
    pub n: usize,
    pub k: usize,
    pub m: usize,
    pub shaped: Vec<usize>,
    pub k_s: usize,
    pub n_s: usize,
    pub l: usize,
    pub pi1_seed: u64,
    pub pi2_seed: u64,
}

impl FrameConfig {
    #[allow(clippy::too_many_arguments)]
    pub fn new(n: usize, k: usize, m: usize, shaped: &[usize], k_s: usize, n_s: usize, pi1_seed: u64, pi2_seed: u64) -> Result<Self> {
        let mut shaped = shaped.to_vec();
        shaped.sort_unstable();
        shaped.dedup();
        if shaped.iter().any(|&s| s >= m) || (!shaped.is_empty() && shaped.len() >= m) {
            return Err(Error::Config(format!("shaped positions {shaped:?} invalid for m = {m}")));
        }
        let l = if shaped.is_empty() {
            if n % m != 0 {
                return Err(Error::Config(format!("code length {n} is not a multiple of m = {m}")));
            }
            0
        } else {
            compute_l(n, m, shaped.len(), k_s, n_s)?
        };
        let cfg = Self { n, k, m, shaped, k_s, n_s, l, pi1_seed, pi2_seed };
        if cfg.mapper_bits() % m != 0 {
            return Err(Error::Config(format!("mapper bit count {} is not a multiple of m = {m}", cfg.mapper_bits())));
        }
        Ok(cfg)
    }

    /// Bits entering the shaping encoder (`|d| = L k_s`).
    pub fn d_len(&self) -> usize {
        self.l * self.k_s
    }

    /// Shaped mapper bits (`|c| = L n_s`).
    pub fn c_len(&self) -> usize {
        self.l * self.n_s
    }

    /// Unshaped mapper bits (`|s| = n - L k_s`).
    pub fn s_len(&self) -> usize {
        self.n - self.d_len()
    }

    pub fn mapper_bits(&self) -> usize {
        self.s_len() + self.c_len()
    }

    pub fn symbols(&self) -> usize {
        self.mapper_bits() / self.m
    }

    /// Information bits per channel use.
    pub fn info_rate(&self) -> f64 {
        self.k as f64 / self.symbols() as f64
    }
}

/// Precomputed index maps between the bit streams of one frame.
///
/// `z` is the flattened mapper input (`symbol * m + bit`); `v = [d, s]` is
/// the interleaved codeword.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameLayout {
    pub cfg: FrameConfig,
    pub pi1: Interleaver,
    pub pi2: Interleaver,
    /// z position of `s_tilde[i]`.
    pub z_of_s_tilde: Vec<usize>,
    /// z position of `s[i]`.
    pub z_of_s: Vec<usize>,
}

impl FrameLayout {
    pub fn new(cfg: FrameConfig) -> Self {
        let pi1 = Interleaver::new(cfg.n, cfg.pi1_seed);
        let pi2 = Interleaver::new(cfg.c_len(), cfg.pi2_seed);
        let mut z_of_s_tilde = Vec::with_capacity(cfg.c_len());
        let mut z_of_s = Vec::with_capacity(cfg.s_len());
        for j in 0..cfg.symbols() {
            for b in 0..cfg.m {
                if cfg.shaped.contains(&b) {
                    z_of_s_tilde.push(j * cfg.m + b);
                } else {
                    z_of_s.push(j * cfg.m + b);
                }
            }
        }
        Self { cfg, pi1, pi2, z_of_s_tilde, z_of_s }
    }

    /// For each `c` position, the z position carrying it.
    pub fn z_of_c(&self) -> Vec<usize> {
        let mut out = vec![0; self.cfg.c_len()];
        for (i, &p) in self.pi2.perm().iter().enumerate() {
            out[p] = self.z_of_s_tilde[i];
        }
        out
    }

    /// For each z position, its index in the concatenation `[c, s]`.
    pub fn cs_of_z(&self) -> Vec<usize> {
        let mut out = vec![0; self.cfg.mapper_bits()];
        for (j, &z) in self.z_of_c().iter().enumerate() {
            out[z] = j;
        }
        for (i, &z) in self.z_of_s.iter().enumerate() {
            out[z] = self.cfg.c_len() + i;
        }
        out
    }

    /// Splits z-domain values into `(c, s)`.
    pub fn split_z<T: Copy>(&self, z: &[T]) -> (Vec<T>, Vec<T>) {
        let c = self.z_of_c().iter().map(|&p| z[p]).collect();
        let s = self.z_of_s.iter().map(|&p| z[p]).collect();
        (c, s)
    }

    /// Inverse of [`split_z`].
    pub fn merge_z<T: Copy + Default>(&self, c: &[T], s: &[T]) -> Vec<T> {
        let mut z = vec![T::default(); self.cfg.mapper_bits()];
        for (&p, &v) in self.z_of_c().iter().zip(c) {
            z[p] = v;
        }
        for (&p, &v) in self.z_of_s.iter().zip(s) {
            z[p] = v;
        }
        z
    }

    /// `u` from the segments of `v = [d, s]`.
    pub fn u_from_ds<T: Copy>(&self, d: &[T], s: &[T]) -> Vec<T> {
        let v: Vec<T> = d.iter().chain(s).copied().collect();
        self.pi1.deinterleave(&v)
    }

    /// Segments `(d, s)` of `v = pi1(u)`.
    pub fn ds_from_u<T: Copy>(&self, u: &[T]) -> (Vec<T>, Vec<T>) {
        let mut v = self.pi1.interleave(u);
        let s = v.split_off(self.cfg.d_len());
        (v, s)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }
}

/// Every intermediate stream of one transmitted frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub b: Vec<u8>,
    pub u: Vec<u8>,
    pub v: Vec<u8>,
    pub d: Vec<u8>,
    pub c: Vec<u8>,
    pub s: Vec<u8>,
    pub s_tilde: Vec<u8>,
    pub z: Vec<u8>,
    pub labels: Vec<usize>,
    pub x: Vec<Complex64>,
}

/// Static transmit/receive configuration shared by both ends.
#[derive(Debug, Clone)]
pub struct Link {
    pub layout: FrameLayout,
    pub h: ParityCheckMatrix,
    pub graph: TannerGraph,
    pub encoder: SystematicEncoder,
    pub shaping: ShapingCode,
    pub constellation: Constellation,
}

impl Link {
    /// `shaping = None` (or empty `shaped`) builds plain BICM.
    pub fn new(
        h: ParityCheckMatrix,
        shaping: Option<ShapingCode>,
        shaped: &[usize],
        constellation: Constellation,
        pi1_seed: u64,
        pi2_seed: u64,
    ) -> Result<Self> {
        let encoder = SystematicEncoder::new(&h)?;
        let m = constellation.m();
        let (shaping, shaped) = match shaping {
            Some(code) if !shaped.is_empty() => (code, shaped),
            _ => (ShapingCode::identity(1), &[][..]),
        };
        let cfg = FrameConfig::new(h.n(), encoder.k(), m, shaped, shaping.k_s(), shaping.n_s(), pi1_seed, pi2_seed)?;
        Ok(Self { layout: FrameLayout::new(cfg), graph: TannerGraph::new(&h), h, encoder, shaping, constellation })
    }

    pub fn cfg(&self) -> &FrameConfig {
        &self.layout.cfg
    }

    pub fn is_shaped(&self) -> bool {
        !self.cfg().shaped.is_empty()
    }

    /// The static shaping spec (`p0` of the shaping code), if shaped.
    pub fn spec(&self) -> Option<ShapingSpec> {
        self.is_shaped().then(|| ShapingSpec::new(&self.cfg().shaped, self.shaping.p0()).expect("validated"))
    }

    pub fn random_message(&self, rng: &mut Rng) -> Vec<u8> {
        (0..self.encoder.k()).map(|_| rng.random_range(0..2u8)).collect()
    }

    pub fn transmit(&self, b: &[u8]) -> Result<Frame> {
        let lay = &self.layout;
        let cfg = &lay.cfg;
        let u = self.encoder.encode(b)?;
        let v = lay.pi1.interleave(&u);
        let d = v[..cfg.d_len()].to_vec();
        let s = v[cfg.d_len()..].to_vec();
        let c = if cfg.l > 0 { self.shaping.encode(&d)? } else { Vec::new() };
        let s_tilde = lay.pi2.interleave(&c);
        let mut z = vec![0u8; cfg.mapper_bits()];
        for (&p, &bit) in lay.z_of_s_tilde.iter().zip(&s_tilde) {
            z[p] = bit;
        }
        for (&p, &bit) in lay.z_of_s.iter().zip(&s) {
            z[p] = bit;
        }
        let labels: Vec<usize> = z.chunks_exact(cfg.m).map(|bits| bits.iter().fold(0, |a, &b| (a << 1) | b as usize)).collect();
        let x = labels.iter().map(|&l| self.constellation.points()[l]).collect();
        Ok(Frame { b: b.to_vec(), u, v, d, c, s, s_tilde, z, labels, x })
    }
}
