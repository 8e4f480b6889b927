//! LLR conventions and numerically stable helpers.
//!
//! Every LLR in the crate is `ln(P(bit = 1) / P(bit = 0))`: a negative value
//! favours a zero, and hard decisions map `L > 0` to bit 1.

/// Saturation bound for every LLR exchanged between blocks.
pub const LLR_CLIP: f64 = 30.0;

#[inline]
pub fn clip(x: f64) -> f64 {
    x.clamp(-LLR_CLIP, LLR_CLIP)
}

pub fn clip_all(xs: &mut [f64]) {
    for x in xs {
        *x = clip(*x);
    }
}

#[inline]
pub fn hard(l: f64) -> u8 {
    u8::from(l > 0.0)
}

pub fn hard_decisions(llrs: &[f64]) -> Vec<u8> {
    llrs.iter().map(|&l| hard(l)).collect()
}

/// `ln(1 + e^x)` without overflow.
#[inline]
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Max-shifted log-sum-exp. Returns `-inf` for an empty slice.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + xs.iter().map(|&x| (x - max).exp()).sum::<f64>().ln()
}

/// Binary cross entropy `-ln P(bit | L)` in nats.
#[inline]
pub fn bce(llr: f64, bit: u8) -> f64 {
    if bit == 1 {
        softplus(-llr)
    } else {
        softplus(llr)
    }
}

/// Binary entropy in bits; `h(0) = h(1) = 0`.
pub fn binary_entropy(p: f64) -> f64 {
    let term = |q: f64| if q <= 0.0 { 0.0 } else { -q * q.log2() };
    term(p) + term(1.0 - p)
}


/// Binary features over a finite alphabet: `get(w, t)` is feature `t` of
/// alphabet entry `w` (label bits of a symbol, input or output bits of a
/// shaping codeword).
#[derive(Debug, Clone, PartialEq)]
pub struct BitTable {
    rows: usize,
    cols: usize,
    bits: Vec<u8>,
}

impl BitTable {
    pub fn from_fn(rows: usize, cols: usize, f: impl Fn(usize, usize) -> u8) -> Self {
        let bits = (0..rows)
            .flat_map(|w| (0..cols).map(move |t| (w, t)))
            .map(|(w, t)| f(w, t))
            .collect();
        Self { rows, cols, bits }
    }

    /// MSB-first `width`-bit expansion of each value.
    pub fn from_words(words: &[u32], width: usize) -> Self {
        Self::from_fn(words.len(), width, |w, t| ((words[w] >> (width - 1 - t)) & 1) as u8)
    }

    /// Labels `0..2^m` with bit 0 the most significant.
    pub fn labels(m: usize) -> Self {
        Self::from_fn(1 << m, m, |w, t| ((w >> (m - 1 - t)) & 1) as u8)
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, w: usize, t: usize) -> u8 {
        self.bits[w * self.cols + t]
    }

    #[inline]
    pub fn row(&self, w: usize) -> &[u8] {
        &self.bits[w * self.cols..(w + 1) * self.cols]
    }

    /// `sum_t bit(w, t) * prior[t]` for every row.
    pub fn add_priors(&self, prior: &[f64], base: &mut [f64]) {
        for (w, b) in base.iter_mut().enumerate() {
            *b += self
                .row(w)
                .iter()
                .zip(prior)
                .filter(|(&bit, _)| bit == 1)
                .map(|(_, &p)| p)
                .sum::<f64>();
        }
    }
}

/// `out[t] = ln sum_{bit(w,t)=1} e^{base[w]} - ln sum_{bit(w,t)=0} e^{base[w]}`.
///
/// An empty subset contributes `ln 0 = -inf`. `exps` is scratch of length
/// `rows`; on return it holds `e^{base[w] - max}`.
pub fn split_llr(base: &[f64], table: &BitTable, out: &mut [f64], exps: &mut [f64]) {
    let max = base.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    for (e, &b) in exps.iter_mut().zip(base) {
        *e = (b - max).exp();
    }
    for (t, o) in out.iter_mut().enumerate() {
        let (mut s0, mut s1) = (0.0, 0.0);
        for (w, &e) in exps.iter().enumerate() {
            if table.get(w, t) == 1 {
                s1 += e;
            } else {
                s0 += e;
            }
        }
        *o = s1.ln() - s0.ln();
    }
}

/// Vector-Jacobian product of [`split_llr`]: accumulates `d out / d base`
/// weighted by `g_out` into `g_base`. Outputs with an empty subset are
/// constant and contribute nothing.
pub fn split_llr_vjp(base: &[f64], table: &BitTable, g_out: &[f64], g_base: &mut [f64], exps: &mut [f64]) {
    let max = base.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    for (e, &b) in exps.iter_mut().zip(base) {
        *e = (b - max).exp();
    }
    for (t, &g) in g_out.iter().enumerate() {
        if g == 0.0 {
            continue;
        }
        let (mut s0, mut s1) = (0.0, 0.0);
        for (w, &e) in exps.iter().enumerate() {
            if table.get(w, t) == 1 {
                s1 += e;
            } else {
                s0 += e;
            }
        }
        if s0 == 0.0 || s1 == 0.0 {
            continue;
        }
        let (c1, c0) = (g / s1, g / s0);
        for (w, &e) in exps.iter().enumerate() {
            g_base[w] += if table.get(w, t) == 1 { c1 * e } else { -c0 * e };
        }
    }
}
