//! Soft demapping: the exact MAP demapper with a priori input and a small
//! neural demapper for fading channels.

use num_complex::Complex64;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::channel::EqualizedSymbol;
use crate::constellation::{Constellation, ShapingSpec};
use crate::error::{Error, Result};
use crate::llr::{self, split_llr, split_llr_vjp, BitTable, LLR_CLIP};
use crate::rng::Rng;

/// A priori LLRs for the mapper inputs before any feedback:
/// `ln((1 - p0) / p0)` on shaped positions, zero elsewhere.
pub fn apriori_init(spec: &ShapingSpec, m: usize, symbols: usize) -> Vec<f64> {
    let la = ((1.0 - spec.p0()) / spec.p0()).ln();
    let one: Vec<f64> = (0..m).map(|k| if spec.is_shaped(k) { llr::clip(la) } else { 0.0 }).collect();
    one.repeat(symbols)
}

/// Noise variance per symbol, broadcasting a single value.
fn n0_at(n0: &[f64], j: usize) -> f64 {
    if n0.len() == 1 {
        n0[0]
    } else {
        n0[j]
    }
}

/// Gradients of [`MapDemapper::extrinsic`] inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct DemapGrads {
    /// Interleaved `[re, im]` per constellation point.
    pub points: Vec<f64>,
    /// Interleaved `[re, im]` per received sample.
    pub y: Vec<f64>,
    /// Same length as the `n0` argument.
    pub n0: Vec<f64>,
    pub la: Vec<f64>,
}

/// Exact MAP demapper over a labelled constellation.
///
/// The metric of point `x` for observation `y` is
/// `-|y - x|^2 / n0 + sum_n bit_n(x) La_n (+ ln P(x) if a symbol prior is set)`,
/// and each output is the log-ratio of the label-split sums.
#[derive(Debug, Clone)]
pub struct MapDemapper {
    points: Vec<Complex64>,
    m: usize,
    labels: BitTable,
    log_prior: Option<Vec<f64>>,
}

impl MapDemapper {
    pub fn new(c: &Constellation) -> Self {
        Self::from_points(c.points())
    }

    pub fn from_points(points: &[Complex64]) -> Self {
        assert!(points.len().is_power_of_two() && points.len() >= 2);
        let m = points.len().trailing_zeros() as usize;
        Self { points: points.to_vec(), m, labels: BitTable::labels(m), log_prior: None }
    }

    /// Adds `ln P(x)` to every metric. Used for exact posteriors under a
    /// non-product distribution.
    pub fn with_symbol_prior(mut self, prob: &[f64]) -> Self {
        assert_eq!(prob.len(), self.points.len());
        self.log_prior = Some(prob.iter().map(|p| p.ln()).collect());
        self
    }

    pub fn m(&self) -> usize {
        self.m
    }

    fn metrics(&self, y: Complex64, n0: f64, la: &[f64], base: &mut [f64]) {
        for (w, b) in base.iter_mut().enumerate() {
            *b = -(y - self.points[w]).norm_sqr() / n0;
            if let Some(lp) = &self.log_prior {
                *b += lp[w];
            }
        }
        self.labels.add_priors(la, base);
    }

    fn check(&self, y: &[Complex64], n0: &[f64], la: &[f64]) {
        assert!(n0.len() == 1 || n0.len() == y.len(), "n0 must be scalar or per symbol");
        assert_eq!(la.len(), y.len() * self.m, "a priori length");
    }

    /// Unclipped posterior log-ratios per bit.
    fn raw_posterior(&self, y: &[Complex64], n0: &[f64], la: &[f64]) -> Vec<f64> {
        self.check(y, n0, la);
        let mut out = vec![0.0; la.len()];
        let mut base = vec![0.0; self.points.len()];
        let mut exps = base.clone();
        for (j, &yj) in y.iter().enumerate() {
            let r = j * self.m..(j + 1) * self.m;
            self.metrics(yj, n0_at(n0, j), &la[r.clone()], &mut base);
            split_llr(&base, &self.labels, &mut out[r], &mut exps);
        }
        out
    }

    /// Posterior LLRs, clipped.
    pub fn posterior(&self, y: &[Complex64], n0: &[f64], la: &[f64]) -> Vec<f64> {
        self.raw_posterior(y, n0, la).into_iter().map(llr::clip).collect()
    }

    /// Extrinsic LLRs: posterior minus own a priori, then clipped. The
    /// subtraction is exact since the own-bit prior is a common factor of
    /// one split subset, so the output does not depend on `la[k]`.
    pub fn extrinsic(&self, y: &[Complex64], n0: &[f64], la: &[f64]) -> Vec<f64> {
        let mut out = self.raw_posterior(y, n0, la);
        for (o, &a) in out.iter_mut().zip(la) {
            *o = llr::clip(*o - a);
        }
        out
    }

    /// Vector-Jacobian product of [`extrinsic`].
    pub fn extrinsic_vjp(&self, y: &[Complex64], n0: &[f64], la: &[f64], g_out: &[f64]) -> DemapGrads {
        let ext = self.extrinsic(y, n0, la);
        let size = self.points.len();
        let mut g = DemapGrads {
            points: vec![0.0; 2 * size],
            y: vec![0.0; 2 * y.len()],
            n0: vec![0.0; n0.len()],
            la: vec![0.0; la.len()],
        };
        let mut base = vec![0.0; size];
        let mut exps = base.clone();
        let mut g_base = base.clone();
        let mut g_masked = vec![0.0; self.m];
        for (j, &yj) in y.iter().enumerate() {
            let r = j * self.m..(j + 1) * self.m;
            let mut any = false;
            for (k, gm) in g_masked.iter_mut().enumerate() {
                let i = r.start + k;
                *gm = if ext[i].abs() < LLR_CLIP { g_out[i] } else { 0.0 };
                any |= *gm != 0.0;
            }
            if !any {
                continue;
            }
            let n0j = n0_at(n0, j);
            self.metrics(yj, n0j, &la[r.clone()], &mut base);
            g_base.fill(0.0);
            split_llr_vjp(&base, &self.labels, &g_masked, &mut g_base, &mut exps);
            let mut gy = Complex64::new(0.0, 0.0);
            let mut gn0 = 0.0;
            for (w, &gb) in g_base.iter().enumerate() {
                if gb == 0.0 {
                    continue;
                }
                let d = yj - self.points[w];
                // d metric / d x = 2 (y - x) / n0.
                let gx = d * (2.0 * gb / n0j);
                g.points[2 * w] += gx.re;
                g.points[2 * w + 1] += gx.im;
                gy -= gx;
                gn0 += gb * d.norm_sqr() / (n0j * n0j);
                for (k, slot) in g.la[r.clone()].iter_mut().enumerate() {
                    if self.labels.get(w, k) == 1 {
                        *slot += gb;
                    }
                }
            }
            for (slot, gm) in g.la[r].iter_mut().zip(&g_masked) {
                *slot -= gm;
            }
            g.y[2 * j] += gy.re;
            g.y[2 * j + 1] += gy.im;
            if n0.len() == 1 {
                g.n0[0] += gn0;
            } else {
                g.n0[j] += gn0;
            }
        }
        g
    }
}

/// Extrinsic MAP demapping of AWGN observations.
pub fn map_demap(c: &Constellation, y: &[Complex64], n0: f64, la: &[f64]) -> Vec<f64> {
    MapDemapper::new(c).extrinsic(y, &[n0], la)
}

/// Extrinsic MAP demapping of LMMSE-equalized observations via the
/// equivalent AWGN model.
pub fn map_demap_equalized(c: &Constellation, eq: &[EqualizedSymbol], la: &[f64]) -> Vec<f64> {
    let (y, n0): (Vec<Complex64>, Vec<f64>) = eq.iter().map(|e| e.as_awgn()).unzip();
    MapDemapper::new(c).extrinsic(&y, &n0, la)
}

/// Which channel-state feature accompanies the equalized sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureSpec {
    /// `[Re y_eq, Im y_eq, Re h_hat, Im h_hat, Eb/N0 dB]`.
    ChannelEstimate,
    /// `[Re y_eq, Im y_eq, rho, Eb/N0 dB]`.
    Rho,
}

impl FeatureSpec {
    pub fn dim(self) -> usize {
        match self {
            FeatureSpec::ChannelEstimate => 5,
            FeatureSpec::Rho => 4,
        }
    }

    /// Appends the feature row of one symbol to `out`.
    pub fn push(self, eq: &EqualizedSymbol, h_hat: Complex64, ebn0_db: f64, out: &mut Vec<f64>) {
        out.extend([eq.y_eq.re, eq.y_eq.im]);
        match self {
            FeatureSpec::ChannelEstimate => out.extend([h_hat.re, h_hat.im]),
            FeatureSpec::Rho => out.push(eq.rho),
        }
        out.push(ebn0_db);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer {
    pub inputs: usize,
    pub outputs: usize,
    /// Row-major `outputs x inputs`.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl DenseLayer {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self { inputs, outputs, weights: vec![0.0; inputs * outputs], bias: vec![0.0; outputs] }
    }

    /// Glorot-uniform weights, zero bias.
    pub fn glorot(inputs: usize, outputs: usize, rng: &mut Rng) -> Self {
        let limit = (6.0 / (inputs + outputs) as f64).sqrt();
        let weights = (0..inputs * outputs).map(|_| rng.random_range(-limit..limit)).collect();
        Self { inputs, outputs, weights, bias: vec![0.0; outputs] }
    }

    /// `x` holds `rows` row vectors of length `inputs`.
    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        let rows = x.len() / self.inputs;
        let mut out = Vec::with_capacity(rows * self.outputs);
        for xr in x.chunks_exact(self.inputs) {
            for o in 0..self.outputs {
                let w = &self.weights[o * self.inputs..(o + 1) * self.inputs];
                out.push(self.bias[o] + w.iter().zip(xr).map(|(a, b)| a * b).sum::<f64>());
            }
        }
        out
    }
}

/// Affine-relu-affine-relu-affine network producing `m` LLRs per symbol.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeuralDemapper {
    pub features: FeatureSpec,
    pub layers: Vec<DenseLayer>,
}

pub const HIDDEN_WIDTH: usize = 64;

impl NeuralDemapper {
    pub fn glorot(features: FeatureSpec, m: usize, rng: &mut Rng) -> Self {
        let d = features.dim();
        let layers = vec![
            DenseLayer::glorot(d, HIDDEN_WIDTH, rng),
            DenseLayer::glorot(HIDDEN_WIDTH, HIDDEN_WIDTH, rng),
            DenseLayer::glorot(HIDDEN_WIDTH, m, rng),
        ];
        Self { features, layers }
    }

    pub fn zeros(features: FeatureSpec, m: usize) -> Self {
        let d = features.dim();
        let layers = vec![
            DenseLayer::zeros(d, HIDDEN_WIDTH),
            DenseLayer::zeros(HIDDEN_WIDTH, HIDDEN_WIDTH),
            DenseLayer::zeros(HIDDEN_WIDTH, m),
        ];
        Self { features, layers }
    }

    pub fn m(&self) -> usize {
        self.layers.last().map_or(0, |l| l.outputs)
    }

    /// LLRs for a batch of feature rows (flattened), clipped to the LLR range.
    pub fn forward(&self, features: &[f64]) -> Result<Vec<f64>> {
        let d = self.features.dim();
        if self.layers.first().map(|l| l.inputs) != Some(d) || features.len() % d != 0 {
            return Err(Error::FeatureMismatch { expected: d, actual: features.len() });
        }
        let mut h = features.to_vec();
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            h = layer.forward(&h);
            if i < last {
                h.iter_mut().for_each(|v| *v = v.max(0.0));
            }
        }
        Ok(h.into_iter().map(llr::clip).collect())
    }

    /// All parameters flattened layer by layer as `[weights, bias]`.
    pub fn params(&self) -> Vec<f64> {
        self.layers.iter().flat_map(|l| l.weights.iter().chain(&l.bias).copied()).collect()
    }

    pub fn set_params(&mut self, p: &[f64]) {
        let mut off = 0;
        for l in &mut self.layers {
            let nw = l.weights.len();
            l.weights.copy_from_slice(&p[off..off + nw]);
            off += nw;
            let nb = l.bias.len();
            l.bias.copy_from_slice(&p[off..off + nb]);
            off += nb;
        }
        assert_eq!(off, p.len(), "parameter count");
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let d: Self = serde_json::from_str(text)?;
        let mut prev = d.features.dim();
        for l in &d.layers {
            if l.inputs != prev || l.weights.len() != l.inputs * l.outputs || l.bias.len() != l.outputs {
                return Err(Error::FeatureMismatch { expected: prev, actual: l.inputs });
            }
            prev = l.outputs;
        }
        Ok(d)
    }
}
