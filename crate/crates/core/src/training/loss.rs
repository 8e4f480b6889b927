//! Loss graphs built on the tape.

use std::ops::Range;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::ops::{Affine, Bce, BpIterate, ComplexMulConst, Entropy, MapDemap, Normalize, ShapeDecode, SymbolDist};
use super::tape::{Tape, Var};
use crate::channel::{self, complex_gaussian, ebn0_to_n0, BlockFadingConfig, CsiMode, PILOT};
use crate::constellation::{bit_product_distribution, label_bit, Constellation};
use crate::demap::{apriori_init, FeatureSpec, NeuralDemapper};
use crate::error::{Error, Result};
use crate::fec::TannerGraph;
use crate::metrics::ChannelModel;
use crate::receiver::ShapedPrior;
use crate::rng::{substream, Rng};
use crate::shaping_code::ShapingCode;
use crate::transmitter::Link;

/// Everything the optimizer may move.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainableParams {
    /// Unnormalized points, `[re, im]` interleaved.
    pub raw_points: Vec<f64>,
    /// `p0 = logistic(p0_logit)`.
    pub p0_logit: f64,
    pub demapper: Option<NeuralDemapper>,
}

pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

impl TrainableParams {
    pub fn new(c: &Constellation, p0: f64, demapper: Option<NeuralDemapper>) -> Self {
        Self { raw_points: c.to_reals(), p0_logit: logit(p0), demapper }
    }

    pub fn m(&self) -> usize {
        (self.raw_points.len() / 2).trailing_zeros() as usize
    }

    pub fn p0(&self) -> f64 {
        crate::llr::sigmoid(self.p0_logit)
    }

    pub fn len(&self) -> usize {
        self.raw_points.len() + 1 + self.demapper.as_ref().map_or(0, |d| d.params().len())
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// `[raw_points, p0_logit, demapper...]`.
    pub fn flatten(&self) -> Vec<f64> {
        let mut v = self.raw_points.clone();
        v.push(self.p0_logit);
        if let Some(d) = &self.demapper {
            v.extend(d.params());
        }
        v
    }

    pub fn set_flat(&mut self, flat: &[f64]) {
        let n = self.raw_points.len();
        self.raw_points.copy_from_slice(&flat[..n]);
        self.p0_logit = flat[n];
        if let Some(d) = &mut self.demapper {
            d.set_params(&flat[n + 1..]);
        }
    }

    /// Symbol probabilities for the shaped positions in `mask`.
    pub fn distribution(&self, mask: &[bool]) -> Vec<f64> {
        bit_product_distribution(self.m(), mask, self.p0())
    }

    /// Points scaled to unit energy under the current distribution.
    pub fn constellation(&self, mask: &[bool]) -> Result<Constellation> {
        let raw = Constellation::from_reals(&self.raw_points)?;
        let dist = crate::constellation::SymbolDistribution { prob: self.distribution(mask) };
        crate::constellation::normalize(raw.points(), &dist)
    }

    fn layout(&self) -> ParamLayout {
        let n = self.raw_points.len();
        let mut layers = Vec::new();
        let mut off = n + 1;
        if let Some(d) = &self.demapper {
            for l in &d.layers {
                let w = off..off + l.weights.len();
                off = w.end;
                let b = off..off + l.bias.len();
                off = b.end;
                layers.push((w, b, l.inputs, l.outputs));
            }
        }
        ParamLayout { points: 0..n, p0: n, layers }
    }
}

struct ParamLayout {
    points: Range<usize>,
    p0: usize,
    layers: Vec<(Range<usize>, Range<usize>, usize, usize)>,
}

/// How batch rows are weighted in the BCE term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weighting {
    /// `P(x_j) / count(x_j)`: an exact expectation over the symbol
    /// distribution whatever the per-symbol counts.
    Probability,
    /// `1 / B`, for batches drawn from the actual distribution.
    Uniform,
}

/// Channel realizations of a batch.
#[derive(Debug, Clone, PartialEq)]
pub enum BatchChannel {
    /// `y = x + noise`.
    Awgn { noise: Vec<Complex64> },
    /// LMMSE-equalized: `y_eq = gain x + noise`.
    Equalized { gain: Vec<Complex64>, noise: Vec<Complex64>, h_hat: Vec<Complex64>, rho: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub labels: Vec<usize>,
    pub ebn0_db: Vec<f64>,
    pub n0: Vec<f64>,
    pub channel: BatchChannel,
    pub weighting: Weighting,
}

/// Eb/N0 values spread evenly over `[lo, hi]`.
pub fn spread(range: [f64; 2], count: usize) -> Vec<f64> {
    if count <= 1 {
        return vec![range[0]; count];
    }
    (0..count).map(|j| range[0] + (range[1] - range[0]) * j as f64 / (count - 1) as f64).collect()
}

impl Batch {
    /// `size` symbols cycling through all labels, Eb/N0 spread over
    /// `ebn0_db`, fresh channel draws from `rng`.
    pub fn draw(m: usize, size: usize, ebn0_db: [f64; 2], rate: f64, channel: &ChannelModel, rng: &mut Rng) -> Result<Self> {
        let labels: Vec<usize> = (0..size).map(|j| j % (1 << m)).collect();
        let ebn0 = spread(ebn0_db, size);
        let n0: Vec<f64> = ebn0.iter().map(|&e| ebn0_to_n0(e, rate)).collect();
        let channel = match channel {
            ChannelModel::Awgn => BatchChannel::Awgn { noise: n0.iter().map(|&v| complex_gaussian(rng, v)).collect() },
            ChannelModel::Fading(cfg) => fading_draws(cfg, &n0, rng)?,
        };
        Ok(Self { labels, ebn0_db: ebn0, n0, channel, weighting: Weighting::Probability })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// One independent block per batch item: pilots, estimate, one data symbol.
fn fading_draws(cfg: &BlockFadingConfig, n0: &[f64], rng: &mut Rng) -> Result<BatchChannel> {
    cfg.validate()?;
    let (mut gain, mut noise, mut h_hat, mut rho) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for &v in n0 {
        let h = channel::rician_coefficient(cfg.k_factor, rng);
        let yp: Vec<Complex64> = (0..cfg.n_p).map(|_| h * PILOT + complex_gaussian(rng, v)).collect();
        let hh = match cfg.csi {
            CsiMode::Perfect => h,
            CsiMode::Estimated => channel::lmmse_estimate(&yp, &vec![PILOT; cfg.n_p], v)?,
        };
        let n = complex_gaussian(rng, v);
        let den = hh.norm_sqr() + v;
        if den == 0.0 {
            return Err(Error::UndefinedEqualizer);
        }
        gain.push(h * hh.conj() / den);
        noise.push(n * hh.conj() / den);
        h_hat.push(hh);
        rho.push(hh.norm_sqr() / den);
    }
    Ok(BatchChannel::Equalized { gain, noise, h_hat, rho })
}

fn reals(v: &[Complex64]) -> Vec<f64> {
    v.iter().flat_map(|c| [c.re, c.im]).collect()
}

fn symbol_coords(labels: &[usize]) -> Arc<Vec<usize>> {
    Arc::new(labels.iter().flat_map(|&l| [2 * l, 2 * l + 1]).collect())
}

fn label_bits(labels: &[usize], m: usize) -> Vec<u8> {
    labels.iter().flat_map(|&l| (0..m).map(move |k| label_bit(l, k, m))).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossParts {
    pub loss: f64,
    /// Weighted BCE in bits.
    pub bce: f64,
    /// Symbol entropy in bits.
    pub entropy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub parts: LossParts,
    /// Per-iteration BCE (IDD only).
    pub per_iter: Vec<f64>,
    /// Gradient with respect to [`TrainableParams::flatten`].
    pub grads: Vec<f64>,
}

/// Neural demapper forward pass on the tape; `y_eq` interleaved.
fn neural_graph(t: &mut Tape, theta: Var, lay: &ParamLayout, spec: FeatureSpec, y_eq: Var, side: &[Vec<f64>]) -> Var {
    let rows = side.len();
    let d = spec.dim();
    let consts: Vec<f64> = side.concat();
    let c = t.leaf(consts);
    let both = t.concat(&[y_eq, c]);
    let mut idx = Vec::with_capacity(rows * d);
    for j in 0..rows {
        idx.extend([2 * j, 2 * j + 1]);
        idx.extend((0..d - 2).map(|q| 2 * rows + j * (d - 2) + q));
    }
    let mut h = t.gather(both, Arc::new(idx));
    let last = lay.layers.len() - 1;
    for (i, (w, b, inputs, outputs)) in lay.layers.iter().enumerate() {
        let wv = t.slice(theta, w.clone());
        let bv = t.slice(theta, b.clone());
        h = t.apply(Affine { inputs: *inputs, outputs: *outputs }, &[wv, bv, h]);
        h = if i < last { t.relu(h) } else { t.clip(h) };
    }
    h
}

/// Non-IDD loss `BCE - H` in bits, with gradients for every parameter.
/// `mask` marks the shaped label bits.
pub fn loss_non_idd(params: &TrainableParams, mask: &[bool], batch: &Batch) -> Result<Evaluation> {
    let m = params.m();
    if mask.len() != m {
        return Err(Error::LengthMismatch { expected: m, actual: mask.len() });
    }
    let lay = params.layout();
    let b = batch.len();
    let mut t = Tape::new();
    let theta = t.leaf(params.flatten());
    let raw = t.slice(theta, lay.points.clone());
    let lg = t.slice(theta, lay.p0..lay.p0 + 1);
    let p0 = t.logistic(lg);
    let prob = t.apply(SymbolDist { m, shaped: mask.to_vec() }, &[p0]);
    let pts = t.apply(Normalize, &[raw, prob]);
    let x = t.gather(pts, symbol_coords(&batch.labels));

    let post = match (&params.demapper, &batch.channel) {
        (None, ch) => {
            let (y, n0) = match ch {
                BatchChannel::Awgn { noise } => (t.add_const(x, reals(noise)), batch.n0.clone()),
                BatchChannel::Equalized { gain, noise, rho, .. } => {
                    let g: Vec<Complex64> = gain.iter().zip(rho).map(|(a, r)| a / r).collect();
                    let w: Vec<Complex64> = noise.iter().zip(rho).map(|(a, r)| a / r).collect();
                    let gx = t.apply(ComplexMulConst(g), &[x]);
                    (t.add_const(gx, reals(&w)), rho.iter().map(|r| (1.0 - r) / r).collect())
                }
            };
            let n0 = t.leaf(n0);
            // Shaped a priori ln((1 - p0) / p0) = -logit.
            let neg = t.scale(lg, -1.0);
            let zero = t.leaf(vec![0.0]);
            let src = t.concat(&[neg, zero]);
            let idx: Vec<usize> = (0..b).flat_map(|_| mask.iter().map(|&s| usize::from(!s))).collect();
            let la = t.gather(src, Arc::new(idx));
            let ext = t.apply(MapDemap, &[pts, y, n0, la]);
            t.add(ext, la)
        }
        (Some(nd), ch) => {
            let spec = nd.features;
            let (y_eq, h_hat, rho) = match ch {
                BatchChannel::Awgn { noise } => {
                    // AWGN is the perfect-CSI case with h = 1.
                    let g: Vec<Complex64> = batch.n0.iter().map(|v| Complex64::new(1.0 / (1.0 + v), 0.0)).collect();
                    let w: Vec<Complex64> = noise.iter().zip(&batch.n0).map(|(a, v)| a / (1.0 + v)).collect();
                    let gx = t.apply(ComplexMulConst(g), &[x]);
                    let rho = batch.n0.iter().map(|v| 1.0 / (1.0 + v)).collect();
                    (t.add_const(gx, reals(&w)), vec![Complex64::new(1.0, 0.0); b], rho)
                }
                BatchChannel::Equalized { gain, noise, h_hat, rho } => {
                    let gx = t.apply(ComplexMulConst(gain.clone()), &[x]);
                    (t.add_const(gx, reals(noise)), h_hat.clone(), rho.clone())
                }
            };
            let side: Vec<Vec<f64>> = (0..b)
                .map(|j| match spec {
                    FeatureSpec::ChannelEstimate => vec![h_hat[j].re, h_hat[j].im, batch.ebn0_db[j]],
                    FeatureSpec::Rho => vec![rho[j], batch.ebn0_db[j]],
                })
                .collect();
            neural_graph(&mut t, theta, &lay, spec, y_eq, &side)
        }
    };

    let w = match batch.weighting {
        Weighting::Probability => {
            let mut count = vec![0usize; 1 << m];
            batch.labels.iter().for_each(|&l| count[l] += 1);
            let pw = t.gather(prob, Arc::new(batch.labels.clone()));
            t.mul_const(pw, batch.labels.iter().map(|&l| 1.0 / count[l] as f64).collect())
        }
        Weighting::Uniform => t.leaf(vec![1.0 / b as f64; b]),
    };
    let bce = t.apply(Bce { bits: Arc::new(label_bits(&batch.labels, m)), width: m }, &[post, w]);
    let ent = t.apply(Entropy, &[prob]);
    let loss = t.sub(bce, ent);
    let g = t.backward(loss);
    Ok(Evaluation {
        parts: LossParts { loss: t.scalar(loss), bce: t.scalar(bce), entropy: t.scalar(ent) },
        per_iter: Vec::new(),
        grads: g.wrt(theta),
    })
}

/// Frames for one IDD training step.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameBatch {
    pub frames: usize,
    /// Labels of all frames, frame-major.
    pub labels: Vec<usize>,
    /// Mapper bits `z` of all frames.
    pub z: Vec<u8>,
    pub ebn0_db: Vec<f64>,
    /// Per symbol.
    pub n0: Vec<f64>,
    /// Per symbol, already scaled.
    pub noise: Vec<Complex64>,
}

impl FrameBatch {
    /// Random frames from `link`; frame `f` uses the substreams
    /// `(seed, [step, f, 0])` for bits and `(seed, [step, f, 1])` for noise.
    pub fn draw(link: &Link, frames: usize, ebn0_db: [f64; 2], seed: u64, step: u64) -> Result<Self> {
        let rate = link.cfg().info_rate();
        let mut out = Self { frames, labels: Vec::new(), z: Vec::new(), ebn0_db: spread(ebn0_db, frames), n0: Vec::new(), noise: Vec::new() };
        for f in 0..frames {
            let mut msg = substream(seed, &[step, f as u64, 0]);
            let mut noise = substream(seed, &[step, f as u64, 1]);
            let fr = link.transmit(&link.random_message(&mut msg))?;
            let n0 = ebn0_to_n0(out.ebn0_db[f], rate);
            out.noise.extend(fr.labels.iter().map(|_| complex_gaussian(&mut noise, n0)));
            out.n0.extend(std::iter::repeat_n(n0, fr.labels.len()));
            out.labels.extend(fr.labels);
            out.z.extend(fr.z);
        }
        Ok(out)
    }

    /// The same symbols and noise as a plain symbol batch.
    pub fn as_symbol_batch(&self) -> Batch {
        let per = self.labels.len() / self.frames.max(1);
        Batch {
            labels: self.labels.clone(),
            ebn0_db: (0..self.labels.len()).map(|j| self.ebn0_db[j / per]).collect(),
            n0: self.n0.clone(),
            channel: BatchChannel::Awgn { noise: self.noise.clone() },
            weighting: Weighting::Uniform,
        }
    }
}

/// Offsets a per-frame index map into a frame-major batch.
fn tile(local: &[usize], frames: usize, stride: usize) -> Vec<usize> {
    (0..frames).flat_map(|f| local.iter().map(move |&q| f * stride + q)).collect()
}

/// Like [`tile`] for indices into a per-frame concatenation `[a, b]` whose
/// batched source is `[a_all, b_all]`.
fn tile_pair(local: &[usize], frames: usize, len_a: usize, len_b: usize) -> Vec<usize> {
    (0..frames)
        .flat_map(|f| {
            local.iter().map(move |&q| if q < len_a { f * len_a + q } else { frames * len_a + f * len_b + (q - len_a) })
        })
        .collect()
}

/// The unfolded IDD receiver for one link, with the mapper a priori
/// schedule of [`crate::receiver::Receiver::idd`] and one BP iteration per
/// outer iteration.
pub struct IddProblem {
    m: usize,
    outer_iters: usize,
    shaped_prior: ShapedPrior,
    warm_start: bool,
    graph: Arc<TannerGraph>,
    shaping: Arc<ShapingCode>,
    prob: Vec<f64>,
    static_z: Vec<f64>,
    static_c: Vec<f64>,
    z_of_c: Vec<usize>,
    z_of_s: Vec<usize>,
    u_of_ds: Vec<usize>,
    d_of_u: Vec<usize>,
    s_of_u: Vec<usize>,
    cs_of_z: Vec<usize>,
    lens: (usize, usize, usize, usize, usize),
}

impl IddProblem {
    pub fn new(link: &Link, outer_iters: usize, shaped_prior: ShapedPrior, warm_start: bool) -> Result<Self> {
        if outer_iters == 0 {
            return Err(Error::Config("outer_iters must be >= 1".into()));
        }
        let lay = &link.layout;
        let cfg = lay.cfg.clone();
        let m = cfg.m;
        let (static_z, mask) = match link.spec() {
            Some(s) => (apriori_init(&s, m, cfg.symbols()), s.mask(m)),
            None => (vec![0.0; cfg.mapper_bits()], vec![false; m]),
        };
        let static_c = lay.split_z(&static_z).0;
        let (d_len, n) = (cfg.d_len(), cfg.n);
        let ids: Vec<usize> = (0..n).collect();
        let (d_of_u, s_of_u) = lay.ds_from_u(&ids);
        Ok(Self {
            m,
            outer_iters,
            shaped_prior,
            warm_start,
            graph: Arc::new(link.graph.clone()),
            shaping: Arc::new(link.shaping.clone()),
            prob: bit_product_distribution(m, &mask, link.shaping.p0()),
            static_z,
            static_c,
            z_of_c: lay.z_of_c(),
            z_of_s: lay.z_of_s.clone(),
            u_of_ds: lay.u_from_ds(&ids[..d_len], &ids[d_len..]),
            d_of_u,
            s_of_u,
            cs_of_z: lay.cs_of_z(),
            lens: (cfg.mapper_bits(), cfg.c_len(), cfg.s_len(), d_len, n),
        })
    }

    pub fn outer_iters(&self) -> usize {
        self.outer_iters
    }

    /// Symbol probabilities used for the energy constraint.
    pub fn distribution(&self) -> &[f64] {
        &self.prob
    }

    /// `sum_i mean BCE(demapper posterior at pass i)` in bits; gradients
    /// with respect to the raw points only.
    pub fn loss(&self, params: &TrainableParams, batch: &FrameBatch) -> Result<Evaluation> {
        let m = self.m;
        let (z_len, c_len, s_len, d_len, n) = self.lens;
        let fr = batch.frames;
        let syms = batch.labels.len();
        if syms * m != fr * z_len || batch.z.len() != fr * z_len {
            return Err(Error::LengthMismatch { expected: fr * z_len, actual: batch.z.len() });
        }
        let lay = params.layout();
        let mut t = Tape::new();
        let theta = t.leaf(params.flatten());
        let raw = t.slice(theta, lay.points.clone());
        let prob = t.leaf(self.prob.clone());
        let pts = t.apply(Normalize, &[raw, prob]);
        let x = t.gather(pts, symbol_coords(&batch.labels));
        let y = t.add_const(x, reals(&batch.noise));
        let n0 = t.leaf(batch.n0.clone());
        let w = t.leaf(vec![1.0 / syms as f64; syms]);
        let bits = Arc::new(batch.z.clone());

        let c_idx = Arc::new(tile(&self.z_of_c, fr, z_len));
        let s_idx = Arc::new(tile(&self.z_of_s, fr, z_len));
        let u_idx = Arc::new(tile_pair(&self.u_of_ds, fr, d_len, s_len));
        let d_idx = Arc::new(tile(&self.d_of_u, fr, n));
        let su_idx = Arc::new(tile(&self.s_of_u, fr, n));
        let z_idx = Arc::new(tile_pair(&self.cs_of_z, fr, c_len, s_len));
        let static_c: Vec<f64> = self.static_c.repeat(fr);
        let edges = self.graph.edges();
        let fresh = self.graph.initial_state().c2v.repeat(fr);

        let mut la_z = t.leaf(self.static_z.repeat(fr));
        let mut la_d = t.leaf(vec![0.0; fr * d_len]);
        let mut c2v = t.leaf(fresh.clone());
        let mut terms = Vec::with_capacity(self.outer_iters);
        for i in 0..self.outer_iters {
            let ext = t.apply(MapDemap, &[pts, y, n0, la_z]);
            let post = t.add(ext, la_z);
            terms.push(t.apply(Bce { bits: bits.clone(), width: m }, &[post, w]));
            if i + 1 == self.outer_iters {
                break;
            }
            let la_c = t.gather(ext, c_idx.clone());
            let la_s = t.gather(ext, s_idx.clone());
            let le_d = if d_len > 0 {
                t.apply(ShapeDecode { code: self.shaping.clone(), input: true }, &[la_c, la_d])
            } else {
                t.leaf(Vec::new())
            };
            let ds = t.concat(&[le_d, la_s]);
            let la_u = t.gather(ds, u_idx.clone());
            if !self.warm_start {
                c2v = t.leaf(fresh.clone());
            }
            let out = t.apply(BpIterate { graph: self.graph.clone(), frames: fr }, &[c2v, la_u]);
            c2v = t.slice(out, 0..fr * edges);
            let l_fec = t.slice(out, fr * edges..fr * (edges + n));
            let diff = t.sub(l_fec, la_u);
            let le_u = t.clip(diff);
            la_d = t.gather(le_u, d_idx.clone());
            let next_s = t.gather(le_u, su_idx.clone());
            let mut le_c = if d_len > 0 {
                t.apply(ShapeDecode { code: self.shaping.clone(), input: false }, &[la_c, la_d])
            } else {
                t.leaf(Vec::new())
            };
            if self.shaped_prior == ShapedPrior::ReplacePlusStatic {
                let shifted = t.add_const(le_c, static_c.clone());
                le_c = t.clip(shifted);
            }
            let cs = t.concat(&[le_c, next_s]);
            la_z = t.gather(cs, z_idx.clone());
        }
        let total = t.concat(&terms);
        let loss = t.sum(total);
        let g = t.backward(loss);
        let per_iter = t.value(total).to_vec();
        let mut grads = g.wrt(theta);
        grads[lay.p0] = 0.0;
        let l = t.scalar(loss);
        Ok(Evaluation { parts: LossParts { loss: l, bce: l, entropy: 0.0 }, per_iter, grads })
    }
}
