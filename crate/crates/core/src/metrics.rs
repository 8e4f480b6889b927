//! Capacity estimates, SNR gap to Gaussian capacity, and the Monte-Carlo
//! BER harness.

use num_complex::Complex64;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{self, complex_gaussian, ebn0_to_n0, BlockFadingConfig, EqualizedSymbol};
use crate::constellation::{Constellation, SymbolDistribution};
use crate::demap::{MapDemapper, NeuralDemapper};
use crate::error::{Error, Result};
use crate::llr;
use crate::receiver::{Demapper, Observation, Receiver, ReceiverConfig};
use crate::rng::{self, substream};
use crate::transmitter::Link;

/// Monte-Carlo samples per parallel work unit. Fixed so that results do not
/// depend on the thread count.
const CHUNK: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CapacityEstimate {
    pub bits: f64,
    pub stderr: f64,
    pub samples: usize,
}

/// `log2(1 + snr)`.
pub fn gaussian_capacity(snr: f64) -> f64 {
    (1.0 + snr).log2()
}

/// Pre-drawn symbol indices and unit-variance noise, so that capacity can be
/// evaluated at many SNRs with common random numbers.
struct CapacitySamples {
    symbols: Vec<usize>,
    weights: Vec<f64>,
    noise: Vec<Complex64>,
}

impl CapacitySamples {
    /// Stratified draw: sample `i` uses symbol `i mod M`, weighted by
    /// `M P(x)`, so every point is visited equally often.
    fn draw(dist: &SymbolDistribution, samples: usize, seed: u64) -> Self {
        let size = dist.len();
        let symbols: Vec<usize> = (0..samples).map(|i| i % size).collect();
        let weights = symbols.iter().map(|&j| size as f64 * dist.prob[j]).collect();
        let noise = (0..samples.div_ceil(CHUNK))
            .into_par_iter()
            .flat_map_iter(|c| {
                let mut r = substream(seed, &[c as u64]);
                let len = CHUNK.min(samples - c * CHUNK);
                (0..len).map(move |_| complex_gaussian(&mut r, 1.0)).collect::<Vec<_>>()
            })
            .collect();
        Self { symbols, weights, noise }
    }

    fn evaluate(&self, c: &Constellation, dist: &SymbolDistribution, n0: f64) -> CapacityEstimate {
        let m = c.m();
        let demap = MapDemapper::new(c).with_symbol_prior(&dist.prob);
        let h_bits: f64 = (0..m).map(|k| llr::binary_entropy(dist.bit_one_probability(k, m))).sum();
        let sigma = n0.sqrt();
        let n = self.symbols.len();
        let partial: Vec<(f64, f64)> = (0..n.div_ceil(CHUNK))
            .into_par_iter()
            .map(|ch| {
                let r = ch * CHUNK..((ch + 1) * CHUNK).min(n);
                let y: Vec<Complex64> = r.clone().map(|i| c.points()[self.symbols[i]] + self.noise[i] * sigma).collect();
                let post = demap.posterior(&y, &[n0], &vec![0.0; y.len() * m]);
                let (mut s, mut s2) = (0.0, 0.0);
                for (t, i) in r.enumerate() {
                    let ce: f64 = (0..m).map(|k| llr::bce(post[t * m + k], c.bit(self.symbols[i], k))).sum();
                    let f = self.weights[i] * (h_bits - ce / std::f64::consts::LN_2);
                    s += f;
                    s2 += f * f;
                }
                (s, s2)
            })
            .collect();
        let (s, s2) = partial.iter().fold((0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
        let mean = s / n as f64;
        let var = (s2 / n as f64 - mean * mean).max(0.0);
        CapacityEstimate { bits: mean, stderr: (var / n as f64).sqrt(), samples: n }
    }
}

/// Monte-Carlo BICM capacity `sum_k I(B_k; Y)` over AWGN with `X ~ dist`,
/// from exact MAP bit posteriors: `I(B_k;Y) = H(B_k) - E[-log2 P(b_k | y)]`.
pub fn bicm_capacity(c: &Constellation, dist: &SymbolDistribution, n0: f64, samples: usize, seed: u64) -> CapacityEstimate {
    CapacitySamples::draw(dist, samples, seed).evaluate(c, dist, n0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapEstimate {
    pub gap_db: f64,
    /// SNR (Es/N0) where the BICM capacity reaches the target.
    pub snr_db: f64,
    /// SNR where Gaussian capacity reaches the target.
    pub shannon_snr_db: f64,
}

/// SNR gap (dB) between BICM capacity and Gaussian capacity at rate
/// `r_target`, by bisection in dB on common random numbers.
pub fn gap_to_capacity(c: &Constellation, dist: &SymbolDistribution, r_target: f64, samples: usize, seed: u64) -> Result<GapEstimate> {
    if !(r_target > 0.0) || r_target >= c.m() as f64 {
        return Err(Error::Saturation { target: r_target, reached: c.m() as f64 });
    }
    let draws = CapacitySamples::draw(dist, samples, seed);
    let cap = |snr_db: f64| draws.evaluate(c, dist, 10f64.powf(-snr_db / 10.0)).bits;
    let (mut lo, mut hi) = (-10.0, 40.0);
    let top = cap(hi);
    if top < r_target {
        return Err(Error::Saturation { target: r_target, reached: top });
    }
    while hi - lo > 1e-4 {
        let mid = 0.5 * (lo + hi);
        if cap(mid) < r_target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let snr_db = 0.5 * (lo + hi);
    let shannon_snr_db = 10.0 * (2f64.powf(r_target) - 1.0).log10();
    Ok(GapEstimate { gap_db: snr_db - shannon_snr_db, snr_db, shannon_snr_db })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CapacityPoint {
    pub snr_db: f64,
    pub capacity_bits: f64,
    pub stderr: f64,
}

/// Capacity over an SNR grid with shared random numbers.
pub fn capacity_curve(c: &Constellation, dist: &SymbolDistribution, snr_db: &[f64], samples: usize, seed: u64) -> Vec<CapacityPoint> {
    let draws = CapacitySamples::draw(dist, samples, seed);
    snr_db
        .iter()
        .map(|&s| {
            let e = draws.evaluate(c, dist, 10f64.powf(-s / 10.0));
            CapacityPoint { snr_db: s, capacity_bits: e.bits, stderr: e.stderr }
        })
        .collect()
}

pub fn capacity_csv(points: &[CapacityPoint]) -> String {
    let mut s = String::from("snr_db,capacity_bits,stderr\n");
    for p in points {
        s.push_str(&format!("{},{},{}\n", p.snr_db, p.capacity_bits, p.stderr));
    }
    s
}

/// Errors counted on one simulated frame.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct FrameOutcome {
    pub bit_errors: u64,
    pub bits: u64,
}

/// Anything that can simulate independent frames at a given Eb/N0. Frame
/// randomness must come only from `(seed, point, frame)`.
pub trait FrameSimulator: Sync {
    fn simulate(&self, ebn0_db: f64, seed: u64, point: u64, frame: u64) -> Result<FrameOutcome>;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StopRule {
    pub min_errors: u64,
    pub max_bits: u64,
    /// Frames simulated between stop checks.
    pub chunk_frames: u64,
}

impl Default for StopRule {
    fn default() -> Self {
        Self { min_errors: 100, max_bits: 100_000_000, chunk_frames: 32 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BerPoint {
    pub eb_n0_db: f64,
    pub bit_errors: u64,
    pub bits: u64,
    pub frame_errors: u64,
    pub frames: u64,
    pub ber: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// Fewer than 20 errors: the normal-approximation interval is unreliable.
    pub low_confidence: bool,
}

impl BerPoint {
    pub fn new(eb_n0_db: f64, bit_errors: u64, bits: u64, frame_errors: u64, frames: u64) -> Self {
        let ber = if bits > 0 { bit_errors as f64 / bits as f64 } else { 0.0 };
        let half = 1.96 * (ber * (1.0 - ber) / bits.max(1) as f64).sqrt();
        Self {
            eb_n0_db,
            bit_errors,
            bits,
            frame_errors,
            frames,
            ber,
            ci_low: (ber - half).max(0.0),
            ci_high: (ber + half).min(1.0),
            low_confidence: bit_errors < 20,
        }
    }

    /// Half-width of the 95% interval.
    pub fn half_width(&self) -> f64 {
        1.96 * (self.ber * (1.0 - self.ber) / self.bits.max(1) as f64).sqrt()
    }
}

/// Simulates every Eb/N0 point until `min_errors` bit errors or `max_bits`
/// bits. Frames run in parallel in fixed-size chunks and are accumulated in
/// frame order, so the counts do not depend on the thread count.
pub fn ber_sweep(sim: &dyn FrameSimulator, ebn0_db: &[f64], stop: &StopRule, seed: u64) -> Result<Vec<BerPoint>> {
    let mut out = Vec::with_capacity(ebn0_db.len());
    for (pi, &e) in ebn0_db.iter().enumerate() {
        let (mut errs, mut bits, mut ferrs, mut frames) = (0u64, 0u64, 0u64, 0u64);
        while errs < stop.min_errors && bits < stop.max_bits {
            let start = frames;
            let outcomes: Vec<Result<FrameOutcome>> = (start..start + stop.chunk_frames.max(1))
                .into_par_iter()
                .map(|f| sim.simulate(e, seed, pi as u64, f))
                .collect();
            for o in outcomes {
                let o = o?;
                errs += o.bit_errors;
                bits += o.bits;
                ferrs += u64::from(o.bit_errors > 0);
                frames += 1;
            }
        }
        out.push(BerPoint::new(e, errs, bits, ferrs, frames));
    }
    Ok(out)
}

pub fn ber_csv(points: &[BerPoint]) -> String {
    let mut s = String::from("eb_n0_db,ber,ci_low,ci_high,bits,errors,frames,frame_errors,low_confidence\n");
    for p in points {
        s.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            p.eb_n0_db, p.ber, p.ci_low, p.ci_high, p.bits, p.bit_errors, p.frames, p.frame_errors, p.low_confidence
        ));
    }
    s
}

/// Uncoded BPSK over AWGN, for harness validation.
pub struct UncodedBpsk {
    pub bits_per_frame: usize,
}

impl FrameSimulator for UncodedBpsk {
    fn simulate(&self, ebn0_db: f64, seed: u64, point: u64, frame: u64) -> Result<FrameOutcome> {
        let n0 = ebn0_to_n0(ebn0_db, 1.0);
        let mut r = substream(seed, &[point, frame]);
        let mut errs = 0;
        for _ in 0..self.bits_per_frame {
            let b: u8 = r.random_range(0..2);
            let x = if b == 1 { -1.0 } else { 1.0 };
            let y = x + complex_gaussian(&mut r, n0).re;
            errs += u64::from((y < 0.0) as u8 != b);
        }
        Ok(FrameOutcome { bit_errors: errs, bits: self.bits_per_frame as u64 })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ChannelModel {
    Awgn,
    Fading(BlockFadingConfig),
}

/// A full link (transmitter, channel, receiver) as a frame simulator.
///
/// Message bits and channel noise come from separate substreams of
/// `(seed, point, frame)`, so two systems simulated with the same seed see
/// the same noise realizations (paired comparison).
pub struct LinkSimulator {
    pub link: Link,
    pub receiver: ReceiverConfig,
    pub channel: ChannelModel,
    pub demapper: Demapper,
}

impl LinkSimulator {
    pub fn map(link: Link, receiver: ReceiverConfig, channel: ChannelModel) -> Self {
        let demapper = Demapper::Map(MapDemapper::new(&link.constellation));
        Self { link, receiver, channel, demapper }
    }

    pub fn observe(&self, x: &[Complex64], ebn0_db: f64, noise: &mut rng::Rng) -> Result<Observation> {
        let n0 = ebn0_to_n0(ebn0_db, self.link.cfg().info_rate());
        match &self.channel {
            ChannelModel::Awgn => {
                let y = channel::awgn(x, n0, noise);
                match &self.demapper {
                    Demapper::Map(_) => Ok(Observation::awgn(y, n0)),
                    // The neural demapper sees AWGN as perfect CSI with h = 1.
                    Demapper::Neural(nd) => {
                        let one = Complex64::new(1.0, 0.0);
                        let eq = y.iter().map(|&v| channel::lmmse_equalize(v, one, n0)).collect::<Result<Vec<_>>>()?;
                        let mut obs = Observation::awgn(y, n0);
                        obs.features = Some(Self::features(nd, &eq, &vec![one; eq.len()], ebn0_db));
                        Ok(obs)
                    }
                }
            }
            ChannelModel::Fading(cfg) => {
                let tx = cfg.insert_pilots(x);
                let (y, h) = channel::rician_block_fading(&tx, cfg, n0, noise);
                let (eq, h_hat) = channel::equalize_blocks(&y, &h, cfg, n0)?;
                let mut obs = Observation::equalized(&eq);
                if let Demapper::Neural(nd) = &self.demapper {
                    obs.features = Some(Self::features(nd, &eq, &h_hat, ebn0_db));
                }
                Ok(obs)
            }
        }
    }

    fn features(nd: &NeuralDemapper, eq: &[EqualizedSymbol], h_hat: &[Complex64], ebn0_db: f64) -> Vec<f64> {
        let mut f = Vec::with_capacity(eq.len() * nd.features.dim());
        for (e, hh) in eq.iter().zip(h_hat) {
            nd.features.push(e, *hh, ebn0_db, &mut f);
        }
        f
    }
}

impl FrameSimulator for LinkSimulator {
    fn simulate(&self, ebn0_db: f64, seed: u64, point: u64, frame: u64) -> Result<FrameOutcome> {
        let mut msg = substream(seed, &[point, frame, 0]);
        let mut noise = substream(seed, &[point, frame, 1]);
        let f = self.link.transmit(&self.link.random_message(&mut msg))?;
        let obs = self.observe(&f.x, ebn0_db, &mut noise)?;
        let out = Receiver::new(&self.link, self.receiver.clone()).receive(&obs, &self.demapper, None)?;
        let errs = out.b_hat.iter().zip(&f.b).filter(|(a, b)| a != b).count();
        Ok(FrameOutcome { bit_errors: errs as u64, bits: f.b.len() as u64 })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constellation::{make_apsk32, make_qam32, symbol_distribution, ShapingSpec};
    use statrs::distribution::{ContinuousCDF, Normal};

    fn bpsk() -> Constellation {
        Constellation::new(vec![Complex64::new(1.0, 0.0), Complex64::new(-1.0, 0.0)]).unwrap()
    }

    #[test]
    fn gaussian_capacity_values() {
        assert_eq!(gaussian_capacity(1.0), 1.0);
        assert_eq!(gaussian_capacity(3.0), 2.0);
        assert_eq!(gaussian_capacity(7.0), 3.0);
    }

    #[test]
    fn bpsk_capacity_limits() {
        let d = SymbolDistribution::uniform(2);
        let hi = bicm_capacity(&bpsk(), &d, 1e-3, 20_000, 1);
        assert!((hi.bits - 1.0).abs() < 0.01);
        let lo = bicm_capacity(&bpsk(), &d, 1e4, 20_000, 1);
        assert!(lo.bits.abs() < 0.01);
    }

    /// Real BPSK mutual information by numerical integration.
    fn bpsk_mi(snr_per_dim: f64) -> f64 {
        // y = x + n, n ~ N(0, 1 / (2 snr)).
        let var = 1.0 / (2.0 * snr_per_dim);
        let sd = var.sqrt();
        let steps = 20_000;
        let (a, b) = (-1.0 - 10.0 * sd, 1.0 + 10.0 * sd);
        let h = (b - a) / steps as f64;
        let pdf = |y: f64, x: f64| (-(y - x).powi(2) / (2.0 * var)).exp() / (2.0 * std::f64::consts::PI * var).sqrt();
        let mut acc = 0.0;
        for i in 0..=steps {
            let y = a + i as f64 * h;
            let p1 = pdf(y, 1.0);
            let pm = pdf(y, -1.0);
            let py = 0.5 * (p1 + pm);
            let mut f = 0.0;
            if p1 > 0.0 {
                f += 0.5 * p1 * (p1 / py).log2();
            }
            if pm > 0.0 {
                f += 0.5 * pm * (pm / py).log2();
            }
            let w = if i == 0 || i == steps { 0.5 } else { 1.0 };
            acc += w * f * h;
        }
        acc
    }

    #[test]
    fn gray_qpsk_is_two_bpsk_channels() {
        // Es/N0 = 0 dB, unit-energy Gray QPSK: each dimension carries
        // amplitude 1/sqrt(2) with noise variance 1/2, i.e. per-dimension
        // SNR 1.
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let qpsk = Constellation::new(vec![
            Complex64::new(s, s),
            Complex64::new(s, -s),
            Complex64::new(-s, s),
            Complex64::new(-s, -s),
        ])
        .unwrap();
        let est = bicm_capacity(&qpsk, &SymbolDistribution::uniform(4), 1.0, 400_000, 3);
        let want = 2.0 * bpsk_mi(0.5);
        assert!((est.bits - want).abs() < 4.0 * est.stderr + 1e-3, "{} vs {want} (se {})", est.bits, est.stderr);
    }

    #[test]
    fn capacity_is_bounded_by_entropy_and_m() {
        let spec = ShapingSpec::new(&[0], 0.8).unwrap();
        let d = symbol_distribution(5, &spec).unwrap();
        let h = crate::constellation::entropy(&d);
        for n0 in [1e-3, 0.05, 0.5] {
            let e = bicm_capacity(&make_apsk32(), &d, n0, 20_000, 4);
            assert!(e.bits <= h + 1e-12 && e.bits <= 5.0);
        }
    }

    #[test]
    fn stderr_scales_with_samples() {
        let d = SymbolDistribution::uniform(32);
        let a = bicm_capacity(&make_qam32(), &d, 0.1, 100_000, 5);
        let b = bicm_capacity(&make_qam32(), &d, 0.1, 200_000, 6);
        let ratio = b.stderr / a.stderr;
        assert!((ratio / std::f64::consts::FRAC_1_SQRT_2 - 1.0).abs() < 0.2, "{ratio}");
    }

    #[test]
    fn gap_is_positive_and_reproducible() {
        let d = SymbolDistribution::uniform(32);
        let a = gap_to_capacity(&make_apsk32(), &d, 3.0, 100_000, 7).unwrap();
        let b = gap_to_capacity(&make_apsk32(), &d, 3.0, 100_000, 8).unwrap();
        assert!(a.gap_db > 0.0);
        assert!((a.gap_db - b.gap_db).abs() < 0.05, "{a:?} {b:?}");
        assert!(matches!(gap_to_capacity(&make_apsk32(), &d, 5.0, 1000, 1), Err(Error::Saturation { .. })));
    }

    #[test]
    fn capacity_curve_is_monotone() {
        let d = SymbolDistribution::uniform(32);
        let snr: Vec<f64> = (0..12).map(|i| i as f64 * 2.0).collect();
        let pts = capacity_curve(&make_apsk32(), &d, &snr, 20_000, 9);
        assert!(pts.windows(2).all(|w| w[1].capacity_bits >= w[0].capacity_bits));
        assert!(capacity_csv(&pts).starts_with("snr_db,capacity_bits,stderr\n"));
    }

    fn q(x: f64) -> f64 {
        1.0 - Normal::new(0.0, 1.0).unwrap().cdf(x)
    }

    #[test]
    fn uncoded_bpsk_matches_q_function() {
        let sim = UncodedBpsk { bits_per_frame: 10_000 };
        let grid: Vec<f64> = (0..=8).map(|e| e as f64).collect();
        let stop = StopRule { min_errors: 400, max_bits: 50_000_000, chunk_frames: 16 };
        let pts = ber_sweep(&sim, &grid, &stop, 10).unwrap();
        for p in &pts {
            let want = q((2.0 * 10f64.powf(p.eb_n0_db / 10.0)).sqrt());
            assert!((p.ber - want).abs() <= 3.0 * p.half_width(), "{p:?} vs {want}");
        }
        assert!(pts.windows(2).all(|w| w[1].ber <= w[0].ber));
    }

    #[test]
    fn noiseless_point_has_no_errors() {
        let sim = UncodedBpsk { bits_per_frame: 1000 };
        let stop = StopRule { min_errors: 1, max_bits: 100_000, chunk_frames: 8 };
        let p = ber_sweep(&sim, &[f64::INFINITY], &stop, 1).unwrap();
        assert_eq!((p[0].bit_errors, p[0].ber), (0, 0.0));
        assert!(p[0].low_confidence);
    }

    #[test]
    fn sweep_is_thread_count_independent() {
        let sim = UncodedBpsk { bits_per_frame: 500 };
        let stop = StopRule { min_errors: 50, max_bits: 1_000_000, chunk_frames: 8 };
        let run = |threads| {
            rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(|| ber_sweep(&sim, &[2.0, 4.0], &stop, 3).unwrap())
        };
        assert_eq!(run(1), run(4));
    }
}
