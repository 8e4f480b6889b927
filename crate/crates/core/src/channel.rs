//! AWGN and Rician block-fading channels, pilot-aided LMMSE estimation and
//! equalization.

use num_complex::Complex64;
use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Rng;

/// Known pilot symbol placed at the start of every fading block.
pub const PILOT: Complex64 = Complex64 { re: 1.0, im: 0.0 };

/// Circularly symmetric complex Gaussian sample with variance `var`.
pub fn complex_gaussian(rng: &mut Rng, var: f64) -> Complex64 {
    let s = (var / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re * s, im * s)
}

/// `y = x + n`, `n ~ CN(0, n0)`.
pub fn awgn(x: &[Complex64], n0: f64, rng: &mut Rng) -> Vec<Complex64> {
    assert!(n0 >= 0.0, "negative noise variance");
    x.iter().map(|&xi| xi + complex_gaussian(rng, n0)).collect()
}

/// Noise variance for unit-energy symbols carrying `rate` information bits.
pub fn ebn0_to_n0(ebn0_db: f64, rate: f64) -> f64 {
    1.0 / (rate * 10f64.powf(ebn0_db / 10.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CsiMode {
    Perfect,
    Estimated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlockFadingConfig {
    pub n_bf: usize,
    pub n_p: usize,
    pub k_factor: f64,
    pub csi: CsiMode,
}

impl Default for BlockFadingConfig {
    fn default() -> Self {
        Self { n_bf: 19, n_p: 3, k_factor: 10.0, csi: CsiMode::Estimated }
    }
}

impl BlockFadingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_p >= self.n_bf {
            return Err(Error::Config(format!("channel.n_p = {} must be below channel.n_bf = {}", self.n_p, self.n_bf)));
        }
        if !(self.k_factor >= 0.0) {
            return Err(Error::Config(format!("channel.k_factor = {} must be non-negative", self.k_factor)));
        }
        if self.csi == CsiMode::Estimated && self.n_p == 0 {
            return Err(Error::Config("channel.n_p = 0 with estimated CSI".into()));
        }
        Ok(())
    }

    /// Data symbols per block.
    pub fn data_per_block(&self) -> usize {
        self.n_bf - self.n_p
    }

    /// Transmitted length after pilot insertion for `data` data symbols.
    pub fn transmitted_len(&self, data: usize) -> usize {
        data + data.div_ceil(self.data_per_block()) * self.n_p
    }

    /// Prefixes every block of data symbols with `n_p` pilots. The final
    /// block may be short.
    pub fn insert_pilots(&self, data: &[Complex64]) -> Vec<Complex64> {
        let mut out = Vec::with_capacity(self.transmitted_len(data.len()));
        for chunk in data.chunks(self.data_per_block()) {
            out.extend(std::iter::repeat_n(PILOT, self.n_p));
            out.extend_from_slice(chunk);
        }
        out
    }

    /// Block boundaries `(start, end)` of a transmitted sequence.
    pub fn blocks(&self, len: usize) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..len).step_by(self.n_bf).map(move |s| (s, (s + self.n_bf).min(len)))
    }
}

/// One Rician coefficient with unit mean power.
pub fn rician_coefficient(k_factor: f64, rng: &mut Rng) -> Complex64 {
    if k_factor.is_infinite() {
        return Complex64::new(1.0, 0.0);
    }
    let los = (k_factor / (k_factor + 1.0)).sqrt();
    let scatter = (1.0 / (k_factor + 1.0)).sqrt();
    Complex64::new(los, 0.0) + complex_gaussian(rng, 1.0) * scatter
}

/// Block fading: one coefficient per `n_bf` symbols, then AWGN. Returns the
/// received sequence and the per-symbol true coefficients.
pub fn rician_block_fading(
    x: &[Complex64],
    cfg: &BlockFadingConfig,
    n0: f64,
    rng: &mut Rng,
) -> (Vec<Complex64>, Vec<Complex64>) {
    let mut h = Vec::with_capacity(x.len());
    for (s, e) in cfg.blocks(x.len()) {
        let hb = rician_coefficient(cfg.k_factor, rng);
        h.extend(std::iter::repeat_n(hb, e - s));
    }
    let y = x.iter().zip(&h).map(|(&xi, &hi)| hi * xi + complex_gaussian(rng, n0)).collect();
    (y, h)
}

/// Prior-aware LMMSE estimate `sum p* y / (sum |p|^2 + n0)`, assuming
/// `E|h|^2 = 1`.
pub fn lmmse_estimate(y_pilots: &[Complex64], pilots: &[Complex64], n0: f64) -> Result<Complex64> {
    if pilots.is_empty() {
        return Err(Error::Config("LMMSE estimation needs at least one pilot".into()));
    }
    if y_pilots.len() != pilots.len() {
        return Err(Error::LengthMismatch { expected: pilots.len(), actual: y_pilots.len() });
    }
    let num: Complex64 = pilots.iter().zip(y_pilots).map(|(p, y)| p.conj() * y).sum();
    let den: f64 = pilots.iter().map(|p| p.norm_sqr()).sum::<f64>() + n0;
    Ok(num / den)
}

/// Noise variance of the equivalent model `y_eq = rho x + nu`.
///
/// The source expression reads `rho^2 - rho`, which is negative on (0, 1);
/// the residual of the LMMSE equalizer under perfect CSI has variance
/// `rho (1 - rho)`, so the sign is taken as a typo.
pub fn equalized_noise_variance(rho: f64) -> f64 {
    rho * (1.0 - rho)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EqualizedSymbol {
    pub y_eq: Complex64,
    pub rho: f64,
    /// `rho (1 - rho)`, evaluated without cancellation so it stays positive
    /// when `rho` rounds to 1.
    pub noise: f64,
}

impl EqualizedSymbol {
    /// The same observation as an unscaled AWGN sample: `y_eq / rho` with
    /// noise variance `(1 - rho) / rho`.
    pub fn as_awgn(&self) -> (Complex64, f64) {
        if self.rho == 0.0 {
            return (Complex64::new(0.0, 0.0), f64::INFINITY);
        }
        (self.y_eq / self.rho, self.noise / (self.rho * self.rho))
    }
}

/// LMMSE equalization `y h* / (|h|^2 + n0)`.
pub fn lmmse_equalize(y: Complex64, h_hat: Complex64, n0: f64) -> Result<EqualizedSymbol> {
    let den = h_hat.norm_sqr() + n0;
    if den == 0.0 {
        return Err(Error::UndefinedEqualizer);
    }
    let g = h_hat.norm_sqr();
    Ok(EqualizedSymbol { y_eq: y * h_hat.conj() / den, rho: g / den, noise: g * n0 / (den * den) })
}

/// Receiver front end for a pilot-bearing block-fading sequence: per-block
/// channel estimate (or the true coefficient) and equalized data symbols.
/// Returns `(equalized, h_hat)` with one entry per data symbol.
pub fn equalize_blocks(
    y: &[Complex64],
    h_true: &[Complex64],
    cfg: &BlockFadingConfig,
    n0: f64,
) -> Result<(Vec<EqualizedSymbol>, Vec<Complex64>)> {
    let mut eq = Vec::with_capacity(y.len());
    let mut hs = Vec::with_capacity(y.len());
    for (s, e) in cfg.blocks(y.len()) {
        let pilot_end = (s + cfg.n_p).min(e);
        let h_hat = match cfg.csi {
            CsiMode::Perfect => h_true[s],
            CsiMode::Estimated => lmmse_estimate(&y[s..pilot_end], &vec![PILOT; pilot_end - s], n0)?,
        };
        for &yj in &y[pilot_end..e] {
            eq.push(lmmse_equalize(yj, h_hat, n0)?);
            hs.push(h_hat);
        }
    }
    Ok((eq, hs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;

    #[test]
    fn noiseless_awgn_is_identity() {
        let x = vec![Complex64::new(1.0, -2.0), Complex64::new(0.3, 0.1)];
        assert_eq!(awgn(&x, 0.0, &mut substream(1, &[])), x);
    }

    #[test]
    fn awgn_variance() {
        let n = 1_000_000;
        let x = vec![Complex64::new(0.0, 0.0); n];
        let y = awgn(&x, 0.7, &mut substream(2, &[]));
        let re = y.iter().map(|v| v.re * v.re).sum::<f64>() / n as f64;
        let im = y.iter().map(|v| v.im * v.im).sum::<f64>() / n as f64;
        assert!(((re + im) / 0.7 - 1.0).abs() < 0.01);
        assert!((re / 0.35 - 1.0).abs() < 0.01);
        assert!((im / 0.35 - 1.0).abs() < 0.01);
    }

    #[test]
    fn ebn0_conversion() {
        assert!((ebn0_to_n0(0.0, 1.0) - 1.0).abs() < 1e-15);
        assert!((ebn0_to_n0(0.0, 3.0) - 1.0 / 3.0).abs() < 1e-15);
        assert!((ebn0_to_n0(10.0, 3.0) - 1.0 / 30.0).abs() < 1e-15);
    }

    #[test]
    fn rician_limits_and_power() {
        let mut rng = substream(3, &[]);
        for _ in 0..100 {
            assert!((rician_coefficient(1e9, &mut rng) - 1.0).norm() < 1e-3);
        }
        let n = 100_000;
        let p = (0..n).map(|_| rician_coefficient(10.0, &mut rng).norm_sqr()).sum::<f64>() / n as f64;
        assert!((p - 1.0).abs() < 0.01, "{p}");
    }

    #[test]
    fn fading_is_constant_within_blocks() {
        let cfg = BlockFadingConfig::default();
        let x = cfg.insert_pilots(&vec![Complex64::new(0.5, 0.5); 100]);
        let (_, h) = rician_block_fading(&x, &cfg, 0.1, &mut substream(4, &[]));
        for (s, e) in cfg.blocks(x.len()) {
            assert!(h[s..e].iter().all(|&v| v == h[s]));
        }
        assert_ne!(h[0], h[19]);
    }

    #[test]
    fn pilot_layout() {
        let cfg = BlockFadingConfig::default();
        let data: Vec<Complex64> = (0..40).map(|i| Complex64::new(i as f64 + 2.0, 0.0)).collect();
        let tx = cfg.insert_pilots(&data);
        assert_eq!(tx.len(), cfg.transmitted_len(40));
        assert_eq!(tx.len(), 40 + 3 * 3);
        assert_eq!(&tx[0..3], &[PILOT; 3]);
        assert_eq!(tx[3], data[0]);
        assert_eq!(&tx[19..22], &[PILOT; 3]);
    }

    #[test]
    fn lmmse_estimate_cases() {
        let h = Complex64::new(0.4, -0.9);
        assert_eq!(lmmse_estimate(&[h], &[PILOT], 0.0).unwrap(), h);
        assert_eq!(lmmse_estimate(&[Complex64::new(0.0, 0.0)], &[PILOT], 0.3).unwrap(), Complex64::new(0.0, 0.0));
        assert!(matches!(lmmse_estimate(&[], &[], 0.1), Err(Error::Config(_))));
    }

    #[test]
    fn lmmse_mse_decreases_with_pilots() {
        let n0 = 0.5;
        let mut last = f64::INFINITY;
        for n_p in 1..=6 {
            let mut rng = substream(5, &[n_p as u64]);
            let trials = 20_000;
            let mut mse = 0.0;
            for _ in 0..trials {
                let h = rician_coefficient(10.0, &mut rng);
                let y: Vec<Complex64> = (0..n_p).map(|_| h + complex_gaussian(&mut rng, n0)).collect();
                mse += (lmmse_estimate(&y, &vec![PILOT; n_p], n0).unwrap() - h).norm_sqr();
            }
            mse /= trials as f64;
            assert!(mse < last, "n_p={n_p}: {mse} vs {last}");
            last = mse;
        }
    }

    #[test]
    fn equalizer_cases() {
        let e = lmmse_equalize(Complex64::new(0.3, 0.2), Complex64::new(1.0, 0.0), 1e-12).unwrap();
        assert!((e.y_eq - Complex64::new(0.3, 0.2)).norm() < 1e-9);
        assert!((e.rho - 1.0).abs() < 1e-9);
        let e = lmmse_equalize(Complex64::new(0.3, 0.2), Complex64::new(0.0, 1.0), 1.0).unwrap();
        assert_eq!(e.rho, 0.5);
        assert_eq!(e.noise, equalized_noise_variance(0.5));
        let e = lmmse_equalize(Complex64::new(0.3, 0.2), Complex64::new(0.8, 0.6), 1e-20).unwrap();
        assert_eq!(e.rho, 1.0);
        let (_, var) = e.as_awgn();
        assert!(var > 0.0 && (var / 1e-20 - 1.0).abs() < 1e-9);
        assert!(matches!(lmmse_equalize(Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0), 0.0), Err(Error::UndefinedEqualizer)));
    }

    #[test]
    fn equalized_residual_matches_equivalent_model() {
        // Fixed coefficient so rho is a single value.
        let h = Complex64::new(0.6, 0.5);
        let n0 = 0.4;
        let n = 1_000_000;
        let mut rng = substream(6, &[]);
        let mut acc = 0.0;
        let mut rho = 0.0;
        for _ in 0..n {
            let x = complex_gaussian(&mut rng, 1.0);
            let y = h * x + complex_gaussian(&mut rng, n0);
            let e = lmmse_equalize(y, h, n0).unwrap();
            rho = e.rho;
            acc += (e.y_eq - x * e.rho).norm_sqr();
        }
        let var = acc / n as f64;
        assert!((var / equalized_noise_variance(rho) - 1.0).abs() < 0.02, "{var} vs {}", rho * (1.0 - rho));
    }

    #[test]
    fn seeded_channels_repeat() {
        let cfg = BlockFadingConfig::default();
        let x = vec![Complex64::new(1.0, 0.0); 57];
        let a = rician_block_fading(&x, &cfg, 0.2, &mut substream(7, &[1]));
        let b = rician_block_fading(&x, &cfg, 0.2, &mut substream(7, &[1]));
        assert_eq!(a, b);
    }

    #[test]
    fn config_validation() {
        assert!(BlockFadingConfig::default().validate().is_ok());
        let bad = BlockFadingConfig { n_p: 19, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = BlockFadingConfig { n_p: 0, ..Default::default() };
        assert!(bad.validate().is_err());
        let ok = BlockFadingConfig { n_p: 0, csi: CsiMode::Perfect, ..Default::default() };
        assert!(ok.validate().is_ok());
    }
}
