//! Constellation geometry, positional bit labels and the bit-product symbol
//! distribution induced by shaped bit positions.
//!
//! Labels are positional: `points[i]` carries the `m`-bit binary expansion of
//! `i`, with bit 0 the most significant label bit.

mod io;
mod relabel;
mod standard;

pub use io::{from_json, to_json};
pub use relabel::{relabel_for_shaping, LabelTransform};
pub use standard::{make_apsk32, make_qam32, APSK32_RING_RADII, APSK32_RING_SIZES};

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Bit `k` (0 = MSB) of the `m`-bit label `index`.
#[inline]
pub fn label_bit(index: usize, k: usize, m: usize) -> u8 {
    ((index >> (m - 1 - k)) & 1) as u8
}

/// Shaped bit positions and the probability that a shaped bit is zero.
#[derive(Debug, Clone, PartialEq)]
pub struct ShapingSpec {
    shaped: Vec<usize>,
    p0: f64,
}

impl ShapingSpec {
    pub fn new(shaped: &[usize], p0: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p0) {
            return Err(Error::InvalidSpec(format!("p0 = {p0} outside [0, 1]")));
        }
        if shaped.is_empty() {
            return Err(Error::InvalidSpec("shaped bit set is empty".into()));
        }
        let mut s = shaped.to_vec();
        s.sort_unstable();
        s.dedup();
        if s.len() != shaped.len() {
            return Err(Error::InvalidSpec("duplicate shaped bit index".into()));
        }
        Ok(Self { shaped: s, p0 })
    }

    pub fn shaped(&self) -> &[usize] {
        &self.shaped
    }

    pub fn p0(&self) -> f64 {
        self.p0
    }

    pub fn is_shaped(&self, k: usize) -> bool {
        self.shaped.contains(&k)
    }

    /// Checks the spec against modulation order `m`: `0 < |S| < m`.
    pub fn validate(&self, m: usize) -> Result<()> {
        if let Some(&k) = self.shaped.iter().find(|&&k| k >= m) {
            return Err(Error::InvalidSpec(format!(
                "shaped bit index {k} out of range for m = {m}"
            )));
        }
        if self.shaped.len() >= m {
            return Err(Error::InvalidSpec(format!(
                "all {m} bit positions shaped; need 0 < |S| < m"
            )));
        }
        Ok(())
    }

    /// Boolean mask of length `m`.
    pub fn mask(&self, m: usize) -> Vec<bool> {
        (0..m).map(|k| self.is_shaped(k)).collect()
    }
}

/// Probability of every constellation point, indexed like the points.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolDistribution {
    pub prob: Vec<f64>,
}

impl SymbolDistribution {
    pub fn uniform(size: usize) -> Self {
        Self { prob: vec![1.0 / size as f64; size] }
    }

    pub fn len(&self) -> usize {
        self.prob.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prob.is_empty()
    }

    /// Marginal probability that label bit `k` equals one.
    pub fn bit_one_probability(&self, k: usize, m: usize) -> f64 {
        self.prob
            .iter()
            .enumerate()
            .filter(|(i, _)| label_bit(*i, k, m) == 1)
            .map(|(_, p)| p)
            .sum()
    }
}

/// Product of per-bit probabilities; shaped positions are zero with
/// probability `p0`, the rest are fair. No check on `|S| < m`.
pub(crate) fn bit_product_distribution(m: usize, shaped: &[bool], p0: f64) -> Vec<f64> {
    let size = 1usize << m;
    (0..size)
        .map(|i| {
            (0..m)
                .map(|k| match (shaped[k], label_bit(i, k, m)) {
                    (false, _) => 0.5,
                    (true, 0) => p0,
                    (true, _) => 1.0 - p0,
                })
                .product()
        })
        .collect()
}

/// Symbol probabilities implied by independent label bits.
pub fn symbol_distribution(m: usize, spec: &ShapingSpec) -> Result<SymbolDistribution> {
    spec.validate(m)?;
    Ok(SymbolDistribution {
        prob: bit_product_distribution(m, &spec.mask(m), spec.p0()),
    })
}

/// Entropy in bits, with `0 log 0 = 0`.
pub fn entropy(dist: &SymbolDistribution) -> f64 {
    dist.prob
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| -p * p.log2())
        .sum()
}

/// A labelled point set with `M = 2^m` points.
#[derive(Debug, Clone, PartialEq)]
pub struct Constellation {
    points: Vec<Complex64>,
    m: usize,
}

impl Constellation {
    pub fn new(points: Vec<Complex64>) -> Result<Self> {
        let size = points.len();
        if size < 2 || !size.is_power_of_two() {
            return Err(Error::DegenerateConstellation(format!(
                "size {size} is not a power of two >= 2"
            )));
        }
        if points.iter().any(|p| !p.re.is_finite() || !p.im.is_finite()) {
            return Err(Error::DegenerateConstellation("non-finite point".into()));
        }
        Ok(Self { m: size.trailing_zeros() as usize, points })
    }

    pub fn points(&self) -> &[Complex64] {
        &self.points
    }

    pub fn size(&self) -> usize {
        self.points.len()
    }

    /// Bits per symbol.
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn bit(&self, index: usize, k: usize) -> u8 {
        label_bit(index, k, self.m)
    }

    pub fn mean_energy(&self, dist: &SymbolDistribution) -> f64 {
        weighted_energy(&self.points, &dist.prob)
    }

    /// True if two points coincide exactly. Training may transiently collapse
    /// points, so this is a diagnostic rather than an error.
    pub fn has_coincident_points(&self) -> bool {
        self.points
            .iter()
            .enumerate()
            .any(|(i, a)| self.points[i + 1..].iter().any(|b| a == b))
    }

    /// Flattened `[re0, im0, re1, im1, ...]`.
    pub fn to_reals(&self) -> Vec<f64> {
        self.points.iter().flat_map(|p| [p.re, p.im]).collect()
    }

    pub fn from_reals(reals: &[f64]) -> Result<Self> {
        Self::new(reals.chunks_exact(2).map(|c| Complex64::new(c[0], c[1])).collect())
    }
}

pub(crate) fn weighted_energy(points: &[Complex64], prob: &[f64]) -> f64 {
    points.iter().zip(prob).map(|(x, p)| p * x.norm_sqr()).sum()
}

/// Scales `raw` to unit average energy under `dist`.
pub fn normalize(raw: &[Complex64], dist: &SymbolDistribution) -> Result<Constellation> {
    if raw.len() != dist.len() {
        return Err(Error::LengthMismatch { expected: dist.len(), actual: raw.len() });
    }
    let energy = weighted_energy(raw, &dist.prob);
    if !(energy > 0.0) || !energy.is_finite() {
        return Err(Error::DegenerateConstellation(format!(
            "weighted energy {energy} is not positive"
        )));
    }
    let scale = energy.sqrt().recip();
    Constellation::new(raw.iter().map(|p| p * scale).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn spec(shaped: &[usize], p0: f64) -> ShapingSpec {
        ShapingSpec::new(shaped, p0).unwrap()
    }

    #[test]
    fn uniform_when_p0_is_half() {
        let d = symbol_distribution(5, &spec(&[0], 0.5)).unwrap();
        assert!(d.prob.iter().all(|&p| (p - 1.0 / 32.0).abs() < 1e-15));
    }

    #[test]
    fn single_shaped_bit_splits_two_levels() {
        let d = symbol_distribution(5, &spec(&[0], 0.8125)).unwrap();
        for (i, &p) in d.prob.iter().enumerate() {
            let expected = if i < 16 { 0.8125 / 16.0 } else { 0.1875 / 16.0 };
            assert!((p - expected).abs() < 1e-15, "index {i}");
        }
    }

    #[test]
    fn two_shaped_bits_match_enumeration() {
        let p0 = 0.6875;
        let d = symbol_distribution(5, &spec(&[0, 4], p0)).unwrap();
        for label in 0..32usize {
            // Independent route: read the label as a string and multiply.
            let s = format!("{label:05b}");
            let mut expected = 1.0;
            for (k, ch) in s.chars().enumerate() {
                expected *= match (k == 0 || k == 4, ch) {
                    (false, _) => 0.5,
                    (true, '0') => p0,
                    (true, _) => 1.0 - p0,
                };
            }
            assert!((d.prob[label] - expected).abs() < 1e-15);
        }
        let mut levels: Vec<f64> = d.prob.clone();
        levels.sort_by(f64::total_cmp);
        levels.dedup_by(|a, b| (*a - *b).abs() < 1e-15);
        assert_eq!(levels.len(), 3, "p0(1-p0) appears twice so three distinct values");
    }

    #[test]
    fn invalid_specs_are_rejected() {
        assert!(ShapingSpec::new(&[], 0.7).is_err());
        assert!(ShapingSpec::new(&[0], 1.5).is_err());
        assert!(symbol_distribution(2, &spec(&[0, 1], 0.7)).is_err());
        assert!(symbol_distribution(3, &spec(&[3], 0.7)).is_err());
    }

    #[test]
    fn normalize_divides_by_weighted_rms() {
        let raw = [Complex64::new(1.0, 0.0), Complex64::new(3.0, 0.0)];
        let dist = SymbolDistribution { prob: vec![0.75, 0.25] };
        let c = normalize(&raw, &dist).unwrap();
        // Independent route: accumulate energy term by term.
        let mut e = 0.0;
        for (x, p) in raw.iter().zip(&dist.prob) {
            e += p * (x.re * x.re + x.im * x.im);
        }
        assert!((e - 3.0).abs() < 1e-15);
        assert!((c.points()[1].re - 3.0 / 3f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn unit_circle_is_left_alone() {
        let raw: Vec<_> = (0..8)
            .map(|i| Complex64::from_polar(1.0, i as f64 * 0.7))
            .collect();
        let dist = symbol_distribution(3, &spec(&[1], 0.9)).unwrap();
        let c = normalize(&raw, &dist).unwrap();
        for (a, b) in c.points().iter().zip(&raw) {
            assert!((a - b).norm() < 1e-15);
        }
    }

    #[test]
    fn zero_points_are_degenerate() {
        let raw = vec![Complex64::new(0.0, 0.0); 4];
        assert!(matches!(
            normalize(&raw, &SymbolDistribution::uniform(4)),
            Err(Error::DegenerateConstellation(_))
        ));
    }

    #[test]
    fn entropy_cases() {
        assert!((entropy(&SymbolDistribution::uniform(32)) - 5.0).abs() < 1e-12);
        let d = symbol_distribution(5, &spec(&[0], 0.8125)).unwrap();
        let closed = 4.0 + crate::llr::binary_entropy(0.8125);
        assert!((entropy(&d) - closed).abs() < 1e-12);
        let mut point = vec![0.0; 8];
        point[3] = 1.0;
        assert_eq!(entropy(&SymbolDistribution { prob: point }), 0.0);
    }

    fn raw_points(m: usize) -> impl Strategy<Value = Vec<Complex64>> {
        prop::collection::vec((-3.0f64..3.0, -3.0f64..3.0), 1 << m)
            .prop_map(|v| v.into_iter().map(|(a, b)| Complex64::new(a, b)).collect())
    }

    proptest! {
        #[test]
        fn distribution_sums_to_one(m in 2usize..7, p0 in 0.0f64..=1.0, seed in 0u64..1000) {
            let k = (seed as usize) % (m - 1) + 1;
            let shaped: Vec<usize> = (0..k).map(|i| (i * 7 + seed as usize) % m).collect::<std::collections::BTreeSet<_>>().into_iter().collect();
            let d = symbol_distribution(m, &spec(&shaped, p0)).unwrap();
            prop_assert!((d.prob.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            let h = entropy(&d);
            prop_assert!(h >= -1e-12 && h <= m as f64 + 1e-12);
        }

        #[test]
        fn normalize_is_idempotent_and_scale_free(raw in raw_points(4), p0 in 0.05f64..0.95, c in 0.1f64..10.0) {
            let dist = symbol_distribution(4, &spec(&[0, 2], p0)).unwrap();
            prop_assume!(weighted_energy(&raw, &dist.prob) > 1e-6);
            let once = normalize(&raw, &dist).unwrap();
            let twice = normalize(once.points(), &dist).unwrap();
            prop_assert!((once.mean_energy(&dist) - 1.0).abs() < 1e-12);
            let scaled: Vec<_> = raw.iter().map(|p| p * c).collect();
            let from_scaled = normalize(&scaled, &dist).unwrap();
            for ((a, b), s) in once.points().iter().zip(twice.points()).zip(from_scaled.points()) {
                prop_assert!((a - b).norm() < 1e-12);
                prop_assert!((a - s).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn entropy_is_maximal_only_at_half() {
        for p0 in [0.3, 0.5, 0.6, 0.9] {
            let h = entropy(&symbol_distribution(4, &spec(&[1], p0)).unwrap());
            assert_eq!((h - 4.0).abs() < 1e-12, p0 == 0.5);
        }
    }
}
