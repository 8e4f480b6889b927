//! Baseline 32-point constellations.

use std::f64::consts::PI;

use num_complex::Complex64;

use super::{normalize, Constellation, SymbolDistribution};

/// Ring populations of DVB-S2 32APSK, innermost first.
pub const APSK32_RING_SIZES: [usize; 3] = [4, 12, 16];

/// Ring radii relative to the inner ring, DVB-S2 rate-3/4 values
/// (gamma1 = R2/R1 = 2.84, gamma2 = R3/R1 = 5.27).
pub const APSK32_RING_RADII: [f64; 3] = [1.0, 2.84, 5.27];

/// (ring, phase in units of pi) for each label 0..32, following the DVB-S2
/// 32APSK bit mapping.
const APSK32_MAP: [(usize, f64); 32] = [
    (1, 1.0 / 4.0),
    (1, 5.0 / 12.0),
    (1, -1.0 / 4.0),
    (1, -5.0 / 12.0),
    (1, 3.0 / 4.0),
    (1, 7.0 / 12.0),
    (1, -3.0 / 4.0),
    (1, -7.0 / 12.0),
    (2, 1.0 / 8.0),
    (2, 3.0 / 8.0),
    (2, -1.0 / 4.0),
    (2, -1.0 / 2.0),
    (2, 3.0 / 4.0),
    (2, 1.0 / 2.0),
    (2, -7.0 / 8.0),
    (2, -5.0 / 8.0),
    (1, 1.0 / 12.0),
    (0, 1.0 / 4.0),
    (1, -1.0 / 12.0),
    (0, -1.0 / 4.0),
    (1, 11.0 / 12.0),
    (0, 3.0 / 4.0),
    (1, -11.0 / 12.0),
    (0, -3.0 / 4.0),
    (2, 0.0),
    (2, 1.0 / 4.0),
    (2, -1.0 / 8.0),
    (2, -3.0 / 8.0),
    (2, 7.0 / 8.0),
    (2, 5.0 / 8.0),
    (2, 1.0),
    (2, -3.0 / 4.0),
];

/// 4+12+16 ring APSK with unit average energy under the uniform distribution.
pub fn make_apsk32() -> Constellation {
    let raw: Vec<Complex64> = APSK32_MAP
        .iter()
        .map(|&(ring, phase)| Complex64::from_polar(APSK32_RING_RADII[ring], phase * PI))
        .collect();
    normalize(&raw, &SymbolDistribution::uniform(32)).expect("fixed geometry")
}

const GRAY3: [usize; 8] = [0b000, 0b001, 0b011, 0b010, 0b110, 0b111, 0b101, 0b100];
const GRAY2: [usize; 4] = [0b00, 0b01, 0b11, 0b10];

/// Gray-labelled rectangular 8x4 32-QAM; three label bits select the
/// in-phase level and two the quadrature level.
///
/// The cross-shaped 32-QAM cannot be Gray labelled (every labelling has at
/// least one lattice-adjacent pair differing in more than one bit), so the
/// rectangular layout is used.
pub fn make_qam32() -> Constellation {
    let mut raw = vec![Complex64::new(0.0, 0.0); 32];
    for (i, &gi) in GRAY3.iter().enumerate() {
        for (q, &gq) in GRAY2.iter().enumerate() {
            let re = 2.0 * i as f64 - 7.0;
            let im = 2.0 * q as f64 - 3.0;
            raw[(gi << 2) | gq] = Complex64::new(re, im);
        }
    }
    normalize(&raw, &SymbolDistribution::uniform(32)).expect("fixed geometry")
}
