//! Constellation JSON: `{"m":5,"points":[[re,im],...],"label_order":"index"}`.
//! Coordinates are written with 17 significant digits so that export and
//! import round-trip exactly.

use num_complex::Complex64;
use serde::Deserialize;

use super::Constellation;
use crate::error::{Error, Result};

#[derive(Deserialize)]
struct ConstellationFile {
    m: usize,
    points: Vec<[f64; 2]>,
    label_order: String,
}

pub fn to_json(c: &Constellation) -> String {
    let pts: Vec<String> = c
        .points()
        .iter()
        .map(|p| format!("[{:.16e},{:.16e}]", p.re, p.im))
        .collect();
    format!(
        "{{\"m\":{},\"points\":[{}],\"label_order\":\"index\"}}\n",
        c.m(),
        pts.join(",")
    )
}

pub fn from_json(text: &str) -> Result<Constellation> {
    let f: ConstellationFile = serde_json::from_str(text)?;
    if f.label_order != "index" {
        return Err(Error::Config(format!(
            "unsupported label_order {:?}; only \"index\"",
            f.label_order
        )));
    }
    if f.points.len() != 1usize << f.m {
        return Err(Error::LengthMismatch { expected: 1 << f.m, actual: f.points.len() });
    }
    Constellation::new(f.points.iter().map(|&[re, im]| Complex64::new(re, im)).collect())
}
