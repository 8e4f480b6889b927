//! Run configuration files, `key=value` overrides and link construction.

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use shapelink_core::constellation::{
    self, make_apsk32, make_qam32, normalize, relabel_for_shaping, symbol_distribution, Constellation, ShapingSpec,
    SymbolDistribution,
};
use shapelink_core::fec::{builtin_code, builtin_names, ParityCheckMatrix};
use shapelink_core::metrics::{ChannelModel, StopRule};
use shapelink_core::receiver::ReceiverConfig;
use shapelink_core::shaping_code::ShapingCode;
use shapelink_core::training::{IddConfig, NonIddConfig};
use shapelink_core::transmitter::Link;
use toml::{Table, Value};

use crate::{read_file, CliError, Result};

/// Parses `text` as TOML, or an empty table when there is no file.
pub fn load_table(path: Option<&Path>) -> Result<Table> {
    match path {
        None => Ok(Table::new()),
        Some(p) => {
            let text = read_file(p)?;
            text.parse::<Table>().map_err(|e| CliError::Config(format!("{}: {e}", p.display())))
        }
    }
}

/// Applies `a.b.c=value`. The value is read as a TOML literal when it
/// parses as one and as a bare string otherwise. Numeric path segments
/// index arrays.
pub fn apply_override(table: &mut Table, spec: &str) -> Result<()> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("override {spec:?} is not key=value")))?;
    let value = match format!("v = {raw}").parse::<Table>() {
        Ok(mut t) => t.remove("v").expect("parsed key"),
        Err(_) => Value::String(raw.to_string()),
    };
    let parts: Vec<&str> = key.trim().split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(CliError::Config(format!("override key {key:?} has an empty segment")));
    }
    let mut root = Value::Table(std::mem::take(table));
    let res = set_path(&mut root, &parts, value, key);
    if let Value::Table(t) = root {
        *table = t;
    }
    res
}

fn set_path(cur: &mut Value, parts: &[&str], value: Value, key: &str) -> Result<()> {
    let (first, rest) = parts.split_first().expect("non-empty path");
    if !rest.is_empty() {
        return set_path(step(cur, first, key)?, rest, value, key);
    }
    match cur {
        Value::Table(t) => {
            t.insert((*first).to_string(), value);
            Ok(())
        }
        Value::Array(_) => {
            *step(cur, first, key)? = value;
            Ok(())
        }
        _ => Err(CliError::Config(format!("override {key:?}: parent is not a table"))),
    }
}

fn step<'a>(cur: &'a mut Value, seg: &str, key: &str) -> Result<&'a mut Value> {
    match cur {
        Value::Table(t) => Ok(t.entry(seg.to_string()).or_insert_with(|| Value::Table(Table::new()))),
        Value::Array(a) => {
            let i: usize = seg.parse().map_err(|_| CliError::Config(format!("override {key:?}: {seg:?} is not an index")))?;
            a.get_mut(i).ok_or_else(|| CliError::Config(format!("override {key:?}: index {i} out of range")))
        }
        _ => Err(CliError::Config(format!("override {key:?}: {seg:?} is not a table"))),
    }
}

/// Deserializes with the failing field path in the error message.
pub fn from_table<T: DeserializeOwned>(table: Table) -> Result<T> {
    serde_path_to_error::deserialize(Value::Table(table)).map_err(|e| {
        let path = e.path().to_string();
        // Value errors repeat the path on a trailing line.
        let inner = e.into_inner().to_string();
        let inner = inner.lines().next().unwrap_or_default();
        if path == "." {
            CliError::Config(inner.to_string())
        } else {
            CliError::Config(format!("{path}: {inner}"))
        }
    })
}

pub fn to_table<T: Serialize>(v: &T) -> Result<Table> {
    Table::try_from(v).map_err(|e| CliError::Config(format!("cannot serialize config: {e}")))
}

/// Transmitter description shared by several commands.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LinkConfig {
    /// Built-in code name or path to an alist file.
    pub code: String,
    /// `[k_s, n_s]` of a lowest-weight shaping code; empty for uniform BICM.
    pub shaping: Vec<usize>,
    /// Codebook file (`k_s n_s` header, one word per line); overrides `shaping`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub shaping_file: Option<PathBuf>,
    pub shaped: Vec<usize>,
    /// `apsk32`, `qam32` or a constellation JSON path.
    pub constellation: String,
    /// Relabel for the shaped positions; defaults to on for built-in
    /// constellations and off for files.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub relabel: Option<bool>,
    pub pi1_seed: u64,
    pub pi2_seed: u64,
}

impl Default for LinkConfig {
    fn default() -> Self {
        Self {
            code: "peg-n1440-r23".into(),
            shaping: vec![2, 4],
            shaping_file: None,
            shaped: vec![0],
            constellation: "apsk32".into(),
            relabel: None,
            pi1_seed: 1,
            pi2_seed: 2,
        }
    }
}

pub fn load_code(name: &str) -> Result<ParityCheckMatrix> {
    if builtin_names().contains(&name) {
        return Ok(builtin_code(name)?);
    }
    let text = read_file(Path::new(name))?;
    ParityCheckMatrix::from_alist(&text).map_err(|e| CliError::context(format!("code file {name}"), e))
}

/// A built-in constellation name or a JSON file.
pub fn load_constellation(source: &str) -> Result<(Constellation, bool)> {
    match source {
        "apsk32" => Ok((make_apsk32(), true)),
        "qam32" => Ok((make_qam32(), true)),
        path => {
            let text = read_file(Path::new(path))?;
            let c = constellation::from_json(&text).map_err(|e| CliError::context(format!("constellation file {path}"), e))?;
            Ok((c, false))
        }
    }
}

/// Symbol distribution for `shaped` at `p0` (uniform when `shaped` is empty).
pub fn distribution(m: usize, shaped: &[usize], p0: f64) -> Result<SymbolDistribution> {
    if shaped.is_empty() {
        Ok(SymbolDistribution::uniform(1 << m))
    } else {
        Ok(symbol_distribution(m, &ShapingSpec::new(shaped, p0)?)?)
    }
}

impl LinkConfig {
    pub fn build(&self) -> Result<Link> {
        let h = load_code(&self.code)?;
        let shaping = match (&self.shaping_file, self.shaping.as_slice()) {
            (Some(p), _) => {
                let text = read_file(p)?;
                Some(ShapingCode::from_text(&text).map_err(|e| CliError::context(format!("shaping file {}", p.display()), e))?)
            }
            (None, &[k, n]) => Some(ShapingCode::build(k, n)?),
            (None, []) => None,
            (None, other) => {
                return Err(CliError::Config(format!("link.shaping: expected [k_s, n_s] or [], got {other:?}")));
            }
        };
        let (mut c, builtin) = load_constellation(&self.constellation)?;
        let shaped: Vec<usize> = if shaping.is_some() { self.shaped.clone() } else { Vec::new() };
        let p0 = shaping.as_ref().map_or(0.5, |s| s.p0());
        if !shaped.is_empty() {
            let spec = ShapingSpec::new(&shaped, p0)?;
            spec.validate(c.m())?;
            if self.relabel.unwrap_or(builtin) {
                c = relabel_for_shaping(&c, &spec).0;
            }
        }
        let c = normalize(c.points(), &distribution(c.m(), &shaped, p0)?)?;
        Ok(Link::new(h, shaping, &shaped, c, self.pi1_seed, self.pi2_seed)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainFile {
    pub seed: u64,
    /// Starting constellation JSON instead of `train.init`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub init_file: Option<PathBuf>,
    /// Steps between checkpoint writes.
    pub checkpoint_every: usize,
    pub train: NonIddConfig,
}

impl Default for TrainFile {
    fn default() -> Self {
        Self { seed: 0, init_file: None, checkpoint_every: 500, train: NonIddConfig::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainIddFile {
    pub seed: u64,
    pub checkpoint_every: usize,
    pub link: LinkConfig,
    pub train_idd: IddConfig,
}

impl Default for TrainIddFile {
    fn default() -> Self {
        Self { seed: 0, checkpoint_every: 500, link: LinkConfig::default(), train_idd: IddConfig::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    pub ebn0_db: Vec<f64>,
    /// Same seed (hence the same channel noise) for every system.
    pub paired: bool,
    pub stop: StopRule,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self { ebn0_db: vec![5.5, 6.0, 6.5, 7.0], paired: true, stop: StopRule::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SystemConfig {
    /// Used in the output filename `ber_<name>.csv`.
    pub name: String,
    pub link: LinkConfig,
    pub receiver: ReceiverConfig,
    pub channel: ChannelModel,
    /// `map` or a neural demapper JSON path.
    pub demapper: String,
}

impl Default for SystemConfig {
    fn default() -> Self {
        Self {
            name: "system".into(),
            link: LinkConfig::default(),
            receiver: ReceiverConfig::default(),
            channel: ChannelModel::Awgn,
            demapper: "map".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BerFile {
    pub seed: u64,
    pub sweep: SweepConfig,
    pub systems: Vec<SystemConfig>,
}

impl Default for BerFile {
    fn default() -> Self {
        Self { seed: 0, sweep: SweepConfig::default(), systems: vec![SystemConfig::default()] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CapacitySource {
    pub name: String,
    /// `apsk32`, `qam32` or a constellation JSON path.
    pub source: String,
    pub shaped: Vec<usize>,
    pub p0: f64,
}

impl Default for CapacitySource {
    fn default() -> Self {
        Self { name: "apsk32".into(), source: "apsk32".into(), shaped: Vec::new(), p0: 0.5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CapacityConfig {
    pub snr_db: Vec<f64>,
    pub samples: usize,
    /// Target rate of the gap computation; 0 skips it.
    pub gap_rate: f64,
    pub gap_samples: usize,
}

impl Default for CapacityConfig {
    fn default() -> Self {
        Self { snr_db: (0..=20).map(f64::from).collect(), samples: 100_000, gap_rate: 3.0, gap_samples: 1_000_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CapacityFile {
    pub seed: u64,
    pub capacity: CapacityConfig,
    pub constellations: Vec<CapacitySource>,
}

impl Default for CapacityFile {
    fn default() -> Self {
        Self { seed: 0, capacity: CapacityConfig::default(), constellations: vec![CapacitySource::default()] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExportConfig {
    /// `apsk32`, `qam32`, a constellation JSON or a training checkpoint.
    pub source: String,
    /// Shaped positions and `p0` for the unit-energy normalization.
    pub shaped: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p0: Option<f64>,
    pub relabel: bool,
}

impl Default for ExportConfig {
    fn default() -> Self {
        Self { source: "apsk32".into(), shaped: Vec::new(), p0: None, relabel: false }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExportFile {
    pub seed: u64,
    pub export: ExportConfig,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ImportFile {
    pub seed: u64,
    pub input: PathBuf,
}
