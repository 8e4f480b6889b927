use serde::{Deserialize, Serialize};

use super::adam::{global_norm, AdamConfig, AdamState};
use super::loss::{loss_non_idd, Batch, Evaluation, FrameBatch, IddProblem, TrainableParams};
use crate::constellation::{make_apsk32, make_qam32, relabel_for_shaping, Constellation, ShapingSpec};
use crate::demap::{FeatureSpec, NeuralDemapper};
use crate::error::{Error, Result};
use crate::metrics::{ber_sweep, BerPoint, ChannelModel, LinkSimulator, StopRule};
use crate::receiver::{ReceiverConfig, ShapedPrior};
use crate::rng::substream;
use crate::transmitter::Link;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub loss: f64,
    pub bce: f64,
    pub entropy: f64,
    pub p0: f64,
    /// Before clipping.
    pub grad_norm: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub per_iter: Vec<f64>,
}

/// Everything needed to continue a run exactly: step `t` draws its batch
/// from the substream `(seed, [t])`, so no generator state is stored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainState {
    pub step: usize,
    pub params: TrainableParams,
    pub adam: AdamState,
    pub history: Vec<StepRecord>,
}

impl TrainState {
    pub fn new(params: TrainableParams, adam: AdamConfig) -> Self {
        let n = params.len();
        Self { step: 0, params, adam: AdamState::new(adam, n), history: Vec::new() }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let s: Self = serde_json::from_str(text)?;
        if s.adam.m.len() != s.params.len() || s.adam.v.len() != s.params.len() {
            return Err(Error::LengthMismatch { expected: s.params.len(), actual: s.adam.m.len() });
        }
        Ok(s)
    }
}

/// `step,loss,bce,entropy,p0,grad_norm[,bce_iter1..]`.
pub fn history_csv(history: &[StepRecord]) -> String {
    let iters = history.first().map_or(0, |r| r.per_iter.len());
    let mut s = String::from("step,loss,bce,entropy,p0,grad_norm");
    for i in 1..=iters {
        s.push_str(&format!(",bce_iter{i}"));
    }
    s.push('\n');
    for r in history {
        s.push_str(&format!("{},{:e},{:e},{:e},{:e},{:e}", r.step, r.loss, r.bce, r.entropy, r.p0, r.grad_norm));
        for v in &r.per_iter {
            s.push_str(&format!(",{v:e}"));
        }
        s.push('\n');
    }
    s
}

/// Mean of each length-`window` run, for trend checks on noisy losses.
pub fn smoothed(history: &[StepRecord], window: usize) -> Vec<f64> {
    history.chunks(window.max(1)).map(|c| c.iter().map(|r| r.loss).sum::<f64>() / c.len() as f64).collect()
}

trait Objective {
    fn evaluate(&self, params: &TrainableParams, step: usize) -> Result<Evaluation>;
    /// Per flat parameter: whether it moves.
    fn trainable(&self, params: &TrainableParams) -> Vec<bool>;
}

fn advance(
    obj: &dyn Objective,
    state: &mut TrainState,
    until: usize,
    on_step: &mut dyn FnMut(&TrainState) -> Result<()>,
) -> Result<()> {
    let mask = obj.trainable(&state.params);
    while state.step < until {
        let step = state.step;
        let ev = obj.evaluate(&state.params, step)?;
        let mut grads = ev.grads;
        grads.iter_mut().zip(&mask).filter(|(_, &m)| !m).for_each(|(g, _)| *g = 0.0);
        if !ev.parts.loss.is_finite() || grads.iter().any(|g| !g.is_finite()) {
            return Err(Error::Divergence {
                step,
                msg: format!(
                    "loss {} (bce {}, entropy {}), gradient norm {}, p0 {}",
                    ev.parts.loss,
                    ev.parts.bce,
                    ev.parts.entropy,
                    global_norm(&grads),
                    state.params.p0()
                ),
            });
        }
        let mut flat = state.params.flatten();
        let p0 = state.params.p0();
        let norm = state.adam.step(&mut flat, &grads);
        state.params.set_flat(&flat);
        state.history.push(StepRecord {
            step,
            loss: ev.parts.loss,
            bce: ev.parts.bce,
            entropy: ev.parts.entropy,
            p0,
            grad_norm: norm,
            per_iter: ev.per_iter,
        });
        state.step += 1;
        on_step(state)?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitConstellation {
    Apsk32,
    Qam32,
}

impl InitConstellation {
    pub fn build(self) -> Constellation {
        match self {
            InitConstellation::Apsk32 => make_apsk32(),
            InitConstellation::Qam32 => make_qam32(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DemapperKind {
    Map,
    Neural,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NonIddConfig {
    pub init: InitConstellation,
    /// Shaped label positions; empty gives pure geometric shaping.
    pub shaped: Vec<usize>,
    /// Relabel the initial constellation for the shaped positions.
    pub relabel: bool,
    /// Nominal `p0` the relabeling search optimizes for.
    pub relabel_p0: f64,
    pub p0_init: f64,
    pub train_p0: bool,
    pub train_points: bool,
    pub iterations: usize,
    pub batch: usize,
    pub ebn0_db: [f64; 2],
    /// Information rate used for the Eb/N0 to N0 conversion.
    pub rate: f64,
    pub channel: ChannelModel,
    pub demapper: DemapperKind,
    pub features: FeatureSpec,
    pub adam: AdamConfig,
    pub seed: u64,
}

impl Default for NonIddConfig {
    fn default() -> Self {
        Self {
            init: InitConstellation::Apsk32,
            shaped: vec![0],
            relabel: true,
            relabel_p0: 0.8,
            p0_init: 0.5,
            train_p0: true,
            train_points: true,
            iterations: 5000,
            batch: 1000,
            ebn0_db: [5.0, 6.0],
            rate: 3.0,
            channel: ChannelModel::Awgn,
            demapper: DemapperKind::Map,
            features: FeatureSpec::ChannelEstimate,
            adam: AdamConfig::default(),
            seed: 0,
        }
    }
}

pub struct NonIddTrainer {
    cfg: NonIddConfig,
    mask: Vec<bool>,
    init: Option<Constellation>,
}

impl NonIddTrainer {
    pub fn new(cfg: NonIddConfig) -> Result<Self> {
        let m = 5;
        if !cfg.shaped.is_empty() {
            ShapingSpec::new(&cfg.shaped, cfg.p0_init)?.validate(m)?;
        }
        if !(cfg.p0_init > 0.0 && cfg.p0_init < 1.0) {
            return Err(Error::Config(format!("train.p0_init = {} must lie in (0, 1)", cfg.p0_init)));
        }
        if cfg.batch == 0 {
            return Err(Error::Config("train.batch must be >= 1".into()));
        }
        if !(cfg.rate > 0.0) || cfg.ebn0_db[0] > cfg.ebn0_db[1] {
            return Err(Error::Config("train.rate must be positive and train.ebn0_db ordered".into()));
        }
        if let ChannelModel::Fading(f) = &cfg.channel {
            f.validate()?;
        }
        let mask = (0..m).map(|k| cfg.shaped.contains(&k)).collect();
        Ok(Self { cfg, mask, init: None })
    }

    /// Starts from `c` instead of the configured standard constellation.
    pub fn with_constellation(mut self, c: Constellation) -> Result<Self> {
        self.mask = (0..c.m()).map(|k| self.cfg.shaped.contains(&k)).collect();
        if !self.cfg.shaped.is_empty() {
            ShapingSpec::new(&self.cfg.shaped, self.cfg.p0_init)?.validate(c.m())?;
        }
        self.init = Some(c);
        Ok(self)
    }

    pub fn config(&self) -> &NonIddConfig {
        &self.cfg
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn init_state(&self) -> Result<TrainState> {
        let mut c = self.init.clone().unwrap_or_else(|| self.cfg.init.build());
        if self.cfg.relabel && !self.cfg.shaped.is_empty() {
            c = relabel_for_shaping(&c, &ShapingSpec::new(&self.cfg.shaped, self.cfg.relabel_p0)?).0;
        }
        let demapper = match self.cfg.demapper {
            DemapperKind::Map => None,
            DemapperKind::Neural => Some(NeuralDemapper::glorot(self.cfg.features, c.m(), &mut substream(self.cfg.seed, &[u64::MAX]))),
        };
        Ok(TrainState::new(TrainableParams::new(&c, self.cfg.p0_init, demapper), self.cfg.adam))
    }

    /// The batch of step `step`.
    pub fn batch(&self, step: usize) -> Result<Batch> {
        let c = &self.cfg;
        Batch::draw(self.mask.len(), c.batch, c.ebn0_db, c.rate, &c.channel, &mut substream(c.seed, &[step as u64]))
    }

    /// Runs until `until` steps, calling `on_step` after each.
    pub fn train(&self, state: &mut TrainState, until: usize, on_step: &mut dyn FnMut(&TrainState) -> Result<()>) -> Result<()> {
        advance(self, state, until, on_step)
    }

    pub fn run(&self) -> Result<TrainState> {
        let mut s = self.init_state()?;
        self.train(&mut s, self.cfg.iterations, &mut |_| Ok(()))?;
        Ok(s)
    }
}

impl Objective for NonIddTrainer {
    fn evaluate(&self, params: &TrainableParams, step: usize) -> Result<Evaluation> {
        loss_non_idd(params, &self.mask, &self.batch(step)?)
    }

    fn trainable(&self, params: &TrainableParams) -> Vec<bool> {
        let n = params.raw_points.len();
        let train_p0 = self.cfg.train_p0 && !self.cfg.shaped.is_empty();
        (0..params.len()).map(|i| if i < n { self.cfg.train_points } else if i == n { train_p0 } else { true }).collect()
    }
}

/// Grid scan used to place IDD training in the waterfall region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScanConfig {
    pub grid: Vec<f64>,
    pub frames: u64,
    /// Points with BER inside this range count as waterfall.
    pub ber_range: [f64; 2],
}

impl Default for ScanConfig {
    fn default() -> Self {
        Self { grid: (0..=24).map(|i| f64::from(i) * 0.5).collect(), frames: 64, ber_range: [1e-4, 1e-1] }
    }
}

/// The Eb/N0 span whose scanned BER lies in `scan.ber_range`.
pub fn waterfall_scan(link: &Link, receiver: ReceiverConfig, scan: &ScanConfig, seed: u64) -> Result<([f64; 2], Vec<BerPoint>)> {
    let sim = LinkSimulator::map(link.clone(), receiver, ChannelModel::Awgn);
    let bits = scan.frames * link.encoder.k() as u64;
    let stop = StopRule { min_errors: u64::MAX, max_bits: bits, chunk_frames: scan.frames };
    let pts = ber_sweep(&sim, &scan.grid, &stop, seed)?;
    let inside: Vec<f64> = pts.iter().filter(|p| p.ber >= scan.ber_range[0] && p.ber <= scan.ber_range[1]).map(|p| p.eb_n0_db).collect();
    match (inside.first(), inside.last()) {
        (Some(&lo), Some(&hi)) => Ok(([lo, hi], pts)),
        _ => Err(Error::Config(format!(
            "waterfall scan found no Eb/N0 in the grid with BER in [{:e}, {:e}]",
            scan.ber_range[0], scan.ber_range[1]
        ))),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IddConfig {
    pub outer_iters: usize,
    pub batch_frames: usize,
    pub iterations: usize,
    /// Training Eb/N0 span; `None` runs the waterfall scan.
    pub ebn0_db: Option<[f64; 2]>,
    pub shaped_prior: ShapedPrior,
    pub warm_start: bool,
    pub scan: ScanConfig,
    pub adam: AdamConfig,
    pub seed: u64,
}

impl Default for IddConfig {
    fn default() -> Self {
        Self {
            outer_iters: 40,
            batch_frames: 100,
            iterations: 5000,
            ebn0_db: None,
            shaped_prior: ShapedPrior::Replace,
            warm_start: true,
            scan: ScanConfig::default(),
            adam: AdamConfig::default(),
            seed: 0,
        }
    }
}

/// Deep-unfolded IDD training of the constellation geometry. The shaping
/// code and its `p0` stay fixed.
pub struct IddTrainer {
    link: Link,
    cfg: IddConfig,
    problem: IddProblem,
    range: [f64; 2],
    pub scan: Vec<BerPoint>,
}

impl IddTrainer {
    pub fn new(link: Link, cfg: IddConfig) -> Result<Self> {
        if cfg.batch_frames == 0 {
            return Err(Error::Config("train_idd.batch_frames must be >= 1".into()));
        }
        let problem = IddProblem::new(&link, cfg.outer_iters, cfg.shaped_prior, cfg.warm_start)?;
        let (range, scan) = match cfg.ebn0_db {
            Some(r) => (r, Vec::new()),
            None => {
                let rc = ReceiverConfig {
                    outer_iters: cfg.outer_iters,
                    shaped_prior: cfg.shaped_prior,
                    warm_start: cfg.warm_start,
                    ..ReceiverConfig::idd()
                };
                waterfall_scan(&link, rc, &cfg.scan, cfg.seed)?
            }
        };
        Ok(Self { link, cfg, problem, range, scan })
    }

    pub fn ebn0_range(&self) -> [f64; 2] {
        self.range
    }

    pub fn problem(&self) -> &IddProblem {
        &self.problem
    }

    pub fn link(&self) -> &Link {
        &self.link
    }

    pub fn init_state(&self) -> TrainState {
        let p0 = if self.link.is_shaped() { self.link.shaping.p0() } else { 0.5 };
        TrainState::new(TrainableParams::new(&self.link.constellation, p0, None), self.cfg.adam)
    }

    pub fn batch(&self, step: usize) -> Result<FrameBatch> {
        FrameBatch::draw(&self.link, self.cfg.batch_frames, self.range, self.cfg.seed, step as u64)
    }

    /// The trained points normalized under the code's distribution.
    pub fn constellation(&self, params: &TrainableParams) -> Result<Constellation> {
        let raw = Constellation::from_reals(&params.raw_points)?;
        let dist = crate::constellation::SymbolDistribution { prob: self.problem.distribution().to_vec() };
        crate::constellation::normalize(raw.points(), &dist)
    }

    pub fn train(&self, state: &mut TrainState, until: usize, on_step: &mut dyn FnMut(&TrainState) -> Result<()>) -> Result<()> {
        advance(self, state, until, on_step)
    }

    pub fn run(&self) -> Result<TrainState> {
        let mut s = self.init_state();
        self.train(&mut s, self.cfg.iterations, &mut |_| Ok(()))?;
        Ok(s)
    }
}

impl Objective for IddTrainer {
    fn evaluate(&self, params: &TrainableParams, step: usize) -> Result<Evaluation> {
        self.problem.loss(params, &self.batch(step)?)
    }

    fn trainable(&self, params: &TrainableParams) -> Vec<bool> {
        let n = params.raw_points.len();
        (0..params.len()).map(|i| i < n).collect()
    }
}
