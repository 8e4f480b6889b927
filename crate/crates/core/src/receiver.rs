//! The two iterative receivers: the simplified loop (demap once, iterate
//! shaping decoder and FEC decoder) and iterative detection and decoding
//! (demapper inside the loop, shaping decoder in both directions).

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channel::EqualizedSymbol;
use crate::demap::{apriori_init, MapDemapper, NeuralDemapper};
use crate::error::Result;
use crate::llr;
use crate::transmitter::{Frame, Link};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReceiverMode {
    Simplified,
    Idd,
}

/// A priori for shaped mapper bits on later IDD passes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShapedPrior {
    /// The shaping decoder's extrinsic output alone. The codebook already
    /// carries the zero bias, so this avoids counting it twice.
    Replace,
    /// Shaping decoder extrinsic plus the static `ln((1 - p0) / p0)`.
    ReplacePlusStatic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReceiverConfig {
    pub mode: ReceiverMode,
    pub outer_iters: usize,
    pub bp_iters_per_outer: usize,
    /// Keep BP messages across IDD outer iterations.
    pub warm_start: bool,
    pub shaped_prior: ShapedPrior,
    /// Keep the demapper posterior LLRs of every IDD pass in the trace.
    pub record_llrs: bool,
}

impl Default for ReceiverConfig {
    fn default() -> Self {
        Self::simplified()
    }
}

impl ReceiverConfig {
    pub fn simplified() -> Self {
        Self {
            mode: ReceiverMode::Simplified,
            outer_iters: 10,
            bp_iters_per_outer: 40,
            warm_start: true,
            shaped_prior: ShapedPrior::Replace,
            record_llrs: false,
        }
    }

    pub fn idd() -> Self {
        Self { mode: ReceiverMode::Idd, outer_iters: 40, bp_iters_per_outer: 1, ..Self::simplified() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.outer_iters == 0 || self.bp_iters_per_outer == 0 {
            return Err(crate::Error::Config("receiver.outer_iters and receiver.bp_iters_per_outer must be >= 1".into()));
        }
        Ok(())
    }
}

/// Channel observations of one frame's data symbols in a demapper-ready form.
#[derive(Debug, Clone)]
pub struct Observation {
    /// Unscaled AWGN-equivalent samples.
    pub y: Vec<Complex64>,
    /// Per-symbol (or single) noise variance.
    pub n0: Vec<f64>,
    /// Neural demapper feature rows, if built.
    pub features: Option<Vec<f64>>,
}

impl Observation {
    pub fn awgn(y: Vec<Complex64>, n0: f64) -> Self {
        Self { y, n0: vec![n0], features: None }
    }

    /// Equivalent-AWGN view of equalized samples.
    pub fn equalized(eq: &[EqualizedSymbol]) -> Self {
        let (y, n0) = eq.iter().map(|e| e.as_awgn()).unzip();
        Self { y, n0, features: None }
    }
}

#[derive(Debug, Clone)]
pub enum Demapper {
    Map(MapDemapper),
    /// Ignores fed-back a priori; its output is treated as a posterior.
    Neural(NeuralDemapper),
}

impl Demapper {
    fn extrinsic(&self, obs: &Observation, la: &[f64], la_static: &[f64]) -> Result<Vec<f64>> {
        match self {
            Demapper::Map(d) => Ok(d.extrinsic(&obs.y, &obs.n0, la)),
            Demapper::Neural(nd) => {
                let f = obs.features.as_deref().ok_or_else(|| crate::Error::Config("neural demapper needs feature rows".into()))?;
                let out = nd.forward(f)?;
                Ok(out.iter().zip(la_static).map(|(o, a)| llr::clip(o - a)).collect())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub iteration: usize,
    pub mean_abs_llr: f64,
    pub bit_errors: Option<usize>,
    pub syndrome_weight: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub entries: Vec<TraceEntry>,
    /// Demapper posterior LLRs (extrinsic plus a priori) per pass.
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub demap_posteriors: Vec<Vec<f64>>,
}

impl Trace {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn to_csv(&self, info_bits: usize) -> String {
        let mut s = String::from("iteration,mean_abs_llr,bit_errors,ber,syndrome_weight\n");
        for e in &self.entries {
            let (errs, ber) = match e.bit_errors {
                Some(n) => (n.to_string(), format!("{:e}", n as f64 / info_bits as f64)),
                None => (String::new(), String::new()),
            };
            s.push_str(&format!("{},{:e},{},{},{}\n", e.iteration, e.mean_abs_llr, errs, ber, e.syndrome_weight));
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Decoded {
    pub b_hat: Vec<u8>,
    pub trace: Trace,
}

pub struct Receiver<'a> {
    link: &'a Link,
    cfg: ReceiverConfig,
    la_static: Vec<f64>,
}

impl<'a> Receiver<'a> {
    pub fn new(link: &'a Link, cfg: ReceiverConfig) -> Self {
        let cfg_frame = link.cfg();
        let la_static = match link.spec() {
            Some(spec) => apriori_init(&spec, cfg_frame.m, cfg_frame.symbols()),
            None => vec![0.0; cfg_frame.mapper_bits()],
        };
        Self { link, cfg, la_static }
    }

    pub fn config(&self) -> &ReceiverConfig {
        &self.cfg
    }

    /// Initial mapper a priori, in z order.
    pub fn static_prior(&self) -> &[f64] {
        &self.la_static
    }

    pub fn receive(&self, obs: &Observation, demapper: &Demapper, truth: Option<&Frame>) -> Result<Decoded> {
        match self.cfg.mode {
            ReceiverMode::Simplified => self.simplified(obs, demapper, truth),
            ReceiverMode::Idd => self.idd(obs, demapper, truth),
        }
    }

    fn entry(&self, iteration: usize, l_fec: &[f64], truth: Option<&Frame>) -> TraceEntry {
        let hard = llr::hard_decisions(l_fec);
        let bit_errors = truth.map(|f| {
            self.link.encoder.extract(&hard).iter().zip(&f.b).filter(|(a, b)| a != b).count()
        });
        TraceEntry {
            iteration,
            mean_abs_llr: l_fec.iter().map(|v| v.abs()).sum::<f64>() / l_fec.len() as f64,
            bit_errors,
            syndrome_weight: self.link.h.syndrome_weight(&hard),
        }
    }

    fn finish(&self, l_fec: &[f64], trace: Trace) -> Decoded {
        Decoded { b_hat: self.link.encoder.extract(&llr::hard_decisions(l_fec)), trace }
    }

    /// Demap once, then alternate shaping decoder (input direction) and a
    /// fresh BP decode.
    pub fn simplified(&self, obs: &Observation, demapper: &Demapper, truth: Option<&Frame>) -> Result<Decoded> {
        let lay = &self.link.layout;
        let ext_z = demapper.extrinsic(obs, &self.la_static, &self.la_static)?;
        let mut trace = Trace::default();
        if self.cfg.record_llrs {
            trace.demap_posteriors.push(ext_z.iter().zip(&self.la_static).map(|(a, b)| a + b).collect());
        }
        let (la_c, la_s) = lay.split_z(&ext_z);
        let mut la_d = vec![0.0; lay.cfg.d_len()];
        let mut l_fec = Vec::new();
        for it in 0..self.cfg.outer_iters {
            let le_d = self.link.shaping.decode_input(&la_c, &la_d);
            let la_u = lay.u_from_ds(&le_d, &la_s);
            l_fec = self.link.graph.decode(&la_u, self.cfg.bp_iters_per_outer).llr;
            let le_u: Vec<f64> = l_fec.iter().zip(&la_u).map(|(a, b)| llr::clip(a - b)).collect();
            la_d = lay.ds_from_u(&le_u).0;
            trace.entries.push(self.entry(it + 1, &l_fec, truth));
        }
        Ok(self.finish(&l_fec, trace))
    }

    /// Full iterative detection and decoding.
    pub fn idd(&self, obs: &Observation, demapper: &Demapper, truth: Option<&Frame>) -> Result<Decoded> {
        let lay = &self.link.layout;
        let graph = &self.link.graph;
        let (static_c, _) = lay.split_z(&self.la_static);
        let mut la_z = self.la_static.clone();
        let mut la_d = vec![0.0; lay.cfg.d_len()];
        let mut state = graph.initial_state();
        let mut trace = Trace::default();
        let mut l_fec = Vec::new();
        for it in 0..self.cfg.outer_iters {
            let ext_z = demapper.extrinsic(obs, &la_z, &self.la_static)?;
            if self.cfg.record_llrs {
                trace.demap_posteriors.push(ext_z.iter().zip(&la_z).map(|(a, b)| a + b).collect());
            }
            let (la_c, la_s) = lay.split_z(&ext_z);
            let le_d = self.link.shaping.decode_input(&la_c, &la_d);
            let la_u = lay.u_from_ds(&le_d, &la_s);
            if !self.cfg.warm_start {
                state = graph.initial_state();
            }
            l_fec = graph.decode_from(&mut state, &la_u, self.cfg.bp_iters_per_outer, true).llr;
            let le_u: Vec<f64> = l_fec.iter().zip(&la_u).map(|(a, b)| llr::clip(a - b)).collect();
            let (next_d, next_s) = lay.ds_from_u(&le_u);
            la_d = next_d;
            let mut le_c = self.link.shaping.decode_output(&la_c, &la_d);
            if self.cfg.shaped_prior == ShapedPrior::ReplacePlusStatic {
                for (v, s) in le_c.iter_mut().zip(&static_c) {
                    *v = llr::clip(*v + s);
                }
            }
            la_z = lay.merge_z(&le_c, &next_s);
            trace.entries.push(self.entry(it + 1, &l_fec, truth));
        }
        Ok(self.finish(&l_fec, trace))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{awgn, ebn0_to_n0};
    use crate::constellation::{make_apsk32, relabel_for_shaping, ShapingSpec};
    use crate::fec::builtin_code;
    use crate::rng::substream;
    use crate::shaping_code::ShapingCode;

    fn shaped_link(code: &str) -> Link {
        let h = builtin_code(code).unwrap();
        let spec = ShapingSpec::new(&[0], 0.8125).unwrap();
        let (c, _) = relabel_for_shaping(&make_apsk32(), &spec);
        let dist = crate::constellation::symbol_distribution(5, &spec).unwrap();
        let c = crate::constellation::normalize(c.points(), &dist).unwrap();
        Link::new(h, Some(ShapingCode::build(2, 4).unwrap()), &[0], c, 5, 6).unwrap()
    }

    fn run(link: &Link, cfg: ReceiverConfig, ebn0: f64, seed: u64) -> (Frame, Decoded) {
        let mut rng = substream(seed, &[]);
        let f = link.transmit(&link.random_message(&mut rng)).unwrap();
        let n0 = ebn0_to_n0(ebn0, link.cfg().info_rate());
        let y = awgn(&f.x, n0, &mut rng);
        let d = Demapper::Map(MapDemapper::new(&link.constellation));
        let out = Receiver::new(link, cfg).receive(&Observation::awgn(y, n0), &d, Some(&f)).unwrap();
        (f, out)
    }

    #[test]
    fn noiseless_frames_decode_in_one_iteration() {
        let link = shaped_link("reg36-n108");
        for cfg in [ReceiverConfig::simplified(), ReceiverConfig::idd()] {
            let (f, out) = run(&link, cfg, 80.0, 1);
            assert_eq!(out.b_hat, f.b);
            assert_eq!(out.trace.entries[0].bit_errors, Some(0));
            assert_eq!(out.trace.entries[0].syndrome_weight, 0);
        }
    }

    #[test]
    fn one_idd_pass_equals_one_simplified_round() {
        let link = shaped_link("peg-n1440-r23");
        let s = ReceiverConfig { outer_iters: 1, ..ReceiverConfig::simplified() };
        let i = ReceiverConfig { outer_iters: 1, bp_iters_per_outer: 40, ..ReceiverConfig::idd() };
        for seed in 0..5 {
            let (_, a) = run(&link, s.clone(), 4.5, seed);
            let (_, b) = run(&link, i.clone(), 4.5, seed);
            assert_eq!(a, b);
        }
    }

    #[test]
    fn identity_shaping_matches_plain_bicm() {
        let h = builtin_code("reg36-n1440").unwrap();
        let with_id = Link::new(h.clone(), Some(ShapingCode::identity(1)), &[0], make_apsk32(), 3, 4).unwrap();
        let mut rng = substream(9, &[]);
        for _ in 0..4 {
            let f = with_id.transmit(&with_id.random_message(&mut rng)).unwrap();
            let n0 = ebn0_to_n0(5.0, with_id.cfg().info_rate());
            let y = awgn(&f.x, n0, &mut rng);
            let dm = MapDemapper::new(&with_id.constellation);
            let out = Receiver::new(&with_id, ReceiverConfig::simplified())
                .receive(&Observation::awgn(y.clone(), n0), &Demapper::Map(dm.clone()), None)
                .unwrap();
            // Plain BICM: demap, undo the stream maps, decode.
            let ext = dm.extrinsic(&y, &[n0], &vec![0.0; 1440]);
            let (c, s) = with_id.layout.split_z(&ext);
            let la_u = with_id.layout.u_from_ds(&c, &s);
            let l = with_id.graph.decode(&la_u, 40).llr;
            assert_eq!(out.b_hat, with_id.encoder.extract(&llr::hard_decisions(&l)));
        }
    }

    #[test]
    fn noiseless_stream_maps_invert_transmit_maps() {
        let link = shaped_link("peg-n1440-r23");
        let mut rng = substream(3, &[]);
        let f = link.transmit(&link.random_message(&mut rng)).unwrap();
        let d = MapDemapper::new(&link.constellation);
        let ext = d.extrinsic(&f.x, &[1e-3], &vec![0.0; f.z.len()]);
        let (la_c, la_s) = link.layout.split_z(&ext);
        assert_eq!(llr::hard_decisions(&la_c), f.c);
        assert_eq!(llr::hard_decisions(&la_s), f.s);
        let le_d = link.shaping.decode_input(&la_c, &vec![0.0; f.d.len()]);
        assert_eq!(llr::hard_decisions(&le_d), f.d);
        assert_eq!(llr::hard_decisions(&link.layout.u_from_ds(&le_d, &la_s)), f.u);
    }

    #[test]
    fn receivers_are_deterministic() {
        let link = shaped_link("reg36-n108");
        let cfg = ReceiverConfig { record_llrs: true, outer_iters: 5, ..ReceiverConfig::idd() };
        let (_, a) = run(&link, cfg.clone(), 5.0, 2);
        let (_, b) = run(&link, cfg, 5.0, 2);
        assert_eq!(a, b);
        assert_eq!(a.trace.demap_posteriors.len(), 5);
        assert!(a.trace.to_csv(54).starts_with("iteration,mean_abs_llr"));
        assert!(a.trace.to_json().unwrap().contains("demap_posteriors"));
    }

    #[test]
    fn frame_errors_do_not_grow_with_outer_iterations() {
        let link = shaped_link("reg36-n108");
        let frames = 200;
        let mut errors = Vec::new();
        for outer in [1, 3, 8] {
            let cfg = ReceiverConfig { outer_iters: outer, ..ReceiverConfig::simplified() };
            let fe = (0..frames)
                .filter(|&s| {
                    let (f, out) = run(&link, cfg.clone(), 4.0, 1000 + s);
                    out.b_hat != f.b
                })
                .count();
            errors.push(fe);
        }
        // Allow Monte-Carlo slack: two standard errors of a binomial count.
        for w in errors.windows(2) {
            let slack = 2.0 * (w[0].max(1) as f64).sqrt();
            assert!(w[1] as f64 <= w[0] as f64 + slack, "{errors:?}");
        }
    }
}
