//! Flooding sum-product decoding (tanh rule) in the LLR domain.
//!
//! One iteration maps the check-to-variable messages and the a priori LLRs
//! to new messages and posterior LLRs. The map is smooth away from the clip
//! bounds, and [`TannerGraph::iterate_vjp`] gives its exact adjoint so that
//! chains of iterations can be trained end to end.

use super::ParityCheckMatrix;
use crate::llr::{self, LLR_CLIP};

/// Bound on the tanh product before `atanh`.
pub const ATANH_CLIP: f64 = 1.0 - 1e-12;

/// Edge-indexed view of a parity-check matrix. Edges are grouped by check.
#[derive(Debug, Clone)]
pub struct TannerGraph {
    n: usize,
    chk_ptr: Vec<usize>,
    edge_var: Vec<usize>,
    var_ptr: Vec<usize>,
    var_edges: Vec<usize>,
}

/// Check-to-variable messages carried between iterations.
#[derive(Debug, Clone, PartialEq)]
pub struct BpState {
    pub c2v: Vec<f64>,
    pub iterations: usize,
}

#[derive(Debug, Clone)]
pub struct BpOutcome {
    pub llr: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Intermediate values of one iteration, kept for the adjoint.
struct Forward {
    v2c: Vec<f64>,
    tanh: Vec<f64>,
    prod: Vec<f64>,
    c2v: Vec<f64>,
    posterior: Vec<f64>,
}

impl TannerGraph {
    pub fn new(h: &ParityCheckMatrix) -> Self {
        let mut chk_ptr = vec![0];
        let mut edge_var = Vec::with_capacity(h.edges());
        for row in h.rows() {
            edge_var.extend_from_slice(row);
            chk_ptr.push(edge_var.len());
        }
        let mut var_lists = vec![Vec::new(); h.n()];
        for (e, &v) in edge_var.iter().enumerate() {
            var_lists[v].push(e);
        }
        let mut var_ptr = vec![0];
        let mut var_edges = Vec::with_capacity(edge_var.len());
        for l in var_lists {
            var_edges.extend(l);
            var_ptr.push(var_edges.len());
        }
        Self { n: h.n(), chk_ptr, edge_var, var_ptr, var_edges }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> usize {
        self.edge_var.len()
    }

    pub fn initial_state(&self) -> BpState {
        BpState { c2v: vec![0.0; self.edges()], iterations: 0 }
    }

    fn checks(&self) -> impl Iterator<Item = std::ops::Range<usize>> + '_ {
        self.chk_ptr.windows(2).map(|w| w[0]..w[1])
    }

    fn var_edge_list(&self, v: usize) -> &[usize] {
        &self.var_edges[self.var_ptr[v]..self.var_ptr[v + 1]]
    }

    pub fn syndrome_ok(&self, llr: &[f64]) -> bool {
        self.checks()
            .all(|r| r.fold(0u8, |acc, e| acc ^ llr::hard(llr[self.edge_var[e]])) == 0)
    }

    fn forward(&self, c2v_in: &[f64], la: &[f64]) -> Forward {
        assert_eq!(la.len(), self.n, "a priori length");
        assert_eq!(c2v_in.len(), self.edges(), "message count");
        let mut v2c = vec![0.0; self.edges()];
        for v in 0..self.n {
            let edges = self.var_edge_list(v);
            let total: f64 = la[v] + edges.iter().map(|&e| c2v_in[e]).sum::<f64>();
            for &e in edges {
                v2c[e] = total - c2v_in[e];
            }
        }
        // With L = ln P1/P0, tanh(-L/2) = E[(-1)^b], which multiplies across a check.
        let tanh: Vec<f64> = v2c.iter().map(|&x| (-0.5 * llr::clip(x)).tanh()).collect();
        let mut prod = vec![0.0; self.edges()];
        let mut c2v = vec![0.0; self.edges()];
        for range in self.checks() {
            let t = &tanh[range.clone()];
            // Exclusive products via prefix and suffix scans.
            let mut prefix = 1.0;
            for (i, e) in range.clone().enumerate() {
                prod[e] = prefix;
                prefix *= t[i];
            }
            let mut suffix = 1.0;
            for (i, e) in range.clone().enumerate().rev() {
                prod[e] *= suffix;
                suffix *= t[i];
            }
        }
        for (c, &p) in c2v.iter_mut().zip(&prod) {
            *c = llr::clip(-2.0 * p.clamp(-ATANH_CLIP, ATANH_CLIP).atanh());
        }
        let mut posterior = la.to_vec();
        for (e, &v) in self.edge_var.iter().enumerate() {
            posterior[v] += c2v[e];
        }
        Forward { v2c, tanh, prod, c2v, posterior }
    }

    /// One flooding iteration. Updates `state` and returns posterior LLRs.
    pub fn iterate(&self, state: &mut BpState, la: &[f64]) -> Vec<f64> {
        let f = self.forward(&state.c2v, la);
        state.c2v = f.c2v;
        state.iterations += 1;
        f.posterior
    }

    /// Pure form of [`iterate`]: `(c2v_out, posterior)`.
    pub fn iterate_pure(&self, c2v_in: &[f64], la: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let f = self.forward(c2v_in, la);
        (f.c2v, f.posterior)
    }

    /// Adjoint of one iteration. Given cotangents of the outgoing messages
    /// and posterior, returns cotangents of the incoming messages and the a
    /// priori LLRs.
    pub fn iterate_vjp(&self, c2v_in: &[f64], la: &[f64], g_c2v: &[f64], g_post: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let f = self.forward(c2v_in, la);
        let mut g_la = g_post.to_vec();
        // Through c2v_out: both the explicit output and the posterior sum.
        let mut g_prod = vec![0.0; self.edges()];
        for e in 0..self.edges() {
            let g = g_c2v[e] + g_post[self.edge_var[e]];
            let raw = 2.0 * f.prod[e].clamp(-ATANH_CLIP, ATANH_CLIP).atanh();
            if g == 0.0 || raw.abs() >= LLR_CLIP || f.prod[e].abs() >= ATANH_CLIP {
                continue;
            }
            g_prod[e] = -g * 2.0 / (1.0 - f.prod[e] * f.prod[e]);
        }
        // prod[e] = product of tanh over the other edges of its check.
        let mut g_tanh = vec![0.0; self.edges()];
        for range in self.checks() {
            for e in range.clone() {
                if g_prod[e] == 0.0 {
                    continue;
                }
                for e2 in range.clone().filter(|&x| x != e) {
                    let others: f64 = range.clone().filter(|&x| x != e && x != e2).map(|x| f.tanh[x]).product();
                    g_tanh[e2] += g_prod[e] * others;
                }
            }
        }
        let mut g_v2c = vec![0.0; self.edges()];
        for e in 0..self.edges() {
            if f.v2c[e].abs() < LLR_CLIP {
                g_v2c[e] = -g_tanh[e] * 0.5 * (1.0 - f.tanh[e] * f.tanh[e]);
            }
        }
        // v2c[e] = la[v] + sum_{e' at v} c2v_in[e'] - c2v_in[e].
        let mut g_c2v_in = vec![0.0; self.edges()];
        for v in 0..self.n {
            let edges = self.var_edge_list(v);
            let total: f64 = edges.iter().map(|&e| g_v2c[e]).sum();
            g_la[v] += total;
            for &e in edges {
                g_c2v_in[e] = total - g_v2c[e];
            }
        }
        (g_c2v_in, g_la)
    }

    /// Up to `max_iters` iterations from a fresh state, stopping as soon as
    /// the hard decisions satisfy every check. Zero iterations returns `la`.
    pub fn decode(&self, la: &[f64], max_iters: usize) -> BpOutcome {
        let mut state = self.initial_state();
        self.decode_from(&mut state, la, max_iters, true)
    }

    /// Runs iterations on an existing state.
    pub fn decode_from(&self, state: &mut BpState, la: &[f64], iters: usize, early_exit: bool) -> BpOutcome {
        let mut post = la.to_vec();
        let mut done = 0;
        let mut converged = false;
        for _ in 0..iters {
            post = self.iterate(state, la);
            done += 1;
            if early_exit && self.syndrome_ok(&post) {
                converged = true;
                break;
            }
        }
        if !converged {
            converged = self.syndrome_ok(&post);
        }
        BpOutcome { llr: post, iterations: done, converged }
    }
}

/// Convenience wrapper building the graph on the fly.
pub fn bp_decode(h: &ParityCheckMatrix, la: &[f64], max_iters: usize) -> Vec<f64> {
    TannerGraph::new(h).decode(la, max_iters).llr
}

/// One iteration on an explicit state.
pub fn bp_iterate(graph: &TannerGraph, state: &mut BpState, la: &[f64]) -> Vec<f64> {
    graph.iterate(state, la)
}

/// Extrinsic LLRs `L_FEC - L_a`.
pub fn extrinsic(l_fec: &[f64], la: &[f64]) -> Vec<f64> {
    l_fec.iter().zip(la).map(|(a, b)| a - b).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fec::{builtin_code, hamming74, peg_code, ParityCheckMatrix, SystematicEncoder};
    use rand::{Rng, SeedableRng};

    fn to_llr(bits: &[u8], mag: f64) -> Vec<f64> {
        bits.iter().map(|&b| if b == 1 { mag } else { -mag }).collect()
    }

    #[test]
    fn noiseless_codeword_decodes_in_one_iteration() {
        let h = builtin_code("reg36-n96").unwrap();
        let enc = SystematicEncoder::new(&h).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let msg: Vec<u8> = (0..enc.k()).map(|_| rng.random_range(0..2)).collect();
        let cw = enc.encode(&msg).unwrap();
        let out = TannerGraph::new(&h).decode(&to_llr(&cw, 20.0), 40);
        assert_eq!(out.iterations, 1);
        assert!(out.converged);
        assert_eq!(llr::hard_decisions(&out.llr), cw);
    }

    #[test]
    fn hamming_corrects_every_single_weak_error() {
        let h = hamming74();
        let enc = SystematicEncoder::new(&h).unwrap();
        let g = TannerGraph::new(&h);
        for msg in 0..16u8 {
            let bits: Vec<u8> = (0..4).map(|i| (msg >> i) & 1).collect();
            let cw = enc.encode(&bits).unwrap();
            for flip in 0..7 {
                let mut la = to_llr(&cw, 8.0);
                la[flip] = -la[flip].signum() * 2.0;
                // ML oracle: the syndrome of the received hard word points at the flip.
                let mut rx = cw.clone();
                rx[flip] ^= 1;
                assert!(h.syndrome_weight(&rx) > 0);
                let out = g.decode(&la, 10);
                assert!(out.converged);
                assert_eq!(llr::hard_decisions(&out.llr), cw, "msg {msg} flip {flip}");
            }
        }
    }

    #[test]
    fn single_check_message_matches_enumeration_for_every_degree() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(21);
        for d in 2..8 {
            let h = ParityCheckMatrix::from_rows(d, vec![(0..d).collect()]).unwrap();
            let g = TannerGraph::new(&h);
            let la: Vec<f64> = (0..d).map(|_| rng.random_range(-3.0..3.0)).collect();
            let (c2v, _) = g.iterate_pure(&vec![0.0; d], &la);
            // P(b_0 = 1 | even parity, others) by brute force over 2^(d-1) words.
            let (mut p1, mut p0) = (0.0, 0.0);
            for word in 0u32..1 << (d - 1) {
                let w: f64 = (0..d - 1)
                    .map(|j| {
                        let b = (word >> j) & 1;
                        let l = la[j + 1];
                        if b == 1 { 1.0 / (1.0 + (-l).exp()) } else { 1.0 / (1.0 + l.exp()) }
                    })
                    .product();
                if word.count_ones() % 2 == 1 {
                    p1 += w;
                } else {
                    p0 += w;
                }
            }
            assert!((c2v[0] - (p1 / p0).ln()).abs() < 1e-9, "degree {d}: {} vs {}", c2v[0], (p1 / p0).ln());
        }
    }

    #[test]
    fn zero_input_stays_zero() {
        let h = builtin_code("reg36-n96").unwrap();
        let g = TannerGraph::new(&h);
        let mut st = g.initial_state();
        for _ in 0..3 {
            let post = g.iterate(&mut st, &[0.0; 96]);
            assert!(post.iter().all(|&x| x == 0.0));
        }
        assert!(st.c2v.iter().all(|&x| x == 0.0));
        assert!(bp_decode(&h, &[0.0; 96], 40).iter().all(|&x| x == 0.0));
    }

    #[test]
    fn zero_iterations_return_input() {
        let la = vec![0.3, -1.0, 2.0, 0.1, -0.4, 5.0, -2.0];
        assert_eq!(bp_decode(&hamming74(), &la, 0), la);
    }

    #[test]
    fn repeated_iterate_equals_decode_without_exit() {
        let h = builtin_code("reg36-n96").unwrap();
        let g = TannerGraph::new(&h);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        let la: Vec<f64> = (0..96).map(|_| rng.random_range(-3.0..3.0)).collect();
        let mut st = g.initial_state();
        let mut post = vec![];
        for _ in 0..40 {
            post = bp_iterate(&g, &mut st, &la);
        }
        let mut st2 = g.initial_state();
        let full = g.decode_from(&mut st2, &la, 40, false);
        assert_eq!(post, full.llr);
        assert_eq!(st, st2);
    }

    #[test]
    fn early_exit_keeps_hard_decision() {
        let h = builtin_code("reg36-n96").unwrap();
        let enc = SystematicEncoder::new(&h).unwrap();
        let g = TannerGraph::new(&h);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(8);
        for _ in 0..50 {
            let msg: Vec<u8> = (0..enc.k()).map(|_| rng.random_range(0..2)).collect();
            let cw = enc.encode(&msg).unwrap();
            let la: Vec<f64> = cw
                .iter()
                .map(|&b| (if b == 1 { 2.0 } else { -2.0 }) + rng.random_range(-2.5..2.5))
                .collect();
            let early = g.decode(&la, 40);
            let mut st = g.initial_state();
            let full = g.decode_from(&mut st, &la, 40, false);
            if early.converged {
                assert_eq!(llr::hard_decisions(&early.llr), llr::hard_decisions(&full.llr));
            }
        }
    }

    #[test]
    fn decoder_commutes_with_codeword_sign_flips() {
        let h = builtin_code("reg36-n96").unwrap();
        let enc = SystematicEncoder::new(&h).unwrap();
        let g = TannerGraph::new(&h);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(12);
        let msg: Vec<u8> = (0..enc.k()).map(|_| rng.random_range(0..2)).collect();
        let flip = enc.encode(&msg).unwrap();
        let la: Vec<f64> = (0..96).map(|_| rng.random_range(-4.0..4.0)).collect();
        let flipped: Vec<f64> = la.iter().zip(&flip).map(|(&l, &f)| if f == 1 { -l } else { l }).collect();
        let a = g.decode_from(&mut g.initial_state(), &la, 5, false).llr;
        let b = g.decode_from(&mut g.initial_state(), &flipped, 5, false).llr;
        for ((x, y), &f) in a.iter().zip(&b).zip(&flip) {
            let expected = if f == 1 { -x } else { *x };
            assert!((expected - y).abs() < 1e-9);
        }
    }

    #[test]
    fn iteration_adjoint_matches_finite_differences() {
        let h = peg_code(14, 6, 3, 3).unwrap();
        let g = TannerGraph::new(&h);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        for _ in 0..10 {
            let la: Vec<f64> = (0..14).map(|_| rng.random_range(-3.0..3.0)).collect();
            let c2v: Vec<f64> = (0..g.edges()).map(|_| rng.random_range(-2.0..2.0)).collect();
            let wc: Vec<f64> = (0..g.edges()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let wp: Vec<f64> = (0..14).map(|_| rng.random_range(-1.0..1.0)).collect();
            let f = |c: &[f64], l: &[f64]| {
                let (co, po) = g.iterate_pure(c, l);
                co.iter().zip(&wc).map(|(a, b)| a * b).sum::<f64>() + po.iter().zip(&wp).map(|(a, b)| a * b).sum::<f64>()
            };
            let (gc, gl) = g.iterate_vjp(&c2v, &la, &wc, &wp);
            let h = 1e-4;
            for i in 0..14 {
                let (mut p, mut m) = (la.clone(), la.clone());
                p[i] += h;
                m[i] -= h;
                let fd = (f(&c2v, &p) - f(&c2v, &m)) / (2.0 * h);
                assert!((fd - gl[i]).abs() <= 1e-5 * fd.abs().max(1.0), "la[{i}] {fd} vs {}", gl[i]);
            }
            for i in 0..g.edges() {
                let (mut p, mut m) = (c2v.clone(), c2v.clone());
                p[i] += h;
                m[i] -= h;
                let fd = (f(&p, &la) - f(&m, &la)) / (2.0 * h);
                assert!((fd - gc[i]).abs() <= 1e-5 * fd.abs().max(1.0), "c2v[{i}] {fd} vs {}", gc[i]);
            }
        }
    }
}
