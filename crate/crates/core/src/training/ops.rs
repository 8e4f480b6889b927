//! Differentiable primitives and their tape helpers.

use std::ops::Range;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;

use super::tape::{Op, Tape, Var};
use crate::constellation::{bit_product_distribution, label_bit};
use crate::demap::MapDemapper;
use crate::fec::TannerGraph;
use crate::llr::{self, LLR_CLIP};
use crate::shaping_code::ShapingCode;

const LN2: f64 = std::f64::consts::LN_2;

macro_rules! name {
    ($n:literal) => {
        fn name(&self) -> &'static str {
            $n
        }
    };
}

pub struct Add;
impl Op for Add {
    name!("add");
    fn forward(&self, x: &[&[f64]]) -> Vec<f64> {
        x[0].iter().zip(x[1]).map(|(a, b)| a + b).collect()
    }
    fn backward(&self, _: &[&[f64]], _: &[f64], g: &[f64], gi: &mut [Vec<f64>]) {
        gi[0].copy_from_slice(g);
        gi[1].copy_from_slice(g);
    }
}

pub struct Sub;
impl Op for Sub {
    name!("sub");
    fn forward(&self, x: &[&[f64]]) -> Vec<f64> {
        x[0].iter().zip(x[1]).map(|(a, b)| a - b).collect()
    }
    fn backward(&self, _: &[&[f64]], _: &[f64], g: &[f64], gi: &mut [Vec<f64>]) {
        gi[0].copy_from_slice(g);
        gi[1].iter_mut().zip(g).for_each(|(o, v)| *o = -v);
    }
}

/// Elementwise product.
pub struct Mul;
impl Op for Mul {
    name!("mul");
    fn forward(&self, x: &[&[f64]]) -> Vec<f64> {
        x[0].iter().zip(x[1]).map(|(a, b)| a * b).collect()
    }
    fn backward(&self, x: &[&[f64]], _: &[f64], g: &[f64], gi: &mut [Vec<f64>]) {
        for i in 0..g.len() {
            gi[0][i] = g[i] * x[1][i];
            gi[1][i] = g[i] * x[0][i];
        }
    }
}

pub struct Scale(pub f64);
impl Op for Scale {
    name!("scale");
    fn forward(&self, x: &[&[f64]]) -> Vec<f64> {
        x[0].iter().map(|a| a * self.0).collect()
    }
    fn backward(&self, _: &[&[f64]], _: &[f64], g: &[f64], gi: &mut [Vec<f64>]) {
        gi[0].iter_mut().zip(g).for_each(|(o, v)| *o = v * self.0);
    }
}

/// Elementwise product with a constant vector.
pub struct MulConst(pub Vec<f64>);
impl Op for MulConst {
    name!("mul_const");
    fn forward(&self, x: &[&[f64]]) -> Vec<f64> {
        x[0].iter().zip(&self.0).map(|(a, b)| a * b).collect()
    }
    fn backward(&self, _: &[&[f64]], _: &[f64], g: &[f64], gi: &mut [Vec<f64>]) {
        gi[0].iter_mut().zip(g.iter().zip(&self.0)).for_each(|(o, (v, c))| *o = v * c);
    }
}

pub struct AddConst(pub Vec<f64>);
impl Op for AddConst {
    name!("add_const");
    fn forward(&self, x: &[&[f64]]) -> Vec<f64> {
        x[0].iter().zip(&self.0).map(|(a, b)| a + b).collect()
    }
    fn backward(&self, _: &[&[f64]], _: &[f64], g: &[f64], gi: &mut [Vec<f64>]) {
        gi[0].copy_from_slice(g);
    }
}

pub struct Sum;
impl Op for Sum {
    name!("sum");
    fn forward(&self, x: &[&[f64]]) -> Vec<f64> {
        vec![x[0].iter().sum()]
    }
    fn backward(&self, _: &[&[f64]], _: &[f64], g: &[f64], gi: &mut [Vec<f64>]) {
        gi[0].fill(g[0]);
    }
}

pub struct Logistic;
impl Op for Logistic {
    name!("logistic");
    fn forward(&self, x: &[&[f64]]) -> Vec<f64> {
        x[0].iter().map(|&a| llr::sigmoid(a)).collect()
    }
    fn backward(&self, _: &[&[f64]], y: &[f64], g: &[f64], gi: &mut [Vec<f64>]) {
        for i in 0..g.len() {
            gi[0][i] = g[i] * y[i] * (1.0 - y[i]);
        }
    }
}

pub struct Relu;
impl Op for Relu {
    name!("relu");
    fn forward(&self, x: &[&[f64]]) -> Vec<f64> {
        x[0].iter().map(|&a| a.max(0.0)).collect()
    }
    fn backward(&self, x: &[&[f64]], _: &[f64], g: &[f64], gi: &mut [Vec<f64>]) {
        for i in 0..g.len() {
            gi[0][i] = if x[0][i] > 0.0 { g[i] } else { 0.0 };
        }
    }
}

/// Symmetric clamp; flat outside the bound.
pub struct Clip(pub f64);
impl Op for Clip {
    name!("clip");
    fn forward(&self, x: &[&[f64]]) -> Vec<f64> {
        x[0].iter().map(|&a| a.clamp(-self.0, self.0)).collect()
    }
    fn backward(&self, x: &[&[f64]], _: &[f64], g: &[f64], gi: &mut [Vec<f64>]) {
        for i in 0..g.len() {
            gi[0][i] = if x[0][i].abs() < self.0 { g[i] } else { 0.0 };
        }
    }
}

/// `out[i] = x[idx[i]]`; indices may repeat or skip.
pub struct Gather(pub Arc<Vec<usize>>);
impl Op for Gather {
    name!("gather");
    fn forward(&self, x: &[&[f64]]) -> Vec<f64> {
        self.0.iter().map(|&i| x[0][i]).collect()
    }
    fn backward(&self, _: &[&[f64]], _: &[f64], g: &[f64], gi: &mut [Vec<f64>]) {
        for (&i, &v) in self.0.iter().zip(g) {
            gi[0][i] += v;
        }
    }
}

pub struct Concat;
impl Op for Concat {
    name!("concat");
    fn forward(&self, x: &[&[f64]]) -> Vec<f64> {
        x.concat()
    }
    fn backward(&self, _: &[&[f64]], _: &[f64], g: &[f64], gi: &mut [Vec<f64>]) {
        let mut off = 0;
        for b in gi {
            let n = b.len();
            b.copy_from_slice(&g[off..off + n]);
            off += n;
        }
    }
}

pub struct Slice(pub Range<usize>);
impl Op for Slice {
    name!("slice");
    fn forward(&self, x: &[&[f64]]) -> Vec<f64> {
        x[0][self.0.clone()].to_vec()
    }
    fn backward(&self, _: &[&[f64]], _: &[f64], g: &[f64], gi: &mut [Vec<f64>]) {
        gi[0][self.0.clone()].copy_from_slice(g);
    }
}

/// Complex product with constants on interleaved `[re, im]` pairs.
pub struct ComplexMulConst(pub Vec<Complex64>);
impl Op for ComplexMulConst {
    name!("complex_mul_const");
    fn forward(&self, x: &[&[f64]]) -> Vec<f64> {
        x[0].chunks_exact(2)
            .zip(&self.0)
            .flat_map(|(a, c)| {
                let v = Complex64::new(a[0], a[1]) * c;
                [v.re, v.im]
            })
            .collect()
    }
    fn backward(&self, _: &[&[f64]], _: &[f64], g: &[f64], gi: &mut [Vec<f64>]) {
        // d(re, im) of a*c: the adjoint multiplies by conj(c).
        for (j, c) in self.0.iter().enumerate() {
            let v = Complex64::new(g[2 * j], g[2 * j + 1]) * c.conj();
            gi[0][2 * j] = v.re;
            gi[0][2 * j + 1] = v.im;
        }
    }
}

/// Bit-product symbol distribution from a scalar `p0`.
pub struct SymbolDist {
    pub m: usize,
    pub shaped: Vec<bool>,
}
impl Op for SymbolDist {
    name!("symbol_dist");
    fn forward(&self, x: &[&[f64]]) -> Vec<f64> {
        bit_product_distribution(self.m, &self.shaped, x[0][0])
    }
    fn backward(&self, x: &[&[f64]], y: &[f64], g: &[f64], gi: &mut [Vec<f64>]) {
        let p0 = x[0][0];
        let mut acc = 0.0;
        for (w, &gv) in g.iter().enumerate().take(y.len()) {
            // P is a product of p0 and (1 - p0) factors; differentiate each.
            let zeros = (0..self.m).filter(|&k| self.shaped[k] && label_bit(w, k, self.m) == 0).count() as i32;
            let ones = (0..self.m).filter(|&k| self.shaped[k] && label_bit(w, k, self.m) == 1).count() as i32;
            let rest: f64 = (0..self.m).filter(|&k| !self.shaped[k]).map(|_| 0.5).product();
            let d = rest
                * (f64::from(zeros) * p0.powi(zeros - 1) * (1.0 - p0).powi(ones)
                    - f64::from(ones) * p0.powi(zeros) * (1.0 - p0).powi(ones - 1));
            acc += gv * d;
        }
        gi[0][0] = acc;
    }
}

/// Unit-energy normalization: inputs raw interleaved points and symbol
/// probabilities.
pub struct Normalize;
impl Op for Normalize {
    name!("normalize");
    fn forward(&self, x: &[&[f64]]) -> Vec<f64> {
        let e = energy(x[0], x[1]);
        let s = e.sqrt().recip();
        x[0].iter().map(|v| v * s).collect()
    }
    fn backward(&self, x: &[&[f64]], _: &[f64], g: &[f64], gi: &mut [Vec<f64>]) {
        let (r, p) = (x[0], x[1]);
        let e = energy(r, p);
        let inv = e.sqrt().recip();
        let gr: f64 = g.iter().zip(r).map(|(a, b)| a * b).sum();
        let k = gr * inv / e;
        for i in 0..r.len() {
            gi[0][i] = g[i] * inv - p[i / 2] * r[i] * k;
        }
        for j in 0..p.len() {
            gi[1][j] = -0.5 * k * (r[2 * j] * r[2 * j] + r[2 * j + 1] * r[2 * j + 1]);
        }
    }
}

fn energy(r: &[f64], p: &[f64]) -> f64 {
    p.iter().enumerate().map(|(j, &pj)| pj * (r[2 * j] * r[2 * j] + r[2 * j + 1] * r[2 * j + 1])).sum()
}

/// Entropy in bits.
pub struct Entropy;
impl Op for Entropy {
    name!("entropy");
    fn forward(&self, x: &[&[f64]]) -> Vec<f64> {
        vec![x[0].iter().filter(|&&p| p > 0.0).map(|&p| -p * p.log2()).sum()]
    }
    fn backward(&self, x: &[&[f64]], _: &[f64], g: &[f64], gi: &mut [Vec<f64>]) {
        for (o, &p) in gi[0].iter_mut().zip(x[0]) {
            if p > 0.0 {
                *o = -g[0] * (p.log2() + 1.0 / LN2);
            }
        }
    }
}

/// Extrinsic MAP demapping. Inputs: points (2M), y (2N), n0 (1 or N),
/// a priori (N m).
pub struct MapDemap;
impl Op for MapDemap {
    name!("map_demap");
    fn forward(&self, x: &[&[f64]]) -> Vec<f64> {
        let (d, y) = demap_parts(x);
        d.extrinsic(&y, x[2], x[3])
    }
    fn backward(&self, x: &[&[f64]], _: &[f64], g: &[f64], gi: &mut [Vec<f64>]) {
        let (d, y) = demap_parts(x);
        let gr = d.extrinsic_vjp(&y, x[2], x[3], g);
        gi[0].copy_from_slice(&gr.points);
        gi[1].copy_from_slice(&gr.y);
        gi[2].copy_from_slice(&gr.n0);
        gi[3].copy_from_slice(&gr.la);
    }
}

fn to_complex(r: &[f64]) -> Vec<Complex64> {
    r.chunks_exact(2).map(|c| Complex64::new(c[0], c[1])).collect()
}

fn demap_parts(x: &[&[f64]]) -> (MapDemapper, Vec<Complex64>) {
    (MapDemapper::from_points(&to_complex(x[0])), to_complex(x[1]))
}

/// `sum_j w_j sum_k BCE(L_jk, b_jk)` in bits. Inputs: LLRs (N width) and
/// per-row weights (N).
pub struct Bce {
    pub bits: Arc<Vec<u8>>,
    pub width: usize,
}
impl Op for Bce {
    name!("bce");
    fn forward(&self, x: &[&[f64]]) -> Vec<f64> {
        let (l, w) = (x[0], x[1]);
        let mut acc = 0.0;
        for (j, &wj) in w.iter().enumerate() {
            let row: f64 = (j * self.width..(j + 1) * self.width).map(|i| llr::bce(l[i], self.bits[i])).sum();
            acc += wj * row;
        }
        vec![acc / LN2]
    }
    fn backward(&self, x: &[&[f64]], _: &[f64], g: &[f64], gi: &mut [Vec<f64>]) {
        let (l, w) = (x[0], x[1]);
        let s = g[0] / LN2;
        for (j, &wj) in w.iter().enumerate() {
            let mut row = 0.0;
            for i in j * self.width..(j + 1) * self.width {
                row += llr::bce(l[i], self.bits[i]);
                gi[0][i] = s * wj * (llr::sigmoid(l[i]) - f64::from(self.bits[i]));
            }
            gi[1][j] = s * row;
        }
    }
}

/// Shaping decoder towards the inputs (`input = true`) or outputs.
/// Inputs: La(c), La(d).
pub struct ShapeDecode {
    pub code: Arc<ShapingCode>,
    pub input: bool,
}
impl Op for ShapeDecode {
    name!("shape_decode");
    fn forward(&self, x: &[&[f64]]) -> Vec<f64> {
        if self.input {
            self.code.decode_input(x[0], x[1])
        } else {
            self.code.decode_output(x[0], x[1])
        }
    }
    fn backward(&self, x: &[&[f64]], _: &[f64], g: &[f64], gi: &mut [Vec<f64>]) {
        let (gc, gd) = self.code.decode_vjp(self.input, x[0], x[1], g);
        gi[0].copy_from_slice(&gc);
        gi[1].copy_from_slice(&gd);
    }
}

/// One flooding BP iteration on `frames` independent codewords. Inputs:
/// c2v messages (frames * edges) and a priori (frames * n). Output: new
/// messages followed by posteriors.
pub struct BpIterate {
    pub graph: Arc<TannerGraph>,
    pub frames: usize,
}
impl Op for BpIterate {
    name!("bp_iterate");
    fn forward(&self, x: &[&[f64]]) -> Vec<f64> {
        let (e, n) = (self.graph.edges(), self.graph.n());
        let parts: Vec<(Vec<f64>, Vec<f64>)> = (0..self.frames)
            .into_par_iter()
            .map(|f| self.graph.iterate_pure(&x[0][f * e..(f + 1) * e], &x[1][f * n..(f + 1) * n]))
            .collect();
        let mut out = Vec::with_capacity(self.frames * (e + n));
        for (c, _) in &parts {
            out.extend_from_slice(c);
        }
        for (_, p) in &parts {
            out.extend_from_slice(p);
        }
        out
    }
    fn backward(&self, x: &[&[f64]], _: &[f64], g: &[f64], gi: &mut [Vec<f64>]) {
        let (e, n) = (self.graph.edges(), self.graph.n());
        let off = self.frames * e;
        let parts: Vec<(Vec<f64>, Vec<f64>)> = (0..self.frames)
            .into_par_iter()
            .map(|f| {
                self.graph.iterate_vjp(
                    &x[0][f * e..(f + 1) * e],
                    &x[1][f * n..(f + 1) * n],
                    &g[f * e..(f + 1) * e],
                    &g[off + f * n..off + (f + 1) * n],
                )
            })
            .collect();
        for (f, (gc, gl)) in parts.into_iter().enumerate() {
            gi[0][f * e..(f + 1) * e].copy_from_slice(&gc);
            gi[1][f * n..(f + 1) * n].copy_from_slice(&gl);
        }
    }
}

/// Batched dense layer. Inputs: weights (out x in, row-major), bias (out),
/// x (rows x in).
pub struct Affine {
    pub inputs: usize,
    pub outputs: usize,
}
impl Op for Affine {
    name!("affine");
    fn forward(&self, x: &[&[f64]]) -> Vec<f64> {
        let (w, b) = (x[0], x[1]);
        let mut out = Vec::with_capacity(x[2].len() / self.inputs * self.outputs);
        for xr in x[2].chunks_exact(self.inputs) {
            for o in 0..self.outputs {
                out.push(b[o] + w[o * self.inputs..(o + 1) * self.inputs].iter().zip(xr).map(|(a, c)| a * c).sum::<f64>());
            }
        }
        out
    }
    fn backward(&self, x: &[&[f64]], _: &[f64], g: &[f64], gi: &mut [Vec<f64>]) {
        let w = x[0];
        for (r, xr) in x[2].chunks_exact(self.inputs).enumerate() {
            let gr = &g[r * self.outputs..(r + 1) * self.outputs];
            for (o, &go) in gr.iter().enumerate() {
                if go == 0.0 {
                    continue;
                }
                gi[1][o] += go;
                for i in 0..self.inputs {
                    gi[0][o * self.inputs + i] += go * xr[i];
                    gi[2][r * self.inputs + i] += go * w[o * self.inputs + i];
                }
            }
        }
    }
}

impl Tape {
    pub fn add(&mut self, a: Var, b: Var) -> Var {
        self.apply(Add, &[a, b])
    }
    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        self.apply(Sub, &[a, b])
    }
    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        self.apply(Mul, &[a, b])
    }
    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        self.apply(Scale(c), &[a])
    }
    pub fn mul_const(&mut self, a: Var, c: Vec<f64>) -> Var {
        self.apply(MulConst(c), &[a])
    }
    pub fn add_const(&mut self, a: Var, c: Vec<f64>) -> Var {
        self.apply(AddConst(c), &[a])
    }
    pub fn sum(&mut self, a: Var) -> Var {
        self.apply(Sum, &[a])
    }
    pub fn logistic(&mut self, a: Var) -> Var {
        self.apply(Logistic, &[a])
    }
    pub fn relu(&mut self, a: Var) -> Var {
        self.apply(Relu, &[a])
    }
    pub fn clip(&mut self, a: Var) -> Var {
        self.apply(Clip(LLR_CLIP), &[a])
    }
    pub fn gather(&mut self, a: Var, idx: Arc<Vec<usize>>) -> Var {
        self.apply(Gather(idx), &[a])
    }
    pub fn concat(&mut self, parts: &[Var]) -> Var {
        self.apply(Concat, parts)
    }
    pub fn slice(&mut self, a: Var, r: Range<usize>) -> Var {
        self.apply(Slice(r), &[a])
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::constellation::make_apsk32;
    use crate::fec::peg_code;
    use crate::rng::substream;
    use rand::Rng as _;

    /// Checks every input of `op` against central differences of
    /// `<w, op(x)>` with random `w`. Step 1e-4, tolerance 1e-5 relative.
    pub(crate) fn check_op(op: &dyn Op, inputs: &[Vec<f64>], seed: u64) {
        check_op_tol(op, inputs, seed, 1e-4, 1e-5)
    }

    pub(crate) fn check_op_tol(op: &dyn Op, inputs: &[Vec<f64>], seed: u64, h: f64, tol: f64) {
        let xs: Vec<&[f64]> = inputs.iter().map(Vec::as_slice).collect();
        let y = op.forward(&xs);
        let mut rng = substream(seed, &[99]);
        let w: Vec<f64> = (0..y.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut gi: Vec<Vec<f64>> = inputs.iter().map(|x| vec![0.0; x.len()]).collect();
        op.backward(&xs, &y, &w, &mut gi);
        let f = |ins: &[Vec<f64>]| -> f64 {
            let xs: Vec<&[f64]> = ins.iter().map(Vec::as_slice).collect();
            op.forward(&xs).iter().zip(&w).map(|(a, b)| a * b).sum()
        };
        for (a, x) in inputs.iter().enumerate() {
            for i in 0..x.len() {
                let mut p = inputs.to_vec();
                let mut m = inputs.to_vec();
                p[a][i] += h;
                m[a][i] -= h;
                let fd = (f(&p) - f(&m)) / (2.0 * h);
                let an = gi[a][i];
                assert!(
                    (fd - an).abs() <= tol * fd.abs().max(1.0),
                    "{}: input {a}[{i}] fd {fd} vs analytic {an}",
                    op.name()
                );
            }
        }
    }

    fn rv(seed: u64, n: usize, lo: f64, hi: f64) -> Vec<f64> {
        let mut r = substream(seed, &[n as u64]);
        (0..n).map(|_| r.random_range(lo..hi)).collect()
    }

    #[test]
    fn elementwise_primitives() {
        let a = rv(1, 7, -2.0, 2.0);
        let b = rv(2, 7, -2.0, 2.0);
        check_op(&Add, &[a.clone(), b.clone()], 1);
        check_op(&Sub, &[a.clone(), b.clone()], 2);
        check_op(&Mul, &[a.clone(), b.clone()], 3);
        check_op(&Scale(-1.7), std::slice::from_ref(&a), 4);
        check_op(&MulConst(b.clone()), std::slice::from_ref(&a), 5);
        check_op(&AddConst(b.clone()), std::slice::from_ref(&a), 6);
        check_op(&Sum, std::slice::from_ref(&a), 7);
        check_op(&Logistic, std::slice::from_ref(&a), 8);
        // Keep away from the kinks.
        let away: Vec<f64> = a.iter().map(|v| if v.abs() < 0.01 { v + 0.1 } else { *v }).collect();
        check_op(&Relu, std::slice::from_ref(&away), 9);
        check_op(&Clip(1.0), &[away.iter().map(|v| if (v.abs() - 1.0).abs() < 0.01 { v * 1.1 } else { *v }).collect()], 10);
    }

    #[test]
    fn structural_primitives() {
        let a = rv(3, 6, -2.0, 2.0);
        let b = rv(4, 3, -2.0, 2.0);
        check_op(&Gather(Arc::new(vec![5, 0, 0, 2, 3])), std::slice::from_ref(&a), 11);
        check_op(&Concat, &[a.clone(), b.clone()], 12);
        check_op(&Slice(1..4), std::slice::from_ref(&a), 13);
        let c = vec![Complex64::new(0.3, -1.2), Complex64::new(-0.5, 0.8), Complex64::new(2.0, 0.1)];
        check_op(&ComplexMulConst(c), &[a], 14);
    }

    #[test]
    fn distribution_primitives() {
        for shaped in [vec![true, false, false, false, false], vec![true, false, false, false, true]] {
            let op = SymbolDist { m: 5, shaped };
            check_op(&op, &[vec![0.73]], 15);
        }
        let raw = make_apsk32().to_reals();
        let p = bit_product_distribution(5, &[true, false, false, false, false], 0.8);
        check_op(&Normalize, &[raw.iter().map(|v| v * 1.3).collect(), p.clone()], 16);
        check_op(&Entropy, &[p], 17);
    }

    #[test]
    fn demap_and_loss_primitives() {
        let pts = make_apsk32().to_reals();
        let n = 4;
        let y = rv(5, 2 * n, -1.2, 1.2);
        let n0 = rv(6, n, 0.1, 0.6);
        let la = rv(7, 5 * n, -2.0, 2.0);
        check_op(&MapDemap, &[pts.clone(), y.clone(), n0, la.clone()], 18);
        check_op(&MapDemap, &[pts, y, vec![0.3], la.clone()], 19);
        let mut r = substream(8, &[]);
        let bits: Vec<u8> = (0..5 * n).map(|_| r.random_range(0..2)).collect();
        check_op(&Bce { bits: Arc::new(bits), width: 5 }, &[la, rv(9, n, 0.0, 1.0)], 20);
    }

    #[test]
    fn decoder_primitives() {
        let code = Arc::new(ShapingCode::build(2, 4).unwrap());
        let lc = rv(10, 12, -3.0, 3.0);
        let ld = rv(11, 6, -3.0, 3.0);
        check_op(&ShapeDecode { code: code.clone(), input: true }, &[lc.clone(), ld.clone()], 21);
        check_op(&ShapeDecode { code, input: false }, &[lc, ld], 22);
        let g = Arc::new(TannerGraph::new(&peg_code(12, 6, 3, 3).unwrap()));
        let e = g.edges();
        check_op(&BpIterate { graph: g, frames: 2 }, &[rv(12, 2 * e, -2.0, 2.0), rv(13, 24, -3.0, 3.0)], 23);
    }

    #[test]
    fn affine_primitive() {
        let op = Affine { inputs: 3, outputs: 2 };
        check_op(&op, &[rv(14, 6, -1.0, 1.0), rv(15, 2, -1.0, 1.0), rv(16, 12, -1.0, 1.0)], 24);
    }
}
