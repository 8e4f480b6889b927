//! A minimal reverse-mode tape over vector-valued primitives.
//!
//! Every node holds a flat `Vec<f64>`. Primitives are coarse (a whole
//! demapper pass, one BP iteration over a batch) and carry hand-written
//! vector-Jacobian products.

/// A differentiable vector primitive.
pub trait Op: Send + Sync {
    fn name(&self) -> &'static str;

    fn forward(&self, inputs: &[&[f64]]) -> Vec<f64>;

    /// Adds the input cotangents for output cotangent `g_out` into `g_in`,
    /// one pre-sized buffer per input.
    fn backward(&self, inputs: &[&[f64]], output: &[f64], g_out: &[f64], g_in: &mut [Vec<f64>]);
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

struct Node {
    value: Vec<f64>,
    op: Option<Box<dyn Op>>,
    inputs: Vec<Var>,
}

#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Cotangents of every node after one backward pass.
pub struct Grads {
    grads: Vec<Option<Vec<f64>>>,
    lens: Vec<usize>,
}

impl Grads {
    /// Gradient with respect to `v` (zeros if `v` does not reach the output).
    pub fn wrt(&self, v: Var) -> Vec<f64> {
        self.grads[v.0].clone().unwrap_or_else(|| vec![0.0; self.lens[v.0]])
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Records an input (parameter or constant).
    pub fn leaf(&mut self, value: Vec<f64>) -> Var {
        self.nodes.push(Node { value, op: None, inputs: Vec::new() });
        Var(self.nodes.len() - 1)
    }

    pub fn apply(&mut self, op: impl Op + 'static, inputs: &[Var]) -> Var {
        let value = {
            let xs: Vec<&[f64]> = inputs.iter().map(|v| self.nodes[v.0].value.as_slice()).collect();
            op.forward(&xs)
        };
        self.nodes.push(Node { value, op: Some(Box::new(op)), inputs: inputs.to_vec() });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &[f64] {
        &self.nodes[v.0].value
    }

    pub fn scalar(&self, v: Var) -> f64 {
        let x = self.value(v);
        assert_eq!(x.len(), 1, "not a scalar");
        x[0]
    }

    /// Backpropagates from a scalar node with seed 1.
    pub fn backward(&self, out: Var) -> Grads {
        assert_eq!(self.value(out).len(), 1, "backward needs a scalar output");
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; self.nodes.len()];
        grads[out.0] = Some(vec![1.0]);
        for i in (0..=out.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            if let Some(op) = &node.op {
                let xs: Vec<&[f64]> = node.inputs.iter().map(|v| self.nodes[v.0].value.as_slice()).collect();
                let mut g_in: Vec<Vec<f64>> = xs.iter().map(|x| vec![0.0; x.len()]).collect();
                op.backward(&xs, &node.value, &g, &mut g_in);
                for (v, gi) in node.inputs.iter().zip(g_in) {
                    match &mut grads[v.0] {
                        Some(acc) => acc.iter_mut().zip(&gi).for_each(|(a, b)| *a += b),
                        slot @ None => *slot = Some(gi),
                    }
                }
            }
            grads[i] = Some(g);
        }
        Grads { grads, lens: self.nodes.iter().map(|n| n.value.len()).collect() }
    }
}
