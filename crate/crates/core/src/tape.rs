//! Reverse-mode automatic differentiation on a flat operation tape.
//!
//! A [`Tape`] records every operation of one forward pass; node ids grow
//! monotonically, so reverse id order is a valid topological order for the
//! backward sweep. One tape serves exactly one forward pass and is consumed
//! by [`Tape::backward`].
//!
//! Shape violations are programming errors and panic with a message naming
//! the operation and the offending shapes. Scalars are shape `[1]` tensors.

use std::cell::{Cell, RefCell};

use crate::tensor::Tensor;

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug)]
enum Op {
    Leaf,
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    /// Broadcast multiply of a `[1]` scalar against any tensor.
    BScale(Var, Var),
    Scale(Var, f64),
    MatMul(Var, Var),
    Dot(Var, Var),
    ConcatVec(Vec<Var>),
    StackRows(Vec<Var>),
    Row(Var, usize),
    SliceVec(Var, usize),
    SoftmaxVec(Var),
    Tanh(Var),
    Sigmoid(Var),
    Exp(Var),
    Cos(Var),
    Ln(Var),
    Mean(Var),
    Sum(Var),
    Clamp(Var, f64, f64),
    Maximum(Var, Var),
    SteRound(Var),
    /// Adds a `[d]` row vector to every row of an `[n, d]` matrix.
    AddRowVec(Var, Var),
}

struct Node {
    op: Op,
    value: Tensor,
    requires: bool,
}

/// Gradients produced by one backward sweep, indexed by [`Var`].
pub struct Gradients {
    slots: Vec<Option<Tensor>>,
}

impl Gradients {
    /// Gradient with respect to `v`, if `v` required one and was reached.
    pub fn wrt(&self, v: Var) -> Option<&Tensor> {
        self.slots.get(v.0).and_then(|s| s.as_ref())
    }
}

/// Operation tape for one forward+backward pass.
#[derive(Default)]
pub struct Tape {
    nodes: RefCell<Vec<Node>>,
    consumed: Cell<bool>,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.borrow().is_empty()
    }

    fn push(&self, op: Op, value: Tensor, requires: bool) -> Var {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node { op, value, requires });
        Var(nodes.len() - 1)
    }

    fn requires(&self, v: Var) -> bool {
        self.nodes.borrow()[v.0].requires
    }

    /// Inserts a differentiable leaf (a parameter binding).
    pub fn leaf(&self, value: Tensor) -> Var {
        self.push(Op::Leaf, value, true)
    }

    /// Inserts a non-differentiable input.
    pub fn constant(&self, value: Tensor) -> Var {
        self.push(Op::Leaf, value, false)
    }

    pub fn scalar(&self, v: f64) -> Var {
        self.constant(Tensor::scalar(v))
    }

    /// Clone of the forward value at `v`.
    pub fn value(&self, v: Var) -> Tensor {
        self.nodes.borrow()[v.0].value.clone()
    }

    /// Reads the forward value without cloning.
    pub fn with_value<R>(&self, v: Var, f: impl FnOnce(&Tensor) -> R) -> R {
        f(&self.nodes.borrow()[v.0].value)
    }

    pub fn shape(&self, v: Var) -> Vec<usize> {
        self.nodes.borrow()[v.0].value.shape().to_vec()
    }

    /// The single element of a shape `[1]` node.
    pub fn item(&self, v: Var) -> f64 {
        self.nodes.borrow()[v.0].value.item()
    }

    fn binary_same_shape(&self, name: &str, a: Var, b: Var, f: impl Fn(f64, f64) -> f64) -> Tensor {
        let nodes = self.nodes.borrow();
        let (ta, tb) = (&nodes[a.0].value, &nodes[b.0].value);
        assert_eq!(
            ta.shape(),
            tb.shape(),
            "tape: {name}: shape mismatch {:?} vs {:?}",
            ta.shape(),
            tb.shape()
        );
        let data = ta
            .data()
            .iter()
            .zip(tb.data().iter())
            .map(|(&x, &y)| f(x, y))
            .collect();
        Tensor::new(ta.shape().to_vec(), data)
    }

    pub fn add(&self, a: Var, b: Var) -> Var {
        let value = self.binary_same_shape("add", a, b, |x, y| x + y);
        let req = self.requires(a) || self.requires(b);
        self.push(Op::Add(a, b), value, req)
    }

    pub fn sub(&self, a: Var, b: Var) -> Var {
        let value = self.binary_same_shape("sub", a, b, |x, y| x - y);
        let req = self.requires(a) || self.requires(b);
        self.push(Op::Sub(a, b), value, req)
    }

    /// Elementwise product of equally shaped tensors.
    pub fn mul(&self, a: Var, b: Var) -> Var {
        let value = self.binary_same_shape("mul", a, b, |x, y| x * y);
        let req = self.requires(a) || self.requires(b);
        self.push(Op::Mul(a, b), value, req)
    }

    /// `s * a` where `s` is a shape `[1]` scalar node.
    pub fn bscale(&self, s: Var, a: Var) -> Var {
        let value = {
            let nodes = self.nodes.borrow();
            let sv = &nodes[s.0].value;
            assert_eq!(
                sv.shape(),
                &[1],
                "tape: bscale: scalar operand has shape {:?}",
                sv.shape()
            );
            nodes[a.0].value.map(|x| x * sv.item())
        };
        let req = self.requires(s) || self.requires(a);
        self.push(Op::BScale(s, a), value, req)
    }

    pub fn scale(&self, a: Var, c: f64) -> Var {
        let value = self.nodes.borrow()[a.0].value.map(|x| x * c);
        let req = self.requires(a);
        self.push(Op::Scale(a, c), value, req)
    }

    pub fn neg(&self, a: Var) -> Var {
        self.scale(a, -1.0)
    }

    /// Matrix product. Supported shapes: `(m,k)x(k,n)`, `(m,k)x(k)`, `(k)x(k,n)`.
    pub fn matmul(&self, a: Var, b: Var) -> Var {
        let value = {
            let nodes = self.nodes.borrow();
            let (ta, tb) = (&nodes[a.0].value, &nodes[b.0].value);
            match (ta.rank(), tb.rank()) {
                (2, 2) => {
                    let (m, k) = (ta.rows(), ta.cols());
                    let (k2, n) = (tb.rows(), tb.cols());
                    assert_eq!(
                        k, k2,
                        "tape: matmul: inner dims {:?} vs {:?}",
                        ta.shape(),
                        tb.shape()
                    );
                    let mut out = vec![0.0; m * n];
                    for i in 0..m {
                        for p in 0..k {
                            let aip = ta.data()[i * k + p];
                            if aip == 0.0 {
                                continue;
                            }
                            let brow = &tb.data()[p * n..(p + 1) * n];
                            let orow = &mut out[i * n..(i + 1) * n];
                            for j in 0..n {
                                orow[j] += aip * brow[j];
                            }
                        }
                    }
                    Tensor::matrix(m, n, out)
                }
                (2, 1) => {
                    let (m, k) = (ta.rows(), ta.cols());
                    assert_eq!(
                        k,
                        tb.len(),
                        "tape: matmul: inner dims {:?} vs {:?}",
                        ta.shape(),
                        tb.shape()
                    );
                    let mut out = vec![0.0; m];
                    for i in 0..m {
                        let row = &ta.data()[i * k..(i + 1) * k];
                        out[i] = row.iter().zip(tb.data()).map(|(x, y)| x * y).sum();
                    }
                    Tensor::vector(out)
                }
                (1, 2) => {
                    let k = ta.len();
                    let (k2, n) = (tb.rows(), tb.cols());
                    assert_eq!(
                        k, k2,
                        "tape: matmul: inner dims {:?} vs {:?}",
                        ta.shape(),
                        tb.shape()
                    );
                    let mut out = vec![0.0; n];
                    for p in 0..k {
                        let ap = ta.data()[p];
                        if ap == 0.0 {
                            continue;
                        }
                        let brow = &tb.data()[p * n..(p + 1) * n];
                        for j in 0..n {
                            out[j] += ap * brow[j];
                        }
                    }
                    Tensor::vector(out)
                }
                (ra, rb) => panic!("tape: matmul: unsupported ranks {ra}x{rb}"),
            }
        };
        let req = self.requires(a) || self.requires(b);
        self.push(Op::MatMul(a, b), value, req)
    }

    /// Inner product of two equal-length vectors, yielding a `[1]` scalar.
    pub fn dot(&self, a: Var, b: Var) -> Var {
        let value = {
            let nodes = self.nodes.borrow();
            let (ta, tb) = (&nodes[a.0].value, &nodes[b.0].value);
            assert!(
                ta.rank() == 1 && tb.rank() == 1 && ta.len() == tb.len(),
                "tape: dot: shape mismatch {:?} vs {:?}",
                ta.shape(),
                tb.shape()
            );
            Tensor::scalar(ta.data().iter().zip(tb.data()).map(|(x, y)| x * y).sum())
        };
        let req = self.requires(a) || self.requires(b);
        self.push(Op::Dot(a, b), value, req)
    }

    /// Concatenates rank-1 vectors along their only dimension.
    pub fn concat_vec(&self, parts: &[Var]) -> Var {
        assert!(!parts.is_empty(), "tape: concat_vec: no operands");
        let value = {
            let nodes = self.nodes.borrow();
            let mut data = Vec::new();
            for &p in parts {
                let t = &nodes[p.0].value;
                assert_eq!(
                    t.rank(),
                    1,
                    "tape: concat_vec: operand has shape {:?}",
                    t.shape()
                );
                data.extend_from_slice(t.data());
            }
            Tensor::vector(data)
        };
        let req = parts.iter().any(|&p| self.requires(p));
        self.push(Op::ConcatVec(parts.to_vec()), value, req)
    }

    /// Stacks equal-length rank-1 vectors into an `[n, d]` matrix.
    pub fn stack_rows(&self, rows: &[Var]) -> Var {
        assert!(!rows.is_empty(), "tape: stack_rows: no operands");
        let value = {
            let nodes = self.nodes.borrow();
            let d = nodes[rows[0].0].value.len();
            let mut data = Vec::with_capacity(rows.len() * d);
            for &r in rows {
                let t = &nodes[r.0].value;
                assert!(
                    t.rank() == 1 && t.len() == d,
                    "tape: stack_rows: operand has shape {:?}, expected [{d}]",
                    t.shape()
                );
                data.extend_from_slice(t.data());
            }
            Tensor::matrix(rows.len(), d, data)
        };
        let req = rows.iter().any(|&r| self.requires(r));
        self.push(Op::StackRows(rows.to_vec()), value, req)
    }

    /// Extracts row `i` of a rank-2 matrix as a vector.
    pub fn row(&self, a: Var, i: usize) -> Var {
        let value = {
            let nodes = self.nodes.borrow();
            let t = &nodes[a.0].value;
            assert!(
                t.rank() == 2 && i < t.rows(),
                "tape: row: index {i} out of shape {:?}",
                t.shape()
            );
            Tensor::vector(t.row(i).to_vec())
        };
        let req = self.requires(a);
        self.push(Op::Row(a, i), value, req)
    }

    /// Contiguous slice `[start, start+len)` of a rank-1 vector.
    pub fn slice_vec(&self, a: Var, start: usize, len: usize) -> Var {
        let value = {
            let nodes = self.nodes.borrow();
            let t = &nodes[a.0].value;
            assert!(
                t.rank() == 1 && start + len <= t.len(),
                "tape: slice_vec: [{start}, {}) out of shape {:?}",
                start + len,
                t.shape()
            );
            Tensor::vector(t.data()[start..start + len].to_vec())
        };
        let req = self.requires(a);
        self.push(Op::SliceVec(a, start), value, req)
    }

    /// Numerically stable softmax over a rank-1 vector.
    pub fn softmax_vec(&self, a: Var) -> Var {
        let value = {
            let nodes = self.nodes.borrow();
            let t = &nodes[a.0].value;
            assert_eq!(
                t.rank(),
                1,
                "tape: softmax_vec: operand has shape {:?}",
                t.shape()
            );
            let max = t.data().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let exps: Vec<f64> = t.data().iter().map(|&x| (x - max).exp()).collect();
            let sum: f64 = exps.iter().sum();
            Tensor::vector(exps.into_iter().map(|e| e / sum).collect())
        };
        let req = self.requires(a);
        self.push(Op::SoftmaxVec(a), value, req)
    }

    fn unary(&self, op: Op, a: Var, f: impl Fn(f64) -> f64) -> Var {
        let value = self.nodes.borrow()[a.0].value.map(f);
        let req = self.requires(a);
        self.push(op, value, req)
    }

    pub fn tanh(&self, a: Var) -> Var {
        self.unary(Op::Tanh(a), a, f64::tanh)
    }

    pub fn sigmoid(&self, a: Var) -> Var {
        self.unary(Op::Sigmoid(a), a, sigmoid)
    }

    pub fn exp(&self, a: Var) -> Var {
        self.unary(Op::Exp(a), a, f64::exp)
    }

    pub fn cos(&self, a: Var) -> Var {
        self.unary(Op::Cos(a), a, f64::cos)
    }

    pub fn ln(&self, a: Var) -> Var {
        self.unary(Op::Ln(a), a, f64::ln)
    }

    /// Mean over all elements, yielding a `[1]` scalar.
    pub fn mean(&self, a: Var) -> Var {
        let value = {
            let t = &self.nodes.borrow()[a.0].value;
            assert!(!t.is_empty(), "tape: mean: empty operand");
            Tensor::scalar(t.data().iter().sum::<f64>() / t.len() as f64)
        };
        let req = self.requires(a);
        self.push(Op::Mean(a), value, req)
    }

    /// Sum over all elements, yielding a `[1]` scalar.
    pub fn sum(&self, a: Var) -> Var {
        let value = Tensor::scalar(self.nodes.borrow()[a.0].value.data().iter().sum());
        let req = self.requires(a);
        self.push(Op::Sum(a), value, req)
    }

    /// Clamps into `[lo, hi]`; gradient passes only where the input is inside.
    pub fn clamp(&self, a: Var, lo: f64, hi: f64) -> Var {
        assert!(lo <= hi, "tape: clamp: lo {lo} > hi {hi}");
        self.unary(Op::Clamp(a, lo, hi), a, |x| x.clamp(lo, hi))
    }

    /// Elementwise maximum; ties route the gradient to the first operand.
    pub fn maximum(&self, a: Var, b: Var) -> Var {
        let value = self.binary_same_shape("maximum", a, b, f64::max);
        let req = self.requires(a) || self.requires(b);
        self.push(Op::Maximum(a, b), value, req)
    }

    /// Rounds to `{0, 1}` with ties at 0.5 rounding up; the backward pass is
    /// the straight-through estimator (gradient copied through unchanged).
    pub fn ste_round(&self, a: Var) -> Var {
        self.unary(Op::SteRound(a), a, |x| if x >= 0.5 { 1.0 } else { 0.0 })
    }

    /// Adds a `[d]` vector to every row of an `[n, d]` matrix.
    pub fn add_rowvec(&self, m: Var, v: Var) -> Var {
        let value = {
            let nodes = self.nodes.borrow();
            let (tm, tv) = (&nodes[m.0].value, &nodes[v.0].value);
            assert!(
                tm.rank() == 2 && tv.rank() == 1 && tm.cols() == tv.len(),
                "tape: add_rowvec: shape mismatch {:?} vs {:?}",
                tm.shape(),
                tv.shape()
            );
            let cols = tm.cols();
            let data = tm
                .data()
                .iter()
                .enumerate()
                .map(|(i, &x)| x + tv.data()[i % cols])
                .collect();
            Tensor::new(tm.shape().to_vec(), data)
        };
        let req = self.requires(m) || self.requires(v);
        self.push(Op::AddRowVec(m, v), value, req)
    }

    /// Reverse sweep from a scalar loss. Consumes the tape: a second call
    /// panics. Panics if `loss` is not shape `[1]`.
    pub fn backward(&self, loss: Var) -> Gradients {
        assert!(
            !self.consumed.get(),
            "tape: backward called twice on the same tape"
        );
        self.consumed.set(true);

        let nodes = self.nodes.borrow();
        assert_eq!(
            nodes[loss.0].value.shape(),
            &[1],
            "tape: backward: loss has shape {:?}, expected [1]",
            nodes[loss.0].value.shape()
        );

        let mut slots: Vec<Option<Tensor>> = (0..nodes.len()).map(|_| None).collect();
        slots[loss.0] = Some(Tensor::scalar(1.0));

        // Accumulate `grad` into the slot of `v`, skipping constant subgraphs.
        // First touch moves the tensor in; STE pass-through stays bit-exact.
        fn acc(slots: &mut [Option<Tensor>], nodes: &[Node], v: Var, grad: Tensor) {
            if !nodes[v.0].requires {
                return;
            }
            match &mut slots[v.0] {
                Some(existing) => existing.add_assign(&grad),
                slot @ None => *slot = Some(grad),
            }
        }

        for id in (0..nodes.len()).rev() {
            if !nodes[id].requires {
                continue;
            }
            let node = &nodes[id];
            if matches!(node.op, Op::Leaf) {
                continue; // leaf gradients stay in their slots for the caller
            }
            let g = match slots[id].take() {
                Some(g) => g,
                None => continue,
            };
            match &node.op {
                Op::Leaf => unreachable!(),
                Op::Add(a, b) => {
                    acc(&mut slots, &nodes, *a, g.clone());
                    acc(&mut slots, &nodes, *b, g);
                }
                Op::Sub(a, b) => {
                    acc(&mut slots, &nodes, *b, g.map(|x| -x));
                    acc(&mut slots, &nodes, *a, g);
                }
                Op::Mul(a, b) => {
                    let (va, vb) = (&nodes[a.0].value, &nodes[b.0].value);
                    let da = Tensor::new(
                        g.shape().to_vec(),
                        g.data()
                            .iter()
                            .zip(vb.data())
                            .map(|(&gi, &bi)| gi * bi)
                            .collect(),
                    );
                    let db = Tensor::new(
                        g.shape().to_vec(),
                        g.data()
                            .iter()
                            .zip(va.data())
                            .map(|(&gi, &ai)| gi * ai)
                            .collect(),
                    );
                    acc(&mut slots, &nodes, *a, da);
                    acc(&mut slots, &nodes, *b, db);
                }
                Op::BScale(s, a) => {
                    let (vs, va) = (&nodes[s.0].value, &nodes[a.0].value);
                    let ds = g
                        .data()
                        .iter()
                        .zip(va.data())
                        .map(|(&gi, &ai)| gi * ai)
                        .sum();
                    acc(&mut slots, &nodes, *s, Tensor::scalar(ds));
                    acc(&mut slots, &nodes, *a, g.map(|x| x * vs.item()));
                }
                Op::Scale(a, c) => {
                    let c = *c;
                    acc(&mut slots, &nodes, *a, g.map(|x| x * c));
                }
                Op::MatMul(a, b) => {
                    let (va, vb) = (&nodes[a.0].value, &nodes[b.0].value);
                    match (va.rank(), vb.rank()) {
                        (2, 2) => {
                            let (m, k, n) = (va.rows(), va.cols(), vb.cols());
                            let mut da = vec![0.0; m * k];
                            let mut db = vec![0.0; k * n];
                            for i in 0..m {
                                let grow = &g.data()[i * n..(i + 1) * n];
                                for p in 0..k {
                                    let brow = &vb.data()[p * n..(p + 1) * n];
                                    da[i * k + p] +=
                                        grow.iter().zip(brow).map(|(x, y)| x * y).sum::<f64>();
                                    let aip = va.data()[i * k + p];
                                    if aip != 0.0 {
                                        let dbrow = &mut db[p * n..(p + 1) * n];
                                        for j in 0..n {
                                            dbrow[j] += aip * grow[j];
                                        }
                                    }
                                }
                            }
                            acc(&mut slots, &nodes, *a, Tensor::matrix(m, k, da));
                            acc(&mut slots, &nodes, *b, Tensor::matrix(k, n, db));
                        }
                        (2, 1) => {
                            let (m, k) = (va.rows(), va.cols());
                            let mut da = vec![0.0; m * k];
                            let mut db = vec![0.0; k];
                            for i in 0..m {
                                let gi = g.data()[i];
                                if gi == 0.0 {
                                    continue;
                                }
                                let arow = &va.data()[i * k..(i + 1) * k];
                                let darow = &mut da[i * k..(i + 1) * k];
                                for p in 0..k {
                                    darow[p] += gi * vb.data()[p];
                                    db[p] += gi * arow[p];
                                }
                            }
                            acc(&mut slots, &nodes, *a, Tensor::matrix(m, k, da));
                            acc(&mut slots, &nodes, *b, Tensor::vector(db));
                        }
                        (1, 2) => {
                            let (k, n) = (vb.rows(), vb.cols());
                            let mut da = vec![0.0; k];
                            let mut db = vec![0.0; k * n];
                            for p in 0..k {
                                let brow = &vb.data()[p * n..(p + 1) * n];
                                da[p] = g.data().iter().zip(brow).map(|(x, y)| x * y).sum();
                                let ap = va.data()[p];
                                if ap != 0.0 {
                                    let dbrow = &mut db[p * n..(p + 1) * n];
                                    for j in 0..n {
                                        dbrow[j] += ap * g.data()[j];
                                    }
                                }
                            }
                            acc(&mut slots, &nodes, *a, Tensor::vector(da));
                            acc(&mut slots, &nodes, *b, Tensor::matrix(k, n, db));
                        }
                        _ => unreachable!("validated at forward time"),
                    }
                }
                Op::Dot(a, b) => {
                    let (va, vb) = (&nodes[a.0].value, &nodes[b.0].value);
                    let gi = g.item();
                    acc(&mut slots, &nodes, *a, vb.map(|x| x * gi));
                    acc(&mut slots, &nodes, *b, va.map(|x| x * gi));
                }
                Op::ConcatVec(parts) => {
                    let mut offset = 0;
                    for &p in parts {
                        let len = nodes[p.0].value.len();
                        let dp = Tensor::vector(g.data()[offset..offset + len].to_vec());
                        acc(&mut slots, &nodes, p, dp);
                        offset += len;
                    }
                }
                Op::StackRows(rows) => {
                    let d = nodes[rows[0].0].value.len();
                    for (i, &r) in rows.iter().enumerate() {
                        let dr = Tensor::vector(g.data()[i * d..(i + 1) * d].to_vec());
                        acc(&mut slots, &nodes, r, dr);
                    }
                }
                Op::Row(a, i) => {
                    let va = &nodes[a.0].value;
                    let mut da = Tensor::zeros(va.shape());
                    let c = va.cols();
                    da.data_mut()[i * c..(i + 1) * c].copy_from_slice(g.data());
                    acc(&mut slots, &nodes, *a, da);
                }
                Op::SliceVec(a, start) => {
                    let va = &nodes[a.0].value;
                    let mut da = Tensor::zeros(va.shape());
                    da.data_mut()[*start..start + g.len()].copy_from_slice(g.data());
                    acc(&mut slots, &nodes, *a, da);
                }
                Op::SoftmaxVec(a) => {
                    let y = &node.value;
                    let gy: f64 = g.data().iter().zip(y.data()).map(|(x, s)| x * s).sum();
                    let da = Tensor::vector(
                        g.data()
                            .iter()
                            .zip(y.data())
                            .map(|(&gi, &yi)| yi * (gi - gy))
                            .collect(),
                    );
                    acc(&mut slots, &nodes, *a, da);
                }
                Op::Tanh(a) => {
                    let y = &node.value;
                    let da = Tensor::new(
                        g.shape().to_vec(),
                        g.data()
                            .iter()
                            .zip(y.data())
                            .map(|(&gi, &yi)| gi * (1.0 - yi * yi))
                            .collect(),
                    );
                    acc(&mut slots, &nodes, *a, da);
                }
                Op::Sigmoid(a) => {
                    let y = &node.value;
                    let da = Tensor::new(
                        g.shape().to_vec(),
                        g.data()
                            .iter()
                            .zip(y.data())
                            .map(|(&gi, &yi)| gi * yi * (1.0 - yi))
                            .collect(),
                    );
                    acc(&mut slots, &nodes, *a, da);
                }
                Op::Exp(a) => {
                    let y = &node.value;
                    let da = Tensor::new(
                        g.shape().to_vec(),
                        g.data()
                            .iter()
                            .zip(y.data())
                            .map(|(&gi, &yi)| gi * yi)
                            .collect(),
                    );
                    acc(&mut slots, &nodes, *a, da);
                }
                Op::Cos(a) => {
                    let va = &nodes[a.0].value;
                    let da = Tensor::new(
                        g.shape().to_vec(),
                        g.data()
                            .iter()
                            .zip(va.data())
                            .map(|(&gi, &xi)| -gi * xi.sin())
                            .collect(),
                    );
                    acc(&mut slots, &nodes, *a, da);
                }
                Op::Ln(a) => {
                    let va = &nodes[a.0].value;
                    let da = Tensor::new(
                        g.shape().to_vec(),
                        g.data()
                            .iter()
                            .zip(va.data())
                            .map(|(&gi, &xi)| gi / xi)
                            .collect(),
                    );
                    acc(&mut slots, &nodes, *a, da);
                }
                Op::Mean(a) => {
                    let va = &nodes[a.0].value;
                    let gi = g.item() / va.len() as f64;
                    acc(&mut slots, &nodes, *a, va.map(|_| gi));
                }
                Op::Sum(a) => {
                    let va = &nodes[a.0].value;
                    let gi = g.item();
                    acc(&mut slots, &nodes, *a, va.map(|_| gi));
                }
                Op::Clamp(a, lo, hi) => {
                    let va = &nodes[a.0].value;
                    let da = Tensor::new(
                        g.shape().to_vec(),
                        g.data()
                            .iter()
                            .zip(va.data())
                            .map(|(&gi, &xi)| if xi >= *lo && xi <= *hi { gi } else { 0.0 })
                            .collect(),
                    );
                    acc(&mut slots, &nodes, *a, da);
                }
                Op::Maximum(a, b) => {
                    let (va, vb) = (&nodes[a.0].value, &nodes[b.0].value);
                    let mut da = Tensor::zeros(g.shape());
                    let mut db = Tensor::zeros(g.shape());
                    for i in 0..g.len() {
                        if va.data()[i] >= vb.data()[i] {
                            da.data_mut()[i] = g.data()[i];
                        } else {
                            db.data_mut()[i] = g.data()[i];
                        }
                    }
                    acc(&mut slots, &nodes, *a, da);
                    acc(&mut slots, &nodes, *b, db);
                }
                Op::SteRound(a) => {
                    // Straight-through: the step is treated as identity.
                    acc(&mut slots, &nodes, *a, g);
                }
                Op::AddRowVec(m, v) => {
                    let cols = nodes[v.0].value.len();
                    let mut dv = vec![0.0; cols];
                    for (i, &gi) in g.data().iter().enumerate() {
                        dv[i % cols] += gi;
                    }
                    acc(&mut slots, &nodes, *v, Tensor::vector(dv));
                    acc(&mut slots, &nodes, *m, g);
                }
            }
        }

        Gradients { slots }
    }
}
