//! Define-by-run reverse-mode automatic differentiation.
//!
//! A [`Tape`] records primitive operations over [`Tensor`] values as they run.
//! Calling [`Tape::backward`] on a scalar loss replays the record in reverse,
//! accumulating gradients additively at every fan-out. One tape serves one
//! forward/backward pair; parallelism happens across independent tapes.
//!
//! Only the broadcasting forms the model needs are supported: equal shapes,
//! and scalar-against-tensor. Anything else is a shape error carrying both
//! shapes, so mistakes surface at the op that made them.

use crate::tensor::{Tensor, TensorError};

/// Handle to a value recorded on a tape.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Matmul { a: Var, b: Var },
    Add { a: Var, b: Var },
    Sub { a: Var, b: Var },
    Mul { a: Var, b: Var },
    Sigmoid { x: Var },
    Tanh { x: Var },
    OneMinus { x: Var },
    Concat { parts: Vec<Var> },
    Column { m: Var, col: usize },
    Sum { x: Var },
    Scale { x: Var, factor: f64 },
    Reshape { x: Var },
}

struct Node {
    value: Tensor,
    op: Op,
    grad: Option<Vec<f64>>,
}

/// Operation record for one forward pass.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
    backward_done: bool,
}

/// Numerically stable logistic function.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn matmul_2d(a: &[f64], b: &[f64], m: usize, k: usize, n: usize, out: &mut [f64]) {
    for i in 0..m {
        let a_row = &a[i * k..(i + 1) * k];
        let out_row = &mut out[i * n..(i + 1) * n];
        for (p, &aip) in a_row.iter().enumerate() {
            let b_row = &b[p * n..(p + 1) * n];
            for (o, &bpj) in out_row.iter_mut().zip(b_row) {
                *o += aip * bpj;
            }
        }
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

    /// Register an independent value (parameter or input).
    pub fn leaf(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf)
    }

    pub fn leaf_scalar(&mut self, value: f64) -> Result<Var, TensorError> {
        Ok(self.leaf(Tensor::scalar(value)?))
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    fn push(&mut self, value: Tensor, op: Op) -> Var {
        let id = self.nodes.len();
        self.nodes.push(Node {
            value,
            op,
            grad: None,
        });
        Var(id)
    }

    /// Matrix product. `a` must be 2-D; `b` may be 2-D (matrix) or 1-D (vector).
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        let (ta, tb) = (self.value(a), self.value(b));
        let mismatch = || TensorError::DimMismatch {
            op: "matmul",
            left: ta.shape().to_vec(),
            right: tb.shape().to_vec(),
        };
        let &[m, k] = ta.shape() else {
            return Err(mismatch());
        };
        let out = match tb.shape() {
            [k2, n] => {
                if *k2 != k {
                    return Err(mismatch());
                }
                let (k2, n) = (*k2, *n);
                let mut data = vec![0.0; m * n];
                matmul_2d(ta.data(), tb.data(), m, k2, n, &mut data);
                Tensor::unchecked(vec![m, n], data)
            }
            [k2] => {
                if *k2 != k {
                    return Err(mismatch());
                }
                let (ad, xd) = (ta.data(), tb.data());
                let data = (0..m)
                    .map(|i| {
                        ad[i * k..(i + 1) * k]
                            .iter()
                            .zip(xd)
                            .map(|(w, x)| w * x)
                            .sum()
                    })
                    .collect();
                Tensor::unchecked(vec![m], data)
            }
            _ => return Err(mismatch()),
        };
        Ok(self.push(out, Op::Matmul { a, b }))
    }

    fn binary_shapes(
        &self,
        op: &'static str,
        a: Var,
        b: Var,
    ) -> Result<Vec<usize>, TensorError> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape() == tb.shape() {
            Ok(ta.shape().to_vec())
        } else if ta.is_scalar() {
            Ok(tb.shape().to_vec())
        } else if tb.is_scalar() {
            Ok(ta.shape().to_vec())
        } else {
            Err(TensorError::DimMismatch {
                op,
                left: ta.shape().to_vec(),
                right: tb.shape().to_vec(),
            })
        }
    }

    fn elementwise_binary(
        &mut self,
        op_name: &'static str,
        a: Var,
        b: Var,
        f: fn(f64, f64) -> f64,
    ) -> Result<(Vec<usize>, Vec<f64>), TensorError> {
        let shape = self.binary_shapes(op_name, a, b)?;
        let (ta, tb) = (self.value(a), self.value(b));
        let data = if ta.shape() == tb.shape() {
            ta.data().iter().zip(tb.data()).map(|(&x, &y)| f(x, y)).collect()
        } else if ta.is_scalar() {
            let x = ta.item();
            tb.data().iter().map(|&y| f(x, y)).collect()
        } else {
            let y = tb.item();
            ta.data().iter().map(|&x| f(x, y)).collect()
        };
        Ok((shape, data))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        let (shape, data) = self.elementwise_binary("add", a, b, |x, y| x + y)?;
        Ok(self.push(Tensor::unchecked(shape, data), Op::Add { a, b }))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        let (shape, data) = self.elementwise_binary("sub", a, b, |x, y| x - y)?;
        Ok(self.push(Tensor::unchecked(shape, data), Op::Sub { a, b }))
    }

    /// Hadamard (elementwise) product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        let (shape, data) = self.elementwise_binary("mul", a, b, |x, y| x * y)?;
        Ok(self.push(Tensor::unchecked(shape, data), Op::Mul { a, b }))
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        let t = self.value(x);
        let out = Tensor::unchecked(
            t.shape().to_vec(),
            t.data().iter().map(|&v| sigmoid(v)).collect(),
        );
        self.push(out, Op::Sigmoid { x })
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        let t = self.value(x);
        let out = Tensor::unchecked(
            t.shape().to_vec(),
            t.data().iter().map(|&v| v.tanh()).collect(),
        );
        self.push(out, Op::Tanh { x })
    }

    /// Elementwise `1 - x`.
    pub fn one_minus(&mut self, x: Var) -> Var {
        let t = self.value(x);
        let out = Tensor::unchecked(
            t.shape().to_vec(),
            t.data().iter().map(|&v| 1.0 - v).collect(),
        );
        self.push(out, Op::OneMinus { x })
    }

    /// Concatenate 1-D tensors into one vector.
    pub fn concat(&mut self, parts: &[Var]) -> Result<Var, TensorError> {
        let mut data = Vec::new();
        for &p in parts {
            let t = self.value(p);
            if t.shape().len() != 1 {
                return Err(TensorError::RankMismatch {
                    op: "concat",
                    expected: "1-D tensor",
                    actual: t.shape().to_vec(),
                });
            }
            data.extend_from_slice(t.data());
        }
        let len = data.len();
        Ok(self.push(
            Tensor::unchecked(vec![len], data),
            Op::Concat {
                parts: parts.to_vec(),
            },
        ))
    }

    /// Select column `col` of a 2-D tensor as a vector.
    pub fn column(&mut self, m: Var, col: usize) -> Result<Var, TensorError> {
        let t = self.value(m);
        let &[rows, cols] = t.shape() else {
            return Err(TensorError::RankMismatch {
                op: "column",
                expected: "2-D tensor",
                actual: t.shape().to_vec(),
            });
        };
        if col >= cols {
            return Err(TensorError::ColumnOutOfRange { index: col, cols });
        }
        let data = (0..rows).map(|r| t.data()[r * cols + col]).collect();
        Ok(self.push(Tensor::unchecked(vec![rows], data), Op::Column { m, col }))
    }

    /// Sum all elements into a scalar.
    pub fn sum(&mut self, x: Var) -> Var {
        let total = self.value(x).data().iter().sum();
        self.push(Tensor::unchecked(vec![1], vec![total]), Op::Sum { x })
    }

    /// Multiply every element by a compile-time-known constant.
    pub fn scale(&mut self, x: Var, factor: f64) -> Var {
        let t = self.value(x);
        let out = Tensor::unchecked(
            t.shape().to_vec(),
            t.data().iter().map(|&v| v * factor).collect(),
        );
        self.push(out, Op::Scale { x, factor })
    }

    /// Reinterpret the storage under a new shape of equal length.
    pub fn reshape(&mut self, x: Var, shape: Vec<usize>) -> Result<Var, TensorError> {
        let t = self.value(x);
        let actual = shape.iter().product::<usize>();
        if actual != t.len() {
            return Err(TensorError::LengthMismatch {
                shape,
                expected: t.len(),
                actual,
            });
        }
        let out = Tensor::unchecked(shape, t.data().to_vec());
        Ok(self.push(out, Op::Reshape { x }))
    }

    /// Mean of all elements.
    pub fn mean(&mut self, x: Var) -> Var {
        let n = self.value(x).len();
        let s = self.sum(x);
        self.scale(s, 1.0 / n as f64)
    }

    fn accumulate(&mut self, v: Var, delta: &[f64]) {
        let node = &mut self.nodes[v.0];
        match &mut node.grad {
            Some(g) => {
                for (gi, di) in g.iter_mut().zip(delta) {
                    *gi += di;
                }
            }
            None => node.grad = Some(delta.to_vec()),
        }
    }

    /// Reverse pass from a scalar loss. Errors on a non-scalar loss and on a
    /// second call for the same tape.
    pub fn backward(&mut self, loss: Var) -> Result<(), TensorError> {
        if self.backward_done {
            return Err(TensorError::BackwardTwice);
        }
        let loss_t = self.value(loss);
        if !loss_t.is_scalar() {
            return Err(TensorError::NonScalarLoss {
                shape: loss_t.shape().to_vec(),
            });
        }
        self.backward_done = true;
        self.nodes[loss.0].grad = Some(vec![1.0]);

        for id in (0..self.nodes.len()).rev() {
            let Some(d) = self.nodes[id].grad.clone() else {
                continue;
            };
            let op = self.nodes[id].op.clone();
            match op {
                Op::Leaf => {}
                Op::Matmul { a, b } => self.backward_matmul(a, b, &d),
                Op::Add { a, b } => {
                    self.backward_additive(a, &d, 1.0);
                    self.backward_additive(b, &d, 1.0);
                }
                Op::Sub { a, b } => {
                    self.backward_additive(a, &d, 1.0);
                    self.backward_additive(b, &d, -1.0);
                }
                Op::Mul { a, b } => self.backward_mul(a, b, &d),
                Op::Sigmoid { x } => {
                    let s = self.nodes[id].value.data();
                    let dx: Vec<f64> = d
                        .iter()
                        .zip(s)
                        .map(|(di, &si)| di * si * (1.0 - si))
                        .collect();
                    self.accumulate(x, &dx);
                }
                Op::Tanh { x } => {
                    let y = self.nodes[id].value.data();
                    let dx: Vec<f64> =
                        d.iter().zip(y).map(|(di, &yi)| di * (1.0 - yi * yi)).collect();
                    self.accumulate(x, &dx);
                }
                Op::OneMinus { x } => {
                    let dx: Vec<f64> = d.iter().map(|di| -di).collect();
                    self.accumulate(x, &dx);
                }
                Op::Concat { parts } => {
                    let mut offset = 0;
                    for p in parts {
                        let plen = self.value(p).len();
                        let slice = d[offset..offset + plen].to_vec();
                        self.accumulate(p, &slice);
                        offset += plen;
                    }
                }
                Op::Column { m, col } => {
                    let cols = self.value(m).shape()[1];
                    let mut dm = vec![0.0; self.value(m).len()];
                    for (r, di) in d.iter().enumerate() {
                        dm[r * cols + col] = *di;
                    }
                    self.accumulate(m, &dm);
                }
                Op::Sum { x } => {
                    let dx = vec![d[0]; self.value(x).len()];
                    self.accumulate(x, &dx);
                }
                Op::Scale { x, factor } => {
                    let dx: Vec<f64> = d.iter().map(|di| di * factor).collect();
                    self.accumulate(x, &dx);
                }
                Op::Reshape { x } => self.accumulate(x, &d),
            }
        }
        Ok(())
    }

    /// Gradient for an additive input, handling the scalar-broadcast case.
    fn backward_additive(&mut self, v: Var, d: &[f64], sign: f64) {
        if self.value(v).is_scalar() && d.len() > 1 {
            self.accumulate(v, &[sign * d.iter().sum::<f64>()]);
        } else {
            let dv: Vec<f64> = d.iter().map(|di| sign * di).collect();
            self.accumulate(v, &dv);
        }
    }

    fn backward_mul(&mut self, a: Var, b: Var, d: &[f64]) {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape() == tb.shape() {
            let da: Vec<f64> = d.iter().zip(tb.data()).map(|(di, &bi)| di * bi).collect();
            let db: Vec<f64> = d.iter().zip(ta.data()).map(|(di, &ai)| di * ai).collect();
            self.accumulate(a, &da);
            self.accumulate(b, &db);
        } else if ta.is_scalar() {
            let s = ta.item();
            let da = [d.iter().zip(tb.data()).map(|(di, &bi)| di * bi).sum::<f64>()];
            let db: Vec<f64> = d.iter().map(|di| di * s).collect();
            self.accumulate(a, &da);
            self.accumulate(b, &db);
        } else {
            let s = tb.item();
            let da: Vec<f64> = d.iter().map(|di| di * s).collect();
            let db = [d.iter().zip(ta.data()).map(|(di, &ai)| di * ai).sum::<f64>()];
            self.accumulate(a, &da);
            self.accumulate(b, &db);
        }
    }

    fn backward_matmul(&mut self, a: Var, b: Var, d: &[f64]) {
        let (ta, tb) = (self.value(a), self.value(b));
        let (m, k) = (ta.shape()[0], ta.shape()[1]);
        match tb.shape() {
            [_, n] => {
                let n = *n;
                // dA = dC · Bᵀ
                let mut da = vec![0.0; m * k];
                for i in 0..m {
                    let d_row = &d[i * n..(i + 1) * n];
                    for p in 0..k {
                        let b_row = &tb.data()[p * n..(p + 1) * n];
                        da[i * k + p] = d_row.iter().zip(b_row).map(|(x, y)| x * y).sum();
                    }
                }
                // dB = Aᵀ · dC
                let mut db = vec![0.0; k * n];
                for i in 0..m {
                    let d_row = &d[i * n..(i + 1) * n];
                    let a_row = &ta.data()[i * k..(i + 1) * k];
                    for (p, &aip) in a_row.iter().enumerate() {
                        let db_row = &mut db[p * n..(p + 1) * n];
                        for (o, &dj) in db_row.iter_mut().zip(d_row) {
                            *o += aip * dj;
                        }
                    }
                }
                self.accumulate(a, &da);
                self.accumulate(b, &db);
            }
            [_] => {
                // y = A·x: dA = dy ⊗ x, dx = Aᵀ·dy
                let x = tb.data();
                let mut da = vec![0.0; m * k];
                for (i, &dyi) in d.iter().enumerate() {
                    let da_row = &mut da[i * k..(i + 1) * k];
                    for (o, &xp) in da_row.iter_mut().zip(x) {
                        *o = dyi * xp;
                    }
                }
                let mut dx = vec![0.0; k];
                for (i, &dyi) in d.iter().enumerate() {
                    let a_row = &ta.data()[i * k..(i + 1) * k];
                    for (o, &aip) in dx.iter_mut().zip(a_row) {
                        *o += dyi * aip;
                    }
                }
                self.accumulate(a, &da);
                self.accumulate(b, &dx);
            }
            _ => unreachable!("matmul forward validated rank"),
        }
    }

    /// Accumulated gradient for a value, if any reached it.
    pub fn grad(&self, v: Var) -> Option<&[f64]> {
        self.nodes[v.0].grad.as_deref()
    }

    /// Gradient with unreachable leaves materialized as exact zeros.
    pub fn grad_or_zeros(&self, v: Var) -> Vec<f64> {
        match &self.nodes[v.0].grad {
            Some(g) => g.clone(),
            None => vec![0.0; self.value(v).len()],
        }
    }

    /// Add this value's gradient into `acc` (no-op if no gradient reached it).
    pub fn add_grad_into(&self, v: Var, acc: &mut [f64]) {
        if let Some(g) = self.grad(v) {
            for (a, gi) in acc.iter_mut().zip(g) {
                *a += gi;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn leaf(tape: &mut Tape, shape: Vec<usize>, data: Vec<f64>) -> Var {
        tape.leaf(Tensor::from_vec(shape, data).unwrap())
    }

    #[test]
    fn matmul_identity() {
        let mut tape = Tape::new();
        let a = leaf(&mut tape, vec![2, 2], vec![1.0, 0.0, 0.0, 1.0]);
        let b = leaf(&mut tape, vec![2, 1], vec![3.0, 4.0]);
        let c = tape.matmul(a, b).unwrap();
        assert_eq!(tape.value(c).data(), &[3.0, 4.0]);
    }

    #[test]
    fn matmul_dot() {
        let mut tape = Tape::new();
        let a = leaf(&mut tape, vec![1, 2], vec![1.0, 2.0]);
        let b = leaf(&mut tape, vec![2, 1], vec![3.0, 4.0]);
        let c = tape.matmul(a, b).unwrap();
        assert_eq!(tape.value(c).data(), &[11.0]);
    }

    // Independent triple-loop product, deliberately in plain index form.
    fn matmul_oracle(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            for j in 0..n {
                let mut acc = 0.0;
                for p in 0..k {
                    acc += a[i * k + p] * b[p * n + j];
                }
                out[i * n + j] = acc;
            }
        }
        out
    }

    #[test]
    fn matmul_matches_triple_loop_oracle() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let a: Vec<f64> = (0..12).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let b: Vec<f64> = (0..8).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let mut tape = Tape::new();
        let va = leaf(&mut tape, vec![3, 4], a.clone());
        let vb = leaf(&mut tape, vec![4, 2], b.clone());
        let c = tape.matmul(va, vb).unwrap();
        let expect = matmul_oracle(&a, &b, 3, 4, 2);
        for (got, want) in tape.value(c).data().iter().zip(&expect) {
            assert!((got - want).abs() < 1e-14, "got {got}, want {want}");
        }
    }

    #[test]
    fn matmul_shape_error_names_both_shapes() {
        let mut tape = Tape::new();
        let a = leaf(&mut tape, vec![2, 3], vec![0.0; 6]);
        let b = leaf(&mut tape, vec![2, 2], vec![0.0; 4]);
        let msg = tape.matmul(a, b).unwrap_err().to_string();
        assert!(msg.contains("[2, 3]") && msg.contains("[2, 2]"), "{msg}");
    }

    #[test]
    fn sigmoid_and_tanh_at_zero() {
        let mut tape = Tape::new();
        let x = leaf(&mut tape, vec![1], vec![0.0]);
        let s = tape.sigmoid(x);
        let t = tape.tanh(x);
        assert_eq!(tape.value(s).item(), 0.5);
        assert_eq!(tape.value(t).item(), 0.0);
    }

    #[test]
    fn sigmoid_matches_scalar_oracle() {
        let mut tape = Tape::new();
        let xs = vec![-2.0, -1.0, 1.0, 2.0];
        let x = leaf(&mut tape, vec![4], xs.clone());
        let s = tape.sigmoid(x);
        for (got, &xi) in tape.value(s).data().iter().zip(&xs) {
            let want = 1.0 / (1.0 + (-xi).exp());
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn sigmoid_stable_at_extremes() {
        assert_eq!(sigmoid(800.0), 1.0);
        assert_eq!(sigmoid(-800.0), 0.0);
        assert!(sigmoid(-800.0) >= 0.0);
    }

    #[test]
    fn grad_of_sum_is_ones() {
        let mut tape = Tape::new();
        let x = leaf(&mut tape, vec![3], vec![1.5, -2.0, 0.25]);
        let loss = tape.sum(x);
        tape.backward(loss).unwrap();
        assert_eq!(tape.grad(x).unwrap(), &[1.0, 1.0, 1.0]);
    }

    #[test]
    fn grad_of_half_square_sum_is_x() {
        let mut tape = Tape::new();
        let xs = vec![1.5, -2.0, 0.25];
        let x = leaf(&mut tape, vec![3], xs.clone());
        let sq = tape.mul(x, x).unwrap();
        let s = tape.sum(sq);
        let loss = tape.scale(s, 0.5);
        tape.backward(loss).unwrap();
        for (g, want) in tape.grad(x).unwrap().iter().zip(&xs) {
            assert!((g - want).abs() < 1e-14);
        }
    }

    #[test]
    fn fan_out_gradient_equals_sum_of_branches() {
        let xs = vec![0.7, -1.2];
        // Combined: loss = sum(sigmoid(x)) + sum(x ⊙ x)
        let mut tape = Tape::new();
        let x = leaf(&mut tape, vec![2], xs.clone());
        let s = tape.sigmoid(x);
        let b1 = tape.sum(s);
        let sq = tape.mul(x, x).unwrap();
        let b2 = tape.sum(sq);
        let loss = tape.add(b1, b2).unwrap();
        tape.backward(loss).unwrap();
        let combined = tape.grad(x).unwrap().to_vec();

        // Each branch alone.
        let mut t1 = Tape::new();
        let x1 = leaf(&mut t1, vec![2], xs.clone());
        let s1 = t1.sigmoid(x1);
        let l1 = t1.sum(s1);
        t1.backward(l1).unwrap();
        let g1 = t1.grad(x1).unwrap().to_vec();

        let mut t2 = Tape::new();
        let x2 = leaf(&mut t2, vec![2], xs);
        let sq2 = t2.mul(x2, x2).unwrap();
        let l2 = t2.sum(sq2);
        t2.backward(l2).unwrap();
        let g2 = t2.grad(x2).unwrap().to_vec();

        for i in 0..2 {
            assert!((combined[i] - (g1[i] + g2[i])).abs() < 1e-14);
        }
    }

    #[test]
    fn unreachable_leaf_gets_exact_zero() {
        let mut tape = Tape::new();
        let x = leaf(&mut tape, vec![2], vec![1.0, 2.0]);
        let unused = leaf(&mut tape, vec![3], vec![9.0, 9.0, 9.0]);
        let loss = tape.sum(x);
        tape.backward(loss).unwrap();
        assert!(tape.grad(unused).is_none());
        assert_eq!(tape.grad_or_zeros(unused), vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn backward_twice_is_an_error() {
        let mut tape = Tape::new();
        let x = leaf(&mut tape, vec![1], vec![2.0]);
        let loss = tape.sum(x);
        tape.backward(loss).unwrap();
        assert_eq!(tape.backward(loss), Err(TensorError::BackwardTwice));
    }

    #[test]
    fn backward_rejects_non_scalar_loss() {
        let mut tape = Tape::new();
        let x = leaf(&mut tape, vec![2], vec![1.0, 2.0]);
        assert!(matches!(
            tape.backward(x),
            Err(TensorError::NonScalarLoss { .. })
        ));
    }

    #[test]
    fn forward_is_deterministic_bitwise() {
        let run = || {
            let mut tape = Tape::new();
            let a = leaf(&mut tape, vec![2, 2], vec![0.3, -1.7, 2.2, 0.9]);
            let x = leaf(&mut tape, vec![2], vec![1.1, -0.4]);
            let y = tape.matmul(a, x).unwrap();
            let s = tape.tanh(y);
            tape.value(s).data().to_vec()
        };
        let (r1, r2) = (run(), run());
        assert_eq!(
            r1.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            r2.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );
    }

    // --- finite-difference checks -------------------------------------

    /// Central finite differences of `f` with respect to every leaf entry.
    fn numeric_grads(
        leaves: &[Tensor],
        f: &dyn Fn(&mut Tape, &[Var]) -> Var,
    ) -> Vec<Vec<f64>> {
        let eval = |tensors: &[Tensor]| -> f64 {
            let mut tape = Tape::new();
            let vars: Vec<Var> = tensors.iter().map(|t| tape.leaf(t.clone())).collect();
            let loss = f(&mut tape, &vars);
            tape.value(loss).item()
        };
        let eps = 1e-5;
        leaves
            .iter()
            .enumerate()
            .map(|(li, t)| {
                (0..t.len())
                    .map(|i| {
                        let mut plus = leaves.to_vec();
                        plus[li].data_mut()[i] += eps;
                        let mut minus = leaves.to_vec();
                        minus[li].data_mut()[i] -= eps;
                        (eval(&plus) - eval(&minus)) / (2.0 * eps)
                    })
                    .collect()
            })
            .collect()
    }

    fn assert_grads_match(analytic: &[Vec<f64>], numeric: &[Vec<f64>]) {
        for (a_vec, n_vec) in analytic.iter().zip(numeric) {
            for (&a, &n) in a_vec.iter().zip(n_vec) {
                let denom = a.abs().max(n.abs());
                let abs_err = (a - n).abs();
                assert!(
                    abs_err <= 1e-8 || abs_err / denom < 1e-4,
                    "gradient mismatch: analytic {a}, numeric {n}"
                );
            }
        }
    }

    fn fd_check(leaves: Vec<Tensor>, f: impl Fn(&mut Tape, &[Var]) -> Var) {
        let mut tape = Tape::new();
        let vars: Vec<Var> = leaves.iter().map(|t| tape.leaf(t.clone())).collect();
        let loss = f(&mut tape, &vars);
        tape.backward(loss).unwrap();
        let analytic: Vec<Vec<f64>> = vars.iter().map(|&v| tape.grad_or_zeros(v)).collect();
        let numeric = numeric_grads(&leaves, &f);
        assert_grads_match(&analytic, &numeric);
    }

    fn random_tensor(rng: &mut impl rand::Rng, shape: Vec<usize>) -> Tensor {
        let len = shape.iter().product();
        let data = (0..len).map(|_| rng.gen_range(-2.0..2.0)).collect();
        Tensor::from_vec(shape, data).unwrap()
    }

    #[test]
    fn finite_differences_cover_every_primitive() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        let w = random_tensor(&mut rng, vec![3, 4]);
        let m = random_tensor(&mut rng, vec![4, 2]);
        let x = random_tensor(&mut rng, vec![4]);
        let y = random_tensor(&mut rng, vec![3]);
        let s = random_tensor(&mut rng, vec![1]);

        fd_check(vec![w.clone(), x.clone()], |t, v| {
            let h = t.matmul(v[0], v[1]).unwrap();
            let a = t.tanh(h);
            t.sum(a)
        });
        fd_check(vec![w.clone(), m.clone()], |t, v| {
            let c = t.matmul(v[0], v[1]).unwrap();
            let sg = t.sigmoid(c);
            t.sum(sg)
        });
        fd_check(vec![x.clone(), y.clone()], |t, v| {
            // concat + column + reshape + one_minus + sub + scale
            let joined = t.concat(&[v[0], v[1]]).unwrap();
            let mat = t.reshape(joined, vec![7, 1]).unwrap();
            let col = t.column(mat, 0).unwrap();
            let om = t.one_minus(col);
            let sg = t.sigmoid(om);
            let d = t.sub(sg, col).unwrap();
            let sq = t.mul(d, d).unwrap();
            let total = t.sum(sq);
            t.scale(total, 0.25)
        });
        fd_check(vec![s.clone(), y.clone()], |t, v| {
            // scalar broadcast paths for add/sub/mul
            let a = t.add(v[0], v[1]).unwrap();
            let b = t.sub(a, v[0]).unwrap();
            let c = t.mul(v[0], b).unwrap();
            t.mean(c)
        });
    }

    #[test]
    fn finite_differences_through_recurrent_chain() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let w = random_tensor(&mut rng, vec![3, 3]);
        let h0 = random_tensor(&mut rng, vec![3]);
        // Small unrolled recurrence: h_{j+1} = tanh(W h_j), loss = sum(h_3 ⊙ h_3)
        fd_check(vec![w, h0], |t, v| {
            let mut h = v[1];
            for _ in 0..3 {
                let z = t.matmul(v[0], h).unwrap();
                h = t.tanh(z);
            }
            let sq = t.mul(h, h).unwrap();
            t.sum(sq)
        });
    }
}
