//! Reverse-mode gradient tape over the four layer kernels.
//!
//! Forward methods run the kernel, push the result into a value arena and
//! append an op holding whatever the backward pass needs. [`GradTape::backward`]
//! walks the ops once in reverse order.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::nn::{lstm_forward, LstmCache, LstmState, LstmWeights};
use crate::tensor::{log_softmax, matvec_f64, matvec_t_acc, outer_acc, Tensor};
use crate::{Error, Result};

/// Index of a parameter tensor in the slice handed to the tape.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub usize);

/// Handle to a value recorded on a tape.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ValueId(usize);

#[derive(Debug, Clone)]
enum Value {
    Vector(Vec<f32>),
    Scalar(f64),
}

#[derive(Debug, Clone)]
enum Op {
    Embed {
        table: ParamId,
        row: usize,
        out: ValueId,
    },
    Lstm {
        w: ParamId,
        b: ParamId,
        x: ValueId,
        h: ValueId,
        c: ValueId,
        out_h: ValueId,
        out_c: ValueId,
        cache: LstmCache,
    },
    Linear {
        w: ParamId,
        b: ParamId,
        x: ValueId,
        out: ValueId,
    },
    Xent {
        logits: ValueId,
        target: usize,
        probs: Vec<f64>,
        out: ValueId,
    },
    Mean {
        inputs: Vec<ValueId>,
        out: ValueId,
    },
    Sum {
        input: ValueId,
        out: ValueId,
    },
}

/// Gradients, one tensor per parameter, same shapes as the parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    tensors: Vec<Tensor>,
}

impl Gradients {
    pub fn zeros_like(params: &[Tensor]) -> Self {
        Self {
            tensors: params.iter().map(|p| Tensor::zeros(p.shape())).collect(),
        }
    }

    pub fn tensors(&self) -> &[Tensor] {
        &self.tensors
    }

    pub fn tensors_mut(&mut self) -> &mut [Tensor] {
        &mut self.tensors
    }

    pub fn get(&self, id: ParamId) -> &Tensor {
        &self.tensors[id.0]
    }

    pub fn add_assign(&mut self, other: &Gradients) {
        for (a, b) in self.tensors.iter_mut().zip(&other.tensors) {
            for (x, y) in a.data_mut().iter_mut().zip(b.data()) {
                *x += *y;
            }
        }
    }

    pub fn scale(&mut self, factor: f32) {
        for t in &mut self.tensors {
            for x in t.data_mut() {
                *x *= factor;
            }
        }
    }

    pub fn global_norm(&self) -> f64 {
        let sq: f64 = self
            .tensors
            .iter()
            .flat_map(|t| t.data())
            .map(|&g| g as f64 * g as f64)
            .sum();
        libm::sqrt(sq)
    }
}

/// Records one forward pass; single writer.
#[derive(Debug, Clone, Default)]
pub struct GradTape {
    values: Vec<Value>,
    ops: Vec<Op>,
    output: Option<ValueId>,
}

impl GradTape {
    pub fn new() -> Self {
        Self::default()
    }

    fn push(&mut self, v: Value) -> ValueId {
        self.values.push(v);
        ValueId(self.values.len() - 1)
    }

    fn vector(&self, id: ValueId) -> &[f32] {
        match &self.values[id.0] {
            Value::Vector(v) => v,
            Value::Scalar(_) => &[],
        }
    }

    /// A constant leaf (not a parameter).
    pub fn input(&mut self, data: Vec<f32>) -> ValueId {
        self.push(Value::Vector(data))
    }

    pub fn value(&self, id: ValueId) -> &[f32] {
        self.vector(id)
    }

    pub fn scalar(&self, id: ValueId) -> Result<f64> {
        match self.values[id.0] {
            Value::Scalar(s) => Ok(s),
            Value::Vector(_) => Err(Error::NotScalar(id.0)),
        }
    }

    pub fn op_count(&self) -> usize {
        self.ops.len()
    }

    /// Marks the scalar that [`GradTape::backward`] differentiates.
    pub fn set_output(&mut self, id: ValueId) {
        self.output = Some(id);
    }

    pub fn output(&self) -> Option<ValueId> {
        self.output
    }

    pub fn embed(&mut self, params: &[Tensor], table: ParamId, row: usize) -> Result<ValueId> {
        let v = crate::nn::embed(&params[table.0], row)?;
        let out = self.push(Value::Vector(v));
        self.ops.push(Op::Embed { table, row, out });
        Ok(out)
    }

    pub fn lstm(
        &mut self,
        params: &[Tensor],
        (w, b): (ParamId, ParamId),
        x: ValueId,
        (h, c): (ValueId, ValueId),
    ) -> Result<(ValueId, ValueId)> {
        let prev = LstmState {
            h: self.vector(h).to_vec(),
            c: self.vector(c).to_vec(),
        };
        let weights = LstmWeights {
            w: &params[w.0],
            b: &params[b.0],
        };
        let (next, cache) = lstm_forward(self.vector(x), &prev, weights)?;
        let out_h = self.push(Value::Vector(next.h));
        let out_c = self.push(Value::Vector(next.c));
        self.ops.push(Op::Lstm {
            w,
            b,
            x,
            h,
            c,
            out_h,
            out_c,
            cache,
        });
        Ok((out_h, out_c))
    }

    pub fn linear(
        &mut self,
        params: &[Tensor],
        (w, b): (ParamId, ParamId),
        x: ValueId,
    ) -> Result<ValueId> {
        let v = crate::nn::linear(self.vector(x), &params[w.0], &params[b.0])?;
        let out = self.push(Value::Vector(v));
        self.ops.push(Op::Linear { w, b, x, out });
        Ok(out)
    }

    pub fn xent(&mut self, logits: ValueId, target: usize) -> Result<ValueId> {
        let l = self.vector(logits);
        if target >= l.len() {
            return Err(Error::TokenOutOfRange {
                id: target,
                vocab_size: l.len(),
            });
        }
        let lp = log_softmax(l);
        let loss = -lp[target];
        let probs = lp.iter().map(|x| libm::exp(*x)).collect();
        let out = self.push(Value::Scalar(loss));
        self.ops.push(Op::Xent {
            logits,
            target,
            probs,
            out,
        });
        Ok(out)
    }

    /// Arithmetic mean of scalar values.
    pub fn mean(&mut self, inputs: &[ValueId]) -> Result<ValueId> {
        if inputs.is_empty() {
            return Err(Error::EmptySequence("mean"));
        }
        let mut sum = 0.0;
        for id in inputs {
            sum += self.scalar(*id)?;
        }
        let out = self.push(Value::Scalar(sum / inputs.len() as f64));
        self.ops.push(Op::Mean {
            inputs: inputs.to_vec(),
            out,
        });
        Ok(out)
    }

    /// Sum of a vector's entries as a scalar.
    pub fn sum(&mut self, input: ValueId) -> ValueId {
        let total = self.vector(input).iter().map(|x| *x as f64).sum();
        let out = self.push(Value::Scalar(total));
        self.ops.push(Op::Sum { input, out });
        out
    }

    /// Gradient of `loss_grad × output` with respect to every parameter.
    pub fn backward(&self, params: &[Tensor], loss_grad: f64) -> Result<Gradients> {
        let output = match self.output {
            Some(o) if !self.ops.is_empty() => o,
            _ => return Err(Error::BackwardBeforeForward),
        };
        self.scalar(output)?;

        let mut dvals: Vec<Vec<f64>> = self
            .values
            .iter()
            .map(|v| match v {
                Value::Vector(x) => vec![0.0; x.len()],
                Value::Scalar(_) => vec![0.0],
            })
            .collect();
        let mut dparams: Vec<Vec<f64>> = params.iter().map(|p| vec![0.0; p.len()]).collect();
        dvals[output.0][0] = loss_grad;

        for op in self.ops.iter().rev() {
            match op {
                Op::Mean { inputs, out } => {
                    let g = dvals[out.0][0] / inputs.len() as f64;
                    for id in inputs {
                        dvals[id.0][0] += g;
                    }
                }
                Op::Sum { input, out } => {
                    let g = dvals[out.0][0];
                    for d in dvals[input.0].iter_mut() {
                        *d += g;
                    }
                }
                Op::Xent {
                    logits,
                    target,
                    probs,
                    out,
                } => {
                    let g = dvals[out.0][0];
                    if g != 0.0 {
                        let dl = &mut dvals[logits.0];
                        for (j, p) in probs.iter().enumerate() {
                            dl[j] += g * (p - if j == *target { 1.0 } else { 0.0 });
                        }
                    }
                }
                Op::Linear { w, b, x, out } => {
                    let dy = core::mem::take(&mut dvals[out.0]);
                    outer_acc(&dy, self.vector(*x), &mut dparams[w.0]);
                    for (d, g) in dparams[b.0].iter_mut().zip(&dy) {
                        *d += g;
                    }
                    matvec_t_acc(params[w.0].data(), &dy, &mut dvals[x.0]);
                    dvals[out.0] = dy;
                }
                Op::Embed { table, row, out } => {
                    let cols = params[table.0].cols();
                    let dst = &mut dparams[table.0][row * cols..(row + 1) * cols];
                    for (d, g) in dst.iter_mut().zip(&dvals[out.0]) {
                        *d += g;
                    }
                }
                Op::Lstm {
                    w,
                    b,
                    x,
                    h,
                    c,
                    out_h,
                    out_c,
                    cache,
                } => {
                    let hidden = cache.c_prev.len();
                    let gates = &cache.gates;
                    let mut dz = vec![0.0f64; 4 * hidden];
                    let mut dc_prev = vec![0.0f64; hidden];
                    for j in 0..hidden {
                        let (i, f, g, o) = (
                            gates[j],
                            gates[hidden + j],
                            gates[2 * hidden + j],
                            gates[3 * hidden + j],
                        );
                        let tc = cache.tanh_c[j];
                        let dh = dvals[out_h.0][j];
                        let dc = dvals[out_c.0][j] + dh * o * (1.0 - tc * tc);
                        dz[j] = dc * g * i * (1.0 - i);
                        dz[hidden + j] = dc * cache.c_prev[j] as f64 * f * (1.0 - f);
                        dz[2 * hidden + j] = dc * i * (1.0 - g * g);
                        dz[3 * hidden + j] = dh * tc * o * (1.0 - o);
                        dc_prev[j] = dc * f;
                    }
                    outer_acc(&dz, &cache.xh, &mut dparams[w.0]);
                    for (d, g) in dparams[b.0].iter_mut().zip(&dz) {
                        *d += g;
                    }
                    let input = cache.xh.len() - hidden;
                    let mut dxh = vec![0.0f64; input + hidden];
                    matvec_t_acc(params[w.0].data(), &dz, &mut dxh);
                    for (d, g) in dvals[x.0].iter_mut().zip(&dxh[..input]) {
                        *d += g;
                    }
                    for (d, g) in dvals[h.0].iter_mut().zip(&dxh[input..]) {
                        *d += g;
                    }
                    for (d, g) in dvals[c.0].iter_mut().zip(&dc_prev) {
                        *d += g;
                    }
                }
            }
        }

        let tensors = params
            .iter()
            .zip(dparams)
            .map(|(p, d)| {
                Tensor::new(
                    p.shape().to_vec(),
                    d.into_iter().map(|g| g as f32).collect(),
                )
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Gradients { tensors })
    }
}

/// Names a gradient tensor for diagnostics.
pub(crate) fn first_non_finite(grads: &Gradients, names: &[&str]) -> Option<String> {
    grads.tensors.iter().position(|t| !t.is_finite()).map(|i| {
        names
            .get(i)
            .map_or_else(|| alloc::format!("#{i}"), |n| String::from(*n))
    })
}

/// `out = w · x + b` without recording; used by decoding.
pub(crate) fn project(w: &Tensor, b: &Tensor, x: &[f32]) -> Vec<f32> {
    let mut out = vec![0.0f64; b.len()];
    matvec_f64(w.data(), x, b.data(), &mut out);
    out.into_iter().map(|v| v as f32).collect()
}
