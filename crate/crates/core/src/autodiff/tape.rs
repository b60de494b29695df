use std::sync::Arc;

use super::tensor::{matmul, matmul_nt, matmul_tn, Tensor};
use crate::error::{Error, Result};

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

pub type Index = Arc<[usize]>;

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    AddRow(Var, Var),
    MulConst(Var, Tensor),
    Scale(Var, f64),
    Square(Var),
    LeakyRelu(Var, f64),
    Elu(Var),
    Gather(Var, Index),
    ScatterSum(Var, Index),
    SegmentMean(Var, Index, Arc<[f64]>),
    SegmentSoftmax(Var, Index),
    HeadDot(Var, Var, usize),
    HeadMul(Var, Var, usize),
    GroupNorm {
        x: Var,
        gamma: Var,
        beta: Var,
        groups: usize,
        normalized: Tensor,
        inv_std: Vec<f64>,
    },
    ConcatCols(Vec<Var>),
    Reshape(Var),
    SumAll(Var),
    MeanAll(Var),
}

impl Op {
    fn name(&self) -> &'static str {
        match self {
            Op::Leaf => "leaf",
            Op::MatMul(..) => "matmul",
            Op::Add(..) => "add",
            Op::Sub(..) => "sub",
            Op::Mul(..) => "mul",
            Op::AddRow(..) => "add_row",
            Op::MulConst(..) => "mul_const",
            Op::Scale(..) => "scale",
            Op::Square(..) => "square",
            Op::LeakyRelu(..) => "leaky_relu",
            Op::Elu(..) => "elu",
            Op::Gather(..) => "gather",
            Op::ScatterSum(..) => "scatter_sum",
            Op::SegmentMean(..) => "segment_mean",
            Op::SegmentSoftmax(..) => "segment_softmax",
            Op::HeadDot(..) => "head_dot",
            Op::HeadMul(..) => "head_mul",
            Op::GroupNorm { .. } => "group_norm",
            Op::ConcatCols(..) => "concat_cols",
            Op::Reshape(..) => "reshape",
            Op::SumAll(..) => "sum_all",
            Op::MeanAll(..) => "mean_all",
        }
    }
}

struct Node {
    value: Tensor,
    op: Op,
}

pub const GROUP_NORM_EPS: f64 = 1e-5;

/// Wengert list for reverse-mode differentiation.
///
/// Values are computed eagerly as ops are recorded; [`Tape::backward`] walks
/// the list in reverse. Shape mismatches are programming errors and panic.
pub struct Tape {
    nodes: Vec<Node>,
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

/// Gradients of a scalar with respect to every recorded value.
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    pub fn get(&self, v: Var) -> Option<&Tensor> {
        self.grads[v.0].as_ref()
    }

    /// The gradient, or zeros shaped like `like` when `v` did not influence
    /// the output.
    pub fn get_or_zeros(&self, v: Var, like: &Tensor) -> Tensor {
        self.get(v)
            .cloned()
            .unwrap_or_else(|| Tensor::zeros(like.rows(), like.cols()))
    }
}

impl Tape {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    /// Fails if `output` is non-finite, naming the op that produced the
    /// first non-finite value on the tape.
    pub fn check(&self, output: Var) -> Result<()> {
        if self.value(output).is_finite() {
            return Ok(());
        }
        let i = self.nodes[..=output.0]
            .iter()
            .position(|n| !n.value.is_finite())
            .unwrap_or(output.0);
        Err(Error::Numeric {
            op: self.nodes[i].op.name().to_string(),
            reason: format!("non-finite value produced at tape position {i}"),
        })
    }

    fn push(&mut self, value: Tensor, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn leaf(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let (va, vb) = (self.value(a), self.value(b));
        assert_eq!(va.cols(), vb.rows(), "matmul {:?} x {:?}", va.shape(), vb.shape());
        let out = matmul(va, vb);
        self.push(out, Op::MatMul(a, b))
    }

    fn zip(&mut self, a: Var, b: Var, f: impl Fn(f64, f64) -> f64, op: Op) -> Var {
        let (va, vb) = (self.value(a), self.value(b));
        assert_eq!(va.shape(), vb.shape(), "{} shapes", op.name());
        let data = va.data().iter().zip(vb.data()).map(|(&x, &y)| f(x, y)).collect();
        let out = Tensor::from_rows(va.rows(), va.cols(), data);
        self.push(out, op)
    }

    fn map(&mut self, a: Var, f: impl Fn(f64) -> f64, op: Op) -> Var {
        let va = self.value(a);
        let out = Tensor::from_rows(va.rows(), va.cols(), va.data().iter().map(|&x| f(x)).collect());
        self.push(out, op)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        self.zip(a, b, |x, y| x + y, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        self.zip(a, b, |x, y| x - y, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        self.zip(a, b, |x, y| x * y, Op::Mul(a, b))
    }

    /// Adds a `[1, m]` row to every row of an `[n, m]` value.
    pub fn add_row(&mut self, x: Var, row: Var) -> Var {
        let (vx, vr) = (self.value(x), self.value(row));
        assert_eq!(vr.rows(), 1, "add_row expects a single row");
        assert_eq!(vx.cols(), vr.cols(), "add_row widths");
        let m = vx.cols();
        let data = vx
            .data()
            .iter()
            .enumerate()
            .map(|(i, &v)| v + vr.data()[i % m])
            .collect();
        let out = Tensor::from_rows(vx.rows(), m, data);
        self.push(out, Op::AddRow(x, row))
    }

    /// Elementwise product with a constant (e.g. a dropout mask).
    pub fn mul_const(&mut self, x: Var, c: Tensor) -> Var {
        let vx = self.value(x);
        assert_eq!(vx.shape(), c.shape(), "mul_const shapes");
        let data = vx.data().iter().zip(c.data()).map(|(a, b)| a * b).collect();
        let out = Tensor::from_rows(vx.rows(), vx.cols(), data);
        self.push(out, Op::MulConst(x, c))
    }

    pub fn scale(&mut self, x: Var, s: f64) -> Var {
        self.map(x, |v| v * s, Op::Scale(x, s))
    }

    pub fn square(&mut self, x: Var) -> Var {
        self.map(x, |v| v * v, Op::Square(x))
    }

    pub fn leaky_relu(&mut self, x: Var, slope: f64) -> Var {
        self.map(x, |v| if v > 0.0 { v } else { slope * v }, Op::LeakyRelu(x, slope))
    }

    pub fn elu(&mut self, x: Var) -> Var {
        self.map(x, |v| if v > 0.0 { v } else { v.exp_m1() }, Op::Elu(x))
    }

    /// Row gather: `out[i] = x[index[i]]`.
    pub fn gather(&mut self, x: Var, index: Index) -> Var {
        let vx = self.value(x);
        let m = vx.cols();
        let mut data = Vec::with_capacity(index.len() * m);
        for &r in index.iter() {
            assert!(r < vx.rows(), "gather index {r} out of {}", vx.rows());
            data.extend_from_slice(vx.row(r));
        }
        let out = Tensor::from_rows(index.len(), m, data);
        self.push(out, Op::Gather(x, index))
    }

    /// Row scatter-add into `n_out` rows: `out[index[i]] += x[i]`.
    pub fn scatter_sum(&mut self, x: Var, index: Index, n_out: usize) -> Var {
        let vx = self.value(x);
        assert_eq!(vx.rows(), index.len(), "scatter_sum index length");
        let m = vx.cols();
        let mut out = Tensor::zeros(n_out, m);
        for (i, &r) in index.iter().enumerate() {
            let dst = &mut out.data_mut()[r * m..(r + 1) * m];
            for (o, v) in dst.iter_mut().zip(vx.row(i)) {
                *o += v;
            }
        }
        self.push(out, Op::ScatterSum(x, index))
    }

    /// Mean of rows per segment; empty segments give zero rows.
    pub fn segment_mean(&mut self, x: Var, segments: Index, n_segments: usize) -> Var {
        let vx = self.value(x);
        assert_eq!(vx.rows(), segments.len(), "segment_mean index length");
        let m = vx.cols();
        let mut counts = vec![0.0; n_segments];
        for &s in segments.iter() {
            counts[s] += 1.0;
        }
        let inv: Arc<[f64]> = counts.iter().map(|&c| if c > 0.0 { 1.0 / c } else { 0.0 }).collect();
        let mut out = Tensor::zeros(n_segments, m);
        for (i, &s) in segments.iter().enumerate() {
            let dst = &mut out.data_mut()[s * m..(s + 1) * m];
            for (o, v) in dst.iter_mut().zip(vx.row(i)) {
                *o += v * inv[s];
            }
        }
        self.push(out, Op::SegmentMean(x, segments, inv))
    }

    /// Softmax of each column over the rows sharing a segment id.
    pub fn segment_softmax(&mut self, x: Var, segments: Index, n_segments: usize) -> Var {
        let vx = self.value(x);
        assert_eq!(vx.rows(), segments.len(), "segment_softmax index length");
        let m = vx.cols();
        let mut max = vec![f64::NEG_INFINITY; n_segments * m];
        for (i, &s) in segments.iter().enumerate() {
            for (c, &v) in vx.row(i).iter().enumerate() {
                let slot = &mut max[s * m + c];
                if v > *slot {
                    *slot = v;
                }
            }
        }
        let mut data = Vec::with_capacity(vx.len());
        let mut sum = vec![0.0; n_segments * m];
        for (i, &s) in segments.iter().enumerate() {
            for (c, &v) in vx.row(i).iter().enumerate() {
                let e = (v - max[s * m + c]).exp();
                sum[s * m + c] += e;
                data.push(e);
            }
        }
        for (i, &s) in segments.iter().enumerate() {
            for c in 0..m {
                data[i * m + c] /= sum[s * m + c];
            }
        }
        let out = Tensor::from_rows(vx.rows(), m, data);
        self.push(out, Op::SegmentSoftmax(x, segments))
    }

    /// Per-head dot product: `z` is `[e, heads * d]`, `a` is `[1, heads * d]`
    /// and the result is `[e, heads]`.
    pub fn head_dot(&mut self, z: Var, a: Var, heads: usize) -> Var {
        let (vz, va) = (self.value(z), self.value(a));
        assert_eq!(va.rows(), 1, "head_dot vector");
        assert_eq!(vz.cols(), va.cols(), "head_dot widths");
        assert_eq!(vz.cols() % heads, 0, "head_dot head split");
        let d = vz.cols() / heads;
        let mut data = Vec::with_capacity(vz.rows() * heads);
        for r in 0..vz.rows() {
            for (block, a) in vz.row(r).chunks_exact(d).zip(va.data().chunks_exact(d)) {
                data.push(block.iter().zip(a).map(|(x, y)| x * y).sum());
            }
        }
        let out = Tensor::from_rows(vz.rows(), heads, data);
        self.push(out, Op::HeadDot(z, a, heads))
    }

    /// Scales each head block of `values` (`[e, heads * d]`) by the matching
    /// column of `alpha` (`[e, heads]`).
    pub fn head_mul(&mut self, alpha: Var, values: Var, heads: usize) -> Var {
        let (va, vv) = (self.value(alpha), self.value(values));
        assert_eq!(va.cols(), heads, "head_mul alpha width");
        assert_eq!(va.rows(), vv.rows(), "head_mul rows");
        let d = vv.cols() / heads;
        let mut data = Vec::with_capacity(vv.len());
        for r in 0..vv.rows() {
            for (block, &w) in vv.row(r).chunks_exact(d).zip(va.row(r)) {
                data.extend(block.iter().map(|v| v * w));
            }
        }
        let out = Tensor::from_rows(vv.rows(), vv.cols(), data);
        self.push(out, Op::HeadMul(alpha, values, heads))
    }

    /// Per-row group normalization over channel groups, then a per-channel
    /// affine map with `gamma` and `beta` (`[1, c]`).
    pub fn group_norm(&mut self, x: Var, gamma: Var, beta: Var, groups: usize) -> Var {
        let (vx, vg, vb) = (self.value(x), self.value(gamma), self.value(beta));
        let (n, c) = (vx.rows(), vx.cols());
        assert!(groups > 0 && c % groups == 0, "group_norm: {c} channels in {groups} groups");
        assert_eq!(vg.cols(), c, "group_norm gamma width");
        assert_eq!(vb.cols(), c, "group_norm beta width");
        let size = c / groups;
        let mut normalized = Tensor::zeros(n, c);
        let mut inv_std = Vec::with_capacity(n * groups);
        for r in 0..n {
            let row = vx.row(r);
            for g in 0..groups {
                let block = &row[g * size..(g + 1) * size];
                let mean = block.iter().sum::<f64>() / size as f64;
                let var = block.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / size as f64;
                let is = 1.0 / (var + GROUP_NORM_EPS).sqrt();
                inv_std.push(is);
                for (j, &v) in block.iter().enumerate() {
                    normalized.data_mut()[r * c + g * size + j] = (v - mean) * is;
                }
            }
        }
        let data = normalized
            .data()
            .iter()
            .enumerate()
            .map(|(i, &h)| h * vg.data()[i % c] + vb.data()[i % c])
            .collect();
        let out = Tensor::from_rows(n, c, data);
        self.push(
            out,
            Op::GroupNorm {
                x,
                gamma,
                beta,
                groups,
                normalized,
                inv_std,
            },
        )
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Var {
        assert!(!parts.is_empty(), "concat of nothing");
        let rows = self.value(parts[0]).rows();
        let widths: Vec<usize> = parts
            .iter()
            .map(|&p| {
                assert_eq!(self.value(p).rows(), rows, "concat row counts");
                self.value(p).cols()
            })
            .collect();
        let total: usize = widths.iter().sum();
        let mut data = Vec::with_capacity(rows * total);
        for r in 0..rows {
            for &p in parts {
                data.extend_from_slice(self.value(p).row(r));
            }
        }
        let out = Tensor::from_rows(rows, total, data);
        self.push(out, Op::ConcatCols(parts.to_vec()))
    }

    pub fn reshape(&mut self, x: Var, rows: usize, cols: usize) -> Var {
        let out = self.value(x).reshaped(rows, cols);
        self.push(out, Op::Reshape(x))
    }

    pub fn sum_all(&mut self, x: Var) -> Var {
        let s = self.value(x).data().iter().sum();
        self.push(Tensor::scalar(s), Op::SumAll(x))
    }

    pub fn mean_all(&mut self, x: Var) -> Var {
        let v = self.value(x);
        let s = v.data().iter().sum::<f64>() / v.len() as f64;
        self.push(Tensor::scalar(s), Op::MeanAll(x))
    }

    /// Reverse pass from a scalar output. Fails if a leaf gradient is
    /// non-finite, naming the op where the gradient first broke down.
    pub fn backward(&self, output: Var) -> Result<Gradients> {
        let out = self.value(output);
        assert_eq!(out.len(), 1, "backward needs a scalar output");
        let mut grads: Vec<Option<Tensor>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[output.0] = Some(Tensor::full(out.rows(), out.cols(), 1.0));

        for i in (0..=output.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            for (parent, contribution) in self.local_grads(node, &g) {
                match &mut grads[parent.0] {
                    Some(acc) => acc.add_assign(&contribution),
                    slot @ None => *slot = Some(contribution),
                }
            }
            grads[i] = Some(g);
        }
        let leaves_finite = self.nodes.iter().zip(&grads).all(|(n, g)| {
            !matches!(n.op, Op::Leaf) || g.as_ref().is_none_or(Tensor::is_finite)
        });
        if !leaves_finite {
            let i = (0..=output.0)
                .rev()
                .find(|&i| grads[i].as_ref().is_some_and(|g| !g.is_finite()))
                .expect("a non-finite leaf gradient");
            return Err(Error::Numeric {
                op: self.nodes[i].op.name().to_string(),
                reason: format!("non-finite gradient at tape position {i}"),
            });
        }
        Ok(Gradients { grads })
    }

    fn local_grads(&self, node: &Node, g: &Tensor) -> Vec<(Var, Tensor)> {
        let like = |v: Var, data: Vec<f64>| {
            let t = self.value(v);
            Tensor::from_rows(t.rows(), t.cols(), data)
        };
        match &node.op {
            Op::Leaf => vec![],
            Op::MatMul(a, b) => vec![
                (*a, matmul_nt(g, self.value(*b))),
                (*b, matmul_tn(self.value(*a), g)),
            ],
            Op::Add(a, b) => vec![(*a, g.clone()), (*b, g.clone())],
            Op::Sub(a, b) => vec![
                (*a, g.clone()),
                (*b, like(*b, g.data().iter().map(|x| -x).collect())),
            ],
            Op::Mul(a, b) => {
                let (va, vb) = (self.value(*a), self.value(*b));
                vec![
                    (*a, like(*a, g.data().iter().zip(vb.data()).map(|(x, y)| x * y).collect())),
                    (*b, like(*b, g.data().iter().zip(va.data()).map(|(x, y)| x * y).collect())),
                ]
            }
            Op::AddRow(x, row) => {
                let m = g.cols();
                let mut dr = vec![0.0; m];
                for (i, v) in g.data().iter().enumerate() {
                    dr[i % m] += v;
                }
                vec![(*x, g.clone()), (*row, Tensor::from_rows(1, m, dr))]
            }
            Op::MulConst(x, c) => vec![(
                *x,
                like(*x, g.data().iter().zip(c.data()).map(|(a, b)| a * b).collect()),
            )],
            Op::Scale(x, s) => vec![(*x, like(*x, g.data().iter().map(|v| v * s).collect()))],
            Op::Square(x) => {
                let vx = self.value(*x);
                vec![(
                    *x,
                    like(*x, g.data().iter().zip(vx.data()).map(|(d, v)| 2.0 * v * d).collect()),
                )]
            }
            Op::LeakyRelu(x, slope) => {
                let vx = self.value(*x);
                vec![(
                    *x,
                    like(
                        *x,
                        g.data()
                            .iter()
                            .zip(vx.data())
                            .map(|(d, &v)| if v > 0.0 { *d } else { slope * d })
                            .collect(),
                    ),
                )]
            }
            Op::Elu(x) => {
                let vx = self.value(*x);
                vec![(
                    *x,
                    like(
                        *x,
                        g.data()
                            .iter()
                            .zip(vx.data().iter().zip(node.value.data()))
                            .map(|(d, (&v, &y))| if v > 0.0 { *d } else { d * (y + 1.0) })
                            .collect(),
                    ),
                )]
            }
            Op::Gather(x, index) => {
                let vx = self.value(*x);
                let m = vx.cols();
                let mut dx = Tensor::zeros(vx.rows(), m);
                for (i, &r) in index.iter().enumerate() {
                    let dst = &mut dx.data_mut()[r * m..(r + 1) * m];
                    for (o, v) in dst.iter_mut().zip(g.row(i)) {
                        *o += v;
                    }
                }
                vec![(*x, dx)]
            }
            Op::ScatterSum(x, index) => {
                let m = g.cols();
                let mut data = Vec::with_capacity(index.len() * m);
                for &r in index.iter() {
                    data.extend_from_slice(g.row(r));
                }
                vec![(*x, Tensor::from_rows(index.len(), m, data))]
            }
            Op::SegmentMean(x, segments, inv) => {
                let m = g.cols();
                let mut data = Vec::with_capacity(segments.len() * m);
                for &s in segments.iter() {
                    data.extend(g.row(s).iter().map(|v| v * inv[s]));
                }
                vec![(*x, Tensor::from_rows(segments.len(), m, data))]
            }
            Op::SegmentSoftmax(x, segments) => {
                let y = &node.value;
                let m = y.cols();
                let n_seg = segments.iter().copied().max().map_or(0, |s| s + 1);
                let mut dot = vec![0.0; n_seg * m];
                for (i, &s) in segments.iter().enumerate() {
                    for c in 0..m {
                        dot[s * m + c] += y.at(i, c) * g.at(i, c);
                    }
                }
                let mut data = Vec::with_capacity(y.len());
                for (i, &s) in segments.iter().enumerate() {
                    for c in 0..m {
                        data.push(y.at(i, c) * (g.at(i, c) - dot[s * m + c]));
                    }
                }
                vec![(*x, Tensor::from_rows(y.rows(), m, data))]
            }
            Op::HeadDot(z, a, heads) => {
                let (vz, va) = (self.value(*z), self.value(*a));
                let d = vz.cols() / heads;
                let mut dz = Vec::with_capacity(vz.len());
                let mut da = vec![0.0; va.cols()];
                for r in 0..vz.rows() {
                    for (h, &gh) in g.row(r).iter().enumerate() {
                        let span = h * d..(h + 1) * d;
                        dz.extend(va.data()[span.clone()].iter().map(|a| gh * a));
                        for (acc, z) in da[span.clone()].iter_mut().zip(&vz.row(r)[span]) {
                            *acc += gh * z;
                        }
                    }
                }
                vec![
                    (*z, like(*z, dz)),
                    (*a, Tensor::from_rows(1, va.cols(), da)),
                ]
            }
            Op::HeadMul(alpha, values, heads) => {
                let (va, vv) = (self.value(*alpha), self.value(*values));
                let d = vv.cols() / heads;
                let mut dalpha = Vec::with_capacity(va.len());
                let mut dv = Vec::with_capacity(vv.len());
                for r in 0..vv.rows() {
                    let blocks = vv.row(r).chunks_exact(d).zip(g.row(r).chunks_exact(d));
                    for ((v, gv), &w) in blocks.zip(va.row(r)) {
                        dalpha.push(v.iter().zip(gv).map(|(a, b)| a * b).sum());
                        dv.extend(gv.iter().map(|x| x * w));
                    }
                }
                vec![(*alpha, like(*alpha, dalpha)), (*values, like(*values, dv))]
            }
            Op::GroupNorm {
                x,
                gamma,
                beta,
                groups,
                normalized,
                inv_std,
            } => {
                let vg = self.value(*gamma);
                let (n, c) = (g.rows(), g.cols());
                let size = c / groups;
                let mut dgamma = vec![0.0; c];
                let mut dbeta = vec![0.0; c];
                let mut dx = vec![0.0; n * c];
                for r in 0..n {
                    for grp in 0..*groups {
                        let base = r * c + grp * size;
                        let mut sum_dh = 0.0;
                        let mut sum_dh_h = 0.0;
                        for j in 0..size {
                            let ch = grp * size + j;
                            let gi = g.data()[base + j];
                            let h = normalized.data()[base + j];
                            dgamma[ch] += gi * h;
                            dbeta[ch] += gi;
                            let dh = gi * vg.data()[ch];
                            sum_dh += dh;
                            sum_dh_h += dh * h;
                        }
                        let is = inv_std[r * groups + grp];
                        let k = size as f64;
                        for j in 0..size {
                            let ch = grp * size + j;
                            let dh = g.data()[base + j] * vg.data()[ch];
                            let h = normalized.data()[base + j];
                            dx[base + j] = is / k * (k * dh - sum_dh - h * sum_dh_h);
                        }
                    }
                }
                vec![
                    (*x, Tensor::from_rows(n, c, dx)),
                    (*gamma, Tensor::from_rows(1, c, dgamma)),
                    (*beta, Tensor::from_rows(1, c, dbeta)),
                ]
            }
            Op::ConcatCols(parts) => {
                let rows = g.rows();
                let mut offset = 0;
                parts
                    .iter()
                    .map(|&p| {
                        let w = self.value(p).cols();
                        let mut data = Vec::with_capacity(rows * w);
                        for r in 0..rows {
                            data.extend_from_slice(&g.row(r)[offset..offset + w]);
                        }
                        offset += w;
                        (p, Tensor::from_rows(rows, w, data))
                    })
                    .collect()
            }
            Op::Reshape(x) => {
                let vx = self.value(*x);
                vec![(*x, g.reshaped(vx.rows(), vx.cols()))]
            }
            Op::SumAll(x) => {
                let vx = self.value(*x);
                vec![(*x, Tensor::full(vx.rows(), vx.cols(), g.data()[0]))]
            }
            Op::MeanAll(x) => {
                let vx = self.value(*x);
                vec![(*x, Tensor::full(vx.rows(), vx.cols(), g.data()[0] / vx.len() as f64))]
            }
        }
    }
}
