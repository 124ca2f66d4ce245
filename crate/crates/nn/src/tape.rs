//! Define-by-run reverse-mode tape over [`Matrix`] values.
//!
//! Every op records its inputs and whatever constants its backward rule
//! needs; [`Tape::backward`] walks the records in reverse and returns the
//! gradients of every [`ParamSet`] entry the computation touched.

use std::rc::Rc;

use crate::matrix::dot_slices;
use crate::{Gradients, Matrix, NnError, ParamId, ParamSet};

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug)]
enum Op {
    Leaf,
    Param(ParamId),
    MatMul(Var, Var),
    MatMulBt(Var, Var),
    Transpose(Var),
    Add(Var, Var),
    AddRow(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    ScaleRows(Var, Rc<[f64]>),
    LeakyRelu(Var, f64),
    ConcatCols(Vec<Var>),
    ConcatRows(Vec<Var>),
    MeanRows(Var),
    Sum(Var),
    Dot(Var, Var),
    Pick(Var, usize, usize),
    GatherRows(Var, Rc<[usize]>),
    HeadScores(Var, Var, usize),
    SegmentSoftmax(Var, Rc<[usize]>),
    EdgeAggregate {
        weights: Var,
        source: Var,
        src: Rc<[usize]>,
        tgt: Rc<[usize]>,
        heads: usize,
    },
    Softmax(Var),
    LogSoftmax(Var),
    MaskFill(Var, Rc<[bool]>),
    Reshape(Var),
}

struct Node {
    value: Option<Matrix>,
    op: Op,
}

/// Recording of one forward computation against a borrowed parameter set.
pub struct Tape<'p> {
    params: &'p ParamSet,
    nodes: Vec<Node>,
}

impl<'p> Tape<'p> {
    pub fn new(params: &'p ParamSet) -> Self {
        Self {
            params,
            nodes: Vec::with_capacity(256),
        }
    }

    pub fn params(&self) -> &'p ParamSet {
        self.params
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Matrix {
        let node = &self.nodes[v.0];
        match (&node.value, &node.op) {
            (Some(m), _) => m,
            (None, Op::Param(id)) => self.params.value(*id),
            (None, _) => unreachable!("non-parameter node without value"),
        }
    }

    fn push(&mut self, value: Matrix, op: Op) -> Var {
        self.nodes.push(Node {
            value: Some(value),
            op,
        });
        Var(self.nodes.len() - 1)
    }

    /// A constant input; receives no gradient.
    pub fn constant(&mut self, value: Matrix) -> Var {
        self.push(value, Op::Leaf)
    }

    pub fn param(&mut self, id: ParamId) -> Var {
        self.nodes.push(Node {
            value: None,
            op: Op::Param(id),
        });
        Var(self.nodes.len() - 1)
    }

    /// Looks a parameter up by name.
    pub fn param_named(&mut self, name: &str) -> Result<Var, NnError> {
        let id = self
            .params
            .id(name)
            .ok_or_else(|| NnError::UnknownParameter(name.to_string()))?;
        Ok(self.param(id))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, NnError> {
        let out = self.value(a).matmul(self.value(b))?;
        Ok(self.push(out, Op::MatMul(a, b)))
    }

    /// `a · bᵀ`.
    pub fn matmul_bt(&mut self, a: Var, b: Var) -> Result<Var, NnError> {
        let out = self.value(a).matmul_bt(self.value(b))?;
        Ok(self.push(out, Op::MatMulBt(a, b)))
    }

    pub fn transpose(&mut self, a: Var) -> Var {
        let out = self.value(a).transpose();
        self.push(out, Op::Transpose(a))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, NnError> {
        let (x, y) = (self.value(a), self.value(b));
        if x.shape() != y.shape() {
            return Err(NnError::shape("add", x.shape(), y.shape()));
        }
        let mut out = x.clone();
        out.add_assign(y);
        Ok(self.push(out, Op::Add(a, b)))
    }

    /// Adds the `1 x c` row `bias` to every row of `a`.
    pub fn add_row(&mut self, a: Var, bias: Var) -> Result<Var, NnError> {
        let (x, b) = (self.value(a), self.value(bias));
        if b.rows() != 1 || b.cols() != x.cols() {
            return Err(NnError::shape("add_row", x.shape(), b.shape()));
        }
        let mut out = x.clone();
        for r in 0..out.rows() {
            for (o, bv) in out.row_mut(r).iter_mut().zip(b.data()) {
                *o += bv;
            }
        }
        Ok(self.push(out, Op::AddRow(a, bias)))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, NnError> {
        let (x, y) = (self.value(a), self.value(b));
        if x.shape() != y.shape() {
            return Err(NnError::shape("mul", x.shape(), y.shape()));
        }
        let data = x.data().iter().zip(y.data()).map(|(p, q)| p * q).collect();
        let out = Matrix::from_vec(x.rows(), x.cols(), data)?;
        Ok(self.push(out, Op::Mul(a, b)))
    }

    pub fn scale(&mut self, a: Var, factor: f64) -> Var {
        let out = self.value(a).map(|x| x * factor);
        self.push(out, Op::Scale(a, factor))
    }

    /// Multiplies row `r` of `a` by the constant `factors[r]`.
    pub fn scale_rows(&mut self, a: Var, factors: Rc<[f64]>) -> Result<Var, NnError> {
        let x = self.value(a);
        if factors.len() != x.rows() {
            return Err(NnError::shape("scale_rows", x.shape(), (factors.len(), 1)));
        }
        let mut out = x.clone();
        for (r, f) in factors.iter().enumerate() {
            out.row_mut(r).iter_mut().for_each(|v| *v *= f);
        }
        Ok(self.push(out, Op::ScaleRows(a, factors)))
    }

    /// `x` for `x >= 0`, `slope * x` otherwise. The subgradient at 0 is 1.
    pub fn leaky_relu(&mut self, a: Var, slope: f64) -> Var {
        let out = self.value(a).map(|x| leaky(x, slope));
        self.push(out, Op::LeakyRelu(a, slope))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var, NnError> {
        let rows = self.value(parts[0]).rows();
        let mut cols = 0;
        for &p in parts {
            let m = self.value(p);
            if m.rows() != rows {
                return Err(NnError::shape("concat_cols", (rows, cols), m.shape()));
            }
            cols += m.cols();
        }
        let mut out = Matrix::zeros(rows, cols);
        let mut offset = 0;
        for &p in parts {
            let m = self.value(p);
            for r in 0..rows {
                out.row_mut(r)[offset..offset + m.cols()].copy_from_slice(m.row(r));
            }
            offset += m.cols();
        }
        Ok(self.push(out, Op::ConcatCols(parts.to_vec())))
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var, NnError> {
        let cols = self.value(parts[0]).cols();
        let mut data = Vec::new();
        let mut rows = 0;
        for &p in parts {
            let m = self.value(p);
            if m.cols() != cols {
                return Err(NnError::shape("concat_rows", (rows, cols), m.shape()));
            }
            data.extend_from_slice(m.data());
            rows += m.rows();
        }
        let out = Matrix::from_vec(rows, cols, data)?;
        Ok(self.push(out, Op::ConcatRows(parts.to_vec())))
    }

    /// Column means as a `1 x c` row. Requires at least one row.
    pub fn mean_rows(&mut self, a: Var) -> Result<Var, NnError> {
        let x = self.value(a);
        if x.rows() == 0 {
            return Err(NnError::Empty("mean_rows"));
        }
        let mut out = Matrix::zeros(1, x.cols());
        for r in 0..x.rows() {
            for (o, v) in out.data_mut().iter_mut().zip(x.row(r)) {
                *o += v;
            }
        }
        let n = x.rows() as f64;
        out.data_mut().iter_mut().for_each(|v| *v /= n);
        Ok(self.push(out, Op::MeanRows(a)))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.value(a).sum();
        self.push(Matrix::scalar(s), Op::Sum(a))
    }

    /// Inner product of two equally sized matrices, read as flat vectors.
    pub fn dot(&mut self, a: Var, b: Var) -> Result<Var, NnError> {
        let (x, y) = (self.value(a), self.value(b));
        if x.len() != y.len() {
            return Err(NnError::shape("dot", x.shape(), y.shape()));
        }
        let s = dot_slices(x.data(), y.data());
        Ok(self.push(Matrix::scalar(s), Op::Dot(a, b)))
    }

    /// The single entry `a[r, c]` as a `1 x 1` value.
    pub fn pick(&mut self, a: Var, r: usize, c: usize) -> Result<Var, NnError> {
        let x = self.value(a);
        if r >= x.rows() || c >= x.cols() {
            return Err(NnError::shape("pick", x.shape(), (r, c)));
        }
        let v = x.get(r, c);
        Ok(self.push(Matrix::scalar(v), Op::Pick(a, r, c)))
    }

    pub fn gather_rows(&mut self, a: Var, index: Rc<[usize]>) -> Result<Var, NnError> {
        let x = self.value(a);
        let mut out = Matrix::zeros(index.len(), x.cols());
        for (i, &r) in index.iter().enumerate() {
            if r >= x.rows() {
                return Err(NnError::IndexOutOfRange { index: r, len: x.rows() });
            }
            out.row_mut(i).copy_from_slice(x.row(r));
        }
        Ok(self.push(out, Op::GatherRows(a, index)))
    }

    /// Per-head attention score: `out[n, h] = Σ_{c ∈ block h} x[n, c] · a[c]`
    /// where the columns of `x` are split into `heads` equal blocks.
    pub fn head_scores(&mut self, x: Var, attn: Var, heads: usize) -> Result<Var, NnError> {
        let (xm, am) = (self.value(x), self.value(attn));
        if am.rows() != 1 || am.cols() != xm.cols() || heads == 0 || xm.cols() % heads != 0 {
            return Err(NnError::shape("head_scores", xm.shape(), am.shape()));
        }
        let width = xm.cols() / heads;
        let mut out = Matrix::zeros(xm.rows(), heads);
        for n in 0..xm.rows() {
            let row = xm.row(n);
            for h in 0..heads {
                let block = h * width..(h + 1) * width;
                out.set(n, h, dot_slices(&row[block.clone()], &am.data()[block]));
            }
        }
        Ok(self.push(out, Op::HeadScores(x, attn, heads)))
    }

    /// Column-wise softmax over groups of rows: rows sharing `segment[r]`
    /// are normalised together, independently per column.
    pub fn segment_softmax(&mut self, a: Var, segment: Rc<[usize]>) -> Result<Var, NnError> {
        let x = self.value(a);
        if segment.len() != x.rows() {
            return Err(NnError::shape("segment_softmax", x.shape(), (segment.len(), 1)));
        }
        let groups = segment.iter().copied().max().map_or(0, |m| m + 1);
        let cols = x.cols();
        let mut max = vec![f64::NEG_INFINITY; groups * cols];
        for (r, &g) in segment.iter().enumerate() {
            for c in 0..cols {
                let slot = &mut max[g * cols + c];
                *slot = slot.max(x.get(r, c));
            }
        }
        let mut out = Matrix::zeros(x.rows(), cols);
        let mut denom = vec![0.0; groups * cols];
        for (r, &g) in segment.iter().enumerate() {
            for c in 0..cols {
                let e = (x.get(r, c) - max[g * cols + c]).exp();
                out.set(r, c, e);
                denom[g * cols + c] += e;
            }
        }
        for (r, &g) in segment.iter().enumerate() {
            for c in 0..cols {
                let v = out.get(r, c) / denom[g * cols + c];
                out.set(r, c, v);
            }
        }
        Ok(self.push(out, Op::SegmentSoftmax(a, segment)))
    }

    /// Weighted scatter of source rows onto target rows:
    /// `out[tgt[e], block h] += weights[e, h] · source[src[e], block h]`.
    pub fn edge_aggregate(
        &mut self,
        weights: Var,
        source: Var,
        src: Rc<[usize]>,
        tgt: Rc<[usize]>,
        targets: usize,
        heads: usize,
    ) -> Result<Var, NnError> {
        let (w, s) = (self.value(weights), self.value(source));
        if src.len() != tgt.len()
            || w.rows() != src.len()
            || w.cols() != heads
            || heads == 0
            || s.cols() % heads != 0
        {
            return Err(NnError::shape("edge_aggregate", w.shape(), s.shape()));
        }
        let width = s.cols() / heads;
        let mut out = Matrix::zeros(targets, s.cols());
        for (e, (&i, &j)) in src.iter().zip(tgt.iter()).enumerate() {
            if i >= s.rows() || j >= targets {
                return Err(NnError::IndexOutOfRange {
                    index: i.max(j),
                    len: s.rows().min(targets),
                });
            }
            let srow = s.row(i);
            let orow = out.row_mut(j);
            for h in 0..heads {
                let we = w.get(e, h);
                for c in h * width..(h + 1) * width {
                    orow[c] += we * srow[c];
                }
            }
        }
        Ok(self.push(
            out,
            Op::EdgeAggregate {
                weights,
                source,
                src,
                tgt,
                heads,
            },
        ))
    }

    /// Row-wise, max-shifted softmax. `-inf` logits map to exactly 0.
    pub fn softmax(&mut self, a: Var) -> Result<Var, NnError> {
        let out = softmax_rows(self.value(a))?;
        Ok(self.push(out, Op::Softmax(a)))
    }

    /// Row-wise log-softmax. `-inf` logits stay `-inf` and get no gradient.
    pub fn log_softmax(&mut self, a: Var) -> Result<Var, NnError> {
        let x = self.value(a);
        let mut out = x.clone();
        for r in 0..x.rows() {
            let row = x.row(r);
            let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if m == f64::NEG_INFINITY {
                return Err(NnError::AllMasked);
            }
            let lse = m + row.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
            out.row_mut(r).iter_mut().for_each(|v| *v -= lse);
        }
        Ok(self.push(out, Op::LogSoftmax(a)))
    }

    /// Replaces entries flagged in `mask` (row-major) with `-inf`.
    pub fn mask_fill(&mut self, a: Var, mask: Rc<[bool]>) -> Result<Var, NnError> {
        let x = self.value(a);
        if mask.len() != x.len() {
            return Err(NnError::shape("mask_fill", x.shape(), (mask.len(), 1)));
        }
        let mut out = x.clone();
        for (v, &m) in out.data_mut().iter_mut().zip(mask.iter()) {
            if m {
                *v = f64::NEG_INFINITY;
            }
        }
        Ok(self.push(out, Op::MaskFill(a, mask)))
    }

    /// Same values in row-major order under a new shape.
    pub fn reshape(&mut self, a: Var, rows: usize, cols: usize) -> Result<Var, NnError> {
        let x = self.value(a);
        if x.len() != rows * cols {
            return Err(NnError::shape("reshape", x.shape(), (rows, cols)));
        }
        let out = x.clone().reshaped((rows, cols));
        Ok(self.push(out, Op::Reshape(a)))
    }

    /// Gradients of the scalar `output` with respect to every parameter.
    pub fn backward(&self, output: Var) -> Gradients {
        debug_assert_eq!(self.value(output).len(), 1);
        self.backward_seeded(&[(output, Matrix::scalar(1.0))])
    }

    /// Back-propagates explicit upstream gradients `(var, d loss / d var)`.
    pub fn backward_seeded(&self, seeds: &[(Var, Matrix)]) -> Gradients {
        let mut grads: Vec<Option<Matrix>> = Vec::with_capacity(self.nodes.len());
        grads.resize_with(self.nodes.len(), || None);
        for (v, g) in seeds {
            accumulate(&mut grads, *v, g.clone());
        }
        let mut out = Gradients::new(self.params.len());
        for idx in (0..self.nodes.len()).rev() {
            let Some(g) = grads[idx].take() else {
                continue;
            };
            self.propagate(idx, &g, &mut grads, &mut out);
        }
        out
    }

    fn propagate(
        &self,
        idx: usize,
        g: &Matrix,
        grads: &mut [Option<Matrix>],
        out: &mut Gradients,
    ) {
        let y = self.value(Var(idx));
        match &self.nodes[idx].op {
            Op::Leaf => {}
            Op::Param(id) => out.add(*id, g),
            Op::MatMul(a, b) => {
                let (av, bv) = (self.value(*a), self.value(*b));
                accumulate(grads, *a, g.matmul_bt(bv).expect("shape"));
                accumulate(grads, *b, av.matmul_at(g).expect("shape"));
            }
            Op::MatMulBt(a, b) => {
                let (av, bv) = (self.value(*a), self.value(*b));
                accumulate(grads, *a, g.matmul(bv).expect("shape"));
                accumulate(grads, *b, g.matmul_at(av).expect("shape"));
            }
            Op::Transpose(a) => accumulate(grads, *a, g.transpose()),
            Op::Add(a, b) => {
                accumulate(grads, *a, g.clone());
                accumulate(grads, *b, g.clone());
            }
            Op::AddRow(a, bias) => {
                let mut gb = Matrix::zeros(1, g.cols());
                for r in 0..g.rows() {
                    for (o, v) in gb.data_mut().iter_mut().zip(g.row(r)) {
                        *o += v;
                    }
                }
                accumulate(grads, *a, g.clone());
                accumulate(grads, *bias, gb);
            }
            Op::Mul(a, b) => {
                let (av, bv) = (self.value(*a), self.value(*b));
                let ga = zip_map(g, bv, |x, y| x * y);
                let gb = zip_map(g, av, |x, y| x * y);
                accumulate(grads, *a, ga);
                accumulate(grads, *b, gb);
            }
            Op::Scale(a, f) => accumulate(grads, *a, g.map(|v| v * f)),
            Op::ScaleRows(a, factors) => {
                let mut ga = g.clone();
                for (r, f) in factors.iter().enumerate() {
                    ga.row_mut(r).iter_mut().for_each(|v| *v *= f);
                }
                accumulate(grads, *a, ga);
            }
            Op::LeakyRelu(a, slope) => {
                let x = self.value(*a);
                let ga = zip_map(g, x, |gv, xv| if xv >= 0.0 { gv } else { gv * slope });
                accumulate(grads, *a, ga);
            }
            Op::ConcatCols(parts) => {
                let mut offset = 0;
                for &p in parts {
                    let w = self.value(p).cols();
                    let mut gp = Matrix::zeros(g.rows(), w);
                    for r in 0..g.rows() {
                        gp.row_mut(r).copy_from_slice(&g.row(r)[offset..offset + w]);
                    }
                    offset += w;
                    accumulate(grads, p, gp);
                }
            }
            Op::ConcatRows(parts) => {
                let mut offset = 0;
                for &p in parts {
                    let (rows, cols) = self.value(p).shape();
                    let data = g.data()[offset * cols..(offset + rows) * cols].to_vec();
                    offset += rows;
                    accumulate(grads, p, Matrix::from_vec(rows, cols, data).expect("shape"));
                }
            }
            Op::MeanRows(a) => {
                let rows = self.value(*a).rows();
                let n = rows as f64;
                let mut ga = Matrix::zeros(rows, g.cols());
                for r in 0..rows {
                    for (o, v) in ga.row_mut(r).iter_mut().zip(g.data()) {
                        *o = v / n;
                    }
                }
                accumulate(grads, *a, ga);
            }
            Op::Sum(a) => {
                let (r, c) = self.value(*a).shape();
                accumulate(grads, *a, Matrix::filled(r, c, g.item()));
            }
            Op::Dot(a, b) => {
                let gv = g.item();
                let (av, bv) = (self.value(*a), self.value(*b));
                accumulate(grads, *a, bv.map(|v| v * gv).reshaped(av.shape()));
                accumulate(grads, *b, av.map(|v| v * gv).reshaped(bv.shape()));
            }
            Op::Pick(a, r, c) => {
                let (rows, cols) = self.value(*a).shape();
                let mut ga = Matrix::zeros(rows, cols);
                ga.set(*r, *c, g.item());
                accumulate(grads, *a, ga);
            }
            Op::GatherRows(a, index) => {
                let (rows, cols) = self.value(*a).shape();
                let mut ga = Matrix::zeros(rows, cols);
                for (i, &r) in index.iter().enumerate() {
                    for (o, v) in ga.row_mut(r).iter_mut().zip(g.row(i)) {
                        *o += v;
                    }
                }
                accumulate(grads, *a, ga);
            }
            Op::HeadScores(x, attn, heads) => {
                let (xm, am) = (self.value(*x), self.value(*attn));
                let width = xm.cols() / heads;
                let mut gx = Matrix::zeros(xm.rows(), xm.cols());
                let mut ga = Matrix::zeros(1, am.cols());
                for n in 0..xm.rows() {
                    for h in 0..*heads {
                        let gs = g.get(n, h);
                        if gs == 0.0 {
                            continue;
                        }
                        for c in h * width..(h + 1) * width {
                            gx.data_mut()[n * xm.cols() + c] += gs * am.data()[c];
                            ga.data_mut()[c] += gs * xm.get(n, c);
                        }
                    }
                }
                accumulate(grads, *x, gx);
                accumulate(grads, *attn, ga);
            }
            Op::SegmentSoftmax(a, segment) => {
                let cols = y.cols();
                let groups = segment.iter().copied().max().map_or(0, |m| m + 1);
                let mut inner = vec![0.0; groups * cols];
                for (r, &s) in segment.iter().enumerate() {
                    for c in 0..cols {
                        inner[s * cols + c] += y.get(r, c) * g.get(r, c);
                    }
                }
                let mut ga = Matrix::zeros(y.rows(), cols);
                for (r, &s) in segment.iter().enumerate() {
                    for c in 0..cols {
                        ga.set(r, c, y.get(r, c) * (g.get(r, c) - inner[s * cols + c]));
                    }
                }
                accumulate(grads, *a, ga);
            }
            Op::EdgeAggregate {
                weights,
                source,
                src,
                tgt,
                heads,
            } => {
                let (w, s) = (self.value(*weights), self.value(*source));
                let width = s.cols() / heads;
                let mut gw = Matrix::zeros(w.rows(), w.cols());
                let mut gs = Matrix::zeros(s.rows(), s.cols());
                for (e, (&i, &j)) in src.iter().zip(tgt.iter()).enumerate() {
                    let grow = g.row(j);
                    let srow = s.row(i);
                    for h in 0..*heads {
                        let block = h * width..(h + 1) * width;
                        gw.set(e, h, dot_slices(&grow[block.clone()], &srow[block.clone()]));
                        let we = w.get(e, h);
                        let gsrow = gs.row_mut(i);
                        for c in block {
                            gsrow[c] += we * grow[c];
                        }
                    }
                }
                accumulate(grads, *weights, gw);
                accumulate(grads, *source, gs);
            }
            Op::Softmax(a) => {
                let mut ga = Matrix::zeros(y.rows(), y.cols());
                for r in 0..y.rows() {
                    let inner = dot_slices(y.row(r), g.row(r));
                    for c in 0..y.cols() {
                        ga.set(r, c, y.get(r, c) * (g.get(r, c) - inner));
                    }
                }
                accumulate(grads, *a, ga);
            }
            Op::LogSoftmax(a) => {
                let mut ga = Matrix::zeros(y.rows(), y.cols());
                for r in 0..y.rows() {
                    let live = |c: usize| y.get(r, c) != f64::NEG_INFINITY;
                    let total: f64 = (0..y.cols()).filter(|&c| live(c)).map(|c| g.get(r, c)).sum();
                    for c in (0..y.cols()).filter(|&c| live(c)) {
                        ga.set(r, c, g.get(r, c) - y.get(r, c).exp() * total);
                    }
                }
                accumulate(grads, *a, ga);
            }
            Op::MaskFill(a, mask) => {
                let mut ga = g.clone();
                for (v, &m) in ga.data_mut().iter_mut().zip(mask.iter()) {
                    if m {
                        *v = 0.0;
                    }
                }
                accumulate(grads, *a, ga);
            }
            Op::Reshape(a) => {
                let shape = self.value(*a).shape();
                accumulate(grads, *a, g.clone().reshaped(shape));
            }
        }
    }
}

#[inline]
pub fn leaky(x: f64, slope: f64) -> f64 {
    if x >= 0.0 {
        x
    } else {
        slope * x
    }
}

/// Row-wise stable softmax outside of any tape.
pub fn softmax_rows(x: &Matrix) -> Result<Matrix, NnError> {
    let mut out = x.clone();
    for r in 0..x.rows() {
        let row = out.row_mut(r);
        let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if m == f64::NEG_INFINITY {
            return Err(NnError::AllMasked);
        }
        let mut total = 0.0;
        for v in row.iter_mut() {
            *v = if *v == f64::NEG_INFINITY { 0.0 } else { (*v - m).exp() };
            total += *v;
        }
        row.iter_mut().for_each(|v| *v /= total);
    }
    Ok(out)
}

fn accumulate(grads: &mut [Option<Matrix>], v: Var, g: Matrix) {
    match &mut grads[v.0] {
        Some(acc) => acc.add_assign(&g),
        slot @ None => *slot = Some(g),
    }
}

fn zip_map(a: &Matrix, b: &Matrix, f: impl Fn(f64, f64) -> f64) -> Matrix {
    let data = a.data().iter().zip(b.data()).map(|(&x, &y)| f(x, y)).collect();
    Matrix::from_vec(a.rows(), a.cols(), data).expect("shape")
}

impl Matrix {
    fn reshaped(self, shape: (usize, usize)) -> Matrix {
        Matrix::from_vec(shape.0, shape.1, self.into_data()).expect("reshape")
    }
}
