use std::collections::HashMap;
use std::rc::Rc;

use super::tensor::{matmul, matmul_nt, matmul_tn};
use super::{AutodiffError, Gradients, ParamStore, Tensor};

/// Denominator floor for cosine similarity.
pub const COSINE_EPS: f64 = 1e-12;

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Param,
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    AddRow(Var, Var),
    MulCol(Var, Var),
    Scale(Var, f64),
    ConcatCols(Vec<Var>),
    ConcatRows(Vec<Var>),
    SliceCols(Var, usize),
    Reshape(Var),
    GatherRows(Var, Rc<Vec<usize>>),
    SegmentSum(Var, Rc<Vec<usize>>),
    SegmentSoftmax(Var, Rc<Vec<usize>>),
    RowSoftmax(Var),
    LeakyRelu(Var, f64),
    Tanh(Var),
    Sigmoid(Var),
    Softplus(Var),
    Log(Var),
    Exp(Var),
    SumRows(Var),
    MeanRows(Var),
    SumCols(Var),
    SumAll(Var),
    Cosine(Var, Var),
}

/// Reverse-mode tape. Values are recorded eagerly; `backward` walks the
/// records in reverse.
#[derive(Debug, Default)]
pub struct Tape {
    values: Vec<Tensor>,
    ops: Vec<Op>,
    params: HashMap<usize, Var>,
}

fn mismatch(op: &'static str, a: &Tensor, b: &Tensor) -> AutodiffError {
    AutodiffError::ShapeMismatch { op, left: a.shape(), right: b.shape() }
}

fn stable_softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.values[v.0]
    }

    fn push(&mut self, op: Op, value: Tensor, name: &'static str) -> Result<Var, AutodiffError> {
        if !value.all_finite() {
            return Err(AutodiffError::NonFiniteValue { op: name });
        }
        self.values.push(value);
        self.ops.push(op);
        Ok(Var(self.values.len() - 1))
    }

    pub fn constant(&mut self, t: Tensor) -> Result<Var, AutodiffError> {
        self.push(Op::Leaf, t, "constant")
    }

    /// Leaf for parameter `id`; repeated calls on one tape share the leaf.
    pub fn param(&mut self, store: &ParamStore, id: usize) -> Var {
        if let Some(&v) = self.params.get(&id) {
            return v;
        }
        self.values.push(store.get(id).value.clone());
        self.ops.push(Op::Param);
        let v = Var(self.values.len() - 1);
        self.params.insert(id, v);
        v
    }

    pub fn param_named(&mut self, store: &ParamStore, name: &str) -> Var {
        let id = store.id(name).unwrap_or_else(|| panic!("no parameter `{name}`"));
        self.param(store, id)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, AutodiffError> {
        let out = matmul(self.value(a), self.value(b))?;
        self.push(Op::MatMul(a, b), out, "matmul")
    }

    fn zip(&mut self, a: Var, b: Var, op: Op, name: &'static str, f: impl Fn(f64, f64) -> f64) -> Result<Var, AutodiffError> {
        let (x, y) = (self.value(a), self.value(b));
        if x.shape() != y.shape() {
            return Err(mismatch(name, x, y));
        }
        let data = x.data.iter().zip(&y.data).map(|(&p, &q)| f(p, q)).collect();
        let out = Tensor { rows: x.rows, cols: x.cols, data };
        self.push(op, out, name)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, AutodiffError> {
        self.zip(a, b, Op::Add(a, b), "add", |p, q| p + q)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var, AutodiffError> {
        self.zip(a, b, Op::Sub(a, b), "sub", |p, q| p - q)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, AutodiffError> {
        self.zip(a, b, Op::Mul(a, b), "mul", |p, q| p * q)
    }

    /// `a + row` with a `1 x c` row broadcast over every row of `a`.
    pub fn add_row(&mut self, a: Var, row: Var) -> Result<Var, AutodiffError> {
        let (x, r) = (self.value(a), self.value(row));
        if r.rows != 1 || r.cols != x.cols {
            return Err(mismatch("add_row", x, r));
        }
        let mut out = x.clone();
        for i in 0..out.rows {
            for (o, &y) in out.row_mut(i).iter_mut().zip(&r.data) {
                *o += y;
            }
        }
        self.push(Op::AddRow(a, row), out, "add_row")
    }

    /// `a` with row `i` scaled by `col[i]` (`col` is `r x 1`).
    pub fn mul_col(&mut self, a: Var, col: Var) -> Result<Var, AutodiffError> {
        let (x, c) = (self.value(a), self.value(col));
        if c.cols != 1 || c.rows != x.rows {
            return Err(mismatch("mul_col", x, c));
        }
        let mut out = x.clone();
        for i in 0..out.rows {
            let s = c.data[i];
            out.row_mut(i).iter_mut().for_each(|o| *o *= s);
        }
        self.push(Op::MulCol(a, col), out, "mul_col")
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Result<Var, AutodiffError> {
        let out = self.value(a).map(|x| x * s);
        self.push(Op::Scale(a, s), out, "scale")
    }

    /// `x W + b`.
    pub fn linear(&mut self, x: Var, w: Var, b: Var) -> Result<Var, AutodiffError> {
        let xw = self.matmul(x, w)?;
        self.add_row(xw, b)
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var, AutodiffError> {
        let rows = self.value(parts[0]).rows;
        let cols: usize = parts.iter().map(|&p| self.value(p).cols).sum();
        let mut out = Tensor::zeros(rows, cols);
        let mut offset = 0;
        for &p in parts {
            let t = self.value(p);
            if t.rows != rows {
                return Err(mismatch("concat_cols", self.value(parts[0]), t));
            }
            for i in 0..rows {
                out.data[i * cols + offset..i * cols + offset + t.cols].copy_from_slice(t.row(i));
            }
            offset += t.cols;
        }
        self.push(Op::ConcatCols(parts.to_vec()), out, "concat_cols")
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var, AutodiffError> {
        let cols = self.value(parts[0]).cols;
        let mut data = Vec::new();
        let mut rows = 0;
        for &p in parts {
            let t = self.value(p);
            if t.cols != cols && !t.is_empty() {
                return Err(mismatch("concat_rows", self.value(parts[0]), t));
            }
            data.extend_from_slice(&t.data);
            rows += t.rows;
        }
        self.push(Op::ConcatRows(parts.to_vec()), Tensor { rows, cols, data }, "concat_rows")
    }

    /// Columns `start..end`.
    pub fn slice_cols(&mut self, a: Var, start: usize, end: usize) -> Result<Var, AutodiffError> {
        let x = self.value(a);
        if start > end || end > x.cols {
            return Err(AutodiffError::ShapeMismatch { op: "slice_cols", left: x.shape(), right: (start, end) });
        }
        let w = end - start;
        let mut out = Tensor::zeros(x.rows, w);
        for i in 0..x.rows {
            out.row_mut(i).copy_from_slice(&x.row(i)[start..end]);
        }
        self.push(Op::SliceCols(a, start), out, "slice_cols")
    }

    /// Reinterpret the row-major data with a new shape.
    pub fn reshape(&mut self, a: Var, rows: usize, cols: usize) -> Result<Var, AutodiffError> {
        let x = self.value(a);
        if x.len() != rows * cols {
            return Err(AutodiffError::ShapeMismatch { op: "reshape", left: x.shape(), right: (rows, cols) });
        }
        let out = Tensor { rows, cols, data: x.data.clone() };
        self.push(Op::Reshape(a), out, "reshape")
    }

    pub fn gather_rows(&mut self, a: Var, idx: Rc<Vec<usize>>) -> Result<Var, AutodiffError> {
        let x = self.value(a);
        if let Some(&bad) = idx.iter().find(|&&i| i >= x.rows) {
            return Err(AutodiffError::ShapeMismatch { op: "gather_rows", left: x.shape(), right: (bad, 0) });
        }
        let mut out = Tensor::zeros(idx.len(), x.cols);
        for (o, &i) in idx.iter().enumerate() {
            out.row_mut(o).copy_from_slice(x.row(i));
        }
        self.push(Op::GatherRows(a, idx), out, "gather_rows")
    }

    /// Row `s` of the result sums the rows `i` of `a` with `seg[i] == s`.
    pub fn segment_sum(&mut self, a: Var, seg: Rc<Vec<usize>>, segments: usize) -> Result<Var, AutodiffError> {
        let x = self.value(a);
        if seg.len() != x.rows || seg.iter().any(|&s| s >= segments) {
            return Err(AutodiffError::ShapeMismatch { op: "segment_sum", left: x.shape(), right: (seg.len(), segments) });
        }
        let mut out = Tensor::zeros(segments, x.cols);
        for (i, &s) in seg.iter().enumerate() {
            for (o, &y) in out.row_mut(s).iter_mut().zip(x.row(i)) {
                *o += y;
            }
        }
        self.push(Op::SegmentSum(a, seg), out, "segment_sum")
    }

    /// Softmax over rows sharing a segment id, independently per column.
    pub fn segment_softmax(&mut self, a: Var, seg: Rc<Vec<usize>>, segments: usize) -> Result<Var, AutodiffError> {
        let x = self.value(a);
        if seg.len() != x.rows || seg.iter().any(|&s| s >= segments) {
            return Err(AutodiffError::ShapeMismatch { op: "segment_softmax", left: x.shape(), right: (seg.len(), segments) });
        }
        let c = x.cols;
        let mut max = vec![f64::NEG_INFINITY; segments * c];
        for (i, &s) in seg.iter().enumerate() {
            for j in 0..c {
                max[s * c + j] = max[s * c + j].max(x.data[i * c + j]);
            }
        }
        let mut out = Tensor::zeros(x.rows, c);
        let mut sum = vec![0.0; segments * c];
        for (i, &s) in seg.iter().enumerate() {
            for j in 0..c {
                let e = (x.data[i * c + j] - max[s * c + j]).exp();
                out.data[i * c + j] = e;
                sum[s * c + j] += e;
            }
        }
        for (i, &s) in seg.iter().enumerate() {
            for j in 0..c {
                out.data[i * c + j] /= sum[s * c + j];
            }
        }
        self.push(Op::SegmentSoftmax(a, seg), out, "segment_softmax")
    }

    pub fn row_softmax(&mut self, a: Var) -> Result<Var, AutodiffError> {
        let x = self.value(a);
        let mut out = x.clone();
        for i in 0..out.rows {
            let row = out.row_mut(i);
            let m = row.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v));
            let mut s = 0.0;
            for v in row.iter_mut() {
                *v = (*v - m).exp();
                s += *v;
            }
            row.iter_mut().for_each(|v| *v /= s);
        }
        self.push(Op::RowSoftmax(a), out, "row_softmax")
    }

    pub fn leaky_relu(&mut self, a: Var, slope: f64) -> Result<Var, AutodiffError> {
        let out = self.value(a).map(|x| if x > 0.0 { x } else { slope * x });
        self.push(Op::LeakyRelu(a, slope), out, "leaky_relu")
    }

    pub fn tanh(&mut self, a: Var) -> Result<Var, AutodiffError> {
        let out = self.value(a).map(f64::tanh);
        self.push(Op::Tanh(a), out, "tanh")
    }

    pub fn sigmoid(&mut self, a: Var) -> Result<Var, AutodiffError> {
        let out = self.value(a).map(sigmoid);
        self.push(Op::Sigmoid(a), out, "sigmoid")
    }

    /// `ln(1 + e^x)`, evaluated without overflow.
    pub fn softplus(&mut self, a: Var) -> Result<Var, AutodiffError> {
        let out = self.value(a).map(stable_softplus);
        self.push(Op::Softplus(a), out, "softplus")
    }

    pub fn log(&mut self, a: Var) -> Result<Var, AutodiffError> {
        let out = self.value(a).map(f64::ln);
        self.push(Op::Log(a), out, "log")
    }

    pub fn exp(&mut self, a: Var) -> Result<Var, AutodiffError> {
        let out = self.value(a).map(f64::exp);
        self.push(Op::Exp(a), out, "exp")
    }

    /// Column sums as a `1 x c` row.
    pub fn sum_rows(&mut self, a: Var) -> Result<Var, AutodiffError> {
        let x = self.value(a);
        let mut out = Tensor::zeros(1, x.cols);
        for i in 0..x.rows {
            for (o, &y) in out.data.iter_mut().zip(x.row(i)) {
                *o += y;
            }
        }
        self.push(Op::SumRows(a), out, "sum_rows")
    }

    pub fn mean_rows(&mut self, a: Var) -> Result<Var, AutodiffError> {
        let x = self.value(a);
        if x.rows == 0 {
            return Err(AutodiffError::ShapeMismatch { op: "mean_rows", left: x.shape(), right: (1, x.cols) });
        }
        let n = x.rows as f64;
        let mut out = Tensor::zeros(1, x.cols);
        for i in 0..x.rows {
            for (o, &y) in out.data.iter_mut().zip(x.row(i)) {
                *o += y;
            }
        }
        out.data.iter_mut().for_each(|o| *o /= n);
        self.push(Op::MeanRows(a), out, "mean_rows")
    }

    /// Row sums as an `r x 1` column.
    pub fn sum_cols(&mut self, a: Var) -> Result<Var, AutodiffError> {
        let x = self.value(a);
        let data = (0..x.rows).map(|i| x.row(i).iter().sum()).collect();
        self.push(Op::SumCols(a), Tensor { rows: x.rows, cols: 1, data }, "sum_cols")
    }

    pub fn sum_all(&mut self, a: Var) -> Result<Var, AutodiffError> {
        let s = self.value(a).data.iter().sum();
        self.push(Op::SumAll(a), Tensor::scalar(s), "sum_all")
    }

    /// Pairwise cosine similarities between the rows of `a` and of `b`,
    /// with the norm product floored at [`COSINE_EPS`].
    pub fn cosine(&mut self, a: Var, b: Var) -> Result<Var, AutodiffError> {
        let (x, y) = (self.value(a), self.value(b));
        if x.cols != y.cols {
            return Err(mismatch("cosine", x, y));
        }
        let nx: Vec<f64> = (0..x.rows).map(|i| x.row(i).iter().map(|v| v * v).sum::<f64>().sqrt()).collect();
        let ny: Vec<f64> = (0..y.rows).map(|j| y.row(j).iter().map(|v| v * v).sum::<f64>().sqrt()).collect();
        let mut out = matmul_nt(x, y);
        for i in 0..x.rows {
            for j in 0..y.rows {
                out.data[i * y.rows + j] /= (nx[i] * ny[j]).max(COSINE_EPS);
            }
        }
        self.push(Op::Cosine(a, b), out, "cosine")
    }

    /// Gradients of scalar `root` with respect to every recorded value.
    pub fn backward(&self, root: Var) -> Result<VarGrads, AutodiffError> {
        let r = self.value(root);
        if r.shape() != (1, 1) {
            return Err(AutodiffError::NonScalarRoot { shape: r.shape() });
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; root.0 + 1];
        grads[root.0] = Some(Tensor::scalar(1.0));
        for i in (0..=root.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            self.propagate(i, &g, &mut grads);
            grads[i] = Some(g);
        }
        Ok(VarGrads { grads })
    }

    /// Run `backward` and add parameter gradients into `into`.
    pub fn backward_into(&self, root: Var, into: &mut Gradients) -> Result<(), AutodiffError> {
        let g = self.backward(root)?;
        for (&pid, &v) in &self.params {
            if let Some(t) = g.get(v) {
                into.accumulate(pid, t)?;
            }
        }
        Ok(())
    }

    fn propagate(&self, i: usize, g: &Tensor, grads: &mut [Option<Tensor>]) {
        let val = &self.values[i];
        let acc = |grads: &mut [Option<Tensor>], v: Var, t: Tensor| match &mut grads[v.0] {
            Some(e) => e.add_assign(&t),
            slot => *slot = Some(t),
        };
        match &self.ops[i] {
            Op::Leaf | Op::Param => {}
            Op::MatMul(a, b) => {
                let (x, y) = (self.value(*a), self.value(*b));
                acc(grads, *a, matmul_nt(g, y));
                acc(grads, *b, matmul_tn(x, g));
            }
            Op::Add(a, b) => {
                acc(grads, *a, g.clone());
                acc(grads, *b, g.clone());
            }
            Op::Sub(a, b) => {
                acc(grads, *a, g.clone());
                acc(grads, *b, g.map(|x| -x));
            }
            Op::Mul(a, b) => {
                let (x, y) = (self.value(*a), self.value(*b));
                let ga = Tensor { rows: g.rows, cols: g.cols, data: g.data.iter().zip(&y.data).map(|(p, q)| p * q).collect() };
                let gb = Tensor { rows: g.rows, cols: g.cols, data: g.data.iter().zip(&x.data).map(|(p, q)| p * q).collect() };
                acc(grads, *a, ga);
                acc(grads, *b, gb);
            }
            Op::AddRow(a, row) => {
                acc(grads, *a, g.clone());
                let mut gr = Tensor::zeros(1, g.cols);
                for r in 0..g.rows {
                    gr.add_assign(&Tensor::row_vector(g.row(r)));
                }
                acc(grads, *row, gr);
            }
            Op::MulCol(a, col) => {
                let (x, c) = (self.value(*a), self.value(*col));
                let mut ga = g.clone();
                let mut gc = Tensor::zeros(c.rows, 1);
                for r in 0..g.rows {
                    ga.row_mut(r).iter_mut().for_each(|v| *v *= c.data[r]);
                    gc.data[r] = g.row(r).iter().zip(x.row(r)).map(|(p, q)| p * q).sum();
                }
                acc(grads, *a, ga);
                acc(grads, *col, gc);
            }
            Op::Scale(a, s) => acc(grads, *a, g.map(|x| x * s)),
            Op::ConcatCols(parts) => {
                let mut offset = 0;
                for &p in parts {
                    let w = self.value(p).cols;
                    let mut gp = Tensor::zeros(g.rows, w);
                    for r in 0..g.rows {
                        gp.row_mut(r).copy_from_slice(&g.row(r)[offset..offset + w]);
                    }
                    offset += w;
                    acc(grads, p, gp);
                }
            }
            Op::ConcatRows(parts) => {
                let mut offset = 0;
                for &p in parts {
                    let t = self.value(p);
                    let n = t.len();
                    acc(grads, p, Tensor { rows: t.rows, cols: t.cols, data: g.data[offset..offset + n].to_vec() });
                    offset += n;
                }
            }
            Op::SliceCols(a, start) => {
                let x = self.value(*a);
                let mut ga = Tensor::zeros(x.rows, x.cols);
                for r in 0..x.rows {
                    ga.row_mut(r)[*start..*start + g.cols].copy_from_slice(g.row(r));
                }
                acc(grads, *a, ga);
            }
            Op::Reshape(a) => {
                let x = self.value(*a);
                acc(grads, *a, Tensor { rows: x.rows, cols: x.cols, data: g.data.clone() });
            }
            Op::GatherRows(a, idx) => {
                let x = self.value(*a);
                let mut ga = Tensor::zeros(x.rows, x.cols);
                for (o, &r) in idx.iter().enumerate() {
                    for (d, &s) in ga.row_mut(r).iter_mut().zip(g.row(o)) {
                        *d += s;
                    }
                }
                acc(grads, *a, ga);
            }
            Op::SegmentSum(a, seg) => {
                let x = self.value(*a);
                let mut ga = Tensor::zeros(x.rows, x.cols);
                for (r, &s) in seg.iter().enumerate() {
                    ga.row_mut(r).copy_from_slice(g.row(s));
                }
                acc(grads, *a, ga);
            }
            Op::SegmentSoftmax(a, seg) => {
                let c = val.cols;
                let segments = seg.iter().max().map_or(0, |m| m + 1);
                let mut dot = vec![0.0; segments * c];
                for (r, &s) in seg.iter().enumerate() {
                    for j in 0..c {
                        dot[s * c + j] += val.data[r * c + j] * g.data[r * c + j];
                    }
                }
                let mut ga = Tensor::zeros(val.rows, c);
                for (r, &s) in seg.iter().enumerate() {
                    for j in 0..c {
                        ga.data[r * c + j] = val.data[r * c + j] * (g.data[r * c + j] - dot[s * c + j]);
                    }
                }
                acc(grads, *a, ga);
            }
            Op::RowSoftmax(a) => {
                let mut ga = Tensor::zeros(val.rows, val.cols);
                for r in 0..val.rows {
                    let y = val.row(r);
                    let gr = g.row(r);
                    let dot: f64 = y.iter().zip(gr).map(|(p, q)| p * q).sum();
                    for (k, d) in ga.row_mut(r).iter_mut().enumerate() {
                        *d = y[k] * (gr[k] - dot);
                    }
                }
                acc(grads, *a, ga);
            }
            Op::LeakyRelu(a, slope) => {
                let x = self.value(*a);
                let data = g.data.iter().zip(&x.data).map(|(&d, &v)| if v > 0.0 { d } else { slope * d }).collect();
                acc(grads, *a, Tensor { rows: x.rows, cols: x.cols, data });
            }
            Op::Tanh(a) => {
                let data = g.data.iter().zip(&val.data).map(|(&d, &y)| d * (1.0 - y * y)).collect();
                acc(grads, *a, Tensor { rows: val.rows, cols: val.cols, data });
            }
            Op::Sigmoid(a) => {
                let data = g.data.iter().zip(&val.data).map(|(&d, &y)| d * y * (1.0 - y)).collect();
                acc(grads, *a, Tensor { rows: val.rows, cols: val.cols, data });
            }
            Op::Softplus(a) => {
                let x = self.value(*a);
                let data = g.data.iter().zip(&x.data).map(|(&d, &v)| d * sigmoid(v)).collect();
                acc(grads, *a, Tensor { rows: x.rows, cols: x.cols, data });
            }
            Op::Log(a) => {
                let x = self.value(*a);
                let data = g.data.iter().zip(&x.data).map(|(&d, &v)| d / v).collect();
                acc(grads, *a, Tensor { rows: x.rows, cols: x.cols, data });
            }
            Op::Exp(a) => {
                let data = g.data.iter().zip(&val.data).map(|(&d, &y)| d * y).collect();
                acc(grads, *a, Tensor { rows: val.rows, cols: val.cols, data });
            }
            Op::SumRows(a) => {
                let x = self.value(*a);
                let mut ga = Tensor::zeros(x.rows, x.cols);
                for r in 0..x.rows {
                    ga.row_mut(r).copy_from_slice(&g.data);
                }
                acc(grads, *a, ga);
            }
            Op::MeanRows(a) => {
                let x = self.value(*a);
                let n = x.rows as f64;
                let mut ga = Tensor::zeros(x.rows, x.cols);
                for r in 0..x.rows {
                    for (d, &s) in ga.row_mut(r).iter_mut().zip(&g.data) {
                        *d = s / n;
                    }
                }
                acc(grads, *a, ga);
            }
            Op::SumCols(a) => {
                let x = self.value(*a);
                let mut ga = Tensor::zeros(x.rows, x.cols);
                for r in 0..x.rows {
                    ga.row_mut(r).iter_mut().for_each(|d| *d = g.data[r]);
                }
                acc(grads, *a, ga);
            }
            Op::SumAll(a) => {
                let x = self.value(*a);
                acc(grads, *a, Tensor::filled(x.rows, x.cols, g.data[0]));
            }
            Op::Cosine(a, b) => {
                let (x, y) = (self.value(*a), self.value(*b));
                let nx: Vec<f64> = (0..x.rows).map(|i| x.row(i).iter().map(|v| v * v).sum::<f64>().sqrt()).collect();
                let ny: Vec<f64> = (0..y.rows).map(|j| y.row(j).iter().map(|v| v * v).sum::<f64>().sqrt()).collect();
                let mut ga = Tensor::zeros(x.rows, x.cols);
                let mut gb = Tensor::zeros(y.rows, y.cols);
                let d = x.cols;
                for i in 0..x.rows {
                    for j in 0..y.rows {
                        let gij = g.data[i * y.rows + j];
                        if gij == 0.0 {
                            continue;
                        }
                        let denom = nx[i] * ny[j];
                        let c = val.data[i * y.rows + j];
                        let (xi, yj) = (x.row(i), y.row(j));
                        if denom > COSINE_EPS {
                            for k in 0..d {
                                ga.data[i * d + k] += gij * (yj[k] / denom - c * xi[k] / (nx[i] * nx[i]));
                                gb.data[j * d + k] += gij * (xi[k] / denom - c * yj[k] / (ny[j] * ny[j]));
                            }
                        } else {
                            for k in 0..d {
                                ga.data[i * d + k] += gij * yj[k] / COSINE_EPS;
                                gb.data[j * d + k] += gij * xi[k] / COSINE_EPS;
                            }
                        }
                    }
                }
                acc(grads, *a, ga);
                acc(grads, *b, gb);
            }
        }
    }
}

/// Per-value gradients from one backward pass.
#[derive(Debug, Clone)]
pub struct VarGrads {
    grads: Vec<Option<Tensor>>,
}

impl VarGrads {
    pub fn get(&self, v: Var) -> Option<&Tensor> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }
}
