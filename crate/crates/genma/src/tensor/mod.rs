//! Dense 64-bit float tensors with reverse-mode automatic differentiation.
//!
//! A [`Tensor`] is a row-major buffer of `f64` plus an optional gradient
//! buffer of the same shape. Operations are methods on a [`Tape`]; each call
//! computes the forward value eagerly and records a backward closure. Calling
//! [`Tape::backward`] on a scalar result replays the recorded operations in
//! reverse and accumulates gradients into every tensor reachable from the
//! root. Repeated backward calls accumulate additively until
//! [`Tensor::clear_grad`] is called.
//!
//! The operation set is deliberately small — exactly what the layers in this
//! crate compose — so that every backward rule can be audited and checked
//! against central finite differences (see [`grad_check`]).
//!
//! Broadcasting is restricted to one documented pattern: adding a bias vector
//! over the rows of a matrix ([`Tape::add_bias_rows`]). Everything else
//! requires exact shape agreement. All reductions run in a fixed sequential
//! order, so forward values are bit-deterministic for fixed inputs.

mod check;
mod tape;

pub use check::{grad_check, GradCheckReport};
pub use tape::Tape;

use std::cell::{Ref, RefCell, RefMut};
use std::fmt;
use std::rc::Rc;
use std::sync::atomic::{AtomicU64, Ordering};

use crate::error::{Error, Result};

static NEXT_ID: AtomicU64 = AtomicU64::new(0);

struct Inner {
    id: u64,
    shape: Vec<usize>,
    data: RefCell<Vec<f64>>,
    grad: RefCell<Option<Vec<f64>>>,
}

/// Dense n-dimensional array of `f64` with an optional gradient buffer.
///
/// Cloning a `Tensor` is cheap and yields a handle to the same storage; this
/// is how recorded operations keep their inputs alive until backward runs.
#[derive(Clone)]
pub struct Tensor {
    inner: Rc<Inner>,
}

impl Tensor {
    /// Creates a tensor from a shape and row-major data.
    ///
    /// Errors if `data.len()` does not equal the product of `shape`.
    pub fn new(shape: &[usize], data: Vec<f64>) -> Result<Tensor> {
        let numel: usize = shape.iter().product();
        if data.len() != numel {
            return Err(Error::Shape(format!(
                "tensor data length {} does not match shape {:?} (expects {})",
                data.len(),
                shape,
                numel
            )));
        }
        Ok(Tensor::from_parts(shape.to_vec(), data))
    }

    /// Creates an `r × c` matrix from row-major data.
    pub fn matrix(rows: usize, cols: usize, data: Vec<f64>) -> Result<Tensor> {
        Tensor::new(&[rows, cols], data)
    }

    /// Creates a tensor filled with zeros.
    pub fn zeros(shape: &[usize]) -> Tensor {
        let numel = shape.iter().product();
        Tensor::from_parts(shape.to_vec(), vec![0.0; numel])
    }

    /// Creates a rank-0 (scalar) tensor.
    pub fn scalar(value: f64) -> Tensor {
        Tensor::from_parts(Vec::new(), vec![value])
    }

    fn from_parts(shape: Vec<usize>, data: Vec<f64>) -> Tensor {
        Tensor {
            inner: Rc::new(Inner {
                id: NEXT_ID.fetch_add(1, Ordering::Relaxed),
                shape,
                data: RefCell::new(data),
                grad: RefCell::new(None),
            }),
        }
    }

    pub(crate) fn id(&self) -> u64 {
        self.inner.id
    }

    pub fn shape(&self) -> &[usize] {
        &self.inner.shape
    }

    /// Number of elements (product of the shape; 1 for scalars).
    pub fn numel(&self) -> usize {
        self.inner.shape.iter().product()
    }

    /// True when the tensor holds exactly one element.
    pub fn is_scalar(&self) -> bool {
        self.numel() == 1
    }

    /// Borrows the forward values.
    pub fn data(&self) -> Ref<'_, Vec<f64>> {
        self.inner.data.borrow()
    }

    /// Mutably borrows the forward values (used by optimizer updates; never
    /// call between the forward and backward pass of the same tape).
    pub fn data_mut(&self) -> RefMut<'_, Vec<f64>> {
        self.inner.data.borrow_mut()
    }

    /// The single value of a scalar tensor.
    ///
    /// Panics if the tensor is not scalar; callers check `is_scalar` first.
    pub fn item(&self) -> f64 {
        assert!(self.is_scalar(), "item() called on non-scalar tensor");
        self.inner.data.borrow()[0]
    }

    /// Returns a copy of the accumulated gradient, if any backward pass has
    /// reached this tensor since the last [`clear_grad`](Tensor::clear_grad).
    pub fn grad(&self) -> Option<Vec<f64>> {
        self.inner.grad.borrow().clone()
    }

    /// Drops any accumulated gradient.
    pub fn clear_grad(&self) {
        *self.inner.grad.borrow_mut() = None;
    }

    /// Adds `delta` into the gradient buffer, allocating zeros on first use.
    pub(crate) fn accumulate_grad(&self, delta: &[f64]) {
        debug_assert_eq!(delta.len(), self.numel());
        let mut slot = self.inner.grad.borrow_mut();
        let grad = slot.get_or_insert_with(|| vec![0.0; delta.len()]);
        for (g, d) in grad.iter_mut().zip(delta) {
            *g += d;
        }
    }
}

impl fmt::Debug for Tensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Tensor")
            .field("id", &self.inner.id)
            .field("shape", &self.inner.shape)
            .field("data", &self.inner.data.borrow())
            .finish()
    }
}

/// Checks that two tensors have identical shapes, for elementwise binary ops.
fn require_same_shape(op: &str, a: &Tensor, b: &Tensor) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::Shape(format!(
            "{}: shapes {:?} and {:?} differ",
            op,
            a.shape(),
            b.shape()
        )));
    }
    Ok(())
}

/// Checks that a tensor is a matrix and returns (rows, cols).
fn require_matrix(op: &str, t: &Tensor) -> Result<(usize, usize)> {
    match t.shape() {
        [r, c] => Ok((*r, *c)),
        other => Err(Error::Shape(format!(
            "{}: expected a rank-2 tensor, got shape {:?}",
            op, other
        ))),
    }
}

impl Tape {
    /// Elementwise sum of two equally shaped tensors.
    pub fn add(&self, a: &Tensor, b: &Tensor) -> Result<Tensor> {
        require_same_shape("add", a, b)?;
        let out = {
            let (da, db) = (a.data(), b.data());
            let data = da.iter().zip(db.iter()).map(|(x, y)| x + y).collect();
            Tensor::from_parts(a.shape().to_vec(), data)
        };
        let (a, b) = (a.clone(), b.clone());
        self.record(out.clone(), move |bar, adj| {
            adj.accumulate(&a, bar);
            adj.accumulate(&b, bar);
        });
        Ok(out)
    }

    /// Elementwise difference `a − b` of two equally shaped tensors.
    pub fn sub(&self, a: &Tensor, b: &Tensor) -> Result<Tensor> {
        require_same_shape("sub", a, b)?;
        let out = {
            let (da, db) = (a.data(), b.data());
            let data = da.iter().zip(db.iter()).map(|(x, y)| x - y).collect();
            Tensor::from_parts(a.shape().to_vec(), data)
        };
        let (a, b) = (a.clone(), b.clone());
        self.record(out.clone(), move |bar, adj| {
            adj.accumulate(&a, bar);
            let buf = adj.buffer_mut(&b);
            for (g, d) in buf.iter_mut().zip(bar) {
                *g -= d;
            }
        });
        Ok(out)
    }

    /// Elementwise (Hadamard) product of two equally shaped tensors.
    pub fn hadamard(&self, a: &Tensor, b: &Tensor) -> Result<Tensor> {
        require_same_shape("hadamard", a, b)?;
        let out = {
            let (da, db) = (a.data(), b.data());
            let data = da.iter().zip(db.iter()).map(|(x, y)| x * y).collect();
            Tensor::from_parts(a.shape().to_vec(), data)
        };
        let (a, b) = (a.clone(), b.clone());
        self.record(out.clone(), move |bar, adj| {
            {
                let db = b.data();
                let buf = adj.buffer_mut(&a);
                for i in 0..bar.len() {
                    buf[i] += bar[i] * db[i];
                }
            }
            let da = a.data();
            let buf = adj.buffer_mut(&b);
            for i in 0..bar.len() {
                buf[i] += bar[i] * da[i];
            }
        });
        Ok(out)
    }

    /// Logistic sigmoid, elementwise. Backward uses `s·(1−s)`.
    pub fn sigmoid(&self, x: &Tensor) -> Result<Tensor> {
        let data = x.data().iter().map(|&v| 1.0 / (1.0 + (-v).exp())).collect();
        let out = Tensor::from_parts(x.shape().to_vec(), data);
        let (x, y) = (x.clone(), out.clone());
        self.record(out.clone(), move |bar, adj| {
            let s = y.data();
            let buf = adj.buffer_mut(&x);
            for i in 0..bar.len() {
                buf[i] += bar[i] * s[i] * (1.0 - s[i]);
            }
        });
        Ok(out)
    }

    /// Hyperbolic tangent, elementwise. Backward uses `1−tanh²`.
    pub fn tanh(&self, x: &Tensor) -> Result<Tensor> {
        let data = x.data().iter().map(|&v| v.tanh()).collect();
        let out = Tensor::from_parts(x.shape().to_vec(), data);
        let (x, y) = (x.clone(), out.clone());
        self.record(out.clone(), move |bar, adj| {
            let t = y.data();
            let buf = adj.buffer_mut(&x);
            for i in 0..bar.len() {
                buf[i] += bar[i] * (1.0 - t[i] * t[i]);
            }
        });
        Ok(out)
    }

    /// Rectified linear unit, elementwise. The subgradient at 0 is 0.
    pub fn relu(&self, x: &Tensor) -> Result<Tensor> {
        let data = x.data().iter().map(|&v| v.max(0.0)).collect();
        let out = Tensor::from_parts(x.shape().to_vec(), data);
        let xc = x.clone();
        self.record(out.clone(), move |bar, adj| {
            let dx = xc.data();
            let buf = adj.buffer_mut(&xc);
            for i in 0..bar.len() {
                if dx[i] > 0.0 {
                    buf[i] += bar[i];
                }
            }
        });
        Ok(out)
    }

    /// Matrix product of `a: [m×k]` and `b: [k×p]`.
    ///
    /// Backward accumulates `dA += Ḡ·Bᵀ` and `dB += Aᵀ·Ḡ`.
    pub fn matmul(&self, a: &Tensor, b: &Tensor) -> Result<Tensor> {
        let (m, k) = require_matrix("matmul", a)?;
        let (k2, p) = require_matrix("matmul", b)?;
        if k != k2 {
            return Err(Error::Shape(format!(
                "matmul: inner dimensions disagree for shapes {:?} × {:?}",
                a.shape(),
                b.shape()
            )));
        }
        let mut data = vec![0.0; m * p];
        {
            let (da, db) = (a.data(), b.data());
            for i in 0..m {
                for l in 0..k {
                    let av = da[i * k + l];
                    let brow = &db[l * p..(l + 1) * p];
                    let crow = &mut data[i * p..(i + 1) * p];
                    for j in 0..p {
                        crow[j] += av * brow[j];
                    }
                }
            }
        }
        let out = Tensor::from_parts(vec![m, p], data);
        let (a, b) = (a.clone(), b.clone());
        self.record(out.clone(), move |bar, adj| {
            {
                let db = b.data();
                let buf = adj.buffer_mut(&a);
                for i in 0..m {
                    for l in 0..k {
                        let mut acc = 0.0;
                        let grow = &bar[i * p..(i + 1) * p];
                        let brow = &db[l * p..(l + 1) * p];
                        for j in 0..p {
                            acc += grow[j] * brow[j];
                        }
                        buf[i * k + l] += acc;
                    }
                }
            }
            let da = a.data();
            let buf = adj.buffer_mut(&b);
            for i in 0..m {
                let grow = &bar[i * p..(i + 1) * p];
                for l in 0..k {
                    let av = da[i * k + l];
                    let brow = &mut buf[l * p..(l + 1) * p];
                    for j in 0..p {
                        brow[j] += av * grow[j];
                    }
                }
            }
        });
        Ok(out)
    }

    /// Matrix transpose.
    pub fn transpose(&self, x: &Tensor) -> Result<Tensor> {
        let (r, c) = require_matrix("transpose", x)?;
        let mut data = vec![0.0; r * c];
        {
            let dx = x.data();
            for i in 0..r {
                for j in 0..c {
                    data[j * r + i] = dx[i * c + j];
                }
            }
        }
        let out = Tensor::from_parts(vec![c, r], data);
        let xc = x.clone();
        self.record(out.clone(), move |bar, adj| {
            let buf = adj.buffer_mut(&xc);
            for i in 0..r {
                for j in 0..c {
                    buf[i * c + j] += bar[j * r + i];
                }
            }
        });
        Ok(out)
    }

    /// Adds a bias vector `b: [c]` to every row of `x: [r×c]` — the one
    /// broadcasting pattern this engine supports.
    pub fn add_bias_rows(&self, x: &Tensor, bias: &Tensor) -> Result<Tensor> {
        let (r, c) = require_matrix("add_bias_rows", x)?;
        if bias.shape() != [c] {
            return Err(Error::Shape(format!(
                "add_bias_rows: bias shape {:?} does not match row width of {:?}",
                bias.shape(),
                x.shape()
            )));
        }
        let mut data = Vec::with_capacity(r * c);
        {
            let (dx, db) = (x.data(), bias.data());
            for i in 0..r {
                for j in 0..c {
                    data.push(dx[i * c + j] + db[j]);
                }
            }
        }
        let out = Tensor::from_parts(vec![r, c], data);
        let (x, bias) = (x.clone(), bias.clone());
        self.record(out.clone(), move |bar, adj| {
            adj.accumulate(&x, bar);
            let buf = adj.buffer_mut(&bias);
            for i in 0..r {
                for j in 0..c {
                    buf[j] += bar[i * c + j];
                }
            }
        });
        Ok(out)
    }

    /// Sliding windows of `k` consecutive rows of `x: [m×c]`, flattened: the
    /// output is `[(m−k+1) × k·c]` with row `j = [x_j, x_{j+1}, …, x_{j+k−1}]`.
    /// This is the im2col step of a stride-1 1-D convolution.
    pub fn windows(&self, x: &Tensor, k: usize) -> Result<Tensor> {
        let (m, c) = require_matrix("windows", x)?;
        if k == 0 || m < k {
            return Err(Error::Shape(format!(
                "windows: need 1 ≤ k ≤ rows, got k = {} for shape {:?}",
                k,
                x.shape()
            )));
        }
        let s = m - k + 1;
        let mut data = Vec::with_capacity(s * k * c);
        {
            let dx = x.data();
            for j in 0..s {
                data.extend_from_slice(&dx[j * c..(j + k) * c]);
            }
        }
        let out = Tensor::from_parts(vec![s, k * c], data);
        let xc = x.clone();
        self.record(out.clone(), move |bar, adj| {
            let buf = adj.buffer_mut(&xc);
            for j in 0..s {
                let grow = &bar[j * k * c..(j + 1) * k * c];
                for (off, g) in grow.iter().enumerate() {
                    buf[j * c + off] += g;
                }
            }
        });
        Ok(out)
    }

    /// Non-overlapping max-pooling over rows of `x: [s×c]` with window `p`:
    /// output `[floor(s/p) × c]`, channel-wise max per window; trailing rows
    /// that do not fill a window are dropped. Backward routes each gradient
    /// to the first (lowest row index) maximum of its window.
    pub fn maxpool_rows(&self, x: &Tensor, p: usize) -> Result<Tensor> {
        let (s, c) = require_matrix("maxpool_rows", x)?;
        if p == 0 || s < p {
            return Err(Error::Shape(format!(
                "maxpool_rows: need 1 ≤ pool ≤ rows, got pool = {} for shape {:?}",
                p,
                x.shape()
            )));
        }
        let d = s / p;
        let mut data = Vec::with_capacity(d * c);
        let mut argmax = Vec::with_capacity(d * c);
        {
            let dx = x.data();
            for w in 0..d {
                for j in 0..c {
                    let mut best = dx[w * p * c + j];
                    let mut best_at = w * p * c + j;
                    for t in 1..p {
                        let idx = (w * p + t) * c + j;
                        if dx[idx] > best {
                            best = dx[idx];
                            best_at = idx;
                        }
                    }
                    data.push(best);
                    argmax.push(best_at);
                }
            }
        }
        let out = Tensor::from_parts(vec![d, c], data);
        let xc = x.clone();
        self.record(out.clone(), move |bar, adj| {
            let buf = adj.buffer_mut(&xc);
            for (g, &src) in bar.iter().zip(&argmax) {
                buf[src] += g;
            }
        });
        Ok(out)
    }

    /// Gathers rows of `table: [n×e]` by index: output row `t` equals
    /// `table[ids[t]]`. Backward scatters gradients back into the gathered
    /// rows (rows gathered more than once accumulate).
    pub fn gather_rows(&self, table: &Tensor, ids: &[usize]) -> Result<Tensor> {
        let (n, e) = require_matrix("gather_rows", table)?;
        if let Some(&bad) = ids.iter().find(|&&i| i >= n) {
            return Err(Error::InvalidArgument(format!(
                "gather_rows: index {} out of range for table with {} rows",
                bad, n
            )));
        }
        let mut data = Vec::with_capacity(ids.len() * e);
        {
            let dt = table.data();
            for &i in ids {
                data.extend_from_slice(&dt[i * e..(i + 1) * e]);
            }
        }
        let out = Tensor::from_parts(vec![ids.len(), e], data);
        let table = table.clone();
        let ids = ids.to_vec();
        self.record(out.clone(), move |bar, adj| {
            let buf = adj.buffer_mut(&table);
            for (t, &i) in ids.iter().enumerate() {
                let grow = &bar[t * e..(t + 1) * e];
                let trow = &mut buf[i * e..(i + 1) * e];
                for j in 0..e {
                    trow[j] += grow[j];
                }
            }
        });
        Ok(out)
    }

    /// Horizontal concatenation of `a: [r×c1]` and `b: [r×c2]` into `[r×(c1+c2)]`.
    pub fn concat_cols(&self, a: &Tensor, b: &Tensor) -> Result<Tensor> {
        let (ra, c1) = require_matrix("concat_cols", a)?;
        let (rb, c2) = require_matrix("concat_cols", b)?;
        if ra != rb {
            return Err(Error::Shape(format!(
                "concat_cols: row counts differ for shapes {:?} and {:?}",
                a.shape(),
                b.shape()
            )));
        }
        let mut data = Vec::with_capacity(ra * (c1 + c2));
        {
            let (da, db) = (a.data(), b.data());
            for i in 0..ra {
                data.extend_from_slice(&da[i * c1..(i + 1) * c1]);
                data.extend_from_slice(&db[i * c2..(i + 1) * c2]);
            }
        }
        let out = Tensor::from_parts(vec![ra, c1 + c2], data);
        let (a, b) = (a.clone(), b.clone());
        self.record(out.clone(), move |bar, adj| {
            let width = c1 + c2;
            {
                let buf = adj.buffer_mut(&a);
                for i in 0..ra {
                    for j in 0..c1 {
                        buf[i * c1 + j] += bar[i * width + j];
                    }
                }
            }
            let buf = adj.buffer_mut(&b);
            for i in 0..ra {
                for j in 0..c2 {
                    buf[i * c2 + j] += bar[i * width + c1 + j];
                }
            }
        });
        Ok(out)
    }

    /// Vertical concatenation of matrices with equal column counts.
    pub fn concat_rows(&self, parts: &[Tensor]) -> Result<Tensor> {
        if parts.is_empty() {
            return Err(Error::InvalidArgument(
                "concat_rows: empty part list".to_string(),
            ));
        }
        let (_, c) = require_matrix("concat_rows", &parts[0])?;
        let mut rows = 0;
        for part in parts {
            let (r, pc) = require_matrix("concat_rows", part)?;
            if pc != c {
                return Err(Error::Shape(format!(
                    "concat_rows: column counts differ ({} vs {})",
                    c, pc
                )));
            }
            rows += r;
        }
        let mut data = Vec::with_capacity(rows * c);
        for part in parts {
            data.extend_from_slice(&part.data());
        }
        let out = Tensor::from_parts(vec![rows, c], data);
        let parts = parts.to_vec();
        self.record(out.clone(), move |bar, adj| {
            let mut offset = 0;
            for part in &parts {
                let len = part.numel();
                adj.accumulate(part, &bar[offset..offset + len]);
                offset += len;
            }
        });
        Ok(out)
    }

    /// Extracts row `i` of `x: [r×c]` as a `[1×c]` matrix.
    pub fn row(&self, x: &Tensor, i: usize) -> Result<Tensor> {
        let (r, c) = require_matrix("row", x)?;
        if i >= r {
            return Err(Error::InvalidArgument(format!(
                "row: index {} out of range for shape {:?}",
                i,
                x.shape()
            )));
        }
        let data = x.data()[i * c..(i + 1) * c].to_vec();
        let out = Tensor::from_parts(vec![1, c], data);
        let xc = x.clone();
        self.record(out.clone(), move |bar, adj| {
            let buf = adj.buffer_mut(&xc);
            for j in 0..c {
                buf[i * c + j] += bar[j];
            }
        });
        Ok(out)
    }

    /// Reinterprets a tensor under a new shape with the same element count.
    pub fn reshape(&self, x: &Tensor, shape: &[usize]) -> Result<Tensor> {
        let numel: usize = shape.iter().product();
        if numel != x.numel() {
            return Err(Error::Shape(format!(
                "reshape: cannot view shape {:?} as {:?}",
                x.shape(),
                shape
            )));
        }
        let out = Tensor::from_parts(shape.to_vec(), x.data().clone());
        let xc = x.clone();
        self.record(out.clone(), move |bar, adj| {
            adj.accumulate(&xc, bar);
        });
        Ok(out)
    }

    /// Sum of all elements, as a scalar tensor.
    pub fn sum_all(&self, x: &Tensor) -> Result<Tensor> {
        let total = x.data().iter().sum();
        let out = Tensor::scalar(total);
        let xc = x.clone();
        self.record(out.clone(), move |bar, adj| {
            let g = bar[0];
            let buf = adj.buffer_mut(&xc);
            for v in buf.iter_mut() {
                *v += g;
            }
        });
        Ok(out)
    }

    /// Row-wise softmax of `x: [r×c]` with max-subtraction for stability.
    ///
    /// Every output row sums to 1 and all entries lie in (0, 1). Backward is
    /// the full softmax Jacobian-vector product per row.
    pub fn softmax_rows(&self, x: &Tensor) -> Result<Tensor> {
        let (r, c) = require_matrix("softmax_rows", x)?;
        self.softmax_rows_with_mask(x, r, c, &vec![false; c])
    }

    /// Row-wise softmax over the columns whose `masked` flag is false; masked
    /// columns get weight exactly 0.0 and receive no gradient. Errors if all
    /// columns are masked.
    pub fn softmax_rows_masked(&self, x: &Tensor, masked: &[bool]) -> Result<Tensor> {
        let (r, c) = require_matrix("softmax_rows_masked", x)?;
        if masked.len() != c {
            return Err(Error::Shape(format!(
                "softmax_rows_masked: mask length {} does not match {} columns",
                masked.len(),
                c
            )));
        }
        if masked.iter().all(|&m| m) {
            return Err(Error::InvalidArgument(
                "softmax_rows_masked: all columns are masked".to_string(),
            ));
        }
        self.softmax_rows_with_mask(x, r, c, masked)
    }

    fn softmax_rows_with_mask(
        &self,
        x: &Tensor,
        r: usize,
        c: usize,
        masked: &[bool],
    ) -> Result<Tensor> {
        let mut data = vec![0.0; r * c];
        {
            let dx = x.data();
            if dx.iter().any(|v| v.is_nan()) {
                return Err(Error::Numeric(
                    "softmax_rows: input contains NaN".to_string(),
                ));
            }
            for i in 0..r {
                let xrow = &dx[i * c..(i + 1) * c];
                let mut max = f64::NEG_INFINITY;
                for j in 0..c {
                    if !masked[j] && xrow[j] > max {
                        max = xrow[j];
                    }
                }
                let mut denom = 0.0;
                let yrow = &mut data[i * c..(i + 1) * c];
                for j in 0..c {
                    if !masked[j] {
                        yrow[j] = (xrow[j] - max).exp();
                        denom += yrow[j];
                    }
                }
                for y in yrow.iter_mut() {
                    *y /= denom;
                }
            }
        }
        let out = Tensor::from_parts(vec![r, c], data);
        let (xc, y) = (x.clone(), out.clone());
        self.record(out.clone(), move |bar, adj| {
            // Per row: dx_j = y_j · (ḡ_j − Σ_l ḡ_l·y_l). Masked columns have
            // y_j = 0, so they contribute nothing and receive nothing.
            let dy = y.data();
            let buf = adj.buffer_mut(&xc);
            for i in 0..r {
                let yrow = &dy[i * c..(i + 1) * c];
                let grow = &bar[i * c..(i + 1) * c];
                let mut dot = 0.0;
                for j in 0..c {
                    dot += grow[j] * yrow[j];
                }
                for j in 0..c {
                    buf[i * c + j] += yrow[j] * (grow[j] - dot);
                }
            }
        });
        Ok(out)
    }

    /// Mean categorical cross-entropy of a batch: `probs` is `[B×C]` of
    /// per-row probabilities, `labels[i]` picks the gold column of row `i`.
    /// Probabilities are floored at 1e−12 before the log so the loss stays
    /// finite; entries at or below the floor get zero gradient.
    pub fn cross_entropy(&self, probs: &Tensor, labels: &[usize]) -> Result<Tensor> {
        const FLOOR: f64 = 1e-12;
        let (b, c) = require_matrix("cross_entropy", probs)?;
        if labels.len() != b {
            return Err(Error::Shape(format!(
                "cross_entropy: {} labels for {} rows",
                labels.len(),
                b
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= c) {
            return Err(Error::InvalidArgument(format!(
                "cross_entropy: label {} out of range for {} classes",
                bad, c
            )));
        }
        let mut total = 0.0;
        {
            let dp = probs.data();
            for (i, &l) in labels.iter().enumerate() {
                total -= dp[i * c + l].max(FLOOR).ln();
            }
        }
        let out = Tensor::scalar(total / b as f64);
        let probs = probs.clone();
        let labels = labels.to_vec();
        self.record(out.clone(), move |bar, adj| {
            let g = bar[0];
            let dp = probs.data();
            let buf = adj.buffer_mut(&probs);
            for (i, &l) in labels.iter().enumerate() {
                let p = dp[i * c + l];
                if p >= FLOOR {
                    buf[i * c + l] -= g / (b as f64 * p);
                }
            }
        });
        Ok(out)
    }
}
