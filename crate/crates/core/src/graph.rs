//! Reverse-mode tensor graph. Ops append nodes to a tape; `backward` walks
//! the tape in reverse and accumulates adjoints, which can then be flushed
//! into a [`ParamStore`]'s gradient buffers.
//!
//! Shapes are validated eagerly and violations panic: a bad shape is a
//! programming error, not a data error. Tensors are immutable once produced;
//! the only mutation is adjoint accumulation inside a single backward pass.

use crate::params::{ParamId, ParamStore, Precision};
use crate::ssm::{scan_backward, scan_forward, DiscretizationMode};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TensorId(pub(crate) usize);

/// Elementwise activation kinds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Act {
    Sigmoid,
    Silu,
    Softplus,
    Exp,
    Relu,
}

#[derive(Debug)]
enum Op {
    Leaf { param: Option<ParamId> },
    Matmul(TensorId, TensorId),
    Transpose(TensorId),
    Add(TensorId, TensorId),
    Sub(TensorId, TensorId),
    Mul(TensorId, TensorId),
    AddBias(TensorId, TensorId),
    Affine { x: TensorId, mul: f64 },
    Unary(TensorId, Act),
    RmsNorm { x: TensorId, gain: TensorId, eps: f64 },
    TakeRows { x: TensorId, rows: Vec<usize> },
    ConcatRows(Vec<TensorId>),
    ConcatCols(TensorId, TensorId),
    SliceCols { x: TensorId, start: usize, end: usize },
    Reshape(TensorId),
    SumAll(TensorId),
    DwConvCausal { x: TensorId, w: TensorId, b: TensorId },
    Patchify { video: TensorId, kernel: TensorId, bias: TensorId },
    Scan {
        u: TensorId,
        delta: TensorId,
        a: TensorId,
        b: TensorId,
        c: TensorId,
        mode: DiscretizationMode,
        /// Hidden states [L×D×N] cached at forward time; empty when the scan
        /// does not require gradients.
        h_cache: Vec<f64>,
    },
    SoftmaxRows(TensorId),
    CrossEntropy { logits: TensorId, label: usize },
}

struct Node {
    data: Vec<f64>,
    shape: Vec<usize>,
    op: Op,
    needs_grad: bool,
}

/// A single forward tape. Build one per forward pass.
pub struct Graph {
    nodes: Vec<Node>,
    precision: Precision,
    adjoints: Vec<Option<Vec<f64>>>,
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

impl Graph {
    pub fn new(precision: Precision) -> Self {
        Graph {
            nodes: Vec::new(),
            precision,
            adjoints: Vec::new(),
        }
    }

    pub fn precision(&self) -> Precision {
        self.precision
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn data(&self, id: TensorId) -> &[f64] {
        &self.nodes[id.0].data
    }

    pub fn shape(&self, id: TensorId) -> &[usize] {
        &self.nodes[id.0].shape
    }

    pub fn tensor(&self, id: TensorId) -> Tensor {
        Tensor::new(self.nodes[id.0].shape.clone(), self.nodes[id.0].data.clone())
    }

    /// Adjoint of a node after `backward`; `None` if the node did not
    /// require gradients or backward has not run.
    pub fn adjoint(&self, id: TensorId) -> Option<&[f64]> {
        self.adjoints.get(id.0).and_then(|g| g.as_deref())
    }

    fn rows_cols(&self, id: TensorId) -> (usize, usize) {
        let s = &self.nodes[id.0].shape;
        assert_eq!(s.len(), 2, "expected rank-2 tensor, got shape {s:?}");
        (s[0], s[1])
    }

    fn push(&mut self, mut data: Vec<f64>, shape: Vec<usize>, op: Op, needs_grad: bool) -> TensorId {
        if self.precision == Precision::Single {
            for v in data.iter_mut() {
                *v = *v as f32 as f64;
            }
        }
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        let id = TensorId(self.nodes.len());
        self.nodes.push(Node {
            data,
            shape,
            op,
            needs_grad,
        });
        id
    }

    fn needs(&self, id: TensorId) -> bool {
        self.nodes[id.0].needs_grad
    }

    // ── leaves ─────────────────────────────────────────────────────────

    /// Constant leaf: participates in forward only.
    pub fn constant(&mut self, t: Tensor) -> TensorId {
        self.push(t.data, t.shape, Op::Leaf { param: None }, false)
    }

    pub fn zeros(&mut self, shape: Vec<usize>) -> TensorId {
        self.constant(Tensor::zeros(shape))
    }

    /// Leaf bound to a store parameter; adjoints flow back via
    /// [`Graph::accumulate_param_grads`].
    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> TensorId {
        let p = store.get(id);
        self.push(
            p.data.clone(),
            p.shape.clone(),
            Op::Leaf { param: Some(id) },
            p.trainable,
        )
    }

    // ── ops ────────────────────────────────────────────────────────────

    pub fn matmul(&mut self, a: TensorId, b: TensorId) -> TensorId {
        let (m, k) = self.rows_cols(a);
        let (k2, n) = self.rows_cols(b);
        assert_eq!(k, k2, "matmul inner dims {k} vs {k2}");
        let mut out = vec![0.0; m * n];
        {
            let da = &self.nodes[a.0].data;
            let db = &self.nodes[b.0].data;
            for i in 0..m {
                for p in 0..k {
                    let av = da[i * k + p];
                    if av == 0.0 {
                        continue;
                    }
                    let brow = &db[p * n..(p + 1) * n];
                    let orow = &mut out[i * n..(i + 1) * n];
                    for j in 0..n {
                        orow[j] += av * brow[j];
                    }
                }
            }
        }
        let needs = self.needs(a) || self.needs(b);
        self.push(out, vec![m, n], Op::Matmul(a, b), needs)
    }

    pub fn transpose(&mut self, x: TensorId) -> TensorId {
        let (m, n) = self.rows_cols(x);
        let d = &self.nodes[x.0].data;
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            for j in 0..n {
                out[j * m + i] = d[i * n + j];
            }
        }
        let needs = self.needs(x);
        self.push(out, vec![n, m], Op::Transpose(x), needs)
    }

    fn zip_op(&mut self, a: TensorId, b: TensorId, f: impl Fn(f64, f64) -> f64, op: Op) -> TensorId {
        assert_eq!(
            self.nodes[a.0].shape, self.nodes[b.0].shape,
            "elementwise op shape mismatch"
        );
        let out: Vec<f64> = self.nodes[a.0]
            .data
            .iter()
            .zip(&self.nodes[b.0].data)
            .map(|(x, y)| f(*x, *y))
            .collect();
        let shape = self.nodes[a.0].shape.clone();
        let needs = self.needs(a) || self.needs(b);
        self.push(out, shape, op, needs)
    }

    pub fn add(&mut self, a: TensorId, b: TensorId) -> TensorId {
        self.zip_op(a, b, |x, y| x + y, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: TensorId, b: TensorId) -> TensorId {
        self.zip_op(a, b, |x, y| x - y, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: TensorId, b: TensorId) -> TensorId {
        self.zip_op(a, b, |x, y| x * y, Op::Mul(a, b))
    }

    /// x[m,n] + row-broadcast bias[n].
    pub fn add_bias(&mut self, x: TensorId, bias: TensorId) -> TensorId {
        let (m, n) = self.rows_cols(x);
        let bn = self.nodes[bias.0].data.len();
        assert_eq!(n, bn, "bias length {bn} vs {n} columns");
        let mut out = self.nodes[x.0].data.clone();
        let bd = &self.nodes[bias.0].data;
        for i in 0..m {
            for j in 0..n {
                out[i * n + j] += bd[j];
            }
        }
        let needs = self.needs(x) || self.needs(bias);
        self.push(out, vec![m, n], Op::AddBias(x, bias), needs)
    }

    /// mul·x + add, elementwise with scalars.
    pub fn affine(&mut self, x: TensorId, mul: f64, add: f64) -> TensorId {
        let out: Vec<f64> = self.nodes[x.0].data.iter().map(|v| mul * v + add).collect();
        let shape = self.nodes[x.0].shape.clone();
        let needs = self.needs(x);
        self.push(out, shape, Op::Affine { x, mul }, needs)
    }

    pub fn unary(&mut self, x: TensorId, act: Act) -> TensorId {
        let out: Vec<f64> = self.nodes[x.0]
            .data
            .iter()
            .map(|&v| match act {
                Act::Sigmoid => sigmoid(v),
                Act::Silu => v * sigmoid(v),
                Act::Softplus => softplus(v),
                Act::Exp => v.exp(),
                Act::Relu => v.max(0.0),
            })
            .collect();
        let shape = self.nodes[x.0].shape.clone();
        let needs = self.needs(x);
        self.push(out, shape, Op::Unary(x, act), needs)
    }

    pub fn sigmoid(&mut self, x: TensorId) -> TensorId {
        self.unary(x, Act::Sigmoid)
    }

    pub fn silu(&mut self, x: TensorId) -> TensorId {
        self.unary(x, Act::Silu)
    }

    pub fn softplus(&mut self, x: TensorId) -> TensorId {
        self.unary(x, Act::Softplus)
    }

    /// Scale-only RMS normalization per row: y = x / rms(row) * gain.
    pub fn rms_norm(&mut self, x: TensorId, gain: TensorId, eps: f64) -> TensorId {
        let (m, n) = self.rows_cols(x);
        assert_eq!(self.nodes[gain.0].data.len(), n, "rms gain length");
        let mut out = vec![0.0; m * n];
        {
            let d = &self.nodes[x.0].data;
            let g = &self.nodes[gain.0].data;
            for i in 0..m {
                let row = &d[i * n..(i + 1) * n];
                let ms = row.iter().map(|v| v * v).sum::<f64>() / n as f64;
                let inv = 1.0 / (ms + eps).sqrt();
                for j in 0..n {
                    out[i * n + j] = row[j] * inv * g[j];
                }
            }
        }
        let needs = self.needs(x) || self.needs(gain);
        self.push(out, vec![m, n], Op::RmsNorm { x, gain, eps }, needs)
    }

    /// Gathers rows; backward scatter-adds. Also used for permutation and
    /// row reversal.
    pub fn take_rows(&mut self, x: TensorId, rows: Vec<usize>) -> TensorId {
        let (m, n) = self.rows_cols(x);
        let mut out = Vec::with_capacity(rows.len() * n);
        for &r in &rows {
            assert!(r < m, "row {r} out of range {m}");
            out.extend_from_slice(&self.nodes[x.0].data[r * n..(r + 1) * n]);
        }
        let needs = self.needs(x);
        let k = rows.len();
        self.push(out, vec![k, n], Op::TakeRows { x, rows }, needs)
    }

    pub fn reverse_rows(&mut self, x: TensorId) -> TensorId {
        let (m, _) = self.rows_cols(x);
        self.take_rows(x, (0..m).rev().collect())
    }

    pub fn concat_rows(&mut self, parts: &[TensorId]) -> TensorId {
        assert!(!parts.is_empty());
        let n = self.rows_cols(parts[0]).1;
        let mut rows = 0;
        let mut out = Vec::new();
        let mut needs = false;
        for &p in parts {
            let (m, n2) = self.rows_cols(p);
            assert_eq!(n, n2, "concat_rows column mismatch");
            rows += m;
            out.extend_from_slice(&self.nodes[p.0].data);
            needs |= self.needs(p);
        }
        self.push(out, vec![rows, n], Op::ConcatRows(parts.to_vec()), needs)
    }

    pub fn concat_cols(&mut self, a: TensorId, b: TensorId) -> TensorId {
        let (m, na) = self.rows_cols(a);
        let (m2, nb) = self.rows_cols(b);
        assert_eq!(m, m2, "concat_cols row mismatch");
        let mut out = Vec::with_capacity(m * (na + nb));
        for i in 0..m {
            out.extend_from_slice(&self.nodes[a.0].data[i * na..(i + 1) * na]);
            out.extend_from_slice(&self.nodes[b.0].data[i * nb..(i + 1) * nb]);
        }
        let needs = self.needs(a) || self.needs(b);
        self.push(out, vec![m, na + nb], Op::ConcatCols(a, b), needs)
    }

    pub fn slice_cols(&mut self, x: TensorId, start: usize, end: usize) -> TensorId {
        let (m, n) = self.rows_cols(x);
        assert!(start < end && end <= n, "column slice {start}..{end} of {n}");
        let w = end - start;
        let mut out = Vec::with_capacity(m * w);
        for i in 0..m {
            out.extend_from_slice(&self.nodes[x.0].data[i * n + start..i * n + end]);
        }
        let needs = self.needs(x);
        self.push(out, vec![m, w], Op::SliceCols { x, start, end }, needs)
    }

    pub fn reshape(&mut self, x: TensorId, shape: Vec<usize>) -> TensorId {
        assert_eq!(
            shape.iter().product::<usize>(),
            self.nodes[x.0].data.len(),
            "reshape to {shape:?}"
        );
        let out = self.nodes[x.0].data.clone();
        let needs = self.needs(x);
        self.push(out, shape, Op::Reshape(x), needs)
    }

    pub fn sum_all(&mut self, x: TensorId) -> TensorId {
        let s: f64 = self.nodes[x.0].data.iter().sum();
        let needs = self.needs(x);
        self.push(vec![s], vec![1], Op::SumAll(x), needs)
    }

    /// Depthwise causal 1-D convolution over rows of x[L,D]:
    /// y[t,d] = b[d] + Σ_k w[d,k]·x[t−k,d], with x ≡ 0 for t−k < 0, so a
    /// kernel [1, 0, …] is the identity and output length equals input length.
    pub fn dw_conv_causal(&mut self, x: TensorId, w: TensorId, b: TensorId) -> TensorId {
        let (l, d) = self.rows_cols(x);
        let (dw, k) = self.rows_cols(w);
        assert_eq!(d, dw, "conv kernel channels {dw} vs {d}");
        assert_eq!(self.nodes[b.0].data.len(), d, "conv bias length");
        let mut out = vec![0.0; l * d];
        {
            let xd = &self.nodes[x.0].data;
            let wd = &self.nodes[w.0].data;
            let bd = &self.nodes[b.0].data;
            for t in 0..l {
                for c in 0..d {
                    let mut acc = bd[c];
                    for ki in 0..k.min(t + 1) {
                        acc += wd[c * k + ki] * xd[(t - ki) * d + c];
                    }
                    out[t * d + c] = acc;
                }
            }
        }
        let needs = self.needs(x) || self.needs(w) || self.needs(b);
        self.push(out, vec![l, d], Op::DwConvCausal { x, w, b }, needs)
    }

    /// Non-overlapping 3-D patch embedding. video [Cin,T,H,W], kernel
    /// [Cout,Cin,pt,ph,pw], bias [Cout] → tokens [L,Cout] with
    /// L = (T/pt)·(H/ph)·(W/pw) in frame-major (spatiotemporal) order.
    /// Panics if T, H, W are not divisible by the patch dims; the caller is
    /// expected to validate divisibility first for a recoverable error.
    pub fn patchify3d(&mut self, video: TensorId, kernel: TensorId, bias: TensorId) -> TensorId {
        let vs = self.nodes[video.0].shape.clone();
        let ks = self.nodes[kernel.0].shape.clone();
        assert_eq!(vs.len(), 4, "video must be [C,T,H,W]");
        assert_eq!(ks.len(), 5, "kernel must be [Cout,Cin,pt,ph,pw]");
        let (cin, t, h, w) = (vs[0], vs[1], vs[2], vs[3]);
        let (cout, kcin, pt, ph, pw) = (ks[0], ks[1], ks[2], ks[3], ks[4]);
        assert_eq!(cin, kcin, "kernel input channels");
        assert!(
            t % pt == 0 && h % ph == 0 && w % pw == 0,
            "video dims ({t},{h},{w}) not divisible by patch ({pt},{ph},{pw})"
        );
        assert_eq!(self.nodes[bias.0].data.len(), cout, "patch bias length");
        let (gt, gh, gw) = (t / pt, h / ph, w / pw);
        let l = gt * gh * gw;
        let mut out = vec![0.0; l * cout];
        {
            let vd = &self.nodes[video.0].data;
            let kd = &self.nodes[kernel.0].data;
            let bd = &self.nodes[bias.0].data;
            let vidx = |c: usize, ti: usize, hi: usize, wi: usize| ((c * t + ti) * h + hi) * w + wi;
            for ti in 0..gt {
                for hi in 0..gh {
                    for wi in 0..gw {
                        let tok = (ti * gh + hi) * gw + wi;
                        for co in 0..cout {
                            let mut acc = bd[co];
                            let kbase = co * cin * pt * ph * pw;
                            for ci in 0..cin {
                                for dt in 0..pt {
                                    for dh in 0..ph {
                                        for dw in 0..pw {
                                            let kv = kd[kbase
                                                + ((ci * pt + dt) * ph + dh) * pw
                                                + dw];
                                            acc += kv
                                                * vd[vidx(
                                                    ci,
                                                    ti * pt + dt,
                                                    hi * ph + dh,
                                                    wi * pw + dw,
                                                )];
                                        }
                                    }
                                }
                            }
                            out[tok * cout + co] = acc;
                        }
                    }
                }
            }
        }
        let needs = self.needs(video) || self.needs(kernel) || self.needs(bias);
        self.push(out, vec![l, cout], Op::Patchify { video, kernel, bias }, needs)
    }

    /// Input-dependent state-space scan over rows. u, delta: [L,D]; a: [D,N]
    /// (negative diagonal per channel); b, c: [L,N]. Returns y [L,D].
    pub fn scan(
        &mut self,
        u: TensorId,
        delta: TensorId,
        a: TensorId,
        b: TensorId,
        c: TensorId,
        mode: DiscretizationMode,
    ) -> TensorId {
        let (l, d) = self.rows_cols(u);
        assert_eq!(self.rows_cols(delta), (l, d), "delta shape");
        let (da, n) = self.rows_cols(a);
        assert_eq!(da, d, "state matrix channels");
        assert_eq!(self.rows_cols(b), (l, n), "b shape");
        assert_eq!(self.rows_cols(c), (l, n), "c shape");
        let needs = self.needs(u)
            || self.needs(delta)
            || self.needs(a)
            || self.needs(b)
            || self.needs(c);
        let mut y = vec![0.0; l * d];
        let mut h_cache = if needs { vec![0.0; l * d * n] } else { Vec::new() };
        scan_forward(
            l,
            d,
            n,
            &self.nodes[u.0].data,
            &self.nodes[delta.0].data,
            &self.nodes[a.0].data,
            &self.nodes[b.0].data,
            &self.nodes[c.0].data,
            mode,
            &mut y,
            if needs { Some(&mut h_cache) } else { None },
        );
        self.push(
            y,
            vec![l, d],
            Op::Scan {
                u,
                delta,
                a,
                b,
                c,
                mode,
                h_cache,
            },
            needs,
        )
    }

    pub fn softmax_rows(&mut self, x: TensorId) -> TensorId {
        let (m, n) = self.rows_cols(x);
        let mut out = vec![0.0; m * n];
        {
            let d = &self.nodes[x.0].data;
            for i in 0..m {
                let row = &d[i * n..(i + 1) * n];
                let mx = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let mut z = 0.0;
                for j in 0..n {
                    let e = (row[j] - mx).exp();
                    out[i * n + j] = e;
                    z += e;
                }
                for j in 0..n {
                    out[i * n + j] /= z;
                }
            }
        }
        let needs = self.needs(x);
        self.push(out, vec![m, n], Op::SoftmaxRows(x), needs)
    }

    /// −log softmax(logits)[label] for a single row of logits [1,K],
    /// stabilized by max subtraction.
    pub fn cross_entropy(&mut self, logits: TensorId, label: usize) -> TensorId {
        let (m, k) = self.rows_cols(logits);
        assert_eq!(m, 1, "cross_entropy expects a single logit row");
        assert!(label < k, "label {label} out of range {k}");
        let row = &self.nodes[logits.0].data;
        let mx = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = row.iter().map(|v| (v - mx).exp()).sum::<f64>().ln() + mx;
        let loss = lse - row[label];
        let needs = self.needs(logits);
        self.push(vec![loss], vec![1], Op::CrossEntropy { logits, label }, needs)
    }

    // ── backward ───────────────────────────────────────────────────────

    /// Reverse-mode sweep from a scalar loss. Adjoints become readable via
    /// [`Graph::adjoint`]; leaf-parameter gradients are flushed with
    /// [`Graph::accumulate_param_grads`]. Panics on a non-scalar loss.
    pub fn backward(&mut self, loss: TensorId) {
        assert_eq!(
            self.nodes[loss.0].data.len(),
            1,
            "backward requires a scalar loss, got shape {:?}",
            self.nodes[loss.0].shape
        );
        let n_nodes = self.nodes.len();
        let mut adj: Vec<Option<Vec<f64>>> = (0..n_nodes).map(|_| None).collect();
        adj[loss.0] = Some(vec![1.0]);

        for i in (0..n_nodes).rev() {
            if !self.nodes[i].needs_grad {
                continue;
            }
            let g = match adj[i].take() {
                Some(g) => g,
                None => continue,
            };
            self.backward_node(i, &g, &mut adj);
            adj[i] = Some(g);
        }
        self.adjoints = adj;
    }

    fn accum(adj: &mut [Option<Vec<f64>>], id: TensorId, len: usize) -> &mut Vec<f64> {
        adj[id.0].get_or_insert_with(|| vec![0.0; len])
    }

    fn backward_node(&self, i: usize, g: &[f64], adj: &mut [Option<Vec<f64>>]) {
        let numel = |id: TensorId| self.nodes[id.0].data.len();
        match &self.nodes[i].op {
            Op::Leaf { .. } => {}
            Op::Matmul(a, b) => {
                let (m, k) = (self.nodes[a.0].shape[0], self.nodes[a.0].shape[1]);
                let n = self.nodes[b.0].shape[1];
                if self.needs(*a) {
                    let bd = &self.nodes[b.0].data;
                    let ga = Self::accum(adj, *a, m * k);
                    for r in 0..m {
                        for j in 0..n {
                            let gv = g[r * n + j];
                            if gv == 0.0 {
                                continue;
                            }
                            for p in 0..k {
                                ga[r * k + p] += gv * bd[p * n + j];
                            }
                        }
                    }
                }
                if self.needs(*b) {
                    let ad = &self.nodes[a.0].data;
                    let gb = Self::accum(adj, *b, k * n);
                    for r in 0..m {
                        for p in 0..k {
                            let av = ad[r * k + p];
                            if av == 0.0 {
                                continue;
                            }
                            for j in 0..n {
                                gb[p * n + j] += av * g[r * n + j];
                            }
                        }
                    }
                }
            }
            Op::Transpose(x) => {
                if self.needs(*x) {
                    let (m, n) = (self.nodes[x.0].shape[0], self.nodes[x.0].shape[1]);
                    let gx = Self::accum(adj, *x, m * n);
                    for i2 in 0..m {
                        for j in 0..n {
                            gx[i2 * n + j] += g[j * m + i2];
                        }
                    }
                }
            }
            Op::Add(a, b) => {
                for id in [a, b] {
                    if self.needs(*id) {
                        let gx = Self::accum(adj, *id, numel(*id));
                        for (gi, gv) in gx.iter_mut().zip(g) {
                            *gi += gv;
                        }
                    }
                }
            }
            Op::Sub(a, b) => {
                if self.needs(*a) {
                    let gx = Self::accum(adj, *a, numel(*a));
                    for (gi, gv) in gx.iter_mut().zip(g) {
                        *gi += gv;
                    }
                }
                if self.needs(*b) {
                    let gx = Self::accum(adj, *b, numel(*b));
                    for (gi, gv) in gx.iter_mut().zip(g) {
                        *gi -= gv;
                    }
                }
            }
            Op::Mul(a, b) => {
                if self.needs(*a) {
                    let bd = self.nodes[b.0].data.clone();
                    let gx = Self::accum(adj, *a, numel(*a));
                    for ((gi, gv), bv) in gx.iter_mut().zip(g).zip(&bd) {
                        *gi += gv * bv;
                    }
                }
                if self.needs(*b) {
                    let ad = self.nodes[a.0].data.clone();
                    let gx = Self::accum(adj, *b, numel(*b));
                    for ((gi, gv), av) in gx.iter_mut().zip(g).zip(&ad) {
                        *gi += gv * av;
                    }
                }
            }
            Op::AddBias(x, b) => {
                let (m, n) = (self.nodes[x.0].shape[0], self.nodes[x.0].shape[1]);
                if self.needs(*x) {
                    let gx = Self::accum(adj, *x, m * n);
                    for (gi, gv) in gx.iter_mut().zip(g) {
                        *gi += gv;
                    }
                }
                if self.needs(*b) {
                    let gb = Self::accum(adj, *b, n);
                    for r in 0..m {
                        for j in 0..n {
                            gb[j] += g[r * n + j];
                        }
                    }
                }
            }
            Op::Affine { x, mul } => {
                if self.needs(*x) {
                    let m = *mul;
                    let gx = Self::accum(adj, *x, numel(*x));
                    for (gi, gv) in gx.iter_mut().zip(g) {
                        *gi += m * gv;
                    }
                }
            }
            Op::Unary(x, act) => {
                if self.needs(*x) {
                    let xd = &self.nodes[x.0].data;
                    let act = *act;
                    let derivs: Vec<f64> = xd
                        .iter()
                        .map(|&v| match act {
                            Act::Sigmoid => {
                                let s = sigmoid(v);
                                s * (1.0 - s)
                            }
                            Act::Silu => {
                                let s = sigmoid(v);
                                s + v * s * (1.0 - s)
                            }
                            Act::Softplus => sigmoid(v),
                            Act::Exp => v.exp(),
                            Act::Relu => {
                                if v > 0.0 {
                                    1.0
                                } else {
                                    0.0
                                }
                            }
                        })
                        .collect();
                    let gx = Self::accum(adj, *x, derivs.len());
                    for ((gi, gv), dv) in gx.iter_mut().zip(g).zip(&derivs) {
                        *gi += gv * dv;
                    }
                }
            }
            Op::RmsNorm { x, gain, eps } => {
                let (m, n) = (self.nodes[x.0].shape[0], self.nodes[x.0].shape[1]);
                let xd = &self.nodes[x.0].data;
                let gd = &self.nodes[gain.0].data;
                let eps = *eps;
                if self.needs(*x) {
                    let mut gx_acc = vec![0.0; m * n];
                    for r in 0..m {
                        let row = &xd[r * n..(r + 1) * n];
                        let ms = row.iter().map(|v| v * v).sum::<f64>() / n as f64;
                        let rinv = 1.0 / (ms + eps).sqrt();
                        // Σ_j g_ij · gain_j · x_ij, shared across the row
                        let mut dot = 0.0;
                        for j in 0..n {
                            dot += g[r * n + j] * gd[j] * row[j];
                        }
                        let coef = dot * rinv * rinv * rinv / n as f64;
                        for j in 0..n {
                            gx_acc[r * n + j] = g[r * n + j] * gd[j] * rinv - row[j] * coef;
                        }
                    }
                    let gx = Self::accum(adj, *x, m * n);
                    for (gi, gv) in gx.iter_mut().zip(&gx_acc) {
                        *gi += gv;
                    }
                }
                if self.needs(*gain) {
                    let mut gg_acc = vec![0.0; n];
                    for r in 0..m {
                        let row = &xd[r * n..(r + 1) * n];
                        let ms = row.iter().map(|v| v * v).sum::<f64>() / n as f64;
                        let rinv = 1.0 / (ms + eps).sqrt();
                        for j in 0..n {
                            gg_acc[j] += g[r * n + j] * row[j] * rinv;
                        }
                    }
                    let gg = Self::accum(adj, *gain, n);
                    for (gi, gv) in gg.iter_mut().zip(&gg_acc) {
                        *gi += gv;
                    }
                }
            }
            Op::TakeRows { x, rows } => {
                if self.needs(*x) {
                    let n = self.nodes[x.0].shape[1];
                    let len = numel(*x);
                    let rows = rows.clone();
                    let gx = Self::accum(adj, *x, len);
                    for (k, &r) in rows.iter().enumerate() {
                        for j in 0..n {
                            gx[r * n + j] += g[k * n + j];
                        }
                    }
                }
            }
            Op::ConcatRows(parts) => {
                let parts = parts.clone();
                let mut offset = 0;
                for p in parts {
                    let len = numel(p);
                    if self.needs(p) {
                        let gp = Self::accum(adj, p, len);
                        for (gi, gv) in gp.iter_mut().zip(&g[offset..offset + len]) {
                            *gi += gv;
                        }
                    }
                    offset += len;
                }
            }
            Op::ConcatCols(a, b) => {
                let (m, na) = (self.nodes[a.0].shape[0], self.nodes[a.0].shape[1]);
                let nb = self.nodes[b.0].shape[1];
                let n = na + nb;
                if self.needs(*a) {
                    let ga = Self::accum(adj, *a, m * na);
                    for r in 0..m {
                        for j in 0..na {
                            ga[r * na + j] += g[r * n + j];
                        }
                    }
                }
                if self.needs(*b) {
                    let gb = Self::accum(adj, *b, m * nb);
                    for r in 0..m {
                        for j in 0..nb {
                            gb[r * nb + j] += g[r * n + na + j];
                        }
                    }
                }
            }
            Op::SliceCols { x, start, end } => {
                if self.needs(*x) {
                    let (m, n) = (self.nodes[x.0].shape[0], self.nodes[x.0].shape[1]);
                    let (start, end) = (*start, *end);
                    let w = end - start;
                    let gx = Self::accum(adj, *x, m * n);
                    for r in 0..m {
                        for j in 0..w {
                            gx[r * n + start + j] += g[r * w + j];
                        }
                    }
                }
            }
            Op::Reshape(x) => {
                if self.needs(*x) {
                    let gx = Self::accum(adj, *x, numel(*x));
                    for (gi, gv) in gx.iter_mut().zip(g) {
                        *gi += gv;
                    }
                }
            }
            Op::SumAll(x) => {
                if self.needs(*x) {
                    let gv = g[0];
                    let gx = Self::accum(adj, *x, numel(*x));
                    for gi in gx.iter_mut() {
                        *gi += gv;
                    }
                }
            }
            Op::DwConvCausal { x, w, b } => {
                let (l, d) = (self.nodes[x.0].shape[0], self.nodes[x.0].shape[1]);
                let k = self.nodes[w.0].shape[1];
                if self.needs(*x) {
                    let wd = self.nodes[w.0].data.clone();
                    let gx = Self::accum(adj, *x, l * d);
                    for t in 0..l {
                        for c in 0..d {
                            let gv = g[t * d + c];
                            if gv == 0.0 {
                                continue;
                            }
                            for ki in 0..k.min(t + 1) {
                                gx[(t - ki) * d + c] += gv * wd[c * k + ki];
                            }
                        }
                    }
                }
                if self.needs(*w) {
                    let xd = &self.nodes[x.0].data;
                    let mut gw_acc = vec![0.0; d * k];
                    for t in 0..l {
                        for c in 0..d {
                            let gv = g[t * d + c];
                            if gv == 0.0 {
                                continue;
                            }
                            for ki in 0..k.min(t + 1) {
                                gw_acc[c * k + ki] += gv * xd[(t - ki) * d + c];
                            }
                        }
                    }
                    let gw = Self::accum(adj, *w, d * k);
                    for (gi, gv) in gw.iter_mut().zip(&gw_acc) {
                        *gi += gv;
                    }
                }
                if self.needs(*b) {
                    let gb = Self::accum(adj, *b, d);
                    for t in 0..l {
                        for c in 0..d {
                            gb[c] += g[t * d + c];
                        }
                    }
                }
            }
            Op::Patchify { video, kernel, bias } => {
                let vs = self.nodes[video.0].shape.clone();
                let ks = self.nodes[kernel.0].shape.clone();
                let (cin, t, h, w) = (vs[0], vs[1], vs[2], vs[3]);
                let (cout, pt, ph, pw) = (ks[0], ks[2], ks[3], ks[4]);
                let (gt, gh, gw) = (t / pt, h / ph, w / pw);
                let vidx = |c: usize, ti: usize, hi: usize, wi: usize| ((c * t + ti) * h + hi) * w + wi;
                if self.needs(*video) {
                    let kd = self.nodes[kernel.0].data.clone();
                    let gv = Self::accum(adj, *video, cin * t * h * w);
                    for ti in 0..gt {
                        for hi in 0..gh {
                            for wi in 0..gw {
                                let tok = (ti * gh + hi) * gw + wi;
                                for co in 0..cout {
                                    let gtok = g[tok * cout + co];
                                    if gtok == 0.0 {
                                        continue;
                                    }
                                    let kbase = co * cin * pt * ph * pw;
                                    for ci in 0..cin {
                                        for dt in 0..pt {
                                            for dh in 0..ph {
                                                for dwi in 0..pw {
                                                    gv[vidx(
                                                        ci,
                                                        ti * pt + dt,
                                                        hi * ph + dh,
                                                        wi * pw + dwi,
                                                    )] += gtok
                                                        * kd[kbase
                                                            + ((ci * pt + dt) * ph + dh) * pw
                                                            + dwi];
                                                }
                                            }
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
                if self.needs(*kernel) {
                    let vd = &self.nodes[video.0].data;
                    let mut gk_acc = vec![0.0; cout * cin * pt * ph * pw];
                    for ti in 0..gt {
                        for hi in 0..gh {
                            for wi in 0..gw {
                                let tok = (ti * gh + hi) * gw + wi;
                                for co in 0..cout {
                                    let gtok = g[tok * cout + co];
                                    if gtok == 0.0 {
                                        continue;
                                    }
                                    let kbase = co * cin * pt * ph * pw;
                                    for ci in 0..cin {
                                        for dt in 0..pt {
                                            for dh in 0..ph {
                                                for dwi in 0..pw {
                                                    gk_acc[kbase
                                                        + ((ci * pt + dt) * ph + dh) * pw
                                                        + dwi] += gtok
                                                        * vd[vidx(
                                                            ci,
                                                            ti * pt + dt,
                                                            hi * ph + dh,
                                                            wi * pw + dwi,
                                                        )];
                                                }
                                            }
                                        }
                                    }
                                }
                            }
                        }
                    }
                    let gk = Self::accum(adj, *kernel, cout * cin * pt * ph * pw);
                    for (gi, gv) in gk.iter_mut().zip(&gk_acc) {
                        *gi += gv;
                    }
                }
                if self.needs(*bias) {
                    let l = gt * gh * gw;
                    let gb = Self::accum(adj, *bias, cout);
                    for tok in 0..l {
                        for co in 0..cout {
                            gb[co] += g[tok * cout + co];
                        }
                    }
                }
            }
            Op::Scan {
                u,
                delta,
                a,
                b,
                c,
                mode,
                h_cache,
            } => {
                let (l, d) = (self.nodes[u.0].shape[0], self.nodes[u.0].shape[1]);
                let n = self.nodes[a.0].shape[1];
                let mut gu = vec![0.0; l * d];
                let mut gdelta = vec![0.0; l * d];
                let mut ga = vec![0.0; d * n];
                let mut gb = vec![0.0; l * n];
                let mut gc = vec![0.0; l * n];
                scan_backward(
                    l,
                    d,
                    n,
                    &self.nodes[u.0].data,
                    &self.nodes[delta.0].data,
                    &self.nodes[a.0].data,
                    &self.nodes[b.0].data,
                    &self.nodes[c.0].data,
                    *mode,
                    h_cache,
                    g,
                    &mut gu,
                    &mut gdelta,
                    &mut ga,
                    &mut gb,
                    &mut gc,
                );
                let (u, delta, a, b, c) = (*u, *delta, *a, *b, *c);
                for (id, gacc) in [(u, gu), (delta, gdelta), (a, ga), (b, gb), (c, gc)] {
                    if self.needs(id) {
                        let dst = Self::accum(adj, id, gacc.len());
                        for (gi, gv) in dst.iter_mut().zip(&gacc) {
                            *gi += gv;
                        }
                    }
                }
            }
            Op::SoftmaxRows(x) => {
                if self.needs(*x) {
                    let (m, n) = (self.nodes[x.0].shape[0], self.nodes[x.0].shape[1]);
                    let yd = self.nodes[i].data.clone();
                    let gx = Self::accum(adj, *x, m * n);
                    for r in 0..m {
                        let mut dot = 0.0;
                        for j in 0..n {
                            dot += g[r * n + j] * yd[r * n + j];
                        }
                        for j in 0..n {
                            gx[r * n + j] += yd[r * n + j] * (g[r * n + j] - dot);
                        }
                    }
                }
            }
            Op::CrossEntropy { logits, label } => {
                if self.needs(*logits) {
                    let row = &self.nodes[logits.0].data;
                    let k = row.len();
                    let mx = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                    let exps: Vec<f64> = row.iter().map(|v| (v - mx).exp()).collect();
                    let z: f64 = exps.iter().sum();
                    let label = *label;
                    let gl = Self::accum(adj, *logits, k);
                    for j in 0..k {
                        let soft = exps[j] / z;
                        let onehot = if j == label { 1.0 } else { 0.0 };
                        gl[j] += g[0] * (soft - onehot);
                    }
                }
            }
        }
    }

    /// Adds every parameter leaf's adjoint into the store's gradient buffer.
    /// Repeated backward passes accumulate until `ParamStore::zero_grad`.
    pub fn accumulate_param_grads(&self, store: &mut ParamStore) {
        for (i, node) in self.nodes.iter().enumerate() {
            if let Op::Leaf { param: Some(pid) } = node.op {
                if let Some(Some(g)) = self.adjoints.get(i) {
                    let p = store.get_mut(pid);
                    for (dst, src) in p.grad.iter_mut().zip(g) {
                        *dst += src;
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::{ParamStore, Precision};

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn matmul_identity() {
        let mut g = Graph::new(Precision::Double);
        let i2 = g.constant(Tensor::new(vec![2, 2], vec![1.0, 0.0, 0.0, 1.0]));
        let m = g.constant(Tensor::new(vec![2, 2], vec![5.0, 6.0, 7.0, 8.0]));
        let y = g.matmul(i2, m);
        assert_eq!(g.data(y), &[5.0, 6.0, 7.0, 8.0]);
    }

    #[test]
    fn matmul_hand_product() {
        // hand multiplication oracle: [[1,2],[3,4]]·[[5,6],[7,8]]
        let mut g = Graph::new(Precision::Double);
        let a = g.constant(Tensor::new(vec![2, 2], vec![1.0, 2.0, 3.0, 4.0]));
        let b = g.constant(Tensor::new(vec![2, 2], vec![5.0, 6.0, 7.0, 8.0]));
        let y = g.matmul(a, b);
        assert_eq!(g.data(y), &[19.0, 22.0, 43.0, 50.0]);
    }

    #[test]
    fn matmul_zero_annihilates() {
        let mut g = Graph::new(Precision::Double);
        let z = g.zeros(vec![2, 3]);
        let b = g.constant(Tensor::new(vec![3, 2], vec![1.0; 6]));
        let y = g.matmul(z, b);
        assert_eq!(g.data(y), &[0.0; 4]);
    }

    #[test]
    #[should_panic(expected = "matmul inner dims")]
    fn matmul_shape_mismatch_panics() {
        let mut g = Graph::new(Precision::Double);
        let a = g.zeros(vec![2, 3]);
        let b = g.zeros(vec![2, 2]);
        let _ = g.matmul(a, b);
    }

    #[test]
    fn activation_values() {
        let mut g = Graph::new(Precision::Double);
        let x = g.constant(Tensor::new(vec![1, 1], vec![0.0]));
        let s = g.sigmoid(x);
        assert_eq!(g.data(s), &[0.5]);
        let si = g.silu(x);
        assert_eq!(g.data(si), &[0.0]);
        let sp = g.softplus(x);
        assert!((g.data(sp)[0] - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn grad_of_sum_is_ones_and_accumulates() {
        let mut store = ParamStore::new(Precision::Double);
        let pid = store.register("theta", vec![2, 2], vec![1.0, -2.0, 0.5, 3.0]);

        let mut g = Graph::new(Precision::Double);
        let th = g.param(&store, pid);
        let loss = g.sum_all(th);
        g.backward(loss);
        g.accumulate_param_grads(&mut store);
        assert_eq!(store.get(pid).grad, vec![1.0; 4]);

        // repeated backward without zero_grad accumulates
        let mut g2 = Graph::new(Precision::Double);
        let th2 = g2.param(&store, pid);
        let loss2 = g2.sum_all(th2);
        g2.backward(loss2);
        g2.accumulate_param_grads(&mut store);
        assert_eq!(store.get(pid).grad, vec![2.0; 4]);
    }

    #[test]
    fn grad_of_square_sum() {
        // loss = Σ θ² at θ = [1, −2] → grad [2, −4]
        let mut store = ParamStore::new(Precision::Double);
        let pid = store.register("theta", vec![1, 2], vec![1.0, -2.0]);
        let mut g = Graph::new(Precision::Double);
        let th = g.param(&store, pid);
        let sq = g.mul(th, th);
        let loss = g.sum_all(sq);
        g.backward(loss);
        g.accumulate_param_grads(&mut store);
        assert_eq!(store.get(pid).grad, vec![2.0, -4.0]);
    }

    #[test]
    fn grad_of_constant_loss_is_zero() {
        let mut store = ParamStore::new(Precision::Double);
        let pid = store.register("theta", vec![1, 2], vec![1.0, -2.0]);
        let mut g = Graph::new(Precision::Double);
        let _th = g.param(&store, pid);
        let c = g.constant(Tensor::new(vec![1, 1], vec![5.0]));
        let loss = g.sum_all(c);
        g.backward(loss);
        g.accumulate_param_grads(&mut store);
        assert_eq!(store.get(pid).grad, vec![0.0, 0.0]);
    }

    #[test]
    fn backward_is_linear_in_loss() {
        // grads of (loss1 + loss2) equal grads of loss1 plus grads of loss2
        let vals = vec![0.3, -1.2, 2.0];
        let build = |which: u8| -> Vec<f64> {
            let mut store = ParamStore::new(Precision::Double);
            let pid = store.register("p", vec![1, 3], vals.clone());
            let mut g = Graph::new(Precision::Double);
            let th = g.param(&store, pid);
            let sq = g.mul(th, th);
            let l1 = g.sum_all(sq);
            let sig = g.sigmoid(th);
            let l2 = g.sum_all(sig);
            let loss = match which {
                0 => l1,
                1 => l2,
                _ => g.add(l1, l2),
            };
            g.backward(loss);
            g.accumulate_param_grads(&mut store);
            store.get(pid).grad.clone()
        };
        let g1 = build(0);
        let g2 = build(1);
        let gsum = build(2);
        for i in 0..3 {
            assert!((gsum[i] - (g1[i] + g2[i])).abs() < 1e-15);
        }
    }

    #[test]
    fn causal_conv_delta_kernel_is_identity() {
        let mut g = Graph::new(Precision::Double);
        let x = g.constant(Tensor::new(vec![3, 1], vec![1.0, 2.0, 3.0]));
        let w = g.constant(Tensor::new(vec![1, 2], vec![1.0, 0.0]));
        let b = g.zeros(vec![1]);
        let y = g.dw_conv_causal(x, w, b);
        assert_eq!(g.data(y), &[1.0, 2.0, 3.0]);

        // width-1 kernel [1] is also the identity
        let w1 = g.constant(Tensor::new(vec![1, 1], vec![1.0]));
        let y1 = g.dw_conv_causal(x, w1, b);
        assert_eq!(g.data(y1), &[1.0, 2.0, 3.0]);
    }

    #[test]
    fn causal_conv_shift_kernel() {
        // kernel [0,1] selects x[t−1] with zero left pad
        let mut g = Graph::new(Precision::Double);
        let x = g.constant(Tensor::new(vec![3, 1], vec![1.0, 2.0, 3.0]));
        let w = g.constant(Tensor::new(vec![1, 2], vec![0.0, 1.0]));
        let b = g.zeros(vec![1]);
        let y = g.dw_conv_causal(x, w, b);
        assert_eq!(g.data(y), &[0.0, 1.0, 2.0]);
    }

    #[test]
    fn patchify_sums_patch() {
        // constant video value v, all-ones 1×2×2 kernel, zero bias → 4v
        let v = 0.37;
        let mut g = Graph::new(Precision::Double);
        let video = g.constant(Tensor::new(vec![1, 1, 2, 2], vec![v; 4]));
        let kernel = g.constant(Tensor::new(vec![1, 1, 1, 2, 2], vec![1.0; 4]));
        let bias = g.zeros(vec![1]);
        let tok = g.patchify3d(video, kernel, bias);
        assert_eq!(g.shape(tok), &[1, 1]);
        assert!((g.data(tok)[0] - 4.0 * v).abs() < 1e-15);
    }

    #[test]
    fn take_rows_and_reverse_round_trip() {
        let mut g = Graph::new(Precision::Double);
        let x = g.constant(Tensor::new(vec![3, 2], vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]));
        let r = g.reverse_rows(x);
        let rr = g.reverse_rows(r);
        assert_eq!(g.data(rr), g.data(x));
    }

    #[test]
    fn cross_entropy_matches_closed_form() {
        let mut g = Graph::new(Precision::Double);
        let uniform = g.constant(Tensor::new(vec![1, 2], vec![0.0, 0.0]));
        let l = g.cross_entropy(uniform, 0);
        assert!((g.data(l)[0] - std::f64::consts::LN_2).abs() < 1e-15);

        let big = g.constant(Tensor::new(vec![1, 2], vec![30.0, -30.0]));
        let l2 = g.cross_entropy(big, 0);
        assert!(g.data(l2)[0].is_finite());
        assert!(g.data(l2)[0] < 1e-25);

        let one = g.constant(Tensor::new(vec![1, 2], vec![1.0, 0.0]));
        let l3 = g.cross_entropy(one, 0);
        assert!((g.data(l3)[0] - (1.0 + (-1.0f64).exp()).ln()).abs() < 1e-12);
        assert!((g.data(l3)[0] - 0.313262).abs() < 1e-6);
    }

    #[test]
    fn cross_entropy_shift_invariant() {
        let logits = [0.7, -1.3];
        for c in [-5.0, 0.0, 11.5] {
            let mut g = Graph::new(Precision::Double);
            let a = g.constant(Tensor::new(vec![1, 2], logits.to_vec()));
            let b = g.constant(Tensor::new(vec![1, 2], logits.iter().map(|v| v + c).collect()));
            let la = g.cross_entropy(a, 1);
            let lb = g.cross_entropy(b, 1);
            assert!((g.data(la)[0] - g.data(lb)[0]).abs() < 1e-12);
        }
    }

    #[test]
    fn matmul_associativity_small() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let mut g = Graph::new(Precision::Double);
            let a = g.constant(Tensor::new(
                vec![3, 4],
                (0..12).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            ));
            let b = g.constant(Tensor::new(
                vec![4, 2],
                (0..8).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            ));
            let c = g.constant(Tensor::new(
                vec![2, 5],
                (0..10).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            ));
            let ab = g.matmul(a, b);
            let ab_c = g.matmul(ab, c);
            let bc = g.matmul(b, c);
            let a_bc = g.matmul(a, bc);
            assert!(close(g.data(ab_c), g.data(a_bc), 1e-10));
        }
    }

    #[test]
    fn single_precision_rounds_through_f32() {
        let mut g = Graph::new(Precision::Single);
        let x = g.constant(Tensor::new(vec![1, 1], vec![0.1]));
        let y = g.affine(x, 3.0, 0.0);
        assert_eq!(g.data(y)[0], (0.1f32 * 3.0f32) as f64);
    }

    #[test]
    fn softmax_rows_sum_to_one() {
        let mut g = Graph::new(Precision::Double);
        let x = g.constant(Tensor::new(vec![2, 3], vec![1.0, 2.0, 3.0, -1.0, 0.0, 1.0]));
        let s = g.softmax_rows(x);
        let d = g.data(s);
        assert!((d[0..3].iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!((d[3..6].iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}
