//! Reverse-mode differentiation over a recorded op tape, with
//! forward-over-reverse second-order support (Hessian-vector products).
//!
//! The tape is a topologically ordered DAG of tensor-valued ops. All
//! arithmetic is generic over [`Real`], instantiated with plain `f64`
//! for values/gradients and with [`Dual`] numbers for exact HVPs:
//! running the backward pass on dual inputs `x + eps*v` yields the
//! gradient in the value part and `H v` in the tangent part.

use std::ops::{Add, Div, Mul, Neg, Sub};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Scalar field the tape evaluates over.
pub trait Real:
    Copy
    + std::fmt::Debug
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    fn from_f64(v: f64) -> Self;
    fn value(self) -> f64;
    fn sqrt(self) -> Self;

    fn zero() -> Self {
        Self::from_f64(0.0)
    }
    fn one() -> Self {
        Self::from_f64(1.0)
    }
}

impl Real for f64 {
    fn from_f64(v: f64) -> Self {
        v
    }
    fn value(self) -> f64 {
        self
    }
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
}

/// First-order dual number: value plus directional tangent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dual {
    pub re: f64,
    pub dt: f64,
}

impl Dual {
    pub fn new(re: f64, dt: f64) -> Self {
        Dual { re, dt }
    }
}

impl Add for Dual {
    type Output = Dual;
    fn add(self, o: Dual) -> Dual {
        Dual::new(self.re + o.re, self.dt + o.dt)
    }
}
impl Sub for Dual {
    type Output = Dual;
    fn sub(self, o: Dual) -> Dual {
        Dual::new(self.re - o.re, self.dt - o.dt)
    }
}
impl Mul for Dual {
    type Output = Dual;
    fn mul(self, o: Dual) -> Dual {
        Dual::new(self.re * o.re, self.re * o.dt + self.dt * o.re)
    }
}
impl Div for Dual {
    type Output = Dual;
    fn div(self, o: Dual) -> Dual {
        Dual::new(self.re / o.re, (self.dt * o.re - self.re * o.dt) / (o.re * o.re))
    }
}
impl Neg for Dual {
    type Output = Dual;
    fn neg(self) -> Dual {
        Dual::new(-self.re, -self.dt)
    }
}

impl Real for Dual {
    fn from_f64(v: f64) -> Self {
        Dual::new(v, 0.0)
    }
    fn value(self) -> f64 {
        self.re
    }
    fn sqrt(self) -> Self {
        let r = self.re.sqrt();
        Dual::new(r, self.dt / (2.0 * r))
    }
}

/// Smoothing hyperparameter for the C-infinity ReLU replacement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoothingConfig {
    pub tau: f64,
}

impl SmoothingConfig {
    pub fn new(tau: f64) -> Result<Self> {
        if !(tau > 0.0) {
            return Err(Error::InvalidParam(format!("tau must be positive, got {tau}")));
        }
        Ok(SmoothingConfig { tau })
    }
}

impl Default for SmoothingConfig {
    fn default() -> Self {
        SmoothingConfig { tau: 1e-3 }
    }
}

/// h(z) = (z + sqrt(z^2 + tau)) / 2, a smooth ReLU with
/// sup |h - relu| <= sqrt(tau)/2 and strictly positive curvature.
pub fn smooth_relu<R: Real>(z: R, tau: f64) -> R {
    (z + (z * z + R::from_f64(tau)).sqrt()) * R::from_f64(0.5)
}

/// h'(z) = (1 + z / sqrt(z^2 + tau)) / 2.
pub fn smooth_relu_deriv<R: Real>(z: R, tau: f64) -> R {
    (R::one() + z / (z * z + R::from_f64(tau)).sqrt()) * R::from_f64(0.5)
}

/// h''(z) = tau / (2 (z^2 + tau)^{3/2}).
pub fn smooth_relu_second(z: f64, tau: f64) -> f64 {
    tau / (2.0 * (z * z + tau).powf(1.5))
}

/// Recorded tensor operation. Parameters (weights) live on the node.
#[derive(Debug, Clone)]
pub enum OpKind {
    /// The differentiable input (one per tape).
    Input,
    /// y = W x + b over a flat vector; weight shape [out, in].
    Affine { weight: Tensor, bias: Tensor },
    /// 2-D convolution over [h, w, c] layout; weight shape [oc, kh, kw, ic].
    Conv2d { weight: Tensor, bias: Tensor, stride: usize, pad: usize },
    /// Non-overlapping average pooling over [h, w, c]; h, w divisible by kernel.
    AvgPool2d { kernel: usize },
    /// Elementwise smooth ReLU.
    SmoothRelu { tau: f64 },
    /// Shape-only reshape to a flat vector.
    Flatten,
    /// Elementwise sum of two parents with equal shapes.
    Add,
    /// Elementwise product of two parents with equal shapes.
    Mul,
    /// y = c * x.
    Scale(f64),
}

#[derive(Debug, Clone)]
pub struct Node {
    pub op: OpKind,
    pub parents: Vec<usize>,
    pub shape: Vec<usize>,
}

/// Recorded computation of a classifier forward pass. Nodes are in
/// topological order (parents of node i have index < i); replaying the
/// tape on identical inputs reproduces values bit-exactly.
#[derive(Debug, Clone)]
pub struct Tape {
    nodes: Vec<Node>,
    input_id: usize,
    output_id: usize,
}

fn numel(shape: &[usize]) -> usize {
    shape.iter().product()
}

impl Tape {
    /// Fresh tape with a single input node of the given shape.
    pub fn new(input_shape: Vec<usize>) -> Self {
        let node = Node { op: OpKind::Input, parents: vec![], shape: input_shape };
        Tape { nodes: vec![node], input_id: 0, output_id: 0 }
    }

    pub fn input_id(&self) -> usize {
        self.input_id
    }

    pub fn input_shape(&self) -> &[usize] {
        &self.nodes[self.input_id].shape
    }

    pub fn input_len(&self) -> usize {
        numel(self.input_shape())
    }

    pub fn output_len(&self) -> usize {
        numel(&self.nodes[self.output_id].shape)
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn set_output(&mut self, id: usize) {
        assert!(id < self.nodes.len());
        self.output_id = id;
    }

    fn push(&mut self, op: OpKind, parents: Vec<usize>, shape: Vec<usize>) -> usize {
        let id = self.nodes.len();
        self.nodes.push(Node { op, parents, shape });
        self.output_id = id;
        id
    }

    fn shape_of(&self, id: usize) -> &[usize] {
        &self.nodes[id].shape
    }

    pub fn affine(&mut self, parent: usize, weight: Tensor, bias: Tensor) -> Result<usize> {
        let ws = weight.shape();
        if ws.len() != 2 {
            return Err(Error::InvalidParam("affine weight must be 2-d".into()));
        }
        let (out, inp) = (ws[0], ws[1]);
        if numel(self.shape_of(parent)) != inp {
            return Err(Error::ShapeMismatch {
                expected: vec![inp],
                got: self.shape_of(parent).to_vec(),
            });
        }
        if bias.len() != out {
            return Err(Error::ShapeMismatch { expected: vec![out], got: bias.shape().to_vec() });
        }
        Ok(self.push(OpKind::Affine { weight, bias }, vec![parent], vec![out]))
    }

    pub fn conv2d(
        &mut self,
        parent: usize,
        weight: Tensor,
        bias: Tensor,
        stride: usize,
        pad: usize,
    ) -> Result<usize> {
        let ps = self.shape_of(parent).to_vec();
        if ps.len() != 3 {
            return Err(Error::InvalidParam("conv2d input must be [h, w, c]".into()));
        }
        let ws = weight.shape().to_vec();
        if ws.len() != 4 || ws[3] != ps[2] {
            return Err(Error::InvalidParam(format!(
                "conv2d weight must be [oc, kh, kw, ic={}], got {:?}",
                ps[2], ws
            )));
        }
        if stride == 0 {
            return Err(Error::InvalidParam("conv2d stride must be >= 1".into()));
        }
        let (oc, kh, kw) = (ws[0], ws[1], ws[2]);
        if bias.len() != oc {
            return Err(Error::ShapeMismatch { expected: vec![oc], got: bias.shape().to_vec() });
        }
        let h = ps[0] + 2 * pad;
        let w = ps[1] + 2 * pad;
        if h < kh || w < kw {
            return Err(Error::InvalidParam("conv2d kernel larger than padded input".into()));
        }
        let oh = (h - kh) / stride + 1;
        let ow = (w - kw) / stride + 1;
        Ok(self.push(OpKind::Conv2d { weight, bias, stride, pad }, vec![parent], vec![oh, ow, oc]))
    }

    pub fn avg_pool2d(&mut self, parent: usize, kernel: usize) -> Result<usize> {
        let ps = self.shape_of(parent).to_vec();
        if ps.len() != 3 {
            return Err(Error::InvalidParam("avgpool input must be [h, w, c]".into()));
        }
        if kernel == 0 || ps[0] % kernel != 0 || ps[1] % kernel != 0 {
            return Err(Error::InvalidParam(format!(
                "avgpool kernel {kernel} must divide spatial dims {:?}",
                &ps[..2]
            )));
        }
        let shape = vec![ps[0] / kernel, ps[1] / kernel, ps[2]];
        Ok(self.push(OpKind::AvgPool2d { kernel }, vec![parent], shape))
    }

    pub fn smooth_relu(&mut self, parent: usize, tau: f64) -> Result<usize> {
        SmoothingConfig::new(tau)?;
        let shape = self.shape_of(parent).to_vec();
        Ok(self.push(OpKind::SmoothRelu { tau }, vec![parent], shape))
    }

    pub fn flatten(&mut self, parent: usize) -> usize {
        let n = numel(self.shape_of(parent));
        self.push(OpKind::Flatten, vec![parent], vec![n])
    }

    pub fn add(&mut self, a: usize, b: usize) -> Result<usize> {
        if numel(self.shape_of(a)) != numel(self.shape_of(b)) {
            return Err(Error::ShapeMismatch {
                expected: self.shape_of(a).to_vec(),
                got: self.shape_of(b).to_vec(),
            });
        }
        let shape = self.shape_of(a).to_vec();
        Ok(self.push(OpKind::Add, vec![a, b], shape))
    }

    pub fn mul(&mut self, a: usize, b: usize) -> Result<usize> {
        if numel(self.shape_of(a)) != numel(self.shape_of(b)) {
            return Err(Error::ShapeMismatch {
                expected: self.shape_of(a).to_vec(),
                got: self.shape_of(b).to_vec(),
            });
        }
        let shape = self.shape_of(a).to_vec();
        Ok(self.push(OpKind::Mul, vec![a, b], shape))
    }

    pub fn scale(&mut self, parent: usize, c: f64) -> usize {
        let shape = self.shape_of(parent).to_vec();
        self.push(OpKind::Scale(c), vec![parent], shape)
    }

    /// Evaluate every node on the given input, in recorded order.
    pub fn eval<R: Real>(&self, input: &[R]) -> Result<Vec<Vec<R>>> {
        if input.len() != self.input_len() {
            return Err(Error::ShapeMismatch {
                expected: self.input_shape().to_vec(),
                got: vec![input.len()],
            });
        }
        let mut values: Vec<Vec<R>> = Vec::with_capacity(self.nodes.len());
        for node in &self.nodes {
            let out = match &node.op {
                OpKind::Input => input.to_vec(),
                OpKind::Affine { weight, bias } => {
                    let x = &values[node.parents[0]];
                    affine_fwd(weight, bias, x)
                }
                OpKind::Conv2d { weight, bias, stride, pad } => {
                    let x = &values[node.parents[0]];
                    let in_shape = self.shape_of(node.parents[0]);
                    conv2d_fwd(weight, bias, *stride, *pad, in_shape, &node.shape, x)
                }
                OpKind::AvgPool2d { kernel } => {
                    let x = &values[node.parents[0]];
                    let in_shape = self.shape_of(node.parents[0]);
                    avgpool_fwd(*kernel, in_shape, x)
                }
                OpKind::SmoothRelu { tau } => {
                    values[node.parents[0]].iter().map(|&z| smooth_relu(z, *tau)).collect()
                }
                OpKind::Flatten => values[node.parents[0]].clone(),
                OpKind::Add => {
                    let a = &values[node.parents[0]];
                    let b = &values[node.parents[1]];
                    a.iter().zip(b).map(|(&x, &y)| x + y).collect()
                }
                OpKind::Mul => {
                    let a = &values[node.parents[0]];
                    let b = &values[node.parents[1]];
                    a.iter().zip(b).map(|(&x, &y)| x * y).collect()
                }
                OpKind::Scale(c) => {
                    let c = R::from_f64(*c);
                    values[node.parents[0]].iter().map(|&x| x * c).collect()
                }
            };
            values.push(out);
        }
        Ok(values)
    }

    /// Reverse pass from a seed cotangent on the output node. Returns the
    /// input gradient and, when requested, per-node (weight, bias) gradients
    /// for parameterized ops (used by the trainer).
    pub fn backward<R: Real>(
        &self,
        values: &[Vec<R>],
        seed: &[R],
        with_params: bool,
    ) -> (Vec<R>, Vec<Option<(Vec<R>, Vec<R>)>>) {
        let n = self.nodes.len();
        let mut adj: Vec<Option<Vec<R>>> = vec![None; n];
        adj[self.output_id] = Some(seed.to_vec());
        let mut pgrads: Vec<Option<(Vec<R>, Vec<R>)>> = vec![None; n];

        for id in (0..n).rev() {
            let dy = match adj[id].take() {
                Some(v) => v,
                None => continue,
            };
            let node = &self.nodes[id];
            match &node.op {
                OpKind::Input => {
                    // accumulate back in case the input feeds several ops
                    accumulate(&mut adj[id], &dy);
                }
                OpKind::Affine { weight, bias } => {
                    let p = node.parents[0];
                    let x = &values[p];
                    let (out, inp) = (bias.len(), x.len());
                    let w = weight.data();
                    let mut dx = vec![R::zero(); inp];
                    for o in 0..out {
                        let g = dy[o];
                        let row = &w[o * inp..(o + 1) * inp];
                        for i in 0..inp {
                            dx[i] = dx[i] + g * R::from_f64(row[i]);
                        }
                    }
                    if with_params {
                        let mut dw = vec![R::zero(); out * inp];
                        for o in 0..out {
                            let g = dy[o];
                            for i in 0..inp {
                                dw[o * inp + i] = dw[o * inp + i] + g * x[i];
                            }
                        }
                        pgrads[id] = Some((dw, dy.clone()));
                    }
                    accumulate(&mut adj[p], &dx);
                }
                OpKind::Conv2d { weight, bias: _, stride, pad } => {
                    let p = node.parents[0];
                    let in_shape = self.shape_of(p);
                    let (dx, dparams) = conv2d_bwd(
                        weight,
                        *stride,
                        *pad,
                        in_shape,
                        &node.shape,
                        &values[p],
                        &dy,
                        with_params,
                    );
                    if let Some(dp) = dparams {
                        pgrads[id] = Some(dp);
                    }
                    accumulate(&mut adj[p], &dx);
                }
                OpKind::AvgPool2d { kernel } => {
                    let p = node.parents[0];
                    let dx = avgpool_bwd(*kernel, self.shape_of(p), &dy);
                    accumulate(&mut adj[p], &dx);
                }
                OpKind::SmoothRelu { tau } => {
                    let p = node.parents[0];
                    let x = &values[p];
                    let dx: Vec<R> = x
                        .iter()
                        .zip(&dy)
                        .map(|(&z, &g)| g * smooth_relu_deriv(z, *tau))
                        .collect();
                    accumulate(&mut adj[p], &dx);
                }
                OpKind::Flatten => {
                    accumulate(&mut adj[node.parents[0]], &dy);
                }
                OpKind::Add => {
                    accumulate(&mut adj[node.parents[0]], &dy);
                    accumulate(&mut adj[node.parents[1]], &dy);
                }
                OpKind::Mul => {
                    let (pa, pb) = (node.parents[0], node.parents[1]);
                    let da: Vec<R> = dy.iter().zip(&values[pb]).map(|(&g, &b)| g * b).collect();
                    let db: Vec<R> = dy.iter().zip(&values[pa]).map(|(&g, &a)| g * a).collect();
                    accumulate(&mut adj[pa], &da);
                    accumulate(&mut adj[pb], &db);
                }
                OpKind::Scale(c) => {
                    let c = R::from_f64(*c);
                    let dx: Vec<R> = dy.iter().map(|&g| g * c).collect();
                    accumulate(&mut adj[node.parents[0]], &dx);
                }
            }
        }
        let din = adj[self.input_id].take().unwrap_or_else(|| vec![R::zero(); self.input_len()]);
        (din, pgrads)
    }
}

fn accumulate<R: Real>(slot: &mut Option<Vec<R>>, dv: &[R]) {
    match slot {
        Some(acc) => {
            for (a, &d) in acc.iter_mut().zip(dv) {
                *a = *a + d;
            }
        }
        None => *slot = Some(dv.to_vec()),
    }
}

fn affine_fwd<R: Real>(weight: &Tensor, bias: &Tensor, x: &[R]) -> Vec<R> {
    let out = bias.len();
    let inp = x.len();
    let w = weight.data();
    let mut y = Vec::with_capacity(out);
    for o in 0..out {
        let mut acc = R::from_f64(bias.get(o));
        let row = &w[o * inp..(o + 1) * inp];
        for i in 0..inp {
            acc = acc + R::from_f64(row[i]) * x[i];
        }
        y.push(acc);
    }
    y
}

fn conv2d_fwd<R: Real>(
    weight: &Tensor,
    bias: &Tensor,
    stride: usize,
    pad: usize,
    in_shape: &[usize],
    out_shape: &[usize],
    x: &[R],
) -> Vec<R> {
    let (h, w, ic) = (in_shape[0], in_shape[1], in_shape[2]);
    let (oh, ow, oc) = (out_shape[0], out_shape[1], out_shape[2]);
    let ws = weight.shape();
    let (kh, kw) = (ws[1], ws[2]);
    let wd = weight.data();
    let mut y = vec![R::zero(); oh * ow * oc];
    for r in 0..oh {
        for s in 0..ow {
            for o in 0..oc {
                let mut acc = R::from_f64(bias.get(o));
                for kr in 0..kh {
                    let ir = (r * stride + kr) as isize - pad as isize;
                    if ir < 0 || ir as usize >= h {
                        continue;
                    }
                    for ks in 0..kw {
                        let is = (s * stride + ks) as isize - pad as isize;
                        if is < 0 || is as usize >= w {
                            continue;
                        }
                        let xoff = (ir as usize * w + is as usize) * ic;
                        let woff = ((o * kh + kr) * kw + ks) * ic;
                        for c in 0..ic {
                            acc = acc + R::from_f64(wd[woff + c]) * x[xoff + c];
                        }
                    }
                }
                y[(r * ow + s) * oc + o] = acc;
            }
        }
    }
    y
}

#[allow(clippy::too_many_arguments)]
fn conv2d_bwd<R: Real>(
    weight: &Tensor,
    stride: usize,
    pad: usize,
    in_shape: &[usize],
    out_shape: &[usize],
    x: &[R],
    dy: &[R],
    with_params: bool,
) -> (Vec<R>, Option<(Vec<R>, Vec<R>)>) {
    let (h, w, ic) = (in_shape[0], in_shape[1], in_shape[2]);
    let (oh, ow, oc) = (out_shape[0], out_shape[1], out_shape[2]);
    let ws = weight.shape();
    let (kh, kw) = (ws[1], ws[2]);
    let wd = weight.data();
    let mut dx = vec![R::zero(); h * w * ic];
    let mut dw = if with_params { vec![R::zero(); wd.len()] } else { Vec::new() };
    let mut db = if with_params { vec![R::zero(); oc] } else { Vec::new() };
    for r in 0..oh {
        for s in 0..ow {
            for o in 0..oc {
                let g = dy[(r * ow + s) * oc + o];
                if with_params {
                    db[o] = db[o] + g;
                }
                for kr in 0..kh {
                    let ir = (r * stride + kr) as isize - pad as isize;
                    if ir < 0 || ir as usize >= h {
                        continue;
                    }
                    for ks in 0..kw {
                        let is = (s * stride + ks) as isize - pad as isize;
                        if is < 0 || is as usize >= w {
                            continue;
                        }
                        let xoff = (ir as usize * w + is as usize) * ic;
                        let woff = ((o * kh + kr) * kw + ks) * ic;
                        for c in 0..ic {
                            dx[xoff + c] = dx[xoff + c] + g * R::from_f64(wd[woff + c]);
                            if with_params {
                                dw[woff + c] = dw[woff + c] + g * x[xoff + c];
                            }
                        }
                    }
                }
            }
        }
    }
    let params = if with_params { Some((dw, db)) } else { None };
    (dx, params)
}

fn avgpool_fwd<R: Real>(kernel: usize, in_shape: &[usize], x: &[R]) -> Vec<R> {
    let (h, w, c) = (in_shape[0], in_shape[1], in_shape[2]);
    let (oh, ow) = (h / kernel, w / kernel);
    let inv = R::from_f64(1.0 / (kernel * kernel) as f64);
    let mut y = vec![R::zero(); oh * ow * c];
    for r in 0..oh {
        for s in 0..ow {
            for ch in 0..c {
                let mut acc = R::zero();
                for kr in 0..kernel {
                    for ks in 0..kernel {
                        acc = acc + x[((r * kernel + kr) * w + s * kernel + ks) * c + ch];
                    }
                }
                y[(r * ow + s) * c + ch] = acc * inv;
            }
        }
    }
    y
}

fn avgpool_bwd<R: Real>(kernel: usize, in_shape: &[usize], dy: &[R]) -> Vec<R> {
    let (h, w, c) = (in_shape[0], in_shape[1], in_shape[2]);
    let (oh, ow) = (h / kernel, w / kernel);
    let inv = R::from_f64(1.0 / (kernel * kernel) as f64);
    let mut dx = vec![R::zero(); h * w * c];
    for r in 0..oh {
        for s in 0..ow {
            for ch in 0..c {
                let g = dy[(r * ow + s) * c + ch] * inv;
                for kr in 0..kernel {
                    for ks in 0..kernel {
                        dx[((r * kernel + kr) * w + s * kernel + ks) * c + ch] = g;
                    }
                }
            }
        }
    }
    dx
}

/// Evaluate the tape's logits.
pub fn forward(tape: &Tape, input: &Tensor) -> Result<Tensor> {
    let values = tape.eval::<f64>(input.data())?;
    let out = values[tape.output_id].clone();
    Tensor::new(tape.nodes[tape.output_id].shape.clone(), out)
}

fn class_seed<R: Real>(tape: &Tape, class: usize) -> Result<Vec<R>> {
    let c = tape.output_len();
    if class >= c {
        return Err(Error::ClassIndex { index: class, classes: c });
    }
    let mut seed = vec![R::zero(); c];
    seed[class] = R::one();
    Ok(seed)
}

/// Exact input gradient of logit `class`.
pub fn gradient(tape: &Tape, input: &Tensor, class: usize) -> Result<Tensor> {
    let values = tape.eval::<f64>(input.data())?;
    let seed = class_seed::<f64>(tape, class)?;
    let (din, _) = tape.backward(&values, &seed, false);
    Ok(Tensor::from_vec(din))
}

/// Exact Hessian-vector product H_{f_class} v via forward-over-reverse.
pub fn hvp(tape: &Tape, input: &Tensor, class: usize, v: &Tensor) -> Result<Tensor> {
    if v.len() != tape.input_len() {
        return Err(Error::ShapeMismatch {
            expected: tape.input_shape().to_vec(),
            got: v.shape().to_vec(),
        });
    }
    let dual_in: Vec<Dual> =
        input.data().iter().zip(v.data()).map(|(&x, &t)| Dual::new(x, t)).collect();
    let values = tape.eval::<Dual>(&dual_in)?;
    let seed = class_seed::<Dual>(tape, class)?;
    let (din, _) = tape.backward(&values, &seed, false);
    Ok(Tensor::from_vec(din.into_iter().map(|d| d.dt).collect()))
}

/// Row i of the Hessian of logit `class` (equals hvp with v = e_i).
pub fn hessian_row(tape: &Tape, input: &Tensor, class: usize, i: usize) -> Result<Tensor> {
    let d = tape.input_len();
    if i >= d {
        return Err(Error::PixelIndex { index: i, dim: d });
    }
    let mut e = Tensor::zeros(vec![d]);
    e.data_mut()[i] = 1.0;
    hvp(tape, input, class, &e)
}
