//! Fully connected network with softmax cross-entropy output.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{LearningError, ModelVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    #[default]
    Relu,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MlpArchitecture {
    pub layer_sizes: Vec<usize>,
    #[serde(default)]
    pub activation: Activation,
}

/// Offsets of one dense layer inside the flat parameter vector.
#[derive(Debug, Clone, Copy)]
struct Layer {
    w: usize,
    b: usize,
    fan_in: usize,
    fan_out: usize,
}

impl MlpArchitecture {
    pub fn new(layer_sizes: Vec<usize>, activation: Activation) -> Result<Self, LearningError> {
        let arch = Self {
            layer_sizes,
            activation,
        };
        arch.validate()?;
        Ok(arch)
    }

    pub fn validate(&self) -> Result<(), LearningError> {
        if self.layer_sizes.len() < 2 {
            return Err(LearningError::Shape("an MLP needs at least two layers".into()));
        }
        if self.layer_sizes.contains(&0) {
            return Err(LearningError::Shape("layer sizes must be positive".into()));
        }
        if *self.layer_sizes.last().unwrap() < 2 {
            return Err(LearningError::Shape("softmax output needs >= 2 classes".into()));
        }
        Ok(())
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn num_classes(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }

    pub fn num_layers(&self) -> usize {
        self.layer_sizes.len() - 1
    }

    pub fn param_count(&self) -> usize {
        self.layer_sizes
            .windows(2)
            .map(|w| w[0] * w[1] + w[1])
            .sum()
    }

    fn layers(&self) -> Vec<Layer> {
        let mut off = 0;
        self.layer_sizes
            .windows(2)
            .map(|w| {
                let l = Layer {
                    w: off,
                    b: off + w[0] * w[1],
                    fan_in: w[0],
                    fan_out: w[1],
                };
                off = l.b + w[1];
                l
            })
            .collect()
    }

    /// Glorot-uniform weights, zero biases.
    pub fn init(&self, seed: u64) -> ModelVector {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut values = vec![0.0; self.param_count()];
        for l in self.layers() {
            let limit = (6.0 / (l.fan_in + l.fan_out) as f64).sqrt();
            for v in &mut values[l.w..l.b] {
                *v = rng.gen_range(-limit..=limit);
            }
        }
        ModelVector::new(values)
    }

    pub fn check_model(&self, model: &ModelVector) -> Result<(), LearningError> {
        if model.len() != self.param_count() {
            return Err(LearningError::Shape(format!(
                "model has {} parameters, architecture {:?} needs {}",
                model.len(),
                self.layer_sizes,
                self.param_count()
            )));
        }
        Ok(())
    }

    fn check_input(&self, x: &[f64], batch: usize) -> Result<(), LearningError> {
        if x.len() != batch * self.input_dim() {
            return Err(LearningError::Shape(format!(
                "input of {} values for batch {batch} of width {}",
                x.len(),
                self.input_dim()
            )));
        }
        Ok(())
    }

    /// Forward pass over a row-major `batch × input_dim` block. Returns the
    /// output logits (`batch × classes`) held in the workspace.
    pub fn forward<'w>(
        &self,
        params: &[f64],
        x: &[f64],
        batch: usize,
        ws: &'w mut Workspace,
    ) -> Result<&'w [f64], LearningError> {
        self.check_input(x, batch)?;
        if params.len() != self.param_count() {
            return Err(LearningError::Shape("parameter vector length".into()));
        }
        ws.prepare(self, batch);
        ws.acts[0][..x.len()].copy_from_slice(x);
        let layers = self.layers();
        let last = layers.len() - 1;
        for (i, l) in layers.iter().enumerate() {
            let (prev, next) = ws.acts.split_at_mut(i + 1);
            let a = &prev[i][..batch * l.fan_in];
            let z = &mut next[0][..batch * l.fan_out];
            for row in z.chunks_exact_mut(l.fan_out) {
                row.copy_from_slice(&params[l.b..l.b + l.fan_out]);
            }
            // z += a · Wᵀ
            gemm(
                batch,
                l.fan_in,
                l.fan_out,
                a,
                (l.fan_in, 1),
                &params[l.w..l.b],
                (1, l.fan_in),
                z,
                (l.fan_out, 1),
                1.0,
            );
            if i != last {
                match self.activation {
                    Activation::Relu => z.iter_mut().for_each(|v| *v = v.max(0.0)),
                }
            }
        }
        Ok(&ws.acts[layers.len()][..batch * self.num_classes()])
    }

    /// Mean cross-entropy over the batch; writes its gradient into `grad`.
    pub fn loss_and_grad(
        &self,
        params: &[f64],
        x: &[f64],
        labels: &[u8],
        ws: &mut Workspace,
        grad: &mut [f64],
    ) -> Result<f64, LearningError> {
        let batch = labels.len();
        if batch == 0 {
            return Err(LearningError::Empty("batch"));
        }
        if grad.len() != self.param_count() {
            return Err(LearningError::Shape("gradient buffer length".into()));
        }
        self.check_labels(labels)?;
        self.forward(params, x, batch, ws)?;
        let c = self.num_classes();
        let layers = self.layers();
        let nl = layers.len();
        let inv_b = 1.0 / batch as f64;

        // Output delta: (softmax − onehot) / B.
        let mut loss = 0.0;
        {
            let logits = &ws.acts[nl][..batch * c];
            let delta = &mut ws.deltas[nl - 1][..batch * c];
            for ((z, d), &y) in logits.chunks_exact(c).zip(delta.chunks_exact_mut(c)).zip(labels) {
                let lse = log_sum_exp(z);
                loss += lse - z[usize::from(y)];
                for (dj, zj) in d.iter_mut().zip(z) {
                    *dj = (zj - lse).exp() * inv_b;
                }
                d[usize::from(y)] -= inv_b;
            }
        }

        for i in (0..nl).rev() {
            let l = layers[i];
            let a_prev = &ws.acts[i][..batch * l.fan_in];
            let (lower, upper) = ws.deltas.split_at_mut(i);
            let delta = &upper[0][..batch * l.fan_out];
            // dW = δᵀ · a_prev
            gemm(
                l.fan_out,
                batch,
                l.fan_in,
                delta,
                (1, l.fan_out),
                a_prev,
                (l.fan_in, 1),
                &mut grad[l.w..l.b],
                (l.fan_in, 1),
                0.0,
            );
            let gb = &mut grad[l.b..l.b + l.fan_out];
            gb.iter_mut().for_each(|g| *g = 0.0);
            for row in delta.chunks_exact(l.fan_out) {
                for (g, d) in gb.iter_mut().zip(row) {
                    *g += d;
                }
            }
            if i > 0 {
                // δ_prev = (δ · W) ⊙ relu'(a_prev)
                let dprev = &mut lower[i - 1][..batch * l.fan_in];
                gemm(
                    batch,
                    l.fan_out,
                    l.fan_in,
                    delta,
                    (l.fan_out, 1),
                    &params[l.w..l.b],
                    (l.fan_in, 1),
                    dprev,
                    (l.fan_in, 1),
                    0.0,
                );
                for (d, a) in dprev.iter_mut().zip(a_prev) {
                    if *a <= 0.0 {
                        *d = 0.0;
                    }
                }
            }
        }
        Ok(loss * inv_b)
    }

    /// Per-sample cross-entropy and argmax-correctness for a batch.
    pub fn batch_loss(
        &self,
        params: &[f64],
        x: &[f64],
        labels: &[u8],
        ws: &mut Workspace,
    ) -> Result<(f64, usize), LearningError> {
        self.check_labels(labels)?;
        let c = self.num_classes();
        let logits = self.forward(params, x, labels.len(), ws)?;
        let mut loss = 0.0;
        let mut correct = 0;
        for (z, &y) in logits.chunks_exact(c).zip(labels) {
            loss += log_sum_exp(z) - z[usize::from(y)];
            if argmax(z) == usize::from(y) {
                correct += 1;
            }
        }
        Ok((loss, correct))
    }

    fn check_labels(&self, labels: &[u8]) -> Result<(), LearningError> {
        if let Some(&y) = labels.iter().find(|&&y| usize::from(y) >= self.num_classes()) {
            return Err(LearningError::Shape(format!(
                "label {y} outside [0, {})",
                self.num_classes()
            )));
        }
        Ok(())
    }
}

pub(crate) fn log_sum_exp(z: &[f64]) -> f64 {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + z.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

/// Index of the largest value; ties go to the lowest index.
pub(crate) fn argmax(z: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in z.iter().enumerate() {
        if *v > z[best] {
            best = i;
        }
    }
    best
}

/// Scratch buffers reused across batches.
#[derive(Debug, Default, Clone)]
pub struct Workspace {
    acts: Vec<Vec<f64>>,
    deltas: Vec<Vec<f64>>,
}

impl Workspace {
    pub fn new() -> Self {
        Self::default()
    }

    fn prepare(&mut self, arch: &MlpArchitecture, batch: usize) {
        let sizes = &arch.layer_sizes;
        self.acts.resize_with(sizes.len(), Vec::new);
        self.deltas.resize_with(sizes.len() - 1, Vec::new);
        for (buf, &n) in self.acts.iter_mut().zip(sizes) {
            if buf.len() < batch * n {
                buf.resize(batch * n, 0.0);
            }
        }
        for (buf, &n) in self.deltas.iter_mut().zip(&sizes[1..]) {
            if buf.len() < batch * n {
                buf.resize(batch * n, 0.0);
            }
        }
    }
}

/// Gradient buffer matching a parameter vector.
pub type Gradient = Vec<f64>;

/// `C ← A·B + β·C` for strided row/column layouts `(row_stride, col_stride)`.
#[allow(clippy::too_many_arguments)]
fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    (rsa, csa): (usize, usize),
    b: &[f64],
    (rsb, csb): (usize, usize),
    c: &mut [f64],
    (rsc, csc): (usize, usize),
    beta: f64,
) {
    if m == 0 || n == 0 {
        return;
    }
    let span = |rows: usize, cols: usize, rs: usize, cs: usize| (rows - 1) * rs + (cols - 1) * cs + 1;
    assert!(k == 0 || a.len() >= span(m, k, rsa, csa));
    assert!(k == 0 || b.len() >= span(k, n, rsb, csb));
    assert!(c.len() >= span(m, n, rsc, csc));
    // SAFETY: the asserts above bound every strided access inside the slices,
    // and `c` is uniquely borrowed so it cannot alias `a` or `b`.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa as isize,
            csa as isize,
            b.as_ptr(),
            rsb as isize,
            csb as isize,
            beta,
            c.as_mut_ptr(),
            rsc as isize,
            csc as isize,
        );
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Straightforward loop implementation used as an oracle.
    fn naive_logits(arch: &MlpArchitecture, p: &[f64], x: &[f64]) -> Vec<f64> {
        let mut a = x.to_vec();
        let mut off = 0;
        let n = arch.layer_sizes.len() - 1;
        for (li, w) in arch.layer_sizes.windows(2).enumerate() {
            let (fi, fo) = (w[0], w[1]);
            let mut z = vec![0.0; fo];
            for j in 0..fo {
                let mut s = p[off + fi * fo + j];
                for i in 0..fi {
                    s += p[off + j * fi + i] * a[i];
                }
                z[j] = if li + 1 < n { s.max(0.0) } else { s };
            }
            off += fi * fo + fo;
            a = z;
        }
        a
    }

    fn naive_loss(arch: &MlpArchitecture, p: &[f64], x: &[f64], y: u8) -> f64 {
        let z = naive_logits(arch, p, x);
        let m = z.iter().cloned().fold(f64::MIN, f64::max);
        let s: f64 = z.iter().map(|v| (v - m).exp()).sum();
        -(z[usize::from(y)] - m - s.ln())
    }

    fn random_vec(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
    }

    #[test]
    fn shapes_and_param_count() {
        let a = MlpArchitecture::new(vec![784, 64, 10], Activation::Relu).unwrap();
        assert_eq!(a.param_count(), 784 * 64 + 64 + 64 * 10 + 10);
        assert!(MlpArchitecture::new(vec![4], Activation::Relu).is_err());
        assert!(MlpArchitecture::new(vec![4, 0, 2], Activation::Relu).is_err());
        assert!(MlpArchitecture::new(vec![4, 1], Activation::Relu).is_err());
        assert!(a.check_model(&ModelVector::zeros(3)).is_err());
    }

    #[test]
    fn glorot_bounds_and_determinism() {
        let a = MlpArchitecture::new(vec![30, 20, 5], Activation::Relu).unwrap();
        let m = a.init(9);
        assert_eq!(m, a.init(9));
        assert_ne!(m, a.init(10));
        let l1 = (6.0f64 / 50.0).sqrt();
        assert!(m.values[..600].iter().all(|v| v.abs() <= l1));
        assert!(m.values[600..620].iter().all(|v| *v == 0.0));
        let l2 = (6.0f64 / 25.0).sqrt();
        assert!(m.values[620..720].iter().all(|v| v.abs() <= l2));
    }

    #[test]
    fn forward_matches_naive_oracle() {
        let a = MlpArchitecture::new(vec![7, 5, 4, 3], Activation::Relu).unwrap();
        let p = random_vec(a.param_count(), 1);
        let x = random_vec(7 * 6, 2);
        let mut ws = Workspace::new();
        let out = a.forward(&p, &x, 6, &mut ws).unwrap().to_vec();
        for r in 0..6 {
            let want = naive_logits(&a, &p, &x[r * 7..(r + 1) * 7]);
            for (u, v) in out[r * 3..(r + 1) * 3].iter().zip(&want) {
                assert!((u - v).abs() < 1e-12);
            }
        }
        let labels = [0u8, 1, 2, 0, 1, 2];
        let (loss, _) = a.batch_loss(&p, &x, &labels, &mut ws).unwrap();
        let want: f64 = (0..6).map(|r| naive_loss(&a, &p, &x[r * 7..(r + 1) * 7], labels[r])).sum();
        assert!((loss - want).abs() < 1e-9);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let a = MlpArchitecture::new(vec![6, 5, 3], Activation::Relu).unwrap();
        let p = random_vec(a.param_count(), 3);
        let x = random_vec(6 * 4, 4);
        let y = [0u8, 2, 1, 2];
        let mut ws = Workspace::new();
        let mut g = vec![0.0; a.param_count()];
        let l0 = a.loss_and_grad(&p, &x, &y, &mut ws, &mut g).unwrap();
        let mean = |q: &[f64]| {
            (0..4).map(|r| naive_loss(&a, q, &x[r * 6..(r + 1) * 6], y[r])).sum::<f64>() / 4.0
        };
        assert!((l0 - mean(&p)).abs() < 1e-12);
        let eps = 1e-5;
        for i in 0..p.len() {
            let mut q = p.clone();
            q[i] += eps;
            let up = mean(&q);
            q[i] -= 2.0 * eps;
            let fd = (up - mean(&q)) / (2.0 * eps);
            assert!((fd - g[i]).abs() <= 1e-6 + 1e-4 * fd.abs(), "param {i}: {fd} vs {}", g[i]);
        }
    }

    #[test]
    fn workspace_reuse_across_batch_sizes() {
        let a = MlpArchitecture::new(vec![3, 4, 2], Activation::Relu).unwrap();
        let p = random_vec(a.param_count(), 5);
        let x = random_vec(3 * 5, 6);
        let mut ws = Workspace::new();
        let big = a.forward(&p, &x, 5, &mut ws).unwrap().to_vec();
        let small = a.forward(&p, &x[..6], 2, &mut ws).unwrap().to_vec();
        assert_eq!(&big[..4], &small[..]);
        assert!(a.forward(&p, &x[..5], 2, &mut ws).is_err());
        assert!(a.batch_loss(&p, &x[..3], &[2], &mut ws).is_err());
    }

    #[test]
    fn log_sum_exp_is_stable() {
        assert!((log_sum_exp(&[1000.0, 1000.0]) - (1000.0 + 2f64.ln())).abs() < 1e-12);
        assert_eq!(argmax(&[1.0, 3.0, 3.0]), 1);
    }
}
