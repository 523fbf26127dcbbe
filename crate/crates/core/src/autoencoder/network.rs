//! Dense rectifier network, generic over the float type so the f32 training
//! path and the f64 gradient probe share one implementation.

use std::ops::{Add, AddAssign, Mul, Range, Sub};

pub(crate) trait Scalar:
    Copy
    + Default
    + PartialOrd
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + AddAssign
    + Send
    + Sync
    + 'static
{
    const ZERO: Self;
    fn from_f64(v: f64) -> Self;
    fn to_f64(self) -> f64;

    /// `C = alpha * A B + beta * C` with arbitrary strides.
    #[allow(clippy::too_many_arguments)]
    fn gemm(
        m: usize,
        k: usize,
        n: usize,
        a: &[Self],
        rsa: isize,
        csa: isize,
        b: &[Self],
        rsb: isize,
        csb: isize,
        beta: Self,
        c: &mut [Self],
    );
}

macro_rules! impl_scalar {
    ($t:ty, $gemm:path) => {
        impl Scalar for $t {
            const ZERO: Self = 0.0;
            fn from_f64(v: f64) -> Self {
                v as $t
            }
            fn to_f64(self) -> f64 {
                self as f64
            }
            fn gemm(
                m: usize,
                k: usize,
                n: usize,
                a: &[Self],
                rsa: isize,
                csa: isize,
                b: &[Self],
                rsb: isize,
                csb: isize,
                beta: Self,
                c: &mut [Self],
            ) {
                assert!(a.len() >= m * k && b.len() >= k * n && c.len() >= m * n);
                // SAFETY: the slices cover every element addressed by the
                // strides given (checked above for the dense layouts we use).
                unsafe {
                    $gemm(
                        m,
                        k,
                        n,
                        1.0,
                        a.as_ptr(),
                        rsa,
                        csa,
                        b.as_ptr(),
                        rsb,
                        csb,
                        beta,
                        c.as_mut_ptr(),
                        n as isize,
                        1,
                    )
                }
            }
        }
    };
}

impl_scalar!(f32, matrixmultiply::sgemm);
impl_scalar!(f64, matrixmultiply::dgemm);

#[inline]
fn relu<T: Scalar>(x: T) -> T {
    if x > T::ZERO {
        x
    } else {
        T::ZERO
    }
}

/// One affine layer followed by a rectifier. Weights are `fan_in × fan_out`,
/// row-major.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Dense<T> {
    pub fan_in: usize,
    pub fan_out: usize,
    pub weights: Vec<T>,
    pub bias: Option<Vec<T>>,
}

impl<T: Scalar> Dense<T> {
    pub fn cast<U: Scalar>(&self) -> Dense<U> {
        Dense {
            fan_in: self.fan_in,
            fan_out: self.fan_out,
            weights: self.weights.iter().map(|w| U::from_f64(w.to_f64())).collect(),
            bias: self
                .bias
                .as_ref()
                .map(|b| b.iter().map(|v| U::from_f64(v.to_f64())).collect()),
        }
    }

    /// `relu(input · W + bias + offset)` for `batch` rows.
    fn apply(&self, input: &[T], batch: usize, offset: Option<&[T]>) -> Vec<T> {
        let mut out = vec![T::ZERO; batch * self.fan_out];
        T::gemm(
            batch,
            self.fan_in,
            self.fan_out,
            input,
            self.fan_in as isize,
            1,
            &self.weights,
            self.fan_out as isize,
            1,
            T::ZERO,
            &mut out,
        );
        for row in out.chunks_exact_mut(self.fan_out) {
            if let Some(bias) = &self.bias {
                for (z, b) in row.iter_mut().zip(bias) {
                    *z += *b;
                }
            }
            if let Some(offset) = offset {
                for (z, o) in row.iter_mut().zip(offset) {
                    *z += *o;
                }
            }
            for z in row.iter_mut() {
                *z = relu(*z);
            }
        }
        out
    }
}

/// Per-layer parameter gradients.
#[derive(Debug, Clone)]
pub(crate) struct Gradients<T> {
    pub weights: Vec<Vec<T>>,
    pub biases: Vec<Option<Vec<T>>>,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Network<T> {
    pub layers: Vec<Dense<T>>,
}

impl<T: Scalar> Network<T> {
    pub fn cast<U: Scalar>(&self) -> Network<U> {
        Network {
            layers: self.layers.iter().map(Dense::cast).collect(),
        }
    }

    pub fn zero_gradients(&self) -> Gradients<T> {
        Gradients {
            weights: self
                .layers
                .iter()
                .map(|l| vec![T::ZERO; l.weights.len()])
                .collect(),
            biases: self
                .layers
                .iter()
                .map(|l| l.bias.as_ref().map(|b| vec![T::ZERO; b.len()]))
                .collect(),
        }
    }

    /// Runs `layers[range]` on `batch` rows. `offset` is added to the
    /// pre-activation of layer `offset_at` when that layer is in range.
    pub fn forward_range(
        &self,
        input: &[T],
        batch: usize,
        range: Range<usize>,
        offset: Option<(usize, &[T])>,
    ) -> Vec<T> {
        let mut current = input.to_vec();
        for idx in range {
            let off = offset.and_then(|(at, o)| (at == idx).then_some(o));
            current = self.layers[idx].apply(&current, batch, off);
        }
        current
    }

    /// Full forward pass keeping every layer's output (for backprop).
    pub fn forward_trace(&self, input: &[T], batch: usize) -> Vec<Vec<T>> {
        let mut outputs: Vec<Vec<T>> = Vec::with_capacity(self.layers.len());
        for (idx, layer) in self.layers.iter().enumerate() {
            let x = if idx == 0 { input } else { &outputs[idx - 1] };
            let y = layer.apply(x, batch, None);
            outputs.push(y);
        }
        outputs
    }

    /// Backpropagates `d_output` (gradient of the loss w.r.t. the final layer
    /// output) through a trace from [`Network::forward_trace`], overwriting
    /// `grads`.
    pub fn backward(
        &self,
        input: &[T],
        trace: &[Vec<T>],
        batch: usize,
        d_output: Vec<T>,
        grads: &mut Gradients<T>,
    ) {
        let mut delta = d_output;
        for idx in (0..self.layers.len()).rev() {
            let layer = &self.layers[idx];
            // Rectifier derivative: output > 0 exactly where pre-activation > 0.
            for (d, a) in delta.iter_mut().zip(&trace[idx]) {
                if !(*a > T::ZERO) {
                    *d = T::ZERO;
                }
            }
            let x: &[T] = if idx == 0 { input } else { &trace[idx - 1] };
            // dW = xᵀ · delta
            T::gemm(
                layer.fan_in,
                batch,
                layer.fan_out,
                x,
                1,
                layer.fan_in as isize,
                &delta,
                layer.fan_out as isize,
                1,
                T::ZERO,
                &mut grads.weights[idx],
            );
            if let Some(db) = grads.biases[idx].as_mut() {
                db.iter_mut().for_each(|v| *v = T::ZERO);
                for row in delta.chunks_exact(layer.fan_out) {
                    for (g, d) in db.iter_mut().zip(row) {
                        *g += *d;
                    }
                }
            }
            if idx > 0 {
                // dx = delta · Wᵀ
                let mut dx = vec![T::ZERO; batch * layer.fan_in];
                T::gemm(
                    batch,
                    layer.fan_out,
                    layer.fan_in,
                    &delta,
                    layer.fan_out as isize,
                    1,
                    &layer.weights,
                    1,
                    layer.fan_out as isize,
                    T::ZERO,
                    &mut dx,
                );
                delta = dx;
            }
        }
    }

    /// Mean squared error of reconstructing `input` and, optionally, its
    /// gradient.
    pub fn mse(&self, input: &[T], batch: usize, grads: Option<&mut Gradients<T>>) -> f64 {
        let trace = self.forward_trace(input, batch);
        let output = trace.last().expect("network has layers");
        let count = output.len() as f64;
        let mut loss = 0.0;
        let mut d_output = Vec::with_capacity(if grads.is_some() { output.len() } else { 0 });
        let scale = T::from_f64(2.0 / count);
        for (y, x) in output.iter().zip(input) {
            let diff = *y - *x;
            let d = diff.to_f64();
            loss += d * d;
            if grads.is_some() {
                d_output.push(scale * diff);
            }
        }
        if let Some(grads) = grads {
            self.backward(input, &trace, batch, d_output, grads);
        }
        loss / count
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> Network<f64> {
        Network {
            layers: vec![
                Dense {
                    fan_in: 3,
                    fan_out: 2,
                    weights: vec![0.5, -0.2, 0.1, 0.4, -0.3, 0.8],
                    bias: Some(vec![0.05, 0.1]),
                },
                Dense {
                    fan_in: 2,
                    fan_out: 3,
                    weights: vec![0.7, 0.2, -0.1, 0.3, 0.9, 0.6],
                    bias: None,
                },
            ],
        }
    }

    #[test]
    fn forward_matches_hand_computation() {
        let net = tiny();
        let x = [1.0, 2.0, 3.0];
        // hidden = relu(x·W0 + b0)
        let h0 = (1.0 * 0.5 + 2.0 * 0.1 + 3.0 * -0.3 + 0.05f64).max(0.0);
        let h1 = (1.0 * -0.2 + 2.0 * 0.4 + 3.0 * 0.8 + 0.1f64).max(0.0);
        let expected = [
            (h0 * 0.7 + h1 * 0.3f64).max(0.0),
            (h0 * 0.2 + h1 * 0.9f64).max(0.0),
            (h0 * -0.1 + h1 * 0.6f64).max(0.0),
        ];
        let y = net.forward_range(&x, 1, 0..2, None);
        for (a, b) in y.iter().zip(&expected) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn split_forward_equals_full_forward() {
        let net = tiny();
        let x = [0.3, 0.1, 0.9, 1.0, 0.0, 0.5];
        let full = net.forward_range(&x, 2, 0..2, None);
        let mid = net.forward_range(&x, 2, 0..1, None);
        let split = net.forward_range(&mid, 2, 1..2, None);
        assert_eq!(full, split);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let net = tiny();
        let x = [0.3, 0.1, 0.9, 1.0, 0.2, 0.5];
        let mut grads = net.zero_gradients();
        net.mse(&x, 2, Some(&mut grads));
        let eps = 1e-6;
        for layer in 0..2 {
            for i in 0..net.layers[layer].weights.len() {
                let mut plus = net.clone();
                plus.layers[layer].weights[i] += eps;
                let mut minus = net.clone();
                minus.layers[layer].weights[i] -= eps;
                let fd = (plus.mse(&x, 2, None) - minus.mse(&x, 2, None)) / (2.0 * eps);
                let an = grads.weights[layer][i];
                assert!((fd - an).abs() < 1e-7, "layer {layer} weight {i}: {fd} vs {an}");
            }
        }
        let b = grads.biases[0].as_ref().unwrap();
        for i in 0..2 {
            let mut plus = net.clone();
            plus.layers[0].bias.as_mut().unwrap()[i] += eps;
            let mut minus = net.clone();
            minus.layers[0].bias.as_mut().unwrap()[i] -= eps;
            let fd = (plus.mse(&x, 2, None) - minus.mse(&x, 2, None)) / (2.0 * eps);
            assert!((fd - b[i]).abs() < 1e-7);
        }
    }
}
