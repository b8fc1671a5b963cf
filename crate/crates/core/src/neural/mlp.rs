use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::{Rng, RngExt};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Output nonlinearity of the last layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Head {
    Identity,
    /// `x ↦ (tanh(x) + 1) / 2`, mapping onto `(0, 1)`.
    Squash,
}

/// Fully connected layer computing `x · weight + bias` for row-vector `x`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense<T> {
    /// `inputs × outputs`, row-major.
    pub weight: Array2<T>,
    pub bias: Array1<T>,
}

impl<T: Scalar> Dense<T> {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            weight: Array2::zeros((inputs, outputs)),
            bias: Array1::zeros(outputs),
        }
    }

    pub fn inputs(&self) -> usize {
        self.weight.nrows()
    }

    pub fn outputs(&self) -> usize {
        self.weight.ncols()
    }
}

/// Multi-layer perceptron with rectifier hidden units.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp<T> {
    layers: Vec<Dense<T>>,
    head: Head,
}

/// Activations recorded by a forward pass, consumed by the backward pass.
#[derive(Debug, Clone)]
pub struct Tape<T> {
    /// `acts[0]` is the input batch; `acts[l + 1]` is the output of layer `l`
    /// after its nonlinearity.
    acts: Vec<Array2<T>>,
}

impl<T: Scalar> Tape<T> {
    pub fn output(&self) -> &Array2<T> {
        self.acts.last().expect("tape holds at least the input")
    }
}

/// Parameter gradients, shaped like the network's layers.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients<T> {
    pub layers: Vec<Dense<T>>,
}

impl<T: Scalar> Gradients<T> {
    pub fn zeros_like(net: &Mlp<T>) -> Self {
        Self {
            layers: net
                .layers
                .iter()
                .map(|l| Dense::zeros(l.inputs(), l.outputs()))
                .collect(),
        }
    }

    /// Flattened view in the same order as [`Mlp::params`].
    pub fn flat(&self) -> Vec<T> {
        self.layers
            .iter()
            .flat_map(|l| l.weight.iter().chain(l.bias.iter()).copied())
            .collect()
    }

    pub fn add_assign(&mut self, other: &Self) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            a.weight.zip_mut_with(&b.weight, |x, &y| *x = *x + y);
            a.bias.zip_mut_with(&b.bias, |x, &y| *x = *x + y);
        }
    }
}

fn relu<T: Scalar>(x: T) -> T {
    if x > T::zero() {
        x
    } else {
        T::zero()
    }
}

impl<T: Scalar> Mlp<T> {
    /// Uniform fan-in initialization: every parameter of a layer with `n`
    /// inputs is drawn from `U(-1/√n, 1/√n)`.
    pub fn new<R: Rng + ?Sized>(sizes: &[usize], head: Head, rng: &mut R) -> Self {
        Self::with_passive_inputs(sizes, 0, head, rng)
    }

    /// Like [`Mlp::new`], but the weights of the last `passive` inputs start
    /// at zero and the fan-in scale counts only the other inputs. While
    /// those inputs stay zero the network computes, and trains, exactly like
    /// one built without them from the same generator.
    pub fn with_passive_inputs<R: Rng + ?Sized>(
        sizes: &[usize],
        passive: usize,
        head: Head,
        rng: &mut R,
    ) -> Self {
        assert!(sizes.len() >= 2, "need input and output sizes");
        assert!(passive <= sizes[0]);
        let mut layers = Vec::with_capacity(sizes.len() - 1);
        for (l, w) in sizes.windows(2).enumerate() {
            let (n_in, n_out) = (w[0], w[1]);
            let active = if l == 0 { n_in - passive } else { n_in };
            let bound = 1.0 / (active.max(1) as f64).sqrt();
            let mut layer = Dense::zeros(n_in, n_out);
            for r in 0..active {
                for c in 0..n_out {
                    layer.weight[[r, c]] = T::of(rng.random_range(-bound..bound));
                }
            }
            for c in 0..n_out {
                layer.bias[c] = T::of(rng.random_range(-bound..bound));
            }
            layers.push(layer);
        }
        Self { layers, head }
    }

    pub fn zeros(sizes: &[usize], head: Head) -> Self {
        Self {
            layers: sizes.windows(2).map(|w| Dense::zeros(w[0], w[1])).collect(),
            head,
        }
    }

    pub fn from_layers(layers: Vec<Dense<T>>, head: Head) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Contract("network needs at least one layer".into()));
        }
        for pair in layers.windows(2) {
            if pair[0].outputs() != pair[1].inputs() {
                return Err(Error::Shape {
                    context: "layer chaining",
                    expected: pair[0].outputs(),
                    actual: pair[1].inputs(),
                });
            }
        }
        for l in &layers {
            if l.bias.len() != l.outputs() {
                return Err(Error::Shape {
                    context: "bias length",
                    expected: l.outputs(),
                    actual: l.bias.len(),
                });
            }
        }
        Ok(Self { layers, head })
    }

    pub fn layers(&self) -> &[Dense<T>] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Dense<T>] {
        &mut self.layers
    }

    pub fn head(&self) -> Head {
        self.head
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![self.input_dim()];
        s.extend(self.layers.iter().map(Dense::outputs));
        s
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].outputs()
    }

    pub fn num_params(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weight.len() + l.bias.len())
            .sum()
    }

    /// Parameters flattened layer by layer, weights before biases.
    pub fn params(&self) -> Vec<T> {
        self.layers
            .iter()
            .flat_map(|l| l.weight.iter().chain(l.bias.iter()).copied())
            .collect()
    }

    /// Mutable access to every parameter in [`Mlp::params`] order.
    pub fn for_each_param_mut(&mut self, mut f: impl FnMut(usize, &mut T)) {
        let mut k = 0;
        for l in &mut self.layers {
            for p in l.weight.iter_mut().chain(l.bias.iter_mut()) {
                f(k, p);
                k += 1;
            }
        }
    }

    fn check_input(&self, cols: usize) -> Result<()> {
        if cols != self.input_dim() {
            return Err(Error::Shape {
                context: "network input",
                expected: self.input_dim(),
                actual: cols,
            });
        }
        Ok(())
    }

    fn apply_head(&self, z: &mut Array2<T>) {
        if self.head == Head::Squash {
            let half = T::of(0.5);
            // saturated tanh would round onto the closed endpoints
            let lo = T::min_positive_value();
            let hi = T::one() - T::epsilon();
            z.mapv_inplace(|x| ((x.tanh() + T::one()) * half).max(lo).min(hi));
        }
    }

    pub fn forward(&self, input: &[T]) -> Result<Vec<T>> {
        let x = ArrayView2::from_shape((1, input.len()), input).expect("row vector");
        Ok(self.forward_batch(x)?.into_raw_vec_and_offset().0)
    }

    pub fn forward_batch(&self, x: ArrayView2<T>) -> Result<Array2<T>> {
        self.check_input(x.ncols())?;
        let mut h = x.dot(&self.layers[0].weight) + &self.layers[0].bias;
        for layer in &self.layers[1..] {
            h.mapv_inplace(relu);
            h = h.dot(&layer.weight) + &layer.bias;
        }
        self.apply_head(&mut h);
        Ok(h)
    }

    /// Forward pass that records the activations needed by the backward pass.
    pub fn forward_tape(&self, x: ArrayView2<T>) -> Result<Tape<T>> {
        self.check_input(x.ncols())?;
        let last = self.layers.len() - 1;
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(x.to_owned());
        for (l, layer) in self.layers.iter().enumerate() {
            let mut z = acts[l].dot(&layer.weight) + &layer.bias;
            if l < last {
                z.mapv_inplace(relu);
            } else {
                self.apply_head(&mut z);
            }
            acts.push(z);
        }
        Ok(Tape { acts })
    }

    /// Gradient at the pre-activation of the last layer.
    fn head_delta(&self, tape: &Tape<T>, upstream: ArrayView2<T>) -> Result<Array2<T>> {
        let y = tape.output();
        if upstream.dim() != y.dim() {
            return Err(Error::Shape {
                context: "upstream gradient",
                expected: y.len(),
                actual: upstream.len(),
            });
        }
        Ok(match self.head {
            Head::Identity => upstream.to_owned(),
            // d/dz (tanh z + 1)/2 = (1 - tanh² z)/2 = 2y(1 - y)
            Head::Squash => {
                let two = T::of(2.0);
                let mut d = upstream.to_owned();
                d.zip_mut_with(y, |g, &yv| *g = *g * two * yv * (T::one() - yv));
                d
            }
        })
    }

    fn backprop(
        &self,
        tape: &Tape<T>,
        upstream: ArrayView2<T>,
        want_params: bool,
        want_input: bool,
    ) -> Result<(Option<Gradients<T>>, Option<Array2<T>>)> {
        let mut delta = self.head_delta(tape, upstream)?;
        let mut grads = want_params.then(|| Gradients::zeros_like(self));
        for l in (0..self.layers.len()).rev() {
            let input = &tape.acts[l];
            if let Some(g) = grads.as_mut() {
                g.layers[l].weight = input.t().dot(&delta);
                g.layers[l].bias = delta.sum_axis(Axis(0));
            }
            if l == 0 && !want_input {
                return Ok((grads, None));
            }
            let mut back = delta.dot(&self.layers[l].weight.t());
            if l > 0 {
                // rectifier derivative, read from the post-activation value
                back.zip_mut_with(input, |g, &a| {
                    if a <= T::zero() {
                        *g = T::zero();
                    }
                });
            }
            delta = back;
        }
        Ok((grads, Some(delta)))
    }

    /// Reverse-mode gradients of `sum(upstream ∘ output)` with respect to
    /// every parameter and to the input batch.
    pub fn backward(
        &self,
        tape: &Tape<T>,
        upstream: ArrayView2<T>,
    ) -> Result<(Gradients<T>, Array2<T>)> {
        let (g, dx) = self.backprop(tape, upstream, true, true)?;
        Ok((
            g.expect("parameter gradients requested"),
            dx.expect("input gradient requested"),
        ))
    }

    /// Parameter gradients only; skips the product back to the input.
    pub fn parameter_gradients(
        &self,
        tape: &Tape<T>,
        upstream: ArrayView2<T>,
    ) -> Result<Gradients<T>> {
        let (g, _) = self.backprop(tape, upstream, true, false)?;
        Ok(g.expect("parameter gradients requested"))
    }

    /// Input gradient only; skips the parameter-gradient products.
    pub fn input_gradient(&self, tape: &Tape<T>, upstream: ArrayView2<T>) -> Result<Array2<T>> {
        let (_, dx) = self.backprop(tape, upstream, false, true)?;
        Ok(dx.expect("input gradient requested"))
    }

    /// `self ← tau · online + (1 − tau) · self`.
    pub fn soft_update_from(&mut self, online: &Self, tau: T) -> Result<()> {
        if self.sizes() != online.sizes() {
            return Err(Error::Contract(
                "soft update between differently shaped networks".into(),
            ));
        }
        let keep = T::one() - tau;
        for (t, o) in self.layers.iter_mut().zip(&online.layers) {
            t.weight
                .zip_mut_with(&o.weight, |a, &b| *a = tau * b + keep * *a);
            t.bias
                .zip_mut_with(&o.bias, |a, &b| *a = tau * b + keep * *a);
        }
        Ok(())
    }

    /// Converts every parameter to another scalar type.
    pub fn cast<U: Scalar>(&self) -> Mlp<U> {
        Mlp {
            layers: self
                .layers
                .iter()
                .map(|l| Dense {
                    weight: l.weight.mapv(|x| U::of(x.as_f64())),
                    bias: l.bias.mapv(|x| U::of(x.as_f64())),
                })
                .collect(),
            head: self.head,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_network_squashes_to_half() {
        let net: Mlp<f64> = Mlp::zeros(&[4, 8, 8, 3], Head::Squash);
        assert_eq!(net.forward(&[1.0, -2.0, 3.0, 0.5]).unwrap(), vec![0.5; 3]);
    }

    #[test]
    fn identity_single_layer_reproduces_input() {
        let mut layer = Dense::<f64>::zeros(3, 3);
        for i in 0..3 {
            layer.weight[[i, i]] = 1.0;
        }
        let net = Mlp::from_layers(vec![layer], Head::Identity).unwrap();
        assert_eq!(
            net.forward(&[0.25, -1.5, 7.0]).unwrap(),
            vec![0.25, -1.5, 7.0]
        );
    }

    #[test]
    fn squash_outputs_stay_inside_unit_interval() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let net: Mlp<f64> = Mlp::new(&[5, 16, 16, 4], Head::Squash, &mut rng);
        for k in 0..200 {
            let x: Vec<f64> = (0..5).map(|j| ((k * 7 + j) as f64).sin() * 3.0).collect();
            for y in net.forward(&x).unwrap() {
                assert!(y > 0.0 && y < 1.0);
            }
        }
        let mut huge: Mlp<f64> = Mlp::zeros(&[1, 2], Head::Squash);
        huge.layers_mut()[0].weight[[0, 0]] = 1e6;
        huge.layers_mut()[0].weight[[0, 1]] = -1e6;
        for y in huge.forward(&[1.0]).unwrap() {
            assert!(y > 0.0 && y < 1.0, "{y}");
        }
    }

    #[test]
    fn shape_mismatch_is_reported() {
        let net: Mlp<f64> = Mlp::zeros(&[4, 2], Head::Identity);
        assert!(matches!(net.forward(&[1.0, 2.0]), Err(Error::Shape { .. })));
        let tape = net
            .forward_tape(array![[1.0, 2.0, 3.0, 4.0]].view())
            .unwrap();
        assert!(net.backward(&tape, array![[1.0]].view()).is_err());
    }

    #[test]
    fn batch_forward_matches_rowwise() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let net: Mlp<f64> = Mlp::new(&[3, 6, 2], Head::Identity, &mut rng);
        let x = array![[0.1, 0.2, 0.3], [-1.0, 0.5, 2.0]];
        let batch = net.forward_batch(x.view()).unwrap();
        for r in 0..2 {
            let row = net.forward(x.row(r).as_slice().unwrap()).unwrap();
            assert_eq!(batch.row(r).to_vec(), row);
        }
    }

    #[test]
    fn constant_output_has_zero_gradient() {
        // zero last layer: output is the bias, so every hidden parameter has zero gradient
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut net: Mlp<f64> = Mlp::new(&[3, 5, 2], Head::Identity, &mut rng);
        net.layers_mut()[1].weight.fill(0.0);
        let tape = net.forward_tape(array![[0.3, -0.2, 0.9]].view()).unwrap();
        let (g, dx) = net.backward(&tape, array![[1.0, 1.0]].view()).unwrap();
        assert!(g.layers[0].weight.iter().all(|&v| v == 0.0));
        assert!(g.layers[0].bias.iter().all(|&v| v == 0.0));
        assert!(dx.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn parameter_only_pass_matches_full_backward() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let net: Mlp<f64> = Mlp::new(&[5, 6, 6, 2], Head::Identity, &mut rng);
        let x = array![[0.1, -0.3, 0.8, 0.0, 0.5], [1.0, 0.2, -0.1, 0.4, -0.6]];
        let tape = net.forward_tape(x.view()).unwrap();
        let up = array![[1.0, -1.0], [0.5, 2.0]];
        let (full, dx) = net.backward(&tape, up.view()).unwrap();
        assert_eq!(net.parameter_gradients(&tape, up.view()).unwrap(), full);
        assert_eq!(net.input_gradient(&tape, up.view()).unwrap(), dx);
    }

    #[test]
    fn gradients_are_linear_in_the_upstream() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let net: Mlp<f64> = Mlp::new(&[4, 7, 3], Head::Squash, &mut rng);
        let x = array![[0.2, -0.4, 0.6, 1.0]];
        let tape = net.forward_tape(x.view()).unwrap();
        let f = array![[1.0, 0.0, -2.0]];
        let g = array![[0.5, 3.0, 1.0]];
        let (mut gf, _) = net.backward(&tape, f.view()).unwrap();
        let (gg, _) = net.backward(&tape, g.view()).unwrap();
        let (gsum, _) = net.backward(&tape, (&f + &g).view()).unwrap();
        gf.add_assign(&gg);
        for (a, b) in gf.flat().iter().zip(gsum.flat()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn passive_inputs_are_inert() {
        let mut r1 = ChaCha8Rng::seed_from_u64(42);
        let mut r2 = ChaCha8Rng::seed_from_u64(42);
        let plain: Mlp<f64> = Mlp::new(&[3, 4, 1], Head::Identity, &mut r1);
        let wide: Mlp<f64> = Mlp::with_passive_inputs(&[5, 4, 1], 2, Head::Identity, &mut r2);
        let a = plain.forward(&[0.1, 0.2, 0.3]).unwrap();
        let b = wide.forward(&[0.1, 0.2, 0.3, 0.0, 0.0]).unwrap();
        assert_eq!(a, b);
        assert_eq!(wide.layers()[0].weight.row(4).sum(), 0.0);
    }

    #[test]
    fn soft_update_is_a_convex_blend() {
        let mut target: Mlp<f64> = Mlp::zeros(&[1, 1], Head::Identity);
        let mut online = target.clone();
        online.layers_mut()[0].weight[[0, 0]] = 1.0;
        online.layers_mut()[0].bias[0] = 1.0;
        let before = target.clone();
        target.soft_update_from(&online, 0.0).unwrap();
        assert_eq!(target, before);
        target.soft_update_from(&online, 0.5).unwrap();
        assert_eq!(target.params(), vec![0.5, 0.5]);
        target.soft_update_from(&online, 1.0).unwrap();
        assert_eq!(target, online);
    }

    #[test]
    fn f32_and_f64_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let net: Mlp<f64> = Mlp::new(&[4, 8, 2], Head::Squash, &mut rng);
        let net32: Mlp<f32> = net.cast();
        let y64 = net.forward(&[0.1, 0.2, 0.3, 0.4]).unwrap();
        let y32 = net32.forward(&[0.1, 0.2, 0.3, 0.4]).unwrap();
        for (a, b) in y64.iter().zip(y32) {
            assert!((a - b as f64).abs() < 1e-5);
        }
    }
}
