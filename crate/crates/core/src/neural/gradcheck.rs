//! Central-difference verification of the reverse-mode gradients.

use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::{Gradients, Mlp};

/// Largest network the check will perturb parameter by parameter.
pub const MAX_CHECKED_PARAMS: usize = 10_000;

/// Denominator floor so that near-zero gradients compare absolutely.
const REL_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheck {
    pub max_rel_error: f64,
    /// Index of the worst entry: parameters first (in [`Mlp::params`]
    /// order), then input components.
    pub worst_index: usize,
    pub checked: usize,
}

fn rel_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_FLOOR)
}

/// Fixed, non-uniform output weighting so every output contributes.
fn projection<T: Scalar>(outputs: usize) -> Array2<T> {
    Array2::from_shape_fn((1, outputs), |(_, j)| T::of(1.5 + (0.7 * j as f64).sin()))
}

fn objective<T: Scalar>(net: &Mlp<T>, x: ArrayView2<T>, proj: &Array2<T>) -> Result<f64> {
    let y = net.forward_batch(x)?;
    Ok((&y * proj).sum().as_f64())
}

/// Backpropagated gradients of the check objective (a fixed weighted sum
/// of the outputs) with respect to the parameters and the input.
pub fn analytic_gradients<T: Scalar>(net: &Mlp<T>, input: &[T]) -> Result<(Gradients<T>, Vec<T>)> {
    let x = ArrayView2::from_shape((1, input.len()), input).map_err(|_| Error::Shape {
        context: "gradient check input",
        expected: net.input_dim(),
        actual: input.len(),
    })?;
    let proj = projection::<T>(net.output_dim());
    let tape = net.forward_tape(x)?;
    let (grads, dx) = net.backward(&tape, proj.view())?;
    Ok((grads, dx.into_raw_vec_and_offset().0))
}

/// Checks [`Mlp::backward`] on `net` at `input` and returns the largest
/// relative deviation from central differences with step `h`.
pub fn finite_difference_check<T: Scalar>(net: &Mlp<T>, input: &[T], h: f64) -> Result<GradCheck> {
    let (grads, dx) = analytic_gradients(net, input)?;
    compare_with_finite_differences(net, input, &grads, &dx, h)
}

/// Compares caller-supplied gradients against central differences. Used
/// directly to confirm the check rejects a corrupted gradient.
pub fn compare_with_finite_differences<T: Scalar>(
    net: &Mlp<T>,
    input: &[T],
    analytic: &Gradients<T>,
    analytic_input: &[T],
    h: f64,
) -> Result<GradCheck> {
    if net.num_params() > MAX_CHECKED_PARAMS {
        return Err(Error::Contract(format!(
            "gradient check limited to {MAX_CHECKED_PARAMS} parameters, network has {}",
            net.num_params()
        )));
    }
    if input.len() != net.input_dim() {
        return Err(Error::Shape {
            context: "gradient check input",
            expected: net.input_dim(),
            actual: input.len(),
        });
    }
    let proj = projection::<T>(net.output_dim());
    let x = ArrayView2::from_shape((1, input.len()), input).expect("row vector");
    let flat = analytic.flat();
    let step = T::of(h);
    let two_h = 2.0 * h;

    let mut report = GradCheck {
        max_rel_error: 0.0,
        worst_index: 0,
        checked: 0,
    };
    let mut note = |idx: usize, a: f64, n: f64| {
        let e = rel_error(a, n);
        if e > report.max_rel_error {
            report.max_rel_error = e;
            report.worst_index = idx;
        }
        report.checked += 1;
    };

    let mut probe = net.clone();
    for k in 0..net.num_params() {
        let mut orig = T::zero();
        probe.for_each_param_mut(|i, p| {
            if i == k {
                orig = *p;
                *p = orig + step;
            }
        });
        let up = objective(&probe, x, &proj)?;
        probe.for_each_param_mut(|i, p| {
            if i == k {
                *p = orig - step;
            }
        });
        let down = objective(&probe, x, &proj)?;
        probe.for_each_param_mut(|i, p| {
            if i == k {
                *p = orig;
            }
        });
        note(k, flat[k].as_f64(), (up - down) / two_h);
    }

    let mut shifted = input.to_vec();
    for j in 0..input.len() {
        let orig = shifted[j];
        shifted[j] = orig + step;
        let up = objective(
            net,
            ArrayView2::from_shape((1, input.len()), &shifted).unwrap(),
            &proj,
        )?;
        shifted[j] = orig - step;
        let down = objective(
            net,
            ArrayView2::from_shape((1, input.len()), &shifted).unwrap(),
            &proj,
        )?;
        shifted[j] = orig;
        note(
            net.num_params() + j,
            analytic_input[j].as_f64(),
            (up - down) / two_h,
        );
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::Head;
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn fresh_small_net_passes() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let net: Mlp<f64> = Mlp::new(&[4, 8, 8, 2], Head::Squash, &mut rng);
        let x: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
        let r = finite_difference_check(&net, &x, 1e-4).unwrap();
        assert!(r.max_rel_error < 1e-4, "{r:?}");
        assert_eq!(r.checked, net.num_params() + 4);
    }

    #[test]
    fn doubled_entry_is_detected() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let net: Mlp<f64> = Mlp::new(&[4, 8, 8, 2], Head::Identity, &mut rng);
        let x = [0.3, -0.7, 0.2, 0.9];
        let xv = ArrayView2::from_shape((1, 4), &x[..]).unwrap();
        let tape = net.forward_tape(xv).unwrap();
        let (mut g, dx) = net.backward(&tape, projection::<f64>(2).view()).unwrap();
        // corrupt the largest last-layer weight gradient so the doubling is visible
        let last = g.layers.len() - 1;
        let (r, c) = {
            let w = &g.layers[last].weight;
            let mut best = (0, 0);
            for ((i, j), v) in w.indexed_iter() {
                if v.abs() > w[best].abs() {
                    best = (i, j);
                }
            }
            best
        };
        g.layers[last].weight[[r, c]] *= 2.0;
        let rep =
            compare_with_finite_differences(&net, &x, &g, dx.as_slice().unwrap(), 1e-4).unwrap();
        assert!(rep.max_rel_error > 1e-2, "{rep:?}");
    }

    #[test]
    fn zero_net_is_exact() {
        let net: Mlp<f64> = Mlp::zeros(&[3, 4, 2], Head::Identity);
        let r = finite_difference_check(&net, &[0.0; 3], 1e-4).unwrap();
        assert!(r.max_rel_error < 1e-9, "{r:?}");
    }

    #[test]
    fn refuses_large_networks() {
        let net: Mlp<f64> = Mlp::zeros(&[200, 128, 1], Head::Identity);
        assert!(finite_difference_check(&net, &[0.0; 200], 1e-4).is_err());
    }
}
