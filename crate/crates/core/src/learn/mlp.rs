//! Fully connected networks with reverse-mode gradients.
//!
//! Parameters live in one flat vector so optimisers, target-network
//! averaging and checkpointing can treat a network as a single slice. Hidden
//! layers are `affine -> [layer norm] -> relu`; the output layer is affine.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, ArrayViewMut1, ArrayViewMut2, Axis};
use rand::Rng as _;

use super::Scalar;
use crate::error::{Error, Result};
use crate::rng::Rng;

const LN_EPS: f64 = 1e-5;

/// Layer widths and whether hidden layers are normalised.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MlpLayout {
    sizes: Vec<usize>,
    layer_norm: bool,
    offsets: Vec<LayerOffsets>,
    len: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct LayerOffsets {
    n_in: usize,
    n_out: usize,
    w: usize,
    b: usize,
    /// Gain and shift of the layer norm, when present.
    ln: Option<(usize, usize)>,
}

impl MlpLayout {
    /// `sizes = [input, hidden..., output]`.
    pub fn new(sizes: &[usize], layer_norm: bool) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::InvalidArgument(format!("bad layer sizes {sizes:?}")));
        }
        let mut offsets = Vec::with_capacity(sizes.len() - 1);
        let mut at = 0;
        for l in 0..sizes.len() - 1 {
            let (n_in, n_out) = (sizes[l], sizes[l + 1]);
            let w = at;
            at += n_in * n_out;
            let b = at;
            at += n_out;
            let hidden = l + 2 < sizes.len();
            let ln = (hidden && layer_norm).then(|| {
                let g = at;
                at += 2 * n_out;
                (g, g + n_out)
            });
            offsets.push(LayerOffsets { n_in, n_out, w, b, ln });
        }
        Ok(MlpLayout {
            sizes: sizes.to_vec(),
            layer_norm,
            offsets,
            len: at,
        })
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn layer_norm(&self) -> bool {
        self.layer_norm
    }

    pub fn num_params(&self) -> usize {
        self.len
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    /// `(start, len)` of every parameter tensor in declaration order:
    /// per layer weight, bias, then norm gain and shift if present.
    pub fn tensors(&self) -> Vec<(usize, usize)> {
        let mut t = Vec::new();
        for o in &self.offsets {
            t.push((o.w, o.n_in * o.n_out));
            t.push((o.b, o.n_out));
            if let Some((g, s)) = o.ln {
                t.push((g, o.n_out));
                t.push((s, o.n_out));
            }
        }
        t
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp<F: Scalar> {
    layout: MlpLayout,
    pub params: Vec<F>,
}

/// Activations kept from a forward pass for the backward pass.
#[derive(Debug, Clone)]
pub struct MlpCache<F: Scalar> {
    /// Input to each layer.
    inputs: Vec<Array2<F>>,
    /// Normalised pre-activations and inverse standard deviations, per hidden layer with norm.
    normed: Vec<Option<(Array2<F>, Array1<F>)>>,
    /// Post-relu outputs of hidden layers.
    hidden_out: Vec<Array2<F>>,
}

impl<F: Scalar> Mlp<F> {
    pub fn zeros(layout: MlpLayout) -> Self {
        let mut params = vec![F::zero(); layout.len];
        for o in &layout.offsets {
            if let Some((g, _)) = o.ln {
                params[g..g + o.n_out].fill(F::one());
            }
        }
        Mlp { layout, params }
    }

    /// Uniform `(-1/sqrt(fan_in), 1/sqrt(fan_in))` weights and biases; the
    /// output layer is scaled by `out_scale`.
    pub fn init(layout: MlpLayout, rng: &mut Rng, out_scale: f64) -> Self {
        let mut m = Mlp::zeros(layout);
        let n_layers = m.layout.offsets.len();
        for (l, o) in m.layout.offsets.clone().into_iter().enumerate() {
            let mut bound = 1.0 / (o.n_in as f64).sqrt();
            if l + 1 == n_layers {
                bound *= out_scale;
            }
            for p in &mut m.params[o.w..o.b + o.n_out] {
                *p = F::from_f64(rng.random_range(-bound..bound)).unwrap();
            }
        }
        m
    }

    pub fn from_params(layout: MlpLayout, params: Vec<F>) -> Result<Self> {
        if params.len() != layout.len {
            return Err(Error::ShapeMismatch {
                expected: layout.len,
                actual: params.len(),
            });
        }
        Ok(Mlp { layout, params })
    }

    pub fn layout(&self) -> &MlpLayout {
        &self.layout
    }

    fn weight(&self, o: &LayerOffsets) -> ArrayView2<'_, F> {
        ArrayView2::from_shape((o.n_in, o.n_out), &self.params[o.w..o.w + o.n_in * o.n_out]).unwrap()
    }

    fn vector(&self, at: usize, n: usize) -> ArrayView1<'_, F> {
        ArrayView1::from(&self.params[at..at + n])
    }

    /// Batched forward pass; rows of `x` are samples.
    pub fn forward(&self, x: ArrayView2<'_, F>) -> Result<(Array2<F>, MlpCache<F>)> {
        if x.ncols() != self.layout.input_dim() {
            return Err(Error::ShapeMismatch {
                expected: self.layout.input_dim(),
                actual: x.ncols(),
            });
        }
        let n_layers = self.layout.offsets.len();
        let mut cache = MlpCache {
            inputs: Vec::with_capacity(n_layers),
            normed: Vec::with_capacity(n_layers),
            hidden_out: Vec::with_capacity(n_layers),
        };
        let mut h = x.to_owned();
        for (l, o) in self.layout.offsets.iter().enumerate() {
            let mut z = h.dot(&self.weight(o));
            z += &self.vector(o.b, o.n_out);
            cache.inputs.push(h);
            if l + 1 == n_layers {
                return Ok((z, cache));
            }
            let normed = if let Some((g, s)) = o.ln {
                let (xhat, inv) = layer_norm(&z);
                let mut y = &xhat * &self.vector(g, o.n_out);
                y += &self.vector(s, o.n_out);
                z = y;
                Some((xhat, inv))
            } else {
                None
            };
            z.mapv_inplace(|v| v.max(F::zero()));
            cache.normed.push(normed);
            cache.hidden_out.push(z.clone());
            h = z;
        }
        unreachable!("layout has at least one layer")
    }

    /// Single-sample convenience wrapper.
    pub fn forward_one(&self, x: &[F]) -> Result<Vec<F>> {
        let v = ArrayView2::from_shape((1, x.len()), x).unwrap();
        Ok(self.forward(v)?.0.into_raw_vec_and_offset().0)
    }

    /// Gradients of `sum(upstream * output)` with respect to the parameters,
    /// accumulated over the batch. The input gradient is returned when
    /// `want_input` is set.
    pub fn backward(
        &self,
        cache: &MlpCache<F>,
        upstream: ArrayView2<'_, F>,
        want_input: bool,
    ) -> (Vec<F>, Option<Array2<F>>) {
        let mut grads = vec![F::zero(); self.layout.len];
        let n_layers = self.layout.offsets.len();
        let mut g = upstream.to_owned();
        for l in (0..n_layers).rev() {
            let o = self.layout.offsets[l];
            if l + 1 < n_layers {
                let out = &cache.hidden_out[l];
                ndarray::Zip::from(&mut g)
                    .and(out)
                    .for_each(|d, &h| if h <= F::zero() { *d = F::zero() });
                if let (Some((gi, si)), Some((xhat, inv))) = (o.ln, &cache.normed[l]) {
                    let dgamma = (&g * xhat).sum_axis(Axis(0));
                    let dbeta = g.sum_axis(Axis(0));
                    accumulate(&mut grads[gi..gi + o.n_out], dgamma.view());
                    accumulate(&mut grads[si..si + o.n_out], dbeta.view());
                    let dxhat = &g * &self.vector(gi, o.n_out);
                    g = layer_norm_backward(&dxhat, xhat, inv);
                }
            }
            let x = &cache.inputs[l];
            {
                let mut dw = ArrayViewMut2::from_shape(
                    (o.n_in, o.n_out),
                    &mut grads[o.w..o.w + o.n_in * o.n_out],
                )
                .unwrap();
                ndarray::linalg::general_mat_mul(F::one(), &x.t(), &g, F::one(), &mut dw);
            }
            let db = g.sum_axis(Axis(0));
            accumulate(&mut grads[o.b..o.b + o.n_out], db.view());
            if l > 0 || want_input {
                g = g.dot(&self.weight(&o).t());
            }
        }
        (grads, want_input.then_some(g))
    }

    /// `self <- (1 - tau) * self + tau * source`.
    pub fn soft_update(&mut self, source: &Mlp<F>, tau: F) {
        debug_assert_eq!(self.layout, source.layout);
        let keep = F::one() - tau;
        for (t, &s) in self.params.iter_mut().zip(&source.params) {
            *t = keep * *t + tau * s;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.params.iter().all(|p| p.is_finite())
    }
}

fn accumulate<F: Scalar>(dst: &mut [F], src: ArrayView1<'_, F>) {
    let mut d = ArrayViewMut1::from(dst);
    d += &src;
}

/// Row-wise normalisation; returns the normalised rows and `1/sqrt(var + eps)`.
fn layer_norm<F: Scalar>(z: &Array2<F>) -> (Array2<F>, Array1<F>) {
    let n = F::from_usize(z.ncols()).unwrap();
    let eps = F::from_f64(LN_EPS).unwrap();
    let mut xhat = z.clone();
    let mut inv = Array1::zeros(z.nrows());
    for (mut row, iv) in xhat.rows_mut().into_iter().zip(inv.iter_mut()) {
        let mean = row.sum() / n;
        row.mapv_inplace(|v| v - mean);
        let var = row.iter().map(|&v| v * v).sum::<F>() / n;
        *iv = F::one() / (var + eps).sqrt();
        let s = *iv;
        row.mapv_inplace(|v| v * s);
    }
    (xhat, inv)
}

fn layer_norm_backward<F: Scalar>(dxhat: &Array2<F>, xhat: &Array2<F>, inv: &Array1<F>) -> Array2<F> {
    let n = F::from_usize(dxhat.ncols()).unwrap();
    let mut dz = dxhat.clone();
    for ((mut row, xr), &iv) in dz.rows_mut().into_iter().zip(xhat.rows()).zip(inv) {
        let mean_d = row.sum() / n;
        let mean_dx = row.iter().zip(xr).map(|(&d, &x)| d * x).sum::<F>() / n;
        ndarray::Zip::from(&mut row)
            .and(&xr)
            .for_each(|d, &x| *d = iv * (*d - mean_d - x * mean_dx));
    }
    dz
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from;
    use ndarray::Array2;

    fn random_inputs(rng: &mut Rng, rows: usize, cols: usize) -> Array2<f64> {
        Array2::from_shape_fn((rows, cols), |_| rng.random_range(0.0..1.0))
    }

    /// Relative error used for finite-difference checks, guarded near zero.
    fn rel_err(a: f64, b: f64) -> f64 {
        (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
    }

    fn check_gradients(layer_norm: bool) {
        let mut rng = rng_from(3, 0);
        let layout = MlpLayout::new(&[5, 7, 6, 3], layer_norm).unwrap();
        let net: Mlp<f64> = Mlp::init(layout, &mut rng, 1.0);
        let x = random_inputs(&mut rng, 10, 5);
        let up = Array2::from_shape_fn((10, 3), |_| rng.random_range(-1.0..1.0));
        let loss = |m: &Mlp<f64>, x: &Array2<f64>| (m.forward(x.view()).unwrap().0 * &up).sum();
        let (_, cache) = net.forward(x.view()).unwrap();
        let (grads, dx) = net.backward(&cache, up.view(), true);
        let h = 1e-5;
        let mut worst: f64 = 0.0;
        for k in 0..net.params.len() {
            let mut p = net.clone();
            p.params[k] += h;
            let mut q = net.clone();
            q.params[k] -= h;
            let fd = (loss(&p, &x) - loss(&q, &x)) / (2.0 * h);
            worst = worst.max(rel_err(fd, grads[k]));
        }
        let dx = dx.unwrap();
        for r in 0..10 {
            for c in 0..5 {
                let mut xp = x.clone();
                xp[[r, c]] += h;
                let mut xm = x.clone();
                xm[[r, c]] -= h;
                let fd = (loss(&net, &xp) - loss(&net, &xm)) / (2.0 * h);
                worst = worst.max(rel_err(fd, dx[[r, c]]));
            }
        }
        assert!(worst < 1e-4, "worst relative error {worst}");
    }

    #[test]
    fn gradients_match_finite_differences() {
        check_gradients(false);
    }

    #[test]
    fn normalised_gradients_match_finite_differences() {
        check_gradients(true);
    }

    #[test]
    fn zero_network_outputs_zero() {
        let net: Mlp<f64> = Mlp::zeros(MlpLayout::new(&[4, 8, 2], false).unwrap());
        let out = net.forward_one(&[0.3, 0.1, 0.9, 0.5]).unwrap();
        assert_eq!(out, vec![0.0, 0.0]);
    }

    #[test]
    fn identity_single_layer() {
        let layout = MlpLayout::new(&[3, 3], false).unwrap();
        let mut p = vec![0.0; layout.num_params()];
        for i in 0..3 {
            p[i * 3 + i] = 1.0;
        }
        let net = Mlp::from_params(layout, p).unwrap();
        assert_eq!(net.forward_one(&[0.25, -2.0, 7.0]).unwrap(), vec![0.25, -2.0, 7.0]);
    }

    #[test]
    fn outputs_finite_on_unit_inputs() {
        let mut rng = rng_from(1, 1);
        let net: Mlp<f32> = Mlp::init(MlpLayout::new(&[20, 32, 32, 4], true).unwrap(), &mut rng, 1.0);
        let x = Array2::from_shape_fn((16, 20), |_| rng.random_range(0.0f32..1.0));
        let (y, _) = net.forward(x.view()).unwrap();
        assert!(y.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn shape_mismatch_rejected() {
        let net: Mlp<f64> = Mlp::zeros(MlpLayout::new(&[4, 2], false).unwrap());
        assert!(matches!(
            net.forward_one(&[1.0, 2.0]),
            Err(Error::ShapeMismatch { expected: 4, actual: 2 })
        ));
        assert!(Mlp::<f64>::from_params(MlpLayout::new(&[4, 2], false).unwrap(), vec![0.0; 3]).is_err());
    }

    #[test]
    fn zero_upstream_gives_zero_gradients() {
        let mut rng = rng_from(2, 0);
        let net: Mlp<f64> = Mlp::init(MlpLayout::new(&[3, 5, 2], true).unwrap(), &mut rng, 1.0);
        let x = random_inputs(&mut rng, 4, 3);
        let (_, cache) = net.forward(x.view()).unwrap();
        let (g, _) = net.backward(&cache, Array2::zeros((4, 2)).view(), false);
        assert!(g.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn duplicated_sample_doubles_gradients() {
        let mut rng = rng_from(4, 0);
        let net: Mlp<f64> = Mlp::init(MlpLayout::new(&[3, 6, 2], false).unwrap(), &mut rng, 1.0);
        let one = random_inputs(&mut rng, 1, 3);
        let two = ndarray::concatenate![Axis(0), one, one];
        let up1 = Array2::from_elem((1, 2), 0.7);
        let up2 = Array2::from_elem((2, 2), 0.7);
        let (_, c1) = net.forward(one.view()).unwrap();
        let (_, c2) = net.forward(two.view()).unwrap();
        let (g1, _) = net.backward(&c1, up1.view(), false);
        let (g2, _) = net.backward(&c2, up2.view(), false);
        for (a, b) in g1.iter().zip(&g2) {
            assert_eq!(2.0 * a, *b);
        }
    }

    #[test]
    fn tensor_table_covers_all_params() {
        let layout = MlpLayout::new(&[10, 16, 16, 2], true).unwrap();
        let total: usize = layout.tensors().iter().map(|t| t.1).sum();
        assert_eq!(total, layout.num_params());
        assert_eq!(layout.tensors().len(), 2 + 4 + 4);
    }

    #[test]
    fn soft_update_interpolates() {
        let layout = MlpLayout::new(&[2, 2], false).unwrap();
        let mut t = Mlp::from_params(layout.clone(), vec![0.0f64; 6]).unwrap();
        let s = Mlp::from_params(layout, vec![1.0f64; 6]).unwrap();
        t.soft_update(&s, 0.25);
        assert!(t.params.iter().all(|&p| p == 0.25));
    }
}
