//! Feature extractor and bias-free linear classifier head.
//!
//! The extractor is either the identity (no layers) or a small MLP whose
//! layers compute `act(W x + b)`. The head is a `K x d` matrix whose row `k`
//! scores class `k` as `w_kᵀ φ`; it has no bias anywhere.

use crate::error::{Error, Result};
use crate::linalg::{dot, Matrix, SeededRng};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    None,
}

impl Activation {
    pub fn as_str(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::None => "none",
        }
    }

    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::None => x,
        }
    }

    /// Derivative at pre-activation `z`. ReLU uses 0 at `z == 0`.
    fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::None => 1.0,
        }
    }
}

impl std::str::FromStr for Activation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "relu" => Ok(Activation::Relu),
            "none" => Ok(Activation::None),
            other => Err(format!("unknown activation {other:?}")),
        }
    }
}

/// One dense layer: `weight` is `out x in`, `bias` has length `out`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub weight: Matrix,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

impl Layer {
    pub fn in_dim(&self) -> usize {
        self.weight.cols()
    }

    pub fn out_dim(&self) -> usize {
        self.weight.rows()
    }
}

/// Layer list of the feature extractor. No layers means identity.
///
/// The same type doubles as the gradient container returned by
/// [`extract_backward`].
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ExtractorParams {
    layers: Vec<Layer>,
}

impl ExtractorParams {
    pub fn identity() -> Self {
        Self { layers: Vec::new() }
    }

    pub fn new(layers: Vec<Layer>) -> Result<Self> {
        for (i, pair) in layers.windows(2).enumerate() {
            if pair[0].out_dim() != pair[1].in_dim() {
                return Err(Error::shape(
                    "ExtractorParams::new",
                    format!(
                        "layer {i} outputs {} but layer {} expects {}",
                        pair[0].out_dim(),
                        i + 1,
                        pair[1].in_dim()
                    ),
                ));
            }
        }
        for (i, l) in layers.iter().enumerate() {
            if l.bias.len() != l.out_dim() {
                return Err(Error::shape(
                    "ExtractorParams::new",
                    format!("layer {i} bias has length {}, expected {}", l.bias.len(), l.out_dim()),
                ));
            }
        }
        Ok(Self { layers })
    }

    /// MLP with widths `dims = [input, hidden.., output]`. Hidden layers use
    /// ReLU, the last layer is linear. Weights are `N(0, 2 / fan_in)`,
    /// biases zero.
    pub fn mlp(dims: &[usize], rng: &mut SeededRng) -> Result<Self> {
        if dims.len() < 2 || dims.contains(&0) {
            return Err(Error::invalid(format!("bad MLP widths {dims:?}")));
        }
        let n = dims.len() - 1;
        let layers = dims
            .windows(2)
            .enumerate()
            .map(|(i, w)| Layer {
                weight: rng.normal_matrix(w[1], w[0], (2.0 / w[0] as f64).sqrt()),
                bias: vec![0.0; w[1]],
                activation: if i + 1 < n { Activation::Relu } else { Activation::None },
            })
            .collect();
        Self::new(layers)
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn is_identity(&self) -> bool {
        self.layers.is_empty()
    }

    pub fn input_dim(&self) -> Option<usize> {
        self.layers.first().map(Layer::in_dim)
    }

    /// Feature dimension for inputs of dimension `input_dim`.
    pub fn output_dim(&self, input_dim: usize) -> usize {
        self.layers.last().map_or(input_dim, Layer::out_dim)
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            layers: self
                .layers
                .iter()
                .map(|l| Layer {
                    weight: Matrix::zeros(l.out_dim(), l.in_dim()),
                    bias: vec![0.0; l.out_dim()],
                    activation: l.activation,
                })
                .collect(),
        }
    }

    /// `self += scale * other`; shapes must match.
    pub fn add_scaled(&mut self, other: &ExtractorParams, scale: f64) -> Result<()> {
        if self.layers.len() != other.layers.len() {
            return Err(Error::shape("ExtractorParams::add_scaled", "layer count differs"));
        }
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            a.weight.add_scaled(&b.weight, scale)?;
            for (x, y) in a.bias.iter_mut().zip(&b.bias) {
                *x += scale * y;
            }
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.values().all(f64::is_finite)
    }

    pub fn num_params(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weight.as_slice().len() + l.bias.len())
            .sum()
    }

    /// All parameters, layer by layer, weights (row-major) before biases.
    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.layers
            .iter()
            .flat_map(|l| l.weight.as_slice().iter().chain(&l.bias).copied())
    }

    /// Mutable access in the same order as [`values`](Self::values).
    pub fn values_mut(&mut self) -> impl Iterator<Item = &mut f64> + '_ {
        self.layers
            .iter_mut()
            .flat_map(|l| l.weight.as_mut_slice().iter_mut().chain(l.bias.iter_mut()))
    }
}

/// Bias-free head: row `k` of `w` is the class-`k` weight vector.
#[derive(Debug, Clone, PartialEq)]
pub struct HeadWeights {
    pub w: Matrix,
}

impl HeadWeights {
    pub fn new(w: Matrix) -> Self {
        Self { w }
    }

    /// `N(0, 0.01²)` entries.
    pub fn init(num_classes: usize, dim: usize, rng: &mut SeededRng) -> Self {
        Self {
            w: rng.normal_matrix(num_classes, dim, 0.01),
        }
    }

    pub fn num_classes(&self) -> usize {
        self.w.rows()
    }

    pub fn dim(&self) -> usize {
        self.w.cols()
    }

    pub fn row(&self, k: usize) -> &[f64] {
        self.w.row(k)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub extractor: ExtractorParams,
    pub head: HeadWeights,
}

impl ModelParams {
    pub fn new(extractor: ExtractorParams, head: HeadWeights) -> Result<Self> {
        if let Some(last) = extractor.layers.last() {
            if last.out_dim() != head.dim() {
                return Err(Error::shape(
                    "ModelParams::new",
                    format!("extractor outputs {} but head expects {}", last.out_dim(), head.dim()),
                ));
            }
        }
        Ok(Self { extractor, head })
    }

    /// Dimension of raw inputs the model accepts.
    pub fn input_dim(&self) -> usize {
        self.extractor.input_dim().unwrap_or(self.head.dim())
    }

    pub fn logits_for(&self, x: &[f64]) -> Result<Vec<f64>> {
        logits(&self.head, &extract(&self.extractor, x)?)
    }
}

/// Per-layer inputs and pre-activations from one forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    inputs: Vec<Vec<f64>>,
    pre: Vec<Vec<f64>>,
    output: Vec<f64>,
}

impl ForwardCache {
    pub fn output(&self) -> &[f64] {
        &self.output
    }
}

pub fn extract_cached(params: &ExtractorParams, x: &[f64]) -> Result<ForwardCache> {
    if let Some(d) = params.input_dim() {
        if d != x.len() {
            return Err(Error::shape(
                "extract",
                format!("input has dim {}, extractor expects {d}", x.len()),
            ));
        }
    }
    let mut inputs = Vec::with_capacity(params.layers.len());
    let mut pre = Vec::with_capacity(params.layers.len());
    let mut h = x.to_vec();
    for layer in &params.layers {
        let z: Vec<f64> = layer
            .weight
            .row_iter()
            .zip(&layer.bias)
            .map(|(row, b)| dot(row, &h) + b)
            .collect();
        let next = z.iter().map(|&v| layer.activation.apply(v)).collect();
        inputs.push(std::mem::replace(&mut h, next));
        pre.push(z);
    }
    Ok(ForwardCache { inputs, pre, output: h })
}

/// `φ(x)`; the identity extractor returns `x` unchanged.
pub fn extract(params: &ExtractorParams, x: &[f64]) -> Result<Vec<f64>> {
    Ok(extract_cached(params, x)?.output)
}

/// Extracts every row of `xs`.
pub fn extract_batch(params: &ExtractorParams, xs: &Matrix) -> Result<Matrix> {
    if params.is_identity() {
        return Ok(xs.clone());
    }
    let out_dim = params.output_dim(xs.cols());
    let mut data = Vec::with_capacity(xs.rows() * out_dim);
    for row in xs.row_iter() {
        data.extend(extract(params, row)?);
    }
    Matrix::from_vec(xs.rows(), out_dim, data)
}

/// `z_k = w_kᵀ φ`, no bias.
pub fn logits(head: &HeadWeights, phi: &[f64]) -> Result<Vec<f64>> {
    if phi.len() != head.dim() {
        return Err(Error::shape(
            "logits",
            format!("feature has dim {}, head expects {}", phi.len(), head.dim()),
        ));
    }
    Ok(head.w.row_iter().map(|w| dot(w, phi)).collect())
}

/// Reverse-mode gradients of `upstream · φ(x)` given the forward cache.
/// Returns parameter gradients (shaped like `params`) and `∂/∂x`.
pub fn backward_from_cache(
    params: &ExtractorParams,
    cache: &ForwardCache,
    upstream: &[f64],
) -> Result<(ExtractorParams, Vec<f64>)> {
    let mut grads = params.zeros_like();
    let grad_x = accumulate_backward(params, cache, upstream, &mut grads)?;
    Ok((grads, grad_x))
}

/// Like [`backward_from_cache`] but adds into `grads`, which must be shaped
/// like `params`.
pub fn accumulate_backward(
    params: &ExtractorParams,
    cache: &ForwardCache,
    upstream: &[f64],
    grads: &mut ExtractorParams,
) -> Result<Vec<f64>> {
    if upstream.len() != cache.output.len() {
        return Err(Error::shape(
            "extract_backward",
            format!("upstream has dim {}, output has {}", upstream.len(), cache.output.len()),
        ));
    }
    if cache.pre.len() != params.layers.len() || grads.layers.len() != params.layers.len() {
        return Err(Error::shape(
            "extract_backward",
            "cache or gradient does not match params",
        ));
    }
    let mut delta = upstream.to_vec();
    for (li, layer) in params.layers.iter().enumerate().rev() {
        let z = &cache.pre[li];
        let input = &cache.inputs[li];
        for (d, &zv) in delta.iter_mut().zip(z) {
            *d *= layer.activation.derivative(zv);
        }
        let g = &mut grads.layers[li];
        for (o, &d) in delta.iter().enumerate() {
            if d == 0.0 {
                continue;
            }
            for (gw, &xi) in g.weight.row_mut(o).iter_mut().zip(input) {
                *gw += d * xi;
            }
            g.bias[o] += d;
        }
        let mut prev = vec![0.0; layer.in_dim()];
        for (o, &d) in delta.iter().enumerate() {
            if d == 0.0 {
                continue;
            }
            for (p, &w) in prev.iter_mut().zip(layer.weight.row(o)) {
                *p += d * w;
            }
        }
        delta = prev;
    }
    Ok(delta)
}

/// Runs a forward pass on `x` and backpropagates `upstream` through it.
pub fn extract_backward(params: &ExtractorParams, x: &[f64], upstream: &[f64]) -> Result<(ExtractorParams, Vec<f64>)> {
    let cache = extract_cached(params, x)?;
    backward_from_cache(params, &cache, upstream)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::matmul;

    // Independent forward pass: matrix products on column vectors.
    fn oracle_forward(params: &ExtractorParams, x: &[f64]) -> Vec<f64> {
        let mut h = Matrix::from_vec(x.len(), 1, x.to_vec()).unwrap();
        for l in params.layers() {
            let mut z = matmul(&l.weight, &h).unwrap();
            for (i, b) in l.bias.iter().enumerate() {
                z[(i, 0)] += b;
                if l.activation == Activation::Relu && z[(i, 0)] < 0.0 {
                    z[(i, 0)] = 0.0;
                }
            }
            h = z;
        }
        h.into_vec()
    }

    fn random_mlp(seed: u64, dims: &[usize]) -> ExtractorParams {
        let mut rng = SeededRng::new(seed);
        let mut p = ExtractorParams::mlp(dims, &mut rng).unwrap();
        for v in p.values_mut() {
            *v += 0.1 * rng.standard_normal();
        }
        p
    }

    #[test]
    fn identity_passes_through() {
        let id = ExtractorParams::identity();
        assert_eq!(extract(&id, &[1.0, 2.0]).unwrap(), vec![1.0, 2.0]);
        let (g, gx) = extract_backward(&id, &[1.0, 2.0], &[0.5, -1.0]).unwrap();
        assert_eq!(gx, vec![0.5, -1.0]);
        assert_eq!(g.num_params(), 0);
    }

    #[test]
    fn relu_layer() {
        let p = ExtractorParams::new(vec![Layer {
            weight: Matrix::identity(2),
            bias: vec![0.0; 2],
            activation: Activation::Relu,
        }])
        .unwrap();
        assert_eq!(extract(&p, &[-1.0, 2.0]).unwrap(), vec![0.0, 2.0]);
    }

    #[test]
    fn forward_matches_oracle() {
        let p = random_mlp(3, &[5, 7, 4]);
        let mut rng = SeededRng::new(4);
        for _ in 0..10 {
            let x: Vec<f64> = (0..5).map(|_| rng.standard_normal()).collect();
            let got = extract(&p, &x).unwrap();
            let want = oracle_forward(&p, &x);
            for (g, w) in got.iter().zip(&want) {
                assert!((g - w).abs() < 1e-12);
            }
            assert_eq!(got, extract(&p, &x).unwrap());
        }
    }

    #[test]
    fn dimension_errors() {
        let p = random_mlp(1, &[3, 4]);
        assert!(matches!(extract(&p, &[1.0, 2.0]), Err(Error::Shape { .. })));
        let head = HeadWeights::new(Matrix::identity(2));
        assert!(matches!(logits(&head, &[1.0]), Err(Error::Shape { .. })));
        assert!(ModelParams::new(p, head).is_err());
        let bad = ExtractorParams::new(vec![
            Layer {
                weight: Matrix::zeros(3, 2),
                bias: vec![0.0; 3],
                activation: Activation::Relu,
            },
            Layer {
                weight: Matrix::zeros(2, 4),
                bias: vec![0.0; 2],
                activation: Activation::None,
            },
        ]);
        assert!(bad.is_err());
    }

    #[test]
    fn linear_layer_weight_gradient_is_input() {
        let mut rng = SeededRng::new(8);
        let p = ExtractorParams::new(vec![Layer {
            weight: rng.normal_matrix(3, 4, 1.0),
            bias: vec![0.1, 0.2, 0.3],
            activation: Activation::None,
        }])
        .unwrap();
        let x = [1.0, -2.0, 0.5, 3.0];
        let (g, _) = extract_backward(&p, &x, &[1.0, 0.0, 0.0]).unwrap();
        assert_eq!(g.layers()[0].weight.row(0), &x);
        assert_eq!(g.layers()[0].weight.row(1), &[0.0; 4]);
        assert_eq!(g.layers()[0].bias, vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn logits_examples() {
        let head = HeadWeights::new(Matrix::identity(2));
        assert_eq!(logits(&head, &[3.0, -1.0]).unwrap(), vec![3.0, -1.0]);
        let mut rng = SeededRng::new(2);
        let head = HeadWeights::new(rng.normal_matrix(4, 3, 1.0));
        assert_eq!(logits(&head, &[0.0; 3]).unwrap(), vec![0.0; 4]);
        let phi = [0.3, -1.2, 2.0];
        let got = logits(&head, &phi).unwrap();
        for (k, g) in got.iter().enumerate() {
            let mut s = 0.0;
            for (j, x) in phi.iter().enumerate() {
                s += head.w[(k, j)] * x;
            }
            assert!((g - s).abs() < 1e-12);
        }
    }

    #[test]
    fn logits_are_linear() {
        let mut rng = SeededRng::new(12);
        for _ in 0..20 {
            let head = HeadWeights::new(rng.normal_matrix(5, 4, 1.0));
            let p1: Vec<f64> = (0..4).map(|_| rng.standard_normal()).collect();
            let p2: Vec<f64> = (0..4).map(|_| rng.standard_normal()).collect();
            let (a, b) = (rng.uniform(-2.0, 2.0), rng.uniform(-2.0, 2.0));
            let mix: Vec<f64> = p1.iter().zip(&p2).map(|(x, y)| a * x + b * y).collect();
            let l = logits(&head, &mix).unwrap();
            let l1 = logits(&head, &p1).unwrap();
            let l2 = logits(&head, &p2).unwrap();
            for k in 0..5 {
                assert!((l[k] - (a * l1[k] + b * l2[k])).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn init_statistics() {
        let mut rng = SeededRng::new(99);
        let p = ExtractorParams::mlp(&[200, 300, 10], &mut rng).unwrap();
        let w = &p.layers()[0].weight;
        let var = w.as_slice().iter().map(|x| x * x).sum::<f64>() / w.as_slice().len() as f64;
        assert!((var - 2.0 / 200.0).abs() < 0.001, "{var}");
        assert_eq!(p.layers()[0].activation, Activation::Relu);
        assert_eq!(p.layers()[1].activation, Activation::None);
        let head = HeadWeights::init(50, 40, &mut rng);
        let var = head.w.as_slice().iter().map(|x| x * x).sum::<f64>() / 2000.0;
        assert!((var.sqrt() - 0.01).abs() < 0.001);
    }
}
