use crate::error::{param_err, shape_err, Error, Result};
use crate::nn::layers::{
    conv_backward, conv_forward_linear, dense_backward, dense_forward_cached, lrn_backward,
    lrn_forward, maxpool_backward, maxpool_forward, DenseCache, Mode,
};
use crate::nn::loss::softmax_cross_entropy;
use crate::nn::spec::{Activation, Architecture, LayerSpec, Scale};
use crate::rng::RandomSource;
use crate::tensor::{Fill, Tensor};

/// Layer stack, parameters, and momentum buffers of one network.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkState {
    specs: Vec<LayerSpec>,
    params: Vec<Vec<Tensor>>,
    velocities: Vec<Vec<Tensor>>,
    input_shape: [usize; 3],
    /// Number of completed training epochs.
    pub epoch: u64,
}

/// Per-layer parameter gradients, parallel to [`NetworkState::params`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients(pub Vec<Vec<Tensor>>);

#[derive(Debug, Clone)]
enum LayerCache {
    Conv { input: Tensor, pre: Tensor },
    Pool { input_shape: Vec<usize>, indices: Vec<usize> },
    Lrn { input: Tensor, denom: Tensor },
    Flatten { input_shape: Vec<usize> },
    Dense { input: Tensor, cache: DenseCache },
}

/// Activations recorded by a train-mode forward pass for reuse in backward.
#[derive(Debug, Clone, Default)]
pub struct ForwardTrace {
    layers: Vec<LayerCache>,
}

impl ForwardTrace {
    pub fn len(&self) -> usize {
        self.layers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.layers.is_empty()
    }

    /// Dropout multipliers of layer `i`, if it applied any.
    pub fn dropout_mask(&self, i: usize) -> Option<&[f64]> {
        match self.layers.get(i)? {
            LayerCache::Dense { cache, .. } => cache.mask.as_deref(),
            _ => None,
        }
    }

    /// Pre-activation of a conv or dense layer.
    pub fn pre_activation(&self, i: usize) -> Option<&Tensor> {
        match self.layers.get(i)? {
            LayerCache::Conv { pre, .. } => Some(pre),
            LayerCache::Dense { cache, .. } => Some(&cache.pre),
            _ => None,
        }
    }

    pub fn pool_indices(&self, i: usize) -> Option<&[usize]> {
        match self.layers.get(i)? {
            LayerCache::Pool { indices, .. } => Some(indices),
            _ => None,
        }
    }

    pub fn lrn_denominators(&self, i: usize) -> Option<&Tensor> {
        match self.layers.get(i)? {
            LayerCache::Lrn { denom, .. } => Some(denom),
            _ => None,
        }
    }
}

fn param_shapes(spec: &LayerSpec, input: &[usize]) -> Vec<Vec<usize>> {
    match *spec {
        LayerSpec::Conv(c) => vec![
            vec![c.out_channels, input[0], c.kernel_h, c.kernel_w],
            vec![c.out_channels],
        ],
        LayerSpec::Dense(d) => vec![vec![input[0], d.units], vec![d.units]],
        _ => Vec::new(),
    }
}

/// Builds the AlexNet-style network at the requested scale.
pub fn build_network(scale: Scale, n_classes: usize, rng: &mut RandomSource) -> Result<NetworkState> {
    NetworkState::from_architecture(&Architecture::for_scale(scale, n_classes), rng)
}

impl NetworkState {
    pub fn from_architecture(arch: &Architecture, rng: &mut RandomSource) -> Result<Self> {
        if arch.n_classes < 2 {
            return param_err(format!("need at least two classes, got {}", arch.n_classes));
        }
        Self::new(arch.input, arch.layer_specs(), rng)
    }

    /// Validates the stack and draws initial parameters: He-normal for conv
    /// layers, Xavier-uniform for dense layers, zero biases.
    pub fn new(input_shape: [usize; 3], specs: Vec<LayerSpec>, rng: &mut RandomSource) -> Result<Self> {
        let shapes = Self::infer_shapes(input_shape, &specs)?;
        let mut params = Vec::with_capacity(specs.len());
        let mut input = input_shape.to_vec();
        for (spec, out) in specs.iter().zip(&shapes) {
            let layer = match *spec {
                LayerSpec::Conv(c) => {
                    let fan_in = (input[0] * c.kernel_h * c.kernel_w) as f64;
                    let sigma = (2.0 / fan_in).sqrt();
                    let w = Tensor::new(
                        &[c.out_channels, input[0], c.kernel_h, c.kernel_w],
                        Fill::Normal { mu: 0.0, sigma },
                        rng,
                    )?;
                    vec![w, Tensor::zeros(&[c.out_channels])?]
                }
                LayerSpec::Dense(d) => {
                    let limit = (6.0 / (input[0] + d.units) as f64).sqrt();
                    let w = Tensor::new(
                        &[input[0], d.units],
                        Fill::Uniform { lo: -limit, hi: limit },
                        rng,
                    )?;
                    vec![w, Tensor::zeros(&[d.units])?]
                }
                _ => Vec::new(),
            };
            params.push(layer);
            input = out.clone();
        }
        let velocities = params
            .iter()
            .map(|layer| layer.iter().map(Tensor::zeros_like).collect())
            .collect();
        Ok(Self {
            specs,
            params,
            velocities,
            input_shape,
            epoch: 0,
        })
    }

    /// Reassembles a network from stored parts, checking every shape.
    pub fn from_parts(
        input_shape: [usize; 3],
        specs: Vec<LayerSpec>,
        params: Vec<Vec<Tensor>>,
        velocities: Vec<Vec<Tensor>>,
        epoch: u64,
    ) -> Result<Self> {
        let shapes = Self::infer_shapes(input_shape, &specs)?;
        if params.len() != specs.len() || velocities.len() != specs.len() {
            return shape_err("parameter lists do not match layer count");
        }
        let mut input = input_shape.to_vec();
        for (i, spec) in specs.iter().enumerate() {
            let expected = param_shapes(spec, &input);
            for group in [&params[i], &velocities[i]] {
                let got: Vec<&[usize]> = group.iter().map(Tensor::shape).collect();
                let want: Vec<&[usize]> = expected.iter().map(Vec::as_slice).collect();
                if got != want {
                    return shape_err(format!("layer {i}: tensors {got:?}, expected {want:?}"));
                }
            }
            input = shapes[i].clone();
        }
        Ok(Self {
            specs,
            params,
            velocities,
            input_shape,
            epoch,
        })
    }

    fn infer_shapes(input_shape: [usize; 3], specs: &[LayerSpec]) -> Result<Vec<Vec<usize>>> {
        if specs.is_empty() {
            return param_err("network needs at least one layer");
        }
        let mut shape = input_shape.to_vec();
        let mut out = Vec::with_capacity(specs.len());
        for (i, spec) in specs.iter().enumerate() {
            spec.validate()?;
            let is_last = i + 1 == specs.len();
            if let LayerSpec::Dense(d) = spec {
                if (d.activation == Activation::Softmax) != is_last {
                    return param_err("exactly the final dense layer must use softmax");
                }
            } else if is_last {
                return param_err("the final layer must be a softmax dense layer");
            }
            shape = spec.output_shape(&shape).map_err(|e| match e {
                Error::Shape(m) => Error::Shape(format!("layer {i} ({}): {m}", spec.kind_name())),
                other => other,
            })?;
            out.push(shape.clone());
        }
        Ok(out)
    }

    pub fn specs(&self) -> &[LayerSpec] {
        &self.specs
    }

    pub fn params(&self) -> &[Vec<Tensor>] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Vec<Tensor>] {
        &mut self.params
    }

    pub fn velocities(&self) -> &[Vec<Tensor>] {
        &self.velocities
    }

    pub(crate) fn params_and_velocities_mut(&mut self) -> (&mut [Vec<Tensor>], &mut [Vec<Tensor>]) {
        (&mut self.params, &mut self.velocities)
    }

    pub fn input_shape(&self) -> [usize; 3] {
        self.input_shape
    }

    pub fn n_classes(&self) -> usize {
        match self.specs.last() {
            Some(LayerSpec::Dense(d)) => d.units,
            _ => 0,
        }
    }

    pub fn parameter_count(&self) -> usize {
        self.params.iter().flatten().map(Tensor::len).sum()
    }

    /// Declared per-sample output shape of every layer.
    pub fn layer_shapes(&self) -> Result<Vec<Vec<usize>>> {
        Self::infer_shapes(self.input_shape, &self.specs)
    }

    fn check_input(&self, x: &Tensor) -> Result<()> {
        let s = x.shape();
        if s.len() != 4 || s[1..] != self.input_shape {
            return shape_err(format!(
                "network expects [N, {}, {}, {}], got {s:?}",
                self.input_shape[0], self.input_shape[1], self.input_shape[2]
            ));
        }
        Ok(())
    }

    /// Runs layers `0..=last` in the given mode, optionally recording caches.
    fn run(
        &self,
        x: &Tensor,
        last: usize,
        mode: Mode,
        rng: &mut RandomSource,
        mut trace: Option<&mut ForwardTrace>,
    ) -> Result<Tensor> {
        self.check_input(x)?;
        let mut act = x.clone();
        for (i, spec) in self.specs.iter().enumerate().take(last + 1) {
            let p = &self.params[i];
            let (out, cache) = match *spec {
                LayerSpec::Conv(c) => {
                    let pre = conv_forward_linear(&act, &c, &p[0], &p[1])?;
                    let out = pre.relu();
                    (out, LayerCache::Conv { input: act, pre })
                }
                LayerSpec::MaxPool(s) => {
                    let (out, indices) = maxpool_forward(&act, &s)?;
                    let input_shape = act.shape().to_vec();
                    (out, LayerCache::Pool { input_shape, indices })
                }
                LayerSpec::Lrn(s) => {
                    let (out, denom) = lrn_forward(&act, &s)?;
                    (out, LayerCache::Lrn { input: act, denom })
                }
                LayerSpec::Flatten => {
                    let input_shape = act.shape().to_vec();
                    let n = input_shape[0];
                    let d = input_shape[1..].iter().product();
                    (act.reshape(&[n, d])?, LayerCache::Flatten { input_shape })
                }
                LayerSpec::Dense(d) => {
                    let cache = dense_forward_cached(&act, &p[0], &p[1], d.activation, d.dropout_rate, mode, rng)?;
                    let out = if d.activation == Activation::Softmax && trace.is_some() {
                        cache.pre.clone()
                    } else {
                        cache.out.clone()
                    };
                    (out, LayerCache::Dense { input: act, cache })
                }
            };
            if let Some(t) = trace.as_deref_mut() {
                t.layers.push(cache);
            }
            act = out;
        }
        Ok(act)
    }

    /// Eval-mode forward returning class probabilities `[N, K]`.
    pub fn forward_eval(&self, x: &Tensor) -> Result<Tensor> {
        // eval mode never touches the rng
        let mut unused = RandomSource::new(0);
        self.run(x, self.specs.len() - 1, Mode::Eval, &mut unused, None)
    }

    /// Eval-mode output of layer `layer` (inclusive).
    pub fn forward_to(&self, x: &Tensor, layer: usize) -> Result<Tensor> {
        if layer >= self.specs.len() {
            return param_err(format!("layer {layer} out of range ({} layers)", self.specs.len()));
        }
        let mut unused = RandomSource::new(0);
        self.run(x, layer, Mode::Eval, &mut unused, None)
    }

    /// Train-mode forward. Returns the final logits (pre-softmax) and the trace.
    pub fn forward_train(&self, x: &Tensor, rng: &mut RandomSource) -> Result<(Tensor, ForwardTrace)> {
        let mut trace = ForwardTrace {
            layers: Vec::with_capacity(self.specs.len()),
        };
        let logits = self.run(x, self.specs.len() - 1, Mode::Train, rng, Some(&mut trace))?;
        Ok((logits, trace))
    }

    pub fn predict(&self, x: &Tensor) -> Result<Vec<usize>> {
        self.forward_eval(x)?.argmax_axis(1)
    }

    /// Reverse-mode gradients of the loss whose logit gradient is `d_logits`.
    pub fn backward(&self, trace: &ForwardTrace, d_logits: &Tensor) -> Result<Gradients> {
        if trace.layers.len() != self.specs.len() {
            return Err(Error::State(format!(
                "backward needs a train-mode trace covering all {} layers, got {}",
                self.specs.len(),
                trace.layers.len()
            )));
        }
        let mut grads: Vec<Vec<Tensor>> = vec![Vec::new(); self.specs.len()];
        let mut g = d_logits.clone();
        for i in (0..self.specs.len()).rev() {
            let p = &self.params[i];
            g = match (&self.specs[i], &trace.layers[i]) {
                (LayerSpec::Conv(c), LayerCache::Conv { input, pre }) => {
                    let masked: Vec<f64> = g
                        .data()
                        .iter()
                        .zip(pre.data())
                        .map(|(&gv, &z)| if z > 0.0 { gv } else { 0.0 })
                        .collect();
                    let d_pre = Tensor::from_vec(pre.shape(), masked)?;
                    let pg = conv_backward(input, c, &p[0], &d_pre)?;
                    grads[i] = vec![pg.d_weights, pg.d_bias];
                    pg.d_input
                }
                (LayerSpec::MaxPool(_), LayerCache::Pool { input_shape, indices }) => {
                    maxpool_backward(input_shape, indices, &g)?
                }
                (LayerSpec::Lrn(s), LayerCache::Lrn { input, denom }) => lrn_backward(input, denom, s, &g)?,
                (LayerSpec::Flatten, LayerCache::Flatten { input_shape }) => g.reshape(input_shape)?,
                (LayerSpec::Dense(d), LayerCache::Dense { input, cache }) => {
                    let pg = dense_backward(input, &p[0], cache, d.activation, &g)?;
                    grads[i] = vec![pg.d_weights, pg.d_bias];
                    pg.d_input
                }
                _ => return Err(Error::State(format!("trace layer {i} does not match its spec"))),
            };
        }
        Ok(Gradients(grads))
    }

    /// Train-mode forward, mean cross-entropy, and backward in one call.
    pub fn loss_and_gradients(&self, x: &Tensor, labels: &[usize], rng: &mut RandomSource) -> Result<(f64, Gradients)> {
        let (logits, trace) = self.forward_train(x, rng)?;
        let (loss, d_logits) = softmax_cross_entropy(&logits, labels)?;
        Ok((loss, self.backward(&trace, &d_logits)?))
    }
}
