//! Encoder-decoder with convolutional skip branches.
//!
//! With `L = depth / 2` levels and `x₀ = z`:
//!
//! ```text
//! encoder  x_{l+1} = act(conv_s2(x_l))                     l = 0..L
//! skip     s_l     = act(conv(x_l))
//! decoder  d_L = x_L,  d_l = act(conv(concat(crop(up(d_{l+1})), s_l)))
//! output   conv(d_0), one channel, no activation
//! ```
//!
//! Encoder level `l` has width `channels[l]`, the decoder step that produces
//! `d_l` has width `channels[2L − 1 − l]`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::conv::{conv2d_backward, conv2d_forward, ConvLayer, Padding};
use super::layers::{
    center_crop, center_crop_backward, instance_norm, instance_norm_backward, upsample2,
    upsample2_backward, Activation,
};
use super::tensor::Tensor3;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct NetworkConfig {
    pub depth: usize,
    pub channels: Vec<usize>,
    pub skip_channels: usize,
    pub activation: Activation,
    pub padding: Padding,
    pub instance_norm: bool,
    pub seed: u64,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self {
            depth: 6,
            channels: vec![256, 128, 64, 64, 128, 256],
            skip_channels: 16,
            activation: Activation::Swish,
            padding: Padding::Reflect,
            instance_norm: false,
            seed: 0,
        }
    }
}

impl NetworkConfig {
    pub fn validate(&self) -> Result<()> {
        if self.depth == 0 || !self.depth.is_multiple_of(2) {
            return Err(Error::invalid(format!(
                "network depth must be a positive even number, got {}",
                self.depth
            )));
        }
        if self.channels.len() != self.depth {
            return Err(Error::invalid(format!(
                "expected {} channel widths, got {}",
                self.depth,
                self.channels.len()
            )));
        }
        if self.channels.contains(&0) || self.skip_channels == 0 {
            return Err(Error::invalid("channel widths must be at least 1"));
        }
        Ok(())
    }

    pub fn levels(&self) -> usize {
        self.depth / 2
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SkipNet {
    config: NetworkConfig,
    in_channels: usize,
    encoders: Vec<ConvLayer>,
    skips: Vec<ConvLayer>,
    /// `decoders[j]` produces `d_{L−1−j}`.
    decoders: Vec<ConvLayer>,
    output: ConvLayer,
    cache: Option<Cache>,
}

/// Per-layer gradients, in [`SkipNet::params_mut`] order.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub tensors: Vec<Vec<f64>>,
    pub input: Option<Tensor3>,
}

#[derive(Clone, Debug, PartialEq)]
struct Stage {
    /// Conv input.
    input: Tensor3,
    /// Conv output (before normalisation).
    conv_out: Tensor3,
    /// Activation input.
    pre_act: Tensor3,
}

#[derive(Clone, Debug, PartialEq)]
struct Cache {
    encoders: Vec<Stage>,
    skips: Vec<Stage>,
    decoders: Vec<Stage>,
    /// Spatial size of `up(d_{l+1})` before cropping, per decoder step.
    up_dims: Vec<(usize, usize)>,
    out_input: Tensor3,
}

impl SkipNet {
    pub fn new(config: &NetworkConfig, in_channels: usize) -> Result<Self> {
        config.validate()?;
        if in_channels == 0 {
            return Err(Error::invalid("network needs at least one input channel"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let levels = config.levels();
        let ch = &config.channels;
        let pad = config.padding;
        let level_in = |l: usize| if l == 0 { in_channels } else { ch[l - 1] };
        let encoders = (0..levels)
            .map(|l| ConvLayer::init_uniform(level_in(l), ch[l], 2, pad, &mut rng))
            .collect();
        let skips = (0..levels)
            .map(|l| ConvLayer::init_uniform(level_in(l), config.skip_channels, 1, pad, &mut rng))
            .collect();
        let decoders = (0..levels)
            .map(|j| {
                let up = ch[levels + j - 1];
                ConvLayer::init_uniform(up + config.skip_channels, ch[levels + j], 1, pad, &mut rng)
            })
            .collect();
        let output = ConvLayer::init_uniform(ch[config.depth - 1], 1, 1, pad, &mut rng);
        Ok(Self {
            config: config.clone(),
            in_channels,
            encoders,
            skips,
            decoders,
            output,
            cache: None,
        })
    }

    pub fn config(&self) -> &NetworkConfig {
        &self.config
    }

    pub fn in_channels(&self) -> usize {
        self.in_channels
    }

    fn layers(&self) -> impl Iterator<Item = &ConvLayer> {
        self.encoders
            .iter()
            .chain(&self.skips)
            .chain(&self.decoders)
            .chain(std::iter::once(&self.output))
    }

    fn layers_mut(&mut self) -> impl Iterator<Item = &mut ConvLayer> {
        self.encoders
            .iter_mut()
            .chain(self.skips.iter_mut())
            .chain(self.decoders.iter_mut())
            .chain(std::iter::once(&mut self.output))
    }

    /// Weight then bias of every layer: encoders, skips, decoders, output.
    pub fn params(&self) -> Vec<&[f64]> {
        self.layers()
            .flat_map(|l| [l.weight.as_slice(), l.bias.as_slice()])
            .collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut [f64]> {
        self.layers_mut()
            .flat_map(|l| [l.weight.as_mut_slice(), l.bias.as_mut_slice()])
            .collect()
    }

    pub fn parameter_count(&self) -> usize {
        self.layers().map(ConvLayer::parameter_count).sum()
    }

    pub fn zero_weights(&mut self) {
        for p in self.params_mut() {
            p.fill(0.0);
        }
    }

    fn stage(&self, layer: &ConvLayer, x: Tensor3) -> Result<(Stage, Tensor3)> {
        let conv_out = conv2d_forward(&x, layer)?;
        let pre_act = if self.config.instance_norm {
            instance_norm(&conv_out)
        } else {
            conv_out.clone()
        };
        let y = self.config.activation.forward(&pre_act);
        Ok((
            Stage {
                input: x,
                conv_out,
                pre_act,
            },
            y,
        ))
    }

    fn stage_backward(
        &self,
        layer: &ConvLayer,
        stage: &Stage,
        grad: &Tensor3,
        want_input: bool,
    ) -> Result<(Option<Tensor3>, Vec<f64>, Vec<f64>)> {
        let mut g = self.config.activation.backward(&stage.pre_act, grad);
        if self.config.instance_norm {
            g = instance_norm_backward(&stage.conv_out, &g);
        }
        let grads = conv2d_backward(&stage.input, layer, &g, want_input)?;
        Ok((grads.input, grads.weight, grads.bias))
    }

    /// Output image `1 × H × W` for `z` of shape `C′ × H × W`; caches what
    /// [`SkipNet::backward`] needs.
    pub fn forward(&mut self, z: &Tensor3) -> Result<Tensor3> {
        if z.channels() != self.in_channels {
            return Err(Error::Network(format!(
                "network expects {} input channels, got {}",
                self.in_channels,
                z.channels()
            )));
        }
        if z.height() == 0 || z.width() == 0 {
            return Err(Error::Network("network input has zero spatial size".into()));
        }
        if !z.is_finite() {
            return Err(Error::Network("network input is not finite".into()));
        }
        let levels = self.config.levels();
        let mut xs = vec![z.clone()];
        let mut encoders = Vec::with_capacity(levels);
        for l in 0..levels {
            let (stage, y) = self.stage(&self.encoders[l], xs[l].clone())?;
            encoders.push(stage);
            xs.push(y);
        }
        let mut skips = Vec::with_capacity(levels);
        let mut skip_out = Vec::with_capacity(levels);
        // skip l reads the input of encoder l, so the last decoder sees z's resolution
        for (layer, x) in self.skips.iter().zip(&xs) {
            let (stage, y) = self.stage(layer, x.clone())?;
            skips.push(stage);
            skip_out.push(y);
        }
        let mut d = xs.pop().expect("levels >= 1");
        let mut decoders = Vec::with_capacity(levels);
        let mut up_dims = Vec::with_capacity(levels);
        for j in 0..levels {
            let l = levels - 1 - j;
            let up = upsample2(&d);
            up_dims.push((up.height(), up.width()));
            let s = &skip_out[l];
            let cropped = center_crop(&up, s.height(), s.width())?;
            let cat = Tensor3::concat_channels(&cropped, s)?;
            let (stage, y) = self.stage(&self.decoders[j], cat)?;
            decoders.push(stage);
            d = y;
        }
        let out = conv2d_forward(&d, &self.output)?;
        self.cache = Some(Cache {
            encoders,
            skips,
            decoders,
            up_dims,
            out_input: d,
        });
        Ok(out)
    }

    /// Reverse pass for the last [`SkipNet::forward`]; consumes its cache.
    pub fn backward(&mut self, grad_out: &Tensor3, want_input: bool) -> Result<Gradients> {
        let cache = self.cache.take().ok_or(Error::BackwardWithoutForward)?;
        let levels = self.config.levels();

        let out = conv2d_backward(&cache.out_input, &self.output, grad_out, true)?;
        let mut grad_d = out.input.expect("requested");

        let mut dec_grads = vec![(Vec::new(), Vec::new()); levels];
        let mut skip_grads = vec![(Vec::new(), Vec::new()); levels];
        let mut enc_grads = vec![(Vec::new(), Vec::new()); levels];
        // gradient wrt x_l, l = 0..=L
        let mut grad_x: Vec<Option<Tensor3>> = vec![None; levels + 1];

        for j in (0..levels).rev() {
            let l = levels - 1 - j;
            let (g_cat, gw, gb) =
                self.stage_backward(&self.decoders[j], &cache.decoders[j], &grad_d, true)?;
            dec_grads[j] = (gw, gb);
            let g_cat = g_cat.expect("requested");
            let up_ch = g_cat.channels() - self.config.skip_channels;
            let (g_up, g_skip) = g_cat.split_channels(up_ch);

            let want = want_input || l > 0;
            let (g_x, gw, gb) =
                self.stage_backward(&self.skips[l], &cache.skips[l], &g_skip, want)?;
            skip_grads[l] = (gw, gb);
            accumulate(&mut grad_x[l], g_x)?;

            let (uh, uw) = cache.up_dims[j];
            let g_up = center_crop_backward(&g_up, uh, uw)?;
            grad_d = upsample2_backward(&g_up);
        }
        accumulate(&mut grad_x[levels], Some(grad_d))?;

        for l in (0..levels).rev() {
            let g = grad_x[l + 1].take().expect("set by decoder pass");
            let want = want_input || l > 0;
            let (g_x, gw, gb) =
                self.stage_backward(&self.encoders[l], &cache.encoders[l], &g, want)?;
            enc_grads[l] = (gw, gb);
            accumulate(&mut grad_x[l], g_x)?;
        }

        let mut tensors = Vec::with_capacity(2 * (3 * levels + 1));
        for (w, b) in enc_grads.into_iter().chain(skip_grads).chain(dec_grads) {
            tensors.push(w);
            tensors.push(b);
        }
        tensors.push(out.weight);
        tensors.push(out.bias);
        Ok(Gradients {
            tensors,
            input: if want_input { grad_x[0].take() } else { None },
        })
    }
}

fn accumulate(slot: &mut Option<Tensor3>, g: Option<Tensor3>) -> Result<()> {
    match (slot.as_mut(), g) {
        (_, None) => Ok(()),
        (None, Some(g)) => {
            *slot = Some(g);
            Ok(())
        }
        (Some(acc), Some(g)) => acc.add_assign(&g),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::gradcheck::{derivative, max_rel_error, numeric_grad, random_tensor};

    fn mini(instance_norm: bool, padding: Padding) -> NetworkConfig {
        NetworkConfig {
            depth: 6,
            channels: vec![4; 6],
            skip_channels: 2,
            activation: Activation::Swish,
            padding,
            instance_norm,
            seed: 11,
        }
    }

    fn probe_loss(net: &mut SkipNet, z: &Tensor3, probe: &Tensor3) -> f64 {
        let y = net.forward(z).unwrap();
        y.as_slice().iter().zip(probe.as_slice()).map(|(a, b)| a * b).sum()
    }

    fn check_gradients(cfg: &NetworkConfig, c: usize, h: usize, w: usize, seed: u64) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut net = SkipNet::new(cfg, c).unwrap();
        let z = random_tensor(c, h, w, &mut rng);
        let probe = random_tensor(1, h, w, &mut rng);
        net.forward(&z).unwrap();
        let grads = net.backward(&probe, true).unwrap();

        let mut analytic = Vec::new();
        let mut numeric = Vec::new();
        let sizes: Vec<usize> = net.params().iter().map(|p| p.len()).collect();
        for (t, &len) in sizes.iter().enumerate() {
            for i in 0..len {
                let orig = net.params()[t][i];
                let d = derivative(
                    |v| {
                        net.params_mut()[t][i] = v;
                        probe_loss(&mut net, &z, &probe)
                    },
                    orig,
                );
                net.params_mut()[t][i] = orig;
                numeric.push(d);
                analytic.push(grads.tensors[t][i]);
            }
        }
        let gi = grads.input.unwrap();
        numeric.extend(numeric_grad(&z, |zz| probe_loss(&mut net, zz, &probe)));
        analytic.extend_from_slice(gi.as_slice());
        max_rel_error(&analytic, &numeric)
    }

    #[test]
    fn miniature_gradients_match_finite_differences() {
        let err = check_gradients(&mini(false, Padding::Reflect), 4, 12, 12, 1);
        assert!(err < 1e-4, "max relative error {err}");
    }

    #[test]
    fn odd_sizes_and_variants_match_finite_differences() {
        let small = NetworkConfig {
            depth: 2,
            channels: vec![2, 3],
            skip_channels: 1,
            ..mini(false, Padding::Reflect)
        };
        assert!(check_gradients(&small, 1, 3, 3, 2) < 1e-4);
        let two = NetworkConfig {
            depth: 4,
            channels: vec![3, 2, 2, 3],
            skip_channels: 2,
            ..mini(false, Padding::Zero)
        };
        assert!(check_gradients(&two, 2, 7, 5, 3) < 1e-4);
        let normed = NetworkConfig {
            depth: 4,
            channels: vec![3, 2, 2, 3],
            skip_channels: 2,
            ..mini(true, Padding::Reflect)
        };
        assert!(check_gradients(&normed, 2, 8, 6, 4) < 1e-4);
    }

    #[test]
    fn zero_weights_give_zero_output_and_gradients() {
        let mut net = SkipNet::new(&mini(false, Padding::Reflect), 3).unwrap();
        net.zero_weights();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let z = random_tensor(3, 12, 12, &mut rng);
        let y = net.forward(&z).unwrap();
        assert_eq!(y.shape(), (1, 12, 12));
        assert!(y.as_slice().iter().all(|&v| v == 0.0));
        let g = net.backward(&Tensor3::zeros(1, 12, 12), true).unwrap();
        assert!(g.tensors.iter().flatten().all(|&v| v == 0.0));
    }

    #[test]
    fn output_shape_for_awkward_sizes() {
        let cfg = mini(false, Padding::Reflect);
        let mut net = SkipNet::new(&cfg, 2).unwrap();
        for (h, w) in [(1, 1), (3, 17), (9, 4), (16, 16)] {
            let y = net.forward(&Tensor3::filled(2, h, w, 0.3)).unwrap();
            assert_eq!(y.shape(), (1, h, w));
        }
    }

    #[test]
    fn forward_is_pure_and_init_is_seeded() {
        let cfg = mini(false, Padding::Reflect);
        let mut a = SkipNet::new(&cfg, 2).unwrap();
        let mut b = SkipNet::new(&cfg, 2).unwrap();
        assert_eq!(a.params(), b.params());
        let other = SkipNet::new(&NetworkConfig { seed: 12, ..cfg }, 2).unwrap();
        assert_ne!(a.params(), other.params());
        let z = Tensor3::filled(2, 10, 10, 0.1);
        let y1 = a.forward(&z).unwrap();
        let y2 = a.forward(&z).unwrap();
        let y3 = b.forward(&z).unwrap();
        assert_eq!(y1.as_slice(), y2.as_slice());
        assert_eq!(y1.as_slice(), y3.as_slice());
    }

    #[test]
    fn backward_requires_forward() {
        let mut net = SkipNet::new(&mini(false, Padding::Reflect), 1).unwrap();
        let g = Tensor3::zeros(1, 4, 4);
        assert!(matches!(net.backward(&g, false), Err(Error::BackwardWithoutForward)));
        net.forward(&Tensor3::zeros(1, 4, 4)).unwrap();
        net.backward(&g, false).unwrap();
        assert!(matches!(net.backward(&g, false), Err(Error::BackwardWithoutForward)));
    }

    #[test]
    fn config_validation() {
        let mut cfg = mini(false, Padding::Reflect);
        cfg.depth = 5;
        assert!(SkipNet::new(&cfg, 1).is_err());
        cfg.depth = 6;
        cfg.channels[2] = 0;
        assert!(SkipNet::new(&cfg, 1).is_err());
        cfg.channels = vec![4; 4];
        assert!(SkipNet::new(&cfg, 1).is_err());
        let mut net = SkipNet::new(&mini(false, Padding::Reflect), 2).unwrap();
        assert!(net.forward(&Tensor3::zeros(3, 8, 8)).is_err());
    }
}
