use std::sync::Arc;

use crate::error::{shape_err, Error, Result};
use crate::nn::{kaiming_init, Activation, ConvSpec, Eval, Graph, Rng, Scalar, Tensor};

use super::{FdanConfig, ParamId, ParamStore};

/// Smallest input side the attention branch accepts: the stride-2 conv
/// must leave at least 7 rows/columns for the 7×7 pooling window.
pub const ESA_MIN_SIZE: usize = 15;

const POOL_KERNEL: usize = 7;
const POOL_STRIDE: usize = 3;

/// A convolution bound to its parameters in a [`ParamStore`].
#[derive(Clone, Debug)]
pub struct ConvLayer {
    pub name: String,
    pub spec: ConvSpec,
    pub weight: ParamId,
    pub bias: Option<ParamId>,
}

impl ConvLayer {
    pub fn forward<G: Graph>(&self, g: &mut G, params: &[G::Var], x: &G::Var) -> Result<G::Var> {
        let c = g.dims(x)[1];
        if c != self.spec.in_channels {
            return Err(shape_err!(
                "{} expects {} channels, got {c}",
                self.name,
                self.spec.in_channels
            ));
        }
        let w = &params[self.weight.0];
        let b = self.bias.map(|b| &params[b.0]);
        let y = g.conv2d(&self.name, x, w, b, self.spec.stride, self.spec.padding)?;
        match self.spec.activation {
            Activation::None => Ok(y),
            Activation::Relu => g.relu(&y),
            Activation::Sigmoid => g.sigmoid(&y),
        }
    }
}

struct LayerBuilder<'a> {
    store: &'a mut ParamStore<f32>,
    rng: Rng,
}

impl LayerBuilder<'_> {
    fn conv(&mut self, name: String, spec: ConvSpec) -> Result<ConvLayer> {
        let (w, b) = kaiming_init::<f32>(&spec, &mut self.rng);
        let weight = self.store.push(format!("{name}.weight"), spec.weight_dims().to_vec(), w)?;
        let bias = match b {
            Some(b) => Some(self.store.push(format!("{name}.bias"), vec![spec.out_channels], b)?),
            None => None,
        };
        Ok(ConvLayer {
            name,
            spec,
            weight,
            bias,
        })
    }
}

/// Feature decomposition block.
///
/// The input is split channel-wise into halves `α | β`. A 1×1 conv on
/// `β` gives the initial base; the detail is `α − base_init`, and a 3×3
/// conv on the initial base gives the output base.
#[derive(Clone, Debug)]
pub struct Fdb {
    pub channels: usize,
    pub reduce: ConvLayer,
    pub refine: ConvLayer,
}

impl Fdb {
    fn build(b: &mut LayerBuilder, prefix: &str, channels: usize) -> Result<Self> {
        let half = channels / 2;
        Ok(Self {
            channels,
            reduce: b.conv(
                format!("{prefix}.reduce"),
                ConvSpec::new(half, half, 1).activation(Activation::Relu),
            )?,
            refine: b.conv(
                format!("{prefix}.refine"),
                ConvSpec::same(half, half, 3).activation(Activation::Relu),
            )?,
        })
    }

    /// Returns `(base, detail)`, each with half the input channels.
    pub fn forward<G: Graph>(
        &self,
        g: &mut G,
        params: &[G::Var],
        x: &G::Var,
    ) -> Result<(G::Var, G::Var)> {
        let c = g.dims(x)[1];
        if c % 2 != 0 || c != self.channels {
            return Err(shape_err!(
                "decomposition block expects {} (even) channels, got {c}",
                self.channels
            ));
        }
        let (alpha, beta) = g.channel_split(x, c / 2)?;
        let base_init = self.reduce.forward(g, params, &beta)?;
        let detail = g.sub(&alpha, &base_init)?;
        let base = self.refine.forward(g, params, &base_init)?;
        Ok((base, detail))
    }
}

/// Enhanced spatial attention: a sigmoid mask computed from a reduced,
/// strided and pooled branch gates the input feature.
#[derive(Clone, Debug)]
pub struct Esa {
    pub conv1: ConvLayer,
    pub conv_f: ConvLayer,
    pub conv2: ConvLayer,
    pub conv_max: ConvLayer,
    pub conv3: ConvLayer,
    pub conv3_: ConvLayer,
    pub conv4: ConvLayer,
}

impl Esa {
    fn build(b: &mut LayerBuilder, prefix: &str, channels: usize) -> Result<Self> {
        let f = channels / 4;
        let relu = Activation::Relu;
        Ok(Self {
            conv1: b.conv(format!("{prefix}.conv1"), ConvSpec::new(channels, f, 1))?,
            conv_f: b.conv(format!("{prefix}.conv_f"), ConvSpec::new(f, f, 1))?,
            conv2: b.conv(format!("{prefix}.conv2"), ConvSpec::new(f, f, 3).stride(2))?,
            conv_max: b.conv(format!("{prefix}.conv_max"), ConvSpec::same(f, f, 3).activation(relu))?,
            conv3: b.conv(format!("{prefix}.conv3"), ConvSpec::same(f, f, 3).activation(relu))?,
            conv3_: b.conv(format!("{prefix}.conv3_"), ConvSpec::same(f, f, 3))?,
            conv4: b.conv(format!("{prefix}.conv4"), ConvSpec::new(f, channels, 1))?,
        })
    }

    pub fn layers(&self) -> [&ConvLayer; 7] {
        [
            &self.conv1,
            &self.conv_f,
            &self.conv2,
            &self.conv_max,
            &self.conv3,
            &self.conv3_,
            &self.conv4,
        ]
    }

    pub fn forward<G: Graph>(&self, g: &mut G, params: &[G::Var], x: &G::Var) -> Result<G::Var> {
        let [_, _, h, w] = g.dims(x);
        if h < ESA_MIN_SIZE || w < ESA_MIN_SIZE {
            return Err(shape_err!(
                "attention branch needs at least {ESA_MIN_SIZE}x{ESA_MIN_SIZE} input, got {h}x{w}"
            ));
        }
        let y1 = self.conv1.forward(g, params, x)?;
        let c1 = self.conv2.forward(g, params, &y1)?;
        let pooled = g.max_pool(&c1, POOL_KERNEL, POOL_STRIDE)?;
        let v = self.conv_max.forward(g, params, &pooled)?;
        let c3 = self.conv3.forward(g, params, &v)?;
        let c3 = self.conv3_.forward(g, params, &c3)?;
        let c3 = g.resize_bilinear(&c3, h, w)?;
        let cf = self.conv_f.forward(g, params, &y1)?;
        let sum = g.add(&c3, &cf)?;
        let c4 = self.conv4.forward(g, params, &sum)?;
        let mask = g.sigmoid(&c4)?;
        g.mul(x, &mask)
    }
}

/// Hierarchical feature decomposition group: `B` chained decomposition
/// blocks whose details and final base are concatenated and gated by
/// spatial attention.
#[derive(Clone, Debug)]
pub struct Hfdg {
    pub channels: usize,
    pub blocks: Vec<Fdb>,
    pub esa: Esa,
}

impl Hfdg {
    fn build(b: &mut LayerBuilder, prefix: &str, channels: usize, blocks: usize) -> Result<Self> {
        let fdbs = (0..blocks)
            .map(|i| Fdb::build(b, &format!("{prefix}.fdb{i}"), channels >> i))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            channels,
            blocks: fdbs,
            esa: Esa::build(b, &format!("{prefix}.esa"), channels)?,
        })
    }

    /// Channel widths of the concatenated features:
    /// `C/2, C/4, …, C/2^B` details followed by the `C/2^B` base.
    pub fn concat_widths(channels: usize, blocks: usize) -> Result<Vec<usize>> {
        if blocks == 0 || blocks >= usize::BITS as usize || channels % (1 << blocks) != 0 {
            return Err(Error::Config(format!(
                "{channels} channels cannot be halved {blocks} times"
            )));
        }
        let mut widths: Vec<usize> = (1..=blocks).map(|b| channels >> b).collect();
        widths.push(channels >> blocks);
        Ok(widths)
    }

    pub fn forward<G: Graph>(&self, g: &mut G, params: &[G::Var], x: &G::Var) -> Result<G::Var> {
        let mut parts = Vec::with_capacity(self.blocks.len() + 1);
        let mut base = x.clone();
        for fdb in &self.blocks {
            let (next, detail) = fdb.forward(g, params, &base)?;
            parts.push(detail);
            base = next;
        }
        parts.push(base);
        let cat = g.concat(&parts)?;
        self.esa.forward(g, params, &cat)
    }
}

/// The full network together with the layer graph needed to run it.
#[derive(Clone, Debug)]
pub struct Fdan {
    pub config: FdanConfig,
    pub head: ConvLayer,
    pub groups: Vec<Hfdg>,
    /// 1×1 fusion of all group outputs; absent in the last-group-only variant.
    pub aggregate: Option<ConvLayer>,
    pub fuse: ConvLayer,
    pub reconstruct: ConvLayer,
    param_count: usize,
}

/// Builds the layer graph for `config` and Kaiming-initializes its
/// parameters from `config.seed`.
pub fn build_fdan(config: &FdanConfig) -> Result<(Fdan, ParamStore<f32>)> {
    config.validate()?;
    let c = config.channels;
    let mut store = ParamStore::new();
    let mut b = LayerBuilder {
        store: &mut store,
        rng: Rng::new(config.seed),
    };
    let relu = Activation::Relu;
    let head = b.conv("head".into(), ConvSpec::same(3, c, 3).activation(relu))?;
    let groups = (0..config.groups)
        .map(|i| Hfdg::build(&mut b, &format!("group{i}"), c, config.blocks))
        .collect::<Result<Vec<_>>>()?;
    let aggregate = if config.aggregate {
        Some(b.conv(
            "aggregate".into(),
            ConvSpec::new(config.groups * c, c, 1).activation(relu),
        )?)
    } else {
        None
    };
    let fuse = b.conv("fuse".into(), ConvSpec::same(c, c, 3).activation(relu))?;
    let reconstruct = b.conv(
        "reconstruct".into(),
        ConvSpec::same(c, config.reconstruction_channels(), 3),
    )?;
    let param_count = store.len();
    Ok((
        Fdan {
            config: config.clone(),
            head,
            groups,
            aggregate,
            fuse,
            reconstruct,
            param_count,
        },
        store,
    ))
}

impl Fdan {
    pub fn scale(&self) -> usize {
        self.config.scale
    }

    /// Dims of every parameter tensor, indexed like the [`ParamStore`].
    pub fn param_dims(&self) -> Vec<[usize; 4]> {
        let mut dims = vec![[0; 4]; self.param_count];
        for l in self.conv_layers() {
            dims[l.weight.0] = l.spec.weight_dims();
            if let Some(b) = l.bias {
                dims[b.0] = l.spec.bias_dims();
            }
        }
        dims
    }

    /// Every convolution in construction order.
    pub fn conv_layers(&self) -> Vec<&ConvLayer> {
        let mut out = vec![&self.head];
        for g in &self.groups {
            for f in &g.blocks {
                out.push(&f.reduce);
                out.push(&f.refine);
            }
            out.extend(g.esa.layers());
        }
        out.extend(self.aggregate.iter());
        out.push(&self.fuse);
        out.push(&self.reconstruct);
        out
    }

    /// Maps `(N, 3, H, W)` to `(N, 3, sH, sW)`.
    pub fn forward<G: Graph>(&self, g: &mut G, params: &[G::Var], input: &G::Var) -> Result<G::Var> {
        if params.len() != self.param_count {
            return Err(Error::Internal(format!(
                "{} parameters bound, model has {}",
                params.len(),
                self.param_count
            )));
        }
        let [_, c, h, w] = g.dims(input);
        if c != 3 {
            return Err(shape_err!("network input must have 3 channels, got {c}"));
        }
        if h < ESA_MIN_SIZE || w < ESA_MIN_SIZE {
            return Err(shape_err!(
                "input {h}x{w} is smaller than the {ESA_MIN_SIZE}x{ESA_MIN_SIZE} minimum"
            ));
        }
        let f0 = self.head.forward(g, params, input)?;
        let mut feats = Vec::with_capacity(self.groups.len());
        let mut f = f0.clone();
        for group in &self.groups {
            f = group.forward(g, params, &f)?;
            feats.push(f.clone());
        }
        let fused = match &self.aggregate {
            Some(agg) => {
                let cat = g.concat(&feats)?;
                agg.forward(g, params, &cat)?
            }
            None => f,
        };
        let fused = self.fuse.forward(g, params, &fused)?;
        let skip = g.add(&fused, &f0)?;
        let rec = self.reconstruct.forward(g, params, &skip)?;
        g.pixel_shuffle(&rec, self.config.scale)
    }

    /// Value-only forward pass.
    pub fn infer<T: Scalar>(&self, params: &ParamStore<T>, input: &Tensor<T>) -> Result<Tensor<T>> {
        input.expect_finite("network input")?;
        let mut g = Eval::<T>::new();
        let vars: Vec<_> = params.iter().map(|e| g.leaf(e.value.clone())).collect();
        let x = g.leaf(input.clone());
        let y = self.forward(&mut g, &vars, &x)?;
        drop(vars);
        Ok(Arc::try_unwrap(y).unwrap_or_else(|a| (*a).clone()))
    }
}
