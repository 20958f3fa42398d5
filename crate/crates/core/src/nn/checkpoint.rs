//! Checkpoint files.
//!
//! Magic `ACUR`, format version, then header fields (input shape, layer
//! specs, epoch counter, hyperparameters, RNG position, tensor shape table),
//! then every parameter tensor followed by every velocity tensor as raw
//! little-endian `f64`, then CRC-32.

use std::path::Path;

use crate::error::{PersistError, Result};
use crate::nn::network::NetworkState;
use crate::nn::optim::HyperParams;
use crate::nn::spec::{Activation, ConvSpec, DenseSpec, LayerSpec, LrnSpec, PoolSpec};
use crate::persist::{write_atomic, Decoder, Encoder};
use crate::rng::RngState;
use crate::tensor::Tensor;

pub const CHECKPOINT_MAGIC: [u8; 4] = *b"ACUR";
pub const CHECKPOINT_VERSION: u16 = 1;

/// Everything needed to resume training bit-exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub network: NetworkState,
    pub hyper: HyperParams,
    pub rng: RngState,
}

fn encode_spec(e: &mut Encoder, spec: &LayerSpec) {
    match *spec {
        LayerSpec::Conv(c) => {
            e.u8(0)
                .u32(c.out_channels as u32)
                .u32(c.kernel_h as u32)
                .u32(c.kernel_w as u32)
                .u32(c.stride as u32)
                .u32(c.pad as u32);
        }
        LayerSpec::MaxPool(p) => {
            e.u8(1).u32(p.window as u32).u32(p.stride as u32);
        }
        LayerSpec::Lrn(l) => {
            e.u8(2).u32(l.size as u32).f64(l.k).f64(l.alpha).f64(l.beta);
        }
        LayerSpec::Flatten => {
            e.u8(3);
        }
        LayerSpec::Dense(d) => {
            let act = match d.activation {
                Activation::None => 0,
                Activation::Tanh => 1,
                Activation::Softmax => 2,
            };
            e.u8(4).u32(d.units as u32).u8(act).f64(d.dropout_rate);
        }
    }
}

fn decode_spec(d: &mut Decoder<'_>) -> Result<LayerSpec, PersistError> {
    Ok(match d.u8()? {
        0 => LayerSpec::Conv(ConvSpec {
            out_channels: d.u32()? as usize,
            kernel_h: d.u32()? as usize,
            kernel_w: d.u32()? as usize,
            stride: d.u32()? as usize,
            pad: d.u32()? as usize,
        }),
        1 => LayerSpec::MaxPool(PoolSpec {
            window: d.u32()? as usize,
            stride: d.u32()? as usize,
        }),
        2 => LayerSpec::Lrn(LrnSpec {
            size: d.u32()? as usize,
            k: d.f64()?,
            alpha: d.f64()?,
            beta: d.f64()?,
        }),
        3 => LayerSpec::Flatten,
        4 => {
            let units = d.u32()? as usize;
            let activation = match d.u8()? {
                0 => Activation::None,
                1 => Activation::Tanh,
                2 => Activation::Softmax,
                other => return Err(PersistError::Malformed(format!("activation tag {other}"))),
            };
            LayerSpec::Dense(DenseSpec {
                units,
                activation,
                dropout_rate: d.f64()?,
            })
        }
        other => return Err(PersistError::Malformed(format!("layer kind tag {other}"))),
    })
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Vec<u8> {
        let net = &self.network;
        let mut e = Encoder::new(CHECKPOINT_MAGIC, CHECKPOINT_VERSION);

        let mut f = Encoder::body();
        for d in net.input_shape() {
            f.u32(d as u32);
        }
        e.field(f);

        let mut f = Encoder::body();
        f.u32(net.specs().len() as u32);
        for spec in net.specs() {
            encode_spec(&mut f, spec);
        }
        e.field(f);

        let mut f = Encoder::body();
        f.u64(net.epoch);
        e.field(f);

        let mut f = Encoder::body();
        f.f64(self.hyper.learning_rate)
            .f64(self.hyper.momentum)
            .u64(self.hyper.batch_size as u64);
        e.field(f);

        let mut f = Encoder::body();
        f.u64(self.rng.seed).u64(self.rng.stream).u128(self.rng.word_pos);
        e.field(f);

        // Shape table: per layer, tensor count then each tensor's dims.
        let mut f = Encoder::body();
        for layer in net.params() {
            f.u8(layer.len() as u8);
            for t in layer {
                f.u8(t.rank() as u8);
                for &dim in t.shape() {
                    f.u32(dim as u32);
                }
            }
        }
        e.field(f);

        for t in net.params().iter().chain(net.velocities()).flatten() {
            e.f64s(t.data());
        }
        e.finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut d = Decoder::open(bytes, CHECKPOINT_MAGIC, CHECKPOINT_VERSION)?;

        let mut f = d.field()?;
        let input_shape = [f.u32()? as usize, f.u32()? as usize, f.u32()? as usize];
        f.expect_end()?;

        let mut f = d.field()?;
        let n_layers = f.u32()? as usize;
        let specs = (0..n_layers)
            .map(|_| decode_spec(&mut f))
            .collect::<Result<Vec<_>, _>>()?;
        f.expect_end()?;

        let mut f = d.field()?;
        let epoch = f.u64()?;
        f.expect_end()?;

        let mut f = d.field()?;
        let hyper = HyperParams {
            learning_rate: f.f64()?,
            momentum: f.f64()?,
            batch_size: f.u64()? as usize,
        };
        f.expect_end()?;

        let mut f = d.field()?;
        let rng = RngState {
            seed: f.u64()?,
            stream: f.u64()?,
            word_pos: f.u128()?,
        };
        f.expect_end()?;

        let mut f = d.field()?;
        let mut table: Vec<Vec<Vec<usize>>> = Vec::with_capacity(n_layers);
        for _ in 0..n_layers {
            let count = f.u8()? as usize;
            let mut layer = Vec::with_capacity(count);
            for _ in 0..count {
                let rank = f.u8()? as usize;
                let dims = (0..rank)
                    .map(|_| f.u32().map(|v| v as usize))
                    .collect::<Result<Vec<_>, _>>()?;
                layer.push(dims);
            }
            table.push(layer);
        }
        f.expect_end()?;

        let read_group = |d: &mut Decoder<'_>| -> Result<Vec<Vec<Tensor>>> {
            table
                .iter()
                .map(|layer| {
                    layer
                        .iter()
                        .map(|shape| {
                            let len = shape.iter().product();
                            Tensor::from_vec(shape, d.f64s(len)?)
                        })
                        .collect()
                })
                .collect()
        };
        let params = read_group(&mut d)?;
        let velocities = read_group(&mut d)?;
        d.expect_end()?;

        let network = NetworkState::from_parts(input_shape, specs, params, velocities, epoch)?;
        Ok(Self {
            network,
            hyper,
            rng,
        })
    }
}

pub fn checkpoint_save(checkpoint: &Checkpoint, path: &Path) -> Result<()> {
    write_atomic(path, &checkpoint.to_bytes())
}

pub fn checkpoint_load(path: &Path) -> Result<Checkpoint> {
    let bytes = std::fs::read(path)?;
    Checkpoint::from_bytes(&bytes)
}
