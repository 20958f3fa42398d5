use serde::{Deserialize, Serialize};

use crate::error::{param_err, shape_err, Result};

/// Convolution with ReLU activation. Implemented as cross-correlation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvSpec {
    pub out_channels: usize,
    pub kernel_h: usize,
    pub kernel_w: usize,
    pub stride: usize,
    pub pad: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PoolSpec {
    pub window: usize,
    pub stride: usize,
}

/// Cross-channel local response normalization:
/// `out[c] = in[c] / (k + alpha * sum_{|c'-c| <= size/2} in[c']^2)^beta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LrnSpec {
    /// Channel window width `n`; odd.
    pub size: usize,
    pub k: f64,
    pub alpha: f64,
    pub beta: f64,
}

impl Default for LrnSpec {
    fn default() -> Self {
        Self {
            size: 5,
            k: 2.0,
            alpha: 1e-4,
            beta: 0.75,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activation {
    None,
    Tanh,
    Softmax,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DenseSpec {
    pub units: usize,
    pub activation: Activation,
    pub dropout_rate: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum LayerSpec {
    Conv(ConvSpec),
    MaxPool(PoolSpec),
    Lrn(LrnSpec),
    Flatten,
    Dense(DenseSpec),
}

impl LayerSpec {
    pub fn kind_name(&self) -> &'static str {
        match self {
            LayerSpec::Conv(_) => "conv",
            LayerSpec::MaxPool(_) => "maxpool",
            LayerSpec::Lrn(_) => "lrn",
            LayerSpec::Flatten => "flatten",
            LayerSpec::Dense(_) => "dense",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            LayerSpec::Conv(c) => {
                if c.out_channels == 0 || c.kernel_h == 0 || c.kernel_w == 0 || c.stride == 0 {
                    return param_err(format!("invalid conv spec {c:?}"));
                }
            }
            LayerSpec::MaxPool(p) => {
                if p.window == 0 || p.stride == 0 {
                    return param_err(format!("invalid pool spec {p:?}"));
                }
            }
            LayerSpec::Lrn(l) => {
                if l.size == 0 || l.size % 2 == 0 {
                    return param_err(format!("LRN window must be odd and positive, got {}", l.size));
                }
            }
            LayerSpec::Flatten => {}
            LayerSpec::Dense(d) => {
                if d.units == 0 {
                    return param_err("dense layer needs at least one unit");
                }
                if !(0.0..1.0).contains(&d.dropout_rate) {
                    return param_err(format!("dropout rate {} outside [0, 1)", d.dropout_rate));
                }
            }
        }
        Ok(())
    }

    /// Per-sample output shape for a per-sample input shape (no batch axis).
    pub fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        match *self {
            LayerSpec::Conv(c) => {
                let [_, h, w] = spatial(input, "conv")?;
                let ho = conv_extent(h, c.kernel_h, c.stride, c.pad)?;
                let wo = conv_extent(w, c.kernel_w, c.stride, c.pad)?;
                Ok(vec![c.out_channels, ho, wo])
            }
            LayerSpec::MaxPool(p) => {
                let [ch, h, w] = spatial(input, "maxpool")?;
                let ho = conv_extent(h, p.window, p.stride, 0)?;
                let wo = conv_extent(w, p.window, p.stride, 0)?;
                Ok(vec![ch, ho, wo])
            }
            LayerSpec::Lrn(_) => {
                spatial(input, "lrn")?;
                Ok(input.to_vec())
            }
            LayerSpec::Flatten => Ok(vec![input.iter().product()]),
            LayerSpec::Dense(d) => {
                if input.len() != 1 {
                    return shape_err(format!("dense layer expects flat input, got {input:?}"));
                }
                Ok(vec![d.units])
            }
        }
    }
}

fn spatial(input: &[usize], what: &str) -> Result<[usize; 3]> {
    match input {
        &[c, h, w] => Ok([c, h, w]),
        _ => shape_err(format!("{what} layer expects [C, H, W] input, got {input:?}")),
    }
}

pub(crate) fn conv_extent(size: usize, kernel: usize, stride: usize, pad: usize) -> Result<usize> {
    let padded = size + 2 * pad;
    if kernel > padded {
        return shape_err(format!(
            "window {kernel} larger than padded extent {padded}"
        ));
    }
    Ok((padded - kernel) / stride + 1)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scale {
    Full,
    Desk,
}

impl std::str::FromStr for Scale {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "full" => Ok(Scale::Full),
            "desk" => Ok(Scale::Desk),
            other => param_err(format!("unknown scale {other:?} (expected full|desk)")),
        }
    }
}

/// Geometry of the AlexNet-style stack:
/// `(conv + pool + lrn) x2, conv x3, pool + lrn, (dense + dropout) x2, dense softmax`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Architecture {
    /// `[C, H, W]` of one input image.
    pub input: [usize; 3],
    pub conv_channels: [usize; 5],
    pub conv1_kernel: usize,
    pub conv1_stride: usize,
    pub conv1_pad: usize,
    pub conv2_kernel: usize,
    /// Kernel size of conv3..conv5.
    pub conv_kernel: usize,
    pub pool: PoolSpec,
    pub lrn: LrnSpec,
    pub dense_units: usize,
    pub dropout: f64,
    pub n_classes: usize,
}

impl Architecture {
    /// 100x100 input with 22x22 first-layer filters and AlexNet channel counts.
    pub fn full(n_classes: usize) -> Self {
        Self {
            input: [1, 100, 100],
            conv_channels: [96, 256, 384, 384, 256],
            conv1_kernel: 22,
            conv1_stride: 2,
            conv1_pad: 0,
            conv2_kernel: 5,
            conv_kernel: 3,
            pool: PoolSpec { window: 3, stride: 2 },
            lrn: LrnSpec::default(),
            dense_units: 4096,
            dropout: 0.5,
            n_classes,
        }
    }

    /// Same layer ordering at 32x32 with reduced widths; trains on one CPU core.
    pub fn desk(n_classes: usize) -> Self {
        Self {
            input: [1, 32, 32],
            conv_channels: [16, 32, 32, 32, 32],
            conv1_kernel: 5,
            conv1_stride: 2,
            conv1_pad: 2,
            conv2_kernel: 5,
            conv_kernel: 3,
            pool: PoolSpec { window: 3, stride: 2 },
            lrn: LrnSpec::default(),
            dense_units: 128,
            dropout: 0.5,
            n_classes,
        }
    }

    pub fn for_scale(scale: Scale, n_classes: usize) -> Self {
        match scale {
            Scale::Full => Self::full(n_classes),
            Scale::Desk => Self::desk(n_classes),
        }
    }

    pub fn with_dropout(mut self, rate: f64) -> Self {
        self.dropout = rate;
        self
    }

    pub fn layer_specs(&self) -> Vec<LayerSpec> {
        let ch = self.conv_channels;
        let same = |out_channels, k: usize| {
            LayerSpec::Conv(ConvSpec {
                out_channels,
                kernel_h: k,
                kernel_w: k,
                stride: 1,
                pad: k / 2,
            })
        };
        let pool = LayerSpec::MaxPool(self.pool);
        let lrn = LayerSpec::Lrn(self.lrn);
        let hidden = LayerSpec::Dense(DenseSpec {
            units: self.dense_units,
            activation: Activation::Tanh,
            dropout_rate: self.dropout,
        });
        vec![
            LayerSpec::Conv(ConvSpec {
                out_channels: ch[0],
                kernel_h: self.conv1_kernel,
                kernel_w: self.conv1_kernel,
                stride: self.conv1_stride,
                pad: self.conv1_pad,
            }),
            pool,
            lrn,
            same(ch[1], self.conv2_kernel),
            pool,
            lrn,
            same(ch[2], self.conv_kernel),
            same(ch[3], self.conv_kernel),
            same(ch[4], self.conv_kernel),
            pool,
            lrn,
            LayerSpec::Flatten,
            hidden,
            hidden,
            LayerSpec::Dense(DenseSpec {
                units: self.n_classes,
                activation: Activation::Softmax,
                dropout_rate: 0.0,
            }),
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn infer(arch: &Architecture) -> Vec<Vec<usize>> {
        let mut shape = arch.input.to_vec();
        let mut out = Vec::new();
        for spec in arch.layer_specs() {
            shape = spec.output_shape(&shape).unwrap();
            out.push(shape.clone());
        }
        out
    }

    #[test]
    fn full_geometry() {
        let shapes = infer(&Architecture::full(438));
        assert_eq!(shapes[0], vec![96, 40, 40]);
        assert_eq!(shapes[1], vec![96, 19, 19]);
        assert_eq!(shapes[4], vec![256, 9, 9]);
        assert_eq!(shapes[9], vec![256, 4, 4]);
        assert_eq!(shapes[11], vec![4096]);
        assert_eq!(shapes.last().unwrap(), &vec![438]);
    }

    #[test]
    fn desk_geometry() {
        let shapes = infer(&Architecture::desk(10));
        assert_eq!(shapes[0], vec![16, 16, 16]);
        assert_eq!(shapes[1], vec![16, 7, 7]);
        assert_eq!(shapes[4], vec![32, 3, 3]);
        assert_eq!(shapes[10], vec![32, 1, 1]);
        assert_eq!(shapes[11], vec![32]);
        assert_eq!(shapes[13], vec![128]);
        assert_eq!(shapes[14], vec![10]);
    }

    #[test]
    fn only_final_layer_is_softmax() {
        let specs = Architecture::desk(3).layer_specs();
        let softmax: Vec<usize> = specs
            .iter()
            .enumerate()
            .filter(|(_, s)| matches!(s, LayerSpec::Dense(d) if d.activation == Activation::Softmax))
            .map(|(i, _)| i)
            .collect();
        assert_eq!(softmax, vec![specs.len() - 1]);
    }

    #[test]
    fn invalid_specs() {
        assert!(LayerSpec::Lrn(LrnSpec { size: 4, ..LrnSpec::default() }).validate().is_err());
        assert!(LayerSpec::Dense(DenseSpec {
            units: 3,
            activation: Activation::Tanh,
            dropout_rate: 1.0
        })
        .validate()
        .is_err());
        let pool = LayerSpec::MaxPool(PoolSpec { window: 5, stride: 1 });
        assert!(pool.output_shape(&[1, 4, 4]).is_err());
    }
}
