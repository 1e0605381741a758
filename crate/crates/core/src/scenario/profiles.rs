//! Analytic layer-shape calculator for the bundled synthetic model profiles.
//!
//! Each coarse layer is a convolution (with an optional trailing max-pool) or a
//! fully connected layer. Compute is counted as 2 FLOPs per multiply-accumulate
//! at one cycle per FLOP; memory is fp32 weights, biases and output
//! activations; output size is the fp32 activation volume after pooling.

use super::{DnnModelProfile, LayerProfile};

const BYTES_PER_VALUE: f64 = 4.0;
const BITS_PER_VALUE: f64 = 32.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LayerShape {
    Conv {
        out_channels: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
        /// Max-pool `(kernel, stride)` applied after the convolution.
        pool: Option<(usize, usize)>,
    },
    Fc {
        outputs: usize,
    },
}

fn conv_out(size: usize, kernel: usize, stride: usize, padding: usize) -> usize {
    (size + 2 * padding - kernel) / stride + 1
}

/// Runs the shapes over an input tensor `(channels, height, width)`.
pub fn profile_from_shapes(input: (usize, usize, usize), shapes: &[LayerShape]) -> Vec<LayerProfile> {
    let (mut c, mut h, mut w) = input;
    let mut flat: Option<usize> = None;
    let mut out = Vec::with_capacity(shapes.len());
    for (i, shape) in shapes.iter().enumerate() {
        let (macs, params, activations) = match *shape {
            LayerShape::Conv {
                out_channels,
                kernel,
                stride,
                padding,
                pool,
            } => {
                assert!(flat.is_none(), "convolution after a fully connected layer");
                let oh = conv_out(h, kernel, stride, padding);
                let ow = conv_out(w, kernel, stride, padding);
                let macs = oh * ow * out_channels * kernel * kernel * c;
                let params = out_channels * kernel * kernel * c + out_channels;
                let (ph, pw) = match pool {
                    Some((k, s)) => (conv_out(oh, k, s, 0), conv_out(ow, k, s, 0)),
                    None => (oh, ow),
                };
                c = out_channels;
                h = ph;
                w = pw;
                (macs, params, c * h * w)
            }
            LayerShape::Fc { outputs } => {
                let inputs = flat.unwrap_or(c * h * w);
                flat = Some(outputs);
                (inputs * outputs, inputs * outputs + outputs, outputs)
            }
        };
        out.push(LayerProfile {
            layer_index: i + 1,
            compute_cycles: 2.0 * macs as f64,
            memory_bytes: BYTES_PER_VALUE * (params + activations) as f64,
            output_bits: BITS_PER_VALUE * activations as f64,
        });
    }
    out
}

fn conv(out_channels: usize, kernel: usize, stride: usize, padding: usize) -> LayerShape {
    LayerShape::Conv {
        out_channels,
        kernel,
        stride,
        padding,
        pool: None,
    }
}

fn conv_pool(out_channels: usize, kernel: usize, stride: usize, padding: usize, pool: (usize, usize)) -> LayerShape {
    LayerShape::Conv {
        out_channels,
        kernel,
        stride,
        padding,
        pool: Some(pool),
    }
}

/// Eight coarse layers: five conv blocks and three fully connected layers on a
/// 227x227 RGB input.
pub fn alexnet_like() -> DnnModelProfile {
    let shapes = [
        conv_pool(96, 11, 4, 0, (3, 2)),
        conv_pool(256, 5, 1, 2, (3, 2)),
        conv(384, 3, 1, 1),
        conv(384, 3, 1, 1),
        conv_pool(256, 3, 1, 1, (3, 2)),
        LayerShape::Fc { outputs: 4096 },
        LayerShape::Fc { outputs: 4096 },
        LayerShape::Fc { outputs: 1000 },
    ];
    DnnModelProfile {
        kind: 2,
        name: "alexnet-like".into(),
        csv: None,
        layers: profile_from_shapes((3, 227, 227), &shapes),
    }
}

/// Thirteen 3x3 convolutions and three fully connected layers on 224x224.
pub fn vgg16_like() -> DnnModelProfile {
    let p = (2, 2);
    let shapes = [
        conv(64, 3, 1, 1),
        conv_pool(64, 3, 1, 1, p),
        conv(128, 3, 1, 1),
        conv_pool(128, 3, 1, 1, p),
        conv(256, 3, 1, 1),
        conv(256, 3, 1, 1),
        conv_pool(256, 3, 1, 1, p),
        conv(512, 3, 1, 1),
        conv(512, 3, 1, 1),
        conv_pool(512, 3, 1, 1, p),
        conv(512, 3, 1, 1),
        conv(512, 3, 1, 1),
        conv_pool(512, 3, 1, 1, p),
        LayerShape::Fc { outputs: 4096 },
        LayerShape::Fc { outputs: 4096 },
        LayerShape::Fc { outputs: 1000 },
    ];
    DnnModelProfile {
        kind: 3,
        name: "vgg16-like".into(),
        csv: None,
        layers: profile_from_shapes((3, 224, 224), &shapes),
    }
}

/// A plain-convolution stand-in for a nano-width YOLOv5 on 640x640: stem,
/// four downsampling stages each followed by a same-resolution block, a
/// pointwise neck and a pointwise detection head (3 anchors x 85 outputs).
pub fn yolov5_like() -> DnnModelProfile {
    let shapes = [
        conv(16, 6, 2, 2),
        conv(32, 3, 2, 1),
        conv(32, 3, 1, 1),
        conv(64, 3, 2, 1),
        conv(64, 3, 1, 1),
        conv(128, 3, 2, 1),
        conv(128, 3, 1, 1),
        conv(256, 3, 2, 1),
        conv(256, 3, 1, 1),
        conv(128, 1, 1, 0),
        conv(255, 1, 1, 0),
    ];
    DnnModelProfile {
        kind: 1,
        name: "yolov5-like".into(),
        csv: None,
        layers: profile_from_shapes((3, 640, 640), &shapes),
    }
}

/// The three bundled profiles, ordered by kind.
pub fn bundled_models() -> Vec<DnnModelProfile> {
    vec![yolov5_like(), alexnet_like(), vgg16_like()]
}
