//! Noise predictor backed by an ONNX network (feature `onnx`).
//!
//! The network takes `x` as `f32[1, C, H, W]` in `[-1, 1]` and the 0-based
//! timestep as `i64[1]`, and returns `f32[1, C', H, W]` with `C' ≥ C`. Only the
//! first `C` output channels are read, so models that also predict a variance
//! work unchanged.

use std::path::Path;

use tract_onnx::prelude::*;

use crate::denoiser::{Denoiser, ValueRange};
use crate::error::{Error, Result};
use crate::image::{Image, Shape};
use crate::schedule::NoiseSchedule;

type Plan = std::sync::Arc<TypedSimplePlan>;

pub struct OnnxDenoiser {
    plan: Plan,
    shape: Shape,
}

fn model_err(e: impl std::fmt::Display) -> Error {
    Error::Model(e.to_string())
}

impl OnnxDenoiser {
    /// Loads and optimizes the model for a fixed input shape.
    pub fn load(path: &Path, shape: Shape) -> Result<Self> {
        let (c, h, w) = (shape.channels, shape.height, shape.width);
        let plan = tract_onnx::onnx()
            .model_for_path(path)
            .and_then(|m| m.with_input_fact(0, f32::fact([1, c, h, w]).into()))
            .and_then(|m| m.with_input_fact(1, i64::fact([1]).into()))
            .and_then(|m| m.into_optimized())
            .and_then(|m| m.into_runnable())
            .map_err(|e| model_err(format!("{}: {e}", path.display())))?;
        Ok(Self { plan, shape })
    }
}

impl Denoiser for OnnxDenoiser {
    fn eval(&self, xt: &Image, t: usize, _sched: &NoiseSchedule) -> Result<Image> {
        let s = self.shape;
        let data: Vec<f32> = xt.as_slice().iter().map(|&v| v as f32).collect();
        let x = tract_ndarray::Array4::from_shape_vec((1, s.channels, s.height, s.width), data)
            .map_err(model_err)?;
        let step = tract_ndarray::arr1(&[t as i64 - 1]);
        let out = self
            .plan
            .run(tvec!(Tensor::from(x).into(), Tensor::from(step).into()))
            .map_err(model_err)?;
        let view = out[0].to_plain_array_view::<f32>().map_err(model_err)?;
        let dims = view.shape().to_vec();
        if dims.len() != 4 || dims[1] < s.channels || dims[2] != s.height || dims[3] != s.width {
            return Err(Error::shape(
                format!("[1, >={}, {}, {}]", s.channels, s.height, s.width),
                format!("{dims:?}"),
            ));
        }
        let n = s.channels * s.height * s.width;
        let flat: Vec<f64> = view.iter().take(n).map(|&v| v as f64).collect();
        Image::from_planar(s.height, s.width, s.channels, flat)
    }

    fn expected_shape(&self) -> Option<Shape> {
        Some(self.shape)
    }

    fn value_range(&self) -> ValueRange {
        ValueRange::SYMMETRIC_UNIT
    }
}
