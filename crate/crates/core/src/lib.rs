//! Diffusion-based adversarial patch decontamination.
//!
//! The defense degrades the input by bicubic down-sampling, restores it with a
//! diffusion sampler whose every step is made consistent with the low-resolution
//! observation, and reads the patch location off the restoration residual. The
//! located region is then masked and filled by the same sampler in inpainting
//! mode. [`theory`] checks the accompanying ℓ2 restoration bound on Gaussian
//! data with exact scores.

pub mod denoiser;
pub mod error;
pub mod fft;
pub mod geometry;
pub mod image;
pub mod kernel;
pub mod localizer;
pub mod metrics;
#[cfg(feature = "onnx")]
pub mod onnx;
pub mod pipeline;
pub mod sampler;
pub mod schedule;
pub mod solvers;
pub mod suite;
pub mod theory;

pub use denoiser::{
    gallery_x0, gaussian_score, predict_noise, Denoiser, DenoiserHandle, GalleryDenoiser,
    GaussianAnalyticDenoiser, GaussianPrior, ValueRange, ZeroDenoiser,
};
pub use error::{Error, Result};
pub use geometry::{BinaryMask, PatchBox};
pub use image::{Image, Shape, CANONICAL_MAX};
pub use kernel::{make_bicubic_kernel, ConvKernel};
pub use localizer::{LocalizerConfig, ResidualMap};
pub use pipeline::{
    apply_patch, bicubic_downsample, defend, defend_batch, localize, make_synthetic_patch, working_dims,
    DecontaminationResult, Diagnostics, DiffPadConfig, Localization, PatchKind, ResultSummary,
};
pub use sampler::{restore, RestorationTask, SamplerConfig, TaskKind};
pub use schedule::{estimate_x0, forward_sample, NoiseSchedule, ScheduleConfig};
pub use solvers::{inpaint_data_solution, sr_data_solution, SrOperator};
pub use theory::BoundReport;
