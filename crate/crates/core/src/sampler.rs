//! Conditional reverse diffusion with a closed-form data-consistency step.
//!
//! Each visited timestep predicts the noise, forms x̂₀, replaces it by the
//! observation-consistent x̃₀, and moves to the next timestep with a mix of the
//! implied noise and fresh noise.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::denoiser::{predict_noise, Denoiser};
use crate::error::{Error, Result};
use crate::geometry::BinaryMask;
use crate::image::{Image, CANONICAL_MAX};
use crate::kernel::{replicate_upsample, ConvKernel};
use crate::schedule::{estimate_x0, forward_sample, NoiseSchedule};
use crate::solvers::{inpaint_data_solution, SrOperator};

pub const DEFAULT_NFE: usize = 20;
pub const DEFAULT_RHO: f64 = 0.5;
pub const DEFAULT_SIGMA: f64 = 0.001;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerConfig {
    /// Denoiser evaluations per restoration.
    pub nfe: usize,
    /// Weight of fresh noise in each reverse step, in [0, 1].
    pub rho: f64,
    /// Observation noise level, in the denoiser's working units.
    pub sigma: f64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            nfe: DEFAULT_NFE,
            rho: DEFAULT_RHO,
            sigma: DEFAULT_SIGMA,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.nfe == 0 {
            return Err(Error::invalid("nfe", "must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.rho) {
            return Err(Error::invalid("rho", format!("{} not in [0, 1]", self.rho)));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::invalid(
                "sigma",
                format!("{} must be finite and > 0", self.sigma),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TaskKind {
    SuperResolution {
        scale: usize,
        kernel: ConvKernel,
    },
    /// `mask` is 1 where the observation is trusted.
    Inpainting {
        mask: BinaryMask,
    },
}

/// Degradation model plus its observation, on the canonical scale.
#[derive(Debug, Clone, PartialEq)]
pub struct RestorationTask {
    kind: TaskKind,
    observation: Image,
    sigma: f64,
}

impl RestorationTask {
    /// `observation` is the (H/s)×(W/s) low-resolution image.
    pub fn super_resolution(
        observation: Image,
        scale: usize,
        kernel: ConvKernel,
        sigma: f64,
    ) -> Result<Self> {
        if scale == 0 {
            return Err(Error::invalid("scale", "must be at least 1"));
        }
        Self::checked(TaskKind::SuperResolution { scale, kernel }, observation, sigma)
    }

    pub fn inpainting(observation: Image, mask: BinaryMask, sigma: f64) -> Result<Self> {
        if (mask.height(), mask.width()) != (observation.height(), observation.width()) {
            return Err(Error::shape(
                format!("{}x{} mask", observation.height(), observation.width()),
                format!("{}x{}", mask.height(), mask.width()),
            ));
        }
        Self::checked(TaskKind::Inpainting { mask }, observation, sigma)
    }

    fn checked(kind: TaskKind, observation: Image, sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::invalid("sigma", format!("{sigma} must be finite and > 0")));
        }
        if !observation.is_finite() {
            return Err(Error::NonFinite("observation".into()));
        }
        Ok(Self {
            kind,
            observation,
            sigma,
        })
    }

    pub fn kind(&self) -> &TaskKind {
        &self.kind
    }

    pub fn observation(&self) -> &Image {
        &self.observation
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// (height, width) of the image being restored.
    pub fn output_dims(&self) -> (usize, usize) {
        match &self.kind {
            TaskKind::SuperResolution { scale, .. } => (
                self.observation.height() * scale,
                self.observation.width() * scale,
            ),
            TaskKind::Inpainting { .. } => (self.observation.height(), self.observation.width()),
        }
    }
}

/// `nfe` timesteps spaced uniformly from T down to 1, strictly decreasing.
pub fn timesteps(steps: usize, nfe: usize) -> Result<Vec<usize>> {
    if nfe == 0 {
        return Err(Error::invalid("nfe", "must be at least 1"));
    }
    if nfe > steps {
        return Err(Error::invalid(
            "nfe",
            format!("{nfe} exceeds the {steps} schedule steps"),
        ));
    }
    if nfe == 1 {
        return Ok(vec![steps]);
    }
    let span = (steps - 1) as f64 / (nfe - 1) as f64;
    Ok((0..nfe)
        .map(|i| (steps as f64 - span * i as f64).round() as usize)
        .collect())
}

enum DataStep {
    Sr(Box<SrOperator>),
    Inpaint(BinaryMask),
}

impl DataStep {
    fn apply(&self, x0_hat: &Image, y: &Image, eta: f64) -> Result<Image> {
        match self {
            DataStep::Sr(op) => op.solve(x0_hat, y, eta),
            DataStep::Inpaint(mask) => inpaint_data_solution(x0_hat, y, mask, eta),
        }
    }
}

fn standard_normal_like(like: &Image, rng: &mut ChaCha8Rng) -> Image {
    let s = like.shape();
    let data = (0..s.len()).map(|_| StandardNormal.sample(rng)).collect();
    Image::from_planar(s.height, s.width, s.channels, data).expect("length matches shape")
}

/// Runs the conditional sampler and returns the restored image on the
/// canonical scale, clamped to `[0, 255]`. Deterministic for a fixed seed.
pub fn restore(
    task: &RestorationTask,
    den: &dyn Denoiser,
    sched: &NoiseSchedule,
    cfg: &SamplerConfig,
    rng_seed: u64,
) -> Result<Image> {
    cfg.validate()?;
    let ts = timesteps(sched.steps(), cfg.nfe)?;
    let range = den.value_range();
    let y = task.observation().map(|v| range.from_canonical(v));
    let (h, w) = task.output_dims();
    let channels = y.channels();
    if let Some(shape) = den.expected_shape() {
        if (shape.height, shape.width, shape.channels) != (h, w, channels) {
            return Err(Error::shape(shape, format!("{h}x{w}x{channels} task")));
        }
    }

    let (step, coarse) = match task.kind() {
        TaskKind::SuperResolution { scale, kernel } => {
            let op = SrOperator::new(h, w, *scale, kernel.clone())?;
            let mut data = Vec::with_capacity(h * w * channels);
            for c in 0..channels {
                data.extend(replicate_upsample(y.plane(c), y.height(), y.width(), *scale)?);
            }
            (
                DataStep::Sr(Box::new(op)),
                Image::from_planar(h, w, channels, data)?,
            )
        }
        TaskKind::Inpainting { mask } => {
            let mid = range.midpoint();
            let coarse = Image::from_fn(h, w, channels, |yy, xx, c| {
                if mask.get(yy, xx) {
                    y.get(yy, xx, c)
                } else {
                    mid
                }
            });
            (DataStep::Inpaint(mask.clone()), coarse)
        }
    };

    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let noise = standard_normal_like(&coarse, &mut rng);
    let mut x = forward_sample(&coarse, ts[0], &noise, sched)?;
    let (keep, fresh) = ((1.0 - cfg.rho).sqrt(), cfg.rho.sqrt());

    for (i, &t) in ts.iter().enumerate() {
        let eps = predict_noise(den, &x, t, sched)?;
        let x0_hat = estimate_x0(&x, t, &eps, sched)?;
        let eta = sched.eta(t, task.sigma())?;
        let x0_tilde = step.apply(&x0_hat, &y, eta)?;
        if !x0_tilde.is_finite() {
            return Err(Error::NonFinite(format!("data-consistent estimate at t={t}")));
        }
        let t_prev = ts.get(i + 1).copied().unwrap_or(0);
        if t_prev == 0 {
            x = x0_tilde;
            break;
        }
        let a = sched.alpha_bar(t)?;
        let a_prev = sched.alpha_bar(t_prev)?;
        let z = standard_normal_like(&x, &mut rng);
        let (ra, inv_noise) = (a.sqrt(), 1.0 / (1.0 - a).sqrt());
        let (rap, rnp) = (a_prev.sqrt(), (1.0 - a_prev).sqrt());
        let mut next = x0_tilde.clone();
        for (((n, &xt), &x0), &zv) in next
            .as_mut_slice()
            .iter_mut()
            .zip(x.as_slice())
            .zip(x0_tilde.as_slice())
            .zip(z.as_slice())
        {
            let eps_eff = (xt - ra * x0) * inv_noise;
            *n = rap * x0 + rnp * (keep * eps_eff + fresh * zv);
        }
        x = next;
    }

    Ok(x.map(|v| range.to_canonical(v).clamp(0.0, CANONICAL_MAX)))
}
