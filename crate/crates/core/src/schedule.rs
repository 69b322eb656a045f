//! Discrete variance-preserving noise schedules and the elementary DDPM algebra.
//!
//! Steps are 1-based: `t = 1..=T`, with `t = 0` denoting clean data.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::Image;

pub const DEFAULT_STEPS: usize = 1000;
pub const DEFAULT_BETA_START: f64 = 1e-4;
pub const DEFAULT_BETA_END: f64 = 0.02;

/// Linear schedule parameters, as they appear in the JSON config.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScheduleConfig {
    #[serde(rename = "T")]
    pub steps: usize,
    pub beta_start: f64,
    pub beta_end: f64,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        Self {
            steps: DEFAULT_STEPS,
            beta_start: DEFAULT_BETA_START,
            beta_end: DEFAULT_BETA_END,
        }
    }
}

impl ScheduleConfig {
    pub fn build(&self) -> Result<NoiseSchedule> {
        NoiseSchedule::linear(self.steps, self.beta_start, self.beta_end)
    }
}

/// β_t and ᾱ_t tables of a discrete VP diffusion.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSchedule {
    betas: Vec<f64>,
    alpha_bars: Vec<f64>,
}

impl Default for NoiseSchedule {
    fn default() -> Self {
        Self::linear(DEFAULT_STEPS, DEFAULT_BETA_START, DEFAULT_BETA_END).expect("default schedule is valid")
    }
}

impl NoiseSchedule {
    /// Betas linearly spaced from `beta_start` to `beta_end` (inclusive).
    pub fn linear(steps: usize, beta_start: f64, beta_end: f64) -> Result<Self> {
        if steps == 0 {
            return Err(Error::invalid("T", "must be at least 1"));
        }
        for (name, v) in [("beta_start", beta_start), ("beta_end", beta_end)] {
            if !v.is_finite() || v <= 0.0 || v >= 1.0 {
                return Err(Error::invalid(name, format!("{v} not in (0, 1)")));
            }
        }
        if beta_start > beta_end {
            return Err(Error::invalid(
                "beta_start",
                format!("{beta_start} exceeds beta_end {beta_end}"),
            ));
        }
        let betas = if steps == 1 {
            vec![beta_start]
        } else {
            let step = (beta_end - beta_start) / (steps - 1) as f64;
            (0..steps).map(|i| beta_start + step * i as f64).collect()
        };
        Self::from_betas(betas)
    }

    /// Schedule from an explicit β table; each entry must lie in (0, 1).
    pub fn from_betas(betas: Vec<f64>) -> Result<Self> {
        if betas.is_empty() {
            return Err(Error::invalid("betas", "empty table"));
        }
        if let Some((i, b)) = betas
            .iter()
            .enumerate()
            .find(|(_, b)| !(b.is_finite() && **b > 0.0 && **b < 1.0))
        {
            return Err(Error::invalid(
                "betas",
                format!("beta[{}] = {b} not in (0, 1)", i + 1),
            ));
        }
        let alpha_bars = betas
            .iter()
            .scan(1.0, |acc, b| {
                *acc *= 1.0 - b;
                Some(*acc)
            })
            .collect();
        Ok(Self { betas, alpha_bars })
    }

    /// Number of diffusion steps T.
    pub fn steps(&self) -> usize {
        self.betas.len()
    }

    pub fn betas(&self) -> &[f64] {
        &self.betas
    }

    pub fn alpha_bars(&self) -> &[f64] {
        &self.alpha_bars
    }

    pub fn check_step(&self, t: usize) -> Result<()> {
        if t == 0 || t > self.steps() {
            return Err(Error::StepOutOfRange { t, max: self.steps() });
        }
        Ok(())
    }

    /// β_t for `t` in `1..=T`.
    pub fn beta(&self, t: usize) -> Result<f64> {
        self.check_step(t)?;
        Ok(self.betas[t - 1])
    }

    /// ᾱ_t for `t` in `0..=T`; ᾱ_0 = 1.
    pub fn alpha_bar(&self, t: usize) -> Result<f64> {
        if t == 0 {
            return Ok(1.0);
        }
        self.check_step(t)?;
        Ok(self.alpha_bars[t - 1])
    }

    /// Data-fidelity weight η_t = ᾱ_t σ² / (1 − ᾱ_t).
    pub fn eta(&self, t: usize, sigma: f64) -> Result<f64> {
        eta_from_alpha_bar(self.alpha_bar(t)?, sigma)
    }

    /// γ := −log ᾱ_T, the integrated β that makes e^{−γ} equal the terminal signal retention.
    pub fn gamma(&self) -> f64 {
        -self.alpha_bars[self.steps() - 1].ln()
    }

    /// Σ β_t, the Riemann-sum reading of ∫β over the normalized span (Δt·T = 1).
    pub fn gamma_riemann(&self) -> f64 {
        self.betas.iter().sum()
    }

    /// Piecewise-constant continuous-time β(τ) on normalized time τ ∈ [0, 1].
    ///
    /// Each step occupies an interval of length 1/T carrying rate −T·log(1 − β_t),
    /// so that exp(−∫₀^{t/T} β) reproduces ᾱ_t exactly at the grid points.
    pub fn continuous_beta(&self, tau: f64) -> f64 {
        let n = self.steps();
        let idx = ((tau * n as f64).ceil() as usize).clamp(1, n);
        -(n as f64) * (1.0 - self.betas[idx - 1]).ln()
    }

    /// ᾱ(τ) = exp(−∫₀^τ β) for the continuous extension, τ ∈ [0, 1].
    pub fn continuous_alpha_bar(&self, tau: f64) -> f64 {
        let n = self.steps();
        let pos = (tau.clamp(0.0, 1.0) * n as f64).max(0.0);
        let whole = (pos.floor() as usize).min(n);
        let before = if whole == 0 {
            1.0
        } else {
            self.alpha_bars[whole - 1]
        };
        if whole == n {
            return before;
        }
        let frac = pos - whole as f64;
        before * (1.0 - self.betas[whole]).powf(frac)
    }
}

/// η = ᾱσ²/(1 − ᾱ); rejects ᾱ = 1 where the weight is undefined.
pub fn eta_from_alpha_bar(alpha_bar: f64, sigma: f64) -> Result<f64> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::invalid(
            "sigma",
            format!("{sigma} must be finite and >= 0"),
        ));
    }
    if alpha_bar >= 1.0 {
        return Err(Error::DegenerateSchedule(format!(
            "alpha_bar = {alpha_bar} makes eta undefined"
        )));
    }
    Ok(alpha_bar * sigma * sigma / (1.0 - alpha_bar))
}

/// √ᾱ·x0 + √(1−ᾱ)·ε at an explicit ᾱ.
pub fn diffuse(x0: &Image, eps: &Image, alpha_bar: f64) -> Result<Image> {
    x0.axpby(alpha_bar.sqrt(), eps, (1.0 - alpha_bar).sqrt())
}

/// (x_t − √(1−ᾱ)·ε̂)/√ᾱ at an explicit ᾱ.
pub fn recover_x0(xt: &Image, eps_hat: &Image, alpha_bar: f64) -> Result<Image> {
    if alpha_bar <= 0.0 {
        return Err(Error::DegenerateSchedule(format!(
            "alpha_bar = {alpha_bar} admits no x0 estimate"
        )));
    }
    let inv = 1.0 / alpha_bar.sqrt();
    xt.axpby(inv, eps_hat, -(1.0 - alpha_bar).sqrt() * inv)
}

/// Closed-form forward sample x_t given x_0 and noise.
pub fn forward_sample(x0: &Image, t: usize, eps: &Image, sched: &NoiseSchedule) -> Result<Image> {
    sched.check_step(t)?;
    diffuse(x0, eps, sched.alpha_bar(t)?)
}

/// x̂₀ from x_t and a noise prediction.
pub fn estimate_x0(xt: &Image, t: usize, eps_hat: &Image, sched: &NoiseSchedule) -> Result<Image> {
    sched.check_step(t)?;
    recover_x0(xt, eps_hat, sched.alpha_bar(t)?)
}
