//! Noise schedules.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Linear β endpoints are quoted for a 1000-step chain and rescaled to the
/// actual chain length, so shortening the chain keeps `ᾱ_T` near zero.
pub const REFERENCE_STEPS: usize = 1000;

/// Largest β a rescaled schedule may reach.
pub const MAX_BETA: f64 = 0.999;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScheduleError {
    #[error("schedule needs at least 2 steps, got {0}")]
    TooShort(usize),
    #[error("beta_{index} = {value} is outside (0, 1)")]
    BetaOutOfRange { index: usize, value: f64 },
    #[error("betas must be non-decreasing (beta_{index} drops)")]
    NotMonotone { index: usize },
    #[error("sandwich indices must satisfy 0 <= t2 < t1 < T (t1 = {t1}, t2 = {t2}, T = {steps})")]
    BadSandwich { t1: usize, t2: usize, steps: usize },
    #[error("fraction `{name}` = {value} must lie in [0, 1)")]
    BadFraction { name: &'static str, value: f64 },
}

/// User-facing schedule parameters (config keys `T`, `beta_start`,
/// `beta_end`, `t1_frac`, `t2_frac`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduleConfig {
    #[serde(rename = "T")]
    pub steps: usize,
    pub beta_start: f64,
    pub beta_end: f64,
    pub t1_frac: f64,
    pub t2_frac: f64,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        ScheduleConfig {
            steps: 50,
            beta_start: 1e-4,
            beta_end: 0.02,
            t1_frac: 0.4,
            t2_frac: 0.25,
        }
    }
}

impl ScheduleConfig {
    pub fn build(&self) -> Result<DiffusionSchedule, ScheduleError> {
        DiffusionSchedule::from_config(self)
    }
}

/// β₁..β_T with cumulative products and the two sandwich timesteps.
///
/// Timesteps run `0..=T`; `ᾱ_0 = 1` is the clean sample.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffusionSchedule {
    betas: Vec<f64>,
    alpha_bars: Vec<f64>,
    t1: usize,
    t2: usize,
}

impl DiffusionSchedule {
    pub fn from_config(cfg: &ScheduleConfig) -> Result<Self, ScheduleError> {
        for (name, value) in [("t1_frac", cfg.t1_frac), ("t2_frac", cfg.t2_frac)] {
            if !(0.0..1.0).contains(&value) {
                return Err(ScheduleError::BadFraction { name, value });
            }
        }
        let betas = linear_betas(cfg.steps, cfg.beta_start, cfg.beta_end)?;
        let t1 = (cfg.t1_frac * cfg.steps as f64).floor() as usize;
        let t2 = (cfg.t2_frac * cfg.steps as f64).floor() as usize;
        DiffusionSchedule::from_betas(betas, t1, t2)
    }

    pub fn from_betas(betas: Vec<f64>, t1: usize, t2: usize) -> Result<Self, ScheduleError> {
        let steps = betas.len();
        if steps < 2 {
            return Err(ScheduleError::TooShort(steps));
        }
        for (i, &b) in betas.iter().enumerate() {
            if !(b > 0.0 && b < 1.0) {
                return Err(ScheduleError::BetaOutOfRange { index: i + 1, value: b });
            }
            if i > 0 && b < betas[i - 1] {
                return Err(ScheduleError::NotMonotone { index: i + 1 });
            }
        }
        if !(t2 < t1 && t1 < steps) {
            return Err(ScheduleError::BadSandwich { t1, t2, steps });
        }
        let mut alpha_bars = Vec::with_capacity(steps + 1);
        alpha_bars.push(1.0);
        for &b in &betas {
            let prev = *alpha_bars.last().unwrap();
            alpha_bars.push(prev * (1.0 - b));
        }
        Ok(DiffusionSchedule {
            betas,
            alpha_bars,
            t1,
            t2,
        })
    }

    /// Total number of forward steps `T`.
    pub fn steps(&self) -> usize {
        self.betas.len()
    }

    /// `β_t` for `1 ≤ t ≤ T`.
    pub fn beta(&self, t: usize) -> f64 {
        self.betas[t - 1]
    }

    pub fn betas(&self) -> &[f64] {
        &self.betas
    }

    /// `ᾱ_t = Π_{s≤t} (1 − β_s)`, with `ᾱ_0 = 1`.
    pub fn alpha_bar(&self, t: usize) -> f64 {
        self.alpha_bars[t]
    }

    pub fn t1(&self) -> usize {
        self.t1
    }

    pub fn t2(&self) -> usize {
        self.t2
    }

    /// Posterior variance `β̃_t` of the ancestral step `t → t−1`.
    pub fn posterior_variance(&self, t: usize) -> f64 {
        self.beta(t) * (1.0 - self.alpha_bar(t - 1)) / (1.0 - self.alpha_bar(t))
    }
}

/// Linear β ramp for `steps` steps, with endpoints quoted at
/// [`REFERENCE_STEPS`] and rescaled by `REFERENCE_STEPS / steps`.
pub fn linear_betas(steps: usize, beta_start: f64, beta_end: f64) -> Result<Vec<f64>, ScheduleError> {
    if steps < 2 {
        return Err(ScheduleError::TooShort(steps));
    }
    let scale = REFERENCE_STEPS as f64 / steps as f64;
    let lo = beta_start * scale;
    let hi = beta_end * scale;
    Ok((0..steps)
        .map(|i| {
            let b = lo + (hi - lo) * i as f64 / (steps - 1) as f64;
            b.min(MAX_BETA)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_schedule_constants() {
        let s = ScheduleConfig::default().build().unwrap();
        assert_eq!(s.steps(), 50);
        assert_eq!(s.t1(), 20);
        assert_eq!(s.t2(), 12);
        assert_eq!(s.alpha_bar(0), 1.0);
        assert!((s.beta(1) - 0.002).abs() < 1e-15);
        assert!((s.beta(50) - 0.4).abs() < 1e-15);
        // Terminal marginal is essentially pure noise.
        assert!(s.alpha_bar(50) < 1e-4, "alpha_bar_T = {}", s.alpha_bar(50));
    }

    #[test]
    fn alpha_bar_matches_explicit_product() {
        let s = ScheduleConfig::default().build().unwrap();
        for t in [1, 7, 20, 50] {
            let product: f64 = (1..=t).map(|k| 1.0 - s.beta(k)).product();
            assert!((s.alpha_bar(t) - product).abs() < 1e-15);
        }
    }

    #[test]
    fn rejects_bad_schedules() {
        assert!(matches!(
            DiffusionSchedule::from_betas(vec![0.1, 0.05, 0.2], 2, 1),
            Err(ScheduleError::NotMonotone { index: 2 })
        ));
        assert!(matches!(
            DiffusionSchedule::from_betas(vec![0.1, 1.0], 1, 0),
            Err(ScheduleError::BetaOutOfRange { index: 2, .. })
        ));
        assert!(matches!(
            DiffusionSchedule::from_betas(vec![0.1, 0.2, 0.3], 1, 1),
            Err(ScheduleError::BadSandwich { .. })
        ));
        assert!(matches!(
            DiffusionSchedule::from_betas(vec![0.1, 0.2, 0.3], 3, 1),
            Err(ScheduleError::BadSandwich { .. })
        ));
        let cfg = ScheduleConfig {
            t1_frac: 1.2,
            ..ScheduleConfig::default()
        };
        assert!(cfg.build().is_err());
    }

    #[test]
    fn short_chains_clamp_beta() {
        let betas = linear_betas(10, 1e-4, 0.02).unwrap();
        assert!(betas.iter().all(|&b| b > 0.0 && b <= MAX_BETA));
        assert_eq!(*betas.last().unwrap(), MAX_BETA);
    }
}
