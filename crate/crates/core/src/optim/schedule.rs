//! Reinforcement-probability and learning-rate schedules.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Probability `Γ(t)` that a gradient component accumulates its history.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ReinforcementSchedule {
    /// `Γ(t) = 1 - γ^t` with `γ = γ0 · exp(-λ · t_ep)` frozen for each epoch.
    ExpGamma { gamma0: f64, lambda: f64 },
    /// `Γ(t) = 1 - a0 / (t + 1)^b0`, clamped to `[0, 1]`.
    PowerLaw { a0: f64, b0: f64 },
}

impl ReinforcementSchedule {
    /// The schedule that never reinforces (`γ0 = 1, λ = 0`).
    pub const NEVER: ReinforcementSchedule = ReinforcementSchedule::ExpGamma {
        gamma0: 1.0,
        lambda: 0.0,
    };

    pub fn exp_gamma(gamma0: f64, lambda: f64) -> Result<Self> {
        let s = ReinforcementSchedule::ExpGamma { gamma0, lambda };
        s.validate()?;
        Ok(s)
    }

    pub fn power_law(a0: f64, b0: f64) -> Result<Self> {
        let s = ReinforcementSchedule::PowerLaw { a0, b0 };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            ReinforcementSchedule::ExpGamma { gamma0, lambda } => {
                if !(gamma0 > 0.0 && gamma0 <= 1.0) {
                    return Err(Error::Config(format!(
                        "gamma0 must lie in (0, 1], got {gamma0}"
                    )));
                }
                if !(lambda >= 0.0 && lambda.is_finite()) {
                    return Err(Error::Config(format!("lambda must be >= 0, got {lambda}")));
                }
            }
            ReinforcementSchedule::PowerLaw { a0, b0 } => {
                if !(a0 > 0.0 && a0.is_finite()) || !(b0 > 0.0 && b0.is_finite()) {
                    return Err(Error::Config(format!(
                        "a0 and b0 must be > 0, got a0={a0}, b0={b0}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// `γ` in effect after `t_ep` completed epochs (exp-gamma family only).
    pub fn gamma(&self, t_ep: u64) -> Option<f64> {
        match *self {
            ReinforcementSchedule::ExpGamma { gamma0, lambda } => {
                Some(gamma0 * (-lambda * t_ep as f64).exp())
            }
            ReinforcementSchedule::PowerLaw { .. } => None,
        }
    }

    /// `Γ(t)` at cumulative step `t` during the epoch that follows `t_ep`
    /// completed epochs.
    pub fn gamma_at(&self, t: u64, t_ep: u64) -> f64 {
        let p = match *self {
            ReinforcementSchedule::ExpGamma { .. } => {
                let gamma = self.gamma(t_ep).unwrap();
                1.0 - gamma.powf(t as f64)
            }
            ReinforcementSchedule::PowerLaw { a0, b0 } => 1.0 - a0 / ((t + 1) as f64).powf(b0),
        };
        p.clamp(0.0, 1.0)
    }

    /// Time constant `τ_R = -1 / (ln γ0 - λ t_ep)` of the exp-gamma family,
    /// infinite when reinforcement is switched off.
    pub fn time_scale(&self, t_ep: u64) -> Option<f64> {
        match *self {
            ReinforcementSchedule::ExpGamma { gamma0, lambda } => {
                let rate = gamma0.ln() - lambda * t_ep as f64;
                Some(if rate == 0.0 {
                    f64::INFINITY
                } else {
                    -1.0 / rate
                })
            }
            ReinforcementSchedule::PowerLaw { .. } => None,
        }
    }
}

/// Per-epoch learning rate `η_e = η_{e-1} · β^e`, floored.
///
/// Epoch 1 runs at `max(η0, floor)`; after epoch `e` the rate is multiplied
/// by `β^e`. The closed form is `η_e = max(η0 · β^{e(e-1)/2}, floor)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LearningRateSchedule {
    pub eta0: f64,
    pub beta: f64,
    pub floor: f64,
}

impl LearningRateSchedule {
    pub fn new(eta0: f64, beta: f64, floor: f64) -> Result<Self> {
        if !(eta0 > 0.0 && eta0.is_finite()) {
            return Err(Error::Config(format!("eta0 must be > 0, got {eta0}")));
        }
        if !(beta > 0.0 && beta <= 1.0) {
            return Err(Error::Config(format!(
                "beta must lie in (0, 1], got {beta}"
            )));
        }
        if !(floor > 0.0 && floor.is_finite()) {
            return Err(Error::Config(format!("eta floor must be > 0, got {floor}")));
        }
        Ok(Self { eta0, beta, floor })
    }

    /// Rate used throughout epoch `epoch` (1-based).
    pub fn eta_at(&self, epoch: u64) -> f64 {
        let e = epoch.max(1) as f64;
        let exponent = e * (e - 1.0) / 2.0;
        (self.eta0 * self.beta.powf(exponent)).max(self.floor)
    }
}

/// Distribution of the memory length `ℒ = 0..=t` of the reinforced gradient
/// at step `t`:
///
/// `P_t(ℒ) = (1 - Γ(t - ℒ)) · Π_{l = t-ℒ+1}^{t} Γ(l)`, with `Γ(0) = 0`.
///
/// `epoch_of` maps a step index to the number of epochs completed before it.
pub fn memory_length_pmf(
    schedule: &ReinforcementSchedule,
    t: u64,
    epoch_of: impl Fn(u64) -> u64,
) -> Vec<f64> {
    let gamma = |l: u64| {
        if l == 0 {
            0.0
        } else {
            schedule.gamma_at(l, epoch_of(l))
        }
    };
    let mut pmf = Vec::with_capacity(t as usize + 1);
    let mut survive = 1.0;
    for len in 0..=t {
        let g = gamma(t - len);
        pmf.push((1.0 - g) * survive);
        survive *= g;
    }
    pmf
}
