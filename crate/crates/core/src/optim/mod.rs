//! Optimizers: vanilla SGD, reinforced SGD, momentum SGD, Nesterov momentum and Adam.
//!
//! Every step function takes the mini-batch mean gradient (or, for Nesterov,
//! a gradient oracle) and returns the parameter delta `ΔW`. The caller owns
//! the learning rate schedule and passes the current `η` in.

mod schedule;
mod unfold;

pub use schedule::{memory_length_pmf, LearningRateSchedule, ReinforcementSchedule};
pub use unfold::sgdm_unfold;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{GradientSet, NetworkParams};
use crate::rng::RngStream;

/// How the momentum coefficient `ρ_t` is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MomentumPolicy {
    Fixed(f64),
    /// `ρ_t = Γ(t)` from a reinforcement schedule.
    Adaptive(ReinforcementSchedule),
}

impl MomentumPolicy {
    pub fn rho(&self, t: u64, t_ep: u64) -> f64 {
        match self {
            MomentumPolicy::Fixed(rho) => *rho,
            MomentumPolicy::Adaptive(s) => s.gamma_at(t, t_ep),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamParams {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamParams {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum OptimizerKind {
    Backprop,
    Rsgd(ReinforcementSchedule),
    Sgdm(MomentumPolicy),
    Nag(MomentumPolicy),
    Adam(AdamParams),
}

impl OptimizerKind {
    pub fn name(&self) -> &'static str {
        match self {
            OptimizerKind::Backprop => "backprop",
            OptimizerKind::Rsgd(_) => "rsgd",
            OptimizerKind::Sgdm(_) => "sgdm",
            OptimizerKind::Nag(_) => "nag",
            OptimizerKind::Adam(_) => "adam",
        }
    }

    /// Number of parameter-sized buffers the optimizer keeps between steps.
    pub fn buffer_count(&self) -> usize {
        match self {
            OptimizerKind::Backprop => 0,
            OptimizerKind::Rsgd(_) | OptimizerKind::Sgdm(_) | OptimizerKind::Nag(_) => 1,
            OptimizerKind::Adam(_) => 2,
        }
    }
}

#[derive(Debug, Clone)]
enum Buffers {
    None,
    Reinforced { acc: GradientSet },
    Velocity { v: GradientSet },
    Moments { m: GradientSet, v: GradientSet },
}

/// Mutable optimizer state for one training run.
#[derive(Debug, Clone)]
pub struct OptimizerState {
    kind: OptimizerKind,
    buffers: Buffers,
    step: u64,
    epoch: u64,
    lookahead_evals: u64,
}

impl OptimizerState {
    pub fn new(kind: OptimizerKind, shapes: &[(usize, usize)]) -> Self {
        let zeros = || GradientSet::zeros_with_shapes(shapes);
        let buffers = match kind {
            OptimizerKind::Backprop => Buffers::None,
            OptimizerKind::Rsgd(_) => Buffers::Reinforced { acc: zeros() },
            OptimizerKind::Sgdm(_) | OptimizerKind::Nag(_) => Buffers::Velocity { v: zeros() },
            OptimizerKind::Adam(_) => Buffers::Moments {
                m: zeros(),
                v: zeros(),
            },
        };
        Self {
            kind,
            buffers,
            step: 0,
            epoch: 0,
            lookahead_evals: 0,
        }
    }

    pub fn for_params(kind: OptimizerKind, params: &NetworkParams) -> Self {
        Self::new(kind, &params.architecture().weight_shapes())
    }

    pub fn kind(&self) -> &OptimizerKind {
        &self.kind
    }

    /// Mini-batch updates performed so far.
    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// Completed epochs.
    pub fn epoch_count(&self) -> u64 {
        self.epoch
    }

    /// Gradient-oracle calls made by Nesterov look-ahead steps.
    pub fn lookahead_evaluations(&self) -> u64 {
        self.lookahead_evals
    }

    /// Marks an epoch boundary; the exp-gamma `γ` is refreshed from here on.
    pub fn end_epoch(&mut self) {
        self.epoch += 1;
    }

    /// `Γ(t)` (or `ρ_t`) the next step will use, if the optimizer has one.
    pub fn next_gamma(&self) -> Option<f64> {
        match &self.kind {
            OptimizerKind::Rsgd(s) => Some(s.gamma_at(self.step, self.epoch)),
            OptimizerKind::Sgdm(p) | OptimizerKind::Nag(p) => Some(p.rho(self.step, self.epoch)),
            _ => None,
        }
    }

    /// The reinforced gradient, momentum velocity or first Adam moment.
    pub fn primary_buffer(&self) -> Option<&GradientSet> {
        match &self.buffers {
            Buffers::None => None,
            Buffers::Reinforced { acc } => Some(acc),
            Buffers::Velocity { v } => Some(v),
            Buffers::Moments { m, .. } => Some(m),
        }
    }

    /// Replaces the reinforced-gradient or velocity buffer.
    pub fn set_primary_buffer(&mut self, value: GradientSet) -> Result<()> {
        match &mut self.buffers {
            Buffers::Reinforced { acc: b }
            | Buffers::Velocity { v: b }
            | Buffers::Moments { m: b, .. } => {
                b.check_congruent(&value, "buffer replacement")?;
                *b = value;
                Ok(())
            }
            Buffers::None => Err(Error::Config("optimizer has no buffer".into())),
        }
    }

    fn wrong_kind(&self, wanted: &str) -> Error {
        Error::Config(format!(
            "{wanted} step called on a {} optimizer",
            self.kind.name()
        ))
    }

    /// `ΔW = -η g`.
    pub fn sgd_step(&mut self, grads: &GradientSet, eta: f64) -> Result<GradientSet> {
        if !matches!(self.kind, OptimizerKind::Backprop) {
            return Err(self.wrong_kind("backprop"));
        }
        self.step += 1;
        Ok(grads.scaled(-eta))
    }

    /// Reinforced step: each component independently keeps its accumulated
    /// history with probability `Γ(t)` or restarts from the current gradient.
    /// One coin per scalar, drawn in row-major order matrix by matrix.
    pub fn rsgd_step(
        &mut self,
        grads: &GradientSet,
        eta: f64,
        coins: &mut RngStream,
    ) -> Result<GradientSet> {
        let OptimizerKind::Rsgd(schedule) = self.kind else {
            return Err(self.wrong_kind("rsgd"));
        };
        let Buffers::Reinforced { acc } = &mut self.buffers else {
            unreachable!()
        };
        acc.check_congruent(grads, "rsgd gradient")?;
        let p = schedule.gamma_at(self.step, self.epoch);
        for (a, g) in acc.values_mut().zip(grads.values()) {
            *a = if coins.bernoulli(p) { g + *a } else { g };
        }
        self.step += 1;
        Ok(acc.scaled(-eta))
    }

    /// Momentum step: `ν_t = ρ_t ν_{t-1} + g_t`, `ΔW = -η ν_t`.
    pub fn sgdm_step(&mut self, grads: &GradientSet, eta: f64) -> Result<GradientSet> {
        let OptimizerKind::Sgdm(policy) = self.kind else {
            return Err(self.wrong_kind("sgdm"));
        };
        let Buffers::Velocity { v } = &mut self.buffers else {
            unreachable!()
        };
        v.check_congruent(grads, "sgdm gradient")?;
        let rho = policy.rho(self.step, self.epoch);
        for (vi, g) in v.values_mut().zip(grads.values()) {
            *vi = rho * *vi + g;
        }
        self.step += 1;
        Ok(v.scaled(-eta))
    }

    /// Nesterov step: `g' = ∇E(W + ρ_t ν_{t-1})`, `ν_t = ρ_t ν_{t-1} - η g'`,
    /// `ΔW = ν_t`. Calls `oracle` exactly once.
    pub fn nag_step<F>(
        &mut self,
        eta: f64,
        params: &NetworkParams,
        mut oracle: F,
    ) -> Result<GradientSet>
    where
        F: FnMut(&NetworkParams) -> Result<GradientSet>,
    {
        let OptimizerKind::Nag(policy) = self.kind else {
            return Err(self.wrong_kind("nag"));
        };
        let rho = policy.rho(self.step, self.epoch);
        let Buffers::Velocity { v } = &mut self.buffers else {
            unreachable!()
        };
        let lookahead = params.shifted(v, rho)?;
        let g = oracle(&lookahead)?;
        self.lookahead_evals += 1;
        v.check_congruent(&g, "nag oracle gradient")?;
        for (vi, gi) in v.values_mut().zip(g.values()) {
            *vi = rho * *vi - eta * gi;
        }
        self.step += 1;
        Ok(v.clone())
    }

    /// Adam with bias-corrected moments.
    pub fn adam_step(&mut self, grads: &GradientSet, eta: f64) -> Result<GradientSet> {
        let OptimizerKind::Adam(hp) = self.kind else {
            return Err(self.wrong_kind("adam"));
        };
        let Buffers::Moments { m, v } = &mut self.buffers else {
            unreachable!()
        };
        m.check_congruent(grads, "adam gradient")?;
        let t = (self.step + 1) as i32;
        let c1 = 1.0 - hp.beta1.powi(t);
        let c2 = 1.0 - hp.beta2.powi(t);
        let mut delta = grads.zeros_like();
        for (((mi, vi), g), d) in m
            .values_mut()
            .zip(v.values_mut())
            .zip(grads.values())
            .zip(delta.values_mut())
        {
            *mi = hp.beta1 * *mi + (1.0 - hp.beta1) * g;
            *vi = hp.beta2 * *vi + (1.0 - hp.beta2) * g * g;
            let m_hat = *mi / c1;
            let v_hat = *vi / c2;
            *d = -eta * m_hat / (v_hat.sqrt() + hp.epsilon);
        }
        self.step += 1;
        Ok(delta)
    }

    /// Performs one update of `params` with whichever rule this state holds.
    ///
    /// `oracle` returns the mini-batch gradient at the given parameters; it
    /// is called once per step (at the look-ahead point for Nesterov).
    pub fn step<F>(
        &mut self,
        params: &mut NetworkParams,
        eta: f64,
        coins: &mut RngStream,
        mut oracle: F,
    ) -> Result<()>
    where
        F: FnMut(&NetworkParams) -> Result<GradientSet>,
    {
        let delta = match self.kind {
            OptimizerKind::Nag(_) => self.nag_step(eta, params, oracle)?,
            _ => {
                let g = oracle(params)?;
                match self.kind {
                    OptimizerKind::Backprop => self.sgd_step(&g, eta)?,
                    OptimizerKind::Rsgd(_) => self.rsgd_step(&g, eta, coins)?,
                    OptimizerKind::Sgdm(_) => self.sgdm_step(&g, eta)?,
                    OptimizerKind::Adam(_) => self.adam_step(&g, eta)?,
                    OptimizerKind::Nag(_) => unreachable!(),
                }
            }
        };
        params.apply_delta(&delta)
    }
}
