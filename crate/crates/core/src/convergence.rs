//! Confidence criteria, adaptive motion noise and termination.

use alloc::collections::VecDeque;
use alloc::vec::Vec;

use thiserror::Error;

use crate::filter::{event_transforms, FilterError, Observation};
use crate::geometry::{cloud_distance, DistanceField, EndEffectorCloud};
use crate::kinematics::KinematicChain;
use crate::math::wrap_angle;
use crate::se3::Pose6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CriteriaError {
    #[error("alpha must exceed 1, got {0}")]
    Alpha(f64),
    #[error("beta must lie in (0, 1), got {0}")]
    Beta(f64),
    #[error("window h must be at least 2, got {0}")]
    Window(usize),
    #[error("consecutive_required must be at least 1")]
    Consecutive,
    #[error("sigma bounds must satisfy 0 < sigma_min <= sigma_max, got [{0}, {1}]")]
    SigmaBounds(f64, f64),
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize), serde(default, deny_unknown_fields))]
pub struct CriteriaConfig {
    /// Variance thresholds (m², rad²).
    pub theta_v: [f64; 6],
    /// Estimate range thresholds over the window (m, rad).
    pub eps_m: [f64; 6],
    /// Variance range thresholds over the window.
    pub eps_v: [f64; 6],
    /// Window length in iterations.
    pub h: usize,
    /// Consistency distance threshold (m).
    pub delta_e: f64,
    pub consecutive_required: u32,
    pub alpha: f64,
    pub beta: f64,
    pub sigma_min: f64,
    pub sigma_max: f64,
}

impl Default for CriteriaConfig {
    fn default() -> Self {
        Self {
            theta_v: [1e-5; 6],
            eps_m: [0.002, 0.002, 0.002, 0.005, 0.005, 0.005],
            eps_v: [5e-6; 6],
            h: 5,
            delta_e: 0.01,
            consecutive_required: 5,
            alpha: 2.0,
            beta: 0.8,
            sigma_min: 1e-4,
            sigma_max: 0.05,
        }
    }
}

impl CriteriaConfig {
    pub fn validate(&self) -> Result<(), CriteriaError> {
        if !(self.alpha > 1.0) {
            return Err(CriteriaError::Alpha(self.alpha));
        }
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return Err(CriteriaError::Beta(self.beta));
        }
        if self.h < 2 {
            return Err(CriteriaError::Window(self.h));
        }
        if self.consecutive_required == 0 {
            return Err(CriteriaError::Consecutive);
        }
        if !(self.sigma_min > 0.0 && self.sigma_min <= self.sigma_max) {
            return Err(CriteriaError::SigmaBounds(self.sigma_min, self.sigma_max));
        }
        Ok(())
    }
}

/// The three criteria of one iteration.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Criteria {
    /// Particle confidence.
    pub c: bool,
    /// Particle stability.
    pub s: bool,
    /// Particle consistency.
    pub v: bool,
}

impl Criteria {
    pub fn all(&self) -> bool {
        self.c && self.s && self.v
    }
}

/// Recent estimates and variances plus the termination counter.
#[derive(Clone, Debug, PartialEq)]
pub struct FilterHistory {
    window: usize,
    entries: VecDeque<(Pose6, [f64; 6])>,
    pub consecutive_pass_count: u32,
}

impl FilterHistory {
    pub fn new(window: usize) -> Self {
        Self { window, entries: VecDeque::with_capacity(window), consecutive_pass_count: 0 }
    }

    /// Appends an entry, dropping the oldest beyond the window.
    pub fn push(&mut self, estimate: Pose6, variance: [f64; 6]) {
        if self.entries.len() == self.window {
            self.entries.pop_front();
        }
        self.entries.push_back((estimate, variance));
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn entries(&self) -> impl Iterator<Item = &(Pose6, [f64; 6])> {
        self.entries.iter()
    }
}

/// True iff the variance is strictly below the threshold in every dimension.
pub fn particle_confidence(variance: &[f64; 6], theta_v: &[f64; 6]) -> bool {
    variance.iter().zip(theta_v).all(|(v, t)| v < t)
}

/// True iff the window is full and both the estimate range and the variance
/// range are strictly below their thresholds in every dimension.
///
/// Angles are unwrapped relative to the oldest entry before taking ranges.
pub fn particle_stability(history: &FilterHistory, eps_m: &[f64; 6], eps_v: &[f64; 6]) -> bool {
    if history.len() < history.window {
        return false;
    }
    let Some((first, _)) = history.entries.front() else { return false };
    let first = first.to_array();
    for k in 0..6 {
        let (mut lo_m, mut hi_m) = (f64::INFINITY, f64::NEG_INFINITY);
        let (mut lo_v, mut hi_v) = (f64::INFINITY, f64::NEG_INFINITY);
        for (est, var) in &history.entries {
            let a = est.to_array()[k];
            let m = if k < 3 { a } else { first[k] + wrap_angle(a - first[k]) };
            lo_m = lo_m.min(m);
            hi_m = hi_m.max(m);
            lo_v = lo_v.min(var[k]);
            hi_v = hi_v.max(var[k]);
        }
        if !(hi_m - lo_m < eps_m[k]) || !(hi_v - lo_v < eps_v[k]) {
            return false;
        }
    }
    true
}

/// Hypothesized distance of every event at `estimate`.
pub fn estimate_distances<F: DistanceField + ?Sized>(
    estimate: &Pose6,
    obs: &Observation,
    field: &F,
    cloud: &EndEffectorCloud,
    chain: &KinematicChain,
) -> Result<Vec<f64>, FilterError> {
    let base = estimate.to_se3();
    Ok(event_transforms(obs, chain)?.iter().map(|g| cloud_distance(field, cloud, &base.compose(g))).collect())
}

/// Consistency test on precomputed distances.
pub fn consistent(distances: &[f64], obs: &Observation, delta_e: f64) -> bool {
    !obs.events.iter().zip(distances).any(|(e, &d)| (e.contact && d > delta_e) || (!e.contact && d <= -delta_e))
}

/// True iff the estimate agrees with every event of the latest observation.
pub fn particle_consistency<F: DistanceField + ?Sized>(
    estimate: &Pose6,
    obs: &Observation,
    field: &F,
    cloud: &EndEffectorCloud,
    chain: &KinematicChain,
    delta_e: f64,
) -> Result<bool, FilterError> {
    if obs.is_empty() {
        return Err(FilterError::EmptyObservation);
    }
    let d = estimate_distances(estimate, obs, field, cloud, chain)?;
    Ok(consistent(&d, obs, delta_e))
}

/// Next motion-noise scale.
pub fn adapt_sigma(sigma_prev: f64, criteria: Criteria, cfg: &CriteriaConfig) -> f64 {
    let s = if criteria.c && !criteria.v {
        cfg.alpha * sigma_prev
    } else if criteria.s && criteria.v {
        cfg.beta * sigma_prev
    } else {
        sigma_prev
    };
    s.clamp(cfg.sigma_min, cfg.sigma_max)
}

/// Updates the pass counter and reports whether enough consecutive
/// iterations met all three criteria.
pub fn should_terminate(criteria: Criteria, history: &mut FilterHistory, consecutive_required: u32) -> bool {
    if criteria.all() {
        history.consecutive_pass_count += 1;
    } else {
        history.consecutive_pass_count = 0;
    }
    history.consecutive_pass_count >= consecutive_required
}
