//! Particle filter over robot base poses.
//!
//! One iteration is `propagate` (Gaussian random walk), `evaluate_weights`
//! (contact likelihood of the latest observation), `resample` (systematic)
//! and `estimate` (weighted mean).

use alloc::vec::Vec;

use thiserror::Error;

use crate::geometry::{cloud_distance, DistanceField, EndEffectorCloud};
use crate::kinematics::{JointConfig, KinematicChain, KinematicsError};
use crate::math;
use crate::rng::{indexed_stream, stream, uniform, NoiseSource};
use crate::se3::{self, Pose6, PoseSE3, Se3Error};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FilterError {
    #[error("particle count must be at least 1")]
    NoParticles,
    #[error("spread component {index} must be finite and non-negative, got {value}")]
    BadSpread { index: usize, value: f64 },
    #[error("observation has no events")]
    EmptyObservation,
    #[error("weights are degenerate (sum {0})")]
    DegenerateWeights(f64),
    #[error(transparent)]
    Pose(#[from] Se3Error),
    #[error(transparent)]
    Kinematics(#[from] KinematicsError),
}

/// One joint configuration with its binary contact flag.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ContactEvent {
    pub q: JointConfig,
    #[cfg_attr(feature = "serde", serde(rename = "c", with = "bool_as_int"))]
    pub contact: bool,
}

#[cfg(feature = "serde")]
mod bool_as_int {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &bool, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u8(u8::from(*v))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<bool, D::Error> {
        match u8::deserialize(d)? {
            0 => Ok(false),
            1 => Ok(true),
            v => Err(serde::de::Error::custom(alloc::format!("contact flag must be 0 or 1, got {v}"))),
        }
    }
}

/// Contact events collected during one action.
#[derive(Clone, Debug, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Observation {
    pub events: Vec<ContactEvent>,
}

impl Observation {
    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn contacts(&self) -> usize {
        self.events.iter().filter(|e| e.contact).count()
    }
}

/// Exponent used by the contact likelihood.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize), serde(rename_all = "kebab-case"))]
pub enum Likelihood {
    /// `exp(−d² / (2σ_P²))`.
    #[default]
    Variance,
    /// `exp(−d² / (2σ_P))`, dimensionally inconsistent but kept for comparison.
    AsPrinted,
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize), serde(default, deny_unknown_fields))]
pub struct FilterParams {
    /// Contact likelihood standard deviation (m).
    pub sigma_p: f64,
    /// Penetration depth beyond which a no-contact event penalizes a particle (m).
    pub delta_p: f64,
    /// Weight factor for a penetrating no-contact event.
    pub epsilon: f64,
    /// Particle count.
    pub particles: usize,
    /// Initial motion noise (m | rad).
    pub sigma_0: f64,
    /// Per-dimension multiplier on the motion noise.
    pub motion_scale: [f64; 6],
    pub likelihood: Likelihood,
}

impl Default for FilterParams {
    fn default() -> Self {
        Self {
            sigma_p: 0.005,
            delta_p: 0.01,
            epsilon: 1e-12,
            particles: 10_000,
            sigma_0: 0.01,
            motion_scale: [1.0; 6],
            likelihood: Likelihood::Variance,
        }
    }
}

/// Weighted pose hypotheses.
#[derive(Clone, Debug, PartialEq)]
pub struct ParticleSet {
    pub poses: Vec<Pose6>,
    pub weights: Vec<f64>,
    pub generation: u64,
}

impl ParticleSet {
    /// Uniformly weighted set.
    pub fn uniform(poses: Vec<Pose6>) -> Result<Self, FilterError> {
        if poses.is_empty() {
            return Err(FilterError::NoParticles);
        }
        let w = 1.0 / poses.len() as f64;
        let weights = alloc::vec![w; poses.len()];
        Ok(Self { poses, weights, generation: 0 })
    }

    pub fn len(&self) -> usize {
        self.poses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.poses.is_empty()
    }

    pub fn variance(&self) -> Result<[f64; 6], FilterError> {
        Ok(se3::dimwise_variance(&self.poses, &self.weights)?)
    }

    /// `1 / Σ w²`.
    pub fn effective_sample_size(&self) -> f64 {
        1.0 / self.weights.iter().map(|w| w * w).sum::<f64>()
    }
}

/// Draws `count` particles uniformly from `x0 ± spread` per dimension.
pub fn init_particles(x0: &Pose6, spread: &[f64; 6], count: usize, seed: u64) -> Result<ParticleSet, FilterError> {
    if count == 0 {
        return Err(FilterError::NoParticles);
    }
    if let Some((index, &value)) = spread.iter().enumerate().find(|(_, s)| !(**s >= 0.0) || !s.is_finite()) {
        return Err(FilterError::BadSpread { index, value });
    }
    let mut rng = stream(seed, 0x696e_6974);
    let c = x0.to_array();
    let poses = (0..count)
        .map(|_| {
            let mut a = [0.0; 6];
            for k in 0..6 {
                a[k] = uniform(&mut rng, c[k] - spread[k], c[k] + spread[k]);
            }
            Pose6::from_array(a)
        })
        .collect();
    ParticleSet::uniform(poses)
}

/// Perturbs every pose with `N(0, (σ·scale_k)²)` per dimension using
/// per-particle streams derived from `seed`. Weights are untouched.
pub fn propagate(ps: &ParticleSet, sigma: f64, scale: &[f64; 6], seed: u64) -> Result<ParticleSet, FilterError> {
    propagate_with(ps, sigma, scale, |m| indexed_stream(seed, m as u64))
}

/// As [`propagate`] with a caller-supplied noise source per particle index.
pub fn propagate_with<N, F>(
    ps: &ParticleSet,
    sigma: f64,
    scale: &[f64; 6],
    noise_for: F,
) -> Result<ParticleSet, FilterError>
where
    N: NoiseSource,
    F: Fn(usize) -> N + Sync,
{
    let one = |(m, p): (usize, &Pose6)| se3::perturb_scaled(p, sigma, scale, &mut noise_for(m));
    #[cfg(feature = "std")]
    let poses: Result<Vec<Pose6>, Se3Error> = {
        use rayon::prelude::*;
        ps.poses.par_iter().enumerate().map(one).collect()
    };
    #[cfg(not(feature = "std"))]
    let poses: Result<Vec<Pose6>, Se3Error> = ps.poses.iter().enumerate().map(one).collect();
    Ok(ParticleSet { poses: poses?, weights: ps.weights.clone(), generation: ps.generation + 1 })
}

/// Natural log of one event's likelihood factor for a hypothesized distance `d`.
#[inline]
pub fn event_log_factor(d: f64, contact: bool, params: &FilterParams) -> f64 {
    if contact {
        let s2 = params.sigma_p * params.sigma_p;
        let denom = match params.likelihood {
            Likelihood::Variance => 2.0 * s2,
            Likelihood::AsPrinted => 2.0 * params.sigma_p,
        };
        -0.5 * math::ln(2.0 * math::PI * s2) - d * d / denom
    } else if d < -params.delta_p {
        math::ln(params.epsilon)
    } else {
        0.0
    }
}

/// Outcome of a weight update.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum WeightStatus {
    Normalized {
        ess: f64,
    },
    /// Every particle's likelihood underflowed; weights were reset to uniform.
    Degenerate,
}

/// Base-to-end-effector transforms of each event.
pub fn event_transforms(obs: &Observation, chain: &KinematicChain) -> Result<Vec<PoseSE3>, FilterError> {
    obs.events.iter().map(|e| chain.forward(e.q.as_slice()).map_err(FilterError::from)).collect()
}

fn particle_log_weight<F: DistanceField + ?Sized>(
    pose: &Pose6,
    obs: &Observation,
    gammas: &[PoseSE3],
    field: &F,
    cloud: &EndEffectorCloud,
    params: &FilterParams,
) -> f64 {
    let base = pose.to_se3();
    let mut lw = 0.0;
    for (e, g) in obs.events.iter().zip(gammas) {
        let d = cloud_distance(field, cloud, &base.compose(g));
        lw += event_log_factor(d, e.contact, params);
    }
    lw
}

/// Unnormalized log weights of every particle for `obs`.
pub fn log_weights<F: DistanceField + Sync + ?Sized>(
    ps: &ParticleSet,
    obs: &Observation,
    field: &F,
    cloud: &EndEffectorCloud,
    chain: &KinematicChain,
    params: &FilterParams,
    parallel: bool,
) -> Result<Vec<f64>, FilterError> {
    if obs.is_empty() {
        return Err(FilterError::EmptyObservation);
    }
    let gammas = event_transforms(obs, chain)?;
    let one = |p: &Pose6| particle_log_weight(p, obs, &gammas, field, cloud, params);
    #[cfg(feature = "std")]
    if parallel {
        use rayon::prelude::*;
        return Ok(ps.poses.par_iter().map(one).collect());
    }
    let _ = parallel;
    Ok(ps.poses.iter().map(one).collect())
}

/// Replaces the weights with the normalized likelihood of `obs`.
///
/// Works in log space, so long products of small factors do not underflow.
/// When even the best particle's likelihood is below the smallest positive
/// `f64`, the weights are reset to uniform and [`WeightStatus::Degenerate`]
/// is returned.
pub fn evaluate_weights<F: DistanceField + Sync + ?Sized>(
    ps: &ParticleSet,
    obs: &Observation,
    field: &F,
    cloud: &EndEffectorCloud,
    chain: &KinematicChain,
    params: &FilterParams,
) -> Result<(ParticleSet, WeightStatus), FilterError> {
    let lw = log_weights(ps, obs, field, cloud, chain, params, cfg!(feature = "std"))?;
    Ok(normalize_log_weights(ps, &lw))
}

/// Normalizes log weights into a new set with the same poses.
pub fn normalize_log_weights(ps: &ParticleSet, lw: &[f64]) -> (ParticleSet, WeightStatus) {
    let max = lw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out = ps.clone();
    if !(max >= math::ln(f64::MIN_POSITIVE)) {
        let w = 1.0 / ps.len() as f64;
        out.weights.iter_mut().for_each(|x| *x = w);
        return (out, WeightStatus::Degenerate);
    }
    let mut sum = 0.0;
    for (w, l) in out.weights.iter_mut().zip(lw) {
        *w = math::exp(l - max);
        sum += *w;
    }
    for w in &mut out.weights {
        *w /= sum;
    }
    let ess = out.effective_sample_size();
    (out, WeightStatus::Normalized { ess })
}

/// Systematic resampling to the same particle count.
pub fn resample(ps: &ParticleSet, seed: u64) -> Result<ParticleSet, FilterError> {
    resample_to(ps, ps.len(), seed)
}

/// Systematic resampling producing `count` uniformly weighted particles.
pub fn resample_to(ps: &ParticleSet, count: usize, seed: u64) -> Result<ParticleSet, FilterError> {
    if count == 0 || ps.is_empty() {
        return Err(FilterError::NoParticles);
    }
    let sum: f64 = ps.weights.iter().sum();
    if !(sum > 0.0) || !sum.is_finite() || ps.weights.iter().any(|w| !(*w >= 0.0)) {
        return Err(FilterError::DegenerateWeights(sum));
    }
    let mut rng = stream(seed, 0x7265_7361_6d70);
    let step = 1.0 / count as f64;
    let u0 = uniform(&mut rng, 0.0, step);
    let mut poses = Vec::with_capacity(count);
    let mut k = 0;
    let mut cum = ps.weights[0] / sum;
    for i in 0..count {
        let target = u0 + i as f64 * step;
        while cum <= target && k + 1 < ps.len() {
            k += 1;
            cum += ps.weights[k] / sum;
        }
        poses.push(ps.poses[k]);
    }
    let mut out = ParticleSet::uniform(poses)?;
    out.generation = ps.generation;
    Ok(out)
}

/// Weighted mean pose of the set.
pub fn estimate(ps: &ParticleSet) -> Result<Pose6, FilterError> {
    Ok(se3::weighted_mean(&ps.poses, &ps.weights)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_sdf, EnvironmentModel, Solid};
    use crate::kinematics::presets;
    use crate::rng::ZeroNoise;
    use crate::Vec3;
    use alloc::vec;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn poses(n: usize) -> Vec<Pose6> {
        (0..n).map(|i| Pose6::new(0.01 * i as f64, 0.0, 0.0, 0.0, 0.0, 0.001 * i as f64)).collect()
    }

    #[test]
    fn init_zero_spread_and_uniform_weights() {
        let x0 = Pose6::new(0.1, 0.2, 0.3, 0.1, 0.2, 0.3);
        let ps = init_particles(&x0, &[0.0; 6], 50, 1).unwrap();
        assert!(ps.poses.iter().all(|p| *p == x0));
        assert!(ps.weights.iter().all(|w| *w == 1.0 / 50.0));
        assert!(matches!(
            init_particles(&x0, &[0.1, -0.1, 0.0, 0.0, 0.0, 0.0], 5, 1),
            Err(FilterError::BadSpread { index: 1, .. })
        ));
        assert_eq!(init_particles(&x0, &[0.0; 6], 0, 1), Err(FilterError::NoParticles));
    }

    #[test]
    fn init_fills_interval() {
        let x0 = Pose6::default();
        let ps = init_particles(&x0, &[0.15; 6], 100_000, 7).unwrap();
        for k in 0..6 {
            let vals: Vec<f64> = ps.poses.iter().map(|p| p.to_array()[k]).collect();
            let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            assert!(lo >= -0.15 && hi <= 0.15);
            assert!(hi - lo >= 0.9 * 0.3);
        }
    }

    #[test]
    fn propagate_statistics() {
        let ps = ParticleSet::uniform(vec![Pose6::default(); 100_000]).unwrap();
        let same = propagate_with(&ps, 0.02, &[1.0; 6], |_| ZeroNoise).unwrap();
        assert_eq!(same.poses, ps.poses);
        let out = propagate(&ps, 0.02, &[1.0; 6], 3).unwrap();
        assert_eq!(out.weights, ps.weights);
        for k in 0..6 {
            let v: f64 = out.poses.iter().map(|p| p.to_array()[k].powi(2)).sum::<f64>() / out.len() as f64;
            assert!((v / 0.0004 - 1.0).abs() < 0.05, "dim {k}: {v}");
        }
        assert!(propagate(&ps, 0.0, &[1.0; 6], 3).is_err());
    }

    #[test]
    fn propagate_is_deterministic() {
        let ps = ParticleSet::uniform(poses(64)).unwrap();
        assert_eq!(propagate(&ps, 0.01, &[1.0; 6], 9).unwrap(), propagate(&ps, 0.01, &[1.0; 6], 9).unwrap());
    }

    #[test]
    fn factor_cases() {
        let p = FilterParams::default();
        let peak = 1.0 / (2.0 * core::f64::consts::PI * p.sigma_p * p.sigma_p).sqrt();
        assert_relative_eq!(event_log_factor(0.0, true, &p).exp(), peak, max_relative = 1e-12);
        assert_relative_eq!(event_log_factor(-2.0 * p.delta_p, false, &p).exp(), p.epsilon, max_relative = 1e-12);
        assert_eq!(event_log_factor(0.05, false, &p), 0.0);
        assert_eq!(event_log_factor(-p.delta_p, false, &p), 0.0);
        let printed = FilterParams { likelihood: Likelihood::AsPrinted, ..p };
        let d: f64 = 0.003;
        assert_relative_eq!(
            event_log_factor(d, true, &printed),
            (peak * (-d * d / (2.0 * p.sigma_p)).exp()).ln(),
            max_relative = 1e-12
        );
    }

    /// A slab with its top at z = 0 and a one-point cloud at the flange,
    /// so the hypothesized distance is the flange height.
    fn slab_fixture() -> (crate::geometry::SdfGrid, EndEffectorCloud, KinematicChain) {
        let env = EnvironmentModel::from_solids(vec![Solid::cuboid(
            Vec3::new(4.0, 4.0, 0.2),
            PoseSE3::from_translation(0.0, 0.0, -0.1),
        )])
        .unwrap();
        let grid = build_sdf(&env, 0.005, 0.1).unwrap();
        let cloud = EndEffectorCloud::new(vec![Vec3::zeros()]).unwrap();
        (grid, cloud, presets::planar_two_link(0.5, 0.5))
    }

    #[test]
    fn gaussian_ratio_between_particles() {
        let (grid, cloud, chain) = slab_fixture();
        let p = FilterParams::default();
        let q = JointConfig(vec![0.0, 0.0]);
        // Grid voxel centers sit at odd multiples of 2.5 mm, so choose heights
        // where the nearest-voxel value is exact.
        let k = ((0.0 - grid.origin().z) / grid.resolution()) as usize + 1;
        let z1 = grid.voxel_center(0, 0, k).z;
        let z2 = grid.voxel_center(0, 0, k + 3).z;
        let d1 = grid.query(&Vec3::new(1.0, 0.0, z1));
        let d2 = grid.query(&Vec3::new(1.0, 0.0, z2));
        let ps = ParticleSet::uniform(vec![
            Pose6::new(0.0, 0.0, z1, 0.0, 0.0, 0.0),
            Pose6::new(0.0, 0.0, z2, 0.0, 0.0, 0.0),
        ])
        .unwrap();
        let obs = Observation { events: vec![ContactEvent { q, contact: true }] };
        let (out, status) = evaluate_weights(&ps, &obs, &grid, &cloud, &chain, &p).unwrap();
        assert!(matches!(status, WeightStatus::Normalized { .. }));
        let expected = ((d2 * d2 - d1 * d1) / (2.0 * p.sigma_p * p.sigma_p)).exp();
        assert_relative_eq!(out.weights[0] / out.weights[1], expected, max_relative = 1e-9);
        assert_relative_eq!((d2 - d1) / p.sigma_p, 3.0, max_relative = 1e-6);
    }

    #[test]
    fn degenerate_when_everything_underflows() {
        let (grid, cloud, chain) = slab_fixture();
        let p = FilterParams::default();
        let ps = ParticleSet::uniform(vec![Pose6::new(0.0, 0.0, 0.3, 0.0, 0.0, 0.0); 4]).unwrap();
        let obs = Observation { events: vec![ContactEvent { q: JointConfig(vec![0.0, 0.0]), contact: true }; 10] };
        let (out, status) = evaluate_weights(&ps, &obs, &grid, &cloud, &chain, &p).unwrap();
        assert_eq!(status, WeightStatus::Degenerate);
        assert!(out.weights.iter().all(|w| *w == 0.25));
        let empty = Observation::default();
        assert_eq!(evaluate_weights(&ps, &empty, &grid, &cloud, &chain, &p), Err(FilterError::EmptyObservation));
    }

    #[test]
    fn parallel_matches_serial_and_event_order() {
        let (grid, cloud, chain) = slab_fixture();
        let p = FilterParams::default();
        let ps = init_particles(&Pose6::default(), &[0.02; 6], 500, 4).unwrap();
        let events: Vec<ContactEvent> = (0..6)
            .map(|j| ContactEvent { q: JointConfig(vec![0.2 * j as f64, -0.1 * j as f64]), contact: j % 2 == 0 })
            .collect();
        let obs = Observation { events: events.clone() };
        let a = log_weights(&ps, &obs, &grid, &cloud, &chain, &p, true).unwrap();
        let b = log_weights(&ps, &obs, &grid, &cloud, &chain, &p, false).unwrap();
        assert_eq!(a, b);
        let mut rev = events;
        rev.reverse();
        let c = log_weights(&ps, &Observation { events: rev }, &grid, &cloud, &chain, &p, false).unwrap();
        for (x, y) in a.iter().zip(&c) {
            assert_relative_eq!(*x, *y, max_relative = 1e-12);
        }
    }

    #[test]
    fn resample_single_winner() {
        let mut ps = ParticleSet::uniform(poses(10)).unwrap();
        ps.weights = vec![0.0; 10];
        ps.weights[3] = 1.0;
        let out = resample(&ps, 1).unwrap();
        assert!(out.poses.iter().all(|p| *p == ps.poses[3]));
        assert!(out.weights.iter().all(|w| *w == 0.1));
        ps.weights[3] = 0.0;
        assert!(matches!(resample(&ps, 1), Err(FilterError::DegenerateWeights(_))));
    }

    #[test]
    fn resample_counts_follow_weights() {
        let mut ps = ParticleSet::uniform(poses(2)).unwrap();
        ps.weights = vec![0.75, 0.25];
        for seed in 0..100 {
            let out = resample_to(&ps, 10_000, seed).unwrap();
            let a = out.poses.iter().filter(|p| **p == ps.poses[0]).count() as f64;
            assert!((a - 7500.0).abs() <= 75.0 && (10_000.0 - a - 2500.0).abs() <= 25.0);
        }
    }

    #[test]
    fn uniform_weights_keep_multiset() {
        let ps = ParticleSet::uniform(poses(257)).unwrap();
        for seed in 0..20 {
            assert_eq!(resample(&ps, seed).unwrap().poses, ps.poses);
        }
    }

    #[test]
    fn estimate_is_weighted_mean() {
        let mut ps = ParticleSet::uniform(vec![
            Pose6::new(0.0, 0.0, 0.0, 0.0, 0.0, 0.0),
            Pose6::new(1.0, 2.0, 0.0, 0.0, 0.0, 0.2),
        ])
        .unwrap();
        ps.weights = vec![0.25, 0.75];
        let e = estimate(&ps).unwrap();
        assert_relative_eq!(e.x, 0.75, epsilon = 1e-12);
        assert_relative_eq!(e.y, 1.5, epsilon = 1e-12);
    }

    proptest! {
        #[test]
        fn survivors_come_from_input(ws in prop::collection::vec(0.0f64..1.0, 1..40), seed in any::<u64>()) {
            prop_assume!(ws.iter().sum::<f64>() > 1e-6);
            let mut ps = ParticleSet::uniform(poses(ws.len())).unwrap();
            let s: f64 = ws.iter().sum();
            ps.weights = ws.iter().map(|w| w / s).collect();
            let out = resample(&ps, seed).unwrap();
            prop_assert_eq!(out.len(), ps.len());
            for p in &out.poses {
                let k = ps.poses.iter().position(|x| x == p).unwrap();
                prop_assert!(ps.weights[k] > 0.0);
            }
        }

        #[test]
        fn normalized_weights_sum_to_one(lw in prop::collection::vec(-700.0f64..0.0, 1..50)) {
            let ps = ParticleSet::uniform(poses(lw.len())).unwrap();
            let (out, status) = normalize_log_weights(&ps, &lw);
            let normalized = matches!(status, WeightStatus::Normalized { .. });
            prop_assert!(normalized);
            prop_assert!((out.weights.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }
}
