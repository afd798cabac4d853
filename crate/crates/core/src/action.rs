//! Contact candidates and local-sparsity action selection.

use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, RngCore};
use thiserror::Error;

use crate::geometry::{apportion, sample_patches, EnvironmentModel, GeometryError};
use crate::kinematics::{IkParams, IkTarget, JointConfig, KinematicChain, KinematicsError};
use crate::math::PI;
use crate::rng::stream;
use crate::se3::{angle_between, PoseSE3};
use crate::Vec3;

/// Candidates must satisfy `n · ẑ > MIN_NORMAL_Z` so they can be reached from above or the side.
pub const MIN_NORMAL_Z: f64 = -0.2;

/// Local sparsity reported for an empty history.
pub const EMPTY_HISTORY_SPARSITY: f64 = PI + 1.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ActionError {
    #[error("candidate count must be at least 1")]
    NoCandidatesRequested,
    #[error("environment has no segments")]
    NoSegments,
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Kinematics(#[from] KinematicsError),
    #[error("candidate list is empty")]
    EmptyCandidates,
    #[error("no reachable candidate in any segment ({tried} candidates tried)")]
    Exhausted { tried: usize },
}

/// A surface point with its outward unit normal, tagged by segment.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ContactCandidate {
    #[cfg_attr(feature = "serde", serde(with = "crate::vec3_array"))]
    pub r: Vec3,
    #[cfg_attr(feature = "serde", serde(with = "crate::vec3_array"))]
    pub n: Vec3,
    pub segment_id: usize,
}

/// Reference contacts of executed actions, oldest first.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ActionHistory {
    executed: Vec<ContactCandidate>,
}

impl ActionHistory {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, c: ContactCandidate) {
        self.executed.push(c);
    }

    pub fn executed(&self) -> &[ContactCandidate] {
        &self.executed
    }

    pub fn len(&self) -> usize {
        self.executed.len()
    }

    pub fn is_empty(&self) -> bool {
        self.executed.is_empty()
    }
}

/// Samples `total` candidates over the environment surface, split across
/// segments by samplable area. Downward-facing surface and surface covered
/// by another solid are excluded.
pub fn sample_candidates(
    env: &EnvironmentModel,
    total: usize,
    seed: u64,
) -> Result<Vec<ContactCandidate>, ActionError> {
    if total == 0 {
        return Err(ActionError::NoCandidatesRequested);
    }
    if env.segments().is_empty() {
        return Err(ActionError::NoSegments);
    }
    let source = env.patch_source();
    let mut per_segment = Vec::with_capacity(env.segments().len());
    let mut areas = Vec::with_capacity(env.segments().len());
    for s in 0..env.segments().len() {
        let patches: Vec<_> = env
            .segment_patches(s)
            .into_iter()
            .filter(|p| source.constant_normal(p).is_none_or(|n| n.z > MIN_NORMAL_Z))
            .collect();
        let area: f64 = patches.iter().map(|p| source.area(p)).sum();
        if !(area > 0.0) {
            return Err(GeometryError::ZeroSamplableArea(s).into());
        }
        areas.push(area);
        per_segment.push(patches);
    }
    let counts = apportion(&areas, total);
    let mut rng = stream(seed, 0x6361_6e64);
    let mut out = Vec::with_capacity(total);
    for (s, (patches, count)) in per_segment.iter().zip(counts).enumerate() {
        let accept = |p: &Vec3, n: &Vec3| n.z > MIN_NORMAL_Z && !env.is_hidden(p);
        let samples =
            sample_patches(&source, patches, count, &mut rng, accept).ok_or(GeometryError::ZeroSamplableArea(s))?;
        // Samples come out grouped by face; shuffle so that index order,
        // which breaks sparsity ties, is not biased toward one face.
        let start = out.len();
        out.extend(samples.into_iter().map(|(r, n)| ContactCandidate { r, n, segment_id: s }));
        out[start..].shuffle(&mut rng);
    }
    Ok(out)
}

/// Smallest angle between the candidate normal and any executed reference normal.
pub fn local_sparsity(candidate: &ContactCandidate, history: &ActionHistory) -> f64 {
    history.executed.iter().map(|h| angle_between(&candidate.n, &h.n)).fold(EMPTY_HISTORY_SPARSITY, f64::min)
}

/// How candidates with equal sparsity are ordered.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize), serde(rename_all = "kebab-case"))]
pub enum TieBreak {
    /// Lowest candidate index first.
    #[default]
    Index,
    /// Seeded random order among equals.
    Random,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SelectParams {
    /// Probability of moving to another segment after an infeasible candidate.
    pub p_switch: f64,
    /// Distance of the pre-touch pose from the surface along the normal (m).
    pub pretouch_offset: f64,
    pub ik: IkParams,
    /// First IK guess; zeros when absent.
    pub home: Option<Vec<f64>>,
    pub tie_break: TieBreak,
}

impl Default for SelectParams {
    fn default() -> Self {
        Self { p_switch: 0.1, pretouch_offset: 0.03, ik: IkParams::default(), home: None, tie_break: TieBreak::Index }
    }
}

/// A chosen candidate with its reachable pre-touch configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct Selection {
    pub index: usize,
    pub candidate: ContactCandidate,
    pub approach: JointConfig,
    pub sparsity: f64,
}

/// End-effector target, in the base frame, that places the tool tip
/// `offset` above `c` with the tool axis pointing into the surface.
pub fn pretouch_target(c: &ContactCandidate, base: &PoseSE3, offset: f64) -> IkTarget {
    let inv = base.inverse();
    IkTarget::PointAxis { position: inv.transform_point(&(c.r + c.n * offset)), axis: inv.transform_vector(&-c.n) }
}

/// Picks the next action.
///
/// A segment is drawn uniformly; its candidates are tried in descending
/// local sparsity (ties to the lower index) until one has a reachable
/// pre-touch pose under the base estimate `base`. After each infeasible
/// candidate the search moves to a random other segment with probability
/// `p_switch`, and always when the current segment runs out.
pub fn select_action<R: RngCore + ?Sized>(
    candidates: &[ContactCandidate],
    history: &ActionHistory,
    chain: &KinematicChain,
    base: &PoseSE3,
    params: &SelectParams,
    rng: &mut R,
) -> Result<Selection, ActionError> {
    if candidates.is_empty() {
        return Err(ActionError::EmptyCandidates);
    }
    let sparsity: Vec<f64> = candidates.iter().map(|c| local_sparsity(c, history)).collect();
    let n_seg = candidates.iter().map(|c| c.segment_id).max().unwrap_or(0) + 1;
    let mut order: Vec<Vec<usize>> = alloc::vec![Vec::new(); n_seg];
    for (i, c) in candidates.iter().enumerate() {
        order[c.segment_id].push(i);
    }
    for o in &mut order {
        if params.tie_break == TieBreak::Random {
            o.shuffle(rng);
        }
        // Stable sort keeps lower indices first among ties.
        o.sort_by(|&a, &b| sparsity[b].partial_cmp(&sparsity[a]).unwrap_or(core::cmp::Ordering::Equal));
    }
    let mut cursor = alloc::vec![0usize; n_seg];
    let live = |cursor: &[usize]| -> Vec<usize> { (0..n_seg).filter(|&s| cursor[s] < order[s].len()).collect() };
    let reach = chain.reach_bound();
    let base_origin = *base.translation();
    let mut tried = 0;
    let pick = |rng: &mut R, from: &[usize]| from[rng.random_range(0..from.len())];
    let mut segment = match live(&cursor).as_slice() {
        [] => return Err(ActionError::Exhausted { tried }),
        l => pick(rng, l),
    };
    loop {
        let i = order[segment][cursor[segment]];
        cursor[segment] += 1;
        tried += 1;
        let c = &candidates[i];
        let tip = c.r + c.n * params.pretouch_offset;
        if (tip - base_origin).norm() <= reach {
            let target = pretouch_target(c, base, params.pretouch_offset);
            if let Some(q) = chain.inverse_reach(&target, params.home.as_deref(), &params.ik, rng)?.reached() {
                return Ok(Selection { index: i, candidate: *c, approach: q, sparsity: sparsity[i] });
            }
        }
        let remaining = live(&cursor);
        if remaining.is_empty() {
            return Err(ActionError::Exhausted { tried });
        }
        let here = cursor[segment] < order[segment].len();
        if !here || rng.random::<f64>() < params.p_switch {
            let others: Vec<usize> = remaining.iter().copied().filter(|&s| s != segment).collect();
            if !others.is_empty() {
                segment = pick(rng, &others);
            } else if !here {
                return Err(ActionError::Exhausted { tried });
            }
        }
    }
}
