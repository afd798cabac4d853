//! The calibration loop, single runs, sweeps and replay.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;
use touchcal_core::action::{sample_candidates, select_action, ActionError, ActionHistory, SelectParams};
use touchcal_core::convergence::{
    adapt_sigma, consistent, estimate_distances, particle_confidence, particle_stability, should_terminate, Criteria,
    CriteriaConfig, FilterHistory,
};
use touchcal_core::filter::{
    estimate, evaluate_weights, init_particles, propagate, resample, FilterParams, Observation, ParticleSet,
    WeightStatus,
};
use touchcal_core::geometry::{EndEffectorCloud, SdfGrid};
use touchcal_core::kinematics::KinematicChain;
use touchcal_core::rng::{derive_seed, stream};
use touchcal_core::se3::{pose_error, Pose6};
use touchcal_core::sim::{make_world, TruePoseSpec};

use crate::config::ExperimentConfig;
use crate::scene::Scene;
use crate::trace::{observations_path, read_jsonl, trace_path, IterationRecord, JsonlWriter, ObservationRecord};
use crate::Error;

const TAG_TRUTH: u64 = 1;
const TAG_CANDIDATES: u64 = 2;
const TAG_INIT: u64 = 3;
const TAG_ITERATION: u64 = 4;
const TAG_SELECT: u64 = 1;
const TAG_WORLD: u64 = 2;
const TAG_PROPAGATE: u64 = 3;
const TAG_RESAMPLE: u64 = 4;

/// Outcome of one filter update.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Step {
    pub t: usize,
    pub estimate: Pose6,
    pub variance: [f64; 6],
    pub ess: Option<f64>,
    pub sigma: f64,
    pub sigma_next: f64,
    pub criteria: Criteria,
    pub pass_count: u32,
    pub terminated: bool,
    pub degenerate: bool,
    pub weights_ms: f64,
}

/// The filter side of the loop. It sees observations and the robot model,
/// never the true pose.
pub struct Calibrator<'a> {
    grid: &'a SdfGrid,
    cloud: &'a EndEffectorCloud,
    chain: &'a KinematicChain,
    params: FilterParams,
    criteria: CriteriaConfig,
    particles: ParticleSet,
    estimate: Pose6,
    variance: [f64; 6],
    sigma: f64,
    history: FilterHistory,
    seed: u64,
    t: usize,
    degenerate_streak: usize,
}

impl<'a> Calibrator<'a> {
    pub fn new(cfg: &ExperimentConfig, scene: &'a Scene, seed: u64) -> Result<Self, Error> {
        let params = cfg.filter.params();
        let particles =
            init_particles(&cfg.robot.base, &cfg.init_spread(), params.particles, derive_seed(seed, TAG_INIT))?;
        let estimate = estimate(&particles)?;
        let variance = particles.variance()?;
        Ok(Self {
            grid: &scene.grid,
            cloud: &scene.cloud,
            chain: &scene.chain,
            sigma: params.sigma_0,
            params,
            criteria: cfg.criteria,
            particles,
            estimate,
            variance,
            history: FilterHistory::new(cfg.criteria.h),
            seed,
            t: 0,
            degenerate_streak: 0,
        })
    }

    pub fn estimate(&self) -> Pose6 {
        self.estimate
    }

    pub fn particles(&self) -> &ParticleSet {
        &self.particles
    }

    pub fn degenerate_streak(&self) -> usize {
        self.degenerate_streak
    }

    /// Consumes one observation: propagate, weight, resample, check the
    /// criteria and adapt the motion noise. An empty observation leaves the
    /// particles alone and resets the pass counter.
    pub fn step(&mut self, obs: &Observation) -> Result<Step, Error> {
        self.t += 1;
        let sigma = self.sigma;
        if obs.is_empty() {
            should_terminate(Criteria::default(), &mut self.history, self.criteria.consecutive_required);
            return Ok(Step {
                t: self.t,
                estimate: self.estimate,
                variance: self.variance,
                ess: None,
                sigma,
                sigma_next: sigma,
                criteria: Criteria::default(),
                pass_count: self.history.consecutive_pass_count,
                terminated: false,
                degenerate: false,
                weights_ms: 0.0,
            });
        }
        let it = derive_seed(derive_seed(self.seed, TAG_ITERATION), self.t as u64);
        let moved = propagate(&self.particles, sigma, &self.params.motion_scale, derive_seed(it, TAG_PROPAGATE))?;
        let start = Instant::now();
        let (weighted, status) = evaluate_weights(&moved, obs, self.grid, self.cloud, self.chain, &self.params)?;
        let weights_ms = start.elapsed().as_secs_f64() * 1e3;
        self.particles = resample(&weighted, derive_seed(it, TAG_RESAMPLE))?;
        self.estimate = estimate(&self.particles)?;
        self.variance = self.particles.variance()?;
        self.history.push(self.estimate, self.variance);

        let c = particle_confidence(&self.variance, &self.criteria.theta_v);
        let s = particle_stability(&self.history, &self.criteria.eps_m, &self.criteria.eps_v);
        let d = estimate_distances(&self.estimate, obs, self.grid, self.cloud, self.chain)?;
        let v = consistent(&d, obs, self.criteria.delta_e);
        let criteria = Criteria { c, s, v };

        let (ess, degenerate) = match status {
            WeightStatus::Normalized { ess } => (Some(ess), false),
            WeightStatus::Degenerate => (None, true),
        };
        // A degenerate update means no particle explains the observation:
        // widen the search and never count it as a pass.
        let (adapt_on, pass_on) = if degenerate {
            (Criteria { c: true, s: false, v: false }, Criteria::default())
        } else {
            (criteria, criteria)
        };
        self.degenerate_streak = if degenerate { self.degenerate_streak + 1 } else { 0 };
        self.sigma = adapt_sigma(sigma, adapt_on, &self.criteria);
        let terminated = should_terminate(pass_on, &mut self.history, self.criteria.consecutive_required);
        Ok(Step {
            t: self.t,
            estimate: self.estimate,
            variance: self.variance,
            ess,
            sigma,
            sigma_next: self.sigma,
            criteria,
            pass_count: self.history.consecutive_pass_count,
            terminated,
            degenerate,
            weights_ms,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunResult {
    pub seed: u64,
    pub trans_error_cm: f64,
    pub rot_error_rad: f64,
    /// Actions executed.
    pub iterations: usize,
    /// Mean slide-phase events per action.
    pub mean_contacts: f64,
    /// Mean events per action, descent events included.
    pub mean_events: f64,
    pub terminated: bool,
    /// Why the run stopped early, if it did.
    pub failure: Option<String>,
    pub trace: Option<PathBuf>,
    /// Mean wall time of a weight update, ms.
    pub weights_ms: f64,
    pub estimate: Pose6,
    pub true_pose: Pose6,
}

/// Runs one seeded calibration. Traces go to `out_dir` when given.
pub fn run_once(cfg: &ExperimentConfig, scene: &Scene, seed: u64, out_dir: Option<&Path>) -> Result<RunResult, Error> {
    let spec = match cfg.world.true_pose {
        Some(p) => TruePoseSpec::Fixed(p),
        None => TruePoseSpec::Random { x0: cfg.robot.base, e: cfg.world.error },
    };
    let world =
        make_world(scene.truth.clone(), scene.truth_cloud.clone(), &spec, cfg.noise, derive_seed(seed, TAG_TRUTH))?;
    let true_pose = world.true_pose.to_pose6();
    let candidates = sample_candidates(&scene.env, cfg.action.candidates, derive_seed(seed, TAG_CANDIDATES))?;
    let select = SelectParams {
        p_switch: cfg.action.p_switch,
        pretouch_offset: cfg.action.pretouch_offset,
        home: Some(cfg.robot.home.clone()),
        tie_break: cfg.action.tie_break,
        ..SelectParams::default()
    };
    let mut cal = Calibrator::new(cfg, scene, seed)?;
    let mut actions = ActionHistory::new();
    let mut writers = match out_dir {
        Some(dir) => {
            Some((JsonlWriter::create(trace_path(dir, seed))?, JsonlWriter::create(observations_path(dir, seed))?))
        }
        None => None,
    };

    let mut failure = None;
    let mut terminated = false;
    let (mut slide, mut events, mut timed, mut weights_ms) = (0usize, 0usize, 0usize, 0.0);
    for t in 1..=cfg.experiment.max_iterations {
        let it = derive_seed(derive_seed(seed, TAG_ITERATION), t as u64);
        let base = cal.estimate().to_se3();
        let sel = match select_action(&candidates, &actions, &scene.chain, &base, &select, &mut stream(it, TAG_SELECT))
        {
            Ok(s) => s,
            Err(ActionError::Exhausted { tried }) => {
                failure = Some(format!("no reachable candidate after trying {tried}"));
                break;
            }
            Err(e) => return Err(e.into()),
        };
        let exec = world.execute_action(&sel, &scene.chain, &mut stream(it, TAG_WORLD))?;
        actions.push(sel.candidate);
        let step = cal.step(&exec.observation)?;
        slide += exec.slide_events;
        events += exec.observation.len();
        if !exec.observation.is_empty() {
            timed += 1;
            weights_ms += step.weights_ms;
        }
        let (te, re) = pose_error(&step.estimate.to_se3(), &world.true_pose);
        if let Some((trace, obs)) = writers.as_mut() {
            trace.write(&IterationRecord {
                t,
                estimate: step.estimate,
                variance: step.variance,
                ess: step.ess,
                sigma: step.sigma,
                sigma_next: step.sigma_next,
                action: Some(sel.candidate),
                sparsity: Some(sel.sparsity),
                events: exec.observation.len(),
                slide_events: exec.slide_events,
                contacts: exec.observation.contacts(),
                weights_ms: step.weights_ms,
                degenerate: step.degenerate,
                criteria: step.criteria,
                pass_count: step.pass_count,
                terminated: step.terminated,
                trans_error_cm: Some(te * 100.0),
                rot_error_rad: Some(re),
            })?;
            obs.write(&ObservationRecord { t, observation: exec.observation })?;
        }
        if step.terminated {
            terminated = true;
            break;
        }
        if cal.degenerate_streak() >= cfg.experiment.max_degenerate_streak {
            failure = Some(format!("{} consecutive degenerate weight updates", cal.degenerate_streak()));
            break;
        }
    }

    let iterations = actions.len();
    let trace = match writers {
        Some((trace, obs)) => {
            obs.finish()?;
            Some(trace.finish()?)
        }
        None => None,
    };
    let est = cal.estimate();
    let (te, re) = pose_error(&est.to_se3(), &world.true_pose);
    let per_action = |n: usize| if iterations == 0 { 0.0 } else { n as f64 / iterations as f64 };
    Ok(RunResult {
        seed,
        trans_error_cm: te * 100.0,
        rot_error_rad: re,
        iterations,
        mean_contacts: per_action(slide),
        mean_events: per_action(events),
        terminated,
        failure,
        trace,
        weights_ms: if timed == 0 { 0.0 } else { weights_ms / timed as f64 },
        estimate: est,
        true_pose,
    })
}

/// Feeds logged observations to a fresh filter with the same seed. With the
/// configuration of the original run this reproduces its estimates exactly.
pub fn replay(cfg: &ExperimentConfig, scene: &Scene, seed: u64, observations: &Path) -> Result<Vec<Step>, Error> {
    let records: Vec<ObservationRecord> = read_jsonl(observations)?;
    let mut cal = Calibrator::new(cfg, scene, seed)?;
    let mut steps = Vec::with_capacity(records.len());
    for (i, r) in records.iter().enumerate() {
        if r.t != i + 1 {
            return Err(Error::Format(observations.to_path_buf(), format!("expected t = {}, found {}", i + 1, r.t)));
        }
        let step = cal.step(&r.observation)?;
        let done = step.terminated;
        steps.push(step);
        if done {
            break;
        }
    }
    Ok(steps)
}

/// Mean and sample standard deviation.
pub fn mean_sd(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// One sweep cell: its parameter values and every seed's result.
#[derive(Clone, Debug)]
pub struct CellResult {
    pub params: Vec<(String, toml::Value)>,
    pub runs: Vec<RunResult>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CellSummary {
    pub runs: usize,
    pub terminated: usize,
    pub failed: usize,
    pub trans_error_cm: (f64, f64),
    pub rot_error_rad: (f64, f64),
    pub actions: (f64, f64),
    pub contacts: (f64, f64),
    pub weights_ms: (f64, f64),
}

impl CellResult {
    pub fn summary(&self) -> CellSummary {
        let col = |f: fn(&RunResult) -> f64| mean_sd(&self.runs.iter().map(f).collect::<Vec<_>>());
        CellSummary {
            runs: self.runs.len(),
            terminated: self.runs.iter().filter(|r| r.terminated).count(),
            failed: self.runs.iter().filter(|r| r.failure.is_some()).count(),
            trans_error_cm: col(|r| r.trans_error_cm),
            rot_error_rad: col(|r| r.rot_error_rad),
            actions: col(|r| r.iterations as f64),
            contacts: col(|r| r.mean_contacts),
            weights_ms: col(|r| r.weights_ms),
        }
    }
}

fn pool(cfg: &ExperimentConfig) -> Result<rayon::ThreadPool, Error> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.experiment.threads.unwrap_or(0))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))
}

fn run_seeds(
    pool: &rayon::ThreadPool,
    cfg: &ExperimentConfig,
    scene: &Scene,
    out_dir: Option<&Path>,
) -> Result<Vec<RunResult>, Error> {
    pool.install(|| {
        cfg.experiment.seeds.par_iter().map(|&seed| run_once(cfg, scene, seed, out_dir)).collect::<Result<Vec<_>, _>>()
    })
}

/// Runs every seed of `cfg` in `scene`, ignoring any sweep grid.
pub fn run_batch(cfg: &ExperimentConfig, scene: &Scene, out_dir: Option<&Path>) -> Result<CellResult, Error> {
    let runs = run_seeds(&pool(cfg)?, cfg, scene, out_dir)?;
    Ok(CellResult { params: Vec::new(), runs })
}

/// Runs every cell of the sweep grid for every seed. Cells run one after
/// another so only one cell's grid is in memory; seeds of a cell run in a
/// pool of `threads` workers, which weight evaluation shares.
///
/// Run-level failures are recorded in the results; only configuration and
/// I/O problems abort the sweep.
pub fn run_sweep(cfg: &ExperimentConfig, out_dir: Option<&Path>) -> Result<Vec<CellResult>, Error> {
    let pool = pool(cfg)?;
    let cells = cfg.sweep_cells();
    let many = cells.len() > 1;
    let mut out = Vec::with_capacity(cells.len());
    for (i, params) in cells.into_iter().enumerate() {
        let cell_cfg = cfg.with_overrides(&params)?;
        let scene = Scene::build(&cell_cfg)?;
        let dir = out_dir.map(|d| if many { d.join(format!("cell-{i}")) } else { d.to_path_buf() });
        let runs = run_seeds(&pool, &cell_cfg, &scene, dir.as_deref())?;
        out.push(CellResult { params, runs });
    }
    Ok(out)
}
