//! Parallel ensembles of trajectories and their time-gridded statistics.
//!
//! Trajectory `i` draws all of its randomness (initial true state, then the
//! Wiener increments) from [`derive_stream`]`(base_seed, i)`, and traces are
//! reduced in index order, so results do not depend on the worker count.

use rayon::prelude::*;

use crate::engine::{advance_trajectory, RecordMode, StepConfig, TrajectoryState};
use crate::error::{Error, Result};
use crate::feedback::FeedbackPolicy;
use crate::metrics::{correlations, fidelity, project_psd};
use crate::model::{maximally_mixed, random_pure_state, DensityMatrix, SystemModel};
use crate::obr::ObrRecord;

pub use crate::stream::{derive_stream, gaussian_increment, TrajectoryRng};

/// Environment variable capping the number of worker threads.
pub const WORKERS_ENV: &str = "QFILTER_WORKERS";

/// Default trajectory count for presets and the CLI.
pub const DEFAULT_TRAJECTORIES: usize = 500;

#[derive(Debug, Clone)]
pub struct EnsembleConfig {
    pub model: SystemModel,
    pub n_trajectories: usize,
    pub cycles: f64,
    pub steps_per_cycle: u64,
    pub record_mode: RecordMode,
    pub policy: FeedbackPolicy,
    pub base_seed: u64,
    /// Steps between statistic samples.
    pub output_stride: u64,
    /// Steps between correlation evaluations (two-qubit models only). Must
    /// be a multiple of `output_stride`.
    pub corr_stride: u64,
    /// Fixed initial true state instead of a Haar-random pure state.
    pub pinned_initial_state: Option<DensityMatrix>,
    /// Keep each trajectory's one-bit record.
    pub capture_records: bool,
}

impl EnsembleConfig {
    /// Config with default strides (`steps_per_cycle/100` and `/10`), no
    /// feedback, seed 0 and [`DEFAULT_TRAJECTORIES`] trajectories.
    pub fn new(model: SystemModel, steps_per_cycle: u64, cycles: f64, record_mode: RecordMode) -> Self {
        let (output_stride, corr_stride) = default_strides(steps_per_cycle);
        Self {
            model,
            n_trajectories: DEFAULT_TRAJECTORIES,
            cycles,
            steps_per_cycle,
            record_mode,
            policy: FeedbackPolicy::None,
            base_seed: 0,
            output_stride,
            corr_stride,
            pinned_initial_state: None,
            capture_records: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_trajectories == 0 {
            return Err(Error::Config("n_trajectories must be >= 1".into()));
        }
        if self.steps_per_cycle == 0 {
            return Err(Error::Config("steps_per_cycle must be >= 1".into()));
        }
        if !(self.cycles >= 0.0) || !self.cycles.is_finite() {
            return Err(Error::Config(format!("cycles must be >= 0, got {}", self.cycles)));
        }
        if self.output_stride == 0 || self.corr_stride == 0 {
            return Err(Error::Config("strides must be >= 1".into()));
        }
        if !self.corr_stride.is_multiple_of(self.output_stride) {
            return Err(Error::Config(format!(
                "corr_stride {} must be a multiple of output_stride {}",
                self.corr_stride, self.output_stride
            )));
        }
        self.policy.validate()?;
        if let Some(d) = self.policy.required_dim() {
            if d != self.model.dim() {
                return Err(Error::Config(format!(
                    "feedback policy {:?} needs a {d}-dimensional model, got {}",
                    self.policy,
                    self.model.dim()
                )));
            }
        }
        if let Some(p) = &self.pinned_initial_state {
            if p.dim() != self.model.dim() {
                return Err(Error::Config("pinned initial state has the wrong dimension".into()));
            }
        }
        Ok(())
    }

    pub fn dt(&self) -> f64 {
        std::f64::consts::TAU / self.steps_per_cycle as f64
    }

    pub fn n_steps(&self) -> u64 {
        (self.cycles * self.steps_per_cycle as f64).round() as u64
    }

    pub fn has_correlations(&self) -> bool {
        self.model.dim() == 4
    }

    /// Step indices at which statistics are sampled.
    pub fn sample_steps(&self) -> Vec<u64> {
        (0..=self.n_steps()).step_by(self.output_stride as usize).collect()
    }
}

pub fn default_strides(steps_per_cycle: u64) -> (u64, u64) {
    let output = (steps_per_cycle / 100).max(1);
    let corr = ((steps_per_cycle / 10) / output).max(1) * output;
    (output, corr)
}

/// Per-trajectory sampled series. Series stop at the last sample before an
/// instability.
#[derive(Debug, Clone)]
pub struct TrajectoryTrace {
    pub index: u64,
    pub purity_true: Vec<f64>,
    pub purity_filter: Vec<f64>,
    pub fidelity: Vec<f64>,
    /// Correlations at every `corr_stride` step, `[C_true, C_filter, D_true, D_filter]`.
    pub correlations: Vec<[f64; 4]>,
    /// Step at which the trajectory diverged.
    pub unstable_at: Option<u64>,
    pub final_true: DensityMatrix,
    pub final_filter: DensityMatrix,
    pub record: Option<ObrRecord>,
}

impl TrajectoryTrace {
    pub fn is_stable(&self) -> bool {
        self.unstable_at.is_none()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub mean: Vec<f64>,
    pub sem: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationStats {
    pub classical_true: Series,
    pub classical_filter: Series,
    pub discord_true: Series,
    pub discord_filter: Series,
}

/// Means and standard errors over all trajectories that never diverged.
/// Correlation series share the time grid and hold NaN where they were not
/// evaluated.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleStats {
    pub dim: usize,
    pub times: Vec<f64>,
    pub purity_true: Series,
    pub purity_filter: Series,
    pub fidelity: Series,
    pub correlations: Option<CorrelationStats>,
    /// Trajectories flagged unstable at or before each sampled time.
    pub n_unstable_by_time: Vec<usize>,
    pub n_unstable: usize,
    pub n_trajectories: usize,
}

impl EnsembleStats {
    pub fn n_valid(&self) -> usize {
        self.n_trajectories - self.n_unstable
    }

    pub fn final_fidelity(&self) -> (f64, f64) {
        let i = self.times.len() - 1;
        (self.fidelity.mean[i], self.fidelity.sem[i])
    }

    /// First sampled time at which the mean filter purity reaches `threshold`.
    pub fn purity_crossing_time(&self, threshold: f64) -> Option<f64> {
        self.purity_filter
            .mean
            .iter()
            .position(|&p| p >= threshold)
            .map(|i| self.times[i])
    }
}

#[derive(Debug, Clone)]
pub struct EnsembleRun {
    pub stats: EnsembleStats,
    pub traces: Vec<TrajectoryTrace>,
}

fn safe_fidelity(a: &DensityMatrix, b: &DensityMatrix) -> f64 {
    // Euler steps leave small negative eigenvalues; evaluate on the nearest
    // physical states.
    fidelity(&project_psd(a), &project_psd(b)).unwrap_or(f64::NAN)
}

pub fn simulate_trajectory(cfg: &EnsembleConfig, index: u64) -> Result<TrajectoryTrace> {
    let dim = cfg.model.dim();
    let step_cfg = StepConfig::new(cfg.dt(), cfg.record_mode)?;
    let n_steps = cfg.n_steps();
    let n_samples = (n_steps / cfg.output_stride + 1) as usize;
    let with_corr = cfg.has_correlations();

    let mut rng = derive_stream(cfg.base_seed, index);
    let truth = match &cfg.pinned_initial_state {
        Some(p) => *p,
        None => random_pure_state(dim, &mut rng),
    };
    let mut state = TrajectoryState::new(truth, maximally_mixed(dim), rng);

    let mut trace = TrajectoryTrace {
        index,
        purity_true: Vec::with_capacity(n_samples),
        purity_filter: Vec::with_capacity(n_samples),
        fidelity: Vec::with_capacity(n_samples),
        correlations: Vec::new(),
        unstable_at: None,
        final_true: truth,
        final_filter: *state.rho_filter(),
        record: cfg
            .capture_records
            .then(|| ObrRecord::new(cfg.model.n_channels() as u32, cfg.dt())),
    };

    let sample = |state: &TrajectoryState, step: u64, trace: &mut TrajectoryTrace| {
        let (t, f) = (&state.rho_true, state.rho_filter());
        trace.purity_true.push(t.purity());
        trace.purity_filter.push(f.purity());
        trace.fidelity.push(safe_fidelity(t, f));
        if with_corr && step.is_multiple_of(cfg.corr_stride) {
            let ct = correlations(&project_psd(t));
            let cf = correlations(&project_psd(f));
            trace.correlations.push([
                ct.classical,
                cf.classical,
                ct.discord.max(0.0),
                cf.discord.max(0.0),
            ]);
        }
    };

    sample(&state, 0, &mut trace);
    for step in 1..=n_steps {
        match advance_trajectory(&mut state, &cfg.model, &step_cfg, &cfg.policy) {
            Ok(rec) => {
                if let Some(r) = trace.record.as_mut() {
                    r.push_step(&rec.bit);
                }
            }
            Err(Error::Unstable { .. }) => {
                trace.unstable_at = Some(step);
                break;
            }
            Err(e) => return Err(e),
        }
        if step % cfg.output_stride == 0 {
            sample(&state, step, &mut trace);
        }
    }
    trace.final_true = state.rho_true;
    trace.final_filter = *state.rho_filter();
    Ok(trace)
}

/// Worker count from [`WORKERS_ENV`], defaulting to the available parallelism.
pub fn workers_from_env() -> usize {
    std::env::var(WORKERS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&w| w > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1))
}

pub fn simulate_with_workers(cfg: &EnsembleConfig, workers: usize) -> Result<EnsembleRun> {
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    let traces: Vec<TrajectoryTrace> = pool.install(|| {
        (0..cfg.n_trajectories as u64)
            .into_par_iter()
            .map(|i| simulate_trajectory(cfg, i))
            .collect::<Result<Vec<_>>>()
    })?;
    let stats = aggregate(cfg, &traces)?;
    Ok(EnsembleRun { stats, traces })
}

/// Runs every trajectory and keeps the per-trajectory traces.
pub fn simulate(cfg: &EnsembleConfig) -> Result<EnsembleRun> {
    simulate_with_workers(cfg, workers_from_env())
}

pub fn run_ensemble(cfg: &EnsembleConfig) -> Result<EnsembleStats> {
    simulate(cfg).map(|r| r.stats)
}

fn mean_sem(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let (n, sum) = values.clone().fold((0usize, 0.0), |(n, s), v| (n + 1, s + v));
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = sum / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let ss: f64 = values.map(|v| (v - mean) * (v - mean)).sum();
    let sd = (ss / (n - 1) as f64).sqrt();
    (mean, sd / (n as f64).sqrt())
}

fn series(valid: &[&TrajectoryTrace], n: usize, get: impl Fn(&TrajectoryTrace, usize) -> f64) -> Series {
    let mut mean = Vec::with_capacity(n);
    let mut sem = Vec::with_capacity(n);
    for s in 0..n {
        let (m, e) = mean_sem(valid.iter().map(|t| get(t, s)));
        mean.push(m);
        sem.push(e);
    }
    Series { mean, sem }
}

/// Ordered reduction of traces into [`EnsembleStats`].
pub fn aggregate(cfg: &EnsembleConfig, traces: &[TrajectoryTrace]) -> Result<EnsembleStats> {
    let steps = cfg.sample_steps();
    let n = steps.len();
    let dt = cfg.dt();
    let times: Vec<f64> = steps.iter().map(|&s| s as f64 * dt).collect();

    let valid: Vec<&TrajectoryTrace> = traces.iter().filter(|t| t.is_stable()).collect();
    if valid.is_empty() {
        return Err(Error::EnsembleFailure {
            n_trajectories: traces.len(),
        });
    }
    let n_unstable = traces.len() - valid.len();
    let n_unstable_by_time = steps
        .iter()
        .map(|&s| traces.iter().filter(|t| t.unstable_at.is_some_and(|u| u <= s)).count())
        .collect();

    let correlations = cfg.has_correlations().then(|| {
        let corr_every = (cfg.corr_stride / cfg.output_stride) as usize;
        let pick = |k: usize| {
            series(&valid, n, move |t, s| {
                if s % corr_every == 0 {
                    t.correlations[s / corr_every][k]
                } else {
                    f64::NAN
                }
            })
        };
        CorrelationStats {
            classical_true: pick(0),
            classical_filter: pick(1),
            discord_true: pick(2),
            discord_filter: pick(3),
        }
    });

    Ok(EnsembleStats {
        dim: cfg.model.dim(),
        times,
        purity_true: series(&valid, n, |t, s| t.purity_true[s]),
        purity_filter: series(&valid, n, |t, s| t.purity_filter[s]),
        fidelity: series(&valid, n, |t, s| t.fidelity[s]),
        correlations,
        n_unstable_by_time,
        n_unstable,
        n_trajectories: traces.len(),
    })
}

/// A time that may lie beyond the simulated horizon.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HitTime {
    At(f64),
    /// Not reached by the end of the run at `horizon`.
    Censored { horizon: f64 },
}

impl HitTime {
    pub fn value(&self) -> Option<f64> {
        match self {
            HitTime::At(t) => Some(*t),
            HitTime::Censored { .. } => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HittingTimes {
    /// Median over stable trajectories of the first time the filter purity
    /// reaches the threshold.
    pub median_hit: HitTime,
    /// First time the ensemble-mean filter purity reaches the threshold.
    pub mean_cross: HitTime,
}

pub fn hitting_times(run: &EnsembleRun, threshold: f64) -> HittingTimes {
    let times = &run.stats.times;
    let horizon = *times.last().expect("time grid is never empty");
    let mut hits: Vec<f64> = run
        .traces
        .iter()
        .filter(|t| t.is_stable())
        .map(|t| {
            t.purity_filter
                .iter()
                .position(|&p| p >= threshold)
                .map_or(f64::INFINITY, |i| times[i])
        })
        .collect();
    hits.sort_by(f64::total_cmp);
    let m = hits.len();
    let median = if m % 2 == 1 {
        hits[m / 2]
    } else {
        0.5 * (hits[m / 2 - 1] + hits[m / 2])
    };
    let wrap = |t: Option<f64>| match t {
        Some(t) if t.is_finite() => HitTime::At(t),
        _ => HitTime::Censored { horizon },
    };
    HittingTimes {
        median_hit: wrap(Some(median)),
        mean_cross: wrap(run.stats.purity_crossing_time(threshold)),
    }
}

pub fn hitting_time_stats(cfg: &EnsembleConfig, purity_threshold: f64) -> Result<HittingTimes> {
    let dim = cfg.model.dim() as f64;
    if !(purity_threshold > 1.0 / dim && purity_threshold < 1.0) {
        return Err(Error::Config(format!(
            "purity threshold must lie in (1/{dim}, 1), got {purity_threshold}"
        )));
    }
    Ok(hitting_times(&simulate(cfg)?, purity_threshold))
}
