//! Named experiment configurations.

use std::fmt;
use std::str::FromStr;

use crate::engine::RecordMode;
use crate::ensemble::{simulate, EnsembleConfig};
use crate::error::{Error, Result};
use crate::feedback::FeedbackPolicy;
use crate::model::{build_single_qubit, build_two_qubit, TwoQubitMode};
use crate::output::SweepRow;

pub const OMEGA0: f64 = 1.0;
pub const K1: f64 = 0.005;
/// `σz⊗σz` coupling for the `two-local` preset.
pub const TWO_LOCAL_KAPPA: f64 = 0.05;
pub const CYCLES: f64 = 50.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PresetName {
    Fig1,
    Fig2,
    Fig2Inset,
    Fig3,
    TwoLocal,
}

impl PresetName {
    pub const ALL: [PresetName; 5] = [
        PresetName::Fig1,
        PresetName::Fig2,
        PresetName::Fig2Inset,
        PresetName::Fig3,
        PresetName::TwoLocal,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            PresetName::Fig1 => "fig1",
            PresetName::Fig2 => "fig2",
            PresetName::Fig2Inset => "fig2-inset",
            PresetName::Fig3 => "fig3",
            PresetName::TwoLocal => "two-local",
        }
    }
}

impl fmt::Display for PresetName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PresetName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown preset '{s}'")))
    }
}

#[derive(Debug, Clone)]
pub struct Preset {
    pub name: PresetName,
    /// Everything but the record mode, which comes from `modes`.
    pub config: EnsembleConfig,
    /// Record modes the preset runs, in output order.
    pub modes: Vec<RecordMode>,
    /// Offset angles (degrees) for sweep presets.
    pub angles: Option<Vec<f64>>,
}

impl Preset {
    pub fn is_sweep(&self) -> bool {
        self.angles.is_some()
    }

    /// The preset's configuration in one record mode.
    pub fn config_for(&self, mode: RecordMode) -> EnsembleConfig {
        let mut cfg = self.config.clone();
        cfg.record_mode = mode;
        cfg
    }
}

/// `from, from + step, …` up to and including `to` (within rounding).
pub fn angle_grid(from: f64, to: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || !from.is_finite() || !to.is_finite() || to < from {
        return Err(Error::Config(format!(
            "angle range needs from <= to and step > 0, got {from}..{to} by {step}"
        )));
    }
    let n = ((to - from) / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|i| from + i as f64 * step).collect())
}

pub fn preset(name: PresetName) -> Preset {
    let single = || build_single_qubit(OMEGA0, K1).expect("valid single-qubit parameters");
    let both = vec![RecordMode::Full, RecordMode::OneBit];
    let (config, modes, angles) = match name {
        PresetName::Fig1 => (EnsembleConfig::new(single(), 10_000, CYCLES, RecordMode::Full), both, None),
        PresetName::Fig2 => {
            let mut cfg = EnsembleConfig::new(single(), 10_000, CYCLES, RecordMode::Full);
            cfg.policy = FeedbackPolicy::rotate_to_axis(0.0).expect("valid angle");
            (cfg, both, None)
        }
        PresetName::Fig2Inset => {
            let mut cfg = EnsembleConfig::new(single(), 10_000, CYCLES, RecordMode::OneBit);
            cfg.policy = FeedbackPolicy::rotate_to_axis(0.0).expect("valid angle");
            let angles = angle_grid(0.0, 90.0, 5.0).expect("valid grid");
            (cfg, vec![RecordMode::OneBit], Some(angles))
        }
        PresetName::Fig3 => {
            let model = build_two_qubit(OMEGA0, K1, 0.0, TwoQubitMode::ZZ).expect("valid two-qubit parameters");
            (EnsembleConfig::new(model, 20_000, CYCLES, RecordMode::Full), both, None)
        }
        PresetName::TwoLocal => {
            let model =
                build_two_qubit(OMEGA0, K1, TWO_LOCAL_KAPPA, TwoQubitMode::LocalZ).expect("valid two-qubit parameters");
            let mut cfg = EnsembleConfig::new(model, 20_000, CYCLES, RecordMode::Full);
            cfg.policy = FeedbackPolicy::LocalRotateToAxis;
            (cfg, both, None)
        }
    };
    Preset {
        name,
        config,
        modes,
        angles,
    }
}

/// Runs `base` once per offset angle under rotate-to-axis feedback and
/// reports the final fidelity. An angle whose trajectories all diverge
/// yields a NaN row rather than aborting the sweep.
pub fn sweep_angles(base: &EnsembleConfig, angles: &[f64]) -> Result<Vec<SweepRow>> {
    let mut rows = Vec::with_capacity(angles.len());
    for &angle in angles {
        let mut cfg = base.clone();
        cfg.policy = FeedbackPolicy::rotate_to_axis(angle)?;
        let row = match simulate(&cfg) {
            Ok(run) => {
                let (mean, sem) = run.stats.final_fidelity();
                SweepRow {
                    angle_deg: angle,
                    mean_final_fidelity: mean,
                    sem_final_fidelity: sem,
                    n_unstable: run.stats.n_unstable,
                }
            }
            Err(Error::EnsembleFailure { n_trajectories }) => SweepRow {
                angle_deg: angle,
                mean_final_fidelity: f64::NAN,
                sem_final_fidelity: f64::NAN,
                n_unstable: n_trajectories,
            },
            Err(e) => return Err(e),
        };
        rows.push(row);
    }
    Ok(rows)
}
