//! Quick self-checks of the core invariants, run by `qfilter validate`.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::engine::{advance_trajectory, RecordMode, StepConfig, TrajectoryState};
use crate::ensemble::{simulate_trajectory, simulate_with_workers, EnsembleConfig};
use crate::feedback::{bloch_vector, FeedbackPolicy};
use crate::linalg::{hermitian_eig, ComplexMatrix};
use crate::metrics::{correlations, fidelity};
use crate::model::{build_single_qubit, maximally_mixed, random_pure_state, DensityMatrix};
use crate::obr::{replay_filter, ObrRecord};

#[derive(Debug, Clone)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, outcome: std::result::Result<String, String>) -> CheckResult {
    match outcome {
        Ok(detail) => CheckResult {
            name,
            passed: true,
            detail,
        },
        Err(detail) => CheckResult {
            name,
            passed: false,
            detail,
        },
    }
}

fn random_hermitian(dim: usize, rng: &mut ChaCha8Rng) -> ComplexMatrix {
    let mut m = ComplexMatrix::zeros(dim);
    for i in 0..dim {
        m.set(i, i, Complex64::new(rng.sample(StandardNormal), 0.0));
        for j in (i + 1)..dim {
            let z = Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal));
            m.set(i, j, z);
            m.set(j, i, z.conj());
        }
    }
    m
}

fn random_unitary(dim: usize, rng: &mut ChaCha8Rng) -> ComplexMatrix {
    // exp(iH) from the eigendecomposition of a random Hermitian H
    let h = random_hermitian(dim, rng);
    let eig = hermitian_eig(&h).expect("finite Hermitian input");
    let mut diag = ComplexMatrix::zeros(dim);
    for (i, &l) in eig.values[..dim].iter().enumerate() {
        diag.set(i, i, Complex64::from_polar(1.0, l));
    }
    eig.vectors.matmul(&diag).matmul(&eig.vectors.adjoint())
}

fn eigen_reconstruction() -> std::result::Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    for dim in [2, 4] {
        for _ in 0..200 {
            let m = random_hermitian(dim, &mut rng);
            let eig = hermitian_eig(&m).map_err(|e| e.to_string())?;
            worst = worst.max(eig.reconstruct().max_abs_diff(&m));
        }
    }
    if worst < 1e-10 {
        Ok(format!("max error {worst:.1e}"))
    } else {
        Err(format!("reconstruction error {worst:.1e}"))
    }
}

fn trace_and_hermiticity() -> std::result::Result<String, String> {
    let model = build_single_qubit(1.0, 0.005).map_err(|e| e.to_string())?;
    let cfg = StepConfig::from_steps_per_cycle(10_000, RecordMode::OneBit).map_err(|e| e.to_string())?;
    let mut rng = crate::stream::derive_stream(3, 0);
    let truth = random_pure_state(2, &mut rng);
    let mut st = TrajectoryState::new(truth, maximally_mixed(2), rng);
    for step in 0..20_000 {
        advance_trajectory(&mut st, &model, &cfg, &FeedbackPolicy::None).map_err(|e| e.to_string())?;
        for rho in [&st.rho_true, st.rho_filter()] {
            let tr = rho.matrix().trace();
            if (tr.re - 1.0).abs() > 1e-12 || tr.im != 0.0 || rho.matrix().hermiticity_error() != 0.0 {
                return Err(format!("step {step}: trace {tr}"));
            }
        }
    }
    Ok("20000 steps, trace within 1e-12".into())
}

fn fidelity_invariance() -> std::result::Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    // full-rank states: a rank-deficient argument costs half the digits in the square root
    let mixed = |rng: &mut ChaCha8Rng, w: f64| {
        let pure = *random_pure_state(4, rng).matrix();
        DensityMatrix::new(pure.scale(w) + maximally_mixed(4).matrix().scale(1.0 - w))
    };
    for _ in 0..50 {
        let a = mixed(&mut rng, 0.8).map_err(|e| e.to_string())?;
        let b = mixed(&mut rng, 0.5).map_err(|e| e.to_string())?;
        let u = random_unitary(4, &mut rng);
        let f0 = fidelity(&a, &b).map_err(|e| e.to_string())?;
        let ua = DensityMatrix::new(a.matrix().conjugate_by(&u).hermitian_part()).map_err(|e| e.to_string())?;
        let ub = DensityMatrix::new(b.matrix().conjugate_by(&u).hermitian_part()).map_err(|e| e.to_string())?;
        let f1 = fidelity(&ua, &ub).map_err(|e| e.to_string())?;
        worst = worst.max((f0 - f1).abs());
    }
    if worst < 1e-9 {
        Ok(format!("max change {worst:.1e}"))
    } else {
        Err(format!("fidelity changed by {worst:.1e}"))
    }
}

fn named_correlations() -> std::result::Result<String, String> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let z = Complex64::new(0.0, 0.0);
    let bell = DensityMatrix::pure(&[Complex64::new(s, 0.0), z, z, Complex64::new(s, 0.0)]).map_err(|e| e.to_string())?;
    let classical = DensityMatrix::new(ComplexMatrix::from_diag(&[0.5, 0.0, 0.0, 0.5])).map_err(|e| e.to_string())?;
    let product = DensityMatrix::new(ComplexMatrix::from_diag(&[0.75, 0.0, 0.25, 0.0])).map_err(|e| e.to_string())?;
    let cases = [
        ("Bell", bell, 1.0, 1.0),
        ("classical", classical, 1.0, 0.0),
        ("product", product, 0.0, 0.0),
    ];
    for (name, rho, c_want, d_want) in cases {
        let c = correlations(&rho);
        if (c.classical - c_want).abs() > 1e-3 || (c.discord - d_want).abs() > 1e-3 {
            return Err(format!("{name}: C = {:.6}, D = {:.6}", c.classical, c.discord));
        }
    }
    Ok("Bell, classically correlated and product states".into())
}

fn feedback_on_axis() -> std::result::Result<String, String> {
    let model = build_single_qubit(1.0, 0.005).map_err(|e| e.to_string())?;
    let cfg = StepConfig::from_steps_per_cycle(10_000, RecordMode::Full).map_err(|e| e.to_string())?;
    let policy = FeedbackPolicy::rotate_to_axis(0.0).map_err(|e| e.to_string())?;
    let mut rng = crate::stream::derive_stream(4, 0);
    let truth = random_pure_state(2, &mut rng);
    let mut st = TrajectoryState::new(truth, maximally_mixed(2), rng);
    for _ in 0..5_000 {
        advance_trajectory(&mut st, &model, &cfg, &policy).map_err(|e| e.to_string())?;
        let r = bloch_vector(st.rho_filter());
        if r[0] * r[0] + r[1] * r[1] > 1e-16 {
            return Err(format!("filter Bloch vector {r:?} off the Z axis"));
        }
    }
    Ok("filter stays on the measurement axis".into())
}

fn small_config() -> EnsembleConfig {
    let model = build_single_qubit(1.0, 0.005).expect("valid parameters");
    let mut cfg = EnsembleConfig::new(model, 10_000, 1.0, RecordMode::OneBit);
    cfg.n_trajectories = 4;
    cfg.base_seed = 17;
    cfg.policy = FeedbackPolicy::rotate_to_axis(10.0).expect("valid angle");
    cfg
}

fn scheduling_invariance() -> std::result::Result<String, String> {
    let cfg = small_config();
    let a = simulate_with_workers(&cfg, 1).map_err(|e| e.to_string())?.stats;
    let b = simulate_with_workers(&cfg, 3).map_err(|e| e.to_string())?.stats;
    if a == b {
        Ok("1 and 3 workers agree bit for bit".into())
    } else {
        Err("statistics depend on the worker count".into())
    }
}

fn replay_equivalence() -> std::result::Result<String, String> {
    let mut cfg = small_config();
    cfg.capture_records = true;
    let trace = simulate_trajectory(&cfg, 2).map_err(|e| e.to_string())?;
    let record = trace.record.as_ref().ok_or("no record captured")?;
    let bytes = record.to_bytes();
    let back = ObrRecord::from_bytes(&bytes).map_err(|e| e.to_string())?;
    if back.to_bytes() != bytes {
        return Err("record round trip is not byte-identical".into());
    }
    let filter = replay_filter(&cfg.model, &cfg.policy, &back, |_, _| {}).map_err(|e| e.to_string())?;
    if *filter.state() == trace.final_filter {
        Ok(format!("{} steps replayed exactly", back.n_steps()))
    } else {
        Err("replayed filter differs from the in-line filter".into())
    }
}

/// Runs every check; never panics on a failed check.
pub fn run_all() -> Vec<CheckResult> {
    vec![
        check("hermitian eigendecomposition", eigen_reconstruction()),
        check("trace and hermiticity", trace_and_hermiticity()),
        check("fidelity unitary invariance", fidelity_invariance()),
        check("named-state correlations", named_correlations()),
        check("rotate-to-axis feedback", feedback_on_axis()),
        check("scheduling invariance", scheduling_invariance()),
        check("record replay", replay_equivalence()),
    ]
}
