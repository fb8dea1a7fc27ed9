//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use num_complex::Complex64;
use qfilter::linalg::{hermitian_eig, kron, partial_trace, sigma_x, sigma_y, sigma_z, ComplexMatrix, Subsystem};
use qfilter::model::DensityMatrix;

type M2 = [[Complex64; 2]; 2];

fn h(p: f64) -> f64 {
    if p > 1e-15 {
        -p * p.log2()
    } else {
        0.0
    }
}

/// Entropy in bits of a 2×2 Hermitian, unit-trace matrix, from the closed-form
/// eigenvalues.
pub fn entropy_2x2(m: &ComplexMatrix) -> f64 {
    let a = m.get(0, 0).re;
    let d = m.get(1, 1).re;
    let b = m.get(0, 1).norm();
    let mid = 0.5 * (a + d);
    let rad = (0.25 * (a - d) * (a - d) + b * b).sqrt();
    h(mid + rad) + h(mid - rad)
}

pub fn entropy(m: &ComplexMatrix) -> f64 {
    hermitian_eig(m).unwrap().eigenvalues().iter().map(|&l| h(l)).sum()
}

/// Classical correlations and discord of a two-qubit state by exhaustive
/// search over a `n × n` grid of projective measurements on qubit A. Each
/// outcome is formed explicitly as `(Π ⊗ I) ρ (Π ⊗ I)` and reduced to B.
pub fn brute_force_correlations(rho: &DensityMatrix, n: usize) -> (f64, f64) {
    let m = rho.matrix();
    let id = ComplexMatrix::identity(2);
    let rho_a = partial_trace(m, Subsystem::A);
    let rho_b = partial_trace(m, Subsystem::B);
    let mut best = f64::INFINITY;
    for i in 0..n {
        let theta = std::f64::consts::PI * i as f64 / (n - 1) as f64;
        for j in 0..n {
            let phi = std::f64::consts::TAU * j as f64 / n as f64;
            let axis = [theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos()];
            let n_sigma = sigma_x().scale(axis[0]) + sigma_y().scale(axis[1]) + sigma_z().scale(axis[2]);
            let mut cond = 0.0;
            for sign in [1.0, -1.0] {
                let proj = kron(&(id + n_sigma.scale(sign)).scale(0.5), &id);
                let post = proj.matmul(m).matmul(&proj);
                let p = post.trace().re;
                if p > 1e-14 {
                    cond += p * entropy_2x2(&partial_trace(&post, Subsystem::B).scale(1.0 / p));
                }
            }
            best = best.min(cond);
        }
    }
    let s_a = entropy_2x2(&rho_a);
    let s_b = entropy_2x2(&rho_b);
    let classical = s_b - best;
    (classical, s_a + s_b - entropy(m) - classical)
}

/// Named two-qubit states with their exact (C, D).
pub fn named_states() -> Vec<(&'static str, DensityMatrix, f64, f64)> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let z = Complex64::new(0.0, 0.0);
    let bell = DensityMatrix::pure(&[Complex64::new(s, 0.0), z, z, Complex64::new(s, 0.0)]).unwrap();
    let classical = DensityMatrix::new(ComplexMatrix::from_diag(&[0.5, 0.0, 0.0, 0.5])).unwrap();
    let product = DensityMatrix::new(ComplexMatrix::from_diag(&[0.75, 0.0, 0.25, 0.0])).unwrap();
    vec![
        ("Bell", bell, 1.0, 1.0),
        ("classically correlated", classical, 1.0, 0.0),
        ("product", product, 0.0, 0.0),
    ]
}

fn lindblad_rhs(rho: &M2, omega0: f64, k: f64) -> M2 {
    // dρ/dt = −i[H, ρ] − k[σz, [σz, ρ]] with H = ω₀σx/2
    let i = Complex64::new(0.0, 1.0);
    let half = 0.5 * omega0;
    // Hρ − ρH for H = half·σx
    let comm = [
        [half * (rho[1][0] - rho[0][1]), half * (rho[1][1] - rho[0][0])],
        [half * (rho[0][0] - rho[1][1]), half * (rho[0][1] - rho[1][0])],
    ];
    let mut out = [[Complex64::new(0.0, 0.0); 2]; 2];
    for r in 0..2 {
        for c in 0..2 {
            // [σz,[σz,ρ]] is 4ρ off the diagonal and 0 on it
            let deph = if r == c { Complex64::new(0.0, 0.0) } else { rho[r][c] * 4.0 };
            out[r][c] = -i * comm[r][c] - deph * k;
        }
    }
    out
}

/// `⟨σz⟩(t)` under the unconditioned master equation, integrated by RK4,
/// at each of `times` (ascending), starting from `|0⟩`.
pub fn lindblad_sigma_z(times: &[f64], omega0: f64, k: f64, h_step: f64) -> Vec<f64> {
    let zero = Complex64::new(0.0, 0.0);
    let mut rho: M2 = [[Complex64::new(1.0, 0.0), zero], [zero, zero]];
    let add = |a: &M2, b: &M2, s: f64| -> M2 {
        let mut o = *a;
        for r in 0..2 {
            for c in 0..2 {
                o[r][c] += b[r][c] * s;
            }
        }
        o
    };
    let mut t = 0.0;
    let mut out = Vec::with_capacity(times.len());
    for &target in times {
        while t < target - 1e-12 {
            let dt = h_step.min(target - t);
            let k1 = lindblad_rhs(&rho, omega0, k);
            let k2 = lindblad_rhs(&add(&rho, &k1, dt / 2.0), omega0, k);
            let k3 = lindblad_rhs(&add(&rho, &k2, dt / 2.0), omega0, k);
            let k4 = lindblad_rhs(&add(&rho, &k3, dt), omega0, k);
            for r in 0..2 {
                for c in 0..2 {
                    rho[r][c] += (k1[r][c] + k2[r][c] * 2.0 + k3[r][c] * 2.0 + k4[r][c]) * (dt / 6.0);
                }
            }
            t += dt;
        }
        out.push((rho[0][0] - rho[1][1]).re);
    }
    out
}

/// Sample mean and standard error of the mean.
pub fn mean_sem(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Least-squares slope of `ys` against `xs`.
pub fn slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}
