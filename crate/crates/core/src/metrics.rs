//! Scalar diagnostics of density matrices: purity, Uhlmann fidelity,
//! von Neumann entropy (bits), and for two qubits the classical
//! correlations and quantum discord with orthogonal projective
//! measurements on qubit A.

use crate::error::Result;
use crate::linalg::{
    eigenvalues_2x2, hermitian_eig, kron, matrix_sqrt_psd, partial_trace, sigma_x, sigma_y,
    sigma_z, ComplexMatrix, Subsystem,
};
use crate::model::DensityMatrix;

/// Eigenvalues below this contribute nothing to an entropy.
pub const ENTROPY_CUTOFF: f64 = 1e-12;

/// Measurement outcomes less likely than this are dropped from the
/// conditional entropy.
pub const OUTCOME_CUTOFF: f64 = 1e-12;

const GRID_THETA: usize = 48;
const GRID_PHI: usize = 96;
const REFINE_TOL: f64 = 1e-9;
const GOLDEN_ITERS: usize = 60;

pub fn purity(rho: &DensityMatrix) -> f64 {
    rho.purity()
}

/// `F = (Tr √(√ρ_c ρ₀ √ρ_c))²`
pub fn fidelity(rho0: &DensityMatrix, rhoc: &DensityMatrix) -> Result<f64> {
    assert_eq!(rho0.dim(), rhoc.dim(), "fidelity of states with different dimensions");
    let s = matrix_sqrt_psd(rhoc.matrix())?;
    let inner = s.matmul(rho0.matrix()).matmul(&s).hermitian_part();
    let root = matrix_sqrt_psd(&inner)?;
    let t = root.trace().re;
    Ok(t * t)
}

/// Nearest state with non-negative spectrum: negative eigenvalues are set
/// to zero and the trace restored.
pub fn project_psd(rho: &DensityMatrix) -> DensityMatrix {
    let eig = hermitian_eig(rho.matrix()).expect("density matrices are Hermitian");
    if eig.eigenvalues()[0] >= 0.0 {
        return *rho;
    }
    let total: f64 = eig.eigenvalues().iter().map(|l| l.max(0.0)).sum();
    let m = eig.map_eigenvalues(|l| l.max(0.0) / total).hermitian_part();
    DensityMatrix::from_matrix_unchecked(m)
}

fn entropy_term(l: f64) -> f64 {
    if l > ENTROPY_CUTOFF {
        -l * l.log2()
    } else {
        0.0
    }
}

/// `S(ρ) = −Tr ρ log₂ ρ`
pub fn von_neumann_entropy(rho: &DensityMatrix) -> f64 {
    matrix_entropy(rho.matrix())
}

fn matrix_entropy(m: &ComplexMatrix) -> f64 {
    if m.dim() == 2 {
        let (lo, hi) = eigenvalues_2x2(m.get(0, 0).re, m.get(1, 1).re, m.get(0, 1));
        return entropy_term(lo) + entropy_term(hi);
    }
    let eig = hermitian_eig(m).expect("density matrices are Hermitian");
    eig.eigenvalues().iter().map(|&l| entropy_term(l)).sum()
}

/// Orthogonal projectors `Π_± = (I ± n̂·σ)/2` on one qubit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectorPair {
    pub axis: [f64; 3],
}

impl ProjectorPair {
    pub fn from_angles(theta: f64, phi: f64) -> Self {
        let (st, ct) = theta.sin_cos();
        let (sp, cp) = phi.sin_cos();
        Self {
            axis: [st * cp, st * sp, ct],
        }
    }

    fn n_sigma(&self) -> ComplexMatrix {
        sigma_x().scale(self.axis[0]) + sigma_y().scale(self.axis[1]) + sigma_z().scale(self.axis[2])
    }

    pub fn plus(&self) -> ComplexMatrix {
        (ComplexMatrix::identity(2) + self.n_sigma()).scale(0.5)
    }

    pub fn minus(&self) -> ComplexMatrix {
        (ComplexMatrix::identity(2) - self.n_sigma()).scale(0.5)
    }
}

/// Conditional entropy of B given a projective measurement on A, with the
/// state pre-reduced to `ρ_B` and `T_i = Tr_A[(σ_i ⊗ I) ρ]`, so that the
/// unnormalised post-measurement state of B is `(ρ_B ± n̂·T)/2`.
struct ConditionalEntropy {
    rho_b: ComplexMatrix,
    t: [ComplexMatrix; 3],
}

impl ConditionalEntropy {
    fn new(rho: &ComplexMatrix) -> Self {
        let id = ComplexMatrix::identity(2);
        let reduce = |op: ComplexMatrix| partial_trace(&kron(&op, &id).matmul(rho), Subsystem::B);
        Self {
            rho_b: partial_trace(rho, Subsystem::B),
            t: [reduce(sigma_x()), reduce(sigma_y()), reduce(sigma_z())],
        }
    }

    fn at_axis(&self, n: [f64; 3]) -> f64 {
        let mut acc = 0.0;
        for sign in [1.0, -1.0] {
            let entry = |i: usize, j: usize| {
                let mut z = self.rho_b.get(i, j);
                for (k, tk) in self.t.iter().enumerate() {
                    z += tk.get(i, j) * (sign * n[k]);
                }
                z * 0.5
            };
            let a = entry(0, 0).re;
            let d = entry(1, 1).re;
            // Hermitian part of the off-diagonal element
            let b = (entry(0, 1) + entry(1, 0).conj()) * 0.5;
            let p = a + d;
            if p < OUTCOME_CUTOFF {
                continue;
            }
            let (lo, hi) = eigenvalues_2x2(a / p, d / p, b / p);
            acc += p * (entropy_term(lo) + entropy_term(hi));
        }
        acc
    }

    fn at(&self, theta: f64, phi: f64) -> f64 {
        self.at_axis(ProjectorPair::from_angles(theta, phi).axis)
    }
}

fn golden_min(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..GOLDEN_ITERS {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2);
        }
    }
    if f1 <= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

/// Minimum over measurement axes of the conditional entropy, with the
/// minimising axis. Coarse grid uniform in `cos θ` and `φ`, then
/// alternating golden-section searches in θ and φ.
pub fn min_conditional_entropy(rho: &DensityMatrix) -> (f64, ProjectorPair) {
    assert_eq!(rho.dim(), 4, "correlations need a two-qubit state");
    let obj = ConditionalEntropy::new(rho.matrix());

    let mut best = (f64::INFINITY, 0.0, 0.0);
    for i in 0..GRID_THETA {
        let cos_t = 1.0 - (2 * i + 1) as f64 / GRID_THETA as f64;
        let theta = cos_t.acos();
        for j in 0..GRID_PHI {
            let phi = std::f64::consts::TAU * j as f64 / GRID_PHI as f64;
            let v = obj.at(theta, phi);
            if v < best.0 {
                best = (v, theta, phi);
            }
        }
    }

    let (mut value, mut theta, mut phi) = best;
    let theta_half = 0.25;
    let phi_half = 1.5 * std::f64::consts::TAU / GRID_PHI as f64;
    for _ in 0..100 {
        let (t, _) = golden_min(|t| obj.at(t, phi), theta - theta_half, theta + theta_half);
        let (p, v) = golden_min(|p| obj.at(t, p), phi - phi_half, phi + phi_half);
        let improved = value - v;
        if v < value {
            value = v;
            theta = t;
            phi = p;
        }
        if !(improved >= REFINE_TOL) {
            break;
        }
    }
    (value, ProjectorPair::from_angles(theta, phi))
}

/// Classical correlations and discord of one two-qubit state, in bits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Correlations {
    pub classical: f64,
    pub discord: f64,
}

pub fn correlations(rho: &DensityMatrix) -> Correlations {
    let (min_cond, _) = min_conditional_entropy(rho);
    let rho_a = partial_trace(rho.matrix(), Subsystem::A);
    let rho_b = partial_trace(rho.matrix(), Subsystem::B);
    let s_a = matrix_entropy(&rho_a);
    let s_b = matrix_entropy(&rho_b);
    let classical = s_b - min_cond;
    let discord = s_a + s_b - von_neumann_entropy(rho) - classical;
    Correlations { classical, discord }
}

/// `C(ρ) = S(ρ_B) − min Σ_a p_a S(ρ_B|a)`
pub fn classical_correlations(rho: &DensityMatrix) -> f64 {
    correlations(rho).classical
}

/// `D(ρ) = S(ρ_A) + S(ρ_B) − S(ρ) − C(ρ)`
pub fn quantum_discord(rho: &DensityMatrix) -> f64 {
    correlations(rho).discord
}
