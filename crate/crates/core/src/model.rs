//! Hamiltonians, measurement channels and the density-matrix type.
//!
//! Units: ħ = 1 and ω₀ sets the frequency scale. Rates are in units of ω₀,
//! times in units of 1/ω₀, and one cycle lasts 2π/ω₀.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::{kron, sigma_x, sigma_z, ComplexMatrix, HERMITIAN_TOL};

/// Trace tolerance for a valid density matrix.
pub const TRACE_TOL: f64 = 1e-9;

/// Purity above `1 + INSTABILITY_PURITY_MARGIN` marks a diverged estimate.
///
/// Explicit Euler inflates the Bloch radius by `dt²` per step and the
/// measurement barely pulls it back near the measured axis, so even at fine
/// steps individual trajectories wander to purities of 1.1 to 1.3 and return.
/// The margin sits above those excursions; coarse steps still cross it
/// within a few cycles.
pub const INSTABILITY_PURITY_MARGIN: f64 = 0.5;

/// Hermitian, unit-trace matrix. Positivity is not enforced: the Euler
/// integrator can push eigenvalues slightly negative, and large negativity
/// is reported by the engine as instability rather than hidden here.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityMatrix(ComplexMatrix);

impl DensityMatrix {
    pub fn new(mat: ComplexMatrix) -> Result<Self> {
        let herm = mat.hermiticity_error();
        if !(herm <= HERMITIAN_TOL) {
            return Err(Error::NotHermitian { deviation: herm });
        }
        let tr = mat.trace();
        if !((tr.re - 1.0).abs() <= TRACE_TOL && tr.im.abs() <= TRACE_TOL) {
            return Err(Error::InvalidState(format!("trace is {tr}, expected 1")));
        }
        Ok(Self(mat))
    }

    pub(crate) fn from_matrix_unchecked(mat: ComplexMatrix) -> Self {
        Self(mat)
    }

    /// Pure state `|ψ⟩⟨ψ|`; the vector is normalised first.
    pub fn pure(psi: &[Complex64]) -> Result<Self> {
        let norm: f64 = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::InvalidState("zero or non-finite state vector".into()));
        }
        let v: Vec<Complex64> = psi.iter().map(|z| z / norm).collect();
        Ok(Self(ComplexMatrix::outer(&v)))
    }

    /// Single-qubit state with Bloch vector `r`.
    pub fn from_bloch(r: [f64; 3]) -> Self {
        let i = Complex64::i();
        let half = 0.5;
        let m = ComplexMatrix::from_rows(&[
            [
                Complex64::new(half * (1.0 + r[2]), 0.0),
                (Complex64::new(r[0], 0.0) - i * r[1]) * half,
            ],
            [
                (Complex64::new(r[0], 0.0) + i * r[1]) * half,
                Complex64::new(half * (1.0 - r[2]), 0.0),
            ],
        ]);
        Self(m)
    }

    #[inline]
    pub fn matrix(&self) -> &ComplexMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.0
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.0.dim()
    }

    /// `⟨O⟩ = Re Tr(O ρ)`
    #[inline]
    pub fn expectation(&self, op: &ComplexMatrix) -> f64 {
        op.trace_product_re(&self.0)
    }

    #[inline]
    pub fn purity(&self) -> f64 {
        self.0.frobenius_sq()
    }
}

/// Hermitian measurement operator `ŷ` with coupling strength `k ≥ 0`; the
/// Lindblad operator is `√(2k) ŷ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeasurementChannel {
    pub y_op: ComplexMatrix,
    pub strength_k: f64,
}

impl MeasurementChannel {
    pub fn new(y_op: ComplexMatrix, strength_k: f64) -> Result<Self> {
        let herm = y_op.hermiticity_error();
        if !(herm <= HERMITIAN_TOL) {
            return Err(Error::NotHermitian { deviation: herm });
        }
        if !(strength_k >= 0.0) || !strength_k.is_finite() {
            return Err(Error::Config(format!(
                "measurement strength must be finite and >= 0, got {strength_k}"
            )));
        }
        Ok(Self { y_op, strength_k })
    }
}

/// Two-qubit measurement layout.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TwoQubitMode {
    /// Single collective `σz ⊗ σz` channel.
    ZZ,
    /// Independent `σz ⊗ I` and `I ⊗ σz` channels.
    LocalZ,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SystemModel {
    dim: usize,
    hamiltonian: ComplexMatrix,
    channels: Vec<MeasurementChannel>,
}

impl SystemModel {
    pub fn new(hamiltonian: ComplexMatrix, channels: Vec<MeasurementChannel>) -> Result<Self> {
        let dim = hamiltonian.dim();
        let herm = hamiltonian.hermiticity_error();
        if !(herm <= HERMITIAN_TOL) {
            return Err(Error::NotHermitian { deviation: herm });
        }
        if let Some(bad) = channels.iter().find(|c| c.y_op.dim() != dim) {
            return Err(Error::Config(format!(
                "channel operator has dimension {} but the Hamiltonian has {dim}",
                bad.y_op.dim()
            )));
        }
        Ok(Self {
            dim,
            hamiltonian,
            channels,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn hamiltonian(&self) -> &ComplexMatrix {
        &self.hamiltonian
    }

    pub fn channels(&self) -> &[MeasurementChannel] {
        &self.channels
    }

    pub fn n_channels(&self) -> usize {
        self.channels.len()
    }
}

fn check_frequency(omega0: f64) -> Result<()> {
    if !(omega0 > 0.0) || !omega0.is_finite() {
        return Err(Error::Config(format!(
            "omega0 must be positive, got {omega0}"
        )));
    }
    Ok(())
}

/// One qubit precessing about X, `H = ω₀σx/2`, measured along Z with strength `k1`.
pub fn build_single_qubit(omega0: f64, k1: f64) -> Result<SystemModel> {
    check_frequency(omega0)?;
    let h = sigma_x().scale(0.5 * omega0);
    SystemModel::new(h, vec![MeasurementChannel::new(sigma_z(), k1)?])
}

/// Two qubits, each precessing about X, with an optional `κ σz⊗σz` coupling.
pub fn build_two_qubit(omega0: f64, k1: f64, kappa: f64, mode: TwoQubitMode) -> Result<SystemModel> {
    check_frequency(omega0)?;
    if !(kappa >= 0.0) || !kappa.is_finite() {
        return Err(Error::Config(format!("kappa must be >= 0, got {kappa}")));
    }
    let id = ComplexMatrix::identity(2);
    let zz = kron(&sigma_z(), &sigma_z());
    let h = kron(&sigma_x(), &id).scale(0.5 * omega0)
        + kron(&id, &sigma_x()).scale(0.5 * omega0)
        + zz.scale(kappa);
    let channels = match mode {
        TwoQubitMode::ZZ => vec![MeasurementChannel::new(zz, k1)?],
        TwoQubitMode::LocalZ => vec![
            MeasurementChannel::new(kron(&sigma_z(), &id), k1)?,
            MeasurementChannel::new(kron(&id, &sigma_z()), k1)?,
        ],
    };
    SystemModel::new(h, channels)
}

pub fn maximally_mixed(dim: usize) -> DensityMatrix {
    DensityMatrix(ComplexMatrix::identity(dim).scale(1.0 / dim as f64))
}

/// Haar-random pure state: a normalised vector of i.i.d. complex Gaussians.
pub fn random_pure_state<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> DensityMatrix {
    let psi: Vec<Complex64> = (0..dim)
        .map(|_| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            Complex64::new(re, im)
        })
        .collect();
    DensityMatrix::pure(&psi).expect("Gaussian vector is almost surely non-zero")
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn single_qubit_entries() {
        let m = build_single_qubit(1.0, 0.005).unwrap();
        assert_eq!(m.dim(), 2);
        assert_eq!(m.channels()[0].strength_k, 0.005);
        assert_eq!(m.hamiltonian().get(0, 1), Complex64::new(0.5, 0.0));
        assert_eq!(m.hamiltonian().get(1, 0), Complex64::new(0.5, 0.0));
        let m = build_single_qubit(2.0, 0.01).unwrap();
        assert_eq!(m.hamiltonian().get(0, 1), Complex64::new(1.0, 0.0));
        let m = build_single_qubit(1.0, 0.0).unwrap();
        assert_eq!(m.channels()[0].strength_k, 0.0);
    }

    #[test]
    fn rejects_bad_config() {
        assert!(matches!(build_single_qubit(0.0, 0.1), Err(Error::Config(_))));
        assert!(matches!(build_single_qubit(-1.0, 0.1), Err(Error::Config(_))));
        assert!(matches!(build_single_qubit(1.0, -0.1), Err(Error::Config(_))));
        assert!(build_two_qubit(0.0, 0.1, 0.0, TwoQubitMode::ZZ).is_err());
        assert!(build_two_qubit(1.0, 0.1, -0.1, TwoQubitMode::ZZ).is_err());
    }

    #[test]
    fn two_qubit_channels() {
        let m = build_two_qubit(1.0, 0.005, 0.0, TwoQubitMode::ZZ).unwrap();
        assert_eq!(m.dim(), 4);
        assert_eq!(m.n_channels(), 1);
        assert_eq!(
            m.channels()[0].y_op,
            ComplexMatrix::from_diag(&[1.0, -1.0, -1.0, 1.0])
        );
        let m = build_two_qubit(1.0, 0.005, 0.0, TwoQubitMode::LocalZ).unwrap();
        assert_eq!(m.n_channels(), 2);
        let (a, b) = (m.channels()[0].y_op, m.channels()[1].y_op);
        assert_eq!(a.matmul(&b), b.matmul(&a));
    }

    #[test]
    fn kappa_term_on_diagonal() {
        let m = build_two_qubit(1.0, 0.0, 0.3, TwoQubitMode::ZZ).unwrap();
        let h = m.hamiltonian();
        let diag: Vec<f64> = (0..4).map(|i| h.get(i, i).re).collect();
        assert_eq!(diag, vec![0.3, -0.3, -0.3, 0.3]);
        // σx⊗I/2 + I⊗σx/2 couples |00⟩ to |10⟩ and |01⟩
        assert_eq!(h.get(0, 2), Complex64::new(0.5, 0.0));
        assert_eq!(h.get(0, 1), Complex64::new(0.5, 0.0));
        assert_eq!(h.get(0, 3), Complex64::new(0.0, 0.0));
    }

    #[test]
    fn mixed_states() {
        assert_eq!(
            *maximally_mixed(2).matrix(),
            ComplexMatrix::from_diag(&[0.5, 0.5])
        );
        assert_eq!(
            *maximally_mixed(4).matrix(),
            ComplexMatrix::from_diag(&[0.25; 4])
        );
        assert_eq!(maximally_mixed(2).purity(), 0.5);
        assert!(DensityMatrix::new(*maximally_mixed(4).matrix()).is_ok());
    }

    #[test]
    fn density_validation() {
        let bad_trace = ComplexMatrix::from_diag(&[0.6, 0.6]);
        assert!(matches!(
            DensityMatrix::new(bad_trace),
            Err(Error::InvalidState(_))
        ));
        let non_herm = ComplexMatrix::from_real_rows(&[[0.5, 0.1], [0.0, 0.5]]);
        assert!(matches!(
            DensityMatrix::new(non_herm),
            Err(Error::NotHermitian { .. })
        ));
    }

    #[test]
    fn bloch_construction() {
        let rho = DensityMatrix::from_bloch([0.0, 0.0, 1.0]);
        assert_eq!(*rho.matrix(), ComplexMatrix::from_diag(&[1.0, 0.0]));
        let rho = DensityMatrix::from_bloch([0.3, -0.4, 0.5]);
        assert!((rho.expectation(&crate::linalg::sigma_y()) + 0.4).abs() < 1e-15);
        assert!((rho.expectation(&sigma_x()) - 0.3).abs() < 1e-15);
    }

    #[test]
    fn random_pure_is_pure_and_deterministic() {
        for dim in [2, 4] {
            let mut rng = ChaCha8Rng::seed_from_u64(5);
            for _ in 0..100 {
                let rho = random_pure_state(dim, &mut rng);
                assert!((rho.matrix().trace().re - 1.0).abs() < 1e-12);
                assert!((rho.purity() - 1.0).abs() < 1e-12);
            }
            let a = random_pure_state(dim, &mut ChaCha8Rng::seed_from_u64(9));
            let b = random_pure_state(dim, &mut ChaCha8Rng::seed_from_u64(9));
            assert_eq!(a, b);
        }
    }

    #[test]
    fn haar_average_is_maximally_mixed() {
        // Each entry of the mean over N draws must be within 3 standard
        // errors of the corresponding entry of I/dim.
        const N: usize = 10_000;
        for dim in [2usize, 4] {
            let mut rng = ChaCha8Rng::seed_from_u64(1234 + dim as u64);
            let mut sum = vec![Complex64::new(0.0, 0.0); dim * dim];
            let mut sum_sq = vec![(0.0f64, 0.0f64); dim * dim];
            for _ in 0..N {
                let rho = random_pure_state(dim, &mut rng);
                for i in 0..dim {
                    for j in 0..dim {
                        let z = rho.matrix().get(i, j);
                        sum[i * dim + j] += z;
                        sum_sq[i * dim + j].0 += z.re * z.re;
                        sum_sq[i * dim + j].1 += z.im * z.im;
                    }
                }
            }
            for i in 0..dim {
                for j in 0..dim {
                    let idx = i * dim + j;
                    let mean = sum[idx] / N as f64;
                    let target = if i == j { 1.0 / dim as f64 } else { 0.0 };
                    let var_re = sum_sq[idx].0 / N as f64 - mean.re * mean.re;
                    let var_im = sum_sq[idx].1 / N as f64 - mean.im * mean.im;
                    let se_re = (var_re / N as f64).sqrt();
                    let se_im = (var_im / N as f64).sqrt();
                    assert!((mean.re - target).abs() <= 3.0 * se_re + 1e-15, "re ({i},{j})");
                    assert!(mean.im.abs() <= 3.0 * se_im + 1e-15, "im ({i},{j})");
                }
            }
        }
    }
}
