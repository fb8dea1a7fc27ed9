//! Feedback control laws: map the filter estimate to a corrective unitary.
//!
//! Every control is a full correction applied once per time step. Rotations
//! are minimal-angle: about the normalised cross product of the current
//! Bloch direction and the target, by the angle between them.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{kron, partial_trace, ComplexMatrix, Subsystem};
use crate::model::DensityMatrix;

/// Bloch vectors shorter than this carry no direction; the control is identity.
pub const DEGENERATE_BLOCH: f64 = 1e-9;

const UNITARY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum FeedbackPolicy {
    /// No control.
    #[default]
    None,
    /// Rotate the estimated Bloch vector onto `(sin θ, 0, cos θ)`; θ = 0 is
    /// the measurement axis.
    RotateToAxis { offset_angle_deg: f64 },
    /// Rotate the Bloch vector into the X–Y plane, orthogonal to the
    /// measurement axis, keeping its azimuth.
    OrthogonalPlane,
    /// Two qubits: rotate each reduced Bloch vector onto its own +Z axis
    /// with a product unitary `U_A ⊗ U_B`.
    LocalRotateToAxis,
}

impl FeedbackPolicy {
    pub fn rotate_to_axis(offset_angle_deg: f64) -> Result<Self> {
        let p = FeedbackPolicy::RotateToAxis { offset_angle_deg };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if let FeedbackPolicy::RotateToAxis { offset_angle_deg } = *self {
            if !(0.0..=90.0).contains(&offset_angle_deg) {
                return Err(Error::Config(format!(
                    "feedback offset angle must lie in [0, 90] degrees, got {offset_angle_deg}"
                )));
            }
        }
        Ok(())
    }

    /// Dimension the policy operates on, if it is restricted to one.
    pub fn required_dim(&self) -> Option<usize> {
        match self {
            FeedbackPolicy::None => None,
            FeedbackPolicy::RotateToAxis { .. } | FeedbackPolicy::OrthogonalPlane => Some(2),
            FeedbackPolicy::LocalRotateToAxis => Some(4),
        }
    }

    pub fn is_none(&self) -> bool {
        matches!(self, FeedbackPolicy::None)
    }
}

/// `r_i = Tr(ρ σ_i)` for a single-qubit matrix.
pub fn bloch_of_matrix(m: &ComplexMatrix) -> [f64; 3] {
    debug_assert_eq!(m.dim(), 2);
    let off = m.get(1, 0);
    [
        2.0 * off.re,
        2.0 * off.im,
        m.get(0, 0).re - m.get(1, 1).re,
    ]
}

pub fn bloch_vector(rho: &DensityMatrix) -> [f64; 3] {
    assert_eq!(rho.dim(), 2, "Bloch vector needs a single-qubit state");
    bloch_of_matrix(rho.matrix())
}

fn norm3(v: [f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// `exp(-i α/2 a·σ)`: right-handed rotation of Bloch vectors by `angle`
/// about the unit vector `axis`.
pub fn rotation_unitary(axis: [f64; 3], angle: f64) -> ComplexMatrix {
    let (s, c) = (0.5 * angle).sin_cos();
    let [ax, ay, az] = axis;
    // cos(α/2) I − i sin(α/2) (ax σx + ay σy + az σz), written out
    ComplexMatrix::from_rows(&[
        [Complex64::new(c, -s * az), Complex64::new(-s * ay, -s * ax)],
        [Complex64::new(s * ay, -s * ax), Complex64::new(c, s * az)],
    ])
}

/// Minimal rotation taking the direction of `r` onto the unit vector `target`.
pub fn rotation_onto(r: [f64; 3], target: [f64; 3]) -> ComplexMatrix {
    let len = norm3(r);
    if len < DEGENERATE_BLOCH {
        return ComplexMatrix::identity(2);
    }
    let unit = [r[0] / len, r[1] / len, r[2] / len];
    let axis = cross(unit, target);
    let sin = norm3(axis);
    let cos = dot(unit, target).clamp(-1.0, 1.0);
    if sin < 1e-12 {
        if cos > 0.0 {
            return ComplexMatrix::identity(2);
        }
        // antiparallel: half turn about Y when that is perpendicular to the target
        let perp = if target[1].abs() < 1e-12 {
            [0.0, 1.0, 0.0]
        } else {
            let p = cross(target, [1.0, 0.0, 0.0]);
            let n = norm3(p);
            [p[0] / n, p[1] / n, p[2] / n]
        };
        return rotation_unitary(perp, std::f64::consts::PI);
    }
    let axis = [axis[0] / sin, axis[1] / sin, axis[2] / sin];
    rotation_unitary(axis, sin.atan2(cos))
}

fn single_qubit_control(r: [f64; 3], policy: &FeedbackPolicy) -> ComplexMatrix {
    match *policy {
        FeedbackPolicy::RotateToAxis { offset_angle_deg } => {
            let (s, c) = offset_angle_deg.to_radians().sin_cos();
            rotation_onto(r, [s, 0.0, c])
        }
        FeedbackPolicy::OrthogonalPlane => {
            let rho_xy = (r[0] * r[0] + r[1] * r[1]).sqrt();
            let target = if rho_xy < DEGENERATE_BLOCH {
                [1.0, 0.0, 0.0]
            } else {
                [r[0] / rho_xy, r[1] / rho_xy, 0.0]
            };
            rotation_onto(r, target)
        }
        _ => unreachable!("not a single-qubit policy"),
    }
}

/// Corrective unitary for the current filter estimate.
pub fn control_unitary(rho_filter: &DensityMatrix, policy: &FeedbackPolicy) -> Result<ComplexMatrix> {
    control_unitary_for(rho_filter.matrix(), policy)
}

pub(crate) fn control_unitary_for(rho: &ComplexMatrix, policy: &FeedbackPolicy) -> Result<ComplexMatrix> {
    let dim = rho.dim();
    if let Some(required) = policy.required_dim() {
        if required != dim {
            return Err(Error::Config(format!(
                "feedback policy {policy:?} needs dimension {required}, state has {dim}"
            )));
        }
    }
    Ok(match policy {
        FeedbackPolicy::None => ComplexMatrix::identity(dim),
        FeedbackPolicy::RotateToAxis { .. } | FeedbackPolicy::OrthogonalPlane => {
            single_qubit_control(bloch_of_matrix(rho), policy)
        }
        FeedbackPolicy::LocalRotateToAxis => {
            let z = [0.0, 0.0, 1.0];
            let ua = rotation_onto(bloch_of_matrix(&partial_trace(rho, Subsystem::A)), z);
            let ub = rotation_onto(bloch_of_matrix(&partial_trace(rho, Subsystem::B)), z);
            kron(&ua, &ub)
        }
    })
}

/// `ρ → U ρ U†`, rejecting non-unitary `U`.
pub fn apply_control(rho: &DensityMatrix, u: &ComplexMatrix) -> Result<DensityMatrix> {
    let dev = u
        .matmul(&u.adjoint())
        .max_abs_diff(&ComplexMatrix::identity(u.dim()));
    if !(dev <= UNITARY_TOL) {
        return Err(Error::NotUnitary { deviation: dev });
    }
    Ok(DensityMatrix::from_matrix_unchecked(
        rho.matrix().conjugate_by(u),
    ))
}
