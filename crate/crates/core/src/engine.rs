//! Euler–Maruyama trajectory engine.
//!
//! One step couples the "true" system, integrated with its own Wiener
//! noise, to a filter that only sees the measurement record synthesised
//! from that same noise. The record is optionally reduced to one bit per
//! channel before the filter consumes it.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::feedback::{control_unitary_for, FeedbackPolicy};
use crate::linalg::ComplexMatrix;
use crate::model::{DensityMatrix, SystemModel, INSTABILITY_PURITY_MARGIN};
use crate::stream::{gaussian_increment, TrajectoryRng};

/// Most measurement channels a model may carry.
pub const MAX_CHANNELS: usize = 4;

/// A step whose state has an eigenvalue below `-INSTABILITY_NEGATIVITY` is unstable.
pub const INSTABILITY_NEGATIVITY: f64 = 0.25;

/// Thresholds beyond which an integrated state counts as diverged.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityLimits {
    /// Unstable when `Tr ρ² > 1 + purity_margin`.
    pub purity_margin: f64,
    /// Unstable when an eigenvalue drops below `-negativity`.
    pub negativity: f64,
}

impl Default for StabilityLimits {
    fn default() -> Self {
        Self {
            purity_margin: INSTABILITY_PURITY_MARGIN,
            negativity: INSTABILITY_NEGATIVITY,
        }
    }
}

impl StabilityLimits {
    /// Never flags a finite state; for diagnostics only.
    pub fn disabled() -> Self {
        Self {
            purity_margin: f64::INFINITY,
            negativity: f64::INFINITY,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RecordMode {
    /// The filter consumes the analog increments `Δy`.
    Full,
    /// The filter consumes `√Δt · sgn(Δy)`.
    OneBit,
}

impl RecordMode {
    pub fn name(&self) -> &'static str {
        match self {
            RecordMode::Full => "full",
            RecordMode::OneBit => "one-bit",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepConfig {
    pub dt: f64,
    pub record_mode: RecordMode,
    pub limits: StabilityLimits,
}

impl StepConfig {
    pub fn new(dt: f64, record_mode: RecordMode) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::Config(format!("time step must be positive, got {dt}")));
        }
        Ok(Self {
            dt,
            record_mode,
            limits: StabilityLimits::default(),
        })
    }

    /// `dt = 2π / steps_per_cycle` for ω₀ = 1.
    pub fn from_steps_per_cycle(steps_per_cycle: u64, record_mode: RecordMode) -> Result<Self> {
        if steps_per_cycle == 0 {
            return Err(Error::Config("steps_per_cycle must be >= 1".into()));
        }
        Self::new(std::f64::consts::TAU / steps_per_cycle as f64, record_mode)
    }
}

/// Per-channel values for one step, stored inline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelValues<T: Copy> {
    len: usize,
    values: [T; MAX_CHANNELS],
}

impl<T: Copy + Default> ChannelValues<T> {
    pub fn from_fn(len: usize, f: impl FnMut(usize) -> T) -> Self {
        assert!(len <= MAX_CHANNELS, "at most {MAX_CHANNELS} channels supported");
        let mut f = f;
        let mut values = [T::default(); MAX_CHANNELS];
        for (j, v) in values.iter_mut().enumerate().take(len) {
            *v = f(j);
        }
        Self { len, values }
    }

    pub fn from_slice(s: &[T]) -> Self {
        Self::from_fn(s.len(), |j| s[j])
    }
}

impl<T: Copy> std::ops::Deref for ChannelValues<T> {
    type Target = [T];
    fn deref(&self) -> &[T] {
        &self.values[..self.len]
    }
}

/// One step of the measurement record, per channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecordSample {
    /// `Δy_j`
    pub analog: ChannelValues<f64>,
    /// `sgn(Δy_j)` with `sgn(0) = +1`
    pub bit: ChannelValues<i8>,
    /// `√Δt · sgn(Δy_j)`
    pub quantized: ChannelValues<f64>,
}

impl RecordSample {
    /// The increments a filter in `mode` consumes.
    pub fn effective(&self, mode: RecordMode) -> ChannelValues<f64> {
        match mode {
            RecordMode::Full => self.analog,
            RecordMode::OneBit => self.quantized,
        }
    }
}

#[inline]
pub fn quantized_from_bit(bit: i8, dt: f64) -> f64 {
    if bit >= 0 {
        dt.sqrt()
    } else {
        -dt.sqrt()
    }
}

/// One-bit quantiser: `(sgn(Δy), √Δt · sgn(Δy))`, with `sgn(0) = +1`.
#[inline]
pub fn quantize_one_bit(analog: f64, dt: f64) -> (i8, f64) {
    let bit = if analog >= 0.0 { 1 } else { -1 };
    (bit, quantized_from_bit(bit, dt))
}

/// `ΔW = ΔY − √(8k) ⟨ŷ⟩_c Δt`
#[inline]
pub fn innovation(effective_increment: f64, expected_mean: f64, k: f64, dt: f64) -> f64 {
    effective_increment - (8.0 * k).sqrt() * expected_mean * dt
}

/// Record increments `Δy_j = √(8k_j)⟨ŷ_j⟩ Δt + ΔW_j` for the given state and
/// the same Wiener increments that drive its evolution.
pub fn generate_record(rho_true: &DensityMatrix, model: &SystemModel, dw: &[f64], dt: f64) -> RecordSample {
    let channels = model.channels();
    assert_eq!(dw.len(), channels.len(), "one Wiener increment per channel");
    let analog = ChannelValues::from_fn(channels.len(), |j| {
        let ch = &channels[j];
        (8.0 * ch.strength_k).sqrt() * rho_true.expectation(&ch.y_op) * dt + dw[j]
    });
    let mut bit = ChannelValues::from_fn(channels.len(), |_| 0i8);
    let mut quantized = ChannelValues::from_fn(channels.len(), |_| 0.0);
    for j in 0..channels.len() {
        let (b, q) = quantize_one_bit(analog[j], dt);
        bit.values[j] = b;
        quantized.values[j] = q;
    }
    RecordSample {
        analog,
        bit,
        quantized,
    }
}

type Block<const N: usize> = [[Complex64; N]; N];

#[inline]
fn load<const N: usize>(m: &ComplexMatrix) -> Block<N> {
    let raw = m.raw();
    std::array::from_fn(|i| std::array::from_fn(|j| raw[i][j]))
}

#[inline]
fn store<const N: usize>(b: &Block<N>, m: &mut ComplexMatrix) {
    let raw = m.raw_mut();
    for i in 0..N {
        raw[i][..N].copy_from_slice(&b[i]);
    }
}

#[inline]
fn mul<const N: usize>(a: &Block<N>, b: &Block<N>) -> Block<N> {
    let mut out = [[Complex64::new(0.0, 0.0); N]; N];
    for i in 0..N {
        for k in 0..N {
            let x = a[i][k];
            for j in 0..N {
                out[i][j] += x * b[k][j];
            }
        }
    }
    out
}

/// Real diagonal of `m` if it is diagonal with real entries.
fn real_diagonal<const N: usize>(m: &ComplexMatrix) -> Option<[f64; N]> {
    let a = m.raw();
    let mut d = [0.0; N];
    for i in 0..N {
        for j in 0..N {
            if i != j && (a[i][j].re != 0.0 || a[i][j].im != 0.0) {
                return None;
            }
        }
        if a[i][i].im != 0.0 {
            return None;
        }
        d[i] = a[i][i].re;
    }
    Some(d)
}

/// Raw Euler increment of the stochastic master equation, with
/// expectations taken on the input state (Itô):
///
/// `−i[H,ρ]dt − Σ k[ŷ,[ŷ,ρ]]dt + Σ √(2k)(ŷρ + ρŷ − 2⟨ŷ⟩ρ) dW`
fn sme_euler_n<const N: usize>(r: &Block<N>, model: &SystemModel, dw: &[f64], dt: f64) -> Block<N> {
    let mut out = *r;
    let hr = mul(&load::<N>(model.hamiltonian()), r);
    // [H, ρ] = Hρ − (Hρ)† for Hermitian H, ρ
    for i in 0..N {
        for j in 0..N {
            let c = hr[i][j] - hr[j][i].conj();
            out[i][j] += Complex64::new(c.im * dt, -c.re * dt);
        }
    }
    for (ch, &dwj) in model.channels().iter().zip(dw) {
        let k = ch.strength_k;
        if k == 0.0 {
            continue;
        }
        let damp = -k * dt;
        let gain = (2.0 * k).sqrt() * dwj;
        if let Some(d) = real_diagonal::<N>(&ch.y_op) {
            // entrywise: [ŷ,[ŷ,ρ]]_ij = (d_i − d_j)² ρ_ij, (ŷρ + ρŷ)_ij = (d_i + d_j) ρ_ij
            let mut mean = 0.0;
            for i in 0..N {
                mean += d[i] * r[i][i].re;
            }
            for i in 0..N {
                for j in 0..N {
                    let s = d[i] - d[j];
                    out[i][j] += r[i][j] * (damp * s * s + gain * (d[i] + d[j] - 2.0 * mean));
                }
            }
            continue;
        }
        let y = load::<N>(&ch.y_op);
        let yr = mul(&y, r);
        let yyr = mul(&y, &yr);
        let yry = mul(&yr, &y);
        let mut mean = 0.0;
        for i in 0..N {
            mean += yr[i][i].re;
        }
        for i in 0..N {
            for j in 0..N {
                // [ŷ,[ŷ,ρ]] = ŷ²ρ − 2ŷρŷ + ρŷ²
                let double = yyr[i][j] + yyr[j][i].conj() - yry[i][j] * 2.0;
                let kick = yr[i][j] + yr[j][i].conj() - r[i][j] * (2.0 * mean);
                out[i][j] += double * damp + kick * gain;
            }
        }
    }
    out
}

#[cfg(test)]
fn sme_euler(rho: &ComplexMatrix, model: &SystemModel, dw: &[f64], dt: f64) -> ComplexMatrix {
    fn go<const N: usize>(rho: &ComplexMatrix, model: &SystemModel, dw: &[f64], dt: f64) -> ComplexMatrix {
        let mut out = *rho;
        store(&sme_euler_n::<N>(&load(rho), model, dw, dt), &mut out);
        out
    }
    match rho.dim() {
        1 => go::<1>(rho, model, dw, dt),
        2 => go::<2>(rho, model, dw, dt),
        3 => go::<3>(rho, model, dw, dt),
        _ => go::<4>(rho, model, dw, dt),
    }
}

fn trace_error(tr: f64) -> Error {
    Error::Unstable {
        step: 0,
        reason: format!("trace {tr} outside [0.5, 1.5] before renormalisation"),
    }
}

/// `ρ ← (ρ + ρ†)/2`, then `ρ ← ρ / Tr ρ`. Traces outside `[0.5, 1.5]`
/// signal a diverged integration.
pub fn renormalize(rho: &ComplexMatrix) -> Result<DensityMatrix> {
    let h = rho.hermitian_part();
    let tr = h.trace().re;
    if !(0.5..=1.5).contains(&tr) {
        return Err(trace_error(tr));
    }
    Ok(DensityMatrix::from_matrix_unchecked(h.scale(1.0 / tr)))
}

fn stability_error(purity: Option<f64>, limits: &StabilityLimits) -> Error {
    let reason = match purity {
        Some(p) if p.is_finite() => format!("purity {p:.6} exceeds 1 + {}", limits.purity_margin),
        Some(_) => "non-finite matrix entry".into(),
        None => format!("eigenvalue below -{}", limits.negativity),
    };
    Error::Unstable { step: 0, reason }
}

/// Whether `M + shift·I` has a Cholesky factorisation with positive pivots.
fn eigenvalues_exceed<const N: usize>(m: &Block<N>, shift: f64) -> bool {
    let mut a = *m;
    for j in 0..N {
        let mut d = a[j][j].re + shift;
        for k in 0..j {
            d -= a[j][k].norm_sqr();
        }
        if !(d > 0.0) {
            return false;
        }
        let ljj = d.sqrt();
        a[j][j] = Complex64::new(ljj, 0.0);
        for i in (j + 1)..N {
            let mut s = a[i][j];
            for k in 0..j {
                s -= a[i][k] * a[j][k].conj();
            }
            a[i][j] = s / ljj;
        }
    }
    true
}

/// Euler step, Hermitisation, trace normalisation and the stability checks,
/// all on an `N × N` block. `rho` is only written on success.
fn step_in_place<const N: usize>(
    rho: &mut ComplexMatrix,
    model: &SystemModel,
    dw: &[f64],
    dt: f64,
    limits: &StabilityLimits,
) -> Result<()> {
    let mut o = sme_euler_n::<N>(&load(rho), model, dw, dt);
    let mut tr = 0.0;
    for i in 0..N {
        o[i][i].im = 0.0;
        tr += o[i][i].re;
        for j in (i + 1)..N {
            let z = (o[i][j] + o[j][i].conj()) * 0.5;
            o[i][j] = z;
            o[j][i] = z.conj();
        }
    }
    if !(0.5..=1.5).contains(&tr) {
        return Err(trace_error(tr));
    }
    let inv = 1.0 / tr;
    let mut purity = 0.0;
    for row in o.iter_mut() {
        for z in row.iter_mut() {
            *z *= inv;
            purity += z.norm_sqr();
        }
    }
    if !purity.is_finite() || purity > 1.0 + limits.purity_margin {
        return Err(stability_error(Some(purity), limits));
    }
    if limits.negativity.is_finite() && !eigenvalues_exceed(&o, limits.negativity) {
        return Err(stability_error(None, limits));
    }
    store(&o, rho);
    Ok(())
}

/// One Euler–Maruyama step of the stochastic master equation followed by
/// renormalisation. The same routine integrates the true state (driven by
/// the Wiener increments) and the filter (driven by the innovations).
pub fn sme_step(rho: &DensityMatrix, model: &SystemModel, dw: &[f64], dt: f64) -> Result<DensityMatrix> {
    sme_step_with(rho, model, dw, dt, &StabilityLimits::default())
}

pub fn sme_step_with(
    rho: &DensityMatrix,
    model: &SystemModel,
    dw: &[f64],
    dt: f64,
    limits: &StabilityLimits,
) -> Result<DensityMatrix> {
    assert_eq!(dw.len(), model.n_channels(), "one increment per channel");
    let mut m = *rho.matrix();
    match m.dim() {
        1 => step_in_place::<1>(&mut m, model, dw, dt, limits)?,
        2 => step_in_place::<2>(&mut m, model, dw, dt, limits)?,
        3 => step_in_place::<3>(&mut m, model, dw, dt, limits)?,
        _ => step_in_place::<4>(&mut m, model, dw, dt, limits)?,
    }
    Ok(DensityMatrix::from_matrix_unchecked(m))
}

/// Filter estimate plus the control it issues. This is the only part of a
/// trajectory that sees the record, so it can be replayed offline from a
/// stored record and reproduce the in-line run exactly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Filter {
    rho: DensityMatrix,
}

impl Filter {
    pub fn new(initial: DensityMatrix) -> Self {
        Self { rho: initial }
    }

    pub fn state(&self) -> &DensityMatrix {
        &self.rho
    }

    /// Consumes one step of record increments (analog or quantised), updates
    /// the estimate, applies feedback to it and returns the control unitary
    /// (`None` when no feedback is configured).
    pub fn update(
        &mut self,
        model: &SystemModel,
        increments: &[f64],
        dt: f64,
        policy: &FeedbackPolicy,
    ) -> Result<Option<ComplexMatrix>> {
        self.update_with(model, increments, dt, policy, &StabilityLimits::default())
    }

    pub fn update_with(
        &mut self,
        model: &SystemModel,
        increments: &[f64],
        dt: f64,
        policy: &FeedbackPolicy,
        limits: &StabilityLimits,
    ) -> Result<Option<ComplexMatrix>> {
        let channels = model.channels();
        let innov = ChannelValues::from_fn(channels.len(), |j| {
            let ch = &channels[j];
            innovation(increments[j], self.rho.expectation(&ch.y_op), ch.strength_k, dt)
        });
        self.rho = sme_step_with(&self.rho, model, &innov, dt, limits)?;
        if policy.is_none() {
            return Ok(None);
        }
        let u = control_unitary_for(self.rho.matrix(), policy)?;
        self.rho = DensityMatrix::from_matrix_unchecked(self.rho.matrix().conjugate_by(&u));
        Ok(Some(u))
    }
}

#[derive(Debug, Clone)]
pub struct TrajectoryState {
    pub rho_true: DensityMatrix,
    pub filter: Filter,
    pub t: f64,
    pub step_index: u64,
    pub rng: TrajectoryRng,
    /// Set once the trajectory diverges; it is then frozen.
    pub instability: Option<String>,
}

impl TrajectoryState {
    pub fn new(rho_true: DensityMatrix, rho_filter: DensityMatrix, rng: TrajectoryRng) -> Self {
        Self {
            rho_true,
            filter: Filter::new(rho_filter),
            t: 0.0,
            step_index: 0,
            rng,
            instability: None,
        }
    }

    pub fn rho_filter(&self) -> &DensityMatrix {
        self.filter.state()
    }

    pub fn is_unstable(&self) -> bool {
        self.instability.is_some()
    }
}

/// Advances a trajectory by one step: draw Wiener increments, step the true
/// state, synthesise the record from the pre-step state, update the filter
/// from the innovation, then apply the filter's control to both states.
///
/// Returns the record sample. On divergence the state is flagged, left as
/// it was before the step, and an [`Error::Unstable`] is returned; further
/// calls return the same error without evolving.
pub fn advance_trajectory(
    state: &mut TrajectoryState,
    model: &SystemModel,
    cfg: &StepConfig,
    policy: &FeedbackPolicy,
) -> Result<RecordSample> {
    if let Some(reason) = &state.instability {
        return Err(Error::Unstable {
            step: state.step_index,
            reason: reason.clone(),
        });
    }
    let dt = cfg.dt;
    let n = model.n_channels();
    let dw = ChannelValues::from_fn(n, |_| gaussian_increment(&mut state.rng, dt));

    let outcome = (|| {
        let record = generate_record(&state.rho_true, model, &dw, dt);
        let rho_true = sme_step_with(&state.rho_true, model, &dw, dt, &cfg.limits)?;
        let mut filter = state.filter;
        let control = filter.update_with(model, &record.effective(cfg.record_mode), dt, policy, &cfg.limits)?;
        let rho_true = match control {
            Some(u) => DensityMatrix::from_matrix_unchecked(rho_true.matrix().conjugate_by(&u)),
            None => rho_true,
        };
        Ok((record, rho_true, filter))
    })();

    match outcome {
        Ok((record, rho_true, filter)) => {
            state.rho_true = rho_true;
            state.filter = filter;
            state.step_index += 1;
            state.t = state.step_index as f64 * dt;
            Ok(record)
        }
        Err(Error::Unstable { reason, .. }) => {
            state.instability = Some(reason.clone());
            Err(Error::Unstable {
                step: state.step_index,
                reason,
            })
        }
        Err(e) => Err(e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::sigma_z;
    use crate::model::{build_single_qubit, maximally_mixed, MeasurementChannel};
    use crate::stream::derive_stream;

    fn diag(a: f64, b: f64) -> DensityMatrix {
        DensityMatrix::new(ComplexMatrix::from_diag(&[a, b])).unwrap()
    }

    #[test]
    fn quantizer_examples() {
        assert_eq!(quantize_one_bit(-0.03, 0.01), (-1, -0.1));
        assert_eq!(quantize_one_bit(0.0, 0.04), (1, 0.2));
        assert_eq!(quantize_one_bit(2.5, 1.0), (1, 1.0));
        assert_eq!(quantize_one_bit(-0.0, 0.04), (1, 0.2));
    }

    #[test]
    fn innovation_examples() {
        let dt = std::f64::consts::TAU / 1e4;
        assert_eq!(innovation(dt.sqrt(), 0.0, 0.005, dt), dt.sqrt());
        let expected = dt.sqrt() - 0.04f64.sqrt() * 0.5 * dt;
        assert!((innovation(dt.sqrt(), 0.5, 0.005, dt) - expected).abs() < 1e-16);
    }

    #[test]
    fn record_examples() {
        let model = build_single_qubit(1.0, 1.0 / 8.0).unwrap();
        let dt = 0.01;
        let rec = generate_record(&maximally_mixed(2), &model, &[0.037], dt);
        assert_eq!(rec.analog[0], 0.037);
        let up = diag(1.0, 0.0);
        let rec = generate_record(&up, &model, &[-0.2], dt);
        assert!((rec.analog[0] - (dt - 0.2)).abs() < 1e-16);
        assert_eq!(rec.bit[0], -1);
        assert_eq!(rec.quantized[0], -0.1);
    }

    #[test]
    fn unitary_only_step() {
        let model = build_single_qubit(1.0, 0.0).unwrap();
        let rho = DensityMatrix::from_bloch([0.3, 0.1, 0.5]);
        let dt = 1e-3;
        let out = sme_step(&rho, &model, &[0.4], dt).unwrap();
        let h = model.hamiltonian();
        let comm = h.matmul(rho.matrix()) - rho.matrix().matmul(h);
        let expect = *rho.matrix() + comm.scale_complex(Complex64::new(0.0, -dt));
        assert!(out.matrix().max_abs_diff(&expect) < 1e-15);
    }

    #[test]
    fn eigenstate_is_fixed_point() {
        let model = SystemModel::new(
            ComplexMatrix::zeros(2),
            vec![MeasurementChannel::new(sigma_z(), 0.3).unwrap()],
        )
        .unwrap();
        let rho = diag(1.0, 0.0);
        let out = sme_step(&rho, &model, &[0.7], 0.01).unwrap();
        assert_eq!(out, rho);
    }

    #[test]
    fn mixed_state_kick() {
        let k = 0.02;
        let model = SystemModel::new(
            ComplexMatrix::zeros(2),
            vec![MeasurementChannel::new(sigma_z(), k).unwrap()],
        )
        .unwrap();
        let dw = 0.05;
        let raw = sme_euler(maximally_mixed(2).matrix(), &model, &[dw], 0.01);
        let expect = *maximally_mixed(2).matrix() + sigma_z().scale((2.0 * k).sqrt() * dw);
        assert!(raw.max_abs_diff(&expect) < 1e-16);
    }

    #[test]
    fn renormalize_examples() {
        let rho = DensityMatrix::from_bloch([0.2, -0.3, 0.4]);
        let same = renormalize(rho.matrix()).unwrap();
        assert!(same.matrix().max_abs_diff(rho.matrix()) < 1e-12);
        let scaled = renormalize(&rho.matrix().scale(1.01)).unwrap();
        assert!(scaled.matrix().max_abs_diff(rho.matrix()) < 1e-12);
        let mut skew = *rho.matrix();
        skew.set(0, 1, skew.get(0, 1) + Complex64::new(1e-10, 0.0));
        let fixed = renormalize(&skew).unwrap();
        assert!(fixed.matrix().hermiticity_error() == 0.0);
        assert!((fixed.matrix().trace().re - 1.0).abs() < 1e-12);
        assert!(matches!(
            renormalize(&rho.matrix().scale(2.0)),
            Err(Error::Unstable { .. })
        ));
    }

    #[test]
    fn instability_detected() {
        // a huge kick on a near-pure state drives it far outside the state space
        let model = build_single_qubit(1.0, 0.5).unwrap();
        let rho = DensityMatrix::from_bloch([0.9, 0.0, 0.0]);
        assert!(matches!(
            sme_step(&rho, &model, &[0.8], 0.01),
            Err(Error::Unstable { .. })
        ));
    }

    #[test]
    fn unitary_evolution_keeps_fidelity() {
        // k = 0: truth and filter rotate rigidly, so their overlap is constant
        // up to the O(dt) drift of the Euler rotation
        let model = build_single_qubit(1.0, 0.0).unwrap();
        let cfg = StepConfig::from_steps_per_cycle(10_000, RecordMode::Full).unwrap();
        let truth = DensityMatrix::from_bloch([0.0, 0.6, 0.8]);
        let est = DensityMatrix::from_bloch([0.1, 0.2, -0.3]);
        let overlap = |s: &TrajectoryState| s.rho_true.matrix().trace_product_re(s.rho_filter().matrix());
        let mut st = TrajectoryState::new(truth, est, derive_stream(1, 0));
        let start = overlap(&st);
        for _ in 0..10_000 {
            advance_trajectory(&mut st, &model, &cfg, &FeedbackPolicy::None).unwrap();
        }
        assert!((overlap(&st) - start).abs() < 5e-3);
        // one full cycle returns the state to itself
        assert!(st.rho_true.matrix().max_abs_diff(truth.matrix()) < 5e-3);
        assert!((st.t - std::f64::consts::TAU).abs() < 1e-12);
    }

    #[test]
    fn full_record_tracks_matched_start() {
        let model = build_single_qubit(1.0, 0.005).unwrap();
        let cfg = StepConfig::from_steps_per_cycle(10_000, RecordMode::Full).unwrap();
        let truth = DensityMatrix::from_bloch([0.6, 0.0, 0.8]);
        let mut st = TrajectoryState::new(truth, truth, derive_stream(8, 2));
        for _ in 0..20_000 {
            advance_trajectory(&mut st, &model, &cfg, &FeedbackPolicy::None).unwrap();
            assert!(st.rho_true.matrix().max_abs_diff(st.rho_filter().matrix()) < 1e-9);
        }
    }

    #[test]
    fn deterministic_bits() {
        let model = build_single_qubit(1.0, 0.005).unwrap();
        let cfg = StepConfig::from_steps_per_cycle(1000, RecordMode::OneBit).unwrap();
        let run = || {
            let mut st = TrajectoryState::new(
                DensityMatrix::from_bloch([0.0, 1.0, 0.0]),
                maximally_mixed(2),
                derive_stream(5, 5),
            );
            (0..2000)
                .map(|_| advance_trajectory(&mut st, &model, &cfg, &FeedbackPolicy::None).unwrap().bit[0])
                .collect::<Vec<_>>()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn frozen_after_instability() {
        let model = build_single_qubit(1.0, 0.005).unwrap();
        let cfg = StepConfig::new(0.01, RecordMode::Full).unwrap();
        let mut st = TrajectoryState::new(maximally_mixed(2), maximally_mixed(2), derive_stream(0, 0));
        st.instability = Some("test".into());
        let before = st.rho_true;
        assert!(advance_trajectory(&mut st, &model, &cfg, &FeedbackPolicy::None).is_err());
        assert_eq!(st.rho_true, before);
        assert_eq!(st.step_index, 0);
    }

    #[test]
    fn feedback_applied_to_both_states() {
        let model = build_single_qubit(1.0, 0.005).unwrap();
        let cfg = StepConfig::from_steps_per_cycle(10_000, RecordMode::Full).unwrap();
        let policy = FeedbackPolicy::rotate_to_axis(0.0).unwrap();
        let truth = DensityMatrix::from_bloch([0.0, 0.0, 1.0]);
        let est = DensityMatrix::from_bloch([0.5, 0.0, 0.0]);
        let mut st = TrajectoryState::new(truth, est, derive_stream(2, 0));
        advance_trajectory(&mut st, &model, &cfg, &policy).unwrap();
        let r = crate::feedback::bloch_vector(st.rho_filter());
        assert!(r[0].abs() < 1e-12 && r[1].abs() < 1e-12);
        // the truth was rotated by roughly a quarter turn about -Y as well
        let t = crate::feedback::bloch_vector(&st.rho_true);
        assert!(t[0] < -0.99, "truth Bloch {t:?}");
    }
}
