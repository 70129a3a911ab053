//! Geometric phase accumulated by the dephasing probe.
//!
//! The probe starts pure, so only the dominant eigenbranch `λ₊, |Ψ₊⟩` of
//! the reduced state contributes. With `(Θ, ϕ)` the polar and azimuthal
//! angles of the Bloch vector of `ρ(t)`, `|Ψ₊⟩` is written in the gauge
//! `(e^{−iϕ} cos(Θ/2), sin(Θ/2))`, for which
//!
//! `Φ = arg⟨Ψ₊(0)|Ψ₊(τ)⟩ + ∫ cos²(Θ/2) dϕ`.
//!
//! For the unitary loop this is `Nπ(1 + cos θ)` with no `2π` ambiguity.
//! The integral is taken on quadratic panels in time, so it converges at
//! fourth order in the step and is exact for constant `Θ`.

use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;

use crate::dephasing::{reduced_state, DecoherenceTrace, QubitState, TimeGrid};
use crate::error::{Error, Result};
use crate::operators::ProbeConfig;

/// Minimum overlap between consecutive eigenvectors.
pub const MIN_STEP_OVERLAP: f64 = 1e-6;

/// Bloch radius below which a sample counts as maximally mixed.
const DEGENERATE_RADIUS: f64 = 1e-12;

/// Dominant eigenbranch of the probe along a time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeTrajectory {
    pub grid: TimeGrid,
    pub states: Vec<QubitState>,
    pub lambda_plus: Vec<f64>,
    pub psi_plus: Vec<[Complex64; 2]>,
    /// Samples where `ρ = I/2`; the eigenvector there is carried over from
    /// the previous sample.
    pub degenerate: Vec<bool>,
}

impl ProbeTrajectory {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Trajectory covering periods `first..last` of the grid.
    pub fn window(&self, first: usize, last: usize) -> Result<ProbeTrajectory> {
        if first >= last || last > self.grid.periods {
            return Err(Error::InvalidParameter {
                name: "window",
                reason: "empty or out of range",
            });
        }
        let spp = self.grid.steps_per_period;
        let range = first * spp..=last * spp;
        let grid = TimeGrid::new(self.grid.omega, last - first, spp)?;
        Ok(ProbeTrajectory {
            grid,
            states: self.states[range.clone()].to_vec(),
            lambda_plus: self.lambda_plus[range.clone()].to_vec(),
            psi_plus: self.psi_plus[range.clone()].to_vec(),
            degenerate: self.degenerate[range].to_vec(),
        })
    }
}

/// Accumulated phase and its correction relative to the unitary loop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseResult {
    pub phi: f64,
    pub phi_u: f64,
    pub delta: f64,
    pub periods: usize,
}

fn spinor(polar: f64, azimuth: f64) -> [Complex64; 2] {
    let (s, c) = (libm::sin(polar / 2.0), libm::cos(polar / 2.0));
    let mut v = [Complex64::new(c, 0.0), Complex64::from_polar(s, azimuth)];
    // largest component real positive
    let k = usize::from(s > c);
    let phase = v[k].conj() / v[k].norm();
    v[0] *= phase;
    v[1] *= phase;
    v
}

pub fn probe_trajectory(probe: &ProbeConfig, trace: &DecoherenceTrace) -> Result<ProbeTrajectory> {
    probe.validate()?;
    let n = trace.values.len();
    if n != trace.grid.len() {
        return Err(Error::DimensionMismatch {
            expected: trace.grid.len(),
            found: n,
        });
    }
    if (trace.values[0] - 1.0).norm() > 1e-12 {
        return Err(Error::InvalidParameter {
            name: "trace",
            reason: "initial probe state must be pure",
        });
    }
    let mut states = Vec::with_capacity(n);
    let mut lambda_plus = Vec::with_capacity(n);
    let mut psi_plus = Vec::with_capacity(n);
    let mut degenerate = Vec::with_capacity(n);
    for (&t, &r) in trace.grid.times().iter().zip(&trace.values) {
        let rho = reduced_state(probe, r, t)?;
        let b = rho.bloch();
        let radius = libm::sqrt(b[0] * b[0] + b[1] * b[1] + b[2] * b[2]);
        let (_, hi) = rho.eigenvalues();
        let flat = radius < DEGENERATE_RADIUS;
        let psi = if flat {
            *psi_plus
                .last()
                .unwrap_or(&[Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)])
        } else {
            spinor(
                libm::acos((b[2] / radius).clamp(-1.0, 1.0)),
                libm::atan2(b[1], b[0]),
            )
        };
        states.push(rho);
        lambda_plus.push(hi);
        psi_plus.push(psi);
        degenerate.push(flat);
    }
    Ok(ProbeTrajectory {
        grid: trace.grid.clone(),
        states,
        lambda_plus,
        psi_plus,
        degenerate,
    })
}

/// `Φ_u = Nπ(1 + cos θ)`.
pub fn unitary_phase(theta: f64, periods: usize) -> f64 {
    periods as f64 * PI * (1.0 + libm::cos(theta))
}

/// Bloch angles `(Θ, ϕ)` of a unit spinor; independent of its global phase.
fn bloch_angles(psi: &[Complex64; 2]) -> (f64, f64) {
    let z = psi[0].norm_sqr() - psi[1].norm_sqr();
    let c = psi[0].conj() * psi[1];
    (libm::acos(z.clamp(-1.0, 1.0)), libm::atan2(c.im, c.re))
}

fn wrap(x: f64) -> f64 {
    let y = libm::remainder(x, 2.0 * PI);
    if y <= -PI {
        y + 2.0 * PI
    } else {
        y
    }
}

/// `∫ c dϕ` over `s ∈ [lo, hi]` for quadratics through three equally
/// spaced samples at `s = −1, 0, 1`.
fn panel(c: [f64; 3], p: [f64; 3], lo: f64, hi: f64) -> f64 {
    let (a, b) = ((p[2] - p[0]) / 2.0, (p[0] - 2.0 * p[1] + p[2]) / 2.0);
    let (al, be) = ((c[2] - c[0]) / 2.0, (c[0] - 2.0 * c[1] + c[2]) / 2.0);
    // antiderivative of (c1 + al s + be s²)(a + 2 b s)
    let f = |s: f64| {
        c[1] * (a * s + b * s * s)
            + al * (a * s * s / 2.0 + 2.0 * b * s * s * s / 3.0)
            + be * (a * s * s * s / 3.0 + b * s * s * s * s / 2.0)
    };
    f(hi) - f(lo)
}

/// Phase accumulated from `t_0` to every sample `t_i`; the last entry is
/// [`kinematic_phase`].
pub fn phase_series(traj: &ProbeTrajectory) -> Result<Vec<f64>> {
    let psi = &traj.psi_plus;
    let n = psi.len();
    for i in 0..n.saturating_sub(1) {
        let ov = (psi[i][0].conj() * psi[i + 1][0] + psi[i][1].conj() * psi[i + 1][1]).norm();
        if ov < MIN_STEP_OVERLAP {
            return Err(Error::PhaseTracking {
                index: i,
                overlap: ov,
            });
        }
    }
    let angles: Vec<(f64, f64)> = psi.iter().map(bloch_angles).collect();
    let weight: Vec<f64> = angles
        .iter()
        .map(|&(t, _)| 0.5 * (1.0 + libm::cos(t)))
        .collect();
    let mut azimuth = Vec::with_capacity(n);
    if let Some(&(_, p)) = angles.first() {
        azimuth.push(p);
    }
    for i in 1..n {
        let prev = azimuth[i - 1];
        azimuth.push(prev + wrap(angles[i].1 - prev));
    }
    let window = |i: usize| {
        (
            [weight[i - 1], weight[i], weight[i + 1]],
            [azimuth[i - 1], azimuth[i], azimuth[i + 1]],
        )
    };

    let mut series = Vec::with_capacity(n);
    let mut even = 0.0;
    for j in 0..n {
        let integral = if j == 0 {
            0.0
        } else if n == 2 {
            0.5 * (weight[0] + weight[1]) * (azimuth[1] - azimuth[0])
        } else if j % 2 == 0 {
            let (c, p) = window(j - 1);
            even += panel(c, p, -1.0, 1.0);
            even
        } else if j + 1 < n {
            let (c, p) = window(j);
            even + panel(c, p, -1.0, 0.0)
        } else {
            let (c, p) = window(j - 1);
            even + panel(c, p, 0.0, 1.0)
        };
        let (t0, p0) = angles[0];
        let (t1, p1) = angles[j];
        let total = Complex64::from_polar(libm::cos(t0 / 2.0) * libm::cos(t1 / 2.0), p0 - p1)
            + libm::sin(t0 / 2.0) * libm::sin(t1 / 2.0);
        let total_phase = if total.norm() > 0.0 { total.arg() } else { 0.0 };
        series.push(total_phase + integral);
    }
    Ok(series)
}

/// Accumulated geometric phase of the dominant eigenbranch.
pub fn kinematic_phase(traj: &ProbeTrajectory) -> Result<f64> {
    Ok(phase_series(traj)?.last().copied().unwrap_or(0.0))
}

/// `δΦ = 1 − Φ/Φ_u`.
pub fn phase_correction(phi: f64, phi_u: f64) -> Result<f64> {
    if phi_u == 0.0 {
        return Err(Error::ZeroReferencePhase);
    }
    Ok(1.0 - phi / phi_u)
}

/// Phase of the probe driven by `trace`, compared with the unitary loop.
pub fn geometric_phase(probe: &ProbeConfig, trace: &DecoherenceTrace) -> Result<PhaseResult> {
    let traj = probe_trajectory(probe, trace)?;
    let phi = kinematic_phase(&traj)?;
    let periods = trace.grid.periods;
    let phi_u = unitary_phase(probe.theta, periods);
    Ok(PhaseResult {
        phi,
        phi_u,
        delta: phase_correction(phi, phi_u)?,
        periods,
    })
}

/// Orientation of [`normalize_curve`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Orientation {
    /// `(max − x) / (max − min)`.
    Inverted,
    /// `(x − min) / (max − min)`.
    Direct,
}

pub fn normalize_curve(values: &[f64], orientation: Orientation) -> Result<Vec<f64>> {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    if values.is_empty() || !(max > min) {
        return Err(Error::ConstantSequence);
    }
    let span = max - min;
    Ok(values
        .iter()
        .map(|&x| match orientation {
            Orientation::Inverted => (max - x) / span,
            Orientation::Direct => (x - min) / span,
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dephasing::TraceKind;
    use alloc::vec;

    fn trace(grid: TimeGrid, r: impl Fn(f64) -> Complex64) -> DecoherenceTrace {
        let values = grid
            .times()
            .iter()
            .map(|&t| {
                if t == 0.0 {
                    Complex64::new(1.0, 0.0)
                } else {
                    r(t)
                }
            })
            .collect();
        DecoherenceTrace {
            grid,
            values,
            kind: TraceKind::Effective,
        }
    }

    #[test]
    fn unitary_reference_values() {
        assert!((unitary_phase(PI / 2.0, 1) - PI).abs() < 1e-15);
        assert_eq!(unitary_phase(0.0, 3), 6.0 * PI);
        let v = unitary_phase(3.0 * PI / 7.0, 20);
        assert!((v - 76.813_255_699_537_79).abs() < 1e-12);
    }

    #[test]
    fn unitary_loop() {
        for &theta in &[0.1, 0.7, PI / 2.0, 3.0 * PI / 8.0, 2.9] {
            let probe = ProbeConfig::new(1.0, 0.0, theta, 0.3).unwrap();
            let grid = TimeGrid::new(1.0, 7, 200).unwrap();
            let res = geometric_phase(&probe, &trace(grid, |_| Complex64::new(1.0, 0.0))).unwrap();
            assert!(res.delta.abs() < 1e-10, "theta {theta}: {res:?}");
        }
    }

    #[test]
    fn trajectory_eigenpairs() {
        let probe = ProbeConfig::new(1.0, 0.1, 1.0, 0.0).unwrap();
        let grid = TimeGrid::new(1.0, 2, 50).unwrap();
        let tr = trace(grid, |t| {
            Complex64::from_polar(libm::exp(-0.1 * t), 0.2 * t)
        });
        let traj = probe_trajectory(&probe, &tr).unwrap();
        assert_eq!(traj.lambda_plus[0], 1.0);
        for ((rho, &lam), psi) in traj
            .states
            .iter()
            .zip(&traj.lambda_plus)
            .zip(&traj.psi_plus)
        {
            assert!((0.5..=1.0 + 1e-15).contains(&lam));
            let n = psi[0].norm_sqr() + psi[1].norm_sqr();
            assert!((n - 1.0).abs() < 1e-12);
            for a in 0..2 {
                let v = rho.rho[a][0] * psi[0] + rho.rho[a][1] * psi[1];
                assert!((v - psi[a] * lam).norm() < 1e-10);
            }
            let b = rho.bloch();
            let len2 = b[0] * b[0] + b[1] * b[1] + b[2] * b[2];
            assert!((lam - 0.5 * (1.0 + libm::sqrt(len2))).abs() < 1e-12);
        }
    }

    #[test]
    fn fully_dephased_branch_is_constant() {
        let probe = ProbeConfig::new(1.0, 0.1, 1.0, 0.0).unwrap();
        let grid = TimeGrid::new(1.0, 2, 40).unwrap();
        let traj = probe_trajectory(&probe, &trace(grid, |_| Complex64::new(0.0, 0.0))).unwrap();
        for psi in &traj.psi_plus[1..] {
            assert!((psi[0] - 1.0).norm() < 1e-15 && psi[1].norm() < 1e-15);
        }
    }

    #[test]
    fn degenerate_samples_carry_over() {
        let probe = ProbeConfig::new(1.0, 0.1, PI / 2.0, 0.0).unwrap();
        let grid = TimeGrid::new(1.0, 1, 8).unwrap();
        let traj =
            probe_trajectory(&probe, &trace(grid, |t| Complex64::new(libm::cos(t), 0.0))).unwrap();
        let _ = kinematic_phase(&traj);
        let grid = TimeGrid::new(1.0, 1, 4).unwrap();
        let traj = probe_trajectory(&probe, &trace(grid, |_| Complex64::new(0.0, 0.0))).unwrap();
        assert!(traj.degenerate[1..].iter().all(|&d| d));
        assert_eq!(traj.psi_plus[1], traj.psi_plus[0]);
    }

    #[test]
    fn constant_branch_has_no_phase() {
        let probe = ProbeConfig::new(1.0, 0.1, 1.0, 0.0).unwrap();
        let grid = TimeGrid::new(1.0, 1, 10).unwrap();
        let mut traj =
            probe_trajectory(&probe, &trace(grid, |_| Complex64::new(1.0, 0.0))).unwrap();
        let first = traj.psi_plus[0];
        traj.psi_plus.iter_mut().for_each(|p| *p = first);
        assert_eq!(kinematic_phase(&traj).unwrap(), 0.0);
    }

    #[test]
    fn orthogonal_step_fails_tracking() {
        let probe = ProbeConfig::new(1.0, 0.1, 1.0, 0.0).unwrap();
        let grid = TimeGrid::new(1.0, 1, 4).unwrap();
        let mut traj =
            probe_trajectory(&probe, &trace(grid, |_| Complex64::new(1.0, 0.0))).unwrap();
        traj.psi_plus[2] = [-traj.psi_plus[1][1].conj(), traj.psi_plus[1][0].conj()];
        assert!(matches!(
            kinematic_phase(&traj),
            Err(Error::PhaseTracking { index: 1, .. })
        ));
    }

    #[test]
    fn corrections() {
        assert_eq!(phase_correction(2.0, 2.0).unwrap(), 0.0);
        assert_eq!(phase_correction(0.0, 2.0).unwrap(), 1.0);
        assert!((phase_correction(0.9 * 3.0, 3.0).unwrap() - 0.1).abs() < 1e-15);
        assert!(matches!(
            phase_correction(1.0, 0.0),
            Err(Error::ZeroReferencePhase)
        ));
    }

    #[test]
    fn normalization() {
        assert_eq!(
            normalize_curve(&[2.0, 4.0, 6.0], Orientation::Inverted).unwrap(),
            vec![1.0, 0.5, 0.0]
        );
        assert_eq!(
            normalize_curve(&[2.0, 4.0, 6.0], Orientation::Direct).unwrap(),
            vec![0.0, 0.5, 1.0]
        );
        assert!(matches!(
            normalize_curve(&[1.0, 1.0], Orientation::Direct),
            Err(Error::ConstantSequence)
        ));
        assert!(normalize_curve(&[], Orientation::Direct).is_err());
    }

    #[test]
    fn series_tracks_unitary_loop() {
        let probe = ProbeConfig::new(1.0, 0.0, 0.9, 0.0).unwrap();
        let grid = TimeGrid::new(1.0, 3, 20).unwrap();
        let traj =
            probe_trajectory(&probe, &trace(grid.clone(), |_| Complex64::new(1.0, 0.0))).unwrap();
        let series = phase_series(&traj).unwrap();
        assert_eq!(series[0], 0.0);
        for p in 1..=3 {
            assert!((series[p * 20] - unitary_phase(0.9, p)).abs() < 1e-12);
        }
        // odd samples, including the last one of an odd-length grid
        let short = traj.window(0, 1).unwrap();
        let mut odd = short.clone();
        odd.psi_plus.pop();
        let s = phase_series(&odd).unwrap();
        assert_eq!(s.len(), 20);
        assert_eq!(kinematic_phase(&odd).unwrap(), s[19]);
    }

    #[test]
    fn window_of_unitary_loop() {
        let probe = ProbeConfig::new(1.0, 0.0, 1.2, 0.0).unwrap();
        let grid = TimeGrid::new(1.0, 4, 100).unwrap();
        let traj = probe_trajectory(&probe, &trace(grid, |_| Complex64::new(1.0, 0.0))).unwrap();
        let whole = kinematic_phase(&traj).unwrap();
        let parts: f64 = (0..4)
            .map(|p| kinematic_phase(&traj.window(p, p + 1).unwrap()).unwrap())
            .sum();
        assert!((whole - parts).abs() < 1e-10);
    }
}
