//! Non-Markovianity of the probe dynamics from the trace distance between
//! two evolving probe states.

use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::dephasing::{reduced_state, DecoherenceTrace, QubitState, TimeGrid};
use crate::error::{Error, Result};
use crate::operators::ProbeConfig;

const DENSITY_TOLERANCE: f64 = 1e-9;

/// `D(t_i)` and its forward difference `σ(t_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DistinguishabilityTrace {
    pub grid: TimeGrid,
    pub distance: Vec<f64>,
    pub sigma: Vec<f64>,
}

impl DistinguishabilityTrace {
    pub fn from_distances(grid: TimeGrid, distance: Vec<f64>) -> Result<Self> {
        if distance.len() != grid.len() {
            return Err(Error::DimensionMismatch {
                expected: grid.len(),
                found: distance.len(),
            });
        }
        if let Some(&d) = distance
            .iter()
            .find(|&&d| !(-1e-12..=1.0 + 1e-12).contains(&d))
        {
            return Err(Error::InvalidParameter {
                name: "distance",
                reason: if d < 0.0 { "negative" } else { "exceeds 1" },
            });
        }
        let dt = grid.dt();
        let sigma = distance.windows(2).map(|w| (w[1] - w[0]) / dt).collect();
        Ok(Self {
            grid,
            distance,
            sigma,
        })
    }

    /// Distance between the probe states started at `|+x⟩` and `|−x⟩` and
    /// dephased by `trace`.
    pub fn from_decoherence(omega: f64, trace: &DecoherenceTrace) -> Result<Self> {
        let first = ProbeConfig::new(omega, 0.0, PI / 2.0, 0.0)?;
        let second = ProbeConfig::new(omega, 0.0, PI / 2.0, PI)?;
        let distance = trace
            .grid
            .times()
            .iter()
            .zip(&trace.values)
            .map(|(&t, &r)| {
                trace_distance(
                    &reduced_state(&first, r, t)?,
                    &reduced_state(&second, r, t)?,
                )
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_distances(trace.grid.clone(), distance)
    }
}

fn check_density(rho: &QubitState) -> Result<()> {
    let m = &rho.rho;
    if (m[0][1] - m[1][0].conj()).norm() > DENSITY_TOLERANCE
        || m[0][0].im.abs() > DENSITY_TOLERANCE
        || m[1][1].im.abs() > DENSITY_TOLERANCE
    {
        return Err(Error::NotDensityMatrix("not Hermitian"));
    }
    if (rho.trace().re - 1.0).abs() > DENSITY_TOLERANCE {
        return Err(Error::NotDensityMatrix("trace differs from 1"));
    }
    if rho.eigenvalues().0 < -DENSITY_TOLERANCE {
        return Err(Error::NotDensityMatrix("not positive semidefinite"));
    }
    Ok(())
}

/// `½ ‖ρ₁ − ρ₂‖₁`, half the Bloch-vector distance for qubits.
pub fn trace_distance(rho1: &QubitState, rho2: &QubitState) -> Result<f64> {
    check_density(rho1)?;
    check_density(rho2)?;
    let (a, b) = (rho1.bloch(), rho2.bloch());
    let d2: f64 = (0..3).map(|i| (a[i] - b[i]) * (a[i] - b[i])).sum();
    Ok(0.5 * libm::sqrt(d2))
}

/// Sum of all increases of `D` on the grid.
pub fn blp_measure(dt: &DistinguishabilityTrace) -> f64 {
    dt.distance.windows(2).map(|w| (w[1] - w[0]).max(0.0)).sum()
}

/// Largest `D(t_f) − D(t)` with `t ≤ t_f`.
pub fn largest_revival_measure(dt: &DistinguishabilityTrace) -> f64 {
    let mut low = f64::INFINITY;
    let mut best = 0.0f64;
    for &d in &dt.distance {
        low = low.min(d);
        best = best.max(d - low);
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use num_complex::Complex64;

    fn dtrace(d: &[f64]) -> DistinguishabilityTrace {
        let grid = TimeGrid::new(1.0, 1, d.len() - 1).unwrap();
        DistinguishabilityTrace::from_distances(grid, d.to_vec()).unwrap()
    }

    #[test]
    fn distances() {
        let up = QubitState::pure(0.0, 0.0);
        let down = QubitState::pure(PI, 0.0);
        let mixed = QubitState::from_bloch([0.0; 3]);
        assert!((trace_distance(&up, &down).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(trace_distance(&up, &up).unwrap(), 0.0);
        assert!((trace_distance(&up, &mixed).unwrap() - 0.5).abs() < 1e-15);
        let bad = QubitState::from_bloch([0.0, 0.0, 2.0]);
        assert!(matches!(
            trace_distance(&up, &bad),
            Err(Error::NotDensityMatrix(_))
        ));
    }

    #[test]
    fn measures_on_hand_examples() {
        let t = dtrace(&[1.0, 0.4, 0.7, 0.7]);
        assert!((blp_measure(&t) - 0.3).abs() < 1e-15);
        assert!((largest_revival_measure(&t) - 0.3).abs() < 1e-15);
        let t = dtrace(&[1.0, 0.5, 0.6, 0.3, 0.5]);
        assert!((blp_measure(&t) - 0.3).abs() < 1e-15);
        assert!((largest_revival_measure(&t) - 0.2).abs() < 1e-15);
        let t = dtrace(&[1.0, 0.8, 0.5, 0.1]);
        assert_eq!(blp_measure(&t), 0.0);
        assert_eq!(largest_revival_measure(&t), 0.0);
    }

    #[test]
    fn sigma_is_forward_difference() {
        let t = dtrace(&[1.0, 0.5, 0.75]);
        let dt = t.grid.dt();
        assert_eq!(t.sigma, vec![-0.5 / dt, 0.25 / dt]);
    }

    #[test]
    fn dephasing_pair_distance_is_modulus() {
        let grid = TimeGrid::new(1.3, 2, 30).unwrap();
        let values = grid
            .times()
            .iter()
            .map(|&t| Complex64::from_polar(libm::exp(-0.2 * t) * libm::cos(t).abs(), 0.7 * t))
            .collect::<Vec<_>>();
        let trace = DecoherenceTrace {
            grid,
            values,
            kind: crate::dephasing::TraceKind::Effective,
        };
        let d = DistinguishabilityTrace::from_decoherence(1.3, &trace).unwrap();
        for (x, r) in d.distance.iter().zip(&trace.values) {
            assert!((x - r.norm()).abs() < 1e-10);
        }
    }
}
