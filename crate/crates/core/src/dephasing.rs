//! Decoherence factor of a probe under pure dephasing.
//!
//! With `H_E` the environment Hamiltonian and `H_SE = g σᶻ_1`, the probe
//! coherence is multiplied by
//! `r(t) = ⟨ε| e^{it(H_E − H_SE)} e^{−it(H_E + H_SE)} |ε⟩`.
//! Both propagators are applied through their eigendecompositions, so a
//! single pair of diagonalizations serves every time on the grid:
//!
//! `r(t) = Σ_{k,l} a_k* e^{iξ_k t} ⟨ξ_k|η_l⟩ e^{−iη_l t} b_l`,
//!
//! with `a = V_ξ† ε`, `b = V_η† ε`. Averaging over the maximally mixed state
//! replaces `a_k* ⟨ξ_k|η_l⟩ b_l` by `|⟨ξ_k|η_l⟩|² / 2^L`.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{real_gemm, CMatrix};
use crate::operators::{Operator, ProbeConfig, SpinRegister};
use crate::spectral::{diagonalize, Eigensystem};

/// Default sampling density of the time grid.
pub const DEFAULT_STEPS_PER_PERIOD: usize = 200;

/// Times processed per kernel call.
const TIME_CHUNK: usize = 32;

/// Uniform grid over `N` probe periods, `t ∈ [0, 2πN/ω]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    pub omega: f64,
    pub periods: usize,
    pub steps_per_period: usize,
    times: Vec<f64>,
}

impl TimeGrid {
    pub fn new(omega: f64, periods: usize, steps_per_period: usize) -> Result<Self> {
        if !(omega > 0.0) || !omega.is_finite() {
            return Err(Error::InvalidParameter {
                name: "omega",
                reason: "must be positive",
            });
        }
        if periods == 0 {
            return Err(Error::InvalidParameter {
                name: "periods",
                reason: "must be at least 1",
            });
        }
        if steps_per_period == 0 {
            return Err(Error::InvalidParameter {
                name: "steps_per_period",
                reason: "must be at least 1",
            });
        }
        let dt = 2.0 * PI / (omega * steps_per_period as f64);
        let times = (0..=periods * steps_per_period)
            .map(|i| i as f64 * dt)
            .collect();
        Ok(Self {
            omega,
            periods,
            steps_per_period,
            times,
        })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn dt(&self) -> f64 {
        2.0 * PI / (self.omega * self.steps_per_period as f64)
    }

    pub fn tau(&self) -> f64 {
        2.0 * PI * self.periods as f64 / self.omega
    }

    /// Grid restricted to the first `periods` periods.
    pub fn truncated(&self, periods: usize) -> Result<Self> {
        if periods > self.periods {
            return Err(Error::InvalidParameter {
                name: "periods",
                reason: "exceeds grid length",
            });
        }
        Self::new(self.omega, periods, self.steps_per_period)
    }
}

/// How a decoherence trace was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceKind {
    /// One environment state; `seed`/`stream` identify it when drawn here.
    Sampled {
        seed: Option<u64>,
        stream: Option<u64>,
    },
    /// Mean over `realizations` random product states.
    Averaged { realizations: usize, seed: u64 },
    /// Maximally mixed environment.
    Effective,
}

/// `r(t)` sampled on a time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DecoherenceTrace {
    pub grid: TimeGrid,
    pub values: Vec<Complex64>,
    pub kind: TraceKind,
}

impl DecoherenceTrace {
    pub fn abs(&self) -> Vec<f64> {
        self.values.iter().map(|z| z.norm()).collect()
    }

    /// Loschmidt echo `M(t) = |r(t)|²`.
    pub fn loschmidt_echo(&self) -> Vec<f64> {
        self.values.iter().map(|z| z.norm_sqr()).collect()
    }

    /// Time average of `|r|` over each period (trapezoid rule), one value
    /// per period.
    pub fn per_period_mean_abs(&self) -> Vec<f64> {
        let abs = self.abs();
        let spp = self.grid.steps_per_period;
        (0..self.grid.periods)
            .map(|p| trapezoid_mean(&abs[p * spp..=(p + 1) * spp]))
            .collect()
    }

    /// Time average of `|r|` over `[0, p T]` for `p = 1..=N`.
    pub fn cumulative_mean_abs(&self) -> Vec<f64> {
        let abs = self.abs();
        let spp = self.grid.steps_per_period;
        (1..=self.grid.periods)
            .map(|p| trapezoid_mean(&abs[..=p * spp]))
            .collect()
    }

    /// Arithmetic mean of traces on a common grid, summed in slice order.
    pub fn mean(traces: &[DecoherenceTrace], seed: u64) -> Result<DecoherenceTrace> {
        let first = traces.first().ok_or(Error::InvalidParameter {
            name: "realizations",
            reason: "must be at least 1",
        })?;
        let mut sum = vec![Complex64::new(0.0, 0.0); first.values.len()];
        for t in traces {
            if t.grid != first.grid {
                return Err(Error::DimensionMismatch {
                    expected: first.values.len(),
                    found: t.values.len(),
                });
            }
            for (s, v) in sum.iter_mut().zip(&t.values) {
                *s += v;
            }
        }
        let r = traces.len() as f64;
        Ok(DecoherenceTrace {
            grid: first.grid.clone(),
            values: sum.into_iter().map(|s| s / r).collect(),
            kind: TraceKind::Averaged {
                realizations: traces.len(),
                seed,
            },
        })
    }
}

fn trapezoid_mean(samples: &[f64]) -> f64 {
    let n = samples.len();
    if n == 1 {
        return samples[0];
    }
    let inner: f64 = samples[1..n - 1].iter().sum();
    (inner + 0.5 * (samples[0] + samples[n - 1])) / (n - 1) as f64
}

/// Generator for realization `index` of a run with master seed `seed`.
///
/// Each realization gets its own ChaCha stream, so realizations can be
/// drawn in any order or in parallel.
pub fn realization_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Product of single-spin states `cos(ϑ/2)|0⟩ + e^{iφ} sin(ϑ/2)|1⟩` with
/// `ϑ ∈ [0, π)` and `φ ∈ [0, 2π)` uniform.
pub fn random_product_state<R: Rng + ?Sized>(reg: SpinRegister, rng: &mut R) -> Vec<Complex64> {
    let spins: Vec<[Complex64; 2]> = (0..reg.len())
        .map(|_| {
            let theta: f64 = rng.random_range(0.0..PI);
            let phi: f64 = rng.random_range(0.0..2.0 * PI);
            [
                Complex64::new(libm::cos(theta / 2.0), 0.0),
                Complex64::from_polar(libm::sin(theta / 2.0), phi),
            ]
        })
        .collect();
    product_state(reg, &spins)
}

/// Tensor product of single-site states, site 1 most significant.
pub fn product_state(reg: SpinRegister, spins: &[[Complex64; 2]]) -> Vec<Complex64> {
    let mut state = vec![Complex64::new(1.0, 0.0)];
    for spin in spins.iter().take(reg.len()) {
        state = state
            .iter()
            .flat_map(|&a| [a * spin[0], a * spin[1]])
            .collect();
    }
    state
}

#[derive(Debug, Clone, PartialEq)]
enum Overlap {
    Real(Vec<f64>),
    Complex { re: Vec<f64>, im: Vec<f64> },
}

/// Eigensystems of `H_E − H_SE` (`ξ`) and `H_E + H_SE` (`η`) and their
/// overlaps.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbedEigensystems {
    pub minus: Eigensystem,
    pub plus: Eigensystem,
    overlap: Overlap,
    overlap_sq: Vec<f64>,
}

impl PerturbedEigensystems {
    pub fn dim(&self) -> usize {
        self.minus.dim()
    }

    /// `⟨ξ_k|η_l⟩`.
    pub fn overlap(&self, k: usize, l: usize) -> Complex64 {
        let n = self.dim();
        match &self.overlap {
            Overlap::Real(o) => Complex64::new(o[k * n + l], 0.0),
            Overlap::Complex { re, im } => Complex64::new(re[k * n + l], im[k * n + l]),
        }
    }

    /// `|⟨ξ_k|η_l⟩|²`, row-major.
    pub fn overlap_sq(&self) -> &[f64] {
        &self.overlap_sq
    }
}

fn transpose_real(v: &CMatrix) -> Vec<f64> {
    let n = v.rows();
    let mut t = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            t[j * n + i] = v[(i, j)].re;
        }
    }
    t
}

pub fn perturbed_eigensystems(
    env: &Operator,
    coupling: &Operator,
) -> Result<PerturbedEigensystems> {
    let minus = diagonalize(&env.try_sub(coupling)?)?;
    let plus = diagonalize(&env.try_add(coupling)?)?;
    let n = minus.dim();
    let overlap = if minus.vectors.is_real() && plus.vectors.is_real() {
        let mut o = vec![0.0; n * n];
        real_gemm(
            n,
            n,
            n,
            &transpose_real(&minus.vectors),
            &plus.vectors.real_parts(),
            &mut o,
        );
        Overlap::Real(o)
    } else {
        let o = minus.vectors.adjoint().matmul(&plus.vectors)?;
        Overlap::Complex {
            re: o.as_slice().iter().map(|z| z.re).collect(),
            im: o.as_slice().iter().map(|z| z.im).collect(),
        }
    };
    let overlap_sq = match &overlap {
        Overlap::Real(o) => o.iter().map(|x| x * x).collect(),
        Overlap::Complex { re, im } => re.iter().zip(im).map(|(a, b)| a * a + b * b).collect(),
    };
    Ok(PerturbedEigensystems {
        minus,
        plus,
        overlap,
        overlap_sq,
    })
}

/// Precomputed phase tables for evaluating decoherence factors of many
/// environment states on one set of times.
#[derive(Debug, Clone)]
pub struct DephasingPropagator<'a> {
    pe: &'a PerturbedEigensystems,
    times: Vec<f64>,
    /// `e^{iξ_k t_j}`, row `j`.
    xi_phase: Vec<Complex64>,
    /// `e^{−iη_l t_j}`, row `j`.
    eta_phase: Vec<Complex64>,
}

impl<'a> DephasingPropagator<'a> {
    pub fn new(pe: &'a PerturbedEigensystems, times: &[f64]) -> Self {
        let n = pe.dim();
        let mut xi_phase = Vec::with_capacity(n * times.len());
        let mut eta_phase = Vec::with_capacity(n * times.len());
        for &t in times {
            xi_phase.extend(
                pe.minus
                    .values
                    .iter()
                    .map(|&x| Complex64::from_polar(1.0, x * t)),
            );
            eta_phase.extend(
                pe.plus
                    .values
                    .iter()
                    .map(|&x| Complex64::from_polar(1.0, -x * t)),
            );
        }
        Self {
            pe,
            times: times.to_vec(),
            xi_phase,
            eta_phase,
        }
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    /// `Σ_{k,l} left_k e^{iξ_k t} M_kl e^{−iη_l t} right_l` at every time,
    /// with `M` either the overlap or its squared modulus.
    fn evaluate(&self, left: &[Complex64], right: &[Complex64], squared: bool) -> Vec<Complex64> {
        let n = self.pe.dim();
        let mut out = Vec::with_capacity(self.times.len());
        let mut w = vec![0.0; n * 2 * TIME_CHUNK];
        let mut y = vec![0.0; n * 2 * TIME_CHUNK];
        let mut y2 = vec![0.0; n * 2 * TIME_CHUNK];
        for j0 in (0..self.times.len()).step_by(TIME_CHUNK) {
            let c = TIME_CHUNK.min(self.times.len() - j0);
            let m = 2 * c;
            for l in 0..n {
                let row = &mut w[l * m..(l + 1) * m];
                for jj in 0..c {
                    let z = right[l] * self.eta_phase[(j0 + jj) * n + l];
                    row[jj] = z.re;
                    row[c + jj] = z.im;
                }
            }
            // y = M w, stored as [Re | Im] halves per row
            let (yr, yi): (&[f64], Option<&[f64]>) = match (&self.pe.overlap, squared) {
                (_, true) => {
                    real_gemm(n, n, m, &self.pe.overlap_sq, &w[..n * m], &mut y[..n * m]);
                    (&y[..n * m], None)
                }
                (Overlap::Real(o), false) => {
                    real_gemm(n, n, m, o, &w[..n * m], &mut y[..n * m]);
                    (&y[..n * m], None)
                }
                (Overlap::Complex { re, im }, false) => {
                    real_gemm(n, n, m, re, &w[..n * m], &mut y[..n * m]);
                    real_gemm(n, n, m, im, &w[..n * m], &mut y2[..n * m]);
                    (&y[..n * m], Some(&y2[..n * m]))
                }
            };
            for jj in 0..c {
                let j = j0 + jj;
                let mut acc = Complex64::new(0.0, 0.0);
                for k in 0..n {
                    let mut v = Complex64::new(yr[k * m + jj], yr[k * m + c + jj]);
                    if let Some(yi) = yi {
                        // (Or + i Oi)(wr + i wi) = Or w + i Oi w
                        v += Complex64::new(-yi[k * m + c + jj], yi[k * m + jj]);
                    }
                    acc += left[k] * self.xi_phase[j * n + k] * v;
                }
                out.push(acc);
            }
        }
        // U(0) = V(0) = I, so r(0) = ⟨ε|ε⟩ = 1.
        for (v, &t) in out.iter_mut().zip(&self.times) {
            if t == 0.0 {
                *v = Complex64::new(1.0, 0.0);
            }
        }
        out
    }

    /// `r(t)` for one normalized environment state.
    pub fn sampled_values(&self, state: &[Complex64]) -> Result<Vec<Complex64>> {
        let n = self.pe.dim();
        if state.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: state.len(),
            });
        }
        let norm = libm::sqrt(state.iter().map(|z| z.norm_sqr()).sum::<f64>());
        if (norm - 1.0).abs() > 1e-8 {
            return Err(Error::NotNormalized { norm });
        }
        let a = self.pe.minus.vectors.adjoint_matvec(state)?;
        let b = self.pe.plus.vectors.adjoint_matvec(state)?;
        let left: Vec<Complex64> = a.iter().map(|z| z.conj()).collect();
        Ok(self.evaluate(&left, &b, false))
    }

    /// Effective factor `Tr(U†V) / 2^L`.
    pub fn effective_values(&self) -> Vec<Complex64> {
        let n = self.pe.dim();
        let ones = vec![Complex64::new(1.0, 0.0); n];
        let scale = 1.0 / n as f64;
        let mut values = self.evaluate(&ones, &ones, true);
        for (v, &t) in values.iter_mut().zip(&self.times) {
            if t != 0.0 {
                *v *= scale;
            }
        }
        values
    }
}

/// Bound to a [`TimeGrid`].
#[derive(Debug, Clone)]
pub struct GridPropagator<'a> {
    inner: DephasingPropagator<'a>,
    grid: TimeGrid,
}

impl<'a> GridPropagator<'a> {
    pub fn new(pe: &'a PerturbedEigensystems, grid: &TimeGrid) -> Self {
        Self {
            inner: DephasingPropagator::new(pe, grid.times()),
            grid: grid.clone(),
        }
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn sampled(&self, state: &[Complex64]) -> Result<DecoherenceTrace> {
        Ok(DecoherenceTrace {
            grid: self.grid.clone(),
            values: self.inner.sampled_values(state)?,
            kind: TraceKind::Sampled {
                seed: None,
                stream: None,
            },
        })
    }

    /// Trace for realization `index` of the random product-state ensemble.
    pub fn realization(
        &self,
        reg: SpinRegister,
        seed: u64,
        index: u64,
    ) -> Result<DecoherenceTrace> {
        let mut rng = realization_rng(seed, index);
        let state = random_product_state(reg, &mut rng);
        let mut trace = self.sampled(&state)?;
        trace.kind = TraceKind::Sampled {
            seed: Some(seed),
            stream: Some(index),
        };
        Ok(trace)
    }

    /// Mean over realizations `0..realizations`, summed in index order.
    pub fn averaged(
        &self,
        reg: SpinRegister,
        realizations: usize,
        seed: u64,
    ) -> Result<DecoherenceTrace> {
        if realizations == 0 {
            return Err(Error::InvalidParameter {
                name: "realizations",
                reason: "must be at least 1",
            });
        }
        let mut sum = vec![Complex64::new(0.0, 0.0); self.grid.len()];
        for m in 0..realizations {
            let t = self.realization(reg, seed, m as u64)?;
            for (s, v) in sum.iter_mut().zip(&t.values) {
                *s += v;
            }
        }
        let r = realizations as f64;
        Ok(DecoherenceTrace {
            grid: self.grid.clone(),
            values: sum.into_iter().map(|s| s / r).collect(),
            kind: TraceKind::Averaged { realizations, seed },
        })
    }

    pub fn effective(&self) -> DecoherenceTrace {
        DecoherenceTrace {
            grid: self.grid.clone(),
            values: self.inner.effective_values(),
            kind: TraceKind::Effective,
        }
    }
}

/// `r̃_e(t) = 2^{−L} Σ_{k,l} e^{−it(η_l − ξ_k)} |⟨ξ_k|η_l⟩|²` on the grid.
pub fn effective_decoherence_factor(
    pe: &PerturbedEigensystems,
    grid: &TimeGrid,
) -> DecoherenceTrace {
    GridPropagator::new(pe, grid).effective()
}

/// Effective factor at arbitrary times.
pub fn effective_at(pe: &PerturbedEigensystems, times: &[f64]) -> Vec<Complex64> {
    DephasingPropagator::new(pe, times).effective_values()
}

/// `r(t)` for a single environment state.
pub fn sampled_decoherence_factor(
    env: &Operator,
    coupling: &Operator,
    state: &[Complex64],
    grid: &TimeGrid,
) -> Result<DecoherenceTrace> {
    let pe = perturbed_eigensystems(env, coupling)?;
    GridPropagator::new(&pe, grid).sampled(state)
}

/// Mean of `realizations` sampled traces with random product states.
pub fn averaged_decoherence_factor(
    env: &Operator,
    coupling: &Operator,
    reg: SpinRegister,
    realizations: usize,
    grid: &TimeGrid,
    seed: u64,
) -> Result<DecoherenceTrace> {
    if env.dim() != reg.dim() {
        return Err(Error::DimensionMismatch {
            expected: reg.dim(),
            found: env.dim(),
        });
    }
    let pe = perturbed_eigensystems(env, coupling)?;
    GridPropagator::new(&pe, grid).averaged(reg, realizations, seed)
}

/// Haar-averaged Loschmidt echo `(D + |Tr U†V|²) / (D (D + 1))`.
pub fn haar_averaged_le(pe: &PerturbedEigensystems, grid: &TimeGrid) -> Vec<f64> {
    haar_from_effective(pe.dim(), &effective_decoherence_factor(pe, grid).values)
}

pub fn haar_from_effective(dim: usize, effective: &[Complex64]) -> Vec<f64> {
    let d = dim as f64;
    effective
        .iter()
        .map(|r| {
            let tr = d * r.norm();
            (d + tr * tr) / (d * (d + 1.0))
        })
        .collect()
}

/// A 2×2 probe density matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QubitState {
    pub rho: [[Complex64; 2]; 2],
}

impl QubitState {
    /// Pure state `cos(θ/2)|0⟩ + e^{iφ} sin(θ/2)|1⟩`.
    pub fn pure(theta: f64, phi: f64) -> Self {
        let a = Complex64::new(libm::cos(theta / 2.0), 0.0);
        let b = Complex64::from_polar(libm::sin(theta / 2.0), phi);
        Self {
            rho: [[a * a.conj(), a * b.conj()], [b * a.conj(), b * b.conj()]],
        }
    }

    pub fn from_bloch(b: [f64; 3]) -> Self {
        let h = 0.5;
        Self {
            rho: [
                [
                    Complex64::new(h * (1.0 + b[2]), 0.0),
                    Complex64::new(h * b[0], -h * b[1]),
                ],
                [
                    Complex64::new(h * b[0], h * b[1]),
                    Complex64::new(h * (1.0 - b[2]), 0.0),
                ],
            ],
        }
    }

    pub fn bloch(&self) -> [f64; 3] {
        let c = self.rho[0][1];
        [
            2.0 * c.re,
            -2.0 * c.im,
            (self.rho[0][0] - self.rho[1][1]).re,
        ]
    }

    pub fn trace(&self) -> Complex64 {
        self.rho[0][0] + self.rho[1][1]
    }

    /// Eigenvalues `(λ₋, λ₊) = (1 ∓ |b|) / 2`.
    pub fn eigenvalues(&self) -> (f64, f64) {
        let b = self.bloch();
        let len = libm::sqrt(b[0] * b[0] + b[1] * b[1] + b[2] * b[2]);
        let tr = self.trace().re;
        (0.5 * (tr - len), 0.5 * (tr + len))
    }
}

/// Reduced probe state at time `t` for decoherence factor `r`.
pub fn reduced_state(probe: &ProbeConfig, r: Complex64, t: f64) -> Result<QubitState> {
    if r.norm() > 1.0 + 1e-9 {
        return Err(Error::DecoherenceOutOfRange(r.norm()));
    }
    let (s, c) = (libm::sin(probe.theta / 2.0), libm::cos(probe.theta / 2.0));
    let coh =
        Complex64::from_polar(0.5 * libm::sin(probe.theta), -(probe.omega * t + probe.phi)) * r;
    Ok(QubitState {
        rho: [
            [Complex64::new(c * c, 0.0), coh],
            [coh.conj(), Complex64::new(s * s, 0.0)],
        ],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::{build_coupling, build_environment, EnvironmentModel, IsingConfig};

    fn reg(l: usize) -> SpinRegister {
        SpinRegister::new(l).unwrap()
    }

    #[test]
    fn grid_layout() {
        let g = TimeGrid::new(1.0, 3, 200).unwrap();
        assert_eq!(g.len(), 601);
        assert_eq!(g.times()[0], 0.0);
        assert!((g.times()[600] - g.tau()).abs() <= 1e-12 * g.tau());
        assert!(TimeGrid::new(0.0, 1, 1).is_err());
        assert!(TimeGrid::new(1.0, 0, 1).is_err());
    }

    #[test]
    fn product_states() {
        let r = reg(5);
        let mut rng = realization_rng(42, 3);
        let s = random_product_state(r, &mut rng);
        let norm: f64 = s.iter().map(|z| z.norm_sqr()).sum();
        assert!((norm - 1.0).abs() < 1e-12);
        let again = random_product_state(r, &mut realization_rng(42, 3));
        assert_eq!(s, again);
        let other = random_product_state(r, &mut realization_rng(42, 4));
        assert_ne!(s, other);
    }

    #[test]
    fn single_site_reductions_are_pure() {
        let r = reg(4);
        let s = random_product_state(r, &mut realization_rng(7, 0));
        for site in 1..=4 {
            let bit = r.bit(site);
            // reduced density matrix of one site
            let mut rho = [[Complex64::new(0.0, 0.0); 2]; 2];
            for i in 0..16usize {
                for a in 0..2usize {
                    for b in 0..2usize {
                        let ia = (i & !(1 << bit)) | (a << bit);
                        let ib = (i & !(1 << bit)) | (b << bit);
                        if (i >> bit) & 1 == 0 {
                            rho[a][b] += s[ia] * s[ib].conj();
                        }
                    }
                }
            }
            let purity =
                (rho[0][0] * rho[0][0] + rho[0][1] * rho[1][0] * 2.0 + rho[1][1] * rho[1][1]).re;
            assert!((purity - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn commuting_single_spin() {
        let (hz, g) = (0.7, 0.2);
        let r = reg(1);
        let env = build_environment(
            &EnvironmentModel::Ising(IsingConfig {
                hx: 0.0,
                hz,
                j: 0.0,
            }),
            r,
        )
        .unwrap();
        let cpl = build_coupling(g, r).unwrap();
        let pe = perturbed_eigensystems(&env, &cpl).unwrap();
        let mut xi = pe.minus.values.clone();
        xi.sort_by(f64::total_cmp);
        assert!((xi[0] + (hz - g)).abs() < 1e-15 && (xi[1] - (hz - g)).abs() < 1e-15);
        assert!((pe.plus.values[1] - (hz + g)).abs() < 1e-15);
        let sq = pe.overlap_sq();
        assert!((sq[0] - 1.0).abs() < 1e-15 && sq[1].abs() < 1e-15 && (sq[3] - 1.0).abs() < 1e-15);

        let grid = TimeGrid::new(1.0, 2, 50).unwrap();
        let eff = effective_decoherence_factor(&pe, &grid);
        let s = core::f64::consts::FRAC_1_SQRT_2;
        let plus = [Complex64::new(s, 0.0), Complex64::new(s, 0.0)];
        let samp = sampled_decoherence_factor(&env, &cpl, &plus, &grid).unwrap();
        for (i, &t) in grid.times().iter().enumerate() {
            let expect = libm::cos(2.0 * g * t);
            assert!((eff.values[i] - expect).norm() < 1e-13);
            assert!((samp.values[i] - expect).norm() < 1e-13);
        }
    }

    #[test]
    fn zero_coupling_gives_unit_factor() {
        let r = reg(3);
        let env = build_environment(
            &EnvironmentModel::Ising(IsingConfig {
                hx: 1.0,
                hz: 0.5,
                j: 1.0,
            }),
            r,
        )
        .unwrap();
        let cpl = build_coupling(0.0, r).unwrap();
        let pe = perturbed_eigensystems(&env, &cpl).unwrap();
        let grid = TimeGrid::new(1.0, 2, 40).unwrap();
        for v in effective_decoherence_factor(&pe, &grid).values {
            assert!((v - 1.0).norm() < 1e-12);
        }
        let prop = GridPropagator::new(&pe, &grid);
        for v in prop.realization(r, 1, 0).unwrap().values {
            assert!((v - 1.0).norm() < 1e-12);
        }
        for m in haar_averaged_le(&pe, &grid) {
            assert!((m - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn unnormalized_state_rejected() {
        let r = reg(2);
        let env = build_environment(
            &EnvironmentModel::Ising(IsingConfig {
                hx: 1.0,
                hz: 0.5,
                j: 1.0,
            }),
            r,
        )
        .unwrap();
        let cpl = build_coupling(0.2, r).unwrap();
        let grid = TimeGrid::new(1.0, 1, 10).unwrap();
        let bad = vec![Complex64::new(1.0, 0.0); 4];
        assert!(matches!(
            sampled_decoherence_factor(&env, &cpl, &bad, &grid),
            Err(Error::NotNormalized { .. })
        ));
    }

    #[test]
    fn reduced_state_limits() {
        let probe = ProbeConfig::new(1.0, 0.2, 1.1, 0.0).unwrap();
        let rho = reduced_state(&probe, Complex64::new(1.0, 0.0), 0.0).unwrap();
        let pure = QubitState::pure(1.1, 0.0);
        for a in 0..2 {
            for b in 0..2 {
                assert!((rho.rho[a][b] - pure.rho[a][b]).norm() < 1e-15);
            }
        }
        let mixed = reduced_state(&probe, Complex64::new(0.0, 0.0), 3.0).unwrap();
        let (lo, hi) = mixed.eigenvalues();
        let c2 = libm::cos(0.55) * libm::cos(0.55);
        assert!((hi - c2).abs() < 1e-15 && (lo - (1.0 - c2)).abs() < 1e-15);
        assert!(reduced_state(&probe, Complex64::new(1.0, 0.1), 0.0).is_err());
    }

    #[test]
    fn period_means() {
        let grid = TimeGrid::new(1.0, 2, 4).unwrap();
        let values = (0..grid.len())
            .map(|i| Complex64::new(if i < 4 { 1.0 } else { 0.5 }, 0.0))
            .collect();
        let t = DecoherenceTrace {
            grid,
            values,
            kind: TraceKind::Effective,
        };
        let pp = t.per_period_mean_abs();
        assert_eq!(pp, vec![(3.0 + 0.5 * 1.5) / 4.0, 0.5]);
        let cm = t.cumulative_mean_abs();
        assert_eq!(cm[0], pp[0]);
        assert!((cm[1] - 0.5 * (pp[0] + pp[1])).abs() < 1e-15);
    }
}
