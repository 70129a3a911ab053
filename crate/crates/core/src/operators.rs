//! Many-body spin operators.
//!
//! Site `k` (1-based) of an `L`-spin register is the `k`-th tensor factor
//! counted from the left, so it corresponds to bit `L - k` of a basis index.
//! `|0⟩` is the `σᶻ = +1` state. Environment Hamiltonians are first written
//! as a [`PauliSum`] and then materialized densely, or applied sparsely to
//! basis states by the symmetry-sector code in [`crate::spectral`].

use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::CMatrix;

/// Default ceiling on the number of environment spins for dense operators.
pub const DEFAULT_MAX_SPINS: usize = 14;

/// An `L`-spin environment register.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SpinRegister {
    len: usize,
}

impl SpinRegister {
    /// Register with the default capacity guard.
    pub fn new(len: usize) -> Result<Self> {
        Self::with_limit(len, DEFAULT_MAX_SPINS)
    }

    pub fn with_limit(len: usize, limit: usize) -> Result<Self> {
        if len == 0 {
            return Err(Error::InvalidParameter {
                name: "L",
                reason: "must be at least 1",
            });
        }
        if len > limit || len >= usize::BITS as usize / 2 {
            return Err(Error::Capacity { len, limit });
        }
        Ok(Self { len })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn dim(&self) -> usize {
        1 << self.len
    }

    /// Bit position of a 1-based site inside a basis index.
    pub fn bit(&self, site: usize) -> usize {
        self.len - site
    }

    fn check_site(&self, site: usize) -> Result<()> {
        if site == 0 || site > self.len {
            return Err(Error::SiteOutOfRange {
                site,
                len: self.len,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Axis {
    X,
    Y,
    Z,
}

/// A dense operator on a `dim`-dimensional space.
#[derive(Debug, Clone, PartialEq)]
pub struct Operator {
    matrix: CMatrix,
    hermitian: bool,
}

impl Operator {
    /// Wraps a square matrix; the Hermitian flag is set only if the matrix
    /// passes the `1e-12 · max|entry|` check.
    pub fn new(matrix: CMatrix) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::DimensionMismatch {
                expected: matrix.rows(),
                found: matrix.cols(),
            });
        }
        let scale = matrix.max_abs();
        let hermitian = matrix.hermitian_deviation() <= 1e-12 * scale;
        Ok(Self { matrix, hermitian })
    }

    /// Like [`Operator::new`] but fails unless the matrix is Hermitian.
    pub fn hermitian(matrix: CMatrix) -> Result<Self> {
        let op = Self::new(matrix)?;
        if !op.hermitian {
            return Err(Error::NotHermitian {
                deviation: op.matrix.hermitian_deviation(),
            });
        }
        Ok(op)
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            matrix: CMatrix::zeros(dim, dim),
            hermitian: true,
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            matrix: CMatrix::identity(dim),
            hermitian: true,
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermitian
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn max_abs(&self) -> f64 {
        self.matrix.max_abs()
    }

    fn same_dim(&self, other: &Self) -> Result<()> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: other.dim(),
            });
        }
        Ok(())
    }

    pub fn try_add(&self, other: &Self) -> Result<Self> {
        self.same_dim(other)?;
        Ok(Self {
            matrix: &self.matrix + &other.matrix,
            hermitian: self.hermitian && other.hermitian,
        })
    }

    pub fn try_sub(&self, other: &Self) -> Result<Self> {
        self.same_dim(other)?;
        Ok(Self {
            matrix: &self.matrix - &other.matrix,
            hermitian: self.hermitian && other.hermitian,
        })
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            matrix: &self.matrix * s,
            hermitian: self.hermitian,
        }
    }

    pub fn try_mul(&self, other: &Self) -> Result<Self> {
        Self::new(self.matrix.matmul(&other.matrix)?)
    }

    pub fn commutator(&self, other: &Self) -> Result<CMatrix> {
        self.matrix.commutator(&other.matrix)
    }
}

/// `I^{⊗(site-1)} ⊗ σ^axis ⊗ I^{⊗(L-site)}`.
pub fn embed_pauli(axis: Axis, site: usize, reg: SpinRegister) -> Result<Operator> {
    PauliSum::single(reg, axis, site, 1.0)?.to_operator()
}

/// One product of single-site Paulis with a real coefficient.
#[derive(Debug, Clone, PartialEq)]
pub struct PauliTerm {
    pub coeff: f64,
    /// `(site, axis)` pairs with distinct sites.
    pub factors: Vec<(usize, Axis)>,
}

impl PauliTerm {
    /// Applies the term to basis state `index`, returning the target index
    /// and amplitude.
    pub fn apply(&self, reg: SpinRegister, index: usize) -> (usize, Complex64) {
        let mut target = index;
        let mut amp = Complex64::new(self.coeff, 0.0);
        for &(site, axis) in &self.factors {
            let bit = reg.bit(site);
            let up = (index >> bit) & 1 == 0;
            match axis {
                Axis::X => target ^= 1 << bit,
                Axis::Y => {
                    target ^= 1 << bit;
                    // σʸ|0⟩ = i|1⟩, σʸ|1⟩ = -i|0⟩
                    amp *= if up {
                        Complex64::new(0.0, 1.0)
                    } else {
                        Complex64::new(0.0, -1.0)
                    };
                }
                Axis::Z => {
                    if !up {
                        amp = -amp;
                    }
                }
            }
        }
        (target, amp)
    }
}

/// A sum of Pauli strings on a fixed register.
#[derive(Debug, Clone, PartialEq)]
pub struct PauliSum {
    reg: SpinRegister,
    terms: Vec<PauliTerm>,
}

impl PauliSum {
    pub fn new(reg: SpinRegister) -> Self {
        Self {
            reg,
            terms: Vec::new(),
        }
    }

    pub fn single(reg: SpinRegister, axis: Axis, site: usize, coeff: f64) -> Result<Self> {
        let mut sum = Self::new(reg);
        sum.push(coeff, &[(site, axis)])?;
        Ok(sum)
    }

    pub fn register(&self) -> SpinRegister {
        self.reg
    }

    pub fn terms(&self) -> &[PauliTerm] {
        &self.terms
    }

    pub fn push(&mut self, coeff: f64, factors: &[(usize, Axis)]) -> Result<()> {
        for (i, &(site, _)) in factors.iter().enumerate() {
            self.reg.check_site(site)?;
            if factors[..i].iter().any(|&(s, _)| s == site) {
                return Err(Error::InvalidParameter {
                    name: "factors",
                    reason: "repeated site in Pauli string",
                });
            }
        }
        if coeff != 0.0 {
            self.terms.push(PauliTerm {
                coeff,
                factors: factors.to_vec(),
            });
        }
        Ok(())
    }

    /// `H|index⟩` accumulated into `out` (length `2^L`) with weight `w`.
    pub fn apply_basis(&self, index: usize, w: Complex64, out: &mut [Complex64]) {
        for term in &self.terms {
            let (target, amp) = term.apply(self.reg, index);
            out[target] += amp * w;
        }
    }

    /// Dense matrix of the sum.
    pub fn to_operator(&self) -> Result<Operator> {
        let dim = self.reg.dim();
        let mut m = CMatrix::zeros(dim, dim);
        for col in 0..dim {
            for term in &self.terms {
                let (row, amp) = term.apply(self.reg, col);
                m[(row, col)] += amp;
            }
        }
        Operator::new(m)
    }
}

/// Ising chain in a tilted field:
/// `H = Σ_k (h_x σˣ_k + h_z σᶻ_k) − J Σ_k σᶻ_k σᶻ_{k+1}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IsingConfig {
    pub hx: f64,
    pub hz: f64,
    pub j: f64,
}

/// Heisenberg chain in a random longitudinal field, written with `S = σ/2`:
/// `H = Σ_k S_k·S_{k+1} + Σ_k h_k S^z_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct HeisenbergConfig {
    pub h: f64,
    pub fields_z: Vec<f64>,
}

impl HeisenbergConfig {
    /// Draws `L` fields uniformly on `[-h, h]`.
    pub fn random<R: Rng + ?Sized>(h: f64, len: usize, rng: &mut R) -> Self {
        let fields_z = (0..len)
            .map(|_| {
                if h == 0.0 {
                    0.0
                } else {
                    rng.random_range(-h..=h)
                }
            })
            .collect();
        Self { h, fields_z }
    }

    pub fn uniform(h: f64, fields_z: Vec<f64>) -> Result<Self> {
        if fields_z.iter().any(|f| f.abs() > h) {
            return Err(Error::InvalidParameter {
                name: "fields_z",
                reason: "field outside [-h, h]",
            });
        }
        Ok(Self { h, fields_z })
    }
}

/// XXZ chain with a next-nearest-neighbour perturbation `H0 + λ H1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct XxzConfig {
    pub mu: f64,
    pub lambda: f64,
}

/// Ising chain with power-law `σˣσˣ` couplings and a field gradient:
/// `H = Σ_{j<j'} J0/|j-j'|^γ σˣ_j σˣ_{j'} + Σ_j (B0 + (j-1) g_e) σᶻ_j`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LongRangeConfig {
    pub j0: f64,
    pub gamma: f64,
    pub bz0: f64,
    pub ge: f64,
}

impl LongRangeConfig {
    pub fn coupling(&self, j: usize, jp: usize) -> f64 {
        let dist = (j as f64 - jp as f64).abs();
        self.j0 / libm::pow(dist, self.gamma)
    }
}

/// The four environment models.
#[derive(Debug, Clone, PartialEq)]
pub enum EnvironmentModel {
    Ising(IsingConfig),
    Heisenberg(HeisenbergConfig),
    Xxz(XxzConfig),
    LongRange(LongRangeConfig),
}

impl EnvironmentModel {
    fn validate(&self, reg: SpinRegister) -> Result<()> {
        match self {
            EnvironmentModel::Heisenberg(c) => {
                if c.fields_z.len() != reg.len() {
                    return Err(Error::DimensionMismatch {
                        expected: reg.len(),
                        found: c.fields_z.len(),
                    });
                }
                if c.fields_z.iter().any(|f| f.abs() > c.h) {
                    return Err(Error::InvalidParameter {
                        name: "fields_z",
                        reason: "field outside [-h, h]",
                    });
                }
            }
            EnvironmentModel::LongRange(c) if !(c.gamma > 0.0) => {
                return Err(Error::InvalidParameter {
                    name: "gamma",
                    reason: "must be positive",
                });
            }
            _ => {}
        }
        Ok(())
    }

    /// The Hamiltonian as a sum of Pauli strings, open boundaries.
    pub fn terms(&self, reg: SpinRegister) -> Result<PauliSum> {
        use Axis::{X, Y, Z};
        self.validate(reg)?;
        let l = reg.len();
        let mut h = PauliSum::new(reg);
        match self {
            EnvironmentModel::Ising(c) => {
                for k in 1..=l {
                    h.push(c.hx, &[(k, X)])?;
                    h.push(c.hz, &[(k, Z)])?;
                }
                for k in 1..l {
                    h.push(-c.j, &[(k, Z), (k + 1, Z)])?;
                }
            }
            EnvironmentModel::Heisenberg(c) => {
                for k in 1..l {
                    for a in [X, Y, Z] {
                        h.push(0.25, &[(k, a), (k + 1, a)])?;
                    }
                }
                for (k, &f) in c.fields_z.iter().enumerate() {
                    h.push(0.5 * f, &[(k + 1, Z)])?;
                }
            }
            EnvironmentModel::Xxz(c) => {
                for (range, scale) in [(1, 1.0), (2, c.lambda)] {
                    for k in 1..=l.saturating_sub(range) {
                        h.push(scale, &[(k, X), (k + range, X)])?;
                        h.push(scale, &[(k, Y), (k + range, Y)])?;
                        h.push(scale * c.mu, &[(k, Z), (k + range, Z)])?;
                    }
                }
            }
            EnvironmentModel::LongRange(c) => {
                for j in 1..=l {
                    for jp in j + 1..=l {
                        h.push(c.coupling(j, jp), &[(j, X), (jp, X)])?;
                    }
                }
                for j in 1..=l {
                    h.push(c.bz0 + (j - 1) as f64 * c.ge, &[(j, Z)])?;
                }
            }
        }
        Ok(h)
    }
}

/// Dense environment Hamiltonian.
pub fn build_environment(model: &EnvironmentModel, reg: SpinRegister) -> Result<Operator> {
    model.terms(reg)?.to_operator()
}

/// `H_SE = g σᶻ_1` on the environment space.
pub fn build_coupling(g: f64, reg: SpinRegister) -> Result<Operator> {
    let dim = reg.dim();
    let mut diag = vec![0.0; dim];
    let bit = reg.bit(1);
    for (i, d) in diag.iter_mut().enumerate() {
        // avoids -0.0 entries when g = 0
        *d = if g == 0.0 {
            0.0
        } else if (i >> bit) & 1 == 0 {
            g
        } else {
            -g
        };
    }
    Operator::new(CMatrix::from_diagonal(&diag))
}

/// Probe parameters: frequency, coupling and initial Bloch angles.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeConfig {
    pub omega: f64,
    pub g: f64,
    pub theta: f64,
    pub phi: f64,
}

impl ProbeConfig {
    pub fn new(omega: f64, g: f64, theta: f64, phi: f64) -> Result<Self> {
        let cfg = Self {
            omega,
            g,
            theta,
            phi,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.omega > 0.0) || !self.omega.is_finite() {
            return Err(Error::InvalidParameter {
                name: "omega",
                reason: "must be positive",
            });
        }
        if !(0.0..core::f64::consts::PI).contains(&self.theta) {
            return Err(Error::InvalidParameter {
                name: "theta",
                reason: "must lie in [0, pi)",
            });
        }
        if !(0.0..2.0 * core::f64::consts::PI).contains(&self.phi) {
            return Err(Error::InvalidParameter {
                name: "phi",
                reason: "must lie in [0, 2pi)",
            });
        }
        if !self.g.is_finite() {
            return Err(Error::InvalidParameter {
                name: "g",
                reason: "must be finite",
            });
        }
        Ok(())
    }
}

/// Full probe + environment Hamiltonian `ω/2 σᶻ_0 + σᶻ_0 ⊗ H_SE + I ⊗ H_E`
/// with the probe as the most significant factor.
pub fn build_total(probe: &ProbeConfig, env: &Operator, coupling: &Operator) -> Result<Operator> {
    if env.dim() != coupling.dim() {
        return Err(Error::DimensionMismatch {
            expected: env.dim(),
            found: coupling.dim(),
        });
    }
    let dim = env.dim();
    let mut m = CMatrix::zeros(2 * dim, 2 * dim);
    for (block, sign) in [(0usize, 1.0f64), (1, -1.0)] {
        let off = block * dim;
        for i in 0..dim {
            for j in 0..dim {
                let mut v = env.matrix()[(i, j)] + coupling.matrix()[(i, j)] * sign;
                if i == j {
                    v += Complex64::new(0.5 * sign * probe.omega, 0.0);
                }
                m[(off + i, off + j)] = v;
            }
        }
    }
    Operator::new(m)
}
