//! Exact diagonalization, symmetry sectors and level-spacing statistics.

use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{hermitian_eigen, CMatrix};
use crate::operators::{Operator, PauliSum, SpinRegister};

/// Mean spacing ratio of a Poisson spectrum.
pub const POISSON_MEAN_RATIO: f64 = 0.386;
/// Mean spacing ratio of the Gaussian orthogonal ensemble.
pub const WIGNER_DYSON_MEAN_RATIO: f64 = 0.5307;
/// Spacings below this fraction of the spectral width count as degenerate.
pub const DEGENERACY_TOLERANCE: f64 = 1e-10;
/// Default leakage tolerance for [`restrict`].
pub const LEAKAGE_TOLERANCE: f64 = 1e-8;

/// Ascending eigenvalues and orthonormal eigenvectors (as columns).
#[derive(Debug, Clone, PartialEq)]
pub struct Eigensystem {
    pub values: Vec<f64>,
    pub vectors: CMatrix,
}

impl Eigensystem {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// `V Λ V†`.
    pub fn reconstruct(&self) -> CMatrix {
        let n = self.dim();
        let mut scaled = self.vectors.clone();
        for i in 0..n {
            for j in 0..n {
                scaled[(i, j)] *= self.values[j];
            }
        }
        scaled.matmul(&self.vectors.adjoint()).expect("square")
    }
}

/// Splits the index set into groups that are never connected by a nonzero
/// matrix element; such groups can be diagonalized independently.
fn connected_blocks(h: &CMatrix) -> Vec<Vec<usize>> {
    let n = h.rows();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for i in 0..n {
        for (j, z) in h.row(i).iter().enumerate().skip(i + 1) {
            if z.re != 0.0 || z.im != 0.0 {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let mut root_to_block = vec![usize::MAX; n];
    let mut blocks: Vec<Vec<usize>> = Vec::new();
    for i in 0..n {
        let r = find(&mut parent, i);
        if root_to_block[r] == usize::MAX {
            root_to_block[r] = blocks.len();
            blocks.push(Vec::new());
        }
        blocks[root_to_block[r]].push(i);
    }
    blocks
}

fn sub_matrix(h: &CMatrix, idx: &[usize]) -> CMatrix {
    let mut m = CMatrix::zeros(idx.len(), idx.len());
    for (a, &i) in idx.iter().enumerate() {
        for (b, &j) in idx.iter().enumerate() {
            m[(a, b)] = h[(i, j)];
        }
    }
    m
}

fn require_hermitian(h: &Operator) -> Result<()> {
    if !h.is_hermitian() {
        return Err(Error::NotHermitian {
            deviation: h.matrix().hermitian_deviation(),
        });
    }
    Ok(())
}

/// Full eigendecomposition of a Hermitian operator.
///
/// Eigenvector phases are fixed so that the largest-magnitude component
/// (first one on ties) is real and positive.
pub fn diagonalize(h: &Operator) -> Result<Eigensystem> {
    require_hermitian(h)?;
    let m = h.matrix();
    let n = m.rows();
    let blocks = connected_blocks(m);

    let mut values = Vec::with_capacity(n);
    let mut columns: Vec<Vec<Complex64>> = Vec::with_capacity(n);
    for block in &blocks {
        let raw = hermitian_eigen(&sub_matrix(m, block), true)?;
        let zt = raw.vectors.expect("vectors requested");
        let b = block.len();
        for (j, &v) in raw.values.iter().enumerate() {
            let mut col = vec![Complex64::new(0.0, 0.0); n];
            for (a, &i) in block.iter().enumerate() {
                col[i] = zt[j * b + a];
            }
            values.push(v);
            columns.push(col);
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut vectors = CMatrix::zeros(n, n);
    let mut sorted = Vec::with_capacity(n);
    for (j, &src) in order.iter().enumerate() {
        sorted.push(values[src]);
        let col = &columns[src];
        let mut best = 0;
        for (i, z) in col.iter().enumerate() {
            if z.norm() > col[best].norm() {
                best = i;
            }
        }
        let pivot = col[best];
        let phase = if pivot.norm() > 0.0 {
            pivot.conj() / pivot.norm()
        } else {
            Complex64::new(1.0, 0.0)
        };
        for (i, z) in col.iter().enumerate() {
            vectors[(i, j)] = if i == best {
                Complex64::new(pivot.norm(), 0.0)
            } else {
                z * phase
            };
        }
    }
    Ok(Eigensystem {
        values: sorted,
        vectors,
    })
}

/// Eigenvalues only, ascending.
pub fn eigenvalues(h: &Operator) -> Result<Vec<f64>> {
    require_hermitian(h)?;
    let m = h.matrix();
    let mut values = Vec::with_capacity(m.rows());
    for block in connected_blocks(m) {
        values.extend(hermitian_eigen(&sub_matrix(m, &block), false)?.values);
    }
    values.sort_by(f64::total_cmp);
    Ok(values)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SectorKind {
    ParityEven,
    ParityOdd,
    /// `n` spins in `|0⟩` (σᶻ = +1).
    Magnetization(usize),
    /// Both of the above, for chains conserving magnetization and parity.
    MagnetizationParity {
        n: usize,
        even: bool,
    },
}

/// Orthonormal injection of a symmetry sector into the full space.
///
/// Columns are stored sparsely as `(basis index, amplitude)` lists; every
/// basis index appears in at most one column.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetrySector {
    pub kind: SectorKind,
    full_dim: usize,
    columns: Vec<Vec<(usize, f64)>>,
}

impl SymmetrySector {
    pub fn dim(&self) -> usize {
        self.columns.len()
    }

    pub fn full_dim(&self) -> usize {
        self.full_dim
    }

    pub fn columns(&self) -> &[Vec<(usize, f64)>] {
        &self.columns
    }

    /// Dense `full_dim × dim` injection matrix `P`.
    pub fn injection(&self) -> CMatrix {
        let mut p = CMatrix::zeros(self.full_dim, self.dim());
        for (j, col) in self.columns.iter().enumerate() {
            for &(i, a) in col {
                p[(i, j)] = Complex64::new(a, 0.0);
            }
        }
        p
    }

    /// For each basis index, the column containing it and its amplitude.
    fn owners(&self) -> Vec<Option<(usize, f64)>> {
        let mut owners = vec![None; self.full_dim];
        for (j, col) in self.columns.iter().enumerate() {
            for &(i, a) in col {
                owners[i] = Some((j, a));
            }
        }
        owners
    }
}

fn reverse_bits(index: usize, len: usize) -> usize {
    index.reverse_bits() >> (usize::BITS as usize - len)
}

/// Site-reversal operator `Π = P_{1,L} P_{2,L-1} ⋯`.
pub fn parity_operator(reg: SpinRegister) -> Operator {
    let dim = reg.dim();
    let mut m = CMatrix::zeros(dim, dim);
    for i in 0..dim {
        m[(reverse_bits(i, reg.len()), i)] = Complex64::new(1.0, 0.0);
    }
    Operator::new(m).expect("square")
}

/// Bases of the `Π = +1` and `Π = -1` eigenspaces.
pub fn parity_sectors(reg: SpinRegister) -> (SymmetrySector, SymmetrySector) {
    let dim = reg.dim();
    let s = core::f64::consts::FRAC_1_SQRT_2;
    let mut even = Vec::new();
    let mut odd = Vec::new();
    for i in 0..dim {
        let r = reverse_bits(i, reg.len());
        if r == i {
            even.push(vec![(i, 1.0)]);
        } else if i < r {
            even.push(vec![(i, s), (r, s)]);
            odd.push(vec![(i, s), (r, -s)]);
        }
    }
    (
        SymmetrySector {
            kind: SectorKind::ParityEven,
            full_dim: dim,
            columns: even,
        },
        SymmetrySector {
            kind: SectorKind::ParityOdd,
            full_dim: dim,
            columns: odd,
        },
    )
}

/// Basis states with exactly `n` spins up; dimension `C(L, n)`.
pub fn magnetization_sector(reg: SpinRegister, n: usize) -> Result<SymmetrySector> {
    if n > reg.len() {
        return Err(Error::InvalidParameter {
            name: "n",
            reason: "must lie in 0..=L",
        });
    }
    let columns = (0..reg.dim())
        .filter(|i| reg.len() - i.count_ones() as usize == n)
        .map(|i| vec![(i, 1.0)])
        .collect();
    Ok(SymmetrySector {
        kind: SectorKind::Magnetization(n),
        full_dim: reg.dim(),
        columns,
    })
}

/// Parity eigenstates with exactly `n` spins up.
pub fn magnetization_parity_sector(
    reg: SpinRegister,
    n: usize,
    even: bool,
) -> Result<SymmetrySector> {
    if n > reg.len() {
        return Err(Error::InvalidParameter {
            name: "n",
            reason: "must lie in 0..=L",
        });
    }
    let (e, o) = parity_sectors(reg);
    let columns = if even { e.columns } else { o.columns }
        .into_iter()
        .filter(|col| reg.len() - col[0].0.count_ones() as usize == n)
        .collect();
    Ok(SymmetrySector {
        kind: SectorKind::MagnetizationParity { n, even },
        full_dim: reg.dim(),
        columns,
    })
}

/// Projects `H P` back onto the sector, returning `P† H P` and the leakage
/// `max |(I − P P†) H P|`. `apply` writes `H |i⟩ · w` into the scratch vector.
fn project<F>(sector: &SymmetrySector, mut apply: F) -> (CMatrix, f64)
where
    F: FnMut(usize, Complex64, &mut [Complex64]),
{
    let owners = sector.owners();
    let d = sector.dim();
    let mut block = CMatrix::zeros(d, d);
    let mut scratch = vec![Complex64::new(0.0, 0.0); sector.full_dim];
    let mut leakage = 0.0f64;
    for (j, col) in sector.columns.iter().enumerate() {
        for &(i, a) in col {
            apply(i, Complex64::new(a, 0.0), &mut scratch);
        }
        for (idx, &y) in scratch.iter().enumerate() {
            if y.re == 0.0 && y.im == 0.0 {
                continue;
            }
            match owners[idx] {
                Some((row, a)) => block[(row, j)] += y * a,
                None => leakage = leakage.max(y.norm()),
            }
        }
        // in-sector residual y - P P† y
        for (idx, y) in scratch.iter_mut().enumerate() {
            if let Some((row, a)) = owners[idx] {
                leakage = leakage.max((*y - block[(row, j)] * a).norm());
            }
            *y = Complex64::new(0.0, 0.0);
        }
    }
    (block, leakage)
}

/// `P† H P` for a dense operator, rejecting leakage above
/// [`LEAKAGE_TOLERANCE`].
pub fn restrict(h: &Operator, sector: &SymmetrySector) -> Result<Operator> {
    restrict_with_tolerance(h, sector, LEAKAGE_TOLERANCE)
}

pub fn restrict_with_tolerance(
    h: &Operator,
    sector: &SymmetrySector,
    tolerance: f64,
) -> Result<Operator> {
    if h.dim() != sector.full_dim {
        return Err(Error::DimensionMismatch {
            expected: sector.full_dim,
            found: h.dim(),
        });
    }
    let m = h.matrix();
    let (block, leakage) = project(sector, |i, w, out| {
        for (r, o) in out.iter_mut().enumerate() {
            *o += m[(r, i)] * w;
        }
    });
    finish_restriction(block, leakage, tolerance)
}

/// Same as [`restrict_with_tolerance`] but applies the Hamiltonian term by
/// term, so the full `2^L × 2^L` matrix is never formed.
pub fn restrict_terms(h: &PauliSum, sector: &SymmetrySector, tolerance: f64) -> Result<Operator> {
    if h.register().dim() != sector.full_dim {
        return Err(Error::DimensionMismatch {
            expected: sector.full_dim,
            found: h.register().dim(),
        });
    }
    let (block, leakage) = project(sector, |i, w, out| h.apply_basis(i, w, out));
    finish_restriction(block, leakage, tolerance)
}

fn finish_restriction(block: CMatrix, leakage: f64, tolerance: f64) -> Result<Operator> {
    let scale = block.max_abs().max(1.0);
    if leakage > tolerance * scale {
        return Err(Error::SymmetryViolation { leakage, tolerance });
    }
    // Hermitian up to rounding; symmetrize so the flag is set.
    let adj = block.adjoint();
    let sym = &(&block + &adj) * 0.5;
    Operator::hermitian(sym)
}

/// Level-spacing ratio statistics of an ordered spectrum.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralStats {
    pub spacings: Vec<f64>,
    pub ratios: Vec<f64>,
    pub mean_ratio: f64,
    pub eta: f64,
}

/// Normalized chaos indicator: 0 for Poisson, 1 for Wigner–Dyson statistics.
pub fn eta_from_mean_ratio(mean_ratio: f64) -> f64 {
    (mean_ratio - POISSON_MEAN_RATIO) / (WIGNER_DYSON_MEAN_RATIO - POISSON_MEAN_RATIO)
}

/// Spacing ratios `min(s_n, s_{n-1}) / max(s_n, s_{n-1})` and their mean.
///
/// Spacings smaller than [`DEGENERACY_TOLERANCE`] times the spectral width
/// are dropped first. `eta` is not clamped.
pub fn level_statistics(values: &[f64]) -> Result<SpectralStats> {
    if values.len() < 3 {
        return Err(Error::TooFewLevels(values.len()));
    }
    let width = values[values.len() - 1] - values[0];
    let spacings: Vec<f64> = values
        .windows(2)
        .map(|w| w[1] - w[0])
        .filter(|&s| s >= DEGENERACY_TOLERANCE * width && s > 0.0)
        .collect();
    if spacings.len() < 2 {
        return Err(Error::TooFewLevels(spacings.len() + 1));
    }
    let ratios: Vec<f64> = spacings
        .windows(2)
        .map(|w| {
            let (a, b) = (w[0], w[1]);
            a.min(b) / a.max(b)
        })
        .collect();
    let mean_ratio = ratios.iter().sum::<f64>() / ratios.len() as f64;
    Ok(SpectralStats {
        spacings,
        ratios,
        mean_ratio,
        eta: eta_from_mean_ratio(mean_ratio),
    })
}

/// [`level_statistics`] applied to an eigensystem's values.
pub fn eigensystem_statistics(es: &Eigensystem) -> Result<SpectralStats> {
    level_statistics(&es.values)
}
