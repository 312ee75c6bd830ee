//! Bipartite density operators and their marginals.
//!
//! Layout convention, shared by every module: the composite index is
//! `i = i1 * d2 + i2`, so the first factor is the slow (row-block) index of
//! the Kronecker layout and `kron(a, b)` acts as `a ⊗ b`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::{self, c, kron, re, ComplexMatrix, C64, HERMITIAN_TOL, PSD_TOL};

/// Tolerance on `|Tr ρ - 1|` for a density matrix.
pub const TRACE_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct BipartiteSpace {
    pub d1: usize,
    pub d2: usize,
}

impl BipartiteSpace {
    pub fn new(d1: usize, d2: usize) -> Result<Self> {
        if d1 == 0 || d2 == 0 {
            return Err(Error::OutOfRange(format!("factor dimensions must be positive, got {d1}x{d2}")));
        }
        Ok(Self { d1, d2 })
    }

    pub fn qubits() -> Self {
        Self { d1: 2, d2: 2 }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.d1 * self.d2
    }
}

/// Checks that `m` is a density matrix: Hermitian, PSD and unit trace, each
/// to `1e-10`. Returns the smallest eigenvalue.
pub fn validate_density(m: &ComplexMatrix) -> Result<f64> {
    if !m.is_square() {
        return Err(Error::InvalidDensityMatrix(format!("{}x{} matrix is not square", m.rows(), m.cols())));
    }
    let dev = m.hermiticity_deviation();
    if dev > HERMITIAN_TOL {
        return Err(Error::InvalidDensityMatrix(format!("not Hermitian (deviation {dev:.3e})")));
    }
    let tr = m.trace();
    if (tr.re - 1.0).abs() > TRACE_TOL || tr.im.abs() > TRACE_TOL {
        return Err(Error::InvalidDensityMatrix(format!("trace is {:.12} + {:.3e}i, expected 1", tr.re, tr.im)));
    }
    let min = linalg::eigh(&m.hermitian_part())?.values[0];
    if min < -PSD_TOL {
        return Err(Error::InvalidDensityMatrix(format!("negative eigenvalue {min:.3e}")));
    }
    Ok(min)
}

/// Trace over the second factor of a `d1·d2`-square matrix.
pub fn partial_trace_second(m: &ComplexMatrix, space: BipartiteSpace) -> ComplexMatrix {
    let BipartiteSpace { d1, d2 } = space;
    assert_eq!(m.rows(), d1 * d2);
    ComplexMatrix::from_fn(d1, d1, |a, b| (0..d2).map(|k| m[(a * d2 + k, b * d2 + k)]).sum())
}

/// Trace over the first factor of a `d1·d2`-square matrix.
pub fn partial_trace_first(m: &ComplexMatrix, space: BipartiteSpace) -> ComplexMatrix {
    let BipartiteSpace { d1, d2 } = space;
    assert_eq!(m.rows(), d1 * d2);
    ComplexMatrix::from_fn(d2, d2, |a, b| (0..d1).map(|k| m[(k * d2 + a, k * d2 + b)]).sum())
}

/// A validated density matrix on `C^{d1} ⊗ C^{d2}`.
#[derive(Clone, Debug, PartialEq)]
pub struct BipartiteState {
    space: BipartiteSpace,
    rho: ComplexMatrix,
}

impl BipartiteState {
    pub fn new(space: BipartiteSpace, rho: ComplexMatrix) -> Result<Self> {
        if rho.rows() != space.dim() || !rho.is_square() {
            return Err(Error::DimensionMismatch { expected: space.dim(), found: rho.rows().max(rho.cols()) });
        }
        validate_density(&rho)?;
        Ok(Self { space, rho: rho.hermitian_part() })
    }

    #[inline]
    pub fn space(&self) -> BipartiteSpace {
        self.space
    }

    #[inline]
    pub fn rho(&self) -> &ComplexMatrix {
        &self.rho
    }

    pub fn into_rho(self) -> ComplexMatrix {
        self.rho
    }

    /// Marginal on the first factor, `r₁ρ = Tr₂ ρ`.
    pub fn restrict_first(&self) -> ComplexMatrix {
        partial_trace_second(&self.rho, self.space)
    }

    /// Marginal on the second factor, `r₂ρ = Tr₁ ρ`.
    pub fn restrict_second(&self) -> ComplexMatrix {
        partial_trace_first(&self.rho, self.space)
    }

    /// `Tr(ρ A)`.
    pub fn expect(&self, a: &ComplexMatrix) -> Result<C64> {
        let n = self.space.dim();
        if a.rows() != n || a.cols() != n {
            return Err(Error::DimensionMismatch { expected: n, found: if a.rows() != n { a.rows() } else { a.cols() } });
        }
        Ok(self.rho.trace_product(a))
    }
}

pub fn restrict_first(s: &BipartiteState) -> ComplexMatrix {
    s.restrict_first()
}

pub fn restrict_second(s: &BipartiteState) -> ComplexMatrix {
    s.restrict_second()
}

pub fn expect(s: &BipartiteState, a: &ComplexMatrix) -> Result<C64> {
    s.expect(a)
}

/// `|ψ⁻⟩ = (|01⟩ - |10⟩)/√2`.
pub fn singlet_vector() -> Vec<C64> {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    vec![re(0.0), re(h), re(-h), re(0.0)]
}

pub fn singlet_projector() -> ComplexMatrix {
    ComplexMatrix::projector(&singlet_vector())
}

/// `p |ψ⁻⟩⟨ψ⁻| + (1 - p) 1/4` on two qubits.
pub fn make_werner(p: f64) -> Result<BipartiteState> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::OutOfRange(format!("Werner parameter p = {p} outside [0, 1]")));
    }
    let rho = &singlet_projector().scale(p) + &ComplexMatrix::identity(4).scale((1.0 - p) / 4.0);
    BipartiteState::new(BipartiteSpace::qubits(), rho)
}

pub fn make_bell() -> BipartiteState {
    BipartiteState { space: BipartiteSpace::qubits(), rho: singlet_projector() }
}

/// `σ ⊗ τ` for density matrices `σ`, `τ`.
pub fn make_product(sigma: &ComplexMatrix, tau: &ComplexMatrix) -> Result<BipartiteState> {
    validate_density(sigma)?;
    validate_density(tau)?;
    BipartiteState::new(BipartiteSpace::new(sigma.rows(), tau.rows())?, kron(sigma, tau))
}

/// Column-major fill of a seeded complex Gaussian matrix.
pub fn gaussian_matrix(rows: usize, cols: usize, rng: &mut impl rand::Rng) -> ComplexMatrix {
    let mut data = vec![C64::default(); rows * cols];
    for j in 0..cols {
        for i in 0..rows {
            let x: f64 = StandardNormal.sample(rng);
            let y: f64 = StandardNormal.sample(rng);
            data[i * cols + j] = c(x, y);
        }
    }
    ComplexMatrix::from_raw(rows, cols, data)
}

/// `G G† / Tr(G G†)` for `G` a `dim × rank` complex Gaussian matrix drawn
/// from a ChaCha8 stream seeded with `seed`.
pub fn random_density(dim: usize, rank: usize, rng: &mut impl rand::Rng) -> Result<ComplexMatrix> {
    if rank == 0 || rank > dim {
        return Err(Error::OutOfRange(format!("rank {rank} must lie in 1..={dim}")));
    }
    let g = gaussian_matrix(dim, rank, rng);
    let gg = g.matmul(&g.adjoint()).hermitian_part();
    let tr = gg.trace().re;
    Ok(gg.scale(1.0 / tr))
}

pub fn make_random_state(space: BipartiteSpace, rank: usize, seed: u64) -> Result<BipartiteState> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rho = random_density(space.dim(), rank, &mut rng)?;
    BipartiteState::new(space, rho)
}

/// Seeded Haar-ish random unit vector.
pub fn random_unit_vector(dim: usize, rng: &mut impl rand::Rng) -> Vec<C64> {
    let g = gaussian_matrix(dim, 1, rng);
    let v = g.column(0);
    let n = linalg::vnorm(&v);
    v.into_iter().map(|z| z / n).collect()
}
