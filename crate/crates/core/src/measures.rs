//! Finitely supported measures on the state space and the ⊠ construction.
//!
//! A measure `μ = Σ λᵢ δ_{ρᵢ}` with barycenter `ρ` is an [`Ensemble`]. Its ⊠
//! image replaces each member by the pair of its marginals and is stored as a
//! [`ProductEnsemble`]; the barycenter of the latter is always separable.
//!
//! Every decomposition of `ρ` is reachable through [`Decomposer`]: the
//! spectral decomposition `ρ = Σ pₖ|ψₖ⟩⟨ψₖ|` is rotated by an `m × m` unitary
//! `U = exp(X)` (the unnormalised members are `φ̃ⱼ = Σₖ conj(Uⱼₖ) √pₖ ψₖ`) and
//! the resulting pure ensemble is coarse-grained along a [`Partition`].

use crate::bipartite::{partial_trace_first, partial_trace_second, validate_density, BipartiteSpace, BipartiteState};
use crate::error::{Error, Result};
use crate::linalg::{self, c, kron, ComplexMatrix, C64};

/// Tolerance on `|Σ λᵢ - 1|`.
pub const WEIGHT_TOL: f64 = 1e-10;
/// Frobenius tolerance on `Σ λᵢ ρᵢ - ρ`.
pub const BARYCENTER_TOL: f64 = 1e-8;
/// Groups lighter than this are dropped and the rest renormalised.
pub const ZERO_WEIGHT: f64 = 1e-14;
/// Spectral weights at or below this count as outside the support.
pub const RANK_TOL: f64 = 1e-12;

/// `Σ λᵢ δ_{ρᵢ}` with its barycenter.
#[derive(Clone, Debug)]
pub struct Ensemble {
    space: BipartiteSpace,
    weights: Vec<f64>,
    members: Vec<ComplexMatrix>,
    barycenter: BipartiteState,
}

fn check_weights(weights: &[f64]) -> Result<()> {
    if weights.is_empty() {
        return Err(Error::InvalidEnsemble("no members".into()));
    }
    if let Some(w) = weights.iter().find(|w| !w.is_finite() || **w < 0.0) {
        return Err(Error::InvalidEnsemble(format!("weight {w} is negative or non-finite")));
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > WEIGHT_TOL {
        return Err(Error::InvalidEnsemble(format!("weights sum to {total:.12}, expected 1")));
    }
    Ok(())
}

fn weighted_sum(weights: &[f64], members: &[ComplexMatrix]) -> ComplexMatrix {
    let n = members[0].rows();
    let mut acc = ComplexMatrix::zeros(n, n);
    for (w, m) in weights.iter().zip(members) {
        acc = &acc + &m.scale(*w);
    }
    acc
}

impl Ensemble {
    /// Builds an ensemble whose barycenter is computed from its members.
    pub fn new(space: BipartiteSpace, weights: Vec<f64>, members: Vec<ComplexMatrix>) -> Result<Self> {
        Self::check_members(space, &weights, &members)?;
        let bary = weighted_sum(&weights, &members);
        let barycenter = BipartiteState::new(space, bary)?;
        Ok(Self { space, weights, members, barycenter })
    }

    /// Builds an ensemble that must reproduce a declared barycenter.
    pub fn with_barycenter(weights: Vec<f64>, members: Vec<ComplexMatrix>, barycenter: BipartiteState) -> Result<Self> {
        let space = barycenter.space();
        Self::check_members(space, &weights, &members)?;
        let residual = weighted_sum(&weights, &members).frobenius_distance(barycenter.rho());
        if residual > BARYCENTER_TOL {
            return Err(Error::InvalidEnsemble(format!("barycenter residual {residual:.3e} exceeds {BARYCENTER_TOL:e}")));
        }
        Ok(Self { space, weights, members, barycenter })
    }

    /// A single-point measure.
    pub fn singleton(state: BipartiteState) -> Self {
        Self { space: state.space(), weights: vec![1.0], members: vec![state.rho().clone()], barycenter: state }
    }

    fn check_members(space: BipartiteSpace, weights: &[f64], members: &[ComplexMatrix]) -> Result<()> {
        check_weights(weights)?;
        if weights.len() != members.len() {
            return Err(Error::InvalidEnsemble(format!("{} weights for {} members", weights.len(), members.len())));
        }
        for (i, m) in members.iter().enumerate() {
            if m.rows() != space.dim() || !m.is_square() {
                return Err(Error::DimensionMismatch { expected: space.dim(), found: m.rows() });
            }
            validate_density(m).map_err(|e| Error::InvalidEnsemble(format!("member {i}: {e}")))?;
        }
        Ok(())
    }

    pub fn space(&self) -> BipartiteSpace {
        self.space
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn members(&self) -> &[ComplexMatrix] {
        &self.members
    }

    pub fn barycenter(&self) -> &BipartiteState {
        &self.barycenter
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Frobenius norm of `Σ λᵢ ρᵢ - barycenter`.
    pub fn barycenter_residual(&self) -> f64 {
        weighted_sum(&self.weights, &self.members).frobenius_distance(self.barycenter.rho())
    }
}

/// The ⊠ image `Σ λᵢ δ_{r₁ρᵢ} × δ_{r₂ρᵢ}`.
#[derive(Clone, Debug)]
pub struct ProductEnsemble {
    pub space: BipartiteSpace,
    pub weights: Vec<f64>,
    pub first_marginals: Vec<ComplexMatrix>,
    pub second_marginals: Vec<ComplexMatrix>,
}

pub fn boxtimes(e: &Ensemble) -> ProductEnsemble {
    let space = e.space();
    ProductEnsemble {
        space,
        weights: e.weights.clone(),
        first_marginals: e.members.iter().map(|m| partial_trace_second(m, space)).collect(),
        second_marginals: e.members.iter().map(|m| partial_trace_first(m, space)).collect(),
    }
}

/// `Σ λᵢ r₁ρᵢ ⊗ r₂ρᵢ`.
pub fn boxtimes_barycenter(pe: &ProductEnsemble) -> BipartiteState {
    let n = pe.space.dim();
    let mut acc = ComplexMatrix::zeros(n, n);
    for ((w, a), b) in pe.weights.iter().zip(&pe.first_marginals).zip(&pe.second_marginals) {
        acc = &acc + &kron(a, b).scale(*w);
    }
    BipartiteState::new(pe.space, acc).expect("convex combination of product states is a state")
}

/// `Σ λᵢ Tr[(r₁ρᵢ ⊗ r₂ρᵢ) A]`, evaluated without forming the Kronecker products.
pub fn evaluate_boxtimes(pe: &ProductEnsemble, a: &ComplexMatrix) -> Result<C64> {
    let BipartiteSpace { d1, d2 } = pe.space;
    let n = d1 * d2;
    if a.rows() != n || a.cols() != n {
        return Err(Error::DimensionMismatch { expected: n, found: if a.rows() != n { a.rows() } else { a.cols() } });
    }
    let mut total = C64::default();
    for ((w, p), q) in pe.weights.iter().zip(&pe.first_marginals).zip(&pe.second_marginals) {
        let mut term = C64::default();
        for i1 in 0..d1 {
            for j1 in 0..d1 {
                let pij = p[(i1, j1)];
                if pij == C64::default() {
                    continue;
                }
                for i2 in 0..d2 {
                    for j2 in 0..d2 {
                        // (P⊗Q)_{(i1 i2),(j1 j2)} A_{(j1 j2),(i1 i2)}
                        term += pij * q[(i2, j2)] * a[(j1 * d2 + j2, i1 * d2 + i2)];
                    }
                }
            }
        }
        total += term * *w;
    }
    Ok(total)
}

/// Disjoint cover of `0..m` by non-empty groups.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Partition {
    m: usize,
    groups: Vec<Vec<usize>>,
}

impl Partition {
    pub fn new(m: usize, groups: Vec<Vec<usize>>) -> Result<Self> {
        let mut seen = vec![false; m];
        for g in &groups {
            if g.is_empty() {
                return Err(Error::BadPartition("empty group".into()));
            }
            for &j in g {
                if j >= m {
                    return Err(Error::BadPartition(format!("index {j} outside 0..{m}")));
                }
                if seen[j] {
                    return Err(Error::BadPartition(format!("index {j} appears twice")));
                }
                seen[j] = true;
            }
        }
        if let Some(j) = seen.iter().position(|s| !s) {
            return Err(Error::BadPartition(format!("index {j} is not covered")));
        }
        Ok(Self { m, groups })
    }

    /// Every index in its own group.
    pub fn singletons(m: usize) -> Self {
        Self { m, groups: (0..m).map(|j| vec![j]).collect() }
    }

    /// One group holding everything.
    pub fn whole(m: usize) -> Self {
        Self { m, groups: vec![(0..m).collect()] }
    }

    /// Assigns each index a label in `0..k`, dropping unused labels.
    pub fn from_labels(labels: &[usize]) -> Self {
        let k = labels.iter().copied().max().map_or(0, |x| x + 1);
        let mut groups = vec![Vec::new(); k];
        for (j, &l) in labels.iter().enumerate() {
            groups[l].push(j);
        }
        groups.retain(|g| !g.is_empty());
        Self { m: labels.len(), groups }
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn groups(&self) -> &[Vec<usize>] {
        &self.groups
    }
}

/// Number of real parameters of an `m × m` anti-Hermitian generator.
pub fn param_count(m: usize) -> usize {
    m * m
}

/// Anti-Hermitian generator from `m²` reals: the first `m` are the diagonal
/// phases `X_aa = i t_a`, followed by `(x, y)` pairs for `a < b` in row-major
/// order with `X_ab = x + iy`, `X_ba = -x + iy`.
pub fn generator_from_params(params: &[f64], m: usize) -> Result<ComplexMatrix> {
    if params.len() != param_count(m) {
        return Err(Error::DimensionMismatch { expected: param_count(m), found: params.len() });
    }
    let mut x = ComplexMatrix::zeros(m, m);
    for a in 0..m {
        x[(a, a)] = c(0.0, params[a]);
    }
    let mut idx = m;
    for a in 0..m {
        for b in (a + 1)..m {
            let (re_, im_) = (params[idx], params[idx + 1]);
            idx += 2;
            x[(a, b)] = c(re_, im_);
            x[(b, a)] = c(-re_, im_);
        }
    }
    Ok(x)
}

/// `exp(X)` through the spectral decomposition of the Hermitian `H = -iX`.
pub fn unitary_from_params(params: &[f64], m: usize) -> Result<ComplexMatrix> {
    let x = generator_from_params(params, m)?;
    let h = x.scale_c(c(0.0, -1.0));
    let eig = linalg::eigh(&h.hermitian_part())?;
    Ok(exp_i_spectral(&eig))
}

pub(crate) fn exp_i_spectral(eig: &linalg::Eigen) -> ComplexMatrix {
    let n = eig.values.len();
    let phases: Vec<C64> = eig.values.iter().map(|&t| C64::from_polar(1.0, t)).collect();
    let v = &eig.vectors;
    ComplexMatrix::from_fn(n, n, |i, j| (0..n).map(|k| v[(i, k)] * phases[k] * v[(j, k)].conj()).sum())
}

/// Spectral data of a state, reused across many decompositions.
#[derive(Clone, Debug)]
pub struct Decomposer {
    state: BipartiteState,
    /// Columns `√pₖ ψₖ` for the `rank` nonzero spectral weights.
    factor: ComplexMatrix,
}

impl Decomposer {
    pub fn new(state: &BipartiteState) -> Result<Self> {
        let eig = linalg::eigh(state.rho())?;
        let n = eig.values.len();
        let support: Vec<usize> = (0..n).rev().filter(|&k| eig.values[k] > RANK_TOL).collect();
        let cols: Vec<Vec<C64>> = support
            .iter()
            .map(|&k| {
                let s = eig.values[k].sqrt();
                eig.vector(k).into_iter().map(|z| z * s).collect()
            })
            .collect();
        Ok(Self { state: state.clone(), factor: ComplexMatrix::from_columns(&cols) })
    }

    pub fn rank(&self) -> usize {
        self.factor.cols()
    }

    pub fn state(&self) -> &BipartiteState {
        &self.state
    }

    /// `n × r` matrix whose columns are `√pₖ ψₖ`.
    pub fn factor(&self) -> &ComplexMatrix {
        &self.factor
    }

    /// Unnormalised pure members `φ̃ⱼ = Σₖ conj(Uⱼₖ) √pₖ ψₖ` for `j < m`.
    pub fn pure_vectors(&self, u: &ComplexMatrix) -> Result<Vec<Vec<C64>>> {
        let m = u.rows();
        let r = self.rank();
        if m < r {
            return Err(Error::RankTooSmall { m, rank: r });
        }
        if !u.is_square() {
            return Err(Error::NotSquare { rows: u.rows(), cols: u.cols() });
        }
        let n = self.factor.rows();
        Ok((0..m)
            .map(|j| (0..n).map(|i| (0..r).map(|k| u[(j, k)].conj() * self.factor[(i, k)]).sum()).collect())
            .collect())
    }

    /// Coarse-grains the pure ensemble produced by `u` along `partition`.
    pub fn ensemble_from_unitary(&self, u: &ComplexMatrix, partition: &Partition) -> Result<Ensemble> {
        if partition.m() != u.rows() {
            return Err(Error::BadPartition(format!("partition covers {} indices but m = {}", partition.m(), u.rows())));
        }
        let vectors = self.pure_vectors(u)?;
        let n = self.factor.rows();
        let mut weights = Vec::new();
        let mut members = Vec::new();
        for group in partition.groups() {
            let mut acc = ComplexMatrix::zeros(n, n);
            for &j in group {
                acc = &acc + &ComplexMatrix::projector(&vectors[j]);
            }
            let w = acc.trace().re;
            if w < ZERO_WEIGHT {
                continue;
            }
            weights.push(w);
            members.push(acc.scale(1.0 / w).hermitian_part());
        }
        let total: f64 = weights.iter().sum();
        for w in &mut weights {
            *w /= total;
        }
        Ensemble::with_barycenter(weights, members, self.state.clone())
    }

    pub fn ensemble(&self, params: &[f64], m: usize, partition: &Partition) -> Result<Ensemble> {
        let u = unitary_from_params(params, m)?;
        self.ensemble_from_unitary(&u, partition)
    }
}

/// Decomposition of `rho` selected by `isometry_params` (`m²` reals) and
/// coarse-grained along `partition`.
pub fn hjw_ensemble(rho: &BipartiteState, isometry_params: &[f64], m: usize, partition: &Partition) -> Result<Ensemble> {
    Decomposer::new(rho)?.ensemble(isometry_params, m, partition)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bipartite::{make_bell, make_product, make_random_state, make_werner};
    use crate::linalg::re;

    fn ket(bits: &[f64]) -> Vec<C64> {
        bits.iter().map(|&x| re(x)).collect()
    }

    fn classical_pair() -> Ensemble {
        let s00 = ComplexMatrix::projector(&ket(&[1.0, 0.0, 0.0, 0.0]));
        let s11 = ComplexMatrix::projector(&ket(&[0.0, 0.0, 0.0, 1.0]));
        Ensemble::new(BipartiteSpace::qubits(), vec![0.5, 0.5], vec![s00, s11]).unwrap()
    }

    #[test]
    fn boxtimes_of_product_singleton() {
        let sigma = ComplexMatrix::diag_real(&[0.2, 0.8]);
        let tau = ComplexMatrix::new(2, 2, vec![re(0.5), c(0.0, 0.3), c(0.0, -0.3), re(0.5)]).unwrap();
        let e = Ensemble::singleton(make_product(&sigma, &tau).unwrap());
        let pe = boxtimes(&e);
        assert_eq!(pe.weights, vec![1.0]);
        assert!(pe.first_marginals[0].max_abs_diff(&sigma) < 1e-15);
        assert!(pe.second_marginals[0].max_abs_diff(&tau) < 1e-15);
        assert!(boxtimes_barycenter(&pe).rho().max_abs_diff(&kron(&sigma, &tau)) < 1e-15);
    }

    #[test]
    fn boxtimes_of_bell() {
        let pe = boxtimes(&Ensemble::singleton(make_bell()));
        let half = ComplexMatrix::identity(2).scale(0.5);
        assert!(pe.first_marginals[0].max_abs_diff(&half) < 1e-15);
        assert!(pe.second_marginals[0].max_abs_diff(&half) < 1e-15);
        assert!(boxtimes_barycenter(&pe).rho().max_abs_diff(&ComplexMatrix::identity(4).scale(0.25)) < 1e-15);
        let v = evaluate_boxtimes(&pe, &crate::bipartite::singlet_projector()).unwrap();
        assert!((v - re(0.25)).norm() < 1e-15);
    }

    #[test]
    fn classically_correlated_is_fixed() {
        let e = classical_pair();
        let pe = boxtimes(&e);
        assert_eq!(pe.weights, vec![0.5, 0.5]);
        let p0 = ComplexMatrix::diag_real(&[1.0, 0.0]);
        let p1 = ComplexMatrix::diag_real(&[0.0, 1.0]);
        assert!(pe.first_marginals[0].max_abs_diff(&p0) < 1e-15 && pe.second_marginals[0].max_abs_diff(&p0) < 1e-15);
        assert!(pe.first_marginals[1].max_abs_diff(&p1) < 1e-15 && pe.second_marginals[1].max_abs_diff(&p1) < 1e-15);
        assert!(boxtimes_barycenter(&pe).rho().max_abs_diff(e.barycenter().rho()) < 1e-15);
        let z = ComplexMatrix::diag_real(&[1.0, -1.0]);
        let v = evaluate_boxtimes(&pe, &kron(&z, &z)).unwrap();
        assert!((v - re(1.0)).norm() < 1e-15);
        assert!((evaluate_boxtimes(&pe, &ComplexMatrix::identity(4)).unwrap() - re(1.0)).norm() < 1e-15);
    }

    #[test]
    fn evaluate_matches_barycenter_expectation() {
        let s = make_random_state(BipartiteSpace::new(2, 3).unwrap(), 6, 4).unwrap();
        let d = Decomposer::new(&s).unwrap();
        let params: Vec<f64> = (0..36).map(|k| ((k * 7 % 11) as f64 - 5.0) * 0.3).collect();
        let e = d.ensemble(&params, 6, &Partition::singletons(6)).unwrap();
        let pe = boxtimes(&e);
        let bary = boxtimes_barycenter(&pe);
        let a = make_random_state(BipartiteSpace::new(2, 3).unwrap(), 2, 9).unwrap().into_rho();
        let lhs = evaluate_boxtimes(&pe, &a).unwrap();
        let rhs = bary.expect(&a).unwrap();
        assert!((lhs - rhs).norm() < 1e-12);
        assert!(matches!(evaluate_boxtimes(&pe, &ComplexMatrix::identity(4)), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn pure_state_has_only_trivial_decomposition() {
        let bell = make_bell();
        let e = hjw_ensemble(&bell, &[0.7], 1, &Partition::singletons(1)).unwrap();
        assert_eq!(e.len(), 1);
        assert!((e.weights()[0] - 1.0).abs() < 1e-15);
        assert!(e.members()[0].max_abs_diff(bell.rho()) < 1e-12);
    }

    #[test]
    fn hadamard_rotation_of_maximally_mixed_qubit() {
        let space = BipartiteSpace::new(2, 1).unwrap();
        let state = BipartiteState::new(space, ComplexMatrix::identity(2).scale(0.5)).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let hadamard = ComplexMatrix::from_real(2, 2, &[h, h, h, -h]).unwrap();
        let d = Decomposer::new(&state).unwrap();
        let e = d.ensemble_from_unitary(&hadamard, &Partition::singletons(2)).unwrap();
        assert_eq!(e.len(), 2);
        // Eigenvectors of I/2 are arbitrary, so the two members are an
        // orthogonal pair of pure states with equal weight.
        for (w, m) in e.weights().iter().zip(e.members()) {
            assert!((w - 0.5).abs() < 1e-12);
            assert!((m.matmul(m).trace().re - 1.0).abs() < 1e-12);
        }
        assert!(e.members()[0].trace_product(&e.members()[1]).norm() < 1e-12);
        // With a definite eigenbasis the members are |+⟩ and |−⟩.
        let mut basis = d.clone();
        basis.factor = ComplexMatrix::identity(2).scale(h);
        let e = basis.ensemble_from_unitary(&hadamard, &Partition::singletons(2)).unwrap();
        let plus = ComplexMatrix::projector(&ket(&[h, h]));
        let minus = ComplexMatrix::projector(&ket(&[h, -h]));
        assert!(e.members()[0].max_abs_diff(&plus) < 1e-12);
        assert!(e.members()[1].max_abs_diff(&minus) < 1e-12);
    }

    #[test]
    fn identity_unitary_gives_spectral_ensemble() {
        let s = make_werner(0.5).unwrap();
        let e = hjw_ensemble(&s, &vec![0.0; 16], 4, &Partition::singletons(4)).unwrap();
        let mut w = e.weights().to_vec();
        w.sort_by(f64::total_cmp);
        for (got, want) in w.iter().zip([0.125, 0.125, 0.125, 0.625]) {
            assert!((got - want).abs() < 1e-12);
        }
        for m in e.members() {
            assert!((m.matmul(m).trace().re - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_weight_groups_are_dropped() {
        let s = make_bell();
        let e = hjw_ensemble(&s, &vec![0.0; 9], 3, &Partition::singletons(3)).unwrap();
        assert_eq!(e.len(), 1);
    }

    #[test]
    fn whole_partition_gives_barycenter() {
        let s = make_random_state(BipartiteSpace::qubits(), 3, 5).unwrap();
        let params: Vec<f64> = (0..25).map(|k| (k as f64 * 0.37).sin()).collect();
        let e = hjw_ensemble(&s, &params, 5, &Partition::whole(5)).unwrap();
        assert_eq!(e.len(), 1);
        assert!(e.members()[0].max_abs_diff(s.rho()) < 1e-12);
    }

    #[test]
    fn rank_and_partition_errors() {
        let s = make_werner(0.5).unwrap();
        assert!(matches!(hjw_ensemble(&s, &vec![0.0; 9], 3, &Partition::singletons(3)), Err(Error::RankTooSmall { m: 3, rank: 4 })));
        assert!(matches!(Partition::new(3, vec![vec![0, 1], vec![1, 2]]), Err(Error::BadPartition(_))));
        assert!(matches!(Partition::new(3, vec![vec![0, 1]]), Err(Error::BadPartition(_))));
        assert!(matches!(Partition::new(3, vec![vec![0, 1, 2], vec![]]), Err(Error::BadPartition(_))));
        assert!(matches!(hjw_ensemble(&s, &vec![0.0; 25], 5, &Partition::singletons(4)), Err(Error::BadPartition(_))));
        assert!(matches!(hjw_ensemble(&s, &vec![0.0; 3], 5, &Partition::singletons(5)), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn unitary_parametrisation_is_unitary() {
        let params: Vec<f64> = (0..49).map(|k| ((k * 13) % 17) as f64 * 0.21 - 1.5).collect();
        let u = unitary_from_params(&params, 7).unwrap();
        assert!(u.adjoint().matmul(&u).max_abs_diff(&ComplexMatrix::identity(7)) < 1e-12);
        assert!(unitary_from_params(&vec![0.0; 9], 3).unwrap().max_abs_diff(&ComplexMatrix::identity(3)) < 1e-14);
    }

    #[test]
    fn ensemble_validation() {
        let space = BipartiteSpace::qubits();
        let s = make_werner(0.2).unwrap();
        assert!(Ensemble::new(space, vec![0.5, 0.4], vec![s.rho().clone(), s.rho().clone()]).is_err());
        assert!(Ensemble::new(space, vec![1.0], vec![]).is_err());
        let bell = make_bell();
        assert!(Ensemble::with_barycenter(vec![1.0], vec![s.rho().clone()], bell).is_err());
        assert!(Ensemble::new(space, vec![1.1, -0.1], vec![s.rho().clone(), s.rho().clone()]).is_err());
    }
}
