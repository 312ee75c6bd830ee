//! Finite-dimensional GNS constructions and local decompositions of positive
//! unital maps `α: M_d → M_d`.
//!
//! A state `ω` on `M_d` is given by its density `σ` (`ω(a) = Tr(σa)`). The
//! left construction quotients `M_d` by the kernel of `⟨a, b⟩ = ω(a†b)` and
//! lets `M_d` act by left multiplication; the right construction uses
//! `⟨a, b⟩ = ω(ba†)` and right multiplication, which reverses products.
//! Classes are stored in orthonormal coordinates so adjoints are conjugate
//! transposes.
//!
//! Matrices are vectorised row-major, so `vec(E_kl)` is the basis vector
//! `k·d + l` and Hilbert–Schmidt vectors live in `C^{d²}`.

use crate::bipartite::validate_density;
use crate::error::{Error, Result};
use crate::linalg::{self, realify_vec, vdist, vnorm, ComplexMatrix, C64};
use crate::posmaps::{PositiveMapSpec, UNITAL_TOL};

/// Gram eigenvalues below this fraction of the largest span the kernel.
pub const NULL_REL_TOL: f64 = 1e-12;
/// A vector of norm below this in the GNS space counts as null.
pub const NULL_VECTOR_TOL: f64 = 1e-10;
/// Largest `‖α(a)ρ^{1/2}‖` tolerated for a null `a`.
pub const IMAGE_TOL: f64 = 1e-8;
pub const RESIDUAL_TOL: f64 = 1e-9;
pub const NORM_TOL: f64 = 1e-9;
pub const OMEGA_TOL: f64 = 1e-10;

#[derive(Clone, Debug)]
pub struct GnsRepresentation {
    pub d: usize,
    pub dim: usize,
    /// `dim × d²`: coordinates of the class of `a` are `basis_map · vec(a)`.
    pub basis_map: ComplexMatrix,
    /// `d² × dim`: `vec` of a representative for each coordinate vector.
    pub representatives: ComplexMatrix,
    /// `π(E_kl)` at index `k·d + l`.
    pub unit_images: Vec<ComplexMatrix>,
    pub omega_vec: Vec<C64>,
    /// Right-kernel construction acting by right multiplication.
    pub anti: bool,
    pub density: ComplexMatrix,
}

impl GnsRepresentation {
    /// Coordinates of `a + I_ω`.
    pub fn class_of(&self, a: &ComplexMatrix) -> Vec<C64> {
        self.basis_map.matvec(&a.vectorize())
    }

    /// `π(a)`, linear in `a`.
    pub fn rep(&self, a: &ComplexMatrix) -> ComplexMatrix {
        let mut out = ComplexMatrix::zeros(self.dim, self.dim);
        for (p, z) in a.data().iter().enumerate() {
            if *z != C64::default() {
                out = &out + &self.unit_images[p].scale_c(*z);
            }
        }
        out
    }

    /// `ω(a) = Tr(σa)`.
    pub fn state(&self, a: &ComplexMatrix) -> C64 {
        self.density.trace_product(a)
    }
}

fn check_square(m: &ComplexMatrix, d: usize) -> Result<()> {
    if m.rows() != d || m.cols() != d {
        let found = if m.rows() != d { m.rows() } else { m.cols() };
        return Err(Error::DimensionMismatch { expected: d, found });
    }
    Ok(())
}

fn build_gns(d: usize, sigma: &ComplexMatrix, anti: bool) -> Result<GnsRepresentation> {
    check_square(sigma, d)?;
    validate_density(sigma).map_err(|e| match e {
        Error::InvalidDensityMatrix(s) => Error::InvalidDensityMatrix(s),
        other => Error::InvalidDensityMatrix(other.to_string()),
    })?;
    let n = d * d;
    // p = (i, j), q = (k, l)
    let gram = ComplexMatrix::from_fn(n, n, |p, q| {
        let (i, j, k, l) = (p / d, p % d, q / d, q % d);
        if anti {
            // ω(E_kl E_ji) = δ_lj σ_ik
            if l == j { sigma[(i, k)] } else { C64::default() }
        } else {
            // ω(E_ji E_kl) = δ_ik σ_lj
            if i == k { sigma[(l, j)] } else { C64::default() }
        }
    });
    let eig = linalg::eigh(&gram.hermitian_part())?;
    let max = eig.values.last().copied().unwrap_or(0.0).max(0.0);
    let kept: Vec<usize> = (0..n).filter(|&k| eig.values[k] > NULL_REL_TOL * max).collect();
    let dim = kept.len();
    let basis_map = ComplexMatrix::from_fn(dim, n, |r, p| eig.vectors[(p, kept[r])].conj() * eig.values[kept[r]].sqrt());
    let representatives = ComplexMatrix::from_fn(n, dim, |p, r| eig.vectors[(p, kept[r])] / eig.values[kept[r]].sqrt());
    let reps: Vec<ComplexMatrix> = (0..dim).map(|r| ComplexMatrix::from_vectorized(d, d, &representatives.column(r))).collect();
    let unit_images = (0..n)
        .map(|p| {
            let c = ComplexMatrix::unit(d, p / d, p % d);
            let cols: Vec<Vec<C64>> = reps
                .iter()
                .map(|a| {
                    let prod = if anti { a.matmul(&c) } else { c.matmul(a) };
                    basis_map.matvec(&prod.vectorize())
                })
                .collect();
            ComplexMatrix::from_columns(&cols)
        })
        .collect::<Vec<_>>();
    let omega_vec = basis_map.matvec(&ComplexMatrix::identity(d).vectorize());
    Ok(GnsRepresentation { d, dim, basis_map, representatives, unit_images, omega_vec, anti, density: sigma.hermitian_part() })
}

/// GNS representation of `ω(a) = Tr(σa)` by left multiplication.
pub fn gns_left(d: usize, omega_density: &ComplexMatrix) -> Result<GnsRepresentation> {
    build_gns(d, omega_density, false)
}

/// Right-kernel anti-representation `π′(c)(a + I) = ac + I`.
pub fn gns_right(d: usize, omega_density: &ComplexMatrix) -> Result<GnsRepresentation> {
    build_gns(d, omega_density, true)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Construction {
    /// Real-linear `V` on self-adjoint elements, `‖V‖ ≤ 1`.
    SelfAdjoint,
    /// Complex `V` on the direct sum `π ⊕ π′`, `‖V‖ ≤ √2`.
    DirectSum,
}

#[derive(Clone, Debug)]
pub struct LocalDecomposition {
    pub construction: Construction,
    pub d: usize,
    pub alpha: PositiveMapSpec,
    pub rho: ComplexMatrix,
    pub rho_sqrt: ComplexMatrix,
    pub left: GnsRepresentation,
    pub right: Option<GnsRepresentation>,
    /// Cyclic vector; realified `[Re; Im]` for [`Construction::SelfAdjoint`].
    pub tilde_omega: Vec<C64>,
    /// Intertwiner into `vec(M_d)`; a real matrix acting on realified
    /// vectors for [`Construction::SelfAdjoint`].
    pub v: ComplexMatrix,
    pub norm_bound: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct VerificationReport {
    pub residual_max: f64,
    pub v_norm: f64,
    pub dim_gns: usize,
    pub bound: f64,
    /// `‖V†ρ^{1/2} - Ω̃‖`.
    pub omega_residual: f64,
    pub passed: bool,
}

/// Orthonormal basis of the self-adjoint part of `M_d` (Hilbert–Schmidt).
pub fn hermitian_basis(d: usize) -> Vec<ComplexMatrix> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut out = Vec::with_capacity(d * d);
    for k in 0..d {
        out.push(ComplexMatrix::unit(d, k, k));
    }
    for k in 0..d {
        for l in (k + 1)..d {
            let ekl = ComplexMatrix::unit(d, k, l);
            let elk = ComplexMatrix::unit(d, l, k);
            out.push((&ekl + &elk).scale(s));
            out.push((&ekl - &elk).scale_c(C64::new(0.0, s)));
        }
    }
    out
}

/// Density `σ` with `Tr(σa) = Tr(ρα(a))`.
pub fn induced_state(alpha: &PositiveMapSpec, rho: &ComplexMatrix) -> ComplexMatrix {
    let d = alpha.d;
    ComplexMatrix::from_fn(d, d, |j, i| rho.trace_product(&alpha.image_of_unit(i, j)))
}

fn prepare(alpha: &PositiveMapSpec, rho: &ComplexMatrix) -> Result<(ComplexMatrix, ComplexMatrix)> {
    let d = alpha.d;
    check_square(rho, d)?;
    validate_density(rho)?;
    let deviation = alpha.unital_deviation();
    if deviation > UNITAL_TOL {
        return Err(Error::MapNotUnital { deviation });
    }
    let sigma = induced_state(alpha, rho).hermitian_part();
    let eig = linalg::eigh(&sigma)?;
    if eig.values[0] < -linalg::PSD_TOL {
        return Err(Error::WellDefinednessFailure {
            detail: format!("induced functional takes the value {:.3e} on a projection", eig.values[0]),
            element: Box::new(ComplexMatrix::projector(&eig.vector(0))),
        });
    }
    let rho_sqrt = linalg::psd_sqrt(&rho.hermitian_part())?;
    Ok((sigma, rho_sqrt))
}

/// `vec(α(a)ρ^{1/2})`.
fn image_vec(alpha: &PositiveMapSpec, rho_sqrt: &ComplexMatrix, a: &ComplexMatrix) -> Result<Vec<C64>> {
    Ok(alpha.apply(a)?.matmul(rho_sqrt).vectorize())
}

/// `V = T K⁺`, after checking that `T` vanishes on the kernel of `K`.
fn intertwiner(k: &ComplexMatrix, t: &ComplexMatrix, element: impl Fn(&[C64]) -> ComplexMatrix) -> Result<ComplexMatrix> {
    let (k_pinv, null) = linalg::pseudo_inverse(k, NULL_REL_TOL)?;
    for nv in null {
        if vnorm(&k.matvec(&nv)) < NULL_VECTOR_TOL {
            let image = vnorm(&t.matvec(&nv));
            if image > IMAGE_TOL {
                return Err(Error::WellDefinednessFailure {
                    detail: format!("element with null GNS vector has ‖α(a)ρ^{{1/2}}‖ = {image:.3e}"),
                    element: Box::new(element(&nv)),
                });
            }
        }
    }
    Ok(t.matmul(&k_pinv))
}

/// Real-linear `V` with `Vπ(a)Ω = α(a)ρ^{1/2}` for self-adjoint `a`, zero
/// off the real span of those vectors.
pub fn build_self_adjoint(alpha: &PositiveMapSpec, rho: &ComplexMatrix) -> Result<LocalDecomposition> {
    let d = alpha.d;
    let (sigma, rho_sqrt) = prepare(alpha, rho)?;
    let left = gns_left(d, &sigma)?;
    let basis = hermitian_basis(d);
    let mut k_cols = Vec::with_capacity(basis.len());
    let mut t_cols = Vec::with_capacity(basis.len());
    for h in &basis {
        k_cols.push(realify_vec(&left.class_of(h)));
        t_cols.push(realify_vec(&image_vec(alpha, &rho_sqrt, h)?));
    }
    let k = ComplexMatrix::from_columns(&k_cols);
    let t = ComplexMatrix::from_columns(&t_cols);
    let v = intertwiner(&k, &t, |nv| {
        basis.iter().zip(nv).fold(ComplexMatrix::zeros(d, d), |acc, (h, z)| &acc + &h.scale(z.re))
    })?;
    let tilde_omega = realify_vec(&left.omega_vec);
    Ok(LocalDecomposition {
        construction: Construction::SelfAdjoint,
        d,
        alpha: alpha.clone(),
        rho: rho.hermitian_part(),
        rho_sqrt,
        left,
        right: None,
        tilde_omega,
        v,
        norm_bound: 1.0,
    })
}

/// Complex `V` on `H_ω ⊕ H′_ω` (inner product halved) with
/// `Vπ̃(a)Ω̃ = α(a)ρ^{1/2}` for all `a`, zero off the cyclic subspace.
pub fn build_direct_sum(alpha: &PositiveMapSpec, rho: &ComplexMatrix) -> Result<LocalDecomposition> {
    let d = alpha.d;
    let (sigma, rho_sqrt) = prepare(alpha, rho)?;
    let left = gns_left(d, &sigma)?;
    let right = gns_right(d, &sigma)?;
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut k_cols = Vec::with_capacity(d * d);
    let mut t_cols = Vec::with_capacity(d * d);
    for p in 0..d * d {
        let e = ComplexMatrix::unit(d, p / d, p % d);
        let col: Vec<C64> = left.class_of(&e).into_iter().chain(right.class_of(&e)).map(|z| z * s).collect();
        k_cols.push(col);
        t_cols.push(image_vec(alpha, &rho_sqrt, &e)?);
    }
    let k = ComplexMatrix::from_columns(&k_cols);
    let t = ComplexMatrix::from_columns(&t_cols);
    let v = intertwiner(&k, &t, |nv| ComplexMatrix::from_vectorized(d, d, nv))?;
    let tilde_omega = left.omega_vec.iter().chain(&right.omega_vec).map(|z| z * s).collect();
    Ok(LocalDecomposition {
        construction: Construction::DirectSum,
        d,
        alpha: alpha.clone(),
        rho: rho.hermitian_part(),
        rho_sqrt,
        left,
        right: Some(right),
        tilde_omega,
        v,
        norm_bound: std::f64::consts::SQRT_2,
    })
}

impl LocalDecomposition {
    /// `π̃(a)`: `π(a) ⊕ π′(a)` for the direct sum, the realified `π(a)`
    /// otherwise.
    pub fn tilde_rep(&self, a: &ComplexMatrix) -> ComplexMatrix {
        match &self.right {
            Some(right) => {
                let (pl, pr) = (self.left.rep(a), right.rep(a));
                let (nl, nr) = (pl.rows(), pr.rows());
                ComplexMatrix::from_fn(nl + nr, nl + nr, |i, j| match (i < nl, j < nl) {
                    (true, true) => pl[(i, j)],
                    (false, false) => pr[(i - nl, j - nl)],
                    _ => C64::default(),
                })
            }
            None => self.left.rep(a).realify(),
        }
    }

    /// Complex dimension of the space `V` is defined on.
    pub fn dim_gns(&self) -> usize {
        self.left.dim + self.right.as_ref().map_or(0, |r| r.dim)
    }

    pub fn v_norm(&self) -> f64 {
        linalg::operator_norm(&self.v).expect("intertwiner is small")
    }

    fn encode(&self, v: Vec<C64>) -> Vec<C64> {
        match self.construction {
            Construction::SelfAdjoint => realify_vec(&v),
            Construction::DirectSum => v,
        }
    }

    /// `V†ρ^{1/2}`.
    pub fn adjoint_of_rho_sqrt(&self) -> Vec<C64> {
        self.v.adjoint().matvec(&self.encode(self.rho_sqrt.vectorize()))
    }

    /// `‖Vπ̃(a)V†ρ^{1/2} - α(a)ρ^{1/2}‖`.
    pub fn intertwining_residual(&self, a: &ComplexMatrix) -> Result<f64> {
        let lhs = self.v.matvec(&self.tilde_rep(a).matvec(&self.adjoint_of_rho_sqrt()));
        let rhs = self.encode(image_vec(&self.alpha, &self.rho_sqrt, a)?);
        Ok(vdist(&lhs, &rhs))
    }

    /// Elements the intertwining relation is checked on: all matrix units,
    /// or the self-adjoint basis for [`Construction::SelfAdjoint`].
    pub fn verification_basis(&self) -> Vec<ComplexMatrix> {
        let d = self.d;
        match self.construction {
            Construction::SelfAdjoint => hermitian_basis(d),
            Construction::DirectSum => (0..d * d).map(|p| ComplexMatrix::unit(d, p / d, p % d)).collect(),
        }
    }

    pub fn verify(&self) -> Result<VerificationReport> {
        let mut residual_max: f64 = 0.0;
        for a in self.verification_basis() {
            residual_max = residual_max.max(self.intertwining_residual(&a)?);
        }
        let v_norm = self.v_norm();
        let omega_residual = vdist(&self.adjoint_of_rho_sqrt(), &self.tilde_omega);
        let passed = residual_max <= RESIDUAL_TOL && v_norm <= self.norm_bound + NORM_TOL && omega_residual <= OMEGA_TOL;
        Ok(VerificationReport { residual_max, v_norm, dim_gns: self.dim_gns(), bound: self.norm_bound, omega_residual, passed })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bipartite::random_density;
    use crate::linalg::vdot;
    use crate::posmaps::{
        builtin_maps, convex_combination, depolarizing_map, identity_map, non_positive_control, over_reduction_control, transpose_map,
    };
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(d: usize, rng: &mut ChaCha8Rng) -> ComplexMatrix {
        crate::bipartite::gaussian_matrix(d, d, rng)
    }

    fn units(d: usize) -> Vec<ComplexMatrix> {
        (0..d * d).map(|p| ComplexMatrix::unit(d, p / d, p % d)).collect()
    }

    #[test]
    fn faithful_tracial_state() {
        let g = gns_left(2, &ComplexMatrix::identity(2).scale(0.5)).unwrap();
        assert_eq!(g.dim, 4);
        let a = ComplexMatrix::from_real(2, 2, &[1.0, 2.0, -1.0, 0.5]).unwrap();
        let b = ComplexMatrix::from_real(2, 2, &[0.0, 1.0, 3.0, -2.0]).unwrap();
        let inner = vdot(&g.class_of(&a), &g.class_of(&b));
        assert!((inner - a.adjoint().matmul(&b).trace() * 0.5).norm() < 1e-12);
        assert!((vnorm(&g.omega_vec) - 1.0).abs() < 1e-12);
        let e01 = g.rep(&ComplexMatrix::unit(2, 0, 1));
        let e10 = g.rep(&ComplexMatrix::unit(2, 1, 0));
        assert!(e01.matmul(&e10).max_abs_diff(&g.rep(&ComplexMatrix::unit(2, 0, 0))) < 1e-12);
    }

    #[test]
    fn pure_state_halves_dimension() {
        let g = gns_left(2, &ComplexMatrix::unit(2, 0, 0)).unwrap();
        assert_eq!(g.dim, 2);
        let r = gns_right(2, &ComplexMatrix::unit(2, 0, 0)).unwrap();
        assert_eq!(r.dim, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let sigma = random_density(3, 2, &mut rng).unwrap();
        assert_eq!(gns_left(3, &sigma).unwrap().dim, 6);
        assert!(matches!(gns_left(2, &ComplexMatrix::identity(2)), Err(Error::InvalidDensityMatrix(_))));
    }

    #[test]
    fn representation_invariants() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for d in [2, 3] {
            for rank in [1, d] {
                let sigma = random_density(d, rank, &mut rng).unwrap();
                for g in [gns_left(d, &sigma).unwrap(), gns_right(d, &sigma).unwrap()] {
                    for a in units(d) {
                        let lhs = vdot(&g.omega_vec, &g.rep(&a).matvec(&g.omega_vec));
                        assert!((lhs - g.state(&a)).norm() < 1e-12);
                        assert!(g.rep(&a.adjoint()).max_abs_diff(&g.rep(&a).adjoint()) < 1e-12);
                    }
                    for _ in 0..5 {
                        let (a, b) = (random_matrix(d, &mut rng), random_matrix(d, &mut rng));
                        let prod = g.rep(&a.matmul(&b));
                        let expected = if g.anti { g.rep(&b).matmul(&g.rep(&a)) } else { g.rep(&a).matmul(&g.rep(&b)) };
                        assert!(prod.max_abs_diff(&expected) < 1e-10);
                    }
                }
            }
        }
    }

    #[test]
    fn right_representation_reverses_order() {
        let r = gns_right(2, &ComplexMatrix::identity(2).scale(0.5)).unwrap();
        assert_eq!(r.dim, 4);
        let e01 = r.rep(&ComplexMatrix::unit(2, 0, 1));
        assert!(e01.matmul(&e01).max_abs() < 1e-12);
        let e10 = ComplexMatrix::unit(2, 1, 0);
        let e01m = ComplexMatrix::unit(2, 0, 1);
        let lhs = r.rep(&e01m.matmul(&e10));
        assert!(lhs.max_abs_diff(&r.rep(&e10).matmul(&r.rep(&e01m))) < 1e-12);
    }

    #[test]
    fn self_adjoint_examples() {
        let ld = build_self_adjoint(&identity_map(2), &ComplexMatrix::identity(2).scale(0.5)).unwrap();
        let rep = ld.verify().unwrap();
        assert!(rep.residual_max <= 1e-12 && (rep.v_norm - 1.0).abs() < 1e-12 && rep.passed, "{rep:?}");
        let vtv = ld.v.adjoint().matmul(&ld.v);
        assert!(vtv.matmul(&vtv).max_abs_diff(&vtv) < 1e-12);
        assert!((vtv.trace().re - 4.0).abs() < 1e-12);

        let rep = build_self_adjoint(&transpose_map(2), &ComplexMatrix::diag_real(&[0.75, 0.25])).unwrap().verify().unwrap();
        assert!(rep.passed && rep.v_norm <= 1.0 + 1e-9, "{rep:?}");

        let rep = build_self_adjoint(&depolarizing_map(2, 0.0).unwrap(), &ComplexMatrix::identity(2).scale(0.5)).unwrap().verify().unwrap();
        assert!(rep.passed && rep.omega_residual <= 1e-10, "{rep:?}");
    }

    #[test]
    fn direct_sum_examples() {
        let rep = build_direct_sum(&identity_map(2), &ComplexMatrix::identity(2).scale(0.5)).unwrap().verify().unwrap();
        assert!(rep.residual_max <= 1e-12 && rep.passed, "{rep:?}");
        let rep = build_direct_sum(&transpose_map(2), &ComplexMatrix::diag_real(&[0.75, 0.25])).unwrap().verify().unwrap();
        assert!(rep.passed && rep.v_norm <= 1.41422, "{rep:?}");
        let mix = convex_combination(&[(0.5, &identity_map(3)), (0.5, &transpose_map(3))], "mix").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let rho = random_density(3, 3, &mut rng).unwrap();
        let rep = build_direct_sum(&mix, &rho).unwrap().verify().unwrap();
        assert!(rep.passed && rep.omega_residual <= 1e-10, "{rep:?}");
    }

    #[test]
    fn builtin_maps_decompose() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for d in [2, 3] {
            for alpha in builtin_maps(d) {
                for _ in 0..3 {
                    let rho = random_density(d, d, &mut rng).unwrap();
                    let rep = build_direct_sum(&alpha, &rho).unwrap().verify().unwrap();
                    assert!(rep.passed, "{} {rep:?}", alpha.label());
                    let rep = build_self_adjoint(&alpha, &rho).unwrap().verify().unwrap();
                    assert!(rep.passed, "{} {rep:?}", alpha.label());
                }
            }
        }
    }

    #[test]
    fn rank_deficient_state() {
        let rho = ComplexMatrix::unit(3, 0, 0);
        for alpha in builtin_maps(3) {
            let rep = build_direct_sum(&alpha, &rho).unwrap().verify().unwrap();
            assert!(rep.passed, "{} {rep:?}", alpha.label());
        }
    }

    #[test]
    fn direct_sum_is_jordan() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let rho = random_density(3, 3, &mut rng).unwrap();
        let ld = build_direct_sum(&transpose_map(3), &rho).unwrap();
        for _ in 0..5 {
            let a = random_matrix(3, &mut rng).hermitian_part();
            let pa = ld.tilde_rep(&a);
            assert!(ld.tilde_rep(&a.matmul(&a)).max_abs_diff(&pa.matmul(&pa)) < 1e-10);
            assert!(pa.max_abs_diff(&pa.adjoint()) < 1e-12);
        }
    }

    #[test]
    fn negative_controls_fail() {
        let rho = ComplexMatrix::diag_real(&[0.9, 0.1]);
        assert!(matches!(build_direct_sum(&non_positive_control(2), &rho), Err(Error::MapNotUnital { .. })));
        let err = build_direct_sum(&over_reduction_control(2), &rho).unwrap_err();
        match err {
            Error::WellDefinednessFailure { element, .. } => assert_eq!(element.rows(), 2),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(build_self_adjoint(&over_reduction_control(2), &rho), Err(Error::WellDefinednessFailure { .. })));
        assert!(matches!(build_direct_sum(&identity_map(2), &ComplexMatrix::identity(3)), Err(Error::DimensionMismatch { .. })));
    }
}
