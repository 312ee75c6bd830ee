//! Linear maps on `M_d` stored by their Choi matrices, their action on the
//! first tensor factor, the partial transpose, and the Kadison-type
//! inequality `α(a†a + aa†) ≥ α(a†)α(a) + α(a)α(a†)`.
//!
//! Choi convention: `C = Σ_{kl} E_{kl} ⊗ α(E_{kl})`, so block `(k, l)` of `C`
//! (rows `k·d..k·d+d`, columns `l·d..l·d+d`) is `α(E_{kl})`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::bipartite::{gaussian_matrix, random_unit_vector, BipartiteSpace, BipartiteState};
use crate::error::{Error, Result};
use crate::linalg::{self, eigh, re, ComplexMatrix, C64, HERMITIAN_TOL};

/// Tolerance on `α(1) = 1`.
pub const UNITAL_TOL: f64 = 1e-10;
/// `⟨φ|α(|ψ⟩⟨ψ|)|φ⟩` below this refutes positivity.
pub const POSITIVITY_TOL: f64 = 1e-9;

#[derive(Clone, Debug)]
pub struct PositiveMapSpec {
    pub d: usize,
    pub choi: ComplexMatrix,
    pub name: Option<String>,
    pub unital_checked: bool,
    pub positive_checked: bool,
}

impl PositiveMapSpec {
    /// Wraps a Choi matrix. Fails unless it is `d² × d²` and Hermitian
    /// (the map preserves adjoints). Unitality is checked here; positivity
    /// only by [`PositiveMapSpec::verify_positivity`].
    pub fn new(d: usize, choi: ComplexMatrix, name: Option<String>) -> Result<Self> {
        if d == 0 || choi.rows() != d * d || choi.cols() != d * d {
            return Err(Error::InvalidMap(format!("Choi matrix of a map on M_{d} must be {0}x{0}, got {1}x{2}", d * d, choi.rows(), choi.cols())));
        }
        let dev = choi.hermiticity_deviation();
        if dev > HERMITIAN_TOL {
            return Err(Error::InvalidMap(format!("Choi matrix is not Hermitian (deviation {dev:.3e}); the map does not preserve adjoints")));
        }
        let mut spec = Self { d, choi: choi.hermitian_part(), name, unital_checked: false, positive_checked: false };
        spec.unital_checked = spec.unital_deviation() <= UNITAL_TOL;
        Ok(spec)
    }

    /// Builds the Choi matrix by evaluating `f` on matrix units.
    pub fn from_fn(d: usize, name: &str, f: impl Fn(&ComplexMatrix) -> ComplexMatrix) -> Result<Self> {
        let mut choi = ComplexMatrix::zeros(d * d, d * d);
        for k in 0..d {
            for l in 0..d {
                let img = f(&ComplexMatrix::unit(d, k, l));
                if img.rows() != d || img.cols() != d {
                    return Err(Error::InvalidMap(format!("image of E_{k}{l} is {}x{}", img.rows(), img.cols())));
                }
                for i in 0..d {
                    for j in 0..d {
                        choi[(k * d + i, l * d + j)] = img[(i, j)];
                    }
                }
            }
        }
        Self::new(d, choi, Some(name.to_string()))
    }

    pub fn label(&self) -> &str {
        self.name.as_deref().unwrap_or("unnamed")
    }

    /// `α(E_{kl})`.
    pub fn image_of_unit(&self, k: usize, l: usize) -> ComplexMatrix {
        let d = self.d;
        ComplexMatrix::from_fn(d, d, |i, j| self.choi[(k * d + i, l * d + j)])
    }

    /// `max |α(1) - 1|`.
    pub fn unital_deviation(&self) -> f64 {
        self.apply_unchecked(&ComplexMatrix::identity(self.d)).max_abs_diff(&ComplexMatrix::identity(self.d))
    }

    /// `Tr α(x) = Tr x` for all `x`, checked on matrix units.
    pub fn is_trace_preserving(&self, tol: f64) -> bool {
        (0..self.d).all(|k| (0..self.d).all(|l| {
            let t = self.image_of_unit(k, l).trace();
            let want = if k == l { 1.0 } else { 0.0 };
            (t - re(want)).norm() <= tol
        }))
    }

    fn apply_unchecked(&self, x: &ComplexMatrix) -> ComplexMatrix {
        let d = self.d;
        let mut out = ComplexMatrix::zeros(d, d);
        for k in 0..d {
            for l in 0..d {
                let xkl = x[(k, l)];
                if xkl == C64::default() {
                    continue;
                }
                for i in 0..d {
                    for j in 0..d {
                        out[(i, j)] += xkl * self.choi[(k * d + i, l * d + j)];
                    }
                }
            }
        }
        out
    }

    pub fn apply(&self, x: &ComplexMatrix) -> Result<ComplexMatrix> {
        if x.rows() != self.d || x.cols() != self.d {
            return Err(Error::DimensionMismatch { expected: self.d, found: if x.rows() != self.d { x.rows() } else { x.cols() } });
        }
        Ok(self.apply_unchecked(x))
    }

    /// `(α ⊗ id)(m)` for `m` on `C^d ⊗ C^{d2}`.
    pub fn apply_tensor_id_matrix(&self, m: &ComplexMatrix, d2: usize) -> Result<ComplexMatrix> {
        let d = self.d;
        if m.rows() != d * d2 || m.cols() != d * d2 {
            return Err(Error::DimensionMismatch { expected: d * d2, found: m.rows() });
        }
        let mut out = ComplexMatrix::zeros(d * d2, d * d2);
        for k in 0..d {
            for l in 0..d {
                let img = self.image_of_unit(k, l);
                for i in 0..d {
                    for j in 0..d {
                        let w = img[(i, j)];
                        if w == C64::default() {
                            continue;
                        }
                        for a in 0..d2 {
                            for b in 0..d2 {
                                out[(i * d2 + a, j * d2 + b)] += w * m[(k * d2 + a, l * d2 + b)];
                            }
                        }
                    }
                }
            }
        }
        Ok(out)
    }

    /// Samples pure-state pairs to look for `⟨φ|α(|ψ⟩⟨ψ|)|φ⟩ < 0`, and sets
    /// `positive_checked` when none is found.
    pub fn verify_positivity(&mut self, n_samples: usize, seed: u64) -> PositivityReport {
        let report = check_positivity(self, n_samples, seed);
        self.positive_checked = report.positive;
        report
    }

    /// Composite with a unitary conjugation, `x ↦ u α(x) u†`.
    pub fn conjugated(&self, u: &ComplexMatrix, name: &str) -> Result<Self> {
        let ud = u.adjoint();
        let mut out = Self::from_fn(self.d, name, |x| u.matmul(&self.apply_unchecked(x)).matmul(&ud))?;
        out.positive_checked = self.positive_checked;
        Ok(out)
    }
}

pub fn apply_map(alpha: &PositiveMapSpec, x: &ComplexMatrix) -> Result<ComplexMatrix> {
    alpha.apply(x)
}

/// `(α ⊗ id₂)(ρ)`, acting on the first factor.
pub fn apply_tensor_id(alpha: &PositiveMapSpec, s: &BipartiteState) -> Result<ComplexMatrix> {
    let space = s.space();
    if alpha.d != space.d1 {
        return Err(Error::DimensionMismatch { expected: space.d1, found: alpha.d });
    }
    alpha.apply_tensor_id_matrix(s.rho(), space.d2)
}

/// Transpose on the first factor of a `d1·d2`-square matrix.
pub fn partial_transpose_matrix(m: &ComplexMatrix, space: BipartiteSpace) -> ComplexMatrix {
    let BipartiteSpace { d1, d2 } = space;
    ComplexMatrix::from_fn(d1 * d2, d1 * d2, |r, col| {
        let (i, a) = (r / d2, r % d2);
        let (j, b) = (col / d2, col % d2);
        m[(j * d2 + a, i * d2 + b)]
    })
}

pub fn partial_transpose(s: &BipartiteState) -> ComplexMatrix {
    partial_transpose_matrix(s.rho(), s.space())
}

pub fn ppt_min_eigenvalue(s: &BipartiteState) -> f64 {
    eigh(&partial_transpose(s).hermitian_part()).expect("eigensolver on a small Hermitian matrix").values[0]
}

/// Minimum eigenvalue of `α(a†a + aa†) - α(a†)α(a) - α(a)α(a†)`.
///
/// The hypotheses (unital, positive) are not enforced so that the inequality
/// can be probed on maps that violate them.
pub fn kadison_defect(alpha: &PositiveMapSpec, a: &ComplexMatrix) -> Result<f64> {
    let defect = kadison_defect_matrix(alpha, a)?;
    Ok(eigh(&defect.hermitian_part())?.values[0])
}

pub fn kadison_defect_matrix(alpha: &PositiveMapSpec, a: &ComplexMatrix) -> Result<ComplexMatrix> {
    let ad = a.adjoint();
    let lhs = alpha.apply(&(&ad.matmul(a) + &a.matmul(&ad)))?;
    let fa = alpha.apply(a)?;
    let fad = alpha.apply(&ad)?;
    let rhs = &fad.matmul(&fa) + &fa.matmul(&fad);
    Ok(&lhs - &rhs)
}

/// Minimum Kadison defect over `samples` seeded complex Gaussian `a`.
pub fn kadison_scan(alpha: &PositiveMapSpec, samples: usize, seed: u64) -> Result<KadisonReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = f64::INFINITY;
    let mut worst_index = 0;
    for s in 0..samples {
        let a = gaussian_matrix(alpha.d, alpha.d, &mut rng);
        let v = kadison_defect(alpha, &a)?;
        if v < worst {
            worst = v;
            worst_index = s;
        }
    }
    Ok(KadisonReport { samples, min_defect: worst, worst_sample: worst_index })
}

#[derive(Clone, Debug)]
pub struct KadisonReport {
    pub samples: usize,
    pub min_defect: f64,
    pub worst_sample: usize,
}

#[derive(Clone, Debug)]
pub struct PositivityReport {
    pub positive: bool,
    /// Smallest `⟨φ|α(|ψ⟩⟨ψ|)|φ⟩` found, with `φ` the minimising eigenvector.
    pub min_value: f64,
    /// `(ψ, φ)` attaining `min_value`.
    pub witness: (Vec<C64>, Vec<C64>),
}

fn min_image_eigen(alpha: &PositiveMapSpec, psi: &[C64]) -> (f64, Vec<C64>) {
    let img = alpha.apply_unchecked(&ComplexMatrix::projector(psi)).hermitian_part();
    let eig = eigh(&img).expect("eigensolver on a small Hermitian matrix");
    (eig.values[0], eig.vector(0))
}

/// Random pure `ψ` followed by a shrinking-step hill climb on the worst few.
/// A negative result is a certificate; a positive one is only evidence.
pub fn check_positivity(alpha: &PositiveMapSpec, n_samples: usize, seed: u64) -> PositivityReport {
    let d = alpha.d;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut candidates: Vec<(f64, Vec<C64>, Vec<C64>)> = Vec::with_capacity(n_samples + d);
    for k in 0..d {
        let mut e = vec![C64::default(); d];
        e[k] = re(1.0);
        let (v, phi) = min_image_eigen(alpha, &e);
        candidates.push((v, e, phi));
    }
    for _ in 0..n_samples {
        let psi = random_unit_vector(d, &mut rng);
        let (v, phi) = min_image_eigen(alpha, &psi);
        candidates.push((v, psi, phi));
    }
    candidates.sort_by(|a, b| a.0.total_cmp(&b.0));
    candidates.truncate(4);
    for cand in candidates.iter_mut() {
        let mut step = 0.3;
        while step > 1e-6 && cand.0 >= -POSITIVITY_TOL {
            let dir = random_unit_vector(d, &mut rng);
            let trial: Vec<C64> = cand.1.iter().zip(&dir).map(|(a, b)| a + b * step).collect();
            let n = linalg::vnorm(&trial);
            let trial: Vec<C64> = trial.into_iter().map(|z| z / n).collect();
            let (v, phi) = min_image_eigen(alpha, &trial);
            if v < cand.0 {
                *cand = (v, trial, phi);
            } else {
                step *= 0.9;
            }
        }
    }
    let best = candidates.into_iter().min_by(|a, b| a.0.total_cmp(&b.0)).expect("at least d candidates");
    PositivityReport { positive: best.0 >= -POSITIVITY_TOL, min_value: best.0, witness: (best.1, best.2) }
}

pub fn is_positive_map(alpha: &PositiveMapSpec, n_samples: usize, seed: u64) -> bool {
    check_positivity(alpha, n_samples, seed).positive
}

pub fn identity_map(d: usize) -> PositiveMapSpec {
    PositiveMapSpec::from_fn(d, "identity", |x| x.clone()).expect("identity is a valid map")
}

pub fn transpose_map(d: usize) -> PositiveMapSpec {
    PositiveMapSpec::from_fn(d, "transpose", |x| x.transpose()).expect("transpose is a valid map")
}

/// `(Tr(x)·1 - x)/(d - 1)`; for `d = 2` this is `Tr(x)·1 - x`.
pub fn reduction_map(d: usize) -> Result<PositiveMapSpec> {
    if d < 2 {
        return Err(Error::OutOfRange("reduction map needs d >= 2".into()));
    }
    let norm = 1.0 / (d as f64 - 1.0);
    PositiveMapSpec::from_fn(d, "reduction", |x| (&ComplexMatrix::identity(d).scale_c(x.trace()) - x).scale(norm))
}

/// `t·x + (1 - t)·Tr(x)·1/d`; `t = 0` sends everything to the maximally
/// mixed direction.
pub fn depolarizing_map(d: usize, t: f64) -> Result<PositiveMapSpec> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::OutOfRange(format!("depolarizing parameter {t} outside [0, 1]")));
    }
    let name = if t == 0.0 { "depolarizing".to_string() } else { format!("depolarizing:{t}") };
    PositiveMapSpec::from_fn(d, &name, |x| &x.scale(t) + &ComplexMatrix::identity(d).scale_c(x.trace() * ((1.0 - t) / d as f64)))
}

/// Convex combination `Σ wᵢ αᵢ` of maps on the same `M_d`.
pub fn convex_combination(maps: &[(f64, &PositiveMapSpec)], name: &str) -> Result<PositiveMapSpec> {
    let d = maps.first().ok_or_else(|| Error::InvalidMap("empty combination".into()))?.1.d;
    let total: f64 = maps.iter().map(|(w, _)| w).sum();
    if maps.iter().any(|(w, m)| *w < 0.0 || m.d != d) || (total - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidMap("convex weights must be nonnegative, sum to 1, and act on one M_d".into()));
    }
    let mut choi = ComplexMatrix::zeros(d * d, d * d);
    for (w, m) in maps {
        choi = &choi + &m.choi.scale(*w);
    }
    let mut out = PositiveMapSpec::new(d, choi, Some(name.to_string()))?;
    out.positive_checked = maps.iter().all(|(_, m)| m.positive_checked);
    Ok(out)
}

/// `x ↦ Z x Z` with `Z = diag(1, -1, 1, -1, ...)`.
pub fn phase_flip_map(d: usize) -> PositiveMapSpec {
    let z = ComplexMatrix::diag_real(&(0..d).map(|k| if k % 2 == 0 { 1.0 } else { -1.0 }).collect::<Vec<_>>());
    PositiveMapSpec::from_fn(d, "phase-flip", |x| z.matmul(x).matmul(&z)).expect("conjugation is a valid map")
}

/// `x ↦ u xᵀ u†`: a *-antimorphism written as a morphism composed with
/// transposition.
pub fn antimorphism(u: &ComplexMatrix) -> Result<PositiveMapSpec> {
    let d = u.rows();
    if !u.is_square() || u.adjoint().matmul(u).max_abs_diff(&ComplexMatrix::identity(d)) > 1e-10 {
        return Err(Error::InvalidMap("antimorphism needs a unitary".into()));
    }
    let ud = u.adjoint();
    PositiveMapSpec::from_fn(d, "antimorphism", |x| u.matmul(&x.transpose()).matmul(&ud))
}

/// Non-positive, non-unital control `x ↦ x - Tr(x)·1/(2d)`.
pub fn non_positive_control(d: usize) -> PositiveMapSpec {
    let s = 1.0 / (2.0 * d as f64);
    PositiveMapSpec::from_fn(d, "non-positive-control", |x| &x.clone() - &ComplexMatrix::identity(d).scale_c(x.trace() * s))
        .expect("control is a valid linear map")
}

/// Unital but non-positive control `x ↦ 3·Tr(x)·1/d - 2x`.
pub fn over_reduction_control(d: usize) -> PositiveMapSpec {
    PositiveMapSpec::from_fn(d, "over-reduction", |x| &ComplexMatrix::identity(d).scale_c(x.trace() * (3.0 / d as f64)) - &x.scale(2.0))
        .expect("control is a valid linear map")
}

/// The builtin positive unital maps on `M_d`, each with positivity sampled.
pub fn builtin_maps(d: usize) -> Vec<PositiveMapSpec> {
    let id = identity_map(d);
    let tr = transpose_map(d);
    let mut maps = vec![id.clone(), tr.clone()];
    if d >= 2 {
        maps.push(reduction_map(d).expect("d >= 2"));
    }
    maps.push(depolarizing_map(d, 0.0).expect("t in range"));
    maps.push(depolarizing_map(d, 0.5).expect("t in range"));
    maps.push(convex_combination(&[(0.5, &id), (0.5, &tr)], "mix-identity-transpose").expect("valid weights"));
    maps.push(phase_flip_map(d));
    for (k, m) in maps.iter_mut().enumerate() {
        m.verify_positivity(64, 0x5eed + k as u64);
    }
    maps
}

/// Builtin or control map by name. Accepts `depolarizing:<t>`.
pub fn map_by_name(name: &str, d: usize) -> Result<PositiveMapSpec> {
    if let Some(t) = name.strip_prefix("depolarizing:") {
        let t: f64 = t.parse().map_err(|_| Error::InvalidMap(format!("bad depolarizing parameter in {name:?}")))?;
        return depolarizing_map(d, t);
    }
    match name {
        "identity" => Ok(identity_map(d)),
        "transpose" => Ok(transpose_map(d)),
        "reduction" => reduction_map(d),
        "depolarizing" => depolarizing_map(d, 0.0),
        "mix-identity-transpose" => convex_combination(&[(0.5, &identity_map(d)), (0.5, &transpose_map(d))], name),
        "phase-flip" => Ok(phase_flip_map(d)),
        "non-positive-control" => Ok(non_positive_control(d)),
        "over-reduction" => Ok(over_reduction_control(d)),
        _ => Err(Error::InvalidMap(format!("unknown map {name:?}"))),
    }
}
