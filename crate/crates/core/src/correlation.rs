//! The coefficients `d(φ, a, b)` and `d₀(φ, A)` as numerical minimisation over
//! decompositions of a state, and a separability verdict built on them.
//!
//! For a fixed decomposition `μ` with barycenter `ρ`, the integrand is
//! `|Tr(ρA) - Σ λᵢ Tr[(r₁ρᵢ ⊗ r₂ρᵢ) A]|`. Decompositions are searched through
//! the unitary parametrisation of [`crate::measures::Decomposer`], with a
//! coarse-graining partition chosen per start. The local solver is L-BFGS on
//! an analytic gradient; when a line-search step crosses the kink of the
//! absolute value the step is replaced by a bracketed root search along the
//! same direction, and runs that stall above tolerance are finished by a
//! compass search.
//!
//! Starts are independent. Start `k` draws from the ChaCha8 stream `k` of
//! `seed`, starts run in fixed batches of [`START_BATCH`], and the best start
//! is the lowest value with ties broken by the lower index, so results do not
//! depend on scheduling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::bipartite::{gaussian_matrix, BipartiteSpace, BipartiteState};
use crate::error::{Error, Result};
use crate::linalg::{self, kron, re, ComplexMatrix, C64, HERMITIAN_TOL};
use crate::measures::{self, boxtimes, evaluate_boxtimes, Decomposer, Ensemble, Partition};
use crate::posmaps::{partial_transpose_matrix, ppt_min_eigenvalue};

/// Starts per batch; early termination is checked only between batches.
pub const START_BATCH: usize = 8;
/// Largest `d1·d2` the optimiser accepts.
pub const MAX_OPTIMIZER_DIM: usize = 16;
/// Number of random Hermitian probes used by default in a verdict.
pub const DEFAULT_PROBES: usize = 4;

const LBFGS_MEMORY: usize = 10;
const RANDOM_PARTITIONS: usize = 3;

/// How independent starts are scheduled.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Execution {
    Sequential,
    /// Rayon work-stealing over the starts of a batch. Falls back to
    /// sequential execution when the `parallel` feature is disabled.
    #[default]
    Parallel,
}

#[derive(Clone, Debug)]
pub struct OptimizerConfig {
    /// Ensemble cardinality; `None` means `(d1·d2)²`.
    pub m: Option<usize>,
    pub starts: usize,
    pub max_iters: usize,
    /// Convergence tolerance on the objective, relative to the Frobenius
    /// norm of the observable.
    pub tol: f64,
    pub seed: u64,
    pub use_partitions: bool,
    /// Verdict threshold: values at or below count as zero, values above ten
    /// times this count as nonzero.
    pub decision_threshold: f64,
    pub execution: Execution,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            m: None,
            starts: 32,
            max_iters: 2000,
            tol: 1e-9,
            seed: 0,
            use_partitions: true,
            decision_threshold: 1e-4,
            execution: Execution::default(),
        }
    }
}

impl OptimizerConfig {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.starts == 0 || self.max_iters == 0 {
            return Err(Error::ConfigInvalid("starts and max_iters must be positive".into()));
        }
        if self.m == Some(0) {
            return Err(Error::ConfigInvalid("m must be positive".into()));
        }
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(Error::ConfigInvalid(format!("tol must be positive, got {}", self.tol)));
        }
        if !(self.decision_threshold > 0.0 && self.decision_threshold.is_finite()) {
            return Err(Error::ConfigInvalid("decision_threshold must be positive".into()));
        }
        Ok(())
    }

    pub fn resolve_m(&self, space: BipartiteSpace) -> usize {
        self.m.unwrap_or(space.dim() * space.dim())
    }
}

#[derive(Clone, Debug)]
pub struct CorrelationResult {
    /// Best objective found; an upper bound on the infimum.
    pub value: f64,
    /// Decomposition attaining `value`.
    pub ensemble: Ensemble,
    pub converged: bool,
    pub starts_used: usize,
}

/// Result of [`minimize_d_simple`], with the factored ⊠ value
/// `Σ λᵢ Tr(r₁ρᵢ a) Tr(r₂ρᵢ b)` of the returned ensemble.
#[derive(Clone, Debug)]
pub struct SimpleCorrelationResult {
    pub result: CorrelationResult,
    pub factored_boxtimes: C64,
    pub boxtimes_value: C64,
}

fn check_observable(space: BipartiteSpace, a: &ComplexMatrix) -> Result<()> {
    let n = space.dim();
    if a.rows() != n || a.cols() != n {
        return Err(Error::DimensionMismatch { expected: n, found: if a.rows() != n { a.rows() } else { a.cols() } });
    }
    Ok(())
}

/// `|Tr(ρA) - Σ λᵢ Tr[(r₁ρᵢ ⊗ r₂ρᵢ) A]|` for one fixed decomposition.
pub fn d0_objective(e: &Ensemble, a: &ComplexMatrix) -> Result<f64> {
    check_observable(e.space(), a)?;
    let dev = a.hermiticity_deviation();
    if dev > HERMITIAN_TOL {
        return Err(Error::NotHermitian { deviation: dev });
    }
    Ok(general_objective(e, a))
}

/// Same integrand for an arbitrary (possibly non-Hermitian) observable.
fn general_objective(e: &Ensemble, a: &ComplexMatrix) -> f64 {
    let lhs = e.barycenter().rho().trace_product(a);
    let rhs = evaluate_boxtimes(&boxtimes(e), a).expect("dimension checked by caller");
    (lhs - rhs).norm()
}

/// Hermitian components `(H, Tr(ρH))` with `A = H₁ + i H₂`.
fn hermitian_parts(state: &BipartiteState, a: &ComplexMatrix) -> Vec<(ComplexMatrix, f64)> {
    let h1 = a.hermitian_part();
    let mut parts = vec![(h1.clone(), state.rho().trace_product(&h1).re)];
    let h2 = (&a.scale_c(re(0.5)) - &a.adjoint().scale_c(re(0.5))).scale_c(C64::new(0.0, -1.0));
    if h2.max_abs() > 0.0 {
        let t = state.rho().trace_product(&h2).re;
        parts.push((h2, t));
    }
    parts
}

/// Multi-start minimisation of [`d0_objective`] over decompositions of `rho`.
pub fn minimize_d0(rho: &BipartiteState, a: &ComplexMatrix, cfg: &OptimizerConfig) -> Result<CorrelationResult> {
    check_observable(rho.space(), a)?;
    let dev = a.hermiticity_deviation();
    if dev > HERMITIAN_TOL {
        return Err(Error::NotHermitian { deviation: dev });
    }
    let a = a.hermitian_part();
    let parts = vec![(a.clone(), rho.expect(&a)?.re)];
    multistart(rho, parts, a.frobenius_norm(), cfg, |e| general_objective(e, &a))
}

/// The simple-tensor coefficient `d(φ, a, b)`: [`minimize_d0`] machinery on
/// `A = a ⊗ b`, with the factored ⊠ value reported alongside.
pub fn minimize_d_simple(rho: &BipartiteState, a: &ComplexMatrix, b: &ComplexMatrix, cfg: &OptimizerConfig) -> Result<SimpleCorrelationResult> {
    let space = rho.space();
    if a.rows() != space.d1 || a.cols() != space.d1 {
        return Err(Error::DimensionMismatch { expected: space.d1, found: a.rows() });
    }
    if b.rows() != space.d2 || b.cols() != space.d2 {
        return Err(Error::DimensionMismatch { expected: space.d2, found: b.rows() });
    }
    let ab = kron(a, b);
    let parts = hermitian_parts(rho, &ab);
    let result = multistart(rho, parts, ab.frobenius_norm(), cfg, |e| general_objective(e, &ab))?;
    let pe = boxtimes(&result.ensemble);
    let factored = pe
        .weights
        .iter()
        .zip(&pe.first_marginals)
        .zip(&pe.second_marginals)
        .map(|((w, p), q)| p.trace_product(a) * q.trace_product(b) * *w)
        .sum();
    let boxtimes_value = evaluate_boxtimes(&pe, &ab)?;
    Ok(SimpleCorrelationResult { result, factored_boxtimes: factored, boxtimes_value })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    Separable,
    Entangled,
    Inconclusive,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::Separable => "Separable",
            Verdict::Entangled => "Entangled",
            Verdict::Inconclusive => "Inconclusive",
        }
    }
}

#[derive(Clone, Debug)]
pub struct ProbeResult {
    pub label: String,
    pub observable: ComplexMatrix,
    pub value: f64,
    pub converged: bool,
    pub starts_used: usize,
}

#[derive(Clone, Debug)]
pub struct SeparabilityReport {
    pub verdict: Verdict,
    pub max_d0: f64,
    /// Probe attaining `max_d0`.
    pub witness: ComplexMatrix,
    pub ppt_min_eigenvalue: f64,
    /// Whether the PPT test decides separability for this space.
    pub ppt_exact: bool,
    pub probes: Vec<ProbeResult>,
}

/// PPT is equivalent to separability for `2⊗2`, `2⊗3` and `3⊗2`.
pub fn ppt_is_exact(space: BipartiteSpace) -> bool {
    matches!((space.d1, space.d2), (2, 2) | (2, 3) | (3, 2))
}

/// `(|η⟩⟨η|)^{T₁}` for `η` the eigenvector of the smallest eigenvalue of
/// `ρ^{T₁}`; returns `None` when that eigenvalue is nonnegative.
pub fn partial_transpose_witness(rho: &BipartiteState) -> Option<ComplexMatrix> {
    let pt = partial_transpose_matrix(rho.rho(), rho.space());
    let eig = linalg::eigh(&pt.hermitian_part()).ok()?;
    if eig.values[0] >= 0.0 {
        return None;
    }
    Some(partial_transpose_matrix(&ComplexMatrix::projector(&eig.vector(0)), rho.space()))
}

/// Random Hermitian observable with unit operator norm.
pub fn random_hermitian_probe(n: usize, rng: &mut impl Rng) -> ComplexMatrix {
    let g = gaussian_matrix(n, n, rng).hermitian_part();
    let norm = linalg::operator_norm(&g).expect("small Hermitian matrix");
    g.scale(1.0 / norm)
}

/// Probe set: the partial-transpose witness when `ρ^{T₁}` has a negative
/// eigenvalue, `n_observables` seeded random Hermitian probes, and the
/// identity.
pub fn probe_set(rho: &BipartiteState, seed: u64, n_observables: usize) -> Vec<(String, ComplexMatrix)> {
    let n = rho.space().dim();
    let mut probes = Vec::new();
    if let Some(w) = partial_transpose_witness(rho) {
        probes.push(("pt-witness".to_string(), w));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(u64::MAX);
    for k in 0..n_observables {
        probes.push((format!("random-{k}"), random_hermitian_probe(n, &mut rng)));
    }
    probes.push(("identity".to_string(), ComplexMatrix::identity(n)));
    probes
}

/// Minimises `d₀` separately for every probe and aggregates: `Entangled` if
/// some value exceeds `10 · decision_threshold`; `Separable` if all are at
/// most `decision_threshold` and the PPT test is exact here and agrees;
/// `Inconclusive` otherwise.
pub fn separability_verdict(rho: &BipartiteState, cfg: &OptimizerConfig, n_observables: usize) -> Result<SeparabilityReport> {
    cfg.validate()?;
    let mut probes = Vec::new();
    for (label, a) in probe_set(rho, cfg.seed, n_observables) {
        let r = minimize_d0(rho, &a, cfg)?;
        probes.push(ProbeResult { label, observable: a, value: r.value, converged: r.converged, starts_used: r.starts_used });
    }
    let (max_idx, max_d0) = probes
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, p)| if p.value > bv { (i, p.value) } else { (bi, bv) });
    let ppt_min = ppt_min_eigenvalue(rho);
    let ppt_exact = ppt_is_exact(rho.space());
    let thr = cfg.decision_threshold;
    let verdict = if max_d0 > 10.0 * thr {
        Verdict::Entangled
    } else if max_d0 <= thr && ppt_exact && ppt_min >= -linalg::PSD_TOL {
        Verdict::Separable
    } else {
        Verdict::Inconclusive
    };
    Ok(SeparabilityReport {
        verdict,
        max_d0,
        witness: probes[max_idx].observable.clone(),
        ppt_min_eigenvalue: ppt_min,
        ppt_exact,
        probes,
    })
}

/// `½·1 - |ψ⁻⟩⟨ψ⁻|` on two qubits.
pub fn werner_witness() -> ComplexMatrix {
    &ComplexMatrix::identity(4).scale(0.5) - &crate::bipartite::singlet_projector()
}

#[derive(Clone, Debug)]
pub struct SweepRow {
    pub p: f64,
    /// `d₀` of the Werner state for [`werner_witness`].
    pub d0_witness: f64,
    pub ppt_min_eig: f64,
    pub verdict: Verdict,
}

/// Werner states on an even grid of `steps` points over `[p_min, p_max]`.
pub fn werner_sweep(p_min: f64, p_max: f64, steps: usize, cfg: &OptimizerConfig, n_observables: usize) -> Result<Vec<SweepRow>> {
    if !(0.0..=1.0).contains(&p_min) || !(0.0..=1.0).contains(&p_max) || p_min > p_max {
        return Err(Error::OutOfRange(format!("need 0 <= p_min <= p_max <= 1, got [{p_min}, {p_max}]")));
    }
    if steps < 2 {
        return Err(Error::OutOfRange(format!("steps must be at least 2, got {steps}")));
    }
    let w = werner_witness();
    (0..steps)
        .map(|k| {
            let p = if k == steps - 1 { p_max } else { p_min + (p_max - p_min) * k as f64 / (steps - 1) as f64 };
            let rho = crate::bipartite::make_werner(p)?;
            let d0_witness = minimize_d0(&rho, &w, cfg)?.value;
            let report = separability_verdict(&rho, cfg, n_observables)?;
            Ok(SweepRow { p, d0_witness, ppt_min_eig: report.ppt_min_eigenvalue, verdict: report.verdict })
        })
        .collect()
}

struct StartOutcome {
    index: usize,
    value: f64,
    ensemble: Ensemble,
    converged: bool,
}

fn run_indices<T: Send>(exec: Execution, range: std::ops::Range<usize>, f: impl Fn(usize) -> T + Sync + Send) -> Vec<T> {
    #[cfg(feature = "parallel")]
    if exec == Execution::Parallel {
        use rayon::prelude::*;
        return range.into_par_iter().map(f).collect();
    }
    let _ = exec;
    range.map(f).collect()
}

fn multistart(
    rho: &BipartiteState,
    parts: Vec<(ComplexMatrix, f64)>,
    scale: f64,
    cfg: &OptimizerConfig,
    recompute: impl Fn(&Ensemble) -> f64 + Sync,
) -> Result<CorrelationResult> {
    cfg.validate()?;
    let space = rho.space();
    if space.dim() > MAX_OPTIMIZER_DIM {
        return Err(Error::ConfigInvalid(format!("d1·d2 = {} exceeds the optimiser limit {MAX_OPTIMIZER_DIM}", space.dim())));
    }
    let decomposer = Decomposer::new(rho)?;
    let m = cfg.resolve_m(space);
    if m < decomposer.rank() {
        return Err(Error::RankTooSmall { m, rank: decomposer.rank() });
    }
    let tol = cfg.tol * scale.max(f64::MIN_POSITIVE);
    let problem = Problem::new(&decomposer, m, parts);
    let mut best: Option<StartOutcome> = None;
    let mut used = 0;
    let mut failure: Option<Error> = None;
    while used < cfg.starts {
        let end = (used + START_BATCH).min(cfg.starts);
        let batch = run_indices(cfg.execution, used..end, |k| run_start(&problem, &decomposer, cfg, tol, k, &recompute));
        used = end;
        for outcome in batch {
            match outcome {
                Ok(o) => {
                    let better = best.as_ref().map_or(true, |b| o.value < b.value || (o.value == b.value && o.index < b.index));
                    if better {
                        best = Some(o);
                    }
                }
                Err(e) => failure = failure.or(Some(e)),
            }
        }
        if best.as_ref().is_some_and(|b| b.value <= tol) {
            break;
        }
    }
    let best = match (best, failure) {
        (Some(b), _) => b,
        (None, Some(e)) => return Err(e),
        (None, None) => unreachable!("at least one start runs"),
    };
    Ok(CorrelationResult { value: best.value, ensemble: best.ensemble, converged: best.converged, starts_used: used })
}

fn start_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

fn random_partition(m: usize, rng: &mut impl Rng) -> Partition {
    let k = rng.gen_range(1..=m);
    let labels: Vec<usize> = (0..m).map(|_| rng.gen_range(0..k)).collect();
    Partition::from_labels(&labels)
}

fn run_start(
    problem: &Problem<'_>,
    decomposer: &Decomposer,
    cfg: &OptimizerConfig,
    tol: f64,
    index: usize,
    recompute: &(impl Fn(&Ensemble) -> f64 + Sync),
) -> Result<StartOutcome> {
    let m = problem.m;
    let mut rng = start_rng(cfg.seed, index);
    let x0: Vec<f64> = if index == 0 {
        vec![0.0; measures::param_count(m)]
    } else {
        (0..measures::param_count(m)).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
    };
    let mut candidates = vec![Partition::singletons(m)];
    if cfg.use_partitions {
        candidates.extend((0..RANDOM_PARTITIONS).map(|_| random_partition(m, &mut rng)));
    }
    let mut chosen = None;
    for p in candidates {
        let v = problem.with_partition(&p).value(&x0)?;
        if chosen.as_ref().map_or(true, |(bv, _)| v < *bv) {
            chosen = Some((v, p));
        }
    }
    let (_, partition) = chosen.expect("at least one candidate");
    let local = problem.with_partition(&partition);
    let (x, converged) = local.minimize(x0, cfg.max_iters, tol, &mut rng)?;
    let ensemble = decomposer.ensemble(&x, m, &partition)?;
    let value = recompute(&ensemble);
    Ok(StartOutcome { index, value, ensemble, converged: converged || value <= tol })
}

/// Objective `‖(g_t(U) - c_t)_t‖₂` over the unitary parameters, where
/// `g_t(U) = Σ_G Tr[A_t (r₁M_G ⊗ r₂M_G)] / Tr M_G` and `M_G` sums the pure
/// members of group `G`.
struct Problem<'a> {
    space: BipartiteSpace,
    factor: &'a ComplexMatrix,
    m: usize,
    groups: Vec<Vec<usize>>,
    parts: Vec<(ComplexMatrix, f64)>,
}

struct Evaluation {
    value: f64,
    residuals: Vec<f64>,
    grad: Vec<f64>,
}

impl<'a> Problem<'a> {
    fn new(decomposer: &'a Decomposer, m: usize, parts: Vec<(ComplexMatrix, f64)>) -> Self {
        Self { space: decomposer.state().space(), factor: decomposer.factor(), m, groups: Partition::singletons(m).groups().to_vec(), parts }
    }

    fn with_partition(&self, p: &Partition) -> Problem<'a> {
        Problem { space: self.space, factor: self.factor, m: self.m, groups: p.groups().to_vec(), parts: self.parts.clone() }
    }

    fn value(&self, x: &[f64]) -> Result<f64> {
        Ok(self.evaluate(x, false)?.value)
    }

    fn evaluate(&self, x: &[f64], want_grad: bool) -> Result<Evaluation> {
        let m = self.m;
        let n = self.space.dim();
        let (d1, d2) = (self.space.d1, self.space.d2);
        let r = self.factor.cols();
        let gen = measures::generator_from_params(x, m)?;
        let h = gen.scale_c(C64::new(0.0, -1.0)).hermitian_part();
        let eig = linalg::eigh(&h)?;
        let u = measures::exp_i_spectral(&eig);

        // φ_j = Σ_k conj(U_jk) B_k
        let b = self.factor;
        let phi: Vec<Vec<C64>> = (0..m)
            .map(|j| (0..n).map(|i| (0..r).map(|k| u[(j, k)].conj() * b[(i, k)]).sum()).collect())
            .collect();

        struct GroupData {
            norm: f64,
            p: ComplexMatrix,
            q: ComplexMatrix,
            h: Vec<f64>,
        }
        let mut groups = Vec::with_capacity(self.groups.len());
        let mut g = vec![0.0; self.parts.len()];
        for group in &self.groups {
            let mut mg = ComplexMatrix::zeros(n, n);
            for &j in group {
                let v = &phi[j];
                for a in 0..n {
                    if v[a] == C64::default() {
                        continue;
                    }
                    for bb in 0..n {
                        mg[(a, bb)] += v[a] * v[bb].conj();
                    }
                }
            }
            let norm = mg.trace().re;
            if norm < measures::ZERO_WEIGHT {
                groups.push(None);
                continue;
            }
            let p = crate::bipartite::partial_trace_second(&mg, self.space);
            let q = crate::bipartite::partial_trace_first(&mg, self.space);
            let mut hs = Vec::with_capacity(self.parts.len());
            for (t, (a, _)) in self.parts.iter().enumerate() {
                let mut acc = 0.0;
                for i1 in 0..d1 {
                    for j1 in 0..d1 {
                        let pij = p[(i1, j1)];
                        for i2 in 0..d2 {
                            for j2 in 0..d2 {
                                acc += (pij * q[(i2, j2)] * a[(j1 * d2 + j2, i1 * d2 + i2)]).re;
                            }
                        }
                    }
                }
                let hv = acc / norm;
                g[t] += hv;
                hs.push(hv);
            }
            groups.push(Some(GroupData { norm, p, q, h: hs }));
        }
        let residuals: Vec<f64> = g.iter().zip(&self.parts).map(|(gv, (_, c))| gv - c).collect();
        let value = residuals.iter().map(|x| x * x).sum::<f64>().sqrt();
        if !want_grad {
            return Ok(Evaluation { value, residuals, grad: Vec::new() });
        }
        let mut grad = vec![0.0; x.len()];
        if value == 0.0 {
            return Ok(Evaluation { value, residuals, grad });
        }
        let weights: Vec<f64> = residuals.iter().map(|rv| rv / value).collect();

        // Ĝ_jk = conj(Y_jk), Y_j = B† Γ_G φ_j
        let mut ghat = ComplexMatrix::zeros(m, m);
        for (group, data) in self.groups.iter().zip(&groups) {
            let Some(data) = data else { continue };
            let mut gamma = ComplexMatrix::zeros(n, n);
            for (t, (a, _)) in self.parts.iter().enumerate() {
                let w = weights[t] / data.norm;
                if w == 0.0 {
                    continue;
                }
                // A_Q ⊗ 1 + 1 ⊗ A_P - h·1
                let mut aq = ComplexMatrix::zeros(d1, d1);
                for i1 in 0..d1 {
                    for j1 in 0..d1 {
                        let mut acc = C64::default();
                        for i2 in 0..d2 {
                            for j2 in 0..d2 {
                                acc += a[(i1 * d2 + i2, j1 * d2 + j2)] * data.q[(j2, i2)];
                            }
                        }
                        aq[(i1, j1)] = acc;
                    }
                }
                let mut ap = ComplexMatrix::zeros(d2, d2);
                for i2 in 0..d2 {
                    for j2 in 0..d2 {
                        let mut acc = C64::default();
                        for i1 in 0..d1 {
                            for j1 in 0..d1 {
                                acc += a[(i1 * d2 + i2, j1 * d2 + j2)] * data.p[(j1, i1)];
                            }
                        }
                        ap[(i2, j2)] = acc;
                    }
                }
                for i1 in 0..d1 {
                    for i2 in 0..d2 {
                        let row = i1 * d2 + i2;
                        for j1 in 0..d1 {
                            for j2 in 0..d2 {
                                let col = j1 * d2 + j2;
                                let mut v = C64::default();
                                if i2 == j2 {
                                    v += aq[(i1, j1)];
                                }
                                if i1 == j1 {
                                    v += ap[(i2, j2)];
                                }
                                if row == col {
                                    v -= data.h[t];
                                }
                                gamma[(row, col)] += v * w;
                            }
                        }
                    }
                }
            }
            for &j in group {
                let gphi = gamma.matvec(&phi[j]);
                for k in 0..r {
                    let y: C64 = (0..n).map(|i| b[(i, k)].conj() * gphi[i]).sum();
                    ghat[(j, k)] = y.conj();
                }
            }
        }

        // S = V (conj(L) ∘ (V† Ĝ V)) V†
        let v = &eig.vectors;
        let vd = v.adjoint();
        let inner = vd.matmul(&ghat).matmul(v);
        let mut weighted = ComplexMatrix::zeros(m, m);
        for k in 0..m {
            for l in 0..m {
                let (tk, tl) = (eig.values[k], eig.values[l]);
                let half = 0.5 * (tk - tl);
                let sinc = if half.abs() < 1e-8 { 1.0 - half * half / 6.0 } else { half.sin() / half };
                let lkl = C64::from_polar(sinc, 0.5 * (tk + tl));
                weighted[(k, l)] = lkl.conj() * inner[(k, l)];
            }
        }
        let s = v.matmul(&weighted).matmul(&vd);
        for a in 0..m {
            grad[a] = 2.0 * s[(a, a)].im;
        }
        let mut idx = m;
        for a in 0..m {
            for bb in (a + 1)..m {
                grad[idx] = 2.0 * (s[(a, bb)].re - s[(bb, a)].re);
                grad[idx + 1] = 2.0 * (s[(a, bb)].im + s[(bb, a)].im);
                idx += 2;
            }
        }
        Ok(Evaluation { value, residuals, grad })
    }

    /// Local minimisation from `x0`. Returns the final point and whether it
    /// converged: tolerance reached, or progress stalled at a stationary
    /// point. A failed line search hands over to the compass search.
    fn minimize(&self, x0: Vec<f64>, max_iters: usize, tol: f64, rng: &mut impl Rng) -> Result<(Vec<f64>, bool)> {
        let mut x = x0;
        let mut cur = self.evaluate(&x, true)?;
        let mut mem_s: Vec<Vec<f64>> = Vec::new();
        let mut mem_y: Vec<Vec<f64>> = Vec::new();
        let mut stalled = 0;
        let mut converged = false;
        let mut line_search_failed = false;
        let mut iters = 0;
        while iters < max_iters {
            iters += 1;
            if cur.value <= tol {
                converged = true;
                break;
            }
            let gnorm = norm(&cur.grad);
            if gnorm == 0.0 {
                converged = true;
                break;
            }
            let mut dir = lbfgs_direction(&cur.grad, &mem_s, &mem_y);
            let mut slope = dot(&dir, &cur.grad);
            if slope >= 0.0 {
                mem_s.clear();
                mem_y.clear();
                dir = cur.grad.iter().map(|g| -g).collect();
                slope = -gnorm * gnorm;
            }
            let mut alpha = if mem_s.is_empty() { cur.value / (gnorm * gnorm) } else { 1.0 };
            let dnorm = norm(&dir);
            if alpha * dnorm > 2.0 {
                alpha = 2.0 / dnorm;
            }
            let Some((x_new, next)) = self.line_search(&x, &cur, &dir, slope, alpha, tol)? else {
                line_search_failed = true;
                break;
            };
            let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
            let y: Vec<f64> = next.grad.iter().zip(&cur.grad).map(|(a, b)| a - b).collect();
            if dot(&s, &y) > 1e-12 * norm(&s) * norm(&y) {
                if mem_s.len() == LBFGS_MEMORY {
                    mem_s.remove(0);
                    mem_y.remove(0);
                }
                mem_s.push(s);
                mem_y.push(y);
            }
            if cur.value - next.value <= 1e-13 * cur.value.max(tol) {
                stalled += 1;
            } else {
                stalled = 0;
            }
            x = x_new;
            cur = next;
            if stalled >= 5 {
                converged = true;
                break;
            }
        }
        if line_search_failed && cur.value > tol {
            let budget = (max_iters.saturating_sub(iters)).min(4 * x.len());
            let (xp, vp) = self.compass_polish(x, cur.value, budget, tol, rng)?;
            x = xp;
            converged = vp <= tol;
        }
        Ok((x, converged))
    }

    /// Armijo backtracking, with a bracketed root search along `dir` when a
    /// trial point flips the sign of a single residual.
    fn line_search(&self, x: &[f64], cur: &Evaluation, dir: &[f64], slope: f64, alpha0: f64, tol: f64) -> Result<Option<(Vec<f64>, Evaluation)>> {
        let at = |alpha: f64| -> Vec<f64> { x.iter().zip(dir).map(|(xi, di)| xi + alpha * di).collect() };
        let mut alpha = alpha0;
        for _ in 0..40 {
            let xt = at(alpha);
            let trial = self.evaluate(&xt, false)?;
            if self.parts.len() == 1 && trial.residuals[0].signum() != cur.residuals[0].signum() {
                let a_root = self.bracket_root(x, dir, cur.residuals[0], alpha, trial.residuals[0], tol)?;
                let xr = at(a_root);
                let ev = self.evaluate(&xr, true)?;
                if ev.value < cur.value {
                    return Ok(Some((xr, ev)));
                }
            }
            if trial.value <= cur.value + 1e-4 * alpha * slope {
                let ev = self.evaluate(&xt, true)?;
                return Ok(Some((xt, ev)));
            }
            alpha *= 0.5;
        }
        Ok(None)
    }

    /// Illinois-modified regula falsi for the residual along `dir` on `[0, hi]`.
    fn bracket_root(&self, x: &[f64], dir: &[f64], r_lo: f64, hi: f64, r_hi: f64, tol: f64) -> Result<f64> {
        let (mut a, mut fa) = (0.0, r_lo);
        let (mut b, mut fb) = (hi, r_hi);
        let mut best = if fa.abs() < fb.abs() { (a, fa.abs()) } else { (b, fb.abs()) };
        let mut side = 0i8;
        for _ in 0..80 {
            let c = (a * fb - b * fa) / (fb - fa);
            let c = if c.is_finite() && c > a.min(b) && c < a.max(b) { c } else { 0.5 * (a + b) };
            let xc: Vec<f64> = x.iter().zip(dir).map(|(xi, di)| xi + c * di).collect();
            let fc = self.evaluate(&xc, false)?.residuals[0];
            if fc.abs() < best.1 {
                best = (c, fc.abs());
            }
            if fc.abs() <= tol * 1e-3 || (b - a).abs() < 1e-16 * (1.0 + a.abs()) {
                break;
            }
            if fc.signum() == fb.signum() {
                b = c;
                fb = fc;
                if side == -1 {
                    fa *= 0.5;
                }
                side = -1;
            } else {
                a = c;
                fa = fc;
                if side == 1 {
                    fb *= 0.5;
                }
                side = 1;
            }
        }
        Ok(best.0)
    }

    /// Coordinate compass search with shrinking step, for runs whose line
    /// search fails.
    fn compass_polish(&self, mut x: Vec<f64>, mut fx: f64, budget: usize, tol: f64, rng: &mut impl Rng) -> Result<(Vec<f64>, f64)> {
        let mut step = 0.05;
        let mut evals = 0;
        let mut order: Vec<usize> = (0..x.len()).collect();
        while evals < budget && step > 1e-9 && fx > tol {
            for i in (1..order.len()).rev() {
                order.swap(i, rng.gen_range(0..=i));
            }
            let mut improved = false;
            for &i in &order {
                if evals >= budget || fx <= tol {
                    break;
                }
                for sgn in [1.0, -1.0] {
                    let old = x[i];
                    x[i] = old + sgn * step;
                    let v = self.value(&x)?;
                    evals += 1;
                    if v < fx {
                        fx = v;
                        improved = true;
                        break;
                    }
                    x[i] = old;
                }
            }
            if !improved {
                step *= 0.25;
            }
        }
        Ok((x, fx))
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn lbfgs_direction(grad: &[f64], s: &[Vec<f64>], y: &[Vec<f64>]) -> Vec<f64> {
    let mut q: Vec<f64> = grad.to_vec();
    let k = s.len();
    let mut alphas = vec![0.0; k];
    for i in (0..k).rev() {
        let rho = 1.0 / dot(&y[i], &s[i]);
        alphas[i] = rho * dot(&s[i], &q);
        for (qj, yj) in q.iter_mut().zip(&y[i]) {
            *qj -= alphas[i] * yj;
        }
    }
    if k > 0 {
        let gamma = dot(&s[k - 1], &y[k - 1]) / dot(&y[k - 1], &y[k - 1]);
        q.iter_mut().for_each(|v| *v *= gamma);
    }
    for i in 0..k {
        let rho = 1.0 / dot(&y[i], &s[i]);
        let beta = rho * dot(&y[i], &q);
        for (qj, sj) in q.iter_mut().zip(&s[i]) {
            *qj += (alphas[i] - beta) * sj;
        }
    }
    q.iter_mut().for_each(|v| *v = -*v);
    q
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bipartite::{make_bell, make_product, make_random_state, make_werner, singlet_projector};
    use crate::measures::hjw_ensemble;

    fn witness() -> ComplexMatrix {
        werner_witness()
    }

    fn quick() -> OptimizerConfig {
        OptimizerConfig { starts: 8, max_iters: 400, ..OptimizerConfig::default() }
    }

    #[test]
    fn objective_examples() {
        let bell = make_bell();
        let e = Ensemble::singleton(bell.clone());
        assert!(d0_objective(&e, &ComplexMatrix::identity(4)).unwrap() < 1e-15);
        assert!((d0_objective(&e, &singlet_projector()).unwrap() - 0.75).abs() < 1e-15);
        let sigma = ComplexMatrix::diag_real(&[0.3, 0.7]);
        let prod = Ensemble::singleton(make_product(&sigma, &sigma).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random_hermitian_probe(4, &mut rng);
        assert!(d0_objective(&prod, &a).unwrap() < 1e-15);
        assert!(matches!(d0_objective(&e, &ComplexMatrix::unit(4, 0, 1)), Err(Error::NotHermitian { .. })));
        assert!(matches!(d0_objective(&e, &ComplexMatrix::identity(2)), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn analytic_gradient_matches_finite_differences() {
        let rho = make_random_state(BipartiteSpace::new(2, 3).unwrap(), 3, 21).unwrap();
        let dec = Decomposer::new(&rho).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a = random_hermitian_probe(6, &mut rng);
        let b = gaussian_matrix(6, 6, &mut rng);
        let m = 5;
        let x: Vec<f64> = (0..m * m).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let cases = vec![
            vec![(a.clone(), 10.0)],
            hermitian_parts(&rho, &b).into_iter().map(|(h, c)| (h, c + 3.0)).collect::<Vec<_>>(),
        ];
        for parts in cases {
            for partition in [Partition::singletons(m), Partition::new(m, vec![vec![0, 3], vec![1], vec![2, 4]]).unwrap()] {
                let prob = Problem::new(&dec, m, parts.clone()).with_partition(&partition);
                let ev = prob.evaluate(&x, true).unwrap();
                let h = 1e-6;
                for i in 0..x.len() {
                    let mut xp = x.clone();
                    let mut xm = x.clone();
                    xp[i] += h;
                    xm[i] -= h;
                    let fd = (prob.value(&xp).unwrap() - prob.value(&xm).unwrap()) / (2.0 * h);
                    assert!((fd - ev.grad[i]).abs() < 1e-6 * (1.0 + fd.abs()), "param {i}: fd {fd} vs {}", ev.grad[i]);
                }
            }
        }
    }

    #[test]
    fn engine_value_matches_ensemble_objective() {
        let rho = make_random_state(BipartiteSpace::qubits(), 4, 2).unwrap();
        let dec = Decomposer::new(&rho).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let a = random_hermitian_probe(4, &mut rng);
        let c = rho.expect(&a).unwrap().re;
        let x: Vec<f64> = (0..36).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let part = Partition::new(6, vec![vec![0, 1], vec![2, 3, 4], vec![5]]).unwrap();
        let prob = Problem::new(&dec, 6, vec![(a.clone(), c)]).with_partition(&part);
        let e = dec.ensemble(&x, 6, &part).unwrap();
        assert!((prob.value(&x).unwrap() - d0_objective(&e, &a).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn product_state_is_zero() {
        let sigma = ComplexMatrix::diag_real(&[0.3, 0.7]);
        let tau = ComplexMatrix::diag_real(&[0.6, 0.4]);
        let rho = make_product(&sigma, &tau).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = random_hermitian_probe(4, &mut rng);
        let r = minimize_d0(&rho, &a, &quick()).unwrap();
        assert!(r.value <= 1e-9, "{}", r.value);
        assert!(r.converged);
    }

    #[test]
    fn bell_value_is_constant() {
        let r = minimize_d0(&make_bell(), &singlet_projector(), &quick()).unwrap();
        assert!((r.value - 0.75).abs() < 1e-6);
        assert!((d0_objective(&r.ensemble, &singlet_projector()).unwrap() - r.value).abs() < 1e-12);
    }

    #[test]
    fn werner_separable_side_reaches_zero() {
        let rho = make_werner(0.25).unwrap();
        let r = minimize_d0(&rho, &singlet_projector(), &quick()).unwrap();
        assert!(r.value <= 1e-4, "{}", r.value);
    }

    #[test]
    fn simple_coefficient_examples() {
        let z = ComplexMatrix::diag_real(&[1.0, -1.0]);
        let r = minimize_d_simple(&make_bell(), &z, &z, &quick()).unwrap();
        assert!((r.result.value - 1.0).abs() < 1e-6);
        assert!((r.factored_boxtimes - r.boxtimes_value).norm() < 1e-12);
        let rho = make_random_state(BipartiteSpace::qubits(), 4, 5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let b = gaussian_matrix(2, 2, &mut rng);
        let r = minimize_d_simple(&rho, &ComplexMatrix::identity(2), &b, &quick()).unwrap();
        assert!(r.result.value < 1e-9);
        assert!((r.factored_boxtimes - r.boxtimes_value).norm() < 1e-12);
        assert!(minimize_d_simple(&rho, &ComplexMatrix::identity(3), &b, &quick()).is_err());
    }

    #[test]
    fn config_errors() {
        let rho = make_werner(0.5).unwrap();
        let a = singlet_projector();
        let bad = OptimizerConfig { starts: 0, ..OptimizerConfig::default() };
        assert!(matches!(minimize_d0(&rho, &a, &bad), Err(Error::ConfigInvalid(_))));
        let bad = OptimizerConfig { tol: 0.0, ..OptimizerConfig::default() };
        assert!(matches!(minimize_d0(&rho, &a, &bad), Err(Error::ConfigInvalid(_))));
        let small = OptimizerConfig { m: Some(2), ..OptimizerConfig::default() };
        assert!(matches!(minimize_d0(&rho, &a, &small), Err(Error::RankTooSmall { .. })));
        assert!(matches!(minimize_d0(&rho, &ComplexMatrix::unit(4, 0, 1), &quick()), Err(Error::NotHermitian { .. })));
        assert!(matches!(minimize_d0(&rho, &ComplexMatrix::identity(3), &quick()), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn deterministic_for_fixed_seed_and_schedule() {
        let rho = make_werner(0.7).unwrap();
        let cfg = OptimizerConfig { starts: 6, max_iters: 200, seed: 3, ..OptimizerConfig::default() };
        let par = minimize_d0(&rho, &witness(), &cfg).unwrap();
        let seq = minimize_d0(&rho, &witness(), &OptimizerConfig { execution: Execution::Sequential, ..cfg.clone() }).unwrap();
        assert_eq!(par.value.to_bits(), seq.value.to_bits());
        assert_eq!(par.starts_used, seq.starts_used);
    }

    #[test]
    fn verdict_on_simple_states() {
        let cfg = quick();
        let rep = separability_verdict(&make_werner(0.0).unwrap(), &cfg, 2).unwrap();
        assert_eq!(rep.verdict, Verdict::Separable);
        assert!(rep.max_d0 <= 1e-9);
        let rep = separability_verdict(&make_bell(), &cfg, 2).unwrap();
        assert_eq!(rep.verdict, Verdict::Entangled);
        assert!(rep.max_d0 >= 0.75 - 1e-6);
        assert_eq!(rep.probes[0].label, "pt-witness");
    }

    #[test]
    fn pt_witness_detects_negativity() {
        let rho = make_werner(0.8).unwrap();
        let w = partial_transpose_witness(&rho).unwrap();
        assert!(rho.expect(&w).unwrap().re < 0.0);
        assert!(partial_transpose_witness(&make_werner(0.2).unwrap()).is_none());
        let e = hjw_ensemble(&rho, &vec![0.0; 16], 4, &Partition::singletons(4)).unwrap();
        assert!(d0_objective(&e, &w).unwrap() >= -rho.expect(&w).unwrap().re - 1e-12);
    }
}
