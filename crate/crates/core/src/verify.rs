//! Numerical certificates for Markov, potential, translation and sub-state properties.

use serde::{Deserialize, Serialize};

use crate::dense::{self, CMatrix, DenseBudget};
use crate::error::{Error, Result};
use crate::kernel::vector_matrix;
use crate::par::Execution;
use crate::pauli::{basis_string, Letter, PauliString, RegionOperator, C64};
use crate::state::QmsHandle;
use crate::tree::{Region, Tree, VertexWord};

pub const DEFAULT_TOL: f64 = 1e-9;
/// Largest region whose full Pauli basis is swept.
pub const BASIS_SITE_LIMIT: usize = 8;
const L1: &str = "l1 norm of Pauli coefficients";
const SCALAR: &str = "absolute difference of state values";

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    #[default]
    Pauli,
    Dense,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CheckOptions {
    pub tol: f64,
    pub backend: Backend,
    pub budget: DenseBudget,
    pub exec: Execution,
    /// Depth used by the translation-invariance criteria.
    pub translation_depth: usize,
}

impl Default for CheckOptions {
    fn default() -> Self {
        CheckOptions {
            tol: DEFAULT_TOL,
            backend: Backend::Pauli,
            budget: DenseBudget::default(),
            exec: Execution::default(),
            translation_depth: 2,
        }
    }
}

impl CheckOptions {
    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_backend(mut self, backend: Backend) -> Self {
        self.backend = backend;
        self
    }

    pub fn with_exec(mut self, exec: Execution) -> Self {
        self.exec = exec;
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VerificationReport {
    pub property: String,
    pub pass: bool,
    pub residual: f64,
    pub witness: Option<String>,
    pub tolerance: f64,
    pub volumes: Vec<usize>,
    pub norm: String,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
    /// Constituent checks; the residual is the largest of theirs.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub parts: Vec<VerificationReport>,
    /// Companion checks computed alongside (not folded into the residual).
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub related: Vec<VerificationReport>,
    /// Whether verdicts that should coincide did.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub consistent: Option<bool>,
}

impl VerificationReport {
    fn new(property: &str, residual: f64, witness: Option<String>, tol: f64, volumes: Vec<usize>, norm: &str) -> Self {
        VerificationReport {
            property: property.to_string(),
            pass: residual < tol,
            residual,
            witness,
            tolerance: tol,
            volumes,
            norm: norm.to_string(),
            notes: Vec::new(),
            parts: Vec::new(),
            related: Vec::new(),
            consistent: None,
        }
    }

    fn from_parts(property: &str, parts: Vec<VerificationReport>, tol: f64, norm: &str) -> Self {
        let (residual, witness) = parts.iter().fold((0.0f64, None), |(r, w), p| {
            if p.residual > r || (p.residual.is_nan() && !r.is_nan()) {
                (
                    p.residual,
                    Some(format!("{}: {}", p.property, p.witness.clone().unwrap_or_default())),
                )
            } else {
                (r, w)
            }
        });
        let mut volumes: Vec<usize> = parts.iter().flat_map(|p| p.volumes.iter().copied()).collect();
        volumes.sort_unstable();
        volumes.dedup();
        let mut rep = VerificationReport::new(property, residual, witness, tol, volumes, norm);
        rep.pass = residual < tol && parts.iter().all(|p| p.pass);
        rep.parts = parts;
        rep
    }

    fn note(mut self, n: &str) -> Self {
        self.notes.push(n.to_string());
        self
    }
}

/// Largest value of `f` over `items`, with the label of the first maximizer.
fn sweep<T, F>(exec: Execution, items: &[T], f: F) -> Result<(f64, Option<usize>)>
where
    T: Sync,
    F: Fn(&T) -> Result<f64> + Sync + Send,
{
    let values = exec.map(items, f);
    let mut best = (0.0f64, None);
    for (i, v) in values.into_iter().enumerate() {
        let v = v?;
        if best.1.is_none() || v > best.0 || (v.is_nan() && !best.0.is_nan()) {
            best = (v, Some(i));
        }
    }
    Ok(best)
}

fn basis(region: &Region) -> Result<Vec<PauliString>> {
    if region.len() > BASIS_SITE_LIMIT {
        return Err(Error::BudgetExceeded {
            sites: region.len(),
            limit: BASIS_SITE_LIMIT,
        });
    }
    Ok((0..4usize.pow(region.len() as u32))
        .map(|c| basis_string(region, c))
        .collect())
}

fn op(region: &Region, s: &PauliString) -> RegionOperator {
    RegionOperator::from_string(region.clone(), s.clone(), C64::new(1.0, 0.0))
}

/// State evaluation at a fixed volume through one of the backends.
struct Evaluator<'a> {
    handle: &'a QmsHandle,
    volume: usize,
    dense: Option<(CMatrix, Region)>,
}

impl<'a> Evaluator<'a> {
    fn new(handle: &'a QmsHandle, volume: usize, opts: &CheckOptions) -> Result<Self> {
        let dense = match opts.backend {
            Backend::Pauli => None,
            Backend::Dense => Some(handle.dense_density(volume, &opts.budget)?),
        };
        Ok(Evaluator { handle, volume, dense })
    }

    fn value(&self, a: &RegionOperator) -> Result<C64> {
        match &self.dense {
            None => self.handle.evaluate_at_volume(a, self.volume),
            Some((sigma, region)) => dense::expectation(sigma, a, region),
        }
    }
}

fn markov_residual(handle: &QmsHandle, x: &VertexWord, n: usize, opts: &CheckOptions) -> Result<(f64, Option<String>)> {
    let lift = handle.lift_at(x)?;
    let region = handle.tree().predecessors(x).union(&handle.tree().fork(x));
    let items = basis(&region)?;
    let eval = Evaluator::new(handle, n, opts)?;
    let (r, i) = sweep(opts.exec, &items, |s| {
        let a = op(&region, s);
        let e = lift.apply(&a)?;
        Ok((eval.value(&e)? - eval.value(&a)?).norm())
    })?;
    Ok((r, i.map(|i| format!("{x}: {}", items[i].label()))))
}

fn markov_volume(handle: &QmsHandle, x: &VertexWord, n: Option<usize>) -> Result<usize> {
    let depth = handle.tree().depth_of(x);
    let n = n.unwrap_or(depth + 1);
    if n <= depth {
        return Err(Error::TooDeep {
            depth: depth + 1,
            limit: n,
        });
    }
    if n > handle.n_max() {
        return Err(Error::TooDeep {
            depth: n,
            limit: handle.n_max(),
        });
    }
    Ok(n)
}

/// `max_a |φ_n(E_x a) − φ_n(a)|` over the Pauli basis of `P(x) ∪ {x} ∪ S(x)`.
pub fn check_localized_markov(
    handle: &QmsHandle,
    x: &VertexWord,
    n: Option<usize>,
    opts: &CheckOptions,
) -> Result<VerificationReport> {
    let n = markov_volume(handle, x, n)?;
    let (r, w) = markov_residual(handle, x, n, opts)?;
    Ok(
        VerificationReport::new("localized_markov", r, w, opts.tol, vec![n], SCALAR)
            .note(&format!("vertex {x}, backend {:?}", opts.backend).to_lowercase()),
    )
}

/// Level condition `φ ∘ E_n = φ` on the basis of `Λ_[0,n+1]`, together with the
/// per-vertex checks at `Λ_n`; `consistent` records whether the verdicts agree.
pub fn check_level_markov(handle: &QmsHandle, n: usize, opts: &CheckOptions) -> Result<VerificationReport> {
    let volume = n + 1;
    if volume > handle.n_max() {
        return Err(Error::TooDeep {
            depth: volume,
            limit: handle.n_max(),
        });
    }
    let tree = handle.tree();
    let region = tree.ball(volume);
    let items = basis(&region)?;
    let lifts = tree
        .level(n)
        .iter()
        .map(|x| handle.lift_at(x))
        .collect::<Result<Vec<_>>>()?;
    let eval = Evaluator::new(handle, volume, opts)?;
    let (r, i) = sweep(opts.exec, &items, |s| {
        let a = op(&region, s);
        let e = lifts.iter().try_fold(a.clone(), |acc, l| l.apply(&acc))?;
        Ok((eval.value(&e)? - eval.value(&a)?).norm())
    })?;
    let mut rep = VerificationReport::new(
        "level_markov",
        r,
        i.map(|i| items[i].label()),
        opts.tol,
        vec![volume],
        SCALAR,
    )
    .note(&format!("level {n}"));
    rep.related = tree
        .level(n)
        .iter()
        .map(|x| check_localized_markov(handle, x, Some(volume), opts))
        .collect::<Result<Vec<_>>>()?;
    rep.consistent = Some(rep.pass == rep.related.iter().all(|p| p.pass));
    Ok(rep)
}

/// `h_{Λ_n} = −log ρ_n` and its block decomposition. Level `j` plays the role
/// of `W_j`.
#[derive(Clone, Debug, PartialEq)]
pub struct PotentialDecomposition {
    pub volume: usize,
    pub region: Region,
    pub potential: RegionOperator,
    /// `H_{W_j}` for `j = 0..=n`; only `j = 0` is nonzero.
    pub site_blocks: Vec<RegionOperator>,
    /// `H_{W_j,W_{j+1}} = Σ_{x∈W_j} H_{x,S(x)}` for `j = 0..n`.
    pub pair_blocks: Vec<RegionOperator>,
    /// `Ĥ_{W_j}` for `j = 0..=n`.
    pub boundary_blocks: Vec<RegionOperator>,
    /// Scalar absorbed into `H_{W_0}` from the weights.
    pub constant: f64,
    pub reconstruction_residual: f64,
    /// `max |exp(−h) − ρ|` entrywise.
    pub round_trip_residual: f64,
}

impl PotentialDecomposition {
    pub fn reconstruction(&self) -> RegionOperator {
        let mut sum = self.site_blocks[0].clone();
        for b in self.pair_blocks.iter().chain(&self.boundary_blocks[self.volume..]) {
            sum = sum.add(b);
        }
        sum
    }
}

/// Extracts the potential at volume `n`. Weights must be scalar.
pub fn extract_potential(handle: &QmsHandle, n: usize, budget: &DenseBudget) -> Result<PotentialDecomposition> {
    let tree = handle.tree();
    if !tree.is_full_cayley() {
        return Err(Error::NotHomogeneous);
    }
    let (sigma, region) = handle.dense_density(n, budget)?;
    let dim = sigma.nrows() as f64;
    let rho = sigma * C64::new(dim, 0.0);
    let h_dense = -dense::hermitian_log(&rho)?;
    let potential = dense::from_dense(&h_dense, &region).pruned(1e-14);

    let root = Region::singleton(tree.root().clone());
    let rho0 = vector_matrix(handle.initial_vector());
    let mut constant = 0.0;
    let mut pair_blocks = Vec::with_capacity(n);
    for j in 0..n {
        let mut block = RegionOperator::zero(Region::empty());
        for x in tree.level(j).iter() {
            let te = handle.kernel_at(x);
            let w = te.weight();
            let omega = w[(0, 0)];
            if dense::max_abs(&(w - CMatrix::identity(2, 2) * omega)) > 1e-12 || omega.re <= 0.0 {
                return Err(Error::Unsupported(format!("weight at {x} is not a positive scalar")));
            }
            constant -= omega.re.ln();
            let k = dense::to_dense(te.amplitude(), te.fork(), budget)?;
            let kk = &k * k.adjoint();
            let local = -dense::hermitian_log(&kk)?;
            block = block.add(&dense::from_dense(&local, te.fork()).pruned(1e-14));
        }
        pair_blocks.push(block);
    }
    let h0 = dense::from_dense(&-dense::hermitian_log(&rho0)?, &root)
        .add(&RegionOperator::scalar(root.clone(), C64::new(constant, 0.0)))
        .pruned(1e-14);
    let mut site_blocks = vec![h0];
    site_blocks.extend((1..=n).map(|_| RegionOperator::zero(Region::empty())));
    let boundary_blocks = (0..=n).map(|_| RegionOperator::zero(Region::empty())).collect();

    let back = dense::hermitian_exp(&-h_dense);
    let round_trip_residual = dense::max_abs(&(back - &rho));
    let mut d = PotentialDecomposition {
        volume: n,
        region,
        potential,
        site_blocks,
        pair_blocks,
        boundary_blocks,
        constant,
        reconstruction_residual: 0.0,
        round_trip_residual,
    };
    d.reconstruction_residual = d.potential.sub(&d.reconstruction()).l1_norm();
    Ok(d)
}

/// Potential reconstruction plus the round trip `exp(−h) = ρ`.
pub fn check_potential(d: &PotentialDecomposition, tol: f64) -> VerificationReport {
    let parts = vec![
        VerificationReport::new(
            "reconstruction",
            d.reconstruction_residual,
            None,
            tol,
            vec![d.volume],
            L1,
        ),
        VerificationReport::new(
            "round_trip",
            d.round_trip_residual,
            None,
            tol,
            vec![d.volume],
            "max entry of the density difference",
        ),
    ];
    VerificationReport::from_parts("potential", parts, tol, L1)
        .note("W_j is the level set at depth j; normalized trace")
}

/// The four commutation relations between neighbouring blocks.
pub fn check_commutation(d: &PotentialDecomposition, tol: f64) -> VerificationReport {
    let n = d.volume;
    let hw = |j: usize| d.site_blocks.get(j);
    let hp = |j: usize| d.pair_blocks.get(j);
    let hh = |j: usize| d.boundary_blocks.get(j);
    type Pick<'a> = Box<dyn Fn(usize) -> (Option<&'a RegionOperator>, Option<&'a RegionOperator>) + 'a>;
    let relations: Vec<(&str, Pick)> = vec![
        ("[H_W(j), H_W(j),W(j+1)]", Box::new(move |j| (hw(j), hp(j)))),
        ("[H_W(j),W(j+1), Ĥ_W(j+1)]", Box::new(move |j| (hp(j), hh(j + 1)))),
        ("[H_W(j), Ĥ_W(j)]", Box::new(move |j| (hw(j), hh(j)))),
        (
            "[H_W(j),W(j+1), H_W(j+1),W(j+2)]",
            Box::new(move |j| (hp(j), hp(j + 1))),
        ),
    ];
    let parts = relations
        .into_iter()
        .map(|(name, pick)| {
            let mut worst = (0.0f64, None);
            for j in 0..=n {
                if let (Some(a), Some(b)) = pick(j) {
                    let r = a.commutator(b).l1_norm();
                    if r > worst.0 {
                        worst = (r, Some(format!("j = {j}")));
                    }
                }
            }
            VerificationReport::new(name, worst.0, worst.1, tol, vec![n], L1)
        })
        .collect();
    VerificationReport::from_parts("commutation", parts, tol, L1)
}

/// The three equivalent translation-invariance criteria at depth `L`:
/// shifted observables on `Λ_[0,L]`, subtree states at levels `1..=L`, and
/// kernel copies at levels `1..=L`.
pub fn check_translation_invariance(handle: &QmsHandle, opts: &CheckOptions) -> Result<VerificationReport> {
    let tree = handle.tree();
    if !tree.is_full_cayley() {
        return Err(Error::NotHomogeneous);
    }
    let depth = opts.translation_depth.max(1);
    if handle.n_max() < depth + 1 {
        return Err(Error::TooDeep {
            depth: depth + 1,
            limit: handle.n_max(),
        });
    }
    let k = tree.order();
    let tol = opts.tol;

    // (i) φ(α_j(a)) = φ(a)
    let region = tree.ball(depth);
    let items = basis(&region)?;
    let shifts: Vec<VertexWord> = (1..=k).map(|j| VertexWord::new(&[j])).collect();
    let (r, i) = sweep(opts.exec, &items, |s| {
        let a = op(&region, s);
        let base = handle.evaluate(&a)?;
        shifts.iter().try_fold(0.0f64, |acc, y| {
            Ok(acc.max((handle.evaluate(&a.shifted_by(y))? - base).norm()))
        })
    })?;
    let shifted = VerificationReport::new(
        "shift_invariance",
        r,
        i.map(|i| items[i].label()),
        tol,
        vec![depth, depth + 1],
        SCALAR,
    );

    let vertices: Vec<VertexWord> = (1..=depth)
        .flat_map(|m| tree.level(m).iter().cloned().collect::<Vec<_>>())
        .collect();

    // (ii) φ_{T_x}(α_x(a)) = φ(a)
    let local = tree.ball(1);
    let local_items = basis(&local)?;
    let mut worst = (0.0f64, None);
    for x in &vertices {
        let sub = handle.restrict_to_subtree(&Tree::future(x.clone(), k)?)?;
        let (r, i) = sweep(opts.exec, &local_items, |s| {
            let a = op(&local, s);
            Ok((sub.evaluate(&a.shifted_by(x))? - handle.evaluate(&a)?).norm())
        })?;
        if r > worst.0 || worst.1.is_none() {
            worst = (r, i.map(|i| format!("{x}: {}", local_items[i].label())));
        }
    }
    let subtree = VerificationReport::new("subtree_states", worst.0, worst.1, tol, vec![2], SCALAR);

    // (iii) 𝓔_x ∘ α_x = α_x ∘ 𝓔_o
    let origin = handle.kernel_at(tree.root());
    let fork = origin.fork().clone();
    let fork_items = basis(&fork)?;
    let mut worst = (0.0f64, None);
    for x in &vertices {
        let te = handle.kernel_at(x);
        let (r, i) = sweep(opts.exec, &fork_items, |s| {
            let a = op(&fork, s);
            let lhs = te.apply(&a.shifted_by(x))?;
            let rhs = origin.apply(&a)?.shifted_by(x);
            Ok(lhs.sub(&rhs).l1_norm())
        })?;
        if r > worst.0 || worst.1.is_none() {
            worst = (r, i.map(|i| format!("{x}: {}", fork_items[i].label())));
        }
    }
    let kernels = VerificationReport::new("kernel_copies", worst.0, worst.1, tol, vec![], L1);

    let verdicts = [shifted.pass, subtree.pass, kernels.pass];
    let mut rep =
        VerificationReport::from_parts("translation_invariance", vec![shifted, subtree, kernels], tol, SCALAR)
            .note(&format!("depth {depth}"));
    rep.consistent = Some(verdicts.iter().all(|&v| v == verdicts[0]));
    Ok(rep)
}

/// Markov property of the restriction to `sub` at every vertex of depth ≤ 2,
/// plus agreement of the restricted state with the full one.
pub fn check_sub_qms(handle: &QmsHandle, sub: &Tree, opts: &CheckOptions) -> Result<VerificationReport> {
    let restricted = handle.restrict_to_subtree(sub)?;
    let tree = restricted.tree();
    let mut parts = Vec::new();
    for d in 0..=2usize {
        if d + 1 > restricted.n_max() {
            break;
        }
        for x in tree.level(d).iter() {
            let n = d + 1;
            let (r, w) = markov_residual(&restricted, x, n, opts)?;
            let region = tree.predecessors(x).union(&tree.fork(x));
            let items = basis(&region)?;
            let (agree, i) = sweep(opts.exec, &items, |s| {
                let a = op(&region, s);
                Ok((restricted.evaluate(&a)? - handle.evaluate(&a)?).norm())
            })?;
            let (residual, witness) = if agree > r {
                (agree, i.map(|i| format!("{x}: restriction {}", items[i].label())))
            } else {
                (r, w)
            };
            parts.push(VerificationReport::new(
                &format!("vertex {x}"),
                residual,
                witness,
                opts.tol,
                vec![n],
                SCALAR,
            ));
        }
    }
    Ok(VerificationReport::from_parts("sub_qms", parts, opts.tol, SCALAR).note(&format!("subtree {}", sub.describe())))
}

/// Injects `c·X` at the root into `H_{W_0}`.
pub fn inject_off_diagonal(d: &PotentialDecomposition, c: f64) -> PotentialDecomposition {
    let mut out = d.clone();
    let x = RegionOperator::site(out.region.as_slice()[0].clone(), Letter::X).scale(C64::new(c, 0.0));
    out.site_blocks[0] = out.site_blocks[0].add(&x);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ising::{build_qms, build_qms_with_overrides, ModelSpec, VertexOverride};

    const LN2: f64 = std::f64::consts::LN_2;

    fn v(s: &str) -> VertexWord {
        s.parse().unwrap()
    }

    #[test]
    fn trace_state_is_markov() {
        let h = QmsHandle::trace_state(2, 4).unwrap();
        let o = CheckOptions::default();
        for x in ["o", "1", "2.1"] {
            let r = check_localized_markov(&h, &v(x), None, &o).unwrap();
            assert!(r.pass && r.residual < 1e-14);
        }
    }

    #[test]
    fn ising_markov_and_perturbation() {
        let h = build_qms(&ModelSpec::new(1.0, 1.0)).unwrap();
        let o = CheckOptions::default();
        assert!(check_localized_markov(&h, &v("1"), None, &o).unwrap().pass);
        let bad = h.with_scaled_weights(1.1).unwrap();
        let r = check_localized_markov(&bad, &v("1"), None, &o).unwrap();
        assert!(!r.pass && r.residual > 1e-3);
        assert!(r.witness.is_some());
        let dense = o.with_backend(Backend::Dense);
        let rd = check_localized_markov(&bad, &v("1"), None, &dense).unwrap();
        assert!((rd.residual - r.residual).abs() < 1e-9);
    }

    #[test]
    fn level_check_equivalence() {
        let o = CheckOptions::default();
        let h = build_qms(&ModelSpec::new(LN2, 0.0)).unwrap();
        let r = check_level_markov(&h, 0, &o).unwrap();
        assert!(r.pass && r.consistent == Some(true));
        let bad = h.with_scaled_weights(1.1).unwrap();
        let r = check_level_markov(&bad, 0, &o).unwrap();
        assert!(!r.pass && r.consistent == Some(true));
    }

    #[test]
    fn potential_blocks_commute() {
        let h = build_qms(&ModelSpec::new(LN2, 0.0)).unwrap();
        let d = extract_potential(&h, 1, &DenseBudget::default()).unwrap();
        assert!(d.reconstruction_residual < 1e-9);
        assert!(d.round_trip_residual < 1e-9);
        assert!(check_commutation(&d, 1e-12).pass);
        let bad = inject_off_diagonal(&d, 1.0);
        let r = check_commutation(&bad, 1e-12);
        assert!(!r.pass && r.residual > 0.1);
        let zero = extract_potential(&QmsHandle::trace_state(2, 3).unwrap(), 1, &DenseBudget::default()).unwrap();
        assert!(zero.potential.l1_norm() < 1e-12);
        assert!(check_commutation(&zero, 1e-12).pass);
    }

    #[test]
    fn translation_invariance_verdicts() {
        let o = CheckOptions::default();
        let m = ModelSpec::new(1.0, 0.5);
        let r = check_translation_invariance(&build_qms(&m).unwrap(), &o).unwrap();
        assert!(r.pass && r.consistent == Some(true));
        let ov = VertexOverride {
            vertex: v("1"),
            beta: Some(2.0),
            j: None,
            weight_scale: None,
        };
        let r = check_translation_invariance(&build_qms_with_overrides(&m, &[ov]).unwrap(), &o).unwrap();
        assert!(!r.pass && r.consistent == Some(true), "{r:#?}");
        assert!(r.parts.iter().all(|p| !p.pass));
    }

    #[test]
    fn sub_qms_on_path() {
        let h = build_qms(&ModelSpec::new(1.0, 1.0)).unwrap();
        let path = Tree::finite(&Region::new(vec![v("o"), v("1"), v("1.1"), v("1.1.1"), v("1.1.2")]), 2).unwrap();
        let r = check_sub_qms(&h, &path, &CheckOptions::default()).unwrap();
        assert!(r.pass, "{r:#?}");
    }
}
