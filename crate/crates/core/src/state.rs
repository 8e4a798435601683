//! Finite-volume evaluation of quantum Markov states on trees.
//!
//! A handle holds an initial density at the root, one transition expectation
//! per vertex and a depth horizon. At volume `n` the state is
//!
//! ```text
//! φ_n(a) = φ₀(𝓔_[0,1](a₀ ⊗ 𝓔_[1,2](a₁ ⊗ … 𝓔_[n-1,n](a_{n-1} ⊗ a_n))))
//! ```
//!
//! so forks at levels `0..n` are contracted and the letters at level `n` feed
//! the last kernels directly. Because every kernel preserves the identity, the
//! value does not change once `n` exceeds the depth of the observable.

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use crate::dense::{self, CMatrix, DenseBudget};
use crate::error::{Error, Result};
use crate::kernel::{
    letter_vector, site_vector, vector_matrix, QuasiConditionalExpectation, SiteVector, TransitionExpectation,
    IDENTITY_VECTOR,
};
use crate::par::Execution;
use crate::pauli::{Letter, PauliString, RegionOperator, C64, ZERO};
use crate::tree::{Region, Tree, VertexWord};

const IDENTITY_EXACT: f64 = 1e-12;

/// Per-vertex kernels: a template at `o` plus level and vertex overrides.
#[derive(Clone, Debug)]
pub struct KernelFamily {
    arity: usize,
    base: Arc<TransitionExpectation>,
    levels: BTreeMap<usize, Arc<TransitionExpectation>>,
    vertices: BTreeMap<VertexWord, Arc<TransitionExpectation>>,
    identity_exact: bool,
}

impl KernelFamily {
    pub fn homogeneous(base: TransitionExpectation) -> Result<Self> {
        if !base.target().is_root() {
            return Err(Error::KernelRegion(format!(
                "template kernel targets {}, not o",
                base.target()
            )));
        }
        let identity_exact = base.identity_residual() < IDENTITY_EXACT;
        Ok(KernelFamily {
            arity: base.arity(),
            base: Arc::new(base),
            levels: BTreeMap::new(),
            vertices: BTreeMap::new(),
            identity_exact,
        })
    }

    /// Every vertex of `level` uses `template` (given at `o`).
    pub fn with_level(mut self, level: usize, template: TransitionExpectation) -> Result<Self> {
        self.admit(&template)?;
        let template = template.relocated(&VertexWord::root());
        self.levels.insert(level, Arc::new(template));
        Ok(self)
    }

    /// The kernel at `kernel.target()` replaces whatever the family had there.
    pub fn with_vertex(mut self, kernel: TransitionExpectation) -> Result<Self> {
        self.admit(&kernel)?;
        self.vertices.insert(kernel.target().clone(), Arc::new(kernel));
        Ok(self)
    }

    fn admit(&mut self, te: &TransitionExpectation) -> Result<()> {
        if te.arity() != self.arity {
            return Err(Error::KernelRegion(format!(
                "kernel arity {} does not match family arity {}",
                te.arity(),
                self.arity
            )));
        }
        self.identity_exact &= te.identity_residual() < IDENTITY_EXACT;
        Ok(())
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn is_homogeneous(&self) -> bool {
        self.levels.is_empty() && self.vertices.is_empty()
    }

    /// All kernels map the identity to the identity (to within 1e-12).
    pub fn identity_exact(&self) -> bool {
        self.identity_exact
    }

    /// The kernel governing `x`, possibly stored at another location. Only its
    /// transfer table is meaningful for `x`.
    pub fn template_at(&self, x: &VertexWord) -> &TransitionExpectation {
        if let Some(te) = self.vertices.get(x) {
            return te;
        }
        if let Some(te) = self.levels.get(&x.level()) {
            return te;
        }
        &self.base
    }

    pub fn kernel_at(&self, x: &VertexWord) -> TransitionExpectation {
        self.template_at(x).relocated(x)
    }

    pub fn base(&self) -> &TransitionExpectation {
        &self.base
    }

    pub fn vertex_overrides(&self) -> impl Iterator<Item = &VertexWord> {
        self.vertices.keys()
    }

    fn all(&self) -> impl Iterator<Item = &Arc<TransitionExpectation>> {
        std::iter::once(&self.base)
            .chain(self.levels.values())
            .chain(self.vertices.values())
    }

    /// Largest fixed-point residual, if every kernel carries one.
    pub fn certificate(&self) -> Option<f64> {
        self.all()
            .map(|te| te.fixed_point_residual())
            .try_fold(0.0f64, |acc, r| r.map(|r| acc.max(r)))
    }

    /// Applies `f` to every kernel, keeping the override structure.
    pub fn try_map<F>(&self, f: F) -> Result<KernelFamily>
    where
        F: Fn(&TransitionExpectation) -> Result<TransitionExpectation>,
    {
        let mut out = KernelFamily::homogeneous(f(&self.base)?)?;
        for (level, te) in &self.levels {
            out = out.with_level(*level, f(te)?)?;
        }
        for te in self.vertices.values() {
            out = out.with_vertex(f(te)?)?;
        }
        Ok(out)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum EvaluationPath {
    Nested,
    Explicit,
    Localized,
    Dense,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FiniteVolumeValue {
    pub observable: RegionOperator,
    pub value: C64,
    pub volume: usize,
    pub path: EvaluationPath,
    /// Set when the localized path was requested but the nested path ran instead.
    pub fallback: bool,
}

type Memo = HashMap<(Option<VertexWord>, usize), SiteVector>;

#[derive(Clone, Debug)]
pub struct QmsHandle {
    tree: Tree,
    initial: SiteVector,
    kernels: KernelFamily,
    n_max: usize,
    exec: Execution,
}

impl QmsHandle {
    /// `initial` is a density on the root with normalized trace one.
    pub fn new(tree: Tree, initial: &RegionOperator, kernels: KernelFamily, n_max: usize) -> Result<Self> {
        if kernels.arity() != tree.order() {
            return Err(Error::KernelRegion(format!(
                "kernel arity {} on a tree of order {}",
                kernels.arity(),
                tree.order()
            )));
        }
        let root = Region::singleton(tree.root().clone());
        if !initial.region().is_subset(&root) {
            return Err(Error::InvalidInitialState(format!(
                "initial state must live on {}",
                tree.root()
            )));
        }
        let rho = site_vector(initial, tree.root());
        validate_density(&rho)?;
        Ok(QmsHandle {
            tree,
            initial: rho,
            kernels,
            n_max,
            exec: Execution::default(),
        })
    }

    /// Trace state built from conditional traces.
    pub fn trace_state(k: usize, n_max: usize) -> Result<Self> {
        let tree = Tree::cayley(k)?;
        let te = TransitionExpectation::conditional_trace(VertexWord::root(), k).with_fixed_point_residual(0.0);
        let root = Region::singleton(VertexWord::root());
        QmsHandle::new(
            tree,
            &RegionOperator::identity(root),
            KernelFamily::homogeneous(te)?,
            n_max,
        )
    }

    pub fn with_execution(mut self, exec: Execution) -> Self {
        self.exec = exec;
        self
    }

    pub fn with_kernels(&self, kernels: KernelFamily) -> Result<Self> {
        let mut h = QmsHandle::new(self.tree.clone(), &self.initial_state(), kernels, self.n_max)?;
        h.exec = self.exec;
        Ok(h)
    }

    /// Every weight multiplied by `factor`, skipping the identity check.
    pub fn with_scaled_weights(&self, factor: f64) -> Result<Self> {
        self.with_kernels(self.kernels.try_map(|te| te.with_scaled_weight(factor))?)
    }

    pub fn with_n_max(mut self, n_max: usize) -> Self {
        self.n_max = n_max;
        self
    }

    pub fn tree(&self) -> &Tree {
        &self.tree
    }

    pub fn kernels(&self) -> &KernelFamily {
        &self.kernels
    }

    pub fn kernel_at(&self, x: &VertexWord) -> TransitionExpectation {
        self.kernels.kernel_at(x)
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn execution(&self) -> Execution {
        self.exec
    }

    pub fn certificate(&self) -> Option<f64> {
        self.kernels.certificate()
    }

    pub fn initial_vector(&self) -> &SiteVector {
        &self.initial
    }

    pub fn initial_state(&self) -> RegionOperator {
        crate::kernel::site_operator(self.tree.root(), &self.initial)
    }

    /// `E_x = id_{P(x)} ⊗ 𝓔_x`, with `P(x)` taken inside the handle's tree.
    pub fn lift_at(&self, x: &VertexWord) -> Result<QuasiConditionalExpectation> {
        if !self.tree.contains(x) {
            return Err(Error::NotSubtree(x.to_string()));
        }
        QuasiConditionalExpectation::lift(self.kernel_at(x), self.tree.predecessors(x))
    }

    /// Depth of the observable's support relative to the tree root.
    pub fn depth_of(&self, a: &RegionOperator) -> Result<usize> {
        let mut depth = 0;
        for v in a.region() {
            if !self.tree.contains(v) {
                return Err(Error::NotSubtree(format!("{v} lies outside {}", self.tree.describe())));
            }
            depth = depth.max(self.tree.depth_of(v));
        }
        Ok(depth)
    }

    fn check_volume(&self, a: &RegionOperator, n: usize) -> Result<usize> {
        let depth = self.depth_of(a)?;
        if depth > self.n_max {
            return Err(Error::TooDeep {
                depth,
                limit: self.n_max,
            });
        }
        if n < depth {
            return Err(Error::TooDeep { depth, limit: n });
        }
        Ok(depth)
    }

    /// `φ_n(a)`: forks at depths `0..n` contracted.
    pub fn evaluate_at_volume(&self, a: &RegionOperator, n: usize) -> Result<C64> {
        self.check_volume(a, n)?;
        Ok(self.contract_terms(a, n))
    }

    /// Nested evaluation at the smallest volume that contracts every letter.
    pub fn evaluate_nested(&self, a: &RegionOperator) -> Result<FiniteVolumeValue> {
        let n = self.depth_of(a)? + 1;
        let value = self.evaluate_at_volume(a, n)?;
        Ok(FiniteVolumeValue {
            observable: a.clone(),
            value,
            volume: n,
            path: EvaluationPath::Nested,
            fallback: false,
        })
    }

    pub fn evaluate(&self, a: &RegionOperator) -> Result<C64> {
        Ok(self.evaluate_nested(a)?.value)
    }

    /// Path-plus-fork evaluation. Off-path forks collapse to the identity, which
    /// needs a fixed-point certificate and identity-preserving kernels; without
    /// them the nested path runs and `fallback` is set.
    pub fn evaluate_localized(&self, a: &RegionOperator, x: &VertexWord) -> Result<FiniteVolumeValue> {
        if !self.tree.contains(x) {
            return Err(Error::NotSubtree(x.to_string()));
        }
        let allowed = self.tree.predecessors(x).union(&self.tree.fork(x));
        if !a.region().is_subset(&allowed) {
            return Err(Error::KernelRegion(format!(
                "observable on {:?} is not localized at {x}",
                a.region()
            )));
        }
        if self.certificate().is_none() || !self.kernels.identity_exact() {
            let mut v = self.evaluate_nested(a)?;
            v.fallback = true;
            return Ok(v);
        }
        let n = self.check_volume(a, self.depth_of(a)? + 1)? + 1;
        let path: Vec<VertexWord> = self.tree.predecessors(x).iter().cloned().chain([x.clone()]).collect();
        let value = a.terms().map(|(s, c)| c * self.contract_path(&path, s, n)).sum();
        Ok(FiniteVolumeValue {
            observable: a.clone(),
            value,
            volume: n,
            path: EvaluationPath::Localized,
            fallback: false,
        })
    }

    fn contract_path(&self, path: &[VertexWord], s: &PauliString, n: usize) -> C64 {
        let k = self.tree.order();
        let mut below: Option<(VertexWord, SiteVector)> = None;
        for v in path.iter().rev() {
            let d = self.tree.depth_of(v);
            let a_v = letter_vector(s.letter_at(v));
            if d == n {
                below = Some((v.clone(), a_v));
                continue;
            }
            let mut factors = Vec::with_capacity(k + 1);
            factors.push(a_v);
            for i in 1..=k {
                let c = v.child(i);
                let f = match &below {
                    Some((w, val)) if *w == c => *val,
                    _ if !self.tree.contains(&c) => IDENTITY_VECTOR,
                    _ if self.tree.depth_of(&c) == n => letter_vector(s.letter_at(&c)),
                    _ => {
                        let leaf = s.letter_at(&c);
                        if leaf == Letter::I {
                            IDENTITY_VECTOR
                        } else {
                            let mut f = vec![letter_vector(leaf)];
                            f.extend(std::iter::repeat_n(IDENTITY_VECTOR, k));
                            self.kernels.template_at(&c).apply_product(&f)
                        }
                    }
                };
                factors.push(f);
            }
            below = Some((v.clone(), self.kernels.template_at(v).apply_product(&factors)));
        }
        let root = below.expect("path reaches the root").1;
        (0..4).map(|l| self.initial[l] * root[l]).sum()
    }

    fn contract_terms(&self, a: &RegionOperator, n: usize) -> C64 {
        let terms: Vec<(&PauliString, &C64)> = a.terms().collect();
        let values = self.exec.map(&terms, |(s, c)| {
            let mut memo = Memo::new();
            let root = self.contract(self.tree.root(), s, n, &mut memo);
            *c * (0..4).map(|l| self.initial[l] * root[l]).sum::<C64>()
        });
        values.into_iter().fold(ZERO, |acc, v| acc + v)
    }

    fn contract(&self, v: &VertexWord, s: &PauliString, n: usize, memo: &mut Memo) -> SiteVector {
        let a_v = letter_vector(s.letter_at(v));
        if self.tree.depth_of(v) == n {
            return a_v;
        }
        let k = self.tree.order();
        let mut factors = Vec::with_capacity(k + 1);
        factors.push(a_v);
        for i in 1..=k {
            let c = v.child(i);
            let f = if !self.tree.contains(&c) {
                IDENTITY_VECTOR
            } else if s.touches_subtree(&c) {
                self.contract(&c, s, n, memo)
            } else {
                self.identity_value(&c, n, memo)
            };
            factors.push(f);
        }
        self.kernels.template_at(v).apply_product(&factors)
    }

    fn identity_value(&self, v: &VertexWord, n: usize, memo: &mut Memo) -> SiteVector {
        let d = self.tree.depth_of(v);
        if self.kernels.identity_exact() || d == n {
            return IDENTITY_VECTOR;
        }
        let shared = self.kernels.is_homogeneous() && !self.tree.is_finite();
        let key = (if shared { None } else { Some(v.clone()) }, n - d);
        if let Some(c) = memo.get(&key) {
            return *c;
        }
        let c = self.contract(v, &PauliString::identity(), n, memo);
        memo.insert(key, c);
        c
    }

    /// Dense oracle: full matrices on the ball of radius `n`.
    pub fn evaluate_dense_at_volume(&self, a: &RegionOperator, n: usize, budget: &DenseBudget) -> Result<C64> {
        self.check_volume(a, n)?;
        let region = self.tree.ball(n);
        budget.check_matrix(region.len())?;
        let mut b = dense::to_dense(&a.embed(&region)?, &region, budget)?;
        let mut r = region;
        for m in (0..n).rev() {
            for x in self.tree.level(m).iter() {
                let (next, keep) = self.kernel_at(x).apply_dense_lifted(&b, &r, budget)?;
                b = next;
                r = keep;
            }
        }
        let rho = vector_matrix(&self.initial);
        Ok((rho * b).trace() / 2.0)
    }

    /// Dense density `σ` on the ball of radius `n` with `φ_n(a) = Tr(σ a)`, built
    /// with the dual maps `σ ↦ 2^{-k} K (sσs ⊗ id) K*`.
    pub fn dense_density(&self, n: usize, budget: &DenseBudget) -> Result<(CMatrix, Region)> {
        let region = self.tree.ball(n);
        budget.check_matrix(region.len())?;
        let k = self.tree.order();
        let mut sigma = vector_matrix(&self.initial) * C64::new(0.5, 0.0);
        let mut r = Region::singleton(self.tree.root().clone());
        for m in 0..n {
            for x in self.tree.level(m).iter() {
                let te = self.kernel_at(x);
                let full = r.union(te.fork());
                budget.check_matrix(full.len())?;
                let target = Region::singleton(x.clone());
                let s = dense::embed(te.sandwich(), &target, &r)?;
                let inner = dense::embed(&(&s * &sigma * &s), &r, &full)?;
                let kd = dense::embed(&dense::to_dense(te.amplitude(), te.fork(), budget)?, te.fork(), &full)?;
                let mut next = &kd * inner * kd.adjoint() * C64::new(0.5f64.powi(k as i32), 0.0);
                let keep = full.difference(&te.fork().difference(&self.tree.fork(x)));
                if keep != full {
                    let traced = (full.len() - keep.len()) as i32;
                    next = dense::partial_trace(&next, &full, &keep)? * C64::new(2f64.powi(traced), 0.0);
                }
                sigma = next;
                r = keep;
            }
        }
        Ok((sigma, r))
    }

    /// Single-site marginal at `v` as Pauli coordinates, evaluated with `v` as a leaf.
    pub fn marginal_at(&self, v: &VertexWord) -> Result<SiteVector> {
        let n = self.tree.depth_of(v);
        let mut out = IDENTITY_VECTOR;
        for l in [Letter::X, Letter::Y, Letter::Z] {
            out[l.index()] = self.evaluate_at_volume(&RegionOperator::site(v.clone(), l), n)?;
        }
        Ok(out)
    }

    /// Sub-QMS on `sub`: the marginal at its root as initial state and the same kernels.
    pub fn restrict_to_subtree(&self, sub: &Tree) -> Result<QmsHandle> {
        if !self.tree.contains_tree(sub) {
            return Err(Error::NotSubtree(sub.describe()));
        }
        if sub == &self.tree {
            return Ok(self.clone());
        }
        let root = sub.root().clone();
        let depth = self.tree.depth_of(&root);
        if depth > self.n_max {
            return Err(Error::TooDeep {
                depth,
                limit: self.n_max,
            });
        }
        let rho = self.marginal_at(&root)?;
        let initial = crate::kernel::site_operator(&root, &rho);
        let mut h = QmsHandle::new(sub.clone(), &initial, self.kernels.clone(), (self.n_max - depth).max(1))?;
        h.exec = self.exec;
        Ok(h)
    }
}

fn validate_density(rho: &SiteVector) -> Result<()> {
    if (rho[0] - C64::new(1.0, 0.0)).norm() > 1e-9 {
        return Err(Error::InvalidInitialState(format!("normalized trace is {}", rho[0])));
    }
    if rho.iter().any(|c| c.im.abs() > 1e-12) {
        return Err(Error::InvalidInitialState("not self-adjoint".into()));
    }
    let lo = dense::min_eigenvalue(&vector_matrix(rho));
    if lo < -1e-12 {
        return Err(Error::InvalidInitialState(format!("eigenvalue {lo:e}")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pauli::basis_string;
    use crate::tree::ball;

    fn v(s: &str) -> VertexWord {
        s.parse().unwrap()
    }

    fn re(x: f64) -> C64 {
        C64::new(x, 0.0)
    }

    fn string(spec: &[(&str, Letter)]) -> RegionOperator {
        let s = PauliString::from_letters(spec.iter().map(|(w, l)| (v(w), *l)));
        RegionOperator::from_string(s.support(), s, re(1.0))
    }

    // A(β = ln 2, J = 0) with α = 4/25
    fn anchor() -> QmsHandle {
        let z = |w: &str| RegionOperator::site(v(w), Letter::Z);
        let a = RegionOperator::scalar(ball(1, 2), re(2.25))
            .add(&z("o").multiply(&z("1")).scale(re(0.75)))
            .add(&z("o").multiply(&z("2")).scale(re(0.75)))
            .add(&z("1").multiply(&z("2")).scale(re(0.25)));
        let te = TransitionExpectation::from_amplitude(VertexWord::root(), 2, a, CMatrix::identity(2, 2) * re(0.16))
            .unwrap()
            .with_fixed_point_residual(0.0);
        QmsHandle::new(
            Tree::cayley(2).unwrap(),
            &RegionOperator::identity(Region::singleton(VertexWord::root())),
            KernelFamily::homogeneous(te).unwrap(),
            6,
        )
        .unwrap()
    }

    #[test]
    fn normalization() {
        let h = anchor();
        for n in 0..4 {
            let id = h
                .evaluate_at_volume(&RegionOperator::identity(Region::empty()), n)
                .unwrap();
            assert!((id - re(1.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn two_point_and_one_point() {
        let h = anchor();
        let zz = string(&[("o", Letter::Z), ("1", Letter::Z)]);
        assert!((h.evaluate(&zz).unwrap() - re(0.6)).norm() < 1e-12);
        assert!(h.evaluate(&string(&[("o", Letter::Z)])).unwrap().norm() < 1e-12);
    }

    #[test]
    fn dense_matches_pauli_on_basis() {
        let h = anchor();
        let b = DenseBudget::default();
        let r = ball(1, 2).union(&Region::singleton(v("1.1")));
        for code in (0..4usize.pow(4)).step_by(7) {
            let s = basis_string(&r, code);
            let a = RegionOperator::from_string(r.clone(), s, re(1.0));
            let p = h.evaluate_at_volume(&a, 2).unwrap();
            let d = h.evaluate_dense_at_volume(&a, 2, &b).unwrap();
            assert!((p - d).norm() < 1e-10, "{code}: {p} vs {d}");
        }
    }

    #[test]
    fn dense_density_matches_heisenberg_route() {
        let h = anchor().with_scaled_weights(1.1).unwrap();
        let b = DenseBudget::default();
        let (sigma, region) = h.dense_density(2, &b).unwrap();
        assert_eq!(region, ball(2, 2));
        for code in (0..4usize.pow(7)).step_by(97) {
            let s = basis_string(&region, code);
            let a = RegionOperator::from_string(region.clone(), s, re(1.0));
            let d = h.evaluate_dense_at_volume(&a, 2, &b).unwrap();
            let t = (&sigma * dense::to_dense(&a, &region, &b).unwrap()).trace();
            assert!((t - d).norm() < 1e-10, "{code}: {t} vs {d}");
        }
        let sub = Tree::finite(&Region::new(vec![v("o"), v("1"), v("1.1")]), 2).unwrap();
        let h = anchor().restrict_to_subtree(&sub).unwrap();
        let (sigma, region) = h.dense_density(2, &b).unwrap();
        assert_eq!(region.len(), 3);
        let a = string(&[("o", Letter::Z), ("1.1", Letter::Z)]);
        let t = (&sigma * dense::to_dense(&a.embed(&region).unwrap(), &region, &b).unwrap()).trace();
        assert!((t - h.evaluate(&a).unwrap()).norm() < 1e-12);
    }

    #[test]
    fn too_deep_is_refused() {
        let h = anchor().with_n_max(2);
        let a = string(&[("1.1.1", Letter::Z)]);
        assert!(matches!(h.evaluate(&a), Err(Error::TooDeep { .. })));
        assert!(matches!(
            h.evaluate_dense_at_volume(&string(&[("1", Letter::Z)]), 2, &DenseBudget::with_matrix_sites(5)),
            Err(Error::BudgetExceeded { .. })
        ));
    }

    #[test]
    fn localized_matches_nested() {
        let h = anchor();
        let a = string(&[
            ("o", Letter::Z),
            ("2", Letter::Z),
            ("2.1", Letter::Z),
            ("2.1.2", Letter::Z),
        ]);
        let loc = h.evaluate_localized(&a, &v("2.1")).unwrap();
        assert!(!loc.fallback);
        let nested = h.evaluate_nested(&a).unwrap();
        assert!((loc.value - nested.value).norm() < 1e-12);
        let perturbed = h.with_scaled_weights(1.1).unwrap();
        let loc = perturbed.evaluate_localized(&a, &v("2.1")).unwrap();
        assert!(loc.fallback);
        assert!(h.evaluate_localized(&a, &v("1")).is_err());
    }

    #[test]
    fn initial_state_validation() {
        let te = TransitionExpectation::conditional_trace(VertexWord::root(), 2);
        let fam = KernelFamily::homogeneous(te).unwrap();
        let tree = Tree::cayley(2).unwrap();
        let root = Region::singleton(VertexWord::root());
        let bad = RegionOperator::identity(root.clone()).scale(re(2.0));
        assert!(QmsHandle::new(tree.clone(), &bad, fam.clone(), 3).is_err());
        let bad =
            RegionOperator::identity(root).add(&RegionOperator::site(VertexWord::root(), Letter::Z).scale(re(1.5)));
        assert!(QmsHandle::new(tree, &bad, fam, 3).is_err());
    }

    #[test]
    fn restriction_to_full_tree_is_identity() {
        let h = anchor();
        let sub = h.restrict_to_subtree(&Tree::cayley(2).unwrap()).unwrap();
        assert_eq!(sub.initial_vector(), h.initial_vector());
        let t1 = Tree::future(v("1"), 2).unwrap();
        let sub = h.restrict_to_subtree(&t1).unwrap();
        let a = string(&[("1", Letter::Z), ("1.2", Letter::Z)]);
        assert!((sub.evaluate(&a).unwrap() - h.evaluate(&a).unwrap()).norm() < 1e-12);
        assert!(h.restrict_to_subtree(&Tree::future(v("3"), 3).unwrap()).is_err());
    }
}
