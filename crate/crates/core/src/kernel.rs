//! Transition expectations in amplitude-sandwich form and their lifts.
//!
//! A transition expectation at `x` maps the fork algebra of `{x} ∪ S(x)` into
//! the algebra of `x`:
//!
//! ```text
//! 𝓔(a) = Tr_{x]}( w^{1/2} K* a K w^{1/2} )
//! ```
//!
//! with amplitude `K` on the fork and weight `w` on `x`. Each kernel caches its
//! action on the Pauli basis of the fork (the transfer table), which is what the
//! state evaluation contracts against.

use serde::Serialize;

use crate::dense::{self, CMatrix, DenseBudget};
use crate::error::{Error, Result};
use crate::pauli::{basis_string, Letter, PauliString, RegionOperator, C64, ONE, ZERO};
use crate::tree::{self, Region, VertexWord};

/// Pauli coordinates `[I, X, Y, Z]` of a single-site operator.
pub type SiteVector = [C64; 4];

pub const IDENTITY_VECTOR: SiteVector = [ONE, ZERO, ZERO, ZERO];

pub fn letter_vector(l: Letter) -> SiteVector {
    let mut out = [ZERO; 4];
    out[l.index()] = ONE;
    out
}

/// Single-site operator at `v` from Pauli coordinates.
pub fn site_operator(v: &VertexWord, c: &SiteVector) -> RegionOperator {
    RegionOperator::from_terms(
        Region::singleton(v.clone()),
        Letter::ALL
            .iter()
            .zip(c.iter())
            .map(|(l, c)| (PauliString::single(v.clone(), *l), *c)),
    )
}

/// Pauli coordinates of a single-site operator at `v`.
pub fn site_vector(op: &RegionOperator, v: &VertexWord) -> SiteVector {
    let mut out = [ZERO; 4];
    for l in Letter::ALL {
        out[l.index()] = op.coefficient(&PauliString::single(v.clone(), l));
    }
    out
}

/// Pauli coordinates of a 2×2 matrix.
pub fn matrix_vector(m: &CMatrix) -> SiteVector {
    let mut out = [ZERO; 4];
    for l in Letter::ALL {
        let p = dense::letter_matrix(l);
        out[l.index()] = (&p * m).trace() / 2.0;
    }
    out
}

pub fn vector_matrix(c: &SiteVector) -> CMatrix {
    Letter::ALL.iter().fold(CMatrix::zeros(2, 2), |acc, l| {
        acc + dense::letter_matrix(*l) * c[l.index()]
    })
}

#[derive(Clone, Debug)]
pub struct TransitionExpectation {
    target: VertexWord,
    arity: usize,
    fork: Region,
    amplitude: RegionOperator,
    weight: CMatrix,
    sandwich: CMatrix,
    transfer: Vec<SiteVector>,
    fixed_point_residual: Option<f64>,
}

impl TransitionExpectation {
    /// Builds `a ↦ Tr_{x]}(w^{1/2} K* a K w^{1/2})` and verifies that it preserves the identity.
    pub fn from_amplitude(
        target: VertexWord,
        arity: usize,
        amplitude: RegionOperator,
        weight: CMatrix,
    ) -> Result<Self> {
        if weight.nrows() != 2 || weight.ncols() != 2 {
            return Err(Error::KernelRegion("weight must be a single-site operator".into()));
        }
        let hermitian_gap = dense::max_abs(&(&weight - weight.adjoint()));
        let lo = dense::min_eigenvalue(&weight);
        if hermitian_gap > 1e-12 || lo < -1e-12 {
            return Err(Error::NonPositiveWeight {
                vertex: target,
                eigenvalue: lo,
            });
        }
        let te = Self::from_amplitude_unchecked(target, arity, amplitude, weight)?;
        let residual = te.identity_residual();
        if residual > 1e-9 {
            return Err(Error::NotIdentityPreserving {
                vertex: te.target,
                residual,
            });
        }
        Ok(te)
    }

    /// Raw constructor: no positivity or identity-preservation check.
    pub fn from_amplitude_unchecked(
        target: VertexWord,
        arity: usize,
        amplitude: RegionOperator,
        weight: CMatrix,
    ) -> Result<Self> {
        let fork = tree::fork(&target, arity);
        if !amplitude.region().is_subset(&fork) {
            return Err(Error::KernelRegion(format!(
                "amplitude region {:?} is not inside the fork at {target}",
                amplitude.region()
            )));
        }
        let amplitude = amplitude.embed(&fork)?;
        let sandwich = dense::principal_sqrt(&weight);
        let mut te = TransitionExpectation {
            target,
            arity,
            fork,
            amplitude,
            weight,
            sandwich,
            transfer: Vec::new(),
            fixed_point_residual: None,
        };
        te.transfer = (0..4usize.pow(arity as u32 + 1))
            .map(|code| {
                let s = basis_string(&te.fork, code);
                let out = te
                    .apply_pauli(&RegionOperator::from_string(te.fork.clone(), s, ONE))
                    .expect("basis string lives on the fork");
                site_vector(&out, &te.target)
            })
            .collect();
        Ok(te)
    }

    /// `K = id`, `w = id`: the normalized conditional trace onto `x`.
    pub fn conditional_trace(target: VertexWord, arity: usize) -> Self {
        Self::from_amplitude(
            target.clone(),
            arity,
            RegionOperator::identity(tree::fork(&target, arity)),
            CMatrix::identity(2, 2),
        )
        .expect("conditional trace is a valid kernel")
    }

    pub fn with_fixed_point_residual(mut self, residual: f64) -> Self {
        self.fixed_point_residual = Some(residual);
        self
    }

    pub fn fixed_point_residual(&self) -> Option<f64> {
        self.fixed_point_residual
    }

    pub fn target(&self) -> &VertexWord {
        &self.target
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn fork(&self) -> &Region {
        &self.fork
    }

    pub fn amplitude(&self) -> &RegionOperator {
        &self.amplitude
    }

    pub fn weight(&self) -> &CMatrix {
        &self.weight
    }

    pub fn sandwich(&self) -> &CMatrix {
        &self.sandwich
    }

    pub fn transfer_table(&self) -> &[SiteVector] {
        &self.transfer
    }

    fn sandwich_operator(&self) -> RegionOperator {
        site_operator(&self.target, &matrix_vector(&self.sandwich))
    }

    /// Pauli-string route: `a` must be supported in the fork.
    pub fn apply_pauli(&self, a: &RegionOperator) -> Result<RegionOperator> {
        if !a.region().is_subset(&self.fork) {
            return Err(Error::KernelRegion(format!(
                "operator region {:?} is not inside the fork at {}",
                a.region(),
                self.target
            )));
        }
        let s = self.sandwich_operator();
        let inner = self.amplitude.adjoint().multiply(a).multiply(&self.amplitude);
        let full = s.multiply(&inner).multiply(&s);
        Ok(full.partial_trace(&Region::singleton(self.target.clone()))?)
    }

    /// Transfer-table route: the image of `a`, computed term by term.
    pub fn apply(&self, a: &RegionOperator) -> Result<RegionOperator> {
        if !a.region().is_subset(&self.fork) {
            return Err(Error::KernelRegion(format!(
                "operator region {:?} is not inside the fork at {}",
                a.region(),
                self.target
            )));
        }
        let mut acc = [ZERO; 4];
        for (s, c) in a.terms() {
            let row = &self.transfer[self.code_of(s)];
            for l in 0..4 {
                acc[l] += c * row[l];
            }
        }
        Ok(site_operator(&self.target, &acc))
    }

    /// Dense route: `a` is a matrix over the fork in canonical order.
    pub fn apply_dense(&self, a: &CMatrix) -> Result<CMatrix> {
        let budget = DenseBudget::default();
        let k = dense::to_dense(&self.amplitude, &self.fork, &budget)?;
        let target = Region::singleton(self.target.clone());
        let s = dense::embed(&self.sandwich, &target, &self.fork)?;
        let full = &s * k.adjoint() * a * &k * &s;
        dense::partial_trace(&full, &self.fork, &target)
    }

    /// Dense `id ⊗ 𝓔` on a matrix over `region`; fork sites missing from `region` enter as identity.
    /// Returns the image and its region (`region` without the successors of `x`).
    pub fn apply_dense_lifted(&self, m: &CMatrix, region: &Region, budget: &DenseBudget) -> Result<(CMatrix, Region)> {
        let full = region.union(&self.fork);
        budget.check_matrix(full.len())?;
        let m = if &full == region {
            m.clone()
        } else {
            dense::embed(m, region, &full)?
        };
        let k = dense::embed(
            &dense::to_dense(&self.amplitude, &self.fork, budget)?,
            &self.fork,
            &full,
        )?;
        let s = dense::embed(&self.sandwich, &Region::singleton(self.target.clone()), &full)?;
        let b = &s * k.adjoint() * m * &k * &s;
        let keep = full.difference(&tree::direct_successors(&self.target, self.arity));
        let out = dense::partial_trace(&b, &full, &keep)?;
        Ok((out, keep))
    }

    /// Base-4 index of a fork string in the transfer table.
    pub fn code_of(&self, s: &PauliString) -> usize {
        self.fork.iter().fold(0usize, |acc, v| acc * 4 + s.letter_at(v).index())
    }

    /// Image of a product input `f_x ⊗ f_{(x,1)} ⊗ … ⊗ f_{(x,k)}`, factors in fork order.
    pub fn apply_product(&self, factors: &[SiteVector]) -> SiteVector {
        debug_assert_eq!(factors.len(), self.arity + 1);
        let mut out = [ZERO; 4];
        let n = factors.len();
        for (code, row) in self.transfer.iter().enumerate() {
            let mut w = ONE;
            for (pos, f) in factors.iter().enumerate() {
                let digit = (code >> (2 * (n - 1 - pos))) & 3;
                w *= f[digit];
                if w == ZERO {
                    break;
                }
            }
            if w != ZERO {
                for l in 0..4 {
                    out[l] += w * row[l];
                }
            }
        }
        out
    }

    /// `‖𝓔(id) − id‖` in Pauli coefficients.
    pub fn identity_residual(&self) -> f64 {
        let row = &self.transfer[0];
        (0..4).map(|l| (row[l] - IDENTITY_VECTOR[l]).norm()).fold(0.0, f64::max)
    }

    /// Copy of this kernel moved so that it acts at `x`.
    pub fn relocated(&self, x: &VertexWord) -> TransitionExpectation {
        if x == &self.target {
            return self.clone();
        }
        let from = self.target.clone();
        let map = |v: &VertexWord| v.strip_prefix(&from).expect("fork vertex").shifted_by(x);
        TransitionExpectation {
            target: x.clone(),
            arity: self.arity,
            fork: Region::new(self.fork.iter().map(map).collect()),
            amplitude: self.amplitude.map_vertices(map),
            weight: self.weight.clone(),
            sandwich: self.sandwich.clone(),
            transfer: self.transfer.clone(),
            fixed_point_residual: self.fixed_point_residual,
        }
    }

    /// Same amplitude with the weight multiplied by `factor`; bypasses the identity check.
    pub fn with_scaled_weight(&self, factor: f64) -> Result<TransitionExpectation> {
        Self::from_amplitude_unchecked(
            self.target.clone(),
            self.arity,
            self.amplitude.clone(),
            &self.weight * C64::new(factor, 0.0),
        )
    }
}

/// `E_x = id_P ⊗ 𝓔_x`, acting as the identity away from the fork at `x`.
#[derive(Clone, Debug)]
pub struct QuasiConditionalExpectation {
    kernel: TransitionExpectation,
    passive: Region,
}

impl QuasiConditionalExpectation {
    pub fn lift(kernel: TransitionExpectation, passive: Region) -> Result<Self> {
        if !passive.is_disjoint(kernel.fork()) {
            return Err(Error::RegionOverlap(format!(
                "{:?} meets the fork at {}",
                passive,
                kernel.target()
            )));
        }
        Ok(QuasiConditionalExpectation { kernel, passive })
    }

    pub fn kernel(&self) -> &TransitionExpectation {
        &self.kernel
    }

    pub fn passive(&self) -> &Region {
        &self.passive
    }

    /// Source algebra region `P ∪ {x} ∪ S(x)`.
    pub fn source(&self) -> Region {
        self.passive.union(self.kernel.fork())
    }

    pub fn apply(&self, a: &RegionOperator) -> Result<RegionOperator> {
        let fork = self.kernel.fork();
        let x = self.kernel.target();
        let region = a
            .region()
            .union(&self.passive)
            .union(&Region::singleton(x.clone()))
            .difference(&tree::direct_successors(x, self.kernel.arity()));
        let mut terms: Vec<(PauliString, C64)> = Vec::new();
        for (s, c) in a.terms() {
            let (inner, _) = s.restrict(fork);
            let outer: Vec<_> = s.letters().iter().filter(|(v, _)| !fork.contains(v)).cloned().collect();
            let row = &self.kernel.transfer_table()[self.kernel.code_of(&inner)];
            for l in Letter::ALL {
                let coef = row[l.index()];
                if coef == ZERO {
                    continue;
                }
                let mut letters = outer.clone();
                letters.push((x.clone(), l));
                terms.push((PauliString::from_letters(letters), c * coef));
            }
        }
        Ok(RegionOperator::from_terms(region, terms))
    }
}

/// `𝓔_[n,n+1] = ⊗_{x∈Λ_n} 𝓔_x`.
#[derive(Clone, Debug)]
pub struct LevelMap {
    lifts: Vec<QuasiConditionalExpectation>,
}

impl LevelMap {
    pub fn new(level: &Region, kernels: Vec<TransitionExpectation>) -> Result<Self> {
        let mut lifts = Vec::with_capacity(level.len());
        for x in level {
            let te = kernels
                .iter()
                .find(|te| te.target() == x)
                .cloned()
                .ok_or_else(|| Error::MissingKernel(x.clone()))?;
            lifts.push(QuasiConditionalExpectation::lift(te, tree::predecessors(x))?);
        }
        for (i, a) in lifts.iter().enumerate() {
            for b in &lifts[i + 1..] {
                if !a.kernel.fork().is_disjoint(b.kernel.fork()) {
                    return Err(Error::RegionOverlap(format!(
                        "forks at {} and {}",
                        a.kernel.target(),
                        b.kernel.target()
                    )));
                }
            }
        }
        Ok(LevelMap { lifts })
    }

    pub fn lifts(&self) -> &[QuasiConditionalExpectation] {
        &self.lifts
    }

    /// `E_n = ∏_{x∈Λ_n} E_x`.
    pub fn apply(&self, a: &RegionOperator) -> Result<RegionOperator> {
        let order: Vec<usize> = (0..self.lifts.len()).collect();
        self.apply_in_order(a, &order)
    }

    pub fn apply_in_order(&self, a: &RegionOperator, order: &[usize]) -> Result<RegionOperator> {
        order.iter().try_fold(a.clone(), |acc, &i| self.lifts[i].apply(&acc))
    }
}

/// Builds `𝓔_[n,n+1]` from one kernel per vertex of `level`.
pub fn level_map(level: &Region, kernels: Vec<TransitionExpectation>) -> Result<LevelMap> {
    LevelMap::new(level, kernels)
}

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct CpReport {
    pub is_cp: bool,
    pub min_eigenvalue: f64,
}

/// Complete positivity through the Choi operator `Σ_ij E_ij ⊗ 𝓔(E_ij)`.
pub fn check_cp(te: &TransitionExpectation, budget: &DenseBudget) -> Result<CpReport> {
    budget.check_matrix(te.arity() + 2)?;
    let d_in = 1usize << (te.arity() + 1);
    let mut choi = CMatrix::zeros(2 * d_in, 2 * d_in);
    for i in 0..d_in {
        for j in 0..d_in {
            let mut unit = CMatrix::zeros(d_in, d_in);
            unit[(i, j)] = ONE;
            let img = te.apply_dense(&unit)?;
            for r in 0..2 {
                for c in 0..2 {
                    choi[(2 * i + r, 2 * j + c)] = img[(r, c)];
                }
            }
        }
    }
    let min_eigenvalue = dense::min_eigenvalue(&choi);
    Ok(CpReport {
        is_cp: min_eigenvalue >= -1e-9,
        min_eigenvalue,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree::ball;

    fn v(s: &str) -> VertexWord {
        s.parse().unwrap()
    }

    fn z(s: &str) -> RegionOperator {
        RegionOperator::site(v(s), Letter::Z)
    }

    fn re(x: f64) -> C64 {
        C64::new(x, 0.0)
    }

    // A(β = ln 2, J = 0) = 2.25 III + 0.75 ZZI + 0.75 ZIZ + 0.25 IZZ
    fn anchor_amplitude() -> RegionOperator {
        RegionOperator::scalar(ball(1, 2), re(2.25))
            .add(&z("o").multiply(&z("1")).scale(re(0.75)))
            .add(&z("o").multiply(&z("2")).scale(re(0.75)))
            .add(&z("1").multiply(&z("2")).scale(re(0.25)))
    }

    fn anchor_kernel() -> TransitionExpectation {
        TransitionExpectation::from_amplitude(
            VertexWord::root(),
            2,
            anchor_amplitude(),
            CMatrix::identity(2, 2) * re(0.16),
        )
        .unwrap()
    }

    #[test]
    fn conditional_trace_is_partial_trace() {
        let te = TransitionExpectation::conditional_trace(VertexWord::root(), 2);
        let a = z("o")
            .add(&z("1").scale(re(3.0)))
            .add(&RegionOperator::site(v("2"), Letter::X));
        let img = te.apply(&a).unwrap();
        assert_eq!(img, a.partial_trace(&Region::singleton(VertexWord::root())).unwrap());
    }

    #[test]
    fn anchor_kernel_preserves_identity() {
        let te = anchor_kernel();
        assert!(te.identity_residual() < 1e-12);
        let dense_id = te.apply_dense(&CMatrix::identity(8, 8)).unwrap();
        assert!(dense::max_abs(&(dense_id - CMatrix::identity(2, 2))) < 1e-12);
    }

    #[test]
    fn anchor_two_point_image() {
        // 𝓔(σσI) = 2αδ(γ+η) id = 0.6 id
        let te = anchor_kernel();
        let img = te.apply(&z("o").multiply(&z("1"))).unwrap();
        assert!((img.normalized_trace() - re(0.6)).norm() < 1e-12);
        assert_eq!(img.num_terms(), 1);
    }

    #[test]
    fn rejects_bad_weights() {
        let err = TransitionExpectation::from_amplitude(
            VertexWord::root(),
            2,
            anchor_amplitude(),
            CMatrix::identity(2, 2) * re(-1.0),
        );
        assert!(matches!(err, Err(Error::NonPositiveWeight { .. })));
        let err = TransitionExpectation::from_amplitude(
            VertexWord::root(),
            2,
            anchor_amplitude(),
            CMatrix::identity(2, 2) * re(0.2),
        );
        match err {
            Err(Error::NotIdentityPreserving { residual, .. }) => assert!((residual - 0.25).abs() < 1e-12),
            other => panic!("unexpected {other:?}"),
        }
        let err = TransitionExpectation::from_amplitude(v("1"), 2, anchor_amplitude(), CMatrix::identity(2, 2));
        assert!(matches!(err, Err(Error::KernelRegion(_))));
    }

    #[test]
    fn cp_checks() {
        let b = DenseBudget::default();
        assert!(
            check_cp(&TransitionExpectation::conditional_trace(VertexWord::root(), 2), &b)
                .unwrap()
                .is_cp
        );
        assert!(check_cp(&anchor_kernel(), &b).unwrap().is_cp);
        let neg = TransitionExpectation::from_amplitude_unchecked(
            VertexWord::root(),
            2,
            anchor_amplitude(),
            CMatrix::identity(2, 2) * re(-1.0),
        )
        .unwrap();
        let rep = check_cp(&neg, &b).unwrap();
        assert!(!rep.is_cp);
        assert!(rep.min_eigenvalue < -1e-3);
        assert!(check_cp(&anchor_kernel(), &DenseBudget::with_matrix_sites(3)).is_err());
    }

    #[test]
    fn lift_examples() {
        let te = anchor_kernel().relocated(&v("1"));
        let lifted = QuasiConditionalExpectation::lift(te.clone(), Region::empty()).unwrap();
        let a = z("1").multiply(&z("1.1"));
        assert_eq!(
            lifted.apply(&a).unwrap().terms().collect::<Vec<_>>(),
            te.apply(&a).unwrap().terms().collect::<Vec<_>>()
        );
        let lifted = QuasiConditionalExpectation::lift(te.clone(), tree::predecessors(&v("1"))).unwrap();
        // module property: E(c ⊗ a) = c ⊗ 𝓔(a)
        let c = RegionOperator::site(VertexWord::root(), Letter::X);
        let lhs = lifted.apply(&c.multiply(&a)).unwrap();
        let rhs = c.multiply(&te.apply(&a).unwrap());
        assert!(lhs.sub(&rhs).max_coefficient() < 1e-14);
        let id = lifted.apply(&RegionOperator::identity(lifted.source())).unwrap();
        assert!(id.sub(&RegionOperator::identity(Region::empty())).max_coefficient() < 1e-12);
        assert!(QuasiConditionalExpectation::lift(te, Region::singleton(v("1.2"))).is_err());
    }

    #[test]
    fn level_map_acts_forkwise() {
        let base = anchor_kernel();
        let level = tree::level_set(1, 2);
        let lm = level_map(&level, level.iter().map(|x| base.relocated(x)).collect()).unwrap();
        let a = z("1").multiply(&RegionOperator::site(v("1.1"), Letter::X));
        let out = lm.apply(&a).unwrap();
        let expect = base.relocated(&v("1")).apply(&a).unwrap();
        assert!(out.sub(&expect).max_coefficient() < 1e-14);
        assert!(level_map(&level, vec![base.relocated(&v("1"))]).is_err());
    }

    #[test]
    fn relocation_keeps_action() {
        let base = anchor_kernel();
        let moved = base.relocated(&v("2.1"));
        let a = z("o").multiply(&z("2"));
        let lhs = moved.apply(&a.shifted_by(&v("2.1"))).unwrap();
        let rhs = base.apply(&a).unwrap().shifted_by(&v("2.1"));
        assert_eq!(lhs, rhs);
        assert_eq!(moved.fork(), &tree::fork(&v("2.1"), 2));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn fork_operator() -> impl Strategy<Value = RegionOperator> {
            prop::collection::vec((0usize..64, -1.0f64..1.0, -1.0f64..1.0), 1..8).prop_map(|terms| {
                let r = ball(1, 2);
                RegionOperator::from_terms(
                    r.clone(),
                    terms
                        .into_iter()
                        .map(|(code, a, b)| (basis_string(&r, code), C64::new(a, b))),
                )
            })
        }

        fn amplitude() -> impl Strategy<Value = RegionOperator> {
            prop::collection::vec((0usize..64, -1.0f64..1.0, -1.0f64..1.0), 1..6).prop_map(|terms| {
                let r = ball(1, 2);
                RegionOperator::from_terms(
                    r.clone(),
                    terms
                        .into_iter()
                        .map(|(code, a, b)| (basis_string(&r, code), C64::new(a, b))),
                )
            })
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]

            #[test]
            fn routes_agree(a in fork_operator(), k in amplitude(), w in 0.1f64..2.0) {
                let te = TransitionExpectation::from_amplitude_unchecked(
                    VertexWord::root(), 2, k, CMatrix::identity(2, 2) * re(w)).unwrap();
                let table = te.apply(&a).unwrap();
                let pauli = te.apply_pauli(&a).unwrap();
                prop_assert!(table.sub(&pauli).max_coefficient() < 1e-12);
                let b = DenseBudget::default();
                let dense_img = te.apply_dense(&dense::to_dense(&a, te.fork(), &b).unwrap()).unwrap();
                let expect = dense::to_dense(&pauli, &Region::singleton(VertexWord::root()), &b).unwrap();
                prop_assert!(dense::max_abs(&(dense_img - expect)) < 1e-10);
            }

            #[test]
            fn adjoint_commutes(a in fork_operator(), k in amplitude()) {
                let te = TransitionExpectation::from_amplitude_unchecked(
                    VertexWord::root(), 2, k, CMatrix::identity(2, 2)).unwrap();
                let lhs = te.apply(&a.adjoint()).unwrap();
                let rhs = te.apply(&a).unwrap().adjoint();
                prop_assert!(lhs.sub(&rhs).max_coefficient() < 1e-12);
            }

            #[test]
            fn sandwich_kernels_are_positive(a in fork_operator(), k in amplitude()) {
                let te = TransitionExpectation::from_amplitude_unchecked(
                    VertexWord::root(), 2, k, CMatrix::identity(2, 2)).unwrap();
                let pos = a.adjoint().multiply(&a);
                let img = te.apply(&pos).unwrap();
                let m = dense::to_dense(&img, &Region::singleton(VertexWord::root()), &DenseBudget::default()).unwrap();
                prop_assert!(dense::min_eigenvalue(&m) > -1e-9);
            }
        }
    }
}
