//! Sparse Pauli-string operators on tree regions.
//!
//! Operators are finite linear combinations of Pauli strings with complex
//! coefficients. The normalized trace assigns 1 to the identity, so the trace
//! of any operator is simply the coefficient of its all-identity string, and
//! the partial trace drops every string carrying a non-identity letter on a
//! traced site.

use std::collections::BTreeMap;
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::tree::{Region, VertexWord};

pub type C64 = Complex64;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I_UNIT: C64 = C64::new(0.0, 1.0);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OperatorError {
    #[error("region {keep} is not contained in operator region {region}")]
    NotSubregion { keep: String, region: String },
    #[error("site dimension mismatch: {0} vs {1}")]
    SiteDimension(usize, usize),
    #[error("invalid letter {0:?}")]
    Letter(String),
    #[error("invalid vertex {0:?}")]
    Vertex(String),
}

/// Single-qubit Pauli letter.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Letter {
    I,
    X,
    Y,
    Z,
}

impl Letter {
    pub const ALL: [Letter; 4] = [Letter::I, Letter::X, Letter::Y, Letter::Z];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Letter {
        Letter::ALL[i]
    }

    /// Product `self · other = phase · letter`.
    pub fn compose(self, other: Letter) -> (C64, Letter) {
        use Letter::*;
        match (self, other) {
            (I, p) | (p, I) => (ONE, p),
            (X, X) | (Y, Y) | (Z, Z) => (ONE, I),
            (X, Y) => (I_UNIT, Z),
            (Y, X) => (-I_UNIT, Z),
            (Y, Z) => (I_UNIT, X),
            (Z, Y) => (-I_UNIT, X),
            (Z, X) => (I_UNIT, Y),
            (X, Z) => (-I_UNIT, Y),
        }
    }

    /// Matrix element `<row|letter|col>` in the computational basis.
    pub fn entry(self, row: usize, col: usize) -> C64 {
        match (self, row, col) {
            (Letter::I, r, c) if r == c => ONE,
            (Letter::X, r, c) if r != c => ONE,
            (Letter::Y, 0, 1) => -I_UNIT,
            (Letter::Y, 1, 0) => I_UNIT,
            (Letter::Z, 0, 0) => ONE,
            (Letter::Z, 1, 1) => -ONE,
            _ => ZERO,
        }
    }

    pub fn is_diagonal(self) -> bool {
        matches!(self, Letter::I | Letter::Z)
    }
}

impl fmt::Display for Letter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = match self {
            Letter::I => "I",
            Letter::X => "X",
            Letter::Y => "Y",
            Letter::Z => "Z",
        };
        f.write_str(c)
    }
}

impl std::str::FromStr for Letter {
    type Err = OperatorError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "I" => Ok(Letter::I),
            "X" => Ok(Letter::X),
            "Y" => Ok(Letter::Y),
            "Z" => Ok(Letter::Z),
            _ => Err(OperatorError::Letter(s.to_string())),
        }
    }
}

/// Tensor product of single-site letters; sites not listed carry `I`.
///
/// Stored as the non-identity sites in canonical vertex order, so equality
/// is structural.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct PauliString(Vec<(VertexWord, Letter)>);

impl PauliString {
    pub fn identity() -> Self {
        PauliString(Vec::new())
    }

    pub fn single(v: VertexWord, letter: Letter) -> Self {
        if letter == Letter::I {
            PauliString::identity()
        } else {
            PauliString(vec![(v, letter)])
        }
    }

    pub fn from_letters<I: IntoIterator<Item = (VertexWord, Letter)>>(letters: I) -> Self {
        let mut v: Vec<_> = letters.into_iter().filter(|(_, l)| *l != Letter::I).collect();
        v.sort_by(|a, b| a.0.cmp(&b.0));
        v.dedup_by(|a, b| a.0 == b.0);
        PauliString(v)
    }

    pub fn is_identity(&self) -> bool {
        self.0.is_empty()
    }

    pub fn letters(&self) -> &[(VertexWord, Letter)] {
        &self.0
    }

    pub fn letter_at(&self, v: &VertexWord) -> Letter {
        self.0
            .binary_search_by(|(w, _)| w.cmp(v))
            .map(|i| self.0[i].1)
            .unwrap_or(Letter::I)
    }

    pub fn support(&self) -> Region {
        Region::new(self.0.iter().map(|(v, _)| v.clone()).collect())
    }

    pub fn weight(&self) -> usize {
        self.0.len()
    }

    pub fn is_diagonal(&self) -> bool {
        self.0.iter().all(|(_, l)| l.is_diagonal())
    }

    /// Any non-identity letter on a vertex of the subtree rooted at `v`.
    pub fn touches_subtree(&self, v: &VertexWord) -> bool {
        self.0.iter().any(|(w, _)| v.is_prefix_of(w))
    }

    /// Product of two strings: `self · other = phase · string`.
    pub fn mul(&self, other: &PauliString) -> (C64, PauliString) {
        let mut phase = ONE;
        let mut out = Vec::with_capacity(self.0.len() + other.0.len());
        let (a, b) = (&self.0, &other.0);
        let (mut i, mut j) = (0, 0);
        while i < a.len() && j < b.len() {
            match a[i].0.cmp(&b[j].0) {
                std::cmp::Ordering::Less => {
                    out.push(a[i].clone());
                    i += 1;
                }
                std::cmp::Ordering::Greater => {
                    out.push(b[j].clone());
                    j += 1;
                }
                std::cmp::Ordering::Equal => {
                    let (p, l) = a[i].1.compose(b[j].1);
                    phase *= p;
                    if l != Letter::I {
                        out.push((a[i].0.clone(), l));
                    }
                    i += 1;
                    j += 1;
                }
            }
        }
        out.extend_from_slice(&a[i..]);
        out.extend_from_slice(&b[j..]);
        (phase, PauliString(out))
    }

    /// Split into the letters on `keep` and whether anything lies outside it.
    pub fn restrict(&self, keep: &Region) -> (PauliString, bool) {
        let mut inside = Vec::new();
        let mut outside = false;
        for (v, l) in &self.0 {
            if keep.contains(v) {
                inside.push((v.clone(), *l));
            } else {
                outside = true;
            }
        }
        (PauliString(inside), outside)
    }

    pub fn map_vertices<F: Fn(&VertexWord) -> VertexWord>(&self, f: F) -> PauliString {
        PauliString::from_letters(self.0.iter().map(|(v, l)| (f(v), *l)))
    }

    pub fn label(&self) -> String {
        if self.0.is_empty() {
            return "I".to_string();
        }
        self.0
            .iter()
            .map(|(v, l)| format!("{l}{v}"))
            .collect::<Vec<_>>()
            .join(" ")
    }
}

/// Every Pauli string on `region` (4^|region| of them), in base-4 order with
/// the first canonical vertex most significant.
pub fn pauli_basis(region: &Region) -> Vec<PauliString> {
    let n = region.len();
    let total = 4usize.pow(n as u32);
    (0..total).map(|code| basis_string(region, code)).collect()
}

/// The `code`-th element of [`pauli_basis`].
pub fn basis_string(region: &Region, code: usize) -> PauliString {
    let n = region.len();
    let mut letters = Vec::new();
    for (pos, v) in region.iter().enumerate() {
        let digit = (code >> (2 * (n - 1 - pos))) & 3;
        let l = Letter::from_index(digit);
        if l != Letter::I {
            letters.push((v.clone(), l));
        }
    }
    PauliString(letters)
}

/// Operator on a region as a sparse sum of Pauli strings.
#[derive(Clone, Debug, PartialEq)]
pub struct RegionOperator {
    region: Region,
    terms: BTreeMap<PauliString, C64>,
}

impl RegionOperator {
    pub fn zero(region: Region) -> Self {
        RegionOperator {
            region,
            terms: BTreeMap::new(),
        }
    }

    pub fn identity(region: Region) -> Self {
        RegionOperator::scalar(region, ONE)
    }

    pub fn scalar(region: Region, c: C64) -> Self {
        let mut op = RegionOperator::zero(region);
        op.add_term(PauliString::identity(), c);
        op
    }

    pub fn from_string(region: Region, s: PauliString, c: C64) -> Self {
        let mut op = RegionOperator::zero(region.union(&s.support()));
        op.add_term(s, c);
        op
    }

    /// Single non-trivial letter at `v`, e.g. `σ^{(v)}` for `Letter::Z`.
    pub fn site(v: VertexWord, letter: Letter) -> Self {
        let region = Region::singleton(v.clone());
        RegionOperator::from_string(region, PauliString::single(v, letter), ONE)
    }

    /// Builds an operator whose region is `region` widened by every string support.
    pub fn from_terms<I: IntoIterator<Item = (PauliString, C64)>>(region: Region, terms: I) -> Self {
        let mut region = region;
        let mut op = RegionOperator::zero(Region::empty());
        for (s, c) in terms {
            region = region.union(&s.support());
            op.add_term(s, c);
        }
        op.region = region;
        op
    }

    pub fn region(&self) -> &Region {
        &self.region
    }

    pub fn terms(&self) -> impl Iterator<Item = (&PauliString, &C64)> {
        self.terms.iter()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn coefficient(&self, s: &PauliString) -> C64 {
        self.terms.get(s).copied().unwrap_or(ZERO)
    }

    fn add_term(&mut self, s: PauliString, c: C64) {
        if c == ZERO {
            return;
        }
        let entry = self.terms.entry(s);
        match entry {
            std::collections::btree_map::Entry::Vacant(e) => {
                e.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut e) => {
                let sum = *e.get() + c;
                if sum == ZERO {
                    e.remove();
                } else {
                    *e.get_mut() = sum;
                }
            }
        }
    }

    pub fn add(&self, other: &RegionOperator) -> RegionOperator {
        let mut out = self.clone();
        out.region = self.region.union(&other.region);
        for (s, c) in &other.terms {
            out.add_term(s.clone(), *c);
        }
        out
    }

    pub fn sub(&self, other: &RegionOperator) -> RegionOperator {
        self.add(&other.scale(-ONE))
    }

    pub fn scale(&self, c: C64) -> RegionOperator {
        let mut out = RegionOperator::zero(self.region.clone());
        for (s, v) in &self.terms {
            out.add_term(s.clone(), v * c);
        }
        out
    }

    /// Exact operator product; the result lives on the union of both regions.
    pub fn multiply(&self, other: &RegionOperator) -> RegionOperator {
        let mut out = RegionOperator::zero(self.region.union(&other.region));
        for (a, ca) in &self.terms {
            for (b, cb) in &other.terms {
                let (phase, s) = a.mul(b);
                out.add_term(s, phase * ca * cb);
            }
        }
        out
    }

    pub fn commutator(&self, other: &RegionOperator) -> RegionOperator {
        self.multiply(other).sub(&other.multiply(self))
    }

    pub fn adjoint(&self) -> RegionOperator {
        let mut out = RegionOperator::zero(self.region.clone());
        for (s, c) in &self.terms {
            out.add_term(s.clone(), c.conj());
        }
        out
    }

    /// Normalized trace: the identity coefficient.
    pub fn normalized_trace(&self) -> C64 {
        self.coefficient(&PauliString::identity())
    }

    /// `Tr(self · other)` without forming the product.
    pub fn trace_product(&self, other: &RegionOperator) -> C64 {
        // Tr(P Q) vanishes unless Q = P (Pauli strings square to the identity)
        let (small, large) = if self.terms.len() <= other.terms.len() {
            (self, other)
        } else {
            (other, self)
        };
        small
            .terms
            .iter()
            .filter_map(|(s, c)| large.terms.get(s).map(|d| c * d))
            .sum()
    }

    /// Normalized partial trace onto `keep`.
    pub fn partial_trace(&self, keep: &Region) -> Result<RegionOperator, OperatorError> {
        if !keep.is_subset(&self.region) {
            return Err(OperatorError::NotSubregion {
                keep: format!("{keep:?}"),
                region: format!("{:?}", self.region),
            });
        }
        let mut out = RegionOperator::zero(keep.clone());
        for (s, c) in &self.terms {
            let (inside, outside) = s.restrict(keep);
            if !outside {
                out.add_term(inside, *c);
            }
        }
        Ok(out)
    }

    /// Widen the region; new sites carry the identity.
    pub fn embed(&self, into: &Region) -> Result<RegionOperator, OperatorError> {
        if !self.region.is_subset(into) {
            return Err(OperatorError::NotSubregion {
                keep: format!("{:?}", self.region),
                region: format!("{into:?}"),
            });
        }
        let mut out = self.clone();
        out.region = into.clone();
        Ok(out)
    }

    /// Relabel every vertex (region and strings) through `f`.
    pub fn map_vertices<F: Fn(&VertexWord) -> VertexWord>(&self, f: F) -> RegionOperator {
        let region = Region::new(self.region.iter().map(&f).collect());
        let mut out = RegionOperator::zero(region);
        for (s, c) in &self.terms {
            out.add_term(s.map_vertices(&f), *c);
        }
        out
    }

    /// Image under the composite shift `α_x`.
    pub fn shifted_by(&self, x: &VertexWord) -> RegionOperator {
        self.map_vertices(|v| v.shifted_by(x))
    }

    /// Sum of absolute coefficients; bounds the operator norm.
    pub fn l1_norm(&self) -> f64 {
        self.terms.values().map(|c| c.norm()).sum()
    }

    /// Largest coefficient modulus.
    pub fn max_coefficient(&self) -> f64 {
        self.terms.values().map(|c| c.norm()).fold(0.0, f64::max)
    }

    pub fn is_diagonal(&self) -> bool {
        self.terms.keys().all(PauliString::is_diagonal)
    }

    /// Union of the supports of all strings.
    pub fn support(&self) -> Region {
        self.terms
            .keys()
            .fold(Region::empty(), |acc, s| acc.union(&s.support()))
    }

    /// Drop coefficients with modulus at or below `eps`.
    pub fn pruned(&self, eps: f64) -> RegionOperator {
        let mut out = RegionOperator::zero(self.region.clone());
        for (s, c) in &self.terms {
            if c.norm() > eps {
                out.add_term(s.clone(), *c);
            }
        }
        out
    }
}

/// One term of the operator text form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermRecord {
    pub coefficient: [f64; 2],
    #[serde(default)]
    pub letters: BTreeMap<String, String>,
}

impl RegionOperator {
    pub fn from_records(records: &[TermRecord]) -> Result<RegionOperator, OperatorError> {
        let mut terms = Vec::with_capacity(records.len());
        for rec in records {
            let mut letters = Vec::new();
            for (v, l) in &rec.letters {
                let vertex: VertexWord = v.parse().map_err(|_| OperatorError::Vertex(v.clone()))?;
                letters.push((vertex, l.parse::<Letter>()?));
            }
            let mut region_vertices: Vec<VertexWord> = letters.iter().map(|(v, _)| v.clone()).collect();
            region_vertices.sort();
            let s = PauliString::from_letters(letters);
            terms.push((
                Region::new(region_vertices),
                s,
                C64::new(rec.coefficient[0], rec.coefficient[1]),
            ));
        }
        let region = terms.iter().fold(Region::empty(), |acc, (r, _, _)| acc.union(r));
        Ok(RegionOperator::from_terms(
            region,
            terms.into_iter().map(|(_, s, c)| (s, c)),
        ))
    }

    pub fn to_records(&self) -> Vec<TermRecord> {
        self.terms
            .iter()
            .map(|(s, c)| TermRecord {
                coefficient: [c.re, c.im],
                letters: s
                    .letters()
                    .iter()
                    .map(|(v, l)| (v.to_string(), l.to_string()))
                    .collect(),
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree::{ball, VertexWord};

    fn v(s: &str) -> VertexWord {
        s.parse().unwrap()
    }

    fn z(s: &str) -> RegionOperator {
        RegionOperator::site(v(s), Letter::Z)
    }

    fn fork0() -> Region {
        ball(1, 2)
    }

    #[test]
    fn letter_table_matches_matrices() {
        for a in Letter::ALL {
            for b in Letter::ALL {
                let (phase, c) = a.compose(b);
                for r in 0..2 {
                    for col in 0..2 {
                        let prod: C64 = (0..2).map(|m| a.entry(r, m) * b.entry(m, col)).sum();
                        assert!((prod - phase * c.entry(r, col)).norm() < 1e-15);
                    }
                }
            }
        }
    }

    #[test]
    fn sigma_squared_is_identity() {
        let s = z("o");
        let sq = s.multiply(&s);
        assert_eq!(sq.num_terms(), 1);
        assert_eq!(sq.normalized_trace(), ONE);
    }

    #[test]
    fn diagonal_strings_multiply_sitewise() {
        // (σσI)(σIσ) = Iσσ on (o, 1, 2)
        let a = z("o").multiply(&z("1"));
        let b = z("o").multiply(&z("2"));
        let p = a.multiply(&b);
        let expect = z("1").multiply(&z("2"));
        assert_eq!(p.terms().collect::<Vec<_>>(), expect.terms().collect::<Vec<_>>());
    }

    #[test]
    fn identity_is_neutral() {
        let a = z("o")
            .scale(C64::new(0.5, 0.0))
            .add(&RegionOperator::site(v("1"), Letter::X));
        let id = RegionOperator::identity(fork0());
        assert_eq!(
            id.multiply(&a).terms().collect::<Vec<_>>(),
            a.terms().collect::<Vec<_>>()
        );
    }

    #[test]
    fn trace_examples() {
        assert_eq!(RegionOperator::identity(fork0()).normalized_trace(), ONE);
        assert_eq!(z("o").normalized_trace(), ZERO);
        let op = RegionOperator::scalar(fork0(), C64::new(2.25, 0.0))
            .add(&z("o").multiply(&z("1")).scale(C64::new(0.75, 0.0)));
        assert_eq!(op.normalized_trace(), C64::new(2.25, 0.0));
    }

    #[test]
    fn partial_trace_examples() {
        let keep = Region::singleton(VertexWord::root());
        let a = RegionOperator::identity(fork0()).multiply(&z("1")).multiply(&z("2"));
        let t = a.partial_trace(&keep).unwrap();
        assert_eq!(t.num_terms(), 0);
        let b = z("o").embed(&fork0()).unwrap();
        let t = b.partial_trace(&keep).unwrap();
        assert_eq!(t, z("o"));
        assert!(z("o").partial_trace(&fork0()).is_err());
    }

    #[test]
    fn embed_examples() {
        let e = z("o").embed(&fork0()).unwrap();
        assert_eq!(e.region(), &fork0());
        assert_eq!(e.normalized_trace(), ZERO);
        let id = RegionOperator::identity(Region::empty()).embed(&fork0()).unwrap();
        assert_eq!(id.normalized_trace(), ONE);
        assert!(e.embed(&Region::singleton(VertexWord::root())).is_err());
    }

    #[test]
    fn records_round_trip() {
        let op = z("o")
            .multiply(&z("1"))
            .scale(C64::new(0.75, -0.5))
            .add(&RegionOperator::scalar(Region::empty(), C64::new(2.0, 0.0)));
        let recs = op.to_records();
        let json = serde_json::to_string(&recs).unwrap();
        let back: Vec<TermRecord> = serde_json::from_str(&json).unwrap();
        let op2 = RegionOperator::from_records(&back).unwrap();
        assert_eq!(op2.terms().collect::<Vec<_>>(), op.terms().collect::<Vec<_>>());
        let bad = r#"[{"coefficient":[1,0],"letters":{"o":"W"}}]"#;
        let recs: Vec<TermRecord> = serde_json::from_str(bad).unwrap();
        assert!(RegionOperator::from_records(&recs).is_err());
    }

    #[test]
    fn basis_is_complete_and_ordered() {
        let b = pauli_basis(&fork0());
        assert_eq!(b.len(), 64);
        assert!(b[0].is_identity());
        assert_eq!(b[63].letter_at(&VertexWord::root()), Letter::Z);
        assert_eq!(b[1].letter_at(&v("2")), Letter::X);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn sites() -> Region {
            fork0()
        }

        fn operator() -> impl Strategy<Value = RegionOperator> {
            prop::collection::vec((0usize..64, -2.0f64..2.0, -2.0f64..2.0), 1..6).prop_map(|terms| {
                let r = sites();
                RegionOperator::from_terms(
                    r.clone(),
                    terms
                        .into_iter()
                        .map(|(code, re, im)| (basis_string(&r, code), C64::new(re, im))),
                )
            })
        }

        proptest! {
            #[test]
            fn trace_is_cyclic(a in operator(), b in operator()) {
                let ab = a.multiply(&b).normalized_trace();
                let ba = b.multiply(&a).normalized_trace();
                prop_assert!((ab - ba).norm() < 1e-12);
                prop_assert!((a.trace_product(&b) - ab).norm() < 1e-12);
            }

            #[test]
            fn adjoint_is_involution(a in operator()) {
                prop_assert_eq!(a.adjoint().adjoint(), a);
            }

            #[test]
            fn product_is_associative(a in operator(), b in operator(), c in operator()) {
                let left = a.multiply(&b).multiply(&c);
                let right = a.multiply(&b.multiply(&c));
                prop_assert!(left.sub(&right).max_coefficient() < 1e-12);
            }

            #[test]
            fn embed_then_trace_back(a in operator()) {
                let big = ball(2, 2);
                let e = a.embed(&big).unwrap();
                prop_assert_eq!(e.partial_trace(a.region()).unwrap(), a);
            }
        }
    }
}
