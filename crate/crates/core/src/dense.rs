//! Dense matrix route, used as an oracle for the Pauli-string path.
//!
//! Kronecker factors follow canonical region order with the first vertex the
//! most significant factor.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::pauli::{basis_string, Letter, OperatorError, PauliString, RegionOperator, C64, ONE, ZERO};
use crate::tree::Region;

pub type CMatrix = DMatrix<C64>;

/// Size guard for the dense route, in qubit sites.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DenseBudget {
    pub matrix_sites: usize,
    pub vector_sites: usize,
}

impl Default for DenseBudget {
    fn default() -> Self {
        DenseBudget {
            matrix_sites: 7,
            vector_sites: 12,
        }
    }
}

impl DenseBudget {
    pub fn with_matrix_sites(matrix_sites: usize) -> Self {
        DenseBudget {
            matrix_sites,
            ..Default::default()
        }
    }

    pub fn check_matrix(&self, sites: usize) -> Result<()> {
        if sites > self.matrix_sites {
            Err(Error::BudgetExceeded {
                sites,
                limit: self.matrix_sites,
            })
        } else {
            Ok(())
        }
    }
}

pub fn letter_matrix(l: Letter) -> CMatrix {
    CMatrix::from_fn(2, 2, |r, c| l.entry(r, c))
}

pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

fn string_entry(s: &PauliString, region: &Region, row: usize, col: usize) -> C64 {
    let n = region.len();
    let mut out = ONE;
    for (pos, v) in region.iter().enumerate() {
        let shift = n - 1 - pos;
        let (r, c) = ((row >> shift) & 1, (col >> shift) & 1);
        let e = s.letter_at(v).entry(r, c);
        if e == ZERO {
            return ZERO;
        }
        out *= e;
    }
    out
}

/// Dense matrix of `op` over `region` (which must contain the operator's region).
pub fn to_dense(op: &RegionOperator, region: &Region, budget: &DenseBudget) -> Result<CMatrix> {
    budget.check_matrix(region.len())?;
    if !op.region().is_subset(region) {
        return Err(OperatorError::NotSubregion {
            keep: format!("{:?}", op.region()),
            region: format!("{region:?}"),
        }
        .into());
    }
    let dim = 1usize << region.len();
    let mut m = CMatrix::zeros(dim, dim);
    let n = region.len();
    for (s, c) in op.terms() {
        // each string is a phased permutation: one nonzero per row
        let mut xmask = 0usize;
        for (pos, v) in region.iter().enumerate() {
            if matches!(s.letter_at(v), Letter::X | Letter::Y) {
                xmask |= 1 << (n - 1 - pos);
            }
        }
        for row in 0..dim {
            let col = row ^ xmask;
            m[(row, col)] += c * string_entry(s, region, row, col);
        }
    }
    Ok(m)
}

/// `Tr(σ · op)` without forming the dense matrix of `op`.
pub fn expectation(sigma: &CMatrix, op: &RegionOperator, region: &Region) -> Result<C64> {
    let n = region.len();
    let dim = 1usize << n;
    if sigma.nrows() != dim || sigma.ncols() != dim {
        return Err(OperatorError::SiteDimension(sigma.nrows(), dim).into());
    }
    let embedded = op.embed(region)?;
    let mut total = ZERO;
    for (s, c) in embedded.terms() {
        let mut xmask = 0usize;
        for (pos, v) in region.iter().enumerate() {
            if matches!(s.letter_at(v), Letter::X | Letter::Y) {
                xmask |= 1 << (n - 1 - pos);
            }
        }
        let mut acc = ZERO;
        for row in 0..dim {
            let col = row ^ xmask;
            acc += sigma[(col, row)] * string_entry(s, region, row, col);
        }
        total += c * acc;
    }
    Ok(total)
}

/// Pauli coefficients of a dense matrix: `c_P = Tr(P · m) / dim`.
pub fn from_dense(m: &CMatrix, region: &Region) -> RegionOperator {
    let n = region.len();
    let dim = 1usize << n;
    assert_eq!(m.nrows(), dim, "matrix does not match region");
    let mut terms = Vec::new();
    for code in 0..4usize.pow(n as u32) {
        let s = basis_string(region, code);
        let mut xmask = 0usize;
        for (pos, v) in region.iter().enumerate() {
            if matches!(s.letter_at(v), Letter::X | Letter::Y) {
                xmask |= 1 << (n - 1 - pos);
            }
        }
        let mut acc = ZERO;
        for row in 0..dim {
            let col = row ^ xmask;
            // Tr(P m) = Σ_row P[row, col] m[col, row]
            acc += string_entry(&s, region, row, col) * m[(col, row)];
        }
        let c = acc / dim as f64;
        if c != ZERO {
            terms.push((s, c));
        }
    }
    RegionOperator::from_terms(region.clone(), terms)
}

/// Normalized partial trace keeping the sites of `keep` (a subset of `region`).
pub fn partial_trace(m: &CMatrix, region: &Region, keep: &Region) -> Result<CMatrix> {
    if !keep.is_subset(region) {
        return Err(OperatorError::NotSubregion {
            keep: format!("{keep:?}"),
            region: format!("{region:?}"),
        }
        .into());
    }
    let n = region.len();
    let kept: Vec<usize> = region
        .iter()
        .enumerate()
        .filter(|(_, v)| keep.contains(v))
        .map(|(p, _)| n - 1 - p)
        .collect();
    let traced: Vec<usize> = region
        .iter()
        .enumerate()
        .filter(|(_, v)| !keep.contains(v))
        .map(|(p, _)| n - 1 - p)
        .collect();
    let kd = 1usize << kept.len();
    let td = 1usize << traced.len();
    let spread = |bits_kept: usize, bits_traced: usize| -> usize {
        let mut idx = 0;
        for (i, &b) in kept.iter().enumerate() {
            if (bits_kept >> (kept.len() - 1 - i)) & 1 == 1 {
                idx |= 1 << b;
            }
        }
        for (i, &b) in traced.iter().enumerate() {
            if (bits_traced >> (traced.len() - 1 - i)) & 1 == 1 {
                idx |= 1 << b;
            }
        }
        idx
    };
    let mut out = CMatrix::zeros(kd, kd);
    for r in 0..kd {
        for c in 0..kd {
            let mut acc = ZERO;
            for t in 0..td {
                acc += m[(spread(r, t), spread(c, t))];
            }
            out[(r, c)] = acc / td as f64;
        }
    }
    Ok(out)
}

/// Widen `m` from `region` to `into`, identity on the new sites.
pub fn embed(m: &CMatrix, region: &Region, into: &Region) -> Result<CMatrix> {
    if !region.is_subset(into) {
        return Err(OperatorError::NotSubregion {
            keep: format!("{region:?}"),
            region: format!("{into:?}"),
        }
        .into());
    }
    let n = into.len();
    let pos: Vec<usize> = region
        .iter()
        .map(|v| n - 1 - into.position(v).expect("subset"))
        .collect();
    let mut old_mask = 0usize;
    for &b in &pos {
        old_mask |= 1 << b;
    }
    let gather = |idx: usize| -> usize {
        let mut out = 0;
        for (i, &b) in pos.iter().enumerate() {
            if (idx >> b) & 1 == 1 {
                out |= 1 << (pos.len() - 1 - i);
            }
        }
        out
    };
    let dim = 1usize << n;
    let mut out = CMatrix::zeros(dim, dim);
    for r in 0..dim {
        for c in 0..dim {
            if (r & !old_mask) == (c & !old_mask) {
                out[(r, c)] = m[(gather(r), gather(c))];
            }
        }
    }
    Ok(out)
}

fn is_diagonal(m: &CMatrix) -> bool {
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            if r != c && m[(r, c)] != ZERO {
                return false;
            }
        }
    }
    true
}

/// Eigenvalues (ascending) and eigenvectors of a Hermitian matrix.
pub fn hermitian_eigen(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    let h = (m + m.adjoint()) * C64::new(0.5, 0.0);
    let eig = nalgebra::SymmetricEigen::new(h);
    let mut idx: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    idx.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let vals = idx.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vecs = CMatrix::from_fn(m.nrows(), m.ncols(), |r, c| eig.eigenvectors[(r, idx[c])]);
    (vals, vecs)
}

pub fn min_eigenvalue(m: &CMatrix) -> f64 {
    hermitian_eigen(m).0.first().copied().unwrap_or(0.0)
}

/// `f(m)` for Hermitian `m` by spectral calculus; diagonal inputs are mapped
/// entrywise.
pub fn hermitian_fn<F: Fn(f64) -> C64>(m: &CMatrix, f: F) -> CMatrix {
    if is_diagonal(m) {
        return CMatrix::from_fn(m.nrows(), m.ncols(), |r, c| if r == c { f(m[(r, r)].re) } else { ZERO });
    }
    let (vals, vecs) = hermitian_eigen(m);
    let d = CMatrix::from_fn(vals.len(), vals.len(), |r, c| if r == c { f(vals[r]) } else { ZERO });
    &vecs * d * vecs.adjoint()
}

/// Principal square root; negative eigenvalues map to `i·sqrt(|λ|)`.
pub fn principal_sqrt(m: &CMatrix) -> CMatrix {
    hermitian_fn(m, |x| C64::new(x, 0.0).sqrt())
}

pub fn hermitian_log(m: &CMatrix) -> Result<CMatrix> {
    let lo = if is_diagonal(m) {
        (0..m.nrows()).map(|i| m[(i, i)].re).fold(f64::INFINITY, f64::min)
    } else {
        min_eigenvalue(m)
    };
    if lo <= 0.0 {
        return Err(Error::NotFaithful(lo));
    }
    Ok(hermitian_fn(m, |x| C64::new(x.ln(), 0.0)))
}

pub fn hermitian_exp(m: &CMatrix) -> CMatrix {
    hermitian_fn(m, |x| C64::new(x.exp(), 0.0))
}

/// Largest singular value.
pub fn operator_norm(m: &CMatrix) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone().singular_values().max()
}

/// Largest entry modulus.
pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|c| c.norm()).fold(0.0, f64::max)
}

/// Normalized trace.
pub fn normalized_trace(m: &CMatrix) -> C64 {
    m.trace() / m.nrows() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree::{ball, VertexWord};

    fn v(s: &str) -> VertexWord {
        s.parse().unwrap()
    }

    #[test]
    fn sigma_is_diag() {
        let m = to_dense(
            &RegionOperator::site(VertexWord::root(), Letter::Z),
            &Region::singleton(VertexWord::root()),
            &DenseBudget::default(),
        )
        .unwrap();
        assert_eq!(m, CMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![ONE, -ONE])));
    }

    #[test]
    fn kronecker_order() {
        let region = Region::new(vec![VertexWord::root(), v("1")]);
        let m = to_dense(
            &RegionOperator::site(v("1"), Letter::Z),
            &region,
            &DenseBudget::default(),
        )
        .unwrap();
        let diag: Vec<f64> = (0..4).map(|i| m[(i, i)].re).collect();
        assert_eq!(diag, [1.0, -1.0, 1.0, -1.0]);
        let y = to_dense(
            &RegionOperator::site(VertexWord::root(), Letter::Y),
            &region,
            &DenseBudget::default(),
        )
        .unwrap();
        assert_eq!(y, kron(&letter_matrix(Letter::Y), &letter_matrix(Letter::I)));
    }

    #[test]
    fn budget_refuses() {
        let region = ball(3, 2);
        let err = to_dense(
            &RegionOperator::identity(region.clone()),
            &region,
            &DenseBudget::default(),
        );
        assert_eq!(err, Err(Error::BudgetExceeded { sites: 15, limit: 7 }));
    }

    #[test]
    fn dense_round_trip() {
        let region = ball(1, 2);
        let op = RegionOperator::site(v("1"), Letter::X)
            .multiply(&RegionOperator::site(v("2"), Letter::Y))
            .scale(C64::new(0.3, -1.0))
            .add(&RegionOperator::site(VertexWord::root(), Letter::Z));
        let m = to_dense(&op, &region, &DenseBudget::default()).unwrap();
        let back = from_dense(&m, &region);
        assert!(back.sub(&op).max_coefficient() < 1e-14);
    }

    #[test]
    fn partial_trace_and_embed_agree_with_pauli_route() {
        let region = ball(1, 2);
        let keep = Region::new(vec![VertexWord::root(), v("2")]);
        let op = RegionOperator::site(v("1"), Letter::Z)
            .add(
                &RegionOperator::site(VertexWord::root(), Letter::X).multiply(&RegionOperator::site(v("2"), Letter::Y)),
            )
            .add(&RegionOperator::scalar(region.clone(), C64::new(0.5, 0.0)));
        let b = DenseBudget::default();
        let m = to_dense(&op, &region, &b).unwrap();
        let pt = partial_trace(&m, &region, &keep).unwrap();
        let expect = to_dense(&op.partial_trace(&keep).unwrap(), &keep, &b).unwrap();
        assert!(max_abs(&(pt - expect)) < 1e-14);
        let small = to_dense(&op.partial_trace(&keep).unwrap(), &keep, &b).unwrap();
        let big = embed(&small, &keep, &region).unwrap();
        let expect = to_dense(&op.partial_trace(&keep).unwrap(), &region, &b).unwrap();
        assert!(max_abs(&(big - expect)) < 1e-14);
    }

    #[test]
    fn log_exp_inverse() {
        let m = CMatrix::from_row_slice(
            2,
            2,
            &[
                C64::new(2.0, 0.0),
                C64::new(0.0, 0.5),
                C64::new(0.0, -0.5),
                C64::new(1.0, 0.0),
            ],
        );
        let l = hermitian_log(&m).unwrap();
        assert!(max_abs(&(hermitian_exp(&l) - &m)) < 1e-12);
        let s = principal_sqrt(&m);
        assert!(max_abs(&(&s * &s - &m)) < 1e-12);
        assert!(hermitian_log(&CMatrix::identity(2, 2).scale(-1.0)).is_err());
    }
}
