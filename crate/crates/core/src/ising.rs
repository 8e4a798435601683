//! Ising model with competing interactions on the binary Cayley tree.
//!
//! Nearest-neighbour couplings `K = exp(β·½(II + σσ))` join a vertex to each
//! successor, and `L = exp(Jβ·½(II + σσ))` couples the two successors. The
//! fork amplitude is `A = K_{x,(x,1)} K_{x,(x,2)} L_{(x,1),(x,2)}`.

use serde::{Deserialize, Serialize};

use crate::dense::{self, CMatrix, DenseBudget};
use crate::error::{Error, Result};
use crate::kernel::{matrix_vector, vector_matrix, SiteVector, TransitionExpectation, IDENTITY_VECTOR};
use crate::pauli::{Letter, PauliString, RegionOperator, C64};
use crate::state::{EvaluationPath, FiniteVolumeValue, KernelFamily, QmsHandle};
use crate::tree::{self, Region, Tree, VertexWord};

pub const DEFAULT_DEPTH: usize = 6;
pub const MAX_ITERATIONS: usize = 500;
pub const FIXED_POINT_TOL: f64 = 1e-10;
/// Deepest volume the Pauli explicit formula accepts.
pub const EXPLICIT_MAX_VOLUME: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub beta: f64,
    #[serde(rename = "J")]
    pub j: f64,
    pub k: usize,
    pub depth: usize,
}

impl ModelSpec {
    pub fn new(beta: f64, j: f64) -> Self {
        ModelSpec {
            beta,
            j,
            k: 2,
            depth: DEFAULT_DEPTH,
        }
    }

    pub fn with_depth(mut self, depth: usize) -> Self {
        self.depth = depth;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !self.beta.is_finite() || self.beta < 0.0 {
            return Err(Error::InvalidModel(format!(
                "beta must be finite and >= 0, got {}",
                self.beta
            )));
        }
        if !self.j.is_finite() || self.j < 0.0 {
            return Err(Error::InvalidModel(format!(
                "J must be finite and >= 0, got {}",
                self.j
            )));
        }
        if self.k < 1 {
            return Err(Error::InvalidModel("k must be >= 1".into()));
        }
        Ok(())
    }

    fn require_binary(&self) -> Result<()> {
        self.validate()?;
        if self.k != 2 {
            return Err(Error::Unsupported(format!(
                "the competing-interaction fork couples exactly two successors; k = {}",
                self.k
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Couplings {
    pub k0: f64,
    pub k3: f64,
    pub r0: f64,
    pub r3: f64,
    /// `K` on `{o, (1)}`.
    pub nearest: RegionOperator,
    /// `L` on `{(1), (2)}`.
    pub competing: RegionOperator,
}

fn re(x: f64) -> C64 {
    C64::new(x, 0.0)
}

fn bond(u: &VertexWord, v: &VertexWord, c0: f64, c3: f64) -> RegionOperator {
    let region = Region::new(vec![u.clone(), v.clone()]);
    let zz = PauliString::from_letters([(u.clone(), Letter::Z), (v.clone(), Letter::Z)]);
    RegionOperator::from_terms(region, [(PauliString::identity(), re(c0)), (zz, re(c3))])
}

pub fn build_couplings(m: &ModelSpec) -> Result<Couplings> {
    m.validate()?;
    let (e, f) = (m.beta.exp(), (m.j * m.beta).exp());
    let (k0, k3) = ((e + 1.0) / 2.0, (e - 1.0) / 2.0);
    let (r0, r3) = ((f + 1.0) / 2.0, (f - 1.0) / 2.0);
    let (o, s1, s2) = (VertexWord::root(), VertexWord::new(&[1]), VertexWord::new(&[2]));
    Ok(Couplings {
        k0,
        k3,
        r0,
        r3,
        nearest: bond(&o, &s1, k0, k3),
        competing: bond(&s1, &s2, r0, r3),
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct ForkAmplitude {
    /// `A` on `{o, (1), (2)}`.
    pub operator: RegionOperator,
    pub gamma: f64,
    pub delta: f64,
    pub eta: f64,
}

impl ForkAmplitude {
    /// `A` as the product of its coupling factors.
    pub fn product_form(c: &Couplings) -> RegionOperator {
        let k2 = c
            .nearest
            .map_vertices(|v| if v.is_root() { v.clone() } else { VertexWord::new(&[2]) });
        c.nearest
            .multiply(&k2)
            .multiply(&c.competing)
            .embed(&tree::ball(1, 2))
            .expect("fork region")
    }
}

pub fn build_amplitude(m: &ModelSpec) -> Result<ForkAmplitude> {
    m.require_binary()?;
    let c = build_couplings(m)?;
    let gamma = c.k0 * c.k0 * c.r0 + c.k3 * c.k3 * c.r3;
    let delta = c.k0 * c.k3 * (c.r0 + c.r3);
    let eta = c.k0 * c.k0 * c.r3 + c.k3 * c.k3 * c.r0;
    let z = |i: &[usize]| RegionOperator::site(VertexWord::new(i), Letter::Z);
    let operator = RegionOperator::scalar(tree::ball(1, 2), re(gamma))
        .add(&z(&[]).multiply(&z(&[1])).scale(re(delta)))
        .add(&z(&[]).multiply(&z(&[2])).scale(re(delta)))
        .add(&z(&[1]).multiply(&z(&[2])).scale(re(eta)));
    Ok(ForkAmplitude {
        operator,
        gamma,
        delta,
        eta,
    })
}

/// `α = 4 / (e^{2Jβ}(e^{4β} + 1) + 2e^{2β})`.
pub fn closed_form_alpha(m: &ModelSpec) -> Result<f64> {
    m.require_binary()?;
    let (b, j) = (m.beta, m.j);
    Ok(4.0 / ((2.0 * j * b).exp() * ((4.0 * b).exp() + 1.0) + 2.0 * (2.0 * b).exp()))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FixedPoint {
    /// Pauli coordinates `[I, X, Y, Z]` of `h`.
    pub h: SiteVector,
    pub residual: f64,
    pub iterations: usize,
    /// `λ` in `F(ĥ) = λ ĥ` for the trace-normalized direction `ĥ`.
    pub eigenvalue: f64,
}

impl FixedPoint {
    pub fn matrix(&self) -> CMatrix {
        vector_matrix(&self.h)
    }

    /// `α` when `h = α·id`.
    pub fn scalar(&self) -> Option<f64> {
        let off = self.h[1..].iter().map(|c| c.norm()).fold(0.0, f64::max);
        (off < 1e-12 && self.h[0].im.abs() < 1e-12).then_some(self.h[0].re)
    }
}

/// Solves `Tr_{o]}(A*(id ⊗ h ⊗ … ⊗ h)A) = h` for an amplitude on `{o} ∪ S(o)`.
///
/// Iterates on the trace-normalized direction and recovers the scale from
/// `F(cĥ) = c^k λ ĥ`.
pub fn solve_fixed_point(amplitude: &RegionOperator, arity: usize) -> Result<FixedPoint> {
    let map = TransitionExpectation::from_amplitude_unchecked(
        VertexWord::root(),
        arity,
        amplitude.clone(),
        CMatrix::identity(2, 2),
    )?;
    let apply = |h: &SiteVector| {
        let mut f = vec![IDENTITY_VECTOR];
        f.extend(std::iter::repeat_n(*h, arity));
        map.apply_product(&f)
    };
    let mut dir = IDENTITY_VECTOR;
    let mut step = f64::INFINITY;
    let mut iterations = 0;
    while iterations < MAX_ITERATIONS {
        iterations += 1;
        let img = apply(&dir);
        let tr = img[0].re;
        let lo = dense::min_eigenvalue(&vector_matrix(&img));
        if tr <= 0.0 || lo < -1e-12 {
            return Err(Error::NonPositiveIterate(lo.min(tr)));
        }
        let next: SiteVector = std::array::from_fn(|l| img[l] / tr);
        step = (0..4).map(|l| (next[l] - dir[l]).norm()).fold(0.0, f64::max);
        dir = next;
        if step < 1e-14 {
            break;
        }
    }
    let lambda = apply(&dir)[0].re;
    let scale = if arity == 1 {
        if (lambda - 1.0).abs() > 1e-9 {
            return Err(Error::NoScale(format!("linear map with eigenvalue {lambda}")));
        }
        1.0
    } else {
        lambda.powf(-1.0 / (arity as f64 - 1.0))
    };
    let h: SiteVector = std::array::from_fn(|l| dir[l] * scale);
    let img = apply(&h);
    let residual = (0..4).map(|l| (img[l] - h[l]).norm()).fold(0.0, f64::max);
    if residual >= FIXED_POINT_TOL {
        return Err(Error::NoConvergence {
            iterations,
            residual: residual.max(step),
        });
    }
    Ok(FixedPoint {
        h,
        residual,
        iterations,
        eigenvalue: lambda,
    })
}

/// The Ising kernel at `o` with its fixed-point weight.
pub fn ising_kernel(m: &ModelSpec) -> Result<TransitionExpectation> {
    let amp = build_amplitude(m)?;
    let fp = solve_fixed_point(&amp.operator, m.k)?;
    Ok(
        TransitionExpectation::from_amplitude(VertexWord::root(), m.k, amp.operator, fp.matrix())?
            .with_fixed_point_residual(fp.residual),
    )
}

/// Per-vertex change to the homogeneous model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VertexOverride {
    pub vertex: VertexWord,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default, rename = "J", skip_serializing_if = "Option::is_none")]
    pub j: Option<f64>,
    /// Multiplies the weight without re-solving, which breaks identity preservation.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight_scale: Option<f64>,
}

pub fn build_qms(m: &ModelSpec) -> Result<QmsHandle> {
    build_qms_with_overrides(m, &[])
}

/// Homogeneous handle with the trace state at the root, then the overrides.
pub fn build_qms_with_overrides(m: &ModelSpec, overrides: &[VertexOverride]) -> Result<QmsHandle> {
    let mut family = KernelFamily::homogeneous(ising_kernel(m)?)?;
    for o in overrides {
        if o.vertex.max_index() > m.k {
            return Err(Error::InvalidModel(format!(
                "override vertex {} is not in the tree",
                o.vertex
            )));
        }
        let local = ModelSpec {
            beta: o.beta.unwrap_or(m.beta),
            j: o.j.unwrap_or(m.j),
            ..*m
        };
        let mut te = ising_kernel(&local)?.relocated(&o.vertex);
        if let Some(s) = o.weight_scale {
            if !(s.is_finite() && s > 0.0) {
                return Err(Error::InvalidModel(format!("weight_scale must be positive, got {s}")));
            }
            te = te.with_scaled_weight(s)?;
        }
        family = family.with_vertex(te)?;
    }
    let tree = Tree::cayley(m.k)?;
    let root = Region::singleton(VertexWord::root());
    QmsHandle::new(tree, &RegionOperator::identity(root), family, m.depth)
}

fn interior_count(n: usize, k: usize) -> i32 {
    if n == 0 {
        0
    } else {
        tree::ball(n - 1, k).len() as i32
    }
}

/// Explicit product formula at volume `n`:
/// `α^{|Λ_[0,n-1]|} Tr(K_[0,n] a K*_[0,n])` with `K_[0,n] = ∏_{x∈Λ_[0,n-1]} A_x`.
#[derive(Clone, Debug)]
pub struct ExplicitIsing {
    alpha: f64,
    volume: usize,
    interior: i32,
    /// `K*_[0,n] K_[0,n]`; the fork amplitudes are diagonal, so the ordered
    /// sandwich and this product give the same trace.
    gram: RegionOperator,
}

impl ExplicitIsing {
    pub fn new(m: &ModelSpec, n: usize) -> Result<Self> {
        m.require_binary()?;
        if n > EXPLICIT_MAX_VOLUME {
            return Err(Error::BudgetExceeded {
                sites: tree::ball(n, m.k).len(),
                limit: tree::ball(EXPLICIT_MAX_VOLUME, m.k).len(),
            });
        }
        let alpha = closed_form_alpha(m)?;
        let amp = build_amplitude(m)?.operator;
        let square = amp.adjoint().multiply(&amp);
        let mut gram = RegionOperator::identity(tree::ball(n, m.k));
        if n > 0 {
            for x in tree::ball(n - 1, m.k).iter() {
                gram = gram.multiply(&square.shifted_by(x));
            }
        }
        Ok(ExplicitIsing {
            alpha,
            volume: n,
            interior: interior_count(n, m.k),
            gram,
        })
    }

    pub fn volume(&self) -> usize {
        self.volume
    }

    pub fn evaluate(&self, a: &RegionOperator) -> Result<C64> {
        let region = self.gram.region();
        if !a.region().is_subset(region) {
            return Err(Error::TooDeep {
                depth: a.region().depth().unwrap_or(0),
                limit: self.volume,
            });
        }
        Ok(self.gram.trace_product(a) * self.alpha.powi(self.interior))
    }
}

pub fn explicit_at_volume(m: &ModelSpec, a: &RegionOperator, n: usize) -> Result<C64> {
    ExplicitIsing::new(m, n)?.evaluate(a)
}

/// Same formula on dense matrices over `Λ_[0,n]`, in the ordered sandwich form.
pub fn explicit_dense_at_volume(m: &ModelSpec, a: &RegionOperator, n: usize, budget: &DenseBudget) -> Result<C64> {
    m.require_binary()?;
    let region = tree::ball(n, m.k);
    budget.check_matrix(region.len())?;
    let alpha = closed_form_alpha(m)?;
    let amp = build_amplitude(m)?.operator;
    let mut k = CMatrix::identity(1 << region.len(), 1 << region.len());
    for level in 0..n {
        for x in tree::level_set(level, m.k).iter() {
            let fork = tree::fork(x, m.k);
            let ax = dense::to_dense(&amp.shifted_by(x), &fork, budget)?;
            k *= dense::embed(&ax, &fork, &region)?;
        }
    }
    let ad = dense::to_dense(&a.embed(&region)?, &region, budget)?;
    let value = dense::normalized_trace(&(&k * ad * k.adjoint()));
    Ok(value * alpha.powi(interior_count(n, m.k)))
}

/// Explicit formula at volume `depth(a) + 1`.
pub fn evaluate_explicit(m: &ModelSpec, a: &RegionOperator) -> Result<FiniteVolumeValue> {
    let n = a.region().depth().unwrap_or(0) + 1;
    let value = explicit_at_volume(m, a, n)?;
    Ok(FiniteVolumeValue {
        observable: a.clone(),
        value,
        volume: n,
        path: EvaluationPath::Explicit,
        fallback: false,
    })
}

/// The weight as a 2×2 matrix from Pauli coordinates (used in reports).
pub fn weight_vector(te: &TransitionExpectation) -> SiteVector {
    matrix_vector(te.weight())
}
