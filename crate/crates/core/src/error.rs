use thiserror::Error;

use crate::pauli::OperatorError;
use crate::tree::{TreeError, VertexWord};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error(transparent)]
    Operator(#[from] OperatorError),
    #[error("dense budget exceeded: {sites} sites requested, limit is {limit}")]
    BudgetExceeded { sites: usize, limit: usize },
    #[error("weight at {vertex} is not positive semidefinite (eigenvalue {eigenvalue:e})")]
    NonPositiveWeight { vertex: VertexWord, eigenvalue: f64 },
    #[error("transition expectation at {vertex} is not identity preserving (residual {residual:e})")]
    NotIdentityPreserving { vertex: VertexWord, residual: f64 },
    #[error("kernel region mismatch: {0}")]
    KernelRegion(String),
    #[error("regions overlap: {0}")]
    RegionOverlap(String),
    #[error("no kernel for vertex {0}")]
    MissingKernel(VertexWord),
    #[error("observable reaches depth {depth} but the handle only covers volume {limit}")]
    TooDeep { depth: usize, limit: usize },
    #[error("fixed-point iteration did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("fixed-point iterate lost positivity (eigenvalue {0:e})")]
    NonPositiveIterate(f64),
    #[error("fixed-point scale undetermined: {0}")]
    NoScale(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("marginal density is not faithful (eigenvalue {0:e})")]
    NotFaithful(f64),
    #[error("initial state is not a density: {0}")]
    InvalidInitialState(String),
    #[error("tree is not a homogeneous Cayley tree rooted at o")]
    NotHomogeneous,
    #[error("{0} is not a subtree of the handle's tree")]
    NotSubtree(String),
}

pub type Result<T> = std::result::Result<T, Error>;
