//! Forward/adjoint operator contract and the dot-test verifier.

use crate::signal::Rng;

/// A real linear operator given by its action and the action of its
/// adjoint, without materializing the matrix.
pub trait LinearOperator: Sync {
    /// Output dimension of `forward`.
    fn rows(&self) -> usize;
    /// Input dimension of `forward`.
    fn cols(&self) -> usize;
    /// Apply the operator to a vector of length `cols`.
    fn forward(&self, x: &[f64]) -> Vec<f64>;
    /// Apply the adjoint to a vector of length `rows`.
    fn adjoint(&self, y: &[f64]) -> Vec<f64>;
}

/// Relative adjointness error |<Ax, y> - <x, A'y>| / (|Ax| |y|) on one
/// random probe pair.
pub fn dot_test_rel_error<O: LinearOperator + ?Sized>(op: &O, rng: &mut Rng) -> f64 {
    let x = rng.normal_vec(op.cols());
    let y = rng.normal_vec(op.rows());
    let ax = op.forward(&x);
    let aty = op.adjoint(&y);
    let lhs = dot(&ax, &y);
    let rhs = dot(&x, &aty);
    let scale = norm(&ax) * norm(&y);
    if scale == 0.0 {
        (lhs - rhs).abs()
    } else {
        (lhs - rhs).abs() / scale
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
