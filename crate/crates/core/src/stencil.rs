//! Fourth-order finite-difference stencils on uniform grids.

use crate::linalg::CVector;

/// Derivative at every node of a uniformly spaced sequence (at least 5
/// samples). Interior nodes use the central five-point stencil; the two
/// nodes at each end use one-sided fourth-order stencils.
pub(crate) fn node_derivatives(samples: &[CVector], h: f64) -> Vec<CVector> {
    let n = samples.len();
    assert!(n >= 5, "fourth-order stencils need at least 5 samples");
    let combo = |idx: [usize; 5], w: [f64; 5]| -> CVector {
        let mut acc = samples[idx[0]].scale(w[0]);
        for k in 1..5 {
            acc.axpy(w[k].into(), &samples[idx[k]], 1.0.into());
        }
        acc.unscale(12.0 * h)
    };
    (0..n)
        .map(|i| match i {
            0 => combo([0, 1, 2, 3, 4], [-25.0, 48.0, -36.0, 16.0, -3.0]),
            1 => combo([0, 1, 2, 3, 4], [-3.0, -10.0, 18.0, -6.0, 1.0]),
            _ if i == n - 2 => combo(
                [n - 5, n - 4, n - 3, n - 2, n - 1],
                [-1.0, 6.0, -18.0, 10.0, 3.0],
            ),
            _ if i == n - 1 => combo(
                [n - 5, n - 4, n - 3, n - 2, n - 1],
                [3.0, -16.0, 36.0, -48.0, 25.0],
            ),
            _ => combo([i - 2, i - 1, i + 1, i + 2, i], [1.0, -8.0, 8.0, -1.0, 0.0]),
        })
        .collect()
}

/// Central fourth-order derivative of `g` at `t`.
pub(crate) fn central_derivative<G: FnMut(f64) -> CVector>(mut g: G, t: f64, h: f64) -> CVector {
    let mut acc = g(t - 2.0 * h);
    acc.axpy((-8.0).into(), &g(t - h), 1.0.into());
    acc.axpy(8.0.into(), &g(t + h), 1.0.into());
    acc.axpy((-1.0).into(), &g(t + 2.0 * h), 1.0.into());
    acc.unscale(12.0 * h)
}
