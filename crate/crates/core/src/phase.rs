//! Phase diagnostics on sampled trajectories.
//!
//! The geometric phase is computed as the Bargmann sum of consecutive
//! overlap arguments (Pancharatnam's discretization). It is a diagnostic
//! choice; other discretizations agree in the limit of fine grids.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::dark::DarkTrajectory;
use crate::error::{Error, Result};
use crate::linalg::CVector;
use crate::tolerances::Tolerances;

/// Closure threshold `||psi_last - e^{i phi} psi_0||` for the optimal `phi`.
pub const CLOSURE_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeometricPhase {
    /// Radians in `(-pi, pi]`.
    pub phase: f64,
    /// Whether the closing overlap was included.
    pub closed: bool,
}

/// `max_i |<psi_i|psi_{i+1}> - ||psi_i|| ||psi_{i+1}||| / dt_i`, a discrete
/// proxy for `|<psi|psi'>|`.
pub fn parallel_transport_residual(traj: &DarkTrajectory) -> f64 {
    traj.states
        .windows(2)
        .zip(traj.times.windows(2))
        .map(|(s, t)| {
            let (a, b) = (s[0].as_vector(), s[1].as_vector());
            let dt = t[1] - t[0];
            (a.dotc(b) - Complex64::from(a.norm() * b.norm())).norm() / dt
        })
        .fold(0.0, f64::max)
}

/// `Arg <psi_i|psi_{i+1}>` for each consecutive pair.
pub fn local_phase_increments(traj: &DarkTrajectory) -> Result<Vec<f64>> {
    traj.states
        .windows(2)
        .map(|s| overlap_arg(s[0].as_vector(), s[1].as_vector()))
        .collect()
}

/// Bargmann sum of the overlap arguments, closed with `Arg <psi_last|psi_0>`
/// when the trajectory returns to its initial ray.
pub fn pancharatnam_phase(traj: &DarkTrajectory) -> Result<GeometricPhase> {
    let increments = local_phase_increments(traj)?;
    let mut total: f64 = increments.iter().sum();
    let first = traj.states[0].as_vector();
    let last = traj.final_state().as_vector();
    let closed = traj.len() > 1 && returns_to_ray(first, last);
    if closed {
        total += overlap_arg(last, first)?;
    }
    Ok(GeometricPhase {
        phase: wrap(total),
        closed,
    })
}

fn overlap_arg(a: &CVector, b: &CVector) -> Result<f64> {
    let ov = a.dotc(b);
    if ov.norm() < Tolerances::DEFAULT.overlap_floor {
        return Err(Error::UndefinedPhase {
            magnitude: ov.norm(),
        });
    }
    Ok(ov.arg())
}

fn returns_to_ray(first: &CVector, last: &CVector) -> bool {
    let (n0, n1) = (first.norm(), last.norm());
    if n0 == 0.0 || n1 == 0.0 {
        return false;
    }
    let a = first.unscale(n0);
    let b = last.unscale(n1);
    let ov = a.dotc(&b);
    let phase = if ov.norm() > 0.0 {
        ov / ov.norm()
    } else {
        Complex64::from(1.0)
    };
    (b - a * phase).norm() <= CLOSURE_TOLERANCE
}

fn wrap(phi: f64) -> f64 {
    let r = phi.rem_euclid(2.0 * PI);
    if r > PI {
        r - 2.0 * PI
    } else {
        r
    }
}
