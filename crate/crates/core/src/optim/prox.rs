use crate::ising::IsingParams;

/// `sign(v) · max(|v| − tau, 0)`; exactly zero when `|v| ≤ tau`.
#[inline]
pub fn soft_threshold(v: f64, tau: f64) -> f64 {
    if v > tau {
        v - tau
    } else if v < -tau {
        v + tau
    } else {
        0.0
    }
}

/// Proximal operator of `tau·‖W‖₁`: soft-thresholds every coupling and leaves
/// the field untouched. Symmetry and the zero diagonal carry over entrywise.
pub fn prox_l1(theta: &IsingParams, tau: f64) -> IsingParams {
    debug_assert!(tau >= 0.0);
    let mut out = theta.clone();
    prox_l1_in_place(&mut out, tau);
    out
}

pub(crate) fn prox_l1_in_place(theta: &mut IsingParams, tau: f64) {
    theta.w_mut().iter_mut().for_each(|w| *w = soft_threshold(*w, tau));
}
