//! Stationary solves.
//!
//! The direct path is GTH elimination (state-reduction Gaussian elimination
//! with no subtractions), which keeps every stationary probability accurate
//! in a relative sense even deep in the tails where the mass is ~1e-70. The
//! iterative fallback is power iteration on the uniformized matrix.

use std::sync::Arc;

use super::{CmeError, Distribution, Generator, DENSE_LIMIT};
use crate::util::compensated_total;

/// Forward + backward breadth-first search over the lumped pattern: the chain
/// is irreducible iff state 0 reaches everything and everything reaches it.
pub(crate) fn is_irreducible(gen: &Generator) -> bool {
    let n = gen.num_states();
    if n == 0 {
        return false;
    }
    if n == 1 {
        return true;
    }
    let mut forward = vec![false; n];
    let mut stack = vec![0usize];
    forward[0] = true;
    let mut seen = 1usize;
    while let Some(s) = stack.pop() {
        for &(to, _) in gen.lumped_row(s) {
            let t = to as usize;
            if !forward[t] {
                forward[t] = true;
                seen += 1;
                stack.push(t);
            }
        }
    }
    if seen != n {
        return false;
    }
    // Reverse adjacency.
    let mut rev: Vec<Vec<u32>> = vec![Vec::new(); n];
    for from in 0..n {
        for &(to, _) in gen.lumped_row(from) {
            rev[to as usize].push(from as u32);
        }
    }
    let mut backward = vec![false; n];
    let mut stack = vec![0usize];
    backward[0] = true;
    let mut seen = 1usize;
    while let Some(s) = stack.pop() {
        for &f in &rev[s] {
            let f = f as usize;
            if !backward[f] {
                backward[f] = true;
                seen += 1;
                stack.push(f);
            }
        }
    }
    seen == n
}

/// GTH state reduction on a dense copy of the lumped rates. All arithmetic is
/// add/multiply/divide on nonnegative numbers, so the result carries
/// componentwise relative accuracy.
fn gth(gen: &Generator) -> Result<Vec<f64>, CmeError> {
    let n = gen.num_states();
    let mut a = vec![0.0f64; n * n];
    for from in 0..n {
        for &(to, rate) in gen.lumped_row(from) {
            a[from * n + to as usize] += rate;
        }
    }
    for k in (1..n).rev() {
        let s: f64 = a[k * n..k * n + k].iter().sum();
        if !(s > 0.0) {
            return Err(CmeError::Reducible);
        }
        for i in 0..k {
            let scale = a[i * n + k] / s;
            a[i * n + k] = scale;
            if scale != 0.0 {
                for j in 0..k {
                    if j != i {
                        a[i * n + j] += scale * a[k * n + j];
                    }
                }
            }
        }
    }
    let mut p = vec![0.0f64; n];
    p[0] = 1.0;
    for k in 1..n {
        let mut acc = 0.0;
        for i in 0..k {
            acc += p[i] * a[i * n + k];
        }
        p[k] = acc;
    }
    let total = compensated_total(&p);
    for v in &mut p {
        *v /= total;
    }
    Ok(p)
}

/// Stationary distribution of the lumped generator: G p = 0, p >= 0,
/// sum(p) = 1. Requires irreducibility on the box. Uses the GTH direct solve
/// up to [`DENSE_LIMIT`] states and power iteration beyond; the residual
/// ||G p||_inf <= 1e-10 * max rate is verified before returning.
pub fn stationary(gen: &Generator) -> Result<Distribution, CmeError> {
    if gen.num_states() == 0 {
        return Err(CmeError::Reducible);
    }
    if !is_irreducible(gen) {
        return Err(CmeError::Reducible);
    }
    let probs = if gen.num_states() <= DENSE_LIMIT {
        gth(gen)?
    } else {
        power_iteration(gen, 1e-12, 50_000_000)?
    };
    let dist = Distribution::new(Arc::clone(gen.state_box()), probs)?;
    let residual = stationary_residual(gen, &dist);
    let tol = 1e-10 * gen.max_outflow().max(1.0);
    if residual > tol {
        return Err(CmeError::SolverFailure(format!(
            "stationary residual {residual:e} exceeds {tol:e}"
        )));
    }
    Ok(dist)
}

/// ||G p||_inf.
pub(crate) fn stationary_residual(gen: &Generator, dist: &Distribution) -> f64 {
    let mut y = vec![0.0; gen.num_states()];
    gen.apply(dist.probabilities(), &mut y);
    y.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

fn power_iteration(gen: &Generator, tol: f64, max_matvecs: usize) -> Result<Vec<f64>, CmeError> {
    let n = gen.num_states();
    let lambda = gen.max_outflow() * 1.05 + 1e-300;
    let mut p = vec![1.0 / n as f64; n];
    let mut next = vec![0.0; n];
    let residual_target = tol * gen.max_outflow().max(1.0);
    let mut iterations = 0usize;
    loop {
        gen.apply_uniformized(lambda, &p, &mut next);
        std::mem::swap(&mut p, &mut next);
        iterations += 1;
        if iterations % 64 == 0 || iterations >= max_matvecs {
            let total = compensated_total(&p);
            for v in &mut p {
                *v /= total;
            }
            let mut g = vec![0.0; n];
            gen.apply(&p, &mut g);
            let residual = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if residual <= residual_target {
                return Ok(p);
            }
            if iterations >= max_matvecs {
                return Err(CmeError::SolverFailure(format!(
                    "power iteration stalled at residual {residual:e} after {iterations} matvecs"
                )));
            }
        }
    }
}

/// Independent iterative solve exposed for cross-checks and for boxes beyond
/// the dense limit.
pub fn stationary_power_iteration(
    gen: &Generator,
    tol: f64,
    max_matvecs: usize,
) -> Result<Distribution, CmeError> {
    if !is_irreducible(gen) {
        return Err(CmeError::Reducible);
    }
    let probs = power_iteration(gen, tol, max_matvecs)?;
    Distribution::new(Arc::clone(gen.state_box()), probs)
}

/// Relaxation-time estimate 1 / gap, with the spectral gap extracted from the
/// decay rate of a probability deviation under the uniformized matrix.
pub fn relaxation_time_estimate(gen: &Generator, stationary: &Distribution) -> f64 {
    let n = gen.num_states();
    if n <= 1 || gen.max_outflow() <= 0.0 {
        return 0.0;
    }
    let lambda = gen.max_outflow() * 1.05;
    // Start from a zero-sum deviation; that subspace is invariant under P.
    let mut v: Vec<f64> = stationary
        .probabilities()
        .iter()
        .enumerate()
        .map(|(i, &p)| if i == 0 { 1.0 - p } else { -p })
        .collect();
    let mut next = vec![0.0; n];
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    // Burn in so the subdominant mode dominates, then read off the signed
    // Rayleigh quotient (the subdominant eigenvalue of P can be negative).
    // Rounding leaks a component along the stationary vector (eigenvalue 1),
    // so its spectral projector p 1^T is removed again on every step.
    let mut eigenvalue = 0.0f64;
    for phase in 0..2 {
        let steps = if phase == 0 { 200 } else { 50 };
        for _ in 0..steps {
            let drift: f64 = v.iter().sum();
            for (x, &p) in v.iter_mut().zip(stationary.probabilities()) {
                *x -= drift * p;
            }
            let nv = norm(&v);
            if !(nv > 1e-280) {
                return 1.0 / lambda;
            }
            for x in &mut v {
                *x /= nv;
            }
            gen.apply_uniformized(lambda, &v, &mut next);
            if phase == 1 {
                eigenvalue += dot(&next, &v) / steps as f64;
            }
            std::mem::swap(&mut v, &mut next);
        }
    }
    let eigenvalue = eigenvalue.min(1.0 - 1e-9);
    1.0 / (lambda * (1.0 - eigenvalue))
}

/// Guard for dense operations.
pub(crate) fn check_dense(context: &'static str, count: usize) -> Result<(), CmeError> {
    if count > DENSE_LIMIT {
        return Err(CmeError::DenseLimitExceeded {
            context,
            count,
            limit: DENSE_LIMIT,
        });
    }
    Ok(())
}
