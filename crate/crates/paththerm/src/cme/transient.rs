//! Transient solves by uniformization: exp(G t) acting on a distribution is
//! a Poisson(lambda t) mixture of powers of the stochastic matrix
//! P = I + G / lambda.

use std::sync::Arc;

use super::solve::check_dense;
use super::{CmeError, Distribution, Generator, StateBox};

/// Poisson tail mass kept below this bound when truncating the series.
const SERIES_TAIL: f64 = 1e-12;
const MAX_TERMS: usize = 20_000_000;

/// Weights w_k = e^{-m} m^k / k! for k = 0..=K with sum(w) >= 1 - tail.
/// Computed in log space so large m stays finite.
fn poisson_weights(m: f64, tail: f64) -> Result<Vec<f64>, CmeError> {
    let mut weights = Vec::new();
    let mut log_w = -m;
    let mut cumulative = 0.0f64;
    let ln_m = m.ln();
    let mut k = 0usize;
    loop {
        let w = log_w.exp();
        weights.push(w);
        cumulative += w;
        // Past the mode the Poisson terms decay at least geometrically with
        // ratio m/(k+1), which bounds the whole remaining tail. The second
        // condition makes the cutoff robust to drift in the accumulated
        // log weight, which can leave `cumulative` saturated short of 1.
        let next = k as f64 + 1.0;
        if cumulative >= 1.0 - tail || (next > m && w / (1.0 - m / next) <= 0.1 * tail) {
            return Ok(weights);
        }
        k += 1;
        if k > MAX_TERMS {
            return Err(CmeError::SolverFailure(format!(
                "uniformization series needs more than {MAX_TERMS} terms (lambda t = {m:e})"
            )));
        }
        log_w += ln_m - (k as f64).ln();
    }
}

/// p(t) = exp(G t) p0. The result is renormalized by the kept series mass, so
/// the truncation bias cancels instead of leaking into the distribution.
pub fn transient(gen: &Generator, p0: &Distribution, t: f64) -> Result<Distribution, CmeError> {
    if !(t >= 0.0) {
        return Err(CmeError::NegativeTime(t));
    }
    if *p0.state_box() != *gen.state_box() {
        return Err(CmeError::BoxMismatch);
    }
    let lambda = gen.max_outflow();
    if t == 0.0 || lambda == 0.0 {
        return Ok(p0.clone());
    }
    let weights = poisson_weights(lambda * t, SERIES_TAIL)?;
    let n = gen.num_states();
    let mut power = p0.probabilities().to_vec();
    let mut acc: Vec<f64> = power.iter().map(|&x| x * weights[0]).collect();
    let mut next = vec![0.0; n];
    for &w in &weights[1..] {
        gen.apply_uniformized(lambda, &power, &mut next);
        std::mem::swap(&mut power, &mut next);
        if w > 0.0 {
            for (a, &x) in acc.iter_mut().zip(&power) {
                *a += w * x;
            }
        }
    }
    Distribution::normalized(Arc::clone(gen.state_box()), acc)
}

/// Dense matrix of short-time conditionals P(X, t + dt | X', t), stored
/// column-major with the source state as the column.
#[derive(Debug, Clone)]
pub struct ConditionalMatrix {
    sbox: Arc<StateBox>,
    dt: f64,
    /// Column-major: entry (to, from) at `from * n + to`.
    data: Vec<f64>,
}

impl ConditionalMatrix {
    pub fn state_box(&self) -> &Arc<StateBox> {
        &self.sbox
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn len(&self) -> usize {
        self.sbox.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sbox.is_empty()
    }

    /// P(to, t + dt | from, t) over dense indices.
    pub fn prob(&self, to: usize, from: usize) -> f64 {
        self.data[from * self.sbox.len() + to]
    }

    pub fn column(&self, from: usize) -> &[f64] {
        let n = self.sbox.len();
        &self.data[from * n..(from + 1) * n]
    }
}

/// All conditionals over one time step: exp(G dt) as a dense stochastic
/// matrix. Columns share one Poisson weight sequence, so detailed-balance
/// symmetries of the generator carry over to the matrix at rounding level.
pub fn conditional_matrix(gen: &Generator, dt: f64) -> Result<ConditionalMatrix, CmeError> {
    if !(dt >= 0.0) {
        return Err(CmeError::NegativeTime(dt));
    }
    let n = gen.num_states();
    check_dense("conditional matrix", n)?;
    let mut data = vec![0.0; n * n];
    let lambda = gen.max_outflow();
    if dt == 0.0 || lambda == 0.0 {
        for i in 0..n {
            data[i * n + i] = 1.0;
        }
        return Ok(ConditionalMatrix {
            sbox: Arc::clone(gen.state_box()),
            dt,
            data,
        });
    }
    let weights = poisson_weights(lambda * dt, SERIES_TAIL)?;
    // power holds P^k applied to every basis column.
    let mut power = vec![0.0; n * n];
    for i in 0..n {
        power[i * n + i] = 1.0;
    }
    for (to, w) in data.iter_mut().zip(&power) {
        *to = weights[0] * w;
    }
    let mut next_col = vec![0.0; n];
    for &w in &weights[1..] {
        for from in 0..n {
            let col = &power[from * n..(from + 1) * n];
            next_col.fill(0.0);
            for (src, &x) in col.iter().enumerate() {
                if x != 0.0 {
                    for &(to, rate) in gen.lumped_row(src) {
                        next_col[to as usize] += rate / lambda * x;
                    }
                    next_col[src] += (1.0 - gen.outflow(src) / lambda) * x;
                }
            }
            power[from * n..(from + 1) * n].copy_from_slice(&next_col);
        }
        if w > 0.0 {
            for (to, &x) in data.iter_mut().zip(&power) {
                *to += w * x;
            }
        }
    }
    // Normalize each column by its kept mass.
    for from in 0..n {
        let col = &mut data[from * n..(from + 1) * n];
        let total: f64 = col.iter().sum();
        if total > 0.0 {
            for v in col.iter_mut() {
                *v /= total;
            }
        }
    }
    Ok(ConditionalMatrix {
        sbox: Arc::clone(gen.state_box()),
        dt,
        data,
    })
}
