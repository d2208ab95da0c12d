//! Truncated master-equation machinery: state-space enumeration, the sparse
//! transition-rate generator, stationary and transient solves, and averaged
//! entropy quantities.

mod entropy;
mod solve;
mod transient;

pub use entropy::{
    detailed_balance_residual, gibbs_shannon_entropy, mean_entropy_production_rate,
    require_scheme1,
};
pub use solve::{relaxation_time_estimate, stationary, stationary_power_iteration};
pub use transient::{conditional_matrix, transient, ConditionalMatrix};

use std::collections::VecDeque;
use std::io::{BufRead, Write};
use std::sync::Arc;

use thiserror::Error;

use crate::network::ReactionNetwork;
use crate::util::compensated_total;

/// Default cap on enumerated states.
pub const DEFAULT_STATE_CAP: usize = 2_000_000;

/// Largest state count for which dense solves (direct stationary solve,
/// conditional matrices) are attempted.
pub const DENSE_LIMIT: usize = 2048;

#[derive(Debug, Error)]
pub enum CmeError {
    #[error("state box holds {count} states, exceeding the cap of {cap}")]
    BoxTooLarge { count: usize, cap: usize },
    #[error("box bounds invalid: lower must be <= upper componentwise")]
    InvalidBounds,
    #[error("box dimension {box_dim} does not match network dimension {net_dim}")]
    DimensionMismatch { box_dim: usize, net_dim: usize },
    #[error("state {0:?} lies outside the state box")]
    StateOutsideBox(Vec<i64>),
    #[error("generator is reducible on this box (absorbing or unreachable states)")]
    Reducible,
    #[error("solver failed: {0}")]
    SolverFailure(String),
    #[error("truncation too small: boundary probability mass {mass:e} >= {limit:e}")]
    TruncationTooSmall { mass: f64, limit: f64 },
    #[error("negative time {0}")]
    NegativeTime(f64),
    #[error("distribution is not normalized: sum = {0}")]
    NotNormalized(f64),
    #[error("distribution has a negative entry at index {0}")]
    NegativeProbability(usize),
    #[error("{context}: state count {count} exceeds dense limit {limit}")]
    DenseLimitExceeded {
        context: &'static str,
        count: usize,
        limit: usize,
    },
    #[error("network has no reverse-channel pairing declared")]
    NoPairing,
    #[error("channel {channel} from state {state:?} has no positive reverse rate")]
    IrreversibleChannel { channel: usize, state: Vec<i64> },
    #[error("network is not in the one-species birth-death class (jump vectors other than +/-1)")]
    NotScheme1,
    #[error("distributions live on different state boxes")]
    BoxMismatch,
}

/// Finite set of composition states with a fixed lexicographic enumeration.
/// Either a full box `[lower, upper]` or the subset of it reachable from a
/// reference state, for networks with conserved totals.
#[derive(Debug, Clone, PartialEq)]
pub struct StateBox {
    dim: usize,
    lower: Vec<i64>,
    upper: Vec<i64>,
    /// Flat `len * dim` array of states, lexicographically sorted.
    states: Vec<i64>,
}

impl StateBox {
    /// Every state in the box `[lower, upper]`.
    pub fn full(lower: Vec<i64>, upper: Vec<i64>) -> Result<Self, CmeError> {
        Self::full_capped(lower, upper, DEFAULT_STATE_CAP)
    }

    pub fn full_capped(lower: Vec<i64>, upper: Vec<i64>, cap: usize) -> Result<Self, CmeError> {
        if lower.len() != upper.len() || lower.is_empty() {
            return Err(CmeError::InvalidBounds);
        }
        if lower.iter().zip(&upper).any(|(l, u)| l > u) {
            return Err(CmeError::InvalidBounds);
        }
        let dim = lower.len();
        let mut count: usize = 1;
        for (l, u) in lower.iter().zip(&upper) {
            let side = usize::try_from(u - l + 1).map_err(|_| CmeError::InvalidBounds)?;
            count = count
                .checked_mul(side)
                .filter(|&c| c <= cap)
                .ok_or(CmeError::BoxTooLarge { count: usize::MAX, cap })?;
        }
        let mut states = Vec::with_capacity(count * dim);
        let mut cursor = lower.clone();
        loop {
            states.extend_from_slice(&cursor);
            // Odometer increment, last axis fastest, keeps lexicographic order.
            let mut axis = dim;
            loop {
                if axis == 0 {
                    return Ok(StateBox {
                        dim,
                        lower,
                        upper,
                        states,
                    });
                }
                axis -= 1;
                if cursor[axis] < upper[axis] {
                    cursor[axis] += 1;
                    break;
                }
                cursor[axis] = lower[axis];
            }
        }
    }

    /// States reachable from `origin` by network jumps without leaving
    /// `[lower, upper]`. Use for networks with conserved quantities, where
    /// the full box is reducible.
    pub fn reachable(
        network: &ReactionNetwork,
        origin: &[i64],
        lower: Vec<i64>,
        upper: Vec<i64>,
    ) -> Result<Self, CmeError> {
        Self::reachable_capped(network, origin, lower, upper, DEFAULT_STATE_CAP)
    }

    pub fn reachable_capped(
        network: &ReactionNetwork,
        origin: &[i64],
        lower: Vec<i64>,
        upper: Vec<i64>,
        cap: usize,
    ) -> Result<Self, CmeError> {
        let dim = network.dimension();
        if lower.len() != dim || upper.len() != dim {
            return Err(CmeError::DimensionMismatch {
                box_dim: lower.len(),
                net_dim: dim,
            });
        }
        if lower.iter().zip(&upper).any(|(l, u)| l > u) {
            return Err(CmeError::InvalidBounds);
        }
        let inside = |s: &[i64]| {
            s.iter()
                .zip(lower.iter().zip(&upper))
                .all(|(x, (l, u))| l <= x && x <= u)
        };
        if origin.len() != dim || !inside(origin) {
            return Err(CmeError::StateOutsideBox(origin.to_vec()));
        }
        let mut seen = std::collections::BTreeSet::new();
        seen.insert(origin.to_vec());
        let mut queue = VecDeque::from([origin.to_vec()]);
        while let Some(state) = queue.pop_front() {
            for r in 0..network.num_reactions() {
                if network.propensity(&state, r) <= 0.0 {
                    continue;
                }
                let mut next = state.clone();
                network.apply_jump(&mut next, r);
                if inside(&next) && !seen.contains(&next) {
                    if seen.len() >= cap {
                        return Err(CmeError::BoxTooLarge {
                            count: seen.len() + 1,
                            cap,
                        });
                    }
                    seen.insert(next.clone());
                    queue.push_back(next);
                }
            }
        }
        let mut states = Vec::with_capacity(seen.len() * dim);
        for s in &seen {
            states.extend_from_slice(s);
        }
        Ok(StateBox {
            dim,
            lower,
            upper,
            states,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.states.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn lower(&self) -> &[i64] {
        &self.lower
    }

    pub fn upper(&self) -> &[i64] {
        &self.upper
    }

    pub fn state(&self, index: usize) -> &[i64] {
        &self.states[index * self.dim..(index + 1) * self.dim]
    }

    /// Dense index of `state`, if enumerated.
    pub fn index_of(&self, state: &[i64]) -> Option<usize> {
        if state.len() != self.dim {
            return None;
        }
        let mut lo = 0usize;
        let mut hi = self.len();
        while lo < hi {
            let mid = (lo + hi) / 2;
            match self.state(mid).cmp(state) {
                std::cmp::Ordering::Less => lo = mid + 1,
                std::cmp::Ordering::Greater => hi = mid,
                std::cmp::Ordering::Equal => return Some(mid),
            }
        }
        None
    }

    pub fn iter(&self) -> impl Iterator<Item = &[i64]> {
        self.states.chunks_exact(self.dim)
    }
}

/// Probability vector over a state box.
#[derive(Debug, Clone, PartialEq)]
pub struct Distribution {
    sbox: Arc<StateBox>,
    probs: Vec<f64>,
}

impl Distribution {
    /// Requires nonnegative entries summing to 1 within 1e-12.
    pub fn new(sbox: Arc<StateBox>, probs: Vec<f64>) -> Result<Self, CmeError> {
        if probs.len() != sbox.len() {
            return Err(CmeError::DimensionMismatch {
                box_dim: sbox.len(),
                net_dim: probs.len(),
            });
        }
        if let Some(i) = probs.iter().position(|&p| p < 0.0 || !p.is_finite()) {
            return Err(CmeError::NegativeProbability(i));
        }
        let total = compensated_total(&probs);
        if (total - 1.0).abs() > 1e-12 {
            return Err(CmeError::NotNormalized(total));
        }
        Ok(Distribution { sbox, probs })
    }

    /// Normalize arbitrary nonnegative weights.
    pub fn normalized(sbox: Arc<StateBox>, mut weights: Vec<f64>) -> Result<Self, CmeError> {
        if weights.len() != sbox.len() {
            return Err(CmeError::DimensionMismatch {
                box_dim: sbox.len(),
                net_dim: weights.len(),
            });
        }
        if let Some(i) = weights.iter().position(|&p| p < 0.0 || !p.is_finite()) {
            return Err(CmeError::NegativeProbability(i));
        }
        let total = compensated_total(&weights);
        if !(total > 0.0) {
            return Err(CmeError::NotNormalized(total));
        }
        for w in &mut weights {
            *w /= total;
        }
        Ok(Distribution {
            sbox,
            probs: weights,
        })
    }

    /// Point mass at `state`.
    pub fn delta(sbox: Arc<StateBox>, state: &[i64]) -> Result<Self, CmeError> {
        let index = sbox
            .index_of(state)
            .ok_or_else(|| CmeError::StateOutsideBox(state.to_vec()))?;
        let mut probs = vec![0.0; sbox.len()];
        probs[index] = 1.0;
        Ok(Distribution { sbox, probs })
    }

    pub fn uniform(sbox: Arc<StateBox>) -> Self {
        let n = sbox.len();
        Distribution {
            sbox,
            probs: vec![1.0 / n as f64; n],
        }
    }

    pub fn state_box(&self) -> &Arc<StateBox> {
        &self.sbox
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probs
    }

    pub fn prob(&self, index: usize) -> f64 {
        self.probs[index]
    }

    pub fn prob_of_state(&self, state: &[i64]) -> Option<f64> {
        self.sbox.index_of(state).map(|i| self.probs[i])
    }

    /// Total variation distance; both distributions must share the box.
    pub fn total_variation(&self, other: &Distribution) -> Result<f64, CmeError> {
        if self.sbox != other.sbox {
            return Err(CmeError::BoxMismatch);
        }
        let sum: f64 = self
            .probs
            .iter()
            .zip(&other.probs)
            .map(|(a, b)| (a - b).abs())
            .sum();
        Ok(0.5 * sum)
    }

    /// CSV with header `x1,...,xN,probability`, states in enumeration order.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let dim = self.sbox.dim();
        let header: Vec<String> = (1..=dim).map(|i| format!("x{i}")).collect();
        writeln!(w, "{},probability", header.join(","))?;
        for (i, state) in self.sbox.iter().enumerate() {
            let coords: Vec<String> = state.iter().map(|x| x.to_string()).collect();
            writeln!(w, "{},{:e}", coords.join(","), self.probs[i])?;
        }
        Ok(())
    }

    /// Read back the CSV format onto a known box. States must match the
    /// box enumeration.
    pub fn read_csv<R: BufRead>(sbox: Arc<StateBox>, r: R) -> Result<Self, CmeError> {
        let mut probs = vec![0.0; sbox.len()];
        let bad = |msg: &str| CmeError::SolverFailure(format!("distribution csv: {msg}"));
        for (lineno, line) in r.lines().enumerate() {
            let line = line.map_err(|e| bad(&e.to_string()))?;
            if lineno == 0 {
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != sbox.dim() + 1 {
                return Err(bad(&format!("line {}: wrong field count", lineno + 1)));
            }
            let state: Vec<i64> = fields[..sbox.dim()]
                .iter()
                .map(|f| f.trim().parse::<i64>())
                .collect::<Result<_, _>>()
                .map_err(|e| bad(&format!("line {}: {e}", lineno + 1)))?;
            let p: f64 = fields[sbox.dim()]
                .trim()
                .parse()
                .map_err(|e| bad(&format!("line {}: {e}", lineno + 1)))?;
            let index = sbox
                .index_of(&state)
                .ok_or_else(|| CmeError::StateOutsideBox(state.clone()))?;
            probs[index] = p;
        }
        Distribution::new(sbox, probs)
    }
}

/// Sparse transition-rate operator on a state box, kept channel-resolved with
/// a merged (lumped) view. Transitions leaving the box are excluded; the
/// affected source states are flagged so truncation error stays observable.
#[derive(Debug, Clone)]
pub struct Generator {
    sbox: Arc<StateBox>,
    /// Per channel: (from, to, rate) with `from` strictly increasing, at most
    /// one entry per source state.
    channels: Vec<Vec<(u32, u32, f64)>>,
    /// Lumped off-diagonal rates in CSR-by-source form.
    lumped_offsets: Vec<usize>,
    lumped_entries: Vec<(u32, f64)>,
    /// Total in-box outflow per state; the diagonal is its negation.
    outflow: Vec<f64>,
    /// States with at least one excluded positive-rate transition.
    truncated: Vec<bool>,
    max_outflow: f64,
}

/// Assemble the truncated generator of `network` on `sbox`, one sparse map
/// per channel plus the lumped view obtained by summing channels that share
/// a jump vector.
pub fn build_generator(
    network: &ReactionNetwork,
    sbox: Arc<StateBox>,
) -> Result<Generator, CmeError> {
    if sbox.dim() != network.dimension() {
        return Err(CmeError::DimensionMismatch {
            box_dim: sbox.dim(),
            net_dim: network.dimension(),
        });
    }
    let n_states = sbox.len();
    let n_reactions = network.num_reactions();
    let mut channels: Vec<Vec<(u32, u32, f64)>> = vec![Vec::new(); n_reactions];
    let mut truncated = vec![false; n_states];
    let mut next = vec![0i64; sbox.dim()];
    for (i, state) in sbox.iter().enumerate() {
        for r in 0..n_reactions {
            let jump = network.jump(r);
            if jump.iter().all(|&d| d == 0) {
                continue; // self-loop: no effect on the master equation
            }
            let a = network.propensity(state, r);
            if a <= 0.0 {
                continue;
            }
            for (axis, (x, d)) in state.iter().zip(jump).enumerate() {
                next[axis] = x + d;
            }
            match sbox.index_of(&next) {
                Some(j) => channels[r].push((i as u32, j as u32, a)),
                None => truncated[i] = true,
            }
        }
    }

    // Merge channels into the lumped CSR view.
    let mut per_state: Vec<Vec<(u32, f64)>> = vec![Vec::new(); n_states];
    for entries in &channels {
        for &(from, to, rate) in entries {
            let row = &mut per_state[from as usize];
            match row.iter_mut().find(|(t, _)| *t == to) {
                Some((_, r)) => *r += rate,
                None => row.push((to, rate)),
            }
        }
    }
    let mut lumped_offsets = Vec::with_capacity(n_states + 1);
    let mut lumped_entries = Vec::new();
    let mut outflow = vec![0.0; n_states];
    lumped_offsets.push(0);
    for (i, mut row) in per_state.into_iter().enumerate() {
        row.sort_by_key(|&(to, _)| to);
        outflow[i] = compensated_total(&row.iter().map(|&(_, r)| r).collect::<Vec<_>>());
        lumped_entries.extend_from_slice(&row);
        lumped_offsets.push(lumped_entries.len());
    }
    let max_outflow = outflow.iter().cloned().fold(0.0, f64::max);

    Ok(Generator {
        sbox,
        channels,
        lumped_offsets,
        lumped_entries,
        outflow,
        truncated,
        max_outflow,
    })
}

impl Generator {
    pub fn state_box(&self) -> &Arc<StateBox> {
        &self.sbox
    }

    pub fn num_states(&self) -> usize {
        self.sbox.len()
    }

    pub fn num_channels(&self) -> usize {
        self.channels.len()
    }

    /// Sparse (from, to, rate) triplets of one channel.
    pub fn channel(&self, reaction: usize) -> &[(u32, u32, f64)] {
        &self.channels[reaction]
    }

    /// Rate of `reaction` out of dense state `from`, if inside the box.
    pub fn channel_rate(&self, reaction: usize, from: usize) -> Option<(u32, f64)> {
        let entries = &self.channels[reaction];
        entries
            .binary_search_by_key(&(from as u32), |&(f, _, _)| f)
            .ok()
            .map(|k| (entries[k].1, entries[k].2))
    }

    /// Lumped off-diagonal row of a source state: (target, summed rate).
    pub fn lumped_row(&self, from: usize) -> &[(u32, f64)] {
        &self.lumped_entries[self.lumped_offsets[from]..self.lumped_offsets[from + 1]]
    }

    /// Lumped rate from dense state `from` to dense state `to`.
    pub fn lumped_rate(&self, from: usize, to: usize) -> f64 {
        self.lumped_row(from)
            .iter()
            .find(|&&(t, _)| t as usize == to)
            .map_or(0.0, |&(_, r)| r)
    }

    pub fn outflow(&self, from: usize) -> f64 {
        self.outflow[from]
    }

    pub fn max_outflow(&self) -> f64 {
        self.max_outflow
    }

    pub fn truncated_states(&self) -> &[bool] {
        &self.truncated
    }

    /// y = G x with the column convention: y[to] += rate * x[from],
    /// y[from] -= outflow[from] * x[from].
    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        y.fill(0.0);
        for from in 0..self.num_states() {
            let xf = x[from];
            if xf != 0.0 {
                for &(to, rate) in self.lumped_row(from) {
                    y[to as usize] += rate * xf;
                }
                y[from] -= self.outflow[from] * xf;
            }
        }
    }

    /// y = P x with P = I + G / lambda, the uniformized stochastic matrix.
    pub fn apply_uniformized(&self, lambda: f64, x: &[f64], y: &mut [f64]) {
        y.fill(0.0);
        for from in 0..self.num_states() {
            let xf = x[from];
            if xf != 0.0 {
                for &(to, rate) in self.lumped_row(from) {
                    y[to as usize] += rate / lambda * xf;
                }
                y[from] += (1.0 - self.outflow[from] / lambda) * xf;
            }
        }
    }

    /// Probability mass sitting on states whose outgoing transitions were
    /// clipped by the truncation.
    pub fn boundary_mass(&self, dist: &Distribution) -> Result<f64, CmeError> {
        if *dist.state_box() != self.sbox {
            return Err(CmeError::BoxMismatch);
        }
        let mass: f64 = self
            .truncated
            .iter()
            .zip(dist.probabilities())
            .filter(|(t, _)| **t)
            .map(|(_, p)| p)
            .sum();
        Ok(mass + 0.0) // an empty Sum yields -0.0

    }
}

#[cfg(test)]
mod tests;
