//! Path functionals measuring the log probability ratio between a sample
//! path and its time reversal, in three forms: from lumped transition rates,
//! from channel-resolved rates with the recorded labels, and from exact
//! conditional probabilities on a time grid. Plus the statistical tests
//! (fluctuation-theorem slope fit, distribution symmetry) applied to samples
//! of these functionals.

mod stats;

pub use stats::{
    ft_fit, histogram, ks_two_sample, mean, symmetry_test, variance, BinPolicy, FtFit, Histogram,
    StatsError, SymmetryTest, BOOTSTRAP_RESAMPLES, MIN_PAIR_COUNT, MIN_SAMPLES, SIGNIFICANCE,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cme::{ConditionalMatrix, Distribution};
use crate::network::{ChannelGrouping, NetworkError, ReactionNetwork};
use crate::ssa::{DiscretizedPath, Trajectory};
use crate::util::CompensatedSum;

#[derive(Debug, Error)]
pub enum PathEntropyError {
    #[error("enumeration budget exceeded: {paths} paths > {budget}")]
    EnumerationBudget { paths: u64, budget: u64 },
    #[error("jump at t = {time} has zero reverse rate (channel {channel}); the reverse path has measure zero")]
    ZeroReverseRate { time: f64, channel: usize },
    #[error("endpoint state {state:?} has zero or missing probability")]
    ZeroEndpointProbability { state: Vec<i64> },
    #[error("grid state {state:?} is outside the distribution's box")]
    StateOutsideBox { state: Vec<i64> },
    #[error("zero conditional probability between grid points {from} and {to}")]
    ZeroConditional { from: usize, to: usize },
    #[error("path functional evaluated to a non-finite value")]
    NonFinite,
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Cme(#[from] crate::cme::CmeError),
}

/// Which rate resolution produced a sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleKind {
    Lumped,
    Channel,
    Conditional,
}

/// One scalar path-entropy sample (k_B = 1) over a time window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntropySample {
    pub value: f64,
    pub window: (f64, f64),
    pub kind: SampleKind,
}

fn boundary_term(
    p_start: &Distribution,
    p_end: &Distribution,
    x0: &[i64],
    xf: &[i64],
) -> Result<f64, PathEntropyError> {
    let p0 = p_start
        .prob_of_state(x0)
        .filter(|&p| p > 0.0)
        .ok_or_else(|| PathEntropyError::ZeroEndpointProbability {
            state: x0.to_vec(),
        })?;
    let pf = p_end
        .prob_of_state(xf)
        .filter(|&p| p > 0.0)
        .ok_or_else(|| PathEntropyError::ZeroEndpointProbability {
            state: xf.to_vec(),
        })?;
    Ok(p0.ln() - pf.ln())
}

fn finite(
    value: f64,
    window: (f64, f64),
    kind: SampleKind,
) -> Result<EntropySample, PathEntropyError> {
    if !value.is_finite() {
        return Err(PathEntropyError::NonFinite);
    }
    Ok(EntropySample {
        value,
        window,
        kind,
    })
}

/// Log ratio of forward to reverse path probability with transitions rated
/// at the lumped (jump-vector) level:
/// sum over jumps of ln(W(x_i | x_{i-1}) / W(x_{i-1} | x_i)) evaluated at
/// the pre-jump state, plus ln(p_start(x_0) / p_end(x_f)). The sum runs over
/// the actual jump events, which the grid form converges to.
pub fn lumped_path_entropy(
    network: &ReactionNetwork,
    grouping: &ChannelGrouping,
    trajectory: &Trajectory,
    p_start: &Distribution,
    p_end: &Distribution,
) -> Result<EntropySample, PathEntropyError> {
    let mut acc = CompensatedSum::new();
    let mut state = trajectory.initial_state().to_vec();
    let mut next = state.clone();
    for event in trajectory.events() {
        let channel = event.channel as usize;
        let group = grouping.group_of(channel);
        let forward = grouping.lumped_rate_of_group(network, &state, group);
        next.copy_from_slice(&state);
        network.apply_jump(&mut next, channel);
        let reverse_group = grouping
            .reverse_group(group)
            .ok_or(PathEntropyError::ZeroReverseRate {
                time: event.time,
                channel,
            })?;
        let backward = grouping.lumped_rate_of_group(network, &next, reverse_group);
        if backward <= 0.0 {
            return Err(PathEntropyError::ZeroReverseRate {
                time: event.time,
                channel,
            });
        }
        acc.add(forward.ln() - backward.ln());
        std::mem::swap(&mut state, &mut next);
    }
    let value = acc.value()
        + boundary_term(p_start, p_end, trajectory.initial_state(), &state)?;
    finite(
        value,
        (0.0, trajectory.t_final()),
        SampleKind::Lumped,
    )
}

/// Channel-resolved variant: each event contributes the log ratio of the
/// recorded channel's rate to its paired reverse channel's rate,
/// ln(W_rho(x_i | x_{i-1}) / W_-rho(x_{i-1} | x_i)), plus the same boundary
/// term. Coincides with the lumped form whenever every group is a singleton.
pub fn channel_path_entropy(
    network: &ReactionNetwork,
    trajectory: &Trajectory,
    p_start: &Distribution,
    p_end: &Distribution,
) -> Result<EntropySample, PathEntropyError> {
    let mut acc = CompensatedSum::new();
    let mut state = trajectory.initial_state().to_vec();
    let mut next = state.clone();
    for event in trajectory.events() {
        let channel = event.channel as usize;
        let reverse = network.reverse_channel(channel)?;
        let forward = network.propensity(&state, channel);
        next.copy_from_slice(&state);
        network.apply_jump(&mut next, channel);
        let backward = network.propensity(&next, reverse);
        if backward <= 0.0 {
            return Err(PathEntropyError::ZeroReverseRate {
                time: event.time,
                channel,
            });
        }
        acc.add(forward.ln() - backward.ln());
        std::mem::swap(&mut state, &mut next);
    }
    let value = acc.value()
        + boundary_term(p_start, p_end, trajectory.initial_state(), &state)?;
    finite(
        value,
        (0.0, trajectory.t_final()),
        SampleKind::Channel,
    )
}

/// Grid form built from exact conditional probabilities over one uniform
/// step: sum of ln(P(x_i | x_{i-1}; dt) / P(x_{i-1} | x_i; dt)) plus the
/// boundary term. For a stationary process the reverse conditionals reduce
/// to forward conditionals of the reversed state sequence, which is what the
/// denominator uses.
pub fn grid_path_entropy(
    dpath: &DiscretizedPath,
    conditionals: &ConditionalMatrix,
    p_start: &Distribution,
    p_end: &Distribution,
) -> Result<EntropySample, PathEntropyError> {
    let sbox = conditionals.state_box();
    let mut acc = CompensatedSum::new();
    let mut prev = sbox
        .index_of(dpath.state(0))
        .ok_or_else(|| PathEntropyError::StateOutsideBox {
            state: dpath.state(0).to_vec(),
        })?;
    for i in 1..dpath.num_points() {
        let here = sbox
            .index_of(dpath.state(i))
            .ok_or_else(|| PathEntropyError::StateOutsideBox {
                state: dpath.state(i).to_vec(),
            })?;
        if here != prev {
            let forward = conditionals.prob(here, prev);
            let backward = conditionals.prob(prev, here);
            if forward <= 0.0 || backward <= 0.0 {
                return Err(PathEntropyError::ZeroConditional {
                    from: prev,
                    to: here,
                });
            }
            acc.add(forward.ln() - backward.ln());
        }
        prev = here;
    }
    let n = dpath.num_points();
    let value = acc.value()
        + boundary_term(p_start, p_end, dpath.state(0), dpath.state(n - 1))?;
    finite(
        value,
        (dpath.time(0), dpath.time(n - 1)),
        SampleKind::Conditional,
    )
}

/// Lumped samples over a batch of windows, fanned out in parallel when the
/// `parallel` feature is on.
pub fn lumped_entropy_samples(
    network: &ReactionNetwork,
    grouping: &ChannelGrouping,
    windows: &[Trajectory],
    p_start: &Distribution,
    p_end: &Distribution,
) -> Result<Vec<EntropySample>, PathEntropyError> {
    crate::par::map_indexed(windows.len(), |i| {
        lumped_path_entropy(network, grouping, &windows[i], p_start, p_end)
    })
    .into_iter()
    .collect()
}

/// Channel-resolved samples over a batch of windows.
pub fn channel_entropy_samples(
    network: &ReactionNetwork,
    windows: &[Trajectory],
    p_start: &Distribution,
    p_end: &Distribution,
) -> Result<Vec<EntropySample>, PathEntropyError> {
    crate::par::map_indexed(windows.len(), |i| {
        channel_path_entropy(network, &windows[i], p_start, p_end)
    })
    .into_iter()
    .collect()
}

/// Sequential reference for the bench suite.
pub fn channel_entropy_samples_sequential(
    network: &ReactionNetwork,
    windows: &[Trajectory],
    p_start: &Distribution,
    p_end: &Distribution,
) -> Result<Vec<EntropySample>, PathEntropyError> {
    crate::par::map_indexed_sequential(windows.len(), |i| {
        channel_path_entropy(network, &windows[i], p_start, p_end)
    })
    .into_iter()
    .collect()
}

/// Result of an exhaustive forward-vs-reverse sweep over discretized paths.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ReversibilityScan {
    pub n_paths: u64,
    pub max_gap: f64,
}

/// Exhaustively enumerate every (steps+1)-state sequence on the box and
/// report the largest |forward - reverse| log-probability gap, with
/// probabilities factorized as in [`path_log_probability`] under stationary
/// initial weighting. Gaps vanish exactly when the stationary process is
/// time-reversible.
pub fn reversibility_scan(
    generator: &crate::cme::Generator,
    stationary: &Distribution,
    dt: f64,
    steps: usize,
    budget: u64,
) -> Result<ReversibilityScan, PathEntropyError> {
    let n = generator.num_states() as u64;
    let n_paths = n
        .checked_pow(steps as u32 + 1)
        .filter(|&p| p <= budget)
        .ok_or(PathEntropyError::EnumerationBudget {
            paths: n.saturating_pow(steps as u32 + 1),
            budget,
        })?;
    if steps == 0 {
        // Single-point paths coincide with their reversals.
        return Ok(ReversibilityScan {
            n_paths,
            max_gap: 0.0,
        });
    }
    let conditionals = crate::cme::conditional_matrix(generator, dt)?;
    let m = generator.num_states();
    // Antisymmetric log-ratio table: gap(path) telescopes to
    // sum_i d[x_{i-1} -> x_i] + ln ps(x_0) - ln ps(x_n).
    let mut ratio = vec![0.0f64; m * m];
    for from in 0..m {
        for to in 0..m {
            if to != from {
                ratio[from * m + to] =
                    (conditionals.prob(to, from) / conditionals.prob(from, to)).ln();
            }
        }
    }
    let log_ps: Vec<f64> = stationary.probabilities().iter().map(|p| p.ln()).collect();
    fn worst_from(ratio: &[f64], log_ps: &[f64], m: usize, depth: usize, state: usize, acc: f64) -> f64 {
        if depth == 0 {
            return (acc - log_ps[state]).abs();
        }
        let mut worst = 0.0f64;
        for next in 0..m {
            let gap = worst_from(
                ratio,
                log_ps,
                m,
                depth - 1,
                next,
                acc + ratio[state * m + next],
            );
            if gap > worst {
                worst = gap;
            }
        }
        worst
    }
    let per_start = crate::par::map_indexed(m, |x0| {
        worst_from(&ratio, &log_ps, m, steps, x0, log_ps[x0])
    });
    Ok(ReversibilityScan {
        n_paths,
        max_gap: per_start.into_iter().fold(0.0, f64::max),
    })
}

/// Log probability of a discretized path under the Markov factorization
/// ln p0(x_0) + sum ln P(x_i | x_{i-1}; dt). This is the brute-force oracle
/// behind the reversibility checks.
pub fn path_log_probability(
    dpath: &DiscretizedPath,
    conditionals: &ConditionalMatrix,
    p0: &Distribution,
) -> Result<f64, PathEntropyError> {
    let sbox = conditionals.state_box();
    let first = p0
        .prob_of_state(dpath.state(0))
        .filter(|&p| p > 0.0)
        .ok_or_else(|| PathEntropyError::ZeroEndpointProbability {
            state: dpath.state(0).to_vec(),
        })?;
    let mut acc = CompensatedSum::new();
    acc.add(first.ln());
    let mut prev = sbox
        .index_of(dpath.state(0))
        .ok_or_else(|| PathEntropyError::StateOutsideBox {
            state: dpath.state(0).to_vec(),
        })?;
    for i in 1..dpath.num_points() {
        let here = sbox
            .index_of(dpath.state(i))
            .ok_or_else(|| PathEntropyError::StateOutsideBox {
                state: dpath.state(i).to_vec(),
            })?;
        let p = conditionals.prob(here, prev);
        if p <= 0.0 {
            return Err(PathEntropyError::ZeroConditional {
                from: prev,
                to: here,
            });
        }
        acc.add(p.ln());
        prev = here;
    }
    let value = acc.value();
    if !value.is_finite() {
        return Err(PathEntropyError::NonFinite);
    }
    Ok(value)
}
