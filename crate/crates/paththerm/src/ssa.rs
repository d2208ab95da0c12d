//! Exact stochastic simulation of the jump process (Gillespie direct method)
//! with channel-labeled trajectories, an equivalent two-stage selection mode
//! that first picks the jump vector and then the channel within its group,
//! path reversal, and time-grid discretization.

use std::io::{BufRead, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cme::Distribution;
use crate::network::{ChannelGrouping, NetworkError, ReactionNetwork};
use crate::par::{map_indexed, map_indexed_sequential};

#[derive(Debug, Error)]
pub enum SsaError {
    #[error("initial state has negative entries or wrong dimension")]
    InvalidInitialState,
    #[error("t_final must be positive, got {0}")]
    InvalidHorizon(f64),
    #[error("time {t} outside the trajectory range [0, {t_final}]")]
    TimeOutOfRange { t: f64, t_final: f64 },
    #[error("subdivision count must be at least 1")]
    InvalidSubdivision,
    #[error("cannot reverse an absorbed trajectory")]
    AbsorbedTrajectory,
    #[error("trajectory ends at {t_final}, cannot cut windows up to {needed}")]
    TrajectoryTooShort { t_final: f64, needed: f64 },
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error("jsonl: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Counter-seeded random stream: (seed, stream) fully determines the
/// sequence and distinct stream indices are statistically independent, so
/// ensembles parallelize deterministically.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    stream: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        RngStream { seed, stream, rng }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    /// Uniform draw in the open interval (0, 1].
    fn uniform_open(&mut self) -> f64 {
        1.0 - self.rng.random::<f64>()
    }

    /// Uniform draw in [0, 1).
    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    /// Exponential waiting time with the given rate.
    pub fn exponential(&mut self, rate: f64) -> f64 {
        -self.uniform_open().ln() / rate
    }
}

/// How the next channel is selected once the waiting time has elapsed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionMode {
    /// One draw proportional to the channel propensities.
    Direct,
    /// First the jump vector proportional to the lumped group rates, then
    /// the channel within the group proportional to its share. Adds one
    /// random draw per event without changing the dynamics.
    TwoStage,
}

impl std::str::FromStr for SelectionMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "direct" => Ok(SelectionMode::Direct),
            "two_stage" | "two-stage" => Ok(SelectionMode::TwoStage),
            other => Err(format!("unknown mode `{other}` (direct|two_stage)")),
        }
    }
}

/// One jump: when it fired and which elementary channel fired. The jump
/// vector is the network's jump vector for the channel, looked up on demand
/// so the two can never disagree.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JumpEvent {
    pub time: f64,
    pub channel: u32,
}

/// A sample path: initial state plus time-ordered jumps on [0, t_final].
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    initial_state: Vec<i64>,
    final_state: Vec<i64>,
    events: Vec<JumpEvent>,
    t_final: f64,
    absorbed: bool,
}

impl Trajectory {
    pub fn initial_state(&self) -> &[i64] {
        &self.initial_state
    }

    pub fn final_state(&self) -> &[i64] {
        &self.final_state
    }

    pub fn events(&self) -> &[JumpEvent] {
        &self.events
    }

    pub fn num_events(&self) -> usize {
        self.events.len()
    }

    pub fn t_final(&self) -> f64 {
        self.t_final
    }

    /// True when the total propensity hit zero before t_final; the path is
    /// constant from the last event on.
    pub fn is_absorbed(&self) -> bool {
        self.absorbed
    }

    /// State at time `t`, right-continuous: the state changes at the jump
    /// instant itself.
    pub fn state_at(&self, network: &ReactionNetwork, t: f64) -> Result<Vec<i64>, SsaError> {
        if !(0.0..=self.t_final).contains(&t) {
            return Err(SsaError::TimeOutOfRange {
                t,
                t_final: self.t_final,
            });
        }
        let mut state = self.initial_state.clone();
        for event in &self.events {
            if event.time > t {
                break;
            }
            network.apply_jump(&mut state, event.channel as usize);
        }
        Ok(state)
    }

    /// Replays all jumps, checking copy numbers never go negative.
    pub fn validate_replay(&self, network: &ReactionNetwork) -> bool {
        let mut state = self.initial_state.clone();
        let mut prev = -f64::INFINITY;
        for event in &self.events {
            if event.time <= prev || event.time > self.t_final {
                return false;
            }
            prev = event.time;
            network.apply_jump(&mut state, event.channel as usize);
            if state.iter().any(|&x| x < 0) {
                return false;
            }
        }
        state == self.final_state
    }

    /// Time-reversed path on the same interval: the event at t becomes the
    /// paired reverse channel firing at t_final - t. Requires the network's
    /// reverse-channel pairing.
    pub fn reverse(&self, network: &ReactionNetwork) -> Result<Trajectory, SsaError> {
        if self.absorbed {
            return Err(SsaError::AbsorbedTrajectory);
        }
        let pairing = network.pairing().ok_or(NetworkError::NoPairing)?;
        let events: Vec<JumpEvent> = self
            .events
            .iter()
            .rev()
            .map(|e| JumpEvent {
                time: self.t_final - e.time,
                channel: pairing[e.channel as usize] as u32,
            })
            .collect();
        Ok(Trajectory {
            initial_state: self.final_state.clone(),
            final_state: self.initial_state.clone(),
            events,
            t_final: self.t_final,
            absorbed: false,
        })
    }

    /// Read the path off a uniform grid of n subintervals (n+1 states),
    /// right-continuously.
    pub fn discretize(
        &self,
        network: &ReactionNetwork,
        n: usize,
    ) -> Result<DiscretizedPath, SsaError> {
        if n < 1 {
            return Err(SsaError::InvalidSubdivision);
        }
        let dim = self.initial_state.len();
        let mut times = Vec::with_capacity(n + 1);
        let mut states = Vec::with_capacity((n + 1) * dim);
        let mut state = self.initial_state.clone();
        let mut next_event = 0usize;
        for i in 0..=n {
            let t = self.t_final * i as f64 / n as f64;
            while next_event < self.events.len() && self.events[next_event].time <= t {
                network.apply_jump(&mut state, self.events[next_event].channel as usize);
                next_event += 1;
            }
            times.push(t);
            states.extend_from_slice(&state);
        }
        Ok(DiscretizedPath { dim, times, states })
    }

    /// Cut `count` consecutive windows of length `window` starting at
    /// `start`, each rebased to [0, window] with the state at the window
    /// opening as its initial state.
    pub fn cut_windows(
        &self,
        network: &ReactionNetwork,
        start: f64,
        window: f64,
        count: usize,
    ) -> Result<Vec<Trajectory>, SsaError> {
        let needed = start + window * count as f64;
        if needed > self.t_final * (1.0 + 1e-12) {
            return Err(SsaError::TrajectoryTooShort {
                t_final: self.t_final,
                needed,
            });
        }
        let mut windows = Vec::with_capacity(count);
        let mut state = self.initial_state.clone();
        let mut next_event = 0usize;
        // Advance to the start of the first window.
        while next_event < self.events.len() && self.events[next_event].time <= start {
            network.apply_jump(&mut state, self.events[next_event].channel as usize);
            next_event += 1;
        }
        for k in 0..count {
            let w_start = start + window * k as f64;
            let w_end = start + window * (k + 1) as f64;
            let initial_state = state.clone();
            let mut events = Vec::new();
            while next_event < self.events.len() && self.events[next_event].time <= w_end {
                let e = self.events[next_event];
                network.apply_jump(&mut state, e.channel as usize);
                events.push(JumpEvent {
                    time: (e.time - w_start).clamp(0.0, window),
                    channel: e.channel,
                });
                next_event += 1;
            }
            windows.push(Trajectory {
                initial_state,
                final_state: state.clone(),
                events,
                t_final: window,
                absorbed: false,
            });
        }
        Ok(windows)
    }
}

/// States of a trajectory read off a fixed time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscretizedPath {
    dim: usize,
    times: Vec<f64>,
    /// Flat (n+1) * dim state array.
    states: Vec<i64>,
}

impl DiscretizedPath {
    pub fn from_states(times: Vec<f64>, states: Vec<Vec<i64>>) -> Self {
        let dim = states.first().map_or(0, |s| s.len());
        let flat = states.into_iter().flatten().collect();
        DiscretizedPath {
            dim,
            times,
            states: flat,
        }
    }

    pub fn num_points(&self) -> usize {
        self.times.len()
    }

    pub fn time(&self, i: usize) -> f64 {
        self.times[i]
    }

    pub fn state(&self, i: usize) -> &[i64] {
        &self.states[i * self.dim..(i + 1) * self.dim]
    }
}

/// When the simulation stops.
#[derive(Debug, Clone, Copy)]
enum StopRule {
    Time(f64),
    Events(u64),
}

fn run_gillespie(
    network: &ReactionNetwork,
    grouping: &ChannelGrouping,
    x0: &[i64],
    stop: StopRule,
    mode: SelectionMode,
    rng: &mut RngStream,
) -> Result<Trajectory, SsaError> {
    if x0.len() != network.dimension() || x0.iter().any(|&x| x < 0) {
        return Err(SsaError::InvalidInitialState);
    }
    let n_reactions = network.num_reactions();
    let mut state = x0.to_vec();
    let mut propensities = vec![0.0f64; n_reactions];
    let mut events = Vec::new();
    let mut t = 0.0f64;
    let horizon = match stop {
        StopRule::Time(h) => {
            if !(h > 0.0) {
                return Err(SsaError::InvalidHorizon(h));
            }
            h
        }
        StopRule::Events(_) => f64::INFINITY,
    };
    loop {
        if let StopRule::Events(max) = stop {
            if events.len() as u64 >= max {
                break;
            }
        }
        let mut total = 0.0f64;
        for (r, a) in propensities.iter_mut().enumerate() {
            *a = network.propensity(&state, r);
            total += *a;
        }
        if total <= 0.0 {
            // Absorbed: the path stays constant for the rest of the horizon.
            let t_final = if horizon.is_finite() { horizon } else { t };
            return Ok(Trajectory {
                initial_state: x0.to_vec(),
                final_state: state,
                events,
                t_final,
                absorbed: true,
            });
        }
        let wait = rng.exponential(total);
        let mut t_next = t + wait;
        if t_next > horizon {
            break;
        }
        if t_next <= t {
            // Guard against a waiting time below the time resolution.
            t_next = t.next_up();
        }
        t = t_next;
        // Linear scan with a fallback to the last positive entry, so rounding
        // at the top of the cumulative sum can never select a dead channel.
        fn pick(weights: impl Iterator<Item = (usize, f64)>, target: f64) -> usize {
            let mut acc = 0.0;
            let mut last_positive = 0;
            for (index, w) in weights {
                if w > 0.0 {
                    last_positive = index;
                    acc += w;
                    if target < acc {
                        return index;
                    }
                }
            }
            last_positive
        }
        let channel = match mode {
            SelectionMode::Direct => pick(
                propensities.iter().cloned().enumerate(),
                rng.uniform() * total,
            ),
            SelectionMode::TwoStage => {
                // Stage one: the jump vector, by lumped group rate.
                let group_rate = |g: usize| -> f64 {
                    grouping.members(g).iter().map(|&r| propensities[r]).sum()
                };
                let group = pick(
                    (0..grouping.num_groups()).map(|g| (g, group_rate(g))),
                    rng.uniform() * total,
                );
                // Stage two: the channel inside the group.
                let members = grouping.members(group);
                pick(
                    members.iter().map(|&r| (r, propensities[r])),
                    rng.uniform() * group_rate(group),
                )
            }
        };
        network.apply_jump(&mut state, channel);
        debug_assert!(state.iter().all(|&x| x >= 0), "negative copy number");
        events.push(JumpEvent {
            time: t,
            channel: channel as u32,
        });
    }
    let t_final = match stop {
        StopRule::Time(h) => h,
        StopRule::Events(_) => t,
    };
    Ok(Trajectory {
        initial_state: x0.to_vec(),
        final_state: state,
        events,
        t_final,
        absorbed: false,
    })
}

/// Simulate one sample path on [0, t_final].
pub fn simulate(
    network: &ReactionNetwork,
    grouping: &ChannelGrouping,
    x0: &[i64],
    t_final: f64,
    mode: SelectionMode,
    rng: &mut RngStream,
) -> Result<Trajectory, SsaError> {
    run_gillespie(network, grouping, x0, StopRule::Time(t_final), mode, rng)
}

/// Simulate until `max_events` jumps have fired (or absorption).
pub fn simulate_events(
    network: &ReactionNetwork,
    grouping: &ChannelGrouping,
    x0: &[i64],
    max_events: u64,
    mode: SelectionMode,
    rng: &mut RngStream,
) -> Result<Trajectory, SsaError> {
    run_gillespie(
        network,
        grouping,
        x0,
        StopRule::Events(max_events),
        mode,
        rng,
    )
}

/// Independent trajectories on streams `0..count`, in parallel when the
/// `parallel` feature is on. Output order is by stream index either way.
pub fn simulate_ensemble(
    network: &ReactionNetwork,
    grouping: &ChannelGrouping,
    x0: &[i64],
    t_final: f64,
    mode: SelectionMode,
    seed: u64,
    count: usize,
) -> Result<Vec<Trajectory>, SsaError> {
    collect_ensemble(map_indexed(count, |i| {
        let mut rng = RngStream::new(seed, i as u64);
        simulate(network, grouping, x0, t_final, mode, &mut rng)
    }))
}

/// Sequential reference implementation of [`simulate_ensemble`]; the bench
/// suite compares the two.
pub fn simulate_ensemble_sequential(
    network: &ReactionNetwork,
    grouping: &ChannelGrouping,
    x0: &[i64],
    t_final: f64,
    mode: SelectionMode,
    seed: u64,
    count: usize,
) -> Result<Vec<Trajectory>, SsaError> {
    collect_ensemble(map_indexed_sequential(count, |i| {
        let mut rng = RngStream::new(seed, i as u64);
        simulate(network, grouping, x0, t_final, mode, &mut rng)
    }))
}

fn collect_ensemble(
    results: Vec<Result<Trajectory, SsaError>>,
) -> Result<Vec<Trajectory>, SsaError> {
    results.into_iter().collect()
}

/// Time-weighted occupancy of the box states over [burn_in, t_final].
/// Returns the in-box occupancy (normalized over total elapsed time) and the
/// fraction of time spent outside the box.
pub fn occupancy(
    network: &ReactionNetwork,
    trajectory: &Trajectory,
    sbox: &crate::cme::StateBox,
    burn_in: f64,
) -> Result<(Vec<f64>, f64), SsaError> {
    let t_final = trajectory.t_final();
    if burn_in >= t_final {
        return Err(SsaError::TimeOutOfRange {
            t: burn_in,
            t_final,
        });
    }
    let mut weights = vec![0.0f64; sbox.len()];
    let mut outside = 0.0f64;
    let mut state = trajectory.initial_state().to_vec();
    let mut t_prev = 0.0f64;
    let mut credit = |state: &[i64], from: f64, to: f64| {
        let span = (to.min(t_final) - from.max(burn_in)).max(0.0);
        if span > 0.0 {
            match sbox.index_of(state) {
                Some(i) => weights[i] += span,
                None => outside += span,
            }
        }
    };
    for event in trajectory.events() {
        credit(&state, t_prev, event.time);
        network.apply_jump(&mut state, event.channel as usize);
        t_prev = event.time;
    }
    credit(&state, t_prev, t_final);
    let total = t_final - burn_in;
    for w in &mut weights {
        *w /= total;
    }
    Ok((weights, outside / total))
}

/// Total-variation distance between the empirical occupancy of a trajectory
/// and a reference distribution on the same box; time spent outside the box
/// counts fully toward the distance.
pub fn occupancy_tv_distance(
    network: &ReactionNetwork,
    trajectory: &Trajectory,
    reference: &Distribution,
    burn_in: f64,
) -> Result<f64, SsaError> {
    let (weights, outside) = occupancy(network, trajectory, reference.state_box(), burn_in)?;
    let inner: f64 = weights
        .iter()
        .zip(reference.probabilities())
        .map(|(w, p)| (w - p).abs())
        .sum();
    Ok(0.5 * (inner + outside))
}

#[derive(Serialize, Deserialize)]
struct JsonlHeader {
    x0: Vec<i64>,
    t_final: f64,
    seed: u64,
    stream: u64,
    absorbed: bool,
}

#[derive(Serialize, Deserialize)]
struct JsonlEvent {
    t: f64,
    rho: u32,
    state: Vec<i64>,
}

/// JSON Lines trajectory output: a header line
/// `{"x0": [...], "t_final": ..., "seed": ..., "stream": ..., "absorbed": ...}`
/// followed by one `{"t": ..., "rho": ..., "state": [...]}` line per event,
/// with `state` the post-jump composition.
pub fn write_trajectory_jsonl<W: Write>(
    mut w: W,
    network: &ReactionNetwork,
    trajectory: &Trajectory,
    seed: u64,
    stream: u64,
) -> Result<(), SsaError> {
    let header = JsonlHeader {
        x0: trajectory.initial_state().to_vec(),
        t_final: trajectory.t_final(),
        seed,
        stream,
        absorbed: trajectory.is_absorbed(),
    };
    serde_json::to_writer(&mut w, &header).map_err(|e| SsaError::Format(e.to_string()))?;
    writeln!(w)?;
    let mut state = trajectory.initial_state().to_vec();
    for event in trajectory.events() {
        network.apply_jump(&mut state, event.channel as usize);
        let line = JsonlEvent {
            t: event.time,
            rho: event.channel,
            state: state.clone(),
        };
        serde_json::to_writer(&mut w, &line).map_err(|e| SsaError::Format(e.to_string()))?;
        writeln!(w)?;
    }
    Ok(())
}

/// Parse the JSONL format back; the per-event states are checked against a
/// replay of the jumps.
pub fn read_trajectory_jsonl<R: BufRead>(
    r: R,
    network: &ReactionNetwork,
) -> Result<(Trajectory, u64, u64), SsaError> {
    let mut lines = r.lines();
    let header_line = lines
        .next()
        .ok_or_else(|| SsaError::Format("missing header line".into()))??;
    let header: JsonlHeader =
        serde_json::from_str(&header_line).map_err(|e| SsaError::Format(e.to_string()))?;
    let mut events = Vec::new();
    let mut state = header.x0.clone();
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let event: JsonlEvent =
            serde_json::from_str(&line).map_err(|e| SsaError::Format(e.to_string()))?;
        if event.rho as usize >= network.num_reactions() {
            return Err(SsaError::Format(format!("unknown channel {}", event.rho)));
        }
        network.apply_jump(&mut state, event.rho as usize);
        if state != event.state {
            return Err(SsaError::Format(format!(
                "state mismatch at t = {}: replay gives {:?}, file says {:?}",
                event.t, state, event.state
            )));
        }
        events.push(JumpEvent {
            time: event.t,
            channel: event.rho,
        });
    }
    Ok((
        Trajectory {
            initial_state: header.x0,
            final_state: state,
            events,
            t_final: header.t_final,
            absorbed: header.absorbed,
        },
        header.seed,
        header.stream,
    ))
}
