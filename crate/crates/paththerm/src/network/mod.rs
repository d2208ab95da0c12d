//! Reaction networks: species, elementary channels, mass-action propensities,
//! and the grouping of channels by shared jump vector.

mod parse;
mod presets;

pub use parse::parse_network;
pub use presets::{preset, preset_names, PresetModel};

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum NetworkError {
    #[error("line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("duplicate species `{0}`")]
    DuplicateSpecies(String),
    #[error("undeclared species `{0}`")]
    UndeclaredSpecies(String),
    #[error("reaction {index}: rate constant must be positive, got {rate}")]
    NonPositiveRate { index: usize, rate: f64 },
    #[error("reaction {0}: no species on either side")]
    EmptyReaction(usize),
    #[error("network declares no dynamic species")]
    NoDynamicSpecies,
    #[error("invalid reaction id {0}")]
    InvalidReaction(usize),
    #[error("unknown jump vector {0:?}")]
    UnknownJumpVector(Vec<i64>),
    #[error("invalid reverse pairing: {0}")]
    InvalidPairing(String),
    #[error("no reverse-channel pairing declared")]
    NoPairing,
    #[error("unknown preset `{0}`")]
    UnknownPreset(String),
    #[error("preset `{preset}`: missing parameter `{name}`")]
    MissingParameter { preset: String, name: String },
    #[error("preset `{preset}`: unknown parameter `{name}`")]
    UnknownParameter { preset: String, name: String },
    #[error("preset `{preset}`: parameter `{name}` = {value} is invalid ({reason})")]
    InvalidParameter {
        preset: String,
        name: String,
        value: f64,
        reason: String,
    },
}

/// Whether a species evolves or is pinned to a reservoir copy number.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SpeciesKind {
    Dynamic,
    /// Held at a fixed copy number by the reservoir; enters propensities but
    /// never changes.
    Chemostatted { count: u64 },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Species {
    pub name: String,
    pub kind: SpeciesKind,
}

impl Species {
    pub fn dynamic(name: impl Into<String>) -> Self {
        Species {
            name: name.into(),
            kind: SpeciesKind::Dynamic,
        }
    }

    pub fn chemostatted(name: impl Into<String>, count: u64) -> Self {
        Species {
            name: name.into(),
            kind: SpeciesKind::Chemostatted { count },
        }
    }

    pub fn is_dynamic(&self) -> bool {
        matches!(self.kind, SpeciesKind::Dynamic)
    }
}

/// One elementary channel. Reversible pairs are stored as two records.
#[derive(Debug, Clone, PartialEq)]
pub struct Reaction {
    /// (species index, stoichiometric coefficient), sorted by species index.
    pub reactants: Vec<(usize, u32)>,
    pub products: Vec<(usize, u32)>,
    pub rate_constant: f64,
}

impl Reaction {
    pub fn new(
        reactants: Vec<(usize, u32)>,
        products: Vec<(usize, u32)>,
        rate_constant: f64,
    ) -> Self {
        fn normalize(mut terms: Vec<(usize, u32)>) -> Vec<(usize, u32)> {
            terms.retain(|&(_, c)| c > 0);
            terms.sort_by_key(|&(s, _)| s);
            terms.dedup_by(|later, earlier| {
                if later.0 == earlier.0 {
                    earlier.1 += later.1;
                    true
                } else {
                    false
                }
            });
            terms
        }
        Reaction {
            reactants: normalize(reactants),
            products: normalize(products),
            rate_constant,
        }
    }
}

/// Falling factorial `n (n-1) ... (n-r+1)`; zero when fewer than `r` copies.
fn falling_factorial(n: i64, r: u32) -> f64 {
    if n < r as i64 {
        return 0.0;
    }
    let mut acc = 1.0;
    for k in 0..r as i64 {
        acc *= (n - k) as f64;
    }
    acc
}

/// A validated reaction network over an ordered species list.
#[derive(Debug, Clone, PartialEq)]
pub struct ReactionNetwork {
    species: Vec<Species>,
    reactions: Vec<Reaction>,
    /// Species index of each dynamic axis, in declaration order.
    dynamic: Vec<usize>,
    /// Species index -> dynamic axis, if dynamic.
    axis_of: Vec<Option<usize>>,
    /// Jump vector over dynamic axes, per reaction.
    jumps: Vec<Vec<i64>>,
    /// Reverse-channel pairing (involution on reaction ids), if declared.
    pairing: Option<Vec<usize>>,
}

impl ReactionNetwork {
    /// Validates and derives jump vectors. `pairing`, when given, must be an
    /// involution mapping each channel to one with the negated jump vector.
    pub fn new(
        species: Vec<Species>,
        reactions: Vec<Reaction>,
        pairing: Option<Vec<usize>>,
    ) -> Result<Self, NetworkError> {
        let mut seen = BTreeMap::new();
        for s in &species {
            if seen.insert(s.name.clone(), ()).is_some() {
                return Err(NetworkError::DuplicateSpecies(s.name.clone()));
            }
        }
        let mut dynamic = Vec::new();
        let mut axis_of = vec![None; species.len()];
        for (i, s) in species.iter().enumerate() {
            if s.is_dynamic() {
                axis_of[i] = Some(dynamic.len());
                dynamic.push(i);
            }
        }
        if dynamic.is_empty() {
            return Err(NetworkError::NoDynamicSpecies);
        }
        let dim = dynamic.len();

        let mut jumps = Vec::with_capacity(reactions.len());
        for (index, r) in reactions.iter().enumerate() {
            if !(r.rate_constant > 0.0) || !r.rate_constant.is_finite() {
                return Err(NetworkError::NonPositiveRate {
                    index,
                    rate: r.rate_constant,
                });
            }
            if r.reactants.is_empty() && r.products.is_empty() {
                return Err(NetworkError::EmptyReaction(index));
            }
            let mut jump = vec![0i64; dim];
            for &(s, c) in &r.reactants {
                if s >= species.len() {
                    return Err(NetworkError::UndeclaredSpecies(format!("#{s}")));
                }
                if let Some(axis) = axis_of[s] {
                    jump[axis] -= c as i64;
                }
            }
            for &(s, c) in &r.products {
                if s >= species.len() {
                    return Err(NetworkError::UndeclaredSpecies(format!("#{s}")));
                }
                if let Some(axis) = axis_of[s] {
                    jump[axis] += c as i64;
                }
            }
            jumps.push(jump);
        }

        if let Some(ref map) = pairing {
            if map.len() != reactions.len() {
                return Err(NetworkError::InvalidPairing(format!(
                    "pairing covers {} of {} reactions",
                    map.len(),
                    reactions.len()
                )));
            }
            for (i, &j) in map.iter().enumerate() {
                if j >= reactions.len() {
                    return Err(NetworkError::InvalidPairing(format!(
                        "reaction {i} paired with out-of-range id {j}"
                    )));
                }
                if map[j] != i {
                    return Err(NetworkError::InvalidPairing(format!(
                        "pairing is not an involution at reaction {i}"
                    )));
                }
                let negated: Vec<i64> = jumps[i].iter().map(|v| -v).collect();
                if jumps[j] != negated {
                    return Err(NetworkError::InvalidPairing(format!(
                        "reaction {j} does not negate the jump vector of reaction {i}"
                    )));
                }
            }
        }

        Ok(ReactionNetwork {
            species,
            reactions,
            dynamic,
            axis_of,
            jumps,
            pairing,
        })
    }

    /// Pair consecutive reactions (0,1), (2,3), ... as forward/backward
    /// records. Fails if the count is odd or some pair does not negate.
    pub fn with_adjacent_pairing(
        species: Vec<Species>,
        reactions: Vec<Reaction>,
    ) -> Result<Self, NetworkError> {
        let n = reactions.len();
        if n % 2 != 0 {
            return Err(NetworkError::InvalidPairing(format!(
                "adjacent pairing needs an even reaction count, got {n}"
            )));
        }
        let pairing = (0..n).map(|i| i ^ 1).collect();
        Self::new(species, reactions, Some(pairing))
    }

    pub fn species(&self) -> &[Species] {
        &self.species
    }

    pub fn reactions(&self) -> &[Reaction] {
        &self.reactions
    }

    pub fn num_reactions(&self) -> usize {
        self.reactions.len()
    }

    /// Number of dynamic species (the dimension of the state space).
    pub fn dimension(&self) -> usize {
        self.dynamic.len()
    }

    /// Species index backing dynamic axis `axis`.
    pub fn dynamic_species(&self, axis: usize) -> usize {
        self.dynamic[axis]
    }

    pub fn species_index(&self, name: &str) -> Option<usize> {
        self.species.iter().position(|s| s.name == name)
    }

    pub fn jump(&self, reaction: usize) -> &[i64] {
        &self.jumps[reaction]
    }

    pub fn pairing(&self) -> Option<&[usize]> {
        self.pairing.as_deref()
    }

    /// Reverse channel of `reaction`, or an error when no pairing is declared.
    pub fn reverse_channel(&self, reaction: usize) -> Result<usize, NetworkError> {
        self.pairing
            .as_ref()
            .map(|p| p[reaction])
            .ok_or(NetworkError::NoPairing)
    }

    /// Mass-action propensity of channel `reaction` at `state` (length-N
    /// vector of dynamic copy numbers). Chemostatted reactants contribute
    /// their fixed copy numbers.
    pub fn propensity(&self, state: &[i64], reaction: usize) -> f64 {
        debug_assert_eq!(state.len(), self.dimension());
        let r = &self.reactions[reaction];
        let mut a = r.rate_constant;
        for &(s, c) in &r.reactants {
            if c == 0 {
                continue;
            }
            let copies = match self.species[s].kind {
                SpeciesKind::Dynamic => state[self.axis_of[s].unwrap()],
                SpeciesKind::Chemostatted { count } => count as i64,
            };
            a *= falling_factorial(copies, c);
            if a == 0.0 {
                return 0.0;
            }
        }
        a
    }

    /// Propensity with a bounds check on the reaction id.
    pub fn try_propensity(&self, state: &[i64], reaction: usize) -> Result<f64, NetworkError> {
        if reaction >= self.reactions.len() {
            return Err(NetworkError::InvalidReaction(reaction));
        }
        Ok(self.propensity(state, reaction))
    }

    pub fn total_propensity(&self, state: &[i64]) -> f64 {
        (0..self.reactions.len())
            .map(|r| self.propensity(state, r))
            .sum()
    }

    /// Partition the channels by jump vector.
    pub fn group_channels(&self) -> ChannelGrouping {
        let mut by_jump: BTreeMap<Vec<i64>, Vec<usize>> = BTreeMap::new();
        for (r, jump) in self.jumps.iter().enumerate() {
            by_jump.entry(jump.clone()).or_default().push(r);
        }
        let groups: Vec<(Vec<i64>, Vec<usize>)> = by_jump.into_iter().collect();
        let multigraph = groups.iter().any(|(_, members)| members.len() >= 2);
        let mut group_of = vec![0usize; self.jumps.len()];
        for (g, (_, members)) in groups.iter().enumerate() {
            for &r in members {
                group_of[r] = g;
            }
        }
        ChannelGrouping {
            groups,
            group_of,
            multigraph,
        }
    }

    /// Apply the jump vector of `reaction` to `state` in place.
    pub fn apply_jump(&self, state: &mut [i64], reaction: usize) {
        for (x, d) in state.iter_mut().zip(&self.jumps[reaction]) {
            *x += d;
        }
    }

    /// Human-readable `A + 2 X -> 3 X` rendering of one reaction.
    pub fn format_reaction(&self, reaction: usize) -> String {
        let side = |terms: &[(usize, u32)]| -> String {
            let parts: Vec<String> = terms
                .iter()
                .map(|&(s, c)| {
                    if c == 1 {
                        self.species[s].name.clone()
                    } else {
                        format!("{} {}", c, self.species[s].name)
                    }
                })
                .collect();
            if parts.is_empty() {
                "0".to_string()
            } else {
                parts.join(" + ")
            }
        };
        let r = &self.reactions[reaction];
        format!("{} -> {}", side(&r.reactants), side(&r.products))
    }

    /// Render in the text format accepted by [`parse_network`].
    pub fn serialize(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for ReactionNetwork {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let dynamic: Vec<&str> = self
            .dynamic
            .iter()
            .map(|&s| self.species[s].name.as_str())
            .collect();
        writeln!(f, "species {}", dynamic.join(" "))?;
        for s in &self.species {
            if let SpeciesKind::Chemostatted { count } = s.kind {
                writeln!(f, "const {} = {}", s.name, count)?;
            }
        }
        for r in &self.reactions {
            let side = |terms: &[(usize, u32)]| -> String {
                let parts: Vec<String> = terms
                    .iter()
                    .filter(|&&(_, c)| c > 0)
                    .map(|&(s, c)| {
                        if c == 1 {
                            self.species[s].name.clone()
                        } else {
                            format!("{} {}", c, self.species[s].name)
                        }
                    })
                    .collect();
                if parts.is_empty() {
                    "0".to_string()
                } else {
                    parts.join(" + ")
                }
            };
            writeln!(
                f,
                "reaction {} -> {} : {:e}",
                side(&r.reactants),
                side(&r.products),
                r.rate_constant
            )?;
        }
        if let Some(ref pairing) = self.pairing {
            for (i, &j) in pairing.iter().enumerate() {
                if i < j {
                    writeln!(f, "pair {i} {j}")?;
                }
            }
        }
        Ok(())
    }
}

/// Channels partitioned by jump vector. `multigraph` is set when several
/// elementary channels produce the same composition change, in which case
/// state-level paths cannot identify the responsible channel.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelGrouping {
    /// (jump vector, member reaction ids), ordered by jump vector.
    groups: Vec<(Vec<i64>, Vec<usize>)>,
    group_of: Vec<usize>,
    multigraph: bool,
}

impl ChannelGrouping {
    pub fn groups(&self) -> &[(Vec<i64>, Vec<usize>)] {
        &self.groups
    }

    pub fn is_multigraph(&self) -> bool {
        self.multigraph
    }

    pub fn num_groups(&self) -> usize {
        self.groups.len()
    }

    pub fn group_of(&self, reaction: usize) -> usize {
        self.group_of[reaction]
    }

    pub fn find(&self, jump: &[i64]) -> Option<usize> {
        self.groups
            .binary_search_by(|(nu, _)| nu.as_slice().cmp(jump))
            .ok()
    }

    pub fn members(&self, group: usize) -> &[usize] {
        &self.groups[group].1
    }

    pub fn jump_of_group(&self, group: usize) -> &[i64] {
        &self.groups[group].0
    }

    /// Index of the group with the negated jump vector, if present.
    pub fn reverse_group(&self, group: usize) -> Option<usize> {
        let negated: Vec<i64> = self.groups[group].0.iter().map(|v| -v).collect();
        self.find(&negated)
    }

    /// Total transition rate of the composition change `jump` out of `state`:
    /// the sum of the member channel propensities.
    pub fn lumped_rate(
        &self,
        network: &ReactionNetwork,
        state: &[i64],
        jump: &[i64],
    ) -> Result<f64, NetworkError> {
        let group = self
            .find(jump)
            .ok_or_else(|| NetworkError::UnknownJumpVector(jump.to_vec()))?;
        Ok(self.lumped_rate_of_group(network, state, group))
    }

    pub fn lumped_rate_of_group(
        &self,
        network: &ReactionNetwork,
        state: &[i64],
        group: usize,
    ) -> f64 {
        self.groups[group]
            .1
            .iter()
            .map(|&r| network.propensity(state, r))
            .sum()
    }
}
