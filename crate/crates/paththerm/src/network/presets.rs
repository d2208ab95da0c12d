//! Built-in model presets. Every preset lists forward/backward records
//! adjacently, so reverse-channel pairing is (0,1), (2,3), ...

use std::collections::BTreeMap;

use super::{NetworkError, Reaction, ReactionNetwork, Species};

/// A preset network plus sensible defaults for driving it.
#[derive(Debug, Clone)]
pub struct PresetModel {
    pub network: ReactionNetwork,
    pub initial_state: Vec<i64>,
    pub xmax: i64,
}

pub fn preset_names() -> &'static [&'static str] {
    &["schlogl", "scheme1", "xy_pair", "driven_cycle", "birth_death"]
}

struct Params<'a> {
    preset: &'static str,
    map: &'a BTreeMap<String, f64>,
    used: Vec<String>,
}

impl<'a> Params<'a> {
    fn new(preset: &'static str, map: &'a BTreeMap<String, f64>) -> Self {
        Params {
            preset,
            map,
            used: Vec::new(),
        }
    }

    fn rate(&mut self, name: &str, default: f64) -> Result<f64, NetworkError> {
        self.used.push(name.to_string());
        let v = *self.map.get(name).unwrap_or(&default);
        if !(v > 0.0) || !v.is_finite() {
            return Err(NetworkError::InvalidParameter {
                preset: self.preset.to_string(),
                name: name.to_string(),
                value: v,
                reason: "must be a positive rate constant".to_string(),
            });
        }
        Ok(v)
    }

    fn count(&mut self, name: &str, default: u64) -> Result<u64, NetworkError> {
        self.used.push(name.to_string());
        let v = *self.map.get(name).unwrap_or(&(default as f64));
        if v < 0.0 || v.fract() != 0.0 || v > u64::MAX as f64 {
            return Err(NetworkError::InvalidParameter {
                preset: self.preset.to_string(),
                name: name.to_string(),
                value: v,
                reason: "must be a nonnegative integer copy number".to_string(),
            });
        }
        Ok(v as u64)
    }

    fn finish(self) -> Result<(), NetworkError> {
        for key in self.map.keys() {
            if !self.used.iter().any(|u| u == key) {
                return Err(NetworkError::UnknownParameter {
                    preset: self.preset.to_string(),
                    name: key.clone(),
                });
            }
        }
        Ok(())
    }
}

/// Build a preset by name. Unknown names and unknown or invalid parameters
/// are errors; omitted parameters take the documented defaults.
pub fn preset(name: &str, params: &BTreeMap<String, f64>) -> Result<PresetModel, NetworkError> {
    match name {
        "schlogl" => schlogl(params),
        "scheme1" => scheme1(params),
        "xy_pair" => xy_pair(params),
        "driven_cycle" => driven_cycle(params),
        "birth_death" => birth_death(params),
        other => Err(NetworkError::UnknownPreset(other.to_string())),
    }
}

/// Autocatalytic one-species model: A + 2X <-> 3X, B <-> X with chemostats
/// A, B. Two channels share each of the jumps +1 and -1. The defaults are
/// the canonical parameter set used throughout the test configs: monostable
/// around X ~ 28 and negligible mass beyond X = 200.
fn schlogl(params: &BTreeMap<String, f64>) -> Result<PresetModel, NetworkError> {
    let mut p = Params::new("schlogl", params);
    let k1 = p.rate("k1", 6.0e-3)?;
    let k2 = p.rate("k2", 1.5e-3)?;
    let k3 = p.rate("k3", 0.6)?;
    let k4 = p.rate("k4", 1.0)?;
    let a = p.count("a", 10)?;
    let b = p.count("b", 20)?;
    p.finish()?;

    let species = vec![
        Species::dynamic("X"),
        Species::chemostatted("A", a),
        Species::chemostatted("B", b),
    ];
    let (x, ca, cb) = (0, 1, 2);
    let reactions = vec![
        Reaction::new(vec![(ca, 1), (x, 2)], vec![(x, 3)], k1),
        Reaction::new(vec![(x, 3)], vec![(ca, 1), (x, 2)], k2),
        Reaction::new(vec![(cb, 1)], vec![(x, 1)], k3),
        Reaction::new(vec![(x, 1)], vec![(cb, 1)], k4),
    ];
    Ok(PresetModel {
        network: ReactionNetwork::with_adjacent_pairing(species, reactions)?,
        initial_state: vec![28],
        xmax: 200,
    })
}

/// R reversible birth-death channels: channel rho converts one reservoir
/// unit into one X while consuming rho-1 catalytic copies of X. All 2R
/// channels share the jumps +1/-1. Parameters: `r`, then per channel
/// `kf<i>`, `kb<i>`, `a<i>`, `b<i>` (defaults 1.0, 1.0, 10, 10).
fn scheme1(params: &BTreeMap<String, f64>) -> Result<PresetModel, NetworkError> {
    let mut p = Params::new("scheme1", params);
    let r = p.count("r", 2)?;
    if r < 1 || r > 8 {
        return Err(NetworkError::InvalidParameter {
            preset: "scheme1".to_string(),
            name: "r".to_string(),
            value: r as f64,
            reason: "channel count must be in 1..=8".to_string(),
        });
    }
    let mut species = vec![Species::dynamic("X")];
    let mut reactions = Vec::new();
    for rho in 1..=r {
        let kf = p.rate(&format!("kf{rho}"), 1.0)?;
        let kb = p.rate(&format!("kb{rho}"), 1.0)?;
        let a = p.count(&format!("a{rho}"), 10)?;
        let b = p.count(&format!("b{rho}"), 10)?;
        let ia = species.len();
        species.push(Species::chemostatted(format!("A{rho}"), a));
        let ib = species.len();
        species.push(Species::chemostatted(format!("B{rho}"), b));
        let cat = (rho - 1) as u32;
        // A_rho + (rho-1) X -> B_rho + rho X and its reverse.
        reactions.push(Reaction::new(
            vec![(ia, 1), (0, cat)],
            vec![(ib, 1), (0, cat + 1)],
            kf,
        ));
        reactions.push(Reaction::new(
            vec![(ib, 1), (0, cat + 1)],
            vec![(ia, 1), (0, cat)],
            kb,
        ));
    }
    p.finish()?;
    Ok(PresetModel {
        network: ReactionNetwork::with_adjacent_pairing(species, reactions)?,
        initial_state: vec![10],
        xmax: 200,
    })
}

/// The two-species multigraph pair X <-> Y and X + Y <-> 2Y. Both forward
/// channels produce (-1,+1); total X + Y is conserved.
fn xy_pair(params: &BTreeMap<String, f64>) -> Result<PresetModel, NetworkError> {
    let mut p = Params::new("xy_pair", params);
    let k1 = p.rate("k1", 1.0)?;
    let k2 = p.rate("k2", 1.0)?;
    let k3 = p.rate("k3", 0.05)?;
    let k4 = p.rate("k4", 0.05)?;
    p.finish()?;

    let species = vec![Species::dynamic("X"), Species::dynamic("Y")];
    let (x, y) = (0, 1);
    let reactions = vec![
        Reaction::new(vec![(x, 1)], vec![(y, 1)], k1),
        Reaction::new(vec![(y, 1)], vec![(x, 1)], k2),
        Reaction::new(vec![(x, 1), (y, 1)], vec![(y, 2)], k3),
        Reaction::new(vec![(y, 2)], vec![(x, 1), (y, 1)], k4),
    ];
    Ok(PresetModel {
        network: ReactionNetwork::with_adjacent_pairing(species, reactions)?,
        initial_state: vec![20, 20],
        xmax: 40,
    })
}

/// Three-species unicyclic network X <-> Y <-> Z <-> X with one particle by
/// default. All six jump vectors are distinct, so the driven cycle is the
/// simple-graph testbed for nonequilibrium stationary states.
fn driven_cycle(params: &BTreeMap<String, f64>) -> Result<PresetModel, NetworkError> {
    let mut p = Params::new("driven_cycle", params);
    let kxy = p.rate("kxy", 2.0)?;
    let kyx = p.rate("kyx", 1.0)?;
    let kyz = p.rate("kyz", 2.0)?;
    let kzy = p.rate("kzy", 1.0)?;
    let kzx = p.rate("kzx", 2.0)?;
    let kxz = p.rate("kxz", 1.0)?;
    p.finish()?;

    let species = vec![
        Species::dynamic("X"),
        Species::dynamic("Y"),
        Species::dynamic("Z"),
    ];
    let (x, y, z) = (0, 1, 2);
    let reactions = vec![
        Reaction::new(vec![(x, 1)], vec![(y, 1)], kxy),
        Reaction::new(vec![(y, 1)], vec![(x, 1)], kyx),
        Reaction::new(vec![(y, 1)], vec![(z, 1)], kyz),
        Reaction::new(vec![(z, 1)], vec![(y, 1)], kzy),
        Reaction::new(vec![(z, 1)], vec![(x, 1)], kzx),
        Reaction::new(vec![(x, 1)], vec![(z, 1)], kxz),
    ];
    Ok(PresetModel {
        network: ReactionNetwork::with_adjacent_pairing(species, reactions)?,
        initial_state: vec![1, 0, 0],
        xmax: 1,
    })
}

/// Single reversible pair A <-> X with chemostat A: birth at constant rate
/// kf*a, death at kb*X. Stationary distribution is Poisson(kf*a/kb).
fn birth_death(params: &BTreeMap<String, f64>) -> Result<PresetModel, NetworkError> {
    let mut p = Params::new("birth_death", params);
    let kf = p.rate("kf", 1.0)?;
    let kb = p.rate("kb", 1.0)?;
    let a = p.count("a", 10)?;
    p.finish()?;

    let species = vec![Species::dynamic("X"), Species::chemostatted("A", a)];
    let (x, ca) = (0, 1);
    let reactions = vec![
        Reaction::new(vec![(ca, 1)], vec![(ca, 1), (x, 1)], kf),
        Reaction::new(vec![(x, 1)], vec![(ca, 1)], kb),
    ];
    Ok(PresetModel {
        network: ReactionNetwork::with_adjacent_pairing(species, reactions)?,
        initial_state: vec![10],
        xmax: 60,
    })
}
