//! Run configuration: CLI flags override config-file values, which override
//! preset defaults. The resolved configuration is echoed into the output
//! directory as `run.json` so every result can be reproduced.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;

use paththerm::network::{parse_network, preset, ReactionNetwork};
use paththerm::ssa::SelectionMode;

use crate::CliError;

/// Partial settings collected from one source (flags or a config file).
#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub model: Option<PathBuf>,
    pub preset: Option<String>,
    pub params: BTreeMap<String, f64>,
    pub xmax: Option<i64>,
    pub x0: Option<Vec<i64>>,
    pub t_final: Option<f64>,
    pub window: Option<f64>,
    pub n_windows: Option<usize>,
    pub trajectories: Option<usize>,
    pub events: Option<u64>,
    pub seed: Option<u64>,
    pub mode: Option<SelectionMode>,
    pub kind: Option<String>,
    pub steps: Option<usize>,
    pub bins: Option<usize>,
    pub jobs: Option<usize>,
    pub out: Option<PathBuf>,
}

impl Overrides {
    /// Fill unset fields of `self` from `fallback`.
    pub fn or(mut self, fallback: Overrides) -> Overrides {
        self.model = self.model.or(fallback.model);
        self.preset = self.preset.or(fallback.preset);
        for (k, v) in fallback.params {
            self.params.entry(k).or_insert(v);
        }
        self.xmax = self.xmax.or(fallback.xmax);
        self.x0 = self.x0.or(fallback.x0);
        self.t_final = self.t_final.or(fallback.t_final);
        self.window = self.window.or(fallback.window);
        self.n_windows = self.n_windows.or(fallback.n_windows);
        self.trajectories = self.trajectories.or(fallback.trajectories);
        self.events = self.events.or(fallback.events);
        self.seed = self.seed.or(fallback.seed);
        self.mode = self.mode.or(fallback.mode);
        self.kind = self.kind.or(fallback.kind);
        self.steps = self.steps.or(fallback.steps);
        self.bins = self.bins.or(fallback.bins);
        self.jobs = self.jobs.or(fallback.jobs);
        self.out = self.out.or(fallback.out);
        self
    }
}

pub fn parse_x0(text: &str) -> Result<Vec<i64>, CliError> {
    text.split(',')
        .map(|t| t.trim().parse::<i64>())
        .collect::<Result<Vec<i64>, _>>()
        .map_err(|e| CliError::usage(format!("invalid x0 `{text}`: {e}")))
}

pub fn parse_param(text: &str) -> Result<(String, f64), CliError> {
    let (key, value) = text
        .split_once('=')
        .ok_or_else(|| CliError::usage(format!("parameter `{text}` is not of the form k=v")))?;
    let value: f64 = value
        .trim()
        .parse()
        .map_err(|e| CliError::usage(format!("parameter `{text}`: {e}")))?;
    Ok((key.trim().to_string(), value))
}

/// Flat `key = value` config file; `#` starts a comment. Keys match the CLI
/// flags; model parameters are written `param.<name>`.
pub fn parse_config_file(path: &Path) -> Result<Overrides, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::usage(format!("cannot read config {}: {e}", path.display())))?;
    let mut o = Overrides::default();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let bad = |msg: String| {
            CliError::usage(format!("{}:{}: {msg}", path.display(), idx + 1))
        };
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| bad("expected `key = value`".into()))?;
        let (key, value) = (key.trim(), value.trim());
        let parse_f64 = || value.parse::<f64>().map_err(|e| bad(format!("{e}")));
        let parse_u64 = || value.parse::<u64>().map_err(|e| bad(format!("{e}")));
        let parse_usize = || value.parse::<usize>().map_err(|e| bad(format!("{e}")));
        let parse_i64 = || value.parse::<i64>().map_err(|e| bad(format!("{e}")));
        match key {
            "model" => o.model = Some(PathBuf::from(value)),
            "preset" => o.preset = Some(value.to_string()),
            "xmax" => o.xmax = Some(parse_i64()?),
            "x0" => o.x0 = Some(parse_x0(value)?),
            "t_final" => o.t_final = Some(parse_f64()?),
            "window" => o.window = Some(parse_f64()?),
            "n_windows" => o.n_windows = Some(parse_usize()?),
            "trajectories" => o.trajectories = Some(parse_usize()?),
            "events" => o.events = Some(parse_u64()?),
            "seed" => o.seed = Some(parse_u64()?),
            "mode" => {
                o.mode = Some(value.parse().map_err(|e: String| bad(e))?);
            }
            "kind" => o.kind = Some(value.to_string()),
            "steps" => o.steps = Some(parse_usize()?),
            "bins" => o.bins = Some(parse_usize()?),
            "jobs" => o.jobs = Some(parse_usize()?),
            "out" => o.out = Some(PathBuf::from(value)),
            other if other.starts_with("param.") => {
                let name = other.trim_start_matches("param.").trim();
                o.params.insert(name.to_string(), parse_f64()?);
            }
            other => return Err(bad(format!("unknown key `{other}`"))),
        }
    }
    Ok(o)
}

/// Fully resolved run settings, echoed to run.json.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub command: String,
    pub model: Option<String>,
    pub preset: Option<String>,
    pub params: BTreeMap<String, f64>,
    pub xmax: i64,
    pub x0: Option<Vec<i64>>,
    pub t_final: f64,
    pub window: f64,
    pub n_windows: usize,
    pub trajectories: usize,
    pub events: Option<u64>,
    pub seed: u64,
    pub mode: SelectionMode,
    pub kind: String,
    pub steps: usize,
    pub bins: usize,
    pub jobs: Option<usize>,
    pub out: Option<PathBuf>,
}

pub struct ResolvedModel {
    pub network: ReactionNetwork,
    pub config: RunConfig,
}

impl ResolvedModel {
    /// Initial composition, required by every command except `inspect`.
    pub fn initial_state(&self) -> Result<&[i64], CliError> {
        self.config.x0.as_deref().ok_or_else(|| {
            CliError::usage("--x0 is required when loading a model from a file")
        })
    }
}

/// Resolve the model source plus every numeric setting. `command` only
/// labels the echoed config.
pub fn resolve(command: &str, o: Overrides) -> Result<ResolvedModel, CliError> {
    let seed = match o.seed {
        Some(s) => s,
        None => match std::env::var("PATHTHERM_SEED") {
            Ok(text) => text
                .parse()
                .map_err(|e| CliError::usage(format!("PATHTHERM_SEED: {e}")))?,
            Err(_) => 0,
        },
    };

    let (network, preset_x0, preset_xmax) = match (&o.model, &o.preset) {
        (Some(path), None) => {
            let text = std::fs::read_to_string(path).map_err(|e| {
                CliError::usage(format!("cannot read model {}: {e}", path.display()))
            })?;
            let net = parse_network(&text).map_err(|e| {
                CliError::usage(format!("{}: {e}", path.display()))
            })?;
            (net, None, None)
        }
        (None, Some(name)) => {
            let model = preset(name, &o.params).map_err(|e| CliError::usage(e.to_string()))?;
            (
                model.network,
                Some(model.initial_state),
                Some(model.xmax),
            )
        }
        (None, None) => {
            return Err(CliError::usage(
                "one of --model <file> or --preset <name> is required",
            ))
        }
        (Some(_), Some(_)) => {
            return Err(CliError::usage("--model and --preset are mutually exclusive"))
        }
    };

    let x0 = o.x0.or(preset_x0);
    let xmax = o.xmax.or(preset_xmax).unwrap_or(200);
    if let Some(ref x0) = x0 {
        if x0.len() != network.dimension() {
            return Err(CliError::usage(format!(
                "x0 has {} entries but the network has {} dynamic species",
                x0.len(),
                network.dimension()
            )));
        }
        if x0.iter().any(|&x| x < 0) {
            return Err(CliError::usage("x0 must be componentwise nonnegative"));
        }
        if x0.iter().any(|&x| x > xmax) {
            return Err(CliError::usage(format!("x0 exceeds --xmax {xmax}")));
        }
    }

    let window = o.window.unwrap_or(1.0);
    let t_final = o.t_final.unwrap_or(100.0);
    let n_windows = o.n_windows.unwrap_or(10_000);
    if !(window > 0.0) || !(t_final > 0.0) {
        return Err(CliError::usage("--window and --t-final must be positive"));
    }
    let trajectories = o.trajectories.unwrap_or(1);
    if trajectories < 1 || n_windows < 1 {
        return Err(CliError::usage("counts must be at least 1"));
    }
    let kind = o.kind.unwrap_or_else(|| "lumped".to_string());
    if kind != "lumped" && kind != "channel" {
        return Err(CliError::usage(format!(
            "unknown kind `{kind}` (lumped|channel)"
        )));
    }

    let config = RunConfig {
        command: command.to_string(),
        model: o.model.map(|p| p.display().to_string()),
        preset: o.preset,
        params: o.params,
        xmax,
        x0,
        t_final,
        window,
        n_windows,
        trajectories,
        events: o.events,
        seed,
        mode: o.mode.unwrap_or(SelectionMode::Direct),
        kind,
        steps: o.steps.unwrap_or(4),
        bins: o.bins.unwrap_or(41),
        jobs: o.jobs,
        out: o.out,
    };
    Ok(ResolvedModel { network, config })
}
