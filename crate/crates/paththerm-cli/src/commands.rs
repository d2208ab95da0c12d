//! The five subcommands. Each writes its primary outputs plus the resolved
//! `run.json` into the output directory; repeated runs with the same config
//! and seed produce byte-identical files.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::Serialize;
use serde_json::json;

use paththerm::cme::{
    build_generator, detailed_balance_residual, gibbs_shannon_entropy,
    mean_entropy_production_rate, relaxation_time_estimate, stationary as solve_stationary,
    CmeError, Distribution, Generator, StateBox,
};
use paththerm::pathentropy::{
    channel_entropy_samples, ft_fit, histogram, lumped_entropy_samples, reversibility_scan,
    symmetry_test, BinPolicy, Histogram, PathEntropyError, StatsError, BOOTSTRAP_RESAMPLES,
};
use paththerm::ssa::{
    occupancy, simulate as run_simulation, simulate_events, write_trajectory_jsonl, RngStream,
    SsaError, Trajectory,
};

use crate::config::{ResolvedModel, RunConfig};
use crate::CliError;

const BOUNDARY_LIMIT: f64 = 1e-10;
const RESIDUAL_LIMIT: f64 = 1e-10;

/// Run `f` inside a worker pool of the requested size.
pub fn with_pool<T>(jobs: Option<usize>, f: impl FnOnce() -> T + Send) -> T
where
    T: Send,
{
    match jobs {
        Some(n) if n >= 1 => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .expect("worker pool")
            .install(f),
        _ => f(),
    }
}

fn numerical(e: CmeError) -> CliError {
    CliError::numerical(e.to_string())
}

fn ssa_error(e: SsaError) -> CliError {
    CliError::numerical(e.to_string())
}

fn entropy_error(e: PathEntropyError) -> CliError {
    match e {
        PathEntropyError::Network(_) => CliError::usage(e.to_string()),
        _ => CliError::numerical(e.to_string()),
    }
}

fn stats_error(e: StatsError) -> CliError {
    match e {
        StatsError::TooFewSamples { .. } | StatsError::EmptyInput => {
            CliError::usage(e.to_string())
        }
        _ => CliError::numerical(e.to_string()),
    }
}

fn prepare_out(config: &RunConfig) -> Result<PathBuf, CliError> {
    let out = config
        .out
        .clone()
        .ok_or_else(|| CliError::usage("--out <dir> is required for this command"))?;
    std::fs::create_dir_all(&out)
        .map_err(|e| CliError::usage(format!("cannot create {}: {e}", out.display())))?;
    write_json(&out.join("run.json"), config)?;
    Ok(out)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut file = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut file, value)
        .map_err(|e| CliError::usage(format!("cannot write {}: {e}", path.display())))?;
    file.write_all(b"\n")?;
    Ok(())
}

fn reachable_box(resolved: &ResolvedModel) -> Result<Arc<StateBox>, CliError> {
    let dim = resolved.network.dimension();
    StateBox::reachable(
        &resolved.network,
        resolved.initial_state()?,
        vec![0; dim],
        vec![resolved.config.xmax; dim],
    )
    .map(Arc::new)
    .map_err(numerical)
}

struct Solved {
    sbox: Arc<StateBox>,
    gen: Generator,
    ps: Distribution,
    boundary_mass: f64,
}

/// Assemble the generator and solve for the stationary distribution;
/// `enforce_boundary` aborts when the truncation is visibly too small.
fn solve(resolved: &ResolvedModel, enforce_boundary: bool) -> Result<Solved, CliError> {
    let sbox = reachable_box(resolved)?;
    let gen = build_generator(&resolved.network, Arc::clone(&sbox)).map_err(numerical)?;
    let ps = solve_stationary(&gen).map_err(numerical)?;
    let boundary_mass = gen.boundary_mass(&ps).map_err(numerical)?;
    if enforce_boundary && boundary_mass >= BOUNDARY_LIMIT {
        return Err(numerical(CmeError::TruncationTooSmall {
            mass: boundary_mass,
            limit: BOUNDARY_LIMIT,
        }));
    }
    Ok(Solved {
        sbox,
        gen,
        ps,
        boundary_mass,
    })
}

pub fn inspect(resolved: ResolvedModel, require_simple: bool) -> Result<(), CliError> {
    let net = &resolved.network;
    let grouping = net.group_channels();
    println!(
        "{} dynamic species, {} reactions, {} jump-vector groups",
        net.dimension(),
        net.num_reactions(),
        grouping.num_groups()
    );
    for (g, (jump, members)) in grouping.groups().iter().enumerate() {
        let labels: Vec<String> = members
            .iter()
            .map(|&r| format!("{r}: {}", net.format_reaction(r)))
            .collect();
        let tag = if members.len() > 1 { "  [shared]" } else { "" };
        println!("group {g} jump {jump:?} <- {{{}}}{tag}", labels.join("; "));
    }
    let verdict = if grouping.is_multigraph() {
        "multigraph: several elementary channels share a jump vector"
    } else {
        "simple: every jump vector identifies its channel"
    };
    println!("{verdict}");
    if let Some(out) = resolved.config.out.clone() {
        std::fs::create_dir_all(&out)
            .map_err(|e| CliError::usage(format!("cannot create {}: {e}", out.display())))?;
        write_json(&out.join("run.json"), &resolved.config)?;
        let groups: Vec<_> = grouping
            .groups()
            .iter()
            .map(|(jump, members)| json!({"jump": jump, "reactions": members}))
            .collect();
        write_json(
            &out.join("inspect_report.json"),
            &json!({
                "multigraph": grouping.is_multigraph(),
                "groups": groups,
            }),
        )?;
    }
    if require_simple && grouping.is_multigraph() {
        return Err(CliError::check(
            "network is a multigraph (--require-simple)",
        ));
    }
    Ok(())
}

pub fn stationary(resolved: &ResolvedModel, check: bool) -> Result<(), CliError> {
    let out = prepare_out(&resolved.config)?;
    let solved = solve(resolved, true)?;
    let net = &resolved.network;

    let residual = detailed_balance_residual(&solved.gen, &solved.ps).map_err(numerical)?;
    let scheme1 = paththerm::cme::require_scheme1(net).is_ok();
    let entropy = gibbs_shannon_entropy(&solved.ps);
    let relaxation = relaxation_time_estimate(&solved.gen, &solved.ps);
    let (ep_rate, ep_note) = match mean_entropy_production_rate(net, &solved.gen, &solved.ps) {
        Ok(v) => (Some(v), None),
        Err(e) => (None, Some(e.to_string())),
    };

    let csv_path = out.join("distribution.csv");
    let mut csv = BufWriter::new(File::create(&csv_path)?);
    solved.ps.write_csv(&mut csv)?;

    let balanced = residual <= RESIDUAL_LIMIT;
    write_json(
        &out.join("stationary_report.json"),
        &json!({
            "states": solved.sbox.len(),
            "detailed_balance_residual": residual,
            "detailed_balance": if balanced { "satisfied" } else { "violated" },
            "scheme1_class": scheme1,
            "boundary_mass": solved.boundary_mass,
            "gibbs_shannon_entropy": entropy,
            "mean_entropy_production_rate": ep_rate,
            "entropy_production_note": ep_note,
            "relaxation_time_estimate": relaxation,
        }),
    )?;

    println!(
        "stationary solve over {} states: residual {residual:.3e} ({}), boundary mass {:.3e}",
        solved.sbox.len(),
        if balanced {
            "detailed balance satisfied"
        } else {
            "detailed balance violated"
        },
        solved.boundary_mass
    );
    println!(
        "gibbs-shannon entropy {entropy:.6}, mean entropy production rate {}",
        ep_rate.map_or("n/a".to_string(), |v| format!("{v:.6}")),
    );
    println!("wrote {}", csv_path.display());
    if check && !balanced {
        return Err(CliError::check(format!(
            "detailed-balance residual {residual:e} exceeds {RESIDUAL_LIMIT:e}"
        )));
    }
    Ok(())
}

pub fn simulate(resolved: &ResolvedModel, compare_cme: bool) -> Result<(), CliError> {
    let out = prepare_out(&resolved.config)?;
    let net = &resolved.network;
    let config = &resolved.config;
    let grouping = net.group_channels();

    let x0 = resolved.initial_state()?;
    let trajectories: Vec<Trajectory> = (0..config.trajectories)
        .map(|stream| {
            let mut rng = RngStream::new(config.seed, stream as u64);
            match config.events {
                Some(budget) => {
                    simulate_events(net, &grouping, x0, budget, config.mode, &mut rng)
                }
                None => {
                    run_simulation(net, &grouping, x0, config.t_final, config.mode, &mut rng)
                }
            }
            .map_err(ssa_error)
        })
        .collect::<Result<_, _>>()?;

    for (stream, traj) in trajectories.iter().enumerate() {
        let path = out.join(format!("trajectory_{stream:03}.jsonl"));
        let mut file = BufWriter::new(File::create(&path)?);
        write_trajectory_jsonl(&mut file, net, traj, config.seed, stream as u64)
            .map_err(ssa_error)?;
    }

    // Occupancy histogram of the first trajectory over the truncation box.
    let sbox = reachable_box(resolved)?;
    let lead = &trajectories[0];
    let (reference, burn_in, tv) = if compare_cme {
        let solved = solve(resolved, true)?;
        let burn_in = (20.0 * relaxation_time_estimate(&solved.gen, &solved.ps))
            .min(lead.t_final() * 0.5);
        let tv = paththerm::ssa::occupancy_tv_distance(net, lead, &solved.ps, burn_in)
            .map_err(ssa_error)?;
        (Some(solved), burn_in, Some(tv))
    } else {
        (None, 0.0, None)
    };
    let (weights, outside) = occupancy(net, lead, &sbox, burn_in).map_err(ssa_error)?;
    let hist_path = out.join("histogram.csv");
    let mut csv = BufWriter::new(File::create(&hist_path)?);
    let header: Vec<String> = (1..=sbox.dim()).map(|i| format!("x{i}")).collect();
    writeln!(csv, "{},occupancy", header.join(","))?;
    for (i, state) in sbox.iter().enumerate() {
        let coords: Vec<String> = state.iter().map(|x| x.to_string()).collect();
        writeln!(csv, "{},{:e}", coords.join(","), weights[i])?;
    }

    let absorbed: Vec<usize> = trajectories
        .iter()
        .enumerate()
        .filter(|(_, t)| t.is_absorbed())
        .map(|(i, _)| i)
        .collect();
    write_json(
        &out.join("simulate_report.json"),
        &json!({
            "trajectories": config.trajectories,
            "events": trajectories.iter().map(|t| t.num_events()).collect::<Vec<_>>(),
            "t_final": trajectories.iter().map(|t| t.t_final()).collect::<Vec<_>>(),
            "absorbed": absorbed,
            "occupancy_outside_box": outside,
            "tv_distance_vs_cme": tv,
            "burn_in": burn_in,
        }),
    )?;

    for (i, traj) in trajectories.iter().enumerate() {
        println!(
            "trajectory {i}: {} events to t = {:.6}{}",
            traj.num_events(),
            traj.t_final(),
            if traj.is_absorbed() { " (absorbed)" } else { "" }
        );
    }
    if let Some(tv) = tv {
        println!(
            "occupancy vs master-equation stationary: tv distance {tv:.5} (after burn-in {burn_in:.3})"
        );
    }
    let _ = reference;
    println!("wrote {}", hist_path.display());
    Ok(())
}

#[derive(Serialize)]
struct FtReport {
    kind: String,
    n_samples: usize,
    slope: Option<f64>,
    slope_ci: Option<(f64, f64)>,
    ks_stat: f64,
    p_value: f64,
    symmetry_rejected: bool,
    degenerate: bool,
    note: Option<String>,
    window: f64,
    mean_rate: f64,
    mean_rate_stderr: f64,
    sigma_star: Option<f64>,
    histogram: HistogramReport,
}

#[derive(Serialize)]
struct HistogramReport {
    edges: Vec<f64>,
    counts: Vec<u64>,
}

impl From<&Histogram> for HistogramReport {
    fn from(h: &Histogram) -> Self {
        let edges = (0..=h.num_bins()).map(|k| h.left + h.width * k as f64).collect();
        HistogramReport {
            edges,
            counts: h.counts.clone(),
        }
    }
}

pub fn ft(resolved: &ResolvedModel) -> Result<(), CliError> {
    let out = prepare_out(&resolved.config)?;
    let net = &resolved.network;
    let config = &resolved.config;
    let grouping = net.group_channels();
    let solved = solve(resolved, true)?;

    let relaxation = relaxation_time_estimate(&solved.gen, &solved.ps);
    let burn_in = 20.0 * relaxation;
    let horizon = burn_in + config.window * config.n_windows as f64;
    let mut rng = RngStream::new(config.seed, 0);
    let trajectory = run_simulation(
        net,
        &grouping,
        resolved.initial_state()?,
        horizon,
        config.mode,
        &mut rng,
    )
    .map_err(ssa_error)?;
    if trajectory.is_absorbed() {
        return Err(CliError::numerical(
            "trajectory absorbed before the sampling horizon",
        ));
    }
    let windows = trajectory
        .cut_windows(net, burn_in, config.window, config.n_windows)
        .map_err(ssa_error)?;
    let samples: Vec<f64> = match config.kind.as_str() {
        "channel" => channel_entropy_samples(net, &windows, &solved.ps, &solved.ps),
        _ => lumped_entropy_samples(net, &grouping, &windows, &solved.ps, &solved.ps),
    }
    .map_err(entropy_error)?
    .iter()
    .map(|z| z.value)
    .collect();

    let degenerate = samples.iter().all(|z| z.abs() <= 1e-12);
    let symmetry = symmetry_test(&samples).map_err(stats_error)?;
    let (slope, slope_ci, note) = if degenerate {
        (
            None,
            None,
            Some(
                "all samples are zero to 1e-12: the lumped functional vanishes identically \
                 at stationarity for this network class, so there is no ratio to fit"
                    .to_string(),
            ),
        )
    } else {
        match ft_fit(&samples, config.bins, BOOTSTRAP_RESAMPLES, config.seed) {
            Ok(fit) => (Some(fit.slope), Some(fit.slope_ci), None),
            Err(e @ StatsError::TooFewBinPairs(_)) | Err(e @ StatsError::DegenerateSamples) => {
                (None, None, Some(e.to_string()))
            }
            Err(e) => return Err(stats_error(e)),
        }
    };

    let sigma_star = mean_entropy_production_rate(net, &solved.gen, &solved.ps).ok();
    let mean_rate = paththerm::pathentropy::mean(&samples) / config.window;
    let mean_rate_stderr = (paththerm::pathentropy::variance(&samples)
        / samples.len() as f64)
        .sqrt()
        / config.window;

    let hist = histogram(&samples, BinPolicy::FreedmanDiaconis).map_err(stats_error)?;
    let hist_path = out.join("zhist.csv");
    let mut csv = BufWriter::new(File::create(&hist_path)?);
    hist.write_csv(&mut csv)?;

    let report = FtReport {
        kind: config.kind.clone(),
        n_samples: samples.len(),
        slope,
        slope_ci,
        ks_stat: symmetry.statistic,
        p_value: symmetry.p_value,
        symmetry_rejected: symmetry.rejects_symmetry(),
        degenerate,
        note,
        window: config.window,
        mean_rate,
        mean_rate_stderr,
        sigma_star,
        histogram: HistogramReport::from(&hist),
    };
    write_json(&out.join("ft_report.json"), &report)?;

    println!(
        "{} samples of the {} functional over windows of {}",
        report.n_samples, report.kind, config.window
    );
    match (report.slope, report.slope_ci) {
        (Some(s), Some((lo, hi))) => {
            println!("fluctuation-theorem slope {s:.4}, 99% CI [{lo:.4}, {hi:.4}]")
        }
        _ => println!(
            "fluctuation-theorem fit not available: {}",
            report.note.as_deref().unwrap_or("")
        ),
    }
    println!(
        "symmetry test: D = {:.5}, p = {:.4} ({})",
        report.ks_stat,
        report.p_value,
        if report.symmetry_rejected {
            "symmetry rejected"
        } else {
            "symmetry not rejected"
        }
    );
    println!(
        "mean rate {mean_rate:.4} +/- {mean_rate_stderr:.4}{}",
        sigma_star.map_or(String::new(), |s| format!(" (ensemble rate {s:.4})"))
    );
    Ok(())
}

pub fn reversibility(resolved: &ResolvedModel) -> Result<(), CliError> {
    let out = prepare_out(&resolved.config)?;
    let config = &resolved.config;
    if config.steps > 6 {
        return Err(CliError::usage("--steps must be at most 6"));
    }
    let solved = solve(resolved, false)?;
    if solved.sbox.len() > 10_000 {
        return Err(CliError::usage(format!(
            "state box has {} states; reversibility enumeration is limited to 10000",
            solved.sbox.len()
        )));
    }
    let dt = config.window / config.steps.max(1) as f64;
    let scan = reversibility_scan(&solved.gen, &solved.ps, dt, config.steps, 2_000_000_000)
        .map_err(entropy_error)?;
    let reversible = scan.max_gap <= RESIDUAL_LIMIT;
    write_json(
        &out.join("reversibility_report.json"),
        &json!({
            "states": solved.sbox.len(),
            "steps": config.steps,
            "dt": dt,
            "n_paths": scan.n_paths,
            "max_gap": scan.max_gap,
            "reversible": reversible,
        }),
    )?;
    println!(
        "enumerated {} paths of {} steps (dt = {dt}): max |forward - reverse| log-probability gap {:.3e}",
        scan.n_paths, config.steps, scan.max_gap
    );
    println!(
        "{}",
        if reversible {
            "stationary paths are reversible within 1e-10"
        } else {
            "stationary paths are NOT reversible"
        }
    );
    Ok(())
}
