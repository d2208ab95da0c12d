//! Regenerates the golden reference data under tests/golden/ and prints the
//! derived quantities the test suite pins. Run from the crate root:
//!
//! ```text
//! cargo run --release -p paththerm --example generate_golden
//! ```

use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufWriter;
use std::sync::Arc;

use paththerm::cme::{
    build_generator, detailed_balance_residual, gibbs_shannon_entropy,
    mean_entropy_production_rate, relaxation_time_estimate, stationary,
    stationary_power_iteration, StateBox,
};
use paththerm::network::preset;
use paththerm::pathentropy::{channel_entropy_samples, mean, variance};
use paththerm::ssa::{simulate, RngStream, SelectionMode};

fn main() {
    let model = preset("schlogl", &BTreeMap::new()).unwrap();
    let net = &model.network;
    let grouping = net.group_channels();
    let sbox = Arc::new(StateBox::full(vec![0], vec![200]).unwrap());
    let gen = build_generator(net, Arc::clone(&sbox)).unwrap();
    let ps = stationary(&gen).unwrap();

    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/golden/schlogl_pstar_stationary.csv");
    let file = BufWriter::new(File::create(path).unwrap());
    ps.write_csv(file).unwrap();
    println!("wrote {path}");

    let mean_x: f64 = ps
        .probabilities()
        .iter()
        .enumerate()
        .map(|(x, p)| x as f64 * p)
        .sum();
    let sigma_star = mean_entropy_production_rate(net, &gen, &ps).unwrap();
    let entropy = gibbs_shannon_entropy(&ps);
    let residual = detailed_balance_residual(&gen, &ps).unwrap();
    let boundary = gen.boundary_mass(&ps).unwrap();
    let relax = relaxation_time_estimate(&gen, &ps);
    let iterative = stationary_power_iteration(&gen, 1e-13, 20_000_000).unwrap();
    let tv = ps.total_variation(&iterative).unwrap();
    println!("mean X                  = {mean_x}");
    println!("sigma* (mean EP rate)   = {sigma_star:.12e}");
    println!("gibbs-shannon entropy   = {entropy:.12e}");
    println!("detailed balance resid  = {residual:e}");
    println!("boundary mass P(200)    = {boundary:e}");
    println!("relaxation time         = {relax}");
    println!("tv(direct, power iter)  = {tv:e}");
    println!("a_tot at mean           = {}", net.total_propensity(&[mean_x.round() as i64]));

    // Window sizing for the channel-resolved symmetry/mean criterion: the
    // sample mean must resolve sigma* at ~2-3 standard errors with 1e5
    // windows while staying statistically symmetric.
    for window in [0.0005, 0.001, 0.002, 0.005, 0.01] {
        let count = 20_000usize;
        let burn_in = 20.0 * relax;
        let mut rng = RngStream::new(1234, 0);
        let traj = simulate(
            net,
            &grouping,
            &[28],
            burn_in + window * count as f64,
            SelectionMode::TwoStage,
            &mut rng,
        )
        .unwrap();
        let windows = traj.cut_windows(net, burn_in, window, count).unwrap();
        let values: Vec<f64> = channel_entropy_samples(net, &windows, &ps, &ps)
            .unwrap()
            .iter()
            .map(|s| s.value)
            .collect();
        let m = mean(&values);
        let sd = variance(&values).sqrt();
        let sig_at_1e5 = sigma_star * window / (sd / (1e5f64).sqrt());
        println!(
            "window {window}: mean/tau = {:.3}, sd = {sd:.5}, mean-significance at 1e5 = {sig_at_1e5:.2} sigma",
            m / window
        );
    }

    // Driven cycle reference numbers.
    let model = preset("driven_cycle", &BTreeMap::new()).unwrap();
    let sbox = Arc::new(
        StateBox::reachable(&model.network, &[1, 0, 0], vec![0; 3], vec![1; 3]).unwrap(),
    );
    let gen = build_generator(&model.network, sbox).unwrap();
    let ps = stationary(&gen).unwrap();
    let sigma = mean_entropy_production_rate(&model.network, &gen, &ps).unwrap();
    let relax = relaxation_time_estimate(&gen, &ps);
    println!("driven_cycle sigma      = {sigma} (ln8/3 = {})", (8.0f64).ln() / 3.0);
    println!("driven_cycle relaxation = {relax}");
}
