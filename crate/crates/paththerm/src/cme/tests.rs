use std::collections::BTreeMap;
use std::sync::Arc;

use proptest::prelude::*;

use super::*;
use crate::network::{parse_network, preset};

fn params(pairs: &[(&str, f64)]) -> BTreeMap<String, f64> {
    pairs.iter().map(|&(k, v)| (k.to_string(), v)).collect()
}

/// Oracle: truncated Poisson(mean) on 0..=xmax, by direct term evaluation.
fn truncated_poisson(mean: f64, xmax: i64) -> Vec<f64> {
    let mut terms = Vec::with_capacity(xmax as usize + 1);
    let mut t = 1.0f64;
    terms.push(t);
    for x in 1..=xmax {
        t *= mean / x as f64;
        terms.push(t);
    }
    let total: f64 = terms.iter().sum();
    terms.into_iter().map(|v| v / total).collect()
}

/// Oracle: three-state unicycle stationary weights by the Markov tree
/// theorem, plus the cycle current and affinity. Rates: forward a1 (x->y),
/// a2 (y->z), a3 (z->x); backward b1 (y->x), b2 (z->y), b3 (x->z).
struct CycleOracle {
    pi: [f64; 3],
    current: f64,
    affinity: f64,
}

fn cycle_oracle(a: [f64; 3], b: [f64; 3]) -> CycleOracle {
    let wx = a[1] * a[2] + b[0] * a[2] + b[0] * b[1];
    let wy = a[2] * a[0] + b[1] * a[0] + b[1] * b[2];
    let wz = a[0] * a[1] + b[2] * a[1] + b[2] * b[0];
    let total = wx + wy + wz;
    let pi = [wx / total, wy / total, wz / total];
    let current = pi[0] * a[0] - pi[1] * b[0];
    let affinity = (a[0] * a[1] * a[2] / (b[0] * b[1] * b[2])).ln();
    CycleOracle {
        pi,
        current,
        affinity,
    }
}

fn birth_death_generator(kf: f64, kb: f64, a: u64, xmax: i64) -> (crate::network::ReactionNetwork, Generator) {
    let model = preset(
        "birth_death",
        &params(&[("kf", kf), ("kb", kb), ("a", a as f64)]),
    )
    .unwrap();
    let sbox = Arc::new(StateBox::full(vec![0], vec![xmax]).unwrap());
    let gen = build_generator(&model.network, sbox).unwrap();
    (model.network, gen)
}

#[test]
fn full_box_enumeration_is_lexicographic_and_bijective() {
    let sbox = StateBox::full(vec![0, 0], vec![2, 1]).unwrap();
    assert_eq!(sbox.len(), 6);
    let states: Vec<Vec<i64>> = sbox.iter().map(|s| s.to_vec()).collect();
    assert_eq!(
        states,
        vec![
            vec![0, 0],
            vec![0, 1],
            vec![1, 0],
            vec![1, 1],
            vec![2, 0],
            vec![2, 1]
        ]
    );
    for (i, s) in sbox.iter().enumerate() {
        assert_eq!(sbox.index_of(s), Some(i));
    }
    assert_eq!(sbox.index_of(&[3, 0]), None);
}

#[test]
fn box_cap_is_enforced() {
    assert!(matches!(
        StateBox::full(vec![0, 0], vec![2000, 2000]),
        Err(CmeError::BoxTooLarge { .. })
    ));
}

#[test]
fn reachable_box_respects_conserved_totals() {
    let model = preset("xy_pair", &BTreeMap::new()).unwrap();
    let sbox =
        StateBox::reachable(&model.network, &[2, 3], vec![0, 0], vec![5, 5]).unwrap();
    // X + Y = 5 is conserved: exactly the six states on that diagonal.
    assert_eq!(sbox.len(), 6);
    for s in sbox.iter() {
        assert_eq!(s[0] + s[1], 5);
    }

    let model = preset("driven_cycle", &BTreeMap::new()).unwrap();
    let sbox =
        StateBox::reachable(&model.network, &[1, 0, 0], vec![0, 0, 0], vec![1, 1, 1]).unwrap();
    assert_eq!(sbox.len(), 3);
}

#[test]
fn birth_death_generator_is_tridiagonal() {
    let (_, gen) = birth_death_generator(1.0, 1.0, 10, 5);
    assert_eq!(gen.num_states(), 6);
    for from in 0..6usize {
        let row = gen.lumped_row(from);
        let expected: Vec<usize> = [from.checked_sub(1), Some(from + 1)]
            .into_iter()
            .flatten()
            .filter(|&t| t < 6)
            .collect();
        let got: Vec<usize> = row.iter().map(|&(t, _)| t as usize).collect();
        let mut expected_sorted = expected.clone();
        expected_sorted.sort_unstable();
        assert_eq!(got, expected_sorted, "row {from}");
        assert_eq!(gen.lumped_rate(from, from + 1), 10.0 * f64::from(from != 5));
        if from > 0 {
            assert_eq!(gen.lumped_rate(from, from - 1), from as f64);
        }
    }
    // Only the top state loses its birth transition to the truncation.
    assert_eq!(
        gen.truncated_states(),
        &[false, false, false, false, false, true]
    );
}

#[test]
fn empty_network_builds_zero_generator() {
    let net = parse_network("species X").unwrap();
    let sbox = Arc::new(StateBox::full(vec![0], vec![3]).unwrap());
    let gen = build_generator(&net, sbox).unwrap();
    assert_eq!(gen.max_outflow(), 0.0);
    for from in 0..4 {
        assert!(gen.lumped_row(from).is_empty());
        assert_eq!(gen.outflow(from), 0.0);
    }
}

#[test]
fn generator_columns_sum_to_zero() {
    for name in ["schlogl", "birth_death", "xy_pair", "driven_cycle"] {
        let model = preset(name, &BTreeMap::new()).unwrap();
        let net = &model.network;
        let sbox = Arc::new(
            StateBox::reachable(
                net,
                &model.initial_state,
                vec![0; net.dimension()],
                vec![model.xmax.min(30); net.dimension()],
            )
            .unwrap(),
        );
        let gen = build_generator(net, sbox).unwrap();
        for from in 0..gen.num_states() {
            let out: f64 = gen.lumped_row(from).iter().map(|&(_, r)| r).sum();
            let residual = (out - gen.outflow(from)).abs();
            assert!(
                residual <= 1e-12 * gen.max_outflow().max(1.0),
                "{name}: column {from} sums to {residual:e}"
            );
        }
    }
}

#[test]
fn stationary_matches_truncated_poisson() {
    // Constant birth c = kf * a = 7, linear death d = kb = 1 per copy.
    let (_, gen) = birth_death_generator(0.7, 1.0, 10, 50);
    let dist = stationary(&gen).unwrap();
    let oracle = truncated_poisson(7.0, 50);
    let tv: f64 = dist
        .probabilities()
        .iter()
        .zip(&oracle)
        .map(|(a, b)| (a - b).abs())
        .sum::<f64>()
        * 0.5;
    assert!(tv <= 1e-12, "tv = {tv:e}");
}

#[test]
fn stationary_ratio_matches_equilibrium_product() {
    let (_, gen) = birth_death_generator(2.0, 1.0, 5, 40);
    let dist = stationary(&gen).unwrap();
    let p = dist.probabilities();
    for x in 0..40usize {
        let got = p[x + 1] / p[x];
        let expected = 10.0 / (x as f64 + 1.0);
        assert!(
            (got / expected - 1.0).abs() < 1e-12,
            "ratio at {x}: {got} vs {expected}"
        );
    }
}

#[test]
fn stationary_agrees_with_power_iteration() {
    let model = preset("schlogl", &BTreeMap::new()).unwrap();
    let sbox = Arc::new(StateBox::full(vec![0], vec![120]).unwrap());
    let gen = build_generator(&model.network, sbox).unwrap();
    let direct = stationary(&gen).unwrap();
    let iterative = stationary_power_iteration(&gen, 1e-13, 10_000_000).unwrap();
    let tv = direct.total_variation(&iterative).unwrap();
    assert!(tv <= 1e-8, "tv = {tv:e}");
}

#[test]
fn stationary_rejects_reducible_chains() {
    let net = parse_network("species X\nreaction X -> 0 : 1.0").unwrap();
    let sbox = Arc::new(StateBox::full(vec![0], vec![5]).unwrap());
    let gen = build_generator(&net, sbox).unwrap();
    assert!(matches!(stationary(&gen), Err(CmeError::Reducible)));
}

#[test]
fn boundary_mass_tracks_truncated_states() {
    let (_, gen) = birth_death_generator(1.0, 1.0, 10, 60);
    let dist = stationary(&gen).unwrap();
    let mass = gen.boundary_mass(&dist).unwrap();
    assert_eq!(mass, dist.prob(60));
    assert!(mass < 1e-10);
}

#[test]
fn detailed_balance_holds_for_birth_death_class() {
    let (_, gen) = birth_death_generator(1.3, 0.9, 12, 80);
    let dist = stationary(&gen).unwrap();
    let residual = detailed_balance_residual(&gen, &dist).unwrap();
    assert!(residual <= 1e-12, "residual = {residual:e}");

    let model = preset("schlogl", &BTreeMap::new()).unwrap();
    let sbox = Arc::new(StateBox::full(vec![0], vec![120]).unwrap());
    let gen = build_generator(&model.network, sbox).unwrap();
    let dist = stationary(&gen).unwrap();
    let residual = detailed_balance_residual(&gen, &dist).unwrap();
    assert!(residual <= 1e-10, "residual = {residual:e}");
}

#[test]
fn detailed_balance_fails_for_driven_cycle() {
    let model = preset("driven_cycle", &BTreeMap::new()).unwrap();
    let sbox = Arc::new(
        StateBox::reachable(&model.network, &[1, 0, 0], vec![0, 0, 0], vec![1, 1, 1]).unwrap(),
    );
    let gen = build_generator(&model.network, sbox).unwrap();
    let dist = stationary(&gen).unwrap();
    let residual = detailed_balance_residual(&gen, &dist).unwrap();
    // Oracle: all forward rates 2, backward 1, uniform stationary state, so
    // every pair has |2-1|/2 = 0.5 relative imbalance.
    assert!((residual - 0.5).abs() < 1e-12, "residual = {residual}");
    assert!(residual > 1e-3);
}

#[test]
fn single_state_box_has_zero_residual() {
    let net = parse_network("species X\nreaction 0 -> X : 1.0\nreaction X -> 0 : 1.0").unwrap();
    let sbox = Arc::new(StateBox::full(vec![0], vec![0]).unwrap());
    let gen = build_generator(&net, sbox.clone()).unwrap();
    let dist = Distribution::delta(sbox, &[0]).unwrap();
    assert_eq!(detailed_balance_residual(&gen, &dist).unwrap(), 0.0);
}

#[test]
fn scheme1_class_check() {
    let model = preset("schlogl", &BTreeMap::new()).unwrap();
    assert!(require_scheme1(&model.network).is_ok());
    let model = preset("driven_cycle", &BTreeMap::new()).unwrap();
    assert!(matches!(
        require_scheme1(&model.network),
        Err(CmeError::NotScheme1)
    ));
}

#[test]
fn driven_cycle_stationary_matches_tree_theorem() {
    let a = [2.0, 1.5, 3.0];
    let b = [0.5, 1.0, 0.8];
    let model = preset(
        "driven_cycle",
        &params(&[
            ("kxy", a[0]),
            ("kyz", a[1]),
            ("kzx", a[2]),
            ("kyx", b[0]),
            ("kzy", b[1]),
            ("kxz", b[2]),
        ]),
    )
    .unwrap();
    let sbox = Arc::new(
        StateBox::reachable(&model.network, &[1, 0, 0], vec![0, 0, 0], vec![1, 1, 1]).unwrap(),
    );
    let gen = build_generator(&model.network, sbox.clone()).unwrap();
    let dist = stationary(&gen).unwrap();
    let oracle = cycle_oracle(a, b);
    // Box states sorted lexicographically: (0,0,1)=z, (0,1,0)=y, (1,0,0)=x.
    let ix = sbox.index_of(&[1, 0, 0]).unwrap();
    let iy = sbox.index_of(&[0, 1, 0]).unwrap();
    let iz = sbox.index_of(&[0, 0, 1]).unwrap();
    assert!((dist.prob(ix) - oracle.pi[0]).abs() < 1e-14);
    assert!((dist.prob(iy) - oracle.pi[1]).abs() < 1e-14);
    assert!((dist.prob(iz) - oracle.pi[2]).abs() < 1e-14);

    let ep = mean_entropy_production_rate(&model.network, &gen, &dist).unwrap();
    let expected = oracle.current * oracle.affinity;
    assert!(
        (ep / expected - 1.0).abs() < 1e-10,
        "ep = {ep}, oracle = {expected}"
    );
}

#[test]
fn equilibrium_birth_death_has_zero_entropy_production() {
    let (net, gen) = birth_death_generator(1.0, 1.0, 10, 60);
    let dist = stationary(&gen).unwrap();
    let ep = mean_entropy_production_rate(&net, &gen, &dist).unwrap();
    assert!(ep.abs() <= 1e-12, "ep = {ep:e}");
}

#[test]
fn entropy_production_requires_pairing_and_reversibility() {
    // No pairing declared.
    let net = parse_network("species X\nreaction 0 -> X : 1.0\nreaction X -> 0 : 1.0").unwrap();
    let sbox = Arc::new(StateBox::full(vec![0], vec![5]).unwrap());
    let gen = build_generator(&net, sbox.clone()).unwrap();
    let dist = stationary(&gen).unwrap();
    assert!(matches!(
        mean_entropy_production_rate(&net, &gen, &dist),
        Err(CmeError::NoPairing)
    ));

    // Paired, but the declared reverse has zero rate where the forward fires:
    // birth 0 -> X against death 2X -> X, which cannot fire at X = 1.
    let net = parse_network(
        "species X\nreaction 0 -> X : 1.0\nreaction 2 X -> X : 1.0\npair 0 1",
    )
    .unwrap();
    let gen = build_generator(&net, sbox.clone()).unwrap();
    let dist = Distribution::uniform(sbox);
    assert!(matches!(
        mean_entropy_production_rate(&net, &gen, &dist),
        Err(CmeError::IrreversibleChannel { .. })
    ));
}

#[test]
fn transient_at_zero_returns_initial_condition() {
    let (_, gen) = birth_death_generator(1.0, 1.0, 10, 20);
    let p0 = Distribution::delta(Arc::clone(gen.state_box()), &[3]).unwrap();
    let p = transient(&gen, &p0, 0.0).unwrap();
    assert_eq!(p.probabilities(), p0.probabilities());
    assert!(matches!(
        transient(&gen, &p0, -1.0),
        Err(CmeError::NegativeTime(_))
    ));
}

#[test]
fn transient_matches_two_state_closed_form() {
    // 0 <-> 1 with birth a (only from 0, clipped above) and death b.
    let (a, b) = (0.7, 1.3);
    let net = parse_network(&format!(
        "species X\nreaction 0 -> X : {a}\nreaction X -> 0 : {b}"
    ))
    .unwrap();
    let sbox = Arc::new(StateBox::full(vec![0], vec![1]).unwrap());
    let gen = build_generator(&net, sbox.clone()).unwrap();
    let p0 = Distribution::delta(sbox, &[0]).unwrap();
    for &t in &[0.1, 0.5, 2.0, 10.0] {
        let p = transient(&gen, &p0, t).unwrap();
        let p1_exact = a / (a + b) * (1.0 - (-(a + b) * t).exp());
        assert!(
            (p.prob(1) - p1_exact).abs() < 1e-12,
            "t = {t}: {} vs {p1_exact}",
            p.prob(1)
        );
    }
}

#[test]
fn transient_converges_to_stationary() {
    let (_, gen) = birth_death_generator(1.0, 1.0, 10, 40);
    let p0 = Distribution::delta(Arc::clone(gen.state_box()), &[0]).unwrap();
    let ps = stationary(&gen).unwrap();
    // Relaxation time of the linear death chain is 1/kb = 1.
    let p = transient(&gen, &p0, 50.0).unwrap();
    let tv = p.total_variation(&ps).unwrap();
    assert!(tv <= 1e-8, "tv = {tv:e}");
}

#[test]
fn transient_semigroup_property() {
    let (_, gen) = birth_death_generator(1.0, 1.0, 10, 30);
    let p0 = Distribution::delta(Arc::clone(gen.state_box()), &[25]).unwrap();
    let (s, t) = (0.4, 1.3);
    let direct = transient(&gen, &p0, s + t).unwrap();
    let composed = transient(&gen, &transient(&gen, &p0, s).unwrap(), t).unwrap();
    let tv = direct.total_variation(&composed).unwrap();
    assert!(tv <= 1e-10, "tv = {tv:e}");
}

#[test]
fn relaxation_estimate_recovers_two_state_rate() {
    let (a, b) = (0.7, 1.3);
    let net = parse_network(&format!(
        "species X\nreaction 0 -> X : {a}\nreaction X -> 0 : {b}"
    ))
    .unwrap();
    let sbox = Arc::new(StateBox::full(vec![0], vec![1]).unwrap());
    let gen = build_generator(&net, sbox).unwrap();
    let ps = stationary(&gen).unwrap();
    let tau = relaxation_time_estimate(&gen, &ps);
    let exact = 1.0 / (a + b);
    assert!(
        tau > 0.5 * exact && tau < 2.0 * exact,
        "tau = {tau}, exact = {exact}"
    );
}

#[test]
fn conditional_matrix_at_zero_is_identity() {
    let (_, gen) = birth_death_generator(1.0, 1.0, 10, 10);
    let cond = conditional_matrix(&gen, 0.0).unwrap();
    for from in 0..cond.len() {
        for to in 0..cond.len() {
            assert_eq!(cond.prob(to, from), f64::from(to == from));
        }
    }
}

#[test]
fn conditional_matrix_columns_are_stochastic() {
    let (_, gen) = birth_death_generator(1.0, 1.0, 10, 25);
    let cond = conditional_matrix(&gen, 1.0).unwrap();
    for from in 0..cond.len() {
        let total: f64 = cond.column(from).iter().sum();
        assert!((total - 1.0).abs() <= 1e-12, "column {from}: {total}");
        assert!(cond.column(from).iter().all(|&p| p >= 0.0));
    }
}

#[test]
fn conditional_matrix_short_time_matches_rates() {
    let (_, gen) = birth_death_generator(1.0, 1.0, 10, 25);
    let dt = 1e-4 / gen.max_outflow();
    let cond = conditional_matrix(&gen, dt).unwrap();
    for from in 0..cond.len() {
        for &(to, rate) in gen.lumped_row(from) {
            let estimated = cond.prob(to as usize, from) / dt;
            assert!(
                (estimated / rate - 1.0).abs() < 0.01,
                "from {from} to {to}: {estimated} vs {rate}"
            );
        }
    }
}

#[test]
fn conditional_matrix_error_is_first_order_in_dt() {
    let (_, gen) = birth_death_generator(1.0, 1.0, 10, 15);
    let base = 0.02;
    let err_at = |dt: f64| {
        let cond = conditional_matrix(&gen, dt).unwrap();
        let mut worst = 0.0f64;
        for from in 0..cond.len() {
            for &(to, rate) in gen.lumped_row(from) {
                let rel = (cond.prob(to as usize, from) / dt / rate - 1.0).abs();
                worst = worst.max(rel);
            }
        }
        worst
    };
    let (e1, e2, e4) = (err_at(base), err_at(base / 2.0), err_at(base / 4.0));
    assert!(e2 / e1 > 0.3 && e2 / e1 < 0.7, "e2/e1 = {}", e2 / e1);
    assert!(e4 / e2 > 0.3 && e4 / e2 < 0.7, "e4/e2 = {}", e4 / e2);
}

#[test]
fn gibbs_shannon_entropy_closed_forms() {
    let sbox = Arc::new(StateBox::full(vec![0], vec![7]).unwrap());
    let delta = Distribution::delta(sbox.clone(), &[3]).unwrap();
    assert_eq!(gibbs_shannon_entropy(&delta), 0.0);
    let uniform = Distribution::uniform(sbox);
    assert!((gibbs_shannon_entropy(&uniform) - (8.0f64).ln()).abs() < 1e-14);
}

#[test]
fn distribution_validates_and_round_trips_csv() {
    let sbox = Arc::new(StateBox::full(vec![0], vec![3]).unwrap());
    assert!(matches!(
        Distribution::new(sbox.clone(), vec![0.5, 0.5, 0.1, 0.0]),
        Err(CmeError::NotNormalized(_))
    ));
    assert!(matches!(
        Distribution::new(sbox.clone(), vec![-0.1, 0.6, 0.5, 0.0]),
        Err(CmeError::NegativeProbability(0))
    ));
    let dist = Distribution::new(sbox.clone(), vec![0.1, 0.2, 0.3, 0.4]).unwrap();
    let mut buffer = Vec::new();
    dist.write_csv(&mut buffer).unwrap();
    let text = String::from_utf8(buffer).unwrap();
    assert!(text.starts_with("x1,probability\n"));
    let reread = Distribution::read_csv(sbox, text.as_bytes()).unwrap();
    assert_eq!(dist.probabilities(), reread.probabilities());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    /// Any one-species +/-1 network satisfies detailed balance at
    /// stationarity, whatever the (positive) rates.
    #[test]
    fn scheme1_networks_are_detailed_balanced(
        kf1 in 0.2f64..3.0, kb1 in 0.2f64..3.0,
        kf2 in 0.002f64..0.05, kb2 in 0.02f64..0.4,
    ) {
        let model = preset(
            "scheme1",
            &params(&[("r", 2.0), ("kf1", kf1), ("kb1", kb1), ("kf2", kf2), ("kb2", kb2)]),
        ).unwrap();
        let sbox = Arc::new(StateBox::full(vec![0], vec![80]).unwrap());
        let gen = build_generator(&model.network, sbox).unwrap();
        let dist = stationary(&gen).unwrap();
        let residual = detailed_balance_residual(&gen, &dist).unwrap();
        prop_assert!(residual <= 1e-10, "residual = {:e}", residual);
    }
}
