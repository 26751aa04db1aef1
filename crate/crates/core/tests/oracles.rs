//! Gradient, aggregation and selection-learning checks against independent
//! oracles.

mod common;

use adaptivefl::aggregation::{aggregate, ReturnedModel};
use adaptivefl::nn::{init_params, ModelSpec};
use adaptivefl::pruning::{prune_params, Level, PruneConfig};
use adaptivefl::selection::SelectionRule;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn analytic_gradients_match_central_differences() {
    let err = common::max_gradient_error(40, 11);
    assert!(err < 1e-4, "max relative error {err}");
}

#[test]
fn partial_coverage_keeps_uncovered_values() {
    let spec = ModelSpec::new(vec![3, 6, 6, 2], 1).unwrap();
    let global = init_params(&spec, 1).unwrap();
    let cfg = PruneConfig { level: Level::S, variant: 1, width_ratio: 0.5, start_layer: 1 };
    let local = prune_params(&init_params(&spec, 2).unwrap(), &cfg, &spec).unwrap();
    let returned = [ReturnedModel { client_id: 3, params: local.clone(), cfg, data_size: 9 }];
    let out = aggregate(&global, &returned, &spec).unwrap();
    assert_eq!(common::flat(&out), common::flat(&common::brute_force_aggregate(&global, &returned)));
    // Layer 2 keeps 3 of 6 rows; rows 3..6 must be the old values.
    for r in 3..6 {
        assert_eq!(out.layers[1].weights.row(r), global.layers[1].weights.row(r));
        assert_eq!(out.layers[1].bias[r], global.layers[1].bias[r]);
    }
}

#[test]
fn random_heterogeneous_aggregation_matches_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for trial in 0..200u64 {
        let dims: Vec<usize> = (0..rng.random_range(3..=5)).map(|_| rng.random_range(1..=8)).collect();
        let spec = ModelSpec::new(dims, 1).unwrap();
        let global = init_params(&spec, trial).unwrap();
        let returned: Vec<ReturnedModel> = (0..rng.random_range(1..=6))
            .map(|id| {
                let cfg = PruneConfig {
                    level: Level::M,
                    variant: 1,
                    width_ratio: rng.random_range(0.1..=1.0),
                    start_layer: rng.random_range(1..=spec.num_weight_layers()),
                };
                let src = init_params(&spec, 500 + trial * 7 + id).unwrap();
                ReturnedModel {
                    client_id: id as usize,
                    params: prune_params(&src, &cfg, &spec).unwrap(),
                    cfg,
                    data_size: rng.random_range(1..=40),
                }
            })
            .collect();
        let got = common::flat(&aggregate(&global, &returned, &spec).unwrap());
        let want = common::flat(&common::brute_force_aggregate(&global, &returned));
        assert_eq!(got, want, "trial {trial}");
    }
}

#[test]
fn capable_client_becomes_preferred_for_l1() {
    let mut wins = 0;
    for seed in 0..20 {
        let (tables, _) = common::rigged_fleet(SelectionRule::CuriosityResource, 200, seed);
        let (weak, capable) = common::l1_probabilities(&tables);
        if capable > weak {
            wins += 1;
        }
    }
    assert!(wins >= 19, "{wins}/20");
}

#[test]
fn combined_selection_wastes_less_than_uniform_on_rigged_fleet() {
    let wins = (0..5)
        .filter(|&seed| {
            let (_, cs) = common::rigged_fleet(SelectionRule::CuriosityResource, 200, seed);
            let (_, uniform) = common::rigged_fleet(SelectionRule::Uniform, 200, seed);
            cs < uniform
        })
        .count();
    assert!(wins >= 4, "{wins}/5");
}
