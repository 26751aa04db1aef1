//! Property tests for slicing, pool fitting, aggregation and the RL tables.

mod common;

use common::{brute_force_aggregate as brute_force, flat};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use adaptivefl::aggregation::{aggregate, ReturnedModel};
use adaptivefl::federation::{partition_dirichlet, DataDistribution};
use adaptivefl::nn::{init_params, ModelSpec};
use adaptivefl::pruning::{
    build_pool, kept_widths, param_count, prune_params, slice_to_widths, Level, LevelRatios, LayerKind, ModelPool,
    PruneConfig, ShapeLayer, ShapeSpec,
};
use adaptivefl::selection::{selection_probabilities, update_tables, RlTables, SelectionRule};

fn spec_strategy(max_layers: usize, max_dim: usize) -> impl Strategy<Value = ModelSpec> {
    prop::collection::vec(1..=max_dim, 3..=max_layers + 1).prop_map(|dims| ModelSpec::new(dims, 1).unwrap())
}

fn cfg_for(spec: &ModelSpec, ratio: f64, start: usize) -> PruneConfig {
    PruneConfig {
        level: Level::S,
        variant: 1,
        width_ratio: ratio,
        start_layer: start.clamp(spec.tau, spec.num_weight_layers()),
    }
}

/// A deep desk pool together with a few narrower variants.
fn pools() -> Vec<ModelPool> {
    let cases: [(Vec<usize>, Vec<usize>); 3] = [
        (vec![16, 32, 32, 32, 64, 64, 64, 64, 8], vec![4, 3, 2]),
        (vec![8, 8, 8, 16, 16, 16, 4], vec![3, 2]),
        (vec![5, 6, 12, 20, 3], vec![2]),
    ];
    cases
        .into_iter()
        .map(|(dims, starts)| {
            let spec = ModelSpec::new(dims, 2).unwrap();
            build_pool(&spec, LevelRatios::default(), &starts).unwrap()
        })
        .collect()
}

fn pool_strategy() -> impl Strategy<Value = ModelPool> {
    (0..3usize).prop_map(|i| pools().swap_remove(i))
}

fn returned_models(spec: &ModelSpec, seed: u64, clients: &[(f64, usize, usize)]) -> Vec<ReturnedModel> {
    clients
        .iter()
        .enumerate()
        .map(|(id, &(ratio, start, size))| {
            let cfg = cfg_for(spec, ratio, start);
            let src = init_params(spec, seed * 31 + id as u64).unwrap();
            ReturnedModel {
                client_id: id,
                params: prune_params(&src, &cfg, spec).unwrap(),
                cfg,
                data_size: size,
            }
        })
        .collect()
}

fn client_strategy() -> impl Strategy<Value = Vec<(f64, usize, usize)>> {
    prop::collection::vec((0.05f64..=1.0, 1usize..=4, 1usize..=100), 1..=6)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn kept_values_equal_leading_global_entries(
        spec in spec_strategy(5, 10), ratio in 0.05f64..=1.0, start in 1usize..=5, seed in 0u64..1000,
    ) {
        let g = init_params(&spec, seed).unwrap();
        let cfg = cfg_for(&spec, ratio, start);
        let sub = prune_params(&g, &cfg, &spec).unwrap();
        for (s, full) in sub.layers.iter().zip(&g.layers) {
            for r in 0..s.out_dim() {
                prop_assert_eq!(s.bias[r], full.bias[r]);
                for c in 0..s.in_dim() {
                    prop_assert_eq!(s.weights.get(r, c), full.weights.get(r, c));
                }
            }
        }
        let widths = kept_widths(&spec, &cfg).unwrap();
        prop_assert_eq!(widths[0], spec.input_dim());
        prop_assert_eq!(*widths.last().unwrap(), spec.classes());
    }

    #[test]
    fn unit_ratio_is_identity(spec in spec_strategy(5, 10), start in 1usize..=5, seed in 0u64..1000) {
        let g = init_params(&spec, seed).unwrap();
        prop_assert_eq!(prune_params(&g, &cfg_for(&spec, 1.0, start), &spec).unwrap(), g);
    }

    #[test]
    fn param_count_is_monotone(
        dims in prop::collection::vec(1usize..=64, 3..=8), conv in prop::collection::vec(any::<bool>(), 7),
        r1 in 0.05f64..=1.0, r2 in 0.05f64..=1.0, i1 in 0usize..=8, i2 in 0usize..=8,
    ) {
        let n = dims.len() - 1;
        let layers = (0..n)
            .map(|k| ShapeLayer {
                kind: if conv[k] { LayerKind::Conv3x3 } else { LayerKind::Dense },
                in_channels: dims[k],
                out_channels: dims[k + 1],
                prunable_in: k > 0,
                prunable_out: k + 1 < n,
            })
            .collect();
        let shape = ShapeSpec::new(layers).unwrap();
        let (lo_r, hi_r) = if r1 <= r2 { (r1, r2) } else { (r2, r1) };
        let (lo_i, hi_i) = (i1.min(i2), i1.max(i2));
        prop_assert!(param_count(&shape, lo_r, i1).unwrap() <= param_count(&shape, hi_r, i1).unwrap());
        prop_assert!(param_count(&shape, r1, lo_i).unwrap() <= param_count(&shape, r1, hi_i).unwrap());
        prop_assert!(param_count(&shape, r1, i1).unwrap() <= param_count(&shape, 1.0, n).unwrap());
    }

    #[test]
    fn nested_entries_share_coordinates(pool in pool_strategy(), seed in 0u64..1000) {
        let g = init_params(pool.spec(), seed).unwrap();
        for outer in 0..pool.len() {
            let big = pool.prune(&g, outer).unwrap();
            for inner in 0..pool.len() {
                if pool.is_sub_slice(inner, outer) {
                    let small = pool.prune(&g, inner).unwrap();
                    prop_assert_eq!(slice_to_widths(&big, pool.widths(inner)).unwrap(), small);
                }
            }
        }
    }

    #[test]
    fn fit_is_maximal_by_exhaustive_search(pool in pool_strategy(), received in 0usize..7, frac in 0.0f64..1.2) {
        let received = received % pool.len();
        let top = pool.size(pool.top()) as f64;
        let capacity = (pool.size(0) as f64 + frac * (top - pool.size(0) as f64)) as u64;
        let got = pool.fit_index(received, capacity).unwrap();
        prop_assert!(pool.size(got) <= capacity);
        prop_assert!(pool.size(got) <= pool.size(received));
        prop_assert!(pool.is_sub_slice(got, received));
        let best = (0..pool.len())
            .filter(|&i| pool.size(i) <= capacity && pool.is_sub_slice(i, received))
            .map(|i| pool.size(i))
            .max()
            .unwrap();
        prop_assert_eq!(pool.size(got), best);
    }

    #[test]
    fn aggregation_matches_brute_force(
        spec in spec_strategy(4, 8), clients in client_strategy(), seed in 0u64..1000,
    ) {
        let global = init_params(&spec, seed + 7).unwrap();
        let returned = returned_models(&spec, seed, &clients);
        let got = flat(&aggregate(&global, &returned, &spec).unwrap());
        let want = flat(&brute_force(&global, &returned));
        for (a, b) in got.iter().zip(&want) {
            prop_assert!((a - b).abs() <= 1e-12 * b.abs().max(1e-300), "{} vs {}", a, b);
        }
    }

    #[test]
    fn aggregation_ignores_upload_order(
        spec in spec_strategy(4, 8), clients in client_strategy(), seed in 0u64..1000,
    ) {
        let global = init_params(&spec, seed + 7).unwrap();
        let returned = returned_models(&spec, seed, &clients);
        let mut shuffled = returned.clone();
        shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        prop_assert_eq!(
            aggregate(&global, &returned, &spec).unwrap(),
            aggregate(&global, &shuffled, &spec).unwrap()
        );
    }

    #[test]
    fn full_models_average_like_fedavg(
        spec in spec_strategy(4, 8), sizes in prop::collection::vec(1usize..=100, 1..=6), seed in 0u64..1000,
    ) {
        let global = init_params(&spec, seed + 7).unwrap();
        let clients: Vec<_> = sizes.iter().map(|&n| (1.0, 4, n)).collect();
        let returned = returned_models(&spec, seed, &clients);
        let got = flat(&aggregate(&global, &returned, &spec).unwrap());
        let locals: Vec<Vec<f64>> = returned.iter().map(|r| flat(&r.params)).collect();
        let total: f64 = sizes.iter().map(|&n| n as f64).sum();
        for (i, &g) in got.iter().enumerate() {
            let mut num = 0.0;
            for (l, &n) in locals.iter().zip(&sizes) {
                num += l[i] * n as f64;
            }
            prop_assert_eq!(g, num / total);
        }
    }

    #[test]
    fn tables_stay_valid_under_fuzzed_updates(
        pool in pool_strategy(), ops in prop::collection::vec((0usize..7, 0u64..1_000_000, 0usize..3), 1..200),
    ) {
        let mut tables = RlTables::new(&pool, 3);
        for (sent, cap, client) in ops {
            let sent = sent % pool.len();
            let capacity = pool.size(0) + cap % (pool.size(pool.top()) - pool.size(0) + 1);
            let back = pool.fit_index(sent, capacity).unwrap();
            let before = tables.curiosity.clone();
            update_tables(&mut tables, &pool, sent, back, client).unwrap();
            for (row_after, row_before) in tables.curiosity.rows().iter().zip(before.rows()) {
                for (a, b) in row_after.iter().zip(row_before) {
                    prop_assert!(a >= b);
                }
            }
            for c in 0..3 {
                let probs = selection_probabilities(SelectionRule::CuriosityResource, &pool, sent, &[0, 1, 2][..=c], &tables);
                let sum: f64 = probs.iter().sum();
                prop_assert!((sum - 1.0).abs() <= 1e-12);
                prop_assert!(probs.iter().all(|p| (0.0..=1.0).contains(p)));
            }
        }
    }

    #[test]
    fn shards_partition_the_dataset(
        labels in prop::collection::vec(0usize..5, 40..200), clients in 1usize..10, alpha in 0.05f64..10.0, seed in 0u64..1000,
    ) {
        let shards = partition_dirichlet(&labels, 5, clients, DataDistribution::Dirichlet { alpha }, seed).unwrap();
        prop_assert_eq!(shards.len(), clients);
        prop_assert!(shards.iter().all(|s| !s.is_empty()));
        let mut all: Vec<usize> = shards.concat();
        all.sort_unstable();
        prop_assert_eq!(all, (0..labels.len()).collect::<Vec<_>>());
    }
}
