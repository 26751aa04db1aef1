//! Oracles shared by the integration tests. Each one is written from the
//! definitions, independently of the library's loops.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use adaptivefl::aggregation::ReturnedModel;
use adaptivefl::nn::{init_params, loss_and_grads, Activation, Batch, Matrix, ModelSpec, ParamSet};
use adaptivefl::pruning::{build_pool, Level, LevelRatios, ModelPool};
use adaptivefl::selection::{select_clients, selection_probabilities, update_tables, RlTables, SelectionRule};

/// Per-coordinate weighted mean over the clients covering each coordinate,
/// summed in ascending client id.
pub fn brute_force_aggregate(global: &ParamSet, returned: &[ReturnedModel]) -> ParamSet {
    let mut sorted: Vec<&ReturnedModel> = returned.iter().collect();
    sorted.sort_by_key(|r| r.client_id);
    let mut out = global.clone();
    for (k, layer) in out.layers.iter_mut().enumerate() {
        for r in 0..layer.out_dim() {
            let mut num = 0.0;
            let mut den = 0.0;
            for c in sorted.iter().filter(|c| r < c.params.layers[k].out_dim()) {
                num += c.params.layers[k].bias[r] * c.data_size as f64;
                den += c.data_size as f64;
            }
            if den > 0.0 {
                layer.bias[r] = num / den;
            }
            for col in 0..layer.in_dim() {
                let mut num = 0.0;
                let mut den = 0.0;
                for c in &sorted {
                    let l = &c.params.layers[k];
                    if r < l.out_dim() && col < l.in_dim() {
                        num += l.weights.get(r, col) * c.data_size as f64;
                        den += c.data_size as f64;
                    }
                }
                if den > 0.0 {
                    layer.weights.set(r, col, num / den);
                }
            }
        }
    }
    out
}

pub fn flat(p: &ParamSet) -> Vec<f64> {
    p.layers
        .iter()
        .flat_map(|l| l.weights.as_slice().iter().chain(&l.bias).copied())
        .collect()
}

/// Smallest |pre-activation| over all hidden units and samples.
fn min_hidden_preactivation(params: &ParamSet, x: &Matrix) -> f64 {
    let mut min = f64::INFINITY;
    for i in 0..x.rows() {
        let mut a: Vec<f64> = x.row(i).to_vec();
        let n = params.layers.len();
        for (k, layer) in params.layers.iter().enumerate() {
            let z: Vec<f64> = (0..layer.out_dim())
                .map(|o| layer.bias[o] + layer.weights.row(o).iter().zip(&a).map(|(w, v)| w * v).sum::<f64>())
                .collect();
            if k + 1 == n {
                break;
            }
            for &v in &z {
                min = min.min(v.abs());
            }
            a = z
                .iter()
                .map(|&v| match params.activation {
                    Activation::Relu => v.max(0.0),
                    Activation::Tanh => v.tanh(),
                })
                .collect();
        }
    }
    min
}

/// Largest relative error between analytic and central-difference gradients
/// over `nets` random small networks (alternating ReLU and tanh). Batches
/// with a ReLU unit near its kink are redrawn, since a finite difference
/// straddling the kink is not a derivative estimate.
pub fn max_gradient_error(nets: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for net in 0..nets {
        let depth = rng.random_range(3..=5);
        let dims: Vec<usize> = (0..depth).map(|_| rng.random_range(1..=6)).collect();
        let mut spec = ModelSpec::new(dims, 1).unwrap();
        if net % 2 == 1 {
            spec.activation = Activation::Tanh;
        }
        let mut params = init_params(&spec, rng.random()).unwrap();
        // Nonzero biases so bias gradients are exercised away from zero.
        for layer in &mut params.layers {
            for b in &mut layer.bias {
                *b = rng.random_range(-0.5..0.5);
            }
        }
        let batch = loop {
            let n = rng.random_range(1..=4);
            let data = (0..n * spec.input_dim()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let labels = (0..n).map(|_| rng.random_range(0..spec.classes())).collect();
            let b = Batch::new(Matrix::from_vec(n, spec.input_dim(), data), labels).unwrap();
            if spec.activation == Activation::Tanh || min_hidden_preactivation(&params, &b.features) > 1e-3 {
                break b;
            }
        };
        let (_, grads) = loss_and_grads(&params, &batch).unwrap();
        let loss_at = |p: &ParamSet| loss_and_grads(p, &batch).unwrap().0;
        for k in 0..params.layers.len() {
            let n_w = params.layers[k].weights.as_slice().len();
            let n_b = params.layers[k].bias.len();
            for i in 0..n_w + n_b {
                let mut plus = params.clone();
                let mut minus = params.clone();
                let analytic = if i < n_w {
                    plus.layers[k].weights.as_mut_slice()[i] += h;
                    minus.layers[k].weights.as_mut_slice()[i] -= h;
                    grads.layers[k].weights.as_slice()[i]
                } else {
                    plus.layers[k].bias[i - n_w] += h;
                    minus.layers[k].bias[i - n_w] -= h;
                    grads.layers[k].bias[i - n_w]
                };
                let numeric = (loss_at(&plus) - loss_at(&minus)) / (2.0 * h);
                let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6);
                worst = worst.max(rel);
            }
        }
    }
    worst
}

pub fn rigged_pool() -> ModelPool {
    let spec = ModelSpec::new(vec![8, 8, 8, 16, 16, 16, 4], 2).unwrap();
    build_pool(&spec, LevelRatios::default(), &[3, 2]).unwrap()
}

/// Two clients: 0 can only hold `S_1`, 1 holds everything. Each cycle draws
/// a pool entry uniformly, picks a client by `rule`, fits and updates.
/// Returns the final tables and the cumulative waste rate.
pub fn rigged_fleet(rule: SelectionRule, cycles: usize, seed: u64) -> (RlTables, f64) {
    let pool = rigged_pool();
    let s1 = pool.index_of(Level::S, 1).unwrap();
    let capacities = [pool.size(s1), pool.size(pool.top())];
    let mut tables = RlTables::new(&pool, 2);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut sent_total, mut back_total) = (0u64, 0u64);
    for _ in 0..cycles {
        let entry = rng.random_range(0..pool.len());
        let client = select_clients(rule, &pool, &[entry], &[0, 1], &tables, &mut rng).unwrap()[0];
        let back = pool.fit_index(entry, capacities[client]).unwrap();
        update_tables(&mut tables, &pool, entry, back, client).unwrap();
        sent_total += pool.size(entry);
        back_total += pool.size(back);
    }
    (tables, 1.0 - back_total as f64 / sent_total as f64)
}

/// `(P(L_1, weak), P(L_1, capable))` under the combined reward.
pub fn l1_probabilities(tables: &RlTables) -> (f64, f64) {
    let pool = rigged_pool();
    let p = selection_probabilities(SelectionRule::CuriosityResource, &pool, pool.top(), &[0, 1], tables);
    (p[0], p[1])
}
