//! Quick invariant checks runnable from the command line.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::aggregation::{aggregate, ReturnedModel};
use crate::nn::{forward, init_params, loss_and_grads, Batch, Matrix, ModelSpec, ParamSet};
use crate::pruning::{build_pool, param_count, prune_params, Level, LevelRatios, PruneConfig, ShapeSpec};
use crate::selection::{curiosity_reward, resource_reward, update_tables, CuriosityTable, RlTables};

type CheckFn = fn() -> Result<(), String>;

pub struct Check {
    pub name: &'static str,
    pub outcome: Result<(), String>,
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn random_spec(rng: &mut ChaCha8Rng) -> ModelSpec {
    let depth = rng.random_range(3..=5);
    let dims = (0..depth).map(|_| rng.random_range(1..=8)).collect();
    ModelSpec::new(dims, 1).expect("valid random spec")
}

fn random_batch(rng: &mut ChaCha8Rng, features: usize, classes: usize, n: usize) -> Batch {
    let data = (0..n * features).map(|_| rng.random_range(-1.0..1.0)).collect();
    let labels = (0..n).map(|_| rng.random_range(0..classes)).collect();
    Batch::new(Matrix::from_vec(n, features, data), labels).expect("valid batch")
}

fn gradient_check() -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let h = 1e-5;
    for trial in 0..10 {
        let spec = random_spec(&mut rng);
        let params = init_params(&spec, trial).map_err(|e| e.to_string())?;
        let batch = random_batch(&mut rng, spec.input_dim(), spec.classes(), 4);
        let (_, grads) = loss_and_grads(&params, &batch).map_err(|e| e.to_string())?;
        for k in 0..params.layers.len() {
            for i in 0..params.layers[k].weights.as_slice().len() {
                let eval = |delta: f64| {
                    let mut p = params.clone();
                    p.layers[k].weights.as_mut_slice()[i] += delta;
                    loss_and_grads(&p, &batch).map(|(l, _)| l)
                };
                let numeric = (eval(h).map_err(|e| e.to_string())? - eval(-h).map_err(|e| e.to_string())?) / (2.0 * h);
                let analytic = grads.layers[k].weights.as_slice()[i];
                let rel = (numeric - analytic).abs() / numeric.abs().max(analytic.abs()).max(1e-6);
                // Loose bound: ReLU kinks can sit inside the difference interval.
                ensure(rel < 1e-2, || format!("layer {k} weight {i}: analytic {analytic}, numeric {numeric}"))?;
            }
        }
    }
    Ok(())
}

fn softmax_rows() -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let spec = ModelSpec::new(vec![5, 7, 4], 1).expect("valid");
    let params = init_params(&spec, 3).map_err(|e| e.to_string())?;
    let batch = random_batch(&mut rng, 5, 4, 20);
    let probs = forward(&params, &batch.features).map_err(|e| e.to_string())?;
    for r in 0..probs.rows() {
        let sum: f64 = probs.row(r).iter().sum();
        ensure((sum - 1.0).abs() < 1e-9, || format!("row {r} sums to {sum}"))?;
    }
    Ok(())
}

/// Per-coordinate brute force, written independently of the aggregation
/// loop: for every global coordinate, scan the clients covering it.
fn brute_force(global: &ParamSet, returned: &[ReturnedModel]) -> ParamSet {
    let mut out = global.clone();
    for (k, layer) in out.layers.iter_mut().enumerate() {
        for r in 0..layer.out_dim() {
            let (mut num, mut den) = (0.0, 0.0);
            for c in returned {
                let l = &c.params.layers[k];
                if r < l.out_dim() {
                    num += l.bias[r] * c.data_size as f64;
                    den += c.data_size as f64;
                }
            }
            if den > 0.0 {
                layer.bias[r] = num / den;
            }
            for col in 0..layer.in_dim() {
                let (mut num, mut den) = (0.0, 0.0);
                for c in returned {
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

fn aggregation_oracle() -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for trial in 0..100u64 {
        let spec = random_spec(&mut rng);
        let global = init_params(&spec, trial).map_err(|e| e.to_string())?;
        let n = rng.random_range(1..=6);
        let mut returned = Vec::new();
        for id in 0..n {
            let cfg = PruneConfig {
                level: Level::S,
                variant: 1,
                width_ratio: rng.random_range(0.05..=1.0),
                start_layer: rng.random_range(1..=spec.num_weight_layers()),
            };
            let src = init_params(&spec, 1000 + trial * 10 + id).map_err(|e| e.to_string())?;
            returned.push(ReturnedModel {
                client_id: id as usize,
                params: prune_params(&src, &cfg, &spec).map_err(|e| e.to_string())?,
                cfg,
                data_size: rng.random_range(1..=50),
            });
        }
        let got = aggregate(&global, &returned, &spec).map_err(|e| e.to_string())?;
        ensure(got == brute_force(&global, &returned), || format!("trial {trial} differs from brute force"))?;
    }
    Ok(())
}

fn table_traces() -> Result<(), String> {
    let spec = ModelSpec::new(vec![8, 8, 8, 16, 16, 16, 4], 2).expect("valid");
    let pool = build_pool(&spec, LevelRatios::default(), &[3, 2]).map_err(|e| e.to_string())?;
    let m1 = pool.index_of(Level::M, 1).expect("M_1");
    let s1 = pool.index_of(Level::S, 1).expect("S_1");
    let mut t = RlTables::new(&pool, 1);
    update_tables(&mut t, &pool, m1, m1, 0).map_err(|e| e.to_string())?;
    ensure(t.resource.column(0) == [1, 1, 1, 2, 3], || format!("{:?}", t.resource.column(0)))?;
    let mut t = RlTables::new(&pool, 1);
    update_tables(&mut t, &pool, m1, s1, 0).map_err(|e| e.to_string())?;
    ensure(t.resource.column(0) == [1, 3, 0, 0, 0], || format!("{:?}", t.resource.column(0)))?;
    Ok(())
}

fn reward_values() -> Result<(), String> {
    let spec = ModelSpec::new(vec![8, 8, 8, 16, 16, 16, 4], 2).expect("valid");
    let pool = build_pool(&spec, LevelRatios::default(), &[3, 2]).map_err(|e| e.to_string())?;
    let t = RlTables::new(&pool, 1);
    let got: Vec<f64> = [0, 2, 4].iter().map(|&e| resource_reward(&pool, e, 0, &t.resource)).collect();
    ensure(got == [0.9, 0.5, 0.1], || format!("resource rewards {got:?}"))?;
    let c = CuriosityTable::new(1);
    ensure(curiosity_reward(Level::S, 0, &c) == 1.0, || "curiosity at 1".into())
}

fn pruning_identity() -> Result<(), String> {
    let spec = ModelSpec::new(vec![4, 8, 8, 8, 4], 1).expect("valid");
    let g = init_params(&spec, 5).map_err(|e| e.to_string())?;
    let full = PruneConfig::full(&spec);
    ensure(prune_params(&g, &full, &spec).map_err(|e| e.to_string())? == g, || "identity slice differs".into())
}

fn vgg16_ratios() -> Result<(), String> {
    let vgg = ShapeSpec::vgg16();
    let full = param_count(&vgg, 1.0, 16).map_err(|e| e.to_string())? as f64;
    ensure(((full - 33.65e6) / 33.65e6).abs() < 0.005, || format!("full count {full}"))?;
    for (r, want) in [(0.66, 0.50), (0.40, 0.25)] {
        let ratio = param_count(&vgg, r, 8).map_err(|e| e.to_string())? as f64 / full;
        ensure((ratio - want).abs() <= 0.03, || format!("r_w {r}: ratio {ratio}"))?;
    }
    Ok(())
}

/// Runs every check; each reports independently.
pub fn run_all() -> Vec<Check> {
    let checks: [(&'static str, CheckFn); 7] = [
        ("gradients match finite differences", gradient_check),
        ("softmax rows sum to one", softmax_rows),
        ("aggregation matches brute force", aggregation_oracle),
        ("resource table update traces", table_traces),
        ("reward formulas", reward_values),
        ("full-width slice is the identity", pruning_identity),
        ("VGG16 split ratios", vgg16_ratios),
    ];
    checks
        .into_iter()
        .map(|(name, f)| Check { name, outcome: f() })
        .collect()
}
