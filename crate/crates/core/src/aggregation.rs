//! Heterogeneous aggregation of width-pruned sub-models.
//!
//! Each returned model covers a leading block of every global layer. A global
//! coordinate becomes the data-size-weighted mean over the clients covering
//! it; coordinates no client covers keep their previous value.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{ModelSpec, ParamSet};
use crate::pruning::{kept_widths, PruneConfig};

/// A locally trained sub-model uploaded to the server.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReturnedModel {
    pub client_id: usize,
    pub params: ParamSet,
    pub cfg: PruneConfig,
    /// Local training-set size `|d_c|`.
    pub data_size: usize,
}

impl ReturnedModel {
    fn check(&self, spec: &ModelSpec) -> Result<()> {
        if self.data_size == 0 {
            return Err(Error::ShapeMismatch(format!(
                "client {} reported an empty data set",
                self.client_id
            )));
        }
        let widths = kept_widths(spec, &self.cfg)?;
        let expected: Vec<(usize, usize)> = widths.windows(2).map(|w| (w[1], w[0])).collect();
        if self.params.shapes() != expected {
            return Err(Error::ShapeMismatch(format!(
                "client {} returned shapes {:?} but {} implies {:?}",
                self.client_id,
                self.params.shapes(),
                self.cfg.label(),
                expected
            )));
        }
        Ok(())
    }
}

/// Aggregates `returned` into a new full model. Clients are summed in
/// ascending `client_id` order so results do not depend on upload order.
pub fn aggregate(global: &ParamSet, returned: &[ReturnedModel], spec: &ModelSpec) -> Result<ParamSet> {
    let expected: Vec<(usize, usize)> = spec.layer_dims.windows(2).map(|w| (w[1], w[0])).collect();
    if global.shapes() != expected {
        return Err(Error::ShapeMismatch(format!(
            "global shapes {:?} do not match spec {:?}",
            global.shapes(),
            spec.layer_dims
        )));
    }
    for r in returned {
        r.check(spec)?;
    }
    let mut order: Vec<&ReturnedModel> = returned.iter().collect();
    order.sort_by_key(|r| r.client_id);

    let mut sums = global.zeros_like();
    let mut coverage = global.zeros_like();
    for r in &order {
        let w = r.data_size as f64;
        for ((sum, cov), local) in sums
            .layers
            .iter_mut()
            .zip(coverage.layers.iter_mut())
            .zip(&r.params.layers)
        {
            for row in 0..local.out_dim() {
                let src = local.weights.row(row);
                for (s, &v) in sum.weights.row_mut(row).iter_mut().zip(src) {
                    *s += v * w;
                }
                for c in &mut cov.weights.row_mut(row)[..src.len()] {
                    *c += w;
                }
                sum.bias[row] += local.bias[row] * w;
                cov.bias[row] += w;
            }
        }
    }

    let mut out = sums;
    for ((layer, cov), old) in out
        .layers
        .iter_mut()
        .zip(&coverage.layers)
        .zip(&global.layers)
    {
        average_into(layer.weights.as_mut_slice(), cov.weights.as_slice(), old.weights.as_slice());
        average_into(&mut layer.bias, &cov.bias, &old.bias);
    }
    Ok(out)
}

fn average_into(sum: &mut [f64], weight: &[f64], old: &[f64]) {
    for ((s, &w), &o) in sum.iter_mut().zip(weight).zip(old) {
        *s = if w > 0.0 { *s / w } else { o };
    }
}
