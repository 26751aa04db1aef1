//! Width-wise pruning: sub-model extraction, the heterogeneous model pool,
//! resource-aware fitting and parameter counting.
//!
//! Hidden activation `j` (the output of weight layer `j`) keeps all of its
//! units when `j <= I` and the leading `ceil(width * r_w)` units otherwise.
//! Weight layer `k` therefore keeps `kept[k]` rows and `kept[k - 1]` columns,
//! so every sub-model is shape-consistent. Network inputs and class outputs
//! are never pruned.

use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{Layer, ModelSpec, ParamSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Level {
    S,
    M,
    L,
}

impl Level {
    pub const ALL: [Level; 3] = [Level::S, Level::M, Level::L];

    /// Row in the curiosity table.
    pub fn row(self) -> usize {
        match self {
            Level::S => 0,
            Level::M => 1,
            Level::L => 2,
        }
    }
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Level::S => "S",
            Level::M => "M",
            Level::L => "L",
        };
        f.write_str(s)
    }
}

/// One pool entry: a width ratio applied after starting layer `start_layer`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PruneConfig {
    pub level: Level,
    pub variant: usize,
    pub width_ratio: f64,
    pub start_layer: usize,
}

impl PruneConfig {
    /// The unpruned `L_1` configuration for `spec`.
    pub fn full(spec: &ModelSpec) -> Self {
        Self {
            level: Level::L,
            variant: 1,
            width_ratio: 1.0,
            start_layer: spec.num_weight_layers(),
        }
    }

    pub fn label(&self) -> String {
        format!("{}_{}", self.level, self.variant)
    }

    fn check_ratio(&self) -> Result<()> {
        if !(self.width_ratio > 0.0 && self.width_ratio <= 1.0) {
            return Err(Error::InvalidPruneConfig(format!(
                "width ratio must be in (0, 1], got {}",
                self.width_ratio
            )));
        }
        Ok(())
    }

    pub fn validate(&self, spec: &ModelSpec) -> Result<()> {
        self.check_ratio()?;
        if self.start_layer < spec.tau {
            return Err(Error::InvalidPruneConfig(format!(
                "starting layer {} is below tau {}",
                self.start_layer, spec.tau
            )));
        }
        if self.level == Level::L && (self.width_ratio != 1.0 || self.variant != 1) {
            return Err(Error::InvalidPruneConfig(
                "level L must be the unpruned variant 1".into(),
            ));
        }
        if self.variant == 0 {
            return Err(Error::InvalidPruneConfig("variants are numbered from 1".into()));
        }
        Ok(())
    }
}

/// `ceil(width * ratio)`, at least one unit. The small slack keeps exact
/// products such as `10 * 0.3` from rounding up an extra unit.
pub fn scaled_width(width: usize, ratio: f64) -> usize {
    let w = ((width as f64 * ratio) - 1e-9).ceil().max(1.0) as usize;
    w.min(width)
}

/// Kept width of every activation (input, hidden..., output) under `cfg`.
pub fn kept_widths(spec: &ModelSpec, cfg: &PruneConfig) -> Result<Vec<usize>> {
    cfg.validate(spec)?;
    let last = spec.layer_dims.len() - 1;
    Ok(spec
        .layer_dims
        .iter()
        .enumerate()
        .map(|(j, &d)| {
            if j == 0 || j == last || j <= cfg.start_layer {
                d
            } else {
                scaled_width(d, cfg.width_ratio)
            }
        })
        .collect())
}

/// Parameter count (weights and biases) of the dense sub-model with the
/// given activation widths.
pub fn widths_size(widths: &[usize]) -> u64 {
    widths.windows(2).map(|w| (w[0] * w[1] + w[1]) as u64).sum()
}

fn check_global(global: &ParamSet, spec: &ModelSpec) -> Result<()> {
    let expected: Vec<(usize, usize)> = spec.layer_dims.windows(2).map(|w| (w[1], w[0])).collect();
    if global.shapes() != expected {
        return Err(Error::ShapeMismatch(format!(
            "parameters shaped {:?} do not match spec {:?}",
            global.shapes(),
            spec.layer_dims
        )));
    }
    Ok(())
}

/// Leading slice of `params` with the given activation widths.
pub fn slice_to_widths(params: &ParamSet, widths: &[usize]) -> Result<ParamSet> {
    if widths.len() != params.layers.len() + 1 {
        return Err(Error::ShapeMismatch(format!(
            "{} widths for {} layers",
            widths.len(),
            params.layers.len()
        )));
    }
    let mut layers = Vec::with_capacity(params.layers.len());
    for (k, layer) in params.layers.iter().enumerate() {
        let (rows, cols) = (widths[k + 1], widths[k]);
        if rows > layer.out_dim() || cols > layer.in_dim() {
            return Err(Error::ShapeMismatch(format!(
                "layer {} is {}x{}, cannot keep {}x{}",
                k + 1,
                layer.out_dim(),
                layer.in_dim(),
                rows,
                cols
            )));
        }
        layers.push(Layer {
            weights: layer.weights.leading_block(rows, cols),
            bias: layer.bias[..rows].to_vec(),
        });
    }
    Ok(ParamSet {
        layers,
        activation: params.activation,
    })
}

/// Extracts the sub-model selected by `cfg` from the full `global` model.
pub fn prune_params(global: &ParamSet, cfg: &PruneConfig, spec: &ModelSpec) -> Result<ParamSet> {
    check_global(global, spec)?;
    let widths = kept_widths(spec, cfg)?;
    slice_to_widths(global, &widths)
}

/// Width ratios of the pruned levels; `L` is always 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelRatios {
    pub small: f64,
    pub medium: f64,
}

impl LevelRatios {
    pub fn get(&self, level: Level) -> f64 {
        match level {
            Level::S => self.small,
            Level::M => self.medium,
            Level::L => 1.0,
        }
    }
}

impl Default for LevelRatios {
    fn default() -> Self {
        Self {
            small: 0.40,
            medium: 0.66,
        }
    }
}

/// The `2p + 1` pool entries ordered by ascending size:
/// `S_p, ..., S_1, M_p, ..., M_1, L_1`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelPool {
    spec: ModelSpec,
    p: usize,
    ratios: LevelRatios,
    entries: Vec<PruneConfig>,
    widths: Vec<Vec<usize>>,
    sizes: Vec<u64>,
}

/// Builds the pool for `spec`. `start_layers[v - 1]` is the starting layer of
/// variant `v` and must be strictly decreasing.
pub fn build_pool(spec: &ModelSpec, ratios: LevelRatios, start_layers: &[usize]) -> Result<ModelPool> {
    spec.validate()?;
    let p = start_layers.len();
    if p == 0 {
        return Err(Error::InvalidPool("need at least one starting layer".into()));
    }
    for (name, r) in [("small", ratios.small), ("medium", ratios.medium)] {
        if !(r > 0.0 && r <= 1.0) {
            return Err(Error::InvalidPool(format!(
                "{name} width ratio must be in (0, 1], got {r}"
            )));
        }
    }
    if start_layers.windows(2).any(|w| w[0] <= w[1]) {
        return Err(Error::InvalidPool(format!(
            "starting layers must be strictly decreasing, got {start_layers:?}"
        )));
    }
    if let Some(&i) = start_layers.iter().find(|&&i| i < spec.tau) {
        return Err(Error::InvalidPool(format!(
            "starting layer {i} is below tau {}",
            spec.tau
        )));
    }

    let mut entries = Vec::with_capacity(2 * p + 1);
    for level in [Level::S, Level::M] {
        for variant in (1..=p).rev() {
            entries.push(PruneConfig {
                level,
                variant,
                width_ratio: ratios.get(level),
                start_layer: start_layers[variant - 1],
            });
        }
    }
    entries.push(PruneConfig::full(spec));

    let widths = entries
        .iter()
        .map(|c| kept_widths(spec, c))
        .collect::<Result<Vec<_>>>()?;
    let sizes: Vec<u64> = widths.iter().map(|w| widths_size(w)).collect();
    if let Some(i) = sizes.windows(2).position(|w| w[0] >= w[1]) {
        return Err(Error::InvalidPool(format!(
            "sizes must strictly increase along the pool, but {} has {} and {} has {}",
            entries[i].label(),
            sizes[i],
            entries[i + 1].label(),
            sizes[i + 1]
        )));
    }
    Ok(ModelPool {
        spec: spec.clone(),
        p,
        ratios,
        entries,
        widths,
        sizes,
    })
}

impl ModelPool {
    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    /// Variants per pruned level.
    pub fn p(&self) -> usize {
        self.p
    }

    pub fn ratios(&self) -> LevelRatios {
        self.ratios
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[PruneConfig] {
        &self.entries
    }

    pub fn entry(&self, idx: usize) -> &PruneConfig {
        &self.entries[idx]
    }

    pub fn size(&self, idx: usize) -> u64 {
        self.sizes[idx]
    }

    pub fn sizes(&self) -> &[u64] {
        &self.sizes
    }

    pub fn widths(&self, idx: usize) -> &[usize] {
        &self.widths[idx]
    }

    /// Index of `L_1`.
    pub fn top(&self) -> usize {
        self.entries.len() - 1
    }

    pub fn index_of(&self, level: Level, variant: usize) -> Option<usize> {
        match level {
            Level::L if variant == 1 => Some(self.top()),
            Level::S | Level::M if (1..=self.p).contains(&variant) => {
                let base = if level == Level::S { 0 } else { self.p };
                Some(base + self.p - variant)
            }
            _ => None,
        }
    }

    pub fn find(&self, cfg: &PruneConfig) -> Option<usize> {
        self.entries.iter().position(|e| e == cfg)
    }

    /// Pool indices holding the variants of `level`.
    pub fn level_range(&self, level: Level) -> Range<usize> {
        match level {
            Level::S => 0..self.p,
            Level::M => self.p..2 * self.p,
            Level::L => 2 * self.p..2 * self.p + 1,
        }
    }

    pub fn level_of(&self, idx: usize) -> Level {
        self.entries[idx].level
    }

    /// True when every coordinate kept by entry `inner` is kept by `outer`.
    pub fn is_sub_slice(&self, inner: usize, outer: usize) -> bool {
        self.widths[inner]
            .iter()
            .zip(&self.widths[outer])
            .all(|(a, b)| a <= b)
    }

    /// Largest entry that is a sub-slice of `received` and fits `capacity`.
    pub fn fit_index(&self, received: usize, capacity: u64) -> Result<usize> {
        if self.sizes[received] <= capacity {
            return Ok(received);
        }
        (0..self.len())
            .filter(|&i| self.sizes[i] <= capacity && self.is_sub_slice(i, received))
            .max_by_key(|&i| self.sizes[i])
            .ok_or(Error::NoFit {
                capacity,
                smallest: self.sizes[0],
            })
    }

    /// Extracts entry `idx` from the full model.
    pub fn prune(&self, global: &ParamSet, idx: usize) -> Result<ParamSet> {
        check_global(global, &self.spec)?;
        slice_to_widths(global, &self.widths[idx])
    }
}

/// Resource-aware pruning restricted to the pool grid: the largest pool entry
/// nested in `received` whose size fits `capacity`.
pub fn fit_to_budget(received: &PruneConfig, capacity: u64, pool: &ModelPool) -> Result<PruneConfig> {
    let idx = pool.find(received).ok_or_else(|| {
        Error::InvalidPruneConfig(format!("{} is not a pool entry", received.label()))
    })?;
    pool.fit_index(idx, capacity).map(|i| *pool.entry(i))
}

// ---------------------------------------------------------------------------
// Shape specs for parameter counting
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LayerKind {
    Dense,
    Conv3x3,
}

impl LayerKind {
    fn kernel_area(self) -> u64 {
        match self {
            LayerKind::Dense => 1,
            LayerKind::Conv3x3 => 9,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShapeLayer {
    pub kind: LayerKind,
    pub in_channels: usize,
    pub out_channels: usize,
    pub prunable_in: bool,
    pub prunable_out: bool,
}

/// Layer shapes of an arbitrary (possibly convolutional) network, used only
/// for parameter counting.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShapeSpec {
    pub layers: Vec<ShapeLayer>,
}

const SHAPE_HEADER: &str = "shapespec v1";
const VGG16_SHAPE: &str = include_str!("../data/vgg16.shape");

impl ShapeSpec {
    pub fn new(layers: Vec<ShapeLayer>) -> Result<Self> {
        let s = Self { layers };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        let (first, last) = match (self.layers.first(), self.layers.last()) {
            (Some(f), Some(l)) => (f, l),
            _ => return Err(Error::ShapeMismatch("shape spec has no layers".into())),
        };
        if first.prunable_in {
            return Err(Error::ShapeMismatch("first layer input must not be prunable".into()));
        }
        if last.prunable_out {
            return Err(Error::ShapeMismatch("last layer output must not be prunable".into()));
        }
        for (k, w) in self.layers.windows(2).enumerate() {
            if w[0].out_channels != w[1].in_channels {
                return Err(Error::ShapeMismatch(format!(
                    "layer {} emits {} channels but layer {} takes {}",
                    k + 1,
                    w[0].out_channels,
                    k + 2,
                    w[1].in_channels
                )));
            }
        }
        Ok(())
    }

    /// The bundled VGG16 (CIFAR, 10 classes) shape file.
    pub fn vgg16() -> Self {
        VGG16_SHAPE.parse().expect("bundled VGG16 shape file is valid")
    }
}

impl FromStr for ShapeSpec {
    type Err = Error;

    /// Parses the line format: a `shapespec v1` header, then one layer per
    /// line as `kind in out prunable_in prunable_out` (`#` starts a comment).
    fn from_str(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(n, l)| (n + 1, l.split('#').next().unwrap_or("").trim()))
            .filter(|(_, l)| !l.is_empty());
        match lines.next() {
            Some((_, h)) if h == SHAPE_HEADER => {}
            other => {
                return Err(Error::ShapeMismatch(format!(
                    "expected header {SHAPE_HEADER:?}, found {:?}",
                    other.map(|(_, l)| l)
                )))
            }
        }
        let flag = |s: &str, n: usize| match s {
            "0" => Ok(false),
            "1" => Ok(true),
            _ => Err(Error::ShapeMismatch(format!("line {n}: flag must be 0 or 1, got {s:?}"))),
        };
        let mut layers = Vec::new();
        for (n, line) in lines {
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 5 {
                return Err(Error::ShapeMismatch(format!(
                    "line {n}: expected 5 fields, found {}",
                    fields.len()
                )));
            }
            let kind = match fields[0] {
                "dense" => LayerKind::Dense,
                "conv3x3" => LayerKind::Conv3x3,
                k => return Err(Error::ShapeMismatch(format!("line {n}: unknown layer kind {k:?}"))),
            };
            let dim = |s: &str| {
                s.parse::<usize>()
                    .ok()
                    .filter(|&d| d > 0)
                    .ok_or_else(|| Error::ShapeMismatch(format!("line {n}: bad channel count {s:?}")))
            };
            layers.push(ShapeLayer {
                kind,
                in_channels: dim(fields[1])?,
                out_channels: dim(fields[2])?,
                prunable_in: flag(fields[3], n)?,
                prunable_out: flag(fields[4], n)?,
            });
        }
        ShapeSpec::new(layers)
    }
}

/// Weight count (no biases) of `shape` pruned by `width_ratio` after layer
/// `start_layer`.
pub fn param_count(shape: &ShapeSpec, width_ratio: f64, start_layer: usize) -> Result<u64> {
    PruneConfig {
        level: Level::S,
        variant: 1,
        width_ratio,
        start_layer,
    }
    .check_ratio()?;
    Ok(shape
        .layers
        .iter()
        .enumerate()
        .map(|(i, l)| {
            let k = i + 1;
            let rows = if l.prunable_out && k > start_layer {
                scaled_width(l.out_channels, width_ratio)
            } else {
                l.out_channels
            };
            let cols = if l.prunable_in && k - 1 > start_layer {
                scaled_width(l.in_channels, width_ratio)
            } else {
                l.in_channels
            };
            rows as u64 * cols as u64 * l.kind.kernel_area()
        })
        .sum())
}
