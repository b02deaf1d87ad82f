//! Layer-wise residual training.
//!
//! Layer 1 is fit to `f`; its sup error `e_0` on the training points normalises the residual,
//! `r_2 = (f - g_1) / e_0`, which therefore has sup norm exactly 1. Layer `j` is fit to `r_j`,
//! and so on. The composite
//!
//! ```text
//! F_l = g_1 + e_0 g_2 + e_0 e_1 g_3 + ... + (e_0 ... e_{l-2}) g_l
//! ```
//!
//! satisfies `f - F_l = (e_0 ... e_{l-1}) r_{l+1}`, so its sup error on the training points is
//! the product of the per-layer errors. A layer that cannot beat the zero network is replaced by
//! it, which pins that layer's error at 1 and keeps the product non-increasing.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::TargetFunction;
use crate::error::{Error, Result};
use crate::grid::{sup_norm, PointSet};
use crate::shallow::{fit_samples, FitConfig, ShallowNet};
use crate::textfmt::{self, Reader};

/// Errors below this count as an exact fit; no further normalisation is attempted.
pub const EXACT_FIT_ERROR: f64 = 1e-12;

/// What each layer after the first sees besides its base inputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FeatureMode {
    /// The base inputs only.
    XOnly,
    /// Base inputs plus the running approximant `F_{j-1}(x)` (cascade wiring).
    XPlusPrevApprox,
    /// Base inputs plus every hidden output of the previous layer (input-residual wiring).
    XPlusPrevLayer,
}

impl FeatureMode {
    pub const ALL: [FeatureMode; 3] = [
        FeatureMode::XOnly,
        FeatureMode::XPlusPrevApprox,
        FeatureMode::XPlusPrevLayer,
    ];

    /// Input width of layer `layer` (0-based) for base width `base` and hidden width `width`.
    pub fn input_dim(self, base: usize, width: usize, layer: usize) -> usize {
        match (self, layer) {
            (_, 0) | (FeatureMode::XOnly, _) => base,
            (FeatureMode::XPlusPrevApprox, _) => base + 1,
            (FeatureMode::XPlusPrevLayer, _) => base + width,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            FeatureMode::XOnly => "x-only",
            FeatureMode::XPlusPrevApprox => "x-plus-prev-approx",
            FeatureMode::XPlusPrevLayer => "x-plus-prev-layer",
        }
    }
}

impl fmt::Display for FeatureMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FeatureMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "x-only" => Ok(FeatureMode::XOnly),
            "x-plus-prev-approx" | "cascade" => Ok(FeatureMode::XPlusPrevApprox),
            "x-plus-prev-layer" | "input-residual" => Ok(FeatureMode::XPlusPrevLayer),
            other => Err(Error::InvalidArgument(format!("unknown feature mode '{other}'"))),
        }
    }
}

/// Per-layer measured errors and their running products.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorTrace {
    /// `e_0, e_1, ..`: layer 1's error against `f`, then each later layer's error against its
    /// unit-norm residual.
    pub per_layer: Vec<f64>,
    /// `cumulative[j] = cumulative[j - 1] * per_layer[j]`.
    pub cumulative: Vec<f64>,
}

impl ErrorTrace {
    fn push(&mut self, e: f64) {
        let c = self.cumulative.last().map_or(e, |c| c * e);
        self.per_layer.push(e);
        self.cumulative.push(c);
    }

    pub fn initial_error(&self) -> f64 {
        self.per_layer[0]
    }

    pub fn final_error(&self) -> f64 {
        *self.cumulative.last().expect("trace has at least one layer")
    }

    pub fn depth(&self) -> usize {
        self.per_layer.len()
    }

    /// CSV with columns `layer,per_layer_error,cumulative_error`, layers numbered from 1.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("layer,per_layer_error,cumulative_error\n");
        for (j, (e, c)) in self.per_layer.iter().zip(&self.cumulative).enumerate() {
            out.push_str(&format!("{},{e:.16e},{c:.16e}\n", j + 1));
        }
        out
    }
}

/// Base inputs of each layer at one point.
pub(crate) trait LayerInputs {
    fn base(&self, layer: usize) -> &[f64];
}

/// Every layer reads the same point.
pub(crate) struct SameInputs<'a>(pub &'a [f64]);

impl LayerInputs for SameInputs<'_> {
    fn base(&self, _: usize) -> &[f64] {
        self.0
    }
}

impl LayerInputs for Vec<Vec<f64>> {
    fn base(&self, layer: usize) -> &[f64] {
        &self[layer]
    }
}

/// The trained approximation-neuron chain shared by cascade and layer networks.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualStack {
    mode: FeatureMode,
    layers: Vec<ShallowNet>,
    /// `e_0 .. e_{l-2}`; layer `j` (0-based) is weighted by `scales[..j].product()`.
    scales: Vec<f64>,
}

impl ResidualStack {
    pub fn new(mode: FeatureMode, layers: Vec<ShallowNet>, scales: Vec<f64>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidArgument("a stack needs at least one layer".into()));
        }
        if scales.len() + 1 != layers.len() {
            return Err(Error::InvalidArgument(format!(
                "{} layers need {} scales, got {}",
                layers.len(),
                layers.len() - 1,
                scales.len()
            )));
        }
        if let Some(s) = scales.iter().find(|s| !(0.0..=1.0).contains(*s)) {
            return Err(Error::InvalidArgument(format!("scale {s} outside [0, 1]")));
        }
        Ok(Self {
            mode,
            layers,
            scales,
        })
    }

    pub fn mode(&self) -> FeatureMode {
        self.mode
    }

    pub fn layers(&self) -> &[ShallowNet] {
        &self.layers
    }

    pub fn scales(&self) -> &[f64] {
        &self.scales
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    /// `F_1(x), .., F_depth(x)`.
    pub(crate) fn prefixes(&self, inputs: &impl LayerInputs) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.depth());
        let mut feat = Vec::new();
        let mut hidden = Vec::new();
        let mut total = 0.0;
        let mut coeff = 1.0;
        for (j, layer) in self.layers.iter().enumerate() {
            build_features(self.mode, j, inputs.base(j), total, &hidden, &mut feat);
            let v = layer.value(&feat);
            total = if j == 0 { v } else { total + coeff * v };
            out.push(total);
            if self.mode == FeatureMode::XPlusPrevLayer {
                layer.hidden(&feat, &mut hidden);
            }
            if let Some(s) = self.scales.get(j) {
                coeff *= s;
            }
        }
        out
    }

    pub(crate) fn value(&self, inputs: &impl LayerInputs) -> f64 {
        *self.prefixes(inputs).last().expect("non-empty stack")
    }

    /// Product of the first `j` scales: the weight of layer `j` (0-based).
    pub fn coefficient(&self, j: usize) -> f64 {
        self.scales[..j].iter().product()
    }

    fn write_body(&self, out: &mut String) {
        textfmt::write_kv(out, "mode", self.mode);
        textfmt::write_kv(out, "depth", self.depth());
        textfmt::write_floats(out, "scales", &self.scales);
        for (j, layer) in self.layers.iter().enumerate() {
            textfmt::write_kv(out, "layer", j + 1);
            layer.write_body(out);
        }
    }

    fn read_body(r: &mut Reader<'_>) -> Result<Self> {
        let mode: FeatureMode = r.parsed("mode")?;
        let depth: usize = r.parsed("depth")?;
        if depth == 0 {
            return Err(Error::Parse {
                line: 0,
                message: "depth must be >= 1".into(),
            });
        }
        let scales = r.floats("scales", depth - 1)?;
        let mut layers = Vec::with_capacity(depth);
        for j in 0..depth {
            let idx: usize = r.parsed("layer")?;
            if idx != j + 1 {
                return Err(Error::Parse {
                    line: 0,
                    message: format!("expected layer {}, found {idx}", j + 1),
                });
            }
            layers.push(ShallowNet::read_body(r)?);
        }
        Self::new(mode, layers, scales)
    }
}

fn build_features(
    mode: FeatureMode,
    layer: usize,
    base: &[f64],
    running: f64,
    prev_hidden: &[f64],
    out: &mut Vec<f64>,
) {
    out.clear();
    out.extend_from_slice(base);
    if layer > 0 {
        match mode {
            FeatureMode::XOnly => {}
            FeatureMode::XPlusPrevApprox => out.push(running),
            FeatureMode::XPlusPrevLayer => out.extend_from_slice(prev_hidden),
        }
    }
}

/// Everything produced by one layer-wise training run.
#[derive(Debug, Clone)]
pub(crate) struct StackFit {
    pub stack: ResidualStack,
    pub trace: ErrorTrace,
    /// The normalised target tables `r_1 = f, r_2, ..` each layer was fit to.
    pub residuals: Vec<Vec<f64>>,
}

fn layer_seed(seed: u64, layer: usize) -> u64 {
    seed ^ (layer as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Runs the layer-wise algorithm; `bases[j]` holds layer `j`'s base inputs at every point.
pub(crate) fn train_stack(
    bases: &[&PointSet],
    targets: &[f64],
    width: usize,
    mode: FeatureMode,
    cfg: &FitConfig,
) -> Result<StackFit> {
    let depth = bases.len();
    if depth == 0 || width == 0 {
        return Err(Error::InvalidArgument("depth and width must be >= 1".into()));
    }
    let m = targets.len();
    if bases.iter().any(|b| b.len() != m) {
        return Err(Error::InvalidArgument("base tables disagree on point count".into()));
    }
    let norm = sup_norm(targets);
    if norm > 1.0 {
        return Err(Error::InvalidArgument(format!(
            "target sup norm {norm} exceeds 1; rescale before training"
        )));
    }

    let mut residual = targets.to_vec();
    let mut residuals = vec![residual.clone()];
    let mut running = vec![0.0; m];
    let mut hidden: Vec<Vec<f64>> = vec![Vec::new(); m];
    let mut layers = Vec::with_capacity(depth);
    let mut scales = Vec::with_capacity(depth);
    let mut trace = ErrorTrace {
        per_layer: Vec::new(),
        cumulative: Vec::new(),
    };
    let mut coeff = 1.0;
    let mut feat = Vec::new();

    for j in 0..depth {
        let dim = mode.input_dim(bases[j].dim(), width, j);
        let mut coords = Vec::with_capacity(m * dim);
        for p in 0..m {
            build_features(mode, j, bases[j].point(p), running[p], &hidden[p], &mut feat);
            coords.extend_from_slice(&feat);
        }
        let features = PointSet::new(dim, coords)?;
        let fit = fit_samples(&features, &residual, width, &cfg.with_seed(layer_seed(cfg.seed, j)), None)?;

        // A layer must beat the zero network, whose error is the residual's own sup norm.
        let ceiling = sup_norm(&residual);
        let (net, err) = if fit.error >= ceiling {
            log::debug!("layer {} fell back to zero (error {:e})", j + 1, fit.error);
            (ShallowNet::zeros(dim, width, cfg.activation), ceiling)
        } else {
            (fit.net, fit.error)
        };

        let outputs: Vec<f64> = features.iter().map(|x| net.value(x)).collect();
        for p in 0..m {
            running[p] = if j == 0 {
                outputs[p]
            } else {
                running[p] + coeff * outputs[p]
            };
        }
        if mode == FeatureMode::XPlusPrevLayer {
            for (h, x) in hidden.iter_mut().zip(features.iter()) {
                net.hidden(x, h);
            }
        }
        layers.push(net);
        trace.push(err);

        if err < EXACT_FIT_ERROR || j + 1 == depth {
            break;
        }
        for (r, o) in residual.iter_mut().zip(&outputs) {
            *r = (*r - o) / err;
        }
        if residual.iter().any(|v| !v.is_finite()) {
            return Err(Error::Divergence(format!(
                "non-finite residual after layer {}",
                j + 1
            )));
        }
        residuals.push(residual.clone());
        scales.push(err);
        coeff *= err;
    }

    Ok(StackFit {
        stack: ResidualStack::new(mode, layers, scales)?,
        trace,
        residuals,
    })
}

/// A residual stack reading the raw coordinates of `I^n`.
#[derive(Debug, Clone, PartialEq)]
pub struct CascadeModel {
    n: usize,
    width: usize,
    stack: ResidualStack,
}

/// Output of [`train_cascade`].
#[derive(Debug, Clone)]
pub struct CascadeFit {
    pub model: CascadeModel,
    pub trace: ErrorTrace,
    /// Residual tables `r_1 = f, r_2, ..` on the training points, as fit by each layer.
    pub residuals: Vec<Vec<f64>>,
}

/// Trains up to `depth` layers of `width` units against `f` sampled on `points`.
///
/// Stops early once a layer's error drops below [`EXACT_FIT_ERROR`].
pub fn train_cascade(
    f: &TargetFunction,
    points: &PointSet,
    depth: usize,
    width: usize,
    mode: FeatureMode,
    cfg: &FitConfig,
) -> Result<CascadeFit> {
    if points.dim() != f.n {
        return Err(Error::DimensionMismatch {
            expected: f.n,
            actual: points.dim(),
        });
    }
    let targets = points.evaluate(&f.as_fn())?;
    let bases = vec![points; depth];
    let fit = train_stack(&bases, &targets, width, mode, cfg)?;
    Ok(CascadeFit {
        model: CascadeModel {
            n: f.n,
            width,
            stack: fit.stack,
        },
        trace: fit.trace,
        residuals: fit.residuals,
    })
}

impl CascadeModel {
    pub fn new(n: usize, width: usize, stack: ResidualStack) -> Result<Self> {
        for (j, layer) in stack.layers().iter().enumerate() {
            let want = stack.mode().input_dim(n, width, j);
            if layer.input_dim() != want {
                return Err(Error::DimensionMismatch {
                    expected: want,
                    actual: layer.input_dim(),
                });
            }
        }
        Ok(Self { n, width, stack })
    }

    pub fn input_dim(&self) -> usize {
        self.n
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn mode(&self) -> FeatureMode {
        self.stack.mode
    }

    pub fn depth(&self) -> usize {
        self.stack.depth()
    }

    pub fn stack(&self) -> &ResidualStack {
        &self.stack
    }

    pub fn scales(&self) -> &[f64] {
        self.stack.scales()
    }

    /// `F_depth(x)`.
    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x)?;
        Ok(self.stack.value(&SameInputs(x)))
    }

    /// `F_1(x), .., F_depth(x)`.
    pub fn eval_prefixes(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(x)?;
        Ok(self.stack.prefixes(&SameInputs(x)))
    }

    /// `r_{j+1} = (f - F_j) / (e_0 ... e_{j-1})` for `1 <= j < depth`.
    pub fn residual_oracle<'a>(
        &'a self,
        f: &'a dyn Fn(&[f64]) -> f64,
        j: usize,
    ) -> Result<impl Fn(&[f64]) -> f64 + 'a> {
        if j == 0 || j >= self.depth() {
            return Err(Error::InvalidArgument(format!(
                "residual layer {j} outside 1..{}",
                self.depth()
            )));
        }
        if let Some(&s) = self.scales()[..j].iter().find(|&&s| s < EXACT_FIT_ERROR) {
            return Err(Error::Degenerate { scale: s });
        }
        let scale = self.stack.coefficient(j);
        Ok(move |x: &[f64]| (f(x) - self.stack.prefixes(&SameInputs(x))[j - 1]) / scale)
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                actual: x.len(),
            });
        }
        Ok(())
    }
}

/// Text form: `cascade-model`, `n`, `width`, then the stack (`mode`, `depth`, `scales`) and each
/// layer as a `layer <j>` line followed by its shallow-net body.
impl fmt::Display for CascadeModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut s = String::from("cascade-model\n");
        textfmt::write_kv(&mut s, "n", self.n);
        textfmt::write_kv(&mut s, "width", self.width);
        self.stack.write_body(&mut s);
        f.write_str(&s)
    }
}

impl FromStr for CascadeModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut r = Reader::new(s);
        r.field("cascade-model")?;
        let n = r.parsed("n")?;
        let width = r.parsed("width")?;
        let stack = ResidualStack::read_body(&mut r)?;
        r.finish()?;
        Self::new(n, width, stack)
    }
}

pub(crate) fn write_stack(stack: &ResidualStack, out: &mut String) {
    stack.write_body(out);
}

pub(crate) fn read_stack(r: &mut Reader<'_>) -> Result<ResidualStack> {
    ResidualStack::read_body(r)
}
