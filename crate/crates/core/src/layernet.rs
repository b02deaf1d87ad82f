//! Fully connected layer networks.
//!
//! A chain of random invertible maps `G_j(x) = sigma(A_j x + b_j)` produces layer features; the
//! approximation neuron of layer `j` is a shallow net trained on `(G_j o .. o G_1)(x)` with the
//! layer-wise residual scheme from [`crate::cascade`]. Every map carries a certificate: its
//! smallest singular value and the worst reconstruction error of its left inverse
//! `x = A^+ (sigma^{-1}(y) - b)` over a certification grid.
//!
//! When the width is below the input dimension, the first `d = n - width + 1` coordinates are
//! first collapsed onto a level-`k` Hilbert curve ([`crate::hilbert::project_coords`]).

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::activation::Activation;
use crate::cascade::{self, ErrorTrace, FeatureMode, LayerInputs, ResidualStack};
use crate::corpus::TargetFunction;
use crate::error::{Error, Result};
use crate::grid::{estimate_lipschitz, Grid, PointSet};
use crate::hilbert;
use crate::shallow::{rng_for, FitConfig};
use crate::textfmt::{self, Reader};

/// Pre-activations are kept within `[-PRE_ACTIVATION_BAND, PRE_ACTIVATION_BAND]` on the cube.
pub const PRE_ACTIVATION_BAND: f64 = 4.0;

const MAX_DRAWS: usize = 200;
const CERT_GRID_POINTS: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub min_singular_value: f64,
    pub reconstruction_error: f64,
    /// Points per axis of the certification grid over `[-1, 1]^in_dim`.
    pub grid_points: usize,
}

/// `x -> sigma(A x + b)` with `A` of full column rank.
#[derive(Debug, Clone)]
pub struct LayerMap {
    in_dim: usize,
    out_dim: usize,
    /// Row-major `out_dim x in_dim`.
    matrix: Vec<f64>,
    bias: Vec<f64>,
    activation: Activation,
    pinv: DMatrix<f64>,
    certificate: Certificate,
}

impl PartialEq for LayerMap {
    fn eq(&self, other: &Self) -> bool {
        self.in_dim == other.in_dim
            && self.out_dim == other.out_dim
            && self.matrix == other.matrix
            && self.bias == other.bias
            && self.activation == other.activation
            && self.certificate == other.certificate
    }
}

/// Points per axis for a certification grid of at most [`CERT_GRID_POINTS`] points.
pub fn certification_points(dim: usize) -> usize {
    let mut p: usize = 2;
    while p < 17 && (p + 1).checked_pow(dim as u32).is_some_and(|t| t <= CERT_GRID_POINTS) {
        p += 1;
    }
    p
}

fn min_singular_value(m: &DMatrix<f64>) -> f64 {
    m.singular_values().iter().copied().fold(f64::INFINITY, f64::min)
}

impl LayerMap {
    /// Builds and certifies a map from explicit parameters.
    pub fn new(
        in_dim: usize,
        matrix: Vec<f64>,
        bias: Vec<f64>,
        activation: Activation,
        tau: f64,
        tol: f64,
    ) -> Result<Self> {
        let mut map = Self::uncertified(in_dim, matrix, bias, activation, tau)?;
        let grid = Grid::with_budget(in_dim, certification_points(in_dim), CERT_GRID_POINTS)?;
        map.certificate = verify_invertibility(&map, &grid, tol)?;
        Ok(map)
    }

    fn uncertified(
        in_dim: usize,
        matrix: Vec<f64>,
        bias: Vec<f64>,
        activation: Activation,
        tau: f64,
    ) -> Result<Self> {
        if !(tau > 0.0) {
            return Err(Error::InvalidArgument(format!("threshold tau must be > 0, got {tau}")));
        }
        if !activation.is_bounded_invertible() {
            return Err(Error::InvalidArgument(format!(
                "{activation} is not bounded and strictly monotone; layer maps need logistic or tanh"
            )));
        }
        let out_dim = bias.len();
        if in_dim == 0 || out_dim < in_dim {
            return Err(Error::InvalidArgument(format!(
                "layer map needs out_dim >= in_dim >= 1, got {in_dim} -> {out_dim}"
            )));
        }
        if matrix.len() != out_dim * in_dim {
            return Err(Error::DimensionMismatch {
                expected: out_dim * in_dim,
                actual: matrix.len(),
            });
        }
        let a = DMatrix::from_row_slice(out_dim, in_dim, &matrix);
        let smin = min_singular_value(&a);
        if !(smin >= tau) {
            return Err(Error::Certification {
                layer: 0,
                reason: format!("min singular value {smin:e} below threshold {tau:e}"),
            });
        }
        let pinv = a
            .pseudo_inverse(f64::EPSILON)
            .map_err(|e| Error::Certification {
                layer: 0,
                reason: e.to_string(),
            })?;
        Ok(Self {
            in_dim,
            out_dim,
            matrix,
            bias,
            activation,
            pinv,
            certificate: Certificate {
                min_singular_value: smin,
                reconstruction_error: f64::NAN,
                grid_points: 0,
            },
        })
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    pub fn matrix(&self) -> &[f64] {
        &self.matrix
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn certificate(&self) -> &Certificate {
        &self.certificate
    }

    pub fn apply_into(&self, x: &[f64], out: &mut Vec<f64>) {
        debug_assert_eq!(x.len(), self.in_dim);
        out.clear();
        out.extend(self.matrix.chunks_exact(self.in_dim).zip(&self.bias).map(|(row, b)| {
            let z = row.iter().zip(x).map(|(a, v)| a * v).sum::<f64>() + b;
            self.activation.value(z)
        }));
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.out_dim);
        self.apply_into(x, &mut out);
        out
    }

    /// Left inverse; fails if any component sits at or beyond the activation's saturation.
    pub fn invert(&self, y: &[f64]) -> Result<Vec<f64>> {
        if y.len() != self.out_dim {
            return Err(Error::DimensionMismatch {
                expected: self.out_dim,
                actual: y.len(),
            });
        }
        let mut z = Vec::with_capacity(self.out_dim);
        for (v, b) in y.iter().zip(&self.bias) {
            let pre = self.activation.inverse(*v).ok_or_else(|| Error::Certification {
                layer: 0,
                reason: format!("output {v} is saturated; inverse undefined"),
            })?;
            z.push(pre - b);
        }
        let x = &self.pinv * DMatrix::from_column_slice(self.out_dim, 1, &z);
        Ok(x.iter().copied().collect())
    }
}

/// Recomputes the worst `||G^-(G(x)) - x||_2` over `grid`; passes iff it is at most `tol`.
pub fn verify_invertibility(layer: &LayerMap, grid: &Grid, tol: f64) -> Result<Certificate> {
    if grid.dim() != layer.in_dim {
        return Err(Error::DimensionMismatch {
            expected: layer.in_dim,
            actual: grid.dim(),
        });
    }
    let mut worst = 0.0f64;
    for x in grid.points().iter() {
        let back = layer.invert(&layer.apply(x))?;
        let err = back
            .iter()
            .zip(x)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        worst = worst.max(err);
    }
    if !(worst <= tol) {
        return Err(Error::Certification {
            layer: 0,
            reason: format!("reconstruction error {worst:e} exceeds tolerance {tol:e}"),
        });
    }
    Ok(Certificate {
        min_singular_value: layer.certificate.min_singular_value,
        reconstruction_error: worst,
        grid_points: grid.points_per_dim(),
    })
}

/// Samples a random `in_dim -> out_dim` map and certifies it.
///
/// Entries are uniform in `[-1, 1]`, biases in `[-1/2, 1/2]`; rows are shrunk so that
/// `sum |A_ij| + |b_i| <= 4`, which bounds every pre-activation over `[-1, 1]^in_dim`. Draws
/// whose smallest singular value falls below `tau` are discarded.
pub fn make_invertible_layer(
    in_dim: usize,
    out_dim: usize,
    seed: u64,
    tau: f64,
    tol: f64,
    activation: Activation,
) -> Result<LayerMap> {
    if !(tau > 0.0) {
        return Err(Error::InvalidArgument(format!("threshold tau must be > 0, got {tau}")));
    }
    if in_dim == 0 || out_dim < in_dim {
        return Err(Error::InvalidArgument(format!(
            "layer map needs out_dim >= in_dim >= 1, got {in_dim} -> {out_dim}"
        )));
    }
    let mut rng = rng_for(seed, 0x004c_4159_4552);
    for _ in 0..MAX_DRAWS {
        let mut matrix: Vec<f64> = (0..out_dim * in_dim).map(|_| rng.gen_range(-1.0..=1.0)).collect();
        let mut bias: Vec<f64> = (0..out_dim).map(|_| rng.gen_range(-0.5..=0.5)).collect();
        for (row, b) in matrix.chunks_exact_mut(in_dim).zip(bias.iter_mut()) {
            let l1 = row.iter().map(|v| v.abs()).sum::<f64>() + b.abs();
            if l1 > PRE_ACTIVATION_BAND {
                let s = PRE_ACTIVATION_BAND / l1;
                row.iter_mut().for_each(|v| *v *= s);
                *b *= s;
            }
        }
        match LayerMap::new(in_dim, matrix, bias, activation, tau, tol) {
            Ok(map) => return Ok(map),
            Err(Error::Certification { .. }) => continue,
            Err(e) => return Err(e),
        }
    }
    Err(Error::Certification {
        layer: 0,
        reason: format!("no draw in {MAX_DRAWS} attempts reached min singular value {tau:e}"),
    })
}

/// Settings of the layer-map chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainConfig {
    /// Minimum singular value every map must reach.
    pub tau: f64,
    /// Largest accepted reconstruction error.
    pub tol: f64,
    pub activation: Activation,
    /// What each approximation neuron reads besides the chain features.
    pub mode: FeatureMode,
}

impl Default for ChainConfig {
    fn default() -> Self {
        Self {
            tau: 1e-2,
            tol: 1e-8,
            activation: Activation::Tanh,
            mode: FeatureMode::XPlusPrevApprox,
        }
    }
}

/// Hilbert-curve collapse applied before the chain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Reduction {
    /// Number of leading coordinates collapsed, `n - width + 1`.
    pub dims: usize,
    pub level: u32,
    pub lipschitz: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerNetModel {
    n: usize,
    width: usize,
    chain: Vec<LayerMap>,
    stack: ResidualStack,
    reduction: Option<Reduction>,
}

struct ChainInputs(Vec<Vec<f64>>);

impl LayerInputs for ChainInputs {
    fn base(&self, layer: usize) -> &[f64] {
        &self.0[layer]
    }
}

fn chain_features(chain: &[LayerMap], x: &[f64], depth: usize) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(depth);
    for map in &chain[..depth] {
        let prev = out.last().map_or(x, |v| v.as_slice());
        out.push(map.apply(prev));
    }
    out
}

impl LayerNetModel {
    pub fn input_dim(&self) -> usize {
        self.n
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn chain(&self) -> &[LayerMap] {
        &self.chain
    }

    pub fn stack(&self) -> &ResidualStack {
        &self.stack
    }

    pub fn reduction(&self) -> Option<&Reduction> {
        self.reduction.as_ref()
    }

    pub fn depth(&self) -> usize {
        self.stack.depth()
    }

    /// Input to the chain: the point itself, or its Hilbert projection.
    pub fn reduce(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                actual: x.len(),
            });
        }
        match &self.reduction {
            Some(r) => hilbert::project_coords(x, r.dims, r.level),
            None => Ok(x.to_vec()),
        }
    }

    fn eval_reduced(&self, z: &[f64]) -> f64 {
        self.stack
            .value(&ChainInputs(chain_features(&self.chain, z, self.depth())))
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        let z = self.reduce(x)?;
        Ok(self.eval_reduced(&z))
    }

    pub fn eval_prefixes(&self, x: &[f64]) -> Result<Vec<f64>> {
        let z = self.reduce(x)?;
        Ok(self
            .stack
            .prefixes(&ChainInputs(chain_features(&self.chain, &z, self.depth()))))
    }
}

/// Output of the layer-network trainers.
#[derive(Debug, Clone)]
pub struct LayerNetFit {
    pub model: LayerNetModel,
    pub trace: ErrorTrace,
}

/// Error decomposition of a Hilbert-reduced fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    /// `L sqrt(d) / 2^(k+1)`, the displacement bound stated on `[0, 1]^d`.
    pub projection_term_paper: f64,
    /// `L 2 sqrt(d) / 2^(k+1)`, the same bound in `[-1, 1]^n` coordinates.
    pub projection_term_scaled: f64,
    pub reduced_error: f64,
    /// `max |f(x) - model(x)|` over the original grid.
    pub total_measured: f64,
    pub lipschitz_used: f64,
    /// `analytic`, or `estimated` when the target carried no constant.
    pub lipschitz_source: String,
}

impl BoundReport {
    pub fn holds(&self) -> bool {
        self.total_measured <= self.projection_term_scaled + self.reduced_error + BOUND_SLACK
    }
}

/// Absolute slack in the triangle-inequality check.
pub const BOUND_SLACK: f64 = 1e-6;

/// Projection bounds for Lipschitz constant `l`, `d` collapsed coordinates, level `k`:
/// `(unit_cube, scaled)`.
pub fn projection_terms(l: f64, d: usize, level: u32) -> (f64, f64) {
    let unit_cube = l * hilbert::locality_bound(d, level);
    (unit_cube, 2.0 * unit_cube)
}

fn build_chain(input: usize, width: usize, depth: usize, seed: u64, chain: &ChainConfig) -> Result<Vec<LayerMap>> {
    (0..depth)
        .map(|j| {
            let in_dim = if j == 0 { input } else { width };
            let layer_seed = seed ^ (j as u64 + 1).wrapping_mul(0xD1B5_4A32_D192_ED03);
            make_invertible_layer(in_dim, width, layer_seed, chain.tau, chain.tol, chain.activation).map_err(|e| match e {
                Error::Certification { reason, .. } => Error::Certification { layer: j + 1, reason },
                other => other,
            })
        })
        .collect()
}

/// Trains the approximation neurons on the given chain; `targets` are sampled at `points`.
fn train_on_chain(
    n: usize,
    width: usize,
    chain: Vec<LayerMap>,
    points: &PointSet,
    targets: &[f64],
    mode: FeatureMode,
    cfg: &FitConfig,
    reduction: Option<Reduction>,
) -> Result<LayerNetFit> {
    let depth = chain.len();
    let mut tables: Vec<Vec<f64>> = vec![Vec::with_capacity(points.len() * width); depth];
    for x in points.iter() {
        for (t, feat) in tables.iter_mut().zip(chain_features(&chain, x, depth)) {
            t.extend_from_slice(&feat);
        }
    }
    let bases = tables
        .into_iter()
        .map(|t| PointSet::new(width, t))
        .collect::<Result<Vec<_>>>()?;
    let refs: Vec<&PointSet> = bases.iter().collect();
    let fit = cascade::train_stack(&refs, targets, width, mode, cfg)?;
    let used = fit.stack.depth();
    let mut chain = chain;
    chain.truncate(used);
    Ok(LayerNetFit {
        model: LayerNetModel {
            n,
            width,
            chain,
            stack: fit.stack,
            reduction,
        },
        trace: fit.trace,
    })
}

/// Layer network with `width >= n`: every map is invertible and layer `j` reads
/// `(G_j o .. o G_1)(x)`.
pub fn train_layernet_ge(
    f: &TargetFunction,
    points: &PointSet,
    depth: usize,
    width: usize,
    cfg: &FitConfig,
    chain: &ChainConfig,
) -> Result<LayerNetFit> {
    if points.dim() != f.n {
        return Err(Error::DimensionMismatch {
            expected: f.n,
            actual: points.dim(),
        });
    }
    if width < f.n {
        return Err(Error::InvalidArgument(format!(
            "width {width} is below the input dimension {}; use the reduced variant",
            f.n
        )));
    }
    if depth == 0 {
        return Err(Error::InvalidArgument("depth must be >= 1".into()));
    }
    let maps = build_chain(f.n, width, depth, cfg.seed, chain)?;
    let targets = points.evaluate(&f.as_fn())?;
    train_on_chain(f.n, width, maps, points, &targets, chain.mode, cfg, None)
}

/// Like [`train_layernet_ge`] but on a caller-supplied chain.
pub fn train_layernet_with_chain(
    f: &TargetFunction,
    points: &PointSet,
    maps: Vec<LayerMap>,
    cfg: &FitConfig,
    mode: FeatureMode,
) -> Result<LayerNetFit> {
    let Some(first) = maps.first() else {
        return Err(Error::InvalidArgument("empty chain".into()));
    };
    if first.in_dim() != f.n || points.dim() != f.n {
        return Err(Error::DimensionMismatch {
            expected: f.n,
            actual: first.in_dim(),
        });
    }
    let width = first.out_dim();
    if maps.iter().skip(1).any(|m| m.in_dim() != width || m.out_dim() != width) {
        return Err(Error::InvalidArgument("chain maps must be width -> width after the first".into()));
    }
    let targets = points.evaluate(&f.as_fn())?;
    train_on_chain(f.n, width, maps, points, &targets, mode, cfg, None)
}

/// The distinct projections of `grid`'s points, in first-seen order.
pub fn projected_points(points: &PointSet, dims: usize, level: u32) -> Result<PointSet> {
    let mut seen = HashSet::new();
    let mut coords = Vec::new();
    let mut out_dim = 0;
    for x in points.iter() {
        let z = hilbert::project_coords(x, dims, level)?;
        out_dim = z.len();
        let key: Vec<u64> = z.iter().map(|v| v.to_bits()).collect();
        if seen.insert(key) {
            coords.extend_from_slice(&z);
        }
    }
    PointSet::new(out_dim.max(1), coords)
}

/// Layer network with `width < n`.
///
/// The first `d = n - width + 1` coordinates are collapsed to one Hilbert coordinate at level
/// `level`, leaving `width` inputs. The chain is trained on the reduced target
/// `f~(z) = f(lift(z))` sampled at the projections of the grid points, so every point the
/// pipeline will see during measurement is a training point. Returns the fit and the error
/// decomposition; with an analytic Lipschitz constant a violated triangle bound is an error.
pub fn train_layernet_lt(
    f: &TargetFunction,
    grid: &Grid,
    depth: usize,
    width: usize,
    level: u32,
    cfg: &FitConfig,
    chain: &ChainConfig,
) -> Result<(LayerNetFit, BoundReport)> {
    let n = f.n;
    if grid.dim() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: grid.dim(),
        });
    }
    if width == 0 || width > n {
        return Err(Error::InvalidArgument(format!(
            "reduced width must lie in 1..={n}, got {width}"
        )));
    }
    if depth == 0 {
        return Err(Error::InvalidArgument("depth must be >= 1".into()));
    }
    let dims = n - width + 1;
    let (lipschitz, source) = match f.lipschitz {
        Some(l) => (l, "analytic"),
        None => {
            log::warn!("{} has no analytic Lipschitz constant; using a grid estimate", f.name);
            (estimate_lipschitz(&f.as_fn(), grid)?, "estimated")
        }
    };

    let reduced = projected_points(grid.points(), dims, level)?;
    let lifted_target = |z: &[f64]| -> f64 {
        match hilbert::lift_coords(z, dims, level, n) {
            Ok(x) => f.eval(&x),
            Err(_) => f64::NAN,
        }
    };
    let targets = reduced.evaluate(&lifted_target)?;
    let maps = build_chain(width, width, depth, cfg.seed, chain)?;
    let reduction = Reduction {
        dims,
        level,
        lipschitz,
    };
    let fit = train_on_chain(n, width, maps, &reduced, &targets, chain.mode, cfg, Some(reduction))?;

    let mut total = 0.0f64;
    for x in grid.points().iter() {
        let d = (f.eval(x) - fit.model.eval(x)?).abs();
        if !d.is_finite() {
            return Err(Error::NonFiniteOracle { point: x.to_vec() });
        }
        total = total.max(d);
    }
    let (unit_cube, scaled) = projection_terms(lipschitz, dims, level);
    let report = BoundReport {
        projection_term_paper: unit_cube,
        projection_term_scaled: scaled,
        reduced_error: fit.trace.final_error(),
        total_measured: total,
        lipschitz_used: lipschitz,
        lipschitz_source: source.to_string(),
    };
    if !report.holds() {
        let bound = scaled + report.reduced_error + BOUND_SLACK;
        if source == "analytic" {
            return Err(Error::BoundViolation {
                measured: total,
                bound,
            });
        }
        log::warn!("estimated-Lipschitz bound {bound:e} below measured error {total:e}");
    }
    Ok((fit, report))
}

fn write_map(out: &mut String, map: &LayerMap) {
    textfmt::write_kv(out, "in", map.in_dim);
    textfmt::write_kv(out, "out", map.out_dim);
    textfmt::write_kv(out, "activation", map.activation);
    textfmt::write_floats(out, "matrix", &map.matrix);
    textfmt::write_floats(out, "bias", &map.bias);
    textfmt::write_floats(out, "min_singular_value", &[map.certificate.min_singular_value]);
    textfmt::write_floats(out, "reconstruction_error", &[map.certificate.reconstruction_error]);
    textfmt::write_kv(out, "cert_grid_points", map.certificate.grid_points);
}

fn read_map(r: &mut Reader<'_>) -> Result<LayerMap> {
    let in_dim: usize = r.parsed("in")?;
    let out_dim: usize = r.parsed("out")?;
    let activation: Activation = r.parsed("activation")?;
    let matrix = r.floats("matrix", in_dim * out_dim)?;
    let bias = r.floats("bias", out_dim)?;
    let smin = r.floats("min_singular_value", 1)?[0];
    let recon = r.floats("reconstruction_error", 1)?[0];
    let grid_points: usize = r.parsed("cert_grid_points")?;
    // Stored maps already passed certification; only rank is rechecked here.
    let mut map = LayerMap::uncertified(in_dim, matrix, bias, activation, f64::MIN_POSITIVE)?;
    map.certificate = Certificate {
        min_singular_value: smin,
        reconstruction_error: recon,
        grid_points,
    };
    Ok(map)
}

/// Text form: `layernet-model`, `n`, `width`, `reduction none` or `reduction <d> <k> <L>`,
/// `chain <len>` followed by each map (`map <j>`, dims, activation, parameters, certificate),
/// then the approximation stack as in the cascade format.
impl fmt::Display for LayerNetModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut s = String::from("layernet-model\n");
        textfmt::write_kv(&mut s, "n", self.n);
        textfmt::write_kv(&mut s, "width", self.width);
        match &self.reduction {
            None => textfmt::write_kv(&mut s, "reduction", "none"),
            Some(r) => textfmt::write_kv(&mut s, "reduction", format!("{} {} {:e}", r.dims, r.level, r.lipschitz)),
        }
        textfmt::write_kv(&mut s, "chain", self.chain.len());
        for (j, map) in self.chain.iter().enumerate() {
            textfmt::write_kv(&mut s, "map", j + 1);
            write_map(&mut s, map);
        }
        cascade::write_stack(&self.stack, &mut s);
        f.write_str(&s)
    }
}

impl FromStr for LayerNetModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut r = Reader::new(s);
        r.field("layernet-model")?;
        let n: usize = r.parsed("n")?;
        let width: usize = r.parsed("width")?;
        let red = r.field("reduction")?;
        let reduction = if red == "none" {
            None
        } else {
            let parts: Vec<&str> = red.split_whitespace().collect();
            let bad = || Error::Parse {
                line: 0,
                message: format!("bad reduction '{red}'"),
            };
            if parts.len() != 3 {
                return Err(bad());
            }
            Some(Reduction {
                dims: parts[0].parse().map_err(|_| bad())?,
                level: parts[1].parse().map_err(|_| bad())?,
                lipschitz: parts[2].parse().map_err(|_| bad())?,
            })
        };
        let len: usize = r.parsed("chain")?;
        let mut chain = Vec::with_capacity(len);
        for j in 0..len {
            let idx: usize = r.parsed("map")?;
            if idx != j + 1 {
                return Err(Error::Parse {
                    line: 0,
                    message: format!("expected map {}, found {idx}", j + 1),
                });
            }
            chain.push(read_map(&mut r)?);
        }
        let stack = cascade::read_stack(&mut r)?;
        r.finish()?;
        if stack.depth() != chain.len() {
            return Err(Error::Parse {
                line: 0,
                message: format!("{} maps for {} layers", chain.len(), stack.depth()),
            });
        }
        Ok(Self {
            n,
            width,
            chain,
            stack,
            reduction,
        })
    }
}
