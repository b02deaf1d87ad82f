//! Single-hidden-layer networks `x -> sum_k a_k sigma(<w_k, x> + b_k)` and their trainer.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::activation::Activation;
use crate::error::{Error, Result};
use crate::grid::{sup_norm_tables, PointSet};
use crate::textfmt::{self, Reader};

/// Grid MSE below which training stops early.
pub const EXACT_FIT_MSE: f64 = 1e-16;

#[derive(Debug, Clone, PartialEq)]
pub struct ShallowNet {
    n: usize,
    activation: Activation,
    outer: Vec<f64>,
    biases: Vec<f64>,
    /// Unit-major: `weights[k * n + i]` is `w_k[i]`.
    weights: Vec<f64>,
}

impl ShallowNet {
    pub fn new(
        n: usize,
        activation: Activation,
        outer: Vec<f64>,
        biases: Vec<f64>,
        weights: Vec<f64>,
    ) -> Result<Self> {
        let units = outer.len();
        if n == 0 || units == 0 {
            return Err(Error::InvalidArgument(
                "a shallow net needs n >= 1 and at least one unit".into(),
            ));
        }
        if biases.len() != units {
            return Err(Error::DimensionMismatch {
                expected: units,
                actual: biases.len(),
            });
        }
        if weights.len() != units * n {
            return Err(Error::DimensionMismatch {
                expected: units * n,
                actual: weights.len(),
            });
        }
        Ok(Self {
            n,
            activation,
            outer,
            biases,
            weights,
        })
    }

    /// The zero network: every parameter is 0.
    pub fn zeros(n: usize, units: usize, activation: Activation) -> Self {
        Self {
            n,
            activation,
            outer: vec![0.0; units],
            biases: vec![0.0; units],
            weights: vec![0.0; units * n],
        }
    }

    pub fn input_dim(&self) -> usize {
        self.n
    }

    pub fn units(&self) -> usize {
        self.outer.len()
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn outer(&self) -> &[f64] {
        &self.outer
    }

    pub fn biases(&self) -> &[f64] {
        &self.biases
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `(n + 2) N`.
    pub fn param_count(&self) -> usize {
        (self.n + 2) * self.units()
    }

    /// Flat parameters in the order `a_1..a_N, b_1..b_N, w_1..w_N` (each `w_k` of length `n`).
    pub fn params(&self) -> Vec<f64> {
        let mut p = Vec::with_capacity(self.param_count());
        p.extend_from_slice(&self.outer);
        p.extend_from_slice(&self.biases);
        p.extend_from_slice(&self.weights);
        p
    }

    pub fn from_params(n: usize, units: usize, activation: Activation, params: &[f64]) -> Result<Self> {
        if params.len() != (n + 2) * units {
            return Err(Error::DimensionMismatch {
                expected: (n + 2) * units,
                actual: params.len(),
            });
        }
        let (a, rest) = params.split_at(units);
        let (b, w) = rest.split_at(units);
        Self::new(n, activation, a.to_vec(), b.to_vec(), w.to_vec())
    }

    #[inline]
    fn pre_activation(&self, k: usize, x: &[f64]) -> f64 {
        let w = &self.weights[k * self.n..(k + 1) * self.n];
        w.iter().zip(x).map(|(wi, xi)| wi * xi).sum::<f64>() + self.biases[k]
    }

    /// Evaluation without the dimension check; `x.len()` must equal `input_dim()`.
    #[inline]
    pub fn value(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.n);
        (0..self.units())
            .map(|k| self.outer[k] * self.activation.value(self.pre_activation(k, x)))
            .sum()
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x)?;
        Ok(self.value(x))
    }

    /// Hidden-unit outputs `sigma(<w_k, x> + b_k)`.
    pub fn hidden(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend((0..self.units()).map(|k| self.activation.value(self.pre_activation(k, x))));
    }

    /// Gradient of `weight * eval(x)` with respect to [`params`](Self::params).
    pub fn grad_params(&self, x: &[f64], weight: f64) -> Result<Vec<f64>> {
        self.check_dim(x)?;
        let units = self.units();
        let mut g = vec![0.0; self.param_count()];
        let (ga, rest) = g.split_at_mut(units);
        let (gb, gw) = rest.split_at_mut(units);
        for k in 0..units {
            let (s, ds) = self.activation.value_and_derivative(self.pre_activation(k, x));
            ga[k] = weight * s;
            let delta = weight * self.outer[k] * ds;
            gb[k] = delta;
            for (g, xi) in gw[k * self.n..(k + 1) * self.n].iter_mut().zip(x) {
                *g = delta * xi;
            }
        }
        Ok(g)
    }

    /// The same function with extra zero-output units appended.
    ///
    /// New units take inner parameters from `fill` so that they can train; their outer
    /// coefficients are 0.
    pub fn padded(&self, units: usize, mut fill: impl FnMut() -> f64) -> Self {
        let mut net = self.clone();
        for _ in self.units()..units {
            net.outer.push(0.0);
            net.biases.push(fill());
            for _ in 0..self.n {
                net.weights.push(fill());
            }
        }
        net
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

    pub(crate) fn write_body(&self, out: &mut String) {
        textfmt::write_kv(out, "n", self.n);
        textfmt::write_kv(out, "units", self.units());
        textfmt::write_kv(out, "activation", self.activation);
        textfmt::write_floats(out, "a", &self.outer);
        textfmt::write_floats(out, "b", &self.biases);
        textfmt::write_floats(out, "w", &self.weights);
    }

    pub(crate) fn read_body(r: &mut Reader<'_>) -> Result<Self> {
        let n: usize = r.parsed("n")?;
        let units: usize = r.parsed("units")?;
        let activation: Activation = r.parsed("activation")?;
        let a = r.floats("a", units)?;
        let b = r.floats("b", units)?;
        let w = r.floats("w", units * n)?;
        Self::new(n, activation, a, b, w)
    }
}

/// Text form: a `shallow-net` line followed by `n`, `units`, `activation`, then the parameter
/// arrays `a`, `b`, `w` in [`ShallowNet::params`] order.
impl fmt::Display for ShallowNet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut s = String::from("shallow-net\n");
        self.write_body(&mut s);
        f.write_str(&s)
    }
}

impl FromStr for ShallowNet {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut r = Reader::new(s);
        r.field("shallow-net")?;
        let net = Self::read_body(&mut r)?;
        r.finish()?;
        Ok(net)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Optimizer {
    /// Plain full-batch gradient descent.
    Gd,
    /// Full-batch Adam (beta1 = 0.9, beta2 = 0.999).
    Adam,
}

impl FromStr for Optimizer {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gd" => Ok(Optimizer::Gd),
            "adam" => Ok(Optimizer::Adam),
            other => Err(Error::InvalidArgument(format!("unknown optimizer '{other}'"))),
        }
    }
}

impl fmt::Display for Optimizer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Optimizer::Gd => "gd",
            Optimizer::Adam => "adam",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub seed: u64,
    pub restarts: usize,
    pub iterations: usize,
    pub step_size: f64,
    /// Step at iteration `t` is `step_size / (1 + t * step_decay)`.
    pub step_decay: f64,
    pub init_scale: f64,
    pub activation: Activation,
    pub optimizer: Optimizer,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            restarts: 8,
            iterations: 5000,
            step_size: 0.05,
            step_decay: 1e-3,
            init_scale: 2.0,
            activation: Activation::Tanh,
            optimizer: Optimizer::Adam,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        if self.restarts == 0 || self.iterations == 0 {
            return Err(Error::InvalidArgument(
                "restarts and iterations must be >= 1".into(),
            ));
        }
        if !(self.step_size > 0.0) || !self.step_size.is_finite() {
            return Err(Error::InvalidArgument("step_size must be > 0".into()));
        }
        if !(self.step_decay > 0.0 && self.step_decay <= 1.0) {
            return Err(Error::InvalidArgument("step_decay must lie in (0, 1]".into()));
        }
        if !(self.init_scale > 0.0) || !self.init_scale.is_finite() {
            return Err(Error::InvalidArgument("init_scale must be > 0".into()));
        }
        Ok(())
    }

    /// Same settings, different seed.
    pub fn with_seed(&self, seed: u64) -> Self {
        Self {
            seed,
            ..self.clone()
        }
    }
}

/// Independent RNG stream `stream` of `seed`.
pub(crate) fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Result of [`fit_samples`].
#[derive(Debug, Clone)]
pub struct Fit {
    pub net: ShallowNet,
    /// `max |net(x) - y|` over the training points.
    pub error: f64,
    /// Candidate that won the selection (see [`fit_samples`]).
    pub selected: usize,
    /// Restarts abandoned because the loss went non-finite.
    pub diverged: usize,
}

/// Fits `units` units to `targets` at `inputs` by full-batch descent on the mean squared error.
///
/// Candidates are indexed in this order: when `warm` is given, the zero-padded warm net itself
/// (0), then one trained restart starting from it (1); then fresh restarts whose inner
/// parameters are uniform in `[-init_scale, init_scale]` with outer coefficients 0. The
/// candidate with the smallest sup-norm error over `inputs` wins, ties going to the lower index.
pub fn fit_samples(
    inputs: &PointSet,
    targets: &[f64],
    units: usize,
    cfg: &FitConfig,
    warm: Option<&ShallowNet>,
) -> Result<Fit> {
    cfg.validate()?;
    if units == 0 {
        return Err(Error::InvalidArgument("units must be >= 1".into()));
    }
    if targets.len() != inputs.len() {
        return Err(Error::DimensionMismatch {
            expected: inputs.len(),
            actual: targets.len(),
        });
    }
    if inputs.is_empty() {
        return Err(Error::InvalidArgument("no training points".into()));
    }
    if let Some(x) = targets.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFiniteOracle {
            point: inputs.point(x).to_vec(),
        });
    }
    let n = inputs.dim();
    let mut starts: Vec<(ShallowNet, bool)> = Vec::with_capacity(cfg.restarts + 2);
    if let Some(w) = warm {
        if w.input_dim() != n || w.units() > units {
            return Err(Error::InvalidArgument(format!(
                "warm start has shape ({}, {}), need input {n} and at most {units} units",
                w.input_dim(),
                w.units()
            )));
        }
        let mut rng = rng_for(cfg.seed, u64::MAX);
        let s = cfg.init_scale;
        let padded = w.padded(units, || rng.gen_range(-s..=s));
        starts.push((padded.clone(), false));
        starts.push((padded, true));
    }
    let fresh = if warm.is_some() { cfg.restarts - 1 } else { cfg.restarts };
    for r in 0..fresh {
        let mut rng = rng_for(cfg.seed, r as u64);
        let s = cfg.init_scale;
        let biases = (0..units).map(|_| rng.gen_range(-s..=s)).collect();
        let weights = (0..units * n).map(|_| rng.gen_range(-s..=s)).collect();
        let net = ShallowNet::new(n, cfg.activation, vec![0.0; units], biases, weights)?;
        starts.push((net, true));
    }

    let mut best: Option<Fit> = None;
    let mut diverged = 0;
    let mut outputs = vec![0.0; inputs.len()];
    for (i, (net, train)) in starts.into_iter().enumerate() {
        let net = if train {
            match descend(net, inputs, targets, cfg) {
                Some(net) => net,
                None => {
                    log::debug!("restart {i} diverged");
                    diverged += 1;
                    continue;
                }
            }
        } else {
            net
        };
        for (o, x) in outputs.iter_mut().zip(inputs.iter()) {
            *o = net.value(x);
        }
        if outputs.iter().any(|v| !v.is_finite()) {
            diverged += 1;
            continue;
        }
        let error = sup_norm_tables(&outputs, targets);
        if best.as_ref().is_none_or(|b| error < b.error) {
            best = Some(Fit {
                net,
                error,
                selected: i,
                diverged: 0,
            });
        }
    }
    match best {
        Some(mut fit) => {
            fit.diverged = diverged;
            Ok(fit)
        }
        None => Err(Error::Divergence(format!(
            "all {diverged} restarts produced non-finite loss"
        ))),
    }
}

/// Fits a shallow net to `f` sampled on `points`.
pub fn fit_shallow(
    f: &dyn Fn(&[f64]) -> f64,
    points: &PointSet,
    units: usize,
    cfg: &FitConfig,
) -> Result<Fit> {
    let targets = points.evaluate(f)?;
    fit_samples(points, &targets, units, cfg, None)
}

/// Runs `cfg.iterations` full-batch steps; `None` if the loss becomes non-finite.
fn descend(mut net: ShallowNet, inputs: &PointSet, targets: &[f64], cfg: &FitConfig) -> Option<ShallowNet> {
    let n = net.n;
    let units = net.units();
    let m = inputs.len() as f64;
    let act = net.activation;

    let mut grad = vec![0.0; net.param_count()];
    let mut first = vec![0.0; grad.len()];
    let mut second = vec![0.0; grad.len()];
    let mut hidden = vec![0.0; units];
    let mut slope = vec![0.0; units];
    let (beta1, beta2, eps) = (0.9f64, 0.999f64, 1e-8);
    let (mut pow1, mut pow2) = (1.0f64, 1.0f64);

    for t in 0..cfg.iterations {
        grad.fill(0.0);
        let mut loss = 0.0;
        {
            let (ga, rest) = grad.split_at_mut(units);
            let (gb, gw) = rest.split_at_mut(units);
            for (x, &y) in inputs.iter().zip(targets) {
                let mut out = 0.0;
                for k in 0..units {
                    let (s, ds) = act.value_and_derivative(net.pre_activation(k, x));
                    hidden[k] = s;
                    slope[k] = ds;
                    out += net.outer[k] * s;
                }
                let r = out - y;
                loss += r * r;
                let c = 2.0 * r / m;
                for k in 0..units {
                    ga[k] += c * hidden[k];
                    let delta = c * net.outer[k] * slope[k];
                    gb[k] += delta;
                    for (g, xi) in gw[k * n..(k + 1) * n].iter_mut().zip(x) {
                        *g += delta * xi;
                    }
                }
            }
        }
        let mse = loss / m;
        if !mse.is_finite() {
            return None;
        }
        if mse < EXACT_FIT_MSE {
            break;
        }
        let step = cfg.step_size / (1.0 + t as f64 * cfg.step_decay);
        match cfg.optimizer {
            Optimizer::Gd => {
                for (p, g) in params_mut(&mut net).zip(&grad) {
                    *p -= step * g;
                }
            }
            Optimizer::Adam => {
                pow1 *= beta1;
                pow2 *= beta2;
                for (((p, g), m1), m2) in params_mut(&mut net)
                    .zip(&grad)
                    .zip(first.iter_mut())
                    .zip(second.iter_mut())
                {
                    *m1 = beta1 * *m1 + (1.0 - beta1) * g;
                    *m2 = beta2 * *m2 + (1.0 - beta2) * g * g;
                    let mhat = *m1 / (1.0 - pow1);
                    let vhat = *m2 / (1.0 - pow2);
                    *p -= step * mhat / (vhat.sqrt() + eps);
                }
            }
        }
    }
    let finite = net.params().iter().all(|p| p.is_finite());
    finite.then_some(net)
}

fn params_mut(net: &mut ShallowNet) -> impl Iterator<Item = &mut f64> {
    net.outer
        .iter_mut()
        .chain(net.biases.iter_mut())
        .chain(net.weights.iter_mut())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;
    use proptest::prelude::*;

    fn unit(a: f64, w: f64, b: f64, act: Activation) -> ShallowNet {
        ShallowNet::new(1, act, vec![a], vec![b], vec![w]).unwrap()
    }

    #[test]
    fn eval_examples() {
        assert_eq!(unit(1.0, 0.0, 0.0, Activation::Tanh).eval(&[0.3]).unwrap(), 0.0);
        assert_eq!(unit(1.0, 0.0, 0.0, Activation::Logistic).eval(&[0.3]).unwrap(), 0.5);
        let twin = ShallowNet::new(2, Activation::Tanh, vec![1.0, -1.0], vec![0.2, 0.2], vec![0.5, -1.5, 0.5, -1.5])
            .unwrap();
        for x in [[0.1, 0.9], [-1.0, 1.0], [0.7, -0.3]] {
            assert_eq!(twin.eval(&x).unwrap(), 0.0);
        }
        assert!(twin.eval(&[0.1]).is_err());
    }

    #[test]
    fn grad_examples() {
        let net = unit(1.0, 0.0, 0.0, Activation::Tanh);
        let g = net.grad_params(&[0.4], 1.0).unwrap();
        assert_eq!(g[1], 1.0);
        let z = net.grad_params(&[0.4], 0.0).unwrap();
        assert!(z.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn param_count_is_n_plus_two_times_units() {
        let net = ShallowNet::zeros(3, 5, Activation::Softplus);
        assert_eq!(net.param_count(), 25);
        assert_eq!(net.params().len(), 25);
        assert!(ShallowNet::from_params(3, 5, Activation::Tanh, &[0.0; 24]).is_err());
    }

    #[test]
    fn text_round_trip_is_bit_exact() {
        let net = ShallowNet::new(
            2,
            Activation::Logistic,
            vec![1.0 / 3.0, -2e-300],
            vec![0.1, f64::MIN_POSITIVE],
            vec![std::f64::consts::PI, -0.0, 1e300, 7.0],
        )
        .unwrap();
        let back: ShallowNet = net.to_string().parse().unwrap();
        assert_eq!(
            back.params().iter().map(|p| p.to_bits()).collect::<Vec<_>>(),
            net.params().iter().map(|p| p.to_bits()).collect::<Vec<_>>()
        );
        assert_eq!(back, net);
        assert!("shallow-net\nn 1\nunits 2\nactivation tanh\na 1\nb 1 2\nw 1 2\n"
            .parse::<ShallowNet>()
            .is_err());
    }

    #[test]
    fn zero_target_stays_zero() {
        let g = make_grid(1, 65).unwrap();
        let fit = fit_shallow(&|_| 0.0, g.points(), 3, &FitConfig::default()).unwrap();
        assert_eq!(fit.error, 0.0);
        assert!(fit.net.outer().iter().all(|&a| a == 0.0));
    }

    #[test]
    fn planted_teacher_is_recovered() {
        let g = make_grid(1, 1025).unwrap();
        let teacher = |x: &[f64]| 0.8 * (1.5 * x[0] + 0.2).tanh();
        let cfg = FitConfig {
            seed: 7,
            ..FitConfig::default()
        };
        let fit = fit_shallow(&teacher, g.points(), 4, &cfg).unwrap();
        assert!(fit.error <= 0.02, "{}", fit.error);
    }

    #[test]
    fn warm_start_never_worse() {
        let g = make_grid(1, 257).unwrap();
        let f = |x: &[f64]| 0.8 * (1.5 * x[0] + 0.2).tanh();
        let targets = g.points().evaluate(&f).unwrap();
        let cfg = FitConfig {
            restarts: 2,
            iterations: 300,
            ..FitConfig::default()
        };
        let small = fit_samples(g.points(), &targets, 1, &cfg, None).unwrap();
        let big = fit_samples(g.points(), &targets, 8, &cfg, Some(&small.net)).unwrap();
        assert!(big.error <= small.error);
        assert!(fit_samples(g.points(), &targets, 8, &cfg, Some(&ShallowNet::zeros(2, 1, Activation::Tanh))).is_err());
    }

    #[test]
    fn rejects_bad_config() {
        let g = make_grid(1, 5).unwrap();
        let t = vec![0.0; 5];
        for cfg in [
            FitConfig { restarts: 0, ..FitConfig::default() },
            FitConfig { step_size: 0.0, ..FitConfig::default() },
            FitConfig { step_decay: 0.0, ..FitConfig::default() },
        ] {
            assert!(fit_samples(g.points(), &t, 2, &cfg, None).is_err());
        }
        assert!(fit_samples(g.points(), &t[..4], 2, &FitConfig::default(), None).is_err());
    }

    #[test]
    fn divergence_skips_restart() {
        let g = make_grid(1, 33).unwrap();
        let t: Vec<f64> = g.points().iter().map(|x| 1e200 * x[0]).collect();
        let cfg = FitConfig {
            restarts: 2,
            iterations: 50,
            step_size: 1e10,
            optimizer: Optimizer::Gd,
            ..FitConfig::default()
        };
        let err = fit_samples(g.points(), &t, 2, &cfg, None).unwrap_err();
        assert_eq!(err.category(), "divergence");
    }

    fn net_strategy() -> impl Strategy<Value = (ShallowNet, Vec<f64>, usize)> {
        (1usize..4, 1usize..5, 0usize..3).prop_flat_map(|(n, units, act)| {
            let len = (n + 2) * units;
            (
                prop::collection::vec(-2.0f64..2.0, len),
                prop::collection::vec(-1.0f64..1.0, n),
                Just((n, units, act)),
            )
                .prop_map(|(p, x, (n, units, act))| {
                    let net = ShallowNet::from_params(n, units, Activation::ALL[act], &p).unwrap();
                    (net, x, units)
                })
        })
    }

    proptest! {
        #[test]
        fn zero_padding_preserves_output((net, x, units) in net_strategy(), fill in -3.0f64..3.0) {
            let padded = net.padded(units + 1, || fill);
            prop_assert_eq!(padded.units(), units + 1);
            prop_assert_eq!(padded.eval(&x).unwrap(), net.eval(&x).unwrap());
        }

        #[test]
        fn param_round_trip((net, _x, _u) in net_strategy()) {
            let back = ShallowNet::from_params(net.input_dim(), net.units(), net.activation(), &net.params()).unwrap();
            prop_assert_eq!(back, net);
        }
    }
}
