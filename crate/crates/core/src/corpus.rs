//! Smooth target functions on `I^n` with known constants.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

pub type Oracle = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// A named deterministic target `f: I^n -> R`.
#[derive(Clone)]
pub struct TargetFunction {
    pub name: String,
    pub n: usize,
    oracle: Oracle,
    /// Declared Sobolev order (metadata only).
    pub smoothness_m: u32,
    /// Analytic Lipschitz constant over `I^n`, when known.
    pub lipschitz: Option<f64>,
    /// Rescaled so that `||f|| + sum_{1<=|k|<=m} ||D^k f|| <= 1` analytically.
    pub sobolev_scaled: bool,
}

impl fmt::Debug for TargetFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TargetFunction")
            .field("name", &self.name)
            .field("n", &self.n)
            .field("smoothness_m", &self.smoothness_m)
            .field("lipschitz", &self.lipschitz)
            .field("sobolev_scaled", &self.sobolev_scaled)
            .finish_non_exhaustive()
    }
}

impl TargetFunction {
    pub fn new(
        name: impl Into<String>,
        n: usize,
        oracle: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            n,
            oracle: Arc::new(oracle),
            smoothness_m: 1,
            lipschitz: None,
            sobolev_scaled: false,
        }
    }

    pub fn with_lipschitz(mut self, l: f64) -> Self {
        self.lipschitz = Some(l);
        self
    }

    pub fn with_smoothness(mut self, m: u32) -> Self {
        self.smoothness_m = m;
        self
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        (self.oracle)(x)
    }

    pub fn oracle(&self) -> &Oracle {
        &self.oracle
    }

    pub fn as_fn(&self) -> impl Fn(&[f64]) -> f64 + '_ {
        move |x| (self.oracle)(x)
    }
}

// exp(-4x^2): ||f'|| = sqrt(8) e^{-1/2}.
fn bump_scale() -> f64 {
    1.0 / (1.0 + 8f64.sqrt() * (-0.5f64).exp())
}

// exp(-|x|^2) in 3-D: each partial peaks at sqrt(2) e^{-1/2}.
fn radial_scale() -> f64 {
    1.0 / (1.0 + 3.0 * 2f64.sqrt() * (-0.5f64).exp())
}

/// 1-D `tanh(2x)`.
pub fn tanh_1d() -> TargetFunction {
    TargetFunction::new("tanh1d", 1, |x| (2.0 * x[0]).tanh())
        .with_lipschitz(2.0)
        .with_smoothness(2)
}

/// 1-D Gaussian bump `c * exp(-4x^2)` scaled into the order-1 Sobolev ball.
pub fn bump_1d() -> TargetFunction {
    let c = bump_scale();
    let mut f = TargetFunction::new("bump1d", 1, move |x| c * (-4.0 * x[0] * x[0]).exp())
        .with_lipschitz(c * 8f64.sqrt() * (-0.5f64).exp());
    f.sobolev_scaled = true;
    f
}

/// 2-D `0.5 cos(pi (x + y) / 2)`.
pub fn cos_2d() -> TargetFunction {
    TargetFunction::new("cos2d", 2, |x| 0.5 * (PI * (x[0] + x[1]) / 2.0).cos())
        .with_lipschitz(PI * 2f64.sqrt() / 4.0)
        .with_smoothness(2)
}

/// 3-D radial `c * exp(-|x|^2)` scaled into the order-1 Sobolev ball.
pub fn radial_3d() -> TargetFunction {
    let c = radial_scale();
    let mut f = TargetFunction::new("radial3d", 3, move |x| {
        c * (-(x.iter().map(|v| v * v).sum::<f64>())).exp()
    })
    .with_lipschitz(c * 2f64.sqrt() * (-0.5f64).exp());
    f.sobolev_scaled = true;
    f
}

/// `(3x + 4y) / 7`, Lipschitz constant `5/7`.
pub fn plane_2d() -> TargetFunction {
    TargetFunction::new("plane2d", 2, |x| (3.0 * x[0] + 4.0 * x[1]) / 7.0).with_lipschitz(5.0 / 7.0)
}

/// The zero function in `n` dimensions.
pub fn zero(n: usize) -> TargetFunction {
    let mut f = TargetFunction::new(format!("zero{n}d"), n, |_| 0.0).with_lipschitz(0.0);
    f.sobolev_scaled = true;
    f
}

/// A constant function in `n` dimensions.
pub fn constant(n: usize, value: f64) -> TargetFunction {
    TargetFunction::new(format!("const{n}d"), n, move |_| value).with_lipschitz(0.0)
}

/// The four smooth benchmark targets.
pub fn standard() -> Vec<TargetFunction> {
    vec![tanh_1d(), bump_1d(), cos_2d(), radial_3d()]
}

/// Every name accepted by [`by_name`].
pub fn names() -> Vec<String> {
    standard()
        .into_iter()
        .map(|f| f.name)
        .chain(["plane2d", "zero1d", "zero2d", "zero3d", "const2d"].map(String::from))
        .collect()
}

pub fn by_name(name: &str) -> Result<TargetFunction> {
    let f = match name {
        "tanh1d" => tanh_1d(),
        "bump1d" => bump_1d(),
        "cos2d" => cos_2d(),
        "radial3d" => radial_3d(),
        "plane2d" => plane_2d(),
        "zero1d" => zero(1),
        "zero2d" => zero(2),
        "zero3d" => zero(3),
        "const2d" => constant(2, 0.25),
        other => {
            return Err(Error::InvalidArgument(format!(
                "unknown function '{other}' (known: {})",
                names().join(", ")
            )))
        }
    };
    Ok(f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{estimate_lipschitz, make_grid, sup_norm, default_points_per_dim};

    #[test]
    fn every_name_resolves() {
        for name in names() {
            let f = by_name(&name).unwrap();
            assert_eq!(f.name, name);
        }
        assert!(by_name("nope").is_err());
    }

    #[test]
    fn corpus_sup_norm_at_most_one() {
        for f in standard() {
            let g = make_grid(f.n, default_points_per_dim(f.n).min(33)).unwrap();
            let v = g.points().evaluate(&f.as_fn()).unwrap();
            assert!(sup_norm(&v) <= 1.0, "{}", f.name);
        }
    }

    #[test]
    fn lipschitz_estimate_below_analytic() {
        for f in names().iter().map(|n| by_name(n).unwrap()) {
            let g = make_grid(f.n, 17).unwrap();
            let est = estimate_lipschitz(&f.as_fn(), &g).unwrap();
            let l = f.lipschitz.unwrap();
            assert!(est <= l + 1e-12, "{}: {est} > {l}", f.name);
        }
    }

    #[test]
    fn sobolev_scaled_entries_sum_to_one() {
        // order-1 Sobolev sum: sup |f| plus the sup of each partial derivative
        let b = bump_1d();
        let c = b.eval(&[0.0]);
        let d1 = c * 8f64.sqrt() * (-0.5f64).exp();
        assert!((c + d1 - 1.0).abs() < 1e-15);

        let r = radial_3d();
        let c = r.eval(&[0.0, 0.0, 0.0]);
        let partial = c * 2f64.sqrt() * (-0.5f64).exp();
        assert!((c + 3.0 * partial - 1.0).abs() < 1e-15);
    }

    #[test]
    fn oracles_are_deterministic() {
        for f in standard() {
            let x = vec![0.123456789; f.n];
            assert_eq!(f.eval(&x).to_bits(), f.eval(&x).to_bits());
        }
    }
}
