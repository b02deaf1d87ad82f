//! The cube `I^n = [-1, 1]^n`, tensor-product grids over it and grid-based sup-norm measurement.
//!
//! Every sup norm in this crate is a maximum over a finite point set. That is a lower bound on the
//! true maximum over the cube; refining the grid can only raise it.

use crate::error::{Error, Result};

/// Largest lattice `make_grid` will materialise.
pub const DEFAULT_POINT_BUDGET: usize = 1 << 24;

/// A finite set of points in `R^dim`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSet {
    dim: usize,
    coords: Vec<f64>,
}

impl PointSet {
    pub fn new(dim: usize, coords: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("point dimension must be >= 1".into()));
        }
        if coords.len() % dim != 0 {
            return Err(Error::InvalidArgument(format!(
                "coordinate buffer of length {} is not a multiple of dimension {dim}",
                coords.len()
            )));
        }
        Ok(Self { dim, coords })
    }

    pub fn from_rows<R: AsRef<[f64]>>(dim: usize, rows: &[R]) -> Result<Self> {
        let mut coords = Vec::with_capacity(rows.len() * dim);
        for row in rows {
            let row = row.as_ref();
            if row.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    actual: row.len(),
                });
            }
            coords.extend_from_slice(row);
        }
        Ok(Self { dim, coords })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.coords.chunks_exact(self.dim)
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    /// Evaluates `f` at every point, rejecting non-finite output.
    pub fn evaluate(&self, f: &dyn Fn(&[f64]) -> f64) -> Result<Vec<f64>> {
        self.iter()
            .map(|x| {
                let v = f(x);
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(Error::NonFiniteOracle { point: x.to_vec() })
                }
            })
            .collect()
    }
}

/// Tensor-product lattice of `p^n` points over `[-1, 1]^n`, both endpoints included on every axis.
///
/// Points are enumerated lexicographically with the first axis varying slowest, so point `i`
/// has axis-`a` index `(i / p^(n-1-a)) % p`. Argmax ties resolve to the earliest point.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    points_per_dim: usize,
    axis: Vec<f64>,
    points: PointSet,
}

/// Builds the `p^n` lattice over `I^n` using [`DEFAULT_POINT_BUDGET`].
pub fn make_grid(n: usize, p: usize) -> Result<Grid> {
    Grid::with_budget(n, p, DEFAULT_POINT_BUDGET)
}

/// Measurement density used when the caller does not choose one.
pub fn default_points_per_dim(n: usize) -> usize {
    match n {
        1 => 1025,
        2 => 129,
        3 => 33,
        _ => 9,
    }
}

impl Grid {
    pub fn with_budget(n: usize, p: usize, budget: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("grid dimension must be >= 1".into()));
        }
        if p < 2 {
            return Err(Error::InvalidArgument(format!(
                "grid needs at least 2 points per axis, got {p}"
            )));
        }
        let total = (p as u128).checked_pow(n as u32).unwrap_or(u128::MAX);
        if total > budget as u128 {
            return Err(Error::ResourceExhausted {
                points: total,
                budget,
            });
        }
        let total = total as usize;
        let denom = (p - 1) as f64;
        let axis: Vec<f64> = (0..p).map(|i| -1.0 + 2.0 * (i as f64 / denom)).collect();

        let mut coords = Vec::with_capacity(total * n);
        let mut idx = vec![0usize; n];
        for _ in 0..total {
            coords.extend(idx.iter().map(|&i| axis[i]));
            for a in (0..n).rev() {
                idx[a] += 1;
                if idx[a] < p {
                    break;
                }
                idx[a] = 0;
            }
        }
        Ok(Self {
            points_per_dim: p,
            axis,
            points: PointSet { dim: n, coords },
        })
    }

    pub fn dim(&self) -> usize {
        self.points.dim
    }

    pub fn points_per_dim(&self) -> usize {
        self.points_per_dim
    }

    /// The 1-D coordinates shared by every axis.
    pub fn axis(&self) -> &[f64] {
        &self.axis
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &PointSet {
        &self.points
    }
}

impl AsRef<PointSet> for Grid {
    fn as_ref(&self) -> &PointSet {
        &self.points
    }
}

impl AsRef<PointSet> for PointSet {
    fn as_ref(&self) -> &PointSet {
        self
    }
}

/// `max_x |f(x) - g(x)|` over the point set.
pub fn sup_norm_diff(
    f: &dyn Fn(&[f64]) -> f64,
    g: &dyn Fn(&[f64]) -> f64,
    points: &PointSet,
) -> Result<f64> {
    let mut best = 0.0f64;
    for x in points.iter() {
        let (a, b) = (f(x), g(x));
        if !a.is_finite() || !b.is_finite() {
            return Err(Error::NonFiniteOracle { point: x.to_vec() });
        }
        let d = (a - b).abs();
        if d > best {
            best = d;
        }
    }
    Ok(best)
}

/// Sup norm of the difference of two value tables.
pub fn sup_norm_tables(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
}

/// Sup norm of a single value table.
pub fn sup_norm(values: &[f64]) -> f64 {
    values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

/// Largest difference quotient over axis-adjacent lattice pairs.
///
/// This is a lower bound on the Lipschitz constant; prefer an analytic value when one is known.
pub fn estimate_lipschitz(f: &dyn Fn(&[f64]) -> f64, grid: &Grid) -> Result<f64> {
    let p = grid.points_per_dim();
    if p < 3 {
        return Err(Error::InvalidArgument(format!(
            "Lipschitz estimation needs at least 3 points per axis, got {p}"
        )));
    }
    let n = grid.dim();
    let values = grid.points().evaluate(f)?;
    let mut best = 0.0f64;
    for a in 0..n {
        let stride = p.pow((n - 1 - a) as u32);
        for i in 0..values.len() {
            if (i / stride) % p == p - 1 {
                continue;
            }
            let j = i + stride;
            let dx = (grid.points().point(j)[a] - grid.points().point(i)[a]).abs();
            let q = (values[j] - values[i]).abs() / dx;
            if q > best {
                best = q;
            }
        }
    }
    Ok(best)
}
